//! Ordered frame sources with a background prefetch buffer.
//!
//! Backends decode frames by index. [`FrameStream`] runs one producer thread
//! per stream that decodes ahead into a bounded channel; [`UnbufferedReader`]
//! calls the backend directly and is the reference for byte identity.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use crossbeam_channel::{bounded, Receiver};
use thiserror::Error;

pub const DEFAULT_BUFFER_CAPACITY: usize = 64;
pub const IMAGE_DIR_BACKEND: &str = "image-dir";

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("unknown frame backend `{0}`")]
    UnknownBackend(String),
    #[error("cannot read source {path}: {reason}")]
    UnreadableSource { path: PathBuf, reason: String },
    #[error("failed to decode frame {index}: {reason}")]
    DecodeFailure { index: u64, reason: String },
    #[error("frame index {index} out of range (frame count {count})")]
    OutOfRange { index: u64, count: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = FrameError> = std::result::Result<T, E>;

/// One decoded frame, row-major, `channels` bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: u64,
    pub pixels: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("index", &self.index)
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .field("bytes", &self.pixels.len())
            .finish()
    }
}

impl Frame {
    /// Re-encodes the frame as PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            4 => image::ExtendedColorType::Rgba8,
            c => return Err(FrameError::InvalidArgument(format!("cannot encode {c}-channel frame"))),
        };
        let mut out = Vec::new();
        image::ImageEncoder::write_image(
            image::codecs::png::PngEncoder::new(&mut out),
            &self.pixels,
            self.width,
            self.height,
            color,
        )
        .map_err(|e| FrameError::DecodeFailure {
            index: self.index,
            reason: e.to_string(),
        })?;
        Ok(out)
    }
}

/// A random-access frame decoder. `read_frame` returns `Ok(None)` past the
/// last frame.
pub trait FrameBackend: Send + 'static {
    fn frame_count(&self) -> Option<u64>;
    fn dimensions(&self) -> (u32, u32);
    fn read_frame(&mut self, index: u64) -> Result<Option<Frame>>;
}

type BackendFactory = Box<dyn Fn(&Path) -> Result<Box<dyn FrameBackend>> + Send + Sync>;

/// Named backend constructors. `image-dir` is always registered.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register(IMAGE_DIR_BACKEND, |p| {
            Ok(Box::new(ImageDirBackend::open(p)?) as Box<dyn FrameBackend>)
        });
        reg
    }
}

impl BackendRegistry {
    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(&Path) -> Result<Box<dyn FrameBackend>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn open_backend(&self, source: &Path, backend: &str) -> Result<Box<dyn FrameBackend>> {
        let factory = self
            .factories
            .get(backend)
            .ok_or_else(|| FrameError::UnknownBackend(backend.to_string()))?;
        factory(source)
    }

    pub fn open_stream(&self, source: &Path, backend: &str, buffer_capacity: usize) -> Result<FrameStream> {
        FrameStream::new(self.open_backend(source, backend)?, buffer_capacity)
    }

    pub fn open_unbuffered(&self, source: &Path, backend: &str) -> Result<UnbufferedReader> {
        Ok(UnbufferedReader::new(self.open_backend(source, backend)?))
    }
}

/// Opens `source` with a built-in backend.
pub fn open_stream(source: &Path, backend: &str, buffer_capacity: usize) -> Result<FrameStream> {
    BackendRegistry::default().open_stream(source, backend, buffer_capacity)
}

/// A directory of PNG/BMP images in natural numeric order of file stem.
pub struct ImageDirBackend {
    files: Vec<PathBuf>,
    width: u32,
    height: u32,
}

impl ImageDirBackend {
    pub fn open(dir: &Path) -> Result<Self> {
        let unreadable = |reason: String| FrameError::UnreadableSource {
            path: dir.to_path_buf(),
            reason,
        };
        let entries = std::fs::read_dir(dir).map_err(|e| unreadable(e.to_string()))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| unreadable(e.to_string()))?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if path.is_file() && matches!(ext.as_deref(), Some("png" | "bmp")) {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(unreadable("no PNG or BMP images".into()));
        }
        files.sort_by(|a, b| {
            let sa = a.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let sb = b.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            natural_cmp(sa, sb).then_with(|| a.cmp(b))
        });
        let (width, height) = image::image_dimensions(&files[0]).map_err(|e| unreadable(e.to_string()))?;
        Ok(Self { files, width, height })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }
}

impl FrameBackend for ImageDirBackend {
    fn frame_count(&self) -> Option<u64> {
        Some(self.files.len() as u64)
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn read_frame(&mut self, index: u64) -> Result<Option<Frame>> {
        let Some(path) = self.files.get(index as usize) else {
            return Ok(None);
        };
        let img = image::open(path)
            .map_err(|e| FrameError::DecodeFailure {
                index,
                reason: format!("{}: {e}", path.display()),
            })?
            .into_rgb8();
        let (width, height) = img.dimensions();
        Ok(Some(Frame {
            index,
            pixels: img.into_raw(),
            width,
            height,
            channels: 3,
        }))
    }
}

/// Compares strings treating runs of ASCII digits as numbers, so `f2` sorts
/// before `f10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let da = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let db = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let na = trim_zeros(&a[..da]);
                let nb = trim_zeros(&b[..db]);
                let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[da..];
                b = &b[db..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let n = d.iter().take_while(|&&c| c == b'0').count();
    &d[n..]
}

/// Sequential and random access without any read-ahead.
pub struct UnbufferedReader {
    backend: Box<dyn FrameBackend>,
    cursor: u64,
}

impl UnbufferedReader {
    pub fn new(backend: Box<dyn FrameBackend>) -> Self {
        Self { backend, cursor: 0 }
    }

    pub fn frame_count(&self) -> Option<u64> {
        self.backend.frame_count()
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        let frame = self.backend.read_frame(self.cursor)?;
        if frame.is_some() {
            self.cursor += 1;
        }
        Ok(frame)
    }

    pub fn seek(&mut self, index: u64) -> Result<()> {
        check_range(index, self.backend.frame_count())?;
        self.cursor = index;
        Ok(())
    }

    pub fn read_at(&mut self, index: u64) -> Result<Option<Frame>> {
        self.backend.read_frame(index)
    }
}

fn check_range(index: u64, count: Option<u64>) -> Result<()> {
    match count {
        Some(count) if index >= count => Err(FrameError::OutOfRange { index, count }),
        _ => Ok(()),
    }
}

struct Producer {
    rx: Receiver<Result<Frame>>,
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Box<dyn FrameBackend>>,
}

/// A buffered frame source. At most `buffer_capacity` decoded frames are
/// held between the producer and the consumer.
pub struct FrameStream {
    backend: Option<Box<dyn FrameBackend>>,
    producer: Option<Producer>,
    capacity: usize,
    cursor: u64,
    frame_count: Option<u64>,
    width: u32,
    height: u32,
}

impl FrameStream {
    pub fn new(backend: Box<dyn FrameBackend>, buffer_capacity: usize) -> Result<Self> {
        if buffer_capacity == 0 {
            return Err(FrameError::InvalidArgument("buffer capacity must be at least 1".into()));
        }
        let (width, height) = backend.dimensions();
        let frame_count = backend.frame_count();
        let mut stream = Self {
            backend: Some(backend),
            producer: None,
            capacity: buffer_capacity,
            cursor: 0,
            frame_count,
            width,
            height,
        };
        stream.start(0);
        Ok(stream)
    }

    pub fn frame_count(&self) -> Option<u64> {
        self.frame_count
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn buffer_capacity(&self) -> usize {
        self.capacity
    }

    /// Index the next call to [`next_frame`](Self::next_frame) returns.
    pub fn position(&self) -> u64 {
        self.cursor
    }

    /// Frames decoded and waiting in the buffer.
    pub fn buffered(&self) -> usize {
        self.producer.as_ref().map_or(0, |p| p.rx.len())
    }

    fn start(&mut self, from: u64) {
        let mut backend = self.backend.take().expect("backend present when idle");
        // The sender blocks while holding one frame, so the channel keeps one
        // slot fewer than the capacity.
        let (tx, rx) = bounded(self.capacity - 1);
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || {
            let mut index = from;
            while !flag.load(AtomicOrdering::Relaxed) {
                match backend.read_frame(index) {
                    Ok(Some(frame)) => {
                        if tx.send(Ok(frame)).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
                index += 1;
            }
            backend
        });
        self.producer = Some(Producer { rx, stop, handle });
    }

    fn stop(&mut self) {
        if let Some(p) = self.producer.take() {
            p.stop.store(true, AtomicOrdering::Relaxed);
            drop(p.rx);
            let backend = p.handle.join().expect("frame producer panicked");
            self.backend = Some(backend);
        }
    }

    /// Returns the frame at the cursor, blocking while the producer is still
    /// decoding it. `Ok(None)` marks the end of the stream.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        let Some(p) = &self.producer else {
            return Ok(None);
        };
        match p.rx.recv() {
            Ok(Ok(frame)) => {
                self.cursor = frame.index + 1;
                Ok(Some(frame))
            }
            Ok(Err(e)) => {
                self.stop();
                Err(e)
            }
            Err(_) => {
                self.stop();
                Ok(None)
            }
        }
    }

    /// Drops buffered frames and restarts decoding at `index`.
    pub fn seek(&mut self, index: u64) -> Result<()> {
        check_range(index, self.frame_count)?;
        self.stop();
        self.cursor = index;
        self.start(index);
        Ok(())
    }

    /// Blocks until the buffer is full or the producer has finished.
    pub fn wait_until_filled(&self) {
        if let Some(p) = &self.producer {
            let target = self.capacity - 1;
            while p.rx.len() < target && !p.handle.is_finished() {
                std::thread::yield_now();
            }
        }
    }
}

impl Drop for FrameStream {
    fn drop(&mut self) {
        self.stop();
    }
}

impl Iterator for FrameStream {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    Idle,
    Loaded,
}

impl fmt::Display for LoadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadMode::Idle => "idle",
            LoadMode::Loaded => "loaded",
        })
    }
}

impl std::str::FromStr for LoadMode {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idle" => Ok(LoadMode::Idle),
            "loaded" => Ok(LoadMode::Loaded),
            other => Err(FrameError::InvalidArgument(format!(
                "load mode must be idle or loaded, got `{other}`"
            ))),
        }
    }
}

/// Suffix that selects the buffered reader in benchmark reader names.
pub const BUFFERED_SUFFIX: &str = ":buffered";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub reader: String,
    pub load_mode: LoadMode,
    pub fps: f64,
    pub frames: u64,
}

#[derive(Debug)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub failures: Vec<(String, FrameError)>,
    /// Buffered readers are timed after their first buffer fill completes.
    pub warmup_excluded: bool,
}

impl BenchmarkReport {
    /// Writes `backend,load_mode,fps` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["backend", "load_mode", "fps"])?;
        for r in &self.rows {
            w.write_record([r.reader.clone(), r.load_mode.to_string(), r.fps.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub n_frames: u64,
    pub load_mode: LoadMode,
    pub buffer_capacity: usize,
}

/// Consumer-side work done on every delivered frame.
pub fn frame_checksum(frame: &Frame) -> u64 {
    frame.pixels.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Busy-spins one thread per logical core until dropped.
pub struct CpuBurn {
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl CpuBurn {
    pub fn start() -> Self {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..cores)
            .map(|_| {
                let stop = Arc::clone(&stop);
                std::thread::spawn(move || {
                    let mut x = 0u64;
                    while !stop.load(AtomicOrdering::Relaxed) {
                        x = std::hint::black_box(x.wrapping_mul(6364136223846793005).wrapping_add(1));
                    }
                })
            })
            .collect();
        Self { stop, workers }
    }
}

impl Drop for CpuBurn {
    fn drop(&mut self) {
        self.stop.store(true, AtomicOrdering::Relaxed);
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Times `n_frames` reads through each named reader. A reader is a backend
/// name, optionally suffixed with [`BUFFERED_SUFFIX`]. Sources shorter than
/// `n_frames` are read again from the start. A reader that fails to open or
/// decode is reported in `failures` and the others still run.
pub fn benchmark_throughput(
    registry: &BackendRegistry,
    source: &Path,
    readers: &[String],
    opts: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    if opts.n_frames == 0 {
        return Err(FrameError::InvalidArgument("n_frames must be at least 1".into()));
    }
    let _burn = (opts.load_mode == LoadMode::Loaded).then(CpuBurn::start);
    let mut report = BenchmarkReport {
        rows: Vec::new(),
        failures: Vec::new(),
        warmup_excluded: true,
    };
    for name in readers {
        let outcome = match name.strip_suffix(BUFFERED_SUFFIX) {
            Some(backend) => time_buffered(registry, source, backend, opts),
            None => time_unbuffered(registry, source, name, opts),
        };
        match outcome {
            Ok(seconds) => report.rows.push(BenchmarkRow {
                reader: name.clone(),
                load_mode: opts.load_mode,
                fps: opts.n_frames as f64 / seconds,
                frames: opts.n_frames,
            }),
            Err(e) => report.failures.push((name.clone(), e)),
        }
    }
    Ok(report)
}

fn time_unbuffered(registry: &BackendRegistry, source: &Path, backend: &str, opts: &BenchmarkOptions) -> Result<f64> {
    let mut reader = registry.open_unbuffered(source, backend)?;
    let mut sink = 0u64;
    let start = Instant::now();
    let mut read = 0;
    while read < opts.n_frames {
        match reader.next_frame()? {
            Some(frame) => {
                sink ^= frame_checksum(&frame);
                read += 1;
            }
            None => reader.seek(0)?,
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    Ok(elapsed)
}

fn time_buffered(registry: &BackendRegistry, source: &Path, backend: &str, opts: &BenchmarkOptions) -> Result<f64> {
    let mut stream = registry.open_stream(source, backend, opts.buffer_capacity)?;
    stream.wait_until_filled();
    let mut sink = 0u64;
    let start = Instant::now();
    let mut read = 0;
    while read < opts.n_frames {
        match stream.next_frame()? {
            Some(frame) => {
                sink ^= frame_checksum(&frame);
                read += 1;
            }
            None => stream.seek(0)?,
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);
    Ok(elapsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    fn write_fixture(dir: &Path, n: usize) {
        for i in 0..n {
            let img = image::RgbImage::from_fn(8, 6, |x, y| image::Rgb([(i * 10) as u8, x as u8 * 20, y as u8 * 30]));
            let ext = if i % 2 == 0 { "png" } else { "bmp" };
            img.save(dir.join(format!("frame{i}.{ext}"))).unwrap();
        }
    }

    fn indices(stream: FrameStream) -> Vec<u64> {
        stream.map(|f| f.unwrap().index).collect()
    }

    #[test]
    fn natural_order() {
        let mut names = vec!["f10", "f2", "f1", "f002x", "g", "f02"];
        names.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(names, vec!["f1", "f2", "f02", "f002x", "f10", "g"]);
    }

    #[test]
    fn reads_directory_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 12);
        let stream = open_stream(dir.path(), IMAGE_DIR_BACKEND, 4).unwrap();
        assert_eq!(stream.frame_count(), Some(12));
        assert_eq!(stream.dimensions(), (8, 6));
        let frames: Vec<Frame> = stream.map(|f| f.unwrap()).collect();
        assert_eq!(frames.len(), 12);
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.index, i as u64);
            assert_eq!(f.pixels[0], (i * 10) as u8);
            assert_eq!(f.pixels.len(), 8 * 6 * 3);
        }
    }

    #[test]
    fn buffering_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 10);
        let reg = BackendRegistry::default();
        let mut plain = reg.open_unbuffered(dir.path(), IMAGE_DIR_BACKEND).unwrap();
        let mut reference = Vec::new();
        while let Some(f) = plain.next_frame().unwrap() {
            reference.push(f);
        }
        for cap in [1, 2, 3, 64] {
            let got: Vec<Frame> = reg
                .open_stream(dir.path(), IMAGE_DIR_BACKEND, cap)
                .unwrap()
                .map(|f| f.unwrap())
                .collect();
            assert_eq!(got, reference, "capacity {cap}");
        }
    }

    #[test]
    fn end_of_stream_is_sticky() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 3);
        let mut s = open_stream(dir.path(), IMAGE_DIR_BACKEND, 2).unwrap();
        for i in 0..3 {
            assert_eq!(s.next_frame().unwrap().unwrap().index, i);
        }
        assert!(s.next_frame().unwrap().is_none());
        assert!(s.next_frame().unwrap().is_none());
    }

    #[test]
    fn seek_restarts_at_index() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 10);
        let mut s = open_stream(dir.path(), IMAGE_DIR_BACKEND, 3).unwrap();
        s.next_frame().unwrap();
        s.next_frame().unwrap();
        s.seek(0).unwrap();
        assert_eq!(s.next_frame().unwrap().unwrap().index, 0);
        s.seek(5).unwrap();
        let got: Vec<u64> = (0..3).map(|_| s.next_frame().unwrap().unwrap().index).collect();
        assert_eq!(got, vec![5, 6, 7]);
        assert!(matches!(
            s.seek(10),
            Err(FrameError::OutOfRange { index: 10, count: 10 })
        ));
        // seek after exhaustion works too
        while s.next_frame().unwrap().is_some() {}
        s.seek(9).unwrap();
        assert_eq!(indices(s), vec![9]);
    }

    #[test]
    fn open_errors() {
        assert!(matches!(
            open_stream(Path::new("/nonexistent/frames"), IMAGE_DIR_BACKEND, 4),
            Err(FrameError::UnreadableSource { .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            open_stream(dir.path(), "opencv", 4),
            Err(FrameError::UnknownBackend(_))
        ));
        assert!(matches!(
            open_stream(dir.path(), IMAGE_DIR_BACKEND, 4),
            Err(FrameError::UnreadableSource { .. })
        ));
    }

    #[test]
    fn decode_failure_carries_index() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 3);
        std::fs::write(dir.path().join("frame3.png"), b"not a png").unwrap();
        let mut s = open_stream(dir.path(), IMAGE_DIR_BACKEND, 8).unwrap();
        for _ in 0..3 {
            s.next_frame().unwrap().unwrap();
        }
        match s.next_frame() {
            Err(FrameError::DecodeFailure { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected decode failure, got {other:?}"),
        }
    }

    /// Counts frames decoded but not yet handed to the consumer.
    struct Counting {
        decoded: Arc<AtomicUsize>,
        n: u64,
    }

    impl FrameBackend for Counting {
        fn frame_count(&self) -> Option<u64> {
            Some(self.n)
        }
        fn dimensions(&self) -> (u32, u32) {
            (1, 1)
        }
        fn read_frame(&mut self, index: u64) -> Result<Option<Frame>> {
            if index >= self.n {
                return Ok(None);
            }
            self.decoded.fetch_add(1, AtomicOrdering::SeqCst);
            Ok(Some(Frame {
                index,
                pixels: vec![index as u8],
                width: 1,
                height: 1,
                channels: 1,
            }))
        }
    }

    #[test]
    fn memory_is_bounded_by_capacity() {
        for cap in [1usize, 2, 5] {
            let decoded = Arc::new(AtomicUsize::new(0));
            let backend = Counting {
                decoded: Arc::clone(&decoded),
                n: 50,
            };
            let mut s = FrameStream::new(Box::new(backend), cap).unwrap();
            let mut consumed = 0usize;
            loop {
                std::thread::sleep(std::time::Duration::from_millis(2));
                let held = decoded.load(AtomicOrdering::SeqCst) - consumed;
                assert!(held <= cap, "held {held} > capacity {cap}");
                match s.next_frame().unwrap() {
                    Some(_) => consumed += 1,
                    None => break,
                }
            }
            assert_eq!(consumed, 50);
        }
    }

    #[test]
    fn benchmark_reports_rows_and_failures() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 4);
        let reg = BackendRegistry::default();
        let readers = vec![
            "image-dir".to_string(),
            "image-dir:buffered".to_string(),
            "decord".to_string(),
        ];
        let opts = BenchmarkOptions {
            n_frames: 10,
            load_mode: LoadMode::Idle,
            buffer_capacity: 4,
        };
        let report = benchmark_throughput(&reg, dir.path(), &readers, &opts).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.fps > 0.0 && r.frames == 10));
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].0, "decord");
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("backend,load_mode,fps\nimage-dir,idle,"));

        let zero = BenchmarkOptions { n_frames: 0, ..opts };
        assert!(benchmark_throughput(&reg, dir.path(), &readers, &zero).is_err());
    }

    #[test]
    fn png_reencode_round_trips() {
        let frame = Frame {
            index: 0,
            pixels: (0..2 * 3 * 3).map(|v| v as u8).collect(),
            width: 2,
            height: 3,
            channels: 3,
        };
        let png = frame.to_png().unwrap();
        let back = image::load_from_memory(&png).unwrap().into_rgb8();
        assert_eq!(back.into_raw(), frame.pixels);
    }
}
