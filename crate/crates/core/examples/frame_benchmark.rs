//! Buffered vs unbuffered throughput on a generated image directory.
//!
//! Usage: `cargo run --release --example frame_benchmark -- [n_frames] [runs]`

use cvkit::frame_io::{benchmark_throughput, BackendRegistry, BenchmarkOptions, LoadMode};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_frames: u64 = args.next().map_or(Ok(1000), |s| s.parse())?;
    let runs: usize = args.next().map_or(Ok(5), |s| s.parse())?;

    let dir = tempfile::tempdir()?;
    for i in 0..n_frames {
        let img = image::RgbImage::from_fn(128, 128, |x, y| {
            image::Rgb([(x as u64 + i) as u8, (y as u64 * 3 + i) as u8, (x ^ y) as u8])
        });
        img.save(dir.path().join(format!("{i}.png")))?;
    }

    let registry = BackendRegistry::default();
    let readers = vec!["image-dir".to_string(), "image-dir:buffered".to_string()];
    println!("backend,load_mode,median_fps");
    for mode in [LoadMode::Idle, LoadMode::Loaded] {
        let opts = BenchmarkOptions {
            n_frames,
            load_mode: mode,
            buffer_capacity: 64,
        };
        let mut fps = vec![Vec::new(), Vec::new()];
        for _ in 0..runs {
            let report = benchmark_throughput(&registry, dir.path(), &readers, &opts)?;
            for (slot, row) in fps.iter_mut().zip(&report.rows) {
                slot.push(row.fps);
            }
        }
        for (name, v) in readers.iter().zip(fps) {
            println!("{name},{mode},{:.1}   runs={v:.1?}", median(v.clone()));
        }
    }
    Ok(())
}
