//! Reading, writing and translating pose files.
//!
//! Three layouts are supported:
//!
//! * `cvkit`: a metadata line `cvkit,v1,dims=D,fps=F,threshold=T`, then a
//!   header `frame,<part>_c0..<part>_c(D-1),<part>_score,...,behavior`.
//! * `flat_csv`: a single header `frame,<part>_x,<part>_y[,<part>_z],<part>_score,...,behavior`.
//! * `dlc_csv` (read only): three header rows `scorer`, `bodyparts`, `coords`
//!   followed by `x,y,likelihood` triples per body part.
//!
//! Empty or `NaN` cells turn the whole part into a missing part (score 0,
//! zeroed coordinates).

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Part, PoseError, PoseSequence, Result, Skeleton, DEFAULT_FPS, DEFAULT_SCORE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoseFormat {
    Cvkit,
    FlatCsv,
    DlcCsv,
}

impl FromStr for PoseFormat {
    type Err = PoseError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cvkit" => Ok(Self::Cvkit),
            "flat_csv" | "flat-csv" => Ok(Self::FlatCsv),
            "dlc_csv" | "dlc-csv" => Ok(Self::DlcCsv),
            other => Err(PoseError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for PoseFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cvkit => "cvkit",
            Self::FlatCsv => "flat_csv",
            Self::DlcCsv => "dlc_csv",
        })
    }
}

const BEHAVIOR_COLUMN: &str = "behavior";
const FLAT_AXES: [&str; 3] = ["x", "y", "z"];

pub fn read_pose_file(path: impl AsRef<Path>, format: PoseFormat) -> Result<PoseSequence> {
    let file = File::open(path.as_ref())?;
    read_pose(BufReader::new(file), format)
}

pub fn write_pose_file(seq: &PoseSequence, path: impl AsRef<Path>, format: PoseFormat) -> Result<()> {
    if format == PoseFormat::DlcCsv {
        return Err(PoseError::UnwritableFormat(format));
    }
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write_pose(seq, &mut out, format)?;
    out.flush()?;
    Ok(())
}

pub fn translate_pose_file(
    src: impl AsRef<Path>,
    src_format: PoseFormat,
    dst: impl AsRef<Path>,
    dst_format: PoseFormat,
) -> Result<()> {
    if dst_format == PoseFormat::DlcCsv {
        return Err(PoseError::UnwritableFormat(dst_format));
    }
    let seq = read_pose_file(src, src_format)?;
    write_pose_file(&seq, dst, dst_format)
}

/// Parses a pose sequence from any reader.
pub fn read_pose<R: Read>(reader: R, format: PoseFormat) -> Result<PoseSequence> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut next_header = |what: &str| -> Result<csv::StringRecord> {
        records.next().transpose()?.ok_or_else(|| PoseError::MalformedHeader {
            column: what.to_string(),
            reason: "file ends before the header".into(),
        })
    };

    let layout = match format {
        PoseFormat::Cvkit => {
            let meta = next_header("cvkit")?;
            let (dims, fps, threshold) = parse_cvkit_meta(&meta)?;
            let header = next_header("frame")?;
            Layout::from_suffixed_header(&header, dims, |k| format!("c{k}"), fps, threshold)?
        }
        PoseFormat::FlatCsv => {
            let header = next_header("frame")?;
            let dims = if header.get(3).is_some_and(|c| c.ends_with("_z")) {
                3
            } else {
                2
            };
            Layout::from_suffixed_header(
                &header,
                dims,
                |k| FLAT_AXES[k].to_string(),
                DEFAULT_FPS,
                DEFAULT_SCORE_THRESHOLD,
            )?
        }
        PoseFormat::DlcCsv => {
            let scorer = next_header("scorer")?;
            let bodyparts = next_header("bodyparts")?;
            let coords = next_header("coords")?;
            Layout::from_dlc_header(&scorer, &bodyparts, &coords)?
        }
    };

    let mut seq = PoseSequence::new(layout.parts.clone(), layout.dims)?
        .with_fps(layout.fps)
        .with_threshold(layout.threshold);
    for record in records {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        seq.push(layout.parse_row(&record, row)?)?;
    }
    Ok(seq)
}

fn parse_cvkit_meta(meta: &csv::StringRecord) -> Result<(usize, f64, f64)> {
    let bad = |column: &str, reason: &str| PoseError::MalformedHeader {
        column: column.to_string(),
        reason: reason.to_string(),
    };
    if meta.get(0) != Some("cvkit") {
        return Err(bad(meta.get(0).unwrap_or(""), "expected `cvkit` magic"));
    }
    if meta.get(1) != Some("v1") {
        return Err(bad(meta.get(1).unwrap_or(""), "unsupported version"));
    }
    let (mut dims, mut fps, mut threshold) = (None, None, None);
    for field in meta.iter().skip(2) {
        let (key, value) = field.split_once('=').ok_or_else(|| bad(field, "expected key=value"))?;
        match key {
            "dims" => dims = value.parse::<usize>().ok(),
            "fps" => fps = value.parse::<f64>().ok().filter(|f| *f > 0.0),
            "threshold" => threshold = value.parse::<f64>().ok().filter(|t| (0.0..=1.0).contains(t)),
            _ => return Err(bad(field, "unknown metadata key")),
        }
        if dims.is_none() && key == "dims" || fps.is_none() && key == "fps" || threshold.is_none() && key == "threshold"
        {
            return Err(bad(field, "invalid value"));
        }
    }
    Ok((
        dims.ok_or_else(|| bad("dims", "missing"))?,
        fps.ok_or_else(|| bad("fps", "missing"))?,
        threshold.ok_or_else(|| bad("threshold", "missing"))?,
    ))
}

/// Column layout shared by all three formats: a frame column, `dims + 1`
/// columns per part (coordinates then score), optional behavior column.
struct Layout {
    parts: Vec<String>,
    dims: usize,
    fps: f64,
    threshold: f64,
    has_behavior: bool,
}

impl Layout {
    fn from_suffixed_header(
        header: &csv::StringRecord,
        dims: usize,
        axis_suffix: impl Fn(usize) -> String,
        fps: f64,
        threshold: f64,
    ) -> Result<Layout> {
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"frame") {
            return Err(PoseError::MalformedHeader {
                column: cols.first().unwrap_or(&"").to_string(),
                reason: "first column must be `frame`".into(),
            });
        }
        let has_behavior = cols.last() == Some(&BEHAVIOR_COLUMN);
        let body = &cols[1..cols.len() - usize::from(has_behavior)];
        let group = dims + 1;
        let mut parts = Vec::new();
        for chunk in body.chunks(group) {
            let score_col = chunk[chunk.len() - 1];
            let name = score_col.strip_suffix("_score").filter(|_| chunk.len() == group);
            let Some(name) = name else {
                return Err(PoseError::MalformedHeader {
                    column: score_col.to_string(),
                    reason: format!("expected `<part>_score` closing a group of {group} columns"),
                });
            };
            for (k, col) in chunk[..dims].iter().enumerate() {
                let expected = format!("{name}_{}", axis_suffix(k));
                if *col != expected {
                    return Err(PoseError::MalformedHeader {
                        column: col.to_string(),
                        reason: format!("expected `{expected}`"),
                    });
                }
            }
            parts.push(name.to_string());
        }
        if parts.is_empty() {
            return Err(PoseError::MalformedHeader {
                column: "frame".into(),
                reason: "no part columns".into(),
            });
        }
        Ok(Layout {
            parts,
            dims,
            fps,
            threshold,
            has_behavior,
        })
    }

    fn from_dlc_header(
        scorer: &csv::StringRecord,
        bodyparts: &csv::StringRecord,
        coords: &csv::StringRecord,
    ) -> Result<Layout> {
        for (record, name) in [(scorer, "scorer"), (bodyparts, "bodyparts"), (coords, "coords")] {
            if record.get(0) != Some(name) {
                return Err(PoseError::MalformedHeader {
                    column: record.get(0).unwrap_or("").to_string(),
                    reason: format!("expected `{name}` header row"),
                });
            }
        }
        let width = coords.len();
        if width < 4 || !(width - 1).is_multiple_of(3) || bodyparts.len() != width {
            return Err(PoseError::MalformedHeader {
                column: "coords".into(),
                reason: "expected x,y,likelihood triples per body part".into(),
            });
        }
        let mut parts = Vec::new();
        for start in (1..width).step_by(3) {
            let name = &bodyparts[start];
            for (k, axis) in ["x", "y", "likelihood"].iter().enumerate() {
                if &coords[start + k] != *axis {
                    return Err(PoseError::MalformedHeader {
                        column: coords[start + k].to_string(),
                        reason: format!("expected `{axis}`"),
                    });
                }
                if &bodyparts[start + k] != name {
                    return Err(PoseError::MalformedHeader {
                        column: bodyparts[start + k].to_string(),
                        reason: format!("expected body part `{name}`"),
                    });
                }
            }
            parts.push(name.to_string());
        }
        Ok(Layout {
            parts,
            dims: 2,
            fps: DEFAULT_FPS,
            threshold: DEFAULT_SCORE_THRESHOLD,
            has_behavior: false,
        })
    }

    fn width(&self) -> usize {
        1 + self.parts.len() * (self.dims + 1) + usize::from(self.has_behavior)
    }

    fn parse_row(&self, record: &csv::StringRecord, row: usize) -> Result<Skeleton> {
        if record.len() != self.width() {
            return Err(PoseError::InconsistentDims {
                row,
                expected: self.width(),
                found: record.len(),
            });
        }
        let invalid = |column: &str, value: &str| PoseError::InvalidValue {
            row,
            column: column.to_string(),
            value: value.to_string(),
        };
        let frame_cell = record[0].trim();
        let frame_index = frame_cell.parse::<u64>().map_err(|_| invalid("frame", frame_cell))?;

        let mut parts = Vec::with_capacity(self.parts.len());
        for (j, name) in self.parts.iter().enumerate() {
            let start = 1 + j * (self.dims + 1);
            let mut values = Vec::with_capacity(self.dims + 1);
            let mut missing = false;
            for cell in record.iter().skip(start).take(self.dims + 1) {
                match parse_cell(cell) {
                    Cell::Value(v) => values.push(v),
                    Cell::Missing => missing = true,
                    Cell::Invalid => return Err(invalid(name, cell)),
                }
            }
            if missing {
                parts.push(Part::missing(name.clone(), self.dims));
                continue;
            }
            let score = values.pop().expect("score column");
            if !(0.0..=1.0).contains(&score) {
                return Err(invalid(&format!("{name}_score"), &record[start + self.dims]));
            }
            parts.push(Part::new(name.clone(), values, score));
        }

        let mut skeleton = Skeleton::new(frame_index, parts);
        if self.has_behavior {
            skeleton.behaviors = record[record.len() - 1]
                .split(';')
                .map(str::trim)
                .filter(|b| !b.is_empty())
                .map(String::from)
                .collect();
        }
        Ok(skeleton)
    }
}

enum Cell {
    Value(f64),
    Missing,
    Invalid,
}

fn parse_cell(cell: &str) -> Cell {
    let cell = cell.trim();
    if cell.is_empty() {
        return Cell::Missing;
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_nan() => Cell::Missing,
        Ok(v) if v.is_finite() => Cell::Value(v),
        _ => Cell::Invalid,
    }
}

/// Serializes a sequence. `f64` values use the shortest representation that
/// parses back to the same bits.
pub fn write_pose<W: Write>(seq: &PoseSequence, out: W, format: PoseFormat) -> Result<()> {
    let axis_names: Vec<String> = match format {
        PoseFormat::Cvkit => (0..seq.dims()).map(|k| format!("c{k}")).collect(),
        PoseFormat::FlatCsv => {
            if seq.dims() > 3 {
                return Err(PoseError::UnsupportedDims(seq.dims()));
            }
            FLAT_AXES[..seq.dims()].iter().map(|s| s.to_string()).collect()
        }
        PoseFormat::DlcCsv => return Err(PoseError::UnwritableFormat(format)),
    };
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(out);
    if format == PoseFormat::Cvkit {
        wtr.write_record([
            "cvkit".to_string(),
            "v1".to_string(),
            format!("dims={}", seq.dims()),
            format!("fps={}", seq.fps),
            format!("threshold={}", seq.score_threshold),
        ])?;
    }
    let mut header = vec!["frame".to_string()];
    for part in seq.part_order() {
        header.extend(axis_names.iter().map(|a| format!("{part}_{a}")));
        header.push(format!("{part}_score"));
    }
    header.push(BEHAVIOR_COLUMN.to_string());
    wtr.write_record(&header)?;

    let mut row = Vec::with_capacity(header.len());
    for skel in seq.skeletons() {
        row.clear();
        row.push(skel.frame_index.to_string());
        for part in &skel.parts {
            row.extend(part.coords.iter().map(|c| c.to_string()));
            row.push(part.score.to_string());
        }
        row.push(skel.behaviors.iter().cloned().collect::<Vec<_>>().join(";"));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
