use std::io::Write;

use serde::Serialize;

use super::PipelineError;
use crate::pose::PoseSequence;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartStatistics {
    pub part: String,
    pub valid_fraction: f64,
    /// Mean score over all frames, valid or not.
    pub mean_score: f64,
    /// Per axis over valid frames; empty when the part is never valid.
    pub axes: Vec<AxisRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputStatistics {
    pub frames: usize,
    pub fps: f64,
    pub parts: Vec<PartStatistics>,
}

/// Per-part validity, score and coordinate ranges of a sequence.
pub fn input_statistics(seq: &PoseSequence) -> Result<InputStatistics, PipelineError> {
    if seq.is_empty() {
        return Err(PipelineError::EmptySequence);
    }
    let n = seq.len() as f64;
    let parts = seq
        .part_order()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut valid = 0usize;
            let mut score_sum = 0.0;
            let mut lo = vec![f64::INFINITY; seq.dims()];
            let mut hi = vec![f64::NEG_INFINITY; seq.dims()];
            let mut sum = vec![0.0; seq.dims()];
            for (i, p) in seq.track(j).enumerate() {
                score_sum += p.score;
                if seq.is_valid(i, j) {
                    valid += 1;
                    for (k, &c) in p.coords.iter().enumerate() {
                        lo[k] = lo[k].min(c);
                        hi[k] = hi[k].max(c);
                        sum[k] += c;
                    }
                }
            }
            let axes = if valid == 0 {
                Vec::new()
            } else {
                (0..seq.dims())
                    .map(|k| AxisRange {
                        min: lo[k],
                        max: hi[k],
                        mean: sum[k] / valid as f64,
                    })
                    .collect()
            };
            PartStatistics {
                part: name.clone(),
                valid_fraction: valid as f64 / n,
                mean_score: score_sum / n,
                axes,
            }
        })
        .collect();
    Ok(InputStatistics {
        frames: seq.len(),
        fps: seq.fps,
        parts,
    })
}

impl InputStatistics {
    /// `part,stat,value` rows; sequence-wide rows use part `*`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["part", "stat", "value"])?;
        w.write_record(["*", "frames", &self.frames.to_string()])?;
        w.write_record(["*", "fps", &self.fps.to_string()])?;
        for p in &self.parts {
            w.write_record([&p.part, "valid_fraction", &p.valid_fraction.to_string()])?;
            w.write_record([&p.part, "mean_score", &p.mean_score.to_string()])?;
            for (k, a) in p.axes.iter().enumerate() {
                w.write_record([&p.part, &format!("c{k}_min"), &a.min.to_string()])?;
                w.write_record([&p.part, &format!("c{k}_max"), &a.max.to_string()])?;
                w.write_record([&p.part, &format!("c{k}_mean"), &a.mean.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Part, Skeleton};

    fn seq(values: &[(f64, f64)]) -> PoseSequence {
        let mut s = PoseSequence::new(vec!["a".into()], 2).unwrap().with_fps(25.0);
        for (i, &(x, score)) in values.iter().enumerate() {
            s.push(Skeleton::new(i as u64, vec![Part::new("a", vec![x, -x], score)]))
                .unwrap();
        }
        s
    }

    #[test]
    fn constant_all_valid() {
        let st = input_statistics(&seq(&[(2.0, 1.0); 4])).unwrap();
        assert_eq!(st.frames, 4);
        assert_eq!(st.parts[0].valid_fraction, 1.0);
        assert_eq!(
            st.parts[0].axes[0],
            AxisRange {
                min: 2.0,
                max: 2.0,
                mean: 2.0
            }
        );
    }

    #[test]
    fn half_invalid() {
        let st = input_statistics(&seq(&[(1.0, 1.0), (50.0, 0.1), (3.0, 0.9), (70.0, 0.0)])).unwrap();
        let p = &st.parts[0];
        assert_eq!(p.valid_fraction, 0.5);
        assert_eq!(
            p.axes[0],
            AxisRange {
                min: 1.0,
                max: 3.0,
                mean: 2.0
            }
        );
        assert_eq!(
            p.axes[1],
            AxisRange {
                min: -3.0,
                max: -1.0,
                mean: -2.0
            }
        );
        assert!((p.mean_score - 0.5).abs() < 1e-15);
    }

    #[test]
    fn never_valid_and_empty() {
        let st = input_statistics(&seq(&[(1.0, 0.0)])).unwrap();
        assert!(st.parts[0].axes.is_empty());
        let empty = PoseSequence::new(vec!["a".into()], 2).unwrap();
        assert!(matches!(input_statistics(&empty), Err(PipelineError::EmptySequence)));
    }

    #[test]
    fn csv_layout() {
        let text = input_statistics(&seq(&[(2.0, 1.0)])).unwrap().to_csv_string();
        assert!(text.starts_with("part,stat,value\n*,frames,1\n*,fps,25\na,valid_fraction,1\n"));
        assert!(text.contains("a,c1_min,-2\n"));
    }
}
