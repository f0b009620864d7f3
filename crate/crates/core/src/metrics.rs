//! Pose accuracy metrics: MPJPE and dynamic PCK@x.
//!
//! A (frame, part) pair counts only when both the prediction and the ground
//! truth are valid under their sequences' thresholds. Sums run frame-major,
//! parts inner, so the overall value can be recomputed bit for bit.

use std::io::Write;

use thiserror::Error;

use crate::pose::{part_distance, PoseSequence};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("prediction and ground truth differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("reference part `{0}` is not in the part order")]
    MissingReferencePart(String),
    #[error("no (frame, part) pair is valid in both sequences")]
    NoValidPairs,
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    pub overall: f64,
    /// Per part, `None` when the part has no counted pair.
    pub per_part: Vec<(String, Option<f64>)>,
    /// Per frame index, `None` when the frame has no counted pair.
    pub per_frame: Vec<(u64, Option<f64>)>,
    pub count: usize,
}

impl MetricReport {
    /// Writes the report as `scope,key,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scope", "key", "value"])?;
        w.write_record(["overall", self.metric.as_str(), &self.overall.to_string()])?;
        w.write_record(["overall", "count", &self.count.to_string()])?;
        for (name, v) in &self.per_part {
            w.write_record(["part", name.as_str(), &fmt_opt(*v)])?;
        }
        for (frame, v) in &self.per_frame {
            w.write_record(["frame", &frame.to_string(), &fmt_opt(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn check_shapes(pred: &PoseSequence, gt: &PoseSequence) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(MetricError::ShapeMismatch(format!(
            "dims {} vs {}",
            pred.dims(),
            gt.dims()
        )));
    }
    if pred.part_order() != gt.part_order() {
        return Err(MetricError::ShapeMismatch("part orders differ".into()));
    }
    if pred.len() != gt.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "lengths {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Accumulates a per-pair value into overall, per-part and per-frame means.
struct Accumulator {
    total: f64,
    count: usize,
    parts: Vec<(f64, usize)>,
    frames: Vec<(u64, f64, usize)>,
}

impl Accumulator {
    fn new(n_parts: usize) -> Self {
        Self {
            total: 0.0,
            count: 0,
            parts: vec![(0.0, 0); n_parts],
            frames: Vec::new(),
        }
    }

    fn start_frame(&mut self, frame: u64) {
        self.frames.push((frame, 0.0, 0));
    }

    fn add(&mut self, part: usize, value: f64) {
        self.total += value;
        self.count += 1;
        self.parts[part].0 += value;
        self.parts[part].1 += 1;
        let f = self.frames.last_mut().expect("frame started");
        f.1 += value;
        f.2 += 1;
    }

    fn finish(self, metric: &str, names: &[String]) -> Result<MetricReport> {
        if self.count == 0 {
            return Err(MetricError::NoValidPairs);
        }
        let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        Ok(MetricReport {
            metric: metric.to_string(),
            overall: self.total / self.count as f64,
            per_part: names
                .iter()
                .cloned()
                .zip(self.parts.iter().map(|&(s, n)| mean(s, n)))
                .collect(),
            per_frame: self.frames.iter().map(|&(f, s, n)| (f, mean(s, n))).collect(),
            count: self.count,
        })
    }
}

/// Mean per-joint position error in the sequences' native units.
pub fn mpjpe(pred: &PoseSequence, gt: &PoseSequence) -> Result<MetricReport> {
    check_shapes(pred, gt)?;
    let mut acc = Accumulator::new(gt.part_order().len());
    for (i, (ps, gs)) in pred.skeletons().iter().zip(gt.skeletons()).enumerate() {
        acc.start_frame(gs.frame_index);
        for j in 0..gs.parts.len() {
            if pred.is_valid(i, j) && gt.is_valid(i, j) {
                let d = part_distance(&ps.parts[j], &gs.parts[j]).expect("dims checked");
                acc.add(j, d);
            }
        }
    }
    acc.finish("mpjpe", gt.part_order())
}

/// Dynamic PCK@x: a pair is correct when its error is at most `x_percent`
/// percent of the ground-truth distance between `ref_a` and `ref_b` in the
/// same frame. Frames whose reference parts are invalid in the ground truth
/// are skipped. Values are fractions in `[0, 1]`.
pub fn pck(pred: &PoseSequence, gt: &PoseSequence, x_percent: f64, ref_a: &str, ref_b: &str) -> Result<MetricReport> {
    check_shapes(pred, gt)?;
    let a = gt
        .part_index(ref_a)
        .ok_or_else(|| MetricError::MissingReferencePart(ref_a.to_string()))?;
    let b = gt
        .part_index(ref_b)
        .ok_or_else(|| MetricError::MissingReferencePart(ref_b.to_string()))?;
    let mut acc = Accumulator::new(gt.part_order().len());
    for (i, (ps, gs)) in pred.skeletons().iter().zip(gt.skeletons()).enumerate() {
        acc.start_frame(gs.frame_index);
        if !(gt.is_valid(i, a) && gt.is_valid(i, b)) {
            continue;
        }
        let reference = part_distance(&gs.parts[a], &gs.parts[b]).expect("same sequence");
        let tau = x_percent / 100.0 * reference;
        for j in 0..gs.parts.len() {
            if pred.is_valid(i, j) && gt.is_valid(i, j) {
                let d = part_distance(&ps.parts[j], &gs.parts[j]).expect("dims checked");
                acc.add(j, if d <= tau { 1.0 } else { 0.0 });
            }
        }
    }
    acc.finish("pck", gt.part_order())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Part, Skeleton};

    fn seq(frames: &[&[(f64, f64)]]) -> PoseSequence {
        let names: Vec<String> = (0..frames[0].len()).map(|j| format!("p{j}")).collect();
        let mut s = PoseSequence::new(names.clone(), 2).unwrap();
        for (i, f) in frames.iter().enumerate() {
            let parts = f
                .iter()
                .zip(&names)
                .map(|(&(x, y), n)| Part::new(n.clone(), vec![x, y], 1.0))
                .collect();
            s.push(Skeleton::new(i as u64, parts)).unwrap();
        }
        s
    }

    #[test]
    fn mpjpe_zero_and_345() {
        let gt = seq(&[&[(0.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]);
        assert_eq!(mpjpe(&gt, &gt).unwrap().overall, 0.0);
        let pred = seq(&[&[(3.0, 4.0), (3.0, 4.0)], &[(3.0, 4.0), (3.0, 4.0)]]);
        let r = mpjpe(&pred, &gt).unwrap();
        assert_eq!(r.overall, 5.0);
        assert_eq!(r.count, 4);
        assert_eq!(r.per_part, vec![("p0".into(), Some(5.0)), ("p1".into(), Some(5.0))]);
    }

    #[test]
    fn mpjpe_skips_invalid_pairs() {
        let gt = seq(&[&[(0.0, 0.0), (0.0, 0.0)]]);
        let mut pred = seq(&[&[(3.0, 4.0), (30.0, 40.0)]]);
        pred = pred.map_parts(|_, j, p| if j == 1 { p.with_score(0.0) } else { p.clone() });
        let r = mpjpe(&pred, &gt).unwrap();
        assert_eq!(r.overall, 5.0);
        assert_eq!(r.count, 1);
        assert_eq!(r.per_part[1].1, None);

        let none = pred.map_parts(|_, _, p| p.with_score(0.0));
        assert_eq!(mpjpe(&none, &gt), Err(MetricError::NoValidPairs));
    }

    #[test]
    fn shape_mismatch() {
        let a = seq(&[&[(0.0, 0.0)]]);
        let b = seq(&[&[(0.0, 0.0)], &[(1.0, 1.0)]]);
        assert!(matches!(mpjpe(&a, &b), Err(MetricError::ShapeMismatch(_))));
        let c = seq(&[&[(0.0, 0.0), (1.0, 1.0)]]);
        assert!(matches!(mpjpe(&a, &c), Err(MetricError::ShapeMismatch(_))));
    }

    #[test]
    fn pck_threshold_straddle() {
        // ref parts p0, p1 are 100 apart; p2 carries the error.
        let gt = seq(&[&[(0.0, 0.0), (100.0, 0.0), (50.0, 50.0)]]);
        let near = seq(&[&[(5.0, 0.0), (100.0, 5.0), (50.0, 55.0)]]);
        let far = seq(&[&[(15.0, 0.0), (100.0, 15.0), (50.0, 65.0)]]);
        assert_eq!(pck(&near, &gt, 10.0, "p0", "p1").unwrap().overall, 1.0);
        assert_eq!(pck(&far, &gt, 10.0, "p0", "p1").unwrap().overall, 0.0);
        assert_eq!(pck(&gt, &gt, 0.5, "p0", "p1").unwrap().overall, 1.0);
    }

    #[test]
    fn pck_missing_reference() {
        let gt = seq(&[&[(0.0, 0.0), (1.0, 0.0)]]);
        assert_eq!(
            pck(&gt, &gt, 10.0, "p0", "tail"),
            Err(MetricError::MissingReferencePart("tail".into()))
        );
    }

    #[test]
    fn pck_skips_frames_with_invalid_reference() {
        let gt = seq(&[&[(0.0, 0.0), (100.0, 0.0)], &[(0.0, 0.0), (100.0, 0.0)]]);
        let gt = gt.map_parts(|i, j, p| if i == 1 && j == 0 { p.with_score(0.0) } else { p.clone() });
        let r = pck(&gt, &gt, 10.0, "p0", "p1").unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.per_frame[1], (1, None));
    }

    #[test]
    fn csv_report_layout() {
        let gt = seq(&[&[(0.0, 0.0)]]);
        let pred = seq(&[&[(3.0, 4.0)]]);
        let text = mpjpe(&pred, &gt).unwrap().to_csv_string();
        assert_eq!(
            text,
            "scope,key,value\noverall,mpjpe,5\noverall,count,1\npart,p0,5\nframe,0,5\n"
        );
    }
}
