//! Calibration-frame selection and EasyWand package export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::path::Path;

use nalgebra::Point2;

use super::{GeometryError, Result};

/// File name of the manifest written by [`export_easywand_package`].
pub const EASYWAND_MANIFEST: &str = "manifest.csv";

/// 2D annotations of one camera: frame index -> part name -> pixel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CameraAnnotations {
    pub camera: String,
    pub frames: BTreeMap<u64, BTreeMap<String, Point2<f64>>>,
}

impl CameraAnnotations {
    pub fn new(camera: impl Into<String>) -> Self {
        Self {
            camera: camera.into(),
            frames: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, frame: u64, part: impl Into<String>, point: Point2<f64>) {
        self.frames.entry(frame).or_default().insert(part.into(), point);
    }
}

fn all_parts(annotations: &[CameraAnnotations]) -> BTreeSet<&str> {
    annotations
        .iter()
        .flat_map(|c| c.frames.values())
        .flat_map(|parts| parts.keys().map(String::as_str))
        .collect()
}

/// Frames in which every camera annotates every part seen anywhere in the
/// annotation set, in ascending order.
pub fn synchronized_frames(annotations: &[CameraAnnotations]) -> Vec<u64> {
    let parts = all_parts(annotations);
    let Some(first) = annotations.first() else {
        return Vec::new();
    };
    first
        .frames
        .keys()
        .copied()
        .filter(|f| {
            annotations.iter().all(|cam| {
                cam.frames
                    .get(f)
                    .is_some_and(|pts| parts.iter().all(|p| pts.contains_key(*p)))
            })
        })
        .collect()
}

/// Picks `k` diverse synchronized frames by greedy farthest-point sampling.
///
/// Each frame is a point in the space formed by concatenating all cameras'
/// annotated pixels (cameras sorted by name, parts sorted by name). The first
/// pick is the frame nearest the centroid; every later pick maximizes the
/// distance to its nearest already-picked frame. Ties go to the lower frame
/// index. The result is sorted ascending.
pub fn select_calibration_frames(annotations: &[CameraAnnotations], k: usize) -> Result<Vec<u64>> {
    let frames = synchronized_frames(annotations);
    if k > frames.len() {
        return Err(GeometryError::NotEnoughAnnotatedFrames {
            requested: k,
            available: frames.len(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let parts = all_parts(annotations);
    let mut cams: Vec<&CameraAnnotations> = annotations.iter().collect();
    cams.sort_by(|a, b| a.camera.cmp(&b.camera));
    let features: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| {
            cams.iter()
                .flat_map(|c| {
                    let pts = &c.frames[f];
                    parts.iter().flat_map(move |p| {
                        let pt = pts[*p];
                        [pt.x, pt.y]
                    })
                })
                .collect()
        })
        .collect();
    let dim = features[0].len();
    let mut centroid = vec![0.0; dim];
    for f in &features {
        for (c, x) in centroid.iter_mut().zip(f) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= features.len() as f64);

    // Strict comparisons keep the lowest index on ties since frames are ascending.
    let mut first = 0;
    let mut best = f64::INFINITY;
    for (i, f) in features.iter().enumerate() {
        let d = sq_dist(f, &centroid);
        if d < best {
            best = d;
            first = i;
        }
    }
    let mut picked = vec![first];
    let mut nearest: Vec<f64> = features.iter().map(|f| sq_dist(f, &features[first])).collect();
    while picked.len() < k {
        let mut next = None;
        let mut far = f64::NEG_INFINITY;
        for (i, d) in nearest.iter().enumerate() {
            if !picked.contains(&i) && *d > far {
                far = *d;
                next = Some(i);
            }
        }
        let next = next.expect("k does not exceed frame count");
        picked.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(&features[i], &features[next]));
        }
    }
    let mut out: Vec<u64> = picked.into_iter().map(|i| frames[i]).collect();
    out.sort_unstable();
    Ok(out)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Writes the files consumed by EasyWand for the requested frames.
///
/// `manifest.csv` has a header `frame_index,<camera>...` and one row per
/// exported frame giving the number of points per camera; each camera gets a
/// `<camera>_points.csv` with columns `frame,part,u,v`. Requested frames that
/// are not annotated in every camera are skipped.
pub fn export_easywand_package(
    annotations: &[CameraAnnotations],
    frames: &[u64],
    dir: impl AsRef<Path>,
) -> Result<Vec<u64>> {
    let synced: BTreeSet<u64> = synchronized_frames(annotations).into_iter().collect();
    let mut export: Vec<u64> = frames.iter().copied().filter(|f| synced.contains(f)).collect();
    export.sort_unstable();
    export.dedup();
    if export.is_empty() {
        return Err(GeometryError::EmptyAnnotationSet);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut manifest = csv::Writer::from_path(dir.join(EASYWAND_MANIFEST))?;
    let mut header = vec!["frame_index".to_string()];
    header.extend(annotations.iter().map(|c| c.camera.clone()));
    manifest.write_record(&header)?;
    for f in &export {
        let mut row = vec![f.to_string()];
        row.extend(annotations.iter().map(|c| c.frames[f].len().to_string()));
        manifest.write_record(&row)?;
    }
    manifest.flush()?;

    for cam in annotations {
        let mut w = csv::Writer::from_path(dir.join(format!("{}_points.csv", cam.camera)))?;
        w.write_record(["frame", "part", "u", "v"])?;
        for f in &export {
            for (part, pt) in &cam.frames[f] {
                w.write_record([f.to_string(), part.clone(), pt.x.to_string(), pt.y.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(export)
}

/// Reads back an exported package: the frame list and per-camera points.
pub fn read_easywand_points(dir: impl AsRef<Path>) -> Result<(Vec<u64>, Vec<CameraAnnotations>)> {
    let dir = dir.as_ref();
    let mut manifest = csv::Reader::from_reader(File::open(dir.join(EASYWAND_MANIFEST))?);
    let cameras: Vec<String> = manifest.headers()?.iter().skip(1).map(String::from).collect();
    let mut frames = Vec::new();
    for record in manifest.records() {
        let record = record?;
        frames.push(
            record[0]
                .parse::<u64>()
                .map_err(|_| GeometryError::MalformedCsv(format!("bad frame index `{}`", &record[0])))?,
        );
    }
    let mut out = Vec::new();
    for camera in cameras {
        let mut ann = CameraAnnotations::new(camera.clone());
        let mut rdr = csv::Reader::from_reader(File::open(dir.join(format!("{camera}_points.csv")))?);
        for record in rdr.records() {
            let record = record?;
            let parse = |i: usize| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| GeometryError::MalformedCsv(format!("bad value `{}`", &record[i])))
            };
            let frame = parse(0)? as u64;
            ann.insert(frame, record[1].to_string(), Point2::new(parse(2)?, parse(3)?));
        }
        out.push(ann);
    }
    Ok((frames, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustered() -> Vec<CameraAnnotations> {
        let centers = [(100.0, 100.0), (800.0, 150.0), (400.0, 700.0)];
        let mut cams = vec![CameraAnnotations::new("left"), CameraAnnotations::new("right")];
        for f in 0..15u64 {
            let (cx, cy) = centers[(f % 3) as usize];
            let jitter = (f as f64 * 1.7).sin() * 5.0;
            for (j, cam) in cams.iter_mut().enumerate() {
                let off = j as f64 * 30.0;
                cam.insert(f, "wand_a", Point2::new(cx + jitter + off, cy - jitter));
                cam.insert(f, "wand_b", Point2::new(cx + 20.0 + off, cy + 20.0 + jitter));
            }
        }
        cams
    }

    #[test]
    fn all_frames_when_k_is_total() {
        let cams = clustered();
        let all = select_calibration_frames(&cams, 15).unwrap();
        assert_eq!(all, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn k1_picks_frame_nearest_centroid() {
        let mut cams = vec![CameraAnnotations::new("c")];
        for (f, x) in [(0u64, 0.0), (1, 10.0), (2, 4.0), (3, 9.0)] {
            cams[0].insert(f, "p", Point2::new(x, 0.0));
        }
        // centroid x = 5.75, nearest is frame 2 (x=4) vs frame 3 (x=9)
        assert_eq!(select_calibration_frames(&cams, 1).unwrap(), vec![2]);
    }

    fn brute_force_best_triple(features: &[Vec<f64>]) -> Vec<usize> {
        let n = features.len();
        let mut best = (f64::NEG_INFINITY, vec![]);
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let m = sq_dist(&features[a], &features[b])
                        .min(sq_dist(&features[a], &features[c]))
                        .min(sq_dist(&features[b], &features[c]));
                    if m > best.0 {
                        best = (m, vec![a, b, c]);
                    }
                }
            }
        }
        best.1
    }

    #[test]
    fn one_pick_per_cluster_matches_brute_force() {
        let cams = clustered();
        let picks = select_calibration_frames(&cams, 3).unwrap();
        let clusters: BTreeSet<u64> = picks.iter().map(|f| f % 3).collect();
        assert_eq!(clusters.len(), 3);

        let features: Vec<Vec<f64>> = (0..15u64)
            .map(|f| {
                cams.iter()
                    .flat_map(|c| c.frames[&f].values().flat_map(|p| [p.x, p.y]))
                    .collect()
            })
            .collect();
        let oracle: BTreeSet<u64> = brute_force_best_triple(&features)
            .into_iter()
            .map(|i| i as u64 % 3)
            .collect();
        assert_eq!(oracle, clusters);
    }

    #[test]
    fn storage_order_does_not_matter() {
        let cams = clustered();
        let mut reversed = cams.clone();
        reversed.reverse();
        assert_eq!(
            select_calibration_frames(&cams, 5).unwrap(),
            select_calibration_frames(&reversed, 5).unwrap()
        );
    }

    #[test]
    fn unsynchronized_frames_are_excluded() {
        let mut cams = clustered();
        cams[1].frames.remove(&4);
        cams[0].frames.get_mut(&7).unwrap().remove("wand_b");
        let synced = synchronized_frames(&cams);
        assert_eq!(synced.len(), 13);
        assert!(!synced.contains(&4) && !synced.contains(&7));
        assert!(matches!(
            select_calibration_frames(&cams, 14),
            Err(GeometryError::NotEnoughAnnotatedFrames {
                requested: 14,
                available: 13
            })
        ));
    }

    #[test]
    fn export_package_round_trip() {
        let mut cams = clustered();
        cams.push(CameraAnnotations::new("top"));
        for f in 0..15u64 {
            cams[2].insert(f, "wand_a", Point2::new(f as f64, 1.0));
            cams[2].insert(f, "wand_b", Point2::new(f as f64, 2.5));
        }
        let dir = tempfile::tempdir().unwrap();
        let frames = [1, 3, 5, 8, 13];
        let exported = export_easywand_package(&cams, &frames, dir.path()).unwrap();
        assert_eq!(exported, frames);
        for cam in ["left", "right", "top"] {
            assert!(dir.path().join(format!("{cam}_points.csv")).exists());
        }
        let (back_frames, back) = read_easywand_points(dir.path()).unwrap();
        assert_eq!(back_frames, frames);
        assert_eq!(back.len(), 3);
        for (orig, got) in cams.iter().zip(&back) {
            assert_eq!(orig.camera, got.camera);
            for f in frames {
                assert_eq!(orig.frames[&f], got.frames[&f]);
            }
        }
    }

    #[test]
    fn export_without_synchronized_frames_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            export_easywand_package(&clustered(), &[], dir.path()),
            Err(GeometryError::EmptyAnnotationSet)
        ));
        assert!(matches!(
            export_easywand_package(&clustered(), &[99], dir.path()),
            Err(GeometryError::EmptyAnnotationSet)
        ));
    }
}
