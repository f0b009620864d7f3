//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::path::Path;

use cvkit::geometry::CameraProfile;
use cvkit::pose::{Part, PoseSequence, Skeleton};
use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn part_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("p{j}")).collect()
}

/// Random frames with gaps in the index, about 20% invalid parts and a few
/// behavior labels.
pub fn random_sequence(rng: &mut ChaCha8Rng, frames: usize, parts: usize, dims: usize) -> PoseSequence {
    let names = part_names(parts);
    let mut seq = PoseSequence::new(names.clone(), dims).unwrap();
    let mut frame = rng.random_range(0..5u64);
    for _ in 0..frames {
        let ps = names
            .iter()
            .map(|n| {
                let coords = (0..dims).map(|_| rng.random_range(-500.0..500.0)).collect();
                let score = if rng.random_bool(0.2) {
                    rng.random_range(0.0..0.6)
                } else {
                    rng.random_range(0.6..=1.0)
                };
                Part::new(n.clone(), coords, score)
            })
            .collect();
        let mut s = Skeleton::new(frame, ps);
        for b in ["rearing", "grooming"] {
            if rng.random_bool(0.1) {
                s = s.with_behavior(b);
            }
        }
        seq.push(s).unwrap();
        frame += rng.random_range(1..3u64);
    }
    seq
}

/// Linear motion `x0 + v*t` per part and axis plus Gaussian noise.
pub fn noisy_linear_track(
    rng: &mut ChaCha8Rng,
    frames: usize,
    parts: usize,
    sigma: f64,
) -> (PoseSequence, PoseSequence) {
    let names = part_names(parts);
    let noise = Normal::new(0.0, sigma).unwrap();
    let starts: Vec<[f64; 3]> = (0..parts)
        .map(|_| std::array::from_fn(|_| rng.random_range(-200.0..200.0)))
        .collect();
    let vels: Vec<[f64; 3]> = (0..parts)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
        .collect();
    let mut truth = PoseSequence::new(names.clone(), 3).unwrap();
    let mut noisy = PoseSequence::new(names.clone(), 3).unwrap();
    for t in 0..frames {
        let mut clean = Vec::new();
        let mut dirty = Vec::new();
        for j in 0..parts {
            let c: Vec<f64> = (0..3).map(|k| starts[j][k] + vels[j][k] * t as f64).collect();
            let d: Vec<f64> = c.iter().map(|x| x + noise.sample(rng)).collect();
            clean.push(Part::new(names[j].clone(), c, 1.0));
            dirty.push(Part::new(names[j].clone(), d, 1.0));
        }
        truth.push(Skeleton::new(t as u64, clean)).unwrap();
        noisy.push(Skeleton::new(t as u64, dirty)).unwrap();
    }
    (truth, noisy)
}

/// Pinhole camera `K [R | t]` on a circle around the origin.
pub struct SyntheticCamera {
    pub p: Matrix3x4<f64>,
}

impl SyntheticCamera {
    pub fn looking_at_origin(angle: f64, radius: f64, height: f64, focal: f64) -> Self {
        let center = Vector3::new(radius * angle.cos(), radius * angle.sin(), height);
        let forward = (-center).normalize();
        let right = forward.cross(&Vector3::z()).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -r * center;
        let k = Matrix3::new(focal, 0.0, 320.0, 0.0, focal, 240.0, 0.0, 0.0, 1.0);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        Self { p: k * rt }
    }

    pub fn project(&self, x: &Point3<f64>) -> Point2<f64> {
        let h = self.p * x.to_homogeneous();
        Point2::new(h[0] / h[2], h[1] / h[2])
    }
}

/// `n` cameras spread around a 3 m circle, alternating heights.
pub fn synthetic_rig(n: usize) -> (Vec<SyntheticCamera>, Vec<CameraProfile>) {
    let cams: Vec<SyntheticCamera> = (0..n)
        .map(|i| {
            let angle = i as f64 * std::f64::consts::TAU / n as f64 + 0.3;
            let height = if i % 2 == 0 { 1200.0 } else { 600.0 };
            SyntheticCamera::looking_at_origin(angle, 3000.0, height, 1000.0)
        })
        .collect();
    let profiles = cams
        .iter()
        .enumerate()
        .map(|(i, c)| CameraProfile::from_projection_matrix(format!("cam{i}"), &c.p, 640, 480).unwrap())
        .collect();
    (cams, profiles)
}

pub fn random_volume_point(rng: &mut ChaCha8Rng) -> Point3<f64> {
    Point3::new(
        rng.random_range(-500.0..500.0),
        rng.random_range(-500.0..500.0),
        rng.random_range(0.0..400.0),
    )
}

/// Projects a 3D sequence into one camera as a 2D sequence.
pub fn project_sequence(seq: &PoseSequence, cam: &SyntheticCamera) -> PoseSequence {
    let mut out = PoseSequence::new(seq.part_order().to_vec(), 2)
        .unwrap()
        .with_fps(seq.fps);
    for s in seq.skeletons() {
        let parts = s
            .parts
            .iter()
            .map(|p| {
                let uv = cam.project(&Point3::new(p.coords[0], p.coords[1], p.coords[2]));
                Part::new(p.name.clone(), vec![uv.x, uv.y], p.score)
            })
            .collect();
        out.push(Skeleton::new(s.frame_index, parts)).unwrap();
    }
    out
}

/// Writes `n` RGB PNG frames with per-frame content.
pub fn write_png_frames(dir: &Path, n: usize, width: u32, height: u32) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let img = image::RgbImage::from_fn(width, height, |x, y| {
            image::Rgb([(i % 251) as u8, (x * 7 + i as u32) as u8, (y * 3) as u8])
        });
        img.save(dir.join(format!("frame_{i:05}.png"))).unwrap();
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
