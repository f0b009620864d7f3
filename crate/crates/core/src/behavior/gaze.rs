use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use super::{part_index, view_direction, AnalysisGrid, BehaviorError, GridUnits, Result};
use crate::pose::PoseSequence;

/// Rays closer to parallel with a wall than this never hit it.
pub const PARALLEL_EPS: f64 = 1e-12;
/// Hits at ray parameter `t <= MIN_RAY_T` are ignored.
pub const MIN_RAY_T: f64 = 1e-9;

const ORTHO_TOL: f64 = 1e-9;

/// A rectangular surface `origin + a*u_axis + b*v_axis`, `a` in
/// `[0, width]`, `b` in `[0, height]`, binned `bins.0 x bins.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub name: String,
    pub origin: Point3<f64>,
    pub u_axis: Vector3<f64>,
    pub v_axis: Vector3<f64>,
    pub width: f64,
    pub height: f64,
    pub bins: (usize, usize),
}

impl Wall {
    pub fn new(
        name: impl Into<String>,
        origin: Point3<f64>,
        u_axis: Vector3<f64>,
        v_axis: Vector3<f64>,
        width: f64,
        height: f64,
        bins: (usize, usize),
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| BehaviorError::InvalidWall {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if (u_axis.norm() - 1.0).abs() > ORTHO_TOL || (v_axis.norm() - 1.0).abs() > ORTHO_TOL {
            return Err(invalid("axes must be unit vectors"));
        }
        if u_axis.dot(&v_axis).abs() > ORTHO_TOL {
            return Err(invalid("axes must be orthogonal"));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(invalid("width and height must be positive"));
        }
        if bins.0 == 0 || bins.1 == 0 {
            return Err(invalid("bin counts must be positive"));
        }
        Ok(Self {
            name,
            origin,
            u_axis,
            v_axis,
            width,
            height,
            bins,
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.u_axis.cross(&self.v_axis)
    }

    /// Empty score grid over the wall's `(u, v)` extent.
    pub fn grid(&self) -> AnalysisGrid {
        let mut g = AnalysisGrid::uniform(
            (0.0, self.width),
            self.bins.0,
            (0.0, self.height),
            self.bins.1,
            GridUnits::Score,
        )
        .expect("wall validated");
        g.metadata.insert("wall".into(), self.name.clone());
        g
    }
}

/// Header of the wall definition CSV read by [`read_walls`].
pub const WALL_COLUMNS: [&str; 14] = [
    "name", "origin_x", "origin_y", "origin_z", "u_x", "u_y", "u_z", "v_x", "v_y", "v_z", "width", "height", "bins_u",
    "bins_v",
];

/// Reads walls from CSV with the [`WALL_COLUMNS`] header.
pub fn read_walls<R: std::io::Read>(input: R) -> Result<Vec<Wall>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != WALL_COLUMNS {
        return Err(BehaviorError::InvalidArgument(format!(
            "wall CSV header must be {}",
            WALL_COLUMNS.join(",")
        )));
    }
    let mut walls = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |col: &str| BehaviorError::InvalidArgument(format!("wall row {}: bad `{col}`", row + 1));
        let f = |k: usize| rec[k].trim().parse::<f64>().map_err(|_| bad(WALL_COLUMNS[k]));
        let n = |k: usize| rec[k].trim().parse::<usize>().map_err(|_| bad(WALL_COLUMNS[k]));
        walls.push(Wall::new(
            rec[0].trim(),
            Point3::new(f(1)?, f(2)?, f(3)?),
            Vector3::new(f(4)?, f(5)?, f(6)?),
            Vector3::new(f(7)?, f(8)?, f(9)?),
            f(10)?,
            f(11)?,
            (n(12)?, n(13)?),
        )?);
    }
    Ok(walls)
}

pub fn load_walls(path: impl AsRef<std::path::Path>) -> Result<Vec<Wall>> {
    read_walls(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallHit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// Intersects the ray `origin + t*dir`, `t > 0`, with the wall rectangle.
pub fn ray_wall_intersect(origin: &Point3<f64>, dir: &Vector3<f64>, wall: &Wall) -> Option<WallHit> {
    let n = wall.normal();
    let denom = dir.dot(&n);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let t = (wall.origin - origin).dot(&n) / denom;
    if !(t > MIN_RAY_T) {
        return None;
    }
    let rel = (origin + dir * t) - wall.origin;
    let (u, v) = (rel.dot(&wall.u_axis), rel.dot(&wall.v_axis));
    ((0.0..=wall.width).contains(&u) && (0.0..=wall.height).contains(&v)).then_some(WallHit { t, u, v })
}

/// Accumulates a clipped Gaussian attention splat at each frame's nearest
/// wall hit. Frames without a valid view direction or without a hit add
/// nothing. Returns one score grid per wall, keyed by wall name.
pub fn gaze_heatmap(
    seq: &PoseSequence,
    base: &str,
    tip: &str,
    walls: &[Wall],
    sigma: f64,
) -> Result<BTreeMap<String, AnalysisGrid>> {
    if walls.is_empty() {
        return Err(BehaviorError::NoWalls);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(BehaviorError::InvalidArgument("sigma must be positive".into()));
    }
    part_index(seq, base)?;
    part_index(seq, tip)?;
    let mut grids: Vec<AnalysisGrid> = walls.iter().map(Wall::grid).collect();
    let names: std::collections::BTreeSet<&str> = walls.iter().map(|w| w.name.as_str()).collect();
    if names.len() != walls.len() {
        return Err(BehaviorError::InvalidArgument("wall names must be unique".into()));
    }
    let (mut hits, mut misses, mut skipped) = (0usize, 0usize, 0usize);
    for skel in seq.skeletons() {
        let Ok((origin, dir)) = view_direction(skel, base, tip, seq.score_threshold) else {
            skipped += 1;
            continue;
        };
        let nearest = walls
            .iter()
            .enumerate()
            .filter_map(|(i, w)| ray_wall_intersect(&origin, &dir, w).map(|h| (i, h)))
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t));
        match nearest {
            Some((i, hit)) => {
                splat(&mut grids[i], hit.u, hit.v, sigma);
                hits += 1;
            }
            None => misses += 1,
        }
    }
    Ok(walls
        .iter()
        .zip(grids)
        .map(|(w, mut g)| {
            g.metadata.insert("frames_hit".into(), hits.to_string());
            g.metadata.insert("frames_missed".into(), misses.to_string());
            g.metadata.insert("frames_skipped".into(), skipped.to_string());
            g.metadata.insert("sigma".into(), sigma.to_string());
            (w.name.clone(), g)
        })
        .collect())
}

fn splat(grid: &mut AnalysisGrid, u: f64, v: f64, sigma: f64) {
    let r2 = (3.0 * sigma).powi(2);
    for iy in 0..grid.ny() {
        for ix in 0..grid.nx() {
            let (cu, cv) = grid.bin_center(ix, iy);
            let d2 = (cu - u).powi(2) + (cv - v).powi(2);
            if d2 <= r2 {
                grid.add(ix, iy, (-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Part, Skeleton};
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};

    fn wall_x10() -> Wall {
        Wall::new(
            "east",
            Point3::new(10.0, 0.0, 0.0),
            Vector3::y(),
            Vector3::z(),
            20.0,
            20.0,
            (20, 20),
        )
        .unwrap()
    }

    #[test]
    fn axis_aligned_hit_at_wall_origin() {
        let hit = ray_wall_intersect(&Point3::origin(), &Vector3::x(), &wall_x10()).unwrap();
        assert_eq!(
            hit,
            WallHit {
                t: 10.0,
                u: 0.0,
                v: 0.0
            }
        );
    }

    #[test]
    fn behind_parallel_and_out_of_bounds_miss() {
        let w = wall_x10();
        assert!(ray_wall_intersect(&Point3::origin(), &-Vector3::x(), &w).is_none());
        assert!(ray_wall_intersect(&Point3::origin(), &Vector3::y(), &w).is_none());
        let d = Vector3::new(1.0, -1.0, 0.0).normalize();
        assert!(ray_wall_intersect(&Point3::origin(), &d, &w).is_none());
    }

    #[test]
    fn wall_csv() {
        let text = format!("{}\neast,10,0,0,0,1,0,0,0,1,20,20,20,20\n", WALL_COLUMNS.join(","));
        assert_eq!(read_walls(text.as_bytes()).unwrap(), vec![wall_x10()]);
        assert!(read_walls("name,x\n".as_bytes()).is_err());
        let skew = format!("{}\nw,0,0,0,1,0,0,1,0,0,1,1,1,1\n", WALL_COLUMNS.join(","));
        assert!(matches!(
            read_walls(skew.as_bytes()),
            Err(BehaviorError::InvalidWall { .. })
        ));
    }

    #[test]
    fn wall_validation() {
        let o = Point3::origin();
        assert!(Wall::new("w", o, Vector3::x(), Vector3::x(), 1.0, 1.0, (1, 1)).is_err());
        assert!(Wall::new("w", o, Vector3::x() * 2.0, Vector3::y(), 1.0, 1.0, (1, 1)).is_err());
        assert!(Wall::new("w", o, Vector3::x(), Vector3::y(), 0.0, 1.0, (1, 1)).is_err());
        assert!(Wall::new("w", o, Vector3::x(), Vector3::y(), 1.0, 1.0, (0, 1)).is_err());
    }

    /// Solves origin + t*d = W + a*u + b*v by Cramer's rule.
    fn cramer(o: &Point3<f64>, d: &Vector3<f64>, w: &Wall) -> Option<(f64, f64, f64)> {
        let m = Matrix3::from_columns(&[*d, -w.u_axis, -w.v_axis]);
        let det = m.determinant();
        if det.abs() < 1e-12 {
            return None;
        }
        let rhs = w.origin - o;
        let col = |k: usize| {
            let mut mk = m;
            mk.set_column(k, &rhs);
            mk.determinant() / det
        };
        let (t, a, b) = (col(0), col(1), col(2));
        (t > 1e-9 && (0.0..=w.width).contains(&a) && (0.0..=w.height).contains(&b)).then_some((t, a, b))
    }

    #[test]
    fn random_rays_match_cramer_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let w = Wall::new(
            "tilted",
            Point3::new(5.0, -3.0, 2.0),
            Vector3::new(1.0, 1.0, 0.0).normalize(),
            Vector3::new(-1.0, 1.0, 2.0).normalize(),
            30.0,
            15.0,
            (10, 5),
        )
        .unwrap();
        let mut hits = 0;
        for _ in 0..1000 {
            let o = Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            let d = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let got = ray_wall_intersect(&o, &d, &w);
            let want = cramer(&o, &d, &w);
            assert_eq!(got.is_some(), want.is_some());
            if let (Some(g), Some((t, a, b))) = (got, want) {
                hits += 1;
                assert!((g.t - t).abs() < 1e-9 && (g.u - a).abs() < 1e-9 && (g.v - b).abs() < 1e-9);
            }
        }
        assert!(hits > 20);
    }

    fn staring(frames: usize, tip: [f64; 3]) -> PoseSequence {
        let mut seq = PoseSequence::new(vec!["head".into(), "snout".into()], 3).unwrap();
        for i in 0..frames {
            seq.push(Skeleton::new(
                i as u64,
                vec![
                    Part::new("head", vec![0.0, 7.0, 7.0], 1.0),
                    Part::new("snout", tip.to_vec(), 1.0),
                ],
            ))
            .unwrap();
        }
        seq
    }

    #[test]
    fn concentrated_gaze_peaks_at_hit() {
        let seq = staring(5, [1.0, 7.0, 7.0]).map_parts(|_, j, p| p.with_coords(vec![j as f64, 7.3, 7.6]));
        let maps = gaze_heatmap(&seq, "head", "snout", &[wall_x10()], 2.0).unwrap();
        let g = &maps["east"];
        assert_eq!(g.argmax(), (7, 7));
        assert_eq!(g.metadata["frames_hit"], "5");
    }

    #[test]
    fn missing_wall_deposits_nothing() {
        let seq = staring(3, [-1.0, 7.0, 7.0]);
        let maps = gaze_heatmap(&seq, "head", "snout", &[wall_x10()], 2.0).unwrap();
        assert_eq!(maps["east"].total(), 0.0);
        assert_eq!(maps["east"].metadata["frames_missed"], "3");
        assert!(matches!(
            gaze_heatmap(&seq, "head", "snout", &[], 2.0),
            Err(BehaviorError::NoWalls)
        ));
    }

    #[test]
    fn splat_matches_per_bin_gaussian() {
        let w = Wall::new(
            "w",
            Point3::new(10.0, 0.0, 0.0),
            Vector3::y(),
            Vector3::z(),
            40.0,
            40.0,
            (40, 40),
        )
        .unwrap();
        let seq = staring(1, [1.0, 7.3, 7.0]);
        // ray from snout along +x hits (u, v) = (7.3 + 0.0, 7.0)
        let seq = seq.map_parts(|_, j, p| {
            if j == 0 {
                p.with_coords(vec![0.0, 7.3, 7.0])
            } else {
                p.clone()
            }
        });
        let sigma = 5.0;
        let g = &gaze_heatmap(&seq, "head", "snout", &[w], sigma).unwrap()["w"];
        for iy in 0..40 {
            for ix in 0..40 {
                let (cu, cv) = (ix as f64 + 0.5, iy as f64 + 0.5);
                let d2 = (cu - 7.3).powi(2) + (cv - 7.0).powi(2);
                let want = if d2.sqrt() <= 3.0 * sigma {
                    (-d2 / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                };
                assert!((g.get(ix, iy) - want).abs() < 1e-12, "bin {ix},{iy}");
            }
        }
    }

    #[test]
    fn nearest_wall_occludes() {
        let near = Wall::new(
            "near",
            Point3::new(5.0, 0.0, 0.0),
            Vector3::y(),
            Vector3::z(),
            20.0,
            20.0,
            (4, 4),
        )
        .unwrap();
        let seq = staring(2, [1.0, 7.0, 7.0]);
        let maps = gaze_heatmap(&seq, "head", "snout", &[wall_x10(), near], 1.0).unwrap();
        assert_eq!(maps["east"].total(), 0.0);
        assert!(maps["near"].total() > 0.0);
    }
}
