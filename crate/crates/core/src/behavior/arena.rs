use super::{grid::linspace, part_index, AnalysisGrid, BehaviorError, GridUnits, Result, SpikeTrain};
use crate::pose::PoseSequence;

/// Axis-aligned ground-plane rectangle, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Arena {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        if (0..2).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] < max[i]) {
            Ok(Self { min, max })
        } else {
            Err(BehaviorError::DegenerateArena)
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    fn grid(&self, bins: (usize, usize), units: GridUnits) -> Result<AnalysisGrid> {
        AnalysisGrid::uniform(
            (self.min[0], self.max[0]),
            bins.0,
            (self.min[1], self.max[1]),
            bins.1,
            units,
        )
    }

    /// Distance from an inside point to the boundary along `(c, s)`.
    fn boundary_distance(&self, x: f64, y: f64, c: f64, s: f64) -> f64 {
        let mut d = f64::INFINITY;
        if c > 0.0 {
            d = d.min((self.max[0] - x) / c);
        } else if c < 0.0 {
            d = d.min((self.min[0] - x) / c);
        }
        if s > 0.0 {
            d = d.min((self.max[1] - y) / s);
        } else if s < 0.0 {
            d = d.min((self.min[1] - y) / s);
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    /// Seconds per bin.
    pub grid: AnalysisGrid,
    /// Frame counts per bin, same layout as `grid`.
    pub counts: Vec<u64>,
    pub frames_counted: usize,
    pub frames_out_of_bounds: usize,
    pub frames_invalid: usize,
}

/// Time spent per arena bin by the anchor part, one `1/fps` per valid,
/// in-bounds frame. Out-of-bounds frames are counted and dropped.
pub fn occupancy_map(seq: &PoseSequence, anchor: &str, arena: &Arena, bins: (usize, usize)) -> Result<OccupancyMap> {
    let a = part_index(seq, anchor)?;
    let mut grid = arena.grid(bins, GridUnits::Seconds)?;
    let mut counts = vec![0u64; grid.values().len()];
    let (mut counted, mut oob, mut invalid) = (0, 0, 0);
    for (i, skel) in seq.skeletons().iter().enumerate() {
        if !seq.is_valid(i, a) {
            invalid += 1;
            continue;
        }
        let c = &skel.parts[a].coords;
        match grid.bin_of(c[0], c[1]) {
            Some((ix, iy)) => {
                counts[iy * grid.nx() + ix] += 1;
                counted += 1;
            }
            None => oob += 1,
        }
    }
    let nx = grid.nx();
    for (k, &n) in counts.iter().enumerate() {
        grid.set(k % nx, k / nx, n as f64 / seq.fps);
    }
    grid.metadata.insert("anchor".into(), anchor.to_string());
    grid.metadata.insert("frames_counted".into(), counted.to_string());
    grid.metadata.insert("frames_out_of_bounds".into(), oob.to_string());
    grid.metadata.insert("frames_invalid".into(), invalid.to_string());
    Ok(OccupancyMap {
        grid,
        counts,
        frames_counted: counted,
        frames_out_of_bounds: oob,
        frames_invalid: invalid,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RearingEvent {
    pub start_frame: u64,
    pub end_frame: u64,
    /// Mean anchor (x, y) over the event.
    pub location: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RearingResult {
    pub events: Vec<RearingEvent>,
    pub grid: AnalysisGrid,
}

/// Maximal runs of at least `min_frames` consecutive frames whose anchor is
/// valid and at height `z >= z_min`. A gap in frame indices ends a run.
pub fn detect_rearing(
    seq: &PoseSequence,
    anchor: &str,
    z_min: f64,
    min_frames: usize,
    arena: &Arena,
    bins: (usize, usize),
) -> Result<RearingResult> {
    if seq.dims() != 3 {
        return Err(BehaviorError::NotThreeD(seq.dims()));
    }
    if min_frames == 0 {
        return Err(BehaviorError::InvalidArgument("min_frames must be at least 1".into()));
    }
    let a = part_index(seq, anchor)?;
    let skels = seq.skeletons();
    let up = |i: usize| seq.is_valid(i, a) && skels[i].parts[a].coords[2] >= z_min;
    let mut events = Vec::new();
    let mut i = 0;
    while i < skels.len() {
        if !up(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < skels.len() && up(i + 1) && skels[i + 1].frame_index == skels[i].frame_index + 1 {
            i += 1;
        }
        if i + 1 - start >= min_frames {
            let n = (i + 1 - start) as f64;
            let (sx, sy) = skels[start..=i].iter().fold((0.0, 0.0), |(sx, sy), s| {
                (sx + s.parts[a].coords[0], sy + s.parts[a].coords[1])
            });
            events.push(RearingEvent {
                start_frame: skels[start].frame_index,
                end_frame: skels[i].frame_index,
                location: [sx / n, sy / n],
            });
        }
        i += 1;
    }
    let mut grid = arena.grid(bins, GridUnits::Events)?;
    let mut outside = 0;
    for e in &events {
        match grid.bin_of(e.location[0], e.location[1]) {
            Some((ix, iy)) => grid.add(ix, iy, 1.0),
            None => outside += 1,
        }
    }
    grid.metadata.insert("events".into(), events.len().to_string());
    grid.metadata.insert("events_out_of_bounds".into(), outside.to_string());
    Ok(RearingResult { events, grid })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbcParams {
    pub angle_bins: usize,
    pub dist_bins: usize,
    pub max_dist: f64,
    pub min_occupancy_s: f64,
}

impl EbcParams {
    /// 3 degree angle bins and 12.5 mm distance bins up to `max_dist`.
    pub fn with_max_dist(max_dist: f64) -> Self {
        Self {
            angle_bins: 120,
            dist_bins: ((max_dist / 12.5).round() as usize).max(1),
            max_dist,
            min_occupancy_s: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbcMaps {
    /// Firing rate, x = egocentric angle in degrees, y = boundary distance.
    pub rate: AnalysisGrid,
    pub occupancy: AnalysisGrid,
    pub spikes: AnalysisGrid,
    pub frames_used: usize,
    pub frames_skipped: usize,
    pub spikes_dropped: usize,
}

/// Head direction in the ground plane, degrees in `[0, 360)`.
fn heading(seq: &PoseSequence, i: usize, b: usize, t: usize) -> Option<f64> {
    if !(seq.is_valid(i, b) && seq.is_valid(i, t)) {
        return None;
    }
    let parts = &seq.skeletons()[i].parts;
    let (dx, dy) = (
        parts[t].coords[0] - parts[b].coords[0],
        parts[t].coords[1] - parts[b].coords[1],
    );
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    Some(dy.atan2(dx).to_degrees().rem_euclid(360.0))
}

/// Egocentric boundary rate map. Angle bin `k` is centered on `k * 360 /
/// angle_bins` degrees counterclockwise from the head direction; each frame
/// casts one ray per angle bin center from the anchor to the arena boundary
/// and adds `1/fps` to the `(angle, distance)` bin it lands in. A spike at
/// time `t` belongs to sequence position `floor(t * fps)` and adds one count
/// to each of that frame's bins.
#[allow(clippy::too_many_arguments)]
pub fn ebc_rate_map(
    seq: &PoseSequence,
    anchor: &str,
    base: &str,
    tip: &str,
    spikes: &SpikeTrain,
    arena: &Arena,
    params: &EbcParams,
) -> Result<EbcMaps> {
    if params.angle_bins == 0 || params.dist_bins == 0 || !(params.max_dist > 0.0) {
        return Err(BehaviorError::BadBins(
            "angle_bins, dist_bins and max_dist must be positive".into(),
        ));
    }
    if !(params.min_occupancy_s >= 0.0) {
        return Err(BehaviorError::InvalidArgument(
            "min_occupancy_s must be non-negative".into(),
        ));
    }
    spikes.check_duration(seq)?;
    let (a, b, t) = (part_index(seq, anchor)?, part_index(seq, base)?, part_index(seq, tip)?);
    let width = 360.0 / params.angle_bins as f64;
    let angle_edges: Vec<f64> = (0..=params.angle_bins).map(|k| (k as f64 - 0.5) * width).collect();
    let dist_edges = linspace(0.0, params.max_dist, params.dist_bins);
    let mut occupancy = AnalysisGrid::new(angle_edges.clone(), dist_edges.clone(), GridUnits::Seconds)?;
    let mut counts = AnalysisGrid::new(angle_edges.clone(), dist_edges.clone(), GridUnits::Events)?;
    let mut rate = AnalysisGrid::new(angle_edges, dist_edges, GridUnits::Hz)?;

    // bins hit by each frame, None when the frame is unusable
    let mut frame_bins: Vec<Option<Vec<(usize, usize)>>> = Vec::with_capacity(seq.len());
    let dt = 1.0 / seq.fps;
    for i in 0..seq.len() {
        let pos = &seq.skeletons()[i].parts[a].coords;
        let usable = seq.is_valid(i, a) && arena.contains(pos[0], pos[1]);
        let Some(hd) = heading(seq, i, b, t).filter(|_| usable) else {
            frame_bins.push(None);
            continue;
        };
        let mut bins = Vec::with_capacity(params.angle_bins);
        for k in 0..params.angle_bins {
            let world = (hd + k as f64 * width).to_radians();
            let d = arena.boundary_distance(pos[0], pos[1], world.cos(), world.sin());
            if d <= params.max_dist {
                let di = ((d / params.max_dist * params.dist_bins as f64) as usize).min(params.dist_bins - 1);
                occupancy.add(k, di, dt);
                bins.push((k, di));
            }
        }
        frame_bins.push(Some(bins));
    }

    let mut dropped = 0;
    for &time in spikes.times() {
        let pos = (time * seq.fps).floor() as usize;
        match frame_bins.get(pos).and_then(Option::as_ref) {
            Some(bins) => {
                for &(k, di) in bins {
                    counts.add(k, di, 1.0);
                }
            }
            None => dropped += 1,
        }
    }

    let mut masked = 0;
    for di in 0..params.dist_bins {
        for k in 0..params.angle_bins {
            let occ = occupancy.get(k, di);
            if occ < params.min_occupancy_s || occ == 0.0 {
                rate.set_masked(k, di, true);
                masked += 1;
            } else {
                rate.set(k, di, counts.get(k, di) / occ);
            }
        }
    }
    let used = frame_bins.iter().filter(|f| f.is_some()).count();
    rate.metadata.insert("cell".into(), spikes.cell_id.clone());
    rate.metadata.insert("masked_bins".into(), masked.to_string());
    rate.metadata
        .insert("min_occupancy_s".into(), params.min_occupancy_s.to_string());
    rate.metadata.insert("spikes_dropped".into(), dropped.to_string());
    Ok(EbcMaps {
        rate,
        occupancy,
        spikes: counts,
        frames_used: used,
        frames_skipped: seq.len() - used,
        spikes_dropped: dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeLocation {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub head_direction_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeLocations {
    pub spikes: Vec<SpikeLocation>,
    /// Anchor (x, y) over every frame where it is valid, in order.
    pub trajectory: Vec<[f64; 2]>,
    pub spikes_dropped: usize,
}

impl SpikeLocations {
    /// Writes `kind,time,x,y,head_direction_deg` rows, spikes first.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "time", "x", "y", "head_direction_deg"])?;
        for s in &self.spikes {
            w.write_record([
                "spike".to_string(),
                s.time.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.head_direction_deg.to_string(),
            ])?;
        }
        for p in &self.trajectory {
            w.write_record([
                "path".to_string(),
                String::new(),
                p[0].to_string(),
                p[1].to_string(),
                String::new(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where and facing which way the animal was at each spike.
pub fn spike_location_data(
    seq: &PoseSequence,
    anchor: &str,
    base: &str,
    tip: &str,
    spikes: &SpikeTrain,
) -> Result<SpikeLocations> {
    spikes.check_duration(seq)?;
    let (a, b, t) = (part_index(seq, anchor)?, part_index(seq, base)?, part_index(seq, tip)?);
    let skels = seq.skeletons();
    let trajectory = (0..seq.len())
        .filter(|&i| seq.is_valid(i, a))
        .map(|i| [skels[i].parts[a].coords[0], skels[i].parts[a].coords[1]])
        .collect();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for &time in spikes.times() {
        let i = (time * seq.fps).floor() as usize;
        match (i < seq.len() && seq.is_valid(i, a))
            .then(|| heading(seq, i, b, t))
            .flatten()
        {
            Some(hd) => rows.push(SpikeLocation {
                time,
                x: skels[i].parts[a].coords[0],
                y: skels[i].parts[a].coords[1],
                head_direction_deg: hd,
            }),
            None => dropped += 1,
        }
    }
    Ok(SpikeLocations {
        spikes: rows,
        trajectory,
        spikes_dropped: dropped,
    })
}
