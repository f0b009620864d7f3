//! Simulates a rat circling a square arena and renders occupancy, rearing,
//! gaze and egocentric boundary maps as CSV and PNG files.
//!
//! Usage: `cargo run --example behavior_maps -- [out_dir]`

use std::path::PathBuf;

use cvkit::behavior::{
    detect_rearing, ebc_rate_map, gaze_heatmap, occupancy_map, spike_location_data, AnalysisGrid, Arena, EbcParams,
    SpikeTrain, Wall,
};
use cvkit::pose::{Part, PoseSequence, Skeleton};
use nalgebra::{Point3, Vector3};

fn save(dir: &std::path::Path, name: &str, grid: &AnalysisGrid) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::write(dir.join(format!("{name}.csv")), grid.to_csv_string())?;
    std::fs::write(dir.join(format!("{name}.png")), grid.render_png(8)?)?;
    let (ix, iy) = grid.argmax();
    println!(
        "{name:<16} {}x{} bins, total {:.2}, peak at {:?}",
        grid.nx(),
        grid.ny(),
        grid.total(),
        grid.bin_center(ix, iy)
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cvkit_behavior"));
    std::fs::create_dir_all(&out_dir)?;

    let fps = 30.0;
    let parts = ["head_base", "nose", "back"].map(String::from).to_vec();
    let mut seq = PoseSequence::new(parts, 3)?.with_fps(fps);
    for f in 0..1800u64 {
        let t = f as f64 / fps;
        // counterclockwise circle of radius 250 mm, rearing for 2 s every 15 s
        let a = t * 0.4;
        let (x, y) = (250.0 * a.cos(), 250.0 * a.sin());
        let (hx, hy) = (-a.sin(), a.cos());
        let rearing = (t % 15.0) > 13.0;
        let z = if rearing { 180.0 } else { 60.0 };
        seq.push(Skeleton::new(
            f,
            vec![
                Part::new("head_base", vec![x, y, z], 0.95),
                Part::new("nose", vec![x + 30.0 * hx, y + 30.0 * hy, z], 0.9),
                Part::new("back", vec![x - 60.0 * hx, y - 60.0 * hy, 50.0], 0.9),
            ],
        ))?;
    }

    let arena = Arena::new([-500.0, -500.0], [500.0, 500.0])?;
    save(
        &out_dir,
        "occupancy",
        &occupancy_map(&seq, "back", &arena, (20, 20))?.grid,
    )?;

    let rearing = detect_rearing(&seq, "head_base", 150.0, 10, &arena, (20, 20))?;
    for e in &rearing.events {
        println!(
            "  rearing frames {}..={} at ({:.0}, {:.0})",
            e.start_frame, e.end_frame, e.location[0], e.location[1]
        );
    }
    save(&out_dir, "rearing", &rearing.grid)?;

    // four 400 mm walls facing inwards
    let up = Vector3::z();
    let walls = vec![
        Wall::new(
            "east",
            Point3::new(500.0, -500.0, 0.0),
            Vector3::y(),
            up,
            1000.0,
            400.0,
            (40, 16),
        )?,
        Wall::new(
            "north",
            Point3::new(500.0, 500.0, 0.0),
            -Vector3::x(),
            up,
            1000.0,
            400.0,
            (40, 16),
        )?,
        Wall::new(
            "west",
            Point3::new(-500.0, 500.0, 0.0),
            -Vector3::y(),
            up,
            1000.0,
            400.0,
            (40, 16),
        )?,
        Wall::new(
            "south",
            Point3::new(-500.0, -500.0, 0.0),
            Vector3::x(),
            up,
            1000.0,
            400.0,
            (40, 16),
        )?,
    ];
    for (name, grid) in gaze_heatmap(&seq, "head_base", "nose", &walls, 40.0)? {
        save(&out_dir, &format!("gaze_{name}"), &grid)?;
    }

    // a cell that fires whenever a wall is close on the animal's left
    let spikes: Vec<f64> = (0..1800)
        .filter(|f| f % 3 == 0)
        .map(|f| f as f64 / fps)
        .filter(|t| {
            let a = t * 0.4;
            let left = a + std::f64::consts::PI;
            (left.cos().abs() > 0.9) || (left.sin().abs() > 0.9)
        })
        .collect();
    let train = SpikeTrain::new("cell1", spikes)?;
    let ebc = ebc_rate_map(
        &seq,
        "head_base",
        "back",
        "head_base",
        &train,
        &arena,
        &EbcParams::with_max_dist(500.0),
    )?;
    println!(
        "ebc: {} frames used, {} skipped, {} spikes dropped",
        ebc.frames_used, ebc.frames_skipped, ebc.spikes_dropped
    );
    save(&out_dir, "ebc_rate", &ebc.rate)?;

    let locations = spike_location_data(&seq, "head_base", "back", "head_base", &train)?;
    locations.write_csv(std::fs::File::create(out_dir.join("spike_locations.csv"))?)?;
    println!("wrote maps to {}", out_dir.display());
    Ok(())
}
