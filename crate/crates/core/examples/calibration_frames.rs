//! Picks diverse synchronized frames from two cameras' wand annotations and
//! exports them as an EasyWand package.
//!
//! Usage: `cargo run --example calibration_frames -- [out_dir]`

use std::path::PathBuf;

use cvkit::geometry::{export_easywand_package, select_calibration_frames, synchronized_frames, CameraAnnotations};
use nalgebra::Point2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cvkit_easywand"));

    let mut left = CameraAnnotations::new("left");
    let mut right = CameraAnnotations::new("right");
    for f in 0..200u64 {
        let t = f as f64 / 200.0 * std::f64::consts::TAU;
        let (u, v) = (320.0 + 250.0 * t.cos(), 240.0 + 180.0 * (2.0 * t).sin());
        left.insert(f, "wand_a", Point2::new(u, v));
        left.insert(f, "wand_b", Point2::new(u + 40.0, v));
        // the right camera misses every seventh frame
        if f % 7 != 0 {
            right.insert(f, "wand_a", Point2::new(u - 60.0, v + 5.0));
            right.insert(f, "wand_b", Point2::new(u - 20.0, v + 5.0));
        }
    }
    let cams = [left, right];
    println!("{} synchronized frames", synchronized_frames(&cams).len());

    let picked = select_calibration_frames(&cams, 12)?;
    println!("farthest-point pick: {picked:?}");
    let exported = export_easywand_package(&cams, &picked, &out_dir)?;
    println!("exported {} frames to {}", exported.len(), out_dir.display());
    let mut files: Vec<_> = std::fs::read_dir(&out_dir)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("{files:?}");
    Ok(())
}
