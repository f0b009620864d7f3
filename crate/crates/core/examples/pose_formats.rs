//! Writes a small 3D sequence in the cvkit format and translates it to the
//! flat CSV layout.
//!
//! Usage: `cargo run --example pose_formats -- [out_dir]`

use std::path::PathBuf;

use cvkit::pose::{read_pose_file, translate_pose_file, write_pose_file, Part, PoseFormat, PoseSequence, Skeleton};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out_dir)?;

    let parts = vec!["snout".to_string(), "head".to_string(), "tail".to_string()];
    let mut seq = PoseSequence::new(parts, 3)?.with_fps(60.0);
    for f in 0..6u64 {
        let x = f as f64 * 10.0;
        let mut skel = Skeleton::new(
            f,
            vec![
                Part::new("snout", vec![x + 40.0, 0.0, 30.0], 0.95),
                Part::new("head", vec![x + 20.0, 0.0, 35.0], 0.9),
                // the tail drops out for two frames
                if f == 2 || f == 3 {
                    Part::missing("tail", 3)
                } else {
                    Part::new("tail", vec![x - 60.0, 0.0, 10.0], 0.8)
                },
            ],
        );
        if f >= 4 {
            skel = skel.with_behavior("rearing");
        }
        seq.push(skel)?;
    }

    let cvkit_path = out_dir.join("walk.cvkit.csv");
    let flat_path = out_dir.join("walk.flat.csv");
    write_pose_file(&seq, &cvkit_path, PoseFormat::Cvkit)?;
    translate_pose_file(&cvkit_path, PoseFormat::Cvkit, &flat_path, PoseFormat::FlatCsv)?;

    println!("== {}", cvkit_path.display());
    print!("{}", std::fs::read_to_string(&cvkit_path)?);
    println!("== {}", flat_path.display());
    print!("{}", std::fs::read_to_string(&flat_path)?);

    // flat_csv has no metadata line, so fps comes back as the default
    let back = read_pose_file(&flat_path, PoseFormat::FlatCsv)?;
    println!("flat_csv read back at {} fps", back.fps);
    let same = back.with_fps(seq.fps) == seq;
    println!(
        "poses after restoring fps: {}",
        if same { "identical" } else { "CHANGED" }
    );
    Ok(())
}
