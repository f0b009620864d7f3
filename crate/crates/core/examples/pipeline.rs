//! Writes a pipeline configuration, validates it, runs it, and lists the
//! per-stage artifacts. Also shows a stage swap.
//!
//! Usage: `cargo run --example pipeline`

use cvkit::pipeline::{run_pipeline, swap_stage, validate_pipeline, PipelineConfig, Registry};
use cvkit::pose::{write_pose_file, Part, PoseFormat, PoseSequence, Skeleton};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut seq = PoseSequence::new(vec!["nose".into(), "tail".into()], 3)?;
    for f in 0..120u64 {
        let x = f as f64 * 4.0;
        let jitter = if f % 2 == 0 { 3.0 } else { -3.0 };
        let nose = if f == 50 {
            Part::new("nose", vec![5000.0, 0.0, 0.0], 0.9)
        } else {
            Part::new("nose", vec![x, jitter, 40.0], 0.9)
        };
        let tail = if (30..34).contains(&f) {
            Part::missing("tail", 3)
        } else {
            Part::new("tail", vec![x - 80.0, -jitter, 20.0], 0.9)
        };
        seq.push(Skeleton::new(f, vec![nose, tail]))?;
    }
    write_pose_file(&seq, dir.path().join("raw.csv"), PoseFormat::Cvkit)?;

    let text = "\
name = clean_track
source = raw.csv
sink = clean.csv

[stage]
id = loader

[stage]
id = velocity_filter
max_speed = 60

[stage]
id = linear_interpolate
max_gap = 8

[stage]
id = moving_average
window = 5

[stage]
id = saver
";
    let config_path = dir.path().join("clean.pipeline");
    std::fs::write(&config_path, text)?;
    let cfg = PipelineConfig::load(&config_path)?;
    let registry = Registry::builtin();
    println!("validate: {} diagnostics", validate_pipeline(&cfg, &registry).len());

    let workspace = dir.path().join("run");
    let report = run_pipeline(&cfg, &registry, &workspace)?;
    for s in &report.stages {
        println!("{s:?}");
    }
    let mut files: Vec<_> = std::fs::read_dir(&workspace)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()?;
    files.sort();
    println!("workspace: {files:?}");

    // swapping a filter for another filter keeps the chain valid
    let swapped = swap_stage(
        &cfg,
        3,
        "kalman",
        [("measurement_noise".to_string(), "9".to_string())].into(),
        &registry,
    )?;
    println!(
        "after swap: {:?}",
        swapped.stages.iter().map(|s| s.id.as_str()).collect::<Vec<_>>()
    );
    // a stage producing a table cannot feed the saver
    match swap_stage(&cfg, 3, "statistics", Default::default(), &registry) {
        Ok(_) => println!("unexpected: statistics accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
