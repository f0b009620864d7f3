//! Scaffolds a project directory with one camera and a few frames, then
//! serves it on localhost for the annotation UI.
//!
//! Usage: `cargo run --example serve_project -- [port]`
//! then e.g. `curl localhost:8765/processors` or
//! `curl -o f.png localhost:8765/frames/top/3`.

use cvkit::service::{serve, Project, ProjectCamera};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = std::env::args().nth(1).map_or(Ok(8765), |s| s.parse())?;
    let dir = tempfile::tempdir()?;

    let frames = dir.path().join("top");
    std::fs::create_dir_all(&frames)?;
    for i in 0..10u32 {
        let img = image::RgbImage::from_fn(160, 120, |x, y| {
            image::Rgb([(x * 2) as u8, (y * 2) as u8, (i * 25) as u8])
        });
        img.save(frames.join(format!("{i}.png")))?;
    }
    let mut project = Project::new("demo");
    let mut cam = ProjectCamera::new("top");
    cam.frames = Some("top".into());
    project.cameras.push(cam);
    project.part_order = vec!["nose".into(), "tail".into()];
    project.arena = Some([-500.0, -500.0, 500.0, 500.0]);
    project.save(dir.path())?;

    println!(
        "serving {} on http://127.0.0.1:{port} (Ctrl-C to stop)",
        dir.path().display()
    );
    serve(dir.path().to_path_buf(), port).await?;
    Ok(())
}
