//! Calibrates three synthetic cameras from known 3D-2D correspondences, then
//! triangulates a point seen by all of them, with and without a low-score
//! view.
//!
//! Usage: `cargo run --example triangulate`

use cvkit::geometry::{dlt_reconstruct, fit_dlt, Correspondence, Observation};
use nalgebra::{Matrix3, Matrix3x4, Point3, Vector3};

fn pinhole(angle: f64, height: f64) -> Matrix3x4<f64> {
    let center = Vector3::new(2500.0 * angle.cos(), 2500.0 * angle.sin(), height);
    let forward = (-center).normalize();
    let right = forward.cross(&Vector3::z()).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let k = Matrix3::new(900.0, 0.0, 320.0, 0.0, 900.0, 240.0, 0.0, 0.0, 1.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &(-r * center));
    k * rt
}

fn project(p: &Matrix3x4<f64>, x: &Point3<f64>) -> nalgebra::Point2<f64> {
    let h = p * x.to_homogeneous();
    nalgebra::Point2::new(h[0] / h[2], h[1] / h[2])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rigs = [pinhole(0.2, 1200.0), pinhole(2.3, 800.0), pinhole(4.1, 1000.0)];

    // a wand-like grid of control points in the working volume
    let control: Vec<Point3<f64>> = (0..4)
        .flat_map(|i| {
            (0..4).flat_map(move |j| {
                (0..3).map(move |k| Point3::new(i as f64 * 200.0 - 300.0, j as f64 * 200.0 - 300.0, k as f64 * 150.0))
            })
        })
        .collect();

    let mut cams = Vec::new();
    for (i, p) in rigs.iter().enumerate() {
        let corr: Vec<Correspondence> = control.iter().map(|x| Correspondence::new(*x, project(p, x))).collect();
        let fit = fit_dlt(&corr)?;
        println!(
            "cam{i}: {} control points, mean reprojection error {:.2e} px",
            corr.len(),
            fit.mean_error
        );
        cams.push(fit.into_camera(format!("cam{i}"), 640, 480));
    }

    let truth = Point3::new(123.0, -45.0, 210.0);
    let mut obs: Vec<Observation> = rigs
        .iter()
        .enumerate()
        .map(|(i, p)| Observation::new(i, project(p, &truth), 0.9))
        .collect();
    let rec = dlt_reconstruct(&cams, &obs, 0.6)?;
    println!("truth {truth:?}");
    println!(
        "3 views -> {:?}, error {:.2e} mm, rms {:.2e} px",
        rec.point,
        (rec.point - truth).norm(),
        rec.rms_residual
    );

    // a bad detection below the score threshold is dropped, not averaged in
    obs[2] = Observation::new(2, nalgebra::Point2::new(10.0, 10.0), 0.3);
    let rec = dlt_reconstruct(&cams, &obs, 0.6)?;
    println!(
        "2 views -> {:?}, error {:.2e} mm, views used {}",
        rec.point,
        (rec.point - truth).norm(),
        rec.views
    );
    Ok(())
}
