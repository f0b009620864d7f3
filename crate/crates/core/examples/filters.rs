//! Runs the denoising filters on a noisy track with a dropout and a glitch,
//! printing the error against the clean track after each one.
//!
//! Usage: `cargo run --example filters`

use cvkit::filters::{
    kalman_filter, linear_interpolate, moving_average, statistical_distance_filter, velocity_filter, KalmanParams,
};
use cvkit::pose::{Part, PoseSequence, Skeleton};

fn rmse(a: &PoseSequence, truth: &PoseSequence) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for (i, (s, t)) in a.skeletons().iter().zip(truth.skeletons()).enumerate() {
        if a.is_valid(i, 0) {
            sum += s.parts[0].distance(&t.parts[0]).unwrap().powi(2);
            n += 1;
        }
    }
    ((sum / n as f64).sqrt(), n)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let names = vec!["nose".to_string()];
    let mut truth = PoseSequence::new(names.clone(), 3)?;
    let mut noisy = PoseSequence::new(names, 3)?;
    // deterministic pseudo-noise so the example needs no RNG
    let wobble = |t: f64, k: f64| 4.0 * ((t * 12.9898 + k * 78.233).sin() * 43758.5453).fract();
    for f in 0..200u64 {
        let t = f as f64;
        let clean = vec![100.0 * (t / 40.0).sin(), 2.0 * t, 50.0 + 10.0 * (t / 15.0).cos()];
        truth.push(Skeleton::new(f, vec![Part::new("nose", clean.clone(), 1.0)]))?;
        let part = match f {
            60..=65 => Part::missing("nose", 3),
            120 => Part::new("nose", vec![900.0, 900.0, 900.0], 0.9),
            _ => Part::new(
                "nose",
                clean
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c + wobble(t, k as f64) - 2.0)
                    .collect(),
                0.9,
            ),
        };
        noisy.push(Skeleton::new(f, vec![part]))?;
    }

    let report = |label: &str, s: &PoseSequence| {
        let (e, n) = rmse(s, &truth);
        println!("{label:<28} rmse {e:8.3}  valid frames {n}");
    };
    report("input", &noisy);
    let despiked = velocity_filter(&noisy, 40.0)?;
    report("velocity_filter(40)", &despiked);
    report(
        "statistical_distance(7, 4)",
        &statistical_distance_filter(&noisy, 7, 4.0)?,
    );
    let filled = linear_interpolate(&despiked, 10);
    report("+ linear_interpolate(10)", &filled);
    report("+ moving_average(5)", &moving_average(&filled, 5)?);
    report(
        "+ kalman(0.01, 4, 100)",
        &kalman_filter(&filled, &KalmanParams::new(0.01, 4.0, 100.0)?)?,
    );
    Ok(())
}
