//! Scores a perturbed prediction against ground truth with MPJPE and PCK at
//! several thresholds.
//!
//! Usage: `cargo run --example metrics`

use cvkit::metrics::{mpjpe, pck};
use cvkit::pose::{Part, PoseSequence, Skeleton};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let names: Vec<String> = ["head", "neck", "spine", "tail"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut gt = PoseSequence::new(names.clone(), 3)?;
    for f in 0..50u64 {
        let x = f as f64 * 5.0;
        let parts = names
            .iter()
            .enumerate()
            .map(|(j, n)| Part::new(n.clone(), vec![x - j as f64 * 30.0, 0.0, 20.0], 1.0))
            .collect();
        gt.push(Skeleton::new(f, parts))?;
    }
    // the tail is off by 12 mm, the rest by 2 mm; frame 7 misses its head
    let pred = gt.map_parts(|i, j, p| {
        if i == 7 && j == 0 {
            return Part::missing(p.name.clone(), 3);
        }
        let d = if j == 3 { 12.0 } else { 2.0 };
        p.with_coords(vec![p.coords[0], p.coords[1] + d, p.coords[2]])
    });

    let m = mpjpe(&pred, &gt)?;
    println!("mpjpe {:.3} over {} pairs", m.overall, m.count);
    for (part, v) in &m.per_part {
        println!("  {part:<6} {}", v.map_or("-".into(), |v| format!("{v:.3}")));
    }
    // reference length = head to neck (30 mm)
    for x in [5.0, 10.0, 50.0] {
        let r = pck(&pred, &gt, x, "head", "neck")?;
        println!("pck@{x:<4} {:.3}", r.overall);
    }
    print!(
        "{}",
        pck(&pred, &gt, 50.0, "head", "neck")?
            .to_csv_string()
            .lines()
            .take(6)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!();
    Ok(())
}
