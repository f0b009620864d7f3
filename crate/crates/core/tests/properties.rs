mod common;

use cvkit::filters::{linear_interpolate, moving_average};
use cvkit::geometry::{align_axes, apply_rigid, RigidTransform};
use cvkit::pose::{part_distance, read_pose, write_pose, Part, PoseFormat, PoseSequence, Skeleton};
use nalgebra::{Point3, Rotation3, Vector3};
use proptest::prelude::*;

fn coords(dims: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e4..1e4f64, dims)
}

fn sequence(dims: usize) -> impl Strategy<Value = PoseSequence> {
    (1usize..4, 1usize..25).prop_flat_map(move |(parts, frames)| {
        let part = (coords(dims), prop_oneof![Just(0.0), 0.0..=1.0f64]);
        (
            prop::collection::vec(prop::collection::vec(part, parts), frames),
            prop::collection::vec(1u64..4, frames),
            prop::collection::vec(prop::bool::weighted(0.2), frames),
        )
            .prop_map(move |(rows, steps, labels)| {
                let names = common::part_names(parts);
                let mut seq = PoseSequence::new(names.clone(), dims).unwrap();
                let mut frame = 0;
                for ((row, step), label) in rows.into_iter().zip(steps).zip(labels) {
                    frame += step;
                    let ps = row
                        .into_iter()
                        .zip(&names)
                        .map(|((c, s), n)| {
                            if s == 0.0 {
                                Part::missing(n.clone(), dims)
                            } else {
                                Part::new(n.clone(), c, s)
                            }
                        })
                        .collect();
                    let mut skel = Skeleton::new(frame, ps);
                    if label {
                        skel = skel.with_behavior("rearing");
                    }
                    seq.push(skel).unwrap();
                }
                seq
            })
    })
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    (-3.0..3.0f64, -1.5..1.5f64, -3.0..3.0f64).prop_map(|(r, p, y)| Rotation3::from_euler_angles(r, p, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cvkit_format_round_trips(dims in 2usize..4, seed in any::<u64>()) {
        let seq = common::random_sequence(&mut common::rng(seed), 12, 3, dims);
        let mut bytes = Vec::new();
        write_pose(&seq, &mut bytes, PoseFormat::Cvkit).unwrap();
        let back = read_pose(bytes.as_slice(), PoseFormat::Cvkit).unwrap();
        prop_assert_eq!(&back, &seq);
        let mut again = Vec::new();
        write_pose(&back, &mut again, PoseFormat::Cvkit).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn generated_sequences_round_trip(seq in sequence(3)) {
        for format in [PoseFormat::Cvkit, PoseFormat::FlatCsv] {
            let mut bytes = Vec::new();
            write_pose(&seq, &mut bytes, format).unwrap();
            prop_assert_eq!(&read_pose(bytes.as_slice(), format).unwrap(), &seq);
        }
    }

    #[test]
    fn part_distance_is_a_metric(a in coords(3), b in coords(3), c in coords(3)) {
        let (a, b, c) = (Part::new("a", a, 1.0), Part::new("b", b, 1.0), Part::new("c", c, 1.0));
        let ab = part_distance(&a, &b).unwrap();
        prop_assert_eq!(part_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, part_distance(&b, &a).unwrap());
        let via = part_distance(&a, &c).unwrap() + part_distance(&c, &b).unwrap();
        prop_assert!(ab <= via * (1.0 + 1e-12) + 1e-9);
    }

    #[test]
    fn part_distance_rejects_mixed_dims(a in coords(2), b in coords(3)) {
        prop_assert!(part_distance(&Part::new("a", a, 1.0), &Part::new("b", b, 1.0)).is_err());
    }

    #[test]
    fn interpolated_points_lie_on_the_segment(
        a in coords(3),
        b in coords(3),
        gap in 1usize..8,
        max_gap in 0usize..8,
    ) {
        let mut seq = PoseSequence::new(vec!["p".into()], 3).unwrap();
        seq.push(Skeleton::new(0, vec![Part::new("p", a.clone(), 0.9)])).unwrap();
        for i in 0..gap {
            seq.push(Skeleton::new(1 + i as u64, vec![Part::missing("p", 3)])).unwrap();
        }
        seq.push(Skeleton::new(1 + gap as u64, vec![Part::new("p", b.clone(), 0.7)])).unwrap();
        let out = linear_interpolate(&seq, max_gap);
        let (pa, pb) = (Part::new("a", a, 1.0), Part::new("b", b, 1.0));
        let total = part_distance(&pa, &pb).unwrap();
        for (i, skel) in out.skeletons().iter().enumerate().skip(1).take(gap) {
            let p = &skel.parts[0];
            if gap > max_gap {
                prop_assert_eq!(p, &seq.skeletons()[i].parts[0]);
                continue;
            }
            prop_assert!((p.score - 0.8).abs() < 1e-12);
            let da = part_distance(&pa, p).unwrap();
            let db = part_distance(p, &pb).unwrap();
            prop_assert!((da + db - total).abs() <= 1e-9 * (1.0 + total));
            let t = i as f64 / (gap + 1) as f64;
            prop_assert!((da - t * total).abs() <= 1e-9 * (1.0 + total));
        }
    }

    #[test]
    fn moving_average_keeps_scores_and_shape(seq in sequence(2), half in 0usize..4) {
        let out = moving_average(&seq, 2 * half + 1).unwrap();
        prop_assert_eq!(out.len(), seq.len());
        for (s, o) in seq.skeletons().iter().zip(out.skeletons()) {
            prop_assert_eq!(s.frame_index, o.frame_index);
            prop_assert_eq!(&s.behaviors, &o.behaviors);
            for (p, q) in s.parts.iter().zip(&o.parts) {
                prop_assert_eq!(p.score, q.score);
            }
        }
    }

    #[test]
    fn rigid_transform_inverse_restores_points(
        rot in rotation(),
        t in coords(3),
        p in coords(3),
    ) {
        let tf = RigidTransform::new(*rot.matrix(), Vector3::from_vec(t)).unwrap();
        let p = Point3::from_slice(&p);
        let back = tf.inverse().apply(&tf.apply(&p));
        prop_assert!((back - p).norm() < 1e-7);
        let id = tf.then(&tf.inverse());
        prop_assert!((id.apply(&p) - p).norm() < 1e-7);
    }

    #[test]
    fn align_axes_is_right_handed(o in coords(3), x in coords(3), w in coords(3)) {
        let (o, x, w) = (Point3::from_slice(&o), Point3::from_slice(&x), Point3::from_slice(&w));
        let ex = x - o;
        let cross = ex.cross(&(w - o));
        prop_assume!(ex.norm() > 1.0 && cross.norm() > 1e-3 * ex.norm() * (w - o).norm());
        let tf = align_axes(&o, &x, &w).unwrap();
        prop_assert!((tf.rotation().determinant() - 1.0).abs() < 1e-9);
        prop_assert!(tf.apply(&o).coords.norm() < 1e-6);
        let xa = tf.apply(&x);
        prop_assert!(xa.x > 0.0 && xa.y.abs() < 1e-6 && xa.z.abs() < 1e-6);
        let wa = tf.apply(&w);
        prop_assert!(wa.y > 0.0 && wa.z.abs() < 1e-6);
    }

    #[test]
    fn apply_rigid_preserves_pairwise_distances(seed in any::<u64>(), rot in rotation(), t in coords(3)) {
        let seq = common::random_sequence(&mut common::rng(seed), 6, 3, 3);
        let tf = RigidTransform::new(*rot.matrix(), Vector3::from_vec(t)).unwrap();
        let moved = apply_rigid(&tf, &seq).unwrap();
        for (i, (s, m)) in seq.skeletons().iter().zip(moved.skeletons()).enumerate() {
            if seq.is_valid(i, 0) && seq.is_valid(i, 1) {
                let d0 = part_distance(&s.parts[0], &s.parts[1]).unwrap();
                let d1 = part_distance(&m.parts[0], &m.parts[1]).unwrap();
                prop_assert!((d0 - d1).abs() < 1e-6);
            }
        }
    }
}
