use chainlb_bench::dense::{random_orthogonal, DenseRotated, TooLarge, DENSE_MAX_DIM};
use chainlb_core::instance::make_instance;
use chainlb_core::solvers::random_pairs;
use chainlb_core::Family;
use proptest::prelude::*;

#[test]
fn rotation_is_orthogonal_and_seeded() {
    let a = random_orthogonal(40, 9);
    let b = random_orthogonal(40, 9);
    assert_eq!(a, b);
    assert!((a.transpose() * &a - nalgebra::DMatrix::identity(40, 40)).amax() < 1e-12);
    assert_ne!(a, random_orthogonal(40, 10));
}

#[test]
fn oversized_instances_are_refused() {
    let inst = make_instance(Family::OmegaN, DENSE_MAX_DIM + 1, 1.0, 1.0, 1.0, 0.1).unwrap();
    assert_eq!(DenseRotated::new(&inst, 0).err(), Some(TooLarge(DENSE_MAX_DIM + 1)));
}

#[test]
fn gd_trajectory_is_rotation_invariant() {
    // GD commutes with orthogonal changes of variables: residuals match step by step
    let inst = make_instance(Family::Sc, 4, 1.0, 1e-2, 1.0, 1e-4).unwrap();
    let dense = DenseRotated::new(&inst, 3).unwrap();
    let d = inst.dim();
    let step = 1.0 / inst.meta.f_interval.1;
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut gx, mut gy) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..50 {
        inst.full_into(&x, &mut gx);
        dense.full_into(&y, &mut gy);
        x.iter_mut().zip(&gx).for_each(|(a, g)| *a -= step * g);
        y.iter_mut().zip(&gy).for_each(|(a, g)| *a -= step * g);
        let (r1, r2) = (inst.residual(&x), dense.residual(&y));
        assert!((r1 - r2).abs() <= 1e-10 * r1.max(1e-12), "{r1} vs {r2}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rotated_instances_keep_average_smoothness(which in 0usize..4, seed in any::<u64>()) {
        let inst = match which {
            0 => make_instance(Family::Sc, 4, 1.0, 1e-2, 1.0, 1e-4),
            1 => make_instance(Family::Cvx, 4, 1.0, 1.0, 1.0, 1e-4),
            2 => make_instance(Family::AvgNc, 4, 1.0, 0.04, 1.0, 6e-4),
            _ => make_instance(Family::IndNc, 4, 1.0, 0.1, 1.0, 1e-3),
        }
        .unwrap();
        let dense = DenseRotated::new(&inst, seed).unwrap();
        prop_assert!(dense.orthogonality_error() < 1e-12);
        let pairs = random_pairs(&inst, 200, seed);
        prop_assert_eq!(dense.avg_smooth_violations(&pairs, 1e-9), 0);
        // values agree at corresponding points
        let (x, _) = &pairs[1];
        let y = dense.pull_back(x);
        let mut g = vec![0.0; inst.dim()];
        let v1 = inst.full(x).unwrap().0;
        let v2 = dense.full_into(&y, &mut g);
        prop_assert!((v1 - v2).abs() <= 1e-10 * v1.abs().max(1.0));
    }
}
