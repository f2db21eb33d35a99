use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wpnn_core::scattering::{
    end_to_end_channel, neumann_channel, spectral_radius, validate_passivity, LoadVector, PortPartition, ScatteringMatrix,
};
use wpnn_core::{WpnnError, C64};

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<C64> {
    DMatrix::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Random matrix rescaled to largest singular value `sigma`.
fn passive(n_t: usize, n_r: usize, n_s: usize, sigma: f64, seed: u64) -> ScatteringMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_t + n_r + n_s;
    let m = gaussian_matrix(&mut rng, n, n);
    let smax = m.singular_values().max();
    ScatteringMatrix::new(m * C64::new(sigma / smax, 0.0), PortPartition::contiguous(n_t, n_r, n_s).unwrap(), 140e9).unwrap()
}

fn unit_loads(n: usize, seed: u64) -> LoadVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    LoadVector::new((0..n).map(|_| C64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>())).collect()).unwrap()
}

fn rel(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn with_zero_ss(s: &ScatteringMatrix) -> ScatteringMatrix {
    s.with_zeroed_pm_coupling()
}

#[test]
fn zero_loads_give_direct_path_exactly() {
    let s = passive(2, 3, 5, 0.95, 1);
    let h = end_to_end_channel(&s, &LoadVector::zeros(5)).unwrap();
    assert_eq!(h.entries, s.s_rt());
}

#[test]
fn uncoupled_metasurface_is_single_bounce() {
    let s = with_zero_ss(&passive(2, 2, 4, 0.9, 2));
    let r = unit_loads(4, 2);
    let expected = s.s_rt() + s.s_rs() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.reflections().to_vec())) * s.s_st();
    let h = end_to_end_channel(&s, &r).unwrap();
    assert!(rel(&h.entries, &expected) < 1e-14);
}

#[test]
fn six_port_matches_long_neumann_sum() {
    for seed in 0..10 {
        let s = passive(1, 1, 4, 0.9, 10 + seed);
        let r = unit_loads(4, seed);
        let exact = end_to_end_channel(&s, &r).unwrap();
        let series = neumann_channel(&s, &r, 200).unwrap();
        assert!(rel(&series.entries, &exact.entries) < 1e-10);
    }
}

#[test]
fn low_order_neumann_terms_match_hand_expansion() {
    let s = passive(2, 2, 3, 0.9, 3);
    let r = unit_loads(3, 3);
    let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r.reflections().to_vec()));
    let k0 = s.s_rt() + s.s_rs() * &phi * s.s_st();
    let k1 = &k0 + s.s_rs() * &phi * s.s_ss() * &phi * s.s_st();
    assert!(rel(&neumann_channel(&s, &r, 0).unwrap().entries, &k0) < 1e-14);
    assert!(rel(&neumann_channel(&s, &r, 1).unwrap().entries, &k1) < 1e-14);
}

#[test]
fn neumann_error_decays_geometrically() {
    let s = passive(2, 2, 6, 0.95, 4);
    let r = unit_loads(6, 4);
    let rho = spectral_radius(&r, &s.s_ss()).unwrap();
    let exact = end_to_end_channel(&s, &r).unwrap().entries;
    let errs: Vec<f64> = (0..60).map(|k| (neumann_channel(&s, &r, k).unwrap().entries - &exact).norm()).collect();
    // Empirical constant from the first term, then bounded by rho^(K+1) growth.
    let c = errs[5] / rho.powi(6);
    for (k, e) in errs.iter().enumerate().skip(5) {
        assert!(*e <= 1.5 * c * rho.powi(k as i32 + 1) + 1e-15, "K {k}: {e}");
    }
    assert!(errs[59] < errs[10]);
}

#[test]
fn terminating_series_without_coupling() {
    let s = with_zero_ss(&passive(1, 2, 3, 0.9, 5));
    let r = unit_loads(3, 5);
    let exact = end_to_end_channel(&s, &r).unwrap();
    for k in [0, 1, 7] {
        assert!(rel(&neumann_channel(&s, &r, k).unwrap().entries, &exact.entries) < 1e-15);
    }
}

#[test]
fn spectral_radius_examples() {
    let n = 4;
    assert_eq!(spectral_radius(&unit_loads(n, 0), &DMatrix::zeros(n, n)).unwrap(), 0.0);
    let half = DMatrix::from_diagonal_element(n, n, C64::new(0.5, 0.0));
    let ones = LoadVector::new(vec![C64::new(1.0, 0.0); n]).unwrap();
    assert!((spectral_radius(&ones, &half).unwrap() - 0.5).abs() < 1e-14);
    for seed in 0..10 {
        let s = passive(1, 1, 6, 0.99, 30 + seed);
        let r = unit_loads(6, seed);
        let mut bounce = s.s_ss();
        for i in 0..6 {
            for j in 0..6 {
                bounce[(i, j)] *= r.reflections()[i];
            }
        }
        let rho = spectral_radius(&r, &s.s_ss()).unwrap();
        assert!(rho < 1.0 && rho <= bounce.singular_values().max() + 1e-12);
    }
}

#[test]
fn passivity_report_examples() {
    let p = PortPartition::contiguous(1, 1, 1).unwrap();
    let zero = ScatteringMatrix::idealized(DMatrix::zeros(3, 3), p.clone(), 1.0).unwrap();
    let report = validate_passivity(&zero);
    assert!(report.passes && report.sigma_max == 0.0);
    let eye = ScatteringMatrix::idealized(DMatrix::identity(3, 3), p.clone(), 1.0).unwrap();
    assert!(validate_passivity(&eye).passes);
    assert!((validate_passivity(&eye).sigma_max - 1.0).abs() < 1e-15);
    let gain = ScatteringMatrix::idealized(DMatrix::identity(3, 3) * C64::new(1.01, 0.0), p.clone(), 1.0).unwrap();
    assert!(!validate_passivity(&gain).passes);
    assert!(matches!(
        ScatteringMatrix::new(DMatrix::identity(3, 3) * C64::new(1.01, 0.0), p, 1.0),
        Err(WpnnError::PassivityViolation { .. })
    ));
}

#[test]
fn lossless_self_loop_is_rejected() {
    let p = PortPartition::contiguous(1, 1, 2).unwrap();
    let s = ScatteringMatrix::new(DMatrix::identity(4, 4), p, 1.0).unwrap();
    let ones = LoadVector::new(vec![C64::new(1.0, 0.0); 2]).unwrap();
    assert!(matches!(end_to_end_channel(&s, &ones), Err(WpnnError::SingularResolvent(_))));
    assert!(matches!(end_to_end_channel(&s, &LoadVector::zeros(3)), Err(WpnnError::DimensionMismatch(_))));
}

#[test]
fn interleaved_partition_selects_the_right_blocks() {
    let s = passive(1, 1, 3, 0.9, 6);
    let entries = s.entries().clone();
    // Same network with ports stored as pm, rx, pm, tx, pm.
    let perm = [2usize, 1, 3, 0, 4];
    let permuted = DMatrix::from_fn(5, 5, |i, j| entries[(perm[i], perm[j])]);
    let p = PortPartition::new(vec![3], vec![1], vec![0, 2, 4]).unwrap();
    let s2 = ScatteringMatrix::new(permuted, p, 1.0).unwrap();
    let r = unit_loads(3, 6);
    assert!(rel(&end_to_end_channel(&s2, &r).unwrap().entries, &end_to_end_channel(&s, &r).unwrap().entries) < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_collapse_without_coupling(seed in 0u64..1000, lambda in 0.0f64..=1.0) {
        let s = with_zero_ss(&passive(2, 2, 5, 0.9, seed));
        let r1 = unit_loads(5, seed);
        let r2 = unit_loads(5, seed + 1);
        let mix: Vec<C64> = r1.reflections().iter().zip(r2.reflections()).map(|(a, b)| a * lambda + b * (1.0 - lambda)).collect();
        let h = |r: &LoadVector| end_to_end_channel(&s, r).unwrap().entries - s.s_rt();
        let lhs = h(&LoadVector::new(mix).unwrap());
        let rhs = h(&r1) * C64::new(lambda, 0.0) + h(&r2) * C64::new(1.0 - lambda, 0.0);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1e-300) + 1e-15);
    }

    #[test]
    fn pm_reordering_is_invariant(seed in 0u64..1000, rot in 1usize..4) {
        let s = passive(1, 2, 4, 0.9, seed);
        let r = unit_loads(4, seed);
        let order: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
        let p = s.partition().with_pm_order(&order).unwrap();
        let s2 = ScatteringMatrix::new(s.entries().clone(), p, s.frequency_hz()).unwrap();
        let r2 = LoadVector::new(order.iter().map(|&i| r.reflections()[i]).collect()).unwrap();
        let a = end_to_end_channel(&s, &r).unwrap().entries;
        let b = end_to_end_channel(&s2, &r2).unwrap().entries;
        prop_assert!(rel(&b, &a) < 1e-13);
    }

    #[test]
    fn channel_is_bit_stable(seed in 0u64..1000) {
        let s = passive(2, 2, 4, 0.9, seed);
        let r = unit_loads(4, seed);
        prop_assert_eq!(end_to_end_channel(&s, &r).unwrap(), end_to_end_channel(&s, &r).unwrap());
    }
}
