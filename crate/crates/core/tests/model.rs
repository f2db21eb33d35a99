use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use wpnn_core::cavity::{synthesize_cavity, CavitySpec, WidebandScattering};
use wpnn_core::encoding::{encode, EncodingKind};
use wpnn_core::model::{ArchitectureMode, WeightMatrix, WpnnModel};
use wpnn_core::rng::{seeded, uniform};
use wpnn_core::scattering::end_to_end_channel;
use wpnn_core::timegate::{gate_channel, GateSetting};
use wpnn_core::C64;

fn cavity(seed: u64) -> Arc<WidebandScattering> {
    let spec = CavitySpec { n_t: 3, n_r: 3, n_s: 10, n_freq: 31, f_start_hz: 125e9, f_stop_hz: 155e9, rng_seed: seed, ..CavitySpec::default() };
    Arc::new(synthesize_cavity(&spec).unwrap())
}

fn random_weights(n_s: usize, depth: usize, mode: ArchitectureMode, lo: f64, hi: f64, seed: u64) -> WeightMatrix {
    let mut rng = seeded(seed);
    let cols = match mode {
        ArchitectureMode::SharedWeights => 1,
        ArchitectureMode::IndependentWeights => depth,
    };
    let v = (0..n_s * cols).map(|_| lo + (hi - lo) * uniform(&mut rng)).collect();
    WeightMatrix::new(n_s, depth, mode, v).unwrap()
}

fn mean_re(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.re).sum::<f64>() / v.len() as f64
}

#[test]
fn two_layer_readout_matches_matrix_product() {
    let cav = cavity(2);
    let w = random_weights(10, 2, ArchitectureMode::IndependentWeights, 0.0, 1.0, 5);
    let m = WpnnModel::new(cav.clone(), EncodingKind::Phase, GateSetting::none(), w.clone()).unwrap();
    for &x in &[0.0, 0.17, 0.5, 0.93] {
        let h1 = end_to_end_channel(cav.operating(), &encode(EncodingKind::Phase, x, w.column(0)).unwrap()).unwrap().entries;
        let h2 = end_to_end_channel(cav.operating(), &encode(EncodingKind::Phase, x, w.column(1)).unwrap()).unwrap().entries;
        let ones = DVector::from_element(3, C64::new(1.0, 0.0));
        let expected = mean_re(&(h2 * h1 * ones));
        assert!((m.forward(x).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn gated_layer_matches_fft_pipeline() {
    let cav = cavity(3);
    let w = random_weights(10, 1, ArchitectureMode::SharedWeights, 0.0, 1.0, 6);
    for tau in [0.02e-9, 0.1e-9, 0.3e-9] {
        let gate = GateSetting::at(tau).unwrap();
        let m = WpnnModel::new(cav.clone(), EncodingKind::Phase, gate, w.clone()).unwrap();
        let h = m.layer_channel(0.4, 0).unwrap();
        let oracle = gate_channel(&cav, &encode(EncodingKind::Phase, 0.4, w.column(0)).unwrap(), gate).unwrap().entries;
        assert!((h - oracle).norm() < 1e-12, "tau {tau}");
    }
}

#[test]
fn cascade_is_linear_in_input_wavefront() {
    let cav = cavity(4);
    let w = random_weights(10, 3, ArchitectureMode::IndependentWeights, 0.0, 1.0, 7);
    let m = WpnnModel::new(cav, EncodingKind::Linear, GateSetting::at(0.05e-9).unwrap(), w).unwrap();
    let a1: Vec<C64> = vec![C64::new(1.0, 0.5), C64::new(-0.2, 0.0), C64::new(0.3, -1.0)];
    let a2: Vec<C64> = vec![C64::new(0.0, 2.0), C64::new(1.0, 1.0), C64::new(-0.7, 0.1)];
    let (c1, c2) = (C64::new(0.4, -1.1), C64::new(-2.0, 0.3));
    let mix: Vec<C64> = a1.iter().zip(&a2).map(|(p, q)| c1 * p + c2 * q).collect();
    let b1 = m.propagate(0.6, &a1).unwrap();
    let b2 = m.propagate(0.6, &a2).unwrap();
    let bm = m.propagate(0.6, &mix).unwrap();
    for k in 0..3 {
        assert!((bm[k] - (c1 * b1[k] + c2 * b2[k])).norm() < 1e-12);
    }
}

#[test]
fn shared_weights_equal_tied_independent_weights() {
    let cav = cavity(5);
    let shared = random_weights(10, 3, ArchitectureMode::SharedWeights, 0.0, 1.0, 8);
    let tied = WeightMatrix::from_columns(&vec![shared.column(0).to_vec(); 3], ArchitectureMode::IndependentWeights).unwrap();
    let gate = GateSetting::at(0.1e-9).unwrap();
    let a = WpnnModel::new(cav.clone(), EncodingKind::Phase, gate, shared).unwrap();
    let b = WpnnModel::new(cav, EncodingKind::Phase, gate, tied).unwrap();
    for &x in &[0.1, 0.55, 1.0] {
        assert_eq!(a.forward(x).unwrap(), b.forward(x).unwrap());
    }
}

#[test]
fn batch_forward_matches_scalar_loop_bitwise() {
    let cav = cavity(6);
    let w = random_weights(10, 2, ArchitectureMode::IndependentWeights, 0.0, 1.0, 9);
    let m = WpnnModel::new(cav, EncodingKind::Phase, GateSetting::none(), w).unwrap();
    let xs: Vec<f64> = (0..600).map(|i| i as f64 / 599.0).collect();
    let batch = m.batch_forward(&xs).unwrap();
    for (x, y) in xs.iter().zip(&batch) {
        assert_eq!(m.forward(*x).unwrap().to_bits(), y.to_bits());
    }
    assert!(m.batch_forward(&[]).unwrap().is_empty());
    assert_eq!(m.batch_forward(&[0.25]).unwrap(), vec![m.forward(0.25).unwrap()]);
}

#[test]
fn traced_forward_records_every_wavefront() {
    let cav = cavity(7);
    let w = random_weights(10, 4, ArchitectureMode::IndependentWeights, 0.0, 1.0, 10);
    let m = WpnnModel::new(cav, EncodingKind::Phase, GateSetting::none(), w).unwrap();
    let t = m.forward_traced(0.3).unwrap();
    assert_eq!(t.wavefronts.len(), 5);
    assert!(t.wavefronts[0].iter().all(|z| *z == C64::new(1.0, 0.0)));
    let h = m.layer_channel(0.3, 2).unwrap();
    let next = DMatrix::from_column_slice(3, 1, &t.wavefronts[2]);
    let expected = h * next;
    for k in 0..3 {
        assert!((expected[(k, 0)] - t.wavefronts[3][k]).norm() < 1e-13);
    }
    assert_eq!(t.readout, m.forward(0.3).unwrap());
}

#[test]
fn out_of_domain_inputs_are_rejected() {
    let cav = cavity(8);
    let w = random_weights(10, 1, ArchitectureMode::SharedWeights, 0.0, 1.0, 11);
    let m = WpnnModel::new(cav, EncodingKind::Phase, GateSetting::none(), w).unwrap();
    assert!(m.forward(1.5).is_err());
    assert!(m.batch_forward(&[0.2, -0.1]).is_err());
}

fn check_gradient(m: &WpnnModel, x: f64, h: f64, coords: usize, seed: u64) {
    let (_, grad) = m.readout_gradient(x).unwrap();
    let n = grad.len();
    let mut rng = seeded(seed);
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    for _ in 0..coords {
        let k = (uniform(&mut rng) * n as f64) as usize;
        let mut plus = m.weights().clone();
        plus.stored_mut()[k] += h;
        let mut minus = m.weights().clone();
        minus.stored_mut()[k] -= h;
        let fd = (m.with_weights(plus).unwrap().forward(x).unwrap() - m.with_weights(minus).unwrap().forward(x).unwrap()) / (2.0 * h);
        let err = (fd - grad[k]).abs() / grad[k].abs().max(1e-3 * scale);
        assert!(err <= 1e-5, "coordinate {k}: analytic {} vs fd {fd} (rel {err:.2e})", grad[k]);
    }
}

#[test]
fn readout_gradient_matches_finite_differences() {
    let cav = cavity(9);
    for (enc, lo, hi, h) in [(EncodingKind::Phase, 0.0, 1.0, 1e-6), (EncodingKind::Linear, 0.25, 0.75, 1e-7)] {
        for gate in [GateSetting::none(), GateSetting::at(0.02e-9).unwrap(), GateSetting::at(0.3e-9).unwrap()] {
            for mode in [ArchitectureMode::SharedWeights, ArchitectureMode::IndependentWeights] {
                for depth in [1, 3] {
                    let w = random_weights(10, depth, mode, lo, hi, 12 + depth as u64);
                    let m = WpnnModel::new(cav.clone(), enc, gate, w).unwrap();
                    check_gradient(&m, 0.71, h, 8, 3);
                }
            }
        }
    }
}

#[test]
fn shared_gradient_is_column_sum_of_independent() {
    let cav = cavity(10);
    let shared = random_weights(10, 3, ArchitectureMode::SharedWeights, 0.0, 1.0, 13);
    let tied = WeightMatrix::from_columns(&vec![shared.column(0).to_vec(); 3], ArchitectureMode::IndependentWeights).unwrap();
    let gate = GateSetting::at(0.05e-9).unwrap();
    let (_, gs) = WpnnModel::new(cav.clone(), EncodingKind::Phase, gate, shared).unwrap().readout_gradient(0.2).unwrap();
    let (_, gi) = WpnnModel::new(cav, EncodingKind::Phase, gate, tied).unwrap().readout_gradient(0.2).unwrap();
    for i in 0..10 {
        let sum = gi[i] + gi[10 + i] + gi[20 + i];
        assert!((gs[i] - sum).abs() < 1e-13);
    }
}

#[test]
fn clipped_linear_weights_have_zero_gradient() {
    let cav = cavity(11);
    let w = WeightMatrix::filled(10, 2, ArchitectureMode::IndependentWeights, -1.0).unwrap();
    let m = WpnnModel::new(cav, EncodingKind::Linear, GateSetting::none(), w).unwrap();
    let (_, g) = m.readout_gradient(0.8).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
}
