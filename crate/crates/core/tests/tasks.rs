use std::f64::consts::PI;
use std::sync::Arc;

use wpnn_core::cavity::{synthesize_cavity, CavitySpec};
use wpnn_core::encoding::EncodingKind;
use wpnn_core::model::{ArchitectureMode, WeightMatrix, WpnnModel};
use wpnn_core::tasks::{calibrate_scale, generate_task, task_seeds, Butterworth, RegressionTask, CUTOFFS, PAD_LEN};
use wpnn_core::timegate::GateSetting;

/// Squared magnitude of a bilinear-transformed Butterworth low-pass.
fn butterworth_power(order: i32, cutoff: f64, f: f64) -> f64 {
    let ratio = (PI * f / 2.0).tan() / (PI * cutoff / 2.0).tan();
    1.0 / (1.0 + ratio.powi(2 * order))
}

#[test]
fn magnitude_response_matches_closed_form() {
    for &fc in &CUTOFFS {
        let f = Butterworth::lowpass(4, fc).unwrap();
        assert!((f.magnitude(fc) - 0.5f64.sqrt()).abs() < 1e-6);
        for k in 1..200 {
            let nu = k as f64 / 200.0;
            assert!((f.magnitude(nu) - butterworth_power(4, fc, nu).sqrt()).abs() < 1e-10, "fc {fc} nu {nu}");
        }
    }
}

#[test]
fn response_is_monotone_with_steep_stopband() {
    for &fc in &CUTOFFS {
        let f = Butterworth::lowpass(4, fc).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=1000 {
            let m = f.magnitude(k as f64 / 1000.0);
            assert!(m <= prev + 1e-12);
            prev = m;
        }
        assert!(20.0 * f.magnitude(4.0 * fc).log10() < -40.0);
    }
}

#[test]
fn zero_phase_filtering_keeps_passband_sinusoid_in_place() {
    let fc = 0.05;
    let f = Butterworth::lowpass(4, fc).unwrap();
    let nu = 0.01;
    let x: Vec<f64> = (0..600).map(|n| (PI * nu * n as f64).cos()).collect();
    let y = f.filtfilt(&x, PAD_LEN);
    let gain = butterworth_power(4, fc, nu);
    for n in 150..450 {
        assert!((y[n] - gain * x[n]).abs() < 1e-3, "n {n}");
    }
}

#[test]
fn standardized_targets() {
    for seed in 0..5 {
        let t = generate_task(0.04, 30.0, seed).unwrap();
        let n = t.ys.len() as f64;
        let mean = t.ys.iter().sum::<f64>() / n;
        let std = (t.ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean * 30.0).abs() < 1e-12);
        assert!((std * 30.0 - 1.0).abs() < 1e-10);
        assert_eq!(t.xs.len(), 600);
    }
}

#[test]
fn fixtures_are_byte_reproducible() {
    let a = generate_task(0.02, 30.0, 42).unwrap().to_json().unwrap();
    let b = generate_task(0.02, 30.0, 42).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let back = RegressionTask::read(a.as_bytes()).unwrap();
    assert_eq!(back.to_json().unwrap(), a);
    assert_ne!(generate_task(0.02, 30.0, 43).unwrap().to_json().unwrap(), a);
}

fn mean_slope(t: &RegressionTask) -> f64 {
    let dx = t.xs[1] - t.xs[0];
    t.ys.windows(2).map(|w| ((w[1] - w[0]) / dx).abs()).sum::<f64>() / (t.ys.len() - 1) as f64
}

#[test]
fn tiny_cutoff_targets_are_nearly_flat() {
    let seeds = task_seeds(100, 20);
    let slope = |fc: f64| {
        let mut s: Vec<f64> = seeds.iter().map(|&k| mean_slope(&generate_task(fc, 1.0, k).unwrap())).collect();
        s.sort_by(f64::total_cmp);
        s.iter().sum::<f64>() / s.len() as f64
    };
    assert!(slope(0.09) >= 5.0 * slope(0.001));
}

#[test]
fn malformed_fixture_is_rejected() {
    let mut t = generate_task(0.02, 30.0, 1).unwrap();
    t.test_idx.push(t.train_idx[0]);
    assert!(RegressionTask::read(t.to_json().unwrap().as_bytes()).is_err());
}

#[test]
fn constant_readout_is_unreachable() {
    let spec = CavitySpec { n_t: 2, n_r: 2, n_s: 4, n_freq: 3, coupling_scale: 0.0, ..CavitySpec::default() };
    let cav = Arc::new(synthesize_cavity(&spec).unwrap());
    let w = WeightMatrix::filled(4, 1, ArchitectureMode::SharedWeights, 0.0).unwrap();
    let m = WpnnModel::new(cav, EncodingKind::Phase, GateSetting::none(), w).unwrap();
    let c = calibrate_scale(&m, 50, 0).unwrap();
    assert!(c.unreachable());
    assert_eq!(c.reference_g, 30.0);
}

#[test]
fn default_cavity_scale_is_logged() {
    let spec = CavitySpec { n_freq: 3, f_start_hz: 139e9, f_stop_hz: 141e9, ..CavitySpec::default() };
    let cav = Arc::new(synthesize_cavity(&spec).unwrap());
    let w = WeightMatrix::filled(100, 1, ArchitectureMode::SharedWeights, 0.0).unwrap();
    let m = WpnnModel::new(cav, EncodingKind::Phase, GateSetting::none(), w).unwrap();
    let c = calibrate_scale(&m, 1000, 1).unwrap();
    println!("suggested g {:?} (reference {}), readout p1 {:.4} p99 {:.4}", c.suggested_g, c.reference_g, c.percentile_1, c.percentile_99);
    assert!(c.percentile_99 >= c.percentile_1);
}
