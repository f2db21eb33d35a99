use std::f64::consts::TAU;

use proptest::prelude::*;

use wpnn_core::encoding::{encode, encode_jacobian, EncodingKind};
use wpnn_core::{WpnnError, C64};

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn phase_examples() {
    let r = encode(EncodingKind::Phase, 0.0, &[0.0, 0.0]).unwrap();
    assert!(r.reflections().iter().all(|z| close(*z, C64::new(1.0, 0.0), 0.0)));
    let r = encode(EncodingKind::Phase, 0.5, &[0.5]).unwrap();
    assert!(close(r.reflections()[0], C64::new(1.0, 0.0), 1e-15));
    let r = encode(EncodingKind::Phase, 0.25, &[0.0]).unwrap();
    assert!(close(r.reflections()[0], C64::new(0.0, 1.0), 1e-15));
}

#[test]
fn linear_example_clips_then_scales() {
    let r = encode(EncodingKind::Linear, 0.3, &[-0.5, 0.4, 1.7]).unwrap();
    let expected = [0.0, 0.12, 0.3];
    for (z, e) in r.reflections().iter().zip(expected) {
        assert!(close(*z, C64::new(e, 0.0), 1e-15));
    }
}

#[test]
fn jacobian_examples() {
    let d = encode_jacobian(EncodingKind::Phase, 0.37, &[0.1, -3.2, 7.9]).unwrap();
    assert!(d.iter().all(|z| (z.norm() - TAU).abs() < 1e-13));
    let d = encode_jacobian(EncodingKind::Linear, 0.6, &[2.0, -1.0, 0.5]).unwrap();
    assert_eq!(d, vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.6, 0.0)]);
}

#[test]
fn domain_is_enforced_with_slack() {
    assert!(encode(EncodingKind::Phase, 1.0 + 5e-13, &[0.0]).is_ok());
    assert!(encode(EncodingKind::Phase, -5e-13, &[0.0]).is_ok());
    assert!(matches!(encode(EncodingKind::Linear, 1.01, &[0.5]), Err(WpnnError::DomainError(_))));
    assert!(matches!(encode_jacobian(EncodingKind::Phase, -0.1, &[0.5]), Err(WpnnError::DomainError(_))));
}

#[test]
fn kinds_serialize_lowercase() {
    assert_eq!(serde_json::to_string(&EncodingKind::Phase).unwrap(), "\"phase\"");
    assert_eq!(serde_json::to_string(&EncodingKind::Linear).unwrap(), "\"linear\"");
    assert_eq!(serde_json::from_str::<EncodingKind>("\"linear\"").unwrap(), EncodingKind::Linear);
}

proptest! {
    #[test]
    fn phase_derivative_matches_central_difference(x in 0.0f64..1.0, w in -3.0f64..3.0) {
        let h = 1e-6;
        let f = |w: f64| encode(EncodingKind::Phase, x, &[w]).unwrap().reflections()[0];
        let fd = (f(w + h) - f(w - h)) / (2.0 * h);
        let an = encode_jacobian(EncodingKind::Phase, x, &[w]).unwrap()[0];
        prop_assert!((fd - an).norm() / an.norm() <= 1e-7);
    }

    #[test]
    fn phase_is_one_periodic(x in 0.0f64..1.0, w in -5.0f64..5.0) {
        let a = encode(EncodingKind::Phase, x, &[w]).unwrap().reflections()[0];
        let b = encode(EncodingKind::Phase, x, &[w + 1.0]).unwrap().reflections()[0];
        prop_assert!(close(a, b, 1e-12));
        prop_assert!((a.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_magnitude_is_bounded_by_input(x in 0.0f64..=1.0, ws in proptest::collection::vec(-2.0f64..3.0, 1..12)) {
        let r = encode(EncodingKind::Linear, x, &ws).unwrap();
        for z in r.reflections() {
            prop_assert!(z.im == 0.0 && z.re >= 0.0 && z.norm() <= x);
        }
    }

    #[test]
    fn encoding_is_elementwise(x in 0.0f64..=1.0, ws in proptest::collection::vec(-2.0f64..3.0, 2..10), shift in 1usize..9) {
        for kind in [EncodingKind::Phase, EncodingKind::Linear] {
            let n = ws.len();
            let perm: Vec<f64> = (0..n).map(|i| ws[(i + shift) % n]).collect();
            let a = encode(kind, x, &ws).unwrap();
            let b = encode(kind, x, &perm).unwrap();
            for i in 0..n {
                prop_assert_eq!(b.reflections()[i], a.reflections()[(i + shift) % n]);
            }
        }
    }
}
