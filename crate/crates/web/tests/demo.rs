use serde_json::Value;

use wpnn_web::DemoCore;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn impulse_axis_and_markers() {
    let d = DemoCore::new(8, 1.0, 3).unwrap();
    let v = parse(d.impulse_json(0.2, 1).unwrap());
    let delays = v["delays_ns"].as_array().unwrap();
    assert_eq!(delays.len(), 61);
    // Delay spacing is one over the 60 GHz span.
    assert!((delays[1].as_f64().unwrap() - 1.0 / 60.0).abs() < 1e-12);
    assert_eq!(v["energy_db"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).fold(f64::MIN, f64::max), 0.0);
    assert_eq!(v["markers"][0]["kept_samples"], 2);
}

#[test]
fn ungated_single_layer_reports_harmonics() {
    let d = DemoCore::new(8, 1.0, 3).unwrap();
    let v = parse(d.readout_json(0.0, 1, 2, 33).unwrap());
    assert_eq!(v["xs"].as_array().unwrap().len(), 33);
    assert!(v["harmonics"].as_array().unwrap().len() > 2);
    let gated = parse(d.readout_json(0.05, 2, 2, 9).unwrap());
    assert!(gated["harmonics"].as_array().unwrap().is_empty());
}

#[test]
fn uncoupled_cavity_is_affine_at_every_gate() {
    let d = DemoCore::new(6, 0.0, 1).unwrap();
    assert_eq!(d.richness(), 0.0);
    let v = parse(d.nonlinearity_json(2, 16).unwrap());
    assert_eq!(v["scores"].as_array().unwrap().len(), 7);
    assert!(v["taus_ns"][6].is_null());
    assert!(v["scores"].as_array().unwrap().iter().all(|s| s.as_f64().unwrap() < 1e-8));
}
