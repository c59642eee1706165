use serde_json::Value;
use w2sg_wasm::{activation_radius_json, bbp_curve_json, bound_curve_json, radius_json};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn radius_matches_case_one() {
    let v = parse(radius_json(0.5, 1.0, 0.1, 0.02, 0.05));
    assert!((v["zeta"].as_f64().unwrap() - 0.106).abs() < 0.001);
    assert!(radius_json(-1.0, 1.0, 0.1, 0.02, 0.05).is_err());
}

#[test]
fn activation_radius_reports_moments() {
    let v = parse(activation_radius_json("tanh_cubed", 0.65, 15.0));
    assert!(v["moments"]["mu0"].as_f64().unwrap() > 0.0);
    assert!(v["report"]["angle_deg"].as_f64().unwrap() > 0.0);
    assert!(activation_radius_json("nope", 0.5, 1.0).is_err());
}

#[test]
fn bbp_curve_shape() {
    let v = parse(bbp_curve_json(50.0, 1.0, 11));
    let o: Vec<f64> = v["overlap"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(o.len(), 11);
    assert_eq!(o[0], 0.0);
    assert!(o.windows(2).all(|w| w[0] <= w[1]));
    assert!(bbp_curve_json(50.0, 1.0, 1).is_err());
}

#[test]
fn bound_curve_endpoints() {
    let v = parse(bound_curve_json(0.5, 0.25, 0.05, 0.001, 5.0, 200, 2000, 5));
    assert_eq!(v["values"][0].as_f64().unwrap(), 1.0);
    assert_eq!(v["t_values"][4].as_u64().unwrap(), 2000);
    assert!((v["values"][4].as_f64().unwrap() - 0.99806).abs() < 1e-4);
}
