use std::f64::consts::PI;

use geocontact::scenario::{self, ChartSpec, DisturbanceKind, Mode, Scenario};

const BASE: &str = r#"
name = "t"
mode = "kinematic"
eta = 50.0

[body.finger]
chart = "sphere"
radius = 0.04

[body.object]
chart = "sphere"
radius = 0.1

[[contact]]
object = [1.0, 0.0]
finger = ["pi/2", 0.0]
psi = 0.0
finger_rates = [0.0, 0.5]

[sigma]
coefficients = [1.0]

[integrator]
step = 1e-3
horizon = 0.05
"#;

fn field_of(text: &str) -> String {
    match Scenario::from_toml_str(text).unwrap_err() {
        geocontact::Error::Validation { field, .. } => field,
        e => panic!("expected a validation error, got {e}"),
    }
}

#[test]
fn sphere_builtin_matches_published_setup() {
    let s = scenario::builtin("sphere_eta100").unwrap();
    assert_eq!(s.mode, Mode::Kinematic);
    assert_eq!(s.eta, Some(100.0));
    assert_eq!(s.object.chart, ChartSpec::Sphere { radius: 0.1 });
    assert_eq!(s.finger.chart, ChartSpec::Sphere { radius: 0.04 });
    let coords: Vec<[f64; 2]> = s.contacts.iter().map(|c| c.object).collect();
    assert_eq!(coords, vec![[PI / 6.0, PI / 6.0], [2.0 * PI / 3.0, PI / 6.0], [PI / 10.0, PI]]);
}

#[test]
fn ellipsoid_builtin_matches_published_setup() {
    let s = scenario::builtin("ellipsoid_eta100").unwrap();
    assert_eq!(s.object.chart, ChartSpec::Ellipsoid { radii: [0.3, 0.2, 0.1] });
    let coords: Vec<[f64; 2]> = s.contacts.iter().map(|c| c.object).collect();
    assert_eq!(
        coords,
        vec![[2.0 * PI / 3.0, PI / 2.0], [-2.0 * PI / 3.0, -PI / 2.0], [PI / 6.0, PI / 2.0]]
    );
    let d = &s.disturbances[0];
    assert_eq!(d.kind, DisturbanceKind::AccelerationOffset);
    assert_eq!((d.t_start, d.t_end, d.magnitude), (0.1, 0.15, [-0.1, -0.1]));
    assert_eq!(d.contacts, vec![0, 1, 2]);
}

#[test]
fn validation_names_the_field() {
    assert_eq!(field_of(&BASE.replace("eta = 50.0", "eta = -1.0")), "eta");
    assert_eq!(field_of(&BASE.replace("eta = 50.0\n", "")), "eta");
    assert_eq!(field_of(&BASE.replace("object = [1.0, 0.0]", "object = [4.0, 0.0]")), "contact[0].object");
    assert_eq!(field_of(&BASE.replace("psi = 0.0", "psi = \"half\"")), "contact[0].psi");
    assert_eq!(field_of(&BASE.replace("step = 1e-3", "step = 0.0")), "integrator.step");
    assert_eq!(field_of(&BASE.replace("coefficients = [1.0]", "coefficients = [0.01, -1.0]")), "sigma.coefficients");
    assert_eq!(field_of(&BASE.replace("chart = \"sphere\"\nradius = 0.1", "chart = \"torus\"\nradius = 0.1")), "body.object.chart");
    let window = format!("{BASE}\n[[disturbance]]\nkind = \"rate-offset\"\nmagnitude = [1.0, 0.0]\nt_start = 0.2\nt_end = 0.1\n");
    assert_eq!(field_of(&window), "disturbance[0].t_end");
    let index = format!("{BASE}\n[[disturbance]]\nkind = \"rate-offset\"\nmagnitude = [1.0, 0.0]\nt_start = 0.0\nt_end = 0.1\ncontacts = [3]\n");
    assert_eq!(field_of(&index), "disturbance[0].contacts");
    let dynamic = BASE.replace("mode = \"kinematic\"", "mode = \"dynamic\"");
    assert_eq!(field_of(&dynamic), "body.object.mass");
}

#[test]
fn parse_errors_report_the_line() {
    let err = Scenario::from_toml_str(&BASE.replace("horizon = 0.05", "horizon = ")).unwrap_err();
    assert!(matches!(err, geocontact::Error::Parse(_)));
    assert!(err.to_string().contains("line"), "{err}");
    let err = Scenario::from_toml_str(&format!("{BASE}\nbogus = 1\n")).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
}

#[test]
fn load_from_file_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.toml");
    std::fs::write(&path, BASE).unwrap();
    assert_eq!(scenario::load_scenario(&path).unwrap().name, "t");
    let err = scenario::load_scenario(dir.path().join("none.toml")).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn runs_are_deterministic_and_seed_dependent() {
    let text = BASE.replace("finger_rates = [0.0, 0.5]", "finger_rates = [0.0, 0.5]\nrandom_slip = 0.02");
    let s = Scenario::from_toml_str(&text).unwrap();
    let a = scenario::run(&s).unwrap();
    let b = scenario::run(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let pa = scenario::write_outputs(&s, &a, &dir.path().join("a")).unwrap();
    let pb = scenario::write_outputs(&s, &b, &dir.path().join("b")).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let mut reseeded = s.clone();
    reseeded.seed = 7;
    let c = scenario::run(&reseeded).unwrap();
    assert_ne!(a.log.contacts[0][0].v_rel, c.log.contacts[0][0].v_rel);
    let v0 = &a.log.contacts[0][0].v_rel;
    assert!((v0[0].hypot(v0[1]) - 0.02).abs() < 1e-12);
}

#[test]
fn log_times_strictly_increase() {
    let s = scenario::builtin("sphere_accel_eta100").unwrap();
    let out = scenario::run(&s).unwrap();
    for rows in &out.log.contacts {
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
        assert!((rows.last().unwrap().t - 0.3).abs() < 1e-12);
    }
}

#[test]
fn corollary_mode_rejects_disturbances() {
    let mut text = scenario::BUILTINS.iter().find(|(n, _)| *n == "corollary_sphere").unwrap().1.to_string();
    text.push_str("\n[[disturbance]]\nkind = \"rate-offset\"\nmagnitude = [1.0, 0.0]\nt_start = 0.0\nt_end = 0.1\n");
    assert_eq!(field_of(&text), "disturbance[0].kind");
}

#[test]
fn summary_serializes_metrics() {
    let s = scenario::builtin("corollary_cylinder_sphere").unwrap();
    let out = scenario::run(&s).unwrap();
    let json = serde_json::to_value(&out.summary).unwrap();
    assert_eq!(json["mode"], "rolling-corollary");
    assert!(json["contacts"][0]["corollary"]["max_plane_deviation"].as_f64().unwrap() < 1e-9);
}
