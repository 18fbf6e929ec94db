//! Config parsing from the outside: round trips, defaults and error paths.

use proptest::prelude::*;
use wce::config::{parse_config, Profile, ScenarioConfig, ScenarioKind, StorageKind, WeightsConfig};

fn heat_config() -> impl Strategy<Value = ScenarioConfig> {
    (
        (1u32..12, 1u32..6, 16usize..300),
        (0.01f64..5.0, 1usize..600, 0.0f64..=1.0),
        (0.01f64..5.0, 0.0f64..3.0, 0..=i64::MAX as u64, 1usize..100_000),
        prop_oneof![Just(StorageKind::All), Just(StorageKind::Final), Just(StorageKind::Every)],
        1usize..20,
    )
        .prop_map(|((modes, order, points), (horizon, steps, theta), (a2, sigma, seed, paths), storage, stride)| {
            let mut c = ScenarioConfig::defaults(ScenarioKind::HeatAdvection);
            c.truncation.modes = modes;
            c.truncation.order = order;
            c.grid.points = points;
            c.time.horizon = horizon;
            c.time.steps = steps;
            c.time.theta = theta;
            c.equation.diffusivity = Some(a2);
            c.equation.noise.as_mut().unwrap()[0].sigma = vec![Profile::Constant(sigma)];
            c.oracle.seed = seed;
            c.oracle.paths = paths;
            c.oracle.uh_mode = 1;
            c.output.storage = storage;
            c.output.stride = stride;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toml_round_trip_preserves_config_and_digest(cfg in heat_config()) {
        let text = cfg.to_toml();
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.digest(), cfg.digest());
        prop_assert_eq!(back.to_toml(), text);
    }
}

#[test]
fn every_scenario_default_round_trips() {
    for kind in [ScenarioKind::HeatAdvection, ScenarioKind::PassiveScalar, ScenarioKind::KvCheck, ScenarioKind::Custom] {
        let cfg = ScenarioConfig::defaults(kind);
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg, "{kind:?}");
    }
}

#[test]
fn errors_carry_the_offending_key() {
    let cases = [
        ("scenario = \"heat-advection\"\n[grid]\npoints = 0\n", "grid.points"),
        ("scenario = \"heat-advection\"\n[grid]\ndim = 3\n", "grid.dim"),
        ("scenario = \"heat-advection\"\n[time]\ntheta = 1.5\n", "time.theta"),
        ("scenario = \"heat-advection\"\n[time]\nhorizon = -1\n", "time.horizon"),
        ("scenario = \"heat-advection\"\n[truncation]\nmodes = 0\n", "truncation.modes"),
        ("scenario = \"passive-scalar\"\n[equation]\nviscosity = -0.1\n", "equation.viscosity"),
    ];
    for (text, path) in cases {
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.path, path, "{text}");
        assert!(err.to_string().starts_with(path));
    }
}

#[test]
fn suggested_weights_parse() {
    let cfg = parse_config("scenario = \"heat-advection\"\n[weights]\nkind = \"suggest\"\nepsilon = 0.5\n").unwrap();
    assert_eq!(cfg.weights, WeightsConfig::Suggest { epsilon: 0.5 });
}
