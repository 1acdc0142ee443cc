use std::path::PathBuf;

use anosov_lab::config::{self, ExperimentConfig, GeneratorSpec, MeasureSpec, WalkConfig};
use proptest::prelude::*;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn degenerate() -> ExperimentConfig {
    config::load(&bundled("degenerate_diag.json")).unwrap().0
}

#[test]
fn bundled_configs_load() {
    for name in ["degenerate_diag.json", "pingpong_sl3.json"] {
        let (cfg, bytes) = config::load(&bundled(name)).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(cfg.representation().dim(), cfg.d);
    }
    let pp = config::load(&bundled("pingpong_sl3.json")).unwrap().0;
    assert_eq!(pp.signature, vec![1, 2]);
    assert_eq!(pp.ray().unwrap().len(), 60);
}

#[test]
fn canonical_round_trip_of_bundled_configs() {
    for name in ["degenerate_diag.json", "pingpong_sl3.json"] {
        let cfg = config::load(&bundled(name)).unwrap().0;
        let text = cfg.to_canonical_json();
        let back = config::parse(&text, "canonical").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical_json(), text);
    }
}

fn expect_err(text: &str) -> String {
    config::parse(text, "test.json").unwrap_err().to_string()
}

#[test]
fn validation_messages() {
    let mut cfg = degenerate();
    cfg.generators[0].matrix[0][0] = -4.0;
    let msg = expect_err(&cfg.to_canonical_json());
    assert!(msg.contains("generator 'a'") && msg.contains("determinant"), "{msg}");

    let mut cfg = degenerate();
    cfg.signature = vec![1, 3];
    assert!(expect_err(&cfg.to_canonical_json()).contains("signature"));

    let mut cfg = degenerate();
    cfg.generators[0].matrix.pop();
    assert!(expect_err(&cfg.to_canonical_json()).contains("not 3x3"));

    let mut cfg = degenerate();
    cfg.tolerances.falconer = 0.0;
    assert!(expect_err(&cfg.to_canonical_json()).contains("tolerances.falconer"));

    let mut cfg = degenerate();
    cfg.schema_version = 2;
    assert!(expect_err(&cfg.to_canonical_json()).contains("schema_version"));

    let mut cfg = degenerate();
    cfg.walks[0].measure = MeasureSpec::Named("lazy".into());
    assert!(expect_err(&cfg.to_canonical_json()).contains("unknown measure"));
}

#[test]
fn schema_errors_name_the_field_and_line() {
    let text = degenerate().to_canonical_json().replace("\"n_min\": 4", "\"n_min\": \"four\"");
    let msg = expect_err(&text);
    assert!(msg.contains("pressure.n_min") && msg.contains("line"), "{msg}");
    let text = degenerate().to_canonical_json().replacen("{", "{\n  \"extra\": 1,", 1);
    assert!(expect_err(&text).contains("unknown field"));
}

#[test]
fn atom_measures_parse() {
    let mut cfg = degenerate();
    let atoms = [("a".to_string(), 0.75), ("a'".to_string(), 0.25)].into_iter().collect();
    cfg.walks = vec![WalkConfig { name: "drift".into(), measure: MeasureSpec::Atoms(atoms), ..WalkConfig::uniform() }];
    let back = config::parse(&cfg.to_canonical_json(), "t").unwrap();
    let mu = back.measure(&back.walks[0]).unwrap();
    assert_eq!(mu.support_len(), 2);
    assert!(!mu.is_symmetric());
}

fn matrix_with_positive_det() -> impl Strategy<Value = Vec<Vec<f64>>> {
    // upper triangular with positive diagonal, then a shear below
    (prop::collection::vec(0.2f64..5.0, 3), prop::collection::vec(-3.0f64..3.0, 6)).prop_map(|(diag, off)| {
        let mut m = vec![vec![0.0; 3]; 3];
        for i in 0..3 {
            m[i][i] = diag[i];
        }
        m[0][1] = off[0];
        m[0][2] = off[1];
        m[1][2] = off[2];
        let mut out = m.clone();
        for j in 0..3 {
            out[1][j] += off[3] * m[0][j];
            out[2][j] += off[4] * m[0][j] + off[5] * m[1][j];
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_serializer_round_trips(
        mats in prop::collection::vec(matrix_with_positive_det(), 1..=3),
        seed in any::<u64>(),
        gap_tol in 1e-12f64..1e-2,
        tol in 1e-3f64..1.0,
        n_min in 1usize..8,
        span in 1usize..6,
        signature in prop::sample::select(vec![vec![1], vec![2], vec![1, 2]]),
    ) {
        let mut cfg = degenerate();
        cfg.generators = mats
            .into_iter()
            .zip(['a', 'b', 'c'])
            .map(|(matrix, name)| GeneratorSpec { name, matrix })
            .collect();
        cfg.seed = seed;
        cfg.gap_tol = gap_tol;
        cfg.tolerances.minkowski = tol;
        cfg.pressure.n_min = n_min;
        cfg.pressure.n_max = n_min + span;
        cfg.pressure.r_grid = Some(vec![0.0, tol, 1.5]);
        cfg.signature = signature;
        let text = cfg.to_canonical_json();
        let back = config::parse(&text, "prop").unwrap();
        prop_assert_eq!(back, cfg);
    }
}
