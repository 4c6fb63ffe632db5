use std::sync::Arc;

use prefmpc::core::dataset::{build_pairs, generate_pool, GenConfig};
use prefmpc::core::learner::{train, Theta, TrainConfig};
use prefmpc::core::linsys::default_oscillating_masses;
use prefmpc::core::mpc::{evaluate_campaign, CampaignConfig, CampaignEntry, CampaignResult, Controller, MpcSpec};
use prefmpc::core::rng;
use prefmpc::core::trajectory::settling_time;
use prefmpc::core::PreferenceOracle;
use prefmpc::formats::{
    load_dataset, load_model, parse_versioned, read_json, save_dataset, save_model, DatasetBundle, DatasetFile,
    TrajectoryDoc,
};
use prefmpc::table::{emit_figure_data, Table};
use prefmpc::Error;

fn bundle() -> DatasetBundle {
    let system = default_oscillating_masses();
    let mut config = GenConfig::settling(9);
    config.n_t = 6;
    let pool = Arc::new(generate_pool(&system, &config).unwrap());
    let oracle = PreferenceOracle::Settling { eps: 0.1 };
    let dataset = build_pairs(&pool, 12, &oracle, &mut rng::stream(9, 2, 0), false).unwrap();
    DatasetBundle {
        system,
        config,
        oracle: Some(oracle),
        dataset,
    }
}

#[test]
fn dataset_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    let b = bundle();
    save_dataset(&path, &b).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), b);
}

#[test]
fn model_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let b = bundle();
    let config = TrainConfig {
        adam_iters: 20,
        lbfgs_max_iters: 30,
        ..TrainConfig::default()
    };
    let model = train(&b.dataset, &config, &Theta::identity(6, 2)).unwrap();
    save_model(&path, &model, &config).unwrap();
    let (again, cfg) = load_model(&path).unwrap();
    assert_eq!(again, model);
    assert_eq!(cfg, config);
}

#[test]
fn truncated_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.json");
    save_dataset(&path, &bundle()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    match load_dataset(&path) {
        Err(Error::Parse { line, .. }) => assert!(line > 1),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_version_is_rejected_before_parsing_the_rest() {
    let mut doc: serde_json::Value = serde_json::to_value(DatasetFile::from_bundle(&bundle())).unwrap();
    doc["version"] = 99.into();
    doc["pairs"] = "not a list".into();
    let text = doc.to_string();
    match parse_versioned::<DatasetFile>(&text, 1, None) {
        Err(Error::UnsupportedVersion { found: 99, supported: 1 }) => {}
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn inconsistent_model_matrices_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let b = bundle();
    let config = TrainConfig {
        adam_iters: 5,
        lbfgs_max_iters: 5,
        ..TrainConfig::default()
    };
    let model = train(&b.dataset, &config, &Theta::identity(6, 2)).unwrap();
    save_model(&path, &model, &config).unwrap();
    let mut doc: serde_json::Value = read_json(&path).unwrap();
    doc["Q"][0][0] = 1e6.into();
    std::fs::write(&path, doc.to_string()).unwrap();
    assert!(matches!(load_model(&path), Err(Error::Format(_))));
}

#[test]
fn table_tsv_round_trips() {
    let mut t = Table::new(["name", "value"]);
    t.push(["a", "1.000"]);
    t.push(["b", ">30"]);
    let parsed = Table::from_tsv(&t.to_tsv()).unwrap();
    assert_eq!(parsed, t);
    assert_eq!(parsed.cell("b", "value"), Some(">30"));
}

#[test]
fn empty_campaign_writes_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = CampaignResult {
        rows: vec![],
        runs: vec![],
        metrics: vec![],
        performance_scale: 1.0,
    };
    emit_figure_data(&[], &empty, 30, dir.path()).unwrap();
    for f in ["phi.tsv", "kappa.tsv", "max_input.tsv", "output_norm.tsv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
    }
}

#[test]
fn figure_data_is_recomputable_from_trajectory_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let system = default_oscillating_masses();
    let spec = |s: f64| {
        MpcSpec::new(
            system.clone(),
            10,
            nalgebra::DMatrix::identity(6, 6) * s,
            nalgebra::DMatrix::identity(2, 2),
            None,
        )
        .unwrap()
    };
    let entries = vec![
        CampaignEntry::new("a", Controller::Shared(spec(1.0))),
        CampaignEntry::new("b", Controller::Shared(spec(20.0))),
    ];
    let x0: Vec<_> = (0..3)
        .map(|k| nalgebra::DVector::from_fn(6, |i, _| if i < 3 { 0.5 - 0.2 * (k + i) as f64 } else { 0.0 }))
        .collect();
    let config = CampaignConfig {
        t_sim: 30,
        eps: 0.1,
        performance_weights: None,
        reference: None,
    };
    let campaign = evaluate_campaign(&entries, &x0, &config).unwrap();
    let names = vec!["a".to_string(), "b".to_string()];
    emit_figure_data(&names, &campaign, 30, dir.path()).unwrap();
    assert!(!dir.path().join("phi.tsv").exists());
    let kappa = Table::from_tsv(&std::fs::read_to_string(dir.path().join("kappa.tsv")).unwrap()).unwrap();
    assert_eq!(kappa.header.len(), 3);
    for (e, name) in names.iter().enumerate() {
        let dumps: Vec<TrajectoryDoc> = read_json(&dir.path().join("trajectories").join(format!("{name}.json"))).unwrap();
        assert_eq!(dumps.len(), 3);
        for (s, d) in dumps.iter().enumerate() {
            let k = settling_time(&d.to_trajectory().unwrap(), 0.1).index;
            assert_eq!(kappa.rows[s][e + 1], k.to_string());
        }
    }
}
