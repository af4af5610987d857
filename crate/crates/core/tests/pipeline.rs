//! Cross-module checks on full runs.

use std::fs;

use qrbm::data::{parse_encoded_csv, read_spec_file, write_encoded_csv};
use qrbm::experiment::{prepare, run, run_prepared, DataSource, ExperimentConfig, Preset};
use qrbm::metrics::evaluate;
use qrbm::qubo::{parse_ising, parse_qubo, qubo_to_ising, rbm_to_qubo, write_ising, write_qubo, BinaryExpansion, ExpansionPlan};
use qrbm::rbm::{read_model, write_model};
use qrbm::sampler::{parse_sample_set, simulated_anneal, write_sample_set, AnnealConfig};

fn small(seed: u64) -> ExperimentConfig {
    let mut cfg = Preset::Classical.config();
    if let DataSource::Synth(p) = &mut cfg.data {
        p.n_rows = 1200;
        p.seed = seed;
    }
    cfg.pipeline.split_seed = seed;
    cfg.pipeline.balance_seed = seed;
    cfg.train.seed = seed;
    cfg.model.n_hidden = 8;
    cfg.train.batch_size = 64;
    cfg.set_epochs(10);
    cfg
}

#[test]
fn train_split_scores_at_least_test_split() {
    let mut wins = 0;
    for seed in 0..10 {
        let cfg = small(seed);
        let data = prepare(&cfg).unwrap();
        let r = run_prepared(&cfg, &data, None).unwrap();
        let model = &r.outcome.model;
        let train = evaluate(model, &data.train.features, &data.train.labels).unwrap();
        let test = evaluate(model, &data.test.features, &data.test.labels).unwrap();
        if train.accuracy >= test.accuracy {
            wins += 1;
        }
    }
    assert!(wins >= 9, "train >= test in only {wins} of 10 runs");
}

#[test]
fn artifacts_round_trip_through_their_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(3);
    let r = run(&cfg, Some(dir.path())).unwrap();

    let mut buf = Vec::new();
    write_model(&r.outcome.model, &mut buf).unwrap();
    assert_eq!(read_model(buf.as_slice()).unwrap(), r.outcome.model);

    let specs = read_spec_file(&dir.path().join("specs.json")).unwrap();
    let data = prepare(&cfg).unwrap();
    let text = write_encoded_csv(&data.test);
    let (x, y, names) = parse_encoded_csv(&text).unwrap();
    assert_eq!((x, y, names), (data.test.features.clone(), data.test.labels.clone(), specs.feature_names.clone()));

    let q = rbm_to_qubo(&r.outcome.model, &ExpansionPlan::uniform(BinaryExpansion::default_gaussian())).unwrap();
    assert_eq!(parse_qubo(&write_qubo(&q)).unwrap(), q);
    let ising = qubo_to_ising(&q);
    assert_eq!(parse_ising(&write_ising(&ising)).unwrap(), ising);
    let set = simulated_anneal(&ising, &AnnealConfig { num_reads: 20, sweeps: 10, ..Default::default() }).unwrap();
    let back = parse_sample_set(&write_sample_set(&set)).unwrap();
    assert_eq!(back, set);
    back.validate_against(&ising).unwrap();

    let manifest = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains(&r.manifest.config_hash));
}
