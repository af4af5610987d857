//! Fuzz entry points. Each takes raw bytes, runs one parser and, where the
//! format has a writer, checks that writing and reparsing is lossless.
//! Kept in a library so the checked-in corpus can be replayed by `cargo test`
//! on a stable toolchain.

use qrbm::data::{parse_encoded_csv, parse_spec_file, ColumnConfig, Table};
use qrbm::experiment::{parse_manifest, ExperimentConfig, GridSpec};
use qrbm::metrics::parse_metrics_json;
use qrbm::qubo::{parse_ising, parse_qubo, write_ising, write_qubo};
use qrbm::rbm::{read_model, write_model};
use qrbm::sampler::{parse_sample_set, write_sample_set};
use qrbm::training::{parse_trace_csv, parse_trace_json};

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn model_json(data: &[u8]) {
    if let Ok(m) = read_model(data) {
        let mut buf = Vec::new();
        write_model(&m, &mut buf).expect("model serializes");
        assert_eq!(read_model(buf.as_slice()).expect("written model reparses"), m);
    }
}

pub fn qubo_text(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(q) = parse_qubo(s) {
        assert_eq!(parse_qubo(&write_qubo(&q)).expect("written qubo reparses"), q);
    }
}

pub fn ising_text(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(p) = parse_ising(s) {
        assert_eq!(parse_ising(&write_ising(&p)).expect("written ising reparses"), p);
    }
}

pub fn sample_set(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(set) = parse_sample_set(s) {
        assert_eq!(parse_sample_set(&write_sample_set(&set)).expect("written sample set reparses"), set);
    }
}

pub fn csv_table(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(t) = Table::parse_csv(s) {
        assert_eq!(Table::parse_csv(&t.to_csv()).expect("written table reparses"), t);
    }
}

pub fn column_config(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(c) = ColumnConfig::parse_toml(s) {
        assert_eq!(ColumnConfig::parse_toml(&c.to_toml()).expect("written column config reparses"), c);
    }
}

pub fn spec_file(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = parse_spec_file(s);
    }
}

pub fn encoded_csv(data: &[u8]) {
    if let Some(s) = text(data) {
        if let Ok((x, y, names)) = parse_encoded_csv(s) {
            assert_eq!(x.nrows(), y.len());
            assert_eq!(x.ncols(), names.len());
        }
    }
}

pub fn experiment_config(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(c) = ExperimentConfig::parse_toml(s) {
        assert_eq!(ExperimentConfig::parse_toml(&c.to_toml()).expect("written config reparses"), c);
    }
}

pub fn grid_spec(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = GridSpec::parse_toml(s);
    }
}

pub fn metrics_json(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = parse_metrics_json(s);
    }
}

pub fn trace(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = parse_trace_csv(s);
        let _ = parse_trace_json(s);
    }
}

pub fn manifest(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = parse_manifest(s);
    }
}
