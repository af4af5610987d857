//! Sample-set files.
//!
//! ```text
//! qrbm-samples 1
//! problem_hash 3f5a...e1          # SHA-256 of the canonical Ising text
//! n 4
//! total_reads 100
//! beta_effective 1.0
//! source simulated-anneal
//! sample +-++ 37 -2.5             # spins, read count, energy
//! sample ---+ 63 0.75
//! ```
//!
//! Records keep their order. Energies use shortest round-trip formatting so a
//! written set reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SampleRecord, SampleSet};
use crate::error::{Error, Result};

const MAGIC: &str = "qrbm-samples";
const MAX_SPINS: usize = 1 << 20;

pub fn write_sample_set(set: &SampleSet) -> String {
    let n = set.n().unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "{MAGIC} 1").unwrap();
    writeln!(out, "problem_hash {}", set.problem_hash).unwrap();
    writeln!(out, "n {n}").unwrap();
    writeln!(out, "total_reads {}", set.total_reads).unwrap();
    writeln!(out, "beta_effective {:?}", set.beta_effective).unwrap();
    writeln!(out, "source {}", set.source).unwrap();
    for r in &set.records {
        let spins: String = r.spins.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect();
        writeln!(out, "sample {spins} {} {:?}", r.read_count, r.energy).unwrap();
    }
    out
}

fn field<'a>(
    it: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, &'a str)> {
    let (line, text) = it
        .next()
        .ok_or_else(|| Error::parse(0, format!("missing {key} line")))?;
    let mut parts = text.splitn(2, char::is_whitespace);
    if parts.next() != Some(key) {
        return Err(Error::parse(line, format!("expected {key:?}")));
    }
    let value = parts.next().map(str::trim).unwrap_or("");
    if value.is_empty() {
        return Err(Error::parse(line, format!("{key} needs a value")));
    }
    Ok((line, value))
}

fn number<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::parse(line, format!("cannot parse {s:?}")))
}

/// Parses a sample-set file. Energies are not checked against any problem
/// here; see [`SampleSet::validate_against`].
pub fn parse_sample_set(text: &str) -> Result<SampleSet> {
    let mut it = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line, magic) = it.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if magic.split_whitespace().collect::<Vec<_>>() != [MAGIC, "1"] {
        return Err(Error::parse(line, format!("expected header \"{MAGIC} 1\"")));
    }
    let (line, hash) = field(&mut it, "problem_hash")?;
    if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::parse(line, "problem_hash must be 64 hex digits"));
    }
    let (line, n) = field(&mut it, "n")?;
    let n: usize = number(line, n)?;
    if n > MAX_SPINS {
        return Err(Error::parse(line, "too many spins"));
    }
    let (line, total) = field(&mut it, "total_reads")?;
    let total_reads: u64 = number(line, total)?;
    let (line, beta) = field(&mut it, "beta_effective")?;
    let beta_effective: f64 = number(line, beta)?;
    if !(beta_effective > 0.0 && beta_effective.is_finite()) {
        return Err(Error::parse(line, "beta_effective must be positive and finite"));
    }
    let (line, source) = field(&mut it, "source")?;
    if source.contains(char::is_whitespace) {
        return Err(Error::parse(line, "source must be a single token"));
    }

    let mut records = Vec::new();
    for (line, text) in it {
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "sample" {
            return Err(Error::parse(line, "expected \"sample <spins> <reads> <energy>\""));
        }
        if parts[1].len() != n {
            return Err(Error::parse(line, format!("expected {n} spins, got {}", parts[1].len())));
        }
        let spins = parts[1]
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::parse(line, format!("invalid spin character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        let read_count: u64 = number(line, parts[2])?;
        let energy: f64 = number(line, parts[3])?;
        if !energy.is_finite() {
            return Err(Error::parse(line, "energy must be finite"));
        }
        records.push(SampleRecord {
            spins,
            read_count,
            energy,
        });
    }
    let set = SampleSet {
        records,
        beta_effective,
        total_reads,
        source: source.to_string(),
        problem_hash: hash.to_ascii_lowercase(),
    };
    set.validate_records(None)?;
    Ok(set)
}

pub fn write_sample_set_file(set: &SampleSet, path: &Path) -> Result<()> {
    fs::write(path, write_sample_set(set)).map_err(|e| Error::io(path, e))
}

pub fn read_sample_set(path: &Path) -> Result<SampleSet> {
    parse_sample_set(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::IsingProblem;
    use crate::sampler::{simulated_anneal, AnnealConfig};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn round_trip_is_bit_identical() {
        let p = IsingProblem::new(
            0.1,
            vec![0.3, -0.1, 0.4, 1.0 / 3.0],
            BTreeMap::from([((0, 1), -0.7), ((1, 2), 0.5), ((2, 3), 0.2)]),
        )
        .unwrap();
        let set = simulated_anneal(
            &p,
            &AnnealConfig {
                num_reads: 300,
                sweeps: 20,
                ..AnnealConfig::default()
            },
        )
        .unwrap();
        let text = write_sample_set(&set);
        let back = parse_sample_set(&text).unwrap();
        assert_eq!(back, set);
        back.validate_against(&p).unwrap();
    }

    #[test]
    fn header_errors() {
        let good = "qrbm-samples 1\nproblem_hash 0000000000000000000000000000000000000000000000000000000000000000\nn 2\ntotal_reads 3\nbeta_effective 1\nsource mock\nsample +- 2 0.5\nsample -- 1 0.25\n";
        parse_sample_set(good).unwrap();
        for (from, to) in [
            ("total_reads 3", "total_reads 4"),
            ("sample +- 2", "sample +- 0"),
            ("sample +-", "sample +0"),
            ("sample +-", "sample +-+"),
            ("n 2", "n x"),
            ("beta_effective 1", "beta_effective -1"),
            ("source mock", "source two words"),
            ("problem_hash 0", "problem_hash z"),
            ("qrbm-samples 1", "qrbm-samples 2"),
        ] {
            assert!(parse_sample_set(&good.replace(from, to)).is_err(), "{to}");
        }
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC{0,300}") {
            let _ = parse_sample_set(&text);
        }
    }
}
