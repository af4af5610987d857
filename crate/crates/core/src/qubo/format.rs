//! Plain-text coefficient lists for QUBO and Ising problems.
//!
//! QUBO:
//!
//! ```text
//! qrbm-qubo 1
//! n 5
//! offset 0.125
//! layout 2 2                      # optional: n_visible n_hidden
//! var 0 visible 0 0               # one per variable when a layout is present
//! expansion 0 4 -4 0.5333333333333333   # unit bits offset scale, Gaussian units only
//! linear 0 -0.5                   # Q_ii
//! quadratic 0 3 -1.25             # i < j, coefficient Q_ij + Q_ji
//! ```
//!
//! Ising:
//!
//! ```text
//! qrbm-ising 1
//! n 3
//! offset 0.5
//! linear 0 0.25                   # h_i
//! quadratic 0 1 -1                # i < j, J_ij
//! ```
//!
//! `#` starts a comment. Zero coefficients are omitted on output. Every term
//! may appear at most once. Floats use shortest round-trip formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BinaryExpansion, IsingProblem, QuboProblem, QuboVariable, RbmLayout, Role};
use crate::error::{Error, Result};

/// Largest QUBO accepted from a file; the matrix is stored densely.
pub const MAX_DENSE_VARIABLES: usize = 4096;
/// Largest Ising problem accepted from a file.
const MAX_ISING_VARIABLES: usize = 1 << 20;

const QUBO_MAGIC: &str = "qrbm-qubo";
const ISING_MAGIC: &str = "qrbm-ising";

pub fn write_qubo(p: &QuboProblem) -> String {
    let n = p.n();
    let mut out = String::new();
    writeln!(out, "{QUBO_MAGIC} 1").unwrap();
    writeln!(out, "n {n}").unwrap();
    writeln!(out, "offset {:?}", p.constant_offset).unwrap();
    if let Some(layout) = &p.layout {
        writeln!(out, "layout {} {}", layout.n_visible, layout.n_hidden).unwrap();
        for (i, v) in layout.variables.iter().enumerate() {
            writeln!(out, "var {i} {} {} {}", v.role.as_str(), v.unit, v.bit).unwrap();
        }
        for (unit, e) in layout.expansions.iter().enumerate() {
            if let Some(e) = e {
                writeln!(out, "expansion {unit} {} {:?} {:?}", e.bits, e.offset, e.scale).unwrap();
            }
        }
    }
    for i in 0..n {
        let d = p.q[[i, i]];
        if d != 0.0 {
            writeln!(out, "linear {i} {d:?}").unwrap();
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let w = p.q[[i, j]] + p.q[[j, i]];
            if w != 0.0 {
                writeln!(out, "quadratic {i} {j} {w:?}").unwrap();
            }
        }
    }
    out
}

pub fn write_ising(p: &IsingProblem) -> String {
    let mut out = String::new();
    writeln!(out, "{ISING_MAGIC} 1").unwrap();
    writeln!(out, "n {}", p.n()).unwrap();
    writeln!(out, "offset {:?}", p.offset).unwrap();
    for (i, &h) in p.fields.iter().enumerate() {
        if h != 0.0 {
            writeln!(out, "linear {i} {h:?}").unwrap();
        }
    }
    for (&(i, j), &v) in &p.couplings {
        if v != 0.0 {
            writeln!(out, "quadratic {i} {j} {v:?}").unwrap();
        }
    }
    out
}

/// Significant lines with their 1-based numbers, comments stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((k + 1, fields))
    })
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::parse(line, format!("expected a non-negative integer, got {s:?}")))
}

fn parse_f64(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number, got {s:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, "coefficients must be finite"))
    }
}

fn expect_arity(line: usize, fields: &[&str], n: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(Error::parse(line, format!("{:?} expects {} fields, got {}", fields[0], n - 1, fields.len() - 1)))
    }
}

/// Reads the magic line plus `n` and `offset`.
fn header<'a>(
    it: &mut impl Iterator<Item = (usize, Vec<&'a str>)>,
    magic: &str,
    max_n: usize,
) -> Result<(usize, f64)> {
    let (line, f) = it.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if f.len() != 2 || f[0] != magic || f[1] != "1" {
        return Err(Error::parse(line, format!("expected header \"{magic} 1\"")));
    }
    let (line, f) = it.next().ok_or_else(|| Error::parse(line, "missing n"))?;
    if f[0] != "n" {
        return Err(Error::parse(line, "expected \"n <count>\""));
    }
    expect_arity(line, &f, 2)?;
    let n = parse_usize(line, f[1])?;
    if n > max_n {
        return Err(Error::parse(line, format!("n = {n} exceeds the limit of {max_n}")));
    }
    let (line, f) = it.next().ok_or_else(|| Error::parse(line, "missing offset"))?;
    if f[0] != "offset" {
        return Err(Error::parse(line, "expected \"offset <value>\""));
    }
    expect_arity(line, &f, 2)?;
    Ok((n, parse_f64(line, f[1])?))
}

fn parse_role(line: usize, s: &str) -> Result<Role> {
    match s {
        "visible" => Ok(Role::Visible),
        "label" => Ok(Role::Label),
        "hidden" => Ok(Role::Hidden),
        other => Err(Error::parse(line, format!("unknown role {other:?}"))),
    }
}

pub fn parse_qubo(text: &str) -> Result<QuboProblem> {
    let mut it = lines(text).peekable();
    let (n, offset) = header(&mut it, QUBO_MAGIC, MAX_DENSE_VARIABLES)?;
    let mut p = QuboProblem::zeros(n);
    p.constant_offset = offset;

    let mut layout: Option<(usize, usize)> = None;
    let mut variables: BTreeMap<usize, QuboVariable> = BTreeMap::new();
    let mut expansions: BTreeMap<usize, BinaryExpansion> = BTreeMap::new();
    let mut seen_terms = BTreeSet::new();
    let mut last_line = 3;

    for (line, f) in it {
        last_line = line;
        match f[0] {
            "layout" => {
                expect_arity(line, &f, 3)?;
                if layout.is_some() {
                    return Err(Error::parse(line, "duplicate layout line"));
                }
                let nv = parse_usize(line, f[1])?;
                let nh = parse_usize(line, f[2])?;
                if nv > n || nh > n {
                    return Err(Error::parse(line, "layout larger than the problem"));
                }
                layout = Some((nv, nh));
            }
            "var" => {
                expect_arity(line, &f, 5)?;
                let i = parse_usize(line, f[1])?;
                if i >= n {
                    return Err(Error::parse(line, format!("variable index {i} out of range")));
                }
                let bit = u32::try_from(parse_usize(line, f[4])?)
                    .map_err(|_| Error::parse(line, "bit position out of range"))?;
                let var = QuboVariable {
                    role: parse_role(line, f[2])?,
                    unit: parse_usize(line, f[3])?,
                    bit,
                };
                if variables.insert(i, var).is_some() {
                    return Err(Error::parse(line, format!("duplicate var line for {i}")));
                }
            }
            "expansion" => {
                expect_arity(line, &f, 5)?;
                let unit = parse_usize(line, f[1])?;
                let bits = u32::try_from(parse_usize(line, f[2])?)
                    .map_err(|_| Error::parse(line, "bit count out of range"))?;
                let e = BinaryExpansion::new(bits, parse_f64(line, f[3])?, parse_f64(line, f[4])?)
                    .map_err(|e| Error::parse(line, e.to_string()))?;
                if expansions.insert(unit, e).is_some() {
                    return Err(Error::parse(line, format!("duplicate expansion for unit {unit}")));
                }
            }
            "linear" => {
                expect_arity(line, &f, 3)?;
                let i = parse_usize(line, f[1])?;
                if i >= n {
                    return Err(Error::parse(line, format!("variable index {i} out of range")));
                }
                if !seen_terms.insert((i, i)) {
                    return Err(Error::parse(line, format!("duplicate linear term {i}")));
                }
                p.q[[i, i]] = parse_f64(line, f[2])?;
            }
            "quadratic" => {
                expect_arity(line, &f, 4)?;
                let i = parse_usize(line, f[1])?;
                let j = parse_usize(line, f[2])?;
                if i >= j || j >= n {
                    return Err(Error::parse(line, format!("quadratic term ({i}, {j}) needs i < j < n")));
                }
                if !seen_terms.insert((i, j)) {
                    return Err(Error::parse(line, format!("duplicate quadratic term ({i}, {j})")));
                }
                let w = 0.5 * parse_f64(line, f[3])?;
                p.q[[i, j]] = w;
                p.q[[j, i]] = w;
            }
            other => return Err(Error::parse(line, format!("unknown record {other:?}"))),
        }
    }

    match layout {
        Some((n_visible, n_hidden)) => {
            if variables.len() != n {
                return Err(Error::parse(last_line, "layout requires one var line per variable"));
            }
            if let Some(&unit) = expansions.keys().find(|&&u| u >= n_visible) {
                return Err(Error::parse(last_line, format!("expansion for unknown visible unit {unit}")));
            }
            let layout = RbmLayout {
                n_visible,
                n_hidden,
                variables: variables.into_values().collect(),
                expansions: (0..n_visible).map(|u| expansions.get(&u).copied()).collect(),
            };
            layout
                .validate(n)
                .map_err(|e| Error::parse(last_line, e.to_string()))?;
            p.layout = Some(layout);
        }
        None => {
            if !variables.is_empty() || !expansions.is_empty() {
                return Err(Error::parse(last_line, "var/expansion lines require a layout line"));
            }
        }
    }
    p.validate()?;
    Ok(p)
}

pub fn parse_ising(text: &str) -> Result<IsingProblem> {
    let mut it = lines(text);
    let (n, offset) = header(&mut it, ISING_MAGIC, MAX_ISING_VARIABLES)?;
    let mut fields = vec![0.0; n];
    let mut seen_fields = BTreeSet::new();
    let mut couplings = BTreeMap::new();
    let mut seen_couplings = BTreeSet::new();
    for (line, f) in it {
        match f[0] {
            "linear" => {
                expect_arity(line, &f, 3)?;
                let i = parse_usize(line, f[1])?;
                if i >= n {
                    return Err(Error::parse(line, format!("spin index {i} out of range")));
                }
                if !seen_fields.insert(i) {
                    return Err(Error::parse(line, format!("duplicate linear term {i}")));
                }
                fields[i] = parse_f64(line, f[2])?;
            }
            "quadratic" => {
                expect_arity(line, &f, 4)?;
                let i = parse_usize(line, f[1])?;
                let j = parse_usize(line, f[2])?;
                if i >= j || j >= n {
                    return Err(Error::parse(line, format!("quadratic term ({i}, {j}) needs i < j < n")));
                }
                if !seen_couplings.insert((i, j)) {
                    return Err(Error::parse(line, format!("duplicate quadratic term ({i}, {j})")));
                }
                // explicit zeros are dropped so they match the written form
                let v = parse_f64(line, f[3])?;
                if v != 0.0 {
                    couplings.insert((i, j), v);
                }
            }
            other => return Err(Error::parse(line, format!("unknown record {other:?}"))),
        }
    }
    IsingProblem::new(offset, fields, couplings)
}

pub fn write_qubo_file(p: &QuboProblem, path: &Path) -> Result<()> {
    fs::write(path, write_qubo(p)).map_err(|e| Error::io(path, e))
}

pub fn read_qubo_file(path: &Path) -> Result<QuboProblem> {
    parse_qubo(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_ising_file(p: &IsingProblem, path: &Path) -> Result<()> {
    fs::write(path, write_ising(p)).map_err(|e| Error::io(path, e))
}

pub fn read_ising_file(path: &Path) -> Result<IsingProblem> {
    parse_ising(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
