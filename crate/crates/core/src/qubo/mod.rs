//! QUBO and Ising forms of the RBM energy.
//!
//! The joint state is flattened to binary variables `x = (v, y, h)`: ordinary
//! visible units first (Gaussian units expanded into fixed-point bit groups),
//! then the label block, then the hidden units. The coefficient matrix `Q` is
//! symmetric; the objective is
//!
//! ```text
//! f(x) = Σ_i Q_ii x_i + Σ_{i<j} (Q_ij + Q_ji) x_i x_j + offset
//! ```
//!
//! so a coupling `w` between two variables is stored as `Q_ij = Q_ji = w / 2`.
//!
//! Cross-unit couplings between two units of the same layer are always zero.
//! The one exception is the set of bit-bilinear terms inside a single Gaussian
//! unit: they come from its quadratic self-term and belong to one logical unit.

mod format;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::{Configuration, RbmModel, UnitKind};

pub use format::{
    parse_ising, parse_qubo, read_ising_file, read_qubo_file, write_ising, write_ising_file, write_qubo,
    write_qubo_file, MAX_DENSE_VARIABLES,
};

/// Fixed-point encoding `value ≈ offset + scale · Σ_k 2^k bit_k`, bit 0 least significant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryExpansion {
    pub bits: u32,
    pub offset: f64,
    pub scale: f64,
}

/// Result of [`BinaryExpansion::expand`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedValue {
    pub bits: Vec<u8>,
    /// Set when the input lay outside the representable range and was clamped.
    pub clamped: bool,
}

impl BinaryExpansion {
    pub const MAX_BITS: u32 = 32;

    pub fn new(bits: u32, offset: f64, scale: f64) -> Result<Self> {
        let e = Self { bits, offset, scale };
        e.validate()?;
        Ok(e)
    }

    /// 4 bits over [-4, 4].
    pub fn default_gaussian() -> Self {
        Self {
            bits: 4,
            offset: -4.0,
            scale: 8.0 / 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > Self::MAX_BITS {
            return Err(Error::domain(format!(
                "binary expansion needs 1..={} bits, got {}",
                Self::MAX_BITS,
                self.bits
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) || !self.offset.is_finite() {
            return Err(Error::domain("binary expansion needs a finite offset and a positive scale"));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u64 {
        (1u64 << self.bits) - 1
    }

    /// `[offset, offset + scale·(2^bits - 1)]`.
    pub fn range(&self) -> (f64, f64) {
        (self.offset, self.offset + self.scale * self.max_code() as f64)
    }

    pub fn decode_code(&self, code: u64) -> f64 {
        self.offset + self.scale * code as f64
    }

    /// Nearest code, ties rounded up; out-of-range values clamp to an endpoint.
    pub fn expand(&self, value: f64) -> ExpandedValue {
        let (lo, hi) = self.range();
        let clamped = !(lo..=hi).contains(&value);
        let code = ((value - self.offset) / self.scale + 0.5).floor();
        let code = if code.is_nan() { 0.0 } else { code.clamp(0.0, self.max_code() as f64) } as u64;
        ExpandedValue {
            bits: (0..self.bits).map(|k| ((code >> k) & 1) as u8).collect(),
            clamped,
        }
    }

    pub fn collapse(&self, bits: &[u8]) -> Result<f64> {
        if bits.len() != self.bits as usize {
            return Err(Error::contract(format!(
                "expected {} bits, got {}",
                self.bits,
                bits.len()
            )));
        }
        let mut code = 0u64;
        for (k, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => code |= 1 << k,
                other => return Err(Error::domain(format!("bit {k} has value {other}"))),
            }
        }
        Ok(self.decode_code(code))
    }
}

/// Which part of `x = (v, y, h)` a variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Visible,
    Label,
    Hidden,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Visible => "visible",
            Role::Label => "label",
            Role::Hidden => "hidden",
        }
    }

    fn is_visible_layer(&self) -> bool {
        matches!(self, Role::Visible | Role::Label)
    }
}

/// Where a QUBO variable comes from: unit index within its layer and bit position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuboVariable {
    pub role: Role,
    pub unit: usize,
    pub bit: u32,
}

/// Index bookkeeping that ties a QUBO back to the RBM it was compiled from.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmLayout {
    pub n_visible: usize,
    pub n_hidden: usize,
    pub variables: Vec<QuboVariable>,
    /// Expansion per visible unit, `Some` exactly for Gaussian units.
    pub expansions: Vec<Option<BinaryExpansion>>,
}

impl RbmLayout {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.variables.len() != n {
            return Err(Error::contract(format!(
                "layout lists {} variables, problem has {n}",
                self.variables.len()
            )));
        }
        if self.expansions.len() != self.n_visible {
            return Err(Error::contract("layout expansions do not cover every visible unit"));
        }
        let mut seen_visible: Vec<Vec<bool>> = self
            .expansions
            .iter()
            .map(|e| vec![false; e.map_or(1, |e| e.bits as usize)])
            .collect();
        let mut seen_hidden = vec![false; self.n_hidden];
        for var in &self.variables {
            let slot = match var.role {
                Role::Hidden => {
                    if var.bit != 0 {
                        None
                    } else {
                        seen_hidden.get_mut(var.unit)
                    }
                }
                Role::Visible | Role::Label => seen_visible
                    .get_mut(var.unit)
                    .and_then(|bits| bits.get_mut(var.bit as usize)),
            };
            match slot {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::contract(format!(
                        "layout variable {var:?} is out of range or duplicated"
                    )))
                }
            }
        }
        if seen_hidden.iter().any(|s| !s) || seen_visible.iter().flatten().any(|s| !s) {
            return Err(Error::contract("layout does not cover every unit"));
        }
        Ok(())
    }
}

/// Binary expansions to use when compiling Gaussian units.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExpansionPlan {
    pub default: Option<BinaryExpansion>,
    pub per_unit: BTreeMap<usize, BinaryExpansion>,
}

impl ExpansionPlan {
    pub fn uniform(e: BinaryExpansion) -> Self {
        Self {
            default: Some(e),
            per_unit: BTreeMap::new(),
        }
    }

    /// Plan for Bernoulli-only models.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn for_unit(&self, unit: usize) -> Option<BinaryExpansion> {
        self.per_unit.get(&unit).copied().or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    /// Symmetric `n × n`.
    pub q: Array2<f64>,
    pub constant_offset: f64,
    pub layout: Option<RbmLayout>,
}

impl QuboProblem {
    pub fn new(q: Array2<f64>, constant_offset: f64) -> Result<Self> {
        let p = Self {
            q,
            constant_offset,
            layout: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: Array2::zeros((n, n)),
            constant_offset: 0.0,
            layout: None,
        }
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q.nrows();
        if self.q.ncols() != n {
            return Err(Error::contract("QUBO matrix is not square"));
        }
        if !self.constant_offset.is_finite() || self.q.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("QUBO coefficients must be finite"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.q[[i, j]] != self.q[[j, i]] {
                    return Err(Error::contract(format!("QUBO matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        if let Some(layout) = &self.layout {
            layout.validate(n)?;
        }
        Ok(())
    }

    /// Adds a coupling `w` to the objective for the pair `(i, j)`, `i != j`.
    fn add_coupling(&mut self, i: usize, j: usize, w: f64) {
        debug_assert_ne!(i, j);
        self.q[[i, j]] += 0.5 * w;
        self.q[[j, i]] += 0.5 * w;
    }

    pub fn objective(&self, x: &[u8]) -> Result<f64> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::contract(format!("bit vector has length {}, QUBO has {n}", x.len())));
        }
        if let Some(i) = x.iter().position(|&b| b > 1) {
            return Err(Error::domain(format!("variable {i} is not binary")));
        }
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[u8]) -> f64 {
        let n = self.n();
        let mut total = self.constant_offset;
        for i in 0..n {
            if x[i] == 0 {
                continue;
            }
            total += self.q[[i, i]];
            for j in (i + 1)..n {
                if x[j] == 1 {
                    total += self.q[[i, j]] + self.q[[j, i]];
                }
            }
        }
        total
    }

    /// Maps a bit vector back to an RBM configuration. Requires a layout.
    pub fn decode(&self, x: &[u8]) -> Result<Configuration> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| Error::contract("QUBO has no RBM layout; cannot map samples back to units"))?;
        if x.len() != self.n() {
            return Err(Error::contract(format!("bit vector has length {}, QUBO has {}", x.len(), self.n())));
        }
        let mut visible = vec![0.0; layout.n_visible];
        let mut hidden = vec![0.0; layout.n_hidden];
        let mut codes = vec![0u64; layout.n_visible];
        for (var, &b) in layout.variables.iter().zip(x) {
            if b > 1 {
                return Err(Error::domain("bit vector entries must be 0 or 1"));
            }
            match var.role {
                Role::Hidden => hidden[var.unit] = b as f64,
                Role::Visible | Role::Label => codes[var.unit] |= (b as u64) << var.bit,
            }
        }
        for (i, code) in codes.into_iter().enumerate() {
            visible[i] = match layout.expansions[i] {
                Some(e) => e.decode_code(code),
                None => code as f64,
            };
        }
        Ok(Configuration::new(visible, hidden))
    }

    /// Checks the structural rules of a compiled RBM problem: symmetry, zero
    /// couplings inside a layer (apart from bits of one Gaussian unit), and
    /// biases only on the diagonal.
    pub fn check_structure(&self) -> Result<()> {
        self.validate()?;
        let Some(layout) = &self.layout else {
            return Ok(());
        };
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.q[[i, j]] == 0.0 {
                    continue;
                }
                let (a, b) = (layout.variables[i], layout.variables[j]);
                let same_layer = a.role.is_visible_layer() == b.role.is_visible_layer();
                let same_gaussian_unit =
                    a.role.is_visible_layer() && b.role.is_visible_layer() && a.unit == b.unit;
                if same_layer && !same_gaussian_unit {
                    return Err(Error::contract(format!(
                        "non-zero coupling between same-layer variables {i} ({a:?}) and {j} ({b:?})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Compiles the RBM energy into a QUBO over `x = (v, y, h)`.
pub fn rbm_to_qubo(model: &RbmModel, plan: &ExpansionPlan) -> Result<QuboProblem> {
    model.validate()?;
    let label = model.label_block.map(|b| b.range());
    let is_label = |i: usize| label.as_ref().is_some_and(|r| r.contains(&i));

    let mut expansions = Vec::with_capacity(model.n_visible());
    for (i, kind) in model.kinds.iter().enumerate() {
        expansions.push(match kind {
            UnitKind::Bernoulli => None,
            UnitKind::Gaussian => Some(
                plan.for_unit(i)
                    .ok_or_else(|| Error::contract(format!("no binary expansion for Gaussian unit {i}")))
                    .and_then(|e| e.validate().map(|_| e))?,
            ),
        });
    }

    // variable order: non-label visible, label, hidden
    let mut variables = Vec::new();
    let mut first_var = vec![0usize; model.n_visible()];
    let visible_order = (0..model.n_visible())
        .filter(|&i| !is_label(i))
        .chain((0..model.n_visible()).filter(|&i| is_label(i)));
    for i in visible_order {
        first_var[i] = variables.len();
        let role = if is_label(i) { Role::Label } else { Role::Visible };
        let bits = expansions[i].map_or(1, |e| e.bits);
        variables.extend((0..bits).map(|bit| QuboVariable { role, unit: i, bit }));
    }
    let hidden_base = variables.len();
    variables.extend((0..model.n_hidden()).map(|j| QuboVariable {
        role: Role::Hidden,
        unit: j,
        bit: 0,
    }));

    let mut p = QuboProblem::zeros(variables.len());
    for j in 0..model.n_hidden() {
        let hj = hidden_base + j;
        p.q[[hj, hj]] -= model.hidden_bias[j];
    }
    for i in 0..model.n_visible() {
        let c = model.visible_bias[i];
        let base = first_var[i];
        match expansions[i] {
            None => {
                p.q[[base, base]] -= c;
                for j in 0..model.n_hidden() {
                    p.add_coupling(base, hidden_base + j, -model.weights[[i, j]]);
                }
            }
            Some(e) => {
                // v = o + s·B with B = Σ_k 2^k x_k:
                //   (v - c)²/2 = (o - c)²/2 + (o - c)·s·B + s²·B²/2
                //   -v·W_ij·h_j = -o·W_ij·h_j - s·W_ij·B·h_j
                let (o, s) = (e.offset, e.scale);
                p.constant_offset += 0.5 * (o - c) * (o - c);
                for k in 0..e.bits {
                    let pk = (1u64 << k) as f64;
                    let xk = base + k as usize;
                    p.q[[xk, xk]] += (o - c) * s * pk + 0.5 * s * s * pk * pk;
                    for l in (k + 1)..e.bits {
                        let pl = (1u64 << l) as f64;
                        p.add_coupling(xk, base + l as usize, s * s * pk * pl);
                    }
                }
                for j in 0..model.n_hidden() {
                    let w = model.weights[[i, j]];
                    let hj = hidden_base + j;
                    p.q[[hj, hj]] -= o * w;
                    for k in 0..e.bits {
                        p.add_coupling(base + k as usize, hj, -s * (1u64 << k) as f64 * w);
                    }
                }
            }
        }
    }
    p.layout = Some(RbmLayout {
        n_visible: model.n_visible(),
        n_hidden: model.n_hidden(),
        variables,
        expansions,
    });
    p.validate()?;
    Ok(p)
}

/// `H(s) = C + Σ_i h_i s_i + Σ_{i<j} J_ij s_i s_j` with `s_i ∈ {-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingProblem {
    pub offset: f64,
    pub fields: Vec<f64>,
    /// Upper-triangular couplings keyed by `(i, j)` with `i < j`.
    pub couplings: BTreeMap<(usize, usize), f64>,
}

impl IsingProblem {
    pub fn new(offset: f64, fields: Vec<f64>, couplings: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        let p = Self {
            offset,
            fields,
            couplings,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.fields.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !self.offset.is_finite() || self.fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("Ising coefficients must be finite"));
        }
        for (&(i, j), &v) in &self.couplings {
            if i >= j || j >= n {
                return Err(Error::contract(format!("invalid coupling index ({i}, {j}) for n = {n}")));
            }
            if !v.is_finite() {
                return Err(Error::domain("Ising coefficients must be finite"));
            }
        }
        Ok(())
    }

    pub fn energy(&self, s: &[i8]) -> Result<f64> {
        if s.len() != self.n() {
            return Err(Error::contract(format!("spin vector has length {}, problem has {}", s.len(), self.n())));
        }
        if let Some(i) = s.iter().position(|&x| x != 1 && x != -1) {
            return Err(Error::domain(format!("spin {i} has value {}", s[i])));
        }
        Ok(self.energy_unchecked(s))
    }

    pub(crate) fn energy_unchecked(&self, s: &[i8]) -> f64 {
        let linear: f64 = self.fields.iter().zip(s).map(|(h, &si)| h * si as f64).sum();
        let quadratic: f64 = self
            .couplings
            .iter()
            .map(|(&(i, j), &v)| v * (s[i] * s[j]) as f64)
            .sum();
        self.offset + linear + quadratic
    }

    /// Dense symmetric coupling matrix, row-major `n × n`.
    pub fn dense_couplings(&self) -> Vec<f64> {
        let n = self.n();
        let mut dense = vec![0.0; n * n];
        for (&(i, j), &v) in &self.couplings {
            dense[i * n + j] = v;
            dense[j * n + i] = v;
        }
        dense
    }
}

/// Substitutes `x_i = (1 + s_i) / 2`.
pub fn qubo_to_ising(p: &QuboProblem) -> IsingProblem {
    let n = p.n();
    let mut offset = p.constant_offset;
    let mut fields = vec![0.0; n];
    let mut couplings = BTreeMap::new();
    for i in 0..n {
        let d = p.q[[i, i]];
        offset += 0.5 * d;
        fields[i] += 0.5 * d;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let w = p.q[[i, j]] + p.q[[j, i]];
            if w == 0.0 {
                continue;
            }
            let quarter = 0.25 * w;
            offset += quarter;
            fields[i] += quarter;
            fields[j] += quarter;
            couplings.insert((i, j), quarter);
        }
    }
    IsingProblem {
        offset,
        fields,
        couplings,
    }
}

pub fn spins_to_bits(s: &[i8]) -> Vec<u8> {
    s.iter().map(|&x| u8::from(x > 0)).collect()
}

pub fn bits_to_spins(x: &[u8]) -> Vec<i8> {
    x.iter().map(|&b| if b == 1 { 1 } else { -1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::LabelBlock;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn all_bits(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..1u64 << n).map(move |k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
    }

    /// Reference objective straight from the matrix: xᵀ Q x with x_i² = x_i.
    fn quadratic_form(q: &Array2<f64>, offset: f64, x: &[u8]) -> f64 {
        let n = x.len();
        let mut total = offset;
        for i in 0..n {
            for j in 0..n {
                total += q[[i, j]] * x[i] as f64 * x[j] as f64;
            }
        }
        total
    }

    #[test]
    fn expand_examples() {
        let e = BinaryExpansion::new(2, 0.0, 1.0).unwrap();
        assert_eq!(e.expand(3.0), ExpandedValue { bits: vec![1, 1], clamped: false });
        assert_eq!(e.expand(0.0).bits, vec![0, 0]);
        let e = BinaryExpansion::new(3, 0.0, 0.5).unwrap();
        assert_eq!(e.expand(1.3).bits, vec![1, 1, 0]);
        // round half up
        assert_eq!(e.expand(1.25).bits, vec![1, 1, 0]);
    }

    #[test]
    fn expand_nearest_matches_brute_force() {
        let e = BinaryExpansion::new(3, 0.0, 0.5).unwrap();
        for k in 0..=70 {
            let value = -0.2 + 0.05 * k as f64;
            let best = (0..8u64)
                .min_by(|&a, &b| {
                    let da = (e.decode_code(a) - value).abs();
                    let db = (e.decode_code(b) - value).abs();
                    da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                })
                .unwrap();
            let got = e.expand(value);
            let decoded = e.collapse(&got.bits).unwrap();
            assert!(
                (decoded - e.decode_code(best)).abs() < 1e-12
                    || ((decoded - value).abs() - (e.decode_code(best) - value).abs()).abs() < 1e-12,
                "value {value}"
            );
        }
    }

    #[test]
    fn expand_clamps_and_flags() {
        let e = BinaryExpansion::default_gaussian();
        let hi = e.expand(10.0);
        assert!(hi.clamped);
        assert_eq!(hi.bits, vec![1, 1, 1, 1]);
        let lo = e.expand(-10.0);
        assert!(lo.clamped);
        assert_eq!(lo.bits, vec![0, 0, 0, 0]);
        assert!(!e.expand(4.0).clamped);
        assert_abs_diff_eq!(e.range().1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_validation() {
        assert!(BinaryExpansion::new(0, 0.0, 1.0).is_err());
        assert!(BinaryExpansion::new(2, 0.0, 0.0).is_err());
        assert!(BinaryExpansion::new(2, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn collapse_examples() {
        let e = BinaryExpansion::new(3, -1.5, 0.25).unwrap();
        assert_eq!(e.collapse(&[0, 0, 0]).unwrap(), -1.5);
        let e2 = BinaryExpansion::new(2, 0.0, 1.0).unwrap();
        assert_eq!(e2.collapse(&[1, 1]).unwrap(), 3.0);
        assert!(e2.collapse(&[1]).is_err());
    }

    #[test]
    fn expand_collapse_round_trip_exhaustive() {
        for bits in 1..=10u32 {
            let e = BinaryExpansion::new(bits, -2.0, 0.375).unwrap();
            for code in 0..=e.max_code() {
                let value = e.decode_code(code);
                let x = e.expand(value);
                assert!(!x.clamped);
                assert_eq!(e.collapse(&x.bits).unwrap(), value);
            }
        }
    }

    #[test]
    fn bernoulli_example_compiles_to_energy() {
        let m = RbmModel::from_parts(array![[2.0]], array![0.5], array![0.25], vec![UnitKind::Bernoulli], None)
            .unwrap();
        let p = rbm_to_qubo(&m, &ExpansionPlan::none()).unwrap();
        assert_abs_diff_eq!(p.objective(&[1, 1]).unwrap(), -2.75, epsilon = 1e-12);
        for x in all_bits(2) {
            let cfg = p.decode(&x).unwrap();
            assert_abs_diff_eq!(p.objective(&x).unwrap(), m.energy(&cfg).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_model_compiles_to_zero() {
        let p = rbm_to_qubo(&RbmModel::bernoulli(3, 2), &ExpansionPlan::none()).unwrap();
        assert!(p.q.iter().all(|&x| x == 0.0));
        assert_eq!(p.constant_offset, 0.0);
    }

    #[test]
    fn gaussian_unit_compiles_to_grbm_energy() {
        let m = RbmModel::from_parts(array![[0.7]], array![0.3], array![-0.2], vec![UnitKind::Gaussian], None)
            .unwrap();
        let e = BinaryExpansion::new(2, -1.0, 0.75).unwrap();
        let p = rbm_to_qubo(&m, &ExpansionPlan::uniform(e)).unwrap();
        assert_eq!(p.n(), 3);
        for x in all_bits(3) {
            let cfg = p.decode(&x).unwrap();
            assert_abs_diff_eq!(p.objective(&x).unwrap(), m.energy(&cfg).unwrap(), epsilon = 1e-9);
        }
        p.check_structure().unwrap();
    }

    #[test]
    fn missing_expansion_is_an_error() {
        let m = RbmModel::zeros(vec![UnitKind::Gaussian], 1, None).unwrap();
        assert!(matches!(rbm_to_qubo(&m, &ExpansionPlan::none()), Err(Error::Contract(_))));
    }

    #[test]
    fn label_units_go_between_visible_and_hidden() {
        let kinds = vec![UnitKind::Bernoulli, UnitKind::Bernoulli, UnitKind::Bernoulli, UnitKind::Gaussian];
        let m = RbmModel::zeros(kinds, 2, Some(LabelBlock { start: 1, len: 2 })).unwrap();
        let p = rbm_to_qubo(&m, &ExpansionPlan::uniform(BinaryExpansion::new(2, 0.0, 1.0).unwrap())).unwrap();
        let roles: Vec<_> = p.layout.as_ref().unwrap().variables.iter().map(|v| (v.role, v.unit, v.bit)).collect();
        assert_eq!(
            roles,
            vec![
                (Role::Visible, 0, 0),
                (Role::Visible, 3, 0),
                (Role::Visible, 3, 1),
                (Role::Label, 1, 0),
                (Role::Label, 2, 0),
                (Role::Hidden, 0, 0),
                (Role::Hidden, 1, 0),
            ]
        );
    }

    #[test]
    fn objective_examples() {
        let p = QuboProblem::new(array![[1.0]], 0.0).unwrap();
        assert_eq!(p.objective(&[1]).unwrap(), 1.0);
        let p = QuboProblem::new(array![[1.0, 0.5], [0.5, -2.0]], 0.25).unwrap();
        assert_eq!(p.objective(&[0, 0]).unwrap(), 0.25);
        assert!(p.objective(&[0]).is_err());
        assert!(p.objective(&[0, 2]).is_err());
        assert!(QuboProblem::new(array![[1.0, 0.5], [0.0, -2.0]], 0.0).is_err());
    }

    #[test]
    fn objective_matches_quadratic_form_exhaustively() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(42);
        let n = 10;
        let mut q = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-2.0..2.0);
                q[[i, j]] = v;
                q[[j, i]] = v;
            }
        }
        let p = QuboProblem::new(q.clone(), -0.5).unwrap();
        for x in all_bits(n) {
            assert_abs_diff_eq!(p.objective(&x).unwrap(), quadratic_form(&q, -0.5, &x), epsilon = 1e-12);
        }
    }

    #[test]
    fn ising_examples() {
        let p = QuboProblem::new(array![[1.0]], 0.0).unwrap();
        let ising = qubo_to_ising(&p);
        assert_eq!(ising.offset, 0.5);
        assert_eq!(ising.fields, vec![0.5]);
        assert!(ising.couplings.is_empty());

        let zero = qubo_to_ising(&QuboProblem::zeros(3));
        assert_eq!(zero.offset, 0.0);
        assert_eq!(zero.fields, vec![0.0; 3]);
        assert!(zero.couplings.is_empty());
    }

    #[test]
    fn ising_energy_examples() {
        let flat = IsingProblem::new(1.5, vec![0.0; 3], BTreeMap::new()).unwrap();
        assert_eq!(flat.energy(&[1, -1, 1]).unwrap(), 1.5);
        let ferro = IsingProblem::new(0.0, vec![0.0, 0.0], BTreeMap::from([((0, 1), -1.0)])).unwrap();
        assert_eq!(ferro.energy(&[1, 1]).unwrap(), -1.0);
        assert_eq!(ferro.energy(&[1, -1]).unwrap(), 1.0);
        assert!(matches!(ferro.energy(&[1, 0]), Err(Error::Domain(_))));
        assert!(IsingProblem::new(0.0, vec![0.0], BTreeMap::from([((0, 0), 1.0)])).is_err());
    }

    fn random_qubo(n: usize, values: &[f64]) -> QuboProblem {
        let mut q = Array2::zeros((n, n));
        let mut it = values.iter().cycle();
        for i in 0..n {
            for j in i..n {
                let v = *it.next().unwrap();
                q[[i, j]] = v;
                q[[j, i]] = v;
            }
        }
        QuboProblem::new(q, *it.next().unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn qubo_ising_round_trip(n in 1usize..=8, values in proptest::collection::vec(-3.0f64..3.0, 40)) {
            let p = random_qubo(n, &values);
            let ising = qubo_to_ising(&p);
            for x in all_bits(n) {
                let s = bits_to_spins(&x);
                let diff = (p.objective(&x).unwrap() - ising.energy(&s).unwrap()).abs();
                prop_assert!(diff < 1e-12, "diff {diff}");
            }
        }

        #[test]
        fn global_flip_symmetry_without_fields(n in 2usize..=6, values in proptest::collection::vec(-3.0f64..3.0, 20)) {
            let mut couplings = BTreeMap::new();
            let mut it = values.iter().cycle();
            for i in 0..n {
                for j in (i + 1)..n {
                    couplings.insert((i, j), *it.next().unwrap());
                }
            }
            let p = IsingProblem::new(0.3, vec![0.0; n], couplings).unwrap();
            for x in all_bits(n) {
                let s = bits_to_spins(&x);
                let flipped: Vec<i8> = s.iter().map(|v| -v).collect();
                prop_assert!((p.energy(&s).unwrap() - p.energy(&flipped).unwrap()).abs() < 1e-12);
            }
        }
    }
}
