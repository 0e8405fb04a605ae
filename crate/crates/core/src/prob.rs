//! Dense joint probability tables over named finite-alphabet variables.
//!
//! A [`ProbTensor`] stores its entries row-major with `vars[0]` varying
//! slowest. All information measures are reported in bits and follow the
//! `0 · log 0 = 0` convention.
//!
//! Summation order is fixed: marginal cells accumulate their contributions in
//! ascending flat index order using pairwise summation, so every measure is
//! bit-reproducible for identical inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass when a measure requires a normalized tensor.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// What a variable stands for in a relay network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Source input `X`.
    SourceInput,
    /// Relay input `X_i`.
    RelayInput,
    /// Destination output `Y`.
    DestOutput,
    /// Relay observation `Y_i`.
    RelayOutput,
    /// Compressed relay observation `Ŷ_i`.
    Compressed,
}

/// A named finite-alphabet random variable.
///
/// Identity is the `(role, index)` pair; the ordering derived from it is the
/// canonical variable order `X, X_1..X_n, Y, Y_1..Y_n, Ŷ_1..Ŷ_n`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VarId {
    role: Role,
    index: u8,
    cardinality: usize,
}

impl VarId {
    fn new(role: Role, index: u8, cardinality: usize) -> Self {
        assert!(cardinality >= 1, "alphabet size must be at least 1");
        Self {
            role,
            index,
            cardinality,
        }
    }

    pub fn source(cardinality: usize) -> Self {
        Self::new(Role::SourceInput, 0, cardinality)
    }

    pub fn dest(cardinality: usize) -> Self {
        Self::new(Role::DestOutput, 0, cardinality)
    }

    /// Input of relay `i` (1-based).
    pub fn relay_input(i: usize, cardinality: usize) -> Self {
        Self::new(Role::RelayInput, relay_index(i), cardinality)
    }

    /// Observation of relay `i` (1-based).
    pub fn relay_output(i: usize, cardinality: usize) -> Self {
        Self::new(Role::RelayOutput, relay_index(i), cardinality)
    }

    /// Compressed observation of relay `i` (1-based).
    pub fn compressed(i: usize, cardinality: usize) -> Self {
        Self::new(Role::Compressed, relay_index(i), cardinality)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Relay index, `None` for `X` and `Y`.
    pub fn index(&self) -> Option<usize> {
        match self.role {
            Role::SourceInput | Role::DestOutput => None,
            _ => Some(self.index as usize),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn name(&self) -> String {
        let stem = match self.role {
            Role::SourceInput | Role::RelayInput => "X",
            Role::DestOutput | Role::RelayOutput => "Y",
            Role::Compressed => "Yhat",
        };
        match self.index() {
            Some(i) => format!("{stem}{i}"),
            None => stem.to_string(),
        }
    }

    fn key(&self) -> (Role, u8) {
        (self.role, self.index)
    }
}

fn relay_index(i: usize) -> u8 {
    assert!((1..=u8::MAX as usize).contains(&i), "relay index {i} out of range");
    i as u8
}

impl PartialEq for VarId {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for VarId {}

impl std::hash::Hash for VarId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for VarId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VarId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Dense nonnegative table over an ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTensor {
    vars: Vec<VarId>,
    values: Vec<f64>,
}

impl ProbTensor {
    /// Builds a tensor, checking shape and that every entry is finite and
    /// nonnegative. Normalization is not required here.
    pub fn new(vars: Vec<VarId>, values: Vec<f64>) -> Result<Self> {
        for (k, v) in vars.iter().enumerate() {
            if vars[..k].contains(v) {
                return Err(Error::DuplicateVariable(v.name()));
            }
        }
        let expected: usize = vars.iter().map(VarId::cardinality).product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "tensor values".into(),
                expected,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidEntry { index, value });
        }
        Ok(Self { vars, values })
    }

    /// Distribution of a single variable.
    pub fn distribution(var: VarId, probs: Vec<f64>) -> Result<Self> {
        Self::new(vec![var], probs)
    }

    pub fn uniform(var: VarId) -> Self {
        let k = var.cardinality();
        Self {
            vars: vec![var],
            values: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(var: VarId, atom: usize) -> Self {
        let mut values = vec![0.0; var.cardinality()];
        values[atom] = 1.0;
        Self {
            vars: vec![var],
            values,
        }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.values)
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= NORMALIZATION_TOL
    }

    fn position(&self, var: &VarId) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::UnknownVariable(var.name()))
    }

    /// Sorted, deduplicated tensor positions of `set`.
    fn positions(&self, set: &[VarId]) -> Result<Vec<usize>> {
        let mut pos = set
            .iter()
            .map(|v| self.position(v))
            .collect::<Result<Vec<_>>>()?;
        pos.sort_unstable();
        pos.dedup();
        Ok(pos)
    }

    fn require_normalized(&self) -> Result<()> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { mass });
        }
        Ok(())
    }

    /// Outer product over the concatenated variable list.
    pub fn tensor_product(&self, other: &ProbTensor) -> Result<ProbTensor> {
        if let Some(shared) = self.vars.iter().find(|v| other.vars.contains(v)) {
            return Err(Error::SharedVariable(shared.name()));
        }
        let mut values = Vec::with_capacity(self.len() * other.len());
        for &a in &self.values {
            values.extend(other.values.iter().map(|&b| a * b));
        }
        let mut vars = self.vars.clone();
        vars.extend_from_slice(&other.vars);
        Ok(ProbTensor { vars, values })
    }

    /// Sums out every variable not in `keep`. The result lists the kept
    /// variables in this tensor's order.
    pub fn marginalize(&self, keep: &[VarId]) -> Result<ProbTensor> {
        let kept = self.positions(keep)?;
        Ok(self.marginalize_positions(&kept))
    }

    fn marginalize_positions(&self, kept: &[usize]) -> ProbTensor {
        let strides = self.strides();
        let summed: Vec<usize> = (0..self.vars.len()).filter(|p| !kept.contains(p)).collect();
        let outer = offsets(kept.iter().map(|&p| (self.vars[p].cardinality(), strides[p])));
        let inner = offsets(summed.iter().map(|&p| (self.vars[p].cardinality(), strides[p])));

        let values = if inner.len() == 1 {
            outer.iter().map(|&o| self.values[o]).collect()
        } else {
            let mut buf = vec![0.0; inner.len()];
            outer
                .iter()
                .map(|&o| {
                    for (slot, &i) in buf.iter_mut().zip(&inner) {
                        *slot = self.values[o + i];
                    }
                    pairwise_sum(&buf)
                })
                .collect()
        };
        ProbTensor {
            vars: kept.iter().map(|&p| self.vars[p]).collect(),
            values,
        }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for k in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.vars[k + 1].cardinality();
        }
        strides
    }

    /// Joint entropy of the variables at `positions`.
    fn entropy_of(&self, positions: &[usize]) -> f64 {
        if positions.is_empty() {
            return 0.0;
        }
        let marginal = self.marginalize_positions(positions);
        let terms: Vec<f64> = marginal
            .values
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .collect();
        pairwise_sum(&terms)
    }

    /// `H(A | B)` in bits.
    pub fn conditional_entropy(&self, a: &[VarId], b: &[VarId]) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        disjoint(self, &pa, &pb)?;
        self.require_normalized()?;
        let joint = union(&pa, &pb);
        let h = self.entropy_of(&joint) - self.entropy_of(&pb);
        Ok(h.max(0.0))
    }

    /// `H(A)` in bits.
    pub fn entropy(&self, a: &[VarId]) -> Result<f64> {
        self.conditional_entropy(a, &[])
    }

    /// `I(A; B | C)` in bits, clamped at zero.
    pub fn conditional_mutual_information(
        &self,
        a: &[VarId],
        b: &[VarId],
        c: &[VarId],
    ) -> Result<f64> {
        let pa = self.positions(a)?;
        let pb = self.positions(b)?;
        let pc = self.positions(c)?;
        disjoint(self, &pa, &pb)?;
        disjoint(self, &pa, &pc)?;
        disjoint(self, &pb, &pc)?;
        self.require_normalized()?;
        let ac = union(&pa, &pc);
        let bc = union(&pb, &pc);
        let abc = union(&ac, &pb);
        let mi = self.entropy_of(&ac) + self.entropy_of(&bc)
            - self.entropy_of(&abc)
            - self.entropy_of(&pc);
        Ok(mi.max(0.0))
    }

    /// `I(A; B)` in bits.
    pub fn mutual_information(&self, a: &[VarId], b: &[VarId]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }
}

fn disjoint(t: &ProbTensor, a: &[usize], b: &[usize]) -> Result<()> {
    match a.iter().find(|p| b.contains(p)) {
        Some(&p) => Err(Error::Overlap(t.vars[p].name())),
        None => Ok(()),
    }
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Flat offsets of every cell of a sub-grid, row-major over `axes`
/// (cardinality, stride) with the first axis slowest. Offsets ascend.
fn offsets(axes: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut out = vec![0usize];
    for (card, stride) in axes {
        out = out
            .iter()
            .flat_map(|&base| (0..card).map(move |k| base + k * stride))
            .collect();
    }
    out
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}
