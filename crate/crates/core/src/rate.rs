//! Achievable-rate evaluators for compress-and-forward relaying.
//!
//! Single-relay evaluators (`classical_cf`, `thm1_*`) require exactly one
//! relay. The multi-relay evaluators reduce to three per-subset tables
//! computed once per [`JointModel`]:
//!
//! * `f(S) = I(X; Ŷ_N, Y | X_N) − H(Ŷ_S | Ŷ_{S^c}, Y, X_N) + Σ_{i∈S} H(Ŷ_i | Y_i, X_i)`
//! * `g(S) = I(X_S; Y | X_{S^c})`
//! * `h(S) = H(Ŷ_S | Ŷ_{S^c}, Y, X, X_N) − Σ_{i∈S} H(Ŷ_i | Y_i, X_i)`
//!
//! Strict inequalities are evaluated in closed form. Conditions that only
//! decide feasibility or decodability accept a [`CLOSURE_SLACK`] margin;
//! reported rates are suprema and are clamped at zero.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve, LinearProgram, LpStatus};
use crate::network::JointModel;

/// Margin applied to closed feasibility/decodability inequalities.
pub const CLOSURE_SLACK: f64 = 1e-9;

/// A subset of relays as a bitmask: bit `i-1` set means relay `i` is in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetId(pub u32);

impl SubsetId {
    pub const EMPTY: SubsetId = SubsetId(0);

    pub fn full(n: usize) -> Self {
        SubsetId((1u32 << n) - 1)
    }

    pub fn singleton(i: usize) -> Self {
        SubsetId(1 << (i - 1))
    }

    pub fn from_relays(relays: &[usize]) -> Self {
        SubsetId(relays.iter().fold(0, |m, &i| m | 1 << (i - 1)))
    }

    /// Every subset of `{1..n}` in increasing mask order.
    pub fn all(n: usize) -> impl Iterator<Item = SubsetId> {
        (0..1u32 << n).map(SubsetId)
    }

    /// Every subset of `self`, from `self` down to the empty set.
    pub fn submasks(self) -> Submasks {
        Submasks {
            full: self.0,
            next: Some(self.0),
        }
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << (i - 1)) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersects(self, other: SubsetId) -> bool {
        self.0 & other.0 != 0
    }

    pub fn minus(self, other: SubsetId) -> SubsetId {
        SubsetId(self.0 & !other.0)
    }

    pub fn complement(self, n: usize) -> SubsetId {
        SubsetId(!self.0 & Self::full(n).0)
    }

    /// Relay indices (1-based) in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |b| self.0 & (1 << b) != 0).map(|b| b + 1)
    }

    pub fn check(self, n: usize) -> Result<()> {
        if self.0 >> n != 0 {
            return Err(Error::SubsetOutOfRange { mask: self.0, n });
        }
        Ok(())
    }
}

/// Iterator over the submasks of a mask in decreasing order.
pub struct Submasks {
    full: u32,
    next: Option<u32>,
}

impl Iterator for Submasks {
    type Item = SubsetId;

    fn next(&mut self) -> Option<SubsetId> {
        let cur = self.next?;
        self.next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & self.full)
        };
        Some(SubsetId(cur))
    }
}

/// Bin rates `R_1..R_n` in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn zeros(n: usize) -> Self {
        RateVector(vec![0.0; n])
    }

    /// `Σ_{i∈S} R_i`.
    pub fn sum_over(&self, s: SubsetId) -> f64 {
        s.members().map(|i| self.0[i - 1]).sum()
    }
}

/// A real value for every subset of relays, indexed by mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetFunction(pub Vec<f64>);

impl Index<SubsetId> for SubsetFunction {
    type Output = f64;

    fn index(&self, s: SubsetId) -> &f64 {
        &self.0[s.0 as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFunctions {
    pub n: usize,
    pub f: SubsetFunction,
    pub g: SubsetFunction,
    pub h: SubsetFunction,
}

fn compute_subset_functions(model: &JointModel) -> Result<SubsetFunctions> {
    let j = model.joint();
    let n = model.relays();
    let full = model.full_mask();
    let x = model.x();
    let y = model.y();
    let xn = model.xs(full);

    let mut yhat_y = model.yhats(full);
    yhat_y.push(y);
    let base = j.conditional_mutual_information(&[x], &yhat_y, &xn)?;

    let local = (1..=n)
        .map(|i| j.conditional_entropy(&[model.yhat_i(i)], &[model.y_i(i), model.x_i(i)]))
        .collect::<Result<Vec<_>>>()?;

    let size = 1usize << n;
    let (mut f, mut g, mut h) = (vec![0.0; size], vec![0.0; size], vec![0.0; size]);
    for s in SubsetId::all(n) {
        let sc = s.complement(n);
        let local_sum: f64 = s.members().map(|i| local[i - 1]).sum();
        let target = model.yhats(s.0);

        let mut given = model.yhats(sc.0);
        given.push(y);
        given.extend_from_slice(&xn);
        let h_no_x = j.conditional_entropy(&target, &given)?;
        given.push(x);
        let h_with_x = j.conditional_entropy(&target, &given)?;

        let k = s.0 as usize;
        f[k] = base - h_no_x + local_sum;
        g[k] = j.conditional_mutual_information(&model.xs(s.0), &[y], &model.xs(sc.0))?;
        h[k] = h_with_x - local_sum;
    }
    // Exact empty-set conventions.
    f[0] = base;
    g[0] = 0.0;
    h[0] = 0.0;
    Ok(SubsetFunctions {
        n,
        f: SubsetFunction(f),
        g: SubsetFunction(g),
        h: SubsetFunction(h),
    })
}

/// The `f`, `g`, `h` tables of `model`, computed on first use and cached.
pub fn subset_functions(model: &JointModel) -> Result<&SubsetFunctions> {
    if let Some(t) = model.tables.get() {
        return Ok(t);
    }
    let tables = compute_subset_functions(model)?;
    let _ = model.tables.set(tables);
    Ok(model.tables.get().expect("tables just set"))
}

fn require_single_relay(model: &JointModel) -> Result<()> {
    match model.relays() {
        1 => Ok(()),
        found => Err(Error::WrongArity { expected: 1, found }),
    }
}

/// Information terms of the single-relay formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleRelayMeasures {
    /// `I(X_1; Y)`
    pub i_x1_y: f64,
    /// `I(Y_1; Ŷ_1 | X_1, Y)`
    pub i_y1_yhat_given_x1_y: f64,
    /// `I(Y_1; Ŷ_1 | X_1, Y, X)`
    pub i_y1_yhat_given_x_x1_y: f64,
    /// `I(X; Ŷ_1, Y | X_1)`
    pub i_x_yhat_y_given_x1: f64,
}

pub fn single_relay_measures(model: &JointModel) -> Result<SingleRelayMeasures> {
    require_single_relay(model)?;
    let j = model.joint();
    let (x, y, x1, y1, yh) = (model.x(), model.y(), model.x_i(1), model.y_i(1), model.yhat_i(1));
    Ok(SingleRelayMeasures {
        i_x1_y: j.mutual_information(&[x1], &[y])?,
        i_y1_yhat_given_x1_y: j.conditional_mutual_information(&[y1], &[yh], &[x1, y])?,
        i_y1_yhat_given_x_x1_y: j.conditional_mutual_information(&[y1], &[yh], &[x1, y, x])?,
        i_x_yhat_y_given_x1: j.conditional_mutual_information(&[x], &[yh, y], &[x1])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOutcome {
    pub rate: f64,
    pub feasible: bool,
}

/// Successive decoding: the compression index must be recoverable first,
/// `I(X_1;Y) ≥ I(Y_1;Ŷ_1|X_1,Y)`, and then `R = I(X;Ŷ_1,Y|X_1)`.
pub fn classical_cf(model: &JointModel) -> Result<ClassicalOutcome> {
    let m = single_relay_measures(model)?;
    let feasible = m.i_x1_y >= m.i_y1_yhat_given_x1_y - CLOSURE_SLACK;
    Ok(ClassicalOutcome {
        rate: if feasible { m.i_x_yhat_y_given_x1 } else { 0.0 },
        feasible,
    })
}

/// The compression penalty uses the same slack as the successive-decoding
/// condition, so this never falls below [`classical_cf`].
fn thm1_raw(m: &SingleRelayMeasures) -> f64 {
    let excess = m.i_y1_yhat_given_x1_y - m.i_x1_y;
    let penalty = if excess <= CLOSURE_SLACK { 0.0 } else { excess };
    m.i_x_yhat_y_given_x1 - penalty
}

/// `max(0, I(X;Ŷ_1,Y|X_1) − max{0, I(Y_1;Ŷ_1|X_1,Y) − I(X_1;Y)})`.
pub fn thm1_rate(model: &JointModel) -> Result<f64> {
    Ok(thm1_raw(&single_relay_measures(model)?).max(0.0))
}

/// Whether `Ŷ_1` is recoverable by joint decoding with `X`.
pub fn thm1_decodable(model: &JointModel) -> Result<bool> {
    let m = single_relay_measures(model)?;
    Ok(m.i_x1_y >= m.i_y1_yhat_given_x_x1_y - CLOSURE_SLACK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateStatus {
    Optimal,
    Infeasible,
}

impl RateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RateStatus::Optimal => "optimal",
            RateStatus::Infeasible => "infeasible",
        }
    }
}

/// Result of a bin-rate optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRate {
    /// Achievable rate, clamped at zero; zero when infeasible.
    pub rate: f64,
    /// Unclamped LP optimum, absent when infeasible.
    pub raw: Option<f64>,
    /// Achieving bin rates (zeros when infeasible).
    pub rates: RateVector,
    pub status: RateStatus,
}

/// Whether `Ŷ_D` is decodable, with the best message rate that keeps it so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decodability {
    pub set: SubsetId,
    pub decodable: bool,
    pub witness: Option<RateVector>,
    pub rate_with_decoding: f64,
}

/// Message-rate variable `t` followed by `R_1..R_n`.
fn rate_lp(n: usize, t_floor: f64) -> LinearProgram {
    let mut objective = vec![0.0; n + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(n + 1).maximize(objective);
    // t has no sign constraint; any floor below every bound on t will do.
    lp.set_lower_bound(0, t_floor.min(0.0) - 1.0);
    lp
}

fn row(n: usize, t: f64, r_coeff: f64, s: SubsetId) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    v[0] = t;
    for i in s.members() {
        v[i] = r_coeff;
    }
    v
}

pub fn thm2_program(tables: &SubsetFunctions, decode: Option<SubsetId>) -> LinearProgram {
    let n = tables.n;
    let floor = tables.f.0.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lp = rate_lp(n, floor);
    for s in SubsetId::all(n) {
        lp.le(row(n, 1.0, -1.0, s), tables.f[s]);
    }
    for s1 in SubsetId::all(n).skip(1) {
        lp.le(row(n, 0.0, 1.0, s1), tables.g[s1]);
    }
    if let Some(d) = decode {
        for s in SubsetId::all(n).filter(|s| s.intersects(d)) {
            lp.ge(row(n, 0.0, 1.0, s), tables.h[s] - CLOSURE_SLACK);
        }
    }
    lp
}

fn lp_rate(lp: &LinearProgram, n: usize, what: &str) -> Result<LpRate> {
    let out = solve(lp)?;
    match out.status {
        LpStatus::Optimal => {
            let raw = out.value.expect("optimal outcome carries a value");
            Ok(LpRate {
                rate: raw.max(0.0),
                raw: Some(raw),
                rates: RateVector(out.point[1..].iter().map(|r| r.max(0.0)).collect()),
                status: RateStatus::Optimal,
            })
        }
        LpStatus::Infeasible => Ok(LpRate {
            rate: 0.0,
            raw: None,
            rates: RateVector::zeros(n),
            status: RateStatus::Infeasible,
        }),
        LpStatus::Unbounded => Err(Error::Internal(format!("{what} LP reported unbounded"))),
    }
}

/// Best message rate over bin-rate vectors in the relay-decodability
/// polymatroid, `min_S f(S) + Σ_{i∈S} R_i` maximized.
pub fn thm2_rate(model: &JointModel) -> Result<LpRate> {
    let tables = subset_functions(model)?;
    let out = lp_rate(&thm2_program(tables, None), tables.n, "rate")?;
    if out.status != RateStatus::Optimal {
        return Err(Error::Internal("rate LP infeasible despite R = 0 being feasible".into()));
    }
    Ok(out)
}

/// `min_S f(S) + Σ_{i∈S} R_i`, the message rate a given bin-rate vector
/// supports under the subset constraints (unclamped).
pub fn thm2_value(tables: &SubsetFunctions, r: &RateVector) -> f64 {
    SubsetId::all(tables.n)
        .map(|s| tables.f[s] + r.sum_over(s))
        .fold(f64::INFINITY, f64::min)
}

/// Whether `Ŷ_d` can additionally be decoded for some admissible bin-rate
/// vector, and the best message rate compatible with doing so.
pub fn thm2_decodable(model: &JointModel, d: SubsetId) -> Result<Decodability> {
    d.check(model.relays())?;
    let tables = subset_functions(model)?;
    let out = lp_rate(&thm2_program(tables, Some(d)), tables.n, "decoding")?;
    Ok(match out.status {
        RateStatus::Optimal => Decodability {
            set: d,
            decodable: true,
            witness: Some(out.rates),
            rate_with_decoding: out.rate,
        },
        RateStatus::Infeasible => Decodability {
            set: d,
            decodable: false,
            witness: None,
            rate_with_decoding: 0.0,
        },
    })
}

pub fn thm3_program(tables: &SubsetFunctions) -> LinearProgram {
    let n = tables.n;
    let mut floor = f64::INFINITY;
    for s in SubsetId::all(n) {
        for s1 in s.submasks() {
            floor = floor.min(tables.f[s] + tables.g[s1]);
        }
    }
    let mut lp = rate_lp(n, floor);
    for s in SubsetId::all(n) {
        for s1 in s.submasks() {
            let free = s.minus(s1);
            lp.le(row(n, 1.0, -1.0, free), tables.f[s] + tables.g[s1]);
            lp.ge(
                row(n, 0.0, 1.0, free),
                tables.h[s] - tables.g[s1] - CLOSURE_SLACK,
            );
        }
    }
    lp
}

/// Best message rate under joint decoding of the relay inputs, over all
/// pairs `S_1 ⊆ S ⊆ N`. Infeasible when no bin-rate vector satisfies the
/// compression-recovery family.
pub fn thm3_rate(model: &JointModel) -> Result<LpRate> {
    let tables = subset_functions(model)?;
    lp_rate(&thm3_program(tables), tables.n, "joint-decoding rate")
}

/// `min_{S_1⊆S} f(S) + Σ_{i∈S∖S_1} R_i + g(S_1)` (unclamped).
pub fn thm3_value(tables: &SubsetFunctions, r: &RateVector) -> f64 {
    let mut best = f64::INFINITY;
    for s in SubsetId::all(tables.n) {
        for s1 in s.submasks() {
            best = best.min(tables.f[s] + r.sum_over(s.minus(s1)) + tables.g[s1]);
        }
    }
    best
}

/// Whether `Ŷ_d` is decodable for the caller's bin-rate vector `r`.
pub fn thm3_decodable(model: &JointModel, d: SubsetId, r: &RateVector) -> Result<bool> {
    let n = model.relays();
    d.check(n)?;
    if r.0.len() != n {
        return Err(Error::RateVectorLength {
            expected: n,
            found: r.0.len(),
        });
    }
    if let Some(bad) = r.0.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Config(format!("bin rates must be nonnegative, got {bad}")));
    }
    let tables = subset_functions(model)?;
    Ok(SubsetId::all(n)
        .filter(|s| s.intersects(d))
        .all(|s| tables.h[s] <= r.sum_over(s) + CLOSURE_SLACK))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm1Outcome {
    pub rate: f64,
    pub raw: f64,
    pub decodable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm3Decoding {
    pub set: SubsetId,
    /// Verdict against the achieving vector; absent when the rate LP is
    /// infeasible.
    pub decodable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    /// `I(X; Y)`
    pub i_x_y: f64,
    /// `I(X; Ŷ_N, Y | X_N)`
    pub i_x_yhat_y_given_xn: f64,
    /// `I(X; Y, Y_N | X_N)`, the data-processing ceiling on every rate.
    pub ceiling: f64,
    pub single_relay: Option<SingleRelayMeasures>,
}

/// Every evaluator applied to one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub relays: usize,
    pub measures: Measures,
    pub subset_functions: SubsetFunctions,
    /// Present for one relay, and for none (where it is `I(X;Y)`).
    pub classical: Option<ClassicalOutcome>,
    pub thm1: Option<Thm1Outcome>,
    pub thm2: LpRate,
    pub thm2_decoding: Vec<Decodability>,
    pub thm3: LpRate,
    pub thm3_decoding: Vec<Thm3Decoding>,
}

pub fn full_report(model: &JointModel, decode_sets: &[SubsetId]) -> Result<RateReport> {
    let n = model.relays();
    for d in decode_sets {
        d.check(n)?;
    }
    let j = model.joint();
    let full = model.full_mask();
    let xn = model.xs(full);
    let mut outputs = vec![model.y()];
    outputs.extend(model.ys(full));
    let tables = subset_functions(model)?.clone();
    let measures = Measures {
        i_x_y: j.mutual_information(&[model.x()], &[model.y()])?,
        i_x_yhat_y_given_xn: tables.f[SubsetId::EMPTY],
        ceiling: j.conditional_mutual_information(&[model.x()], &outputs, &xn)?,
        single_relay: if n == 1 {
            Some(single_relay_measures(model)?)
        } else {
            None
        },
    };

    let (classical, thm1) = match n {
        0 => {
            let r = measures.i_x_y;
            (
                Some(ClassicalOutcome {
                    rate: r,
                    feasible: true,
                }),
                Some(Thm1Outcome {
                    rate: r,
                    raw: r,
                    decodable: true,
                }),
            )
        }
        1 => {
            let m = measures.single_relay.expect("single-relay measures present");
            let raw = thm1_raw(&m);
            (
                Some(classical_cf(model)?),
                Some(Thm1Outcome {
                    rate: raw.max(0.0),
                    raw,
                    decodable: thm1_decodable(model)?,
                }),
            )
        }
        _ => (None, None),
    };

    let thm2 = thm2_rate(model)?;
    let thm2_decoding = decode_sets
        .iter()
        .map(|&d| thm2_decodable(model, d))
        .collect::<Result<Vec<_>>>()?;
    let thm3 = thm3_rate(model)?;
    let thm3_decoding = decode_sets
        .iter()
        .map(|&d| {
            Ok(Thm3Decoding {
                set: d,
                decodable: match thm3.status {
                    RateStatus::Optimal => Some(thm3_decodable(model, d, &thm3.rates)?),
                    RateStatus::Infeasible => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RateReport {
        relays: n,
        measures,
        subset_functions: tables,
        classical,
        thm1,
        thm2,
        thm2_decoding,
        thm3,
        thm3_decoding,
    })
}
