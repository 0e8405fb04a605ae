//! Discrete memoryless relay networks, coding distributions, and the joint
//! distribution every rate expression is evaluated on.
//!
//! Relays are numbered `1..=n`. The channel kernel is stored as a flat array
//! indexed input-major: the input tuple `(x, x_1..x_n)` selects a slice, and
//! within it the output tuple `(y, y_1..y_n)` is row-major with the rightmost
//! index fastest.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::prob::{ProbTensor, VarId};
use crate::rate::SubsetFunctions;

/// Stochasticity tolerance for kernels and distributions.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Channel law `p(y, y_1..y_n | x, x_1..x_n)` with its alphabets and the
/// compressed alphabet chosen for each relay.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayNetworkSpec {
    n: usize,
    card_x: usize,
    card_y: usize,
    card_xi: Vec<usize>,
    card_yi: Vec<usize>,
    card_yhat: Vec<usize>,
    channel: Vec<f64>,
}

/// Alphabet sizes of a relay network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabets {
    pub x: usize,
    pub y: usize,
    pub x_i: Vec<usize>,
    pub y_i: Vec<usize>,
    pub yhat_i: Vec<usize>,
}

impl Alphabets {
    pub fn point_to_point(x: usize, y: usize) -> Self {
        Self {
            x,
            y,
            x_i: vec![],
            y_i: vec![],
            yhat_i: vec![],
        }
    }

    /// Every relay alphabet set to `k`.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            x: k,
            y: k,
            x_i: vec![k; n],
            y_i: vec![k; n],
            yhat_i: vec![k; n],
        }
    }

    pub fn relays(&self) -> usize {
        self.x_i.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.x_i.len();
        for (what, len) in [("y_i", self.y_i.len()), ("yhat_i", self.yhat_i.len())] {
            if len != n {
                return Err(Error::ShapeMismatch {
                    what: format!("alphabets.{what}"),
                    expected: n,
                    found: len,
                });
            }
        }
        let all = [self.x, self.y]
            .into_iter()
            .chain(self.x_i.iter().copied())
            .chain(self.y_i.iter().copied())
            .chain(self.yhat_i.iter().copied());
        if all.clone().any(|c| c == 0) {
            return Err(Error::Config("alphabet sizes must be at least 1".into()));
        }
        if n > 8 {
            return Err(Error::SizeLimit(format!("{n} relays (at most 8 supported)")));
        }
        Ok(())
    }
}

impl RelayNetworkSpec {
    /// Validates the kernel shape and stochasticity. Slices within
    /// [`STOCHASTIC_TOL`] of 1 are renormalized; anything further is rejected.
    pub fn new(alphabets: Alphabets, mut channel: Vec<f64>) -> Result<Self> {
        alphabets.validate()?;
        let spec = Self {
            n: alphabets.relays(),
            card_x: alphabets.x,
            card_y: alphabets.y,
            card_xi: alphabets.x_i,
            card_yi: alphabets.y_i,
            card_yhat: alphabets.yhat_i,
            channel: vec![],
        };
        let rows = spec.input_count();
        let cols = spec.output_count();
        if channel.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                what: "channel".into(),
                expected: rows * cols,
                found: channel.len(),
            });
        }
        let input_radix = spec.input_radix();
        normalize_rows(&mut channel, cols, "channel", |row| {
            let digits = decode(row, &input_radix);
            describe_input(&digits)
        })?;
        Ok(Self { channel, ..spec })
    }

    /// Builds the kernel from a function of `(inputs, outputs)`, where
    /// `inputs = [x, x_1..x_n]` and `outputs = [y, y_1..y_n]`.
    pub fn from_fn(alphabets: Alphabets, mut law: impl FnMut(&[usize], &[usize]) -> f64) -> Result<Self> {
        alphabets.validate()?;
        let input_radix: Vec<usize> = std::iter::once(alphabets.x).chain(alphabets.x_i.iter().copied()).collect();
        let output_radix: Vec<usize> = std::iter::once(alphabets.y).chain(alphabets.y_i.iter().copied()).collect();
        let rows: usize = input_radix.iter().product();
        let cols: usize = output_radix.iter().product();
        let mut channel = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let inputs = decode(r, &input_radix);
            for c in 0..cols {
                channel.push(law(&inputs, &decode(c, &output_radix)));
            }
        }
        Self::new(alphabets, channel)
    }

    /// Random instance with every kernel row drawn from Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(alphabets: Alphabets, rng: &mut R) -> Result<Self> {
        alphabets.validate()?;
        let rows: usize = alphabets.x * alphabets.x_i.iter().product::<usize>();
        let cols: usize = alphabets.y * alphabets.y_i.iter().product::<usize>();
        let channel = (0..rows).flat_map(|_| random_simplex(rng, cols)).collect();
        Self::new(alphabets, channel)
    }

    pub fn relays(&self) -> usize {
        self.n
    }

    pub fn alphabets(&self) -> Alphabets {
        Alphabets {
            x: self.card_x,
            y: self.card_y,
            x_i: self.card_xi.clone(),
            y_i: self.card_yi.clone(),
            yhat_i: self.card_yhat.clone(),
        }
    }

    pub fn channel(&self) -> &[f64] {
        &self.channel
    }

    /// Number of input tuples `(x, x_1..x_n)`.
    pub fn input_count(&self) -> usize {
        self.card_x * self.card_xi.iter().product::<usize>()
    }

    /// Number of output tuples `(y, y_1..y_n)`.
    pub fn output_count(&self) -> usize {
        self.card_y * self.card_yi.iter().product::<usize>()
    }

    fn input_radix(&self) -> Vec<usize> {
        std::iter::once(self.card_x).chain(self.card_xi.iter().copied()).collect()
    }

    fn output_radix(&self) -> Vec<usize> {
        std::iter::once(self.card_y).chain(self.card_yi.iter().copied()).collect()
    }

    /// Relabels relays: new relay `k + 1` is old relay `perm[k] + 1`.
    pub fn permute_relays(&self, perm: &[usize]) -> Result<Self> {
        check_perm(perm, self.n)?;
        let old = self.alphabets();
        let alphabets = Alphabets {
            x: old.x,
            y: old.y,
            x_i: perm.iter().map(|&p| old.x_i[p]).collect(),
            y_i: perm.iter().map(|&p| old.y_i[p]).collect(),
            yhat_i: perm.iter().map(|&p| old.yhat_i[p]).collect(),
        };
        let old_in = self.input_radix();
        let old_out = self.output_radix();
        let cols = self.output_count();
        Self::from_fn(alphabets, |inputs, outputs| {
            let mut oi = vec![inputs[0]; old_in.len()];
            let mut oo = vec![outputs[0]; old_out.len()];
            for (k, &p) in perm.iter().enumerate() {
                oi[p + 1] = inputs[k + 1];
                oo[p + 1] = outputs[k + 1];
            }
            self.channel[encode(&oi, &old_in) * cols + encode(&oo, &old_out)]
        })
    }
}

/// The free parameters of a compress-and-forward scheme: the source input
/// law, one input law per relay, and one test channel per relay.
///
/// Test channel `q[i]` is a flat row-stochastic matrix with rows indexed by
/// `(x_i, y_i)` (input-major) and columns by `ŷ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingDistribution {
    pub p_x: Vec<f64>,
    pub p_xi: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

impl CodingDistribution {
    pub fn uniform(spec: &RelayNetworkSpec) -> Self {
        let uni = |k: usize| vec![1.0 / k as f64; k];
        Self {
            p_x: uni(spec.card_x),
            p_xi: spec.card_xi.iter().map(|&k| uni(k)).collect(),
            q: (0..spec.n)
                .map(|i| {
                    let rows = spec.card_xi[i] * spec.card_yi[i];
                    (0..rows).flat_map(|_| uni(spec.card_yhat[i])).collect()
                })
                .collect(),
        }
    }

    /// Every block drawn independently from Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(spec: &RelayNetworkSpec, rng: &mut R) -> Self {
        let p_x = random_simplex(rng, spec.card_x);
        let p_xi = spec.card_xi.iter().map(|&k| random_simplex(rng, k)).collect();
        let q = (0..spec.n)
            .map(|i| {
                let rows = spec.card_xi[i] * spec.card_yi[i];
                (0..rows)
                    .flat_map(|_| random_simplex(rng, spec.card_yhat[i]))
                    .collect()
            })
            .collect();
        Self { p_x, p_xi, q }
    }

    /// Test channel of relay `i` (1-based) that forwards `y_i` unchanged.
    /// Requires `|Ŷ_i| = |Y_i|`.
    pub fn identity_test_channel(spec: &RelayNetworkSpec, i: usize) -> Vec<f64> {
        let (cx, cy, ch) = (spec.card_xi[i - 1], spec.card_yi[i - 1], spec.card_yhat[i - 1]);
        assert_eq!(cy, ch, "identity test channel needs |Yhat| = |Y|");
        let mut q = vec![0.0; cx * cy * ch];
        for xi in 0..cx {
            for yi in 0..cy {
                q[(xi * cy + yi) * ch + yi] = 1.0;
            }
        }
        q
    }

    /// Checks shapes and stochasticity against `spec`, returning a copy with
    /// every block renormalized within tolerance.
    pub fn validated(&self, spec: &RelayNetworkSpec) -> Result<Self> {
        let shape = |what: String, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::ShapeMismatch {
                    what,
                    expected,
                    found,
                })
            }
        };
        shape("p_x".into(), spec.card_x, self.p_x.len())?;
        shape("p_x_i".into(), spec.n, self.p_xi.len())?;
        shape("q_i".into(), spec.n, self.q.len())?;
        let mut out = self.clone();
        check_entries(&out.p_x, "p_x")?;
        normalize_rows(&mut out.p_x, spec.card_x, "p_x", |_| "all".into())?;
        for i in 0..spec.n {
            let what = format!("p_x_i[{}]", i + 1);
            shape(what.clone(), spec.card_xi[i], out.p_xi[i].len())?;
            check_entries(&out.p_xi[i], &what)?;
            normalize_rows(&mut out.p_xi[i], spec.card_xi[i], &what, |_| "all".into())?;

            let what = format!("q_i[{}]", i + 1);
            let cols = spec.card_yhat[i];
            let cy = spec.card_yi[i];
            shape(what.clone(), spec.card_xi[i] * cy * cols, out.q[i].len())?;
            check_entries(&out.q[i], &what)?;
            normalize_rows(&mut out.q[i], cols, &what, |row| {
                format!("row {row} (x_{n}={}, y_{n}={})", row / cy, row % cy, n = i + 1)
            })?;
        }
        Ok(out)
    }

    /// Relabels relays consistently with [`RelayNetworkSpec::permute_relays`].
    pub fn permute_relays(&self, perm: &[usize]) -> Result<Self> {
        check_perm(perm, self.p_xi.len())?;
        Ok(Self {
            p_x: self.p_x.clone(),
            p_xi: perm.iter().map(|&p| self.p_xi[p].clone()).collect(),
            q: perm.iter().map(|&p| self.q[p].clone()).collect(),
        })
    }
}

/// A network, a coding distribution, and their joint law over
/// `(X, X_1..X_n, Y, Y_1..Y_n, Ŷ_1..Ŷ_n)`.
#[derive(Debug)]
pub struct JointModel {
    spec: RelayNetworkSpec,
    dist: CodingDistribution,
    joint: ProbTensor,
    pub(crate) tables: OnceLock<SubsetFunctions>,
}

impl Clone for JointModel {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            dist: self.dist.clone(),
            joint: self.joint.clone(),
            tables: OnceLock::new(),
        }
    }
}

/// Realizes `p(x) ∏ p(x_i) · p(y, y_N | x, x_N) · ∏ q_i(ŷ_i | y_i, x_i)`.
pub fn build_joint(spec: &RelayNetworkSpec, dist: &CodingDistribution) -> Result<JointModel> {
    let dist = dist.validated(spec)?;
    let n = spec.n;
    let in_radix = spec.input_radix();
    let out_radix = spec.output_radix();
    let hat_radix = spec.card_yhat.clone();
    let hat_count: usize = hat_radix.iter().product();
    let cols = spec.output_count();

    let mut values = Vec::with_capacity(spec.input_count() * cols * hat_count);
    let mut xs = vec![0usize; n + 1];
    let mut ys = vec![0usize; n + 1];
    let mut hats = vec![0usize; n];
    for row in 0..spec.input_count() {
        decode_into(row, &in_radix, &mut xs);
        let mut w_in = dist.p_x[xs[0]];
        for i in 0..n {
            w_in *= dist.p_xi[i][xs[i + 1]];
        }
        for col in 0..cols {
            decode_into(col, &out_radix, &mut ys);
            let w = w_in * spec.channel[row * cols + col];
            for h in 0..hat_count {
                decode_into(h, &hat_radix, &mut hats);
                let mut v = w;
                for i in 0..n {
                    let q_row = xs[i + 1] * spec.card_yi[i] + ys[i + 1];
                    v *= dist.q[i][q_row * hat_radix[i] + hats[i]];
                }
                values.push(v);
            }
        }
    }

    let joint = ProbTensor::new(canonical_vars(spec), values)?;
    let mass = joint.total_mass();
    if (mass - 1.0).abs() > 1e-11 {
        return Err(Error::NotNormalized { mass });
    }
    Ok(JointModel {
        spec: spec.clone(),
        dist,
        joint,
        tables: OnceLock::new(),
    })
}

fn canonical_vars(spec: &RelayNetworkSpec) -> Vec<VarId> {
    let n = spec.n;
    let mut vars = vec![VarId::source(spec.card_x)];
    vars.extend((1..=n).map(|i| VarId::relay_input(i, spec.card_xi[i - 1])));
    vars.push(VarId::dest(spec.card_y));
    vars.extend((1..=n).map(|i| VarId::relay_output(i, spec.card_yi[i - 1])));
    vars.extend((1..=n).map(|i| VarId::compressed(i, spec.card_yhat[i - 1])));
    vars
}

impl JointModel {
    /// Wraps an arbitrary joint over the canonical variables of `spec`
    /// without checking the compression Markov structure. Used to audit
    /// [`validate_markov`] on hand-built laws.
    pub fn from_parts(spec: RelayNetworkSpec, dist: CodingDistribution, joint: ProbTensor) -> Result<Self> {
        let vars = canonical_vars(&spec);
        if joint.vars() != vars.as_slice() {
            return Err(Error::ShapeMismatch {
                what: "joint variables".into(),
                expected: vars.len(),
                found: joint.vars().len(),
            });
        }
        if !joint.is_normalized() {
            return Err(Error::NotNormalized {
                mass: joint.total_mass(),
            });
        }
        Ok(Self {
            spec,
            dist,
            joint,
            tables: OnceLock::new(),
        })
    }

    pub fn relays(&self) -> usize {
        self.spec.n
    }

    pub fn spec(&self) -> &RelayNetworkSpec {
        &self.spec
    }

    pub fn distribution(&self) -> &CodingDistribution {
        &self.dist
    }

    pub fn joint(&self) -> &ProbTensor {
        &self.joint
    }

    pub fn x(&self) -> VarId {
        VarId::source(self.spec.card_x)
    }

    pub fn y(&self) -> VarId {
        VarId::dest(self.spec.card_y)
    }

    pub fn x_i(&self, i: usize) -> VarId {
        VarId::relay_input(i, self.spec.card_xi[i - 1])
    }

    pub fn y_i(&self, i: usize) -> VarId {
        VarId::relay_output(i, self.spec.card_yi[i - 1])
    }

    pub fn yhat_i(&self, i: usize) -> VarId {
        VarId::compressed(i, self.spec.card_yhat[i - 1])
    }

    /// `X_S` for the relays in bitmask `mask` (bit `i-1` is relay `i`).
    pub fn xs(&self, mask: u32) -> Vec<VarId> {
        self.members(mask).map(|i| self.x_i(i)).collect()
    }

    pub fn ys(&self, mask: u32) -> Vec<VarId> {
        self.members(mask).map(|i| self.y_i(i)).collect()
    }

    pub fn yhats(&self, mask: u32) -> Vec<VarId> {
        self.members(mask).map(|i| self.yhat_i(i)).collect()
    }

    /// Bitmask of all relays.
    pub fn full_mask(&self) -> u32 {
        (1u32 << self.spec.n) - 1
    }

    fn members(&self, mask: u32) -> impl Iterator<Item = usize> {
        (1..=self.spec.n).filter(move |i| mask & (1 << (i - 1)) != 0)
    }
}

/// Per-relay leakage `I(Ŷ_i ; everything else | Y_i, X_i)` in bits.
pub fn validate_markov(model: &JointModel) -> Result<Vec<(usize, f64)>> {
    (1..=model.relays())
        .map(|i| {
            let (yhat, yi, xi) = (model.yhat_i(i), model.y_i(i), model.x_i(i));
            let rest: Vec<VarId> = model
                .joint
                .vars()
                .iter()
                .copied()
                .filter(|v| *v != yhat && *v != yi && *v != xi)
                .collect();
            let leak = model
                .joint
                .conditional_mutual_information(&[yhat], &rest, &[yi, xi])?;
            Ok((i, leak))
        })
        .collect()
}

/// Dirichlet(1) sample on `k` atoms.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn check_entries(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(k) => Err(Error::NonStochastic {
            what: what.into(),
            slice: format!("entry {k}"),
            mass: values[k],
        }),
        None => Ok(()),
    }
}

/// Checks every `cols`-wide row for nonnegativity and unit mass, then
/// rescales each row to sum to exactly the nearest representable 1.
fn normalize_rows(
    values: &mut [f64],
    cols: usize,
    what: &str,
    describe: impl Fn(usize) -> String,
) -> Result<()> {
    let mut worst: Option<(usize, f64)> = None;
    for (r, row) in values.chunks(cols).enumerate() {
        if let Some(k) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonStochastic {
                what: what.into(),
                slice: format!("{} entry {k}", describe(r)),
                mass: row[k],
            });
        }
        let mass: f64 = row.iter().sum();
        let dev = (mass - 1.0).abs();
        if dev > STOCHASTIC_TOL && worst.is_none_or(|(_, m)| dev > (m - 1.0).abs()) {
            worst = Some((r, mass));
        }
    }
    if let Some((r, mass)) = worst {
        return Err(Error::NonStochastic {
            what: what.into(),
            slice: describe(r),
            mass,
        });
    }
    for row in values.chunks_mut(cols) {
        let mass: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(())
}

fn describe_input(digits: &[usize]) -> String {
    let mut parts = vec![format!("x={}", digits[0])];
    parts.extend(digits[1..].iter().enumerate().map(|(k, d)| format!("x_{}={d}", k + 1)));
    format!("input ({})", parts.join(", "))
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::ShapeMismatch {
            what: "relay permutation".into(),
            expected: n,
            found: perm.len(),
        });
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::Config(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Mixed-radix digits of `k`, leftmost digit slowest.
pub(crate) fn decode(k: usize, radix: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radix.len()];
    decode_into(k, radix, &mut digits);
    digits
}

fn decode_into(mut k: usize, radix: &[usize], digits: &mut [usize]) {
    for (d, &r) in digits.iter_mut().zip(radix).rev() {
        *d = k % r;
        k /= r;
    }
}

pub(crate) fn encode(digits: &[usize], radix: &[usize]) -> usize {
    digits.iter().zip(radix).fold(0, |acc, (&d, &r)| acc * r + d)
}
