//! Search over coding distributions for a fixed network.
//!
//! The free parameters form a product of probability simplices: `p(x)`,
//! each `p(x_i)`, and every row of every test channel. Each restart runs a
//! coordinate-cyclic projected ascent over these blocks using forward
//! finite differences along simplex tangent directions, halving the step
//! whenever a move would lower the rate. Accepted moves never decrease the
//! objective.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{build_joint, Alphabets, CodingDistribution, JointModel, RelayNetworkSpec};
use crate::rate::{self, RateStatus};

const MAX_HALVINGS: usize = 40;
const MAX_STEP: f64 = 8.0;
const GRID_LIMIT: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Successive decoding of the compression index, then the message.
    Classical,
    /// Joint decoding, single relay.
    Thm1,
    /// Multi-relay, bin rates inside the relay-decodability region.
    Thm2,
    /// Multi-relay, joint decoding of the relay inputs.
    Thm3,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Classical,
        Objective::Thm1,
        Objective::Thm2,
        Objective::Thm3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Classical => "classical",
            Objective::Thm1 => "thm1",
            Objective::Thm2 => "thm2",
            Objective::Thm3 => "thm3",
        }
    }

    /// Rate of `model` under this scheme. Without relays the single-relay
    /// schemes reduce to `I(X;Y)`.
    pub fn evaluate(self, model: &JointModel) -> Result<f64> {
        match (self, model.relays()) {
            (Objective::Classical | Objective::Thm1, 0) => model
                .joint()
                .mutual_information(&[model.x()], &[model.y()]),
            (Objective::Classical, _) => Ok(rate::classical_cf(model)?.rate),
            (Objective::Thm1, _) => rate::thm1_rate(model),
            (Objective::Thm2, _) => Ok(rate::thm2_rate(model)?.rate),
            (Objective::Thm3, _) => Ok(rate::thm3_rate(model)?.rate),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub objective: Objective,
    pub restarts: usize,
    /// Full passes over all blocks per restart.
    pub max_iterations: usize,
    /// A pass improving the rate by less than this ends the restart.
    pub tolerance: f64,
    pub fd_step: f64,
    pub seed: u64,
    /// Exhaustive search with this many points per simplex axis instead of
    /// ascent.
    pub grid_steps: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Thm2,
            restarts: 4,
            max_iterations: 200,
            tolerance: 1e-7,
            fd_step: 1e-5,
            seed: 0,
            grid_steps: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::Config("tolerance and fd_step must be positive".into()));
        }
        if matches!(self.grid_steps, Some(s) if s < 2) {
            return Err(Error::Config("grid needs at least 2 points per axis".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub initial_rate: Option<f64>,
    pub final_rate: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: CodingDistribution,
    pub best_rate: f64,
    pub traces: Vec<RestartTrace>,
    pub seed: u64,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy)]
enum Block {
    Source,
    RelayInput(usize),
    TestChannelRow { relay: usize, row: usize, width: usize },
}

impl Block {
    fn get<'a>(&self, d: &'a CodingDistribution) -> &'a [f64] {
        match *self {
            Block::Source => &d.p_x,
            Block::RelayInput(i) => &d.p_xi[i],
            Block::TestChannelRow { relay, row, width } => &d.q[relay][row * width..(row + 1) * width],
        }
    }

    fn set(&self, d: &mut CodingDistribution, values: &[f64]) {
        match *self {
            Block::Source => d.p_x.copy_from_slice(values),
            Block::RelayInput(i) => d.p_xi[i].copy_from_slice(values),
            Block::TestChannelRow { relay, row, width } => {
                d.q[relay][row * width..(row + 1) * width].copy_from_slice(values)
            }
        }
    }
}

fn blocks(spec: &RelayNetworkSpec) -> Vec<Block> {
    let ab = spec.alphabets();
    let mut out = vec![Block::Source];
    out.extend((0..ab.relays()).map(Block::RelayInput));
    for relay in 0..ab.relays() {
        let width = ab.yhat_i[relay];
        for row in 0..ab.x_i[relay] * ab.y_i[relay] {
            out.push(Block::TestChannelRow { relay, row, width });
        }
    }
    out
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

struct Ascent<'a> {
    spec: &'a RelayNetworkSpec,
    cfg: &'a OptimizerConfig,
    blocks: Vec<Block>,
}

impl Ascent<'_> {
    fn eval(&self, d: &CodingDistribution) -> Result<f64> {
        self.cfg.objective.evaluate(&build_joint(self.spec, d)?)
    }

    fn with_block(&self, d: &CodingDistribution, block: Block, values: &[f64]) -> CodingDistribution {
        let mut out = d.clone();
        block.set(&mut out, values);
        out
    }

    /// Finite-difference directional derivatives toward each vertex,
    /// `p + h(e_j − p)`, which stay on the simplex. Their spread equals the
    /// gradient up to a constant shift, which projection ignores.
    fn tangent_gradient(&self, d: &CodingDistribution, block: Block, rate: f64) -> Result<Vec<f64>> {
        let p = block.get(d);
        let k = p.len();
        let h = self.cfg.fd_step;
        let mut grad = Vec::with_capacity(k);
        for j in 0..k {
            let probe: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(m, &v)| v + h * (if m == j { 1.0 } else { 0.0 } - v))
                .collect();
            let trial = self.with_block(d, block, &probe);
            grad.push((self.eval(&trial)? - rate) / h);
        }
        let mean = grad.iter().sum::<f64>() / k as f64;
        grad.iter_mut().for_each(|g| *g -= mean);
        Ok(grad)
    }

    fn run(&self, restart: usize) -> Result<(CodingDistribution, f64, RestartTrace)> {
        let mut dist = if restart == 0 {
            CodingDistribution::uniform(self.spec)
        } else {
            CodingDistribution::random(self.spec, &mut restart_rng(self.cfg.seed, restart))
        };
        let mut rate = self.eval(&dist)?;
        let initial = rate;
        let mut steps = vec![0.5; self.blocks.len()];
        let mut iterations = 0;
        while iterations < self.cfg.max_iterations {
            let pass_start = rate;
            for (b, &block) in self.blocks.iter().enumerate() {
                if block.get(&dist).len() < 2 {
                    continue;
                }
                let grad = self.tangent_gradient(&dist, block, rate)?;
                if grad.iter().all(|g| g.abs() < 1e-12) {
                    continue;
                }
                let p = block.get(&dist).to_vec();
                let mut step = steps[b];
                for _ in 0..MAX_HALVINGS {
                    let moved: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
                    let cand = self.with_block(&dist, block, &project_simplex(&moved));
                    let r = self.eval(&cand)?;
                    if r >= rate {
                        dist = cand;
                        rate = r;
                        step = (step * 2.0).min(MAX_STEP);
                        break;
                    }
                    step /= 2.0;
                }
                steps[b] = step;
            }
            iterations += 1;
            if rate - pass_start < self.cfg.tolerance {
                break;
            }
        }
        let trace = RestartTrace {
            restart,
            initial_rate: Some(initial),
            final_rate: Some(rate),
            iterations,
            error: None,
        };
        Ok((dist, rate, trace))
    }
}

/// Maximizes the configured rate over coding distributions for `spec`.
///
/// Restart 0 starts from uniform distributions, restart `r ≥ 1` from a
/// Dirichlet(1) draw on stream `r` of the seeded generator, so results do
/// not depend on scheduling. The best restart wins; ties go to the lowest
/// index. A failing restart is recorded in its trace and skipped.
pub fn optimize(spec: &RelayNetworkSpec, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    if let Some(points) = cfg.grid_steps {
        return grid_search(spec, cfg, points);
    }
    let ascent = Ascent {
        spec,
        cfg,
        blocks: blocks(spec),
    };
    let runs: Vec<Result<(CodingDistribution, f64, RestartTrace)>> =
        (0..cfg.restarts).into_par_iter().map(|r| ascent.run(r)).collect();

    let mut best: Option<(CodingDistribution, f64)> = None;
    let mut traces = Vec::with_capacity(runs.len());
    let mut first_error = None;
    for (restart, run) in runs.into_iter().enumerate() {
        match run {
            Ok((dist, rate, trace)) => {
                if best.as_ref().is_none_or(|(_, b)| rate > *b) {
                    best = Some((dist, rate));
                }
                traces.push(trace);
            }
            Err(e) => {
                traces.push(RestartTrace {
                    restart,
                    initial_rate: None,
                    final_rate: None,
                    iterations: 0,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((best, _)) = best else {
        return Err(first_error.expect("no restart succeeded, so one failed"));
    };
    let best_rate = ascent.eval(&best)?;
    Ok(OptimizationResult {
        best,
        best_rate,
        traces,
        seed: cfg.seed,
    })
}

/// Grid points of a `k`-atom simplex with `points` values per axis.
fn simplex_grid(k: usize, points: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(k - 1, left - c, prefix, out);
            prefix.pop();
        }
    }
    let total = points - 1;
    let mut raw = Vec::new();
    rec(k, total, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|v| v as f64 / total as f64).collect())
        .collect()
}

fn grid_search(spec: &RelayNetworkSpec, cfg: &OptimizerConfig, points: usize) -> Result<OptimizationResult> {
    let blocks = blocks(spec);
    let grids: Vec<Vec<Vec<f64>>> = blocks
        .iter()
        .map(|b| simplex_grid(b.get(&CodingDistribution::uniform(spec)).len(), points))
        .collect();
    let total = grids.iter().try_fold(1usize, |acc, g| {
        acc.checked_mul(g.len()).filter(|&t| t <= GRID_LIMIT)
    });
    let Some(total) = total else {
        return Err(Error::SizeLimit(format!(
            "grid search over more than {GRID_LIMIT} distributions"
        )));
    };
    let ascent = Ascent { spec, cfg, blocks };
    let point = |mut k: usize| {
        let mut d = CodingDistribution::uniform(spec);
        for (block, grid) in ascent.blocks.iter().zip(&grids).rev() {
            block.set(&mut d, &grid[k % grid.len()]);
            k /= grid.len();
        }
        d
    };
    let score = |k: usize| ascent.eval(&point(k)).unwrap_or(f64::NEG_INFINITY);
    let (best_rate, best_k) = (0..total)
        .into_par_iter()
        .map(|k| (score(k), k))
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    if best_k == usize::MAX || best_rate == f64::NEG_INFINITY {
        return Err(Error::Internal("no grid point could be evaluated".into()));
    }
    let best = point(best_k);
    let initial = score(0);
    Ok(OptimizationResult {
        best_rate: ascent.eval(&best)?,
        best,
        traces: vec![RestartTrace {
            restart: 0,
            initial_rate: initial.is_finite().then_some(initial),
            final_rate: Some(best_rate),
            iterations: total,
            error: None,
        }],
        seed: cfg.seed,
    })
}

/// Binary symmetric channel `X → Y` with crossover `eps`, no relays.
pub fn bsc(eps: f64) -> Result<RelayNetworkSpec> {
    check_prob(eps)?;
    RelayNetworkSpec::from_fn(Alphabets::point_to_point(2, 2), |i, o| flip(eps, i[0], o[0]))
}

/// Single relay with orthogonal receptions at the destination:
/// `Y = (X ⊕ Z_0, X_1 ⊕ Z_1)`, `Y_1 = X ⊕ Z_2`, with independent
/// Bernoulli flips of the given probabilities and binary `Ŷ_1`.
/// `Y` is encoded as `2·(X ⊕ Z_0) + (X_1 ⊕ Z_1)`.
pub fn orthogonal_relay(z0: f64, z1: f64, z2: f64) -> Result<RelayNetworkSpec> {
    for p in [z0, z1, z2] {
        check_prob(p)?;
    }
    let ab = Alphabets {
        x: 2,
        y: 4,
        x_i: vec![2],
        y_i: vec![2],
        yhat_i: vec![2],
    };
    RelayNetworkSpec::from_fn(ab, |i, o| {
        let (x, x1) = (i[0], i[1]);
        let (direct, relayed, y1) = (o[0] / 2, o[0] % 2, o[1]);
        flip(z0, x, direct) * flip(z1, x1, relayed) * flip(z2, x, y1)
    })
}

fn flip(p: f64, input: usize, output: usize) -> f64 {
    if input == output {
        1.0 - p
    } else {
        p
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("flip probability {p} outside [0, 1]")))
    }
}

/// Built-in parameterized network families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `bsc(param)`.
    Bsc,
    /// `orthogonal_relay(0.1, param, 0.1)`: the relay-to-destination link
    /// noise is swept.
    OrthogonalRelay,
}

impl Family {
    pub fn spec(self, param: f64) -> Result<RelayNetworkSpec> {
        match self {
            Family::Bsc => bsc(param),
            Family::OrthogonalRelay => orthogonal_relay(0.1, param, 0.1),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bsc" => Ok(Family::Bsc),
            "orthogonal-relay" => Ok(Family::OrthogonalRelay),
            _ => Err(Error::Config(format!(
                "unknown family '{s}' (known: bsc, orthogonal-relay)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub classical_rate: Option<f64>,
    pub classical_feasible: Option<bool>,
    pub thm1_rate: Option<f64>,
    pub thm2_rate: Option<f64>,
    pub thm3_rate: Option<f64>,
    pub thm3_status: Option<RateStatus>,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(param: f64, e: Error) -> Self {
        Self {
            param,
            classical_rate: None,
            classical_feasible: None,
            thm1_rate: None,
            thm2_rate: None,
            thm3_rate: None,
            thm3_status: None,
            error: Some(e.to_string()),
        }
    }
}

/// How each sweep point picks its coding distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepMode {
    /// Uniform distributions everywhere.
    Fixed,
    /// Optimize every objective with this configuration (its `objective`
    /// field is ignored), then score each objective at the best of all the
    /// resulting distributions.
    Optimize(OptimizerConfig),
}

/// Evaluates `family` at every parameter, in grid order. A failing point
/// yields a row carrying the error.
pub fn sweep<F>(family: F, params: &[f64], mode: &SweepMode) -> Vec<SweepRow>
where
    F: Fn(f64) -> Result<RelayNetworkSpec> + Sync,
{
    params
        .par_iter()
        .map(|&p| sweep_point(&family, p, mode).unwrap_or_else(|e| SweepRow::failed(p, e)))
        .collect()
}

fn sweep_point<F>(family: &F, param: f64, mode: &SweepMode) -> Result<SweepRow>
where
    F: Fn(f64) -> Result<RelayNetworkSpec>,
{
    let spec = family(param)?;
    let candidates = match mode {
        SweepMode::Fixed => vec![CodingDistribution::uniform(&spec)],
        SweepMode::Optimize(cfg) => Objective::ALL
            .iter()
            .map(|&objective| {
                let cfg = OptimizerConfig {
                    objective,
                    ..cfg.clone()
                };
                optimize(&spec, &cfg).map(|r| r.best)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let models = candidates
        .iter()
        .map(|d| build_joint(&spec, d))
        .collect::<Result<Vec<_>>>()?;

    let single = spec.relays() <= 1;
    let best_of = |objective: Objective| -> Result<(f64, usize)> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, m) in models.iter().enumerate() {
            let r = objective.evaluate(m)?;
            if r > best.0 {
                best = (r, k);
            }
        }
        Ok(best)
    };

    let (classical_rate, classical_feasible, thm1_rate) = if single {
        let (c, k) = best_of(Objective::Classical)?;
        let feasible = match spec.relays() {
            0 => true,
            _ => rate::classical_cf(&models[k])?.feasible,
        };
        (Some(c), Some(feasible), Some(best_of(Objective::Thm1)?.0))
    } else {
        (None, None, None)
    };
    let (thm2, _) = best_of(Objective::Thm2)?;
    let (thm3, k3) = best_of(Objective::Thm3)?;
    Ok(SweepRow {
        param,
        classical_rate,
        classical_feasible,
        thm1_rate,
        thm2_rate: Some(thm2),
        thm3_rate: Some(thm3),
        thm3_status: Some(rate::thm3_rate(&models[k3])?.status),
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_basics() {
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = project_simplex(&[-1.0, 0.4, 0.9]);
        assert!((p[0]).abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-12 && (p[2] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(2, 11).len(), 11);
        assert_eq!(simplex_grid(3, 3).len(), 6);
        for p in simplex_grid(3, 5) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let spec = orthogonal_relay(0.1, 0.0, 0.1).unwrap();
        let cfg = OptimizerConfig {
            objective: Objective::Thm1,
            restarts: 1,
            max_iterations: 0,
            ..Default::default()
        };
        let res = optimize(&spec, &cfg).unwrap();
        let uniform = CodingDistribution::uniform(&spec);
        assert_eq!(res.best, uniform);
        let exact = rate::thm1_rate(&build_joint(&spec, &uniform).unwrap()).unwrap();
        assert_eq!(res.best_rate, exact);
        assert_eq!(res.traces[0].iterations, 0);
    }

    #[test]
    fn config_validation() {
        let spec = bsc(0.1).unwrap();
        for cfg in [
            OptimizerConfig { restarts: 0, ..Default::default() },
            OptimizerConfig { tolerance: 0.0, ..Default::default() },
            OptimizerConfig { grid_steps: Some(1), ..Default::default() },
        ] {
            assert!(matches!(optimize(&spec, &cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn family_names() {
        assert_eq!("bsc".parse::<Family>().unwrap(), Family::Bsc);
        assert!("nope".parse::<Family>().is_err());
        assert_eq!("thm3".parse::<Objective>().unwrap(), Objective::Thm3);
        assert!(bsc(1.5).is_err());
    }
}
