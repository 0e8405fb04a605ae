#![allow(dead_code)]

use cfrelay::lp::LinearProgram;
use cfrelay::network::random_simplex;
use cfrelay::{build_joint, Alphabets, CodingDistribution, JointModel, ProbTensor, RelayNetworkSpec, VarId};
use proptest::test_runner::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random alphabets with every cardinality in {2, 3}.
pub fn random_alphabets(rng: &mut ChaCha8Rng, n: usize) -> Alphabets {
    let mut card = || rng.random_range(2..=3);
    Alphabets {
        x: card(),
        y: card(),
        x_i: (0..n).map(|_| card()).collect(),
        y_i: (0..n).map(|_| card()).collect(),
        yhat_i: (0..n).map(|_| card()).collect(),
    }
}

/// Dirichlet(1) channel and coding distribution on random binary/ternary
/// alphabets.
pub fn random_model(seed: u64, n: usize) -> JointModel {
    let mut rng = rng(seed);
    let ab = random_alphabets(&mut rng, n);
    let spec = RelayNetworkSpec::random(ab, &mut rng).unwrap();
    let dist = CodingDistribution::random(&spec, &mut rng);
    build_joint(&spec, &dist).unwrap()
}

/// Same as [`random_model`] with every alphabet binary.
pub fn random_binary_model(seed: u64, n: usize) -> JointModel {
    let mut rng = rng(seed);
    let spec = RelayNetworkSpec::random(Alphabets::uniform(n, 2), &mut rng).unwrap();
    let dist = CodingDistribution::random(&spec, &mut rng);
    build_joint(&spec, &dist).unwrap()
}

/// A random joint distribution over `k` variables of cardinality 2..=3.
pub fn random_tensor(seed: u64, k: usize) -> (ProbTensor, Vec<VarId>) {
    let mut rng = rng(seed);
    let vars: Vec<VarId> = (0..k)
        .map(|i| {
            let c = rng.random_range(2..=3);
            match i {
                0 => VarId::source(c),
                1 => VarId::dest(c),
                _ => VarId::relay_output(i - 1, c),
            }
        })
        .collect();
    let size = vars.iter().map(|v| v.cardinality()).product();
    let mut values = random_simplex(&mut rng, size);
    // Exact zeros exercise the 0·log 0 convention.
    for v in values.iter_mut() {
        if rng.random_bool(0.15) {
            *v = 0.0;
        }
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        values[0] = 1.0;
    } else {
        values.iter_mut().for_each(|v| *v /= total);
    }
    (ProbTensor::new(vars.clone(), values).unwrap(), vars)
}

/// Channel for `n` relays where the relays neither hear the source nor
/// reach the destination: `p(y|x)` times independent uniform relay outputs.
pub fn disconnected_relays(p_y_given_x: &[Vec<f64>], n: usize) -> RelayNetworkSpec {
    let (cx, cy) = (p_y_given_x.len(), p_y_given_x[0].len());
    let ab = Alphabets {
        x: cx,
        y: cy,
        x_i: vec![2; n],
        y_i: vec![2; n],
        yhat_i: vec![2; n],
    };
    let scale = 0.5f64.powi(n as i32);
    RelayNetworkSpec::from_fn(ab, |i, o| p_y_given_x[i[0]][o[0]] * scale).unwrap()
}

pub fn h2(p: f64) -> f64 {
    cfrelay::prob::binary_entropy(p)
}

/// Random `p(y|x)` rows.
pub fn sample_channel(rng: &mut ChaCha8Rng, cx: usize, cy: usize) -> Vec<Vec<f64>> {
    (0..cx).map(|_| random_simplex(rng, cy)).collect()
}

/// Proptest settings without on-disk failure persistence.
pub fn config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

/// Random LP with small integer data, up to 4 variables and 12 rows.
/// With `boxed`, every variable also gets `x_j ≤ 10`.
pub fn random_lp(r: &mut ChaCha8Rng, boxed: bool) -> LinearProgram {
    let n = r.random_range(1..=4);
    let rows = r.random_range(1..=if boxed { 12 - n } else { 12 });
    let objective = (0..n).map(|_| r.random_range(-3..=3) as f64).collect();
    let mut lp = LinearProgram::new(n).maximize(objective);
    for j in 0..n {
        if r.random_bool(0.2) {
            lp.set_lower_bound(j, -(r.random_range(1..=3) as f64));
        }
    }
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n).map(|_| r.random_range(-5..=5) as f64).collect();
        let rhs = r.random_range(-2..=10) as f64;
        if r.random_bool(0.25) {
            lp.ge(coeffs, rhs);
        } else {
            lp.le(coeffs, rhs);
        }
    }
    if boxed {
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lp.le(e, 10.0);
        }
    }
    lp
}
