mod common;

use cfrelay::oracle::{subset_functions_direct, thm2_bruteforce};
use cfrelay::rate::{
    self, classical_cf, single_relay_measures, subset_functions, thm1_decodable, thm1_rate, thm2_decodable,
    thm2_rate, thm2_value, thm3_decodable, thm3_rate, thm3_value, RateStatus,
};
use cfrelay::{build_joint, full_report, Alphabets, CodingDistribution, JointModel, RateVector, RelayNetworkSpec, SubsetId};
use common::{config, disconnected_relays, h2, random_binary_model, random_model, rng};
use proptest::prelude::*;
use rand::Rng;

fn ixy(m: &JointModel) -> f64 {
    m.joint().mutual_information(&[m.x()], &[m.y()]).unwrap()
}

fn ceiling(m: &JointModel) -> f64 {
    let full = m.full_mask();
    let mut outs = m.ys(full);
    outs.push(m.y());
    m.joint().conditional_mutual_information(&[m.x()], &outs, &m.xs(full)).unwrap()
}

/// Lifts a single-relay model to two relays by adding a relay whose
/// alphabets all have one symbol.
fn embed_trivial_second_relay(m: &JointModel) -> JointModel {
    let spec = m.spec();
    let ab = spec.alphabets();
    let lifted = Alphabets {
        x: ab.x,
        y: ab.y,
        x_i: vec![ab.x_i[0], 1],
        y_i: vec![ab.y_i[0], 1],
        yhat_i: vec![ab.yhat_i[0], 1],
    };
    let outs = ab.y * ab.y_i[0];
    let channel = spec.channel();
    let spec2 = RelayNetworkSpec::from_fn(lifted, |i, o| {
        channel[(i[0] * ab.x_i[0] + i[1]) * outs + o[0] * ab.y_i[0] + o[1]]
    })
    .unwrap();
    let d = m.distribution();
    let dist2 = CodingDistribution {
        p_x: d.p_x.clone(),
        p_xi: vec![d.p_xi[0].clone(), vec![1.0]],
        q: vec![d.q[0].clone(), vec![1.0]],
    };
    build_joint(&spec2, &dist2).unwrap()
}

proptest! {
    #![proptest_config(config(300))]

    #[test]
    fn successive_decoding_reduction(seed in any::<u64>()) {
        let m = random_model(seed, 1);
        let s = single_relay_measures(&m).unwrap();
        let c = classical_cf(&m).unwrap();
        let t1 = thm1_rate(&m).unwrap();
        if s.i_x1_y >= s.i_y1_yhat_given_x1_y {
            prop_assert!(c.feasible);
            prop_assert!((t1 - s.i_x_yhat_y_given_x1).abs() <= 1e-9);
            prop_assert!((t1 - c.rate).abs() <= 1e-9);
        }
        prop_assert!(t1 + 1e-12 >= c.rate);
    }

    #[test]
    fn multi_relay_rate_reduces_to_single_relay(seed in any::<u64>()) {
        let m = random_model(seed, 1);
        let t2 = thm2_rate(&m).unwrap();
        prop_assert!((t2.rate - thm1_rate(&m).unwrap()).abs() <= 1e-7);
    }

    #[test]
    fn decodability_paths_agree(seed in any::<u64>()) {
        let m = random_model(seed, 1);
        let s = single_relay_measures(&m).unwrap();
        prop_assume!((s.i_x1_y - s.i_y1_yhat_given_x_x1_y).abs() > 1e-6);
        let d = thm2_decodable(&m, SubsetId::singleton(1)).unwrap();
        prop_assert_eq!(d.decodable, thm1_decodable(&m).unwrap());
    }

    #[test]
    fn trivial_extra_relay_changes_nothing(seed in any::<u64>()) {
        let m1 = random_model(seed, 1);
        let m2 = embed_trivial_second_relay(&m1);
        let a = thm2_rate(&m1).unwrap().rate;
        let b = thm2_rate(&m2).unwrap().rate;
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        let a3 = thm3_rate(&m1).unwrap();
        let b3 = thm3_rate(&m2).unwrap();
        prop_assert_eq!(a3.status, b3.status);
        prop_assert!((a3.rate - b3.rate).abs() <= 1e-9);
    }

    #[test]
    fn tables_match_direct_summation(seed in any::<u64>(), n in 0usize..=3) {
        let m = if n < 3 { random_model(seed, n) } else { random_binary_model(seed, n) };
        let t = subset_functions(&m).unwrap();
        let (f, g, h) = subset_functions_direct(&m).unwrap();
        for k in 0..(1usize << n) {
            prop_assert!((t.f.0[k] - f[k]).abs() <= 1e-10);
            prop_assert!((t.g.0[k] - g[k]).abs() <= 1e-10);
            prop_assert!((t.h.0[k] - h[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn relabeling_equivariance(seed in any::<u64>()) {
        let m = random_model(seed, 2);
        let perm = [1, 0];
        let swapped = build_joint(
            &m.spec().permute_relays(&perm).unwrap(),
            &m.distribution().permute_relays(&perm).unwrap(),
        )
        .unwrap();
        let (t, ts) = (subset_functions(&m).unwrap(), subset_functions(&swapped).unwrap());
        for s in SubsetId::all(2) {
            let image = SubsetId(((s.0 & 1) << 1) | ((s.0 >> 1) & 1));
            prop_assert!((t.f[s] - ts.f[image]).abs() <= 1e-9);
            prop_assert!((t.g[s] - ts.g[image]).abs() <= 1e-9);
            prop_assert!((t.h[s] - ts.h[image]).abs() <= 1e-9);
        }
        let (a, b) = (thm2_rate(&m).unwrap(), thm2_rate(&swapped).unwrap());
        prop_assert!((a.rate - b.rate).abs() <= 1e-9);
        let moved = RateVector(vec![a.rates.0[1], a.rates.0[0]]);
        prop_assert!((thm2_value(ts, &moved).max(0.0) - b.rate).abs() <= 1e-9);
        let (a3, b3) = (thm3_rate(&m).unwrap(), thm3_rate(&swapped).unwrap());
        prop_assert_eq!(a3.status, b3.status);
        prop_assert!((a3.rate - b3.rate).abs() <= 1e-9);
    }

    #[test]
    fn rates_respect_ceiling(seed in any::<u64>(), n in 0usize..=2) {
        let m = random_model(seed, n);
        let cap = ceiling(&m);
        let r = full_report(&m, &[]).unwrap();
        prop_assert!((r.measures.ceiling - cap).abs() <= 1e-12);
        let mut rates = vec![r.thm2.rate, r.thm3.rate, r.measures.i_x_y];
        rates.extend(r.classical.map(|c| c.rate));
        rates.extend(r.thm1.map(|t| t.rate));
        for v in rates {
            prop_assert!(v >= 0.0 && v <= cap + 1e-9, "{} above {}", v, cap);
        }
    }

    #[test]
    fn optimum_satisfies_joint_decoding_upper_family(seed in any::<u64>(), n in 1usize..=2) {
        let m = random_model(seed, n);
        let t = subset_functions(&m).unwrap();
        let out = thm2_rate(&m).unwrap();
        let tval = out.raw.unwrap();
        for s in SubsetId::all(n) {
            for s1 in s.submasks() {
                let lhs = tval - out.rates.sum_over(s.minus(s1));
                prop_assert!(lhs <= t.f[s] + t.g[s1] + 1e-9);
            }
        }
    }

    #[test]
    fn achieving_vectors_reproduce_rates(seed in any::<u64>(), n in 1usize..=3) {
        let m = if n < 3 { random_model(seed, n) } else { random_binary_model(seed, n) };
        let t = subset_functions(&m).unwrap();
        let out = thm2_rate(&m).unwrap();
        prop_assert!(out.rates.0.iter().all(|&r| r >= 0.0));
        for s in SubsetId::all(n).filter(|s| !s.is_empty()) {
            prop_assert!(out.rates.sum_over(s) <= t.g[s] + 1e-7);
        }
        prop_assert!((thm2_value(t, &out.rates).max(0.0) - out.rate).abs() <= 1e-7);
        let out3 = thm3_rate(&m).unwrap();
        if out3.status == RateStatus::Optimal {
            prop_assert!((thm3_value(t, &out3.rates).max(0.0) - out3.rate).abs() <= 1e-7);
            prop_assert!(rate::thm3_decodable(&m, SubsetId::full(n), &out3.rates).unwrap());
        } else {
            prop_assert_eq!(out3.rate, 0.0);
        }
    }

    #[test]
    fn joint_decoding_check_matches_enumeration(seed in any::<u64>(), d in 0u32..4) {
        let m = random_model(seed, 2);
        let (_, _, h) = subset_functions_direct(&m).unwrap();
        let mut r = rng(seed ^ 0x5eed);
        let v = RateVector((0..2).map(|_| r.random_range(0.0..1.5)).collect());
        let d = SubsetId(d);
        let mut expected = true;
        for s in 1u32..4 {
            if s & d.0 != 0 {
                let sum: f64 = (0..2).filter(|i| s >> i & 1 == 1).map(|i| v.0[i]).sum();
                expected &= h[s as usize] <= sum + 1e-9;
            }
        }
        prop_assert_eq!(thm3_decodable(&m, d, &v).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn grid_search_brackets_rate(seed in any::<u64>(), n in 1usize..=2) {
        let m = random_binary_model(seed, n);
        let t = subset_functions(&m).unwrap();
        let rate = thm2_rate(&m).unwrap().rate;
        let brute = thm2_bruteforce(&m, 100).unwrap();
        let resolution: f64 = (1..=n).map(|i| t.g[SubsetId::singleton(i)] / 100.0).sum();
        prop_assert!(brute <= rate + 1e-9);
        prop_assert!(rate - brute <= resolution + 1e-9);
    }
}

#[test]
fn single_relay_identity_for_full_set() {
    for seed in 0..50 {
        let m = random_model(seed, 1);
        let t = subset_functions(&m).unwrap();
        let s = single_relay_measures(&m).unwrap();
        let want = s.i_x_yhat_y_given_x1 - s.i_y1_yhat_given_x1_y;
        assert!((t.f[SubsetId::singleton(1)] - want).abs() < 1e-10);
    }
}

#[test]
fn disconnected_constant_relays_collapse() {
    let mut r = rng(3);
    for n in 0..=3 {
        let rows = common::sample_channel(&mut r, 3, 2);
        let spec = disconnected_relays(&rows, n);
        let mut dist = CodingDistribution::uniform(&spec);
        dist.p_x = vec![0.2, 0.5, 0.3];
        for i in 0..n {
            dist.q[i] = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        }
        let m = build_joint(&spec, &dist).unwrap();
        let base = ixy(&m);
        let t = subset_functions(&m).unwrap();
        for s in SubsetId::all(n) {
            assert!((t.f[s] - base).abs() < 1e-12);
            assert!(t.g[s].abs() < 1e-12);
            assert!(t.h[s].abs() < 1e-12);
        }
        let report = full_report(&m, &[SubsetId::full(n)]).unwrap();
        assert!((report.thm2.rate - base).abs() < 1e-9);
        assert!((report.thm3.rate - base).abs() < 1e-9);
        assert!(report.thm2_decoding[0].decodable);
        if n <= 2 {
            assert!((thm2_bruteforce(&m, 20).unwrap() - base).abs() < 1e-12);
        }
        if n <= 1 {
            assert!((report.classical.unwrap().rate - base).abs() < 1e-9);
            assert!((report.thm1.unwrap().rate - base).abs() < 1e-9);
        }
    }
}

/// `Y = 2·(X ⊕ Z) + X_1`, `Y_1 = X`: the relay sees the source perfectly and
/// owns a noiseless bit to the destination.
fn clean_relay() -> RelayNetworkSpec {
    let ab = Alphabets {
        x: 2,
        y: 4,
        x_i: vec![2],
        y_i: vec![2],
        yhat_i: vec![2],
    };
    RelayNetworkSpec::from_fn(ab, |i, o| {
        let direct = if o[0] / 2 == i[0] { 0.9 } else { 0.1 };
        let link = (o[0] % 2 == i[1]) as u8 as f64;
        direct * link * (o[1] == i[0]) as u8 as f64
    })
    .unwrap()
}

/// Relay hears `X` through BSC(0.2); destination sees `X` through BSC(0.1)
/// and never hears the relay.
fn deaf_destination() -> RelayNetworkSpec {
    let ab = Alphabets {
        x: 2,
        y: 2,
        x_i: vec![2],
        y_i: vec![2],
        yhat_i: vec![2],
    };
    RelayNetworkSpec::from_fn(ab, |i, o| {
        let direct = if o[0] == i[0] { 0.9 } else { 0.1 };
        let relay = if o[1] == i[0] { 0.8 } else { 0.2 };
        direct * relay
    })
    .unwrap()
}

fn with_q(spec: &RelayNetworkSpec, q: Vec<f64>) -> JointModel {
    let mut d = CodingDistribution::uniform(spec);
    d.q[0] = q;
    build_joint(spec, &d).unwrap()
}

const IDENTITY_Q: [f64; 8] = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
const CONSTANT_Q: [f64; 8] = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];

#[test]
fn successive_decoding_examples() {
    // Constant compression with a relay the destination cannot hear.
    let m = with_q(&deaf_destination(), CONSTANT_Q.to_vec());
    let c = classical_cf(&m).unwrap();
    assert!(c.feasible);
    assert!((c.rate - (1.0 - h2(0.1))).abs() < 1e-12);

    // Identity compression of a noisy observation the destination cannot
    // receive: I(X_1;Y) = 0 < H(Y_1|Y).
    let m = with_q(&deaf_destination(), IDENTITY_Q.to_vec());
    let s = single_relay_measures(&m).unwrap();
    let y1 = m.y_i(1);
    let h_y1_given_y = m.joint().conditional_entropy(&[y1], &[m.y()]).unwrap();
    assert!(s.i_x1_y.abs() < 1e-12);
    assert!((s.i_y1_yhat_given_x1_y - h_y1_given_y).abs() < 1e-12);
    let c = classical_cf(&m).unwrap();
    assert!(!c.feasible);
    assert_eq!(c.rate, 0.0);
    let want = (s.i_x_yhat_y_given_x1 - h_y1_given_y).max(0.0);
    assert!((thm1_rate(&m).unwrap() - want).abs() < 1e-12);
    assert!(!thm1_decodable(&m).unwrap());

    // Clean relay: the whole source bit gets through.
    let m = with_q(&clean_relay(), IDENTITY_Q.to_vec());
    let c = classical_cf(&m).unwrap();
    let full = m
        .joint()
        .conditional_mutual_information(&[m.x()], &[m.y_i(1), m.y()], &[m.x_i(1)])
        .unwrap();
    assert!(c.feasible);
    assert!((c.rate - full).abs() < 1e-12);
    assert!((c.rate - 1.0).abs() < 1e-12);
}

#[test]
fn joint_decoding_examples() {
    for spec in [deaf_destination(), clean_relay()] {
        let m = with_q(&spec, CONSTANT_Q.to_vec());
        let want = m
            .joint()
            .conditional_mutual_information(&[m.x()], &[m.y()], &[m.x_i(1)])
            .unwrap();
        assert!((thm1_rate(&m).unwrap() - want).abs() < 1e-12);
        assert!(thm1_decodable(&m).unwrap());
    }
    // The destination reads X_1 perfectly, so I(X_1;Y) = 1 bit.
    let m = with_q(&clean_relay(), vec![0.9, 0.1, 0.3, 0.7, 0.6, 0.4, 0.2, 0.8]);
    assert!((single_relay_measures(&m).unwrap().i_x1_y - 1.0).abs() < 1e-12);
    assert!(thm1_decodable(&m).unwrap());
}

#[test]
fn decoding_edge_cases() {
    let m = random_model(11, 2);
    let empty = thm2_decodable(&m, SubsetId::EMPTY).unwrap();
    assert!(empty.decodable);
    assert!((empty.rate_with_decoding - thm2_rate(&m).unwrap().rate).abs() < 1e-12);
    assert!(thm3_decodable(&m, SubsetId::EMPTY, &RateVector::zeros(2)).unwrap());

    let t = subset_functions(&m).unwrap();
    let zero = RateVector::zeros(2);
    for d in 1..4 {
        let d = SubsetId(d);
        let positive = SubsetId::all(2).any(|s| s.intersects(d) && t.h[s] > 1e-9);
        assert_eq!(thm3_decodable(&m, d, &zero).unwrap(), !positive);
    }
}

#[test]
fn single_relay_report_agrees_when_successive_decoding_works() {
    let mut seen = 0;
    for seed in 0..200 {
        let m = random_model(seed, 1);
        let r = full_report(&m, &[]).unwrap();
        let c = r.classical.unwrap();
        if c.feasible {
            seen += 1;
            assert!((c.rate - r.thm1.unwrap().rate).abs() < 1e-7);
            assert!((c.rate - r.thm2.rate).abs() < 1e-7);
        }
    }
    assert!(seen > 10);
}

/// For one relay the joint-decoding LP is feasible iff `g({1}) ≥ h({1})`,
/// with value `min(f(∅), f({1}) + g({1}))`.
#[test]
fn joint_decoding_rate_regression() {
    let pinned = [(5u64, 0.074288447714006), (14, 0.038775944127074), (19, 0.158128344184849)];
    for seed in 1..30u64 {
        let m = random_model(seed, 1);
        let (f, g, h) = subset_functions_direct(&m).unwrap();
        let got = thm3_rate(&m).unwrap();
        if g[1] >= h[1] {
            assert_eq!(got.status, RateStatus::Optimal);
            assert!((got.rate - f[0].min(f[1] + g[1]).max(0.0)).abs() < 1e-9);
        } else {
            assert_eq!(got.status, RateStatus::Infeasible);
            assert_eq!(got.rate, 0.0);
        }
        if let Some(&(_, want)) = pinned.iter().find(|(s, _)| *s == seed) {
            assert!((got.rate - want).abs() < 1e-12, "seed {seed}: {}", got.rate);
        }
    }
}
