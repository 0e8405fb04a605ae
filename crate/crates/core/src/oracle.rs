//! Deliberately naive reference computations for cross-checking.
//!
//! Nothing here calls into the tensor measures, the rate evaluators, or the
//! simplex solver. Information measures are summed directly from the
//! definition over ordered maps; LPs are solved by enumerating
//! vertices; the bin-rate optimization is a grid search.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, LpStatus, Relation};
use crate::network::JointModel;
use crate::prob::{ProbTensor, VarId};

type Key = Vec<usize>;

fn axis_of(t: &ProbTensor, v: &VarId) -> Result<usize> {
    for (k, w) in t.vars().iter().enumerate() {
        if w == v {
            return Ok(k);
        }
    }
    Err(Error::UnknownVariable(v.name()))
}

fn axes(t: &ProbTensor, set: &[VarId]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for v in set {
        let k = axis_of(t, v)?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

fn check_disjoint(t: &ProbTensor, sets: &[&[usize]]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(k) = a.iter().find(|k| b.contains(k)) {
                return Err(Error::Overlap(t.vars()[*k].name()));
            }
        }
    }
    Ok(())
}

/// Every flat entry with its full index tuple.
fn cells(t: &ProbTensor) -> Vec<(Vec<usize>, f64)> {
    let cards: Vec<usize> = t.vars().iter().map(|v| v.cardinality()).collect();
    let mut idx = vec![0usize; cards.len()];
    let mut out = Vec::with_capacity(t.len());
    for &p in t.values() {
        out.push((idx.clone(), p));
        for k in (0..cards.len()).rev() {
            idx[k] += 1;
            if idx[k] < cards[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

fn project(idx: &[usize], axes: &[usize]) -> Key {
    axes.iter().map(|&a| idx[a]).collect()
}

fn check_mass(t: &ProbTensor) -> Result<()> {
    let mut mass = 0.0;
    for &p in t.values() {
        mass += p;
    }
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { mass });
    }
    Ok(())
}

/// `I(A;B|C) = Σ p(a,b,c) log₂ [p(a,b|c) / (p(a|c) p(b|c))]` by direct
/// summation over the support.
pub fn mi_direct(t: &ProbTensor, a: &[VarId], b: &[VarId], c: &[VarId]) -> Result<f64> {
    let (aa, ba, ca) = (axes(t, a)?, axes(t, b)?, axes(t, c)?);
    check_disjoint(t, &[&aa, &ba, &ca])?;
    check_mass(t)?;

    let mut p_abc: BTreeMap<(Key, Key, Key), f64> = BTreeMap::new();
    let mut p_ac: BTreeMap<(Key, Key), f64> = BTreeMap::new();
    let mut p_bc: BTreeMap<(Key, Key), f64> = BTreeMap::new();
    let mut p_c: BTreeMap<Key, f64> = BTreeMap::new();
    for (idx, p) in cells(t) {
        let (ka, kb, kc) = (project(&idx, &aa), project(&idx, &ba), project(&idx, &ca));
        *p_abc.entry((ka.clone(), kb.clone(), kc.clone())).or_default() += p;
        *p_ac.entry((ka, kc.clone())).or_default() += p;
        *p_bc.entry((kb, kc.clone())).or_default() += p;
        *p_c.entry(kc).or_default() += p;
    }
    let mut total = 0.0;
    for ((ka, kb, kc), p) in &p_abc {
        if *p <= 0.0 {
            continue;
        }
        let pc = p_c[kc];
        let pac = p_ac[&(ka.clone(), kc.clone())];
        let pbc = p_bc[&(kb.clone(), kc.clone())];
        total += p * ((p * pc) / (pac * pbc)).log2();
    }
    Ok(total)
}

/// `H(A|B) = −Σ p(a,b) log₂ p(a|b)` by direct summation.
pub fn entropy_direct(t: &ProbTensor, a: &[VarId], b: &[VarId]) -> Result<f64> {
    let (aa, ba) = (axes(t, a)?, axes(t, b)?);
    check_disjoint(t, &[&aa, &ba])?;
    check_mass(t)?;
    let mut p_ab: BTreeMap<(Key, Key), f64> = BTreeMap::new();
    let mut p_b: BTreeMap<Key, f64> = BTreeMap::new();
    for (idx, p) in cells(t) {
        let (ka, kb) = (project(&idx, &aa), project(&idx, &ba));
        *p_ab.entry((ka, kb.clone())).or_default() += p;
        *p_b.entry(kb).or_default() += p;
    }
    let mut total = 0.0;
    for ((_, kb), p) in &p_ab {
        if *p > 0.0 {
            total -= p * (p / p_b[kb]).log2();
        }
    }
    Ok(total)
}

/// Per-subset tables `(f, g, h)` indexed by relay bitmask, each entry
/// computed straight from its defining formula.
pub fn subset_functions_direct(model: &JointModel) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let t = model.joint();
    let n = model.relays();
    let full: u32 = (1 << n) - 1;
    let pick = |mask: u32, var: &dyn Fn(usize) -> VarId| -> Vec<VarId> {
        (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).map(var).collect()
    };
    let xi = |i| model.x_i(i);
    let yi = |i| model.y_i(i);
    let yh = |i| model.yhat_i(i);
    let x_n = pick(full, &xi);

    let mut yhat_y = pick(full, &yh);
    yhat_y.push(model.y());
    let base = mi_direct(t, &[model.x()], &yhat_y, &x_n)?;

    let (mut f, mut g, mut h) = (Vec::new(), Vec::new(), Vec::new());
    for mask in 0..=full {
        let rest = full & !mask;
        let mut local = 0.0;
        for i in 1..=n {
            if mask >> (i - 1) & 1 == 1 {
                local += entropy_direct(t, &[yh(i)], &[yi(i), xi(i)])?;
            }
        }
        let mut given = pick(rest, &yh);
        given.push(model.y());
        given.extend(x_n.iter().copied());
        let target = pick(mask, &yh);
        let h_plain = entropy_direct(t, &target, &given)?;
        given.push(model.x());
        let h_x = entropy_direct(t, &target, &given)?;

        f.push(base - h_plain + local);
        g.push(mi_direct(t, &pick(mask, &xi), &[model.y()], &pick(rest, &xi))?);
        h.push(h_x - local);
    }
    Ok((f, g, h))
}

/// Grid search for the best message rate over bin-rate vectors: every grid
/// point `R` with `Σ_{S_1} R_i ≤ g(S_1)` scores `min_S f(S) + Σ_S R_i`.
/// Axis `i` spans `[0, g({i})]` in `grid_steps` intervals.
pub fn thm2_bruteforce(model: &JointModel, grid_steps: usize) -> Result<f64> {
    let n = model.relays();
    if n > 2 {
        return Err(Error::SizeLimit(format!("grid oracle supports n ≤ 2, got {n}")));
    }
    if grid_steps == 0 || grid_steps > 200 {
        return Err(Error::SizeLimit(format!("grid steps must be in 1..=200, got {grid_steps}")));
    }
    let (f, g, _) = subset_functions_direct(model)?;
    let axis_max: Vec<f64> = (0..n).map(|i| g[1 << i].max(0.0)).collect();
    let points = grid_steps + 1;
    let total = points.pow(n as u32);
    let mut best = f64::NEG_INFINITY;
    for k in 0..total {
        let mut r = vec![0.0; n];
        let mut rem = k;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = axis_max[i] * (rem % points) as f64 / grid_steps as f64;
            rem /= points;
        }
        let sum = |mask: usize| -> f64 {
            (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum()
        };
        if (1..1usize << n).any(|m| sum(m) > g[m] + 1e-12) {
            continue;
        }
        let score = (0..1usize << n)
            .map(|m| f[m] + sum(m))
            .fold(f64::INFINITY, f64::min);
        best = best.max(score);
    }
    Ok(best.max(0.0))
}

/// Best objective over the vertices of `{x : rows, x ≥ lower}` ∩ optional
/// box `x ≤ upper`, or `None` if no vertex is feasible.
fn best_vertex(
    num_vars: usize,
    objective: &[f64],
    rows: &[(Vec<f64>, Relation, f64)],
    lower: &[f64],
    upper: Option<&[f64]>,
) -> Option<(f64, Vec<f64>)> {
    // Hyperplanes: each row at equality, each lower bound, each upper bound.
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..num_vars {
        let mut e = vec![0.0; num_vars];
        e[j] = 1.0;
        planes.push((e.clone(), lower[j]));
        if let Some(u) = upper {
            planes.push((e, u[j]));
        }
    }
    let feasible = |x: &[f64]| {
        let tol = 1e-9;
        rows.iter().all(|(a, rel, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            let scale = 1.0 + b.abs();
            match rel {
                Relation::Le => lhs <= b + tol * scale,
                Relation::Ge => lhs >= b - tol * scale,
            }
        }) && x.iter().zip(lower).all(|(v, l)| *v >= l - tol)
            && upper.is_none_or(|u| x.iter().zip(u).all(|(v, h)| *v <= h + tol))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut choice: Vec<usize> = (0..num_vars).collect();
    if planes.len() < num_vars {
        return None;
    }
    loop {
        let a: Vec<Vec<f64>> = choice.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = choice.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = gauss_solve(a, b) {
            if feasible(&x) {
                let val: f64 = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
                    best = Some((val, x));
                }
            }
        }
        // next combination in lexicographic order
        let m = planes.len();
        let mut k = num_vars;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if choice[k] < m - num_vars + k {
                break;
            }
        }
        choice[k] += 1;
        for j in k + 1..num_vars {
            choice[j] = choice[j - 1] + 1;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Solves a small LP by vertex enumeration. Unboundedness is decided by
/// searching the recession cone `{d : rows·d {≤,≥} 0, 0 ≤ d ≤ 1}` for an
/// improving direction.
pub fn lp_vertex_oracle(lp: &LinearProgram) -> Result<LpOutcome> {
    if lp.num_vars == 0 || lp.num_vars > 5 || lp.constraints.len() > 16 {
        return Err(Error::SizeLimit(format!(
            "vertex oracle needs 1..=5 variables and ≤ 16 constraints, got {} and {}",
            lp.num_vars,
            lp.constraints.len()
        )));
    }
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs))
        .collect();
    let Some((value, point)) = best_vertex(lp.num_vars, &lp.objective, &rows, &lp.lower_bounds, None)
    else {
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            value: None,
            point: vec![],
            active: vec![],
        });
    };

    let cone: Vec<(Vec<f64>, Relation, f64)> =
        rows.iter().map(|(a, rel, _)| (a.clone(), *rel, 0.0)).collect();
    let zeros = vec![0.0; lp.num_vars];
    let ones = vec![1.0; lp.num_vars];
    let (ray, _) = best_vertex(lp.num_vars, &lp.objective, &cone, &zeros, Some(&ones))
        .expect("origin is always a vertex of the recession box");
    if ray > 1e-9 {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            value: None,
            point: vec![],
            active: vec![],
        });
    }
    let active = rows
        .iter()
        .enumerate()
        .filter(|(_, (a, _, b))| {
            let lhs: f64 = a.iter().zip(&point).map(|(p, q)| p * q).sum();
            (lhs - b).abs() <= 1e-8
        })
        .map(|(k, _)| k)
        .collect();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        value: Some(value),
        point,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mi_direct_basics() {
        let x = VarId::source(2);
        let y = VarId::dest(2);
        let copy = ProbTensor::new(vec![x, y], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mi_direct(&copy, &[x], &[y], &[]).unwrap() - 1.0).abs() < 1e-15);
        let indep = ProbTensor::new(vec![x, y], vec![0.12, 0.28, 0.18, 0.42]).unwrap();
        assert!(mi_direct(&indep, &[x], &[y], &[]).unwrap().abs() < 1e-15);
        assert!(matches!(
            mi_direct(&copy, &[x], &[x], &[]),
            Err(Error::Overlap(_))
        ));
    }

    #[test]
    fn vertex_oracle_examples() {
        let mut lp = LinearProgram::new(2).maximize(vec![1.0, 0.0]);
        lp.le(vec![1.0, 0.0], 0.8)
            .le(vec![1.0, -1.0], 0.3)
            .le(vec![0.0, 1.0], 0.4);
        let out = lp_vertex_oracle(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.value.unwrap() - 0.7).abs() < 1e-12);

        let mut lp = LinearProgram::new(1).maximize(vec![1.0]);
        lp.le(vec![1.0], -1.0);
        assert_eq!(lp_vertex_oracle(&lp).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(2).maximize(vec![1.0, 1.0]);
        lp.le(vec![1.0, -1.0], 1.0);
        assert_eq!(lp_vertex_oracle(&lp).unwrap().status, LpStatus::Unbounded);

        let lp = LinearProgram::new(6);
        assert!(matches!(lp_vertex_oracle(&lp), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn gauss_singular() {
        assert!(gauss_solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
        let x = gauss_solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
