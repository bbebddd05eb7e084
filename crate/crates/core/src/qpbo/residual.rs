//! Labeling of variables left open by roof duality.

use super::{solve_roof_duality, PseudoBooleanProblem, ENUMERATION_LIMIT, PROBING_ROUNDS};

/// Sub-problem over `vars`; terms leaving the set are dropped.
fn restrict(p: &PseudoBooleanProblem, vars: &[usize]) -> PseudoBooleanProblem {
    let mut map = vec![usize::MAX; p.num_vars];
    for (k, &v) in vars.iter().enumerate() {
        map[v] = k;
    }
    let mut sub = PseudoBooleanProblem::new(vars.len());
    for (k, &v) in vars.iter().enumerate() {
        sub.unary[k] = p.unary[v];
    }
    for t in &p.pairwise {
        if map[t.i] != usize::MAX && map[t.j] != usize::MAX {
            sub.add_pairwise(map[t.i], map[t.j], t.costs);
        }
    }
    sub
}

fn magnitude(p: &PseudoBooleanProblem) -> f64 {
    let unary: f64 = p.unary.iter().map(|u| u[0].abs().max(u[1].abs())).sum();
    let pairwise: f64 = p
        .pairwise
        .iter()
        .map(|t| t.costs.iter().fold(0.0f64, |m, c| m.max(c.abs())))
        .sum();
    1.0 + unary + pairwise
}

/// Solves one connected component of the residual problem.
pub(super) fn solve_component(p: &PseudoBooleanProblem, vars: &[usize]) -> Vec<bool> {
    let sub = restrict(p, vars);
    let mut fixed = vec![None; sub.num_vars];
    probe(&sub, &mut fixed);

    let mut values: Vec<bool> = fixed.iter().map(|f| f.unwrap_or(false)).collect();
    let (rest, free, _) = sub.condition(&fixed);
    for comp in rest.components() {
        let local = restrict(&rest, &comp);
        let x = if comp.len() <= ENUMERATION_LIMIT {
            enumerate(&local)
        } else {
            greedy_descent(&local)
        };
        for (&v, xv) in comp.iter().zip(x) {
            values[free[v]] = xv;
        }
    }
    let zeros = vec![false; sub.num_vars];
    if sub.energy(&values) < sub.energy(&zeros) {
        values
    } else {
        zeros
    }
}

struct Branch {
    labels: Vec<Option<bool>>,
    lower_bound: f64,
    upper_bound: f64,
}

fn branch(p: &PseudoBooleanProblem, fixed: &[Option<bool>], v: usize, value: bool) -> Branch {
    let mut f = fixed.to_vec();
    f[v] = Some(value);
    let (reduced, free, constant) = p.condition(&f);
    let roof = solve_roof_duality(&reduced);
    for (k, &u) in free.iter().enumerate() {
        f[u] = roof.labels[k];
    }
    let completed: Vec<bool> = f.iter().map(|x| x.unwrap_or(false)).collect();
    Branch {
        upper_bound: p.energy(&completed),
        lower_bound: constant + roof.lower_bound,
        labels: f,
    }
}

/// Fixes variables whose value is implied by probing both values of another.
fn probe(p: &PseudoBooleanProblem, fixed: &mut [Option<bool>]) {
    let tol = 1e-9 * magnitude(p);
    for _ in 0..PROBING_ROUNDS {
        let mut changed = false;
        for v in 0..p.num_vars {
            if fixed[v].is_some() {
                continue;
            }
            let zero = branch(p, fixed, v, false);
            let one = branch(p, fixed, v, true);
            if one.lower_bound > zero.upper_bound + tol {
                fixed.copy_from_slice(&zero.labels);
                changed = true;
                continue;
            }
            if zero.lower_bound > one.upper_bound + tol {
                fixed.copy_from_slice(&one.labels);
                changed = true;
                continue;
            }
            for u in 0..p.num_vars {
                if u != v && fixed[u].is_none() {
                    if let (Some(a), Some(b)) = (zero.labels[u], one.labels[u]) {
                        if a == b {
                            fixed[u] = Some(a);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed || fixed.iter().all(Option::is_some) {
            break;
        }
    }
}

fn adjacency(p: &PseudoBooleanProblem) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); p.num_vars];
    for (k, t) in p.pairwise.iter().enumerate() {
        adj[t.i].push(k);
        adj[t.j].push(k);
    }
    adj
}

/// Energy change from flipping `v` in `x`.
fn flip_delta(p: &PseudoBooleanProblem, adj: &[Vec<usize>], x: &[bool], v: usize) -> f64 {
    let (old, new) = (x[v], !x[v]);
    let mut d = p.unary[v][usize::from(new)] - p.unary[v][usize::from(old)];
    for &k in &adj[v] {
        let t = &p.pairwise[k];
        d += if t.i == v {
            t.cost(new, x[t.j]) - t.cost(old, x[t.j])
        } else {
            t.cost(x[t.i], new) - t.cost(x[t.i], old)
        };
    }
    d
}

/// Exhaustive minimum over all labelings (Gray-code order). Ties go to the
/// labeling with fewer ones, then to the one found first.
fn enumerate(p: &PseudoBooleanProblem) -> Vec<bool> {
    let n = p.num_vars;
    assert!(n <= ENUMERATION_LIMIT);
    let adj = adjacency(p);
    let window = 1e-9 * magnitude(p);
    let mut x = vec![false; n];
    let mut running = p.energy(&x);
    let mut best = x.clone();
    let mut best_exact = running;
    for k in 1u64..(1u64 << n) {
        let v = k.trailing_zeros() as usize;
        running += flip_delta(p, &adj, &x, v);
        x[v] = !x[v];
        if running < best_exact + window {
            let exact = p.energy(&x);
            let ones = x.iter().filter(|&&b| b).count();
            let best_ones = best.iter().filter(|&&b| b).count();
            if exact < best_exact || (exact == best_exact && ones < best_ones) {
                best_exact = exact;
                best.copy_from_slice(&x);
            }
            running = exact;
        }
    }
    best
}

/// Best-improvement single-flip descent from the all-zero labeling.
fn greedy_descent(p: &PseudoBooleanProblem) -> Vec<bool> {
    let n = p.num_vars;
    let adj = adjacency(p);
    let tol = 1e-12 * magnitude(p);
    let mut x = vec![false; n];
    let mut delta: Vec<f64> = (0..n).map(|v| flip_delta(p, &adj, &x, v)).collect();
    loop {
        let mut pick = None;
        let mut best = -tol;
        for (v, &d) in delta.iter().enumerate() {
            if d < best {
                best = d;
                pick = Some(v);
            }
        }
        let Some(v) = pick else { break };
        x[v] = !x[v];
        delta[v] = flip_delta(p, &adj, &x, v);
        for &k in &adj[v] {
            let t = &p.pairwise[k];
            let u = if t.i == v { t.j } else { t.i };
            delta[u] = flip_delta(p, &adj, &x, u);
        }
    }
    x
}
