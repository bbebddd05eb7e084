//! Quadratic pseudo-Boolean minimization by roof duality.
//!
//! [`solve_roof_duality`] builds the doubled (variable, negated-variable)
//! network, computes an exact max-flow and reads a persistent partial
//! labeling off the minimal source-side min-cut. [`solve_complete`] labels the
//! remainder: probing on each residual component, exhaustive enumeration of
//! small residues and greedy descent on large ones.

pub mod maxflow;
mod residual;

use std::io::{self, Write};

use crate::mrf::{MrfGraph, MrfWeights};
use maxflow::FlowNetwork;

/// Rounds of probing applied to every residual component.
pub const PROBING_ROUNDS: usize = 3;

/// Largest residual component solved by exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

/// Quadratic term over `(x_i, x_j)` with costs indexed `[00, 01, 10, 11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub costs: [f64; 4],
}

impl PairTerm {
    pub fn cost(&self, xi: bool, xj: bool) -> f64 {
        self.costs[2 * usize::from(xi) + usize::from(xj)]
    }

    /// x_i x_j coefficient; positive means supermodular.
    pub fn interaction(&self) -> f64 {
        self.costs[0] + self.costs[3] - self.costs[1] - self.costs[2]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoBooleanProblem {
    pub num_vars: usize,
    /// Per variable, cost at 0 and cost at 1.
    pub unary: Vec<[f64; 2]>,
    pub pairwise: Vec<PairTerm>,
}

impl PseudoBooleanProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            unary: vec![[0.0; 2]; num_vars],
            pairwise: Vec::new(),
        }
    }

    pub fn add_unary(&mut self, i: usize, cost0: f64, cost1: f64) {
        self.unary[i][0] += cost0;
        self.unary[i][1] += cost1;
    }

    pub fn add_pairwise(&mut self, i: usize, j: usize, costs: [f64; 4]) {
        assert!(i != j && i < self.num_vars && j < self.num_vars, "invalid pair ({i}, {j})");
        debug_assert!(costs.iter().all(|c| c.is_finite()));
        self.pairwise.push(PairTerm { i, j, costs });
    }

    pub fn energy(&self, labels: &[bool]) -> f64 {
        assert_eq!(labels.len(), self.num_vars);
        let unary: f64 = self
            .unary
            .iter()
            .zip(labels)
            .map(|(u, &x)| u[usize::from(x)])
            .sum();
        let pairwise: f64 = self
            .pairwise
            .iter()
            .map(|t| t.cost(labels[t.i], labels[t.j]))
            .sum();
        unary + pairwise
    }

    /// Restricts the problem to the variables left `None` in `fixed`.
    ///
    /// Returns the reduced problem, the original index of each reduced
    /// variable and the constant contributed by the fixed variables.
    pub fn condition(&self, fixed: &[Option<bool>]) -> (PseudoBooleanProblem, Vec<usize>, f64) {
        let mut map = vec![usize::MAX; self.num_vars];
        let mut free = Vec::new();
        for (v, f) in fixed.iter().enumerate() {
            if f.is_none() {
                map[v] = free.len();
                free.push(v);
            }
        }
        let mut reduced = PseudoBooleanProblem::new(free.len());
        let mut constant = 0.0;
        for (v, u) in self.unary.iter().enumerate() {
            match fixed[v] {
                Some(x) => constant += u[usize::from(x)],
                None => reduced.add_unary(map[v], u[0], u[1]),
            }
        }
        for t in &self.pairwise {
            match (fixed[t.i], fixed[t.j]) {
                (None, None) => reduced.pairwise.push(PairTerm {
                    i: map[t.i],
                    j: map[t.j],
                    costs: t.costs,
                }),
                (Some(xi), None) => reduced.add_unary(map[t.j], t.cost(xi, false), t.cost(xi, true)),
                (None, Some(xj)) => reduced.add_unary(map[t.i], t.cost(false, xj), t.cost(true, xj)),
                (Some(xi), Some(xj)) => constant += t.cost(xi, xj),
            }
        }
        (reduced, free, constant)
    }

    /// Connected components of the interaction graph, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.num_vars).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for t in &self.pairwise {
            let (a, b) = (find(&mut parent, t.i), find(&mut parent, t.j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.num_vars];
        for v in 0..self.num_vars {
            let r = find(&mut parent, v);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(v);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    /// `None` marks a variable roof duality could not label.
    pub labels: Vec<Option<bool>>,
    /// Energy of the labeling with unlabeled variables set to 0.
    pub energy: f64,
    /// Roof-dual lower bound on the minimum energy.
    pub lower_bound: f64,
}

impl Labeling {
    pub fn is_complete(&self) -> bool {
        self.labels.iter().all(Option::is_some)
    }

    pub fn unlabeled(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Labels with unlabeled variables set to 0.
    pub fn values(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.unwrap_or(false)).collect()
    }
}

/// Reformulates the MRF energy as a pseudo-Boolean problem whose energy
/// equals [`MrfGraph::energy`] for every labeling.
pub fn from_mrf(graph: &MrfGraph, weights: &MrfWeights) -> PseudoBooleanProblem {
    let mut p = PseudoBooleanProblem::new(graph.len());
    for i in 0..graph.len() {
        p.unary[i] = [0.0, graph.unary_cost(i, weights)];
    }
    let w = weights.pairwise();
    for pair in graph.pairs() {
        p.add_pairwise(pair.a, pair.b, [0.0, 0.0, 0.0, w * pair.distance]);
    }
    p
}

/// Doubled network: source 0, sink 1, x_i at 2 + i and ¬x_i at 2 + n + i.
/// A variable is 0 when its node lies on the source side.
struct RoofNetwork {
    network: FlowNetwork,
    constant: f64,
    n: usize,
}

impl RoofNetwork {
    fn build(p: &PseudoBooleanProblem) -> Self {
        let n = p.num_vars;
        let pos = |i: usize| 2 + i;
        let neg = |i: usize| 2 + n + i;
        let mut network = FlowNetwork::new(2 + 2 * n, 0, 1);
        let mut constant = 0.0;
        let mut linear: Vec<f64> = Vec::with_capacity(n);
        for u in &p.unary {
            constant += u[0];
            linear.push(u[1] - u[0]);
        }
        for t in &p.pairwise {
            let [c00, c01, c10, _] = t.costs;
            constant += c00;
            linear[t.i] += c10 - c00;
            linear[t.j] += c01 - c00;
            let q = t.interaction();
            if q < 0.0 {
                // q x_i x_j = q x_i + (−q) x_i (1 − x_j)
                linear[t.i] += q;
                let k = -0.5 * q;
                network.add_edge(pos(t.j), pos(t.i), k, 0.0);
                network.add_edge(neg(t.i), neg(t.j), k, 0.0);
            } else if q > 0.0 {
                let k = 0.5 * q;
                network.add_edge(neg(t.j), pos(t.i), k, 0.0);
                network.add_edge(neg(t.i), pos(t.j), k, 0.0);
            }
        }
        for (i, &a) in linear.iter().enumerate() {
            if a > 0.0 {
                network.add_edge(0, pos(i), 0.5 * a, 0.0);
                network.add_edge(neg(i), 1, 0.5 * a, 0.0);
            } else if a < 0.0 {
                constant += a;
                network.add_edge(pos(i), 1, -0.5 * a, 0.0);
                network.add_edge(0, neg(i), -0.5 * a, 0.0);
            }
        }
        Self { network, constant, n }
    }

    fn solve(mut self) -> (Vec<Option<bool>>, f64, FlowNetwork) {
        let flow = self.network.solve();
        let side = self.network.source_side();
        #[cfg(debug_assertions)]
        {
            let cut = self.network.cut_capacity(&side);
            debug_assert!(
                (cut - flow).abs() <= 1e-9 * (1.0 + flow.abs()),
                "flow {flow} differs from cut {cut}"
            );
        }
        let n = self.n;
        let labels = (0..n)
            .map(|i| match (side[2 + i], side[2 + n + i]) {
                (true, false) => Some(false),
                (false, true) => Some(true),
                _ => None,
            })
            .collect();
        (labels, self.constant + flow, self.network)
    }
}

/// Persistent partial labeling from the roof-dual min-cut.
pub fn solve_roof_duality(p: &PseudoBooleanProblem) -> Labeling {
    let (labels, lower_bound, _) = RoofNetwork::build(p).solve();
    let labeling = Labeling {
        energy: 0.0,
        labels,
        lower_bound,
    };
    let energy = p.energy(&labeling.values());
    Labeling { energy, ..labeling }
}

/// Writes the solved roof-duality network of `p` as a plain-text edge list.
pub fn dump_network<W: Write>(p: &PseudoBooleanProblem, out: W) -> io::Result<()> {
    let (_, _, network) = RoofNetwork::build(p).solve();
    network.write_edge_list(out)
}

/// Total labeling: roof duality, then probing and residual resolution per
/// unlabeled component.
pub fn solve_complete(p: &PseudoBooleanProblem) -> Labeling {
    let roof = solve_roof_duality(p);
    let lower_bound = roof.lower_bound;
    let mut labels = roof.labels;
    if labels.iter().any(Option::is_none) {
        let (reduced, free, _) = p.condition(&labels);
        for component in reduced.components() {
            let values = residual::solve_component(&reduced, &component);
            for (&v, x) in component.iter().zip(values) {
                labels[free[v]] = Some(x);
            }
        }
    }
    let values: Vec<bool> = labels.iter().map(|l| l.unwrap_or(false)).collect();
    let energy = p.energy(&values);
    Labeling {
        labels,
        energy,
        lower_bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn brute_force(p: &PseudoBooleanProblem) -> (f64, Vec<Vec<bool>>) {
        let n = p.num_vars;
        let mut best = f64::INFINITY;
        let mut argmins = Vec::new();
        for mask in 0u32..(1 << n) {
            let z: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let e = p.energy(&z);
            if e < best - 1e-9 {
                best = e;
                argmins.clear();
            }
            if (e - best).abs() <= 1e-9 {
                argmins.push(z);
            }
        }
        (best, argmins)
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, n: usize, density: f64, sub_fraction: f64) -> PseudoBooleanProblem {
        let mut p = PseudoBooleanProblem::new(n);
        for i in 0..n {
            p.add_unary(i, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        }
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    let mut c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                    let q = c[0] + c[3] - c[1] - c[2];
                    let want_sub = rng.random_bool(sub_fraction);
                    if (q > 0.0) == want_sub {
                        c[3] -= 2.0 * q;
                    }
                    p.add_pairwise(i, j, c);
                }
            }
        }
        p
    }

    #[test]
    fn single_variable() {
        let mut p = PseudoBooleanProblem::new(1);
        p.add_unary(0, 1.0, 0.5);
        let l = solve_roof_duality(&p);
        assert_eq!(l.labels, vec![Some(true)]);
        assert_eq!(l.energy, 0.5);
    }

    #[test]
    fn empty_problem() {
        let p = PseudoBooleanProblem::new(0);
        let l = solve_complete(&p);
        assert!(l.labels.is_empty());
        assert_eq!(l.energy, 0.0);
    }

    #[test]
    fn zero_problem_labels_zero() {
        let mut p = PseudoBooleanProblem::new(4);
        p.add_pairwise(0, 1, [0.0; 4]);
        p.add_pairwise(2, 3, [0.0; 4]);
        let l = solve_complete(&p);
        assert_eq!(l.values(), vec![false; 4]);
        assert_eq!(l.energy, 0.0);
    }

    #[test]
    fn frustrated_pair_stays_unlabeled() {
        let mut p = PseudoBooleanProblem::new(2);
        p.add_unary(0, 0.0, -1.0);
        p.add_unary(1, 0.0, -1.0);
        p.add_pairwise(0, 1, [0.0, 0.0, 0.0, 3.0]);
        let (best, argmins) = brute_force(&p);
        assert_eq!(best, -1.0);
        assert_eq!(argmins.len(), 2);
        let l = solve_roof_duality(&p);
        assert_eq!(l.labels, vec![None, None]);
        assert!((l.lower_bound - -1.0).abs() < 1e-12);
        let c = solve_complete(&p);
        assert_eq!(c.energy, -1.0);
        assert_eq!(c.values().iter().filter(|&&x| x).count(), 1);
    }

    #[test]
    fn submodular_instances_fully_labeled_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..=12);
            let p = random_problem(&mut rng, n, 0.5, 1.0);
            let l = solve_roof_duality(&p);
            let (best, _) = brute_force(&p);
            // Ties can leave variables unlabeled; random costs make them vanishingly rare.
            assert!(l.is_complete());
            assert!((l.energy - best).abs() < 1e-9, "{} vs {best}", l.energy);
        }
    }

    #[test]
    fn roof_duality_persistency_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(1..=10);
            let p = random_problem(&mut rng, n, 0.6, 0.5);
            let l = solve_roof_duality(&p);
            let (best, argmins) = brute_force(&p);
            assert!(l.lower_bound <= best + 1e-9);
            let agrees = argmins
                .iter()
                .any(|z| l.labels.iter().zip(z).all(|(lab, &x)| lab.is_none_or(|v| v == x)));
            assert!(agrees, "labels {:?} not persistent", l.labels);
        }
    }

    #[test]
    fn complete_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..=12);
            let p = random_problem(&mut rng, n, 0.7, 0.3);
            let l = solve_complete(&p);
            let (best, _) = brute_force(&p);
            assert!(l.is_complete());
            assert!((l.energy - best).abs() <= 1e-9 * (1.0 + best.abs()));
            let zero_fill = p.energy(&solve_roof_duality(&p).values());
            assert!(l.energy <= zero_fill + 1e-12);
            assert!(l.energy <= p.energy(&vec![false; n]) + 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_problem(&mut rng, 14, 0.5, 0.2);
        let a = solve_complete(&p);
        let b = solve_complete(&p);
        assert_eq!(a, b);
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }

    #[test]
    fn conditioning_preserves_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_problem(&mut rng, 8, 0.6, 0.5);
        let fixed = [Some(true), None, Some(false), None, None, Some(true), None, None];
        let (r, free, c) = p.condition(&fixed);
        let z_free = [true, false, true, true, false];
        let mut z = vec![false; 8];
        for (k, &v) in free.iter().enumerate() {
            z[v] = z_free[k];
        }
        for (v, f) in fixed.iter().enumerate() {
            if let Some(x) = f {
                z[v] = *x;
            }
        }
        assert!((p.energy(&z) - (r.energy(&z_free) + c)).abs() < 1e-12);
    }

    #[test]
    fn dump_lists_arcs() {
        let mut p = PseudoBooleanProblem::new(2);
        p.add_unary(0, 0.0, 1.0);
        p.add_pairwise(0, 1, [0.0, 0.0, 0.0, 2.0]);
        let mut buf = Vec::new();
        dump_network(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# nodes 6 source 0 sink 1\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
