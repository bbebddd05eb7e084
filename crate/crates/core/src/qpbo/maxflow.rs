//! Boykov–Kolmogorov augmenting-path max-flow with search-tree reuse.
//!
//! Source and sink are ordinary nodes of the network. Arcs are stored in
//! sister pairs (`a`, `a ^ 1`); `cap[a]` is the residual capacity of `a`.

use std::collections::VecDeque;
use std::io::{self, Write};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    /// Outgoing arcs per node.
    adj: Vec<Vec<usize>>,
    head: Vec<usize>,
    cap: Vec<f64>,
    original: Vec<f64>,
    source: usize,
    sink: usize,
    flow: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize, source: usize, sink: usize) -> Self {
        assert!(source < nodes && sink < nodes && source != sink);
        Self {
            adj: vec![Vec::new(); nodes],
            head: Vec::new(),
            cap: Vec::new(),
            original: Vec::new(),
            source,
            sink,
            flow: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds arc `u → v` with capacity `cap` and its sister `v → u` with `rev_cap`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0);
        let a = self.head.len();
        self.head.extend([v, u]);
        self.cap.extend([cap, rev_cap]);
        self.original.extend([cap, rev_cap]);
        self.adj[u].push(a);
        self.adj[v].push(a + 1);
    }

    pub fn flow(&self) -> f64 {
        self.flow
    }

    fn tail(&self, a: usize) -> usize {
        self.head[a ^ 1]
    }

    /// Runs the solver to completion and returns the max-flow value.
    pub fn solve(&mut self) -> f64 {
        let n = self.adj.len();
        let mut tree = vec![Tree::Free; n];
        // Arc from a node to its parent in its search tree.
        let mut parent = vec![NONE; n];
        let mut active = VecDeque::new();
        let mut orphans = VecDeque::new();
        tree[self.source] = Tree::Source;
        tree[self.sink] = Tree::Sink;
        active.push_back(self.source);
        active.push_back(self.sink);

        while let Some(p) = active.pop_front() {
            if tree[p] == Tree::Free {
                continue;
            }
            // Growth stage.
            let mut bridge = NONE;
            for k in 0..self.adj[p].len() {
                let a = self.adj[p][k];
                let q = self.head[a];
                let open = match tree[p] {
                    Tree::Source => self.cap[a] > 0.0,
                    _ => self.cap[a ^ 1] > 0.0,
                };
                if !open {
                    continue;
                }
                match tree[q] {
                    Tree::Free => {
                        tree[q] = tree[p];
                        parent[q] = a ^ 1;
                        active.push_back(q);
                    }
                    t if t != tree[p] => {
                        bridge = if tree[p] == Tree::Source { a } else { a ^ 1 };
                        break;
                    }
                    _ => {}
                }
            }
            if bridge == NONE {
                continue;
            }
            // p may still have unexplored arcs toward the other tree.
            active.push_front(p);

            self.augment(bridge, &mut parent, &mut orphans);
            self.adopt(&mut tree, &mut parent, &mut active, &mut orphans);
        }
        self.flow
    }

    fn augment(&mut self, bridge: usize, parent: &mut [usize], orphans: &mut VecDeque<usize>) {
        // Bottleneck over source side, bridge, sink side.
        let mut bottleneck = self.cap[bridge];
        let mut x = self.tail(bridge);
        while x != self.source {
            let a = parent[x];
            bottleneck = bottleneck.min(self.cap[a ^ 1]);
            x = self.head[a];
        }
        let mut x = self.head[bridge];
        while x != self.sink {
            let a = parent[x];
            bottleneck = bottleneck.min(self.cap[a]);
            x = self.head[a];
        }

        self.cap[bridge] -= bottleneck;
        self.cap[bridge ^ 1] += bottleneck;
        let mut x = self.tail(bridge);
        while x != self.source {
            let a = parent[x];
            self.cap[a ^ 1] -= bottleneck;
            self.cap[a] += bottleneck;
            let up = self.head[a];
            if self.cap[a ^ 1] <= 0.0 {
                self.cap[a ^ 1] = 0.0;
                parent[x] = NONE;
                orphans.push_back(x);
            }
            x = up;
        }
        let mut x = self.head[bridge];
        while x != self.sink {
            let a = parent[x];
            self.cap[a] -= bottleneck;
            self.cap[a ^ 1] += bottleneck;
            let up = self.head[a];
            if self.cap[a] <= 0.0 {
                self.cap[a] = 0.0;
                parent[x] = NONE;
                orphans.push_back(x);
            }
            x = up;
        }
        if self.cap[bridge] < 0.0 {
            self.cap[bridge] = 0.0;
        }
        self.flow += bottleneck;
    }

    /// True when following parent arcs from `q` reaches a tree root.
    fn rooted(&self, mut q: usize, parent: &[usize]) -> bool {
        loop {
            if q == self.source || q == self.sink {
                return true;
            }
            let a = parent[q];
            if a == NONE {
                return false;
            }
            q = self.head[a];
        }
    }

    fn adopt(
        &mut self,
        tree: &mut [Tree],
        parent: &mut [usize],
        active: &mut VecDeque<usize>,
        orphans: &mut VecDeque<usize>,
    ) {
        while let Some(p) = orphans.pop_front() {
            let side = tree[p];
            let mut found = NONE;
            for &a in &self.adj[p] {
                let q = self.head[a];
                if tree[q] != side {
                    continue;
                }
                let open = match side {
                    Tree::Source => self.cap[a ^ 1] > 0.0,
                    _ => self.cap[a] > 0.0,
                };
                if open && self.rooted(q, parent) {
                    found = a;
                    break;
                }
            }
            if found != NONE {
                parent[p] = found;
                continue;
            }
            for k in 0..self.adj[p].len() {
                let a = self.adj[p][k];
                let q = self.head[a];
                if tree[q] != side {
                    continue;
                }
                let open = match side {
                    Tree::Source => self.cap[a ^ 1] > 0.0,
                    _ => self.cap[a] > 0.0,
                };
                if open {
                    active.push_back(q);
                }
                let pa = parent[q];
                if pa != NONE && self.head[pa] == p {
                    parent[q] = NONE;
                    orphans.push_back(q);
                }
            }
            tree[p] = Tree::Free;
        }
    }

    /// Residual capacity of arc `a`.
    pub fn residual(&self, a: usize) -> f64 {
        self.cap[a]
    }

    /// Nodes reachable from the source through arcs with positive residual capacity.
    pub fn source_side(&self) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([self.source]);
        seen[self.source] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.head[a];
                if !seen[v] && self.cap[a] > 0.0 {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Total original capacity of arcs leaving `side`.
    pub fn cut_capacity(&self, side: &[bool]) -> f64 {
        (0..self.head.len())
            .filter(|&a| side[self.tail(a)] && !side[self.head[a]])
            .map(|a| self.original[a])
            .sum()
    }

    /// Writes one `tail head capacity residual` line per arc with nonzero capacity.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# nodes {} source {} sink {}", self.adj.len(), self.source, self.sink)?;
        for a in 0..self.head.len() {
            if self.original[a] > 0.0 {
                writeln!(out, "{} {} {} {}", self.tail(a), self.head[a], self.original[a], self.cap[a])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Edmonds–Karp on a dense matrix, independent of the network above.
    fn edmonds_karp(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
        let mut c = vec![vec![0.0; n]; n];
        for &(u, v, w) in edges {
            c[u][v] += w;
        }
        let mut total = 0.0;
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for v in 0..n {
                    if prev[v] == usize::MAX && c[u][v] > 1e-12 {
                        prev[v] = u;
                        q.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return total;
            }
            let mut b = f64::INFINITY;
            let mut v = t;
            while v != s {
                b = b.min(c[prev[v]][v]);
                v = prev[v];
            }
            let mut v = t;
            while v != s {
                c[prev[v]][v] -= b;
                c[v][prev[v]] += b;
                v = prev[v];
            }
            total += b;
        }
    }

    #[test]
    fn classic_example() {
        let mut g = FlowNetwork::new(6, 0, 5);
        for (u, v, c) in [(0, 1, 16.0), (0, 2, 13.0), (1, 2, 10.0), (2, 1, 4.0), (1, 3, 12.0),
                          (3, 2, 9.0), (2, 4, 14.0), (4, 3, 7.0), (3, 5, 20.0), (4, 5, 4.0)] {
            g.add_edge(u, v, c, 0.0);
        }
        assert_eq!(g.solve(), 23.0);
        let side = g.source_side();
        assert!(!side[5]);
        assert_eq!(g.cut_capacity(&side), 23.0);
    }

    #[test]
    fn matches_edmonds_karp_on_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(2..14);
            let m = rng.random_range(0..40);
            let mut edges = Vec::new();
            let mut g = FlowNetwork::new(n, 0, n - 1);
            for _ in 0..m {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                if u == v {
                    continue;
                }
                let c: f64 = rng.random_range(0.0..10.0);
                let r: f64 = if rng.random_bool(0.3) { rng.random_range(0.0..5.0) } else { 0.0 };
                g.add_edge(u, v, c, r);
                edges.push((u, v, c));
                edges.push((v, u, r));
            }
            let f = g.solve();
            let expected = edmonds_karp(n, &edges, 0, n - 1);
            assert!((f - expected).abs() < 1e-9 * (1.0 + expected), "{f} vs {expected}");
            let side = g.source_side();
            assert!(!side[n - 1]);
            assert!((g.cut_capacity(&side) - f).abs() < 1e-9 * (1.0 + f));
        }
    }

    #[test]
    fn edge_list_dump() {
        let mut g = FlowNetwork::new(3, 0, 2);
        g.add_edge(0, 1, 2.0, 0.0);
        g.add_edge(1, 2, 1.0, 0.0);
        g.solve();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# nodes 3 source 0 sink 2\n0 1 2 1\n1 2 1 0\n");
    }
}
