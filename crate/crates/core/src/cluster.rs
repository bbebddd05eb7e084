//! Single-linkage agglomeration of the nodes kept by the MRF.

use std::collections::HashMap;

use crate::geometry::{haversine_distance, GeoPoint, LocalChart};
use crate::mrf::MrfGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Node indices in ascending order.
    pub members: Vec<usize>,
    /// Mean member position in a local chart.
    pub center: GeoPoint,
    /// Largest number of members produced by one pair of frames.
    pub pair_multiplicity: usize,
}

/// One merge of a single-linkage dendrogram, expressed as an MST edge over
/// positions in the input slice.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    a: usize,
    b: usize,
    distance: f64,
}

/// Minimum spanning tree edges in merge order. Ties between equal distances
/// go to the lower index pair.
fn dendrogram(points: &[GeoPoint]) -> Vec<Merge> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = haversine_distance(points[current], points[v]);
            if d < best[v].0 || (d == best[v].0 && current < best[v].1) {
                best[v] = (d, current);
            }
            if next == usize::MAX || best[v].0 < best[next].0 {
                next = v;
            }
        }
        in_tree[next] = true;
        let (distance, from) = best[next];
        edges.push(Merge {
            a: from.min(next),
            b: from.max(next),
            distance,
        });
        current = next;
    }
    edges.sort_by(|x, y| x.distance.total_cmp(&y.distance).then((x.a, x.b).cmp(&(y.a, y.b))));
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups of input positions after applying `merges` in order while `keep`
/// accepts them.
fn groups(n: usize, merges: &[Merge], mut keep: impl FnMut(usize, &Merge) -> bool) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for (k, m) in merges.iter().enumerate() {
        if !keep(k, m) {
            break;
        }
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        by_root.entry(r).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = by_root.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

fn make_cluster(graph: &MrfGraph, mut members: Vec<usize>) -> Cluster {
    members.sort_unstable();
    let chart = LocalChart::new(graph.nodes[members[0]].position);
    let mut sum = [0.0, 0.0];
    for &m in &members {
        let xy = chart.project(graph.nodes[m].position);
        sum[0] += xy[0];
        sum[1] += xy[1];
    }
    let k = members.len() as f64;
    let center = chart.unproject([sum[0] / k, sum[1] / k]);

    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    for &m in &members {
        let [ra, rb] = graph.nodes[m].rays;
        let (fa, fb) = (graph.rays[ra].frame, graph.rays[rb].frame);
        *counts.entry((fa.min(fb), fa.max(fb))).or_default() += 1;
    }
    Cluster {
        pair_multiplicity: counts.into_values().max().unwrap_or(0),
        members,
        center,
    }
}

/// Merges `nodes` while the closest inter-cluster distance is at most `cutoff`
/// meters. Clusters are ordered by their smallest member.
pub fn agglomerate(graph: &MrfGraph, nodes: &[usize], cutoff: f64) -> Vec<Cluster> {
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let points: Vec<GeoPoint> = nodes.iter().map(|&m| graph.nodes[m].position).collect();
    let merges = dendrogram(&points);
    groups(nodes.len(), &merges, |_, m| m.distance <= cutoff)
        .into_iter()
        .map(|g| make_cluster(graph, g.into_iter().map(|k| nodes[k]).collect()))
        .collect()
}

/// Splits a cluster whose pair multiplicity `k` exceeds one into `k`
/// single-linkage sub-clusters.
pub fn split_by_pair_count(graph: &MrfGraph, cluster: &Cluster) -> Vec<Cluster> {
    let k = cluster.pair_multiplicity;
    if k <= 1 || cluster.members.len() < k {
        return vec![cluster.clone()];
    }
    let points: Vec<GeoPoint> = cluster.members.iter().map(|&m| graph.nodes[m].position).collect();
    let merges = dendrogram(&points);
    let allowed = cluster.members.len() - k;
    groups(points.len(), &merges, |i, _| i < allowed)
        .into_iter()
        .map(|g| make_cluster(graph, g.into_iter().map(|i| cluster.members[i]).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{destination, Ray};
    use crate::mrf::{GraphNode, NodeHeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn origin() -> GeoPoint {
        GeoPoint::new(53.34, -6.26).unwrap()
    }

    /// Graph whose node `i` sits `offsets[i]` meters east of the origin and
    /// comes from frames `frames[i]`.
    fn graph(offsets: &[(f64, f64)], frames: &[(usize, usize)]) -> MrfGraph {
        let mut rays = Vec::new();
        let mut nodes = Vec::new();
        for (i, (&(east, north), &(fa, fb))) in offsets.iter().zip(frames).enumerate() {
            for f in [fa, fb] {
                rays.push(Ray { origin: origin(), bearing: 0.0, frame: f, detection: rays.len() });
            }
            let p = destination(destination(origin(), 90.0, east), 0.0, north);
            nodes.push(GraphNode {
                index: i,
                position: p,
                rays: [2 * i, 2 * i + 1],
                tri_dist: [1.0, 1.0],
                mono_dist: [None, None],
                heights: NodeHeights::Unset,
            });
        }
        MrfGraph::assemble("x", rays, nodes)
    }

    /// Naive single linkage: merge the closest pair of clusters while within cutoff.
    fn naive(points: &[GeoPoint], cutoff: f64) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..clusters.len() {
                for b in (a + 1)..clusters.len() {
                    let d = clusters[a]
                        .iter()
                        .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                        .map(|(i, j)| haversine_distance(points[i], points[j]))
                        .fold(f64::INFINITY, f64::min);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, b));
                    }
                }
            }
            match best {
                Some((d, a, b)) if d <= cutoff => {
                    let moved = clusters.remove(b);
                    clusters[a].extend(moved);
                }
                _ => break,
            }
        }
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_by_key(|c| c[0]);
        clusters
    }

    #[test]
    fn examples() {
        let g = graph(&[(0.0, 0.0), (0.5, 0.0), (10.0, 0.0)], &[(0, 1), (0, 2), (1, 2)]);
        let c = agglomerate(&g, &[0, 1, 2], 1.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members, vec![0, 1]);
        assert_eq!(c[1].members, vec![2]);
        assert!(haversine_distance(c[0].center, destination(origin(), 90.0, 0.25)) < 1e-6);
        assert_eq!(agglomerate(&g, &[0, 1, 2], 20.0).len(), 1);
        assert_eq!(agglomerate(&g, &[0, 1, 2], 0.1).len(), 3);
        assert!(agglomerate(&g, &[], 1.0).is_empty());
    }

    #[test]
    fn matches_naive_single_linkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..60 {
            let n = rng.random_range(1..25);
            let offsets: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.random_range(0.0..15.0), rng.random_range(0.0..15.0))).collect();
            let frames = vec![(0, 1); n];
            let g = graph(&offsets, &frames);
            let cutoff = rng.random_range(0.5..4.0);
            let all: Vec<usize> = (0..n).collect();
            let got: Vec<Vec<usize>> = agglomerate(&g, &all, cutoff).into_iter().map(|c| c.members).collect();
            let points: Vec<GeoPoint> = g.nodes.iter().map(|n| n.position).collect();
            assert_eq!(got, naive(&points, cutoff));
        }
    }

    #[test]
    fn pair_multiplicity_and_split() {
        let g = graph(
            &[(0.0, 0.0), (0.1, 0.0), (1.5, 0.0), (1.6, 0.0)],
            &[(0, 1), (0, 2), (0, 1), (0, 2)],
        );
        let clusters = agglomerate(&g, &[0, 1, 2, 3], 2.0);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].pair_multiplicity, 2);
        let parts = split_by_pair_count(&g, &clusters[0]);
        let members: Vec<_> = parts.iter().map(|c| c.members.clone()).collect();
        assert_eq!(members, vec![vec![0, 1], vec![2, 3]]);
        assert!(parts.iter().all(|c| c.pair_multiplicity == 1));
        assert_eq!(split_by_pair_count(&g, &parts[0]), vec![parts[0].clone()]);
    }
}
