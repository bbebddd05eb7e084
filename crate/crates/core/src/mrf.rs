//! Per-class intersection graph and its binary MRF energy.
//!
//! Each node is the forward crossing of two rays from different frames. A
//! node carries the triangulated camera distances along both rays, the
//! monocular depths of both source detections and the two single-view
//! height estimates. The energy of a labeling `z` is
//!
//! ```text
//! U(z) = Σ_i z_i (α u0_i + β u1_i + λ u2_i) + (1 − α − β − λ) Σ_{m<n on a ray} z_m z_n ‖x_m − x_n‖
//! ```
//!
//! with `u0_i = −(1/|R_a| + 1/|R_b|)`, `u1_i = Σ_j |Δ_ij − d_ij|` and
//! `u2_i = |h_i1 − h_i2|`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{haversine_distance, intersect_rays, GeoPoint, Ray};
use crate::survey::Survey;

/// u2 contribution of a node whose pitch left the frustum, meters.
pub const DEGENERATE_HEIGHT_PENALTY: f64 = 1e6;

/// How the reciprocal ray counts of a node's two supporting rays combine into u0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum U0Aggregation {
    /// −(1/|R_a| + 1/|R_b|)
    #[default]
    Sum,
    /// −(1/|R_a| + 1/|R_b|) / 2
    Mean,
}

impl std::str::FromStr for U0Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown u0 aggregation `{other}` (expected sum or mean)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrfWeights {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    #[serde(default)]
    pub u0_aggregation: U0Aggregation,
}

impl MrfWeights {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        let w = Self {
            alpha,
            beta,
            lambda,
            u0_aggregation: U0Aggregation::Sum,
        };
        w.validate().map_err(Error::Config)?;
        Ok(w)
    }

    pub fn with_aggregation(mut self, aggregation: U0Aggregation) -> Self {
        self.u0_aggregation = aggregation;
        self
    }

    /// Field-level problems, empty when the weights are usable.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                problems.push(format!("{name}: {v} outside [0, 1)"));
            }
        }
        if problems.is_empty() && self.alpha + self.beta + self.lambda > 1.0 + 1e-12 {
            problems.push(format!(
                "alpha + beta + lambda: {} exceeds 1",
                self.alpha + self.beta + self.lambda
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    /// Weight of the pairwise term, 1 − α − β − λ (clamped at 0).
    pub fn pairwise(&self) -> f64 {
        (1.0 - self.alpha - self.beta - self.lambda).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeHeights {
    /// Not yet populated; contributes nothing to u2.
    Unset,
    Views([f64; 2]),
    /// Object pitch left the frustum in at least one view.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub index: usize,
    pub position: GeoPoint,
    /// Indices into [`MrfGraph::rays`].
    pub rays: [usize; 2],
    /// Triangulated camera-to-node distance along each ray, meters.
    pub tri_dist: [f64; 2],
    /// Monocular depth of each source detection, meters.
    pub mono_dist: [Option<f64>; 2],
    pub heights: NodeHeights,
}

impl GraphNode {
    pub fn depth_discrepancy(&self) -> f64 {
        self.tri_dist
            .iter()
            .zip(&self.mono_dist)
            .filter_map(|(d, m)| m.map(|m| (m - d).abs()))
            .sum()
    }

    pub fn height_discrepancy(&self) -> f64 {
        match self.heights {
            NodeHeights::Unset => 0.0,
            NodeHeights::Views([a, b]) => (a - b).abs(),
            NodeHeights::Degenerate => DEGENERATE_HEIGHT_PENALTY,
        }
    }
}

/// Unordered node pair sharing a ray, with the distance between the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPair {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct MrfGraph {
    pub class: String,
    pub nodes: Vec<GraphNode>,
    /// Rays in canonical (frame, detection) order.
    pub rays: Vec<Ray>,
    /// Node indices on each ray, sorted by distance from the ray origin.
    pub ray_nodes: Vec<Vec<usize>>,
    pairs: Vec<RayPair>,
}

/// Per-node triangulated and monocular distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDistances {
    pub tri: [f64; 2],
    pub mono: [Option<f64>; 2],
}

impl MrfGraph {
    /// Intersects every pair of rays from distinct frames and keeps crossings
    /// within `max_ray_distance` of both cameras.
    pub fn build(class: &str, rays: &[Ray], survey: &Survey, max_ray_distance: f64) -> Self {
        let mut rays = rays.to_vec();
        rays.sort_by_key(|r| (r.frame, r.detection));
        let mut nodes = Vec::new();
        for i in 0..rays.len() {
            for j in (i + 1)..rays.len() {
                let (ra, rb) = (&rays[i], &rays[j]);
                if ra.frame == rb.frame {
                    continue;
                }
                let Some(position) = intersect_rays(ra, rb) else {
                    continue;
                };
                let tri_dist = [
                    haversine_distance(ra.origin, position),
                    haversine_distance(rb.origin, position),
                ];
                if tri_dist.iter().any(|&d| !(d > 0.0 && d <= max_ray_distance)) {
                    continue;
                }
                let index = nodes.len();
                nodes.push(GraphNode {
                    index,
                    position,
                    rays: [i, j],
                    tri_dist,
                    mono_dist: [
                        survey.detections()[ra.detection].mono_depth,
                        survey.detections()[rb.detection].mono_depth,
                    ],
                    heights: NodeHeights::Unset,
                });
            }
        }
        Self::assemble(class, rays, nodes)
    }

    /// Builds the ray-to-node index and the shared-ray pairs for given nodes.
    pub(crate) fn assemble(class: &str, rays: Vec<Ray>, nodes: Vec<GraphNode>) -> Self {
        let mut ray_nodes = vec![Vec::new(); rays.len()];
        for node in &nodes {
            ray_nodes[node.rays[0]].push(node.index);
            ray_nodes[node.rays[1]].push(node.index);
        }
        for (r, list) in ray_nodes.iter_mut().enumerate() {
            let dist = |n: usize| {
                let node = &nodes[n];
                if node.rays[0] == r {
                    node.tri_dist[0]
                } else {
                    node.tri_dist[1]
                }
            };
            list.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        }

        let mut seen = HashSet::new();
        let mut pairs = Vec::new();
        for list in &ray_nodes {
            for (k, &m) in list.iter().enumerate() {
                for &n in &list[k + 1..] {
                    let (a, b) = (m.min(n), m.max(n));
                    if seen.insert((a, b)) {
                        let distance = haversine_distance(nodes[a].position, nodes[b].position);
                        pairs.push(RayPair { a, b, distance });
                    }
                }
            }
        }
        pairs.sort_by_key(|p| (p.a, p.b));

        Self {
            class: class.to_string(),
            nodes,
            rays,
            ray_nodes,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node pairs that share a ray, each listed once.
    pub fn pairs(&self) -> &[RayPair] {
        &self.pairs
    }

    pub fn node_distances(&self) -> Vec<NodeDistances> {
        self.nodes
            .iter()
            .map(|n| NodeDistances {
                tri: n.tri_dist,
                mono: n.mono_dist,
            })
            .collect()
    }

    /// u0 of an active node (negative).
    pub fn inclusion_reward(&self, node: usize, aggregation: U0Aggregation) -> f64 {
        let n = &self.nodes[node];
        let total: f64 = n
            .rays
            .iter()
            .map(|&r| 1.0 / self.ray_nodes[r].len() as f64)
            .sum();
        match aggregation {
            U0Aggregation::Sum => -total,
            U0Aggregation::Mean => -0.5 * total,
        }
    }

    /// Weighted unary cost of setting `node` active.
    pub fn unary_cost(&self, node: usize, weights: &MrfWeights) -> f64 {
        let n = &self.nodes[node];
        weights.alpha * self.inclusion_reward(node, weights.u0_aggregation)
            + weights.beta * n.depth_discrepancy()
            + weights.lambda * n.height_discrepancy()
    }

    pub fn energy(&self, labels: &[bool], weights: &MrfWeights) -> Result<f64> {
        if labels.len() != self.nodes.len() {
            return Err(Error::LabelLength {
                expected: self.nodes.len(),
                got: labels.len(),
            });
        }
        let unary: f64 = (0..self.nodes.len())
            .filter(|&i| labels[i])
            .map(|i| self.unary_cost(i, weights))
            .sum();
        let pairwise: f64 = self
            .pairs
            .iter()
            .filter(|p| labels[p.a] && labels[p.b])
            .map(|p| p.distance)
            .sum();
        Ok(unary + weights.pairwise() * pairwise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{destination, initial_bearing, CameraFrame, Detection};

    pub(crate) fn camera(id: &str, position: GeoPoint) -> CameraFrame {
        CameraFrame {
            image_id: id.into(),
            position,
            heading: 0.0,
            pitch: 0.0,
            fov: 170.0,
            width: 1000,
            height: 1000,
            fov_top: None,
            fov_bottom: None,
            camera_height: 2.0,
        }
    }

    /// Survey of cameras each looking straight at its target (heading = bearing).
    fn scene(cams: &[(GeoPoint, GeoPoint, Option<f64>)]) -> (Survey, Vec<Ray>) {
        let mut frames = Vec::new();
        let mut dets = Vec::new();
        for (k, (cam, target, depth)) in cams.iter().enumerate() {
            let id = format!("c{k}");
            let mut f = camera(&id, *cam);
            f.heading = initial_bearing(*cam, *target);
            frames.push(f);
            dets.push(Detection {
                image_id: id,
                class: "x".into(),
                pixel_x: 500.0,
                pixel_y: 500.0,
                mono_depth: *depth,
            });
        }
        let s = Survey::new(frames, dets).unwrap();
        let rays = s.rays_for_class("x");
        (s, rays)
    }

    fn base() -> GeoPoint {
        GeoPoint::new(53.34, -6.26).unwrap()
    }

    #[test]
    fn two_rays_one_node() {
        let obj = destination(base(), 0.0, 10.0);
        let (s, rays) = scene(&[(base(), obj, None), (destination(base(), 90.0, 10.0), obj, None)]);
        let g = MrfGraph::build("x", &rays, &s, 30.0);
        assert_eq!(g.len(), 1);
        assert_eq!(g.ray_nodes, vec![vec![0], vec![0]]);
        assert!(g.pairs().is_empty());
    }

    #[test]
    fn three_crossing_rays_three_nodes() {
        let obj = destination(base(), 0.0, 10.0);
        let cams = [base(), destination(base(), 90.0, 8.0), destination(base(), 270.0, 8.0)];
        let (s, rays) = scene(&cams.map(|c| (c, obj, None)));
        let g = MrfGraph::build("x", &rays, &s, 30.0);
        // Exhaustive oracle: every pair of rays from distinct frames crosses at obj.
        let mut expected = 0;
        for i in 0..3 {
            for j in i + 1..3 {
                if intersect_rays(&rays[i], &rays[j]).is_some() {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 3);
        assert_eq!(g.len(), 3);
        assert!(g.ray_nodes.iter().all(|l| l.len() == 2));
        for n in &g.nodes {
            assert!(haversine_distance(n.position, obj) < 1e-6);
        }
    }

    #[test]
    fn cutoff_excludes_far_crossings() {
        let obj = destination(base(), 0.0, 45.0);
        let (s, rays) = scene(&[(base(), obj, None), (destination(base(), 90.0, 10.0), obj, None)]);
        assert_eq!(MrfGraph::build("x", &rays, &s, 30.0).len(), 0);
        assert_eq!(MrfGraph::build("x", &rays, &s, 50.0).len(), 1);
    }

    #[test]
    fn empty_rays_empty_graph() {
        let s = Survey::default();
        let g = MrfGraph::build("x", &[], &s, 30.0);
        assert!(g.is_empty());
        assert_eq!(g.energy(&[], &MrfWeights::new(0.2, 0.2, 0.2).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn zero_labels_zero_energy_and_single_node_reward() {
        let obj = destination(base(), 0.0, 10.0);
        let (s, rays) = scene(&[(base(), obj, None), (destination(base(), 90.0, 10.0), obj, None)]);
        let mut g = MrfGraph::build("x", &rays, &s, 30.0);
        let w = MrfWeights::new(0.3, 0.2, 0.1).unwrap();
        assert_eq!(g.energy(&[false], &w).unwrap(), 0.0);
        g.nodes[0].heights = NodeHeights::Views([1.0, 1.0]);
        let e = g.energy(&[true], &w).unwrap();
        assert!((e - 0.3 * -2.0).abs() < 1e-15);
        let mean = w.with_aggregation(U0Aggregation::Mean);
        assert!((g.energy(&[true], &mean).unwrap() - 0.3 * -1.0).abs() < 1e-15);
        assert!(matches!(g.energy(&[true, false], &w), Err(Error::LabelLength { .. })));
    }

    #[test]
    fn pairwise_on_shared_ray() {
        // Ray from A crosses rays from B and C at points 5 m apart.
        let a = base();
        let p1 = destination(a, 0.0, 10.0);
        let p2 = destination(a, 0.0, 15.0);
        let b = destination(a, 90.0, 10.0);
        let c = destination(a, 270.0, 10.0);
        let (s, rays) = scene(&[(a, p1, None), (b, p1, None), (c, p2, None)]);
        let g = MrfGraph::build("x", &rays, &s, 30.0);
        // A×B at p1, A×C at p2, B×C somewhere else (or not at all).
        let on_a = &g.ray_nodes[0];
        assert_eq!(on_a.len(), 2);
        let w = MrfWeights::new(0.0, 0.0, 0.0).unwrap();
        let mut z = vec![false; g.len()];
        z[on_a[0]] = true;
        z[on_a[1]] = true;
        let e = g.energy(&z, &w).unwrap();
        assert!((e - 5.0).abs() < 1e-6, "{e}");
        let d0 = g.nodes[on_a[0]].tri_dist[0];
        let d1 = g.nodes[on_a[1]].tri_dist[0];
        assert!(d0 < d1);
    }

    #[test]
    fn depth_discrepancy_examples() {
        let obj = destination(base(), 0.0, 10.0);
        let west = destination(base(), 90.0, 10.0);
        let exact = haversine_distance(west, obj);
        let (s, rays) = scene(&[(base(), obj, Some(10.0)), (west, obj, Some(exact))]);
        let g = MrfGraph::build("x", &rays, &s, 30.0);
        assert!(g.nodes[0].depth_discrepancy() < 1e-6);

        let mut n = g.nodes[0].clone();
        n.tri_dist = [10.0, 10.0];
        n.mono_dist = [Some(12.0), Some(9.0)];
        assert_eq!(n.depth_discrepancy(), 3.0);
        n.mono_dist = [None, Some(10.0)];
        assert_eq!(n.depth_discrepancy(), 0.0);
        let table = g.node_distances();
        assert_eq!(table[0].mono, [Some(10.0), Some(exact)]);
    }

    #[test]
    fn weights_validation() {
        assert!(MrfWeights::new(0.5, 0.5, 0.5).is_err());
        assert!(MrfWeights::new(1.0, 0.0, 0.0).is_err());
        assert!(MrfWeights::new(-0.1, 0.0, 0.0).is_err());
        let w = MrfWeights::new(0.4, 0.3, 0.3).unwrap();
        assert!(w.pairwise().abs() < 1e-12);
    }
}
