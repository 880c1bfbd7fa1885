//! Splitting a point set into `k` parts.
//!
//! The sample divider triangulates a small random sample, turns the sample
//! triangulation into a weighted graph, partitions the graph and hands every
//! input point the label of its nearest sample point. The cyclic divider
//! splits at coordinate medians instead.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::graph::{self, SampleGraph};
use crate::seq::triangulate_ids;
use crate::triangulation::Triangulation;

/// Number of sample points drawn from `n` input points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRule {
    SqrtN,
    LogN,
    Fraction(f64),
}

impl SampleRule {
    /// Raw sample size before clamping.
    pub fn size(&self, n: usize) -> usize {
        let n_f = n as f64;
        let s = match *self {
            SampleRule::SqrtN => n_f.sqrt(),
            SampleRule::LogN => n_f.max(1.0).ln(),
            SampleRule::Fraction(f) => f * n_f,
        };
        s.round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SampleRule::Fraction(f) if !(f > 0.0 && f <= 0.5) => Err(Error::InvalidConfig(
                format!("sample fraction {f} outside (0, 0.5]"),
            )),
            _ => Ok(()),
        }
    }
}

/// Edge weight as a function of the normalised edge length `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFn {
    Constant,
    Inverse,
    Logarithmic,
    Linear,
}

impl WeightFn {
    /// Real-valued weight of an edge of normalised length `d`, clamped to
    /// `[1e-12, 1]` first.
    pub fn raw(&self, d: f64) -> f64 {
        let d = d.clamp(1e-12, 1.0);
        match self {
            WeightFn::Constant => 1.0,
            WeightFn::Inverse => 1.0 / d,
            WeightFn::Logarithmic => -d.ln(),
            WeightFn::Linear => 1.0 - d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub sample_rule: SampleRule,
    pub weight_fn: WeightFn,
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            sample_rule: SampleRule::SqrtN,
            weight_fn: WeightFn::Logarithmic,
            k: 2,
            epsilon: 0.05,
            seed: 1,
        }
    }
}

/// Labels of a set of input points.
///
/// `labels[i]` belongs to the `i`-th id of the partitioned id list;
/// `parts[j]` holds the (global) ids labelled `j` in ascending order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partitioning {
    pub labels: Vec<u32>,
    pub parts: Vec<Vec<u32>>,
    pub sample_point_ids: Vec<u32>,
    pub sample_labels: Vec<u32>,
    pub cut_weight: u64,
    pub warnings: Vec<String>,
}

impl Partitioning {
    fn from_labels(ids: &[u32], labels: Vec<u32>, k: usize) -> Partitioning {
        let mut parts = vec![Vec::new(); k];
        for (&id, &l) in ids.iter().zip(&labels) {
            parts[l as usize].push(id);
        }
        for p in &mut parts {
            p.sort_unstable();
        }
        Partitioning {
            labels,
            parts,
            ..Default::default()
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.parts.iter().map(Vec::len).collect()
    }
}

/// Draws `rule.size(n)` distinct ids uniformly, clamped to `[D + 2, n]`.
/// Returns ascending ids and a warning when clamping was needed.
pub fn draw_sample(
    points: &PointSet,
    ids: &[u32],
    rule: SampleRule,
    seed: u64,
) -> (Vec<u32>, Option<String>) {
    draw_sample_at_least(ids, rule, points.dim() + 2, seed)
}

fn draw_sample_at_least(
    ids: &[u32],
    rule: SampleRule,
    min: usize,
    seed: u64,
) -> (Vec<u32>, Option<String>) {
    let n = ids.len();
    let raw = rule.size(n);
    let m = raw.max(min).min(n);
    let warning = (m != raw).then(|| format!("sample size {raw} clamped to {m}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample: Vec<u32> = index::sample(&mut rng, n, m)
        .into_iter()
        .map(|i| ids[i])
        .collect();
    sample.sort_unstable();
    (sample, warning)
}

/// Real edge weight `r` of the edge `v`–`w` for the maximal diagonal
/// `d_star` of the sample bounding box.
pub fn edge_weight(v: &[f64], w: &[f64], weight_fn: WeightFn, d_star: f64) -> f64 {
    let dist = v.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    weight_fn.raw(dist / d_star)
}

/// Affine map of real weights onto integers in `[1, 1000]`.
pub fn scale_weights(raw: &[f64]) -> Vec<u32> {
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    raw.iter()
        .map(|&r| {
            if hi > lo {
                (1.0 + 999.0 * (r - lo) / (hi - lo)).round() as u32
            } else {
                1
            }
        })
        .collect()
}

/// Distinct finite edges of `t` as ascending id pairs.
pub fn triangulation_edges(t: &Triangulation) -> Vec<(u32, u32)> {
    let dim = t.dim();
    let mut edges = Vec::with_capacity(t.live_count() * 3);
    for (_, s) in t.finite() {
        let v = s.vertices(dim);
        for i in 0..=dim {
            for j in i + 1..=dim {
                edges.push((v[i], v[j]));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Weighted graph over the sample: vertex `i` is `sample[i]`, one edge per
/// distinct finite edge of `t` (a triangulation of the sample).
pub fn build_sample_graph(
    t: &Triangulation,
    points: &PointSet,
    sample: &[u32],
    weight_fn: WeightFn,
) -> Result<SampleGraph> {
    let local = |id: u32| sample.binary_search(&id).expect("edge endpoint in sample") as u32;
    let d_star = points.bounding_box_of(sample).diagonal();
    let d_star = if d_star > 0.0 { d_star } else { 1.0 };
    let edges = triangulation_edges(t);
    let raw: Vec<f64> = edges
        .iter()
        .map(|&(a, b)| edge_weight(points.point(a), points.point(b), weight_fn, d_star))
        .collect();
    let weights = scale_weights(&raw);
    let list: Vec<(u32, u32, u32)> = edges
        .iter()
        .zip(&weights)
        .map(|(&(a, b), &w)| (local(a), local(b), w))
        .collect();
    let coords = sample.iter().flat_map(|&i| points.point(i).iter().copied()).collect();
    Ok(SampleGraph::from_edges(sample.len(), &list)?.with_coords(coords))
}

/// Nearest-neighbor kd-tree over a set of point ids.
pub struct KdTree<'a> {
    points: &'a PointSet,
    nodes: Vec<KdNode>,
}

#[derive(Clone, Copy, Debug)]
struct KdNode {
    id: u32,
    axis: u8,
    left: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;

impl<'a> KdTree<'a> {
    pub fn new(points: &'a PointSet, ids: &[u32]) -> KdTree<'a> {
        let mut ids = ids.to_vec();
        let mut tree = KdTree {
            points,
            nodes: Vec::with_capacity(ids.len()),
        };
        tree.build(&mut ids);
        tree
    }

    fn build(&mut self, ids: &mut [u32]) -> u32 {
        if ids.is_empty() {
            return LEAF;
        }
        let dim = self.points.dim();
        let bbox = self.points.bounding_box_of(ids);
        let axis = bbox.longest_axis(dim);
        let mid = ids.len() / 2;
        let pts = self.points;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            pts.point(a)[axis].total_cmp(&pts.point(b)[axis]).then(a.cmp(&b))
        });
        let at = self.nodes.len() as u32;
        self.nodes.push(KdNode {
            id: ids[mid],
            axis: axis as u8,
            left: LEAF,
            right: LEAF,
        });
        let (lo, rest) = ids.split_at_mut(mid);
        let left = self.build(lo);
        let right = self.build(&mut rest[1..]);
        self.nodes[at as usize].left = left;
        self.nodes[at as usize].right = right;
        at
    }

    /// Id of the point nearest to `q`; equal distances go to the lowest id.
    pub fn nearest(&self, q: &[f64]) -> Option<u32> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u32::MAX);
        self.search(0, q, &mut best);
        Some(best.1)
    }

    fn search(&self, node: u32, q: &[f64], best: &mut (f64, u32)) {
        let n = self.nodes[node as usize];
        let p = self.points.point(n.id);
        let d2 = distance_squared(p, q);
        if (d2, n.id) < *best {
            *best = (d2, n.id);
        }
        let axis = n.axis as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if near != LEAF {
            self.search(near, q, best);
        }
        // equal distances must still be explored for the id tie-break
        if far != LEAF && diff * diff <= best.0 {
            self.search(far, q, best);
        }
    }
}

#[inline]
pub fn distance_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Labels every point of `ids` with the label of its nearest sample point.
/// `sample` must be sorted and `sample_labels[i]` belongs to `sample[i]`.
pub fn assign_points(
    points: &PointSet,
    ids: &[u32],
    sample: &[u32],
    sample_labels: &[u32],
    k: usize,
) -> Partitioning {
    let tree = KdTree::new(points, sample);
    let labels: Vec<u32> = ids
        .par_iter()
        .with_min_len(1024)
        .map(|&id| {
            let nn = tree.nearest(points.point(id)).expect("non-empty sample");
            sample_labels[sample.binary_search(&nn).expect("sample id")]
        })
        .collect();
    let mut p = Partitioning::from_labels(ids, labels, k);
    p.sample_point_ids = sample.to_vec();
    p.sample_labels = sample_labels.to_vec();
    p
}

/// Sample-based partitioning of all points of `points`.
pub fn partition_points(points: &PointSet, config: &PartitionConfig) -> Result<Partitioning> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    partition_ids(points, &ids, config)
}

/// Sample-based partitioning of the subset `ids`.
pub fn partition_ids(points: &PointSet, ids: &[u32], config: &PartitionConfig) -> Result<Partitioning> {
    config.sample_rule.validate()?;
    let k = config.k;
    if k == 0 {
        return Err(Error::InvalidConfig("k = 0".into()));
    }
    if k == 1 {
        return Ok(Partitioning::from_labels(ids, vec![0; ids.len()], 1));
    }
    let dim = points.dim();
    if ids.len() < k * (dim + 2) {
        return Err(Error::InfeasibleBalance {
            vertices: ids.len(),
            k,
        });
    }
    let (sample, warning) =
        draw_sample_at_least(ids, config.sample_rule, (dim + 2).max(k), config.seed);
    let t = triangulate_ids(points, &sample, config.seed ^ 0x5a5a)?;
    let g = build_sample_graph(&t, points, &sample, config.weight_fn)?;
    let gp = graph::partition(&g, k, config.epsilon, config.seed)?;
    let mut p = assign_points(points, ids, &sample, &gp.labels, k);
    p.cut_weight = graph::cut_weight(&g, &gp.labels);
    p.warnings.extend(warning);
    for (j, part) in p.parts.iter().enumerate() {
        if part.is_empty() {
            p.warnings.push(format!("part {j} is empty"));
        }
    }
    Ok(p)
}

/// Recursive median bisection of all points, splitting along dimension
/// `depth mod D`.
pub fn cyclic_partition(points: &PointSet, k: usize) -> Result<Partitioning> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    cyclic_partition_ids(points, &ids, k, 0)
}

/// Cyclic median bisection of `ids` starting at recursion depth
/// `first_depth`.
pub fn cyclic_partition_ids(
    points: &PointSet,
    ids: &[u32],
    k: usize,
    first_depth: usize,
) -> Result<Partitioning> {
    if !k.is_power_of_two() {
        return Err(Error::KNotPowerOfTwo(k));
    }
    let mut work = ids.to_vec();
    let mut label_of = vec![0u32; work.len()];
    let mut ranges = vec![(0usize, work.len(), 0u32)];
    let mut depth = first_depth;
    let mut parts_now = 1;
    while parts_now < k {
        let axis = depth % points.dim();
        let mut next = Vec::with_capacity(ranges.len() * 2);
        for &(lo, hi, label) in &ranges {
            let slice = &mut work[lo..hi];
            let mid = slice.len() / 2;
            if mid < slice.len() {
                slice.select_nth_unstable_by(mid, |&a, &b| {
                    points.point(a)[axis]
                        .total_cmp(&points.point(b)[axis])
                        .then(a.cmp(&b))
                });
            }
            next.push((lo, lo + mid, label * 2));
            next.push((lo + mid, hi, label * 2 + 1));
        }
        ranges = next;
        parts_now *= 2;
        depth += 1;
    }
    let mut position = rustc_hash::FxHashMap::default();
    for (i, &id) in ids.iter().enumerate() {
        position.insert(id, i);
    }
    for &(lo, hi, label) in &ranges {
        for &id in &work[lo..hi] {
            label_of[position[&id]] = label;
        }
    }
    Ok(Partitioning::from_labels(ids, label_of, k))
}
