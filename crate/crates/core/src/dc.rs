//! Parallel divide-and-conquer Delaunay triangulation.
//!
//! A subproblem with at least `base_case` points is divided into parts, the
//! parts are triangulated independently, and the simplices whose
//! circumspheres reach another part are collected as the border. The border
//! vertices are triangulated on their own and the result is stitched into
//! the partial triangulations in place of the border simplices.
//!
//! With [`Strategy::Kway`] a subproblem is divided once into `k` parts which
//! are triangulated sequentially. With [`Strategy::Bisect`] it is halved and
//! each half is solved recursively with `k / 2`, giving `k - 1` merges.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::border::{cell_edge_length, BorderQuery, GridIndex, IntersectionPolicy};
use crate::error::{Error, Result};
use crate::geometry::{Halfspace, PointSet, MAX_DIM};
use crate::partition::{cyclic_partition_ids, partition_ids, PartitionConfig, Partitioning, SampleRule, WeightFn};
use crate::seq::triangulate_ids;
use crate::triangulation::{Location, SimplexId, Triangulation, NONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Kway,
    Bisect,
}

/// How a subproblem is split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divider {
    /// Partition a triangulated random sample; `k` and the seed are set per
    /// subproblem by the engine.
    Sample {
        sample_rule: SampleRule,
        weight_fn: WeightFn,
        epsilon: f64,
    },
    /// Median splits along cycling dimensions.
    Cyclic,
}

impl Default for Divider {
    fn default() -> Self {
        Divider::Sample {
            sample_rule: SampleRule::SqrtN,
            weight_fn: WeightFn::Logarithmic,
            epsilon: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcConfig {
    /// Subproblems smaller than this are triangulated sequentially.
    pub base_case: usize,
    pub strategy: Strategy,
    pub divider: Divider,
    pub policy: IntersectionPolicy,
    pub k: usize,
    pub threads: usize,
    pub seed: u64,
    /// Keep the border vertex ids of every merge step in the report.
    pub record_borders: bool,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            base_case: 10_000,
            strategy: Strategy::Kway,
            divider: Divider::default(),
            policy: IntersectionPolicy::Grid(1.0),
            k: 4,
            threads: 1,
            seed: 1,
            record_borders: false,
        }
    }
}

impl DcConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.base_case < dim + 2 {
            return Err(Error::InvalidConfig(format!(
                "base case {} below D + 2",
                self.base_case
            )));
        }
        if self.k == 0 || self.threads == 0 {
            return Err(Error::InvalidConfig("k and threads must be positive".into()));
        }
        let needs_pow2 = self.strategy == Strategy::Bisect || self.divider == Divider::Cyclic;
        if needs_pow2 && !self.k.is_power_of_two() {
            return Err(Error::KNotPowerOfTwo(self.k));
        }
        if self.policy.cell_factor() <= 0.0 {
            return Err(Error::InvalidConfig("cell size factor must be positive".into()));
        }
        if let Divider::Sample {
            sample_rule,
            epsilon,
            ..
        } = self.divider
        {
            sample_rule.validate()?;
            if !(epsilon > 0.0 && epsilon <= 1.0) {
                return Err(Error::InvalidConfig(format!("epsilon {epsilon}")));
            }
        }
        Ok(())
    }
}

/// One divide/merge step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MergeStep {
    /// Position in the recursion: `""` for the top level, then `0`/`1` per
    /// bisection level and `b` for border triangulations.
    pub path: String,
    pub points: usize,
    pub parts: usize,
    pub part_sizes: Vec<usize>,
    pub sample_size: usize,
    pub cut_weight: u64,
    pub border_simplices: usize,
    pub border_vertices: usize,
    pub border_ids: Option<Vec<u32>>,
    /// Whether the border was triangulated by a recursive call.
    pub recursive_border: bool,
}

/// Wall time per phase of the top-level step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub divide: Duration,
    pub partial: Duration,
    pub border_detect: Duration,
    pub border_dt: Duration,
    pub merge: Duration,
    pub repair: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DcReport {
    /// Merge steps of the main recursion, ordered by path.
    pub merges: Vec<MergeStep>,
    /// Merge steps performed inside recursive border triangulations.
    pub border_merges: Vec<MergeStep>,
    /// Subproblems that fell back to the sequential algorithm.
    pub fallbacks: usize,
    pub warnings: Vec<String>,
    pub times: PhaseTimes,
    /// `(path, size)` of every part triangulated sequentially in the main
    /// recursion.
    pub leaves: Vec<(String, usize)>,
}

impl DcReport {
    /// Sizes of the parts of the top-level division (empty for the base
    /// case).
    pub fn top_part_sizes(&self) -> &[usize] {
        self.merges
            .iter()
            .find(|m| m.path.is_empty())
            .map_or(&[], |m| m.part_sizes.as_slice())
    }

    /// Sizes of the final partitions in recursion order.
    pub fn partition_sizes(&self) -> Vec<usize> {
        self.leaves.iter().map(|l| l.1).collect()
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.merges.iter().map(|m| m.sample_size).collect()
    }

    pub fn border_vertex_counts(&self) -> Vec<usize> {
        self.merges.iter().map(|m| m.border_vertices).collect()
    }

    fn absorb(&mut self, other: DcReport, border: bool) {
        if border {
            self.border_merges.extend(other.merges);
        } else {
            self.merges.extend(other.merges);
            self.leaves.extend(other.leaves);
        }
        self.border_merges.extend(other.border_merges);
        self.fallbacks += other.fallbacks;
        self.warnings.extend(other.warnings);
    }
}

/// Border simplices of each partial triangulation and their vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BorderSet {
    pub simplices: Vec<Vec<SimplexId>>,
    pub vertex_ids: Vec<u32>,
}

/// Triangulates all points with the divide-and-conquer algorithm.
pub fn delaunay_dc(points: &PointSet, config: &DcConfig) -> Result<Triangulation> {
    delaunay_dc_report(points, config).map(|(t, _)| t)
}

pub fn delaunay_dc_report(points: &PointSet, config: &DcConfig) -> Result<(Triangulation, DcReport)> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    delaunay_dc_ids(points, &ids, config)
}

/// Triangulates the subset `ids`.
pub fn delaunay_dc_ids(
    points: &PointSet,
    ids: &[u32],
    config: &DcConfig,
) -> Result<(Triangulation, DcReport)> {
    config.validate(points.dim())?;
    if ids.len() < points.dim() + 2 {
        return Err(Error::InvalidPoints(format!(
            "{} points, need at least {}",
            ids.len(),
            points.dim() + 2
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let engine = Engine { points, config };
    let start = Instant::now();
    let (t, mut report) = pool.install(|| engine.solve(ids, config.k, String::new(), 0, true))?;
    report.times.total = start.elapsed();
    report.merges.sort_by(|a, b| a.path.cmp(&b.path));
    report.border_merges.sort_by(|a, b| a.path.cmp(&b.path));
    if report.leaves.is_empty() {
        report.leaves.push((String::new(), ids.len()));
    }
    Ok((t, report))
}

struct Engine<'a> {
    points: &'a PointSet,
    config: &'a DcConfig,
}

/// Seed for a recursion path, independent of thread scheduling.
fn derive_seed(seed: u64, path: &str, salt: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15 ^ salt.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    for b in path.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    h
}

impl Engine<'_> {
    fn base(&self, ids: &[u32], path: &str) -> Result<Triangulation> {
        triangulate_ids(self.points, ids, derive_seed(self.config.seed, path, 1))
    }

    fn solve(
        &self,
        ids: &[u32],
        k: usize,
        path: String,
        depth: usize,
        top: bool,
    ) -> Result<(Triangulation, DcReport)> {
        let mut report = DcReport::default();
        if ids.len() < self.config.base_case || k <= 1 {
            report.leaves.push((path.clone(), ids.len()));
            return Ok((self.base(ids, &path)?, report));
        }
        let timer = Instant::now();
        let parts_k = match self.config.strategy {
            Strategy::Kway => k,
            Strategy::Bisect => 2,
        };

        let mut partitioning = match self.divide(ids, parts_k, &path, depth) {
            Ok(p) => p,
            Err(Error::Io(e)) => return Err(Error::Io(e)),
            Err(e) => {
                report.fallbacks += 1;
                report.warnings.push(format!("{path:?}: divide failed ({e}), sequential fallback"));
                report.leaves.push((path.clone(), ids.len()));
                return Ok((self.base(ids, &path)?, report));
            }
        };
        report.warnings.append(&mut partitioning.warnings);
        if partitioning.parts.iter().any(Vec::is_empty) {
            let before = partitioning.parts.len();
            partitioning.parts.retain(|p| !p.is_empty());
            report.warnings.push(format!(
                "{path:?}: {} empty parts dropped, k' = {}",
                before - partitioning.parts.len(),
                partitioning.parts.len()
            ));
        }
        let parts = &partitioning.parts;
        let t_divide = timer.elapsed();

        let timer = Instant::now();
        let partials: Vec<Result<(Triangulation, DcReport)>> = match self.config.strategy {
            Strategy::Kway => parts
                .par_iter()
                .enumerate()
                .map(|(j, part)| {
                    let sub = format!("{path}{j}");
                    let t = self.base(part, &sub).or_else(degenerate_to_empty(self.points))?;
                    let rep = DcReport {
                        leaves: vec![(sub, part.len())],
                        ..Default::default()
                    };
                    Ok((t, rep))
                })
                .collect(),
            Strategy::Bisect => {
                let sub_k = k / 2;
                let (a, b) = rayon::join(
                    || self.solve(&parts[0], sub_k, format!("{path}0"), depth + 1, false),
                    || self.solve(&parts[1], sub_k, format!("{path}1"), depth + 1, false),
                );
                vec![a, b]
            }
        };
        let mut triangulations = Vec::with_capacity(partials.len());
        for (j, r) in partials.into_iter().enumerate() {
            let (t, rep) = match r {
                Ok(x) => x,
                Err(Error::DegenerateInput) => {
                    let rep = DcReport {
                        leaves: vec![(format!("{path}{j}"), parts[j].len())],
                        ..Default::default()
                    };
                    (Triangulation::new(self.points.dim()), rep)
                }
                Err(e) => return Err(e),
            };
            report.absorb(rep, false);
            triangulations.push(t);
        }
        let t_partial = timer.elapsed();

        let timer = Instant::now();
        let dim = self.points.dim();
        let bbox = self.points.bounding_box_of(ids);
        let edge = cell_edge_length(&bbox, dim, ids.len(), self.config.policy.cell_factor());
        let origin = &bbox.lo[..dim];
        let indices: Vec<GridIndex> = parts
            .par_iter()
            .map(|part| GridIndex::build(self.points, part, origin, edge))
            .collect();
        let border = find_border(self.points, &triangulations, parts, &indices, self.config.policy);
        let t_border = timer.elapsed();

        let timer = Instant::now();
        let n_border = border.vertex_ids.len();
        let recurse = n_border >= self.config.base_case && 4 * n_border <= 3 * ids.len();
        let t_b = if recurse {
            self.solve(&border.vertex_ids, k, format!("{path}b"), depth, false)
        } else {
            self.base(&border.vertex_ids, &format!("{path}b")).map(|t| (t, DcReport::default()))
        };
        let (t_b, rep_b) = match t_b {
            Ok(x) => x,
            Err(Error::DegenerateInput) => {
                report.fallbacks += 1;
                report
                    .warnings
                    .push(format!("{path:?}: degenerate border, sequential fallback"));
                report.leaves.retain(|l| !l.0.starts_with(path.as_str()));
                report.leaves.push((path.clone(), ids.len()));
                return Ok((self.base(ids, &path)?, report));
            }
            Err(e) => return Err(e),
        };
        report.absorb(rep_b, true);
        let t_border_dt = timer.elapsed();

        let (merged, t_merge, t_repair) = merge(self.points, triangulations, &border, &t_b, parts)?;

        let step = MergeStep {
            path: path.clone(),
            points: ids.len(),
            parts: parts.len(),
            part_sizes: parts.iter().map(Vec::len).collect(),
            sample_size: partitioning.sample_point_ids.len(),
            cut_weight: partitioning.cut_weight,
            border_simplices: border.simplices.iter().map(Vec::len).sum(),
            border_vertices: n_border,
            border_ids: self.config.record_borders.then(|| border.vertex_ids.clone()),
            recursive_border: recurse,
        };
        report.merges.push(step);
        if top {
            report.times = PhaseTimes {
                divide: t_divide,
                partial: t_partial,
                border_detect: t_border,
                border_dt: t_border_dt,
                merge: t_merge,
                repair: t_repair,
                total: Duration::ZERO,
            };
        }
        Ok((merged, report))
    }

    fn divide(&self, ids: &[u32], k: usize, path: &str, depth: usize) -> Result<Partitioning> {
        match self.config.divider {
            Divider::Sample {
                sample_rule,
                weight_fn,
                epsilon,
            } => {
                let cfg = PartitionConfig {
                    sample_rule,
                    weight_fn,
                    k,
                    epsilon,
                    seed: derive_seed(self.config.seed, path, 2),
                };
                partition_ids(self.points, ids, &cfg)
            }
            Divider::Cyclic => cyclic_partition_ids(self.points, ids, k, depth),
        }
    }
}

fn degenerate_to_empty(points: &PointSet) -> impl Fn(Error) -> Result<Triangulation> + '_ {
    move |e| match e {
        // too few or affinely dependent points: every point becomes a border
        // vertex, see `find_border`
        Error::DegenerateInput => Ok(Triangulation::new(points.dim())),
        e => Err(e),
    }
}

/// Breadth-first search from the hull of every partial triangulation. A
/// simplex joins the border when its circumsphere (outer halfspace for
/// infinite simplices) reaches another partition under `policy`; only
/// border simplices propagate the search to their neighbors. Once the
/// search runs dry it is restarted from the simplices containing points of
/// other partitions that lie in the partition's bounding box.
///
/// Points of partitions that produced no triangulation are border vertices.
pub fn find_border(
    points: &PointSet,
    partials: &[Triangulation],
    parts: &[Vec<u32>],
    indices: &[GridIndex],
    policy: IntersectionPolicy,
) -> BorderSet {
    let simplices: Vec<Vec<SimplexId>> = partials
        .par_iter()
        .enumerate()
        .map(|(i, t)| border_bfs(points, t, i, indices, policy))
        .collect();
    let dim = points.dim();
    let mut vertex_ids = Vec::new();
    for (i, t) in partials.iter().enumerate() {
        if t.is_empty() {
            vertex_ids.extend_from_slice(&parts[i]);
        }
        for &s in &simplices[i] {
            vertex_ids.extend(t.simplex(s).vertices(dim).iter().copied().filter(|&v| v != NONE));
        }
    }
    vertex_ids.sort_unstable();
    vertex_ids.dedup();
    BorderSet {
        simplices,
        vertex_ids,
    }
}

fn border_bfs(
    points: &PointSet,
    t: &Triangulation,
    own: usize,
    indices: &[GridIndex],
    policy: IntersectionPolicy,
) -> Vec<SimplexId> {
    let dim = t.dim();
    let mut marked = vec![false; t.capacity()];
    let mut queue: Vec<SimplexId> = t.hull_simplices();
    for &s in &queue {
        marked[s as usize] = true;
    }
    let mut border = Vec::new();
    let mut head = 0;
    let mut seeded = false;
    loop {
        while head < queue.len() {
            let sid = queue[head];
            head += 1;
            let s = t.simplex(sid);
            let mut coords: [&[f64]; MAX_DIM + 1] = [&[]; MAX_DIM + 1];
            let positive = if s.is_infinite(dim) {
                for (c, &v) in coords.iter_mut().zip(&s.vertices[..dim]) {
                    *c = points.point(v);
                }
                let q = BorderQuery::Halfspace(Halfspace {
                    facet: &coords[..dim],
                    outer_sign: s.sign(),
                });
                reaches_other(points, own, indices, policy, &q)
            } else {
                for (c, &v) in coords.iter_mut().zip(&s.vertices[..=dim]) {
                    *c = points.point(v);
                }
                let q = BorderQuery::simplex(&coords[..=dim], s.sign());
                reaches_other(points, own, indices, policy, &q)
            };
            if !positive {
                continue;
            }
            border.push(sid);
            for &n in &s.neighbors[..=dim] {
                if n != NONE && !marked[n as usize] && t.is_alive(n) {
                    marked[n as usize] = true;
                    queue.push(n);
                }
            }
        }
        if seeded {
            break;
        }
        seeded = true;
        // The conflict region of a foreign point inside the hull need not
        // connect to the hull. The simplex containing the point is always
        // in conflict with it, so it restarts the search there.
        let own_box = *indices[own].root_box();
        let Some(mut cursor) = t.finite().next().map(|(id, _)| id) else {
            break;
        };
        for (j, idx) in indices.iter().enumerate() {
            if j == own || !idx.root_box().overlaps(&own_box) {
                continue;
            }
            for (cell, ids) in idx.cells() {
                if !cell.overlaps(&own_box) {
                    continue;
                }
                for &q in ids {
                    let qc = points.point(q);
                    if !own_box.contains(qc) {
                        continue;
                    }
                    match t.locate(points, cursor, qc) {
                        Location::Inside(s) => {
                            cursor = s;
                            if !marked[s as usize] {
                                marked[s as usize] = true;
                                queue.push(s);
                            }
                        }
                        Location::Outside(s) => cursor = s,
                    }
                }
            }
        }
    }
    border.sort_unstable();
    border
}

fn reaches_other(
    points: &PointSet,
    own: usize,
    indices: &[GridIndex],
    policy: IntersectionPolicy,
    q: &BorderQuery<'_>,
) -> bool {
    indices
        .iter()
        .enumerate()
        .any(|(j, idx)| j != own && idx.intersects_bbox(q) && idx.intersects(policy, q, points))
}

/// Stitches the partial triangulations and the border triangulation `t_b`.
///
/// Partial simplices that are not border simplices are kept, infinite ones
/// are dropped. A finite simplex of `t_b` is inserted if its vertices lie in
/// at least two partitions, or if it has exactly the vertex set of a border
/// simplex. Links are then repaired and the hull is closed again. Returns
/// the merged triangulation and the merge and repair times.
pub fn merge(
    points: &PointSet,
    partials: Vec<Triangulation>,
    border: &BorderSet,
    t_b: &Triangulation,
    parts: &[Vec<u32>],
) -> Result<(Triangulation, Duration, Duration)> {
    let timer = Instant::now();
    let dim = points.dim();
    let mut replaced: FxHashSet<[u32; 4]> = FxHashSet::default();
    for (t, ids) in partials.iter().zip(&border.simplices) {
        for &s in ids {
            let s = t.simplex(s);
            if !s.is_infinite(dim) {
                replaced.insert(s.vertices);
            }
        }
    }
    let mut label: FxHashMap<u32, u32> = FxHashMap::default();
    label.reserve(border.vertex_ids.len());
    for (j, part) in parts.iter().enumerate() {
        for &v in part {
            if border.vertex_ids.binary_search(&v).is_ok() {
                label.insert(v, j as u32);
            }
        }
    }

    let mut out = Triangulation::new(dim);
    let mut queue = Vec::new();
    for (j, (t, ids)) in partials.into_iter().zip(&border.simplices).enumerate() {
        let offset = out.append(t);
        for &s in ids {
            let id = s + offset;
            if out.is_alive(id) {
                out.kill(id);
            }
        }
        let end = out.capacity() as SimplexId;
        for id in offset..end {
            let s = out.simplex_mut(id);
            s.origin = j as u32;
            if s.alive && s.is_infinite(dim) {
                out.kill(id);
            }
        }
    }
    // clear links into killed simplices before their slots are reused
    for id in 0..out.capacity() as SimplexId {
        if !out.is_alive(id) {
            continue;
        }
        let mut open = false;
        for d in 0..=dim {
            let n = out.simplex(id).neighbors[d];
            if !out.is_alive(n) {
                out.simplex_mut(id).neighbors[d] = NONE;
                open = true;
            }
        }
        if open {
            queue.push(id);
        }
    }

    let inserted: Vec<_> = t_b
        .finite()
        .collect::<Vec<_>>()
        .par_iter()
        .filter(|(_, s)| {
            let vs = s.vertices(dim);
            let first = label[&vs[0]];
            vs[1..].iter().any(|v| label[v] != first) || replaced.contains(&s.vertices)
        })
        .map(|(_, s)| **s)
        .collect();
    for mut s in inserted {
        s.neighbors = [NONE; 4];
        s.border = false;
        s.origin = NONE;
        queue.push(out.push(s));
    }
    let t_merge = timer.elapsed();

    let timer = Instant::now();
    out.update_neighbors(&queue, true)?;
    out.compact();
    Ok((out, t_merge, timer.elapsed()))
}
