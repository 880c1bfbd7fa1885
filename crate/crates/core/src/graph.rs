//! Balanced k-way graph partitioning.
//!
//! Multilevel recursive bisection: heavy-edge matching coarsens the graph to
//! at most `max(30 k, COARSEST_SIZE)` vertices, greedy graph growing seeds a
//! bisection, and boundary Fiduccia–Mattheyses passes refine it on every
//! level on the way back up. Each bisection is given a window on its left
//! side weight chosen so that the final parts satisfy
//! `|V_i| <= (1 + eps) * ceil(|V| / k)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Lower bound on the coarsest level size.
pub const COARSEST_SIZE: usize = 200;

/// Undirected graph with positive integer edge weights in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGraph {
    xadj: Vec<usize>,
    adjncy: Vec<u32>,
    adjwgt: Vec<u32>,
    vertex_coords: Option<Vec<f64>>,
}

impl SampleGraph {
    /// Builds a graph from undirected edges `(u, v, weight)`. Parallel edges
    /// are merged keeping the larger weight; self loops are dropped.
    pub fn from_edges(vertex_count: usize, edges: &[(u32, u32, u32)]) -> Result<SampleGraph> {
        let mut both: Vec<(u32, u32, u32)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            if u as usize >= vertex_count || v as usize >= vertex_count {
                return Err(Error::InvalidConfig(format!("edge ({u}, {v}) out of range")));
            }
            if w == 0 {
                return Err(Error::InvalidConfig(format!("edge ({u}, {v}) has weight 0")));
            }
            if u != v {
                both.push((u, v, w));
                both.push((v, u, w));
            }
        }
        both.sort_unstable();
        both.dedup_by(|b, a| {
            if a.0 == b.0 && a.1 == b.1 {
                a.2 = a.2.max(b.2);
                true
            } else {
                false
            }
        });
        let mut xadj = vec![0; vertex_count + 1];
        for &(u, _, _) in &both {
            xadj[u as usize + 1] += 1;
        }
        for i in 0..vertex_count {
            xadj[i + 1] += xadj[i];
        }
        Ok(SampleGraph {
            xadj,
            adjncy: both.iter().map(|e| e.1).collect(),
            adjwgt: both.iter().map(|e| e.2).collect(),
            vertex_coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<f64>) -> SampleGraph {
        self.vertex_coords = Some(coords);
        self
    }

    pub fn vertex_coords(&self) -> Option<&[f64]> {
        self.vertex_coords.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.xadj.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjncy.len() / 2
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let r = self.xadj[v as usize]..self.xadj[v as usize + 1];
        self.adjncy[r.clone()].iter().copied().zip(self.adjwgt[r].iter().copied())
    }

    /// Undirected edges `(u, v, weight)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        (0..self.vertex_count() as u32)
            .flat_map(move |u| self.neighbors(u).filter(move |&(v, _)| u < v).map(move |(v, w)| (u, v, w)))
    }

    /// METIS-style adjacency text: header `n m 001`, then one line per
    /// vertex of 1-indexed `neighbor weight` pairs.
    pub fn write_metis<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} 001", self.vertex_count(), self.edge_count())?;
        for v in 0..self.vertex_count() as u32 {
            let line: Vec<String> = self
                .neighbors(v)
                .map(|(u, w)| format!("{} {}", u + 1, w))
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Per-vertex labels in `[0, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPartition {
    pub labels: Vec<u32>,
    pub k: usize,
    pub epsilon: f64,
}

impl GraphPartition {
    pub fn part_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Largest part size allowed by the balance constraint.
    pub fn max_part_size(vertices: usize, k: usize, epsilon: f64) -> usize {
        ((1.0 + epsilon) * vertices.div_ceil(k) as f64).floor() as usize
    }

    pub fn is_balanced(&self) -> bool {
        let max = Self::max_part_size(self.labels.len(), self.k, self.epsilon);
        self.part_sizes().iter().all(|&s| s <= max)
    }
}

/// Sum of weights of edges whose endpoints carry different labels.
pub fn cut_weight(g: &SampleGraph, labels: &[u32]) -> u64 {
    g.edges()
        .filter(|&(u, v, _)| labels[u as usize] != labels[v as usize])
        .map(|(_, _, w)| w as u64)
        .sum()
}

/// Per-level cut before and after refinement, finest level last.
#[derive(Clone, Debug, Default)]
pub struct RefinementTrace {
    pub levels: Vec<(u64, u64, bool)>,
}

/// Partitions `g` into `k` balanced parts minimising the cut heuristically.
pub fn partition(g: &SampleGraph, k: usize, epsilon: f64, seed: u64) -> Result<GraphPartition> {
    partition_traced(g, k, epsilon, seed, &mut RefinementTrace::default())
}

pub fn partition_traced(
    g: &SampleGraph,
    k: usize,
    epsilon: f64,
    seed: u64,
    trace: &mut RefinementTrace,
) -> Result<GraphPartition> {
    let n = g.vertex_count();
    if k == 0 || !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidConfig(format!("k = {k}, epsilon = {epsilon}")));
    }
    if n < k {
        return Err(Error::InfeasibleBalance { vertices: n, k });
    }
    let mut labels = vec![0u32; n];
    if k > 1 {
        let graph = WGraph::from_sample(g);
        let ids: Vec<u32> = (0..n as u32).collect();
        let levels = (k as f64).log2().ceil().max(1.0);
        let ctx = Ctx {
            max_part: GraphPartition::max_part_size(n, k, epsilon),
            level_eps: epsilon / levels,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        recursive_bisection(&ctx, &graph, &ids, k, 0, &mut labels, &mut rng, trace);
    }
    let p = GraphPartition { labels, k, epsilon };
    debug_assert!(p.is_balanced());
    Ok(p)
}

struct Ctx {
    max_part: usize,
    level_eps: f64,
}

/// Weighted graph used internally; vertex weights count merged vertices.
#[derive(Clone, Debug)]
struct WGraph {
    xadj: Vec<usize>,
    adj: Vec<u32>,
    ew: Vec<u64>,
    vw: Vec<u64>,
}

impl WGraph {
    fn from_sample(g: &SampleGraph) -> WGraph {
        WGraph {
            xadj: g.xadj.clone(),
            adj: g.adjncy.clone(),
            ew: g.adjwgt.iter().map(|&w| w as u64).collect(),
            vw: vec![1; g.vertex_count()],
        }
    }

    fn n(&self) -> usize {
        self.vw.len()
    }

    fn total(&self) -> u64 {
        self.vw.iter().sum()
    }

    fn nbrs(&self, v: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.xadj[v]..self.xadj[v + 1];
        self.adj[r.clone()].iter().map(|&u| u as usize).zip(self.ew[r].iter().copied())
    }

    /// Induced subgraph on `keep` (local vertex ids).
    fn induced(&self, keep: &[usize]) -> WGraph {
        let mut local = vec![u32::MAX; self.n()];
        for (i, &v) in keep.iter().enumerate() {
            local[v] = i as u32;
        }
        let mut xadj = vec![0];
        let mut adj = Vec::new();
        let mut ew = Vec::new();
        for &v in keep {
            for (u, w) in self.nbrs(v) {
                if local[u] != u32::MAX {
                    adj.push(local[u]);
                    ew.push(w);
                }
            }
            xadj.push(adj.len());
        }
        WGraph {
            xadj,
            adj,
            ew,
            vw: keep.iter().map(|&v| self.vw[v]).collect(),
        }
    }

    fn cut(&self, side: &[u8]) -> u64 {
        let mut c = 0;
        for v in 0..self.n() {
            for (u, w) in self.nbrs(v) {
                if v < u && side[v] != side[u] {
                    c += w;
                }
            }
        }
        c
    }

    fn left_weight(&self, side: &[u8]) -> u64 {
        (0..self.n()).filter(|&v| side[v] == 0).map(|v| self.vw[v]).sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn recursive_bisection(
    ctx: &Ctx,
    g: &WGraph,
    ids: &[u32],
    k: usize,
    first_label: u32,
    labels: &mut [u32],
    rng: &mut ChaCha8Rng,
    trace: &mut RefinementTrace,
) {
    if k == 1 {
        for &id in ids {
            labels[id as usize] = first_label;
        }
        return;
    }
    let k1 = k / 2;
    let k2 = k - k1;
    let total = g.n();
    let target = total as f64 * k1 as f64 / k as f64;
    // hard window: both halves stay feasible for their sub-part counts
    let hard_lo = total.saturating_sub(k2 * ctx.max_part).max(k1);
    let hard_hi = (k1 * ctx.max_part).min(total - k2);
    let soft_lo = (target * (1.0 - ctx.level_eps)).ceil() as usize;
    let soft_hi = (target * (1.0 + ctx.level_eps)).floor() as usize;
    let (mut lo, mut hi) = (soft_lo.max(hard_lo), soft_hi.min(hard_hi));
    if lo > hi {
        (lo, hi) = (hard_lo, hard_hi);
    }
    let coarsest = (30 * k).max(COARSEST_SIZE);
    let side = multilevel_bisect(g, lo as u64, hi as u64, coarsest, rng, trace);

    let left: Vec<usize> = (0..total).filter(|&v| side[v] == 0).collect();
    let right: Vec<usize> = (0..total).filter(|&v| side[v] == 1).collect();
    let left_ids: Vec<u32> = left.iter().map(|&v| ids[v]).collect();
    let right_ids: Vec<u32> = right.iter().map(|&v| ids[v]).collect();
    recursive_bisection(ctx, &g.induced(&left), &left_ids, k1, first_label, labels, rng, trace);
    recursive_bisection(
        ctx,
        &g.induced(&right),
        &right_ids,
        k2,
        first_label + k1 as u32,
        labels,
        rng,
        trace,
    );
}

/// Bisects `g` so that the weight of side 0 lies in `[lo, hi]`.
fn multilevel_bisect(
    g: &WGraph,
    lo: u64,
    hi: u64,
    coarsest: usize,
    rng: &mut ChaCha8Rng,
    trace: &mut RefinementTrace,
) -> Vec<u8> {
    let mut levels: Vec<(WGraph, Vec<u32>)> = Vec::new();
    let mut current = g.clone();
    let max_vw = (g.total() / 20).max(1);
    while current.n() > coarsest {
        let (coarse, map) = coarsen(&current, max_vw, rng);
        if coarse.n() as f64 > 0.95 * current.n() as f64 {
            break;
        }
        levels.push((std::mem::replace(&mut current, coarse), map));
    }

    let mut side = initial_bisection(&current, lo, hi, rng);
    let before = current.cut(&side);
    let balanced = in_window(current.left_weight(&side), lo, hi);
    fm_refine(&current, &mut side, lo, hi, rng);
    trace.levels.push((before, current.cut(&side), balanced));

    while let Some((fine, map)) = levels.pop() {
        let mut fine_side: Vec<u8> = map.iter().map(|&c| side[c as usize]).collect();
        let before = fine.cut(&fine_side);
        let balanced = in_window(fine.left_weight(&fine_side), lo, hi);
        fm_refine(&fine, &mut fine_side, lo, hi, rng);
        trace.levels.push((before, fine.cut(&fine_side), balanced));
        side = fine_side;
        current = fine;
    }
    debug_assert!(in_window(current.left_weight(&side), lo, hi));
    side
}

fn in_window(w: u64, lo: u64, hi: u64) -> bool {
    lo <= w && w <= hi
}

/// Heavy-edge matching. Returns the coarse graph and the fine-to-coarse map.
fn coarsen(g: &WGraph, max_vw: u64, rng: &mut ChaCha8Rng) -> (WGraph, Vec<u32>) {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; n];
    for &v in &order {
        if mate[v] != usize::MAX {
            continue;
        }
        let mut best = v;
        let mut best_w = 0;
        for (u, w) in g.nbrs(v) {
            if mate[u] == usize::MAX && u != v && w > best_w && g.vw[u] + g.vw[v] <= max_vw {
                best = u;
                best_w = w;
            }
        }
        mate[v] = best;
        mate[best] = v;
    }
    let mut map = vec![u32::MAX; n];
    let mut next = 0u32;
    for v in 0..n {
        if map[v] == u32::MAX {
            map[v] = next;
            map[mate[v]] = next;
            next += 1;
        }
    }
    let cn = next as usize;
    let mut vw = vec![0; cn];
    for v in 0..n {
        vw[map[v] as usize] += g.vw[v];
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cn];
    for v in 0..n {
        members[map[v] as usize].push(v);
    }
    let mut xadj = vec![0];
    let mut adj = Vec::new();
    let mut ew = Vec::new();
    let mut slot = vec![usize::MAX; cn];
    for (c, mem) in members.iter().enumerate() {
        let start = adj.len();
        for &v in mem {
            for (u, w) in g.nbrs(v) {
                let cu = map[u] as usize;
                if cu == c {
                    continue;
                }
                if slot[cu] == usize::MAX || slot[cu] < start {
                    slot[cu] = adj.len();
                    adj.push(cu as u32);
                    ew.push(w);
                } else {
                    ew[slot[cu]] += w;
                }
            }
        }
        xadj.push(adj.len());
    }
    (WGraph { xadj, adj, ew, vw }, map)
}

/// Greedy graph growing from several random seeds; keeps the best
/// refined result.
fn initial_bisection(g: &WGraph, lo: u64, hi: u64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let n = g.n();
    let goal = (lo + hi) / 2;
    let mut best: Option<(bool, u64, Vec<u8>)> = None;
    let tries = 8.min(n.max(1));
    for _ in 0..tries {
        let mut side = vec![1u8; n];
        let mut weight = 0u64;
        let mut in_frontier = vec![false; n];
        let mut gain = vec![0i64; n];
        let mut heap = BinaryHeap::new();
        let start = rng.random_range(0..n);
        heap.push((0i64, Reverse(start)));
        in_frontier[start] = true;
        while weight < goal {
            let v = match heap.pop() {
                Some((gv, Reverse(v))) => {
                    if side[v] == 0 || gv != gain[v] {
                        continue;
                    }
                    v
                }
                // disconnected: continue from the lowest unassigned vertex
                None => match (0..n).find(|&v| side[v] == 1) {
                    Some(v) => v,
                    None => break,
                },
            };
            if weight + g.vw[v] > hi && weight >= lo {
                break;
            }
            side[v] = 0;
            weight += g.vw[v];
            for (u, w) in g.nbrs(v) {
                if side[u] == 1 {
                    if !in_frontier[u] {
                        in_frontier[u] = true;
                        gain[u] = -(g.nbrs(u).map(|(_, w)| w as i64).sum::<i64>());
                    }
                    gain[u] += 2 * w as i64;
                    heap.push((gain[u], Reverse(u)));
                }
            }
        }
        fm_refine(g, &mut side, lo, hi, rng);
        let key = (!in_window(g.left_weight(&side), lo, hi), g.cut(&side));
        if best.as_ref().is_none_or(|(b, c, _)| key < (*b, *c)) {
            best = Some((key.0, key.1, side));
        }
    }
    best.expect("at least one try").2
}

/// Fiduccia–Mattheyses passes with rollback to the best prefix. A state
/// inside the weight window is always preferred to one outside it, and the
/// cut of a balanced input never increases.
fn fm_refine(g: &WGraph, side: &mut [u8], lo: u64, hi: u64, rng: &mut ChaCha8Rng) {
    let n = g.n();
    if n < 2 {
        return;
    }
    let mut gain = vec![0i64; n];
    for _pass in 0..10 {
        for v in 0..n {
            gain[v] = g
                .nbrs(v)
                .map(|(u, w)| if side[u] != side[v] { w as i64 } else { -(w as i64) })
                .sum();
        }
        let mut locked = vec![false; n];
        let mut heaps = [BinaryHeap::new(), BinaryHeap::new()];
        let tie: Vec<u32> = (0..n).map(|_| rng.random()).collect();
        for v in 0..n {
            heaps[side[v] as usize].push((gain[v], tie[v], v));
        }
        let mut left = g.left_weight(side);
        let mut cut = g.cut(side) as i64;
        let score = |left: u64, cut: i64| -> (u64, i64) {
            let dev = if left < lo {
                lo - left
            } else {
                left.saturating_sub(hi)
            };
            (dev, cut)
        };
        let start_score = score(left, cut);
        let mut best_score = start_score;
        let mut best_len = 0;
        let mut moves: Vec<usize> = Vec::new();
        let limit = (n / 4).clamp(25, 400);
        loop {
            // candidate from each side that keeps (or moves towards) the window
            let mut pick: Option<(i64, usize)> = None;
            for from in 0..2u8 {
                let heap = &mut heaps[from as usize];
                while let Some(&(gv, _, v)) = heap.peek() {
                    if locked[v] || side[v] != from || gv != gain[v] {
                        heap.pop();
                        continue;
                    }
                    break;
                }
                let Some(&(gv, _, v)) = heap.peek() else {
                    continue;
                };
                let new_left = if from == 0 { left - g.vw[v] } else { left + g.vw[v] };
                let ok = in_window(new_left, lo, hi) || score(new_left, 0).0 < score(left, 0).0;
                if ok && pick.is_none_or(|(pg, _)| gv > pg) {
                    pick = Some((gv, v));
                }
            }
            let Some((gv, v)) = pick else { break };
            heaps[side[v] as usize].pop();
            let from = side[v];
            side[v] = 1 - from;
            locked[v] = true;
            if from == 0 {
                left -= g.vw[v];
            } else {
                left += g.vw[v];
            }
            cut -= gv;
            moves.push(v);
            for (u, w) in g.nbrs(v) {
                if locked[u] {
                    continue;
                }
                let delta = 2 * w as i64;
                gain[u] += if side[u] == side[v] { -delta } else { delta };
                heaps[side[u] as usize].push((gain[u], tie[u], u));
            }
            let s = score(left, cut);
            if s < best_score {
                best_score = s;
                best_len = moves.len();
            }
            if moves.len() - best_len > limit {
                break;
            }
        }
        for &v in &moves[best_len..] {
            side[v] = 1 - side[v];
        }
        if best_score >= start_score {
            break;
        }
    }
}
