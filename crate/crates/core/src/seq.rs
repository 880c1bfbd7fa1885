//! Sequential incremental (Bowyer–Watson) Delaunay triangulation.
//!
//! Points are inserted in a seeded random order. Each insertion locates a
//! simplex in conflict with the new point by a remembering stochastic walk
//! started from a simplex created near the point earlier (nested grid of
//! hints; a random live simplex when there is none),
//! grows the conflict cavity by breadth-first search over neighbors, and
//! re-fills the cavity by connecting the point to every boundary facet.
//!
//! The hull is closed by infinite simplices. An infinite simplex conflicts
//! with `p` when `p` is strictly outside its hull facet, or lies on the facet
//! plane inside the facet's circumsphere.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::{collinear3, in_sphere_raw, orient, PointSet, Sign, MAX_DIM};
use crate::triangulation::{Simplex, SimplexId, Triangulation, INFINITE, NONE};

/// Seed used when the caller does not provide one.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Triangulates every point of `points`.
pub fn triangulate_seq(points: &PointSet) -> Result<Triangulation> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    triangulate_ids(points, &ids, DEFAULT_SEED)
}

/// Triangulates the subset `ids` of `points`; simplices refer to the
/// original ids. The insertion order is a shuffle of `ids` under `seed`.
pub fn triangulate_ids(points: &PointSet, ids: &[u32], seed: u64) -> Result<Triangulation> {
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut b = Builder::new(points, seed);
    b.bootstrap(&mut order)?;
    for &p in &order {
        b.insert(p)?;
    }
    let mut t = b.t;
    t.compact();
    Ok(t)
}

/// Incremental builder, exposed so callers can validate after every
/// insertion.
pub struct Builder<'a> {
    points: &'a PointSet,
    dim: usize,
    t: Triangulation,
    stamp: Vec<u32>,
    epoch: u32,
    cavity: Vec<SimplexId>,
    boundary: Vec<(SimplexId, u8, SimplexId)>,
    fresh: Vec<(Simplex, SimplexId, SimplexId)>,
    ridges: FxHashMap<u64, (SimplexId, u8)>,
    rng: u64,
    last: SimplexId,
    hints: Option<HintGrid>,
}

/// Nested grids remembering a recently created simplex per cell; the walk
/// starts from the finest cell whose hint is still alive.
struct HintGrid {
    dim: usize,
    lo: [f64; MAX_DIM],
    scale: [f64; MAX_DIM],
    levels: Vec<Vec<(SimplexId, u32)>>,
}

impl HintGrid {
    fn new(points: &PointSet, ids: &[u32]) -> HintGrid {
        let dim = points.dim();
        let bbox = points.bounding_box_of(ids);
        let mut lo = [0.0; MAX_DIM];
        let mut scale = [0.0; MAX_DIM];
        for d in 0..dim {
            lo[d] = bbox.lo[d];
            let ext = bbox.extent(d);
            scale[d] = if ext > 0.0 { 1.0 / ext } else { 0.0 };
        }
        let mut levels = Vec::new();
        let mut cells = 1usize;
        while cells <= ids.len() / 2 || levels.is_empty() {
            levels.push(vec![(NONE, NONE); cells]);
            cells <<= dim;
        }
        HintGrid { dim, lo, scale, levels }
    }

    fn index(&self, level: usize, p: &[f64]) -> usize {
        let per_axis = 1usize << level;
        let mut idx = 0;
        for d in 0..self.dim {
            let u = ((p[d] - self.lo[d]) * self.scale[d] * per_axis as f64) as usize;
            idx = idx * per_axis + u.min(per_axis - 1);
        }
        idx
    }

    fn set(&mut self, p: &[f64], v: u32, s: SimplexId) {
        for l in 0..self.levels.len() {
            let i = self.index(l, p);
            self.levels[l][i] = (s, v);
        }
    }

    fn get(&self, p: &[f64], t: &Triangulation) -> Option<SimplexId> {
        (0..self.levels.len()).rev().find_map(|l| {
            // slots are recycled, so a live hint must still contain its vertex
            let (s, v) = self.levels[l][self.index(l, p)];
            (t.is_alive(s) && t.simplex(s).index_of(self.dim, v).is_some()).then_some(s)
        })
    }
}

impl<'a> Builder<'a> {
    pub fn new(points: &'a PointSet, seed: u64) -> Builder<'a> {
        Builder {
            points,
            dim: points.dim(),
            t: Triangulation::new(points.dim()),
            stamp: Vec::new(),
            epoch: 0,
            cavity: Vec::new(),
            boundary: Vec::new(),
            fresh: Vec::new(),
            ridges: FxHashMap::default(),
            rng: seed | 1,
            last: NONE,
            hints: None,
        }
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.t
    }

    pub fn into_triangulation(self) -> Triangulation {
        self.t
    }

    /// Finds `D + 1` affinely independent points in `order`, builds the first
    /// simplex with its infinite neighbors and removes those points from
    /// `order`.
    pub fn bootstrap(&mut self, order: &mut Vec<u32>) -> Result<()> {
        let dim = self.dim;
        if order.len() < dim + 1 {
            return Err(Error::DegenerateInput);
        }
        let pt = |i: usize| self.points.point(order[i]);
        let a = 0;
        let mut chosen = vec![a];
        // second point: any distinct one
        let b = (1..order.len())
            .find(|&i| pt(i) != pt(a))
            .ok_or(Error::DegenerateInput)?;
        chosen.push(b);
        let c = (1..order.len())
            .find(|&i| {
                i != b
                    && if dim == 2 {
                        orient(&[pt(a), pt(b), pt(i)]) != Sign::Zero
                    } else {
                        !collinear3(pt(a), pt(b), pt(i))
                    }
            })
            .ok_or(Error::DegenerateInput)?;
        chosen.push(c);
        if dim == 3 {
            let d = (1..order.len())
                .find(|&i| i != b && i != c && orient(&[pt(a), pt(b), pt(c), pt(i)]) != Sign::Zero)
                .ok_or(Error::DegenerateInput)?;
            chosen.push(d);
        }
        let mut verts = [NONE; 4];
        for (k, &i) in chosen.iter().enumerate() {
            verts[k] = order[i];
        }
        let coords: Vec<&[f64]> = chosen.iter().map(|&i| pt(i)).collect();
        let sign = orient(&coords);
        let finite = Simplex::from_unsorted(dim, verts, sign);
        let fid = self.t.push(finite);
        let mut all = vec![fid];
        for d in 0..=dim {
            let mut iv = finite.vertices;
            iv[d] = INFINITE;
            let mut s = Simplex::from_unsorted(dim, iv, finite.sign().flip());
            s.neighbors[dim] = fid;
            let id = self.t.push(s);
            self.t.simplex_mut(fid).neighbors[d] = id;
            all.push(id);
        }
        self.t.update_neighbors(&all, false)?;
        let mut hints = HintGrid::new(self.points, order);
        for &i in &chosen {
            hints.set(pt(i), order[i], fid);
        }
        self.hints = Some(hints);
        chosen.sort_unstable();
        for &i in chosen.iter().rev() {
            order.remove(i);
        }
        self.last = fid;
        Ok(())
    }

    #[inline]
    fn next_random(&mut self) -> u64 {
        // xorshift64*
        self.rng ^= self.rng >> 12;
        self.rng ^= self.rng << 25;
        self.rng ^= self.rng >> 27;
        self.rng.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    #[inline]
    fn coords_with(&self, s: &Simplex, replace: usize, p: &'a [f64]) -> [&'a [f64]; MAX_DIM + 1] {
        let mut c: [&[f64]; MAX_DIM + 1] = [p; MAX_DIM + 1];
        for i in 0..=self.dim {
            if i != replace {
                c[i] = self.points.point(s.vertices[i]);
            }
        }
        c
    }

    fn random_live_simplex(&mut self) -> SimplexId {
        loop {
            let i = (self.next_random() % self.t.capacity() as u64) as SimplexId;
            if self.t.is_alive(i) {
                return i;
            }
        }
    }

    /// Remembering stochastic walk towards `p`. Returns a simplex in
    /// conflict with `p`: a finite simplex containing it, or an infinite
    /// simplex whose hull facet `p` is strictly outside of.
    pub fn locate(&mut self, p: u32) -> SimplexId {
        let dim = self.dim;
        let pc = self.points.point(p);
        let hint = self.hints.as_ref().and_then(|h| h.get(pc, &self.t));
        let mut s = match hint {
            Some(s) => s,
            None if self.t.is_alive(self.last) => self.last,
            None => self.random_live_simplex(),
        };
        let mut prev = NONE;
        let mut steps = 0usize;
        loop {
            let simplex = *self.t.simplex(s);
            if simplex.is_infinite(dim) {
                if prev == NONE {
                    s = simplex.neighbors[dim];
                    continue;
                }
                return s;
            }
            let start = (self.next_random() % (dim as u64 + 1)) as usize;
            let mut next = NONE;
            for k in 0..=dim {
                let d = (start + k) % (dim + 1);
                let n = simplex.neighbors[d];
                if n == prev {
                    continue;
                }
                let c = self.coords_with(&simplex, d, pc);
                if orient(&c[..=dim]).times(simplex.sign()) == Sign::Negative {
                    next = n;
                    break;
                }
            }
            if next == NONE {
                return s;
            }
            prev = s;
            s = next;
            steps += 1;
            if steps > 4 * self.t.live_count() {
                s = self.random_live_simplex();
                prev = NONE;
                steps = 0;
            }
        }
    }

    fn finite_conflict(&self, s: &Simplex, q: &[f64]) -> bool {
        let dim = self.dim;
        let mut c: [&[f64]; MAX_DIM + 1] = [q; MAX_DIM + 1];
        for (i, ci) in c.iter_mut().enumerate().take(dim + 1) {
            *ci = self.points.point(s.vertices[i]);
        }
        in_sphere_raw(&c[..=dim], q).times(s.sign()) == Sign::Positive
    }

    /// Whether `p` lies strictly inside the circumsphere of `s`, with the
    /// halfspace convention for infinite simplices.
    pub fn in_conflict(&self, sid: SimplexId, p: u32) -> bool {
        let dim = self.dim;
        let s = self.t.simplex(sid);
        let q = self.points.point(p);
        if !s.is_infinite(dim) {
            return self.finite_conflict(s, q);
        }
        let c = self.coords_with(s, dim, q);
        match orient(&c[..=dim]).times(s.sign()) {
            Sign::Positive => true,
            Sign::Negative => false,
            Sign::Zero => self.finite_conflict(self.t.simplex(s.neighbors[dim]), q),
        }
    }

    /// Inserts one point.
    pub fn insert(&mut self, p: u32) -> Result<()> {
        let dim = self.dim;
        let start = self.locate(p);
        if !self.in_conflict(start, p) {
            return Err(Error::DuplicatePoint(p));
        }

        if self.stamp.len() < self.t.capacity() {
            self.stamp.resize(self.t.capacity(), 0);
        }
        if self.epoch >= u32::MAX - 2 {
            self.stamp.iter_mut().for_each(|x| *x = 0);
            self.epoch = 0;
        }
        self.epoch += 2;
        let inside = self.epoch;
        let outside = self.epoch + 1;

        self.cavity.clear();
        self.boundary.clear();
        self.cavity.push(start);
        self.stamp[start as usize] = inside;
        let mut head = 0;
        while head < self.cavity.len() {
            let c = self.cavity[head];
            head += 1;
            for d in 0..=dim {
                let n = self.t.simplex(c).neighbors[d];
                let st = self.stamp[n as usize];
                if st == inside {
                    continue;
                }
                if st != outside && self.in_conflict(n, p) {
                    self.stamp[n as usize] = inside;
                    self.cavity.push(n);
                } else {
                    self.stamp[n as usize] = outside;
                    self.boundary.push((c, d as u8, n));
                }
            }
        }

        self.fresh.clear();
        for &(c, d, n) in &self.boundary {
            let old = self.t.simplex(c);
            let mut verts = old.vertices;
            verts[d as usize] = p;
            // p is on the same side of the boundary facet as the replaced
            // vertex, so the orientation carries over.
            let s = Simplex::from_unsorted(dim, verts, old.sign());
            self.fresh.push((s, c, n));
        }
        self.ridges.clear();
        let fresh = std::mem::take(&mut self.fresh);
        let mut last_finite = NONE;
        for &(mut s, c, n) in &fresh {
            let pp = s.index_of(dim, p).expect("new simplex contains p");
            s.neighbors[pp] = n;
            let id = self.t.push(s);
            if id as usize >= self.stamp.len() {
                self.stamp.resize(id as usize + 1, 0);
            }
            self.stamp[id as usize] = 0;
            let outer = self.t.simplex_mut(n);
            let back = outer
                .neighbors
                .iter()
                .position(|&x| x == c)
                .expect("outer neighbor links back to the cavity");
            outer.neighbors[back] = id;

            for j in 0..=dim {
                if j == pp {
                    continue;
                }
                let mut key = 0u64;
                for (i, &v) in s.vertices[..=dim].iter().enumerate() {
                    if i != j && i != pp {
                        key = key.wrapping_mul(1 << 32) | v as u64;
                    }
                }
                if let Some((other, jo)) = self.ridges.remove(&key) {
                    self.t.simplex_mut(id).neighbors[j] = other;
                    self.t.simplex_mut(other).neighbors[jo as usize] = id;
                } else {
                    self.ridges.insert(key, (id, j as u8));
                }
            }
            if !s.is_infinite(dim) {
                last_finite = id;
            }
        }
        debug_assert!(self.ridges.is_empty(), "unmatched cavity ridges");
        // killed only now so that no new simplex reuses a cavity slot
        for &c in &self.cavity {
            self.t.kill(c);
        }
        self.fresh = fresh;
        self.last = last_finite;
        if let Some(h) = &mut self.hints {
            h.set(self.points.point(p), p, last_finite);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::{validate_delaunay, validate_delaunay_brute, validate_delaunay_subset};
    use rand::Rng;

    fn random_points(dim: usize, n: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn minimal_triangle() {
        let p = PointSet::from_rows(&[[0., 0.], [1., 0.], [0., 1.]]).unwrap();
        let t = triangulate_seq(&p).unwrap();
        assert_eq!(t.canonicalize(), vec![vec![0, 1, 2]]);
        assert_eq!(t.live_count(), 4);
        assert!(validate_delaunay_brute(&t, &p).unwrap().is_valid());
    }

    #[test]
    fn four_points_pick_delaunay_diagonal() {
        let p = PointSet::from_rows(&[[0., 0.], [1., 0.], [0., 1.], [2., 2.]]).unwrap();
        let t = triangulate_seq(&p).unwrap();
        assert_eq!(t.canonicalize(), vec![vec![0, 1, 2], vec![1, 2, 3]]);
    }

    #[test]
    fn degenerate_inputs() {
        let p = PointSet::from_rows(&[[0., 0.], [1., 0.], [2., 0.], [3., 0.]]).unwrap();
        assert!(matches!(triangulate_seq(&p), Err(Error::DegenerateInput)));
        let p = PointSet::from_rows(&[[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [1., 1., 0.]]).unwrap();
        assert!(matches!(triangulate_seq(&p), Err(Error::DegenerateInput)));
        let p = PointSet::from_rows(&[[0., 0.], [1., 0.], [0., 1.], [1., 0.]]).unwrap();
        assert!(matches!(triangulate_seq(&p), Err(Error::DuplicatePoint(_))));
    }

    #[test]
    fn valid_after_every_insertion() {
        for dim in [2, 3] {
            let p = random_points(dim, 120, 7 + dim as u64);
            let mut order: Vec<u32> = (0..p.len() as u32).collect();
            let mut b = Builder::new(&p, 1);
            b.bootstrap(&mut order).unwrap();
            let mut inserted = b.triangulation().vertex_ids();
            for &v in &order {
                b.insert(v).unwrap();
                inserted.push(v);
                let r = validate_delaunay_subset(b.triangulation(), &p, &inserted).unwrap();
                assert!(r.is_valid(), "dim {dim} after inserting {v}: {r:?}");
            }
        }
    }

    #[test]
    fn random_sets_are_delaunay() {
        for (dim, n) in [(2, 2000), (3, 1000)] {
            let p = random_points(dim, n, 42);
            let t = triangulate_seq(&p).unwrap();
            let r = validate_delaunay(&t, &p).unwrap();
            assert!(r.is_valid(), "{r:?}");
            assert_eq!(t.orientation_mismatches(&p), 0);
            if dim == 3 {
                let ratio = t.finite_count() as f64 / n as f64;
                assert!((4.0..=8.0).contains(&ratio), "ratio {ratio}");
            }
        }
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let p = random_points(3, 400, 3);
        let ids: Vec<u32> = (0..400).collect();
        let a = triangulate_ids(&p, &ids, 1).unwrap();
        let b = triangulate_ids(&p, &ids, 2).unwrap();
        assert_eq!(a.canonicalize(), b.canonicalize());
    }

    #[test]
    fn cocircular_lattice_is_valid() {
        let mut rows = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                rows.push([i as f64, j as f64]);
            }
        }
        rows[44] = [4.1, 4.05];
        let p = PointSet::from_rows(&rows).unwrap();
        let t = triangulate_seq(&p).unwrap();
        let r = validate_delaunay_brute(&t, &p).unwrap();
        assert!(r.is_valid(), "{r:?}");
        assert_eq!(t.finite_count(), 2 * 81);
    }
}
