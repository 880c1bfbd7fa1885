//! Simplex store with neighbor links, an explicit infinite vertex, facet
//! keys, canonical forms and export.
//!
//! Every simplex stores its `D + 1` vertex ids in ascending order; the
//! infinite vertex is [`INFINITE`] (`u32::MAX`) and therefore always last.
//! `neighbors[d]` is the simplex across the facet opposite `vertices[d]`.
//!
//! Each simplex also caches `sign`, the orientation of its vertices in stored
//! order. For an infinite simplex the sign describes the outer side of its
//! hull facet: a point `q` lies outside the hull across that facet iff the
//! orientation of the finite vertices followed by `q` equals `sign`.

mod validate;

pub use validate::{
    validate_delaunay, validate_delaunay_brute, validate_delaunay_subset, validate_with_limit,
    ValidityReport, DEFAULT_ORACLE_LIMIT,
};

use std::io::Write;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::{orient, PointSet, Sign, MAX_DIM};

/// Result of [`Triangulation::locate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// A finite simplex containing the point, possibly on its boundary.
    Inside(SimplexId),
    /// The point is outside the hull; the last finite simplex visited.
    Outside(SimplexId),
}

/// Sentinel id of the infinite vertex.
pub const INFINITE: u32 = u32::MAX;
/// Absent neighbor / partition.
pub const NONE: u32 = u32::MAX;

pub type SimplexId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Simplex {
    pub vertices: [u32; 4],
    pub neighbors: [SimplexId; 4],
    pub sign: i8,
    pub alive: bool,
    pub border: bool,
    pub origin: u32,
}

impl Simplex {
    /// Builds a simplex from vertices in arbitrary order whose orientation in
    /// that order is `sign`. Vertices are sorted and the sign adjusted by the
    /// parity of the sorting permutation.
    pub fn from_unsorted(dim: usize, mut vertices: [u32; 4], sign: Sign) -> Simplex {
        let n = dim + 1;
        let mut swaps = 0;
        for i in 1..n {
            let mut j = i;
            while j > 0 && vertices[j - 1] > vertices[j] {
                vertices.swap(j - 1, j);
                swaps += 1;
                j -= 1;
            }
        }
        for v in vertices.iter_mut().skip(n) {
            *v = NONE;
        }
        let sign = if swaps % 2 == 0 { sign } else { sign.flip() };
        Simplex {
            vertices,
            neighbors: [NONE; 4],
            sign: sign.as_i8(),
            alive: true,
            border: false,
            origin: NONE,
        }
    }

    #[inline]
    pub fn is_infinite(&self, dim: usize) -> bool {
        self.vertices[dim] == INFINITE
    }

    #[inline]
    pub fn vertices(&self, dim: usize) -> &[u32] {
        &self.vertices[..=dim]
    }

    #[inline]
    pub fn sign(&self) -> Sign {
        Sign::from_i8(self.sign)
    }

    #[inline]
    pub fn index_of(&self, dim: usize, v: u32) -> Option<usize> {
        self.vertices[..=dim].iter().position(|&x| x == v)
    }

    #[inline]
    pub fn index_of_neighbor(&self, dim: usize, s: SimplexId) -> Option<usize> {
        self.neighbors[..=dim].iter().position(|&x| x == s)
    }

    /// Sorted vertex ids of the facet opposite `vertices[d]`.
    #[inline]
    pub fn facet(&self, dim: usize, d: usize) -> [u32; 3] {
        let mut f = [NONE; 3];
        let mut j = 0;
        for (i, &v) in self.vertices[..=dim].iter().enumerate() {
            if i != d {
                f[j] = v;
                j += 1;
            }
        }
        f
    }

    /// Number of vertices shared with `other`.
    pub fn shared_vertices(&self, other: &Simplex, dim: usize) -> usize {
        self.vertices[..=dim]
            .iter()
            .filter(|v| other.vertices[..=dim].contains(v))
            .count()
    }
}

/// Order-independent 64-bit key of a facet's vertex-id set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FacetKey(pub u64);

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl FacetKey {
    /// Commutative combination of per-id mixes; equal sets give equal keys.
    #[inline]
    pub fn of(ids: &[u32]) -> FacetKey {
        let mut sum = 0u64;
        let mut xor = 0u64;
        for &id in ids {
            let h = mix64(id as u64);
            sum = sum.wrapping_add(h);
            xor ^= h.rotate_left(29);
        }
        FacetKey(mix64(sum ^ xor.wrapping_mul(0x2545_f491_4f6c_dd1d)))
    }
}

/// Key of the facet of `simplex` opposite its `d`-th vertex.
#[inline]
pub fn facet_key(simplex: &Simplex, dim: usize, d: usize) -> FacetKey {
    let f = simplex.facet(dim, d);
    FacetKey::of(&f[..dim])
}

/// A triangulation of (a subset of) a [`PointSet`] in 2 or 3 dimensions.
#[derive(Clone, Debug)]
pub struct Triangulation {
    dim: usize,
    pub(crate) simplices: Vec<Simplex>,
    pub(crate) free: Vec<SimplexId>,
}

impl Triangulation {
    pub fn new(dim: usize) -> Triangulation {
        Triangulation {
            dim,
            simplices: Vec::new(),
            free: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn simplex(&self, id: SimplexId) -> &Simplex {
        &self.simplices[id as usize]
    }

    #[inline]
    pub fn simplex_mut(&mut self, id: SimplexId) -> &mut Simplex {
        &mut self.simplices[id as usize]
    }

    /// Number of slots, live or dead.
    pub fn capacity(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_alive(&self, id: SimplexId) -> bool {
        self.simplices
            .get(id as usize)
            .is_some_and(|s| s.alive)
    }

    pub fn live(&self) -> impl Iterator<Item = (SimplexId, &Simplex)> + '_ {
        self.simplices
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive)
            .map(|(i, s)| (i as SimplexId, s))
    }

    pub fn finite(&self) -> impl Iterator<Item = (SimplexId, &Simplex)> + '_ {
        let dim = self.dim;
        self.live().filter(move |(_, s)| !s.is_infinite(dim))
    }

    pub fn live_count(&self) -> usize {
        self.simplices.len() - self.free.len()
    }

    pub fn finite_count(&self) -> usize {
        self.finite().count()
    }

    pub fn is_empty(&self) -> bool {
        self.live_count() == 0
    }

    /// Stores a simplex, reusing a tombstoned slot when available.
    pub fn push(&mut self, s: Simplex) -> SimplexId {
        if let Some(id) = self.free.pop() {
            self.simplices[id as usize] = s;
            id
        } else {
            self.simplices.push(s);
            (self.simplices.len() - 1) as SimplexId
        }
    }

    /// Tombstones a simplex. Links pointing to it are left for the caller.
    pub fn kill(&mut self, id: SimplexId) {
        let s = &mut self.simplices[id as usize];
        debug_assert!(s.alive);
        s.alive = false;
        self.free.push(id);
    }

    /// Moves every simplex of `other` into `self`, shifting its ids and
    /// neighbor links by the returned offset.
    pub fn append(&mut self, other: Triangulation) -> SimplexId {
        assert_eq!(self.dim, other.dim);
        let offset = self.simplices.len() as SimplexId;
        self.simplices.extend(other.simplices.into_iter().map(|mut s| {
            for n in &mut s.neighbors {
                if *n != NONE {
                    *n += offset;
                }
            }
            s
        }));
        self.free.extend(other.free.into_iter().map(|f| f + offset));
        offset
    }

    /// Removes tombstones and renumbers simplices; links to dead simplices
    /// become [`NONE`]. Returns the old-to-new id map.
    pub fn compact(&mut self) -> Vec<SimplexId> {
        let mut map = vec![NONE; self.simplices.len()];
        let mut next = 0;
        for (i, s) in self.simplices.iter().enumerate() {
            if s.alive {
                map[i] = next;
                next += 1;
            }
        }
        self.simplices.retain(|s| s.alive);
        for s in &mut self.simplices {
            for n in s.neighbors.iter_mut() {
                if *n != NONE {
                    *n = map[*n as usize];
                }
            }
        }
        self.free.clear();
        map
    }

    /// Sorted ids of all finite vertices referenced by live simplices.
    pub fn vertex_ids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .live()
            .flat_map(|(_, s)| s.vertices(self.dim).iter().copied())
            .filter(|&v| v != INFINITE)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Visibility walk from `start` towards `q`. The walk cannot cycle in a
    /// Delaunay triangulation; a linear scan backs it up anyway.
    pub fn locate(&self, points: &PointSet, start: SimplexId, q: &[f64]) -> Location {
        let dim = self.dim;
        // index of the first facet that `q` is strictly beyond
        let beyond = |s: &Simplex| {
            let mut c: [&[f64]; MAX_DIM + 1] = [q; MAX_DIM + 1];
            for (ci, &v) in c.iter_mut().zip(&s.vertices[..=dim]) {
                *ci = points.point(v);
            }
            (0..=dim).find(|&d| {
                let saved = std::mem::replace(&mut c[d], q);
                let o = orient(&c[..=dim]).times(s.sign());
                c[d] = saved;
                o == Sign::Negative
            })
        };
        let mut s = start;
        if self.simplex(s).is_infinite(dim) {
            s = self.simplex(s).neighbors[dim];
        }
        for _ in 0..4 * self.simplices.len() + 16 {
            let simplex = self.simplex(s);
            match beyond(simplex) {
                None => return Location::Inside(s),
                Some(d) => {
                    let n = simplex.neighbors[d];
                    if n == NONE || self.simplex(n).is_infinite(dim) {
                        return Location::Outside(s);
                    }
                    s = n;
                }
            }
        }
        match self.finite().find(|(_, s)| beyond(s).is_none()) {
            Some((id, _)) => Location::Inside(id),
            None => Location::Outside(start),
        }
    }

    /// All infinite simplices plus every finite simplex adjacent to one.
    pub fn hull_simplices(&self) -> Vec<SimplexId> {
        let dim = self.dim;
        let mut out = Vec::new();
        let mut seen = vec![false; self.simplices.len()];
        for (id, s) in self.live() {
            if s.is_infinite(dim) {
                for sid in [id, s.neighbors[dim]] {
                    if sid != NONE && !seen[sid as usize] {
                        seen[sid as usize] = true;
                        out.push(sid);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Full facet index over live simplices: key to `(simplex, facet)` list.
    pub fn facet_index(&self) -> FxHashMap<FacetKey, Vec<(SimplexId, u8)>> {
        let mut index: FxHashMap<FacetKey, Vec<(SimplexId, u8)>> = FxHashMap::default();
        for (id, s) in self.live() {
            for d in 0..=self.dim {
                index
                    .entry(facet_key(s, self.dim, d))
                    .or_default()
                    .push((id, d as u8));
            }
        }
        index
    }

    /// Sorted list of sorted finite vertex tuples; equal for two
    /// triangulations iff they contain the same finite simplices.
    pub fn canonicalize(&self) -> Vec<Vec<u32>> {
        let mut c: Vec<Vec<u32>> = self
            .finite()
            .map(|(_, s)| s.vertices(self.dim).to_vec())
            .collect();
        c.sort_unstable();
        c
    }

    /// Recomputes the cached orientation of every live finite simplex.
    pub fn orientation_mismatches(&self, points: &PointSet) -> usize {
        let dim = self.dim;
        self.finite()
            .filter(|(_, s)| {
                let v: Vec<&[f64]> = s.vertices(dim).iter().map(|&i| points.point(i)).collect();
                orient(&v) != s.sign()
            })
            .count()
    }

    /// Links every facet of `queue` simplices that has no live neighbor.
    ///
    /// Candidates are the open facets (neighbor absent or dead) of the queued
    /// simplices, grouped by facet key and verified by comparing vertex sets,
    /// so the queue must contain both sides of every facet to be repaired.
    /// Hull facets left without a finite partner are closed with fresh
    /// infinite simplices when `close_hull` is set.
    ///
    /// Errors with [`Error::DanglingFacet`] if a facet remains open.
    pub fn update_neighbors(&mut self, queue: &[SimplexId], close_hull: bool) -> Result<()> {
        let dim = self.dim;
        let mut open = self.collect_open_facets(queue);
        self.match_open_facets(&mut open);
        if close_hull {
            let new_inf = self.close_hull(&open);
            let mut inf_open = self.collect_open_facets(&new_inf);
            self.match_open_facets(&mut inf_open);
            open = inf_open;
        }
        for f in &open {
            let s = &self.simplices[f.simplex as usize];
            if !self.is_alive(s.neighbors[f.facet as usize]) {
                let facet = s.facet(dim, f.facet as usize);
                return Err(Error::DanglingFacet(facet[..dim].to_vec()));
            }
        }
        Ok(())
    }

    fn is_open(&self, s: &Simplex, d: usize) -> bool {
        let n = s.neighbors[d];
        n == NONE || !self.simplices[n as usize].alive
    }

    fn collect_open_facets(&self, queue: &[SimplexId]) -> Vec<OpenFacet> {
        let dim = self.dim;
        let mut queue = queue.to_vec();
        queue.sort_unstable();
        queue.dedup();
        let mut open = Vec::new();
        for &id in &queue {
            let s = &self.simplices[id as usize];
            if !s.alive {
                continue;
            }
            for d in 0..=dim {
                if self.is_open(s, d) {
                    let f = s.facet(dim, d);
                    open.push(OpenFacet {
                        key: facet_key(s, dim, d),
                        facet: d as u8,
                        simplex: id,
                        vertices: f,
                    });
                }
            }
        }
        open
    }

    /// Sorts open facets by key and links verified pairs. Leaves unmatched
    /// facets in `open`.
    fn match_open_facets(&mut self, open: &mut Vec<OpenFacet>) {
        open.sort_unstable_by(|a, b| (a.key, a.vertices, a.simplex).cmp(&(b.key, b.vertices, b.simplex)));
        let mut rest = Vec::new();
        let mut i = 0;
        while i < open.len() {
            let a = open[i];
            if i + 1 < open.len() && open[i + 1].key == a.key && open[i + 1].vertices == a.vertices {
                let b = open[i + 1];
                self.simplices[a.simplex as usize].neighbors[a.facet as usize] = b.simplex;
                self.simplices[b.simplex as usize].neighbors[b.facet as usize] = a.simplex;
                i += 2;
            } else {
                rest.push(a);
                i += 1;
            }
        }
        *open = rest;
    }

    /// Creates an infinite simplex over every open finite facet of a finite
    /// simplex. Returns the new ids.
    fn close_hull(&mut self, open: &[OpenFacet]) -> Vec<SimplexId> {
        let dim = self.dim;
        let mut new = Vec::new();
        for f in open {
            let owner = self.simplices[f.simplex as usize];
            if owner.is_infinite(dim) {
                continue;
            }
            // Replacing the owner's opposite vertex by the infinite vertex: the
            // outer side is the side opposite that vertex.
            let mut verts = owner.vertices;
            verts[f.facet as usize] = INFINITE;
            let s = Simplex::from_unsorted(dim, verts, owner.sign().flip());
            let mut s = s;
            s.neighbors[dim] = f.simplex;
            s.origin = owner.origin;
            let id = self.push(s);
            self.simplices[f.simplex as usize].neighbors[f.facet as usize] = id;
            new.push(id);
        }
        new
    }

    /// Writes finite simplices as CSV, one ascending id tuple per line.
    pub fn write_csv<W: Write>(&self, points: usize, mut out: W) -> Result<()> {
        let canon = self.canonicalize();
        writeln!(out, "# dim={} n_points={} n_simplices={}", self.dim, points, canon.len())?;
        for s in canon {
            let line: Vec<String> = s.iter().map(u32::to_string).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`Triangulation::write_csv`]. Only vertex
    /// sets are restored; neighbor links are rebuilt from shared facets.
    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<(Triangulation, usize)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty triangulation file".into()))??;
        let mut dim = None;
        let mut n_points = None;
        let mut n_simplices = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad header field {field}")))
            };
            match field.split_once('=') {
                Some(("dim", v)) => dim = Some(parse(v)?),
                Some(("n_points", v)) => n_points = Some(parse(v)?),
                Some(("n_simplices", v)) => n_simplices = Some(parse(v)?),
                _ => return Err(Error::Format(format!("bad header field {field}"))),
            }
        }
        let (Some(dim), Some(n_points), Some(n_simplices)) = (dim, n_points, n_simplices) else {
            return Err(Error::Format("incomplete header".into()));
        };
        if !(2..=3).contains(&dim) {
            return Err(Error::Format(format!("unsupported dimension {dim}")));
        }
        let mut t = Triangulation::new(dim);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ids: Vec<u32> = line
                .split(',')
                .map(|v| v.trim().parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("bad simplex line {line:?}: {e}")))?;
            if ids.len() != dim + 1 || ids.iter().any(|&i| i as usize >= n_points) {
                return Err(Error::Format(format!("bad simplex line {line:?}")));
            }
            let mut v = [NONE; 4];
            v[..=dim].copy_from_slice(&ids);
            // orientation is unknown until coordinates are attached
            t.push(Simplex::from_unsorted(dim, v, Sign::Zero));
        }
        if t.live_count() != n_simplices {
            return Err(Error::Format(format!(
                "header announces {n_simplices} simplices, found {}",
                t.live_count()
            )));
        }
        Ok((t, n_points))
    }

    /// Recomputes orientations from coordinates and rebuilds all neighbor
    /// links (including the infinite hull) from scratch.
    pub fn relink(&mut self, points: &PointSet) -> Result<()> {
        let dim = self.dim;
        self.simplices.retain(|s| s.alive && !s.is_infinite(dim));
        self.free.clear();
        for s in &mut self.simplices {
            let v: Vec<&[f64]> = s.vertices(dim).iter().map(|&i| points.point(i)).collect();
            s.sign = orient(&v).as_i8();
            s.neighbors = [NONE; 4];
        }
        let all: Vec<SimplexId> = (0..self.simplices.len() as SimplexId).collect();
        self.update_neighbors(&all, true)
    }
}

#[derive(Clone, Copy, Debug)]
struct OpenFacet {
    key: FacetKey,
    vertices: [u32; 3],
    simplex: SimplexId,
    facet: u8,
}
