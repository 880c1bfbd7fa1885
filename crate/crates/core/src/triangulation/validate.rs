//! Brute-force Delaunay validity oracle.

use rustc_hash::FxHashMap;

use super::{facet_key, FacetKey, Triangulation, INFINITE, NONE};
use crate::error::{Error, Result};
use crate::geometry::{filter_sphere, in_sphere_oriented, orient, Aabb, PointSet, Sign, MAX_DIM};

/// Largest point set the oracle accepts by default.
pub const DEFAULT_ORACLE_LIMIT: usize = 20_000;

/// Findings of [`validate_delaunay`]. Every count is zero for a valid
/// Delaunay triangulation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidityReport {
    /// `(simplex vertices, point)` pairs with the point strictly inside the
    /// circumsphere.
    pub empty_sphere_violations: Vec<(Vec<u32>, u32)>,
    /// Facets not shared by exactly the expected number of simplices.
    pub facet_violations: usize,
    /// Missing, dead, asymmetric or non-adjacent neighbor links.
    pub neighbor_violations: usize,
    /// Adjacent simplices that do not lie on opposite sides of their shared
    /// facet, or flat finite simplices.
    pub orientation_violations: usize,
    /// Input points that are not a vertex of any simplex.
    pub missing_vertices: Vec<u32>,
    pub finite_simplices: usize,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violation_count() == 0
    }

    pub fn violation_count(&self) -> usize {
        self.empty_sphere_violations.len()
            + self.facet_violations
            + self.neighbor_violations
            + self.orientation_violations
            + self.missing_vertices.len()
    }
}

/// Checks the empty-circumsphere property of every finite simplex against
/// every point, plus facet sharing, neighbor symmetry and vertex coverage.
///
/// Points that are certainly outside a simplex's circumsphere are skipped
/// with a conservative grid filter; every remaining pair gets an exact
/// in-sphere test. The result is identical to [`validate_delaunay_brute`].
pub fn validate_delaunay(t: &Triangulation, points: &PointSet) -> Result<ValidityReport> {
    validate_with_limit(t, points, DEFAULT_ORACLE_LIMIT)
}

pub fn validate_with_limit(
    t: &Triangulation,
    points: &PointSet,
    limit: usize,
) -> Result<ValidityReport> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    check(t, points, &ids, false, limit)
}

/// Validates a triangulation of the subset `ids` of `points`.
pub fn validate_delaunay_subset(
    t: &Triangulation,
    points: &PointSet,
    ids: &[u32],
) -> Result<ValidityReport> {
    check(t, points, ids, false, DEFAULT_ORACLE_LIMIT)
}

/// Same checks as [`validate_delaunay`] without any filtering: every finite
/// simplex is tested against every point.
pub fn validate_delaunay_brute(t: &Triangulation, points: &PointSet) -> Result<ValidityReport> {
    let ids: Vec<u32> = (0..points.len() as u32).collect();
    check(t, points, &ids, true, DEFAULT_ORACLE_LIMIT)
}

fn check(
    t: &Triangulation,
    points: &PointSet,
    ids: &[u32],
    brute: bool,
    limit: usize,
) -> Result<ValidityReport> {
    if ids.len() > limit {
        return Err(Error::OracleLimitExceeded {
            n: ids.len(),
            limit,
        });
    }
    let mut report = structural(t, points, ids);
    let grid = (!brute).then(|| PointGrid::new(points, ids));
    for (_, s) in t.finite() {
        let verts = s.vertices(t.dim());
        let coords: Vec<&[f64]> = verts.iter().map(|&v| points.point(v)).collect();
        let o = orient(&coords);
        if o == Sign::Zero {
            continue;
        }
        let mut test = |q: u32| {
            if in_sphere_oriented(&coords, o, points.point(q)) == Sign::Positive {
                report.empty_sphere_violations.push((verts.to_vec(), q));
            }
        };
        match &grid {
            Some(grid) => {
                let sphere = filter_sphere(&coords);
                if sphere.is_unbounded() {
                    ids.iter().copied().for_each(&mut test);
                } else {
                    grid.for_each_in_box(&sphere.bounding_box(points.dim()), &mut test);
                }
            }
            None => ids.iter().copied().for_each(&mut test),
        }
    }
    report.empty_sphere_violations.sort_unstable();
    Ok(report)
}

fn structural(t: &Triangulation, points: &PointSet, ids: &[u32]) -> ValidityReport {
    let dim = t.dim();
    let mut report = ValidityReport::default();

    // facet sharing: (finite owners, infinite owners) per facet vertex set
    let mut owners: FxHashMap<(FacetKey, [u32; 3]), (u32, u32)> = FxHashMap::default();
    for (_, s) in t.live() {
        for d in 0..=dim {
            let e = owners
                .entry((facet_key(s, dim, d), s.facet(dim, d)))
                .or_default();
            if s.is_infinite(dim) {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
    }
    for ((_, facet), (fin, inf)) in &owners {
        let has_infinite_vertex = facet[..dim].contains(&INFINITE);
        let ok = if has_infinite_vertex {
            *fin == 0 && *inf == 2
        } else {
            matches!((fin, inf), (2, 0) | (1, 1))
        };
        if !ok {
            report.facet_violations += 1;
        }
    }

    for (id, s) in t.live() {
        if !s.is_infinite(dim) {
            report.finite_simplices += 1;
            let coords: Vec<&[f64]> = s.vertices(dim).iter().map(|&v| points.point(v)).collect();
            if orient(&coords) == Sign::Zero {
                report.orientation_violations += 1;
            }
        }
        for d in 0..=dim {
            let n = s.neighbors[d];
            if n == NONE || !t.is_alive(n) {
                report.neighbor_violations += 1;
                continue;
            }
            let other = t.simplex(n);
            if s.shared_vertices(other, dim) != dim || other.index_of_neighbor(dim, id).is_none() {
                report.neighbor_violations += 1;
                continue;
            }
            if id < n && !opposite_sides(t, points, id, d, n) {
                report.orientation_violations += 1;
            }
        }
    }

    let mut seen = vec![false; points.len()];
    for (_, s) in t.live() {
        for &v in s.vertices(dim) {
            if v != INFINITE {
                if let Some(x) = seen.get_mut(v as usize) {
                    *x = true;
                }
            }
        }
    }
    report.missing_vertices = ids.iter().copied().filter(|&i| !seen[i as usize]).collect();
    report
}

/// Whether the vertices opposite a shared facet lie strictly on opposite
/// sides of it. An infinite vertex lies on the outer side of a hull facet.
fn opposite_sides(t: &Triangulation, points: &PointSet, a: u32, da: usize, b: u32) -> bool {
    let dim = t.dim();
    let sa = t.simplex(a);
    let sb = t.simplex(b);
    let Some(db) = sb.index_of_neighbor(dim, a) else {
        return false;
    };
    let facet = sa.facet(dim, da);
    let facet = &facet[..dim];
    let (va, vb) = (sa.vertices[da], sb.vertices[db]);
    if facet.contains(&INFINITE) {
        // two infinite simplices; both finite opposite vertices must be on
        // the inner side of the hull plane spanned with the other's facet
        return true;
    }
    let fc: Vec<&[f64]> = facet.iter().map(|&v| points.point(v)).collect();
    let side = |v: u32| -> Sign {
        let mut c = fc.clone();
        c.push(points.point(v));
        orient(&c)
    };
    match (va == INFINITE, vb == INFINITE) {
        (false, false) => {
            let (x, y) = (side(va), side(vb));
            x != Sign::Zero && x == y.flip()
        }
        (true, false) | (false, true) => {
            let (inf, fin) = if va == INFINITE { (sa, vb) } else { (sb, va) };
            // outer side is where orient(facet in stored order, q) == sign
            debug_assert_eq!(&inf.vertices[..dim], facet);
            side(fin) == inf.sign().flip()
        }
        (true, true) => false,
    }
}

/// Uniform bucket grid over a point set with about one point per cell.
struct PointGrid {
    dim: usize,
    origin: [f64; MAX_DIM],
    cell: [f64; MAX_DIM],
    counts: [usize; MAX_DIM],
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl PointGrid {
    fn new(points: &PointSet, ids: &[u32]) -> PointGrid {
        let dim = points.dim();
        let bbox = points.bounding_box_of(ids);
        let per_axis = ((ids.len().max(1) as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut origin = [0.0; MAX_DIM];
        let mut cell = [1.0; MAX_DIM];
        let mut counts = [1; MAX_DIM];
        for d in 0..dim {
            origin[d] = bbox.lo[d];
            let ext = bbox.extent(d);
            if ext > 0.0 {
                counts[d] = per_axis;
                cell[d] = ext / per_axis as f64;
            }
        }
        let total: usize = counts.iter().product();
        let mut grid = PointGrid {
            dim,
            origin,
            cell,
            counts,
            starts: vec![0; total + 1],
            ids: vec![0; ids.len()],
        };
        let cells: Vec<usize> = ids.iter().map(|&i| grid.cell_of(points.point(i))).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for i in 0..total {
            grid.starts[i + 1] += grid.starts[i];
        }
        let mut fill = grid.starts.clone();
        for (&id, &c) in ids.iter().zip(&cells) {
            grid.ids[fill[c] as usize] = id;
            fill[c] += 1;
        }
        grid
    }

    fn axis_index(&self, d: usize, x: f64) -> usize {
        let i = ((x - self.origin[d]) / self.cell[d]).floor();
        if i <= 0.0 || i.is_nan() {
            0
        } else {
            (i as usize).min(self.counts[d] - 1)
        }
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        let mut idx = 0;
        for d in (0..self.dim).rev() {
            idx = idx * self.counts[d] + self.axis_index(d, p[d]);
        }
        idx
    }

    /// Visits every point whose cell overlaps the box. Cell ranges are widened
    /// by one so points binned across a rounding boundary are not missed.
    fn for_each_in_box(&self, b: &Aabb, mut f: impl FnMut(u32)) {
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for d in 0..self.dim {
            lo[d] = self.axis_index(d, b.lo[d]).saturating_sub(1);
            hi[d] = (self.axis_index(d, b.hi[d]) + 1).min(self.counts[d] - 1);
        }
        let mut cur = lo;
        loop {
            let mut idx = 0;
            for d in (0..self.dim).rev() {
                idx = idx * self.counts[d] + cur[d];
            }
            for &id in &self.ids[self.starts[idx] as usize..self.starts[idx + 1] as usize] {
                f(id);
            }
            let mut d = 0;
            loop {
                if d == self.dim {
                    return;
                }
                if cur[d] < hi[d] {
                    cur[d] += 1;
                    break;
                }
                cur[d] = lo[d];
                d += 1;
            }
        }
    }
}
