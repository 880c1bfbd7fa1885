//! Points, boxes, spheres and the predicates everything else is built on.
//!
//! Only decisions are exact. Constructions such as circumspheres are plain
//! binary64 and are used solely as conservative filters.

mod predicates;

pub use predicates::{
    collinear3, in_circle_raw, in_sphere, in_sphere3_raw, in_sphere_oriented, orient, orient2,
    orient3, Sign,
};
pub(crate) use predicates::in_sphere_raw;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// A set of distinct points in 2 or 3 dimensions; a point's id is its index.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Builds a point set from flat, row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidPoints(format!("unsupported dimension {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidPoints(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        if coords.len() / dim > u32::MAX as usize - 1 {
            return Err(Error::InvalidPoints("too many points".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidPoints(format!(
                "point {} has a non-finite coordinate",
                i / dim
            )));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_rows<const D: usize>(rows: &[[f64; D]]) -> Result<Self> {
        PointSet::new(D, rows.iter().flatten().copied().collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.coords[i..i + self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Bounding box of the whole set.
    pub fn bounding_box(&self) -> Aabb {
        Aabb::of_points(self.dim, self.iter())
    }

    /// Bounding box of a subset.
    pub fn bounding_box_of(&self, ids: &[u32]) -> Aabb {
        Aabb::of_points(self.dim, ids.iter().map(|&i| self.point(i)))
    }

    /// Removes exact duplicates, keeping the first occurrence.
    ///
    /// Returns the deduplicated set and, for every original id, its id in the
    /// new set.
    pub fn dedup(&self) -> (PointSet, Vec<u32>) {
        let mut seen = rustc_hash::FxHashMap::default();
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut remap = Vec::with_capacity(self.len());
        for p in self.iter() {
            let key: Vec<u64> = p.iter().map(|c| canonical_bits(*c)).collect();
            let next = (coords.len() / self.dim) as u32;
            let id = *seen.entry(key).or_insert_with(|| {
                coords.extend_from_slice(p);
                next
            });
            remap.push(id);
        }
        (
            PointSet {
                dim: self.dim,
                coords,
            },
            remap,
        )
    }

    /// Copies the given points into a new set with ids renumbered densely.
    pub fn subset(&self, ids: &[u32]) -> PointSet {
        let mut coords = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            coords.extend_from_slice(self.point(i));
        }
        PointSet {
            dim: self.dim,
            coords,
        }
    }
}

/// `-0.0` and `0.0` denote the same point.
fn canonical_bits(c: f64) -> u64 {
    if c == 0.0 {
        0
    } else {
        c.to_bits()
    }
}

/// Axis-aligned box. Unused trailing axes of 2D boxes are `[0, 0]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: [f64; MAX_DIM],
    pub hi: [f64; MAX_DIM],
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        lo: [f64::INFINITY; MAX_DIM],
        hi: [f64::NEG_INFINITY; MAX_DIM],
    };

    pub fn new(lo: &[f64], hi: &[f64]) -> Aabb {
        let mut b = Aabb {
            lo: [0.0; MAX_DIM],
            hi: [0.0; MAX_DIM],
        };
        b.lo[..lo.len()].copy_from_slice(lo);
        b.hi[..hi.len()].copy_from_slice(hi);
        debug_assert!(b.lo.iter().zip(&b.hi).all(|(l, h)| l <= h));
        b
    }

    pub fn of_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Aabb {
        let mut b = Aabb::EMPTY;
        for d in dim..MAX_DIM {
            b.lo[d] = 0.0;
            b.hi[d] = 0.0;
        }
        for p in points {
            b.include(p);
        }
        b
    }

    #[inline]
    pub fn include(&mut self, p: &[f64]) {
        for (d, &c) in p.iter().enumerate() {
            self.lo[d] = self.lo[d].min(c);
            self.hi[d] = self.hi[d].max(c);
        }
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        for d in 0..MAX_DIM {
            b.lo[d] = b.lo[d].min(other.lo[d]);
            b.hi[d] = b.hi[d].max(other.hi[d]);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(d, &c)| self.lo[d] <= c && c <= self.hi[d])
    }

    /// Closed boxes share at least one point.
    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..MAX_DIM).all(|d| self.lo[d] <= other.hi[d] && other.lo[d] <= self.hi[d])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..MAX_DIM).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d])
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    /// Length of the main diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..MAX_DIM).map(|d| self.extent(d).powi(2)).sum::<f64>().sqrt()
    }

    /// Product of the extents of the first `dim` axes.
    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|d| self.extent(d)).product()
    }

    pub fn longest_axis(&self, dim: usize) -> usize {
        (0..dim)
            .max_by(|&a, &b| self.extent(a).total_cmp(&self.extent(b)))
            .unwrap_or(0)
    }
}

/// Ball given by center and squared radius. Unused trailing center
/// coordinates of 2D spheres are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: [f64; MAX_DIM],
    pub radius_squared: f64,
}

impl Sphere {
    /// A sphere that overlaps everything; used when a circumsphere cannot be
    /// bounded reliably.
    pub const UNBOUNDED: Sphere = Sphere {
        center: [0.0; MAX_DIM],
        radius_squared: f64::INFINITY,
    };

    pub fn is_unbounded(&self) -> bool {
        self.radius_squared == f64::INFINITY
    }

    /// Axis-aligned box enclosing the sphere.
    pub fn bounding_box(&self, dim: usize) -> Aabb {
        let r = self.radius_squared.sqrt();
        let mut b = Aabb::new(&self.center[..dim], &self.center[..dim]);
        for d in 0..dim {
            b.lo[d] -= r;
            b.hi[d] += r;
        }
        b
    }
}

/// Solves for the circumcenter relative to the first vertex. Returns the
/// offset and a Hadamard-ratio condition estimate of the system.
fn circumcenter_offset(vertices: &[&[f64]]) -> Option<([f64; MAX_DIM], f64)> {
    let dim = vertices.len() - 1;
    let a = vertices[0];
    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    let mut rhs = [0.0; MAX_DIM];
    let mut row_norms = 1.0;
    for i in 0..dim {
        let v = vertices[i + 1];
        let mut sq = 0.0;
        for d in 0..dim {
            m[i][d] = v[d] - a[d];
            sq += m[i][d] * m[i][d];
        }
        rhs[i] = 0.5 * sq;
        row_norms *= sq.sqrt();
    }
    let det = det(&m, dim);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut x = [0.0; MAX_DIM];
    for (col, xc) in x.iter_mut().enumerate().take(dim) {
        let mut mc = m;
        for (row, r) in mc.iter_mut().enumerate().take(dim) {
            r[col] = rhs[row];
        }
        *xc = self::det(&mc, dim) / det;
    }
    Some((x, row_norms / det.abs()))
}

fn det(m: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> f64 {
    match dim {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!(),
    }
}

/// Circumsphere of `D + 1` affinely independent points, in plain binary64.
pub fn circumsphere(vertices: &[&[f64]]) -> Result<Sphere> {
    if orient(vertices) == Sign::Zero {
        return Err(Error::DegenerateSimplex);
    }
    let dim = vertices.len() - 1;
    let (x, _) = circumcenter_offset(vertices).ok_or(Error::DegenerateSimplex)?;
    let mut center = [0.0; MAX_DIM];
    for d in 0..dim {
        center[d] = vertices[0][d] + x[d];
    }
    let radius_squared = (0..dim).map(|d| x[d] * x[d]).sum();
    Ok(Sphere {
        center,
        radius_squared,
    })
}

/// Relative inflation applied to every filter sphere.
pub const FILTER_INFLATION: f64 = 1e-10;
/// Condition estimate above which a circumsphere is not trusted as a filter.
const FILTER_MAX_CONDITION: f64 = 1e7;

/// A sphere guaranteed to contain the exact circumsphere of `vertices`.
///
/// The binary64 circumsphere is enlarged by an a-posteriori bound on the
/// center error plus the relative inflation [`FILTER_INFLATION`]. Badly
/// conditioned simplices yield [`Sphere::UNBOUNDED`].
pub fn filter_sphere(vertices: &[&[f64]]) -> Sphere {
    let dim = vertices.len() - 1;
    let Some((x, cond)) = circumcenter_offset(vertices) else {
        return Sphere::UNBOUNDED;
    };
    if !(cond < FILTER_MAX_CONDITION) {
        return Sphere::UNBOUNDED;
    }
    let mut center = [0.0; MAX_DIM];
    for d in 0..dim {
        center[d] = vertices[0][d] + x[d];
    }
    let mut r_max: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for v in vertices {
        let mut sq = 0.0;
        for d in 0..dim {
            sq += (v[d] - center[d]).powi(2);
            scale = scale.max(v[d].abs()).max(center[d].abs());
        }
        r_max = r_max.max(sq.sqrt());
    }
    let offset_norm = (0..dim).map(|d| x[d] * x[d]).sum::<f64>().sqrt();
    let center_err = cond * 1e-13 * (offset_norm + scale);
    let r = (r_max + 2.0 * center_err + 1e-14 * scale) * (1.0 + FILTER_INFLATION);
    Sphere {
        center,
        radius_squared: r * r,
    }
}

/// Squared distance from `p` to the box, clamping per axis.
#[inline]
pub fn box_distance_squared(b: &Aabb, p: &[f64; MAX_DIM]) -> f64 {
    let mut s = 0.0;
    for d in 0..MAX_DIM {
        let c = p[d].clamp(b.lo[d], b.hi[d]);
        s += (p[d] - c) * (p[d] - c);
    }
    s
}

/// Box-sphere overlap by the clamped closest-point distance.
#[inline]
pub fn box_sphere_overlap(b: &Aabb, s: &Sphere) -> bool {
    s.is_unbounded() || box_distance_squared(b, &s.center) <= s.radius_squared
}

/// Outer halfspace of a hyperplane through `D` points. A point `q` is on the
/// outer side iff `orient(facet, q) == outer_sign`.
#[derive(Clone, Copy, Debug)]
pub struct Halfspace<'a> {
    pub facet: &'a [&'a [f64]],
    pub outer_sign: Sign,
}

impl Halfspace<'_> {
    /// Orientation of `q` relative to the plane, normalised so that
    /// `Positive` means strictly outside.
    #[inline]
    pub fn side(&self, q: &[f64]) -> Sign {
        let s = match self.facet.len() {
            2 => orient2(self.facet[0], self.facet[1], q),
            3 => orient3(self.facet[0], self.facet[1], self.facet[2], q),
            n => panic!("facet of {n} points"),
        };
        s.times(self.outer_sign)
    }
}

/// True iff some corner of the box is strictly on the outer side of the
/// facet plane.
pub fn halfspace_box_overlap(h: &Halfspace<'_>, b: &Aabb) -> bool {
    let dim = h.facet.len();
    let mut corner = [0.0; MAX_DIM];
    (0..1usize << dim).any(|mask| {
        for (d, c) in corner.iter_mut().enumerate().take(dim) {
            *c = if mask >> d & 1 == 0 { b.lo[d] } else { b.hi[d] };
        }
        h.side(&corner[..dim]) == Sign::Positive
    })
}
