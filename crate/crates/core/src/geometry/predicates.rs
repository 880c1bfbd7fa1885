//! Exact orientation and in-sphere decisions.
//!
//! The sign of each determinant is computed with Shewchuk's adaptive
//! floating-point expansions: a fast filtered evaluation that falls back to
//! exact arithmetic only when the filter cannot certify the sign. Signs are
//! exact for all finite inputs that do not overflow or underflow.

use robust::{Coord, Coord3D};

/// Sign of a determinant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(i8)]
pub enum Sign {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

impl Sign {
    #[inline]
    pub fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Positive
        } else if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    #[inline]
    pub fn from_i8(v: i8) -> Sign {
        Sign::of(v as f64)
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        self as i8
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }

    #[inline]
    pub fn times(self, other: Sign) -> Sign {
        Sign::from_i8(self.as_i8() * other.as_i8())
    }
}

#[inline]
fn c2(p: &[f64]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn c3(p: &[f64]) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

/// Orientation of a triangle: `+1` for counterclockwise.
#[inline]
pub fn orient2(a: &[f64], b: &[f64], c: &[f64]) -> Sign {
    Sign::of(robust::orient2d(c2(a), c2(b), c2(c)))
}

/// Orientation of a tetrahedron: `+1` when `d` lies on the side of plane
/// `abc` from which `abc` appears counterclockwise (right-handed).
#[inline]
pub fn orient3(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Sign {
    // robust::orient3d uses the opposite handedness.
    Sign::of(robust::orient3d(c3(a), c3(b), c3(c), c3(d))).flip()
}

/// Orientation of `D + 1` points in `D` dimensions (`D` = coordinate count).
///
/// Returns `Sign::Zero` for affinely dependent points.
#[inline]
pub fn orient(points: &[&[f64]]) -> Sign {
    match points.len() {
        3 => orient2(points[0], points[1], points[2]),
        4 => orient3(points[0], points[1], points[2], points[3]),
        n => panic!("orient expects 3 or 4 points, got {n}"),
    }
}

/// Raw in-circle sign: `+1` if `q` is inside the circle through `a, b, c`
/// when `a, b, c` is counterclockwise; the sign flips for clockwise input.
#[inline]
pub fn in_circle_raw(a: &[f64], b: &[f64], c: &[f64], q: &[f64]) -> Sign {
    Sign::of(robust::incircle(c2(a), c2(b), c2(c), c2(q)))
}

/// Raw in-sphere sign: `+1` if `q` is inside the sphere through `a..d` when
/// `orient3(a, b, c, d) = +1`; the sign flips for negative orientation.
#[inline]
pub fn in_sphere3_raw(a: &[f64], b: &[f64], c: &[f64], d: &[f64], q: &[f64]) -> Sign {
    Sign::of(robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(q))).flip()
}

/// In-sphere test against a positively oriented simplex.
///
/// `+1` when `query` lies strictly inside the circumsphere, `0` on it, `-1`
/// outside. The result is the raw determinant sign, so callers holding a
/// negatively oriented simplex must flip it (see [`in_sphere_oriented`]).
#[inline]
pub fn in_sphere(simplex: &[&[f64]], query: &[f64]) -> Sign {
    debug_assert_eq!(orient(simplex), Sign::Positive, "simplex must be positively oriented");
    in_sphere_raw(simplex, query)
}

#[inline]
pub(crate) fn in_sphere_raw(simplex: &[&[f64]], query: &[f64]) -> Sign {
    match simplex.len() {
        3 => in_circle_raw(simplex[0], simplex[1], simplex[2], query),
        4 => in_sphere3_raw(simplex[0], simplex[1], simplex[2], simplex[3], query),
        n => panic!("in_sphere expects 3 or 4 points, got {n}"),
    }
}

/// In-sphere test for a simplex of known orientation `orientation`.
#[inline]
pub fn in_sphere_oriented(simplex: &[&[f64]], orientation: Sign, query: &[f64]) -> Sign {
    in_sphere_raw(simplex, query).times(orientation)
}

/// Exact collinearity of three points in 3D: collinear iff every axis-plane
/// projection is collinear.
pub fn collinear3(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    let proj = |p: &[f64], i: usize, j: usize| [p[i], p[j]];
    [(0, 1), (0, 2), (1, 2)].iter().all(|&(i, j)| {
        orient2(&proj(a, i, j), &proj(b, i, j), &proj(c, i, j)) == Sign::Zero
    })
}
