//! Does a circumsphere (or the outer halfspace of a hull facet) reach into
//! another partition?
//!
//! Three tests of increasing precision: the partition's bounding box, the
//! occupied cells of a uniform grid searched through an AABB tree, and exact
//! in-sphere tests against the points inside the candidate cells.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    box_sphere_overlap, filter_sphere, halfspace_box_overlap, in_sphere_oriented, Aabb, Halfspace,
    PointSet, Sign, Sphere, MAX_DIM,
};

/// Border intersection test. Grid and exact tests carry the cell size
/// factor `c_G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionPolicy {
    Bbox,
    Grid(f64),
    Exact(f64),
}

impl IntersectionPolicy {
    pub fn cell_factor(&self) -> f64 {
        match *self {
            IntersectionPolicy::Bbox => 1.0,
            IntersectionPolicy::Grid(c) | IntersectionPolicy::Exact(c) => c,
        }
    }
}

/// A circumsphere query or a hull-facet halfspace query.
#[derive(Clone, Copy, Debug)]
pub enum BorderQuery<'a> {
    Simplex {
        vertices: &'a [&'a [f64]],
        orientation: Sign,
        sphere: Sphere,
    },
    Halfspace(Halfspace<'a>),
}

impl<'a> BorderQuery<'a> {
    /// Query for a finite simplex; the filter sphere is computed once here.
    pub fn simplex(vertices: &'a [&'a [f64]], orientation: Sign) -> BorderQuery<'a> {
        BorderQuery::Simplex {
            vertices,
            orientation,
            sphere: filter_sphere(vertices),
        }
    }

    fn overlaps(&self, b: &Aabb) -> bool {
        match self {
            BorderQuery::Simplex { sphere, .. } => box_sphere_overlap(b, sphere),
            BorderQuery::Halfspace(h) => halfspace_box_overlap(h, b),
        }
    }

    fn hits(&self, q: &[f64]) -> bool {
        match self {
            BorderQuery::Simplex {
                vertices,
                orientation,
                ..
            } => in_sphere_oriented(vertices, *orientation, q) == Sign::Positive,
            BorderQuery::Halfspace(h) => h.side(q) == Sign::Positive,
        }
    }
}

/// Edge length of grid cells: `c_G` times the mean point spacing of `n`
/// points in `bbox`. Flat boxes fall back to the diagonal.
pub fn cell_edge_length(bbox: &Aabb, dim: usize, n: usize, c_g: f64) -> f64 {
    let n = n.max(1) as f64;
    let vol = bbox.volume(dim);
    let spacing = if vol > 0.0 {
        (vol / n).powf(1.0 / dim as f64)
    } else if bbox.diagonal() > 0.0 {
        bbox.diagonal() / n.powf(1.0 / dim as f64)
    } else {
        1.0
    };
    c_g * spacing
}

#[derive(Clone, Debug)]
struct Cell {
    bbox: Aabb,
    points: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bbox: Aabb,
    /// Children, or `(cell, NO_CHILD)` for a leaf.
    left: u32,
    right: u32,
}

const NO_CHILD: u32 = u32::MAX;

/// Occupied cells of a uniform grid over one partition, with an AABB tree
/// over the cell boxes.
#[derive(Clone, Debug)]
pub struct GridIndex {
    dim: usize,
    cell_edge: f64,
    cells: Vec<Cell>,
    nodes: Vec<Node>,
    root_box: Aabb,
}

impl GridIndex {
    /// Builds the index for the points `ids`. Cells are anchored at
    /// `origin` (usually the lower corner of the global bounding box). Leaf
    /// boxes are the nominal cell boxes clipped to the partition's bounding
    /// box, so the root box is exactly that bounding box.
    pub fn build(points: &PointSet, ids: &[u32], origin: &[f64], cell_edge: f64) -> GridIndex {
        let dim = points.dim();
        let root_box = points.bounding_box_of(ids);
        let coord = |p: &[f64]| {
            let mut c = [0i64; MAX_DIM];
            for d in 0..dim {
                c[d] = ((p[d] - origin[d]) / cell_edge).floor() as i64;
            }
            c
        };
        let mut keyed: Vec<([i64; MAX_DIM], u32)> =
            ids.iter().map(|&i| (coord(points.point(i)), i)).collect();
        keyed.sort_unstable();
        let mut cells: Vec<Cell> = Vec::new();
        let mut coords: Vec<[i64; MAX_DIM]> = Vec::new();
        for (c, id) in keyed {
            if coords.last() != Some(&c) {
                let mut lo = [0.0; MAX_DIM];
                let mut hi = [0.0; MAX_DIM];
                for d in 0..dim {
                    lo[d] = (origin[d] + c[d] as f64 * cell_edge).max(root_box.lo[d]);
                    hi[d] = (origin[d] + (c[d] + 1) as f64 * cell_edge).min(root_box.hi[d]);
                }
                coords.push(c);
                cells.push(Cell {
                    bbox: Aabb { lo, hi },
                    points: Vec::new(),
                });
            }
            let cell = cells.last_mut().expect("cell pushed");
            // rounding in the cell computation must never leave a point outside
            cell.bbox.include(points.point(id));
            cell.points.push(id);
        }
        let mut index = GridIndex {
            dim,
            cell_edge,
            cells,
            nodes: Vec::new(),
            root_box,
        };
        let mut order: Vec<u32> = (0..index.cells.len() as u32).collect();
        if !order.is_empty() {
            index.build_tree(&mut order, &coords);
        }
        index
    }

    fn build_tree(&mut self, cells: &mut [u32], coords: &[[i64; MAX_DIM]]) -> u32 {
        let at = self.nodes.len() as u32;
        if cells.len() == 1 {
            self.nodes.push(Node {
                bbox: self.cells[cells[0] as usize].bbox,
                left: cells[0],
                right: NO_CHILD,
            });
            return at;
        }
        let bbox = cells
            .iter()
            .fold(Aabb::EMPTY, |b, &c| b.merge(&self.cells[c as usize].bbox));
        self.nodes.push(Node {
            bbox,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        let axis = bbox.longest_axis(self.dim);
        let mid = cells.len() / 2;
        cells.select_nth_unstable_by_key(mid, |&c| (coords[c as usize][axis], c));
        let (l, r) = cells.split_at_mut(mid);
        let left = self.build_tree(l, coords);
        let right = self.build_tree(r, coords);
        self.nodes[at as usize].left = left;
        self.nodes[at as usize].right = right;
        at
    }

    pub fn cell_edge_length(&self) -> f64 {
        self.cell_edge
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn root_box(&self) -> &Aabb {
        &self.root_box
    }

    pub fn leaf_boxes(&self) -> impl Iterator<Item = &Aabb> + '_ {
        self.cells.iter().map(|c| &c.bbox)
    }

    pub fn cell_points(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.cells.iter().map(|c| c.points.as_slice())
    }

    /// Occupied cells as `(box, point ids)`.
    pub fn cells(&self) -> impl Iterator<Item = (&Aabb, &[u32])> + '_ {
        self.cells.iter().map(|c| (&c.bbox, c.points.as_slice()))
    }

    /// Number of tree nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Height of the AABB tree (a single leaf has height 1).
    pub fn height(&self) -> usize {
        fn h(nodes: &[Node], i: u32) -> usize {
            let n = nodes[i as usize];
            if n.right == NO_CHILD {
                1
            } else {
                1 + h(nodes, n.left).max(h(nodes, n.right))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            h(&self.nodes, 0)
        }
    }

    /// Calls `f` on every leaf cell whose box passes `overlaps`, stopping
    /// early once `f` returns true. Returns whether it did.
    fn any_leaf(&self, overlaps: &dyn Fn(&Aabb) -> bool, f: &mut dyn FnMut(&Cell) -> bool) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = vec![0u32];
        while let Some(i) = stack.pop() {
            let n = self.nodes[i as usize];
            if !overlaps(&n.bbox) {
                continue;
            }
            if n.right == NO_CHILD {
                if f(&self.cells[n.left as usize]) {
                    return true;
                }
            } else {
                stack.push(n.right);
                stack.push(n.left);
            }
        }
        false
    }

    /// Bounding-box test.
    pub fn intersects_bbox(&self, q: &BorderQuery<'_>) -> bool {
        !self.cells.is_empty() && q.overlaps(&self.root_box)
    }

    /// True iff some occupied cell box passes the overlap test.
    pub fn intersects_grid(&self, q: &BorderQuery<'_>) -> bool {
        self.any_leaf(&|b| q.overlaps(b), &mut |_| true)
    }

    /// True iff some point of the partition is strictly inside the
    /// circumsphere (strictly outside the hull facet for halfspaces).
    pub fn intersects_exact(&self, q: &BorderQuery<'_>, points: &PointSet) -> bool {
        self.any_leaf(&|b| q.overlaps(b), &mut |cell| {
            cell.points.iter().any(|&id| q.hits(points.point(id)))
        })
    }

    pub fn intersects(&self, policy: IntersectionPolicy, q: &BorderQuery<'_>, points: &PointSet) -> bool {
        match policy {
            IntersectionPolicy::Bbox => self.intersects_bbox(q),
            IntersectionPolicy::Grid(_) => self.intersects_grid(q),
            IntersectionPolicy::Exact(_) => self.intersects_exact(q, points),
        }
    }
}

/// Sphere-only convenience wrappers matching the three policies.
pub fn intersects_bbox(sphere: &Sphere, index: &GridIndex) -> bool {
    !index.cells.is_empty() && box_sphere_overlap(&index.root_box, sphere)
}

pub fn intersects_grid(sphere: &Sphere, index: &GridIndex) -> bool {
    index.any_leaf(&|b| box_sphere_overlap(b, sphere), &mut |_| true)
}

/// Exact test of a finite simplex against the points of `index`.
pub fn intersects_exact(vertices: &[&[f64]], index: &GridIndex, points: &PointSet) -> crate::Result<bool> {
    let o = crate::geometry::orient(vertices);
    if o == Sign::Zero {
        return Err(crate::Error::DegenerateSimplex);
    }
    Ok(index.intersects_exact(&BorderQuery::simplex(vertices, o), points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index_of(rows: &[[f64; 2]], edge: f64) -> (PointSet, GridIndex) {
        let p = PointSet::from_rows(rows).unwrap();
        let ids: Vec<u32> = (0..rows.len() as u32).collect();
        let g = GridIndex::build(&p, &ids, &[0.0, 0.0], edge);
        (p, g)
    }

    fn sphere2(c: [f64; 2], r2: f64) -> Sphere {
        Sphere {
            center: [c[0], c[1], 0.0],
            radius_squared: r2,
        }
    }

    /// Points filling an L: the bottom row and left column of [0,10]².
    fn l_shape() -> Vec<[f64; 2]> {
        let mut rows = Vec::new();
        for i in 0..=10 {
            rows.push([i as f64 + 0.5, 0.5]);
            if i > 0 {
                rows.push([0.5, i as f64 + 0.5]);
            }
        }
        rows
    }

    #[test]
    fn single_point() {
        let (_, g) = index_of(&[[0.3, 0.4]], 1.0);
        assert_eq!(g.occupied_cells(), 1);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.height(), 1);
    }

    #[test]
    fn four_corners() {
        let (_, g) = index_of(&[[0., 0.], [10., 0.], [0., 10.], [10., 10.]], 1.0);
        assert_eq!(g.occupied_cells(), 4);
        assert_eq!(g.node_count(), 7);
        assert_eq!(g.root_box().hi[0], 10.0);
        assert!(g.height() <= 3);
    }

    #[test]
    fn l_shape_notch() {
        let (_, g) = index_of(&l_shape(), 1.0);
        let notch = sphere2([7.0, 7.0], 4.0);
        assert!(intersects_bbox(&notch, &g));
        assert!(!intersects_grid(&notch, &g));
        let far = sphere2([300.0, 300.0], 0.01);
        assert!(!intersects_bbox(&far, &g));
        let on_point = sphere2([0.5, 5.5], 0.01);
        assert!(intersects_grid(&on_point, &g));
    }

    #[test]
    fn exact_rejects_points_just_outside() {
        // triangle with circumcircle center (1,1), r² = 2 and points of the
        // other partition just outside it, within an overlapping cell
        let (p, g) = index_of(&[[2.45, 0.9], [0.9, 2.45]], 1.0);
        let tri: [&[f64]; 3] = [&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]];
        let sphere = crate::geometry::filter_sphere(&tri);
        assert!(intersects_grid(&sphere, &g));
        assert!(!intersects_exact(&tri, &g, &p).unwrap());
        let (p, g) = index_of(&[[1.0, 1.0]], 1.0);
        assert!(intersects_exact(&tri, &g, &p).unwrap());
    }

    #[test]
    fn halfspace_queries() {
        let (p, g) = index_of(&[[1.5, 0.5], [1.8, 0.2]], 1.0);
        let a: &[f64] = &[0.0, 0.0];
        let b: &[f64] = &[0.0, 1.0];
        let facet = [a, b];
        // orient((0,0),(0,1),(1,0)) is negative, so outer +x means Negative
        let h = Halfspace {
            facet: &facet,
            outer_sign: Sign::Negative,
        };
        let q = BorderQuery::Halfspace(h);
        assert!(g.intersects_bbox(&q));
        assert!(g.intersects_grid(&q));
        assert!(g.intersects_exact(&q, &p));
        let inner = Halfspace {
            facet: &facet,
            outer_sign: Sign::Positive,
        };
        assert!(!g.intersects_exact(&BorderQuery::Halfspace(inner), &p));
    }

    #[test]
    fn cell_edge_convention() {
        let b = Aabb::new(&[0.0, 0.0, 0.0], &[2.0, 2.0, 2.0]);
        assert!((cell_edge_length(&b, 3, 8, 1.0) - 1.0).abs() < 1e-12);
        assert!((cell_edge_length(&b, 3, 8, 0.5) - 0.5).abs() < 1e-12);
    }
}
