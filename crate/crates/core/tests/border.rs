use dcdt::border::{cell_edge_length, BorderQuery, GridIndex};
use dcdt::geometry::{box_sphere_overlap, circumsphere, in_sphere_oriented, orient, PointSet, Sign};
use dcdt::workload::{generate, Distribution, DistributionSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(dim: usize, n: usize, seed: u64) -> PointSet {
    generate(&DistributionSpec::new(Distribution::Uniform, dim, n, seed)).unwrap()
}

fn index(points: &PointSet, ids: &[u32], c_g: f64) -> GridIndex {
    let bbox = points.bounding_box();
    let edge = cell_edge_length(&bbox, points.dim(), ids.len(), c_g);
    GridIndex::build(points, ids, &bbox.lo[..points.dim()], edge)
}

/// A random non-degenerate simplex of size up to 0.2 around a center in
/// `[-0.3, 1.3]`.
fn random_simplex(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<Vec<f64>>, Sign) {
    loop {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.3..1.3)).collect();
        let v: Vec<Vec<f64>> = (0..=dim)
            .map(|_| c.iter().map(|x| x + rng.random_range(-0.1..0.1)).collect())
            .collect();
        let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
        let o = orient(&refs);
        if o != Sign::Zero {
            return (v, o);
        }
    }
}

#[test]
fn exact_implies_grid_implies_bbox() {
    for dim in [2, 3] {
        let p = uniform(dim, 2000, dim as u64);
        // one half of the unit cube, so plenty of queries miss
        let ids: Vec<u32> = (0..p.len() as u32).filter(|&i| p.point(i)[0] < 0.5).collect();
        let grid = index(&p, &ids, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0; 3];
        for _ in 0..3000 {
            let (v, o) = random_simplex(&mut rng, dim);
            let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
            let q = BorderQuery::simplex(&refs, o);
            let (e, g, b) = (grid.intersects_exact(&q, &p), grid.intersects_grid(&q), grid.intersects_bbox(&q));
            assert!(!e || g, "exact without grid");
            assert!(!g || b, "grid without bbox");
            counts[0] += e as usize;
            counts[1] += g as usize;
            counts[2] += b as usize;
        }
        // the chain must not collapse into one test
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "{counts:?}");
    }
}

#[test]
fn exact_matches_a_scan_of_all_points() {
    let p = uniform(3, 3000, 4);
    let ids: Vec<u32> = (0..p.len() as u32).step_by(2).collect();
    let grid = index(&p, &ids, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let (v, o) = random_simplex(&mut rng, 3);
        let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
        let brute = ids
            .iter()
            .any(|&i| in_sphere_oriented(&refs, o, p.point(i)) == Sign::Positive);
        assert_eq!(grid.intersects_exact(&BorderQuery::simplex(&refs, o), &p), brute);
    }
}

#[test]
fn grid_matches_a_scan_of_leaf_boxes() {
    let p = uniform(2, 5000, 6);
    let ids: Vec<u32> = (0..p.len() as u32).collect();
    let grid = index(&p, &ids, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (v, _) = random_simplex(&mut rng, 2);
        // shrink the queries so some fall into empty cells
        let v: Vec<Vec<f64>> = v.iter().map(|x| x.iter().map(|c| 0.5 + 0.05 * (c - 0.5)).collect()).collect();
        let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
        let o = orient(&refs);
        if o == Sign::Zero {
            continue;
        }
        let sphere = circumsphere(&refs).unwrap();
        let scan = grid.leaf_boxes().any(|b| box_sphere_overlap(b, &sphere));
        assert_eq!(grid.intersects_grid(&BorderQuery::simplex(&refs, o)), scan);
    }
}

#[test]
fn leaves_cover_every_point_once() {
    let p = generate(&DistributionSpec::new(Distribution::Bubbles, 3, 4000, 3)).unwrap();
    let ids: Vec<u32> = (0..p.len() as u32).filter(|i| i % 3 != 0).collect();
    let grid = index(&p, &ids, 1.0);
    let mut seen: Vec<u32> = grid.cell_points().flatten().copied().collect();
    seen.sort_unstable();
    assert_eq!(seen, ids);
    for (cell, b) in grid.cell_points().zip(grid.leaf_boxes()) {
        assert!(cell.iter().all(|&i| b.contains(p.point(i))));
        assert!(grid.root_box().contains_box(b));
    }
    assert_eq!(grid.occupied_cells(), grid.leaf_boxes().count());
}

#[test]
fn uniform_grid_occupancy() {
    // about n cells; a Poisson cell is occupied with probability 1 - 1/e
    let p = uniform(3, 10_000, 8);
    let ids: Vec<u32> = (0..p.len() as u32).collect();
    let bbox = p.bounding_box();
    let edge = cell_edge_length(&bbox, 3, ids.len(), 1.0);
    let grid = GridIndex::build(&p, &ids, &bbox.lo, edge);
    let total: f64 = (0..3).map(|d| (bbox.extent(d) / edge).ceil()).product();
    let occupancy = grid.occupied_cells() as f64 / total;
    assert!((0.55..=1.0).contains(&occupancy), "{occupancy}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_holds_for_any_cell_factor(dim in 2usize..=3, n in 10usize..500, c_g in 0.25f64..4.0, seed in any::<u64>()) {
        let p = uniform(dim, n, seed);
        let ids: Vec<u32> = (0..n as u32).filter(|i| i % 2 == 0).collect();
        let grid = index(&p, &ids, c_g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let (v, o) = random_simplex(&mut rng, dim);
            let refs: Vec<&[f64]> = v.iter().map(Vec::as_slice).collect();
            let q = BorderQuery::simplex(&refs, o);
            prop_assert!(!grid.intersects_exact(&q, &p) || grid.intersects_grid(&q));
            prop_assert!(!grid.intersects_grid(&q) || grid.intersects_bbox(&q));
        }
    }
}
