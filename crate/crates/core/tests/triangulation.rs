use std::collections::HashSet;

use dcdt::geometry::{orient2, PointSet, Sign};
use dcdt::seq::{triangulate_ids, triangulate_seq};
use dcdt::triangulation::{
    facet_key, validate_delaunay, validate_delaunay_brute, FacetKey, Location, Simplex, Triangulation, NONE,
};
use dcdt::workload::{generate, Distribution, DistributionSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn from_triangles(points: &PointSet, tris: &[[u32; 3]]) -> Triangulation {
    let mut t = Triangulation::new(2);
    for tri in tris {
        t.push(Simplex::from_unsorted(2, [tri[0], tri[1], tri[2], NONE], Sign::Zero));
    }
    t.relink(points).expect("relink");
    t
}

fn random_points(dim: usize, n: usize, seed: u64) -> PointSet {
    generate(&DistributionSpec::new(Distribution::Uniform, dim, n, seed)).unwrap()
}

#[test]
fn facet_keys_rarely_collide() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut collisions = 0;
    for _ in 0..1_000_000 {
        let a: [u32; 3] = [rng.random(), rng.random(), rng.random()];
        let mut b = a;
        b[rng.random_range(0..3)] = rng.random();
        let (mut sa, mut sb) = (a, b);
        sa.sort_unstable();
        sb.sort_unstable();
        if sa != sb && FacetKey::of(&a) == FacetKey::of(&b) {
            collisions += 1;
        }
    }
    assert_eq!(collisions, 0);
    assert_ne!(FacetKey::of(&[1, 2]), FacetKey::of(&[1, 3]));
}

#[test]
fn non_delaunay_diagonal_is_reported() {
    let p = PointSet::from_rows(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [2.9, 2.9]]).unwrap();
    let bad = from_triangles(&p, &[[0, 1, 2], [1, 2, 3]]);
    let report = validate_delaunay(&bad, &p).unwrap();
    assert!(!report.empty_sphere_violations.is_empty());
    let good = from_triangles(&p, &[[0, 1, 3], [0, 2, 3]]);
    assert!(validate_delaunay(&good, &p).unwrap().is_valid());
    assert_eq!(triangulate_seq(&p).unwrap().canonicalize(), good.canonicalize());
}

#[test]
fn four_point_example() {
    let p = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
    let t = triangulate_seq(&p).unwrap();
    assert_eq!(t.canonicalize(), vec![vec![0, 1, 2], vec![1, 2, 3]]);
    // the other diagonal fails the oracle
    let other = from_triangles(&p, &[[0, 1, 3], [0, 2, 3]]);
    assert!(!validate_delaunay(&other, &p).unwrap().is_valid());
}

#[test]
fn random_3d_points() {
    let p = random_points(3, 1000, 5);
    let t = triangulate_seq(&p).unwrap();
    let r = validate_delaunay(&t, &p).unwrap();
    assert!(r.is_valid(), "{r:?}");
    let ratio = t.finite_count() as f64 / 1000.0;
    assert!((4.0..=8.0).contains(&ratio), "{ratio}");
}

#[test]
fn hull_simplices_of_a_perturbed_grid() {
    let mut rows = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            rows.push([i as f64, j as f64]);
        }
    }
    rows[55][0] += 0.3;
    let p = PointSet::from_rows(&rows).unwrap();
    let t = triangulate_seq(&p).unwrap();
    // gift-wrapping style oracle: an edge is on the hull iff every point is
    // on one closed side of it
    let on_hull = |a: u32, b: u32| {
        let side: HashSet<Sign> = (0..p.len() as u32)
            .map(|c| orient2(p.point(a), p.point(b), p.point(c)))
            .filter(|&s| s != Sign::Zero)
            .collect();
        side.len() <= 1
    };
    let touches_hull = |s: &Simplex| {
        let v = s.vertices(2);
        [(0, 1), (0, 2), (1, 2)].iter().any(|&(i, j)| on_hull(v[i], v[j]))
    };
    let hull = t.hull_simplices();
    let finite_in_hull: HashSet<u32> = hull
        .iter()
        .copied()
        .filter(|&id| !t.simplex(id).is_infinite(2))
        .collect();
    for (id, s) in t.finite() {
        assert_eq!(finite_in_hull.contains(&id), touches_hull(s), "simplex {:?}", s.vertices(2));
    }
    // 36 unit hull edges, each with one infinite simplex
    assert_eq!(hull.len() - finite_in_hull.len(), 36);
}

#[test]
fn accelerated_and_brute_validators_agree_on_tampered_input() {
    let p = random_points(2, 300, 3);
    let t = triangulate_seq(&p).unwrap();
    let mut rows: Vec<[u32; 3]> = t
        .canonicalize()
        .into_iter()
        .map(|v| [v[0], v[1], v[2]])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut flips = 0;
    // flip a few interior edges with convex quadrilaterals
    while flips < 5 {
        let i = rng.random_range(0..rows.len());
        let j = (0..rows.len()).find(|&j| j != i && rows[i].iter().filter(|v| rows[j].contains(v)).count() == 2);
        let Some(j) = j else { continue };
        let shared: Vec<u32> = rows[i].iter().filter(|v| rows[j].contains(v)).copied().collect();
        let a = *rows[i].iter().find(|v| !shared.contains(v)).unwrap();
        let b = *rows[j].iter().find(|v| !shared.contains(v)).unwrap();
        let s0 = orient2(p.point(a), p.point(b), p.point(shared[0]));
        let s1 = orient2(p.point(a), p.point(b), p.point(shared[1]));
        if s0 == s1 || s0 == Sign::Zero || s1 == Sign::Zero {
            continue;
        }
        rows[i] = [a, b, shared[0]];
        rows[j] = [a, b, shared[1]];
        flips += 1;
    }
    let tampered = from_triangles(&p, &rows);
    let fast = validate_delaunay(&tampered, &p).unwrap();
    let brute = validate_delaunay_brute(&tampered, &p).unwrap();
    assert!(!fast.is_valid());
    let mut a = fast.empty_sphere_violations.clone();
    let mut b = brute.empty_sphere_violations.clone();
    a.sort();
    b.sort();
    assert_eq!(a, b);
    assert_eq!(fast.violation_count(), brute.violation_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn insertion_order_does_not_change_the_result(dim in 2usize..=3, n in 5usize..400, seed in any::<u64>(), order in any::<u64>()) {
        let p = random_points(dim, n, seed);
        let mut ids: Vec<u32> = (0..n as u32).collect();
        let a = triangulate_ids(&p, &ids, 1).unwrap();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(order));
        let b = triangulate_ids(&p, &ids, order).unwrap();
        prop_assert_eq!(a.canonicalize(), b.canonicalize());
        let r = validate_delaunay(&b, &p).unwrap();
        prop_assert!(r.is_valid());
    }

    #[test]
    fn facet_index_contains_every_facet(dim in 2usize..=3, n in 5usize..300, seed in any::<u64>()) {
        let p = random_points(dim, n, seed);
        let t = triangulate_seq(&p).unwrap();
        let index = t.facet_index();
        for (id, s) in t.live() {
            for d in 0..=dim {
                let entry = index.get(&facet_key(s, dim, d));
                prop_assert!(entry.is_some_and(|e| e.contains(&(id, d as u8))));
            }
        }
        // every facet is shared by exactly two simplices
        prop_assert!(index.values().all(|e| e.len() == 2));
    }

    #[test]
    fn relinking_exported_simplices_restores_a_valid_triangulation(dim in 2usize..=3, n in 5usize..300, seed in any::<u64>()) {
        let p = random_points(dim, n, seed);
        let t = triangulate_seq(&p).unwrap();
        let mut buf = Vec::new();
        t.write_csv(p.len(), &mut buf).unwrap();
        let (mut back, count) = Triangulation::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(count, n);
        back.relink(&p).unwrap();
        prop_assert_eq!(back.canonicalize(), t.canonicalize());
        prop_assert!(validate_delaunay(&back, &p).unwrap().is_valid());
    }

    #[test]
    fn locate_finds_the_containing_simplex(dim in 2usize..=3, n in 5usize..300, seed in any::<u64>(),
                                           q in prop::array::uniform3(-0.5f64..1.5)) {
        let p = random_points(dim, n, seed);
        let t = triangulate_seq(&p).unwrap();
        let q = &q[..dim];
        // containment by brute force: no facet has q strictly beyond it
        let contains = |s: &Simplex| {
            let v = s.vertices(dim);
            (0..=dim).all(|d| {
                let mut c: Vec<&[f64]> = v.iter().map(|&x| p.point(x)).collect();
                c[d] = q;
                dcdt::geometry::orient(&c).times(s.sign()) != Sign::Negative
            })
        };
        let inside = t.finite().any(|(_, s)| contains(s));
        for (start, _) in t.live().step_by(7) {
            match t.locate(&p, start, q) {
                Location::Inside(s) => prop_assert!(contains(t.simplex(s))),
                Location::Outside(s) => {
                    prop_assert!(!inside);
                    prop_assert!(!t.simplex(s).is_infinite(dim));
                }
            }
        }
    }
}
