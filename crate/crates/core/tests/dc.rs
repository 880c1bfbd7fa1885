use std::collections::BTreeSet;

use dcdt::border::{cell_edge_length, GridIndex, IntersectionPolicy};
use dcdt::dc::{delaunay_dc, delaunay_dc_report, find_border, DcConfig, Divider, Strategy as Split};
use dcdt::geometry::{in_sphere_oriented, orient2, orient3, PointSet, Sign};
use dcdt::seq::{triangulate_ids, triangulate_seq};
use dcdt::triangulation::{validate_delaunay, Triangulation, NONE};
use dcdt::workload::{generate, Distribution, DistributionSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(kind: Distribution, dim: usize, n: usize, seed: u64) -> PointSet {
    generate(&DistributionSpec::new(kind, dim, n, seed)).unwrap()
}

fn config(k: usize, base_case: usize) -> DcConfig {
    DcConfig {
        base_case,
        k,
        ..DcConfig::default()
    }
}

/// Border simplices by definition: the circumsphere (outer halfspace for
/// infinite simplices) strictly contains a point of another part.
fn brute_border(p: &PointSet, t: &Triangulation, others: &[u32]) -> BTreeSet<u32> {
    let dim = p.dim();
    t.live()
        .filter(|(_, s)| {
            let v = s.vertices(dim);
            others.iter().any(|&q| {
                let q = p.point(q);
                if s.is_infinite(dim) {
                    let f: Vec<&[f64]> = v.iter().filter(|&&x| x != NONE).map(|&x| p.point(x)).collect();
                    let side = if dim == 2 { orient2(f[0], f[1], q) } else { orient3(f[0], f[1], f[2], q) };
                    side.times(s.sign()) == Sign::Positive
                } else {
                    let c: Vec<&[f64]> = v.iter().map(|&x| p.point(x)).collect();
                    in_sphere_oriented(&c, s.sign(), q) == Sign::Positive
                }
            })
        })
        .map(|(id, _)| id)
        .collect()
}

#[test]
fn exact_border_of_separated_clusters_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [2, 3] {
        let coords: Vec<f64> = (0..1200 * dim)
            .map(|j| {
                // the second cluster is shifted along x
                let shift = if j / dim >= 600 && j % dim == 0 { 3.0 } else { 0.0 };
                rng.random::<f64>() + shift
            })
            .collect();
        let p = PointSet::new(dim, coords).unwrap();
        let parts: Vec<Vec<u32>> = vec![(0..600).collect(), (600..1200).collect()];
        let partials: Vec<Triangulation> = parts.iter().map(|ids| triangulate_ids(&p, ids, 1).unwrap()).collect();
        let bbox = p.bounding_box();
        let edge = cell_edge_length(&bbox, dim, p.len(), 1.0);
        let indices: Vec<GridIndex> = parts
            .iter()
            .map(|ids| GridIndex::build(&p, ids, &bbox.lo[..dim], edge))
            .collect();
        let border = find_border(&p, &partials, &parts, &indices, IntersectionPolicy::Exact(1.0));
        for i in 0..2 {
            let found: BTreeSet<u32> = border.simplices[i].iter().copied().collect();
            assert_eq!(found, brute_border(&p, &partials[i], &parts[1 - i]), "dim {dim} part {i}");
            assert!(!found.is_empty());
        }
    }
}

#[test]
fn foreign_point_in_a_hole_is_found() {
    // part 0 surrounds an empty disc; part 1 has one point in the disc and
    // a cluster far away, so the conflict region around the disc does not
    // touch the hull of part 0
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut coords = Vec::new();
    let mut parts = vec![Vec::new(), Vec::new()];
    for i in 0..30 {
        for j in 0..30 {
            let x = (i as f64 + rng.random_range(-0.3..0.3)) / 29.0;
            let y = (j as f64 + rng.random_range(-0.3..0.3)) / 29.0;
            if (x - 0.5).powi(2) + (y - 0.5).powi(2) > 0.15f64.powi(2) {
                parts[0].push((coords.len() / 2) as u32);
                coords.extend([x, y]);
            }
        }
    }
    parts[1].push((coords.len() / 2) as u32);
    coords.extend([0.5, 0.5]);
    for _ in 0..20 {
        parts[1].push((coords.len() / 2) as u32);
        coords.extend([rng.random_range(3.0..4.0), rng.random_range(0.0..1.0)]);
    }
    let p = PointSet::new(2, coords).unwrap();
    let partials: Vec<Triangulation> = parts.iter().map(|ids| triangulate_ids(&p, ids, 1).unwrap()).collect();
    let bbox = p.bounding_box();
    let edge = cell_edge_length(&bbox, 2, p.len(), 1.0);
    let indices: Vec<GridIndex> = parts.iter().map(|ids| GridIndex::build(&p, ids, &bbox.lo[..2], edge)).collect();
    for policy in [IntersectionPolicy::Exact(1.0), IntersectionPolicy::Grid(1.0)] {
        let border = find_border(&p, &partials, &parts, &indices, policy);
        let found: BTreeSet<u32> = border.simplices[0].iter().copied().collect();
        let brute = brute_border(&p, &partials[0], &parts[1]);
        assert!(brute.is_subset(&found), "{policy:?}: {} of {} found", brute.intersection(&found).count(), brute.len());
    }
}

#[test]
fn border_sets_shrink_with_tighter_tests() {
    let p = points(Distribution::Uniform, 2, 10_000, 1);
    let mut sets = Vec::new();
    for policy in [IntersectionPolicy::Bbox, IntersectionPolicy::Grid(1.0), IntersectionPolicy::Exact(1.0)] {
        let c = DcConfig {
            policy,
            record_borders: true,
            ..config(2, 2000)
        };
        let (t, report) = delaunay_dc_report(&p, &c).unwrap();
        assert!(validate_delaunay(&t, &p).unwrap().is_valid());
        let top = report.merges.iter().find(|m| m.path.is_empty()).unwrap();
        sets.push(top.border_ids.clone().unwrap().into_iter().collect::<BTreeSet<u32>>());
    }
    assert!(sets[2].is_subset(&sets[1]));
    assert!(sets[1].is_subset(&sets[0]));
    assert!(sets[2].len() < sets[0].len());
}

#[test]
fn bubbles_split_in_two_are_valid() {
    let p = points(Distribution::Bubbles, 3, 5000, 2);
    let t = delaunay_dc(&p, &config(2, 500)).unwrap();
    let r = validate_delaunay(&t, &p).unwrap();
    assert!(r.is_valid(), "{r:?}");
    assert_eq!(t.canonicalize(), triangulate_seq(&p).unwrap().canonicalize());
}

#[test]
fn thread_count_does_not_change_the_output() {
    let p = points(Distribution::Normal, 3, 6000, 4);
    let base = DcConfig {
        strategy: Split::Bisect,
        ..config(4, 300)
    };
    let (t1, r1) = delaunay_dc_report(&p, &base).unwrap();
    let (t4, r4) = delaunay_dc_report(&p, &DcConfig { threads: 4, ..base }).unwrap();
    assert_eq!(t1.canonicalize(), t4.canonicalize());
    assert_eq!(r1.merges, r4.merges);
    assert_eq!(r1.leaves, r4.leaves);
}

#[test]
fn merge_counts_per_strategy() {
    let p = points(Distribution::Uniform, 2, 8000, 5);
    let (_, kway) = delaunay_dc_report(&p, &config(8, 200)).unwrap();
    assert_eq!(kway.merges.len(), 1);
    assert_eq!(kway.partition_sizes().len(), 8);
    let bisect = DcConfig {
        strategy: Split::Bisect,
        ..config(8, 200)
    };
    let (_, report) = delaunay_dc_report(&p, &bisect).unwrap();
    assert_eq!(report.merges.len(), 7);
    assert_eq!(report.partition_sizes().len(), 8);
    assert_eq!(report.partition_sizes().iter().sum::<usize>(), 8000);
}

fn policy() -> impl Strategy<Value = IntersectionPolicy> {
    prop_oneof![
        Just(IntersectionPolicy::Bbox),
        (0.5f64..3.0).prop_map(IntersectionPolicy::Grid),
        (0.5f64..3.0).prop_map(IntersectionPolicy::Exact),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_the_sequential_triangulation(kind in 0usize..6, dim in 2usize..=3, n in 30usize..800,
                                            k in prop_oneof![Just(2usize), Just(4)], bisect in any::<bool>(),
                                            cyclic in any::<bool>(), policy in policy(), base_case in 5usize..120,
                                            seed in any::<u64>()) {
        let p = points(Distribution::ALL[kind], dim, n, seed);
        let c = DcConfig {
            base_case,
            strategy: if bisect { Split::Bisect } else { Split::Kway },
            divider: if cyclic { Divider::Cyclic } else { Divider::default() },
            policy,
            k,
            threads: 1,
            seed,
            record_borders: false,
        };
        let t = delaunay_dc(&p, &c).unwrap();
        let r = validate_delaunay(&t, &p).unwrap();
        prop_assert!(r.is_valid(), "{:?}", r);
        prop_assert_eq!(t.canonicalize(), triangulate_seq(&p).unwrap().canonicalize());
    }
}
