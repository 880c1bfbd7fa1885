use dcdt::graph::{cut_weight, partition, partition_traced, GraphPartition, RefinementTrace, SampleGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random spanning tree plus extra edges, weights in `1..=100`.
fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> SampleGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v) as u32, v as u32, rng.random_range(1..=100)));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n) as u32;
        let b = rng.random_range(0..n) as u32;
        if a != b {
            edges.push((a.min(b), a.max(b), rng.random_range(1..=100)));
        }
    }
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    edges.dedup_by_key(|e| (e.0, e.1));
    SampleGraph::from_edges(n, &edges).unwrap()
}

#[test]
fn balance_holds_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for i in 0..1000 {
        let k = [2, 4, 8, 16][i % 4];
        let n = rng.random_range(k.max(20)..=500);
        let g = random_connected(&mut rng, n, n * 2);
        let p = partition(&g, k, 0.05, i as u64).unwrap();
        let cap = (1.05 * n.div_ceil(k) as f64).floor() as usize;
        assert_eq!(GraphPartition::max_part_size(n, k, 0.05), cap);
        if p.part_sizes().iter().any(|&s| s > cap) || p.part_sizes().len() != k {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn refinement_never_worsens_a_balanced_cut() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut levels = 0;
    for i in 0..200 {
        let n = rng.random_range(50..=600);
        let g = random_connected(&mut rng, n, 3 * n);
        let mut trace = RefinementTrace::default();
        partition_traced(&g, [2, 4, 8][i % 3], 0.05, i as u64, &mut trace).unwrap();
        for &(before, after, balanced) in &trace.levels {
            if balanced {
                levels += 1;
                assert!(after <= before, "graph {i}: {before} -> {after}");
            }
        }
    }
    assert!(levels > 200);
}

fn optimum_bisection(g: &SampleGraph, cap: usize) -> u64 {
    let n = g.vertex_count();
    let mut best = u64::MAX;
    // vertex 0 stays on side 0; that halves the search without losing optima
    for mask in 0u32..(1 << (n - 1)) {
        let labels: Vec<u32> = (0..n).map(|v| if v == 0 { 0 } else { mask >> (v - 1) & 1 }).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        if ones == 0 || ones > cap || n - ones > cap {
            continue;
        }
        best = best.min(cut_weight(g, &labels));
    }
    best
}

#[test]
fn near_optimal_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut good = 0;
    for i in 0..100 {
        let n = rng.random_range(4..=12);
        let g = random_connected(&mut rng, n, n);
        let cap = GraphPartition::max_part_size(n, 2, 0.05);
        let opt = optimum_bisection(&g, cap);
        let p = partition(&g, 2, 0.05, i).unwrap();
        let cut = cut_weight(&g, &p.labels);
        assert!(cut >= opt);
        if cut as f64 <= 1.5 * opt as f64 {
            good += 1;
        }
    }
    assert!(good >= 90, "{good}/100 within 1.5x of the optimum");
}

#[test]
fn partitions_are_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_connected(&mut rng, 300, 900);
    let a = partition(&g, 8, 0.05, 9).unwrap();
    let b = partition(&g, 8, 0.05, 9).unwrap();
    assert_eq!(a.labels, b.labels);
}
