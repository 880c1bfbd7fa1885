use dcdt::bench::{measure, run_one, GridSpec, RunConfig, Validity, CSV_HEADER};
use dcdt::dc::DcConfig;
use dcdt::workload::{generate, Distribution, DistributionSpec};
use proptest::prelude::*;

fn single(k: usize) -> RunConfig {
    let toml = format!("dims = [2]\nns = [3000]\nks = [{k}]\nbase_case = 200\n");
    GridSpec::from_toml(&toml).unwrap().configs().unwrap().remove(0)
}

fn column<'a>(row: &'a str, name: &str) -> &'a str {
    let i = CSV_HEADER.split(',').position(|h| h == name).unwrap();
    row.split(',').nth(i).unwrap()
}

#[test]
fn a_single_part_has_no_overhead_and_no_variation() {
    let r = run_one(&single(1));
    let m = r.outcome.as_ref().unwrap();
    assert_eq!(m.o_dt, 1.0);
    assert_eq!(m.cv, None);
    assert_eq!(m.partition_sizes, vec![3000]);
    let row = r.csv_row();
    assert_eq!(column(&row, "cv"), "");
    assert_eq!(column(&row, "o_dt"), "1");
    assert_eq!(column(&row, "merge_steps"), "0");
}

#[test]
fn rows_always_have_every_column() {
    let width = CSV_HEADER.split(',').count();
    let ok = run_one(&single(4));
    assert_eq!(ok.csv_row().split(',').count(), width);
    assert_eq!(ok.outcome.as_ref().unwrap().validity, Validity::Ok);
    let mut bad = single(4);
    bad.dim = 4;
    let err = run_one(&bad);
    assert!(err.outcome.is_err());
    let row = err.csv_row();
    assert_eq!(row.split(',').count(), width);
    assert!(column(&row, "status").starts_with("error"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_agree_with_the_report(kind in 0usize..6, dim in 2usize..=3, n in 500usize..3000,
                                     k in prop_oneof![Just(2usize), Just(4), Just(8)], seed in any::<u64>()) {
        let p = generate(&DistributionSpec::new(Distribution::ALL[kind], dim, n, seed)).unwrap();
        let c = DcConfig { base_case: 50, k, seed, ..DcConfig::default() };
        let (t, m) = measure(&p, &c, usize::MAX).unwrap();
        prop_assert!(m.o_dt >= 1.0);
        prop_assert_eq!(m.partition_sizes.iter().sum::<usize>(), n);
        prop_assert_eq!(m.finite_simplices, t.finite_count());
        prop_assert_eq!(m.validity, Validity::Ok);
        // overhead recomputed from its definition
        let extra: usize = m.sample_sizes.iter().sum::<usize>() + m.border_vertices.iter().sum::<usize>();
        prop_assert!((m.o_dt - (n + extra) as f64 / n as f64).abs() < 1e-12);
        let sizes: Vec<f64> = m.partition_sizes.iter().map(|&s| s as f64).collect();
        let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let sd = (sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (sizes.len() - 1) as f64).sqrt();
        prop_assert!((m.cv.unwrap() - sd / mean).abs() < 1e-12);
    }
}
