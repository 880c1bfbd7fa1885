//! Experiment runner: a grid of configurations in, one CSV row per run out.
//!
//! # CSV schema
//!
//! One header line ([`CSV_HEADER`]) followed by one row per run. List
//! columns are `;`-separated. Times are seconds.
//!
//! | column | content |
//! |---|---|
//! | `distribution` .. `base_case` | configuration echo; `distribution` is `input` for point files |
//! | `status` | `ok` or `error: <message>` |
//! | `partition_sizes` | sizes of the final partitions |
//! | `cv` | coefficient of variation of those sizes, empty for one part |
//! | `max_ideal_deviation` | largest `abs(p_i / (N/k) - 1)` |
//! | `o_dt` | overtriangulation factor |
//! | `merge_steps` | number of divide/merge steps |
//! | `sample_sizes`, `border_vertices` | per merge step |
//! | `cut_weight` | summed over merge steps |
//! | `finite_simplices`, `fallbacks` | |
//! | `validity` | `ok`, `violations=<count>` or `skipped` |
//! | `t_divide` .. `t_total` | wall time per phase of the top step |
//!
//! Every column before `t_divide` is deterministic for a fixed grid.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::border::IntersectionPolicy;
use crate::dc::{delaunay_dc_report, DcConfig, DcReport, Divider, PhaseTimes, Strategy};
use crate::error::{Error, Result};
use crate::metrics::{coefficient_of_variation, max_ideal_deviation, overtriangulation};
use crate::partition::{SampleRule, WeightFn};
use crate::geometry::PointSet;
use crate::triangulation::{validate_with_limit, Triangulation, DEFAULT_ORACLE_LIMIT};
use crate::workload::{generate, Distribution, DistributionSpec};

pub const CSV_HEADER: &str = "distribution,dim,n,k,strategy,divider,weights,sample,policy,seed,threads,base_case,\
status,partition_sizes,cv,max_ideal_deviation,o_dt,merge_steps,sample_sizes,border_vertices,cut_weight,\
finite_simplices,fallbacks,validity,t_divide,t_partial,t_border_detect,t_border_dt,t_merge,t_repair,t_total";

fn bad(what: &str, s: &str) -> Error {
    Error::InvalidConfig(format!("unknown {what} {s:?}"))
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kway" => Ok(Strategy::Kway),
            "bisect" => Ok(Strategy::Bisect),
            _ => Err(bad("strategy", s)),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Kway => "kway",
            Strategy::Bisect => "bisect",
        })
    }
}

impl FromStr for WeightFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(WeightFn::Constant),
            "inverse" => Ok(WeightFn::Inverse),
            "log" => Ok(WeightFn::Logarithmic),
            "linear" => Ok(WeightFn::Linear),
            _ => Err(bad("weight function", s)),
        }
    }
}

impl fmt::Display for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightFn::Constant => "constant",
            WeightFn::Inverse => "inverse",
            WeightFn::Logarithmic => "log",
            WeightFn::Linear => "linear",
        })
    }
}

fn parse_factor(what: &str, s: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| bad(what, s))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(bad(what, s))
    }
}

impl FromStr for SampleRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rule = match s {
            "sqrt" => SampleRule::SqrtN,
            "log" => SampleRule::LogN,
            _ => match s.strip_prefix("frac=") {
                Some(v) => SampleRule::Fraction(parse_factor("sample rule", s, v)?),
                None => return Err(bad("sample rule", s)),
            },
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl fmt::Display for SampleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleRule::SqrtN => f.write_str("sqrt"),
            SampleRule::LogN => f.write_str("log"),
            SampleRule::Fraction(x) => write!(f, "frac={x}"),
        }
    }
}

impl FromStr for IntersectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bbox" {
            return Ok(IntersectionPolicy::Bbox);
        }
        if let Some(v) = s.strip_prefix("grid=") {
            return Ok(IntersectionPolicy::Grid(parse_factor("policy", s, v)?));
        }
        if let Some(v) = s.strip_prefix("exact=") {
            return Ok(IntersectionPolicy::Exact(parse_factor("policy", s, v)?));
        }
        Err(bad("policy", s))
    }
}

impl fmt::Display for IntersectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntersectionPolicy::Bbox => f.write_str("bbox"),
            IntersectionPolicy::Grid(c) => write!(f, "grid={c}"),
            IntersectionPolicy::Exact(c) => write!(f, "exact={c}"),
        }
    }
}

/// Divider choice without its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DividerKind {
    Sample,
    Cyclic,
}

impl FromStr for DividerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(DividerKind::Sample),
            "cyclic" => Ok(DividerKind::Cyclic),
            _ => Err(bad("divider", s)),
        }
    }
}

impl fmt::Display for DividerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DividerKind::Sample => "sample",
            DividerKind::Cyclic => "cyclic",
        })
    }
}

/// Parameter grid, usually read from TOML. Every list is one axis of the
/// Cartesian product; all fields have defaults.
///
/// ```toml
/// distributions = ["uniform", "bubbles"]
/// dims = [3]
/// ns = [10000]
/// ks = [2, 4]
/// strategies = ["kway"]
/// dividers = ["sample"]
/// weights = ["log"]
/// samples = ["sqrt"]
/// policies = ["grid=1"]
/// seeds = [1, 2, 3]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub distributions: Vec<String>,
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub strategies: Vec<String>,
    pub dividers: Vec<String>,
    pub weights: Vec<String>,
    pub samples: Vec<String>,
    pub policies: Vec<String>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub base_case: usize,
    pub epsilon: f64,
    pub oracle_limit: usize,
    /// Run configurations concurrently, each with one thread.
    pub concurrent: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            distributions: vec!["uniform".into()],
            dims: vec![3],
            ns: vec![10_000],
            ks: vec![4],
            strategies: vec!["kway".into()],
            dividers: vec!["sample".into()],
            weights: vec!["log".into()],
            samples: vec!["sqrt".into()],
            policies: vec!["grid=1".into()],
            seeds: vec![1],
            threads: 1,
            base_case: 10_000,
            epsilon: 0.05,
            oracle_limit: DEFAULT_ORACLE_LIMIT,
            concurrent: false,
        }
    }
}

impl GridSpec {
    pub fn from_toml(text: &str) -> Result<GridSpec> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Expands the grid; fails on the first unparsable token.
    pub fn configs(&self) -> Result<Vec<RunConfig>> {
        fn parse_all<T: FromStr<Err = Error>>(v: &[String]) -> Result<Vec<T>> {
            v.iter().map(|s| s.parse()).collect()
        }
        let dists: Vec<Distribution> = parse_all(&self.distributions)?;
        let strategies: Vec<Strategy> = parse_all(&self.strategies)?;
        let dividers: Vec<DividerKind> = parse_all(&self.dividers)?;
        let weights: Vec<WeightFn> = parse_all(&self.weights)?;
        let samples: Vec<SampleRule> = parse_all(&self.samples)?;
        let policies: Vec<IntersectionPolicy> = parse_all(&self.policies)?;
        let threads = if self.concurrent { 1 } else { self.threads };
        let mut out = Vec::new();
        for &distribution in &dists {
            for &dim in &self.dims {
                for &n in &self.ns {
                    for &k in &self.ks {
                        for &strategy in &strategies {
                            for &divider in &dividers {
                                for &weight_fn in &weights {
                                    for &sample_rule in &samples {
                                        for &policy in &policies {
                                            for &seed in &self.seeds {
                                                out.push(RunConfig {
                                                    distribution: Some(distribution),
                                                    dim,
                                                    n,
                                                    k,
                                                    strategy,
                                                    divider,
                                                    weight_fn,
                                                    sample_rule,
                                                    policy,
                                                    seed,
                                                    threads,
                                                    base_case: self.base_case,
                                                    epsilon: self.epsilon,
                                                    oracle_limit: self.oracle_limit,
                                                });
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One point of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` for points read from a file.
    pub distribution: Option<Distribution>,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub strategy: Strategy,
    pub divider: DividerKind,
    pub weight_fn: WeightFn,
    pub sample_rule: SampleRule,
    pub policy: IntersectionPolicy,
    pub seed: u64,
    pub threads: usize,
    pub base_case: usize,
    pub epsilon: f64,
    pub oracle_limit: usize,
}

impl RunConfig {
    pub fn dc_config(&self) -> DcConfig {
        DcConfig {
            base_case: self.base_case,
            strategy: self.strategy,
            divider: match self.divider {
                DividerKind::Sample => Divider::Sample {
                    sample_rule: self.sample_rule,
                    weight_fn: self.weight_fn,
                    epsilon: self.epsilon,
                },
                DividerKind::Cyclic => Divider::Cyclic,
            },
            policy: self.policy,
            k: self.k,
            threads: self.threads,
            seed: self.seed,
            record_borders: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Ok,
    Violations(usize),
    Skipped,
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Validity::Ok => f.write_str("ok"),
            Validity::Violations(c) => write!(f, "violations={c}"),
            Validity::Skipped => f.write_str("skipped"),
        }
    }
}

/// Measurements of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub partition_sizes: Vec<usize>,
    pub cv: Option<f64>,
    pub max_ideal_deviation: f64,
    pub o_dt: f64,
    pub sample_sizes: Vec<usize>,
    pub border_vertices: Vec<usize>,
    pub cut_weight: u64,
    pub finite_simplices: usize,
    pub fallbacks: usize,
    pub validity: Validity,
    pub times: PhaseTimes,
}

impl RunMetrics {
    pub fn new(n: usize, t: &Triangulation, report: &DcReport, validity: Validity) -> RunMetrics {
        let sizes = report.partition_sizes();
        let sample_sizes = report.sample_sizes();
        let border_vertices = report.border_vertex_counts();
        RunMetrics {
            cv: coefficient_of_variation(&sizes).ok(),
            max_ideal_deviation: max_ideal_deviation(&sizes, sizes.len()),
            o_dt: overtriangulation(n, &sample_sizes, &border_vertices),
            partition_sizes: sizes,
            sample_sizes,
            border_vertices,
            cut_weight: report.merges.iter().map(|m| m.cut_weight).sum(),
            finite_simplices: t.finite_count(),
            fallbacks: report.fallbacks,
            validity,
            times: report.times,
        }
    }
}

/// A CSV row: the configuration and either measurements or an error.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config: RunConfig,
    pub outcome: Result<RunMetrics, String>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn secs(d: Duration) -> String {
    format!("{:.6}", d.as_secs_f64())
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        let mut cols = vec![
            c.distribution.map_or("input", |d| d.name()).to_string(),
            c.dim.to_string(),
            c.n.to_string(),
            c.k.to_string(),
            c.strategy.to_string(),
            c.divider.to_string(),
            c.weight_fn.to_string(),
            c.sample_rule.to_string(),
            c.policy.to_string(),
            c.seed.to_string(),
            c.threads.to_string(),
            c.base_case.to_string(),
        ];
        match &self.outcome {
            Ok(m) => {
                let t = &m.times;
                cols.extend([
                    "ok".to_string(),
                    join(&m.partition_sizes),
                    m.cv.map_or(String::new(), |v| v.to_string()),
                    m.max_ideal_deviation.to_string(),
                    m.o_dt.to_string(),
                    m.sample_sizes.len().to_string(),
                    join(&m.sample_sizes),
                    join(&m.border_vertices),
                    m.cut_weight.to_string(),
                    m.finite_simplices.to_string(),
                    m.fallbacks.to_string(),
                    m.validity.to_string(),
                ]);
                cols.extend(
                    [t.divide, t.partial, t.border_detect, t.border_dt, t.merge, t.repair, t.total]
                        .map(secs),
                );
            }
            Err(e) => {
                let msg = e.replace([',', '\n'], " ");
                cols.push(format!("error: {msg}"));
                cols.extend(std::iter::repeat_n(String::new(), 18));
            }
        }
        cols.join(",")
    }

    /// The columns that must be reproducible for a fixed configuration.
    pub fn deterministic_columns(&self) -> String {
        let row = self.csv_row();
        let n = CSV_HEADER.split(',').position(|h| h == "t_divide").unwrap();
        row.split(',').take(n).collect::<Vec<_>>().join(",")
    }
}

/// Triangulates `points` and measures the run; validation is skipped above
/// `oracle_limit` points.
pub fn measure(points: &PointSet, config: &DcConfig, oracle_limit: usize) -> Result<(Triangulation, RunMetrics)> {
    let (t, report) = delaunay_dc_report(points, config)?;
    let validity = if points.len() <= oracle_limit {
        let v = validate_with_limit(&t, points, oracle_limit)?;
        match v.violation_count() {
            0 => Validity::Ok,
            c => Validity::Violations(c),
        }
    } else {
        Validity::Skipped
    };
    let m = RunMetrics::new(points.len(), &t, &report, validity);
    Ok((t, m))
}

pub fn run_one(config: &RunConfig) -> RunReport {
    let outcome = (|| {
        let kind = config
            .distribution
            .ok_or_else(|| Error::InvalidConfig("run without a distribution".into()))?;
        let points = generate(&DistributionSpec::new(kind, config.dim, config.n, config.seed))?;
        measure(&points, &config.dc_config(), config.oracle_limit).map(|(_, m)| m)
    })();
    RunReport {
        config: *config,
        outcome: outcome.map_err(|e| e.to_string()),
    }
}

/// Runs every configuration of the grid. A failing run is recorded in its
/// row and the grid continues.
pub fn run_experiment(grid: &GridSpec) -> Result<Vec<RunReport>> {
    let configs = grid.configs()?;
    Ok(if grid.concurrent {
        configs.par_iter().map(run_one).collect()
    } else {
        configs.iter().map(run_one).collect()
    })
}

pub fn write_csv<W: Write>(rows: &[RunReport], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridSpec {
        GridSpec {
            dims: vec![2],
            ns: vec![3000],
            base_case: 500,
            ..Default::default()
        }
    }

    #[test]
    fn tokens_round_trip() {
        for s in ["bbox", "grid=1", "exact=0.5"] {
            assert_eq!(s.parse::<IntersectionPolicy>().unwrap().to_string(), s);
        }
        for s in ["sqrt", "log", "frac=0.01"] {
            assert_eq!(s.parse::<SampleRule>().unwrap().to_string(), s);
        }
        assert!("grid=0".parse::<IntersectionPolicy>().is_err());
        assert!("frac=0.9".parse::<SampleRule>().is_err());
        assert!("median".parse::<DividerKind>().is_err());
    }

    #[test]
    fn single_config_populates_every_column() {
        let rows = run_experiment(&small()).unwrap();
        assert_eq!(rows.len(), 1);
        let row = rows[0].csv_row();
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), CSV_HEADER.split(',').count());
        assert!(cols.iter().all(|c| !c.is_empty()), "{row}");
        assert_eq!(rows[0].outcome.as_ref().unwrap().validity, Validity::Ok);
    }

    #[test]
    fn product_size_and_reproducibility() {
        let grid = GridSpec {
            ks: vec![2, 4],
            seeds: vec![1, 2, 3],
            ..small()
        };
        let a = run_experiment(&grid).unwrap();
        assert_eq!(a.len(), 6);
        let b = run_experiment(&GridSpec { concurrent: true, ..grid }).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.deterministic_columns(), y.deterministic_columns());
        }
    }

    #[test]
    fn errors_are_recorded_per_row() {
        let grid = GridSpec {
            ks: vec![3, 4],
            strategies: vec!["bisect".into()],
            ..small()
        };
        let rows = run_experiment(&grid).unwrap();
        assert!(rows[0].csv_row().contains("error: "));
        assert!(rows[1].outcome.is_ok());
        assert_eq!(rows[0].csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }

    #[test]
    fn grid_from_toml() {
        let g = GridSpec::from_toml("ks = [2, 8]\npolicies = [\"bbox\", \"exact=1\"]\n").unwrap();
        assert_eq!(g.ks, vec![2, 8]);
        assert_eq!(g.configs().unwrap().len(), 4);
        assert!(GridSpec::from_toml("bogus = 1").is_err());
    }
}
