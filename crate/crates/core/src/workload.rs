//! Synthetic point distributions and point files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, StandardNormal};
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointSet, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    Normal,
    Ellipsoid,
    Lines,
    Bubbles,
    Malicious,
}

impl Distribution {
    pub const ALL: [Distribution; 6] = [
        Distribution::Uniform,
        Distribution::Normal,
        Distribution::Ellipsoid,
        Distribution::Lines,
        Distribution::Bubbles,
        Distribution::Malicious,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Normal => "normal",
            Distribution::Ellipsoid => "ellipsoid",
            Distribution::Lines => "lines",
            Distribution::Bubbles => "bubbles",
            Distribution::Malicious => "malicious",
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Distribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown distribution {s:?}")))
    }
}

/// Shape parameters; the defaults are used by every benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistParams {
    pub normal_sigma: f64,
    /// Semi-axes of the ellipsoid; 2D uses the first two of `semi_axes_2d`.
    pub semi_axes: [f64; 3],
    pub semi_axes_2d: [f64; 2],
    pub line_count: usize,
    pub line_sigma: f64,
    pub bubble_count: usize,
    pub bubble_sigma: f64,
    /// Offset of the malicious centers from the cube center.
    pub malicious_offset: f64,
}

impl Default for DistParams {
    fn default() -> Self {
        DistParams {
            normal_sigma: 0.15,
            semi_axes: [0.5, 0.35, 0.2],
            semi_axes_2d: [0.5, 0.3],
            line_count: 10,
            line_sigma: 1e-4,
            bubble_count: 16,
            bubble_sigma: 0.03,
            malicious_offset: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: Distribution,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub params: DistParams,
}

impl DistributionSpec {
    pub fn new(kind: Distribution, dim: usize, n: usize, seed: u64) -> DistributionSpec {
        DistributionSpec {
            kind,
            dim,
            n,
            seed,
            params: DistParams::default(),
        }
    }
}

/// Largest binary64 value below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Generates the point set described by `spec`.
pub fn generate(spec: &DistributionSpec) -> Result<PointSet> {
    generate_labeled(spec).map(|(p, _)| p)
}

/// Like [`generate`], also returning for every point the index of the
/// cluster (bubble, segment) it was drawn from; zero for unclustered kinds.
pub fn generate_labeled(spec: &DistributionSpec) -> Result<(PointSet, Vec<u32>)> {
    let dim = spec.dim;
    if !(2..=MAX_DIM).contains(&dim) {
        return Err(Error::InvalidConfig(format!("dimension {dim}")));
    }
    if spec.n == 0 {
        return Err(Error::InvalidConfig("n = 0".into()));
    }
    let p = &spec.params;
    let positive = [p.normal_sigma, p.line_sigma, p.bubble_sigma, p.malicious_offset];
    if positive.iter().any(|&x| !(x > 0.0)) || p.line_count == 0 || p.bubble_count == 0 {
        return Err(Error::InvalidConfig("distribution parameters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let g = Generator::new(spec, &mut rng);
    let mut coords = Vec::with_capacity(spec.n * dim);
    let mut labels = Vec::with_capacity(spec.n);
    let mut seen: FxHashSet<[u64; MAX_DIM]> = FxHashSet::default();
    seen.reserve(spec.n);
    while labels.len() < spec.n {
        let (x, label) = g.sample(&mut rng);
        let mut key = [0u64; MAX_DIM];
        for d in 0..dim {
            // +0.0 and -0.0 are the same point
            key[d] = (x[d] + 0.0).to_bits();
        }
        if seen.insert(key) {
            coords.extend_from_slice(&x[..dim]);
            labels.push(label);
        }
    }
    Ok((PointSet::new(dim, coords)?, labels))
}

struct Generator {
    kind: Distribution,
    dim: usize,
    params: DistParams,
    centers: Vec<[f64; MAX_DIM]>,
    segments: Vec<([f64; MAX_DIM], [f64; MAX_DIM])>,
}

impl Generator {
    fn new(spec: &DistributionSpec, rng: &mut ChaCha8Rng) -> Generator {
        let dim = spec.dim;
        let p = spec.params.clone();
        let mut centers = Vec::new();
        let mut segments = Vec::new();
        match spec.kind {
            Distribution::Bubbles => {
                for _ in 0..p.bubble_count {
                    let mut c = [0.0; MAX_DIM];
                    for x in c.iter_mut().take(dim) {
                        *x = rng.random_range(0.1..0.9);
                    }
                    centers.push(c);
                }
            }
            Distribution::Malicious => {
                for mask in 0..1usize << dim {
                    let mut c = [0.0; MAX_DIM];
                    for (d, x) in c.iter_mut().enumerate().take(dim) {
                        let s = if mask >> d & 1 == 0 { -1.0 } else { 1.0 };
                        *x = 0.5 + s * p.malicious_offset;
                    }
                    centers.push(c);
                }
            }
            Distribution::Lines => {
                for _ in 0..p.line_count {
                    let mut a = [0.0; MAX_DIM];
                    let mut b = [0.0; MAX_DIM];
                    for d in 0..dim {
                        a[d] = rng.random();
                        b[d] = rng.random();
                    }
                    segments.push((a, b));
                }
            }
            _ => {}
        }
        Generator {
            kind: spec.kind,
            dim,
            params: p,
            centers,
            segments,
        }
    }

    fn inside(&self, x: &[f64; MAX_DIM]) -> bool {
        x[..self.dim].iter().all(|&v| (0.0..1.0).contains(&v))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> ([f64; MAX_DIM], u32) {
        let dim = self.dim;
        let mut x = [0.0; MAX_DIM];
        match self.kind {
            Distribution::Uniform => {
                for v in x.iter_mut().take(dim) {
                    *v = rng.random();
                }
                (x, 0)
            }
            Distribution::Normal => {
                let normal = Normal::new(0.5, self.params.normal_sigma).expect("positive sigma");
                loop {
                    for v in x.iter_mut().take(dim) {
                        *v = normal.sample(rng);
                    }
                    if self.inside(&x) {
                        return (x, 0);
                    }
                }
            }
            Distribution::Ellipsoid => {
                let axes: &[f64] = if dim == 2 {
                    &self.params.semi_axes_2d
                } else {
                    &self.params.semi_axes
                };
                let max_inv = axes[..dim].iter().map(|a| 1.0 / a).fold(0.0, f64::max);
                loop {
                    let mut u = [0.0; MAX_DIM];
                    let mut norm: f64 = 0.0;
                    for v in u.iter_mut().take(dim) {
                        *v = StandardNormal.sample(rng);
                        norm += *v * *v;
                    }
                    let norm = norm.sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    // surface element of the stretched sphere, relative to its maximum
                    let g = (0..dim).map(|d| (u[d] / norm / axes[d]).powi(2)).sum::<f64>().sqrt();
                    if rng.random::<f64>() * max_inv > g {
                        continue;
                    }
                    for d in 0..dim {
                        x[d] = 0.5 + axes[d] * u[d] / norm;
                    }
                    if self.inside(&x) {
                        return (x, 0);
                    }
                }
            }
            Distribution::Lines => {
                let j = rng.random_range(0..self.segments.len());
                let (a, b) = self.segments[j];
                let t: f64 = rng.random();
                let jitter = Normal::new(0.0, self.params.line_sigma).expect("positive sigma");
                for d in 0..dim {
                    let v = a[d] + t * (b[d] - a[d]) + jitter.sample(rng);
                    x[d] = v.clamp(0.0, BELOW_ONE);
                }
                (x, j as u32)
            }
            Distribution::Bubbles | Distribution::Malicious => {
                let j = rng.random_range(0..self.centers.len());
                let c = self.centers[j];
                let noise = Normal::new(0.0, self.params.bubble_sigma).expect("positive sigma");
                loop {
                    for d in 0..dim {
                        x[d] = c[d] + noise.sample(rng);
                    }
                    if self.inside(&x) {
                        return (x, j as u32);
                    }
                }
            }
        }
    }

    #[cfg(test)]
    fn centers(&self) -> &[[f64; MAX_DIM]] {
        &self.centers
    }
}

/// Point file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFormat {
    /// `PTS1`, `u8` dimension, `u64` count, then little-endian binary64
    /// coordinates.
    Binary,
    /// Header `x,y[,z]`, one point per row.
    Csv,
}

impl PointFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> PointFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => PointFormat::Csv,
            _ => PointFormat::Binary,
        }
    }
}

const MAGIC: &[u8; 4] = b"PTS1";

pub fn write_points<W: Write>(points: &PointSet, format: PointFormat, mut out: W) -> Result<()> {
    match format {
        PointFormat::Binary => {
            out.write_all(MAGIC)?;
            out.write_all(&[points.dim() as u8])?;
            out.write_all(&(points.len() as u64).to_le_bytes())?;
            for &c in points.coords() {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        PointFormat::Csv => {
            let header = ["x", "y", "z"][..points.dim()].join(",");
            writeln!(out, "{header}")?;
            for p in points.iter() {
                let row: Vec<String> = p.iter().map(|c| format!("{c:e}")).collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_points<R: Read>(format: PointFormat, input: R) -> Result<PointSet> {
    let mut input = BufReader::new(input);
    match format {
        PointFormat::Binary => {
            let mut head = [0u8; 13];
            input
                .read_exact(&mut head)
                .map_err(|_| Error::Format("truncated header".into()))?;
            if &head[..4] != MAGIC {
                return Err(Error::Format("bad magic".into()));
            }
            let dim = head[4] as usize;
            if !(2..=MAX_DIM).contains(&dim) {
                return Err(Error::Format(format!("unsupported dimension {dim}")));
            }
            let count = u64::from_le_bytes(head[5..13].try_into().expect("8 bytes")) as usize;
            let mut bytes = Vec::new();
            input.read_to_end(&mut bytes)?;
            if bytes.len() != count * dim * 8 {
                return Err(Error::Format(format!(
                    "expected {} coordinate bytes, found {}",
                    count * dim * 8,
                    bytes.len()
                )));
            }
            let coords = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            PointSet::new(dim, coords).map_err(|e| Error::Format(e.to_string()))
        }
        PointFormat::Csv => {
            let mut lines = input.lines();
            let header = lines
                .next()
                .ok_or_else(|| Error::Format("empty file".into()))??;
            let names: Vec<&str> = header.split(',').map(str::trim).collect();
            let dim = match names.as_slice() {
                ["x", "y"] => 2,
                ["x", "y", "z"] => 3,
                _ => return Err(Error::Format(format!("bad header {header:?}"))),
            };
            let mut coords = Vec::new();
            for (i, line) in lines.enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let row: Vec<&str> = line.split(',').collect();
                if row.len() != dim {
                    return Err(Error::Format(format!("row {}: {} fields", i + 2, row.len())));
                }
                for f in row {
                    coords.push(
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))?,
                    );
                }
            }
            PointSet::new(dim, coords).map_err(|e| Error::Format(e.to_string()))
        }
    }
}

pub fn save_points(points: &PointSet, path: &Path, format: PointFormat) -> Result<()> {
    write_points(points, format, BufWriter::new(File::create(path)?))
}

pub fn load_points(path: &Path, format: PointFormat) -> Result<PointSet> {
    read_points(format, File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_in_cube_and_deterministic() {
        let spec = DistributionSpec::new(Distribution::Uniform, 3, 1000, 9);
        let p = generate(&spec).unwrap();
        assert_eq!(p.len(), 1000);
        assert!(p.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
        assert_eq!(p, generate(&spec).unwrap());
    }

    #[test]
    fn all_kinds_in_cube_and_distinct() {
        for kind in Distribution::ALL {
            for dim in [2, 3] {
                let p = generate(&DistributionSpec::new(kind, dim, 3000, 1)).unwrap();
                assert!(p.coords().iter().all(|&c| (0.0..1.0).contains(&c)), "{kind:?}");
                assert_eq!(p.dedup().0.len(), 3000, "{kind:?}");
            }
        }
    }

    #[test]
    fn bubbles_stay_near_their_centers() {
        let spec = DistributionSpec::new(Distribution::Bubbles, 3, 20_000, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let g = Generator::new(&spec, &mut rng);
        let (p, labels) = generate_labeled(&spec).unwrap();
        let near = (0..p.len())
            .filter(|&i| {
                let c = g.centers()[labels[i] as usize];
                let d2: f64 = (0..3).map(|d| (p.point(i as u32)[d] - c[d]).powi(2)).sum();
                d2.sqrt() <= 4.0 * 0.03
            })
            .count();
        assert!(near as f64 >= 0.99 * p.len() as f64, "{near}");
    }

    #[test]
    fn ellipse_points_on_the_curve() {
        let p = generate(&DistributionSpec::new(Distribution::Ellipsoid, 2, 500, 3)).unwrap();
        for q in p.iter() {
            let r = ((q[0] - 0.5) / 0.5).powi(2) + ((q[1] - 0.5) / 0.3).powi(2);
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_round_trip() {
        let p = generate(&DistributionSpec::new(Distribution::Uniform, 3, 1000, 4)).unwrap();
        let mut buf = Vec::new();
        write_points(&p, PointFormat::Binary, &mut buf).unwrap();
        assert_eq!(read_points(PointFormat::Binary, buf.as_slice()).unwrap(), p);
        let mut buf = Vec::new();
        write_points(&p, PointFormat::Csv, &mut buf).unwrap();
        assert_eq!(read_points(PointFormat::Csv, buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn format_errors() {
        let csv = "x,y,z\n1,2,3\n4,5,6\n0.5,0.25,1e-3\n";
        assert_eq!(read_points(PointFormat::Csv, csv.as_bytes()).unwrap().len(), 3);
        let mut bad = b"PTS1".to_vec();
        bad.push(4);
        bad.extend_from_slice(&0u64.to_le_bytes());
        assert!(matches!(read_points(PointFormat::Binary, bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_points(PointFormat::Binary, &b"XXXX"[..]), Err(Error::Format(_))));
    }
}
