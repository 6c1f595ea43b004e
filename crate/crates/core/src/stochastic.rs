//! Brownian motion on flat tori, round spheres and their products, with
//! Feynman–Kac estimators built on it.
//!
//! Normalization: the semigroup is `e^{-½tΔ}`, so increments have variance
//! `dt` per coordinate (generator `½Δ`). Halving the variance would halve
//! every decay rate reported here.
//!
//! Path `i` of a run keyed by `seed` draws from `rng::stream(seed, i)`, and
//! per-path results are reduced in path order by pairwise summation, so the
//! output does not depend on the number of threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, RiemannTensor};
use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::rng::{self, StreamRng};
use crate::weitzenbock;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;
/// Cap on horizon doublings in [`r_underline_q`].
pub const MAX_DOUBLINGS: usize = 8;
/// Cap on the number of points in a recorded decay curve.
pub const CURVE_POINTS: usize = 200;

fn default_side() -> f64 {
    std::f64::consts::TAU
}

/// Model space for the diffusion. Points are stored in ambient coordinates:
/// `n` numbers in `[0, side)` for a torus, a unit vector in `R^{n+1}` for a
/// sphere, concatenated for a product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelManifold {
    Torus {
        n: usize,
        #[serde(default = "default_side")]
        side: f64,
    },
    Sphere {
        n: usize,
    },
    Product {
        factors: Vec<ModelManifold>,
    },
}

impl ModelManifold {
    pub fn torus(n: usize) -> Self {
        Self::Torus { n, side: default_side() }
    }

    pub fn sphere(n: usize) -> Self {
        Self::Sphere { n }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Torus { n, side } => {
                if *n == 0 || *side <= 0.0 || !side.is_finite() {
                    return domain(format!("torus needs n >= 1 and side > 0, got n = {n}, side = {side}"));
                }
            }
            Self::Sphere { n } => {
                if *n == 0 {
                    return domain("sphere needs n >= 1");
                }
            }
            Self::Product { factors } => {
                if factors.is_empty() {
                    return domain("product needs at least one factor");
                }
                for f in factors {
                    f.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Torus { n, .. } | Self::Sphere { n } => *n,
            Self::Product { factors } => factors.iter().map(Self::dim).sum(),
        }
    }

    /// Number of stored coordinates per point.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Torus { n, .. } => *n,
            Self::Sphere { n } => n + 1,
            Self::Product { factors } => factors.iter().map(Self::ambient_dim).sum(),
        }
    }

    /// Origin of the torus, north pole `(0,…,0,1)` of the sphere.
    pub fn default_start(&self) -> Vec<f64> {
        match self {
            Self::Torus { n, .. } => vec![0.0; *n],
            Self::Sphere { n } => {
                let mut x = vec![0.0; n + 1];
                x[*n] = 1.0;
                x
            }
            Self::Product { factors } => factors.iter().flat_map(Self::default_start).collect(),
        }
    }

    /// Check a start point and bring it to canonical form (wrapped, normalized).
    pub fn check_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim() {
            return domain(format!(
                "point has {} coordinates, model needs {}",
                x.len(),
                self.ambient_dim()
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return domain("point has non-finite coordinates");
        }
        let mut out = x.to_vec();
        self.canonicalize(&mut out)?;
        Ok(out)
    }

    fn canonicalize(&self, x: &mut [f64]) -> Result<()> {
        match self {
            Self::Torus { side, .. } => {
                for v in x.iter_mut() {
                    *v = wrap(*v, *side);
                }
            }
            Self::Sphere { .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return domain(format!("sphere point has norm {norm}, expected 1"));
                }
                for v in x.iter_mut() {
                    *v /= norm;
                }
            }
            Self::Product { factors } => {
                let mut rest = x;
                for f in factors {
                    let (head, tail) = rest.split_at_mut(f.ambient_dim());
                    f.canonicalize(head)?;
                    rest = tail;
                }
            }
        }
        Ok(())
    }

    /// One Brownian step of duration `sd²`, in place.
    fn step(&self, x: &mut [f64], sd: f64, rng: &mut StreamRng, scratch: &mut Vec<f64>) {
        match self {
            Self::Torus { side, .. } => {
                for v in x.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = wrap(*v + sd * g, *side);
                }
            }
            Self::Sphere { .. } => {
                scratch.clear();
                scratch.extend((0..x.len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)));
                let gx: f64 = scratch.iter().zip(x.iter()).map(|(g, v)| g * v).sum();
                for (g, v) in scratch.iter_mut().zip(x.iter()) {
                    *g -= gx * v;
                }
                let r = scratch.iter().map(|g| g * g).sum::<f64>().sqrt();
                if r > 0.0 {
                    let (s, c) = r.sin_cos();
                    for (v, g) in x.iter_mut().zip(scratch.iter()) {
                        *v = c * *v + s * g / r;
                    }
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in x.iter_mut() {
                    *v /= norm;
                }
            }
            Self::Product { factors } => {
                let mut rest = x;
                for f in factors {
                    let (head, tail) = rest.split_at_mut(f.ambient_dim());
                    f.step(head, sd, rng, scratch);
                    rest = tail;
                }
            }
        }
    }

    /// Geodesic midpoint of two nearby points.
    pub fn midpoint(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        self.midpoint_into(a, b, &mut out);
        out
    }

    fn midpoint_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        match self {
            Self::Torus { side, .. } => {
                for i in 0..a.len() {
                    let mut d = b[i] - a[i];
                    d -= side * (d / side).round();
                    out[i] = wrap(a[i] + 0.5 * d, *side);
                }
            }
            Self::Sphere { .. } => {
                let mut norm = 0.0;
                for i in 0..a.len() {
                    out[i] = a[i] + b[i];
                    norm += out[i] * out[i];
                }
                let norm = norm.sqrt();
                if norm > 0.0 {
                    out.iter_mut().for_each(|v| *v /= norm);
                } else {
                    out.copy_from_slice(a);
                }
            }
            Self::Product { factors } => {
                let mut off = 0;
                for f in factors {
                    let k = f.ambient_dim();
                    f.midpoint_into(&a[off..off + k], &b[off..off + k], &mut out[off..off + k]);
                    off += k;
                }
            }
        }
    }

    /// Curvature tensor in a parallel orthonormal frame; constant on these models.
    pub fn curvature(&self) -> Result<RiemannTensor> {
        match self {
            Self::Torus { n, .. } => Ok(RiemannTensor::zeros(*n)),
            Self::Sphere { n } if *n >= 2 => curvature::constant_curvature(*n, 1.0),
            Self::Sphere { .. } => Ok(RiemannTensor::zeros(1)),
            Self::Product { factors } => {
                let mut parts = factors.iter().map(Self::curvature);
                let first = parts.next().ok_or_else(|| Error::Domain("empty product".into()))??;
                parts.try_fold(first, |acc, r| Ok(curvature::product(&acc, &r?)))
            }
        }
    }
}

fn wrap(v: f64, side: f64) -> f64 {
    let w = v.rem_euclid(side);
    if w >= side {
        0.0
    } else {
        w
    }
}

/// Uniform time grid with `steps` steps of length `dt` ending at `horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub steps: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl TimeGrid {
    /// `dt` is shrunk slightly if needed so that it divides `horizon`.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return domain(format!("time step must be positive, got {dt}"));
        }
        if horizon < dt || !horizon.is_finite() {
            return domain(format!("horizon must be at least one step, got T = {horizon}, dt = {dt}"));
        }
        let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            steps,
            dt: horizon / steps as f64,
            horizon,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }
}

/// One simulated path on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl PathSample {
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }
}

pub fn simulate_bm(model: &ModelManifold, x0: &[f64], horizon: f64, dt: f64, rng: &mut StreamRng) -> Result<PathSample> {
    model.validate()?;
    let grid = TimeGrid::new(horizon, dt)?;
    let mut x = model.check_point(x0)?;
    let sd = grid.dt.sqrt();
    let mut scratch = Vec::new();
    let mut points = Vec::with_capacity(grid.steps + 1);
    points.push(x.clone());
    for _ in 0..grid.steps {
        model.step(&mut x, sd, rng, &mut scratch);
        points.push(x.clone());
    }
    Ok(PathSample {
        times: (0..=grid.steps).map(|k| grid.time(k)).collect(),
        points,
    })
}

/// Potential `f` as written in a run configuration: a bare number, a
/// constant, an affine function of the ambient coordinates, or the pointwise
/// floor `min spec ℛ^p` of the model curvature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Constant { constant: f64 },
    Affine { affine: AffineSpec },
    WeitzenbockFloor { weitzenbock_floor: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSpec {
    #[serde(default)]
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

/// `f(x) = offset + coeffs·x` on ambient coordinates; constants have no coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub offset: f64,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn constant(c: f64) -> Self {
        Self {
            offset: c,
            coeffs: Vec::new(),
        }
    }

    pub fn affine(offset: f64, coeffs: Vec<f64>) -> Self {
        Self { offset, coeffs }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.offset + self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

impl FieldSpec {
    pub fn resolve(&self, model: &ModelManifold) -> Result<Field> {
        match self {
            Self::Number(c) | Self::Constant { constant: c } => Ok(Field::constant(*c)),
            Self::Affine { affine } => {
                if affine.coeffs.len() > model.ambient_dim() {
                    return domain(format!(
                        "field has {} coefficients, model has {} coordinates",
                        affine.coeffs.len(),
                        model.ambient_dim()
                    ));
                }
                Ok(Field::affine(affine.offset, affine.coeffs.clone()))
            }
            Self::WeitzenbockFloor { weitzenbock_floor: p } => {
                let r = model.curvature()?;
                Ok(Field::constant(weitzenbock::assemble(&r, *p)?.min_eigenvalue()?))
            }
        }
    }
}

/// Mean and standard error, shifted by the first sample so that identical
/// samples give the sample back exactly with error 0.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let x0 = xs[0];
    let shifted: Vec<f64> = xs.iter().map(|x| x - x0).collect();
    let d = linalg::pairwise_sum(&shifted) / n as f64;
    if n < 2 {
        return (x0 + d, 0.0);
    }
    let sq: Vec<f64> = shifted.iter().map(|s| (s - d) * (s - d)).collect();
    let var = linalg::pairwise_sum(&sq) / (n - 1) as f64;
    (x0 + d, (var / n as f64).sqrt())
}

/// Neumaier compensated accumulator.
#[derive(Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

struct PathRecord {
    /// `exp(-½∫₀^t f)` at each recorded step.
    values: Vec<f64>,
    /// `∫₀^T exp(-½∫₀^t f) dt` by the trapezoid rule.
    area: f64,
}

/// Simulate `n_paths` paths and record the Feynman–Kac weight at the given
/// (sorted) step indices.
fn run_paths(
    model: &ModelManifold,
    f: &Field,
    x0: &[f64],
    grid: &TimeGrid,
    record: &[usize],
    n_paths: usize,
    seed: u64,
) -> Vec<PathRecord> {
    let sd = grid.dt.sqrt();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let mut x = x0.to_vec();
            let mut scratch = Vec::with_capacity(x.len());
            let mut integral = Accumulator::default();
            let mut area = Accumulator::default();
            let mut values = Vec::with_capacity(record.len());
            let mut next = 0;
            let mut f_prev = f.eval(&x);
            let mut w_prev = 1.0;
            if next < record.len() && record[next] == 0 {
                values.push(1.0);
                next += 1;
            }
            for k in 1..=grid.steps {
                model.step(&mut x, sd, &mut rng, &mut scratch);
                let f_now = f.eval(&x);
                integral.add(0.5 * (f_prev + f_now) * grid.dt);
                let w = (-0.5 * integral.value()).exp();
                area.add(0.5 * (w_prev + w) * grid.dt);
                if next < record.len() && record[next] == k {
                    values.push(w);
                    next += 1;
                }
                f_prev = f_now;
                w_prev = w;
            }
            PathRecord {
                values,
                area: area.value(),
            }
        })
        .collect()
}

/// Steps at which the curve is recorded: a uniform subsample of at most
/// [`CURVE_POINTS`] intervals plus the extra steps requested.
fn record_steps(grid: &TimeGrid, extra: &[usize]) -> Vec<usize> {
    let stride = grid.steps.div_ceil(CURVE_POINTS).max(1);
    let mut steps: Vec<usize> = (0..=grid.steps).step_by(stride).collect();
    steps.extend_from_slice(extra);
    steps.push(grid.steps);
    steps.sort_unstable();
    steps.dedup();
    steps
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FkEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub curve: Vec<CurvePoint>,
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return domain(format!("need at least 2 paths, got {n_paths}"));
    }
    Ok(())
}

fn column_stats(records: &[PathRecord], j: usize) -> (f64, f64) {
    let col: Vec<f64> = records.iter().map(|r| r.values[j]).collect();
    mean_stderr(&col)
}

/// `E exp(-½∫₀^T f(x_s) ds)` over `n_paths` Brownian paths from `x0`.
pub fn feynman_kac(
    model: &ModelManifold,
    f: &Field,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<FkEstimate> {
    model.validate()?;
    check_paths(n_paths)?;
    let x0 = model.check_point(x0)?;
    let grid = TimeGrid::new(horizon, dt)?;
    let steps = record_steps(&grid, &[]);
    let records = run_paths(model, f, &x0, &grid, &steps, n_paths, seed);
    let curve: Vec<CurvePoint> = steps
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (mean, stderr) = column_stats(&records, j);
            CurvePoint {
                t: grid.time(k),
                mean,
                stderr,
            }
        })
        .collect();
    let last = curve.last().expect("curve includes the horizon");
    Ok(FkEstimate {
        mean: last.mean,
        stderr: last.stderr,
        n_paths,
        horizon: grid.horizon,
        dt: grid.dt,
        curve,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SspVerdict {
    Positive,
    Negative,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub ssp_verdict: SspVerdict,
    /// Checkpoints `(t, mean)` used in the slope fit.
    pub checkpoints: Vec<CurvePoint>,
    /// Recorded decay curve; written as CSV rather than JSON.
    #[serde(skip_serializing)]
    pub curve: Vec<CurvePoint>,
    /// `∫₀^T E exp(-½∫₀^t f) dt` and its standard error.
    pub area: f64,
    pub area_stderr: f64,
    pub start: Vec<f64>,
}

pub fn verdict(rate: f64, stderr: f64) -> SspVerdict {
    if rate + 2.0 * stderr < 0.0 {
        SspVerdict::Positive
    } else if rate - 2.0 * stderr > 0.0 {
        SspVerdict::Negative
    } else {
        SspVerdict::Inconclusive
    }
}

/// Steps nearest to `T/2, 5T/8, 6T/8, 7T/8, T`.
fn checkpoint_steps(grid: &TimeGrid) -> Vec<usize> {
    let mut s: Vec<usize> = (4..=8).map(|j| ((grid.steps * j) as f64 / 8.0).round() as usize).collect();
    s.dedup();
    s
}

fn rate_from_records(
    grid: &TimeGrid,
    steps: &[usize],
    records: &[PathRecord],
    x0: &[f64],
) -> Result<RateEstimate> {
    let n_paths = records.len();
    let curve: Vec<CurvePoint> = steps
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let (mean, stderr) = column_stats(records, j);
            CurvePoint {
                t: grid.time(k),
                mean,
                stderr,
            }
        })
        .collect();
    let cps = checkpoint_steps(grid);
    let mut cols = Vec::new();
    for &k in &cps {
        let j = steps.binary_search(&k).expect("checkpoints are recorded");
        if curve[j].mean > 0.0 && curve[j].mean.is_finite() {
            cols.push(j);
        }
    }
    if cols.len() < 2 {
        return Err(Error::Numeric(format!(
            "Feynman-Kac mean underflows at the checkpoints (T = {}); use a shorter horizon",
            grid.horizon
        )));
    }
    let ts: Vec<f64> = cols.iter().map(|&j| curve[j].t).collect();
    let tbar = ts.iter().sum::<f64>() / ts.len() as f64;
    let sxx: f64 = ts.iter().map(|t| (t - tbar) * (t - tbar)).sum();
    let weights: Vec<f64> = ts.iter().map(|t| (t - tbar) / sxx).collect();
    let rate: f64 = cols.iter().zip(&weights).map(|(&j, w)| w * curve[j].mean.ln()).sum();
    // delta method: per-path linearization of Σ w_c log(mean_c)
    let lin: Vec<f64> = records
        .iter()
        .map(|r| cols.iter().zip(&weights).map(|(&j, w)| w * r.values[j] / curve[j].mean).sum())
        .collect();
    let (_, stderr) = mean_stderr(&lin);
    let areas: Vec<f64> = records.iter().map(|r| r.area).collect();
    let (area, area_stderr) = mean_stderr(&areas);
    Ok(RateEstimate {
        rate,
        stderr,
        n_paths,
        horizon: grid.horizon,
        dt: grid.dt,
        ssp_verdict: verdict(rate, stderr),
        checkpoints: cols.iter().map(|&j| curve[j].clone()).collect(),
        curve,
        area,
        area_stderr,
        start: x0.to_vec(),
    })
}

/// Exponential decay rate of `t ↦ E exp(-½∫₀^t f)`, fitted by least squares
/// to `log` of the mean over the second half of `[0, T]`.
pub fn ssp_rate(
    model: &ModelManifold,
    f: &Field,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<RateEstimate> {
    model.validate()?;
    check_paths(n_paths)?;
    let x0 = model.check_point(x0)?;
    let grid = TimeGrid::new(horizon, dt)?;
    let steps = record_steps(&grid, &checkpoint_steps(&grid));
    let records = run_paths(model, f, &x0, &grid, &steps, n_paths, seed);
    rate_from_records(&grid, &steps, &records, &x0)
}

#[derive(Clone, Debug, Serialize)]
pub struct SspReport {
    pub per_start: Vec<RateEstimate>,
    /// Index of the start with the largest rate (lowest index on ties).
    pub worst_start: usize,
    pub rate: f64,
    pub stderr: f64,
    pub ssp_verdict: SspVerdict,
}

/// [`ssp_rate`] over a finite set of start points; the reported rate is the
/// largest. Start `s` uses seed `derive_seed(seed, s)` except start 0, which
/// uses `seed` itself.
pub fn ssp_rate_multi(
    model: &ModelManifold,
    f: &Field,
    starts: &[Vec<f64>],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<SspReport> {
    if starts.is_empty() {
        return domain("need at least one start point");
    }
    let mut per_start = Vec::with_capacity(starts.len());
    for (s, x0) in starts.iter().enumerate() {
        let sub = if s == 0 { seed } else { rng::derive_seed(seed, s as u64) };
        per_start.push(ssp_rate(model, f, x0, horizon, dt, n_paths, sub)?);
    }
    let mut worst = 0;
    for (s, est) in per_start.iter().enumerate() {
        if est.rate > per_start[worst].rate {
            worst = s;
        }
    }
    let (rate, stderr) = (per_start[worst].rate, per_start[worst].stderr);
    Ok(SspReport {
        per_start,
        worst_start: worst,
        rate,
        stderr,
        ssp_verdict: verdict(rate, stderr),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RUnderlineEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Analytic tail `mean(T) / (-rate)` included in the estimate.
    pub tail: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub rate: f64,
    pub converged: bool,
}

/// `∫₀^∞ E exp(-½∫₀^t f) dt`: trapezoid rule on `[0, T]` plus the fitted
/// exponential tail, doubling `T` until the tail is below `tol`.
#[allow(clippy::too_many_arguments)]
pub fn r_underline_q(
    model: &ModelManifold,
    f: &Field,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    tol: f64,
) -> Result<RUnderlineEstimate> {
    if tol.is_nan() || tol <= 0.0 {
        return domain(format!("tail tolerance must be positive, got {tol}"));
    }
    let mut t = horizon;
    for round in 0..=MAX_DOUBLINGS {
        let est = ssp_rate(model, f, x0, t, dt, n_paths, seed)?;
        if est.rate.is_nan() || est.rate >= 0.0 {
            return Err(Error::Numeric(format!(
                "decay rate {} is not negative; the time integral diverges",
                est.rate
            )));
        }
        let last = est.curve.last().expect("curve includes the horizon");
        let tail = last.mean / -est.rate;
        if tail < tol || round == MAX_DOUBLINGS {
            return Ok(RUnderlineEstimate {
                estimate: est.area + tail,
                stderr: est.area_stderr,
                tail,
                horizon: t,
                rate: est.rate,
                converged: tail < tol,
            });
        }
        t *= 2.0;
    }
    unreachable!("loop returns on its last round")
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralBound {
    pub bound: f64,
    pub stderr: f64,
}

/// `λ₀ ≥ -2·rate`.
pub fn lambda0_lower_bound(rate: &RateEstimate) -> SpectralBound {
    SpectralBound {
        bound: -2.0 * rate.rate,
        stderr: 2.0 * rate.stderr,
    }
}

/// Curvature along a path, in a parallel frame: `base + (coeffs·x)·direction`.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub base: RiemannTensor,
    pub perturbation: Option<(Vec<f64>, RiemannTensor)>,
}

impl TensorField {
    pub fn constant(r: RiemannTensor) -> Self {
        Self {
            base: r,
            perturbation: None,
        }
    }

    pub fn at(&self, x: &[f64]) -> Result<RiemannTensor> {
        match &self.perturbation {
            None => Ok(self.base.clone()),
            Some((coeffs, dir)) => {
                let s: f64 = coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
                self.base.lincomb(1.0, dir, s)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WSnapshot {
    pub t: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WFlowReport {
    pub p: usize,
    pub dim: usize,
    /// Largest and smallest `|W_t v₀| / (|v₀|·exp(-½∫₀^t min spec ℛ^p ds))` over grid and probes.
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// `∫₀^T min spec ℛ^p ds` by the midpoint rule.
    pub floor_integral: f64,
    pub snapshots: Vec<WSnapshot>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Integrate `dW/dt = -½ℛ^p(x_t)W`, `W_0 = I`, with the exponential midpoint
/// rule, and compare `|W_t v₀|` with the scalar bound for each probe `v₀`.
pub fn solve_w(
    model: &ModelManifold,
    field: &TensorField,
    p: usize,
    path: &PathSample,
    probes: &[DVector<f64>],
) -> Result<WFlowReport> {
    let n = model.dim();
    if field.base.dim() != n {
        return domain(format!("tensor field of dimension {} on a model of dimension {n}", field.base.dim()));
    }
    if path.points.len() < 2 {
        return domain("path needs at least one step");
    }
    let base = weitzenbock::assemble(&field.base, p)?.matrix;
    let dim = base.nrows();
    if probes.iter().any(|v| v.len() != dim) {
        return domain(format!("probe vectors must have length {dim}"));
    }
    let pert = match &field.perturbation {
        None => None,
        Some((coeffs, dir)) => Some((coeffs, weitzenbock::assemble(dir, p)?.matrix)),
    };
    let probe_norms: Vec<f64> = probes.iter().map(|v| v.norm()).collect();
    let steps = path.points.len() - 1;
    let stride = steps.div_ceil(CURVE_POINTS).max(1);

    let step_factor = |m: &DMatrix<f64>, dt: f64| -> Result<(DMatrix<f64>, f64)> {
        let eig = linalg::symmetric_eigen(m)?;
        let mut out = DMatrix::zeros(dim, dim);
        for (k, &lambda) in eig.values.iter().enumerate() {
            let w = (-0.5 * dt * lambda).exp();
            if !w.is_finite() {
                return Err(Error::Numeric("step exponential overflowed".into()));
            }
            let col = eig.vectors.column(k);
            out += col * col.transpose() * w;
        }
        Ok((out, eig.values.first().copied().unwrap_or(0.0)))
    };
    let constant = match &pert {
        None => Some(step_factor(&base, path.dt())?),
        Some(_) => None,
    };

    let mut w = DMatrix::<f64>::identity(dim, dim);
    let mut floor = Accumulator::default();
    let mut max_ratio: f64 = 1.0;
    let mut min_ratio: f64 = 1.0;
    let mut snapshots = vec![WSnapshot {
        t: path.times[0],
        matrix: matrix_rows(&w),
    }];
    for k in 0..steps {
        let dt = path.times[k + 1] - path.times[k];
        let (e, lam) = match (&constant, &pert) {
            (Some(c), _) => c.clone(),
            (None, Some((coeffs, dmat))) => {
                let mid = model.midpoint(&path.points[k], &path.points[k + 1]);
                let s: f64 = coeffs.iter().zip(&mid).map(|(c, v)| c * v).sum();
                step_factor(&(&base + dmat * s), dt)?
            }
            (None, None) => unreachable!("constant fields are precomputed"),
        };
        w = e * w;
        floor.add(lam * dt);
        let bound = (-0.5 * floor.value()).exp();
        for (v, nv) in probes.iter().zip(&probe_norms) {
            let ratio = (&w * v).norm() / (nv * bound);
            max_ratio = max_ratio.max(ratio);
            min_ratio = min_ratio.min(ratio);
        }
        if (k + 1) % stride == 0 || k + 1 == steps {
            snapshots.push(WSnapshot {
                t: path.times[k + 1],
                matrix: matrix_rows(&w),
            });
        }
    }
    Ok(WFlowReport {
        p,
        dim,
        max_ratio,
        min_ratio,
        floor_integral: floor.value(),
        snapshots,
    })
}

/// Random probes added to the coordinate basis in [`w_flow_paths`].
pub const EXTRA_PROBES: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct WFlowSummary {
    pub n_paths: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Allowed excess of the ratio over 1, `10·dt`.
    pub slack: f64,
    pub dominated: bool,
    pub first_path: WFlowReport,
}

/// [`solve_w`] along `n_paths` paths from `x0`; path `i` uses stream
/// `(seed, i)` and the probes come from stream `(derive_seed(seed, 1), 0)`.
#[allow(clippy::too_many_arguments)]
pub fn w_flow_paths(
    model: &ModelManifold,
    field: &TensorField,
    p: usize,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<WFlowSummary> {
    model.validate()?;
    if n_paths == 0 {
        return domain("need at least one path");
    }
    let n = model.dim();
    if p > n {
        return domain(format!("degree p = {p} exceeds dimension {n}"));
    }
    let dim = crate::multiindex::binomial(n, p);
    let probes = probe_vectors(dim, EXTRA_PROBES, &mut rng::stream(rng::derive_seed(seed, 1), 0));
    let reports: Vec<WFlowReport> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_bm(model, x0, horizon, dt, &mut rng::stream(seed, i as u64))?;
            solve_w(model, field, p, &path, &probes)
        })
        .collect::<Result<_>>()?;
    let max_ratio = reports.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = reports.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    let grid = TimeGrid::new(horizon, dt)?;
    let slack = 10.0 * grid.dt;
    Ok(WFlowSummary {
        n_paths,
        horizon: grid.horizon,
        dt: grid.dt,
        max_ratio,
        min_ratio,
        slack,
        dominated: max_ratio <= 1.0 + slack,
        first_path: reports.into_iter().next().expect("at least one path"),
    })
}

/// Coordinate basis vectors of `Λ^p` followed by `extra` random unit vectors.
pub fn probe_vectors(dim: usize, extra: usize, rng: &mut StreamRng) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = (0..dim)
        .map(|i| {
            let mut v = DVector::zeros(dim);
            v[i] = 1.0;
            v
        })
        .collect();
    for _ in 0..extra {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        out.push(v / norm);
    }
    out
}

/// Run configuration for the Feynman–Kac subcommands.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelManifold,
    #[serde(default)]
    pub f: Option<FieldSpec>,
    #[serde(rename = "T", default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "N", default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub starts: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Tensor field perturbation for the W flow: `(coeffs·x)·random_tensor(seed)`.
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub coeffs: Vec<f64>,
    pub tensor_seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Start points: `starts` if given, else `x0`, else the model default.
    pub fn start_points(&self) -> Vec<Vec<f64>> {
        if let Some(s) = &self.starts {
            s.clone()
        } else if let Some(x) = &self.x0 {
            vec![x.clone()]
        } else {
            vec![self.model.default_start()]
        }
    }

    pub fn tensor_field(&self) -> Result<TensorField> {
        let base = self.model.curvature()?;
        match &self.perturbation {
            None => Ok(TensorField::constant(base)),
            Some(spec) => {
                if spec.coeffs.len() > self.model.ambient_dim() {
                    return domain("perturbation has more coefficients than the model has coordinates");
                }
                let dir = curvature::random_tensor(base.dim(), spec.tensor_seed)?;
                Ok(TensorField {
                    base,
                    perturbation: Some((spec.coeffs.clone(), dir)),
                })
            }
        }
    }
}

/// CSV `t,mean,stderr`.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("t,mean,stderr\n");
    for c in curve {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", c.t, c.mean, c.stderr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sphere_paths_stay_on_sphere() {
        for n in [1, 2, 4] {
            let model = ModelManifold::sphere(n);
            let path = simulate_bm(&model, &model.default_start(), 1.0, 1e-2, &mut rng::stream(1, 0)).unwrap();
            for x in &path.points {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() <= 1e-15, "{norm}");
            }
        }
    }

    #[test]
    fn torus_paths_wrap() {
        let model = ModelManifold::Torus { n: 2, side: 1.0 };
        let path = simulate_bm(&model, &[0.0, 0.0], 5.0, 1e-2, &mut rng::stream(2, 0)).unwrap();
        assert!(path.points.iter().flatten().all(|&v| (0.0..1.0).contains(&v)));
        assert_eq!(path.times.len(), 501);
        assert_eq!(*path.times.last().unwrap(), 5.0);
    }

    #[test]
    fn paths_are_reproducible() {
        let model = ModelManifold::Product {
            factors: vec![ModelManifold::torus(1), ModelManifold::sphere(2)],
        };
        let x0 = model.default_start();
        let a = simulate_bm(&model, &x0, 0.5, 1e-2, &mut rng::stream(3, 7)).unwrap();
        let b = simulate_bm(&model, &x0, 0.5, 1e-2, &mut rng::stream(3, 7)).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        assert_eq!(model.dim(), 3);
        assert_eq!(model.ambient_dim(), 4);
    }

    #[test]
    fn bad_steps_rejected() {
        let model = ModelManifold::torus(1);
        assert!(simulate_bm(&model, &[0.0], 1.0, 0.0, &mut rng::stream(0, 0)).is_err());
        assert!(simulate_bm(&model, &[0.0], 1.0, -1.0, &mut rng::stream(0, 0)).is_err());
        assert!(simulate_bm(&model, &[0.0], 0.001, 0.01, &mut rng::stream(0, 0)).is_err());
        assert!(simulate_bm(&ModelManifold::sphere(2), &[1.0, 1.0, 0.0], 1.0, 0.1, &mut rng::stream(0, 0)).is_err());
    }

    #[test]
    fn torus_increment_variance_is_dt() {
        // one step of length 1 on a huge torus: coordinates are N(0, 1)
        let model = ModelManifold::Torus { n: 1, side: 1e9 };
        let mut xs = Vec::new();
        for i in 0..20_000 {
            let path = simulate_bm(&model, &[5e8], 1.0, 1.0, &mut rng::stream(4, i)).unwrap();
            xs.push(path.points[1][0] - 5e8);
        }
        let (m, _) = mean_stderr(&xs);
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.04, "{var}");
    }

    #[test]
    fn sphere_heat_kernel_mean() {
        // E[x_{n+1}(t)] = exp(-n t / 2) on S^n under generator ½Δ
        let model = ModelManifold::sphere(2);
        let mut zs = Vec::new();
        for i in 0..4000 {
            let path = simulate_bm(&model, &model.default_start(), 0.5, 1e-3, &mut rng::stream(5, i)).unwrap();
            zs.push(path.points.last().unwrap()[2]);
        }
        let (m, se) = mean_stderr(&zs);
        assert!((m - (-0.5f64).exp()).abs() < 4.0 * se + 2e-3, "{m} ± {se}");
    }

    #[test]
    fn constant_field_is_exact() {
        let model = ModelManifold::torus(2);
        let est = feynman_kac(&model, &Field::constant(1.0), &[0.0, 0.0], 10.0, 1e-2, 50, 1).unwrap();
        assert!((est.mean - (-5f64).exp()).abs() <= 1e-15);
        assert_eq!(est.stderr, 0.0);
        let model = ModelManifold::sphere(3);
        let est = feynman_kac(&model, &Field::constant(2.0), &model.default_start(), 1.0, 1e-2, 20, 1).unwrap();
        assert!((est.mean - (-1f64).exp()).abs() <= 1e-14);
    }

    #[test]
    fn rate_of_constant_field() {
        let model = ModelManifold::torus(1);
        let est = ssp_rate(&model, &Field::constant(1.0), &[0.0], 4.0, 1e-2, 10, 3).unwrap();
        assert!((est.rate + 0.5).abs() < 1e-12);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.ssp_verdict, SspVerdict::Positive);
        let est = ssp_rate(&model, &Field::constant(-1.0), &[0.0], 4.0, 1e-2, 10, 3).unwrap();
        assert!((est.rate - 0.5).abs() < 1e-12);
        assert_eq!(est.ssp_verdict, SspVerdict::Negative);
        assert!((lambda0_lower_bound(&est).bound + 1.0).abs() < 1e-12);
    }

    #[test]
    fn underflow_is_reported() {
        let model = ModelManifold::torus(1);
        let err = ssp_rate(&model, &Field::constant(1e4), &[0.0], 10.0, 1e-2, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn weitzenbock_floor_field() {
        let model = ModelManifold::sphere(4);
        let f = FieldSpec::WeitzenbockFloor { weitzenbock_floor: 2 }.resolve(&model).unwrap();
        assert!(f.is_constant());
        assert!((f.offset - 4.0).abs() < 1e-12);
        let est = ssp_rate(&model, &f, &model.default_start(), 2.0, 1e-2, 4, 0).unwrap();
        assert!((est.rate + 2.0).abs() < 1e-10);
    }

    #[test]
    fn r_underline_constant() {
        let model = ModelManifold::torus(1);
        let est = r_underline_q(&model, &Field::constant(4.0), &[0.0], 5.0, 1e-3, 4, 0, 1e-6).unwrap();
        assert!((est.estimate - 0.5).abs() < 1e-6, "{}", est.estimate);
        assert!(est.converged);
        assert!(r_underline_q(&model, &Field::constant(-1.0), &[0.0], 2.0, 1e-2, 4, 0, 1e-3).is_err());
    }

    #[test]
    fn r_underline_sandwich() {
        // f = 1 + 0.5 x₁ on S² ranges over [0.5, 1.5]
        let model = ModelManifold::sphere(2);
        let f = Field::affine(1.0, vec![0.5]);
        let est = r_underline_q(&model, &f, &model.default_start(), 8.0, 1e-2, 400, 9, 1e-2).unwrap();
        assert!(est.estimate > 4.0 / 3.0 - 3.0 * est.stderr && est.estimate < 4.0 + 3.0 * est.stderr);
    }

    #[test]
    fn results_do_not_depend_on_threads() {
        let model = ModelManifold::sphere(2);
        let f = Field::affine(1.0, vec![0.5, 0.0, 0.2]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ssp_rate(&model, &f, &model.default_start(), 1.0, 1e-2, 64, 11).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.rate.to_bits(), b.rate.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.area.to_bits(), b.area.to_bits());
    }

    #[test]
    fn multi_start_reports_largest_rate() {
        let model = ModelManifold::sphere(2);
        let f = Field::affine(1.0, vec![0.0, 0.0, 0.5]);
        let starts = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]];
        let rep = ssp_rate_multi(&model, &f, &starts, 1.0, 1e-2, 200, 2).unwrap();
        let max = rep.per_start.iter().map(|e| e.rate).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(rep.rate, max);
        // starting where f is smallest decays more slowly
        assert_eq!(rep.worst_start, 1);
    }

    #[test]
    fn w_flow_closed_forms() {
        let path_on = |model: &ModelManifold| {
            simulate_bm(model, &model.default_start(), 1.0, 1e-2, &mut rng::stream(6, 0)).unwrap()
        };
        let probes = |dim| probe_vectors(dim, 3, &mut rng::stream(6, 1));

        let torus = ModelManifold::torus(4);
        let rep = solve_w(&torus, &TensorField::constant(torus.curvature().unwrap()), 2, &path_on(&torus), &probes(6)).unwrap();
        let last = &rep.snapshots.last().unwrap().matrix;
        for (i, row) in last.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(rep.max_ratio, 1.0);
        assert_eq!(rep.min_ratio, 1.0);

        let sphere = ModelManifold::sphere(4);
        let rep = solve_w(&sphere, &TensorField::constant(sphere.curvature().unwrap()), 2, &path_on(&sphere), &probes(6)).unwrap();
        let snap = rep.snapshots.last().unwrap();
        let expected = (-2.0 * snap.t).exp();
        for (i, row) in snap.matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((v - if i == j { expected } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((rep.max_ratio - 1.0).abs() < 1e-9 && (rep.min_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn w_flow_product_example() {
        let model = ModelManifold::Product {
            factors: vec![ModelManifold::torus(2), ModelManifold::sphere(4)],
        };
        let r = crate::pinching::product_tensor(1.0).unwrap();
        let path = simulate_bm(&model, &model.default_start(), 0.5, 1e-2, &mut rng::stream(8, 0)).unwrap();
        let rep = solve_w(&model, &TensorField::constant(r), 3, &path, &probe_vectors(20, 2, &mut rng::stream(8, 1))).unwrap();
        let snap = rep.snapshots.last().unwrap();
        let expected = (-1.5 * snap.t).exp();
        for i in 0..20 {
            assert!((snap.matrix[i][i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn w_flow_perturbed_is_dominated() {
        let model = ModelManifold::sphere(4);
        let field = TensorField {
            base: model.curvature().unwrap(),
            perturbation: Some((vec![0.3, -0.2, 0.1, 0.0, 0.4], curvature::random_tensor(4, 3).unwrap())),
        };
        let path = simulate_bm(&model, &model.default_start(), 2.0, 1e-3, &mut rng::stream(9, 0)).unwrap();
        let rep = solve_w(&model, &field, 2, &path, &probe_vectors(6, 4, &mut rng::stream(9, 1))).unwrap();
        assert!(rep.max_ratio <= 1.0 + 10.0 * 1e-3);
    }

    #[test]
    fn config_parses() {
        let cfg = RunConfig::from_json(
            r#"{"model":{"kind":"sphere","n":2},"f":{"affine":{"offset":1,"coeffs":[0.5]}},"T":4,"N":100,"seed":7}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, ModelManifold::sphere(2));
        assert_eq!(cfg.f.unwrap().resolve(&cfg.model).unwrap(), Field::affine(1.0, vec![0.5]));
        let cfg = RunConfig::from_json(r#"{"model":{"kind":"torus","n":3},"f":1}"#).unwrap();
        assert_eq!(cfg.model, ModelManifold::torus(3));
        assert_eq!(cfg.f, Some(FieldSpec::Number(1.0)));
        assert!(RunConfig::from_json(r#"{"model":{"kind":"torus","n":3},"bogus":1}"#).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = curve_csv(&[CurvePoint { t: 0.0, mean: 1.0, stderr: 0.0 }]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,mean,stderr");
        assert_eq!(lines.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn sandwich_holds(seed in 0u64..1000, c0 in 0.2f64..1.5, c1 in -0.5f64..0.5) {
            let model = ModelManifold::sphere(2);
            let f = Field::affine(c0, vec![c1]);
            let t = 2.0;
            let est = feynman_kac(&model, &f, &model.default_start(), t, 1e-2, 100, seed).unwrap();
            let (lo, hi) = (c0 - c1.abs(), c0 + c1.abs());
            prop_assert!(est.mean >= (-0.5 * hi * t).exp() - 3.0 * est.stderr - 1e-12);
            prop_assert!(est.mean <= (-0.5 * lo * t).exp() + 3.0 * est.stderr + 1e-12);
        }

        #[test]
        fn mean_stderr_of_identical_samples(x in -1e3f64..1e3, n in 1usize..50) {
            let (m, se) = mean_stderr(&vec![x; n]);
            prop_assert_eq!(m, x);
            prop_assert_eq!(se, 0.0);
        }
    }
}
