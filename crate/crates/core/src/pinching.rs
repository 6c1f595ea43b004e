//! Sectional-curvature sums `Σ_p(Q) = Σ_{i≤p<j} K(w^i, w^j)` over orthonormal
//! frames, their extremes over `O(n)`, and the pinching criterion
//! `C·A < Σ_p < A`.
//!
//! For the optimizer, `Σ_p` is written through the projector `P` onto the
//! span of the first `p` rows:
//!
//! ```text
//! Σ_p = tr(Ric·P) + Σ_abcd R_abcd P_ac P_bd
//! ```
//!
//! A rotation in the plane of rows `a ≤ p < b` changes only one vector of the
//! `p`-plane, and `Σ_p` restricted to that circle is `xᵀ(Ric + 2M)x` up to a
//! constant, with `M = contract_outer(P₀)` for the projector `P₀` on the
//! remaining `p-1` rows. Rotations inside either block leave `Σ_p` unchanged
//! and are skipped.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{self, Frame, RiemannTensor};
use crate::error::{domain, Result};
use crate::multiindex::{binomial, Basis};
use crate::rng;
use crate::weitzenbock;

pub const DEFAULT_RESTARTS: usize = 32;
/// Golden-section bracket width at which a line search stops.
pub const GOLDEN_TOL: f64 = 1e-8;
/// Relative margin in the strict pinching inequalities.
pub const PINCH_MARGIN: f64 = 1e-9;

const MAX_SWEEPS: usize = 200;
const SWEEP_TOL: f64 = 1e-13;
const GRID: usize = 16;

fn check_degree(n: usize, p: usize) -> Result<()> {
    if p == 0 || p >= n {
        return domain(format!("frame sums need 1 <= p <= n-1, got p = {p}, n = {n}"));
    }
    Ok(())
}

/// `Σ_{i≤p<j} K(w^i, w^j)` over the rows of `q`, straight from the definition.
pub fn sum_p(r: &RiemannTensor, q: &Frame, p: usize) -> Result<f64> {
    let n = r.dim();
    if q.dim() != n {
        return domain(format!("frame of dimension {} for tensor of dimension {n}", q.dim()));
    }
    check_degree(n, p)?;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| q.row(i)).collect();
    let mut total = 0.0;
    for i in 0..p {
        for j in p..n {
            total += r.sectional(&rows[i], &rows[j])?;
        }
    }
    Ok(total)
}

/// Projector onto the span of the given rows of `q`.
fn projector(q: &DMatrix<f64>, rows: impl Iterator<Item = usize>) -> DMatrix<f64> {
    let n = q.ncols();
    let mut pm = DMatrix::zeros(n, n);
    for i in rows {
        let w = q.row(i);
        pm += w.transpose() * w;
    }
    pm
}

/// `Σ_p` through the projector formula.
fn sum_p_projector(r: &RiemannTensor, ric: &DMatrix<f64>, q: &DMatrix<f64>, p: usize) -> f64 {
    let pm = projector(q, 0..p);
    let m = r.contract_outer(&pm);
    ric.component_mul(&pm).sum() + m.component_mul(&pm).sum()
}

/// Minimize `f` on `[lo, hi]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Best rotation angle for `θ ↦ sign·(c²·gaa + 2cs·gab + s²·gbb)`.
fn best_angle(gaa: f64, gab: f64, gbb: f64, sign: f64) -> (f64, f64) {
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        sign * (c * c * gaa + 2.0 * c * s * gab + s * s * gbb)
    };
    let h = std::f64::consts::PI / GRID as f64;
    let mut best = (0.0, f(0.0));
    for k in 1..GRID {
        let t = -std::f64::consts::FRAC_PI_2 + k as f64 * h;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let t = golden_min(f, best.0 - h, best.0 + h, GOLDEN_TOL);
    let v = f(t);
    if v < best.1 {
        (t, v)
    } else {
        best
    }
}

/// Cyclic Givens descent on `sign·Σ_p` starting from `q`.
fn descend(r: &RiemannTensor, ric: &DMatrix<f64>, mut q: Frame, p: usize, sign: f64) -> Frame {
    let n = r.dim();
    for _ in 0..MAX_SWEEPS {
        let mut gain = 0.0;
        for a in 0..p {
            let p0 = projector(q.matrix(), (0..p).filter(|&i| i != a));
            let g = ric + r.contract_outer(&p0) * 2.0;
            for b in p..n {
                let wa = DVector::from_iterator(n, q.matrix().row(a).iter().copied());
                let wb = DVector::from_iterator(n, q.matrix().row(b).iter().copied());
                let gaa = wa.dot(&(&g * &wa));
                let gab = wa.dot(&(&g * &wb));
                let gbb = wb.dot(&(&g * &wb));
                let (theta, v) = best_angle(gaa, gab, gbb, sign);
                let before = sign * gaa;
                if v < before {
                    gain += before - v;
                    q.givens(a, b, theta);
                }
            }
        }
        let scale = sum_p_projector(r, ric, q.matrix(), p).abs().max(1.0);
        if gain <= SWEEP_TOL * scale {
            break;
        }
    }
    q
}

/// Best and worst local optimum over the restarts.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Spread {
    pub best: f64,
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Extremes {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub witness_min_frame: Frame,
    pub witness_max_frame: Frame,
    pub min_spread: Spread,
    pub max_spread: Spread,
    pub restarts: usize,
}

/// Local minimum and maximum of `Σ_p` over `O(n)` from `restarts` random
/// frames; restart `k` starts from stream `(seed, k)`.
pub fn extremize_sum(r: &RiemannTensor, p: usize, restarts: usize, seed: u64) -> Result<Extremes> {
    let n = r.dim();
    check_degree(n, p)?;
    if restarts == 0 {
        return domain("extremize_sum needs at least one restart");
    }
    let ric = r.ricci();
    let runs: Vec<(f64, Frame, f64, Frame)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let start = Frame::random(n, &mut rng::stream(seed, k as u64));
            let lo = descend(r, &ric, start.clone(), p, 1.0);
            let hi = descend(r, &ric, start, p, -1.0);
            let lo_v = sum_p_projector(r, &ric, lo.matrix(), p);
            let hi_v = sum_p_projector(r, &ric, hi.matrix(), p);
            (lo_v, lo, hi_v, hi)
        })
        .collect();
    let mut imin = 0;
    let mut imax = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 < runs[imin].0 {
            imin = k;
        }
        if run.2 > runs[imax].2 {
            imax = k;
        }
    }
    let min_worst = runs.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let max_worst = runs.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    let witness_min = runs[imin].1.clone();
    let witness_max = runs[imax].3.clone();
    Ok(Extremes {
        m: sum_p(r, &witness_min, p)?,
        big_m: sum_p(r, &witness_max, p)?,
        witness_min_frame: witness_min,
        witness_max_frame: witness_max,
        min_spread: Spread {
            best: runs[imin].0,
            worst: min_worst,
        },
        max_spread: Spread {
            best: runs[imax].2,
            worst: max_worst,
        },
        restarts,
    })
}

/// `½p(n−p) + (4/3)·C(p,2)·C(n−p,2)`.
pub fn off_diagonal_weight(n: usize, p: usize) -> f64 {
    0.5 * (p * (n - p)) as f64 + 4.0 / 3.0 * (binomial(p, 2) * binomial(n - p, 2)) as f64
}

/// `C(n,p) = D / (1 + D)` with `D` the off-diagonal weight.
pub fn pinch_constant(n: usize, p: usize) -> Result<f64> {
    if p < 2 || p + 2 > n {
        return domain(format!("pinching constant needs 2 <= p <= n-2, got p = {p}, n = {n}"));
    }
    let d = off_diagonal_weight(n, p);
    Ok(d / (1.0 + d))
}

#[derive(Clone, Debug, Serialize)]
pub struct PinchReport {
    pub n: usize,
    pub p: usize,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub pinched: bool,
    /// `(M, m/C)` when pinched.
    #[serde(rename = "A_interval")]
    pub a_interval: Option<(f64, f64)>,
    pub witness_min_frame: Frame,
    pub witness_max_frame: Frame,
    pub min_spread: Spread,
    pub max_spread: Spread,
    pub restarts: usize,
}

impl PinchReport {
    pub fn a_midpoint(&self) -> Option<f64> {
        self.a_interval.map(|(lo, hi)| 0.5 * (lo + hi))
    }
}

/// Pinched iff `M > 0` and `m > C·M`, the latter with relative margin
/// [`PINCH_MARGIN`].
pub fn verdict(m: f64, big_m: f64, c: f64) -> bool {
    big_m > 0.0 && m > c * big_m * (1.0 + PINCH_MARGIN)
}

pub fn is_pinched(r: &RiemannTensor, p: usize, restarts: usize, seed: u64) -> Result<PinchReport> {
    let n = r.dim();
    let c = pinch_constant(n, p)?;
    let ex = extremize_sum(r, p, restarts, seed)?;
    let pinched = verdict(ex.m, ex.big_m, c);
    Ok(PinchReport {
        n,
        p,
        m: ex.m,
        big_m: ex.big_m,
        c,
        pinched,
        a_interval: pinched.then(|| (ex.big_m, ex.m / c)),
        witness_min_frame: ex.witness_min_frame,
        witness_max_frame: ex.witness_max_frame,
        min_spread: ex.min_spread,
        max_spread: ex.max_spread,
        restarts,
    })
}

/// `C·A − D·(A − C·A)` with `D` the off-diagonal weight.
pub fn cor_lower_bound(a: f64, c: f64, n: usize, p: usize) -> f64 {
    c * a - off_diagonal_weight(n, p) * (a - c * a)
}

/// Lower bound for `ℛ^p` from a pinch report: the bound above with `C·A = m`
/// at the midpoint of the admissible interval.
pub fn report_lower_bound(report: &PinchReport) -> Option<f64> {
    let a = report.a_midpoint()?;
    Some(cor_lower_bound(a, report.m / a, report.n, report.p))
}

#[derive(Clone, Debug, Serialize)]
pub struct TBoundsReport {
    /// Largest `|entry| / (½(A−B))` over pairs with `|J∩K| = p−1`.
    pub near_ratio: f64,
    /// Largest `|entry| / ((4/3)(A−B))` over pairs with `|J∩K| = p−2`.
    pub far_ratio: f64,
    /// Largest `|entry|` over pairs with `|J∩K| ≤ p−3`.
    pub remote_max: f64,
    pub holds: bool,
}

/// Scan the off-diagonal entries of `ℛ^p` against the bounds that follow
/// from `B < Σ_p < A`.
pub fn t_bounds_check(r: &RiemannTensor, p: usize, a: f64, b: f64) -> Result<TBoundsReport> {
    if a <= b {
        return domain(format!("t-bounds need B < A, got A = {a}, B = {b}"));
    }
    let op = weitzenbock::assemble(r, p)?;
    let basis = Basis::new(r.dim(), p)?;
    let masks = basis.masks();
    let (mut near, mut far, mut remote) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..masks.len() {
        for k in 0..masks.len() {
            if j == k {
                continue;
            }
            let v = op.matrix[(j, k)].abs();
            let shared = (masks[j] & masks[k]).count_ones() as usize;
            if shared + 1 == p {
                near = near.max(v / (0.5 * (a - b)));
            } else if shared + 2 == p {
                far = far.max(v / (4.0 / 3.0 * (a - b)));
            } else {
                remote = remote.max(v);
            }
        }
    }
    Ok(TBoundsReport {
        near_ratio: near,
        far_ratio: far,
        remote_max: remote,
        holds: near <= 1.0 && far <= 1.0 && remote <= weitzenbock::LEMMA31_TOL,
    })
}

/// `‖α‖²/2 − n|H|²/2`.
pub fn lawson_simons_rhs(alpha_norm_sq: f64, mean_curv_norm_sq: f64, n: usize) -> Result<f64> {
    if alpha_norm_sq < 0.0 || mean_curv_norm_sq < 0.0 {
        return domain("squared norms must be nonnegative");
    }
    Ok(0.5 * alpha_norm_sq - 0.5 * n as f64 * mean_curv_norm_sq)
}

/// Curvature of a surface of curvature `−a` times the unit 4-sphere.
pub fn product_tensor(a: f64) -> Result<RiemannTensor> {
    if a.is_nan() || a <= 0.0 {
        return domain(format!("product example needs a > 0, got {a}"));
    }
    Ok(curvature::product(
        &curvature::constant_curvature(2, -a)?,
        &curvature::constant_curvature(4, 1.0)?,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagonalValue {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameSample {
    /// 1-based coordinate indices spanning the `p`-plane, for permutation
    /// frames; empty for random frames.
    pub block: Vec<usize>,
    pub sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductReport {
    pub a: f64,
    pub diagonal: Vec<DiagonalValue>,
    pub max_off_diagonal: f64,
    pub min_eigenvalue: f64,
    pub sum3_samples: Vec<FrameSample>,
    pub pinch_p2: PinchReport,
    pub pinch_p3: PinchReport,
    /// Positivity of `ℛ³` is expected exactly when `a` is below this value.
    pub positivity_threshold: f64,
    pub positive: bool,
}

const RANDOM_SAMPLES: usize = 16;

pub fn product_example(a: f64, restarts: usize, seed: u64) -> Result<ProductReport> {
    let r = product_tensor(a)?;
    let op = weitzenbock::assemble(&r, 3)?;
    let dim = op.dim();
    let mut diagonal: Vec<DiagonalValue> = Vec::new();
    let mut max_off: f64 = 0.0;
    for i in 0..dim {
        let v = op.matrix[(i, i)];
        match diagonal.iter_mut().find(|d| (d.value - v).abs() <= 1e-12) {
            Some(d) => d.multiplicity += 1,
            None => diagonal.push(DiagonalValue { value: v, multiplicity: 1 }),
        }
        for j in 0..dim {
            if j != i {
                max_off = max_off.max(op.matrix[(i, j)].abs());
            }
        }
    }
    diagonal.sort_by(|x, y| x.value.total_cmp(&y.value));
    let min_eigenvalue = op.min_eigenvalue()?;

    let mut samples = Vec::new();
    for idx in Basis::new(6, 3)?.indices() {
        let mut perm: Vec<usize> = idx.indices().iter().map(|i| i - 1).collect();
        perm.extend((0..6).filter(|i| !idx.contains(i + 1)));
        let q = Frame::permutation(&perm)?;
        samples.push(FrameSample {
            block: idx.indices().to_vec(),
            sum: sum_p(&r, &q, 3)?,
        });
    }
    let mut g = rng::stream(rng::derive_seed(seed, 3), 0);
    for _ in 0..RANDOM_SAMPLES {
        let q = Frame::random(6, &mut g);
        samples.push(FrameSample {
            block: Vec::new(),
            sum: sum_p(&r, &q, 3)?,
        });
    }

    Ok(ProductReport {
        a,
        diagonal,
        max_off_diagonal: max_off,
        min_eigenvalue,
        sum3_samples: samples,
        pinch_p2: is_pinched(&r, 2, restarts, seed)?,
        pinch_p3: is_pinched(&r, 3, restarts, seed)?,
        positivity_threshold: 4.0,
        positive: min_eigenvalue > 0.0,
    })
}

/// Restarts used while bisecting for the family parameter.
const FAMILY_PROBE_RESTARTS: usize = 4;
const FAMILY_BISECTIONS: usize = 6;

#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub t: f64,
    pub tensor: RiemannTensor,
    pub report: PinchReport,
}

/// `(1−t)·S^n + t·random_tensor(n, seed)` with `t` pushed by bisection
/// towards the edge of the pinched region.
///
/// Bisection uses a few restarts per probe; the chosen `t` is then re-checked
/// with the full restart count and halved until that verdict is pinched too.
pub fn pinched_family(n: usize, p: usize, seed: u64, restarts: usize) -> Result<FamilyMember> {
    pinch_constant(n, p)?;
    let sphere = curvature::constant_curvature(n, 1.0)?;
    let noise = curvature::random_tensor(n, rng::derive_seed(seed, 0))?;
    let probe_seed = rng::derive_seed(seed, 1);
    let at = |t: f64| sphere.lincomb(1.0 - t, &noise, t);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..FAMILY_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if is_pinched(&at(mid)?, p, FAMILY_PROBE_RESTARTS, probe_seed)?.pinched {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let final_seed = rng::derive_seed(seed, 2);
    let mut t = lo;
    loop {
        let tensor = at(t)?;
        let report = is_pinched(&tensor, p, restarts, final_seed)?;
        if report.pinched || t == 0.0 {
            return Ok(FamilyMember { t, tensor, report });
        }
        t = if t < 1e-6 { 0.0 } else { 0.5 * t };
    }
}

/// Smallest eigenvalue of `ℛ^p`, for comparisons against the frame extremes.
pub fn operator_floor(r: &RiemannTensor, p: usize) -> Result<f64> {
    weitzenbock::assemble(r, p)?.min_eigenvalue()
}
