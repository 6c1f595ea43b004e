//! Algebraic curvature tensors at a point, in an orthonormal frame.
//!
//! Sign convention: `K(u, v) = -R(u, v, u, v)`, so the unit 2-sphere has
//! `R_1212 = -1`. Indices in the Rust API are 0-based; the JSON format is
//! 1-based.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::rng;

/// Symmetry defects up to this size count as exact.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance for unit length / orthogonality of caller-supplied vectors.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Dense rank-4 curvature tensor `R_ijkl`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiemannTensor {
    n: usize,
    data: Vec<f64>,
}

/// Worst violations of the algebraic curvature symmetries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub antisymmetry: f64,
    pub pair: f64,
    pub bianchi: f64,
}

impl SymmetryReport {
    pub fn passes(&self) -> bool {
        self.antisymmetry <= SYMMETRY_TOL && self.pair <= SYMMETRY_TOL && self.bianchi <= SYMMETRY_TOL
    }
}

impl RiemannTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut r = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let idx = r.offset(i, j, k, l);
                        r.data[idx] = f(i, j, k, l);
                    }
                }
            }
        }
        r
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    /// Raw setter; does not maintain symmetries.
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let idx = self.offset(i, j, k, l);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn validate(&self) -> SymmetryReport {
        let n = self.n;
        let mut rep = SymmetryReport {
            antisymmetry: 0.0,
            pair: 0.0,
            bianchi: 0.0,
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        rep.antisymmetry = rep
                            .antisymmetry
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs());
                        rep.pair = rep.pair.max((r - self.get(k, l, i, j)).abs());
                        rep.bianchi = rep
                            .bianchi
                            .max((r + self.get(j, k, i, l) + self.get(k, i, j, l)).abs());
                    }
                }
            }
        }
        rep
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let rep = self.validate();
        if rep.passes() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "symmetry defects: antisymmetry {:e}, pair {:e}, Bianchi {:e}",
                rep.antisymmetry, rep.pair, rep.bianchi
            )))
        }
    }

    /// `a·self + b·other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.n != other.n {
            return domain(format!("dimension mismatch {} vs {}", self.n, other.n));
        }
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    fn check_vector(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n {
            return domain(format!("vector of length {} in dimension {}", u.len(), self.n));
        }
        Ok(())
    }

    /// `R(a, b, c, d)` for arbitrary vectors.
    #[allow(clippy::needless_range_loop)]
    pub fn eval(&self, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if b[j] == 0.0 {
                    continue;
                }
                let ab = a[i] * b[j];
                let base = (i * n + j) * n * n;
                let mut inner = 0.0;
                for k in 0..n {
                    if c[k] == 0.0 {
                        continue;
                    }
                    let row = &self.data[base + k * n..base + (k + 1) * n];
                    let dot: f64 = row.iter().zip(d).map(|(r, x)| r * x).sum();
                    inner += c[k] * dot;
                }
                total += ab * inner;
            }
        }
        total
    }

    /// Sectional curvature of the plane spanned by an orthonormal pair.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        if (uu - 1.0).abs() > ORTHONORMAL_TOL || (vv - 1.0).abs() > ORTHONORMAL_TOL || uv.abs() > ORTHONORMAL_TOL {
            return domain(format!(
                "sectional curvature needs an orthonormal pair (|u|^2={uu}, |v|^2={vv}, <u,v>={uv})"
            ));
        }
        Ok(self.sectional_unchecked(u, v))
    }

    #[inline]
    pub fn sectional_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        -self.eval(u, v, u, v)
    }

    /// Sectional curvature of the coordinate plane `(e_i, e_j)`, `i != j`.
    pub fn sectional_coord(&self, i: usize, j: usize) -> f64 {
        -self.get(i, j, i, j)
    }

    /// `Ric_ab = -Σ_j R_ajbj`, so `Ric(u,u)` is the sum of sectional
    /// curvatures over any orthonormal completion of `u`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |a, b| -(0..n).map(|j| self.get(a, j, b, j)).sum::<f64>())
    }

    /// `M_bd = Σ_ac R_abcd P_ac`.
    pub fn contract_outer(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            for c in 0..n {
                let w = p[(a, c)];
                if w == 0.0 {
                    continue;
                }
                for b in 0..n {
                    let base = self.offset(a, b, c, 0);
                    for d in 0..n {
                        m[(b, d)] += w * self.data[base + d];
                    }
                }
            }
        }
        m
    }

    /// Components in the frame whose vectors are the rows of `q`:
    /// `R'_abcd = Q_ai Q_bj Q_ck Q_dl R_ijkl`.
    pub fn rotate(&self, q: &Frame) -> Result<Self> {
        let n = self.n;
        if q.dim() != n {
            return domain(format!("frame of dimension {} for tensor of dimension {n}", q.dim()));
        }
        let q = q.matrix();
        let mut cur = self.data.clone();
        // contract one slot at a time; each pass moves the rotated slot to the back
        for _ in 0..4 {
            let mut next = vec![0.0; cur.len()];
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        for a in 0..n {
                            let mut s = 0.0;
                            for i in 0..n {
                                s += q[(a, i)] * cur[((i * n + x) * n + y) * n + z];
                            }
                            next[((x * n + y) * n + z) * n + a] = s;
                        }
                    }
                }
            }
            cur = next;
        }
        Ok(Self { n, data: cur })
    }
}

/// `R_ijkl = -κ(δ_ik δ_jl - δ_il δ_jk)`: every sectional curvature equals `κ`.
pub fn constant_curvature(n: usize, kappa: f64) -> Result<RiemannTensor> {
    if n < 2 {
        return domain(format!("constant curvature tensor needs n >= 2, got {n}"));
    }
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Ok(RiemannTensor::from_fn(n, |i, j, k, l| {
        let v = -kappa * (d(i, k) * d(j, l) - d(i, l) * d(j, k));
        if v == 0.0 {
            0.0
        } else {
            v
        }
    }))
}

/// Riemannian product: block-diagonal with all mixed components zero.
pub fn product(r1: &RiemannTensor, r2: &RiemannTensor) -> RiemannTensor {
    let (n1, n2) = (r1.dim(), r2.dim());
    let mut r = RiemannTensor::zeros(n1 + n2);
    for i in 0..n1 {
        for j in 0..n1 {
            for k in 0..n1 {
                for l in 0..n1 {
                    r.set(i, j, k, l, r1.get(i, j, k, l));
                }
            }
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            for k in 0..n2 {
                for l in 0..n2 {
                    r.set(n1 + i, n1 + j, n1 + k, n1 + l, r2.get(i, j, k, l));
                }
            }
        }
    }
    r
}

/// `R_h(i,j,k,l) = h_il h_jk - h_ik h_jl` for symmetric `h`.
pub fn from_symmetric(h: &DMatrix<f64>) -> Result<RiemannTensor> {
    let n = h.nrows();
    if h.ncols() != n {
        return domain("R_h needs a square matrix");
    }
    if linalg::asymmetry(h) > SYMMETRY_TOL {
        return domain("R_h needs a symmetric matrix");
    }
    Ok(RiemannTensor::from_fn(n, |i, j, k, l| h[(i, l)] * h[(j, k)] - h[(i, k)] * h[(j, l)]))
}

/// Seeded random algebraic curvature tensor: `Σ_α c_α R_{h_α}` with
/// `n(n+1)/2` random symmetric `h_α` and coefficients uniform in `[-1, 1]`.
pub fn random_tensor(n: usize, seed: u64) -> Result<RiemannTensor> {
    if n < 2 {
        return domain(format!("random tensor needs n >= 2, got {n}"));
    }
    let mut rng = rng::stream(seed, 0);
    let terms = n * (n + 1) / 2;
    let mut acc = RiemannTensor::zeros(n);
    for _ in 0..terms {
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..=1.0);
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let c: f64 = rng.random_range(-1.0..=1.0);
        acc = acc.lincomb(1.0, &from_symmetric(&h)?, c)?;
    }
    Ok(acc)
}

/// Orthonormal frame; row `i` is the frame vector `w^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame(DMatrix<f64>);

impl Frame {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return domain("frame matrix must be square");
        }
        let defect = linalg::orthogonality_defect(&q);
        if defect > ORTHONORMAL_TOL {
            return domain(format!("frame is not orthogonal (|QᵀQ - I| = {defect:e})"));
        }
        Ok(Self(q))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Identity with rows reordered: row `k` is `e_{perm[k]}` (0-based).
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return domain(format!("not a permutation: {perm:?}"));
            }
            seen[p] = true;
        }
        Ok(Self(DMatrix::from_fn(n, n, |r, c| if perm[r] == c { 1.0 } else { 0.0 })))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self(linalg::random_orthogonal(n, rng))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    /// Replace rows `a` and `b` by `cos·w_a + sin·w_b` and `-sin·w_a + cos·w_b`.
    pub fn givens(&mut self, a: usize, b: usize, theta: f64) {
        let (s, c) = theta.sin_cos();
        for k in 0..self.0.ncols() {
            let x = self.0[(a, k)];
            let y = self.0[(b, k)];
            self.0[(a, k)] = c * x + s * y;
            self.0[(b, k)] = -s * x + c * y;
        }
    }
}

/// Serialized as the list of rows.
impl Serialize for Frame {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.row(i)).collect();
        rows.serialize(ser)
    }
}

/// Sectional-curvature oracle on orthonormal pairs.
pub type SectionalOracle<'a> = dyn Fn(&[f64], &[f64]) -> f64 + 'a;

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn normalized_sum(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    a.iter().zip(b).map(|(x, y)| s * (x + sign * y)).collect()
}

/// `R(u, a, u, b)` for an orthonormal triple, from sectional curvatures only.
fn mixed_from_sectional(k: &SectionalOracle<'_>, u: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = normalized_sum(b, a, 1.0);
    0.5 * k(u, b) + 0.5 * k(u, a) - k(u, &ab)
}

/// `R_ijil` recovered from sectional curvatures: `-K(i,j)` when `j = l`,
/// otherwise `½K(i,l) + ½K(i,j) - K(i, (e_l+e_j)/√2)`.
pub fn reconstruct_mixed(k: &SectionalOracle<'_>, n: usize, i: usize, j: usize, l: usize) -> Result<f64> {
    if i >= n || j >= n || l >= n {
        return domain(format!("indices ({i},{j},{l}) out of range for n = {n}"));
    }
    if i == j || i == l {
        return domain(format!("reconstruct_mixed needs i distinct from j and l, got ({i},{j},{l})"));
    }
    let (ei, ej) = (unit(n, i), unit(n, j));
    if j == l {
        return Ok(-k(&ei, &ej));
    }
    Ok(mixed_from_sectional(k, &ei, &ej, &unit(n, l)))
}

/// `R_ijkl` for four distinct indices from sectional curvatures, via
/// `3R_ijkl = -2R_(i-k)j(i-k)l + 2R_(j-k)i(j-k)l + R_ijil + R_kjkl - R_jijl - R_kikl`
/// where `(i-k)` stands for the unit vector `(e_i - e_k)/√2`.
pub fn reconstruct_full(k: &SectionalOracle<'_>, n: usize, i: usize, j: usize, kk: usize, l: usize) -> Result<f64> {
    let idx = [i, j, kk, l];
    if idx.iter().any(|&x| x >= n) {
        return domain(format!("indices {idx:?} out of range for n = {n}"));
    }
    for a in 0..4 {
        for b in a + 1..4 {
            if idx[a] == idx[b] {
                return domain(format!("reconstruct_full needs distinct indices, got {idx:?}"));
            }
        }
    }
    let e: Vec<Vec<f64>> = idx.iter().map(|&x| unit(n, x)).collect();
    let (ei, ej, ek, el) = (&e[0], &e[1], &e[2], &e[3]);
    let i_minus_k = normalized_sum(ei, ek, -1.0);
    let j_minus_k = normalized_sum(ej, ek, -1.0);
    let m = |u: &[f64], a: &[f64], b: &[f64]| mixed_from_sectional(k, u, a, b);
    let three = -2.0 * m(&i_minus_k, ej, el) + 2.0 * m(&j_minus_k, ei, el) + m(ei, ej, el) + m(ek, ej, el)
        - m(ej, ei, el)
        - m(ek, ei, el);
    Ok(three / 3.0)
}

/// One `{"i","j","k","l","v"}` record of the JSON tensor format (1-based).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub v: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorFile {
    pub n: usize,
    pub entries: Vec<TensorEntry>,
}

impl TensorFile {
    /// Complete a generating set of entries by the curvature symmetries and validate.
    pub fn into_tensor(self) -> Result<RiemannTensor> {
        let n = self.n;
        if n < 2 {
            return domain(format!("tensor dimension must be >= 2, got {n}"));
        }
        let mut r = RiemannTensor::zeros(n);
        let mut assigned = vec![false; n * n * n * n];
        for e in &self.entries {
            if [e.i, e.j, e.k, e.l].iter().any(|&x| x == 0 || x > n) {
                return domain(format!(
                    "entry ({},{},{},{}) out of range 1..={n}",
                    e.i, e.j, e.k, e.l
                ));
            }
            if !e.v.is_finite() {
                return domain("non-finite tensor entry");
            }
            let (i, j, k, l) = (e.i - 1, e.j - 1, e.k - 1, e.l - 1);
            let images = [
                (i, j, k, l, 1.0),
                (j, i, k, l, -1.0),
                (i, j, l, k, -1.0),
                (j, i, l, k, 1.0),
                (k, l, i, j, 1.0),
                (l, k, i, j, -1.0),
                (k, l, j, i, -1.0),
                (l, k, j, i, 1.0),
            ];
            for (a, b, c, d, s) in images {
                let v = s * e.v;
                let idx = r.offset(a, b, c, d);
                if assigned[idx] && (r.data[idx] - v).abs() > SYMMETRY_TOL {
                    return Err(Error::Validation(format!(
                        "inconsistent entries for R_{}{}{}{}: {} vs {}",
                        a + 1,
                        b + 1,
                        c + 1,
                        d + 1,
                        r.data[idx],
                        v
                    )));
                }
                r.data[idx] = v;
                assigned[idx] = true;
            }
        }
        r.ensure_valid()?;
        Ok(r)
    }
}

impl RiemannTensor {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TensorFile = serde_json::from_str(text)?;
        file.into_tensor()
    }

    /// Canonical nonzero representatives: `i<j`, `k<l`, `(i,j) <= (k,l)`.
    pub fn to_file(&self) -> TensorFile {
        let n = self.n;
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    for l in k + 1..n {
                        if (i, j) > (k, l) {
                            continue;
                        }
                        let v = self.get(i, j, k, l);
                        if v != 0.0 {
                            entries.push(TensorEntry {
                                i: i + 1,
                                j: j + 1,
                                k: k + 1,
                                l: l + 1,
                                v,
                            });
                        }
                    }
                }
            }
        }
        TensorFile { n, entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn oracle(r: &RiemannTensor) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
        move |u, v| r.sectional_unchecked(u, v)
    }

    #[test]
    fn constant_curvature_examples() {
        let s2 = constant_curvature(2, 1.0).unwrap();
        assert_eq!(s2.get(0, 1, 0, 1), -1.0);
        assert_eq!(s2.sectional_coord(0, 1), 1.0);
        let h2 = constant_curvature(2, -3.0).unwrap();
        assert_eq!(h2.get(0, 1, 0, 1), 3.0);
        assert!(constant_curvature(5, 0.0).unwrap().as_slice().iter().all(|&x| x == 0.0));
        assert!(constant_curvature(1, 1.0).is_err());
        assert!(constant_curvature(4, 1.0).unwrap().validate().passes());
    }

    #[test]
    fn perturbed_tensor_fails_pair_symmetry() {
        let mut r = constant_curvature(3, 1.0).unwrap();
        r.set(0, 1, 0, 2, 0.1);
        r.set(1, 0, 0, 2, -0.1);
        r.set(0, 1, 2, 0, -0.1);
        r.set(1, 0, 2, 0, 0.1);
        let rep = r.validate();
        assert!(rep.pair > 0.05);
        assert!(!rep.passes());
    }

    #[test]
    fn product_example_components() {
        let a = 1.0;
        let r = product(&constant_curvature(2, -a).unwrap(), &constant_curvature(4, 1.0).unwrap());
        assert!(r.validate().passes());
        assert_eq!(r.get(0, 1, 0, 1), a);
        assert_eq!(r.get(2, 3, 2, 3), -1.0);
        assert_eq!(r.get(0, 2, 0, 3), 0.0);
        assert_eq!(r.sectional_coord(0, 2), 0.0);
        let flat = product(&constant_curvature(2, 0.0).unwrap(), &constant_curvature(3, 0.0).unwrap());
        assert!(flat.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sectional_examples() {
        let s = constant_curvature(4, 1.0).unwrap();
        let u = [0.6, 0.8, 0.0, 0.0];
        let v = [0.0, 0.0, 1.0, 0.0];
        assert!((s.sectional(&u, &v).unwrap() - 1.0).abs() < 1e-14);
        assert!(s.sectional(&u, &u).is_err());
        assert!(s.sectional(&[1.0, 1.0, 0.0, 0.0], &v).is_err());

        let p = product(&constant_curvature(2, -1.0).unwrap(), &constant_curvature(4, 1.0).unwrap());
        let e = |i: usize| unit(6, i);
        assert_eq!(p.sectional(&e(0), &e(2)).unwrap(), 0.0);
        let diag = normalized_sum(&e(2), &e(3), 1.0);
        assert!((p.sectional(&diag, &e(4)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn space_form_sectional_is_constant() {
        let mut r = rng::stream(5, 0);
        for n in [3usize, 5] {
            let kappa = 0.7;
            let t = constant_curvature(n, kappa).unwrap();
            for _ in 0..1000 {
                let f = Frame::random(n, &mut r);
                let k = t.sectional(&f.row(0), &f.row(1)).unwrap();
                assert!((k - kappa).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ricci_examples() {
        let r = constant_curvature(4, 1.0).unwrap().ricci();
        assert_eq!(r, DMatrix::identity(4, 4) * 3.0);
        assert_eq!(RiemannTensor::zeros(3).ricci(), DMatrix::zeros(3, 3));
        let p = product(&constant_curvature(2, -1.0).unwrap(), &constant_curvature(4, 1.0).unwrap()).ricci();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, 3.0, 3.0, 3.0, 3.0]));
        assert_eq!(p, want);
    }

    #[test]
    fn ricci_is_sum_of_sectionals() {
        let t = random_tensor(5, 3).unwrap();
        let ric = t.ricci();
        let mut r = rng::stream(8, 1);
        let f = Frame::random(5, &mut r);
        let u = f.row(0);
        let sum: f64 = (1..5).map(|j| t.sectional(&u, &f.row(j)).unwrap()).sum();
        let quad = (0..5).map(|a| (0..5).map(|b| u[a] * ric[(a, b)] * u[b]).sum::<f64>()).sum::<f64>();
        assert!((sum - quad).abs() < 1e-12);
    }

    #[test]
    fn random_tensor_identity_term_is_unit_sphere() {
        let r = from_symmetric(&DMatrix::identity(4, 4)).unwrap();
        assert_eq!(r, constant_curvature(4, 1.0).unwrap());
    }

    #[test]
    fn random_tensor_is_valid_and_deterministic() {
        for n in 2..=7 {
            let a = random_tensor(n, 42).unwrap();
            assert!(a.validate().passes(), "n={n}: {:?}", a.validate());
            let b = random_tensor(n, 42).unwrap();
            assert_eq!(a.as_slice(), b.as_slice());
        }
        assert_ne!(random_tensor(4, 1).unwrap(), random_tensor(4, 2).unwrap());
    }

    #[test]
    fn reconstruct_space_form() {
        let t = constant_curvature(5, 2.0).unwrap();
        let k = oracle(&t);
        assert!(reconstruct_mixed(&k, 5, 0, 1, 2).unwrap().abs() < 1e-14);
        assert!((reconstruct_mixed(&k, 5, 0, 1, 1).unwrap() + 2.0).abs() < 1e-14);
        assert!(reconstruct_full(&k, 5, 0, 1, 2, 3).unwrap().abs() < 1e-14);
        assert!(reconstruct_mixed(&k, 5, 1, 1, 2).is_err());
        assert!(reconstruct_full(&k, 5, 0, 1, 1, 3).is_err());
    }

    #[test]
    fn reconstruct_product_sphere_block() {
        let t = product(&constant_curvature(2, -1.0).unwrap(), &constant_curvature(4, 1.0).unwrap());
        let k = oracle(&t);
        assert!(reconstruct_full(&k, 6, 2, 3, 4, 5).unwrap().abs() < 1e-14);
    }

    #[test]
    fn reconstruct_random_tensors() {
        for seed in 0..20 {
            let n = 4 + (seed as usize % 3);
            let t = random_tensor(n, seed).unwrap();
            let k = oracle(&t);
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        if i == j || i == l {
                            continue;
                        }
                        let got = reconstruct_mixed(&k, n, i, j, l).unwrap();
                        assert!((got - t.get(i, j, i, l)).abs() < 1e-12);
                        for kk in 0..n {
                            if [i, j, l].contains(&kk) || j == l {
                                continue;
                            }
                            let got = reconstruct_full(&k, n, i, j, kk, l).unwrap();
                            assert!((got - t.get(i, j, kk, l)).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rotate_identity_and_space_form() {
        let t = random_tensor(4, 9).unwrap();
        let r = t.rotate(&Frame::identity(4)).unwrap();
        for (a, b) in r.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        let s = constant_curvature(4, 1.0).unwrap();
        let f = Frame::random(4, &mut rng::stream(3, 3));
        let rs = s.rotate(&f).unwrap();
        for (a, b) in rs.as_slice().iter().zip(s.as_slice()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(Frame::new(DMatrix::from_element(2, 2, 1.0)).is_err());
    }

    #[test]
    fn rotate_matches_direct_evaluation() {
        let t = random_tensor(4, 17).unwrap();
        let f = Frame::random(4, &mut rng::stream(4, 4));
        let r = t.rotate(&f).unwrap();
        let w: Vec<Vec<f64>> = (0..4).map(|i| f.row(i)).collect();
        assert!((r.get(0, 1, 2, 3) - t.eval(&w[0], &w[1], &w[2], &w[3])).abs() < 1e-13);
        assert!((r.get(1, 1, 2, 3)).abs() < 1e-13);
    }

    #[test]
    fn json_round_trip_and_completion() {
        let text = r#"{"n":2,"entries":[{"i":1,"j":2,"k":1,"l":2,"v":-1.0}]}"#;
        let t = RiemannTensor::from_json(text).unwrap();
        assert_eq!(t, constant_curvature(2, 1.0).unwrap());
        let bad = r#"{"n":2,"entries":[{"i":1,"j":2,"k":1,"l":2,"v":-1.0},{"i":2,"j":1,"k":1,"l":2,"v":-1.0}]}"#;
        assert!(matches!(RiemannTensor::from_json(bad), Err(Error::Validation(_))));
        assert!(matches!(RiemannTensor::from_json("{"), Err(Error::Parse(_))));
        // R_1213 alone breaks nothing; R_1234 alone breaks Bianchi
        let no_bianchi = r#"{"n":4,"entries":[{"i":1,"j":2,"k":3,"l":4,"v":1.0}]}"#;
        assert!(matches!(RiemannTensor::from_json(no_bianchi), Err(Error::Validation(_))));
    }

    proptest! {
        #[test]
        fn writer_output_reads_back(n in 2usize..6, seed in 0u64..1000) {
            let t = random_tensor(n, seed).unwrap();
            let text = serde_json::to_string(&t.to_file()).unwrap();
            let back = RiemannTensor::from_json(&text).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn ricci_is_frame_covariant(n in 2usize..6, seed in 0u64..1000) {
            let t = random_tensor(n, seed).unwrap();
            let f = Frame::random(n, &mut rng::stream(seed, 99));
            let lhs = t.rotate(&f).unwrap().ricci();
            let q = f.matrix();
            let rhs = q * t.ricci() * q.transpose();
            prop_assert!((lhs - rhs).abs().max() < 1e-10);
        }
    }
}
