//! The Weitzenböck curvature term on `p`-covectors as an explicit matrix.
//!
//! With `a^i` interior multiplication by `v^i` and `(a^i)*` exterior
//! multiplication,
//!
//! ```text
//! ℛ^p = Σ_{ijkl} R_ijkl (a^i)* a^j (a^k)* a^l
//! ```
//!
//! in exactly this operator order. With the sign convention of
//! [`crate::curvature`] this gives `ℛ^1 = Ric` and, for every orthonormal
//! frame, `⟨ℛ^p(w^1∧…∧w^p), w^1∧…∧w^p⟩ = Σ_{i≤p<j} K(w^i, w^j)`; both
//! identities are checked in the tests.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{Frame, RiemannTensor};
use crate::error::{domain, Error, Result};
use crate::linalg;
use crate::multiindex::{act_on_mask, Basis, Elementary, MultiIndex};

/// Asymmetry allowed in a freshly assembled operator before it is symmetrized.
pub const ASSEMBLY_SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric operator on `Λ^p R^n` in the lexicographic wedge basis.
#[derive(Clone, Debug)]
pub struct FormOperator {
    pub n: usize,
    pub p: usize,
    pub basis: Vec<MultiIndex>,
    pub matrix: DMatrix<f64>,
}

/// JSON dump `{ "n", "p", "basis", "matrix" }`.
#[derive(Clone, Debug, Serialize)]
pub struct FormOperatorDump {
    pub n: usize,
    pub p: usize,
    pub basis: Vec<MultiIndex>,
    pub matrix: Vec<Vec<f64>>,
}

impl FormOperator {
    fn from_raw(n: usize, p: usize, basis: &Basis, raw: DMatrix<f64>) -> Result<Self> {
        let defect = linalg::asymmetry(&raw);
        if defect > ASSEMBLY_SYMMETRY_TOL {
            return Err(Error::Numeric(format!(
                "assembled operator is not symmetric (defect {defect:e})"
            )));
        }
        Ok(Self {
            n,
            p,
            basis: basis.indices().to_vec(),
            matrix: linalg::symmetrize(&raw),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending spectrum.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        linalg::symmetric_spectrum(&self.matrix)
    }

    /// Infimum of the quadratic form over unit `p`-covectors.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.first().copied().unwrap_or(f64::INFINITY))
    }

    pub fn quadratic_form(&self, omega: &DVector<f64>) -> Result<f64> {
        if omega.len() != self.dim() {
            return domain(format!(
                "coefficient vector of length {} for Λ^{} of dimension {}",
                omega.len(),
                self.p,
                self.dim()
            ));
        }
        Ok(omega.dot(&(&self.matrix * omega)))
    }

    pub fn dump(&self) -> FormOperatorDump {
        FormOperatorDump {
            n: self.n,
            p: self.p,
            basis: self.basis.clone(),
            matrix: self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

/// Iterate the set bits of `mask` as 1-based indices.
fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |b| mask & (1 << b) != 0).map(|b| b + 1)
}

fn assemble_column(r: &RiemannTensor, basis: &Basis, col: usize) -> Vec<f64> {
    let n = r.dim();
    let full = (1u32 << n) - 1;
    let mut out = vec![0.0; basis.len()];
    let m0 = basis.masks()[col];
    for l in bits(m0) {
        let (s1, m1) = act_on_mask(Elementary::Annihilate, l, m0).expect("l is set");
        for k in bits(full & !m1) {
            let (s2, m2) = act_on_mask(Elementary::Create, k, m1).expect("k is clear");
            for j in bits(m2) {
                let (s3, m3) = act_on_mask(Elementary::Annihilate, j, m2).expect("j is set");
                for i in bits(full & !m3) {
                    let coeff = r.get(i - 1, j - 1, k - 1, l - 1);
                    if coeff == 0.0 {
                        continue;
                    }
                    let (s4, m4) = act_on_mask(Elementary::Create, i, m3).expect("i is clear");
                    let row = basis.position_of_mask(m4).expect("degree is preserved");
                    out[row] += s1 * s2 * s3 * s4 * coeff;
                }
            }
        }
    }
    out
}

/// `ℛ^p` for a valid curvature tensor.
///
/// Columns are assembled independently (in parallel) with a fixed summation
/// order, so the result does not depend on the thread count.
pub fn assemble(r: &RiemannTensor, p: usize) -> Result<FormOperator> {
    let n = r.dim();
    if p > n {
        return domain(format!("degree p = {p} exceeds dimension n = {n}"));
    }
    r.ensure_valid()?;
    let basis = Basis::new(n, p)?;
    let columns: Vec<Vec<f64>> = (0..basis.len())
        .into_par_iter()
        .map(|c| assemble_column(r, &basis, c))
        .collect();
    let size = basis.len();
    let raw = DMatrix::from_fn(size, size, |row, col| columns[col][row]);
    FormOperator::from_raw(n, p, &basis, raw)
}

/// Extension of a symmetric `S` on `Λ^1` to `Λ^p` as a derivation,
/// `Σ_ab S_ab (a^a)* a^b`.
pub fn derivation_extend(s: &DMatrix<f64>, p: usize) -> Result<FormOperator> {
    let n = s.nrows();
    if s.ncols() != n {
        return domain("derivation extension needs a square matrix");
    }
    if linalg::asymmetry(s) > ASSEMBLY_SYMMETRY_TOL {
        return domain("derivation extension needs a symmetric matrix");
    }
    if p > n {
        return domain(format!("degree p = {p} exceeds dimension n = {n}"));
    }
    let basis = Basis::new(n, p)?;
    let size = basis.len();
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    let mut raw = DMatrix::zeros(size, size);
    for (col, &m0) in basis.masks().iter().enumerate() {
        for b in bits(m0) {
            let (s1, m1) = act_on_mask(Elementary::Annihilate, b, m0).expect("b is set");
            for a in bits(full & !m1) {
                let (s2, m2) = act_on_mask(Elementary::Create, a, m1).expect("a is clear");
                let row = basis.position_of_mask(m2).expect("degree is preserved");
                raw[(row, col)] += s1 * s2 * s[(a - 1, b - 1)];
            }
        }
    }
    FormOperator::from_raw(n, p, &basis, raw)
}

/// `ℛ^p - 2·(Hess h)` extended as a derivation; for `p = 1` this is
/// `Ric - 2 Hess h`. For `p > 1` the derivation extension is an
/// extrapolation of the degree-one formula.
pub fn assemble_h(r: &RiemannTensor, hess_h: &DMatrix<f64>, p: usize) -> Result<FormOperator> {
    if hess_h.nrows() != r.dim() || hess_h.ncols() != r.dim() {
        return domain("Hessian dimension does not match the curvature tensor");
    }
    if linalg::asymmetry(hess_h) > ASSEMBLY_SYMMETRY_TOL {
        return domain("Hessian must be symmetric");
    }
    let base = assemble(r, p)?;
    let shift = derivation_extend(&(hess_h * -2.0), p)?;
    Ok(FormOperator {
        matrix: base.matrix + shift.matrix,
        ..base
    })
}

/// Coefficients of `w^1 ∧ … ∧ w^p` (first `p` frame rows) in the wedge basis:
/// the `p×p` minors of those rows.
pub fn decomposable(frame: &Frame, p: usize) -> Result<DVector<f64>> {
    let n = frame.dim();
    let basis = Basis::new(n, p)?;
    let q = frame.matrix();
    Ok(DVector::from_iterator(
        basis.len(),
        basis.indices().iter().map(|idx| {
            let cols = idx.indices();
            let minor = DMatrix::from_fn(p, p, |r, c| q[(r, cols[c] - 1)]);
            if p == 0 {
                1.0
            } else {
                minor.determinant()
            }
        }),
    ))
}

/// Hodge star `Λ^p → Λ^{n-p}`, `v^I ↦ sign(I, I^c) v^{I^c}`.
#[derive(Clone, Debug)]
pub struct HodgeStar {
    pub n: usize,
    pub p: usize,
    /// Rows index the `Λ^{n-p}` basis, columns the `Λ^p` basis.
    pub matrix: DMatrix<f64>,
}

pub fn hodge_star(n: usize, p: usize) -> Result<HodgeStar> {
    if p > n {
        return domain(format!("degree p = {p} exceeds dimension n = {n}"));
    }
    let src = Basis::new(n, p)?;
    let dst = Basis::new(n, n - p)?;
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (col, &mask) in src.masks().iter().enumerate() {
        let comp = full & !mask;
        // inversions of the concatenation (I, I^c)
        let inversions: u32 = bits(mask).map(|a| (comp & ((1u32 << (a - 1)) - 1)).count_ones()).sum();
        let row = dst.position_of_mask(comp).expect("complement has weight n-p");
        m[(row, col)] = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    Ok(HodgeStar { n, p, matrix: m })
}

/// Structure checks on `ℛ^p` for multi-index overlaps.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma31Report {
    pub n: usize,
    pub p: usize,
    /// Largest `|⟨ℛ^p v^J, v^K⟩|` over pairs with `|J∩K| < p-2`.
    pub sparsity_max: f64,
    pub sparsity_pairs: usize,
    /// Largest `|⟨ℛ^p(v^i∧v^j∧v^I), v^k∧v^l∧v^I⟩ - 2R_ijkl|`.
    pub identity_max_defect: f64,
    pub identity_cases: usize,
    pub passes: bool,
}

pub const LEMMA31_TOL: f64 = 1e-12;

pub fn check_lemma31(r: &RiemannTensor, p: usize) -> Result<Lemma31Report> {
    let n = r.dim();
    if p < 2 || p + 2 > n {
        return domain(format!("structure check needs 2 <= p <= n-2, got n={n} p={p}"));
    }
    let op = assemble(r, p)?;
    let basis = Basis::new(n, p)?;
    let masks = basis.masks();
    let mut sparsity_max = 0.0f64;
    let mut sparsity_pairs = 0;
    for (a, &ma) in masks.iter().enumerate() {
        for (b, &mb) in masks.iter().enumerate() {
            if ((ma & mb).count_ones() as usize) + 2 < p {
                sparsity_max = sparsity_max.max(op.matrix[(a, b)].abs());
                sparsity_pairs += 1;
            }
        }
    }
    let mut identity_max_defect = 0.0f64;
    let mut identity_cases = 0;
    for rest in Basis::new(n, p - 2)?.indices() {
        let free: Vec<usize> = (1..=n).filter(|x| !rest.contains(*x)).collect();
        for &i in &free {
            for &j in &free {
                for &k in &free {
                    for &l in &free {
                        let distinct = i != j && i != k && i != l && j != k && j != l && k != l;
                        if !distinct {
                            continue;
                        }
                        let mut left = vec![i, j];
                        left.extend_from_slice(rest.indices());
                        let mut right = vec![k, l];
                        right.extend_from_slice(rest.indices());
                        let x = basis.wedge_of(&left)?;
                        let y = basis.wedge_of(&right)?;
                        let got = y.dot(&(&op.matrix * &x));
                        let want = 2.0 * r.get(i - 1, j - 1, k - 1, l - 1);
                        identity_max_defect = identity_max_defect.max((got - want).abs());
                        identity_cases += 1;
                    }
                }
            }
        }
    }
    Ok(Lemma31Report {
        n,
        p,
        sparsity_max,
        sparsity_pairs,
        identity_max_defect,
        identity_cases,
        passes: sparsity_max <= LEMMA31_TOL && identity_max_defect <= LEMMA31_TOL,
    })
}
