//! Exterior-algebra combinatorics on the wedge basis `v^I`.
//!
//! Multi-indices are 1-based and strictly increasing. The lexicographic order
//! produced by [`enumerate`] is the basis order used by every matrix in this
//! crate. Internally a multi-index is also a bitmask (bit `i-1` for index `i`),
//! which is what the operator assembly works with.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg;

/// Largest ambient dimension supported by the bitmask lookup tables.
pub const MAX_DIM: usize = 20;

/// Strictly increasing tuple of indices in `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.iter().any(|&i| i == 0 || i > MAX_DIM) {
            return domain(format!("multi-index entries must lie in 1..={MAX_DIM}: {indices:?}"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return domain(format!("multi-index must be strictly increasing: {indices:?}"));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn mask(&self) -> u32 {
        self.0.iter().fold(0, |m, &i| m | (1 << (i - 1)))
    }

    pub fn from_mask(mask: u32) -> Self {
        Self((0..32).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect())
    }
}

impl TryFrom<Vec<usize>> for MultiIndex {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MultiIndex> for Vec<usize> {
    fn from(m: MultiIndex) -> Self {
        m.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `C(n,p)` multi-indices of length `p` in lexicographic order.
pub fn enumerate(n: usize, p: usize) -> Result<Vec<MultiIndex>> {
    if p > n {
        return domain(format!("degree p = {p} exceeds dimension n = {n}"));
    }
    if n > MAX_DIM {
        return domain(format!("dimension {n} exceeds supported maximum {MAX_DIM}"));
    }
    let mut out = Vec::with_capacity(binomial(n, p));
    let mut cur: Vec<usize> = (1..=p).collect();
    loop {
        out.push(MultiIndex(cur.clone()));
        // advance to the next combination
        let mut pos = p;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if cur[pos] < n - (p - 1 - pos) {
                cur[pos] += 1;
                for q in pos + 1..p {
                    cur[q] = cur[q - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `|I ∩ J|` for multi-indices of equal length.
pub fn overlap(a: &MultiIndex, b: &MultiIndex) -> Result<usize> {
    if a.len() != b.len() {
        return domain(format!(
            "overlap needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        ));
    }
    Ok((a.mask() & b.mask()).count_ones() as usize)
}

/// Exterior multiplication (`Create`) or interior multiplication (`Annihilate`)
/// by the basis covector `v^i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Elementary {
    Create,
    Annihilate,
}

/// Action of an elementary operator on a basis mask: `(sign, new mask)`, or
/// `None` when the result is zero.
///
/// The sign is `(-1)^k` with `k` the number of indices in the mask below `i`,
/// which makes `Create(i)` and `Annihilate(i)` mutually adjoint.
#[inline]
pub fn act_on_mask(kind: Elementary, i: usize, mask: u32) -> Option<(f64, u32)> {
    let bit = 1u32 << (i - 1);
    let present = mask & bit != 0;
    let below = (mask & (bit - 1)).count_ones();
    let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
    match (kind, present) {
        (Elementary::Annihilate, true) => Some((sign, mask & !bit)),
        (Elementary::Create, false) => Some((sign, mask | bit)),
        _ => None,
    }
}

/// Public form of [`act_on_mask`]: returns the sign (0 when the result
/// vanishes) and the resulting multi-index.
pub fn apply_elementary(kind: Elementary, i: usize, index: &MultiIndex) -> Result<(i32, Option<MultiIndex>)> {
    if i == 0 || i > MAX_DIM {
        return domain(format!("elementary operator index {i} out of range 1..={MAX_DIM}"));
    }
    Ok(match act_on_mask(kind, i, index.mask()) {
        Some((s, m)) => (s as i32, Some(MultiIndex::from_mask(m))),
        None => (0, None),
    })
}

/// The lexicographic wedge basis of `Λ^p R^n` with mask lookups.
#[derive(Clone, Debug)]
pub struct Basis {
    pub n: usize,
    pub p: usize,
    indices: Vec<MultiIndex>,
    masks: Vec<u32>,
    position: Vec<u32>,
}

impl Basis {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        let indices = enumerate(n, p)?;
        let masks: Vec<u32> = indices.iter().map(MultiIndex::mask).collect();
        let mut position = vec![u32::MAX; 1 << n];
        for (k, &m) in masks.iter().enumerate() {
            position[m as usize] = k as u32;
        }
        Ok(Self {
            n,
            p,
            indices,
            masks,
            position,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    /// Position of a mask of weight `p` in the basis.
    #[inline]
    pub fn position_of_mask(&self, mask: u32) -> Option<usize> {
        match self.position.get(mask as usize) {
            Some(&k) if k != u32::MAX => Some(k as usize),
            _ => None,
        }
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        if index.len() != self.p || index.indices().last().is_some_and(|&i| i > self.n) {
            return None;
        }
        self.position_of_mask(index.mask())
    }

    /// Coefficient vector of `v^{i_1} ∧ … ∧ v^{i_p}` for an arbitrary (not
    /// necessarily sorted) list of distinct indices, or zero if indices repeat.
    pub fn wedge_of(&self, list: &[usize]) -> Result<DVector<f64>> {
        if list.len() != self.p {
            return domain(format!("wedge of {} covectors in degree {}", list.len(), self.p));
        }
        let mut out = DVector::zeros(self.len());
        let mut mask = 0u32;
        let mut sign = 1.0;
        // build right to left: v^{i_1} ∧ (v^{i_2} ∧ (… ∧ 1))
        for &i in list.iter().rev() {
            if i == 0 || i > self.n {
                return domain(format!("index {i} out of range 1..={}", self.n));
            }
            match act_on_mask(Elementary::Create, i, mask) {
                Some((s, m)) => {
                    sign *= s;
                    mask = m;
                }
                None => return Ok(out),
            }
        }
        let k = self.position_of_mask(mask).expect("weight-p mask is in the basis");
        out[k] = sign;
        Ok(out)
    }
}

/// 0/1 matrix on `Λ^p` basis with `A_IJ = 1` iff `|I ∩ J| = k`.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub entries: DMatrix<f64>,
}

pub fn overlap_matrix(n: usize, p: usize, k: usize) -> Result<OverlapMatrix> {
    if k > p || p > n {
        return domain(format!("overlap matrix needs 0 <= k <= p <= n, got n={n} p={p} k={k}"));
    }
    let basis = Basis::new(n, p)?;
    let masks = basis.masks();
    let size = masks.len();
    let entries = DMatrix::from_fn(size, size, |r, c| {
        if (masks[r] & masks[c]).count_ones() as usize == k {
            1.0
        } else {
            0.0
        }
    });
    Ok(OverlapMatrix { n, p, k, entries })
}

/// Common row sum `C(p, p-k) · C(n-p, p-k)` of the overlap matrix, which is
/// also its Perron eigenvalue.
pub fn overlap_row_sum(n: usize, p: usize, k: usize) -> usize {
    binomial(p, p - k) * binomial(n - p, p - k)
}

pub const PERRON_REL_TOL: f64 = 1e-10;
pub const PERRON_MAX_ITER: usize = 100_000;

/// Largest eigenvalue by power iteration from the all-ones vector.
pub fn perron_eigenvalue(a: &OverlapMatrix) -> Result<f64> {
    let size = a.entries.nrows();
    if size == 0 {
        return domain("empty overlap matrix");
    }
    let ones = DVector::from_element(size, 1.0);
    linalg::power_iteration(&a.entries, &ones, PERRON_REL_TOL, PERRON_MAX_ITER)
        .map(|r| r.value)
        .map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!(
                "Perron eigenvalue for (n,p,k)=({},{},{}): {msg}",
                a.n, a.p, a.k
            )),
            other => other,
        })
}
