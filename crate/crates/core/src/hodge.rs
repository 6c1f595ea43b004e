//! Combinatorial Hodge Laplacians `L_q = ∂_qᵀ∂_q + ∂_{q+1}∂_{q+1}ᵀ` on finite
//! simplicial complexes, and the spectral-gap interlacing
//! `λ₁^q ≥ min(λ₁^{q-1}, λ₁^{q+1})`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg;
use crate::rng;

/// Eigenvalues at or below this are treated as kernel.
pub const KERNEL_CUTOFF: f64 = 1e-9;
pub const INTERLACING_TOL: f64 = 1e-9;

/// Downward-closed family of sorted vertex sets over vertices `1..=V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplicialComplex {
    vertices: usize,
    /// `by_degree[q]` holds the sorted `q`-simplices (`q+1` vertices each).
    by_degree: Vec<Vec<Vec<usize>>>,
}

/// JSON input `{ "vertices": V, "maximal_simplices": [[1,2,3], …] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexFile {
    pub vertices: usize,
    pub maximal_simplices: Vec<Vec<usize>>,
}

impl SimplicialComplex {
    /// Close the given simplices downward; every vertex `1..=V` is a 0-simplex.
    pub fn from_maximal(vertices: usize, maximal: &[Vec<usize>]) -> Result<Self> {
        let mut all: BTreeSet<Vec<usize>> = (1..=vertices).map(|v| vec![v]).collect();
        for s in maximal {
            let mut s = s.clone();
            s.sort_unstable();
            if s.is_empty() {
                return domain("empty simplex");
            }
            if s.windows(2).any(|w| w[0] == w[1]) {
                return domain(format!("simplex with repeated vertex: {s:?}"));
            }
            if s.iter().any(|&v| v == 0 || v > vertices) {
                return domain(format!("simplex {s:?} uses a vertex outside 1..={vertices}"));
            }
            if s.len() > 24 {
                return domain("simplex too large to close downward");
            }
            for mask in 1u32..(1 << s.len()) {
                let face: Vec<usize> = (0..s.len()).filter(|b| mask & (1 << b) != 0).map(|b| s[b]).collect();
                all.insert(face);
            }
        }
        let top = all.iter().map(Vec::len).max().unwrap_or(0);
        let mut by_degree = vec![Vec::new(); top];
        for s in all {
            by_degree[s.len() - 1].push(s);
        }
        for level in &mut by_degree {
            level.sort();
        }
        Ok(Self { vertices, by_degree })
    }

    pub fn from_file(file: &ComplexFile) -> Result<Self> {
        Self::from_maximal(file.vertices, &file.maximal_simplices)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ComplexFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    /// Flag complex of a graph given by its edge list.
    pub fn clique_complex(vertices: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertices > 16 {
            return domain("clique enumeration is limited to 16 vertices");
        }
        let mut adj = vec![0u32; vertices + 1];
        for &(a, b) in edges {
            if a == 0 || b == 0 || a > vertices || b > vertices || a == b {
                return domain(format!("bad edge ({a},{b})"));
            }
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        let mut cliques = Vec::new();
        for mask in 1u32..(1 << vertices) {
            let vs: Vec<usize> = (0..vertices).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect();
            let is_clique = vs.iter().all(|&a| vs.iter().all(|&b| a == b || adj[a] & (1 << b) != 0));
            if is_clique {
                cliques.push(vs);
            }
        }
        Self::from_maximal(vertices, &cliques)
    }

    /// Erdős–Rényi graph `G(V, prob)` from stream `(seed, 0)`, then its clique complex.
    pub fn random_clique_complex(vertices: usize, prob: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, 0);
        let mut edges = Vec::new();
        for a in 1..=vertices {
            for b in a + 1..=vertices {
                if rng.random::<f64>() < prob {
                    edges.push((a, b));
                }
            }
        }
        Self::clique_complex(vertices, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    /// Number of nonempty degrees (top dimension + 1).
    pub fn degrees(&self) -> usize {
        self.by_degree.len()
    }

    pub fn simplices(&self, q: usize) -> &[Vec<usize>] {
        self.by_degree.get(q).map_or(&[], Vec::as_slice)
    }

    /// Maximal simplices, for writing the complex back out.
    pub fn to_file(&self) -> ComplexFile {
        let mut maximal = Vec::new();
        for (q, level) in self.by_degree.iter().enumerate() {
            for s in level {
                let covered = self.simplices(q + 1).iter().any(|t| s.iter().all(|v| t.contains(v)));
                if !covered {
                    maximal.push(s.clone());
                }
            }
        }
        ComplexFile {
            vertices: self.vertices,
            maximal_simplices: maximal,
        }
    }

    /// `∂_q` with rows indexed by sorted `(q-1)`-simplices and columns by sorted
    /// `q`-simplices; removing the vertex in position `t` carries sign `(-1)^t`.
    pub fn boundary_matrix(&self, q: usize) -> Result<DMatrix<i64>> {
        if q == 0 {
            return domain("boundary matrix needs q >= 1");
        }
        let rows = self.simplices(q - 1);
        let cols = self.simplices(q);
        let mut m = DMatrix::<i64>::zeros(rows.len(), cols.len());
        for (c, s) in cols.iter().enumerate() {
            for t in 0..s.len() {
                let face: Vec<usize> = s.iter().enumerate().filter(|&(u, _)| u != t).map(|(_, &v)| v).collect();
                let r = rows.binary_search(&face).expect("complex is closed under faces");
                m[(r, c)] = if t % 2 == 0 { 1 } else { -1 };
            }
        }
        Ok(m)
    }

    fn boundary_f64(&self, q: usize) -> Result<DMatrix<f64>> {
        if q == 0 {
            return Ok(DMatrix::zeros(0, self.simplices(0).len()));
        }
        Ok(self.boundary_matrix(q)?.map(|x| x as f64))
    }

    pub fn hodge_laplacian(&self, q: usize) -> Result<DMatrix<f64>> {
        let size = self.simplices(q).len();
        if size == 0 {
            return domain(format!("complex has no simplices in degree {q}"));
        }
        let down = self.boundary_f64(q)?;
        let up = self.boundary_f64(q + 1)?;
        Ok(down.transpose() * &down + &up * up.transpose())
    }

    pub fn laplacian_spectrum(&self, q: usize) -> Result<Vec<f64>> {
        linalg::symmetric_spectrum(&self.hodge_laplacian(q)?)
    }

    /// Smallest eigenvalue of `L_q` above the kernel cutoff, `+∞` if none.
    pub fn spectral_gap(&self, q: usize) -> Result<f64> {
        Ok(gap_of(&self.laplacian_spectrum(q)?))
    }

    pub fn betti(&self, q: usize) -> Result<usize> {
        Ok(self.laplacian_spectrum(q)?.iter().filter(|&&x| x <= KERNEL_CUTOFF).count())
    }

    pub fn check_interlacing(&self) -> Result<GapReport> {
        let mut gaps = Vec::with_capacity(self.degrees());
        let mut betti = Vec::with_capacity(self.degrees());
        for q in 0..self.degrees() {
            let spec = self.laplacian_spectrum(q)?;
            gaps.push(gap_of(&spec));
            betti.push(spec.iter().filter(|&&x| x <= KERNEL_CUTOFF).count());
        }
        let neighbour = |q: Option<usize>| q.and_then(|q| gaps.get(q).copied()).unwrap_or(f64::INFINITY);
        let degrees: Vec<DegreeGap> = (0..self.degrees())
            .map(|q| {
                let bound = neighbour(q.checked_sub(1)).min(neighbour(Some(q + 1)));
                DegreeGap {
                    q,
                    simplices: self.simplices(q).len(),
                    lambda1: gaps[q],
                    betti: betti[q],
                    neighbour_min: bound,
                    interlacing_ok: gaps[q] >= bound - INTERLACING_TOL,
                }
            })
            .collect();
        let all_ok = degrees.iter().all(|d| d.interlacing_ok);
        Ok(GapReport {
            vertices: self.vertices,
            degrees,
            all_ok,
        })
    }
}

fn gap_of(spectrum: &[f64]) -> f64 {
    spectrum.iter().copied().find(|&x| x > KERNEL_CUTOFF).unwrap_or(f64::INFINITY)
}

/// Spectral data of one degree. `lambda1 = +∞` (serialized as `null`) when
/// `L_q` has no nonzero eigenvalue.
#[derive(Clone, Debug, Serialize)]
pub struct DegreeGap {
    pub q: usize,
    pub simplices: usize,
    pub lambda1: f64,
    pub betti: usize,
    pub neighbour_min: f64,
    pub interlacing_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub vertices: usize,
    pub degrees: Vec<DegreeGap>,
    pub all_ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> SimplicialComplex {
        SimplicialComplex::from_maximal(3, &[vec![1, 2], vec![2, 3], vec![1, 3]]).unwrap()
    }

    fn filled_triangle() -> SimplicialComplex {
        SimplicialComplex::from_maximal(3, &[vec![1, 2, 3]]).unwrap()
    }

    fn edge() -> SimplicialComplex {
        SimplicialComplex::from_maximal(2, &[vec![1, 2]]).unwrap()
    }

    fn assert_spectrum(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn single_edge() {
        let c = edge();
        assert_eq!(c.boundary_matrix(1).unwrap(), DMatrix::from_row_slice(2, 1, &[-1, 1]));
        assert_spectrum(&c.laplacian_spectrum(0).unwrap(), &[0.0, 2.0]);
        assert_spectrum(&c.laplacian_spectrum(1).unwrap(), &[2.0]);
        let rep = c.check_interlacing().unwrap();
        assert!((rep.degrees[0].lambda1 - 2.0).abs() < 1e-12);
        assert!((rep.degrees[1].lambda1 - 2.0).abs() < 1e-12);
        assert!(rep.all_ok);
    }

    #[test]
    fn three_cycle() {
        let c = cycle3();
        assert_spectrum(&c.laplacian_spectrum(0).unwrap(), &[0.0, 3.0, 3.0]);
        assert_spectrum(&c.laplacian_spectrum(1).unwrap(), &[0.0, 3.0, 3.0]);
        assert!((c.spectral_gap(0).unwrap() - 3.0).abs() < 1e-12);
        assert!((c.spectral_gap(1).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(c.betti(0).unwrap(), 1);
        assert_eq!(c.betti(1).unwrap(), 1);
        assert!(c.check_interlacing().unwrap().all_ok);
    }

    #[test]
    fn filled_triangle_laplacian() {
        let c = filled_triangle();
        let l1 = c.hodge_laplacian(1).unwrap();
        assert!((l1 - DMatrix::identity(3, 3) * 3.0).abs().max() < 1e-12);
        assert_eq!(c.betti(1).unwrap(), 0);
        assert!((c.spectral_gap(1).unwrap() - 3.0).abs() < 1e-12);
        let d1 = c.boundary_matrix(1).unwrap();
        let d2 = c.boundary_matrix(2).unwrap();
        assert_eq!(d1 * d2, DMatrix::zeros(3, 1));
    }

    #[test]
    fn errors_and_empty_degrees() {
        let c = edge();
        assert!(c.boundary_matrix(0).is_err());
        assert_eq!(c.boundary_matrix(3).unwrap().ncols(), 0);
        assert!(c.hodge_laplacian(2).is_err());
        assert!(SimplicialComplex::from_maximal(2, &[vec![1, 3]]).is_err());
        assert!(SimplicialComplex::from_maximal(2, &[vec![1, 1]]).is_err());
        let point = SimplicialComplex::from_maximal(1, &[]).unwrap();
        assert_eq!(point.spectral_gap(0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn json_reader_closes_downward() {
        let c = SimplicialComplex::from_json(r#"{"vertices":4,"maximal_simplices":[[1,2,3],[3,4]]}"#).unwrap();
        assert_eq!(c.simplices(0).len(), 4);
        assert_eq!(c.simplices(1).len(), 4);
        assert_eq!(c.simplices(2).len(), 1);
        let back = SimplicialComplex::from_file(&c.to_file()).unwrap();
        assert_eq!(back, c);
        assert!(SimplicialComplex::from_json("[1,2]").is_err());
    }

    #[test]
    fn boundary_squares_to_zero_on_random_complexes() {
        for seed in 0..30 {
            let c = SimplicialComplex::random_clique_complex(7, 0.6, seed).unwrap();
            for q in 1..c.degrees() {
                let prod = c.boundary_matrix(q).unwrap() * c.boundary_matrix(q + 1).unwrap();
                assert!(prod.iter().all(|&x| x == 0));
            }
        }
    }

    #[test]
    fn up_and_down_parts_share_nonzero_spectrum() {
        for seed in 0..20 {
            let c = SimplicialComplex::random_clique_complex(6, 0.5, seed).unwrap();
            for q in 1..c.degrees() {
                let d = c.boundary_f64(q).unwrap();
                let nonzero = |m: DMatrix<f64>| -> Vec<f64> {
                    linalg::symmetric_spectrum(&m).unwrap().into_iter().filter(|&x| x > KERNEL_CUTOFF).collect()
                };
                let a = nonzero(d.transpose() * &d);
                let b = nonzero(&d * d.transpose());
                assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn betti_numbers_match_euler_characteristic() {
        for seed in 0..20 {
            let c = SimplicialComplex::random_clique_complex(7, 0.5, seed).unwrap();
            let mut chi_cells = 0i64;
            let mut chi_betti = 0i64;
            for q in 0..c.degrees() {
                let sign = if q % 2 == 0 { 1 } else { -1 };
                chi_cells += sign * c.simplices(q).len() as i64;
                chi_betti += sign * c.betti(q).unwrap() as i64;
            }
            assert_eq!(chi_cells, chi_betti);
            let spec = c.laplacian_spectrum(0).unwrap();
            assert!(spec.iter().all(|&x| x >= -1e-10));
        }
    }
}
