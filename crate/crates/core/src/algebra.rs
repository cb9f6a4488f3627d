//! Finite-dimensional operator algebra: Dirac matrices in the Weyl
//! representation, iso-spin triples and the grading matrix `iγ₅β ⊗ ξ`.
//!
//! Spinor index ordering throughout the crate is `spin * dim_k + iso`, i.e.
//! operators on `ℂ⁴ ⊗ 𝒦` are Kronecker products `A ⊗ B` with `A` acting on
//! the spinor factor.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The three Pauli matrices.
pub fn pauli() -> [CMatrix; 3] {
    let s1 = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let s2 = CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let s3 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    [s1, s2, s3]
}

/// `A ⊗ B` with the row index `i_a * rows(B) + i_b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |A - A*|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// Dirac matrices `α₁, α₂, α₃, β` and `γ₅ = −iα₁α₂α₃`.
#[derive(Debug, Clone)]
pub struct DiracAlgebra {
    pub alpha: [CMatrix; 3],
    pub beta: CMatrix,
    pub gamma5: CMatrix,
}

impl DiracAlgebra {
    /// Spin operator `Σ₃ = −iα₁α₂` (equals `σ₃ ⊕ σ₃` in the Weyl representation).
    pub fn sigma3(&self) -> CMatrix {
        (&self.alpha[0] * &self.alpha[1]) * (-I)
    }

    /// `diag(σ_j, σ_j)` on the spinor factor.
    pub fn spin_block(&self, j: usize) -> CMatrix {
        let s = &pauli()[j];
        block_diag(s, s)
    }
}

/// `α_j = diag(σ_j, −σ_j)`, `β = antidiag(I₂, I₂)`; `γ₅` is computed from the product.
pub fn weyl_matrices() -> DiracAlgebra {
    let s = pauli();
    let alpha = [0, 1, 2].map(|j| block_diag(&s[j], &(-s[j].clone())));
    let mut beta = CMatrix::zeros(4, 4);
    for k in 0..2 {
        beta[(k, k + 2)] = ONE;
        beta[(k + 2, k)] = ONE;
    }
    let gamma5 = (&alpha[0] * &alpha[1] * &alpha[2]) * (-I);
    DiracAlgebra {
        alpha,
        beta,
        gamma5,
    }
}

/// Bounded self-adjoint `T₁, T₂, T₃` on a finite-dimensional iso-spin space.
#[derive(Debug, Clone)]
pub struct IsoSpinTriple {
    pub t: [CMatrix; 3],
}

impl IsoSpinTriple {
    pub fn new(t1: CMatrix, t2: CMatrix, t3: CMatrix) -> Result<Self> {
        let n = t1.nrows();
        if n == 0 {
            return Err(invalid("triple", "iso-spin space must be non-trivial"));
        }
        for t in [&t1, &t2, &t3] {
            if t.nrows() != n || t.ncols() != n {
                return Err(invalid("triple", "matrices must be square and of equal size"));
            }
        }
        Ok(Self { t: [t1, t2, t3] })
    }

    pub fn dim_k(&self) -> usize {
        self.t[0].nrows()
    }

    /// `Σ_a n_a T_a`.
    pub fn dot(&self, n: [f64; 3]) -> CMatrix {
        &self.t[0] * c(n[0], 0.0) + &self.t[1] * c(n[1], 0.0) + &self.t[2] * c(n[2], 0.0)
    }

    /// `T_j ⊗ I_k` acting on `𝒦 ⊗ ℂᵏ`.
    pub fn tensor_identity(&self, k: usize) -> Self {
        let id = identity(k);
        Self {
            t: [0, 1, 2].map(|j| kron(&self.t[j], &id)),
        }
    }

    pub fn identity(&self) -> CMatrix {
        identity(self.dim_k())
    }
}

/// The Pauli matrices as the canonical `dim 𝒦 = 2` triple.
pub fn pauli_triple() -> IsoSpinTriple {
    let [t1, t2, t3] = pauli();
    IsoSpinTriple { t: [t1, t2, t3] }
}

/// A failed triple relation and its max-entry residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub relation: String,
    pub residual: f64,
}

/// Checks `T_j* = T_j`, `T_j² = I`, the cyclic products and that no `T_j`
/// is `±I`. Returns every relation whose residual exceeds `tol`.
pub fn verify_triple(triple: &IsoSpinTriple, tol: f64) -> Vec<Violation> {
    let id = triple.identity();
    let t = &triple.t;
    let mut out = Vec::new();
    let mut check = |relation: String, residual: f64| {
        if residual > tol {
            out.push(Violation { relation, residual });
        }
    };
    for j in 0..3 {
        check(format!("T{}*=T{}", j + 1, j + 1), hermiticity_defect(&t[j]));
        check(format!("T{}²=I", j + 1), max_abs(&(&t[j] * &t[j] - &id)));
    }
    for (a, b, p) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let res = max_abs(&(&t[a] * &t[b] - &t[p] * I));
        check(format!("T{}T{}=iT{}", a + 1, b + 1, p + 1), res);
    }
    for j in 0..3 {
        // Distance from ±I; both eigenvalues ±1 must be present.
        let plus = max_abs(&(&t[j] - &id));
        let minus = max_abs(&(&t[j] + &id));
        if plus <= tol || minus <= tol {
            out.push(Violation {
                relation: format!("σ(T{})={{+1,−1}}", j + 1),
                residual: plus.min(minus),
            });
        }
    }
    out
}

/// Constant grading factor `ξ = (C·T₁ − T₂)/√(1+C²)`.
#[derive(Debug, Clone)]
pub struct XiOperator {
    pub c: f64,
    pub xi: CMatrix,
}

impl XiOperator {
    pub fn new(c: f64, triple: &IsoSpinTriple) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(invalid("c", "must be a nonzero finite real"));
        }
        let norm = (1.0 + c * c).sqrt();
        let xi = triple.dot([c / norm, -1.0 / norm, 0.0]);
        Ok(Self { c, xi })
    }

    /// The unit iso-vector `(C, −1, 0)/√(1+C²)` with `ξ = v·T`.
    pub fn direction(&self) -> [f64; 3] {
        let norm = (1.0 + self.c * self.c).sqrt();
        [self.c / norm, -1.0 / norm, 0.0]
    }
}

/// `Γ = iγ₅β ⊗ ξ` on `ℂ⁴ ⊗ 𝒦`.
pub fn grading_matrix(alg: &DiracAlgebra, xi: &XiOperator) -> CMatrix {
    kron(&((&alg.gamma5 * &alg.beta) * I), &xi.xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(j: usize, k: usize) -> f64 {
        if j == k {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn weyl_alpha_entries() {
        let alg = weyl_matrices();
        assert_eq!(alg.alpha[0][(0, 1)], ONE);
        assert_eq!(alg.alpha[0][(2, 3)], -ONE);
    }

    #[test]
    fn clifford_relations_exact() {
        let alg = weyl_matrices();
        let id = identity(4);
        for j in 0..3 {
            for k in 0..3 {
                let ac = anticommutator(&alg.alpha[j], &alg.alpha[k]);
                assert!(max_abs(&(ac - &id * c(2.0 * delta(j, k), 0.0))) < 1e-15);
            }
            assert!(max_abs(&anticommutator(&alg.alpha[j], &alg.beta)) < 1e-15);
            assert!(max_abs(&commutator(&alg.gamma5, &alg.alpha[j])) < 1e-15);
        }
        assert!(max_abs(&(&alg.beta * &alg.beta - &id)) < 1e-15);
        assert!(max_abs(&anticommutator(&alg.gamma5, &alg.beta)) < 1e-15);
    }

    #[test]
    fn gamma5_by_hand() {
        // σ₁σ₂σ₃ = i·I₂, so α₁α₂α₃ = diag(iI, −iI) and −i times that is diag(1,1,−1,−1).
        let alg = weyl_matrices();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            ONE, ONE, -ONE, -ONE,
        ]));
        assert!(max_abs(&(&alg.gamma5 - expected)) < 1e-15);
    }

    #[test]
    fn sigma3_is_block_pauli() {
        let alg = weyl_matrices();
        assert!(max_abs(&(alg.sigma3() - alg.spin_block(2))) < 1e-15);
    }

    #[test]
    fn pauli_algebra() {
        let t = pauli_triple();
        assert!(max_abs(&(&t.t[0] * &t.t[1] - &t.t[2] * I)) < 1e-15);
        assert!(max_abs(&anticommutator(&t.t[0], &t.t[1])) < 1e-15);
        assert_eq!(t.t[2][(0, 0)], ONE);
        assert_eq!(t.t[2][(1, 1)], -ONE);
        assert!(verify_triple(&t, 1e-12).is_empty());
    }

    #[test]
    fn sign_flip_breaks_cyclic_product() {
        let t = pauli_triple();
        let bad = IsoSpinTriple::new(t.t[0].clone(), t.t[1].clone(), -t.t[2].clone()).unwrap();
        let v = verify_triple(&bad, 1e-12);
        assert!(v.iter().any(|v| v.relation == "T1T2=iT3"));
    }

    #[test]
    fn tensored_triple_is_valid() {
        let t = pauli_triple().tensor_identity(2);
        assert_eq!(t.dim_k(), 4);
        assert!(verify_triple(&t, 1e-12).is_empty());
    }

    #[test]
    fn identity_triple_is_rejected() {
        let id = identity(2);
        let t = IsoSpinTriple::new(id.clone(), id.clone(), id).unwrap();
        assert!(verify_triple(&t, 1e-12)
            .iter()
            .any(|v| v.relation.starts_with("σ(T1)")));
    }

    #[test]
    fn grading_is_involutive_and_hermitian() {
        let alg = weyl_matrices();
        for cc in [1.0, 2.0, -0.3] {
            let xi = XiOperator::new(cc, &pauli_triple()).unwrap();
            assert!(max_abs(&(&xi.xi * &xi.xi - identity(2))) < 1e-14);
            let g = grading_matrix(&alg, &xi);
            assert!(max_abs(&(&g * &g - identity(8))) < 1e-14);
            assert!(hermiticity_defect(&g) < 1e-15);
        }
        assert!(XiOperator::new(0.0, &pauli_triple()).is_err());
    }

    #[test]
    fn grading_anticommutes_with_orthogonal_mass() {
        // Brute force over 8×8 matrices. {Γ, β⊗A} = iγ₅⊗[ξ, A], so β⊗τ₃ fails to
        // anticommute, while the chiral mass piece iβγ₅⊗(n·τ) anticommutes
        // exactly when n ⊥ (C, −1, 0).
        let alg = weyl_matrices();
        let tri = pauli_triple();
        let cc = 2.0;
        let xi = XiOperator::new(cc, &tri).unwrap();
        let g = grading_matrix(&alg, &xi);
        let m3 = kron(&alg.beta, &tri.t[2]);
        assert!(max_abs(&anticommutator(&g, &m3)) > 0.5);
        let bg5 = (&alg.beta * &alg.gamma5) * I;
        let norm = (1.0 + cc * cc).sqrt();
        for n in [[0.0, 0.0, 1.0], [1.0 / norm, cc / norm, 0.0], [0.6 / norm, 0.6 * cc / norm, 0.8]] {
            let mn = kron(&bg5, &tri.dot(n));
            assert!(max_abs(&anticommutator(&g, &mn)) < 1e-14);
        }
        let parallel = kron(&bg5, &xi.xi);
        assert!(max_abs(&anticommutator(&g, &parallel)) > 0.5);
        // β⊗(n·τ) anticommutes only for n ∥ (C, −1, 0).
        assert!(max_abs(&anticommutator(&g, &kron(&alg.beta, &xi.xi))) < 1e-14);
    }
}
