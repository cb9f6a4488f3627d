//! The quarter-turn `R = exp(−i(π/2)K₃)`, an exact symmetry of the periodic grid.
//!
//! `(Rψ)(x) = D·ψ(R⁻¹x)` with `D = exp(−i(π/2)(½Σ₃ + (m/2)T₃))`. The lattice
//! is invariant under quarter turns about the z axis, so `R` is a monomial
//! matrix (a permutation with phases) and commutes exactly with every operator
//! built from spectral derivatives and rotation-covariant coefficients.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::algebra::{kron, CMatrix, DiracAlgebra, IsoSpinTriple, C64, ZERO};
use crate::eigen::dense_hermitian;
use crate::error::{CqsmError, Result};
use crate::grid::GridSpec;
use crate::linalg::LinearOperator;

/// Unitary quarter-turn on the grid Hilbert space.
#[derive(Debug, Clone)]
pub struct QuarterTurn {
    spec: GridSpec,
    d: usize,
    /// Diagonal of `D`.
    phase: Vec<C64>,
    /// `K₃`-values of the spin–iso-spin part `½Σ₃ + (m/2)T₃`, per component.
    spin_iso: Vec<f64>,
}

impl QuarterTurn {
    /// Requires `Σ₃` and `T₃` diagonal so that `R` is monomial.
    pub fn new(spec: GridSpec, alg: &DiracAlgebra, triple: &IsoSpinTriple, m: i32) -> Result<Self> {
        let idk = triple.identity();
        let s = kron(&alg.sigma3(), &idk) * C64::new(0.5, 0.0)
            + kron(&crate::algebra::identity(4), &triple.t[2]) * C64::new(0.5 * m as f64, 0.0);
        let d = s.nrows();
        for i in 0..d {
            for j in 0..d {
                if i != j && s[(i, j)].norm() > 1e-14 {
                    return Err(CqsmError::Unsupported(
                        "quarter-turn reduction needs diagonal Σ₃ and T₃".into(),
                    ));
                }
            }
        }
        let spin_iso: Vec<f64> = (0..d).map(|i| s[(i, i)].re).collect();
        let phase = spin_iso
            .iter()
            .map(|&v| C64::new(0.0, -FRAC_PI_2 * v).exp())
            .collect();
        Ok(Self {
            spec,
            d,
            phase,
            spin_iso,
        })
    }

    pub fn internal_dim(&self) -> usize {
        self.d
    }

    /// Node reached from `node` by the rotation `(x, y, z) ↦ (−y, x, z)`.
    pub fn rotate_node(&self, node: usize) -> usize {
        let n = self.spec.n;
        let [ix, iy, iz] = self.spec.node_coords(node);
        // Transverse coordinates are symmetric: −x_i = x_{n−1−i}.
        self.spec.node_index(n - 1 - iy, ix, iz)
    }

    /// `R⁴`, a scalar `±1`.
    pub fn fourth_power(&self) -> f64 {
        let s = self.spin_iso[0];
        if (2.0 * s).rem_euclid(2.0) < 0.5 {
            1.0
        } else {
            -1.0
        }
    }

    /// The four admissible `K₃ mod 4` values (integers or half-integers).
    pub fn sector_values(&self) -> [f64; 4] {
        let k0 = if self.fourth_power() > 0.0 { 0.0 } else { 0.5 };
        [k0, k0 + 1.0, k0 + 2.0, k0 + 3.0]
    }

    /// Orthonormal basis of the `R`-eigenspace with eigenvalue
    /// `exp(−i(π/2)κ)`, as sparse columns `[(index, coefficient)]`.
    pub fn sector_basis(&self, kappa: f64) -> Vec<Vec<(usize, C64)>> {
        let omega = C64::new(0.0, -FRAC_PI_2 * kappa).exp();
        let nodes = self.spec.nodes();
        let mut seen = vec![false; nodes];
        let mut basis = Vec::new();
        for start in 0..nodes {
            if seen[start] {
                continue;
            }
            let mut orbit = vec![start];
            seen[start] = true;
            let mut p = self.rotate_node(start);
            while p != start {
                seen[p] = true;
                orbit.push(p);
                p = self.rotate_node(p);
            }
            let len = orbit.len();
            let norm = 1.0 / (len as f64).sqrt();
            for c in 0..self.d {
                // R^len e₀ = φ e₀ with φ = D_cc^len; the projected vector is
                // nonzero iff ω^{−len} φ = 1.
                let phi = self.phase[c].powu(len as u32);
                if (phi / omega.powu(len as u32) - 1.0).norm() > 1e-9 {
                    continue;
                }
                let mut col = Vec::with_capacity(len);
                let mut coef = C64::new(norm, 0.0);
                for &q in &orbit {
                    col.push((q * self.d + c, coef));
                    // R^{k+1} e₀ = D_cc R^k e₀ moved to the next node, weighted by ω^{−(k+1)}.
                    coef *= self.phase[c] / omega;
                }
                basis.push(col);
            }
        }
        basis
    }

    /// `V* A V` for a sector basis `V`.
    pub fn block<A: LinearOperator + ?Sized>(&self, op: &A, basis: &[Vec<(usize, C64)>]) -> CMatrix {
        let dim = op.dim();
        let mut m = CMatrix::zeros(basis.len(), basis.len());
        let mut v = vec![ZERO; dim];
        let mut av = vec![ZERO; dim];
        for (j, col) in basis.iter().enumerate() {
            for &(i, c) in col {
                v[i] = c;
            }
            op.apply_into(&v, &mut av);
            for &(i, _) in col {
                v[i] = ZERO;
            }
            for (r, row) in basis.iter().enumerate() {
                m[(r, j)] = row.iter().map(|&(i, c)| c.conj() * av[i]).sum();
            }
        }
        m
    }

    /// Largest `‖V_a* A V_b‖` entry over distinct sectors `a ≠ b`.
    pub fn off_block_residual<A: LinearOperator + ?Sized>(&self, op: &A) -> f64 {
        let bases: Vec<_> = self
            .sector_values()
            .iter()
            .map(|&k| self.sector_basis(k))
            .collect();
        let dim = op.dim();
        let mut worst: f64 = 0.0;
        let mut v = vec![ZERO; dim];
        let mut av = vec![ZERO; dim];
        for (b, bb) in bases.iter().enumerate() {
            for col in bb {
                for &(i, c) in col {
                    v[i] = c;
                }
                op.apply_into(&v, &mut av);
                for &(i, _) in col {
                    v[i] = ZERO;
                }
                for (a, ba) in bases.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    for row in ba {
                        let e: C64 = row.iter().map(|&(i, c)| c.conj() * av[i]).sum();
                        worst = worst.max(e.norm());
                    }
                }
            }
        }
        worst
    }

    pub fn apply_rotation(&self, x: &[C64]) -> Vec<C64> {
        let d = self.d;
        let mut y = vec![ZERO; x.len()];
        for p in 0..self.spec.nodes() {
            let q = self.rotate_node(p);
            for c in 0..d {
                y[q * d + c] = self.phase[c] * x[p * d + c];
            }
        }
        y
    }
}

impl LinearOperator for QuarterTurn {
    fn dim(&self) -> usize {
        self.spec.nodes() * self.d
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&self.apply_rotation(x));
    }
}

/// Spectrum of one quarter-turn sector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub kappa_mod4: f64,
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
}

/// Dense spectra of `op` in each quarter-turn sector.
pub fn dense_sector_spectra<A: LinearOperator + ?Sized>(
    op: &A,
    rot: &QuarterTurn,
) -> Vec<SectorSpectrum> {
    rot.sector_values()
        .iter()
        .map(|&k| {
            let basis = rot.sector_basis(k);
            let block = rot.block(op, &basis);
            let vals = crate::eigen::dense_hermitian_values(&block);
            SectorSpectrum {
                kappa_mod4: k,
                dim: basis.len(),
                eigenvalues: vals,
            }
        })
        .collect()
}

/// Dense eigenpairs of `op` within one sector, with eigenvectors expanded back
/// to the full grid space.
pub fn dense_sector_eigenpairs<A: LinearOperator + ?Sized>(
    op: &A,
    rot: &QuarterTurn,
    kappa: f64,
) -> (Vec<f64>, Vec<Vec<C64>>) {
    let basis = rot.sector_basis(kappa);
    let block = rot.block(op, &basis);
    let (vals, vecs) = dense_hermitian(&block);
    let dim = op.dim();
    let full = (0..vals.len())
        .map(|j| {
            let mut v = vec![ZERO; dim];
            for (r, col) in basis.iter().enumerate() {
                let a = vecs[(r, j)];
                for &(i, c) in col {
                    v[i] += c * a;
                }
            }
            v
        })
        .collect();
    (vals, full)
}

/// All eigenvalues of `op`, assembled from the four sector blocks.
pub fn dense_spectrum_by_sectors<A: LinearOperator + ?Sized>(op: &A, rot: &QuarterTurn) -> Vec<f64> {
    let mut all: Vec<f64> = dense_sector_spectra(op, rot)
        .into_iter()
        .flat_map(|s| s.eigenvalues)
        .collect();
    all.sort_by(f64::total_cmp);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{pauli_triple, weyl_matrices};
    use crate::field::{Direction, MassField, ProfileConfig};
    use crate::grid::SpectralGrid;
    use crate::hamiltonian::{assemble_h, assemble_k3};
    use crate::linalg::{norm, random_vector, sub, to_dense};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn hedgehog_h(n: usize) -> (crate::hamiltonian::DiracOperator, QuarterTurn) {
        let spec = GridSpec::new(3.0, n).unwrap();
        let grid = Arc::new(SpectralGrid::new(spec).unwrap());
        let mf = MassField::new(
            ProfileConfig::exp_i(0.55),
            pauli_triple(),
            Direction::polar_hedgehog(1),
            1.0,
        )
        .unwrap();
        let alg = weyl_matrices();
        let h = assemble_h(&grid, &mf, &alg).unwrap();
        let rot = QuarterTurn::new(spec, &alg, &pauli_triple(), 1).unwrap();
        (h, rot)
    }

    #[test]
    fn rotation_commutes_with_hedgehog_h() {
        let (h, rot) = hedgehog_h(7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_vector(h.dim(), &mut rng);
        let a = h.apply(&rot.apply(&x));
        let b = rot.apply(&h.apply(&x));
        assert!(norm(&sub(&a, &b)) < 1e-12 * norm(&x));
        let mut y = x.clone();
        for _ in 0..4 {
            y = rot.apply(&y);
        }
        assert!(norm(&sub(&y, &x)) < 1e-12 * norm(&x));
        assert_eq!(rot.fourth_power(), 1.0);
    }

    #[test]
    fn rotation_generated_by_k3() {
        // R = exp(−i(π/2)K₃): on a K₃ eigenvector built from radial data, R acts as
        // the phase exp(−i(π/2)κ). Check against the spin-iso part on a radial state.
        let spec = GridSpec::new(6.0, 15).unwrap();
        let grid = Arc::new(SpectralGrid::new(spec).unwrap());
        let alg = weyl_matrices();
        let rot = QuarterTurn::new(spec, &alg, &pauli_triple(), 2).unwrap();
        let k3 = assemble_k3(&grid, &alg, &pauli_triple(), 2);
        let mut psi = vec![ZERO; k3.dim()];
        for p in 0..spec.nodes() {
            let x = spec.position(p);
            psi[p * 8 + 3] = C64::new((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0);
        }
        let kappa = k3.spin_iso_matrix()[(3, 3)].re;
        let r = rot.apply(&psi);
        let expected: Vec<C64> = psi
            .iter()
            .map(|v| v * C64::new(0.0, -FRAC_PI_2 * kappa).exp())
            .collect();
        assert!(norm(&sub(&r, &expected)) < 1e-14);
        assert_eq!(rot.fourth_power(), -1.0);
    }

    #[test]
    fn sector_bases_partition_the_space() {
        let (h, rot) = hedgehog_h(5);
        let total: usize = rot
            .sector_values()
            .iter()
            .map(|&k| rot.sector_basis(k).len())
            .sum();
        assert_eq!(total, h.dim());
        assert!(rot.off_block_residual(&h) < 1e-12);
    }

    #[test]
    fn sector_spectra_match_full_dense() {
        let (h, rot) = hedgehog_h(5);
        let full = crate::eigen::dense_hermitian_values(&to_dense(&h));
        let by_sector = dense_spectrum_by_sectors(&h, &rot);
        assert_eq!(full.len(), by_sector.len());
        for (a, b) in full.iter().zip(&by_sector) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
