//! `K₃` symmetry reduction: sector labels, the reduced cylindrical operators
//! `L_s(G, ℓ)`, classification of eigenvectors and the sector decomposition of
//! the spectrum.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::algebra::{CMatrix, DiracAlgebra, C64, ZERO};
use crate::eigen::{dense_hermitian, dense_hermitian_values, smallest, SolverInfo, SolverOptions};
use crate::error::{invalid, Result};
use crate::field::MassField;
use crate::grid::SpectralGrid;
use crate::hamiltonian::{assemble_h, assemble_k3, K3Operator};
use crate::linalg::{dot, norm, to_dense, LinearOperator};
use crate::spectra::clusters;
use crate::symmetry::{dense_sector_eigenpairs, QuarterTurn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorLabel {
    pub l: i32,
    pub s: i8,
    pub t: i8,
    pub k3_value: f64,
}

impl SectorLabel {
    /// `κ = ℓ + s/2 + m·t/2`.
    pub fn new(l: i32, s: i8, t: i8, m: i32) -> Result<Self> {
        if s.abs() != 1 || t.abs() != 1 {
            return Err(invalid("s/t", "must be ±1"));
        }
        Ok(Self {
            l,
            s,
            t,
            k3_value: l as f64 + 0.5 * s as f64 + 0.5 * (m * t as i32) as f64,
        })
    }

    pub fn is_consistent(&self, m: i32) -> bool {
        SectorLabel::new(self.l, self.s, self.t, m).is_ok_and(|o| o.k3_value == self.k3_value)
    }
}

/// Half-offset grid on `(0, r_max) × (−z_max, z_max)` with weight `r dr dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylGrid {
    pub r_max: f64,
    pub z_max: f64,
    pub n_r: usize,
    pub n_z: usize,
}

impl CylGrid {
    pub fn new(r_max: f64, z_max: f64, n_r: usize, n_z: usize) -> Result<Self> {
        let g = Self {
            r_max,
            z_max,
            n_r,
            n_z,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.z_max > 0.0) {
            return Err(invalid("r_max/z_max", "must be positive"));
        }
        if self.n_r < 2 || self.n_z < 2 {
            return Err(invalid("n_r/n_z", "need at least 2 nodes per direction"));
        }
        Ok(())
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n_r as f64
    }

    pub fn dz(&self) -> f64 {
        2.0 * self.z_max / self.n_z as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }

    pub fn z(&self, j: usize) -> f64 {
        -self.z_max + (j as f64 + 0.5) * self.dz()
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `r_i·Δr·Δz`.
    pub fn weight(&self, i: usize) -> f64 {
        self.r(i) * self.dr() * self.dz()
    }
}

/// Sign of the `∂²/∂z²` term in `L_s(G, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZSign {
    /// `−∂²/∂z²`, consistent with `−Δ` in cylindrical coordinates.
    #[default]
    Minus,
    /// `+∂²/∂z²`; unbounded below even for `G ≡ 0`.
    Plus,
}

/// `L_s(G, ℓ) = −∂²_r − (1/r)∂_r + ℓ²/r² ∓ ∂²_z + sM ∂_z cos G`, Dirichlet at
/// `r_max` and `±z_max`, zero flux at `r = 0`.
///
/// Stored in the symmetrized form `W^{1/2} L W^{−1/2}` (`W = diag(r_i)`), which
/// is symmetric in the plain inner product; node `(i, j)` is index `i·n_z + j`.
#[derive(Debug, Clone)]
pub struct CylOperator {
    pub grid: CylGrid,
    pub l: i32,
    pub s: i8,
    pub mass: f64,
    pub z_sign: ZSign,
    /// Symmetrized radial tridiagonal part including `ℓ²/r²`: (diag, off-diag).
    radial: (Vec<f64>, Vec<f64>),
    /// z tridiagonal part: (diag, off-diag).
    axial: (Vec<f64>, Vec<f64>),
    potential: Vec<f64>,
}

fn tridiag_apply(t: &(Vec<f64>, Vec<f64>), x: &[C64], stride: usize, count: usize, base: usize, y: &mut [C64]) {
    let (d, o) = t;
    for i in 0..count {
        let mut v = x[base + i * stride] * d[i];
        if i > 0 {
            v += x[base + (i - 1) * stride] * o[i - 1];
        }
        if i + 1 < count {
            v += x[base + (i + 1) * stride] * o[i];
        }
        y[base + i * stride] += v;
    }
}

fn tridiag_dense(t: &(Vec<f64>, Vec<f64>)) -> DMatrix<f64> {
    let n = t.0.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            t.0[i]
        } else if i + 1 == j {
            t.1[i]
        } else if j + 1 == i {
            t.1[j]
        } else {
            0.0
        }
    })
}

impl CylOperator {
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `L f` in the unsymmetrized variables, for checks in the weighted product.
    pub fn apply_weighted(&self, f: &[C64]) -> Vec<C64> {
        let nz = self.grid.n_z;
        let sq: Vec<f64> = (0..self.grid.n_r).map(|i| self.grid.r(i).sqrt()).collect();
        let g: Vec<C64> = f.iter().enumerate().map(|(k, v)| v * sq[k / nz]).collect();
        let mut out = self.apply(&g);
        out.iter_mut().enumerate().for_each(|(k, v)| *v /= sq[k / nz]);
        out
    }

    /// Dense symmetrized matrix.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let (nr, nz) = (self.grid.n_r, self.grid.n_z);
        let tr = tridiag_dense(&self.radial);
        let tz = tridiag_dense(&self.axial);
        let mut m = DMatrix::zeros(nr * nz, nr * nz);
        for i in 0..nr {
            for j in 0..nz {
                let a = i * nz + j;
                m[(a, a)] += self.potential[a];
                for i2 in 0..nr {
                    m[(a, i2 * nz + j)] += tr[(i, i2)];
                }
                for j2 in 0..nz {
                    m[(a, i * nz + j2)] += tz[(j, j2)];
                }
            }
        }
        m
    }

    /// Fast-diagonalization inverse of the separable part `T_r ⊕ T_z + c`.
    pub fn preconditioner(&self) -> Option<SeparableInverse> {
        if self.z_sign == ZSign::Plus {
            return None;
        }
        let er = SymmetricEigen::new(tridiag_dense(&self.radial));
        let ez = SymmetricEigen::new(tridiag_dense(&self.axial));
        let vmin = self.potential.iter().copied().fold(0.0f64, f64::min);
        Some(SeparableInverse {
            qr: er.eigenvectors,
            lr: er.eigenvalues.iter().copied().collect(),
            qz: ez.eigenvectors,
            lz: ez.eigenvalues.iter().copied().collect(),
            shift: 1.0 - vmin,
        })
    }
}

impl LinearOperator for CylOperator {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let (nr, nz) = (self.grid.n_r, self.grid.n_z);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = x[k] * self.potential[k];
        }
        for j in 0..nz {
            tridiag_apply(&self.radial, x, nz, nr, j, y);
        }
        for i in 0..nr {
            tridiag_apply(&self.axial, x, 1, nz, i * nz, y);
        }
    }
}

/// `(Q_r ⊗ Q_z)(Λ_r ⊕ Λ_z + c)⁻¹(Q_r ⊗ Q_z)ᵀ`.
pub struct SeparableInverse {
    qr: DMatrix<f64>,
    lr: Vec<f64>,
    qz: DMatrix<f64>,
    lz: Vec<f64>,
    shift: f64,
}

impl SeparableInverse {
    /// `Y = Q_rᵀ X Q_z` (or `Q_r X Q_zᵀ` when `back`) on an `n_r × n_z` array.
    fn transform(&self, x: &DMatrix<f64>, back: bool) -> DMatrix<f64> {
        if back {
            &self.qr * x * self.qz.transpose()
        } else {
            self.qr.transpose() * x * &self.qz
        }
    }
}

impl LinearOperator for SeparableInverse {
    fn dim(&self) -> usize {
        self.lr.len() * self.lz.len()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let (nr, nz) = (self.lr.len(), self.lz.len());
        let part = |f: fn(&C64) -> f64| {
            let m = DMatrix::from_fn(nr, nz, |i, j| f(&x[i * nz + j]));
            let mut t = self.transform(&m, false);
            for i in 0..nr {
                for j in 0..nz {
                    t[(i, j)] /= self.lr[i] + self.lz[j] + self.shift;
                }
            }
            self.transform(&t, true)
        };
        let re = part(|c| c.re);
        let im = part(|c| c.im);
        for i in 0..nr {
            for j in 0..nz {
                y[i * nz + j] = C64::new(re[(i, j)], im[(i, j)]);
            }
        }
    }
}

/// `G(r, z) = F(√(r² + z²))` for the (radial, hence axisymmetric) profile of `mf`.
pub fn profile_as_g(mf: &MassField) -> impl Fn(f64, f64) -> Result<f64> + '_ {
    move |r, z| mf.profile_at([r, 0.0, z])
}

/// Assembles `L_s(G, ℓ)`; `∂_z cos G` uses centred differences of `cos∘G`.
pub fn assemble_ls(
    g: &dyn Fn(f64, f64) -> Result<f64>,
    l: i32,
    s: i8,
    mass: f64,
    grid: CylGrid,
    z_sign: ZSign,
) -> Result<CylOperator> {
    grid.validate()?;
    if s.abs() != 1 {
        return Err(invalid("s", "must be ±1"));
    }
    let (nr, nz) = (grid.n_r, grid.n_z);
    let (dr, dz) = (grid.dr(), grid.dz());
    let l2 = (l as f64).powi(2);
    let mut rd = Vec::with_capacity(nr);
    let mut ro = Vec::with_capacity(nr.saturating_sub(1));
    for i in 0..nr {
        let r = grid.r(i);
        let inner = if i == 0 { 0.0 } else { r - 0.5 * dr };
        let outer = r + 0.5 * dr;
        rd.push((inner + outer) / (r * dr * dr) + l2 / (r * r));
        if i + 1 < nr {
            ro.push(-outer / ((r * grid.r(i + 1)).sqrt() * dr * dr));
        }
    }
    let zs = match z_sign {
        ZSign::Minus => 1.0,
        ZSign::Plus => -1.0,
    };
    let axial = (vec![2.0 * zs / (dz * dz); nz], vec![-zs / (dz * dz); nz - 1]);
    let h = 0.5 * dz;
    let mut potential = Vec::with_capacity(nr * nz);
    for i in 0..nr {
        for j in 0..nz {
            let (r, z) = (grid.r(i), grid.z(j));
            let d = (g(r, z + h)?.cos() - g(r, z - h)?.cos()) / (2.0 * h);
            potential.push(s as f64 * mass * d);
        }
    }
    Ok(CylOperator {
        grid,
        l,
        s,
        mass,
        z_sign,
        radial: (rd, ro),
        axial,
        potential,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorGround {
    pub e0: f64,
    pub converged: bool,
    pub info: SolverInfo,
}

/// Smallest eigenvalue of `L_s(G, ℓ)`.
pub fn sector_ground(op: &CylOperator, opts: &SolverOptions) -> Result<SectorGround> {
    let pre = op.preconditioner();
    let (e0, _, info) = smallest(op, pre.as_ref(), opts)?;
    Ok(SectorGround {
        e0,
        converged: info.converged,
        info,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub eigenvalue: f64,
    pub k3_mean: f64,
    pub k3_variance: f64,
    /// `None` for mixed states.
    pub label: Option<SectorLabel>,
}

/// Labels eigenvectors by `K₃` after rediagonalizing `K₃` inside clusters of
/// eigenvalues closer than `cluster_width`.
pub fn classify_by_k3(
    values: &[f64],
    vectors: &[Vec<C64>],
    k3: &K3Operator,
    signs: &[(i8, i8)],
    cluster_width: f64,
    variance_tol: f64,
) -> Vec<Classification> {
    let m = k3.m();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut out = Vec::with_capacity(values.len());
    let mut start = 0;
    for cluster in clusters(&sorted, cluster_width) {
        let idx: Vec<usize> = order[start..start + cluster.len()].to_vec();
        start += cluster.len();
        let basis: Vec<&Vec<C64>> = idx.iter().map(|&i| &vectors[i]).collect();
        let kb: Vec<Vec<C64>> = basis.iter().map(|v| k3.apply(v)).collect();
        let k = basis.len();
        let g = CMatrix::from_fn(k, k, |a, b| dot(basis[a], &kb[b]));
        let (_, c) = dense_hermitian(&g);
        for col in 0..k {
            let mut v = vec![ZERO; basis[0].len()];
            let mut kv = vec![ZERO; basis[0].len()];
            for a in 0..k {
                let w = c[(a, col)];
                for (i, x) in v.iter_mut().enumerate() {
                    *x += w * basis[a][i];
                }
                for (i, x) in kv.iter_mut().enumerate() {
                    *x += w * kb[a][i];
                }
            }
            let nn = dot(&v, &v).re;
            let mean = dot(&v, &kv).re / nn;
            let var = (dot(&kv, &kv).re / nn - mean * mean).max(0.0);
            let label = (var <= variance_tol).then(|| dominant_label(&v, signs, mean, m));
            out.push(Classification {
                eigenvalue: values[idx[col.min(k - 1)]],
                k3_mean: mean,
                k3_variance: var,
                label,
            });
        }
    }
    out
}

/// Signs of the diagonals of `Σ₃ ⊗ I` and `I ⊗ T₃` per internal component.
pub fn spin_iso_signs(alg: &DiracAlgebra, triple: &crate::algebra::IsoSpinTriple) -> Vec<(i8, i8)> {
    let idk = triple.identity();
    let s = crate::algebra::kron(&alg.sigma3(), &idk);
    let t = crate::algebra::kron(&crate::algebra::identity(4), &triple.t[2]);
    (0..s.nrows())
        .map(|c| {
            let sign = |v: f64| if v >= 0.0 { 1 } else { -1 };
            (sign(s[(c, c)].re), sign(t[(c, c)].re))
        })
        .collect()
}

/// `(s, t)` from the heaviest spin–iso-spin component, `ℓ` from `κ`.
fn dominant_label(v: &[C64], signs: &[(i8, i8)], kappa: f64, m: i32) -> SectorLabel {
    let d = signs.len();
    let mut weight = [[0.0; 2]; 2];
    for (i, x) in v.iter().enumerate() {
        let (s, t) = signs[i % d];
        weight[(s < 0) as usize][(t < 0) as usize] += x.norm_sqr();
    }
    let mut best = (-1.0, 1i8, 1i8);
    for (si, s) in [1i8, -1].into_iter().enumerate() {
        for (ti, t) in [1i8, -1].into_iter().enumerate() {
            if weight[si][ti] > best.0 {
                best = (weight[si][ti], s, t);
            }
        }
    }
    let (_, s, t) = best;
    let l = (kappa - 0.5 * s as f64 - 0.5 * (m * t as i32) as f64).round() as i32;
    SectorLabel::new(l, s, t, m).expect("s, t are ±1")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorBlock {
    pub kappa_mod4: f64,
    pub dim: usize,
    pub gap_eigenvalues: Vec<f64>,
    pub max_k3_variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorEquivalenceReport {
    pub n: usize,
    pub m: i32,
    pub blocks: Vec<SectorBlock>,
    /// Largest matrix element of `H` between different quarter-turn sectors.
    pub off_block_residual: f64,
    /// Largest difference between the sorted union of block spectra and the
    /// full dense spectrum (`None` above the full-dense size limit).
    pub union_mismatch: Option<f64>,
    /// Largest `K₃` variance over gap eigenvectors, a discretization measure.
    pub max_gap_k3_variance: f64,
    pub passed: bool,
}

/// Dense check that `H` splits into the four `K₃ mod 4` sectors with an
/// exactly block-diagonal structure.
pub fn sector_equivalence_check(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    m: i32,
    tol: f64,
) -> Result<SectorEquivalenceReport> {
    let n = grid.n();
    if n > 9 {
        return Err(invalid("n", "dense sector check needs n ≤ 9"));
    }
    let h = assemble_h(grid, mf, alg)?;
    let rot = QuarterTurn::new(grid.spec, alg, &mf.triple, m)?;
    let off = rot.off_block_residual(&h);
    let k3 = assemble_k3(grid, alg, &mf.triple, m);
    let gm = h.gap_mass();
    let mut blocks = Vec::new();
    let mut union = Vec::new();
    let mut max_var: f64 = 0.0;
    for kappa in rot.sector_values() {
        let (vals, vecs) = dense_sector_eigenpairs(&h, &rot, kappa);
        let mut block_var: f64 = 0.0;
        let mut gap = Vec::new();
        for (l, v) in vals.iter().zip(&vecs) {
            if l.abs() < gm {
                let kv = k3.apply(v);
                let nn = dot(v, v).re;
                let mean = dot(v, &kv).re / nn;
                let var = (dot(&kv, &kv).re / nn - mean * mean).max(0.0);
                block_var = block_var.max(var);
                gap.push(*l);
            }
        }
        max_var = max_var.max(block_var);
        union.extend_from_slice(&vals);
        blocks.push(SectorBlock {
            kappa_mod4: kappa,
            dim: vals.len(),
            gap_eigenvalues: gap,
            max_k3_variance: block_var,
        });
    }
    union.sort_by(f64::total_cmp);
    let union_mismatch = if n <= 7 {
        let full = dense_hermitian_values(&to_dense(&h));
        Some(
            full.iter()
                .zip(&union)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let passed = off <= tol && union_mismatch.is_none_or(|u| u <= tol) && union.len() == h.dim();
    Ok(SectorEquivalenceReport {
        n,
        m,
        blocks,
        off_block_residual: off,
        union_mismatch,
        max_gap_k3_variance: max_var,
        passed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorScanEntry {
    pub l: i32,
    pub s: i8,
    pub t: i8,
    pub eps: f64,
    pub e0: f64,
    pub converged: bool,
}

/// `𝓔₀(L_s(G_ε, ℓ))` with `G_ε(r, z) = G(εr, εz)` and mass `M/ε`.
pub fn sector_epsilon_scan(
    g: &dyn Fn(f64, f64) -> Result<f64>,
    label: (i32, i8, i8),
    mass: f64,
    eps_list: &[f64],
    grid: CylGrid,
    opts: &SolverOptions,
) -> Result<Vec<SectorScanEntry>> {
    let (l, s, t) = label;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(invalid("eps", "must be positive"));
            }
            let ge = |r: f64, z: f64| g(eps * r, eps * z);
            let op = assemble_ls(&ge, l, s, mass / eps, grid, ZSign::Minus)?;
            let res = sector_ground(&op, opts)?;
            Ok(SectorScanEntry {
                l,
                s,
                t,
                eps,
                e0: res.e0,
                converged: res.converged,
            })
        })
        .collect()
}

/// `‖ψ‖`-normalized `K₃` variance of a single state.
pub fn k3_variance(k3: &K3Operator, psi: &[C64]) -> (f64, f64) {
    let kv = k3.apply(psi);
    let nn = norm(psi).powi(2);
    let mean = dot(psi, &kv).re / nn;
    ((dot(&kv, &kv).re / nn - mean * mean).max(0.0), mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{pauli_triple, weyl_matrices};
    use crate::field::{Direction, ProfileConfig};
    use crate::grid::GridSpec;
    use crate::linalg::random_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hedgehog(m: u32) -> MassField {
        MassField::new(
            ProfileConfig::exp_i(0.55),
            pauli_triple(),
            Direction::polar_hedgehog(m),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn label_lattice() {
        let a = SectorLabel::new(0, 1, 1, 1).unwrap();
        assert_eq!(a.k3_value, 1.0);
        let b = SectorLabel::new(2, -1, 1, 2).unwrap();
        assert_eq!(b.k3_value, 2.5);
        assert!(b.is_consistent(2) && !b.is_consistent(1));
        assert!(SectorLabel::new(0, 0, 1, 1).is_err());
    }

    #[test]
    fn cylinder_grid_has_no_axis_node() {
        let g = CylGrid::new(5.0, 5.0, 10, 20).unwrap();
        assert!(g.r(0) > 0.0);
        assert!((0..g.n_r).all(|i| g.weight(i) > 0.0));
    }

    #[test]
    fn ls_symmetric_in_weighted_product() {
        let mf = hedgehog(1);
        let g = profile_as_g(&mf);
        let grid = CylGrid::new(6.0, 6.0, 30, 60).unwrap();
        let op = assemble_ls(&g, 2, 1, 1.0, grid, ZSign::Minus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_vector(op.dim(), &mut rng);
        let h = random_vector(op.dim(), &mut rng);
        let w = |a: &[C64], b: &[C64]| -> C64 {
            (0..a.len())
                .map(|k| a[k].conj() * b[k] * grid.weight(k / grid.n_z))
                .sum()
        };
        let lhs = w(&f, &op.apply_weighted(&h));
        let rhs = w(&op.apply_weighted(&f), &h);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn ls_even_in_l() {
        let mf = hedgehog(1);
        let g = profile_as_g(&mf);
        let grid = CylGrid::new(6.0, 6.0, 12, 24).unwrap();
        let a = assemble_ls(&g, 3, -1, 1.0, grid, ZSign::Minus).unwrap();
        let b = assemble_ls(&g, -3, -1, 1.0, grid, ZSign::Minus).unwrap();
        assert_eq!(a.to_dense_real(), b.to_dense_real());
    }

    #[test]
    fn free_ground_energy_decreases_towards_zero() {
        let zero = |_: f64, _: f64| Ok(0.0);
        let mut last = f64::INFINITY;
        for size in [4.0, 8.0, 16.0] {
            let grid = CylGrid::new(size, size, 40, 80).unwrap();
            let op = assemble_ls(&zero, 0, 1, 1.0, grid, ZSign::Minus).unwrap();
            let e = sector_ground(&op, &SolverOptions::default()).unwrap();
            assert!(e.converged);
            assert!(e.e0 > 0.0 && e.e0 < last);
            last = e.e0;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn sector_ground_matches_dense_and_is_monotone_in_l() {
        let mf = hedgehog(1);
        let g = profile_as_g(&mf);
        let grid = CylGrid::new(5.0, 5.0, 16, 32).unwrap();
        let mut last = f64::NEG_INFINITY;
        for l in 0..4 {
            let op = assemble_ls(&g, l, 1, 4.0, grid, ZSign::Minus).unwrap();
            let e = sector_ground(&op, &SolverOptions::default()).unwrap();
            let dense = SymmetricEigen::new(op.to_dense_real()).eigenvalues.min();
            assert!((e.e0 - dense).abs() < 1e-8, "{} vs {dense}", e.e0);
            assert!(e.e0 > last);
            last = e.e0;
        }
    }

    #[test]
    fn plus_sign_is_unbounded_below() {
        let zero = |_: f64, _: f64| Ok(0.0);
        let coarse = CylGrid::new(4.0, 4.0, 10, 20).unwrap();
        let fine = CylGrid::new(4.0, 4.0, 10, 40).unwrap();
        let low = |g| {
            let op = assemble_ls(&zero, 0, 1, 1.0, g, ZSign::Plus).unwrap();
            SymmetricEigen::new(op.to_dense_real()).eigenvalues.min()
        };
        assert!(low(coarse) < 0.0);
        assert!(low(fine) < 3.0 * low(coarse));
    }

    #[test]
    fn constructed_state_gets_its_label() {
        let spec = GridSpec::new(10.0, 31).unwrap();
        let grid = Arc::new(SpectralGrid::new(spec).unwrap());
        let alg = weyl_matrices();
        let k3 = assemble_k3(&grid, &alg, &pauli_triple(), 1);
        let signs = spin_iso_signs(&alg, &pauli_triple());
        let mut psi = vec![ZERO; k3.dim()];
        for p in 0..spec.nodes() {
            let x = spec.position(p);
            psi[p * 8] = C64::new((-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp(), 0.0);
        }
        let c = classify_by_k3(&[0.0], &[psi], &k3, &signs, 1e-6, 1e-8);
        assert!(c[0].k3_variance < 1e-8);
        assert_eq!(c[0].label.unwrap(), SectorLabel::new(0, 1, 1, 1).unwrap());
    }

    #[test]
    fn degenerate_cluster_is_rediagonalized() {
        // Two K₃ eigenstates with different κ, mixed inside one degenerate cluster.
        let spec = GridSpec::new(10.0, 31).unwrap();
        let grid = Arc::new(SpectralGrid::new(spec).unwrap());
        let alg = weyl_matrices();
        let k3 = assemble_k3(&grid, &alg, &pauli_triple(), 1);
        let signs = spin_iso_signs(&alg, &pauli_triple());
        let mut a = vec![ZERO; k3.dim()];
        let mut b = vec![ZERO; k3.dim()];
        for p in 0..spec.nodes() {
            let x = spec.position(p);
            let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp();
            a[p * 8] = C64::new(g, 0.0);
            b[p * 8 + 3] = C64::new(g, 0.0);
        }
        let na = norm(&a);
        let s = std::f64::consts::FRAC_1_SQRT_2 / na;
        let u: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x + y) * s).collect();
        let v: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x - y) * s).collect();
        let c = classify_by_k3(&[0.5, 0.5], &[u, v], &k3, &signs, 1e-6, 1e-8);
        let mut kappas: Vec<f64> = c.iter().map(|c| c.label.unwrap().k3_value).collect();
        kappas.sort_by(f64::total_cmp);
        assert_eq!(kappas, vec![-1.0, 1.0]);
    }

    #[test]
    fn sector_equivalence_free_and_hedgehog() {
        let alg = weyl_matrices();
        let grid = Arc::new(SpectralGrid::new(GridSpec::new(3.0, 5).unwrap()).unwrap());
        let free = MassField::new(
            ProfileConfig::zero(),
            pauli_triple(),
            Direction::constant([0.0, 0.0, 1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let r = sector_equivalence_check(&grid, &free, &alg, 0, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        let r = sector_equivalence_check(&grid, &hedgehog(1), &alg, 1, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        let r = sector_equivalence_check(&grid, &hedgehog(2), &alg, 2, 1e-10).unwrap();
        assert!(r.passed);
        assert!(r.blocks.iter().all(|b| b.kappa_mod4.fract() == 0.5));
    }
}
