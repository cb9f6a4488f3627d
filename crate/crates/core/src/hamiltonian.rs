//! Matrix-free discretized operators: `H`, `H_ε`, `H(B)`, `Γ̂`, `X_F`, `K₃`, and
//! the residuals of the operator identities they satisfy.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{identity, kron, CMatrix, DiracAlgebra, IsoSpinTriple, XiOperator, C64, I, ZERO};
use crate::error::{invalid, CqsmError, Result};
use crate::field::MassField;
use crate::grid::{GridSpec, SpectralGrid};
use crate::linalg::{norm, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    H,
    HEps { eps: f64 },
    HB,
    Gamma,
    XF,
    XFInverse,
    K3 { m: i32 },
}

/// Per-node `d×d` matrices (row-major), or one matrix shared by all nodes.
#[derive(Debug, Clone)]
pub enum PointwiseTable {
    Constant { d: usize, mat: Vec<C64> },
    PerNode { d: usize, mats: Vec<C64> },
}

impl PointwiseTable {
    pub fn constant(m: &CMatrix) -> Self {
        let d = m.nrows();
        PointwiseTable::Constant {
            d,
            mat: row_major(m),
        }
    }

    /// Evaluates `f` at every node; failures are reported with the node.
    pub fn build(
        grid: &GridSpec,
        d: usize,
        f: impl Fn([f64; 3]) -> Result<CMatrix>,
    ) -> Result<Self> {
        let mut mats = Vec::with_capacity(grid.nodes() * d * d);
        for node in 0..grid.nodes() {
            let x = grid.position(node);
            let m = f(x).map_err(|e| CqsmError::Assembly {
                node,
                x,
                source: Box::new(e),
            })?;
            if m.nrows() != d || m.ncols() != d {
                return Err(CqsmError::DimensionMismatch {
                    expected: d,
                    got: m.nrows(),
                });
            }
            mats.extend(row_major(&m));
        }
        Ok(PointwiseTable::PerNode { d, mats })
    }

    pub fn d(&self) -> usize {
        match self {
            PointwiseTable::Constant { d, .. } | PointwiseTable::PerNode { d, .. } => *d,
        }
    }

    pub fn at(&self, node: usize) -> &[C64] {
        match self {
            PointwiseTable::Constant { mat, .. } => mat,
            PointwiseTable::PerNode { d, mats } => &mats[node * d * d..(node + 1) * d * d],
        }
    }

    pub fn matrix_at(&self, node: usize) -> CMatrix {
        let d = self.d();
        CMatrix::from_row_slice(d, d, self.at(node))
    }

    /// `y ← y + P(x)·x` node by node.
    pub fn apply_add(&self, x: &[C64], y: &mut [C64]) {
        let d = self.d();
        for (node, (xc, yc)) in x.chunks(d).zip(y.chunks_mut(d)).enumerate() {
            let m = self.at(node);
            for (i, yi) in yc.iter_mut().enumerate() {
                let row = &m[i * d..(i + 1) * d];
                let mut s = ZERO;
                for (a, b) in row.iter().zip(xc) {
                    s += a * b;
                }
                *yi += s;
            }
        }
    }
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// `α·k` on `ℂ⁴ ⊗ 𝒦`, with `α_j` stored as 4×4 arrays.
#[derive(Debug, Clone)]
struct KineticSymbol {
    alpha: [[[C64; 4]; 4]; 3],
    dim_k: usize,
}

impl KineticSymbol {
    fn new(alg: &DiracAlgebra, dim_k: usize) -> Self {
        let alpha = [0, 1, 2].map(|j| {
            let mut a = [[ZERO; 4]; 4];
            for (r, row) in a.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = alg.alpha[j][(r, c)];
                }
            }
            a
        });
        Self { alpha, dim_k }
    }

    fn apply(&self, k: [f64; 3], v: &mut [C64]) {
        let mut a = [[ZERO; 4]; 4];
        for (j, kj) in k.iter().enumerate() {
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += self.alpha[j][r][c] * kj;
                }
            }
        }
        let dk = self.dim_k;
        let mut out = [ZERO; 4];
        for iso in 0..dk {
            for (r, o) in out.iter_mut().enumerate() {
                *o = (0..4).map(|c| a[r][c] * v[c * dk + iso]).sum();
            }
            for (r, o) in out.iter().enumerate() {
                v[r * dk + iso] = *o;
            }
        }
    }
}

/// `−iα·∇ ⊗ I + P(x)` with spectral derivatives and a pointwise term `P`.
#[derive(Debug, Clone)]
pub struct DiracOperator {
    grid: Arc<SpectralGrid>,
    kind: OperatorKind,
    kinetic: KineticSymbol,
    table: PointwiseTable,
    /// Mass scale of the gap: `M` for `H` and `H(B)`, `M/ε` for `H_ε`.
    gap_mass: f64,
}

impl DiracOperator {
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn internal_dim(&self) -> usize {
        self.table.d()
    }

    pub fn dim_k(&self) -> usize {
        self.kinetic.dim_k
    }

    /// Half-width of the spectral gap `(−M, M)` (or `(−M/ε, M/ε)`).
    pub fn gap_mass(&self) -> f64 {
        self.gap_mass
    }

    pub fn pointwise(&self) -> &PointwiseTable {
        &self.table
    }

    /// Only the kinetic part `−iα·∇ ⊗ I`.
    pub fn apply_kinetic(&self, x: &[C64]) -> Vec<C64> {
        let mut y = x.to_vec();
        let d = self.internal_dim();
        self.grid
            .apply_multiplier(&mut y, d, |k, v| self.kinetic.apply(k, v));
        y
    }
}

impl LinearOperator for DiracOperator {
    fn dim(&self) -> usize {
        self.grid.nodes() * self.internal_dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let k = self.apply_kinetic(x);
        y.copy_from_slice(&k);
        self.table.apply_add(x, y);
    }
}

/// A purely pointwise operator such as `Γ̂` or `X_F`.
#[derive(Debug, Clone)]
pub struct PointwiseOperator {
    nodes: usize,
    kind: OperatorKind,
    table: PointwiseTable,
}

impl PointwiseOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn table(&self) -> &PointwiseTable {
        &self.table
    }
}

impl LinearOperator for PointwiseOperator {
    fn dim(&self) -> usize {
        self.nodes * self.table.d()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        self.table.apply_add(x, y);
    }
}

fn check_grid(grid: &SpectralGrid, mf: &MassField) -> Result<()> {
    if mf.dim_k() == 0 {
        return Err(invalid("triple", "empty iso-spin space"));
    }
    grid.spec.validate()
}

/// `H = −iα·∇ ⊗ I + M(β ⊗ I)U_F`.
pub fn assemble_h(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
) -> Result<DiracOperator> {
    check_grid(grid, mf)?;
    let d = mf.internal_dim();
    let beta = kron(&alg.beta, &mf.triple.identity());
    let m = C64::new(mf.mass, 0.0);
    let table = PointwiseTable::build(&grid.spec, d, |x| Ok(&beta * mf.eval_uf(alg, x)? * m))?;
    Ok(DiracOperator {
        grid: grid.clone(),
        kind: if mf.dilation() == 1.0 {
            OperatorKind::H
        } else {
            OperatorKind::HEps {
                eps: mf.dilation(),
            }
        },
        kinetic: KineticSymbol::new(alg, mf.dim_k()),
        table,
        gap_mass: mf.mass,
    })
}

/// `H_ε = −iα·∇ + (1/ε)M(β ⊗ I)U_{F_ε}` with `F_ε(x) = F(εx)`.
pub fn assemble_h_eps(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    eps: f64,
) -> Result<DiracOperator> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("eps", "must be positive"));
    }
    let mut scaled = mf.dilated(eps)?;
    scaled.mass = mf.mass / eps;
    let mut op = assemble_h(grid, &scaled, alg)?;
    op.kind = OperatorKind::HEps { eps };
    Ok(op)
}

/// `H(B) = −iα·∇ + Mβ − Σ_j diag(σ_j, σ_j) ⊗ B_j` with `B_j = ½(D_jF)·T` for a
/// constant direction `T`.
pub fn assemble_hb(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
) -> Result<DiracOperator> {
    check_grid(grid, mf)?;
    if !mf.direction.is_constant() {
        return Err(CqsmError::Unsupported(
            "H(B) requires a constant iso-vector direction".into(),
        ));
    }
    let d = mf.internal_dim();
    let idk = mf.triple.identity();
    let beta = kron(&alg.beta, &idk) * C64::new(mf.mass, 0.0);
    let spin = [0, 1, 2].map(|j| alg.spin_block(j));
    let table = PointwiseTable::build(&grid.spec, d, |x| {
        let t = mf.eval_t(x)?;
        let g = mf.profile_grad(x)?;
        let mut m = beta.clone();
        for j in 0..3 {
            m -= kron(&spin[j], &t) * C64::new(0.5 * g[j], 0.0);
        }
        Ok(m)
    })?;
    Ok(DiracOperator {
        grid: grid.clone(),
        kind: OperatorKind::HB,
        kinetic: KineticSymbol::new(alg, mf.dim_k()),
        table,
        gap_mass: mf.mass,
    })
}

/// The constant grading `Γ̂ = iγ₅β ⊗ ξ` on the grid.
pub fn assemble_gamma(grid: &GridSpec, alg: &DiracAlgebra, xi: &XiOperator) -> PointwiseOperator {
    PointwiseOperator {
        nodes: grid.nodes(),
        kind: OperatorKind::Gamma,
        table: PointwiseTable::constant(&crate::algebra::grading_matrix(alg, xi)),
    }
}

/// `exp(iθA)` for Hermitian `A`.
fn expi_hermitian(a: &CMatrix, theta: f64) -> CMatrix {
    let eig = a.clone().symmetric_eigen();
    let phases = eig
        .eigenvalues
        .map(|l| C64::new(0.0, theta * l).exp());
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// `X_F(x) = ½(1+γ₅) ⊗ exp(iF T/2) + ½(1−γ₅) ⊗ exp(−iF T/2)`.
pub fn xf_matrix(mf: &MassField, alg: &DiracAlgebra, x: [f64; 3]) -> Result<CMatrix> {
    let f = mf.profile_at(x)?;
    let t = mf.eval_t(x)?;
    let id4 = identity(4);
    let half = C64::new(0.5, 0.0);
    let p_plus = (&id4 + &alg.gamma5) * half;
    let p_minus = (&id4 - &alg.gamma5) * half;
    Ok(kron(&p_plus, &expi_hermitian(&t, f / 2.0)) + kron(&p_minus, &expi_hermitian(&t, -f / 2.0)))
}

/// `X_F` (or `X_F⁻¹ = X_F*`) as a pointwise operator.
pub fn assemble_xf(
    grid: &GridSpec,
    mf: &MassField,
    alg: &DiracAlgebra,
    inverse: bool,
) -> Result<PointwiseOperator> {
    let table = PointwiseTable::build(grid, mf.internal_dim(), |x| {
        let m = xf_matrix(mf, alg, x)?;
        Ok(if inverse { m.adjoint() } else { m })
    })?;
    Ok(PointwiseOperator {
        nodes: grid.nodes(),
        kind: if inverse {
            OperatorKind::XFInverse
        } else {
            OperatorKind::XF
        },
        table,
    })
}

/// Pointwise application of `X_F`.
pub fn apply_xf(
    grid: &GridSpec,
    mf: &MassField,
    alg: &DiracAlgebra,
    psi: &[C64],
) -> Result<Vec<C64>> {
    Ok(assemble_xf(grid, mf, alg, false)?.apply(psi))
}

/// `K₃ = L₃ ⊗ I + ½Σ₃ ⊗ I + (m/2) I ⊗ T₃` with `L₃ = −i(x₁D₂ − x₂D₁)`.
///
/// On the tensor grid `x₁` and `D₂` act on different axes and commute, so
/// `x₁D₂ = D₂x₁` and `L₃` is Hermitian without symmetrization.
#[derive(Debug, Clone)]
pub struct K3Operator {
    grid: Arc<SpectralGrid>,
    m: i32,
    spin_iso: PointwiseTable,
}

impl K3Operator {
    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn internal_dim(&self) -> usize {
        self.spin_iso.d()
    }

    /// The `4·dim 𝒦` matrix `½Σ₃ ⊗ I + (m/2) I ⊗ T₃`.
    pub fn spin_iso_matrix(&self) -> CMatrix {
        self.spin_iso.matrix_at(0)
    }

    /// `L₃ψ` alone.
    pub fn apply_orbital(&self, x: &[C64]) -> Vec<C64> {
        let d = self.internal_dim();
        let spec = &self.grid.spec;
        let mut hat = x.to_vec();
        self.grid.fft3(&mut hat, d, false);
        let deriv = |axis: usize| {
            let mut v = hat.clone();
            for (node, chunk) in v.chunks_mut(d).enumerate() {
                let f = C64::new(0.0, self.grid.wavevector(node)[axis]);
                chunk.iter_mut().for_each(|z| *z *= f);
            }
            self.grid.fft3(&mut v, d, true);
            v
        };
        let d1 = deriv(0);
        let d2 = deriv(1);
        let mut out = vec![ZERO; x.len()];
        for node in 0..spec.nodes() {
            let p = spec.position(node);
            for c in 0..d {
                let i = node * d + c;
                out[i] = -I * (d2[i] * p[0] - d1[i] * p[1]);
            }
        }
        out
    }
}

impl LinearOperator for K3Operator {
    fn dim(&self) -> usize {
        self.grid.nodes() * self.internal_dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let l = self.apply_orbital(x);
        y.copy_from_slice(&l);
        self.spin_iso.apply_add(x, y);
    }
}

pub fn assemble_k3(
    grid: &Arc<SpectralGrid>,
    alg: &DiracAlgebra,
    triple: &IsoSpinTriple,
    m: i32,
) -> K3Operator {
    let idk = triple.identity();
    let s = kron(&alg.sigma3(), &idk) * C64::new(0.5, 0.0)
        + kron(&identity(4), &triple.t[2]) * C64::new(0.5 * m as f64, 0.0);
    K3Operator {
        grid: grid.clone(),
        m,
        spin_iso: PointwiseTable::constant(&s),
    }
}

fn pointwise_apply(m: &CMatrix, d: usize, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; x.len()];
    PointwiseTable::Constant { d, mat: row_major(m) }.apply_add(x, &mut y);
    y
}

/// `‖[γ₅ ⊗ I, H]ψ − 2(γ₅β ⊗ I)·M U_F ψ‖ / ‖ψ‖`, with `U_F` re-evaluated from the
/// mass field.
pub fn chiral_commutator_residual(
    op: &DiracOperator,
    mf: &MassField,
    alg: &DiracAlgebra,
    psi: &[C64],
) -> Result<f64> {
    let d = op.internal_dim();
    let idk = mf.triple.identity();
    let g5 = kron(&alg.gamma5, &idk);
    let g5b = kron(&(&alg.gamma5 * &alg.beta), &idk) * C64::new(2.0 * mf.mass, 0.0);
    let comm = crate::linalg::sub(
        &pointwise_apply(&g5, d, &op.apply(psi)),
        &op.apply(&pointwise_apply(&g5, d, psi)),
    );
    let uf = PointwiseTable::build(&op.grid.spec, d, |x| Ok(&g5b * mf.eval_uf(alg, x)?))?;
    let mut rhs = vec![ZERO; psi.len()];
    uf.apply_add(psi, &mut rhs);
    Ok(norm(&crate::linalg::sub(&comm, &rhs)) / norm(psi))
}

/// `‖{Γ̂, H}ψ‖ / ‖ψ‖`.
pub fn susy_residual<A: LinearOperator, G: LinearOperator>(h: &A, gamma: &G, psi: &[C64]) -> f64 {
    let a = h.apply(&gamma.apply(psi));
    let b = gamma.apply(&h.apply(psi));
    norm(&crate::linalg::add(&a, &b)) / norm(psi)
}

/// `‖[A, B]ψ‖ / ‖ψ‖`.
pub fn commutator_residual<A: LinearOperator, B: LinearOperator>(a: &A, b: &B, psi: &[C64]) -> f64 {
    let ab = a.apply(&b.apply(psi));
    let ba = b.apply(&a.apply(psi));
    norm(&crate::linalg::sub(&ab, &ba)) / norm(psi)
}

/// `‖[H_ε, K₃]ψ‖ / ‖ψ‖`.
pub fn k3_commutator_residual(op: &DiracOperator, k3: &K3Operator, psi: &[C64]) -> f64 {
    commutator_residual(op, k3, psi)
}

/// Sign convention for the first-order term of the `H²` identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HSquaredSign {
    /// `H² = −Δ + M² + iM(β ⊗ I)(α·∇U_F)`, which follows from expanding `H·H`.
    Derived,
    /// The opposite sign, `−iM(β ⊗ I)(α·∇U_F)`.
    Flipped,
}

/// `‖H(Hψ) − [(−Δ + M²)ψ ± iM(β ⊗ I)(α·∇U_F)ψ + M² sin²F ⊗ (T² − I)ψ]‖ / ‖ψ‖`
/// with `∇U_F` obtained by spectral differentiation of the node-wise `U_F` table.
pub fn h_squared_residual(
    op: &DiracOperator,
    mf: &MassField,
    alg: &DiracAlgebra,
    psi: &[C64],
    sign: HSquaredSign,
) -> Result<f64> {
    let grid = op.grid();
    let d = op.internal_dim();
    let dd = d * d;
    let uf = PointwiseTable::build(&grid.spec, d, |x| mf.eval_uf(alg, x))?;
    let flat: Vec<C64> = (0..grid.nodes()).flat_map(|p| uf.at(p).to_vec()).collect();
    let grad = grid.gradient(&flat, dd)?;
    let idk = mf.triple.identity();
    let s = match sign {
        HSquaredSign::Derived => I,
        HSquaredSign::Flipped => -I,
    } * mf.mass;
    let ba = [0, 1, 2].map(|j| kron(&(&alg.beta * &alg.alpha[j]), &idk) * s);
    let mut first = vec![ZERO; psi.len()];
    for node in 0..grid.nodes() {
        let mut m = CMatrix::zeros(d, d);
        for j in 0..3 {
            let du = CMatrix::from_row_slice(d, d, &grad[j][node * dd..(node + 1) * dd]);
            m += &ba[j] * du;
        }
        let xs = &psi[node * d..(node + 1) * d];
        for i in 0..d {
            first[node * d + i] = (0..d).map(|c| m[(i, c)] * xs[c]).sum();
        }
    }
    // M² sin²F ⊗ (T² − I), zero for Clifford triples.
    let dk = mf.dim_k();
    for node in 0..grid.nodes() {
        let x = grid.spec.position(node);
        let t = mf.eval_t(x)?;
        let excess = &t * &t - &idk;
        if crate::algebra::max_abs(&excess) == 0.0 {
            continue;
        }
        let c = mf.mass * mf.mass * mf.profile_at(x)?.sin().powi(2);
        for spin in 0..4 {
            for a in 0..dk {
                let i = node * d + spin * dk + a;
                first[i] += (0..dk)
                    .map(|b| excess[(a, b)] * psi[node * d + spin * dk + b] * c)
                    .sum::<C64>();
            }
        }
    }
    let lap = grid.neg_laplacian(psi, d)?;
    let hh = op.apply(&op.apply(psi));
    let m2 = mf.mass * mf.mass;
    let mut r = vec![ZERO; psi.len()];
    for i in 0..psi.len() {
        r[i] = hh[i] - (lap[i] + psi[i] * m2 + first[i]);
    }
    Ok(norm(&r) / norm(psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{max_abs, pauli_triple, weyl_matrices};
    use crate::field::{Direction, ProfileConfig};
    use crate::linalg::{random_vector, self_adjointness_defect, sub};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, l: f64) -> (Arc<SpectralGrid>, MassField, DiracAlgebra) {
        let grid = Arc::new(SpectralGrid::new(GridSpec::new(l, n).unwrap()).unwrap());
        let mf = MassField::new(
            ProfileConfig::exp_i(0.55),
            pauli_triple(),
            Direction::polar_hedgehog(1),
            1.0,
        )
        .unwrap();
        (grid, mf, weyl_matrices())
    }

    #[test]
    fn h_is_self_adjoint() {
        let (grid, mf, alg) = setup(9, 4.0);
        let h = assemble_h(&grid, &mf, &alg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_vector(h.dim(), &mut rng);
        let b = random_vector(h.dim(), &mut rng);
        assert!(self_adjointness_defect(&h, &a, &b) < 1e-12);
        assert!(h.apply(&vec![ZERO; h.dim()]).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn h_eps_at_one_equals_h() {
        let (grid, mf, alg) = setup(7, 4.0);
        let h = assemble_h(&grid, &mf, &alg).unwrap();
        let he = assemble_h_eps(&grid, &mf, &alg, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_vector(h.dim(), &mut rng);
        assert!(norm(&sub(&h.apply(&x), &he.apply(&x))) <= 1e-14 * norm(&x));
        assert!(assemble_h_eps(&grid, &mf, &alg, 0.0).is_err());
    }

    #[test]
    fn h_eps_mass_norm_scales() {
        let (grid, mf, alg) = setup(7, 4.0);
        let eps = 0.25;
        let he = assemble_h_eps(&grid, &mf, &alg, eps).unwrap();
        let node = 0;
        let m = he.pointwise().matrix_at(node);
        let sv = m.singular_values();
        let sup = sv.max();
        assert!((sup - mf.mass / eps).abs() <= 1e-12 * mf.mass / eps);
    }

    #[test]
    fn h_eps_keeps_direction_field() {
        let (_, mf, _) = setup(7, 4.0);
        let scaled = mf.dilated(0.5).unwrap();
        let x = [0.3, -0.8, 1.1];
        assert_eq!(scaled.eval_t(x).unwrap(), mf.eval_t(x).unwrap());
    }

    #[test]
    fn gamma_is_involution_on_grid() {
        let (grid, _, alg) = setup(7, 4.0);
        let xi = XiOperator::new(1.0, &pauli_triple()).unwrap();
        let g = assemble_gamma(&grid.spec, &alg, &xi);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vector(g.dim(), &mut rng);
        let gg = g.apply(&g.apply(&x));
        assert!(norm(&sub(&gg, &x)) <= 1e-12 * norm(&x));
    }

    #[test]
    fn xf_is_unitary_and_trivial_for_zero_profile() {
        let (grid, mf, alg) = setup(7, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_vector(grid.nodes() * 8, &mut rng);
        let y = apply_xf(&grid.spec, &mf, &alg, &x).unwrap();
        assert!((norm(&y) - norm(&x)).abs() <= 1e-12 * norm(&x));
        let inv = assemble_xf(&grid.spec, &mf, &alg, true).unwrap();
        assert!(norm(&sub(&inv.apply(&y), &x)) <= 1e-12 * norm(&x));
        let mut zero = mf.clone();
        zero.profile = ProfileConfig::zero();
        let z = apply_xf(&grid.spec, &zero, &alg, &x).unwrap();
        assert!(norm(&sub(&z, &x)) <= 1e-15 * norm(&x));
    }

    #[test]
    fn xf_matches_closed_form() {
        // For T² = I, X_F = cos(F/2) + i sin(F/2) γ₅ ⊗ T.
        let (_, mf, alg) = setup(7, 4.0);
        let x = [0.2, 0.4, -0.1];
        let f = mf.profile_at(x).unwrap();
        let closed = crate::field::uf_matrix(&alg, f / 2.0, &mf.eval_t(x).unwrap());
        assert!(max_abs(&(xf_matrix(&mf, &alg, x).unwrap() - closed)) < 1e-14);
    }

    #[test]
    fn hb_requires_constant_direction() {
        let (grid, mf, alg) = setup(7, 4.0);
        assert!(matches!(
            assemble_hb(&grid, &mf, &alg),
            Err(CqsmError::Unsupported(_))
        ));
    }

    #[test]
    fn k3_is_self_adjoint_and_acts_on_radial_states() {
        let (grid, _, alg) = setup(31, 10.0);
        let k3 = assemble_k3(&grid, &alg, &pauli_triple(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_vector(k3.dim(), &mut rng);
        let b = random_vector(k3.dim(), &mut rng);
        assert!(self_adjointness_defect(&k3, &a, &b) < 1e-12);
        // Radial Gaussian ⊗ spinor e₀ ⊗ T₃ = +1: eigenvalue 0 + ½ + ½.
        let mut psi = vec![ZERO; k3.dim()];
        for node in 0..grid.nodes() {
            let x = grid.spec.position(node);
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            psi[node * 8] = C64::new((-r2 / 4.0).exp(), 0.0);
        }
        let k = k3.apply(&psi);
        let r = norm(&sub(&k, &psi)) / norm(&psi);
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn assembly_error_names_node() {
        let grid = Arc::new(SpectralGrid::new(GridSpec::new(4.0, 7).unwrap()).unwrap());
        let table = crate::field::RadialTable::new(vec![1.0, 2.0], vec![-1.0, 0.0]).unwrap();
        let mf = MassField::new(
            ProfileConfig::new(crate::field::ProfileKind::CustomRadial { table }).unwrap(),
            pauli_triple(),
            Direction::polar_hedgehog(1),
            1.0,
        )
        .unwrap();
        match assemble_h(&grid, &mf, &weyl_matrices()) {
            Err(CqsmError::Assembly { source, .. }) => {
                assert!(matches!(*source, CqsmError::OutOfRange { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
