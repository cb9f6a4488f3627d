//! Hermitian eigensolvers: dense diagonalization and a preconditioned block
//! solver (LOBPCG) with hard locking for all eigenpairs below a threshold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{CMatrix, C64, ZERO};
use crate::error::{CqsmError, Result};
use crate::grid::SpectralGrid;
use crate::linalg::{axpy, dot, norm, random_vector, scale, LinearOperator};

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
pub fn dense_hermitian(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if m.is_empty() {
        return (vec![], CMatrix::zeros(m.nrows(), 0));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigenvalues only, ascending.
pub fn dense_hermitian_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return vec![];
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Fourier multiplier `(|k|² + c)⁻¹`, an approximate inverse of `−Δ + c`.
pub struct FourierPreconditioner<'a> {
    pub grid: &'a SpectralGrid,
    pub components: usize,
    pub shift: f64,
}

impl LinearOperator for FourierPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.grid.nodes() * self.components
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.grid.apply_multiplier(y, self.components, |k, v| {
            let f = 1.0 / (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + self.shift);
            v.iter_mut().for_each(|z| *z *= f);
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Residual tolerance `‖Ax − θx‖ ≤ tol·max(1, |θ|)`.
    pub tol: f64,
    pub block: usize,
    pub max_iter: usize,
    /// Upper bound on the number of pairs collected below the threshold.
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            block: 8,
            max_iter: 2000,
            max_pairs: 64,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub method: String,
    pub iterations: usize,
    pub matvecs: usize,
    pub rounds: usize,
    pub converged: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub info: SolverInfo,
}

struct Counter<'a, A: ?Sized> {
    op: &'a A,
    count: std::cell::Cell<usize>,
}

impl<A: LinearOperator + ?Sized> Counter<'_, A> {
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.count.set(self.count.get() + 1);
        self.op.apply(x)
    }
}

/// `B* C` for column blocks.
fn gram(b: &[Vec<C64>], c: &[Vec<C64>]) -> CMatrix {
    CMatrix::from_fn(b.len(), c.len(), |i, j| dot(&b[i], &c[j]))
}

/// `Σ_i blocks[i]·coef[i, j]` for each column `j` of `coef`.
fn combine(blocks: &[&Vec<C64>], coef: &CMatrix, cols: std::ops::Range<usize>) -> Vec<Vec<C64>> {
    let n = blocks.first().map_or(0, |v| v.len());
    cols.map(|j| {
        let mut out = vec![ZERO; n];
        for (i, b) in blocks.iter().enumerate() {
            let c = coef[(i, j)];
            if c != ZERO {
                axpy(c, b, &mut out);
            }
        }
        out
    })
    .collect()
}

/// Orthogonalizes `v` (and its image `av`, if tracked) against `basis` twice
/// and normalizes. Returns `false` if `v` was numerically dependent.
fn orthonormalize_against(
    v: &mut Vec<C64>,
    mut av: Option<&mut Vec<C64>>,
    basis: &[&Vec<C64>],
    abasis: Option<&[&Vec<C64>]>,
) -> bool {
    let n0 = norm(v);
    if n0 == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for (i, b) in basis.iter().enumerate() {
            let c = dot(b, v);
            axpy(-c, b, v);
            if let (Some(av), Some(ab)) = (av.as_deref_mut(), abasis) {
                axpy(-c, ab[i], av);
            }
        }
    }
    let n1 = norm(v);
    if n1 <= 1e-10 * n0 {
        return false;
    }
    let s = C64::new(1.0 / n1, 0.0);
    scale(s, v);
    if let Some(av) = av {
        scale(s, av);
    }
    true
}

/// Which Ritz columns a LOBPCG round must resolve before it stops.
#[derive(Debug, Clone, Copy)]
enum Target {
    /// Every non-guard column is either a converged pair below the threshold or
    /// certified to lie above it.
    Below(f64),
    /// The first `k` columns are converged.
    Leading(usize),
    /// Some Ritz value lies below the threshold.
    Certify(f64),
}

struct Round {
    theta: Vec<f64>,
    x: Vec<Vec<C64>>,
    converged: Vec<bool>,
    /// Some non-guard column is certified to lie above the threshold.
    certified_above: bool,
    finished: bool,
}

/// The `block` smallest eigenpairs of a Hermitian `a` in the orthogonal
/// complement of `locked`, by LOBPCG with optional preconditioner.
#[allow(clippy::too_many_arguments)]
fn lobpcg_round<A, P>(
    a: &Counter<'_, A>,
    precond: Option<&P>,
    locked: &[Vec<C64>],
    block: usize,
    target: Target,
    opts: &SolverOptions,
    rng: &mut ChaCha8Rng,
    iterations: &mut usize,
) -> Result<Round>
where
    A: LinearOperator + ?Sized,
    P: LinearOperator + ?Sized,
{
    let n = a.op.dim();
    let locked_refs: Vec<&Vec<C64>> = locked.iter().collect();
    let mut x: Vec<Vec<C64>> = Vec::new();
    while x.len() < block {
        let mut v = random_vector(n, rng);
        let mut basis = locked_refs.clone();
        basis.extend(x.iter());
        if orthonormalize_against(&mut v, None, &basis, None) {
            x.push(v);
        }
    }
    let mut ax: Vec<Vec<C64>> = x.iter().map(|v| a.apply(v)).collect();
    let mut p: Vec<Vec<C64>> = Vec::new();
    let mut ap: Vec<Vec<C64>> = Vec::new();
    let mut theta = vec![0.0; block];
    let mut conv = vec![false; block];
    let margin = |t: f64| opts.tol * t.abs().max(1.0);
    // Trailing columns converge slowest and are not required.
    let guard = if block > 1 { (block / 4).max(1) } else { 0 };
    let core = block - guard;

    for it in 0..opts.max_iter {
        *iterations += 1;
        let mut res = Vec::with_capacity(block);
        let mut rn = vec![0.0; block];
        for j in 0..block {
            theta[j] = dot(&x[j], &ax[j]).re;
            let mut r = ax[j].clone();
            axpy(C64::new(-theta[j], 0.0), &x[j], &mut r);
            rn[j] = norm(&r);
            conv[j] = rn[j] <= margin(theta[j]);
            res.push(r);
        }
        let (done, above) = match target {
            Target::Below(t) => {
                let above_ok =
                    |j: usize| theta[j] >= t && rn[j] <= 0.1 * (theta[j] - t) + margin(theta[j]);
                let done = (0..core).all(|j| (theta[j] < t && conv[j]) || above_ok(j));
                (done, (0..core).any(above_ok))
            }
            Target::Leading(k) => ((0..k.min(block)).all(|j| conv[j]), false),
            Target::Certify(t) => (theta.iter().any(|&v| v < t), false),
        };
        if done {
            // Confirm with fresh products to guard against drift in the tracked images.
            let mut ok = true;
            for j in 0..block {
                if conv[j] {
                    let fresh = a.apply(&x[j]);
                    let mut r = fresh.clone();
                    axpy(C64::new(-theta[j], 0.0), &x[j], &mut r);
                    if norm(&r) > margin(theta[j]) {
                        ok = false;
                        conv[j] = false;
                    }
                    ax[j] = fresh;
                }
            }
            if ok {
                return Ok(Round {
                    theta,
                    x,
                    converged: conv,
                    certified_above: above,
                    finished: true,
                });
            }
        }
        if it + 1 == opts.max_iter {
            break;
        }

        // Preconditioned residuals of the unconverged columns.
        let mut w: Vec<Vec<C64>> = Vec::new();
        for j in 0..block {
            if conv[j] {
                continue;
            }
            let mut v = match precond {
                Some(t) => t.apply(&res[j]),
                None => res[j].clone(),
            };
            let mut basis = locked_refs.clone();
            basis.extend(x.iter());
            basis.extend(w.iter());
            if orthonormalize_against(&mut v, None, &basis, None) {
                w.push(v);
            }
        }
        let aw: Vec<Vec<C64>> = w.iter().map(|v| a.apply(v)).collect();

        // Previous search directions, made orthonormal to [locked, X, W].
        let mut pk: Vec<Vec<C64>> = Vec::new();
        let mut apk: Vec<Vec<C64>> = Vec::new();
        for (mut v, mut av) in p.drain(..).zip(ap.drain(..)) {
            // Locked vectors are exact-ish eigenvectors, so A·y ≈ θ_y·y; their
            // components in P are already negligible, so only V is projected.
            for y in &locked_refs {
                let c = dot(y, &v);
                axpy(-c, y, &mut v);
            }
            let mut basis: Vec<&Vec<C64>> = x.iter().collect();
            basis.extend(w.iter());
            basis.extend(pk.iter());
            let mut abasis: Vec<&Vec<C64>> = ax.iter().collect();
            abasis.extend(aw.iter());
            abasis.extend(apk.iter());
            if orthonormalize_against(&mut v, Some(&mut av), &basis, Some(&abasis)) {
                pk.push(v);
                apk.push(av);
            }
        }

        let s: Vec<&Vec<C64>> = x.iter().chain(w.iter()).chain(pk.iter()).collect();
        let as_: Vec<&Vec<C64>> = ax.iter().chain(aw.iter()).chain(apk.iter()).collect();
        let s_owned: Vec<Vec<C64>> = s.iter().map(|v| (*v).clone()).collect();
        let as_owned: Vec<Vec<C64>> = as_.iter().map(|v| (*v).clone()).collect();
        let g = gram(&s_owned, &as_owned);
        let (_, c) = dense_hermitian(&g);
        let x_new = combine(&s, &c, 0..block);
        let ax_new = combine(&as_, &c, 0..block);
        // P = the W and P components of the new Ritz vectors.
        let mut c_p = c.columns(0, block).into_owned();
        for i in 0..block {
            for j in 0..block {
                c_p[(i, j)] = ZERO;
            }
        }
        p = combine(&s, &c_p, 0..block);
        ap = combine(&as_, &c_p, 0..block);
        x = x_new;
        ax = ax_new;
    }
    Ok(Round {
        theta,
        x,
        converged: conv,
        certified_above: false,
        finished: false,
    })
}

/// A lower bound on the number of eigenvalues of `a` below `threshold`.
///
/// LOBPCG runs until some Ritz value drops below `threshold` or `max_iter` is
/// spent. The count is taken from the compression of `a` to the
/// re-orthonormalized block with fresh products; by min–max it never exceeds
/// the true count, converged or not.
pub fn certify_below<A, P>(
    a: &A,
    precond: Option<&P>,
    threshold: f64,
    opts: &SolverOptions,
) -> Result<(usize, SolverInfo)>
where
    A: LinearOperator + ?Sized,
    P: LinearOperator + ?Sized,
{
    let counter = Counter {
        op: a,
        count: std::cell::Cell::new(0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut iterations = 0;
    let block = opts.block.min(a.dim()).max(1);
    let round = lobpcg_round(
        &counter,
        precond,
        &[],
        block,
        Target::Certify(threshold),
        opts,
        &mut rng,
        &mut iterations,
    )?;
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for mut v in round.x {
        let refs: Vec<&Vec<C64>> = basis.iter().collect();
        if orthonormalize_against(&mut v, None, &refs, None) {
            basis.push(v);
        }
    }
    let images: Vec<Vec<C64>> = basis.iter().map(|v| counter.apply(v)).collect();
    let vals = dense_hermitian_values(&gram(&basis, &images));
    let count = vals.iter().filter(|&&v| v < threshold).count();
    Ok((
        count,
        SolverInfo {
            method: "lobpcg-certify".into(),
            iterations,
            matvecs: counter.count.get(),
            rounds: 1,
            converged: round.finished,
            truncated: false,
        },
    ))
}

/// All eigenpairs of the Hermitian `a` with eigenvalue below `threshold`, by
/// repeated LOBPCG rounds with hard locking.
pub fn eigenpairs_below<A, P>(
    a: &A,
    precond: Option<&P>,
    threshold: f64,
    opts: &SolverOptions,
) -> Result<Eigenpairs>
where
    A: LinearOperator + ?Sized,
    P: LinearOperator + ?Sized,
{
    let n = a.dim();
    let counter = Counter {
        op: a,
        count: std::cell::Cell::new(0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values = Vec::new();
    let mut vectors: Vec<Vec<C64>> = Vec::new();
    let mut iterations = 0;
    let mut rounds = 0;
    let mut converged = true;
    let mut truncated = false;
    loop {
        let block = opts.block.min(n.saturating_sub(vectors.len()));
        if block == 0 {
            break;
        }
        rounds += 1;
        let round = lobpcg_round(
            &counter,
            precond,
            &vectors,
            block,
            Target::Below(threshold),
            opts,
            &mut rng,
            &mut iterations,
        )?;
        let before = vectors.len();
        for j in 0..block {
            if round.theta[j] < threshold && round.converged[j] {
                values.push(round.theta[j]);
                vectors.push(round.x[j].clone());
            }
        }
        if !round.finished {
            converged = false;
            break;
        }
        if round.certified_above {
            break;
        }
        if vectors.len() == before {
            converged = false;
            break;
        }
        if vectors.len() >= opts.max_pairs {
            truncated = true;
            break;
        }
    }
    let residuals: Vec<f64> = vectors
        .iter()
        .zip(&values)
        .map(|(v, &t)| {
            let mut r = a.apply(v);
            axpy(C64::new(-t, 0.0), v, &mut r);
            norm(&r)
        })
        .collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vectors: Vec<Vec<C64>> = order.iter().map(|&i| vectors[i].clone()).collect();
    let residuals: Vec<f64> = order.iter().map(|&i| residuals[i]).collect();
    Ok(Eigenpairs {
        values,
        vectors,
        residuals,
        info: SolverInfo {
            method: "lobpcg".into(),
            iterations,
            matvecs: counter.count.get(),
            rounds,
            converged,
            truncated,
        },
    })
}

/// Rayleigh–Ritz of `h` on the span of `basis` (assumed orthonormal): signed
/// eigenvalues, Ritz vectors and explicit residuals `‖hψ − λψ‖`.
pub fn rayleigh_ritz<A: LinearOperator + ?Sized>(
    h: &A,
    basis: &[Vec<C64>],
) -> (Vec<f64>, Vec<Vec<C64>>, Vec<f64>) {
    if basis.is_empty() {
        return (vec![], vec![], vec![]);
    }
    let hb: Vec<Vec<C64>> = basis.iter().map(|v| h.apply(v)).collect();
    let g = gram(basis, &hb);
    let (vals, c) = dense_hermitian(&g);
    let refs: Vec<&Vec<C64>> = basis.iter().collect();
    let hrefs: Vec<&Vec<C64>> = hb.iter().collect();
    let vecs = combine(&refs, &c, 0..basis.len());
    let hvecs = combine(&hrefs, &c, 0..basis.len());
    let res = vecs
        .iter()
        .zip(&hvecs)
        .zip(&vals)
        .map(|((v, hv), &l)| {
            let mut r = hv.clone();
            axpy(C64::new(-l, 0.0), v, &mut r);
            norm(&r) / norm(v)
        })
        .collect();
    (vals, vecs, res)
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn smallest<A, P>(a: &A, precond: Option<&P>, opts: &SolverOptions) -> Result<(f64, Vec<C64>, SolverInfo)>
where
    A: LinearOperator + ?Sized,
    P: LinearOperator + ?Sized,
{
    let counter = Counter {
        op: a,
        count: std::cell::Cell::new(0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut iterations = 0;
    let block = opts.block.min(a.dim()).max(1);
    let round = lobpcg_round(
        &counter,
        precond,
        &[],
        block,
        Target::Leading(1),
        opts,
        &mut rng,
        &mut iterations,
    )?;
    let info = SolverInfo {
        method: "lobpcg".into(),
        iterations,
        matvecs: counter.count.get(),
        rounds: 1,
        converged: round.converged[0],
        truncated: false,
    };
    if !round.converged[0] {
        return Err(CqsmError::NotConverged(format!(
            "smallest eigenvalue after {iterations} iterations"
        )));
    }
    let (theta, x) = (round.theta, round.x);
    Ok((theta[0], x[0].clone(), info))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_dense;

    fn test_matrix(n: usize) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |i, j| {
            let x = ((i * 7 + j * 13) % 17) as f64 / 17.0;
            C64::new(x, ((i + 2 * j) % 5) as f64 / 10.0)
        });
        let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..n {
            h[(i, i)] += C64::new(i as f64 * 0.3, 0.0);
        }
        h
    }

    #[test]
    fn dense_handles_empty_matrix() {
        let e = CMatrix::zeros(0, 0);
        assert!(dense_hermitian(&e).0.is_empty());
        assert!(dense_hermitian_values(&e).is_empty());
    }

    #[test]
    fn dense_matches_definition() {
        let h = test_matrix(30);
        let (vals, vecs) = dense_hermitian(&h);
        for (j, &l) in vals.iter().enumerate() {
            let v = vecs.column(j).into_owned();
            let r = &h * &v - &v * C64::new(l, 0.0);
            assert!(r.norm() < 1e-12);
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lobpcg_matches_dense_below_threshold() {
        let h = test_matrix(200);
        let vals = dense_hermitian_values(&h);
        let threshold = vals[13] + 0.5 * (vals[14] - vals[13]);
        let opts = SolverOptions {
            tol: 1e-10,
            block: 4,
            ..Default::default()
        };
        let res = eigenpairs_below::<_, CMatrix>(&h, None, threshold, &opts).unwrap();
        assert!(res.info.converged);
        assert_eq!(res.values.len(), 14);
        for (a, b) in res.values.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(to_dense(&h), h);
    }

    #[test]
    fn lobpcg_handles_degenerate_clusters() {
        let mut h = CMatrix::zeros(60, 60);
        for i in 0..60 {
            h[(i, i)] = C64::new(if i < 5 { 1.0 } else { 2.0 + i as f64 }, 0.0);
        }
        let res = eigenpairs_below::<_, CMatrix>(
            &h,
            None,
            1.5,
            &SolverOptions {
                tol: 1e-10,
                block: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.values.len(), 5);
        assert!(res.values.iter().all(|&v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn truncation_is_flagged() {
        let h = test_matrix(80);
        let res = eigenpairs_below::<_, CMatrix>(
            &h,
            None,
            1e9,
            &SolverOptions {
                block: 4,
                max_pairs: 8,
                tol: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.info.truncated);
    }

    #[test]
    fn certificate_never_overcounts() {
        let m = test_matrix(60);
        let vals = dense_hermitian_values(&m);
        for k in [0usize, 1, 3, 7] {
            let t = if k == 0 { vals[0] - 1.0 } else { 0.5 * (vals[k - 1] + vals[k]) };
            for max_iter in [1, 3, 50] {
                let opts = SolverOptions { max_iter, ..Default::default() };
                let (c, _) = certify_below::<_, CMatrix>(&m, None, t, &opts).unwrap();
                assert!(c <= k, "k={k} max_iter={max_iter} c={c}");
                if max_iter == 50 && k > 0 {
                    assert!(c >= 1);
                }
            }
        }
    }

    #[test]
    fn rayleigh_ritz_recovers_signed_values() {
        let h = test_matrix(40) - CMatrix::identity(40, 40) * C64::new(6.0, 0.0);
        let sq = &h * &h;
        let vals = dense_hermitian_values(&h);
        let min_sq = vals.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        let res = eigenpairs_below::<_, CMatrix>(
            &sq,
            None,
            min_sq * 1.0001 + 1e-12,
            &SolverOptions {
                tol: 1e-11,
                block: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let (l, _, r) = rayleigh_ritz(&h, &res.vectors);
        let expected = vals
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        assert!((l[0] - expected).abs() < 1e-9);
        assert!(r[0] < 1e-8);
    }
}
