//! Discrete spectrum inside the gap `(−M, M)`: eigenvalues, counts, pairing
//! and ground energies.

use serde::{Deserialize, Serialize};

use crate::algebra::{DiracAlgebra, C64};
use crate::eigen::{
    certify_below, dense_hermitian, dense_hermitian_values, eigenpairs_below, rayleigh_ritz, FourierPreconditioner, SolverInfo,
    SolverOptions,
};
use crate::error::{invalid, CqsmError, Result};
use crate::field::MassField;
use crate::grid::SpectralGrid;
use crate::hamiltonian::{assemble_h_eps, DiracOperator, PointwiseOperator};
use crate::linalg::{axpy, dot, norm, to_dense, LinearOperator, Squared};
use crate::algebra::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Dense below `dense_limit`, iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapOptions {
    pub tol: f64,
    pub max_pairs: usize,
    /// Edge exclusion as a fraction of `M`.
    pub edge_fraction: f64,
    pub method: SolveMethod,
    pub dense_limit: usize,
    pub block: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_pairs: 64,
            edge_fraction: 0.02,
            method: SolveMethod::Auto,
            dense_limit: 1500,
            block: 8,
            max_iter: 3000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub mass: f64,
    pub delta_edge: f64,
    /// Ascending eigenvalues in `(−M+δ, M−δ)`.
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<C64>>,
    /// `true` for eigenvalues counted in `N_H`; always `true` for `eigenvalues`.
    pub gap_mask: Vec<bool>,
    /// Eigenvalues within `δ` of `±M` (found by the dense path only).
    pub edge_eigenvalues: Vec<f64>,
    pub solver_info: SolverInfo,
}

impl SpectrumResult {
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// All eigenpairs of `op` with `|λ| < M − δ`, `M = op.gap_mass()`.
///
/// The iterative path runs LOBPCG on `H²` below `(M − δ)²` and recovers signed
/// eigenvalues by Rayleigh–Ritz on `H`.
pub fn gap_eigenvalues(op: &DiracOperator, opts: &GapOptions) -> Result<SpectrumResult> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let m = op.gap_mass();
    let delta = opts.edge_fraction * m;
    let dense = match opts.method {
        SolveMethod::Dense => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => op.dim() <= opts.dense_limit,
    };
    if dense {
        return Ok(from_dense(&to_dense(op), m, delta, opts));
    }
    let thr = (m - delta).powi(2);
    let grid = op.grid();
    let pre = FourierPreconditioner {
        grid,
        components: op.internal_dim(),
        shift: m * m,
    };
    let sq = Squared(op);
    let mut tol2 = 0.1 * opts.tol;
    loop {
        let so = SolverOptions {
            tol: tol2,
            block: opts.block,
            max_iter: opts.max_iter,
            max_pairs: opts.max_pairs,
            seed: opts.seed,
        };
        let pairs = eigenpairs_below(&sq, Some(&pre), thr, &so)?;
        let (vals, vecs, res) = rayleigh_ritz(op, &pairs.vectors);
        let ok = vals
            .iter()
            .zip(&res)
            .all(|(l, r)| *r <= opts.tol * l.abs().max(1.0));
        if ok || tol2 < 1e-13 || !pairs.info.converged {
            let mut info = pairs.info;
            info.converged &= ok;
            let keep: Vec<usize> = (0..vals.len())
                .filter(|&i| vals[i].abs() < m - delta)
                .collect();
            return Ok(SpectrumResult {
                mass: m,
                delta_edge: delta,
                eigenvalues: keep.iter().map(|&i| vals[i]).collect(),
                residual_norms: keep.iter().map(|&i| res[i]).collect(),
                eigenvectors: keep.iter().map(|&i| vecs[i].clone()).collect(),
                gap_mask: vec![true; keep.len()],
                edge_eigenvalues: vec![],
                solver_info: info,
            });
        }
        tol2 *= 0.01;
    }
}

/// Splits a full dense spectrum into gap and edge eigenpairs.
pub fn from_dense(h: &CMatrix, m: f64, delta: f64, opts: &GapOptions) -> SpectrumResult {
    let (vals, vecs) = dense_hermitian(h);
    let mut out = SpectrumResult {
        mass: m,
        delta_edge: delta,
        eigenvalues: vec![],
        residual_norms: vec![],
        eigenvectors: vec![],
        gap_mask: vec![],
        edge_eigenvalues: vec![],
        solver_info: SolverInfo {
            method: "dense".into(),
            iterations: 0,
            matvecs: h.nrows(),
            rounds: 0,
            converged: true,
            truncated: false,
        },
    };
    for (j, &l) in vals.iter().enumerate() {
        if l.abs() >= m {
            continue;
        }
        if l.abs() >= m - delta {
            out.edge_eigenvalues.push(l);
            continue;
        }
        if out.eigenvalues.len() == opts.max_pairs {
            out.solver_info.truncated = true;
            continue;
        }
        let v: Vec<C64> = vecs.column(j).iter().copied().collect();
        let mut r = h.apply(&v);
        axpy(C64::new(-l, 0.0), &v, &mut r);
        out.eigenvalues.push(l);
        out.residual_norms.push(norm(&r));
        out.eigenvectors.push(v);
        out.gap_mask.push(true);
    }
    out
}

/// `N_H`, the number of gap eigenvalues with multiplicity.
pub fn count_nh(res: &SpectrumResult) -> Result<usize> {
    if res.solver_info.truncated {
        return Err(CqsmError::Truncated(res.eigenvalues.len()));
    }
    if !res.solver_info.converged {
        return Err(CqsmError::NotConverged(
            "gap eigenvalue solve did not converge".into(),
        ));
    }
    Ok(res.gap_mask.iter().filter(|&&b| b).count())
}

/// Groups sorted values into clusters whose neighbours differ by at most `width`.
pub fn clusters(sorted: &[f64], width: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some(c) if v - c.last().unwrap() <= width => c.push(v),
            _ => out.push(vec![v]),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub matched: bool,
    pub max_mismatch: f64,
    pub unmatched: usize,
    pub multiplicity_agreement: bool,
}

/// Greedy matching of each `λ` with an unused `λ'` minimizing `|λ + λ'|`.
pub fn check_pair_symmetry(values: &[f64], tol: f64) -> PairingReport {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let mut used = vec![false; values.len()];
    let mut max_mismatch: f64 = 0.0;
    let mut unmatched = 0;
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..values.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                (values[i] + values[a])
                    .abs()
                    .total_cmp(&(values[i] + values[b]).abs())
            });
        // A value at zero may be its own mirror image.
        let self_cost = 2.0 * values[i].abs();
        let partner_cost = partner.map(|j| (values[i] + values[j]).abs());
        match partner_cost {
            Some(c) if !(self_cost <= tol && self_cost < c) => {
                used[partner.unwrap()] = true;
                max_mismatch = max_mismatch.max(c);
            }
            _ if self_cost <= tol => max_mismatch = max_mismatch.max(self_cost),
            _ => unmatched += 1,
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let width = 100.0 * tol;
    let cl = clusters(&sorted, width);
    let multiplicity_agreement = cl.iter().all(|c| {
        let centre = c.iter().sum::<f64>() / c.len() as f64;
        let mirror = cl
            .iter()
            .find(|d| d.iter().any(|&v| (v + centre).abs() <= width));
        mirror.is_some_and(|d| d.len() == c.len())
    });
    PairingReport {
        matched: unmatched == 0 && max_mismatch <= tol,
        max_mismatch,
        unmatched,
        multiplicity_agreement,
    }
}

/// `(E₀⁺, E₀⁻)`; the gap edges `±M` stand in when no gap state exists.
pub fn ground_energies(values: &[f64], m: f64) -> (f64, f64) {
    let plus = values.iter().copied().filter(|&v| v >= 0.0).fold(m, f64::min);
    let minus = values.iter().copied().filter(|&v| v <= 0.0).fold(-m, f64::max);
    (plus, minus)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsScanEntry {
    pub eps: f64,
    /// Exact count when a full solve ran, completed and was not truncated.
    pub n_h: Option<usize>,
    /// A rigorous lower bound on `N_H`.
    pub n_h_at_least: usize,
    /// `"full"` or `"certificate"`.
    pub method: String,
    pub e0_plus: f64,
    pub e0_minus: f64,
    pub eigenvalues: Vec<f64>,
    pub converged: bool,
    pub truncated: bool,
    pub error: Option<String>,
}

/// Number of gap eigenvalues of `op` certified by min–max from at most
/// `max_iter` LOBPCG iterations on `H²`.
pub fn certify_gap_count(op: &DiracOperator, opts: &GapOptions, max_iter: usize) -> Result<(usize, SolverInfo)> {
    let m = op.gap_mass();
    let thr = (m - opts.edge_fraction * m).powi(2);
    let pre = FourierPreconditioner {
        grid: op.grid(),
        components: op.internal_dim(),
        shift: m * m,
    };
    let so = SolverOptions {
        tol: opts.tol,
        block: opts.block,
        max_iter,
        max_pairs: opts.max_pairs,
        seed: opts.seed,
    };
    certify_below(&Squared(op), Some(&pre), thr, &so)
}

fn full_entry(eps: f64, op: &DiracOperator, opts: &GapOptions) -> EpsScanEntry {
    match gap_eigenvalues(op, opts) {
        Ok(res) => {
            let (p, mi) = ground_energies(&res.eigenvalues, res.mass);
            EpsScanEntry {
                eps,
                n_h: count_nh(&res).ok(),
                n_h_at_least: res.eigenvalues.len(),
                method: "full".into(),
                e0_plus: p,
                e0_minus: mi,
                eigenvalues: res.eigenvalues.clone(),
                converged: res.solver_info.converged,
                truncated: res.solver_info.truncated,
                error: None,
            }
        }
        Err(e) => EpsScanEntry {
            eps,
            n_h: None,
            n_h_at_least: 0,
            method: "full".into(),
            e0_plus: f64::NAN,
            e0_minus: f64::NAN,
            eigenvalues: vec![],
            converged: false,
            truncated: false,
            error: Some(e.to_string()),
        },
    }
}

/// Gap counts of `H_ε` along `eps_list`, stopping once `N ≥ 1` has been seen at
/// two consecutive entries.
///
/// On the iterative path each entry first tries a min–max certificate with at
/// most `certify_iter` iterations; the full solve runs only when that finds
/// nothing, or always when `full` is set. Strongly bound cases thus cost a few
/// iterations instead of a converged block.
pub fn scan_epsilon(
    grid: &std::sync::Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    eps_list: &[f64],
    opts: &GapOptions,
    certify_iter: usize,
    full: bool,
) -> Result<Vec<EpsScanEntry>> {
    let mut out = Vec::new();
    let mut streak = 0;
    for &eps in eps_list {
        let op = assemble_h_eps(grid, mf, alg, eps)?;
        let dense = match opts.method {
            SolveMethod::Dense => true,
            SolveMethod::Iterative => false,
            SolveMethod::Auto => op.dim() <= opts.dense_limit,
        };
        let certified = if dense || certify_iter == 0 {
            0
        } else {
            certify_gap_count(&op, opts, certify_iter)?.0
        };
        let entry = if certified == 0 || full {
            let mut e = full_entry(eps, &op, opts);
            e.n_h_at_least = e.n_h_at_least.max(certified);
            e
        } else {
            EpsScanEntry {
                eps,
                n_h: None,
                n_h_at_least: certified,
                method: "certificate".into(),
                e0_plus: f64::NAN,
                e0_minus: f64::NAN,
                eigenvalues: vec![],
                converged: false,
                truncated: false,
                error: None,
            }
        };
        let found = entry.n_h_at_least >= 1;
        out.push(entry);
        streak = if found { streak + 1 } else { 0 };
        if streak >= 2 {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProbe {
    pub dim_ker: usize,
    pub plus: usize,
    pub minus: usize,
    /// `dim ker H₊ − dim ker H₊*`, the signed `Γ̂`-split of the kernel.
    pub index: i64,
}

/// Counts gap eigenvalues of `res` with `|λ| ≤ tol` and splits their span by `Γ̂`.
pub fn kernel_probe(gamma: &PointwiseOperator, tol: f64, res: &SpectrumResult) -> KernelProbe {
    let kernel: Vec<&Vec<C64>> = res
        .eigenvalues
        .iter()
        .zip(&res.eigenvectors)
        .filter(|(l, _)| l.abs() <= tol)
        .map(|(_, v)| v)
        .collect();
    let k = kernel.len();
    let mut g = CMatrix::zeros(k, k);
    let gv: Vec<Vec<C64>> = kernel.iter().map(|v| gamma.apply(v)).collect();
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = dot(kernel[i], &gv[j]);
        }
    }
    let vals = dense_hermitian_values(&g);
    let plus = vals.iter().filter(|&&v| v > 0.0).count();
    let minus = k - plus;
    KernelProbe {
        dim_ker: k,
        plus,
        minus,
        index: plus as i64 - minus as i64,
    }
}

/// `max ‖HΓ̂ψ + λΓ̂ψ‖` over gap eigenpairs.
pub fn susy_partner_residual(op: &DiracOperator, gamma: &PointwiseOperator, res: &SpectrumResult) -> f64 {
    res.eigenvalues
        .iter()
        .zip(&res.eigenvectors)
        .map(|(&l, v)| {
            let gv = gamma.apply(v);
            let mut r = op.apply(&gv);
            axpy(C64::new(l, 0.0), &gv, &mut r);
            norm(&r) / norm(&gv)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_examples() {
        let mut r = SpectrumResult {
            mass: 1.0,
            delta_edge: 0.02,
            eigenvalues: vec![],
            residual_norms: vec![],
            eigenvectors: vec![],
            gap_mask: vec![],
            edge_eigenvalues: vec![],
            solver_info: SolverInfo {
                method: "dense".into(),
                iterations: 0,
                matvecs: 0,
                rounds: 0,
                converged: true,
                truncated: false,
            },
        };
        assert_eq!(count_nh(&r).unwrap(), 0);
        r.eigenvalues = vec![-0.4, 0.4];
        r.gap_mask = vec![true, true];
        assert_eq!(count_nh(&r).unwrap(), 2);
        r.solver_info.truncated = true;
        assert!(matches!(count_nh(&r), Err(CqsmError::Truncated(_))));
    }

    #[test]
    fn pairing_examples() {
        let p = check_pair_symmetry(&[-0.3, 0.3], 1e-8);
        assert!(p.matched && p.multiplicity_agreement);
        assert_eq!(p.max_mismatch, 0.0);
        let p = check_pair_symmetry(&[-0.3, 0.3, 0.5], 1e-8);
        assert!(!p.matched);
        assert_eq!(p.unmatched, 1);
        let p = check_pair_symmetry(&[-0.3, -0.3, 0.3, 0.3], 1e-8);
        assert!(p.matched && p.multiplicity_agreement);
        let p = check_pair_symmetry(&[-0.3, 0.3 - 1e-9, 0.3 + 1e-9], 1e-8);
        assert!(!p.multiplicity_agreement);
        let p = check_pair_symmetry(&[1e-12], 1e-8);
        assert!(p.matched);
    }

    #[test]
    fn ground_energy_examples() {
        assert_eq!(ground_energies(&[], 1.0), (1.0, -1.0));
        assert_eq!(ground_energies(&[-0.4, 0.2], 1.0), (0.2, -0.4));
    }
}
