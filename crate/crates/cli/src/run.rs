//! Command dispatch: each command returns a serializable payload plus CSV tables.

use std::sync::Arc;

use cqsm_core::algebra::{weyl_matrices, DiracAlgebra, XiOperator};
use cqsm_core::bounds::{
    bound_chain_report, cf_monte_carlo, cf_radial, nh_bound, profile_scale, BoundReport,
    ChainOptions, ChainReport,
};
use cqsm_core::field::{Direction, MassField};
use cqsm_core::grid::SpectralGrid;
use cqsm_core::hamiltonian::{
    assemble_gamma, assemble_h, assemble_h_eps, assemble_hb, assemble_k3, assemble_xf,
    susy_residual, DiracOperator,
};
use cqsm_core::linalg::{norm, random_vector, sub, LinearOperator, Sandwich};
use cqsm_core::sectors::{
    classify_by_k3, profile_as_g, sector_epsilon_scan, sector_equivalence_check, spin_iso_signs,
    Classification, SectorEquivalenceReport, SectorScanEntry,
};
use cqsm_core::spectra::{
    check_pair_symmetry, count_nh, gap_eigenvalues, ground_energies, kernel_probe, scan_epsilon,
    susy_partner_residual, EpsScanEntry, KernelProbe, PairingReport, SolveMethod, SpectrumResult,
};
use cqsm_core::symmetry::{dense_spectrum_by_sectors, QuarterTurn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{cell_f, cell_opt, CsvTable};

/// Payload and tables of a finished command. `failure` carries a
/// non-convergence that still produced partial results.
pub struct Outcome {
    pub payload: Value,
    pub tables: Vec<CsvTable>,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn new<T: Serialize>(payload: &T, tables: Vec<CsvTable>) -> Self {
        Self {
            payload: serde_json::to_value(payload).expect("payload serializes"),
            tables,
            failure: None,
        }
    }

    fn fail_if(mut self, bad: bool, msg: &str) -> Self {
        if bad {
            self.failure = Some(CliError::NotConverged(msg.into()));
        }
        self
    }
}

struct Context {
    mf: MassField,
    grid: Arc<SpectralGrid>,
    alg: DiracAlgebra,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        Ok(Self {
            mf: cfg.field.mass_field()?,
            grid: Arc::new(SpectralGrid::new(cfg.grid)?),
            alg: weyl_matrices(),
        })
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Solve => solve(cfg),
        Command::Bound => bound(cfg),
        Command::Chain => chain(cfg),
        Command::SusyCheck => susy_check(cfg),
        Command::SectorScan => sector_scan(cfg),
        Command::EpsScan => eps_scan(cfg),
        Command::TransformCheck => transform_check(cfg),
        Command::Oracle => oracle(cfg),
    }
}

#[derive(Serialize)]
struct SolvePayload {
    eps: f64,
    n: usize,
    half_width: f64,
    /// `None` when the solve is truncated or unconverged.
    n_h: Option<usize>,
    e0_plus: f64,
    e0_minus: f64,
    spectrum: SpectrumResult,
    classification: Option<Vec<Classification>>,
}

fn operator(ctx: &Context, eps: f64) -> Result<DiracOperator, CliError> {
    Ok(if eps == 1.0 {
        assemble_h(&ctx.grid, &ctx.mf, &ctx.alg)?
    } else {
        assemble_h_eps(&ctx.grid, &ctx.mf, &ctx.alg, eps)?
    })
}

fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let h = operator(&ctx, cfg.eps)?;
    let res = gap_eigenvalues(&h, &cfg.solver.gap_options(cfg.seed))?;
    let (e0_plus, e0_minus) = ground_energies(&res.eigenvalues, res.mass);
    let m = cfg.field.winding();
    let classification = if cfg.classify {
        if m == 0 {
            return Err(CliError::Validation(
                "classify: K₃ classification needs a hedgehog direction".into(),
            ));
        }
        let k3 = assemble_k3(&ctx.grid, &ctx.alg, &ctx.mf.triple, m);
        let signs = spin_iso_signs(&ctx.alg, &ctx.mf.triple);
        Some(classify_by_k3(
            &res.eigenvalues,
            &res.eigenvectors,
            &k3,
            &signs,
            100.0 * cfg.solver.tol,
            1e-4,
        ))
    } else {
        None
    };
    let mut table = CsvTable::new(
        "eigenvalues.csv",
        &["index", "lambda", "residual", "sector_l", "sector_s", "sector_t", "k3_variance"],
    );
    for (i, (&l, &r)) in res.eigenvalues.iter().zip(&res.residual_norms).enumerate() {
        let c = classification
            .as_ref()
            .and_then(|c| c.iter().find(|c| c.eigenvalue == l));
        let label = c.and_then(|c| c.label);
        table.push(vec![
            i.to_string(),
            cell_f(l),
            cell_f(r),
            cell_opt(label.map(|s| s.l)),
            cell_opt(label.map(|s| s.s)),
            cell_opt(label.map(|s| s.t)),
            cell_opt(c.map(|c| cell_f(c.k3_variance))),
        ]);
    }
    let n_h = count_nh(&res).ok();
    let bad = n_h.is_none();
    let payload = SolvePayload {
        eps: cfg.eps,
        n: cfg.grid.n,
        half_width: cfg.grid.half_width,
        n_h,
        e0_plus,
        e0_minus,
        spectrum: res,
        classification,
    };
    Ok(Outcome::new(&payload, vec![table]).fail_if(bad, "gap solve truncated or unconverged"))
}

#[derive(Serialize)]
struct BoundPayload {
    dim_k: usize,
    mass: f64,
    radial: Option<BoundReport>,
    monte_carlo: Option<BoundReport>,
    /// Bound from the radial value plus its tail bound, else from Monte Carlo.
    n_h_bound: f64,
}

fn bound(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mf = cfg.field.mass_field()?;
    let r_max = cfg.bound.r_max_scales * profile_scale(&mf);
    let radial = match cf_radial(&mf, r_max, cfg.bound.n_quad) {
        Ok(r) => Some(r),
        Err(cqsm_core::CqsmError::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let monte_carlo = match (cfg.bound.mc_samples, &radial) {
        (0, Some(_)) => None,
        (0, None) => {
            return Err(CliError::Validation(
                "bound.mc_samples: non-radial V_F needs Monte Carlo samples".into(),
            ))
        }
        (n, _) => Some(cf_monte_carlo(&mf, n, cfg.seed)?),
    };
    let c_f = radial
        .as_ref()
        .map(|r| r.c_f + r.tail_bound)
        .or(monte_carlo.as_ref().map(|m| m.c_f))
        .unwrap_or(0.0);
    let payload = BoundPayload {
        dim_k: mf.dim_k(),
        mass: mf.mass,
        n_h_bound: nh_bound(c_f, mf.mass, mf.dim_k()),
        radial,
        monte_carlo,
    };
    let mut table = CsvTable::new("chain.csv", &["quantity", "value"]);
    if let Some(r) = &payload.radial {
        table.push(vec!["c_f_radial".into(), cell_f(r.c_f)]);
        table.push(vec!["c_f_radial_tail_bound".into(), cell_f(r.tail_bound)]);
    }
    if let Some(m) = &payload.monte_carlo {
        table.push(vec!["c_f_monte_carlo".into(), cell_f(m.c_f)]);
        table.push(vec!["c_f_monte_carlo_se".into(), cell_f(m.quadrature_error_estimate)]);
    }
    table.push(vec!["n_h_bound".into(), cell_f(payload.n_h_bound)]);
    Ok(Outcome::new(&payload, vec![table]))
}

fn chain(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let opts = ChainOptions {
        gap: cfg.solver.gap_options(cfg.seed),
        r_max_scales: cfg.bound.r_max_scales,
        n_quad: cfg.bound.n_quad,
        mc_samples: (cfg.bound.mc_samples > 0).then_some(cfg.bound.mc_samples),
        seed: cfg.seed,
        robustness_check: cfg.bound.robustness_check,
    };
    let r: ChainReport = bound_chain_report(&ctx.grid, &ctx.mf, &ctx.alg, &opts)?;
    let mut table = CsvTable::new("chain.csv", &["quantity", "value"]);
    table.push(vec!["n_h".into(), cell_opt(r.n_h)]);
    table.push(vec!["n_l".into(), cell_opt(r.n_l)]);
    table.push(vec!["n_l0".into(), cell_opt(r.n_l0)]);
    table.push(vec!["n_h_bound".into(), cell_f(r.nh_bound)]);
    if let Some(b) = &r.radial {
        table.push(vec!["c_f_radial".into(), cell_f(b.c_f)]);
    }
    if let Some(b) = &r.monte_carlo {
        table.push(vec!["c_f_monte_carlo".into(), cell_f(b.c_f)]);
    }
    table.push(vec!["holds".into(), r.holds.to_string()]);
    let partial = r.partial;
    Ok(Outcome::new(&r, vec![table]).fail_if(partial, "a chain count did not converge"))
}

#[derive(Serialize)]
struct SusyPayload {
    c: f64,
    /// Set when the field is outside the planar-locked family for this `C`.
    warning: Option<String>,
    anticommutator_residual: f64,
    spectrum: SpectrumResult,
    n_h: Option<usize>,
    pairing: PairingReport,
    partner_residual: f64,
    kernel: KernelProbe,
}

fn susy_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let family_c = match &ctx.mf.direction {
        Direction::PlanarLocked { c, .. } => Some(*c),
        _ => None,
    };
    let c = cfg.susy.c.or(family_c).ok_or_else(|| {
        CliError::Validation("susy.c: required when the direction is not planar-locked".into())
    })?;
    let warning = (family_c != Some(c))
        .then(|| format!("field is not in the planar-locked family for C = {c}"));
    let xi = XiOperator::new(c, &ctx.mf.triple)?;
    let gamma = assemble_gamma(&ctx.grid.spec, &ctx.alg, &xi);
    let h = assemble_h(&ctx.grid, &ctx.mf, &ctx.alg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let psi = random_vector(h.dim(), &mut rng);
    let anticommutator_residual = susy_residual(&h, &gamma, &psi);
    let opts = cfg.solver.gap_options(cfg.seed);
    let res = gap_eigenvalues(&h, &opts)?;
    let pairing = check_pair_symmetry(&res.eigenvalues, 10.0 * cfg.solver.tol);
    let partner_residual = susy_partner_residual(&h, &gamma, &res);
    let kernel = kernel_probe(&gamma, cfg.susy.kernel_tol, &res);
    let n_h = count_nh(&res).ok();
    let bad = n_h.is_none();
    let mut table = CsvTable::new(
        "eigenvalues.csv",
        &["index", "lambda", "residual", "sector_l", "sector_s", "sector_t", "k3_variance"],
    );
    for (i, (&l, &r)) in res.eigenvalues.iter().zip(&res.residual_norms).enumerate() {
        table.push(vec![i.to_string(), cell_f(l), cell_f(r), "".into(), "".into(), "".into(), "".into()]);
    }
    let payload = SusyPayload {
        c,
        warning,
        anticommutator_residual,
        spectrum: res,
        n_h,
        pairing,
        partner_residual,
        kernel,
    };
    Ok(Outcome::new(&payload, vec![table]).fail_if(bad, "gap solve truncated or unconverged"))
}

#[derive(Serialize)]
struct SectorPayload {
    entries: Vec<SectorScanEntry>,
    /// Per `ℓ`, the largest listed `ε` from which every smaller listed `ε`
    /// has `𝓔₀ < 0`.
    thresholds: Vec<(i32, Option<f64>)>,
}

fn sector_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mf = cfg.field.mass_field()?;
    let g = profile_as_g(&mf);
    let sc = &cfg.sector;
    let opts = cfg.solver.solver_options(cfg.seed);
    let mut entries = Vec::new();
    let mut thresholds = Vec::new();
    let mut order = cfg.eps_list.clone();
    order.sort_by(|a, b| b.total_cmp(a));
    for &l in &sc.l {
        let e = sector_epsilon_scan(&g, (l, sc.s, sc.t), mf.mass, &order, sc.cyl, &opts)?;
        let mut threshold = None;
        for x in e.iter().rev() {
            if x.e0 < 0.0 {
                threshold = Some(x.eps);
            } else {
                break;
            }
        }
        thresholds.push((l, threshold));
        entries.extend(e);
    }
    let mut table = CsvTable::new("sector_scan.csv", &["l", "s", "t", "eps", "E0", "converged"]);
    for e in &entries {
        table.push(vec![
            e.l.to_string(),
            e.s.to_string(),
            e.t.to_string(),
            cell_f(e.eps),
            cell_f(e.e0),
            e.converged.to_string(),
        ]);
    }
    let bad = entries.iter().any(|e| !e.converged);
    let payload = SectorPayload { entries, thresholds };
    Ok(Outcome::new(&payload, vec![table]).fail_if(bad, "a sector ground solve did not converge"))
}

#[derive(Serialize)]
struct EpsPayload {
    entries: Vec<EpsScanEntry>,
    /// First `ε` with a gap eigenvalue that persists at the next listed `ε`.
    emergence_eps: Option<f64>,
}

fn eps_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let entries = scan_epsilon(
        &ctx.grid,
        &ctx.mf,
        &ctx.alg,
        &cfg.eps_list,
        &cfg.solver.gap_options(cfg.seed),
        cfg.certify_iter,
        cfg.full_scan,
    )?;
    let emergence_eps = entries
        .windows(2)
        .find(|w| w[0].n_h_at_least >= 1 && w[1].n_h_at_least >= 1)
        .map(|w| w[0].eps);
    let mut table = CsvTable::new(
        "eps_scan.csv",
        &["eps", "method", "n_h", "n_h_at_least", "e0_plus", "e0_minus", "converged", "truncated"],
    );
    for e in &entries {
        table.push(vec![
            cell_f(e.eps),
            e.method.clone(),
            cell_opt(e.n_h),
            e.n_h_at_least.to_string(),
            cell_f(e.e0_plus),
            cell_f(e.e0_minus),
            e.converged.to_string(),
            e.truncated.to_string(),
        ]);
    }
    let bad = entries
        .iter()
        .any(|e| e.error.is_some() || (e.method == "full" && !e.converged));
    let payload = EpsPayload {
        entries,
        emergence_eps,
    };
    Ok(Outcome::new(&payload, vec![table]).fail_if(bad, "an ε entry failed to converge"))
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct DenseComparison {
    /// Largest difference between sorted full spectra of `H` and `H(B)`.
    pub h_vs_hb: f64,
    /// The same for `H` and `X_F H X_F⁻¹` assembled from matvecs.
    pub h_vs_conjugated: f64,
    pub gap_h: Vec<f64>,
    pub gap_hb: Vec<f64>,
}

#[derive(Serialize)]
struct TransformPayload {
    test_state_center: [f64; 3],
    test_state_width: f64,
    /// `‖X_F H X_F⁻¹ψ − H(B)ψ‖/‖ψ‖`.
    matvec_residual: f64,
    /// `‖X_F*X_Fψ − ψ‖/‖ψ‖`.
    unitarity_residual: f64,
    /// Present for `n ≤ 9`.
    dense: Option<DenseComparison>,
}

/// `‖X_F H X_F⁻¹ψ − H(B)ψ‖/‖ψ‖` for the configured smooth state.
pub fn transform_residual(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    center: [f64; 3],
    width: f64,
) -> Result<(f64, f64), CliError> {
    let h = assemble_h(grid, mf, alg)?;
    let hb = assemble_hb(grid, mf, alg)?;
    let x = assemble_xf(&grid.spec, mf, alg, false)?;
    let xi = assemble_xf(&grid.spec, mf, alg, true)?;
    let psi = grid.spec.gaussian_state(mf.internal_dim(), center, width);
    let conj = Sandwich {
        left: &x,
        middle: &h,
        right: &xi,
    };
    let r = norm(&sub(&conj.apply(&psi), &hb.apply(&psi))) / norm(&psi);
    let u = norm(&sub(&xi.apply(&x.apply(&psi)), &psi)) / norm(&psi);
    Ok((r, u))
}

/// Dense spectra of `H`, `H(B)` and `X_F H X_F⁻¹` by quarter-turn sectors.
pub fn dense_transform_comparison(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
) -> Result<DenseComparison, CliError> {
    let h = assemble_h(grid, mf, alg)?;
    let hb = assemble_hb(grid, mf, alg)?;
    let x = assemble_xf(&grid.spec, mf, alg, false)?;
    let xi = assemble_xf(&grid.spec, mf, alg, true)?;
    let rot = QuarterTurn::new(grid.spec, alg, &mf.triple, 0)?;
    let a = dense_spectrum_by_sectors(&h, &rot);
    let b = dense_spectrum_by_sectors(&hb, &rot);
    let conj = Sandwich {
        left: &x,
        middle: &h,
        right: &xi,
    };
    let c = dense_spectrum_by_sectors(&conj, &rot);
    let diff = |u: &[f64], v: &[f64]| {
        u.iter()
            .zip(v)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let m = mf.mass;
    let gap = |v: &[f64]| v.iter().copied().filter(|l| l.abs() < m).collect();
    Ok(DenseComparison {
        h_vs_hb: diff(&a, &b),
        h_vs_conjugated: diff(&a, &c),
        gap_h: gap(&a),
        gap_hb: gap(&b),
    })
}

fn transform_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    if !ctx.mf.direction.is_constant() {
        return Err(CliError::Validation(
            "field.direction: transform-check needs a constant direction".into(),
        ));
    }
    let ts = cfg.test_state;
    let (matvec_residual, unitarity_residual) =
        transform_residual(&ctx.grid, &ctx.mf, &ctx.alg, ts.center, ts.width)?;
    let dense = if cfg.grid.n <= 9 {
        Some(dense_transform_comparison(&ctx.grid, &ctx.mf, &ctx.alg)?)
    } else {
        None
    };
    let payload = TransformPayload {
        test_state_center: ts.center,
        test_state_width: ts.width,
        matvec_residual,
        unitarity_residual,
        dense,
    };
    Ok(Outcome::new(&payload, vec![]))
}

#[derive(Serialize, Debug, Clone)]
pub struct OracleReport {
    pub dense: Vec<f64>,
    pub iterative: Vec<f64>,
    pub count_match: bool,
    pub max_abs_diff: f64,
    pub iterative_converged: bool,
    pub sector_equivalence: Option<SectorEquivalenceReport>,
}

/// Dense quarter-turn-blocked gap eigenvalues against the iterative solver.
pub fn oracle_compare(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    m: i32,
    opts: &cqsm_core::spectra::GapOptions,
    with_sectors: bool,
) -> Result<OracleReport, CliError> {
    if grid.n() > 9 {
        return Err(CliError::Validation("grid.n: the dense oracle needs n ≤ 9".into()));
    }
    let h = assemble_h(grid, mf, alg)?;
    let rot = QuarterTurn::new(grid.spec, alg, &mf.triple, m)?;
    let edge = h.gap_mass() * (1.0 - opts.edge_fraction);
    let dense: Vec<f64> = dense_spectrum_by_sectors(&h, &rot)
        .into_iter()
        .filter(|l| l.abs() < edge)
        .collect();
    let mut it_opts = *opts;
    it_opts.method = SolveMethod::Iterative;
    let res = gap_eigenvalues(&h, &it_opts)?;
    let count_match = dense.len() == res.eigenvalues.len();
    let max_abs_diff = if count_match {
        dense
            .iter()
            .zip(&res.eigenvalues)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let sector_equivalence = if with_sectors {
        Some(sector_equivalence_check(grid, mf, alg, m, 1e-6)?)
    } else {
        None
    };
    Ok(OracleReport {
        dense,
        iterative: res.eigenvalues,
        count_match,
        max_abs_diff,
        iterative_converged: res.solver_info.converged && !res.solver_info.truncated,
        sector_equivalence,
    })
}

fn oracle(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Context::new(cfg)?;
    let r = oracle_compare(
        &ctx.grid,
        &ctx.mf,
        &ctx.alg,
        cfg.field.winding(),
        &cfg.solver.gap_options(cfg.seed),
        true,
    )?;
    let bad = !r.iterative_converged;
    Ok(Outcome::new(&r, vec![]).fail_if(bad, "iterative gap solve did not converge"))
}
