//! Eigenvalue-count bounds: the constant `C_F = ∫∫ V_F(x)V_F(y)/|x−y|² dx dy`,
//! the comparison Schrödinger operators and the chain
//! `N_H ≤ N₋(L(F)) ≤ N₋(L₀(F)) ≤ dim𝒦·M²·C_F/(4π²)`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{DiracAlgebra, C64};
use crate::eigen::{eigenpairs_below, smallest, FourierPreconditioner, SolverInfo, SolverOptions};
use crate::error::{invalid, CqsmError, Result};
use crate::field::MassField;
use crate::grid::SpectralGrid;
use crate::hamiltonian::assemble_h;
use crate::linalg::{LinearOperator, Squared};
use crate::spectra::{count_nh, gap_eigenvalues, GapOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    RadialLogKernel,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub c_f: f64,
    pub n_h_bound: f64,
    /// `|I(2n) − I(n)|` for the quadrature, the standard error for Monte Carlo.
    pub quadrature_error_estimate: f64,
    /// Upper bound on the part of `C_F` outside the truncation radius.
    pub tail_bound: f64,
    pub method: BoundMethod,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

/// `dim𝒦·M²·C_F/(4π²)`.
pub fn nh_bound(c_f: f64, m: f64, dim_k: usize) -> f64 {
    dim_k as f64 * m * m * c_f / (4.0 * PI * PI)
}

/// Sharp Hardy–Littlewood–Sobolev constant for `|x−y|⁻²` in three dimensions
/// with both exponents `3/2`.
fn hls_constant() -> f64 {
    4f64.powf(1.0 / 3.0) * PI.powf(4.0 / 3.0)
}

fn gl(order: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(order).expect("nonzero order"))
}

/// `∫_a^b f` on `panels` equal subintervals.
fn panel_integral(rule: &GaussLegendre, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| rule.integrate(a + p as f64 * w, a + (p + 1) as f64 * w, &f))
        .sum()
}

/// `∫₀¹ g(t) ln((1+t)/(1−t)) dt` with panels graded geometrically towards `t = 1`.
fn log_kernel_integral(rule: &GaussLegendre, panels: usize, g: impl Fn(f64) -> f64) -> f64 {
    let kernel = |t: f64| g(t) * ((1.0 + t) / (1.0 - t)).ln();
    let last = 1.0 - 1.0 / panels as f64;
    let mut sum = panel_integral(rule, 0.0, last, panels - 1, kernel);
    // Near t = 1 integrate in s = 1 − t so the singular factor stays exact.
    let near = |s: f64| g(1.0 - s) * ((2.0 - s) / s).ln();
    let mut hi = 1.0 / panels as f64;
    for _ in 0..60 {
        sum += rule.integrate(0.5 * hi, hi, near);
        hi *= 0.5;
    }
    sum
}

/// `16π² ∫₀^R a³V(a) ∫₀¹ t V(at) ln((1+t)/(1−t)) dt da`, the truncated `C_F`
/// for radial `V` after the angular integration of `|x−y|⁻²`.
fn radial_cf(v: &(impl Fn(f64) -> f64 + Sync), r_max: f64, panels: usize) -> f64 {
    let rule = gl(12);
    let outer = |a: f64| {
        let va = v(a);
        if va == 0.0 {
            return 0.0;
        }
        a * a * a * va * log_kernel_integral(&rule, panels, |t| t * v(a * t))
    };
    16.0 * PI * PI * panel_integral(&rule, 0.0, r_max, panels, outer)
}

/// `‖V·1_{r>r₀}‖_{3/2}` in three dimensions.
fn radial_norm_32(v: &impl Fn(f64) -> f64, r0: f64, r_max: f64) -> f64 {
    let rule = gl(12);
    let f = |r: f64| 4.0 * PI * r * r * v(r).abs().powf(1.5);
    let inner = if r_max > r0 {
        panel_integral(&rule, r0, r_max, 64, f)
    } else {
        0.0
    };
    let start = r_max.max(r0);
    // ∫_{start}^∞ f(r) dr with r = start/u.
    let tail = if start > 0.0 {
        panel_integral(&rule, 0.0, 1.0, 64, |u| {
            if u == 0.0 {
                0.0
            } else {
                f(start / u) * start / (u * u)
            }
        })
    } else {
        0.0
    };
    (inner + tail).powf(2.0 / 3.0)
}

/// Profile length scale in grid units, accounting for the dilation.
pub fn profile_scale(mf: &MassField) -> f64 {
    mf.profile.scale() / mf.dilation()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialQuadrature {
    pub value: f64,
    pub error: f64,
    pub tail_bound: f64,
}

/// `∫∫ V(|x|)V(|y|)/|x−y|² dx dy` over `|x|, |y| < r_max` for a radial `V`,
/// with `n_quad` and `2·n_quad` panels compared for the error estimate.
pub fn radial_log_kernel(v: &(impl Fn(f64) -> f64 + Sync), r_max: f64, n_quad: usize) -> RadialQuadrature {
    let coarse = radial_cf(v, r_max, n_quad);
    let fine = radial_cf(v, r_max, 2 * n_quad);
    RadialQuadrature {
        value: fine,
        error: (fine - coarse).abs(),
        tail_bound: 2.0 * hls_constant() * radial_norm_32(v, r_max, r_max) * radial_norm_32(v, 0.0, r_max),
    }
}

/// `C_F` by radial quadrature; requires `V_F` to depend on `|x|` only.
pub fn cf_radial(mf: &MassField, r_max: f64, n_quad: usize) -> Result<BoundReport> {
    let v = mf.radial_vf().ok_or_else(|| {
        CqsmError::Unsupported("V_F is not radial; use the Monte Carlo estimate".into())
    })?;
    if n_quad < 2 {
        return Err(invalid("n_quad", "need at least 2 panels"));
    }
    let scale = profile_scale(mf);
    if !(r_max >= 10.0 * scale) {
        return Err(invalid("r_max", "must be at least 10 profile scales"));
    }
    let q = radial_log_kernel(&v, r_max, n_quad);
    Ok(BoundReport {
        c_f: q.value,
        n_h_bound: nh_bound(q.value, mf.mass, mf.dim_k()),
        quadrature_error_estimate: q.error,
        tail_bound: q.tail_bound,
        method: BoundMethod::RadialLogKernel,
        samples: None,
        seed: None,
    })
}

const MC_BATCH: usize = 1 << 16;

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.gen::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

/// Pair sampler for `∫∫ V(x)V(y)/|x−y|² dx dy`.
///
/// `x` has density `p(x) = ρ/(π²(ρ²+|x|²)²)`. Given `x`, `y` is drawn from the
/// equal mixture of `x + d` with `|d| ~ Exp(ρ)` in a uniform direction and an
/// independent draw from `p`. The first component cancels `|x−y|⁻²`, the second
/// keeps the variance finite for slowly decaying `V`.
struct PairSampler {
    rho: f64,
}

impl PairSampler {
    fn density(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        self.rho / (PI * PI * (self.rho * self.rho + r2).powi(2))
    }

    fn local_density(&self, s: f64) -> f64 {
        (-s / self.rho).exp() / (4.0 * PI * self.rho * s * s)
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        // r = ρ tan θ with θ ∝ sin²θ on (0, π/2).
        let theta = loop {
            let t = 0.5 * PI * rng.gen::<f64>();
            if rng.gen::<f64>() < t.sin().powi(2) {
                break t;
            }
        };
        let r = self.rho * theta.tan();
        let u = unit_vector(rng);
        [r * u[0], r * u[1], r * u[2]]
    }

    fn weight(&self, v: &impl Fn([f64; 3]) -> Result<f64>, rng: &mut ChaCha8Rng) -> Result<f64> {
        let x = self.draw(rng);
        let y = if rng.gen::<bool>() {
            let s = -self.rho * (1.0 - rng.gen::<f64>()).ln();
            let u = unit_vector(rng);
            [x[0] + s * u[0], x[1] + s * u[1], x[2] + s * u[2]]
        } else {
            self.draw(rng)
        };
        let vx = v(x)?;
        if vx == 0.0 {
            return Ok(0.0);
        }
        let vy = v(y)?;
        let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
        let s2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if s2 == 0.0 {
            return Ok(0.0);
        }
        let q = 0.5 * self.local_density(s2.sqrt()) + 0.5 * self.density(y);
        Ok(vx * vy / (s2 * self.density(x) * q))
    }
}

/// Seeded Monte Carlo estimate `(mean, standard error)` of
/// `∫∫ V(x)V(y)/|x−y|² dx dy`, with `rho` the length scale of `V`.
/// Batches use separate ChaCha streams and are summed in a fixed order.
pub fn monte_carlo_pairs(
    v: &(impl Fn([f64; 3]) -> Result<f64> + Sync),
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(invalid("samples", "need at least 2 samples"));
    }
    if !(rho > 0.0) {
        return Err(invalid("rho", "must be positive"));
    }
    let sampler = PairSampler { rho };
    let batches = samples.div_ceil(MC_BATCH);
    let partial: Vec<Result<(f64, f64)>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(samples - b * MC_BATCH);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..count {
                let w = sampler.weight(v, &mut rng)?;
                sum += w;
                sq += w * w;
            }
            Ok((sum, sq))
        })
        .collect();
    let mut sum = 0.0;
    let mut sq = 0.0;
    for p in partial {
        let (s, q) = p?;
        sum += s;
        sq += q;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Seeded Monte Carlo estimate of `C_F`; bit-reproducible for a fixed seed.
pub fn cf_monte_carlo(mf: &MassField, samples: usize, seed: u64) -> Result<BoundReport> {
    let radial = mf.radial_vf();
    let v = |x: [f64; 3]| -> Result<f64> {
        match &radial {
            Some(f) => Ok(f(crate::field::norm3(x))),
            None => mf.eval_vf(x),
        }
    };
    let (mean, se) = monte_carlo_pairs(&v, profile_scale(mf), samples, seed)?;
    Ok(BoundReport {
        c_f: mean,
        n_h_bound: nh_bound(mean, mf.mass, mf.dim_k()),
        quadrature_error_estimate: se,
        tail_bound: 0.0,
        method: BoundMethod::MonteCarlo,
        samples: Some(samples),
        seed: Some(seed),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchrodingerKind {
    /// `−Δ + M ∂₃cos F`
    SPlus,
    /// `−Δ − M ∂₃cos F`
    SMinus,
    /// `−Δ − M V_F`
    L0,
}

/// `−Δ + W(x)` for a real potential sampled at the grid nodes.
pub struct SchrodingerOperator {
    grid: Arc<SpectralGrid>,
    potential: Vec<f64>,
}

impl SchrodingerOperator {
    pub fn new(grid: Arc<SpectralGrid>, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.nodes() {
            return Err(CqsmError::DimensionMismatch {
                expected: grid.nodes(),
                got: potential.len(),
            });
        }
        Ok(Self { grid, potential })
    }

    pub fn assemble(grid: &Arc<SpectralGrid>, mf: &MassField, kind: SchrodingerKind) -> Result<Self> {
        let m = mf.mass;
        let mut potential = Vec::with_capacity(grid.nodes());
        for node in 0..grid.nodes() {
            let x = grid.spec.position(node);
            let w = match kind {
                SchrodingerKind::SPlus | SchrodingerKind::SMinus => {
                    // ∂₃cos F = −sin F·∂₃F
                    let d3 = -mf.profile_at(x)?.sin() * mf.profile_grad(x)?[2];
                    if kind == SchrodingerKind::SPlus {
                        m * d3
                    } else {
                        -m * d3
                    }
                }
                SchrodingerKind::L0 => -m * mf.eval_vf(x)?,
            };
            potential.push(w);
        }
        Self::new(grid.clone(), potential)
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn preconditioner(&self) -> FourierPreconditioner<'_> {
        let wmax = self.potential.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        FourierPreconditioner {
            grid: &self.grid,
            components: 1,
            shift: wmax + 1.0,
        }
    }
}

impl LinearOperator for SchrodingerOperator {
    fn dim(&self) -> usize {
        self.grid.nodes()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.grid.apply_multiplier(y, 1, |k, v| {
            v[0] *= k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        });
        for ((yi, xi), w) in y.iter_mut().zip(x).zip(&self.potential) {
            *yi += xi * w;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerResult {
    pub kind: SchrodingerKind,
    pub e0: f64,
    /// Negative eigenvalues of the scalar operator (`L0` only).
    pub n_negative_scalar: Option<usize>,
    pub converged: bool,
    pub truncated: bool,
}

/// Ground energy of a comparison operator; for `L0` also the negative count.
pub fn schrodinger_ground(
    kind: SchrodingerKind,
    mf: &MassField,
    grid: &Arc<SpectralGrid>,
    opts: &SolverOptions,
) -> Result<SchrodingerResult> {
    let op = SchrodingerOperator::assemble(grid, mf, kind)?;
    let pre = op.preconditioner();
    let (e0, _, info) = smallest(&op, Some(&pre), opts)?;
    let mut out = SchrodingerResult {
        kind,
        e0,
        n_negative_scalar: None,
        converged: info.converged,
        truncated: false,
    };
    if kind == SchrodingerKind::L0 {
        // Eigenvalues within the solver tolerance of zero are not counted.
        let cut = -opts.tol;
        if e0 >= cut {
            out.n_negative_scalar = Some(0);
        } else {
            let neg = eigenpairs_below(&op, Some(&pre), cut, opts)?;
            out.n_negative_scalar = Some(neg.values.len());
            out.converged &= neg.info.converged;
            out.truncated = neg.info.truncated;
        }
    }
    Ok(out)
}

/// `N₋(L(F))`, the number of eigenvalues of `H²` below `M²`.
pub fn count_l_negative(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    opts: &SolverOptions,
) -> Result<(usize, SolverInfo)> {
    let h = assemble_h(grid, mf, alg)?;
    let m = h.gap_mass();
    let pre = FourierPreconditioner {
        grid,
        components: h.internal_dim(),
        shift: m * m,
    };
    let pairs = eigenpairs_below(&Squared(&h), Some(&pre), m * m, opts)?;
    Ok((pairs.values.len(), pairs.info))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOptions {
    pub gap: GapOptions,
    pub r_max_scales: f64,
    pub n_quad: usize,
    /// Monte Carlo cross-check of `C_F`; always used when `V_F` is not radial.
    pub mc_samples: Option<usize>,
    pub seed: u64,
    /// Recount at `tol/10` and require identical counts.
    pub robustness_check: bool,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            gap: GapOptions::default(),
            r_max_scales: 40.0,
            n_quad: 64,
            mc_samples: None,
            seed: 0x5eed,
            robustness_check: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainReport {
    pub n_h: Option<usize>,
    pub n_l: Option<usize>,
    /// `4·dim𝒦` times the scalar negative count.
    pub n_l0: Option<usize>,
    pub n_l0_scalar: Option<usize>,
    pub nh_bound: f64,
    pub radial: Option<BoundReport>,
    pub monte_carlo: Option<BoundReport>,
    pub holds: bool,
    pub partial: bool,
    pub stable: Option<bool>,
}

fn counts(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    gap: &GapOptions,
) -> Result<(Option<usize>, Option<usize>, Option<usize>)> {
    let h = assemble_h(grid, mf, alg)?;
    let res = gap_eigenvalues(&h, gap)?;
    let n_h = count_nh(&res).ok();
    let so = SolverOptions {
        tol: gap.tol,
        block: gap.block,
        max_iter: gap.max_iter,
        max_pairs: gap.max_pairs,
        seed: gap.seed,
    };
    let (n_l, info) = count_l_negative(grid, mf, alg, &so)?;
    let n_l = (info.converged && !info.truncated).then_some(n_l);
    let l0 = schrodinger_ground(SchrodingerKind::L0, mf, grid, &so)?;
    let n_l0 = if l0.converged && !l0.truncated {
        l0.n_negative_scalar
    } else {
        None
    };
    Ok((n_h, n_l, n_l0))
}

/// All members of the chain and whether the inequalities hold.
pub fn bound_chain_report(
    grid: &Arc<SpectralGrid>,
    mf: &MassField,
    alg: &DiracAlgebra,
    opts: &ChainOptions,
) -> Result<ChainReport> {
    let scale = profile_scale(mf);
    let radial = match cf_radial(mf, opts.r_max_scales * scale, opts.n_quad) {
        Ok(r) => Some(r),
        Err(CqsmError::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let monte_carlo = match (opts.mc_samples, &radial) {
        (Some(n), _) => Some(cf_monte_carlo(mf, n, opts.seed)?),
        (None, None) => Some(cf_monte_carlo(mf, 10_000_000, opts.seed)?),
        (None, Some(_)) => None,
    };
    let c_f = radial
        .as_ref()
        .map(|r| r.c_f + r.tail_bound)
        .or(monte_carlo.as_ref().map(|m| m.c_f))
        .unwrap_or(0.0);
    let bound = nh_bound(c_f, mf.mass, mf.dim_k());
    let (n_h, n_l, n_l0_scalar) = counts(grid, mf, alg, &opts.gap)?;
    let n_l0 = n_l0_scalar.map(|n| 4 * mf.dim_k() * n);
    let partial = n_h.is_none() || n_l.is_none() || n_l0.is_none();
    let holds = match (n_h, n_l, n_l0) {
        (Some(a), Some(b), Some(c)) => a <= b && b <= c && c as f64 <= bound,
        _ => false,
    };
    let stable = if opts.robustness_check {
        let mut g = opts.gap;
        g.tol /= 10.0;
        Some(counts(grid, mf, alg, &g)? == (n_h, n_l, n_l0_scalar))
    } else {
        None
    };
    Ok(ChainReport {
        n_h,
        n_l,
        n_l0,
        n_l0_scalar,
        nh_bound: bound,
        radial,
        monte_carlo,
        holds,
        partial,
        stable,
    })
}
