//! Run configuration: a single JSON document with every default resolved.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cqsm_core::algebra::{pauli_triple, IsoSpinTriple};
use cqsm_core::field::{Direction, MassField, ProfileConfig, ProfileKind, RadialTable};
use cqsm_core::grid::GridSpec;
use cqsm_core::sectors::CylGrid;
use cqsm_core::spectra::{GapOptions, SolveMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Bound,
    Chain,
    SusyCheck,
    SectorScan,
    EpsScan,
    TransformCheck,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Bound => "bound",
            Command::Chain => "chain",
            Command::SusyCheck => "susy-check",
            Command::SectorScan => "sector-scan",
            Command::EpsScan => "eps-scan",
            Command::TransformCheck => "transform-check",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TripleConfig {
    Pauli,
    /// Pauli matrices tensored with the identity on `ℂ^k`.
    PauliTensor { k: usize },
}

impl TripleConfig {
    pub fn build(self) -> IsoSpinTriple {
        match self {
            TripleConfig::Pauli => pauli_triple(),
            TripleConfig::PauliTensor { k } => pauli_triple().tensor_identity(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_profile")]
    pub profile: ProfileConfig,
    /// Two-column `radius,value` CSV; replaces `profile` by a custom radial table.
    #[serde(default)]
    pub profile_csv: Option<PathBuf>,
    #[serde(default = "default_triple")]
    pub triple: TripleConfig,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_mass")]
    pub mass: f64,
}

fn default_profile() -> ProfileConfig {
    ProfileConfig::exp_i(0.55)
}

fn default_triple() -> TripleConfig {
    TripleConfig::Pauli
}

fn default_direction() -> Direction {
    Direction::polar_hedgehog(1)
}

fn default_mass() -> f64 {
    1.0
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            profile_csv: None,
            triple: default_triple(),
            direction: default_direction(),
            mass: default_mass(),
        }
    }
}

impl FieldConfig {
    pub fn mass_field(&self) -> cqsm_core::Result<MassField> {
        MassField::new(
            self.profile.clone(),
            self.triple.build(),
            self.direction.clone(),
            self.mass,
        )
    }

    /// Hedgehog winding, or 0 for fields without one.
    pub fn winding(&self) -> i32 {
        match &self.direction {
            Direction::Hedgehog { m, .. } => *m as i32,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_pairs")]
    pub max_pairs: usize,
    #[serde(default = "default_edge_fraction")]
    pub edge_fraction: f64,
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_pairs() -> usize {
    64
}
fn default_edge_fraction() -> f64 {
    0.02
}
fn default_dense_limit() -> usize {
    1500
}
fn default_block() -> usize {
    8
}
fn default_max_iter() -> usize {
    3000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_pairs: default_max_pairs(),
            edge_fraction: default_edge_fraction(),
            method: SolveMethod::Auto,
            dense_limit: default_dense_limit(),
            block: default_block(),
            max_iter: default_max_iter(),
        }
    }
}

impl SolverConfig {
    pub fn gap_options(&self, seed: u64) -> GapOptions {
        GapOptions {
            tol: self.tol,
            max_pairs: self.max_pairs,
            edge_fraction: self.edge_fraction,
            method: self.method,
            dense_limit: self.dense_limit,
            block: self.block,
            max_iter: self.max_iter,
            seed,
        }
    }

    pub fn solver_options(&self, seed: u64) -> cqsm_core::eigen::SolverOptions {
        cqsm_core::eigen::SolverOptions {
            tol: self.tol,
            block: self.block,
            max_iter: self.max_iter,
            max_pairs: self.max_pairs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Radial quadrature cutoff in units of the profile scale.
    #[serde(default = "default_r_max_scales")]
    pub r_max_scales: f64,
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    /// Monte Carlo samples for the `C_F` cross-check; 0 disables it.
    #[serde(default)]
    pub mc_samples: usize,
    /// Recount the chain at `tol/10`.
    #[serde(default)]
    pub robustness_check: bool,
}

fn default_r_max_scales() -> f64 {
    40.0
}
fn default_n_quad() -> usize {
    64
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            r_max_scales: default_r_max_scales(),
            n_quad: default_n_quad(),
            mc_samples: 0,
            robustness_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SusyConfig {
    /// Constant of the grading factor; defaults to the planar-locked `C`.
    #[serde(default)]
    pub c: Option<f64>,
    /// Eigenvalues with `|λ| ≤ kernel_tol` count towards the kernel.
    #[serde(default = "default_kernel_tol")]
    pub kernel_tol: f64,
}

fn default_kernel_tol() -> f64 {
    1e-6
}

impl Default for SusyConfig {
    fn default() -> Self {
        Self {
            c: None,
            kernel_tol: default_kernel_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorConfig {
    #[serde(default = "default_cyl")]
    pub cyl: CylGrid,
    #[serde(default = "default_ls")]
    pub l: Vec<i32>,
    #[serde(default = "default_sign")]
    pub s: i8,
    #[serde(default = "default_sign")]
    pub t: i8,
}

fn default_cyl() -> CylGrid {
    CylGrid {
        r_max: 8.0,
        z_max: 8.0,
        n_r: 80,
        n_z: 160,
    }
}
fn default_ls() -> Vec<i32> {
    vec![0, 1, 2, 3]
}
fn default_sign() -> i8 {
    1
}

impl Default for SectorConfig {
    fn default() -> Self {
        Self {
            cyl: default_cyl(),
            l: default_ls(),
            s: 1,
            t: 1,
        }
    }
}

/// Smooth Gaussian test state for the matvec identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestStateConfig {
    #[serde(default = "default_center")]
    pub center: [f64; 3],
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_center() -> [f64; 3] {
    [2.0, 0.3, 0.2]
}
fn default_width() -> f64 {
    0.5
}

impl Default for TestStateConfig {
    fn default() -> Self {
        Self {
            center: default_center(),
            width: default_width(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_true")]
    pub csv: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { csv: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must match the command given on the command line when present.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Dilation for `solve`; `1` is the undilated operator.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Iteration budget of the min–max certificate tried first at each `ε`;
    /// `0` always runs the full solve.
    #[serde(default = "default_certify_iter")]
    pub certify_iter: usize,
    /// Run the full solve at every `ε` even when the certificate succeeds.
    #[serde(default)]
    pub full_scan: bool,
    /// Classify `solve` eigenvectors by `K₃` (hedgehog fields only).
    #[serde(default)]
    pub classify: bool,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub susy: SusyConfig,
    #[serde(default)]
    pub sector: SectorConfig,
    #[serde(default)]
    pub test_state: TestStateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_grid() -> GridSpec {
    GridSpec {
        half_width: 8.0,
        n: 31,
    }
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_eps() -> f64 {
    1.0
}
fn default_certify_iter() -> usize {
    60
}
fn default_eps_list() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125, 0.0625]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    /// Parses, resolves file references relative to the config and validates.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_in(&text, base)
    }

    pub fn from_str_in(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!(
                "config parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        if let Some(p) = cfg.field.profile_csv.take() {
            let full = if p.is_absolute() { p } else { base.join(p) };
            if !full.exists() {
                return Err(CliError::Validation(format!(
                    "field.profile_csv: file {} does not exist",
                    full.display()
                )));
            }
            let table = RadialTable::from_csv(&full)?;
            cfg.field.profile = ProfileConfig::new(ProfileKind::CustomRadial { table })?
                .with_length_unit(cfg.field.profile.length_unit)?;
            cfg.field.profile_csv = Some(full);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |field: &str, msg: &str| Err(CliError::Validation(format!("{field}: {msg}")));
        self.grid.validate()?;
        self.sector.cyl.validate()?;
        self.field.mass_field()?;
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return fail("solver.tol", "must be positive");
        }
        if !(0.0..1.0).contains(&s.edge_fraction) {
            return fail("solver.edge_fraction", "must lie in [0, 1)");
        }
        if s.block == 0 || s.max_pairs == 0 || s.max_iter == 0 {
            return fail("solver", "block, max_pairs and max_iter must be positive");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail("eps", "must be positive");
        }
        if self.eps_list.is_empty() {
            return fail("eps_list", "must not be empty");
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return fail("eps_list", "every entry must be positive");
        }
        if self.sector.s.abs() != 1 || self.sector.t.abs() != 1 {
            return fail("sector.s/t", "must be ±1");
        }
        if self.sector.l.is_empty() {
            return fail("sector.l", "must not be empty");
        }
        let b = &self.bound;
        if !(b.r_max_scales >= 10.0) {
            return fail("bound.r_max_scales", "must be at least 10");
        }
        if b.n_quad < 2 {
            return fail("bound.n_quad", "need at least 2 panels");
        }
        if let Some(c) = self.susy.c {
            if c == 0.0 || !c.is_finite() {
                return fail("susy.c", "must be a nonzero finite real");
            }
        }
        if !(self.susy.kernel_tol >= 0.0) {
            return fail("susy.kernel_tol", "must be non-negative");
        }
        if !(self.test_state.width > 0.0) {
            return fail("test_state.width", "must be positive");
        }
        Ok(())
    }

    /// Compact canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
