//! Profile functions, iso-vector direction fields and the pointwise
//! coefficient fields `T(x)`, `U_F(x)`, `Φ_F(x)` and `V_F(x)`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{identity, kron, CMatrix, DiracAlgebra, IsoSpinTriple, C64, I};
use crate::error::{invalid, CqsmError, Result};

/// Radial samples of a user-supplied profile, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return Err(invalid(
                "custom_profile",
                "need at least two (radius, value) samples",
            ));
        }
        if radii.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("custom_profile", "samples must be finite"));
        }
        if radii[0] < 0.0 {
            return Err(invalid("custom_profile", "radii must be nonnegative"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("custom_profile", "radii must be strictly increasing"));
        }
        Ok(Self { radii, values })
    }

    /// Reads a two-column `radius,value` CSV. Lines starting with `#` and a
    /// non-numeric header row are skipped.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            invalid("custom_profile", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(invalid(
                        "custom_profile",
                        format!("line {}: expected two columns", lineno + 1),
                    ))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(r), Ok(v)) => {
                    radii.push(r);
                    values.push(v);
                }
                _ if radii.is_empty() => continue,
                _ => {
                    return Err(invalid(
                        "custom_profile",
                        format!("line {}: not a number", lineno + 1),
                    ))
                }
            }
        }
        Self::new(radii, values)
    }

    fn locate(&self, r: f64) -> Result<Option<usize>> {
        let first = self.radii[0];
        let last = *self.radii.last().unwrap();
        if r < first {
            return Err(CqsmError::OutOfRange {
                radius: r,
                min: first,
                max: last,
            });
        }
        if r >= last {
            return Ok(None);
        }
        let idx = self.radii.partition_point(|&x| x <= r);
        Ok(Some(idx - 1))
    }

    fn eval(&self, r: f64) -> Result<f64> {
        Ok(match self.locate(r)? {
            None => *self.values.last().unwrap(),
            Some(i) => {
                let t = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
        })
    }

    fn derivative(&self, r: f64) -> Result<f64> {
        Ok(match self.locate(r)? {
            None => 0.0,
            Some(i) => {
                (self.values[i + 1] - self.values[i]) / (self.radii[i + 1] - self.radii[i])
            }
        })
    }

    fn max_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

/// Shape of the radial profile `F(|x|)`; lengths are in profile units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `−π exp(−r/R)`
    ExpI { r: f64 },
    /// `−π (a₁ exp(−r/R₁) + a₂ exp(−r²/R₂²))`
    #[serde(rename = "mixed_ii")]
    MixedII { a1: f64, r1: f64, a2: f64, r2: f64 },
    /// `−π (1 − r/√(λ² + r²))`
    #[serde(rename = "rational_iii")]
    RationalIII { lambda: f64 },
    CustomRadial { table: RadialTable },
    /// `amplitude · base(r)`
    AmplitudeScaled {
        base: Box<ProfileKind>,
        amplitude: f64,
    },
}

impl ProfileKind {
    fn eval(&self, r: f64) -> Result<f64> {
        Ok(match self {
            ProfileKind::ExpI { r: big_r } => -PI * (-r / big_r).exp(),
            ProfileKind::MixedII { a1, r1, a2, r2 } => {
                -PI * (a1 * (-r / r1).exp() + a2 * (-(r * r) / (r2 * r2)).exp())
            }
            ProfileKind::RationalIII { lambda } => {
                -PI * (1.0 - r / (lambda * lambda + r * r).sqrt())
            }
            ProfileKind::CustomRadial { table } => table.eval(r)?,
            ProfileKind::AmplitudeScaled { base, amplitude } => {
                if *amplitude == 0.0 {
                    0.0
                } else {
                    amplitude * base.eval(r)?
                }
            }
        })
    }

    fn derivative(&self, r: f64) -> Result<f64> {
        Ok(match self {
            ProfileKind::ExpI { r: big_r } => PI / big_r * (-r / big_r).exp(),
            ProfileKind::MixedII { a1, r1, a2, r2 } => {
                PI * (a1 / r1 * (-r / r1).exp()
                    + a2 * 2.0 * r / (r2 * r2) * (-(r * r) / (r2 * r2)).exp())
            }
            ProfileKind::RationalIII { lambda } => {
                let l2 = lambda * lambda;
                PI * l2 / (l2 + r * r).powf(1.5)
            }
            ProfileKind::CustomRadial { table } => table.derivative(r)?,
            ProfileKind::AmplitudeScaled { base, amplitude } => {
                if *amplitude == 0.0 {
                    0.0
                } else {
                    amplitude * base.derivative(r)?
                }
            }
        })
    }

    fn scale(&self) -> f64 {
        match self {
            ProfileKind::ExpI { r } => *r,
            ProfileKind::MixedII { r1, r2, .. } => r1.max(*r2),
            ProfileKind::RationalIII { lambda } => *lambda,
            ProfileKind::CustomRadial { table } => table.max_radius() / 10.0,
            ProfileKind::AmplitudeScaled { base, .. } => base.scale(),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be positive and finite"))
            }
        };
        match self {
            ProfileKind::ExpI { r } => positive("r", *r),
            ProfileKind::MixedII { a1, r1, a2, r2 } => {
                positive("r1", *r1)?;
                positive("r2", *r2)?;
                if !a1.is_finite() || !a2.is_finite() {
                    return Err(invalid("a1/a2", "must be finite"));
                }
                Ok(())
            }
            ProfileKind::RationalIII { lambda } => positive("lambda", *lambda),
            ProfileKind::CustomRadial { .. } => Ok(()),
            ProfileKind::AmplitudeScaled { base, amplitude } => {
                if !amplitude.is_finite() {
                    return Err(invalid("amplitude", "must be finite"));
                }
                base.validate()
            }
        }
    }
}

/// Profile function plus the length unit (grid length per profile unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default = "one")]
    pub length_unit: f64,
}

fn one() -> f64 {
    1.0
}

impl ProfileConfig {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            length_unit: 1.0,
        })
    }

    pub fn exp_i(r: f64) -> Self {
        Self::new(ProfileKind::ExpI { r }).expect("valid ExpI radius")
    }

    /// Profile (II) with `a₁ = 0.65, R₁ = 0.58, a₂ = 0.35, R₂ = √0.3`.
    pub fn mixed_ii() -> Self {
        Self::new(ProfileKind::MixedII {
            a1: 0.65,
            r1: 0.58,
            a2: 0.35,
            r2: 0.3f64.sqrt(),
        })
        .expect("valid MixedII parameters")
    }

    /// Profile (III) with `λ = √0.4`.
    pub fn rational_iii() -> Self {
        Self::new(ProfileKind::RationalIII {
            lambda: 0.4f64.sqrt(),
        })
        .expect("valid RationalIII parameter")
    }

    pub fn amplitude_scaled(base: ProfileConfig, amplitude: f64) -> Self {
        Self {
            kind: ProfileKind::AmplitudeScaled {
                base: Box::new(base.kind),
                amplitude,
            },
            length_unit: base.length_unit,
        }
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self::amplitude_scaled(Self::exp_i(1.0), 0.0)
    }

    pub fn with_length_unit(mut self, unit: f64) -> Result<Self> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(invalid("length_unit", "must be positive"));
        }
        self.length_unit = unit;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_unit > 0.0 && self.length_unit.is_finite()) {
            return Err(invalid("length_unit", "must be positive"));
        }
        self.kind.validate()
    }

    /// Characteristic length in grid units.
    pub fn scale(&self) -> f64 {
        self.kind.scale() * self.length_unit
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ProfileKind::AmplitudeScaled { amplitude, .. } if amplitude == 0.0)
    }

    /// `F` at `|x| = radius`.
    pub fn eval(&self, radius: f64) -> Result<f64> {
        if !(radius >= 0.0) {
            return Err(invalid("radius", "must be nonnegative"));
        }
        self.kind.eval(radius / self.length_unit)
    }

    /// `F′(r)`.
    pub fn derivative(&self, radius: f64) -> Result<f64> {
        if !(radius >= 0.0) {
            return Err(invalid("radius", "must be nonnegative"));
        }
        Ok(self.kind.derivative(radius / self.length_unit)? / self.length_unit)
    }

    /// `∇F(x) = F′(|x|) x/|x|`.
    pub fn grad(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let r = norm3(x);
        if r == 0.0 {
            return Err(CqsmError::SingularPoint);
        }
        let d = self.derivative(r)? / r;
        Ok([d * x[0], d * x[1], d * x[2]])
    }
}

/// Polar angle of the iso-vector as a function of cylindrical `(r, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ThetaField {
    /// `Θ = arccos(z/√(r² + z²))`
    Polar,
    /// Bilinear interpolation on a rectangular `(r, z)` table, clamped at the edges.
    Tabulated {
        r: Vec<f64>,
        z: Vec<f64>,
        /// Row-major `values[i_r * z.len() + i_z]`.
        values: Vec<f64>,
    },
}

impl ThetaField {
    pub fn tabulate(r: Vec<f64>, z: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if r.len() < 2 || z.len() < 2 {
            return Err(invalid("theta", "table needs at least 2×2 samples"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) || z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("theta", "table axes must be strictly increasing"));
        }
        let mut values = Vec::with_capacity(r.len() * z.len());
        for &ri in &r {
            for &zj in &z {
                values.push(f(ri, zj));
            }
        }
        Ok(ThetaField::Tabulated { r, z, values })
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        match self {
            ThetaField::Polar => r.atan2(z),
            ThetaField::Tabulated { r: rs, z: zs, values } => {
                let (i, tr) = bracket(rs, r);
                let (j, tz) = bracket(zs, z);
                let nz = zs.len();
                let v = |a: usize, b: usize| values[a * nz + b];
                (1.0 - tr) * ((1.0 - tz) * v(i, j) + tz * v(i, j + 1))
                    + tr * ((1.0 - tz) * v(i + 1, j) + tz * v(i + 1, j + 1))
            }
        }
    }

    fn is_polar(&self) -> bool {
        matches!(self, ThetaField::Polar)
    }
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

/// Iso-vector field `n(x)` with `|n| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Direction {
    /// `(sinΘ cos mθ, sinΘ sin mθ, cosΘ)`.
    Hedgehog {
        theta: ThetaField,
        m: u32,
        #[serde(default)]
        scale_invariant: bool,
    },
    Constant { n: [f64; 3] },
    /// `(f, Cf, g)` with `f = sinΘ/√(1+C²)`, `g = cosΘ`; the family admitting
    /// the constant grading `ξ = (CT₁ − T₂)/√(1+C²)`.
    PlanarLocked { c: f64, theta: ThetaField },
}

impl Direction {
    pub fn polar_hedgehog(m: u32) -> Self {
        Direction::Hedgehog {
            theta: ThetaField::Polar,
            m,
            scale_invariant: true,
        }
    }

    pub fn constant(n: [f64; 3]) -> Result<Self> {
        let len = norm3(n);
        if !(len > 0.0 && len.is_finite()) {
            return Err(invalid("direction", "constant direction must be nonzero"));
        }
        Ok(Direction::Constant {
            n: [n[0] / len, n[1] / len, n[2] / len],
        })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Direction::Constant { .. })
    }

    pub fn eval(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let angular = |theta: &ThetaField| -> Result<(f64, f64, f64)> {
            let rho = x[0].hypot(x[1]);
            if rho == 0.0 && x[2] == 0.0 {
                return Err(CqsmError::SingularPoint);
            }
            let th = theta.eval(rho, x[2]);
            Ok((th.sin(), th.cos(), x[1].atan2(x[0])))
        };
        match self {
            Direction::Constant { n } => Ok(*n),
            Direction::Hedgehog { theta, m, .. } => {
                let (s, c, phi) = angular(theta)?;
                let mphi = *m as f64 * phi;
                Ok([s * mphi.cos(), s * mphi.sin(), c])
            }
            Direction::PlanarLocked { c: cc, theta } => {
                let (s, c, _) = angular(theta)?;
                let f = s / (1.0 + cc * cc).sqrt();
                Ok([f, cc * f, c])
            }
        }
    }

    /// Checks the declared scale invariance `Θ(2r, 2z) = Θ(r, z)` and `|n| = 1`
    /// on a fixed sample set.
    pub fn validate(&self) -> Result<()> {
        if let Direction::Hedgehog {
            theta,
            m,
            scale_invariant,
        } = self
        {
            if *m == 0 {
                return Err(invalid("m", "winding number must be positive"));
            }
            if *scale_invariant {
                for (r, z) in sample_rz() {
                    let d = (theta.eval(2.0 * r, 2.0 * z) - theta.eval(r, z)).abs();
                    if d > 1e-12 {
                        return Err(invalid(
                            "scale_invariant",
                            format!("Θ(2r,2z) differs from Θ(r,z) by {d:.3e} at ({r}, {z})"),
                        ));
                    }
                }
            }
        }
        if let Direction::PlanarLocked { c, .. } = self {
            if *c == 0.0 || !c.is_finite() {
                return Err(invalid("c", "must be a nonzero finite real"));
            }
        }
        Ok(())
    }

    /// `Θ(εr, εz) = Θ(r, z)` holds identically (or the field is constant).
    pub fn is_scale_invariant(&self) -> bool {
        match self {
            Direction::Constant { .. } => true,
            Direction::Hedgehog {
                theta,
                scale_invariant,
                ..
            } => theta.is_polar() || *scale_invariant,
            Direction::PlanarLocked { theta, .. } => theta.is_polar(),
        }
    }

    /// Closed form of `Σ_j |∂_j n|²` where available.
    fn gradient_norm_sq(&self, x: [f64; 3]) -> Option<f64> {
        match self {
            Direction::Constant { .. } => Some(0.0),
            Direction::Hedgehog {
                theta: ThetaField::Polar,
                m,
                ..
            } => {
                let m = *m as f64;
                Some((1.0 + m * m) / dot3(x, x))
            }
            _ => None,
        }
    }
}

fn sample_rz() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &r in &[0.05, 0.3, 0.7, 1.3, 2.9] {
        for &z in &[-2.1, -0.4, 0.0, 0.6, 1.7] {
            out.push((r, z));
        }
    }
    out
}

pub(crate) fn norm3(x: [f64; 3]) -> f64 {
    dot3(x, x).sqrt()
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Profile, iso-spin triple, direction field and mass: everything needed to
/// evaluate the coefficient fields of the Hamiltonian.
///
/// `dilation` implements `F_ε(x) = F(εx)` for the scaled family; the direction
/// field `T(x)` is not dilated.
#[derive(Debug, Clone)]
pub struct MassField {
    pub profile: ProfileConfig,
    pub triple: IsoSpinTriple,
    pub direction: Direction,
    pub mass: f64,
    dilation: f64,
}

impl MassField {
    pub fn new(
        profile: ProfileConfig,
        triple: IsoSpinTriple,
        direction: Direction,
        mass: f64,
    ) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("mass", "must be positive"));
        }
        profile.validate()?;
        direction.validate()?;
        Ok(Self {
            profile,
            triple,
            direction,
            mass,
            dilation: 1.0,
        })
    }

    /// The same field with profile `F(εx)`.
    pub fn dilated(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", "must be positive"));
        }
        let mut out = self.clone();
        out.dilation = self.dilation * eps;
        Ok(out)
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    pub fn dim_k(&self) -> usize {
        self.triple.dim_k()
    }

    /// Internal dimension `4·dim 𝒦`.
    pub fn internal_dim(&self) -> usize {
        4 * self.dim_k()
    }

    fn scaled(&self, x: [f64; 3]) -> [f64; 3] {
        let e = self.dilation;
        [e * x[0], e * x[1], e * x[2]]
    }

    /// `F(εx)`.
    pub fn profile_at(&self, x: [f64; 3]) -> Result<f64> {
        self.profile.eval(norm3(self.scaled(x)))
    }

    /// `∇[F(εx)]`.
    pub fn profile_grad(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let g = self.profile.grad(self.scaled(x))?;
        let e = self.dilation;
        Ok([e * g[0], e * g[1], e * g[2]])
    }

    /// `n(x)`.
    pub fn direction_at(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        self.direction.eval(x)
    }

    /// `T(x) = n(x)·T`.
    pub fn eval_t(&self, x: [f64; 3]) -> Result<CMatrix> {
        Ok(self.triple.dot(self.direction_at(x)?))
    }

    /// `U_F = cos F ⊗ I + i sin F γ₅ ⊗ T`.
    pub fn eval_uf(&self, alg: &DiracAlgebra, x: [f64; 3]) -> Result<CMatrix> {
        let f = self.profile_at(x)?;
        let t = self.eval_t(x)?;
        Ok(uf_matrix(alg, f, &t))
    }

    /// `Φ_F = cos F ⊗ I + i sin F ⊗ T` on `ℂ² ⊗ 𝒦`.
    pub fn eval_phif(&self, x: [f64; 3]) -> Result<CMatrix> {
        let f = self.profile_at(x)?;
        let t = self.eval_t(x)?;
        let id2 = identity(2);
        Ok(identity(2 * self.dim_k()) * C64::new(f.cos(), 0.0)
            + kron(&id2, &t) * (I * f.sin()))
    }

    /// Scalar `s(x)` with `Σ_j (D_jT(x))² = s(x)·I`, or a hypothesis error if
    /// the sum is not scalar.
    pub fn derivative_square_scalar(&self, x: [f64; 3]) -> Result<f64> {
        if let Some(s) = self.direction.gradient_norm_sq(x) {
            if self.triple_is_clifford() {
                return Ok(s);
            }
        }
        let r = norm3(x);
        if r == 0.0 {
            return Err(CqsmError::SingularPoint);
        }
        let h = 1e-5 * r.max(1e-3);
        let dk = self.dim_k();
        let mut sum = CMatrix::zeros(dk, dk);
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let d = (self.eval_t(xp)? - self.eval_t(xm)?) * C64::new(0.5 / h, 0.0);
            sum += &d * &d;
        }
        let scalar = sum.trace().re / dk as f64;
        let defect = crate::algebra::max_abs(&(&sum - identity(dk) * C64::new(scalar, 0.0)));
        if defect > 1e-10 * scalar.abs().max(1.0) {
            return Err(CqsmError::HypothesisViolation(format!(
                "Σ_j (D_jT)² is not scalar at {x:?} (defect {defect:.3e})"
            )));
        }
        Ok(scalar)
    }

    fn triple_is_clifford(&self) -> bool {
        crate::algebra::verify_triple(&self.triple, 1e-12).is_empty()
    }

    /// `V_F = √(|∇F|² + Σ_j (D_jT)² sin²F)`.
    pub fn eval_vf(&self, x: [f64; 3]) -> Result<f64> {
        let g = self.profile_grad(x)?;
        let f = self.profile_at(x)?;
        let s = self.derivative_square_scalar(x)?;
        Ok((dot3(g, g) + s * f.sin().powi(2)).sqrt())
    }

    /// `V_F` as a function of `|x|` when the configuration is rotation
    /// invariant: radial profile with a constant direction or a polar hedgehog.
    pub fn radial_vf(&self) -> Option<impl Fn(f64) -> f64 + Sync + '_> {
        let coeff = match &self.direction {
            Direction::Constant { .. } => 0.0,
            Direction::Hedgehog {
                theta: ThetaField::Polar,
                m,
                ..
            } if self.triple_is_clifford() => 1.0 + (*m as f64).powi(2),
            _ => return None,
        };
        if let ProfileKind::CustomRadial { .. } = self.profile.kind {
            return None;
        }
        let e = self.dilation;
        Some(move |r: f64| {
            let rs = e * r;
            let f = self.profile.eval(rs).unwrap_or(0.0);
            let fp = e * self.profile.derivative(rs).unwrap_or(0.0);
            let ang = if r > 0.0 {
                coeff / (r * r) * f.sin().powi(2)
            } else {
                // sin F(r)/r → F′(0)·cos F(0) as r → 0 when sin F(0) = 0.
                coeff * (fp * f.cos()).powi(2)
            };
            (fp * fp + ang).sqrt()
        })
    }
}

/// `cos F ⊗ I + i sin F γ₅ ⊗ T`.
pub fn uf_matrix(alg: &DiracAlgebra, f: f64, t: &CMatrix) -> CMatrix {
    let dk = t.nrows();
    identity(4 * dk) * C64::new(f.cos(), 0.0) + kron(&alg.gamma5, t) * (I * f.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{max_abs, pauli_triple, weyl_matrices};
    use approx::assert_relative_eq;

    fn hedgehog(profile: ProfileConfig) -> MassField {
        MassField::new(profile, pauli_triple(), Direction::polar_hedgehog(1), 1.0).unwrap()
    }

    #[test]
    fn exp_i_values() {
        let p = ProfileConfig::exp_i(0.55);
        assert_eq!(p.eval(0.0).unwrap(), -PI);
        assert_relative_eq!(p.eval(0.55).unwrap(), -PI / 1f64.exp(), epsilon = 1e-15);
        assert_relative_eq!(p.eval(0.55).unwrap(), -1.155727, epsilon = 1e-6);
    }

    #[test]
    fn builtin_boundary_values() {
        for p in [
            ProfileConfig::exp_i(0.55),
            ProfileConfig::mixed_ii(),
            ProfileConfig::rational_iii(),
        ] {
            assert_relative_eq!(p.eval(0.0).unwrap(), -PI, epsilon = 1e-14);
            let far = 10.0 * p.scale();
            if !matches!(p.kind, ProfileKind::RationalIII { .. }) {
                assert!(p.eval(far).unwrap().abs() < 0.01 * PI);
            }
        }
        let lam = 0.4f64.sqrt();
        let p = ProfileConfig::rational_iii();
        assert!(p.eval(100.0 * lam).unwrap().abs() < 0.01 * PI);
    }

    #[test]
    fn gradient_matches_closed_form() {
        let p = ProfileConfig::exp_i(0.55);
        let g = p.grad([0.55, 0.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], PI / 0.55 / 1f64.exp(), epsilon = 1e-14);
        assert_eq!(g[1], 0.0);
        assert!(p.grad([0.0; 3]).is_err());
        let z = ProfileConfig::amplitude_scaled(p, 0.0);
        assert_eq!(z.grad([0.3, -0.2, 1.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-4;
        for p in [
            ProfileConfig::exp_i(0.55),
            ProfileConfig::mixed_ii(),
            ProfileConfig::rational_iii(),
        ] {
            let mut r = 0.1;
            while r <= 5.0 {
                let fd = (p.eval(r + h).unwrap() - p.eval(r - h).unwrap()) / (2.0 * h);
                let an = p.derivative(r).unwrap();
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1e-12),
                    "{:?} r={r}: {fd} vs {an}",
                    p.kind
                );
                r += 0.1;
            }
        }
    }

    #[test]
    fn gradient_is_rotation_covariant() {
        let p = ProfileConfig::mixed_ii();
        let x = [0.3, -0.7, 0.4];
        // 90° about z: (x, y) -> (-y, x)
        let rx = [-x[1], x[0], x[2]];
        let g = p.grad(x).unwrap();
        let gr = p.grad(rx).unwrap();
        assert_relative_eq!(gr[0], -g[1], epsilon = 1e-15);
        assert_relative_eq!(gr[1], g[0], epsilon = 1e-15);
        assert_relative_eq!(gr[2], g[2], epsilon = 1e-15);
    }

    #[test]
    fn custom_table_interpolates_and_extrapolates() {
        let t = RadialTable::new(vec![0.0, 1.0, 2.0], vec![-3.0, -1.0, 0.0]).unwrap();
        let p = ProfileConfig::new(ProfileKind::CustomRadial { table: t }).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), -2.0);
        assert_eq!(p.eval(7.0).unwrap(), 0.0);
        assert_eq!(p.derivative(1.5).unwrap(), 1.0);
        let t = RadialTable::new(vec![0.5, 1.0], vec![-3.0, -1.0]).unwrap();
        let p = ProfileConfig::new(ProfileKind::CustomRadial { table: t }).unwrap();
        assert!(matches!(p.eval(0.1), Err(CqsmError::OutOfRange { .. })));
        assert!(RadialTable::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn t_on_positive_z_axis_is_tau3() {
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        let t = mf.eval_t([0.0, 0.0, 1.0]).unwrap();
        assert!(max_abs(&(t - &pauli_triple().t[2])) < 1e-15);
        assert!(matches!(mf.eval_t([0.0; 3]), Err(CqsmError::SingularPoint)));
        let cst = MassField::new(
            ProfileConfig::exp_i(0.55),
            pauli_triple(),
            Direction::constant([0.0, 0.0, 1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let t = cst.eval_t([0.4, 1.0, -2.0]).unwrap();
        assert!(max_abs(&(t - &pauli_triple().t[2])) < 1e-15);
    }

    #[test]
    fn phif_on_z_axis() {
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        let x = [0.0, 0.0, 0.8];
        let f = mf.profile_at(x).unwrap();
        let phi = mf.eval_phif(x).unwrap();
        let expected = identity(4) * C64::new(f.cos(), 0.0)
            + kron(&identity(2), &pauli_triple().t[2]) * (I * f.sin());
        assert!(max_abs(&(phi - expected)) < 1e-15);
    }

    #[test]
    fn phif_block_form_reproduces_mass_term() {
        // M(β⊗I)U_F = [[0, MΦ_F*], [MΦ_F, 0]] in the Weyl representation.
        let alg = weyl_matrices();
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        let x = [0.31, -0.12, 0.47];
        let mass = kron(&alg.beta, &identity(2)) * mf.eval_uf(&alg, x).unwrap();
        let phi = mf.eval_phif(x).unwrap();
        let mut block = CMatrix::zeros(8, 8);
        block.view_mut((0, 4), (4, 4)).copy_from(&phi.adjoint());
        block.view_mut((4, 0), (4, 4)).copy_from(&phi);
        assert!(max_abs(&(mass - block)) < 1e-15);
    }

    #[test]
    fn uf_far_field_is_identity() {
        let alg = weyl_matrices();
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        let u = mf.eval_uf(&alg, [30.0, 1.0, 2.0]).unwrap();
        assert!(max_abs(&(u - identity(8))) < 1e-20_f64.max(1e-15));
    }

    #[test]
    fn vf_constant_direction_is_gradient_norm() {
        let mf = MassField::new(
            ProfileConfig::exp_i(0.55),
            pauli_triple(),
            Direction::constant([0.0, 0.0, 1.0]).unwrap(),
            1.0,
        )
        .unwrap();
        let r = 0.9;
        assert_relative_eq!(
            mf.eval_vf([r, 0.0, 0.0]).unwrap(),
            mf.profile.derivative(r).unwrap().abs(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn vf_hedgehog_closed_form() {
        let big_r = 0.55;
        let mf = hedgehog(ProfileConfig::exp_i(big_r));
        let e = 1f64.exp();
        let expected =
            ((PI / big_r).powi(2) / (e * e) + 2.0 / (big_r * big_r) * (PI / e).sin().powi(2))
                .sqrt();
        let x = [big_r / 3f64.sqrt(); 3];
        assert_relative_eq!(mf.eval_vf(x).unwrap(), expected, epsilon = 1e-13);
        let radial = mf.radial_vf().unwrap();
        assert_relative_eq!(radial(big_r), expected, epsilon = 1e-13);
    }

    #[test]
    fn hedgehog_derivative_square_matches_finite_differences() {
        // Finite differences of eval_T against the closed form (2/|x|²)·I.
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        for x in [[0.3, 0.2, -0.5], [1.1, -0.4, 0.9], [-2.0, 0.5, 0.1]] {
            let r2 = dot3(x, x);
            let h = 1e-4;
            let mut sum = CMatrix::zeros(2, 2);
            for j in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let d = (mf.eval_t(xp).unwrap() - mf.eval_t(xm).unwrap())
                    * C64::new(0.5 / h, 0.0);
                sum += &d * &d;
            }
            let expected = identity(2) * C64::new(2.0 / r2, 0.0);
            assert!(max_abs(&(sum - expected)) <= 1e-6 * 2.0 / r2);
        }
    }

    #[test]
    fn vf_hypothesis_violation_detected() {
        // T₃ replaced by the identity: the cross terms no longer cancel.
        let t = pauli_triple();
        let bad = IsoSpinTriple::new(t.t[0].clone(), t.t[1].clone(), identity(2)).unwrap();
        let mf = MassField::new(
            ProfileConfig::exp_i(0.55),
            bad,
            Direction::polar_hedgehog(1),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            mf.eval_vf([0.3, 0.4, 0.5]),
            Err(CqsmError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn vf_at_sin_zero_point() {
        // F = −π on [0, 1], so sin F = 0 at r = 0.5.
        let t = RadialTable::new(vec![0.0, 1.0, 2.0, 3.0], vec![-PI, -PI, -0.5, 0.0]).unwrap();
        let p = ProfileConfig::new(ProfileKind::CustomRadial { table: t }).unwrap();
        let mf = MassField::new(p, pauli_triple(), Direction::polar_hedgehog(1), 1.0).unwrap();
        let x = [0.5, 0.0, 0.0];
        let g = mf.profile_grad(x).unwrap();
        assert_relative_eq!(mf.eval_vf(x).unwrap(), norm3(g), epsilon = 1e-12);
    }

    #[test]
    fn amplitude_shrinks_vf_monotonically() {
        // Away from the core, where |F| < π/2 for every amplitude; near the origin
        // V_F ≈ √2·|a|π/r is unbounded for every a ≠ 0.
        let xs = [[0.4, 0.2, 0.05], [0.5, -0.3, 0.2], [1.5, 0.0, -1.0], [0.1, 2.0, 0.3]];
        let mut sups = Vec::new();
        for a in [1.0, 0.5, 0.1, 0.01] {
            let mf = hedgehog(ProfileConfig::amplitude_scaled(ProfileConfig::exp_i(0.55), a));
            sups.push(xs.iter().map(|&x| mf.eval_vf(x).unwrap()).fold(0.0, f64::max));
        }
        assert!(sups.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn scale_invariance_flag_is_checked() {
        let bad = ThetaField::tabulate(
            (0..40).map(|i| i as f64 * 0.2).collect(),
            (0..40).map(|i| -4.0 + i as f64 * 0.2).collect(),
            |r, z| r.atan2(z + 0.5),
        )
        .unwrap();
        let d = Direction::Hedgehog {
            theta: bad,
            m: 1,
            scale_invariant: true,
        };
        assert!(d.validate().is_err());
        assert!(Direction::polar_hedgehog(2).validate().is_ok());
    }

    #[test]
    fn dilation_rescales_gradient() {
        let mf = hedgehog(ProfileConfig::exp_i(0.55));
        let half = mf.dilated(0.5).unwrap();
        let x = [0.4, 0.1, -0.3];
        let x2 = [0.2, 0.05, -0.15];
        assert_relative_eq!(
            half.profile_at(x).unwrap(),
            mf.profile_at(x2).unwrap(),
            epsilon = 1e-15
        );
        let g = half.profile_grad(x).unwrap();
        let g2 = mf.profile_grad(x2).unwrap();
        assert_relative_eq!(g[0], 0.5 * g2[0], epsilon = 1e-15);
        // Polar hedgehog is scale invariant.
        assert!(max_abs(&(half.eval_t(x).unwrap() - mf.eval_t(x).unwrap())) < 1e-15);
        assert!(mf.dilated(0.0).is_err());
    }
}
