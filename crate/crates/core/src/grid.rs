//! Periodic tensor-product grid with FFT-based spectral differentiation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::algebra::{C64, ZERO};
use crate::error::{invalid, CqsmError, Result};

/// Box `[−L, L)³` with `n` nodes per axis.
///
/// With `h = 2L/n`, the transverse axes use `x_i = −L + (i + ½)h`, which for
/// odd `n` are the integer multiples of `h` and symmetric under `x ↦ −x`.
/// The z axis uses `z_i = −L + i·h`, the half-integer multiples, so no node
/// sits at the origin while quarter turns about z map the lattice to itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        let g = Self { half_width, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("half_width", "must be positive"));
        }
        if self.n % 2 == 0 {
            return Err(invalid("n", "n must be odd"));
        }
        if self.n < 5 {
            return Err(invalid("n", "need at least 5 points per axis"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Coordinate of index `i` along `axis` (0, 1, 2).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let shift = if axis < 2 { 0.5 } else { 0.0 };
        -self.half_width + (i as f64 + shift) * self.spacing()
    }

    pub fn nodes(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Flat node index of `(ix, iy, iz)`.
    pub fn node_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    pub fn node_coords(&self, node: usize) -> [usize; 3] {
        let n = self.n;
        [node / (n * n), (node / n) % n, node % n]
    }

    pub fn position(&self, node: usize) -> [f64; 3] {
        let [i, j, k] = self.node_coords(node);
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    /// Gaussian `exp(−|x − c|²/(2w²))` times a fixed non-degenerate pattern over
    /// the `d` internal components, for smooth-state identity checks.
    pub fn gaussian_state(&self, d: usize, center: [f64; 3], width: f64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.nodes() * d);
        for node in 0..self.nodes() {
            let p = self.position(node);
            let r2: f64 = (0..3).map(|i| (p[i] - center[i]).powi(2)).sum();
            let g = (-r2 / (2.0 * width * width)).exp();
            for k in 0..d {
                let k = k as f64;
                out.push(C64::new(g * (1.0 + 0.1 * k), g * 0.05 * (k - 2.0)));
            }
        }
        out
    }

    /// Wavenumber of FFT bin `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let j = j as i64;
        let m = if j <= (n - 1) / 2 { j } else { j - n };
        PI * m as f64 / self.half_width
    }
}

/// A grid plus cached FFT plans.
#[derive(Clone)]
pub struct SpectralGrid {
    pub spec: GridSpec,
    k: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("spec", &self.spec).finish()
    }
}

impl SpectralGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(spec.n);
        let inverse = planner.plan_fft_inverse(spec.n);
        let k = (0..spec.n).map(|j| spec.wavenumber(j)).collect();
        Ok(Self {
            spec,
            k,
            forward,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn nodes(&self) -> usize {
        self.spec.nodes()
    }

    /// Wavevector of the Fourier node with flat index `node`.
    pub fn wavevector(&self, node: usize) -> [f64; 3] {
        let [i, j, l] = self.spec.node_coords(node);
        [self.k[i], self.k[j], self.k[l]]
    }

    fn check_len(&self, data: &[C64], d: usize) -> Result<()> {
        let expected = self.nodes() * d;
        if data.len() != expected {
            return Err(CqsmError::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(())
    }

    /// In-place 3D DFT of a field with `d` interleaved components per node.
    /// The inverse includes the `1/n³` normalization.
    pub fn fft3(&self, data: &mut [C64], d: usize, inverse: bool) {
        let n = self.n();
        debug_assert_eq!(data.len(), self.nodes() * d);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut lines = vec![ZERO; data.len()];
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        for stride in [n * n * d, n * d, d] {
            let mut bases = Vec::with_capacity(data.len() / n);
            for base in 0..data.len() {
                if (base / stride) % n == 0 {
                    bases.push(base);
                }
            }
            for (li, &base) in bases.iter().enumerate() {
                for i in 0..n {
                    lines[li * n + i] = data[base + i * stride];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for (li, &base) in bases.iter().enumerate() {
                for i in 0..n {
                    data[base + i * stride] = lines[li * n + i];
                }
            }
        }
        if inverse {
            let s = 1.0 / self.nodes() as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Applies a Fourier multiplier: `data ← F⁻¹[ symbol(k) · F[data] ]` where
    /// `symbol` acts on the `d` components at each wavevector.
    pub fn apply_multiplier(
        &self,
        data: &mut [C64],
        d: usize,
        mut symbol: impl FnMut([f64; 3], &mut [C64]),
    ) {
        self.fft3(data, d, false);
        for (node, chunk) in data.chunks_mut(d).enumerate() {
            symbol(self.wavevector(node), chunk);
        }
        self.fft3(data, d, true);
    }

    /// Spectral partial derivative `∂_axis` of a `d`-component field.
    pub fn derivative(&self, data: &[C64], d: usize, axis: usize) -> Result<Vec<C64>> {
        self.check_len(data, d)?;
        let mut out = data.to_vec();
        self.apply_multiplier(&mut out, d, |k, v| {
            let f = C64::new(0.0, k[axis]);
            v.iter_mut().for_each(|x| *x *= f);
        });
        Ok(out)
    }

    /// All three spectral partial derivatives with a single forward transform.
    pub fn gradient(&self, data: &[C64], d: usize) -> Result<[Vec<C64>; 3]> {
        self.check_len(data, d)?;
        let mut hat = data.to_vec();
        self.fft3(&mut hat, d, false);
        let out = [0usize, 1, 2].map(|axis| {
            let mut v = hat.clone();
            for (node, chunk) in v.chunks_mut(d).enumerate() {
                let f = C64::new(0.0, self.wavevector(node)[axis]);
                chunk.iter_mut().for_each(|x| *x *= f);
            }
            self.fft3(&mut v, d, true);
            v
        });
        Ok(out)
    }

    /// `−Δ` of a `d`-component field.
    pub fn neg_laplacian(&self, data: &[C64], d: usize) -> Result<Vec<C64>> {
        self.check_len(data, d)?;
        let mut out = data.to_vec();
        self.apply_multiplier(&mut out, d, |k, v| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            v.iter_mut().for_each(|x| *x *= k2);
        });
        Ok(out)
    }

    /// Discrete inner product with grid weight `h³`.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        let h = self.spec.spacing();
        crate::linalg::dot(a, b) * (h * h * h)
    }

    pub fn norm(&self, a: &[C64]) -> f64 {
        self.inner(a, a).re.sqrt()
    }
}
