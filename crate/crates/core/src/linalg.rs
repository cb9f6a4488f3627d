//! Matrix-free operator interface and dense-vector helpers.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::algebra::{CMatrix, C64, ZERO};

/// A linear map on `ℂ^dim` applied without materializing a matrix.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        (**self).apply_into(x, y)
    }
}

/// `A²`.
pub struct Squared<'a, A: ?Sized>(pub &'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Squared<'_, A> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let t = self.0.apply(x);
        self.0.apply_into(&t, y);
    }
}

/// `B·A·C` for pointwise-invertible pairs such as `X_F H X_F⁻¹`.
pub struct Sandwich<'a, L: ?Sized, A: ?Sized, R: ?Sized> {
    pub left: &'a L,
    pub middle: &'a A,
    pub right: &'a R,
}

impl<L, A, R> LinearOperator for Sandwich<'_, L, A, R>
where
    L: LinearOperator + ?Sized,
    A: LinearOperator + ?Sized,
    R: LinearOperator + ?Sized,
{
    fn dim(&self) -> usize {
        self.middle.dim()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let t = self.right.apply(x);
        let u = self.middle.apply(&t);
        self.left.apply_into(&u, y);
    }
}

/// A dense matrix viewed as an operator.
impl LinearOperator for CMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for (j, xj) in x.iter().enumerate() {
                s += self[(i, j)] * xj;
            }
            *yi = s;
        }
    }
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `y ← y + α x`.
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Normalizes in place and returns the previous norm.
pub fn normalize(x: &mut [C64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), x);
    }
    n
}

/// Entries with independent standard-normal real and imaginary parts.
pub fn random_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// `|⟨φ, Aψ⟩ − ⟨Aφ, ψ⟩| / (‖φ‖‖ψ‖)`.
pub fn self_adjointness_defect<A: LinearOperator + ?Sized>(op: &A, phi: &[C64], psi: &[C64]) -> f64 {
    let lhs = dot(phi, &op.apply(psi));
    let rhs = dot(&op.apply(phi), psi);
    (lhs - rhs).norm() / (norm(phi) * norm(psi))
}

/// Materializes an operator column by column.
pub fn to_dense<A: LinearOperator + ?Sized>(op: &A) -> CMatrix {
    let n = op.dim();
    let mut m = CMatrix::zeros(n, n);
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for j in 0..n {
        e[j] = C64::new(1.0, 0.0);
        op.apply_into(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = ZERO;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_operator_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = CMatrix::from_fn(5, 5, |i, j| C64::new((i * 3 + j) as f64, i as f64 - j as f64));
        let d = to_dense(&m);
        assert_eq!(d, m);
        let x = random_vector(5, &mut rng);
        let sq = Squared(&m).apply(&x);
        let direct = (&m * &m).apply(&x);
        assert!(norm(&sub(&sq, &direct)) < 1e-10);
    }

    #[test]
    fn normal_samples_have_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_vector(200_000, &mut rng);
        let var = v.iter().map(|z| z.re * z.re).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
    }
}
