//! Complex vector helpers and a Hermitian spectral factorization.
//!
//! The beamformer update repeatedly solves (z·I + A)·x = b for the same
//! positive semidefinite A while a scalar z is being searched. Factoring A
//! once as U·diag(λ)·U^H turns every candidate z into an O(n) evaluation,
//! which is what makes the per-transmitter power search cheap.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Σ conj(h_i)·f_i, the inner product with conjugation on the first argument.
pub fn inner(h: &[Complex64], f: &[Complex64]) -> Complex64 {
    debug_assert_eq!(h.len(), f.len());
    h.iter().zip(f).map(|(a, b)| a.conj() * b).sum()
}

/// Squared Euclidean norm.
pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// y += alpha * x
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Spectral factorization of a Hermitian positive semidefinite matrix.
pub struct HermitianFactor {
    dim: usize,
    /// Eigenvalues, clamped below at zero (A is a sum of outer products, so
    /// tiny negative values are rounding noise).
    values: Vec<f64>,
    /// Column-major eigenvectors, `dim * dim` entries.
    vectors: Vec<Complex64>,
}

impl HermitianFactor {
    /// Factor the matrix whose (row, col) entry is `entry(row, col)`.
    /// Only the entries are read; the caller must supply a Hermitian map.
    pub fn new(dim: usize, entry: impl Fn(usize, usize) -> Complex64) -> Self {
        let m = DMatrix::<Complex64>::from_fn(dim, dim, |r, c| entry(r, c));
        let eig = SymmetricEigen::new(m);
        let values = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let mut vectors = vec![Complex64::new(0.0, 0.0); dim * dim];
        for c in 0..dim {
            for r in 0..dim {
                vectors[c * dim + r] = eig.eigenvectors[(r, c)];
            }
        }
        Self { dim, values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues in factorization order (unsorted), clamped at zero.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvector matching `values()[c]`.
    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.vectors[c * self.dim..(c + 1) * self.dim]
    }

    /// U^H · b, the coordinates of b in the eigenbasis.
    pub fn project(&self, b: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim).map(|c| inner(self.column(c), b)).collect()
    }

    /// Denominators λ_i + shift, with a uniform ridge added when the shifted
    /// matrix is numerically singular.
    fn denominators(&self, shift: f64, ridge: f64) -> Vec<f64> {
        let singular = self.values.iter().any(|&l| l + shift < ridge);
        self.values
            .iter()
            .map(|&l| l + shift + if singular { ridge } else { 0.0 })
            .collect()
    }

    /// Solve (shift·I + A)·x = b given `proj = project(b)`.
    pub fn solve_projected(&self, proj: &[Complex64], shift: f64, ridge: f64) -> Vec<Complex64> {
        let den = self.denominators(shift, ridge);
        let mut x = vec![Complex64::new(0.0, 0.0); self.dim];
        for c in 0..self.dim {
            axpy(proj[c] / den[c], self.column(c), &mut x);
        }
        x
    }

    /// ‖(shift·I + A)^{-1} b‖² given `proj = project(b)`, without forming x.
    pub fn solution_norm_sq(&self, proj: &[Complex64], shift: f64, ridge: f64) -> f64 {
        let den = self.denominators(shift, ridge);
        proj.iter()
            .zip(&den)
            .map(|(p, d)| p.norm_sqr() / (d * d))
            .sum()
    }
}

/// Test-only helpers shared across the crate's unit tests.
#[cfg(test)]
pub(crate) mod testutil {
    use super::Complex64;

    /// Gauss-Jordan inverse with partial pivoting, kept independent of the
    /// spectral path on purpose so the two can cross-check each other.
    pub(crate) fn dense_inverse(dim: usize, a: &[Complex64]) -> Vec<Complex64> {
        let mut m = a.to_vec(); // row-major dim x dim
        let mut inv = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            inv[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        for col in 0..dim {
            let pivot_row = (col..dim)
                .max_by(|&r1, &r2| {
                    m[r1 * dim + col]
                        .norm()
                        .partial_cmp(&m[r2 * dim + col].norm())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..dim {
                    m.swap(col * dim + j, pivot_row * dim + j);
                    inv.swap(col * dim + j, pivot_row * dim + j);
                }
            }
            let pivot = m[col * dim + col];
            assert!(pivot.norm() > 1e-300, "singular matrix in test oracle");
            for j in 0..dim {
                m[col * dim + j] /= pivot;
                inv[col * dim + j] /= pivot;
            }
            for r in 0..dim {
                if r != col {
                    let factor = m[r * dim + col];
                    for j in 0..dim {
                        let mcj = m[col * dim + j];
                        let icj = inv[col * dim + j];
                        m[r * dim + j] -= factor * mcj;
                        inv[r * dim + j] -= factor * icj;
                    }
                }
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::dense_inverse;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    const TOL: f64 = 1e-10;

    fn rand_c(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    }

    fn random_psd(dim: usize, rank: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        for _ in 0..rank {
            let v: Vec<Complex64> = (0..dim).map(|_| rand_c(rng)).collect();
            for r in 0..dim {
                for c in 0..dim {
                    a[r * dim + c] += v[r] * v[c].conj();
                }
            }
        }
        a
    }

    #[test]
    fn spectral_solve_matches_dense_inverse() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for dim in [2usize, 4, 8] {
            for _ in 0..10 {
                let a = random_psd(dim, dim + 1, &mut rng);
                let shift = 0.3 + rng.gen::<f64>();
                let b: Vec<Complex64> = (0..dim).map(|_| rand_c(&mut rng)).collect();

                let factor = HermitianFactor::new(dim, |r, c| a[r * dim + c]);
                let proj = factor.project(&b);
                let x = factor.solve_projected(&proj, shift, 1e-12);

                let mut shifted = a.clone();
                for i in 0..dim {
                    shifted[i * dim + i] += Complex64::new(shift, 0.0);
                }
                let inv = dense_inverse(dim, &shifted);
                for r in 0..dim {
                    let want: Complex64 = (0..dim).map(|c| inv[r * dim + c] * b[c]).sum();
                    assert!((want - x[r]).norm() < TOL, "row {r}: {want} vs {}", x[r]);
                }
                let nsq = factor.solution_norm_sq(&proj, shift, 1e-12);
                assert!((nsq - norm_sq(&x)).abs() < TOL * (1.0 + nsq));
            }
        }
    }

    #[test]
    fn singular_system_gets_ridge() {
        // rank-0 matrix at zero shift: solution is b / ridge
        let factor = HermitianFactor::new(3, |_, _| Complex64::new(0.0, 0.0));
        let b = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 1.0),
        ];
        let proj = factor.project(&b);
        let x = factor.solve_projected(&proj, 0.0, 1e-12);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi / 1e-12).norm() < 1e-3 * xi.norm());
        }
    }

    #[test]
    fn inner_product_conjugates_first_argument() {
        let h = vec![Complex64::new(0.0, 1.0)];
        let f = vec![Complex64::new(0.0, 1.0)];
        let p = inner(&h, &f);
        assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
