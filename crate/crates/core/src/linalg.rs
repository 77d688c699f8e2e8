//! Small dense helpers shared by the analysis modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Smallest eigenvalue of a symmetric matrix (upper and lower triangles averaged first).
pub fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Sorted eigenpairs of a symmetric matrix, ascending.
pub fn sorted_sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Spectral radius of a real square matrix via the real Schur form.
pub fn spectral_radius_real(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral radius of a complex square matrix via the complex Schur form.
pub fn spectral_radius_complex(m: &DMatrix<Complex64>) -> f64 {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max)
}

/// Largest root modulus of x² + b x + c, computed without cancellation.
///
/// A discriminant within a few ulps of zero is treated as a double root, so the
/// critically damped presets return their exact rate.
pub fn quad_root_modulus(b: f64, c: f64) -> f64 {
    let disc = b * b - 4.0 * c;
    let scale = b * b + 4.0 * c.abs();
    if disc <= 16.0 * f64::EPSILON * scale {
        if disc < -16.0 * f64::EPSILON * scale {
            // complex pair with modulus sqrt(c)
            return c.abs().sqrt();
        }
        return 0.5 * b.abs();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return 0.0;
    }
    q.abs().max((c / q).abs())
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Golden-section maximization of a unimodal function on [a, b].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (b - a).abs() > tol && iter < 200 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
        iter += 1;
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn root_modulus_matches_companion_eigs() {
        let cases = [(0.3, 0.5), (-1.9, 0.9), (2.5, 1.2), (0.0, -0.7), (-1.0, 0.25), (1e-9, 0.0)];
        for (b, c) in cases {
            let m = DMatrix::from_row_slice(2, 2, &[-b, -c, 1.0, 0.0]);
            let want = spectral_radius_real(&m);
            assert!((quad_root_modulus(b, c) - want).abs() < 1e-12, "b={b} c={c}");
        }
    }

    #[test]
    fn double_root_is_exact() {
        let r: f64 = 0.7;
        assert_eq!(quad_root_modulus(-2.0 * r, r * r), r);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_peak() {
        let (x, _) = golden_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn complex_radius_of_diag() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(0.0, 0.9), Complex64::new(0.5, 0.0)]));
        assert!((spectral_radius_complex(&m) - 0.9).abs() < 1e-14);
    }
}
