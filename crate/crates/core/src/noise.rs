//! Adversarial gradient-error generators.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{MrlError, Result};
use crate::ext::fmt_g17;
use crate::hinf::{hinf_with_argmax, omega_lambda_star, omega_star_of_mode, LambdaStar};
use crate::linalg::sorted_sym_eigen;
use crate::lti::{mode_coeffs, spectral_radius, AlgoParams};
use crate::problem::{QuadraticProblem, SmoothOracle, SpectrumModel};

/// Truncated almost-worst-case noise w_k = √(h(2−h)) (1−h)^k cos(ω* k) u*.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSeq {
    pub h: f64,
    pub omega_star: f64,
    pub direction: DVector<f64>,
    pub values: Vec<DVector<f64>>,
    pub normalized: bool,
}

/// Smallest K with (1−h)^{2K} ≤ 1e−12.
pub fn default_horizon(h: f64) -> usize {
    ((1e-12f64).ln() / (2.0 * (1.0 - h).ln())).ceil() as usize
}

/// Kernel coefficient √(h(2−h)) (1−h)^k.
pub fn kernel_coeff(h: f64, k: usize) -> f64 {
    (h * (2.0 - h)).sqrt() * (1.0 - h).powi(k as i32)
}

impl NoiseSeq {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|w| w.norm_squared()).sum()
    }

    /// Energy left out by truncating the infinite sequence, (1−h)^{2K}.
    pub fn truncation_tail(&self) -> f64 {
        (1.0 - self.h).powi(2 * self.len() as i32)
    }

    pub fn get(&self, k: usize) -> Option<&DVector<f64>> {
        self.values.get(k)
    }

    /// CSV with a comment header carrying h, ω* and the normalization flag.
    pub fn to_csv(&self) -> String {
        let d = self.direction.len();
        let mut out = format!(
            "# h={},omega_star={},normalized={}\nk",
            fmt_g17(self.h),
            fmt_g17(self.omega_star),
            self.normalized
        );
        for i in 1..=d {
            let _ = write!(out, ",w_{i}");
        }
        out.push('\n');
        for (k, w) in self.values.iter().enumerate() {
            let _ = write!(out, "{k}");
            for v in w.iter() {
                let _ = write!(out, ",{}", fmt_g17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Eigenvector index of λ* in the ascending basis.
fn star_index(ls: LambdaStar, d: usize) -> usize {
    match ls {
        LambdaStar::Mu => 0,
        LambdaStar::L => d - 1,
    }
}

pub fn worst_case_noise(
    params: &AlgoParams,
    problem: &QuadraticProblem,
    h: f64,
    horizon: Option<usize>,
    normalize: bool,
) -> Result<NoiseSeq> {
    if !(h > 0.0 && h < 1.0) {
        return Err(MrlError::InvalidParams(format!("h must lie in (0, 1), got {h}")));
    }
    let spec = problem.spectrum();
    let (omega, ls) = omega_lambda_star(params, &spec)?;
    let u = problem.eigenvector(star_index(ls, problem.dim()));
    let k_max = horizon.unwrap_or_else(|| default_horizon(h));
    let mut values: Vec<DVector<f64>> =
        (0..k_max).map(|k| &u * (kernel_coeff(h, k) * (omega * k as f64).cos())).collect();
    if normalize {
        let e = values.iter().map(|w| w.norm_squared()).sum::<f64>().sqrt();
        if e > 0.0 {
            values.iter_mut().for_each(|w| *w /= e);
        }
    }
    Ok(NoiseSeq { h, omega_star: omega, direction: u, values, normalized: normalize })
}

/// Step-k term of the kernel sequence built from the Hessian at x_k.
pub fn local_quadratic_worst_noise<O: SmoothOracle + ?Sized>(
    params: &AlgoParams,
    oracle: &O,
    x_k: &DVector<f64>,
    h: f64,
    k: usize,
) -> Result<DVector<f64>> {
    let hess = oracle.hessian(x_k).ok_or(MrlError::NoHessian)?;
    let (vals, vecs) = sorted_sym_eigen(&hess);
    let d = vals.len();
    let (mu_k, l_k) = (vals[0], vals[d - 1]);
    let (omega, ls) = if l_k > mu_k {
        let spec = SpectrumModel::new(mu_k, l_k)?;
        let rate = spectral_radius(params, &spec);
        if rate >= 1.0 {
            return Err(MrlError::Divergent { rate });
        }
        let (_, ls) = hinf_with_argmax(params, &spec);
        (omega_star_of_mode(&mode_coeffs(params, ls.value(&spec))), ls)
    } else {
        (omega_star_of_mode(&mode_coeffs(params, mu_k)), LambdaStar::Mu)
    };
    let u = vecs.column(star_index(ls, d)).into_owned();
    Ok(u * (kernel_coeff(h, k) * (omega * k as f64).cos()))
}

/// One GMM step from (x_{k−1}, x_k) with gradient error w, returning x_{k+1}.
pub fn gmm_step<O: SmoothOracle + ?Sized>(
    params: &AlgoParams,
    oracle: &O,
    x_prev: &DVector<f64>,
    x: &DVector<f64>,
    w: &DVector<f64>,
) -> DVector<f64> {
    let mom = x - x_prev;
    let y = x + &mom * params.nu;
    x - (oracle.gradient(&y) + w) * params.alpha + mom * params.beta
}

/// Best of `n_trials` random directions of norm `budget_k`, scored by f(x_{k+1}) − f*.
pub fn rejection_noise<O: SmoothOracle + ?Sized>(
    params: &AlgoParams,
    oracle: &O,
    x_prev: &DVector<f64>,
    x_k: &DVector<f64>,
    budget_k: f64,
    n_trials: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    let d = oracle.dim();
    if x_k.len() != d || x_prev.len() != d {
        return Err(MrlError::DimensionMismatch { expected: d, got: x_k.len() });
    }
    if !(budget_k >= 0.0) {
        return Err(MrlError::InvalidParams("budget must be nonnegative".into()));
    }
    if budget_k == 0.0 || n_trials == 0 {
        return Ok(DVector::zeros(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<DVector<f64>> = (0..n_trials)
        .map(|_| {
            let g: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let n = g.norm();
            g * (budget_k / n)
        })
        .collect();
    let best =
        dirs.par_iter().enumerate().map(|(i, w)| (i, oracle.value(&gmm_step(params, oracle, x_prev, x_k, w)))).reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(dirs[best.0].clone())
}
