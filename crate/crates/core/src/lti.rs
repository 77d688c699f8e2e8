//! State-space form of the generalized momentum method and its per-mode reduction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, RowVector2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MrlError, Result};
use crate::linalg::{golden_max, quad_root_modulus};
use crate::problem::{QuadraticProblem, SpectrumModel};

/// Denominator modulus below which z = e^{iω} counts as a pole.
pub const POLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gd,
    Hb,
    Nag,
    Tmm,
    Gmm,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Gd => "gd",
            Family::Hb => "hb",
            Family::Nag => "nag",
            Family::Tmm => "tmm",
            Family::Gmm => "gmm",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = MrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Family::Gd),
            "hb" => Ok(Family::Hb),
            "nag" | "agd" => Ok(Family::Nag),
            "tmm" => Ok(Family::Tmm),
            "gmm" => Ok(Family::Gmm),
            other => Err(MrlError::InvalidParams(format!("unknown family `{other}`"))),
        }
    }
}

/// Stepsize α and momentum parameters β, ν.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub family: Family,
}

impl AlgoParams {
    pub fn new(alpha: f64, beta: f64, nu: f64, family: Family) -> Result<Self> {
        let p = Self { alpha, beta, nu, family };
        p.validate()?;
        Ok(p)
    }

    pub fn gd(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 0.0, Family::Gd)
    }

    pub fn hb(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 0.0, Family::Hb)
    }

    pub fn nag(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, beta, Family::Nag)
    }

    pub fn tmm(alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        Self::new(alpha, beta, nu, Family::Tmm)
    }

    pub fn gmm(alpha: f64, beta: f64, nu: f64) -> Result<Self> {
        Self::new(alpha, beta, nu, Family::Gmm)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { alpha, beta, nu, family } = *self;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MrlError::InvalidParams(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite() && nu >= 0.0 && nu.is_finite()) {
            return Err(MrlError::InvalidParams(format!("beta and nu must be nonnegative, got beta={beta}, nu={nu}")));
        }
        let ok = match family {
            Family::Gd => beta == 0.0 && nu == 0.0,
            Family::Hb => nu == 0.0,
            Family::Nag => beta == nu,
            Family::Tmm | Family::Gmm => true,
        };
        if !ok {
            return Err(MrlError::InvalidParams(format!(
                "({alpha}, {beta}, {nu}) is inconsistent with family {family}"
            )));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        self.beta - self.nu
    }
}

/// Ã, B̃, C̃ of the scalar two-state recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmStateSpace {
    pub a_tilde: Matrix2<f64>,
    pub b_tilde: Vector2<f64>,
    pub c_tilde: RowVector2<f64>,
}

impl GmmStateSpace {
    /// Output weight of mode λ: ‖z‖² = ½λ x².
    pub fn t_scale(lambda: f64) -> f64 {
        (0.5 * lambda).sqrt()
    }
}

pub fn state_space(params: &AlgoParams) -> GmmStateSpace {
    let AlgoParams { alpha, beta, nu, .. } = *params;
    GmmStateSpace {
        a_tilde: Matrix2::new(1.0 + beta, -beta, 1.0, 0.0),
        b_tilde: Vector2::new(-alpha, 0.0),
        c_tilde: RowVector2::new(1.0 + nu, -nu),
    }
}

/// Characteristic-polynomial coefficients x² + b x + c of one Hessian mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoeffs {
    pub lambda: f64,
    pub b: f64,
    pub c: f64,
}

pub fn mode_coeffs(params: &AlgoParams, lambda: f64) -> ModeCoeffs {
    let AlgoParams { alpha, beta, nu, .. } = *params;
    ModeCoeffs { lambda, b: alpha * lambda * (1.0 + nu) - (1.0 + beta), c: beta - alpha * lambda * nu }
}

impl ModeCoeffs {
    pub fn root_modulus(&self) -> f64 {
        quad_root_modulus(self.b, self.c)
    }

    /// |e^{2iω} + b e^{iω} + c|.
    pub fn denominator(&self, omega: f64) -> f64 {
        let z = Complex64::from_polar(1.0, omega);
        (z * z + z * self.b + self.c).norm()
    }
}

pub fn mode_radius(params: &AlgoParams, lambda: f64) -> f64 {
    mode_coeffs(params, lambda).root_modulus()
}

const RADIUS_GRID: usize = 2048;

/// ρ(A_Q): max over modes of the largest root modulus.
///
/// With only (μ, L) known the max is taken over [μ, L] on a grid plus endpoints,
/// with golden-section refinement around the best interior cell.
pub fn spectral_radius(params: &AlgoParams, spec: &SpectrumModel) -> f64 {
    if let Some(eigs) = spec.eigenvalues() {
        return eigs.iter().map(|&l| mode_radius(params, l)).fold(0.0, f64::max);
    }
    let (mu, ell) = (spec.mu(), spec.ell());
    let step = (ell - mu) / RADIUS_GRID as f64;
    let at = |i: usize| if i == RADIUS_GRID { ell } else { mu + step * i as f64 };
    let (best_i, best) = (0..=RADIUS_GRID)
        .map(|i| (i, mode_radius(params, at(i))))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    if best_i == 0 || best_i == RADIUS_GRID {
        return best;
    }
    let (_, refined) = golden_max(|l| mode_radius(params, l), at(best_i - 1), at(best_i + 1), 1e-13 * ell);
    best.max(refined)
}

/// √h_ω(λ) = α√λ / (√2 |e^{2iω} + b e^{iω} + c|).
pub fn circle_gain(params: &AlgoParams, lambda: f64, omega: f64) -> Result<f64> {
    let m = mode_coeffs(params, lambda);
    let den = m.denominator(omega);
    if den < POLE_TOL {
        return Err(MrlError::PoleOnCircle { omega });
    }
    Ok(params.alpha * lambda.sqrt() / (std::f64::consts::SQRT_2 * den))
}

/// Complex transfer value of one mode at z: −α√λ z / (√2 (z² + b z + c)).
pub fn mode_transfer(params: &AlgoParams, lambda: f64, z: Complex64) -> Complex64 {
    let m = mode_coeffs(params, lambda);
    let num = -z * (params.alpha * lambda.sqrt() / std::f64::consts::SQRT_2);
    num / (z * z + z * m.b + m.c)
}

/// ‖G(e^{iω})‖, the max over the spectrum of the per-mode gains.
///
/// Without an eigenvalue list only λ ∈ {μ, L} are used. At a given ω an interior
/// mode can exceed both extremes, but the peak over ω is always attained at μ or L.
pub fn transfer_norm_on_circle(params: &AlgoParams, spec: &SpectrumModel, omega: f64) -> Result<f64> {
    let extremes = [spec.mu(), spec.ell()];
    let lambdas: &[f64] = spec.eigenvalues().unwrap_or(&extremes);
    lambdas.iter().map(|&l| circle_gain(params, l, omega)).try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)))
}

/// Dense 2d×2d system matrices, used by oracle checks and perturbation tests.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl DenseSystem {
    pub fn new(params: &AlgoParams, problem: &QuadraticProblem) -> Self {
        let d = problem.dim();
        let AlgoParams { alpha, beta, nu, .. } = *params;
        let id = DMatrix::<f64>::identity(d, d);
        let q = problem.q();
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        a.view_mut((0, 0), (d, d)).copy_from(&(&id * (1.0 + beta) - q * (alpha * (1.0 + nu))));
        a.view_mut((0, d), (d, d)).copy_from(&(q * (alpha * nu) - &id * beta));
        a.view_mut((d, 0), (d, d)).copy_from(&id);
        let mut b = DMatrix::zeros(2 * d, d);
        b.view_mut((0, 0), (d, d)).copy_from(&(&id * -alpha));
        let sqrt_l = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            problem.eigenvalues().iter().map(|l| (0.5 * l).sqrt()),
        ));
        let mut t = DMatrix::zeros(d, 2 * d);
        t.view_mut((0, 0), (d, d)).copy_from(&(sqrt_l * problem.basis().transpose()));
        Self { a, b, t }
    }

    /// G(z) = T (zI − A)⁻¹ B.
    pub fn transfer(&self, z: Complex64) -> Option<DMatrix<Complex64>> {
        let n = self.a.nrows();
        let za = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let bc = self.b.map(|v| Complex64::new(v, 0.0));
        let x = za.lu().solve(&bc)?;
        Some(self.t.map(|v| Complex64::new(v, 0.0)) * x)
    }
}
