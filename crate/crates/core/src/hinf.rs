//! Closed-form H∞ gain on quadratics, worst-case frequency, stability radii,
//! destabilizing perturbations and spectral value set contours.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrlError, Result};
use crate::ext::ExtF64;
use crate::linalg::{golden_max, spectral_radius_complex};
use crate::lti::{circle_gain, mode_coeffs, mode_transfer, spectral_radius, AlgoParams, DenseSystem, ModeCoeffs};
use crate::problem::{QuadraticProblem, SpectrumModel};

/// Relative tolerance under which μ and L count as tied maximizers.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaStar {
    #[serde(rename = "mu")]
    Mu,
    #[serde(rename = "L")]
    L,
}

impl LambdaStar {
    pub fn value(self, spec: &SpectrumModel) -> f64 {
        match self {
            LambdaStar::Mu => spec.mu(),
            LambdaStar::L => spec.ell(),
        }
    }
}

/// r_λ = min over the unit circle of |z² + b_λ z + c_λ|.
pub fn r_lambda(params: &AlgoParams, lambda: f64) -> f64 {
    r_of(&mode_coeffs(params, lambda))
}

fn r_of(m: &ModeCoeffs) -> f64 {
    let (b, c) = (m.b, m.c);
    if c > 0.0 && b.abs() * (1.0 + c) / (4.0 * c) < 1.0 {
        (1.0 - c).abs() * (1.0 - b * b / (4.0 * c)).sqrt()
    } else {
        ((1.0 + c).abs() - b.abs()).abs()
    }
}

/// Frequency in [0, π] minimizing |e^{2iω} + b e^{iω} + c|; ties between 0 and π go to π.
pub fn omega_star_of_mode(m: &ModeCoeffs) -> f64 {
    let (b, c) = (m.b, m.c);
    if c > 0.0 && (b * (1.0 + c)).abs() < 4.0 * c.abs() {
        (-b * (1.0 + c) / (4.0 * c)).clamp(-1.0, 1.0).acos()
    } else if (1.0 - b + c).powi(2) <= (1.0 + b + c).powi(2) {
        PI
    } else {
        0.0
    }
}

fn gain_at(params: &AlgoParams, lambda: f64) -> f64 {
    params.alpha / SQRT_2 * lambda.sqrt() / r_lambda(params, lambda)
}

/// Closed-form H∞ with its maximizing extreme eigenvalue (μ on ties).
pub fn hinf_with_argmax(params: &AlgoParams, spec: &SpectrumModel) -> (f64, LambdaStar) {
    if spectral_radius(params, spec) >= 1.0 {
        return (f64::INFINITY, LambdaStar::Mu);
    }
    let gm = gain_at(params, spec.mu());
    let gl = gain_at(params, spec.ell());
    if gl > gm && (gl - gm) > TIE_TOL * gl {
        (gl, LambdaStar::L)
    } else {
        (gm.max(gl), LambdaStar::Mu)
    }
}

pub fn hinf_quadratic(params: &AlgoParams, spec: &SpectrumModel) -> f64 {
    hinf_with_argmax(params, spec).0
}

/// Piecewise H∞ of gradient descent.
pub fn hinf_gd(alpha: f64, spec: &SpectrumModel) -> f64 {
    let (mu, ell) = (spec.mu(), spec.ell());
    if !(alpha > 0.0) || alpha >= 2.0 / ell {
        return f64::INFINITY;
    }
    if alpha <= 2.0 / (ell + (ell * mu).sqrt()) {
        1.0 / (2.0 * mu).sqrt()
    } else {
        alpha * ell.sqrt() / (SQRT_2 * (2.0 - alpha * ell))
    }
}

/// Worst-case frequency ω* ∈ [0, π] and maximizing eigenvalue λ*.
pub fn omega_lambda_star(params: &AlgoParams, spec: &SpectrumModel) -> Result<(f64, LambdaStar)> {
    let rate = spectral_radius(params, spec);
    if rate >= 1.0 {
        return Err(MrlError::Divergent { rate });
    }
    let (_, ls) = hinf_with_argmax(params, spec);
    Ok((omega_star_of_mode(&mode_coeffs(params, ls.value(spec))), ls))
}

/// Membership in S1 ∩ S2, the parameters achieving H∞ = 1/√(2μ).
pub fn in_best_robustness_set(params: &AlgoParams, spec: &SpectrumModel) -> bool {
    let (mu, ell) = (spec.mu(), spec.ell());
    let m = mode_coeffs(params, mu);
    // boundary points (RS-GD sits on S2's edge) are accepted up to rounding
    let s1 = m.c <= 0.0 || (m.b * (1.0 + m.c)).abs() >= 4.0 * m.c.abs() * (1.0 - TIE_TOL);
    let s2 = params.alpha * (ell * mu).sqrt() <= r_lambda(params, ell) * (1.0 + TIE_TOL);
    s1 && s2
}

/// Frequency-grid evaluation of max_ω ‖G(e^{iω})‖, per mode: uniform grid on [0, π]
/// then golden-section refinement around the best cell. Poles give +∞.
pub fn hinf_oracle_grid(params: &AlgoParams, spec: &SpectrumModel, n_omega: usize) -> Result<f64> {
    if n_omega < 4 {
        return Err(MrlError::InvalidParams("n_omega must be at least 4".into()));
    }
    let extremes = [spec.mu(), spec.ell()];
    let lambdas: &[f64] = spec.eigenvalues().unwrap_or(&extremes);
    let step = PI / (n_omega - 1) as f64;
    let mut best = 0.0f64;
    for &l in lambdas {
        let m = mode_coeffs(params, l);
        let num = params.alpha * l.sqrt() / SQRT_2;
        let mut best_i = 0;
        let mut best_den = f64::INFINITY;
        for i in 0..n_omega {
            let den = m.denominator(step * i as f64);
            if den < best_den {
                best_den = den;
                best_i = i;
            }
        }
        if best_den < crate::lti::POLE_TOL {
            return Ok(f64::INFINITY);
        }
        let lo = step * best_i.saturating_sub(1) as f64;
        let hi = (step * (best_i + 1) as f64).min(PI);
        let (_, neg) = golden_max(|w| -m.denominator(w), lo, hi, 1e-15);
        best = best.max(num / best_den.min(-neg));
    }
    Ok(best)
}

/// max over ω ∈ [0, π] of a continuous function: grid then golden refinement.
fn grid_max<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let step = PI / (n - 1) as f64;
    let (bi, bv) =
        (0..n).map(|i| (i, f(step * i as f64))).fold((0, f64::NEG_INFINITY), |a, v| if v.1 > a.1 { v } else { a });
    let lo = step * bi.saturating_sub(1) as f64;
    let hi = (step * (bi + 1) as f64).min(PI);
    let (_, rv) = golden_max(&f, lo, hi, 1e-14);
    bv.max(rv)
}

fn second_and_penultimate(spec: &SpectrumModel) -> (f64, f64) {
    match spec.eigenvalues() {
        Some(e) if e.len() >= 2 => (e[1], e[e.len() - 2]),
        _ => (spec.ell(), spec.mu()),
    }
}

/// H∞^lb: (α/√2) max_ω min( max_{λ∈{λ2,L}} g, max_{λ∈{μ,λ_{d−1}}} g ).
///
/// Without an eigenvalue list the spectrum is taken to be {μ, L}.
pub fn hinf_lower_bound_real(params: &AlgoParams, spec: &SpectrumModel) -> f64 {
    if spectral_radius(params, spec) >= 1.0 {
        return f64::INFINITY;
    }
    let (l2, ld1) = second_and_penultimate(spec);
    let (mu, ell) = (spec.mu(), spec.ell());
    let g = |l: f64, w: f64| circle_gain(params, l, w).unwrap_or(f64::INFINITY);
    grid_max(|w| g(l2, w).max(g(ell, w)).min(g(mu, w).max(g(ld1, w))), 20_001)
}

/// True when the maximizing mode falls in case (i), where r_ℝ = r_ℂ.
pub fn real_radius_case_one(params: &AlgoParams, spec: &SpectrumModel) -> Result<bool> {
    let (_, ls) = omega_lambda_star(params, spec)?;
    let m = mode_coeffs(params, ls.value(spec));
    Ok(m.c <= 0.0 || (m.b * (1.0 + m.c)).abs() >= 4.0 * m.c.abs())
}

/// Bracket [1/H∞, 1/H∞^lb] on the real stability radius (collapsed in case (i)).
pub fn real_radius_bounds(params: &AlgoParams, spec: &SpectrumModel) -> Result<(f64, f64)> {
    let h = hinf_quadratic(params, spec);
    let lower = 1.0 / h;
    if real_radius_case_one(params, spec)? {
        Ok((lower, lower))
    } else {
        let lb = hinf_lower_bound_real(params, spec);
        Ok((lower, (1.0 / lb).max(lower)))
    }
}

/// Singular values of [[r, −γ i], [i/γ, r]].
fn block_singular_values(r: f64, i: f64, gamma: f64) -> (f64, f64) {
    let a = (4.0 * r * r + (gamma + 1.0 / gamma).powi(2) * i * i).sqrt();
    let b = (1.0 / gamma - gamma).abs() * i.abs();
    (0.5 * (a + b), 0.5 * (a - b).abs())
}

/// τ1(M) on a γ grid when M = diag(g) Uᵀ: the stacked real matrix is block-diagonal
/// in 2×2 blocks up to an orthogonal factor.
pub fn tau1_modes(g: &[Complex64], gammas: &[f64]) -> f64 {
    gammas
        .iter()
        .map(|&gamma| {
            let mut top = [0.0f64; 2];
            for z in g {
                let (s1, s2) = block_singular_values(z.re, z.im, gamma);
                for s in [s1, s2] {
                    if s > top[0] {
                        top[1] = top[0];
                        top[0] = s;
                    } else if s > top[1] {
                        top[1] = s;
                    }
                }
            }
            top[1]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid approximation of the real stability radius through Qiu's formula.
pub fn real_radius_qiu_grid(
    params: &AlgoParams,
    problem: &QuadraticProblem,
    n_omega: usize,
    n_gamma: usize,
) -> Result<f64> {
    let d = problem.dim();
    if d > 64 {
        return Err(MrlError::CostGuard(format!("dimension {d} exceeds 64")));
    }
    let spec = problem.spectrum();
    let rate = spectral_radius(params, &spec);
    if rate >= 1.0 {
        return Err(MrlError::Divergent { rate });
    }
    if n_omega < 2 || n_gamma < 1 {
        return Err(MrlError::InvalidParams("grid sizes too small".into()));
    }
    let gammas: Vec<f64> = (0..n_gamma)
        .map(|k| if n_gamma == 1 { 1.0 } else { 10f64.powf(-4.0 * (1.0 - k as f64 / (n_gamma - 1) as f64)) })
        .collect();
    // both maximizing frequencies of the closed form are included exactly
    let (w_star, _) = omega_lambda_star(params, &spec)?;
    let omegas = (0..n_omega).map(|k| PI * k as f64 / (n_omega - 1) as f64).chain(std::iter::once(w_star));
    let sup = omegas
        .map(|w| {
            let z = Complex64::from_polar(1.0, w);
            let g: Vec<Complex64> = problem.eigenvalues().iter().map(|&l| mode_transfer(params, l, z)).collect();
            tau1_modes(&g, &gammas)
        })
        .fold(0.0, f64::max);
    Ok(1.0 / sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Δ = ε u* v*ᴴ
    UvH,
    /// Δ = ε v* u*ᴴ
    VuH,
}

/// Rank-one destabilizing perturbation of norm ε* = 1/H∞.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub delta: DMatrix<Complex64>,
    pub norm: f64,
    pub realness: bool,
    pub orientation: Orientation,
    /// ρ(A_Q + BΔT) reached at construction.
    pub closed_radius: f64,
}

impl Perturbation {
    pub fn scaled(&self, s: f64) -> DMatrix<Complex64> {
        &self.delta * Complex64::new(s, 0.0)
    }
}

/// ρ(A + B Δ T) with a dense complex eigensolve.
pub fn perturbed_radius(sys: &DenseSystem, delta: &DMatrix<Complex64>) -> f64 {
    let c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let m = c(&sys.a) + c(&sys.b) * delta * c(&sys.t);
    spectral_radius_complex(&m)
}

pub fn destabilizing_perturbation(params: &AlgoParams, problem: &QuadraticProblem) -> Result<Perturbation> {
    let spec = problem.spectrum();
    let (omega, ls) = omega_lambda_star(params, &spec)?;
    let h = hinf_quadratic(params, &spec);
    if !h.is_finite() {
        return Err(MrlError::Divergent { rate: spectral_radius(params, &spec) });
    }
    let eps = 1.0 / h;
    let d = problem.dim();
    let j = match ls {
        LambdaStar::Mu => 0,
        LambdaStar::L => d - 1,
    };
    let lam = problem.eigenvalues()[j];
    let u: DVector<Complex64> = problem.eigenvector(j).map(|v| Complex64::new(v, 0.0));
    let r = mode_transfer(params, lam, Complex64::from_polar(1.0, omega));
    let mut v = DVector::<Complex64>::zeros(d);
    v[j] = r / r.norm();
    let sys = DenseSystem::new(params, problem);
    let candidates = [
        (Orientation::UvH, &u * v.adjoint() * Complex64::new(eps, 0.0)),
        (Orientation::VuH, &v * u.adjoint() * Complex64::new(eps, 0.0)),
    ];
    let (orientation, delta, closed) = candidates
        .into_iter()
        .map(|(o, dlt)| {
            let rho = perturbed_radius(&sys, &dlt);
            (o, dlt, rho)
        })
        .min_by(|a, b| (a.2 - 1.0).abs().total_cmp(&(b.2 - 1.0).abs()))
        .expect("two candidates");
    if (closed - 1.0).abs() > 1e-4 {
        return Err(MrlError::Numerical(format!("no orientation closes the spectral radius to 1 (got {closed})")));
    }
    let realness = omega == 0.0 || omega == PI;
    let delta = if realness { delta.map(|z| Complex64::new(z.re, 0.0)) } else { delta };
    Ok(Perturbation { delta, norm: eps, realness, orientation, closed_radius: closed })
}

/// A polyline in the complex plane; `closed` when its ends meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// φ(z) = max_j α√λ_j |z| / (√2 |z² + b_j z + c_j|) over the distinct eigenvalues.
pub fn transfer_norm_at(params: &AlgoParams, lambdas: &[f64], z: Complex64) -> f64 {
    lambdas
        .iter()
        .map(|&l| {
            let m = mode_coeffs(params, l);
            let den = (z * z + z * m.b + m.c).norm();
            if den == 0.0 {
                f64::MAX
            } else {
                params.alpha * l.sqrt() * z.norm() / (SQRT_2 * den)
            }
        })
        .fold(0.0, f64::max)
}

fn distinct(eigs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = eigs.to_vec();
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    v
}

pub const CONTOUR_GRID: usize = 800;
const CONTOUR_HALF_WIDTH: f64 = 1.2;

/// Boundary of the spectral value set Λ_ε, traced by marching squares on the
/// square [−1.2, 1.2]² at level φ = 1/ε.
pub fn spectral_value_set_contour(
    params: &AlgoParams,
    problem: &QuadraticProblem,
    eps: f64,
    grid: usize,
) -> Result<Vec<Polyline>> {
    if problem.dim() > 256 {
        return Err(MrlError::CostGuard(format!("dimension {} exceeds 256", problem.dim())));
    }
    if !(eps > 0.0) || grid < 2 {
        return Err(MrlError::InvalidParams("need eps > 0 and grid >= 2".into()));
    }
    let lambdas = distinct(problem.eigenvalues());
    let n = grid + 1;
    let h = 2.0 * CONTOUR_HALF_WIDTH / grid as f64;
    let coord = |i: usize| -CONTOUR_HALF_WIDTH + h * i as f64;
    let field: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % n, k / n);
            transfer_norm_at(params, &lambdas, Complex64::new(coord(i), coord(j)))
        })
        .collect();
    Ok(marching_squares(&field, n, 1.0 / eps, coord))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Iso-contour of `field` (row-major, n×n, x fastest) at `level`, regions with
/// field ≥ level counted as inside.
pub fn marching_squares<C: Fn(usize) -> f64>(field: &[f64], n: usize, level: f64, coord: C) -> Vec<Polyline> {
    let at = |i: usize, j: usize| field[j * n + i];
    let point = |e: Edge| -> (f64, f64) {
        let (i0, j0, i1, j1) = match e {
            Edge::H(i, j) => (i, j, i + 1, j),
            Edge::V(i, j) => (i, j, i, j + 1),
        };
        let (f0, f1) = (at(i0, j0), at(i1, j1));
        let t = if f1 == f0 { 0.5 } else { ((level - f0) / (f1 - f0)).clamp(0.0, 1.0) };
        let x = coord(i0) + t * (coord(i1) - coord(i0));
        let y = coord(j0) + t * (coord(j1) - coord(j0));
        (x, y)
    };
    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let inside = v.map(|x| x >= level);
            let case = inside.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            match case {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 | 10 => {
                    let center_in = v.iter().sum::<f64>() / 4.0 >= level;
                    let joined = (case == 5) == center_in;
                    if joined {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    link_segments(segs)
        .into_iter()
        .map(|(edges, closed)| Polyline { points: edges.into_iter().map(point).collect(), closed })
        .collect()
}

fn link_segments(segs: Vec<(Edge, Edge)>) -> Vec<(Vec<Edge>, bool)> {
    let mut adj: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(k);
        adj.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    // open chains start at edges with a single incident segment
    let mut starts: Vec<usize> =
        (0..segs.len()).filter(|&k| adj[&segs[k].0].len() == 1 || adj[&segs[k].1].len() == 1).collect();
    starts.extend(0..segs.len());
    for s in starts {
        if used[s] {
            continue;
        }
        used[s] = true;
        let (a, b) = segs[s];
        let (first, mut cur) = if adj[&a].len() == 1 {
            (a, b)
        } else if adj[&b].len() == 1 {
            (b, a)
        } else {
            (a, b)
        };
        let mut chain = vec![first, cur];
        loop {
            let next = adj[&cur].iter().copied().find(|&k| !used[k]);
            match next {
                Some(k) => {
                    used[k] = true;
                    let (p, q) = segs[k];
                    cur = if p == cur { q } else { p };
                    chain.push(cur);
                }
                None => break,
            }
        }
        let closed = chain.len() > 2 && chain.first() == chain.last();
        out.push((chain, closed));
    }
    out
}

/// Summary of robustness quantities for one parameter choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub hinf: ExtF64,
    pub rate: f64,
    pub omega_star: Option<f64>,
    pub lambda_star: Option<LambdaStar>,
    pub lambda_star_value: Option<f64>,
    pub r_mu: f64,
    #[serde(rename = "r_L")]
    pub r_l: f64,
    pub in_best_set: bool,
    pub complex_radius: f64,
    pub real_radius: (f64, f64),
}

pub fn robustness_report(params: &AlgoParams, spec: &SpectrumModel) -> RobustnessReport {
    let rate = spectral_radius(params, spec);
    let (h, ls) = hinf_with_argmax(params, spec);
    let r_mu = r_lambda(params, spec.mu());
    let r_l = r_lambda(params, spec.ell());
    let in_best_set = in_best_robustness_set(params, spec);
    if rate >= 1.0 {
        return RobustnessReport {
            hinf: ExtF64::INFINITY,
            rate,
            omega_star: None,
            lambda_star: None,
            lambda_star_value: None,
            r_mu,
            r_l,
            in_best_set,
            complex_radius: 0.0,
            real_radius: (0.0, 0.0),
        };
    }
    let omega = omega_star_of_mode(&mode_coeffs(params, ls.value(spec)));
    let real_radius = real_radius_bounds(params, spec).unwrap_or((1.0 / h, 1.0 / h));
    RobustnessReport {
        hinf: ExtF64(h),
        rate,
        omega_star: Some(omega),
        lambda_star: Some(ls),
        lambda_star_value: Some(ls.value(spec)),
        r_mu,
        r_l,
        in_best_set,
        complex_radius: 1.0 / h,
        real_radius,
    }
}
