//! ℓ2-gain bounds for smooth strongly convex objectives: explicit GD and NAG
//! bounds, the 4×4 matrix-inequality certificate and rate certificates.

use nalgebra::{Matrix2, Matrix3, Matrix4, RowVector2, SymmetricEigen, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrlError, Result};
use crate::ext::ExtF64;
use crate::linalg::golden_max;
use crate::lti::{state_space, AlgoParams};
use crate::problem::SpectrumModel;

/// Feasibility tolerance on minimum eigenvalues.
pub const PSD_TOL: f64 = -1e-9;
pub const DEFAULT_SEARCH_BUDGET: usize = 200_000;

/// Scalars and Lyapunov matrix of an MI certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertVars {
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
    pub p_tilde: [[f64; 2]; 2],
}

impl CertVars {
    pub fn zero() -> Self {
        Self { rho0: 0.0, rho1: 0.0, rho2: 0.0, rho3: 0.0, a: 0.0, b: 0.0, c0: 0.0, c1: 0.0, p_tilde: [[0.0; 2]; 2] }
    }

    pub fn p(&self) -> Matrix2<f64> {
        let p = self.p_tilde;
        Matrix2::new(p[0][0], p[0][1], p[1][0], p[1][1])
    }

    pub fn with_p(mut self, p11: f64, p12: f64, p22: f64) -> Self {
        self.p_tilde = [[p11, p12], [p12, p22]];
        self
    }

    /// r(P̃) = P11 − P12²/P22, or P11 when P22 = 0.
    pub fn r_p(&self) -> f64 {
        let p = self.p_tilde;
        if p[1][1] != 0.0 {
            p[0][0] - p[0][1] * p[0][1] / p[1][1]
        } else {
            p[0][0]
        }
    }

    /// Structural checks: ranges, P̃ ⪰ 0 and c1 + P11 > 0.
    pub fn admissible(&self) -> bool {
        let rhos = [self.rho0, self.rho1, self.rho2, self.rho3];
        let p = self.p_tilde;
        let all_finite = rhos.iter().chain([self.a, self.b, self.c0, self.c1].iter()).all(|v| v.is_finite())
            && p.iter().flatten().all(|v| v.is_finite());
        all_finite
            && rhos.iter().all(|r| (0.0..1.0).contains(r))
            && self.a >= 0.0
            && self.b >= 0.0
            && self.c0 >= 0.0
            && self.c1 >= 0.0
            && (p[0][1] - p[1][0]).abs() <= 1e-12 * (1.0 + p[0][1].abs())
            && min_eig2(&self.p()) >= -1e-10
            && self.c1 + p[0][0] > 0.0
    }
}

/// A certificate together with its derived s and gain bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiCertificate {
    #[serde(flatten)]
    pub vars: CertVars,
    pub s: f64,
    pub min_eig: f64,
    pub bound: ExtF64,
}

impl MiCertificate {
    pub fn evaluate(params: &AlgoParams, spec: &SpectrumModel, vars: CertVars) -> Self {
        let chk = mi_check(params, spec, &vars);
        let bound = if chk.feasible { bound_formula(params, spec, &vars, chk.s) } else { f64::INFINITY };
        Self { vars, s: chk.s, min_eig: chk.min_eig, bound: ExtF64(bound) }
    }

    /// Certificate returned when nothing feasible was found: all scalars zero, bound +∞.
    pub fn infeasible(params: &AlgoParams, spec: &SpectrumModel) -> Self {
        Self::evaluate(params, spec, CertVars::zero())
    }

    pub fn is_feasible(&self) -> bool {
        self.bound.is_finite()
    }

    /// Recomputes s and the bound and checks them against the stored values.
    pub fn verify(&self, params: &AlgoParams, spec: &SpectrumModel) -> Result<()> {
        let fresh = Self::evaluate(params, spec, self.vars);
        let close = |x: f64, y: f64| {
            (x.is_infinite() && y.is_infinite()) || (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs()))
        };
        if !close(fresh.s, self.s) || !close(fresh.bound.get(), self.bound.get()) {
            return Err(MrlError::Numerical(format!(
                "stored certificate does not reproduce: s {} vs {}, bound {} vs {}",
                self.s, fresh.s, self.bound, fresh.bound
            )));
        }
        Ok(())
    }

    /// Parses certificate JSON and cross-checks the stored bound.
    pub fn from_json(text: &str, params: &AlgoParams, spec: &SpectrumModel) -> Result<Self> {
        let cert: Self = serde_json::from_str(text).map_err(|e| MrlError::Parse(e.to_string()))?;
        cert.verify(params, spec)?;
        Ok(cert)
    }
}

/// The blocks of the Lyapunov evolution inequality, variables ordered
/// (x_k − x*, x_{k−1} − x*, ∇f(y_k), w_k).
#[derive(Debug, Clone, PartialEq)]
pub struct LyapMatrices {
    pub m0: Matrix4<f64>,
    pub m1: Matrix4<f64>,
    pub m2: Matrix4<f64>,
    pub m3: RowVector2<f64>,
    pub x0: Matrix3<f64>,
    pub x1: Matrix3<f64>,
    pub x2: Matrix3<f64>,
    pub x3: Matrix3<f64>,
    pub z: Matrix3<f64>,
    pub delta: f64,
}

impl LyapMatrices {
    /// M̃4 = M̃2 + c1 M̃1 + c0 M̃0.
    pub fn m4(&self, c0: f64, c1: f64) -> Matrix4<f64> {
        self.m2 + self.m1 * c1 + self.m0 * c0
    }
}

fn x_blocks(params: &AlgoParams, spec: &SpectrumModel, rho0_sq: f64) -> [Matrix3<f64>; 4] {
    let AlgoParams { alpha, nu, .. } = *params;
    let (mu, l) = (spec.mu(), spec.ell());
    let d = params.delta();
    let e = 1.0 - l * alpha;
    let x1 = Matrix3::new(
        -l * d * d,
        l * d * d,
        -e * d,
        l * d * d,
        -l * d * d,
        e * d,
        -e * d,
        e * d,
        alpha * (2.0 - l * alpha),
    ) * 0.5;
    let x2 = Matrix3::new(nu * nu * mu, -nu * nu * mu, -nu, -nu * nu * mu, nu * nu * mu, nu, -nu, nu, 0.0) * 0.5;
    let x3 = Matrix3::new(
        (1.0 + nu).powi(2) * mu,
        -nu * (1.0 + nu) * mu,
        -(1.0 + nu),
        -nu * (1.0 + nu) * mu,
        nu * nu * mu,
        nu,
        -(1.0 + nu),
        nu,
        0.0,
    ) * 0.5;
    let x0 = x1 + x2 * rho0_sq + x3 * (1.0 - rho0_sq);
    [x0, x1, x2, x3]
}

pub fn lyap_matrices(params: &AlgoParams, spec: &SpectrumModel, cert: &CertVars) -> LyapMatrices {
    let (mu, l) = (spec.mu(), spec.ell());
    let alpha = params.alpha;
    let ss = state_space(params);
    let (at, bt, ct) = (ss.a_tilde, ss.b_tilde, ss.c_tilde);
    let p = cert.p();
    let delta = params.delta();
    let r0 = cert.rho0 * cert.rho0;

    let mut m0 = Matrix4::zeros();
    let ctc = ct.transpose() * ct * (2.0 * mu * l);
    m0.fixed_view_mut::<2, 2>(0, 0).copy_from(&ctc);
    for i in 0..2 {
        m0[(i, 2)] = -(mu + l) * ct[i];
        m0[(2, i)] = m0[(i, 2)];
    }
    m0[(2, 2)] = 2.0;

    let [x0, x1, x2, x3] = x_blocks(params, spec, r0);
    let (q1, q2, q3) = (cert.rho1.powi(2), cert.rho2.powi(2), cert.rho3.powi(2));
    let z = Matrix3::new(
        q1 * p[(0, 0)] + 0.5 * mu * q2,
        q1 * p[(0, 1)],
        0.0,
        q1 * p[(1, 0)],
        q1 * p[(1, 1)] + 0.5 * mu * q3,
        0.0,
        0.0,
        0.0,
        0.0,
    );
    let mut m1 = Matrix4::zeros();
    m1.fixed_view_mut::<3, 3>(0, 0).copy_from(&(x0 + z));
    let border = Vector3::new(0.5 * l * alpha * delta, -0.5 * l * alpha * delta, 0.5 * alpha * (1.0 - l * alpha));
    for i in 0..3 {
        m1[(i, 3)] = border[i];
        m1[(3, i)] = border[i];
    }

    let mut m2 = Matrix4::zeros();
    let top = -(at.transpose() * p * at) + p * r0;
    m2.fixed_view_mut::<2, 2>(0, 0).copy_from(&top);
    let apb: Vector2<f64> = -(at.transpose() * p * bt);
    let bpb = (bt.transpose() * p * bt)[(0, 0)];
    for i in 0..2 {
        m2[(i, 2)] = apb[i];
        m2[(2, i)] = apb[i];
        m2[(i, 3)] = apb[i];
        m2[(3, i)] = apb[i];
    }
    m2[(2, 2)] = -bpb + cert.b * cert.c1;
    m2[(2, 3)] = -bpb;
    m2[(3, 2)] = -bpb;
    m2[(3, 3)] = cert.a;

    LyapMatrices { m0, m1, m2, m3: RowVector2::new(1.0, -1.0), x0, x1, x2, x3, z, delta }
}

fn min_eig2(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let h = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    0.5 * tr - (h * h + off * off).sqrt()
}

fn min_eig4(m: &Matrix4<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

fn min_eig3(m: &Matrix3<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// s = ρ0² + c1ρ1² + ρ2² + ρ3² + 4b(ν² + (1+ν)²)L²c1/μ.
pub fn s_value(params: &AlgoParams, spec: &SpectrumModel, c: &CertVars) -> f64 {
    let nu = params.nu;
    let (mu, l) = (spec.mu(), spec.ell());
    c.rho0.powi(2)
        + c.c1 * c.rho1.powi(2)
        + c.rho2.powi(2)
        + c.rho3.powi(2)
        + 4.0 * c.b * (nu * nu + (1.0 + nu).powi(2)) * l * l * c.c1 / mu
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiCheck {
    pub feasible: bool,
    pub min_eig: f64,
    pub s: f64,
}

pub fn mi_check(params: &AlgoParams, spec: &SpectrumModel, cert: &CertVars) -> MiCheck {
    let m = lyap_matrices(params, spec, cert).m4(cert.c0, cert.c1);
    let min_eig = min_eig4(&m);
    let s = s_value(params, spec, cert);
    let feasible = cert.admissible() && min_eig >= PSD_TOL && s < 1.0;
    MiCheck { feasible, min_eig, s }
}

fn bound_formula(params: &AlgoParams, spec: &SpectrumModel, c: &CertVars, s: f64) -> f64 {
    let l = spec.ell();
    let den = c.c1 + 2.0 / l * c.r_p();
    if den <= 0.0 || s >= 1.0 {
        return f64::INFINITY;
    }
    let num = params.alpha.powi(2) * (0.5 * c.c1 * l + c.p_tilde[0][0]) + c.a;
    (num / ((1.0 - s) * den)).sqrt()
}

/// Gain bound of a certificate, +∞ when it is infeasible.
pub fn l2gain_bound_gmm(params: &AlgoParams, spec: &SpectrumModel, cert: &CertVars) -> f64 {
    let chk = mi_check(params, spec, cert);
    if !chk.feasible {
        return f64::INFINITY;
    }
    bound_formula(params, spec, cert, chk.s)
}

/// Initial-condition constant H(ξ0) for x_{−1} = x_0, given f(x0) − f*.
pub fn h_xi0(params: &AlgoParams, spec: &SpectrumModel, cert: &CertVars, f0: f64) -> f64 {
    let (mu, l) = (spec.mu(), spec.ell());
    let nu = params.nu;
    let s = s_value(params, spec, cert);
    let pn = cert.p().symmetric_eigenvalues().amax();
    let den = cert.c1 + 2.0 / l * cert.r_p();
    let lead = (1.0 + 4.0 * cert.b * nu * nu * l * l * cert.c1 / mu + cert.rho3.powi(2)) / (1.0 - s);
    lead * (4.0 * pn / mu + cert.c1) / den * f0
}

/// V_{P,c1}(ξ) from f(x_k) − f* and the errors e_k = x_k − x*, e_{k−1}.
pub fn lyapunov_value(cert: &CertVars, subopt: f64, e_k: &[f64], e_km1: &[f64]) -> f64 {
    let p = cert.p_tilde;
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    cert.c1 * subopt + p[0][0] * dot(e_k, e_k) + 2.0 * p[0][1] * dot(e_k, e_km1) + p[1][1] * dot(e_km1, e_km1)
}

fn rho_gd(alpha: f64, spec: &SpectrumModel) -> f64 {
    (1.0 - alpha * spec.mu()).abs().max((1.0 - alpha * spec.ell()).abs())
}

fn check_gd_alpha(alpha: f64, spec: &SpectrumModel) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0 / spec.ell()) {
        return Err(MrlError::InvalidParams(format!("GD stepsize must lie in (0, 2/L), got {alpha}")));
    }
    Ok(())
}

fn check_nag_alpha(alpha: f64, spec: &SpectrumModel) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0 / spec.ell() * (1.0 + 1e-12)) {
        return Err(MrlError::InvalidParams(format!("NAG stepsize must lie in (0, 1/L], got {alpha}")));
    }
    Ok(())
}

/// Explicit GD bound: the smaller of the distance- and suboptimality-based bounds.
pub fn l2gain_bound_gd(alpha: f64, spec: &SpectrumModel) -> Result<f64> {
    check_gd_alpha(alpha, spec)?;
    let (mu, l) = (spec.mu(), spec.ell());
    let dist = (0.5 * l).sqrt() * alpha / (1.0 - rho_gd(alpha, spec));
    let subopt =
        if alpha <= 1.0 / l { 1.0 / (2.0 * mu).sqrt() } else { alpha * l / ((2.0 * mu).sqrt() * (2.0 - alpha * l)) };
    Ok(dist.min(subopt))
}

/// Standard NAG momentum for stepsize α.
pub fn nag_beta(alpha: f64, mu: f64) -> f64 {
    let q = (alpha * mu).sqrt();
    (1.0 - q) / (1.0 + q)
}

/// Explicit NAG bound with β = (1−√(αμ))/(1+√(αμ)).
pub fn l2gain_bound_nag(alpha: f64, spec: &SpectrumModel) -> Result<f64> {
    check_nag_alpha(alpha, spec)?;
    let (mu, l) = (spec.mu(), spec.ell());
    let s = (alpha * mu).sqrt();
    let t1 = 4.0 * (5.0 - 2.0 * s + s * s) / (mu * (1.0 + s).powi(2));
    let t2 = alpha.sqrt() * (1.0 + alpha * l) / mu.sqrt();
    let t3 = 8.0 * alpha.powi(3) * l.powi(4) * (4.0 + (1.0 - s).powi(2)) / (mu * mu * (1.0 + s).powi(2));
    Ok((t1 + t2 + t3).sqrt())
}

/// Distance-based GD certificate: P̃11 = 1, c1 = 0, ρ0² = ρ_GD, a = α²ρ_GD/(1−ρ_GD).
///
/// c0 maximizes the minimum eigenvalue of M̃4.
pub fn gd_distance_recipe(alpha: f64, spec: &SpectrumModel) -> Result<CertVars> {
    check_gd_alpha(alpha, spec)?;
    let rho = rho_gd(alpha, spec);
    let mut c = CertVars::zero().with_p(1.0, 0.0, 0.0);
    c.rho0 = rho.sqrt();
    c.a = alpha * alpha * rho / (1.0 - rho);
    let params = AlgoParams::gd(alpha)?;
    let base = lyap_matrices(&params, spec, &c);
    let hi = 4.0 * (alpha + 1.0) / spec.mu().min(1.0);
    let (c0, _) = golden_max(|c0| min_eig4(&base.m4(c0, 0.0)), 0.0, hi, 1e-14 * hi);
    c.c0 = c0;
    Ok(c)
}

/// Suboptimality-based GD certificate: c1 = 1, P̃ = 0.
pub fn gd_suboptimality_recipe(alpha: f64, spec: &SpectrumModel) -> Result<CertVars> {
    check_gd_alpha(alpha, spec)?;
    let (mu, l) = (spec.mu(), spec.ell());
    let r = if alpha <= 1.0 / l { 1.0 } else { (2.0 - alpha * l) / (alpha * l) };
    let e = (1.0 - alpha * l).abs();
    let mut c = CertVars::zero();
    c.c1 = 1.0;
    c.a = alpha * e / (2.0 * r);
    let r0 = 1.0 - 2.0 * mu * alpha * (1.0 - 0.5 * alpha * l) + alpha * mu * e * r;
    c.rho0 = r0.max(0.0).sqrt();
    Ok(c)
}

/// NAG certificate reproducing the explicit NAG bound.
pub fn nag_recipe(alpha: f64, spec: &SpectrumModel) -> Result<CertVars> {
    check_nag_alpha(alpha, spec)?;
    let (mu, l) = (spec.mu(), spec.ell());
    let sq = (alpha * mu).sqrt();
    let op = (1.0 + sq).powi(2);
    let s1_hat = 2.0 * (5.0 - 2.0 * sq + alpha * mu) / (mu.sqrt() * op);
    let s2_hat = 8.0 * l.powi(3) * alpha * (4.0 + (1.0 - sq).powi(2)) / (mu * mu.sqrt() * op);
    let (s1, s2) = (alpha.sqrt() * s1_hat, alpha.sqrt() * s2_hat);
    let mut c = CertVars::zero();
    c.c1 = 1.0;
    c.rho0 = (1.0 - sq).sqrt();
    c.rho1 = (2.0 * alpha / (4.0 * s1 * op)).sqrt();
    c.rho2 =
        (2.0 / (mu * s1) * (alpha * alpha * mu * mu + 2.0 * alpha * mu + alpha * mu * (1.0 - sq)) / (4.0 * op)).sqrt();
    c.rho3 = (2.0 / (mu * s1) * alpha * mu * (1.0 - sq) / (4.0 * op)).sqrt();
    c.a = s1 + 0.5 * l * alpha * alpha * s2;
    c.b = l * alpha * alpha / (2.0 * s2);
    let v = Vector2::new(1.0, -(1.0 - sq));
    let p = v * v.transpose() / (2.0 * alpha);
    Ok(c.with_p(p[(0, 0)], p[(0, 1)], p[(1, 1)]))
}

/// Smallest a making M̃4 ⪰ 0 with everything else fixed, via the Schur complement.
fn a_min(params: &AlgoParams, spec: &SpectrumModel, c: &CertVars) -> Option<f64> {
    let mut c0 = *c;
    c0.a = 0.0;
    let m = lyap_matrices(params, spec, &c0).m4(c.c0, c.c1);
    let s3: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let g: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into_owned();
    let eig = SymmetricEigen::new((s3 + s3.transpose()) * 0.5);
    let scale = 1.0 + eig.eigenvalues.amax();
    if eig.eigenvalues.min() < PSD_TOL * 0.5 {
        return None;
    }
    let mut a = m[(3, 3)];
    for i in 0..3 {
        let lam = eig.eigenvalues[i];
        let proj = eig.eigenvectors.column(i).dot(&g);
        if lam <= 1e-12 * scale {
            if proj.abs() > 1e-9 * (1.0 + g.norm()) {
                return None;
            }
        } else {
            a += proj * proj / lam;
        }
    }
    Some(a.max(0.0))
}

/// Sets a to its smallest feasible value and evaluates.
fn tighten(params: &AlgoParams, spec: &SpectrumModel, mut c: CertVars) -> MiCertificate {
    if !c.admissible() && c.a == 0.0 {
        c.a = 1.0;
    }
    if !c.admissible() || s_value(params, spec, &c) >= 1.0 {
        return MiCertificate { vars: c, s: s_value(params, spec, &c), min_eig: -1.0, bound: ExtF64::INFINITY };
    }
    match a_min(params, spec, &c) {
        Some(a) => {
            c.a = a * (1.0 + 1e-10) + 1e-14;
            MiCertificate::evaluate(params, spec, c)
        }
        None => MiCertificate::evaluate(params, spec, c),
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Free coordinates of the search. P̃ = LLᵀ with L = [[l1, 0], [l2, l3]].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    /// 1 − ρ0², ρ1², ρ2², ρ3²
    gap0: f64,
    q: [f64; 3],
    b: f64,
    c0: f64,
    c1: f64,
    l: [f64; 3],
}

impl Point {
    fn vars(&self) -> CertVars {
        let [l1, l2, l3] = self.l;
        let mut c = CertVars::zero().with_p(l1 * l1, l1 * l2, l2 * l2 + l3 * l3);
        c.rho0 = (1.0 - self.gap0).max(0.0).sqrt();
        c.rho1 = self.q[0].sqrt();
        c.rho2 = self.q[1].sqrt();
        c.rho3 = self.q[2].sqrt();
        c.b = self.b;
        c.c0 = self.c0;
        c.c1 = self.c1;
        c
    }

    fn from_vars(c: &CertVars) -> Self {
        let p = c.p_tilde;
        let l1 = p[0][0].max(0.0).sqrt();
        let l2 = if l1 > 0.0 { p[0][1] / l1 } else { 0.0 };
        let l3 = (p[1][1] - l2 * l2).max(0.0).sqrt();
        Self {
            gap0: 1.0 - c.rho0 * c.rho0,
            q: [c.rho1 * c.rho1, c.rho2 * c.rho2, c.rho3 * c.rho3],
            b: c.b,
            c0: c.c0,
            c1: c.c1,
            l: [l1, l2, l3],
        }
    }

    fn coord(&self, i: usize) -> f64 {
        match i {
            0 => self.gap0,
            1..=3 => self.q[i - 1],
            4 => self.b,
            5 => self.c0,
            _ => self.l[i - 6],
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        match i {
            0 => self.gap0 = v,
            1..=3 => self.q[i - 1] = v,
            4 => self.b = v,
            5 => self.c0 = v,
            _ => self.l[i - 6] = v,
        }
    }
}

const N_COORDS: usize = 9;

fn recipes(params: &AlgoParams, spec: &SpectrumModel) -> Vec<CertVars> {
    let mut out = Vec::new();
    let (alpha, beta, nu) = (params.alpha, params.beta, params.nu);
    if beta == 0.0 && nu == 0.0 {
        out.extend(gd_distance_recipe(alpha, spec).ok());
        out.extend(gd_suboptimality_recipe(alpha, spec).ok());
    }
    if beta == nu && (beta - nag_beta(alpha, spec.mu())).abs() <= 1e-12 * (1.0 + beta) {
        out.extend(nag_recipe(alpha, spec).ok());
    }
    out
}

fn better(a: &(usize, MiCertificate), b: &(usize, MiCertificate)) -> bool {
    let (x, y) = (a.1.bound.get(), b.1.bound.get());
    x < y || (x == y && a.0 < b.0)
}

fn best_of(items: Vec<(usize, MiCertificate)>) -> Option<(usize, MiCertificate)> {
    items.into_iter().reduce(|a, b| if better(&b, &a) { b } else { a })
}

/// Grid, random-lattice and coordinate-descent search for the smallest certified bound.
///
/// Deterministic for a given seed. Returns [`MiCertificate::infeasible`] when nothing
/// feasible is found within the evaluation budget.
pub fn mi_search(params: &AlgoParams, spec: &SpectrumModel, budget: usize, seed: u64) -> MiCertificate {
    let budget = budget.max(1);
    let mu = spec.mu();
    let alpha = params.alpha;
    let mut used = 0usize;
    let mut incumbent: Option<(usize, MiCertificate)> = None;
    let push = |c: MiCertificate, id: usize, inc: &mut Option<(usize, MiCertificate)>| {
        let cand = (id, c);
        if inc.as_ref().is_none_or(|b| better(&cand, b)) {
            *inc = Some(cand);
        }
    };

    // seeded recipes, as given and with a tightened
    for (i, r) in recipes(params, spec).into_iter().enumerate() {
        if used >= budget {
            break;
        }
        push(MiCertificate::evaluate(params, spec, r), i, &mut incumbent);
        push(tighten(params, spec, r), i, &mut incumbent);
        used += 2;
    }

    // random lattice over log-grids
    let grid = log_grid(1e-6, 1e2, 13);
    let unit: Vec<f64> = grid.iter().copied().filter(|&v| v < 1.0).collect();
    let ts = [-1.0, 0.0, 0.5, 1.0, 1.5, 2.0];
    let inv = (0.5 / alpha).sqrt();
    let lattice_budget = (budget.saturating_sub(used)) * 3 / 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, xs: &[f64], zero: bool| -> f64 {
        let n = xs.len() + usize::from(zero);
        let i = rng.gen_range(0..n);
        if i < xs.len() {
            xs[i]
        } else {
            0.0
        }
    };
    let points: Vec<Point> = (0..lattice_budget)
        .map(|_| {
            let c1_mode = rng.gen_bool(0.75);
            let gap0 = pick(&mut rng, &unit, false);
            let c0 = pick(&mut rng, &grid, true);
            if c1_mode {
                let q = [pick(&mut rng, &unit, true), pick(&mut rng, &unit, true), pick(&mut rng, &unit, true)];
                let b = pick(&mut rng, &grid, true);
                let l = match rng.gen_range(0..3) {
                    0 => {
                        let sig = pick(&mut rng, &grid, true).sqrt();
                        let t = ts[rng.gen_range(0..ts.len())];
                        [sig * inv, sig * (t * (0.5 * mu).sqrt() - inv), 0.0]
                    }
                    1 => {
                        let c = pick(&mut rng, &grid, false).sqrt();
                        [c, 0.0, c]
                    }
                    _ => [0.0, 0.0, 0.0],
                };
                Point { gap0, q, b, c0, c1: 1.0, l }
            } else {
                let l2 = pick(&mut rng, &grid, true) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
                let l3 = pick(&mut rng, &grid, true).sqrt();
                Point { gap0, q: [0.0; 3], b: 0.0, c0, c1: 0.0, l: [1.0, l2, l3] }
            }
        })
        .collect();
    used += points.len();
    let lattice_best =
        best_of(points.par_iter().enumerate().map(|(i, p)| (1000 + i, tighten(params, spec, p.vars()))).collect());
    if let Some((id, c)) = lattice_best {
        push(c, id, &mut incumbent);
    }

    // coordinate descent from the incumbent
    if let Some((_, start)) = incumbent.filter(|(_, c)| c.is_feasible()) {
        let mut cur = Point::from_vars(&start.vars);
        let mut cur_bound = tighten(params, spec, cur.vars()).bound.get().min(start.bound.get());
        let mut best_cert = start;
        let mut step = 1.0f64;
        while used < budget && step > 1e-6 {
            let mut improved = false;
            for i in 0..N_COORDS {
                if cur.c1 == 0.0 && (1..=4).contains(&i) {
                    continue;
                }
                if cur.c1 == 0.0 && i == 6 {
                    continue;
                }
                let x = cur.coord(i);
                let trials = if i == 7 {
                    let sc = x.abs().max(cur.l[0]).max(1e-6);
                    [x + step * sc, x - step * sc]
                } else if x > 0.0 {
                    [x * step.exp(), x * (-step).exp()]
                } else {
                    [1e-8 * step.exp(), 1e-6 * step]
                };
                for v in trials {
                    if used >= budget {
                        break;
                    }
                    let mut t = cur;
                    t.set(i, v);
                    if t.gap0 > 1.0 || t.q.iter().any(|&q| q >= 1.0) {
                        continue;
                    }
                    used += 1;
                    let c = tighten(params, spec, t.vars());
                    if c.bound.get() < cur_bound {
                        cur = t;
                        cur_bound = c.bound.get();
                        best_cert = c;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        push(best_cert, usize::MAX, &mut incumbent);
    }

    incumbent.map(|(_, c)| c).filter(|c| c.is_feasible()).unwrap_or_else(|| MiCertificate::infeasible(params, spec))
}

/// Where the constants of an ergodic bound come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundSource {
    Certificate(CertVars),
    NagExplicit,
    GdExplicit,
}

/// f(x̄_K) − f* ≤ gain_sq·Σ‖w‖²/(K+1) + init_const/(K+1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicBound {
    pub gain_sq: f64,
    pub init_const: f64,
}

impl ErgodicBound {
    /// Right-hand side after K+1 terms with cumulative noise energy `energy`.
    pub fn at(&self, k: usize, energy: f64) -> f64 {
        (self.gain_sq * energy + self.init_const) / (k as f64 + 1.0)
    }
}

/// Ergodic-average bound with x_{−1} = x_0 and f(x0) − f* = `f0`.
pub fn ergodic_bound(params: &AlgoParams, spec: &SpectrumModel, source: BoundSource, f0: f64) -> Result<ErgodicBound> {
    if !(f0 >= 0.0) {
        return Err(MrlError::InvalidParams("initial suboptimality must be nonnegative".into()));
    }
    match source {
        BoundSource::Certificate(c) => {
            let g = l2gain_bound_gmm(params, spec, &c);
            if !g.is_finite() {
                return Err(MrlError::Numerical("certificate is infeasible".into()));
            }
            Ok(ErgodicBound { gain_sq: g * g, init_const: h_xi0(params, spec, &c, f0) })
        }
        BoundSource::NagExplicit => {
            let g = l2gain_bound_nag(params.alpha, spec)?;
            let s = (params.alpha * spec.mu()).sqrt();
            // V0 ≤ f0 + (μ/2)‖x0 − x*‖² ≤ 2 f0 for this P̃
            let v0 = 2.0 * f0;
            let h = 2.0 / s
                * (1.0
                    + s * (1.0 - s) / (4.0 * (5.0 - 2.0 * s + s * s))
                    + s * (1.0 - s).powi(2) / (4.0 * (4.0 + (1.0 - s).powi(2))))
                * v0;
            Ok(ErgodicBound { gain_sq: g * g, init_const: h })
        }
        BoundSource::GdExplicit => {
            let a = gd_distance_recipe(params.alpha, spec)?;
            let b = gd_suboptimality_recipe(params.alpha, spec)?;
            let ea = ergodic_bound(params, spec, BoundSource::Certificate(a), f0);
            let eb = ergodic_bound(params, spec, BoundSource::Certificate(b), f0);
            match (ea, eb) {
                (Ok(x), Ok(y)) => Ok(if x.gain_sq <= y.gain_sq { x } else { y }),
                (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
                (Err(e), Err(_)) => Err(e),
            }
        }
    }
}

/// Leading 3×3 block S_ρ(P̃) of M̃4 with c1 = 1 and ρ1 = ρ2 = ρ3 = 0.
pub fn s_rho(params: &AlgoParams, spec: &SpectrumModel, rho: f64, p: &Matrix2<f64>, c0: f64) -> Matrix3<f64> {
    let mut c = CertVars::zero().with_p(p[(0, 0)], p[(0, 1)], p[(1, 1)]);
    c.rho0 = rho;
    c.c1 = 1.0;
    c.c0 = c0;
    lyap_matrices(params, spec, &c).m4(c0, 1.0).fixed_view::<3, 3>(0, 0).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub feasible: bool,
    pub p_tilde: Option<[[f64; 2]; 2]>,
    pub c0: f64,
    pub min_eig: f64,
    pub evaluations: usize,
}

fn rank_one(alpha: f64, mu: f64, sigma: f64, t: f64) -> Matrix2<f64> {
    let inv = (0.5 / alpha).sqrt();
    let v = Vector2::new(inv, t * (0.5 * mu).sqrt() - inv);
    v * v.transpose() * sigma
}

/// Searches P̃ ⪰ 0 and c0 ≥ 0 with S_ρ(P̃) ⪰ 0 for NAG (β = ν).
///
/// A structured inner approximation: success certifies the rate, failure is inconclusive.
pub fn rate_certificate_feasible(
    alpha: f64,
    beta: f64,
    rho: f64,
    spec: &SpectrumModel,
    budget: usize,
) -> RateCertificate {
    let params = match AlgoParams::nag(alpha, beta) {
        Ok(p) => p,
        Err(_) => {
            return RateCertificate {
                feasible: false,
                p_tilde: None,
                c0: 0.0,
                min_eig: f64::NEG_INFINITY,
                evaluations: 0,
            }
        }
    };
    let mu = spec.mu();
    let grid = log_grid(1e-4, 1e2, 13);
    let mut cands: Vec<Matrix2<f64>> = vec![rank_one(alpha, mu, 1.0, 1.0)];
    for t in [0.0, 0.25, 0.5, 0.75, 1.25, 1.5, 2.0, -0.5, -1.0] {
        cands.push(rank_one(alpha, mu, 1.0, t));
    }
    for &sig in &grid {
        for t in [1.0, 0.5, 0.0, 1.5, 2.0] {
            cands.push(rank_one(alpha, mu, sig, t));
        }
    }
    for &c in &grid {
        cands.push(Matrix2::identity() * c);
    }
    for &p11 in &grid {
        for &p22 in &grid {
            for corr in [-0.99, -0.9, -0.5, 0.0, 0.5] {
                let off = corr * (p11 * p22).sqrt();
                cands.push(Matrix2::new(p11, off, off, p22));
            }
        }
    }
    let mut used = 0usize;
    let mut best = f64::NEG_INFINITY;
    let c0_hi = 10.0 * (1.0 + 1.0 / alpha) / mu;
    for p in cands {
        if used >= budget {
            break;
        }
        let f = |c0: f64| min_eig3(&s_rho(&params, spec, rho, &p, c0));
        let at0 = f(0.0);
        used += 1;
        let (c0, val) = if at0 >= PSD_TOL {
            (0.0, at0)
        } else {
            used += 60;
            let (x, v) = golden_max(f, 0.0, c0_hi, 1e-12 * c0_hi);
            if v > at0 {
                (x, v)
            } else {
                (0.0, at0)
            }
        };
        best = best.max(val);
        if val >= PSD_TOL {
            return RateCertificate {
                feasible: true,
                p_tilde: Some([[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]]),
                c0,
                min_eig: val,
                evaluations: used,
            };
        }
    }
    RateCertificate { feasible: false, p_tilde: None, c0: 0.0, min_eig: best, evaluations: used }
}
