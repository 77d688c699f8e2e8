//! Problem instances: quadratics with prescribed spectra, the cyclic-Laplacian
//! quadratic and the smooth strongly convex test objective.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MrlError, Result};
use crate::linalg::sorted_sym_eigen;

/// Class constants (μ, L) and optionally the full sorted Hessian spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    mu: f64,
    #[serde(rename = "L")]
    ell: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eigenvalues: Option<Vec<f64>>,
}

impl SpectrumModel {
    pub fn new(mu: f64, ell: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && ell.is_finite() && mu < ell) {
            return Err(MrlError::InvalidSpectrum(format!("need 0 < mu < L, got mu={mu}, L={ell}")));
        }
        Ok(Self { mu, ell, eigenvalues: None })
    }

    /// Builds a model from a full spectrum; μ and L are its extremes.
    pub fn from_eigenvalues(mut eigs: Vec<f64>) -> Result<Self> {
        if eigs.len() < 2 {
            return Err(MrlError::InvalidSpectrum("need at least two eigenvalues".into()));
        }
        if eigs.iter().any(|e| !e.is_finite()) {
            return Err(MrlError::InvalidSpectrum("non-finite eigenvalue".into()));
        }
        eigs.sort_by(f64::total_cmp);
        let mut s = Self::new(eigs[0], eigs[eigs.len() - 1])?;
        s.eigenvalues = Some(eigs);
        Ok(s)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn kappa(&self) -> f64 {
        self.ell / self.mu
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    /// Drops interior information, keeping only the class constants.
    pub fn extremes_only(&self) -> Self {
        Self { mu: self.mu, ell: self.ell, eigenvalues: None }
    }

    /// Checks the serialized invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let base = Self::new(self.mu, self.ell)?;
        if let Some(e) = &self.eigenvalues {
            let rebuilt = Self::from_eigenvalues(e.clone())?;
            if rebuilt.mu != base.mu || rebuilt.ell != base.ell || rebuilt.eigenvalues != self.eigenvalues {
                return Err(MrlError::InvalidSpectrum("eigenvalue list must be sorted with extremes mu and L".into()));
            }
        }
        Ok(())
    }
}

/// A smooth strongly convex objective with first-order access.
pub trait SmoothOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
    fn mu(&self) -> f64;
    fn ell(&self) -> f64;
    /// Minimizer and optimal value.
    fn optimum(&self) -> (DVector<f64>, f64);
    /// f(x) − f*.
    fn suboptimality(&self, x: &DVector<f64>) -> f64 {
        self.value(x) - self.optimum().1
    }
}

/// f(x) = ½ xᵀQx + pᵀx + r0 with Q = U diag(Λ) Uᵀ.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    u: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    q: DMatrix<f64>,
    p: DVector<f64>,
    r0: f64,
    xstar: DVector<f64>,
    fstar: f64,
}

impl QuadraticProblem {
    /// Assembles a quadratic from an orthonormal basis and ascending eigenvalues.
    pub fn from_parts(u: DMatrix<f64>, eigenvalues: Vec<f64>, p: DVector<f64>, r0: f64) -> Result<Self> {
        let d = eigenvalues.len();
        if u.nrows() != d || u.ncols() != d {
            return Err(MrlError::DimensionMismatch { expected: d, got: u.nrows() });
        }
        if p.len() != d {
            return Err(MrlError::DimensionMismatch { expected: d, got: p.len() });
        }
        if eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(MrlError::InvalidSpectrum("Hessian must be positive definite".into()));
        }
        let orth = (u.transpose() * &u - DMatrix::identity(d, d)).amax();
        if orth > 1e-10 {
            return Err(MrlError::InvalidSpectrum(format!("basis not orthonormal ({orth:e})")));
        }
        let lam = DVector::from_column_slice(&eigenvalues);
        let q = &u * DMatrix::from_diagonal(&lam) * u.transpose();
        let q = (&q + q.transpose()) * 0.5;
        // x* = −U Λ⁻¹ Uᵀ p
        let up = u.transpose() * &p;
        let xstar = -(&u * up.component_div(&lam));
        let fstar = 0.5 * xstar.dot(&(&q * &xstar)) + p.dot(&xstar) + r0;
        Ok(Self { u, eigenvalues, q, p, r0, xstar, fstar })
    }

    /// Eigendecomposes a dense symmetric positive definite Q.
    pub fn from_dense(q: &DMatrix<f64>, p: DVector<f64>, r0: f64) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(MrlError::DimensionMismatch { expected: q.nrows(), got: q.ncols() });
        }
        if (q - q.transpose()).amax() > 1e-10 * q.amax().max(1.0) {
            return Err(MrlError::InvalidSpectrum("Q is not symmetric".into()));
        }
        let (vals, vecs) = sorted_sym_eigen(q);
        Self::from_parts(vecs, vals, p, r0)
    }

    /// Parses a CSV of Q entries: a header line `d`, a line holding d, then d rows.
    pub fn from_q_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        match lines.next() {
            Some(h) if h.trim_matches('"') == "d" => {}
            other => return Err(MrlError::Parse(format!("expected header `d`, got {other:?}"))),
        }
        let d: usize = lines
            .next()
            .ok_or_else(|| MrlError::Parse("missing dimension line".into()))?
            .parse()
            .map_err(|e| MrlError::Parse(format!("bad dimension: {e}")))?;
        let mut entries = Vec::with_capacity(d * d);
        for (i, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| MrlError::Parse(format!("row {i}: {e}")))?;
            if row.len() != d {
                return Err(MrlError::DimensionMismatch { expected: d, got: row.len() });
            }
            entries.extend(row);
        }
        if entries.len() != d * d {
            return Err(MrlError::DimensionMismatch { expected: d * d, got: entries.len() });
        }
        Self::from_dense(&DMatrix::from_row_slice(d, d, &entries), DVector::zeros(d), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn constant(&self) -> f64 {
        self.r0
    }

    pub fn xstar(&self) -> &DVector<f64> {
        &self.xstar
    }

    pub fn fstar(&self) -> f64 {
        self.fstar
    }

    pub fn spectrum(&self) -> SpectrumModel {
        SpectrumModel::from_eigenvalues(self.eigenvalues.clone()).expect("constructed quadratics have a valid spectrum")
    }

    /// Unit eigenvector for the i-th smallest eigenvalue.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.u.column(i).into_owned()
    }

    /// f(x) − f* evaluated as ½(x−x*)ᵀQ(x−x*).
    pub fn suboptimality(&self, x: &DVector<f64>) -> f64 {
        let e = x - &self.xstar;
        0.5 * e.dot(&(&self.q * &e))
    }
}

impl SmoothOracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn suboptimality(&self, x: &DVector<f64>) -> f64 {
        QuadraticProblem::suboptimality(self, x)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.p.dot(x) + self.r0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.p
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.q.clone())
    }

    fn mu(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn ell(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    fn optimum(&self) -> (DVector<f64>, f64) {
        (self.xstar.clone(), self.fstar)
    }
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes the factor Haar distributed and deterministic
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random orthogonal conjugation of a prescribed (or randomly drawn) spectrum.
pub fn make_quadratic_from_spectrum(spec: &SpectrumModel, dim: usize, seed: u64) -> Result<QuadraticProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigs = match spec.eigenvalues() {
        Some(e) => {
            if e.len() != dim {
                return Err(MrlError::DimensionMismatch { expected: e.len(), got: dim });
            }
            e.to_vec()
        }
        None => {
            if dim < 2 {
                return Err(MrlError::InvalidSpectrum("dim must be at least 2 to realize both mu and L".into()));
            }
            let mut e: Vec<f64> = (0..dim)
                .map(|i| match i {
                    0 => spec.mu(),
                    i if i == dim - 1 => spec.ell(),
                    _ => rng.gen_range(spec.mu()..=spec.ell()),
                })
                .collect();
            e.sort_by(f64::total_cmp);
            e
        }
    };
    let u = random_orthogonal(dim, &mut rng);
    let xstar = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lam = DVector::from_column_slice(&eigs);
    let q = &u * DMatrix::from_diagonal(&lam) * u.transpose();
    let p = -(q * xstar);
    QuadraticProblem::from_parts(u, eigs, p, 0.0)
}

/// The explicit cyclic-graph Laplacian (degree 2, unit weights).
pub fn cyclic_laplacian(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            2.0
        } else if (i + 1) % dim == j || (j + 1) % dim == i {
            -1.0
        } else {
            0.0
        }
    })
}

/// Quadratic with Hessian equal to the cyclic Laplacian plus `reg`·I and minimizer 0.
///
/// The Hessian spectrum is {2 − 2cos(2πj/d) + reg}, so μ = reg and, for even d, L = 4 + reg.
pub fn cyclic_laplacian_quadratic(dim: usize, reg: f64) -> Result<QuadraticProblem> {
    if dim < 3 {
        return Err(MrlError::InvalidSpectrum("cyclic Laplacian needs dim >= 3".into()));
    }
    if !(reg > 0.0) {
        return Err(MrlError::InvalidSpectrum("reg must be positive".into()));
    }
    let h = cyclic_laplacian(dim) + DMatrix::identity(dim, dim) * reg;
    let (mut vals, vecs) = sorted_sym_eigen(&h);
    // analytic extremes remove eigensolver rounding from the class constants
    vals[0] = reg;
    if dim.is_multiple_of(2) {
        vals[dim - 1] = 4.0 + reg;
    }
    QuadraticProblem::from_parts(vecs, vals, DVector::zeros(dim), 0.0)
}

/// g(x) = ½x²e^{−r/x} for x > 0, else 0.
pub fn g_value(x: f64, r: f64) -> f64 {
    if x > 0.0 {
        0.5 * x * x * (-r / x).exp()
    } else {
        0.0
    }
}

pub fn g_prime(x: f64, r: f64) -> f64 {
    if x > 0.0 {
        (-r / x).exp() * (x + 0.5 * r)
    } else {
        0.0
    }
}

pub fn g_second(x: f64, r: f64) -> f64 {
    if x > 0.0 {
        let u = r / x;
        (-u).exp() * (1.0 + u + 0.5 * u * u)
    } else {
        0.0
    }
}

/// f(x) = Σ g(a_iᵀx − b_i) + (μ/2)‖x‖².
#[derive(Debug)]
pub struct ScvxTestFunction {
    /// d×p, columns are the a_i after rescaling.
    a: DMatrix<f64>,
    b: DVector<f64>,
    mu: f64,
    ell: f64,
    rparam: f64,
    optimum: OnceLock<(DVector<f64>, f64)>,
}

impl Clone for ScvxTestFunction {
    fn clone(&self) -> Self {
        let optimum = OnceLock::new();
        if let Some(v) = self.optimum.get() {
            let _ = optimum.set(v.clone());
        }
        Self { a: self.a.clone(), b: self.b.clone(), mu: self.mu, ell: self.ell, rparam: self.rparam, optimum }
    }
}

pub const DEFAULT_RPARAM: f64 = 1.0;

/// Builds the test objective; the stacked A is rescaled so ‖A‖ = √(target_L − μ).
pub fn scvx_test_function(
    a_vectors: &[DVector<f64>],
    b: DVector<f64>,
    mu: f64,
    rparam: f64,
    target_l: f64,
) -> Result<ScvxTestFunction> {
    if !(target_l > mu) || !(mu > 0.0) {
        return Err(MrlError::InvalidSpectrum(format!("need 0 < mu < target_L, got mu={mu}, L={target_l}")));
    }
    if !(rparam > 0.0) {
        return Err(MrlError::InvalidParams("rparam must be positive".into()));
    }
    let p = a_vectors.len();
    if p == 0 || b.len() != p {
        return Err(MrlError::DimensionMismatch { expected: p, got: b.len() });
    }
    let d = a_vectors[0].len();
    if let Some(bad) = a_vectors.iter().find(|v| v.len() != d) {
        return Err(MrlError::DimensionMismatch { expected: d, got: bad.len() });
    }
    let mut a = DMatrix::from_columns(a_vectors);
    let norm = a.singular_values().max();
    if !(norm > 0.0) {
        return Err(MrlError::InvalidParams("A must be nonzero".into()));
    }
    a *= (target_l - mu).sqrt() / norm;
    Ok(ScvxTestFunction { a, b, mu, ell: target_l, rparam, optimum: OnceLock::new() })
}

impl ScvxTestFunction {
    /// Random instance with A, b uniform on [−½, ½].
    pub fn random(dim: usize, p: usize, mu: f64, target_l: f64, rparam: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<DVector<f64>> = (0..p).map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-0.5..0.5))).collect();
        let b = DVector::from_fn(p, |_, _| rng.gen_range(-0.5..0.5));
        scvx_test_function(&cols, b, mu, rparam, target_l)
    }

    pub fn rparam(&self) -> f64 {
        self.rparam
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(x) - &self.b
    }
}

impl SmoothOracle for ScvxTestFunction {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let r = self.residuals(x);
        r.iter().map(|&t| g_value(t, self.rparam)).sum::<f64>() + 0.5 * self.mu * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let gp = self.residuals(x).map(|t| g_prime(t, self.rparam));
        &self.a * gp + x * self.mu
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let w = self.residuals(x).map(|t| g_second(t, self.rparam));
        let aw = &self.a * DMatrix::from_diagonal(&w);
        let d = self.dim();
        Some(aw * self.a.transpose() + DMatrix::identity(d, d) * self.mu)
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn ell(&self) -> f64 {
        self.ell
    }

    fn optimum(&self) -> (DVector<f64>, f64) {
        self.optimum.get_or_init(|| minimize_nag(self, 1e-12, 1_000_000)).clone()
    }
}

/// Exact-gradient NAG with the textbook parameters, run until ‖∇f‖ ≤ tol.
pub fn minimize_nag<O: SmoothOracle + ?Sized>(oracle: &O, tol: f64, max_iter: usize) -> (DVector<f64>, f64) {
    let (mu, ell) = (oracle.mu(), oracle.ell());
    let alpha = 1.0 / ell;
    let s = (alpha * mu).sqrt();
    let beta = (1.0 - s) / (1.0 + s);
    let mut x = DVector::zeros(oracle.dim());
    let mut x_prev = x.clone();
    for _ in 0..max_iter {
        let g_x = oracle.gradient(&x);
        if g_x.norm() <= tol {
            break;
        }
        let y = &x + (&x - &x_prev) * beta;
        let g = oracle.gradient(&y);
        let next = &y - g * alpha;
        x_prev = std::mem::replace(&mut x, next);
    }
    let f = oracle.value(&x);
    (x, f)
}

/// ∇f(y) + w.
pub fn noisy_gradient<O: SmoothOracle + ?Sized>(
    oracle: &O,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    if y.len() != oracle.dim() {
        return Err(MrlError::DimensionMismatch { expected: oracle.dim(), got: y.len() });
    }
    if w.len() != oracle.dim() {
        return Err(MrlError::DimensionMismatch { expected: oracle.dim(), got: w.len() });
    }
    Ok(oracle.gradient(y) + w)
}

/// Problem description accepted by the CLI and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Spectrum {
        mu: f64,
        #[serde(rename = "L")]
        ell: f64,
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    CyclicLaplacian {
        dim: usize,
        reg: f64,
    },
    ScvxTest {
        mu: f64,
        #[serde(rename = "L")]
        ell: f64,
        dim: usize,
        #[serde(default = "default_terms")]
        terms: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_rparam")]
        rparam: f64,
    },
}

fn default_terms() -> usize {
    5
}

fn default_rparam() -> f64 {
    DEFAULT_RPARAM
}

/// A built problem instance.
#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Scvx(ScvxTestFunction),
}

impl Problem {
    pub fn oracle(&self) -> &dyn SmoothOracle {
        match self {
            Problem::Quadratic(q) => q,
            Problem::Scvx(s) => s,
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match *self {
            ProblemSpec::Spectrum { mu, ell, dim, seed } => {
                let spec = SpectrumModel::new(mu, ell)?;
                make_quadratic_from_spectrum(&spec, dim, seed).map(Problem::Quadratic)
            }
            ProblemSpec::CyclicLaplacian { dim, reg } => cyclic_laplacian_quadratic(dim, reg).map(Problem::Quadratic),
            ProblemSpec::ScvxTest { mu, ell, dim, terms, seed, rparam } => {
                ScvxTestFunction::random(dim, terms, mu, ell, rparam, seed).map(Problem::Scvx)
            }
        }
    }
}
