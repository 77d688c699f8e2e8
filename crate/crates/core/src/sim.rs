//! Inexact GMM trajectories and empirical ℓ2 gains.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{preset_params, Method};
use crate::error::{MrlError, Result};
use crate::ext::fmt_g17;
use crate::linalg::KahanSum;
use crate::lti::{spectral_radius, AlgoParams};
use crate::noise::{worst_case_noise, NoiseSeq};
use crate::problem::{cyclic_laplacian_quadratic, QuadraticProblem, SmoothOracle};

/// Any coordinate beyond this magnitude counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Supplies w_k given (x_{k−1}, x_k).
pub trait NoiseProvider {
    fn next(&mut self, k: usize, x_prev: &DVector<f64>, x: &DVector<f64>) -> DVector<f64>;
}

/// No gradient error.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseProvider for ZeroNoise {
    fn next(&mut self, _k: usize, _xp: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }
}

/// Replays a finite sequence, then zeros.
impl NoiseProvider for &NoiseSeq {
    fn next(&mut self, k: usize, _xp: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        self.get(k).cloned().unwrap_or_else(|| DVector::zeros(x.len()))
    }
}

impl NoiseProvider for &[DVector<f64>] {
    fn next(&mut self, k: usize, _xp: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        self.get(k).cloned().unwrap_or_else(|| DVector::zeros(x.len()))
    }
}

/// Adapts a closure `(k, x_prev, x) -> w_k`.
pub struct FnNoise<F>(pub F);

impl<F: FnMut(usize, &DVector<f64>, &DVector<f64>) -> DVector<f64>> NoiseProvider for FnNoise<F> {
    fn next(&mut self, k: usize, x_prev: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        (self.0)(k, x_prev, x)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep every n-th iterate (0 keeps none).
    pub store_every: usize,
    /// Track f(x̄_k) − f* at every step.
    pub ergodic: bool,
}

/// One simulated trajectory; index k runs over 0..=K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    #[serde(skip)]
    pub iterates: Vec<(usize, DVector<f64>)>,
    pub subopt: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// ‖w_k‖² for the errors actually injected, k < K.
    pub noise_norm_sq: Vec<f64>,
    pub noise_energy: f64,
    /// f(x̄_k) − f* per step when tracked, else only the final value.
    pub ergodic: Vec<f64>,
    pub diverged: bool,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.subopt.len().saturating_sub(1)
    }

    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn peak(&self) -> f64 {
        self.subopt.iter().copied().fold(0.0, f64::max)
    }

    /// √(Σ subopt / Σ‖w‖²); meaningful when x0 = x*.
    pub fn empirical_gain(&self) -> Option<f64> {
        (self.noise_energy > 0.0).then(|| (self.total() / self.noise_energy).sqrt())
    }

    pub fn ergodic_value(&self) -> Option<f64> {
        self.ergodic.last().copied()
    }

    /// Running Σ_{j≤k} ‖w_j‖², aligned with `cumulative` for k < K.
    pub fn noise_prefix(&self) -> Vec<f64> {
        let mut acc = KahanSum::default();
        self.noise_norm_sq
            .iter()
            .map(|&v| {
                acc.add(v);
                acc.value()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,subopt,cumulative,noise_norm_sq\n");
        for (k, (s, c)) in self.subopt.iter().zip(&self.cumulative).enumerate() {
            let w = self.noise_norm_sq.get(k).copied().unwrap_or(0.0);
            out.push_str(&format!("{k},{},{},{}\n", fmt_g17(*s), fmt_g17(*c), fmt_g17(w)));
        }
        out
    }
}

fn diverged(x: &DVector<f64>) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
}

/// Runs up to `max_k` steps, stopping early once `stop(k, trace)` holds.
pub fn run_until<O, N, S>(
    params: &AlgoParams,
    oracle: &O,
    x0: &DVector<f64>,
    noise: &mut N,
    max_k: usize,
    opts: RunOptions,
    mut stop: S,
) -> Result<Trace>
where
    O: SmoothOracle + ?Sized,
    N: NoiseProvider + ?Sized,
    S: FnMut(usize, &Trace) -> bool,
{
    if max_k == 0 {
        return Err(MrlError::InvalidParams("K must be at least 1".into()));
    }
    let d = oracle.dim();
    if x0.len() != d {
        return Err(MrlError::DimensionMismatch { expected: d, got: x0.len() });
    }
    let mut tr = Trace {
        iterates: Vec::new(),
        subopt: Vec::with_capacity(max_k + 1),
        cumulative: Vec::with_capacity(max_k + 1),
        noise_norm_sq: Vec::with_capacity(max_k),
        noise_energy: 0.0,
        ergodic: Vec::new(),
        diverged: false,
    };
    let mut cum = KahanSum::default();
    let mut energy = KahanSum::default();
    let mut xsum = x0.clone();
    let mut record = |tr: &mut Trace, k: usize, x: &DVector<f64>, xsum: &DVector<f64>| {
        let s = oracle.suboptimality(x);
        cum.add(s);
        tr.subopt.push(s);
        tr.cumulative.push(cum.value());
        if opts.store_every > 0 && k.is_multiple_of(opts.store_every) {
            tr.iterates.push((k, x.clone()));
        }
        if opts.ergodic {
            tr.ergodic.push(oracle.suboptimality(&(xsum / (k as f64 + 1.0))));
        }
    };
    record(&mut tr, 0, x0, &xsum);
    let (mut x_prev, mut x) = (x0.clone(), x0.clone());
    for k in 0..max_k {
        let w = noise.next(k, &x_prev, &x);
        if w.len() != d {
            return Err(MrlError::DimensionMismatch { expected: d, got: w.len() });
        }
        let nw = w.norm_squared();
        energy.add(nw);
        tr.noise_norm_sq.push(nw);
        tr.noise_energy = energy.value();
        let x_next = crate::noise::gmm_step(params, oracle, &x_prev, &x, &w);
        if diverged(&x_next) {
            tr.diverged = true;
            break;
        }
        x_prev = std::mem::replace(&mut x, x_next);
        xsum += &x;
        record(&mut tr, k + 1, &x, &xsum);
        if stop(k + 1, &tr) {
            break;
        }
    }
    if !opts.ergodic && !tr.diverged {
        tr.ergodic.push(oracle.suboptimality(&(xsum / tr.subopt.len() as f64)));
    }
    Ok(tr)
}

/// x_{k+1} = x_k − α(∇f(y_k) + w_k) + β(x_k − x_{k−1}), y_k = x_k + ν(x_k − x_{k−1}), x_{−1} = x_0.
pub fn run_inexact_gmm<O, N>(
    params: &AlgoParams,
    oracle: &O,
    x0: &DVector<f64>,
    noise: &mut N,
    k: usize,
) -> Result<Trace>
where
    O: SmoothOracle + ?Sized,
    N: NoiseProvider + ?Sized,
{
    run_until(params, oracle, x0, noise, k, RunOptions::default(), |_, _| false)
}

/// Stopping rule for runs driven by a finite noise sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KPolicy {
    /// Stop once the noise is exhausted and subopt < tail_rel·peak.
    pub tail_rel: f64,
    pub max_steps: usize,
}

impl Default for KPolicy {
    fn default() -> Self {
        Self { tail_rel: 1e-14, max_steps: 2_000_000 }
    }
}

/// Replays `seq` from x0 and continues noiselessly until the tail rule fires.
pub fn run_with_tail<O: SmoothOracle + ?Sized>(
    params: &AlgoParams,
    oracle: &O,
    x0: &DVector<f64>,
    seq: &NoiseSeq,
    policy: KPolicy,
) -> Result<Trace> {
    let n = seq.len();
    let mut src = seq;
    run_until(params, oracle, x0, &mut src, policy.max_steps, RunOptions::default(), |k, tr| {
        k >= n && tr.subopt[k] <= policy.tail_rel * tr.peak()
    })
}

/// Empirical gain of the unnormalized worst-case noise for each h, started at x*.
pub fn empirical_gain_sweep(
    params: &AlgoParams,
    problem: &QuadraticProblem,
    h_list: &[f64],
    policy: KPolicy,
) -> Result<Vec<(f64, f64)>> {
    let rate = spectral_radius(params, &problem.spectrum());
    if !(rate < 1.0) {
        return Err(MrlError::Divergent { rate });
    }
    h_list
        .par_iter()
        .map(|&h| {
            let seq = worst_case_noise(params, problem, h, None, false)?;
            let tr = run_with_tail(params, problem, problem.xstar(), &seq, policy)?;
            if tr.diverged {
                return Err(MrlError::Divergent { rate });
            }
            Ok((h, tr.empirical_gain().unwrap_or(0.0)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section6Config {
    pub dim: usize,
    pub reg: f64,
    pub h: f64,
    pub panels: Vec<Vec<String>>,
    pub policy: KPolicy,
}

impl Default for Section6Config {
    fn default() -> Self {
        let names = |v: &[Method]| v.iter().map(|m| m.to_string()).collect();
        Self {
            dim: 100,
            reg: 0.01,
            h: 0.1,
            panels: vec![
                names(&[Method::HbFastest, Method::GdFastest]),
                names(&[Method::RsGd, Method::NagPopular, Method::RsHb]),
            ],
            policy: KPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub params: AlgoParams,
    pub h: f64,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub panel: usize,
    pub runs: Vec<MethodRun>,
}

/// Manifest entry for one bundle: everything needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub panel: usize,
    pub methods: Vec<String>,
    pub params: Vec<AlgoParams>,
    pub h: f64,
    pub dim: usize,
    pub reg: f64,
    pub seeds: Vec<u64>,
}

impl TraceBundle {
    pub fn manifest(&self, cfg: &Section6Config) -> BundleManifest {
        BundleManifest {
            panel: self.panel,
            methods: self.runs.iter().map(|r| r.method.clone()).collect(),
            params: self.runs.iter().map(|r| r.params).collect(),
            h: cfg.h,
            dim: cfg.dim,
            reg: cfg.reg,
            seeds: Vec::new(),
        }
    }
}

/// Cyclic-Laplacian experiment from the optimum under each method's own unit-norm worst-case noise.
pub fn section6_experiment(cfg: &Section6Config) -> Result<Vec<TraceBundle>> {
    let problem = cyclic_laplacian_quadratic(cfg.dim, cfg.reg)?;
    let spec = problem.spectrum();
    cfg.panels
        .iter()
        .enumerate()
        .map(|(panel, names)| {
            let runs = names
                .par_iter()
                .map(|name| {
                    let method: Method = name.parse()?;
                    let params = preset_params(method, &spec)?;
                    let seq = worst_case_noise(&params, &problem, cfg.h, None, true)?;
                    let trace = run_with_tail(&params, &problem, problem.xstar(), &seq, cfg.policy)?;
                    Ok(MethodRun { method: method.to_string(), params, h: cfg.h, trace })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TraceBundle { panel, runs })
        })
        .collect()
}
