//! Parameter designers: tabulated presets, robustly stable GD and HB, Pareto
//! sweeps and the rate/robustness trade-off.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MrlError, Result};
use crate::hinf::hinf_quadratic;
use crate::lti::{mode_radius, AlgoParams, Family};
use crate::problem::SpectrumModel;
use crate::scvx::{l2gain_bound_nag, mi_search, nag_beta, rate_certificate_feasible};

/// Named parameter choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    GdPopular,
    GdFastest,
    RsGd,
    NagPopular,
    NagFastest,
    /// NAG at stepsize α with the standard momentum for that α.
    NagAlpha(f64),
    Tmm,
    HbFastest,
    RsHb,
}

impl Method {
    /// The nine tabulated rows; `nag-alpha` is instantiated at α = 1/(2L).
    pub fn table_rows(spec: &SpectrumModel) -> [Method; 9] {
        [
            Method::GdPopular,
            Method::GdFastest,
            Method::RsGd,
            Method::NagPopular,
            Method::NagFastest,
            Method::NagAlpha(0.5 / spec.ell()),
            Method::Tmm,
            Method::HbFastest,
            Method::RsHb,
        ]
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::GdPopular => f.write_str("gd-popular"),
            Method::GdFastest => f.write_str("gd-fastest"),
            Method::RsGd => f.write_str("rs-gd"),
            Method::NagPopular => f.write_str("nag-popular"),
            Method::NagFastest => f.write_str("nag-fastest"),
            Method::NagAlpha(a) => write!(f, "nag-alpha:{a}"),
            Method::Tmm => f.write_str("tmm"),
            Method::HbFastest => f.write_str("hb-fastest"),
            Method::RsHb => f.write_str("rs-hb"),
        }
    }
}

impl FromStr for Method {
    type Err = MrlError;

    /// Accepts the names above; `nag-alpha:<α>` carries its stepsize.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(rest) = s.strip_prefix("nag-alpha") {
            let a = rest.trim_start_matches([':', '=']);
            let alpha: f64 =
                a.parse().map_err(|_| MrlError::UnknownMethod(format!("nag-alpha needs a stepsize, got `{s}`")))?;
            return Ok(Method::NagAlpha(alpha));
        }
        Ok(match s.as_str() {
            "gd-popular" => Method::GdPopular,
            "gd-fastest" => Method::GdFastest,
            "rs-gd" => Method::RsGd,
            "nag-popular" => Method::NagPopular,
            "nag-fastest" => Method::NagFastest,
            "tmm" => Method::Tmm,
            "hb-fastest" => Method::HbFastest,
            "rs-hb" => Method::RsHb,
            _ => return Err(MrlError::UnknownMethod(s)),
        })
    }
}

/// a(κ) of the robustly stable heavy ball.
pub fn a_kappa(kappa: f64) -> f64 {
    if kappa >= 32.0 {
        kappa.sqrt() * ((2.0 * kappa - 1.0).sqrt() - 1.0) / (kappa - 1.0)
    } else {
        1.0
    }
}

pub fn rs_hb_params(spec: &SpectrumModel) -> AlgoParams {
    let k = spec.kappa();
    let a = a_kappa(k);
    let beta = (1.0 - a / k.sqrt()).powi(2);
    AlgoParams { alpha: a * a / spec.ell(), beta, nu: 0.0, family: Family::Hb }
}

pub fn preset_params(method: Method, spec: &SpectrumModel) -> Result<AlgoParams> {
    let (mu, l) = (spec.mu(), spec.ell());
    let k = spec.kappa();
    let sk = k.sqrt();
    let p = match method {
        Method::GdPopular => AlgoParams::gd(1.0 / l)?,
        Method::GdFastest => AlgoParams::gd(2.0 / (l + mu))?,
        Method::RsGd => AlgoParams::gd(2.0 / (l + (l * mu).sqrt()))?,
        Method::NagPopular => AlgoParams::nag(1.0 / l, (1.0 - 1.0 / sk) / (1.0 + 1.0 / sk))?,
        Method::NagFastest => {
            let r = (3.0 * k + 1.0).sqrt();
            AlgoParams::nag(4.0 / (3.0 * l + mu), (r - 2.0) / (r + 2.0))?
        }
        Method::NagAlpha(alpha) => {
            if !(alpha > 0.0 && alpha <= 1.0 / l) {
                return Err(MrlError::InvalidParams(format!("nag-alpha needs 0 < alpha <= 1/L, got {alpha}")));
            }
            AlgoParams::nag(alpha, nag_beta(alpha, mu))?
        }
        Method::Tmm => {
            let rho = 1.0 - 1.0 / sk;
            AlgoParams::tmm((1.0 + rho) / l, rho * rho / (2.0 - rho), rho * rho / ((1.0 + rho) * (2.0 - rho)))?
        }
        Method::HbFastest => {
            let alpha = 4.0 / (l.sqrt() + mu.sqrt()).powi(2);
            AlgoParams::hb(alpha, ((sk - 1.0) / (sk + 1.0)).powi(2))?
        }
        Method::RsHb => rs_hb_params(spec),
    };
    Ok(p)
}

/// One (rate, H∞) pair of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub params: AlgoParams,
    pub rate: f64,
    pub hinf: f64,
}

/// Width of the rate buckets of the envelope.
pub const RATE_BUCKET: f64 = 1e-3;
const NU_GRID: usize = 20;

/// Rate and closed-form H∞ from the extreme modes only.
fn rate_and_hinf(params: &AlgoParams, ends: &SpectrumModel) -> Option<ParetoPoint> {
    let rate = mode_radius(params, ends.mu()).max(mode_radius(params, ends.ell()));
    if !(rate < 1.0) {
        return None;
    }
    let hinf = hinf_quadratic(params, ends);
    hinf.is_finite().then_some(ParetoPoint { params: *params, rate, hinf })
}

fn open_grid(hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (1..=n).map(move |i| hi * i as f64 / (n + 1) as f64)
}

fn half_open_grid(hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| hi * i as f64 / n as f64)
}

/// Lower envelope: best H∞ per rate bucket, then drop points dominated by a faster one.
pub fn lower_envelope(mut pts: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    pts.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.hinf.total_cmp(&b.hinf)));
    let mut buckets: Vec<ParetoPoint> = Vec::new();
    for p in pts {
        let key = (p.rate / RATE_BUCKET).floor();
        match buckets.last_mut() {
            Some(last) if (last.rate / RATE_BUCKET).floor() == key => {
                if p.hinf < last.hinf {
                    *last = p;
                }
            }
            _ => buckets.push(p),
        }
    }
    let mut out: Vec<ParetoPoint> = Vec::new();
    for p in buckets {
        if out.last().is_none_or(|q| p.hinf < q.hinf) {
            out.push(p);
        }
    }
    out
}

/// All convergent grid points of a family before the envelope is taken.
pub fn family_sweep(spec: &SpectrumModel, family: Family, n: usize) -> Result<Vec<ParetoPoint>> {
    let n = n.max(2);
    let ends = SpectrumModel::from_eigenvalues(vec![spec.mu(), spec.ell()])?;
    let l = spec.ell();
    let k = spec.kappa();
    let cands: Vec<AlgoParams> = match family {
        Family::Gd => open_grid(2.0 / l, n * n).map(|a| AlgoParams { alpha: a, beta: 0.0, nu: 0.0, family }).collect(),
        Family::Hb => open_grid(4.0 / l, n)
            .flat_map(|a| half_open_grid(1.0, n).map(move |b| AlgoParams { alpha: a, beta: b, nu: 0.0, family }))
            .collect(),
        Family::Nag => {
            let bmax = k / (k - 1.0);
            open_grid(2.0 / l, n)
                .flat_map(|a| half_open_grid(bmax, n).map(move |b| AlgoParams { alpha: a, beta: b, nu: b, family }))
                .collect()
        }
        Family::Gmm => half_open_grid(1.0, NU_GRID)
            .flat_map(|nu| {
                open_grid(4.0 / l, n).flat_map(move |a| {
                    half_open_grid(1.0, n).map(move |b| AlgoParams { alpha: a, beta: b, nu, family })
                })
            })
            .collect(),
        Family::Tmm => {
            return Err(MrlError::InvalidParams("pareto sweeps support gd, hb, nag and gmm".into()));
        }
    };
    Ok(cands.par_iter().filter_map(|p| rate_and_hinf(p, &ends)).collect())
}

/// Pareto frontier of (rate, H∞) over a family's parameter grid.
pub fn pareto_frontier(spec: &SpectrumModel, family: Family, grid_resolution: usize) -> Result<Vec<ParetoPoint>> {
    Ok(lower_envelope(family_sweep(spec, family, grid_resolution)?))
}

/// Best H∞ on the frontier among points at least as fast as `rate` (+∞ if none).
pub fn frontier_value(frontier: &[ParetoPoint], rate: f64) -> f64 {
    frontier.iter().filter(|p| p.rate <= rate).map(|p| p.hinf).fold(f64::INFINITY, f64::min)
}

pub fn frontier_csv(frontier: &[ParetoPoint]) -> String {
    use crate::ext::fmt_g17;
    let mut out = String::from("rate,hinf,alpha,beta,nu\n");
    for p in frontier {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_g17(p.rate),
            fmt_g17(p.hinf),
            fmt_g17(p.params.alpha),
            fmt_g17(p.params.beta),
            fmt_g17(p.params.nu)
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Grid,
    ExplicitCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub epsilon: f64,
    pub params: AlgoParams,
    pub certified_rate_sq: f64,
    pub gain_bound: f64,
    pub provenance: Provenance,
}

/// ρ²_NAG = 1 − 1/√κ.
pub fn nag_rate_sq(spec: &SpectrumModel) -> f64 {
    1.0 - 1.0 / spec.kappa().sqrt()
}

/// Stepsize on the explicit curve whose certified rate is ρ²_NAG(1+ε).
pub fn explicit_tradeoff_alpha(spec: &SpectrumModel, epsilon: f64) -> f64 {
    (1.0 - (1.0 + epsilon) * nag_rate_sq(spec)).powi(2) / spec.mu()
}

const RATE_BISECTIONS: usize = 12;
const RATE_BUDGET: usize = 4_000;

/// Smallest ρ² found certifiable for NAG (α, β), by bisection between ρ(A_Q)² and 1.
///
/// Depends only on (α, β), so feasibility sets are nested in the target rate.
pub fn certified_rate_sq(alpha: f64, beta: f64, spec: &SpectrumModel) -> Option<f64> {
    let p = AlgoParams::nag(alpha, beta).ok()?;
    let quad = mode_radius(&p, spec.mu()).max(mode_radius(&p, spec.ell()));
    if !(quad < 1.0) {
        return None;
    }
    let check = |r2: f64| rate_certificate_feasible(alpha, beta, r2.sqrt(), spec, RATE_BUDGET).feasible;
    let (mut lo, mut hi) = (quad * quad, 1.0 - 1e-9);
    if !check(hi) {
        return None;
    }
    if check(lo) {
        return Some(lo);
    }
    for _ in 0..RATE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if check(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Best certified gain bound under the rate constraint ρ² ≤ ρ²_NAG(1+ε).
///
/// Candidates are the explicit curve point and a (α, β) grid over (0, 2/L) × [0, κ/(κ−1)).
pub fn tradeoff_design(
    spec: &SpectrumModel,
    epsilon: f64,
    grid_resolution: usize,
    mi_budget: usize,
) -> Result<TradeoffResult> {
    let target = nag_rate_sq(spec) * (1.0 + epsilon);
    if !(epsilon >= 0.0) || target >= 1.0 {
        return Err(MrlError::InvalidParams(format!("epsilon {epsilon} gives a rate target {target} >= 1")));
    }
    let (mu, l) = (spec.mu(), spec.ell());
    let k = spec.kappa();
    let a_tilde = explicit_tradeoff_alpha(spec, epsilon).min(1.0 / l);
    let explicit = TradeoffResult {
        epsilon,
        params: AlgoParams::nag(a_tilde, nag_beta(a_tilde, mu))?,
        certified_rate_sq: 1.0 - (a_tilde * mu).sqrt(),
        gain_bound: l2gain_bound_nag(a_tilde, spec)?,
        provenance: Provenance::ExplicitCurve,
    };
    let n = grid_resolution.max(2);
    let bmax = k / (k - 1.0);
    let grid: Vec<(f64, f64)> =
        open_grid(2.0 / l, n).flat_map(|a| half_open_grid(bmax, n).map(move |b| (a, b))).collect();
    let scored: Vec<(usize, TradeoffResult)> = grid
        .par_iter()
        .enumerate()
        .filter_map(|(i, &(a, b))| {
            let p = AlgoParams::nag(a, b).ok()?;
            let quad = mode_radius(&p, mu).max(mode_radius(&p, l));
            if quad * quad > target {
                return None;
            }
            let r2 = certified_rate_sq(a, b, spec)?;
            if r2 > target + 1e-12 {
                return None;
            }
            let cert = mi_search(&p, spec, mi_budget, i as u64);
            cert.is_feasible().then_some((
                i,
                TradeoffResult {
                    epsilon,
                    params: p,
                    certified_rate_sq: r2,
                    gain_bound: cert.bound.get(),
                    provenance: Provenance::Grid,
                },
            ))
        })
        .collect();
    let best_grid = scored.into_iter().reduce(|x, y| {
        if y.1.gain_bound < x.1.gain_bound || (y.1.gain_bound == x.1.gain_bound && y.0 < x.0) {
            y
        } else {
            x
        }
    });
    Ok(match best_grid {
        Some((_, g)) if g.gain_bound < explicit.gain_bound => g,
        _ => explicit,
    })
}
