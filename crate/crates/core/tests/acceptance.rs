//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero only when a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use mrl_core::design::{
    a_kappa, explicit_tradeoff_alpha, nag_rate_sq, preset_params, rs_hb_params, tradeoff_design, Method,
};
use mrl_core::hinf::{
    destabilizing_perturbation, hinf_lower_bound_real, hinf_oracle_grid, hinf_quadratic, in_best_robustness_set,
    omega_lambda_star, perturbed_radius, real_radius_bounds, real_radius_qiu_grid, LambdaStar,
};
use mrl_core::linalg::spectral_radius_real;
use mrl_core::lti::{circle_gain, spectral_radius, AlgoParams, DenseSystem, Family};
use mrl_core::noise::local_quadratic_worst_noise;
use mrl_core::problem::{
    make_quadratic_from_spectrum, QuadraticProblem, ScvxTestFunction, SmoothOracle, SpectrumModel,
};
use mrl_core::scvx::{
    ergodic_bound, gd_distance_recipe, gd_suboptimality_recipe, l2gain_bound_gd, l2gain_bound_gmm, l2gain_bound_nag,
    mi_check, mi_search, nag_beta, nag_recipe, BoundSource, CertVars,
};
use mrl_core::sim::{
    empirical_gain_sweep, run_until, section6_experiment, FnNoise, KPolicy, RunOptions, Section6Config,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criterion 5: the β ≈ 1.08 example gives ε* = 0.24404, not 0.2404.
/// Criterion 7: at h = 0.01 the kernel noise recovers only part of the gain of
/// slowly damped modes (about 1/3 for GD-fastest and RS-GD).
/// Criterion 12: the real-radius upper bracket fails when an interior eigenvalue
/// dominates both extremes at some frequency. See README.
const KNOWN_FAILURES: &[usize] = &[5, 7, 12];

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table_specs() -> [SpectrumModel; 2] {
    [SpectrumModel::new(1.0, 3.0).unwrap(), SpectrumModel::new(0.5, 30.0).unwrap()]
}

/// Closed-form (ρ, H∞, ω*, λ*) of each tabulated row.
fn table_row(m: Method, s: &SpectrumModel) -> (f64, f64, f64, LambdaStar) {
    let (mu, k) = (s.mu(), s.kappa());
    let best = 1.0 / (2.0 * mu).sqrt();
    let sk = k.sqrt();
    match m {
        Method::GdPopular => (1.0 - 1.0 / k, best, 0.0, LambdaStar::Mu),
        Method::GdFastest => (1.0 - 2.0 / (k + 1.0), sk * best, PI, LambdaStar::L),
        Method::RsGd => (1.0 - 2.0 / (k + sk), best, 0.0, LambdaStar::Mu),
        Method::NagPopular => (1.0 - 1.0 / sk, best, 0.0, LambdaStar::Mu),
        Method::NagFastest => (1.0 - 2.0 / (3.0 * k + 1.0).sqrt(), best, 0.0, LambdaStar::Mu),
        Method::NagAlpha(a) => (1.0 - (a * mu).sqrt(), best, 0.0, LambdaStar::Mu),
        Method::Tmm => (1.0 - 1.0 / sk, (2.0 - 1.0 / sk) * best, PI, LambdaStar::L),
        Method::HbFastest => (1.0 - 2.0 / (sk + 1.0), sk * best, PI, LambdaStar::L),
        Method::RsHb => (1.0 - a_kappa(k) / sk, best, 0.0, LambdaStar::Mu),
    }
}

fn c1_table() -> Outcome {
    let t = Instant::now();
    let mut n = 0;
    for s in table_specs() {
        for m in Method::table_rows(&s) {
            let p = preset_params(m, &s).map_err(|e| e.to_string())?;
            let (rho, h, w, ls) = table_row(m, &s);
            let (gw, gls) = omega_lambda_star(&p, &s).map_err(|e| e.to_string())?;
            ensure(rel(spectral_radius(&p, &s), rho) <= 1e-9, || {
                format!("{m} rate {} vs {rho}", spectral_radius(&p, &s))
            })?;
            ensure(rel(hinf_quadratic(&p, &s), h) <= 1e-9, || format!("{m} hinf {} vs {h}", hinf_quadratic(&p, &s)))?;
            ensure((gw - w).abs() <= 1e-12 && gls == ls, || format!("{m} info ({gw}, {gls:?}) vs ({w}, {ls:?})"))?;
            n += 1;
        }
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(1), || format!("took {el:?}"))?;
    Ok(format!("{n} rows match, {el:.2?}"))
}

fn random_spec(rng: &mut ChaCha8Rng, d: usize) -> SpectrumModel {
    let mu = rng.gen_range(0.1..2.0);
    let l = mu * rng.gen_range(1.5..100.0);
    let mut e: Vec<f64> = (0..d)
        .map(|i| {
            if i == 0 {
                mu
            } else if i == d - 1 {
                l
            } else {
                rng.gen_range(mu..l)
            }
        })
        .collect();
    e.sort_by(f64::total_cmp);
    SpectrumModel::from_eigenvalues(e).unwrap()
}

fn random_convergent(rng: &mut ChaCha8Rng, s: &SpectrumModel, max_rate: f64) -> AlgoParams {
    loop {
        let fam = [Family::Gd, Family::Hb, Family::Nag, Family::Gmm][rng.gen_range(0..4)];
        let alpha = rng.gen_range(0.0..4.0) / s.ell();
        let beta = if fam == Family::Gd { 0.0 } else { rng.gen_range(0.0..1.1) };
        let nu = match fam {
            Family::Gd | Family::Hb => 0.0,
            Family::Nag => beta,
            _ => rng.gen_range(0.0..1.5),
        };
        if let Ok(p) = AlgoParams::new(alpha, beta, nu, fam) {
            if alpha > 0.0 && spectral_radius(&p, s) < max_rate {
                return p;
            }
        }
    }
}

fn c2_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_h, mut worst_r) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let d = rng.gen_range(2..=8);
        let s = random_spec(&mut rng, d);
        let p = random_convergent(&mut rng, &s, 0.999);
        let h = hinf_quadratic(&p, &s);
        let o = hinf_oracle_grid(&p, &s, 100_000).map_err(|e| e.to_string())?;
        worst_h = worst_h.max(rel(h, o));
        let q = make_quadratic_from_spectrum(&s, d, i).map_err(|e| e.to_string())?;
        let dense = spectral_radius_real(&DenseSystem::new(&p, &q).a);
        worst_r = worst_r.max((spectral_radius(&p, &s) - dense).abs());
    }
    let el = t.elapsed();
    ensure(worst_h <= 1e-6, || format!("H∞ rel err {worst_h:.2e}"))?;
    ensure(worst_r <= 1e-9, || format!("rate err {worst_r:.2e}"))?;
    ensure(el < Duration::from_secs(30), || format!("took {el:?}"))?;
    Ok(format!("max H∞ rel err {worst_h:.1e}, max rate err {worst_r:.1e}, {el:.2?}"))
}

fn c3_lower_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut n, mut in_set) = (0, 0);
    let mut check = |p: &AlgoParams, s: &SpectrumModel| -> Result<(), String> {
        let best = 1.0 / (2.0 * s.mu()).sqrt();
        let h = hinf_quadratic(p, s);
        ensure(h >= best * (1.0 - 1e-10), || format!("{p:?}: {h} < {best}"))?;
        let eq = (h - best).abs() <= 1e-10 * best;
        let mem = in_best_robustness_set(p, s);
        ensure(eq == mem, || format!("{p:?} on {s:?}: equality {eq} but membership {mem}"))?;
        n += 1;
        in_set += usize::from(mem);
        Ok(())
    };
    for _ in 0..2000 {
        let d = rng.gen_range(2..=6);
        let s = random_spec(&mut rng, d);
        let p = random_convergent(&mut rng, &s, 1.0);
        check(&p, &s)?;
    }
    for _ in 0..200 {
        let s = random_spec(&mut rng, 2);
        for m in Method::table_rows(&s) {
            check(&preset_params(m, &s).unwrap(), &s)?;
        }
    }
    Ok(format!("{n} trials, {in_set} in S1∩S2, no violations"))
}

fn c4_interior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = rng.gen_range(3..=8);
        let a = random_spec(&mut rng, d);
        let (mu, l) = (a.mu(), a.ell());
        let mut e: Vec<f64> = (0..d)
            .map(|i| {
                if i == 0 {
                    mu
                } else if i == d - 1 {
                    l
                } else {
                    rng.gen_range(mu..l)
                }
            })
            .collect();
        e.sort_by(f64::total_cmp);
        let b = SpectrumModel::from_eigenvalues(e).unwrap();
        let p = random_convergent(&mut rng, &a, 0.999);
        let (ha, hb) = (hinf_quadratic(&p, &a), hinf_quadratic(&p, &b));
        ensure(ha == hb, || format!("{ha} != {hb}"))?;
        let (oa, ob) = (hinf_oracle_grid(&p, &a, 100_000).unwrap(), hinf_oracle_grid(&p, &b, 100_000).unwrap());
        worst = worst.max(rel(oa, ob));
    }
    ensure(worst <= 1e-6, || format!("oracle rel diff {worst:.2e}"))?;
    Ok(format!("200 pairs, identical closed form, oracle diff {worst:.1e}"))
}

fn c5_radii() -> Outcome {
    let s = SpectrumModel::new(0.5, 3.0).unwrap();
    let a = 1.0 / 3.0;
    let std = AlgoParams::nag(a, nag_beta(a, 0.5)).unwrap();
    let e1 = 1.0 / hinf_quadratic(&std, &s);
    let big = AlgoParams::nag(a, 0.9 / (1.0 - a * 0.5)).unwrap();
    let e2 = 1.0 / hinf_quadratic(&big, &s);
    let hb = preset_params(Method::HbFastest, &s).unwrap();
    let e3 = 1.0 / hinf_quadratic(&hb, &s);
    let mut worst_closed = 0.0f64;
    let mut inner_ok = true;
    for spec in table_specs() {
        let q = make_quadratic_from_spectrum(&spec, 4, 5).unwrap();
        let sys_for = |p: &AlgoParams| DenseSystem::new(p, &q);
        for m in Method::table_rows(&spec) {
            let p = preset_params(m, &spec).unwrap();
            let pert = destabilizing_perturbation(&p, &q).map_err(|e| format!("{m}: {e}"))?;
            let sys = sys_for(&p);
            worst_closed = worst_closed.max((perturbed_radius(&sys, &pert.delta) - 1.0).abs());
            inner_ok &= perturbed_radius(&sys, &pert.scaled(0.99)) < 1.0;
        }
    }
    let detail =
        format!("eps*(std)={e1:.6}, eps*(beta~1.08)={e2:.6}, eps*(HB)={e3:.8}, closure err {worst_closed:.1e}");
    ensure((e1 - 1.0).abs() <= 1e-9, || format!("standard NAG eps* {e1}; {detail}"))?;
    ensure((e3 - 1.0 / 6f64.sqrt()).abs() <= 1e-6, || format!("HB eps* {e3}; {detail}"))?;
    ensure(worst_closed <= 1e-6 && inner_ok, || format!("perturbation closure; {detail}"))?;
    ensure((e2 - 0.2404).abs() <= 1e-3, || {
        format!("eps* for beta~1.08 is {e2:.6}, expected 0.2404 +- 1e-3; {detail}")
    })?;
    Ok(detail)
}

fn c6_noise_limit() -> Outcome {
    let hs = [0.5, 0.1, 0.01, 0.001];
    let methods = [
        Method::GdPopular,
        Method::GdFastest,
        Method::RsGd,
        Method::NagPopular,
        Method::NagFastest,
        Method::HbFastest,
        Method::RsHb,
    ];
    let mut worst_gap = 0.0f64;
    let mut runs = 0;
    for s in table_specs() {
        for d in [2, 4] {
            let q = make_quadratic_from_spectrum(&s, d, 6 + d as u64).unwrap();
            for m in methods {
                let p = preset_params(m, &s).unwrap();
                let h = hinf_quadratic(&p, &s);
                let g = empirical_gain_sweep(&p, &q, &hs, KPolicy::default()).map_err(|e| e.to_string())?;
                ensure(g.iter().all(|&(_, v)| v <= h + 1e-6), || format!("{m} d={d}: gain above H∞ {g:?}"))?;
                ensure(g.windows(2).all(|w| w[1].1 >= w[0].1), || format!("{m} d={d}: not nondecreasing {g:?}"))?;
                let gap = 1.0 - g[3].1 / h;
                ensure(gap <= 0.05, || format!("{m} d={d}: h=0.001 gain {} vs {h}", g[3].1))?;
                worst_gap = worst_gap.max(gap);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} sweeps, max relative gap at h=0.001 {:.2}%", 100.0 * worst_gap))
}

fn c7_section6() -> Outcome {
    let t = Instant::now();
    let cfg = Section6Config { h: 0.01, ..Default::default() };
    let b = section6_experiment(&cfg).map_err(|e| e.to_string())?;
    let mu = cfg.reg;
    let kappa = (4.0 + cfg.reg) / cfg.reg;
    let mut lines = Vec::new();
    let mut short = Vec::new();
    for (bundle, target) in [(&b[0], kappa / (2.0 * mu)), (&b[1], 1.0 / (2.0 * mu))] {
        for r in &bundle.runs {
            let tot = r.trace.total();
            ensure(tot <= target * (1.0 + 1e-9), || format!("{}: cumulative {tot} above {target}", r.method))?;
            if tot < 0.9 * target {
                short.push(format!("{} at {:.1}%", r.method, 100.0 * tot / target));
            }
            lines.push(format!("{}={tot:.1}", r.method));
        }
    }
    let peak = |name: &str| b[0].runs.iter().find(|r| r.method == name).unwrap().trace.peak();
    ensure(peak("gd-fastest") < peak("hb-fastest"), || "peak ordering".into())?;
    let b01 = section6_experiment(&Section6Config { h: 0.1, panels: vec![cfg.panels[0].clone()], ..cfg.clone() })
        .map_err(|e| e.to_string())?;
    let pk = |name: &str| b01[0].runs.iter().find(|r| r.method == name).unwrap().trace.peak();
    let factor = pk("hb-fastest") / pk("gd-fastest");
    ensure(factor >= 10.0, || format!("peak factor at h=0.1 is {factor:.2}"))?;
    let el = t.elapsed();
    ensure(el < Duration::from_secs(120), || format!("took {el:?}"))?;
    let detail = format!("{}, peak factor {factor:.1}, {el:.2?}", lines.join(", "));
    ensure(short.is_empty(), || format!("not within 10% of the target at h=0.01: {}; {detail}", short.join(", ")))?;
    Ok(detail)
}

/// Certificates of criterion 8, tagged with the parameters they certify.
fn criterion8_certificates() -> Result<Vec<(AlgoParams, SpectrumModel, BoundSource)>, String> {
    let mut out = Vec::new();
    for s in [SpectrumModel::new(1.0, 3.0).unwrap(), SpectrumModel::new(0.5, 30.0).unwrap()] {
        let l = s.ell();
        for i in 1..40 {
            let a = 2.0 / l * i as f64 / 40.0;
            let p = AlgoParams::gd(a).unwrap();
            for c in [gd_distance_recipe(a, &s), gd_suboptimality_recipe(a, &s)] {
                let c = c.map_err(|e| e.to_string())?;
                out.push((p, s.clone(), BoundSource::Certificate(c)));
            }
        }
        for i in 1..=20 {
            let a = i as f64 / 20.0 / l;
            let p = AlgoParams::nag(a, nag_beta(a, s.mu())).unwrap();
            out.push((p, s.clone(), BoundSource::Certificate(nag_recipe(a, &s).map_err(|e| e.to_string())?)));
            out.push((p, s.clone(), BoundSource::NagExplicit));
        }
        for (i, p) in [
            AlgoParams::hb(0.3 / l, 0.3).unwrap(),
            AlgoParams::gmm(0.5 / l, 0.4, 0.2).unwrap(),
            AlgoParams::gd(1.2 / l).unwrap(),
        ]
        .into_iter()
        .enumerate()
        {
            let c = mi_search(&p, &s, 20_000, i as u64);
            if c.is_feasible() {
                out.push((p, s.clone(), BoundSource::Certificate(c.vars)));
            }
        }
    }
    Ok(out)
}

fn c8_mi() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for s in table_specs() {
        let l = s.ell();
        for i in 1..200 {
            let a = 2.0 / l * i as f64 / 200.0;
            let p = AlgoParams::gd(a).unwrap();
            let cs: Vec<CertVars> =
                [gd_distance_recipe(a, &s), gd_suboptimality_recipe(a, &s)].into_iter().map(|c| c.unwrap()).collect();
            for c in &cs {
                let chk = mi_check(&p, &s, c);
                ensure(chk.min_eig >= -1e-9, || format!("GD recipe alpha={a}: min eig {}", chk.min_eig))?;
            }
            let b = cs.iter().map(|c| l2gain_bound_gmm(&p, &s, c)).fold(f64::INFINITY, f64::min);
            let e = l2gain_bound_gd(a, &s).unwrap();
            worst = worst.max(rel(b, e));
            n += 1;
        }
        for i in 1..=100 {
            let a = i as f64 / 100.0 / l;
            let p = AlgoParams::nag(a, nag_beta(a, s.mu())).unwrap();
            let c = nag_recipe(a, &s).unwrap();
            let chk = mi_check(&p, &s, &c);
            ensure(chk.min_eig >= -1e-9, || format!("NAG recipe alpha={a}: min eig {}", chk.min_eig))?;
            worst = worst.max(rel(l2gain_bound_gmm(&p, &s, &c), l2gain_bound_nag(a, &s).unwrap()));
            n += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("recipe vs explicit rel err {worst:.2e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lowest = f64::INFINITY;
    for i in 0..12 {
        let s = SpectrumModel::new(rng.gen_range(0.2..1.0), rng.gen_range(2.0..20.0)).unwrap();
        let p = random_convergent(&mut rng, &s, 0.95);
        let c = mi_search(&p, &s, 5_000, i);
        let floor = 1.0 / (2.0 * s.mu()).sqrt();
        ensure(c.bound.get() >= floor - 1e-9, || format!("search bound {} below {floor}", c.bound.get()))?;
        lowest = lowest.min(c.bound.get() / floor);
    }
    Ok(format!("{n} explicit-bound checks, max rel err {worst:.1e}; search bound / floor >= {lowest:.3}"))
}

fn noise_family(kind: usize, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    match kind % 3 {
        0 => {
            let decay: f64 = rng.gen_range(0.9..0.999);
            (0..k).map(|i| DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)) * decay.powi(i as i32)).collect()
        }
        1 => {
            let at = rng.gen_range(0..k / 4);
            (0..k)
                .map(|i| if i == at { DVector::from_fn(d, |_, _| rng.gen_range(-3.0..3.0)) } else { DVector::zeros(d) })
                .collect()
        }
        _ => {
            let w: f64 = rng.gen_range(0.0..PI);
            let u = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)).normalize();
            (0..k).map(|i| &u * (0.99f64.powi(i as i32) * (w * i as f64).cos())).collect()
        }
    }
}

fn c9_soundness() -> Outcome {
    let certs = criterion8_certificates()?;
    let k = 300;
    let mut checks = 0usize;
    let mut min_slack = f64::INFINITY;
    for (ci, (p, s, src)) in certs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + ci as u64);
        for trial in 0..50 {
            let d = rng.gen_range(2..=5);
            let q: QuadraticProblem = make_quadratic_from_spectrum(s, d, rng.gen()).unwrap();
            let x0 = q.xstar() + DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)) * (trial % 2) as f64;
            let f0 = q.suboptimality(&x0);
            let eb = ergodic_bound(p, s, *src, f0).map_err(|e| e.to_string())?;
            let ws = noise_family(trial, d, k, &mut rng);
            let mut src_noise = ws.as_slice();
            let tr =
                run_until(p, &q, &x0, &mut src_noise, k, RunOptions { store_every: 0, ergodic: true }, |_, _| false)
                    .map_err(|e| e.to_string())?;
            let pre = tr.noise_prefix();
            for (j, &e) in pre.iter().enumerate().take(k) {
                let rhs = eb.gain_sq * e + eb.init_const;
                let tol = 1e-9 * (1.0 + rhs);
                ensure(tr.cumulative[j] <= rhs + tol, || {
                    format!("cert {ci} ({p:?}) trial {trial} step {j}: {} > {rhs}", tr.cumulative[j])
                })?;
                ensure(tr.ergodic[j] <= eb.at(j, e) + tol, || format!("cert {ci} trial {trial} step {j}: ergodic"))?;
                if rhs > 0.0 {
                    min_slack = min_slack.min((rhs - tr.cumulative[j]) / rhs);
                }
                checks += 2;
            }
        }
    }
    Ok(format!("{} certificates x 50 runs, {checks} inequalities, min relative slack {min_slack:.2e}", certs.len()))
}

fn c10_rs_hb() -> Outcome {
    for k in [2.0, 10.0, 32.0, 100.0, 1e4] {
        let s = SpectrumModel::new(1.0, k).unwrap();
        let p = rs_hb_params(&s);
        let best = 0.5f64.sqrt();
        ensure(rel(hinf_quadratic(&p, &s), best) <= 1e-9, || format!("kappa {k}: hinf {}", hinf_quadratic(&p, &s)))?;
        let r = 1.0 - a_kappa(k) / k.sqrt();
        ensure(rel(spectral_radius(&p, &s), r) <= 1e-9, || format!("kappa {k}: rate {}", spectral_radius(&p, &s)))?;
        if k >= 32.0 {
            ensure(a_kappa(k) > 1.25, || format!("a({k}) = {}", a_kappa(k)))?;
        }
    }
    let s = SpectrumModel::new(1.0, 1e6).unwrap();
    let lim = (1.0 - spectral_radius(&rs_hb_params(&s), &s)) * 1e3;
    ensure(rel(lim, 2f64.sqrt()) <= 0.01, || format!("(1-rho)sqrt(kappa) = {lim}"))?;
    Ok(format!("(1-rho)sqrt(kappa) at 1e6 = {lim:.5}"))
}

fn c11_tradeoff() -> Outcome {
    let s = SpectrumModel::new(0.5, 30.0).unwrap();
    let eps = [0.0, 0.05, 0.10];
    let res: Vec<_> =
        eps.iter().map(|&e| tradeoff_design(&s, e, 14, 2_000)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let mut prev = f64::INFINITY;
    for r in &res {
        let target = nag_rate_sq(&s) * (1.0 + r.epsilon);
        ensure(r.certified_rate_sq <= target + 1e-12, || format!("eps {}: rate² {}", r.epsilon, r.certified_rate_sq))?;
        let cap = l2gain_bound_nag(explicit_tradeoff_alpha(&s, r.epsilon).min(1.0 / s.ell()), &s).unwrap();
        ensure(r.gain_bound <= cap + 1e-9, || format!("eps {}: bound {} > {cap}", r.epsilon, r.gain_bound))?;
        ensure(r.gain_bound <= prev, || format!("eps {}: bound increased", r.epsilon))?;
        prev = r.gain_bound;
    }
    // qualitative: a larger ε lowers the transient peak under the local-quadratic adversary
    let mut wins = 0;
    for seed in 0..3u64 {
        let f = ScvxTestFunction::random(20, 5, 0.5, 30.0, 1.0, seed).map_err(|e| e.to_string())?;
        let (xs, _) = f.optimum();
        let peak = |p: &AlgoParams| -> Result<f64, String> {
            let mut noise = FnNoise(|k: usize, _xp: &DVector<f64>, x: &DVector<f64>| {
                local_quadratic_worst_noise(p, &f, x, 0.1, k).unwrap_or_else(|_| DVector::zeros(x.len()))
            });
            let tr = run_until(p, &f, &xs, &mut noise, 400, RunOptions::default(), |_, _| false)
                .map_err(|e| e.to_string())?;
            Ok(tr.peak())
        };
        if peak(&res[2].params)? < peak(&res[0].params)? {
            wins += 1;
        }
    }
    ensure(wins >= 2, || format!("larger eps lowered the peak in {wins}/3 seeds"))?;
    let b: Vec<String> = res.iter().map(|r| format!("{:.4}", r.gain_bound)).collect();
    Ok(format!("bounds {} for eps 0/5/10%, peak lowered in {wins}/3 seeds", b.join(" / ")))
}

fn c12_real_radius() -> Outcome {
    for s in table_specs() {
        for m in Method::table_rows(&s) {
            let p = preset_params(m, &s).unwrap();
            let (lo, hi) = real_radius_bounds(&p, &s).map_err(|e| e.to_string())?;
            let c = 1.0 / hinf_quadratic(&p, &s);
            ensure(lo == c && hi == c, || format!("{m}: [{lo}, {hi}] vs {c}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mu = rng.gen_range(0.1..2.0);
        let l = mu * rng.gen_range(1.5..50.0);
        let s = SpectrumModel::from_eigenvalues(vec![mu, mu, l, l]).unwrap();
        let p = random_convergent(&mut rng, &s, 0.999);
        worst = worst.max(rel(hinf_lower_bound_real(&p, &s), hinf_quadratic(&p, &s)));
    }
    ensure(worst <= 1e-6, || format!("H∞^lb vs H∞ rel err {worst:.2e}"))?;
    let (mut inside, mut interior) = (0, 0);
    let mut bad = Vec::new();
    for i in 0..20 {
        let d = rng.gen_range(2..=4);
        let s = random_spec(&mut rng, d);
        let p = random_convergent(&mut rng, &s, 0.99);
        let q = make_quadratic_from_spectrum(&s, d, i).unwrap();
        let (lo, hi) = real_radius_bounds(&p, &q.spectrum()).map_err(|e| e.to_string())?;
        let est = real_radius_qiu_grid(&p, &q, 2001, 41).map_err(|e| e.to_string())?;
        if est >= lo * (1.0 - 1e-6) && est <= hi * (1.0 + 1e-6) {
            inside += 1;
        } else {
            // an interior mode beating both extremes at some ω breaks the upper bracket
            let e = q.eigenvalues();
            let dominated = (0..=2000).any(|k| {
                let w = PI * k as f64 / 2000.0;
                let g = |l: f64| circle_gain(&p, l, w).unwrap_or(0.0);
                let ends = g(e[0]).max(g(e[d - 1]));
                e[1..d - 1].iter().any(|&l| g(l) > ends)
            });
            interior += usize::from(dominated);
            bad.push(format!("#{i} d={d}: {est:.4} vs [{lo:.4}, {hi:.4}]"));
        }
    }
    let detail = format!("table brackets collapse, H∞^lb err {worst:.1e}, Qiu estimate bracketed {inside}/20");
    ensure(bad.is_empty(), || {
        format!(
            "{detail}; outside: {} ({interior} of these have an interior mode dominating the extremes)",
            bad.join(", ")
        )
    })?;
    Ok(detail)
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "table reproduction", c1_table),
        (2, "oracle equivalence", c2_oracle),
        (3, "lower-bound law", c3_lower_bound),
        (4, "interior-spectrum independence", c4_interior),
        (5, "stability radii", c5_radii),
        (6, "worst-case-noise limit", c6_noise_limit),
        (7, "cyclic-Laplacian experiment", c7_section6),
        (8, "MI pipeline", c8_mi),
        (9, "certificate soundness", c9_soundness),
        (10, "RS-HB", c10_rs_hb),
        (11, "trade-off designer", c11_tradeoff),
        (12, "real-radius bounds", c12_real_radius),
    ];
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        let t = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match out {
            Ok(d) => println!("PASS criterion {id} ({name}): {d} [{:.2?}]", t.elapsed()),
            Err(e) => {
                let known = KNOWN_FAILURES.contains(&id);
                println!(
                    "FAIL criterion {id} ({name}): {e}{} [{:.2?}]",
                    if known { " (known)" } else { "" },
                    t.elapsed()
                );
                unexpected += usize::from(!known);
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
