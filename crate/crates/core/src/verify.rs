//! Acceptance checks grouped into suites.
//!
//! Every check is run against the logistic reaction with `mu = 1`. Heavy
//! simulations shared by several checks are computed once per [`Verifier`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify, log_shift_diagnostic, profile_fit, Classification, Verdict};
use crate::error::{Error, Result};
use crate::fbp_solver::{run, FbpTrajectory, Frame, InitialData, Shape, SolverConfig};
use crate::kinetics::{make_logistic, Nonlinearity};
use crate::phase_plane::stefan_functional;
use crate::threshold::{find_threshold, transition_evidence, Target, ThresholdResult, TransitionEvidence};
use crate::wave_catalog::{
    beta_star, bisect, build_catalog, compact_delta_range, compact_wave_delta, rightward_semiwave_speed,
    semiwave_speed_sensitivity, ProblemParams, WaveCatalog,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Waves,
    Solver,
    Thresholds,
    Profiles,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waves" => Ok(Suite::Waves),
            "solver" => Ok(Suite::Solver),
            "thresholds" => Ok(Suite::Thresholds),
            "profiles" => Ok(Suite::Profiles),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected waves, solver, thresholds, profiles or all"
            ))),
        }
    }
}

impl Suite {
    pub fn criteria(self) -> &'static [u32] {
        match self {
            Suite::Waves => &[1, 2, 3, 4, 5],
            Suite::Solver => &[6, 9, 12],
            Suite::Profiles => &[7],
            Suite::Thresholds => &[8, 10, 11],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {} ({:.1} s)", self.id, self.name, self.detail, self.seconds)
    }
}

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "wave oracle",
        2 => "Stefan functional shape",
        3 => "beta* double characterization",
        4 => "speed sensitivity",
        5 => "compact-wave limits",
        6 => "spreading speed",
        7 => "front profile",
        8 => "vanishing width bound",
        9 => "large-advection vanishing",
        10 => "medium-regime trichotomy",
        11 => "log-shift lower bound",
        12 => "solver properties",
        _ => "unknown",
    }
}

/// `sqrt(2 int_0^1 f)` by composite Simpson.
pub fn energy_speed(f: &Nonlinearity) -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut s = f.eval(0.0) + f.eval(1.0);
    for k in 1..n {
        s += f.eval(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (2.0 * s * h / 3.0).sqrt()
}

pub fn logistic(beta: f64) -> Result<ProblemParams> {
    ProblemParams::new(make_logistic(), 1.0, beta)
}

/// `c0 + 0.5 (beta* - c0)` for the logistic reaction.
pub fn medium_beta() -> Result<f64> {
    let bs = beta_star(&logistic(1.0)?)?;
    Ok(2.0 + 0.5 * (bs - 2.0))
}

/// The spreading benchmark: `beta = 0.5`, `h0 = 1.1 H*`, cosine bump.
pub fn spreading_benchmark(n_grid: usize) -> Result<SolverConfig> {
    let p = logistic(0.5)?;
    let h_star = PI / (4.0f64 - 0.25).sqrt();
    let mut c = SolverConfig::new(p, InitialData::new(1.1 * h_star, Shape::Cosine, 1.0), 80.0);
    c.n_grid = n_grid;
    Ok(c)
}

/// Threshold template for the medium regime.
pub fn medium_template(beta: f64) -> Result<SolverConfig> {
    let mut c = SolverConfig::new(logistic(beta)?, InitialData::new(5.0, Shape::Cosine, 1.0), 60.0);
    c.n_grid = 1000;
    Ok(c)
}

/// Mean of `h'` over the last `min(10, t_end / 4)` time units.
pub fn trailing_h_dot(traj: &FbpTrajectory) -> f64 {
    let t_end = traj.t_end();
    let t1 = t_end - (t_end / 4.0).min(10.0);
    let v: Vec<f64> = traj.samples.iter().filter(|s| s.t >= t1).map(|s| s.h_dot).collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub struct SpreadingRun {
    pub catalog: WaveCatalog,
    pub traj: FbpTrajectory,
    pub class: Classification,
}

pub struct MediumRuns {
    pub catalog: WaveCatalog,
    pub threshold: ThresholdResult,
    pub upper: FbpTrajectory,
    pub upper_class: Classification,
    pub lower_class: Classification,
    pub evidence: TransitionEvidence,
}

/// Runs criteria and keeps the shared simulations.
pub struct Verifier {
    pub jobs: usize,
    spreading: OnceLock<std::result::Result<SpreadingRun, String>>,
    medium: OnceLock<std::result::Result<MediumRuns, String>>,
}

fn check(ok: bool, detail: String) -> Result<(bool, String)> {
    Ok((ok, detail))
}

impl Verifier {
    pub fn new(jobs: usize) -> Self {
        Verifier { jobs: jobs.max(1), spreading: OnceLock::new(), medium: OnceLock::new() }
    }

    pub fn spreading(&self) -> Result<&SpreadingRun> {
        self.spreading
            .get_or_init(|| {
                (|| -> Result<SpreadingRun> {
                    let config = spreading_benchmark(1600)?;
                    let catalog = build_catalog(&config.params)?;
                    let traj = run(&config)?;
                    let class = classify(&traj, &catalog);
                    Ok(SpreadingRun { catalog, traj, class })
                })()
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::InsufficientData(format!("spreading benchmark failed: {e}")))
    }

    pub fn medium(&self) -> Result<&MediumRuns> {
        self.medium
            .get_or_init(|| {
                (|| -> Result<MediumRuns> {
                    let template = medium_template(medium_beta()?)?;
                    let catalog = build_catalog(&template.params)?;
                    let threshold = find_threshold(&template, &catalog, Target::VanishToSpread, 1e-2, 100.0, self.jobs)?;

                    let mut up = template.clone();
                    up.init.sigma = 2.0 * threshold.sigma_hi;
                    up.t_max = 100.0;
                    up.n_grid = 2000;
                    let upper = run(&up)?;
                    let upper_class = classify(&upper, &catalog);

                    let mut down = template.clone();
                    down.init.sigma = 0.5 * threshold.sigma_lo;
                    let lower_class = classify(&run(&down)?, &catalog);

                    let mut mid = template.clone();
                    mid.init.sigma = threshold.midpoint();
                    mid.t_max = 2.0 * template.t_max;
                    let evidence = transition_evidence(&mid, &catalog)?;
                    Ok(MediumRuns { catalog, threshold, upper, upper_class, lower_class, evidence })
                })()
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::InsufficientData(format!("medium-regime runs failed: {e}")))
    }

    pub fn run_criterion(&self, id: u32) -> CriterionResult {
        let start = Instant::now();
        let (passed, detail) = match self.evaluate(id) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            name: criterion_name(id).to_string(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_suite(&self, suite: Suite) -> Vec<CriterionResult> {
        suite.criteria().iter().map(|&id| self.run_criterion(id)).collect()
    }

    fn evaluate(&self, id: u32) -> Result<(bool, String)> {
        match id {
            1 => {
                let p0 = stefan_functional(&logistic(1.0)?.phase(0.0), 1.0)?;
                let energy = energy_speed(&make_logistic());
                let exact = (1.0f64 / 3.0).sqrt();
                check(
                    (p0 - exact).abs() <= 1e-6 && (energy - exact).abs() <= 1e-12,
                    format!("P(0) = {p0:.12}, energy identity {energy:.12}, sqrt(1/3) = {exact:.12}"),
                )
            }
            2 => {
                let params = logistic(1.0)?;
                let gammas: Vec<f64> = (0..20).map(|k| -6.0 + 7.9 * k as f64 / 19.0).collect();
                let ps = gammas.iter().map(|&g| params.stefan(g)).collect::<Result<Vec<f64>>>()?;
                let decreasing = ps.windows(2).all(|w| w[1] < w[0]);
                let near = params.stefan(1.99)?;
                check(
                    decreasing && near < 0.03,
                    format!("strictly decreasing on 20 samples: {decreasing}; P(1.99) = {near:.3e}"),
                )
            }
            3 => {
                let params = logistic(1.0)?;
                let direct = params.stefan(-2.0)? + 2.0;
                let c_minus = |b: f64| -> Result<f64> { Ok(rightward_semiwave_speed(&params.with_beta(b))? - b + 2.0) };
                let mut hi = 3.0;
                while c_minus(hi)? > 0.0 {
                    hi *= 2.0;
                }
                let root = bisect(c_minus, 2.0 + 1e-6, hi, 1e-10)?;
                check(
                    (direct - root).abs() <= 1e-6,
                    format!("P(-2) + 2 = {direct:.10}, root of c*(beta) - beta + 2 = {root:.10}"),
                )
            }
            4 => {
                let mut parts = Vec::new();
                let mut ok = true;
                for beta in [0.5, 1.0, 2.0, 4.0] {
                    let d = semiwave_speed_sensitivity(&logistic(beta)?, 1e-3)?;
                    ok &= d > 0.02 && d < 0.98;
                    parts.push(format!("{beta}: {d:.4}"));
                }
                check(ok, format!("dc*/dbeta at {}", parts.join(", ")))
            }
            5 => {
                let params = logistic(medium_beta()?)?;
                let c_star = rightward_semiwave_speed(&params)?;
                let range = compact_delta_range(&params, c_star)?;
                let mut ls = Vec::new();
                let mut ds = Vec::new();
                for fr in [0.9, 0.99, 0.999] {
                    let w = compact_wave_delta(&params, fr * range)?;
                    ls.push(w.width.unwrap_or(f64::NAN));
                    ds.push(w.height);
                }
                let l_up = ls.windows(2).all(|w| w[1] > w[0]);
                let d_up = ds.windows(2).all(|w| w[1] > w[0]);
                check(
                    l_up && d_up && ds[2] >= 0.99,
                    format!("L = {ls:.4?}, D = {ds:.5?}"),
                )
            }
            6 => {
                let r = self.spreading()?;
                let c = &r.class;
                let c_star = r.catalog.c_star;
                let c_l = r.catalog.c_l_star.unwrap_or(f64::NAN);
                let front = c.measured_front_speed.unwrap_or(f64::NAN);
                let back = c.measured_back_speed.unwrap_or(f64::NAN);
                let ef = (front - c_star).abs() / c_star;
                let eb = (back - c_l).abs() / c_l.abs();
                check(
                    c.verdict == Verdict::Spreading && ef <= 0.05 && eb <= 0.05,
                    format!(
                        "{:?}; h-speed {front:.5} vs c* {c_star:.5} ({:.2}%), g-speed {back:.5} vs c_l* {c_l:.5} ({:.2}%)",
                        c.verdict,
                        100.0 * ef,
                        100.0 * eb
                    ),
                )
            }
            7 => {
                let r = self.spreading()?;
                let fit = profile_fit(&r.traj.final_state, &r.catalog.u_star, Frame::Front, 10.0, r.traj.level_m, true)?;
                check(fit.error <= 0.02, format!("sup |u - U*| on [-10, 0] = {:.3e} at shift {:.4}", fit.error, fit.shift))
            }
            8 => {
                let mut template = SolverConfig::new(logistic(1.0)?, InitialData::new(0.5, Shape::Cosine, 1.0), 60.0);
                template.n_grid = 1000;
                let catalog = build_catalog(&template.params)?;
                // rel_tol 0.34 stops after exactly one bisection of the ladder bracket.
                let th = find_threshold(&template, &catalog, Target::VanishToSpread, 0.34, 100.0, self.jobs)?;
                let mut below = template.clone();
                below.init.sigma = th.sigma_lo;
                let traj = run(&below)?;
                let class = classify(&traj, &catalog);
                let width = traj.final_state.width();
                let bound = 2.0 * PI / 3f64.sqrt() * 1.05;
                check(
                    class.verdict == Verdict::Vanishing && width <= bound,
                    format!(
                        "sigma = {} ({:?}), bracket [{}, {}], h - g = {width:.4} vs {bound:.4}",
                        th.sigma_lo, class.verdict, th.sigma_lo, th.sigma_hi
                    ),
                )
            }
            9 => {
                let bs = beta_star(&logistic(1.0)?)?;
                let params = logistic(1.5 * bs)?;
                let catalog = build_catalog(&params)?;
                let mut ok = true;
                let mut parts = Vec::new();
                for sigma in [1.0, 10.0] {
                    let mut c = SolverConfig::new(params.clone(), InitialData::new(2.0, Shape::Cosine, sigma), 60.0);
                    c.n_grid = 1000;
                    let traj = run(&c)?;
                    let class = classify(&traj, &catalog);
                    let hd = trailing_h_dot(&traj);
                    ok &= class.verdict == Verdict::Vanishing && hd < 1e-3;
                    parts.push(format!("sigma {sigma}: {:?}, trailing h' {hd:.2e}", class.verdict));
                }
                check(ok, parts.join("; "))
            }
            10 => {
                let m = self.medium()?;
                let th = &m.threshold;
                let c_star = m.catalog.c_star;
                let uc = &m.upper_class;
                let front = uc.measured_front_speed.unwrap_or(f64::NAN);
                let ef = (front - c_star).abs() / c_star;
                let q_err = uc.back_profile_error.unwrap_or(f64::NAN);
                let a = uc.verdict == Verdict::VirtualSpreading && ef <= 0.05 && q_err <= 0.05;
                let b = m.lower_class.verdict == Verdict::Vanishing;
                let ev = &m.evidence;
                let c = ev.supports_transition(0.10, 0.05);
                check(
                    a && b && c && th.rel_width() <= 1e-2,
                    format!(
                        "bracket [{:.6}, {:.6}]; (a) {:?}, speed {front:.4} vs c* {c_star:.4}, Q error {q_err:.3e}; \
                         (b) {:?}; (c) h' {:.4} vs {:.4} ({:.1}%), V* error {:.3e} on [{}, {}]",
                        th.sigma_lo,
                        th.sigma_hi,
                        uc.verdict,
                        m.lower_class.verdict,
                        ev.h_dot_mean,
                        ev.h_dot_target,
                        100.0 * ev.h_dot_rel_dev,
                        ev.v_star_error,
                        ev.window.0,
                        ev.window.1
                    ),
                )
            }
            11 => {
                let m = self.medium()?;
                let series = log_shift_diagnostic(&m.upper, &m.catalog)?;
                let (ok, detail) = log_shift_bounded_below(&series);
                check(ok, detail)
            }
            12 => self.solver_properties(),
            other => Err(Error::InvalidArgument(format!("no criterion {other}"))),
        }
    }

    fn solver_properties(&self) -> Result<(bool, String)> {
        let mut fails = Vec::new();
        let r = self.spreading()?;
        let h0 = r.traj.snapshots[0].state.h;
        let mono = r.traj.samples.windows(2).all(|w| w[1].g <= w[0].g && w[1].h >= w[0].h);
        let drift = r.traj.samples.iter().all(|s| s.g + s.h > -2.0 * h0 - 0.05 * h0);
        if !mono {
            fails.push("boundary monotonicity".to_string());
        }
        if !drift {
            fails.push("center drift".to_string());
        }

        // Comparison pair.
        let mut lo = spreading_benchmark(800)?;
        lo.t_max = 20.0;
        lo.snapshot_every = 5.0;
        let mut hi = lo.clone();
        lo.init.sigma = 0.5;
        let (a, b) = (run(&lo)?, run(&hi)?);
        let mut worst: f64 = f64::NEG_INFINITY;
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            worst = worst.max(sa.h - sb.h);
        }
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for i in 0..sa.state.w.len() {
                let x = sa.state.x(i);
                worst = worst.max(sa.state.w[i] - sb.state.eval(x));
            }
        }
        if worst > 1e-3 {
            fails.push(format!("comparison ({worst:.2e})"));
        }

        // Upper barrier from eta' = f(eta) with sup u0 = 3.
        hi.init.sigma = 3.0;
        let c = run(&hi)?;
        let f = &hi.params.f;
        let mut eta = 3.0;
        let mut t = 0.0;
        let mut excess: f64 = f64::NEG_INFINITY;
        let dt: f64 = 1e-3;
        for s in &c.samples {
            while t + 1e-12 < s.t {
                let h = dt.min(s.t - t);
                let k1 = f.eval(eta);
                let k2 = f.eval(eta + 0.5 * h * k1);
                let k3 = f.eval(eta + 0.5 * h * k2);
                let k4 = f.eval(eta + h * k3);
                eta += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                t += h;
            }
            excess = excess.max(s.sup_u - eta);
        }
        if excess > 1e-3 {
            fails.push(format!("upper barrier ({excess:.2e})"));
        }

        // Grid refinement on the spreading benchmark.
        let fine = run(&spreading_benchmark(3200)?)?;
        let rel = (fine.last().h - r.traj.last().h).abs() / fine.last().h;
        if rel > 5e-3 {
            fails.push(format!("grid refinement ({rel:.2e})"));
        }
        let detail = format!(
            "monotone {mono}, drift {drift}, comparison excess {worst:.2e}, barrier excess {excess:.2e}, h(80) change {:.3}%",
            100.0 * rel
        );
        Ok((fails.is_empty(), if fails.is_empty() { detail } else { format!("{detail}; failed: {}", fails.join(", ")) }))
    }
}

/// Boundedness below of the log-shift offset: over the final half of the
/// run the least-squares slope is at least `-2e-3` and the minimum does not
/// fall more than `0.25` below the value at the start of that half.
pub fn log_shift_bounded_below(series: &[(f64, f64)]) -> (bool, String) {
    let Some(&(t_end, _)) = series.last() else {
        return (false, "empty series".into());
    };
    let half: Vec<(f64, f64)> = series.iter().cloned().filter(|p| p.0 >= t_end / 2.0).collect();
    if half.len() < 3 {
        return (false, "final half has fewer than 3 samples".into());
    }
    let m = half.len() as f64;
    let tm = half.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = half.iter().map(|p| p.1).sum::<f64>() / m;
    let slope = half.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum::<f64>()
        / half.iter().map(|p| (p.0 - tm).powi(2)).sum::<f64>();
    let start = half[0].1;
    let min = half.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ok = slope >= -2e-3 && min >= start - 0.25;
    (ok, format!("final-half slope {slope:.2e}, min {min:.4}, value at t/2 {start:.4}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_parse() {
        assert_eq!("all".parse::<Suite>().unwrap().criteria().len(), 12);
        assert!("bogus".parse::<Suite>().is_err());
        let union: Vec<u32> = [Suite::Waves, Suite::Solver, Suite::Profiles, Suite::Thresholds]
            .iter()
            .flat_map(|s| s.criteria().iter().cloned())
            .collect();
        let mut sorted = union.clone();
        sorted.sort();
        assert_eq!(sorted, Suite::All.criteria());
    }

    #[test]
    fn energy_speed_of_logistic() {
        assert!((energy_speed(&make_logistic()) - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn flat_series_is_bounded_below() {
        let flat: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, -3.0 + 0.01 * (k as f64).sin())).collect();
        assert!(log_shift_bounded_below(&flat).0);
        let sinking: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, -0.05 * k as f64)).collect();
        assert!(!log_shift_bounded_below(&sinking).0);
    }
}
