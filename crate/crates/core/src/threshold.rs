//! Sharp thresholds in the initial-data multiplier `sigma`.
//!
//! A geometric ladder from `sigma = 0.1` brackets the change of class, then
//! bisection narrows the bracket. Every run stops as soon as a stopping
//! certificate fires.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, profile_fit, stop_when_decided, Classification, Verdict, VerdictClass};
use crate::error::{Error, Result};
use crate::fbp_solver::{run_with_monitor, FbpTrajectory, Frame, SolverConfig};
use crate::wave_catalog::{Regime, WaveCatalog};

/// First rung of the ladder.
pub const LADDER_START: f64 = 0.1;
/// Smallest `sigma` tried when the first rung is already in the upper class;
/// below it the result reports `sigma_lo = 0`.
pub const LADDER_FLOOR: f64 = 1e-4;
/// Bisection stops after this many midpoints even if `rel_tol` is not met.
const MAX_BISECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Vanishing below, (virtual) spreading above. Undecided counts as below.
    VanishToSpread,
    /// Vanishing below, anything else above. Undecided counts as above.
    VanishToNonvanish,
}

impl Target {
    /// Whether a verdict falls on the upper side of this threshold.
    pub fn is_upper(self, v: Verdict) -> bool {
        match self {
            Target::VanishToSpread => v.is_positive(),
            Target::VanishToNonvanish => v != Verdict::Vanishing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub sigma: f64,
    pub verdict: Verdict,
    /// Certificate time, or the end of the run when nothing fired.
    pub t_decided: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub target: Target,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub verdict_lo: Verdict,
    pub verdict_hi: Verdict,
    pub evaluations: Vec<Evaluation>,
    pub regime: Regime,
    pub rel_tol: f64,
    pub converged: bool,
}

impl ThresholdResult {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.sigma_lo + self.sigma_hi)
    }

    pub fn rel_width(&self) -> f64 {
        (self.sigma_hi - self.sigma_lo) / self.sigma_hi
    }

    /// CSV with columns `sigma,verdict,t_decided,t_max`.
    pub fn evaluations_csv(&self) -> String {
        let mut s = String::from("sigma,verdict,t_decided,t_max\n");
        for e in &self.evaluations {
            s.push_str(&format!("{:.12e},{:?},{:.6},{:.6}\n", e.sigma, e.verdict, e.t_decided, e.t_max));
        }
        s
    }
}

/// True when sorting the evaluations by `sigma` also sorts their classes.
pub fn is_monotone(evals: &[Evaluation]) -> bool {
    let mut v: Vec<(f64, VerdictClass)> = evals.iter().map(|e| (e.sigma, e.verdict.class())).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v.windows(2).all(|w| w[0].1 <= w[1].1)
}

fn with_sigma(template: &SolverConfig, sigma: f64, t_max: f64) -> SolverConfig {
    let mut c = template.clone();
    c.init.sigma = sigma;
    c.t_max = t_max;
    c
}

fn stride(config: &SolverConfig) -> usize {
    ((config.snapshot_every / config.record_every).round() as usize).max(1)
}

/// Run with early stopping and classify.
pub fn evaluate(config: &SolverConfig, catalog: &WaveCatalog) -> Result<(FbpTrajectory, Classification)> {
    let traj = run_with_monitor(config, stop_when_decided(catalog, stride(config)))?;
    let class = classify(&traj, catalog);
    Ok((traj, class))
}

/// One ladder or bisection point; an undecided run is repeated once with
/// twice the horizon.
fn evaluate_sigma(template: &SolverConfig, catalog: &WaveCatalog, sigma: f64) -> Result<Evaluation> {
    let mut t_max = template.t_max;
    let mut class = evaluate(&with_sigma(template, sigma, t_max), catalog)?.1;
    if class.verdict == Verdict::Undecided {
        t_max *= 2.0;
        class = evaluate(&with_sigma(template, sigma, t_max), catalog)?.1;
    }
    let t_decided = class.certificate.as_ref().map(|c| c.t).unwrap_or(class.t_end);
    Ok(Evaluation { sigma, verdict: class.verdict, t_decided, t_max })
}

fn evaluate_many(
    template: &SolverConfig,
    catalog: &WaveCatalog,
    sigmas: &[f64],
    jobs: usize,
) -> Result<Vec<Evaluation>> {
    let one = |&s: &f64| {
        evaluate_sigma(template, catalog, s).map_err(|e| e.context(format!("threshold evaluation at sigma = {s}")))
    };
    if jobs > 1 {
        sigmas.par_iter().map(one).collect()
    } else {
        sigmas.iter().map(one).collect()
    }
}

/// Bracket and bisect the change of class for `target`.
///
/// `jobs > 1` evaluates up to `jobs` ladder rungs at once; bisection is
/// sequential.
pub fn find_threshold(
    template: &SolverConfig,
    catalog: &WaveCatalog,
    target: Target,
    rel_tol: f64,
    sigma_max: f64,
    jobs: usize,
) -> Result<ThresholdResult> {
    template.validate()?;
    if !(rel_tol >= 1e-3 && rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must lie in [1e-3, 1), got {rel_tol}")));
    }
    if !(sigma_max > 0.0 && sigma_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_max must be positive, got {sigma_max}")));
    }
    let mut evals: Vec<Evaluation> = Vec::new();
    let mut lo: Option<Evaluation> = None;
    let mut hi: Option<Evaluation> = None;

    // Upward ladder.
    let mut rungs: Vec<f64> = Vec::new();
    let mut s = LADDER_START.min(sigma_max);
    loop {
        rungs.push(s);
        if s >= sigma_max {
            break;
        }
        s = (2.0 * s).min(sigma_max);
    }
    for batch in rungs.chunks(jobs.max(1)) {
        let got = evaluate_many(template, catalog, batch, jobs)?;
        evals.extend(got.iter().cloned());
        for e in got {
            if target.is_upper(e.verdict) {
                hi = Some(e);
                break;
            }
            lo = Some(e);
        }
        if hi.is_some() {
            break;
        }
    }
    let Some(mut upper) = hi else {
        return Err(Error::NoUpperClassFound { sigma_max });
    };
    // Downward ladder when the first rung is already above the threshold.
    let mut lower = match lo {
        Some(l) => l,
        None => {
            let mut s = upper.sigma;
            loop {
                s /= 2.0;
                if s < LADDER_FLOOR {
                    // Threshold at zero: only the trivial datum stays below.
                    return Ok(ThresholdResult {
                        target,
                        sigma_lo: 0.0,
                        sigma_hi: upper.sigma,
                        verdict_lo: Verdict::Vanishing,
                        verdict_hi: upper.verdict,
                        evaluations: evals,
                        regime: catalog.regime,
                        rel_tol,
                        converged: false,
                    });
                }
                let e = evaluate_sigma(template, catalog, s)?;
                evals.push(e.clone());
                if target.is_upper(e.verdict) {
                    upper = e;
                } else {
                    break e;
                }
            }
        }
    };

    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        if (upper.sigma - lower.sigma) / upper.sigma <= rel_tol {
            converged = true;
            break;
        }
        let mid = 0.5 * (lower.sigma + upper.sigma);
        let e = evaluate_sigma(template, catalog, mid)
            .map_err(|err| err.context(format!("threshold evaluation at sigma = {mid}")))?;
        evals.push(e.clone());
        if target.is_upper(e.verdict) {
            upper = e;
        } else {
            lower = e;
        }
    }
    Ok(ThresholdResult {
        target,
        sigma_lo: lower.sigma,
        sigma_hi: upper.sigma,
        verdict_lo: lower.verdict,
        verdict_hi: upper.verdict,
        evaluations: evals,
        regime: catalog.regime,
        rel_tol,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvidence {
    pub sigma: f64,
    pub t_max: f64,
    /// Window of length `EVIDENCE_WINDOW` ending at the closest approach to `V*`.
    pub window: (f64, f64),
    /// Mean of `h'` over `window`.
    pub h_dot_mean: f64,
    /// `beta - c0`.
    pub h_dot_target: f64,
    /// `|mean - target| / target`.
    pub h_dot_rel_dev: f64,
    /// Fitted-shift sup-norm distance to `V*` on `[-10, 0]` in the front
    /// frame at the end of `window`.
    pub v_star_error: f64,
    /// Mean of `h'` over the last `EVIDENCE_WINDOW` of the run.
    pub h_dot_mean_at_end: f64,
    /// Fitted distance to `V*` at the end of the run, when the window fits.
    pub v_star_error_at_end: Option<f64>,
    pub verdict: Verdict,
}

impl TransitionEvidence {
    pub fn supports_transition(&self, h_dot_tol: f64, profile_tol: f64) -> bool {
        self.h_dot_rel_dev <= h_dot_tol && self.v_star_error <= profile_tol
    }
}

/// Length of the window over which `h'` is averaged.
pub const EVIDENCE_WINDOW: f64 = 10.0;
/// Snapshot spacing used while looking for the closest approach to `V*`.
const EVIDENCE_SNAPSHOT_EVERY: f64 = 1.0;

fn mean_h_dot(traj: &FbpTrajectory, t1: f64, t2: f64) -> Option<f64> {
    let v: Vec<f64> = traj.samples.iter().filter(|s| s.t >= t1 - 1e-9 && s.t <= t2 + 1e-9).map(|s| s.h_dot).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Run `config` (typically at a bisection midpoint) to its horizon and
/// measure how closely it shadows the transition wave `V*`.
///
/// Any `sigma` off the threshold leaves the neighborhood of `V*` in finite
/// time, so the window is anchored at the snapshot of closest approach. The
/// same statistics at the end of the run are reported alongside.
pub fn transition_evidence(config: &SolverConfig, catalog: &WaveCatalog) -> Result<TransitionEvidence> {
    let v = match (catalog.regime, &catalog.v_star) {
        (Regime::Medium, Some(v)) => v,
        _ => {
            return Err(Error::RegimeError(format!(
                "transition evidence needs c0 < beta < beta*, got beta = {}",
                catalog.params.beta
            )))
        }
    };
    let mut config = config.clone();
    config.snapshot_every = EVIDENCE_SNAPSHOT_EVERY.max(config.record_every);
    let traj = crate::fbp_solver::run(&config)?;
    let class = classify(&traj, catalog);
    let level_m = config.level_m;
    let fit_at = |state| profile_fit(state, v, Frame::Front, 10.0, level_m, true).ok().map(|f| f.error);
    let closest = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= EVIDENCE_WINDOW)
        .filter_map(|s| fit_at(&s.state).map(|e| (s.t, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((t_v, err)) = closest else {
        return Err(Error::InsufficientData("no snapshot admits a comparison with V*".into()));
    };
    let t1 = t_v - EVIDENCE_WINDOW;
    let mean = mean_h_dot(&traj, t1, t_v).expect("the window contains its end sample");
    let t_end = traj.t_end();
    let target = catalog.params.beta - catalog.c0;
    Ok(TransitionEvidence {
        sigma: config.init.sigma,
        t_max: config.t_max,
        window: (t1, t_v),
        h_dot_mean: mean,
        h_dot_target: target,
        h_dot_rel_dev: (mean - target).abs() / target,
        v_star_error: err,
        h_dot_mean_at_end: mean_h_dot(&traj, t_end - EVIDENCE_WINDOW, t_end).unwrap_or(f64::NAN),
        v_star_error_at_end: fit_at(&traj.final_state),
        verdict: class.verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(sigma: f64, verdict: Verdict) -> Evaluation {
        Evaluation { sigma, verdict, t_decided: 1.0, t_max: 10.0 }
    }

    #[test]
    fn monotone_transcripts() {
        let good = [ev(0.4, Verdict::VirtualSpreading), ev(0.1, Verdict::Vanishing), ev(0.2, Verdict::Undecided)];
        assert!(is_monotone(&good));
        let bad = [ev(0.4, Verdict::Vanishing), ev(0.1, Verdict::Spreading)];
        assert!(!is_monotone(&bad));
    }

    #[test]
    fn targets_split_the_middle_band_differently() {
        for v in [Verdict::Undecided, Verdict::VirtualVanishing] {
            assert!(!Target::VanishToSpread.is_upper(v));
            assert!(Target::VanishToNonvanish.is_upper(v));
        }
        assert!(!Target::VanishToNonvanish.is_upper(Verdict::Vanishing));
        assert!(Target::VanishToSpread.is_upper(Verdict::Spreading));
    }
}
