//! Long-time verdicts from a simulated trajectory.
//!
//! Positive verdicts come from sufficient certificates: a width bound for
//! small advection and domination of a compact wave `W_delta` otherwise.
//! Vanishing comes from domination by a shift of the tadpole `V*` or from a
//! decay proxy. Speeds and profile errors are measured once a positive
//! verdict exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbp_solver::{extract_profile, Control, FbpState, FbpTrajectory, Frame, Sample, Terminal};
use crate::phase_plane::WaveProfile;
use crate::wave_catalog::{compact_wave_delta, Regime, WaveCatalog};

/// Width margin over `2 H*`, as a fraction of `H*`.
pub const WIDTH_MARGIN: f64 = 0.02;
/// Vanishing proxy: `sup u` and `h'` below this over a trailing window.
pub const PROXY_LEVEL: f64 = 1e-6;
pub const PROXY_WINDOW: f64 = 10.0;
/// Virtual vanishing needs `sup u` below this over the trailing window.
pub const VIRTUAL_VANISHING_LEVEL: f64 = 1e-3;
/// Shortest admissible speed-fit window.
pub const MIN_FIT_SPAN: f64 = 10.0;
/// Spacing of trial shifts when dominating by a tadpole.
const TADPOLE_SHIFT_STEP: f64 = 0.05;
/// How far past `h` tadpole shifts are tried.
const TADPOLE_SHIFT_RANGE: f64 = 60.0;
/// Half-width of the shift search in `profile_error`.
const SHIFT_SEARCH: f64 = 5.0;
const SHIFT_COARSE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Spreading,
    Vanishing,
    VirtualSpreading,
    VirtualVanishing,
    Undecided,
}

/// Coarse outcome class, ordered by `sigma` along any ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerdictClass {
    Lower,
    Middle,
    Upper,
}

impl Verdict {
    pub fn class(self) -> VerdictClass {
        match self {
            Verdict::Vanishing => VerdictClass::Lower,
            Verdict::VirtualVanishing | Verdict::Undecided => VerdictClass::Middle,
            Verdict::Spreading | Verdict::VirtualSpreading => VerdictClass::Upper,
        }
    }

    pub fn is_positive(self) -> bool {
        self.class() == VerdictClass::Upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// `h - g >= 2 H* + margin`.
    SpreadingWidth,
    /// `u(t, .) >= W_delta(. - x1)`.
    CompactDomination,
    /// `u(t, .) <= V*(. - x1)` with `x1 >= h(t)`.
    TadpoleDomination,
    /// `sup u` and `h'` below `PROXY_LEVEL` over a trailing window.
    DecayProxy,
    /// Critical regime: `sup u` small yet `h'` positive throughout the window.
    PersistentGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub t: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    pub window: (f64, f64),
    /// Least-squares slope.
    pub speed: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the line fit.
    pub residual: f64,
    /// `(x(t2) - x(t1)) / (t2 - t1)`.
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogShiftSummary {
    pub min_full: f64,
    pub min_final_half: f64,
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    pub measured_front_speed: Option<f64>,
    pub measured_back_speed: Option<f64>,
    pub front_profile_error: Option<f64>,
    pub back_profile_error: Option<f64>,
    pub log_shift_offset: Option<f64>,
    pub log_shift: Option<LogShiftSummary>,
    pub t_end: f64,
}

/// Which moving point a speed is measured for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `h(t)`
    Right,
    /// `g(t)`
    Left,
    /// `chi_m(t)`
    Level,
}

fn side_value(s: &Sample, side: Side) -> Option<f64> {
    match side {
        Side::Right => Some(s.h),
        Side::Left => Some(s.g),
        Side::Level => s.chi_m,
    }
}

pub fn certify_spreading_small_beta(traj: &FbpTrajectory, catalog: &WaveCatalog) -> Result<Option<Certificate>> {
    let h_star = match (catalog.regime, catalog.h_star) {
        (Regime::SmallAdvection, Some(h)) => h,
        _ => {
            return Err(Error::RegimeError(format!(
                "width certificate needs beta < c0, got beta = {}",
                catalog.params.beta
            )))
        }
    };
    let bound = (2.0 + WIDTH_MARGIN) * h_star;
    Ok(traj.samples.iter().find(|s| s.h - s.g >= bound).map(|s| Certificate {
        kind: CertificateKind::SpreadingWidth,
        t: s.t,
        detail: format!("h - g = {:.6} >= 2.02 H* = {bound:.6}", s.h - s.g),
    }))
}

/// Shift `x1` with `u(t, .) >= w(. - x1)` on the support of `w`, if any.
fn dominating_shift(state: &FbpState, w: &WaveProfile) -> Option<f64> {
    let (zl, zr) = (w.z_min(), w.z_max());
    let len = zr - zl;
    let height = w.height;
    if state.sup() < height || state.width() < len {
        return None;
    }
    let mut pts: Vec<(f64, f64)> = w.z.iter().cloned().zip(w.q.iter().cloned()).collect();
    // Test the tallest part first: most trial shifts fail there.
    pts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let n = state.w.len();
    (0..n)
        .map(|j| state.x(j) - zr)
        .filter(|&x1| x1 + zl >= state.g && x1 + zr <= state.h)
        .find(|&x1| pts.iter().all(|&(z, q)| state.eval(x1 + z) >= q))
}

/// Shift `x1 >= h` with `u(t, .) <= v(. - x1)` on `[g, h]`, if any.
fn dominated_shift(state: &FbpState, v: &WaveProfile) -> Option<f64> {
    if state.sup() > v.height {
        return None;
    }
    let steps = (TADPOLE_SHIFT_RANGE / TADPOLE_SHIFT_STEP) as usize;
    (0..=steps).map(|k| state.h + k as f64 * TADPOLE_SHIFT_STEP).find(|&x1| {
        state.w.iter().enumerate().all(|(i, &u)| u <= v.eval(state.x(i) - x1))
    })
}

/// Domination by `W_delta` for the catalog's `delta` or another fraction of
/// the admissible range.
pub fn certify_virtual_spreading(
    snapshots: &[crate::fbp_solver::Snapshot],
    catalog: &WaveCatalog,
    delta_fraction: Option<f64>,
) -> Result<Option<Certificate>> {
    let cw = match (catalog.regime, &catalog.w_delta) {
        (Regime::Critical | Regime::Medium, Some(cw)) => cw,
        _ => {
            return Err(Error::RegimeError(format!(
                "compact-wave certificate needs c0 <= beta < beta*, got beta = {}",
                catalog.params.beta
            )))
        }
    };
    let (profile, delta, frac) = match delta_fraction {
        Some(fr) if fr != cw.delta_fraction => {
            let delta = fr * cw.delta / cw.delta_fraction;
            (compact_wave_delta(&catalog.params, delta)?, delta, fr)
        }
        _ => (cw.profile.clone(), cw.delta, cw.delta_fraction),
    };
    Ok(snapshots.iter().find_map(|s| {
        dominating_shift(&s.state, &profile).map(|x1| Certificate {
            kind: CertificateKind::CompactDomination,
            t: s.t,
            detail: format!(
                "u >= W_delta(. - {x1:.4}), delta = {delta:.6e} ({:.1}% of range), L = {:.4}",
                100.0 * frac,
                profile.width.unwrap_or(f64::NAN)
            ),
        })
    }))
}

fn certify_tadpole(snapshots: &[crate::fbp_solver::Snapshot], catalog: &WaveCatalog) -> Option<Certificate> {
    let v = catalog.v_star.as_ref()?;
    snapshots.iter().find_map(|s| {
        dominated_shift(&s.state, v).map(|x1| Certificate {
            kind: CertificateKind::TadpoleDomination,
            t: s.t,
            detail: format!("u <= V*(. - {x1:.4}) with h = {:.4}", s.state.h),
        })
    })
}

fn certify_proxy(traj: &FbpTrajectory) -> Option<Certificate> {
    let quiet = |s: &Sample| s.sup_u < PROXY_LEVEL && s.h_dot < PROXY_LEVEL;
    let mut start: Option<f64> = None;
    for s in &traj.samples {
        if quiet(s) {
            let t0 = *start.get_or_insert(s.t);
            if s.t - t0 >= PROXY_WINDOW {
                return Some(Certificate {
                    kind: CertificateKind::DecayProxy,
                    t: s.t,
                    detail: format!("sup u, h' < {PROXY_LEVEL:e} on [{t0}, {}]", s.t),
                });
            }
        } else {
            start = None;
        }
    }
    let fs = &traj.final_state;
    if traj.terminal == Terminal::SupBelowFloor && fs.h_dot < PROXY_LEVEL {
        return Some(Certificate {
            kind: CertificateKind::DecayProxy,
            t: fs.t,
            detail: format!("sup u fell below the solver floor with h' = {:.3e}", fs.h_dot),
        });
    }
    None
}

/// Both vanishing routes: tadpole domination (Medium regime) and the decay
/// proxy (any regime). Tadpole domination is reported first.
pub fn certify_vanishing(traj: &FbpTrajectory, catalog: &WaveCatalog) -> Option<Certificate> {
    certify_tadpole(&traj.snapshots, catalog).or_else(|| certify_proxy(traj))
}

fn certify_virtual_vanishing(traj: &FbpTrajectory) -> Option<Certificate> {
    let t_end = traj.t_end();
    if t_end < PROXY_WINDOW {
        return None;
    }
    let tail: Vec<&Sample> = traj.samples.iter().filter(|s| s.t >= t_end - PROXY_WINDOW).collect();
    let ok = tail.iter().all(|s| s.sup_u < VIRTUAL_VANISHING_LEVEL && s.h_dot > 0.0)
        && tail.last()?.h > tail.first()?.h;
    ok.then(|| Certificate {
        kind: CertificateKind::PersistentGrowth,
        t: t_end,
        detail: format!("sup u < {VIRTUAL_VANISHING_LEVEL:e} and h' > 0 on [{}, {t_end}]", t_end - PROXY_WINDOW),
    })
}

/// Line fit of `h`, `g` or `chi_m` over the final `window_fraction` of the
/// samples.
pub fn measure_speed(traj: &FbpTrajectory, side: Side, window_fraction: f64) -> Result<SpeedFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("window fraction must lie in (0, 1], got {window_fraction}")));
    }
    let n = traj.samples.len();
    let k = ((n as f64) * window_fraction).ceil() as usize;
    let pts: Vec<(f64, f64)> = traj.samples[n - k.min(n)..]
        .iter()
        .filter_map(|s| side_value(s, side).map(|x| (s.t, x)))
        .collect();
    let (t1, t2) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::InsufficientData("no samples in the fit window".into())),
    };
    if t2 < t1 + MIN_FIT_SPAN {
        return Err(Error::InsufficientData(format!(
            "fit window [{t1}, {t2}] shorter than {MIN_FIT_SPAN}"
        )));
    }
    let m = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let speed = stx / stt;
    let intercept = xm - speed * tm;
    let residual = (pts.iter().map(|p| (p.1 - intercept - speed * p.0).powi(2)).sum::<f64>() / m).sqrt();
    let increment = (pts[pts.len() - 1].1 - pts[0].1) / (t2 - t1);
    Ok(SpeedFit { window: (t1, t2), speed, intercept, residual, increment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub shift: f64,
    pub error: f64,
}

fn sup_distance(data: &[(f64, f64)], reference: &WaveProfile, shift: f64) -> f64 {
    data.iter().map(|&(z, u)| (u - reference.eval(z - shift)).abs()).fold(0.0, f64::max)
}

/// Sup-norm distance between `u(t, . + origin)` and `reference(. - shift)`
/// on the frame window. With `fitted_shift` the shift minimizing the
/// distance is searched; the unshifted comparison is always a candidate.
pub fn profile_fit(
    state: &FbpState,
    reference: &WaveProfile,
    frame: Frame,
    window: f64,
    level_m: f64,
    fitted_shift: bool,
) -> Result<ProfileFit> {
    let data = extract_profile(state, frame, window, level_m)?;
    let zero = ProfileFit { shift: 0.0, error: sup_distance(&data, reference, 0.0) };
    if !fitted_shift {
        return Ok(zero);
    }
    let center = match frame {
        Frame::Back => reference.level_point(level_m).map(|z| -z).unwrap_or(0.0),
        Frame::Front | Frame::Rear => 0.0,
    };
    let err = |s: f64| sup_distance(&data, reference, s);
    let steps = (2.0 * SHIFT_SEARCH / SHIFT_COARSE).round() as usize;
    let mut best = zero;
    for k in 0..=steps {
        let s = center - SHIFT_SEARCH + k as f64 * SHIFT_COARSE;
        let e = err(s);
        if e < best.error {
            best = ProfileFit { shift: s, error: e };
        }
    }
    // Golden-section refinement around the best coarse shift.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.shift - SHIFT_COARSE, best.shift + SHIFT_COARSE);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut ec, mut ed) = (err(c), err(d));
    for _ in 0..40 {
        if ec < ed {
            b = d;
            d = c;
            ed = ec;
            c = b - g * (b - a);
            ec = err(c);
        } else {
            a = c;
            c = d;
            ec = ed;
            d = a + g * (b - a);
            ed = err(d);
        }
    }
    for (s, e) in [(c, ec), (d, ed)] {
        if e < best.error {
            best = ProfileFit { shift: s, error: e };
        }
    }
    Ok(best)
}

pub fn profile_error(
    state: &FbpState,
    reference: &WaveProfile,
    frame: Frame,
    window: f64,
    level_m: f64,
    fitted_shift: bool,
) -> Result<f64> {
    Ok(profile_fit(state, reference, frame, window, level_m, fitted_shift)?.error)
}

/// `(t, chi_m(t) - (beta - c0) t - (3 / c0) ln t)` for every sample with
/// `t > 0` and a level point.
pub fn log_shift_diagnostic(traj: &FbpTrajectory, catalog: &WaveCatalog) -> Result<Vec<(f64, f64)>> {
    if !matches!(catalog.regime, Regime::Critical | Regime::Medium) {
        return Err(Error::RegimeError(format!(
            "log-shift diagnostic needs c0 <= beta < beta*, got beta = {}",
            catalog.params.beta
        )));
    }
    let (beta, c0) = (catalog.params.beta, catalog.c0);
    Ok(traj
        .samples
        .iter()
        .filter(|s| s.t > 0.0)
        .filter_map(|s| s.chi_m.map(|chi| (s.t, chi - (beta - c0) * s.t - 3.0 / c0 * s.t.ln())))
        .collect())
}

fn summarize_log_shift(series: &[(f64, f64)]) -> Option<LogShiftSummary> {
    let last = series.last()?;
    let half = last.0 / 2.0;
    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    Some(LogShiftSummary {
        min_full: min_of(&mut series.iter().map(|p| p.1)),
        min_final_half: min_of(&mut series.iter().filter(|p| p.0 >= half).map(|p| p.1)),
        last: last.1,
    })
}

/// Window used for profile comparisons.
pub const PROFILE_WINDOW: f64 = 10.0;

pub fn classify(traj: &FbpTrajectory, catalog: &WaveCatalog) -> Classification {
    let mut out = Classification {
        verdict: Verdict::Undecided,
        certificate: None,
        measured_front_speed: None,
        measured_back_speed: None,
        front_profile_error: None,
        back_profile_error: None,
        log_shift_offset: None,
        log_shift: None,
        t_end: traj.t_end(),
    };
    let decided = if let Some(c) = certify_tadpole(&traj.snapshots, catalog) {
        Some((Verdict::Vanishing, c))
    } else if let Ok(Some(c)) = certify_virtual_spreading(&traj.snapshots, catalog, None) {
        Some((Verdict::VirtualSpreading, c))
    } else if let Ok(Some(c)) = certify_spreading_small_beta(traj, catalog) {
        Some((Verdict::Spreading, c))
    } else if let Some(c) = certify_proxy(traj) {
        Some((Verdict::Vanishing, c))
    } else if catalog.regime == Regime::Critical {
        certify_virtual_vanishing(traj).map(|c| (Verdict::VirtualVanishing, c))
    } else {
        None
    };
    let Some((verdict, cert)) = decided else {
        return out;
    };
    out.verdict = verdict;
    out.certificate = Some(cert);
    if !verdict.is_positive() {
        return out;
    }

    let fs = &traj.final_state;
    let level_m = traj.level_m;
    out.measured_front_speed = measure_speed(traj, Side::Right, 0.5).ok().map(|f| f.increment);
    out.front_profile_error =
        profile_error(fs, &catalog.u_star, Frame::Front, PROFILE_WINDOW, level_m, true).ok();
    match verdict {
        Verdict::Spreading => {
            out.measured_back_speed = measure_speed(traj, Side::Left, 0.5).ok().map(|f| f.increment);
            if let Some(ul) = &catalog.u_l_star {
                out.back_profile_error = profile_error(fs, ul, Frame::Rear, PROFILE_WINDOW, level_m, true).ok();
            }
        }
        _ => {
            out.measured_back_speed = measure_speed(traj, Side::Level, 0.5).ok().map(|f| f.increment);
            if let Some(q) = &catalog.q_front {
                out.back_profile_error = profile_error(fs, q, Frame::Back, PROFILE_WINDOW, level_m, true).ok();
            }
            if let Ok(series) = log_shift_diagnostic(traj, catalog) {
                out.log_shift = summarize_log_shift(&series);
                out.log_shift_offset = out.log_shift.as_ref().map(|s| s.min_final_half);
            }
        }
    }
    out
}

/// Monitor that stops a run once a stopping certificate would fire.
///
/// Width and decay checks run at every sample; domination checks run every
/// `stride` samples, matching the snapshot cadence so that `classify` on the
/// stopped trajectory finds the same certificate.
pub fn stop_when_decided<'a>(
    catalog: &'a WaveCatalog,
    stride: usize,
) -> impl FnMut(&Sample, &FbpState) -> Control + 'a {
    let bound = catalog.h_star.map(|h| (2.0 + WIDTH_MARGIN) * h);
    let mut quiet_since: Option<f64> = None;
    let mut count = 0usize;
    move |s, state| {
        count += 1;
        if bound.is_some_and(|b| s.h - s.g >= b) {
            return Control::Stop;
        }
        if s.sup_u < PROXY_LEVEL && s.h_dot < PROXY_LEVEL {
            let t0 = *quiet_since.get_or_insert(s.t);
            if s.t - t0 >= PROXY_WINDOW {
                return Control::Stop;
            }
        } else {
            quiet_since = None;
        }
        if count % stride.max(1) == 0 {
            let tadpole = catalog.v_star.as_ref().is_some_and(|v| dominated_shift(state, v).is_some());
            let compact = catalog.w_delta.as_ref().is_some_and(|w| dominating_shift(state, &w.profile).is_some());
            if tadpole || compact {
                return Control::Stop;
            }
        }
        Control::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbp_solver::Snapshot;
    use crate::kinetics::make_logistic;
    use crate::wave_catalog::{build_catalog, ProblemParams};
    use std::sync::OnceLock;

    fn medium() -> &'static WaveCatalog {
        static CAT: OnceLock<WaveCatalog> = OnceLock::new();
        CAT.get_or_init(|| {
            let p = ProblemParams::new(make_logistic(), 1.0, 3.1).unwrap();
            build_catalog(&p).unwrap()
        })
    }

    fn state_from(g: f64, h: f64, n: usize, u: impl Fn(f64) -> f64) -> FbpState {
        let mut w: Vec<f64> = (0..n + 2).map(|i| u(g + (h - g) * i as f64 / (n + 1) as f64)).collect();
        w[0] = 0.0;
        w[n + 1] = 0.0;
        FbpState { t: 5.0, g, h, w, g_dot: 0.0, h_dot: 0.0, steps: 0, clipped: 0.0 }
    }

    fn snap(state: FbpState) -> Vec<Snapshot> {
        vec![Snapshot { t: state.t, state }]
    }

    #[test]
    fn plateau_dominates_compact_wave() {
        let cat = medium();
        let l = cat.w_delta.as_ref().unwrap().profile.width.unwrap();
        let plateau = state_from(0.0, l + 4.0, 2000, |x| if (1.0..=l + 3.0).contains(&x) { 0.99 } else { 0.5 });
        let cert = certify_virtual_spreading(&snap(plateau), cat, None).unwrap().unwrap();
        assert_eq!(cert.kind, CertificateKind::CompactDomination);
        let zero = state_from(0.0, l + 4.0, 2000, |_| 0.0);
        assert!(certify_virtual_spreading(&snap(zero), cat, None).unwrap().is_none());
    }

    #[test]
    fn small_data_under_tadpole() {
        let cat = medium();
        let v = cat.v_star.as_ref().unwrap();
        let (g, h) = (-3.0, 2.0);
        let s = state_from(g, h, 500, |x| 0.9 * v.eval(x - h - 1.0));
        let c = certify_tadpole(&snap(s), cat).unwrap();
        assert_eq!(c.kind, CertificateKind::TadpoleDomination);
        let big = state_from(g, h, 500, |x| 0.9 * (std::f64::consts::PI * (x - g) / (h - g)).sin());
        assert!(certify_tadpole(&snap(big), cat).is_none());
    }

    #[test]
    fn width_certificate_requires_small_advection() {
        let cat = medium();
        let traj = FbpTrajectory {
            samples: vec![],
            snapshots: vec![],
            terminal: Terminal::ReachedTmax,
            final_state: state_from(0.0, 1.0, 10, |_| 0.0),
            level_m: 0.2,
        };
        assert!(matches!(certify_spreading_small_beta(&traj, cat), Err(Error::RegimeError(_))));
        assert!(matches!(log_shift_diagnostic(&traj, cat), Ok(v) if v.is_empty()));
    }

    #[test]
    fn reference_against_itself() {
        let cat = medium();
        let u = &cat.u_star;
        let s = state_from(-30.0, 0.0, 3000, |x| u.eval(x));
        let e = profile_error(&s, u, Frame::Front, 10.0, 0.2, false).unwrap();
        assert!(e < 1e-4, "{e}");
        let shifted = state_from(-30.0, 0.0, 3000, |x| u.eval(x + 0.3));
        let fixed = profile_error(&shifted, u, Frame::Front, 10.0, 0.2, false).unwrap();
        let fit = profile_fit(&shifted, u, Frame::Front, 10.0, 0.2, true).unwrap();
        assert!(fit.error <= fixed);
        assert!((fit.shift + 0.3).abs() < 0.02 && fit.error < 1e-3, "{fit:?}");
    }

    #[test]
    fn back_frame_fit_recovers_level_alignment() {
        let cat = medium();
        let q = cat.q_front.as_ref().unwrap();
        let s = state_from(-20.0, 40.0, 6000, |x| q.eval(x - 7.0));
        let fit = profile_fit(&s, q, Frame::Back, 10.0, 0.2, true).unwrap();
        assert!(fit.error < 1e-3, "{fit:?}");
    }

    fn line_traj(speed: f64, t_end: f64) -> FbpTrajectory {
        let samples: Vec<Sample> = (0..=(2.0 * t_end) as usize)
            .map(|k| {
                let t = 0.5 * k as f64;
                Sample { t, g: -1.0, h: 1.0 + speed * t, g_dot: 0.0, h_dot: speed, sup_u: 0.5, chi_m: Some(0.0) }
            })
            .collect();
        FbpTrajectory {
            samples,
            snapshots: vec![],
            terminal: Terminal::ReachedTmax,
            final_state: FbpState { t: t_end, ..state_from(-1.0, 1.0, 10, |_| 0.0) },
            level_m: 0.2,
        }
    }

    #[test]
    fn speed_of_a_line() {
        let traj = line_traj(0.7, 40.0);
        let fit = measure_speed(&traj, Side::Right, 0.5).unwrap();
        assert!((fit.speed - 0.7).abs() < 1e-12 && (fit.increment - 0.7).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-10 && fit.residual < 1e-10);
        assert!(fit.window.1 - fit.window.0 >= MIN_FIT_SPAN);
        let left = measure_speed(&traj, Side::Left, 0.5).unwrap();
        assert_eq!(left.increment, 0.0);
        let short = line_traj(0.7, 15.0);
        assert!(matches!(measure_speed(&short, Side::Right, 0.5), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn decay_proxy_needs_a_full_window() {
        let mut traj = line_traj(0.0, 30.0);
        for s in traj.samples.iter_mut() {
            s.sup_u = if s.t >= 12.0 { 1e-7 } else { 0.1 };
        }
        let c = certify_proxy(&traj).unwrap();
        assert_eq!(c.t, 22.0);
        for s in traj.samples.iter_mut().filter(|s| s.t > 25.0) {
            s.sup_u = 0.1;
        }
        for s in traj.samples.iter_mut().filter(|s| s.t < 20.0) {
            s.sup_u = 0.1;
        }
        assert!(certify_proxy(&traj).is_none());
    }

    #[test]
    fn verdict_classes_are_ordered() {
        assert!(Verdict::Vanishing.class() < Verdict::Undecided.class());
        assert!(Verdict::VirtualVanishing.class() < Verdict::VirtualSpreading.class());
        assert_eq!(Verdict::Spreading.class(), Verdict::VirtualSpreading.class());
    }
}
