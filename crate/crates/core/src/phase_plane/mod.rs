//! Phase-plane shooting for `q'' + gamma q' + f(q) = 0`, written as
//! `q' = p`, `p' = -gamma p - f(q)`.
//!
//! Every family is obtained by integrating from a fixed point (offset along
//! an exact eigenvector) or from a point `(0, -b/mu)` on the `p` axis, and is
//! then resampled on a uniform `dz` grid anchored at an event so that
//! profiles from different runs line up.

pub mod ode;
mod profile;

pub use profile::{ProfileHeader, Tail, WaveKind, WaveProfile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{minimal_speed, Nonlinearity};
use ode::{Crossing, EventFn, Options, State, Stop};

/// Numerical knobs shared by every shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingTolerances {
    pub q_tol: f64,
    pub ode_tol: f64,
    pub eps: f64,
    pub dz: f64,
}

impl Default for ShootingTolerances {
    fn default() -> Self {
        ShootingTolerances { q_tol: 1e-8, ode_tol: 1e-10, eps: 1e-8, dz: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseParams {
    pub gamma: f64,
    pub f: Nonlinearity,
    pub q_tol: f64,
    pub ode_tol: f64,
    /// Offset from a saddle along its eigenvector.
    pub eps: f64,
    /// Output grid spacing.
    pub dz: f64,
}

impl PhaseParams {
    pub fn new(f: Nonlinearity, gamma: f64) -> Self {
        Self::with_tolerances(f, gamma, ShootingTolerances::default())
    }

    pub fn with_tolerances(f: Nonlinearity, gamma: f64, tol: ShootingTolerances) -> Self {
        PhaseParams { gamma, f, q_tol: tol.q_tol, ode_tol: tol.ode_tol, eps: tol.eps, dz: tol.dz }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        PhaseParams { gamma, ..self.clone() }
    }

    pub fn c0(&self) -> f64 {
        minimal_speed(&self.f)
    }

    fn rhs(&self, dir: Direction) -> impl Fn(&State) -> State + '_ {
        let s = dir.sign();
        move |y: &State| [s * y[1], s * (-self.gamma * y[1] - self.f.eval(y[0]))]
    }

    fn options(&self) -> Options<'_> {
        Options { rtol: self.ode_tol, atol: 1e-20, ..Default::default() }
    }

    /// Eigenvalues `(lambda+, lambda-)` of the linearization at `(1, 0)`.
    pub fn saddle_eigenvalues(&self) -> (f64, f64) {
        let g = self.gamma;
        let d = (g * g - 4.0 * self.f.fprime1()).sqrt();
        ((-g + d) / 2.0, (-g - d) / 2.0)
    }

    /// Real eigenvalues `(lambda+, lambda-)` at the origin, when it is a node.
    pub fn origin_eigenvalues(&self) -> Option<(f64, f64)> {
        let g = self.gamma;
        let disc = g * g - 4.0 * self.f.fprime0();
        (disc >= 0.0).then(|| {
            let d = disc.sqrt();
            ((-g + d) / 2.0, (-g - d) / 2.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalEvent {
    QHitZero,
    QExceededBound,
    PSignChange,
    TailReached,
    /// The optional span limit was reached without any other event.
    SpanReached,
}

/// Which events stop an [`integrate`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootEvents {
    pub q_hits_zero: bool,
    pub q_upper: Option<f64>,
    pub p_sign_change: bool,
    pub tail_below: Option<f64>,
    pub max_span: f64,
}

impl Default for ShootEvents {
    fn default() -> Self {
        ShootEvents {
            q_hits_zero: true,
            q_upper: None,
            p_sign_change: false,
            tail_below: None,
            max_span: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `(z, q, p)` in integration order (monotone in `z`).
    pub points: Vec<(f64, f64, f64)>,
    pub terminal_event: TerminalEvent,
}

impl Trajectory {
    pub fn last(&self) -> (f64, f64, f64) {
        *self.points.last().unwrap()
    }
}

/// Integrate from `start` until the first requested event.
pub fn integrate(
    params: &PhaseParams,
    start: (f64, f64),
    direction: Direction,
    events: ShootEvents,
) -> Result<Trajectory> {
    if start.0 < -params.q_tol {
        return Err(Error::InvalidArgument(format!("start q = {} is negative", start.0)));
    }
    let mut fns = Vec::new();
    let mut kinds = Vec::new();
    if events.q_hits_zero {
        fns.push(EventFn::new(|y: &State| y[0], Crossing::Falling, true));
        kinds.push(TerminalEvent::QHitZero);
    }
    if let Some(bound) = events.q_upper {
        fns.push(EventFn::new(move |y: &State| y[0] - bound, Crossing::Rising, true));
        kinds.push(TerminalEvent::QExceededBound);
    }
    if events.p_sign_change {
        fns.push(EventFn::new(|y: &State| y[1], Crossing::Either, true));
        kinds.push(TerminalEvent::PSignChange);
    }
    if let Some(tol) = events.tail_below {
        fns.push(EventFn::new(move |y: &State| y[0] - tol, Crossing::Falling, true));
        kinds.push(TerminalEvent::TailReached);
    }
    let opts = Options { max_span: events.max_span, ..params.options() };
    let sol = ode::integrate(params.rhs(direction), [start.0, start.1], &opts, &fns)?;
    let s = direction.sign();
    let points = sol.taus.iter().zip(&sol.ys).map(|(t, y)| (s * t, y[0], y[1])).collect();
    let terminal_event = match sol.stop {
        Stop::Event(i) => kinds[i],
        Stop::Span => TerminalEvent::SpanReached,
    };
    Ok(Trajectory { points, terminal_event })
}

fn unit(v: (f64, f64)) -> (f64, f64) {
    let n = (v.0 * v.0 + v.1 * v.1).sqrt();
    (v.0 / n, v.1 / n)
}

/// `(1, lambda+)` normalized.
pub fn saddle_unstable_direction(params: &PhaseParams) -> (f64, f64) {
    unit((1.0, params.saddle_eigenvalues().0))
}

/// `(1, lambda-)` normalized.
pub fn saddle_stable_direction(params: &PhaseParams) -> (f64, f64) {
    unit((1.0, params.saddle_eigenvalues().1))
}

/// Result of the low-level shot: the polished terminal state plus any
/// anchor/head events along the way, and the grid samples when requested.
struct Shot {
    stop: Stop,
    tau_end: f64,
    end: State,
    anchor: Option<(f64, State)>,
    head: Option<(f64, State)>,
    samples: Vec<(f64, State)>,
}

/// Event indices used by [`shoot`].
const EV_Q_ZERO: usize = 0;
const EV_ESCAPE: usize = 1;
const EV_P_CROSS: usize = 2;
const EV_TAIL: usize = 3;
const EV_ANCHOR: usize = 4;
const EV_HEAD: usize = 5;

struct ShotSpec {
    start: State,
    dir: Direction,
    escape_above: f64,
    /// Terminal `p` crossing: `Falling` or `Rising`; `None` to ignore.
    p_cross: Option<Crossing>,
    tail: Option<f64>,
    anchor_level: Option<f64>,
    track_head: bool,
    node_cap: bool,
}

fn shoot(params: &PhaseParams, spec: &ShotSpec, outputs: Option<&[f64]>) -> Result<Shot> {
    let never = |_: &State| 1.0;
    let mut evs: Vec<EventFn> = vec![
        EventFn::new(|y: &State| y[0], Crossing::Falling, true),
        EventFn::new(move |y: &State| y[0] - spec.escape_above, Crossing::Rising, true),
    ];
    evs.push(match spec.p_cross {
        Some(c) => EventFn::new(|y: &State| y[1], c, true),
        None => EventFn::new(never, Crossing::Either, false),
    });
    evs.push(match spec.tail {
        Some(tol) => EventFn::new(move |y: &State| y[0] - tol, Crossing::Falling, true),
        None => EventFn::new(never, Crossing::Either, false),
    });
    evs.push(match spec.anchor_level {
        Some(level) => EventFn::new(move |y: &State| y[0] - level, Crossing::Either, false),
        None => EventFn::new(never, Crossing::Either, false),
    });
    evs.push(if spec.track_head {
        EventFn::new(|y: &State| y[1], Crossing::Either, false)
    } else {
        EventFn::new(never, Crossing::Either, false)
    });

    let mut opts = params.options();
    opts.max_span = 1e5;
    opts.outputs = outputs;
    if spec.node_cap {
        opts.step_cap = Some(Box::new(|y: &State| if y[0].abs() < 1e-4 { 1e-3 } else { f64::INFINITY }));
    }
    let sol = ode::integrate(params.rhs(spec.dir), spec.start, &opts, &evs)?;
    let first = |idx: usize| sol.hits.iter().find(|h| h.index == idx).map(|h| (h.tau, h.y));
    let (tau_end, end) = match sol.stop {
        Stop::Event(i) => {
            let h = sol.hits.iter().rev().find(|h| h.index == i).unwrap();
            (h.tau, h.y)
        }
        Stop::Span => (*sol.taus.last().unwrap(), *sol.ys.last().unwrap()),
    };
    let samples = if outputs.is_some() {
        sol.taus.iter().copied().zip(sol.ys.iter().copied()).collect()
    } else {
        Vec::new()
    };
    Ok(Shot { stop: sol.stop, tau_end, end, anchor: first(EV_ANCHOR), head: first(EV_HEAD), samples })
}

#[derive(Clone, Copy)]
enum Anchor {
    Start,
    End,
    Level,
}

impl Anchor {
    fn tau(self, shot: &Shot) -> Result<f64> {
        match self {
            Anchor::Start => Ok(0.0),
            Anchor::End => Ok(shot.tau_end),
            Anchor::Level => shot
                .anchor
                .map(|a| a.0)
                .ok_or_else(|| Error::ShootFailed("trajectory never reached the anchor level".into())),
        }
    }
}

/// Re-integrate with steps landing on the `dz` grid anchored at an event.
///
/// Grid-clipped steps are shorter than free ones, so event times move
/// slightly; the anchor is re-read from each pass until it is stable, which
/// keeps the samples consistent with the reported end point. Returns the final
/// shot and its samples as `(z, state)` sorted by `z`, with
/// `z = sign * (tau - tau_anchor)`.
fn resample(
    params: &PhaseParams,
    spec: &ShotSpec,
    first: Shot,
    anchor: Anchor,
) -> Result<(Shot, Vec<(f64, State)>)> {
    let dz = params.dz;
    let mut shot = first;
    let mut tau_a = anchor.tau(&shot)?;
    let mut grid_anchor = tau_a;
    for pass in 0..6 {
        grid_anchor = tau_a;
        let m_lo = (-grid_anchor / dz).ceil() as i64;
        let m_hi = ((shot.tau_end - grid_anchor) / dz).floor() as i64 + 1;
        let taus: Vec<f64> =
            (m_lo..=m_hi).map(|m| grid_anchor + m as f64 * dz).filter(|t| *t >= 0.0).collect();
        let next = shoot(params, spec, Some(&taus))?;
        if next.stop != shot.stop && !underflow_end(&next) {
            return Err(Error::ShootFailed(format!("grid re-integration ended on a different event ({:?} vs {:?}, end {:?})", next.stop, shot.stop, next.end)));
        }
        let new_a = anchor.tau(&next)?;
        shot = next;
        tau_a = new_a;
        if (new_a - grid_anchor).abs() <= 1e-12 * grid_anchor.abs().max(1.0) || pass == 5 {
            break;
        }
    }
    let s = spec.dir.sign();
    // Rounding noise near the saddle moves event times by ~1e-8 between
    // passes. An interior level anchor is honored by shifting the whole grid
    // by the residual offset; end anchors are pinned by the caller instead.
    let offset = match anchor {
        Anchor::Level => tau_a - grid_anchor,
        _ => 0.0,
    };
    let mut pts: Vec<(f64, State)> = shot
        .samples
        .iter()
        .filter(|(t, _)| *t <= shot.tau_end)
        .filter(|(t, _)| !matches!(anchor, Anchor::End) || *t <= grid_anchor + 1e-9)
        .map(|(t, y)| (s * (((t - grid_anchor) / dz).round() * dz - offset), *y))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Express the end point on the same z axis as the grid.
    shot.tau_end -= grid_anchor + offset;
    if let Some(a) = shot.anchor.as_mut() {
        a.0 -= grid_anchor + offset;
    }
    Ok((shot, pts))
}

/// A semi-wave that reached the origin to round-off: the turn of `p` and
/// the crossing of `q = 0` are indistinguishable.
fn underflow_end(shot: &Shot) -> bool {
    matches!(shot.stop, Stop::Event(EV_Q_ZERO) | Stop::Event(EV_P_CROSS) | Stop::Span)
        && shot.end[0].abs() < 1e-12
        && shot.end[1].abs() < 1e-12
}

/// Put `(z, y)` into the sorted samples, replacing a grid point at the same `z`.
fn pin(pts: &mut Vec<(f64, State)>, z: f64, y: State) {
    pts.retain(|p| (p.0 - z).abs() > 1e-9);
    let at = pts.partition_point(|p| p.0 < z);
    pts.insert(at, (z, y));
}

fn check_below_c0(params: &PhaseParams, what: &str) -> Result<()> {
    if params.gamma >= params.c0() {
        return Err(Error::InvalidArgument(format!(
            "{what} needs gamma < c0, got gamma = {} (c0 = {})",
            params.gamma,
            params.c0()
        )));
    }
    Ok(())
}

fn check_focus(params: &PhaseParams, what: &str) -> Result<()> {
    if params.gamma.abs() >= params.c0() {
        return Err(Error::InvalidArgument(format!(
            "{what} needs |gamma| < c0, got gamma = {}",
            params.gamma
        )));
    }
    Ok(())
}

fn check_node(params: &PhaseParams, what: &str) -> Result<()> {
    let c0 = params.c0();
    if params.gamma > -c0 + 1e-12 * c0 {
        return Err(Error::InvalidArgument(format!(
            "{what} needs gamma <= -c0, got gamma = {} (c0 = {c0})",
            params.gamma
        )));
    }
    Ok(())
}

/// Near-defective node: both origin eigenvalues close together.
fn needs_node_cap(params: &PhaseParams) -> bool {
    (params.gamma + params.c0()).abs() <= 0.1 * params.c0()
}

fn semiwave_start(params: &PhaseParams) -> State {
    let (dq, dp) = saddle_unstable_direction(params);
    [1.0 - params.eps * dq, -params.eps * dp]
}

fn semiwave_spec(params: &PhaseParams) -> ShotSpec {
    ShotSpec {
        start: semiwave_start(params),
        dir: Direction::Forward,
        escape_above: 1.0 + params.q_tol,
        p_cross: Some(Crossing::Rising),
        tail: None,
        anchor_level: None,
        track_head: false,
        node_cap: false,
    }
}

fn semiwave_shot(params: &PhaseParams) -> Result<Shot> {
    check_below_c0(params, "decreasing semi-wave")?;
    let mut shot = shoot(params, &semiwave_spec(params), None)?;
    match shot.stop {
        Stop::Event(EV_Q_ZERO) => Ok(shot),
        // Close to gamma = c0 the boundary slope underflows: the orbit reaches
        // the origin to round-off before it can cross q = 0.
        Stop::Event(EV_P_CROSS) if underflow_end(&shot) => {
            shot.end = [0.0, 0.0];
            Ok(shot)
        }
        Stop::Event(EV_ESCAPE) => Err(Error::ShootFailed("semi-wave trajectory rose above q = 1".into())),
        Stop::Event(EV_P_CROSS) => {
            Err(Error::ShootFailed("semi-wave trajectory turned before reaching q = 0".into()))
        }
        _ => Err(Error::ShootFailed(format!(
            "semi-wave trajectory did not reach q = 0 (gamma = {})",
            params.gamma
        ))),
    }
}

/// `U'(0; gamma)` without building the sampled profile.
pub fn semiwave_slope(params: &PhaseParams) -> Result<f64> {
    Ok(semiwave_shot(params)?.end[1])
}

/// `P(gamma) = -mu U'(0; gamma)`.
pub fn stefan_functional(params: &PhaseParams, mu: f64) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    Ok(0.0 - mu * semiwave_slope(params)?)
}

/// `U(z; gamma)` on `(-inf, 0]`, `U(0) = 0`, `U(-inf) = 1`.
pub fn decreasing_semiwave(params: &PhaseParams) -> Result<WaveProfile> {
    let first = semiwave_shot(params)?;
    let slope = first.end[1];
    let (_, mut pts) = resample(params, &semiwave_spec(params), first, Anchor::End)?;
    pin(&mut pts, 0.0, [0.0, slope]);
    let (lp, _) = params.saddle_eigenvalues();
    Ok(build(
        params,
        WaveKind::DecreasingSemiWave,
        pts,
        None,
        (f64::NEG_INFINITY, 0.0),
        Some(slope),
        None,
        Some(Tail { limit: 1.0, rate: lp }),
        None,
    ))
}

fn increasing_start(params: &PhaseParams) -> State {
    let (dq, dp) = saddle_stable_direction(params);
    [1.0 - params.eps * dq, -params.eps * dp]
}

fn increasing_spec(params: &PhaseParams) -> ShotSpec {
    ShotSpec {
        start: increasing_start(params),
        dir: Direction::Backward,
        escape_above: 1.0 + params.q_tol,
        p_cross: Some(Crossing::Falling),
        tail: None,
        anchor_level: None,
        track_head: false,
        node_cap: false,
    }
}

fn increasing_shot(params: &PhaseParams) -> Result<Shot> {
    if params.gamma <= -params.c0() {
        return Err(Error::InvalidArgument(format!(
            "increasing semi-wave needs gamma > -c0, got gamma = {}",
            params.gamma
        )));
    }
    let mut shot = shoot(params, &increasing_spec(params), None)?;
    if underflow_end(&shot) {
        shot.end = [0.0, 0.0];
    } else if shot.stop != Stop::Event(EV_Q_ZERO) {
        return Err(Error::ShootFailed(format!(
            "increasing semi-wave did not reach q = 0 (gamma = {})",
            params.gamma
        )));
    }
    Ok(shot)
}

/// `U_l'(0; gamma)` without building the sampled profile.
pub fn increasing_semiwave_slope(params: &PhaseParams) -> Result<f64> {
    Ok(increasing_shot(params)?.end[1])
}

/// `U_l(z; gamma)` on `[0, inf)`, `U_l(0) = 0`, `U_l(inf) = 1`.
pub fn increasing_semiwave(params: &PhaseParams) -> Result<WaveProfile> {
    let first = increasing_shot(params)?;
    let slope = first.end[1];
    let (_, mut pts) = resample(params, &increasing_spec(params), first, Anchor::End)?;
    pin(&mut pts, 0.0, [0.0, slope]);
    let (_, lm) = params.saddle_eigenvalues();
    Ok(build(
        params,
        WaveKind::IncreasingSemiWave,
        pts,
        None,
        (0.0, f64::INFINITY),
        Some(slope),
        None,
        None,
        Some(Tail { limit: 1.0, rate: -lm }),
    ))
}

/// `W(z; b, gamma)` on `[-L, 0]` with `-mu W'(0) = b`.
pub fn compact_bump(params: &PhaseParams, b: f64, mu: f64) -> Result<WaveProfile> {
    check_focus(params, "compact bump")?;
    if b <= 0.0 || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("need b > 0 and mu > 0, got b = {b}, mu = {mu}")));
    }
    let spec = ShotSpec {
        start: [0.0, -b / mu],
        dir: Direction::Backward,
        escape_above: 1.0,
        p_cross: None,
        tail: None,
        anchor_level: None,
        track_head: true,
        node_cap: false,
    };
    let not_in_s1 = Error::NotInS1 { b, gamma: params.gamma };
    let first = match shoot(params, &spec, None) {
        Err(Error::StepLimitExceeded { .. }) => return Err(not_in_s1),
        other => other?,
    };
    if first.stop != Stop::Event(EV_Q_ZERO) {
        return Err(not_in_s1);
    }
    let (shot, mut pts) = resample(params, &spec, first, Anchor::Start)?;
    let width = shot.tau_end;
    pin(&mut pts, -width, [0.0, shot.end[1]]);
    pin(&mut pts, 0.0, spec.start);
    let height = shot.head.map(|(_, y)| y[0]);
    let mut w = build(
        params,
        WaveKind::CompactBump,
        pts,
        Some(b),
        (-width, 0.0),
        Some(-b / mu),
        height,
        None,
        None,
    );
    w.width = Some(width);
    Ok(w)
}

/// Tadpole `V(z; b, gamma)` on `(-inf, 0]`, `gamma <= -c0`.
pub fn tadpole(params: &PhaseParams, b: f64, mu: f64) -> Result<WaveProfile> {
    check_node(params, "tadpole")?;
    if b <= 0.0 || mu <= 0.0 {
        return Err(Error::InvalidArgument(format!("need b > 0 and mu > 0, got b = {b}, mu = {mu}")));
    }
    let spec = ShotSpec {
        start: [0.0, -b / mu],
        dir: Direction::Backward,
        escape_above: 1.0,
        p_cross: None,
        tail: Some(params.q_tol),
        anchor_level: None,
        track_head: true,
        node_cap: needs_node_cap(params),
    };
    let not_in_s2 = Error::NotInS2 { b, gamma: params.gamma };
    let first = match shoot(params, &spec, None) {
        Err(Error::StepLimitExceeded { .. }) => return Err(not_in_s2),
        other => other?,
    };
    if first.stop != Stop::Event(EV_TAIL) {
        return Err(not_in_s2);
    }
    let (shot, mut pts) = resample(params, &spec, first, Anchor::Start)?;
    let head = shot.head.ok_or_else(|| not_in_s2.clone())?;
    // Past the head the profile must decay monotonically toward the origin.
    let head_z = -head.0;
    if pts.iter().any(|(z, y)| *z < head_z - params.dz && y[1] <= 0.0) {
        return Err(not_in_s2);
    }
    pin(&mut pts, 0.0, spec.start);
    let rate = params.origin_eigenvalues().map(|(_, lm)| lm).unwrap_or(params.c0() / 2.0);
    Ok(build(
        params,
        WaveKind::Tadpole,
        pts,
        Some(b),
        (f64::NEG_INFINITY, 0.0),
        Some(-b / mu),
        Some(head.1[0]),
        Some(Tail { limit: 0.0, rate }),
        None,
    ))
}

/// `Q(z; gamma)` on the line with `Q(0) = 1/2`, `gamma <= -c0`.
pub fn full_front(params: &PhaseParams) -> Result<WaveProfile> {
    check_node(params, "full front")?;
    let spec = ShotSpec {
        start: increasing_start(params),
        dir: Direction::Backward,
        escape_above: 1.0 + params.q_tol,
        p_cross: Some(Crossing::Falling),
        tail: Some(params.q_tol),
        anchor_level: Some(0.5),
        track_head: false,
        node_cap: needs_node_cap(params),
    };
    let first = shoot(params, &spec, None)?;
    if first.stop != Stop::Event(EV_TAIL) {
        return Err(Error::ShootFailed(format!(
            "front trajectory did not settle into the origin (gamma = {})",
            params.gamma
        )));
    }
    let (_, pts) = resample(params, &spec, first, Anchor::Level)?;
    let (_, lm1) = params.saddle_eigenvalues();
    let rate0 = params.origin_eigenvalues().map(|(_, lm)| lm).unwrap_or(params.c0() / 2.0);
    Ok(build(
        params,
        WaveKind::FullFront,
        pts,
        None,
        (f64::NEG_INFINITY, f64::INFINITY),
        None,
        None,
        Some(Tail { limit: 0.0, rate: rate0 }),
        Some(Tail { limit: 1.0, rate: -lm1 }),
    ))
}

#[allow(clippy::too_many_arguments)]
fn build(
    params: &PhaseParams,
    kind: WaveKind,
    pts: Vec<(f64, State)>,
    b: Option<f64>,
    support: (f64, f64),
    slope_at_zero: Option<f64>,
    height: Option<f64>,
    left_tail: Option<Tail>,
    right_tail: Option<Tail>,
) -> WaveProfile {
    let z: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let q: Vec<f64> = pts.iter().map(|p| p.1[0].max(0.0)).collect();
    let dq: Vec<f64> = pts.iter().map(|p| p.1[1]).collect();
    let grid_max = q.iter().cloned().fold(0.0, f64::max);
    WaveProfile {
        kind,
        gamma: params.gamma,
        b,
        dz: params.dz,
        z,
        q,
        dq,
        support,
        slope_at_zero,
        height: height.unwrap_or(grid_max).max(grid_max),
        width: None,
        left_tail,
        right_tail,
    }
}
