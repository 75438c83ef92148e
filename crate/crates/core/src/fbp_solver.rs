//! Front-fixing finite differences for the two-sided Stefan problem.
//!
//! With `x = g + xi (h - g)` the moving interval becomes `xi in [0, 1]` and
//!
//! ```text
//! w_t = w_xixi / L^2 + (g' + xi (h' - g') - beta) w_xi / L + f(w),   L = h - g,
//! ```
//!
//! which is advanced with implicit diffusion and explicit advection and
//! reaction. The Stefan velocities are lagged by one step.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::truncate;
use crate::wave_catalog::ProblemParams;

/// Steps taken with the reduced startup step.
const STARTUP_STEPS: u64 = 100;
/// Startup step as a fraction of `dt_max`.
const STARTUP_FACTOR: f64 = 0.01;
/// Runs end once `sup u` falls below this.
pub const SUP_FLOOR: f64 = 1e-10;
/// Runs end once `h - g` exceeds this.
pub const WIDTH_CAP: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `cos(pi x / (2 h0))`
    Cosine,
    /// `(1 - (x/h0)^2)^2`
    Quartic,
    /// Linear interpolation through `(x, u)` pairs; endpoints forced to zero.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub h0: f64,
    pub shape: Shape,
    pub sigma: f64,
}

impl InitialData {
    pub fn new(h0: f64, shape: Shape, sigma: f64) -> Self {
        InitialData { h0, shape, sigma }
    }

    /// The unscaled shape `phi(x)` on `[-h0, h0]`, zero outside.
    pub fn phi(&self, x: f64) -> f64 {
        let h0 = self.h0;
        if x.abs() >= h0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Cosine => (FRAC_PI_2 * x / h0).cos(),
            Shape::Quartic => {
                let s = 1.0 - (x / h0).powi(2);
                s * s
            }
            Shape::Table(pts) => {
                let i = pts.partition_point(|p| p.0 <= x);
                if i == 0 || i == pts.len() {
                    return 0.0;
                }
                let (x0, u0) = pts[i - 1];
                let (x1, u1) = pts[i];
                let u0 = if i - 1 == 0 { 0.0 } else { u0 };
                let u1 = if i == pts.len() - 1 { 0.0 } else { u1 };
                if x1 == x0 {
                    u1
                } else {
                    u0 + (u1 - u0) * (x - x0) / (x1 - x0)
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sigma * self.phi(x)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(Error::InvalidInitialData(format!("h0 must be positive, got {}", self.h0)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInitialData(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Shape::Table(pts) = &self.shape {
            if pts.len() < 3 {
                return Err(Error::InvalidInitialData("table needs at least 3 points".into()));
            }
            if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidInitialData("table x values must increase".into()));
            }
            let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
            if (first + self.h0).abs() > 1e-12 || (last - self.h0).abs() > 1e-12 {
                return Err(Error::InvalidInitialData(format!(
                    "table must span [-h0, h0] = [{}, {}], got [{first}, {last}]",
                    -self.h0, self.h0
                )));
            }
            if let Some(p) = pts.iter().find(|p| p.1 < 0.0 || !p.1.is_finite()) {
                return Err(Error::InvalidInitialData(format!("negative value {} at x = {}", p.1, p.0)));
            }
            if pts[1..pts.len() - 1].iter().all(|p| p.1 == 0.0) {
                return Err(Error::InvalidInitialData("table is identically zero".into()));
            }
        }
        Ok(())
    }

    /// `sup sigma phi`.
    pub fn sup(&self) -> f64 {
        let peak = match &self.shape {
            Shape::Cosine | Shape::Quartic => 1.0,
            Shape::Table(pts) => pts[1..pts.len() - 1].iter().map(|p| p.1).fold(0.0, f64::max),
        };
        self.sigma * peak
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: ProblemParams,
    pub init: InitialData,
    pub n_grid: usize,
    pub dt_max: f64,
    pub cfl: f64,
    pub t_max: f64,
    pub record_every: f64,
    pub snapshot_every: f64,
    pub level_m: f64,
}

impl SolverConfig {
    pub fn new(params: ProblemParams, init: InitialData, t_max: f64) -> Self {
        SolverConfig {
            params,
            init,
            n_grid: 1000,
            dt_max: 1e-3,
            cfl: 0.5,
            t_max,
            record_every: 0.5,
            snapshot_every: 10.0,
            level_m: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.init.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_grid < 100 {
            return bad(format!("n_grid must be >= 100, got {}", self.n_grid));
        }
        if !(self.t_max > 0.0) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.dt_max > 0.0) {
            return bad(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.record_every > 0.0) || !(self.snapshot_every > 0.0) {
            return bad("record_every and snapshot_every must be positive".into());
        }
        if !(self.level_m > 0.0 && self.level_m < 1.0) {
            return bad(format!("level_m must lie in (0, 1), got {}", self.level_m));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbpState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    /// `u` at `xi_i = i / (n + 1)`, `i = 0..=n+1`.
    pub w: Vec<f64>,
    pub g_dot: f64,
    pub h_dot: f64,
    pub steps: u64,
    /// Total mass of negative undershoots removed so far.
    pub clipped: f64,
}

impl FbpState {
    pub fn width(&self) -> f64 {
        self.h - self.g
    }

    pub fn dxi(&self) -> f64 {
        1.0 / (self.w.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.g + i as f64 * self.dxi() * self.width()
    }

    pub fn sup(&self) -> f64 {
        self.w.iter().cloned().fold(0.0, f64::max)
    }

    /// `u(t, x)` by linear interpolation, zero outside `[g, h]`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.g || x >= self.h {
            return 0.0;
        }
        let s = (x - self.g) / self.width() / self.dxi();
        let i = (s.floor() as usize).min(self.w.len() - 2);
        let th = s - i as f64;
        self.w[i] * (1.0 - th) + self.w[i + 1] * th
    }

    /// Leftmost `x` with `u(t, x) = level`, by linear interpolation.
    pub fn level_point(&self, level: f64) -> Option<f64> {
        let i = self.w.iter().position(|&v| v >= level)?;
        if i == 0 {
            return Some(self.g);
        }
        let (a, b) = (self.w[i - 1], self.w[i]);
        let th = (level - a) / (b - a);
        Some(self.x(i - 1) + th * (self.x(i) - self.x(i - 1)))
    }

    /// Second-order one-sided Stefan velocities `(g', h')`.
    fn stefan_velocities(&self, mu: f64) -> (f64, f64) {
        let n = self.w.len() - 1;
        let scale = mu / (2.0 * self.width() * self.dxi());
        let h_dot = scale * (4.0 * self.w[n - 1] - self.w[n - 2]);
        let g_dot = -scale * (4.0 * self.w[1] - self.w[2]);
        // The continuous velocities have fixed signs; round-off must not
        // make a boundary retreat.
        (g_dot.min(0.0), h_dot.max(0.0))
    }
}

pub fn init_state(config: &SolverConfig) -> Result<FbpState> {
    config.validate()?;
    let n = config.n_grid;
    let h0 = config.init.h0;
    let mut w: Vec<f64> = (0..n + 2)
        .map(|i| config.init.eval(-h0 + 2.0 * h0 * i as f64 / (n + 1) as f64))
        .collect();
    w[0] = 0.0;
    w[n + 1] = 0.0;
    if config.init.sigma > 0.0 && w.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInitialData("initial data vanish on the grid".into()));
    }
    let mut s = FbpState { t: 0.0, g: -h0, h: h0, w, g_dot: 0.0, h_dot: 0.0, steps: 0, clipped: 0.0 };
    let (gd, hd) = s.stefan_velocities(config.params.mu);
    s.g_dot = gd;
    s.h_dot = hd;
    Ok(s)
}

/// Reusable buffers for the tridiagonal solve.
#[derive(Debug, Default, Clone)]
struct Work {
    rhs: Vec<f64>,
    cp: Vec<f64>,
}

/// Stepper bound to one configuration.
pub struct Solver<'a> {
    pub config: &'a SolverConfig,
    blowup: f64,
    work: Work,
}

impl<'a> Solver<'a> {
    pub fn new(config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        let cap = truncate(&config.params.f, config.init.sup()).cap;
        Ok(Solver { config, blowup: 10.0 * cap, work: Work::default() })
    }

    /// Time step the scheme would take from `state`, before clamping to
    /// output times.
    pub fn natural_dt(&self, state: &FbpState) -> f64 {
        let c = self.config;
        let adv = state.g_dot.abs().max(state.h_dot.abs()) + c.params.beta;
        let mut dt = c.dt_max.min(0.1 / c.params.f.fprime0());
        if adv > 0.0 {
            dt = dt.min(c.cfl * state.dxi() * state.width() / adv);
        }
        if state.steps < STARTUP_STEPS {
            dt = dt.min(STARTUP_FACTOR * c.dt_max);
        }
        dt
    }

    /// Advance by `dt`.
    pub fn step_by(&mut self, state: &mut FbpState, dt: f64) -> Result<()> {
        let c = self.config;
        let f = &c.params.f;
        let n = state.w.len() - 2;
        let dxi = state.dxi();
        let l = state.width();
        let (gd, hd) = (state.g_dot, state.h_dot);

        self.work.rhs.resize(n + 2, 0.0);
        self.work.cp.resize(n + 2, 0.0);
        let w = &state.w;
        let rhs = &mut self.work.rhs;
        for i in 1..=n {
            let xi = i as f64 * dxi;
            let a = (gd + xi * (hd - gd) - c.params.beta) / l;
            let wx = (w[i + 1] - w[i - 1]) / (2.0 * dxi);
            rhs[i] = w[i] + dt * (a * wx + f.eval(w[i]));
        }
        // (1 + 2r) w_i - r (w_{i-1} + w_{i+1}) = rhs_i with w_0 = w_{n+1} = 0.
        let r = dt / (l * l * dxi * dxi);
        let diag = 1.0 + 2.0 * r;
        let cp = &mut self.work.cp;
        let mut denom = diag;
        cp[1] = -r / denom;
        rhs[1] /= denom;
        for i in 2..=n {
            denom = diag + r * cp[i - 1];
            cp[i] = -r / denom;
            rhs[i] = (rhs[i] + r * rhs[i - 1]) / denom;
        }
        let w = &mut state.w;
        w[n] = rhs[n];
        for i in (1..n).rev() {
            w[i] = rhs[i] - cp[i] * w[i + 1];
        }
        w[0] = 0.0;
        w[n + 1] = 0.0;

        let mut sup: f64 = 0.0;
        for v in w.iter_mut() {
            if *v < 0.0 {
                state.clipped += -*v;
                *v = 0.0;
            }
            sup = sup.max(*v);
        }
        if !(sup <= self.blowup) {
            return Err(Error::NumericalBlowup { t: state.t + dt, sup });
        }

        state.g += dt * gd;
        state.h += dt * hd;
        state.t += dt;
        state.steps += 1;
        let (g_dot, h_dot) = state.stefan_velocities(c.params.mu);
        state.g_dot = g_dot;
        state.h_dot = h_dot;
        Ok(())
    }
}

/// One step of the scheme at its natural step size.
pub fn step(state: &FbpState, config: &SolverConfig) -> Result<FbpState> {
    let mut solver = Solver::new(config)?;
    let mut next = state.clone();
    let dt = solver.natural_dt(state);
    solver.step_by(&mut next, dt)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub g_dot: f64,
    pub h_dot: f64,
    pub sup_u: f64,
    pub chi_m: Option<f64>,
}

/// A full copy of `u` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub state: FbpState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    ReachedTmax,
    SupBelowFloor,
    WidthAboveCap,
    /// A monitor asked the run to stop.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbpTrajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub terminal: Terminal,
    pub final_state: FbpState,
    pub level_m: f64,
}

impl FbpTrajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn t_end(&self) -> f64 {
        self.final_state.t
    }

    /// Trajectory CSV with columns `t,g,h,g_dot,h_dot,sup_u,chi_m`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,g,h,g_dot,h_dot,sup_u,chi_m\n");
        for p in &self.samples {
            let chi = p.chi_m.map(|c| format!("{c:.12e}")).unwrap_or_default();
            s.push_str(&format!(
                "{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{chi}\n",
                p.t, p.g, p.h, p.g_dot, p.h_dot, p.sup_u
            ));
        }
        s
    }
}

impl Snapshot {
    /// Snapshot CSV with columns `x,u`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u\n");
        for (i, u) in self.state.w.iter().enumerate() {
            s.push_str(&format!("{:.12e},{:.12e}\n", self.state.x(i), u));
        }
        s
    }
}

/// What a monitor wants after seeing a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn sample_of(state: &FbpState, level_m: f64) -> Sample {
    Sample {
        t: state.t,
        g: state.g,
        h: state.h,
        g_dot: state.g_dot,
        h_dot: state.h_dot,
        sup_u: state.sup(),
        chi_m: state.level_point(level_m),
    }
}

pub fn run(config: &SolverConfig) -> Result<FbpTrajectory> {
    run_with_monitor(config, |_, _| Control::Continue)
}

/// Run to a terminal condition, calling `monitor` at every recorded sample.
pub fn run_with_monitor(
    config: &SolverConfig,
    mut monitor: impl FnMut(&Sample, &FbpState) -> Control,
) -> Result<FbpTrajectory> {
    let mut solver = Solver::new(config)?;
    let mut state = init_state(config)?;
    let mut samples = vec![sample_of(&state, config.level_m)];
    let mut snapshots = vec![Snapshot { t: 0.0, state: state.clone() }];
    let mut k_rec: u64 = 1;
    let snap_stride = ((config.snapshot_every / config.record_every).round() as u64).max(1);

    let finish = |state: FbpState, mut samples: Vec<Sample>, mut snapshots: Vec<Snapshot>, terminal| {
        if samples.last().map(|s| s.t) != Some(state.t) {
            samples.push(sample_of(&state, config.level_m));
        }
        if snapshots.last().map(|s| s.t) != Some(state.t) {
            snapshots.push(Snapshot { t: state.t, state: state.clone() });
        }
        FbpTrajectory { samples, snapshots, terminal, final_state: state, level_m: config.level_m }
    };

    if samples[0].sup_u < SUP_FLOOR {
        return Ok(finish(state, samples, snapshots, Terminal::SupBelowFloor));
    }
    loop {
        let t_rec = (k_rec as f64 * config.record_every).min(config.t_max);
        let mut dt = solver.natural_dt(&state);
        let mut lands = false;
        if state.t + dt >= t_rec - 1e-12 {
            dt = t_rec - state.t;
            lands = true;
        }
        solver
            .step_by(&mut state, dt)
            .map_err(|e| e.context(format!("solver step at t = {:.6}", state.t)))?;
        if lands {
            state.t = t_rec;
            let s = sample_of(&state, config.level_m);
            samples.push(s);
            if k_rec % snap_stride == 0 {
                snapshots.push(Snapshot { t: state.t, state: state.clone() });
            }
            k_rec += 1;
            if state.t >= config.t_max {
                return Ok(finish(state, samples, snapshots, Terminal::ReachedTmax));
            }
            if monitor(&s, &state) == Control::Stop {
                return Ok(finish(state, samples, snapshots, Terminal::Stopped));
            }
        }
        let sup = state.sup();
        if sup < SUP_FLOOR {
            return Ok(finish(state, samples, snapshots, Terminal::SupBelowFloor));
        }
        if state.width() > WIDTH_CAP {
            return Ok(finish(state, samples, snapshots, Terminal::WidthAboveCap));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Coordinates `z = x - h(t)` on `[-Z, 0]`.
    Front,
    /// Coordinates `z = x - chi_m(t)` on `[-Z, Z]`.
    Back,
    /// Coordinates `z = x - g(t)` on `[0, Z]`.
    Rear,
}

/// Grid spacing of extracted profiles.
pub const PROFILE_DZ: f64 = 0.01;

/// `u(t, . + h(t))` or `u(t, . + chi_m(t))` on the frame window, resampled
/// to spacing `PROFILE_DZ`.
pub fn extract_profile(state: &FbpState, frame: Frame, window: f64, level_m: f64) -> Result<Vec<(f64, f64)>> {
    let (origin, lo, hi) = match frame {
        Frame::Front => (state.h, -window, 0.0),
        Frame::Back => {
            let chi = state.level_point(level_m).ok_or_else(|| {
                Error::InsufficientData(format!("u never reaches level {level_m}"))
            })?;
            (chi, -window, window)
        }
        Frame::Rear => (state.g, 0.0, window),
    };
    let (xl, xr) = (origin + lo, origin + hi);
    let slack = 1e-9 * state.width().max(1.0);
    if xl < state.g - slack || xr > state.h + slack {
        return Err(Error::WindowExceedsDomain { lo: xl, hi: xr, g: state.g, h: state.h });
    }
    let n = ((hi - lo) / PROFILE_DZ).round() as usize;
    Ok((0..=n)
        .map(|k| {
            let z = lo + k as f64 * PROFILE_DZ;
            (z, state.eval(origin + z))
        })
        .collect())
}
