//! Dormand-Prince 5(4) for autonomous planar systems, with Shampine's
//! dense output used to bracket event roots. Roots are then polished with
//! genuine RK steps so the reported state is an integrated one.

use crate::error::{Error, Result};

pub type State = [f64; 2];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One trial step: returns (y1, k7, error estimate vector, stages for dense output).
struct Trial {
    y1: State,
    k: [State; 7],
    err: State,
}

fn trial_step<F: Fn(&State) -> State>(rhs: &F, y0: &State, k1: &State, h: f64) -> Trial {
    let k2 = rhs(&axpy(y0, h, &[(A21, k1)]));
    let k3 = rhs(&axpy(y0, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(&axpy(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(&axpy(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(&axpy(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y1 = axpy(y0, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = rhs(&y1);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Trial { y1, k: [*k1, k2, k3, k4, k5, k6, k7], err }
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    pub tau0: f64,
    pub h: f64,
    rcont: [State; 5],
}

impl DenseStep {
    fn new(tau0: f64, h: f64, y0: &State, y1: &State, k: &[State; 7]) -> Self {
        let mut r = [[0.0; 2]; 5];
        for i in 0..2 {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y0[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        DenseStep { tau0, h, rcont: r }
    }

    pub fn eval(&self, tau: f64) -> State {
        let th = (tau - self.tau0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.rcont;
        let mut y = [0.0; 2];
        for i in 0..2 {
            y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

/// Which sign changes of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Falling,
    Rising,
    Either,
}

impl Crossing {
    fn matches(self, g0: f64, g1: f64) -> bool {
        match self {
            Crossing::Falling => g0 > 0.0 && g1 <= 0.0,
            Crossing::Rising => g0 < 0.0 && g1 >= 0.0,
            Crossing::Either => (g0 > 0.0 && g1 <= 0.0) || (g0 < 0.0 && g1 >= 0.0),
        }
    }
}

pub struct EventFn<'a> {
    pub g: Box<dyn Fn(&State) -> f64 + 'a>,
    pub crossing: Crossing,
    pub terminal: bool,
}

impl<'a> EventFn<'a> {
    pub fn new(g: impl Fn(&State) -> f64 + 'a, crossing: Crossing, terminal: bool) -> Self {
        EventFn { g: Box::new(g), crossing, terminal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit {
    pub index: usize,
    pub tau: f64,
    pub y: State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Event(usize),
    Span,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub taus: Vec<f64>,
    pub ys: Vec<State>,
    pub hits: Vec<EventHit>,
    pub stop: Stop,
    pub steps: usize,
}

pub struct Options<'a> {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub max_steps: usize,
    /// Integrate at most this far in `tau`.
    pub max_span: f64,
    /// State-dependent step cap.
    pub step_cap: Option<Box<dyn Fn(&State) -> f64 + 'a>>,
    /// When set, record exactly these `tau` values (increasing) instead of every step.
    pub outputs: Option<&'a [f64]>,
}

impl Default for Options<'_> {
    fn default() -> Self {
        Options {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            max_steps: 1_000_000,
            max_span: f64::INFINITY,
            step_cap: None,
            outputs: None,
        }
    }
}

/// Integrate `y' = rhs(y)` in `tau >= 0` from `y0` until a terminal event,
/// the span limit, or the step limit (an error).
pub fn integrate<F: Fn(&State) -> State>(
    rhs: F,
    y0: State,
    opts: &Options<'_>,
    events: &[EventFn<'_>],
) -> Result<Solution> {
    let mut tau = 0.0;
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut h = opts.h_init;
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(&y)).collect();
    let mut sol = Solution { taus: vec![], ys: vec![], hits: vec![], stop: Stop::Span, steps: 0 };
    let mut out_idx = 0usize;
    let outputs = opts.outputs.unwrap_or(&[]);
    let record_all = opts.outputs.is_none();
    if record_all {
        sol.taus.push(0.0);
        sol.ys.push(y);
    } else {
        while out_idx < outputs.len() && outputs[out_idx] <= 0.0 {
            sol.taus.push(outputs[out_idx]);
            sol.ys.push(y);
            out_idx += 1;
        }
        if out_idx == outputs.len() {
            return Ok(sol);
        }
    }
    let mut rejected = false;

    loop {
        if sol.steps >= opts.max_steps {
            return Err(Error::StepLimitExceeded { steps: sol.steps });
        }
        let mut h_try = h;
        if let Some(cap) = &opts.step_cap {
            h_try = h_try.min(cap(&y));
        }
        let mut lands_on_output = false;
        let mut lands_on_span = false;
        if !record_all && tau + h_try >= outputs[out_idx] {
            h_try = outputs[out_idx] - tau;
            lands_on_output = true;
        }
        if tau + h_try >= opts.max_span {
            h_try = opts.max_span - tau;
            lands_on_span = true;
            lands_on_output = lands_on_output && outputs.get(out_idx) == Some(&opts.max_span);
        }

        let trial = trial_step(&rhs, &y, &k1, h_try);
        // Componentwise scale from both step ends, so a small component
        // (such as the offset from a saddle) is still resolved relatively.
        let mut err = 0.0;
        for i in 0..2 {
            let sc = opts.atol + opts.rtol * y[i].abs().max(trial.y1[i].abs());
            err += (trial.err[i] / sc).powi(2);
        }
        let err = (err / 2.0).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            rejected = true;
            sol.steps += 1;
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
        sol.steps += 1;
        if err > 1.0 {
            h = h_try * fac.min(1.0);
            rejected = true;
            continue;
        }

        // Accepted: scan events.
        let y1 = trial.y1;
        let g_new: Vec<f64> = events.iter().map(|e| (e.g)(&y1)).collect();
        let dense = DenseStep::new(tau, h_try, &y, &y1, &trial.k);
        // Record every non-terminal hit in this step, and at most one terminal hit.
        let mut terminal_hit: Option<EventHit> = None;
        let mut step_hits: Vec<EventHit> = Vec::new();
        for (i, e) in events.iter().enumerate() {
            if e.crossing.matches(g_prev[i], g_new[i]) {
                let s = locate_root(&dense, &*e.g, g_prev[i], g_new[i]);
                let (s, ye) = polish(&rhs, &y, &k1, s, &*e.g, h_try);
                let hit = EventHit { index: i, tau: tau + s, y: ye };
                if e.terminal {
                    if terminal_hit.map_or(true, |t| hit.tau < t.tau) {
                        terminal_hit = Some(hit);
                    }
                } else {
                    step_hits.push(hit);
                }
            }
        }
        if let Some(t) = terminal_hit {
            step_hits.retain(|hh| hh.tau <= t.tau);
            sol.hits.extend(step_hits);
            if record_all {
                sol.taus.push(t.tau);
                sol.ys.push(t.y);
            }
            sol.hits.push(t);
            sol.stop = Stop::Event(t.index);
            return Ok(sol);
        }
        sol.hits.extend(step_hits);

        tau += h_try;
        y = y1;
        k1 = trial.k[6];
        g_prev = g_new;
        if record_all {
            sol.taus.push(tau);
            sol.ys.push(y);
        } else if lands_on_output {
            tau = outputs[out_idx];
            sol.taus.push(tau);
            sol.ys.push(y);
            out_idx += 1;
            if out_idx == outputs.len() {
                sol.stop = Stop::Span;
                return Ok(sol);
            }
        }
        if lands_on_span {
            sol.stop = Stop::Span;
            return Ok(sol);
        }
        let grow = if rejected { fac.min(1.0) } else { fac };
        rejected = false;
        // A step clipped to land on an output should not shrink the next one.
        h = (h_try * grow).max(if lands_on_output { h } else { 0.0 });
    }
}

/// Root of `g(dense(tau))` inside one step, as an offset from the step start.
fn locate_root(dense: &DenseStep, g: &dyn Fn(&State) -> f64, g0: f64, g1: f64) -> f64 {
    let (mut a, mut b) = (0.0, dense.h);
    let (mut fa, mut fb) = (g0, g1);
    if fb == 0.0 {
        return b;
    }
    // Illinois variant of regula falsi.
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(&dense.eval(dense.tau0 + c));
        if fc == 0.0 || (b - a).abs() < 1e-16 * dense.h.abs().max(1e-300) {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        if (b - a).abs() <= 1e-15 * dense.h.abs() {
            break;
        }
    }
    0.5 * (a + b)
}

/// Secant iteration on true RK step lengths from the step start.
fn polish<F: Fn(&State) -> State>(
    rhs: &F,
    y0: &State,
    k1: &State,
    s_guess: f64,
    g: &dyn Fn(&State) -> f64,
    h_max: f64,
) -> (f64, State) {
    let step = |s: f64| -> State {
        if s == 0.0 {
            *y0
        } else {
            trial_step(rhs, y0, k1, s).y1
        }
    };
    let mut s0 = s_guess;
    let y_s0 = step(s0);
    let mut g0 = g(&y_s0);
    if g0 == 0.0 {
        return (s0, y_s0);
    }
    let mut s1 = s_guess * (1.0 - 1e-7) + 1e-14 * h_max.abs();
    let mut g1 = g(&step(s1));
    let mut best = (g0.abs(), s0, y_s0);
    for _ in 0..30 {
        if g1 == g0 {
            break;
        }
        let s2 = (s1 - g1 * (s1 - s0) / (g1 - g0)).clamp(0.0, h_max * 1.5);
        let y2 = step(s2);
        let g2 = g(&y2);
        if g2.abs() < best.0 {
            best = (g2.abs(), s2, y2);
        }
        if g2 == 0.0 || (s2 - s1).abs() <= 1e-17 * h_max.abs().max(1.0) {
            break;
        }
        s0 = s1;
        g0 = g1;
        s1 = s2;
        g1 = g2;
    }
    (best.1, best.2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_accuracy() {
        // q'' + q = 0 from (1, 0): q = cos(t)
        let rhs = |y: &State| [y[1], -y[0]];
        let opts = Options { max_span: 10.0, ..Default::default() };
        let sol = integrate(rhs, [1.0, 0.0], &opts, &[]).unwrap();
        let t = *sol.taus.last().unwrap();
        assert_eq!(t, 10.0);
        let y = sol.ys.last().unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn event_is_polished() {
        let rhs = |y: &State| [y[1], -y[0]];
        let ev = [EventFn::new(|y: &State| y[0], Crossing::Falling, true)];
        let sol = integrate(rhs, [1.0, 0.0], &Options::default(), &ev).unwrap();
        assert_eq!(sol.stop, Stop::Event(0));
        let hit = sol.hits.last().unwrap();
        assert!(hit.y[0].abs() <= 1e-12);
        assert!((hit.tau - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn outputs_are_hit_exactly() {
        let rhs = |y: &State| [y[1], -y[0]];
        let outs: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
        let opts = Options { outputs: Some(&outs), ..Default::default() };
        let sol = integrate(rhs, [1.0, 0.0], &opts, &[]).unwrap();
        assert_eq!(sol.taus.len(), outs.len());
        for (t, y) in sol.taus.iter().zip(&sol.ys) {
            assert!((y[0] - t.cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_output_interpolates() {
        let rhs = |y: &State| [y[1], -y[0]];
        let k1 = rhs(&[1.0, 0.0]);
        let h = 0.1;
        let tr = trial_step(&rhs, &[1.0, 0.0], &k1, h);
        let d = DenseStep::new(0.0, h, &[1.0, 0.0], &tr.y1, &tr.k);
        for i in 0..=10 {
            let t = h * i as f64 / 10.0;
            let e = (d.eval(t)[0] - t.cos()).abs();
            assert!(e < 1e-8, "t = {t}: error {e}");
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let rhs = |y: &State| [y[1], -y[0] * (1.0 - y[0])];
        let opts = Options { max_span: 50.0, ..Default::default() };
        for start in [[0.0, 0.0], [1.0, 0.0]] {
            let sol = integrate(rhs, start, &opts, &[]).unwrap();
            assert_eq!(*sol.ys.last().unwrap(), start);
        }
    }
}
