//! Acceptance criteria 1-12 against the logistic reaction, `mu = 1`.
//!
//! Runs as a plain binary so each criterion prints one line. Oracles are
//! computed here from closed forms or from raw trajectory data rather than
//! from the library's own summary statistics.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use stefan_kpp::classifier::{classify, profile_fit, Verdict};
use stefan_kpp::fbp_solver::{run, FbpState, FbpTrajectory, Frame, InitialData, Shape, SolverConfig};
use stefan_kpp::kinetics::make_logistic;
use stefan_kpp::phase_plane::{stefan_functional, WaveProfile};
use stefan_kpp::threshold::{find_threshold, transition_evidence, Target};
use stefan_kpp::verify::{medium_template, spreading_benchmark};
use stefan_kpp::wave_catalog::{
    beta_star, build_catalog, compact_delta_range, compact_wave_delta, rightward_semiwave_speed, ProblemParams,
    WaveCatalog,
};
use stefan_kpp::Result;

/// Regression fixture for the logistic `beta*`, recorded on first run.
const BETA_STAR_FIXTURE: f64 = 4.212946944854;

fn logistic(beta: f64) -> ProblemParams {
    ProblemParams::new(make_logistic(), 1.0, beta).expect("logistic params")
}

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) <= 0.0, "no sign change on [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Least-squares slope of `y` against `t`.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum::<f64>() / pts.iter().map(|p| (p.0 - tm).powi(2)).sum::<f64>()
}

fn final_half<T: Copy>(traj: &FbpTrajectory, pick: impl Fn(&stefan_kpp::fbp_solver::Sample) -> Option<T>) -> Vec<(f64, T)> {
    let t_end = traj.t_end();
    traj.samples.iter().filter(|s| s.t >= 0.5 * t_end).filter_map(|s| pick(s).map(|v| (s.t, v))).collect()
}

/// Sup-norm distance between `u(h + z)` and a shifted `U*(z + s)` on
/// `[-window, 0]`, minimized over `s` by a coarse scan and a fine scan.
fn front_distance(state: &FbpState, profile: &WaveProfile, window: f64) -> (f64, f64) {
    let err = |s: f64| -> f64 {
        (0..=1000)
            .map(|k| -window + window * k as f64 / 1000.0)
            .map(|z| (state.eval(state.h + z) - profile.eval(z + s)).abs())
            .fold(0.0, f64::max)
    };
    let mut best = (0.0, err(0.0));
    for k in -300..=300 {
        let s = 0.01 * k as f64;
        let e = err(s);
        if e < best.1 {
            best = (s, e);
        }
    }
    let centre = best.0;
    for k in -100..=100 {
        let s = centre + 1e-4 * k as f64;
        let e = err(s);
        if e < best.1 {
            best = (s, e);
        }
    }
    best
}

fn trailing_mean_h_dot(traj: &FbpTrajectory) -> f64 {
    let t_end = traj.t_end();
    let t1 = t_end - (t_end / 4.0).min(10.0);
    let v: Vec<f64> = traj.samples.iter().filter(|s| s.t >= t1).map(|s| s.h_dot).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

struct Shared {
    catalog: WaveCatalog,
    traj: FbpTrajectory,
}

fn spreading() -> Result<Shared> {
    let config = spreading_benchmark(1600)?;
    let catalog = build_catalog(&config.params)?;
    let traj = run(&config)?;
    Ok(Shared { catalog, traj })
}

type Outcome = Result<(bool, String)>;

fn c1() -> Outcome {
    let p0 = stefan_functional(&logistic(1.0).phase(0.0), 1.0)?;
    // sqrt(2 int_0^1 u(1-u) du) = sqrt(1/3); trapezoid rule on the
    // quadratic as a second route.
    let n = 100_000;
    let integral: f64 = (0..n)
        .map(|k| {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            0.5 * (a * (1.0 - a) + b * (1.0 - b)) / n as f64
        })
        .sum();
    let exact = (1.0f64 / 3.0).sqrt();
    let quad = (2.0 * integral).sqrt();
    Ok((
        (p0 - exact).abs() <= 1e-6 && (quad - exact).abs() <= 1e-9,
        format!("P(0) = {p0:.10}, quadrature {quad:.10}, exact {exact:.10}"),
    ))
}

fn c2() -> Outcome {
    let p = logistic(1.0);
    let ps: Vec<f64> =
        (0..20).map(|k| p.stefan(-6.0 + 7.9 * k as f64 / 19.0)).collect::<Result<_>>()?;
    let dec = ps.windows(2).all(|w| w[1] < w[0]);
    let near = p.stefan(1.99)?;
    Ok((dec && near < 0.03, format!("decreasing {dec}, P(1.99) = {near:.3e}")))
}

fn c3() -> Outcome {
    let p = logistic(1.0);
    let direct = p.stefan(-2.0)? + 2.0;
    let g = |b: f64| rightward_semiwave_speed(&p.with_beta(b)).expect("c*") - b + 2.0;
    let root = bisect_root(g, 2.5, 8.0);
    let lib = beta_star(&p)?;
    let ok = (direct - root).abs() <= 1e-6 && (lib - BETA_STAR_FIXTURE).abs() <= 1e-8;
    Ok((ok, format!("P(-2) + 2 = {direct:.10}, root {root:.10}, fixture {BETA_STAR_FIXTURE}")))
}

fn c4() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for beta in [0.5, 1.0, 2.0, 4.0] {
        let h = 1e-3;
        let up = rightward_semiwave_speed(&logistic(beta + h))?;
        let dn = rightward_semiwave_speed(&logistic(beta - h))?;
        let d = (up - dn) / (2.0 * h);
        ok &= d > 0.02 && d < 0.98;
        parts.push(format!("{beta}: {d:.4}"));
    }
    Ok((ok, format!("dc*/dbeta {}", parts.join(", "))))
}

fn c5(beta_m: f64) -> Outcome {
    let p = logistic(beta_m);
    let c_star = rightward_semiwave_speed(&p)?;
    let range = compact_delta_range(&p, c_star)?;
    let waves: Vec<WaveProfile> =
        [0.9, 0.99, 0.999].iter().map(|fr| compact_wave_delta(&p, fr * range)).collect::<Result<_>>()?;
    // Width and height read off the sampled profile, not the header.
    let ls: Vec<f64> = waves.iter().map(|w| w.z.last().unwrap() - w.z[0]).collect();
    let ds: Vec<f64> = waves.iter().map(|w| w.q.iter().cloned().fold(0.0, f64::max)).collect();
    let ok = ls.windows(2).all(|w| w[1] > w[0]) && ds.windows(2).all(|w| w[1] > w[0]) && ds[2] >= 0.99;
    Ok((ok, format!("L {ls:.4?}, D {ds:.5?}")))
}

fn c6(s: &Shared) -> Outcome {
    let verdict = classify(&s.traj, &s.catalog).verdict;
    let vh = slope(&final_half(&s.traj, |x| Some(x.h)));
    let vg = slope(&final_half(&s.traj, |x| Some(x.g)));
    let c = s.catalog.c_star;
    let cl = s.catalog.c_l_star.expect("c_l*");
    let (eh, eg) = ((vh - c).abs() / c, (vg - cl).abs() / cl.abs());
    Ok((
        verdict == Verdict::Spreading && eh <= 0.05 && eg <= 0.05,
        format!("{verdict:?}, h' {vh:.5} vs {c:.5}, g' {vg:.5} vs {cl:.5}"),
    ))
}

fn c7(s: &Shared) -> Outcome {
    let (shift, err) = front_distance(&s.traj.final_state, &s.catalog.u_star, 10.0);
    Ok((err <= 0.02, format!("sup error {err:.3e} at shift {shift:.4}")))
}

fn c8() -> Outcome {
    let mut t = SolverConfig::new(logistic(1.0), InitialData::new(0.5, Shape::Cosine, 1.0), 60.0);
    t.n_grid = 1000;
    let cat = build_catalog(&t.params)?;
    // One bisection level past the ladder bracket [s, 2s].
    let th = find_threshold(&t, &cat, Target::VanishToSpread, 0.34, 100.0, jobs())?;
    let ladder_hi = th.evaluations.iter().filter(|e| e.verdict.is_positive()).map(|e| e.sigma).fold(f64::INFINITY, f64::min);
    let mut below = t.clone();
    below.init.sigma = th.sigma_lo;
    let traj = run(&below)?;
    let verdict = classify(&traj, &cat).verdict;
    let width = traj.final_state.h - traj.final_state.g;
    let bound = 2.0 * PI / 3f64.sqrt() * 1.05;
    Ok((
        verdict == Verdict::Vanishing && width <= bound,
        format!("sigma {} (upper {ladder_hi}), {verdict:?}, h - g = {width:.4} vs {bound:.4}", th.sigma_lo),
    ))
}

fn c9() -> Outcome {
    let p = logistic(1.5 * BETA_STAR_FIXTURE);
    let cat = build_catalog(&p)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [1.0, 10.0] {
        let mut c = SolverConfig::new(p.clone(), InitialData::new(2.0, Shape::Cosine, sigma), 60.0);
        c.n_grid = 1000;
        let traj = run(&c)?;
        let verdict = classify(&traj, &cat).verdict;
        let hd = trailing_mean_h_dot(&traj);
        ok &= verdict == Verdict::Vanishing && hd < 1e-3;
        parts.push(format!("sigma {sigma}: {verdict:?}, h' {hd:.2e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn c10_11(beta_m: f64) -> (Outcome, Outcome) {
    let r = (|| -> Result<_> {
        let template = medium_template(beta_m)?;
        let cat = build_catalog(&template.params)?;
        let th = find_threshold(&template, &cat, Target::VanishToSpread, 1e-2, 100.0, jobs())?;

        let mut up = template.clone();
        up.init.sigma = 2.0 * th.sigma_hi;
        up.t_max = 100.0;
        up.n_grid = 2000;
        let upper = run(&up)?;
        let upper_verdict = classify(&upper, &cat).verdict;

        let mut down = template.clone();
        down.init.sigma = 0.5 * th.sigma_lo;
        let lower_verdict = classify(&run(&down)?, &cat).verdict;

        let mut mid = template.clone();
        mid.init.sigma = th.midpoint();
        mid.t_max = 2.0 * template.t_max;
        let ev = transition_evidence(&mid, &cat)?;
        Ok((cat, th, upper, upper_verdict, lower_verdict, ev))
    })();
    let (cat, th, upper, uv, lv, ev) = match r {
        Ok(x) => x,
        Err(e) => {
            let msg = e.to_string();
            return (Err(e), Err(stefan_kpp::Error::InsufficientData(msg)));
        }
    };
    let c = cat.c_star;
    let speed = slope(&final_half(&upper, |x| Some(x.h)));
    let es = (speed - c).abs() / c;
    let q = cat.q_front.as_ref().expect("Q in medium regime");
    let q_err = profile_fit(&upper.final_state, q, Frame::Back, 10.0, upper.level_m, true).map(|f| f.error);
    let q_err = q_err.unwrap_or(f64::NAN);
    let target = beta_m - 2.0;
    let hd_dev = (ev.h_dot_mean - target).abs() / target;
    let rel_w = (th.sigma_hi - th.sigma_lo) / th.sigma_hi;
    let ok10 = uv == Verdict::VirtualSpreading
        && es <= 0.05
        && q_err <= 0.05
        && lv == Verdict::Vanishing
        && hd_dev <= 0.10
        && ev.v_star_error <= 0.05
        && rel_w <= 1e-2;
    let d10 = format!(
        "bracket [{:.6}, {:.6}]; (a) {uv:?} speed {speed:.4} vs {c:.4}, Q {q_err:.2e}; (b) {lv:?}; \
         (c) h' {:.4} vs {target:.4}, V* {:.2e}",
        th.sigma_lo, th.sigma_hi, ev.h_dot_mean, ev.v_star_error
    );

    // chi_m(t) - (beta - c0) t - (3 / c0) ln t over the final half.
    let series: Vec<(f64, f64)> = final_half(&upper, |s| s.chi_m)
        .into_iter()
        .filter(|p| p.0 > 0.0)
        .map(|(t, chi)| (t, chi - target * t - 1.5 * t.ln()))
        .collect();
    let sl = slope(&series);
    let start = series[0].1;
    let min = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ok11 = sl >= -2e-3 && min >= start - 0.25;
    (Ok((ok10, d10)), Ok((ok11, format!("slope {sl:.2e}, min {min:.4}, start {start:.4}"))))
}

fn c12(s: &Shared) -> Outcome {
    let traj = &s.traj;
    let h0 = traj.snapshots[0].state.h;
    let mono = traj.samples.windows(2).all(|w| w[1].g <= w[0].g && w[1].h >= w[0].h);
    let drift = traj.samples.iter().all(|x| x.g + x.h > -2.0 * h0 - 0.05 * h0);

    let mut lo = spreading_benchmark(800)?;
    lo.t_max = 20.0;
    lo.snapshot_every = 5.0;
    let mut hi = lo.clone();
    lo.init.sigma = 0.5;
    let (a, b) = (run(&lo)?, run(&hi)?);
    let ordered = a.samples.iter().zip(&b.samples).all(|(x, y)| x.h <= y.h + 1e-3 && x.g >= y.g - 1e-3)
        && a.snapshots.iter().zip(&b.snapshots).all(|(x, y)| {
            (0..x.state.w.len()).all(|i| x.state.w[i] <= y.state.eval(x.state.x(i)) + 1e-3)
        });

    // Logistic ODE from 3: eta(t) = 3 / (3 - 2 e^{-t}).
    hi.init.sigma = 3.0;
    let c = run(&hi)?;
    let barrier = c.samples.iter().all(|x| x.sup_u <= 3.0 / (3.0 - 2.0 * (-x.t).exp()) + 1e-3);

    let fine = run(&spreading_benchmark(3200)?)?;
    let rel = (fine.final_state.h - traj.final_state.h).abs() / fine.final_state.h;
    Ok((
        mono && drift && ordered && barrier && rel <= 5e-3,
        format!("monotone {mono}, drift {drift}, comparison {ordered}, barrier {barrier}, refinement {:.3}%", 100.0 * rel),
    ))
}

fn report(id: u32, name: &str, start: Instant, out: Outcome, failed: &mut Vec<u32>) {
    let (ok, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !ok {
        failed.push(id);
    }
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] {id:>2} {name}: {detail} ({:.1} s)", start.elapsed().as_secs_f64());
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let beta_m = 2.0 + 0.5 * (BETA_STAR_FIXTURE - 2.0);

    let t = Instant::now();
    report(1, "wave oracle", t, c1(), &mut failed);
    let t = Instant::now();
    report(2, "Stefan functional shape", t, c2(), &mut failed);
    let t = Instant::now();
    report(3, "beta* double characterization", t, c3(), &mut failed);
    let t = Instant::now();
    report(4, "speed sensitivity", t, c4(), &mut failed);
    let t = Instant::now();
    report(5, "compact-wave limits", t, c5(beta_m), &mut failed);

    let t = Instant::now();
    let shared = spreading();
    match &shared {
        Ok(s) => {
            report(6, "spreading speed", t, c6(s), &mut failed);
            let t = Instant::now();
            report(7, "front profile", t, c7(s), &mut failed);
        }
        Err(e) => {
            report(6, "spreading speed", t, Err(stefan_kpp::Error::InsufficientData(e.to_string())), &mut failed);
            report(7, "front profile", t, Err(stefan_kpp::Error::InsufficientData(e.to_string())), &mut failed);
        }
    }
    let t = Instant::now();
    report(8, "vanishing width bound", t, c8(), &mut failed);
    let t = Instant::now();
    report(9, "large-advection vanishing", t, c9(), &mut failed);
    let t = Instant::now();
    let (r10, r11) = c10_11(beta_m);
    report(10, "medium-regime trichotomy", t, r10, &mut failed);
    report(11, "log-shift lower bound", t, r11, &mut failed);
    let t = Instant::now();
    let r12 = match &shared {
        Ok(s) => c12(s),
        Err(e) => Err(stefan_kpp::Error::InsufficientData(e.to_string())),
    };
    report(12, "solver properties", t, r12, &mut failed);

    if failed.is_empty() {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
