//! Speeds and named traveling waves for a fixed problem `(f, mu, beta)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinetics::{minimal_speed, Nonlinearity};
use crate::phase_plane::{
    compact_bump, decreasing_semiwave, full_front, increasing_semiwave, increasing_semiwave_slope,
    stefan_functional, tadpole, PhaseParams, ShootingTolerances, WaveProfile,
};

/// Width of the interval left around the degenerate endpoints of a bracket.
const BRACKET_GAP: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow.
const SPEED_TOL: f64 = 1e-11;
/// Declared tolerance of the `beta*` cross-check.
const BETA_STAR_CHECK: f64 = 1e-7;
/// `|beta - c0|` at or below this is the critical case.
pub const CRITICAL_TOL: f64 = 1e-9;
/// Default position of `delta` inside its admissible range for `W_delta`.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub f: Nonlinearity,
    pub mu: f64,
    pub beta: f64,
    #[serde(default)]
    pub tol: ShootingTolerances,
}

impl ProblemParams {
    pub fn new(f: Nonlinearity, mu: f64, beta: f64) -> Result<Self> {
        let p = ProblemParams { f, mu, beta, tol: ShootingTolerances::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.f.fprime0() > 0.0) {
            return Err(Error::InvalidArgument("f'(0) must be positive".into()));
        }
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        ProblemParams { beta, ..self.clone() }
    }

    pub fn c0(&self) -> f64 {
        minimal_speed(&self.f)
    }

    pub fn phase(&self, gamma: f64) -> PhaseParams {
        PhaseParams::with_tolerances(self.f.clone(), gamma, self.tol)
    }

    /// `P(gamma) = -mu U'(0; gamma)`.
    pub fn stefan(&self, gamma: f64) -> Result<f64> {
        stefan_functional(&self.phase(gamma), self.mu)
    }

    /// `-mu U_l'(0; gamma)`, which is negative.
    pub fn stefan_left(&self, gamma: f64) -> Result<f64> {
        Ok(0.0 - self.mu * increasing_semiwave_slope(&self.phase(gamma))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SmallAdvection,
    Critical,
    Medium,
    Large,
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub(crate) fn bisect(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (g(a)?, g(b)?);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::BracketFailed { lo, hi, f_lo: ga, f_hi: gb });
    }
    let sa = ga.signum();
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `c*(beta)`: the root of `P(c - beta) = c` on `(0, c0 + beta)`.
pub fn rightward_semiwave_speed(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    let hi = params.c0() + params.beta - BRACKET_GAP;
    bisect(|c| Ok(params.stefan(c - params.beta)? - c), BRACKET_GAP, hi, SPEED_TOL)
        .map_err(|e| e.context(format!("rightward semi-wave speed at beta = {}", params.beta)))
}

/// Central difference `(c*(beta + d) - c*(beta - d)) / (2d)`.
pub fn semiwave_speed_sensitivity(params: &ProblemParams, dbeta: f64) -> Result<f64> {
    if !(1e-4..=1e-2).contains(&dbeta) {
        return Err(Error::InvalidArgument(format!("dbeta must lie in [1e-4, 1e-2], got {dbeta}")));
    }
    if params.beta <= dbeta {
        return Err(Error::InvalidArgument("beta - dbeta must stay positive".into()));
    }
    let up = rightward_semiwave_speed(&params.with_beta(params.beta + dbeta))?;
    let down = rightward_semiwave_speed(&params.with_beta(params.beta - dbeta))?;
    Ok((up - down) / (2.0 * dbeta))
}

/// `beta* = P(-c0) + c0`, checked against `c*(beta*) = beta* - c0`.
pub fn beta_star(params: &ProblemParams) -> Result<f64> {
    let c0 = params.c0();
    let bs = params.stefan(-c0)? + c0;
    let c = rightward_semiwave_speed(&params.with_beta(bs))?;
    let gap = (c - (bs - c0)).abs();
    if gap > BETA_STAR_CHECK {
        return Err(Error::ConsistencyFailed(format!(
            "c*(beta*) = {c} differs from beta* - c0 = {} by {gap:e}",
            bs - c0
        )));
    }
    Ok(bs)
}

/// `c_l*(beta)`, the leftward semi-wave speed, for `beta < c0`.
pub fn leftward_semiwave_speed(params: &ProblemParams) -> Result<f64> {
    params.validate()?;
    let c0 = params.c0();
    if params.beta >= c0 {
        return Err(Error::RegimeError(format!(
            "leftward semi-wave speed needs beta < c0 = {c0}, got {}",
            params.beta
        )));
    }
    let lo = params.beta - c0 + BRACKET_GAP;
    bisect(|c| Ok(params.stefan_left(c - params.beta)? - c), lo, -BRACKET_GAP, SPEED_TOL)
        .map_err(|e| e.context(format!("leftward semi-wave speed at beta = {}", params.beta)))
}

/// `H* = pi / sqrt(c0^2 - beta^2)` for `beta < c0`.
pub fn critical_half_width(params: &ProblemParams) -> Result<f64> {
    let c0 = params.c0();
    if params.beta >= c0 {
        return Err(Error::RegimeError(format!("H* needs beta < c0, got beta = {}", params.beta)));
    }
    Ok(PI / (c0 * c0 - params.beta * params.beta).sqrt())
}

fn medium_range(params: &ProblemParams, what: &str) -> Result<f64> {
    let c0 = params.c0();
    if params.beta <= c0 + CRITICAL_TOL {
        return Err(Error::RegimeError(format!("{what} needs beta > c0 = {c0}, got {}", params.beta)));
    }
    Ok(c0)
}

/// `V*(z) = V(z; beta - c0, -c0)` for `c0 < beta < beta*`.
pub fn tadpole_star(params: &ProblemParams) -> Result<WaveProfile> {
    let c0 = medium_range(params, "V*")?;
    tadpole(&params.phase(-c0), params.beta - c0, params.mu)
}

/// `V_delta(z) = V(z; beta - c0 - delta, -c0 - delta)`, `0 < delta < beta - c0`.
pub fn tadpole_delta(params: &ProblemParams, delta: f64) -> Result<WaveProfile> {
    let c0 = medium_range(params, "V_delta")?;
    if !(delta > 0.0 && delta < params.beta - c0) {
        return Err(Error::RegimeError(format!(
            "delta = {delta} outside (0, beta - c0 = {})",
            params.beta - c0
        )));
    }
    tadpole(&params.phase(-c0 - delta), params.beta - c0 - delta, params.mu)
}

/// Upper end `c*(beta) - beta + c0` of the admissible `delta` range for `W_delta`.
pub fn compact_delta_range(params: &ProblemParams, c_star: f64) -> Result<f64> {
    let c0 = params.c0();
    if params.beta < c0 - CRITICAL_TOL {
        return Err(Error::RegimeError(format!("W_delta needs beta >= c0, got {}", params.beta)));
    }
    let range = c_star - params.beta + c0;
    if range <= 0.0 {
        return Err(Error::RegimeError(format!(
            "W_delta needs beta < beta*, got beta = {} (c* = {c_star})",
            params.beta
        )));
    }
    Ok(range)
}

/// `W_delta(z) = W(z; beta - c0 + delta, -c0 + delta)`, `0 < delta < c* - beta + c0`.
pub fn compact_wave_delta(params: &ProblemParams, delta: f64) -> Result<WaveProfile> {
    let c_star = rightward_semiwave_speed(params)?;
    compact_wave_delta_with(params, delta, c_star)
}

fn compact_wave_delta_with(params: &ProblemParams, delta: f64, c_star: f64) -> Result<WaveProfile> {
    let range = compact_delta_range(params, c_star)?;
    if !(delta > 0.0 && delta < range) {
        return Err(Error::RegimeError(format!("delta = {delta} outside (0, {range})")));
    }
    let c0 = params.c0();
    compact_bump(&params.phase(-c0 + delta), params.beta - c0 + delta, params.mu)
}

/// `W_delta` together with the `delta` it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactWave {
    pub delta: f64,
    pub delta_fraction: f64,
    pub profile: WaveProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveCatalog {
    pub params: ProblemParams,
    pub c0: f64,
    pub c_star: f64,
    pub beta_star: f64,
    pub regime: Regime,
    pub u_star: WaveProfile,
    pub c_l_star: Option<f64>,
    pub u_l_star: Option<WaveProfile>,
    pub h_star: Option<f64>,
    pub v_star: Option<WaveProfile>,
    pub q_front: Option<WaveProfile>,
    pub w_delta: Option<CompactWave>,
}

pub fn classify_regime(beta: f64, c0: f64, beta_star: f64) -> Regime {
    if (beta - c0).abs() <= CRITICAL_TOL {
        Regime::Critical
    } else if beta < c0 {
        Regime::SmallAdvection
    } else if beta < beta_star {
        Regime::Medium
    } else {
        Regime::Large
    }
}

/// Resolve every constant and profile that exists for these parameters.
pub fn build_catalog(params: &ProblemParams) -> Result<WaveCatalog> {
    params.validate()?;
    let ctx = |what: &'static str| move |e: Error| e.context(what);
    let c0 = params.c0();
    let c_star = rightward_semiwave_speed(params)?;
    let bs = beta_star(params).map_err(ctx("beta*"))?;
    let regime = classify_regime(params.beta, c0, bs);
    let u_star = decreasing_semiwave(&params.phase(c_star - params.beta)).map_err(ctx("U*"))?;

    let (c_l_star, u_l_star, h_star) = if regime == Regime::SmallAdvection {
        let cl = leftward_semiwave_speed(params)?;
        let ul = increasing_semiwave(&params.phase(cl - params.beta)).map_err(ctx("U_l*"))?;
        (Some(cl), Some(ul), Some(critical_half_width(params)?))
    } else {
        (None, None, None)
    };
    let v_star = match regime {
        Regime::Medium => Some(tadpole_star(params).map_err(ctx("V*"))?),
        _ => None,
    };
    let q_front = match regime {
        Regime::SmallAdvection => None,
        _ => Some(full_front(&params.phase(-c0)).map_err(ctx("Q"))?),
    };
    let w_delta = match regime {
        Regime::Critical | Regime::Medium => {
            let range = compact_delta_range(params, c_star)?;
            let delta = DEFAULT_DELTA_FRACTION * range;
            let profile = compact_wave_delta_with(params, delta, c_star).map_err(ctx("W_delta"))?;
            Some(CompactWave { delta, delta_fraction: DEFAULT_DELTA_FRACTION, profile })
        }
        _ => None,
    };
    Ok(WaveCatalog {
        params: params.clone(),
        c0,
        c_star,
        beta_star: bs,
        regime,
        u_star,
        c_l_star,
        u_l_star,
        h_star,
        v_star,
        q_front,
        w_delta,
    })
}

/// The catalog's JSON summary; profiles are referenced by file name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub c0: f64,
    pub c_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_l_star: Option<f64>,
    pub beta_star: f64,
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_delta: Option<f64>,
    pub mu: f64,
    pub beta: f64,
    pub nonlinearity: String,
    pub profiles: BTreeMap<String, String>,
}

impl WaveCatalog {
    /// Named profiles present in this catalog, in a fixed order.
    pub fn named_profiles(&self) -> Vec<(&'static str, &WaveProfile)> {
        let mut out = vec![("U_star", &self.u_star)];
        if let Some(p) = &self.u_l_star {
            out.push(("U_l_star", p));
        }
        if let Some(p) = &self.v_star {
            out.push(("V_star", p));
        }
        if let Some(p) = &self.q_front {
            out.push(("Q", p));
        }
        if let Some(w) = &self.w_delta {
            out.push(("W_delta", &w.profile));
        }
        out
    }

    pub fn summary(&self) -> CatalogSummary {
        CatalogSummary {
            c0: self.c0,
            c_star: self.c_star,
            c_l_star: self.c_l_star,
            beta_star: self.beta_star,
            regime: self.regime,
            h_star: self.h_star,
            w_delta: self.w_delta.as_ref().map(|w| w.delta),
            mu: self.params.mu,
            beta: self.params.beta,
            nonlinearity: self.params.f.key(),
            profiles: self
                .named_profiles()
                .into_iter()
                .map(|(name, _)| (name.to_string(), format!("{name}.csv")))
                .collect(),
        }
    }

    /// `|P(c* - beta) - c*|`.
    pub fn fixed_point_residual(&self) -> Result<f64> {
        Ok((self.params.stefan(self.c_star - self.params.beta)? - self.c_star).abs())
    }
}

/// Cache key: everything the catalog depends on.
pub fn catalog_key(params: &ProblemParams) -> String {
    let t = &params.tol;
    let text = format!(
        "catalog-v1|f={}|mu={:e}|beta={:e}|q_tol={:e}|ode_tol={:e}|eps={:e}|dz={:e}",
        params.f.key(),
        params.mu,
        params.beta,
        t.q_tol,
        t.ode_tol,
        t.eps,
        t.dz
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Content-addressed on-disk store of built catalogs.
#[derive(Debug, Clone)]
pub struct CatalogCache {
    pub dir: PathBuf,
}

impl CatalogCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CatalogCache { dir: dir.into() }
    }

    /// From `STEFAN_KPP_CACHE`, when set and non-empty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os("STEFAN_KPP_CACHE").filter(|v| !v.is_empty()).map(Self::new)
    }

    fn path(&self, params: &ProblemParams) -> PathBuf {
        self.dir.join(format!("{}.json", catalog_key(params)))
    }

    pub fn load(&self, params: &ProblemParams) -> Option<WaveCatalog> {
        let text = fs::read_to_string(self.path(params)).ok()?;
        let cat: WaveCatalog = serde_json::from_str(&text).ok()?;
        (cat.params == *params).then_some(cat)
    }

    pub fn store(&self, catalog: &WaveCatalog) -> Result<()> {
        let text = serde_json::to_vec(catalog)?;
        write_atomic(&self.path(&catalog.params), &text)
    }

    pub fn load_or_build(&self, params: &ProblemParams) -> Result<WaveCatalog> {
        if let Some(c) = self.load(params) {
            return Ok(c);
        }
        let cat = build_catalog(params)?;
        self.store(&cat)?;
        Ok(cat)
    }
}

/// Build through the environment cache when one is configured.
pub fn catalog_for(params: &ProblemParams) -> Result<WaveCatalog> {
    match CatalogCache::from_env() {
        Some(cache) => cache.load_or_build(params),
        None => build_catalog(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::make_logistic;

    fn logistic(beta: f64) -> ProblemParams {
        ProblemParams::new(make_logistic(), 1.0, beta).unwrap()
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(matches!(bisect(|x| Ok(x * x + 1.0), 0.0, 1.0, 1e-9), Err(Error::BracketFailed { .. })));
    }

    #[test]
    fn c_star_is_a_fixed_point() {
        for beta in [0.5, 1.0, 2.0, 4.0] {
            let p = logistic(beta);
            let c = rightward_semiwave_speed(&p).unwrap();
            assert!(c > 0.0 && c < 2.0 + beta);
            assert!((p.stefan(c - beta).unwrap() - c).abs() <= 1e-8);
        }
    }

    #[test]
    fn c_star_grows_with_mu() {
        let cs: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&mu| rightward_semiwave_speed(&ProblemParams::new(make_logistic(), mu, 1.0).unwrap()).unwrap())
            .collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2]);
    }

    #[test]
    fn sensitivity_in_unit_interval() {
        let p = logistic(1.0);
        let a = semiwave_speed_sensitivity(&p, 1e-3).unwrap();
        let b = semiwave_speed_sensitivity(&p, 1e-2).unwrap();
        assert!(a > 0.0 && a < 1.0);
        assert!((a - b).abs() < 1e-3);
        assert!(semiwave_speed_sensitivity(&p, 0.1).is_err());
    }

    #[test]
    fn beta_star_sign_test() {
        let p = logistic(1.0);
        let bs = beta_star(&p).unwrap();
        assert!(bs > 2.0);
        let at = |beta: f64| rightward_semiwave_speed(&p.with_beta(beta)).unwrap() - beta + 2.0;
        assert!(at(0.5 * (2.0 + bs)) > 0.0);
        assert!(at(1.5 * bs) < 0.0);
    }

    #[test]
    fn leftward_speed_range_and_symmetry() {
        let p = logistic(0.5);
        let cl = leftward_semiwave_speed(&p).unwrap();
        let c = rightward_semiwave_speed(&p).unwrap();
        assert!(cl > -1.5 && cl < 0.0);
        assert!(-cl < c);
        let small = logistic(1e-3);
        let cl = leftward_semiwave_speed(&small).unwrap();
        let c = rightward_semiwave_speed(&small).unwrap();
        assert!((cl.abs() - c).abs() < 1e-2);
        assert!(matches!(leftward_semiwave_speed(&logistic(2.5)), Err(Error::RegimeError(_))));
    }

    #[test]
    fn leftward_functional_mirrors_rightward() {
        let p = logistic(1.0);
        for g in [-1.5, -0.3, 0.0, 0.8] {
            let l = p.stefan_left(g).unwrap();
            let r = p.stefan(-g).unwrap();
            assert!((l + r).abs() < 1e-8, "gamma = {g}");
        }
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(0.5, 2.0, 4.2), Regime::SmallAdvection);
        assert_eq!(classify_regime(2.0 + 1e-10, 2.0, 4.2), Regime::Critical);
        assert_eq!(classify_regime(3.0, 2.0, 4.2), Regime::Medium);
        assert_eq!(classify_regime(4.2, 2.0, 4.2), Regime::Large);
    }

    #[test]
    fn tadpole_star_slope_is_imposed() {
        let p = logistic(1.0);
        let bs = beta_star(&p).unwrap();
        let m = p.with_beta(2.0 + 0.5 * (bs - 2.0));
        let v = tadpole_star(&m).unwrap();
        assert!(v.height < 1.0);
        assert!((-v.slope_at_zero.unwrap() - (m.beta - 2.0)).abs() < 1e-9);
        assert!(matches!(tadpole_star(&p.with_beta(1.2 * bs)), Err(Error::NotInS2 { .. })));
        assert!(matches!(tadpole_star(&p), Err(Error::RegimeError(_))));
    }

    #[test]
    fn tadpole_delta_converges_to_star() {
        let bs = beta_star(&logistic(1.0)).unwrap();
        let m = logistic(2.0 + 0.5 * (bs - 2.0));
        let star = tadpole_star(&m).unwrap();
        let near = tadpole_delta(&m, 1e-3).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=2000 {
            let z = -20.0 + 0.01 * k as f64;
            worst = worst.max((star.eval(z) - near.eval(z)).abs());
        }
        assert!(worst <= 1e-2, "sup distance {worst}");
        let half = tadpole_delta(&m, 0.5 * (m.beta - 2.0)).unwrap();
        assert!((-half.slope_at_zero.unwrap() - 0.5 * (m.beta - 2.0)).abs() < 1e-9);
        let tiny = tadpole_delta(&m, 0.999 * (m.beta - 2.0)).unwrap();
        assert!(tiny.height < 0.01);
    }

    #[test]
    fn catalog_contents_follow_regime() {
        let small = build_catalog(&logistic(0.5)).unwrap();
        assert_eq!(small.regime, Regime::SmallAdvection);
        assert!(small.u_l_star.is_some() && small.v_star.is_none() && small.q_front.is_none());
        assert!(small.fixed_point_residual().unwrap() <= 1e-8);

        let bs = small.beta_star;
        let medium = build_catalog(&logistic(2.0 + 0.5 * (bs - 2.0))).unwrap();
        assert_eq!(medium.regime, Regime::Medium);
        assert!(medium.v_star.is_some() && medium.q_front.is_some() && medium.w_delta.is_some());
        assert!(medium.c_l_star.is_none());

        let large = build_catalog(&logistic(2.0 * bs)).unwrap();
        assert_eq!(large.regime, Regime::Large);
        assert!(large.v_star.is_none() && large.w_delta.is_none());

        let critical = build_catalog(&logistic(2.0)).unwrap();
        assert_eq!(critical.regime, Regime::Critical);
        assert!(critical.v_star.is_none() && critical.w_delta.is_some());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CatalogCache::new(dir.path());
        let p = logistic(0.5);
        assert!(cache.load(&p).is_none());
        let built = cache.load_or_build(&p).unwrap();
        let loaded = cache.load(&p).unwrap();
        assert_eq!(built, loaded);
        assert_ne!(catalog_key(&p), catalog_key(&p.with_beta(0.6)));
    }
}
