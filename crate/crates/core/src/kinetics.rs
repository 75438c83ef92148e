//! Monostable (KPP) reaction terms.
//!
//! A [`Nonlinearity`] is always polynomial so that `f` and `f'` are exact;
//! the shooting loop evaluates both millions of times.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance used when checking `f(0) = f(1) = 0` for coefficient tables.
const ZERO_TOL: f64 = 1e-12;

/// Which reaction term to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `u(1-u)`
    Logistic,
    /// `u(1-u)(1+a u)/(1+a)`, KPP-valid for `a` in `[0, 1]`.
    LogisticFamily { a: f64 },
    /// `sum_k coeffs[k] u^k`
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub spec: NonlinearitySpec,
    /// Overall multiplier `kappa` in `kappa * f(u)`.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Nonlinearity {
    pub fn new(spec: NonlinearitySpec) -> Self {
        Nonlinearity { spec, scale: 1.0 }
    }

    pub fn scaled(mut self, kappa: f64) -> Self {
        self.scale *= kappa;
        self
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let base = match &self.spec {
            NonlinearitySpec::Logistic => u * (1.0 - u),
            NonlinearitySpec::LogisticFamily { a } => u * (1.0 - u) * (1.0 + a * u) / (1.0 + a),
            NonlinearitySpec::Polynomial { coeffs } => horner(coeffs, u),
        };
        self.scale * base
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        let base = match &self.spec {
            NonlinearitySpec::Logistic => 1.0 - 2.0 * u,
            NonlinearitySpec::LogisticFamily { a } => {
                ((1.0 - 2.0 * u) * (1.0 + a * u) + a * u * (1.0 - u)) / (1.0 + a)
            }
            NonlinearitySpec::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * u + (k as f64) * c;
                }
                acc
            }
        };
        self.scale * base
    }

    pub fn fprime0(&self) -> f64 {
        self.deriv(0.0)
    }

    pub fn fprime1(&self) -> f64 {
        self.deriv(1.0)
    }

    /// Stable identifier used in cache keys and manifests.
    pub fn key(&self) -> String {
        let base = match &self.spec {
            NonlinearitySpec::Logistic => "logistic".to_string(),
            NonlinearitySpec::LogisticFamily { a } => format!("logistic_family(a={a:e})"),
            NonlinearitySpec::Polynomial { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|c| format!("{c:e}")).collect();
                format!("polynomial[{}]", c.join(","))
            }
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

pub fn make_logistic() -> Nonlinearity {
    Nonlinearity::new(NonlinearitySpec::Logistic)
}

pub fn make_logistic_family(a: f64) -> Nonlinearity {
    Nonlinearity::new(NonlinearitySpec::LogisticFamily { a })
}

pub fn make_polynomial(coeffs: Vec<f64>) -> Nonlinearity {
    Nonlinearity::new(NonlinearitySpec::Polynomial { coeffs })
}

/// `c0 = 2 sqrt(f'(0))`.
pub fn minimal_speed(f: &Nonlinearity) -> f64 {
    2.0 * f.fprime0().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KppCheck {
    VanishesAtZero,
    VanishesAtOne,
    PositiveBelowOne,
    NegativeAboveOne,
    Subtangency,
    DerivativeConsistency,
    PositiveGrowthRate,
    NegativeSlopeAtOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KppViolation {
    pub check: KppCheck,
    pub u: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KppReport {
    pub n_samples: usize,
    pub violation: Option<KppViolation>,
}

impl KppReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Sample points on `(0, 4]`: half geometric from `1e-6`, half uniform, sorted.
fn kpp_samples(n: usize) -> Vec<f64> {
    let n_geo = n / 2;
    let n_uni = n - n_geo;
    let (lo, hi) = (1e-6_f64.ln(), 4.0_f64.ln());
    let mut s: Vec<f64> = (0..n_geo)
        .map(|i| (lo + (hi - lo) * i as f64 / (n_geo.max(2) - 1) as f64).exp())
        .chain((1..=n_uni).map(|i| 4.0 * i as f64 / n_uni as f64))
        .collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.dedup();
    s
}

/// Sample-based check of the KPP hypothesis. Reports the first violating
/// sample in increasing `u`; the scalar slope checks run last.
pub fn validate_kpp(f: &Nonlinearity, n_samples: usize) -> KppReport {
    let n_samples = n_samples.max(100);
    let fail = |check, u, detail: String| KppReport {
        n_samples,
        violation: Some(KppViolation { check, u, detail }),
    };

    let f0 = f.eval(0.0);
    if f0.abs() > ZERO_TOL {
        return fail(KppCheck::VanishesAtZero, 0.0, format!("f(0) = {f0:e}"));
    }
    let fp0 = f.fprime0();
    for u in kpp_samples(n_samples) {
        let v = f.eval(u);
        if (u - 1.0).abs() < 1e-9 {
            if v.abs() > ZERO_TOL {
                return fail(KppCheck::VanishesAtOne, u, format!("f(1) = {v:e}"));
            }
        } else if u < 1.0 && v <= 0.0 {
            return fail(KppCheck::PositiveBelowOne, u, format!("f({u}) = {v:e} <= 0"));
        } else if u > 1.0 && v >= 0.0 {
            return fail(KppCheck::NegativeAboveOne, u, format!("f({u}) = {v:e} >= 0"));
        }
        if v > fp0 * u + 1e-14 * (1.0 + u) {
            return fail(
                KppCheck::Subtangency,
                u,
                format!("f({u}) = {v} > f'(0) u = {}", fp0 * u),
            );
        }
        if u <= 2.0 {
            let h = 1e-6 * u.max(1e-3);
            let fd = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
            let d = f.deriv(u);
            if (fd - d).abs() > 1e-6 * d.abs().max(1.0) {
                return fail(
                    KppCheck::DerivativeConsistency,
                    u,
                    format!("f'({u}) = {d}, finite difference = {fd}"),
                );
            }
        }
    }
    let f1 = f.eval(1.0);
    if f1.abs() > ZERO_TOL {
        return fail(KppCheck::VanishesAtOne, 1.0, format!("f(1) = {f1:e}"));
    }
    if fp0 <= 0.0 {
        return fail(KppCheck::PositiveGrowthRate, 0.0, format!("f'(0) = {fp0}"));
    }
    let fp1 = f.fprime1();
    if fp1 >= 0.0 {
        return fail(KppCheck::NegativeSlopeAtOne, 1.0, format!("f'(1) = {fp1}"));
    }
    KppReport { n_samples, violation: None }
}

/// The reaction term capped above by `f'(0) s` and made negative past `A`.
///
/// On `[1, A]` it is a concave cubic Hermite blend from `(1, f'(0))` with
/// slope `f'(0)` to `(A, 0)` with slope `-m`; past `A` it continues linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedNonlinearity {
    pub base: Nonlinearity,
    pub cap: f64,
    end_slope: f64,
}

impl TruncatedNonlinearity {
    pub fn eval_a(&self, s: f64) -> f64 {
        let k = self.base.fprime0();
        if s <= 1.0 {
            return k * s;
        }
        let d = self.cap - 1.0;
        if s >= self.cap {
            return -self.end_slope * (s - self.cap);
        }
        let t = (s - 1.0) / d;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h11 = t3 - t2;
        k * h00 + d * k * h10 - d * self.end_slope * h11
    }
}

/// `A = 2 max(1, sup u0)` and the matching `f_A`.
pub fn truncate(f: &Nonlinearity, sup_u0: f64) -> TruncatedNonlinearity {
    let cap = 2.0 * sup_u0.max(1.0);
    let d = cap - 1.0;
    // Concavity on [1, A] needs k(3 + D)/(2D) <= m <= k(3 + 2D)/D.
    let k = f.fprime0();
    let end_slope = k * (2.25 / d + 1.25);
    TruncatedNonlinearity { base: f.clone(), cap, end_slope }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logistic_values() {
        let f = make_logistic();
        assert_eq!(f.eval(0.5), 0.25);
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.fprime0(), 1.0);
        assert_eq!(f.fprime1(), -1.0);
    }

    #[test]
    fn minimal_speeds() {
        assert_eq!(minimal_speed(&make_logistic()), 2.0);
        assert_relative_eq!(minimal_speed(&make_logistic().scaled(0.25)), 1.0);
        assert_relative_eq!(minimal_speed(&make_logistic().scaled(4.0)), 4.0);
        let a = make_logistic_family(0.5);
        assert_relative_eq!(minimal_speed(&a), 2.0 * (1.0f64 / 1.5).sqrt());
    }

    #[test]
    fn scaling_multiplies_c0_by_sqrt_kappa() {
        for base in [make_logistic(), make_logistic_family(0.7)] {
            let c0 = minimal_speed(&base);
            for kappa in [0.25, 4.0] {
                let scaled = base.clone().scaled(kappa);
                assert_relative_eq!(minimal_speed(&scaled), c0 * kappa.sqrt(), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn builtins_pass_kpp() {
        assert!(validate_kpp(&make_logistic(), 10_000).passed());
        for a in [0.0, 0.3, 1.0] {
            let r = validate_kpp(&make_logistic_family(a), 10_000);
            assert!(r.passed(), "a = {a}: {r:?}");
        }
        assert!(validate_kpp(&make_polynomial(vec![0.0, 1.0, -1.0]), 10_000).passed());
        assert!(validate_kpp(&make_logistic().scaled(4.0), 10_000).passed());
    }

    #[test]
    fn superlinear_growth_fails_subtangency() {
        // u(1-u)(1+5u) = u + 4u^2 - 5u^3; f(0.1) = 0.135 > 0.1
        let f = make_polynomial(vec![0.0, 1.0, 4.0, -5.0]);
        assert!((f.eval(0.1) - 0.135).abs() < 1e-15);
        let r = validate_kpp(&f, 10_000);
        let v = r.violation.expect("must fail");
        assert_eq!(v.check, KppCheck::Subtangency);
        assert!(v.u > 0.0 && v.u < 0.8);
    }

    #[test]
    fn double_root_at_one_fails_sign() {
        // u(1-u)^2 = u - 2u^2 + u^3 stays positive above 1
        let f = make_polynomial(vec![0.0, 1.0, -2.0, 1.0]);
        let v = validate_kpp(&f, 10_000).violation.expect("must fail");
        assert_eq!(v.check, KppCheck::NegativeAboveOne);
        assert!(v.u > 1.0 && v.u <= 2.0, "{v:?}");
    }

    #[test]
    fn family_outside_range_fails() {
        assert!(!validate_kpp(&make_logistic_family(2.0), 10_000).passed());
    }

    #[test]
    fn truncation_cap() {
        let f = make_logistic();
        assert_eq!(truncate(&f, 0.5).cap, 2.0);
        assert_eq!(truncate(&f, 3.0).cap, 6.0);
        let t = truncate(&f, 3.0);
        assert_eq!(t.eval_a(0.5), 0.5);
    }

    #[test]
    fn truncation_invariants() {
        for f in [make_logistic(), make_logistic_family(1.0), make_logistic().scaled(4.0)] {
            for sup in [0.2, 1.0, 1.7, 5.0] {
                let t = truncate(&f, sup);
                let a = t.cap;
                let k = f.fprime0();
                for i in 0..=10_000 {
                    let s = 2.0 * a * i as f64 / 10_000.0;
                    let v = t.eval_a(s);
                    assert!(f.eval(s) <= v + 1e-12, "f > f_A at s = {s}");
                    assert!(v <= k * s + 1e-12, "f_A > f'(0)s at s = {s}");
                    if s <= 1.0 {
                        assert!((v - k * s).abs() < 1e-14);
                    } else if s < a - 1e-9 {
                        assert!(v > 0.0, "f_A <= 0 at s = {s} in (1, A)");
                    } else if s > a + 1e-9 {
                        assert!(v < 0.0);
                    }
                }
                // C1 at s = 1 and s = A
                let h = 1e-7;
                let left = (t.eval_a(1.0) - t.eval_a(1.0 - h)) / h;
                let right = (t.eval_a(1.0 + h) - t.eval_a(1.0)) / h;
                assert!((left - right).abs() < 1e-5);
                let left = (t.eval_a(a) - t.eval_a(a - h)) / h;
                let right = (t.eval_a(a + h) - t.eval_a(a)) / h;
                assert!((left - right).abs() < 1e-5);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn polynomial_deriv_matches_fd(c1 in 0.1f64..3.0, c2 in -3.0f64..3.0, c3 in -3.0f64..3.0, u in 0.01f64..2.0) {
            let f = make_polynomial(vec![0.0, c1, c2, c3]);
            let h = 1e-6;
            let fd = (f.eval(u + h) - f.eval(u - h)) / (2.0 * h);
            proptest::prop_assert!((fd - f.deriv(u)).abs() < 1e-6 * f.deriv(u).abs().max(1.0));
        }
    }
}
