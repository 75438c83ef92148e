use serde::{Deserialize, Serialize};

use crate::kinetics::Nonlinearity;

/// The five profile families built by shooting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveKind {
    /// `U(z; gamma)`, decreasing on `(-inf, 0]`.
    DecreasingSemiWave,
    /// `U_l(z; gamma)`, increasing on `[0, inf)`.
    IncreasingSemiWave,
    /// `W(z; b, gamma)`, supported on `[-L, 0]`.
    CompactBump,
    /// `V(z; b, gamma)`, one head, tail to `-inf`.
    Tadpole,
    /// `Q(z; gamma)` on the whole line, `Q(0) = 1/2`.
    FullFront,
}

/// Exponential approach to `limit` beyond the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub limit: f64,
    pub rate: f64,
}

/// A traveling-wave profile sampled on a uniform grid (spacing `dz`).
///
/// `W` profiles carry one extra, closer-spaced final point at `z = -L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub kind: WaveKind,
    pub gamma: f64,
    /// Stefan slope parameter `b = -mu q'(0)`, when the profile has one.
    pub b: Option<f64>,
    pub dz: f64,
    pub z: Vec<f64>,
    pub q: Vec<f64>,
    /// `q'(z)` at the same points.
    pub dq: Vec<f64>,
    /// Unbounded ends are infinite (written as strings in JSON).
    #[serde(with = "extended_pair")]
    pub support: (f64, f64),
    pub slope_at_zero: Option<f64>,
    pub height: f64,
    pub width: Option<f64>,
    pub left_tail: Option<Tail>,
    pub right_tail: Option<Tail>,
}

/// JSON header accompanying a profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub kind: WaveKind,
    pub gamma: f64,
    pub b: Option<f64>,
    pub slope_at_zero: Option<f64>,
    pub height: f64,
    pub width: Option<f64>,
}

/// JSON has no infinities; write them as `"inf"` / `"-inf"`.
mod extended_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Ext {
        Num(f64),
        Text(String),
    }

    fn to_ext(x: f64) -> Ext {
        if x.is_finite() {
            Ext::Num(x)
        } else if x > 0.0 {
            Ext::Text("inf".into())
        } else {
            Ext::Text("-inf".into())
        }
    }

    fn from_ext<E: serde::de::Error>(e: Ext) -> Result<f64, E> {
        match e {
            Ext::Num(x) => Ok(x),
            Ext::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Ext::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Ext::Text(t) => Err(E::custom(format!("expected a number or +/-inf, got {t}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        (to_ext(v.0), to_ext(v.1)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let (a, b) = <(Ext, Ext)>::deserialize(d)?;
        Ok((from_ext(a)?, from_ext(b)?))
    }
}

impl WaveProfile {
    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        *self.z.last().unwrap()
    }

    pub fn header(&self) -> ProfileHeader {
        ProfileHeader {
            kind: self.kind,
            gamma: self.gamma,
            b: self.b,
            slope_at_zero: self.slope_at_zero,
            height: self.height,
            width: self.width,
        }
    }

    /// Profile value at any `z`: cubic Hermite inside the grid, analytic
    /// exponential tails beyond it, zero outside a finite support.
    pub fn eval(&self, z: f64) -> f64 {
        let n = self.z.len();
        if z < self.z[0] {
            return match self.left_tail {
                Some(t) => t.limit + (self.q[0] - t.limit) * (t.rate * (z - self.z[0])).exp(),
                None => 0.0,
            };
        }
        if z > self.z[n - 1] {
            return match self.right_tail {
                Some(t) => t.limit + (self.q[n - 1] - t.limit) * (-t.rate * (z - self.z[n - 1])).exp(),
                None => 0.0,
            };
        }
        let guess = ((z - self.z[0]) / self.dz) as usize;
        let mut i = guess.min(n - 2);
        while i > 0 && self.z[i] > z {
            i -= 1;
        }
        while i + 2 < n && self.z[i + 1] < z {
            i += 1;
        }
        let (z0, z1) = (self.z[i], self.z[i + 1]);
        let h = z1 - z0;
        if h <= 0.0 {
            return self.q[i];
        }
        let t = (z - z0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.q[i] + h10 * h * self.dq[i] + h01 * self.q[i + 1] + h11 * h * self.dq[i + 1]
    }

    /// Sup-norm residual of `q'' + gamma q' + f(q)` at interior points of the
    /// uniform grid, with `q''` from a fourth-order central difference of the
    /// sampled slopes.
    pub fn residual_sup(&self, f: &Nonlinearity) -> f64 {
        let n = self.z.len();
        let h = self.dz;
        let mut worst: f64 = 0.0;
        for i in 2..n.saturating_sub(2) {
            let uniform = (0..4).all(|k| {
                let d = self.z[i - 1 + k] - self.z[i - 2 + k];
                (d - h).abs() <= 1e-9 * h
            });
            if !uniform {
                continue;
            }
            let p = &self.dq;
            let d2 = (p[i - 2] - 8.0 * p[i - 1] + 8.0 * p[i + 1] - p[i + 2]) / (12.0 * h);
            let r = d2 + self.gamma * p[i] + f.eval(self.q[i]);
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Strict monotonicity over the sampled points.
    pub fn is_strictly_increasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] < w[0])
    }

    /// Leftmost `z` where the profile reaches `level` (linear interpolation).
    pub fn level_point(&self, level: f64) -> Option<f64> {
        for i in 0..self.q.len().saturating_sub(1) {
            let (a, b) = (self.q[i], self.q[i + 1]);
            if (a - level) * (b - level) <= 0.0 && a != b {
                return Some(self.z[i] + (level - a) / (b - a) * (self.z[i + 1] - self.z[i]));
            }
            if a == level {
                return Some(self.z[i]);
            }
        }
        None
    }

    /// Number of strict interior local maxima on the grid.
    pub fn interior_maxima(&self) -> usize {
        self.q.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
    }

    /// CSV with columns `z,q`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.z.len() * 40);
        s.push_str("z,q\n");
        for (z, q) in self.z.iter().zip(&self.q) {
            s.push_str(&format!("{z:.10e},{q:.16e}\n"));
        }
        s
    }
}
