//! The shipped test functions. Each is a tensor product `f(x) = Π g(x_i)` of
//! a 1-D profile with closed-form derivatives of every order it declares.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::poly::binomial;
use crate::smoothfn::SmoothFunction;
use crate::weights::Cube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fleet {
    /// `e^{−t²}`
    Gaussian,
    Cosh,
    /// `sin(t)·e^{−t²}`
    SinGaussian,
    /// `exp(−1/(1−t²))` on `(−1, 1)`
    Bump,
    Sin,
}

impl Fleet {
    pub const ALL: [Fleet; 5] = [
        Fleet::Gaussian,
        Fleet::Cosh,
        Fleet::SinGaussian,
        Fleet::Bump,
        Fleet::Sin,
    ];

    pub fn max_order(self) -> usize {
        match self {
            Fleet::Bump => 12,
            _ => 40,
        }
    }
}

impl fmt::Display for Fleet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fleet::Gaussian => "gaussian",
            Fleet::Cosh => "cosh",
            Fleet::SinGaussian => "sin_gaussian",
            Fleet::Bump => "bump",
            Fleet::Sin => "sin",
        };
        f.write_str(s)
    }
}

impl FromStr for Fleet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Fleet::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown function `{s}`")))
    }
}

/// Physicists' Hermite polynomials `H_0..=H_max` as coefficient vectors.
fn hermite_table(max: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![1.0], vec![0.0, 2.0]];
    for k in 1..max {
        let mut next = vec![0.0; k + 2];
        for (i, c) in h[k].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in h[k - 1].iter().enumerate() {
            next[i] -= 2.0 * k as f64 * c;
        }
        h.push(next);
    }
    h.truncate(max + 1);
    h
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

/// `(d/dt)^k e^{−t²} = (−1)^k H_k(t) e^{−t²}`.
fn gaussian_deriv(k: usize, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    let hk = if k == 0 {
        h0
    } else {
        for j in 1..k {
            let h2 = 2.0 * t * h1 - 2.0 * j as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        h1
    };
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hk * (-t * t).exp()
}

fn sin_deriv(k: usize, t: f64) -> f64 {
    match k % 4 {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

/// `P_k` with `b^{(k)}(t) = P_k(t)·(1−t²)^{−2k}·b(t)`.
fn bump_polys(max: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for k in 0..max {
        let p = &out[k];
        let mut next = vec![0.0; p.len() + 3];
        // P_k'·(1 − t²)²
        for i in 1..p.len() {
            let d = i as f64 * p[i];
            next[i - 1] += d;
            next[i + 1] -= 2.0 * d;
            next[i + 3] += d;
        }
        // 4k·t·(1 − t²)·P_k − 2t·P_k
        for (i, &c) in p.iter().enumerate() {
            next[i + 1] += (4.0 * k as f64 - 2.0) * c;
            next[i + 3] -= 4.0 * k as f64 * c;
        }
        while next.len() > 1 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        out.push(next);
    }
    out
}

/// One coordinate factor with cached polynomial tables.
#[derive(Debug, Clone)]
struct Profile {
    kind: Fleet,
    bump: Vec<Vec<f64>>,
    /// `|coefficients|` of the Hermite polynomials, for envelopes.
    hermite_abs: Vec<Vec<f64>>,
    bump_sup: Vec<f64>,
}

impl Profile {
    fn new(kind: Fleet) -> Self {
        let bump = if kind == Fleet::Bump {
            bump_polys(kind.max_order())
        } else {
            Vec::new()
        };
        let hermite_abs = hermite_table(kind.max_order() + 1)
            .into_iter()
            .map(|c| c.into_iter().map(f64::abs).collect())
            .collect();
        let mut p = Self {
            kind,
            bump,
            hermite_abs,
            bump_sup: Vec::new(),
        };
        if kind == Fleet::Bump {
            p.bump_sup = (0..=kind.max_order())
                .map(|k| {
                    let n = 20_000;
                    (0..=n)
                        .map(|i| p.deriv(k, -1.0 + 2.0 * i as f64 / n as f64).abs())
                        .fold(0.0, f64::max)
                        * 1.05
                })
                .collect();
        }
        p
    }

    fn deriv(&self, k: usize, t: f64) -> f64 {
        match self.kind {
            Fleet::Gaussian => gaussian_deriv(k, t),
            Fleet::Cosh => {
                if k.is_multiple_of(2) {
                    t.cosh()
                } else {
                    t.sinh()
                }
            }
            Fleet::Sin => sin_deriv(k, t),
            Fleet::SinGaussian => (0..=k)
                .map(|i| binomial(k, i) * sin_deriv(i, t) * gaussian_deriv(k - i, t))
                .sum(),
            Fleet::Bump => {
                let s = 1.0 - t * t;
                if s <= 0.0 {
                    return 0.0;
                }
                let e = -1.0 / s - 2.0 * k as f64 * s.ln();
                horner(&self.bump[k], t) * e.exp()
            }
        }
    }

    /// `ln max_{j ≤ order} sup_{|t| ≤ r} |g^{(j)}(t)|`-style factor bound that is
    /// nondecreasing in `r`, except for the gaussian part which is split off.
    fn log_poly_part(&self, order: usize, r: f64) -> f64 {
        let herm = |j: usize| horner(&self.hermite_abs[j], r);
        let v = match self.kind {
            Fleet::Gaussian => (0..=order).map(herm).fold(0.0, f64::max),
            Fleet::SinGaussian => (0..=order)
                .map(|j| (0..=j).map(|i| binomial(j, i) * herm(j - i)).sum::<f64>())
                .fold(0.0, f64::max),
            Fleet::Cosh | Fleet::Sin => 1.0,
            Fleet::Bump => self.bump_sup[..=order].iter().cloned().fold(0.0, f64::max),
        };
        v.ln()
    }
}

#[derive(Debug, Clone)]
pub struct FleetFunction {
    dim: usize,
    profile: Profile,
}

impl FleetFunction {
    pub fn new(kind: Fleet, dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            profile: Profile::new(kind),
        }
    }

    pub fn kind(&self) -> Fleet {
        self.profile.kind
    }

    /// `g^{(k)}(t)` of the 1-D profile.
    pub fn profile_deriv(&self, k: usize, t: f64) -> f64 {
        self.profile.deriv(k, t)
    }
}

impl SmoothFunction for FleetFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.profile.kind.max_order()
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(x)
            .map(|(&k, &t)| self.profile.deriv(k, t))
            .product()
    }

    fn support(&self) -> Option<Cube> {
        match self.profile.kind {
            Fleet::Bump => Cube::new(1.0, self.dim).ok(),
            _ => None,
        }
    }

    fn log_envelope(&self, order: usize, r: f64) -> Option<f64> {
        if order > self.max_order() {
            return None;
        }
        // Every |x_i| <= r, and the factor bounds are nondecreasing in |x_i|.
        let n = self.dim as f64;
        let poly = n * self.profile.log_poly_part(order, r);
        Some(match self.profile.kind {
            Fleet::Gaussian | Fleet::SinGaussian => poly - r * r,
            Fleet::Cosh => n.sqrt() * r,
            Fleet::Sin => 0.0,
            Fleet::Bump => {
                if r > n.sqrt() {
                    f64::NEG_INFINITY
                } else {
                    poly
                }
            }
        })
    }

    fn name(&self) -> String {
        if self.dim == 1 {
            self.profile.kind.to_string()
        } else {
            format!("{}^{}", self.profile.kind, self.dim)
        }
    }
}
