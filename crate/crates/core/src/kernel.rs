//! The mollifying kernel `h(z) = sin²(z/2)/z²`, its tensor product
//! `H(x) = h(x_1)···h(x_n)` and the Taylor truncations of `H`.
//!
//! `h` is the Fourier transform of a nonnegative density on `[−1, 1]` with
//! total mass `h(0) = 1/4`, so every derivative obeys `|h^{(k)}| ≤ 1/4`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{multi_indices, MultiPoly};
use crate::quad::GaussLegendre;
use crate::smoothfn::SmoothFunction;
use crate::weights::norm;

/// Highest derivative order of `h` with a shipped oracle.
pub const MAX_KERNEL_ORDER: usize = 8;

/// Safety factor applied to sampled derivative sups.
pub const CH_SAFETY: f64 = 1.05;

const SERIES_CUTOFF: f64 = 1e-4;
const DERIV_SERIES_RADIUS: f64 = 3.0;

/// `h(x) = sin²(x/2)/x²`.
pub fn fejer_h(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let z2 = x * x;
        return 0.25 - z2 / 48.0 + z2 * z2 / 1440.0 - z2 * z2 * z2 / 80640.0;
    }
    let s = (0.5 * x).sin();
    s * s / (x * x)
}

/// Coefficient of `z^k` in the series of `h`: `(−1)^j / (2·(2j+2)!)` for `k = 2j`.
pub fn taylor_coeff(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let j = k / 2;
    let mut fact = 1.0;
    for i in 2..=(k + 2) {
        fact *= i as f64;
    }
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / (2.0 * fact)
}

/// `h^{(k)}(x)` for `k <= MAX_KERNEL_ORDER`.
pub fn h_deriv(k: usize, x: f64) -> Result<f64> {
    if k > MAX_KERNEL_ORDER {
        return Err(Error::Order {
            requested: k,
            max: MAX_KERNEL_ORDER,
        });
    }
    Ok(h_deriv_unchecked(k, x))
}

fn h_deriv_unchecked(k: usize, x: f64) -> f64 {
    if k == 0 {
        return fejer_h(x);
    }
    if x.abs() < DERIV_SERIES_RADIUS {
        // Σ_{2j ≥ k} c_{2j}·(2j)!/(2j−k)!·x^{2j−k}
        let mut sum = 0.0;
        let mut j = k.div_ceil(2);
        loop {
            let deg = 2 * j;
            let falling: f64 = ((deg - k + 1)..=deg).map(|v| v as f64).product();
            let term = taylor_coeff(deg) * falling * x.powi((deg - k) as i32);
            sum += term;
            if j > k && term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
            j += 1;
            if j > 60 {
                break;
            }
        }
        return sum;
    }
    // Leibniz on (1 − cos x)/2 · x^{−2}.
    let mut sum = 0.0;
    for i in 0..=k {
        let a = if i == 0 {
            0.5 * (1.0 - x.cos())
        } else {
            -0.5 * cos_deriv(i, x)
        };
        let j = k - i;
        let fact: f64 = (2..=(j + 1)).map(|v| v as f64).product();
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let inv = sign * fact * x.powi(-(2 + j as i32));
        sum += crate::poly::binomial(k, i) * a * inv;
    }
    sum
}

fn cos_deriv(k: usize, x: f64) -> f64 {
    match k % 4 {
        0 => x.cos(),
        1 => -x.sin(),
        2 => -x.cos(),
        _ => x.sin(),
    }
}

/// `H(x) = Π h(x_i)`.
pub fn big_h(x: &[f64]) -> f64 {
    x.iter().map(|&v| fejer_h(v)).product()
}

/// The product kernel as a smooth function.
#[derive(Debug, Clone, Copy)]
pub struct ProductKernel {
    pub dim: usize,
}

impl SmoothFunction for ProductKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        MAX_KERNEL_ORDER
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(x)
            .map(|(&k, &t)| h_deriv_unchecked(k, t))
            .product()
    }

    fn log_envelope(&self, _order: usize, _r: f64) -> Option<f64> {
        Some(self.dim as f64 * 0.25f64.ln())
    }

    fn name(&self) -> String {
        format!("H{}", self.dim)
    }
}

/// `A_1 = ∫ h`, analytically `π/2`.
pub const A1_EXACT: f64 = PI / 2.0;

/// `∫_{−r}^{r} h` by composite Gauss–Legendre with panels of width at most π.
pub fn mass_on_interval(r: f64) -> f64 {
    let panels = ((2.0 * r / PI).ceil() as usize).max(1);
    let rule = GaussLegendre::new(20);
    2.0 * rule.composite(0.0, r, panels.div_ceil(2).max(1), fejer_h)
}

/// `∫_r^∞ h` by the asymptotic expansion; the omitted term is at most `1/r³`.
pub fn one_sided_tail(r: f64) -> f64 {
    1.0 / (2.0 * r) + r.sin() / (2.0 * r * r) - r.cos() / (r * r * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassBracket {
    pub radius: f64,
    /// `∫_{−R}^{R} h`
    pub lower: f64,
    /// lower + `2/R`, using `h(x) ≤ 1/x²`
    pub upper: f64,
}

pub fn kernel_mass_bracket(r: f64) -> MassBracket {
    let lower = mass_on_interval(r);
    MassBracket {
        radius: r,
        lower,
        upper: lower + 2.0 / r,
    }
}

/// `A_1` from quadrature on `[−10³, 10³]` plus the analytic tails.
pub fn kernel_mass_1d() -> f64 {
    let r = 1000.0;
    mass_on_interval(r) + 2.0 * one_sided_tail(r)
}

/// `A = A_1ⁿ`.
pub fn kernel_mass(n: usize) -> f64 {
    kernel_mass_1d().powi(n as i32)
}

/// Mass of `H` outside the Euclidean ball of radius `rho`.
pub fn kernel_tail_mass(n: usize, rho: f64) -> Result<f64> {
    match n {
        1 => Ok(A1_EXACT - mass_on_interval(rho).min(A1_EXACT)),
        2 => {
            // ∫_{‖u‖ ≤ ρ} H in polar coordinates.
            let rule = GaussLegendre::new(20);
            let radial_panels = ((rho / 1.0).ceil() as usize).max(1);
            let angular_panels = 64;
            let inner = rule.composite(0.0, rho, radial_panels, |s| {
                s * rule.composite(0.0, 2.0 * PI, angular_panels, |t| {
                    fejer_h(s * t.cos()) * fejer_h(s * t.sin())
                })
            });
            Ok((A1_EXACT * A1_EXACT - inner).max(0.0))
        }
        _ => Err(Error::InvalidInput(
            "kernel tail mass supports n <= 2".into(),
        )),
    }
}

/// Sampled `sup |h^{(k)}|` over `|x| ≤ 50` for each `k <= p`.
pub fn sampled_derivative_sups(p: usize) -> Result<Vec<f64>> {
    if p > MAX_KERNEL_ORDER {
        return Err(Error::Order {
            requested: p,
            max: MAX_KERNEL_ORDER,
        });
    }
    let n = 100_001;
    Ok((0..=p)
        .map(|k| {
            (0..n)
                .map(|i| h_deriv_unchecked(k, -50.0 + 100.0 * i as f64 / (n - 1) as f64).abs())
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Certified bound of `|D^α H|` for `|α| <= p`: `1.05·(max_k sup|h^{(k)}|)ⁿ`.
///
/// Beyond `|x| = 50` the Leibniz form gives `|h^{(k)}(x)| ≤ c_k/x²`, and the
/// sampled sups are also capped by the spectral bound `1/4`.
pub fn estimate_ch(p: usize, n: usize) -> Result<f64> {
    let sups = sampled_derivative_sups(p)?;
    let s = sups.into_iter().fold(0.0, f64::max).min(0.25);
    Ok(CH_SAFETY * s.powi(n as i32))
}

/// Taylor polynomial of `H` at 0 of total degree `<= n_deg`:
/// `Σ_{|α| ≤ N} D^αH(0)/α!·x^α`.
pub fn taylor_u(n_deg: usize, dim: usize) -> MultiPoly {
    let coeffs: Vec<f64> = (0..=n_deg).map(taylor_coeff).collect();
    MultiPoly::from_terms(
        dim,
        multi_indices(dim, n_deg)
            .into_iter()
            .filter(|a| a.iter().all(|k| k % 2 == 0))
            .map(|a| {
                let c = a.iter().map(|&k| coeffs[k]).product();
                (a, c)
            }),
    )
}

/// `C_H·(N+2)ⁿ·‖x‖^{N+1}/(N+1)!`.
pub fn remainder_bound(n_deg: usize, x: &[f64], ch: f64) -> f64 {
    let n = x.len();
    let r = norm(x);
    if r == 0.0 {
        return 0.0;
    }
    let log = ch.ln() + n as f64 * ((n_deg + 2) as f64).ln() + (n_deg + 1) as f64 * r.ln()
        - crate::conjugate::ln_factorial(n_deg + 1);
    log.exp()
}

/// `h(x) − Σ_{k ≤ N} c_k x^k`, summed from the series tail when that is
/// accurate and by direct subtraction otherwise.
pub fn h_taylor_tail(n_deg: usize, x: f64) -> f64 {
    if x.abs() > 12.0 {
        let partial: f64 = (0..=n_deg)
            .map(|k| taylor_coeff(k) * x.powi(k as i32))
            .sum();
        return fejer_h(x) - partial;
    }
    let mut sum = 0.0;
    let mut k = n_deg + 1;
    if k % 2 == 1 {
        k += 1;
    }
    loop {
        let term = taylor_coeff(k) * x.powi(k as i32);
        sum += term;
        if k > n_deg + 4 && term.abs() <= 1e-20 * sum.abs() {
            break;
        }
        k += 2;
        if k > n_deg + 200 {
            break;
        }
    }
    sum
}

/// `H(x) − U_N(x)` via the exact series tails of each factor.
pub fn exact_remainder(n_deg: usize, x: &[f64]) -> Result<f64> {
    match x.len() {
        1 => Ok(h_taylor_tail(n_deg, x[0])),
        2 => {
            // Σ_{a ≤ N} c_a x1^a·tail_{N−a}(x2) + tail_N(x1)·h(x2)
            let mut sum = h_taylor_tail(n_deg, x[0]) * fejer_h(x[1]);
            for a in (0..=n_deg).step_by(2) {
                sum += taylor_coeff(a) * x[0].powi(a as i32) * h_taylor_tail(n_deg - a, x[1]);
            }
            Ok(sum)
        }
        _ => Err(Error::InvalidInput(
            "exact remainder supports n <= 2".into(),
        )),
    }
}
