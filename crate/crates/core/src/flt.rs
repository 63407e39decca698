//! Fourier–Laplace transforms of finite point-derivative functionals on ℝ
//! and their growth norms
//! `N_m(g) = sup_z |g(z)| / ((1 + |z|)^m·exp(φ̃_m(Im z)))`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::tilde_weight;
use crate::error::{Error, Result};
use crate::poly::{binomial, falling};
use crate::seqspace::SeqWeightFamily;
use crate::smoothfn::SmoothFunction;
use crate::weights::WeightFamily;

/// One term `c·f^{(k)}(a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub order: usize,
    pub point: f64,
}

impl Term {
    pub fn new(c: Complex64, order: usize, point: f64) -> Self {
        Self {
            re: c.re,
            im: c.im,
            order,
            point,
        }
    }

    pub fn coeff(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `F(f) = Σ_j c_j·f^{(k_j)}(a_j)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteFunctional {
    terms: Vec<Term>,
}

impl DiscreteFunctional {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !t.point.is_finite() || !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::InvalidInput(
                    "functional terms must be finite".into(),
                ));
            }
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `f ↦ f(a)`
    pub fn delta(a: f64) -> Self {
        Self::derivative_at(0, a)
    }

    /// `f ↦ f^{(k)}(a)`
    pub fn derivative_at(k: usize, a: f64) -> Self {
        Self {
            terms: vec![Term::new(Complex64::new(1.0, 0.0), k, a)],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    /// `max_j |a_j|`
    pub fn reach(&self) -> f64 {
        self.terms.iter().map(|t| t.point.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.im == 0.0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term::new(t.coeff() * c, t.order, t.point))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }
    }

    /// `F(f)` for a function of one variable.
    pub fn apply(&self, f: &dyn SmoothFunction) -> Result<Complex64> {
        if f.dim() != 1 {
            return Err(Error::InvalidInput(
                "functionals act on functions of one variable".into(),
            ));
        }
        if self.max_order() > f.max_order() {
            return Err(Error::Order {
                requested: self.max_order(),
                max: f.max_order(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|t| t.coeff() * f.deriv(&[t.order], &[t.point]))
            .sum())
    }

    /// `F(x^k)`
    pub fn apply_monomial(&self, k: usize) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff() * falling(k, t.order) * t.point.powi(k.saturating_sub(t.order) as i32)
            })
            .sum()
    }

    pub fn transform(&self) -> FlTransform {
        FlTransform { f: self.clone() }
    }
}

impl fmt::Display for DiscreteFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if t.im == 0.0 {
                write!(f, "{}·f^({})({})", t.re, t.order, t.point)?;
            } else {
                write!(f, "({}{:+}i)·f^({})({})", t.re, t.im, t.order, t.point)?;
            }
        }
        Ok(())
    }
}

/// An entire function sampled through its evaluator.
pub trait EntireFunction: Send + Sync {
    fn eval(&self, z: Complex64) -> Complex64;
}

impl<F: Fn(Complex64) -> Complex64 + Send + Sync> EntireFunction for F {
    fn eval(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

pub type SharedEntire = Arc<dyn EntireFunction>;

/// `F̂(λ) = F(e^{−iλx}) = Σ c_j·(−iλ)^{k_j}·e^{−iλa_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlTransform {
    f: DiscreteFunctional,
}

impl FlTransform {
    pub fn functional(&self) -> &DiscreteFunctional {
        &self.f
    }

    /// `F̂^{(k)}(0)`, differentiated in closed form.
    pub fn deriv_at_zero(&self, k: usize) -> Complex64 {
        let mi = Complex64::new(0.0, -1.0);
        self.f
            .terms
            .iter()
            .filter(|t| t.order <= k)
            .map(|t| {
                // Only the j = k_j term of the Leibniz sum survives at λ = 0.
                let q = t.order;
                t.coeff()
                    * binomial(k, q)
                    * falling(q, q)
                    * mi.powu(q as u32)
                    * (mi * t.point).powu((k - q) as u32)
            })
            .sum()
    }

    /// `F̂^{(k)}(0)` by the central difference `δ_h^k F̂(0) / h^k`.
    pub fn fd_deriv_at_zero(&self, k: usize, h: f64) -> Complex64 {
        let half = k as f64 / 2.0;
        let sum: Complex64 = (0..=k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let z = Complex64::new((half - j as f64) * h, 0.0);
                self.eval(z) * (sign * binomial(k, j))
            })
            .sum();
        sum / h.powi(k as i32)
    }
}

impl EntireFunction for FlTransform {
    fn eval(&self, z: Complex64) -> Complex64 {
        let miz = Complex64::new(z.im, -z.re);
        self.f
            .terms
            .iter()
            .map(|t| t.coeff() * miz.powu(t.order as u32) * (miz * t.point).exp())
            .sum()
    }
}

pub fn flt_transform(f: &DiscreteFunctional) -> FlTransform {
    f.transform()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub k: usize,
    /// `F(x^k)`
    pub direct: Complex64,
    /// `i^k·F̂^{(k)}(0)` in closed form
    pub closed: Complex64,
    /// `i^k·F̂^{(k)}(0)` by finite differences
    pub fd: Complex64,
    pub closed_residual: f64,
    pub fd_residual: f64,
}

/// `F(x^k) = i^k·F̂^{(k)}(0)`, checked along both derivative paths.
pub fn moment_check(f: &DiscreteFunctional, k: usize, fd_step: f64) -> Result<MomentCheck> {
    if k > 6 {
        return Err(Error::Order {
            requested: k,
            max: 6,
        });
    }
    let t = f.transform();
    let ik = Complex64::new(0.0, 1.0).powu(k as u32);
    let direct = f.apply_monomial(k);
    let closed = ik * t.deriv_at_zero(k);
    let fd = ik * t.fd_deriv_at_zero(k, fd_step);
    Ok(MomentCheck {
        k,
        direct,
        closed,
        fd,
        closed_residual: (direct - closed).norm(),
        fd_residual: (direct - fd).norm(),
    })
}

/// `max |F̂(−z̄) − conj F̂(z)| / max(1, |F̂(z)|)` over a square grid.
pub fn hermitian_residual(g: &dyn EntireFunction, half_width: f64, points: usize) -> f64 {
    let ticks = symmetric_ticks(half_width, points);
    ticks
        .par_iter()
        .map(|&y| {
            ticks
                .iter()
                .map(|&x| {
                    let z = Complex64::new(x, y);
                    let v = g.eval(z);
                    let r = g.eval(-z.conj()) - v.conj();
                    r.norm() / v.norm().max(1.0)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn symmetric_ticks(half_width: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sampling rectangle `[−R, R] × [−Y, Y]` with an odd number of points per
/// side, so the real axis and the origin are always sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub re_half: f64,
    pub im_half: f64,
    pub points: usize,
    /// Doublings of both half-widths before a verdict.
    #[serde(default = "default_doublings")]
    pub doublings: usize,
}

fn default_doublings() -> usize {
    5
}

impl Default for Rect {
    fn default() -> Self {
        Self {
            re_half: 4.0,
            im_half: 4.0,
            points: 129,
            doublings: default_doublings(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// The supremum is attained inside the rectangle.
    Interior,
    /// Approached on the boundary, but stabilising under enlargement.
    Boundary,
    Divergent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Interior => "INTERIOR",
            Verdict::Boundary => "BOUNDARY",
            Verdict::Divergent => "DIVERGENT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthNorm {
    pub value: f64,
    pub argmax: Complex64,
    pub boundary_ratio: f64,
    pub verdict: Verdict,
    /// Half-widths of the last rectangle sampled.
    pub re_half: f64,
    pub im_half: f64,
}

/// Growth-factor of the boundary ratio under one doubling beyond which the
/// supremum is declared divergent.
const DIVERGENCE_FACTOR: f64 = 1.25;

/// `N_m(g)` by sampling rectangles that double until the maximum moves inside
/// or the boundary ratio is seen to blow up. The conjugate weight index is
/// `max(m, 1)`.
pub fn growth_norm(
    g: &dyn EntireFunction,
    m: usize,
    w: &WeightFamily,
    rect: &Rect,
) -> Result<GrowthNorm> {
    if rect.points < 3 || !(rect.re_half > 0.0) || !(rect.im_half > 0.0) {
        return Err(Error::InvalidInput(
            "rectangle needs positive half-widths and >= 3 points".into(),
        ));
    }
    let (mut rh, mut ih) = (rect.re_half, rect.im_half);
    let mut last: Option<GrowthNorm> = None;
    for step in 0..=rect.doublings {
        let mut cur = growth_on_rect(g, m, w, rh, ih, rect.points | 1)?;
        if cur.value > cur.boundary_ratio {
            cur.verdict = Verdict::Interior;
            return Ok(cur);
        }
        if let Some(prev) = &last {
            let grows = cur.boundary_ratio > DIVERGENCE_FACTOR * prev.boundary_ratio;
            if grows && step == rect.doublings {
                cur.verdict = Verdict::Divergent;
                return Ok(cur);
            }
        }
        last = Some(cur);
        rh *= 2.0;
        ih *= 2.0;
    }
    Ok(last.expect("at least one rectangle"))
}

fn growth_on_rect(
    g: &dyn EntireFunction,
    m: usize,
    w: &WeightFamily,
    rh: f64,
    ih: f64,
    points: usize,
) -> Result<GrowthNorm> {
    let re = symmetric_ticks(rh, points);
    let im = symmetric_ticks(ih, points);
    let tilde = tilde_weight(w, m.max(1), &im, 20001)?;
    let rows: Vec<(f64, Complex64, f64)> = im
        .par_iter()
        .enumerate()
        .map(|(j, &y)| {
            let phi = tilde.values()[j];
            let edge_row = j == 0 || j + 1 == im.len();
            let mut best = (f64::NEG_INFINITY, Complex64::new(0.0, y));
            let mut shell = f64::NEG_INFINITY;
            for (i, &x) in re.iter().enumerate() {
                let z = Complex64::new(x, y);
                let v = g.eval(z).norm();
                let lr = if v == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln() - m as f64 * z.norm().ln_1p() - phi
                };
                if lr > best.0 {
                    best = (lr, z);
                }
                if (edge_row || i == 0 || i + 1 == re.len()) && lr > shell {
                    shell = lr;
                }
            }
            (best.0, best.1, shell)
        })
        .collect();
    let mut out = GrowthNorm {
        value: 0.0,
        argmax: Complex64::new(0.0, 0.0),
        boundary_ratio: 0.0,
        verdict: Verdict::Boundary,
        re_half: rh,
        im_half: ih,
    };
    for (lr, z, shell) in rows {
        let v = lr.exp();
        if v > out.value {
            out.value = v;
            out.argmax = z;
        }
        out.boundary_ratio = out.boundary_ratio.max(shell.exp());
    }
    Ok(out)
}

/// `‖g‖_m = max_k N_m(g_k) / c_k^{(m)}` for a finite sequence `g_1, …, g_K`.
pub fn p_space_norm(
    gs: &[SharedEntire],
    m: usize,
    c: &SeqWeightFamily,
    w: &WeightFamily,
    rect: &Rect,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (i, g) in gs.iter().enumerate() {
        let n = growth_norm(g.as_ref(), m, w, rect)?;
        if n.verdict == Verdict::Divergent {
            return Ok(f64::INFINITY);
        }
        best = best.max(n.value / c.eval(i + 1, m));
    }
    Ok(best)
}

/// Ten real- and complex-coefficient functionals used in checks and reports.
pub fn functional_fleet() -> Vec<DiscreteFunctional> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let t = |re: f64, k: usize, a: f64| Term::new(c(re, 0.0), k, a);
    let raw = vec![
        vec![t(1.0, 0, 0.0)],
        vec![t(1.0, 1, 0.0)],
        vec![t(1.0, 0, 1.0)],
        vec![t(1.0, 0, 1.0), t(1.0, 0, -1.0)],
        vec![t(2.0, 2, 0.5), t(-1.0, 0, -0.25)],
        vec![t(0.5, 3, -1.0), t(1.5, 1, 1.25)],
        vec![Term::new(c(1.0, 2.0), 1, 0.3), t(-0.7, 0, -1.1)],
        vec![t(1.0, 1, 0.0), t(-1.0, 1, 0.0)],
        vec![t(0.25, 0, -1.5), t(0.25, 2, 1.5), t(-1.0, 1, 0.0)],
        vec![
            Term::new(c(0.0, 1.0), 2, -0.6),
            Term::new(c(3.0, -1.0), 0, 0.9),
        ],
    ];
    raw.into_iter()
        .map(|ts| DiscreteFunctional::new(ts).expect("finite terms"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{Fleet, FleetFunction};
    use approx::assert_relative_eq;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn transforms_of_simple_functionals() {
        let d0 = DiscreteFunctional::delta(0.0).transform();
        assert_eq!(d0.eval(z(3.0, -2.0)), z(1.0, 0.0));
        let d1 = DiscreteFunctional::derivative_at(1, 0.0).transform();
        let l = z(0.4, 1.7);
        assert_relative_eq!((d1.eval(l) - z(0.0, -1.0) * l).norm(), 0.0, epsilon = 1e-15);
        let da = DiscreteFunctional::delta(1.0).transform();
        assert_relative_eq!(
            da.eval(z(0.0, 1.0)).re,
            std::f64::consts::E,
            epsilon = 1e-15
        );
    }

    #[test]
    fn moment_identity_examples() {
        let a = 0.8;
        let m = moment_check(&DiscreteFunctional::delta(a), 1, 1e-3).unwrap();
        assert_relative_eq!(m.direct.re, a);
        assert!(m.closed_residual < 1e-15);
        let pair = DiscreteFunctional::delta(1.0).add(&DiscreteFunctional::delta(-1.0));
        let m = moment_check(&pair, 4, 1e-2).unwrap();
        assert_relative_eq!(m.direct.re, 2.0);
        assert_relative_eq!(m.closed.re, 2.0, epsilon = 1e-14);
        assert!(m.fd_residual < 1e-3, "{}", m.fd_residual);
    }

    #[test]
    fn apply_matches_closed_derivatives() {
        let g = FleetFunction::new(Fleet::Gaussian, 1);
        let f = DiscreteFunctional::new(vec![
            Term::new(z(2.0, 0.0), 0, 0.0),
            Term::new(z(0.0, 1.0), 1, 1.0),
        ])
        .unwrap();
        let v = f.apply(&g).unwrap();
        assert_relative_eq!(v.re, 2.0);
        assert_relative_eq!(v.im, -2.0 * (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn growth_norm_of_delta_zero() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let one = DiscreteFunctional::delta(0.0).transform();
        let n = growth_norm(&one, 1, &w, &Rect::default()).unwrap();
        assert_eq!(n.verdict, Verdict::Interior);
        assert_relative_eq!(n.value, 1.0, epsilon = 1e-12);
        assert_eq!(n.argmax, z(0.0, 0.0));
    }

    #[test]
    fn derivative_functional_norms() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let d = DiscreteFunctional::derivative_at(1, 0.0).transform();
        let n0 = growth_norm(&d, 0, &w, &Rect::default()).unwrap();
        assert_eq!(n0.verdict, Verdict::Divergent);
        let n1 = growth_norm(&d, 1, &w, &Rect::default()).unwrap();
        assert_ne!(n1.verdict, Verdict::Divergent);
        assert!(n1.value < 1.0 && n1.value > 0.95, "{}", n1.value);
        assert!(n1.argmax.im.abs() < 1e-12);
    }

    #[test]
    fn fleet_is_hermitian_where_real() {
        for f in functional_fleet().iter().filter(|f| f.is_real()) {
            assert!(hermitian_residual(&f.transform(), 4.0, 64) < 1e-12, "{f}");
        }
        let complex = &functional_fleet()[6];
        assert!(hermitian_residual(&complex.transform(), 4.0, 64) > 1e-3);
    }

    #[test]
    fn p_norm_of_unit_sequence() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let c = SeqWeightFamily::default();
        let one: SharedEntire = Arc::new(DiscreteFunctional::delta(0.0).transform());
        let zero: SharedEntire = Arc::new(DiscreteFunctional::zero().transform());
        let gs = vec![one, zero.clone(), zero.clone()];
        let v = p_space_norm(&gs, 1, &c, &w, &Rect::default()).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-12);
        assert_eq!(
            p_space_norm(&[zero], 1, &c, &w, &Rect::default()).unwrap(),
            0.0
        );
    }
}
