//! Smooth functions with exact derivative oracles and the weighted seminorms
//! `q_{p,m}(f) = sup_{x, |α| ≤ p} |D^α f(x)| / exp(φ_m(x))`.
//!
//! Suprema over ℝⁿ are split into a grid maximum over a cube and a tail
//! certificate outside it. The certificate uses a radial envelope of the
//! derivatives: `|D^α f(x)| ≤ exp(E(‖x‖))`, from which
//! `c_m = sup_r exp(E(r) − φ_m(r))` bounds `|D^α f| ≤ c_m θ_m` everywhere.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{multi_indices, MultiPoly};
use crate::weights::{norm, shell_points, Cube, WeightFamily};

pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Largest total derivative order the oracle supports.
    fn max_order(&self) -> usize;

    /// `D^α f(x)` for `|α| <= max_order`.
    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64;

    fn eval(&self, x: &[f64]) -> f64 {
        self.deriv(&vec![0; self.dim()], x)
    }

    /// `D^α f` at many points. Implementations with expensive per-point setup
    /// override this.
    fn deriv_many(&self, alpha: &[usize], xs: &[Vec<f64>]) -> Vec<f64> {
        xs.par_iter().map(|x| self.deriv(alpha, x)).collect()
    }

    /// A cube outside of which `f` and all its derivatives vanish.
    fn support(&self) -> Option<Cube> {
        None
    }

    /// `E(r)` with `|D^α f(x)| <= exp(E(‖x‖))` for `|α| <= order`.
    /// `-∞` is allowed (identically zero there).
    fn log_envelope(&self, _order: usize, _r: f64) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

pub type SharedFn = Arc<dyn SmoothFunction>;

/// Cell-centred sampling of a cube, plus optional extra probe points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cube: Cube,
    pub points_per_axis: usize,
    pub extra_points: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn new(radius: f64, dim: usize, points_per_axis: usize) -> Result<Self> {
        if points_per_axis < 3 {
            return Err(Error::InvalidInput(
                "grid needs at least 3 points per axis".into(),
            ));
        }
        Ok(Self {
            cube: Cube::new(radius, dim)?,
            points_per_axis,
            extra_points: Vec::new(),
        })
    }

    /// Default resolution: 2049 points per axis in 1-D, 257² in 2-D.
    pub fn default_for(radius: f64, dim: usize) -> Result<Self> {
        let n = match dim {
            1 => 2049,
            2 => 257,
            _ => 33,
        };
        Self::new(radius, dim, n)
    }

    pub fn with_extra_points(mut self, pts: Vec<Vec<f64>>) -> Self {
        self.extra_points = pts;
        self
    }

    pub fn ticks(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let r = self.cube.radius;
        let h = 2.0 * r / n as f64;
        (0..n).map(|i| -r + (i as f64 + 0.5) * h).collect()
    }

    /// Grid points (first axis slowest) followed by the extra points, and
    /// for each a flag marking the outermost grid layer.
    pub fn points(&self) -> (Vec<Vec<f64>>, Vec<bool>) {
        let ticks = self.ticks();
        let n = ticks.len();
        let d = self.cube.dim;
        let total = n.pow(d as u32);
        let mut pts = Vec::with_capacity(total + self.extra_points.len());
        let mut shell = Vec::with_capacity(total + self.extra_points.len());
        for idx in 0..total {
            let mut rem = idx;
            let mut p = vec![0.0; d];
            let mut on_shell = false;
            for j in (0..d).rev() {
                let i = rem % n;
                rem /= n;
                p[j] = ticks[i];
                on_shell |= i == 0 || i == n - 1;
            }
            pts.push(p);
            shell.push(on_shell);
        }
        for p in &self.extra_points {
            pts.push(p.clone());
            shell.push(false);
        }
        (pts, shell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormValue {
    pub value: f64,
    /// Largest ratio on the outermost grid layer.
    pub boundary_ratio: f64,
    pub argmax: Vec<f64>,
    pub alpha: Vec<usize>,
}

/// Grid value of `q_{p,m}(f)`, computed as `max exp(ln|D^α f| − φ_m)`.
pub fn seminorm_q(
    f: &dyn SmoothFunction,
    p: usize,
    m: usize,
    w: &WeightFamily,
    grid: &GridSpec,
) -> Result<SeminormValue> {
    if p > f.max_order() {
        return Err(Error::Order {
            requested: p,
            max: f.max_order(),
        });
    }
    if f.dim() != w.dim() || grid.cube.dim != f.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let (pts, shell) = grid.points();
    let log_w: Vec<f64> = pts.par_iter().map(|x| w.log_theta(m, x)).collect();
    let mut best = SeminormValue {
        value: 0.0,
        boundary_ratio: 0.0,
        argmax: pts[0].clone(),
        alpha: vec![0; f.dim()],
    };
    for alpha in multi_indices(f.dim(), p) {
        let vals = f.deriv_many(&alpha, &pts);
        for (i, v) in vals.iter().enumerate() {
            let ratio = weighted_ratio(*v, log_w[i]);
            if ratio > best.value {
                best.value = ratio;
                best.argmax = pts[i].clone();
                best.alpha = alpha.clone();
            }
            if shell[i] && ratio > best.boundary_ratio {
                best.boundary_ratio = ratio;
            }
        }
    }
    Ok(best)
}

/// `|v|·exp(−log_weight)` without forming the weight.
pub fn weighted_ratio(v: f64, log_weight: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        (v.abs().ln() - log_weight).exp()
    }
}

/// `c_m = sup_x max_{|α| ≤ order} |D^α f(x)| / θ_m(x)`, bounded through the
/// radial envelope.
pub fn growth_certificate(
    f: &dyn SmoothFunction,
    w: &WeightFamily,
    m: usize,
    order: usize,
) -> Result<f64> {
    let env = |r: f64| f.log_envelope(order, r);
    if env(0.0).is_none() {
        return Err(Error::Certificate(format!(
            "{} has no derivative envelope of order {order}",
            f.name()
        )));
    }
    let g = |r: f64| env(r).unwrap_or(f64::INFINITY) - w.profile(m, r);
    let mut best = g(0.0);
    let mut r = 0.0;
    // Linear steps near the origin, then geometric; stop once g has been
    // decreasing for a long stretch and is far below its maximum.
    let mut falling = 0;
    let mut prev = best;
    while r < 1e4 {
        r = if r < 4.0 { r + 1e-3 } else { r * 1.0005 };
        let v = g(r);
        if v.is_nan() {
            return Err(Error::Certificate("envelope evaluated to NaN".into()));
        }
        best = best.max(v);
        falling = if v <= prev { falling + 1 } else { 0 };
        prev = v;
        if falling > 2000 && (v < best - 60.0 || v == f64::NEG_INFINITY) {
            break;
        }
    }
    if best == f64::INFINITY || (r >= 1e4 && prev > best - 30.0 && prev >= g(0.5 * r)) {
        return Err(Error::Certificate(format!(
            "{} does not decay against θ_{m}",
            f.name()
        )));
    }
    // Sampling safety margin.
    Ok(1.01 * best.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCertificate {
    pub radius: f64,
    /// `c_{m+1}`
    pub constant: f64,
    /// `min_{‖x‖∞ = r} (φ_m − φ_{m+1})(x)`
    pub min_difference: f64,
    /// `c_{m+1}·exp(−min_difference)`
    pub bound: f64,
}

/// Upper bound of `sup_{x ∉ Π_r, |α| ≤ m+1} |D^α f(x)| / θ_m(x)`.
pub fn tail_certificate(
    f: &dyn SmoothFunction,
    w: &WeightFamily,
    m: usize,
    r: f64,
) -> Result<TailCertificate> {
    let shell_min = |radius: f64| {
        shell_points(w.dim(), radius, 65)
            .iter()
            .map(|x| w.eval(m, x) - w.eval(m + 1, x))
            .fold(f64::INFINITY, f64::min)
    };
    let diffs: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|k| shell_min(k * r))
        .collect();
    if diffs.windows(2).any(|d| d[1] < d[0]) {
        return Err(Error::Certificate(format!(
            "φ_{m} − φ_{} is not increasing beyond r = {r}",
            m + 1
        )));
    }
    let constant = growth_certificate(f, w, m + 1, m + 1)?;
    let min_difference = diffs[0];
    Ok(TailCertificate {
        radius: r,
        constant,
        min_difference,
        bound: constant * (-min_difference).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedSeminorm {
    pub grid: SeminormValue,
    pub tail: TailCertificate,
}

impl CertifiedSeminorm {
    /// Grid value plus tail bound.
    pub fn upper(&self) -> f64 {
        self.grid.value + self.tail.bound
    }
}

/// `q_{p,m}` on a cube grown (by factors of 1.25 from `start_radius`) until
/// the tail certificate drops below `tail_tol`.
pub fn certified_seminorm(
    f: &dyn SmoothFunction,
    p: usize,
    m: usize,
    w: &WeightFamily,
    points_per_axis: usize,
    start_radius: f64,
    tail_tol: f64,
) -> Result<CertifiedSeminorm> {
    if p > m + 1 {
        return Err(Error::Certificate(format!(
            "tail certificate covers |α| <= m + 1 = {}, requested p = {p}",
            m + 1
        )));
    }
    let mut r = start_radius;
    let mut tail = tail_certificate(f, w, m, r)?;
    while tail.bound > tail_tol {
        r *= 1.25;
        if r > 1e6 {
            return Err(Error::Certificate("tail does not decay".into()));
        }
        tail = tail_certificate(f, w, m, r)?;
    }
    let grid = GridSpec::new(r, f.dim(), points_per_axis)?;
    Ok(CertifiedSeminorm {
        grid: seminorm_q(f, p, m, w, &grid)?,
        tail,
    })
}

/// `|D^α f(x) − FD(x)|`, where FD differentiates the order-`|α|−1` oracle by
/// Richardson-extrapolated central differences (error `O(step⁴)`).
pub fn fd_check(f: &dyn SmoothFunction, alpha: &[usize], x: &[f64], step: f64) -> Result<f64> {
    let total: usize = alpha.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("fd_check needs |α| >= 1".into()));
    }
    if total > f.max_order() {
        return Err(Error::Order {
            requested: total,
            max: f.max_order(),
        });
    }
    let j = alpha.iter().rposition(|&k| k > 0).unwrap();
    let mut lower = alpha.to_vec();
    lower[j] -= 1;
    let central = |h: f64| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        (f.deriv(&lower, &xp) - f.deriv(&lower, &xm)) / (2.0 * h)
    };
    let fd = (4.0 * central(0.5 * step) - central(step)) / 3.0;
    Ok((f.deriv(alpha, x) - fd).abs())
}

/// `Σ_i c_i f_i`.
#[derive(Clone)]
pub struct LinearCombination {
    dim: usize,
    terms: Vec<(f64, SharedFn)>,
}

impl LinearCombination {
    pub fn new(dim: usize, terms: Vec<(f64, SharedFn)>) -> Result<Self> {
        if terms.iter().any(|(_, f)| f.dim() != dim) {
            return Err(Error::InvalidInput(
                "dimension mismatch in combination".into(),
            ));
        }
        Ok(Self { dim, terms })
    }

    pub fn difference(a: SharedFn, b: SharedFn) -> Self {
        let dim = a.dim();
        Self::new(dim, vec![(1.0, a), (-1.0, b)]).expect("same dimension")
    }

    pub fn scaled(c: f64, f: SharedFn) -> Self {
        let dim = f.dim();
        Self {
            dim,
            terms: vec![(c, f)],
        }
    }
}

impl SmoothFunction for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, f)| f.max_order())
            .min()
            .unwrap_or(usize::MAX)
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.deriv(alpha, x)).sum()
    }

    fn deriv_many(&self, alpha: &[usize], xs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; xs.len()];
        for (c, f) in &self.terms {
            for (o, v) in out.iter_mut().zip(f.deriv_many(alpha, xs)) {
                *o += c * v;
            }
        }
        out
    }

    fn support(&self) -> Option<Cube> {
        let mut r: f64 = 0.0;
        for (_, f) in &self.terms {
            r = r.max(f.support()?.radius);
        }
        if self.terms.is_empty() {
            return None;
        }
        Cube::new(r, self.dim).ok()
    }

    fn log_envelope(&self, order: usize, r: f64) -> Option<f64> {
        let mut parts = Vec::with_capacity(self.terms.len());
        for (c, f) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            parts.push(c.abs().ln() + f.log_envelope(order, r)?);
        }
        Some(log_sum_exp(&parts))
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, f)| format!("{c}*{}", f.name()))
            .collect();
        parts.join(" + ")
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx.is_infinite() {
        return mx;
    }
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `x ↦ f(x − shift)`.
#[derive(Clone)]
pub struct Shifted {
    f: SharedFn,
    shift: Vec<f64>,
}

impl Shifted {
    pub fn new(f: SharedFn, shift: Vec<f64>) -> Self {
        assert_eq!(f.dim(), shift.len());
        Self { f, shift }
    }

    fn back(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, b)| a - b).collect()
    }
}

impl SmoothFunction for Shifted {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> usize {
        self.f.max_order()
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.f.deriv(alpha, &self.back(x))
    }

    fn support(&self) -> Option<Cube> {
        let s = self.f.support()?;
        let off = self.shift.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Cube::new(s.radius + off, s.dim).ok()
    }

    fn log_envelope(&self, order: usize, r: f64) -> Option<f64> {
        // ‖x − s‖ ranges over [r − ‖s‖, r + ‖s‖]. Sampled maximum: exact for
        // monotone envelopes, close otherwise.
        let s = norm(&self.shift);
        let lo = (r - s).max(0.0);
        let k = 16;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=k {
            let t = lo + (r + s - lo) * i as f64 / k as f64;
            best = best.max(self.f.log_envelope(order, t)?);
        }
        Some(best)
    }

    fn name(&self) -> String {
        format!("shift({}, {:?})", self.f.name(), self.shift)
    }
}

impl SmoothFunction for MultiPoly {
    fn dim(&self) -> usize {
        MultiPoly::dim(self)
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.deriv_at(alpha, x)
    }

    fn log_envelope(&self, order: usize, r: f64) -> Option<f64> {
        if self.is_zero() {
            return Some(f64::NEG_INFINITY);
        }
        let s = self.derivative_coefficient_mass(order);
        if s == 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        Some(s.ln() + self.degree() as f64 * r.ln_1p())
    }

    fn name(&self) -> String {
        format!("poly(deg {})", self.degree())
    }
}

/// The zero function.
#[derive(Debug, Clone, Copy)]
pub struct Zero(pub usize);

impl SmoothFunction for Zero {
    fn dim(&self) -> usize {
        self.0
    }

    fn max_order(&self) -> usize {
        usize::MAX
    }

    fn deriv(&self, _alpha: &[usize], _x: &[f64]) -> f64 {
        0.0
    }

    fn support(&self) -> Option<Cube> {
        Cube::new(f64::MIN_POSITIVE, self.0).ok()
    }

    fn log_envelope(&self, _order: usize, _r: f64) -> Option<f64> {
        Some(f64::NEG_INFINITY)
    }

    fn name(&self) -> String {
        "zero".into()
    }
}
