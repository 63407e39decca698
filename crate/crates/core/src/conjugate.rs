//! Young (Legendre–Fenchel) conjugates on grids.
//!
//! `u*(x) = sup_y (x·y − u(y))` is computed as a maximum over sample nodes, so
//! every value returned here is a lower bound of the true supremum. A
//! truncation certificate guards against maximisers beyond the sampled range:
//! the chord slope of `u` over the outer half of its range must reach twice the
//! largest `|x|` requested.
//!
//! [`ConjugateOracle`] adds a golden-section polish around the best node when
//! the function is available in closed form; the polished value is still the
//! objective evaluated at an admissible point and keeps the lower-bound
//! semantics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{norm, WeightFamily};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[0, ∞)`
    HalfLine,
    /// `ℝ`
    FullLine,
}

/// A function tabulated on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction1D {
    nodes: Vec<f64>,
    values: Vec<f64>,
    domain: Domain,
}

impl SampledFunction1D {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>, domain: Domain) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidInput("need at least one node".into()));
        }
        if nodes.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidInput(
                "nodes must be strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().chain(&nodes).find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample {v}")));
        }
        if domain == Domain::HalfLine && nodes[0] < 0.0 {
            return Err(Error::InvalidInput(
                "half-line samples need nodes >= 0".into(),
            ));
        }
        Ok(Self {
            nodes,
            values,
            domain,
        })
    }

    pub fn from_fn(nodes: Vec<f64>, domain: Domain, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = nodes.iter().map(|&y| f(y)).collect();
        Self::new(nodes, values, domain)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Piecewise-linear interpolation.
    pub fn interpolate(&self, y: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(y >= lo && y <= hi) {
            return Err(Error::Range { point: y, lo, hi });
        }
        let j = self.nodes.partition_point(|&n| n <= y);
        if j == 0 {
            return Ok(self.values[0]);
        }
        if j >= self.nodes.len() {
            return Ok(self.values[self.nodes.len() - 1]);
        }
        let (y0, y1) = (self.nodes[j - 1], self.nodes[j]);
        let t = (y - y0) / (y1 - y0);
        Ok(self.values[j - 1] * (1.0 - t) + self.values[j] * t)
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(y, v)| (v[1] - v[0]) / (y[1] - y[0]))
            .collect()
    }

    /// Discrete convexity: slopes nondecreasing.
    pub fn is_convex(&self) -> bool {
        self.slopes().windows(2).all(|s| s[1] >= s[0])
    }

    /// Chord slopes over the lower and upper halves of the sampled range.
    pub fn tail_slopes(&self) -> Result<(f64, f64)> {
        if self.len() < 2 {
            return Err(Error::InvalidInput("tail slopes need two nodes".into()));
        }
        let (lo, hi) = self.range();
        let mid = 0.5 * (lo + hi);
        let vm = self.interpolate(mid)?;
        let left = (vm - self.values[0]) / (mid - lo);
        let right = (self.values[self.len() - 1] - vm) / (hi - mid);
        Ok((left, right))
    }

    /// Certificate that the supremum over the full domain is attained inside
    /// the sampled range for every `x` in `[x_min, x_max]`.
    pub fn check_truncation(&self, x_min: f64, x_max: f64) -> Result<()> {
        let (left, right) = self.tail_slopes()?;
        let need_right = 2.0 * x_max.max(0.0);
        if right < need_right {
            return Err(Error::Truncation {
                slope: right,
                required: need_right,
            });
        }
        if self.domain == Domain::FullLine {
            let need_left = 2.0 * x_min.min(0.0);
            if left > need_left {
                return Err(Error::Truncation {
                    slope: -left,
                    required: -need_left,
                });
            }
        }
        Ok(())
    }

    /// `max_j (x·y_j − u_j)` and the maximising index.
    pub fn conjugate_at(&self, x: f64) -> (f64, usize) {
        let slopes = self.slopes();
        let convex = slopes.windows(2).all(|s| s[1] >= s[0]);
        self.conjugate_at_with(x, &slopes, convex)
    }

    fn conjugate_at_with(&self, x: f64, slopes: &[f64], convex: bool) -> (f64, usize) {
        if convex {
            // The objective rises while the slope is below x.
            let j = slopes.partition_point(|&s| s < x);
            (x * self.nodes[j] - self.values[j], j)
        } else {
            let mut best = (f64::NEG_INFINITY, 0);
            for (j, (y, u)) in self.nodes.iter().zip(&self.values).enumerate() {
                let v = x * y - u;
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        }
    }

    /// Grid conjugate on `x_grid` after the truncation certificate passes.
    ///
    /// Convex samples use the monotone-slope search (`O(log n)` per point);
    /// otherwise every node is scanned.
    pub fn conjugate(&self, x_grid: &[f64]) -> Result<SampledFunction1D> {
        let (x_min, x_max) = min_max(x_grid)?;
        self.check_truncation(x_min, x_max)?;
        let slopes = self.slopes();
        let convex = slopes.windows(2).all(|s| s[1] >= s[0]);
        let values = x_grid
            .iter()
            .map(|&x| self.conjugate_at_with(x, &slopes, convex).0)
            .collect();
        let domain = match self.domain {
            Domain::HalfLine if x_min >= 0.0 => Domain::HalfLine,
            _ => Domain::FullLine,
        };
        SampledFunction1D::new(x_grid.to_vec(), values, domain)
    }
}

fn min_max(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// `u*(x) = sup_{y ≥ 0} (x·y − u(y))` on `x_grid ⊂ [0, ∞)`.
pub fn young_conjugate(u: &SampledFunction1D, x_grid: &[f64]) -> Result<SampledFunction1D> {
    if u.domain() != Domain::HalfLine {
        return Err(Error::InvalidInput(
            "young conjugate needs half-line samples".into(),
        ));
    }
    if x_grid.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput(
            "young conjugate grid must be >= 0".into(),
        ));
    }
    u.conjugate(x_grid)
}

/// `(u*)*` on `y_grid`, with `u*` tabulated on `x_grid`.
pub fn biconjugate(
    u: &SampledFunction1D,
    y_grid: &[f64],
    x_grid: &[f64],
) -> Result<SampledFunction1D> {
    let star = u.conjugate(x_grid)?;
    star.conjugate(y_grid)
}

/// `u(e)(t) = u(e^t)` by interpolation of `u`.
pub fn exp_compose(u: &SampledFunction1D, t_grid: &[f64]) -> Result<SampledFunction1D> {
    let values = t_grid
        .iter()
        .map(|&t| u.interpolate(t.exp()))
        .collect::<Result<Vec<_>>>()?;
    let domain = if t_grid.iter().all(|&t| t >= 0.0) {
        Domain::HalfLine
    } else {
        Domain::FullLine
    };
    SampledFunction1D::new(t_grid.to_vec(), values, domain)
}

pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Conjugate of a closed-form function on `[lo, hi]`: grid maximum followed by
/// golden-section polish in the two cells around the best node.
#[derive(Clone)]
pub struct ConjugateOracle {
    f: ScalarFn,
    samples: SampledFunction1D,
    slopes: Vec<f64>,
    convex: bool,
}

impl std::fmt::Debug for ConjugateOracle {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("ConjugateOracle")
            .field("range", &self.samples.range())
            .field("nodes", &self.samples.len())
            .field("convex", &self.convex)
            .finish()
    }
}

impl ConjugateOracle {
    pub fn new(f: ScalarFn, lo: f64, hi: f64, nodes: usize, domain: Domain) -> Result<Self> {
        let grid = uniform_grid(lo, hi, nodes.max(3));
        let samples = SampledFunction1D::from_fn(grid, domain, |y| f(y))?;
        let slopes = samples.slopes();
        let convex = slopes.windows(2).all(|s| s[1] >= s[0]);
        Ok(Self {
            f,
            samples,
            slopes,
            convex,
        })
    }

    pub fn samples(&self) -> &SampledFunction1D {
        &self.samples
    }

    pub fn check_truncation(&self, x_min: f64, x_max: f64) -> Result<()> {
        self.samples.check_truncation(x_min, x_max)
    }

    /// Polished conjugate value at `x` (a lower bound of the true supremum
    /// over the sampled range).
    pub fn value(&self, x: f64) -> f64 {
        self.value_and_argmax(x).0
    }

    pub fn value_and_argmax(&self, x: f64) -> (f64, f64) {
        let (grid_val, j) = self.samples.conjugate_at_with(x, &self.slopes, self.convex);
        let nodes = self.samples.nodes();
        let a = nodes[j.saturating_sub(1)];
        let b = nodes[(j + 1).min(nodes.len() - 1)];
        let obj = |y: f64| x * y - (self.f)(y);
        let (y_best, v_best) = golden_max(obj, a, b, 100);
        if v_best > grid_val {
            (v_best, y_best)
        } else {
            (grid_val, nodes[j])
        }
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Smallest `Y = start·1.25^k` whose upper-half chord slope of `f` on `[0, Y]`
/// reaches `2·x_max`.
pub fn certify_half_line_range(f: &dyn Fn(f64) -> f64, x_max: f64, start: f64) -> Result<f64> {
    let need = 2.0 * x_max.max(0.0);
    let mut y = start;
    let mut last = (f64::NAN, need);
    for _ in 0..400 {
        let top = f(y);
        let half = f(0.5 * y);
        if !top.is_finite() || !half.is_finite() {
            break;
        }
        let chord = (top - half) / (0.5 * y);
        if chord >= need {
            return Ok(y);
        }
        last = (chord, need);
        y *= 1.25;
        if y > 1e12 {
            break;
        }
    }
    Err(Error::Truncation {
        slope: last.0,
        required: last.1,
    })
}

/// Builds `x ↦ (u(e))*(x) = sup_{t ≥ 0} (x·t − u(e^t))`, certified for `x ≤ x_max`.
pub fn exp_conjugate(u: ScalarFn, x_max: f64, nodes: usize) -> Result<ConjugateOracle> {
    let composed: ScalarFn = Arc::new(move |t: f64| u(t.exp()));
    let top = certify_half_line_range(composed.as_ref(), x_max, 0.5)?;
    let oracle = ConjugateOracle::new(composed, 0.0, top, nodes, Domain::HalfLine)?;
    oracle.check_truncation(0.0, x_max)?;
    Ok(oracle)
}

/// Builds `x ↦ (u*(e))*(x) = sup_{s ≥ 0} (x·s − u*(e^s))`, certified for `x ≤ x_max`.
pub fn exp_conjugate_of_conjugate(
    u: ScalarFn,
    x_max: f64,
    nodes: usize,
) -> Result<ConjugateOracle> {
    let need = 2.0 * x_max.max(0.0);
    let mut top: f64 = 0.5;
    for _ in 0..200 {
        let inner_x_max = top.exp();
        let y_top = certify_half_line_range(u.as_ref(), inner_x_max, 1.0)?;
        let inner = ConjugateOracle::new(u.clone(), 0.0, y_top, nodes, Domain::HalfLine)?;
        inner.check_truncation(0.0, inner_x_max)?;
        let chord = (inner.value(top.exp()) - inner.value((0.5 * top).exp())) / (0.5 * top);
        if chord >= need {
            let inner = Arc::new(inner);
            let w: ScalarFn = Arc::new(move |s: f64| inner.value(s.exp()));
            let oracle = ConjugateOracle::new(w, 0.0, top, nodes, Domain::HalfLine)?;
            oracle.check_truncation(0.0, x_max)?;
            return Ok(oracle);
        }
        top *= 1.25;
    }
    Err(Error::Truncation {
        slope: f64::NAN,
        required: need,
    })
}

/// One evaluation of the conjugate inequality
/// `(u(e))*(x) + (u*(e))*(x) ≤ x·ln x − x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaPoint {
    pub x: f64,
    pub exp_conj: f64,
    pub conj_exp_conj: f64,
    pub bound: f64,
    /// `bound − exp_conj − conj_exp_conj`; nonnegative in exact arithmetic.
    pub gap: f64,
}

/// Evaluates the gap of the conjugate inequality at each `x > 0`.
///
/// `nodes` sets the resolution of every internal grid; doubling it is the
/// refinement used for stability checks.
pub fn lemma_gap(u: ScalarFn, xs: &[f64], nodes: usize) -> Result<Vec<LemmaPoint>> {
    let (x_min, x_max) = min_max(xs)?;
    if !(x_min > 0.0) {
        return Err(Error::InvalidInput("lemma points must be positive".into()));
    }
    let v = exp_conjugate(u.clone(), x_max, nodes)?;
    let w = exp_conjugate_of_conjugate(u, x_max, nodes)?;
    Ok(xs
        .iter()
        .map(|&x| {
            let exp_conj = v.value(x);
            let conj_exp_conj = w.value(x);
            let bound = x * x.ln() - x;
            LemmaPoint {
                x,
                exp_conj,
                conj_exp_conj,
                bound,
                gap: bound - exp_conj - conj_exp_conj,
            }
        })
        .collect())
}

/// `t ↦ φ_m(σ·t)` on `t_grid ⊂ [0, ∞)`.
pub fn directional_weight(
    w: &WeightFamily,
    m: usize,
    sigma: &[f64],
    t_grid: &[f64],
) -> Result<SampledFunction1D> {
    check_unit(w, sigma)?;
    SampledFunction1D::from_fn(t_grid.to_vec(), Domain::HalfLine, |t| {
        let x: Vec<f64> = sigma.iter().map(|s| s * t).collect();
        w.eval(m, &x)
    })
}

fn check_unit(w: &WeightFamily, sigma: &[f64]) -> Result<()> {
    if sigma.len() != w.dim() {
        return Err(Error::InvalidInput(format!(
            "direction has {} components, weight dimension is {}",
            sigma.len(),
            w.dim()
        )));
    }
    if (norm(sigma) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "direction norm {} is not 1",
            norm(sigma)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StirlingFactor {
    pub degree: usize,
    /// `(φ*_{m,σ}(e^t))*(N+1)` per direction, in input order.
    pub exponents: Vec<f64>,
    pub log_factor: f64,
    pub factor: f64,
}

/// `(N+1)^{N+1} / ((N+1)!·exp(inf_σ (φ*_{m,σ}(e^t))*(N+1)))`.
pub fn stirling_bound_factor(
    w: &WeightFamily,
    m: usize,
    degree: usize,
    directions: &[Vec<f64>],
    nodes: usize,
) -> Result<StirlingFactor> {
    if degree < 1 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    if directions.is_empty() {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let x = (degree + 1) as f64;
    let mut exponents = Vec::with_capacity(directions.len());
    for sigma in directions {
        check_unit(w, sigma)?;
        let (w, sigma) = (*w, sigma.clone());
        let profile: ScalarFn = Arc::new(move |t: f64| {
            let p: Vec<f64> = sigma.iter().map(|s| s * t).collect();
            w.eval(m, &p)
        });
        exponents.push(exp_conjugate_of_conjugate(profile, x, nodes)?.value(x));
    }
    let inf = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
    let log_factor = x * x.ln() - ln_factorial(degree + 1) - inf;
    Ok(StirlingFactor {
        degree,
        exponents,
        log_factor,
        factor: log_factor.exp(),
    })
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `φ̃_m(x) = sup_{y ∈ ℝ} (x·y − φ_m(y))` at each point of `x_grid`.
pub fn tilde_weight(
    w: &WeightFamily,
    m: usize,
    x_grid: &[f64],
    nodes: usize,
) -> Result<SampledFunction1D> {
    if !w.is_convex() || w.dim() != 1 {
        return Err(Error::InvalidInput(
            "two-sided conjugate needs a convex one-dimensional weight".into(),
        ));
    }
    let (x_min, x_max) = min_max(x_grid)?;
    let need = 2.0 * x_min.abs().max(x_max.abs());
    let wf = *w;
    let phi: ScalarFn = Arc::new(move |y: f64| wf.profile(m, y));
    // Symmetric range [-Y, Y]: the tail chords are (φ(±Y) − φ(0))/Y.
    let mut top = 1.0;
    loop {
        let chord = (phi(top) - phi(0.0)) / top;
        if chord >= need {
            break;
        }
        top *= 1.25;
        if top > 1e12 {
            return Err(Error::Truncation {
                slope: chord,
                required: need,
            });
        }
    }
    let oracle = ConjugateOracle::new(phi, -top, top, nodes | 1, Domain::FullLine)?;
    oracle.check_truncation(x_min, x_max)?;
    let values = x_grid.iter().map(|&x| oracle.value(x)).collect();
    SampledFunction1D::new(x_grid.to_vec(), values, Domain::FullLine)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiconjugateCheck {
    pub x_max: f64,
    pub y_range: f64,
    /// `max |(u*)* − u|` over interior nodes of the output grid
    pub max_abs: f64,
    /// `max ((u*)* − u)` over all output nodes
    pub max_excess: f64,
}

/// `(u*)*` on `[0, y_max]` for a closed-form `u`, with every intermediate range
/// chosen to pass its truncation certificate. `spacing` is the node spacing
/// of both intermediate grids.
pub fn biconjugate_check(
    u: ScalarFn,
    y_max: f64,
    spacing: f64,
    out_points: usize,
) -> Result<BiconjugateCheck> {
    if !(y_max > 0.0) || !(spacing > 0.0) || out_points < 3 {
        return Err(Error::InvalidInput(
            "biconjugate check needs y_max, spacing > 0".into(),
        ));
    }
    let count = |len: f64| ((len / spacing).ceil() as usize + 1).max(3);
    let ys = uniform_grid(0.0, y_max, out_points);
    // The output points are sample nodes, so u** ≤ u holds there without
    // interpolation error.
    let nodes = |y_range: f64| {
        let mut g = uniform_grid(0.0, y_range, count(y_range));
        g.extend(ys.iter().filter(|&&y| y < y_range));
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    };
    // x range: the chord of u* over its outer half must reach 2·y_max.
    let mut x_max: f64 = 1.0;
    let star = loop {
        let y_range = certify_half_line_range(u.as_ref(), x_max, 1.0)?;
        let us = SampledFunction1D::from_fn(nodes(y_range), Domain::HalfLine, |y| u(y))?;
        let star = us.conjugate(&uniform_grid(0.0, x_max, count(x_max)))?;
        if star.check_truncation(0.0, y_max).is_ok() {
            break (star, y_range);
        }
        x_max *= 1.5;
        if x_max > 1e6 {
            return Err(Error::Truncation {
                slope: f64::NAN,
                required: 2.0 * y_max,
            });
        }
    };
    let (star, y_range) = star;
    let bb = star.conjugate(&ys)?;
    let mut max_abs: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    for (i, (&y, &v)) in ys.iter().zip(bb.values()).enumerate() {
        let d = v - u(y);
        max_excess = max_excess.max(d);
        if i > 0 && i + 1 < ys.len() {
            max_abs = max_abs.max(d.abs());
        }
    }
    Ok(BiconjugateCheck {
        x_max,
        y_range,
        max_abs,
        max_excess,
    })
}

/// Named closed-form test functions on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `y²/2`
    HalfSquare,
    /// `e^y`
    Exp,
    /// `y·ln(1 + y)`
    YLog1p,
    /// `y^{3/2}`
    Pow15,
    /// `min(y², (y − 2)² + 1)`
    NonConvex,
}

impl Profile {
    pub const CONVEX: [Profile; 4] = [
        Profile::HalfSquare,
        Profile::Exp,
        Profile::YLog1p,
        Profile::Pow15,
    ];

    pub fn eval(self, y: f64) -> f64 {
        match self {
            Profile::HalfSquare => 0.5 * y * y,
            Profile::Exp => y.exp(),
            Profile::YLog1p => y * y.ln_1p(),
            Profile::Pow15 => y.abs().powf(1.5),
            Profile::NonConvex => (y * y).min((y - 2.0).powi(2) + 1.0),
        }
    }

    pub fn scalar_fn(self) -> ScalarFn {
        Arc::new(move |y| self.eval(y))
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Profile::HalfSquare => "half_square",
            Profile::Exp => "exp",
            Profile::YLog1p => "y_log1p",
            Profile::Pow15 => "pow15",
            Profile::NonConvex => "nonconvex",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(f: impl Fn(f64) -> f64, hi: f64, n: usize) -> SampledFunction1D {
        SampledFunction1D::from_fn(uniform_grid(0.0, hi, n), Domain::HalfLine, f).unwrap()
    }

    #[test]
    fn quadratic_conjugate() {
        let u = sample(|y| 0.5 * y * y, 10.0, 10001);
        let c = young_conjugate(&u, &[3.0]).unwrap();
        assert_relative_eq!(c.values()[0], 4.5, epsilon = 1e-12);
    }

    #[test]
    fn exponential_conjugate() {
        let u = sample(f64::exp, 10.0, 100_001);
        let c = young_conjugate(&u, &[0.0, 2.0]).unwrap();
        assert_relative_eq!(c.values()[0], -1.0, epsilon = 1e-15);
        assert!((c.values()[1] - (2.0 * 2f64.ln() - 2.0)).abs() < 1e-8);
        assert!(c.values()[1] <= 2.0 * 2f64.ln() - 2.0);
    }

    #[test]
    fn truncation_certificate_rejects_short_range() {
        let u = sample(|y| 0.5 * y * y, 2.0, 101);
        // chord slope over [1, 2] is 1.5
        assert!(matches!(
            young_conjugate(&u, &[1.0]),
            Err(Error::Truncation { .. })
        ));
        assert!(young_conjugate(&u, &[0.7]).is_ok());
    }

    #[test]
    fn fast_path_matches_scan() {
        let u = sample(|y| y * (1.0 + y).ln(), 200.0, 20001);
        let slopes = u.slopes();
        let xs = uniform_grid(0.0, 3.0, 37);
        for &x in &xs {
            let fast = u.conjugate_at_with(x, &slopes, true);
            let scan = u.conjugate_at_with(x, &slopes, false);
            assert_eq!(fast.0, scan.0);
        }
    }

    #[test]
    fn nonconvex_uses_scan() {
        let u = sample(|y| (y * y).min((y - 2.0).powi(2) + 1.0), 6.0, 601);
        assert!(!u.is_convex());
        let (v, j) = u.conjugate_at(0.5);
        let brute = u
            .nodes()
            .iter()
            .zip(u.values())
            .map(|(y, f)| 0.5 * y - f)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(v, brute);
        assert_eq!(0.5 * u.nodes()[j] - u.values()[j], v);
    }

    #[test]
    fn biconjugate_of_quadratic() {
        let u = sample(|y| 0.5 * y * y, 20.0, 4001);
        let xs = uniform_grid(0.0, 7.0, 7001);
        let ys = uniform_grid(0.0, 1.7, 171);
        let bb = biconjugate(&u, &ys, &xs).unwrap();
        for (y, v) in bb.nodes().iter().zip(bb.values()).skip(1).take(169) {
            assert!((v - 0.5 * y * y).abs() < 1e-6, "y={y}");
        }
    }

    #[test]
    fn exp_compose_values() {
        let lin = sample(|y| y, 10.0, 11);
        let c = exp_compose(&lin, &[0.0]).unwrap();
        assert_relative_eq!(c.values()[0], 1.0, epsilon = 1e-15);
        let sq =
            SampledFunction1D::from_fn(uniform_grid(0.0, 10.0, 100_001), Domain::HalfLine, |y| {
                y * y
            })
            .unwrap();
        let c = exp_compose(&sq, &[1.0]).unwrap();
        assert!((c.values()[0] - 1f64.exp().powi(2)).abs() < 1e-7);
        assert!(matches!(exp_compose(&sq, &[3.0]), Err(Error::Range { .. })));
    }

    #[test]
    fn oracle_polish_beats_grid() {
        let f: ScalarFn = Arc::new(f64::exp);
        let o = ConjugateOracle::new(f, 0.0, 5.0, 51, Domain::HalfLine).unwrap();
        let exact = 2.0 * 2f64.ln() - 2.0;
        assert!((o.value(2.0) - exact).abs() < 1e-14);
        assert!(o.value(2.0) <= exact + 1e-15);
    }

    #[test]
    fn lemma_holds_with_equality_for_half_square() {
        let u: ScalarFn = Arc::new(|y: f64| 0.5 * y * y);
        let pts = lemma_gap(u, &[1.0, 2.0, 5.0, 20.0], 2001).unwrap();
        for p in pts {
            assert!(p.gap.abs() < 1e-9, "x={} gap={}", p.x, p.gap);
        }
    }

    #[test]
    fn lemma_gap_exp_at_three() {
        let u: ScalarFn = Arc::new(f64::exp);
        let p = lemma_gap(u, &[3.0], 2001).unwrap()[0];
        assert_relative_eq!(p.bound, 3.0 * 3f64.ln() - 3.0, epsilon = 1e-15);
        assert!(p.gap >= -1e-8);
    }

    #[test]
    fn directional_weight_examples() {
        let w1 = WeightFamily::power(2.0, 1).unwrap();
        let s = directional_weight(&w1, 1, &[1.0], &[0.0, 2.0]).unwrap();
        assert_eq!(s.values()[1], 8.0);
        let w2 = WeightFamily::power(2.0, 2).unwrap();
        let s = directional_weight(&w2, 1, &[1.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(s.values()[0], 18.0);
        assert!(directional_weight(&w2, 1, &[1.0, 1.0], &[1.0, 2.0]).is_err());
        let t = uniform_grid(0.0, 5.0, 11);
        let a = directional_weight(&w2, 2, &[0.6, 0.8], &t).unwrap();
        let b = directional_weight(&w2, 2, &[-1.0, 0.0], &t).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn stirling_factor_power_family_closed_form() {
        // φ(t) = 2t², φ*(s) = s²/8, sup_τ (xτ − e^{2τ}/8) = x(ln(4x) − 1)/2.
        let w = WeightFamily::power(2.0, 1).unwrap();
        let dirs = vec![vec![-1.0], vec![1.0]];
        for n in [1usize, 5, 20] {
            let f = stirling_bound_factor(&w, 1, n, &dirs, 2001).unwrap();
            let x = (n + 1) as f64;
            let e = 0.5 * x * ((4.0 * x).ln() - 1.0);
            assert_relative_eq!(f.exponents[0], f.exponents[1], max_relative = 1e-12);
            assert_relative_eq!(f.exponents[0], e, max_relative = 1e-9);
            assert!(f.factor.is_finite() && f.factor > 0.0);
        }
    }

    #[test]
    fn tilde_weight_power_family() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let t = tilde_weight(&w, 1, &[-2.0, 0.0, 2.0], 4001).unwrap();
        assert_relative_eq!(t.values()[2], 0.5, epsilon = 1e-12);
        assert_relative_eq!(t.values()[0], 0.5, epsilon = 1e-12);
        assert_eq!(t.values()[1], 0.0);
        let bad = WeightFamily::log_penalty(1.0, 2.0, 1).unwrap();
        assert!(tilde_weight(&bad, 1, &[0.0, 1.0], 101).is_err());
    }
}
