//! The three approximation stages: cutoff `f_ν = f·η(·/ν)`, mollification
//! `f_{ν,λ} = (λⁿ/A)·f_ν ∗ H(λ·)`, and the polynomial
//! `V_N = (λⁿ/A)·f_ν ∗ U_N(λ·)`, plus the diagnostics and the driver that
//! chains them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::conjugate::{ln_factorial, stirling_bound_factor};
use crate::error::{Error, Result};
use crate::kernel::{
    estimate_ch, fejer_h, kernel_mass, kernel_tail_mass, mass_on_interval, taylor_u, A1_EXACT,
};
use crate::poly::{binomial, multi_indices, MultiPoly};
use crate::quad::GaussLegendre;
use crate::smoothfn::{
    certified_seminorm, tail_certificate, weighted_ratio, GridSpec, LinearCombination, SharedFn,
    SmoothFunction,
};
use crate::weights::{sphere_directions, Cube, WeightFamily};

/// Highest derivative order of the cutoff oracle.
pub const CUTOFF_MAX_ORDER: usize = 6;

/// The transition `g(t) = ψ(t)/(ψ(t) + ψ(1−t))`, `ψ(t) = e^{−1/t}`, and the
/// cutoff `χ(x) = g(2 − |x|)`.
#[derive(Debug, Clone)]
pub struct Cutoff {
    /// `P_i` with `(d/dw)^i (1 + e^w)^{−1} = P_i(p)`, `p = (1 + e^w)^{−1}`.
    p_polys: Vec<Vec<f64>>,
    sups: Vec<f64>,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self::new()
    }
}

impl Cutoff {
    pub fn new() -> Self {
        let mut p_polys = vec![vec![0.0, 1.0]];
        for i in 0..CUTOFF_MAX_ORDER {
            let p = &p_polys[i];
            // P' · (p² − p)
            let mut next = vec![0.0; p.len() + 1];
            for (k, &c) in p.iter().enumerate().skip(1) {
                let d = k as f64 * c;
                next[k + 1] += d;
                next[k] -= d;
            }
            p_polys.push(next);
        }
        let mut c = Self {
            p_polys,
            sups: Vec::new(),
        };
        let n = 40_000;
        c.sups = (0..=CUTOFF_MAX_ORDER)
            .map(|k| {
                if k == 0 {
                    return 1.0;
                }
                let s = (1..n)
                    .map(|i| c.g_deriv(k, i as f64 / n as f64).abs())
                    .fold(0.0, f64::max);
                1.05 * s
            })
            .collect();
        c
    }

    /// `g^{(k)}(t)`.
    pub fn g_deriv(&self, k: usize, t: f64) -> f64 {
        assert!(
            k <= CUTOFF_MAX_ORDER,
            "cutoff order {k} exceeds {CUTOFF_MAX_ORDER}"
        );
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if t > 0.5 {
            // g(t) = 1 − g(1 − t)
            let v = self.g_deriv(k, 1.0 - t);
            return if k == 0 {
                1.0 - v
            } else if k % 2 == 1 {
                v
            } else {
                -v
            };
        }
        let w = 1.0 / t - 1.0 / (1.0 - t);
        let p = 1.0 / (1.0 + w.exp());
        if k == 0 || p == 0.0 {
            return if k == 0 { p } else { 0.0 };
        }
        // Faà di Bruno with w^{(j)} = (−1)^j j!/t^{j+1} − j!/(1−t)^{j+1}.
        let mut wd = vec![0.0; k + 1];
        let mut fact = 1.0;
        for (j, slot) in wd.iter_mut().enumerate().skip(1) {
            fact *= j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *slot = sign * fact / t.powi(j as i32 + 1) - fact / (1.0 - t).powi(j as i32 + 1);
        }
        let bell = bell_table(k, &wd);
        (1..=k)
            .map(|i| {
                let pi = self.p_polys[i].iter().rev().fold(0.0, |acc, c| acc * p + c);
                pi * bell[k][i]
            })
            .sum()
    }

    /// `χ^{(k)}(x)` with `χ(x) = g(2 − |x|)`.
    pub fn chi_deriv(&self, k: usize, x: f64) -> f64 {
        let a = x.abs();
        if a <= 1.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if a >= 2.0 {
            return 0.0;
        }
        let v = self.g_deriv(k, 2.0 - a);
        if x > 0.0 && k % 2 == 1 {
            -v
        } else {
            v
        }
    }

    pub fn chi(&self, x: f64) -> f64 {
        self.chi_deriv(0, x)
    }

    /// Sampled `sup |χ^{(k)}|` with a 5% margin (exactly 1 for `k = 0`).
    pub fn sup(&self, k: usize) -> f64 {
        self.sups[k]
    }
}

/// Partial Bell polynomials `B_{n,i}(x_1, …)` for `n, i <= k`; `x[0]` unused.
fn bell_table(k: usize, x: &[f64]) -> Vec<Vec<f64>> {
    let mut b = vec![vec![0.0; k + 1]; k + 1];
    b[0][0] = 1.0;
    for n in 1..=k {
        for i in 1..=n {
            let mut s = 0.0;
            for j in 1..=(n - i + 1) {
                s += binomial(n - 1, j - 1) * x[j] * b[n - j][i - 1];
            }
            b[n][i] = s;
        }
    }
    b
}

/// `f_ν(x) = f(x)·Π χ(x_i/ν)`.
#[derive(Clone)]
pub struct CutoffFn {
    f: SharedFn,
    nu: f64,
    cutoff: Arc<Cutoff>,
}

impl CutoffFn {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn inner(&self) -> &SharedFn {
        &self.f
    }

    /// `max_{k ≤ order} Σ_{j ≤ k} C(k, j)·sup|χ^{(j)}|·ν^{−j}`.
    fn leibniz_factor(&self, order: usize) -> f64 {
        (0..=order.min(CUTOFF_MAX_ORDER))
            .map(|k| {
                (0..=k)
                    .map(|j| binomial(k, j) * self.cutoff.sup(j) * self.nu.powi(-(j as i32)))
                    .sum::<f64>()
            })
            .fold(1.0, f64::max)
    }
}

pub fn stage1_cutoff(f: SharedFn, nu: usize) -> Result<CutoffFn> {
    stage1_cutoff_with(f, nu, Arc::new(Cutoff::new()))
}

/// As [`stage1_cutoff`], reusing a prepared cutoff table.
pub fn stage1_cutoff_with(f: SharedFn, nu: usize, cutoff: Arc<Cutoff>) -> Result<CutoffFn> {
    if nu == 0 {
        return Err(Error::InvalidInput("ν must be a positive integer".into()));
    }
    Ok(CutoffFn {
        f,
        nu: nu as f64,
        cutoff,
    })
}

impl SmoothFunction for CutoffFn {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> usize {
        self.f.max_order().min(CUTOFF_MAX_ORDER)
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        let n = x.len();
        let scaled: Vec<f64> = x.iter().map(|v| v / self.nu).collect();
        if scaled.iter().any(|v| v.abs() >= 2.0) {
            return 0.0;
        }
        // Σ_{β ≤ α} C(α, β)·D^{α−β} f·ν^{−|β|}·Π χ^{(β_i)}(x_i/ν)
        let mut beta = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let mut c = 1.0;
            let mut lower = alpha.to_vec();
            for i in 0..n {
                c *= binomial(alpha[i], beta[i])
                    * self.cutoff.chi_deriv(beta[i], scaled[i])
                    * self.nu.powi(-(beta[i] as i32));
                lower[i] -= beta[i];
            }
            if c != 0.0 {
                total += c * self.f.deriv(&lower, x);
            }
            // next β
            let mut i = 0;
            loop {
                if i == n {
                    return total;
                }
                if beta[i] < alpha[i] {
                    beta[i] += 1;
                    break;
                }
                beta[i] = 0;
                i += 1;
            }
        }
    }

    fn support(&self) -> Option<Cube> {
        let r = 2.0 * self.nu;
        let r = match self.f.support() {
            Some(c) => c.radius.min(r),
            None => r,
        };
        Cube::new(r, self.dim()).ok()
    }

    fn log_envelope(&self, order: usize, r: f64) -> Option<f64> {
        if order > CUTOFF_MAX_ORDER {
            return None;
        }
        let n = self.dim() as f64;
        if r > 2.0 * self.nu * n.sqrt() {
            return Some(f64::NEG_INFINITY);
        }
        Some(self.f.log_envelope(order, r)? + n * self.leibniz_factor(order).ln())
    }

    fn name(&self) -> String {
        format!("cut({}, ν={})", self.f.name(), self.nu)
    }
}

/// Composite Gauss–Legendre settings for integrals over a support cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadSpec {
    /// Panel width; `None` picks `min(0.5/λ, R/16)`.
    pub panel_width: Option<f64>,
    pub nodes_per_panel: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            panel_width: None,
            nodes_per_panel: 12,
        }
    }
}

/// Tensor-product quadrature on a cube: shared axis nodes and weights.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AxisRule {
    pub fn on_cube(radius: f64, width: f64, per_panel: usize) -> Self {
        let panels = ((2.0 * radius / width).ceil() as usize).max(1);
        let (nodes, weights) =
            GaussLegendre::new(per_panel).composite_points(-radius, radius, panels);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and weights of the `dim`-fold tensor product (first axis slowest).
    pub fn tensor(&self, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let m = self.len();
        let total = m.pow(dim as u32);
        let mut pts = Vec::with_capacity(total);
        let mut ws = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut p = vec![0.0; dim];
            let mut w = 1.0;
            for j in (0..dim).rev() {
                let i = rem % m;
                rem /= m;
                p[j] = self.nodes[i];
                w *= self.weights[i];
            }
            pts.push(p);
            ws.push(w);
        }
        (pts, ws)
    }
}

fn support_of(f: &dyn SmoothFunction) -> Result<Cube> {
    f.support()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no compact support", f.name())))
}

/// `f_{ν,λ}(x) = (λⁿ/A)∫ f_ν(y)·H(λ(x − y)) dy` with `D^α` moved onto `f_ν`.
pub struct Mollified {
    f: SharedFn,
    lambda: f64,
    mass: f64,
    rule: AxisRule,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    half_sin: Vec<f64>,
    half_cos: Vec<f64>,
    cache: RwLock<HashMap<Vec<usize>, Arc<Vec<f64>>>>,
}

impl Mollified {
    pub fn new(f: SharedFn, lambda: f64, quad: QuadSpec) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(Error::InvalidInput(format!(
                "λ must exceed 1, got {lambda}"
            )));
        }
        let support = support_of(f.as_ref())?;
        let limit = 0.5 / lambda;
        let width = quad
            .panel_width
            .unwrap_or_else(|| limit.min(support.radius / 16.0));
        if width > limit {
            return Err(Error::Resolution { width, limit });
        }
        let rule = AxisRule::on_cube(support.radius, width, quad.nodes_per_panel);
        let (points, weights) = rule.tensor(f.dim());
        let half_sin = rule
            .nodes
            .iter()
            .map(|y| (0.5 * lambda * y).sin())
            .collect();
        let half_cos = rule
            .nodes
            .iter()
            .map(|y| (0.5 * lambda * y).cos())
            .collect();
        Ok(Self {
            mass: kernel_mass(f.dim()),
            f,
            lambda,
            rule,
            points,
            weights,
            half_sin,
            half_cos,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inner(&self) -> &SharedFn {
        &self.f
    }

    /// `w_j·D^α f_ν(y_j)` at the quadrature nodes.
    fn weighted_node_values(&self, alpha: &[usize]) -> Arc<Vec<f64>> {
        if let Some(v) = self.cache.read().unwrap().get(alpha) {
            return v.clone();
        }
        let vals = self.f.deriv_many(alpha, &self.points);
        let v: Arc<Vec<f64>> =
            Arc::new(vals.iter().zip(&self.weights).map(|(a, w)| a * w).collect());
        self.cache
            .write()
            .unwrap()
            .insert(alpha.to_vec(), v.clone());
        v
    }

    /// `h(λ(x − y_j))` for every axis node.
    fn axis_kernel(&self, x: f64) -> Vec<f64> {
        let sx = (0.5 * self.lambda * x).sin();
        let cx = (0.5 * self.lambda * x).cos();
        self.rule
            .nodes
            .iter()
            .zip(self.half_sin.iter().zip(&self.half_cos))
            .map(|(&y, (&sy, &cy))| {
                let z = self.lambda * (x - y);
                if z.abs() < 1e-4 {
                    fejer_h(z)
                } else {
                    let s = sx * cy - cx * sy;
                    s * s / (z * z)
                }
            })
            .collect()
    }

    fn eval_with(&self, wv: &[f64], x: &[f64]) -> f64 {
        let n = x.len();
        let m = self.rule.len();
        let axes: Vec<Vec<f64>> = x.iter().map(|&t| self.axis_kernel(t)).collect();
        let sum: f64 = match n {
            1 => axes[0].iter().zip(wv).map(|(h, v)| h * v).sum(),
            _ => {
                let mut s = 0.0;
                for (idx, v) in wv.iter().enumerate() {
                    if *v == 0.0 {
                        continue;
                    }
                    let mut rem = idx;
                    let mut k = 1.0;
                    for axis in axes.iter().rev() {
                        k *= axis[rem % m];
                        rem /= m;
                    }
                    s += k * v;
                }
                s
            }
        };
        self.lambda.powi(n as i32) / self.mass * sum
    }

    /// `max_{|α| ≤ order} ‖D^α f_ν‖_{L¹}` by the same quadrature.
    pub fn l1_norm(&self, order: usize) -> f64 {
        multi_indices(self.dim(), order)
            .iter()
            .map(|a| {
                self.weighted_node_values(a)
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl SmoothFunction for Mollified {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> usize {
        self.f.max_order()
    }

    fn deriv(&self, alpha: &[usize], x: &[f64]) -> f64 {
        let wv = self.weighted_node_values(alpha);
        self.eval_with(&wv, x)
    }

    fn deriv_many(&self, alpha: &[usize], xs: &[Vec<f64>]) -> Vec<f64> {
        let wv = self.weighted_node_values(alpha);
        xs.par_iter().map(|x| self.eval_with(&wv, x)).collect()
    }

    fn log_envelope(&self, order: usize, _r: f64) -> Option<f64> {
        if order > self.max_order() {
            return None;
        }
        // |D^α f_{ν,λ}| ≤ (λⁿ/A)·sup H·‖D^α f_ν‖_{L¹}, sup H = 4^{−n}
        let n = self.dim() as i32;
        let b = self.lambda.powi(n) / self.mass * 0.25f64.powi(n) * self.l1_norm(order);
        Some(if b > 0.0 { b.ln() } else { f64::NEG_INFINITY })
    }

    fn name(&self) -> String {
        format!("moll({}, λ={})", self.f.name(), self.lambda)
    }
}

pub fn stage2_mollify(f_nu: SharedFn, lambda: f64, quad: QuadSpec) -> Result<Mollified> {
    Mollified::new(f_nu, lambda, quad)
}

/// Near/far decomposition of `D^α f_{ν,λ}(x) − D^α f_ν(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitError {
    pub lambda: f64,
    pub x: f64,
    /// Split radius `r(λ) = λ^{−2n/(2n+1)}`.
    pub radius: f64,
    pub i1: f64,
    pub i2: f64,
    pub i1_bound: f64,
    pub i2_bound: f64,
    /// `D^α f_{ν,λ}(x) − D^α f_ν(x)` from the mollifier's own quadrature.
    pub direct: f64,
    /// `max_{|β| ≤ m+1} |D^β f_ν|`
    pub k_nu_m: f64,
}

/// `K_{ν,m} = max_{|β| ≤ m+1} sup |D^β f_ν|` on a grid over the support.
pub fn k_nu_m(f_nu: &dyn SmoothFunction, m: usize, points_per_axis: usize) -> Result<f64> {
    let s = support_of(f_nu)?;
    let g = GridSpec::new(s.radius, f_nu.dim(), points_per_axis)?;
    let (pts, _) = g.points();
    let mut best: f64 = 0.0;
    for a in multi_indices(f_nu.dim(), m + 1) {
        for v in f_nu.deriv_many(&a, &pts) {
            best = best.max(v.abs());
        }
    }
    Ok(best)
}

/// One-dimensional split of the mollification error at `x` into the part
/// from `|x − y| ≤ r(λ)` and the rest, with both bounds evaluated.
pub fn split_error(
    moll: &Mollified,
    alpha: usize,
    x: f64,
    m: usize,
    k_nu: f64,
) -> Result<SplitError> {
    let f = moll.inner().clone();
    if f.dim() != 1 {
        return Err(Error::InvalidInput("split_error is one-dimensional".into()));
    }
    let lambda = moll.lambda();
    let support = support_of(f.as_ref())?.radius;
    let n = 1.0;
    let r = lambda.powf(-2.0 * n / (2.0 * n + 1.0));
    let rho = lambda * r;
    let a = kernel_mass(1);
    let fx = f.deriv(&[alpha], &[x]);
    let rule = GaussLegendre::new(16);
    let width = 0.25 / lambda;
    let integrate = |lo: f64, hi: f64| -> f64 {
        let (lo, hi) = (lo.max(-support), hi.min(support));
        if hi <= lo {
            return 0.0;
        }
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        rule.composite(lo, hi, panels, |y| {
            f.deriv(&[alpha], &[y]) * fejer_h(lambda * (x - y))
        })
    };
    let near = lambda / a * integrate(x - r, x + r);
    let near_mass = mass_on_interval(rho) / a;
    let i1 = near - fx * near_mass;
    let far = lambda / a * (integrate(-support, x - r) + integrate(x + r, support));
    let far_mass = kernel_tail_mass(1, rho)? / a;
    let i2 = far - fx * far_mass;
    let ch = estimate_ch(0, 1)?;
    let gamma = PI.sqrt() / 2.0;
    let i1_bound =
        PI.powf(n / 2.0) * n.sqrt() * ch * k_nu * lambda.powf(-n / (2.0 * n + 1.0)) / (a * gamma);
    let i2_bound = 2.0 * ch * k_nu / a * kernel_tail_mass(1, rho)?;
    let direct = moll.deriv(&[alpha], &[x]) - fx;
    let _ = m;
    Ok(SplitError {
        lambda,
        x,
        radius: r,
        i1,
        i2,
        i1_bound,
        i2_bound,
        direct,
        k_nu_m: k_nu,
    })
}

/// `M_β = ∫ f_ν(y)·y^β dy` for `|β| <= max_degree`, keyed by multi-index.
pub fn moments(
    f_nu: &dyn SmoothFunction,
    max_degree: usize,
    panels_per_unit: f64,
) -> Result<HashMap<Vec<usize>, f64>> {
    let s = support_of(f_nu)?;
    let width = 1.0 / panels_per_unit;
    let rule = AxisRule::on_cube(s.radius, width, 16);
    let (pts, ws) = rule.tensor(f_nu.dim());
    let vals = f_nu.deriv_many(&vec![0; f_nu.dim()], &pts);
    let weighted: Vec<f64> = vals.iter().zip(&ws).map(|(v, w)| v * w).collect();
    let idx = multi_indices(f_nu.dim(), max_degree);
    let out: Vec<f64> = idx
        .par_iter()
        .map(|beta| {
            pts.iter()
                .zip(&weighted)
                .map(|(y, v)| {
                    v * y
                        .iter()
                        .zip(beta)
                        .map(|(t, &k)| t.powi(k as i32))
                        .product::<f64>()
                })
                .sum()
        })
        .collect();
    Ok(idx.into_iter().zip(out).collect())
}

/// Default moment resolution: 20 panels per unit length, 16 nodes each.
pub const MOMENT_PANELS_PER_UNIT: f64 = 20.0;

/// `V_N` assembled from a moment table:
/// coefficient of `x^{γ−β}` is `(λⁿ/A)·u_γ·λ^{|γ|}·C(γ,β)·(−1)^{|β|}·M_β`.
pub fn stage3_from_moments(
    dim: usize,
    lambda: f64,
    n_deg: usize,
    moments: &HashMap<Vec<usize>, f64>,
) -> Result<MultiPoly> {
    let u = taylor_u(n_deg, dim);
    let scale = lambda.powi(dim as i32) / kernel_mass(dim);
    let mut out = MultiPoly::zero(dim);
    for (gamma, ug) in u.terms() {
        let total: usize = gamma.iter().sum();
        let lg = ug * lambda.powi(total as i32) * scale;
        for beta in sub_indices(gamma) {
            let mb = *moments
                .get(&beta)
                .ok_or_else(|| Error::InvalidInput(format!("moment {beta:?} missing")))?;
            let c: f64 = gamma
                .iter()
                .zip(&beta)
                .map(|(&g, &b)| binomial(g, b))
                .product();
            let sign = if beta.iter().sum::<usize>() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let rest: Vec<usize> = gamma.iter().zip(&beta).map(|(g, b)| g - b).collect();
            out.add_term(&rest, lg * c * sign * mb);
        }
    }
    Ok(out)
}

fn sub_indices(gamma: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &g in gamma {
        let mut next = Vec::new();
        for prefix in &out {
            for b in 0..=g {
                let mut p = prefix.clone();
                p.push(b);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub fn stage3_polynomial(
    f_nu: &dyn SmoothFunction,
    lambda: f64,
    n_deg: usize,
) -> Result<MultiPoly> {
    let m = moments(f_nu, n_deg, MOMENT_PANELS_PER_UNIT)?;
    stage3_from_moments(f_nu.dim(), lambda, n_deg, &m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cutoff,
    Mollify,
    Polynomial,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    /// ν, λ or N
    pub parameter: f64,
    /// Grid value plus tail certificate.
    pub measured: f64,
    pub grid_part: f64,
    pub tail_part: f64,
    pub bound: f64,
    /// Wall time; left empty unless timing was requested.
    pub seconds: Option<f64>,
}

/// Certified `q_m(g)`: grid maximum on `Π_R` plus the tail certificate at `R`,
/// with `R` grown by 1.25 from `start` until the tail is below `tail_tol`.
pub fn certified_error(
    g: &dyn SmoothFunction,
    w: &WeightFamily,
    m: usize,
    points_per_axis: usize,
    start: f64,
    tail_tol: f64,
) -> Result<(f64, f64, f64)> {
    let c = certified_seminorm(g, m, m, w, points_per_axis, start, tail_tol)?;
    Ok((c.grid.value, c.tail.bound, c.tail.radius))
}

/// `q_m(f − f_ν)` for each ν, with the step-1 tail certificate at `r = ν` as bound.
pub fn stage1_error_curve(
    f: SharedFn,
    w: &WeightFamily,
    m: usize,
    nus: &[usize],
    points_per_axis: usize,
    timed: bool,
) -> Result<Vec<StageReport>> {
    let cutoff = Arc::new(Cutoff::new());
    nus.iter()
        .map(|&nu| {
            let t0 = Instant::now();
            let f_nu: SharedFn = Arc::new(stage1_cutoff_with(f.clone(), nu, cutoff.clone())?);
            let diff = LinearCombination::difference(f.clone(), f_nu);
            let bound = tail_certificate(&diff, w, m, nu as f64)?.bound;
            let (grid, tail, _) =
                certified_error(&diff, w, m, points_per_axis, 2.0 * nu as f64 + 1.0, 1e-14)?;
            Ok(StageReport {
                stage: Stage::Cutoff,
                parameter: nu as f64,
                measured: grid + tail,
                grid_part: grid,
                tail_part: tail,
                bound,
                seconds: timed.then(|| t0.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

/// `q_m(f_ν − f_{ν,λ})` along `lambdas`; the bound column is the split
/// bound `|I₁| + |I₂|` (valid for the unweighted sup, hence for `θ_m ≥ 1`).
#[allow(clippy::too_many_arguments)]
pub fn stage2_error_curve(
    f_nu: SharedFn,
    w: &WeightFamily,
    m: usize,
    lambdas: &[f64],
    points_per_axis: usize,
    quad: QuadSpec,
    tail_tol: f64,
    timed: bool,
) -> Result<Vec<StageReport>> {
    let k_nu = k_nu_m(f_nu.as_ref(), m, 4001.min(points_per_axis.max(1001)))?;
    let support = support_of(f_nu.as_ref())?.radius;
    let n = f_nu.dim() as f64;
    lambdas
        .iter()
        .map(|&lambda| {
            let t0 = Instant::now();
            let moll: SharedFn = Arc::new(Mollified::new(f_nu.clone(), lambda, quad)?);
            let diff = LinearCombination::difference(f_nu.clone(), moll);
            let (grid, tail, _) =
                certified_error(&diff, w, m, points_per_axis, support + 1.0, tail_tol)?;
            let ch = estimate_ch(0, f_nu.dim())?;
            let a = kernel_mass(f_nu.dim());
            let gamma = gamma_half_plus_one(f_nu.dim());
            let i1b = PI.powf(n / 2.0) * n.sqrt() * ch * k_nu * lambda.powf(-n / (2.0 * n + 1.0))
                / (a * gamma);
            let rho = lambda.powf(1.0 / (2.0 * n + 1.0));
            let i2b = 2.0 * ch * k_nu / a * kernel_tail_mass(f_nu.dim(), rho)?;
            Ok(StageReport {
                stage: Stage::Mollify,
                parameter: lambda,
                measured: grid + tail,
                grid_part: grid,
                tail_part: tail,
                bound: i1b + i2b,
                seconds: timed.then(|| t0.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

fn gamma_half_plus_one(n: usize) -> f64 {
    match n {
        1 => PI.sqrt() / 2.0,
        2 => 1.0,
        _ => {
            // Γ(n/2 + 1) by the recurrence from Γ(1) or Γ(1/2)
            let mut g = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
            let mut s = if n.is_multiple_of(2) { 1.0 } else { 0.5 };
            while s <= n as f64 / 2.0 {
                g *= s;
                s += 1.0;
            }
            g
        }
    }
}

/// `q_m(g − p)` for many polynomials `p` against one fixed `g`, whose
/// derivatives on the grid are computed once.
pub struct PolyErrorProbe<'a> {
    g: SharedFn,
    w: &'a WeightFamily,
    m: usize,
    radius: f64,
    pts: Vec<Vec<f64>>,
    log_w: Vec<f64>,
    alphas: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

impl<'a> PolyErrorProbe<'a> {
    pub fn new(
        g: SharedFn,
        w: &'a WeightFamily,
        m: usize,
        radius: f64,
        points_per_axis: usize,
    ) -> Result<Self> {
        let grid = GridSpec::new(radius, g.dim(), points_per_axis)?;
        let (pts, _) = grid.points();
        let log_w = pts.par_iter().map(|x| w.log_theta(m, x)).collect();
        let alphas = multi_indices(g.dim(), m);
        let values = alphas.iter().map(|a| g.deriv_many(a, &pts)).collect();
        Ok(Self {
            g,
            w,
            m,
            radius,
            pts,
            log_w,
            alphas,
            values,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Grid value and tail certificate of `q_m(g − p)`.
    pub fn error(&self, p: &MultiPoly) -> Result<(f64, f64)> {
        let mut grid: f64 = 0.0;
        for (a, gv) in self.alphas.iter().zip(&self.values) {
            let part = self
                .pts
                .par_iter()
                .zip(gv.par_iter())
                .zip(self.log_w.par_iter())
                .map(|((x, v), lw)| weighted_ratio(v - p.deriv_at(a, x), *lw))
                .reduce(|| 0.0, f64::max);
            if part.is_nan() {
                return Err(Error::Certificate(
                    "polynomial evaluation is not finite".into(),
                ));
            }
            grid = grid.max(part);
        }
        let pf: SharedFn = Arc::new(p.clone());
        let d = LinearCombination::difference(self.g.clone(), pf);
        let tail = tail_certificate(&d, self.w, self.m, self.radius)?.bound;
        Ok((grid, tail))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage3Curve {
    pub reports: Vec<StageReport>,
    /// Fitted `C₁, C₂` in `error(N) ≈ C₁·C₂^N/(N+1)!`.
    pub c1: f64,
    pub c2: f64,
    pub radius: f64,
}

/// Measured `q_m(f_{ν,λ} − V_N)` for each `N` in `degrees`.
#[allow(clippy::too_many_arguments)]
pub fn stage3_error_curve(
    f_nu: SharedFn,
    lambda: f64,
    m: usize,
    degrees: &[usize],
    w: &WeightFamily,
    points_per_axis: usize,
    quad: QuadSpec,
    timed: bool,
) -> Result<Stage3Curve> {
    let dim = f_nu.dim();
    let n_max = degrees.iter().cloned().max().unwrap_or(0);
    let moll: SharedFn = Arc::new(Mollified::new(f_nu.clone(), lambda, quad)?);
    let table = moments(f_nu.as_ref(), n_max, MOMENT_PANELS_PER_UNIT)?;
    let polys: Vec<MultiPoly> = degrees
        .iter()
        .map(|&n| stage3_from_moments(dim, lambda, n, &table))
        .collect::<Result<_>>()?;
    // Common box: grow until the largest-degree tail is negligible.
    let mut radius = support_of(f_nu.as_ref())?.radius + 1.0;
    let last: SharedFn = Arc::new(
        polys
            .last()
            .cloned()
            .unwrap_or_else(|| MultiPoly::zero(dim)),
    );
    loop {
        let d = LinearCombination::difference(moll.clone(), last.clone());
        if tail_certificate(&d, w, m, radius)?.bound < 1e-14 || radius > 1e3 {
            break;
        }
        radius *= 1.25;
    }
    let probe = PolyErrorProbe::new(moll, w, m, radius, points_per_axis)?;
    let dirs = sphere_directions(dim);
    let reports: Vec<StageReport> = degrees
        .par_iter()
        .zip(polys.par_iter())
        .map(|(&n, p)| {
            let t0 = Instant::now();
            let (grid_part, tail_part) = probe.error(p)?;
            let bound = stirling_bound_factor(w, m, n.max(1), &dirs, 4001)?.factor;
            Ok(StageReport {
                stage: Stage::Polynomial,
                parameter: n as f64,
                measured: grid_part + tail_part,
                grid_part,
                tail_part,
                bound,
                seconds: timed.then(|| t0.elapsed().as_secs_f64()),
            })
        })
        .collect::<Result<_>>()?;
    let (c1, c2) = fit_factorial_decay(&reports);
    Ok(Stage3Curve {
        reports,
        c1,
        c2,
        radius,
    })
}

/// Least squares of `ln error(N) + ln (N+1)! = ln C₁ + N·ln C₂` over the
/// points above the rounding floor `1e−13`.
pub fn fit_factorial_decay(reports: &[StageReport]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.measured > 1e-13 && r.measured.is_finite())
        .map(|r| {
            let n = r.parameter;
            (n, r.measured.ln() + ln_factorial(n as usize + 1))
        })
        .collect();
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    ((my - slope * mx).exp(), slope.exp())
}

/// Driver limits for [`pipeline_approximate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineLimits {
    pub nu_max: usize,
    pub lambda_start: f64,
    pub lambda_max: f64,
    pub n_max: usize,
    pub points_per_axis: usize,
}

impl Default for PipelineLimits {
    fn default() -> Self {
        Self {
            nu_max: 12,
            lambda_start: 2.0,
            lambda_max: 1024.0,
            n_max: 60,
            points_per_axis: 2049,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub nu: usize,
    pub lambda: f64,
    pub degree: usize,
    pub poly: MultiPoly,
    pub reports: Vec<StageReport>,
    /// Re-measured `q_m(f − V_N)` (grid plus tail) and the box radius used.
    pub final_error: f64,
    pub final_radius: f64,
}

/// Greedy `ε/3` split: ν by the step-1 certificate, λ by doubling until the
/// measured mollification error drops below `ε/3`, then the smallest `N`
/// whose measured polynomial error is below `ε/3`.
pub fn pipeline_approximate(
    f: SharedFn,
    w: &WeightFamily,
    m: usize,
    eps: f64,
    limits: PipelineLimits,
) -> Result<PipelineResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("ε must be positive".into()));
    }
    let third = eps / 3.0;
    let dim = f.dim();
    let cutoff = Arc::new(Cutoff::new());
    let mut reports = Vec::new();

    let mut chosen = None;
    for nu in 1..=limits.nu_max {
        let f_nu: SharedFn = Arc::new(stage1_cutoff_with(f.clone(), nu, cutoff.clone())?);
        let diff = LinearCombination::difference(f.clone(), f_nu.clone());
        let bound = tail_certificate(&diff, w, m, nu as f64)?.bound;
        if bound < third {
            reports.push(StageReport {
                stage: Stage::Cutoff,
                parameter: nu as f64,
                measured: bound,
                grid_part: 0.0,
                tail_part: bound,
                bound,
                seconds: None,
            });
            chosen = Some((nu, f_nu));
            break;
        }
    }
    let (nu, f_nu) = chosen.ok_or_else(|| {
        Error::Budget(format!(
            "no ν <= {} meets the cutoff target {third:e}",
            limits.nu_max
        ))
    })?;
    let support = 2.0 * nu as f64;

    let mut lambda = limits.lambda_start;
    let moll: SharedFn = loop {
        if lambda > limits.lambda_max {
            return Err(Error::Budget(format!(
                "λ above {} needed for the mollification target {third:e}",
                limits.lambda_max
            )));
        }
        let moll: SharedFn = Arc::new(Mollified::new(f_nu.clone(), lambda, QuadSpec::default())?);
        let diff = LinearCombination::difference(f_nu.clone(), moll.clone());
        let (grid, tail, _) = certified_error(
            &diff,
            w,
            m,
            limits.points_per_axis,
            support + 1.0,
            third / 100.0,
        )?;
        reports.push(StageReport {
            stage: Stage::Mollify,
            parameter: lambda,
            measured: grid + tail,
            grid_part: grid,
            tail_part: tail,
            bound: f64::NAN,
            seconds: None,
        });
        if grid + tail < third {
            break moll;
        }
        lambda *= 2.0;
    };

    let table = moments(f_nu.as_ref(), limits.n_max, MOMENT_PANELS_PER_UNIT)?;
    let mut best = f64::INFINITY;
    let mut probe = PolyErrorProbe::new(moll.clone(), w, m, support + 1.0, limits.points_per_axis)?;
    for n in 0..=limits.n_max {
        let p = stage3_from_moments(dim, lambda, n, &table)?;
        let mut measured = loop {
            match probe.error(&p) {
                Ok((g, t)) if t > third / 100.0 && probe.radius() < 4.0 * support + 10.0 => {
                    let r = probe.radius() * 1.25;
                    probe = PolyErrorProbe::new(moll.clone(), w, m, r, limits.points_per_axis)?;
                    let _ = g;
                }
                Ok((g, t)) => break g + t,
                Err(Error::Certificate(_)) => break f64::INFINITY,
                Err(e) => return Err(e),
            }
        };
        if !measured.is_finite() {
            measured = f64::INFINITY;
        }
        best = best.min(measured);
        reports.push(StageReport {
            stage: Stage::Polynomial,
            parameter: n as f64,
            measured,
            grid_part: measured,
            tail_part: 0.0,
            bound: f64::NAN,
            seconds: None,
        });
        if measured < third {
            let pf: SharedFn = Arc::new(p.clone());
            let total = LinearCombination::difference(f.clone(), pf);
            let (g, t, r) = certified_error(
                &total,
                w,
                m,
                limits.points_per_axis,
                support + 1.0,
                third / 100.0,
            )?;
            reports.push(StageReport {
                stage: Stage::Pipeline,
                parameter: n as f64,
                measured: g + t,
                grid_part: g,
                tail_part: t,
                bound: eps,
                seconds: None,
            });
            return Ok(PipelineResult {
                nu,
                lambda,
                degree: n,
                poly: p,
                reports,
                final_error: g + t,
                final_radius: r,
            });
        }
    }
    Err(Error::Budget(format!(
        "N > {} needed at ν = {nu}, λ = {lambda}; best polynomial error {best:e} against target {third:e}",
        limits.n_max
    )))
}

/// `A₁` is used as the normaliser throughout; exposed for reports.
pub fn kernel_normaliser(dim: usize) -> f64 {
    let _ = A1_EXACT;
    kernel_mass(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{Fleet, FleetFunction};
    use crate::smoothfn::{fd_check, Shifted, Zero};
    use approx::assert_relative_eq;

    fn bump() -> SharedFn {
        Arc::new(FleetFunction::new(Fleet::Bump, 1))
    }

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::new();
        assert_eq!(c.chi(0.0), 1.0);
        assert_eq!(c.chi(1.0), 1.0);
        assert_eq!(c.chi(-1.0), 1.0);
        assert_eq!(c.chi(2.0), 0.0);
        assert_eq!(c.chi(-2.5), 0.0);
        assert_relative_eq!(c.chi(1.5), 0.5, epsilon = 1e-15);
        for i in 0..=4000 {
            let x = -3.0 + 6.0 * i as f64 / 4000.0;
            let v = c.chi(x);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, c.chi(-x));
        }
    }

    #[test]
    fn cutoff_derivatives_match_fd() {
        struct Chi(Cutoff);
        impl SmoothFunction for Chi {
            fn dim(&self) -> usize {
                1
            }
            fn max_order(&self) -> usize {
                CUTOFF_MAX_ORDER
            }
            fn deriv(&self, a: &[usize], x: &[f64]) -> f64 {
                self.0.chi_deriv(a[0], x[0])
            }
            fn name(&self) -> String {
                "chi".into()
            }
        }
        let chi = Chi(Cutoff::new());
        for &x in &[1.1, 1.3, 1.5, 1.62, 1.9, -1.2, -1.77] {
            for k in 1..=CUTOFF_MAX_ORDER {
                let scale = 1.0 + chi.deriv(&[k], &[x]).abs();
                let r = fd_check(&chi, &[k], &[x], 1e-4).unwrap();
                assert!(r < 1e-5 * scale, "k={k} x={x} r={r}");
            }
        }
    }

    #[test]
    fn stage1_identity_and_support() {
        let f: SharedFn = Arc::new(FleetFunction::new(Fleet::Cosh, 2));
        let f_nu = stage1_cutoff(f.clone(), 2).unwrap();
        for x in [[0.5, -1.9], [1.99, 1.99], [-2.0, 0.0]] {
            assert_eq!(f_nu.eval(&x), f.eval(&x));
            assert_eq!(f_nu.deriv(&[1, 1], &x), f.deriv(&[1, 1], &x));
        }
        for x in [[4.0, 0.0], [0.0, -4.5], [5.0, 5.0]] {
            assert_eq!(f_nu.eval(&x), 0.0);
            assert_eq!(f_nu.deriv(&[2, 1], &x), 0.0);
        }
        assert_eq!(f_nu.support().unwrap().radius, 4.0);
        let r = fd_check(&f_nu, &[1, 2], &[3.1, -2.7], 1e-4).unwrap();
        assert!(r < 1e-5, "{r}");
    }

    #[test]
    fn mollifier_linear_and_resolution() {
        let zero: SharedFn = Arc::new(FleetFunction::new(Fleet::Bump, 1));
        let m = Mollified::new(zero.clone(), 10.0, QuadSpec::default()).unwrap();
        let two: SharedFn = Arc::new(LinearCombination::scaled(2.0, zero));
        let m2 = Mollified::new(two, 10.0, QuadSpec::default()).unwrap();
        for x in [-1.3, 0.0, 0.4] {
            assert_relative_eq!(m2.eval(&[x]), 2.0 * m.eval(&[x]), epsilon = 1e-15);
        }
        let bad = QuadSpec {
            panel_width: Some(0.1),
            nodes_per_panel: 8,
        };
        assert!(matches!(
            Mollified::new(bump(), 10.0, bad),
            Err(Error::Resolution { .. })
        ));
        let z = Mollified::new(Arc::new(ZeroCompact), 10.0, QuadSpec::default()).unwrap();
        assert_eq!(z.eval(&[0.3]), 0.0);
    }

    struct ZeroCompact;
    impl SmoothFunction for ZeroCompact {
        fn dim(&self) -> usize {
            1
        }
        fn max_order(&self) -> usize {
            8
        }
        fn deriv(&self, _: &[usize], _: &[f64]) -> f64 {
            0.0
        }
        fn support(&self) -> Option<Cube> {
            Cube::new(1.0, 1).ok()
        }
        fn name(&self) -> String {
            "zero".into()
        }
    }

    #[test]
    fn mollifier_translation_equivariant() {
        let a = 0.375;
        let shifted: SharedFn = Arc::new(Shifted::new(bump(), vec![a]));
        let q = QuadSpec {
            panel_width: Some(1.0 / 64.0),
            nodes_per_panel: 12,
        };
        let m0 = Mollified::new(bump(), 8.0, q).unwrap();
        let m1 = Mollified::new(shifted, 8.0, q).unwrap();
        for x in [-0.9, 0.1, 0.8, 1.6] {
            assert!((m1.eval(&[x + a]) - m0.eval(&[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn split_parts_sum_to_direct() {
        let m = Mollified::new(bump(), 100.0, QuadSpec::default()).unwrap();
        let k = k_nu_m(bump().as_ref(), 1, 4001).unwrap();
        for alpha in 0..=1 {
            let s = split_error(&m, alpha, 0.0, 1, k).unwrap();
            assert!((s.i1 + s.i2 - s.direct).abs() < 1e-10, "{s:?}");
            assert!(s.i1.abs() <= s.i1_bound && s.i2.abs() <= s.i2_bound);
        }
    }

    #[test]
    fn moments_symmetry_and_scaling() {
        let t = moments(bump().as_ref(), 6, MOMENT_PANELS_PER_UNIT).unwrap();
        for k in [1, 3, 5] {
            assert!(t[&vec![k]].abs() < 1e-15);
        }
        let twice: SharedFn = Arc::new(LinearCombination::scaled(3.0, bump()));
        let t3 = moments(twice.as_ref(), 6, MOMENT_PANELS_PER_UNIT).unwrap();
        for k in 0..=6 {
            assert_relative_eq!(t3[&vec![k]], 3.0 * t[&vec![k]], max_relative = 1e-14);
        }
        let finer = moments(bump().as_ref(), 6, 2.0 * MOMENT_PANELS_PER_UNIT).unwrap();
        for k in 0..=6 {
            assert!((finer[&vec![k]] - t[&vec![k]]).abs() < 1e-10);
        }
    }

    #[test]
    fn v0_is_constant_mass_times_quarter() {
        let lambda = 2.0;
        let v0 = stage3_polynomial(bump().as_ref(), lambda, 0).unwrap();
        let t = moments(bump().as_ref(), 0, MOMENT_PANELS_PER_UNIT).unwrap();
        assert_eq!(v0.degree(), 0);
        assert_relative_eq!(
            v0.coeff(&[0]),
            lambda / kernel_mass(1) * 0.25 * t[&vec![0]],
            epsilon = 1e-15
        );
        let z = stage3_polynomial(&ZeroCompact, 2.0, 8).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn v_n_matches_direct_quadrature() {
        let lambda = 2.0;
        let n = 8;
        let v = stage3_polynomial(bump().as_ref(), lambda, n).unwrap();
        let u = taylor_u(n, 1);
        let rule = GaussLegendre::new(16);
        let b = bump();
        for x in [-1.7, -0.4, 0.0, 0.9, 2.2] {
            let direct = lambda / kernel_mass(1)
                * rule.composite(-1.0, 1.0, 40, |y| {
                    b.eval(&[y]) * u.eval(&[lambda * (x - y)])
                });
            assert!((v.eval(&[x]) - direct).abs() < 1e-9);
        }
        assert!(v.degree() <= n);
    }

    #[test]
    fn pipeline_zero_and_coarse() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let limits = PipelineLimits {
            points_per_axis: 257,
            ..Default::default()
        };
        let z: SharedFn = Arc::new(Zero(1));
        // Zero has no support: the cutoff supplies one.
        let r = pipeline_approximate(z, &w, 1, 0.01, limits).unwrap();
        assert!(r.poly.is_zero());
        assert_eq!(r.final_error, 0.0);
        let g: SharedFn = Arc::new(FleetFunction::new(Fleet::Gaussian, 1));
        let r = pipeline_approximate(g, &w, 1, 10.0, limits).unwrap();
        assert_eq!(r.degree, 0);
        assert!(r.final_error <= 10.0);
    }
}
