//! Weight families `m ↦ φ_m` on ℝⁿ and the exponential weights `θ_m = exp φ_m`.
//!
//! Two concrete families are shipped:
//!
//! * power: `φ_m(x) = (1 + 1/m)·‖x‖^a`, `a > 1`;
//! * log-penalty: `φ_m(x) = c·‖x‖^b − m·ln(1 + ‖x‖)`, `b > 1`, for which
//!   `φ_m − φ_{m+1} = ln(1 + ‖x‖)` exactly.
//!
//! Both are radial, so [`WeightFamily::profile`] gives `φ_m` along any ray.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest argument for which `f64::exp` stays finite.
pub const MAX_EXP_ARG: f64 = 709.782712893384;

/// Construction descriptor of a weight family; also the config-file form
/// (`weight = { kind = "power", a = 2.0 }`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    Power { a: f64 },
    LogPenalty { coeff: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFamily {
    dim: usize,
    kind: WeightKind,
}

impl WeightFamily {
    pub fn new(kind: WeightKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        match kind {
            WeightKind::Power { a } => {
                if !(a > 1.0) || !a.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "power family needs a > 1 for superlinear growth, got {a}"
                    )));
                }
            }
            WeightKind::LogPenalty { coeff, exponent } => {
                if !(coeff > 0.0)
                    || !(exponent > 1.0)
                    || !coeff.is_finite()
                    || !exponent.is_finite()
                {
                    return Err(Error::InvalidInput(format!(
                        "log-penalty family needs coeff > 0 and exponent > 1, got ({coeff}, {exponent})"
                    )));
                }
            }
        }
        Ok(Self { dim, kind })
    }

    /// `φ_m(x) = (1 + 1/m)·‖x‖^a`.
    pub fn power(a: f64, dim: usize) -> Result<Self> {
        Self::new(WeightKind::Power { a }, dim)
    }

    /// `φ_m(x) = coeff·‖x‖^exponent − m·ln(1 + ‖x‖)`.
    pub fn log_penalty(coeff: f64, exponent: f64, dim: usize) -> Result<Self> {
        Self::new(WeightKind::LogPenalty { coeff, exponent }, dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// Convexity of every `φ_m` on ℝⁿ. The log-penalty family has a concave
    /// kink at the origin and is never flagged convex.
    pub fn is_convex(&self) -> bool {
        matches!(self.kind, WeightKind::Power { a } if a >= 1.0)
    }

    /// Radial profile: `φ_m(x)` for any `x` with `‖x‖ = r`.
    pub fn profile(&self, m: usize, r: f64) -> f64 {
        assert!(m >= 1, "weight index starts at 1");
        let r = r.abs();
        match self.kind {
            WeightKind::Power { a } => (1.0 + 1.0 / m as f64) * r.powf(a),
            WeightKind::LogPenalty { coeff, exponent } => {
                coeff * r.powf(exponent) - m as f64 * r.ln_1p()
            }
        }
    }

    /// `φ_m(x)`.
    pub fn eval(&self, m: usize, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.profile(m, norm(x))
    }

    /// `ln θ_m(x)`; never exponentiates.
    pub fn log_theta(&self, m: usize, x: &[f64]) -> f64 {
        self.eval(m, x)
    }

    /// `θ_m(x) = exp φ_m(x)`, refusing to overflow.
    pub fn theta(&self, m: usize, x: &[f64]) -> Result<f64> {
        let phi = self.eval(m, x);
        if phi > MAX_EXP_ARG {
            return Err(Error::Overflow { exponent: phi });
        }
        Ok(phi.exp())
    }

    /// `inf_{x ∉ Π_r} φ_m(x)`, the smallest weight value outside the open cube.
    pub fn inf_outside_cube(&self, m: usize, r: f64) -> f64 {
        // Radial families: the infimum over ‖x‖ ≥ r is the profile's infimum on [r, ∞).
        inf_profile_beyond(|t| self.profile(m, t), r)
    }
}

/// Infimum of a one-dimensional profile on `[r, ∞)`, by geometric sampling out
/// to the point where the profile is increasing and exceeds its value at `r`.
pub(crate) fn inf_profile_beyond(profile: impl Fn(f64) -> f64, r: f64) -> f64 {
    let mut best = profile(r);
    let mut t = r.max(1e-3);
    let mut prev = best;
    let mut rising = 0;
    for _ in 0..4000 {
        t *= 1.01;
        let v = profile(t);
        best = best.min(v);
        rising = if v > prev { rising + 1 } else { 0 };
        prev = v;
        if rising > 200 && v > best + 50.0 {
            break;
        }
    }
    best
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Open cube `Π_r = {x : |x_j| < r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub radius: f64,
    pub dim: usize,
}

impl Cube {
    pub fn new(radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0) || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "cube needs positive radius and dimension, got ({radius}, {dim})"
            )));
        }
        Ok(Self { radius, dim })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() < self.radius)
    }

    /// Points on the shell `‖x‖_∞ = r`, including every face centre.
    pub fn shell_points(&self, per_edge: usize) -> Vec<Vec<f64>> {
        shell_points(self.dim, self.radius, per_edge)
    }
}

pub(crate) fn shell_points(dim: usize, r: f64, per_edge: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-r], vec![r]],
        _ => {
            // Each face: one coordinate pinned to ±r, the others on a grid
            // symmetric about zero (odd count so the face centre is included).
            let k = (per_edge | 1).max(3);
            let ticks: Vec<f64> = (0..k)
                .map(|i| -r + 2.0 * r * i as f64 / (k - 1) as f64)
                .collect();
            let mut out = Vec::new();
            for fixed in 0..dim {
                for sign in [-1.0, 1.0] {
                    let free = dim - 1;
                    let total = k.pow(free as u32);
                    for idx in 0..total {
                        let mut rem = idx;
                        let mut p = Vec::with_capacity(dim);
                        for j in 0..dim {
                            if j == fixed {
                                p.push(sign * r);
                            } else {
                                p.push(ticks[rem % k]);
                                rem /= k;
                            }
                        }
                        out.push(p);
                    }
                }
            }
            out
        }
    }
}

/// Unit directions used to probe spheres: `{±1}` in 1-D, 64 equally spaced
/// angles in 2-D, axes and diagonals above that.
pub fn sphere_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => (0..64)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        n => {
            let mut dirs = Vec::new();
            for j in 0..n {
                for s in [-1.0, 1.0] {
                    let mut e = vec![0.0; n];
                    e[j] = s;
                    dirs.push(e);
                }
            }
            let inv = 1.0 / (n as f64).sqrt();
            for mask in 0..(1usize << n) {
                dirs.push(
                    (0..n)
                        .map(|j| if mask >> j & 1 == 1 { -inv } else { inv })
                        .collect(),
                );
            }
            dirs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub m: usize,
    pub radius: f64,
    /// `min_{‖x‖=r} φ_m(x)/‖x‖`
    pub min_ratio: f64,
    /// `min_{‖x‖=r} (φ_m − φ_{m+1})(x)`
    pub min_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    /// `(m, pass)` for each index checked.
    pub verdicts: Vec<(usize, bool)>,
    pub largest_radius: f64,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|&(_, p)| p)
    }
}

/// Empirical check of superlinear growth of each `φ_m` and of the divergence
/// of `φ_m − φ_{m+1}` on increasing probe radii.
///
/// An index passes when both sphere minima increase strictly along the radii
/// and both exceed `threshold` at the largest radius.
pub fn check_growth_conditions(
    w: &WeightFamily,
    m_max: usize,
    probe_radii: &[f64],
    threshold: f64,
) -> Result<ConditionReport> {
    if probe_radii.len() < 4 {
        return Err(Error::InvalidInput("need at least 4 probe radii".into()));
    }
    if probe_radii.windows(2).any(|p| !(p[1] > p[0])) || !(probe_radii[0] > 0.0) {
        return Err(Error::InvalidInput(
            "probe radii must be positive and strictly increasing".into(),
        ));
    }
    if m_max == 0 {
        return Err(Error::InvalidInput("m_max starts at 1".into()));
    }
    let dirs = sphere_directions(w.dim());
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for m in 1..=m_max {
        let mut ratios = Vec::with_capacity(probe_radii.len());
        let mut diffs = Vec::with_capacity(probe_radii.len());
        for &r in probe_radii {
            let mut min_ratio = f64::INFINITY;
            let mut min_diff = f64::INFINITY;
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|c| c * r).collect();
                let phi = w.eval(m, &x);
                min_ratio = min_ratio.min(phi / r);
                min_diff = min_diff.min(phi - w.eval(m + 1, &x));
            }
            rows.push(ConditionRow {
                m,
                radius: r,
                min_ratio,
                min_difference: min_diff,
            });
            ratios.push(min_ratio);
            diffs.push(min_diff);
        }
        let increasing = |v: &[f64]| v.windows(2).all(|p| p[1] > p[0]);
        let pass = increasing(&ratios)
            && increasing(&diffs)
            && *ratios.last().unwrap() > threshold
            && *diffs.last().unwrap() > threshold;
        verdicts.push((m, pass));
    }
    Ok(ConditionReport {
        rows,
        verdicts,
        largest_radius: *probe_radii.last().unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_family_values() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        assert_eq!(w.eval(1, &[2.0]), 8.0);
        assert_relative_eq!(w.eval(1_000_000, &[2.0]), 4.0, epsilon = 1e-5);
        let w2 = WeightFamily::power(2.0, 2).unwrap();
        assert_relative_eq!(w2.eval(1, &[1.0, 1.0]), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_sublinear_power() {
        assert!(WeightFamily::power(1.0, 1).is_err());
        assert!(WeightFamily::power(0.5, 1).is_err());
        assert!(WeightFamily::log_penalty(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn theta_values() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        assert_eq!(w.theta(1, &[0.0]).unwrap(), 1.0);
        assert_relative_eq!(
            w.theta(1, &[1.0]).unwrap(),
            7.38905609893065,
            epsilon = 1e-14
        );
        // 1.5 * 9 = 13.5
        assert_relative_eq!(
            w.theta(2, &[3.0]).unwrap(),
            729416.3698477013,
            max_relative = 1e-14
        );
        assert!(matches!(w.theta(1, &[30.0]), Err(Error::Overflow { .. })));
        assert_eq!(w.log_theta(1, &[30.0]), 1800.0);
    }

    #[test]
    fn log_penalty_difference_is_exact() {
        let w = WeightFamily::log_penalty(1.0, 2.0, 2).unwrap();
        for i in 0..50 {
            let x = [0.37 * i as f64, -0.11 * i as f64];
            for m in 1..5 {
                let d = w.eval(m, &x) - w.eval(m + 1, &x) - norm(&x).ln_1p();
                assert!(d.abs() < 1e-12, "residual {d}");
            }
        }
    }

    #[test]
    fn growth_report_power() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let rep = check_growth_conditions(&w, 3, &[1.0, 10.0, 100.0, 1000.0], 1.0).unwrap();
        assert!(rep.all_pass());
        let row = rep
            .rows
            .iter()
            .find(|r| r.m == 1 && r.radius == 100.0)
            .unwrap();
        assert_relative_eq!(row.min_ratio, 200.0, epsilon = 1e-10);
        let row = rep
            .rows
            .iter()
            .find(|r| r.m == 1 && r.radius == 10.0)
            .unwrap();
        // (2 − 3/2)·r² for m = 1; the (1/2 − 1/3) coefficient belongs to m = 2.
        assert_relative_eq!(row.min_difference, 50.0, epsilon = 1e-10);
        let row = rep
            .rows
            .iter()
            .find(|r| r.m == 2 && r.radius == 10.0)
            .unwrap();
        assert_relative_eq!(row.min_difference, 100.0 / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn growth_report_log_penalty() {
        let w = WeightFamily::log_penalty(1.0, 2.0, 1).unwrap();
        let e1 = std::f64::consts::E - 1.0;
        let rep = check_growth_conditions(&w, 2, &[e1, 10.0, 100.0, 1000.0], 1.0).unwrap();
        let row = &rep.rows[0];
        assert_relative_eq!(row.min_difference, 1.0, epsilon = 1e-14);
        assert!(rep.all_pass());
    }

    #[test]
    fn growth_report_rejects_bad_radii() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        assert!(check_growth_conditions(&w, 1, &[1.0, 10.0, 100.0], 1.0).is_err());
        assert!(check_growth_conditions(&w, 1, &[1.0, 10.0, 5.0, 100.0], 1.0).is_err());
    }

    #[test]
    fn growth_report_flags_weak_threshold() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let rep = check_growth_conditions(&w, 1, &[0.1, 0.2, 0.3, 0.4], 100.0).unwrap();
        assert!(!rep.all_pass());
    }

    #[test]
    fn cube_membership_is_strict() {
        let c = Cube::new(2.0, 2).unwrap();
        assert!(c.contains(&[1.999, -1.999]));
        assert!(!c.contains(&[2.0, 0.0]));
        assert!(c.shell_points(5).iter().all(|p| !c.contains(p)));
    }

    #[test]
    fn inf_outside_cube_is_profile_value_for_increasing_profiles() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        assert_relative_eq!(w.inf_outside_cube(1, 3.0), 18.0, epsilon = 1e-12);
        // log-penalty dips below zero before growing
        let w = WeightFamily::log_penalty(0.1, 2.0, 1).unwrap();
        assert!(w.inf_outside_cube(4, 0.5) < w.profile(4, 0.5));
    }
}
