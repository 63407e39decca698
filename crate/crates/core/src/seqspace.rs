//! Weighted sequence spaces of smooth functions: weights `c_k^{(m)}`, the
//! summability constant `K_m = Σ_k c_k^{(m)}/c_k^{(m+1)}`, the seminorm
//! `p_m(f) = Σ_k c_k^{(m)}·q_m(f_k)`, and functionals acting componentwise.
//!
//! Every sequence here is finitely supported.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flt::DiscreteFunctional;
use crate::smoothfn::{seminorm_q, GridSpec, SharedFn};
use crate::weights::WeightFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeqWeightFamily {
    /// `c_k^{(m)} = base^{k·m}`
    Geometric { base: f64 },
    /// `c_k^{(m)} = k^m`; `K_m` is the harmonic series.
    Polynomial,
}

impl Default for SeqWeightFamily {
    fn default() -> Self {
        SeqWeightFamily::Geometric { base: 2.0 }
    }
}

impl SeqWeightFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SeqWeightFamily::Geometric { base } if !(base > 1.0) || !base.is_finite() => {
                Err(Error::InvalidInput(format!(
                    "geometric sequence weights need base > 1, got {base}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `ln c_k^{(m)}`
    pub fn ln_eval(&self, k: usize, m: usize) -> f64 {
        assert!(k >= 1, "sequence index starts at 1");
        match *self {
            SeqWeightFamily::Geometric { base } => (k * m) as f64 * base.ln(),
            SeqWeightFamily::Polynomial => m as f64 * (k as f64).ln(),
        }
    }

    pub fn eval(&self, k: usize, m: usize) -> f64 {
        self.ln_eval(k, m).exp()
    }

    /// `c_k^{(m)} / c_k^{(m+1)}`
    pub fn ratio(&self, k: usize, m: usize) -> f64 {
        (self.ln_eval(k, m) - self.ln_eval(k, m + 1)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmSum {
    pub m: usize,
    /// Partial sum plus the geometric tail bound.
    pub value: f64,
    pub partial: f64,
    pub tail_bound: f64,
    /// Number of summed terms.
    pub depth: usize,
}

/// Terms probed before the ratio test is declared failed.
pub const KM_MAX_TERMS: usize = 10_000;
const RATIO_WINDOW: usize = 16;

/// `K_m` to within `tol`. The tail after term `k` is bounded by
/// `r_{k+1} / (1 − q)` with `q` the largest term ratio over a trailing window.
pub fn km_sum(c: &SeqWeightFamily, m: usize, tol: f64) -> Result<KmSum> {
    c.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let mut partial = 0.0;
    let mut qs: Vec<f64> = Vec::with_capacity(RATIO_WINDOW);
    for k in 1..=KM_MAX_TERMS {
        let r = c.ratio(k, m);
        partial += r;
        let next = c.ratio(k + 1, m);
        if qs.len() == RATIO_WINDOW {
            qs.remove(0);
        }
        qs.push(next / r);
        let q = qs.iter().cloned().fold(0.0, f64::max);
        if k >= 4 && q < 1.0 {
            let tail = next / (1.0 - q);
            if tail < tol {
                return Ok(KmSum {
                    m,
                    value: partial + tail,
                    partial,
                    tail_bound: tail,
                    depth: k,
                });
            }
        }
    }
    Err(Error::Divergence(format!(
        "Σ c_k^({m})/c_k^({}) fails the ratio test over {KM_MAX_TERMS} terms (partial sum {partial:.6e})",
        m + 1
    )))
}

/// A finitely supported sequence `(f_1, f_2, …)`; absent entries are zero.
#[derive(Clone, Default)]
pub struct FnSequence {
    entries: BTreeMap<usize, SharedFn>,
}

impl std::fmt::Debug for FnSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map()
            .entries(self.entries.iter().map(|(k, v)| (k, v.name())))
            .finish()
    }
}

impl FnSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, k: usize, f: SharedFn) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidInput("sequence index starts at 1".into()));
        }
        self.entries.insert(k, f);
        Ok(())
    }

    /// The `k`-th component.
    pub fn component(&self, k: usize) -> Option<&SharedFn> {
        self.entries.get(&k)
    }

    /// `(f_1, …, f_j, 0, …)`
    pub fn truncation(&self, j: usize) -> Self {
        Self {
            entries: self
                .entries
                .range(..=j)
                .map(|(k, f)| (*k, f.clone()))
                .collect(),
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn max_index(&self) -> usize {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &SharedFn)> {
        self.entries.iter().map(|(k, f)| (*k, f))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PRow {
    pub k: usize,
    pub weight: f64,
    pub q: f64,
    pub product: f64,
    pub running: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PSeminorm {
    pub value: f64,
    pub rows: Vec<PRow>,
}

/// `p_m(f)` with every `q_m(f_k)` taken as a grid value on the cube of the
/// given radius.
pub fn p_seminorm(
    f: &FnSequence,
    m: usize,
    c: &SeqWeightFamily,
    w: &WeightFamily,
    radius: f64,
    points_per_axis: usize,
) -> Result<PSeminorm> {
    c.validate()?;
    let grid = GridSpec::new(radius, w.dim(), points_per_axis)?;
    let mut rows = Vec::new();
    let mut running = 0.0;
    for (k, fk) in f.iter() {
        let q = seminorm_q(fk.as_ref(), m, m, w, &grid)?.value;
        let weight = c.eval(k, m);
        let product = weight * q;
        running += product;
        rows.push(PRow {
            k,
            weight,
            q,
            product,
            running,
        });
    }
    Ok(PSeminorm {
        value: running,
        rows,
    })
}

/// `F(f) = Σ_k F_k(f_k)` over the common support.
pub fn split_functional(
    fs: &BTreeMap<usize, DiscreteFunctional>,
    f: &FnSequence,
) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (k, fk) in fs {
        if let Some(u) = f.component(*k) {
            total += fk.apply(u.as_ref())?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonomialProbe {
    /// `(k, α, F_k(x^α))`
    pub table: Vec<(usize, usize, Complex64)>,
    pub all_zero: bool,
}

pub const MONOMIAL_ZERO_TOL: f64 = 1e-12;

/// `F_k(x^α)` for `α ≤ alpha_max`, `k ≤ k_max`.
pub fn monomial_probe(
    fs: &BTreeMap<usize, DiscreteFunctional>,
    alpha_max: usize,
    k_max: usize,
) -> MonomialProbe {
    let mut table = Vec::new();
    for k in 1..=k_max {
        let fk = fs.get(&k);
        for alpha in 0..=alpha_max {
            let v = fk.map_or(Complex64::new(0.0, 0.0), |f| f.apply_monomial(alpha));
            table.push((k, alpha, v));
        }
    }
    let all_zero = table.iter().all(|(_, _, v)| v.norm() < MONOMIAL_ZERO_TOL);
    MonomialProbe { table, all_zero }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBound {
    /// `|F(u)|`
    pub value: f64,
    /// `q_m(u)` on the grid, which includes the functional's points
    pub q: f64,
    /// `Σ_j |c_j|·θ_m(a_j)`
    pub weight_sum: f64,
    pub bound: f64,
}

/// `|F(u)| ≤ (Σ_j |c_j|·θ_m(a_j))·q_m(u)`, valid when every order is `≤ m`.
pub fn pointwise_bound(
    f: &DiscreteFunctional,
    u: &SharedFn,
    m: usize,
    w: &WeightFamily,
    grid: &GridSpec,
) -> Result<PointwiseBound> {
    if f.max_order() > m {
        return Err(Error::Order {
            requested: f.max_order(),
            max: m,
        });
    }
    let extra: Vec<Vec<f64>> = f.terms().iter().map(|t| vec![t.point]).collect();
    let grid = grid.clone().with_extra_points(extra);
    let q = seminorm_q(u.as_ref(), m, m, w, &grid)?.value;
    let weight_sum: f64 = f
        .terms()
        .iter()
        .map(|t| Ok(t.coeff().norm() * w.theta(m, &[t.point])?))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(PointwiseBound {
        value: f.apply(u.as_ref())?.norm(),
        q,
        weight_sum,
        bound: weight_sum * q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::{Fleet, FleetFunction};
    use crate::flt::Term;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn geometric_km_is_one() {
        let c = SeqWeightFamily::default();
        for m in 1..=6 {
            let s = km_sum(&c, m, 1e-14).unwrap();
            assert!((s.value - 1.0).abs() < 1e-12, "m={m}: {}", s.value);
        }
        let coarse = km_sum(&c, 1, 1e-3).unwrap();
        let fine = km_sum(&c, 1, 1e-12).unwrap();
        assert!(coarse.depth < fine.depth);
        assert_relative_eq!(coarse.value, fine.value, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_weights_diverge() {
        assert!(matches!(
            km_sum(&SeqWeightFamily::Polynomial, 2, 1e-6),
            Err(Error::Divergence(_))
        ));
        assert_relative_eq!(
            SeqWeightFamily::default().ratio(3, 4),
            0.125,
            epsilon = 1e-15
        );
    }

    #[test]
    fn p_seminorm_of_single_gaussian() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let mut s = FnSequence::new();
        s.insert(1, Arc::new(FleetFunction::new(Fleet::Gaussian, 1)))
            .unwrap();
        let p = p_seminorm(&s, 1, &SeqWeightFamily::default(), &w, 5.0, 2049).unwrap();
        assert_relative_eq!(p.value, 2.0, epsilon = 1e-12);
        let empty = p_seminorm(
            &FnSequence::new(),
            1,
            &SeqWeightFamily::default(),
            &w,
            5.0,
            65,
        )
        .unwrap();
        assert_eq!(empty.value, 0.0);
    }

    #[test]
    fn split_functional_sums_deltas() {
        let mut s = FnSequence::new();
        let mut fs = BTreeMap::new();
        for k in 1..=3 {
            s.insert(k, Arc::new(FleetFunction::new(Fleet::Gaussian, 1)))
                .unwrap();
            fs.insert(k, DiscreteFunctional::delta(0.0));
        }
        assert_eq!(split_functional(&fs, &s).unwrap(), Complex64::new(3.0, 0.0));
        for j in 3..6 {
            assert_eq!(
                split_functional(&fs, &s.truncation(j)).unwrap(),
                split_functional(&fs, &s).unwrap()
            );
        }
    }

    #[test]
    fn cancelling_functional_probes_zero() {
        let one = Complex64::new(1.0, 0.0);
        let cancel =
            DiscreteFunctional::new(vec![Term::new(one, 1, 0.0), Term::new(-one, 1, 0.0)]).unwrap();
        let fs = BTreeMap::from([(1, cancel)]);
        assert!(monomial_probe(&fs, 6, 3).all_zero);
        let fs = BTreeMap::from([(1, DiscreteFunctional::delta(0.0))]);
        assert!(!monomial_probe(&fs, 6, 3).all_zero);
    }

    #[test]
    fn pointwise_bound_holds_for_delta() {
        let w = WeightFamily::power(2.0, 1).unwrap();
        let u: SharedFn = Arc::new(FleetFunction::new(Fleet::Cosh, 1));
        let f = DiscreteFunctional::derivative_at(1, 0.37);
        let grid = GridSpec::new(4.0, 1, 129).unwrap();
        let b = pointwise_bound(&f, &u, 1, &w, &grid).unwrap();
        assert!(b.value <= b.bound);
        assert!(
            pointwise_bound(&DiscreteFunctional::derivative_at(2, 0.0), &u, 1, &w, &grid).is_err()
        );
    }
}
