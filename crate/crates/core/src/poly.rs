//! Sparse multivariate polynomials keyed by multi-index.

use std::collections::BTreeMap;

/// A finite multi-index → coefficient table. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiPoly {
    dim: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl MultiPoly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(&vec![0; dim], c);
        p
    }

    pub fn monomial(alpha: &[usize], c: f64) -> Self {
        let mut p = Self::zero(alpha.len());
        p.add_term(alpha, c);
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Self {
        let mut p = Self::zero(dim);
        for (a, c) in terms {
            p.add_term(&a, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(a, &c)| (a.as_slice(), c))
    }

    pub fn coeff(&self, alpha: &[usize]) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total degree with a nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, alpha: &[usize], c: f64) {
        assert_eq!(alpha.len(), self.dim, "multi-index dimension mismatch");
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(alpha.to_vec()).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(alpha);
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.dim);
        }
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|(a, v)| (a.clone(), v * c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, c) in other.terms() {
            out.add_term(a, c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, c) in self.terms() {
            for (b, d) in other.terms() {
                let ab: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(&ab, c * d);
            }
        }
        out
    }

    /// Keeps only monomials of total degree `<= n`.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(a, _)| a.iter().sum::<usize>() <= n)
                .map(|(a, &c)| (a.clone(), c))
                .collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| {
                c * a
                    .iter()
                    .zip(x)
                    .map(|(&k, &v)| v.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn derivative(&self, alpha: &[usize]) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, c) in self.terms() {
            if a.iter().zip(alpha).any(|(k, d)| d > k) {
                continue;
            }
            let factor: f64 = a.iter().zip(alpha).map(|(&k, &d)| falling(k, d)).product();
            let b: Vec<usize> = a.iter().zip(alpha).map(|(k, d)| k - d).collect();
            out.add_term(&b, c * factor);
        }
        out
    }

    /// `D^α p(x)` without building the derivative polynomial.
    pub fn deriv_at(&self, alpha: &[usize], x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|(a, _)| a.iter().zip(alpha).all(|(k, d)| d <= k))
            .map(|(a, c)| {
                c * a
                    .iter()
                    .zip(alpha)
                    .zip(x)
                    .map(|((&k, &d), &v)| falling(k, d) * v.powi((k - d) as i32))
                    .product::<f64>()
            })
            .sum()
    }

    /// Sum of `|c_β|·β!/(β−α)!` maximised over `|α| <= order`; with it
    /// `|D^α p(x)| <= S·(1 + ‖x‖)^{deg}`.
    pub fn derivative_coefficient_mass(&self, order: usize) -> f64 {
        multi_indices(self.dim, order)
            .iter()
            .map(|alpha| {
                self.terms()
                    .filter(|(a, _)| a.iter().zip(alpha).all(|(k, d)| d <= k))
                    .map(|(a, c)| {
                        c.abs()
                            * a.iter()
                                .zip(alpha)
                                .map(|(&k, &d)| falling(k, d))
                                .product::<f64>()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// `k·(k−1)···(k−d+1)`
pub fn falling(k: usize, d: usize) -> f64 {
    if d > k {
        return 0.0;
    }
    ((k - d + 1)..=k).map(|v| v as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// All multi-indices in `dim` variables with total degree `<= max_total`,
/// ordered by total degree, then lexicographically.
pub fn multi_indices(dim: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        let mut cur = vec![0; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}
