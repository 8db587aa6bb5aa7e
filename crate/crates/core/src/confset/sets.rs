use ndarray::{Array1, ArrayView1, ArrayView2};

use super::Criterion;
use crate::error::{ensure_finite, Error, Result};
use crate::numkit::{chi2_quantile, NestedBasis, OrthoBasis, RANK_TOL};
use crate::solvers::threshold_support;

// slack on the membership inequality so that points placed exactly on the
// boundary are not rejected by rounding
const BOUNDARY_SLACK: f64 = 1e-12;

/// Index set `A` with an orthonormal basis of `span(X_A)`.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    indices: Vec<usize>,
    basis: OrthoBasis,
}

impl CandidateSet {
    pub fn new(x: ArrayView2<f64>, indices: Vec<usize>) -> Result<Self> {
        let basis = OrthoBasis::from_columns(x, &indices, RANK_TOL)?;
        Ok(Self { indices, basis })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            indices: Vec::new(),
            basis: OrthoBasis::empty(n),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    pub fn k(&self) -> usize {
        self.basis.rank()
    }
}

/// Diameter, log-volume (up to the unit-ball constant) and geometric average radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub diameter: f64,
    pub log_volume: f64,
    pub geo_avg_radius: f64,
}

/// The ellipsoid `||P_A mu - mu_A||^2 / (n r_A^2) + ||P_perp mu - mu_perp||^2 / (n r_perp^2) <= 1`.
///
/// Squared radii are stored signed: with untruncated SURE the weak-signal
/// radius can come out negative, and the expectation checks need that value.
#[derive(Clone, Debug)]
pub struct EllipsoidCS {
    pub basis: OrthoBasis,
    pub mu_a_hat: Array1<f64>,
    pub mu_perp_hat: Array1<f64>,
    pub r_a_sq: f64,
    pub r_perp_sq: f64,
    pub c1: f64,
    pub c2: f64,
    /// Index of the candidate this set was built from.
    pub provenance: usize,
}

impl EllipsoidCS {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn k(&self) -> usize {
        self.basis.rank()
    }

    pub fn r_a(&self) -> f64 {
        self.r_a_sq.max(0.0).sqrt()
    }

    pub fn r_perp(&self) -> f64 {
        self.r_perp_sq.max(0.0).sqrt()
    }

    /// `4 max(r_A^2, r_perp^2)` from the signed squared radii.
    pub fn sq_diameter_signed(&self) -> f64 {
        let a = if self.k() == 0 { f64::NEG_INFINITY } else { self.r_a_sq };
        4.0 * a.max(self.r_perp_sq)
    }

    pub fn center(&self) -> Array1<f64> {
        &self.mu_a_hat + &self.mu_perp_hat
    }

    /// Squared distances `(||P_A mu - mu_A||^2, ||P_perp mu - mu_perp||^2)`.
    pub fn split_distances(&self, mu: ArrayView1<f64>) -> Result<(f64, f64)> {
        let n = self.n();
        if mu.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mu.len(),
            });
        }
        let d = &mu - &self.mu_a_hat - &self.mu_perp_hat;
        let coef = self.basis.q().t().dot(&d);
        let along = self.basis.q().dot(&coef);
        let across = &d - &along;
        Ok((coef.dot(&coef), across.dot(&across)))
    }

    pub fn contains(&self, mu: ArrayView1<f64>) -> Result<bool> {
        ensure_finite(mu.iter().copied(), "mu")?;
        let (da, dp) = self.split_distances(mu)?;
        let n = self.n() as f64;
        let term = |d: f64, r2: f64| {
            if r2 > 0.0 {
                d / (n * r2)
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let lhs = if self.k() == 0 { 0.0 } else { term(da, self.r_a_sq) } + term(dp, self.r_perp_sq);
        Ok(lhs <= 1.0 + BOUNDARY_SLACK)
    }

    pub fn geometry(&self) -> Geometry {
        let n = self.n();
        let k = self.k();
        let (ra, rp) = (self.r_a(), self.r_perp());
        let log_volume = if k == 0 {
            n as f64 * rp.ln()
        } else {
            k as f64 * ra.ln() + (n - k) as f64 * rp.ln()
        };
        let diameter = if k == 0 { 2.0 * rp } else { 2.0 * ra.max(rp) };
        Geometry {
            diameter,
            log_volume,
            geo_avg_radius: (log_volume / n as f64).exp(),
        }
    }

    fn score(&self, criterion: Criterion) -> f64 {
        let g = self.geometry();
        match criterion {
            Criterion::Volume => g.log_volume,
            Criterion::Diameter => g.diameter,
        }
    }
}

/// Ball `{mu : ||mu - center||^2 / n <= radius^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallCS {
    pub center: Array1<f64>,
    pub radius: f64,
}

impl BallCS {
    pub fn new(center: Array1<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("ball radius {radius} must be finite and >= 0")));
        }
        Ok(Self { center, radius })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, mu: ArrayView1<f64>) -> Result<bool> {
        if mu.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: mu.len(),
            });
        }
        ensure_finite(mu.iter().copied(), "mu")?;
        let d = &mu - &self.center;
        let dist = d.dot(&d) / self.n() as f64;
        let r2 = self.radius * self.radius;
        Ok(dist <= r2 * (1.0 + BOUNDARY_SLACK))
    }
}

/// Ball around `y` with squared radius `sigma2 * chi2_n(1 - alpha) / n`.
pub fn naive_chi2_ball(y: ArrayView1<f64>, sigma2: f64, alpha: f64) -> Result<BallCS> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty response".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 = {sigma2} must be positive")));
    }
    let q = chi2_quantile(n as u32, 1.0 - alpha)?;
    BallCS::new(y.to_owned(), (sigma2 * q / n as f64).sqrt())
}

/// Thresholded supports `{j : |beta_j| > a lambda}` for each `a`, deduplicated in first-seen order.
pub fn generate_candidates(coefficients: ArrayView1<f64>, lambda: f64, a_grid: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &a in a_grid {
        let set = threshold_support(coefficients, a * lambda);
        if !out.contains(&set) {
            out.push(set);
        }
    }
    out
}

/// Candidate sets for every distinct threshold, sharing one incremental basis.
///
/// Thresholded supports are prefixes of the ordering by decreasing
/// `|coefficient|`, so each candidate's basis is a prefix of a single
/// Gram-Schmidt pass over the largest one. Order and deduplication match
/// [`generate_candidates`].
pub fn nested_candidates(x: ArrayView2<f64>, coefficients: ArrayView1<f64>, lambda: f64, a_grid: &[f64]) -> Result<Vec<CandidateSet>> {
    if coefficients.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: coefficients.len(),
        });
    }
    let index_sets = generate_candidates(coefficients, lambda, a_grid);
    let mut order: Vec<usize> = index_sets.iter().map(Vec::len).max().map_or(Vec::new(), |_| {
        (0..coefficients.len()).filter(|&j| coefficients[j] != 0.0).collect()
    });
    order.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
    let longest = index_sets.iter().map(Vec::len).max().unwrap_or(0);
    order.truncate(longest);
    let nested = NestedBasis::new(x, &order, RANK_TOL)?;
    Ok(index_sets
        .into_iter()
        .map(|indices| {
            let mut basis = nested.prefix(indices.len());
            basis.set_source_indices(indices.clone());
            CandidateSet { indices, basis }
        })
        .collect())
}

/// Index of the best set; ties go to smaller `k`, then smaller provenance.
pub fn select_best(sets: &[EllipsoidCS], criterion: Criterion) -> Result<usize> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no candidate sets to select from".into()));
    }
    let best = (0..sets.len())
        .min_by(|&i, &j| {
            let (a, b) = (&sets[i], &sets[j]);
            a.score(criterion)
                .total_cmp(&b.score(criterion))
                .then(a.k().cmp(&b.k()))
                .then(a.provenance.cmp(&b.provenance))
        })
        .expect("non-empty");
    Ok(best)
}
