use ndarray::Array1;
use rand::Rng;

use super::sets::{select_best, CandidateSet, EllipsoidCS};
use super::Criterion;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numkit::{chi2_quantile, mean_inverse_noncentral_chi2, McEstimate, OrthoBasis};
use crate::stein::{radius_perp_sq, stein_shrink, SureConstant, SureMode};

/// Upper bound on `c1`, `c2` for the volume criterion.
pub const DEFAULT_E: f64 = 10.0;

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}

fn check_c1(c1: f64, k: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if k > 0 && !(c1 >= 1.0) {
        return Err(Error::Domain(format!("c1 = {c1} must be at least 1")));
    }
    Ok(())
}

fn radius_a_sq_single(k: usize, n: usize, sigma2: f64, alpha: f64, c1: f64) -> Result<f64> {
    check_level(alpha)?;
    check_c1(c1, k, n)?;
    if k == 0 {
        return Ok(0.0);
    }
    Ok(c1 * sigma2 * chi2_quantile(k as u32, 1.0 - alpha / 2.0)? / n as f64)
}

fn radius_a_sq_multi(k: usize, n: usize, sigma2: f64, alpha: f64, c1: f64, m: usize) -> Result<f64> {
    check_level(alpha)?;
    check_c1(c1, k, n)?;
    if m == 0 {
        return Err(Error::Domain("number of candidates must be at least 1".into()));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let tail = (kf * (4.0 * m as f64 / alpha).ln()).sqrt();
    Ok(c1 * sigma2 / n as f64 * (kf + 2.0 * tail))
}

/// Strong-signal radius from the `chi2_k(1 - alpha/2)` quantile.
pub fn radius_a_single(k: usize, n: usize, sigma2: f64, alpha: f64, c1: f64) -> Result<f64> {
    Ok(radius_a_sq_single(k, n, sigma2, alpha, c1)?.sqrt())
}

/// Strong-signal radius that stays valid simultaneously over `m` candidates.
pub fn radius_a_multi(k: usize, n: usize, sigma2: f64, alpha: f64, c1: f64, m: usize) -> Result<f64> {
    Ok(radius_a_sq_multi(k, n, sigma2, alpha, c1, m)?.sqrt())
}

/// `(c1, c2)` minimizing `k ln c1 + (n - k) ln c2` on `1/c1 + 1/c2 = 1`, both in `[E/(E-1), E]`.
pub fn choose_constants_volume(_r_tilde_a: f64, _r_tilde_perp: f64, k: usize, n: usize, e: f64) -> Result<(f64, f64)> {
    if !(e > 2.0) || !e.is_finite() {
        return Err(Error::Domain(format!("E = {e} must exceed 2")));
    }
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("volume constants need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let lo = e / (e - 1.0);
    let (nf, kf) = (n as f64, k as f64);
    let c1 = lo.max((nf / kf).min(e));
    let c2 = lo.max((nf / (nf - kf)).min(e));
    Ok((c1, c2))
}

/// `(c1, c2)` that equalize the two radii, turning the set into a ball.
pub fn choose_constants_diameter(r_tilde_a: f64, r_tilde_perp: f64) -> Result<(f64, f64)> {
    let (a2, p2) = (r_tilde_a * r_tilde_a, r_tilde_perp * r_tilde_perp);
    if !(a2 > 0.0 || p2 > 0.0) || !(a2 + p2).is_finite() {
        return Err(Error::Degenerate("both base radii are zero".into()));
    }
    let total = a2 + p2;
    Ok((total / a2, total / p2))
}

/// Single-set radii, or the simultaneous radii over `m` candidates with slack `cm`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusMode {
    Single,
    Multi { m: usize, cm: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoStepOptions {
    pub alpha: f64,
    pub criterion: Criterion,
    pub e_bound: f64,
    pub sure: SureMode,
    pub radii: RadiusMode,
}

impl TwoStepOptions {
    pub fn new(alpha: f64, criterion: Criterion) -> Self {
        Self {
            alpha,
            criterion,
            e_bound: DEFAULT_E,
            sure: SureMode::Truncated,
            radii: RadiusMode::Single,
        }
    }
}

/// Projects `y` onto `span(X_A)`, shrinks the complement, and sizes both radii.
///
/// `cs` must be the SURE constant at level `alpha / 2`. An empty candidate
/// gives a ball around the shrunken response with `c2 = 1`.
pub fn build_two_step(data: &Dataset, cand: &CandidateSet, opts: &TwoStepOptions, cs: &SureConstant) -> Result<EllipsoidCS> {
    check_level(opts.alpha)?;
    let n = data.n();
    let basis = cand.basis();
    if basis.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: basis.n(),
        });
    }
    let k = basis.rank();
    if k >= n {
        return Err(Error::Degenerate(format!("candidate spans all of R^{n}")));
    }
    let sigma2 = data.sigma2;
    let mu_a_hat = basis.project(data.y.view());
    let y_perp = &data.y - &mu_a_hat;
    let fit = stein_shrink(y_perp.view(), n - k, sigma2)?;
    let l = fit.sure(opts.sure);

    let (base_a_sq, slack) = match opts.radii {
        RadiusMode::Single => (radius_a_sq_single(k, n, sigma2, opts.alpha, 1.0)?, cs.value),
        RadiusMode::Multi { m, cm } => (
            radius_a_sq_multi(k, n, sigma2, opts.alpha, 1.0, m)?,
            cm * (m as f64).powf(0.25),
        ),
    };
    let base_perp_sq = radius_perp_sq(l, n, k, sigma2, 1.0, slack)?;

    assemble_ellipsoid(
        basis.clone(),
        mu_a_hat,
        fit.mu_perp_hat,
        base_a_sq,
        base_perp_sq,
        opts.criterion,
        opts.e_bound,
    )
}

/// Scales base radii (computed with `c1 = c2 = 1`) by the criterion's constants.
///
/// For `k = 0` the set is a ball with `c2 = 1`.
pub fn assemble_ellipsoid(
    basis: OrthoBasis,
    mu_a_hat: Array1<f64>,
    mu_perp_hat: Array1<f64>,
    base_a_sq: f64,
    base_perp_sq: f64,
    criterion: Criterion,
    e_bound: f64,
) -> Result<EllipsoidCS> {
    let (n, k) = (basis.n(), basis.rank());
    let (c1, c2, r_a_sq, r_perp_sq) = if k == 0 {
        (f64::INFINITY, 1.0, 0.0, base_perp_sq)
    } else {
        match criterion {
            Criterion::Volume => {
                let (c1, c2) = choose_constants_volume(base_a_sq.sqrt(), base_perp_sq.max(0.0).sqrt(), k, n, e_bound)?;
                (c1, c2, c1 * base_a_sq, c2 * base_perp_sq)
            }
            Criterion::Diameter => {
                if base_perp_sq < 0.0 {
                    return Err(Error::Degenerate("negative weak-signal radius under the diameter criterion".into()));
                }
                let (c1, c2) = choose_constants_diameter(base_a_sq.sqrt(), base_perp_sq.sqrt())?;
                let total = base_a_sq + base_perp_sq;
                (c1, c2, total, total)
            }
        }
    };
    Ok(EllipsoidCS {
        basis,
        mu_a_hat,
        mu_perp_hat,
        r_a_sq,
        r_perp_sq,
        c1,
        c2,
        provenance: 0,
    })
}

/// The selected set together with the candidate list it came from.
#[derive(Clone, Debug)]
pub struct Selection {
    pub set: EllipsoidCS,
    /// Position of the chosen candidate in `candidates`.
    pub m_star: usize,
    pub n_candidates: usize,
}

/// Builds a set for every candidate and keeps the best one.
///
/// With `strict_multi` the radii are widened to hold simultaneously over all
/// candidates, using `cs` as the slack constant. Candidates spanning the whole
/// space are skipped.
pub fn stein_confidence_set(
    data: &Dataset,
    candidates: &[CandidateSet],
    opts: &TwoStepOptions,
    strict_multi: bool,
    cs: &SureConstant,
) -> Result<Selection> {
    let mut opts = *opts;
    if strict_multi {
        opts.radii = RadiusMode::Multi {
            m: candidates.len().max(1),
            cm: cs.value,
        };
    }
    let mut sets = Vec::with_capacity(candidates.len());
    for (m, cand) in candidates.iter().enumerate() {
        match build_two_step(data, cand, &opts, cs) {
            Ok(mut set) => {
                set.provenance = m;
                sets.push(set);
            }
            Err(Error::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if sets.is_empty() {
        return Err(Error::Degenerate("every candidate set was degenerate".into()));
    }
    let best = select_best(&sets, opts.criterion)?;
    let set = sets.swap_remove(best);
    Ok(Selection {
        m_star: set.provenance,
        set,
        n_candidates: candidates.len(),
    })
}

/// Expected squared diameter of the untruncated-SURE set for a fixed candidate of rank `k`,
/// with `rho = ||P_perp mu||^2 / sigma2`.
#[allow(clippy::too_many_arguments)]
pub fn expected_sq_diameter<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    sigma2: f64,
    alpha: f64,
    c1: f64,
    c2: f64,
    cs: f64,
    rho: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if n <= k + 2 {
        return Err(Error::Domain(format!("need n - k > 2, got n = {n}, k = {k}")));
    }
    let term_a = radius_a_sq_single(k, n, 1.0, alpha, c1)?;
    let df = n - k;
    let inv = mean_inverse_noncentral_chi2(df as u32, rho, n_draws, rng)?;
    let scale = c2 * df as f64 / n as f64;
    let term_p = scale * (1.0 - inv.mean + cs / (df as f64).sqrt());
    Ok(if term_a >= term_p {
        McEstimate {
            mean: 4.0 * sigma2 * term_a,
            std_error: 0.0,
        }
    } else {
        McEstimate {
            mean: 4.0 * sigma2 * term_p,
            std_error: 4.0 * sigma2 * scale * inv.std_error,
        }
    })
}
