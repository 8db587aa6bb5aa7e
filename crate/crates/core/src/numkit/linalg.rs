use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{ensure_finite, Error, Result};

/// Relative rank tolerance for the pivoted QR.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the column span of `X_A`.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    q: Array2<f64>,
    source_indices: Vec<usize>,
}

struct Reflectors {
    // one Householder vector per eliminated column, stored with its full length n
    vs: Vec<Array1<f64>>,
    betas: Vec<f64>,
}

impl Reflectors {
    fn apply(&self, v: &mut Array1<f64>) {
        for (h, &beta) in self.vs.iter().zip(&self.betas).rev() {
            let d = beta * h.dot(v);
            v.scaled_add(-d, h);
        }
    }
}

/// Pivoted Householder QR; stops at the first pivot below `tol` times the largest.
fn pivoted_householder(a: ArrayView2<f64>, tol: f64) -> Reflectors {
    let (n, m) = a.dim();
    let mut r = a.to_owned();
    let mut active: Vec<usize> = (0..m).collect();
    let mut out = Reflectors {
        vs: Vec::new(),
        betas: Vec::new(),
    };
    let mut leading = 0.0_f64;
    for step in 0..m.min(n) {
        // recompute trailing norms; the sets are small enough that downdating is not worth its drift
        let (pos, norm) = active
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, r.slice(s![step.., c]).dot(&r.slice(s![step.., c])).sqrt()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if step == 0 {
            leading = norm;
        }
        if norm <= 0.0 || norm <= tol * leading {
            break;
        }
        let col = active.swap_remove(pos);
        let x = r.slice(s![step.., col]).to_owned();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = Array1::zeros(n);
        v.slice_mut(s![step..]).assign(&x);
        v[step] -= alpha;
        let vnorm2 = v.dot(&v);
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        for &c in &active {
            let mut colv = r.column_mut(c);
            let d = beta * v.slice(s![step..]).dot(&colv.slice(s![step..]));
            colv.slice_mut(s![step..]).scaled_add(-d, &v.slice(s![step..]));
        }
        out.vs.push(v);
        out.betas.push(beta);
    }
    out
}

impl OrthoBasis {
    pub fn empty(n: usize) -> Self {
        Self {
            q: Array2::zeros((n, 0)),
            source_indices: Vec::new(),
        }
    }

    /// Basis of the columns of `x` listed in `indices`.
    pub fn from_columns(x: ArrayView2<f64>, indices: &[usize], tol: f64) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= x.ncols()) {
            return Err(Error::InvalidInput(format!("column index {bad} out of range")));
        }
        let sub = x.select(Axis(1), indices);
        let mut basis = orthonormal_basis(sub.view(), tol)?;
        basis.source_indices = indices.to_vec();
        Ok(basis)
    }

    pub fn q(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn set_source_indices(&mut self, indices: Vec<usize>) {
        self.source_indices = indices;
    }

    /// `Q Q^T v`
    pub fn project(&self, v: ArrayView1<f64>) -> Array1<f64> {
        if self.rank() == 0 {
            return Array1::zeros(v.len());
        }
        self.q.dot(&self.q.t().dot(&v))
    }

    /// `(I - Q Q^T) v`
    pub fn project_perp(&self, v: ArrayView1<f64>) -> Array1<f64> {
        &v - &self.project(v)
    }

    /// `(I - Q Q^T) M`, column by column.
    pub fn project_perp_matrix(&self, m: ArrayView2<f64>) -> Array2<f64> {
        if self.rank() == 0 {
            return m.to_owned();
        }
        let coef = self.q.t().dot(&m);
        &m - &self.q.dot(&coef)
    }

    /// Orthonormal basis (n x (n - k)) of the orthogonal complement.
    pub fn complement(&self) -> Array2<f64> {
        let n = self.n();
        let k = self.rank();
        let refl = pivoted_householder(self.q.view(), RANK_TOL);
        let mut out = Array2::zeros((n, n - k));
        for (c, j) in (k..n).enumerate() {
            let mut e = Array1::zeros(n);
            e[j] = 1.0;
            refl.apply(&mut e);
            out.column_mut(c).assign(&e);
        }
        out
    }
}

/// Orthonormal bases for every prefix of a column ordering, from one pass of
/// Gram-Schmidt with reorthogonalization.
///
/// A column whose residual falls below `tol` times the largest column norm
/// is treated as dependent and adds nothing to the rank.
#[derive(Clone, Debug)]
pub struct NestedBasis {
    q: Array2<f64>,
    order: Vec<usize>,
    prefix_rank: Vec<usize>,
}

impl NestedBasis {
    pub fn new(x: ArrayView2<f64>, order: &[usize], tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("rank tolerance {tol} must be positive")));
        }
        if let Some(&bad) = order.iter().find(|&&j| j >= x.ncols()) {
            return Err(Error::InvalidInput(format!("column index {bad} out of range")));
        }
        let n = x.nrows();
        let cols = x.select(Axis(1), order);
        ensure_finite(cols.iter().copied(), "X_A")?;
        let largest = cols.columns().into_iter().map(|c| c.dot(&c).sqrt()).fold(0.0, f64::max);
        let mut q = Array2::zeros((n, order.len().min(n)));
        let mut rank = 0;
        let mut prefix_rank = Vec::with_capacity(order.len() + 1);
        prefix_rank.push(0);
        for c in cols.columns() {
            if rank < n && largest > 0.0 {
                let mut v = c.to_owned();
                for _ in 0..2 {
                    let basis = q.slice(s![.., ..rank]);
                    let coef = basis.t().dot(&v);
                    v -= &basis.dot(&coef);
                }
                let norm = v.dot(&v).sqrt();
                if norm > tol * largest {
                    q.column_mut(rank).assign(&(v / norm));
                    rank += 1;
                }
            }
            prefix_rank.push(rank);
        }
        Ok(Self {
            q,
            order: order.to_vec(),
            prefix_rank,
        })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn prefix_rank(&self, len: usize) -> usize {
        self.prefix_rank[len]
    }

    /// Basis of the first `len` columns of the ordering.
    pub fn prefix(&self, len: usize) -> OrthoBasis {
        let r = self.prefix_rank[len];
        OrthoBasis {
            q: self.q.slice(s![.., ..r]).to_owned(),
            source_indices: self.order[..len].to_vec(),
        }
    }
}

/// Orthonormal basis of the column space of `x_a` by pivoted Householder QR.
///
/// The rank is the number of pivots whose magnitude exceeds `tol` times the
/// largest one.
pub fn orthonormal_basis(x_a: ArrayView2<f64>, tol: f64) -> Result<OrthoBasis> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("rank tolerance {tol} must be positive")));
    }
    ensure_finite(x_a.iter().copied(), "X_A")?;
    let n = x_a.nrows();
    let refl = pivoted_householder(x_a, tol);
    let k = refl.vs.len();
    let mut q = Array2::zeros((n, k));
    for j in 0..k {
        let mut e = Array1::zeros(n);
        e[j] = 1.0;
        refl.apply(&mut e);
        q.column_mut(j).assign(&e);
    }
    Ok(OrthoBasis {
        q,
        source_indices: (0..x_a.ncols()).collect(),
    })
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let row_j = l.slice(s![j, ..j]).to_owned();
        let d = a[[j, j]] - row_j.dot(&row_j);
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("matrix not positive definite at pivot {j}")));
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let v = a[[i, j]] - l.slice(s![i, ..j]).dot(&row_j);
            l[[i, j]] = v / djj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via its Cholesky factor.
pub fn spd_inverse(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let n = l.nrows();
    // L^{-1} by forward substitution, then (L^{-1})^T L^{-1}
    let mut linv = Array2::<f64>::zeros((n, n));
    for c in 0..n {
        linv[[c, c]] = 1.0 / l[[c, c]];
        for i in (c + 1)..n {
            let acc = l.slice(s![i, c..i]).dot(&linv.slice(s![c..i, c]));
            linv[[i, c]] = -acc / l[[i, i]];
        }
    }
    Ok(linv.t().dot(&linv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(n: usize, m: usize, rng: &mut RngStream) -> Array2<f64> {
        Array2::from_shape_fn((n, m), |_| rng.sample(StandardNormal))
    }

    fn assert_orthonormal(q: ArrayView2<f64>) {
        let g = q.t().dot(&q);
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-10, "QtQ[{i},{j}] = {v}");
        }
    }

    #[test]
    fn empty_and_unit_columns() {
        let b = orthonormal_basis(Array2::<f64>::zeros((5, 0)).view(), RANK_TOL).unwrap();
        assert_eq!(b.rank(), 0);
        assert_eq!(b.q().dim(), (5, 0));

        let e1 = array![[1.0], [0.0], [0.0]];
        let b = orthonormal_basis(e1.view(), RANK_TOL).unwrap();
        assert_eq!(b.rank(), 1);
        assert_abs_diff_eq!(b.q()[[0, 0]].abs(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.q().column(0).iter().map(|v| v.abs()).sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn collinear_pair_has_rank_one() {
        let mut rng = RngStream::new(1, 1);
        let v: Array1<f64> = (0..30).map(|_| rng.sample(StandardNormal)).collect();
        let mut m = Array2::zeros((30, 2));
        m.column_mut(0).assign(&v);
        m.column_mut(1).assign(&(&v * 2.0));
        assert_eq!(orthonormal_basis(m.view(), RANK_TOL).unwrap().rank(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        let m = array![[1.0, f64::NAN], [0.0, 1.0]];
        assert!(matches!(orthonormal_basis(m.view(), RANK_TOL), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn basis_spans_columns_and_is_orthonormal() {
        let mut rng = RngStream::new(2, 0);
        let x = random_matrix(40, 7, &mut rng);
        let b = orthonormal_basis(x.view(), RANK_TOL).unwrap();
        assert_eq!(b.rank(), 7);
        assert_orthonormal(b.q());
        for j in 0..7 {
            let resid = b.project_perp(x.column(j));
            assert!(resid.dot(&resid).sqrt() < 1e-10 * x.column(j).dot(&x.column(j)).sqrt());
        }
    }

    #[test]
    fn projection_identities() {
        let mut rng = RngStream::new(3, 0);
        for (n, m) in [(20, 3), (50, 12), (15, 15), (10, 25)] {
            let x = random_matrix(n, m, &mut rng);
            let b = orthonormal_basis(x.view(), RANK_TOL).unwrap();
            assert_eq!(b.rank(), m.min(n));
            let v: Array1<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let pv = b.project(v.view());
            let ppv = b.project(pv.view());
            for (a, c) in pv.iter().zip(&ppv) {
                assert!((a - c).abs() < 1e-8);
            }
            let perp = b.project_perp(v.view());
            assert_abs_diff_eq!(v.dot(&v), pv.dot(&pv) + perp.dot(&perp), epsilon = 1e-8);
        }
    }

    #[test]
    fn complement_is_orthogonal_to_span() {
        let mut rng = RngStream::new(4, 0);
        let x = random_matrix(12, 4, &mut rng);
        let b = orthonormal_basis(x.view(), RANK_TOL).unwrap();
        let c = b.complement();
        assert_eq!(c.dim(), (12, 8));
        assert_orthonormal(c.view());
        let cross = b.q().t().dot(&c);
        assert!(cross.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_and_inverse_round_trip() {
        let mut rng = RngStream::new(5, 0);
        let g = random_matrix(30, 10, &mut rng);
        let a = g.t().dot(&g) + Array2::<f64>::eye(10);
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        let inv = spd_inverse(a.view()).unwrap();
        let eye = a.dot(&inv);
        for ((i, j), v) in eye.indexed_iter() {
            assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
        }
        assert!(cholesky(array![[1.0, 2.0], [2.0, 1.0]].view()).is_err());
    }

    #[test]
    fn nested_prefixes_match_direct_bases() {
        let mut rng = crate::numkit::RngStream::new(11, 0);
        let mut x = Array2::from_shape_fn((30, 8), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let dup = &x.column(1) * 2.0;
        x.column_mut(4).assign(&dup);
        let order = [3, 1, 4, 0, 7];
        let nested = NestedBasis::new(x.view(), &order, RANK_TOL).unwrap();
        assert_eq!(nested.prefix_rank(3), 2);
        for len in 0..=order.len() {
            let a = nested.prefix(len);
            let b = OrthoBasis::from_columns(x.view(), &order[..len], RANK_TOL).unwrap();
            assert_eq!(a.rank(), b.rank());
            let v = Array1::from_shape_fn(30, |i| (i as f64).sin());
            let (pa, pb) = (a.project(v.view()), b.project(v.view()));
            for (u, w) in pa.iter().zip(&pb) {
                assert!((u - w).abs() < 1e-10);
            }
        }
    }
}
