#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use honestsets::solvers::soft_threshold;
use rand::Rng;
use rand_distr::StandardNormal;

use honestsets::numkit::RngStream;

pub fn gaussian_matrix(n: usize, p: usize, rng: &mut RngStream) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(n: usize, scale: f64, rng: &mut RngStream) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Golden-section minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}

/// Coarse grid to bracket the minimum, then golden section inside the bracket.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let m = 2000;
    let step = (hi - lo) / m as f64;
    let best = (0..=m)
        .map(|i| lo + i as f64 * step)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    golden_section(&f, (best - step).max(lo), (best + step).min(hi), 1e-14)
}

/// Brute-force volume constants, searching `t = 1/c1` on the constraint curve.
pub fn brute_volume_constants(k: usize, n: usize, e: f64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let objective = |t: f64| -kf * t.ln() - (nf - kf) * (1.0 - t).ln();
    let t = grid_then_golden(objective, 1.0 / e, 1.0 - 1.0 / e);
    (1.0 / t, 1.0 / (1.0 - t))
}

/// Brute-force diameter constants: minimize `max(c1 a, c2 p)` along `1/c1 + 1/c2 = 1`.
pub fn brute_diameter_constants(r_a: f64, r_perp: f64) -> (f64, f64) {
    let (a, p) = (r_a * r_a, r_perp * r_perp);
    let objective = |t: f64| (a / t).max(p / (1.0 - t));
    let t = grid_then_golden(objective, 1e-9, 1.0 - 1e-9);
    (1.0 / t, 1.0 / (1.0 - t))
}

/// Frequency of an event together with its binomial standard error.
pub fn frequency(hits: usize, total: usize) -> (f64, f64) {
    let f = hits as f64 / total as f64;
    (f, (f * (1.0 - f) / total as f64).sqrt().max(0.5 / total as f64))
}

pub fn lasso_objective(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, b: &Array1<f64>) -> f64 {
    let r = &y - &x.dot(b);
    r.dot(&r) / (2.0 * x.nrows() as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Accelerated proximal (sub)gradient descent on the same objective, run to a fixed iteration budget.
pub fn proximal_oracle(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, iters: usize) -> Array1<f64> {
    let n = x.nrows() as f64;
    let gram = x.t().dot(&x) / n;
    let xty = x.t().dot(&y) / n;
    // power iteration for the Lipschitz constant
    let mut v = Array1::from_elem(x.ncols(), 1.0);
    let mut lip = 0.0;
    for _ in 0..500 {
        let w = gram.dot(&v);
        lip = w.dot(&w).sqrt() / v.dot(&v).sqrt();
        v = &w / w.dot(&w).sqrt();
    }
    let step = 1.0 / (lip * 1.01);
    let mut b = Array1::zeros(x.ncols());
    let mut z = b.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let grad = gram.dot(&z) - &xty;
        let next = (&z - &(grad * step)).mapv(|u| soft_threshold(u, step * lambda));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &next + &((&next - &b) * ((t - 1.0) / t_next));
        b = next;
        t = t_next;
    }
    b
}
