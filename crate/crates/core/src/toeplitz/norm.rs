//! Operator p-norm estimation for dense complex matrices.
//!
//! Lower bounds come from a Boyd-Higham power iteration over the l^p unit
//! ball; upper bounds from Riesz-Thorin interpolation between the 1- and
//! inf-norms, or the largest singular value at p = 2.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::C64;

pub type DenseMatrix = DMatrix<C64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
}

const RANDOM_RESTARTS: usize = 8;
const MAX_ITERS: usize = 200;

fn vec_pnorm(v: &DVector<C64>, p: f64) -> f64 {
    if p.is_infinite() {
        return v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|z| (z.norm() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Unit vector in l^q dual to `y` in l^p: `<y, d> = ||y||_p`, `||d||_q = 1`.
fn dual_vector(y: &DVector<C64>, p: f64) -> DVector<C64> {
    let norm = vec_pnorm(y, p);
    if norm == 0.0 {
        return DVector::zeros(y.len());
    }
    y.map(|z| {
        let r = z.norm();
        if r == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            z / r * (r / norm).powf(p - 1.0)
        }
    })
}

/// Maximum absolute column sum.
pub fn norm_one(m: &DenseMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &DenseMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Riesz-Thorin bound `||M||_1^(1/p) ||M||_inf^(1 - 1/p)`.
pub fn interpolation_bound(m: &DenseMatrix, p: f64) -> f64 {
    if p.is_infinite() {
        return norm_inf(m);
    }
    norm_one(m).powf(1.0 / p) * norm_inf(m).powf(1.0 - 1.0 / p)
}

/// Power iteration from `x0`; returns the best ratio `||M x||_p / ||x||_p`.
fn power_iterate(m: &DenseMatrix, x0: DVector<C64>, p: f64) -> f64 {
    let q = conjugate_exponent(p);
    let n0 = vec_pnorm(&x0, p);
    if n0 == 0.0 {
        return 0.0;
    }
    let mut x = x0 / C64::new(n0, 0.0);
    let mut best = 0.0_f64;
    let adj = m.adjoint();
    for _ in 0..MAX_ITERS {
        let y = m * &x;
        let est = vec_pnorm(&y, p);
        let improved = est > best * (1.0 + 1e-13);
        best = best.max(est);
        if est == 0.0 {
            break;
        }
        let z = &adj * dual_vector(&y, p);
        let zq = vec_pnorm(&z, q);
        let zx = z.dotc(&x).re;
        if zq <= zx * (1.0 + 1e-12) || !improved && best > 0.0 && zq <= best * (1.0 + 1e-12) {
            break;
        }
        x = dual_vector(&z, q);
    }
    best
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

/// Best lower bound over structured and seeded random starts.
pub fn pnorm_lower(m: &DenseMatrix, p: f64, seed: u64) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    if p == 1.0 {
        return norm_one(m);
    }
    if p.is_infinite() {
        return norm_inf(m);
    }
    if p == 2.0 {
        return spectral_norm(m);
    }
    let mut starts: Vec<DVector<C64>> = vec![DVector::from_element(cols, C64::new(1.0, 0.0))];
    let mut col_ratio: Vec<(f64, usize)> = (0..cols)
        .map(|k| (vec_pnorm(&m.column(k).into_owned(), p), k))
        .collect();
    col_ratio.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, k) in col_ratio.iter().take(3) {
        let mut e = DVector::zeros(cols);
        e[k] = C64::new(1.0, 0.0);
        starts.push(e);
    }
    let svd = m.clone().svd(false, true);
    if let Some(vt) = svd.v_t {
        let top = svd
            .singular_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        starts.push(vt.row(top).adjoint());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_RESTARTS {
        let r = random_vector(&mut rng, cols);
        if rows == cols {
            starts.push(m * &r);
        }
        starts.push(r);
    }
    starts
        .into_iter()
        .map(|x| power_iterate(m, x, p))
        .fold(0.0, f64::max)
}

/// Lower and upper bounds for `||M||_{p -> p}`.
pub fn pnorm_dense(m: &DenseMatrix, p: f64) -> Result<NormEstimate> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("operator p-norm needs p >= 1, got {p}")));
    }
    let lower = pnorm_lower(m, p, 42);
    let mut upper = interpolation_bound(m, p);
    if p == 2.0 {
        upper = upper.min(spectral_norm(m));
    }
    Ok(NormEstimate {
        lower: lower.min(upper),
        upper: upper.max(lower),
    })
}
