//! Weak factorization `h = sum f_k conj(g_k)` of band-`2b` targets into
//! products of band-`a` functions, and the pairing of such sums with
//! operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    fft_spectrum, inverse_spectrum, lp_norm, quad_integral, Boundary, Grid, SampledFunction, C64,
};
use crate::pwspace::{sinc_kernel, Band, BandlimitedFunction};
use crate::toeplitz::{
    norm::spectral_norm, toeplitz_matrix, DenseMatrix, NyquistBasis, OperatorMatrix, SymbolSpec,
};

/// Sampling plan for `h = integral w(t) sinc_a(x - t)^2 dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerAtomPlan {
    pub spacing: f64,
    pub offset: f64,
    pub centers: Vec<f64>,
    pub weights: Vec<C64>,
    /// Half the target band.
    pub margin: f64,
    /// `max |w(t_k)| (1 + t_k^2)`.
    pub decay_constant: f64,
}

/// One summand `coeff sinc_a(. - center) * sinc_a(. - center)`, with
/// `f = coeff sinc_a(. - center)` and `g = sinc_a(. - center)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPair {
    pub center: f64,
    pub coeff: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub band: Band,
    pub p: f64,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<AtomPair>,
    pub pair_count: usize,
    /// `sum ||f_k||_p ||g_k||_q`.
    pub nuclear_sum: f64,
    pub residual_l1: f64,
    pub residual_sup: f64,
    pub target_l1: f64,
    pub target_sup: f64,
    /// Set when `residual_sup > 1e-6 ||h||_inf`.
    pub flagged: bool,
}

impl Factorization {
    pub fn f(&self, k: usize) -> Result<BandlimitedFunction> {
        let pair = self.pairs.get(k).ok_or_else(|| {
            Error::Domain(format!("pair {k} out of range ({} pairs)", self.pairs.len()))
        })?;
        let s = sinc_kernel(self.band, pair.center, &self.grid)?.scale(pair.coeff);
        BandlimitedFunction::certify(s, self.band)?.with_exponent(self.p)
    }

    pub fn g(&self, k: usize) -> Result<BandlimitedFunction> {
        let pair = self.pairs.get(k).ok_or_else(|| {
            Error::Domain(format!("pair {k} out of range ({} pairs)", self.pairs.len()))
        })?;
        let q = self.p / (self.p - 1.0);
        BandlimitedFunction::certify(sinc_kernel(self.band, pair.center, &self.grid)?, self.band)?
            .with_exponent(q)
    }

    /// `sum_k f_k conj(g_k)` on the grid.
    pub fn reconstruct(&self) -> Result<SampledFunction> {
        atom_sum(self.band, &self.grid, &self.pairs)
    }

    /// Copy without the pair list.
    pub fn summary(&self) -> Self {
        Factorization {
            pairs: Vec::new(),
            ..self.clone()
        }
    }
}

const CHUNK: usize = 32;

/// Sums per-chunk partial results in chunk order, so the floating-point
/// result does not depend on thread scheduling.
fn ordered_sum<T, F>(pairs: &[AtomPair], zero: impl Fn() -> T + Sync, add: impl Fn(T, T) -> T + Sync, term: F) -> Result<T>
where
    T: Send,
    F: Fn(&AtomPair) -> Result<T> + Sync,
{
    let parts = pairs
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().try_fold(zero(), |acc, x| Ok(add(acc, term(x)?))))
        .collect::<Result<Vec<T>>>()?;
    Ok(parts.into_iter().fold(zero(), &add))
}

fn atom_sum(a: Band, grid: &Grid, pairs: &[AtomPair]) -> Result<SampledFunction> {
    let n = grid.count();
    let acc = ordered_sum(
        pairs,
        || vec![C64::new(0.0, 0.0); n],
        |mut x, y| {
            x.iter_mut().zip(&y).for_each(|(u, v)| *u += v);
            x
        },
        |pair| {
            let s = sinc_kernel(a, pair.center, grid)?;
            Ok(s.values().iter().map(|v| v * v * pair.coeff).collect())
        },
    )?;
    SampledFunction::new(*grid, acc, Boundary::Periodic)
}

fn margin_of(h: &BandlimitedFunction, a: Band) -> Result<f64> {
    let b = h.band().value() / 2.0;
    if b >= a.value() {
        return Err(Error::Precondition(format!(
            "target band {} must be below 2a = {}",
            h.band().value(),
            2.0 * a.value()
        )));
    }
    if h.function().boundary() != Boundary::Periodic {
        return Err(Error::Lattice("products of band functions live on the periodic lattice".into()));
    }
    Ok(b)
}

/// `w` with `w * sinc_a^2 = h`: the spectrum of `h` divided by the triangle
/// `2a - |xi|` on `[-2b, 2b]`.
pub fn fejer_deconvolve(h: &BandlimitedFunction, a: Band) -> Result<SampledFunction> {
    let b = margin_of(h, a)?;
    let av = a.value();
    let edge = 2.0 * b + 1e-9 / h.function().grid().period();
    let mut s = fft_spectrum(h.function());
    s.multiply(|xi| {
        if xi.abs() <= edge {
            C64::new(1.0 / (2.0 * av - xi.abs()), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(inverse_spectrum(&s))
}

/// Largest dyadic spacing below `1 / (2(a + b))` that is a multiple of the
/// grid step.
fn default_spacing(grid: &Grid, a: f64, b: f64) -> Result<f64> {
    let limit = 1.0 / (2.0 * (a + b));
    let mut s = 1.0;
    while s >= limit {
        s /= 2.0;
    }
    if s < grid.step() || grid.index_of(grid.start() + s).is_none() {
        return Err(Error::UnderResolved {
            needed: 1.0 / s,
            nyquist: grid.nyquist(),
        });
    }
    Ok(s)
}

pub fn fejer_plan(h: &BandlimitedFunction, a: Band, spacing: f64, offset: f64) -> Result<FejerAtomPlan> {
    let b = margin_of(h, a)?;
    let grid = *h.function().grid();
    if !(spacing > 0.0 && spacing < 1.0 / (2.0 * (a.value() + b))) {
        return Err(Error::Precondition(format!(
            "atom spacing {spacing} must lie below 1/(2(a + b)) = {}",
            1.0 / (2.0 * (a.value() + b))
        )));
    }
    let count = (grid.period() / spacing).round() as usize;
    if ((count as f64) * spacing - grid.period()).abs() > 1e-9 * grid.period() {
        return Err(Error::Lattice(format!("spacing {spacing} does not divide the window")));
    }
    let w = fejer_deconvolve(h, a)?;
    let first = grid.start() + offset.rem_euclid(spacing);
    let (centers, weights): (Vec<f64>, Vec<C64>) = (0..count)
        .map(|k| {
            let t = first + k as f64 * spacing;
            let i = grid.index_of(t).ok_or_else(|| {
                Error::Lattice(format!("atom center {t} is not a grid point"))
            })?;
            Ok((t, w.values()[i]))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let decay_constant = centers
        .iter()
        .zip(&weights)
        .map(|(t, v)| v.norm() * (1.0 + t * t))
        .fold(0.0, f64::max);
    Ok(FejerAtomPlan {
        spacing,
        offset: offset.rem_euclid(spacing),
        centers,
        weights,
        margin: b,
        decay_constant,
    })
}

/// Center `t` such that `h = sinc_a(. - t)^2`, if there is one on the grid.
fn match_single_atom(h: &SampledFunction, a: Band) -> Result<Option<f64>> {
    let (peak, _) = h
        .values()
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .ok_or_else(|| Error::Domain("empty target".into()))?;
    let t = h.grid().x(peak);
    let atom = sinc_kernel(a, t, h.grid())?;
    let sq = atom.mul(&atom)?;
    let tol = 1e-12 * h.sup_norm().max(f64::MIN_POSITIVE);
    Ok((sq.sub(h)?.sup_norm() <= tol).then_some(t))
}

fn finish(h: &BandlimitedFunction, a: Band, p: f64, pairs: Vec<AtomPair>) -> Result<Factorization> {
    let grid = *h.function().grid();
    let target = h.function();
    let recon = atom_sum(a, &grid, &pairs)?;
    let diff = recon.sub(target)?;
    let atom = sinc_kernel(a, 0.0, &grid)?;
    let q = p / (p - 1.0);
    let atom_norms = lp_norm(&atom, p)? * lp_norm(&atom, q)?;
    let nuclear_sum = pairs.iter().map(|x| x.coeff.norm()).sum::<f64>() * atom_norms;
    let residual_sup = diff.sup_norm();
    let target_sup = target.sup_norm();
    Ok(Factorization {
        band: a,
        p,
        grid,
        pair_count: pairs.len(),
        pairs,
        nuclear_sum,
        residual_l1: lp_norm(&diff, 1.0)?,
        residual_sup,
        target_l1: lp_norm(target, 1.0)?,
        target_sup,
        flagged: residual_sup > 1e-6 * target_sup,
    })
}

/// Factorization from an explicit atom plan.
pub fn factorize_with_plan(
    h: &BandlimitedFunction,
    a: Band,
    p: f64,
    plan: &FejerAtomPlan,
) -> Result<Factorization> {
    check_exponent(p)?;
    let pairs = plan
        .centers
        .iter()
        .zip(&plan.weights)
        .filter(|(_, w)| w.norm() > 0.0)
        .map(|(&center, &w)| AtomPair {
            center,
            coeff: w * plan.spacing,
        })
        .collect();
    finish(h, a, p, pairs)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("exponent must lie in (1, inf), got {p}")));
    }
    Ok(())
}

/// Weak factorization with the default plan. A target that is a single
/// atom `sinc_a(. - t)^2` is returned as one pair.
pub fn weak_factorize(h: &BandlimitedFunction, a: Band, p: f64) -> Result<Factorization> {
    check_exponent(p)?;
    if h.function().sup_norm() == 0.0 {
        return finish(h, a, p, Vec::new());
    }
    if (h.band().value() - 2.0 * a.value()).abs() <= 1e-12 {
        if let Some(center) = match_single_atom(h.function(), a)? {
            let pair = AtomPair {
                center,
                coeff: C64::new(1.0, 0.0),
            };
            return finish(h, a, p, vec![pair]);
        }
    }
    let b = margin_of(h, a)?;
    let spacing = default_spacing(h.function().grid(), a.value(), b)?;
    let plan = fejer_plan(h, a, spacing, 0.0)?;
    factorize_with_plan(h, a, p, &plan)
}

/// `sinc_b^2` on the grid, the standard factorization target at band `2b`.
pub fn fejer_target(b: Band, grid: &Grid) -> Result<BandlimitedFunction> {
    let s = sinc_kernel(b, 0.0, grid)?;
    BandlimitedFunction::certify(s.mul(&s)?, Band::new(2.0 * b.value())?)
}

fn check_basis(t: &OperatorMatrix, f: &Factorization) -> Result<()> {
    if t.basis.band() != f.band || !t.basis.grid().same_window(&f.grid) || t.basis.grid() != &f.grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `sum_k <T f_k, g_k>`.
pub fn pair(t: &OperatorMatrix, f: &Factorization) -> Result<C64> {
    check_basis(t, f)?;
    let basis = &t.basis;
    let n = basis.len();
    let m = ordered_sum(
        &f.pairs,
        || DenseMatrix::zeros(n, n),
        |a, b| a + b,
        |x| {
            let u = nalgebra::DVector::from_vec(
                basis.coefficients(&sinc_kernel(f.band, x.center, &f.grid)?)?,
            );
            Ok(&u * u.adjoint() * x.coeff)
        },
    )?;
    Ok(t.entries.component_mul(&m.transpose()).sum())
}

/// Operator used to probe the dual norm, with an upper bound of its norm.
#[derive(Clone, Debug)]
pub struct XpqProbe {
    pub name: String,
    pub matrix: OperatorMatrix,
    pub norm_bound: f64,
}

/// Identity plus seeded Gaussian-symbol Toeplitz operators. The norm bound
/// is `sigma_max` at `p = 2` and `||phi||_inf ||sinc_a||_1` otherwise.
pub fn xpq_test_set(basis: &NyquistBasis, p: f64, seed: u64, count: usize) -> Result<Vec<XpqProbe>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let kernel_l1 = lp_norm(&sinc_kernel(basis.band(), 0.0, basis.grid())?, 1.0)?;
    let mut out = vec![XpqProbe {
        name: "identity".into(),
        matrix: OperatorMatrix::identity(*basis, p),
        norm_bound: 1.0,
    }];
    for k in 0..count {
        let phi = SymbolSpec::gaussian(
            1.0,
            rng.gen_range(0.5..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.0..1.0),
        );
        let matrix = toeplitz_matrix(&phi, basis, p)?;
        let norm_bound = if p == 2.0 {
            spectral_norm(&matrix.entries)
        } else {
            phi.sample(basis.grid())?.sup_norm() * kernel_l1
        };
        out.push(XpqProbe {
            name: format!("gaussian_{k}"),
            matrix,
            norm_bound,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XpqEstimate {
    pub estimate: f64,
    pub l1_norm: f64,
    pub nuclear_sum: f64,
    /// `||h||_1 <= nuclear_sum` and `estimate <= nuclear_sum`.
    pub sandwich: bool,
}

/// `max |pair(T, F)| / ||T||` over the probes; a lower bound for the dual
/// norm of `h`.
pub fn xpq_norm_estimate(
    h: &BandlimitedFunction,
    a: Band,
    p: f64,
    probes: &[XpqProbe],
) -> Result<XpqEstimate> {
    let f = weak_factorize(h, a, p)?;
    let mut estimate: f64 = 0.0;
    for probe in probes {
        if probe.norm_bound > 0.0 {
            estimate = estimate.max(pair(&probe.matrix, &f)?.norm() / probe.norm_bound);
        }
    }
    let slack = 1e-12 * f.nuclear_sum;
    Ok(XpqEstimate {
        estimate,
        l1_norm: f.target_l1,
        nuclear_sum: f.nuclear_sum,
        sandwich: f.target_l1 <= f.nuclear_sum + slack && estimate <= f.nuclear_sum + slack,
    })
}

/// Reference value of `<T_phi, h>`: `integral phi h` on the grid.
pub fn symbol_pairing(phi: &SymbolSpec, h: &SampledFunction) -> Result<C64> {
    Ok(quad_integral(&phi.sample(h.grid())?.mul(h)?))
}
