//! Paley-Wiener structure: band kernels, the projectors `P_a` and `P_+-`,
//! modulation by `theta_b(x) = exp(2 pi i b x)`, evaluation functionals,
//! and Cauchy / reproducing kernels.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    apply_multiplier, cis_turns, fft_spectrum, inverse_spectrum, Boundary, Grid, SampledFunction,
    Spectrum, C64,
};
use crate::toeplitz::norm::{pnorm_lower, DenseMatrix};

const I: C64 = C64::new(0.0, 1.0);

/// Band radius `a > 0`: members of `PW_a` have spectra in `[-a, a]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Band(f64);

impl Band {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("band radius must be positive, got {a}")));
        }
        Ok(Band(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `a * P` must be an integer for the band edge to fall between
    /// antiperiodic lattice points.
    pub fn fits_window(self, period: f64) -> bool {
        is_integer(self.0 * period)
    }
}

impl TryFrom<f64> for Band {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Band::new(a)
    }
}

impl From<Band> for f64 {
    fn from(b: Band) -> f64 {
        b.0
    }
}

pub(crate) fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
}

/// Tolerance for "inclusive" comparisons on the frequency lattice.
fn edge_tol(period: f64) -> f64 {
    1e-9 / period
}

/// A sampled function certified to lie in `PW_a` up to `residual`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandlimitedFunction {
    f: SampledFunction,
    band: Band,
    p: f64,
    residual: f64,
}

pub const MEMBER_TOLERANCE: f64 = 1e-8;

impl BandlimitedFunction {
    /// Certifies `f` against band `a` with the default tolerance.
    pub fn certify(f: SampledFunction, band: Band) -> Result<Self> {
        Self::certify_with(f, band, MEMBER_TOLERANCE)
    }

    pub fn certify_with(f: SampledFunction, band: Band, tol: f64) -> Result<Self> {
        let residual = band_residual(&f, band);
        if residual > tol {
            return Err(Error::Precondition(format!(
                "band residual {residual:.3e} exceeds {tol:.1e} for band {}",
                band.value()
            )));
        }
        Ok(BandlimitedFunction {
            f,
            band,
            p: 2.0,
            residual,
        })
    }

    pub fn with_exponent(mut self, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Domain(format!("exponent must lie in (1, inf), got {p}")));
        }
        self.p = p;
        Ok(self)
    }

    pub fn function(&self) -> &SampledFunction {
        &self.f
    }

    pub fn into_function(self) -> SampledFunction {
        self.f
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Closed-form `sin(2 pi a u) / (pi u)` with value `2a` at `u = 0`.
pub fn line_sinc(a: f64, u: f64) -> f64 {
    if u.abs() < 1e-300 {
        return 2.0 * a;
    }
    let arg = TAU * a * u;
    if arg.abs() < 1e-6 {
        return 2.0 * a * (1.0 - arg * arg / 6.0);
    }
    arg.sin() / (PI * u)
}

/// Window band kernel `D(w) = (1/P) sum exp(2 pi i xi w)` over lattice
/// frequencies with `|xi| <= a`, evaluated at complex `w` by a geometric sum.
pub fn band_kernel(a: f64, w: C64, period: f64, boundary: Boundary) -> C64 {
    let o = boundary.offset();
    let tol = edge_tol(period) * period;
    let j0 = (-a * period - o - tol).ceil() as i64;
    let j1 = (a * period - o + tol).floor() as i64;
    if j1 < j0 {
        return C64::new(0.0, 0.0);
    }
    let n = (j1 - j0 + 1) as f64;
    let half_theta = I * PI * w / period;
    let centre = 0.5 * (j0 + j1) as f64 + o;
    let phase = (half_theta * 2.0 * centre).exp();
    let den = (half_theta / I).sin();
    if den.norm() < 1e-9 {
        let ratio = (half_theta * 2.0).exp();
        let first = (half_theta * 2.0 * (j0 as f64 + o)).exp();
        return first * (0..(j1 - j0 + 1)).map(|k| ratio.powi(k as i32)).sum::<C64>() / period;
    }
    phase * (half_theta / I * n).sin() / (den * period)
}

/// Lattice the window picks for a kernel of band `a`.
pub fn natural_boundary(a: f64, period: f64) -> Boundary {
    if !is_integer(a * period) && is_integer(2.0 * a * period) {
        Boundary::Periodic
    } else {
        Boundary::Antiperiodic
    }
}

/// Samples of the band kernel `sinc_a(x - t)`, synthesized spectrally: each
/// lattice frequency carries the fraction of its cell lying in `[-a, a]`,
/// so the value at `x = t` is `2a` exactly. With `a P` an integer this is
/// `sin(2 pi a u) / (P sin(pi u / P))`, which tends to `sin(2 pi a u)/(pi u)`
/// as the window grows.
pub fn sinc_kernel(a: Band, t: f64, grid: &Grid) -> Result<SampledFunction> {
    let a = a.value();
    let period = grid.period();
    let boundary = natural_boundary(a, period);
    let reach = a + 1.0 / period;
    if reach >= grid.nyquist() {
        return Err(Error::UnderResolved {
            needed: reach,
            nyquist: grid.nyquist(),
        });
    }
    let mut s = fft_spectrum(&SampledFunction::zeros(*grid, boundary));
    let half_cell = 0.5 / period;
    for m in 0..s.values().len() {
        let xi = s.freq(m);
        let lo = (xi - half_cell).max(-a);
        let hi = (xi + half_cell).min(a);
        let w = ((hi - lo) * period).clamp(0.0, 1.0);
        s.values_mut()[m] = cis_turns(-xi * t) * w;
    }
    Ok(inverse_spectrum(&s))
}

fn check_resolves(grid: &Grid, a: f64) -> Result<()> {
    if a >= grid.nyquist() {
        return Err(Error::UnderResolved {
            needed: a,
            nyquist: grid.nyquist(),
        });
    }
    Ok(())
}

fn indicator(a: f64, period: f64) -> impl Fn(f64) -> C64 {
    let edge = a + edge_tol(period);
    move |xi| {
        if xi.abs() <= edge {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// Spectral projection onto `PW_a`; the band edge is included.
pub fn project_band(f: &SampledFunction, a: Band) -> Result<BandlimitedFunction> {
    check_resolves(f.grid(), a.value())?;
    let out = apply_multiplier(f, indicator(a.value(), f.grid().period()));
    let residual = band_residual(&out, a);
    Ok(BandlimitedFunction {
        f: out,
        band: a,
        p: 2.0,
        residual,
    })
}

/// Restricts a spectrum to `[-a, a]` in place.
pub fn restrict_spectrum(s: &mut Spectrum, a: f64) {
    let ind = indicator(a, s.space().period());
    s.multiply(ind);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfLine {
    Plus,
    Minus,
}

/// Riesz projector `P_+` (multiplier `chi_[0, inf)`) or `P_- = I - P_+`.
pub fn project_halfline(f: &SampledFunction, sign: HalfLine) -> SampledFunction {
    let tol = edge_tol(f.grid().period());
    match sign {
        HalfLine::Plus => apply_multiplier(f, move |xi| {
            if xi >= -tol {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
        HalfLine::Minus => apply_multiplier(f, move |xi| {
            if xi >= -tol {
                C64::new(0.0, 0.0)
            } else {
                C64::new(1.0, 0.0)
            }
        }),
    }
}

/// `theta_b(z) = exp(2 pi i b z)` at a complex point.
pub fn theta(b: f64, z: C64) -> C64 {
    (I * TAU * b * z).exp()
}

/// Pointwise product with `exp(2 pi i c x)`. The shifted spectrum must stay
/// on a window lattice, so `c P` has to be a multiple of one half.
pub fn modulate(f: &SampledFunction, c: f64) -> Result<SampledFunction> {
    let grid = f.grid();
    let boundary = f.boundary().shifted(c, grid.period()).ok_or_else(|| {
        Error::Lattice(format!(
            "modulation by {c} does not map the window lattice of period {} to itself",
            grid.period()
        ))
    })?;
    let values = grid
        .positions()
        .zip(f.values())
        .map(|(x, &v)| v * cis_turns(c * x))
        .collect();
    SampledFunction::new(*grid, values, boundary)
}

/// Point evaluation `f(z) = integral of D_a(z - y) f(y) dy` by trapezoid
/// quadrature against the window band kernel; `z` may be complex.
pub fn eval_functional(f: &BandlimitedFunction, z: C64) -> C64 {
    let g = f.function();
    let grid = g.grid();
    let a = f.band().value();
    let period = grid.period();
    grid.positions()
        .zip(g.values())
        .map(|(y, &v)| band_kernel(a, z - y, period, g.boundary()) * v)
        .sum::<C64>()
        * grid.step()
}

/// `(energy outside [-a, a]) / (total energy)`; zero for the zero function.
pub fn band_residual(f: &SampledFunction, a: Band) -> f64 {
    let s = fft_spectrum(f);
    let total = s.energy_where(|_| true);
    if total == 0.0 {
        return 0.0;
    }
    let edge = a.value() + edge_tol(f.grid().period());
    s.energy_where(|xi| xi.abs() > edge) / total
}

/// Dense matrix of a linear map on grid samples, column by column.
fn grid_operator_matrix(
    grid: &Grid,
    boundary: Boundary,
    op: impl Fn(&SampledFunction) -> SampledFunction,
) -> DenseMatrix {
    let n = grid.count();
    let mut m = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = SampledFunction::zeros(*grid, boundary).into_values();
        e[k] = C64::new(1.0, 0.0);
        let col = op(&SampledFunction::new(*grid, e, boundary).expect("finite unit vector"));
        for (j, v) in col.values().iter().enumerate() {
            m[(j, k)] = *v;
        }
    }
    m
}

const MAX_DENSE_GRID: usize = 1024;

fn check_dense(grid: &Grid) -> Result<()> {
    if grid.count() > MAX_DENSE_GRID {
        return Err(Error::Domain(format!(
            "grid with {} samples is too large for a dense norm estimate (max {MAX_DENSE_GRID})",
            grid.count()
        )));
    }
    Ok(())
}

/// Lower estimate of `A_p = ||P_+||_{p -> p}` on the sampled window.
pub fn riesz_constant_estimate(p: f64, grid: &Grid) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("A_p needs 1 < p < inf, got {p}")));
    }
    check_dense(grid)?;
    let m = grid_operator_matrix(grid, Boundary::Periodic, |f| {
        project_halfline(f, HalfLine::Plus)
    });
    Ok(pnorm_lower(&m, p, 0x5eed_a9))
}

/// Lower estimate of `||P_a||_{p -> p}` on the sampled window.
pub fn band_projector_norm_estimate(a: Band, p: f64, grid: &Grid) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    check_dense(grid)?;
    check_resolves(grid, a.value())?;
    let boundary = natural_boundary(a.value(), grid.period());
    let ind = indicator(a.value(), grid.period());
    let m = grid_operator_matrix(grid, boundary, |f| apply_multiplier(f, &ind));
    Ok(pnorm_lower(&m, p, 0x5eed_a9))
}

fn check_upper(z: C64) -> Result<()> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("point must lie in the upper half-plane, got {z}")));
    }
    Ok(())
}

/// Line Cauchy kernel `h_z(x) = (1 / 2 pi i) / (conj(z) - x)`.
pub fn cauchy_kernel(z: C64, grid: &Grid) -> Result<SampledFunction> {
    check_upper(z)?;
    SampledFunction::from_fn(*grid, Boundary::Periodic, |x| {
        1.0 / (I * TAU * (z.conj() - x))
    })
}

/// Window Cauchy kernel: `<f, h> = f(z)` for every window function `f` with
/// spectrum in `[0, inf)` on the given lattice. With
/// `q = exp(2 pi i (x - conj z) / P)` it equals `(1/P) q^o / (1 - q)`,
/// `o` the lattice offset (or `q / (1 - q)` on the periodic lattice).
pub fn cauchy_kernel_window(z: C64, grid: &Grid, boundary: Boundary) -> Result<SampledFunction> {
    check_upper(z)?;
    let period = grid.period();
    SampledFunction::from_fn(*grid, boundary, |x| window_cauchy(z, x, period, boundary))
}

fn window_cauchy(z: C64, x: f64, period: f64, boundary: Boundary) -> C64 {
    let w = x - z.conj();
    match boundary {
        Boundary::Antiperiodic => {
            let half = (I * PI * w / period).exp();
            half / (period * (C64::new(1.0, 0.0) - half * half))
        }
        Boundary::Periodic => {
            let q = (I * TAU * w / period).exp();
            q / (period * (C64::new(1.0, 0.0) - q))
        }
    }
}

/// Exponential inner function `theta_b`, the only kind instantiated here.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InnerFunction {
    Exp { b: f64 },
}

impl InnerFunction {
    pub fn exp(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Unsupported(format!(
                "inner function exp(2 pi i b z) needs b > 0, got {b}"
            )));
        }
        Ok(InnerFunction::Exp { b })
    }

    pub fn b(self) -> f64 {
        match self {
            InnerFunction::Exp { b } => b,
        }
    }

    pub fn at(self, z: C64) -> C64 {
        theta(self.b(), z)
    }

    fn validate(self) -> Result<()> {
        InnerFunction::exp(self.b()).map(|_| ())
    }
}

/// Line reproducing kernel of `K_theta`:
/// `(1 / 2 pi i) (1 - conj(theta(z)) theta(x)) / (conj(z) - x)`.
pub fn repro_kernel(th: InnerFunction, z: C64, grid: &Grid) -> Result<SampledFunction> {
    th.validate()?;
    check_upper(z)?;
    let tz = th.at(z).conj();
    SampledFunction::from_fn(*grid, Boundary::Periodic, |x| {
        (C64::new(1.0, 0.0) - tz * th.at(C64::new(x, 0.0))) / (I * TAU * (z.conj() - x))
    })
}

/// Line conjugate kernel `(1 / 2 pi i) (theta(x) - theta(z)) / (x - z)`.
pub fn conj_kernel(th: InnerFunction, z: C64, grid: &Grid) -> Result<SampledFunction> {
    th.validate()?;
    check_upper(z)?;
    let tz = th.at(z);
    SampledFunction::from_fn(*grid, Boundary::Periodic, |x| {
        (th.at(C64::new(x, 0.0)) - tz) / (I * TAU * (x - z))
    })
}

/// Window reproducing kernel of `K_theta`: the window Cauchy kernel with its
/// spectrum cut to `[0, b]`, i.e. `(1 - conj(theta(z)) theta(x)) h_z(x)`.
pub fn repro_kernel_window(
    th: InnerFunction,
    z: C64,
    grid: &Grid,
    boundary: Boundary,
) -> Result<SampledFunction> {
    th.validate()?;
    check_upper(z)?;
    if !is_integer(th.b() * grid.period()) {
        return Err(Error::Lattice(format!(
            "theta_b with b = {} does not preserve the window lattice",
            th.b()
        )));
    }
    let tz = th.at(z).conj();
    let period = grid.period();
    SampledFunction::from_fn(*grid, boundary, |x| {
        (C64::new(1.0, 0.0) - tz * th.at(C64::new(x, 0.0))) * window_cauchy(z, x, period, boundary)
    })
}

/// Window conjugate kernel `theta * conj(k_theta,z)`.
pub fn conj_kernel_window(
    th: InnerFunction,
    z: C64,
    grid: &Grid,
    boundary: Boundary,
) -> Result<SampledFunction> {
    let k = repro_kernel_window(th, z, grid, boundary)?;
    let values = grid
        .positions()
        .zip(k.values())
        .map(|(x, v)| th.at(C64::new(x, 0.0)) * v.conj())
        .collect();
    SampledFunction::new(*grid, values, boundary)
}

/// Tanh-sinh nodes and weights on `[0, 1]`.
fn tanh_sinh_unit() -> Vec<(f64, f64)> {
    let h = 1.0 / 32.0;
    let kmax = 112;
    (-kmax..=kmax)
        .filter_map(|k| {
            let t = k as f64 * h;
            let s = 0.5 * PI * t.sinh();
            let x = 0.5 * (1.0 + s.tanh());
            let w = 0.25 * PI * t.cosh() / (s.cosh() * s.cosh()) * h;
            (x > 0.0 && x < 1.0 && w > 0.0).then_some((x, w))
        })
        .collect()
}

/// `integral over R of |sin(pi x) / (pi x)|^p dx` for `p > 1`: tanh-sinh
/// on each unit cell up to `|x| = 10^4`, then the tail with `|sin|^p`
/// replaced by its mean.
fn unit_sinc_lp_integral(p: f64) -> f64 {
    const CELLS: usize = 10_000;
    let nodes = tanh_sinh_unit();
    let sin_p: Vec<f64> = nodes.iter().map(|&(x, _)| (PI * x).sin().abs().powf(p)).collect();
    let mean: f64 = nodes.iter().zip(&sin_p).map(|(&(_, w), s)| w * s).sum();
    let mut half = 0.0;
    for m in 0..CELLS {
        let cell: f64 = nodes
            .iter()
            .zip(&sin_p)
            .map(|(&(x, w), &s)| {
                let u = m as f64 + x;
                let v = if m == 0 && u < 1e-8 { 1.0 } else { s / (PI * u).powf(p) };
                w * v
            })
            .sum();
        half += cell;
    }
    let k = CELLS as f64;
    half += mean * PI.powf(-p) * k.powf(1.0 - p) / (p - 1.0);
    2.0 * half
}

/// `||sin(2 pi b x) / (pi x)||_{L^p(R)}` of the line kernel, `1 < p < inf`,
/// via `||sinc_b||_p = (2b)^(1 - 1/p) ||sin(pi x)/(pi x)||_p`.
pub fn sinc_lp_norm(b: f64, p: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("sinc is in L^p only for p > 1, got {p}")));
    }
    if !(b > 0.0) {
        return Err(Error::Domain(format!("band must be positive, got {b}")));
    }
    Ok((2.0 * b).powf(1.0 - 1.0 / p) * unit_sinc_lp_integral(p).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner, lp_norm, quad_integral, Interpolant};
    use approx::assert_abs_diff_eq;

    fn band(a: f64) -> Band {
        Band::new(a).unwrap()
    }

    #[test]
    fn sinc_peak_is_two_a() {
        let g = Grid::for_band(1.0, 16.0, 8).unwrap();
        let s = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        let k0 = g.index_of(0.0).unwrap();
        assert_abs_diff_eq!(s.values()[k0].re, 2.0, epsilon = 1e-13);
        let kh = g.index_of(0.5).unwrap();
        assert_abs_diff_eq!(s.values()[kh].norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn aligned_kernel_is_dirichlet() {
        let g = Grid::for_band(1.0, 16.0, 4).unwrap();
        let s = sinc_kernel(band(1.0), 0.75, &g).unwrap();
        for (k, x) in g.positions().enumerate() {
            let u = x - 0.75;
            let d = if u.abs() < 1e-12 {
                2.0
            } else {
                (TAU * u).sin() / (16.0 * (PI * u / 16.0).sin())
            };
            assert_abs_diff_eq!(s.values()[k].re, d, epsilon = 1e-12);
        }
    }

    #[test]
    fn sinc_norms_by_plancherel() {
        let g = Grid::for_band(1.0, 400.0, 4).unwrap();
        let s1 = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        assert_abs_diff_eq!(lp_norm(&s1, 2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-3);
        let s8 = sinc_kernel(band(0.125), 0.0, &g).unwrap();
        assert_abs_diff_eq!(lp_norm(&s8, 2.0).unwrap(), 0.5, epsilon = 1e-3);
        let sq = s1.mul(&s1).unwrap();
        assert_abs_diff_eq!(quad_integral(&sq).re, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn nyquist_shifted_sincs_are_orthogonal() {
        let g = Grid::for_band(1.0, 64.0, 8).unwrap();
        let s0 = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        let s1 = sinc_kernel(band(1.0), 0.5, &g).unwrap();
        assert!(inner(&s0, &s1).unwrap().norm() <= 1e-3);
    }

    #[test]
    fn offgrid_sinc_matches_closed_form() {
        let g = Grid::for_band(1.0, 512.0, 4).unwrap();
        let s = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        let ip = Interpolant::new(&s);
        assert_abs_diff_eq!(ip.eval(0.25).re, 4.0 / PI, epsilon = 1e-6);
        assert_abs_diff_eq!(ip.eval(0.5).norm(), 0.0, epsilon = 1e-8);
        let v = ip.eval(0.3);
        assert_abs_diff_eq!(v.re, line_sinc(1.0, 0.3), epsilon = 1e-6);
    }

    #[test]
    fn band_kernel_matches_synthesized_kernel() {
        let g = Grid::for_band(1.0, 32.0, 4).unwrap();
        let s = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        for (k, x) in g.positions().enumerate().step_by(7) {
            let d = band_kernel(1.0, C64::new(x, 0.0), 32.0, Boundary::Antiperiodic);
            assert!((d - s.values()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_fixes_narrower_band() {
        let g = Grid::for_band(1.0, 64.0, 8).unwrap();
        let f = sinc_kernel(band(0.5), 0.3, &g).unwrap();
        let p = project_band(&f, band(1.0)).unwrap();
        let d = p.function().sub(&f).unwrap();
        assert!(d.sup_norm() <= 1e-10 * f.sup_norm());
    }

    #[test]
    fn projection_kills_disjoint_spectrum() {
        let g = Grid::for_band(1.0, 64.0, 8).unwrap();
        let f = sinc_kernel(band(0.5), 0.0, &g).unwrap();
        let shifted = modulate(&f, 3.0).unwrap();
        let p = project_band(&shifted, band(1.0)).unwrap();
        assert!(p.function().sup_norm() <= 1e-8);
        assert!(band_residual(&shifted, band(1.0)) >= 0.999);
    }

    #[test]
    fn under_resolved_projection_errors() {
        let g = Grid::centered(8.0, 0.5).unwrap();
        let f = SampledFunction::zeros(g, Boundary::Periodic);
        assert!(matches!(
            project_band(&f, band(1.5)),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn halfline_projectors_partition() {
        let g = Grid::for_band(1.0, 32.0, 8).unwrap();
        let f = sinc_kernel(band(1.0), 0.2, &g).unwrap();
        let sum = project_halfline(&f, HalfLine::Plus)
            .add(&project_halfline(&f, HalfLine::Minus))
            .unwrap();
        assert!(sum.sub(&f).unwrap().sup_norm() <= 1e-12);
        let up = modulate(&sinc_kernel(band(0.5), 0.0, &g).unwrap(), 1.5).unwrap();
        let pp = project_halfline(&up, HalfLine::Plus);
        assert!(pp.sub(&up).unwrap().sup_norm() <= 1e-12);
    }

    #[test]
    fn modulation_round_trip_and_modulus() {
        let g = Grid::for_band(1.0, 32.0, 8).unwrap();
        let f = sinc_kernel(band(1.0), 0.2, &g).unwrap();
        assert_eq!(modulate(&f, 0.0).unwrap(), f);
        let back = modulate(&modulate(&f, 0.75).unwrap(), -0.75).unwrap();
        assert!(back.sub(&f).unwrap().sup_norm() <= 1e-14);
        let m = modulate(&f, 0.75).unwrap();
        for (u, v) in m.values().iter().zip(f.values()) {
            assert_abs_diff_eq!(u.norm(), v.norm(), epsilon = 1e-14);
        }
        assert!(modulate(&f, 0.01).is_err());
    }

    #[test]
    fn theta_at_i() {
        assert_abs_diff_eq!(theta(1.0, I).re, (-TAU).exp(), epsilon = 1e-18);
        assert_abs_diff_eq!(theta(1.0, I).im, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn evaluation_functional_reproduces() {
        let g = Grid::for_band(1.0, 64.0, 8).unwrap();
        let s = BandlimitedFunction::certify(sinc_kernel(band(1.0), 0.0, &g).unwrap(), band(1.0))
            .unwrap();
        assert_abs_diff_eq!(eval_functional(&s, C64::new(0.0, 0.0)).re, 2.0, epsilon = 1e-6);
        let h = BandlimitedFunction::certify(sinc_kernel(band(0.5), 0.1, &g).unwrap(), band(1.0))
            .unwrap();
        let ip = Interpolant::new(h.function());
        for x in [-3.3, 0.0, 0.77, 12.25] {
            let e = eval_functional(&h, C64::new(x, 0.0));
            assert!((e - ip.eval(x)).norm() <= 1e-6);
        }
    }

    #[test]
    fn entire_extension_matches_closed_form() {
        let g = Grid::for_band(1.0, 4096.0, 4).unwrap();
        let s = BandlimitedFunction::certify(sinc_kernel(band(0.5), 0.0, &g).unwrap(), band(1.0))
            .unwrap();
        for z in [C64::new(0.3, 0.2), C64::new(-1.1, -0.5), C64::new(0.0, 1.0)] {
            let exact = (PI * z).sin() / (PI * z);
            let e = eval_functional(&s, z);
            assert!((e - exact).norm() <= 1e-6, "z = {z}: {e} vs {exact}");
        }
    }

    #[test]
    fn window_cauchy_kernel_reproduces_upper_functions() {
        let g = Grid::for_band(2.0, 64.0, 8).unwrap();
        let s = sinc_kernel(band(1.0), 0.0, &g).unwrap();
        let f = modulate(&s, 1.0).unwrap();
        let h = cauchy_kernel_window(I, &g, f.boundary()).unwrap();
        let lhs = inner(&f, &h).unwrap();
        let rhs = theta(1.0, I) * band_kernel(1.0, I, 64.0, Boundary::Antiperiodic);
        assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn line_cauchy_kernel_value_at_origin() {
        let g = Grid::centered(4.0, 0.5).unwrap();
        let h = cauchy_kernel(I, &g).unwrap();
        let k0 = g.index_of(0.0).unwrap();
        assert_abs_diff_eq!(h.values()[k0].re, 1.0 / TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(h.values()[k0].im, 0.0, epsilon = 1e-12);
        assert!(cauchy_kernel(C64::new(0.0, -1.0), &g).is_err());
    }

    #[test]
    fn line_cauchy_kernel_reproduces_on_large_window() {
        let g = Grid::for_band(2.0, 4096.0, 2).unwrap();
        let f = modulate(&sinc_kernel(band(1.0), 0.0, &g).unwrap(), 1.0).unwrap();
        let h = cauchy_kernel(I, &g).unwrap();
        let exact = (-TAU).exp() * (TAU).sinh() / PI;
        assert!((inner(&f, &h).unwrap() - exact).norm() <= 1e-4);
    }

    #[test]
    fn conj_kernel_is_theta_times_conjugate() {
        let g = Grid::centered(8.0, 0.125).unwrap();
        let th = InnerFunction::exp(2.0).unwrap();
        let k = repro_kernel(th, I, &g).unwrap();
        let kt = conj_kernel(th, I, &g).unwrap();
        for (j, x) in g.positions().enumerate() {
            let e = th.at(C64::new(x, 0.0)) * k.values()[j].conj();
            assert!((kt.values()[j] - e).norm() <= 1e-12);
        }
    }

    #[test]
    fn window_repro_kernel_reproduces_model_space() {
        let g = Grid::for_band(2.0, 64.0, 8).unwrap();
        let th = InnerFunction::exp(2.0).unwrap();
        let f = modulate(&sinc_kernel(band(1.0), 0.4, &g).unwrap(), 1.0).unwrap();
        let k = repro_kernel_window(th, I, &g, f.boundary()).unwrap();
        let rhs = theta(1.0, I) * band_kernel(1.0, I - 0.4, 64.0, Boundary::Antiperiodic);
        assert!((inner(&f, &k).unwrap() - rhs).norm() <= 1e-12);
        assert!(band_residual(&modulate(&k, -1.0).unwrap(), band(1.0)) <= 1e-20);
    }

    #[test]
    fn inner_function_rejects_nonpositive() {
        assert!(InnerFunction::exp(0.0).is_err());
        let g = Grid::centered(4.0, 0.5).unwrap();
        assert!(repro_kernel(InnerFunction::Exp { b: -1.0 }, I, &g).is_err());
    }

    #[test]
    fn sinc_l2_norm_by_quadrature() {
        assert_abs_diff_eq!(sinc_lp_norm(1.0, 2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(sinc_lp_norm(0.125, 2.0).unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_has_positive_band_residual() {
        let g = Grid::centered(16.0, 1.0 / 16.0).unwrap();
        let f = SampledFunction::from_fn(g, Boundary::Periodic, |x| C64::new((-x * x).exp(), 0.0))
            .unwrap();
        let r = band_residual(&f, band(0.5));
        // closed-form transform sqrt(pi) exp(-pi^2 xi^2) summed on the lattice j/32
        let energy = |keep: &dyn Fn(f64) -> bool| -> f64 {
            (-400..=400)
                .map(|j| j as f64 / 32.0)
                .filter(|&xi| keep(xi))
                .map(|xi| (-2.0 * PI * PI * xi * xi).exp())
                .sum()
        };
        let oracle = energy(&|xi: f64| xi.abs() > 0.5) / energy(&|_| true);
        assert!(r > 0.0);
        assert!((r - oracle).abs() <= 1e-6 * oracle, "{r} vs {oracle}");
    }
}
