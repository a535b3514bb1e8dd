//! Uniform grids on a periodic window, sampled functions, and the discrete
//! Fourier transform normalized as the continuous one,
//! `F[f](xi) = integral of exp(-2 pi i xi x) f(x) dx`.
//!
//! A grid with `count` samples and step `delta` covers one period
//! `P = count * delta` of a window. Every sampled function carries a
//! [`Boundary`]: periodic functions have spectra on the lattice `j / P`,
//! antiperiodic ones on `(j + 1/2) / P`.

use std::f64::consts::TAU;
use std::ops::Mul;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// `exp(2 pi i t)` with `t` reduced to `[-1/2, 1/2]` first.
pub fn cis_turns(t: f64) -> C64 {
    let r = t - t.round();
    C64::from_polar(1.0, TAU * r)
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if forward {
        p.plan_fft_forward(n)
    } else {
        p.plan_fft_inverse(n)
    }
}

/// Unnormalized in-place DFT: forward uses `exp(-2 pi i m k / n)`, inverse
/// the conjugate kernel.
pub fn dft_in_place(buf: &mut [C64], forward: bool) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), forward).process(buf);
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct Grid {
    start: f64,
    step: f64,
    count: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    start: f64,
    step: f64,
    count: usize,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        Grid::new(r.start, r.step, r.count)
    }
}

impl Grid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count must be at least 2, got {count}")));
        }
        let last = start + step * (count - 1) as f64;
        if !start.is_finite() || !last.is_finite() {
            return Err(Error::InvalidGrid("sample positions must be finite".into()));
        }
        Ok(Grid { start, step, count })
    }

    /// Symmetric window `[-half, half)` sampled with the given step.
    pub fn centered(half: f64, step: f64) -> Result<Self> {
        if !(half > 0.0) {
            return Err(Error::InvalidGrid(format!("half-window must be positive, got {half}")));
        }
        let n = (2.0 * half / step).round();
        if (n * step - 2.0 * half).abs() > 1e-9 * half {
            return Err(Error::InvalidGrid(format!(
                "window 2*{half} is not a multiple of step {step}"
            )));
        }
        Grid::new(-half, step, n as usize)
    }

    /// Window of period `period` resolving band `band` with `oversample`
    /// samples per Nyquist interval `1/(2 band)`.
    pub fn for_band(band: f64, period: f64, oversample: usize) -> Result<Self> {
        Grid::centered(period / 2.0, 1.0 / (2.0 * band * oversample as f64))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn period(&self) -> f64 {
        self.step * self.count as f64
    }

    pub fn half_length(&self) -> f64 {
        self.period() / 2.0
    }

    pub fn x(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |k| self.x(k))
    }

    pub fn freq_step(&self) -> f64 {
        1.0 / self.period()
    }

    /// Largest frequency magnitude representable without aliasing.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.step
    }

    /// Same window, step divided by `factor`.
    pub fn refine(&self, factor: usize) -> Grid {
        Grid {
            start: self.start,
            step: self.step / factor as f64,
            count: self.count * factor,
        }
    }

    /// Same window and start with `count` samples.
    pub fn with_count(&self, count: usize) -> Result<Grid> {
        Grid::new(self.start, self.period() / count as f64, count)
    }

    pub fn same_window(&self, other: &Grid) -> bool {
        let tol = 1e-9 * self.period();
        (self.start - other.start).abs() <= tol && (self.period() - other.period()).abs() <= tol
    }

    /// Integer `r` with `self.step == r * fine.step` on the same window.
    pub fn refinement_factor(&self, fine: &Grid) -> Option<usize> {
        if !self.same_window(fine) || !fine.count.is_multiple_of(self.count) {
            return None;
        }
        Some(fine.count / self.count)
    }

    /// Index of `x` if it coincides with a grid point (modulo the period).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let u = (x - self.start) / self.step;
        let k = u.round();
        if (u - k).abs() > 1e-9 {
            return None;
        }
        let n = self.count as i64;
        Some((k as i64).rem_euclid(n) as usize)
    }
}

/// Boundary condition across the window: `f(x + P) = f(x)` or `-f(x)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Antiperiodic,
}

impl Boundary {
    /// Lattice offset `o` in units of `1/P`: frequencies are `(j + o) / P`.
    pub fn offset(self) -> f64 {
        match self {
            Boundary::Periodic => 0.0,
            Boundary::Antiperiodic => 0.5,
        }
    }

    fn twice_offset(self) -> i64 {
        match self {
            Boundary::Periodic => 0,
            Boundary::Antiperiodic => 1,
        }
    }

    /// Boundary after multiplying by `exp(2 pi i c x)`; `None` if `c * P`
    /// is not a multiple of one half.
    pub fn shifted(self, c: f64, period: f64) -> Option<Boundary> {
        let twice = 2.0 * c * period;
        let r = twice.round();
        if (twice - r).abs() > 1e-9 * twice.abs().max(1.0) {
            return None;
        }
        if (r as i64).rem_euclid(2) == 0 {
            Some(self)
        } else {
            Some(self * Boundary::Antiperiodic)
        }
    }
}

impl Mul for Boundary {
    type Output = Boundary;
    fn mul(self, rhs: Boundary) -> Boundary {
        if self == rhs {
            Boundary::Periodic
        } else {
            Boundary::Antiperiodic
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampled")]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<C64>,
    #[serde(default)]
    boundary: Boundary,
}

#[derive(Deserialize)]
struct RawSampled {
    grid: Grid,
    values: Vec<C64>,
    #[serde(default)]
    boundary: Boundary,
}

impl TryFrom<RawSampled> for SampledFunction {
    type Error = Error;
    fn try_from(r: RawSampled) -> Result<Self> {
        SampledFunction::new(r.grid, r.values, r.boundary)
    }
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<C64>, boundary: Boundary) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::Length {
                expected: grid.count,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(SampledFunction {
            grid,
            values,
            boundary,
        })
    }

    pub fn zeros(grid: Grid, boundary: Boundary) -> Self {
        SampledFunction {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.count],
            boundary,
        }
    }

    pub fn from_fn(grid: Grid, boundary: Boundary, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values = grid.positions().map(f).collect();
        SampledFunction::new(grid, values, boundary)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        SampledFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            boundary: self.boundary,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.check_same(other)?;
        if self.boundary != other.boundary {
            return Err(Error::Lattice(
                "cannot add functions with different boundary conditions".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip(other, self.boundary, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.zip(other, self.boundary, |a, b| a - b))
    }

    /// Pointwise product; boundaries combine like signs.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip(other, self.boundary * other.boundary, |a, b| a * b))
    }

    fn zip(&self, other: &Self, boundary: Boundary, f: impl Fn(C64, C64) -> C64) -> Self {
        SampledFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            boundary,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Reflection `x -> -x` about the window centre (grid must be centred).
    pub fn reflect(&self) -> Self {
        let n = self.grid.count;
        let values = (0..n).map(|k| self.values[(n - k) % n]).collect();
        let sign = match self.boundary {
            Boundary::Periodic => 1.0,
            Boundary::Antiperiodic => -1.0,
        };
        let mut out = SampledFunction {
            grid: self.grid,
            values,
            boundary: self.boundary,
        };
        // sample 0 sits at -P/2 and maps to +P/2 = -P/2 + P
        out.values[0] *= sign;
        out
    }
}

/// Samples of the continuous Fourier transform on the frequency lattice
/// `xi_m = (m - floor(N/2) + o) / P`, `m = 0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    space: Grid,
    boundary: Boundary,
    values: Vec<C64>,
}

impl Spectrum {
    pub fn new(space: Grid, boundary: Boundary, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.count {
            return Err(Error::Length {
                expected: space.count,
                got: values.len(),
            });
        }
        Ok(Spectrum {
            space,
            boundary,
            values,
        })
    }

    pub fn space(&self) -> &Grid {
        &self.space
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    fn half(&self) -> i64 {
        (self.space.count / 2) as i64
    }

    /// Lattice index `j` with `xi_m = (j + o) / P`.
    pub fn lattice_index(&self, m: usize) -> i64 {
        m as i64 - self.half()
    }

    pub fn freq(&self, m: usize) -> f64 {
        (self.lattice_index(m) as f64 + self.boundary.offset()) / self.space.period()
    }

    pub fn freqs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |m| self.freq(m))
    }

    /// The frequency lattice as a grid (for JSON output).
    pub fn freq_grid(&self) -> Grid {
        Grid {
            start: self.freq(0),
            step: self.space.freq_step(),
            count: self.space.count,
        }
    }

    pub fn to_sampled(&self) -> SampledFunction {
        SampledFunction {
            grid: self.freq_grid(),
            values: self.values.clone(),
            boundary: Boundary::Periodic,
        }
    }

    pub fn multiply(&mut self, mult: impl Fn(f64) -> C64) {
        for m in 0..self.values.len() {
            let xi = self.freq(m);
            self.values[m] *= mult(xi);
        }
    }

    /// True when the bin at `m = 0` is the unpaired Nyquist frequency.
    fn has_nyquist_bin(&self) -> bool {
        self.boundary == Boundary::Periodic && self.space.count.is_multiple_of(2)
    }

    /// Same transform on a grid of the same window with `count` samples.
    /// Bins are matched by frequency; an unpaired Nyquist bin is split
    /// evenly between `+-` when growing, and out-of-range bins are dropped
    /// when shrinking.
    pub fn resized(&self, count: usize) -> Result<Spectrum> {
        let space = self.space.with_count(count)?;
        let mut out = vec![C64::new(0.0, 0.0); count];
        let h_new = (count / 2) as i64;
        let place = |j: i64, v: C64, out: &mut Vec<C64>| {
            let m = j + h_new;
            if m >= 0 && (m as usize) < count {
                out[m as usize] += v;
            }
        };
        for m in 0..self.values.len() {
            let j = self.lattice_index(m);
            let v = self.values[m];
            if m == 0 && self.has_nyquist_bin() && count > self.space.count {
                place(j, v * 0.5, &mut out);
                place(-j, v * 0.5, &mut out);
            } else {
                place(j, v, &mut out);
            }
        }
        Ok(Spectrum {
            space,
            boundary: self.boundary,
            values: out,
        })
    }

    /// Spectral energy `(1/P) sum |F|^2` restricted by a frequency predicate.
    pub fn energy_where(&self, keep: impl Fn(f64) -> bool) -> f64 {
        let p = self.space.period();
        (0..self.values.len())
            .filter(|&m| keep(self.freq(m)))
            .map(|m| self.values[m].norm_sqr())
            .sum::<f64>()
            / p
    }
}

/// Phase `exp(2 pi i (h - o) k / N)` computed exactly in integer turns.
fn lattice_twiddle(n: usize, boundary: Boundary, k: usize, sign: f64) -> C64 {
    let h = (n / 2) as i64;
    let num = (2 * h - boundary.twice_offset()) * k as i64;
    let two_n = 2 * n as i64;
    let r = num.rem_euclid(two_n) as f64 / two_n as f64;
    cis_turns(sign * r)
}

/// `exp(-2 pi i xi_m s)` for the grid start `s`.
fn start_phase(space: &Grid, boundary: Boundary, m: usize, sign: f64) -> C64 {
    let h = (space.count / 2) as f64;
    let j = m as f64 - h + boundary.offset();
    let ratio = space.start / space.period();
    cis_turns(-sign * j * ratio)
}

pub fn fft_spectrum(f: &SampledFunction) -> Spectrum {
    let n = f.grid.count;
    let mut buf: Vec<C64> = f
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| v * lattice_twiddle(n, f.boundary, k, 1.0))
        .collect();
    dft_in_place(&mut buf, true);
    let delta = f.grid.step;
    for (m, v) in buf.iter_mut().enumerate() {
        *v *= start_phase(&f.grid, f.boundary, m, 1.0) * delta;
    }
    Spectrum {
        space: f.grid,
        boundary: f.boundary,
        values: buf,
    }
}

pub fn inverse_spectrum(s: &Spectrum) -> SampledFunction {
    let n = s.space.count;
    let mut buf: Vec<C64> = s
        .values
        .iter()
        .enumerate()
        .map(|(m, &v)| v * start_phase(&s.space, s.boundary, m, -1.0))
        .collect();
    dft_in_place(&mut buf, false);
    let inv_p = 1.0 / s.space.period();
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= lattice_twiddle(n, s.boundary, k, -1.0) * inv_p;
    }
    SampledFunction {
        grid: s.space,
        values: buf,
        boundary: s.boundary,
    }
}

/// Applies a Fourier multiplier `m(xi)`.
pub fn apply_multiplier(f: &SampledFunction, mult: impl Fn(f64) -> C64) -> SampledFunction {
    let mut s = fft_spectrum(f);
    s.multiply(mult);
    inverse_spectrum(&s)
}

/// Band-limited interpolation onto a grid refined by `factor`.
pub fn upsample(f: &SampledFunction, factor: usize) -> Result<SampledFunction> {
    if factor == 1 {
        return Ok(f.clone());
    }
    let s = fft_spectrum(f).resized(f.grid.count * factor)?;
    Ok(inverse_spectrum(&s))
}

/// Trapezoid sum `delta * sum f(x_k)`; exact for periodic trigonometric
/// polynomials of degree below the sample count.
pub fn quad_integral(f: &SampledFunction) -> C64 {
    f.values.iter().sum::<C64>() * f.grid.step
}

pub fn lp_norm(f: &SampledFunction, p: f64) -> Result<f64> {
    lp_norm_values(f.values(), f.grid.step, p)
}

/// `(delta * sum |v|^p)^(1/p)`, or `max |v|` for `p = inf`.
pub fn lp_norm_values(values: &[C64], delta: f64, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = values.iter().map(|v| (v.norm() / scale).powf(p)).sum();
    Ok(scale * (delta * s).powf(1.0 / p))
}

/// `delta * sum f(x_k) conj(g(x_k))`.
pub fn inner(f: &SampledFunction, g: &SampledFunction) -> Result<C64> {
    f.check_same(g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .map(|(&a, &b)| a * b.conj())
        .sum::<C64>()
        * f.grid.step)
}

/// Exact trigonometric interpolant of a sampled function.
#[derive(Clone, Debug)]
pub struct Interpolant {
    spectrum: Spectrum,
    source: SampledFunction,
}

impl Interpolant {
    pub fn new(f: &SampledFunction) -> Self {
        Interpolant {
            spectrum: fft_spectrum(f),
            source: f.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        let grid = &self.source.grid;
        if let Some(k) = grid.index_of(x) {
            let wraps = ((x - grid.start) / grid.period()).floor() as i64;
            let sign = if self.source.boundary == Boundary::Antiperiodic && wraps % 2 != 0 {
                -1.0
            } else {
                1.0
            };
            return self.source.values[k] * sign;
        }
        let s = &self.spectrum;
        let n = grid.count as f64;
        let u = (x - grid.start) / grid.step;
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..s.values.len() {
            let j = s.lattice_index(m) as f64 + s.boundary.offset();
            let base = s.values[m] * start_phase(grid, s.boundary, m, -1.0);
            if m == 0 && s.has_nyquist_bin() {
                acc += base * (std::f64::consts::PI * u).cos();
            } else {
                acc += base * cis_turns(j * u / n);
            }
        }
        acc / grid.period()
    }
}

pub fn evaluate_offgrid(f: &SampledFunction, x: f64) -> C64 {
    Interpolant::new(f).eval(x)
}
