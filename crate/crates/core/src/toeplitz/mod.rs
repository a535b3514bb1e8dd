//! Toeplitz and Hankel operators on the sampled window, their matrices in
//! the Nyquist basis, and operator p-norm estimates.

pub mod norm;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{
    cis_turns, fft_spectrum, inverse_spectrum, upsample, Boundary, Grid, SampledFunction,
    Spectrum, C64,
};
use crate::pwspace::{
    is_integer, modulate, project_band, project_halfline, restrict_spectrum, Band,
    BandlimitedFunction, HalfLine,
};
pub use norm::{pnorm_dense, DenseMatrix, NormEstimate};

/// Relative level below which a Gaussian or bump spectrum counts as zero.
const SPECTRAL_FLOOR: f64 = 1e-17;

/// Smooth compactly supported profile `exp(1 - 1/(1 - u^2))` on `|u| < 1`.
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolForm {
    /// Constant symbol.
    Constant { value: C64 },
    /// `amplitude * exp(-((x - center)/scale)^2) * exp(2 pi i freq x)`.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        freq: f64,
    },
    /// `coeff * x^degree * exp(2 pi i freq x)`.
    ModPoly {
        degree: u32,
        freq: f64,
        #[serde(default = "one")]
        coeff: f64,
    },
    /// Symbol whose spectrum is `amplitude * bump((xi - center)/radius)`,
    /// mirrored to `-center` as well when `symmetric`.
    BumpSpectrum {
        center: f64,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        symmetric: bool,
    },
    /// Power of the unimodular factor `(x - i)/(x + i)`; on a window it is
    /// sampled as the window-adapted factor (see `commutator::omega_window`).
    Omega { power: i32 },
    Sampled(SampledFunction),
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    #[serde(flatten)]
    pub form: SymbolForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_support: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_norm_hint: Option<f64>,
}

impl From<SymbolForm> for SymbolSpec {
    fn from(form: SymbolForm) -> Self {
        SymbolSpec {
            form,
            spectral_support: None,
            sup_norm_hint: None,
        }
    }
}

impl SymbolSpec {
    pub fn gaussian(amplitude: f64, scale: f64, center: f64, freq: f64) -> Self {
        SymbolForm::Gaussian {
            amplitude,
            scale,
            center,
            freq,
        }
        .into()
    }

    pub fn bump_spectrum(center: f64, radius: f64, amplitude: f64, symmetric: bool) -> Self {
        SymbolForm::BumpSpectrum {
            center,
            radius,
            amplitude,
            symmetric,
        }
        .into()
    }

    pub fn sampled(f: SampledFunction) -> Self {
        SymbolForm::Sampled(f).into()
    }

    pub fn constant(value: C64) -> Self {
        SymbolForm::Constant { value }.into()
    }

    /// Closed-form value on the real line, where available.
    pub fn eval_at(&self, x: f64) -> Result<C64> {
        match &self.form {
            SymbolForm::Constant { value } => Ok(*value),
            SymbolForm::Gaussian {
                amplitude,
                scale,
                center,
                freq,
            } => {
                let u = (x - center) / scale;
                Ok(cis_turns(freq * x) * (amplitude * (-u * u).exp()))
            }
            SymbolForm::ModPoly {
                degree,
                freq,
                coeff,
            } => Ok(cis_turns(freq * x) * (coeff * x.powi(*degree as i32))),
            SymbolForm::Omega { power } => {
                let i = C64::new(0.0, 1.0);
                Ok(((x - i) / (x + i)).powi(*power))
            }
            SymbolForm::BumpSpectrum { .. } | SymbolForm::Sampled(_) => Err(Error::Unsupported(
                "pointwise line evaluation needs a closed-form symbol".into(),
            )),
        }
    }

    /// Radius beyond which the spectrum is negligible.
    pub fn spectral_radius(&self) -> Result<f64> {
        match &self.form {
            SymbolForm::Constant { .. } => Ok(0.0),
            SymbolForm::Gaussian { scale, freq, .. } => {
                if !(*scale > 0.0) {
                    return Err(Error::Domain(format!("gaussian scale must be positive, got {scale}")));
                }
                Ok(freq.abs() + (-SPECTRAL_FLOOR.ln()).sqrt() / (PI * scale))
            }
            SymbolForm::ModPoly { freq, .. } => Ok(freq.abs()),
            SymbolForm::BumpSpectrum { center, radius, .. } => Ok(center.abs() + radius),
            SymbolForm::Omega { power } => {
                Ok((-SPECTRAL_FLOOR.ln() + 5.0 * power.unsigned_abs() as f64) / (2.0 * PI))
            }
            SymbolForm::Sampled(f) => Ok(effective_radius(&fft_spectrum(f))),
        }
    }

    /// Samples on `grid` (periodic unless the symbol dictates otherwise).
    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        match &self.form {
            SymbolForm::Constant { value } => {
                SampledFunction::from_fn(*grid, Boundary::Periodic, |_| *value)
            }
            SymbolForm::Gaussian { .. } | SymbolForm::ModPoly { .. } => {
                SampledFunction::from_fn(*grid, Boundary::Periodic, |x| {
                    self.eval_at(x).expect("closed form")
                })
            }
            SymbolForm::BumpSpectrum {
                center,
                radius,
                amplitude,
                symmetric,
            } => {
                if !(*radius > 0.0) {
                    return Err(Error::Domain(format!("bump radius must be positive, got {radius}")));
                }
                if center.abs() + radius >= grid.nyquist() {
                    return Err(Error::UnderResolved {
                        needed: center.abs() + radius,
                        nyquist: grid.nyquist(),
                    });
                }
                let mut s = fft_spectrum(&SampledFunction::zeros(*grid, Boundary::Periodic));
                for m in 0..s.values().len() {
                    let xi = s.freq(m);
                    let mut v = bump_profile((xi - center) / radius);
                    if *symmetric {
                        v += bump_profile((xi + center) / radius);
                    }
                    s.values_mut()[m] = C64::new(amplitude * v, 0.0);
                }
                Ok(inverse_spectrum(&s))
            }
            SymbolForm::Omega { power } => {
                let period = grid.period();
                SampledFunction::from_fn(*grid, Boundary::Periodic, |x| {
                    crate::commutator::omega_window(x, period).powi(*power)
                })
            }
            SymbolForm::Sampled(f) => {
                if f.grid() == grid {
                    return Ok(f.clone());
                }
                let factor = f.grid().refinement_factor(grid).ok_or(Error::GridMismatch)?;
                upsample(f, factor)
            }
        }
    }

    /// Checks the declared spectral support against the samples on `grid`.
    pub fn validate_support(&self, grid: &Grid) -> Result<f64> {
        let Some([lo, hi]) = self.spectral_support else {
            return Ok(0.0);
        };
        let s = fft_spectrum(&self.sample(grid)?);
        let total = s.energy_where(|_| true);
        if total == 0.0 {
            return Ok(0.0);
        }
        let tol = 1e-9 / grid.period();
        let out = s.energy_where(|xi| xi < lo - tol || xi > hi + tol) / total;
        if out > 1e-6 {
            return Err(Error::Precondition(format!(
                "symbol spectrum leaves its declared support [{lo}, {hi}] (residual {out:.3e})"
            )));
        }
        Ok(out)
    }
}

/// Largest `|xi|` carrying more than `1e-15` of the peak magnitude.
fn effective_radius(s: &Spectrum) -> f64 {
    let peak = s.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    s.freqs()
        .zip(s.values())
        .filter(|(_, v)| v.norm() > 1e-15 * peak)
        .map(|(xi, _)| xi.abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
enum OpKind {
    Zero,
    /// `coeff * exp(2 pi i c x)` with `c P` on the half-integer lattice.
    Modulation { coeff: f64, freq: f64 },
    Multiply { symbol: SampledFunction, factor: usize },
}

/// `T_phi f = P_a[phi f]` prepared for a fixed band and function grid.
#[derive(Clone, Debug)]
pub struct ToeplitzOp {
    band: Band,
    grid: Grid,
    kind: OpKind,
}

/// Smallest refinement of `grid` whose sampling rate exceeds `rate`.
pub fn refinement_for(grid: &Grid, rate: f64) -> usize {
    let r = (rate * grid.step()).floor() as usize + 1;
    r.max(1)
}

impl ToeplitzOp {
    pub fn new(spec: &SymbolSpec, band: Band, grid: &Grid) -> Result<Self> {
        let a = band.value();
        match &spec.form {
            SymbolForm::ModPoly {
                degree,
                freq,
                coeff,
            } => {
                if *degree == 0 {
                    return Ok(ToeplitzOp {
                        band,
                        grid: *grid,
                        kind: OpKind::Modulation {
                            coeff: *coeff,
                            freq: *freq,
                        },
                    });
                }
                // x^n exp(2 pi i c x) has spectrum {c}: it moves PW_a entirely
                // outside [-a, a] when |c| >= 2a.
                if freq.abs() >= 2.0 * a - 1e-12 {
                    return Ok(ToeplitzOp {
                        band,
                        grid: *grid,
                        kind: OpKind::Zero,
                    });
                }
                Err(Error::Unsupported(format!(
                    "x^{degree} exp(2 pi i {freq} x) is unbounded and its spectrum meets [-2a, 2a]"
                )))
            }
            SymbolForm::Sampled(f) => Self::from_samples(f.clone(), band, grid),
            _ => {
                let rho = spec.spectral_radius()?;
                let factor = refinement_for(grid, 2.0 * a + rho);
                let symbol = spec.sample(&grid.refine(factor))?;
                Ok(ToeplitzOp {
                    band,
                    grid: *grid,
                    kind: OpKind::Multiply { symbol, factor },
                })
            }
        }
    }

    /// Symbol given by samples on `grid` or on a refinement of it.
    pub fn from_samples(symbol: SampledFunction, band: Band, grid: &Grid) -> Result<Self> {
        let factor = grid.refinement_factor(symbol.grid()).ok_or(Error::GridMismatch)?;
        let rate = 1.0 / symbol.grid().step();
        let needed = 2.0 * band.value() + effective_radius(&fft_spectrum(&symbol));
        if rate <= needed * (1.0 - 1e-12) && symbol.sup_norm() > 0.0 {
            return Err(Error::UnderResolved {
                needed: needed / 2.0,
                nyquist: rate / 2.0,
            });
        }
        Ok(ToeplitzOp {
            band,
            grid: *grid,
            kind: OpKind::Multiply { symbol, factor },
        })
    }

    /// Same operator with the symbol spectrum cut to `[-2a, 2a]`, the only
    /// part `P_a[phi f]` depends on, resampled on the coarsest adequate grid.
    pub fn compressed(symbol: &SampledFunction, band: Band, grid: &Grid) -> Result<Self> {
        let a = band.value();
        let mut s = fft_spectrum(symbol);
        restrict_spectrum(&mut s, 2.0 * a);
        let fine = grid.refine(refinement_for(grid, 4.0 * a));
        if !fine.same_window(symbol.grid()) {
            return Err(Error::GridMismatch);
        }
        let reduced = inverse_spectrum(&s.resized(fine.count())?);
        Self::from_samples(reduced, band, grid)
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Symbol samples when the operator is a genuine multiplication.
    pub fn symbol(&self) -> Option<&SampledFunction> {
        match &self.kind {
            OpKind::Multiply { symbol, .. } => Some(symbol),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, OpKind::Zero)
    }

    /// `P_a[phi f]` for samples `f` on the operator grid.
    pub fn apply_fn(&self, f: &SampledFunction) -> Result<SampledFunction> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let a = self.band;
        match &self.kind {
            OpKind::Zero => Ok(SampledFunction::zeros(self.grid, f.boundary())),
            OpKind::Modulation { coeff, freq } => {
                let m = modulate(f, *freq)?.scale(C64::new(*coeff, 0.0));
                Ok(project_band(&m, a)?.into_function())
            }
            OpKind::Multiply { symbol, factor } => {
                let up = upsample(f, *factor)?;
                let prod = symbol.mul(&up)?;
                let mut s = fft_spectrum(&prod);
                restrict_spectrum(&mut s, a.value());
                Ok(inverse_spectrum(&s.resized(self.grid.count())?))
            }
        }
    }

    pub fn apply(&self, f: &BandlimitedFunction) -> Result<BandlimitedFunction> {
        if f.band() != self.band {
            return Err(Error::Precondition("band of input differs from operator band".into()));
        }
        let out = self.apply_fn(f.function())?;
        BandlimitedFunction::certify(out, self.band)?.with_exponent(f.exponent())
    }
}

pub fn toeplitz_apply(phi: &SymbolSpec, f: &BandlimitedFunction) -> Result<BandlimitedFunction> {
    ToeplitzOp::new(phi, f.band(), f.function().grid())?.apply(f)
}

/// Hankel operator `H_phi f = P_-[phi f]` on `f` with spectrum in `[0, inf)`.
/// The result lives on the symbol grid (a refinement of the input grid).
pub fn hankel_apply(phi: &SymbolSpec, f: &SampledFunction) -> Result<SampledFunction> {
    let s = fft_spectrum(f);
    let total = s.energy_where(|_| true);
    if total > 0.0 {
        let tol = 1e-9 / f.grid().period();
        let neg = s.energy_where(|xi| xi < -tol) / total;
        if neg > 1e-6 {
            return Err(Error::Precondition(format!(
                "input is not analytic: spectral energy on (-inf, 0) is {neg:.3e}"
            )));
        }
    }
    let rho = phi.spectral_radius()?;
    let reach = rho + effective_radius(&s);
    let factor = refinement_for(f.grid(), 2.0 * reach);
    let fine = f.grid().refine(factor);
    let prod = phi.sample(&fine)?.mul(&upsample(f, factor)?)?;
    Ok(project_halfline(&prod, HalfLine::Minus))
}

/// Orthonormal basis `e_k = sinc_a(x - t_k) / sqrt(2a)` at the Nyquist nodes
/// `t_k = -P/2 + k/(2a)` of a window with `a P` integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NyquistBasis {
    band: Band,
    grid: Grid,
    oversample: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub spacing: f64,
    pub count: usize,
    pub first_node: f64,
    pub window: f64,
    pub grid: Grid,
}

impl NyquistBasis {
    pub fn new(band: Band, grid: &Grid) -> Result<Self> {
        let a = band.value();
        if !band.fits_window(grid.period()) {
            return Err(Error::Lattice(format!(
                "band {a} times window {} must be an integer",
                grid.period()
            )));
        }
        let r = 1.0 / (2.0 * a * grid.step());
        if !is_integer(r) || r.round() < 2.0 {
            return Err(Error::Lattice(format!(
                "grid step {} must divide the Nyquist spacing 1/(2a) at least twice",
                grid.step()
            )));
        }
        let basis = NyquistBasis {
            band,
            grid: *grid,
            oversample: r.round() as usize,
        };
        if basis.len() < 8 {
            return Err(Error::Domain(format!(
                "window yields {} basis functions, need at least 8",
                basis.len()
            )));
        }
        Ok(basis)
    }

    /// Desk-scale basis: window `P`, `oversample` grid points per node.
    pub fn desk(a: f64, period: f64, oversample: usize) -> Result<Self> {
        let band = Band::new(a)?;
        NyquistBasis::new(band, &Grid::for_band(a, period, oversample)?)
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.count() / self.oversample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (2.0 * self.band.value())
    }

    pub fn node(&self, k: usize) -> f64 {
        self.grid.start() + k as f64 * self.spacing()
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            spacing: self.spacing(),
            count: self.len(),
            first_node: self.node(0),
            window: self.grid.period(),
            grid: self.grid,
        }
    }

    /// Indices of nodes with `|t_k| <= fraction * P/2`.
    pub fn interior(&self, fraction: f64) -> Vec<usize> {
        let lim = fraction * self.grid.half_length() + 1e-12;
        (0..self.len()).filter(|&k| self.node(k).abs() <= lim).collect()
    }

    fn norm_factor(&self) -> f64 {
        (2.0 * self.band.value()).sqrt()
    }

    /// Coefficients `f(t_k) / sqrt(2a)`.
    pub fn coefficients(&self, f: &SampledFunction) -> Result<Vec<C64>> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let s = self.norm_factor();
        Ok((0..self.len())
            .map(|k| f.values()[k * self.oversample] / s)
            .collect())
    }

    /// `sum c_k e_k` sampled on the basis grid.
    pub fn synthesize(&self, c: &[C64]) -> Result<SampledFunction> {
        if c.len() != self.len() {
            return Err(Error::Length {
                expected: self.len(),
                got: c.len(),
            });
        }
        let coarse = Grid::new(self.grid.start(), self.spacing(), self.len())?;
        let s = self.norm_factor();
        let samples = SampledFunction::new(
            coarse,
            c.iter().map(|v| v * s).collect(),
            Boundary::Antiperiodic,
        )?;
        let fine = upsample(&samples, self.oversample)?;
        SampledFunction::new(self.grid, fine.into_values(), Boundary::Antiperiodic)
    }

    pub fn element(&self, k: usize) -> SampledFunction {
        let mut c = vec![C64::new(0.0, 0.0); self.len()];
        c[k] = C64::new(1.0, 0.0);
        self.synthesize(&c).expect("basis element")
    }
}

/// Dense matrix of an operator on `PW_a` in the Nyquist basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DenseMatrix,
    pub band: Band,
    pub p: f64,
    pub basis: NyquistBasis,
}

#[derive(Serialize, Deserialize)]
struct OperatorMatrixJson {
    band: f64,
    p: f64,
    basis: BasisDescriptor,
    entries: Vec<Vec<C64>>,
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .entries
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect();
        OperatorMatrixJson {
            band: self.band.value(),
            p: self.p,
            basis: self.basis.descriptor(),
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = OperatorMatrixJson::deserialize(d)?;
        let band = Band::new(raw.band).map_err(D::Error::custom)?;
        let basis = NyquistBasis::new(band, &raw.basis.grid).map_err(D::Error::custom)?;
        let n = basis.len();
        if raw.entries.len() != n || raw.entries.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom(format!("entries must be a {n} x {n} matrix")));
        }
        if raw.entries.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(D::Error::custom("entries must be finite"));
        }
        let entries = DenseMatrix::from_fn(n, n, |i, j| raw.entries[i][j]);
        Ok(OperatorMatrix {
            entries,
            band,
            p: raw.p,
            basis,
        })
    }
}

impl OperatorMatrix {
    pub fn from_entries(entries: DenseMatrix, basis: NyquistBasis, p: f64) -> Result<Self> {
        let n = basis.len();
        if entries.shape() != (n, n) {
            return Err(Error::Length {
                expected: n,
                got: entries.nrows(),
            });
        }
        Ok(OperatorMatrix {
            entries,
            band: basis.band(),
            p,
            basis,
        })
    }

    pub fn identity(basis: NyquistBasis, p: f64) -> Self {
        let n = basis.len();
        OperatorMatrix {
            entries: DenseMatrix::identity(n, n),
            band: basis.band(),
            p,
            basis,
        }
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix {
            entries: self.entries.adjoint(),
            ..self.clone()
        }
    }

    pub fn with_entries(&self, entries: DenseMatrix) -> Self {
        OperatorMatrix {
            entries,
            ..self.clone()
        }
    }

    /// Applies the matrix to a band-limited function on the basis grid.
    pub fn apply_fn(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let c = nalgebra::DVector::from_vec(self.basis.coefficients(f)?);
        let y = &self.entries * c;
        self.basis.synthesize(y.as_slice())
    }
}

/// Assembles the matrix column by column: column `k` holds the Nyquist
/// coefficients of `apply(e_k)`.
pub fn assemble_matrix<F>(apply: F, basis: &NyquistBasis, p: f64) -> Result<OperatorMatrix>
where
    F: Fn(&SampledFunction) -> Result<SampledFunction> + Sync,
{
    let n = basis.len();
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let y = apply(&basis.element(k))?;
            basis.coefficients(&y)
        })
        .collect::<Result<_>>()?;
    let entries = DenseMatrix::from_fn(n, n, |i, j| columns[j][i]);
    OperatorMatrix::from_entries(entries, *basis, p)
}

/// Matrix of `T_phi` in the Nyquist basis.
pub fn toeplitz_matrix(phi: &SymbolSpec, basis: &NyquistBasis, p: f64) -> Result<OperatorMatrix> {
    let op = ToeplitzOp::new(phi, basis.band(), basis.grid())?;
    toeplitz_matrix_of(&op, basis, p)
}

pub fn toeplitz_matrix_of(op: &ToeplitzOp, basis: &NyquistBasis, p: f64) -> Result<OperatorMatrix> {
    if op.is_zero() {
        let n = basis.len();
        return OperatorMatrix::from_entries(DenseMatrix::zeros(n, n), *basis, p);
    }
    assemble_matrix(|f| op.apply_fn(f), basis, p)
}

pub fn matrix_pnorm(m: &OperatorMatrix, p: f64) -> Result<NormEstimate> {
    pnorm_dense(&m.entries, p)
}

/// Seeded samples with independent uniform real and imaginary parts.
pub fn random_samples(grid: &Grid, boundary: Boundary, seed: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.count())
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    SampledFunction::new(*grid, values, boundary).expect("finite random samples")
}

/// Seeded generic function with spectrum in `|xi| <= nyquist / 2`, so
/// that modulations by a few band widths do not wrap around the grid.
pub fn random_half_band(grid: &Grid, boundary: Boundary, seed: u64) -> SampledFunction {
    let lim = grid.nyquist() / 2.0;
    crate::grid::apply_multiplier(&random_samples(grid, boundary, seed), |xi| {
        C64::new(if xi.abs() <= lim { 1.0 } else { 0.0 }, 0.0)
    })
}

/// Modulation by `theta_c` that panics only on lattice misuse inside
/// identities where `c P` is known to be integral.
fn theta_mod(f: &SampledFunction, c: f64) -> SampledFunction {
    modulate(f, c).expect("modulation on the window lattice")
}

fn rel_l2(a: &SampledFunction, b: &SampledFunction, scale: &SampledFunction) -> f64 {
    let d = a.sub(b).expect("same grid");
    let num: f64 = d.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = scale.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

fn residual_entry(name: &str, residual: f64, bound: f64) -> IdentityResidual {
    IdentityResidual {
        name: name.into(),
        residual,
        bound,
        pass: residual <= bound,
    }
}

/// `P_a f` versus `conj(theta_a) P_+ theta_a f - theta_a P_+ conj(theta_a) f`.
pub fn projector_decomposition_residual(f: &SampledFunction, a: Band) -> Result<f64> {
    let a = a.value();
    let lhs = project_band(f, Band::new(a)?)?.into_function();
    let up = theta_mod(&project_halfline(&theta_mod(f, a), HalfLine::Plus), -a);
    let down = theta_mod(&project_halfline(&theta_mod(f, -a), HalfLine::Plus), a);
    Ok(rel_l2(&lhs, &up.sub(&down)?, f))
}

/// `P_a f` versus the composition
/// `conj(theta_a)^2 P_+ theta_a^2 f - theta_a P_+ conj(theta_a) f`, which
/// equals the multiplier `chi_[-2a, a)` rather than `P_a`.
pub fn printed_composition_residual(f: &SampledFunction, a: Band) -> Result<f64> {
    let a = a.value();
    let lhs = project_band(f, Band::new(a)?)?.into_function();
    let up = theta_mod(&project_halfline(&theta_mod(f, 2.0 * a), HalfLine::Plus), -2.0 * a);
    let down = theta_mod(&project_halfline(&theta_mod(f, -a), HalfLine::Plus), a);
    Ok(rel_l2(&lhs, &up.sub(&down)?, f))
}

/// `P_a f` versus `theta_a P_- conj(theta_a)^2 P_+ theta_a f`.
pub fn minus_plus_residual(f: &SampledFunction, a: Band) -> Result<f64> {
    let a = a.value();
    let lhs = project_band(f, Band::new(a)?)?.into_function();
    let step1 = project_halfline(&theta_mod(f, a), HalfLine::Plus);
    let step2 = project_halfline(&theta_mod(&step1, -2.0 * a), HalfLine::Minus);
    Ok(rel_l2(&lhs, &theta_mod(&step2, a), f))
}

/// `H_{conj(theta_a)^2 phi} f` versus `conj(theta_a) T_phi theta_a P_- conj(theta_a)^2 f`
/// for `f` with spectrum in `[0, inf)` and `phi` with spectrum in `[0, inf)`.
pub fn hankel_identity_residual(op: &ToeplitzOp, f: &SampledFunction) -> Result<f64> {
    let a = op.band().value();
    let symbol = op
        .symbol()
        .ok_or_else(|| Error::Unsupported("Hankel identity needs a sampled symbol".into()))?;
    let factor = op.grid().refinement_factor(symbol.grid()).ok_or(Error::GridMismatch)?;
    let fine_f = upsample(f, factor)?;
    let lhs_fine = project_halfline(
        &theta_mod(&symbol.mul(&fine_f)?, -2.0 * a),
        HalfLine::Minus,
    );
    let inner = theta_mod(&project_halfline(&theta_mod(f, -2.0 * a), HalfLine::Minus), a);
    let rhs = theta_mod(&op.apply_fn(&inner)?, -a);
    let mut s = fft_spectrum(&lhs_fine);
    restrict_spectrum(&mut s, 2.0 * a);
    let lhs = inverse_spectrum(&s.resized(f.grid().count())?);
    Ok(rel_l2(&lhs, &rhs, f))
}

/// Residuals of the projector and Hankel identities on a seeded test set.
pub fn identity_residuals(a: Band, seed: u64) -> Result<Vec<IdentityResidual>> {
    let av = a.value();
    let grid = Grid::for_band(av, 64.0 / av.min(1.0), 8)?;
    let mut dec: f64 = 0.0;
    let mut mp: f64 = 0.0;
    for s in 0..10 {
        let f = random_half_band(&grid, Boundary::Antiperiodic, seed + s);
        dec = dec.max(projector_decomposition_residual(&f, a)?);
        mp = mp.max(minus_plus_residual(&f, a)?);
    }
    let mut hk: f64 = 0.0;
    for (k, (c, r)) in [(0.5, 0.3), (1.0, 0.8), (1.6, 0.5)].into_iter().enumerate() {
        let phi = SymbolSpec::bump_spectrum(c * av, r * av, 1.0, false);
        let op = ToeplitzOp::new(&phi, a, &grid)?;
        let g = random_samples(&grid, Boundary::Antiperiodic, seed + 100 + k as u64);
        let g = project_band(&g, a)?.into_function();
        let f = theta_mod(&g, av);
        hk = hk.max(hankel_identity_residual(&op, &f)?);
    }
    Ok(vec![
        residual_entry("projector_decomposition", dec, 1e-10),
        residual_entry("minus_plus_projector", mp, 1e-8),
        residual_entry("hankel_compression", hk, 1e-6),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwspace::sinc_kernel;
    use approx::assert_abs_diff_eq;

    fn desk() -> NyquistBasis {
        NyquistBasis::desk(1.0, 32.0, 8).unwrap()
    }

    #[test]
    fn constant_one_is_identity() {
        let b = desk();
        let f = BandlimitedFunction::certify(sinc_kernel(b.band(), 0.3, b.grid()).unwrap(), b.band())
            .unwrap();
        let out = toeplitz_apply(&SymbolSpec::constant(C64::new(1.0, 0.0)), &f).unwrap();
        assert!(out.function().sub(f.function()).unwrap().sup_norm() <= 1e-12);
    }

    #[test]
    fn identity_matrix_from_identity_apply() {
        let b = desk();
        let m = assemble_matrix(|f| Ok(f.clone()), &b, 2.0).unwrap();
        let d = &m.entries - DenseMatrix::identity(b.len(), b.len());
        assert!(d.iter().all(|z| z.norm() <= 1e-10));
    }

    #[test]
    fn zero_symbol_example_gives_zero_matrix() {
        let b = desk();
        let phi: SymbolSpec = SymbolForm::ModPoly {
            degree: 1,
            freq: 2.0,
            coeff: 1.0,
        }
        .into();
        let m = toeplitz_matrix(&phi, &b, 2.0).unwrap();
        assert!(matrix_pnorm(&m, 2.0).unwrap().upper <= 1e-8);
    }

    #[test]
    fn gaussian_symbol_matrix_is_hermitian() {
        let b = desk();
        let m = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &b, 2.0).unwrap();
        let d = &m.entries - m.entries.adjoint();
        assert!(d.iter().all(|z| z.norm() <= 1e-8));
        // brute-force pairing oracle <T e_k, e_j> = integral phi e_k e_j
        let (j, k) = (3, 9);
        let ek = b.element(k);
        let ej = b.element(j);
        let phi = SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0).sample(b.grid()).unwrap();
        let pair = crate::grid::inner(&phi.mul(&ek).unwrap(), &ej).unwrap();
        assert!((pair - m.entries[(j, k)]).norm() <= 1e-10);
    }

    #[test]
    fn norm_bounded_by_symbol_sup() {
        let b = desk();
        let phi = SymbolSpec::gaussian(1.5, 0.7, 1.0, 0.3);
        let m = toeplitz_matrix(&phi, &b, 2.0).unwrap();
        assert!(matrix_pnorm(&m, 2.0).unwrap().upper <= 1.5 * (1.0 + 1e-3));
    }

    #[test]
    fn disjoint_spectrum_symbol_vanishes() {
        let b = desk();
        let phi = SymbolSpec::bump_spectrum(3.0, 0.8, 1.0, true);
        let op = ToeplitzOp::new(&phi, b.band(), b.grid()).unwrap();
        assert!(!op.is_zero());
        let m = toeplitz_matrix_of(&op, &b, 2.0).unwrap();
        assert!(matrix_pnorm(&m, 2.0).unwrap().upper <= 1e-8);
    }

    #[test]
    fn symbols_agreeing_on_double_band_give_same_matrix() {
        let b = desk();
        let g = b.grid().refine(2);
        let base = SymbolSpec::bump_spectrum(0.5, 0.6, 1.0, false).sample(&g).unwrap();
        let extra = SymbolSpec::bump_spectrum(3.5, 0.9, 2.0, true).sample(&g).unwrap();
        let m1 = toeplitz_matrix(&SymbolSpec::sampled(base.clone()), &b, 2.0).unwrap();
        let m2 = toeplitz_matrix(&SymbolSpec::sampled(base.add(&extra).unwrap()), &b, 2.0).unwrap();
        let d = &m1.entries - &m2.entries;
        assert!(d.iter().all(|z| z.norm() <= 1e-8));
    }

    #[test]
    fn bump_symbol_samples_its_spectrum() {
        let b = desk();
        let phi = SymbolSpec::bump_spectrum(0.5, 0.6, 2.0, false);
        let f = phi.sample(b.grid()).unwrap();
        // phi(0) = integral of the spectrum, by a fine Riemann sum of the profile
        let h = 1e-5;
        let integral: f64 = (-60_000..=60_000)
            .map(|k| 2.0 * bump_profile(k as f64 * h / 0.6) * h)
            .sum();
        let k0 = b.grid().index_of(0.0).unwrap();
        assert!((f.values()[k0] - C64::new(integral, 0.0)).norm() <= 1e-6 * integral);
        let spec = fft_spectrum(&f);
        for (xi, v) in spec.freqs().zip(spec.values()) {
            assert!((v - 2.0 * bump_profile((xi - 0.5) / 0.6)).norm() <= 1e-12);
        }
    }

    #[test]
    fn unbounded_polynomial_symbol_is_rejected() {
        let b = desk();
        let phi: SymbolSpec = SymbolForm::ModPoly {
            degree: 1,
            freq: 0.5,
            coeff: 1.0,
        }
        .into();
        assert!(ToeplitzOp::new(&phi, b.band(), b.grid()).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_interpolating() {
        let b = desk();
        for (j, k) in [(0, 0), (3, 4), (10, 10), (0, 63)] {
            let ip = crate::grid::inner(&b.element(j), &b.element(k)).unwrap();
            let expect = if j == k { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(ip.re, expect, epsilon = 1e-12);
            assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-12);
        }
        let s = sinc_kernel(b.band(), b.node(5), b.grid()).unwrap();
        let e = b.element(5).scale(C64::new(2f64.sqrt(), 0.0));
        assert!(s.sub(&e).unwrap().sup_norm() <= 1e-12);
    }

    #[test]
    fn analytic_symbol_has_zero_hankel() {
        let b = desk();
        let phi = SymbolSpec::bump_spectrum(1.0, 0.5, 1.0, false);
        let g = sinc_kernel(b.band(), 0.0, b.grid()).unwrap();
        let f = modulate(&g, 1.0).unwrap();
        let h = hankel_apply(&phi, &f).unwrap();
        assert!(h.sup_norm() <= 1e-12);
        let zero = hankel_apply(&phi, &SampledFunction::zeros(*b.grid(), Boundary::Antiperiodic))
            .unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        assert!(hankel_apply(&phi, &g).is_err());
    }

    #[test]
    fn projector_identities_hold() {
        let report = identity_residuals(Band::new(1.0).unwrap(), 42).unwrap();
        for r in &report {
            assert!(r.pass, "{} residual {}", r.name, r.residual);
        }
    }

    #[test]
    fn printed_composition_only_agrees_on_the_band() {
        let b = desk();
        let a = b.band();
        let generic = random_half_band(b.grid(), Boundary::Antiperiodic, 5);
        assert!(printed_composition_residual(&generic, a).unwrap() > 0.1);
        let member = project_band(&generic, a).unwrap().into_function();
        assert!(printed_composition_residual(&member, a).unwrap() <= 1e-12);
    }

    #[test]
    fn symbol_json_round_trip() {
        let phi = SymbolSpec::gaussian(1.0, 2.0, 0.5, 0.0);
        let s = serde_json::to_string(&phi).unwrap();
        assert!(s.starts_with("{\"gaussian\""));
        let back: SymbolSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, phi);
        let zero: SymbolSpec = serde_json::from_str(r#"{"mod_poly": {"degree": 1, "freq": 2.0}}"#).unwrap();
        assert!(matches!(zero.form, SymbolForm::ModPoly { degree: 1, .. }));
    }

    #[test]
    fn matrix_json_round_trip() {
        let b = NyquistBasis::desk(1.0, 8.0, 4).unwrap();
        let m = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &b, 2.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: OperatorMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
