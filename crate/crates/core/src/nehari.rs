//! Minimal-norm symbols for Hankel operators and the bounded-symbol
//! construction built on them.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    apply_multiplier, cis_turns, dft_in_place, fft_spectrum, upsample, Boundary, SampledFunction,
    C64,
};
use crate::pwspace::{modulate, project_halfline, Band, HalfLine};
use crate::split::split_symbol;
use crate::toeplitz::{
    matrix_pnorm, random_samples, refinement_for, toeplitz_matrix_of, DenseMatrix, NormEstimate,
    NyquistBasis, SymbolSpec, ToeplitzOp,
};

/// Circle refinement used when sampling the rational AAK symbol.
pub const PSI_REFINE: usize = 64;
/// Relative slack allowed between `sup |psi|` and `sigma0`.
pub const TOL_AAK: f64 = 5e-2;

/// Fourier coefficients `c_n`, `|n| <= M`, of a symbol on the unit circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelData {
    pub truncation: usize,
    /// `c_{-M}, ..., c_M`.
    pub disk_coeffs: Vec<C64>,
}

impl HankelData {
    pub fn new(truncation: usize, disk_coeffs: Vec<C64>) -> Result<Self> {
        if disk_coeffs.len() != 2 * truncation + 1 {
            return Err(Error::Length {
                expected: 2 * truncation + 1,
                got: disk_coeffs.len(),
            });
        }
        if let Some(k) = disk_coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(HankelData {
            truncation,
            disk_coeffs,
        })
    }

    /// Data with only negative coefficients `c_{-1}, c_{-2}, ...` given.
    pub fn from_negative(neg: &[C64]) -> Result<Self> {
        let m = neg.len();
        let mut c = vec![C64::new(0.0, 0.0); 2 * m + 1];
        for (k, v) in neg.iter().enumerate() {
            c[m - 1 - k] = *v;
        }
        HankelData::new(m, c)
    }

    pub fn coeff(&self, n: i64) -> C64 {
        let m = self.truncation as i64;
        if n.abs() > m {
            C64::new(0.0, 0.0)
        } else {
            self.disk_coeffs[(n + m) as usize]
        }
    }

    /// `Gamma_{jk} = c_{-(j+k+1)}`, `0 <= j, k < M`.
    pub fn hankel_matrix(&self) -> DenseMatrix {
        let m = self.truncation;
        DenseMatrix::from_fn(m, m, |j, k| self.coeff(-((j + k + 1) as i64)))
    }

    /// `|c_{-M}| / max |c_n|`.
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.disk_coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            0.0
        } else {
            self.coeff(-(self.truncation as i64)).norm() / peak
        }
    }
}

/// Cayley map `omega(x) = (x - i)/(x + i)` of the line onto the circle.
pub fn omega_line(x: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    (x - i) / (x + i)
}

fn circle_size(m: usize) -> usize {
    (8 * m).max(1024).next_power_of_two()
}

/// Circle coefficients of `b(omega^{-1}(z))` from samples at
/// `theta_k = 2 pi (k + 1/2)/L`, i.e. at `x_k = -cot(theta_k / 2)`.
pub fn line_to_disk(b: &SymbolSpec, m: usize) -> Result<HankelData> {
    if m == 0 {
        return Err(Error::Domain("truncation must be positive".into()));
    }
    let l = circle_size(m);
    let mut buf = (0..l)
        .map(|k| {
            let th = std::f64::consts::TAU * (k as f64 + 0.5) / l as f64;
            b.eval_at(-1.0 / (th / 2.0).tan())
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = buf.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for x in [1e6, -1e6] {
        let v = b.eval_at(x)?;
        if !v.norm().is_finite() || v.norm() > 1e3 * scale {
            return Err(Error::Domain(format!(
                "symbol blows up at infinity (|b({x:e})| = {:.3e})",
                v.norm()
            )));
        }
    }
    if let Some(k) = buf.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    dft_in_place(&mut buf, true);
    // the half-step offset in theta contributes exp(-i pi n / L)
    let coeffs = (-(m as i64)..=m as i64)
        .map(|n| {
            let idx = n.rem_euclid(l as i64) as usize;
            buf[idx] * cis_turns(-(n as f64) / (2.0 * l as f64)) / l as f64
        })
        .collect();
    HankelData::new(m, coeffs)
}

/// `sum c_n omega(x)^n`.
pub fn disk_to_line(h: &HankelData, x: f64) -> C64 {
    eval_laurent(h, omega_line(x))
}

fn eval_laurent(h: &HankelData, z: C64) -> C64 {
    let m = h.truncation as i64;
    let zi = z.inv();
    let mut pos = C64::new(0.0, 0.0);
    for n in (1..=m).rev() {
        pos = (pos + h.coeff(n)) * z;
    }
    let mut neg = C64::new(0.0, 0.0);
    for n in (1..=m).rev() {
        neg = (neg + h.coeff(-n)) * zi;
    }
    h.coeff(0) + pos + neg
}

/// Window Hankel data of a periodic symbol: `c_j = F_b(j/P)/P`.
pub fn window_hankel(b: &SampledFunction, m: usize) -> Result<HankelData> {
    if b.boundary() != Boundary::Periodic {
        return Err(Error::Precondition("Hankel data need a periodic symbol".into()));
    }
    let s = fft_spectrum(b);
    let period = b.grid().period();
    let mut c = vec![C64::new(0.0, 0.0); 2 * m + 1];
    for (idx, v) in s.values().iter().enumerate() {
        let j = s.lattice_index(idx);
        if j.unsigned_abs() as usize <= m {
            c[(j + m as i64) as usize] += v / period;
        }
    }
    HankelData::new(m, c)
}

/// Best approximation of a Hankel operator by a bounded symbol built from
/// its top Schmidt pair: `psi = sigma0 U / v` with `Gamma v = sigma0 u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AakSolution {
    pub sigma0: f64,
    pub sigma1: f64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AakSolution {
    pub fn is_zero(&self) -> bool {
        self.sigma0 == 0.0
    }

    /// `psi(z)` for `|z| = 1`.
    pub fn eval(&self, z: C64) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        let mut vz = C64::new(0.0, 0.0);
        for c in self.v.iter().rev() {
            vz = vz * z + c;
        }
        let w = z.inv();
        let mut uz = C64::new(0.0, 0.0);
        for c in self.u.iter().rev() {
            uz = uz * w + c;
        }
        uz *= w;
        let floor = 1e-8;
        if vz.norm() < floor {
            vz = if vz.norm() == 0.0 {
                C64::new(floor, 0.0)
            } else {
                vz / vz.norm() * floor
            };
        }
        uz * self.sigma0 / vz
    }

    /// Samples at `theta_k = 2 pi (k + 1/2)/L`.
    pub fn sample_circle(&self, l: usize) -> Vec<C64> {
        (0..l)
            .into_par_iter()
            .map(|k| self.eval(cis_turns((k as f64 + 0.5) / l as f64)))
            .collect()
    }
}

pub fn aak_solve(h: &HankelData) -> Result<AakSolution> {
    let gamma = h.hankel_matrix();
    let m = h.truncation;
    if m == 0 {
        return Err(Error::Domain("empty Hankel matrix".into()));
    }
    let scale: f64 = h.disk_coeffs.iter().map(|c| c.norm()).sum();
    let svd = gamma.svd(true, true);
    let (order, sig) = {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let s0 = svd.singular_values[idx[0]];
        let s1 = if m > 1 { svd.singular_values[idx[1]] } else { 0.0 };
        (idx[0], (s0, s1))
    };
    let (sigma0, sigma1) = sig;
    if sigma0 <= 1e-14 * scale.max(f64::MIN_POSITIVE) || sigma0 == 0.0 {
        return Ok(AakSolution {
            sigma0: 0.0,
            sigma1: 0.0,
            u: vec![C64::new(0.0, 0.0); m],
            v: vec![C64::new(0.0, 0.0); m],
            warnings: Vec::new(),
        });
    }
    let u_mat = svd.u.as_ref().expect("left vectors");
    let vt = svd.v_t.as_ref().expect("right vectors");
    let u: Vec<C64> = u_mat.column(order).iter().cloned().collect();
    let v: Vec<C64> = vt.row(order).iter().map(|c| c.conj()).collect();
    let mut warnings = Vec::new();
    if (sigma0 - sigma1) <= 1e-10 * sigma0 {
        warnings.push(format!(
            "top singular value is degenerate (sigma0 = {sigma0:.6e}, sigma1 = {sigma1:.6e})"
        ));
    }
    Ok(AakSolution {
        sigma0,
        sigma1,
        u,
        v,
        warnings,
    })
}

/// Largest deviation of the negative coefficients `psi_hat(-n)`, `n >= 1`,
/// from those of `h`, using `l` circle samples.
pub fn moment_residual(sol: &AakSolution, h: &HankelData, l: usize) -> f64 {
    let mut buf = sol.sample_circle(l);
    dft_in_place(&mut buf, true);
    let m = h.truncation as i64;
    (1..=(2 * m).min(l as i64 / 2 - 1))
        .map(|n| {
            let idx = (-n).rem_euclid(l as i64) as usize;
            let c = buf[idx] * cis_turns(n as f64 / (2.0 * l as f64)) / l as f64;
            (c - h.coeff(-n)).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NehariSolution {
    /// Samples on the symbol grid refined by `PSI_REFINE`.
    pub psi: SampledFunction,
    pub sigma0: f64,
    pub sup_norm: f64,
    /// Power-iteration estimate of `||P_-[b .]||` on analytic functions.
    pub hankel_norm_line: f64,
    pub truncation: usize,
    pub tail_ratio: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Hankel truncation for band `a` on a window of period `P`.
pub fn default_truncation(a: Band, period: f64) -> usize {
    ((2.0 * a.value() * period).ceil() as usize).max(256)
}

/// Solves the Nehari problem for a periodic symbol `b` whose spectrum lies in
/// `[-2a, inf)`: returns `psi` with the same negative Fourier coefficients and
/// `sup |psi| = ||H_b||`.
pub fn nehari_solve(b: &SampledFunction, a: Band) -> Result<NehariSolution> {
    let av = a.value();
    let s = fft_spectrum(b);
    let total = s.energy_where(|_| true);
    if total > 0.0 {
        let tol = 1e-9 / b.grid().period();
        let low = s.energy_where(|xi| xi < -2.0 * av - tol) / total;
        if low > 1e-10 {
            return Err(Error::Precondition(format!(
                "symbol spectrum extends below -2a (relative energy {low:.3e})"
            )));
        }
    }
    let period = b.grid().period();
    let m = default_truncation(a, period);
    let data = window_hankel(b, m)?;
    let sol = aak_solve(&data)?;
    let fine = b.grid().refine(PSI_REFINE);
    let xs: Vec<f64> = fine.positions().collect();
    let values: Vec<C64> = xs
        .par_iter()
        .map(|&x| sol.eval(cis_turns(x / period)))
        .collect();
    let psi = SampledFunction::new(fine, values, Boundary::Periodic)?;
    let sup_norm = psi.sup_norm();
    let hankel_norm_line = hankel_norm_line(b, a, 0x4e48)?;
    Ok(NehariSolution {
        psi,
        sigma0: sol.sigma0,
        sup_norm,
        hankel_norm_line,
        truncation: m,
        tail_ratio: data.tail_ratio(),
        warnings: sol.warnings,
    })
}

pub fn nehari_solve_spec(b: &SymbolSpec, a: Band, grid: &crate::grid::Grid) -> Result<NehariSolution> {
    let rho = b.spectral_radius()?;
    let fine = grid.refine(refinement_for(grid, 2.0 * a.value() + rho));
    nehari_solve(&b.sample(&fine)?, a)
}

fn restrict_to(f: &SampledFunction, lo: f64, hi: f64) -> SampledFunction {
    apply_multiplier(f, |xi| {
        C64::new(if xi >= lo && xi <= hi { 1.0 } else { 0.0 }, 0.0)
    })
}

fn l2(f: &SampledFunction) -> f64 {
    f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `||H_b||` by power iteration of `P_+ conj(b) P_- b` on analytic functions
/// with spectrum in `[0, 4a]`; only `[0, 2a)` can meet the negative part of
/// `b`, so the restriction does not change the norm.
pub fn hankel_norm_line(b: &SampledFunction, a: Band, seed: u64) -> Result<f64> {
    let av = a.value();
    let factor = refinement_for(b.grid(), 12.0 * av);
    let b = upsample(b, factor)?;
    let bc = b.conj();
    let mut f = restrict_to(&random_samples(b.grid(), Boundary::Periodic, seed), 0.0, 4.0 * av);
    let mut est = 0.0;
    for _ in 0..300 {
        let n = l2(&f);
        if n == 0.0 {
            return Ok(0.0);
        }
        f = f.scale(C64::new(1.0 / n, 0.0));
        let g = project_halfline(&b.mul(&f)?, HalfLine::Minus);
        let next = restrict_to(&project_halfline(&bc.mul(&g)?, HalfLine::Plus), 0.0, 4.0 * av);
        let new_est = l2(&next).sqrt();
        let done = (new_est - est).abs() <= 1e-13 * new_est;
        est = new_est;
        f = next;
        if done {
            break;
        }
    }
    Ok(est)
}

/// Largest `|<(psi - b) f, g>| / (||f|| ||g||)` over seeded analytic `f` and
/// anti-analytic `g` with spectra within `4a` of the origin.
pub fn hankel_pairing_residual(psi: &SampledFunction, b: &SampledFunction, a: Band, seed: u64) -> Result<f64> {
    let av = a.value();
    let factor = b.grid().refinement_factor(psi.grid()).ok_or(Error::GridMismatch)?;
    let diff = psi.sub(&upsample(b, factor)?)?;
    let mut worst: f64 = 0.0;
    for s in 0..6 {
        let f = restrict_to(&random_samples(psi.grid(), Boundary::Periodic, seed + 2 * s), 0.0, 4.0 * av);
        let g = restrict_to(
            &random_samples(psi.grid(), Boundary::Periodic, seed + 2 * s + 1),
            -4.0 * av,
            -1e-9,
        );
        let pair = crate::grid::inner(&diff.mul(&f)?, &g)?;
        let nf = crate::grid::inner(&f, &f)?.re.sqrt();
        let ng = crate::grid::inner(&g, &g)?.re.sqrt();
        worst = worst.max(pair.norm() / (nf * ng));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedParts {
    pub psi_l: SampledFunction,
    pub phi_c: SampledFunction,
    pub psi_r: SampledFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedSymbolResult {
    pub p: f64,
    pub psi: SampledFunction,
    pub sup_norm: f64,
    /// `||T_phi - T_psi||` upper estimate in the Nyquist basis.
    pub operator_residual: f64,
    pub operator_norm: NormEstimate,
    /// `sup_norm / ((p + 1/(p-1)) ||T_phi||)`.
    pub c_meas: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<BoundedParts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn exponent_factor(p: f64) -> f64 {
    if p.is_infinite() || p <= 1.0 {
        f64::INFINITY
    } else {
        p + 1.0 / (p - 1.0)
    }
}

/// Replaces `phi` by a bounded symbol `psi = conj(theta_a)^2 psi_l + phi_C +
/// theta_a^2 psi_r` defining the same Toeplitz operator on `PW_a`.
pub fn bounded_symbol(phi: &SymbolSpec, basis: &NyquistBasis, p: f64) -> Result<BoundedSymbolResult> {
    let a = basis.band();
    let av = a.value();
    let grid = basis.grid();
    let op = ToeplitzOp::new(phi, a, grid).map_err(|e| e.at_stage("symbol"))?;
    let m_phi = toeplitz_matrix_of(&op, basis, p)?;
    let operator_norm = matrix_pnorm(&m_phi, p)?;
    if op.is_zero() {
        let psi = SampledFunction::zeros(*grid, Boundary::Periodic);
        return Ok(BoundedSymbolResult {
            p,
            psi,
            sup_norm: 0.0,
            operator_residual: 0.0,
            operator_norm,
            c_meas: 0.0,
            sigma_left: 0.0,
            sigma_right: 0.0,
            certified: true,
            parts: None,
            warnings: vec!["operator vanishes identically; psi = 0".into()],
        });
    }
    let split = split_symbol(phi, a, grid).map_err(|e| e.at_stage("split"))?;
    let mut warnings = split.warnings.clone();
    let right_data = modulate(&split.right, -2.0 * av).map_err(|e| e.at_stage("right transfer"))?;
    let right = nehari_solve(&right_data, a).map_err(|e| e.at_stage("right Nehari"))?;
    let left_data =
        modulate(&split.left.reflect(), -2.0 * av).map_err(|e| e.at_stage("left transfer"))?;
    let left = nehari_solve(&left_data, a).map_err(|e| e.at_stage("left Nehari"))?;
    warnings.extend(right.warnings.iter().cloned());
    warnings.extend(left.warnings.iter().cloned());

    let psi_r = right.psi;
    let psi_l = left.psi.reflect();
    let phi_c = upsample(&split.central, PSI_REFINE)?;
    let psi = modulate(&psi_l, -2.0 * av)?
        .add(&phi_c)?
        .add(&modulate(&psi_r, 2.0 * av)?)?;
    let sup_norm = psi.sup_norm();

    let t_psi = ToeplitzOp::compressed(&psi, a, grid)?;
    let m_psi = toeplitz_matrix_of(&t_psi, basis, p)?;
    let diff = m_phi.with_entries(&m_phi.entries - &m_psi.entries);
    let operator_residual = matrix_pnorm(&diff, p)?.upper;
    let t_norm = operator_norm.lower;
    let c_meas = if t_norm > 0.0 {
        sup_norm / (exponent_factor(p) * t_norm)
    } else {
        0.0
    };
    let certified = operator_residual <= 1e-3 * t_norm.max(f64::MIN_POSITIVE);
    Ok(BoundedSymbolResult {
        p,
        psi,
        sup_norm,
        operator_residual,
        operator_norm,
        c_meas,
        sigma_left: left.sigma0,
        sigma_right: right.sigma0,
        certified,
        parts: Some(BoundedParts { psi_l, phi_c, psi_r }),
        warnings,
    })
}

/// Relative negative-frequency energy of `theta_a^2 psi_r f` over seeded
/// analytic `f`; zero when multiplication keeps analytic functions analytic.
pub fn analytic_absorption_residual(psi_r: &SampledFunction, a: Band, seed: u64) -> Result<f64> {
    let t = modulate(psi_r, 2.0 * a.value())?;
    let mut worst: f64 = 0.0;
    for s in 0..4 {
        let f = restrict_to(
            &random_samples(psi_r.grid(), Boundary::Periodic, seed + s),
            0.0,
            4.0 * a.value(),
        );
        let prod = t.mul(&f)?;
        let neg = project_halfline(&prod, HalfLine::Minus);
        worst = worst.max(l2(&neg) / l2(&prod).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// `Gamma x` for a coefficient vector `x` of length `M`.
pub fn hankel_apply(h: &HankelData, x: &[C64]) -> Vec<C64> {
    let v = DVector::from_column_slice(x);
    (h.hankel_matrix() * v).iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::toeplitz::SymbolForm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_transfers_to_constant() {
        let h = line_to_disk(&SymbolSpec::constant(C64::new(1.0, 0.0)), 32).unwrap();
        assert!((h.coeff(0) - 1.0).norm() <= 1e-12);
        for n in -32..=32 {
            if n != 0 {
                assert!(h.coeff(n).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn conjugate_omega_is_a_negative_monomial() {
        let b: SymbolSpec = SymbolForm::Omega { power: -1 }.into();
        let h = line_to_disk(&b, 16).unwrap();
        assert!((h.coeff(-1) - 1.0).norm() <= 1e-12);
        let rest = (-16..=16).filter(|&n| n != -1).map(|n| h.coeff(n).norm()).fold(0.0, f64::max);
        assert!(rest <= 1e-12);
    }

    #[test]
    fn cayley_round_trip() {
        let b = SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0);
        let h = line_to_disk(&b, 2048).unwrap();
        for x in [-3.0, -1.0, -0.3, 0.0, 0.5, 2.0, 4.0] {
            let back = disk_to_line(&h, x);
            assert!((back - b.eval_at(x).unwrap()).norm() <= 1e-8, "x = {x}");
        }
    }

    #[test]
    fn blow_up_at_infinity_is_rejected() {
        let b: SymbolSpec = SymbolForm::ModPoly { degree: 2, freq: 0.0, coeff: 1.0 }.into();
        assert!(line_to_disk(&b, 16).is_err());
    }

    #[test]
    fn hankel_matrix_structure() {
        let h = HankelData::from_negative(&[C64::new(1.0, 0.0), C64::new(0.5, 0.2), C64::new(0.1, 0.0)])
            .unwrap();
        let g = h.hankel_matrix();
        for j in 0..3 {
            for k in 0..3 {
                if j + 1 < 3 && k >= 1 {
                    assert_eq!(g[(j, k)], g[(j + 1, k - 1)]);
                }
            }
        }
        assert_eq!(g[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(hankel_apply(&h, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)])[1], C64::new(0.5, 0.2));
    }

    #[test]
    fn rank_one_hankel() {
        let h = HankelData::from_negative(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        let sol = aak_solve(&h).unwrap();
        assert!((sol.sigma0 - 1.0).abs() <= 1e-12);
        for z in sol.sample_circle(64) {
            assert!((z.norm() - 1.0).abs() <= TOL_AAK);
        }
    }

    #[test]
    fn zero_hankel_gives_zero_symbol() {
        let h = HankelData::from_negative(&[C64::new(0.0, 0.0); 4]).unwrap();
        let sol = aak_solve(&h).unwrap();
        assert_eq!(sol.sigma0, 0.0);
        assert!(sol.sample_circle(16).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn random_decaying_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let neg: Vec<C64> = (1..=16)
            .map(|n| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.5f64.powi(n))
            .collect();
        let h = HankelData::from_negative(&neg).unwrap();
        let sol = aak_solve(&h).unwrap();
        let gamma_norm = h.hankel_matrix().svd(false, false).singular_values.max();
        assert!((sol.sigma0 - gamma_norm).abs() <= 1e-14 * gamma_norm);
        let samples = sol.sample_circle(4096);
        let sup = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(sup <= (1.0 + TOL_AAK) * sol.sigma0);
        assert!(moment_residual(&sol, &h, 4096) <= 1e-6 * sol.sigma0);
    }

    #[test]
    fn sigma_monotone_in_truncation() {
        let g = Grid::for_band(1.0, 32.0, 8).unwrap();
        let b = modulate(
            &SymbolSpec::bump_spectrum(1.5, 1.0, 1.0, false).sample(&g).unwrap(),
            -2.0,
        )
        .unwrap();
        let mut prev = 0.0;
        for m in [16, 32, 64, 128] {
            let s = aak_solve(&window_hankel(&b, m).unwrap()).unwrap().sigma0;
            assert!(s >= prev - 1e-8);
            prev = s;
        }
    }

    #[test]
    fn analytic_symbol_needs_no_correction() {
        let g = Grid::for_band(1.0, 32.0, 8).unwrap();
        let b = SymbolSpec::bump_spectrum(2.5, 0.4, 1.0, false).sample(&g).unwrap();
        let sol = nehari_solve(&b, Band::new(1.0).unwrap()).unwrap();
        assert_eq!(sol.sigma0, 0.0);
        assert_eq!(sol.sup_norm, 0.0);
    }

    #[test]
    fn right_part_of_gaussian() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let a = basis.band();
        let split = split_symbol(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), a, basis.grid()).unwrap();
        let b = modulate(&split.right, -2.0).unwrap();
        let sol = nehari_solve(&b, a).unwrap();
        assert!(sol.tail_ratio <= 1e-8);
        assert!(hankel_pairing_residual(&sol.psi, &b, a, 11).unwrap() <= 1e-5);
        assert!(sol.sup_norm <= (1.0 + TOL_AAK) * sol.sigma0);
        assert!(sol.sup_norm <= b.sup_norm() * (1.0 + TOL_AAK));
        assert!((sol.sigma0 - sol.hankel_norm_line).abs() <= 0.05 * sol.sigma0);
        assert!(analytic_absorption_residual(&sol.psi, a, 3).unwrap() <= 1e-6);
    }

    #[test]
    fn low_spectrum_symbol_is_its_own_bounded_symbol() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let phi = SymbolSpec::bump_spectrum(0.0, 0.2, 1.0, false);
        let r = bounded_symbol(&phi, &basis, 2.0).unwrap();
        assert!(r.operator_residual <= 1e-8);
        assert!(r.sigma_left <= 1e-12 && r.sigma_right <= 1e-12);
        let want = phi.sample(r.psi.grid()).unwrap();
        assert!(r.psi.sub(&want).unwrap().sup_norm() <= 1e-8 * want.sup_norm());
        assert!(want.sup_norm() > 0.1);
    }

    #[test]
    fn zero_operator_gives_zero_symbol() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let phi: SymbolSpec = SymbolForm::ModPoly { degree: 1, freq: 2.0, coeff: 1.0 }.into();
        let r = bounded_symbol(&phi, &basis, 2.0).unwrap();
        assert_eq!(r.sup_norm, 0.0);
    }
}
