//! Commutator characterization of Toeplitz operators, the series that
//! rebuilds an operator from its commutator, and symbol recovery.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cis_turns, inner, Boundary, SampledFunction, C64};
use crate::pwspace::{
    band_residual, cauchy_kernel_window, conj_kernel_window, modulate, BandlimitedFunction,
    InnerFunction,
};
use crate::toeplitz::{
    norm::spectral_norm, toeplitz_matrix, toeplitz_matrix_of, DenseMatrix, NyquistBasis,
    OperatorMatrix, SymbolForm, SymbolSpec, ToeplitzOp,
};

/// Window-adapted unimodular factor `sin(pi(x - i)/P) / sin(pi(x + i)/P)`,
/// which tends to `(x - i)/(x + i)` as `P` grows.
pub fn omega_window(x: f64, period: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    ((x - i) * (PI / period)).sin() / ((x + i) * (PI / period)).sin()
}

/// Closed form of the band-side conjugate kernel at `i` on a window:
/// `(theta_a(x) - e^{-4 pi a} conj(theta_a(x))) / (2 P sinh(pi (1 + i x) / P))`.
pub fn window_kernel(a: f64, x: f64, period: f64) -> C64 {
    let t = cis_turns(a * x);
    let damp = (-4.0 * PI * a).exp();
    (t - t.conj() * damp) / (C64::new(1.0, x) * (PI / period)).sinh() / (2.0 * period)
}

/// Fractional power with the argument taken in `(-pi, pi]`.
fn principal_pow(z: C64, e: f64) -> C64 {
    if z.norm() == 0.0 {
        return z;
    }
    C64::from_polar(z.norm().powf(e), z.arg() * e)
}

/// Objects attached to the unimodular factor `omega` on a band.
#[derive(Clone, Debug)]
pub struct ConformalFrame {
    pub basis: NyquistBasis,
    pub p: f64,
    pub omega: SampledFunction,
    /// The conjugate kernel `k` in the band space.
    pub kernel: SampledFunction,
    pub kernel_coeffs: DVector<C64>,
    /// `1 / ||k||_2^2`.
    pub alpha: f64,
    /// Window Cauchy kernel at `i`.
    pub cauchy: SampledFunction,
    /// `(x + i)^{2/p}`.
    pub sigma: SampledFunction,
    /// `alpha conj(h_i)^{2/p}`.
    pub eta: SampledFunction,
}

pub fn build_frame(basis: &NyquistBasis, p: f64) -> Result<ConformalFrame> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("exponent must lie in (1, inf), got {p}")));
    }
    let a = basis.band().value();
    let grid = *basis.grid();
    let i = C64::new(0.0, 1.0);
    let period = grid.period();
    let omega = SampledFunction::from_fn(grid, Boundary::Periodic, |x| omega_window(x, period))?;
    let th = InnerFunction::exp(2.0 * a)?;
    let kernel = modulate(&conj_kernel_window(th, i, &grid, Boundary::Antiperiodic)?, -a)?;
    let norm_sq = inner(&kernel, &kernel)?.re;
    if !(norm_sq > 0.0) {
        return Err(Error::Domain("conjugate kernel vanishes".into()));
    }
    let alpha = 1.0 / norm_sq;
    let kernel_coeffs = DVector::from_vec(basis.coefficients(&kernel)?);
    let cauchy = cauchy_kernel_window(i, &grid, Boundary::Antiperiodic)?;
    let e = 2.0 / p;
    let sigma = SampledFunction::from_fn(grid, Boundary::Periodic, |x| principal_pow(x + i, e))?;
    let eta = cauchy.map(|h| principal_pow(h.conj(), e) * alpha);
    Ok(ConformalFrame {
        basis: *basis,
        p,
        omega,
        kernel,
        kernel_coeffs,
        alpha,
        cauchy,
        sigma,
        eta,
    })
}

impl ConformalFrame {
    /// Nyquist-node values `omega(t_k)`.
    pub fn omega_nodes(&self) -> DVector<C64> {
        let period = self.basis.grid().period();
        DVector::from_iterator(
            self.basis.len(),
            (0..self.basis.len()).map(|k| omega_window(self.basis.node(k), period)),
        )
    }

    /// Matrix of `K = I - alpha k (x) k`.
    pub fn k_matrix(&self) -> DenseMatrix {
        let n = self.basis.len();
        let k = &self.kernel_coeffs;
        DenseMatrix::identity(n, n) - k * k.adjoint() * C64::new(self.alpha, 0.0)
    }

    /// Matrix of `alpha k (x) k`.
    pub fn rank_one(&self) -> DenseMatrix {
        let k = &self.kernel_coeffs;
        k * k.adjoint() * C64::new(self.alpha, 0.0)
    }
}

pub fn k_projector(f: &BandlimitedFunction, frame: &ConformalFrame) -> Result<BandlimitedFunction> {
    let c = inner(f.function(), &frame.kernel)?;
    let out = f
        .function()
        .sub(&frame.kernel.scale(c * frame.alpha))?;
    BandlimitedFunction::certify(out, f.band())?.with_exponent(f.exponent())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    pub flag: bool,
    /// `|<f, k>| / (||f|| ||k||)`.
    pub defect: f64,
    /// Relative energy of `omega f` outside the band.
    pub omega_band_residual: f64,
}

/// Whether `omega f` stays in the band space, read off from `<f, k>`.
pub fn omega_compatible(f: &BandlimitedFunction, frame: &ConformalFrame) -> Result<Compatibility> {
    let nf = inner(f.function(), f.function())?.re.sqrt();
    let defect = if nf == 0.0 {
        0.0
    } else {
        inner(f.function(), &frame.kernel)?.norm() * frame.alpha.sqrt() / nf
    };
    let wf = frame.omega.mul(f.function())?;
    Ok(Compatibility {
        flag: defect <= 1e-6,
        defect,
        omega_band_residual: band_residual(&wf, f.band()),
    })
}

/// `Lambda = T_omega` and `LambdaBar = T_conj(omega)` in the Nyquist basis.
#[derive(Clone, Debug)]
pub struct CompressionOps {
    pub lambda: OperatorMatrix,
    pub lambda_bar: OperatorMatrix,
}

pub fn lambda_ops(frame: &ConformalFrame) -> Result<CompressionOps> {
    let omega: SymbolSpec = SymbolForm::Omega { power: 1 }.into();
    let omega_bar: SymbolSpec = SymbolForm::Omega { power: -1 }.into();
    Ok(CompressionOps {
        lambda: toeplitz_matrix(&omega, &frame.basis, frame.p)?,
        lambda_bar: toeplitz_matrix(&omega_bar, &frame.basis, frame.p)?,
    })
}

/// `||(I - LambdaBar Lambda) - alpha k (x) k||_2`.
pub fn defect_identity_residual(frame: &ConformalFrame, ops: &CompressionOps) -> f64 {
    let n = frame.basis.len();
    let lhs = DenseMatrix::identity(n, n) - &ops.lambda_bar.entries * &ops.lambda.entries;
    spectral_norm(&(lhs - frame.rank_one()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub is_toeplitz: bool,
    pub deviation: f64,
    pub tested_pairs: usize,
}

/// Largest normalized `|<T f, g> - <T(omega f), omega g>|` over `f, g` in
/// the range of `K` built from interior Nyquist vectors. On that range
/// `omega f` is band-limited, so it is given by its node values.
pub fn commutator_test(t: &OperatorMatrix, frame: &ConformalFrame) -> Result<CommutatorReport> {
    let n = frame.basis.len();
    if t.entries.shape() != (n, n) {
        return Err(Error::Length {
            expected: n,
            got: t.entries.nrows(),
        });
    }
    let interior = frame.basis.interior(0.9);
    let k = frame.k_matrix();
    let f = DenseMatrix::from_fn(n, interior.len(), |r, c| k[(r, interior[c])]);
    let w = frame.omega_nodes();
    let d = DenseMatrix::from_diagonal(&w);
    let tn = spectral_norm(&t.entries);
    if tn == 0.0 {
        return Ok(CommutatorReport {
            is_toeplitz: true,
            deviation: 0.0,
            tested_pairs: interior.len() * interior.len(),
        });
    }
    let diff = &t.entries - d.adjoint() * &t.entries * &d;
    let pairings = f.adjoint() * diff * &f;
    let norms: Vec<f64> = f.column_iter().map(|c| c.norm()).collect();
    let mut deviation: f64 = 0.0;
    for j in 0..interior.len() {
        for i in 0..interior.len() {
            let scale = tn * norms[i] * norms[j];
            if scale > 0.0 {
                deviation = deviation.max(pairings[(j, i)].norm() / scale);
            }
        }
    }
    Ok(CommutatorReport {
        is_toeplitz: deviation <= 1e-6,
        deviation,
        tested_pairs: interior.len() * interior.len(),
    })
}

/// `T - LambdaBar T Lambda`.
pub fn commutator(t: &OperatorMatrix, ops: &CompressionOps) -> DenseMatrix {
    &t.entries - &ops.lambda_bar.entries * &t.entries * &ops.lambda.entries
}

/// Partial sum `sum_{n=0}^{N} LambdaBar^n C LambdaBar Lambda^n` of the
/// series rebuilding `T` from its commutator `C`.
pub fn series_reconstruct(t: &OperatorMatrix, n: usize, ops: &CompressionOps) -> OperatorMatrix {
    let mut term = commutator(t, ops);
    let mut sum = term.clone();
    for _ in 0..n {
        term = &ops.lambda_bar.entries * term * &ops.lambda.entries;
        sum += &term;
    }
    t.with_entries(sum)
}

/// `max_k ||(S - T) e_k|| / ||T||_2` over interior basis vectors.
pub fn series_residual(t: &OperatorMatrix, s: &OperatorMatrix) -> f64 {
    let tn = spectral_norm(&t.entries);
    let diff = &s.entries - &t.entries;
    let worst = t
        .basis
        .interior(0.9)
        .into_iter()
        .map(|k| diff.column(k).norm())
        .fold(0.0, f64::max);
    if tn == 0.0 {
        worst
    } else {
        worst / tn
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredSymbol {
    /// `phi` with `eta conj(phi) = alpha C k` in band coordinates.
    pub phi: SampledFunction,
    /// `psi` with `eta conj(psi) = alpha Q k`.
    pub psi: SampledFunction,
    /// `conj(phi) + psi`.
    pub symbol: SampledFunction,
    /// `||T_symbol - T||_2 / ||T||_2`.
    pub round_trip: f64,
}

/// Reads a symbol off the commutator: `C = alpha C k (x) k + alpha k (x) Q k`
/// with `Q = C* - conj(alpha <C k, k>) I`.
pub fn recover_symbol(
    t: &OperatorMatrix,
    frame: &ConformalFrame,
    ops: &CompressionOps,
) -> Result<RecoveredSymbol> {
    if frame.p != 2.0 {
        return Err(Error::Unsupported("symbol recovery is implemented for p = 2".into()));
    }
    let alpha = C64::new(frame.alpha, 0.0);
    let c = commutator(t, ops);
    let k = &frame.kernel_coeffs;
    let ck = &c * k;
    let lambda = alpha * k.dotc(&ck);
    let qk = c.adjoint() * k - k * lambda.conj();
    let basis = &frame.basis;
    let ck_f = basis.synthesize((ck * alpha).as_slice())?;
    let qk_f = basis.synthesize((qk * alpha).as_slice())?;
    let a = basis.band().value();
    let eta_floor = 1e-300;
    let divide = |num: &SampledFunction| -> Result<SampledFunction> {
        let values = num
            .values()
            .iter()
            .zip(frame.eta.values())
            .map(|(v, e)| if e.norm() > eta_floor { v / e } else { C64::new(0.0, 0.0) })
            .collect();
        let ratio = SampledFunction::new(*num.grid(), values, Boundary::Periodic)?;
        modulate(&ratio.conj(), a)
    };
    let phi = divide(&ck_f)?;
    let psi = divide(&qk_f)?;
    let symbol = phi.conj().add(&psi)?;
    let op = ToeplitzOp::compressed(&symbol, basis.band(), basis.grid())?;
    let m = toeplitz_matrix_of(&op, basis, 2.0)?;
    let tn = spectral_norm(&t.entries);
    let diff = spectral_norm(&(&m.entries - &t.entries));
    Ok(RecoveredSymbol {
        phi,
        psi,
        symbol,
        round_trip: if tn == 0.0 { diff } else { diff / tn },
    })
}

/// Numerical rank of the Gram matrix of `f - omega P_+[conj(omega) f]` over
/// seeded analytic `f`; the complement of `omega H^2` is one-dimensional.
pub fn omega_complement_rank(frame: &ConformalFrame, seed: u64, count: usize) -> Result<(usize, f64)> {
    use crate::pwspace::{project_halfline, HalfLine};
    use crate::toeplitz::random_half_band;
    let grid = frame.basis.grid();
    let vecs = (0..count)
        .map(|s| {
            let f = project_halfline(
                &random_half_band(grid, Boundary::Antiperiodic, seed + s as u64),
                HalfLine::Plus,
            );
            let inner_part = project_halfline(&frame.omega.conj().mul(&f)?, HalfLine::Plus);
            f.sub(&frame.omega.mul(&inner_part)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let gram = DenseMatrix::from_fn(count, count, |i, j| {
        inner(&vecs[j], &vecs[i]).expect("same grid")
    });
    let sv = gram.svd(false, false).singular_values;
    let top = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * top).count();
    let second = sv.iter().cloned().filter(|&s| s < top).fold(0.0, f64::max);
    Ok((rank, if top == 0.0 { 0.0 } else { second / top }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwspace::{project_band, Band};
    use crate::toeplitz::{random_samples, toeplitz_matrix};

    fn small() -> NyquistBasis {
        NyquistBasis::desk(1.0, 32.0, 8).unwrap()
    }

    #[test]
    fn omega_is_unimodular_and_vanishes_at_i() {
        for x in [-100.0, -3.0, 0.0, 0.7, 15.0] {
            assert!((omega_window(x, 128.0).norm() - 1.0).abs() <= 1e-14);
        }
        let i = C64::new(0.0, 1.0);
        let at_i = ((i - i) * (PI / 128.0)).sin() / ((i + i) * (PI / 128.0)).sin();
        assert_eq!(at_i, C64::new(0.0, 0.0));
        assert!((omega_window(3.0, 1e6) - (3.0 - i) / (3.0 + i)).norm() <= 1e-10);
    }

    #[test]
    fn frame_kernel_matches_closed_form() {
        let b = small();
        let f = build_frame(&b, 2.0).unwrap();
        let period = b.grid().period();
        for (x, v) in b.grid().positions().zip(f.kernel.values()).step_by(37) {
            assert!((v - window_kernel(1.0, x, period)).norm() <= 1e-12);
        }
        assert!(band_residual(&f.kernel, b.band()) <= 1e-8);
        assert!((f.alpha * inner(&f.kernel, &f.kernel).unwrap().re - 1.0).abs() <= 1e-10);
        assert!(((-4.0 * PI).exp() - 3.487e-6).abs() <= 1e-9);
    }

    #[test]
    fn k_projection_properties() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let kf = BandlimitedFunction::certify(frame.kernel.clone(), b.band()).unwrap();
        let out = k_projector(&kf, &frame).unwrap();
        assert!(out.function().sup_norm() <= 1e-10 * frame.kernel.sup_norm());
        let g = project_band(&random_samples(b.grid(), Boundary::Antiperiodic, 3), b.band()).unwrap();
        let once = k_projector(&g, &frame).unwrap();
        let twice = k_projector(&once, &frame).unwrap();
        assert!(once.function().sub(twice.function()).unwrap().sup_norm() <= 1e-10);
        let c = inner(once.function(), &frame.kernel).unwrap().norm();
        let scale = inner(once.function(), once.function()).unwrap().re.sqrt() / frame.alpha.sqrt();
        assert!(c <= 1e-10 * scale);
    }

    #[test]
    fn compatibility_equivalence() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        for s in 0..20u64 {
            let g = project_band(&random_samples(b.grid(), Boundary::Antiperiodic, 40 + s), b.band())
                .unwrap();
            let f = if s % 2 == 0 { k_projector(&g, &frame).unwrap() } else { g };
            let c = omega_compatible(&f, &frame).unwrap();
            assert_eq!(c.defect <= 1e-8, c.omega_band_residual <= 1e-5, "seed {s}: {c:?}");
            assert_eq!(s % 2 == 0, c.flag);
        }
        let kf = BandlimitedFunction::certify(frame.kernel.clone(), b.band()).unwrap();
        assert!(!omega_compatible(&kf, &frame).unwrap().flag);
        let zero = BandlimitedFunction::certify(
            SampledFunction::zeros(*b.grid(), Boundary::Antiperiodic),
            b.band(),
        )
        .unwrap();
        let z = omega_compatible(&zero, &frame).unwrap();
        assert!(z.flag && z.defect == 0.0);
    }

    #[test]
    fn lambda_properties() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let ops = lambda_ops(&frame).unwrap();
        assert!(spectral_norm(&ops.lambda.entries) <= 1.0 + 1e-6);
        let adj = &ops.lambda_bar.entries - ops.lambda.entries.adjoint();
        assert!(spectral_norm(&adj) <= 1e-8);
        assert!(defect_identity_residual(&frame, &ops) <= 1e-6);
    }

    #[test]
    fn analytic_symbols_commute_with_lambda() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let ops = lambda_ops(&frame).unwrap();
        let psi = SymbolSpec::bump_spectrum(1.0, 0.8, 1.0, false);
        let t = toeplitz_matrix(&psi, &b, 2.0).unwrap();
        let c = &t.entries * &ops.lambda.entries - &ops.lambda.entries * &t.entries;
        assert!(spectral_norm(&c) <= 1e-8);
    }

    #[test]
    fn omega_complement_is_one_dimensional() {
        let frame = build_frame(&small(), 2.0).unwrap();
        let (rank, ratio) = omega_complement_rank(&frame, 9, 6).unwrap();
        assert_eq!(rank, 1, "ratio {ratio}");
    }

    #[test]
    fn commutator_separates_toeplitz_from_spoiled() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let t = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &b, 2.0).unwrap();
        assert!(commutator_test(&t, &frame).unwrap().deviation <= 1e-6);
        let c = b.len() / 2;
        let mut spoiled = t.entries.clone();
        spoiled[(c, c + 1)] += C64::new(1.0, 0.0);
        let r = commutator_test(&t.with_entries(spoiled), &frame).unwrap();
        assert!(r.deviation >= 1e-3 && !r.is_toeplitz);
        // e (x) e at a Nyquist node is itself Toeplitz
        let mut diag = DenseMatrix::zeros(b.len(), b.len());
        diag[(c, c)] = C64::new(1.0, 0.0);
        assert!(commutator_test(&t.with_entries(diag), &frame).unwrap().deviation <= 1e-6);
        let zero = t.with_entries(DenseMatrix::zeros(b.len(), b.len()));
        assert_eq!(commutator_test(&zero, &frame).unwrap().deviation, 0.0);
    }

    #[test]
    fn series_with_zero_terms_is_the_commutator() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let ops = lambda_ops(&frame).unwrap();
        let t = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &b, 2.0).unwrap();
        let s = series_reconstruct(&t, 0, &ops);
        assert_eq!(s.entries, commutator(&t, &ops));
        let r8 = series_residual(&t, &series_reconstruct(&t, 8, &ops));
        let r64 = series_residual(&t, &series_reconstruct(&t, 64, &ops));
        assert!(r64 <= r8);
    }

    #[test]
    fn recovery_round_trips() {
        let b = small();
        let frame = build_frame(&b, 2.0).unwrap();
        let ops = lambda_ops(&frame).unwrap();
        let t = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &b, 2.0).unwrap();
        assert!(recover_symbol(&t, &frame, &ops).unwrap().round_trip <= 1e-3);
        assert!(recover_symbol(&ops.lambda, &frame, &ops).unwrap().round_trip <= 1e-3);
        let zero = t.with_entries(DenseMatrix::zeros(b.len(), b.len()));
        let r = recover_symbol(&zero, &frame, &ops).unwrap();
        assert_eq!(r.symbol.sup_norm(), 0.0);
        let f3 = build_frame(&b, 3.0).unwrap();
        assert!(recover_symbol(&t, &f3, &ops).is_err());
        let _ = Band::new(1.0).unwrap();
    }
}
