//! Smooth three-way partition of a symbol's spectrum and the estimates
//! attached to it.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    evaluate_offgrid, fft_spectrum, inverse_spectrum, Boundary, Grid, SampledFunction, C64,
};
use crate::pwspace::{sinc_kernel, sinc_lp_norm, Band};
use crate::toeplitz::{
    matrix_pnorm, refinement_for, toeplitz_matrix_of, NyquistBasis, SymbolForm, SymbolSpec,
    ToeplitzOp,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Left,
    Central,
    Right,
}

impl Part {
    pub const ALL: [Part; 3] = [Part::Left, Part::Central, Part::Right];
}

fn e(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 0 for `u <= 0`, 1 for `u >= 1`.
pub fn smooth_step(u: f64) -> f64 {
    let (l, r) = (e(u), e(1.0 - u));
    l / (l + r)
}

fn left_bump(x: f64) -> f64 {
    if x <= -4.0 || x >= -0.25 {
        0.0
    } else if x < -2.0 {
        smooth_step((x + 4.0) / 2.0)
    } else if x <= -0.5 {
        1.0
    } else {
        smooth_step(-4.0 * x - 1.0)
    }
}

/// The unscaled bumps: `L` lives on `[-4, -1/4]` with plateau `[-2, -1/2]`,
/// `R` is its mirror image and `C` fills `[-1/2, 1/2]`.
pub fn bump(x: f64, which: Part) -> f64 {
    match which {
        Part::Left => left_bump(x),
        Part::Right => left_bump(-x),
        Part::Central => {
            if x.abs() > 0.5 {
                0.0
            } else {
                1.0 - left_bump(x) - left_bump(-x)
            }
        }
    }
}

/// `bump(xi / a)`.
pub fn scaled_bump(xi: f64, a: f64, which: Part) -> f64 {
    bump(xi / a, which)
}

/// Rows `(x, L, C, R)` on `points` equispaced nodes of `[-5, 5]`.
pub fn bump_table(points: usize) -> Vec<[f64; 4]> {
    let n = points.max(2);
    (0..n)
        .map(|k| {
            let x = -5.0 + 10.0 * k as f64 / (n - 1) as f64;
            [x, bump(x, Part::Left), bump(x, Part::Central), bump(x, Part::Right)]
        })
        .collect()
}

const CHECK_STEP: f64 = 1.0 / 512.0;
const CHECK_COUNT: usize = 1 << 21;

fn l1_cache() -> &'static Mutex<HashMap<(Part, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(Part, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `||F^{-1} bump(./a)||_{L^1}`, from the DFT of the scaled bump sampled on a
/// fixed frequency grid of step 1/512.
pub fn psi_check_l1(which: Part, a: Band) -> f64 {
    let key = (which, a.value().to_bits());
    if let Some(v) = l1_cache().lock().expect("l1 cache").get(&key) {
        return *v;
    }
    let a = a.value();
    let freq = Grid::centered(CHECK_STEP * CHECK_COUNT as f64 / 2.0, CHECK_STEP)
        .expect("fixed frequency grid");
    let samples = SampledFunction::from_fn(freq, Boundary::Periodic, |xi| {
        C64::new(scaled_bump(xi, a, which), 0.0)
    })
    .expect("finite bump samples");
    // The "spectrum" of the frequency samples holds psi-check at t = -m / (N h).
    let s = fft_spectrum(&samples);
    let dt = 1.0 / freq.period();
    let l1 = s.values().iter().map(|v| v.norm()).sum::<f64>() * dt;
    l1_cache().lock().expect("l1 cache").insert(key, l1);
    l1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Norms {
    pub left: f64,
    pub central: f64,
    pub right: f64,
}

impl L1Norms {
    pub fn for_band(a: Band) -> Self {
        L1Norms {
            left: psi_check_l1(Part::Left, a),
            central: psi_check_l1(Part::Central, a),
            right: psi_check_l1(Part::Right, a),
        }
    }

    pub fn get(&self, part: Part) -> f64 {
        match part {
            Part::Left => self.left,
            Part::Central => self.central,
            Part::Right => self.right,
        }
    }

    pub fn total(&self) -> f64 {
        self.left + self.central + self.right
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportResiduals {
    pub left: f64,
    pub central: f64,
    pub right: f64,
    /// Relative mismatch of `phi_L + phi_C + phi_R` and `phi` on `[-2a, 2a]`.
    pub partition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub band: Band,
    pub left: SampledFunction,
    pub central: SampledFunction,
    pub right: SampledFunction,
    pub l1_norms: L1Norms,
    pub support: SupportResiduals,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SplitResult {
    pub fn part(&self, which: Part) -> &SampledFunction {
        match which {
            Part::Left => &self.left,
            Part::Central => &self.central,
            Part::Right => &self.right,
        }
    }

    /// Toeplitz operator of one part, acting on functions over `grid`.
    pub fn operator(&self, which: Part, grid: &Grid) -> Result<ToeplitzOp> {
        ToeplitzOp::from_samples(self.part(which).clone(), self.band, grid)
    }
}

fn support_interval(which: Part, a: f64) -> (f64, f64) {
    match which {
        Part::Left => (-4.0 * a, -a / 4.0),
        Part::Central => (-a / 2.0, a / 2.0),
        Part::Right => (a / 4.0, 4.0 * a),
    }
}

/// Relative spectral energy of `f` outside `[lo, hi]`.
fn outside_energy(f: &SampledFunction, lo: f64, hi: f64) -> f64 {
    let s = fft_spectrum(f);
    let total = s.energy_where(|_| true);
    if total == 0.0 {
        return 0.0;
    }
    let tol = 1e-9 / f.grid().period();
    s.energy_where(|xi| xi < lo - tol || xi > hi + tol) / total
}

/// Fraction of the spectral magnitude in the top tenth of the frequency range.
fn edge_spectral_mass(f: &SampledFunction) -> f64 {
    let s = fft_spectrum(f);
    let ny = f.grid().nyquist();
    let (mut edge, mut total) = (0.0, 0.0);
    for (xi, v) in s.freqs().zip(s.values()) {
        total += v.norm();
        if xi.abs() > 0.9 * ny {
            edge += v.norm();
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

/// Splits `phi` into parts with spectra `bump_X(xi/a) phi-hat(xi)`. The parts
/// are sampled on a refinement of `grid` that resolves `T_phi`.
pub fn split_symbol(phi: &SymbolSpec, a: Band, grid: &Grid) -> Result<SplitResult> {
    let av = a.value();
    let mut warnings = Vec::new();
    match &phi.form {
        SymbolForm::ModPoly { .. } => {
            return Err(Error::Precondition(
                "polynomial symbols are not rapidly decaying and cannot be split".into(),
            ))
        }
        SymbolForm::Omega { .. } => {
            warnings.push("unimodular symbol: spectrum decays slowly, tolerances degrade".into())
        }
        _ => {}
    }
    let rho = phi.spectral_radius()?;
    let fine = grid.refine(refinement_for(grid, 2.0 * av + rho));
    let samples = phi.sample(&fine)?;
    let edge = edge_spectral_mass(&samples);
    if edge > 1e-10 {
        warnings.push(format!(
            "symbol spectrum reaches the grid edge (relative mass {edge:.2e}); not rapidly decaying"
        ));
    }
    let spec = fft_spectrum(&samples);
    let part = |which: Part| {
        let mut s = spec.clone();
        s.multiply(|xi| C64::new(scaled_bump(xi, av, which), 0.0));
        inverse_spectrum(&s)
    };
    let (left, central, right) = (part(Part::Left), part(Part::Central), part(Part::Right));

    let sum = left.add(&central)?.add(&right)?;
    let diff = fft_spectrum(&sum.sub(&samples)?);
    let inside = |xi: f64| xi.abs() <= 2.0 * av;
    let denom = spec.energy_where(inside);
    let partition = if denom == 0.0 {
        diff.energy_where(inside).sqrt()
    } else {
        (diff.energy_where(inside) / denom).sqrt()
    };
    let res = |f: &SampledFunction, w: Part| {
        let (lo, hi) = support_interval(w, av);
        outside_energy(f, lo, hi).sqrt()
    };
    let support = SupportResiduals {
        left: res(&left, Part::Left),
        central: res(&central, Part::Central),
        right: res(&right, Part::Right),
        partition,
    };
    Ok(SplitResult {
        band: a,
        left,
        central,
        right,
        l1_norms: L1Norms::for_band(a),
        support,
        warnings,
    })
}

/// `||M_phi - (M_L + M_C + M_R)||_2 / ||M_phi||_2` in the Nyquist basis.
pub fn operator_sum_residual(phi: &SymbolSpec, basis: &NyquistBasis) -> Result<f64> {
    let split = split_symbol(phi, basis.band(), basis.grid())?;
    let full = toeplitz_matrix_of(&ToeplitzOp::new(phi, basis.band(), basis.grid())?, basis, 2.0)?;
    let mut sum = full.entries.clone() * C64::new(0.0, 0.0);
    for part in Part::ALL {
        let op = split.operator(part, basis.grid())?;
        sum += toeplitz_matrix_of(&op, basis, 2.0)?.entries;
    }
    let num = matrix_pnorm(&full.with_entries(&full.entries - sum), 2.0)?.upper;
    let den = matrix_pnorm(&full, 2.0)?.upper;
    Ok(if den == 0.0 { num } else { num / den })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenEntry {
    pub part: Part,
    pub part_norm: f64,
    pub l1_norm: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub p: f64,
    pub symbol_norm: f64,
    pub entries: Vec<JensenEntry>,
    /// `||psi_L-check||_1 + ||psi_C-check||_1 + ||psi_R-check||_1`.
    pub combined_constant: f64,
    /// Whether the inequalities are certified (exact norms) or only reported.
    pub enforced: bool,
    pub pass: bool,
}

/// Checks `||T_X|| <= ||psi_X-check||_1 ||T_phi|| (1 + 1e-3)` for each part,
/// with the upper estimate on the left and the lower one on the right.
pub fn jensen_certificate(phi: &SymbolSpec, basis: &NyquistBasis, p: f64) -> Result<JensenReport> {
    let a = basis.band();
    let split = split_symbol(phi, a, basis.grid())?;
    let full = toeplitz_matrix_of(&ToeplitzOp::new(phi, a, basis.grid())?, basis, p)?;
    let symbol_norm = matrix_pnorm(&full, p)?.lower;
    let enforced = p == 2.0;
    let mut entries = Vec::with_capacity(3);
    for part in Part::ALL {
        let m = toeplitz_matrix_of(&split.operator(part, basis.grid())?, basis, p)?;
        let part_norm = matrix_pnorm(&m, p)?.upper;
        let l1_norm = split.l1_norms.get(part);
        let bound = l1_norm * symbol_norm * (1.0 + 1e-3);
        entries.push(JensenEntry {
            part,
            part_norm,
            l1_norm,
            bound,
            pass: part_norm <= bound + 1e-12,
        });
    }
    let pass = !enforced || entries.iter().all(|e| e.pass);
    Ok(JensenReport {
        p,
        symbol_norm,
        combined_constant: split.l1_norms.total(),
        entries,
        enforced,
        pass,
    })
}

/// Recovers `phi_C(x)` from an operator whose symbol has spectrum in
/// `[-a/2, a/2]`: `(T_C s)(x) / (2 eps)` with `s = sinc_eps(. - x)`, `eps = a/8`.
pub fn central_recover<F>(apply: F, a: Band, grid: &Grid, x: f64) -> Result<C64>
where
    F: Fn(&SampledFunction) -> Result<SampledFunction>,
{
    let eps = a.value() / 8.0;
    let probe = sinc_kernel(Band::new(eps)?, x, grid)?;
    let out = apply(&probe)?;
    Ok(evaluate_offgrid(&out, x) / (2.0 * eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SincConstant {
    pub p: f64,
    pub product: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `||sinc_1||_q ||sinc_{1/8}||_p` against `(4/pi)(p + 1/(p-1))`.
pub fn sinc_norm_constant(p: f64) -> Result<SincConstant> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("exponent must lie in (1, inf), got {p}")));
    }
    let q = p / (p - 1.0);
    let product = sinc_lp_norm(1.0, q)? * sinc_lp_norm(0.125, p)?;
    let bound = 4.0 / std::f64::consts::PI * (p + 1.0 / (p - 1.0));
    Ok(SincConstant {
        p,
        product,
        bound,
        pass: product <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Interpolant;
    use proptest::prelude::*;

    #[test]
    fn bump_values() {
        assert_eq!(bump(-1.0, Part::Left), 1.0);
        assert_eq!(bump(0.0, Part::Central), 1.0);
        assert_eq!(bump(-5.0, Part::Left), 0.0);
        assert_eq!(bump(-0.25, Part::Left), 0.0);
        assert_eq!(bump(-4.0, Part::Left), 0.0);
        assert_eq!(bump(1.0, Part::Right), 1.0);
        assert_eq!(bump(0.75, Part::Central), 0.0);
    }

    #[test]
    fn partition_of_unity_on_dense_grid() {
        let n = 400_001;
        let worst = (0..n)
            .map(|k| -2.0 + 4.0 * k as f64 / (n - 1) as f64)
            .map(|x| (Part::ALL.iter().map(|&w| bump(x, w)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    proptest! {
        #[test]
        fn bumps_are_bounded_and_supported(x in -6.0f64..6.0) {
            for w in Part::ALL {
                let v = bump(x, w);
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if !(-4.0..=-0.25).contains(&x) {
                prop_assert_eq!(bump(x, Part::Left), 0.0);
            }
            prop_assert_eq!(bump(x, Part::Right), bump(-x, Part::Left));
        }
    }

    #[test]
    fn check_norms_at_least_sup() {
        let a = Band::new(1.0).unwrap();
        let n = L1Norms::for_band(a);
        assert!(n.central >= 1.0);
        assert!(n.left >= 1.0);
        assert!((n.left - n.right).abs() <= 1e-9);
    }

    #[test]
    fn check_decays_faster_than_sixth_power() {
        let freq = Grid::centered(CHECK_STEP * CHECK_COUNT as f64 / 2.0, CHECK_STEP).unwrap();
        for w in Part::ALL {
            let f = SampledFunction::from_fn(freq, Boundary::Periodic, |xi| {
                C64::new(bump(xi, w), 0.0)
            })
            .unwrap();
            let s = fft_spectrum(&f);
            let weighted = |t0: f64| {
                let sup = s
                    .freqs()
                    .zip(s.values())
                    .filter(|(t, _)| t.abs() >= t0)
                    .map(|(_, v)| v.norm())
                    .fold(0.0, f64::max);
                sup * t0.powi(6)
            };
            let (w32, w64, w128) = (weighted(32.0), weighted(64.0), weighted(128.0));
            assert!(w64 < w32 && w128 < w64, "{w:?}: {w32} {w64} {w128}");
            let dt = 1.0 / freq.period();
            let tail: f64 = s
                .freqs()
                .zip(s.values())
                .filter(|(t, _)| t.abs() > 128.0)
                .map(|(_, v)| v.norm() * dt)
                .sum();
            assert!(tail <= 1e-6, "{tail}");
        }
    }

    #[test]
    fn low_spectrum_symbol_is_all_central() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let phi = SymbolSpec::bump_spectrum(0.0, 0.2, 1.0, false);
        let s = split_symbol(&phi, basis.band(), basis.grid()).unwrap();
        assert!(s.left.sup_norm() <= 1e-14);
        assert!(s.right.sup_norm() <= 1e-14);
        let whole = phi.sample(s.central.grid()).unwrap();
        assert!(s.central.sub(&whole).unwrap().sup_norm() <= 1e-14);
    }

    #[test]
    fn gaussian_split_supports_and_sum() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let s = split_symbol(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), basis.band(), basis.grid())
            .unwrap();
        assert!(s.support.left <= 1e-8 && s.support.central <= 1e-8 && s.support.right <= 1e-8);
        assert!(s.support.partition <= 1e-8);
        assert!(s.warnings.is_empty());
        assert!(operator_sum_residual(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &basis).unwrap() <= 1e-6);
    }

    #[test]
    fn jensen_at_two() {
        let basis = NyquistBasis::desk(1.0, 32.0, 8).unwrap();
        let r = jensen_certificate(&SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0), &basis, 2.0).unwrap();
        assert!(r.pass, "{r:?}");
        let zero = jensen_certificate(&SymbolSpec::constant(C64::new(0.0, 0.0)), &basis, 2.0).unwrap();
        assert!(zero.entries.iter().all(|e| e.part_norm == 0.0 && e.pass));
    }

    #[test]
    fn constants_do_not_depend_on_band() {
        let base = L1Norms::for_band(Band::new(1.0).unwrap());
        for a in [0.5, 2.0, 4.0] {
            let n = L1Norms::for_band(Band::new(a).unwrap());
            assert!((n.total() - base.total()).abs() <= 1e-6, "a = {a}");
        }
    }

    #[test]
    fn central_recovery_matches_split() {
        let basis = NyquistBasis::desk(1.0, 64.0, 8).unwrap();
        let phi = SymbolSpec::gaussian(1.0, 1.0, 0.0, 0.0);
        let s = split_symbol(&phi, basis.band(), basis.grid()).unwrap();
        let op = s.operator(Part::Central, basis.grid()).unwrap();
        let interp = Interpolant::new(&s.central);
        let scale = s.central.sup_norm();
        for x in [0.0, 0.37, -1.5, 3.0] {
            let r = central_recover(|f| op.apply_fn(f), basis.band(), basis.grid(), x).unwrap();
            assert!((r - interp.eval(x)).norm() <= 1e-5 * scale, "x = {x}");
        }
        let zero = central_recover(
            |f| Ok(SampledFunction::zeros(*f.grid(), f.boundary())),
            basis.band(),
            basis.grid(),
            0.0,
        )
        .unwrap();
        assert_eq!(zero, C64::new(0.0, 0.0));
    }

    #[test]
    fn sinc_constant_plancherel() {
        let c = sinc_norm_constant(2.0).unwrap();
        assert!((c.product - 2f64.sqrt() * 0.5).abs() <= 1e-3);
        assert!((c.bound - 12.0 / std::f64::consts::PI).abs() <= 1e-12);
        for p in [1.1, 8.0] {
            assert!(sinc_norm_constant(p).unwrap().pass);
        }
        assert!(sinc_norm_constant(1.0).is_err());
    }

    #[test]
    fn polynomial_symbol_rejected() {
        let g = Grid::for_band(1.0, 32.0, 8).unwrap();
        let phi: SymbolSpec = SymbolForm::ModPoly { degree: 1, freq: 2.0, coeff: 1.0 }.into();
        assert!(split_symbol(&phi, Band::new(1.0).unwrap(), &g).is_err());
    }
}
