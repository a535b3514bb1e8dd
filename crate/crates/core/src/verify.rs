//! The self-check suite: every identity and bound the library certifies,
//! evaluated at a configurable desk scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commutator::{
    build_frame, commutator_test, defect_identity_residual, lambda_ops, series_reconstruct,
    series_residual,
};
use crate::error::{Error, Result};
use crate::factorize::{
    factorize_with_plan, fejer_plan, fejer_target, pair, weak_factorize, xpq_norm_estimate,
    xpq_test_set,
};
use crate::grid::{Boundary, Grid, Interpolant, C64};
use crate::nehari::{aak_solve, bounded_symbol, default_truncation, moment_residual, nehari_solve, window_hankel};
use crate::pwspace::{
    band_projector_norm_estimate, eval_functional, modulate, project_band, riesz_constant_estimate,
    sinc_kernel, sinc_lp_norm, Band, BandlimitedFunction,
};
use crate::split::{
    central_recover, jensen_certificate, operator_sum_residual, sinc_norm_constant, split_symbol,
    L1Norms, Part,
};
use crate::toeplitz::{
    matrix_pnorm, norm::spectral_norm, projector_decomposition_residual, random_half_band,
    toeplitz_matrix, toeplitz_matrix_of, DenseMatrix, NyquistBasis, OperatorMatrix, SymbolForm,
    SymbolSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub band: f64,
    pub p: f64,
    pub period: f64,
    pub oversample: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            band: 1.0,
            p: 2.0,
            period: 128.0,
            oversample: 8,
            seed: 2024,
        }
    }
}

impl VerifyConfig {
    fn basis(&self) -> Result<NyquistBasis> {
        NyquistBasis::desk(self.band, self.period, self.oversample)
    }

    fn a(&self) -> Result<Band> {
        Band::new(self.band)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Measurement {
    fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Measurement {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
        }
    }

    fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Measurement {
            name: name.into(),
            measured,
            bound,
            pass: measured >= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u8,
    pub name: String,
    pub identity: String,
    pub pass: bool,
    pub measurements: Vec<Measurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

type CheckFn = fn(&VerifyConfig) -> Result<Vec<Measurement>>;

/// `(id, name, identity, runner)` for every check, in report order.
pub const CHECKS: [(u8, &str, &str, CheckFn); 14] = [
    (1, "reproducing_identity", "P_a f = f for f in PW_a; sinc-kernel evaluation", check_reproducing),
    (2, "zero_symbol", "T_phi = 0 for phi = x exp(4 pi i a x)", check_zero_symbol),
    (3, "vanishing_spectrum", "T_phi = 0 when phi-hat misses [-2a, 2a]", check_vanishing_spectrum),
    (4, "projector_decomposition", "P_a = conj(theta_a) P_+ theta_a - theta_a P_+ conj(theta_a); ||P_a|| <= 2 A_p", check_projector),
    (5, "splitting", "T_phi = T_L + T_C + T_R with ||T_X|| <= ||psi_X-check||_1 ||T_phi||", check_splitting),
    (6, "central_recovery", "phi_C(x) = T_C[sinc_eps(. - x)](x) / (2 eps)", check_central_recovery),
    (7, "sinc_constant", "||sinc_1||_q ||sinc_1/8||_p <= (4/pi)(p + 1/(p-1))", check_sinc_constant),
    (8, "symbol_norm_sandwich", "||phi||_inf / 3 <= ||T_phi||_2 <= ||phi||_inf", check_sandwich),
    (9, "nehari_aak", "H_psi = H_b with ||psi||_inf <= ||H_b||", check_nehari),
    (10, "bounded_symbol", "T_phi = T_psi, psi = conj(theta_a)^2 psi_l + phi_C + theta_a^2 psi_r", check_bounded_symbol),
    (11, "commutator", "<T f, g> = <T omega f, omega g>; I - LambdaBar Lambda = alpha k (x) k", check_commutator),
    (12, "series_reconstruction", "T = sum LambdaBar^n (T - LambdaBar T Lambda) Lambda^n", check_series),
    (13, "weak_factorization", "h = sum f_k conj(g_k); pairing independent of representation", check_factorization),
    (14, "dual_norm_sandwich", "||h||_1 <= ||h||_X <= nuclear sum", check_dual_norm),
];

fn run_one(cfg: &VerifyConfig, (id, name, identity, run): (u8, &str, &str, CheckFn)) -> CheckResult {
    match run(cfg) {
        Ok(measurements) => CheckResult {
            id,
            name: name.into(),
            identity: identity.into(),
            pass: measurements.iter().all(|m| m.pass),
            measurements,
            error: None,
        },
        Err(e) => CheckResult {
            id,
            name: name.into(),
            identity: identity.into(),
            pass: false,
            measurements: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs the selected checks (all when `only` is empty) in parallel; the
/// report keeps the fixed order.
pub fn run_checks(cfg: &VerifyConfig, only: &[u8]) -> VerifyReport {
    let checks: Vec<CheckResult> = CHECKS
        .par_iter()
        .filter(|c| only.is_empty() || only.contains(&c.0))
        .map(|&c| run_one(cfg, c))
        .collect();
    VerifyReport {
        config: *cfg,
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

pub fn run_check(cfg: &VerifyConfig, id: u8) -> Result<CheckResult> {
    CHECKS
        .iter()
        .find(|c| c.0 == id)
        .map(|&c| run_one(cfg, c))
        .ok_or_else(|| Error::Domain(format!("no check with id {id}")))
}

fn seeded_gaussians(seed: u64, count: usize, a: f64) -> Vec<SymbolSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            SymbolSpec::gaussian(
                rng.gen_range(0.5..1.5),
                rng.gen_range(0.7..1.5) / a,
                rng.gen_range(-1.0..1.0) / a,
                rng.gen_range(-0.5..0.5) * a,
            )
        })
        .collect()
}

fn check_reproducing(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let a = cfg.a()?;
    let grid = *cfg.basis()?.grid();
    let f = sinc_kernel(Band::new(a.value() / 2.0)?, 0.0, &grid)?;
    let pf = project_band(&f, a)?;
    let fixed = pf.function().sub(&f)?.sup_norm() / f.sup_norm();
    let cert = BandlimitedFunction::certify(f.clone(), a)?;
    let spectral = Interpolant::new(&f);
    let scale = f.sup_norm();
    let cross = [-7.3, -1.1, 0.0, 0.37, 2.9, 15.05]
        .into_iter()
        .map(|x| (eval_functional(&cert, C64::new(x, 0.0)) - spectral.eval(x)).norm() / scale)
        .fold(0.0, f64::max);
    Ok(vec![
        Measurement::at_most("projection_fixes_band_function", fixed, 1e-10),
        Measurement::at_most("kernel_quadrature_vs_spectral", cross, 1e-4),
    ])
}

fn check_zero_symbol(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let phi: SymbolSpec = SymbolForm::ModPoly {
        degree: 1,
        freq: 2.0 * cfg.band,
        coeff: 1.0,
    }
    .into();
    let m = toeplitz_matrix(&phi, &basis, 2.0)?;
    Ok(vec![Measurement::at_most("matrix_norm", spectral_norm(&m.entries), 1e-8)])
}

fn check_vanishing_spectrum(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let a = cfg.band;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x03);
    let mut out = Vec::new();
    for k in 0..3 {
        let radius = rng.gen_range(0.2..0.6) * a;
        let center = 2.0 * a + radius + rng.gen_range(0.05..1.0) * a;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let phi = SymbolSpec::bump_spectrum(sign * center, radius, 1.0, k == 2);
        let m = toeplitz_matrix(&phi, &basis, 2.0)?;
        let sup = phi.sample(&basis.grid().refine(8))?.sup_norm();
        out.push(Measurement::at_least(format!("symbol_{k}_sup"), sup, 1e-2));
        out.push(Measurement::at_most(format!("symbol_{k}"), spectral_norm(&m.entries), 1e-8));
    }
    Ok(out)
}

fn check_projector(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let a = cfg.a()?;
    let grid = *cfg.basis()?.grid();
    let worst = (0..10)
        .map(|s| {
            let f = random_half_band(&grid, Boundary::Antiperiodic, cfg.seed + s);
            projector_decomposition_residual(&f, a)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut out = vec![Measurement::at_most("decomposition_residual", worst, 1e-10)];
    let small = Grid::for_band(cfg.band, 16.0 / cfg.band.min(1.0), 8)?;
    for p in [1.5, 2.0, 3.0] {
        let pa = band_projector_norm_estimate(a, p, &small)?;
        let ap = riesz_constant_estimate(p, &small)?;
        out.push(Measurement::at_most(format!("projector_norm_p{p}"), pa, 2.0 * ap + 1e-3));
    }
    Ok(out)
}

fn check_splitting(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let mut out = Vec::new();
    for (k, phi) in seeded_gaussians(cfg.seed ^ 0x05, 5, cfg.band).iter().enumerate() {
        out.push(Measurement::at_most(
            format!("operator_sum_{k}"),
            operator_sum_residual(phi, &basis)?,
            1e-6,
        ));
    }
    let jensen = jensen_certificate(&SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.0, 0.0), &basis, cfg.p)?;
    for e in &jensen.entries {
        let m = Measurement::at_most(format!("jensen_{:?}", e.part).to_lowercase(), e.part_norm, e.bound);
        out.push(Measurement {
            pass: m.pass || !jensen.enforced,
            ..m
        });
    }
    let base = L1Norms::for_band(Band::new(1.0)?).total();
    let spread = [0.5, 2.0, 4.0]
        .into_iter()
        .map(|a| Ok((L1Norms::for_band(Band::new(a)?).total() - base).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(Measurement::at_most("constant_band_spread", spread, 1e-6));
    Ok(out)
}

fn check_central_recovery(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let a = basis.band();
    let phi = SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.0, 0.0);
    let split = split_symbol(&phi, a, basis.grid())?;
    let op = split.operator(Part::Central, basis.grid())?;
    let interp = Interpolant::new(&split.central);
    let scale = split.central.sup_norm();
    let xs: Vec<f64> = (0..41).map(|k| -8.0 + 0.4 * k as f64).collect();
    let err = xs
        .par_iter()
        .map(|&x| {
            let r = central_recover(|f| op.apply_fn(f), a, basis.grid(), x)?;
            Ok((r - interp.eval(x)).norm())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let p = cfg.p;
    let q = p / (p - 1.0);
    let t_c = matrix_pnorm(&toeplitz_matrix_of(&op, &basis, p)?, p)?.lower;
    let bound = 4.0 * sinc_lp_norm(cfg.band, q)? * sinc_lp_norm(cfg.band / 8.0, p)? * t_c * 1.05;
    Ok(vec![
        Measurement::at_most("recovery_error_relative", err / scale, 1e-5),
        Measurement::at_most("central_sup_bound", scale, bound),
    ])
}

fn check_sinc_constant(_: &VerifyConfig) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for p in [1.1, 1.5, 2.0, 3.0, 8.0] {
        let c = sinc_norm_constant(p)?;
        out.push(Measurement::at_most(format!("product_p{p}"), c.product, c.bound));
    }
    let c = sinc_norm_constant(2.0)?;
    out.push(Measurement::at_most(
        "plancherel_value_p2",
        (c.product - 0.5 * 2f64.sqrt()).abs(),
        1e-3,
    ));
    Ok(out)
}

fn check_sandwich(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let a = cfg.band;
    let symbols = [
        SymbolSpec::bump_spectrum(0.0, 1.5 * a, 1.0, false),
        SymbolSpec::bump_spectrum(0.8 * a, 0.9 * a, 1.0, true),
        SymbolSpec::bump_spectrum(1.4 * a, 0.5 * a, 1.0, true),
    ];
    let mut out = Vec::new();
    for (k, phi) in symbols.iter().enumerate() {
        let m = toeplitz_matrix(phi, &basis, 2.0)?;
        let t = spectral_norm(&m.entries);
        let sup = phi.sample(&basis.grid().refine(4))?.sup_norm();
        out.push(Measurement::at_least(format!("lower_{k}"), t, sup / 3.0 * 0.95));
        out.push(Measurement::at_most(format!("upper_{k}"), t, sup * 1.001));
    }
    Ok(out)
}

fn check_nehari(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let a = basis.band();
    let split = split_symbol(&SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.0, 0.0), a, basis.grid())?;
    let b = modulate(&split.right, -2.0 * cfg.band)?;
    let data = window_hankel(&b, default_truncation(a, basis.grid().period()))?;
    let aak = aak_solve(&data)?;
    let moment = moment_residual(&aak, &data, 1 << 16);
    let sol = nehari_solve(&b, a)?;
    let s0 = sol.sigma0;
    Ok(vec![
        Measurement::at_most("moment_residual_relative", moment / s0, 1e-6),
        Measurement::at_most("sup_over_sigma0", sol.sup_norm / s0, 1.05),
        Measurement::at_most(
            "sigma0_vs_line_norm",
            (s0 - sol.hankel_norm_line).abs() / s0,
            0.05,
        ),
    ])
}

fn check_bounded_symbol(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let symbols = seeded_gaussians(cfg.seed ^ 0x0a, 3, cfg.band);
    let jobs: Vec<(usize, f64)> = (0..3).flat_map(|k| [1.5, 2.0, 3.0].map(|p| (k, p))).collect();
    let results = jobs
        .par_iter()
        .map(|&(k, p)| {
            let r = bounded_symbol(&symbols[k], &basis, p)?;
            let t = r.operator_norm.lower;
            Ok(vec![
                Measurement::at_most(format!("residual_{k}_p{p}"), r.operator_residual, 1e-3 * t),
                Measurement::at_most(format!("ratio_{k}_p{p}"), r.c_meas, 20.0),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().flatten().collect())
}

fn spoil(t: &OperatorMatrix, i: usize, j: usize, weight: f64) -> OperatorMatrix {
    let mut e = t.entries.clone();
    e[(i, j)] += C64::new(weight, 0.0);
    t.with_entries(e)
}

/// Rank-one perturbations `e_i (x) e_j` (`i != j`) and
/// `(e_0 + e_1) (x) (e_0 + e_1) / 2` of `t` around the window center.
pub fn spoilers(t: &OperatorMatrix) -> Vec<(String, OperatorMatrix)> {
    let c = t.basis.len() / 2;
    let n = t.basis.len();
    let at = |k: i64| (c as i64 + k).rem_euclid(n as i64) as usize;
    let mut sym = DenseMatrix::zeros(n, n);
    for r in [at(0), at(1)] {
        for s in [at(0), at(1)] {
            sym[(r, s)] = C64::new(0.5, 0.0);
        }
    }
    vec![
        ("e0_e1".into(), spoil(t, at(0), at(1), 1.0)),
        ("e0_e5".into(), spoil(t, at(0), at(5), 1.0)),
        ("e3_em7".into(), spoil(t, at(3), at(-7), 1.0)),
        ("sum01_sum01".into(), t.with_entries(&t.entries + sym)),
    ]
}

fn check_commutator(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let frame = build_frame(&basis, 2.0)?;
    let ops = lambda_ops(&frame)?;
    let t = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.0, 0.0), &basis, 2.0)?;
    let mut out = vec![Measurement::at_most(
        "toeplitz_deviation",
        commutator_test(&t, &frame)?.deviation,
        1e-6,
    )];
    for (name, s) in spoilers(&t) {
        out.push(Measurement::at_least(
            format!("spoiled_{name}"),
            commutator_test(&s, &frame)?.deviation,
            1e-3,
        ));
    }
    out.push(Measurement::at_most("defect_identity", defect_identity_residual(&frame, &ops), 1e-6));
    Ok(out)
}

fn check_series(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = cfg.basis()?;
    let frame = build_frame(&basis, 2.0)?;
    let ops = lambda_ops(&frame)?;
    let targets = [
        ("identity", OperatorMatrix::identity(basis, 2.0)),
        (
            "gaussian",
            toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.0, 0.0), &basis, 2.0)?,
        ),
    ];
    let mut out = Vec::new();
    for (name, t) in targets {
        let r8 = series_residual(&t, &series_reconstruct(&t, 8, &ops));
        let r64 = series_residual(&t, &series_reconstruct(&t, 64, &ops));
        out.push(Measurement::at_most(format!("{name}_n64"), r64, 0.05));
        out.push(Measurement::at_most(format!("{name}_n64_vs_n8"), r64, r8));
    }
    Ok(out)
}

/// Window period for factorization checks: at least the desk period, with
/// `0.9 a P` integral so that `sinc_{0.9a}` lives on the window lattice.
fn factorization_grid(cfg: &VerifyConfig) -> Result<NyquistBasis> {
    let unit = 10.0 / cfg.band;
    let period = (cfg.period / unit).ceil() * unit;
    NyquistBasis::desk(cfg.band, period, cfg.oversample)
}

fn check_factorization(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = factorization_grid(cfg)?;
    let a = basis.band();
    let h = fejer_target(Band::new(0.9 * cfg.band)?, basis.grid())?;
    let f1 = weak_factorize(&h, a, cfg.p)?;
    let step = basis.grid().step();
    let plan = fejer_plan(&h, a, f1_spacing(&f1) / 2.0, step)?;
    let f2 = factorize_with_plan(&h, a, cfg.p, &plan)?;
    let t = toeplitz_matrix(&SymbolSpec::gaussian(1.0, 1.0 / cfg.band, 0.3 / cfg.band, 0.2 * cfg.band), &basis, 2.0)?;
    let scale = spectral_norm(&t.entries) * f1.nuclear_sum;
    let gap = (pair(&t, &f1)? - pair(&t, &f2)?).norm() / scale;
    Ok(vec![
        Measurement::at_most("sup_residual_relative", f1.residual_sup / f1.target_sup, 1e-6),
        Measurement::at_most("l1_residual_relative", f1.residual_l1 / f1.target_l1, 1e-5),
        Measurement::at_most("nuclear_sum", f1.nuclear_sum, f64::MAX),
        Measurement::at_most("pairing_representation_gap", gap, 1e-6),
    ])
}

fn f1_spacing(f: &crate::factorize::Factorization) -> f64 {
    match f.pairs.as_slice() {
        [x, y, ..] => y.center - x.center,
        _ => f.grid.period(),
    }
}

fn check_dual_norm(cfg: &VerifyConfig) -> Result<Vec<Measurement>> {
    let basis = factorization_grid(cfg)?;
    let a = basis.band();
    let grid = *basis.grid();
    let h0 = fejer_target(Band::new(0.9 * cfg.band)?, &grid)?;
    let s = sinc_kernel(Band::new(0.9 * cfg.band)?, 0.0, &grid)?;
    let s1 = sinc_kernel(Band::new(0.9 * cfg.band)?, 1.5 / cfg.band, &grid)?;
    let h1 = BandlimitedFunction::certify(s.mul(&s1)?, Band::new(1.8 * cfg.band)?)?;
    let probes = xpq_test_set(&basis, cfg.p, cfg.seed ^ 0x0e, 3)?;
    let mut out = Vec::new();
    for (name, h) in [("sinc_squared", h0), ("shifted_product", h1)] {
        let e = xpq_norm_estimate(&h, a, cfg.p, &probes)?;
        out.push(Measurement::at_most(format!("{name}_l1_vs_nuclear"), e.l1_norm, e.nuclear_sum));
        out.push(Measurement::at_most(format!("{name}_estimate_vs_nuclear"), e.estimate, e.nuclear_sum));
    }
    Ok(out)
}
