use proptest::prelude::*;

use pwlab::cli::format_f64;
use pwlab::commutator::{build_frame, k_projector, omega_window};
use pwlab::factorize::weak_factorize;
use pwlab::grid::inner;
use pwlab::pwspace::{project_band, sinc_kernel};
use pwlab::toeplitz::{norm::spectral_norm, random_samples, toeplitz_matrix, NyquistBasis, SymbolSpec};
use pwlab::{Band, BandlimitedFunction, Boundary};

fn basis() -> NyquistBasis {
    NyquistBasis::desk(1.0, 32.0, 8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn float_text_round_trips(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_f64(v).parse().unwrap();
        prop_assert_eq!(back.to_bits() & !(1u64 << 63), v.to_bits() & !(1u64 << 63));
    }

    #[test]
    fn omega_is_unimodular(x in -1e4f64..1e4, period in 8.0f64..512.0) {
        prop_assert!((omega_window(x, period).norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn band_projection_is_an_orthogonal_projection(seed in any::<u64>(), a in 0.3f64..1.5) {
        let b = basis();
        let band = Band::new(a).unwrap();
        let f = random_samples(b.grid(), Boundary::Periodic, seed);
        let p = project_band(&f, band).unwrap();
        let pp = project_band(p.function(), band).unwrap();
        let scale = f.sup_norm().max(1.0);
        prop_assert!(pp.function().sub(p.function()).unwrap().sup_norm() <= 1e-10 * scale);
        let nf = inner(&f, &f).unwrap().re;
        let np = inner(p.function(), p.function()).unwrap().re;
        prop_assert!(np <= nf * (1.0 + 1e-12));
        let r = f.sub(p.function()).unwrap();
        prop_assert!(inner(&r, p.function()).unwrap().norm() <= 1e-9 * nf.max(1e-300));
    }

    #[test]
    fn k_projection_is_idempotent(seed in any::<u64>()) {
        let b = basis();
        let frame = build_frame(&b, 2.0).unwrap();
        let g = project_band(&random_samples(b.grid(), Boundary::Antiperiodic, seed), b.band()).unwrap();
        let once = k_projector(&g, &frame).unwrap();
        let twice = k_projector(&once, &frame).unwrap();
        prop_assert!(once.function().sub(twice.function()).unwrap().sup_norm() <= 1e-10 * g.function().sup_norm().max(1e-300));
    }

    #[test]
    fn conjugate_symbol_gives_adjoint(
        amp in -2.0f64..2.0,
        scale in 0.5f64..3.0,
        center in -4.0f64..4.0,
        freq in -1.5f64..1.5,
    ) {
        let b = basis();
        let t = toeplitz_matrix(&SymbolSpec::gaussian(amp, scale, center, freq), &b, 2.0).unwrap();
        let s = toeplitz_matrix(&SymbolSpec::gaussian(amp, scale, center, -freq), &b, 2.0).unwrap();
        let diff = spectral_norm(&(&s.entries - t.entries.adjoint()));
        prop_assert!(diff <= 1e-9 * spectral_norm(&t.entries).max(1e-300));
    }

    #[test]
    fn shifted_squares_factor_exactly(t0 in -6i32..6, k in 20u32..38) {
        let b = k as f64 / 40.0;
        let basis = NyquistBasis::desk(1.0, 40.0, 8).unwrap();
        let grid = basis.grid();
        let bb = Band::new(b).unwrap();
        let center = t0 as f64 * 0.5;
        let s = sinc_kernel(bb, center, grid).unwrap();
        let h = BandlimitedFunction::certify(s.mul(&s).unwrap(), Band::new(2.0 * b).unwrap()).unwrap();
        let f = weak_factorize(&h, basis.band(), 2.0).unwrap();
        prop_assert!(!f.flagged, "residual {} of {}", f.residual_sup, f.target_sup);
        prop_assert!(f.target_l1 <= f.nuclear_sum * (1.0 + 1e-12));
        let back = f.reconstruct().unwrap();
        prop_assert!(back.sub(h.function()).unwrap().sup_norm() <= 1e-6 * f.target_sup);
    }
}
