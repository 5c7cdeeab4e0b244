use std::f64::consts::TAU;

use ccp_core::signal::{generate_sinusoid, partition, SampleRecord, WindowPlan};
use ccp_core::spectral::{
    bartlett, ccp, cross_terms, dft_normalized, dft_windows, expected_circular_gap_response,
    expected_gap_attenuation, PhaseSchedule, Reduction, Spectrum,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

/// `count` windows of length `len`, each with arbitrary content.
fn window_set(len: usize, count: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, len), count)
}

fn random_spectra() -> impl Strategy<Value = Vec<Spectrum>> {
    (2usize..24, 2usize..12)
        .prop_flat_map(|(l, m)| window_set(l, m))
        .prop_map(|w| dft_windows(&w).unwrap())
}

proptest! {
    #[test]
    fn parseval(x in samples(2..96)) {
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spec = dft_normalized(&x).unwrap();
        let spectral: f64 = spec.values().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((energy - spectral).abs() <= 1e-12 * energy.max(1e-300));
    }

    #[test]
    fn hermitian_symmetry(x in samples(2..96)) {
        let spec = dft_normalized(&x).unwrap();
        let v = spec.values();
        let scale = v.iter().map(|c| c.norm()).fold(1e-300, f64::max);
        let l = v.len();
        for f in 1..l {
            prop_assert!((v[f] - v[l - f].conj()).norm() <= 1e-12 * scale);
        }
        prop_assert!(v[0].im.abs() <= 1e-12 * scale);
    }

    #[test]
    fn noiseless_periodic_is_exact(base in samples(2..48), m in 2usize..16) {
        let l = base.len();
        let record: Vec<f64> = base.iter().copied().cycle().take(l * m).collect();
        let record = SampleRecord::new(record, None).unwrap();
        let spectra = dft_windows(&partition(&record, &WindowPlan::new(l, m).unwrap()).unwrap()).unwrap();
        let truth = dft_normalized(&base).unwrap();
        let real = ccp(&spectra, &Reduction::Real).unwrap().power;
        let bart = bartlett(&spectra).unwrap().power;
        for f in 0..l {
            let want = truth.values()[f].norm_sqr();
            let tol = 1e-10 * want + 1e-300;
            prop_assert!((real[f] - want).abs() <= tol, "ccp bin {}: {} vs {}", f, real[f], want);
            prop_assert!((bart[f] - want).abs() <= tol, "bartlett bin {}: {} vs {}", f, bart[f], want);
        }
    }

    #[test]
    fn aligned_sinusoid_is_exact(l in 8usize..80, bin_frac in 0.01..0.49f64, m in 2usize..12, amp in 0.1..10.0f64, phase in 0.0..TAU) {
        let f0 = ((bin_frac * l as f64) as usize).max(1);
        prop_assume!(2 * f0 < l);
        let rec = generate_sinusoid(f0 as f64, l as f64, amp, l * m, phase).unwrap();
        let spectra = dft_windows(&partition(&rec, &WindowPlan::new(l, m).unwrap()).unwrap()).unwrap();
        let power = spectra[0].values()[f0].norm_sqr();
        prop_assert!((power - amp * amp * l as f64 / 4.0).abs() <= 1e-9 * power);
        let real = ccp(&spectra, &Reduction::Real).unwrap().power;
        let bart = bartlett(&spectra).unwrap().power;
        prop_assert!((real[f0] - power).abs() <= 1e-10 * power);
        prop_assert!((bart[f0] - power).abs() <= 1e-10 * power);
    }

    #[test]
    fn abs_is_magnitude_of_real(spectra in random_spectra()) {
        let real = ccp(&spectra, &Reduction::Real).unwrap().power;
        let abs = ccp(&spectra, &Reduction::Abs).unwrap().power;
        let modulus = ccp(&spectra, &Reduction::ModulusOfMean).unwrap().power;
        for f in 0..real.len() {
            prop_assert_eq!(abs[f], real[f].abs());
            prop_assert!(real[f] <= modulus[f] * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn gapped_sinusoid_pair_law(
        l in 8usize..64,
        bin_frac in 0.01..0.49f64,
        gap in 0usize..200,
        m in 2usize..12,
        amp in 0.5..4.0f64,
    ) {
        let f0 = ((bin_frac * l as f64) as usize).max(1);
        prop_assume!(2 * f0 < l);
        let plan = WindowPlan::with_gap(l, m, gap).unwrap();
        let rec = generate_sinusoid(f0 as f64, l as f64, amp, plan.required_samples(), 0.4).unwrap();
        let spectra = dft_windows(&partition(&rec, &plan).unwrap()).unwrap();
        let power = spectra[0].values()[f0].norm_sqr();
        let pairs = cross_terms(&spectra, f0).unwrap();
        let adjacent = expected_gap_attenuation(f0, gap, l) * power;
        for c in &pairs[..m - 1] {
            prop_assert!((c.re - adjacent).abs() <= 1e-8 * power);
        }
        let real = ccp(&spectra, &Reduction::Real).unwrap().power[f0];
        let circular = expected_circular_gap_response(f0, gap, l, m) * power;
        prop_assert!((real - circular).abs() <= 1e-8 * power);
    }

    #[test]
    fn gap_schedule_realigns_adjacent_pairs(
        l in 8usize..64,
        bin_frac in 0.01..0.49f64,
        gap in 1usize..200,
    ) {
        let f0 = ((bin_frac * l as f64) as usize).max(1);
        prop_assume!(2 * f0 < l);
        // The forward pair only; the wrap pair steps the other way.
        let plan = WindowPlan::with_gap(l, 2, gap).unwrap();
        let rec = generate_sinusoid(f0 as f64, l as f64, 1.0, plan.required_samples(), 0.0).unwrap();
        let spectra = dft_windows(&partition(&rec, &plan).unwrap()).unwrap();
        let power = spectra[0].values()[f0].norm_sqr();
        let theta = PhaseSchedule::Gap(gap).angle(f0, l);
        let forward = cross_terms(&spectra, f0).unwrap()[0] * Complex64::from_polar(1.0, theta);
        prop_assert!((forward.re - power).abs() <= 1e-8 * power);
        prop_assert!(forward.im.abs() <= 1e-8 * power);
    }

    #[test]
    fn phase_correction_inverts_rotation(
        base in random_spectra(),
        k in 0usize..16,
    ) {
        let m = base.len();
        let theta = TAU * (k % m) as f64 / m as f64;
        // Each window advances by e^{iθ}, so every cross-term, including the
        // wrap pair, is turned by e^{−iθ}.
        let rotated: Vec<Spectrum> = base
            .iter()
            .enumerate()
            .map(|(i, s)| s.rotated(Complex64::from_polar(1.0, theta * i as f64)))
            .collect();
        let fixed = ccp(&rotated, &Reduction::PhaseCorrected(PhaseSchedule::Constant(theta))).unwrap().power;
        let want = ccp(&base, &Reduction::Real).unwrap().power;
        let scale = want.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        for f in 0..want.len() {
            prop_assert!((fixed[f] - want[f]).abs() <= 1e-10 * scale.max(1.0));
        }
    }
}
