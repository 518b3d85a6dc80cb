mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xfwm::fiber::FiberSpec;
use xfwm::jointspectrum::*;
use xfwm::phasematch::{operating_point, NonlinearPhase, PumpSpec};
use xfwm::units::{nm_to_omega, omega_to_nm, NANOMETRE};

fn unit_grid(n: usize) -> SpectralGrid {
    SpectralGrid::centered(2.3e15, 1e13, n, 1.45e15, 1e13, n).unwrap()
}

fn amplitude(grid: &SpectralGrid, f: impl Fn(usize, usize) -> Complex64) -> JointSpectrum {
    let mut v = Vec::with_capacity(grid.len());
    for s in 0..grid.n_signal() {
        for i in 0..grid.n_idler() {
            v.push(f(s, i));
        }
    }
    JointSpectrum::amplitude(grid.clone(), v, Provenance::Model).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Two orthonormal vectors by Gram–Schmidt.
fn orthonormal_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut a = random_vec(rng, n);
    let na = norm(&a);
    a.iter_mut().for_each(|c| *c /= na);
    let mut b = random_vec(rng, n);
    let proj: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
    b.iter_mut().zip(&a).for_each(|(y, x)| *y -= proj * x);
    let nb = norm(&b);
    b.iter_mut().for_each(|c| *c /= nb);
    (a, b)
}

fn gram_oracle(js: &JointSpectrum) -> Vec<f64> {
    let g = js.grid();
    let f = js.amplitudes().unwrap();
    let n = g.n_signal();
    let (mut re, mut im) = (vec![0.0; n * n], vec![0.0; n * n]);
    for r in 0..n {
        for c in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..g.n_idler() {
                acc += f[g.index(r, i)] * f[g.index(c, i)].conj();
            }
            re[r * n + c] = acc.re;
            im[r * n + c] = acc.im;
        }
    }
    let ev = common::hermitian_eigenvalues(&re, &im, n);
    let total: f64 = ev.iter().sum();
    ev.iter().map(|e| e / total).collect()
}

#[test]
fn two_equal_modes_have_half_purity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let grid = unit_grid(16);
        let (a1, a2) = orthonormal_pair(&mut rng, 16);
        let (b1, b2) = orthonormal_pair(&mut rng, 16);
        let js = amplitude(&grid, |s, i| a1[s] * b1[i] + a2[s] * b2[i]);
        let r = schmidt_analyze(&js).unwrap();
        let oracle = gram_oracle(&js);
        let oracle_purity: f64 = oracle.iter().map(|l| l * l).sum();
        assert!((r.purity - 0.5).abs() < 1e-3);
        assert!((r.purity - oracle_purity).abs() < 1e-9);
        assert!((r.schmidt_number - 2.0).abs() < 1e-6);
        assert_eq!(r.mode_count, 2);
    }
}

#[test]
fn weights_match_gram_eigenvalues_for_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = unit_grid(16);
    for _ in 0..10 {
        let v = random_vec(&mut rng, grid.len());
        let js = JointSpectrum::amplitude(grid.clone(), v, Provenance::Model).unwrap();
        let r = schmidt_analyze(&js).unwrap();
        let oracle = gram_oracle(&js);
        for (a, b) in r.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }
}

#[test]
fn separable_gaussian_is_pure() {
    let grid = unit_grid(96);
    let (s0, i0) = (grid.signal_axis()[40], grid.idler_axis()[55]);
    let js = amplitude(&grid, |s, i| {
        let x = (grid.signal_axis()[s] - s0) / 3e12;
        let y = (grid.idler_axis()[i] - i0) / 5e12;
        Complex64::new((-x * x - y * y).exp(), 0.0)
    });
    let r = schmidt_analyze(&js).unwrap();
    assert!((r.purity - 1.0).abs() < 1e-6);
    assert!((r.schmidt_number - 1.0).abs() < 1e-6);
}

#[test]
fn fwhm_conversion_algebra() {
    let lam = 1000.0 * NANOMETRE;
    let from_fwhm = bandwidth_convert(2.5, BandwidthKind::FwhmIntensity, lam).unwrap();
    let sigma_nm = bandwidth_to_nm(from_fwhm, BandwidthKind::SigmaField, lam).unwrap();
    let want = 2.5 / (2.0 * (2.0 * 2f64.ln()).sqrt());
    assert!((sigma_nm - want).abs() < 1e-12);
    assert!((sigma_nm - 1.06).abs() < 0.005);
}

#[test]
fn pump_ridge_follows_energy_conservation() {
    let pump = PumpSpec::reference()
        .with_sigma(bandwidth_convert(2.5, BandwidthKind::FwhmIntensity, 1e-6).unwrap())
        .unwrap();
    let grid = SpectralGrid::from_wavelength_ranges((800.0, 820.0), (1280.0, 1340.0), 64, 513).unwrap();
    let env = pump_envelope(&pump, &grid).unwrap();
    let amps = env.amplitudes().unwrap();
    // row closest to 810 nm
    let s = (0..grid.n_signal())
        .min_by(|&a, &b| {
            let d = |k: usize| (omega_to_nm(grid.signal_axis()[k]) - 810.0).abs();
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let best = (0..grid.n_idler()).max_by(|&a, &b| amps[grid.index(s, a)].re.total_cmp(&amps[grid.index(s, b)].re)).unwrap();
    let idler_peak = omega_to_nm(grid.idler_axis()[best]);
    let want = omega_to_nm(2.0 * pump.center_omega() - grid.signal_axis()[s]);
    let step = omega_to_nm(grid.idler_axis()[best]) - omega_to_nm(grid.idler_axis()[best + 1]);
    assert!((idler_peak - want).abs() <= step, "{idler_peak} vs {want}");
    // exactly conjugate to 810 nm: 1306.45 nm, within a few nm of the quoted 1310.6 nm
    let conj = omega_to_nm(2.0 * pump.center_omega() - nm_to_omega(810.0));
    assert!((conj - 1306.45).abs() < 0.01 && (conj - 1310.6).abs() < 5.0);
}

#[test]
fn operating_point_jsa_is_normalized_and_single_lobed() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let grid = SpectralGrid::from_wavelength_ranges((790.0, 830.0), (1280.0, 1340.0), 256, 256).unwrap();
    let js = build_jsa(&f, &p, &grid, JsaOptions::default()).unwrap();
    assert!((js.norm_integral() - 1.0).abs() < 1e-9);
    let r = schmidt_analyze(&js).unwrap();
    let sum: f64 = r.weights.iter().sum();
    assert!((sum - 1.0).abs() < 1e-9);
    let recomputed: f64 = r.weights.iter().map(|l| l * l).sum();
    assert!((recomputed - r.purity).abs() < 1e-12);
    assert!((r.purity * r.schmidt_number - 1.0).abs() < 1e-12);
    assert!(r.weights[0] > 0.8, "dominant mode expected: {:?}", &r.weights[..3]);
}

#[test]
fn unit_envelope_reduces_to_phasematching_intensity() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let grid = SpectralGrid::from_wavelength_ranges((790.0, 830.0), (1280.0, 1340.0), 48, 48).unwrap();
    let js = build_jsa(&f, &p, &grid, JsaOptions { pump_envelope: false, ..JsaOptions::default() }).unwrap();
    let phi = xfwm::phasematch::phasematching_function(&f, &p, &grid, NonlinearPhase::Neglect, xfwm::Execution::Sequential).unwrap();
    let scale = js.intensities()[0] / phi[0].norm_sqr();
    for (a, b) in js.intensities().iter().zip(&phi) {
        assert!((a - scale * b.norm_sqr()).abs() < 1e-9 * a.max(1e-30) + 1e-300);
    }
}

#[test]
fn jsi_orientation_between_contour_and_pump_diagonal() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let grid = auto_grid(&f, &p, &GridPolicy::with_points(128), NonlinearPhase::Neglect).unwrap();
    let js = build_jsa(&f, &p, &grid, JsaOptions::default()).unwrap();
    let angle = js.principal_axis_angle().unwrap();
    assert!(angle > 82.0 && angle < 135.0, "{angle}");
}

#[test]
fn single_segment_matches_uniform_fiber() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let grid = SpectralGrid::from_wavelength_ranges((795.0, 830.0), (1280.0, 1340.0), 32, 32).unwrap();
    let a = build_jsa(&f, &p, &grid, JsaOptions::default()).unwrap();
    let b = build_jsa_segmented(&[f.clone()], &p, &grid, JsaOptions::default()).unwrap();
    for (x, y) in a.amplitudes().unwrap().iter().zip(b.amplitudes().unwrap()) {
        assert!((x - y).norm() < 1e-9 * x.norm().max(1e-12));
    }
}

#[test]
fn purity_falls_past_the_optimum_length() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let lengths: Vec<f64> = [1.0, 2.0, 3.0, 5.0, 7.0, 9.0, 12.0, 15.0, 20.0].iter().map(|cm| cm * 1e-2).collect();
    let sweep = purity_sweep(
        &f,
        &p,
        &lengths,
        &[2.0],
        BandwidthKind::SigmaField,
        &GridPolicy::with_points(64),
        JsaOptions::default(),
    )
    .unwrap();
    let row: Vec<f64> = (0..lengths.len()).map(|k| sweep.get(k, 0).unwrap()).collect();
    let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
    for w in row[argmax..].windows(2) {
        assert!(w[1] < w[0], "{row:?}");
    }
}

#[test]
fn sweep_is_identical_on_both_execution_paths() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let run = |execution| {
        purity_sweep(
            &f,
            &p,
            &[0.02, 0.09],
            &[2.0, 8.0],
            BandwidthKind::SigmaField,
            &GridPolicy::with_points(32),
            JsaOptions { execution, ..JsaOptions::default() },
        )
        .unwrap()
    };
    assert_eq!(run(xfwm::Execution::Sequential), run(xfwm::Execution::Parallel));
}

#[test]
fn operating_point_sits_on_grid_center() {
    let f = FiberSpec::pm980xp();
    let p = PumpSpec::reference();
    let pt = operating_point(&f, &p, NonlinearPhase::Neglect).unwrap();
    let g = auto_grid(&f, &p, &GridPolicy::with_points(65), NonlinearPhase::Neglect).unwrap();
    assert!((g.signal_axis()[32] - pt.signal_omega()).abs() < 1e-6 * pt.signal_omega());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rank_one_is_pure(seed in any::<u64>(), n in 64usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = unit_grid(n);
        let a = random_vec(&mut rng, n);
        let b = random_vec(&mut rng, n);
        let r = schmidt_analyze(&amplitude(&grid, |s, i| a[s] * b[i])).unwrap();
        prop_assert!((r.purity - 1.0).abs() < 1e-6);
    }

    #[test]
    fn schmidt_invariants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = unit_grid(16);
        let v = random_vec(&mut rng, grid.len());
        let r = schmidt_analyze(&JointSpectrum::amplitude(grid, v, Provenance::Model).unwrap()).unwrap();
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(r.purity > 0.0 && r.purity <= 1.0 + 1e-12);
        prop_assert!(r.weights.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((r.weights.iter().map(|l| l * l).sum::<f64>() - 1.0 / r.schmidt_number).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_round_trip(nm in 0.01f64..50.0, lam_nm in 500.0f64..1900.0, fwhm in any::<bool>()) {
        let kind = if fwhm { BandwidthKind::FwhmIntensity } else { BandwidthKind::SigmaField };
        let lam = lam_nm * NANOMETRE;
        let back = bandwidth_to_nm(bandwidth_convert(nm, kind, lam).unwrap(), kind, lam).unwrap();
        prop_assert!(((back - nm) / nm).abs() < 1e-12);
    }

    #[test]
    fn flat_phase_estimate_is_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = unit_grid(16);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let jsi = JointSpectrum::intensity(grid.clone(), v, Provenance::Measured).unwrap();
        let once = jsa_from_jsi(&jsi).unwrap();
        let again = jsa_from_jsi(&JointSpectrum::intensity(grid, once.intensities(), Provenance::Measured).unwrap()).unwrap();
        for (a, b) in once.amplitudes().unwrap().iter().zip(again.amplitudes().unwrap()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
