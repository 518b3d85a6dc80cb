use proptest::prelude::*;
use xfwm::fiber::FiberSpec;
use xfwm::jointspectrum::{bandwidth_convert, envelope_value, BandwidthKind};
use xfwm::phasematch::{phase_mismatch, phasematching_value, NonlinearPhase, PumpSpec};
use xfwm::setdata::*;
use xfwm::units::nm_to_omega;

fn pump(sigma_nm: f64) -> PumpSpec {
    let s = bandwidth_convert(sigma_nm, BandwidthKind::SigmaField, 1e-6).unwrap();
    PumpSpec::reference().with_sigma(s).unwrap()
}

fn piece(length: f64, ddn: f64) -> FiberSpec {
    let f = FiberSpec::pm980xp();
    let dn = f.birefringence_dn();
    f.with_length(length).unwrap().with_birefringence(dn + ddn).unwrap()
}

fn coarse(drift: f64) -> SetSimulation {
    SetSimulation {
        signal_nm: (790.0, 840.0),
        n_signal: 201,
        idler_nm: (1285.0, 1325.0),
        n_rows: 81,
        drift_nm: drift,
        nonlinear: NonlinearPhase::Neglect,
    }
}

// long pieces have ridges narrower than the coarse scan step
fn fine() -> SetSimulation {
    SetSimulation {
        signal_nm: (800.0, 828.0),
        n_signal: 561,
        idler_nm: (1285.0, 1325.0),
        n_rows: 401,
        drift_nm: 0.0,
        nonlinear: NonlinearPhase::Neglect,
    }
}

fn measure(segments: &[FiberSpec], sim: &SetSimulation, id: &str) -> NmJsi {
    calibrate_scan(&simulate_set_scan(segments, &pump(2.0), sim, id).unwrap()).unwrap()
}

fn gaussian(label: &str, s0: f64, i0: f64, signal: Vec<f64>, idler: Vec<f64>) -> NmJsi {
    let mut v = Vec::with_capacity(signal.len() * idler.len());
    for &s in &signal {
        for &i in &idler {
            let (u, w) = ((s - s0) / 1.5, (i - i0) / 3.0);
            v.push((-(u * u + w * w + 0.8 * u * w)).exp());
        }
    }
    NmJsi::new(label, signal, idler, v).unwrap()
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[test]
fn drifted_setpoints_recovered_by_calibration() {
    let f = [piece(0.15, 0.0)];
    let drifted = simulate_set_scan(&f, &pump(2.0), &coarse(0.3), "d").unwrap();
    let truth = axis(1285.0, 1325.0, 81);
    for (row, t) in drifted.rows().iter().zip(&truth) {
        assert!((row.seed_setpoint_nm - (t - 0.3)).abs() < 1e-9);
    }
    let jsi = calibrate_scan(&drifted).unwrap();
    for (a, b) in jsi.idler_nm.iter().zip(&truth) {
        assert!((a - b).abs() < 1e-9);
    }
    // forward model evaluated directly at the true coordinates
    let p = pump(2.0);
    let peak = jsi.peak();
    for (s, &ls) in jsi.signal_nm.iter().enumerate().step_by(7) {
        for (i, &li) in jsi.idler_nm.iter().enumerate().step_by(5) {
            let (ws, wi) = (nm_to_omega(ls), nm_to_omega(li));
            let d = phase_mismatch(&f[0], &p, ws, wi, NonlinearPhase::Neglect).unwrap();
            let a = envelope_value(ws, wi, p.center_omega(), p.sigma_p()) * 0.15 * phasematching_value(d, 0.15).norm();
            assert!((jsi.at(s, i) - a * a).abs() < 1e-9 * peak.max(1e-300));
        }
    }
}

#[test]
fn uncalibrated_axis_is_off_by_the_drift() {
    let f = [piece(0.15, 0.0)];
    let mut scan = simulate_set_scan(&f, &pump(2.0), &coarse(0.3), "d").unwrap();
    let rows: Vec<ScanRow> = scan
        .rows()
        .iter()
        .map(|r| ScanRow { seed_measured_nm: Some(r.seed_setpoint_nm), ..r.clone() })
        .collect();
    scan = SetScan::new(rows, scan.metadata().clone()).unwrap();
    let naive = calibrate_scan(&scan).unwrap();
    let good = measure(&f, &coarse(0.0), "g");
    let centroid = |j: &NmJsi| {
        let ni = j.idler_nm.len();
        let w: f64 = j.values.iter().sum();
        j.values.iter().enumerate().map(|(k, v)| v * j.idler_nm[k % ni]).sum::<f64>() / w
    };
    assert!((centroid(&good) - centroid(&naive) - 0.3).abs() < 1e-6);
}

#[test]
fn calibration_idempotent_on_simulated_scan() {
    let scan = simulate_set_scan(&[piece(0.15, 0.0)], &pump(2.0), &coarse(0.3), "x").unwrap();
    let once = calibrate_rows(&scan).unwrap();
    assert_eq!(calibrate_rows(&once).unwrap(), once);
    assert_eq!(calibrate_scan(&once).unwrap(), calibrate_scan(&scan).unwrap());
}

#[test]
fn shifted_grids_agree_after_meshing() {
    let a = gaussian("a", 810.0, 1310.0, axis(795.0, 825.0, 601), axis(1290.0, 1330.0, 801));
    let b = gaussian("b", 810.0, 1310.0, axis(795.013, 825.013, 601), axis(1290.021, 1330.021, 801));
    let (_, out) = to_common_mesh(&[a, b], (0.25, 0.5)).unwrap();
    let peak = out[0].peak();
    for (x, y) in out[0].values.iter().zip(&out[1].values) {
        assert!((x - y).abs() < 1e-3 * peak, "{x} {y}");
    }
}

#[test]
fn meshed_spectra_integrate_to_one() {
    let a = measure(&[piece(0.15, 0.0)], &coarse(0.0), "a");
    let b = measure(&[piece(0.15, 1e-6)], &coarse(0.0), "b");
    let (mesh, out) = to_common_mesh(&[a, b], (0.25, 0.5)).unwrap();
    let cell = (mesh.signal_nm[1] - mesh.signal_nm[0]) * (mesh.idler_nm[1] - mesh.idler_nm[0]);
    for j in &out {
        assert!((j.values.iter().sum::<f64>() * cell - 1.0).abs() < 1e-9);
    }
}

#[test]
fn halving_mesh_step_barely_moves_overlap() {
    let a = gaussian("a", 810.0, 1310.0, axis(795.0, 825.0, 121), axis(1290.0, 1330.0, 81));
    let b = gaussian("b", 811.0, 1311.5, axis(795.0, 825.0, 121), axis(1290.0, 1330.0, 81));
    let at = |res: (f64, f64)| {
        let (_, m) = to_common_mesh(&[a.clone(), b.clone()], res).unwrap();
        overlap(&m[0], &m[1]).unwrap()
    };
    let coarse = at((0.5, 1.0));
    let finer = at((0.25, 0.5));
    assert!((coarse - finer).abs() < 0.01, "{coarse} {finer}");
}

#[test]
fn identical_scans_overlap_to_one() {
    let a = measure(&[piece(0.15, 0.0)], &coarse(0.0), "a");
    let (_, m) = to_common_mesh(&[a.clone(), a], (0.25, 0.5)).unwrap();
    assert!((overlap(&m[0], &m[1]).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn overlap_falls_with_birefringence_spread() {
    // the acceptance suite checks the quoted band; here only monotonicity
    let base = measure(&[piece(0.15, 0.0)], &coarse(0.0), "0");
    let mut last = 1.0;
    for (k, ddn) in [0.5e-6, 1e-6, 2e-6].iter().enumerate() {
        let other = measure(&[piece(0.15, *ddn)], &coarse(0.0), &k.to_string());
        let (_, m) = to_common_mesh(&[base.clone(), other], (0.25, 0.5)).unwrap();
        let o = overlap(&m[0], &m[1]).unwrap();
        assert!(o < last, "{ddn}: {o}");
        last = o;
    }
}

#[test]
fn report_is_symmetric_with_unit_diagonal() {
    let spectra: Vec<NmJsi> = [0.0, 0.7e-6, -0.4e-6]
        .iter()
        .enumerate()
        .map(|(k, d)| measure(&[piece(0.15, *d)], &coarse(0.0), &format!("f{k}")))
        .collect();
    let (_, m) = to_common_mesh(&spectra, (0.25, 0.5)).unwrap();
    let r = overlap_report(&m).unwrap();
    assert!(r.phase_blind_upper_bound);
    for a in 0..3 {
        assert!((r.pairwise[a][a] - 1.0).abs() < 1e-9);
        for b in 0..3 {
            assert!((r.pairwise[a][b] - r.pairwise[b][a]).abs() < 1e-12);
        }
    }
}

#[test]
fn homogeneous_pieces_have_one_feature() {
    for length in [0.15, 0.45, 1.0] {
        let j = measure(&[piece(length, 0.0)], &fine(), "h");
        assert_eq!(count_features(&j, DEFAULT_FEATURE_FRACTION), 1, "{length} m");
    }
}

#[test]
fn two_segment_metre_has_several_features() {
    let j = measure(&[piece(0.5, 0.0), piece(0.5, 2e-6)], &fine(), "two");
    assert!(count_features(&j, DEFAULT_FEATURE_FRACTION) >= 2);
}

#[test]
fn report_separates_45cm_siblings() {
    let single = measure(&[piece(0.45, 0.0)], &fine(), "45a");
    let sibling = measure(&[piece(0.225, 0.0), piece(0.225, 5e-6)], &fine(), "45b");
    let (_, m) = to_common_mesh(&[single, sibling], (0.05, 0.1)).unwrap();
    let r = inhomogeneity_report(&m, DEFAULT_FEATURE_FRACTION, 0.85).unwrap();
    assert!(!r.entries[0].inhomogeneous, "{:?}", r.entries[0]);
    assert!(r.entries[1].inhomogeneous, "{:?}", r.entries[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_bounded_and_symmetric(
        a in proptest::collection::vec(0.0f64..1.0, 30),
        b in proptest::collection::vec(0.0f64..1.0, 30),
    ) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0);
        let s = axis(800.0, 805.0, 6);
        let i = axis(1300.0, 1304.0, 5);
        let ja = NmJsi::new("a", s.clone(), i.clone(), a).unwrap();
        let jb = NmJsi::new("b", s, i, b).unwrap();
        let ab = overlap(&ja, &jb).unwrap();
        let ba = overlap(&jb, &ja).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((overlap(&ja, &ja).unwrap() - 1.0).abs() < 1e-9);
    }
}
