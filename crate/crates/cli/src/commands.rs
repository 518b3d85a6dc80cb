use std::path::PathBuf;

use serde_json::json;
use xfwm::fiber::{birefringence_from_fringes, FiberSpec};
use xfwm::io::{self, StatsRow};
use xfwm::jointspectrum::{
    auto_grid, bandwidth_convert, build_jsa, purity_sweep, schmidt_analyze, BandwidthKind, GridPolicy, JsaOptions,
};
use xfwm::phasematch::{contour_angle, operating_point, solve_contour, NonlinearPhase, PumpSpec};
use xfwm::photonstats::{
    car, click_probabilities, g2_heralded, g2_marginal, jackknife, simulate_partitions, Arm, CountingRecord,
    PowerCalibration, SourceStatModel, REFERENCE_COINCIDENCE_RATE, REFERENCE_POWER,
};
use xfwm::setdata::{calibrate_scan, inhomogeneity_report, subtract_background, to_common_mesh, NmJsi};
use xfwm::units::{NANOMETRE, SPEED_OF_LIGHT};
use xfwm::Execution;

use crate::args::*;
use crate::error::CliError;
use crate::output::{slug, OutDir};
use crate::plot;

pub const PROFILE_DIR_VAR: &str = "XFWM_PROFILE_DIR";

type Res<T> = Result<T, CliError>;

fn load_fiber(a: &FiberArgs) -> Res<FiberSpec> {
    let dir = std::env::var_os(PROFILE_DIR_VAR).map(PathBuf::from);
    let mut f = io::load_fiber_profile(&a.fiber_profile, dir.as_deref())?.to_spec()?;
    if let Some(cm) = a.length_cm {
        f = f.with_length(cm * 1e-2)?;
    }
    if let Some(dn) = a.dn {
        f = f.with_birefringence(dn)?;
    }
    Ok(f)
}

fn kind(k: BandwidthKindArg) -> BandwidthKind {
    match k {
        BandwidthKindArg::Sigma => BandwidthKind::SigmaField,
        BandwidthKindArg::Fwhm => BandwidthKind::FwhmIntensity,
    }
}

fn pump(a: &PumpArgs) -> Res<PumpSpec> {
    let lambda = a.pump_nm * NANOMETRE;
    let sigma = bandwidth_convert(a.bandwidth, kind(a.bandwidth_kind), lambda)?;
    Ok(PumpSpec::reference()
        .with_center_wavelength(lambda)?
        .with_sigma(sigma)?
        .with_peak_power(a.peak_power_w)?)
}

fn span(v: &[f64]) -> String {
    match (v.first(), v.last()) {
        (Some(a), Some(b)) if v.len() > 1 => format!("{a:.2}..{b:.2}"),
        (Some(a), _) => format!("{a:.2}"),
        _ => "none".into(),
    }
}

pub fn contours(a: &ContoursArgs, out: &mut OutDir) -> Res<String> {
    let f = load_fiber(&a.fiber)?;
    let p = PumpSpec::reference().with_peak_power(a.peak_power_w)?;
    let pumps: Vec<f64> = a.pump_range.0.iter().map(|nm| nm * NANOMETRE).collect();
    if pumps.is_empty() {
        return Err(CliError::usage("--pump-range", "no pump wavelengths"));
    }
    let c = solve_contour(&f, &p, &pumps, NonlinearPhase::from(a.nonlinear), Execution::default())?;
    out.write("contours.csv", &io::contour_csv(&c))?;

    let far: Vec<_> = c.iter().filter_map(|c| c.far_detuned()).collect();
    let signal: Vec<(f64, f64)> = far.iter().map(|p| (p.pump_wavelength / NANOMETRE, p.signal_wavelength / NANOMETRE)).collect();
    let idler: Vec<(f64, f64)> = far.iter().map(|p| (p.pump_wavelength / NANOMETRE, p.idler_wavelength / NANOMETRE)).collect();
    let svg = plot::lines("Phase matching", "pump wavelength (nm)", "wavelength (nm)", &[("signal", signal.clone()), ("idler", idler.clone())]);
    out.write("contours.svg", &svg)?;
    let s: Vec<f64> = signal.iter().map(|p| p.1).collect();
    let i: Vec<f64> = idler.iter().map(|p| p.1).collect();
    Ok(format!(
        "contours={} matched={} signal_nm={} idler_nm={}",
        c.len(),
        far.len(),
        span(&s),
        span(&i)
    ))
}

pub fn jsa(a: &JsaArgs, out: &mut OutDir) -> Res<String> {
    let f = load_fiber(&a.fiber)?;
    let p = pump(&a.pump)?;
    let nl = NonlinearPhase::from(a.pump.nonlinear);
    let grid = auto_grid(&f, &p, &GridPolicy::with_points(a.grid), nl)?;
    let options = JsaOptions {
        nonlinear: nl,
        ..JsaOptions::default()
    };
    let js = build_jsa(&f, &p, &grid, options)?;
    let schmidt = schmidt_analyze(&js)?;
    let op = operating_point(&f, &p, nl)?;
    let angle = contour_angle(&f, &p, &op, nl)?;

    out.write("jsa.csv", &io::joint_spectrum_csv(&js))?;
    let extra = json!({
        "fiber_length_m": f.length(),
        "birefringence": f.birefringence_dn(),
        "pump_nm": a.pump.pump_nm,
        "bandwidth_nm": a.pump.bandwidth,
        "bandwidth_kind": format!("{:?}", a.pump.bandwidth_kind).to_lowercase(),
        "signal_nm": op.signal_wavelength / NANOMETRE,
        "idler_nm": op.idler_wavelength / NANOMETRE,
        "contour_angle_deg": angle,
        "purity": schmidt.purity,
        "schmidt_number": schmidt.schmidt_number,
        "mode_count": schmidt.mode_count,
        "schmidt_weights": &schmidt.weights[..schmidt.weights.len().min(16)],
    });
    out.write("jsa.json", &io::joint_spectrum_header(&js, "jsa.csv", extra))?;

    let thz = |w: &[f64]| -> Vec<f64> { w.iter().map(|w| w / (2.0 * std::f64::consts::PI) * 1e-12).collect() };
    let values: Vec<Option<f64>> = js.intensities().into_iter().map(Some).collect();
    let svg = plot::heatmap(
        "Joint spectral intensity",
        "signal frequency (THz)",
        "idler frequency (THz)",
        &thz(grid.signal_axis()),
        &thz(grid.idler_axis()),
        &values,
    );
    out.write("jsi.svg", &svg)?;
    Ok(format!(
        "purity={:.4} schmidt_number={:.4} signal_nm={:.2} idler_nm={:.2} angle_deg={:.2} grid={}x{}",
        schmidt.purity,
        schmidt.schmidt_number,
        op.signal_wavelength / NANOMETRE,
        op.idler_wavelength / NANOMETRE,
        angle,
        grid.n_signal(),
        grid.n_idler()
    ))
}

pub fn purity_sweep_cmd(a: &SweepArgs, out: &mut OutDir) -> Res<String> {
    if a.sweep_lengths.0.is_empty() {
        return Err(CliError::usage("--sweep-lengths", "axis is empty"));
    }
    if a.sweep_bandwidths.0.is_empty() {
        return Err(CliError::usage("--sweep-bandwidths", "axis is empty"));
    }
    let f = load_fiber(&a.fiber)?;
    let p = PumpSpec::reference().with_center_wavelength(a.pump_nm * NANOMETRE)?;
    let lengths: Vec<f64> = a.sweep_lengths.0.iter().map(|cm| cm * 1e-2).collect();
    let options = JsaOptions {
        nonlinear: NonlinearPhase::from(a.nonlinear),
        ..JsaOptions::default()
    };
    let sweep = purity_sweep(
        &f,
        &p,
        &lengths,
        &a.sweep_bandwidths.0,
        kind(a.bandwidth_kind),
        &GridPolicy::with_points(a.grid),
        options,
    )?;
    out.write("sweep.csv", &io::sweep_csv(&sweep))?;

    let (nl, nb) = (sweep.lengths.len(), sweep.bandwidths_nm.len());
    // heatmap wants x-major: bandwidth on x, length on y
    let mut values = Vec::with_capacity(nl * nb);
    for b in 0..nb {
        for l in 0..nl {
            values.push(sweep.get(l, b));
        }
    }
    let svg = plot::heatmap("Heralded purity", "pump bandwidth (nm)", "fiber length (cm)", &a.sweep_bandwidths.0, &a.sweep_lengths.0, &values);
    out.write("sweep.svg", &svg)?;
    let failed = sweep.purity.iter().filter(|p| p.is_none()).count();
    let best = sweep.maximum();
    out.write(
        "sweep.json",
        &(serde_json::to_string_pretty(&json!({
            "bandwidth_kind": format!("{:?}", a.bandwidth_kind).to_lowercase(),
            "grid": a.grid,
            "cells": nl * nb,
            "failed_cells": failed,
            "maximum": best.map(|(l, b, p)| json!({"length_cm": l * 100.0, "bandwidth_nm": b, "purity": p})),
        }))
        .expect("plain json")
            + "\n"),
    )?;
    let head = match best {
        Some((l, b, p)) => format!("max_purity={p:.4} length_cm={:.3} bandwidth_nm={b:.3}", l * 100.0),
        None => "max_purity=none".into(),
    };
    Ok(format!("{head} cells={} failed={failed}", nl * nb))
}

fn estimate(r: &CountingRecord, e: impl Fn(&CountingRecord) -> xfwm::Result<f64>) -> Option<f64> {
    e(r).ok().filter(|v| v.is_finite())
}

pub fn stats(a: &StatsArgs, out: &mut OutDir) -> Res<String> {
    let weights = match (&a.k_modes, &a.schmidt_weights) {
        (Some(k), _) => {
            if *k == 0 {
                return Err(CliError::usage("--k-modes", "must be >= 1"));
            }
            vec![1.0 / *k as f64; *k]
        }
        (None, Some(w)) => {
            let total: f64 = w.0.iter().sum();
            if w.0.is_empty() || !(total > 0.0) || w.0.iter().any(|x| *x < 0.0) {
                return Err(CliError::usage("--schmidt-weights", "need nonnegative weights with a positive sum"));
            }
            w.0.iter().map(|x| x / total).collect()
        }
        (None, None) => vec![1.0],
    };
    let base = SourceStatModel::new(weights, 0.0, a.eta_s, a.eta_i, a.rep_rate_mhz * 1e6)?.with_dark_probability(a.dark)?;
    let (name, controls, mus): (&str, Vec<f64>, Vec<f64>) = match (&a.mu, &a.power_mw) {
        (Some(mu), _) => ("mu", mu.0.clone(), mu.0.clone()),
        (None, Some(pw)) => {
            let cal = PowerCalibration::fit(&base, REFERENCE_COINCIDENCE_RATE, REFERENCE_POWER)?;
            ("power_mw", pw.0.clone(), pw.0.iter().map(|p| cal.mean_pairs(p * 1e-3)).collect())
        }
        (None, None) => return Err(CliError::usage("--mu", "give --mu or --power-mw")),
    };
    if controls.is_empty() {
        return Err(CliError::usage(if name == "mu" { "--mu" } else { "--power-mw" }, "axis is empty"));
    }

    let mut rows = Vec::with_capacity(controls.len());
    let mut detail = Vec::with_capacity(controls.len());
    for (k, (&control, &mu)) in controls.iter().zip(&mus).enumerate() {
        let m = base.clone().with_mean_pairs(mu)?;
        let parts = simulate_partitions(&m, a.pulses, a.seed.wrapping_add(k as u64), Execution::default())?;
        let mut record = parts[0];
        for p in &parts[1..] {
            record.merge(p);
        }
        let se = |e: &dyn Fn(&CountingRecord) -> xfwm::Result<f64>| jackknife(&parts, e).ok().map(|x| x.std_error);
        let exact = click_probabilities(&m);
        detail.push(json!({
            name: control,
            "mu": mu,
            "coincidence_rate_hz": record.coincidence_rate(),
            "std_error": {
                "car": se(&car),
                "g2m_s": se(&|r| g2_marginal(r, Arm::Signal)),
                "g2m_i": se(&|r| g2_marginal(r, Arm::Idler)),
                "g2h": se(&g2_heralded),
            },
            "closed_form": {
                "car": exact.car(),
                "g2m_s": exact.g2_marginal(Arm::Signal),
                "g2m_i": exact.g2_marginal(Arm::Idler),
                "g2h": exact.g2_heralded(),
                "coincidence_rate_hz": exact.coincidence_rate(m.rep_rate()),
            },
        }));
        rows.push(StatsRow {
            control,
            record,
            car: estimate(&record, car),
            g2m_signal: estimate(&record, |r| g2_marginal(r, Arm::Signal)),
            g2m_idler: estimate(&record, |r| g2_marginal(r, Arm::Idler)),
            g2h: estimate(&record, g2_heralded),
        });
    }
    out.write("stats.csv", &io::stats_csv(name, &rows))?;
    out.write(
        "stats.json",
        &(serde_json::to_string_pretty(&json!({
            "control": name,
            "pulses": a.pulses,
            "seed": a.seed,
            "rows": detail,
        }))
        .expect("plain json")
            + "\n"),
    )?;
    let pts = |f: fn(&StatsRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| f(r).map(|v| (r.control, v))).collect()
    };
    let svg = plot::lines(
        "Counting statistics",
        name,
        "g2",
        &[("g2 marginal s", pts(|r| r.g2m_signal)), ("g2 marginal i", pts(|r| r.g2m_idler)), ("g2 heralded", pts(|r| r.g2h))],
    );
    out.write("stats.svg", &svg)?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    Ok(format!(
        "rows={} car={}..{} g2h={}..{}",
        rows.len(),
        fmt(first.car),
        fmt(last.car),
        fmt(first.g2h),
        fmt(last.g2h)
    ))
}

fn load_scans(dirs: &[PathBuf], background: bool) -> Res<Vec<NmJsi>> {
    let mut out = Vec::with_capacity(dirs.len());
    for d in dirs {
        let scan = io::read_set_scan(d)?;
        let mut jsi = calibrate_scan(&scan)?;
        if background {
            jsi = subtract_background(&jsi);
        }
        out.push(jsi);
    }
    Ok(out)
}

fn jsi_svg(j: &NmJsi) -> String {
    let values: Vec<Option<f64>> = j.values.iter().copied().map(Some).collect();
    plot::heatmap(&j.label, "signal wavelength (nm)", "idler wavelength (nm)", &j.signal_nm, &j.idler_nm, &values)
}

pub fn set_calibrate(a: &SetCalibrateArgs, out: &mut OutDir) -> Res<String> {
    let spectra = load_scans(&a.scans, a.background)?;
    let mut rows = Vec::new();
    for j in &spectra {
        let s = slug(&j.label);
        out.write(&format!("calibrated/{s}.csv"), &io::nm_jsi_csv(j))?;
        out.write(&format!("calibrated/{s}.svg"), &jsi_svg(j))?;
        rows.push(j.idler_nm.len().to_string());
    }
    let labels: Vec<&str> = spectra.iter().map(|j| j.label.as_str()).collect();
    Ok(format!("calibrated={} labels={} rows={}", spectra.len(), labels.join(","), rows.join(",")))
}

pub fn overlap(a: &OverlapArgs, out: &mut OutDir) -> Res<String> {
    let [rs, ri] = a.resolution_nm.0[..] else {
        return Err(CliError::usage("--resolution-nm", "expected two values: signal,idler"));
    };
    let spectra = load_scans(&a.scans, a.background)?;
    let (mesh, meshed) = to_common_mesh(&spectra, (rs, ri))?;
    let report = inhomogeneity_report(&meshed, a.feature_fraction, a.threshold)?;
    for j in &meshed {
        out.write(&format!("mesh/{}.csv", slug(&j.label)), &io::nm_jsi_csv(j))?;
    }
    out.write(
        "overlap.json",
        &(serde_json::to_string_pretty(&json!({
            "mesh": {
                "signal_nm": [mesh.signal_nm[0], mesh.signal_nm[mesh.signal_nm.len() - 1], mesh.signal_nm.len()],
                "idler_nm": [mesh.idler_nm[0], mesh.idler_nm[mesh.idler_nm.len() - 1], mesh.idler_nm.len()],
            },
            "report": report,
        }))
        .expect("plain json")
            + "\n"),
    )?;
    out.write("overlap.txt", &report.overlaps.to_table())?;
    let features: Vec<String> = report.entries.iter().map(|e| e.features.to_string()).collect();
    let flagged: Vec<&str> = report.entries.iter().filter(|e| e.inhomogeneous).map(|e| e.label.as_str()).collect();
    let min = report.overlaps.min_off_diagonal();
    Ok(format!(
        "overlap_min={} features={} inhomogeneous={}",
        min.map(|m| format!("{m:.4}")).unwrap_or_else(|| "none".into()),
        features.join(","),
        if flagged.is_empty() { "none".into() } else { flagged.join(",") }
    ))
}

pub fn fringes(a: &FringesArgs, out: &mut OutDir) -> Res<String> {
    let trace = io::read_fringe_csv(&a.input, a.length_m)?;
    let est = birefringence_from_fringes(&trace)?;
    let beat_length = est.center_wavelength / est.dn;
    out.write(
        "fringes.json",
        &(serde_json::to_string_pretty(&json!({
            "estimate": est,
            "beat_length_m": beat_length,
            "group_delay_difference_s": est.dn * a.length_m / SPEED_OF_LIGHT,
        }))
        .expect("plain json")
            + "\n"),
    )?;
    Ok(format!(
        "dn={:.5e} uncertainty={:.2e} peaks={} center_nm={:.2}",
        est.dn,
        est.uncertainty,
        est.peaks,
        est.center_wavelength / NANOMETRE
    ))
}
