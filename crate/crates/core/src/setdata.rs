//! Stimulated-emission tomography (seeded FWM) scans: idler-axis
//! recalibration, common-mesh interpolation and source-identicality
//! overlaps.
//!
//! JSIs here live on wavelength axes in nm, since that is what the
//! spectrometers record; see [`NmJsi`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::FiberSpec;
use crate::jointspectrum::{envelope_value, linspace};
use crate::phasematch::{phase_mismatch, phasematching_value, NonlinearPhase, PumpSpec};
use crate::units::nm_to_omega;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub fiber_id: String,
    pub length_m: f64,
    pub pump_nm: f64,
}

/// One seed set-point: the seed as dialled and as measured on the reference
/// spectrometer, plus the stimulated signal spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub seed_setpoint_nm: f64,
    pub seed_measured_nm: Option<f64>,
    /// (wavelength_nm, power), wavelength strictly increasing.
    pub signal_spectrum: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetScan {
    rows: Vec<ScanRow>,
    metadata: ScanMetadata,
}

impl SetScan {
    pub const MIN_ROWS: usize = 8;

    pub fn new(rows: Vec<ScanRow>, metadata: ScanMetadata) -> Result<Self> {
        if rows.len() < Self::MIN_ROWS {
            return Err(Error::Data(format!(
                "a SET scan needs at least {} rows, got {}",
                Self::MIN_ROWS,
                rows.len()
            )));
        }
        for r in &rows {
            if r.signal_spectrum.is_empty() {
                return Err(Error::Data(format!("empty signal spectrum at setpoint {} nm", r.seed_setpoint_nm)));
            }
            if r.signal_spectrum.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::Data(format!(
                    "signal wavelengths not increasing at setpoint {} nm",
                    r.seed_setpoint_nm
                )));
            }
            if !r.seed_setpoint_nm.is_finite() || r.seed_measured_nm.is_some_and(|m| !m.is_finite()) {
                return Err(Error::Data("non-finite seed wavelength".into()));
            }
        }
        Ok(Self { rows, metadata })
    }

    pub fn rows(&self) -> &[ScanRow] {
        &self.rows
    }
    pub fn metadata(&self) -> &ScanMetadata {
        &self.metadata
    }
}

/// Intensity on (signal_nm × idler_nm), signal-major. Axes are strictly
/// increasing but need not be uniform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmJsi {
    pub label: String,
    pub signal_nm: Vec<f64>,
    pub idler_nm: Vec<f64>,
    pub values: Vec<f64>,
}

impl NmJsi {
    pub fn new(label: impl Into<String>, signal_nm: Vec<f64>, idler_nm: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("signal_nm", &signal_nm), ("idler_nm", &idler_nm)] {
            if axis.len() < 2 || axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Data(format!("{name} must have >= 2 strictly increasing entries")));
            }
        }
        if values.len() != signal_nm.len() * idler_nm.len() {
            return Err(Error::Data("value count does not match the axes".into()));
        }
        if let Some(k) = values.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::Data(format!("intensity entry {k} is negative or NaN")));
        }
        Ok(Self {
            label: label.into(),
            signal_nm,
            idler_nm,
            values,
        })
    }

    #[inline]
    pub fn at(&self, s: usize, i: usize) -> f64 {
        self.values[s * self.idler_nm.len() + i]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Bilinear interpolation; zero outside the support.
    pub fn interpolate(&self, signal: f64, idler: f64) -> f64 {
        let (Some((s0, ts)), Some((i0, ti))) = (bracket(&self.signal_nm, signal), bracket(&self.idler_nm, idler)) else {
            return 0.0;
        };
        let v00 = self.at(s0, i0);
        let v01 = self.at(s0, i0 + 1);
        let v10 = self.at(s0 + 1, i0);
        let v11 = self.at(s0 + 1, i0 + 1);
        (1.0 - ts) * ((1.0 - ti) * v00 + ti * v01) + ts * ((1.0 - ti) * v10 + ti * v11)
    }
}

/// Cell index and fractional position, or None outside `[axis[0], axis[n-1]]`.
fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(x >= axis[0] && x <= axis[n - 1]) {
        return None;
    }
    let k = axis.partition_point(|&a| a <= x).clamp(1, n - 1) - 1;
    let t = (x - axis[k]) / (axis[k + 1] - axis[k]);
    Some((k, t.clamp(0.0, 1.0)))
}

fn linear_resample(samples: &[(f64, f64)], at: f64) -> f64 {
    let n = samples.len();
    if n == 1 {
        return if at == samples[0].0 { samples[0].1 } else { 0.0 };
    }
    if at < samples[0].0 || at > samples[n - 1].0 {
        return 0.0;
    }
    let k = samples.partition_point(|p| p.0 <= at).clamp(1, n - 1) - 1;
    let (x0, y0) = samples[k];
    let (x1, y1) = samples[k + 1];
    y0 + (y1 - y0) * (at - x0) / (x1 - x0)
}

/// Replaces each set-point by its measured wavelength, sorts rows by idler
/// and averages rows that land on the same idler wavelength.
pub fn calibrate_rows(scan: &SetScan) -> Result<SetScan> {
    let missing: Vec<f64> = scan
        .rows
        .iter()
        .filter(|r| r.seed_measured_nm.is_none())
        .map(|r| r.seed_setpoint_nm)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Calibration { setpoints: missing });
    }
    let mut rows: Vec<ScanRow> = scan
        .rows
        .iter()
        .map(|r| {
            let m = r.seed_measured_nm.unwrap();
            ScanRow {
                seed_setpoint_nm: m,
                seed_measured_nm: Some(m),
                signal_spectrum: r.signal_spectrum.clone(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.seed_setpoint_nm.total_cmp(&b.seed_setpoint_nm));

    let mut merged: Vec<ScanRow> = Vec::with_capacity(rows.len());
    let mut run = 1usize;
    for row in rows {
        match merged.last_mut() {
            Some(last) if (last.seed_setpoint_nm - row.seed_setpoint_nm).abs() <= 1e-9 => {
                // running mean on the earlier row's signal samples
                run += 1;
                let w = 1.0 / run as f64;
                for p in last.signal_spectrum.iter_mut() {
                    p.1 += w * (linear_resample(&row.signal_spectrum, p.0) - p.1);
                }
            }
            _ => {
                run = 1;
                merged.push(row);
            }
        }
    }
    Ok(SetScan {
        rows: merged,
        metadata: scan.metadata.clone(),
    })
}

/// Calibrated JSI: idler axis from the measured seed wavelengths, signal
/// axis from the first row (other rows resampled linearly onto it).
pub fn calibrate_scan(scan: &SetScan) -> Result<NmJsi> {
    let cal = calibrate_rows(scan)?;
    if cal.rows.len() < 2 {
        return Err(Error::Data("fewer than two distinct idler wavelengths after calibration".into()));
    }
    let signal: Vec<f64> = cal.rows[0].signal_spectrum.iter().map(|p| p.0).collect();
    let idler: Vec<f64> = cal.rows.iter().map(|r| r.seed_setpoint_nm).collect();
    let (ns, ni) = (signal.len(), idler.len());
    let mut values = vec![0.0; ns * ni];
    for (i, row) in cal.rows.iter().enumerate() {
        let same_axis = row.signal_spectrum.len() == ns && row.signal_spectrum.iter().zip(&signal).all(|(p, s)| p.0 == *s);
        for (s, &w) in signal.iter().enumerate() {
            let v = if same_axis {
                row.signal_spectrum[s].1
            } else {
                linear_resample(&row.signal_spectrum, w)
            };
            values[s * ni + i] = v;
        }
    }
    NmJsi::new(cal.metadata.fiber_id.clone(), signal, idler, values)
}

/// Subtracts a constant floor (median of the lowest decile) and clamps at 0.
pub fn subtract_background(jsi: &NmJsi) -> NmJsi {
    let mut sorted = jsi.values.clone();
    sorted.sort_by(f64::total_cmp);
    let decile = &sorted[..(sorted.len() / 10).max(1)];
    let floor = decile[decile.len() / 2];
    NmJsi {
        values: jsi.values.iter().map(|v| (v - floor).max(0.0)).collect(),
        ..jsi.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonMesh {
    pub signal_nm: Vec<f64>,
    pub idler_nm: Vec<f64>,
}

impl CommonMesh {
    fn cell_area(&self) -> f64 {
        (self.signal_nm[1] - self.signal_nm[0]) * (self.idler_nm[1] - self.idler_nm[0])
    }
}

fn mesh_axis(lo: f64, hi: f64, step: f64, name: &str) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::IncompatibleScans(format!("{name} supports do not intersect")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if n < 2 {
        return Err(Error::IncompatibleScans(format!(
            "{name} intersection narrower than one mesh step"
        )));
    }
    Ok((0..n).map(|k| lo + step * k as f64).collect())
}

/// Bilinear resampling of every input onto one uniform mesh over the
/// intersection of their supports; each output integrates to 1.
pub fn to_common_mesh(spectra: &[NmJsi], resolution_nm: (f64, f64)) -> Result<(CommonMesh, Vec<NmJsi>)> {
    if spectra.is_empty() {
        return Err(Error::invalid("spectra", "must not be empty"));
    }
    if !(resolution_nm.0 > 0.0 && resolution_nm.1 > 0.0) {
        return Err(Error::invalid("resolution", "must be > 0"));
    }
    let span = |axis: fn(&NmJsi) -> &Vec<f64>| {
        spectra.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), j| {
            let a = axis(j);
            (lo.max(a[0]), hi.min(a[a.len() - 1]))
        })
    };
    let (slo, shi) = span(|j| &j.signal_nm);
    let (ilo, ihi) = span(|j| &j.idler_nm);
    let mesh = CommonMesh {
        signal_nm: mesh_axis(slo, shi, resolution_nm.0, "signal")?,
        idler_nm: mesh_axis(ilo, ihi, resolution_nm.1, "idler")?,
    };
    let area = mesh.cell_area();
    let mut out = Vec::with_capacity(spectra.len());
    for j in spectra {
        let mut values = Vec::with_capacity(mesh.signal_nm.len() * mesh.idler_nm.len());
        for &s in &mesh.signal_nm {
            for &i in &mesh.idler_nm {
                values.push(j.interpolate(s, i));
            }
        }
        let total: f64 = values.iter().sum::<f64>() * area;
        if !(total > 0.0) {
            return Err(Error::IncompatibleScans(format!(
                "`{}` has no intensity inside the common support",
                j.label
            )));
        }
        values.iter_mut().for_each(|v| *v /= total);
        out.push(NmJsi::new(j.label.clone(), mesh.signal_nm.clone(), mesh.idler_nm.clone(), values)?);
    }
    Ok((mesh, out))
}

fn same_axis(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Phase-blind overlap `Σ √I_a √I_b` of unit-L² flat-phase amplitudes.
pub fn overlap(a: &NmJsi, b: &NmJsi) -> Result<f64> {
    if !same_axis(&a.signal_nm, &b.signal_nm) || !same_axis(&a.idler_nm, &b.idler_nm) {
        return Err(Error::MeshMismatch(format!("`{}` and `{}` are on different meshes", a.label, b.label)));
    }
    let na: f64 = a.values.iter().sum();
    let nb: f64 = b.values.iter().sum();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::DegenerateInput);
    }
    let cross: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x * y).sqrt()).sum();
    Ok((cross / (na * nb).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub labels: Vec<String>,
    pub pairwise: Vec<Vec<f64>>,
    /// Always true: overlaps come from flat-phase amplitude estimates.
    pub phase_blind_upper_bound: bool,
}

impl OverlapReport {
    pub fn min_off_diagonal(&self) -> Option<f64> {
        let n = self.labels.len();
        (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| self.pairwise[a][b])
            .reduce(f64::min)
    }

    pub fn to_table(&self) -> String {
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
        let mut s = format!("{:width$}", "");
        for l in &self.labels {
            s.push_str(&format!("  {l:>width$}"));
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.pairwise) {
            s.push_str(&format!("{l:width$}"));
            for v in row {
                s.push_str(&format!("  {v:>width$.4}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn overlap_report(spectra: &[NmJsi]) -> Result<OverlapReport> {
    let n = spectra.len();
    let mut pairwise = vec![vec![1.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let o = overlap(&spectra[a], &spectra[b])?;
            pairwise[a][b] = o;
            pairwise[b][a] = o;
        }
    }
    Ok(OverlapReport {
        labels: spectra.iter().map(|s| s.label.clone()).collect(),
        pairwise,
        phase_blind_upper_bound: true,
    })
}

/// Connected regions (4-neighbour) of cells at or above `fraction × peak`.
pub fn count_features(jsi: &NmJsi, fraction: f64) -> usize {
    let (ns, ni) = (jsi.signal_nm.len(), jsi.idler_nm.len());
    let level = fraction * jsi.peak();
    if !(level > 0.0) {
        return 0;
    }
    let mut seen = vec![false; ns * ni];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..ns * ni {
        if seen[start] || jsi.values[start] < level {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (s, i) = (k / ni, k % ni);
            let mut visit = |s: usize, i: usize| {
                let q = s * ni + i;
                if !seen[q] && jsi.values[q] >= level {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if s > 0 {
                visit(s - 1, i);
            }
            if s + 1 < ns {
                visit(s + 1, i);
            }
            if i > 0 {
                visit(s, i - 1);
            }
            if i + 1 < ni {
                visit(s, i + 1);
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureEntry {
    pub label: String,
    pub features: usize,
    pub inhomogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InhomogeneityReport {
    pub feature_fraction: f64,
    pub overlap_threshold: f64,
    pub entries: Vec<FeatureEntry>,
    pub overlaps: OverlapReport,
    /// Label pairs whose overlap falls below the threshold.
    pub below_threshold: Vec<(String, String, f64)>,
}

pub const DEFAULT_FEATURE_FRACTION: f64 = 0.2;

/// Feature counts per spectrum and the pairwise overlap table. Spectra must
/// share a mesh (see [`to_common_mesh`]).
pub fn inhomogeneity_report(spectra: &[NmJsi], feature_fraction: f64, overlap_threshold: f64) -> Result<InhomogeneityReport> {
    if spectra.is_empty() {
        return Err(Error::invalid("spectra", "must not be empty"));
    }
    let entries = spectra
        .iter()
        .map(|j| {
            let features = count_features(j, feature_fraction);
            FeatureEntry {
                label: j.label.clone(),
                features,
                inhomogeneous: features > 1,
            }
        })
        .collect();
    let overlaps = overlap_report(spectra)?;
    let mut below = Vec::new();
    for a in 0..spectra.len() {
        for b in a + 1..spectra.len() {
            let o = overlaps.pairwise[a][b];
            if o < overlap_threshold {
                below.push((overlaps.labels[a].clone(), overlaps.labels[b].clone(), o));
            }
        }
    }
    Ok(InhomogeneityReport {
        feature_fraction,
        overlap_threshold,
        entries,
        overlaps,
        below_threshold: below,
    })
}

/// Forward model of a SET measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SetSimulation {
    pub signal_nm: (f64, f64),
    pub n_signal: usize,
    /// True seed wavelengths scanned, nm.
    pub idler_nm: (f64, f64),
    pub n_rows: usize,
    /// Set-point error: the dial reads `true − drift_nm`; the reference
    /// spectrometer reports the true value.
    pub drift_nm: f64,
    pub nonlinear: NonlinearPhase,
}

/// Stimulated signal `∝ |α φ|²` along each seed row. Several segments are
/// summed coherently, each delayed by the mismatch phase of those before it.
pub fn simulate_set_scan(segments: &[FiberSpec], pump: &PumpSpec, sim: &SetSimulation, fiber_id: &str) -> Result<SetScan> {
    if segments.is_empty() {
        return Err(Error::invalid("segments", "must not be empty"));
    }
    if sim.n_signal < 2 {
        return Err(Error::invalid("n_signal", "must be >= 2"));
    }
    let signal = linspace(sim.signal_nm.0, sim.signal_nm.1, sim.n_signal);
    let idler = linspace(sim.idler_nm.0, sim.idler_nm.1, sim.n_rows);
    let wp = pump.center_omega();
    let mut rows = Vec::with_capacity(idler.len());
    for &lam_i in &idler {
        let wi = nm_to_omega(lam_i);
        let mut spectrum = Vec::with_capacity(signal.len());
        for &lam_s in &signal {
            let ws = nm_to_omega(lam_s);
            let amp = segmented_amplitude(segments, pump, ws, wi, sim.nonlinear)?;
            let alpha = envelope_value(ws, wi, wp, pump.sigma_p());
            spectrum.push((lam_s, (alpha * amp).norm_sqr()));
        }
        rows.push(ScanRow {
            seed_setpoint_nm: lam_i - sim.drift_nm,
            seed_measured_nm: Some(lam_i),
            signal_spectrum: spectrum,
        });
    }
    let length = segments.iter().map(|s| s.length()).sum();
    SetScan::new(
        rows,
        ScanMetadata {
            fiber_id: fiber_id.to_string(),
            length_m: length,
            pump_nm: pump.center_wavelength() * 1e9,
        },
    )
}

fn segmented_amplitude(segments: &[FiberSpec], pump: &PumpSpec, ws: f64, wi: f64, nl: NonlinearPhase) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut phase = 0.0;
    for seg in segments {
        let d = phase_mismatch(seg, pump, ws, wi, nl)?;
        let l = seg.length();
        total += Complex64::from_polar(l, phase) * phasematching_value(d, l);
        phase += d * l;
    }
    Ok(total)
}
