//! File formats: fiber profiles (TOML), fringe traces and SET scans (CSV +
//! JSON manifest), and CSV/JSON renderings of results.
//!
//! Writers return strings; callers decide where and how to persist them.
//! Floats are written with 9 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{CladdingModel, FiberSpec, FringeTrace, IndexTable};
use crate::jointspectrum::{JointSpectrum, PuritySweep};
use crate::phasematch::{Branch, PumpContour};
use crate::photonstats::CountingRecord;
use crate::setdata::{NmJsi, ScanMetadata, ScanRow, SetScan};
use crate::units::{omega_to_nm, MICROMETRE, NANOMETRE};

/// Formats with 9 significant digits, plain notation where readable.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("round trip");
    let a = rounded.abs();
    if a == 0.0 || (1e-4..1e9).contains(&a) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

/// Key/value fiber profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberProfile {
    pub core_radius_um: f64,
    pub na: f64,
    pub dn: f64,
    pub gamma_per_w_km: f64,
    pub length_cm: f64,
    /// Optional tabulated cladding index replacing the silica Sellmeier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cladding_wavelengths_nm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cladding_indices: Option<Vec<f64>>,
}

/// Shipped profile for PM980-XP; geometry from the vendor datasheet.
pub const PM980XP_PROFILE: &str = "\
# PM980-XP: 5.5 um mode-field core diameter class, NA 0.12
core_radius_um = 2.75
na = 0.12
dn = 3.571e-4
gamma_per_w_km = 5.0
length_cm = 9.0
";

impl FiberProfile {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(context, e.message()))
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "pm980xp" => Some(Self::parse(PM980XP_PROFILE, "pm980xp").expect("shipped profile parses")),
            _ => None,
        }
    }

    pub fn to_spec(&self) -> Result<FiberSpec> {
        let cladding = match (&self.cladding_wavelengths_nm, &self.cladding_indices) {
            (None, None) => CladdingModel::FusedSilicaSellmeier,
            (Some(w), Some(n)) => {
                CladdingModel::UserTable(IndexTable::new(w.iter().map(|x| x * NANOMETRE).collect(), n.clone())?)
            }
            _ => {
                return Err(Error::invalid(
                    "cladding_table",
                    "cladding_wavelengths_nm and cladding_indices must be given together",
                ))
            }
        };
        FiberSpec::new(
            self.core_radius_um * MICROMETRE,
            self.na,
            cladding,
            self.dn,
            self.gamma_per_w_km * 1e-3,
            self.length_cm * 1e-2,
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Resolves a profile argument: a file path if one exists, otherwise a
/// `<name>.toml` in `search_dir`, otherwise a built-in name.
pub fn load_fiber_profile(name_or_path: &str, search_dir: Option<&Path>) -> Result<FiberProfile> {
    let direct = Path::new(name_or_path);
    if direct.is_file() {
        return FiberProfile::parse(&read_to_string(direct)?, &direct.display().to_string());
    }
    if let Some(dir) = search_dir {
        let candidate = dir.join(format!("{name_or_path}.toml"));
        if candidate.is_file() {
            return FiberProfile::parse(&read_to_string(&candidate)?, &candidate.display().to_string());
        }
    }
    FiberProfile::builtin(name_or_path)
        .ok_or_else(|| Error::invalid("fiber_profile", format!("no profile file or built-in named `{name_or_path}`")))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn two_column(text: &str, context: &str, expected: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers().map_err(|e| Error::parse(context, e))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() != 2 || names[0] != expected[0] || names[1] != expected[1] {
        return Err(Error::parse(
            context,
            format!("expected header `{},{}`, found `{}`", expected[0], expected[1], names.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(context, e))?;
        let field = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| Error::parse(context, format!("data row {}: {e}", line + 1)))
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}

/// `wavelength_nm,intensity` CSV.
pub fn parse_fringe_csv(text: &str, context: &str, fiber_length: f64) -> Result<FringeTrace> {
    let rows = two_column(text, context, ["wavelength_nm", "intensity"])?;
    let (w, i): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|(w, i)| (w * NANOMETRE, i)).unzip();
    FringeTrace::new(w, i, fiber_length)
}

pub fn read_fringe_csv(path: &Path, fiber_length: f64) -> Result<FringeTrace> {
    parse_fringe_csv(&read_to_string(path)?, &path.display().to_string(), fiber_length)
}

pub fn fringe_csv(trace: &FringeTrace) -> String {
    let mut s = String::from("wavelength_nm,intensity\n");
    for (w, i) in trace.wavelengths().iter().zip(trace.intensities()) {
        s.push_str(&format!("{},{}\n", fmt9(w / NANOMETRE), fmt9(*i)));
    }
    s
}

/// `manifest.json` of a SET scan directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanManifest {
    pub metadata: ScanMetadata,
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRow {
    pub setpoint_nm: f64,
    /// `null` when the reference spectrometer reading is missing.
    pub measured_nm: Option<f64>,
    /// CSV `wavelength_nm,power`, relative to the manifest.
    pub trace: String,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn read_set_scan(dir: &Path) -> Result<SetScan> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest: ScanManifest = serde_json::from_str(&read_to_string(&manifest_path)?)
        .map_err(|e| Error::parse(manifest_path.display().to_string(), e))?;
    let mut rows = Vec::with_capacity(manifest.rows.len());
    for r in &manifest.rows {
        let p = dir.join(&r.trace);
        let spectrum = two_column(&read_to_string(&p)?, &p.display().to_string(), ["wavelength_nm", "power"])?;
        rows.push(ScanRow {
            seed_setpoint_nm: r.setpoint_nm,
            seed_measured_nm: r.measured_nm,
            signal_spectrum: spectrum,
        });
    }
    SetScan::new(rows, manifest.metadata)
}

/// Files making up a scan directory: (relative path, contents).
pub fn set_scan_files(scan: &SetScan) -> Vec<(PathBuf, String)> {
    let mut files = Vec::with_capacity(scan.rows().len() + 1);
    let mut manifest_rows = Vec::with_capacity(scan.rows().len());
    for (k, r) in scan.rows().iter().enumerate() {
        let name = format!("row_{k:03}.csv");
        let mut s = String::from("wavelength_nm,power\n");
        for (w, p) in &r.signal_spectrum {
            s.push_str(&format!("{},{}\n", fmt9(*w), fmt9(*p)));
        }
        files.push((PathBuf::from(&name), s));
        manifest_rows.push(ManifestRow {
            setpoint_nm: r.seed_setpoint_nm,
            measured_nm: r.seed_measured_nm,
            trace: name,
        });
    }
    let manifest = ScanManifest {
        metadata: scan.metadata().clone(),
        rows: manifest_rows,
    };
    files.push((
        PathBuf::from(MANIFEST_NAME),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    ));
    files
}

/// Long-form CSV. Intensities: `signal_nm,idler_nm,value`; amplitudes add
/// `re,im` after `value = |f|²`.
pub fn joint_spectrum_csv(js: &JointSpectrum) -> String {
    let grid = js.grid();
    let intensity = js.intensities();
    let amps = js.amplitudes();
    let mut s = String::from(if amps.is_some() {
        "signal_nm,idler_nm,value,re,im\n"
    } else {
        "signal_nm,idler_nm,value\n"
    });
    for (a, &ws) in grid.signal_axis().iter().enumerate() {
        let ls = fmt9(omega_to_nm(ws));
        for (b, &wi) in grid.idler_axis().iter().enumerate() {
            let k = grid.index(a, b);
            s.push_str(&format!("{ls},{},{}", fmt9(omega_to_nm(wi)), fmt9(intensity[k])));
            if let Some(f) = amps {
                s.push_str(&format!(",{},{}", fmt9(f[k].re), fmt9(f[k].im)));
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumHeader<'a> {
    pub kind: crate::jointspectrum::SpectrumKind,
    pub provenance: crate::jointspectrum::Provenance,
    pub n_signal: usize,
    pub n_idler: usize,
    pub signal_omega_range: [f64; 2],
    pub idler_omega_range: [f64; 2],
    pub normalization: f64,
    pub payload: &'a str,
    #[serde(flatten)]
    pub extra: serde_json::Value,
}

/// JSON header describing a CSV payload written separately.
pub fn joint_spectrum_header(js: &JointSpectrum, payload: &str, extra: serde_json::Value) -> String {
    let g = js.grid();
    let header = SpectrumHeader {
        kind: js.kind(),
        provenance: js.provenance(),
        n_signal: g.n_signal(),
        n_idler: g.n_idler(),
        signal_omega_range: [g.signal_axis()[0], g.signal_axis()[g.n_signal() - 1]],
        idler_omega_range: [g.idler_axis()[0], g.idler_axis()[g.n_idler() - 1]],
        normalization: js.norm_integral(),
        payload,
        extra,
    };
    serde_json::to_string_pretty(&header).expect("header serializes") + "\n"
}

pub fn nm_jsi_csv(jsi: &NmJsi) -> String {
    let mut s = String::from("signal_nm,idler_nm,value\n");
    for (a, ls) in jsi.signal_nm.iter().enumerate() {
        for (b, li) in jsi.idler_nm.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", fmt9(*ls), fmt9(*li), fmt9(jsi.at(a, b))));
        }
    }
    s
}

/// Matrix CSV: header row of bandwidths, one row per length.
pub fn sweep_csv(sweep: &PuritySweep) -> String {
    let kind = match sweep.bandwidth_kind {
        crate::jointspectrum::BandwidthKind::SigmaField => "sigma_field_nm",
        crate::jointspectrum::BandwidthKind::FwhmIntensity => "fwhm_intensity_nm",
    };
    let mut s = format!("length_cm\\{kind}");
    for b in &sweep.bandwidths_nm {
        s.push(',');
        s.push_str(&fmt9(*b));
    }
    s.push('\n');
    for (i, l) in sweep.lengths.iter().enumerate() {
        s.push_str(&fmt9(l * 100.0));
        for j in 0..sweep.bandwidths_nm.len() {
            s.push(',');
            if let Some(p) = sweep.get(i, j) {
                s.push_str(&fmt9(p));
            }
        }
        s.push('\n');
    }
    s
}

pub fn contour_csv(contours: &[PumpContour]) -> String {
    let mut s = String::from("pump_nm,signal_nm,idler_nm,residual,branch\n");
    for c in contours {
        for p in &c.points {
            let branch = match p.branch {
                Branch::FarDetuned => "far-detuned",
                Branch::NearDegenerate => "near-degenerate",
            };
            s.push_str(&format!(
                "{},{},{},{},{branch}\n",
                fmt9(p.pump_wavelength / NANOMETRE),
                fmt9(p.signal_wavelength / NANOMETRE),
                fmt9(p.idler_wavelength / NANOMETRE),
                fmt9(p.residual_mismatch),
            ));
        }
    }
    s
}

/// One line of the `stats` table.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub control: f64,
    pub record: CountingRecord,
    pub car: Option<f64>,
    pub g2m_signal: Option<f64>,
    pub g2m_idler: Option<f64>,
    pub g2h: Option<f64>,
}

pub fn stats_csv(control_name: &str, rows: &[StatsRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt9).unwrap_or_default();
    let mut s = format!("{control_name},N_s,N_i,N_si,CAR,g2m_s,g2m_i,g2h\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt9(r.control),
            r.record.n_singles_signal,
            r.record.n_singles_idler,
            r.record.n_coincidences,
            opt(r.car),
            opt(r.g2m_signal),
            opt(r.g2m_idler),
            opt(r.g2h),
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(810.123456789123), "810.123457");
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(1.2345678912e-12), "1.23456789e-12");
        assert_eq!(fmt9(-3.0), "-3");
    }

    #[test]
    fn builtin_profile_matches_constructor() {
        let spec = FiberProfile::builtin("pm980xp").unwrap().to_spec().unwrap();
        assert_eq!(spec, FiberSpec::pm980xp());
        assert!(FiberProfile::builtin("nope").is_none());
    }

    #[test]
    fn profile_round_trips_through_toml() {
        let p = FiberProfile::builtin("pm980xp").unwrap();
        assert_eq!(FiberProfile::parse(&p.to_toml(), "t").unwrap(), p);
    }

    #[test]
    fn profile_rejects_unknown_and_half_table() {
        let bad = format!("{PM980XP_PROFILE}core_radius = 1\n");
        assert!(matches!(FiberProfile::parse(&bad, "t"), Err(Error::Parse { .. })));
        let half = format!("{PM980XP_PROFILE}cladding_indices = [1.45, 1.45, 1.45, 1.45]\n");
        assert!(FiberProfile::parse(&half, "t").unwrap().to_spec().is_err());
    }

    #[test]
    fn fringe_csv_requires_header() {
        let body: String = (0..20).map(|k| format!("{},{}\n", 1000.0 + k as f64, 1.0)).collect();
        assert!(parse_fringe_csv(&body, "t", 1.0).is_err());
        let ok = format!("wavelength_nm,intensity\n{body}");
        let t = parse_fringe_csv(&ok, "t", 1.0).unwrap();
        assert_eq!(t.wavelengths().len(), 20);
        assert!((t.wavelengths()[0] - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn malformed_number_is_parse_error() {
        let text = "wavelength_nm,intensity\n1000,abc\n";
        assert!(matches!(parse_fringe_csv(text, "t", 1.0), Err(Error::Parse { .. })));
    }
}
