use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Cross-polarized four-wave-mixing photon-pair source model.
///
/// Every subcommand writes its artifacts into --out-dir and prints a
/// one-line summary. Failures print a JSON object on stderr and exit with
/// 2 (configuration), 3 (computation) or 4 (I/O).
#[derive(Debug, Parser)]
#[command(name = "xfwm", version, args_override_self = true)]
pub struct Cli {
    /// Directory receiving the output files.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,

    /// TOML file of flag defaults; keys are long flag names, explicit
    /// flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Phase-matched signal/idler wavelengths over a pump tuning range.
    Contours(ContoursArgs),
    /// Joint spectral amplitude and Schmidt purity at one operating point.
    Jsa(JsaArgs),
    /// Purity over a grid of fiber lengths and pump bandwidths.
    PuritySweep(SweepArgs),
    /// Monte Carlo counting statistics (CAR, marginal and heralded g2).
    Stats(StatsArgs),
    /// Recalibrate SET scans onto their measured idler wavelengths.
    SetCalibrate(SetCalibrateArgs),
    /// Pairwise JSA overlaps and feature counts of SET scans.
    Overlap(OverlapArgs),
    /// Birefringence from a polarization fringe trace.
    Fringes(FringesArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FiberArgs {
    /// Profile file, `<name>.toml` in $XFWM_PROFILE_DIR, or a built-in
    /// name.
    #[arg(long, visible_alias = "fiber", default_value = "pm980xp", value_name = "NAME|PATH")]
    pub fiber_profile: String,

    /// Overrides the profile's fiber length.
    #[arg(long, value_name = "CM")]
    pub length_cm: Option<f64>,

    /// Overrides the profile's birefringence.
    #[arg(long, value_name = "DN")]
    pub dn: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BandwidthKindArg {
    /// σ of the pump field spectrum.
    Sigma,
    /// Full width at half maximum of the pump intensity spectrum.
    Fwhm,
}

#[derive(Debug, Clone, Args)]
pub struct PumpArgs {
    #[arg(long, default_value_t = 1000.0, value_name = "NM")]
    pub pump_nm: f64,

    /// Pump spectral width in nm, interpreted per --bandwidth-kind.
    #[arg(long, default_value_t = 2.0, value_name = "NM")]
    pub bandwidth: f64,

    #[arg(long, value_enum, default_value_t = BandwidthKindArg::Sigma)]
    pub bandwidth_kind: BandwidthKindArg,

    #[arg(long, default_value_t = 1000.0, value_name = "W")]
    pub peak_power_w: f64,

    /// Include the (2/3)γP self/cross-phase term in the mismatch.
    #[arg(long)]
    pub nonlinear: bool,
}

/// A list `a,b,c` or an inclusive range `lo:hi:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis(pub Vec<f64>);

pub fn parse_axis(text: &str) -> Result<Axis, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("axis is empty".into());
    }
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err("range must be lo:hi:step".into());
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0) || !(hi >= lo) {
            return Err("range needs hi >= lo and step > 0".into());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        if n > 100_000 {
            return Err("range has more than 100000 points".into());
        }
        return Ok(Axis((0..n).map(|k| lo + step * k as f64).collect()));
    }
    let values = text.split(',').map(num).collect::<Result<Vec<f64>, _>>()?;
    Ok(Axis(values))
}

/// Non-negative integer, also written as `1e7`.
pub fn parse_count(text: &str) -> Result<u64, String> {
    if let Ok(n) = text.trim().parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = text.trim().parse().map_err(|_| format!("`{text}` is not a count"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("`{text}` is not a whole number"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ContoursArgs {
    #[command(flatten)]
    pub fiber: FiberArgs,

    /// Pump wavelengths in nm.
    #[arg(long, value_parser = parse_axis, default_value = "1000:1100:1", value_name = "AXIS")]
    pub pump_range: Axis,

    #[arg(long, default_value_t = 1000.0, value_name = "W")]
    pub peak_power_w: f64,

    #[arg(long)]
    pub nonlinear: bool,
}

#[derive(Debug, Clone, Args)]
pub struct JsaArgs {
    #[command(flatten)]
    pub fiber: FiberArgs,

    #[command(flatten)]
    pub pump: PumpArgs,

    /// Points per grid axis.
    #[arg(long, default_value_t = 256, value_name = "N")]
    pub grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub fiber: FiberArgs,

    #[arg(long, default_value_t = 1000.0, value_name = "NM")]
    pub pump_nm: f64,

    #[arg(long, value_enum, default_value_t = BandwidthKindArg::Sigma)]
    pub bandwidth_kind: BandwidthKindArg,

    /// Fiber lengths in cm.
    #[arg(long, value_parser = parse_axis, default_value = "0.5:20:0.5", value_name = "AXIS")]
    pub sweep_lengths: Axis,

    /// Pump bandwidths in nm.
    #[arg(long, value_parser = parse_axis, default_value = "1:20:1", value_name = "AXIS")]
    pub sweep_bandwidths: Axis,

    /// Points per grid axis in every cell.
    #[arg(long, default_value_t = 128, value_name = "N")]
    pub grid: usize,

    #[arg(long)]
    pub nonlinear: bool,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Number of equal Schmidt modes.
    #[arg(long, conflicts_with = "schmidt_weights", value_name = "K")]
    pub k_modes: Option<usize>,

    /// Explicit Schmidt weights, normalized to 1.
    #[arg(long, value_parser = parse_axis, value_name = "W1,W2,..")]
    pub schmidt_weights: Option<Axis>,

    /// Mean pairs per pulse.
    #[arg(long, value_parser = parse_axis, conflicts_with = "power_mw", required_unless_present = "power_mw", value_name = "AXIS")]
    pub mu: Option<Axis>,

    /// Average pump power in mW, mapped through μ = aP² calibrated to
    /// 30 kC/s at 70 mW.
    #[arg(long, value_parser = parse_axis, value_name = "AXIS")]
    pub power_mw: Option<Axis>,

    /// Signal-arm detection efficiency.
    #[arg(long, default_value_t = 0.25)]
    pub eta_s: f64,

    /// Idler-arm detection efficiency.
    #[arg(long, default_value_t = 0.25)]
    pub eta_i: f64,

    /// Per-pulse dark click probability of every detector.
    #[arg(long, default_value_t = 0.0)]
    pub dark: f64,

    #[arg(long, default_value_t = 80.0, value_name = "MHZ")]
    pub rep_rate_mhz: f64,

    /// Pulses simulated per row.
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub pulses: u64,

    /// Row k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SetCalibrateArgs {
    /// Scan directories holding manifest.json.
    #[arg(required = true, value_name = "SCAN_DIR")]
    pub scans: Vec<PathBuf>,

    /// Subtract the noise floor (median of the lowest decile).
    #[arg(long)]
    pub background: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OverlapArgs {
    #[arg(required = true, value_name = "SCAN_DIR")]
    pub scans: Vec<PathBuf>,

    /// Mesh step in nm, signal then idler.
    #[arg(long, value_parser = parse_axis, default_value = "0.25,0.5", value_name = "S,I")]
    pub resolution_nm: Axis,

    /// Feature threshold as a fraction of the peak.
    #[arg(long, default_value_t = 0.2)]
    pub feature_fraction: f64,

    /// Overlaps below this are listed in the report.
    #[arg(long, default_value_t = 0.85)]
    pub threshold: f64,

    #[arg(long)]
    pub background: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FringesArgs {
    /// CSV with header `wavelength_nm,intensity`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,

    #[arg(long, value_name = "M")]
    pub length_m: f64,
}
