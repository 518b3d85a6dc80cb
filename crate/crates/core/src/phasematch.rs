//! Cross-polarized FWM phase matching.
//!
//! Pump on the slow axis, signal and idler on the fast axis, with
//! `ω_p = (ω_s + ω_i) / 2` everywhere:
//!
//! ```text
//! Δβ = 2 β_p(slow) − β_s(fast) − β_i(fast) [+ (2/3) γ P]
//! ```

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fiber::{FiberSpec, PolarizationAxis};
use crate::jointspectrum::SpectralGrid;
use crate::units::{nm_to_omega, omega_to_nm, omega_to_wavelength, wavelength_to_omega, NANOMETRE};

/// Whether the SPM/XPM term `(2/3) γ P` enters the mismatch. Off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NonlinearPhase {
    #[default]
    Neglect,
    Include,
}

impl From<bool> for NonlinearPhase {
    fn from(include: bool) -> Self {
        if include {
            NonlinearPhase::Include
        } else {
            NonlinearPhase::Neglect
        }
    }
}

/// Pulsed pump parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    center_wavelength: f64,
    sigma_p: f64,
    peak_power: f64,
    rep_rate: f64,
    average_power: Option<f64>,
}

impl PumpSpec {
    pub fn new(center_wavelength: f64, sigma_p: f64, peak_power: f64, rep_rate: f64) -> Result<Self> {
        if !(center_wavelength > 0.0 && center_wavelength.is_finite()) {
            return Err(Error::invalid("center_wavelength", "must be > 0"));
        }
        if !(sigma_p > 0.0 && sigma_p.is_finite()) {
            return Err(Error::invalid("sigma_p", "must be > 0"));
        }
        if !(peak_power >= 0.0 && peak_power.is_finite()) {
            return Err(Error::invalid("peak_power", "must be >= 0"));
        }
        if !(rep_rate > 0.0 && rep_rate.is_finite()) {
            return Err(Error::invalid("rep_rate", "must be > 0"));
        }
        Ok(Self {
            center_wavelength,
            sigma_p,
            peak_power,
            rep_rate,
            average_power: None,
        })
    }

    /// 1000 nm, σ_p from a 2 nm field width, 80 MHz.
    pub fn reference() -> Self {
        let sigma = crate::jointspectrum::bandwidth_convert(
            2.0,
            crate::jointspectrum::BandwidthKind::SigmaField,
            1000.0 * NANOMETRE,
        )
        .expect("positive width");
        Self::new(1000.0 * NANOMETRE, sigma, 1000.0, 80e6).expect("valid reference pump")
    }

    pub fn with_average_power(mut self, watts: f64) -> Result<Self> {
        if !(watts >= 0.0 && watts.is_finite()) {
            return Err(Error::invalid("average_power", "must be >= 0"));
        }
        self.average_power = Some(watts);
        Ok(self)
    }

    pub fn with_sigma(self, sigma_p: f64) -> Result<Self> {
        let mut p = Self::new(self.center_wavelength, sigma_p, self.peak_power, self.rep_rate)?;
        p.average_power = self.average_power;
        Ok(p)
    }

    pub fn with_peak_power(self, watts: f64) -> Result<Self> {
        let mut p = Self::new(self.center_wavelength, self.sigma_p, watts, self.rep_rate)?;
        p.average_power = self.average_power;
        Ok(p)
    }

    pub fn with_center_wavelength(self, wavelength: f64) -> Result<Self> {
        let mut p = Self::new(wavelength, self.sigma_p, self.peak_power, self.rep_rate)?;
        p.average_power = self.average_power;
        Ok(p)
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }
    pub fn center_omega(&self) -> f64 {
        wavelength_to_omega(self.center_wavelength)
    }
    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }
    pub fn peak_power(&self) -> f64 {
        self.peak_power
    }
    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }

    /// Explicit average power, or the transform-limited estimate
    /// `P R_p sqrt(π) / σ_p` for a pump field spectrum `exp(−Δ²/(2σ_p²))`.
    pub fn average_power(&self) -> f64 {
        self.average_power
            .unwrap_or(self.peak_power * self.rep_rate * std::f64::consts::PI.sqrt() / self.sigma_p)
    }
}

/// Which root of the contour a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    FarDetuned,
    NearDegenerate,
}

/// Signal closer than this to the pump is labelled near-degenerate.
pub const NEAR_DEGENERATE_NM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMatchPoint {
    pub pump_wavelength: f64,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
    pub residual_mismatch: f64,
    pub branch: Branch,
}

impl PhaseMatchPoint {
    pub fn signal_omega(&self) -> f64 {
        wavelength_to_omega(self.signal_wavelength)
    }
    pub fn idler_omega(&self) -> f64 {
        wavelength_to_omega(self.idler_wavelength)
    }
}

/// Roots found for one pump wavelength; empty when Δβ never changes sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpContour {
    pub pump_wavelength: f64,
    pub points: Vec<PhaseMatchPoint>,
}

impl PumpContour {
    pub fn is_phase_matched(&self) -> bool {
        !self.points.is_empty()
    }

    /// First far-detuned root, if any.
    pub fn far_detuned(&self) -> Option<&PhaseMatchPoint> {
        self.points.iter().find(|p| p.branch == Branch::FarDetuned)
    }
}

/// Δβ (rad/m) for a signal/idler pair; the pump frequency is their mean.
pub fn phase_mismatch(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    omega_s: f64,
    omega_i: f64,
    nonlinear: NonlinearPhase,
) -> Result<f64> {
    let omega_p = 0.5 * (omega_s + omega_i);
    let beta_p = fiber.propagation_constant(omega_p, PolarizationAxis::Slow)?;
    let beta_s = fiber.propagation_constant(omega_s, PolarizationAxis::Fast)?;
    let beta_i = fiber.propagation_constant(omega_i, PolarizationAxis::Fast)?;
    Ok(combine(beta_p, beta_s, beta_i, nonlinear_term(fiber, pump, nonlinear)))
}

#[inline]
fn combine(beta_p: f64, beta_s: f64, beta_i: f64, shift: f64) -> f64 {
    2.0 * beta_p - beta_s - beta_i + shift
}

fn nonlinear_term(fiber: &FiberSpec, pump: &PumpSpec, nonlinear: NonlinearPhase) -> f64 {
    match nonlinear {
        NonlinearPhase::Include => 2.0 / 3.0 * fiber.gamma() * pump.peak_power(),
        NonlinearPhase::Neglect => 0.0,
    }
}

/// Δβ on every cell of `grid`, signal-major (`k = i_s * n_i + i_i`).
///
/// Signal and idler propagation constants are evaluated once per row and
/// column; only the pump term is per cell.
pub fn mismatch_on_grid(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    grid: &SpectralGrid,
    nonlinear: NonlinearPhase,
    execution: Execution,
) -> Result<Vec<f64>> {
    let beta_s = grid
        .signal_axis()
        .iter()
        .map(|&w| fiber.propagation_constant(w, PolarizationAxis::Fast))
        .collect::<Result<Vec<_>>>()?;
    let beta_i = grid
        .idler_axis()
        .iter()
        .map(|&w| fiber.propagation_constant(w, PolarizationAxis::Fast))
        .collect::<Result<Vec<_>>>()?;
    let shift = nonlinear_term(fiber, pump, nonlinear);
    let n_i = grid.n_idler();
    let ws = grid.signal_axis();
    let wi = grid.idler_axis();

    let rows: Vec<Result<Vec<f64>>> = exec::map_indexed(execution, grid.n_signal(), |s| {
        let mut row = Vec::with_capacity(n_i);
        for i in 0..n_i {
            let beta_p = fiber.propagation_constant(0.5 * (ws[s] + wi[i]), PolarizationAxis::Slow)?;
            row.push(combine(beta_p, beta_s[s], beta_i[i], shift));
        }
        Ok(row)
    });
    let mut out = Vec::with_capacity(grid.len());
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

/// Signal band scanned for sign changes (nm) and its step.
pub const SIGNAL_SCAN_NM: (f64, f64) = (700.0, 990.0);
pub const SIGNAL_SCAN_STEP_NM: f64 = 0.5;
/// Roots are refined until |Δβ| falls below this (rad/m).
pub const ROOT_TOLERANCE: f64 = 1e-6;

/// Phase-matched signal/idler pairs for each pump wavelength.
pub fn solve_contour(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    pump_wavelengths: &[f64],
    nonlinear: NonlinearPhase,
    execution: Execution,
) -> Result<Vec<PumpContour>> {
    if pump_wavelengths.is_empty() {
        return Err(Error::invalid("pump_wavelengths", "must not be empty"));
    }
    exec::map_indexed(execution, pump_wavelengths.len(), |k| {
        solve_single_pump(fiber, pump, pump_wavelengths[k], nonlinear)
    })
    .into_iter()
    .collect()
}

fn solve_single_pump(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    pump_wavelength: f64,
    nonlinear: NonlinearPhase,
) -> Result<PumpContour> {
    let omega_p = wavelength_to_omega(pump_wavelength);
    // a pump outside the model window is a hard error, not a missing root
    fiber.refractive_index(pump_wavelength, PolarizationAxis::Slow)?;

    let mismatch = |omega_s: f64| -> Option<f64> {
        phase_mismatch(fiber, pump, omega_s, 2.0 * omega_p - omega_s, nonlinear).ok()
    };

    let (lo_nm, hi_nm) = SIGNAL_SCAN_NM;
    let steps = ((hi_nm - lo_nm) / SIGNAL_SCAN_STEP_NM).round() as usize;
    let samples: Vec<(f64, Option<f64>)> = (0..=steps)
        .map(|k| {
            let w = nm_to_omega(lo_nm + k as f64 * SIGNAL_SCAN_STEP_NM);
            (w, mismatch(w))
        })
        .collect();

    let mut points = Vec::new();
    for pair in samples.windows(2) {
        let ((wa, fa), (wb, fb)) = (pair[0], pair[1]);
        let (Some(fa), Some(fb)) = (fa, fb) else { continue };
        let root = if fa == 0.0 {
            Some((wa, 0.0))
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            bisect(&mismatch, wa, fa, wb)
        } else {
            None
        };
        if let Some((omega_s, residual)) = root {
            let omega_i = 2.0 * omega_p - omega_s;
            let signal = omega_to_wavelength(omega_s);
            let branch = if (pump_wavelength - signal).abs() < NEAR_DEGENERATE_NM * NANOMETRE {
                Branch::NearDegenerate
            } else {
                Branch::FarDetuned
            };
            points.push(PhaseMatchPoint {
                pump_wavelength,
                signal_wavelength: signal,
                idler_wavelength: omega_to_wavelength(omega_i),
                residual_mismatch: residual,
                branch,
            });
        }
    }
    // scan runs short→long signal wavelength; report in that order
    Ok(PumpContour {
        pump_wavelength,
        points,
    })
}

fn bisect(f: &impl Fn(f64) -> Option<f64>, mut a: f64, mut fa: f64, mut b: f64) -> Option<(f64, f64)> {
    let mut best = (a, fa);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm.abs() < best.1.abs() {
            best = (m, fm);
        }
        if fm.abs() < ROOT_TOLERANCE {
            return Some((m, fm));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if m == a && m == b {
            break;
        }
    }
    Some(best)
}

/// Phase-matching function `sinc(ΔβL/2) exp(iΔβL/2)` on the grid.
pub fn phasematching_function(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    grid: &SpectralGrid,
    nonlinear: NonlinearPhase,
    execution: Execution,
) -> Result<Vec<Complex64>> {
    let dbeta = mismatch_on_grid(fiber, pump, grid, nonlinear, execution)?;
    let length = fiber.length();
    Ok(dbeta.into_iter().map(|d| phasematching_value(d, length)).collect())
}

#[inline]
pub fn phasematching_value(dbeta: f64, length: f64) -> Complex64 {
    let x = 0.5 * dbeta * length;
    Complex64::from_polar(sinc(x), x)
}

#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Central-difference step (rad/s) for the contour gradient.
pub const ANGLE_STEP: f64 = 1e11;

/// Partial derivatives (∂Δβ/∂ω_s, ∂Δβ/∂ω_i) at a point, s/m.
pub fn mismatch_gradient(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    omega_s: f64,
    omega_i: f64,
    nonlinear: NonlinearPhase,
) -> Result<(f64, f64)> {
    gradient_of(
        |s, i| phase_mismatch(fiber, pump, s, i, nonlinear),
        omega_s,
        omega_i,
        ANGLE_STEP,
    )
}

fn gradient_of(f: impl Fn(f64, f64) -> Result<f64>, s: f64, i: f64, h: f64) -> Result<(f64, f64)> {
    let ds = (f(s + h, i)? - f(s - h, i)?) / (2.0 * h);
    let di = (f(s, i + h)? - f(s, i - h)?) / (2.0 * h);
    Ok((ds, di))
}

/// Angle (degrees, in [0, 180)) between the Δβ = 0 level set through
/// `point` and the signal-frequency axis.
pub fn contour_angle(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    point: &PhaseMatchPoint,
    nonlinear: NonlinearPhase,
) -> Result<f64> {
    level_set_angle(
        |s, i| phase_mismatch(fiber, pump, s, i, nonlinear),
        point.signal_omega(),
        point.idler_omega(),
    )
}

/// Level-set angle of an arbitrary mismatch function of (ω_s, ω_i).
pub fn level_set_angle(f: impl Fn(f64, f64) -> Result<f64>, omega_s: f64, omega_i: f64) -> Result<f64> {
    let (ds, di) = gradient_of(f, omega_s, omega_i, ANGLE_STEP)?;
    angle_from_gradient(ds, di)
}

pub fn angle_from_gradient(ds: f64, di: f64) -> Result<f64> {
    if ds.abs() < 1e-20 && di.abs() < 1e-20 {
        return Err(Error::DegenerateGradient);
    }
    let deg = (-ds).atan2(di).to_degrees().rem_euclid(180.0);
    Ok(if deg >= 180.0 { 0.0 } else { deg })
}

/// Convenience: far-detuned phase-matched point for the pump centre.
pub fn operating_point(fiber: &FiberSpec, pump: &PumpSpec, nonlinear: NonlinearPhase) -> Result<PhaseMatchPoint> {
    let contour = solve_single_pump(fiber, pump, pump.center_wavelength(), nonlinear)?;
    contour.far_detuned().copied().ok_or_else(|| {
        Error::Data(format!(
            "no far-detuned phase matching for pump {:.3} nm",
            omega_to_nm(pump.center_omega())
        ))
    })
}
