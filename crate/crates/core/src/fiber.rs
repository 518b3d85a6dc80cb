//! Step-index fiber dispersion and birefringence.
//!
//! The effective index of the fundamental mode comes from the weakly-guiding
//! scalar LP01 characteristic equation
//!
//! ```text
//! U J1(U) / J0(U) = W K1(W) / K0(W),   U = V sqrt(1 - b),  W = V sqrt(b)
//! ```
//!
//! with `V = 2π a NA / λ` and `n_eff² = n_clad² + b NA²`. The cladding is
//! fused silica (three-term Sellmeier) or a user-supplied index table, and
//! the core index follows from `n_core² = n_clad² + NA²`. Birefringence is a
//! wavelength-independent offset added to the slow axis.

use puruspe::{Jn, Kn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{omega_to_wavelength, MICROMETRE, NANOMETRE, SPEED_OF_LIGHT};

/// Validity window of the dispersion model (m).
pub const WINDOW_MIN: f64 = 0.4 * MICROMETRE;
pub const WINDOW_MAX: f64 = 2.0 * MICROMETRE;

/// First zero of J0; LP01 requires U below it.
const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

const SELLMEIER_B: [f64; 3] = [0.696_166_3, 0.407_942_6, 0.897_479_4];
/// Resonance wavelengths squared (µm²).
const SELLMEIER_C: [f64; 3] = [
    0.068_404_3 * 0.068_404_3,
    0.116_241_4 * 0.116_241_4,
    9.896_161 * 9.896_161,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarizationAxis {
    Slow,
    Fast,
}

/// Cladding index model.
#[derive(Debug, Clone, PartialEq)]
pub enum CladdingModel {
    FusedSilicaSellmeier,
    UserTable(IndexTable),
}

/// Tabulated bulk index, interpolated by a natural cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    wavelengths: Vec<f64>,
    indices: Vec<f64>,
    second_derivs: Vec<f64>,
}

impl IndexTable {
    /// `wavelengths` in metres, strictly increasing, at least four points.
    pub fn new(wavelengths: Vec<f64>, indices: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != indices.len() {
            return Err(Error::invalid(
                "index_table",
                format!("{} wavelengths vs {} indices", wavelengths.len(), indices.len()),
            ));
        }
        if wavelengths.len() < 4 {
            return Err(Error::invalid("index_table", "need at least 4 points"));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("index_table", "wavelengths must be strictly increasing"));
        }
        if indices.iter().any(|&n| !(n > 1.0 && n.is_finite())) {
            return Err(Error::invalid("index_table", "indices must be finite and > 1"));
        }
        let second_derivs = natural_spline_second_derivs(&wavelengths, &indices);
        Ok(Self {
            wavelengths,
            indices,
            second_derivs,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths[0], *self.wavelengths.last().unwrap())
    }

    /// Index and dn/dλ at `wavelength`, which must lie inside the table.
    fn eval(&self, wavelength: f64) -> (f64, f64) {
        let x = &self.wavelengths;
        let y = &self.indices;
        let m = &self.second_derivs;
        let k = match x.partition_point(|&v| v <= wavelength) {
            0 => 0,
            p if p >= x.len() => x.len() - 2,
            p => p - 1,
        };
        let h = x[k + 1] - x[k];
        let a = (x[k + 1] - wavelength) / h;
        let b = (wavelength - x[k]) / h;
        let value = a * y[k] + b * y[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0;
        let slope = (y[k + 1] - y[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m[k]
            + (3.0 * b * b - 1.0) / 6.0 * h * m[k + 1];
        (value, slope)
    }
}

fn natural_spline_second_derivs(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    m[n - 1] = 0.0;
    for i in (0..n - 1).rev() {
        m[i] = m[i] * m[i + 1] + u[i];
    }
    m
}

/// Fused-silica bulk index and its wavelength derivative (per metre).
pub fn fused_silica_index(wavelength: f64) -> (f64, f64) {
    let lam = wavelength / MICROMETRE;
    let l2 = lam * lam;
    let mut n2 = 1.0;
    let mut dn2 = 0.0;
    for (b, c) in SELLMEIER_B.iter().zip(SELLMEIER_C.iter()) {
        let den = l2 - c;
        n2 += b * l2 / den;
        dn2 += -2.0 * b * c * lam / (den * den);
    }
    let n = n2.sqrt();
    (n, dn2 / (2.0 * n) / MICROMETRE)
}

/// Geometry, index model, birefringence and nonlinearity of a fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSpec {
    core_radius: f64,
    numerical_aperture: f64,
    cladding: CladdingModel,
    birefringence_dn: f64,
    gamma: f64,
    length: f64,
}

impl FiberSpec {
    pub fn new(
        core_radius: f64,
        numerical_aperture: f64,
        cladding: CladdingModel,
        birefringence_dn: f64,
        gamma: f64,
        length: f64,
    ) -> Result<Self> {
        if !(core_radius > 0.0 && core_radius.is_finite()) {
            return Err(Error::invalid("core_radius", format!("must be > 0, got {core_radius}")));
        }
        if !(numerical_aperture > 0.0 && numerical_aperture < 1.0) {
            return Err(Error::invalid(
                "numerical_aperture",
                format!("must lie in (0, 1), got {numerical_aperture}"),
            ));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("length", format!("must be > 0, got {length}")));
        }
        if !(birefringence_dn >= 0.0 && birefringence_dn.is_finite()) {
            return Err(Error::invalid(
                "birefringence_dn",
                format!("must be >= 0, got {birefringence_dn}"),
            ));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")));
        }
        Ok(Self {
            core_radius,
            numerical_aperture,
            cladding,
            birefringence_dn,
            gamma,
            length,
        })
    }

    /// PM980-XP: 5.5 µm core diameter, NA 0.12, Δn = 3.571e-4,
    /// γ = 5 /(W km), 9 cm.
    pub fn pm980xp() -> Self {
        Self::new(
            2.75 * MICROMETRE,
            0.12,
            CladdingModel::FusedSilicaSellmeier,
            3.571e-4,
            5e-3,
            0.09,
        )
        .expect("built-in profile is valid")
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }
    pub fn numerical_aperture(&self) -> f64 {
        self.numerical_aperture
    }
    pub fn cladding(&self) -> &CladdingModel {
        &self.cladding
    }
    pub fn birefringence_dn(&self) -> f64 {
        self.birefringence_dn
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        let mut out = self.clone();
        out.length = length;
        Self::new(
            out.core_radius,
            out.numerical_aperture,
            out.cladding,
            out.birefringence_dn,
            out.gamma,
            out.length,
        )
    }

    pub fn with_birefringence(&self, dn: f64) -> Result<Self> {
        Self::new(
            self.core_radius,
            self.numerical_aperture,
            self.cladding.clone(),
            dn,
            self.gamma,
            self.length,
        )
    }

    /// Wavelength range (m) over which indices are defined.
    pub fn window(&self) -> (f64, f64) {
        match &self.cladding {
            CladdingModel::FusedSilicaSellmeier => (WINDOW_MIN, WINDOW_MAX),
            CladdingModel::UserTable(t) => {
                let (lo, hi) = t.range();
                (lo.max(WINDOW_MIN), hi.min(WINDOW_MAX))
            }
        }
    }

    fn check_window(&self, wavelength: f64) -> Result<()> {
        let (lo, hi) = self.window();
        // allow rounding slop from nm → m conversions at the edges
        let slack = 1e-12 * hi;
        if wavelength.is_finite() && wavelength >= lo - slack && wavelength <= hi + slack {
            Ok(())
        } else {
            Err(Error::Domain {
                wavelength_nm: wavelength / NANOMETRE,
                min_nm: lo / NANOMETRE,
                max_nm: hi / NANOMETRE,
            })
        }
    }

    /// Cladding index and dn/dλ, unchecked.
    fn cladding_with_slope(&self, wavelength: f64) -> (f64, f64) {
        match &self.cladding {
            CladdingModel::FusedSilicaSellmeier => fused_silica_index(wavelength),
            CladdingModel::UserTable(t) => t.eval(wavelength),
        }
    }

    pub fn cladding_index(&self, wavelength: f64) -> Result<f64> {
        self.check_window(wavelength)?;
        Ok(self.cladding_with_slope(wavelength).0)
    }

    pub fn core_index(&self, wavelength: f64) -> Result<f64> {
        let n = self.cladding_index(wavelength)?;
        Ok((n * n + self.numerical_aperture * self.numerical_aperture).sqrt())
    }

    pub fn v_number(&self, wavelength: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.core_radius * self.numerical_aperture / wavelength
    }

    fn axis_offset(&self, axis: PolarizationAxis) -> f64 {
        match axis {
            PolarizationAxis::Slow => self.birefringence_dn,
            PolarizationAxis::Fast => 0.0,
        }
    }

    /// Effective index of the fundamental mode on `axis`.
    pub fn refractive_index(&self, wavelength: f64, axis: PolarizationAxis) -> Result<f64> {
        Ok(self.mode_at(wavelength)?.n_eff + self.axis_offset(axis))
    }

    /// Group index `n - λ dn/dλ` from the implicit derivative of the
    /// characteristic equation.
    pub fn group_index(&self, wavelength: f64, axis: PolarizationAxis) -> Result<f64> {
        let m = self.mode_at(wavelength)?;
        Ok(m.n_eff - wavelength * m.dn_dlambda + self.axis_offset(axis))
    }

    /// β = (ω/c) n(ω, axis), rad/m.
    pub fn propagation_constant(&self, omega: f64, axis: PolarizationAxis) -> Result<f64> {
        let n = self.refractive_index(omega_to_wavelength(omega), axis)?;
        Ok(omega / SPEED_OF_LIGHT * n)
    }

    /// dβ/dω, s/m.
    pub fn inverse_group_velocity(&self, omega: f64, axis: PolarizationAxis) -> Result<f64> {
        Ok(self.group_index(omega_to_wavelength(omega), axis)? / SPEED_OF_LIGHT)
    }

    fn mode_at(&self, wavelength: f64) -> Result<ModeSolution> {
        self.check_window(wavelength)?;
        let (n_clad, dn_clad) = self.cladding_with_slope(wavelength);
        let v = self.v_number(wavelength);
        let root = solve_lp01(v).ok_or(Error::ModeCutoff {
            wavelength_nm: wavelength / NANOMETRE,
            v_number: v,
        })?;
        let na2 = self.numerical_aperture * self.numerical_aperture;
        let n_eff = (n_clad * n_clad + root.b * na2).sqrt();
        // dV/dλ = -V/λ
        let db_dlambda = root.db_dv * (-v / wavelength);
        let dn_dlambda = (2.0 * n_clad * dn_clad + na2 * db_dlambda) / (2.0 * n_eff);
        Ok(ModeSolution { n_eff, dn_dlambda })
    }
}

struct ModeSolution {
    n_eff: f64,
    dn_dlambda: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Lp01Root {
    pub b: f64,
    pub db_dv: f64,
}

struct CharEval {
    f: f64,
    u: f64,
    w: f64,
    jr: f64,
    kr: f64,
}

fn characteristic(v: f64, b: f64) -> CharEval {
    let u = v * (1.0 - b).sqrt();
    let w = v * b.sqrt();
    let jr = Jn(1, u) / Jn(0, u);
    let kr = Kn(1, w) / Kn(0, w);
    CharEval {
        f: u * jr - w * kr,
        u,
        w,
        jr,
        kr,
    }
}

/// Normalized propagation constant `b` of LP01 for normalized frequency `v`.
///
/// The characteristic function decreases monotonically in `b` on the LP01
/// branch, so a sign-change bracket is bisected down to 1e-6 and then
/// polished with bracket-safeguarded Newton steps to below 1e-12.
pub(crate) fn solve_lp01(v: f64) -> Option<Lp01Root> {
    if !(v > 0.0 && v.is_finite()) {
        return None;
    }
    let cutoff = 1.0 - (J0_FIRST_ZERO / v).powi(2);
    let mut lo = cutoff.max(0.0) + 1e-14;
    let mut hi = 1.0 - 1e-14;
    let f_lo = characteristic(v, lo).f;
    let f_hi = characteristic(v, hi).f;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return None;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if characteristic(v, mid).f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    let mut eval = characteristic(v, b);
    for _ in 0..50 {
        let dfdb = -0.5 * v * v * (eval.jr * eval.jr + eval.kr * eval.kr);
        if eval.f > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let mut next = b - eval.f / dfdb;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - b).abs();
        b = next;
        eval = characteristic(v, b);
        if step < 1e-15 || eval.f == 0.0 {
            break;
        }
    }
    if !(b > 0.0 && b < 1.0) {
        return None;
    }
    let dfdb = -0.5 * v * v * (eval.jr * eval.jr + eval.kr * eval.kr);
    let dfdv = (eval.u * eval.u * (1.0 + eval.jr * eval.jr) - eval.w * eval.w * (eval.kr * eval.kr - 1.0)) / v;
    Some(Lp01Root {
        b,
        db_dv: -dfdv / dfdb,
    })
}

/// Polarization-interference spectrum transmitted through a fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeTrace {
    wavelengths: Vec<f64>,
    intensities: Vec<f64>,
    fiber_length: f64,
}

impl FringeTrace {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(wavelengths: Vec<f64>, intensities: Vec<f64>, fiber_length: f64) -> Result<Self> {
        if wavelengths.len() != intensities.len() {
            return Err(Error::invalid(
                "fringe_trace",
                format!("{} wavelengths vs {} intensities", wavelengths.len(), intensities.len()),
            ));
        }
        if wavelengths.len() < Self::MIN_SAMPLES {
            return Err(Error::invalid(
                "fringe_trace",
                format!("need at least {} samples, got {}", Self::MIN_SAMPLES, wavelengths.len()),
            ));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("fringe_trace", "wavelengths must be strictly increasing"));
        }
        if intensities.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fringe_trace", "intensities must be finite"));
        }
        if !(fiber_length > 0.0) {
            return Err(Error::invalid("fiber_length", "must be > 0"));
        }
        Ok(Self {
            wavelengths,
            intensities,
            fiber_length,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }
    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }
    pub fn fiber_length(&self) -> f64 {
        self.fiber_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirefringenceEstimate {
    pub dn: f64,
    pub uncertainty: f64,
    /// Mean peak-to-peak spacing (m).
    pub fringe_spacing: f64,
    /// Geometric mean of the first and last peak (m).
    pub center_wavelength: f64,
    pub peaks: usize,
}

const SMOOTHING_WINDOW: usize = 5;

/// Δn = λ₀² / (L δλ) from the mean fringe spacing of `trace`.
pub fn birefringence_from_fringes(trace: &FringeTrace) -> Result<BirefringenceEstimate> {
    let smoothed = moving_average(&trace.intensities, SMOOTHING_WINDOW);
    let mean = smoothed.iter().sum::<f64>() / smoothed.len() as f64;
    let x = &trace.wavelengths;

    let mut peaks = Vec::new();
    for i in 1..smoothed.len() - 1 {
        let (l, c, r) = (smoothed[i - 1], smoothed[i], smoothed[i + 1]);
        if c > l && c >= r && c > mean {
            // three-point parabolic refinement
            let denom = l - 2.0 * c + r;
            let shift = if denom < 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
            let pos = if shift >= 0.0 {
                x[i] + shift * (x[i + 1] - x[i])
            } else {
                x[i] + shift * (x[i] - x[i - 1])
            };
            peaks.push(pos);
        }
    }
    if peaks.len() < 3 {
        return Err(Error::InsufficientFringes { found: peaks.len() });
    }

    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let spacing = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - spacing).powi(2)).sum::<f64>() / (gaps.len() as f64 - 1.0).max(1.0);
    // geometric centre of the peak span: peaks sit at λ_m = ΔnL/m, for which
    // λ_first λ_last / mean gap = ΔnL exactly
    let center = (peaks[0] * peaks[peaks.len() - 1]).sqrt();
    let dn = center * center / (trace.fiber_length * spacing);
    Ok(BirefringenceEstimate {
        dn,
        uncertainty: dn * var.sqrt() / spacing,
        fringe_spacing: spacing,
        center_wavelength: center,
        peaks: peaks.len(),
    })
}

/// Centered moving average; the window shrinks at the edges.
fn moving_average(data: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..data.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(data.len());
            data[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
