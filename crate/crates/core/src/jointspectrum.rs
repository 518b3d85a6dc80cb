//! Joint spectral amplitude synthesis and Schmidt analysis.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fiber::FiberSpec;
use crate::phasematch::{self, NonlinearPhase, PhaseMatchPoint, PumpSpec};
use crate::units::{nm_to_omega, SPEED_OF_LIGHT};

/// Uniform frequency grid over (ω_s, ω_i), rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    signal_axis: Vec<f64>,
    idler_axis: Vec<f64>,
}

impl SpectralGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(signal_axis: Vec<f64>, idler_axis: Vec<f64>) -> Result<Self> {
        check_axis("signal_axis", &signal_axis)?;
        check_axis("idler_axis", &idler_axis)?;
        Ok(Self {
            signal_axis,
            idler_axis,
        })
    }

    /// `n` points per axis spanning `center ± half_span`.
    pub fn centered(
        signal_center: f64,
        signal_half_span: f64,
        n_signal: usize,
        idler_center: f64,
        idler_half_span: f64,
        n_idler: usize,
    ) -> Result<Self> {
        Self::new(
            linspace(signal_center - signal_half_span, signal_center + signal_half_span, n_signal),
            linspace(idler_center - idler_half_span, idler_center + idler_half_span, n_idler),
        )
    }

    /// Grid uniform in frequency between the given wavelength limits (nm).
    pub fn from_wavelength_ranges(
        signal_nm: (f64, f64),
        idler_nm: (f64, f64),
        n_signal: usize,
        n_idler: usize,
    ) -> Result<Self> {
        let axis = |(a, b): (f64, f64), n| {
            let (wa, wb) = (nm_to_omega(a), nm_to_omega(b));
            linspace(wa.min(wb), wa.max(wb), n)
        };
        Self::new(axis(signal_nm, n_signal), axis(idler_nm, n_idler))
    }

    pub fn signal_axis(&self) -> &[f64] {
        &self.signal_axis
    }
    pub fn idler_axis(&self) -> &[f64] {
        &self.idler_axis
    }
    pub fn n_signal(&self) -> usize {
        self.signal_axis.len()
    }
    pub fn n_idler(&self) -> usize {
        self.idler_axis.len()
    }
    pub fn len(&self) -> usize {
        self.n_signal() * self.n_idler()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn signal_step(&self) -> f64 {
        step(&self.signal_axis)
    }
    pub fn idler_step(&self) -> f64 {
        step(&self.idler_axis)
    }
    /// Riemann cell weight Δω_s Δω_i.
    pub fn cell_area(&self) -> f64 {
        self.signal_step() * self.idler_step()
    }
    #[inline]
    pub fn index(&self, s: usize, i: usize) -> usize {
        s * self.n_idler() + i
    }
}

fn step(axis: &[f64]) -> f64 {
    (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a; n];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { b } else { a + h * k as f64 }).collect()
}

fn check_axis(name: &'static str, axis: &[f64]) -> Result<()> {
    if axis.len() < SpectralGrid::MIN_POINTS {
        return Err(Error::invalid(
            name,
            format!("need at least {} points, got {}", SpectralGrid::MIN_POINTS, axis.len()),
        ));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "must be finite and strictly increasing"));
    }
    let h = step(axis);
    for (k, w) in axis.windows(2).enumerate() {
        if ((w[1] - w[0]) - h).abs() > 1e-6 * h {
            return Err(Error::invalid(name, format!("not uniform at index {k}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Amplitude,
    Intensity,
}

/// Where a spectrum came from. Purity computed from a flat-phase estimate
/// is only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Model,
    FlatPhaseEstimate,
    Measured,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumValues {
    Amplitude(Vec<Complex64>),
    Intensity(Vec<f64>),
}

/// JSA or JSI sampled on a [`SpectralGrid`], signal-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectrum {
    grid: SpectralGrid,
    values: SpectrumValues,
    provenance: Provenance,
}

impl JointSpectrum {
    pub fn amplitude(grid: SpectralGrid, values: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "amplitude",
                format!("{} values for a {}x{} grid", values.len(), grid.n_signal(), grid.n_idler()),
            ));
        }
        Ok(Self {
            grid,
            values: SpectrumValues::Amplitude(values),
            provenance,
        })
    }

    pub fn intensity(grid: SpectralGrid, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "intensity",
                format!("{} values for a {}x{} grid", values.len(), grid.n_signal(), grid.n_idler()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::Data(format!("intensity entry {k} is negative or NaN")));
        }
        Ok(Self {
            grid,
            values: SpectrumValues::Intensity(values),
            provenance,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn values(&self) -> &SpectrumValues {
        &self.values
    }
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
    pub fn kind(&self) -> SpectrumKind {
        match self.values {
            SpectrumValues::Amplitude(_) => SpectrumKind::Amplitude,
            SpectrumValues::Intensity(_) => SpectrumKind::Intensity,
        }
    }

    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.values {
            SpectrumValues::Amplitude(v) => Some(v),
            SpectrumValues::Intensity(_) => None,
        }
    }

    /// |f|² for amplitudes, the values themselves for intensities.
    pub fn intensities(&self) -> Vec<f64> {
        match &self.values {
            SpectrumValues::Amplitude(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            SpectrumValues::Intensity(v) => v.clone(),
        }
    }

    /// Σ|f|² Δω_s Δω_i.
    pub fn norm_integral(&self) -> f64 {
        self.intensities().iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Major-axis orientation of the intensity distribution in the
    /// (ω_s, ω_i) plane, degrees in [0, 180), from second moments.
    pub fn principal_axis_angle(&self) -> Result<f64> {
        let w = self.intensities();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateInput);
        }
        let (xs, ys) = (self.grid.signal_axis(), self.grid.idler_axis());
        let (mut mx, mut my) = (0.0, 0.0);
        for s in 0..xs.len() {
            for i in 0..ys.len() {
                let p = w[self.grid.index(s, i)];
                mx += p * xs[s];
                my += p * ys[i];
            }
        }
        mx /= total;
        my /= total;
        let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
        for s in 0..xs.len() {
            let dx = xs[s] - mx;
            for i in 0..ys.len() {
                let p = w[self.grid.index(s, i)];
                let dy = ys[i] - my;
                cxx += p * dx * dx;
                cyy += p * dy * dy;
                cxy += p * dx * dy;
            }
        }
        let theta = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        Ok(theta.to_degrees().rem_euclid(180.0))
    }
}

/// How a pump width in nm is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthKind {
    /// Intensity full width at half maximum.
    FwhmIntensity,
    /// σ of the field amplitude, directly in nm.
    SigmaField,
}

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2 sqrt(2 ln 2)

/// Pump width in nm at `at_wavelength` (m) → σ_p in rad/s.
pub fn bandwidth_convert(value_nm: f64, kind: BandwidthKind, at_wavelength: f64) -> Result<f64> {
    if !(value_nm > 0.0 && value_nm.is_finite()) {
        return Err(Error::invalid("bandwidth", format!("must be > 0, got {value_nm}")));
    }
    if !(at_wavelength > 0.0) {
        return Err(Error::invalid("at_wavelength", "must be > 0"));
    }
    let sigma_nm = match kind {
        BandwidthKind::SigmaField => value_nm,
        BandwidthKind::FwhmIntensity => value_nm / FWHM_PER_SIGMA,
    };
    let jacobian = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (at_wavelength * at_wavelength);
    Ok(jacobian * sigma_nm * 1e-9)
}

/// Inverse of [`bandwidth_convert`].
pub fn bandwidth_to_nm(sigma_p: f64, kind: BandwidthKind, at_wavelength: f64) -> Result<f64> {
    if !(sigma_p > 0.0 && sigma_p.is_finite()) {
        return Err(Error::invalid("sigma_p", "must be > 0"));
    }
    let jacobian = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (at_wavelength * at_wavelength);
    let sigma_nm = sigma_p / jacobian * 1e9;
    Ok(match kind {
        BandwidthKind::SigmaField => sigma_nm,
        BandwidthKind::FwhmIntensity => sigma_nm * FWHM_PER_SIGMA,
    })
}

#[inline]
pub fn envelope_value(omega_s: f64, omega_i: f64, omega_p: f64, sigma_p: f64) -> f64 {
    let d = omega_s + omega_i - 2.0 * omega_p;
    (-d * d / (4.0 * sigma_p * sigma_p)).exp()
}

/// Gaussian pump envelope `exp[−(ω_s+ω_i−2ω_p)²/(4σ_p²)]` on the grid.
pub fn pump_envelope(pump: &PumpSpec, grid: &SpectralGrid) -> Result<JointSpectrum> {
    let wp = pump.center_omega();
    let sigma = pump.sigma_p();
    let sum_lo = grid.signal_axis()[0] + grid.idler_axis()[0] - 2.0 * wp;
    let sum_hi = grid.signal_axis()[grid.n_signal() - 1] + grid.idler_axis()[grid.n_idler() - 1] - 2.0 * wp;
    if sum_lo > -4.0 * sigma || sum_hi < 4.0 * sigma {
        return Err(Error::invalid(
            "grid",
            "ω_s + ω_i − 2ω_p must span at least ±4σ_p for the pump envelope",
        ));
    }
    let mut values = Vec::with_capacity(grid.len());
    for &ws in grid.signal_axis() {
        for &wi in grid.idler_axis() {
            values.push(Complex64::new(envelope_value(ws, wi, wp, sigma), 0.0));
        }
    }
    JointSpectrum::amplitude(grid.clone(), values, Provenance::Model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JsaOptions {
    pub nonlinear: NonlinearPhase,
    /// When false, α ≡ 1 and the JSA reduces to the phase-matching function.
    pub pump_envelope: bool,
    pub execution: Execution,
}

impl Default for JsaOptions {
    fn default() -> Self {
        Self {
            nonlinear: NonlinearPhase::Neglect,
            pump_envelope: true,
            execution: Execution::default(),
        }
    }
}

/// `f = α(ω_s+ω_i) φ(ω_s, ω_i)`, normalized to Σ|f|² Δω_s Δω_i = 1.
pub fn build_jsa(fiber: &FiberSpec, pump: &PumpSpec, grid: &SpectralGrid, options: JsaOptions) -> Result<JointSpectrum> {
    let phi = phasematch::phasematching_function(fiber, pump, grid, options.nonlinear, options.execution)?;
    let values = if options.pump_envelope {
        let alpha = pump_envelope(pump, grid)?;
        let alpha = alpha.amplitudes().expect("envelope is an amplitude");
        phi.iter().zip(alpha).map(|(p, a)| p * a).collect()
    } else {
        phi
    };
    normalized_amplitude(grid.clone(), values, Provenance::Model)
}

/// Coherent sum over concatenated fiber segments, each contributing
/// `L_k sinc(Δβ_k L_k/2) exp(iΔβ_k L_k/2)` times the phase accumulated in
/// the preceding segments.
pub fn build_jsa_segmented(
    segments: &[FiberSpec],
    pump: &PumpSpec,
    grid: &SpectralGrid,
    options: JsaOptions,
) -> Result<JointSpectrum> {
    if segments.is_empty() {
        return Err(Error::invalid("segments", "must not be empty"));
    }
    let mut total = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut phase = vec![0.0f64; grid.len()];
    for seg in segments {
        let dbeta = phasematch::mismatch_on_grid(seg, pump, grid, options.nonlinear, options.execution)?;
        let l = seg.length();
        for k in 0..grid.len() {
            total[k] += Complex64::from_polar(l, phase[k]) * phasematch::phasematching_value(dbeta[k], l);
            phase[k] += dbeta[k] * l;
        }
    }
    if options.pump_envelope {
        let alpha = pump_envelope(pump, grid)?;
        for (t, a) in total.iter_mut().zip(alpha.amplitudes().unwrap()) {
            *t *= a;
        }
    }
    normalized_amplitude(grid.clone(), total, Provenance::Model)
}

fn normalized_amplitude(grid: SpectralGrid, mut values: Vec<Complex64>, provenance: Provenance) -> Result<JointSpectrum> {
    let norm: f64 = values.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.cell_area();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateInput);
    }
    let scale = norm.sqrt().recip();
    values.iter_mut().for_each(|c| *c *= scale);
    JointSpectrum::amplitude(grid, values, provenance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtResult {
    /// Schmidt weights λ_k (squared singular values), descending, Σλ_k = 1.
    pub weights: Vec<f64>,
    pub schmidt_number: f64,
    pub purity: f64,
    /// Weights above 1e-12.
    pub mode_count: usize,
    /// True when the input was a flat-phase estimate.
    pub upper_bound: bool,
}

/// Schmidt decomposition through the SVD of `f √(Δω_s Δω_i)`.
pub fn schmidt_analyze(js: &JointSpectrum) -> Result<SchmidtResult> {
    let amps = js
        .amplitudes()
        .ok_or_else(|| Error::invalid("joint_spectrum", "Schmidt analysis needs an amplitude; use jsa_from_jsi"))?;
    let grid = js.grid();
    let w = grid.cell_area().sqrt();
    let m = DMatrix::from_fn(grid.n_signal(), grid.n_idler(), |s, i| amps[grid.index(s, i)] * w);
    let singular = m.singular_values();
    schmidt_from_singular_values(singular.iter().copied(), js.provenance() == Provenance::FlatPhaseEstimate)
}

pub(crate) fn schmidt_from_singular_values(
    singular: impl Iterator<Item = f64>,
    upper_bound: bool,
) -> Result<SchmidtResult> {
    let mut weights: Vec<f64> = singular.map(|s| s * s).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateInput);
    }
    weights.iter_mut().for_each(|l| *l /= total);
    weights.sort_by(|a, b| b.total_cmp(a));
    let purity: f64 = weights.iter().map(|l| l * l).sum();
    Ok(SchmidtResult {
        mode_count: weights.iter().filter(|&&l| l > 1e-12).count(),
        schmidt_number: 1.0 / purity,
        purity,
        weights,
        upper_bound,
    })
}

/// Flat-phase JSA estimate `√JSI`, normalized.
pub fn jsa_from_jsi(js: &JointSpectrum) -> Result<JointSpectrum> {
    let values = match js.values() {
        SpectrumValues::Intensity(v) => v,
        SpectrumValues::Amplitude(_) => {
            return Err(Error::invalid("joint_spectrum", "expected an intensity"));
        }
    };
    if let Some(k) = values.iter().position(|v| !(*v >= 0.0)) {
        return Err(Error::Data(format!("intensity entry {k} is negative or NaN")));
    }
    let amps = values.iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect();
    normalized_amplitude(js.grid().clone(), amps, Provenance::FlatPhaseEstimate)
}

/// Per-cell grid sizing for sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPolicy {
    pub points: usize,
    /// Half-span in units of σ_p.
    pub pump_sigmas: f64,
    /// Half-span in sinc main-lobe half-widths `2π/(L |∂Δβ/∂ω|)`.
    pub sinc_lobes: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self {
            points: 256,
            pump_sigmas: 6.0,
            sinc_lobes: 4.0,
        }
    }
}

impl GridPolicy {
    pub fn with_points(points: usize) -> Self {
        Self {
            points,
            ..Self::default()
        }
    }

    /// Grid centred on the phase-matched point `center`, with the mismatch
    /// gradient `(ds, di)` there.
    pub fn grid_for(&self, center: &PhaseMatchPoint, gradient: (f64, f64), length: f64, sigma_p: f64) -> Result<SpectralGrid> {
        let pump_span = self.pump_sigmas * sigma_p;
        let lobe = |g: f64| {
            if g.abs() > 0.0 {
                self.sinc_lobes * 2.0 * std::f64::consts::PI / (length * g.abs())
            } else {
                f64::INFINITY
            }
        };
        let mut hs = pump_span.max(lobe(gradient.0));
        let mut hi = pump_span.max(lobe(gradient.1));
        // along an axis the phase matching barely constrains, the pump ridge
        // still bounds the support to within the other axis' span plus the ridge width
        hs = hs.min(hi + pump_span);
        hi = hi.min(hs + pump_span);
        SpectralGrid::centered(
            center.signal_omega(),
            hs,
            self.points,
            center.idler_omega(),
            hi,
            self.points,
        )
    }
}

/// Auto-scaled grid for one (fiber, pump) pair.
pub fn auto_grid(fiber: &FiberSpec, pump: &PumpSpec, policy: &GridPolicy, nonlinear: NonlinearPhase) -> Result<SpectralGrid> {
    let center = phasematch::operating_point(fiber, pump, nonlinear)?;
    let gradient = phasematch::mismatch_gradient(fiber, pump, center.signal_omega(), center.idler_omega(), nonlinear)?;
    policy.grid_for(&center, gradient, fiber.length(), pump.sigma_p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PuritySweep {
    pub lengths: Vec<f64>,
    pub bandwidths_nm: Vec<f64>,
    pub bandwidth_kind: BandwidthKind,
    /// Length-major; `None` where the cell failed.
    pub purity: Vec<Option<f64>>,
}

impl PuritySweep {
    pub fn get(&self, length_idx: usize, bandwidth_idx: usize) -> Option<f64> {
        self.purity[length_idx * self.bandwidths_nm.len() + bandwidth_idx]
    }

    /// (length, bandwidth_nm, purity) of the best cell.
    pub fn maximum(&self) -> Option<(f64, f64, f64)> {
        let nb = self.bandwidths_nm.len();
        self.purity
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.map(|p| (k, p)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, p)| (self.lengths[k / nb], self.bandwidths_nm[k % nb], p))
    }
}

/// Purity over a (length × bandwidth) landscape; cells run independently.
pub fn purity_sweep(
    fiber: &FiberSpec,
    pump: &PumpSpec,
    lengths: &[f64],
    bandwidths_nm: &[f64],
    kind: BandwidthKind,
    policy: &GridPolicy,
    options: JsaOptions,
) -> Result<PuritySweep> {
    if lengths.is_empty() {
        return Err(Error::invalid("lengths", "must not be empty"));
    }
    if bandwidths_nm.is_empty() {
        return Err(Error::invalid("bandwidths", "must not be empty"));
    }
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::invalid("lengths", format!("must be > 0, got {l}")));
    }
    let center = phasematch::operating_point(fiber, pump, options.nonlinear)?;
    let gradient = phasematch::mismatch_gradient(
        fiber,
        pump,
        center.signal_omega(),
        center.idler_omega(),
        options.nonlinear,
    )?;
    let nb = bandwidths_nm.len();
    let cell_options = JsaOptions {
        execution: Execution::Sequential,
        ..options
    };
    let purity = exec::map_indexed(options.execution, lengths.len() * nb, |k| {
        let cell = || -> Result<f64> {
            let f = fiber.with_length(lengths[k / nb])?;
            let sigma = bandwidth_convert(bandwidths_nm[k % nb], kind, pump.center_wavelength())?;
            let p = pump.with_sigma(sigma)?;
            let grid = policy.grid_for(&center, gradient, f.length(), sigma)?;
            let jsa = build_jsa(&f, &p, &grid, cell_options)?;
            Ok(schmidt_analyze(&jsa)?.purity)
        };
        cell().ok()
    });
    Ok(PuritySweep {
        lengths: lengths.to_vec(),
        bandwidths_nm: bandwidths_nm.to_vec(),
        bandwidth_kind: kind,
        purity,
    })
}
