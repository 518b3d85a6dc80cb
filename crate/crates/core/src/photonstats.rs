//! Counting statistics of a multimode pair source seen by threshold
//! detectors: estimators, closed forms and a partitioned Monte Carlo.
//!
//! Detection layout per pulse: each arm ends in a 50:50 splitter feeding two
//! threshold detectors (`s1, s2` and `i1, i2`). An arm "clicks" when either
//! of its detectors fires, which is equivalent to a single detector of the
//! arm's full efficiency. The signal arm heralds; the idler splitter gives
//! the heralded g².

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

/// Independent two-mode squeezed vacua, one per Schmidt mode, with thermal
/// marginals of mean `μ λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceStatModel {
    weights: Vec<f64>,
    mean_pairs: f64,
    eta_signal: f64,
    eta_idler: f64,
    rep_rate: f64,
    dark_probability: f64,
}

impl SourceStatModel {
    pub fn new(weights: Vec<f64>, mean_pairs: f64, eta_signal: f64, eta_idler: f64, rep_rate: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("schmidt_weights", "must be nonempty, finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("schmidt_weights", format!("must sum to 1, got {total}")));
        }
        if !(mean_pairs >= 0.0 && mean_pairs.is_finite()) {
            return Err(Error::invalid("mean_pairs", "must be >= 0"));
        }
        for (name, eta) in [("eta_signal", eta_signal), ("eta_idler", eta_idler)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {eta}")));
            }
        }
        if !(rep_rate > 0.0 && rep_rate.is_finite()) {
            return Err(Error::invalid("rep_rate", "must be > 0"));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(Self {
            weights,
            mean_pairs,
            eta_signal,
            eta_idler,
            rep_rate,
            dark_probability: 0.0,
        })
    }

    /// `k` equally weighted modes (K = k).
    pub fn equal_modes(k: usize, mean_pairs: f64, eta_signal: f64, eta_idler: f64, rep_rate: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k_modes", "must be >= 1"));
        }
        Self::new(vec![1.0 / k as f64; k], mean_pairs, eta_signal, eta_idler, rep_rate)
    }

    /// Per-detector, per-pulse dark click probability.
    pub fn with_dark_probability(mut self, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid("dark_probability", "must lie in [0, 1)"));
        }
        self.dark_probability = p;
        Ok(self)
    }

    pub fn with_mean_pairs(mut self, mean_pairs: f64) -> Result<Self> {
        if !(mean_pairs >= 0.0 && mean_pairs.is_finite()) {
            return Err(Error::invalid("mean_pairs", "must be >= 0"));
        }
        self.mean_pairs = mean_pairs;
        Ok(self)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn mean_pairs(&self) -> f64 {
        self.mean_pairs
    }
    pub fn eta(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Signal => self.eta_signal,
            Arm::Idler => self.eta_idler,
        }
    }
    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }
    pub fn dark_probability(&self) -> f64 {
        self.dark_probability
    }
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Click counts of a splitter pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SplitterCounts {
    pub d1: u64,
    pub d2: u64,
    pub both: u64,
}

impl SplitterCounts {
    fn add(&mut self, o: &Self) {
        self.d1 += o.d1;
        self.d2 += o.d2;
        self.both += o.both;
    }
}

/// Raw tallies over `pulses` trials. Integration time is `pulses / rep_rate`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CountingRecord {
    pub pulses: u64,
    pub rep_rate: f64,
    pub n_singles_signal: u64,
    pub n_singles_idler: u64,
    pub n_coincidences: u64,
    pub signal_splitter: SplitterCounts,
    pub idler_splitter: SplitterCounts,
    /// Herald (signal click) together with `i1`.
    pub n_herald_i1: u64,
    pub n_herald_i2: u64,
    /// Herald together with both `i1` and `i2`.
    pub n_triples: u64,
}

impl CountingRecord {
    pub fn integration_time(&self) -> f64 {
        self.pulses as f64 / self.rep_rate
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.n_coincidences as f64 / self.integration_time()
    }

    pub fn splitter(&self, arm: Arm) -> &SplitterCounts {
        match arm {
            Arm::Signal => &self.signal_splitter,
            Arm::Idler => &self.idler_splitter,
        }
    }

    /// Sums the tallies of independent runs at the same repetition rate.
    pub fn merge(&mut self, o: &Self) {
        self.pulses += o.pulses;
        if self.rep_rate == 0.0 {
            self.rep_rate = o.rep_rate;
        }
        self.n_singles_signal += o.n_singles_signal;
        self.n_singles_idler += o.n_singles_idler;
        self.n_coincidences += o.n_coincidences;
        self.signal_splitter.add(&o.signal_splitter);
        self.idler_splitter.add(&o.idler_splitter);
        self.n_herald_i1 += o.n_herald_i1;
        self.n_herald_i2 += o.n_herald_i2;
        self.n_triples += o.n_triples;
    }
}

fn ratio(num: f64, den: f64, quantity: &'static str, reason: &'static str) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::UndefinedRatio { quantity, reason })
    }
}

/// `N_si R_p / (N_s N_i)` with rates `N = counts / T_int`.
pub fn car(record: &CountingRecord) -> Result<f64> {
    let t = record.integration_time();
    let (ns, ni) = (record.n_singles_signal as f64 / t, record.n_singles_idler as f64 / t);
    let nsi = record.n_coincidences as f64 / t;
    ratio(nsi * record.rep_rate, ns * ni, "CAR", "zero singles in an arm")
}

/// `N_dc R_p T_int / (N_d1 N_d2)` on one arm's splitter, counts over T_int.
pub fn g2_marginal(record: &CountingRecord, arm: Arm) -> Result<f64> {
    let s = record.splitter(arm);
    let trials = record.rep_rate * record.integration_time();
    ratio(s.both as f64 * trials, s.d1 as f64 * s.d2 as f64, "marginal g2", "zero splitter singles")
}

/// `N_{h,i1,i2} N_h / (N_{h,i1} N_{h,i2})`, heralding on the signal arm.
pub fn g2_heralded(record: &CountingRecord) -> Result<f64> {
    if record.n_singles_signal == 0 {
        return Err(Error::UndefinedRatio {
            quantity: "heralded g2",
            reason: "no herald counts",
        });
    }
    ratio(
        record.n_triples as f64 * record.n_singles_signal as f64,
        record.n_herald_i1 as f64 * record.n_herald_i2 as f64,
        "heralded g2",
        "zero herald-idler coincidences",
    )
}

/// Per-pulse click probabilities from the generating function of the
/// multimode thermal source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClickProbabilities {
    pub signal: f64,
    pub idler: f64,
    pub coincidence: f64,
    pub signal_splitter: [f64; 3],
    pub idler_splitter: [f64; 3],
    pub herald_i1: f64,
    pub herald_i2: f64,
    pub triple: f64,
}

impl ClickProbabilities {
    pub fn car(&self) -> f64 {
        self.coincidence / (self.signal * self.idler)
    }
    pub fn g2_marginal(&self, arm: Arm) -> f64 {
        let s = match arm {
            Arm::Signal => self.signal_splitter,
            Arm::Idler => self.idler_splitter,
        };
        s[2] / (s[0] * s[1])
    }
    pub fn g2_heralded(&self) -> f64 {
        self.triple * self.signal / (self.herald_i1 * self.herald_i2)
    }
    pub fn coincidence_rate(&self, rep_rate: f64) -> f64 {
        self.coincidence * rep_rate
    }
}

// Detector slots: 0 = s1, 1 = s2, 2 = i1, 3 = i2.
const S1: u8 = 1;
const S2: u8 = 2;
const I1: u8 = 4;
const I2: u8 = 8;

/// Exact expectation of the click pattern probabilities.
///
/// For a set `S` of detectors, P(none in S fires) is
/// `(1−d)^|S| Π_k 1/(1 + μλ_k (1 − x_s x_i))` where `x_s`, `x_i` are the
/// per-photon survival probabilities past the signal and idler detectors
/// in `S`. Joint click probabilities follow by inclusion–exclusion.
pub fn click_probabilities(model: &SourceStatModel) -> ClickProbabilities {
    // ln P(none in S fires)
    let ln_none = |set: u8| -> f64 {
        let hs = 0.5 * model.eta_signal;
        let hi = 0.5 * model.eta_idler;
        let xs = 1.0 - hs * ((set & S1 != 0) as u8 as f64 + (set & S2 != 0) as u8 as f64);
        let xi = 1.0 - hi * ((set & I1 != 0) as u8 as f64 + (set & I2 != 0) as u8 as f64);
        let y = 1.0 - xs * xi;
        let vac: f64 = model.weights.iter().map(|w| -(model.mean_pairs * w * y).ln_1p()).sum();
        vac + set.count_ones() as f64 * (-model.dark_probability).ln_1p()
    };
    // P(at least one click in each group). The alternating sum of ones
    // vanishes, so summing expm1 terms keeps the cancellation at O(μ).
    let all_fire = |groups: &[u8]| -> f64 {
        let n = groups.len();
        let mut p = 0.0;
        for mask in 1u32..(1 << n) {
            let mut set = 0u8;
            for (g, &bits) in groups.iter().enumerate() {
                if mask & (1 << g) != 0 {
                    set |= bits;
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            p += sign * ln_none(set).exp_m1();
        }
        p
    };
    let s = S1 | S2;
    let i = I1 | I2;
    ClickProbabilities {
        signal: all_fire(&[s]),
        idler: all_fire(&[i]),
        coincidence: all_fire(&[s, i]),
        signal_splitter: [all_fire(&[S1]), all_fire(&[S2]), all_fire(&[S1, S2])],
        idler_splitter: [all_fire(&[I1]), all_fire(&[I2]), all_fire(&[I1, I2])],
        herald_i1: all_fire(&[s, I1]),
        herald_i2: all_fire(&[s, I2]),
        triple: all_fire(&[s, I1, I2]),
    }
}

/// Monte Carlo streams are split into this many partitions regardless of
/// thread count, so results depend only on the seed.
pub const PARTITIONS: u64 = 64;

/// Simulates `n_pulses` pulses. Partition `k` draws from a ChaCha8 stream
/// seeded by `seed` with stream id `k`; partitions are merged by summation.
pub fn simulate_counts(model: &SourceStatModel, n_pulses: u64, seed: u64, execution: Execution) -> Result<CountingRecord> {
    let parts = simulate_partitions(model, n_pulses, seed, execution)?;
    let mut total = CountingRecord {
        rep_rate: model.rep_rate,
        ..Default::default()
    };
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Per-partition records, e.g. for jackknife error bars.
pub fn simulate_partitions(
    model: &SourceStatModel,
    n_pulses: u64,
    seed: u64,
    execution: Execution,
) -> Result<Vec<CountingRecord>> {
    if n_pulses == 0 {
        return Err(Error::invalid("pulses", "must be >= 1"));
    }
    let base = n_pulses / PARTITIONS;
    let extra = n_pulses % PARTITIONS;
    Ok(exec::map_indexed(execution, PARTITIONS as usize, |k| {
        let k = k as u64;
        let pulses = base + u64::from(k < extra);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        simulate_partition(model, pulses, &mut rng)
    }))
}

fn simulate_partition(model: &SourceStatModel, pulses: u64, rng: &mut ChaCha8Rng) -> CountingRecord {
    let ratios: Vec<(f64, f64)> = model
        .weights
        .iter()
        .map(|w| model.mean_pairs * w)
        .filter(|m| *m > 0.0)
        .map(|m| {
            let r = m / (1.0 + m);
            (r, r.ln())
        })
        .collect();
    let dark = model.dark_probability;
    let mut rec = CountingRecord {
        pulses,
        rep_rate: model.rep_rate,
        ..Default::default()
    };

    for _ in 0..pulses {
        let mut n = 0u64;
        for &(r, ln_r) in &ratios {
            let u: f64 = rng.gen();
            // P(n ≥ j) = r^j; u < r is the rare branch
            if u < r {
                n += (u.ln() / ln_r).floor() as u64;
            }
        }
        let (mut s1, mut s2) = route(n, model.eta_signal, rng);
        let (mut i1, mut i2) = route(n, model.eta_idler, rng);
        if dark > 0.0 {
            s1 |= rng.gen::<f64>() < dark;
            s2 |= rng.gen::<f64>() < dark;
            i1 |= rng.gen::<f64>() < dark;
            i2 |= rng.gen::<f64>() < dark;
        }
        let s = s1 || s2;
        let i = i1 || i2;
        rec.n_singles_signal += s as u64;
        rec.n_singles_idler += i as u64;
        rec.n_coincidences += (s && i) as u64;
        rec.signal_splitter.d1 += s1 as u64;
        rec.signal_splitter.d2 += s2 as u64;
        rec.signal_splitter.both += (s1 && s2) as u64;
        rec.idler_splitter.d1 += i1 as u64;
        rec.idler_splitter.d2 += i2 as u64;
        rec.idler_splitter.both += (i1 && i2) as u64;
        rec.n_herald_i1 += (s && i1) as u64;
        rec.n_herald_i2 += (s && i2) as u64;
        rec.n_triples += (s && i1 && i2) as u64;
    }
    rec
}

/// Each of `n` photons survives with probability η and then takes either
/// splitter port with equal odds.
#[inline]
fn route(n: u64, eta: f64, rng: &mut ChaCha8Rng) -> (bool, bool) {
    let (mut a, mut b) = (false, false);
    for _ in 0..n {
        let u: f64 = rng.gen();
        if u < 0.5 * eta {
            a = true;
        } else if u < eta {
            b = true;
        }
    }
    (a, b)
}

/// Value with a jackknife standard error over partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Delete-one jackknife of a ratio estimator over partition records.
pub fn jackknife(parts: &[CountingRecord], estimator: impl Fn(&CountingRecord) -> Result<f64>) -> Result<Estimate> {
    if parts.len() < 2 {
        return Err(Error::invalid("partitions", "jackknife needs at least two"));
    }
    let mut total = CountingRecord::default();
    parts.iter().for_each(|p| total.merge(p));
    let value = estimator(&total)?;
    let n = parts.len() as f64;
    let mut leave_out = Vec::with_capacity(parts.len());
    for p in parts {
        let mut r = total;
        r.pulses -= p.pulses;
        r.n_singles_signal -= p.n_singles_signal;
        r.n_singles_idler -= p.n_singles_idler;
        r.n_coincidences -= p.n_coincidences;
        for (a, b) in [
            (&mut r.signal_splitter, &p.signal_splitter),
            (&mut r.idler_splitter, &p.idler_splitter),
        ] {
            a.d1 -= b.d1;
            a.d2 -= b.d2;
            a.both -= b.both;
        }
        r.n_herald_i1 -= p.n_herald_i1;
        r.n_herald_i2 -= p.n_herald_i2;
        r.n_triples -= p.n_triples;
        leave_out.push(estimator(&r)?);
    }
    let mean = leave_out.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok(Estimate {
        value,
        std_error: var.sqrt(),
    })
}

/// `μ = a P²` mapping from average pump power (W) to mean pairs per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCalibration {
    pub coefficient: f64,
}

impl PowerCalibration {
    /// Chooses `a` so the closed-form coincidence rate equals
    /// `target_rate` at `at_power`, for the model's weights and efficiencies.
    pub fn fit(model: &SourceStatModel, target_rate: f64, at_power: f64) -> Result<Self> {
        if !(target_rate > 0.0) || !(at_power > 0.0) {
            return Err(Error::invalid("calibration", "target rate and power must be > 0"));
        }
        let rate = |mu: f64| -> f64 {
            let m = model.clone().with_mean_pairs(mu).expect("nonnegative");
            click_probabilities(&m).coincidence_rate(model.rep_rate)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while rate(hi) < target_rate {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::invalid("calibration", "target coincidence rate unreachable"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) < target_rate {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        let mu = 0.5 * (lo + hi);
        Ok(Self {
            coefficient: mu / (at_power * at_power),
        })
    }

    pub fn mean_pairs(&self, power: f64) -> f64 {
        self.coefficient * power * power
    }
}

/// Reference calibration: 30 kC/s at 70 mW.
pub const REFERENCE_COINCIDENCE_RATE: f64 = 30e3;
pub const REFERENCE_POWER: f64 = 0.070;
