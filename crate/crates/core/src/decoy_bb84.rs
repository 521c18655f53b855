//! Two-decoy (vacuum + weak) BB84 over fiber with a seed-quality penalty on
//! privacy amplification.
//!
//! Channel: weak coherent pulses, transmittance
//! `eta = eta_det * 10^(-attenuation * distance / 10)`, background yield `Y0`
//! and misalignment `e_d`. Yields are asymptotic; finite-size effects enter
//! only through the privacy-amplification terms of the key-length budget.

use crate::bounds::{KeyLengthBudget, SecurityParams};
use crate::entropy::SeedQuality;
use crate::error::{invalid, Error, Result};

/// Error rate of a random outcome.
pub const E0: f64 = 0.5;

const MAX_ITERATIONS: usize = 1000;
const FIXED_POINT_TOLERANCE: f64 = 1e-9;
const CRITICAL_RESOLUTION: f64 = 1e-4;

/// Average min-entropy per bit of common random number generators.
const TABLE1: [(&str, f64); 4] = [
    ("IDQ Quantis-PCIe-40M", 0.990),
    ("MATLAB unifrnd", 0.988),
    ("Random.org", 0.931),
    ("Intel DRNG", 0.930),
];

pub fn table1_presets() -> &'static [(&'static str, f64)] {
    &TABLE1
}

pub fn preset(name: &str) -> Result<f64> {
    TABLE1
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, h)| *h)
        .ok_or_else(|| Error::NotFound(format!("no preset named `{name}`")))
}

fn probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        invalid(format!("{name} = {v} is not a probability"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Fiber loss in dB/km.
    pub attenuation: f64,
    pub distance_km: f64,
    pub detector_efficiency: f64,
    /// Background (dark count) probability per pulse, `Y0`.
    pub dark_count_prob: f64,
    /// Optical misalignment error, `e_d`.
    pub misalignment: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            attenuation: 0.2,
            distance_km: 0.0,
            detector_efficiency: 0.1,
            dark_count_prob: 1e-5,
            misalignment: 0.01,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.attenuation >= 0.0 && self.attenuation.is_finite()) {
            return invalid(format!(
                "attenuation {} must be non-negative",
                self.attenuation
            ));
        }
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return invalid(format!(
                "distance {} must be non-negative",
                self.distance_km
            ));
        }
        probability("detector_efficiency", self.detector_efficiency)?;
        probability("dark_count_prob", self.dark_count_prob)?;
        probability("misalignment", self.misalignment)
    }

    pub fn at_distance(&self, distance_km: f64) -> Self {
        Self {
            distance_km,
            ..*self
        }
    }

    /// Overall transmittance including detection.
    pub fn eta(&self) -> f64 {
        self.detector_efficiency * 10f64.powf(-self.attenuation * self.distance_km / 10.0)
    }
}

/// Gain `Q` and error rate `E` at one intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
}

pub fn gain_qber(ch: &ChannelModel, intensity: f64) -> Result<GainQber> {
    ch.validate()?;
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return invalid(format!("intensity {intensity} must be non-negative"));
    }
    let y0 = ch.dark_count_prob;
    let detect = -(-ch.eta() * intensity).exp_m1();
    let gain = y0 + detect;
    let qber = if gain > 0.0 {
        (E0 * y0 + ch.misalignment * detect) / gain
    } else {
        E0
    };
    Ok(GainQber { gain, qber })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Signal mean photon number.
    pub mu: f64,
    /// Weak decoy mean photon number.
    pub nu: f64,
    pub pulse_count: f64,
    pub p_signal: f64,
    pub p_weak: f64,
    pub p_vacuum: f64,
    /// Fraction of signal detections kept after basis sifting.
    pub sifting_factor: f64,
    /// Error-correction inefficiency `f >= 1`.
    pub ec_efficiency: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            nu: 0.1,
            pulse_count: 1e10,
            p_signal: 0.8,
            p_weak: 0.1,
            p_vacuum: 0.1,
            sifting_factor: 0.5,
            ec_efficiency: 1.16,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < self.mu && self.mu.is_finite()) {
            return invalid(format!(
                "need 0 < nu < mu, got mu={}, nu={}",
                self.mu, self.nu
            ));
        }
        if !(self.pulse_count >= 1.0 && self.pulse_count.is_finite()) {
            return invalid(format!(
                "pulse count {} must be at least 1",
                self.pulse_count
            ));
        }
        probability("p_signal", self.p_signal)?;
        probability("p_weak", self.p_weak)?;
        probability("p_vacuum", self.p_vacuum)?;
        let total = self.p_signal + self.p_weak + self.p_vacuum;
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("intensity probabilities sum to {total}"));
        }
        probability("sifting_factor", self.sifting_factor)?;
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            return invalid(format!(
                "error-correction efficiency {} must be >= 1",
                self.ec_efficiency
            ));
        }
        Ok(())
    }
}

/// Single-photon yield and error bounds from vacuum + weak decoys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoyEstimate {
    pub y1_lower: f64,
    pub e1_upper: f64,
    /// Single-photon gain at the signal intensity, `Y1 mu e^-mu`.
    pub q1: f64,
}

impl DecoyEstimate {
    /// False when no single-photon detections can be certified.
    pub fn has_single_photons(&self) -> bool {
        self.y1_lower > 0.0
    }
}

pub fn decoy_estimates(
    q_mu: f64,
    e_mu: f64,
    q_nu: f64,
    e_nu: f64,
    q_vac: f64,
    mu: f64,
    nu: f64,
) -> Result<DecoyEstimate> {
    if !(nu > 0.0 && nu < mu) {
        return invalid(format!("need 0 < nu < mu, got mu={mu}, nu={nu}"));
    }
    for (name, v) in [
        ("Q_mu", q_mu),
        ("E_mu", e_mu),
        ("Q_nu", q_nu),
        ("E_nu", e_nu),
        ("Q_vac", q_vac),
    ] {
        probability(name, v)?;
    }
    let y0 = q_vac;
    let y1 = mu / (mu * nu - nu * nu)
        * (q_nu * nu.exp()
            - q_mu * mu.exp() * (nu * nu) / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * y0);
    let y1_lower = y1.clamp(0.0, 1.0);
    let e1_upper = if y1_lower > 0.0 {
        ((e_nu * q_nu * nu.exp() - E0 * y0) / (y1_lower * nu)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecoyEstimate {
        y1_lower,
        e1_upper,
        q1: y1_lower * mu * (-mu).exp(),
    })
}

/// Binary entropy in bits; zero at the endpoints.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub distance_km: f64,
    pub h_avg: f64,
    pub signal: GainQber,
    pub weak: GainQber,
    pub vacuum: GainQber,
    pub y1_lower: f64,
    pub e1_upper: f64,
    pub q1: f64,
    /// Sifted (and error-corrected) key length, the hash input length.
    pub n_sift: f64,
    pub n_single: f64,
    pub hmin: f64,
    pub leak_ec: f64,
    /// Converged real-valued key length before flooring.
    pub raw_key_len: f64,
    pub key_len: u64,
    pub skr: f64,
    pub seed_alpha: f64,
    pub seed_beta: f64,
    pub penalty: f64,
    pub iterations: usize,
}

/// Right-hand side of the key-length budget when the Toeplitz seed is
/// `n_sift + l - 1` bits long with per-bit min-entropy `h_avg`.
fn budget_rhs(base: f64, n_sift: f64, h_avg: f64, key_len: f64) -> f64 {
    base - (1.0 - h_avg) * (n_sift + key_len - 1.0)
}

pub fn key_rate(
    ch: &ChannelModel,
    proto: &ProtocolParams,
    sec: &SecurityParams,
    h_avg: f64,
) -> Result<KeyRateResult> {
    ch.validate()?;
    proto.validate()?;
    if !(0.0..=1.0).contains(&h_avg) {
        return invalid(format!("per-bit min-entropy {h_avg} outside [0, 1]"));
    }
    let signal = gain_qber(ch, proto.mu)?;
    let weak = gain_qber(ch, proto.nu)?;
    let vacuum = gain_qber(ch, 0.0)?;
    let decoy = decoy_estimates(
        signal.gain,
        signal.qber,
        weak.gain,
        weak.qber,
        vacuum.gain,
        proto.mu,
        proto.nu,
    )?;

    let n_sift = proto.pulse_count * proto.p_signal * signal.gain * proto.sifting_factor;
    let n_single = if signal.gain > 0.0 {
        n_sift * decoy.q1 / signal.gain
    } else {
        0.0
    };
    let hmin = if decoy.has_single_photons() && decoy.e1_upper < 0.5 {
        n_single * (1.0 - binary_entropy(decoy.e1_upper))
    } else {
        0.0
    };
    let leak_ec = proto.ec_efficiency * n_sift * binary_entropy(signal.qber);
    let base = hmin - leak_ec - sec.secrecy_cost() - sec.correctness_cost();

    // l appears on both sides through the seed length; the map contracts
    // with factor 1 - h_avg
    let mut raw = 0.0f64;
    let mut iterations = 0;
    loop {
        if iterations == MAX_ITERATIONS {
            return Err(Error::Numeric(format!(
                "key length did not converge in {MAX_ITERATIONS} iterations \
                 (distance {} km, h_avg {h_avg}, n_sift {n_sift})",
                ch.distance_km
            )));
        }
        iterations += 1;
        let next = budget_rhs(base, n_sift, h_avg, raw).max(0.0);
        let done = (next - raw).abs() <= FIXED_POINT_TOLERANCE * next.abs().max(1.0);
        raw = next;
        if done {
            break;
        }
    }
    let key_len = raw.floor() as u64;
    let seed_alpha = (n_sift + key_len as f64 - 1.0).max(0.0);
    let seed_beta = h_avg * seed_alpha;
    Ok(KeyRateResult {
        distance_km: ch.distance_km,
        h_avg,
        signal,
        weak,
        vacuum,
        y1_lower: decoy.y1_lower,
        e1_upper: decoy.e1_upper,
        q1: decoy.q1,
        n_sift,
        n_single,
        hmin,
        leak_ec,
        raw_key_len: raw,
        key_len,
        skr: key_len as f64 / proto.pulse_count,
        seed_alpha,
        seed_beta,
        penalty: seed_alpha - seed_beta,
        iterations,
    })
}

impl KeyRateResult {
    /// The key-length budget re-evaluated at the returned key length.
    pub fn budget(&self, sec: &SecurityParams) -> Result<KeyLengthBudget> {
        let seed = SeedQuality::new(self.seed_alpha, self.seed_beta.min(self.seed_alpha))?;
        KeyLengthBudget::evaluate(self.hmin, self.leak_ec, *sec, seed)
    }
}

/// Smallest per-bit seed min-entropy with a positive key at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub distance_km: f64,
    /// `None` when even a perfect seed yields no key.
    pub h_critical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub rows: Vec<KeyRateResult>,
    pub critical: Vec<CriticalPoint>,
}

fn critical_h(
    ch: &ChannelModel,
    proto: &ProtocolParams,
    sec: &SecurityParams,
) -> Result<Option<f64>> {
    let has_key = |h: f64| key_rate(ch, proto, sec, h).map(|r| r.key_len > 0);
    if !has_key(1.0)? {
        return Ok(None);
    }
    if has_key(0.0)? {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > CRITICAL_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if has_key(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Key rate over every `(distance, h_avg)` pair, sorted by distance then
/// `h_avg`, plus the critical `h_avg` per distance.
pub fn scan(
    h_grid: &[f64],
    distance_grid: &[f64],
    ch: &ChannelModel,
    proto: &ProtocolParams,
    sec: &SecurityParams,
) -> Result<ScanTable> {
    if h_grid.is_empty() || distance_grid.is_empty() {
        return invalid("scan grids must be non-empty");
    }
    let mut distances = distance_grid.to_vec();
    distances.sort_by(f64::total_cmp);
    distances.dedup();
    let mut hs = h_grid.to_vec();
    hs.sort_by(f64::total_cmp);

    let mut rows = Vec::with_capacity(distances.len() * hs.len());
    let mut critical = Vec::with_capacity(distances.len());
    for &d in &distances {
        let at = ch.at_distance(d);
        for &h in &hs {
            rows.push(key_rate(&at, proto, sec, h)?);
        }
        critical.push(CriticalPoint {
            distance_km: d,
            h_critical: critical_h(&at, proto, sec)?,
        });
    }
    Ok(ScanTable { rows, critical })
}
