//! Privacy-amplification security bounds with a non-uniform hash seed.
//!
//! Both distance bounds carry the seed penalty `2^(alpha - beta)`; the key
//! length budget pays `alpha - beta` bits for it. Bound values are reported
//! raw and clamped to `[0, 1]`, since a distance above one says nothing.
//!
//! The `theorem1_*` items are the seed-gap leftover hash bound
//! `1/2 2^(gap - (hmin - l)/2) + eps`; the `alternative_*` items are the
//! square-root bound `1/2 sqrt(2^(l - hmin) + 2^gap - 1) + eps`.

use crate::entropy::SeedQuality;
use crate::error::{invalid, Error, Result};

/// Absolute tolerance under which two bounds are reported as equal.
pub const EQUAL_TOLERANCE: f64 = 1e-12;

/// Smoothing, secrecy and correctness failure probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    eps_smooth: f64,
    eps_sec: f64,
    eps_cor: f64,
}

impl SecurityParams {
    pub const DEFAULT_EPS_SEC: f64 = 1e-9;
    pub const DEFAULT_EPS_COR: f64 = 1e-15;

    pub fn new(eps_smooth: f64, eps_sec: f64, eps_cor: f64) -> Result<Self> {
        if !(eps_smooth >= 0.0 && eps_smooth < eps_sec && eps_sec <= 1.0) {
            return Err(Error::Parameter(format!(
                "need 0 <= eps_smooth < eps_sec <= 1, got eps_smooth={eps_smooth}, eps_sec={eps_sec}"
            )));
        }
        if !(eps_cor > 0.0 && eps_cor <= 1.0) {
            return Err(Error::Parameter(format!(
                "need 0 < eps_cor <= 1, got {eps_cor}"
            )));
        }
        Ok(Self {
            eps_smooth,
            eps_sec,
            eps_cor,
        })
    }

    pub fn eps_smooth(&self) -> f64 {
        self.eps_smooth
    }

    pub fn eps_sec(&self) -> f64 {
        self.eps_sec
    }

    pub fn eps_cor(&self) -> f64 {
        self.eps_cor
    }

    /// Composed security parameter of the final key.
    pub fn eps_total(&self) -> f64 {
        epsilon_secure(self.eps_sec, self.eps_cor)
    }

    /// `2 log2(1 / (2 (eps_sec - eps_smooth)))`
    pub fn secrecy_cost(&self) -> f64 {
        2.0 * (1.0 / (2.0 * (self.eps_sec - self.eps_smooth))).log2()
    }

    /// `log2(2 / eps_cor)`
    pub fn correctness_cost(&self) -> f64 {
        (2.0 / self.eps_cor).log2()
    }
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_smooth: Self::DEFAULT_EPS_SEC / 10.0,
            eps_sec: Self::DEFAULT_EPS_SEC,
            eps_cor: Self::DEFAULT_EPS_COR,
        }
    }
}

/// `eps_sec + eps_cor`.
pub fn epsilon_secure(eps_sec: f64, eps_cor: f64) -> f64 {
    eps_sec + eps_cor
}

/// Inputs shared by both distance bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Smooth min-entropy of the raw key given the adversary, in bits.
    pub hmin: f64,
    /// Output key length in bits.
    pub key_len: f64,
    pub seed: SeedQuality,
    pub eps_smooth: f64,
}

impl BoundInputs {
    pub fn new(hmin: f64, key_len: f64, seed: SeedQuality, eps_smooth: f64) -> Result<Self> {
        if !hmin.is_finite() {
            return invalid(format!("min-entropy {hmin} is not finite"));
        }
        if !(key_len >= 0.0 && key_len.is_finite()) {
            return invalid(format!(
                "key length {key_len} must be a non-negative number"
            ));
        }
        if !(0.0..=1.0).contains(&eps_smooth) {
            return invalid(format!("smoothing parameter {eps_smooth} outside [0, 1]"));
        }
        Ok(Self {
            hmin,
            key_len,
            seed,
            eps_smooth,
        })
    }

    /// `hmin - l`, the entropy left over after extraction.
    pub fn excess(&self) -> f64 {
        self.hmin - self.key_len
    }
}

fn clamp_distance(raw: f64) -> f64 {
    if raw.is_nan() {
        1.0
    } else {
        raw.clamp(0.0, 1.0)
    }
}

/// `(1/2) 2^(alpha-beta) 2^(-(hmin-l)/2) + eps`, unclamped.
pub fn theorem1_bound_raw(b: &BoundInputs) -> f64 {
    0.5 * (b.seed.gap() - 0.5 * b.excess()).exp2() + b.eps_smooth
}

/// Leftover-hash distance bound with the seed penalty applied as a factor.
pub fn theorem1_bound(b: &BoundInputs) -> f64 {
    clamp_distance(theorem1_bound_raw(b))
}

/// `(1/2) sqrt(2^(l-hmin) + 2^(alpha-beta) - 1) + eps`, unclamped.
pub fn alternative_bound_raw(b: &BoundInputs) -> f64 {
    // 2^gap - 1 via exp_m1 keeps small excess terms from cancelling at gap 0
    let penalty = (b.seed.gap() * std::f64::consts::LN_2).exp_m1();
    0.5 * ((-b.excess()).exp2() + penalty).sqrt() + b.eps_smooth
}

/// Distance bound from the collision-probability route, where the seed
/// penalty enters under the square root additively.
pub fn alternative_bound(b: &BoundInputs) -> f64 {
    clamp_distance(alternative_bound_raw(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tighter {
    Theorem1,
    Alternative,
    Equal,
}

impl Tighter {
    pub fn as_str(self) -> &'static str {
        match self {
            Tighter::Theorem1 => "theorem1",
            Tighter::Alternative => "alternative",
            Tighter::Equal => "equal",
        }
    }
}

/// Both bounds side by side. `tighter` compares the unclamped values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComparison {
    pub theorem1_value: f64,
    pub alternative_value: f64,
    pub theorem1_raw: f64,
    pub alternative_raw: f64,
    pub tighter: Tighter,
    /// `2^(l-hmin) (2^(alpha-beta) + 1) <= 1`; when true the seed-gap bound is
    /// at most the alternative.
    pub theorem1_predicted: bool,
}

/// `2^(l-hmin) (2^(alpha-beta) + 1) <= 1`, evaluated in the log domain.
pub fn crossover_predicate(b: &BoundInputs) -> bool {
    let log_sum = b.seed.gap() + (1.0 + (-b.seed.gap()).exp2()).log2();
    log_sum - b.excess() <= 0.0
}

pub fn compare_bounds(b: &BoundInputs) -> BoundComparison {
    let t = theorem1_bound_raw(b);
    let a = alternative_bound_raw(b);
    let tighter = if t == a || (t - a).abs() <= EQUAL_TOLERANCE {
        Tighter::Equal
    } else if t < a {
        Tighter::Theorem1
    } else {
        Tighter::Alternative
    };
    BoundComparison {
        theorem1_value: clamp_distance(t),
        alternative_value: clamp_distance(a),
        theorem1_raw: t,
        alternative_raw: a,
        tighter,
        theorem1_predicted: crossover_predicate(b),
    }
}

/// Every term of the secure key-length budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLengthBudget {
    pub hmin: f64,
    pub leak_ec: f64,
    pub security: SecurityParams,
    pub seed: SeedQuality,
    /// Budget before flooring and clamping; may be negative.
    pub raw_length: f64,
    pub max_key_len: u64,
}

impl KeyLengthBudget {
    pub fn evaluate(
        hmin: f64,
        leak_ec: f64,
        security: SecurityParams,
        seed: SeedQuality,
    ) -> Result<Self> {
        if !(hmin >= 0.0 && hmin.is_finite()) {
            return invalid(format!("min-entropy {hmin} must be non-negative"));
        }
        if !(leak_ec >= 0.0 && leak_ec.is_finite()) {
            return invalid(format!(
                "error-correction leakage {leak_ec} must be non-negative"
            ));
        }
        let raw_length =
            hmin - leak_ec - security.secrecy_cost() - security.correctness_cost() - seed.gap();
        let max_key_len = if raw_length > 0.0 {
            raw_length.floor() as u64
        } else {
            0
        };
        Ok(Self {
            hmin,
            leak_ec,
            security,
            seed,
            raw_length,
            max_key_len,
        })
    }
}

/// Largest secure key length in whole bits, never negative.
pub fn key_length(
    hmin: f64,
    leak_ec: f64,
    security: SecurityParams,
    seed: SeedQuality,
) -> Result<u64> {
    KeyLengthBudget::evaluate(hmin, leak_ec, security, seed).map(|b| b.max_key_len)
}
