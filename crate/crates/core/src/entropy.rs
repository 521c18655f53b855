//! Seed uniformity measures.
//!
//! Exact min-entropy of a known distribution, most-common-value estimates
//! from sampled RNG output, and the bridge from a per-bit figure to the
//! total seed min-entropy used by the key-length bounds.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// Minimum number of samples accepted by [`estimate_min_entropy_mcv`].
pub const MIN_SAMPLES: u64 = 1000;

/// Default one-sided confidence level for stream estimates.
pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDistribution {
    probabilities: Vec<f64>,
}

impl SymbolDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return invalid("distribution over an empty alphabet");
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return invalid(format!("probability {p} is negative or not finite"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("probabilities sum to {sum}, expected 1"));
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(alphabet_size: usize) -> Result<Self> {
        if alphabet_size == 0 {
            return invalid("distribution over an empty alphabet");
        }
        Ok(Self {
            probabilities: vec![1.0 / alphabet_size as f64; alphabet_size],
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn max_probability(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

/// `-log2 max_x P(x)`.
pub fn min_entropy(dist: &SymbolDistribution) -> f64 {
    let h = -dist.max_probability().log2();
    // -log2(1) is -0.0
    if h == 0.0 {
        0.0
    } else {
        h
    }
}

/// How raw bytes are split into symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SymbolWidth {
    /// One symbol per bit, most-significant bit first.
    #[default]
    Bit,
    /// One symbol per byte.
    Byte,
}

impl SymbolWidth {
    pub fn bits(self) -> u32 {
        match self {
            SymbolWidth::Bit => 1,
            SymbolWidth::Byte => 8,
        }
    }

    pub fn alphabet_size(self) -> usize {
        1 << self.bits()
    }

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            1 => Ok(SymbolWidth::Bit),
            8 => Ok(SymbolWidth::Byte),
            other => invalid(format!("symbol width must be 1 or 8 bits, got {other}")),
        }
    }
}

/// Frequency table of a symbol stream. Counts are additive, so a long stream
/// can be tallied in chunks and merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolCounts {
    width: SymbolWidth,
    counts: Vec<u64>,
}

impl SymbolCounts {
    pub fn new(width: SymbolWidth) -> Self {
        Self {
            width,
            counts: vec![0; width.alphabet_size()],
        }
    }

    pub fn from_bytes(bytes: &[u8], width: SymbolWidth) -> Self {
        let mut c = Self::new(width);
        c.add_bytes(bytes);
        c
    }

    pub fn add_bytes(&mut self, bytes: &[u8]) {
        match self.width {
            SymbolWidth::Bit => {
                let ones: u64 = bytes.iter().map(|b| u64::from(b.count_ones())).sum();
                self.counts[1] += ones;
                self.counts[0] += 8 * bytes.len() as u64 - ones;
            }
            SymbolWidth::Byte => {
                for &b in bytes {
                    self.counts[usize::from(b)] += 1;
                }
            }
        }
    }

    /// Tally individual symbols; each must be below the alphabet size.
    pub fn add_symbols<I: IntoIterator<Item = u8>>(&mut self, symbols: I) -> Result<()> {
        let k = self.counts.len();
        for s in symbols {
            let idx = usize::from(s);
            if idx >= k {
                return invalid(format!("symbol {s} outside alphabet of size {k}"));
            }
            self.counts[idx] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SymbolCounts) -> Result<()> {
        if self.width != other.width {
            return invalid("cannot merge counts of different symbol widths");
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn width(&self) -> SymbolWidth {
        self.width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Min-entropy estimate of a sampled stream, in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinEntropyEstimate {
    pub point_estimate: f64,
    pub lower_confidence_bound: f64,
    pub sample_count: u64,
    pub confidence_level: f64,
    pub symbol_bits: u32,
}

impl MinEntropyEstimate {
    pub fn point_per_bit(&self) -> f64 {
        self.point_estimate / f64::from(self.symbol_bits)
    }

    pub fn lower_per_bit(&self) -> f64 {
        self.lower_confidence_bound / f64::from(self.symbol_bits)
    }
}

/// Most-common-value estimate with a one-sided normal upper bound on the
/// most likely symbol's probability.
pub fn estimate_min_entropy_mcv(
    counts: &SymbolCounts,
    confidence_level: f64,
) -> Result<MinEntropyEstimate> {
    if !(confidence_level > 0.0 && confidence_level < 1.0) {
        return invalid(format!("confidence level {confidence_level} not in (0, 1)"));
    }
    let n = counts.total();
    if n == 0 {
        return invalid("empty symbol stream");
    }
    if n < MIN_SAMPLES {
        return Err(Error::Estimation(format!(
            "{n} samples, need at least {MIN_SAMPLES}"
        )));
    }
    let max_count = counts.counts().iter().copied().max().unwrap_or(0);
    let p_hat = max_count as f64 / n as f64;
    let z = Normal::new(0.0, 1.0)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .inverse_cdf(confidence_level);
    let p_upper = (p_hat + z * (p_hat * (1.0 - p_hat) / n as f64).sqrt()).min(1.0);
    let nonneg = |h: f64| if h <= 0.0 { 0.0 } else { h };
    let point = nonneg(-p_hat.log2());
    // a confidence level below one half gives z < 0; keep the bound below the point
    let lower = nonneg(-p_upper.max(p_hat).log2());
    Ok(MinEntropyEstimate {
        point_estimate: point,
        lower_confidence_bound: lower,
        sample_count: n,
        confidence_level,
        symbol_bits: counts.width().bits(),
    })
}

/// Seed length and seed min-entropy, both in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedQuality {
    alpha: f64,
    beta: f64,
}

impl SeedQuality {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return invalid("seed length and min-entropy must be finite");
        }
        if beta < 0.0 || beta > alpha {
            return invalid(format!(
                "need 0 <= beta <= alpha, got alpha={alpha}, beta={beta}"
            ));
        }
        Ok(Self { alpha, beta })
    }

    /// A perfectly uniform seed of `alpha` bits.
    pub fn uniform(alpha: f64) -> Result<Self> {
        Self::new(alpha, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `alpha - beta`, the key-length penalty in bits.
    pub fn gap(&self) -> f64 {
        self.alpha - self.beta
    }
}

/// Total seed min-entropy from a per-bit figure, treating seed bits as
/// independent: `beta = h_avg * alpha`.
pub fn seed_quality_from_per_bit(alpha: f64, h_avg: f64) -> Result<SeedQuality> {
    if !(0.0..=1.0).contains(&h_avg) {
        return invalid(format!("per-bit min-entropy {h_avg} outside [0, 1]"));
    }
    if alpha.is_nan() || alpha < 1.0 {
        return invalid(format!("seed length {alpha} must be at least one bit"));
    }
    SeedQuality::new(alpha, (h_avg * alpha).min(alpha))
}
