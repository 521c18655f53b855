//! Exhaustive check of the non-uniform-seed leftover hash bound on small
//! instances with classical side information.
//!
//! For a joint distribution `P(x, e)` and a seed distribution over the whole
//! Toeplitz family, the average distance from uniform
//! `Delta = sum_f P(f) D_u(S|E)_f` is computed exactly by pushing `P(x, e)`
//! through every seed, then compared with the seed-gap bound at `eps = 0`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{theorem1_bound, BoundInputs};
use crate::entropy::SeedQuality;
use crate::error::{invalid, Error, Result};
use crate::hashing::{hash_small, HashFamilyDescriptor};

pub const MAX_ORACLE_INPUT_BITS: usize = 8;
pub const MAX_ORACLE_OUTPUT_BITS: usize = 3;

/// Slack allowed when comparing a measured distance against its bound.
pub const PASS_TOLERANCE: f64 = 1e-10;

const SUM_TOLERANCE: f64 = 1e-12;
const BETA_TOLERANCE: f64 = 1e-9;

/// Classical joint distribution `P(x, e)` with `x` ranging over `n`-bit
/// strings and `e` over `0..e_alphabet`. Stored row-major by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    x_bits: usize,
    e_alphabet: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(x_bits: usize, e_alphabet: usize, p: Vec<f64>) -> Result<Self> {
        if x_bits >= usize::BITS as usize - 1 || e_alphabet == 0 {
            return invalid("joint distribution needs a non-empty alphabet");
        }
        let rows = 1usize << x_bits;
        if p.len() != rows * e_alphabet {
            return invalid(format!(
                "expected {} entries for 2^{x_bits} x {e_alphabet}, got {}",
                rows * e_alphabet,
                p.len()
            ));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return invalid(format!("probability {v} is negative or not finite"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("joint distribution sums to {sum}"));
        }
        Ok(Self {
            x_bits,
            e_alphabet,
            p,
        })
    }

    /// Product distribution `P(x) P(e)`.
    pub fn independent(px: &[f64], pe: &[f64]) -> Result<Self> {
        if !px.len().is_power_of_two() {
            return invalid("X marginal length must be a power of two");
        }
        let x_bits = px.len().trailing_zeros() as usize;
        let p = px
            .iter()
            .flat_map(|a| pe.iter().map(move |b| a * b))
            .collect();
        Self::new(x_bits, pe.len(), p)
    }

    /// `X` uniform over `n` bits with no side information.
    pub fn uniform(x_bits: usize) -> Result<Self> {
        let rows = 1usize << x_bits;
        Self::new(x_bits, 1, vec![1.0 / rows as f64; rows])
    }

    /// `X` uniform and `E` an exact copy of it.
    pub fn perfect_copy(x_bits: usize) -> Result<Self> {
        let rows = 1usize << x_bits;
        let mut p = vec![0.0; rows * rows];
        for x in 0..rows {
            p[x * rows + x] = 1.0 / rows as f64;
        }
        Self::new(x_bits, rows, p)
    }

    pub fn x_bits(&self) -> usize {
        self.x_bits
    }

    pub fn x_alphabet(&self) -> usize {
        1 << self.x_bits
    }

    pub fn e_alphabet(&self) -> usize {
        self.e_alphabet
    }

    pub fn get(&self, x: usize, e: usize) -> f64 {
        self.p[x * self.e_alphabet + e]
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.p
            .chunks(self.e_alphabet)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn marginal_e(&self) -> Vec<f64> {
        let mut pe = vec![0.0; self.e_alphabet];
        for row in self.p.chunks(self.e_alphabet) {
            for (acc, v) in pe.iter_mut().zip(row) {
                *acc += v;
            }
        }
        pe
    }
}

/// Guessing-probability form `-log2 sum_e max_x P(x, e)`.
pub fn conditional_min_entropy(p: &JointDistribution) -> f64 {
    let guess: f64 = (0..p.e_alphabet)
        .map(|e| (0..p.x_alphabet()).map(|x| p.get(x, e)).fold(0.0, f64::max))
        .sum();
    let h = -guess.log2();
    if h <= 0.0 {
        0.0
    } else {
        h
    }
}

/// `(1/2) sum_{s,e} |P(s, e) - 2^-l P(e)|` for a key `S` of `l = p_se.x_bits()` bits.
pub fn uniformity_distance(p_se: &JointDistribution) -> f64 {
    let pe = p_se.marginal_e();
    let u = 1.0 / p_se.x_alphabet() as f64;
    let total: f64 = p_se
        .p
        .chunks(p_se.e_alphabet)
        .map(|row| {
            row.iter()
                .zip(&pe)
                .map(|(p, q)| (p - u * q).abs())
                .sum::<f64>()
        })
        .sum();
    0.5 * total
}

/// Probability assignment over every seed of a Toeplitz family, enumerated in
/// [`ToeplitzSeed::from_index`](crate::hashing::ToeplitzSeed::from_index) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedDistribution {
    family: HashFamilyDescriptor,
    weights: Vec<f64>,
    declared_beta: f64,
}

impl SeedDistribution {
    pub fn new(
        family: HashFamilyDescriptor,
        weights: Vec<f64>,
        declared_beta: f64,
    ) -> Result<Self> {
        let size = family
            .family_size()
            .ok_or_else(|| Error::Resource("seed family too large to enumerate".into()))?;
        if weights.len() as u64 != size {
            return invalid(format!(
                "expected {size} seed weights, got {}",
                weights.len()
            ));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return invalid(format!("seed weight {w} is negative or not finite"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("seed weights sum to {sum}"));
        }
        let d = Self {
            family,
            weights,
            declared_beta,
        };
        if d.min_entropy() < declared_beta - BETA_TOLERANCE {
            return invalid(format!(
                "seed min-entropy {} is below the declared {declared_beta}",
                d.min_entropy()
            ));
        }
        Ok(d)
    }

    pub fn uniform(family: HashFamilyDescriptor) -> Result<Self> {
        let size = family
            .family_size()
            .ok_or_else(|| Error::Resource("seed family too large to enumerate".into()))?;
        Self::new(
            family,
            vec![1.0 / size as f64; size as usize],
            family.seed_len() as f64,
        )
    }

    pub fn family(&self) -> HashFamilyDescriptor {
        self.family
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn declared_beta(&self) -> f64 {
        self.declared_beta
    }

    /// `-log2 max_f P(f)`, capped at the seed length.
    pub fn min_entropy(&self) -> f64 {
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        (-max.log2()).clamp(0.0, self.family.seed_len() as f64)
    }

    pub fn quality(&self) -> Result<SeedQuality> {
        SeedQuality::new(self.family.seed_len() as f64, self.min_entropy())
    }
}

fn check_instance(p_xe: &JointDistribution, family: HashFamilyDescriptor) -> Result<()> {
    if family.input_len() > MAX_ORACLE_INPUT_BITS || family.output_len() > MAX_ORACLE_OUTPUT_BITS {
        return Err(Error::Resource(format!(
            "n={}, l={} exceeds the oracle bound n <= {MAX_ORACLE_INPUT_BITS}, l <= {MAX_ORACLE_OUTPUT_BITS}",
            family.input_len(),
            family.output_len()
        )));
    }
    if p_xe.x_bits() != family.input_len() {
        return invalid(format!(
            "distribution is over {} bits, hash family expects {}",
            p_xe.x_bits(),
            family.input_len()
        ));
    }
    Ok(())
}

/// Joint distribution of `(f(X), E)` for a single seed.
pub fn hashed_distribution(
    p_xe: &JointDistribution,
    family: HashFamilyDescriptor,
    seed_index: u64,
) -> JointDistribution {
    let (n, l) = (family.input_len(), family.output_len());
    let e = p_xe.e_alphabet;
    let mut p = vec![0.0; (1 << l) * e];
    for (x, row) in p_xe.p.chunks(e).enumerate() {
        let s = hash_small(seed_index, n, l, x as u64) as usize;
        for (acc, v) in p[s * e..(s + 1) * e].iter_mut().zip(row) {
            *acc += v;
        }
    }
    JointDistribution {
        x_bits: l,
        e_alphabet: e,
        p,
    }
}

/// `D_u(S|E)` for every seed of the family, in enumeration order.
pub fn per_seed_distances(
    p_xe: &JointDistribution,
    family: HashFamilyDescriptor,
) -> Result<Vec<f64>> {
    check_instance(p_xe, family)?;
    let size = family.family_size().expect("bounded by the oracle limits");
    Ok((0..size)
        .map(|s| uniformity_distance(&hashed_distribution(p_xe, family, s)))
        .collect())
}

fn weighted_sum(weights: &[f64], distances: &[f64]) -> f64 {
    // fixed left-to-right order so reported sums are reproducible
    weights.iter().zip(distances).map(|(w, d)| w * d).sum()
}

/// Exact `Delta = sum_f P(f) D_u(S|E)_f`.
pub fn delta_exact(p_xe: &JointDistribution, seed_dist: &SeedDistribution) -> Result<f64> {
    let distances = per_seed_distances(p_xe, seed_dist.family)?;
    Ok(weighted_sum(&seed_dist.weights, &distances))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationReport {
    pub n: usize,
    pub l: usize,
    pub alpha: f64,
    /// Measured seed min-entropy, used in the bound.
    pub beta: f64,
    pub hmin: f64,
    pub delta: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

fn report_from(
    p_xe: &JointDistribution,
    seed_dist: &SeedDistribution,
    delta: f64,
) -> Result<VerificationReport> {
    let family = seed_dist.family;
    let seed = seed_dist.quality()?;
    let hmin = conditional_min_entropy(p_xe);
    let bound = theorem1_bound(&BoundInputs::new(
        hmin,
        family.output_len() as f64,
        seed,
        0.0,
    )?);
    Ok(VerificationReport {
        n: family.input_len(),
        l: family.output_len(),
        alpha: seed.alpha(),
        beta: seed.beta(),
        hmin,
        delta,
        bound,
        margin: bound - delta,
        pass: delta <= bound + PASS_TOLERANCE,
    })
}

/// Compute `Delta` exactly and compare it with the bound at `eps = 0`.
pub fn verify_theorem1(
    p_xe: &JointDistribution,
    seed_dist: &SeedDistribution,
) -> Result<VerificationReport> {
    let delta = delta_exact(p_xe, seed_dist)?;
    report_from(p_xe, seed_dist, delta)
}

/// Shapes of seed distribution with a prescribed min-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedStrategy {
    /// One seed at `2^-beta`, the rest uniform.
    Spike,
    /// `2^beta` seeds uniform, the rest zero.
    Block,
    Uniform,
}

impl SeedStrategy {
    pub const ALL: [SeedStrategy; 3] = [
        SeedStrategy::Spike,
        SeedStrategy::Block,
        SeedStrategy::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SeedStrategy::Spike => "spike",
            SeedStrategy::Block => "block",
            SeedStrategy::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for SeedStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spike" => Ok(SeedStrategy::Spike),
            "block" => Ok(SeedStrategy::Block),
            "uniform" => Ok(SeedStrategy::Uniform),
            other => invalid(format!("unknown seed strategy `{other}`")),
        }
    }
}

/// Seed indices ordered from most to least damaging for `target`; index
/// order when there is no target.
fn ranked_seeds(
    family: HashFamilyDescriptor,
    target: Option<&JointDistribution>,
) -> Result<Vec<usize>> {
    let size = family.family_size().expect("validated by caller") as usize;
    let mut order: Vec<usize> = (0..size).collect();
    if let Some(p) = target {
        let d = per_seed_distances(p, family)?;
        // stable sort keeps index order among ties
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    }
    Ok(order)
}

/// One seed distribution per requested strategy, each with min-entropy at
/// least `beta`. Spike and block distributions are placed on the seeds with
/// the largest `D_u` for `target` when one is given. Duplicates are dropped,
/// so `beta = alpha` yields just the uniform distribution.
pub fn adversarial_seed_distributions(
    family: HashFamilyDescriptor,
    beta: f64,
    strategies: &[SeedStrategy],
    target: Option<&JointDistribution>,
) -> Result<Vec<SeedDistribution>> {
    let alpha = family.seed_len() as f64;
    if !(0.0..=alpha).contains(&beta) {
        return invalid(format!("need 0 <= beta <= alpha = {alpha}, got {beta}"));
    }
    if family.input_len() > MAX_ORACLE_INPUT_BITS || family.output_len() > MAX_ORACLE_OUTPUT_BITS {
        return Err(Error::Resource(
            "seed family too large for adversarial search".into(),
        ));
    }
    let size = family.family_size().expect("bounded by the oracle limits") as usize;
    let needs_ranking = strategies.iter().any(|s| *s != SeedStrategy::Uniform);
    let order = if needs_ranking {
        ranked_seeds(family, target)?
    } else {
        Vec::new()
    };

    let mut out: Vec<SeedDistribution> = Vec::new();
    for &strategy in strategies {
        let weights = match strategy {
            SeedStrategy::Uniform => vec![1.0 / size as f64; size],
            SeedStrategy::Spike => {
                let top = (-beta).exp2();
                let rest = if size > 1 {
                    (1.0 - top) / (size - 1) as f64
                } else {
                    0.0
                };
                let mut w = vec![rest; size];
                w[order[0]] = top;
                w
            }
            SeedStrategy::Block => {
                // ceil keeps the min-entropy at or above beta for fractional beta
                let k = ((beta.exp2() - BETA_TOLERANCE).ceil() as usize).clamp(1, size);
                let mut w = vec![0.0; size];
                for &s in &order[..k] {
                    w[s] = 1.0 / k as f64;
                }
                w
            }
        };
        let d = SeedDistribution::new(family, weights, beta)?;
        if !out.iter().any(|o| o.weights == d.weights) {
            out.push(d);
        }
    }
    Ok(out)
}

/// Random joint distribution over `n`-bit `X` and a small side-information
/// alphabet, mixing skewed, correlated and near-uniform shapes.
pub fn random_joint_distribution<R: Rng>(
    rng: &mut R,
    x_bits: usize,
    max_e_alphabet: usize,
) -> JointDistribution {
    let rows = 1usize << x_bits;
    let e = rng.gen_range(1..=max_e_alphabet.max(1));
    let mut p: Vec<f64> = match rng.gen_range(0..3) {
        // skewed entries; larger exponents concentrate the mass
        0 => {
            let skew = rng.gen_range(0.2..12.0);
            (0..rows * e).map(|_| rng.gen::<f64>().powf(skew)).collect()
        }
        // E is a noisy function of X
        1 => {
            let noise = rng.gen_range(0.0..1.0);
            let mut p = vec![0.0; rows * e];
            for x in 0..rows {
                let px = rng.gen_range(0.5..1.5);
                let leak = x % e;
                for s in 0..e {
                    p[x * e + s] = px * if s == leak { 1.0 } else { noise };
                }
            }
            p
        }
        // nearly uniform X, weakly correlated E
        _ => (0..rows * e)
            .map(|_| 1.0 + 0.1 * rng.gen::<f64>())
            .collect(),
    };
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    let sum: f64 = p.iter().sum();
    // absorb rounding in the largest entry
    let top = (0..p.len())
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
        .unwrap_or(0);
    p[top] += 1.0 - sum;
    JointDistribution::new(x_bits, e, p).expect("normalized by construction")
}

/// Which seed min-entropies a sweep cell covers, as a function of `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaChoice {
    Full,
    MinusOne,
    MinusTwo,
    HalfCeil,
}

impl BetaChoice {
    pub const ALL: [BetaChoice; 4] = [
        BetaChoice::Full,
        BetaChoice::MinusOne,
        BetaChoice::MinusTwo,
        BetaChoice::HalfCeil,
    ];

    pub fn beta(self, alpha: usize) -> usize {
        match self {
            BetaChoice::Full => alpha,
            BetaChoice::MinusOne => alpha.saturating_sub(1),
            BetaChoice::MinusTwo => alpha.saturating_sub(2),
            BetaChoice::HalfCeil => alpha.div_ceil(2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BetaChoice::Full => "alpha",
            BetaChoice::MinusOne => "alpha-1",
            BetaChoice::MinusTwo => "alpha-2",
            BetaChoice::HalfCeil => "ceil(alpha/2)",
        }
    }
}

impl std::str::FromStr for BetaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(BetaChoice::Full),
            "alpha-1" => Ok(BetaChoice::MinusOne),
            "alpha-2" => Ok(BetaChoice::MinusTwo),
            "half" | "ceil(alpha/2)" => Ok(BetaChoice::HalfCeil),
            other => invalid(format!(
                "unknown beta choice `{other}` (alpha, alpha-1, alpha-2, half)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub input_bits: Vec<usize>,
    pub output_bits: Vec<usize>,
    pub strategies: Vec<SeedStrategy>,
    pub betas: Vec<BetaChoice>,
    pub trials: usize,
    pub max_e_alphabet: usize,
    pub rng_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            input_bits: (2..=6).collect(),
            output_bits: (1..=3).collect(),
            strategies: SeedStrategy::ALL.to_vec(),
            betas: BetaChoice::ALL.to_vec(),
            trials: 100,
            max_e_alphabet: 4,
            rng_seed: 0x5eed,
        }
    }
}

/// One verified instance of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub strategy: SeedStrategy,
    pub beta_choice: BetaChoice,
    pub e_alphabet: usize,
    pub report: VerificationReport,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_bits.is_empty()
            || self.output_bits.is_empty()
            || self.strategies.is_empty()
            || self.betas.is_empty()
        {
            return invalid("sweep has an empty axis");
        }
        let n_max = self.input_bits.iter().copied().max().unwrap_or(0);
        let l_max = self.output_bits.iter().copied().max().unwrap_or(0);
        if n_max > MAX_ORACLE_INPUT_BITS || l_max > MAX_ORACLE_OUTPUT_BITS {
            return Err(Error::Resource(format!(
                "sweep reaches n={n_max}, l={l_max}; oracle limit is n <= {MAX_ORACLE_INPUT_BITS}, l <= {MAX_ORACLE_OUTPUT_BITS}"
            )));
        }
        if self.input_bits.contains(&0) || self.output_bits.contains(&0) {
            return invalid("input and output lengths must be at least one bit");
        }
        Ok(())
    }

    /// Run every cell. Cells with `l > n` are skipped. Each trial draws one
    /// random `P(x, e)` that all strategies and seed entropies of the cell share.
    pub fn run(&self) -> Result<Vec<SweepRow>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let mut rows = Vec::new();
        for &n in &self.input_bits {
            for &l in self.output_bits.iter().filter(|&&l| l <= n) {
                let family = HashFamilyDescriptor::new(n, l)?;
                let alpha = family.seed_len();
                for trial in 0..self.trials {
                    let p_xe = random_joint_distribution(&mut rng, n, self.max_e_alphabet);
                    let distances = per_seed_distances(&p_xe, family)?;
                    for &choice in &self.betas {
                        let beta = choice.beta(alpha) as f64;
                        for &strategy in &self.strategies {
                            let dist = adversarial_seed_distributions(
                                family,
                                beta,
                                &[strategy],
                                Some(&p_xe),
                            )?
                            .remove(0);
                            let delta = weighted_sum(&dist.weights, &distances);
                            rows.push(SweepRow {
                                trial,
                                strategy,
                                beta_choice: choice,
                                e_alphabet: p_xe.e_alphabet(),
                                report: report_from(&p_xe, &dist, delta)?,
                            });
                        }
                    }
                }
            }
        }
        Ok(rows)
    }
}
