//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: the secret key rate against seed quality at one
//! distance, the two distance bounds against the seed gap, and an exact
//! oracle check of the distance bound on one random small instance.
//! Errors are returned as strings, which JavaScript receives as exceptions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seedqkd_core::bounds::{alternative_bound, theorem1_bound, BoundInputs, SecurityParams};
use seedqkd_core::decoy_bb84::{key_rate, scan, table1_presets, ChannelModel, ProtocolParams};
use seedqkd_core::entropy::SeedQuality;
use seedqkd_core::hashing::HashFamilyDescriptor;
use seedqkd_core::oracle::{
    adversarial_seed_distributions, random_joint_distribution, verify_theorem1, BetaChoice,
    SeedStrategy, MAX_ORACLE_INPUT_BITS, MAX_ORACLE_OUTPUT_BITS,
};
use wasm_bindgen::prelude::*;

fn msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>, String> {
    if steps == 0 || !from.is_finite() || !to.is_finite() || from > to {
        return Err(format!(
            "need from <= to and at least 1 step, got {from}..{to} in {steps}"
        ));
    }
    let step = if steps == 1 {
        0.0
    } else {
        (to - from) / (steps - 1) as f64
    };
    Ok((0..steps).map(|i| from + step * i as f64).collect())
}

/// Secret key rate per pulse for `steps` evenly spaced values of the
/// per-bit seed min-entropy in `[h_from, h_to]`, at default link parameters.
/// One step evaluates `h_from` alone.
#[wasm_bindgen]
pub fn skr_curve(
    distance_km: f64,
    h_from: f64,
    h_to: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    let ch = ChannelModel::default().at_distance(distance_km);
    let proto = ProtocolParams::default();
    let sec = SecurityParams::default();
    grid(h_from, h_to, steps)?
        .into_iter()
        .map(|h| key_rate(&ch, &proto, &sec, h).map(|r| r.skr).map_err(msg))
        .collect()
}

/// Smallest per-bit seed min-entropy that still gives a positive key at
/// `distance_km`; `None` when no seed quality does.
#[wasm_bindgen]
pub fn critical_h(distance_km: f64) -> Result<Option<f64>, String> {
    let table = scan(
        &[1.0],
        &[distance_km],
        &ChannelModel::default(),
        &ProtocolParams::default(),
        &SecurityParams::default(),
    )
    .map_err(msg)?;
    Ok(table.critical[0].h_critical)
}

/// Names of the built-in RNG presets, joined with newlines.
#[wasm_bindgen]
pub fn preset_names() -> String {
    table1_presets()
        .iter()
        .map(|(n, _)| *n)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Per-bit min-entropy of the preset at `index` in `preset_names`.
#[wasm_bindgen]
pub fn preset_h_avg(index: usize) -> Option<f64> {
    table1_presets().get(index).map(|(_, h)| *h)
}

/// Both distance bounds at `eps = 0` for `steps` seed gaps spread over
/// `[0, gap_max]`, flattened as `gap, seed_gap_bound, alternative` triples.
#[wasm_bindgen]
pub fn bound_curves(
    hmin: f64,
    key_len: f64,
    gap_max: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(3 * steps);
    for gap in grid(0.0, gap_max, steps)? {
        let seed = SeedQuality::new(gap_max, gap_max - gap).map_err(msg)?;
        let b = BoundInputs::new(hmin, key_len, seed, 0.0).map_err(msg)?;
        out.extend([gap, theorem1_bound(&b), alternative_bound(&b)]);
    }
    Ok(out)
}

/// Largest seed gap at which the seed-gap bound is no looser than the
/// alternative; `None` when it is looser even for a uniform seed.
#[wasm_bindgen]
pub fn crossover_gap(hmin: f64, key_len: f64) -> Option<f64> {
    // 2^(l - hmin) (2^gap + 1) <= 1  <=>  gap <= log2(2^(hmin - l) - 1)
    let g = ((hmin - key_len).exp2() - 1.0).log2();
    (g >= 0.0).then_some(g)
}

/// Exact oracle comparison for one instance.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCheck {
    pub alpha: f64,
    pub beta: f64,
    pub hmin: f64,
    pub delta: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Draw a random `n`-bit source with side information, build the requested
/// adversarial seed distribution and compare the exact distance with the
/// bound. `strategy` is spike, block or uniform; `beta_choice` is alpha,
/// alpha-1, alpha-2 or half.
#[wasm_bindgen]
pub fn oracle_check(
    n: usize,
    l: usize,
    strategy: &str,
    beta_choice: &str,
    rng_seed: u32,
) -> Result<OracleCheck, String> {
    let strategy: SeedStrategy = strategy.parse().map_err(msg)?;
    let choice: BetaChoice = beta_choice.parse().map_err(msg)?;
    if n > MAX_ORACLE_INPUT_BITS || l > MAX_ORACLE_OUTPUT_BITS {
        return Err(format!(
            "oracle instances need n <= {MAX_ORACLE_INPUT_BITS} and l <= {MAX_ORACLE_OUTPUT_BITS}"
        ));
    }
    let family = HashFamilyDescriptor::new(n, l).map_err(msg)?;
    let beta = choice.beta(family.seed_len()) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(rng_seed));
    let p_xe = random_joint_distribution(&mut rng, n, 4);
    let seeds =
        adversarial_seed_distributions(family, beta, &[strategy], Some(&p_xe)).map_err(msg)?;
    let r = verify_theorem1(&p_xe, &seeds[0]).map_err(msg)?;
    Ok(OracleCheck {
        alpha: r.alpha,
        beta: r.beta,
        hmin: r.hmin,
        delta: r.delta,
        bound: r.bound,
        margin: r.margin,
        pass: r.pass,
    })
}
