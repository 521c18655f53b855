//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the committed critical-threshold table.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seedqkd_core::bounds::{
    alternative_bound_raw, key_length, theorem1_bound_raw, BoundInputs, SecurityParams,
};
use seedqkd_core::decoy_bb84::{
    decoy_estimates, gain_qber, scan, table1_presets, ChannelModel, ProtocolParams, ScanTable, E0,
};
use seedqkd_core::entropy::{estimate_min_entropy_mcv, SeedQuality, SymbolCounts, SymbolWidth};
use seedqkd_core::hashing::{collision_count_exhaustive, BitString, HashFamilyDescriptor};
use seedqkd_core::oracle::SweepSpec;
use seedqkd_core::report::{write_critical_csv, write_scan_csv};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bound_reduction() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            let l = 8.0 * f64::from(j);
            let hmin = l + 6.0 * f64::from(i) - 10.0;
            let b = BoundInputs::new(hmin, l, SeedQuality::uniform(200.0).unwrap(), 0.0).unwrap();
            let classical = 0.5 * (-(hmin - l) / 2.0).exp2();
            let t = theorem1_bound_raw(&b);
            let a = alternative_bound_raw(&b);
            worst = worst
                .max((t - a).abs())
                .max((t - classical).abs())
                .max((a - classical).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("100 grid points, max deviation {worst:.3e} (tol 1e-12)"),
    )
}

fn oracle_suite() -> Outcome {
    let spec = SweepSpec::default();
    let rows = spec.run().expect("sweep within enumeration bounds");
    let violations = rows.iter().filter(|r| !r.report.pass).count();
    let min_margin = rows
        .iter()
        .map(|r| r.report.margin)
        .fold(f64::INFINITY, f64::min);
    let tight = rows.iter().filter(|r| r.report.bound < 1.0).count();
    outcome(
        violations == 0 && !rows.is_empty(),
        format!(
            "{} instances ({} with a non-trivial bound), {violations} violations, min margin {min_margin:.3e}",
            rows.len(),
            tight
        ),
    )
}

fn toeplitz_universality() -> Outcome {
    let mut pairs = 0u64;
    let mut bad = 0u64;
    for n in 1..=6usize {
        for l in 1..=n.min(3) {
            let fam = HashFamilyDescriptor::new(n, l).unwrap();
            let want = 1u64 << (fam.seed_len() - l);
            for x in 0..(1u64 << n) {
                for y in (x + 1)..(1u64 << n) {
                    let (hits, total) = collision_count_exhaustive(
                        fam,
                        &BitString::from_u64(x, n),
                        &BitString::from_u64(y, n),
                    )
                    .unwrap();
                    assert_eq!(total, 1 << fam.seed_len());
                    pairs += 1;
                    bad += u64::from(hits != want);
                }
            }
        }
    }
    outcome(
        bad == 0,
        format!("{pairs} distinct pairs, {bad} with collision probability != 2^-l"),
    )
}

fn penalty_slope() -> Outcome {
    let sec = SecurityParams::default();
    let alpha = 1000.0;
    let base = key_length(4000.0, 800.0, sec, SeedQuality::uniform(alpha).unwrap()).unwrap();
    let mut bad = Vec::new();
    for gap in 0..=200u64 {
        let seed = SeedQuality::new(alpha, alpha - gap as f64).unwrap();
        let l = key_length(4000.0, 800.0, sec, seed).unwrap();
        if l != base - gap {
            bad.push(gap);
        }
    }
    outcome(
        bad.is_empty(),
        format!("gap 0..=200 from base {base}, mismatched gaps {bad:?}"),
    )
}

fn reference_scan() -> ScanTable {
    let mut hs: Vec<f64> = (80..=100).map(|i| f64::from(i) / 100.0).collect();
    hs.extend(table1_presets().iter().map(|p| p.1));
    scan(
        &hs,
        &[10.0, 50.0, 100.0],
        &ChannelModel::default(),
        &ProtocolParams::default(),
        &SecurityParams::default(),
    )
    .unwrap()
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/critical_h.csv")
}

fn seed_quality_claim() -> Vec<(&'static str, Outcome)> {
    assert_eq!(ProtocolParams::default().pulse_count, 1e10);
    let table = reference_scan();
    let per_distance: Vec<_> = table
        .rows
        .chunk_by(|a, b| a.distance_km == b.distance_km)
        .collect();

    let monotone = per_distance
        .iter()
        .all(|rows| rows.windows(2).all(|w| w[0].skr <= w[1].skr));
    let a = outcome(
        monotone,
        format!(
            "{} distances x {} h values",
            per_distance.len(),
            per_distance[0].len()
        ),
    );

    let finite = table
        .critical
        .iter()
        .all(|c| c.h_critical.is_some_and(|h| h > 0.0 && h < 1.0));
    let mut csv = Vec::new();
    write_critical_csv(&table.critical, &mut csv).unwrap();
    let golden = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &csv).unwrap();
    }
    let matches_golden = std::fs::read(&golden).map(|g| g == csv).unwrap_or(false);
    let shown: Vec<String> = table
        .critical
        .iter()
        .map(|c| format!("{}km:{:?}", c.distance_km, c.h_critical))
        .collect();
    let b = outcome(
        finite && matches_golden,
        format!(
            "h* {} ; golden file {}",
            shown.join(" "),
            if matches_golden { "matches" } else { "DIFFERS" }
        ),
    );

    let ratios: Vec<(f64, f64)> = per_distance
        .iter()
        .map(|rows| {
            let at = |h: f64| rows.iter().find(|r| r.h_avg == h).unwrap().skr;
            (rows[0].distance_km, at(0.93) / at(1.0))
        })
        .collect();
    let c = outcome(
        ratios.iter().any(|(_, r)| *r < 0.5),
        format!(
            "skr(0.93)/skr(1.0): {}",
            ratios
                .iter()
                .map(|(d, r)| format!("{d}km={r:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    vec![
        ("Seed-quality claim (a): skr monotone in h_avg", a),
        ("Seed-quality claim (b): finite critical h* per distance", b),
        (
            "Seed-quality claim (c): skr(0.93) < 50% skr(1.0) somewhere",
            c,
        ),
    ]
}

fn presets_round_trip() -> Outcome {
    let want = [
        ("IDQ Quantis-PCIe-40M", 0.990),
        ("MATLAB unifrnd", 0.988),
        ("Random.org", 0.931),
        ("Intel DRNG", 0.930),
    ];
    let got = table1_presets();
    outcome(got == want.as_slice(), format!("{got:?}"))
}

/// Poisson-weighted sums over photon number with yield
/// `Y_n = Y0 + 1 - (1 - eta)^n` and error yield `e0 Y0 + e_d (1 - (1 - eta)^n)`.
fn photon_resolved(ch: &ChannelModel, intensity: f64) -> (f64, f64) {
    let eta = ch.eta();
    let (mut gain, mut errors) = (0.0, 0.0);
    let mut weight = (-intensity).exp();
    for n in 0..200 {
        let click = 1.0 - (1.0 - eta).powi(n);
        gain += weight * (ch.dark_count_prob + click);
        errors += weight * (E0 * ch.dark_count_prob + ch.misalignment * click);
        weight *= intensity / f64::from(n + 1);
    }
    (gain, errors / gain)
}

fn decoy_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let mut model_gap: f64 = 0.0;
    for i in 0..100 {
        let ch = ChannelModel {
            attenuation: rng.gen_range(0.15..0.25),
            distance_km: rng.gen_range(0.0..200.0),
            detector_efficiency: rng.gen_range(0.05..0.9),
            dark_count_prob: 10f64.powf(rng.gen_range(-7.0..-4.0)),
            misalignment: rng.gen_range(0.0..0.05),
        };
        let mu = rng.gen_range(0.2..0.9);
        let nu = mu * rng.gen_range(0.05..0.6);
        let (q_mu, e_mu) = photon_resolved(&ch, mu);
        let (q_nu, e_nu) = photon_resolved(&ch, nu);
        let (q_vac, _) = photon_resolved(&ch, 0.0);
        let closed = gain_qber(&ch, mu).unwrap();
        model_gap = model_gap.max((closed.gain - q_mu).abs() / q_mu);
        let d = decoy_estimates(q_mu, e_mu, q_nu, e_nu, q_vac, mu, nu).unwrap();
        let y1_true = ch.dark_count_prob + ch.eta();
        let e1_true = (E0 * ch.dark_count_prob + ch.misalignment * ch.eta()) / y1_true;
        if d.y1_lower > y1_true * (1.0 + 1e-12) || d.e1_upper < e1_true * (1.0 - 1e-12) {
            failures.push(i);
        }
    }
    outcome(
        failures.is_empty() && model_gap < 1e-9,
        format!("100 parameter sets, failing {failures:?}; closed-form gain vs photon sum rel. diff {model_gap:.2e}"),
    )
}

fn entropy_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for p in [0.5, 0.6, 0.75, 0.9] {
        // 10^6 bits, zero with probability p, packed most-significant first
        let bytes: Vec<u8> = (0..125_000)
            .map(|_| (0..8).fold(0u8, |acc, _| (acc << 1) | u8::from(rng.gen::<f64>() >= p)))
            .collect();
        let counts = SymbolCounts::from_bytes(&bytes, SymbolWidth::Bit);
        assert_eq!(counts.total(), 1_000_000);
        let est = estimate_min_entropy_mcv(&counts, 0.99).unwrap();
        let err = (est.point_estimate - (-p.log2())).abs();
        worst = worst.max(err);
        parts.push(format!("p={p}:{:.4}", est.point_estimate));
    }
    outcome(
        worst <= 0.01,
        format!("{} ; max error {worst:.4} bits (tol 0.01)", parts.join(" ")),
    )
}

fn determinism() -> Outcome {
    let render = || {
        let t = reference_scan();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_scan_csv(&t.rows, &mut a).unwrap();
        write_critical_csv(&t.critical, &mut b).unwrap();
        (a, b)
    };
    let first = render();
    let second = render();
    outcome(
        first == second,
        format!("{} + {} bytes", first.0.len(), first.1.len()),
    )
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail
                .push_str(&format!(" ; runtime {elapsed:.2?} over limit {limit:.0?}"));
        }
    }
    (o, elapsed)
}

/// Name, time limit and body of one criterion.
type Check = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut results: Vec<(&str, Outcome, Duration)> = Vec::new();
    let checks: [Check; 4] = [
        (
            "Bound reduction at zero gap",
            Some(secs(1)),
            bound_reduction,
        ),
        ("Seed-gap bound oracle sweep", Some(secs(300)), oracle_suite),
        (
            "Toeplitz universality",
            Some(secs(60)),
            toeplitz_universality,
        ),
        ("Key-length penalty slope", None, penalty_slope),
    ];
    for (name, limit, f) in checks {
        let (o, t) = timed(limit, f);
        results.push((name, o, t));
    }
    let start = Instant::now();
    let claims = seed_quality_claim();
    let claim_time = start.elapsed();
    for (name, o) in claims {
        results.push((name, o, claim_time));
    }
    let checks: [Check; 4] = [
        ("Preset round trip", None, presets_round_trip),
        ("Decoy-bound soundness", Some(secs(10)), decoy_soundness),
        (
            "Entropy estimator calibration",
            Some(secs(30)),
            entropy_calibration,
        ),
        ("Scan determinism", None, determinism),
    ];
    for (name, limit, f) in checks {
        let (o, t) = timed(limit, f);
        results.push((name, o, t));
    }

    let mut failed = 0;
    for (name, o, t) in &results {
        println!(
            "{} {name} [{t:.2?}] {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
