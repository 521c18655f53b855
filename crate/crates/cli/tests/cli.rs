use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use seedqkd_core::hashing::{privacy_amplify, BitString, ToeplitzSeed};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seedqkd"))
        .args(args)
        .env_remove("SEEDQKD_CONFIG")
        .env_remove("SEEDQKD_RNG_SEED")
        .output()
        .expect("spawn seedqkd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn entropy_of_constant_file_is_zero() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("zeros.bin");
    fs::write(&f, vec![0u8; 4096]).unwrap();
    let o = run(&["entropy", "--file", path_str(&f)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "point_per_bit"), ["0"]);
    assert_eq!(field(&out, "lower_per_bit"), ["0"]);
}

#[test]
fn entropy_of_fair_coin_file_is_near_one() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("coin.bin");
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let bytes: Vec<u8> = (0..1 << 20).map(|_| rng.gen()).collect();
    fs::write(&f, bytes).unwrap();
    for bits in ["1", "8"] {
        let o = run(&["entropy", "--file", path_str(&f), "--symbol-bits", bits]);
        assert_eq!(o.status.code(), Some(0));
        let out = stdout(&o);
        let point: f64 = field(&out, "point_per_bit")[0].parse().unwrap();
        let lower: f64 = field(&out, "lower_per_bit")[0].parse().unwrap();
        assert!((point - 1.0).abs() < 0.01, "symbol bits {bits}: {point}");
        assert!(lower <= point);
    }
}

#[test]
fn entropy_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.bin");
    assert_eq!(
        run(&["entropy", "--file", path_str(&missing)])
            .status
            .code(),
        Some(2)
    );

    let empty = dir.path().join("empty.bin");
    fs::write(&empty, b"").unwrap();
    assert_eq!(
        run(&["entropy", "--file", path_str(&empty)]).status.code(),
        Some(3)
    );

    let short = dir.path().join("short.bin");
    fs::write(&short, [0x5au8; 10]).unwrap();
    assert_eq!(
        run(&["entropy", "--file", path_str(&short)]).status.code(),
        Some(3)
    );

    let f = dir.path().join("ok.bin");
    fs::write(&f, [0u8; 1024]).unwrap();
    let o = run(&["entropy", "--file", path_str(&f), "--symbol-bits", "4"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn default_verify_sweep_finds_no_violation() {
    let o = run(&["verify", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let violations = field(&out, "violation");
    assert!(!violations.is_empty());
    assert!(violations.iter().all(|v| v == "false"));
    assert!(stderr(&o).contains("0 violations"));
}

#[test]
fn verify_single_emits_one_row() {
    let o = run(&["verify", "--single"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn oversized_verify_instance_is_a_resource_error() {
    let o = run(&["verify", "--n", "10", "--l", "5", "--single"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("seedqkd:"));
}

#[test]
fn scan_with_presets_covers_every_pair() {
    let o = run(&["scan", "--presets", "--distances", "10,50,100"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut parts = out.split("\n\n");
    let table = parts.next().unwrap();
    let critical = parts.next().unwrap();
    assert_eq!(table.lines().count(), 1 + 12);
    assert_eq!(critical.lines().next().unwrap(), "distance_km,h_critical");
    assert_eq!(critical.lines().filter(|l| !l.is_empty()).count(), 1 + 3);
}

#[test]
fn scan_files_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut previous: Option<(Vec<u8>, Vec<u8>)> = None;
    for round in 0..2 {
        let out = dir.path().join(format!("scan{round}.csv"));
        let o = run(&[
            "--out",
            path_str(&out),
            "scan",
            "--h-grid",
            "0.9,0.95,1.0",
            "--presets",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        let crit = dir.path().join(format!("scan{round}_critical.csv"));
        let pair = (fs::read(&out).unwrap(), fs::read(&crit).unwrap());
        if let Some(p) = &previous {
            assert_eq!(p, &pair);
        }
        previous = Some(pair);
    }
}

#[test]
fn scan_rejects_empty_grid() {
    assert_eq!(run(&["scan"]).status.code(), Some(5));
    assert_eq!(run(&["scan", "--h-grid", "1.5"]).status.code(), Some(5));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("params.cfg");
    fs::write(&cfg, "mu = 0.5\nmu_signal = 0.4\n").unwrap();
    let o = run(&["--config", path_str(&cfg), "keyrate"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("mu_signal"));

    let o = run(&["--set", "bogus=1", "keyrate"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn config_layers_apply_in_order() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("params.cfg");
    fs::write(&cfg, "distance_km = 50\n").unwrap();
    let from_file = stdout(&run(&["--config", path_str(&cfg), "keyrate"]));
    assert_eq!(field(&from_file, "distance_km"), ["50"]);

    let env = Command::new(env!("CARGO_BIN_EXE_seedqkd"))
        .args(["keyrate"])
        .env("SEEDQKD_CONFIG", &cfg)
        .env("SEEDQKD_DISTANCE_KM", "60")
        .output()
        .unwrap();
    assert_eq!(field(&stdout(&env), "distance_km"), ["60"]);

    let set = stdout(&run(&[
        "--config",
        path_str(&cfg),
        "--set",
        "distance_km=70",
        "keyrate",
    ]));
    assert_eq!(field(&set, "distance_km"), ["70"]);
}

#[test]
fn keylen_applies_the_seed_penalty() {
    let base = stdout(&run(&[
        "keylen",
        "--hmin",
        "900",
        "--leak-ec",
        "200",
        "--alpha",
        "69",
    ]));
    let gapped = stdout(&run(&[
        "keylen",
        "--hmin",
        "900",
        "--leak-ec",
        "200",
        "--alpha",
        "69",
        "--beta",
        "0",
    ]));
    assert_eq!(field(&base, "key_len"), ["591"]);
    assert_eq!(field(&gapped, "key_len"), ["522"]);
}

#[test]
fn keyrate_preset_matches_h_avg() {
    let a = stdout(&run(&[
        "keyrate",
        "--preset",
        "Random.org",
        "--distance",
        "50",
    ]));
    let b = stdout(&run(&["keyrate", "--h-avg", "0.931", "--distance", "50"]));
    assert_eq!(a, b);
    assert_eq!(run(&["keyrate", "--preset", "nope"]).status.code(), Some(5));
}

#[test]
fn presets_lists_four_sources() {
    let out = stdout(&run(&["presets"]));
    assert_eq!(field(&out, "h_avg"), ["0.990", "0.988", "0.931", "0.930"]);
}

#[test]
fn pa_matches_library_hash() {
    let dir = TempDir::new().unwrap();
    let key_bytes = [0x3cu8, 0xa5, 0x0f];
    let seed_bytes = [0x96u8, 0x1e, 0x77, 0xc3];
    let (n, l) = (24usize, 8usize);
    let kf = dir.path().join("key.bin");
    let sf = dir.path().join("seed.bin");
    fs::write(&kf, key_bytes).unwrap();
    fs::write(&sf, seed_bytes).unwrap();

    let key = BitString::from_bytes_msb(&key_bytes, n).unwrap();
    let seed = ToeplitzSeed::new(
        BitString::from_bytes_msb(&seed_bytes, n + l - 1).unwrap(),
        n,
        l,
    )
    .unwrap();
    let expected = privacy_amplify(&key, &seed).unwrap().to_bytes_msb();

    let o = run(&[
        "pa",
        "--key",
        path_str(&kf),
        "--seed",
        path_str(&sf),
        "--out-bits",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), format!("{:02x}", expected[0]));

    let out = dir.path().join("final.bin");
    let o = run(&[
        "--out",
        path_str(&out),
        "pa",
        "--key",
        path_str(&kf),
        "--seed",
        path_str(&sf),
        "--out-bits",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&out).unwrap(), expected);

    let o = run(&[
        "pa",
        "--key",
        path_str(&kf),
        "--seed",
        path_str(&sf),
        "--out-bits",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(5), "short seed must be rejected");
}
