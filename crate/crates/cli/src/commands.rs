use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use seedqkd_core::bounds::{
    alternative_bound, compare_bounds, theorem1_bound, BoundInputs, KeyLengthBudget,
};
use seedqkd_core::config::ParamSet;
use seedqkd_core::decoy_bb84::{key_rate, preset, scan, table1_presets};
use seedqkd_core::entropy::{
    estimate_min_entropy_mcv, seed_quality_from_per_bit, SeedQuality, SymbolCounts, SymbolWidth,
};
use seedqkd_core::hashing::{privacy_amplify, BitString, ToeplitzSeed};
use seedqkd_core::oracle::{BetaChoice, SeedStrategy, SweepSpec};
use seedqkd_core::report::{self, fmt_num};
use seedqkd_core::Error;

use crate::output::emit;

pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_ESTIMATION: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;
pub const EXIT_CONFIG: u8 = 5;

pub const DEFAULT_RNG_SEED: u64 = 0x5eed;

const READ_CHUNK: usize = 1 << 20;

/// Secure key bounds for QKD with non-uniform privacy-amplification seeds.
///
/// Every result is written as CSV. Exit codes: 0 success, 1 bound violation
/// found by `verify`, 2 I/O error, 3 estimation error, 4 instance too large,
/// 5 invalid configuration or arguments.
///
/// Parameters (for keylen, keyrate and scan) come from defaults, then the
/// `--config` file, then SEEDQKD_<KEY> environment variables, then `--set`.
/// Keys: attenuation_db_per_km, distance_km, detector_efficiency,
/// dark_count_prob, misalignment, mu, nu, pulse_count, p_signal, p_weak,
/// p_vacuum, sifting_factor, ec_efficiency, eps_sec, eps_cor, eps_smooth.
#[derive(Debug, Parser)]
#[command(name = "seedqkd", version, verbatim_doc_comment)]
pub struct Cli {
    /// Parameter file of `key = value` lines
    #[arg(long, global = true, env = "SEEDQKD_CONFIG")]
    config: Option<PathBuf>,
    /// Output file (written atomically); stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for any internal randomness
    #[arg(long, global = true, default_value_t = DEFAULT_RNG_SEED, env = "SEEDQKD_RNG_SEED")]
    rng_seed: u64,
    /// Override one parameter, e.g. `--set mu=0.4`; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the min-entropy of a raw binary RNG dump
    Entropy(EntropyArgs),
    /// Evaluate the non-uniform-seed leftover hash bound
    Bound(BoundArgs),
    /// Compare the two distance bounds
    Compare(BoundArgs),
    /// Secure key length with the seed penalty
    Keylen(KeylenArgs),
    /// Simulate one two-decoy BB84 link
    Keyrate(KeyrateArgs),
    /// Key rate over seed quality and distance grids
    Scan(ScanArgs),
    /// Toeplitz privacy amplification of a key file
    Pa(PaArgs),
    /// Brute-force verification of the distance bound on small instances
    Verify(VerifyArgs),
    /// List the built-in RNG min-entropy presets
    Presets,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    /// Raw binary file; bits are read most-significant first
    #[arg(long)]
    file: PathBuf,
    /// Symbol width in bits (1 or 8)
    #[arg(long, default_value_t = 1)]
    symbol_bits: u32,
    /// One-sided confidence level of the lower bound
    #[arg(long, default_value_t = 0.99)]
    confidence: f64,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Seed length in bits
    #[arg(long)]
    alpha: f64,
    /// Seed min-entropy in bits (defaults to alpha)
    #[arg(long, conflicts_with = "h_avg")]
    beta: Option<f64>,
    /// Per-bit seed min-entropy; sets beta = h_avg * alpha
    #[arg(long)]
    h_avg: Option<f64>,
}

impl SeedArgs {
    fn quality(&self) -> Result<SeedQuality, Failure> {
        Ok(match (self.beta, self.h_avg) {
            (_, Some(h)) => seed_quality_from_per_bit(self.alpha, h)?,
            (Some(b), None) => SeedQuality::new(self.alpha, b)?,
            (None, None) => SeedQuality::uniform(self.alpha)?,
        })
    }
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Smooth min-entropy of the raw key given the adversary, in bits
    #[arg(long)]
    hmin: f64,
    /// Output key length in bits
    #[arg(long)]
    key_len: f64,
    #[command(flatten)]
    seed: SeedArgs,
    /// Smoothing parameter
    #[arg(long, default_value_t = 0.0)]
    eps_smooth: f64,
}

#[derive(Debug, Args)]
struct KeylenArgs {
    /// Smooth min-entropy of the raw key given the adversary, in bits
    #[arg(long)]
    hmin: f64,
    /// Bits leaked during error correction
    #[arg(long)]
    leak_ec: f64,
    #[command(flatten)]
    seed: SeedArgs,
}

#[derive(Debug, Args)]
struct KeyrateArgs {
    /// Per-bit seed min-entropy
    #[arg(long, default_value_t = 1.0, conflicts_with = "preset")]
    h_avg: f64,
    /// Use a named preset (see `presets`) for the seed min-entropy
    #[arg(long)]
    preset: Option<String>,
    /// Fiber length in km (overrides distance_km)
    #[arg(long)]
    distance: Option<f64>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Comma-separated per-bit seed min-entropies
    #[arg(long, value_delimiter = ',')]
    h_grid: Vec<f64>,
    /// Add the preset RNG values to the grid
    #[arg(long)]
    presets: bool,
    /// Comma-separated distances in km
    #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
    distances: Vec<f64>,
    /// Critical-threshold CSV; defaults to `<out stem>_critical.csv`
    #[arg(long)]
    critical_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PaArgs {
    /// Error-corrected key, raw bytes
    #[arg(long)]
    key: PathBuf,
    /// Toeplitz seed, raw bytes; the first n + l - 1 bits are used
    #[arg(long)]
    seed: PathBuf,
    /// Key length n in bits (defaults to every bit of the key file)
    #[arg(long)]
    key_bits: Option<usize>,
    /// Output length l in bits
    #[arg(long)]
    out_bits: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Input lengths n
    #[arg(long = "n", value_delimiter = ',', default_value = "2,3,4,5,6")]
    input_bits: Vec<usize>,
    /// Output lengths l
    #[arg(long = "l", value_delimiter = ',', default_value = "1,2,3")]
    output_bits: Vec<usize>,
    /// Seed strategies: spike, block, uniform
    #[arg(long, value_delimiter = ',', default_value = "spike,block,uniform")]
    strategies: Vec<String>,
    /// Seed min-entropies: alpha, alpha-1, alpha-2, half
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "alpha,alpha-1,alpha-2,half"
    )]
    betas: Vec<String>,
    /// Random joint distributions per cell
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Largest side-information alphabet
    #[arg(long, default_value_t = 4)]
    max_e: usize,
    /// Run one instance: first n, l, strategy and beta, one trial
    #[arg(long)]
    single: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Csv(_) => EXIT_IO,
            Error::Estimation(_) => EXIT_ESTIMATION,
            Error::Resource(_) => EXIT_RESOURCE,
            Error::Numeric(_) => EXIT_ESTIMATION,
            Error::Validation(_)
            | Error::Parameter(_)
            | Error::NotFound(_)
            | Error::Config(_)
            | Error::UnknownKey(_) => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

struct Ctx {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    rng_seed: u64,
    set: Vec<String>,
}

impl Ctx {
    fn params(&self) -> Result<ParamSet, Failure> {
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
                ParamSet::parse(&text)?
            }
            None => ParamSet::default(),
        };
        p.apply_env(|k| std::env::var(k).ok())?;
        p.apply_assignments(self.set.iter().map(String::as_str))?;
        Ok(p)
    }

    fn emit(&self, bytes: &[u8]) -> Result<(), Failure> {
        emit(self.out.as_deref(), bytes).map_err(|e| match &self.out {
            Some(p) => io_failure(p, e),
            None => Failure::new(EXIT_IO, e.to_string()),
        })
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    report::write_table(header, rows, &mut buf)?;
    Ok(buf)
}

pub fn run(cli: Cli) -> Result<u8, Failure> {
    let ctx = Ctx {
        config: cli.config,
        out: cli.out,
        rng_seed: cli.rng_seed,
        set: cli.set,
    };
    match cli.command {
        Command::Entropy(a) => cmd_entropy(&ctx, &a),
        Command::Bound(a) => cmd_bound(&ctx, &a),
        Command::Compare(a) => cmd_compare(&ctx, &a),
        Command::Keylen(a) => cmd_keylen(&ctx, &a),
        Command::Keyrate(a) => cmd_keyrate(&ctx, &a),
        Command::Scan(a) => cmd_scan(&ctx, &a),
        Command::Pa(a) => cmd_pa(&ctx, &a),
        Command::Verify(a) => cmd_verify(&ctx, &a),
        Command::Presets => cmd_presets(&ctx),
    }
}

fn cmd_entropy(ctx: &Ctx, a: &EntropyArgs) -> Result<u8, Failure> {
    let width = SymbolWidth::from_bits(a.symbol_bits)?;
    let file = File::open(&a.file).map_err(|e| io_failure(&a.file, e))?;
    let mut reader = BufReader::new(file);
    let mut counts = SymbolCounts::new(width);
    let mut buf = vec![0u8; READ_CHUNK];
    loop {
        let n = reader.read(&mut buf).map_err(|e| io_failure(&a.file, e))?;
        if n == 0 {
            break;
        }
        counts.add_bytes(&buf[..n]);
    }
    let est = estimate_min_entropy_mcv(&counts, a.confidence).map_err(|e| match e {
        // an empty stream is an estimation failure from the command's point of view
        Error::Validation(m) if counts.total() == 0 => Failure::new(EXIT_ESTIMATION, m),
        other => other.into(),
    })?;
    let rows = vec![vec![
        a.file.display().to_string(),
        est.sample_count.to_string(),
        est.symbol_bits.to_string(),
        fmt_num(est.confidence_level),
        fmt_num(est.point_estimate),
        fmt_num(est.lower_confidence_bound),
        fmt_num(est.point_per_bit()),
        fmt_num(est.lower_per_bit()),
    ]];
    let header = [
        "file",
        "sample_count",
        "symbol_bits",
        "confidence",
        "point_bits_per_symbol",
        "lower_bits_per_symbol",
        "point_per_bit",
        "lower_per_bit",
    ];
    ctx.emit(&csv_bytes(&header, &rows)?)?;
    Ok(0)
}

fn bound_inputs(a: &BoundArgs) -> Result<BoundInputs, Failure> {
    Ok(BoundInputs::new(
        a.hmin,
        a.key_len,
        a.seed.quality()?,
        a.eps_smooth,
    )?)
}

fn cmd_bound(ctx: &Ctx, a: &BoundArgs) -> Result<u8, Failure> {
    let b = bound_inputs(a)?;
    let c = compare_bounds(&b);
    let header = [
        "hmin",
        "key_len",
        "alpha",
        "beta",
        "gap",
        "eps_smooth",
        "theorem1_raw",
        "theorem1",
        "alternative_raw",
        "alternative",
    ];
    let rows = vec![vec![
        fmt_num(b.hmin),
        fmt_num(b.key_len),
        fmt_num(b.seed.alpha()),
        fmt_num(b.seed.beta()),
        fmt_num(b.seed.gap()),
        fmt_num(b.eps_smooth),
        fmt_num(c.theorem1_raw),
        fmt_num(theorem1_bound(&b)),
        fmt_num(c.alternative_raw),
        fmt_num(alternative_bound(&b)),
    ]];
    ctx.emit(&csv_bytes(&header, &rows)?)?;
    Ok(0)
}

fn cmd_compare(ctx: &Ctx, a: &BoundArgs) -> Result<u8, Failure> {
    let b = bound_inputs(a)?;
    let c = compare_bounds(&b);
    let header = [
        "hmin",
        "key_len",
        "gap",
        "eps_smooth",
        "theorem1",
        "alternative",
        "theorem1_raw",
        "alternative_raw",
        "tighter",
        "theorem1_predicted",
    ];
    let rows = vec![vec![
        fmt_num(b.hmin),
        fmt_num(b.key_len),
        fmt_num(b.seed.gap()),
        fmt_num(b.eps_smooth),
        fmt_num(c.theorem1_value),
        fmt_num(c.alternative_value),
        fmt_num(c.theorem1_raw),
        fmt_num(c.alternative_raw),
        c.tighter.as_str().to_string(),
        c.theorem1_predicted.to_string(),
    ]];
    ctx.emit(&csv_bytes(&header, &rows)?)?;
    Ok(0)
}

fn cmd_keylen(ctx: &Ctx, a: &KeylenArgs) -> Result<u8, Failure> {
    let sec = ctx.params()?.security()?;
    let b = KeyLengthBudget::evaluate(a.hmin, a.leak_ec, sec, a.seed.quality()?)?;
    let header = [
        "hmin",
        "leak_ec",
        "eps_sec",
        "eps_smooth",
        "eps_cor",
        "eps_total",
        "alpha",
        "beta",
        "gap",
        "raw_length",
        "key_len",
    ];
    let rows = vec![vec![
        fmt_num(b.hmin),
        fmt_num(b.leak_ec),
        fmt_num(sec.eps_sec()),
        fmt_num(sec.eps_smooth()),
        fmt_num(sec.eps_cor()),
        fmt_num(sec.eps_total()),
        fmt_num(b.seed.alpha()),
        fmt_num(b.seed.beta()),
        fmt_num(b.seed.gap()),
        fmt_num(b.raw_length),
        b.max_key_len.to_string(),
    ]];
    ctx.emit(&csv_bytes(&header, &rows)?)?;
    Ok(0)
}

fn cmd_keyrate(ctx: &Ctx, a: &KeyrateArgs) -> Result<u8, Failure> {
    let params = ctx.params()?;
    let mut ch = params.channel()?;
    if let Some(d) = a.distance {
        ch = ch.at_distance(d);
    }
    let h = match &a.preset {
        Some(name) => preset(name)?,
        None => a.h_avg,
    };
    let r = key_rate(&ch, &params.protocol()?, &params.security()?, h)?;
    let mut buf = Vec::new();
    report::write_scan_csv(&[r], &mut buf)?;
    ctx.emit(&buf)?;
    Ok(0)
}

fn critical_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_critical.csv"))
}

fn cmd_scan(ctx: &Ctx, a: &ScanArgs) -> Result<u8, Failure> {
    let params = ctx.params()?;
    let mut grid = a.h_grid.clone();
    if a.presets {
        grid.extend(table1_presets().iter().map(|p| p.1));
    }
    if grid.is_empty() {
        return Err(Failure::new(
            EXIT_CONFIG,
            "empty h grid: pass --h-grid and/or --presets",
        ));
    }
    let table = scan(
        &grid,
        &a.distances,
        &params.channel()?,
        &params.protocol()?,
        &params.security()?,
    )?;
    let mut rows = Vec::new();
    report::write_scan_csv(&table.rows, &mut rows)?;
    let mut critical = Vec::new();
    report::write_critical_csv(&table.critical, &mut critical)?;
    match (&ctx.out, &a.critical_out) {
        (Some(out), explicit) => {
            ctx.emit(&rows)?;
            let path = explicit.clone().unwrap_or_else(|| critical_path(out));
            crate::output::write_atomic(&path, &critical).map_err(|e| io_failure(&path, e))?;
        }
        (None, Some(path)) => {
            ctx.emit(&rows)?;
            crate::output::write_atomic(path, &critical).map_err(|e| io_failure(path, e))?;
        }
        (None, None) => {
            rows.push(b'\n');
            rows.extend_from_slice(&critical);
            ctx.emit(&rows)?;
        }
    }
    Ok(0)
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn cmd_pa(ctx: &Ctx, a: &PaArgs) -> Result<u8, Failure> {
    let key_bytes = read_file(&a.key)?;
    let seed_bytes = read_file(&a.seed)?;
    let n = a.key_bits.unwrap_or(key_bytes.len() * 8);
    let key = BitString::from_bytes_msb(&key_bytes, n)?;
    let seed_len = (n + a.out_bits).saturating_sub(1);
    let seed_bits = BitString::from_bytes_msb(&seed_bytes, seed_len)?;
    let seed = ToeplitzSeed::new(seed_bits, n, a.out_bits)?;
    let out = privacy_amplify(&key, &seed)?;
    let bytes = out.to_bytes_msb();
    match &ctx.out {
        Some(_) => ctx.emit(&bytes)?,
        None => {
            let mut hex = bytes.iter().fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            });
            hex.push('\n');
            ctx.emit(hex.as_bytes())?;
        }
    }
    Ok(0)
}

fn cmd_verify(ctx: &Ctx, a: &VerifyArgs) -> Result<u8, Failure> {
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.parse::<SeedStrategy>())
        .collect::<Result<Vec<_>, _>>()?;
    let betas = a
        .betas
        .iter()
        .map(|s| s.parse::<BetaChoice>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = SweepSpec {
        input_bits: a.input_bits.clone(),
        output_bits: a.output_bits.clone(),
        strategies,
        betas,
        trials: a.trials,
        max_e_alphabet: a.max_e,
        rng_seed: ctx.rng_seed,
    };
    if a.single {
        spec.input_bits.truncate(1);
        spec.output_bits.truncate(1);
        spec.strategies.truncate(1);
        spec.betas.truncate(1);
        spec.trials = 1;
        if spec.output_bits.first() > spec.input_bits.first() {
            return Err(Failure::new(EXIT_CONFIG, "single instance needs l <= n"));
        }
    }
    let rows = spec.run()?;
    let mut buf = Vec::new();
    report::write_verify_csv(&rows, &mut buf)?;
    ctx.emit(&buf)?;
    let violations = rows.iter().filter(|r| !r.report.pass).count();
    let min_margin = rows
        .iter()
        .map(|r| r.report.margin)
        .fold(f64::INFINITY, f64::min);
    eprintln!(
        "{} instances, {violations} violations, smallest margin {}",
        rows.len(),
        fmt_num(min_margin)
    );
    Ok(if violations == 0 { 0 } else { EXIT_VIOLATION })
}

fn cmd_presets(ctx: &Ctx) -> Result<u8, Failure> {
    let rows: Vec<Vec<String>> = table1_presets()
        .iter()
        .map(|(name, h)| vec![name.to_string(), format!("{h:.3}")])
        .collect();
    ctx.emit(&csv_bytes(&["name", "h_avg"], &rows)?)?;
    Ok(0)
}
