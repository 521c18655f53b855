//! CSV output. Numbers carry 12 significant digits with `.` as the decimal
//! separator, so identical inputs give byte-identical files.

use std::io::Write;

use crate::decoy_bb84::{CriticalPoint, KeyRateResult};
use crate::error::Result;
use crate::oracle::SweepRow;

pub const SCAN_HEADER: [&str; 10] = [
    "distance_km",
    "h_avg",
    "Q_mu",
    "E_mu",
    "Y1_lower",
    "e1_upper",
    "n_sift",
    "key_len",
    "penalty_bits",
    "skr",
];
pub const CRITICAL_HEADER: [&str; 2] = ["distance_km", "h_critical"];
pub const VERIFY_HEADER: [&str; 14] = [
    "n",
    "l",
    "e_alphabet",
    "strategy",
    "beta_choice",
    "trial",
    "alpha",
    "beta",
    "hmin",
    "delta",
    "bound",
    "margin",
    "pass",
    "violation",
];

/// Shortest decimal rendering of `x` rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_fraction(mantissa), exp)
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_scan_csv<W: Write>(rows: &[KeyRateResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_num(r.distance_km),
            fmt_num(r.h_avg),
            fmt_num(r.signal.gain),
            fmt_num(r.signal.qber),
            fmt_num(r.y1_lower),
            fmt_num(r.e1_upper),
            fmt_num(r.n_sift),
            r.key_len.to_string(),
            fmt_num(r.penalty),
            fmt_num(r.skr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_critical_csv<W: Write>(points: &[CriticalPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CRITICAL_HEADER)?;
    for p in points {
        w.write_record([
            fmt_num(p.distance_km),
            p.h_critical.map(fmt_num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_verify_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER)?;
    for row in rows {
        let r = &row.report;
        w.write_record([
            r.n.to_string(),
            r.l.to_string(),
            row.e_alphabet.to_string(),
            row.strategy.as_str().to_string(),
            row.beta_choice.as_str().to_string(),
            row.trial.to_string(),
            fmt_num(r.alpha),
            fmt_num(r.beta),
            fmt_num(r.hmin),
            fmt_num(r.delta),
            fmt_num(r.bound),
            fmt_num(r.margin),
            r.pass.to_string(),
            (!r.pass).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic header + rows writer for the small one-shot reports.
pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<String>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
