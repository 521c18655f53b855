//! Plain-text `key = value` parameter files.
//!
//! One assignment per line, `#` starts a comment. Unknown or repeated keys
//! are errors. Environment variables named `SEEDQKD_<KEY>` (key upper-cased)
//! override file values.

use std::collections::BTreeMap;

use crate::bounds::SecurityParams;
use crate::decoy_bb84::{ChannelModel, ProtocolParams};
use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "SEEDQKD_";

/// Every accepted key, in the order they are documented.
pub const KEYS: [&str; 16] = [
    "attenuation_db_per_km",
    "distance_km",
    "detector_efficiency",
    "dark_count_prob",
    "misalignment",
    "mu",
    "nu",
    "pulse_count",
    "p_signal",
    "p_weak",
    "p_vacuum",
    "sifting_factor",
    "ec_efficiency",
    "eps_sec",
    "eps_cor",
    "eps_smooth",
];

/// Parsed overrides; anything absent keeps its default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    values: BTreeMap<String, f64>,
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::UnknownKey(key.to_string()))
    }
}

fn parse_value(key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("`{key}`: `{}` is not a finite number", raw.trim())))
}

impl ParamSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            check_key(key)?;
            if set.values.contains_key(key) {
                return Err(Error::Config(format!(
                    "line {}: `{key}` set twice",
                    lineno + 1
                )));
            }
            set.values.insert(key.to_string(), parse_value(key, value)?);
        }
        Ok(set)
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Apply `key=value` pairs given on the command line.
    pub fn apply_assignments<'a, I: IntoIterator<Item = &'a str>>(
        &mut self,
        pairs: I,
    ) -> Result<()> {
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("`{pair}` is not key=value")))?;
            let key = key.trim();
            check_key(key)?;
            self.values
                .insert(key.to_string(), parse_value(key, value)?);
        }
        Ok(())
    }

    /// Apply `SEEDQKD_<KEY>` overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<()> {
        for key in KEYS {
            if let Some(raw) = lookup(&format!("{ENV_PREFIX}{}", key.to_uppercase())) {
                self.values.insert(key.to_string(), parse_value(key, &raw)?);
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    fn or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        let d = ChannelModel::default();
        let ch = ChannelModel {
            attenuation: self.or("attenuation_db_per_km", d.attenuation),
            distance_km: self.or("distance_km", d.distance_km),
            detector_efficiency: self.or("detector_efficiency", d.detector_efficiency),
            dark_count_prob: self.or("dark_count_prob", d.dark_count_prob),
            misalignment: self.or("misalignment", d.misalignment),
        };
        ch.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(ch)
    }

    pub fn protocol(&self) -> Result<ProtocolParams> {
        let d = ProtocolParams::default();
        let p = ProtocolParams {
            mu: self.or("mu", d.mu),
            nu: self.or("nu", d.nu),
            pulse_count: self.or("pulse_count", d.pulse_count),
            p_signal: self.or("p_signal", d.p_signal),
            p_weak: self.or("p_weak", d.p_weak),
            p_vacuum: self.or("p_vacuum", d.p_vacuum),
            sifting_factor: self.or("sifting_factor", d.sifting_factor),
            ec_efficiency: self.or("ec_efficiency", d.ec_efficiency),
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    /// Smoothing defaults to a tenth of the secrecy parameter.
    pub fn security(&self) -> Result<SecurityParams> {
        let eps_sec = self.or("eps_sec", SecurityParams::DEFAULT_EPS_SEC);
        let eps_cor = self.or("eps_cor", SecurityParams::DEFAULT_EPS_COR);
        let eps_smooth = self.or("eps_smooth", eps_sec / 10.0);
        SecurityParams::new(eps_smooth, eps_sec, eps_cor).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let p = ParamSet::parse("# channel\n mu = 0.4 \n\nnu=0.05 # weak\n").unwrap();
        assert_eq!(p.get("mu"), Some(0.4));
        assert_eq!(p.protocol().unwrap().nu, 0.05);
        assert_eq!(p.channel().unwrap(), ChannelModel::default());
    }

    #[test]
    fn strict_parsing() {
        match ParamSet::parse("mu = 0.4\nattenuaton = 0.2\n") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "attenuaton"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ParamSet::parse("mu = 0.4\nmu = 0.3"),
            Err(Error::Config(_))
        ));
        assert!(matches!(ParamSet::parse("mu 0.4"), Err(Error::Config(_))));
        assert!(matches!(
            ParamSet::parse("mu = fast"),
            Err(Error::Config(_))
        ));
        assert!(matches!(ParamSet::parse("mu = inf"), Err(Error::Config(_))));
    }

    #[test]
    fn derived_checks_surface_as_config_errors() {
        let p = ParamSet::parse("nu = 0.7").unwrap();
        assert!(matches!(p.protocol(), Err(Error::Config(_))));
        let p = ParamSet::parse("eps_sec = 1e-9\neps_smooth = 1e-8").unwrap();
        assert!(matches!(p.security(), Err(Error::Config(_))));
        let s = ParamSet::default().security().unwrap();
        assert_eq!(s, SecurityParams::default());
    }

    #[test]
    fn environment_and_assignment_overrides() {
        let mut p = ParamSet::parse("mu = 0.4").unwrap();
        p.apply_env(|k| (k == "SEEDQKD_MU").then(|| "0.6".to_string()))
            .unwrap();
        assert_eq!(p.get("mu"), Some(0.6));
        p.apply_assignments(["mu=0.45", "pulse_count=1e9"]).unwrap();
        assert_eq!((p.get("mu"), p.get("pulse_count")), (Some(0.45), Some(1e9)));
        assert!(matches!(
            p.apply_assignments(["speed=1"]),
            Err(Error::UnknownKey(_))
        ));
    }
}
