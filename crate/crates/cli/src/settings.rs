//! Config-file values, resolved as flag > file > built-in default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use episir::priors::{parse_key_values, PriorConfig};
use episir::SamplerConfig;

use crate::failure::{CliResult, Failure, InputContext};

/// Keys read by individual subcommands. Prior and sampler keys are listed by
/// their own types.
pub const COMMAND_KEYS: [&str; 14] = [
    "transform",
    "gamma_sd",
    "integerize",
    "stochastic",
    "region",
    "population",
    "threshold",
    "zero_floor",
    "train_until",
    "level",
    "horizon",
    "bins",
    "alpha2",
    "days",
];

pub fn known_keys() -> Vec<&'static str> {
    let mut keys: Vec<&str> = COMMAND_KEYS.to_vec();
    keys.extend(PriorConfig::KEYS);
    keys.extend(SamplerConfig::KEYS);
    keys
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).input(&format!("cannot read config {}", path.display()))?;
        let values = parse_key_values(&text).input(&format!("config {}", path.display()))?;
        Self::from_values(values)
    }

    pub fn from_values(values: BTreeMap<String, String>) -> CliResult<Self> {
        let known = known_keys();
        let unknown: Vec<&str> = values
            .keys()
            .map(String::as_str)
            .filter(|k| !known.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Failure::usage(format!("unknown config keys: {}", unknown.join(", "))));
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.trim().parse::<T>().input(&format!("config key {key} = `{v}`")))
            .transpose()
    }

    /// `flag` if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// `flag` if given, else the config value, if any.
    pub fn first<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Boolean switches can only be turned on from the command line.
    pub fn switch(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }

    /// Entries belonging to one of `keys`.
    pub fn subset(&self, keys: &[&str]) -> BTreeMap<String, String> {
        self.values
            .iter()
            .filter(|(k, _)| keys.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> CliResult<Settings> {
        Settings::from_values(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    #[test]
    fn precedence() {
        let s = settings(&[("horizon", "12")]).unwrap();
        assert_eq!(s.pick(Some(5usize), "horizon", 30).unwrap(), 5);
        assert_eq!(s.pick(None, "horizon", 30usize).unwrap(), 12);
        assert_eq!(s.pick(None, "bins", 5usize).unwrap(), 5);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(settings(&[("horizn", "3")]), Err(Failure::Usage(_))));
        let s = settings(&[("horizon", "many")]).unwrap();
        assert!(matches!(s.get::<usize>("horizon"), Err(Failure::Usage(_))));
    }

    #[test]
    fn prior_and_sampler_keys_are_known() {
        assert!(settings(&[("link", "probit"), ("chains", "3"), ("seed", "4")]).is_ok());
    }
}
