//! Keyed configuration files and flag resolution.
//!
//! A config file holds `section.key = value` lines. Blank lines and lines
//! starting with `#` are skipped. The section is the subcommand name, so
//! `verify.eps = 1e-4` supplies `--eps` to `barkley verify`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || CliError::Usage(format!("config line {}: expected `section.key = value`, got `{line}`", no + 1));
            let (lhs, value) = line.split_once('=').ok_or_else(bad)?;
            let (section, key) = lhs.trim().split_once('.').ok_or_else(bad)?;
            let (section, key, value) = (section.trim(), key.trim(), value.trim());
            if section.is_empty() || key.is_empty() || value.is_empty() {
                return Err(bad());
            }
            entries.entry(section.to_string()).or_default().insert(key.to_string(), value.to_string());
        }
        Ok(Self { entries })
    }

    /// View of one section that rejects keys outside `known`.
    pub fn section<'a>(&'a self, name: &'a str, known: &[&str]) -> Result<Section<'a>, CliError> {
        let map = self.entries.get(name);
        if let Some(map) = map {
            if let Some(key) = map.keys().find(|k| !known.contains(&k.as_str())) {
                return Err(CliError::Usage(format!("unknown config key `{name}.{key}`")));
            }
        }
        Ok(Section { name, map })
    }
}

/// Flag lookup with precedence flag > file > default.
pub struct Section<'a> {
    name: &'a str,
    map: Option<&'a BTreeMap<String, String>>,
}

impl Section<'_> {
    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.and_then(|m| m.get(key)) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config value `{}.{key} = {raw}` does not parse", self.name))),
        }
    }

    pub fn or<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        self.get(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing required value --{key}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let cfg = ConfigFile::parse("# comment\nverify.eps = 1e-4\n\nverify.c=0.1\n").unwrap();
        let s = cfg.section("verify", &["r", "eps", "c"]).unwrap();
        assert_eq!(s.or("eps", None, 1e-3).unwrap(), 1e-4);
        assert_eq!(s.or("eps", Some(2e-3), 1e-3).unwrap(), 2e-3);
        assert_eq!(s.or("r", None, 0.7).unwrap(), 0.7);
        assert!(s.require::<f64>("r", None).is_err());
    }

    #[test]
    fn rejects_malformed_lines_and_unknown_keys() {
        assert!(ConfigFile::parse("verify eps 1").is_err());
        assert!(ConfigFile::parse("eps = 1").is_err());
        let cfg = ConfigFile::parse("verify.bogus = 1").unwrap();
        assert!(cfg.section("verify", &["r"]).is_err());
        assert!(cfg.section("shoot", &["r"]).is_ok());
        let cfg = ConfigFile::parse("verify.r = abc").unwrap();
        assert!(cfg.section("verify", &["r"]).unwrap().get::<f64>("r", None).is_err());
    }
}
