//! `name{key=value, ...}` references used throughout scenario files.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Call {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl FromStr for Call {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.find('{') {
            Some(i) => (&s[..i], Some(&s[i..])),
            None => (s, None),
        };
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            bail!("bad registry name in `{s}`");
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            let body = rest
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| anyhow!("unbalanced braces in `{s}`"))?;
            for item in body.split(',').map(str::trim).filter(|i| !i.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("expected key=value, got `{item}` in `{s}`"))?;
                if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    bail!("duplicate key `{}` in `{s}`", k.trim());
                }
            }
        }
        Ok(Call { name: name.to_string(), params })
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let body: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "{{{}}}", body.join(", "))?;
        }
        Ok(())
    }
}

impl Call {
    /// Fails on keys outside `allowed`.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                bail!("`{}` does not take `{k}` (allowed: {})", self.name, allowed.join(", "));
            }
        }
        Ok(())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.params.get(key).ok_or_else(|| anyhow!("`{}` needs `{key}`", self.name))?;
        parse_number(v).with_context(|| format!("`{key}` in `{self}`"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.params.contains_key(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("`{key}` in `{self}` must be a non-negative integer")),
        }
    }

    pub fn i64_or(&self, key: &str, default: i64) -> Result<i64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.parse().with_context(|| format!("`{key}` in `{self}` must be an integer")),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).map(String::as_str).unwrap_or(default)
    }
}

/// Numbers, plus `pi`, `pi/k` and `k*pi`.
pub fn parse_number(v: &str) -> Result<f64> {
    let v = v.trim();
    let pi = std::f64::consts::PI;
    if v == "pi" {
        return Ok(pi);
    }
    if let Some(d) = v.strip_prefix("pi/") {
        return Ok(pi / d.parse::<f64>()?);
    }
    if let Some(m) = v.strip_suffix("*pi") {
        return Ok(m.parse::<f64>()? * pi);
    }
    Ok(v.parse::<f64>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_calls() {
        let c: Call = "harmonic{omega=1.5, dim=2}".parse().unwrap();
        assert_eq!(c.name, "harmonic");
        assert_eq!(c.f64("omega").unwrap(), 1.5);
        assert_eq!(c.usize_or("dim", 1).unwrap(), 2);
        assert_eq!(c.to_string(), "harmonic{dim=2, omega=1.5}");
        let bare: Call = "free".parse().unwrap();
        assert!(bare.params.is_empty());
        assert!("x{a=1".parse::<Call>().is_err());
        assert!("x{a}".parse::<Call>().is_err());
        assert!("{a=1}".parse::<Call>().is_err());
        assert!(c.expect_keys(&["omega"]).is_err());
    }

    #[test]
    fn pi_literals() {
        assert_eq!(parse_number("pi/2").unwrap(), std::f64::consts::FRAC_PI_2);
        assert_eq!(parse_number("2*pi").unwrap(), 2.0 * std::f64::consts::PI);
        assert!(parse_number("abc").is_err());
    }
}
