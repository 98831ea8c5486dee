//! `key=value` configuration files. Keys use the long flag names without the
//! leading dashes; flags given on the command line take precedence.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use mtfs::Error;

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, (usize, String)>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected key=value", i + 1))
            })?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::InvalidConfig(format!("config line {}: bad key {k:?}", i + 1)));
            }
            if values.insert(k.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::InvalidConfig(format!("config line {}: duplicate key {k:?}", i + 1)));
            }
        }
        Ok(Self {
            values,
            used: RefCell::default(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        match path {
            None => Ok(Self::default()),
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(|e| {
                Error::InvalidInput(format!("cannot read config {}: {e}", p.display()))
            })?),
        }
    }

    /// The flag if given, else the config value, else `None`.
    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, Error>
    where
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| {
                Error::InvalidConfig(format!("config line {line}: bad value for {key}: {e}"))
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, Error>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    /// Rejects keys that no setting asked for.
    pub fn finish(&self) -> Result<(), Error> {
        let used = self.used.borrow();
        match self.values.iter().find(|(k, _)| !used.contains(*k)) {
            Some((k, (line, _))) => Err(Error::InvalidConfig(format!("config line {line}: unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}
