//! Generation parameters and their `key=value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! d = 3
//! horizon = 10
//! reliable_channels = true
//! trap = nondet
//! byzantine = nondet
//! ```

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    Never,
    Nondeterministic,
}

impl Policy {
    pub fn parse(s: &str) -> Option<Policy> {
        match s {
            "never" | "false" => Some(Policy::Never),
            "nondet" | "nondeterministic" | "true" => Some(Policy::Nondeterministic),
            _ => None,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Never => "never",
            Policy::Nondeterministic => "nondet",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    /// Number of agents including the coordinator.
    pub d: usize,
    pub horizon: usize,
    pub reliable_channels: bool,
    pub trap_policy: Policy,
    pub byzantine_policy: Policy,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            d: 3,
            horizon: 10,
            reliable_channels: true,
            trap_policy: Policy::Nondeterministic,
            byzantine_policy: Policy::Nondeterministic,
        }
    }
}

pub const MAX_AGENTS: usize = 5;
pub const MIN_HORIZON: usize = 6;

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_AGENTS).contains(&self.d) {
            return Err(Error::ConfigInvalid(format!(
                "d must be in 2..={MAX_AGENTS}, got {}",
                self.d
            )));
        }
        if self.horizon < MIN_HORIZON {
            return Err(Error::ConfigInvalid(format!(
                "horizon must be at least {MIN_HORIZON}, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Number of participants.
    pub fn participants(&self) -> usize {
        self.d - 1
    }

    /// Applies `key=value` lines on top of `self`.
    pub fn apply_text(mut self, text: &str) -> Result<Config> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Format { what: "config", line: n + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let policy = || Policy::parse(value).ok_or_else(|| bad(format!("bad policy `{value}`")));
            let number = || value.parse::<usize>().map_err(|e| bad(format!("{key}: {e}")));
            match key {
                "d" => self.d = number()?,
                "horizon" => self.horizon = number()?,
                "reliable_channels" => {
                    self.reliable_channels =
                        value.parse().map_err(|_| bad(format!("bad bool `{value}`")))?
                }
                "trap" | "trap_policy" => self.trap_policy = policy()?,
                "byzantine" | "byzantine_policy" => self.byzantine_policy = policy()?,
                _ => return Err(bad(format!("unknown key `{key}`"))),
            }
        }
        Ok(self)
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        let config = Config::default().apply_text(&text)?;
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={} horizon={} reliable_channels={} trap={} byzantine={}",
            self.d, self.horizon, self.reliable_channels, self.trap_policy, self.byzantine_policy
        )
    }
}
