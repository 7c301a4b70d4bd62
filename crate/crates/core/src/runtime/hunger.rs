//! Hunger schedules and their mini-language.
//!
//! `all` makes every party hungry before step 0, `one:<i>` only party `i`,
//! `list:<i@t,...>` party `i` before step `t`, and `none` nobody.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum HungerSpec {
    #[default]
    None,
    All,
    One(usize),
    List(Vec<(usize, u64)>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HungerError {
    #[error("cannot parse hunger schedule {0:?}")]
    Syntax(String),
    #[error("party {party} is outside a ring of {n}")]
    OutOfRange { party: usize, n: usize },
}

impl HungerSpec {
    /// `(party, before_step)` pairs ordered by step, then party.
    pub fn events(&self, n: usize) -> Result<Vec<(usize, u64)>, HungerError> {
        let mut ev: Vec<(usize, u64)> = match self {
            HungerSpec::None => Vec::new(),
            HungerSpec::All => (0..n).map(|p| (p, 0)).collect(),
            HungerSpec::One(p) => vec![(*p, 0)],
            HungerSpec::List(l) => l.clone(),
        };
        if let Some(&(party, _)) = ev.iter().find(|(p, _)| *p >= n) {
            return Err(HungerError::OutOfRange { party, n });
        }
        ev.sort_by_key(|(p, t)| (*t, *p));
        Ok(ev)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, HungerSpec::None) || matches!(self, HungerSpec::List(l) if l.is_empty())
    }

    /// The same schedule on a ring shifted by `d`.
    pub fn rotated(&self, d: usize, n: usize) -> HungerSpec {
        match self {
            HungerSpec::One(p) => HungerSpec::One((p + d) % n),
            HungerSpec::List(l) => HungerSpec::List(l.iter().map(|(p, t)| ((p + d) % n, *t)).collect()),
            other => other.clone(),
        }
    }
}

impl FromStr for HungerSpec {
    type Err = HungerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HungerError::Syntax(s.to_string());
        let s = s.trim();
        if s == "all" {
            return Ok(HungerSpec::All);
        }
        if s == "none" {
            return Ok(HungerSpec::None);
        }
        if let Some(i) = s.strip_prefix("one:") {
            return i.trim().parse().map(HungerSpec::One).map_err(|_| bad());
        }
        if let Some(items) = s.strip_prefix("list:") {
            let mut out = Vec::new();
            for item in items.split(',').filter(|x| !x.trim().is_empty()) {
                let (p, t) = item.trim().split_once('@').ok_or_else(bad)?;
                out.push((p.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?));
            }
            if out.is_empty() {
                return Err(bad());
            }
            return Ok(HungerSpec::List(out));
        }
        Err(bad())
    }
}

impl fmt::Display for HungerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HungerSpec::None => write!(f, "none"),
            HungerSpec::All => write!(f, "all"),
            HungerSpec::One(p) => write!(f, "one:{p}"),
            HungerSpec::List(l) => {
                let items: Vec<String> = l.iter().map(|(p, t)| format!("{p}@{t}")).collect();
                write!(f, "list:{}", items.join(","))
            }
        }
    }
}

impl Serialize for HungerSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for HungerSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
