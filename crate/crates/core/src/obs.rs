//! Observations shared by every semantics in the workspace.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A single leaked observation.
///
/// Equality is structural; cache snapshots compare element-wise in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Obs {
    /// The "nothing interesting" observation, written `⊥`.
    Unit,
    Address(u32),
    Branch(bool),
    /// Cache contents, most recent access first.
    Cache(Arc<[u32]>),
    Halt,
    Named(Arc<str>),
}

impl Obs {
    pub fn named(s: &str) -> Self {
        Obs::Named(Arc::from(s))
    }

    pub fn cache(entries: &[u32]) -> Self {
        Obs::Cache(Arc::from(entries))
    }
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Unit => f.write_str("bot"),
            Obs::Address(a) => write!(f, "addr({a})"),
            Obs::Branch(b) => write!(f, "br({b})"),
            Obs::Cache(c) => {
                f.write_str("cache[")?;
                for (i, a) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
            Obs::Halt => f.write_str("halt"),
            Obs::Named(s) => f.write_str(s),
        }
    }
}

fn inner<'a>(s: &'a str, open: &str, close: &str) -> Option<&'a str> {
    s.strip_prefix(open)?.strip_suffix(close)
}

impl FromStr for Obs {
    type Err = Error;

    /// Parses the token syntax produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidArgument(format!("bad observation `{s}`"));
        match s {
            "bot" | "⊥" => return Ok(Obs::Unit),
            "halt" => return Ok(Obs::Halt),
            _ => {}
        }
        if let Some(a) = inner(s, "addr(", ")") {
            return a.parse().map(Obs::Address).map_err(|_| bad());
        }
        if let Some(b) = inner(s, "br(", ")") {
            return b.parse().map(Obs::Branch).map_err(|_| bad());
        }
        if let Some(c) = inner(s, "cache[", "]") {
            if c.is_empty() {
                return Ok(Obs::cache(&[]));
            }
            let entries: Result<Vec<u32>, _> = c.split(',').map(str::parse).collect();
            return entries.map(|e| Obs::cache(&e)).map_err(|_| bad());
        }
        if !s.is_empty()
            && s
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '\'')
        {
            return Ok(Obs::named(s));
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_round_trip() {
        for o in [
            Obs::Unit,
            Obs::Address(3),
            Obs::Branch(false),
            Obs::cache(&[]),
            Obs::cache(&[2, 1]),
            Obs::Halt,
            Obs::named("obsA"),
        ] {
            assert_eq!(o.to_string().parse::<Obs>().unwrap(), o);
        }
    }

    #[test]
    fn caches_compare_in_order() {
        assert_ne!(Obs::cache(&[1, 2]), Obs::cache(&[2, 1]));
        assert_eq!(Obs::cache(&[1, 2]), Obs::cache(&[1, 2]));
    }

    #[test]
    fn rejects_garbage() {
        assert!("addr(x)".parse::<Obs>().is_err());
        assert!("a b".parse::<Obs>().is_err());
    }
}
