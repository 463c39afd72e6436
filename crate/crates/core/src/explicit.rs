//! Finite systems given by explicit tables, plus a small text format.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lts::TransitionSystem;
use crate::obs::Obs;

/// States are `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitSystem {
    next: Vec<u32>,
    leak: Vec<Obs>,
}

impl ExplicitSystem {
    pub fn new(next: Vec<u32>, leak: Vec<Obs>) -> Result<Self> {
        if next.len() != leak.len() {
            return Err(Error::InvalidArgument(format!(
                "{} successors but {} leaks",
                next.len(),
                leak.len()
            )));
        }
        if let Some(bad) = next.iter().find(|&&n| n as usize >= next.len()) {
            return Err(Error::InvalidArgument(format!("successor {bad} out of range")));
        }
        Ok(ExplicitSystem { next, leak })
    }

    /// Random system with `states` states and leaks drawn from `observations`
    /// named symbols `o0, o1, ...`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, states: usize, observations: usize) -> Self {
        assert!(states > 0 && observations > 0);
        let alphabet: Vec<Obs> = (0..observations).map(|i| Obs::named(&format!("o{i}"))).collect();
        let next = (0..states).map(|_| rng.gen_range(0..states as u32)).collect();
        let leak = (0..states)
            .map(|_| alphabet[rng.gen_range(0..observations)].clone())
            .collect();
        ExplicitSystem { next, leak }
    }

    pub fn len(&self) -> usize {
        self.next.len()
    }

    pub fn is_empty(&self) -> bool {
        self.next.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = u32> {
        0..self.next.len() as u32
    }

    /// Parses lines of `state next obs`. Blank lines and `#` comments are ignored.
    /// States must be listed densely from 0, in any order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Option<(u32, Obs)>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            if toks.len() != 3 {
                return Err(Error::parse(ln + 1, 1, "expected `state next obs`"));
            }
            let num = |t: &str, col| {
                t.parse::<u32>()
                    .map_err(|_| Error::parse(ln + 1, col, format!("bad state `{t}`")))
            };
            let s = num(toks[0], 1)? as usize;
            let n = num(toks[1], line.find(toks[1]).unwrap_or(0) + 1)?;
            let o: Obs = toks[2]
                .parse()
                .map_err(|e: Error| Error::parse(ln + 1, line.rfind(toks[2]).unwrap_or(0) + 1, e.to_string()))?;
            if rows.len() <= s {
                rows.resize(s + 1, None);
            }
            if rows[s].is_some() {
                return Err(Error::parse(ln + 1, 1, format!("state {s} defined twice")));
            }
            rows[s] = Some((n, o));
        }
        let mut next = Vec::with_capacity(rows.len());
        let mut leak = Vec::with_capacity(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            let (n, o) = r.ok_or_else(|| Error::InvalidArgument(format!("state {i} is not defined")))?;
            next.push(n);
            leak.push(o);
        }
        ExplicitSystem::new(next, leak)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (n, o)) in self.next.iter().zip(&self.leak).enumerate() {
            let _ = writeln!(out, "{i} {n} {o}");
        }
        out
    }
}

impl TransitionSystem for ExplicitSystem {
    type State = u32;

    fn step(&self, s: &u32) -> (u32, Obs) {
        (self.next[*s as usize], self.leak[*s as usize].clone())
    }

    fn next(&self, s: &u32) -> u32 {
        self.next[*s as usize]
    }

    fn leak(&self, s: &u32) -> Obs {
        self.leak[*s as usize].clone()
    }
}

/// A contract system and a hardware system, both explicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitInstance {
    pub contract: ExplicitSystem,
    pub hardware: ExplicitSystem,
}

impl ExplicitInstance {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_obs: usize) -> Self {
        let pick = |rng: &mut R| {
            let n = rng.gen_range(1..=max_states);
            let k = rng.gen_range(1..=max_obs);
            ExplicitSystem::random(rng, n, k)
        };
        let contract = pick(rng);
        let hardware = pick(rng);
        ExplicitInstance { contract, hardware }
    }

    /// Two sections, `[contract]` and `[hardware]`, each in the
    /// [`ExplicitSystem::parse`] format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: [Option<String>; 2] = [None, None];
        let mut cur: Option<usize> = None;
        for (ln, line) in text.lines().enumerate() {
            let t = line.trim();
            match t {
                "[contract]" | "[hardware]" => {
                    let i = usize::from(t == "[hardware]");
                    if sections[i].is_some() {
                        return Err(Error::parse(ln + 1, 1, format!("duplicate section {t}")));
                    }
                    sections[i] = Some(String::new());
                    cur = Some(i);
                }
                _ => {
                    let body = line.split('#').next().unwrap_or("");
                    match cur {
                        Some(i) => {
                            let sec = sections[i].as_mut().expect("section opened");
                            sec.push_str(line);
                            sec.push('\n');
                        }
                        None if body.trim().is_empty() => {}
                        None => return Err(Error::parse(ln + 1, 1, "line outside of a section")),
                    }
                }
            }
        }
        let [c, h] = sections;
        let missing = |n: &str| Error::InvalidArgument(format!("missing [{n}] section"));
        Ok(ExplicitInstance {
            contract: ExplicitSystem::parse(&c.ok_or_else(|| missing("contract"))?)?,
            hardware: ExplicitSystem::parse(&h.ok_or_else(|| missing("hardware"))?)?,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "[contract]\n{}[hardware]\n{}",
            self.contract.to_text(),
            self.hardware.to_text()
        )
    }
}
