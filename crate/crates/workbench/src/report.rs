//! Run reports: a text summary for the terminal and a JSON document.
//!
//! The JSON layout is described by `schema/report.schema.json` in this crate;
//! bump [`SCHEMA_VERSION`] whenever it changes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Verdicts for a group of quads that share every observable outcome.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadVerdict {
    pub instance: String,
    /// One member of the group.
    pub quad: String,
    pub quads: u64,
    pub oracle: bool,
    pub kernel: bool,
}

/// Four trace prefixes up to and including the first hardware divergence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub instance: String,
    pub quad: String,
    pub diverges_at: usize,
    pub contract: [Vec<String>; 2],
    pub hardware: [Vec<String>; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub kind: String,
    pub subject: String,
    pub checked: u64,
    pub proved: u64,
    pub refuted: u64,
    pub verdicts: Vec<QuadVerdict>,
    /// Problems: refutations, rejections, disagreements.
    pub findings: Vec<String>,
    /// Informational lines.
    pub notes: Vec<String>,
    pub counterexample: Option<Counterexample>,
    pub rule_hits: BTreeMap<String, u64>,
    pub elapsed_ms: u64,
}

impl Report {
    pub fn new(kind: &str, subject: impl Into<String>) -> Self {
        Report {
            schema: SCHEMA_VERSION,
            kind: kind.into(),
            subject: subject.into(),
            ..Default::default()
        }
    }

    /// True when nothing was refuted or rejected.
    pub fn passed(&self) -> bool {
        self.refuted == 0 && self.findings.is_empty() && self.counterexample.is_none()
    }

    /// Counts agree with the verdict list, when one was kept.
    pub fn consistent(&self) -> bool {
        if self.verdicts.is_empty() {
            return true;
        }
        let sum = |f: &dyn Fn(&QuadVerdict) -> bool| self.verdicts.iter().filter(|v| f(v)).map(|v| v.quads).sum::<u64>();
        sum(&|_| true) == self.checked && sum(&|v| v.kernel) == self.proved && sum(&|v| !v.oracle) == self.refuted
    }

    /// Sort everything whose order depends on traversal.
    pub fn finish(&mut self) {
        self.verdicts.sort();
        self.findings.sort();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}: {}", self.kind, self.subject, if self.passed() { "ok" } else { "FAILED" })?;
        writeln!(
            f,
            "  checked {}  proved {}  refuted {}  ({} ms)",
            self.checked, self.proved, self.refuted, self.elapsed_ms
        )?;
        for x in &self.notes {
            writeln!(f, "  {x}")?;
        }
        for x in &self.findings {
            writeln!(f, "  - {x}")?;
        }
        if let Some(cx) = &self.counterexample {
            writeln!(f, "  counterexample in {}: {}", cx.instance, cx.quad)?;
            writeln!(f, "    hardware traces diverge at step {}", cx.diverges_at)?;
            for (name, t) in [("c1", &cx.contract[0]), ("c2", &cx.contract[1]), ("h1", &cx.hardware[0]), ("h2", &cx.hardware[1])] {
                writeln!(f, "    {name}: {}", t.join(" "))?;
            }
        }
        Ok(())
    }
}
