//! Assembly text: one instruction per line, `#` comments.
//!
//! ```text
//! load r1 r2
//! add r1 r2 5
//! beqz r1 0
//! ```

use crate::error::{IsaError, Result};
use crate::machine::{Instruction, Program, Reg};

/// Non-empty, comment-stripped lines with their 1-based numbers and the
/// 1-based column of every token.
pub(crate) fn tokenized(text: &str) -> impl Iterator<Item = (usize, Vec<(usize, &str)>)> {
    text.lines().enumerate().filter_map(|(n, line)| {
        let code = line.split('#').next().unwrap_or("");
        let mut toks = Vec::new();
        let mut start = None;
        for (i, ch) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    toks.push((s + 1, &code[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        (!toks.is_empty()).then_some((n + 1, toks))
    })
}

fn reg(line: usize, (col, t): (usize, &str)) -> Result<Reg> {
    match t {
        "r1" => Ok(Reg::R1),
        "r2" => Ok(Reg::R2),
        _ => Err(IsaError::parse(line, col, format!("expected r1 or r2, found `{t}`"))),
    }
}

pub(crate) fn number<T: std::str::FromStr>(line: usize, (col, t): (usize, &str)) -> Result<T> {
    t.parse()
        .map_err(|_| IsaError::parse(line, col, format!("expected a number, found `{t}`")))
}

fn instruction(line: usize, toks: &[(usize, &str)]) -> Result<Instruction> {
    let (col, op) = toks[0];
    let arity = match op {
        "load" | "beqz" => 2,
        "add" => 3,
        _ => return Err(IsaError::parse(line, col, format!("unknown instruction `{op}`"))),
    };
    if toks.len() != arity + 1 {
        let at = toks.get(arity + 1).map_or(col, |t| t.0);
        return Err(IsaError::parse(
            line,
            at,
            format!("`{op}` takes {arity} operands, found {}", toks.len() - 1),
        ));
    }
    Ok(match op {
        "load" => Instruction::Load {
            dst: reg(line, toks[1])?,
            src: reg(line, toks[2])?,
        },
        "add" => Instruction::Add {
            dst: reg(line, toks[1])?,
            src: reg(line, toks[2])?,
            k: number(line, toks[3])?,
        },
        _ => Instruction::Beqz {
            reg: reg(line, toks[1])?,
            target: number(line, toks[2])?,
        },
    })
}

pub fn parse_program(text: &str) -> Result<Program> {
    let mut out = Vec::new();
    for (line, toks) in tokenized(text) {
        out.push(instruction(line, &toks)?);
    }
    if out.is_empty() {
        return Err(IsaError::parse(1, 1, "empty program"));
    }
    Program::new(out)
}

/// Canonical form: single spaces, one instruction per line.
pub fn print_program(p: &Program) -> String {
    p.to_string()
}

/// Parse a `pc value` table, one entry per line.
pub(crate) fn parse_table<T>(text: &str, value: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (line, toks) in tokenized(text) {
        if toks.len() != 2 {
            return Err(IsaError::parse(line, toks[0].0, format!("expected `pc {expected}`")));
        }
        let pc = number(line, toks[0])?;
        let v = value(toks[1].1)
            .ok_or_else(|| IsaError::parse(line, toks[1].0, format!("expected {expected}, found `{}`", toks[1].1)))?;
        if out.iter().any(|(p, _)| *p == pc) {
            return Err(IsaError::parse(line, toks[0].0, format!("duplicate entry for pc {pc}")));
        }
        out.push((pc, v));
    }
    Ok(out)
}
