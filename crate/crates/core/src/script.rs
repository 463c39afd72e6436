//! Proof scripts and their s-expression text format.
//!
//! ```text
//! script  := (cleak) | (cycle)
//!          | (cstep script) | (cstep' script) | (hstep script) | (guard script)
//!          | (invariant NAME case+)
//!          | (upto c-swap script) | (upto h-swap script)
//!          | (upto c-leak-eq s1|s2 STATE script) | (upto h-leak-eq h1|h2 STATE script)
//!          | (upto reduce-c-leak STATE STATE script) | (upto augment-h-leak STATE STATE script)
//!          | (reduce-c-leak (witness STATE STATE) (side script) script)
//!          | (augment-h-leak (witness STATE STATE) side script)
//! side    := (lockstep-side lscript) | (side script)
//! lscript := (leak) | (cycle) | (step lscript) | (guard lscript) | (invariant NAME lcase+)
//! case    := (case LABEL script)
//! ```
//!
//! `;` starts a comment. STATE is compact JSON of the state type. The printer
//! puts every list on its own line, indented by depth; atoms stay on the line
//! of their list.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Text form of a state inside scripts and relation files.
pub trait StateSyntax: Sized {
    fn to_token(&self) -> String;
    fn from_token(tok: &str) -> std::result::Result<Self, String>;
}

impl<T: Serialize + DeserializeOwned> StateSyntax for T {
    fn to_token(&self) -> String {
        serde_json::to_string(self).expect("state serializes")
    }

    fn from_token(tok: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(tok).map_err(|e| e.to_string())
    }
}

/// First or second component of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Case<T> {
    /// `_` matches every member; other labels name registered case predicates.
    pub label: String,
    pub body: T,
}

/// An up-to step whose soundness rests on a registered compatible function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpToStep<S, H> {
    CSwap,
    HSwap,
    /// Replace one contract component by a trace-equal state.
    CLeakEq(Side, S),
    HLeakEq(Side, H),
    /// Replace the contract pair; the side quad is checked by the oracle.
    ReduceCLeak(S, S),
    /// Replace the hardware pair; the side quad is checked for lockstep membership.
    AugmentHLeak(H, H),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProofScript<S, H> {
    CLeak,
    CStep(Box<Self>),
    CStepPrime(Box<Self>),
    HStep(Box<Self>),
    Cycle,
    Guard(Box<Self>),
    Invariant {
        relation: String,
        cases: Vec<Case<Self>>,
    },
    UpTo {
        step: UpToStep<S, H>,
        body: Box<Self>,
    },
    ReduceContractLeakage {
        witness: (S, S),
        side: Box<ProofScript<S, S>>,
        body: Box<Self>,
    },
    AugmentHardwareLeakage {
        witness: (H, H),
        side: SideProof<H>,
        body: Box<Self>,
    },
}

/// Side derivation supplied to the hardware-augmenting rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SideProof<H> {
    Lockstep(Box<LockstepScript>),
    /// A derivation in the ordinary system. Parsed so that it can be reported,
    /// but never accepted.
    General(Box<ProofScript<H, H>>),
}

/// Derivations for lockstep quintuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LockstepScript {
    Leak,
    Step(Box<Self>),
    Cycle,
    Guard(Box<Self>),
    Invariant {
        relation: String,
        cases: Vec<Case<Self>>,
    },
}

impl<S, H> ProofScript<S, H> {
    pub fn cstep(b: Self) -> Self {
        ProofScript::CStep(Box::new(b))
    }

    pub fn cstep_prime(b: Self) -> Self {
        ProofScript::CStepPrime(Box::new(b))
    }

    pub fn hstep(b: Self) -> Self {
        ProofScript::HStep(Box::new(b))
    }

    pub fn guard(b: Self) -> Self {
        ProofScript::Guard(Box::new(b))
    }

    pub fn invariant(relation: &str, cases: Vec<(&str, Self)>) -> Self {
        ProofScript::Invariant {
            relation: relation.to_string(),
            cases: cases
                .into_iter()
                .map(|(l, body)| Case {
                    label: l.to_string(),
                    body,
                })
                .collect(),
        }
    }

    pub fn upto(step: UpToStep<S, H>, body: Self) -> Self {
        ProofScript::UpTo {
            step,
            body: Box::new(body),
        }
    }

    /// Number of rule nodes.
    pub fn size(&self) -> usize {
        match self {
            ProofScript::CLeak | ProofScript::Cycle => 1,
            ProofScript::CStep(b) | ProofScript::CStepPrime(b) | ProofScript::HStep(b) | ProofScript::Guard(b) => {
                1 + b.size()
            }
            ProofScript::Invariant { cases, .. } => 1 + cases.iter().map(|c| c.body.size()).sum::<usize>(),
            ProofScript::UpTo { body, .. } => 1 + body.size(),
            ProofScript::ReduceContractLeakage { side, body, .. } => 1 + side.size() + body.size(),
            ProofScript::AugmentHardwareLeakage { body, .. } => 1 + body.size(),
        }
    }
}

impl LockstepScript {
    pub fn step(b: Self) -> Self {
        LockstepScript::Step(Box::new(b))
    }

    pub fn guard(b: Self) -> Self {
        LockstepScript::Guard(Box::new(b))
    }

    pub fn invariant(relation: &str, cases: Vec<(&str, Self)>) -> Self {
        LockstepScript::Invariant {
            relation: relation.to_string(),
            cases: cases
                .into_iter()
                .map(|(l, body)| Case {
                    label: l.to_string(),
                    body,
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// s-expressions

#[derive(Clone, Debug)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn err(p: Pos, msg: impl Into<String>) -> Error {
    Error::parse(p.line, p.col, msg)
}

fn read_sexps(text: &str) -> Result<Vec<Sexp>> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut k = 0;
        while k < chars.len() {
            let (_, ch) = chars[k];
            let pos = Pos { line: ln + 1, col: k + 1 };
            match ch {
                ';' => break,
                c if c.is_whitespace() => k += 1,
                '(' => {
                    stack.push((Vec::new(), pos));
                    k += 1;
                }
                ')' => {
                    let (items, p) = stack.pop().ok_or_else(|| err(pos, "unbalanced `)`"))?;
                    let e = Sexp::List(items, p);
                    match stack.last_mut() {
                        Some(parent) => parent.0.push(e),
                        None => top.push(e),
                    }
                    k += 1;
                }
                _ => {
                    let start = k;
                    while k < chars.len() && !chars[k].1.is_whitespace() && !matches!(chars[k].1, '(' | ')' | ';') {
                        k += 1;
                    }
                    let from = chars[start].0;
                    let to = chars.get(k).map_or(line.len(), |c| c.0);
                    let e = Sexp::Atom(line[from..to].to_string(), pos);
                    match stack.last_mut() {
                        Some(parent) => parent.0.push(e),
                        None => top.push(e),
                    }
                }
            }
        }
    }
    if let Some((_, p)) = stack.pop() {
        return Err(err(p, "unclosed `(`"));
    }
    Ok(top)
}

fn read_one(text: &str) -> Result<Sexp> {
    let mut all = read_sexps(text)?;
    match all.len() {
        1 => Ok(all.pop().expect("one element")),
        0 => Err(Error::parse(1, 1, "empty script")),
        _ => Err(err(all[1].pos(), "trailing input after script")),
    }
}

fn head(e: &Sexp) -> Result<(&str, &[Sexp], Pos)> {
    match e {
        Sexp::List(items, p) => match items.first() {
            Some(Sexp::Atom(h, _)) => Ok((h.as_str(), &items[1..], *p)),
            _ => Err(err(*p, "expected a rule name")),
        },
        Sexp::Atom(a, p) => Err(err(*p, format!("expected a list, found `{a}`"))),
    }
}

fn atom(e: &Sexp) -> Result<&str> {
    match e {
        Sexp::Atom(a, _) => Ok(a),
        Sexp::List(_, p) => Err(err(*p, "expected an atom")),
    }
}

fn arity(args: &[Sexp], n: usize, rule: &str, p: Pos) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(err(p, format!("`{rule}` takes {n} argument(s), found {}", args.len())))
    }
}

fn state<T: StateSyntax>(e: &Sexp) -> Result<T> {
    let tok = atom(e)?;
    T::from_token(tok).map_err(|m| err(e.pos(), format!("bad state `{tok}`: {m}")))
}

fn side_of(e: &Sexp, a: &str, b: &str) -> Result<Side> {
    match atom(e)? {
        x if x == a => Ok(Side::First),
        x if x == b => Ok(Side::Second),
        x => Err(err(e.pos(), format!("expected `{a}` or `{b}`, found `{x}`"))),
    }
}

fn cases<T>(args: &[Sexp], conv: impl Fn(&Sexp) -> Result<T>) -> Result<Vec<Case<T>>> {
    args.iter()
        .map(|c| {
            let (h, a, p) = head(c)?;
            if h != "case" {
                return Err(err(p, format!("expected `case`, found `{h}`")));
            }
            arity(a, 2, "case", p)?;
            Ok(Case {
                label: atom(&a[0])?.to_string(),
                body: conv(&a[1])?,
            })
        })
        .collect()
}

fn witness<T: StateSyntax>(e: &Sexp) -> Result<(T, T)> {
    let (h, a, p) = head(e)?;
    if h != "witness" {
        return Err(err(p, format!("expected `witness`, found `{h}`")));
    }
    arity(a, 2, "witness", p)?;
    Ok((state(&a[0])?, state(&a[1])?))
}

fn to_script<S: StateSyntax, H: StateSyntax>(e: &Sexp) -> Result<ProofScript<S, H>> {
    let (h, a, p) = head(e)?;
    let sub = |i: usize| to_script::<S, H>(&a[i]).map(Box::new);
    Ok(match h {
        "cleak" => {
            arity(a, 0, h, p)?;
            ProofScript::CLeak
        }
        "cycle" => {
            arity(a, 0, h, p)?;
            ProofScript::Cycle
        }
        "cstep" | "cstep'" | "hstep" | "guard" => {
            arity(a, 1, h, p)?;
            let b = sub(0)?;
            match h {
                "cstep" => ProofScript::CStep(b),
                "cstep'" => ProofScript::CStepPrime(b),
                "hstep" => ProofScript::HStep(b),
                _ => ProofScript::Guard(b),
            }
        }
        "invariant" => {
            if a.len() < 2 {
                return Err(err(p, "`invariant` takes a relation name and at least one case"));
            }
            ProofScript::Invariant {
                relation: atom(&a[0])?.to_string(),
                cases: cases(&a[1..], to_script::<S, H>)?,
            }
        }
        "upto" => {
            let Some(f) = a.first() else {
                return Err(err(p, "`upto` needs a function name"));
            };
            let name = atom(f)?;
            let (step, n) = match name {
                "c-swap" => (UpToStep::CSwap, 1),
                "h-swap" => (UpToStep::HSwap, 1),
                "c-leak-eq" => {
                    arity(&a[1..], 3, "upto c-leak-eq", p)?;
                    (UpToStep::CLeakEq(side_of(&a[1], "s1", "s2")?, state(&a[2])?), 3)
                }
                "h-leak-eq" => {
                    arity(&a[1..], 3, "upto h-leak-eq", p)?;
                    (UpToStep::HLeakEq(side_of(&a[1], "h1", "h2")?, state(&a[2])?), 3)
                }
                "reduce-c-leak" => {
                    arity(&a[1..], 3, "upto reduce-c-leak", p)?;
                    (UpToStep::ReduceCLeak(state(&a[1])?, state(&a[2])?), 3)
                }
                "augment-h-leak" => {
                    arity(&a[1..], 3, "upto augment-h-leak", p)?;
                    (UpToStep::AugmentHLeak(state(&a[1])?, state(&a[2])?), 3)
                }
                other => return Err(err(f.pos(), format!("unknown up-to function `{other}`"))),
            };
            arity(&a[1..], n, "upto", p)?;
            ProofScript::UpTo { step, body: sub(n)? }
        }
        "reduce-c-leak" => {
            arity(a, 3, h, p)?;
            let (sh, sa, sp) = head(&a[1])?;
            if sh != "side" {
                return Err(err(sp, format!("expected `side`, found `{sh}`")));
            }
            arity(sa, 1, "side", sp)?;
            ProofScript::ReduceContractLeakage {
                witness: witness(&a[0])?,
                side: Box::new(to_script::<S, S>(&sa[0])?),
                body: sub(2)?,
            }
        }
        "augment-h-leak" => {
            arity(a, 3, h, p)?;
            let (sh, sa, sp) = head(&a[1])?;
            arity(sa, 1, sh, sp)?;
            let side = match sh {
                "lockstep-side" => SideProof::Lockstep(Box::new(to_lockstep(&sa[0])?)),
                "side" => SideProof::General(Box::new(to_script::<H, H>(&sa[0])?)),
                _ => return Err(err(sp, format!("expected `lockstep-side`, found `{sh}`"))),
            };
            ProofScript::AugmentHardwareLeakage {
                witness: witness(&a[0])?,
                side,
                body: sub(2)?,
            }
        }
        other => return Err(err(p, format!("unknown rule `{other}`"))),
    })
}

fn to_lockstep(e: &Sexp) -> Result<LockstepScript> {
    let (h, a, p) = head(e)?;
    Ok(match h {
        "leak" => {
            arity(a, 0, h, p)?;
            LockstepScript::Leak
        }
        "cycle" => {
            arity(a, 0, h, p)?;
            LockstepScript::Cycle
        }
        "step" => {
            arity(a, 1, h, p)?;
            LockstepScript::Step(Box::new(to_lockstep(&a[0])?))
        }
        "guard" => {
            arity(a, 1, h, p)?;
            LockstepScript::Guard(Box::new(to_lockstep(&a[0])?))
        }
        "invariant" => {
            if a.len() < 2 {
                return Err(err(p, "`invariant` takes a relation name and at least one case"));
            }
            LockstepScript::Invariant {
                relation: atom(&a[0])?.to_string(),
                cases: cases(&a[1..], to_lockstep)?,
            }
        }
        other => return Err(err(p, format!("unknown lockstep rule `{other}`"))),
    })
}

pub fn parse_script<S: StateSyntax, H: StateSyntax>(text: &str) -> Result<ProofScript<S, H>> {
    to_script(&read_one(text)?)
}

pub fn parse_lockstep_script(text: &str) -> Result<LockstepScript> {
    to_lockstep(&read_one(text)?)
}

// ---------------------------------------------------------------------------
// printing

/// Printer-side tree: a head with atoms, then child lists.
struct Node {
    atoms: Vec<String>,
    children: Vec<Node>,
}

impl Node {
    fn leaf(atoms: &[&str]) -> Node {
        Node {
            atoms: atoms.iter().map(|s| s.to_string()).collect(),
            children: vec![],
        }
    }

    fn with(atoms: Vec<String>, children: Vec<Node>) -> Node {
        Node { atoms, children }
    }

    fn write(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('(');
        out.push_str(&self.atoms.join(" "));
        for c in &self.children {
            out.push('\n');
            c.write(out, depth + 1);
        }
        out.push(')');
    }
}

fn script_node<S: StateSyntax, H: StateSyntax>(s: &ProofScript<S, H>) -> Node {
    let one = |name: &str, b: &ProofScript<S, H>| Node::with(vec![name.into()], vec![script_node(b)]);
    match s {
        ProofScript::CLeak => Node::leaf(&["cleak"]),
        ProofScript::Cycle => Node::leaf(&["cycle"]),
        ProofScript::CStep(b) => one("cstep", b),
        ProofScript::CStepPrime(b) => one("cstep'", b),
        ProofScript::HStep(b) => one("hstep", b),
        ProofScript::Guard(b) => one("guard", b),
        ProofScript::Invariant { relation, cases } => Node::with(
            vec!["invariant".into(), relation.clone()],
            cases
                .iter()
                .map(|c| Node::with(vec!["case".into(), c.label.clone()], vec![script_node(&c.body)]))
                .collect(),
        ),
        ProofScript::UpTo { step, body } => {
            let mut atoms = vec!["upto".to_string()];
            match step {
                UpToStep::CSwap => atoms.push("c-swap".into()),
                UpToStep::HSwap => atoms.push("h-swap".into()),
                UpToStep::CLeakEq(side, st) => {
                    atoms.push("c-leak-eq".into());
                    atoms.push(if *side == Side::First { "s1" } else { "s2" }.into());
                    atoms.push(st.to_token());
                }
                UpToStep::HLeakEq(side, st) => {
                    atoms.push("h-leak-eq".into());
                    atoms.push(if *side == Side::First { "h1" } else { "h2" }.into());
                    atoms.push(st.to_token());
                }
                UpToStep::ReduceCLeak(a, b) => {
                    atoms.extend(["reduce-c-leak".into(), a.to_token(), b.to_token()]);
                }
                UpToStep::AugmentHLeak(a, b) => {
                    atoms.extend(["augment-h-leak".into(), a.to_token(), b.to_token()]);
                }
            }
            Node::with(atoms, vec![script_node(body)])
        }
        ProofScript::ReduceContractLeakage { witness, side, body } => Node::with(
            vec!["reduce-c-leak".into()],
            vec![
                Node::with(vec!["witness".into(), witness.0.to_token(), witness.1.to_token()], vec![]),
                Node::with(vec!["side".into()], vec![script_node(side.as_ref())]),
                script_node(body),
            ],
        ),
        ProofScript::AugmentHardwareLeakage { witness, side, body } => Node::with(
            vec!["augment-h-leak".into()],
            vec![
                Node::with(vec!["witness".into(), witness.0.to_token(), witness.1.to_token()], vec![]),
                match side {
                    SideProof::Lockstep(l) => Node::with(vec!["lockstep-side".into()], vec![lockstep_node(l)]),
                    SideProof::General(g) => Node::with(vec!["side".into()], vec![script_node(g.as_ref())]),
                },
                script_node(body),
            ],
        ),
    }
}

fn lockstep_node(s: &LockstepScript) -> Node {
    match s {
        LockstepScript::Leak => Node::leaf(&["leak"]),
        LockstepScript::Cycle => Node::leaf(&["cycle"]),
        LockstepScript::Step(b) => Node::with(vec!["step".into()], vec![lockstep_node(b)]),
        LockstepScript::Guard(b) => Node::with(vec!["guard".into()], vec![lockstep_node(b)]),
        LockstepScript::Invariant { relation, cases } => Node::with(
            vec!["invariant".into(), relation.clone()],
            cases
                .iter()
                .map(|c| Node::with(vec!["case".into(), c.label.clone()], vec![lockstep_node(&c.body)]))
                .collect(),
        ),
    }
}

/// Canonical text, ending in a newline.
pub fn print_script<S: StateSyntax, H: StateSyntax>(s: &ProofScript<S, H>) -> String {
    let mut out = String::new();
    script_node(s).write(&mut out, 0);
    out.push('\n');
    out
}

pub fn print_lockstep_script(s: &LockstepScript) -> String {
    let mut out = String::new();
    lockstep_node(s).write(&mut out, 0);
    out.push('\n');
    out
}

/// Quads one per line as four state tokens; `#` starts a comment.
pub fn parse_quads<S: StateSyntax, H: StateSyntax>(text: &str) -> Result<Vec<crate::lts::Quad<S, H>>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 4 {
            return Err(Error::parse(ln + 1, 1, format!("expected 4 states, found {}", toks.len())));
        }
        let col = |t: &str| body.find(t).unwrap_or(0) + 1;
        let s = |t: &str| S::from_token(t).map_err(|m| Error::parse(ln + 1, col(t), m));
        let h = |t: &str| H::from_token(t).map_err(|m| Error::parse(ln + 1, col(t), m));
        out.push(crate::lts::Quad::new(s(toks[0])?, s(toks[1])?, h(toks[2])?, h(toks[3])?));
    }
    Ok(out)
}

pub fn print_quads<S: StateSyntax, H: StateSyntax>(quads: &[crate::lts::Quad<S, H>]) -> String {
    let mut out = String::new();
    for q in quads {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            q.s1.to_token(),
            q.s2.to_token(),
            q.h1.to_token(),
            q.h2.to_token()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    type Script = ProofScript<u32, u32>;

    #[test]
    fn canonical_layout() {
        let s: Script = ProofScript::invariant(
            "rbisim",
            vec![
                ("_", ProofScript::cstep(ProofScript::CLeak)),
                ("_", ProofScript::hstep(ProofScript::Cycle)),
            ],
        );
        let text = print_script(&s);
        assert_eq!(
            text,
            "(invariant rbisim\n  (case _\n    (cstep\n      (cleak)))\n  (case _\n    (hstep\n      (cycle))))\n"
        );
        assert_eq!(parse_script::<u32, u32>(&text).unwrap(), s);
    }

    #[test]
    fn accepts_free_layout_and_comments() {
        let s: Script = parse_script("; proof\n(invariant I (case load (cstep' (hstep (cycle)))))").unwrap();
        assert_eq!(
            s,
            ProofScript::invariant("I", vec![("load", ProofScript::cstep_prime(ProofScript::hstep(ProofScript::Cycle)))])
        );
    }

    #[test]
    fn up_to_forms_round_trip() {
        let s: Script = ProofScript::AugmentHardwareLeakage {
            witness: (1, 2),
            side: SideProof::Lockstep(Box::new(LockstepScript::invariant(
                "top",
                vec![("_", LockstepScript::step(LockstepScript::Cycle))],
            ))),
            body: Box::new(ProofScript::ReduceContractLeakage {
                witness: (3, 4),
                side: Box::new(ProofScript::CLeak),
                body: Box::new(ProofScript::upto(
                    UpToStep::CLeakEq(Side::Second, 5),
                    ProofScript::upto(UpToStep::HSwap, ProofScript::CLeak),
                )),
            }),
        };
        let text = print_script(&s);
        let back: Script = parse_script(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(print_script(&back), text);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_script::<u32, u32>("(cstep\n  (hstep (cycle) (cleak)))").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, col: 3, .. }), "{e:?}");
        let e = parse_script::<u32, u32>("(cstep (frob))").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, col: 8, .. }), "{e:?}");
        assert!(parse_script::<u32, u32>("(cleak").is_err());
        assert!(parse_script::<u32, u32>("(cleak))").is_err());
        assert!(parse_script::<u32, u32>("(upto c-leak-eq s3 1 (cleak))").is_err());
    }

    #[test]
    fn quads_round_trip() {
        let q = vec![crate::lts::Quad::new(1u32, 2, 3u32, 4)];
        assert_eq!(parse_quads::<u32, u32>(&print_quads(&q)).unwrap(), q);
    }
}
