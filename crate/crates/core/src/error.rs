use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("budget of {budget} elements exceeded")]
    BudgetExceeded { budget: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("universe is not closed: successor {missing} of {from} is missing")]
    NotClosed { from: String, missing: String },
    #[error("{rule} does not apply to {goal}: {reason}")]
    SideCondition {
        rule: String,
        goal: String,
        reason: String,
    },
    #[error("no case of invariant `{relation}` discharges member {member}")]
    UnmatchedObligation { relation: String, member: String },
    #[error("{quad} is not provable: relative trace equality fails")]
    NotProvable { quad: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown case label `{0}`")]
    UnknownCase(String),
    #[error("relation `{0}` cannot be enumerated without a quad universe")]
    NotEnumerable(String),
    #[error("up-to function `{0}` is not registered as proven compatible")]
    NotRegistered(String),
    #[error("witness mismatch: {0}")]
    WitnessMismatch(String),
    #[error("leak equivalence not established: {0}")]
    EquivalenceNotEstablished(String),
    #[error("side proof rejected: {0}")]
    SideProofRejected(String),
    #[error("side proof is not a lockstep derivation")]
    NonLockstepSideProof,
    #[error("invariant closure failed at {quad}{note}")]
    ClosureFailed { quad: String, note: String },
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}

impl Error {
    pub(crate) fn side(rule: impl Into<String>, goal: impl ToString, reason: impl Into<String>) -> Self {
        Error::SideCondition {
            rule: rule.into(),
            goal: goal.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}
