//! `rw`-style tactic application.
//!
//! A rewrite resolves its target (theory rule or hypothesis), orients it,
//! binds explicit arguments to the rule's leading pattern variables, finds
//! the first pre-order match in the goal (left side first), and replaces every
//! occurrence of that instance in one pass. A goal whose sides coincide
//! closes the proof.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::expr::{parse_arguments, ExprError, Term};
use crate::state::{Equation, ProofState};
use crate::theory::Theory;

pub const REVERSE_ARROW: &str = "←";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TacticError {
    #[error("empty tactic")]
    Empty,
    #[error("unknown tactic `{0}`")]
    UnknownTactic(String),
    #[error("malformed tactic: {0}")]
    Malformed(String),
    #[error("bad argument: {0}")]
    Argument(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TacticKind {
    Rw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TacticAst {
    pub kind: TacticKind,
    pub reversed: bool,
    pub target: String,
    pub explicit_args: Vec<Term>,
}

/// Parse `rw [name args…]` or `rw [← name args…]`. Whether `name` exists is
/// checked at application time.
pub fn parse_tactic(text: &str, theory: &Theory) -> Result<TacticAst, TacticError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(TacticError::Empty);
    }
    let head_len = text
        .find(|c: char| c.is_whitespace() || c == '[')
        .unwrap_or(text.len());
    let head = &text[..head_len];
    if head != "rw" {
        return Err(TacticError::UnknownTactic(head.to_string()));
    }
    let rest = text[head_len..].trim_start();
    let inner = rest
        .strip_prefix('[')
        .ok_or_else(|| TacticError::Malformed("expected `[` after `rw`".into()))?;
    let close = inner
        .rfind(']')
        .ok_or_else(|| TacticError::Malformed("missing `]`".into()))?;
    if !inner[close + 1..].trim().is_empty() {
        return Err(TacticError::Malformed(format!(
            "unexpected trailing `{}`",
            inner[close + 1..].trim()
        )));
    }
    let mut body = inner[..close].trim();
    if body.contains(['[', ']', ',']) {
        return Err(TacticError::Malformed("one rewrite per tactic".into()));
    }
    let mut reversed = false;
    for arrow in [REVERSE_ARROW, "<-"] {
        if let Some(b) = body.strip_prefix(arrow) {
            reversed = true;
            body = b.trim_start();
            break;
        }
    }
    let name_len = body.find(char::is_whitespace).unwrap_or(body.len());
    let target = &body[..name_len];
    if target.is_empty() {
        return Err(TacticError::Malformed("missing rewrite target".into()));
    }
    if target.starts_with('(') {
        return Err(TacticError::Malformed("rewrite target must be a name".into()));
    }
    let explicit_args = parse_arguments(&body[name_len..], &theory.signature)?;
    Ok(TacticAst {
        kind: TacticKind::Rw,
        reversed,
        target: target.to_string(),
        explicit_args,
    })
}

/// Non-fatal reasons a tactic does not apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    UnknownTarget,
    UnboundVariable,
    TooManyArguments,
    NoMatch,
    NoChange,
    Parse(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::UnknownTarget => f.write_str("unknown target"),
            Failure::UnboundVariable => f.write_str("unbound variable in args"),
            Failure::TooManyArguments => f.write_str("too many arguments"),
            Failure::NoMatch => f.write_str("no match"),
            Failure::NoChange => f.write_str("no change"),
            Failure::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyResult {
    NewState(ProofState),
    ProofFinished,
    Failure(Failure),
}

pub type Binding = BTreeMap<String, Term>;

/// First match of `pattern` among the subterms of `subject`, scanned in
/// pre-order, extending `partial`.
pub fn match_pattern(pattern: &Term, subject: &Term, partial: &Binding) -> Option<Binding> {
    subject.preorder().find_map(|sub| {
        let mut b = partial.clone();
        match_at(pattern, sub, &mut b).then_some(b)
    })
}

fn match_at(pattern: &Term, subject: &Term, b: &mut Binding) -> bool {
    match (pattern, subject) {
        (Term::PatternVar(v), _) => match b.get(v) {
            Some(bound) => bound == subject,
            None => {
                b.insert(v.clone(), subject.clone());
                true
            }
        },
        (Term::BinaryApp(p, pl, pr), Term::BinaryApp(s, sl, sr)) => {
            p == s && match_at(pl, sl, b) && match_at(pr, sr, b)
        }
        (Term::PostfixApp(p, pi), Term::PostfixApp(s, si)) => p == s && match_at(pi, si, b),
        _ => pattern == subject,
    }
}

/// Substitute `binding` into `pattern`; `None` if a pattern variable is unbound.
pub fn instantiate_pattern(pattern: &Term, binding: &Binding) -> Option<Term> {
    Some(match pattern {
        Term::PatternVar(v) => binding.get(v)?.clone(),
        Term::BinaryApp(op, l, r) => Term::BinaryApp(
            op.clone(),
            Box::new(instantiate_pattern(l, binding)?),
            Box::new(instantiate_pattern(r, binding)?),
        ),
        Term::PostfixApp(op, t) => {
            Term::PostfixApp(op.clone(), Box::new(instantiate_pattern(t, binding)?))
        }
        leaf => leaf.clone(),
    })
}

/// Replace every occurrence of `from`; replacements are not revisited.
fn replace_all(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    match t {
        Term::BinaryApp(op, l, r) => Term::BinaryApp(
            op.clone(),
            Box::new(replace_all(l, from, to)),
            Box::new(replace_all(r, from, to)),
        ),
        Term::PostfixApp(op, inner) => {
            Term::PostfixApp(op.clone(), Box::new(replace_all(inner, from, to)))
        }
        leaf => leaf.clone(),
    }
}

pub fn is_tautology(goal: &Equation) -> bool {
    // Structural equality coincides with equality of printed forms because
    // printing is injective (parse ∘ print = id).
    goal.lhs == goal.rhs
}

pub fn apply_tactic(state: &ProofState, tactic: &TacticAst, theory: &Theory) -> ApplyResult {
    let (lhs, rhs, pattern_vars): (&Term, &Term, &[String]) =
        if let Some(h) = state.hypothesis(&tactic.target) {
            (&h.eq.lhs, &h.eq.rhs, &[])
        } else if let Some(rule) = theory.rule(&tactic.target) {
            (&rule.lhs, &rule.rhs, &rule.pattern_vars)
        } else {
            return ApplyResult::Failure(Failure::UnknownTarget);
        };
    if tactic.explicit_args.len() > pattern_vars.len() {
        return ApplyResult::Failure(Failure::TooManyArguments);
    }
    let declared = |t: &Term| {
        t.variables()
            .into_iter()
            .all(|v| state.variables.iter().any(|d| d == v))
    };
    if !tactic.explicit_args.iter().all(declared) {
        return ApplyResult::Failure(Failure::UnboundVariable);
    }
    let partial: Binding = pattern_vars
        .iter()
        .cloned()
        .zip(tactic.explicit_args.iter().cloned())
        .collect();
    let (from, to) = if tactic.reversed { (rhs, lhs) } else { (lhs, rhs) };

    let Some(binding) = match_pattern(from, &state.goal.lhs, &partial)
        .or_else(|| match_pattern(from, &state.goal.rhs, &partial))
    else {
        return ApplyResult::Failure(Failure::NoMatch);
    };
    let instance = instantiate_pattern(from, &binding).expect("match binds every lhs variable");
    let Some(replacement) = instantiate_pattern(to, &binding) else {
        return ApplyResult::Failure(Failure::UnboundVariable);
    };
    let goal = Equation {
        lhs: replace_all(&state.goal.lhs, &instance, &replacement),
        rhs: replace_all(&state.goal.rhs, &instance, &replacement),
    };
    if is_tautology(&goal) {
        return ApplyResult::ProofFinished;
    }
    if goal == state.goal {
        return ApplyResult::Failure(Failure::NoChange);
    }
    ApplyResult::NewState(ProofState {
        sort: state.sort.clone(),
        variables: state.variables.clone(),
        hypotheses: state.hypotheses.clone(),
        goal,
    })
}

/// Parse and apply in one step; parse errors become failures.
pub fn apply_text(state: &ProofState, tactic: &str, theory: &Theory) -> ApplyResult {
    match parse_tactic(tactic, theory) {
        Ok(ast) => apply_tactic(state, &ast, theory),
        Err(e) => ApplyResult::Failure(Failure::Parse(e.to_string())),
    }
}
