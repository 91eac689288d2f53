//! Proof states and their canonical text.
//!
//! A state prints as a block:
//!
//! ```text
//! a b c : ℝ
//! h : a = b + c
//! ⊢ a * a = b * b + 2 * b * c + c * c
//! ```
//!
//! The printed block doubles as the [`CanonicalKey`] used for deduplication.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{parse_term, print_term, ExprError, Signature, Term};

pub const TURNSTILE: &str = "⊢";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equation {
    pub lhs: Term,
    pub rhs: Term,
}

impl Equation {
    pub fn new(lhs: Term, rhs: Term) -> Self {
        Equation { lhs, rhs }
    }

    pub fn print(&self, sig: &Signature) -> String {
        format!("{} = {}", print_term(&self.lhs, sig), print_term(&self.rhs, sig))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    pub name: String,
    pub eq: Equation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProofState {
    pub sort: String,
    pub variables: Vec<String>,
    pub hypotheses: Vec<Hypothesis>,
    pub goal: Equation,
}

/// Printed form of a state; equal keys mean identical printed blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(pub String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl ProofState {
    /// Checks declaration and naming invariants.
    pub fn validate(&self) -> Result<(), ExprError> {
        let mut names: Vec<&str> = Vec::new();
        for v in &self.variables {
            if names.contains(&v.as_str()) {
                return Err(ExprError::DuplicateName(v.clone()));
            }
            names.push(v);
        }
        for h in &self.hypotheses {
            if names.contains(&h.name.as_str()) {
                return Err(ExprError::DuplicateName(h.name.clone()));
            }
            names.push(&h.name);
        }
        let equations = self
            .hypotheses
            .iter()
            .map(|h| &h.eq)
            .chain(std::iter::once(&self.goal));
        for eq in equations {
            for side in [&eq.lhs, &eq.rhs] {
                if let Some(undeclared) = side
                    .variables()
                    .into_iter()
                    .find(|v| !self.variables.iter().any(|d| d == v))
                {
                    return Err(ExprError::UndeclaredVariable(undeclared.to_string()));
                }
                if let Some(p) = side.pattern_vars().first() {
                    return Err(ExprError::parse(0, format!("pattern variable `{p}` in a state")));
                }
            }
        }
        Ok(())
    }

    pub fn print(&self, sig: &Signature) -> String {
        let mut out = String::new();
        if !self.variables.is_empty() {
            out.push_str(&self.variables.join(" "));
            out.push_str(" : ");
            out.push_str(&self.sort);
            out.push('\n');
        }
        for h in &self.hypotheses {
            out.push_str(&h.name);
            out.push_str(" : ");
            out.push_str(&h.eq.print(sig));
            out.push('\n');
        }
        out.push_str(TURNSTILE);
        out.push(' ');
        out.push_str(&self.goal.print(sig));
        out
    }

    pub fn key(&self, sig: &Signature) -> CanonicalKey {
        CanonicalKey(self.print(sig))
    }

    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }
}

pub fn print_state(state: &ProofState, sig: &Signature) -> String {
    state.print(sig)
}

/// Parse `lhs = rhs`. `base` is added to error offsets.
pub fn parse_equation(text: &str, base: usize, sig: &Signature) -> Result<Equation, ExprError> {
    let mut eqs = text.match_indices('=');
    let (at, _) = eqs
        .next()
        .ok_or_else(|| ExprError::parse(base, "expected an equation `lhs = rhs`"))?;
    if let Some((second, _)) = eqs.next() {
        return Err(ExprError::parse(base + second, "more than one `=`"));
    }
    let lhs = parse_term(&text[..at], sig).map_err(|e| e.shifted(base))?;
    let rhs = parse_term(&text[at + 1..], sig).map_err(|e| e.shifted(base + at + 1))?;
    Ok(Equation { lhs, rhs })
}

/// Parse a state block. Several variable lines are merged; they must share
/// one sort.
pub fn parse_state(text: &str, sig: &Signature) -> Result<ProofState, ExprError> {
    let mut variables = Vec::new();
    let mut sort: Option<String> = None;
    let mut hypotheses = Vec::new();
    let mut goal = None;
    let mut offset = 0;
    for raw in text.split('\n') {
        let line_start = offset;
        offset += raw.len() + 1;
        let line = raw.trim_end_matches('\r');
        let lead = line.len() - line.trim_start().len();
        let line = line.trim();
        let base = line_start + lead;
        if line.is_empty() {
            continue;
        }
        if goal.is_some() {
            return Err(ExprError::parse(base, "content after the goal line"));
        }
        if let Some(rest) = line.strip_prefix(TURNSTILE) {
            let skip = TURNSTILE.len();
            goal = Some(parse_equation(rest, base + skip, sig)?);
            continue;
        }
        let colon = line
            .find(':')
            .ok_or_else(|| ExprError::parse(base, "expected `names : sort` or `name : lhs = rhs`"))?;
        let names: Vec<&str> = line[..colon].split_whitespace().collect();
        let body = &line[colon + 1..];
        if names.is_empty() {
            return Err(ExprError::parse(base, "missing name before `:`"));
        }
        if body.contains('=') {
            if names.len() != 1 {
                return Err(ExprError::parse(base, "a hypothesis has exactly one name"));
            }
            let eq = parse_equation(body, base + colon + 1, sig)?;
            hypotheses.push(Hypothesis {
                name: names[0].to_string(),
                eq,
            });
        } else {
            let s = body.trim();
            if s.is_empty() {
                return Err(ExprError::parse(base + colon, "missing sort"));
            }
            match &sort {
                Some(prev) if prev != s => {
                    return Err(ExprError::parse(
                        base + colon + 1,
                        format!("mixed sorts `{prev}` and `{s}`"),
                    ))
                }
                _ => sort = Some(s.to_string()),
            }
            variables.extend(names.iter().map(|n| n.to_string()));
        }
    }
    let goal = goal.ok_or_else(|| ExprError::parse(text.len(), "missing `⊢` goal line"))?;
    let state = ProofState {
        sort: sort.unwrap_or_else(|| sig.sort_name().to_string()),
        variables,
        hypotheses,
        goal,
    };
    state.validate()?;
    Ok(state)
}

/// A parsed `theorem name (binders…) : goal` header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremHeader {
    pub name: String,
    pub state: ProofState,
}

/// Parse a theorem header. Anything from `:=` on is ignored. The colon
/// before the goal may be omitted, as in informal listings.
pub fn parse_theorem(text: &str, sig: &Signature) -> Result<TheoremHeader, ExprError> {
    let body = match text.find(":=") {
        Some(i) => &text[..i],
        None => text,
    };
    let mut pos = skip_ws(body, 0);
    let keyword = ["theorem", "lemma", "example"]
        .into_iter()
        .find(|k| body[pos..].starts_with(k))
        .ok_or_else(|| ExprError::parse(pos, "expected `theorem`"))?;
    pos += keyword.len();
    let name_start = skip_ws(body, pos);
    if name_start == pos && keyword != "example" {
        return Err(ExprError::parse(pos, "expected whitespace after keyword"));
    }
    pos = name_start;
    let name_len = body[pos..]
        .char_indices()
        .find(|&(_, c)| c.is_whitespace() || c == '(' || c == ':')
        .map(|(i, _)| i)
        .unwrap_or(body.len() - pos);
    let name = if keyword == "example" {
        "example".to_string()
    } else {
        if name_len == 0 {
            return Err(ExprError::parse(pos, "missing theorem name"));
        }
        body[pos..pos + name_len].to_string()
    };
    if keyword != "example" {
        pos += name_len;
    }

    let mut variables = Vec::new();
    let mut sort: Option<String> = None;
    let mut hypotheses = Vec::new();
    loop {
        pos = skip_ws(body, pos);
        if !body[pos..].starts_with('(') {
            break;
        }
        let close = matching_paren(body, pos)
            .ok_or_else(|| ExprError::parse(pos, "unbalanced `(` in binder"))?;
        let inner = &body[pos + 1..close];
        // A group is a binder only if it has a top-level `:`; otherwise it
        // starts the goal (colon-less header).
        let Some(colon) = top_level_colon(inner) else {
            break;
        };
        let names: Vec<&str> = inner[..colon].split_whitespace().collect();
        let rest = &inner[colon + 1..];
        let base = pos + 1;
        if names.is_empty() {
            return Err(ExprError::parse(base, "binder without names"));
        }
        if rest.contains('=') {
            if names.len() != 1 {
                return Err(ExprError::parse(base, "a hypothesis binder has one name"));
            }
            let eq = parse_equation(rest, base + colon + 1, sig)?;
            hypotheses.push(Hypothesis {
                name: names[0].to_string(),
                eq,
            });
        } else {
            let s = rest.trim();
            match &sort {
                Some(prev) if prev != s => {
                    return Err(ExprError::parse(
                        base + colon + 1,
                        format!("mixed sorts `{prev}` and `{s}`"),
                    ))
                }
                _ => sort = Some(s.to_string()),
            }
            variables.extend(names.iter().map(|n| n.to_string()));
        }
        pos = close + 1;
    }
    pos = skip_ws(body, pos);
    if body[pos..].starts_with(':') {
        pos += 1;
    }
    let goal = parse_equation(&body[pos..], pos, sig)?;
    let state = ProofState {
        sort: sort.unwrap_or_else(|| sig.sort_name().to_string()),
        variables,
        hypotheses,
        goal,
    };
    state.validate()?;
    Ok(TheoremHeader { name, state })
}

/// `theorem <name> (<vars> : <sort>) (<h> : <eq>)… : <goal> := by`
pub fn theorem_header(state: &ProofState, name: &str, sig: &Signature) -> String {
    let mut out = format!("theorem {name}");
    if !state.variables.is_empty() {
        out.push_str(&format!(" ({} : {})", state.variables.join(" "), state.sort));
    }
    for h in &state.hypotheses {
        out.push_str(&format!(" ({} : {})", h.name, h.eq.print(sig)));
    }
    out.push_str(&format!(" : {} := by", state.goal.print(sig)));
    out
}

fn skip_ws(s: &str, mut pos: usize) -> usize {
    while let Some(c) = s[pos..].chars().next() {
        if !c.is_whitespace() {
            break;
        }
        pos += c.len_utf8();
    }
    pos
}

fn matching_paren(s: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in s[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

fn top_level_colon(s: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ':' if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Variable and hypothesis names of a state, recovered from its printed
/// block. Works for builtin states and for foreign pretty text where a
/// `names : T` line is a hypothesis iff `T` contains a relation symbol.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateContext {
    pub variables: Vec<String>,
    pub hypotheses: Vec<String>,
}

pub(crate) const RELATIONS: [char; 6] = ['=', '<', '>', '≤', '≥', '≠'];

impl StateContext {
    pub fn from_state(state: &ProofState) -> Self {
        StateContext {
            variables: state.variables.clone(),
            hypotheses: state.hypotheses.iter().map(|h| h.name.clone()).collect(),
        }
    }

    pub fn from_pretty(pretty: &str) -> Self {
        let mut ctx = StateContext::default();
        for line in pretty.lines() {
            let line = line.trim();
            if line.starts_with(TURNSTILE) || line.starts_with("case ") {
                continue;
            }
            let Some(colon) = line.find(" : ") else {
                continue;
            };
            let names = line[..colon].split_whitespace().map(str::to_string);
            if line[colon + 3..].contains(RELATIONS) {
                ctx.hypotheses.extend(names);
            } else {
                ctx.variables.extend(names);
            }
        }
        ctx
    }

    pub fn is_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v == name)
    }

    pub fn is_hypothesis(&self, name: &str) -> bool {
        self.hypotheses.iter().any(|h| h == name)
    }
}
