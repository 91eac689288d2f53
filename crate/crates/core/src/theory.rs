//! Named rewrite rules and the line-oriented theory file.
//!
//! ```text
//! [signature]
//! sort G
//! binop * 70 left
//! postfix ⁻¹
//! const 1
//!
//! [rules]
//! mul_comm : x * y = y * x
//! ```
//!
//! In rule lines every lowercase identifier that is not a declared constant
//! is a pattern variable.

use std::path::Path;

use thiserror::Error;

use crate::expr::{ExprError, Signature, Term};
use crate::state::parse_equation;

pub const GROUP_THEORY: &str = include_str!("../data/group.theory");

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr {
        line: usize,
        #[source]
        source: ExprError,
    },
    #[error("reading theory file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    /// Pattern variables in first-occurrence order of the lhs; explicit
    /// tactic arguments bind them positionally.
    pub pattern_vars: Vec<String>,
}

impl RewriteRule {
    pub fn new(name: &str, lhs: Term, rhs: Term) -> Result<Self, String> {
        let pattern_vars: Vec<String> = lhs.pattern_vars().into_iter().map(String::from).collect();
        if let Some(extra) = rhs
            .pattern_vars()
            .into_iter()
            .find(|v| !pattern_vars.iter().any(|p| p == v))
        {
            return Err(format!("rule `{name}`: `{extra}` occurs only on the right-hand side"));
        }
        Ok(RewriteRule {
            name: name.to_string(),
            lhs,
            rhs,
            pattern_vars,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Theory {
    pub signature: Signature,
    pub rules: Vec<RewriteRule>,
}

impl Theory {
    /// The bundled group theory (`group.theory`).
    pub fn group() -> Theory {
        Theory::parse(GROUP_THEORY).expect("bundled theory parses")
    }

    pub fn empty(signature: Signature) -> Theory {
        Theory {
            signature,
            rules: Vec::new(),
        }
    }

    pub fn rule(&self, name: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn load(path: &Path) -> Result<Theory, TheoryError> {
        Theory::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Theory, TheoryError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Signature,
            Rules,
        }
        let mut section = Section::None;
        let mut sig = Signature::new("G");
        let mut rule_lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(c) => &raw[..c],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| TheoryError::Syntax {
                line: line_no,
                message,
            };
            let expr = |source: ExprError| TheoryError::Expr {
                line: line_no,
                source,
            };
            match line {
                "[signature]" => {
                    section = Section::Signature;
                    continue;
                }
                "[rules]" => {
                    section = Section::Rules;
                    continue;
                }
                _ if line.starts_with('[') => {
                    return Err(syntax(format!("unknown section {line}")));
                }
                _ => {}
            }
            match section {
                Section::None => return Err(syntax("content before any section".into())),
                Section::Signature => {
                    let words: Vec<&str> = line.split_whitespace().collect();
                    match words.as_slice() {
                        ["sort", s] => sig.set_sort_name(*s),
                        ["binop", sym, prec, assoc] => {
                            let prec: u32 = prec
                                .parse()
                                .map_err(|_| syntax(format!("bad precedence {prec:?}")))?;
                            let left = match *assoc {
                                "left" => true,
                                "right" => false,
                                other => {
                                    return Err(syntax(format!(
                                        "associativity must be left or right, got {other:?}"
                                    )))
                                }
                            };
                            sig.add_binary(sym, prec, left).map_err(expr)?;
                        }
                        ["postfix", sym] => sig.add_postfix(sym).map_err(expr)?,
                        ["const", sym] => sig.add_constant(sym).map_err(expr)?,
                        _ => return Err(syntax(format!("unrecognised signature line {line:?}"))),
                    }
                }
                Section::Rules => rule_lines.push((line_no, line.to_string())),
            }
        }

        // Rules are parsed after the whole signature is known.
        let mut rules: Vec<RewriteRule> = Vec::new();
        for (line_no, line) in rule_lines {
            let syntax = |message: String| TheoryError::Syntax {
                line: line_no,
                message,
            };
            let colon = line
                .find(':')
                .ok_or_else(|| syntax("expected `name : lhs = rhs`".into()))?;
            let name = line[..colon].trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax(format!("bad rule name {name:?}")));
            }
            if rules.iter().any(|r| r.name == name) {
                return Err(syntax(format!("duplicate rule `{name}`")));
            }
            let eq = parse_equation(&line[colon + 1..], colon + 1, &sig).map_err(|source| {
                TheoryError::Expr {
                    line: line_no,
                    source,
                }
            })?;
            let lhs = to_pattern(eq.lhs).map_err(syntax)?;
            let rhs = to_pattern(eq.rhs).map_err(syntax)?;
            rules.push(RewriteRule::new(name, lhs, rhs).map_err(syntax)?);
        }
        Ok(Theory {
            signature: sig,
            rules,
        })
    }
}

fn to_pattern(t: Term) -> Result<Term, String> {
    Ok(match t {
        Term::Variable(v) => {
            if v.chars().next().is_some_and(char::is_lowercase) {
                Term::PatternVar(v)
            } else {
                return Err(format!("`{v}` is neither a constant nor a lowercase pattern variable"));
            }
        }
        Term::BinaryApp(op, l, r) => {
            Term::BinaryApp(op, Box::new(to_pattern(*l)?), Box::new(to_pattern(*r)?))
        }
        Term::PostfixApp(op, t) => Term::PostfixApp(op, Box::new(to_pattern(*t)?)),
        other => other,
    })
}
