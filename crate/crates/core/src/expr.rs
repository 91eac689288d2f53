//! Terms over a configurable equational signature.
//!
//! The grammar is deliberately small: identifiers, numerals, parenthesised
//! groups, infix binary operators with declared precedence and associativity,
//! and postfix operators (e.g. `⁻¹`) that bind tighter than any infix operator.
//! Printing emits the minimal parenthesisation that reparses to the same tree.

use std::fmt;

use thiserror::Error;

/// ASCII spelling accepted on input for the inverse operator.
pub const INVERSE_ALIAS: &str = "^-1";
/// Canonical inverse symbol.
pub const INVERSE: &str = "⁻¹";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("unknown symbol {found:?} at byte {offset}")]
    Lex { offset: usize, found: char },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid signature: {0}")]
    Signature(String),
}

impl ExprError {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        ExprError::Parse {
            offset,
            message: message.into(),
        }
    }

    /// Shift the reported offset by `base`; used when a sub-slice is parsed.
    pub(crate) fn shifted(self, base: usize) -> Self {
        match self {
            ExprError::Lex { offset, found } => ExprError::Lex {
                offset: offset + base,
                found,
            },
            ExprError::Parse { offset, message } => ExprError::Parse {
                offset: offset + base,
                message,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryOp {
    pub symbol: String,
    pub precedence: u32,
    pub left_assoc: bool,
}

/// Operators, constants and the carrier sort of a theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    binary_ops: Vec<BinaryOp>,
    postfix_ops: Vec<String>,
    constants: Vec<String>,
    sort_name: String,
}

impl Signature {
    pub fn new(sort_name: impl Into<String>) -> Self {
        Signature {
            binary_ops: Vec::new(),
            postfix_ops: Vec::new(),
            constants: Vec::new(),
            sort_name: sort_name.into(),
        }
    }

    /// `*` (70, left), `+` (65, left), postfix `⁻¹`, constant `1`.
    pub fn group(sort_name: impl Into<String>) -> Self {
        let mut sig = Signature::new(sort_name);
        sig.add_binary("*", 70, true).expect("static signature");
        sig.add_binary("+", 65, true).expect("static signature");
        sig.add_postfix(INVERSE).expect("static signature");
        sig.add_constant("1").expect("static signature");
        sig
    }

    pub fn sort_name(&self) -> &str {
        &self.sort_name
    }

    pub fn set_sort_name(&mut self, sort: impl Into<String>) {
        self.sort_name = sort.into();
    }

    pub fn binary_ops(&self) -> &[BinaryOp] {
        &self.binary_ops
    }

    pub fn postfix_ops(&self) -> &[String] {
        &self.postfix_ops
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn binary(&self, symbol: &str) -> Option<&BinaryOp> {
        self.binary_ops.iter().find(|op| op.symbol == symbol)
    }

    pub fn is_postfix(&self, symbol: &str) -> bool {
        self.postfix_ops.iter().any(|s| s == symbol)
    }

    /// Declared constants plus any decimal numeral.
    pub fn is_constant(&self, symbol: &str) -> bool {
        self.constants.iter().any(|s| s == symbol) || is_numeral(symbol)
    }

    /// True when `symbol` is any operator or constant of the signature.
    pub fn has_symbol(&self, symbol: &str) -> bool {
        self.binary(symbol).is_some() || self.is_postfix(symbol) || self.is_constant(symbol)
    }

    fn check_fresh(&self, symbol: &str) -> Result<(), ExprError> {
        if symbol.is_empty() || symbol.chars().any(|c| c.is_whitespace() || "()=".contains(c)) {
            return Err(ExprError::Signature(format!(
                "symbol {symbol:?} may not be empty or contain whitespace, parentheses or `=`"
            )));
        }
        let taken = self.binary(symbol).is_some()
            || self.is_postfix(symbol)
            || self.constants.iter().any(|s| s == symbol);
        if taken {
            return Err(ExprError::Signature(format!("symbol {symbol:?} declared twice")));
        }
        Ok(())
    }

    pub fn add_binary(
        &mut self,
        symbol: &str,
        precedence: u32,
        left_assoc: bool,
    ) -> Result<(), ExprError> {
        self.check_fresh(symbol)?;
        if precedence == 0 {
            return Err(ExprError::Signature(format!(
                "precedence of {symbol:?} must be positive"
            )));
        }
        // Mixed associativity at one level has no unique parse.
        if let Some(other) = self
            .binary_ops
            .iter()
            .find(|op| op.precedence == precedence && op.left_assoc != left_assoc)
        {
            return Err(ExprError::Signature(format!(
                "{symbol:?} and {:?} share precedence {precedence} but differ in associativity",
                other.symbol
            )));
        }
        self.binary_ops.push(BinaryOp {
            symbol: symbol.to_string(),
            precedence,
            left_assoc,
        });
        Ok(())
    }

    pub fn add_postfix(&mut self, symbol: &str) -> Result<(), ExprError> {
        let symbol = canonical_symbol(symbol);
        self.check_fresh(symbol)?;
        self.postfix_ops.push(symbol.to_string());
        Ok(())
    }

    pub fn add_constant(&mut self, symbol: &str) -> Result<(), ExprError> {
        self.check_fresh(symbol)?;
        self.constants.push(symbol.to_string());
        Ok(())
    }

    /// Every operator spelling the lexer should recognise, longest first.
    fn operator_spellings(&self) -> Vec<(&str, &str)> {
        let mut spellings: Vec<(&str, &str)> = self
            .binary_ops
            .iter()
            .map(|op| (op.symbol.as_str(), op.symbol.as_str()))
            .chain(self.postfix_ops.iter().map(|s| (s.as_str(), s.as_str())))
            .collect();
        if self.is_postfix(INVERSE) {
            spellings.push((INVERSE_ALIAS, INVERSE));
        }
        spellings.sort_by_key(|(spelling, _)| std::cmp::Reverse(spelling.len()));
        spellings
    }
}

fn canonical_symbol(symbol: &str) -> &str {
    if symbol == INVERSE_ALIAS {
        INVERSE
    } else {
        symbol
    }
}

pub(crate) fn is_numeral(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_alphabetic() || c.is_ascii_digit() || matches!(c, '_' | '\'' | '.' | '!' | '?')
}

/// A term tree. `PatternVar` only appears inside rewrite-rule patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Variable(String),
    Constant(String),
    BinaryApp(String, Box<Term>, Box<Term>),
    PostfixApp(String, Box<Term>),
    PatternVar(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Variable(name.to_string())
    }

    pub fn constant(symbol: &str) -> Term {
        Term::Constant(symbol.to_string())
    }

    pub fn binary(op: &str, left: Term, right: Term) -> Term {
        Term::BinaryApp(op.to_string(), Box::new(left), Box::new(right))
    }

    pub fn postfix(op: &str, operand: Term) -> Term {
        Term::PostfixApp(op.to_string(), Box::new(operand))
    }

    /// Visit every subterm in pre-order (root, then left, then right).
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }

    /// Names of `Variable` leaves in first-occurrence order, without repeats.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in self.preorder() {
            if let Term::Variable(name) = t {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    /// Names of `PatternVar` leaves in first-occurrence order, without repeats.
    pub fn pattern_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in self.preorder() {
            if let Term::PatternVar(name) = t {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.preorder().count()
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::BinaryApp(_, l, r) => 1 + l.depth().max(r.depth()),
            Term::PostfixApp(_, t) => 1 + t.depth(),
            _ => 1,
        }
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a Term>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a Term;

    fn next(&mut self) -> Option<&'a Term> {
        let t = self.stack.pop()?;
        match t {
            Term::BinaryApp(_, l, r) => {
                self.stack.push(r);
                self.stack.push(l);
            }
            Term::PostfixApp(_, inner) => self.stack.push(inner),
            _ => {}
        }
        Some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Ident(String),
    Numeral(String),
    Binary(String),
    Postfix(String),
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str, sig: &Signature) -> Result<Vec<Token>, ExprError> {
    let spellings = sig.operator_spellings();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().expect("non-empty rest");
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        if let Some((spelling, canonical)) = spellings.iter().find(|(s, _)| rest.starts_with(s)) {
            let kind = if sig.is_postfix(canonical) {
                TokenKind::Postfix(canonical.to_string())
            } else {
                TokenKind::Binary(canonical.to_string())
            };
            tokens.push(Token { kind, offset: pos });
            pos += spelling.len();
            continue;
        }
        match c {
            '(' => {
                tokens.push(Token {
                    kind: TokenKind::LParen,
                    offset: pos,
                });
                pos += 1;
            }
            ')' => {
                tokens.push(Token {
                    kind: TokenKind::RParen,
                    offset: pos,
                });
                pos += 1;
            }
            c if c.is_ascii_digit() => {
                let len = rest
                    .find(|ch: char| !ch.is_ascii_digit())
                    .unwrap_or(rest.len());
                tokens.push(Token {
                    kind: TokenKind::Numeral(rest[..len].to_string()),
                    offset: pos,
                });
                pos += len;
            }
            c if is_ident_start(c) => {
                let len = rest
                    .char_indices()
                    .find(|&(_, ch)| !is_ident_continue(ch))
                    .map(|(i, _)| i)
                    .unwrap_or(rest.len());
                tokens.push(Token {
                    kind: TokenKind::Ident(rest[..len].to_string()),
                    offset: pos,
                });
                pos += len;
            }
            other => return Err(ExprError::Lex { offset: pos, found: other }),
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: text.len(),
    });
    Ok(tokens)
}

struct Parser<'s> {
    tokens: Vec<Token>,
    pos: usize,
    sig: &'s Signature,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self, min_prec: u32) -> Result<Term, ExprError> {
        let mut lhs = self.postfix_atom()?;
        while let TokenKind::Binary(s) = &self.peek().kind {
            let symbol = s.clone();
            let op = self.sig.binary(&symbol).expect("lexed from signature").clone();
            if op.precedence < min_prec {
                break;
            }
            let op_tok = self.bump();
            let next_min = if op.left_assoc {
                op.precedence + 1
            } else {
                op.precedence
            };
            if matches!(self.peek().kind, TokenKind::Eof | TokenKind::RParen) {
                return Err(ExprError::parse(
                    op_tok.offset,
                    format!("dangling operator `{symbol}`"),
                ));
            }
            let rhs = self.expr(next_min)?;
            lhs = Term::BinaryApp(symbol, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn postfix_atom(&mut self) -> Result<Term, ExprError> {
        let mut t = self.atom()?;
        while let TokenKind::Postfix(op) = &self.peek().kind {
            let op = op.clone();
            self.bump();
            t = Term::PostfixApp(op, Box::new(t));
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, ExprError> {
        let tok = self.bump();
        match tok.kind {
            TokenKind::Ident(name) => {
                if self.sig.is_constant(&name) {
                    Ok(Term::Constant(name))
                } else {
                    Ok(Term::Variable(name))
                }
            }
            TokenKind::Numeral(n) => Ok(Term::Constant(n)),
            TokenKind::LParen => {
                if self.peek().kind == TokenKind::RParen {
                    return Err(ExprError::parse(tok.offset, "empty parentheses"));
                }
                let inner = self.expr(0)?;
                match self.peek().kind {
                    TokenKind::RParen => {
                        self.bump();
                        Ok(inner)
                    }
                    TokenKind::Eof => Err(ExprError::parse(tok.offset, "unbalanced `(`")),
                    _ => Err(ExprError::parse(self.peek().offset, "expected `)`")),
                }
            }
            TokenKind::RParen => Err(ExprError::parse(tok.offset, "unbalanced `)`")),
            TokenKind::Binary(s) => Err(ExprError::parse(
                tok.offset,
                format!("dangling operator `{s}`"),
            )),
            TokenKind::Postfix(s) => Err(ExprError::parse(
                tok.offset,
                format!("postfix `{s}` without operand"),
            )),
            TokenKind::Eof => Err(ExprError::parse(tok.offset, "unexpected end of input")),
        }
    }

    fn expect_eof(&self) -> Result<(), ExprError> {
        let tok = self.peek();
        match tok.kind {
            TokenKind::Eof => Ok(()),
            TokenKind::RParen => Err(ExprError::parse(tok.offset, "unbalanced `)`")),
            _ => Err(ExprError::parse(tok.offset, "unexpected token")),
        }
    }
}

/// Parse a single term under `sig`.
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, ExprError> {
    let tokens = lex(text, sig)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        sig,
    };
    if p.peek().kind == TokenKind::Eof {
        return Err(ExprError::parse(0, "empty term"));
    }
    let t = p.expr(0)?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a juxtaposed sequence of atomic arguments, e.g. `a (b * c) b⁻¹`.
///
/// Each argument is an identifier, numeral or parenthesised term, optionally
/// followed by postfix operators. This is the shape of explicit lemma
/// arguments in `rw [name args…]`.
pub fn parse_arguments(text: &str, sig: &Signature) -> Result<Vec<Term>, ExprError> {
    let tokens = lex(text, sig)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        sig,
    };
    let mut args = Vec::new();
    while p.peek().kind != TokenKind::Eof {
        if let TokenKind::Binary(s) = &p.peek().kind {
            return Err(ExprError::parse(
                p.peek().offset,
                format!("bare operator `{s}` in argument list"),
            ));
        }
        args.push(p.postfix_atom()?);
    }
    Ok(args)
}

/// Render with minimal parentheses and single spaces around binary operators.
pub fn print_term(t: &Term, sig: &Signature) -> String {
    let mut out = String::new();
    write_term(t, sig, &mut out);
    out
}

fn write_term(t: &Term, sig: &Signature, out: &mut String) {
    match t {
        Term::Variable(n) | Term::Constant(n) | Term::PatternVar(n) => out.push_str(n),
        Term::PostfixApp(op, inner) => {
            let wrap = matches!(**inner, Term::BinaryApp(..));
            write_child(inner, wrap, sig, out);
            out.push_str(op);
        }
        Term::BinaryApp(op, l, r) => {
            let (prec, left_assoc) = match sig.binary(op) {
                Some(b) => (b.precedence, b.left_assoc),
                None => (u32::MAX, true),
            };
            let child_prec = |c: &Term| match c {
                Term::BinaryApp(cop, ..) => sig.binary(cop).map_or(u32::MAX, |b| b.precedence),
                _ => u32::MAX,
            };
            let lp = child_prec(l);
            let rp = child_prec(r);
            let wrap_left = lp < prec || (lp == prec && !left_assoc);
            let wrap_right = rp < prec || (rp == prec && left_assoc);
            write_child(l, wrap_left, sig, out);
            out.push(' ');
            out.push_str(op);
            out.push(' ');
            write_child(r, wrap_right, sig, out);
        }
    }
}

fn write_child(t: &Term, wrap: bool, sig: &Signature, out: &mut String) {
    if wrap {
        out.push('(');
        write_term(t, sig, out);
        out.push(')');
    } else {
        write_term(t, sig, out);
    }
}

/// Signature-free rendering, used for debugging output only.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(n) | Term::Constant(n) => write!(f, "{n}"),
            Term::PatternVar(n) => write!(f, "?{n}"),
            Term::BinaryApp(op, l, r) => write!(f, "({l} {op} {r})"),
            Term::PostfixApp(op, t) => write!(f, "{t}{op}"),
        }
    }
}
