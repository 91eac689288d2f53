//! Tactic templates: concrete tactics with names abstracted to placeholders.
//!
//! `rw [mul_comm a b]` and `rw [mul_comm x y]` both become
//! `rw [mul_comm {var0} {var1}]`. Hypothesis names and inline relations
//! (`a = b`, `k > 1`) become `{hypothesis}`; anything else the vocabulary
//! does not know becomes `{unknown}`, which makes a template uninstantiable.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{is_ident_continue, is_ident_start, is_numeral};
use crate::state::{StateContext, RELATIONS};
use crate::theory::Theory;

pub const DEFAULT_INSTANTIATION_CAP: usize = 200;

const HYPOTHESIS: &str = "{hypothesis}";
const UNKNOWN: &str = "{unknown}";

/// Tactic heads and modifiers kept verbatim.
const KEYWORDS: &[&str] = &[
    "rw", "rwa", "rewrite", "erw", "nth_rewrite", "simp", "simp_all", "simp_rw", "dsimp",
    "exact", "apply", "refine", "intro", "intros", "use", "have", "show", "calc", "at", "only",
    "with", "using", "by", "linarith", "nlinarith", "ring", "ring_nf", "norm_num", "field_simp",
    "omega", "positivity", "constructor", "cases", "rcases", "obtain", "induction", "ext",
    "congr", "symm", "trivial", "rfl", "decide", "aesop", "assumption", "group", "abel",
];

/// Structural punctuation; never abstracted.
const PUNCTUATION: &[&str] = &["[", "]", "(", ")", "⟨", "⟩", ",", "←", "<-", ":", ":=", "·"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("empty tactic")]
    Empty,
    #[error("malformed template {text:?}: {message}")]
    Malformed { text: String, message: String },
}

/// Names the templatizer keeps as-is.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: HashSet<String>,
    symbols: Vec<String>,
}

impl Vocabulary {
    pub fn from_theory(theory: &Theory) -> Self {
        let mut words: HashSet<String> = KEYWORDS.iter().map(|k| k.to_string()).collect();
        words.extend(theory.rules.iter().map(|r| r.name.clone()));
        words.extend(theory.signature.constants().iter().cloned());
        let sig = &theory.signature;
        let mut symbols: Vec<String> = PUNCTUATION.iter().map(|s| s.to_string()).collect();
        symbols.extend(sig.binary_ops().iter().map(|op| op.symbol.clone()));
        symbols.extend(sig.postfix_ops().iter().cloned());
        if sig.is_postfix(crate::expr::INVERSE) {
            symbols.push(crate::expr::INVERSE_ALIAS.to_string());
        }
        symbols.extend(RELATIONS.iter().map(|c| c.to_string()));
        symbols.sort_by_key(|s| std::cmp::Reverse(s.len()));
        symbols.dedup();
        Vocabulary { words, symbols }
    }

    pub fn add_word(&mut self, word: &str) {
        self.words.insert(word.to_string());
    }

    fn knows_word(&self, w: &str) -> bool {
        self.words.contains(w) || is_numeral(w)
    }

    fn knows_symbol(&self, s: &str) -> bool {
        self.symbols.iter().any(|k| k == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Piece {
    Lit(String),
    Var(usize),
    Hyp,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TacticTemplate {
    text: String,
    pieces: Vec<Piece>,
    var_arity: usize,
    hyp_arity: usize,
    has_unknown: bool,
    pub frequency: u64,
}

impl TacticTemplate {
    /// Parse template text. Variable placeholders must be numbered
    /// contiguously from 0 in order of first occurrence.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let malformed = |message: String| TemplateError::Malformed {
            text: text.to_string(),
            message,
        };
        if text.trim().is_empty() {
            return Err(TemplateError::Empty);
        }
        let mut pieces = Vec::new();
        let mut lit = String::new();
        let mut rest = text;
        let mut next_var = 0usize;
        let mut hyp_arity = 0;
        let mut has_unknown = false;
        while !rest.is_empty() {
            let placeholder = if rest.starts_with(HYPOTHESIS) {
                Some((Piece::Hyp, HYPOTHESIS.len()))
            } else if rest.starts_with(UNKNOWN) {
                Some((Piece::Unknown, UNKNOWN.len()))
            } else if let Some(after) = rest.strip_prefix("{var") {
                let digits = after.bytes().take_while(u8::is_ascii_digit).count();
                if digits > 0 && after[digits..].starts_with('}') {
                    let k: usize = after[..digits]
                        .parse()
                        .map_err(|_| malformed("placeholder index overflow".into()))?;
                    Some((Piece::Var(k), 4 + digits + 1))
                } else {
                    None
                }
            } else {
                None
            };
            match placeholder {
                Some((piece, len)) => {
                    if !lit.is_empty() {
                        pieces.push(Piece::Lit(std::mem::take(&mut lit)));
                    }
                    match piece {
                        Piece::Var(k) if k > next_var => {
                            return Err(malformed(format!(
                                "{{var{k}}} appears before {{var{next_var}}}"
                            )))
                        }
                        Piece::Var(k) if k == next_var => next_var += 1,
                        Piece::Hyp => hyp_arity += 1,
                        Piece::Unknown => has_unknown = true,
                        _ => {}
                    }
                    pieces.push(piece);
                    rest = &rest[len..];
                }
                None => {
                    let c = rest.chars().next().expect("non-empty");
                    lit.push(c);
                    rest = &rest[c.len_utf8()..];
                }
            }
        }
        if !lit.is_empty() {
            pieces.push(Piece::Lit(lit));
        }
        Ok(TacticTemplate {
            text: text.to_string(),
            pieces,
            var_arity: next_var,
            hyp_arity,
            has_unknown,
            frequency: 1,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn var_arity(&self) -> usize {
        self.var_arity
    }

    pub fn hyp_arity(&self) -> usize {
        self.hyp_arity
    }

    pub fn has_unknown(&self) -> bool {
        self.has_unknown
    }

    /// Substitute an explicit binding. `None` for templates with
    /// `{unknown}` or a binding of the wrong shape.
    pub fn fill(&self, binding: &Binding) -> Option<String> {
        if self.has_unknown
            || binding.vars.len() != self.var_arity
            || binding.hyps.len() != self.hyp_arity
        {
            return None;
        }
        let mut out = String::with_capacity(self.text.len());
        let mut hyps = binding.hyps.iter();
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Var(k) => out.push_str(&binding.vars[*k]),
                Piece::Hyp => out.push_str(hyps.next().expect("hyp arity checked")),
                Piece::Unknown => unreachable!("unknown templates rejected above"),
            }
        }
        Some(out)
    }

    fn fill_indices(&self, ctx: &StateContext, slots: &[usize]) -> String {
        let (var_slots, hyp_slots) = slots.split_at(self.var_arity);
        let mut out = String::with_capacity(self.text.len() + 8);
        let mut hyps = hyp_slots.iter();
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Var(k) => out.push_str(&ctx.variables[var_slots[*k]]),
                Piece::Hyp => out.push_str(&ctx.hypotheses[*hyps.next().expect("slot")]),
                Piece::Unknown => unreachable!("unknown templates yield no instantiations"),
            }
        }
        out
    }
}

/// Concrete names extracted while templatizing, in slot order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding {
    pub vars: Vec<String>,
    pub hyps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templatized {
    pub template: TacticTemplate,
    pub binding: Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Word,
    Symbol,
}

#[derive(Debug, Clone, Copy)]
struct Tok {
    start: usize,
    end: usize,
    kind: TokKind,
}

fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let c = rest.chars().next().expect("non-empty");
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        let (len, kind) = if let Some(sym) = vocab.symbols.iter().find(|s| rest.starts_with(s.as_str())) {
            (sym.len(), TokKind::Symbol)
        } else if is_ident_start(c) || c.is_ascii_digit() {
            let len = rest
                .char_indices()
                .find(|&(_, ch)| !is_ident_continue(ch))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            (len, TokKind::Word)
        } else {
            (c.len_utf8(), TokKind::Symbol)
        };
        toks.push(Tok {
            start: pos,
            end: pos + len,
            kind,
        });
        pos += len;
    }
    toks
}

fn is_relation(s: &str) -> bool {
    let mut chars = s.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if RELATIONS.contains(&c))
}

/// Abstract `tactic` against the names in `ctx`.
pub fn templatize(
    tactic: &str,
    ctx: &StateContext,
    vocab: &Vocabulary,
) -> Result<Templatized, TemplateError> {
    if tactic.trim().is_empty() {
        return Err(TemplateError::Empty);
    }
    let toks = tokenize(tactic, vocab);
    let text_of = |t: &Tok| &tactic[t.start..t.end];

    // Inline relations swallow their whole argument segment.
    let mut hyp_spans: Vec<(usize, usize)> = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if !is_relation(text_of(t)) || hyp_spans.iter().any(|&(a, b)| a <= i && i <= b) {
            continue;
        }
        let mut lo = i;
        let mut depth = 0i32;
        while lo > 1 {
            let s = text_of(&toks[lo - 1]);
            match s {
                ")" => depth += 1,
                "(" if depth == 0 => break,
                "(" => depth -= 1,
                "[" | "," | "⟨" | "←" | "<-" if depth == 0 => break,
                _ => {}
            }
            lo -= 1;
        }
        let mut hi = i;
        depth = 0;
        while hi + 1 < toks.len() {
            let s = text_of(&toks[hi + 1]);
            match s {
                "(" => depth += 1,
                ")" if depth == 0 => break,
                ")" => depth -= 1,
                "]" | "," | "⟩" if depth == 0 => break,
                _ => {}
            }
            hi += 1;
        }
        hyp_spans.push((lo, hi));
    }

    let mut out = String::with_capacity(tactic.len() + 16);
    let mut binding = Binding::default();
    let mut var_index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cursor = 0;
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        out.push_str(&tactic[cursor..t.start]);
        if let Some(&(_, hi)) = hyp_spans.iter().find(|&&(lo, _)| lo == i) {
            let end = toks[hi].end;
            out.push_str(HYPOTHESIS);
            binding.hyps.push(tactic[t.start..end].to_string());
            cursor = end;
            i = hi + 1;
            continue;
        }
        let s = text_of(&t);
        match t.kind {
            TokKind::Word if ctx.is_variable(s) => {
                let next = var_index.len();
                let k = *var_index.entry(s).or_insert_with(|| {
                    binding.vars.push(s.to_string());
                    next
                });
                out.push_str(&format!("{{var{k}}}"));
            }
            TokKind::Word if ctx.is_hypothesis(s) => {
                out.push_str(HYPOTHESIS);
                binding.hyps.push(s.to_string());
            }
            TokKind::Word if vocab.knows_word(s) => out.push_str(s),
            TokKind::Symbol if vocab.knows_symbol(s) => out.push_str(s),
            _ => out.push_str(UNKNOWN),
        }
        cursor = t.end;
        i += 1;
    }
    out.push_str(&tactic[cursor..]);
    let template = TacticTemplate::parse(&out)?;
    debug_assert_eq!(template.var_arity, binding.vars.len());
    Ok(Templatized { template, binding })
}

/// All instantiations in lexicographic order of slot indices (variable
/// slots first, then hypothesis slots; the last slot varies fastest),
/// truncated to `cap`.
pub fn instantiations<'a>(
    template: &'a TacticTemplate,
    ctx: &'a StateContext,
    cap: usize,
) -> impl Iterator<Item = String> + 'a {
    let radices: Vec<usize> = std::iter::repeat_n(ctx.variables.len(), template.var_arity)
        .chain(std::iter::repeat_n(ctx.hypotheses.len(), template.hyp_arity))
        .collect();
    let empty = template.has_unknown || radices.contains(&0);
    let mut slots = vec![0usize; radices.len()];
    let mut done = empty;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let item = template.fill_indices(ctx, &slots);
        // odometer increment
        done = true;
        for pos in (0..slots.len()).rev() {
            slots[pos] += 1;
            if slots[pos] < radices[pos] {
                done = false;
                break;
            }
            slots[pos] = 0;
        }
        Some(item)
    })
    .take(cap)
}

pub fn instantiate(template: &TacticTemplate, ctx: &StateContext, cap: usize) -> Vec<String> {
    instantiations(template, ctx, cap).collect()
}

/// Deduplicate by template text; order by frequency (desc) then text.
pub fn build_template_corpus<'a>(
    pairs: impl IntoIterator<Item = (&'a StateContext, &'a str)>,
    vocab: &Vocabulary,
) -> Vec<TacticTemplate> {
    let mut counts: BTreeMap<String, (TacticTemplate, u64)> = BTreeMap::new();
    for (ctx, tactic) in pairs {
        let Ok(t) = templatize(tactic, ctx, vocab) else {
            continue;
        };
        counts
            .entry(t.template.text.clone())
            .or_insert_with(|| (t.template, 0))
            .1 += 1;
    }
    let mut out: Vec<TacticTemplate> = counts
        .into_values()
        .map(|(mut t, n)| {
            t.frequency = n;
            t
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.text.cmp(&b.text)));
    out
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct TemplateRecord {
    pub template: String,
    pub var_arity: usize,
    pub hyp_arity: usize,
    pub frequency: u64,
}

impl From<&TacticTemplate> for TemplateRecord {
    fn from(t: &TacticTemplate) -> Self {
        TemplateRecord {
            template: t.text.clone(),
            var_arity: t.var_arity,
            hyp_arity: t.hyp_arity,
            frequency: t.frequency,
        }
    }
}

impl TryFrom<TemplateRecord> for TacticTemplate {
    type Error = TemplateError;

    fn try_from(r: TemplateRecord) -> Result<Self, TemplateError> {
        let mut t = TacticTemplate::parse(&r.template)?;
        if t.var_arity != r.var_arity || t.hyp_arity != r.hyp_arity {
            return Err(TemplateError::Malformed {
                text: r.template,
                message: "declared arity disagrees with placeholders".into(),
            });
        }
        if r.frequency == 0 {
            return Err(TemplateError::Malformed {
                text: r.template,
                message: "frequency must be at least 1".into(),
            });
        }
        t.frequency = r.frequency;
        Ok(t)
    }
}

pub fn write_template_corpus(
    templates: &[TacticTemplate],
    mut out: impl Write,
) -> std::io::Result<()> {
    for t in templates {
        serde_json::to_writer(&mut out, &TemplateRecord::from(t))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a template corpus; returns the templates and the 1-based numbers of
/// lines that were skipped as malformed.
pub fn read_template_corpus(
    input: impl BufRead,
) -> std::io::Result<(Vec<TacticTemplate>, Vec<usize>)> {
    let mut templates = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<TemplateRecord>(&line)
            .ok()
            .and_then(|r| TacticTemplate::try_from(r).ok());
        match parsed {
            Some(t) => templates.push(t),
            None => bad.push(i + 1),
        }
    }
    Ok((templates, bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_theory(&Theory::group())
    }

    fn ctx(vars: &[&str], hyps: &[&str]) -> StateContext {
        StateContext {
            variables: vars.iter().map(|s| s.to_string()).collect(),
            hypotheses: hyps.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn tmpl(tactic: &str, c: &StateContext) -> String {
        templatize(tactic, c, &vocab()).unwrap().template.text
    }

    #[test]
    fn variables_become_numbered_slots() {
        let c = ctx(&["a", "b", "c"], &[]);
        assert_eq!(tmpl("rw [mul_comm a b]", &c), "rw [mul_comm {var0} {var1}]");
        assert_eq!(tmpl("rw [mul_comm a a]", &c), "rw [mul_comm {var0} {var0}]");
        assert_eq!(tmpl("rw [mul_comm b a]", &c), "rw [mul_comm {var0} {var1}]");
        assert_eq!(
            tmpl("rw[← one_mul (b⁻¹ * a⁻¹)]", &c),
            "rw[← one_mul ({var0}⁻¹ * {var1}⁻¹)]"
        );
    }

    #[test]
    fn hypotheses_and_unknowns() {
        let c = ctx(&["a", "b"], &["h"]);
        assert_eq!(tmpl("rw [h]", &c), "rw [{hypothesis}]");
        assert_eq!(tmpl("foo [bar a]", &c), "{unknown} [{unknown} {var0}]");
        assert_eq!(
            tmpl("linarith [a = b, h]", &c),
            "linarith [{hypothesis}, {hypothesis}]"
        );
        assert_eq!(tmpl("nlinarith [k > 1]", &c), "nlinarith [{hypothesis}]");
        assert_eq!(tmpl("exact (a = b)", &c), "exact ({hypothesis})");
    }

    #[test]
    fn alpha_invariance() {
        let t1 = templatize("rw [mul_comm a b]", &ctx(&["a", "b"], &[]), &vocab()).unwrap();
        let t2 = templatize("rw [mul_comm x y]", &ctx(&["x", "y"], &[]), &vocab()).unwrap();
        assert_eq!(t1.template, t2.template);
        assert_eq!(t2.binding.vars, ["x", "y"]);
    }

    #[test]
    fn empty_tactic_is_an_error() {
        assert_eq!(
            templatize("  ", &ctx(&[], &[]), &vocab()),
            Err(TemplateError::Empty)
        );
    }

    #[test]
    fn binding_reproduces_the_tactic() {
        let c = ctx(&["a", "b"], &["h"]);
        for tactic in ["rw [mul_comm b a]", "rw  [← h]", "linarith [a = b,  h]", "rw [mul_assoc]"] {
            let t = templatize(tactic, &c, &vocab()).unwrap();
            assert_eq!(t.template.fill(&t.binding).as_deref(), Some(tactic));
        }
    }

    #[test]
    fn enumerates_all_assignments_in_order() {
        let t = TacticTemplate::parse("rw [mul_comm {var0} {var1}]").unwrap();
        let c = ctx(&["a", "b"], &[]);
        // oracle: nested loops over the two slots
        let mut expected = Vec::new();
        for x in &c.variables {
            for y in &c.variables {
                expected.push(format!("rw [mul_comm {x} {y}]"));
            }
        }
        assert_eq!(instantiate(&t, &c, 200), expected);
        assert_eq!(expected[..2], ["rw [mul_comm a a]", "rw [mul_comm a b]"]);
    }

    #[test]
    fn zero_arity_and_uninstantiable() {
        let c = ctx(&["a"], &[]);
        let t = TacticTemplate::parse("rw [mul_assoc]").unwrap();
        assert_eq!(instantiate(&t, &c, 200), ["rw [mul_assoc]"]);
        let t = TacticTemplate::parse("rw [{hypothesis}]").unwrap();
        assert!(instantiate(&t, &c, 200).is_empty());
        let t = TacticTemplate::parse("{unknown} [{var0}]").unwrap();
        assert!(instantiate(&t, &c, 200).is_empty());
    }

    #[test]
    fn cap_truncates_to_lexicographic_prefix() {
        let names: Vec<String> = ('a'..='o').map(|c| c.to_string()).collect();
        let c = StateContext {
            variables: names.clone(),
            hypotheses: vec![],
        };
        let t = TacticTemplate::parse("rw [mul_comm {var0} {var1}]").unwrap();
        let got = instantiate(&t, &c, DEFAULT_INSTANTIATION_CAP);
        assert_eq!(got.len(), 200);
        let mut all = Vec::new();
        for x in &names {
            for y in &names {
                all.push(format!("rw [mul_comm {x} {y}]"));
            }
        }
        assert_eq!(all.len(), 225);
        assert_eq!(got, all[..200]);
    }

    #[test]
    fn template_parse_checks_numbering() {
        assert!(TacticTemplate::parse("rw [mul_comm {var1} {var0}]").is_err());
        let t = TacticTemplate::parse("rw [x {var0} {hypothesis} {var1} {var0} {hypothesis}]").unwrap();
        assert_eq!((t.var_arity(), t.hyp_arity(), t.has_unknown()), (2, 2, false));
        // braces that are not placeholders are literal text
        let t = TacticTemplate::parse("exact {x := {var0}}").unwrap();
        assert_eq!(t.var_arity(), 1);
    }

    #[test]
    fn corpus_counts_and_orders() {
        let c1 = ctx(&["a", "b"], &[]);
        let c2 = ctx(&["x", "y"], &[]);
        let pairs = vec![(&c1, "rw [mul_comm a b]"), (&c2, "rw [mul_comm x y]")];
        let corpus = build_template_corpus(pairs, &vocab());
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].frequency, 2);
        assert!(build_template_corpus(Vec::new(), &vocab()).is_empty());

        let pairs = vec![
            (&c1, "rw [mul_assoc]"),
            (&c1, "rw [one_mul]"),
            (&c1, "rw [one_mul]"),
            (&c1, "rw [mul_assoc]"),
            (&c1, "rw [mul_comm a]"),
        ];
        let corpus = build_template_corpus(pairs, &vocab());
        let texts: Vec<(&str, u64)> = corpus.iter().map(|t| (t.text(), t.frequency)).collect();
        assert_eq!(
            texts,
            [("rw [mul_assoc]", 2), ("rw [one_mul]", 2), ("rw [mul_comm {var0}]", 1)]
        );
    }

    #[test]
    fn corpus_file_round_trip_and_skips() {
        let corpus = vec![TacticTemplate::parse("rw [mul_comm {var0} {var1}]").unwrap()];
        let mut buf = Vec::new();
        write_template_corpus(&corpus, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"template\":\"rw [mul_comm {var0} {var1}]\",\"var_arity\":2,\"hyp_arity\":0,\"frequency\":1}\n"
        );
        let with_junk = format!("{text}not json\n{{\"template\":\"rw [{{var0}}]\",\"var_arity\":3,\"hyp_arity\":0,\"frequency\":1}}\n");
        let (read, bad) = read_template_corpus(with_junk.as_bytes()).unwrap();
        assert_eq!(read, corpus);
        assert_eq!(bad, [2, 3]);
    }
}
