//! Text embedding and exact nearest-template retrieval.
//!
//! The default embedder is a signed feature hash: each token adds ±1 to one
//! of `dim` buckets, and the sum is L2-normalized. Trained embeddings can be
//! supplied as an external table instead.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::template::TacticTemplate;

pub const DEFAULT_DIM: usize = 256;
pub const DEFAULT_K: usize = 100;
const MAGIC: &[u8; 7] = b"NAVIDX1";

const BUCKET_SEED: u64 = 0x243f_6a88_85a3_08d3;
const SIGN_SEED: u64 = 0x1319_8a2e_0370_7344;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no external vector for template {0:?}")]
    MissingVector(String),
    #[error("duplicate template {0:?}")]
    DuplicateTemplate(String),
    #[error("malformed embedding data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn hash(seed: u64, bytes: &[u8]) -> u64 {
    // FNV-1a over the token, then a splitmix64 finalizer for avalanche.
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Word runs (alphanumeric or `_`) are tokens; every other non-space
/// character stands alone.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    let mut rest = text;
    std::iter::from_fn(move || {
        rest = rest.trim_start();
        let c = rest.chars().next()?;
        let len = if c.is_alphanumeric() || c == '_' {
            rest.find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len())
        } else {
            c.len_utf8()
        };
        let (tok, tail) = rest.split_at(len);
        rest = tail;
        Some(tok)
    })
}

pub fn embed(text: &str) -> Vec<f32> {
    embed_with_dim(text, DEFAULT_DIM)
}

pub fn embed_with_dim(text: &str, dim: usize) -> Vec<f32> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut acc = vec![0f64; dim];
    for tok in tokens(text) {
        let bucket = (hash(BUCKET_SEED, tok.as_bytes()) % dim as u64) as usize;
        let sign = if hash(SIGN_SEED, tok.as_bytes()) & 1 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    acc.iter().map(|x| (x / norm) as f32).collect()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub template: TacticTemplate,
    pub vector: Vec<f32>,
    norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Hit<'a> {
    pub position: usize,
    pub template: &'a TacticTemplate,
    pub similarity: f64,
}

/// Immutable after construction; entries keep insertion order.
#[derive(Debug, Clone)]
pub struct TemplateIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

impl TemplateIndex {
    fn from_entries(
        dim: usize,
        items: impl IntoIterator<Item = (TacticTemplate, Vec<f32>)>,
    ) -> Result<Self, EmbedError> {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (template, vector) in items {
            if vector.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: vector.len(),
                });
            }
            if !seen.insert(template.text().to_string()) {
                return Err(EmbedError::DuplicateTemplate(template.text().to_string()));
            }
            let norm = norm(&vector);
            entries.push(IndexEntry {
                template,
                vector,
                norm,
            });
        }
        Ok(TemplateIndex { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Exact top-`k` by cosine, descending; ties keep insertion order.
    pub fn query_vector(&self, q: &[f32], k: usize) -> Vec<Hit<'_>> {
        let qn = norm(q);
        let mut scored: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let d = qn * e.norm;
                let s = if d == 0.0 { 0.0 } else { dot(q, &e.vector) / d };
                (s, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        let k = k.min(scored.len());
        if k == 0 {
            return Vec::new();
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        scored
            .into_iter()
            .map(|(similarity, position)| Hit {
                position,
                template: &self.entries[position].template,
                similarity,
            })
            .collect()
    }

    pub fn query(&self, state_text: &str, k: usize) -> Vec<Hit<'_>> {
        if self.entries.is_empty() {
            return Vec::new();
        }
        self.query_vector(&embed_with_dim(state_text, self.dim), k)
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<(), EmbedError> {
        let u32_of = |n: usize, what: &str| {
            u32::try_from(n).map_err(|_| EmbedError::Format(format!("{what} exceeds u32")))
        };
        out.write_all(MAGIC)?;
        out.write_all(&u32_of(self.dim, "dim")?.to_le_bytes())?;
        out.write_all(&u32_of(self.entries.len(), "count")?.to_le_bytes())?;
        for e in &self.entries {
            let text = e.template.text().as_bytes();
            out.write_all(&u32_of(text.len(), "template length")?.to_le_bytes())?;
            out.write_all(text)?;
            for x in &e.vector {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut input: impl Read) -> Result<Self, EmbedError> {
        let mut magic = [0u8; 7];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EmbedError::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |input: &mut dyn Read| -> Result<usize, EmbedError> {
            input.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let dim = read_u32(&mut input)?;
        let count = read_u32(&mut input)?;
        if dim == 0 {
            return Err(EmbedError::Format("zero dimension".into()));
        }
        let mut items = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = read_u32(&mut input)?;
            let mut text = vec![0u8; len];
            input.read_exact(&mut text)?;
            let text = String::from_utf8(text)
                .map_err(|_| EmbedError::Format("template is not UTF-8".into()))?;
            let template =
                TacticTemplate::parse(&text).map_err(|e| EmbedError::Format(e.to_string()))?;
            let mut raw = vec![0u8; dim * 4];
            input.read_exact(&mut raw)?;
            let vector = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect();
            items.push((template, vector));
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(EmbedError::Format("trailing bytes after index".into()));
        }
        TemplateIndex::from_entries(dim, items)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    text: String,
    vector: Vec<f32>,
}

/// External vectors keyed by text, all of one dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn read(input: impl BufRead) -> Result<Self, EmbedError> {
        let mut table = EmbeddingTable::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TableRecord = serde_json::from_str(&line)
                .map_err(|e| EmbedError::Format(format!("line {}: {e}", i + 1)))?;
            table.insert(rec.text, rec.vector)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, text: String, vector: Vec<f32>) -> Result<(), EmbedError> {
        if self.vectors.is_empty() {
            if vector.is_empty() {
                return Err(EmbedError::Format("empty vector".into()));
            }
            self.dim = vector.len();
        } else if vector.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(text, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Build an index over `templates`, embedding each text unless an external
/// table is given, in which case it must cover every template.
pub fn build_index(
    templates: &[TacticTemplate],
    external: Option<&EmbeddingTable>,
) -> Result<TemplateIndex, EmbedError> {
    match external {
        None => TemplateIndex::from_entries(
            DEFAULT_DIM,
            templates
                .iter()
                .map(|t| (t.clone(), embed_with_dim(t.text(), DEFAULT_DIM))),
        ),
        Some(table) => {
            let mut items = Vec::with_capacity(templates.len());
            for t in templates {
                let v = table
                    .vectors
                    .get(t.text())
                    .ok_or_else(|| EmbedError::MissingVector(t.text().to_string()))?;
                items.push((t.clone(), v.clone()));
            }
            TemplateIndex::from_entries(table.dim.max(1), items)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn templates(texts: &[&str]) -> Vec<TacticTemplate> {
        texts.iter().map(|t| TacticTemplate::parse(t).unwrap()).collect()
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        let toks: Vec<&str> = tokens("rw [mul_comm {var0}]⁻¹").collect();
        assert_eq!(toks, ["rw", "[", "mul_comm", "{", "var0", "}", "]", "⁻", "¹"]);
    }

    #[test]
    fn unit_norm_and_zero_for_empty() {
        let v = embed("a * b * c = b * (a * c)");
        assert_eq!(v.len(), DEFAULT_DIM);
        assert!((norm(&v) - 1.0).abs() < 1e-6);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-6);
        assert!(embed("   ").iter().all(|x| *x == 0.0));
        assert_eq!(embed("x y"), embed("x y"));
    }

    #[test]
    fn small_index_clamps_k() {
        let idx = build_index(&templates(&["rw [mul_assoc]", "rw [one_mul]", "rw [mul_one]"]), None)
            .unwrap();
        assert_eq!((idx.len(), idx.dim()), (3, 256));
        assert_eq!(idx.query("⊢ a * 1 = a", 100).len(), 3);
        let empty = build_index(&[], None).unwrap();
        assert!(empty.query("anything", 5).is_empty());
    }

    #[test]
    fn self_retrieval() {
        let texts = ["rw [mul_assoc]", "rw [mul_comm {var0} {var1}]", "rw [← one_mul]"];
        let idx = build_index(&templates(&texts), None).unwrap();
        for (i, t) in texts.iter().enumerate() {
            let hits = idx.query(t, 1);
            assert_eq!(hits[0].position, i);
            assert!((hits[0].similarity - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ties_keep_insertion_order() {
        let mut table = EmbeddingTable::default();
        let texts = ["rw [a]", "rw [b]", "rw [c]"];
        for t in texts {
            table.insert(t.to_string(), vec![1.0, 0.0]).unwrap();
        }
        let idx = build_index(&templates(&texts), Some(&table)).unwrap();
        let order: Vec<usize> = idx.query_vector(&[1.0, 0.0], 3).iter().map(|h| h.position).collect();
        assert_eq!(order, [0, 1, 2]);
        assert_eq!(idx.query_vector(&[1.0, 0.0], 2).len(), 2);
    }

    #[test]
    fn external_table_errors() {
        let ts = templates(&["rw [a]", "rw [b]"]);
        let mut table = EmbeddingTable::default();
        table.insert("rw [a]".into(), vec![0.5; 512]).unwrap();
        assert!(matches!(build_index(&ts, Some(&table)), Err(EmbedError::MissingVector(_))));
        table.insert("rw [b]".into(), vec![0.1; 512]).unwrap();
        assert_eq!(build_index(&ts, Some(&table)).unwrap().dim(), 512);
        assert!(matches!(
            table.insert("rw [c]".into(), vec![0.0; 3]),
            Err(EmbedError::DimensionMismatch { expected: 512, found: 3 })
        ));
        let dup = templates(&["rw [a]", "rw [a]"]);
        assert!(matches!(build_index(&dup, None), Err(EmbedError::DuplicateTemplate(_))));
        let parsed = EmbeddingTable::read("{\"text\":\"rw [a]\",\"vector\":[1,2]}\n".as_bytes()).unwrap();
        assert_eq!(parsed.dim(), 2);
    }

    #[test]
    fn binary_round_trip() {
        let idx = build_index(&templates(&["rw [mul_assoc]", "rw [mul_comm {var0} {var1}]"]), None)
            .unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..7], b"NAVIDX1");
        assert_eq!(u32::from_le_bytes(buf[7..11].try_into().unwrap()), 256);
        assert_eq!(u32::from_le_bytes(buf[11..15].try_into().unwrap()), 2);
        let back = TemplateIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in idx.entries().iter().zip(back.entries()) {
            assert_eq!(a.template.text(), b.template.text());
            assert_eq!(a.vector, b.vector);
        }
        buf.truncate(buf.len() - 1);
        assert!(TemplateIndex::read_from(buf.as_slice()).is_err());
    }
}
