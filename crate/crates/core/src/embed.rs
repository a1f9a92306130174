//! Tokenization and 768-d function embeddings.
//!
//! Downstream code only sees [`Embedding`]; where the vector comes from is an
//! [`EmbeddingProvider`]. The built-in [`HashedEmbedder`] is a deterministic
//! bag-of-features model (token unigrams, token bigrams and def-use identifier
//! pairs hashed into 768 signed buckets). A neural encoder can be plugged in
//! through the same trait.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::Xxh64;

use crate::corpus::FunctionRecord;

pub const EMBEDDING_DIM: usize = 768;

pub const HASHED_PROVIDER_ID: &str = "hashed-v1";

const BUCKET_SEED: u64 = 0x5eed_0001_b0c4_e7a1;
const SIGN_SEED: u64 = 0x5eed_0002_51a9_ed00;
const SEP: u8 = 0x1f;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding has {got} dimensions, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("embedding bridge unreachable: {0}")]
    BridgeUnreachable(String),
    #[error("embedding bridge returned a bad response: {0}")]
    BridgeBadResponse(String),
    #[error("embedding bridge timed out")]
    Timeout,
}

/// A semantic vector for one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
    pub provider_id: String,
    pub function_id: String,
}

impl Embedding {
    /// Validates length and finiteness.
    pub fn new(
        values: Vec<f64>,
        provider_id: impl Into<String>,
        function_id: impl Into<String>,
    ) -> Result<Self, EmbedError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbedError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite(i));
        }
        Ok(Self {
            values,
            provider_id: provider_id.into(),
            function_id: function_id.into(),
        })
    }

    pub fn zeros(provider_id: impl Into<String>, function_id: impl Into<String>) -> Self {
        Self {
            values: vec![0.0; EMBEDDING_DIM],
            provider_id: provider_id.into(),
            function_id: function_id.into(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_function_id(mut self, id: impl Into<String>) -> Self {
        self.function_id = id.into();
        self
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let na = libm::sqrt(self.values.iter().map(|v| v * v).sum());
        let nb = libm::sqrt(other.values.iter().map(|v| v * v).sum());
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

/// Source of function embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> String;
    fn embed(&self, record: &FunctionRecord) -> Result<Embedding, EmbedError>;
}

/// Tokens plus approximate data-flow endpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    /// Assignment targets and declared names, as (identifier, token position).
    pub defs: Vec<(String, usize)>,
    /// Every other variable-like identifier occurrence.
    pub uses: Vec<(String, usize)>,
}

impl TokenStream {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Keeps the first `max_tokens` tokens and the def/use entries inside them.
    pub fn truncated(&self, max_tokens: usize) -> TokenStream {
        if self.tokens.len() <= max_tokens {
            return self.clone();
        }
        TokenStream {
            tokens: self.tokens[..max_tokens].to_vec(),
            defs: self.defs.iter().filter(|(_, p)| *p < max_tokens).cloned().collect(),
            uses: self.uses.iter().filter(|(_, p)| *p < max_tokens).cloned().collect(),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "bool", "_Bool", "true", "false", "NULL",
    "nullptr", "class", "public", "private", "protected", "virtual", "template", "typename",
    "namespace", "new", "delete", "this", "operator", "using", "try", "catch", "throw",
];

const TYPE_KEYWORDS: &[&str] = &[
    "char", "double", "float", "int", "long", "short", "signed", "unsigned", "void", "bool",
    "_Bool", "const", "volatile", "static", "register", "extern", "inline", "auto",
];

const MULTI_CHAR_OPS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
];

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "++", "--",
];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Vec<String> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()))
        {
            i += 1;
            while i < chars.len() {
                let d = chars[i];
                let exp_sign = (d == '+' || d == '-')
                    && matches!(chars[i - 1], 'e' | 'E' | 'p' | 'P');
                if d.is_ascii_alphanumeric() || d == '.' || d == '_' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push("<num>".to_string());
        } else if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            tokens.push(if c == '"' { "<str>" } else { "<chr>" }.to_string());
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let op = MULTI_CHAR_OPS.iter().find(|op| rest.starts_with(**op));
            match op {
                Some(op) => {
                    tokens.push(op.to_string());
                    i += op.len();
                }
                None => {
                    tokens.push(c.to_string());
                    i += 1;
                }
            }
        }
    }
    tokens
}

fn is_identifier(tok: &str) -> bool {
    tok.chars().next().is_some_and(is_ident_start) && !KEYWORDS.contains(&tok)
}

/// Splits normalized source into tokens and records def/use identifier positions.
pub fn tokenize(normalized_source: &str) -> TokenStream {
    let tokens = lex(normalized_source);
    let tok = |i: usize| tokens.get(i).map(String::as_str);
    let mut defs = Vec::new();
    let mut uses = Vec::new();

    for (i, t) in tokens.iter().enumerate() {
        if !is_identifier(t) {
            continue;
        }
        let prev = if i > 0 { tok(i - 1) } else { None };
        if matches!(prev, Some("." | "->" | "struct" | "union" | "enum")) {
            continue;
        }
        if is_type_position(&tokens, i) {
            continue;
        }
        if is_declared_name(&tokens, i) || is_assignment_target(&tokens, i) {
            defs.push((t.clone(), i));
        } else {
            uses.push((t.clone(), i));
        }
    }
    TokenStream { tokens, defs, uses }
}

/// `size_t n`, `Image *img,` and similar: the identifier names a type.
fn is_type_position(tokens: &[String], i: usize) -> bool {
    let next = tokens.get(i + 1).map(String::as_str);
    if next.is_some_and(is_identifier) {
        return true;
    }
    if next != Some("*") {
        return false;
    }
    let mut j = i + 1;
    while tokens.get(j).map(String::as_str) == Some("*") {
        j += 1;
    }
    let declared = tokens.get(j).is_some_and(|t| is_identifier(t));
    let after = tokens.get(j + 1).map(String::as_str);
    let prev_ok = i == 0
        || matches!(
            tokens[i - 1].as_str(),
            "(" | "," | ";" | "{" | "}" | "struct" | "union" | "enum"
        )
        || TYPE_KEYWORDS.contains(&tokens[i - 1].as_str());
    declared && prev_ok && matches!(after, Some("," | ")" | "=" | ";" | "["))
}

fn is_type_like(tokens: &[String], i: usize) -> bool {
    let t = tokens[i].as_str();
    if TYPE_KEYWORDS.contains(&t) {
        return true;
    }
    if is_identifier(t) {
        return is_type_position(tokens, i);
    }
    false
}

fn is_declared_name(tokens: &[String], i: usize) -> bool {
    let next = tokens.get(i + 1).map(String::as_str);
    if !matches!(next, Some("=" | ";" | "," | ")" | "[")) || i == 0 {
        return false;
    }
    let mut j = i - 1;
    while tokens[j] == "*" {
        if j == 0 {
            return false;
        }
        j -= 1;
    }
    is_type_like(tokens, j)
}

fn is_assignment_target(tokens: &[String], i: usize) -> bool {
    if i > 0 && matches!(tokens[i - 1].as_str(), "++" | "--") {
        return true;
    }
    let mut j = i + 1;
    loop {
        match tokens.get(j).map(String::as_str) {
            Some("." | "->") if tokens.get(j + 1).is_some_and(|t| is_identifier(t)) => j += 2,
            Some("[") => {
                let mut depth = 0usize;
                while let Some(t) = tokens.get(j) {
                    match t.as_str() {
                        "[" => depth += 1,
                        "]" => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                j += 1;
            }
            Some(op) => return ASSIGN_OPS.contains(&op),
            None => return false,
        }
    }
}

/// Statement-local data-flow pairs: each def paired with the uses that follow it
/// up to the end of its statement.
pub fn def_use_pairs(ts: &TokenStream) -> Vec<(&str, &str)> {
    let mut pairs = Vec::new();
    for (def, pos) in &ts.defs {
        let end = ts.tokens[*pos..]
            .iter()
            .position(|t| matches!(t.as_str(), ";" | "{" | "}"))
            .map(|off| pos + off)
            .unwrap_or(ts.tokens.len());
        for (u, upos) in &ts.uses {
            if *upos > *pos && *upos < end {
                pairs.push((def.as_str(), u.as_str()));
            }
        }
    }
    pairs
}

/// Bucket and sign of one hashed feature.
fn feature_slot(parts: &[&[u8]]) -> (usize, f64) {
    let mut bucket = Xxh64::new(BUCKET_SEED);
    let mut sign = Xxh64::new(SIGN_SEED);
    for (k, p) in parts.iter().enumerate() {
        if k > 0 {
            bucket.update(&[SEP]);
            sign.update(&[SEP]);
        }
        bucket.update(p);
        sign.update(p);
    }
    let index = (bucket.digest() % EMBEDDING_DIM as u64) as usize;
    (index, if sign.digest() & 1 == 0 { 1.0 } else { -1.0 })
}

fn add_feature(acc: &mut [f64], parts: &[&[u8]]) {
    let (i, s) = feature_slot(parts);
    acc[i] += s;
}

/// Orientation feature: the first mirrored token pair that differs, ordered as
/// read. Bag-of-n-gram features cannot separate some streams from their
/// reversal (`a a b a` and `a b a a`); this one always does. The salt is the
/// smallest whose two orderings hash to different slots, so both directions
/// pick the same salt.
fn add_orientation(acc: &mut [f64], tokens: &[String]) {
    let n = tokens.len();
    let Some(i) = (0..n / 2).find(|&i| tokens[i] != tokens[n - 1 - i]) else {
        return;
    };
    let (x, y) = (tokens[i].as_bytes(), tokens[n - 1 - i].as_bytes());
    for salt in 0..=u8::MAX {
        let here = feature_slot(&[b"o", &[salt], x, y]);
        if here != feature_slot(&[b"o", &[salt], y, x]) {
            acc[here.0] += here.1;
            return;
        }
    }
}

/// Hashes unigram, bigram, def-use and orientation features into a signed
/// 768-d vector and L2-normalizes it. An empty stream yields the zero vector.
pub fn embed_hashed(ts: &TokenStream) -> Embedding {
    let mut acc = vec![0.0; EMBEDDING_DIM];
    for t in &ts.tokens {
        add_feature(&mut acc, &[b"u", t.as_bytes()]);
    }
    for w in ts.tokens.windows(2) {
        add_feature(&mut acc, &[b"b", w[0].as_bytes(), w[1].as_bytes()]);
    }
    for (d, u) in def_use_pairs(ts) {
        add_feature(&mut acc, &[b"d", d.as_bytes(), u.as_bytes()]);
    }
    add_orientation(&mut acc, &ts.tokens);
    let norm = libm::sqrt(acc.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        acc.iter_mut().for_each(|v| *v /= norm);
    }
    Embedding {
        values: acc,
        provider_id: HASHED_PROVIDER_ID.to_string(),
        function_id: String::new(),
    }
}

/// Deterministic built-in provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedEmbedder {
    /// Token budget per function; longer functions are truncated for embedding only.
    pub max_tokens: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self { max_tokens: 8192 }
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn provider_id(&self) -> String {
        HASHED_PROVIDER_ID.to_string()
    }

    fn embed(&self, record: &FunctionRecord) -> Result<Embedding, EmbedError> {
        let ts = tokenize(&record.normalized_source).truncated(self.max_tokens);
        Ok(embed_hashed(&ts).with_function_id(record.id.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize;

    fn names(v: &[(String, usize)]) -> Vec<(&str, usize)> {
        v.iter().map(|(s, p)| (s.as_str(), *p)).collect()
    }

    #[test]
    fn tokenize_simple_assignment() {
        let ts = tokenize("x = y + 1;");
        assert_eq!(ts.tokens, ["x", "=", "y", "+", "<num>", ";"]);
        assert_eq!(names(&ts.defs), [("x", 0)]);
        assert_eq!(names(&ts.uses), [("y", 2)]);
    }

    #[test]
    fn tokenize_empty() {
        assert_eq!(tokenize(""), TokenStream::default());
    }

    #[test]
    fn tokenize_member_assignment() {
        let ts = tokenize("p->len = p->len;");
        assert!(names(&ts.defs).contains(&("p", 0)));
        assert!(names(&ts.uses).contains(&("p", 4)));
        assert!(!ts.uses.iter().any(|(s, _)| s == "len"));
    }

    #[test]
    fn tokenize_declarations_and_literals() {
        let ts = tokenize("static int f(struct sock *sk, size_t n) { char *s = \"a\"; int c = 'x'; return n; }");
        let defs = names(&ts.defs);
        assert!(defs.contains(&("sk", 7)));
        assert!(defs.iter().any(|(s, _)| *s == "n"));
        assert!(defs.iter().any(|(s, _)| *s == "s"));
        assert!(ts.tokens.contains(&"<str>".to_string()));
        assert!(ts.tokens.contains(&"<chr>".to_string()));
        assert!(!ts.defs.iter().chain(&ts.uses).any(|(s, _)| s == "size_t" || s == "sock"));
        assert!(names(&ts.uses).iter().any(|(s, _)| *s == "n"));
    }

    #[test]
    fn tokenize_numbers_and_operators() {
        let ts = tokenize("a <<= 0x1fUL; b = 1.5e-3 >= c->d;");
        assert_eq!(
            ts.tokens,
            ["a", "<<=", "<num>", ";", "b", "=", "<num>", ">=", "c", "->", "d", ";"]
        );
    }

    #[test]
    fn positions_strictly_increase_and_point_at_identifiers() {
        let ts = tokenize(&normalize("int f(int *a, int n) { int i; for (i = 0; i < n; i++) a[i] = a[i] + n; return a[0]; }"));
        for list in [&ts.defs, &ts.uses] {
            for w in list.windows(2) {
                assert!(w[0].1 < w[1].1);
            }
            for (s, p) in list.iter() {
                assert_eq!(&ts.tokens[*p], s);
            }
        }
    }

    #[test]
    fn empty_stream_embeds_to_zero() {
        let e = embed_hashed(&TokenStream::default());
        assert_eq!(e.values().len(), EMBEDDING_DIM);
        assert!(e.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn embedding_is_unit_norm_and_deterministic() {
        let ts = tokenize("int f(int x) { return x + 1; }");
        let a = embed_hashed(&ts);
        let b = embed_hashed(&ts);
        assert_eq!(a, b);
        let norm: f64 = a.values().iter().map(|v| v * v).sum();
        assert!((libm::sqrt(norm) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn embedding_rejects_wrong_length_and_nan() {
        assert_eq!(
            Embedding::new(vec![0.0; 512], "x", "y"),
            Err(EmbedError::DimensionMismatch { expected: 768, got: 512 })
        );
        let mut v = vec![0.0; 768];
        v[3] = f64::NAN;
        assert_eq!(Embedding::new(v, "x", "y"), Err(EmbedError::NonFinite(3)));
    }

    #[test]
    fn truncation_drops_tail_defs_and_uses() {
        let ts = tokenize("a = b; c = d;");
        let t = ts.truncated(3);
        assert_eq!(t.tokens.len(), 3);
        assert_eq!(names(&t.defs), [("a", 0)]);
        assert_eq!(names(&t.uses), [("b", 2)]);
    }

    #[test]
    fn def_use_pairs_stay_in_statement() {
        let ts = tokenize("x = y + z; w = x;");
        assert_eq!(def_use_pairs(&ts), [("x", "y"), ("x", "z"), ("w", "x")]);
    }

    #[test]
    fn reversal_with_symmetric_bigram_bag_still_differs() {
        for toks in [["a", "a", "b", "a"].as_slice(), &["d", "a", "a", "a", "d", "d"]] {
            let fwd = TokenStream { tokens: toks.iter().map(|t| t.to_string()).collect(), ..Default::default() };
            let mut rev = fwd.clone();
            rev.tokens.reverse();
            assert_ne!(embed_hashed(&fwd).values(), embed_hashed(&rev).values());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reversal_changes_vector(tokens in proptest::collection::vec("[a-e]", 3..30)) {
                let distinct: alloc::collections::BTreeSet<_> =
                    tokens.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0].clone(), w[1].clone())).collect();
                prop_assume!(distinct.len() >= 2);
                let fwd = TokenStream { tokens: tokens.clone(), ..Default::default() };
                let mut rev_tokens = tokens.clone();
                rev_tokens.reverse();
                prop_assume!(rev_tokens != tokens);
                let rev = TokenStream { tokens: rev_tokens, ..Default::default() };
                let (a, b) = (embed_hashed(&fwd), embed_hashed(&rev));
                prop_assert_ne!(a.values(), b.values());
            }

            #[test]
            fn nonempty_streams_are_unit_norm(src in "[a-z =+;()*]{1,60}") {
                let ts = tokenize(&src);
                prop_assume!(!ts.is_empty());
                let e = embed_hashed(&ts);
                let norm = libm::sqrt(e.values().iter().map(|v| v * v).sum::<f64>());
                prop_assert!((norm - 1.0).abs() < 1e-9);
            }
        }
    }
}
