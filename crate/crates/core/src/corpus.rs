//! Function records, corpora, and the text preprocessing shared by the rule
//! engine and the tokenizer.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus contains no usable functions")]
    EmptyCorpus,
    #[error("duplicate function id `{0}`")]
    DuplicateId(String),
}

/// One patched function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: String,
    pub project: String,
    pub file_path: Option<String>,
    pub raw_source: String,
    pub normalized_source: String,
    pub token_count: usize,
}

impl FunctionRecord {
    /// Builds a record from raw source, deriving the normalized text and token count.
    pub fn new(
        id: impl Into<String>,
        project: impl Into<String>,
        file_path: Option<String>,
        raw_source: impl Into<String>,
    ) -> Self {
        let raw_source = raw_source.into();
        let normalized_source = normalize(&raw_source);
        let token_count = tokenize(&normalized_source).tokens.len();
        Self {
            id: id.into(),
            project: project.into(),
            file_path,
            raw_source,
            normalized_source,
            token_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    CsvDataset,
    SourceTree,
}

/// An ordered, immutable collection of function records with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub source_kind: SourceKind,
    records: Vec<FunctionRecord>,
    /// Rows or candidates dropped during ingestion (empty cells, unparseable rows).
    pub skipped_count: usize,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        source_kind: SourceKind,
        records: Vec<FunctionRecord>,
        skipped_count: usize,
    ) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            source_kind,
            records,
            skipped_count,
        })
    }

    pub fn records(&self) -> &[FunctionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn is_hspace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\x0b' | '\x0c')
}

/// Canonicalizes C source before rule matching and tokenization.
///
/// Comments are removed (a block comment becomes one space, keeping its line
/// breaks), string and char literals are copied verbatim, CR/CRLF become LF,
/// horizontal whitespace runs collapse to a single space, trailing whitespace is
/// stripped and blank lines are dropped.
pub fn normalize(raw: &str) -> String {
    let text = raw.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();

    fn push_space(out: &mut String) {
        if !out.ends_with(' ') {
            out.push(' ');
        }
    }

    while let Some(c) = chars.next() {
        match c {
            '/' if chars.peek() == Some(&'*') => {
                chars.next();
                let mut prev = '\0';
                for inner in chars.by_ref() {
                    if inner == '\n' {
                        out.push('\n');
                    }
                    if prev == '*' && inner == '/' {
                        break;
                    }
                    prev = inner;
                }
                push_space(&mut out);
            }
            '/' if chars.peek() == Some(&'/') => {
                while let Some(&next) = chars.peek() {
                    if next == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '"' | '\'' => {
                out.push(c);
                while let Some(inner) = chars.next() {
                    out.push(inner);
                    if inner == '\\' {
                        if let Some(escaped) = chars.next() {
                            out.push(escaped);
                        }
                    } else if inner == c || inner == '\n' {
                        break;
                    }
                }
            }
            c if is_hspace(c) => push_space(&mut out),
            c => out.push(c),
        }
    }

    let mut result = String::with_capacity(out.len());
    for line in out.split('\n') {
        let line = line.trim_end_matches(is_hspace);
        if line.is_empty() {
            continue;
        }
        if !result.is_empty() {
            result.push('\n');
        }
        result.push_str(line);
    }
    result
}

/// Returns a copy of `text` with comment bodies and string/char literal contents
/// replaced by spaces. Byte offsets and line breaks are preserved, so spans found
/// in the blanked text index the original directly.
pub fn blank_non_code(text: &str) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Code,
        Line,
        Block,
        Literal(char),
    }

    fn blank(out: &mut String, c: char) {
        if c == '\n' {
            out.push('\n');
        } else {
            for _ in 0..c.len_utf8() {
                out.push(' ');
            }
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut state = State::Code;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match state {
            State::Code => match c {
                '/' if chars.peek() == Some(&'*') => {
                    chars.next();
                    out.push_str("  ");
                    state = State::Block;
                }
                '/' if chars.peek() == Some(&'/') => {
                    chars.next();
                    out.push_str("  ");
                    state = State::Line;
                }
                '"' | '\'' => {
                    out.push(c);
                    state = State::Literal(c);
                }
                _ => out.push(c),
            },
            State::Line => {
                if c == '\n' {
                    out.push('\n');
                    state = State::Code;
                } else {
                    blank(&mut out, c);
                }
            }
            State::Block => {
                if c == '*' && chars.peek() == Some(&'/') {
                    chars.next();
                    out.push_str("  ");
                    state = State::Code;
                } else {
                    blank(&mut out, c);
                }
            }
            State::Literal(quote) => {
                if c == '\\' {
                    blank(&mut out, c);
                    if let Some(escaped) = chars.next() {
                        blank(&mut out, escaped);
                    }
                } else if c == quote {
                    out.push(c);
                    state = State::Code;
                } else if c == '\n' {
                    out.push('\n');
                    state = State::Code;
                } else {
                    blank(&mut out, c);
                }
            }
        }
    }
    out
}

/// A top-level function definition found in a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedFunction {
    /// 1-based line of the first character of the function header.
    pub start_line: usize,
    pub byte_offset: usize,
    pub text: String,
}

const NOT_FUNCTION_NAMES: &[&str] = &[
    "if", "while", "for", "switch", "return", "sizeof", "do", "else", "case",
];

/// Extracts top-level function definitions with a brace-balancing scan.
///
/// A `{` at file scope opens a function when the text since the previous
/// top-level boundary looks like `<return-type> name(args)`. Braces inside
/// comments and string/char literals are ignored. Bodies of `extern "C"` and
/// `namespace` blocks are scanned as file scope.
pub fn extract_functions(text: &str) -> Vec<ExtractedFunction> {
    let masked = blank_non_code(text);
    let bytes = masked.as_bytes();
    let mut found = Vec::new();

    let mut depth = 0usize;
    let mut transparent = 0usize;
    let mut header_start: Option<usize> = None;
    let mut function_start: Option<usize> = None;
    let mut line_has_code = false;
    let mut i = 0;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line_has_code = false;
            i += 1;
            continue;
        }
        if depth == 0 && !line_has_code && c == b'#' {
            // Preprocessor directive, possibly continued with backslashes.
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    i += 1;
                }
                i += 1;
            }
            header_start = None;
            continue;
        }
        if !c.is_ascii_whitespace() {
            line_has_code = true;
        }

        if depth == 0 {
            match c {
                b'{' => {
                    let header = header_start.map(|h| &masked[h..i]).unwrap_or("");
                    if is_transparent_block(header) {
                        transparent += 1;
                    } else {
                        function_start = header_start.filter(|_| is_function_header(header));
                        depth = 1;
                    }
                    header_start = None;
                }
                b'}' => {
                    transparent = transparent.saturating_sub(1);
                    header_start = None;
                }
                b';' => header_start = None,
                c if c.is_ascii_whitespace() => {}
                _ => {
                    if header_start.is_none() {
                        header_start = Some(i);
                    }
                }
            }
        } else {
            match c {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Some(start) = function_start.take() {
                            found.push(ExtractedFunction {
                                start_line: 1 + bytes[..start].iter().filter(|&&b| b == b'\n').count(),
                                byte_offset: start,
                                text: text[start..=i].to_string(),
                            });
                        }
                        header_start = None;
                    }
                }
                _ => {}
            }
        }
        i += 1;
    }
    found
}

fn is_transparent_block(header: &str) -> bool {
    let h = header.trim();
    if let Some(rest) = h.strip_prefix("extern") {
        let rest = rest.trim();
        return rest.starts_with('"') && rest.ends_with('"');
    }
    h.starts_with("namespace") && !h.contains('(')
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_function_header(header: &str) -> bool {
    let h = header.trim();
    if h.is_empty() || h.contains('=') || h.contains(';') || h.starts_with("typedef") {
        return false;
    }
    let bytes = h.as_bytes();
    let open = match bytes.iter().position(|&b| b == b'(') {
        Some(p) => p,
        None => return false,
    };

    // The parameter list must balance and be followed only by qualifiers.
    let mut nesting = 0i32;
    let mut close = None;
    for (k, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'(' => nesting += 1,
            b')' => {
                nesting -= 1;
                if nesting == 0 {
                    close = Some(k);
                    break;
                }
            }
            _ => {}
        }
    }
    let close = match close {
        Some(c) => c,
        None => return false,
    };
    let trailer = &h[close + 1..];
    if !trailer
        .bytes()
        .all(|b| is_ident_byte(b) || b.is_ascii_whitespace() || b == b'(' || b == b')')
    {
        return false;
    }

    let before = h[..open].trim_end();
    let name_start = before
        .bytes()
        .rposition(|b| !(is_ident_byte(b) || b == b':' || b == b'~'))
        .map(|p| p + 1)
        .unwrap_or(0);
    let name = &before[name_start..];
    let return_type = before[..name_start].trim();
    !name.is_empty()
        && !name.as_bytes()[0].is_ascii_digit()
        && !NOT_FUNCTION_NAMES.contains(&name)
        && !return_type.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_removes_block_comment() {
        assert_eq!(normalize("int f(){ /* c */ return 0; }"), "int f(){ return 0; }");
    }

    #[test]
    fn normalize_preserves_literals() {
        let s = "char *s = \"/* not a comment */\";";
        assert_eq!(normalize(s), s);
        let c = "char c = '/'; char d = '\"'; // tail";
        assert_eq!(normalize(c), "char c = '/'; char d = '\"';");
    }

    #[test]
    fn normalize_newline_policy() {
        assert_eq!(normalize("a;\r\n\r\nb;"), "a;\nb;");
        assert_eq!(normalize("a;\rb;"), "a;\nb;");
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("\tint   x =\t1;   \n\n  y;"), " int x = 1;\n y;");
    }

    #[test]
    fn normalize_multiline_block_comment_keeps_lines() {
        assert_eq!(normalize("a; /* x\n y */ b;"), "a;\n b;");
    }

    #[test]
    fn blank_keeps_offsets() {
        let src = "x = \"{\"; /* } */ y = '}'; // {";
        let masked = blank_non_code(src);
        assert_eq!(masked.len(), src.len());
        assert!(!masked.contains('{') && !masked.contains('}'));
        assert!(masked.starts_with("x = \""));
    }

    #[test]
    fn extracts_two_functions_in_order() {
        let src = "#include <stdio.h>\n\nint a(void)\n{\n  return 1;\n}\n\nstatic char *b(int x) {\n  if (x) { return 0; }\n  return 0;\n}\n";
        let fns = extract_functions(src);
        assert_eq!(fns.len(), 2);
        assert_eq!(fns[0].start_line, 3);
        assert_eq!(fns[1].start_line, 8);
        assert!(fns[1].text.starts_with("static char *b(int x)"));
        assert!(fns[1].text.ends_with('}'));
    }

    #[test]
    fn literal_braces_do_not_split_functions() {
        let src = "void f(void) {\n  char *s = \"{\";\n  char c = '}';\n  /* { */\n}\n";
        let fns = extract_functions(src);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].text, src.trim_end());
    }

    #[test]
    fn skips_non_function_blocks() {
        let src = "struct s { int a; };\nint t[] = { 1, 2 };\nenum e { A, B };\nint g(void) { return 0; }\n";
        let fns = extract_functions(src);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].start_line, 4);
    }

    #[test]
    fn scans_inside_extern_c() {
        let src = "extern \"C\" {\nint g(void) { return 0; }\n}\n";
        let fns = extract_functions(src);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].start_line, 2);
    }

    #[test]
    fn corpus_rejects_empty_and_duplicates() {
        assert_eq!(
            Corpus::new("x", SourceKind::CsvDataset, Vec::new(), 0),
            Err(CorpusError::EmptyCorpus)
        );
        let r = FunctionRecord::new("a", "p", None, "int f(void){ return 0; }");
        let err = Corpus::new("x", SourceKind::CsvDataset, alloc::vec![r.clone(), r], 0);
        assert_eq!(err, Err(CorpusError::DuplicateId("a".into())));
    }

    #[test]
    fn record_token_count_matches_tokenizer() {
        let r = FunctionRecord::new("a", "p", None, "int f(void){ /* c */ return 0; }");
        assert_eq!(r.token_count, tokenize(&r.normalized_source).tokens.len());
        assert!(!r.normalized_source.contains("/*"));
    }

    mod props {
        use super::*;
        use alloc::vec;
        use proptest::prelude::*;

        fn c_like() -> impl Strategy<Value = String> {
            proptest::collection::vec(
                prop_oneof![
                    Just("/*"), Just("*/"), Just("//"), Just("\""), Just("'"), Just("\\"),
                    Just("\n"), Just("\r\n"), Just("\r"), Just(" "), Just("\t"), Just("{"),
                    Just("}"), Just("x"), Just("int"), Just(";"), Just("/"), Just("*"),
                ],
                0..40,
            )
            .prop_map(|parts| parts.concat())
        }

        proptest! {
            #[test]
            fn normalize_is_idempotent(src in c_like()) {
                let once = normalize(&src);
                prop_assert_eq!(normalize(&once), once.clone());
                prop_assert!(!once.contains('\r'));
            }

            #[test]
            fn blank_preserves_length(src in c_like()) {
                let masked = blank_non_code(&src);
                prop_assert_eq!(masked.len(), src.len());
                prop_assert_eq!(
                    masked.matches('\n').count(),
                    src.matches('\n').count()
                );
            }
        }
    }
}
