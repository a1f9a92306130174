//! Symbolic vulnerability rules and the 5-bit heuristic vector.
//!
//! A rule is an ordered list of regex clauses. Leading clauses marked `binds`
//! produce candidate bindings (a matched span, optionally capturing an identifier
//! in a group named `id`). Every other clause is evaluated per binding with a
//! combinator:
//!
//! * `all`: every pattern must match inside the clause scope,
//! * `any`: at least one pattern must match,
//! * `absent`: no pattern may match.
//!
//! A pattern may mention `{id}` once; it then only matches where that position
//! holds the bound identifier. Scopes are evaluated over the function text with
//! comments removed and literal contents blanked, so spans always index the
//! normalized source. The rule fires when some binding satisfies every clause.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use regex_automata::meta::Regex;
use regex_automata::util::captures::Captures;
use regex_automata::Input;
use serde::{Deserialize, Serialize};

use crate::corpus::blank_non_code;

/// Number of built-in rules, and the heuristic width of the fused vector.
pub const DEFAULT_RULE_COUNT: usize = 5;

const ID_PLACEHOLDER: &str = "{id}";
const ID_CAPTURE: &str = "(?P<ref>[A-Za-z_][A-Za-z0-9_]*)";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule index {0} is used more than once")]
    DuplicateIndex(usize),
    #[error("rule `{rule}` clause `{clause}`: invalid pattern: {message}")]
    InvalidPattern {
        rule: String,
        clause: String,
        message: String,
    },
    #[error("rule `{rule}`: {message}")]
    InvalidSpec { rule: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combinator {
    All,
    Any,
    Absent,
}

/// Where a clause looks, relative to the function and the current binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scope {
    Whole,
    /// Text before the first `{`.
    Signature,
    /// Text from the first `{` on.
    Body,
    /// Inside the bound span.
    Binding,
    AfterBinding,
    BeforeBinding,
    /// From the end of the binding to the first match of the named clause.
    BeforeFirst(String),
    /// From the start of the binding to the end of the line holding the first
    /// match of the named clause.
    UpToLineOf(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Whole => f.write_str("whole"),
            Scope::Signature => f.write_str("signature"),
            Scope::Body => f.write_str("body"),
            Scope::Binding => f.write_str("binding"),
            Scope::AfterBinding => f.write_str("after_binding"),
            Scope::BeforeBinding => f.write_str("before_binding"),
            Scope::BeforeFirst(c) => write!(f, "before_first:{c}"),
            Scope::UpToLineOf(c) => write!(f, "up_to_line_of:{c}"),
        }
    }
}

impl TryFrom<String> for Scope {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Ok(match s.as_str() {
            "whole" => Scope::Whole,
            "signature" => Scope::Signature,
            "body" => Scope::Body,
            "binding" => Scope::Binding,
            "after_binding" => Scope::AfterBinding,
            "before_binding" => Scope::BeforeBinding,
            other => {
                if let Some(c) = other.strip_prefix("before_first:") {
                    Scope::BeforeFirst(c.to_string())
                } else if let Some(c) = other.strip_prefix("up_to_line_of:") {
                    Scope::UpToLineOf(c.to_string())
                } else {
                    return Err(format!("unknown scope `{other}`"));
                }
            }
        })
    }
}

impl From<Scope> for String {
    fn from(s: Scope) -> String {
        s.to_string()
    }
}

fn whole() -> Scope {
    Scope::Whole
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub combinator: Combinator,
    #[serde(default)]
    pub binds: bool,
    #[serde(default = "whole")]
    pub scope: Scope,
    pub patterns: Vec<String>,
}

impl Clause {
    fn new(name: &str, combinator: Combinator, scope: Scope, patterns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            combinator,
            binds: false,
            scope,
            patterns: patterns.iter().map(|p| p.to_string()).collect(),
        }
    }

    fn binding(name: &str, scope: Scope, patterns: &[&str]) -> Self {
        Self {
            binds: true,
            ..Self::new(name, Combinator::Any, scope, patterns)
        }
    }
}

/// Declarative matcher: ordered clauses plus the clause reported as the match site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub clauses: Vec<Clause>,
    /// Clause whose span is reported by [`explain`]; the binding when unset.
    #[serde(default)]
    pub site: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicRule {
    pub index: usize,
    pub name: String,
    pub cwe_tags: Vec<String>,
    pub pattern_spec: PatternSpec,
}

/// One matched span, with 1-based inclusive line numbers into the normalized source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchEvidence {
    pub rule_index: usize,
    pub clause: String,
    pub line_start: usize,
    pub line_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub text: String,
}

/// Presence bits, one per rule in [`RuleSet`] order, with evidence for set bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicVector {
    pub bits: Vec<u8>,
    pub evidence: Vec<MatchEvidence>,
}

impl HeuristicVector {
    /// A vector without evidence, e.g. restored from a report.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        Self {
            bits,
            evidence: Vec::new(),
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_bits(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Position (0-based) of the lowest set bit.
    pub fn lowest_set(&self) -> Option<usize> {
        self.bits.iter().position(|&b| b != 0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }
}

#[derive(Debug, Clone)]
struct CompiledPattern {
    regex: Regex,
    has_ref: bool,
}

#[derive(Debug, Clone, Copy)]
enum ResolvedScope {
    Whole,
    Signature,
    Body,
    Binding,
    AfterBinding,
    BeforeBinding,
    BeforeFirst(usize),
    UpToLineOf(usize),
}

#[derive(Debug, Clone)]
struct CompiledClause {
    combinator: Combinator,
    binds: bool,
    scope: ResolvedScope,
    patterns: Vec<CompiledPattern>,
}

#[derive(Debug, Clone)]
struct CompiledRule {
    clauses: Vec<CompiledClause>,
    site: Option<usize>,
}

type Span = (usize, usize);

#[derive(Debug, Clone)]
struct Binding {
    clause: Option<usize>,
    span: Option<Span>,
    ident: Option<String>,
}

#[derive(Debug, Clone)]
struct Firing {
    binding: Binding,
    spans: Vec<Option<Span>>,
}

/// An ordered, compiled collection of rules. Order defines the vector layout.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<HeuristicRule>,
    compiled: Vec<CompiledRule>,
}

impl PartialEq for RuleSet {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
    }
}

impl RuleSet {
    pub fn new(rules: Vec<HeuristicRule>) -> Result<Self, RuleError> {
        let mut seen = Vec::with_capacity(rules.len());
        for r in &rules {
            if r.index == 0 {
                return Err(RuleError::InvalidSpec {
                    rule: r.name.clone(),
                    message: "rule indices start at 1".into(),
                });
            }
            if seen.contains(&r.index) {
                return Err(RuleError::DuplicateIndex(r.index));
            }
            seen.push(r.index);
        }
        let compiled = rules.iter().map(compile_rule).collect::<Result<_, _>>()?;
        Ok(Self { rules, compiled })
    }

    /// The five built-in rules H1..H5.
    pub fn default_rules() -> Self {
        Self::new(builtin_rules()).expect("built-in rules compile")
    }

    /// Appends user rules after the existing ones.
    pub fn with_additional(&self, extra: Vec<HeuristicRule>) -> Result<Self, RuleError> {
        let mut rules = self.rules.clone();
        rules.extend(extra);
        Self::new(rules)
    }

    pub fn rules(&self) -> &[HeuristicRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.rules.iter().map(|r| r.name.clone()).collect()
    }

    fn firings(&self, normalized: &str, masked: &str) -> Vec<Vec<Firing>> {
        let sig_end = masked.find('{').unwrap_or(masked.len());
        let _ = normalized;
        self.compiled
            .iter()
            .map(|rule| evaluate(rule, masked, sig_end))
            .collect()
    }
}

/// Built-in rule set, in H1..H5 order.
pub fn default_rules() -> RuleSet {
    RuleSet::default_rules()
}

/// Applies every rule to a normalized function.
pub fn match_rules(func: &str, rules: &RuleSet) -> HeuristicVector {
    let masked = blank_non_code(func);
    let firings = rules.firings(func, &masked);
    let mut bits = Vec::with_capacity(rules.len());
    let mut evidence = Vec::new();
    for ((rule, compiled), fired) in rules.rules.iter().zip(&rules.compiled).zip(&firings) {
        bits.push(u8::from(!fired.is_empty()));
        if let Some(first) = fired.first() {
            if let (Some(ci), Some(span)) = (first.binding.clause, first.binding.span) {
                evidence.push(make_evidence(func, rule, ci, span));
            }
            for (ci, span) in first.spans.iter().enumerate() {
                if let Some(span) = span {
                    if !compiled.clauses[ci].binds {
                        evidence.push(make_evidence(func, rule, ci, *span));
                    }
                }
            }
        }
    }
    HeuristicVector { bits, evidence }
}

/// Reports the match site of every satisfying binding of every rule.
/// Empty exactly when [`match_rules`] yields an all-zero vector.
pub fn explain(func: &str, rules: &RuleSet) -> Vec<MatchEvidence> {
    let masked = blank_non_code(func);
    let firings = rules.firings(func, &masked);
    let mut out = Vec::new();
    for ((rule, compiled), fired) in rules.rules.iter().zip(&rules.compiled).zip(&firings) {
        for f in fired {
            let site = compiled
                .site
                .and_then(|ci| f.spans[ci].map(|s| (ci, s)))
                .or_else(|| f.binding.clause.zip(f.binding.span))
                .or_else(|| {
                    f.spans
                        .iter()
                        .enumerate()
                        .find_map(|(ci, s)| s.map(|s| (ci, s)))
                });
            match site {
                Some((ci, span)) => out.push(make_evidence(func, rule, ci, span)),
                // A rule made only of `absent` clauses fires without a span.
                None => out.push(MatchEvidence {
                    rule_index: rule.index,
                    clause: String::new(),
                    line_start: 1,
                    line_end: func.lines().count().max(1),
                    byte_start: 0,
                    byte_end: func.len(),
                    text: String::new(),
                }),
            }
        }
    }
    out
}

fn make_evidence(func: &str, rule: &HeuristicRule, clause: usize, (start, end): Span) -> MatchEvidence {
    let line_start = 1 + func[..start].matches('\n').count();
    let line_end = line_start + func[start..end].trim_end_matches('\n').matches('\n').count();
    MatchEvidence {
        rule_index: rule.index,
        clause: rule.pattern_spec.clauses[clause].name.clone(),
        line_start,
        line_end,
        byte_start: start,
        byte_end: end,
        text: func[start..end].to_owned(),
    }
}

fn compile_rule(rule: &HeuristicRule) -> Result<CompiledRule, RuleError> {
    let spec_err = |message: String| RuleError::InvalidSpec {
        rule: rule.name.clone(),
        message,
    };
    let clauses = &rule.pattern_spec.clauses;
    if clauses.is_empty() {
        return Err(spec_err("rule has no clauses".into()));
    }
    let bind_count = clauses.iter().take_while(|c| c.binds).count();
    if clauses.iter().skip(bind_count).any(|c| c.binds) {
        return Err(spec_err("binding clauses must come first".into()));
    }

    let mut compiled: Vec<CompiledClause> = Vec::with_capacity(clauses.len());
    let mut binds_identifier = bind_count > 0;
    for (ci, clause) in clauses.iter().enumerate() {
        if clause.patterns.is_empty() {
            return Err(spec_err(format!("clause `{}` has no patterns", clause.name)));
        }
        if clauses[..ci].iter().any(|c| c.name == clause.name) {
            return Err(spec_err(format!("clause name `{}` repeats", clause.name)));
        }
        let earlier = |target: &str| -> Result<usize, RuleError> {
            clauses[..ci]
                .iter()
                .position(|c| c.name == target && !c.binds && c.combinator != Combinator::Absent)
                .ok_or_else(|| {
                    spec_err(format!(
                        "clause `{}` refers to `{target}`, which is not an earlier matching clause",
                        clause.name
                    ))
                })
        };
        let scope = match &clause.scope {
            Scope::Whole => ResolvedScope::Whole,
            Scope::Signature => ResolvedScope::Signature,
            Scope::Body => ResolvedScope::Body,
            Scope::Binding => ResolvedScope::Binding,
            Scope::AfterBinding => ResolvedScope::AfterBinding,
            Scope::BeforeBinding => ResolvedScope::BeforeBinding,
            Scope::BeforeFirst(t) => ResolvedScope::BeforeFirst(earlier(t)?),
            Scope::UpToLineOf(t) => ResolvedScope::UpToLineOf(earlier(t)?),
        };
        if clause.binds {
            if clause.combinator != Combinator::Any {
                return Err(spec_err(format!("binding clause `{}` must use `any`", clause.name)));
            }
            if !matches!(scope, ResolvedScope::Whole | ResolvedScope::Signature | ResolvedScope::Body) {
                return Err(spec_err(format!(
                    "binding clause `{}` must use whole, signature or body scope",
                    clause.name
                )));
            }
        } else if bind_count == 0
            && matches!(
                scope,
                ResolvedScope::Binding | ResolvedScope::AfterBinding | ResolvedScope::BeforeBinding
            )
        {
            return Err(spec_err(format!(
                "clause `{}` uses a binding scope but the rule binds nothing",
                clause.name
            )));
        }

        let mut patterns = Vec::with_capacity(clause.patterns.len());
        for p in &clause.patterns {
            let refs = p.matches(ID_PLACEHOLDER).count();
            if refs > 1 {
                return Err(spec_err(format!(
                    "clause `{}`: a pattern may reference {{id}} at most once",
                    clause.name
                )));
            }
            if clause.binds && refs > 0 {
                return Err(spec_err(format!(
                    "binding clause `{}` cannot reference {{id}}",
                    clause.name
                )));
            }
            let source = format!("(?m){}", p.replacen(ID_PLACEHOLDER, ID_CAPTURE, 1));
            let regex = Regex::new(&source).map_err(|e| RuleError::InvalidPattern {
                rule: rule.name.clone(),
                clause: clause.name.clone(),
                message: e.to_string(),
            })?;
            if clause.binds && regex.group_info().to_index(regex_automata::PatternID::ZERO, "id").is_none() {
                binds_identifier = false;
            }
            patterns.push(CompiledPattern {
                regex,
                has_ref: refs == 1,
            });
        }
        if !clause.binds && patterns.iter().any(|p| p.has_ref) && !binds_identifier {
            return Err(spec_err(format!(
                "clause `{}` references {{id}} but not every binding pattern captures `id`",
                clause.name
            )));
        }
        compiled.push(CompiledClause {
            combinator: clause.combinator,
            binds: clause.binds,
            scope,
            patterns,
        });
    }

    let site = match &rule.pattern_spec.site {
        None => None,
        Some(name) => Some(
            clauses
                .iter()
                .position(|c| &c.name == name && !c.binds && c.combinator != Combinator::Absent)
                .ok_or_else(|| spec_err(format!("site `{name}` is not a matching clause")))?,
        ),
    };
    Ok(CompiledRule {
        clauses: compiled,
        site,
    })
}

fn scope_region(
    scope: ResolvedScope,
    len: usize,
    sig_end: usize,
    binding: &Binding,
    spans: &[Option<Span>],
    text: &str,
) -> Option<Span> {
    let (b_start, b_end) = binding.span.unwrap_or((0, 0));
    let region = match scope {
        ResolvedScope::Whole => (0, len),
        ResolvedScope::Signature => (0, sig_end),
        ResolvedScope::Body => (sig_end, len),
        ResolvedScope::Binding => (b_start, b_end),
        ResolvedScope::AfterBinding => (b_end, len),
        ResolvedScope::BeforeBinding => (0, b_start),
        ResolvedScope::BeforeFirst(ci) => (b_end, spans[ci]?.0),
        ResolvedScope::UpToLineOf(ci) => {
            let at = spans[ci]?.1;
            let line_end = text[at..].find('\n').map(|o| at + o).unwrap_or(len);
            (b_start, line_end)
        }
    };
    (region.0 <= region.1).then_some(region)
}

/// First match of `pattern` in `region` whose `{id}` group (if any) equals `ident`.
fn find_first(pattern: &CompiledPattern, text: &str, region: Span, ident: Option<&str>) -> Option<Span> {
    let mut caps = pattern.regex.create_captures();
    let ref_group = pattern
        .has_ref
        .then(|| pattern.regex.group_info().to_index(regex_automata::PatternID::ZERO, "ref"))
        .flatten();
    let mut pos = region.0;
    while pos <= region.1 {
        let input = Input::new(text).range(pos..region.1);
        pattern.regex.search_captures(&input, &mut caps);
        let m = caps.get_match()?;
        let accepted = match (ref_group, ident) {
            (Some(g), Some(want)) => caps.get_group(g).is_some_and(|s| &text[s.start..s.end] == want),
            (Some(_), None) => false,
            (None, _) => true,
        };
        if accepted {
            return Some((m.start(), m.end()));
        }
        pos = m.start() + 1;
        while pos < text.len() && !text.is_char_boundary(pos) {
            pos += 1;
        }
    }
    None
}

fn bindings_for(rule: &CompiledRule, text: &str, sig_end: usize) -> Vec<Binding> {
    let mut out = Vec::new();
    let none = Binding {
        clause: None,
        span: None,
        ident: None,
    };
    for (ci, clause) in rule.clauses.iter().enumerate().take_while(|(_, c)| c.binds) {
        let region = scope_region(clause.scope, text.len(), sig_end, &none, &[], text)
            .expect("binding scopes never reference clauses");
        for p in &clause.patterns {
            let id_group = p.regex.group_info().to_index(regex_automata::PatternID::ZERO, "id");
            let input = Input::new(text).range(region.0..region.1);
            let mut caps = Captures::all(p.regex.group_info().clone());
            let mut it = p.regex.captures_iter(input);
            while let Some(c) = it.next() {
                caps = c;
                let Some(m) = caps.get_match() else { continue };
                let ident = id_group
                    .and_then(|g| caps.get_group(g))
                    .map(|s| text[s.start..s.end].to_string());
                out.push(Binding {
                    clause: Some(ci),
                    span: Some((m.start(), m.end())),
                    ident,
                });
            }
            let _ = &caps;
        }
    }
    if out.is_empty() && !rule.clauses.first().is_some_and(|c| c.binds) {
        out.push(none);
    }
    out.sort_by_key(|b| (b.span.map(|s| s.0), b.clause));
    out
}

fn evaluate(rule: &CompiledRule, text: &str, sig_end: usize) -> Vec<Firing> {
    let mut firings = Vec::new();
    for binding in bindings_for(rule, text, sig_end) {
        let mut spans: Vec<Option<Span>> = vec![None; rule.clauses.len()];
        let mut satisfied = true;
        for (ci, clause) in rule.clauses.iter().enumerate() {
            if clause.binds {
                continue;
            }
            let region = scope_region(clause.scope, text.len(), sig_end, &binding, &spans, text);
            let ident = binding.ident.as_deref();
            let hits: Vec<Option<Span>> = match region {
                Some(r) => clause.patterns.iter().map(|p| find_first(p, text, r, ident)).collect(),
                None => vec![None; clause.patterns.len()],
            };
            let earliest = hits.iter().flatten().min_by_key(|s| s.0).copied();
            satisfied = match clause.combinator {
                Combinator::All => hits.iter().all(Option::is_some),
                Combinator::Any => earliest.is_some(),
                Combinator::Absent => earliest.is_none(),
            };
            if !satisfied {
                break;
            }
            if clause.combinator != Combinator::Absent {
                spans[ci] = earliest;
            }
        }
        if satisfied {
            firings.push(Firing { binding, spans });
        }
    }
    firings
}

const POINTER_PARAM: &str = r"\*\s*(?P<id>[A-Za-z_][A-Za-z0-9_]*)\s*(?:[,)]|\[)";

fn rule(index: usize, name: &str, cwe: &[&str], site: Option<&str>, clauses: Vec<Clause>) -> HeuristicRule {
    HeuristicRule {
        index,
        name: name.to_string(),
        cwe_tags: cwe.iter().map(|c| c.to_string()).collect(),
        pattern_spec: PatternSpec {
            clauses,
            site: site.map(str::to_string),
        },
    }
}

fn builtin_rules() -> Vec<HeuristicRule> {
    use Combinator::*;
    vec![
        rule(
            1,
            "missing-null-check",
            &["CWE-476"],
            Some("deref"),
            vec![
                Clause::binding("pointer_param", Scope::Signature, &[POINTER_PARAM]),
                Clause::binding(
                    "accessor_result",
                    Scope::Body,
                    &[r"\b(?P<id>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?:\([^;()]*\)\s*)?(?:[A-Za-z_][A-Za-z0-9_]*_sk|inet_[A-Za-z0-9_]*|container_of|[A-Za-z0-9_]*lookup[A-Za-z0-9_]*|[A-Za-z0-9_]*get_[A-Za-z0-9_]*)\s*\("],
                ),
                Clause::new(
                    "deref",
                    Any,
                    Scope::AfterBinding,
                    &[
                        r"\b{id}\s*->",
                        r"(?:^|[=(,;!&|?:{}+\-]|\breturn)\s*\*\s*{id}\b",
                    ],
                ),
                Clause::new(
                    "null_guard",
                    Absent,
                    Scope::BeforeFirst("deref".into()),
                    &[
                        r"!\s*{id}\b\s*(?:[)|&?]|$)",
                        r"\b{id}\s*[!=]=\s*(?:\([^()]*\)\s*)?NULL\b",
                        r"\bNULL\s*[!=]=\s*{id}\b",
                        r"\bif\s*\(\s*{id}\s*\)",
                        r"\b{id}\s*(?:&&|\|\||\?)",
                        r"\b(?:assert|BUG_ON|WARN_ON|WARN_ON_ONCE|IS_ERR_OR_NULL|IS_ERR|likely|unlikely)\s*\(\s*!?\s*{id}\b",
                    ],
                ),
            ],
        ),
        rule(
            2,
            "race-condition",
            &["CWE-362"],
            Some("shared_write"),
            vec![
                Clause::binding("pointer_param", Scope::Signature, &[POINTER_PARAM]),
                Clause::new(
                    "shared_write",
                    Any,
                    Scope::Body,
                    &[
                        r"\b{id}\s*->\s*[A-Za-z_][A-Za-z0-9_]*(?:\s*(?:->|\.)\s*[A-Za-z_][A-Za-z0-9_]*|\s*\[[^\]]*\])*\s*(?:[-+*/%&|^]|<<|>>)?=[^=]",
                        r"\b(?:strcpy|strncpy|strcat|strncat|strlcpy|memcpy|memmove|memset|sprintf|snprintf)\s*\(\s*&?\s*{id}\s*->",
                        r"(?:\+\+|--)\s*{id}\s*->",
                        r"\b{id}\s*->\s*[A-Za-z_][A-Za-z0-9_]*\s*(?:\+\+|--)",
                    ],
                ),
                Clause::new(
                    "synchronization",
                    Absent,
                    Scope::Whole,
                    &[r"mutex", r"spin_lock", r"atomic", r"pthread_", r"(?:\b|_)lock\s*\(", r"\brcu_"],
                ),
            ],
        ),
        rule(
            3,
            "missing-bounds-check",
            &["CWE-119", "CWE-120"],
            None,
            vec![
                Clause::binding(
                    "index_access",
                    Scope::Body,
                    &[r"\b[A-Za-z_][A-Za-z0-9_]*\s*\[\s*(?P<id>[a-z_][A-Za-z0-9_]*)\s*(?:[-+]\s*[A-Za-z0-9_]+\s*)?\]"],
                ),
                Clause::new(
                    "bound_check",
                    Absent,
                    Scope::BeforeBinding,
                    &[
                        r"\b{id}\s*[<>]",
                        r"(?:<|[^-]>)=?\s*{id}\b",
                        r"\b(?:min|min_t|clamp|clamp_t|array_index_nospec)\s*\([^;]*\b{id}\b",
                    ],
                ),
                Clause::new("assertion", Absent, Scope::Whole, &[r"\bassert\s*\("]),
            ],
        ),
        rule(
            4,
            "unsafe-allocation",
            &["CWE-690"],
            None,
            vec![
                Clause::binding(
                    "allocation",
                    Scope::Body,
                    &[r"\b(?P<id>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?:\([^;()]*\)\s*)?[A-Za-z0-9_]*(?:malloc|calloc|realloc)\s*\([^;]*;"],
                ),
                Clause::new("next_use", Any, Scope::AfterBinding, &[r"\b{id}\b"]),
                Clause::new(
                    "null_check",
                    Absent,
                    Scope::UpToLineOf("next_use".into()),
                    &[
                        r"!\s*{id}\b",
                        r"\b{id}\s*[!=]=\s*(?:\([^()]*\)\s*)?NULL\b",
                        r"\bNULL\s*[!=]=\s*{id}\b",
                        r"\bif\s*\(\s*{id}\s*\)",
                        r"\b{id}\s*=[^;]*\)\s*[!=]=\s*NULL\b",
                        r"\b{id}\s*(?:&&|\|\||\?)",
                        r"\b(?:assert|BUG_ON|IS_ERR_OR_NULL|likely|unlikely)\s*\(\s*!?\s*{id}\b",
                    ],
                ),
            ],
        ),
        rule(
            5,
            "logging-without-halt",
            &["CWE-390", "CWE-703"],
            Some("error_log"),
            vec![
                Clause::binding(
                    "if_block",
                    Scope::Body,
                    &[
                        r"\bif\s*\((?:[^()]|\((?:[^()]|\([^()]*\))*\))*\)\s*\{[^{}]*\}",
                        r"\bif\s*\((?:[^()]|\((?:[^()]|\([^()]*\))*\))*\)\s*[^{;\s][^{;]*;",
                    ],
                ),
                Clause::new(
                    "error_log",
                    Any,
                    Scope::Binding,
                    &[
                        r"\bfprintf\s*\(\s*stderr\b",
                        r"\bperror\s*\(",
                        r"\bprintk\s*\(\s*KERN_ERR\b",
                        r"\bpr_err\s*\(",
                        r"\bdev_err\s*\(",
                        r"\blog_error\s*\(",
                        r"\bsyslog\s*\(\s*LOG_ERR\b",
                    ],
                ),
                Clause::new(
                    "halt",
                    Absent,
                    Scope::Binding,
                    &[r"\b(?:return|_?exit|_Exit|goto|break|continue|abort|panic|BUG)\b"],
                ),
            ],
        ),
    ]
}
