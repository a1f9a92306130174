use std::fs;

use hydra::config::{load_rules_file, parse_rules, ConfigError, ProviderKind, Settings};
use hydra::core::heuristics::match_rules;
use hydra::core::pipeline::{PipelineConfig, Variant};
use hydra::core::corpus::normalize;

#[test]
fn defaults_mirror_module_configs() {
    let s = Settings::default();
    let p = s.pipeline();
    assert_eq!(p, PipelineConfig::default());
    assert_eq!(s.variant, Variant::Hydra);
    assert_eq!(s.provider, ProviderKind::Hashed);
    assert_eq!(s.max_in_flight, 4);
    assert_eq!(s.max_tokens, 8192);
}

#[test]
fn toml_round_trip_and_partial_files() {
    let s = Settings::default();
    assert_eq!(Settings::from_toml(&s.to_toml()).unwrap(), s);
    let s = Settings::from_toml("seed = 9\nk = 3\nvariant = \"m3\"\nepochs = 7\nhidden_dims = [32]\nprovider = \"remote\"\nendpoint = \"http://h:1\"\n").unwrap();
    assert_eq!((s.seed, s.k, s.variant), (9, 3, Variant::M3));
    let p = s.pipeline();
    assert_eq!((p.vae.epochs, p.vae.hidden_dims.clone(), p.vae.seed, p.seed), (7, vec![32], 9, 9));
    assert_eq!(s.provider, ProviderKind::Remote);
    assert!(Settings::from_toml("no_such_key = 1").is_err());
    assert!(Settings::from_toml("variant = \"m9\"").is_err());
}

#[test]
fn remote_provider_needs_endpoint() {
    let s = Settings {
        provider: ProviderKind::Remote,
        ..Settings::default()
    };
    assert!(matches!(hydra::build_provider(&s), Err(ConfigError::MissingEndpoint)));
}

const EXTRA: &str = r#"
[[rule]]
index = 6
name = "unbounded-gets"
cwe_tags = ["CWE-242"]

[rule.pattern_spec]
site = "call"

[[rule.pattern_spec.clauses]]
name = "call"
combinator = "any"
patterns = ['\bgets\s*\(']
"#;

#[test]
fn rule_files_append_user_rules() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rules.toml");
    fs::write(&p, EXTRA).unwrap();
    let rules = load_rules_file(&p).unwrap();
    assert_eq!(rules.len(), 6);
    assert_eq!(rules.rules()[5].name, "unbounded-gets");
    let h = match_rules(&normalize("void f(char *b)\n{\n\tgets(b);\n}\n"), &rules);
    assert_eq!(h.bits, vec![0, 0, 0, 0, 0, 1]);
    let s = Settings {
        rules_file: Some(p),
        ..Settings::default()
    };
    assert_eq!(s.rules().unwrap().len(), 6);
}

#[test]
fn bad_rule_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.toml");
    fs::write(&dup, EXTRA.replace("index = 6", "index = 2")).unwrap();
    assert!(matches!(load_rules_file(&dup), Err(ConfigError::Rules { .. })));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, EXTRA.replace(r"'\bgets\s*\('", "'(unclosed'")).unwrap();
    assert!(matches!(load_rules_file(&bad), Err(ConfigError::Rules { .. })));
    let zero = dir.path().join("zero.toml");
    fs::write(&zero, EXTRA.replace("index = 6", "index = 0")).unwrap();
    assert!(matches!(load_rules_file(&zero), Err(ConfigError::Rules { .. })));
    assert!(parse_rules("[[rule]]\nindex = 7\n").is_err());
}
