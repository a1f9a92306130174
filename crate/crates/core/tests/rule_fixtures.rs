use hydra_core::corpus::normalize;
use hydra_core::heuristics::{default_rules, explain, match_rules};

fn bits(src: &str) -> Vec<u8> {
    match_rules(&normalize(src), &default_rules()).bits
}

#[test]
fn null_check_fixture() {
    assert_eq!(bits(include_str!("fixtures/rtt_reset.c")), [1, 0, 0, 0, 0]);
}

#[test]
fn race_fixture() {
    assert_eq!(bits(include_str!("fixtures/update_user_profile.c")), [0, 1, 0, 0, 0]);
}

#[test]
fn bounds_fixture() {
    assert_eq!(bits(include_str!("fixtures/kvp_acquire_lock.c")), [0, 0, 1, 0, 0]);
}

#[test]
fn allocation_fixture() {
    assert_eq!(bits(include_str!("fixtures/build_path.c")), [0, 0, 0, 1, 0]);
}

#[test]
fn logging_fixture() {
    assert_eq!(bits(include_str!("fixtures/fetch_status.c")), [0, 0, 0, 0, 1]);
}

#[test]
fn clip_image_has_one_deref_site() {
    let src = normalize(include_str!("fixtures/clip_image.c"));
    assert_eq!(match_rules(&src, &default_rules()).bits, [1, 0, 0, 0, 0]);
    let ev = explain(&src, &default_rules());
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].rule_index, 1);
    let line = src.lines().nth(ev[0].line_start - 1).unwrap();
    assert!(line.contains("image->debug"), "{line}");
}

#[test]
fn asserted_clip_image_is_clean() {
    assert_eq!(bits(include_str!("fixtures/clip_image_fixed.c")), [0; 5]);
}

#[test]
fn go_back_sets_nothing() {
    let src = normalize(include_str!("fixtures/go_back.cc"));
    assert_eq!(match_rules(&src, &default_rules()).bits, [0; 5]);
    assert!(explain(&src, &default_rules()).is_empty());
}
