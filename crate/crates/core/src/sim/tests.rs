use std::collections::BTreeSet;

use super::*;

#[test]
fn builtin_suite_matches_under_both_schemes() {
    for s in builtin_suite() {
        for scheme in OrderingScheme::ALL {
            let out = run_scenario(&s, Some(scheme)).unwrap_or_else(|e| panic!("{} {scheme}: {e}", s.name));
            assert!(out.matched, "{}\n{}", out.summary(), out.report.render_text());
        }
    }
}

#[test]
fn suite_covers_every_honesty_row() {
    let rows: BTreeSet<Honesty> = builtin_suite().iter().map(|s| s.honesty).collect();
    assert_eq!(rows, Honesty::ALL.into_iter().collect());
}

#[test]
fn honesty_row_labels() {
    let h = Honesty { user: false, authority: false, witness: true };
    assert_eq!(h.row(), "U\u{304}L\u{304}W");
    assert_eq!(Honesty::ALL[0].row(), "ULW");
    assert_eq!(Honesty::ALL.iter().collect::<BTreeSet<_>>().len(), 8);
}

#[test]
fn reruns_are_byte_identical() {
    let s = builtin("backdating").unwrap();
    for scheme in OrderingScheme::ALL {
        let a = run_scenario(&s, Some(scheme)).unwrap();
        let b = run_scenario(&s, Some(scheme)).unwrap();
        assert_eq!(a.trace_jsonl(), b.trace_jsonl());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn different_seeds_give_different_keys() {
    let mut s = builtin("honest").unwrap();
    let a = run_scenario(&s, None).unwrap();
    s.seed += 1;
    let b = run_scenario(&s, None).unwrap();
    assert!(!a.detected && !b.detected);
    assert_ne!(a.directory, b.directory);
}

#[test]
fn unknown_fields_rejected() {
    let mut text = include_str!("../../scenarios/honest.toml").to_string();
    text.push_str("\n[bogus]\nx = 1\n");
    assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Parse(_))));
    let bad_action = include_str!("../../scenarios/honest.toml").replace("\"visit\"", "\"teleport\"");
    assert!(Scenario::from_toml(&bad_action).is_err());
}

#[test]
fn toml_round_trip() {
    for s in builtin_suite() {
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }
}

#[test]
fn step_missing_user_is_an_error() {
    let mut s = builtin("honest").unwrap();
    s.steps[0].user = None;
    assert!(matches!(run_scenario(&s, None), Err(ScenarioError::Invalid(_))));
}

#[test]
fn mismatch_reported_when_expectation_wrong() {
    let mut s = builtin("reordering").unwrap();
    s.expect.detected = false;
    let out = run_scenario(&s, None).unwrap();
    assert!(out.detected && !out.matched);
    assert!(out.summary().contains("MISMATCH"));
}

#[test]
fn scheme_specific_expectation() {
    let e = Expect {
        detected: true,
        class: Some(ThreatClass::Reordering),
        hashchain: None,
        bloom: Some(ExpectOverride { detected: false, class: None }),
    };
    assert!(e.for_scheme(OrderingScheme::HashChain).detected);
    assert!(!e.for_scheme(OrderingScheme::Bloom).detected);
}

#[test]
fn skipping_registry_misses_backdating() {
    let mut s = builtin("backdating").unwrap();
    s.present.registry = Some(false);
    let out = run_scenario(&s, None).unwrap();
    assert!(!out.detected);
    assert!(!out.report.warnings.is_empty());
}

#[test]
fn legacy_profile_runs() {
    let mut s = builtin("proof-switching").unwrap();
    s.profile = Profile::Legacy;
    let out = run_scenario(&s, None).unwrap();
    assert!(out.matched, "{}", out.report.render_text());
    assert_eq!(out.presentation.entries[0].entry.elp.proof.authority_sig.as_bytes().len(), 40);
}

#[test]
fn random_honest_runs_audit_clean() {
    for seed in 0..40 {
        let s = random_honest_scenario(seed);
        let out = run_scenario(&s, None).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(!out.detected, "seed {seed}\n{}", out.report.render_text());
    }
}

#[test]
fn random_generator_is_deterministic() {
    assert_eq!(random_honest_scenario(7), random_honest_scenario(7));
    assert_ne!(random_honest_scenario(7), random_honest_scenario(8));
}

#[test]
fn forked_chain_hides_a_visit_undetected() {
    let s = builtin("chain-fork").unwrap();
    for scheme in OrderingScheme::ALL {
        let out = run_scenario(&s, Some(scheme)).unwrap();
        assert!(out.matched && !out.detected, "{}", out.summary());
        let places: Vec<_> = out.chain.entries.iter().map(|e| e.elp.proof.statement.location().as_str()).collect();
        assert_eq!(places, ["cafe", "cafe"]);
        assert!(out.trace.iter().any(|e| e.event == "fork"));
    }
}
