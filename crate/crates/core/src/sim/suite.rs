use super::Scenario;

const SOURCES: [(&str, &str); 21] = [
    ("honest", include_str!("../../scenarios/honest.toml")),
    ("honest-private", include_str!("../../scenarios/honest-private.toml")),
    ("honest-proxy", include_str!("../../scenarios/honest-proxy.toml")),
    ("granularity-overclaim", include_str!("../../scenarios/granularity-overclaim.toml")),
    ("false-presence", include_str!("../../scenarios/false-presence.toml")),
    ("bogus-witness", include_str!("../../scenarios/bogus-witness.toml")),
    ("denial-of-service", include_str!("../../scenarios/denial-of-service.toml")),
    ("implication", include_str!("../../scenarios/implication.toml")),
    ("implication-collusion", include_str!("../../scenarios/implication-collusion.toml")),
    ("backdating", include_str!("../../scenarios/backdating.toml")),
    ("backdating-collusion", include_str!("../../scenarios/backdating-collusion.toml")),
    ("future-dating", include_str!("../../scenarios/future-dating.toml")),
    ("offline-proof", include_str!("../../scenarios/offline-proof.toml")),
    ("false-endorsement", include_str!("../../scenarios/false-endorsement.toml")),
    ("post-dating", include_str!("../../scenarios/post-dating.toml")),
    ("reordering", include_str!("../../scenarios/reordering.toml")),
    ("proof-switching", include_str!("../../scenarios/proof-switching.toml")),
    ("entry-swap", include_str!("../../scenarios/entry-swap.toml")),
    ("doppelganger", include_str!("../../scenarios/doppelganger.toml")),
    ("denial-of-presence", include_str!("../../scenarios/denial-of-presence.toml")),
    ("chain-fork", include_str!("../../scenarios/chain-fork.toml")),
];

/// The bundled scenarios, one per threat-model row and named attack.
pub fn builtin_suite() -> Vec<Scenario> {
    SOURCES
        .iter()
        .map(|(name, text)| {
            let s = Scenario::from_toml(text).unwrap_or_else(|e| panic!("bundled scenario {name}: {e}"));
            assert_eq!(&s.name, name, "bundled scenario name");
            s
        })
        .collect()
}

/// Looks up a bundled scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_suite().into_iter().find(|s| s.name == name)
}
