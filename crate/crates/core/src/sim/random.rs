use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Action, AuthoritySpec, ClaimOverride, Expect, Honesty, PresentSpec, Scenario, Step, UserSpec, WitnessSpec};
use crate::crypto::Profile;
use crate::ordering::OrderingScheme;

/// A random all-honest scenario: a few locations with skewed clocks, some
/// issuing private proofs, users visiting them, and a random disclosure with
/// claims at random opened granularities. Its audit must come out clean.
pub fn random_honest_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let profile = if rng.gen_ratio(1, 16) { Profile::Legacy } else { Profile::Modern };
    let scheme = *OrderingScheme::ALL.choose(&mut rng).expect("two schemes");

    let mut authorities = Vec::new();
    let mut witnesses = Vec::new();
    for i in 0..rng.gen_range(1..=3) {
        let id = format!("loc-{i}");
        let granularities = if rng.gen_bool(0.5) {
            vec![format!("{id}-block"), format!("region-{}", i % 2), "state".to_string()]
        } else {
            Vec::new()
        };
        for j in 0..rng.gen_range(1..=2) {
            witnesses.push(WitnessSpec { id: format!("w-{i}-{j}"), location: id.clone(), ..WitnessSpec::default() });
        }
        authorities.push(AuthoritySpec { id, skew_ms: rng.gen_range(-3_000..=3_000), granularities, ..AuthoritySpec::default() });
    }
    let users: Vec<UserSpec> =
        (0..rng.gen_range(1..=2)).map(|k| UserSpec { id: format!("user-{k}"), ..UserSpec::default() }).collect();

    let mut steps = Vec::new();
    let mut visits: Vec<(usize, usize)> = Vec::new();
    let mut t = 50_000;
    for _ in 0..rng.gen_range(2..=8) {
        let u = rng.gen_range(0..users.len());
        let a = rng.gen_range(0..authorities.len());
        steps.push(Step {
            action: Action::Visit,
            at: t,
            user: Some(users[u].id.clone()),
            location: Some(authorities[a].id.clone()),
            witnesses: None,
            stay_ms: 60_000,
            authority: None,
            victim: None,
            accomplice: None,
            fork_keep: None,
        });
        visits.push((u, a));
        t += rng.gen_range(5_000..=200_000);
    }

    let (holder, _) = visits[rng.gen_range(0..visits.len())];
    let mine: Vec<usize> = visits.iter().filter(|(u, _)| *u == holder).map(|(_, a)| *a).collect();
    let positions: Vec<usize> = loop {
        let p: Vec<usize> = (1..=mine.len()).filter(|_| rng.gen_bool(0.5)).collect();
        if !p.is_empty() {
            break p;
        }
    };
    let open: Vec<usize> = (0..3).filter(|_| rng.gen_bool(0.5)).collect();
    let mut claim = Vec::new();
    for (index, &pos) in positions.iter().enumerate() {
        let g = &authorities[mine[pos - 1]].granularities;
        if !g.is_empty() && !open.is_empty() && rng.gen_bool(0.5) {
            let pick = *open.choose(&mut rng).expect("non-empty");
            claim.push(ClaimOverride { index, location: Some(g[pick].clone()), time: None });
        }
    }

    Scenario {
        name: format!("random-honest-{seed}"),
        description: "randomized honest run".into(),
        seed,
        profile,
        scheme: Some(scheme),
        epoch_ms: None,
        honesty: Honesty { user: true, authority: true, witness: true },
        authorities,
        witnesses,
        users: users.clone(),
        steps,
        present: PresentSpec {
            holder: Some(users[holder].id.clone()),
            positions: Some(positions),
            open,
            claim,
            ..PresentSpec::default()
        },
        expect: Expect { detected: false, class: None, hashchain: None, bloom: None },
    }
}
