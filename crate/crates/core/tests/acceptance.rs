//! Acceptance suite. Runs without the libtest harness so that each criterion
//! prints exactly one PASS/FAIL line whether or not output is captured.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use locprov::audit::{audit, AuditConfig};
use locprov::bench::{bench_audit, bench_proofgen, reveal_positions, space_table};
use locprov::crypto::{Profile, Signature, Suite};
use locprov::directory::{Directory, Role};
use locprov::model::{
    make_private_statement, make_proof, make_statement, Disclosure, EndorsedLocationProof, LocationId, PartyId,
    ProvenanceChain, ProvenanceEntry, Statement,
};
use locprov::ordering::hashchain::chain_next;
use locprov::ordering::{verify_order, BloomAccumulator, HashChainLink, OrderingConstruct, OrderingScheme};
use locprov::sim::{builtin_suite, random_honest_scenario, run_scenario, Honesty};

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Duration,
    run: fn() -> String,
}

const CRITERIA: [Criterion; 7] = [
    Criterion { id: 1, title: "space per entry", budget: Duration::from_secs(1), run: space },
    Criterion { id: 2, title: "bloom false-positive rate", budget: Duration::from_secs(30), run: false_positive_rate },
    Criterion { id: 3, title: "audit operation counts", budget: Duration::from_secs(120), run: audit_asymmetry },
    Criterion { id: 4, title: "proof generation throughput", budget: Duration::from_secs(60), run: throughput },
    Criterion { id: 5, title: "private statement overhead", budget: Duration::from_secs(5), run: private_overhead },
    Criterion { id: 6, title: "attack matrix", budget: Duration::from_secs(60), run: attack_matrix },
    Criterion { id: 7, title: "property suites", budget: Duration::from_secs(300), run: properties },
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let default_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.iter().any(|f| c.title.contains(f.as_str()))) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let line = match result {
            Ok(detail) if elapsed <= c.budget => format!("PASS  {detail}"),
            Ok(detail) => format!("FAIL  over time budget of {:?}; {detail}", c.budget),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL  {msg}")
            }
        };
        if line.starts_with("FAIL") {
            failed += 1;
        }
        println!("criterion {} ({}): {line} [{:.2}s]", c.id, c.title, elapsed.as_secs_f64());
    }
    panic::set_hook(default_hook);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

/// Filter bytes for `n` items at rate `p`, from `m = -n ln p / (ln 2)^2`.
fn bloom_bytes_oracle(n: f64, p: f64) -> u64 {
    let m = (-n * p.ln() / (2f64.ln() * 2f64.ln())).ceil() as u64;
    m.div_ceil(8)
}

fn space() -> String {
    let rows = space_table(Profile::Legacy, 10_000, 0.001).unwrap();
    // A DSA signature over a 160-bit group is the pair (r, s) of 20 bytes each.
    let dsa_sig_len = 2 * 160 / 8;
    assert!(rows.iter().all(|r| r.hashchain_bytes_per_entry == dsa_sig_len), "hash-chain bytes not constant");
    let keys = Profile::Legacy.keygen(&[1; 32]);
    let lp = make_proof(&keys, Statement::Plain(make_statement(PartyId::new("u"), LocationId::new("l"), 1).unwrap()));
    let link = chain_next(&keys, &lp, None);
    assert_eq!(OrderingConstruct::HashChain(link).metadata_len(), 40);
    for r in &rows {
        assert_eq!(r.bloom_bytes_per_entry as u64, bloom_bytes_oracle(r.n as f64, 0.001), "n = {}", r.n);
    }
    let at_1000 = rows.iter().find(|r| r.n == 1000).unwrap().bloom_bytes_per_entry as i64;
    assert!((at_1000 - 1797).abs() <= 8, "bloom bytes at n=1000: {at_1000}");
    format!("hash chain 40 B/entry for n in 1..=10000; bloom {at_1000} B at n=1000")
}

fn false_positive_rate() -> String {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut acc = BloomAccumulator::new(1000, 0.001).unwrap();
    let mut members = BTreeSet::new();
    for _ in 0..1000 {
        let mut d = [0u8; 20];
        rng.fill_bytes(&mut d);
        acc.add(&d);
        members.insert(d);
    }
    assert!(members.iter().all(|d| acc.contains(d)), "false negative");
    let mut probes = 0u32;
    let mut hits = 0u32;
    while probes < 100_000 {
        let mut d = [0u8; 20];
        rng.fill_bytes(&mut d);
        if members.contains(&d) {
            continue;
        }
        probes += 1;
        hits += acc.contains(&d) as u32;
    }
    let rate = hits as f64 / probes as f64;
    let k = acc.k as f64;
    let theory = (1.0 - (-k * 1000.0 / acc.m as f64).exp()).powf(k);
    assert!(rate <= 0.002, "measured rate {rate}");
    format!("{hits} hits over {probes} probes, rate {rate:.5} (theory {theory:.5})")
}

fn audit_asymmetry() -> String {
    let n = 10_000;
    let mut out = Vec::new();
    for pct in [1.0, 100.0] {
        let positions = reveal_positions(n, pct);
        let expected_revealed = ((n as f64) * pct / 100.0).round() as usize;
        assert_eq!(positions.len(), expected_revealed);
        assert_eq!((positions[0], *positions.last().unwrap()), (1, n));
        let (chain, chain_report) = bench_audit(OrderingScheme::HashChain, Profile::Modern, n, pct, 0).unwrap();
        let (bloom, bloom_report) = bench_audit(OrderingScheme::Bloom, Profile::Modern, n, pct, 0).unwrap();
        assert!(chain_report.is_ok() && bloom_report.is_ok(), "honest fixture failed its audit");
        // links walked = last revealed position; accumulators checked = revealed count
        assert_eq!(chain.ops_count, *positions.last().unwrap());
        assert_eq!(bloom.ops_count, positions.len());
        let (want_chain, want_bloom) = if pct == 1.0 { (10_000, 100) } else { (10_000, 10_000) };
        assert_eq!((chain.ops_count, bloom.ops_count), (want_chain, want_bloom), "at {pct}%");
        out.push(format!("{pct}%: hash chain {} links, bloom {} accumulators", chain.ops_count, bloom.ops_count));
    }
    out.join("; ")
}

fn throughput() -> String {
    let mut out = Vec::new();
    for profile in [Profile::Legacy, Profile::Modern] {
        for scheme in OrderingScheme::ALL {
            let row = bench_proofgen(scheme, profile, 300, 0).unwrap();
            assert!(row.per_second >= 60.0, "{scheme} {profile}: {:.1} proofs/s", row.per_second);
            out.push(format!("{scheme}/{profile} {:.0}/s", row.per_second));
        }
    }
    out.join(", ")
}

fn private_overhead() -> String {
    let suite = Suite::new(Profile::Legacy);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let digest_len = Profile::Legacy.digest(b"").len();
    let nonce_len = suite.random_nonce(&mut rng).0.len();
    assert_eq!(digest_len + nonce_len, 24);
    let labels: Vec<String> = (0..8).map(|i| format!("granularity-{i}")).collect();
    let footprints: Vec<usize> = (1..=8)
        .map(|k| {
            make_private_statement(
                &suite,
                PartyId::new("alice"),
                LocationId::new("cafe"),
                1_000,
                &labels[..k],
                &mut rng,
            )
            .unwrap()
            .blinded_footprint()
        })
        .collect();
    for w in footprints.windows(2) {
        assert_eq!(w[1] - w[0], digest_len + nonce_len, "footprints {footprints:?}");
    }
    format!("{} bytes per added granularity over 1..=8", footprints[1] - footprints[0])
}

fn attack_matrix() -> String {
    let suite = builtin_suite();
    let rows: BTreeSet<Honesty> = suite.iter().map(|s| s.honesty).collect();
    assert_eq!(rows.len(), 8, "honesty rows covered: {rows:?}");
    let names: BTreeSet<&str> = suite.iter().map(|s| s.name.as_str()).collect();
    for required in ["reordering", "proof-switching", "backdating", "future-dating", "implication", "false-endorsement"] {
        assert!(names.contains(required), "missing scenario {required}");
    }
    for undetected in ["post-dating", "doppelganger"] {
        let s = suite.iter().find(|s| s.name == undetected).unwrap_or_else(|| panic!("missing {undetected}"));
        assert!(!s.expect.detected, "{undetected} should be expected undetected");
    }
    let mut runs = 0;
    for s in &suite {
        for scheme in OrderingScheme::ALL {
            let out = run_scenario(s, Some(scheme)).unwrap();
            assert!(out.matched, "{}", out.summary());
            runs += 1;
        }
    }
    format!("{} scenarios x 2 schemes = {runs} runs, all matched, 8/8 rows", suite.len())
}

fn signature_fuzz() -> usize {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut mutations = 0;
    for profile in [Profile::Legacy, Profile::Modern] {
        let keys = profile.keygen(&[9; 32]);
        for _ in 0..500 {
            let mut msg = vec![0u8; rng.gen_range(1..64)];
            rng.fill_bytes(&mut msg);
            let sig = keys.sign(&msg);
            assert!(keys.public().verify(&msg, &sig), "round trip");
            let (m2, s2) = if rng.gen_bool(0.5) {
                let mut m = msg.clone();
                let i = rng.gen_range(0..m.len());
                m[i] ^= 1 << rng.gen_range(0..8);
                (m, sig.clone())
            } else {
                let mut s = sig.0.clone();
                let i = rng.gen_range(0..s.len());
                s[i] ^= 1 << rng.gen_range(0..8);
                (msg.clone(), Signature(s))
            };
            assert!(!keys.public().verify(&m2, &s2), "false accept under {profile}");
            mutations += 1;
        }
    }
    mutations
}

fn bloom_chains() -> usize {
    let keys = Profile::Modern.keygen(&[3; 32]);
    let mut pairs = 0;
    for n in 1..=16usize {
        let mut accs = Vec::new();
        let mut digests = Vec::new();
        let mut acc = BloomAccumulator::new(1000, 0.001).unwrap();
        for i in 0..n {
            let st = make_statement(PartyId::new("u"), LocationId::new("l"), i as u64 + 1).unwrap();
            let d = make_proof(&keys, Statement::Plain(st)).digest(Profile::Modern);
            acc.add(d.as_bytes());
            digests.push(d);
            accs.push(acc.clone());
        }
        for i in 0..n {
            for d in &digests[..=i] {
                assert!(accs[i].contains(d.as_bytes()), "false negative n={n} i={i}");
            }
            for j in 0..n {
                let subset = accs[i].is_subset_of(&accs[j]).unwrap();
                assert_eq!(subset, i <= j, "subset({i}, {j}) at n={n}");
                if i < j {
                    assert!(accs[i].popcount() < accs[j].popcount());
                }
                pairs += 1;
            }
        }
    }
    pairs
}

fn hashchain_tampers() -> usize {
    let profile = Profile::Modern;
    let keys = profile.keygen(&[4; 32]);
    let mut dir = Directory::new();
    dir.insert(PartyId::new("cafe"), Role::Authority, keys.public().clone());
    let mut chain = ProvenanceChain::new(OrderingScheme::HashChain);
    let mut prev: Option<HashChainLink> = None;
    for i in 0..8u64 {
        let st = make_statement(PartyId::new("u"), LocationId::new("cafe"), 1_000 * (i + 1)).unwrap();
        let lp = make_proof(&keys, Statement::Plain(st));
        let link = chain_next(&keys, &lp, prev.as_ref());
        prev = Some(link.clone());
        chain
            .append(ProvenanceEntry {
                elp: EndorsedLocationProof { proof: lp, endorsements: vec![] },
                ordering: OrderingConstruct::HashChain(link),
            })
            .unwrap();
    }
    let holder = PartyId::new("u");
    let mut tampers = 0;
    for mask in 1u32..256 {
        let positions: Vec<usize> = (1..=8).filter(|p| mask & (1 << (p - 1)) != 0).collect();
        let disclosures: Vec<Disclosure> = positions.iter().map(|&p| Disclosure::new(p)).collect();
        let sub = chain.reveal(&holder, &disclosures, profile).unwrap();
        assert!(verify_order(&sub, &dir, profile).is_ok(), "honest reveal {positions:?}");
        let last = sub.last_position();
        let mut variants = Vec::new();
        for s in 0..last {
            let mut t = sub.clone();
            t.link_slots[s].link.link_sig.0[0] ^= 1;
            variants.push(t);
            let mut t = sub.clone();
            t.link_slots[s].proof_digest.0[0] ^= 1;
            variants.push(t);
            if s + 1 < last {
                let mut t = sub.clone();
                t.link_slots.swap(s, s + 1);
                variants.push(t);
            }
            let mut t = sub.clone();
            t.link_slots.remove(s);
            variants.push(t);
        }
        for r in 0..sub.entries.len() {
            let mut t = sub.clone();
            t.entries[r].entry.elp.proof.authority_sig.0[1] ^= 1;
            variants.push(t);
            if r + 1 < sub.entries.len() {
                let mut t = sub.clone();
                t.entries.swap(r, r + 1);
                variants.push(t);
            }
        }
        for t in variants {
            assert!(!verify_order(&t, &dir, profile).is_ok(), "tamper accepted for reveal {positions:?}");
            tampers += 1;
        }
    }
    tampers
}

fn honest_completeness() -> usize {
    let mut runs = 0;
    for seed in 0..1000 {
        let s = random_honest_scenario(seed);
        let out = run_scenario(&s, None).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(!out.detected, "honest seed {seed} flagged:\n{}", out.report.render_text());
        let config = AuditConfig::for_profile(out.profile);
        let again = audit(&out.claims, &out.presentation, &out.directory, Some(&out.registry), &config);
        assert_eq!(again, out.report);
        runs += 1;
    }
    runs
}

fn properties() -> String {
    let fuzz = signature_fuzz();
    let pairs = bloom_chains();
    let tampers = hashchain_tampers();
    let honest = honest_completeness();
    format!(
        "{fuzz} signature mutations, 0 accepted; {pairs} bloom pairs ordered; \
         {tampers} hash-chain tampers rejected; {honest} honest runs clean"
    )
}
