use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::crypto::Profile;
use crate::directory::{Directory, Role};
use crate::model::{Disclosure, LocationId, PartyId};
use crate::ordering::{OrderingConstruct, OrderingScheme};

fn keys(tag: u8) -> crate::crypto::KeyPair {
    Profile::Modern.keygen(&[tag; 32])
}

fn net(scheme: OrderingScheme) -> Network {
    let config = ProtocolConfig { scheme, ..ProtocolConfig::default() };
    let mut n = Network::new(config, 1);
    n.add_authority(LocationId::new("cafe"), keys(1), 0).unwrap();
    n.add_witness(PartyId::new("w1"), LocationId::new("cafe"), keys(2)).unwrap();
    n.add_user(PartyId::new("alice"), keys(3)).unwrap();
    n.advance_to(1_000);
    n
}

fn alice() -> PartyId {
    PartyId::new("alice")
}

fn cafe() -> LocationId {
    LocationId::new("cafe")
}

struct Solo {
    config: ProtocolConfig,
    directory: Directory,
    oracle: ScheduleOracle,
    rng: ChaCha20Rng,
    authority: Authority,
    witness: Witness,
}

fn solo() -> Solo {
    let config = ProtocolConfig::default();
    let mut directory = Directory::new();
    let authority = Authority::new(cafe(), keys(1), &config, 0, 0);
    let witness = Witness::new(PartyId::new("w1"), cafe(), keys(2));
    directory.insert(authority.id.clone(), Role::Authority, authority.keys().public().clone());
    directory.insert(witness.id.clone(), Role::Witness, witness.keys().public().clone());
    directory.insert(alice(), Role::User, keys(3).public().clone());
    let mut oracle = ScheduleOracle::new();
    oracle.add(alice(), cafe(), 0, 100_000);
    oracle.add(PartyId::new("w1"), cafe(), 0, u64::MAX);
    Solo { config, directory, oracle, rng: ChaCha20Rng::seed_from_u64(5), authority, witness }
}

macro_rules! ctx {
    ($s:expr, $now:expr) => {
        Ctx { now: $now, config: &$s.config, directory: &$s.directory, oracle: &$s.oracle, rng: &mut $s.rng }
    };
}

#[test]
fn proof_request_carries_latest_construct() {
    let mut n = net(OrderingScheme::HashChain);
    let dir = n.directory().clone();
    let req = user_request_proof(n.user(&alice()).unwrap(), &cafe().authority(), &dir).unwrap();
    assert_eq!(req, Payload::ProofRequest { prev: None });
    for i in 0..3 {
        n.advance_to(10_000 * (i + 1));
        n.visit(&alice(), &cafe(), None, 60_000).unwrap();
    }
    let user = n.user(&alice()).unwrap();
    assert_eq!(user.chain.len(), 3);
    let Payload::ProofRequest { prev } = user_request_proof(user, &cafe().authority(), &dir).unwrap() else {
        unreachable!()
    };
    assert_eq!(prev.as_ref(), user.chain.latest_ordering());
    assert!(matches!(
        user_request_proof(user, &PartyId::new("nowhere"), &dir),
        Err(ProtocolError::UnknownAuthority(_))
    ));
}

#[test]
fn present_user_gets_proof_at_local_time() {
    let mut s = solo();
    s.authority.skew_ms = 250;
    let mut ctx = ctx!(s, 4_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    assert_eq!(grant.proof.statement.visit_time(), 4_250);
    assert!(grant.proof.verify(s.authority.keys().public()));
    assert!(s.authority.has_issued(&grant.proof.digest(Profile::Modern)));
}

#[test]
fn absent_user_refused() {
    let mut s = solo();
    let mut ctx = ctx!(s, 200_000);
    assert!(authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).is_err());
    assert_eq!(s.authority.book().pending(0).len(), 0);
}

#[test]
fn bloom_construct_inserts_and_resigns() {
    let mut s = solo();
    s.config.scheme = OrderingScheme::Bloom;
    let mut ctx = ctx!(s, 1_000);
    let g1 = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    let mut ctx = ctx!(s, 2_000);
    let g2 = authority_handle_preq(&mut s.authority, &alice(), Some(&g1.ordering), &mut ctx).unwrap();
    let (OrderingConstruct::Bloom(a1), OrderingConstruct::Bloom(a2)) = (&g1.ordering, &g2.ordering) else {
        panic!("expected accumulators")
    };
    let expected = a1.insert(g2.proof.digest(Profile::Modern).as_bytes());
    assert_eq!(a2.bits, expected.bits);
    assert!(a2.verify_signature(s.authority.keys().public()));
    assert!(a1.is_subset_of(a2).unwrap());
}

#[test]
fn endorsement_request_constructor() {
    let mut s = solo();
    let mut ctx = ctx!(s, 1_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    let req = user_request_endorsement(&grant.proof, &PartyId::new("w1"), &s.directory).unwrap();
    assert_eq!(req, Payload::EndorsementRequest { proof: grant.proof.clone() });
    assert_eq!(req.kind(), MessageKind::EReq);
    assert!(matches!(
        user_request_endorsement(&grant.proof, &alice(), &s.directory),
        Err(ProtocolError::UnknownWitness(_))
    ));
}

#[test]
fn colocated_witness_endorses() {
    let mut s = solo();
    let mut ctx = ctx!(s, 1_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    let mut ctx = ctx!(s, 1_100);
    let e = witness_handle_ereq(&mut s.witness, &alice(), &grant.proof, &mut s.authority, &mut ctx).unwrap();
    assert_eq!(e.statement.proof_digest, grant.proof.digest(Profile::Modern));
    assert_eq!(e.statement.endorsement_time, 1_100);
    assert!(e.verify_witness(s.witness.keys().public()));
    assert!(e.verify_timestamp(s.authority.keys().public()));
}

#[test]
fn absent_user_not_endorsed() {
    let mut s = solo();
    s.authority.behavior.skip_localization = true;
    let mut ctx = ctx!(s, 150_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    let mut ctx = ctx!(s, 150_100);
    assert!(witness_handle_ereq(&mut s.witness, &alice(), &grant.proof, &mut s.authority, &mut ctx).is_err());
}

#[test]
fn late_timestamp_outside_window_refused() {
    let mut s = solo();
    let mut ctx = ctx!(s, 1_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    s.authority.behavior.time_offset_ms = 120_000;
    let mut ctx = ctx!(s, 1_100);
    let res = witness_handle_ereq(&mut s.witness, &alice(), &grant.proof, &mut s.authority, &mut ctx);
    assert!(res.unwrap_err().reason.contains("after visit time"));
}

#[test]
fn timestamp_lag_boundary() {
    for delay in [2_000u64, 29_999, 30_000, 30_001, 31_000] {
        let mut s = solo();
        let mut ctx = ctx!(s, 1_000);
        let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
        let d = grant.proof.digest(Profile::Modern);
        let ctx = ctx!(s, 1_000 + delay);
        let res = authority_timestamp(&mut s.authority, &cafe(), &d, &ctx);
        assert_eq!(res.is_ok(), delay <= 30_000, "delay {delay}");
    }
}

#[test]
fn timestamps_monotonic_and_scoped() {
    let mut s = solo();
    let mut ctx = ctx!(s, 1_000);
    let grant = authority_handle_preq(&mut s.authority, &alice(), None, &mut ctx).unwrap();
    let d = grant.proof.digest(Profile::Modern);
    let mut last = 0;
    for now in [1_000u64, 1_500, 1_500, 9_000] {
        let ctx = ctx!(s, now);
        let g = authority_timestamp(&mut s.authority, &cafe(), &d, &ctx).unwrap();
        assert!(g.endorsement_time >= last);
        last = g.endorsement_time;
    }
    s.authority.skew_ms = -5_000;
    let ctx = ctx!(s, 9_500);
    assert_eq!(authority_timestamp(&mut s.authority, &cafe(), &d, &ctx).unwrap().endorsement_time, 9_000);
    let ctx = ctx!(s, 9_500);
    let unknown = Profile::Modern.digest(b"never issued");
    assert!(authority_timestamp(&mut s.authority, &cafe(), &unknown, &ctx).is_err());
    assert!(authority_timestamp(&mut s.authority, &LocationId::new("elsewhere"), &d, &ctx).is_err());
}

#[test]
fn append_entry_cases() {
    let mut n = net(OrderingScheme::HashChain);
    assert_eq!(n.user(&alice()).unwrap().chain.len(), 0);
    for i in 0..4 {
        n.advance_to(5_000 * (i + 1));
        let out = n.visit(&alice(), &cafe(), None, 10_000).unwrap();
        assert!(matches!(out, Some(VisitOutcome::Appended { position, .. }) if position == i as usize + 1), "{out:?}");
    }
    let user = n.user_mut(&alice()).unwrap();
    let mut entry = user.chain.entries[0].clone();
    entry.ordering = OrderingConstruct::Bloom(crate::ordering::BloomAccumulator::new(10, 0.1).unwrap());
    let err = user_append_entry(user, entry.elp, entry.ordering).unwrap_err();
    assert!(matches!(err, ProtocolError::Model(crate::model::ModelError::SchemeMismatch { .. })));
}

#[test]
fn proxy_resign_cases() {
    let config = ProtocolConfig::default();
    let block_keys = keys(8);
    let block = Authority::new(LocationId::new("block-5"), block_keys.clone(), &config, 0, 0);
    let mut city = Authority::new(LocationId::new("chicago"), keys(9), &config, 0, 0);
    let st = crate::model::make_statement(alice(), LocationId::new("block-5"), 10).unwrap();
    let lp = crate::model::make_proof(&block_keys, crate::model::Statement::Plain(st));

    assert!(matches!(proxy_resign(&block.id, block_keys.public(), &city, &lp), Err(ProtocolError::Untrusted(_))));
    city.trusts.insert(block.id.clone());
    let out = proxy_resign(&block.id, block_keys.public(), &city, &lp).unwrap();
    assert!(out.verify(city.keys().public()));
    assert_eq!(out.statement.location(), &LocationId::new("chicago"));
    let json = serde_json::to_string(&out).unwrap();
    assert!(!json.contains("block-5"));

    let mut tampered = lp.clone();
    tampered.authority_sig.0[0] ^= 1;
    assert!(matches!(proxy_resign(&block.id, block_keys.public(), &city, &tampered), Err(ProtocolError::BadProof)));
}

#[test]
fn proxy_flow_over_network() {
    for scheme in OrderingScheme::ALL {
        let config = ProtocolConfig { scheme, ..ProtocolConfig::default() };
        let mut n = Network::new(config, 3);
        n.add_authority(LocationId::new("chicago"), keys(9), 0).unwrap();
        let block = n.add_authority(LocationId::new("block-5"), keys(8), 0).unwrap();
        block.proxy_via = Some(PartyId::new("chicago"));
        block.granularities = vec!["block-5".into(), "chicago".into()];
        n.authority_mut(&PartyId::new("chicago")).unwrap().trusts.insert(PartyId::new("block-5"));
        n.add_witness(PartyId::new("w"), LocationId::new("block-5"), keys(2)).unwrap();
        n.add_user(alice(), keys(3)).unwrap();
        n.advance_to(1_000);
        let out = n.visit(&alice(), &LocationId::new("block-5"), None, 60_000).unwrap();
        assert!(matches!(out, Some(VisitOutcome::Appended { .. })), "{out:?}");
        let entry = &n.user(&alice()).unwrap().chain.entries[0];
        assert_eq!(entry.elp.proof.statement.location(), &LocationId::new("chicago"));
        let city_key = n.directory().authority_key(&LocationId::new("chicago")).unwrap();
        assert!(entry.elp.proof.verify(city_key));
        assert!(entry.elp.proof.statement.as_private().is_some());
    }
}

#[test]
fn no_proof_or_endorsement_without_presence() {
    let mut n = net(OrderingScheme::HashChain);
    // alice requests without being placed anywhere
    let out = n.request(&alice(), &cafe(), None).unwrap();
    assert!(matches!(out, Some(VisitOutcome::Refused { .. })));
    assert!(n.user(&alice()).unwrap().chain.is_empty());
    assert!(n.trace().iter().filter(|e| e.kind.as_deref() == Some("PResp")).all(|e| e.detail.is_some()));

    // a lax authority issues anyway; the honest witness still refuses
    n.authority_mut(&cafe().authority()).unwrap().behavior.skip_localization = true;
    let out = n.request(&alice(), &cafe(), None).unwrap();
    assert!(matches!(out, Some(VisitOutcome::Unendorsed { .. })), "{out:?}");
    assert!(n.trace().iter().filter(|e| e.kind.as_deref() == Some("EResp")).all(|e| e.detail.is_some()));
}

#[test]
fn epoch_reports_cover_every_issued_proof() {
    let mut n = net(OrderingScheme::Bloom);
    for i in 0..6u64 {
        n.advance_to(100_000 * (i + 1));
        n.visit(&alice(), &cafe(), None, 60_000).unwrap();
    }
    n.advance_to(2_000_000);
    let chain = n.user(&alice()).unwrap().chain.clone();
    assert_eq!(chain.len(), 6);
    for e in &chain.entries {
        let t = e.elp.proof.statement.visit_time();
        let report = n.registry().lookup(&cafe(), t).unwrap();
        assert!(report.contains(&e.elp.proof.digest(Profile::Modern)));
    }
}

#[test]
fn bogus_witness_dropped_by_honest_user() {
    let mut n = net(OrderingScheme::HashChain);
    n.add_witness(PartyId::new("w2"), cafe(), keys(4)).unwrap();
    n.witness_mut(&PartyId::new("w1")).unwrap().behavior.bogus = true;
    n.advance_to(5_000);
    let out = n.visit(&alice(), &cafe(), None, 60_000).unwrap();
    assert!(matches!(out, Some(VisitOutcome::Appended { endorsements: 1, dropped: 1, .. })), "{out:?}");
}

#[test]
fn trace_is_deterministic() {
    let run = || {
        let mut n = net(OrderingScheme::Bloom);
        n.authority_mut(&cafe().authority()).unwrap().granularities = vec!["cafe".into(), "downtown".into()];
        for i in 0..3u64 {
            n.advance_to(50_000 * (i + 1));
            n.visit(&alice(), &cafe(), None, 60_000).unwrap();
        }
        (n.trace_jsonl(), serde_json::to_string(&n.user(&alice()).unwrap().chain).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn fork_branch_verifies_but_splice_does_not() {
    for scheme in OrderingScheme::ALL {
        let mut n = net(scheme);
        for i in 1..=3u64 {
            n.advance_to(100_000 * i);
            n.visit(&alice(), &cafe(), None, 60_000).unwrap();
        }
        n.advance_to(400_000);
        n.fork_visit(&alice(), &cafe(), None, 60_000, 1).unwrap();
        let dir = n.directory().clone();
        let p = n.config.suite.profile;
        let user = n.user(&alice()).unwrap();
        assert_eq!(user.chain.len(), 2);
        assert_eq!(user.abandoned.len(), 2);

        let branch = user.chain.reveal(&alice(), &[Disclosure::new(1), Disclosure::new(2)], p).unwrap();
        assert!(crate::ordering::verify_order(&branch, &dir, p).is_ok(), "{scheme:?}");

        // the dropped visit spliced in ahead of the new branch entry
        let mut spliced = crate::model::ProvenanceChain::new(scheme);
        for e in [&user.chain.entries[0], &user.abandoned[0], &user.chain.entries[1]] {
            spliced.append(e.clone()).unwrap();
        }
        let sub = spliced.reveal(&alice(), &[Disclosure::new(2), Disclosure::new(3)], p).unwrap();
        assert!(!crate::ordering::verify_order(&sub, &dir, p).is_ok(), "{scheme:?}");
    }
}
