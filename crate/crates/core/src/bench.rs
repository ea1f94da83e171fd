//! Workload builders for the space, audit-cost and throughput measurements.
//! Counters are exact; wall-clock figures are informational only.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{audit, AuditConfig, AuditReport, LocationClaim};
use crate::crypto::{KeyPair, Profile};
use crate::directory::{Directory, Role};
use crate::model::{
    assemble_elp, make_endorsement, make_proof, make_statement, LinkSlot, LocationId, ModelError, PartyId,
    ProvenanceEntry, RevealedEntry, RevealedSubsequence, Statement, TimestampToken,
};
use crate::ordering::hashchain::chain_next;
use crate::ordering::{BloomAccumulator, BloomError, HashChainLink, OrderingConstruct, OrderingScheme};
use crate::sim::party_keys;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Bloom(#[from] BloomError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceRow {
    pub n: u64,
    pub hashchain_bytes_per_entry: usize,
    pub bloom_bytes_per_entry: usize,
}

/// `1, 2, 5, 10, 20, 50, ...` up to `max_n`, always ending at `max_n`.
pub fn space_points(max_n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for f in [1, 2, 5] {
            let n = decade.saturating_mul(f);
            if n > max_n {
                break 'outer;
            }
            out.push(n);
        }
        decade = decade.saturating_mul(10);
    }
    if out.last() != Some(&max_n) && max_n > 0 {
        out.push(max_n);
    }
    out
}

/// Ordering metadata per entry: one link signature for the hash chain, one
/// filter sized for the whole chain for the Bloom scheme.
pub fn space_table(profile: Profile, max_n: u64, fpr: f64) -> Result<Vec<SpaceRow>, BenchError> {
    let keys = party_keys(profile, 0, "space");
    let lp = make_proof(&keys, Statement::Plain(make_statement(PartyId::new("u"), LocationId::new("l"), 0)?));
    let link = OrderingConstruct::HashChain(chain_next(&keys, &lp, None));
    space_points(max_n)
        .into_iter()
        .map(|n| {
            Ok(SpaceRow {
                n,
                hashchain_bytes_per_entry: link.metadata_len(),
                bloom_bytes_per_entry: BloomAccumulator::new(n, fpr)?.byte_len(),
            })
        })
        .collect()
}

/// First, last, and evenly spaced positions in between: `max(2, round(n * pct / 100))`
/// of them, capped at `n`.
pub fn reveal_positions(n: usize, pct: f64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let count = ((n as f64 * pct / 100.0).round() as usize).max(2).min(n);
    if count == 1 {
        return vec![1];
    }
    (0..count).map(|i| 1 + ((i * (n - 1)) as f64 / (count - 1) as f64).round() as usize).collect()
}

/// An audit input built directly, without the network: an honest chain of
/// `n` proofs from one authority, of which only `positions` carry
/// endorsements and signed accumulators.
pub struct AuditFixture {
    pub sub: RevealedSubsequence,
    pub claims: Vec<LocationClaim>,
    pub directory: Directory,
    pub config: AuditConfig,
}

pub fn audit_fixture(
    scheme: OrderingScheme,
    profile: Profile,
    n: usize,
    positions: &[usize],
    seed: u64,
) -> Result<AuditFixture, BenchError> {
    if positions.iter().any(|&p| p == 0 || p > n) || positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Invalid("positions must be increasing and within 1..=n".into()));
    }
    let location = LocationId::new("cafe");
    let authority = party_keys(profile, seed, "cafe");
    let witness_id = PartyId::new("w1");
    let witness = party_keys(profile, seed, "w1");
    let holder = PartyId::new("alice");
    let user = party_keys(profile, seed, "alice");
    let mut directory = Directory::new();
    directory.insert(location.authority(), Role::Authority, authority.public().clone());
    directory.insert(witness_id.clone(), Role::Witness, witness.public().clone());
    directory.insert(holder.clone(), Role::User, user.public().clone());
    let config = AuditConfig::for_profile(profile);

    let mut entries = Vec::with_capacity(positions.len());
    let mut claims = Vec::with_capacity(positions.len());
    let mut slots = Vec::new();
    let mut link: Option<HashChainLink> = None;
    let mut acc = match scheme {
        OrderingScheme::Bloom => Some(BloomAccumulator::new(n as u64, 0.001)?),
        OrderingScheme::HashChain => None,
    };
    let mut next = positions.iter().peekable();
    for i in 1..=n {
        let t = 1_000 * i as u64;
        let lp = make_proof(&authority, Statement::Plain(make_statement(holder.clone(), location.clone(), t)?));
        let digest = lp.digest(profile);
        let revealed = next.peek() == Some(&&i);
        let ordering = match scheme {
            OrderingScheme::HashChain => {
                let l = chain_next(&authority, &lp, link.as_ref());
                slots.push(LinkSlot { link: l.clone(), proof_digest: digest.clone() });
                link = Some(l.clone());
                OrderingConstruct::HashChain(l)
            }
            OrderingScheme::Bloom => {
                let a = acc.as_mut().expect("bloom scheme keeps an accumulator");
                a.add(digest.as_bytes());
                if !revealed {
                    continue;
                }
                OrderingConstruct::Bloom(a.clone().sign(&authority))
            }
        };
        if !revealed {
            continue;
        }
        next.next();
        let te = t + 50;
        let token = TimestampToken { location: location.clone(), proof_digest: digest, endorsement_time: te };
        let e = make_endorsement(&witness_id, &witness, &lp, te, token.sign(&authority), config.window_ms)?;
        let elp = assemble_elp(lp, vec![e], profile)?;
        entries.push(RevealedEntry { position: i, entry: ProvenanceEntry { elp, ordering } });
        claims.push(LocationClaim { location: location.clone(), time: t });
    }
    let last = positions.last().copied().unwrap_or(0);
    slots.truncate(last);
    let sub = RevealedSubsequence { scheme, holder, entries, link_slots: slots, holder_sig: None }.seal(&user);
    Ok(AuditFixture { sub, claims, directory, config })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditBenchRow {
    pub scheme: OrderingScheme,
    pub n: usize,
    pub pct: f64,
    pub revealed: usize,
    /// Links walked for the hash chain, accumulators checked for Bloom.
    pub ops_count: usize,
    pub signatures_verified: usize,
    pub wall_ms: f64,
}

pub fn bench_audit(
    scheme: OrderingScheme,
    profile: Profile,
    n: usize,
    pct: f64,
    seed: u64,
) -> Result<(AuditBenchRow, AuditReport), BenchError> {
    let positions = reveal_positions(n, pct);
    let fx = audit_fixture(scheme, profile, n, &positions, seed)?;
    let start = Instant::now();
    let report = audit(&fx.claims, &fx.sub, &fx.directory, None, &fx.config);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let ops_count = match scheme {
        OrderingScheme::HashChain => report.links_checked(),
        OrderingScheme::Bloom => report.accumulators_checked(),
    };
    let row = AuditBenchRow {
        scheme,
        n,
        pct,
        revealed: positions.len(),
        ops_count,
        signatures_verified: report.signatures_verified,
        wall_ms,
    };
    Ok((row, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofGenRow {
    pub scheme: OrderingScheme,
    pub profile: Profile,
    pub proofs: usize,
    pub seconds: f64,
    pub per_second: f64,
}

/// Authority-side cost of issuing `count` consecutive proofs to one user:
/// statement, signature, and the next ordering construct.
pub fn bench_proofgen(
    scheme: OrderingScheme,
    profile: Profile,
    count: usize,
    seed: u64,
) -> Result<ProofGenRow, BenchError> {
    let authority: KeyPair = party_keys(profile, seed, "cafe");
    let user = PartyId::new("alice");
    let location = LocationId::new("cafe");
    let mut prev: Option<OrderingConstruct> = None;
    let capacity = (count as u64).max(1);
    let start = Instant::now();
    for i in 0..count {
        let lp = make_proof(&authority, Statement::Plain(make_statement(user.clone(), location.clone(), i as u64)?));
        let next = match (scheme, prev.take()) {
            (OrderingScheme::HashChain, Some(OrderingConstruct::HashChain(p))) => {
                OrderingConstruct::HashChain(chain_next(&authority, &lp, Some(&p)))
            }
            (OrderingScheme::HashChain, _) => OrderingConstruct::HashChain(chain_next(&authority, &lp, None)),
            (OrderingScheme::Bloom, p) => {
                let mut acc = match p {
                    Some(OrderingConstruct::Bloom(a)) => a,
                    _ => BloomAccumulator::new(capacity, 0.001)?,
                };
                acc.add(lp.digest(profile).as_bytes());
                OrderingConstruct::Bloom(acc.sign(&authority))
            }
        };
        prev = Some(next);
    }
    let seconds = start.elapsed().as_secs_f64();
    let per_second = if seconds > 0.0 { count as f64 / seconds } else { f64::INFINITY };
    Ok(ProofGenRow { scheme, profile, proofs: count, seconds, per_second })
}
