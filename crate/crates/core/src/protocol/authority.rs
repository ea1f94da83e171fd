use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::messages::{Payload, ProofGrant, Refusal, TimestampGrant};
use super::proxy::proxy_resign;
use super::{Ctx, ProtocolConfig};
use crate::crypto::{Digest, KeyPair};
use crate::epoch::{EpochBook, EpochError, EpochReport};
use crate::model::{
    assemble_elp, make_endorsement, make_private_statement, make_proof, make_statement, Endorsement,
    EndorsementStatement, LocationId, LocationProof, PartyId, ProvenanceChain, ProvenanceEntry, Statement,
    TimestampToken,
};
use crate::ordering::hashchain::{chain_extend, chain_genesis};
use crate::ordering::{BloomAccumulator, OrderingConstruct, OrderingScheme};

/// Deviations from honest behavior. The default is honest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthorityBehavior {
    /// Issue proofs without localizing the requester.
    pub skip_localization: bool,
    /// Refuse every proof and timestamp request.
    pub refuse: bool,
    /// Shift `t` and `t_e` away from the local clock while listing the proof
    /// under the epoch it was really issued in.
    pub time_offset_ms: i64,
    /// Stamp proofs this far in the future and hold the digest back until the
    /// epoch containing the stamped time.
    pub post_date_ms: u64,
    /// Timestamp digests this authority never issued.
    pub sign_unknown_timestamps: bool,
}

/// Endorsements an authority collects for a proof it minted in someone else's name.
#[derive(Clone, Debug)]
struct Implication {
    victim: PartyId,
    grant: ProofGrant,
    awaiting: usize,
    endorsements: Vec<Endorsement>,
    witnesses: Vec<PartyId>,
}

pub struct Authority {
    pub id: PartyId,
    pub location: LocationId,
    keys: KeyPair,
    /// Granularity labels committed in each proof, finest first. Empty for plain proofs.
    pub granularities: Vec<String>,
    /// Broader authority that re-signs this authority's proofs.
    pub proxy_via: Option<PartyId>,
    /// Authorities whose proofs this one will re-sign.
    pub trusts: BTreeSet<PartyId>,
    pub skew_ms: i64,
    pub behavior: AuthorityBehavior,
    book: EpochBook,
    /// Digest bytes to local issue time.
    issued: BTreeMap<Vec<u8>, u64>,
    last_te: u64,
    implications: BTreeMap<Vec<u8>, Implication>,
    forged: BTreeMap<PartyId, ProvenanceChain>,
}

fn shift(t: u64, by: i64) -> u64 {
    if by >= 0 {
        t.saturating_add(by as u64)
    } else {
        t.saturating_sub(by.unsigned_abs())
    }
}

impl Authority {
    pub fn new(location: LocationId, keys: KeyPair, config: &ProtocolConfig, start_time: u64, skew_ms: i64) -> Self {
        let local = shift(start_time, skew_ms);
        Authority {
            id: location.authority(),
            book: EpochBook::new(location.clone(), config.epoch, local),
            location,
            keys,
            granularities: Vec::new(),
            proxy_via: None,
            trusts: BTreeSet::new(),
            skew_ms,
            behavior: AuthorityBehavior::default(),
            issued: BTreeMap::new(),
            last_te: 0,
            implications: BTreeMap::new(),
            forged: BTreeMap::new(),
        }
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn local_time(&self, global: u64) -> u64 {
        shift(global, self.skew_ms)
    }

    /// Time written into proofs and timestamps.
    fn stamp(&self, local: u64) -> u64 {
        shift(local, self.behavior.time_offset_ms).saturating_add(self.behavior.post_date_ms)
    }

    pub fn book(&self) -> &EpochBook {
        &self.book
    }

    pub fn has_issued(&self, digest: &Digest) -> bool {
        self.issued.contains_key(digest.as_bytes())
    }

    /// Chains minted in other users' names.
    pub fn forged_chain(&self, victim: &PartyId) -> Option<&ProvenanceChain> {
        self.forged.get(victim)
    }

    pub fn close_due(&mut self, global: u64) -> Result<Vec<EpochReport>, EpochError> {
        let local = self.local_time(global);
        self.book.close_due(local, &self.keys)
    }

    fn statement_for(&self, user: &PartyId, t: u64, ctx: &mut Ctx) -> Result<Statement, Refusal> {
        let refuse = |e: crate::model::ModelError| Refusal::new(e.to_string());
        if self.granularities.is_empty() {
            Ok(Statement::Plain(make_statement(user.clone(), self.location.clone(), t).map_err(refuse)?))
        } else {
            let suite = ctx.config.suite;
            let st = make_private_statement(
                &suite,
                user.clone(),
                self.location.clone(),
                t,
                &self.granularities,
                &mut *ctx.rng,
            )
            .map_err(refuse)?;
            Ok(Statement::Private(st))
        }
    }

    /// Localization and statement construction, steps b and c up to signing.
    fn localize(&self, user: &PartyId, ctx: &mut Ctx) -> Result<Statement, Refusal> {
        if self.behavior.refuse {
            return Err(Refusal::new("authority declines to issue proofs"));
        }
        if !self.behavior.skip_localization && !ctx.oracle.present(user, &self.location, ctx.now) {
            return Err(Refusal::new(format!("{user} not detected at {}", self.location)));
        }
        let t = self.stamp(self.local_time(ctx.now));
        self.statement_for(user, t, ctx)
    }

    fn next_ordering(
        &self,
        lp: &LocationProof,
        prev: Option<&OrderingConstruct>,
        config: &ProtocolConfig,
    ) -> Result<OrderingConstruct, Refusal> {
        match (config.scheme, prev) {
            (OrderingScheme::HashChain, None) => Ok(OrderingConstruct::HashChain(chain_genesis(&self.keys, lp))),
            (OrderingScheme::HashChain, Some(OrderingConstruct::HashChain(p))) => {
                Ok(OrderingConstruct::HashChain(chain_extend(&self.keys, lp, p)))
            }
            (OrderingScheme::Bloom, prev) => {
                let base = match prev {
                    None => BloomAccumulator::new(config.chain_capacity, config.chain_fpr)
                        .map_err(|e| Refusal::new(e.to_string()))?,
                    Some(OrderingConstruct::Bloom(a)) => a.clone(),
                    Some(_) => return Err(Refusal::new("previous construct is not an accumulator")),
                };
                let digest = lp.digest(config.suite.profile);
                Ok(OrderingConstruct::Bloom(base.insert(digest.as_bytes()).sign(&self.keys)))
            }
            (OrderingScheme::HashChain, Some(_)) => Err(Refusal::new("previous construct is not a hash-chain link")),
        }
    }

    /// Computes `C_new` for a proof signed by this authority and lists its digest.
    fn issue(
        &mut self,
        lp: LocationProof,
        prev: Option<&OrderingConstruct>,
        ctx: &Ctx,
    ) -> Result<ProofGrant, Refusal> {
        let ordering = self.next_ordering(&lp, prev, ctx.config)?;
        let digest = lp.digest(ctx.config.suite.profile);
        let local = self.local_time(ctx.now);
        if self.behavior.post_date_ms > 0 {
            let epoch = ctx.config.epoch.epoch_of(lp.statement.visit_time());
            self.book.defer(digest.clone(), epoch);
        } else {
            self.book.record(digest.clone(), local);
        }
        self.issued.insert(digest.0, local);
        Ok(ProofGrant { proof: lp, ordering })
    }

    /// Starts a proof in `victim`'s name without localizing them, and asks
    /// `witnesses` to endorse it.
    pub(super) fn implicate(&mut self, victim: &PartyId, witnesses: &[PartyId], ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        let t = self.stamp(self.local_time(ctx.now));
        let Ok(statement) = self.statement_for(victim, t, ctx) else {
            return Vec::new();
        };
        let lp = make_proof(&self.keys, statement);
        let prev = self.forged.get(victim).and_then(|c| c.latest_ordering()).cloned();
        let Ok(grant) = self.issue(lp, prev.as_ref(), ctx) else {
            return Vec::new();
        };
        let digest = grant.proof.digest(ctx.config.suite.profile);
        let out = witnesses
            .iter()
            .map(|w| (w.clone(), Payload::EndorsementRequest { proof: grant.proof.clone() }))
            .collect();
        let pending = Implication {
            victim: victim.clone(),
            grant,
            awaiting: witnesses.len(),
            endorsements: Vec::new(),
            witnesses: witnesses.to_vec(),
        };
        self.implications.insert(digest.0.clone(), pending);
        if witnesses.is_empty() {
            self.finish_implication(&digest.0, ctx);
        }
        out
    }

    fn finish_implication(&mut self, key: &[u8], ctx: &Ctx) {
        let Some(mut imp) = self.implications.remove(key) else { return };
        if imp.endorsements.is_empty() {
            // no witness cooperated; sign one in a witness's name
            let lp = &imp.grant.proof;
            let witness = imp.witnesses.first().cloned().unwrap_or_else(|| PartyId::new("witness"));
            let te = lp.statement.visit_time() + ctx.config.latency_ms;
            let token = TimestampToken {
                location: self.location.clone(),
                proof_digest: lp.digest(ctx.config.suite.profile),
                endorsement_time: te,
            };
            if let Ok(e) = make_endorsement(&witness, &self.keys, lp, te, token.sign(&self.keys), ctx.config.window_ms)
            {
                imp.endorsements.push(e);
            }
        }
        if let Ok(elp) = assemble_elp(imp.grant.proof, imp.endorsements, ctx.config.suite.profile) {
            let chain = self.forged.entry(imp.victim).or_insert_with(|| ProvenanceChain::new(ctx.config.scheme));
            let _ = chain.append(ProvenanceEntry { elp, ordering: imp.grant.ordering });
        }
    }

    pub(super) fn handle(&mut self, sender: &PartyId, payload: &Payload, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        match payload {
            Payload::ProofRequest { prev } => match self.proxy_via.clone() {
                Some(city) => match self.localize(sender, ctx) {
                    Ok(statement) => {
                        let proof = make_proof(&self.keys, statement);
                        vec![(city, Payload::ProxyRequest { user: sender.clone(), proof, prev: prev.clone() })]
                    }
                    Err(r) => vec![(sender.clone(), Payload::ProofResponse { result: Err(r) })],
                },
                None => {
                    let result = authority_handle_preq(self, sender, prev.as_ref(), ctx);
                    vec![(sender.clone(), Payload::ProofResponse { result })]
                }
            },
            Payload::ProxyRequest { user, proof, prev } => {
                let result = match ctx.directory.authority_key(&LocationId::new(sender.as_str())) {
                    None => Err(Refusal::new(format!("{sender} is not a listed authority"))),
                    Some(block_key) => match proxy_resign(sender, block_key, self, proof) {
                        Err(e) => Err(Refusal::new(e.to_string())),
                        Ok(lp) => self.issue(lp, prev.as_ref(), ctx),
                    },
                };
                vec![(sender.clone(), Payload::ProxyResponse { user: user.clone(), result })]
            }
            Payload::ProxyResponse { user, result } => {
                vec![(user.clone(), Payload::ProofResponse { result: result.clone() })]
            }
            Payload::TimestampRequest { location, proof_digest } => {
                let result = authority_timestamp(self, location, proof_digest, ctx);
                vec![(sender.clone(), Payload::TimestampResponse { proof_digest: proof_digest.clone(), result })]
            }
            Payload::EndorsementResponse { proof_digest, result } => {
                let key = proof_digest.as_bytes().to_vec();
                if let Some(imp) = self.implications.get_mut(&key) {
                    imp.awaiting = imp.awaiting.saturating_sub(1);
                    if let Ok(e) = result {
                        imp.endorsements.push(e.clone());
                    }
                    if imp.awaiting == 0 {
                        self.finish_implication(&key, ctx);
                    }
                }
                Vec::new()
            }
            _ => Vec::new(),
        }
    }
}

/// Steps b and c: localize the requester, sign the statement, compute `C_new`
/// from the supplied `C_prev`, and list `h(LP)` for the current epoch.
pub fn authority_handle_preq(
    auth: &mut Authority,
    user: &PartyId,
    prev: Option<&OrderingConstruct>,
    ctx: &mut Ctx,
) -> Result<ProofGrant, Refusal> {
    let statement = auth.localize(user, ctx)?;
    let lp = make_proof(&auth.keys, statement);
    auth.issue(lp, prev, ctx)
}

/// A signed endorsement time for a proof this authority issued
/// within the last `timestamp_lag_ms`.
pub fn authority_timestamp(
    auth: &mut Authority,
    location: &LocationId,
    proof_digest: &Digest,
    ctx: &Ctx,
) -> Result<TimestampGrant, Refusal> {
    if auth.behavior.refuse {
        return Err(Refusal::new("authority declines to timestamp"));
    }
    if location != &auth.location {
        return Err(Refusal::new(format!("{location} is not served by {}", auth.id)));
    }
    let local = auth.local_time(ctx.now);
    match auth.issued.get(proof_digest.as_bytes()) {
        None if !auth.behavior.sign_unknown_timestamps => {
            return Err(Refusal::new("no such proof was issued here"));
        }
        Some(&issued_at) if local.saturating_sub(issued_at) > ctx.config.timestamp_lag_ms => {
            return Err(Refusal::new(format!("request arrived {} ms after issue", local - issued_at)));
        }
        _ => {}
    }
    let te = auth.stamp(local).max(auth.last_te);
    auth.last_te = te;
    let token = TimestampToken { location: location.clone(), proof_digest: proof_digest.clone(), endorsement_time: te };
    Ok(TimestampGrant { endorsement_time: te, signature: token.sign(&auth.keys) })
}

/// An endorsement statement with an arbitrary signer, for forging paths.
pub(super) fn raw_endorsement(
    witness: &PartyId,
    signer: &KeyPair,
    lp: &LocationProof,
    te: u64,
    time_sig: crate::crypto::Signature,
    profile: crate::crypto::Profile,
) -> Endorsement {
    use crate::encoding::Canonical;
    let statement = EndorsementStatement {
        witness: witness.clone(),
        user: lp.statement.user().clone(),
        location: lp.statement.location().clone(),
        visit_time: lp.statement.visit_time(),
        proof_digest: lp.digest(profile),
        endorsement_time: te,
    };
    let witness_sig = signer.sign(&statement.encode());
    Endorsement { statement, witness_sig, authority_time_sig: time_sig }
}
