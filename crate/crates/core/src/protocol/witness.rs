use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::authority::raw_endorsement;
use super::messages::{Payload, Refusal, TimestampGrant};
use super::{Authority, Ctx};
use crate::crypto::{Digest, KeyPair, Signature};
use crate::model::{make_endorsement, Endorsement, LocationId, LocationProof, PartyId, TimestampToken};

/// Deviations from honest behavior. The default is honest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessBehavior {
    /// Endorse without checking that the user is nearby.
    pub skip_localization: bool,
    /// Accept any endorsement time.
    pub skip_window: bool,
    pub refuse: bool,
    /// Sign a timestamp itself when the authority will not.
    pub forge_timestamp: bool,
    /// Return endorsements with garbage signatures.
    pub bogus: bool,
}

pub struct Witness {
    pub id: PartyId,
    /// Where the witness is stationed.
    pub location: LocationId,
    keys: KeyPair,
    pub behavior: WitnessBehavior,
    /// Digest bytes to the requester and proof awaiting a timestamp.
    pending: BTreeMap<Vec<u8>, (PartyId, LocationProof)>,
}

impl Witness {
    pub fn new(id: PartyId, location: LocationId, keys: KeyPair) -> Self {
        Witness { id, location, keys, behavior: WitnessBehavior::default(), pending: BTreeMap::new() }
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    /// Steps e and f: localize the user, then ask the authority for `t_e`.
    fn on_request(&mut self, sender: &PartyId, lp: &LocationProof, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        let digest = lp.digest(ctx.config.suite.profile);
        let refuse = |reason: String| {
            vec![(
                sender.clone(),
                Payload::EndorsementResponse { proof_digest: digest.clone(), result: Err(Refusal::new(reason)) },
            )]
        };
        if self.behavior.refuse {
            return refuse("witness declines to endorse".into());
        }
        let user = lp.statement.user();
        if !self.behavior.skip_localization && !ctx.oracle.co_located(user, &self.id, ctx.now) {
            return refuse(format!("{user} is not near {}", self.id));
        }
        let location = lp.statement.location().clone();
        self.pending.insert(digest.0.clone(), (sender.clone(), lp.clone()));
        vec![(location.authority(), Payload::TimestampRequest { location, proof_digest: digest })]
    }

    /// Accept `t_e` if it is inside the window, then sign.
    fn on_timestamp(
        &mut self,
        digest: &Digest,
        result: &Result<TimestampGrant, Refusal>,
        ctx: &mut Ctx,
    ) -> Vec<(PartyId, Payload)> {
        let Some((requester, lp)) = self.pending.remove(digest.as_bytes()) else {
            return Vec::new();
        };
        let result = self.endorse(&lp, result, ctx);
        vec![(requester, Payload::EndorsementResponse { proof_digest: digest.clone(), result })]
    }

    fn endorse(
        &self,
        lp: &LocationProof,
        grant: &Result<TimestampGrant, Refusal>,
        ctx: &mut Ctx,
    ) -> Result<Endorsement, Refusal> {
        let profile = ctx.config.suite.profile;
        let grant = match grant {
            Ok(g) => g.clone(),
            Err(_) if self.behavior.forge_timestamp => {
                let te = lp.statement.visit_time() + ctx.config.latency_ms;
                let token = TimestampToken {
                    location: lp.statement.location().clone(),
                    proof_digest: lp.digest(profile),
                    endorsement_time: te,
                };
                TimestampGrant { endorsement_time: te, signature: token.sign(&self.keys) }
            }
            Err(r) => return Err(Refusal::new(format!("no timestamp: {}", r.reason))),
        };
        if self.behavior.bogus {
            let mut junk = vec![0u8; profile.signature_len()];
            ctx.rng.fill_bytes(&mut junk);
            let mut e = raw_endorsement(&self.id, &self.keys, lp, grant.endorsement_time, grant.signature, profile);
            e.witness_sig = Signature(junk);
            return Ok(e);
        }
        let token = TimestampToken {
            location: lp.statement.location().clone(),
            proof_digest: lp.digest(profile),
            endorsement_time: grant.endorsement_time,
        };
        let authority_ok = ctx
            .directory
            .authority_key(lp.statement.location())
            .is_some_and(|k| k.verify(&token.encode(), &grant.signature));
        if !authority_ok && !self.behavior.forge_timestamp {
            return Err(Refusal::new("timestamp signature does not verify"));
        }
        let window = if self.behavior.skip_window { u64::MAX } else { ctx.config.window_ms };
        make_endorsement(&self.id, &self.keys, lp, grant.endorsement_time, grant.signature, window)
            .map_err(|e| Refusal::new(e.to_string()))
    }

    pub(super) fn handle(&mut self, sender: &PartyId, payload: &Payload, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        match payload {
            Payload::EndorsementRequest { proof } => self.on_request(sender, proof, ctx),
            Payload::TimestampResponse { proof_digest, result } => self.on_timestamp(proof_digest, result, ctx),
            _ => Vec::new(),
        }
    }
}

/// Steps e through h run back to back against a local authority, without a network.
pub fn witness_handle_ereq(
    witness: &mut Witness,
    user: &PartyId,
    lp: &LocationProof,
    authority: &mut Authority,
    ctx: &mut Ctx,
) -> Result<Endorsement, Refusal> {
    let out = witness.on_request(user, lp, ctx);
    match out.into_iter().next() {
        Some((_, Payload::TimestampRequest { location, proof_digest })) => {
            let grant = super::authority_timestamp(authority, &location, &proof_digest, ctx);
            witness.pending.remove(proof_digest.as_bytes());
            witness.endorse(lp, &grant, ctx)
        }
        Some((_, Payload::EndorsementResponse { result, .. })) => result,
        _ => Err(Refusal::new("unexpected witness state")),
    }
}
