use serde::{Deserialize, Serialize};

use super::authority::raw_endorsement;
use super::messages::{Payload, ProofGrant, Refusal};
use super::{Ctx, ProtocolError};
use crate::crypto::{KeyPair, PublicKey};
use crate::directory::{Directory, Role};
use crate::model::{
    assemble_elp, make_proof, make_statement, Endorsement, EndorsedLocationProof, LocationId, LocationProof,
    PartyId, ProvenanceChain, ProvenanceEntry, Statement, TimestampToken,
};
use crate::ordering::hashchain::chain_next;
use crate::ordering::{BloomAccumulator, OrderingConstruct, OrderingScheme};

/// Deviations from honest behavior. The default is honest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserBehavior {
    /// Sign an endorsement itself when no witness provides one.
    pub fabricate_endorsements: bool,
    /// Keep endorsements without checking them.
    pub accept_any_endorsement: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VisitOutcome {
    Appended { location: LocationId, position: usize, endorsements: usize, dropped: usize },
    Refused { location: LocationId, reason: String },
    Unendorsed { location: LocationId },
}

#[derive(Clone, Debug)]
struct PendingVisit {
    grant: ProofGrant,
    witnesses: Vec<PartyId>,
    awaiting: usize,
    endorsements: Vec<Endorsement>,
    dropped: usize,
}

pub struct User {
    pub id: PartyId,
    keys: KeyPair,
    pub chain: ProvenanceChain,
    /// Entries cut off by forking the chain, oldest first.
    pub abandoned: Vec<ProvenanceEntry>,
    pub behavior: UserBehavior,
    requested: Option<(LocationId, Vec<PartyId>)>,
    pending: Option<PendingVisit>,
    pub outcomes: Vec<VisitOutcome>,
}

/// Proof request `pReq` carrying the latest ordering construct, or none for an empty chain.
pub fn user_request_proof(user: &User, authority: &PartyId, directory: &Directory) -> Result<Payload, ProtocolError> {
    if directory.role(authority) != Some(Role::Authority) {
        return Err(ProtocolError::UnknownAuthority(authority.clone()));
    }
    Ok(Payload::ProofRequest { prev: user.chain.latest_ordering().cloned() })
}

/// Endorsement request `eReq` carrying the proof.
pub fn user_request_endorsement(
    lp: &LocationProof,
    witness: &PartyId,
    directory: &Directory,
) -> Result<Payload, ProtocolError> {
    if directory.role(witness) != Some(Role::Witness) {
        return Err(ProtocolError::UnknownWitness(witness.clone()));
    }
    Ok(Payload::EndorsementRequest { proof: lp.clone() })
}

/// Final step: store `<ELP, C_new>`.
pub fn user_append_entry(
    user: &mut User,
    elp: EndorsedLocationProof,
    ordering: OrderingConstruct,
) -> Result<usize, ProtocolError> {
    user.chain.append(ProvenanceEntry { elp, ordering })?;
    Ok(user.chain.len())
}

/// What an honest user checks before keeping an endorsement.
pub fn endorsement_acceptable(e: &Endorsement, lp: &LocationProof, ctx: &Ctx) -> bool {
    let witness_ok = ctx
        .directory
        .get(&e.statement.witness)
        .is_some_and(|w| w.role == Role::Witness && e.verify_witness(&w.key));
    let time_ok = ctx.directory.authority_key(lp.statement.location()).is_some_and(|k| e.verify_timestamp(k));
    witness_ok
        && time_ok
        && e.statement.proof_digest == lp.digest(ctx.config.suite.profile)
        && e.fields_match(lp)
        && e.within_window(ctx.config.window_ms)
}

impl User {
    pub fn new(id: PartyId, keys: KeyPair, scheme: OrderingScheme) -> Self {
        User {
            id,
            keys,
            chain: ProvenanceChain::new(scheme),
            abandoned: Vec::new(),
            behavior: UserBehavior::default(),
            requested: None,
            pending: None,
            outcomes: Vec::new(),
        }
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    pub fn public(&self) -> &PublicKey {
        self.keys.public()
    }

    pub fn is_busy(&self) -> bool {
        self.requested.is_some() || self.pending.is_some()
    }

    pub(super) fn start_visit(
        &mut self,
        location: &LocationId,
        witnesses: Vec<PartyId>,
        directory: &Directory,
    ) -> Result<Vec<(PartyId, Payload)>, ProtocolError> {
        let authority = location.authority();
        let req = user_request_proof(self, &authority, directory)?;
        self.requested = Some((location.clone(), witnesses));
        Ok(vec![(authority, req)])
    }

    /// Builds a proof and ordering construct with the user's own key, as if an
    /// authority had issued them, and asks `witnesses` to endorse it.
    pub(super) fn start_forged_visit(
        &mut self,
        location: &LocationId,
        witnesses: Vec<PartyId>,
        ctx: &mut Ctx,
    ) -> Result<Vec<(PartyId, Payload)>, ProtocolError> {
        let st = make_statement(self.id.clone(), location.clone(), ctx.now)?;
        let lp = make_proof(&self.keys, Statement::Plain(st));
        let prev = self.chain.latest_ordering();
        let ordering = match (self.chain.scheme, prev) {
            (OrderingScheme::HashChain, Some(OrderingConstruct::HashChain(p))) => {
                OrderingConstruct::HashChain(chain_next(&self.keys, &lp, Some(p)))
            }
            (OrderingScheme::HashChain, _) => OrderingConstruct::HashChain(chain_next(&self.keys, &lp, None)),
            (OrderingScheme::Bloom, prev) => {
                let base = match prev {
                    Some(OrderingConstruct::Bloom(a)) => a.clone(),
                    _ => BloomAccumulator::new(ctx.config.chain_capacity, ctx.config.chain_fpr)?,
                };
                let d = lp.digest(ctx.config.suite.profile);
                OrderingConstruct::Bloom(base.insert(d.as_bytes()).sign(&self.keys))
            }
        };
        Ok(self.begin_endorsement(ProofGrant { proof: lp, ordering }, witnesses, ctx))
    }

    fn begin_endorsement(&mut self, grant: ProofGrant, witnesses: Vec<PartyId>, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        let out: Vec<_> = witnesses
            .iter()
            .filter_map(|w| user_request_endorsement(&grant.proof, w, ctx.directory).ok().map(|p| (w.clone(), p)))
            .collect();
        self.pending =
            Some(PendingVisit { grant, awaiting: out.len(), witnesses, endorsements: Vec::new(), dropped: 0 });
        if out.is_empty() {
            self.finish(ctx);
        }
        out
    }

    fn on_proof(&mut self, result: &Result<ProofGrant, Refusal>, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        let Some((location, witnesses)) = self.requested.take() else {
            return Vec::new();
        };
        let grant = match result {
            Err(r) => {
                self.outcomes.push(VisitOutcome::Refused { location, reason: r.reason.clone() });
                return Vec::new();
            }
            Ok(g) => g,
        };
        let issuer_ok = ctx.directory.authority_key(grant.proof.statement.location()).is_some_and(|k| grant.proof.verify(k));
        if !issuer_ok || grant.ordering.scheme() != self.chain.scheme || grant.proof.statement.user() != &self.id {
            self.outcomes.push(VisitOutcome::Refused { location, reason: "authority returned an unusable proof".into() });
            return Vec::new();
        }
        self.begin_endorsement(grant.clone(), witnesses, ctx)
    }

    fn on_endorsement(&mut self, result: &Result<Endorsement, Refusal>, ctx: &mut Ctx) {
        let accept_any = self.behavior.accept_any_endorsement;
        let Some(p) = self.pending.as_mut() else { return };
        p.awaiting = p.awaiting.saturating_sub(1);
        if let Ok(e) = result {
            if accept_any || endorsement_acceptable(e, &p.grant.proof, ctx) {
                p.endorsements.push(e.clone());
            } else {
                p.dropped += 1;
            }
        }
        if p.awaiting == 0 {
            self.finish(ctx);
        }
    }

    fn finish(&mut self, ctx: &mut Ctx) {
        let Some(mut p) = self.pending.take() else { return };
        let location = p.grant.proof.statement.location().clone();
        if p.endorsements.is_empty() && self.behavior.fabricate_endorsements {
            let lp = &p.grant.proof;
            let witness = p.witnesses.first().cloned().unwrap_or_else(|| PartyId::new("witness"));
            let te = lp.statement.visit_time() + ctx.config.latency_ms;
            let profile = ctx.config.suite.profile;
            let token = TimestampToken { location: location.clone(), proof_digest: lp.digest(profile), endorsement_time: te };
            p.endorsements.push(raw_endorsement(&witness, &self.keys, lp, te, token.sign(&self.keys), profile));
        }
        if p.endorsements.is_empty() {
            self.outcomes.push(VisitOutcome::Unendorsed { location });
            return;
        }
        let count = p.endorsements.len();
        let appended = assemble_elp(p.grant.proof, p.endorsements, ctx.config.suite.profile)
            .map_err(ProtocolError::from)
            .and_then(|elp| user_append_entry(self, elp, p.grant.ordering));
        match appended {
            Ok(position) => self.outcomes.push(VisitOutcome::Appended {
                location,
                position,
                endorsements: count,
                dropped: p.dropped,
            }),
            Err(e) => self.outcomes.push(VisitOutcome::Refused { location, reason: e.to_string() }),
        }
    }

    pub(super) fn handle(&mut self, payload: &Payload, ctx: &mut Ctx) -> Vec<(PartyId, Payload)> {
        match payload {
            Payload::ProofResponse { result } => self.on_proof(result, ctx),
            Payload::EndorsementResponse { result, .. } => {
                self.on_endorsement(result, ctx);
                Vec::new()
            }
            _ => Vec::new(),
        }
    }
}
