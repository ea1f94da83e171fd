use serde::{Deserialize, Serialize};

use crate::crypto::{Digest, Signature};
use crate::model::{Endorsement, LocationId, LocationProof, PartyId};
use crate::ordering::OrderingConstruct;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PReq,
    PResp,
    EReq,
    TReq,
    TResp,
    EResp,
    ProxyReq,
    ProxyResp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refusal {
    pub reason: String,
}

impl Refusal {
    pub fn new(reason: impl Into<String>) -> Self {
        Refusal { reason: reason.into() }
    }
}

/// A signed proof and the ordering construct computed for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofGrant {
    pub proof: LocationProof,
    pub ordering: OrderingConstruct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampGrant {
    pub endorsement_time: u64,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// `prev` is `None` for a user with an empty chain.
    ProofRequest { prev: Option<OrderingConstruct> },
    ProofResponse { result: Result<ProofGrant, Refusal> },
    EndorsementRequest { proof: LocationProof },
    TimestampRequest { location: LocationId, proof_digest: Digest },
    TimestampResponse { proof_digest: Digest, result: Result<TimestampGrant, Refusal> },
    EndorsementResponse { proof_digest: Digest, result: Result<Endorsement, Refusal> },
    ProxyRequest { user: PartyId, proof: LocationProof, prev: Option<OrderingConstruct> },
    ProxyResponse { user: PartyId, result: Result<ProofGrant, Refusal> },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::ProofRequest { .. } => MessageKind::PReq,
            Payload::ProofResponse { .. } => MessageKind::PResp,
            Payload::EndorsementRequest { .. } => MessageKind::EReq,
            Payload::TimestampRequest { .. } => MessageKind::TReq,
            Payload::TimestampResponse { .. } => MessageKind::TResp,
            Payload::EndorsementResponse { .. } => MessageKind::EResp,
            Payload::ProxyRequest { .. } => MessageKind::ProxyReq,
            Payload::ProxyResponse { .. } => MessageKind::ProxyResp,
        }
    }

    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Payload::ProofResponse { result: Err(_) }
                | Payload::TimestampResponse { result: Err(_), .. }
                | Payload::EndorsementResponse { result: Err(_), .. }
                | Payload::ProxyResponse { result: Err(_), .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub deliver_at: u64,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}
