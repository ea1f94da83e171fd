//! The entry-creation protocol between user, location authority and witness,
//! driven as message-passing state machines over a simulated network.
//!
//! ```text
//! U -> L   pReq(C_prev)
//! L        localize U, sign LP, compute C_new, list h(LP) for the epoch
//! L -> U   pResp(LP, C_new)
//! U -> W   eReq(LP)
//! W        localize U
//! W -> L   tReq(h(LP))
//! L -> W   tResp(t_e, s_L(t_e))
//! W        check t <= t_e <= t + window, sign ES
//! W -> U   eResp(E)
//! U        append <ELP, C_new>
//! ```
//!
//! Block-level authorities can route through a broader authority with
//! `proxyReq`/`proxyResp`, which re-signs the proof under its own identity.

mod authority;
mod messages;
mod network;
mod oracle;
mod proxy;
mod user;
mod witness;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Suite;
use crate::epoch::{EpochConfig, EpochError};
use crate::model::{ModelError, PartyId};
use crate::ordering::{BloomError, OrderingScheme};

pub use authority::{authority_handle_preq, authority_timestamp, Authority, AuthorityBehavior};
pub use messages::{Message, MessageKind, Payload, ProofGrant, Refusal, TimestampGrant};
pub use network::{Network, TraceEvent};
pub use oracle::{LocalizationOracle, ScheduleOracle, Stay};
pub use proxy::proxy_resign;
pub use user::{user_append_entry, user_request_endorsement, user_request_proof, User, UserBehavior, VisitOutcome};
pub use witness::{witness_handle_ereq, Witness, WitnessBehavior};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub suite: Suite,
    pub scheme: OrderingScheme,
    pub window_ms: u64,
    pub timestamp_lag_ms: u64,
    pub epoch: EpochConfig,
    pub chain_capacity: u64,
    pub chain_fpr: f64,
    pub latency_ms: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            suite: Suite::default(),
            scheme: OrderingScheme::HashChain,
            window_ms: 60_000,
            timestamp_lag_ms: 30_000,
            epoch: EpochConfig::default(),
            chain_capacity: 1000,
            chain_fpr: 0.001,
            latency_ms: 50,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("{0} is not a known location authority")]
    UnknownAuthority(PartyId),
    #[error("{0} is not a known witness")]
    UnknownWitness(PartyId),
    #[error("{0} is not a known user")]
    UnknownUser(PartyId),
    #[error("party id {0} is already registered")]
    DuplicateParty(PartyId),
    #[error("refused: {0}")]
    Refused(String),
    #[error("proxy authority does not trust {0}")]
    Untrusted(PartyId),
    #[error("proof does not verify under the issuing authority's key")]
    BadProof,
    #[error("ordering construct does not match the chain scheme")]
    SchemeMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Epoch(#[from] EpochError),
    #[error(transparent)]
    Bloom(#[from] BloomError),
}

/// What a role handler sees of the world while processing one message.
pub struct Ctx<'a> {
    /// Global simulated time in ms.
    pub now: u64,
    pub config: &'a ProtocolConfig,
    pub directory: &'a crate::directory::Directory,
    pub oracle: &'a dyn LocalizationOracle,
    pub rng: &'a mut dyn rand::RngCore,
}

#[cfg(test)]
mod tests;
