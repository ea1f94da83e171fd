//! Location statements, proofs, endorsements and provenance chains.
//!
//! All signed and hashed bytes come from [`Canonical::encode`](crate::encoding::Canonical);
//! JSON (with base64 byte fields) is only used for interchange.

mod chain;
mod endorsement;
mod statement;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{CryptoError, PublicKey};

pub use chain::{Disclosure, LinkSlot, ProvenanceChain, ProvenanceEntry, RevealedEntry, RevealedSubsequence};
pub use endorsement::{
    assemble_elp, make_endorsement, EndorsedLocationProof, Endorsement, EndorsementStatement, TimestampToken,
};
pub use statement::{
    make_private_statement, make_proof, make_statement, LocationProof, LocationStatement, Opening,
    PrivateLocationStatement, Statement,
};

/// Identifier of a user, witness or location authority. Users default to a
/// public-key fingerprint (`pk:<hex>`), see [`PartyId::for_key`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub String);

impl PartyId {
    pub fn new(id: impl Into<String>) -> Self {
        PartyId(id.into())
    }

    pub fn for_key(key: &PublicKey) -> Self {
        PartyId(format!("pk:{}", key.fingerprint()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Globally unique location identifier. A location authority is addressed by
/// the identifier of the location it covers.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub String);

impl LocationId {
    pub fn new(id: impl Into<String>) -> Self {
        LocationId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The party id of the authority responsible for this location.
    pub fn authority(&self) -> PartyId {
        PartyId(self.0.clone())
    }
}

impl fmt::Debug for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("a private statement needs at least one granularity")]
    NoGranularities,
    #[error("granularity index {index} out of range (statement has {len})")]
    GranularityIndex { index: usize, len: usize },
    #[error("granularity {index} was not disclosed")]
    Undisclosed { index: usize },
    #[error("endorsement time {endorsement_time} precedes visit time {visit_time}")]
    EndorsementBeforeVisit { visit_time: u64, endorsement_time: u64 },
    #[error("endorsement time {endorsement_time} is more than {window_ms} ms after visit time {visit_time}")]
    EndorsementOutsideWindow { visit_time: u64, endorsement_time: u64, window_ms: u64 },
    #[error("an endorsed proof needs at least one endorsement")]
    NoEndorsements,
    #[error("endorsement {index} is bound to a different proof digest")]
    ProofDigestMismatch { index: usize },
    #[error("endorsement {index} names a different user, location or visit time")]
    FieldMismatch { index: usize },
    #[error("entry ordering is {found:?} but the chain uses {expected:?}")]
    SchemeMismatch { expected: crate::ordering::OrderingScheme, found: crate::ordering::OrderingScheme },
    #[error("position {0} is not in the chain")]
    Position(usize),
    #[error("revealed positions must be distinct")]
    DuplicatePosition,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
