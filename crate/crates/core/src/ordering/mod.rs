//! Chronological ordering constructs `C`.
//!
//! Two interchangeable schemes:
//!
//! * [`hashchain`]: each entry carries the authority's signature over
//!   `h(LP_i) | C_{i-1}`. Auditing a subsequence walks every link up to the
//!   last revealed position.
//! * [`bloom`]: each entry carries a signed Bloom filter holding the digests
//!   of every proof so far. Order between two revealed entries is a subset
//!   test, so auditing touches only the revealed entries.

pub mod bloom;
pub mod hashchain;

use serde::{Deserialize, Serialize};

use crate::encoding::{Canonical, DecodeError, Tag};

pub use bloom::{BloomAccumulator, BloomError};
pub use hashchain::HashChainLink;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingScheme {
    #[default]
    HashChain,
    Bloom,
}

impl OrderingScheme {
    pub const ALL: [OrderingScheme; 2] = [OrderingScheme::HashChain, OrderingScheme::Bloom];

    pub const fn name(self) -> &'static str {
        match self {
            OrderingScheme::HashChain => "hashchain",
            OrderingScheme::Bloom => "bloom",
        }
    }
}

impl std::fmt::Display for OrderingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OrderingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hashchain" | "hash-chain" => Ok(OrderingScheme::HashChain),
            "bloom" => Ok(OrderingScheme::Bloom),
            other => Err(format!("unknown ordering scheme `{other}` (expected hashchain or bloom)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum OrderingConstruct {
    HashChain(HashChainLink),
    Bloom(BloomAccumulator),
}

impl OrderingConstruct {
    pub fn scheme(&self) -> OrderingScheme {
        match self {
            OrderingConstruct::HashChain(_) => OrderingScheme::HashChain,
            OrderingConstruct::Bloom(_) => OrderingScheme::Bloom,
        }
    }

    /// Bytes this construct adds to each provenance entry.
    pub fn metadata_len(&self) -> usize {
        match self {
            OrderingConstruct::HashChain(l) => l.link_sig.len(),
            OrderingConstruct::Bloom(b) => b.byte_len(),
        }
    }
}

impl Canonical for OrderingConstruct {
    fn encode(&self) -> Vec<u8> {
        match self {
            OrderingConstruct::HashChain(l) => l.encode(),
            OrderingConstruct::Bloom(b) => b.encode(),
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        match bytes.first() {
            Some(&t) if t == Tag::HashChainLink as u8 => Ok(OrderingConstruct::HashChain(HashChainLink::decode(bytes)?)),
            Some(&t) if t == Tag::BloomAccumulator as u8 => Ok(OrderingConstruct::Bloom(BloomAccumulator::decode(bytes)?)),
            Some(&found) => Err(DecodeError::WrongTag { expected: Tag::HashChainLink as u8, found }),
            None => Err(DecodeError::Truncated),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingStatus {
    Ok,
    /// Presented order contradicts the ordering metadata.
    Reordered,
    /// Metadata needed to check the order is missing.
    Incomplete,
    /// Ordering metadata fails its signature, or does not bind the proof it accompanies.
    Forged,
}

/// Result of checking the order of a revealed subsequence, with the work counters
/// that drive the audit cost comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingVerdict {
    pub status: OrderingStatus,
    /// 1-based chain position (hash chain) or presentation index + 1 (Bloom) of the first failure.
    pub position: Option<usize>,
    pub detail: Option<String>,
    pub links_checked: usize,
    pub accumulators_checked: usize,
    pub signatures_verified: usize,
}

impl OrderingVerdict {
    fn new() -> Self {
        OrderingVerdict {
            status: OrderingStatus::Ok,
            position: None,
            detail: None,
            links_checked: 0,
            accumulators_checked: 0,
            signatures_verified: 0,
        }
    }

    fn fail(mut self, status: OrderingStatus, position: Option<usize>, detail: impl Into<String>) -> Self {
        self.status = status;
        self.position = position;
        self.detail = Some(detail.into());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == OrderingStatus::Ok
    }
}

/// Verifies the order of a subsequence with the scheme it declares.
pub fn verify_order(
    sub: &crate::model::RevealedSubsequence,
    directory: &crate::directory::Directory,
    profile: crate::crypto::Profile,
) -> OrderingVerdict {
    match sub.scheme {
        OrderingScheme::HashChain => hashchain::verify_subsequence(sub, directory, profile),
        OrderingScheme::Bloom => bloom::bloom_order_verify(sub, directory, profile),
    }
}
