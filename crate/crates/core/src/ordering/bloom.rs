//! Bloom-filter accumulator ordering.
//!
//! Sizing: `m = ceil(n · ln(1/p) / ln²2)`, `k = round(m/n · ln 2)`.
//!
//! Indexing uses double hashing. For an item `x` let
//! `h1 = be_u64(SHA-256(x | "A")[0..8])` and `h2 = be_u64(SHA-256(x | "B")[0..8])`.
//! The `i`-th position is `(h1 + i·h2) mod m`, computed without overflow.
//! The hash is SHA-256 under every signature profile so filters built by
//! different deployments agree bit for bit.
//!
//! Bit `j` lives in byte `j / 8` at bit `j % 8`, least significant first.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{OrderingStatus, OrderingVerdict};
use crate::b64;
use crate::crypto::{KeyPair, Profile, PublicKey, Signature};
use crate::directory::Directory;
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder, Tag};
use crate::model::RevealedSubsequence;
use crate::ordering::OrderingConstruct;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BloomError {
    #[error("capacity must be at least 1")]
    Capacity,
    #[error("false-positive rate must lie strictly between 0 and 1, got {0}")]
    Rate(f64),
    #[error("filters have different parameters")]
    ParameterMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BloomAccumulator {
    pub m: u64,
    pub k: u32,
    pub capacity: u64,
    pub fpr: f64,
    #[serde(with = "b64")]
    pub bits: Vec<u8>,
    /// Insert count, unsigned. Used only to flag over-capacity filters.
    pub inserted: u64,
    #[serde(default)]
    pub authority_sig: Option<Signature>,
}

/// `(m, k)` for a capacity and target false-positive rate.
pub fn bloom_params(capacity: u64, fpr: f64) -> Result<(u64, u32), BloomError> {
    if capacity == 0 {
        return Err(BloomError::Capacity);
    }
    if !(fpr > 0.0 && fpr < 1.0) {
        return Err(BloomError::Rate(fpr));
    }
    let ln2 = std::f64::consts::LN_2;
    let m = (capacity as f64 * (1.0 / fpr).ln() / (ln2 * ln2)).ceil().max(1.0) as u64;
    let k = ((m as f64 / capacity as f64) * ln2).round().max(1.0) as u32;
    Ok((m, k))
}

fn word(item: &[u8], salt: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(item);
    h.update(salt);
    let out = h.finalize();
    u64::from_be_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Position of the `i`-th hash of `item` in a filter of `m` bits.
pub fn bloom_index(item: &[u8], i: u32, m: u64) -> u64 {
    let h1 = word(item, b"A") as u128;
    let h2 = word(item, b"B") as u128;
    ((h1 + i as u128 * h2) % m as u128) as u64
}

impl BloomAccumulator {
    pub fn new(capacity: u64, fpr: f64) -> Result<Self, BloomError> {
        let (m, k) = bloom_params(capacity, fpr)?;
        Ok(BloomAccumulator {
            m,
            k,
            capacity,
            fpr,
            bits: vec![0; m.div_ceil(8) as usize],
            inserted: 0,
            authority_sig: None,
        })
    }

    pub fn byte_len(&self) -> usize {
        self.bits.len()
    }

    fn positions<'a>(&self, item: &'a [u8]) -> impl Iterator<Item = u64> + 'a {
        let m = self.m;
        let h1 = word(item, b"A") as u128;
        let h2 = word(item, b"B") as u128;
        (0..self.k).map(move |i| ((h1 + i as u128 * h2) % m as u128) as u64)
    }

    fn bit(&self, j: u64) -> bool {
        self.bits[(j / 8) as usize] & (1 << (j % 8)) != 0
    }

    /// Returns the filter with `item` added and the signature cleared.
    pub fn insert(&self, item: &[u8]) -> Self {
        let mut next = self.clone();
        next.add(item);
        next
    }

    /// In-place form of [`insert`](Self::insert).
    pub fn add(&mut self, item: &[u8]) {
        let positions: Vec<u64> = self.positions(item).collect();
        for j in positions {
            self.bits[(j / 8) as usize] |= 1 << (j % 8);
        }
        self.inserted += 1;
        self.authority_sig = None;
    }

    pub fn contains(&self, item: &[u8]) -> bool {
        self.positions(item).all(|j| self.bit(j))
    }

    fn same_params(&self, other: &Self) -> bool {
        self.m == other.m
            && self.k == other.k
            && self.capacity == other.capacity
            && self.fpr.to_bits() == other.fpr.to_bits()
            && self.bits.len() == other.bits.len()
    }

    /// `A AND B == A`.
    pub fn is_subset_of(&self, other: &Self) -> Result<bool, BloomError> {
        if !self.same_params(other) {
            return Err(BloomError::ParameterMismatch);
        }
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| a & b == *a))
    }

    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|b| b.count_ones()).sum()
    }

    pub fn over_capacity(&self) -> bool {
        self.inserted > self.capacity
    }

    /// Bytes covered by the authority signature.
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::AccumulatorPayload);
        enc.bytes(&self.bits).u64(self.k as u64).u64(self.capacity).f64(self.fpr);
        enc.finish()
    }

    pub fn sign(mut self, authority: &KeyPair) -> Self {
        self.authority_sig = Some(authority.sign(&self.signing_payload()));
        self
    }

    pub fn verify_signature(&self, authority: &PublicKey) -> bool {
        self.authority_sig.as_ref().is_some_and(|s| authority.verify(&self.signing_payload(), s))
    }
}

impl Canonical for BloomAccumulator {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::BloomAccumulator);
        enc.bytes(&self.bits)
            .u64(self.k as u64)
            .u64(self.capacity)
            .f64(self.fpr)
            .u64(self.inserted)
            .opt_bytes(self.authority_sig.as_ref().map(|s| s.as_bytes()));
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::BloomAccumulator)?;
        let bits = dec.bytes()?.to_vec();
        let k = dec.u64()?;
        let capacity = dec.u64()?;
        let fpr = dec.f64()?;
        let inserted = dec.u64()?;
        let authority_sig = dec.opt_bytes()?.map(|s| Signature(s.to_vec()));
        dec.finish()?;
        let (m, expected_k) = bloom_params(capacity, fpr).map_err(|_| DecodeError::Invalid("bloom parameters"))?;
        if k != expected_k as u64 || bits.len() as u64 != m.div_ceil(8) {
            return Err(DecodeError::Invalid("bloom geometry"));
        }
        Ok(BloomAccumulator { m, k: expected_k, capacity, fpr, bits, inserted, authority_sig })
    }
}

/// Checks a Bloom subsequence. Only the revealed entries are examined.
pub fn bloom_order_verify(sub: &RevealedSubsequence, directory: &Directory, profile: Profile) -> OrderingVerdict {
    let mut verdict = OrderingVerdict::new();
    let mut prev: Option<&BloomAccumulator> = None;
    let mut seen = std::collections::HashSet::new();
    for (idx, r) in sub.entries.iter().enumerate() {
        let at = Some(idx + 1);
        let OrderingConstruct::Bloom(acc) = &r.entry.ordering else {
            return verdict.fail(OrderingStatus::Incomplete, at, "entry carries no accumulator");
        };
        verdict.accumulators_checked += 1;
        let Some(key) = directory.authority_key(r.entry.elp.proof.statement.location()) else {
            return verdict.fail(OrderingStatus::Forged, at, "no authority key for entry location");
        };
        verdict.signatures_verified += 1;
        if !acc.verify_signature(key) {
            return verdict.fail(OrderingStatus::Forged, at, "accumulator signature does not verify");
        }
        let digest = r.entry.elp.proof.digest(profile);
        if !seen.insert(digest.as_bytes().to_vec()) {
            return verdict.fail(OrderingStatus::Reordered, at, "proof presented twice");
        }
        if !acc.contains(digest.as_bytes()) {
            return verdict.fail(OrderingStatus::Forged, at, "proof digest missing from its own accumulator");
        }
        if let Some(p) = prev {
            match p.is_subset_of(acc) {
                Err(_) => return verdict.fail(OrderingStatus::Forged, at, "accumulator parameters differ"),
                Ok(false) => return verdict.fail(OrderingStatus::Reordered, at, "previous accumulator is not a subset"),
                // equal images with distinct proofs: the later insert was a false positive
                Ok(true) => {}
            }
        }
        prev = Some(acc);
    }
    verdict
}
