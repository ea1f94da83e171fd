//! Signed hash chain: `C_i = s_L(h(LP_i) | C_{i-1})`.
//!
//! The first link signs against a 20-byte zero sentinel. Each link is signed
//! by the authority of the location in entry `i`. Auditing a subsequence needs
//! `(C_i, h(LP_i))` for every position up to the last revealed one, so the
//! cost grows with that position rather than with the number of entries shown.

use serde::{Deserialize, Serialize};

use super::{OrderingStatus, OrderingVerdict};
use crate::crypto::{Digest, KeyPair, Profile, PublicKey, Signature};
use crate::directory::Directory;
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder, Tag};
use crate::model::{LocationProof, RevealedSubsequence};
use crate::ordering::OrderingConstruct;

/// Stand-in for `C_0`.
pub const GENESIS_SENTINEL: [u8; 20] = [0; 20];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashChainLink {
    pub link_sig: Signature,
}

impl Canonical for HashChainLink {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::HashChainLink);
        enc.bytes(self.link_sig.as_bytes());
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::HashChainLink)?;
        let link = HashChainLink { link_sig: Signature(dec.bytes()?.to_vec()) };
        dec.finish()?;
        Ok(link)
    }
}

/// Exact bytes signed for a link: `h(LP_i)` and `encode(C_{i-1})`, each
/// length-prefixed. `None` selects the genesis sentinel.
pub fn link_payload(proof_digest: &Digest, prev: Option<&HashChainLink>) -> Vec<u8> {
    let mut enc = Encoder::new(Tag::LinkPayload);
    enc.bytes(proof_digest.as_bytes());
    match prev {
        Some(link) => enc.bytes(&link.encode()),
        None => enc.bytes(&GENESIS_SENTINEL),
    };
    enc.finish()
}

pub fn chain_genesis(authority: &KeyPair, lp: &LocationProof) -> HashChainLink {
    let digest = lp.digest(authority.profile());
    HashChainLink { link_sig: authority.sign(&link_payload(&digest, None)) }
}

pub fn chain_extend(authority: &KeyPair, lp: &LocationProof, prev: &HashChainLink) -> HashChainLink {
    let digest = lp.digest(authority.profile());
    HashChainLink { link_sig: authority.sign(&link_payload(&digest, Some(prev))) }
}

/// Genesis when `prev` is `None`, extension otherwise.
pub fn chain_next(authority: &KeyPair, lp: &LocationProof, prev: Option<&HashChainLink>) -> HashChainLink {
    match prev {
        Some(p) => chain_extend(authority, lp, p),
        None => chain_genesis(authority, lp),
    }
}

pub fn verify_link(
    authority: &PublicKey,
    link: &HashChainLink,
    proof_digest: &Digest,
    prev: Option<&HashChainLink>,
) -> bool {
    authority.verify(&link_payload(proof_digest, prev), &link.link_sig)
}

/// Checks a hash-chain subsequence against the directory.
///
/// Revealed links are checked under the authority of their own location.
/// Hidden links carry no location, so every authority in the directory is
/// tried, starting with the one that signed the previous link.
pub fn verify_subsequence(sub: &RevealedSubsequence, directory: &Directory, profile: Profile) -> OrderingVerdict {
    let mut verdict = OrderingVerdict::new();
    let last = sub.last_position();
    if sub.link_slots.len() < last {
        let missing = sub.link_slots.len() + 1;
        return verdict.fail(OrderingStatus::Incomplete, Some(missing), format!("no link for position {missing}"));
    }

    // Bind each revealed entry to its slot before spending signature checks.
    for r in &sub.entries {
        let slot = &sub.link_slots[r.position - 1];
        if r.entry.elp.proof.digest(profile) != slot.proof_digest {
            return verdict.fail(OrderingStatus::Forged, Some(r.position), "revealed proof does not match its chain slot");
        }
        match &r.entry.ordering {
            OrderingConstruct::HashChain(l) if *l == slot.link => {}
            _ => {
                return verdict.fail(OrderingStatus::Forged, Some(r.position), "entry link differs from its chain slot")
            }
        }
    }

    let authorities: Vec<&PublicKey> = directory.authorities().map(|(_, k)| k).collect();
    let mut last_signer: Option<&PublicKey> = None;
    for (idx, slot) in sub.link_slots[..last].iter().enumerate() {
        let position = idx + 1;
        let prev = idx.checked_sub(1).map(|p| &sub.link_slots[p].link);
        verdict.links_checked += 1;
        let revealed = sub.entries.iter().find(|r| r.position == position);
        let ok = match revealed {
            Some(r) => match directory.authority_key(r.entry.elp.proof.statement.location()) {
                Some(key) => {
                    verdict.signatures_verified += 1;
                    let ok = verify_link(key, &slot.link, &slot.proof_digest, prev);
                    if ok {
                        last_signer = Some(key);
                    }
                    ok
                }
                None => false,
            },
            None => {
                let order = last_signer.into_iter().chain(authorities.iter().copied().filter(|k| Some(*k) != last_signer));
                let mut found = None;
                for key in order {
                    verdict.signatures_verified += 1;
                    if verify_link(key, &slot.link, &slot.proof_digest, prev) {
                        found = Some(key);
                        break;
                    }
                }
                if found.is_some() {
                    last_signer = found;
                }
                found.is_some()
            }
        };
        if !ok {
            return verdict.fail(OrderingStatus::Forged, Some(position), format!("link {position} does not verify"));
        }
    }

    for pair in sub.entries.windows(2) {
        if pair[0].position >= pair[1].position {
            return verdict.fail(
                OrderingStatus::Reordered,
                Some(pair[1].position),
                format!("position {} presented after position {}", pair[1].position, pair[0].position),
            );
        }
    }
    verdict
}
