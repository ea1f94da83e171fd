use serde::{Deserialize, Serialize};

use super::{EndorsedLocationProof, ModelError, PartyId, Statement};
use crate::crypto::{Digest, KeyPair, Profile, PublicKey, Signature};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder, Tag};
use crate::ordering::{HashChainLink, OrderingConstruct, OrderingScheme};

/// `LProv = <ELP, C>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub elp: EndorsedLocationProof,
    pub ordering: OrderingConstruct,
}

impl Canonical for ProvenanceEntry {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::ProvenanceEntry);
        enc.nested(&self.elp).nested(&self.ordering);
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::ProvenanceEntry)?;
        let entry = ProvenanceEntry { elp: dec.nested()?, ordering: dec.nested()? };
        dec.finish()?;
        Ok(entry)
    }
}

/// `LPC = <LProv_1, ..., LProv_n>`, held by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceChain {
    pub scheme: OrderingScheme,
    pub entries: Vec<ProvenanceEntry>,
}

/// Which entry to reveal and which of its granularity openings (0-based) to keep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    /// 1-based chain position.
    pub position: usize,
    #[serde(default)]
    pub open: Vec<usize>,
}

impl Disclosure {
    pub fn new(position: usize) -> Self {
        Disclosure { position, open: Vec::new() }
    }

    pub fn opening(position: usize, open: impl IntoIterator<Item = usize>) -> Self {
        Disclosure { position, open: open.into_iter().collect() }
    }
}

impl ProvenanceChain {
    pub fn new(scheme: OrderingScheme) -> Self {
        ProvenanceChain { scheme, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latest_ordering(&self) -> Option<&OrderingConstruct> {
        self.entries.last().map(|e| &e.ordering)
    }

    pub fn append(&mut self, entry: ProvenanceEntry) -> Result<(), ModelError> {
        let found = entry.ordering.scheme();
        if found != self.scheme {
            return Err(ModelError::SchemeMismatch { expected: self.scheme, found });
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Builds the subsequence shown to an auditor, in the order given. Hidden
    /// entries contribute nothing except, for the hash-chain scheme, their
    /// `(C_i, h(LP_i))` slot up to the last revealed position.
    pub fn reveal(
        &self,
        holder: &PartyId,
        disclosures: &[Disclosure],
        profile: Profile,
    ) -> Result<RevealedSubsequence, ModelError> {
        let mut seen = Vec::with_capacity(disclosures.len());
        let mut entries = Vec::with_capacity(disclosures.len());
        for d in disclosures {
            if d.position == 0 || d.position > self.entries.len() {
                return Err(ModelError::Position(d.position));
            }
            if seen.contains(&d.position) {
                return Err(ModelError::DuplicatePosition);
            }
            seen.push(d.position);
            let mut entry = self.entries[d.position - 1].clone();
            entry.elp.proof.statement = match &entry.elp.proof.statement {
                Statement::Private(s) => Statement::Private(s.disclose(&d.open)?),
                plain => plain.clone(),
            };
            entries.push(RevealedEntry { position: d.position, entry });
        }
        let link_slots = match self.scheme {
            OrderingScheme::Bloom => Vec::new(),
            OrderingScheme::HashChain => {
                let last = seen.iter().copied().max().unwrap_or(0);
                self.entries[..last]
                    .iter()
                    .map(|e| LinkSlot {
                        link: match &e.ordering {
                            OrderingConstruct::HashChain(l) => l.clone(),
                            OrderingConstruct::Bloom(_) => unreachable!("append enforces the chain scheme"),
                        },
                        proof_digest: e.elp.proof.digest(profile),
                    })
                    .collect()
            }
        };
        Ok(RevealedSubsequence { scheme: self.scheme, holder: holder.clone(), entries, link_slots, holder_sig: None })
    }
}

/// `(C_i, h(LP_i))` for one hash-chain position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSlot {
    pub link: HashChainLink,
    pub proof_digest: Digest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealedEntry {
    /// 1-based position in the holder's chain.
    pub position: usize,
    pub entry: ProvenanceEntry,
}

/// What the holder presents to an auditor. Entries appear in the claimed
/// chronological order. The holder signs the presentation, so only the
/// owner of the user identity can present a chain in that identity's name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealedSubsequence {
    pub scheme: OrderingScheme,
    pub holder: PartyId,
    pub entries: Vec<RevealedEntry>,
    #[serde(default)]
    pub link_slots: Vec<LinkSlot>,
    #[serde(default)]
    pub holder_sig: Option<Signature>,
}

impl RevealedSubsequence {
    /// Bytes covered by the holder signature.
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::Presentation);
        enc.str(self.scheme.name())
            .str(&self.holder.0)
            .list(self.entries.iter(), |r| {
                let mut e = Encoder::new(Tag::ProvenanceEntry);
                e.u64(r.position as u64).nested(&r.entry);
                e.finish()
            })
            .list(self.link_slots.iter(), |s| {
                let mut e = Encoder::new(Tag::HashChainLink);
                e.nested(&s.link).bytes(s.proof_digest.as_bytes());
                e.finish()
            });
        enc.finish()
    }

    pub fn seal(mut self, holder_keys: &KeyPair) -> Self {
        self.holder_sig = Some(holder_keys.sign(&self.signing_payload()));
        self
    }

    pub fn verify_holder(&self, holder_key: &PublicKey) -> bool {
        self.holder_sig.as_ref().is_some_and(|sig| holder_key.verify(&self.signing_payload(), sig))
    }

    pub fn last_position(&self) -> usize {
        self.entries.iter().map(|r| r.position).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_proof, make_statement, LocationId, Statement};
    use crate::ordering::BloomAccumulator;

    fn entry(keys: &KeyPair, ordering: OrderingConstruct) -> ProvenanceEntry {
        let lp = make_proof(keys, Statement::Plain(make_statement(PartyId::new("u"), LocationId::new("l"), 1).unwrap()));
        ProvenanceEntry { elp: EndorsedLocationProof { proof: lp, endorsements: vec![] }, ordering }
    }

    #[test]
    fn append_enforces_scheme() {
        let keys = Profile::Modern.keygen(&[1; 32]);
        let mut chain = ProvenanceChain::new(OrderingScheme::HashChain);
        chain.append(entry(&keys, OrderingConstruct::HashChain(HashChainLink { link_sig: Signature(vec![0; 64]) }))).unwrap();
        assert_eq!(chain.len(), 1);
        let bloom = OrderingConstruct::Bloom(BloomAccumulator::new(10, 0.01).unwrap());
        assert_eq!(
            chain.append(entry(&keys, bloom)),
            Err(ModelError::SchemeMismatch { expected: OrderingScheme::HashChain, found: OrderingScheme::Bloom })
        );
    }

    #[test]
    fn reveal_rejects_bad_positions() {
        let keys = Profile::Modern.keygen(&[1; 32]);
        let mut chain = ProvenanceChain::new(OrderingScheme::HashChain);
        for _ in 0..3 {
            chain
                .append(entry(&keys, OrderingConstruct::HashChain(HashChainLink { link_sig: Signature(vec![0; 64]) })))
                .unwrap();
        }
        let u = PartyId::new("u");
        assert_eq!(chain.reveal(&u, &[Disclosure::new(0)], Profile::Modern), Err(ModelError::Position(0)));
        assert_eq!(chain.reveal(&u, &[Disclosure::new(4)], Profile::Modern), Err(ModelError::Position(4)));
        assert_eq!(
            chain.reveal(&u, &[Disclosure::new(2), Disclosure::new(2)], Profile::Modern),
            Err(ModelError::DuplicatePosition)
        );
        let sub = chain.reveal(&u, &[Disclosure::new(2)], Profile::Modern).unwrap();
        assert_eq!(sub.link_slots.len(), 2);
    }

    #[test]
    fn holder_signature_covers_presentation() {
        let keys = Profile::Modern.keygen(&[1; 32]);
        let holder = Profile::Modern.keygen(&[2; 32]);
        let mut chain = ProvenanceChain::new(OrderingScheme::HashChain);
        chain.append(entry(&keys, OrderingConstruct::HashChain(HashChainLink { link_sig: Signature(vec![0; 64]) }))).unwrap();
        let sub = chain.reveal(&PartyId::new("u"), &[Disclosure::new(1)], Profile::Modern).unwrap().seal(&holder);
        assert!(sub.verify_holder(holder.public()));
        assert!(!sub.verify_holder(keys.public()));
        let mut moved = sub.clone();
        moved.entries[0].position = 2;
        assert!(!moved.verify_holder(holder.public()));
    }
}
