use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{LocationId, ModelError, PartyId};
use crate::crypto::{Commitment, Digest, KeyPair, Nonce, Profile, PublicKey, Signature, Suite};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder, Tag};

/// `LS = <U, L, t>`; `visit_time` is the issuing authority's local clock in ms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationStatement {
    pub user: PartyId,
    pub location: LocationId,
    pub visit_time: u64,
}

pub fn make_statement(user: PartyId, location: LocationId, visit_time: u64) -> Result<LocationStatement, ModelError> {
    if user.0.is_empty() {
        return Err(ModelError::EmptyField("user id"));
    }
    if location.0.is_empty() {
        return Err(ModelError::EmptyField("location id"));
    }
    Ok(LocationStatement { user, location, visit_time })
}

/// Opening `(l_i, r_i)` of one granularity commitment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub value: String,
    pub nonce: Nonce,
}

/// Blinded statement: the signature covers the commitments only, so any
/// subset of openings can be withheld without invalidating it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateLocationStatement {
    pub user: PartyId,
    pub location: LocationId,
    pub visit_time: u64,
    pub commitments: Vec<Commitment>,
    /// Held by the user; `None` once withheld from a disclosure.
    pub openings: Vec<Option<Opening>>,
}

pub fn make_private_statement<R: RngCore + ?Sized>(
    suite: &Suite,
    user: PartyId,
    location: LocationId,
    visit_time: u64,
    granularities: &[String],
    rng: &mut R,
) -> Result<PrivateLocationStatement, ModelError> {
    let base = make_statement(user, location, visit_time)?;
    if granularities.is_empty() {
        return Err(ModelError::NoGranularities);
    }
    let mut commitments = Vec::with_capacity(granularities.len());
    let mut openings = Vec::with_capacity(granularities.len());
    for value in granularities {
        let nonce = suite.random_nonce(rng);
        commitments.push(suite.commit(value.as_bytes(), &nonce)?);
        openings.push(Some(Opening { value: value.clone(), nonce }));
    }
    Ok(PrivateLocationStatement {
        user: base.user,
        location: base.location,
        visit_time: base.visit_time,
        commitments,
        openings,
    })
}

impl PrivateLocationStatement {
    pub fn granularity_count(&self) -> usize {
        self.commitments.len()
    }

    /// Returns the opening of granularity `index` (0-based).
    pub fn reveal_granularity(&self, index: usize) -> Result<&Opening, ModelError> {
        if index >= self.commitments.len() {
            return Err(ModelError::GranularityIndex { index, len: self.commitments.len() });
        }
        self.openings
            .get(index)
            .and_then(Option::as_ref)
            .ok_or(ModelError::Undisclosed { index })
    }

    /// Copy keeping only the openings whose indices are listed.
    pub fn disclose(&self, keep: &[usize]) -> Result<Self, ModelError> {
        let mut out = self.clone();
        for (i, slot) in out.openings.iter_mut().enumerate() {
            if !keep.contains(&i) {
                *slot = None;
            }
        }
        for &i in keep {
            self.reveal_granularity(i)?;
        }
        Ok(out)
    }

    pub fn without_openings(&self) -> Self {
        let mut out = self.clone();
        out.openings.iter_mut().for_each(|o| *o = None);
        out
    }

    /// Indices whose disclosed opening matches its commitment.
    pub fn verified_openings(&self, suite: &Suite) -> Vec<(usize, &Opening, bool)> {
        self.openings
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.as_ref().map(|o| (i, o)))
            .map(|(i, o)| {
                let ok = self
                    .commitments
                    .get(i)
                    .is_some_and(|c| suite.verify_commitment(c, o.value.as_bytes(), &o.nonce));
                (i, o, ok)
            })
            .collect()
    }

    /// Bytes the blinded statement occupies apart from the plaintext
    /// granularity labels: the signed encoding plus every held nonce.
    pub fn blinded_footprint(&self) -> usize {
        let nonces: usize = self.openings.iter().flatten().map(|o| o.nonce.0.len()).sum();
        Statement::Private(self.clone()).encode().len() + nonces
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statement {
    Plain(LocationStatement),
    Private(PrivateLocationStatement),
}

impl Statement {
    pub fn user(&self) -> &PartyId {
        match self {
            Statement::Plain(s) => &s.user,
            Statement::Private(s) => &s.user,
        }
    }

    pub fn location(&self) -> &LocationId {
        match self {
            Statement::Plain(s) => &s.location,
            Statement::Private(s) => &s.location,
        }
    }

    pub fn visit_time(&self) -> u64 {
        match self {
            Statement::Plain(s) => s.visit_time,
            Statement::Private(s) => s.visit_time,
        }
    }

    pub fn as_private(&self) -> Option<&PrivateLocationStatement> {
        match self {
            Statement::Private(s) => Some(s),
            Statement::Plain(_) => None,
        }
    }

    /// Same statement naming a different location (used by proxy re-signing).
    pub fn with_location(&self, location: LocationId) -> Statement {
        let mut out = self.clone();
        match &mut out {
            Statement::Plain(s) => s.location = location,
            Statement::Private(s) => s.location = location,
        }
        out
    }
}

impl Canonical for Statement {
    fn encode(&self) -> Vec<u8> {
        match self {
            Statement::Plain(s) => {
                let mut enc = Encoder::new(Tag::Statement);
                enc.str(&s.user.0).str(&s.location.0).u64(s.visit_time);
                enc.finish()
            }
            Statement::Private(s) => {
                // Commitments are one field: element width byte then the
                // concatenation, so each granularity adds exactly one digest.
                let width = s.commitments.first().map_or(0, |c| c.0.len());
                let mut body = Vec::with_capacity(1 + width * s.commitments.len());
                body.push(width as u8);
                for c in &s.commitments {
                    body.extend_from_slice(c.0.as_bytes());
                }
                let mut enc = Encoder::new(Tag::PrivateStatement);
                enc.str(&s.user.0).str(&s.location.0).u64(s.visit_time).bytes(&body);
                enc.finish()
            }
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        match bytes.first() {
            Some(&t) if t == Tag::Statement as u8 => {
                let mut dec = Decoder::new(bytes, Tag::Statement)?;
                let s = LocationStatement {
                    user: PartyId(dec.string()?),
                    location: LocationId(dec.string()?),
                    visit_time: dec.u64()?,
                };
                dec.finish()?;
                Ok(Statement::Plain(s))
            }
            Some(&t) if t == Tag::PrivateStatement as u8 => {
                let mut dec = Decoder::new(bytes, Tag::PrivateStatement)?;
                let user = PartyId(dec.string()?);
                let location = LocationId(dec.string()?);
                let visit_time = dec.u64()?;
                let body = dec.bytes()?;
                dec.finish()?;
                let (&width, rest) = body.split_first().ok_or(DecodeError::Truncated)?;
                let width = width as usize;
                if width == 0 || rest.is_empty() || rest.len() % width != 0 {
                    return Err(DecodeError::Invalid("commitment list"));
                }
                let commitments: Vec<_> = rest.chunks(width).map(|c| Commitment(Digest(c.to_vec()))).collect();
                let openings = vec![None; commitments.len()];
                Ok(Statement::Private(PrivateLocationStatement { user, location, visit_time, commitments, openings }))
            }
            Some(&found) => Err(DecodeError::WrongTag { expected: Tag::Statement as u8, found }),
            None => Err(DecodeError::Truncated),
        }
    }
}

/// `LP = <LS, s_L(LS)>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationProof {
    pub statement: Statement,
    pub authority_sig: Signature,
}

pub fn make_proof(authority: &KeyPair, statement: Statement) -> LocationProof {
    let authority_sig = authority.sign(&statement.encode());
    LocationProof { statement, authority_sig }
}

impl LocationProof {
    pub fn verify(&self, authority: &PublicKey) -> bool {
        authority.verify(&self.statement.encode(), &self.authority_sig)
    }

    /// `h(LP)`. Openings are not part of the encoding, so withholding them
    /// leaves the digest unchanged.
    pub fn digest(&self, profile: Profile) -> Digest {
        profile.digest(&self.encode())
    }
}

impl Canonical for LocationProof {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::Proof);
        enc.nested(&self.statement).bytes(self.authority_sig.as_bytes());
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::Proof)?;
        let statement = dec.nested()?;
        let authority_sig = Signature(dec.bytes()?.to_vec());
        dec.finish()?;
        Ok(LocationProof { statement, authority_sig })
    }
}
