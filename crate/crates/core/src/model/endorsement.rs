use serde::{Deserialize, Serialize};

use super::{LocationId, LocationProof, ModelError, PartyId};
use crate::crypto::{Digest, KeyPair, Profile, PublicKey, Signature};
use crate::encoding::{Canonical, DecodeError, Decoder, Encoder, Tag};

/// `ES = <w, U, L, t, h(LP), t_e>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsementStatement {
    pub witness: PartyId,
    pub user: PartyId,
    pub location: LocationId,
    pub visit_time: u64,
    pub proof_digest: Digest,
    pub endorsement_time: u64,
}

impl Canonical for EndorsementStatement {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::EndorsementStatement);
        enc.str(&self.witness.0)
            .str(&self.user.0)
            .str(&self.location.0)
            .u64(self.visit_time)
            .bytes(self.proof_digest.as_bytes())
            .u64(self.endorsement_time);
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::EndorsementStatement)?;
        let es = EndorsementStatement {
            witness: PartyId(dec.string()?),
            user: PartyId(dec.string()?),
            location: LocationId(dec.string()?),
            visit_time: dec.u64()?,
            proof_digest: Digest(dec.bytes()?.to_vec()),
            endorsement_time: dec.u64()?,
        };
        dec.finish()?;
        Ok(es)
    }
}

/// What the authority signs when it timestamps an endorsement: the endorsement
/// time bound to the location and the proof being endorsed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampToken {
    pub location: LocationId,
    pub proof_digest: Digest,
    pub endorsement_time: u64,
}

impl TimestampToken {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::TimestampToken);
        enc.str(&self.location.0).bytes(self.proof_digest.as_bytes()).u64(self.endorsement_time);
        enc.finish()
    }

    pub fn sign(&self, authority: &KeyPair) -> Signature {
        authority.sign(&self.encode())
    }
}

/// `E = <ES, S_w(ES)>`, carrying the authority's signature on `t_e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endorsement {
    pub statement: EndorsementStatement,
    pub witness_sig: Signature,
    pub authority_time_sig: Signature,
}

impl Endorsement {
    pub fn verify_witness(&self, witness: &PublicKey) -> bool {
        witness.verify(&self.statement.encode(), &self.witness_sig)
    }

    pub fn timestamp_token(&self) -> TimestampToken {
        TimestampToken {
            location: self.statement.location.clone(),
            proof_digest: self.statement.proof_digest.clone(),
            endorsement_time: self.statement.endorsement_time,
        }
    }

    pub fn verify_timestamp(&self, authority: &PublicKey) -> bool {
        authority.verify(&self.timestamp_token().encode(), &self.authority_time_sig)
    }

    /// Whether `(U, L, t)` agree with the proof.
    pub fn fields_match(&self, lp: &LocationProof) -> bool {
        let es = &self.statement;
        &es.user == lp.statement.user()
            && &es.location == lp.statement.location()
            && es.visit_time == lp.statement.visit_time()
    }

    pub fn within_window(&self, window_ms: u64) -> bool {
        let (t, te) = (self.statement.visit_time, self.statement.endorsement_time);
        te >= t && te - t <= window_ms
    }
}

impl Canonical for Endorsement {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::Endorsement);
        enc.nested(&self.statement).bytes(self.witness_sig.as_bytes()).bytes(self.authority_time_sig.as_bytes());
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::Endorsement)?;
        let e = Endorsement {
            statement: dec.nested()?,
            witness_sig: Signature(dec.bytes()?.to_vec()),
            authority_time_sig: Signature(dec.bytes()?.to_vec()),
        };
        dec.finish()?;
        Ok(e)
    }
}

/// Witness side of endorsement: copies `(U, L, t)` from the proof, binds
/// `h(LP)` and signs. Fails if `t_e` is before the visit or beyond the window.
pub fn make_endorsement(
    witness: &PartyId,
    witness_keys: &KeyPair,
    lp: &LocationProof,
    endorsement_time: u64,
    authority_time_sig: Signature,
    window_ms: u64,
) -> Result<Endorsement, ModelError> {
    let visit_time = lp.statement.visit_time();
    if endorsement_time < visit_time {
        return Err(ModelError::EndorsementBeforeVisit { visit_time, endorsement_time });
    }
    if endorsement_time - visit_time > window_ms {
        return Err(ModelError::EndorsementOutsideWindow { visit_time, endorsement_time, window_ms });
    }
    let statement = EndorsementStatement {
        witness: witness.clone(),
        user: lp.statement.user().clone(),
        location: lp.statement.location().clone(),
        visit_time,
        proof_digest: lp.digest(witness_keys.profile()),
        endorsement_time,
    };
    let witness_sig = witness_keys.sign(&statement.encode());
    Ok(Endorsement { statement, witness_sig, authority_time_sig })
}

/// `ELP = <LP, E+>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsedLocationProof {
    pub proof: LocationProof,
    pub endorsements: Vec<Endorsement>,
}

pub fn assemble_elp(
    proof: LocationProof,
    endorsements: Vec<Endorsement>,
    profile: Profile,
) -> Result<EndorsedLocationProof, ModelError> {
    if endorsements.is_empty() {
        return Err(ModelError::NoEndorsements);
    }
    let digest = proof.digest(profile);
    for (index, e) in endorsements.iter().enumerate() {
        if e.statement.proof_digest != digest {
            return Err(ModelError::ProofDigestMismatch { index });
        }
        if !e.fields_match(&proof) {
            return Err(ModelError::FieldMismatch { index });
        }
    }
    Ok(EndorsedLocationProof { proof, endorsements })
}

impl Canonical for EndorsedLocationProof {
    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::EndorsedProof);
        enc.nested(&self.proof).list(self.endorsements.iter(), Canonical::encode);
        enc.finish()
    }

    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut dec = Decoder::new(bytes, Tag::EndorsedProof)?;
        let proof = dec.nested()?;
        let endorsements = dec.list(Endorsement::decode)?;
        dec.finish()?;
        Ok(EndorsedLocationProof { proof, endorsements })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_proof, make_statement, Statement};

    fn setup() -> (KeyPair, KeyPair, LocationProof) {
        let authority = Profile::Modern.keygen(&[1; 32]);
        let witness = Profile::Modern.keygen(&[2; 32]);
        let lp = make_proof(
            &authority,
            Statement::Plain(make_statement(PartyId::new("u1"), LocationId::new("cafe-7"), 100).unwrap()),
        );
        (authority, witness, lp)
    }

    fn endorse(authority: &KeyPair, witness: &KeyPair, lp: &LocationProof, te: u64) -> Result<Endorsement, ModelError> {
        let token = TimestampToken {
            location: lp.statement.location().clone(),
            proof_digest: lp.digest(Profile::Modern),
            endorsement_time: te,
        };
        make_endorsement(&PartyId::new("w1"), witness, lp, te, token.sign(authority), 60)
    }

    #[test]
    fn endorsement_copies_fields_and_verifies() {
        let (authority, witness, lp) = setup();
        let e = endorse(&authority, &witness, &lp, 105).unwrap();
        assert_eq!(e.statement.proof_digest, lp.digest(Profile::Modern));
        assert!(e.fields_match(&lp));
        assert!(e.verify_witness(witness.public()));
        assert!(e.verify_timestamp(authority.public()));
        assert!(!e.verify_timestamp(witness.public()));
    }

    #[test]
    fn endorsement_window_boundaries() {
        let (authority, witness, lp) = setup();
        assert!(matches!(endorse(&authority, &witness, &lp, 99), Err(ModelError::EndorsementBeforeVisit { .. })));
        // sweep across the window edge at t + 60
        for te in 95..=165u64 {
            let res = endorse(&authority, &witness, &lp, te);
            let expected_ok = (100..=160).contains(&te);
            assert_eq!(res.is_ok(), expected_ok, "t_e = {te}");
        }
    }

    #[test]
    fn assemble_checks_binding() {
        let (authority, witness, lp) = setup();
        let e1 = endorse(&authority, &witness, &lp, 101).unwrap();
        let w2 = Profile::Modern.keygen(&[3; 32]);
        let e2 = endorse(&authority, &w2, &lp, 102).unwrap();
        let elp = assemble_elp(lp.clone(), vec![e1.clone(), e2], Profile::Modern).unwrap();
        assert_eq!(elp.endorsements.len(), 2);

        let other = make_proof(
            &authority,
            Statement::Plain(make_statement(PartyId::new("u1"), LocationId::new("cafe-7"), 130).unwrap()),
        );
        assert_eq!(
            assemble_elp(other, vec![e1.clone()], Profile::Modern),
            Err(ModelError::ProofDigestMismatch { index: 0 })
        );
        assert_eq!(assemble_elp(lp.clone(), vec![], Profile::Modern), Err(ModelError::NoEndorsements));

        let mut wrong_fields = e1;
        wrong_fields.statement.user = PartyId::new("u2");
        assert_eq!(assemble_elp(lp, vec![wrong_fields], Profile::Modern), Err(ModelError::FieldMismatch { index: 0 }));
    }
}
