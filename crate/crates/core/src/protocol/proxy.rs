use super::{Authority, ProtocolError};
use crate::crypto::PublicKey;
use crate::model::{make_proof, LocationProof, PartyId};

/// A broader authority verifies a proof from a block authority it trusts and
/// re-signs it as its own, so the result names only the broader location.
pub fn proxy_resign(
    block: &PartyId,
    block_key: &PublicKey,
    city: &Authority,
    lp: &LocationProof,
) -> Result<LocationProof, ProtocolError> {
    if !city.trusts.contains(block) {
        return Err(ProtocolError::Untrusted(block.clone()));
    }
    if lp.statement.location().authority() != *block || !lp.verify(block_key) {
        return Err(ProtocolError::BadProof);
    }
    Ok(make_proof(city.keys(), lp.statement.with_location(city.location.clone())))
}
