//! Signatures, digests and hash commitments.
//!
//! Everything above this module is written against a [`Profile`], which pairs
//! a signature scheme with a hash function:
//!
//! * [`Profile::Legacy`]: 1024-bit DSA over SHA-1 with a fixed domain
//!   parameter set. Signatures are exactly 40 bytes (`r || s`) and digests 20
//!   bytes, so space measurements line up with the original Android
//!   prototype. Neither SHA-1 nor 1024-bit DSA should protect anything real;
//!   use this profile for benchmark parity only.
//! * [`Profile::Modern`] (default): Ed25519 over SHA-256, 64-byte signatures
//!   and 32-byte digests.
//!
//! Keys are derived deterministically from a 32-byte seed so that simulated
//! scenarios replay byte for byte.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use dsa::{Components, SigningKey as DsaSigningKey, VerifyingKey as DsaVerifyingKey};
use ed25519_dalek::{Signer as _, SigningKey as EdSigningKey, VerifyingKey as EdVerifyingKey};
use num_bigint_dig::BigUint;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest as _, Sha256};
use signature::{DigestSigner, DigestVerifier};
use thiserror::Error;

use crate::b64;
use crate::encoding::{Encoder, Tag};

/// Default commitment nonce length in bytes.
pub const DEFAULT_NONCE_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unsupported signature profile `{0}`")]
    UnsupportedProfile(String),
    #[error("malformed {profile} key material")]
    MalformedKey { profile: Profile },
    #[error("nonce must be {expected} bytes, got {actual}")]
    NonceLength { expected: usize, actual: usize },
}

/// Signature scheme plus hash function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Legacy,
    #[default]
    Modern,
}

impl Profile {
    pub const fn digest_len(self) -> usize {
        match self {
            Profile::Legacy => 20,
            Profile::Modern => 32,
        }
    }

    pub const fn signature_len(self) -> usize {
        match self {
            Profile::Legacy => 40,
            Profile::Modern => 64,
        }
    }

    pub const fn public_key_len(self) -> usize {
        match self {
            Profile::Legacy => 128,
            Profile::Modern => 32,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Profile::Legacy => "legacy",
            Profile::Modern => "modern",
        }
    }

    pub fn digest(self, message: &[u8]) -> Digest {
        match self {
            Profile::Legacy => Digest(Sha1::digest(message).to_vec()),
            Profile::Modern => Digest(Sha256::digest(message).to_vec()),
        }
    }

    /// Deterministic key generation: the same seed always yields the same pair.
    pub fn keygen(self, seed: &[u8; 32]) -> KeyPair {
        match self {
            Profile::Modern => {
                KeyPair::from_secret_bytes(self, seed).expect("any 32-byte seed is an ed25519 key")
            }
            Profile::Legacy => {
                let params = dsa_params();
                // x uniform-ish in [1, q-1]: reduce 512 bits of expanded seed.
                let mut wide = Vec::with_capacity(64);
                wide.extend_from_slice(&Sha256::new_with_prefix(b"dsa-x/0").chain_update(seed).finalize());
                wide.extend_from_slice(&Sha256::new_with_prefix(b"dsa-x/1").chain_update(seed).finalize());
                let q_minus_one = params.q() - BigUint::from(1u8);
                let x = BigUint::from_bytes_be(&wide) % &q_minus_one + BigUint::from(1u8);
                let bytes = left_pad(&x.to_bytes_be(), 20);
                KeyPair::from_secret_bytes(self, &bytes).expect("derived x lies in [1, q-1]")
            }
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "legacy" | "dsa-sha1" => Ok(Profile::Legacy),
            "modern" => Ok(Profile::Modern),
            other => Err(CryptoError::UnsupportedProfile(other.to_string())),
        }
    }
}

// 1024/160-bit DSA domain parameters, generated once and pinned so that
// keygen needs no prime search.
const DSA_P: &str = "d5033ef28ac4416a2a52ee792ddd726d004705b34618cde420064a626ebadad7\
efe9c08409bccdfede6d64ab0a90159f17c8e88ad2f79ededbcbfbaeee45923f\
494043b4878b13cd6d0f09cf14fb48905c2be00dacac963aedb782ec3e2c60ee\
cd8d17ee369bd9773dd9cee03197cb5e0d0c099f61d99fe23880b156c175f991";
const DSA_Q: &str = "f5f0c274e6112eee293f36228845a06d207f516b";
const DSA_G: &str = "b0c624b4330a36c183f3467b66fc787e5f15adb4c0b5444310678a640e3fd4d6\
0c8ba4945df6404578fa33a4d5d73aa4ea8d150bb13fe12782f66d0f4801eadd\
47c69f5fcd1550d04cef9b03140fcb935e2ae67a88f39840a9ec37f408ae1f67\
1dab28513f84df3bbba65301bc7c9007592461dd22eb3017c45c688812fd38d1";

fn dsa_params() -> &'static Components {
    static PARAMS: OnceLock<Components> = OnceLock::new();
    PARAMS.get_or_init(|| {
        let parse = |s: &str| BigUint::parse_bytes(s.as_bytes(), 16).expect("valid hex constant");
        Components::from_components(parse(DSA_P), parse(DSA_Q), parse(DSA_G)).expect("valid DSA parameters")
    })
}

fn left_pad(bytes: &[u8], len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len.saturating_sub(bytes.len())];
    out.extend_from_slice(bytes);
    out
}

/// Fixed-length hash output.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(#[serde(with = "b64")] pub Vec<u8>);

impl Digest {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Signature bytes. The length identifies the profile.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(#[serde(with = "b64")] pub Vec<u8>);

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = hex::encode(&self.0);
        write!(f, "Signature({}..)", &hex[..hex.len().min(16)])
    }
}

enum ParsedPublic {
    Dsa(DsaVerifyingKey),
    Ed(EdVerifyingKey),
}

#[derive(Serialize, Deserialize)]
struct KeyRepr {
    profile: Profile,
    #[serde(with = "b64")]
    key: Vec<u8>,
}

/// Verification key. Parsing (which for DSA costs a modular exponentiation)
/// happens once per value and is cached.
#[derive(Clone, Serialize, Deserialize)]
#[serde(into = "KeyRepr", from = "KeyRepr")]
pub struct PublicKey {
    profile: Profile,
    bytes: Vec<u8>,
    parsed: OnceLock<Option<Arc<ParsedPublic>>>,
}

impl From<KeyRepr> for PublicKey {
    fn from(repr: KeyRepr) -> Self {
        PublicKey::from_bytes(repr.profile, repr.key)
    }
}

impl From<PublicKey> for KeyRepr {
    fn from(key: PublicKey) -> Self {
        KeyRepr { profile: key.profile, key: key.bytes }
    }
}

impl PublicKey {
    /// Wraps raw key bytes. Malformed keys are accepted here and simply never verify.
    pub fn from_bytes(profile: Profile, bytes: Vec<u8>) -> Self {
        PublicKey { profile, bytes, parsed: OnceLock::new() }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Short stable fingerprint, used for public-key derived identifiers.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::new_with_prefix(self.profile.name().as_bytes()).chain_update(&self.bytes).finalize();
        hex::encode(&digest[..16])
    }

    fn parsed(&self) -> Option<&ParsedPublic> {
        self.parsed
            .get_or_init(|| {
                let parsed = match self.profile {
                    Profile::Modern => {
                        let arr: [u8; 32] = self.bytes.as_slice().try_into().ok()?;
                        ParsedPublic::Ed(EdVerifyingKey::from_bytes(&arr).ok()?)
                    }
                    Profile::Legacy => {
                        if self.bytes.len() != self.profile.public_key_len() {
                            return None;
                        }
                        let y = BigUint::from_bytes_be(&self.bytes);
                        ParsedPublic::Dsa(DsaVerifyingKey::from_components(dsa_params().clone(), y).ok()?)
                    }
                };
                Some(Arc::new(parsed))
            })
            .as_deref()
    }

    /// True iff `sig` was produced over exactly `message` by the matching
    /// private key. Malformed keys or signatures yield `false`.
    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        if sig.len() != self.profile.signature_len() {
            return false;
        }
        match self.parsed() {
            Some(ParsedPublic::Ed(key)) => {
                let Ok(sig) = ed25519_dalek::Signature::from_slice(sig.as_bytes()) else {
                    return false;
                };
                key.verify_strict(message, &sig).is_ok()
            }
            Some(ParsedPublic::Dsa(key)) => {
                let r = BigUint::from_bytes_be(&sig.0[..20]);
                let s = BigUint::from_bytes_be(&sig.0[20..]);
                let Ok(sig) = dsa::Signature::from_components(r, s) else {
                    return false;
                };
                key.verify_digest(Sha1::new_with_prefix(message), &sig).is_ok()
            }
            None => false,
        }
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.profile == other.profile && self.bytes == other.bytes
    }
}

impl Eq for PublicKey {}

impl std::hash::Hash for PublicKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.profile.hash(state);
        self.bytes.hash(state);
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}:{})", self.profile, self.fingerprint())
    }
}

enum ParsedSecret {
    Dsa(DsaSigningKey),
    Ed(EdSigningKey),
}

/// A signing identity. Immutable and cheap to clone.
#[derive(Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: Vec<u8>,
    signer: Arc<ParsedSecret>,
}

impl KeyPair {
    /// Rebuilds a pair from private key bytes (32-byte Ed25519 seed or 20-byte DSA `x`).
    pub fn from_secret_bytes(profile: Profile, secret: &[u8]) -> Result<Self, CryptoError> {
        let malformed = || CryptoError::MalformedKey { profile };
        match profile {
            Profile::Modern => {
                let arr: [u8; 32] = secret.try_into().map_err(|_| malformed())?;
                let sk = EdSigningKey::from_bytes(&arr);
                let public = PublicKey::from_bytes(profile, sk.verifying_key().to_bytes().to_vec());
                Ok(KeyPair { public, secret: secret.to_vec(), signer: Arc::new(ParsedSecret::Ed(sk)) })
            }
            Profile::Legacy => {
                if secret.len() != 20 {
                    return Err(malformed());
                }
                let params = dsa_params();
                let x = BigUint::from_bytes_be(secret);
                let y = params.g().modpow(&x, params.p());
                let vk = DsaVerifyingKey::from_components(params.clone(), y.clone()).map_err(|_| malformed())?;
                let sk = DsaSigningKey::from_components(vk, x).map_err(|_| malformed())?;
                let public = PublicKey::from_bytes(profile, left_pad(&y.to_bytes_be(), profile.public_key_len()));
                Ok(KeyPair { public, secret: secret.to_vec(), signer: Arc::new(ParsedSecret::Dsa(sk)) })
            }
        }
    }

    pub fn profile(&self) -> Profile {
        self.public.profile
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn secret_bytes(&self) -> &[u8] {
        &self.secret
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        match self.signer.as_ref() {
            ParsedSecret::Ed(sk) => Signature(sk.sign(message).to_bytes().to_vec()),
            ParsedSecret::Dsa(sk) => {
                let sig: dsa::Signature = sk.sign_digest(Sha1::new_with_prefix(message));
                let mut bytes = left_pad(&sig.r().to_bytes_be(), 20);
                bytes.extend_from_slice(&left_pad(&sig.s().to_bytes_be(), 20));
                Signature(bytes)
            }
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.secret == other.secret
    }
}

/// Commitment nonce `r_i`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nonce(#[serde(with = "b64")] pub Vec<u8>);

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(&self.0))
    }
}

/// Hash commitment `h(value, nonce)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Commitment(pub Digest);

/// Profile plus commitment parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suite {
    pub profile: Profile,
    pub nonce_len: usize,
}

impl Default for Suite {
    fn default() -> Self {
        Suite { profile: Profile::default(), nonce_len: DEFAULT_NONCE_LEN }
    }
}

impl Suite {
    pub fn new(profile: Profile) -> Self {
        Suite { profile, nonce_len: DEFAULT_NONCE_LEN }
    }

    pub fn digest(&self, message: &[u8]) -> Digest {
        self.profile.digest(message)
    }

    /// `h(value, nonce)` over a length-prefixed encoding of the pair.
    pub fn commit(&self, value: &[u8], nonce: &Nonce) -> Result<Commitment, CryptoError> {
        if nonce.0.len() != self.nonce_len {
            return Err(CryptoError::NonceLength { expected: self.nonce_len, actual: nonce.0.len() });
        }
        Ok(Commitment(self.digest(&commitment_preimage(value, nonce))))
    }

    pub fn verify_commitment(&self, commitment: &Commitment, value: &[u8], nonce: &Nonce) -> bool {
        self.commit(value, nonce).is_ok_and(|c| &c == commitment)
    }

    pub fn random_nonce<R: rand::RngCore + ?Sized>(&self, rng: &mut R) -> Nonce {
        let mut bytes = vec![0u8; self.nonce_len];
        rng.fill_bytes(&mut bytes);
        Nonce(bytes)
    }
}

pub fn commitment_preimage(value: &[u8], nonce: &Nonce) -> Vec<u8> {
    let mut enc = Encoder::new(Tag::CommitmentOpening);
    enc.bytes(value).bytes(&nonce.0);
    enc.finish()
}
