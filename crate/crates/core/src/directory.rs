//! Public-key directory shared by auditors and protocol participants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::model::{LocationId, PartyId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Witness,
    Authority,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub role: Role,
    pub key: PublicKey,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Directory {
    parties: BTreeMap<PartyId, DirectoryEntry>,
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: PartyId, role: Role, key: PublicKey) {
        self.parties.insert(id, DirectoryEntry { role, key });
    }

    pub fn get(&self, id: &PartyId) -> Option<&DirectoryEntry> {
        self.parties.get(id)
    }

    pub fn key(&self, id: &PartyId) -> Option<&PublicKey> {
        self.parties.get(id).map(|e| &e.key)
    }

    pub fn role(&self, id: &PartyId) -> Option<Role> {
        self.parties.get(id).map(|e| e.role)
    }

    pub fn authority_key(&self, location: &LocationId) -> Option<&PublicKey> {
        self.parties.get(&location.authority()).filter(|e| e.role == Role::Authority).map(|e| &e.key)
    }

    /// Authority keys in id order.
    pub fn authorities(&self) -> impl Iterator<Item = (&PartyId, &PublicKey)> {
        self.parties.iter().filter(|(_, e)| e.role == Role::Authority).map(|(id, e)| (id, &e.key))
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }
}
