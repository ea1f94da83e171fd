use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::messages::{Message, Payload};
use super::{Authority, Ctx, ProtocolConfig, ProtocolError, ScheduleOracle, User, VisitOutcome, Witness};
use crate::crypto::KeyPair;
use crate::directory::{Directory, Role};
use crate::epoch::EpochRegistry;
use crate::model::{LocationId, PartyId};

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: u64,
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// SHA-256 prefix of the JSON payload.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TraceEvent {
    fn note(time: u64, event: &str, detail: String) -> Self {
        TraceEvent { time, event: event.into(), seq: None, from: None, to: None, kind: None, digest: None, detail: Some(detail) }
    }
}

/// Single-threaded discrete-event simulation of all parties. Messages are
/// delivered in `(deliver_at, seq)` order, so a run is fully determined by
/// its inputs and seed.
pub struct Network {
    pub config: ProtocolConfig,
    now: u64,
    seq: u64,
    queue: BTreeMap<(u64, u64), Message>,
    authorities: BTreeMap<PartyId, Authority>,
    witnesses: BTreeMap<PartyId, Witness>,
    users: BTreeMap<PartyId, User>,
    directory: Directory,
    registry: EpochRegistry,
    oracle: ScheduleOracle,
    rng: ChaCha20Rng,
    trace: Vec<TraceEvent>,
}

fn payload_digest(p: &Payload) -> String {
    let bytes = serde_json::to_vec(p).expect("payloads serialize");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

impl Network {
    pub fn new(config: ProtocolConfig, seed: u64) -> Self {
        Network {
            config,
            now: 0,
            seq: 0,
            queue: BTreeMap::new(),
            authorities: BTreeMap::new(),
            witnesses: BTreeMap::new(),
            users: BTreeMap::new(),
            directory: Directory::new(),
            registry: EpochRegistry::new(),
            oracle: ScheduleOracle::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            trace: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn directory(&self) -> &Directory {
        &self.directory
    }

    pub fn registry(&self) -> &EpochRegistry {
        &self.registry
    }

    pub fn oracle_mut(&mut self) -> &mut ScheduleOracle {
        &mut self.oracle
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|e| serde_json::to_string(e).expect("trace serializes") + "\n").collect()
    }

    fn ensure_new(&self, id: &PartyId) -> Result<(), ProtocolError> {
        if self.directory.get(id).is_some() {
            return Err(ProtocolError::DuplicateParty(id.clone()));
        }
        Ok(())
    }

    pub fn add_authority(&mut self, location: LocationId, keys: KeyPair, skew_ms: i64) -> Result<&mut Authority, ProtocolError> {
        let id = location.authority();
        self.ensure_new(&id)?;
        self.directory.insert(id.clone(), Role::Authority, keys.public().clone());
        let auth = Authority::new(location, keys, &self.config, self.now, skew_ms);
        Ok(self.authorities.entry(id).or_insert(auth))
    }

    /// Adds a witness permanently stationed at `location`.
    pub fn add_witness(&mut self, id: PartyId, location: LocationId, keys: KeyPair) -> Result<&mut Witness, ProtocolError> {
        self.ensure_new(&id)?;
        self.directory.insert(id.clone(), Role::Witness, keys.public().clone());
        self.oracle.add(id.clone(), location.clone(), 0, u64::MAX);
        Ok(self.witnesses.entry(id.clone()).or_insert(Witness::new(id, location, keys)))
    }

    pub fn add_user(&mut self, id: PartyId, keys: KeyPair) -> Result<&mut User, ProtocolError> {
        self.ensure_new(&id)?;
        self.directory.insert(id.clone(), Role::User, keys.public().clone());
        let user = User::new(id.clone(), keys, self.config.scheme);
        Ok(self.users.entry(id).or_insert(user))
    }

    pub fn authority(&self, id: &PartyId) -> Option<&Authority> {
        self.authorities.get(id)
    }

    pub fn authority_mut(&mut self, id: &PartyId) -> Option<&mut Authority> {
        self.authorities.get_mut(id)
    }

    pub fn witness_mut(&mut self, id: &PartyId) -> Option<&mut Witness> {
        self.witnesses.get_mut(id)
    }

    pub fn user(&self, id: &PartyId) -> Option<&User> {
        self.users.get(id)
    }

    pub fn user_mut(&mut self, id: &PartyId) -> Option<&mut User> {
        self.users.get_mut(id)
    }

    /// Witnesses stationed at `location`, in id order.
    pub fn witnesses_at(&self, location: &LocationId) -> Vec<PartyId> {
        self.witnesses.values().filter(|w| &w.location == location).map(|w| w.id.clone()).collect()
    }

    pub fn send(&mut self, from: PartyId, to: PartyId, payload: Payload) {
        self.seq += 1;
        let msg = Message { seq: self.seq, sender: from, receiver: to, deliver_at: self.now + self.config.latency_ms, payload };
        self.queue.insert((msg.deliver_at, msg.seq), msg);
    }

    fn close_epochs(&mut self) {
        for auth in self.authorities.values_mut() {
            let Ok(reports) = auth.close_due(self.now) else { continue };
            for r in reports {
                let detail = format!("{} epoch {} [{}, {})", r.location, r.epoch_id, r.start, r.end);
                if self.registry.publish(r).is_ok() {
                    self.trace.push(TraceEvent::note(self.now, "epoch", detail));
                }
            }
        }
    }

    fn deliver(&mut self, msg: Message) {
        self.now = self.now.max(msg.deliver_at);
        self.close_epochs();
        self.trace.push(TraceEvent {
            time: self.now,
            event: "deliver".into(),
            seq: Some(msg.seq),
            from: Some(msg.sender.0.clone()),
            to: Some(msg.receiver.0.clone()),
            kind: Some(format!("{:?}", msg.kind())),
            digest: Some(payload_digest(&msg.payload)),
            detail: msg.payload.is_refusal().then(|| "refusal".to_string()),
        });
        let mut ctx = Ctx {
            now: self.now,
            config: &self.config,
            directory: &self.directory,
            oracle: &self.oracle,
            rng: &mut self.rng,
        };
        let out = if let Some(a) = self.authorities.get_mut(&msg.receiver) {
            a.handle(&msg.sender, &msg.payload, &mut ctx)
        } else if let Some(w) = self.witnesses.get_mut(&msg.receiver) {
            w.handle(&msg.sender, &msg.payload, &mut ctx)
        } else if let Some(u) = self.users.get_mut(&msg.receiver) {
            u.handle(&msg.payload, &mut ctx)
        } else {
            self.trace.push(TraceEvent::note(self.now, "drop", format!("no party {}", msg.receiver)));
            Vec::new()
        };
        for (to, payload) in out {
            self.send(msg.receiver.clone(), to, payload);
        }
    }

    /// Delivers messages until the queue is empty.
    pub fn run_until_idle(&mut self) {
        while let Some((_, msg)) = self.queue.pop_first() {
            self.deliver(msg);
        }
    }

    /// Delivers everything due by `t`, then moves the clock to `t` and closes due epochs.
    pub fn advance_to(&mut self, t: u64) {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > t {
                break;
            }
            let msg = entry.remove();
            self.deliver(msg);
        }
        self.now = self.now.max(t);
        self.close_epochs();
    }

    fn send_all(&mut self, from: &PartyId, out: Vec<(PartyId, Payload)>) {
        for (to, p) in out {
            self.send(from.clone(), to, p);
        }
    }

    fn last_outcome(&self, user: &PartyId) -> Option<VisitOutcome> {
        self.users.get(user).and_then(|u| u.outcomes.last().cloned())
    }

    /// The user is physically at `location` for `stay_ms` from now and runs
    /// the protocol there. `witnesses` defaults to those stationed at the location.
    pub fn visit(
        &mut self,
        user: &PartyId,
        location: &LocationId,
        witnesses: Option<Vec<PartyId>>,
        stay_ms: u64,
    ) -> Result<Option<VisitOutcome>, ProtocolError> {
        self.oracle.add(user.clone(), location.clone(), self.now, self.now + stay_ms);
        self.request(user, location, witnesses)
    }

    /// Runs the protocol without placing the user anywhere.
    pub fn request(
        &mut self,
        user: &PartyId,
        location: &LocationId,
        witnesses: Option<Vec<PartyId>>,
    ) -> Result<Option<VisitOutcome>, ProtocolError> {
        let witnesses = witnesses.unwrap_or_else(|| self.witnesses_at(location));
        let u = self.users.get_mut(user).ok_or_else(|| ProtocolError::UnknownUser(user.clone()))?;
        let out = u.start_visit(location, witnesses, &self.directory)?;
        self.trace.push(TraceEvent::note(self.now, "visit", format!("{user} at {location}")));
        self.send_all(user, out);
        self.run_until_idle();
        Ok(self.last_outcome(user))
    }

    /// The user mints a proof for `location` with its own key and asks witnesses to endorse it.
    pub fn forged_visit(
        &mut self,
        user: &PartyId,
        location: &LocationId,
        witnesses: Option<Vec<PartyId>>,
    ) -> Result<Option<VisitOutcome>, ProtocolError> {
        let witnesses = witnesses.unwrap_or_else(|| self.witnesses_at(location));
        let mut ctx = Ctx {
            now: self.now,
            config: &self.config,
            directory: &self.directory,
            oracle: &self.oracle,
            rng: &mut self.rng,
        };
        let u = self.users.get_mut(user).ok_or_else(|| ProtocolError::UnknownUser(user.clone()))?;
        let out = u.start_forged_visit(location, witnesses, &mut ctx)?;
        self.trace.push(TraceEvent::note(self.now, "forge", format!("{user} mints a proof for {location}")));
        self.send_all(user, out);
        self.run_until_idle();
        Ok(self.last_outcome(user))
    }

    /// The authority mints a proof in `victim`'s name and collects endorsements for it.
    pub fn implicate(
        &mut self,
        authority: &PartyId,
        victim: &PartyId,
        witnesses: Option<Vec<PartyId>>,
    ) -> Result<(), ProtocolError> {
        let loc = LocationId::new(authority.as_str());
        let witnesses = witnesses.unwrap_or_else(|| self.witnesses_at(&loc));
        let mut ctx = Ctx {
            now: self.now,
            config: &self.config,
            directory: &self.directory,
            oracle: &self.oracle,
            rng: &mut self.rng,
        };
        let a = self.authorities.get_mut(authority).ok_or_else(|| ProtocolError::UnknownAuthority(authority.clone()))?;
        let out = a.implicate(victim, &witnesses, &mut ctx);
        self.trace.push(TraceEvent::note(self.now, "implicate", format!("{authority} mints a proof for {victim}")));
        self.send_all(authority, out);
        self.run_until_idle();
        Ok(())
    }

    /// The user rolls its chain back to its first `keep` entries and visits
    /// from there, so the next construct extends the older state.
    pub fn fork_visit(
        &mut self,
        user: &PartyId,
        location: &LocationId,
        witnesses: Option<Vec<PartyId>>,
        stay_ms: u64,
        keep: usize,
    ) -> Result<Option<VisitOutcome>, ProtocolError> {
        let u = self.users.get_mut(user).ok_or_else(|| ProtocolError::UnknownUser(user.clone()))?;
        let cut = keep.min(u.chain.entries.len());
        let dropped: Vec<_> = u.chain.entries.drain(cut..).collect();
        let n = dropped.len();
        u.abandoned.extend(dropped);
        self.trace.push(TraceEvent::note(self.now, "fork", format!("{user} drops its last {n} entries")));
        self.visit(user, location, witnesses, stay_ms)
    }
}
