//! Declarative attack scenarios run end to end: parties are set up from a
//! TOML script, the script drives the [`Network`], the holder presents a
//! subsequence, and the audit verdict is compared against the expectation.

mod random;
mod suite;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::audit::{audit, classify_failure, AuditConfig, AuditReport, LocationClaim, ThreatClass};
use crate::crypto::{KeyPair, Profile};
use crate::directory::Directory;
use crate::epoch::EpochRegistry;
use crate::model::{Disclosure, LocationId, ModelError, PartyId, ProvenanceChain, RevealedSubsequence};
use crate::ordering::OrderingScheme;
use crate::protocol::{
    AuthorityBehavior, Network, ProtocolConfig, ProtocolError, TraceEvent, UserBehavior, WitnessBehavior,
};

pub use random::random_honest_scenario;
pub use suite::{builtin, builtin_suite};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

/// Which roles act honestly. Together the three flags pick a threat-model row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Honesty {
    pub user: bool,
    pub authority: bool,
    pub witness: bool,
}

impl Honesty {
    pub const ALL: [Honesty; 8] = {
        let mut rows = [Honesty { user: true, authority: true, witness: true }; 8];
        let mut i = 0;
        while i < 8 {
            rows[i] = Honesty { user: i & 4 == 0, authority: i & 2 == 0, witness: i & 1 == 0 };
            i += 1;
        }
        rows
    };

    /// Row label with a macron over each dishonest role, e.g. `ŪL̄W`.
    pub fn row(self) -> String {
        let mut s = String::new();
        for (c, honest) in [('U', self.user), ('L', self.authority), ('W', self.witness)] {
            s.push(c);
            if !honest {
                s.push('\u{0304}');
            }
        }
        s
    }
}

impl fmt::Display for Honesty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.row())
    }
}

/// An authority named after the location it serves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthoritySpec {
    pub id: String,
    pub skew_ms: i64,
    pub granularities: Vec<String>,
    pub proxy_via: Option<String>,
    pub trusts: Vec<String>,
    pub behavior: AuthorityBehavior,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessSpec {
    pub id: String,
    pub location: String,
    pub behavior: WitnessBehavior,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserSpec {
    pub id: String,
    pub behavior: UserBehavior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// The user is present and runs the protocol.
    Visit,
    /// An accomplice carries the user's device to the location.
    CloneVisit,
    /// The user runs the protocol from somewhere else.
    RemoteVisit,
    /// The user mints the proof with its own key.
    ForgeProof,
    /// The authority mints a proof in the victim's name.
    Implicate,
    /// The user forks its chain after `fork_keep` entries, then visits.
    ForkVisit,
    /// Only moves the clock.
    Advance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub action: Action,
    /// Global time the step starts at.
    pub at: u64,
    #[serde(default)]
    pub user: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    /// Defaults to every witness stationed at the location.
    #[serde(default)]
    pub witnesses: Option<Vec<String>>,
    #[serde(default = "default_stay")]
    pub stay_ms: u64,
    #[serde(default)]
    pub authority: Option<String>,
    #[serde(default)]
    pub victim: Option<String>,
    #[serde(default)]
    pub accomplice: Option<String>,
    #[serde(default)]
    pub fork_keep: Option<usize>,
}

fn default_stay() -> u64 {
    60_000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClaimOverride {
    /// Index into the presented entries.
    pub index: usize,
    pub location: Option<String>,
    pub time: Option<u64>,
}

/// What the holder shows the auditor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresentSpec {
    /// Defaults to the first user.
    pub holder: Option<String>,
    /// Present the chain this authority built in the holder's name, sealed with its own key.
    pub forged_by: Option<String>,
    /// Positions to reveal in chain order. Defaults to all.
    pub positions: Option<Vec<usize>>,
    /// Positions in presentation order; overrides `positions`.
    pub order: Option<Vec<usize>>,
    /// Granularity indices opened on every private entry.
    pub open: Vec<usize>,
    /// Exchange the endorsed proofs of two presented entries.
    pub swap_entries: Option<[usize; 2]>,
    /// Exchange the endorsement lists of two presented entries.
    pub swap_endorsements: Option<[usize; 2]>,
    pub claim: Vec<ClaimOverride>,
    /// Whether the auditor consults the epoch registry.
    pub registry: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectOverride {
    pub detected: bool,
    #[serde(default)]
    pub class: Option<ThreatClass>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub detected: bool,
    #[serde(default)]
    pub class: Option<ThreatClass>,
    #[serde(default)]
    pub hashchain: Option<ExpectOverride>,
    #[serde(default)]
    pub bloom: Option<ExpectOverride>,
}

impl Expect {
    pub fn for_scheme(&self, scheme: OrderingScheme) -> ExpectOverride {
        let over = match scheme {
            OrderingScheme::HashChain => self.hashchain,
            OrderingScheme::Bloom => self.bloom,
        };
        over.unwrap_or(ExpectOverride { detected: self.detected, class: self.class })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub profile: Profile,
    /// Used when the caller does not pick a scheme.
    #[serde(default)]
    pub scheme: Option<OrderingScheme>,
    #[serde(default)]
    pub epoch_ms: Option<u64>,
    pub honesty: Honesty,
    #[serde(default, rename = "authority")]
    pub authorities: Vec<AuthoritySpec>,
    #[serde(default, rename = "witness")]
    pub witnesses: Vec<WitnessSpec>,
    #[serde(default, rename = "user")]
    pub users: Vec<UserSpec>,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
    #[serde(default)]
    pub present: PresentSpec,
    pub expect: Expect,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    pub fn effective_scheme(&self, scheme: Option<OrderingScheme>) -> OrderingScheme {
        scheme.or(self.scheme).unwrap_or_default()
    }

    pub fn protocol_config(&self, scheme: OrderingScheme) -> ProtocolConfig {
        let mut config = ProtocolConfig { scheme, ..ProtocolConfig::default() };
        config.suite.profile = self.profile;
        if let Some(ms) = self.epoch_ms {
            config.epoch.epoch_ms = ms;
        }
        config
    }
}

/// Deterministic per-party keys.
pub fn party_keys(profile: Profile, seed: u64, id: &str) -> KeyPair {
    let mut h = Sha256::new();
    h.update(b"locprov/party");
    h.update(seed.to_be_bytes());
    h.update(id.as_bytes());
    profile.keygen(&h.finalize().into())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub honesty: Honesty,
    pub scheme: OrderingScheme,
    pub profile: Profile,
    pub holder: PartyId,
    /// The chain the presentation was cut from.
    pub chain: ProvenanceChain,
    pub presentation: RevealedSubsequence,
    pub claims: Vec<LocationClaim>,
    pub directory: Directory,
    pub registry: EpochRegistry,
    pub report: AuditReport,
    pub detected: bool,
    pub class: Option<ThreatClass>,
    pub expected_detection: bool,
    pub expected_class: Option<ThreatClass>,
    pub matched: bool,
    pub trace: Vec<TraceEvent>,
}

impl ScenarioOutcome {
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|e| serde_json::to_string(e).expect("trace serializes") + "\n").collect()
    }

    pub fn summary(&self) -> String {
        let verdict = if self.detected { "detected" } else { "not detected" };
        let class = self.class.map(|c| format!(" as {c}")).unwrap_or_default();
        let status = if self.matched { "matched" } else { "MISMATCH" };
        format!("{} [{} {}]: {verdict}{class}, {status}", self.name, self.honesty, self.scheme)
    }
}

fn required<'a>(field: &'a Option<String>, what: &str, step: usize) -> Result<&'a str, ScenarioError> {
    field.as_deref().ok_or_else(|| ScenarioError::Invalid(format!("step {step} needs `{what}`")))
}

fn ids(list: &Option<Vec<String>>) -> Option<Vec<PartyId>> {
    list.as_ref().map(|l| l.iter().map(PartyId::new).collect())
}

fn build_network(s: &Scenario, scheme: OrderingScheme) -> Result<Network, ScenarioError> {
    let mut net = Network::new(s.protocol_config(scheme), s.seed);
    for a in &s.authorities {
        let keys = party_keys(s.profile, s.seed, &a.id);
        let auth = net.add_authority(LocationId::new(&a.id), keys, a.skew_ms)?;
        auth.granularities = a.granularities.clone();
        auth.proxy_via = a.proxy_via.as_ref().map(PartyId::new);
        auth.trusts = a.trusts.iter().map(PartyId::new).collect::<BTreeSet<_>>();
        auth.behavior = a.behavior.clone();
    }
    for w in &s.witnesses {
        let keys = party_keys(s.profile, s.seed, &w.id);
        net.add_witness(PartyId::new(&w.id), LocationId::new(&w.location), keys)?.behavior = w.behavior.clone();
    }
    for u in &s.users {
        let keys = party_keys(s.profile, s.seed, &u.id);
        net.add_user(PartyId::new(&u.id), keys)?.behavior = u.behavior.clone();
    }
    Ok(net)
}

fn run_steps(s: &Scenario, net: &mut Network) -> Result<(), ScenarioError> {
    for (i, step) in s.steps.iter().enumerate() {
        net.advance_to(step.at);
        let witnesses = ids(&step.witnesses);
        match step.action {
            Action::Advance => {}
            Action::Visit => {
                let user = PartyId::new(required(&step.user, "user", i)?);
                let loc = LocationId::new(required(&step.location, "location", i)?);
                net.visit(&user, &loc, witnesses, step.stay_ms)?;
            }
            Action::CloneVisit => {
                let user = PartyId::new(required(&step.user, "user", i)?);
                let loc = LocationId::new(required(&step.location, "location", i)?);
                let from = net.now();
                if let Some(acc) = &step.accomplice {
                    net.oracle_mut().add(PartyId::new(acc), loc.clone(), from, from + step.stay_ms);
                }
                net.visit(&user, &loc, witnesses, step.stay_ms)?;
            }
            Action::ForkVisit => {
                let user = PartyId::new(required(&step.user, "user", i)?);
                let loc = LocationId::new(required(&step.location, "location", i)?);
                let keep = step.fork_keep.ok_or_else(|| ScenarioError::Invalid(format!("step {i} needs `fork_keep`")))?;
                net.fork_visit(&user, &loc, witnesses, step.stay_ms, keep)?;
            }
            Action::RemoteVisit => {
                let user = PartyId::new(required(&step.user, "user", i)?);
                let loc = LocationId::new(required(&step.location, "location", i)?);
                net.request(&user, &loc, witnesses)?;
            }
            Action::ForgeProof => {
                let user = PartyId::new(required(&step.user, "user", i)?);
                let loc = LocationId::new(required(&step.location, "location", i)?);
                net.forged_visit(&user, &loc, witnesses)?;
            }
            Action::Implicate => {
                let auth = PartyId::new(required(&step.authority, "authority", i)?);
                let victim = PartyId::new(required(&step.victim, "victim", i)?);
                net.implicate(&auth, &victim, witnesses)?;
            }
        }
    }
    Ok(())
}

/// Lets every epoch touched by an issued proof close and publish.
fn flush(s: &Scenario, net: &mut Network) {
    let epoch_ms = net.config.epoch.epoch_ms;
    let latest = s
        .users
        .iter()
        .filter_map(|u| net.user(&PartyId::new(&u.id)))
        .flat_map(|u| u.chain.entries.iter())
        .chain(s.authorities.iter().filter_map(|a| net.authority(&PartyId::new(&a.id))).flat_map(|a| {
            s.users.iter().filter_map(|u| a.forged_chain(&PartyId::new(&u.id))).flat_map(|c| c.entries.iter())
        }))
        .map(|e| e.elp.proof.statement.visit_time())
        .max()
        .unwrap_or(0);
    let skew = s.authorities.iter().map(|a| a.skew_ms.unsigned_abs()).max().unwrap_or(0);
    let until = net.now().max(latest) + 2 * epoch_ms + skew;
    net.advance_to(until);
}

struct Presented {
    holder: PartyId,
    chain: ProvenanceChain,
    sub: RevealedSubsequence,
    claims: Vec<LocationClaim>,
}

fn present(s: &Scenario, net: &Network) -> Result<Presented, ScenarioError> {
    let p = &s.present;
    let holder = match (&p.holder, s.users.first()) {
        (Some(h), _) => PartyId::new(h),
        (None, Some(u)) => PartyId::new(&u.id),
        (None, None) => return Err(ScenarioError::Invalid("no holder and no users".into())),
    };
    let (chain, sealer) = match &p.forged_by {
        Some(a) => {
            let auth = net
                .authority(&PartyId::new(a))
                .ok_or_else(|| ScenarioError::Invalid(format!("unknown authority `{a}`")))?;
            let chain = auth.forged_chain(&holder).cloned().unwrap_or_else(|| ProvenanceChain::new(net.config.scheme));
            (chain, auth.keys().clone())
        }
        None => {
            let user =
                net.user(&holder).ok_or_else(|| ScenarioError::Invalid(format!("unknown holder `{holder}`")))?;
            (user.chain.clone(), user.keys().clone())
        }
    };
    if chain.is_empty() {
        return Err(ScenarioError::Invalid(format!("{holder} has nothing to present")));
    }
    let positions: Vec<usize> = match (&p.order, &p.positions) {
        (Some(o), _) => o.clone(),
        (None, Some(ps)) => ps.clone(),
        (None, None) => (1..=chain.len()).collect(),
    };
    let disclosures: Vec<Disclosure> = positions
        .iter()
        .map(|&pos| {
            let count = chain
                .entries
                .get(pos.wrapping_sub(1))
                .and_then(|e| e.elp.proof.statement.as_private())
                .map_or(0, |st| st.granularity_count());
            Disclosure::opening(pos, p.open.iter().copied().filter(|&g| g < count))
        })
        .collect();
    let mut sub = chain.reveal(&holder, &disclosures, s.profile)?;

    let n = sub.entries.len();
    let check = |[a, b]: [usize; 2]| {
        if a >= n || b >= n {
            Err(ScenarioError::Invalid(format!("swap index out of range for {n} presented entries")))
        } else {
            Ok((a, b))
        }
    };
    if let Some(pair) = p.swap_entries {
        let (a, b) = check(pair)?;
        let ea = sub.entries[a].entry.elp.clone();
        sub.entries[a].entry.elp = std::mem::replace(&mut sub.entries[b].entry.elp, ea);
    }
    if let Some(pair) = p.swap_endorsements {
        let (a, b) = check(pair)?;
        let ea = sub.entries[a].entry.elp.endorsements.clone();
        sub.entries[a].entry.elp.endorsements = std::mem::replace(&mut sub.entries[b].entry.elp.endorsements, ea);
    }

    let mut claims: Vec<LocationClaim> = sub
        .entries
        .iter()
        .map(|r| {
            let st = &r.entry.elp.proof.statement;
            LocationClaim { location: st.location().clone(), time: st.visit_time() }
        })
        .collect();
    for o in &p.claim {
        let c = claims
            .get_mut(o.index)
            .ok_or_else(|| ScenarioError::Invalid(format!("claim override {} out of range", o.index)))?;
        if let Some(l) = &o.location {
            c.location = LocationId::new(l);
        }
        if let Some(t) = o.time {
            c.time = t;
        }
    }
    let sub = sub.seal(&sealer);
    Ok(Presented { holder, chain, sub, claims })
}

/// Runs `s` under `scheme`, or the scenario's own scheme when `None`.
pub fn run_scenario(s: &Scenario, scheme: Option<OrderingScheme>) -> Result<ScenarioOutcome, ScenarioError> {
    let scheme = s.effective_scheme(scheme);
    let mut net = build_network(s, scheme)?;
    run_steps(s, &mut net)?;
    flush(s, &mut net);
    let Presented { holder, chain, sub, claims } = present(s, &net)?;

    let registry = net.registry().clone();
    let config = AuditConfig { suite: net.config.suite, window_ms: net.config.window_ms };
    let use_registry = s.present.registry.unwrap_or(true);
    let report = audit(&claims, &sub, net.directory(), use_registry.then_some(&registry), &config);
    let detected = !report.is_ok();
    let class = detected.then(|| classify_failure(&report));
    let expect = s.expect.for_scheme(scheme);
    let matched = detected == expect.detected && (!detected || expect.class.is_none() || class == expect.class);

    Ok(ScenarioOutcome {
        name: s.name.clone(),
        honesty: s.honesty,
        scheme,
        profile: s.profile,
        holder,
        chain,
        presentation: sub,
        claims,
        directory: net.directory().clone(),
        registry,
        report,
        detected,
        class,
        expected_detection: expect.detected,
        expected_class: expect.class,
        matched,
        trace: net.trace().to_vec(),
    })
}

#[cfg(test)]
mod tests;
