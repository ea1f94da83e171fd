//! Auditing a presented subsequence against the holder's location claims.
//!
//! Each claim is checked against the entry shown at the same index: proof
//! signature, endorsements, granularity, time and epoch inclusion. The order
//! of the entries is then checked by the chain's ordering scheme, and the
//! presentation signature ties the whole subsequence to its holder.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::crypto::{Profile, Suite};
use crate::directory::{Directory, Role};
use crate::epoch::EpochRegistry;
use crate::model::{LocationId, ProvenanceEntry, RevealedSubsequence, Statement};
use crate::ordering::{verify_order, OrderingStatus, OrderingVerdict};

/// `<L, t>` as asserted by the holder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationClaim {
    pub location: LocationId,
    pub time: u64,
}

impl LocationClaim {
    pub fn new(location: impl Into<String>, time: u64) -> Self {
        LocationClaim { location: LocationId::new(location), time }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub suite: Suite,
    pub window_ms: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { suite: Suite::default(), window_ms: 60_000 }
    }
}

impl AuditConfig {
    pub fn for_profile(profile: Profile) -> Self {
        AuditConfig { suite: Suite::new(profile), ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignedPart {
    Proof,
    Endorsement,
    Timestamp,
    EpochReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    /// Endorsement bound to another proof digest.
    Digest,
    /// Endorsement names another user, location or visit time.
    Fields,
    /// `t_e` outside `[t, t + window]`.
    Window,
    Missing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ClaimIssue {
    BadSignature { part: SignedPart, endorsement: Option<usize> },
    EndorsementMismatch { kind: MismatchKind, endorsement: Option<usize> },
    GranularityMismatch { claimed: LocationId },
    EpochMissing,
    /// The digest is absent from the epoch covering the proof time.
    /// `listed_in` is another epoch at the same location that lists it.
    EpochExcluded { claimed_epoch: u64, listed_in: Option<u64> },
    TimeMismatch { claimed: u64, proof: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Ok,
    BadSignature,
    EndorsementMismatch,
    GranularityMismatch,
    EpochMissing,
    EpochExcluded,
    TimeMismatch,
}

impl ClaimIssue {
    pub fn status(&self) -> ClaimStatus {
        match self {
            ClaimIssue::BadSignature { .. } => ClaimStatus::BadSignature,
            ClaimIssue::EndorsementMismatch { .. } => ClaimStatus::EndorsementMismatch,
            ClaimIssue::GranularityMismatch { .. } => ClaimStatus::GranularityMismatch,
            ClaimIssue::EpochMissing => ClaimStatus::EpochMissing,
            ClaimIssue::EpochExcluded { .. } => ClaimStatus::EpochExcluded,
            ClaimIssue::TimeMismatch { .. } => ClaimStatus::TimeMismatch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimVerdict {
    pub index: usize,
    pub position: usize,
    pub issues: Vec<ClaimIssue>,
    /// At least one endorsement carries a valid signature from a listed witness.
    pub witness_signed: bool,
}

impl ClaimVerdict {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn status(&self) -> ClaimStatus {
        self.issues.first().map_or(ClaimStatus::Ok, ClaimIssue::status)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum PresentationIssue {
    Unsigned,
    UnknownHolder,
    BadSignature,
    /// A revealed proof names someone other than the holder.
    HolderMismatch { position: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreatClass {
    FalsePresence,
    Backdating,
    FutureDating,
    Reordering,
    Implication,
    FalseEndorsement,
    ProofSwitching,
    Unclassified,
}

impl ThreatClass {
    pub fn label(self) -> &'static str {
        match self {
            ThreatClass::FalsePresence => "false presence",
            ThreatClass::Backdating => "backdating",
            ThreatClass::FutureDating => "future dating",
            ThreatClass::Reordering => "reordering",
            ThreatClass::Implication => "implication",
            ThreatClass::FalseEndorsement => "false endorsement",
            ThreatClass::ProofSwitching => "proof switching",
            ThreatClass::Unclassified => "unclassified",
        }
    }
}

impl std::fmt::Display for ThreatClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ThreatClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            ThreatClass::FalsePresence,
            ThreatClass::Backdating,
            ThreatClass::FutureDating,
            ThreatClass::Reordering,
            ThreatClass::Implication,
            ThreatClass::FalseEndorsement,
            ThreatClass::ProofSwitching,
            ThreatClass::Unclassified,
        ];
        let norm = s.replace(['_', '-'], " ");
        all.into_iter().find(|c| c.label() == norm).ok_or_else(|| format!("unknown threat class `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Set when the inputs cannot be paired up at all.
    pub structure: Option<String>,
    pub claims: Vec<ClaimVerdict>,
    pub ordering: OrderingVerdict,
    pub presentation: Vec<PresentationIssue>,
    pub warnings: Vec<String>,
    pub signatures_verified: usize,
}

impl AuditReport {
    pub fn is_ok(&self) -> bool {
        self.structure.is_none()
            && self.claims.iter().all(ClaimVerdict::is_ok)
            && self.ordering.is_ok()
            && self.presentation.is_empty()
    }

    pub fn links_checked(&self) -> usize {
        self.ordering.links_checked
    }

    pub fn accumulators_checked(&self) -> usize {
        self.ordering.accumulators_checked
    }

    fn issues(&self) -> impl Iterator<Item = (&ClaimVerdict, &ClaimIssue)> {
        self.claims.iter().flat_map(|c| c.issues.iter().map(move |i| (c, i)))
    }

    /// Human-readable summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let verdict = if self.is_ok() { "OK".to_string() } else { format!("FAILED ({})", classify_failure(self)) };
        let _ = writeln!(out, "audit: {verdict}");
        if let Some(s) = &self.structure {
            let _ = writeln!(out, "  structure: {s}");
        }
        for c in &self.claims {
            let _ = writeln!(out, "  claim {} (position {}): {:?}", c.index + 1, c.position, c.status());
            for i in &c.issues {
                let _ = writeln!(out, "    - {i:?}");
            }
        }
        let _ = write!(out, "  ordering: {:?}", self.ordering.status);
        if let Some(d) = &self.ordering.detail {
            let _ = write!(out, " ({d})");
        }
        let _ = writeln!(
            out,
            "\n  links checked: {}, accumulators checked: {}, signatures verified: {}",
            self.ordering.links_checked, self.ordering.accumulators_checked, self.signatures_verified
        );
        for p in &self.presentation {
            let _ = writeln!(out, "  presentation: {p:?}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        out
    }
}

/// Runs every check and collects all findings rather than stopping at the first.
pub fn audit(
    claims: &[LocationClaim],
    sub: &RevealedSubsequence,
    directory: &Directory,
    registry: Option<&EpochRegistry>,
    config: &AuditConfig,
) -> AuditReport {
    let mut report = AuditReport {
        structure: None,
        claims: Vec::new(),
        ordering: OrderingVerdict {
            status: OrderingStatus::Incomplete,
            position: None,
            detail: None,
            links_checked: 0,
            accumulators_checked: 0,
            signatures_verified: 0,
        },
        presentation: Vec::new(),
        warnings: Vec::new(),
        signatures_verified: 0,
    };
    if claims.len() != sub.entries.len() {
        report.structure =
            Some(format!("{} claims for {} revealed entries", claims.len(), sub.entries.len()));
        return report;
    }
    if sub.entries.is_empty() {
        report.structure = Some("nothing revealed".into());
        return report;
    }
    if registry.is_none() {
        report.warnings.push("no epoch registry supplied; epoch inclusion not checked".into());
    }

    let mut sigs = 0;
    for (index, (claim, r)) in claims.iter().zip(&sub.entries).enumerate() {
        let verdict = check_claim(index, r.position, claim, &r.entry, directory, registry, config, &mut sigs);
        report.claims.push(verdict);
    }

    let ordering = verify_order(sub, directory, config.suite.profile);
    sigs += ordering.signatures_verified;
    report.ordering = ordering;

    match directory.get(&sub.holder) {
        Some(e) if e.role == Role::User => match &sub.holder_sig {
            None => report.presentation.push(PresentationIssue::Unsigned),
            Some(_) => {
                sigs += 1;
                if !sub.verify_holder(&e.key) {
                    report.presentation.push(PresentationIssue::BadSignature);
                }
            }
        },
        _ => report.presentation.push(PresentationIssue::UnknownHolder),
    }
    for r in &sub.entries {
        if r.entry.elp.proof.statement.user() != &sub.holder {
            report.presentation.push(PresentationIssue::HolderMismatch { position: r.position });
        }
    }
    report.signatures_verified = sigs;
    report
}

#[allow(clippy::too_many_arguments)]
fn check_claim(
    index: usize,
    position: usize,
    claim: &LocationClaim,
    entry: &ProvenanceEntry,
    directory: &Directory,
    registry: Option<&EpochRegistry>,
    config: &AuditConfig,
    sigs: &mut usize,
) -> ClaimVerdict {
    let profile = config.suite.profile;
    let lp = &entry.elp.proof;
    let st = &lp.statement;
    let mut issues = Vec::new();
    let authority = directory.authority_key(st.location());

    let proof_ok = authority.is_some_and(|k| {
        *sigs += 1;
        lp.verify(k)
    });
    if !proof_ok {
        issues.push(ClaimIssue::BadSignature { part: SignedPart::Proof, endorsement: None });
    }

    let digest = lp.digest(profile);
    let mut witness_signed = false;
    if entry.elp.endorsements.is_empty() {
        issues.push(ClaimIssue::EndorsementMismatch { kind: MismatchKind::Missing, endorsement: None });
    }
    for (i, e) in entry.elp.endorsements.iter().enumerate() {
        let at = Some(i);
        let witness = directory.get(&e.statement.witness).filter(|w| w.role == Role::Witness);
        let w_ok = witness.is_some_and(|w| {
            *sigs += 1;
            e.verify_witness(&w.key)
        });
        if w_ok {
            witness_signed = true;
        } else {
            issues.push(ClaimIssue::BadSignature { part: SignedPart::Endorsement, endorsement: at });
        }
        let ts_ok = directory.authority_key(&e.statement.location).is_some_and(|k| {
            *sigs += 1;
            e.verify_timestamp(k)
        });
        if !ts_ok {
            issues.push(ClaimIssue::BadSignature { part: SignedPart::Timestamp, endorsement: at });
        }
        if e.statement.proof_digest != digest {
            issues.push(ClaimIssue::EndorsementMismatch { kind: MismatchKind::Digest, endorsement: at });
        }
        if !e.fields_match(lp) {
            issues.push(ClaimIssue::EndorsementMismatch { kind: MismatchKind::Fields, endorsement: at });
        }
        if !e.within_window(config.window_ms) {
            issues.push(ClaimIssue::EndorsementMismatch { kind: MismatchKind::Window, endorsement: at });
        }
    }

    if !location_matches(claim, st, &config.suite) {
        issues.push(ClaimIssue::GranularityMismatch { claimed: claim.location.clone() });
    }
    if claim.time != st.visit_time() {
        issues.push(ClaimIssue::TimeMismatch { claimed: claim.time, proof: st.visit_time() });
    }

    if let Some(reg) = registry {
        let loc = st.location();
        match reg.lookup(loc, st.visit_time()) {
            Err(_) => issues.push(ClaimIssue::EpochMissing),
            Ok(report) => {
                let report_ok = authority.is_some_and(|k| {
                    *sigs += 2;
                    report.verify(k)
                });
                if !report_ok {
                    issues.push(ClaimIssue::BadSignature { part: SignedPart::EpochReport, endorsement: None });
                } else if !report.contains(&digest) {
                    let listed_in = reg
                        .reports(loc)
                        .iter()
                        .filter(|r| r.epoch_id != report.epoch_id)
                        .find(|r| r.contains(&digest))
                        .map(|r| r.epoch_id);
                    issues.push(ClaimIssue::EpochExcluded { claimed_epoch: report.epoch_id, listed_in });
                }
            }
        }
    }

    ClaimVerdict { index, position, issues, witness_signed }
}

/// The claimed location is the proof's location, or a disclosed granularity
/// whose opening matches its commitment. A disclosed opening that does not
/// match its commitment fails the claim outright.
fn location_matches(claim: &LocationClaim, st: &Statement, suite: &Suite) -> bool {
    let Some(private) = st.as_private() else {
        return &claim.location == st.location();
    };
    let openings = private.verified_openings(suite);
    if openings.iter().any(|(_, _, ok)| !ok) {
        return false;
    }
    &claim.location == st.location() || openings.iter().any(|(_, o, _)| o.value == claim.location.0)
}

/// Maps a failed report to the threat it evidences. A clean report maps to `Unclassified`.
pub fn classify_failure(report: &AuditReport) -> ThreatClass {
    if report.is_ok() {
        return ThreatClass::Unclassified;
    }
    if !report.presentation.is_empty() {
        return ThreatClass::Implication;
    }
    let issues: Vec<_> = report.issues().collect();
    if issues
        .iter()
        .any(|(_, i)| matches!(i, ClaimIssue::EndorsementMismatch { kind: MismatchKind::Digest, .. }))
    {
        return ThreatClass::ProofSwitching;
    }
    if issues.iter().any(|(c, i)| {
        matches!(i, ClaimIssue::BadSignature { part: SignedPart::Proof, .. }) && c.witness_signed
    }) {
        return ThreatClass::FalseEndorsement;
    }
    if issues.iter().any(|(_, i)| {
        matches!(
            i,
            ClaimIssue::BadSignature { part: SignedPart::Proof | SignedPart::Endorsement | SignedPart::Timestamp, .. }
                | ClaimIssue::EndorsementMismatch { .. }
        )
    }) {
        return ThreatClass::FalsePresence;
    }
    for (_, i) in &issues {
        if let ClaimIssue::EpochExcluded { claimed_epoch, listed_in } = i {
            return match listed_in {
                Some(e) if e < claimed_epoch => ThreatClass::FutureDating,
                _ => ThreatClass::Backdating,
            };
        }
    }
    if issues
        .iter()
        .any(|(_, i)| matches!(i, ClaimIssue::GranularityMismatch { .. } | ClaimIssue::TimeMismatch { .. }))
    {
        return ThreatClass::FalsePresence;
    }
    if !report.ordering.is_ok() && report.structure.is_none() && issues.is_empty() {
        return ThreatClass::Reordering;
    }
    ThreatClass::Unclassified
}
