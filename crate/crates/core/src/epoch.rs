//! Per-location epoch reports: at the end of every epoch an authority
//! publishes a signed accumulator of the digests of every proof it issued
//! during that epoch. Auditors use them to catch proofs minted outside the
//! epoch their timestamp claims.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{Digest, KeyPair, Profile, PublicKey, Signature};
use crate::encoding::{Encoder, Tag};
use crate::model::{LocationId, LocationProof};
use crate::ordering::{BloomAccumulator, BloomError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochConfig {
    pub epoch_ms: u64,
    pub capacity: u64,
    pub fpr: f64,
}

impl Default for EpochConfig {
    fn default() -> Self {
        EpochConfig { epoch_ms: 300_000, capacity: 4096, fpr: 0.001 }
    }
}

impl EpochConfig {
    pub fn epoch_of(&self, t: u64) -> u64 {
        t / self.epoch_ms
    }

    /// Half-open `[start, end)`.
    pub fn bounds(&self, epoch: u64) -> (u64, u64) {
        (epoch * self.epoch_ms, (epoch + 1) * self.epoch_ms)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpochError {
    #[error("epoch report signature does not verify")]
    BadSignature,
    #[error("report for {location} epoch {epoch} is not after the last published epoch")]
    OutOfOrder { location: LocationId, epoch: u64 },
    #[error("no epoch report covers time {time} at {location}")]
    NoReport { location: LocationId, time: u64 },
    #[error(transparent)]
    Bloom(#[from] BloomError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub location: LocationId,
    pub epoch_id: u64,
    pub start: u64,
    pub end: u64,
    pub accumulator: BloomAccumulator,
    pub report_sig: Signature,
}

impl EpochReport {
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut enc = Encoder::new(Tag::EpochReport);
        enc.str(&self.location.0).u64(self.epoch_id).u64(self.start).u64(self.end).nested(&self.accumulator);
        enc.finish()
    }

    pub fn verify(&self, authority: &PublicKey) -> bool {
        authority.verify(&self.signing_payload(), &self.report_sig) && self.accumulator.verify_signature(authority)
    }

    pub fn covers(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.accumulator.contains(digest.as_bytes())
    }
}

/// Whether `lp` is listed in `report`, after checking the report signature.
pub fn check_inclusion(
    report: &EpochReport,
    lp: &LocationProof,
    authority: &PublicKey,
    profile: Profile,
) -> Result<bool, EpochError> {
    if !report.verify(authority) {
        return Err(EpochError::BadSignature);
    }
    Ok(report.contains(&lp.digest(profile)))
}

/// Authority-side list of issued digests, bucketed by epoch.
#[derive(Clone, Debug)]
pub struct EpochBook {
    location: LocationId,
    config: EpochConfig,
    pending: BTreeMap<u64, Vec<Digest>>,
    next_epoch: u64,
}

impl EpochBook {
    /// `start_time` is the authority's local time when it comes online.
    pub fn new(location: LocationId, config: EpochConfig, start_time: u64) -> Self {
        EpochBook { location, config, pending: BTreeMap::new(), next_epoch: config.epoch_of(start_time) }
    }

    pub fn config(&self) -> &EpochConfig {
        &self.config
    }

    /// First epoch not yet closed.
    pub fn current_epoch(&self) -> u64 {
        self.next_epoch
    }

    /// Lists a digest under the epoch containing `issued_at`, or the first
    /// open epoch if that one is already closed.
    pub fn record(&mut self, digest: Digest, issued_at: u64) {
        let epoch = self.config.epoch_of(issued_at).max(self.next_epoch);
        self.pending.entry(epoch).or_default().push(digest);
    }

    /// Holds a digest back and lists it under a later epoch.
    pub fn defer(&mut self, digest: Digest, epoch: u64) {
        self.pending.entry(epoch.max(self.next_epoch)).or_default().push(digest);
    }

    pub fn pending(&self, epoch: u64) -> &[Digest] {
        self.pending.get(&epoch).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Closes the current epoch, whether or not anything was issued in it.
    pub fn close_epoch(&mut self, keys: &KeyPair) -> Result<EpochReport, EpochError> {
        let epoch = self.next_epoch;
        let (start, end) = self.config.bounds(epoch);
        let mut acc = BloomAccumulator::new(self.config.capacity, self.config.fpr)?;
        for d in self.pending.remove(&epoch).unwrap_or_default() {
            acc = acc.insert(d.as_bytes());
        }
        let accumulator = acc.sign(keys);
        let mut report = EpochReport {
            location: self.location.clone(),
            epoch_id: epoch,
            start,
            end,
            accumulator,
            report_sig: Signature(Vec::new()),
        };
        report.report_sig = keys.sign(&report.signing_payload());
        self.next_epoch += 1;
        Ok(report)
    }

    /// Closes every epoch whose end is at or before `now`.
    pub fn close_due(&mut self, now: u64, keys: &KeyPair) -> Result<Vec<EpochReport>, EpochError> {
        let mut out = Vec::new();
        while self.config.bounds(self.next_epoch).1 <= now {
            out.push(self.close_epoch(keys)?);
        }
        Ok(out)
    }
}

/// Append-only store of published reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRegistry {
    reports: BTreeMap<LocationId, Vec<EpochReport>>,
}

impl EpochRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&mut self, report: EpochReport) -> Result<(), EpochError> {
        let list = self.reports.entry(report.location.clone()).or_default();
        if let Some(last) = list.last() {
            if report.epoch_id <= last.epoch_id || report.start < last.end {
                return Err(EpochError::OutOfOrder { location: report.location, epoch: report.epoch_id });
            }
        }
        list.push(report);
        Ok(())
    }

    pub fn lookup(&self, location: &LocationId, t: u64) -> Result<&EpochReport, EpochError> {
        let none = || EpochError::NoReport { location: location.clone(), time: t };
        let list = self.reports.get(location).ok_or_else(none)?;
        let idx = list.partition_point(|r| r.end <= t);
        list.get(idx).filter(|r| r.covers(t)).ok_or_else(none)
    }

    pub fn reports(&self, location: &LocationId) -> &[EpochReport] {
        self.reports.get(location).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Epoch of the first report at `location` listing `digest`.
    pub fn find_digest(&self, location: &LocationId, digest: &Digest) -> Option<u64> {
        self.reports(location).iter().find(|r| r.contains(digest)).map(|r| r.epoch_id)
    }

    pub fn locations(&self) -> impl Iterator<Item = &LocationId> {
        self.reports.keys()
    }

    pub fn len(&self) -> usize {
        self.reports.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_proof, make_statement, PartyId, Statement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    const P: Profile = Profile::Modern;

    fn config() -> EpochConfig {
        EpochConfig { epoch_ms: 1000, capacity: 64, fpr: 0.001 }
    }

    fn lp(keys: &KeyPair, user: &str, t: u64) -> LocationProof {
        make_proof(keys, Statement::Plain(make_statement(PartyId::new(user), LocationId::new("gym"), t).unwrap()))
    }

    #[test]
    fn close_lists_every_issued_digest() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let proofs: Vec<_> = [10, 400, 999].iter().map(|&t| lp(&keys, "u", t)).collect();
        for p in &proofs {
            book.record(p.digest(P), p.statement.visit_time());
        }
        let late = lp(&keys, "u", 1200);
        book.record(late.digest(P), 1200);
        let r0 = book.close_epoch(&keys).unwrap();
        let r1 = book.close_epoch(&keys).unwrap();
        for p in &proofs {
            assert!(check_inclusion(&r0, p, keys.public(), P).unwrap());
            assert!(!check_inclusion(&r1, p, keys.public(), P).unwrap());
        }
        assert!(check_inclusion(&r1, &late, keys.public(), P).unwrap());
        assert_eq!((r0.start, r0.end, r1.start, r1.end), (0, 1000, 1000, 2000));
    }

    #[test]
    fn empty_epoch_still_reports() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let reports = book.close_due(3500, &keys).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.verify(keys.public()) && r.accumulator.popcount() == 0));
        assert_eq!(book.current_epoch(), 3);
    }

    #[test]
    fn backdated_proof_is_absent() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let r0 = book.close_epoch(&keys).unwrap();
        // minted after epoch 0 closed, claiming a time inside it
        let forged = lp(&keys, "u", 500);
        book.record(forged.digest(P), 1500);
        assert!(!check_inclusion(&r0, &forged, keys.public(), P).unwrap());
        let r1 = book.close_epoch(&keys).unwrap();
        assert!(r1.contains(&forged.digest(P)));
    }

    #[test]
    fn tampered_report_rejected() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let mut r = book.close_epoch(&keys).unwrap();
        r.end += 1;
        assert_eq!(check_inclusion(&r, &lp(&keys, "u", 1), keys.public(), P), Err(EpochError::BadSignature));
    }

    #[test]
    fn lookup_boundaries() {
        let keys = P.keygen(&[4; 32]);
        let loc = LocationId::new("gym");
        let mut book = EpochBook::new(loc.clone(), config(), 2000);
        let mut reg = EpochRegistry::new();
        for r in book.close_due(5000, &keys).unwrap() {
            reg.publish(r).unwrap();
        }
        assert!(matches!(reg.lookup(&loc, 1999), Err(EpochError::NoReport { .. })));
        assert!(matches!(reg.lookup(&loc, 5000), Err(EpochError::NoReport { .. })));
        for boundary in [2000u64, 3000, 4000] {
            for t in boundary.saturating_sub(1)..=boundary + 1 {
                // oracle: the unique epoch whose integer division by 1000 equals t / 1000
                let expected = t / 1000;
                match reg.lookup(&loc, t) {
                    Ok(r) => assert_eq!(r.epoch_id, expected, "t = {t}"),
                    Err(_) => assert!(t < 2000, "t = {t}"),
                }
            }
        }
        assert!(matches!(reg.lookup(&LocationId::new("nowhere"), 2500), Err(EpochError::NoReport { .. })));
    }

    #[test]
    fn registry_is_append_only() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let r0 = book.close_epoch(&keys).unwrap();
        let r1 = book.close_epoch(&keys).unwrap();
        let mut reg = EpochRegistry::new();
        reg.publish(r1).unwrap();
        assert!(matches!(reg.publish(r0), Err(EpochError::OutOfOrder { .. })));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn deferred_digest_lands_in_future_epoch() {
        let keys = P.keygen(&[4; 32]);
        let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
        let p = lp(&keys, "u", 3100);
        book.defer(p.digest(P), 3);
        let reports = book.close_due(4000, &keys).unwrap();
        assert!(!reports[0].contains(&p.digest(P)));
        assert!(reports[3].contains(&p.digest(P)));
    }

    /// Reports hold digests only: serialized reports never contain a user id.
    #[test]
    fn reports_leak_no_user_ids() {
        let keys = P.keygen(&[4; 32]);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for round in 0..1000u64 {
            let mut book = EpochBook::new(LocationId::new("gym"), config(), 0);
            let user = format!("user-{:08x}", rng.gen::<u32>());
            let n = rng.gen_range(1..4);
            for i in 0..n {
                let t = rng.gen_range(0..1000);
                book.record(lp(&keys, &user, t + i).digest(P), t);
            }
            let report = book.close_epoch(&keys).unwrap();
            let json = serde_json::to_string(&report).unwrap();
            assert!(!json.contains(&user), "round {round}");
            assert!(!report.signing_payload().windows(user.len()).any(|w| w == user.as_bytes()));
        }
    }

    #[test]
    fn inclusion_false_positive_rate() {
        let keys = P.keygen(&[4; 32]);
        let cfg = EpochConfig { epoch_ms: 1000, capacity: 200, fpr: 0.01 };
        let mut book = EpochBook::new(LocationId::new("gym"), cfg, 0);
        for t in 0..200 {
            book.record(lp(&keys, "member", t).digest(P), t);
        }
        let report = book.close_epoch(&keys).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let trials = 20_000;
        let hits = (0..trials)
            .filter(|_| {
                let d = Digest((0..32).map(|_| rng.gen()).collect());
                report.contains(&d)
            })
            .count();
        // Monte Carlo estimate against twice the configured rate
        assert!((hits as f64 / trials as f64) <= 0.02, "{hits} false hits");
    }
}
