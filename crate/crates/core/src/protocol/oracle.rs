use serde::{Deserialize, Serialize};

use crate::model::{LocationId, PartyId};

/// Stand-in for physical secure localization (distance bounding and the like).
pub trait LocalizationOracle {
    /// Whether `prover` is physically at `location` at global time `t`.
    fn present(&self, prover: &PartyId, location: &LocationId, t: u64) -> bool;

    /// Whether `prover` and `witness` are at the same place at `t`.
    fn co_located(&self, prover: &PartyId, witness: &PartyId, t: u64) -> bool;
}

/// `party` is at `location` during `[from, to)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stay {
    pub party: PartyId,
    pub location: LocationId,
    pub from: u64,
    pub to: u64,
}

/// Answers from a fixed schedule of stays.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleOracle {
    pub stays: Vec<Stay>,
}

impl ScheduleOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, party: PartyId, location: LocationId, from: u64, to: u64) {
        self.stays.push(Stay { party, location, from, to });
    }

    /// Locations `party` occupies at `t`. A party may sit inside nested areas.
    pub fn whereabouts<'a>(&'a self, party: &'a PartyId, t: u64) -> impl Iterator<Item = &'a LocationId> + 'a {
        self.stays.iter().filter(move |s| &s.party == party && s.from <= t && t < s.to).map(|s| &s.location)
    }
}

impl LocalizationOracle for ScheduleOracle {
    fn present(&self, prover: &PartyId, location: &LocationId, t: u64) -> bool {
        self.whereabouts(prover, t).any(|l| l == location)
    }

    fn co_located(&self, prover: &PartyId, witness: &PartyId, t: u64) -> bool {
        self.whereabouts(prover, t).any(|l| self.present(witness, l, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_answers() {
        let mut o = ScheduleOracle::new();
        let (u, w) = (PartyId::new("u"), PartyId::new("w"));
        let cafe = LocationId::new("cafe");
        o.add(u.clone(), cafe.clone(), 100, 200);
        o.add(w.clone(), cafe.clone(), 0, u64::MAX);
        assert!(!o.present(&u, &cafe, 99));
        assert!(o.present(&u, &cafe, 100));
        assert!(!o.present(&u, &cafe, 200));
        assert!(o.co_located(&u, &w, 150));
        assert!(!o.co_located(&u, &w, 250));
        assert!(!o.co_located(&PartyId::new("x"), &w, 150));
    }
}
