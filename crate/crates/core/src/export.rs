//! Versioned JSON documents exchanged between the simulator, the auditor and
//! other tools. Every document is an object carrying `format_version` and
//! `kind` next to its own fields.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::audit::{AuditReport, LocationClaim, ThreatClass};
use crate::crypto::Profile;
use crate::directory::Directory;
use crate::epoch::EpochRegistry;
use crate::model::RevealedSubsequence;
use crate::sim::ScenarioOutcome;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a JSON object")]
    NotAnObject,
    #[error("unsupported format_version {found:?}, expected {FORMAT_VERSION}")]
    Version { found: Option<u64> },
    #[error("expected a `{expected}` document, found {found:?}")]
    Kind { expected: &'static str, found: Option<String> },
}

pub trait Document: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("format_version".into(), FORMAT_VERSION.into());
        obj.insert("kind".into(), Self::KIND.into());
        match serde_json::to_value(self).expect("documents serialize") {
            Value::Object(fields) => obj.extend(fields),
            _ => unreachable!("documents are structs"),
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("documents serialize")
    }

    fn from_json(text: &str) -> Result<Self, ExportError> {
        let Value::Object(mut obj) = serde_json::from_str(text)? else {
            return Err(ExportError::NotAnObject);
        };
        let version = obj.remove("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(ExportError::Version { found: version });
        }
        let kind = obj.remove("kind").and_then(|v| v.as_str().map(str::to_owned));
        if kind.as_deref() != Some(Self::KIND) {
            return Err(ExportError::Kind { expected: Self::KIND, found: kind });
        }
        Ok(serde_json::from_value(Value::Object(obj))?)
    }
}

/// Everything an auditor needs besides the claims and the registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub profile: Profile,
    pub directory: Directory,
    pub presentation: RevealedSubsequence,
}

impl Document for ChainDocument {
    const KIND: &'static str = "chain";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimsDocument {
    pub claims: Vec<LocationClaim>,
}

impl Document for ClaimsDocument {
    const KIND: &'static str = "claims";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryDocument {
    pub registry: EpochRegistry,
}

impl Document for RegistryDocument {
    const KIND: &'static str = "registry";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub ok: bool,
    pub class: Option<ThreatClass>,
    pub report: AuditReport,
}

impl Document for ReportDocument {
    const KIND: &'static str = "audit-report";
}

/// Condensed scenario result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDocument {
    pub name: String,
    pub row: String,
    pub scheme: crate::ordering::OrderingScheme,
    pub profile: Profile,
    pub detected: bool,
    pub class: Option<ThreatClass>,
    pub expected_detection: bool,
    pub expected_class: Option<ThreatClass>,
    pub matched: bool,
    pub report: AuditReport,
}

impl Document for OutcomeDocument {
    const KIND: &'static str = "scenario-outcome";
}

impl ScenarioOutcome {
    pub fn chain_document(&self) -> ChainDocument {
        ChainDocument { profile: self.profile, directory: self.directory.clone(), presentation: self.presentation.clone() }
    }

    pub fn claims_document(&self) -> ClaimsDocument {
        ClaimsDocument { claims: self.claims.clone() }
    }

    pub fn registry_document(&self) -> RegistryDocument {
        RegistryDocument { registry: self.registry.clone() }
    }

    pub fn outcome_document(&self) -> OutcomeDocument {
        OutcomeDocument {
            name: self.name.clone(),
            row: self.honesty.row(),
            scheme: self.scheme,
            profile: self.profile,
            detected: self.detected,
            class: self.class,
            expected_detection: self.expected_detection,
            expected_class: self.expected_class,
            matched: self.matched,
            report: self.report.clone(),
        }
    }
}
