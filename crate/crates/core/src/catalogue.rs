//! Cross-reference of proved component pairs, persisted as XML.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Serialize, Serializer};

use crate::rollback::Verdict;
use crate::xml::{self, SchemaIssue, XmlWriter};

#[derive(Debug, thiserror::Error)]
pub enum CatalogueError {
    #[error("malformed catalogue entry: {0}")]
    MalformedEntry(String),
    #[error("malformed catalogue document: {0}")]
    MalformedDocument(String),
    #[error("catalogue schema violation: {0}")]
    SchemaViolation(String),
    #[error("catalogue i/o on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<SchemaIssue> for CatalogueError {
    fn from(issue: SchemaIssue) -> Self {
        CatalogueError::SchemaViolation(issue.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofVerdict {
    Works,
    DoesNotWork,
    WorksAfterRollback,
}

impl ProofVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ProofVerdict::Works => "works",
            ProofVerdict::DoesNotWork => "does-not-work",
            ProofVerdict::WorksAfterRollback => "works-after-rollback",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ProofVerdict::Works, ProofVerdict::DoesNotWork, ProofVerdict::WorksAfterRollback]
            .into_iter()
            .find(|v| v.as_str() == s)
    }
}

impl From<&Verdict> for ProofVerdict {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Works => ProofVerdict::Works,
            Verdict::DoesNotWork { .. } => ProofVerdict::DoesNotWork,
            Verdict::WorksAfterRollback(_) => ProofVerdict::WorksAfterRollback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignedRevisions {
    pub a_rev: String,
    pub b_rev: String,
}

/// One proof: `a` requires `port`, `b` provides it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogueEntry {
    pub a_id: String,
    pub a_rev: String,
    pub b_id: String,
    pub b_rev: String,
    pub port: String,
    pub verdict: ProofVerdict,
    pub aligned: Option<AlignedRevisions>,
    #[serde(serialize_with = "serialize_timestamp")]
    pub checked_at: DateTime<Utc>,
}

fn serialize_timestamp<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_timestamp(ts))
}

fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Uniqueness key of an entry; also the catalogue's sort order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryKey {
    pub a_id: String,
    pub a_rev: String,
    pub b_id: String,
    pub b_rev: String,
    pub port: String,
}

impl CatalogueEntry {
    pub fn key(&self) -> EntryKey {
        EntryKey {
            a_id: self.a_id.clone(),
            a_rev: self.a_rev.clone(),
            b_id: self.b_id.clone(),
            b_rev: self.b_rev.clone(),
            port: self.port.clone(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        for (name, value) in [
            ("a", &self.a_id),
            ("a-rev", &self.a_rev),
            ("b", &self.b_id),
            ("b-rev", &self.b_rev),
            ("port", &self.port),
        ] {
            if value.is_empty() {
                return Err(format!("`{name}` is empty"));
            }
        }
        match (self.verdict, &self.aligned) {
            (ProofVerdict::WorksAfterRollback, None) => {
                Err("works-after-rollback entries need aligned revisions".into())
            }
            (ProofVerdict::WorksAfterRollback, Some(a)) if a.a_rev.is_empty() || a.b_rev.is_empty() => {
                Err("aligned revisions must be non-empty".into())
            }
            (ProofVerdict::Works | ProofVerdict::DoesNotWork, Some(_)) => {
                Err(format!("{} entries carry no aligned revisions", self.verdict.as_str()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PartnerRow {
    pub partner: String,
    pub port: String,
    pub verdict: ProofVerdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalogue {
    entries: BTreeMap<EntryKey, CatalogueEntry>,
}

impl Catalogue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = &CatalogueEntry> {
        self.entries.values()
    }

    /// Inserts `entry`, replacing any entry with the same key.
    pub fn record(&mut self, entry: CatalogueEntry) -> Result<(), CatalogueError> {
        entry.validate().map_err(CatalogueError::MalformedEntry)?;
        self.entries.insert(entry.key(), entry);
        Ok(())
    }

    /// Entries between `a` and `b` in either orientation.
    pub fn query(&self, a: &str, b: &str) -> Vec<&CatalogueEntry> {
        self.entries()
            .filter(|e| (e.a_id == a && e.b_id == b) || (e.a_id == b && e.b_id == a))
            .collect()
    }

    pub fn partners(&self, id: &str) -> Vec<PartnerRow> {
        let mut rows = BTreeSet::new();
        for e in self.entries() {
            if e.a_id == id {
                rows.insert(PartnerRow { partner: e.b_id.clone(), port: e.port.clone(), verdict: e.verdict });
            }
            if e.b_id == id {
                rows.insert(PartnerRow { partner: e.a_id.clone(), port: e.port.clone(), verdict: e.verdict });
            }
        }
        rows.into_iter().collect()
    }

    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        if self.entries.is_empty() {
            w.empty(0, "catalogue", &[]);
            return w.finish();
        }
        w.open(0, "catalogue", &[]);
        for e in self.entries() {
            let checked_at = format_timestamp(&e.checked_at);
            let mut attrs = vec![
                ("a", e.a_id.as_str()),
                ("a-rev", e.a_rev.as_str()),
                ("b", e.b_id.as_str()),
                ("b-rev", e.b_rev.as_str()),
                ("port", e.port.as_str()),
                ("verdict", e.verdict.as_str()),
            ];
            if let Some(aligned) = &e.aligned {
                attrs.push(("aligned-a-rev", &aligned.a_rev));
                attrs.push(("aligned-b-rev", &aligned.b_rev));
            }
            attrs.push(("checked-at", &checked_at));
            w.empty(1, "proof", &attrs);
        }
        w.close(0, "catalogue");
        w.finish()
    }

    pub fn from_xml(text: &str) -> Result<Catalogue, CatalogueError> {
        let doc = xml::parse_document(text).map_err(CatalogueError::MalformedDocument)?;
        let root = doc.root_element();
        xml::expect_element(root, "catalogue")?;
        xml::check_attrs(root, &[])?;
        let mut cat = Catalogue::new();
        for el in xml::element_children(root)? {
            xml::expect_element(el, "proof")?;
            xml::check_attrs(
                el,
                &["a", "a-rev", "b", "b-rev", "port", "verdict", "aligned-a-rev", "aligned-b-rev", "checked-at"],
            )?;
            let raw_verdict = xml::required_attr(el, "verdict")?;
            let verdict = ProofVerdict::parse(raw_verdict)
                .ok_or_else(|| CatalogueError::SchemaViolation(format!("unknown verdict `{raw_verdict}`")))?;
            let aligned = match (el.attribute("aligned-a-rev"), el.attribute("aligned-b-rev")) {
                (None, None) => None,
                (Some(a), Some(b)) => Some(AlignedRevisions { a_rev: a.to_owned(), b_rev: b.to_owned() }),
                _ => {
                    return Err(CatalogueError::SchemaViolation(
                        "aligned-a-rev and aligned-b-rev must appear together".into(),
                    ))
                }
            };
            let raw_ts = xml::required_attr(el, "checked-at")?;
            let checked_at = DateTime::parse_from_rfc3339(raw_ts)
                .map_err(|e| CatalogueError::SchemaViolation(format!("bad checked-at `{raw_ts}`: {e}")))?
                .with_timezone(&Utc);
            let entry = CatalogueEntry {
                a_id: xml::required_attr(el, "a")?.to_owned(),
                a_rev: xml::required_attr(el, "a-rev")?.to_owned(),
                b_id: xml::required_attr(el, "b")?.to_owned(),
                b_rev: xml::required_attr(el, "b-rev")?.to_owned(),
                port: xml::required_attr(el, "port")?.to_owned(),
                verdict,
                aligned,
                checked_at,
            };
            entry.validate().map_err(CatalogueError::SchemaViolation)?;
            if cat.entries.insert(entry.key(), entry).is_some() {
                return Err(CatalogueError::SchemaViolation("duplicate proof key".into()));
            }
        }
        Ok(cat)
    }

    /// Reads a catalogue file; a missing file is an empty catalogue.
    pub fn load(path: &Path) -> Result<Catalogue, CatalogueError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Catalogue::from_xml(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Catalogue::new()),
            Err(source) => Err(CatalogueError::Io { path: path.display().to_string(), source }),
        }
    }

    /// Writes through a temporary file in the same directory and renames it
    /// over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CatalogueError> {
        let io_err = |source| CatalogueError::Io { path: path.display().to_string(), source };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        tmp.write_all(self.to_xml().as_bytes()).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(path).map_err(|e| io_err(e.error))?;
        Ok(())
    }
}
