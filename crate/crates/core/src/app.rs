//! Applications: components wired by port links, verified as a whole and
//! changed one member at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::catalogue::ProofVerdict;
use crate::linkage::{LinkageError, MatchReport, MismatchReason, PairContext};
use crate::nmc::{parse_manifest, Nmc, NmcError};
use crate::rollback::{alignment_plan, classify_from, AlignmentStep, Side, Verdict};
use crate::xml::{self, SchemaIssue, XmlWriter};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("malformed application document: {0}")]
    MalformedDocument(String),
    #[error("application schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("member `{0}` appears more than once")]
    DuplicateMember(String),
    #[error("`{port}` is not a required port of `{member}`")]
    UnknownPort { member: String, port: String },
    #[error("member `{reference}`: {source}")]
    Member {
        reference: String,
        #[source]
        source: NmcError,
    },
    #[error("link {link}: {source}")]
    TypingConflict {
        link: Link,
        #[source]
        source: Box<LinkageError>,
    },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<SchemaIssue> for AppError {
    fn from(issue: SchemaIssue) -> Self {
        AppError::SchemaViolation(issue.0)
    }
}

/// `from` requires `port`, `to` provides it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Link {
    pub from: String,
    pub port: String,
    pub to: String,
}

impl Link {
    pub fn new(from: &str, port: &str, to: &str) -> Self {
        Link { from: from.to_owned(), port: port.to_owned(), to: to.to_owned() }
    }

    pub fn touches(&self, id: &str) -> bool {
        self.from == id || self.to == id
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.from, self.port, self.to)
    }
}

/// A component together with the manifest reference it was loaded from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub source: String,
    pub nmc: Nmc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    members: Vec<Member>,
    links: Vec<Link>,
    current_ordinals: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkReport {
    pub link: Link,
    pub report: MatchReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AppVerification {
    pub links: Vec<LinkReport>,
    pub overall: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkVerdict {
    pub link: Link,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExchangeResult {
    pub replaced_id: String,
    pub per_link: Vec<LinkVerdict>,
    pub overall: ProofVerdict,
    /// Whether the application now contains the replacement.
    pub committed: bool,
    pub applied_alignments: Vec<AlignmentStep>,
}

impl Application {
    /// Validates the wiring. `pins` overrides the newest ordinal per member.
    pub fn new(members: Vec<Member>, links: Vec<Link>, pins: BTreeMap<String, usize>) -> Result<Self, AppError> {
        let mut ids = BTreeSet::new();
        for m in &members {
            if !ids.insert(m.nmc.id()) {
                return Err(AppError::DuplicateMember(m.nmc.id().to_owned()));
            }
        }
        let mut current_ordinals: BTreeMap<String, usize> =
            members.iter().map(|m| (m.nmc.id().to_owned(), m.nmc.newest_ordinal())).collect();
        for (id, ordinal) in pins {
            let member = members
                .iter()
                .find(|m| m.nmc.id() == id)
                .ok_or_else(|| AppError::UnknownMember(id.clone()))?;
            if ordinal > member.nmc.newest_ordinal() {
                return Err(AppError::SchemaViolation(format!("pin of `{id}` to unknown ordinal {ordinal}")));
            }
            current_ordinals.insert(id, ordinal);
        }
        let app = Application { members, links, current_ordinals };
        if !app.links.is_empty() && app.members.len() < 2 {
            return Err(AppError::SchemaViolation("links need at least two members".into()));
        }
        for link in &app.links {
            let from = app.member(&link.from).ok_or_else(|| AppError::UnknownMember(link.from.clone()))?;
            app.member(&link.to).ok_or_else(|| AppError::UnknownMember(link.to.clone()))?;
            let view = from
                .at_revision(app.current_ordinals[&link.from])
                .map_err(|source| AppError::Member { reference: link.from.clone(), source })?;
            if view.required_ports(&link.port).next().is_none() {
                return Err(AppError::UnknownPort { member: link.from.clone(), port: link.port.clone() });
            }
        }
        Ok(app)
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn member(&self, id: &str) -> Option<&Nmc> {
        self.members.iter().find(|m| m.nmc.id() == id).map(|m| &m.nmc)
    }

    pub fn current_ordinal(&self, id: &str) -> Option<usize> {
        self.current_ordinals.get(id).copied()
    }

    pub fn current_ordinals(&self) -> &BTreeMap<String, usize> {
        &self.current_ordinals
    }

    fn side(&self, id: &str) -> Side<'_> {
        Side { nmc: self.member(id).expect("links reference members"), ordinal: self.current_ordinals[id] }
    }

    fn check_link(&self, link: &Link) -> Result<MatchReport, AppError> {
        let conflict = |source| AppError::TypingConflict { link: link.clone(), source: Box::new(source) };
        let (from, to) = (self.side(&link.from), self.side(&link.to));
        let ctx = PairContext::new(from.nmc, to.nmc, &link.port).map_err(conflict)?;
        ctx.check(from.ordinal, to.ordinal).map_err(conflict)
    }

    /// Checks every link at the current ordinals.
    pub fn verify(&self) -> Result<AppVerification, AppError> {
        let links = self
            .links
            .iter()
            .map(|link| Ok(LinkReport { link: link.clone(), report: self.check_link(link)? }))
            .collect::<Result<Vec<_>, AppError>>()?;
        let overall = links.iter().all(|l| l.report.ok);
        Ok(AppVerification { links, overall })
    }

    /// Replaces `old_id` by `replacement`, keeping the old manifest reference
    /// when the id is unchanged.
    pub fn exchange(&mut self, old_id: &str, replacement: Nmc, apply_rollback: bool) -> Result<ExchangeResult, AppError> {
        let source = match self.members.iter().find(|m| m.nmc.id() == old_id) {
            Some(m) if m.nmc.id() == replacement.id() => m.source.clone(),
            Some(_) => format!("{}.nmc.xml", replacement.id()),
            None => return Err(AppError::UnknownMember(old_id.to_owned())),
        };
        self.exchange_member(old_id, Member { source, nmc: replacement }, apply_rollback)
    }

    /// Classifies every link touching the replaced member. The application
    /// only changes when the outcome works (after rollback only if
    /// `apply_rollback`); every failure leaves it as it was.
    pub fn exchange_member(
        &mut self,
        old_id: &str,
        replacement: Member,
        apply_rollback: bool,
    ) -> Result<ExchangeResult, AppError> {
        let idx = self
            .members
            .iter()
            .position(|m| m.nmc.id() == old_id)
            .ok_or_else(|| AppError::UnknownMember(old_id.to_owned()))?;
        let new_id = replacement.nmc.id().to_owned();
        if new_id != old_id && self.member(&new_id).is_some() {
            return Err(AppError::DuplicateMember(new_id));
        }

        let mut next = self.clone();
        next.current_ordinals.remove(old_id);
        next.current_ordinals.insert(new_id.clone(), replacement.nmc.newest_ordinal());
        next.members[idx] = replacement;
        for link in &mut next.links {
            if link.from == old_id {
                link.from = new_id.clone();
            }
            if link.to == old_id {
                link.to = new_id.clone();
            }
        }

        let mut per_link = Vec::new();
        for link in next.links.iter().filter(|l| l.touches(&new_id)) {
            let verdict = match classify_from(next.side(&link.from), next.side(&link.to), &link.port) {
                Ok(v) => v,
                Err(LinkageError::UnknownPort { .. }) => Verdict::DoesNotWork {
                    reasons: vec![MismatchReason::InterfaceMissing { name: link.port.clone() }],
                },
                Err(source) => return Err(AppError::TypingConflict { link: link.clone(), source: Box::new(source) }),
            };
            per_link.push(LinkVerdict { link: link.clone(), verdict });
        }

        let mut result = ExchangeResult {
            replaced_id: old_id.to_owned(),
            overall: overall_of(&per_link),
            per_link,
            committed: false,
            applied_alignments: Vec::new(),
        };
        match result.overall {
            ProofVerdict::DoesNotWork => return Ok(result),
            ProofVerdict::Works => {
                *self = next;
                result.committed = true;
                return Ok(result);
            }
            ProofVerdict::WorksAfterRollback if !apply_rollback => return Ok(result),
            ProofVerdict::WorksAfterRollback => {}
        }

        // lowest demanded ordinal per component, in order of first demand
        let mut demanded: Vec<AlignmentStep> = Vec::new();
        for lv in &result.per_link {
            if !matches!(lv.verdict, Verdict::WorksAfterRollback(_)) {
                continue;
            }
            let steps = alignment_plan(&lv.verdict, next.side(&lv.link.from), next.side(&lv.link.to))
                .expect("rollback verdicts have a plan");
            for step in steps {
                match demanded.iter_mut().find(|d| d.component == step.component) {
                    Some(d) => d.to_ordinal = d.to_ordinal.min(step.to_ordinal),
                    None => demanded.push(step),
                }
            }
        }
        for step in &demanded {
            next.current_ordinals.insert(step.component.clone(), step.to_ordinal);
        }

        // rolled-back partners may take part in further links
        let realigned: BTreeSet<&str> =
            demanded.iter().map(|d| d.component.as_str()).chain([new_id.as_str()]).collect();
        for link in next.links.iter().filter(|l| realigned.iter().any(|id| l.touches(id))) {
            let report = next.check_link(link)?;
            if report.ok {
                continue;
            }
            let failed = Verdict::DoesNotWork { reasons: report.reasons };
            match result.per_link.iter_mut().find(|lv| &lv.link == link) {
                Some(lv) => lv.verdict = failed,
                None => result.per_link.push(LinkVerdict { link: link.clone(), verdict: failed }),
            }
        }
        result.overall = overall_of(&result.per_link);
        if result.overall == ProofVerdict::DoesNotWork {
            return Ok(result);
        }
        *self = next;
        result.committed = true;
        result.applied_alignments = demanded;
        Ok(result)
    }

    /// Canonical application document. Members at their newest ordinal get no pin.
    pub fn to_xml(&self) -> String {
        let mut w = XmlWriter::new();
        w.open(0, "application", &[]);
        for m in &self.members {
            w.empty(1, "member", &[("ref", &m.source)]);
        }
        for l in &self.links {
            w.empty(1, "link", &[("from", &l.from), ("port", &l.port), ("to", &l.to)]);
        }
        for m in &self.members {
            let ordinal = self.current_ordinals[m.nmc.id()];
            if ordinal != m.nmc.newest_ordinal() {
                w.empty(1, "pin", &[("member", m.nmc.id()), ("ordinal", &ordinal.to_string())]);
            }
        }
        w.close(0, "application");
        w.finish()
    }

    pub fn set_source(&mut self, id: &str, source: String) -> Result<(), AppError> {
        let m = self
            .members
            .iter_mut()
            .find(|m| m.nmc.id() == id)
            .ok_or_else(|| AppError::UnknownMember(id.to_owned()))?;
        m.source = source;
        Ok(())
    }
}

fn overall_of(per_link: &[LinkVerdict]) -> ProofVerdict {
    if per_link.iter().any(|lv| matches!(lv.verdict, Verdict::DoesNotWork { .. })) {
        ProofVerdict::DoesNotWork
    } else if per_link.iter().all(|lv| lv.verdict == Verdict::Works) {
        ProofVerdict::Works
    } else {
        ProofVerdict::WorksAfterRollback
    }
}

/// Parses an application document; `resolve` maps a member reference to
/// manifest text.
pub fn parse_application<F>(text: &str, mut resolve: F) -> Result<Application, AppError>
where
    F: FnMut(&str) -> Result<String, AppError>,
{
    let doc = xml::parse_document(text).map_err(AppError::MalformedDocument)?;
    let root = doc.root_element();
    xml::expect_element(root, "application")?;
    xml::check_attrs(root, &[])?;
    let mut members = Vec::new();
    let mut links = Vec::new();
    let mut pins = BTreeMap::new();
    for el in xml::element_children(root)? {
        match el.tag_name().name() {
            "member" => {
                xml::check_attrs(el, &["ref"])?;
                let reference = xml::required_attr(el, "ref")?;
                let manifest = resolve(reference)?;
                let nmc = parse_manifest(&manifest)
                    .map_err(|source| AppError::Member { reference: reference.to_owned(), source })?;
                members.push(Member { source: reference.to_owned(), nmc });
            }
            "link" => {
                xml::check_attrs(el, &["from", "port", "to"])?;
                links.push(Link::new(
                    xml::required_attr(el, "from")?,
                    xml::required_attr(el, "port")?,
                    xml::required_attr(el, "to")?,
                ));
            }
            "pin" => {
                xml::check_attrs(el, &["member", "ordinal"])?;
                let member = xml::required_attr(el, "member")?.to_owned();
                let ordinal = xml::parse_ordinal(el, "ordinal")?;
                if pins.insert(member.clone(), ordinal).is_some() {
                    return Err(AppError::SchemaViolation(format!("`{member}` is pinned twice")));
                }
            }
            other => return Err(AppError::SchemaViolation(format!("unknown element <{other}> in <application>"))),
        }
    }
    Application::new(members, links, pins)
}

/// Reads an application file; member references resolve against its directory.
pub fn load_application(path: &Path) -> Result<Application, AppError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| AppError::Io { path: p.display().to_string(), source })
    };
    let text = read(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    parse_application(&text, |reference| read(&dir.join(reference)))
}
