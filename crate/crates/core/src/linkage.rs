//! The linkage manager: signature and port matching, pairwise checks,
//! candidate analysis and binding.

use std::fmt;

use serde::Serialize;

use crate::aslt::{TypingContext, TypingError};
use crate::nmc::{ComponentView, Nmc, NmcError, Port, Signature};
use crate::rollback::{self, AlignmentCandidate, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkageError {
    #[error("`{port}` is not a required port of `{component}`")]
    UnknownPort { component: String, port: String },
    #[error("inheritance of `{initial}` and `{target}` conflicts: {source}")]
    TypingConflict {
        initial: String,
        target: String,
        #[source]
        source: TypingError,
    },
    #[error("candidate `{0}` appears more than once")]
    DuplicateCandidate(String),
    #[error("cannot bind `{initial}` to `{target}` on `{port}`: compatibility was not proved")]
    UnprovenBinding { initial: String, target: String, port: String },
    #[error("alignment plans need a works-after-rollback verdict")]
    NotARollbackVerdict,
    #[error(transparent)]
    Component(#[from] NmcError),
}

/// Why a pair does not link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MismatchReason {
    DomainMismatch { expected: String, found: String },
    InterfaceMissing { name: String },
    SignatureMissing { name: String, arity: usize },
    ParamTypeMismatch { signature: String, index: usize, required_type: String, provided_type: String },
    ReturnTypeMismatch { signature: String, required_type: String, provided_type: String },
    NoCandidates,
}

impl fmt::Display for MismatchReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MismatchReason::DomainMismatch { expected, found } => {
                write!(f, "domain mismatch: expected `{expected}`, found `{found}`")
            }
            MismatchReason::InterfaceMissing { name } => write!(f, "interface `{name}` missing"),
            MismatchReason::SignatureMissing { name, arity } => {
                write!(f, "signature `{name}/{arity}` missing")
            }
            MismatchReason::ParamTypeMismatch { signature, index, required_type, provided_type } => write!(
                f,
                "`{signature}` parameter {index}: caller passes `{required_type}`, provider accepts `{provided_type}`"
            ),
            MismatchReason::ReturnTypeMismatch { signature, required_type, provided_type } => write!(
                f,
                "`{signature}` returns `{provided_type}`, caller expects `{required_type}`"
            ),
            MismatchReason::NoCandidates => f.write_str("no candidate components"),
        }
    }
}

/// Outcome of checking one port between two components at fixed revisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    pub initial_id: String,
    pub target_id: String,
    pub initial_ordinal: usize,
    pub target_ordinal: usize,
    pub port: String,
    pub ok: bool,
    pub reasons: Vec<MismatchReason>,
}

/// Parameters are contravariant, the return type is covariant.
pub fn match_signature(required: &Signature, provided: &Signature, typing: &TypingContext) -> Result<(), MismatchReason> {
    if required.name != provided.name || required.arity() != provided.arity() {
        return Err(MismatchReason::SignatureMissing { name: required.name.clone(), arity: required.arity() });
    }
    for (index, (req, prov)) in required.params.iter().zip(&provided.params).enumerate() {
        if !typing.is_subtype(req, prov) {
            return Err(MismatchReason::ParamTypeMismatch {
                signature: required.name.clone(),
                index,
                required_type: req.clone(),
                provided_type: prov.clone(),
            });
        }
    }
    if !typing.is_subtype(&provided.return_type, &required.return_type) {
        return Err(MismatchReason::ReturnTypeMismatch {
            signature: required.name.clone(),
            required_type: required.return_type.clone(),
            provided_type: provided.return_type.clone(),
        });
    }
    Ok(())
}

/// All reasons why `provided_view` does not satisfy `required`; empty when it does.
pub fn match_port(required: &Port, provided_view: &ComponentView<'_>, typing: &TypingContext) -> Vec<MismatchReason> {
    let Some(provided) = provided_view.provided_port(&required.interface_name) else {
        return vec![MismatchReason::InterfaceMissing { name: required.interface_name.clone() }];
    };
    let mut reasons = Vec::new();
    for req in &required.signatures {
        let mut first_failure = None;
        let mut matched = false;
        for prov in provided.signatures.iter().filter(|p| p.name == req.name && p.arity() == req.arity()) {
            match match_signature(req, prov, typing) {
                Ok(()) => {
                    matched = true;
                    break;
                }
                Err(reason) => {
                    first_failure.get_or_insert(reason);
                }
            }
        }
        if !matched {
            reasons.push(first_failure.unwrap_or_else(|| MismatchReason::SignatureMissing {
                name: req.name.clone(),
                arity: req.arity(),
            }));
        }
    }
    reasons
}

/// Merged typing of a pair, ready to be checked at any revision pair.
pub(crate) struct PairContext<'a> {
    pub(crate) initial: &'a Nmc,
    pub(crate) target: &'a Nmc,
    port: &'a str,
    typing: TypingContext,
}

impl<'a> PairContext<'a> {
    pub(crate) fn new(initial: &'a Nmc, target: &'a Nmc, port: &'a str) -> Result<Self, LinkageError> {
        if !initial.declares_required(port) {
            return Err(LinkageError::UnknownPort { component: initial.id().to_owned(), port: port.to_owned() });
        }
        let typing = initial.typing().union(target.typing()).map_err(|source| LinkageError::TypingConflict {
            initial: initial.id().to_owned(),
            target: target.id().to_owned(),
            source,
        })?;
        Ok(PairContext { initial, target, port, typing })
    }

    pub(crate) fn check(&self, initial_ordinal: usize, target_ordinal: usize) -> Result<MatchReport, LinkageError> {
        let iv = self.initial.at_revision(initial_ordinal)?;
        let tv = self.target.at_revision(target_ordinal)?;
        Ok(self.check_views(&iv, &tv))
    }

    fn check_views(&self, iv: &ComponentView<'_>, tv: &ComponentView<'_>) -> MatchReport {
        let mut reasons = Vec::new();
        if self.initial.domain() != self.target.domain() {
            reasons.push(MismatchReason::DomainMismatch {
                expected: self.initial.domain().to_owned(),
                found: self.target.domain().to_owned(),
            });
        } else {
            let mut any = false;
            for required in iv.required_ports(self.port) {
                any = true;
                for reason in match_port(required, tv, &self.typing) {
                    if !reasons.contains(&reason) {
                        reasons.push(reason);
                    }
                }
            }
            if !any {
                // requirement hidden at this revision: nothing to link against
                reasons.push(MismatchReason::InterfaceMissing { name: self.port.to_owned() });
            }
        }
        MatchReport {
            initial_id: self.initial.id().to_owned(),
            target_id: self.target.id().to_owned(),
            initial_ordinal: iv.ordinal,
            target_ordinal: tv.ordinal,
            port: self.port.to_owned(),
            ok: reasons.is_empty(),
            reasons,
        }
    }
}

/// Checks `port` of `initial_view` against `target_view` under the union of
/// both components' inheritance relations.
pub fn check_pair(
    initial_view: &ComponentView<'_>,
    target_view: &ComponentView<'_>,
    port: &str,
) -> Result<MatchReport, LinkageError> {
    let ctx = PairContext::new(initial_view.nmc, target_view.nmc, port)?;
    Ok(ctx.check_views(initial_view, target_view))
}

/// A request from an initial component for a partner on one required port.
#[derive(Debug, Clone, Copy)]
pub struct LinkRequest<'a> {
    pub initial: &'a Nmc,
    pub port: &'a str,
    pub candidates: &'a [Nmc],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedCandidate {
    pub id: String,
    pub reason: MismatchReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisResult {
    pub target: Option<String>,
    pub verdict: Verdict,
    pub skipped: Vec<SkippedCandidate>,
    pub reports: Vec<MatchReport>,
}

/// Request, analyse, respond.
///
/// Other-domain candidates are skipped. A candidate working at both current
/// revisions wins by smallest id; otherwise the candidate with the smallest
/// (rollback distance, id) alignment wins; otherwise nothing links.
pub fn analyse(request: &LinkRequest<'_>) -> Result<AnalysisResult, LinkageError> {
    let initial = request.initial;
    let current = initial.at_revision(initial.newest_ordinal())?;
    if current.required_ports(request.port).next().is_none() {
        return Err(LinkageError::UnknownPort { component: initial.id().to_owned(), port: request.port.to_owned() });
    }
    for (i, c) in request.candidates.iter().enumerate() {
        if request.candidates[..i].iter().any(|o| o.id() == c.id()) {
            return Err(LinkageError::DuplicateCandidate(c.id().to_owned()));
        }
    }

    let mut skipped = Vec::new();
    let mut considered = Vec::new();
    let mut reports = Vec::new();
    for candidate in request.candidates {
        if candidate.domain() != initial.domain() {
            skipped.push(SkippedCandidate {
                id: candidate.id().to_owned(),
                reason: MismatchReason::DomainMismatch {
                    expected: initial.domain().to_owned(),
                    found: candidate.domain().to_owned(),
                },
            });
            continue;
        }
        let ctx = PairContext::new(initial, candidate, request.port)?;
        reports.push(ctx.check(initial.newest_ordinal(), candidate.newest_ordinal())?);
        considered.push(ctx);
    }

    if considered.is_empty() {
        return Ok(AnalysisResult {
            target: None,
            verdict: Verdict::DoesNotWork { reasons: vec![MismatchReason::NoCandidates] },
            skipped,
            reports,
        });
    }

    if let Some(best) = reports.iter().filter(|r| r.ok).map(|r| r.target_id.as_str()).min() {
        return Ok(AnalysisResult { target: Some(best.to_owned()), verdict: Verdict::Works, skipped, reports });
    }

    let mut best: Option<(AlignmentCandidate, &str)> = None;
    for ctx in &considered {
        let Some(alignment) = rollback::search_pair(ctx, ctx.initial.newest_ordinal(), ctx.target.newest_ordinal())?
        else {
            continue;
        };
        reports.push(ctx.check(alignment.initial_ordinal, alignment.target_ordinal)?);
        let id = ctx.target.id();
        if best.is_none_or(|(b, bid)| (alignment.distance, id) < (b.distance, bid)) {
            best = Some((alignment, id));
        }
    }
    if let Some((alignment, id)) = best {
        return Ok(AnalysisResult {
            target: Some(id.to_owned()),
            verdict: Verdict::WorksAfterRollback(alignment),
            skipped,
            reports,
        });
    }

    let reasons = reports.iter().flat_map(|r| r.reasons.iter().cloned()).collect();
    Ok(AnalysisResult { target: None, verdict: Verdict::DoesNotWork { reasons }, skipped, reports })
}

/// A proved coupling; only obtainable from a successful report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Binding {
    initial_id: String,
    target_id: String,
    port: String,
    initial_ordinal: usize,
    target_ordinal: usize,
}

impl Binding {
    pub fn initial_id(&self) -> &str {
        &self.initial_id
    }
    pub fn target_id(&self) -> &str {
        &self.target_id
    }
    pub fn port(&self) -> &str {
        &self.port
    }
    pub fn initial_ordinal(&self) -> usize {
        self.initial_ordinal
    }
    pub fn target_ordinal(&self) -> usize {
        self.target_ordinal
    }
}

pub fn bind(report: &MatchReport) -> Result<Binding, LinkageError> {
    if !report.ok {
        return Err(LinkageError::UnprovenBinding {
            initial: report.initial_id.clone(),
            target: report.target_id.clone(),
            port: report.port.clone(),
        });
    }
    Ok(Binding {
        initial_id: report.initial_id.clone(),
        target_id: report.target_id.clone(),
        port: report.port.clone(),
        initial_ordinal: report.initial_ordinal,
        target_ordinal: report.target_ordinal,
    })
}
