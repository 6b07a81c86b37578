//! Components: tree, typing relation, Linkage Control ports and revisions.
//!
//! Provided ports are derived from an Interface node of the tree, required
//! ports list their expected signatures explicitly. Older revisions are the
//! stored tree with some subtrees hidden, so a [`ComponentView`] at an older
//! ordinal re-derives its ports from a masked view.

mod manifest;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::aslt::{Aslt, AsltError, MaskedView, NodeId, NodeKind, TypingContext, TypingError};

pub use manifest::{parse_manifest, serialize_manifest};

/// Meta keys the loader writes onto the root node.
pub const META_PROVIDES: &str = "linkage.provides";
pub const META_REQUIRES: &str = "linkage.requires";
pub const META_REVISION_MASK: &str = "revision.mask";

pub(crate) fn is_materialized_key(key: &str) -> bool {
    matches!(key, META_PROVIDES | META_REQUIRES | META_REVISION_MASK)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NmcError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("provided port `{interface}` declares {declared:?} but the tree derives {derived:?}")]
    SignatureDrift { interface: String, declared: Vec<Signature>, derived: Vec<Signature> },
    #[error("component `{component}` has no revision with ordinal {ordinal}")]
    UnknownRevision { component: String, ordinal: usize },
}

impl From<AsltError> for NmcError {
    fn from(e: AsltError) -> Self {
        NmcError::SchemaViolation(e.to_string())
    }
}

impl From<TypingError> for NmcError {
    fn from(e: TypingError) -> Self {
        NmcError::SchemaViolation(e.to_string())
    }
}

/// A method contract: name, ordered parameter types and return type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<String>,
    pub return_type: String,
}

impl Signature {
    pub fn new<P, S>(name: &str, params: P, return_type: &str) -> Self
    where
        P: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Signature {
            name: name.to_owned(),
            params: params.into_iter().map(Into::into).collect(),
            return_type: return_type.to_owned(),
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) -> {}", self.name, self.params.join(", "), self.return_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Provided,
    Required,
}

/// One Linkage Control port.
///
/// `source_node` is the exposed Interface node for provided ports, and the
/// optional declaring node for required ports (the root when absent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Port {
    pub direction: Direction,
    pub interface_name: String,
    pub signatures: Vec<Signature>,
    pub source_node: Option<NodeId>,
}

/// Port as written in a manifest, before derivation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortDecl {
    Provided {
        interface: String,
        node: NodeId,
        /// Redundant signatures; must equal the derived ones when present.
        declared: Option<Vec<Signature>>,
    },
    Required { interface: String, node: Option<NodeId>, signatures: Vec<Signature> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Revision {
    pub ordinal: usize,
    pub label: String,
    pub hidden_roots: BTreeSet<NodeId>,
}

impl Revision {
    pub fn new<I, S>(ordinal: usize, label: &str, hidden_roots: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<NodeId>,
    {
        Revision {
            ordinal,
            label: label.to_owned(),
            hidden_roots: hidden_roots.into_iter().map(Into::into).collect(),
        }
    }
}

/// A frozen component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nmc {
    id: String,
    domain: String,
    tree: Aslt,
    typing: TypingContext,
    ports: Vec<Port>,
    revisions: Vec<Revision>,
}

impl Nmc {
    /// Validates the parts, derives provided signatures and mirrors ports and
    /// revision masks into meta entries on the root node.
    pub fn assemble(
        id: &str,
        domain: &str,
        mut tree: Aslt,
        typing: TypingContext,
        ports: Vec<PortDecl>,
        mut revisions: Vec<Revision>,
    ) -> Result<Nmc, NmcError> {
        let violation = |msg: String| Err(NmcError::SchemaViolation(msg));
        if id.is_empty() {
            return violation("component id must be non-empty".into());
        }
        if domain.is_empty() {
            return violation(format!("component `{id}` has an empty domain"));
        }
        let root_id = match tree.root() {
            Some(root) => root.id().clone(),
            None => return violation(format!("component `{id}` has an empty tree")),
        };
        if let Some(m) = tree.root().unwrap().meta().iter().find(|m| is_materialized_key(&m.key)) {
            return violation(format!("meta key `{}` on the root node is reserved", m.key));
        }

        let full = tree.masked_view(Vec::<&str>::new())?;
        let mut resolved = Vec::with_capacity(ports.len());
        let mut provided_names = BTreeSet::new();
        for decl in ports {
            match decl {
                PortDecl::Provided { interface, node, declared } => {
                    let Some(n) = tree.node(node.as_str()) else {
                        return violation(format!("provided port `{interface}` references unknown node `{node}`"));
                    };
                    if n.kind() != NodeKind::Interface {
                        return violation(format!("provided port `{interface}` must reference an interface node, `{node}` is a {}", n.kind()));
                    }
                    if n.name() != interface {
                        return violation(format!("provided port `{interface}` references interface node named `{}`", n.name()));
                    }
                    if !provided_names.insert(interface.clone()) {
                        return violation(format!("interface `{interface}` is provided twice"));
                    }
                    let derived = derive_signatures(&full, node.as_str());
                    if let Some(declared) = declared {
                        if declared != derived {
                            return Err(NmcError::SignatureDrift { interface, declared, derived });
                        }
                    }
                    resolved.push(Port {
                        direction: Direction::Provided,
                        interface_name: interface,
                        signatures: derived,
                        source_node: Some(node),
                    });
                }
                PortDecl::Required { interface, node, signatures } => {
                    if interface.is_empty() {
                        return violation("required port with empty interface name".into());
                    }
                    if let Some(node) = &node {
                        if !tree.contains(node.as_str()) {
                            return violation(format!("required port `{interface}` references unknown node `{node}`"));
                        }
                    }
                    if let Some(s) = signatures.iter().find(|s| s.name.is_empty()) {
                        return violation(format!("required port `{interface}` has an unnamed signature {s}"));
                    }
                    resolved.push(Port {
                        direction: Direction::Required,
                        interface_name: interface,
                        signatures,
                        source_node: node,
                    });
                }
            }
        }

        revisions.sort_by_key(|r| r.ordinal);
        if revisions.is_empty() {
            return violation(format!("component `{id}` declares no revisions"));
        }
        let mut labels = BTreeSet::new();
        for (expected, rev) in revisions.iter().enumerate() {
            if rev.ordinal != expected {
                return violation(format!(
                    "revision ordinals of `{id}` must be consecutive from 0, found {}",
                    revisions.iter().map(|r| r.ordinal.to_string()).collect::<Vec<_>>().join(",")
                ));
            }
            if rev.label.is_empty() {
                return violation(format!("revision {} of `{id}` has an empty label", rev.ordinal));
            }
            if !labels.insert(rev.label.as_str()) {
                return violation(format!("duplicate revision label `{}` in `{id}`", rev.label));
            }
            if let Some(missing) = rev.hidden_roots.iter().find(|n| !tree.contains(n.as_str())) {
                return violation(format!("revision `{}` masks unknown node `{missing}`", rev.label));
            }
        }
        if !revisions.last().unwrap().hidden_roots.is_empty() {
            return violation(format!("the newest revision of `{id}` must not mask any node"));
        }

        for port in &resolved {
            let key = match port.direction {
                Direction::Provided => META_PROVIDES,
                Direction::Required => META_REQUIRES,
            };
            tree.attach_meta(root_id.as_str(), key, &port.interface_name)?;
        }
        for rev in &revisions {
            let hidden: Vec<&str> = rev.hidden_roots.iter().map(NodeId::as_str).collect();
            tree.attach_meta(root_id.as_str(), META_REVISION_MASK, &format!("{}:{}", rev.label, hidden.join(",")))?;
        }

        Ok(Nmc {
            id: id.to_owned(),
            domain: domain.to_owned(),
            tree,
            typing,
            ports: resolved,
            revisions,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn tree(&self) -> &Aslt {
        &self.tree
    }

    pub fn typing(&self) -> &TypingContext {
        &self.typing
    }

    pub fn ports(&self) -> &[Port] {
        &self.ports
    }

    /// Revisions ordered by ordinal, oldest first.
    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn newest_ordinal(&self) -> usize {
        self.revisions.len() - 1
    }

    pub fn revision(&self, ordinal: usize) -> Result<&Revision, NmcError> {
        self.revisions.get(ordinal).ok_or_else(|| NmcError::UnknownRevision {
            component: self.id.clone(),
            ordinal,
        })
    }

    /// Whether any revision declares a required port for `interface`.
    pub fn declares_required(&self, interface: &str) -> bool {
        self.ports
            .iter()
            .any(|p| p.direction == Direction::Required && p.interface_name == interface)
    }

    pub fn at_revision(&self, ordinal: usize) -> Result<ComponentView<'_>, NmcError> {
        let rev = self.revision(ordinal)?;
        let view = self.tree.masked_view(&rev.hidden_roots)?;
        let root = self.tree.root().expect("assembled components have a root");
        let mut effective_ports = Vec::with_capacity(self.ports.len());
        for port in &self.ports {
            match port.direction {
                Direction::Provided => {
                    let node = port.source_node.as_ref().expect("provided ports carry their node");
                    if view.is_visible(node.as_str()) {
                        effective_ports.push(Port {
                            signatures: derive_signatures(&view, node.as_str()),
                            ..port.clone()
                        });
                    }
                }
                Direction::Required => {
                    let declaring = port.source_node.as_ref().unwrap_or(root.id());
                    if view.is_visible(declaring.as_str()) {
                        effective_ports.push(port.clone());
                    }
                }
            }
        }
        Ok(ComponentView { nmc: self, ordinal, view, effective_ports })
    }

    /// Number of revisions between `ordinal` and the newest one.
    pub fn rollback_distance(&self, ordinal: usize) -> Result<usize, NmcError> {
        self.revision(ordinal)?;
        Ok(self.newest_ordinal() - ordinal)
    }
}

/// Signatures of the visible Method children of an interface node.
pub fn derive_signatures(view: &MaskedView<'_>, interface_node: &str) -> Vec<Signature> {
    let Ok(methods) = view.children(interface_node) else { return Vec::new() };
    methods
        .into_iter()
        .filter(|m| m.kind() == NodeKind::Method)
        .map(|m| {
            let params = view
                .children(m.id().as_str())
                .unwrap_or_default()
                .into_iter()
                .filter(|p| p.kind() == NodeKind::Parameter)
                .map(|p| p.type_name().unwrap_or_default().to_owned())
                .collect();
            Signature {
                name: m.name().to_owned(),
                params,
                return_type: m.type_name().unwrap_or_default().to_owned(),
            }
        })
        .collect()
}

/// A component seen at one revision.
#[derive(Debug, Clone)]
pub struct ComponentView<'a> {
    pub nmc: &'a Nmc,
    pub ordinal: usize,
    pub view: MaskedView<'a>,
    pub effective_ports: Vec<Port>,
}

impl<'a> ComponentView<'a> {
    pub fn label(&self) -> &'a str {
        &self.nmc.revisions[self.ordinal].label
    }

    pub fn provided_port(&self, interface: &str) -> Option<&Port> {
        self.effective_ports
            .iter()
            .find(|p| p.direction == Direction::Provided && p.interface_name == interface)
    }

    /// All active required declarations for `interface`.
    pub fn required_ports<'s>(&'s self, interface: &'s str) -> impl Iterator<Item = &'s Port> + 's {
        self.effective_ports
            .iter()
            .filter(move |p| p.direction == Direction::Required && p.interface_name == interface)
    }
}
