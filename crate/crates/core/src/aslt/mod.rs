//! The abstract syntax language tree.
//!
//! A tree describes the object-oriented structure of one component:
//! packages, classes, interfaces, methods, fields and parameters. Every node
//! can carry an ordered list of namespaced meta entries. Inheritance between
//! type names is kept outside the tree in a [`TypingContext`], and older
//! revisions are realised as [`MaskedView`]s that hide whole subtrees.

mod mask;
mod typing;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use mask::MaskedView;
pub use typing::{TypingContext, TypingError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsltError {
    #[error("unknown parent node `{0}`")]
    UnknownParent(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("a {child} node cannot be placed under a {parent} node")]
    IllegalChildKind { parent: NodeKind, child: NodeKind },
    #[error("a {0} node cannot be the root of a tree")]
    IllegalRootKind(NodeKind),
    #[error("the tree already has a root node `{0}`")]
    RootExists(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node ids must be non-empty")]
    EmptyId,
    #[error("node names must be non-empty")]
    EmptyName,
    #[error("a {0} node requires a type name")]
    MissingType(NodeKind),
    #[error("a {0} node does not carry a type name")]
    UnexpectedType(NodeKind),
    #[error("meta keys must be non-empty")]
    EmptyKey,
}

/// Kind of a tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Package,
    Class,
    Interface,
    Method,
    Field,
    Parameter,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Package,
        NodeKind::Class,
        NodeKind::Interface,
        NodeKind::Method,
        NodeKind::Field,
        NodeKind::Parameter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Package => "package",
            NodeKind::Class => "class",
            NodeKind::Interface => "interface",
            NodeKind::Method => "method",
            NodeKind::Field => "field",
            NodeKind::Parameter => "parameter",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether `child` may be nested directly under a node of this kind.
    pub fn can_contain(self, child: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            Package => matches!(child, Package | Class | Interface),
            Class | Interface => matches!(child, Method | Field),
            Method => child == Parameter,
            Field | Parameter => false,
        }
    }

    /// Kinds allowed at the top of a tree.
    pub fn can_be_root(self) -> bool {
        matches!(self, NodeKind::Package | NodeKind::Class | NodeKind::Interface)
    }

    /// Fields, parameters and methods (return type) carry a type name.
    pub fn requires_type(self) -> bool {
        matches!(self, NodeKind::Method | NodeKind::Field | NodeKind::Parameter)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of a node, unique within one tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A key/value annotation attached to exactly one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetaEntry {
    pub key: String,
    pub value: String,
}

impl MetaEntry {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        MetaEntry { key: key.into(), value: value.into() }
    }

    /// `key == prefix` or `key` starts with `prefix.`
    pub fn matches_prefix(&self, prefix: &str) -> bool {
        match self.key.strip_prefix(prefix) {
            Some("") => true,
            Some(rest) => rest.starts_with('.'),
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeData {
    id: NodeId,
    kind: NodeKind,
    name: String,
    type_name: Option<String>,
    parent: Option<usize>,
    children: Vec<usize>,
    meta: Vec<MetaEntry>,
}

/// Arena-backed program-structure tree with a single root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Aslt {
    nodes: Vec<NodeData>,
    index: BTreeMap<NodeId, usize>,
    root: Option<usize>,
}

impl Aslt {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Option<NodeRef<'_>> {
        self.root.map(|idx| NodeRef { tree: self, idx })
    }

    pub fn node(&self, id: &str) -> Option<NodeRef<'_>> {
        self.index.get(id).map(|&idx| NodeRef { tree: self, idx })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// All nodes in pre-order (parents before children, siblings in order).
    pub fn nodes(&self) -> Vec<NodeRef<'_>> {
        let mut out = Vec::with_capacity(self.nodes.len());
        if let Some(root) = self.root {
            self.preorder(root, &mut |idx| {
                out.push(NodeRef { tree: self, idx });
                true
            });
        }
        out
    }

    /// Adds a node with a generated id and returns that id.
    pub fn add_node(
        &mut self,
        parent: Option<&str>,
        kind: NodeKind,
        name: &str,
        type_name: Option<&str>,
    ) -> Result<NodeId, AsltError> {
        let mut n = self.nodes.len() + 1;
        let id = loop {
            let candidate = format!("n{n}");
            if !self.index.contains_key(candidate.as_str()) {
                break candidate;
            }
            n += 1;
        };
        self.add_node_with_id(&id, parent, kind, name, type_name)
    }

    /// Adds a node under `parent` (or as the root when `parent` is `None`).
    pub fn add_node_with_id(
        &mut self,
        id: &str,
        parent: Option<&str>,
        kind: NodeKind,
        name: &str,
        type_name: Option<&str>,
    ) -> Result<NodeId, AsltError> {
        if id.is_empty() {
            return Err(AsltError::EmptyId);
        }
        if name.is_empty() {
            return Err(AsltError::EmptyName);
        }
        let parent_idx = match parent {
            Some(p) => {
                let idx = *self
                    .index
                    .get(p)
                    .ok_or_else(|| AsltError::UnknownParent(p.to_owned()))?;
                let parent_kind = self.nodes[idx].kind;
                if !parent_kind.can_contain(kind) {
                    return Err(AsltError::IllegalChildKind { parent: parent_kind, child: kind });
                }
                Some(idx)
            }
            None => {
                if let Some(root) = self.root {
                    return Err(AsltError::RootExists(self.nodes[root].id.0.clone()));
                }
                if !kind.can_be_root() {
                    return Err(AsltError::IllegalRootKind(kind));
                }
                None
            }
        };
        if self.index.contains_key(id) {
            return Err(AsltError::DuplicateId(id.to_owned()));
        }
        match (kind.requires_type(), type_name) {
            (true, None) => return Err(AsltError::MissingType(kind)),
            (false, Some(_)) => return Err(AsltError::UnexpectedType(kind)),
            _ => {}
        }

        let idx = self.nodes.len();
        let node_id = NodeId::new(id);
        self.nodes.push(NodeData {
            id: node_id.clone(),
            kind,
            name: name.to_owned(),
            type_name: type_name.map(str::to_owned),
            parent: parent_idx,
            children: Vec::new(),
            meta: Vec::new(),
        });
        self.index.insert(node_id.clone(), idx);
        match parent_idx {
            Some(p) => self.nodes[p].children.push(idx),
            None => self.root = Some(idx),
        }
        Ok(node_id)
    }

    pub fn attach_meta(&mut self, node: &str, key: &str, value: &str) -> Result<(), AsltError> {
        let idx = *self.index.get(node).ok_or_else(|| AsltError::UnknownNode(node.to_owned()))?;
        if key.is_empty() {
            return Err(AsltError::EmptyKey);
        }
        self.nodes[idx].meta.push(MetaEntry::new(key, value));
        Ok(())
    }

    /// Entries on `node` whose key is `key_prefix` or lies in its namespace.
    pub fn meta_lookup(&self, node: &str, key_prefix: &str) -> Result<Vec<&MetaEntry>, AsltError> {
        let idx = *self.index.get(node).ok_or_else(|| AsltError::UnknownNode(node.to_owned()))?;
        Ok(self.nodes[idx].meta.iter().filter(|m| m.matches_prefix(key_prefix)).collect())
    }

    /// Builds a view hiding every subtree rooted at one of `hidden_roots`.
    pub fn masked_view<'a, I, S>(&'a self, hidden_roots: I) -> Result<MaskedView<'a>, AsltError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        MaskedView::new(self, hidden_roots)
    }

    pub(crate) fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn node_at(&self, idx: usize) -> NodeRef<'_> {
        NodeRef { tree: self, idx }
    }

    pub(crate) fn root_index(&self) -> Option<usize> {
        self.root
    }

    pub(crate) fn children_of(&self, idx: usize) -> &[usize] {
        &self.nodes[idx].children
    }

    /// Pre-order walk; `visit` returning false prunes the subtree.
    pub(crate) fn preorder(&self, start: usize, visit: &mut dyn FnMut(usize) -> bool) {
        let mut stack = vec![start];
        while let Some(idx) = stack.pop() {
            if visit(idx) {
                stack.extend(self.nodes[idx].children.iter().rev().copied());
            }
        }
    }
}

/// Borrowed handle to one node of an [`Aslt`].
#[derive(Clone, Copy)]
pub struct NodeRef<'a> {
    tree: &'a Aslt,
    idx: usize,
}

impl<'a> NodeRef<'a> {
    fn data(&self) -> &'a NodeData {
        &self.tree.nodes[self.idx]
    }

    pub fn id(&self) -> &'a NodeId {
        &self.data().id
    }

    pub fn kind(&self) -> NodeKind {
        self.data().kind
    }

    pub fn name(&self) -> &'a str {
        &self.data().name
    }

    pub fn type_name(&self) -> Option<&'a str> {
        self.data().type_name.as_deref()
    }

    pub fn meta(&self) -> &'a [MetaEntry] {
        &self.data().meta
    }

    pub fn parent(&self) -> Option<NodeRef<'a>> {
        self.data().parent.map(|idx| NodeRef { tree: self.tree, idx })
    }

    pub fn children(&self) -> impl Iterator<Item = NodeRef<'a>> + 'a {
        let tree = self.tree;
        self.data().children.iter().map(move |&idx| NodeRef { tree, idx })
    }

    pub(crate) fn index(&self) -> usize {
        self.idx
    }
}

impl fmt::Debug for NodeRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeRef")
            .field("id", self.id())
            .field("kind", &self.kind())
            .field("name", &self.name())
            .finish()
    }
}
