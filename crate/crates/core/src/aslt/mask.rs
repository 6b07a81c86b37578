use super::{Aslt, AsltError, MetaEntry, NodeId, NodeRef};

/// A non-materialised filter over an [`Aslt`] that hides whole subtrees.
///
/// The hidden set is closed under descendants, so every visible node is
/// visible together with all of its ancestors.
#[derive(Debug, Clone)]
pub struct MaskedView<'a> {
    base: &'a Aslt,
    hidden: Vec<bool>,
}

impl<'a> MaskedView<'a> {
    pub(super) fn new<I, S>(base: &'a Aslt, hidden_roots: I) -> Result<Self, AsltError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut hidden = vec![false; base.len()];
        for root in hidden_roots {
            let root = root.as_ref();
            let idx = base.index_of(root).ok_or_else(|| AsltError::UnknownNode(root.to_owned()))?;
            base.preorder(idx, &mut |i| {
                if hidden[i] {
                    // already covered by an earlier root
                    return false;
                }
                hidden[i] = true;
                true
            });
        }
        Ok(MaskedView { base, hidden })
    }

    pub fn base(&self) -> &'a Aslt {
        self.base
    }

    pub fn is_visible(&self, id: &str) -> bool {
        self.base.index_of(id).is_some_and(|idx| !self.hidden[idx])
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.iter().filter(|h| **h).count()
    }

    /// Hidden node ids in pre-order.
    pub fn hidden_ids(&self) -> Vec<&'a NodeId> {
        self.base.nodes().into_iter().filter(|n| self.hidden[n.index()]).map(|n| n.id()).collect()
    }

    pub fn node(&self, id: &str) -> Option<NodeRef<'a>> {
        let idx = self.base.index_of(id)?;
        (!self.hidden[idx]).then(|| self.base.node_at(idx))
    }

    /// Visible nodes in pre-order.
    pub fn visible_nodes(&self) -> Vec<NodeRef<'a>> {
        let mut out = Vec::new();
        if let Some(root) = self.base.root_index() {
            self.base.preorder(root, &mut |idx| {
                if self.hidden[idx] {
                    return false;
                }
                out.push(self.base.node_at(idx));
                true
            });
        }
        out
    }

    /// Visible children of a visible node, in stored order.
    pub fn children(&self, id: &str) -> Result<Vec<NodeRef<'a>>, AsltError> {
        let idx = self.visible_index(id)?;
        Ok(self
            .base
            .children_of(idx)
            .iter()
            .filter(|&&c| !self.hidden[c])
            .map(|&c| self.base.node_at(c))
            .collect())
    }

    /// Same as [`Aslt::meta_lookup`], but hidden nodes are unknown.
    pub fn meta_lookup(&self, id: &str, key_prefix: &str) -> Result<Vec<&'a MetaEntry>, AsltError> {
        let idx = self.visible_index(id)?;
        Ok(self.base.node_at(idx).meta().iter().filter(|m| m.matches_prefix(key_prefix)).collect())
    }

    fn visible_index(&self, id: &str) -> Result<usize, AsltError> {
        match self.base.index_of(id) {
            Some(idx) if !self.hidden[idx] => Ok(idx),
            _ => Err(AsltError::UnknownNode(id.to_owned())),
        }
    }
}
