use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypingError {
    #[error("type `{0}` cannot inherit from itself")]
    SelfInheritance(String),
    #[error("declaring `{sub}` as a subtype of `{sup}` would create an inheritance cycle")]
    InheritanceCycle { sub: String, sup: String },
}

/// Declared inheritance between type names.
///
/// Only direct edges are stored. Reflexivity is implicit and the transitive
/// closure is kept acyclic on every insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypingContext {
    supers: BTreeMap<String, BTreeSet<String>>,
}

impl TypingContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<'a, I>(edges: I) -> Result<Self, TypingError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut ctx = TypingContext::new();
        for (sub, sup) in edges {
            ctx.declare_inheritance(sub, sup)?;
        }
        Ok(ctx)
    }

    pub fn is_empty(&self) -> bool {
        self.supers.is_empty()
    }

    /// Declared edges as `(sub, super)`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.supers
            .iter()
            .flat_map(|(sub, sups)| sups.iter().map(move |sup| (sub.as_str(), sup.as_str())))
    }

    pub fn declare_inheritance(&mut self, sub: &str, sup: &str) -> Result<(), TypingError> {
        if sub == sup {
            return Err(TypingError::SelfInheritance(sub.to_owned()));
        }
        if self.is_subtype(sup, sub) {
            return Err(TypingError::InheritanceCycle { sub: sub.to_owned(), sup: sup.to_owned() });
        }
        self.supers.entry(sub.to_owned()).or_default().insert(sup.to_owned());
        Ok(())
    }

    /// `sub == sup`, or `sup` is reachable from `sub` over declared edges.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![sub];
        while let Some(ty) = stack.pop() {
            let Some(direct) = self.supers.get(ty) else { continue };
            for next in direct {
                if next == sup {
                    return true;
                }
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        false
    }

    /// Merged relation of both contexts; fails if the union has a cycle.
    pub fn union(&self, other: &TypingContext) -> Result<TypingContext, TypingError> {
        let mut merged = self.clone();
        for (sub, sup) in other.edges() {
            merged.declare_inheritance(sub, sup)?;
        }
        Ok(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_edge() {
        let mut ctx = TypingContext::new();
        ctx.declare_inheritance("Int", "Number").unwrap();
        assert!(ctx.is_subtype("Int", "Number"));
        assert!(!ctx.is_subtype("Number", "Int"));
    }

    #[test]
    fn two_cycle_rejected() {
        let mut ctx = TypingContext::new();
        ctx.declare_inheritance("A", "B").unwrap();
        assert_eq!(
            ctx.declare_inheritance("B", "A"),
            Err(TypingError::InheritanceCycle { sub: "B".into(), sup: "A".into() })
        );
        // failed declaration leaves the context untouched
        assert_eq!(ctx.edges().count(), 1);
    }

    #[test]
    fn self_inheritance() {
        let mut ctx = TypingContext::new();
        assert_eq!(ctx.declare_inheritance("X", "X"), Err(TypingError::SelfInheritance("X".into())));
    }

    #[test]
    fn reflexive_and_transitive() {
        let ctx = TypingContext::from_edges([("A", "B"), ("B", "C")]).unwrap();
        assert!(ctx.is_subtype("Int", "Int"));
        assert!(ctx.is_subtype("A", "C"));
        assert!(!ctx.is_subtype("C", "A"));
        assert!(!TypingContext::new().is_subtype("Int", "Float"));
    }

    #[test]
    fn long_cycle_rejected() {
        let mut ctx = TypingContext::from_edges([("a", "b"), ("b", "c"), ("c", "d")]).unwrap();
        assert!(matches!(ctx.declare_inheritance("d", "a"), Err(TypingError::InheritanceCycle { .. })));
        // parallel path is fine
        ctx.declare_inheritance("a", "d").unwrap();
    }

    #[test]
    fn union_detects_cross_cycle() {
        let a = TypingContext::from_edges([("x", "y")]).unwrap();
        let b = TypingContext::from_edges([("y", "x")]).unwrap();
        assert!(a.union(&b).is_err());
        let c = TypingContext::from_edges([("y", "z")]).unwrap();
        let merged = a.union(&c).unwrap();
        assert!(merged.is_subtype("x", "z"));
    }
}
