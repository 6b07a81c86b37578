//! The version manager.
//!
//! A pair either works at its current revisions, works once one or both
//! sides are rolled back to older revisions, or does not work at all. The
//! rollback search is exhaustive over the revision grid and picks the working
//! pair with the smallest `(total, initial, target)` distance, which keeps the
//! initial component at its newest revision whenever a tie allows it.

use serde::Serialize;

use crate::linkage::{LinkageError, MismatchReason, PairContext};
use crate::nmc::Nmc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlignmentCandidate {
    pub initial_ordinal: usize,
    pub target_ordinal: usize,
    /// Revisions rolled back on both sides together.
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Works,
    DoesNotWork { reasons: Vec<MismatchReason> },
    WorksAfterRollback(AlignmentCandidate),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Works => "works",
            Verdict::DoesNotWork { .. } => "does-not-work",
            Verdict::WorksAfterRollback(_) => "works-after-rollback",
        }
    }
}

/// One component at a given ordinal, the starting point of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Side<'a> {
    pub nmc: &'a Nmc,
    pub ordinal: usize,
}

impl<'a> Side<'a> {
    pub fn newest(nmc: &'a Nmc) -> Self {
        Side { nmc, ordinal: nmc.newest_ordinal() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentStep {
    pub component: String,
    pub from_ordinal: usize,
    pub to_ordinal: usize,
}

/// Classifies a pair at both components' newest revisions.
pub fn classify(initial: &Nmc, target: &Nmc, port: &str) -> Result<Verdict, LinkageError> {
    classify_from(Side::newest(initial), Side::newest(target), port)
}

/// Like [`classify`], starting from arbitrary current ordinals. Rollback only
/// moves to ordinals at or below the starting ones.
pub fn classify_from(initial: Side<'_>, target: Side<'_>, port: &str) -> Result<Verdict, LinkageError> {
    let ctx = PairContext::new(initial.nmc, target.nmc, port)?;
    if initial.nmc.at_revision(initial.ordinal)?.required_ports(port).next().is_none() {
        return Err(LinkageError::UnknownPort { component: initial.nmc.id().to_owned(), port: port.to_owned() });
    }
    let report = ctx.check(initial.ordinal, target.ordinal)?;
    if report.ok {
        return Ok(Verdict::Works);
    }
    Ok(match search_pair(&ctx, initial.ordinal, target.ordinal)? {
        Some(alignment) => Verdict::WorksAfterRollback(alignment),
        None => Verdict::DoesNotWork { reasons: report.reasons },
    })
}

/// Minimal working revision pair other than the current one, if any.
pub fn rollback_search(initial: &Nmc, target: &Nmc, port: &str) -> Result<Option<AlignmentCandidate>, LinkageError> {
    let ctx = PairContext::new(initial, target, port)?;
    search_pair(&ctx, initial.newest_ordinal(), target.newest_ordinal())
}

pub(crate) fn search_pair(
    ctx: &PairContext<'_>,
    initial_from: usize,
    target_from: usize,
) -> Result<Option<AlignmentCandidate>, LinkageError> {
    let mut grid: Vec<(usize, usize, usize)> = Vec::with_capacity((initial_from + 1) * (target_from + 1));
    for di in 0..=initial_from {
        for dt in 0..=target_from {
            if di + dt > 0 {
                grid.push((di + dt, di, dt));
            }
        }
    }
    grid.sort_unstable();
    for (distance, di, dt) in grid {
        let (i, t) = (initial_from - di, target_from - dt);
        if ctx.check(i, t)?.ok {
            return Ok(Some(AlignmentCandidate { initial_ordinal: i, target_ordinal: t, distance }));
        }
    }
    Ok(None)
}

/// Per-component steps to reach a rollback verdict's ordinals; the initial
/// side comes first and a side staying put is omitted.
pub fn alignment_plan(verdict: &Verdict, initial: Side<'_>, target: Side<'_>) -> Result<Vec<AlignmentStep>, LinkageError> {
    let Verdict::WorksAfterRollback(a) = verdict else {
        return Err(LinkageError::NotARollbackVerdict);
    };
    let mut steps = Vec::with_capacity(2);
    for (side, to) in [(initial, a.initial_ordinal), (target, a.target_ordinal)] {
        if side.ordinal != to {
            steps.push(AlignmentStep { component: side.nmc.id().to_owned(), from_ordinal: side.ordinal, to_ordinal: to });
        }
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aslt::{Aslt, NodeId, NodeKind, TypingContext};
    use crate::nmc::{PortDecl, Revision, Signature};

    /// Controller whose newest revision adds a float-returning read
    /// requirement on top of the older int one.
    fn controller() -> Nmc {
        let mut t = Aslt::new();
        t.add_node_with_id("pkg", None, NodeKind::Package, "ctrl", None).unwrap();
        t.add_node_with_id("precise", Some("pkg"), NodeKind::Class, "PreciseLoop", None).unwrap();
        t.add_node_with_id("coarse", Some("pkg"), NodeKind::Class, "CoarseLoop", None).unwrap();
        Nmc::assemble(
            "controller",
            "control-systems",
            t,
            TypingContext::new(),
            vec![
                PortDecl::Required {
                    interface: "ISensor".into(),
                    node: Some("precise".into()),
                    signatures: vec![Signature::new("read", Vec::<String>::new(), "float")],
                },
                PortDecl::Required {
                    interface: "ISensor".into(),
                    node: Some("coarse".into()),
                    signatures: vec![Signature::new("read", Vec::<String>::new(), "int")],
                },
            ],
            vec![Revision::new(1, "2.0", Vec::<NodeId>::new()), Revision::new(0, "1.0", ["precise"])],
        )
        .unwrap()
    }

    fn sensor(ret: &str, revisions: usize) -> Nmc {
        let mut t = Aslt::new();
        t.add_node_with_id("pkg", None, NodeKind::Package, "s", None).unwrap();
        t.add_node_with_id("i", Some("pkg"), NodeKind::Interface, "ISensor", None).unwrap();
        t.add_node_with_id("m", Some("i"), NodeKind::Method, "read", Some(ret)).unwrap();
        let revs = (0..revisions).map(|o| Revision::new(o, &format!("r{o}"), Vec::<NodeId>::new())).collect();
        Nmc::assemble(
            "sensor",
            "control-systems",
            t,
            TypingContext::new(),
            vec![PortDecl::Provided { interface: "ISensor".into(), node: "i".into(), declared: None }],
            revs,
        )
        .unwrap()
    }

    #[test]
    fn compatible_pair_works() {
        let c = controller();
        let s = sensor("int", 1);
        // with int <: float, an int reader satisfies both declarations
        let s2 = {
            let mut t = Aslt::new();
            t.add_node_with_id("pkg", None, NodeKind::Package, "s", None).unwrap();
            t.add_node_with_id("i", Some("pkg"), NodeKind::Interface, "ISensor", None).unwrap();
            t.add_node_with_id("m", Some("i"), NodeKind::Method, "read", Some("int")).unwrap();
            Nmc::assemble(
                "sensor",
                "control-systems",
                t,
                TypingContext::from_edges([("int", "float")]).unwrap(),
                vec![PortDecl::Provided { interface: "ISensor".into(), node: "i".into(), declared: None }],
                vec![Revision::new(0, "1", Vec::<NodeId>::new())],
            )
            .unwrap()
        };
        assert_eq!(classify(&c, &s2, "ISensor").unwrap(), Verdict::Works);
        assert_ne!(classify(&c, &s, "ISensor").unwrap(), Verdict::Works);
    }

    #[test]
    fn float_sensor_misses_int_requirement() {
        let c = controller();
        let s = sensor("float", 1);
        assert!(matches!(classify(&c, &s, "ISensor").unwrap(), Verdict::DoesNotWork { .. }));
    }

    #[test]
    fn rollback_of_initial() {
        let c = controller();
        let s = sensor("int", 1);
        let v = classify(&c, &s, "ISensor").unwrap();
        assert_eq!(v, Verdict::WorksAfterRollback(AlignmentCandidate { initial_ordinal: 0, target_ordinal: 0, distance: 1 }));
        let plan = alignment_plan(&v, Side::newest(&c), Side::newest(&s)).unwrap();
        assert_eq!(plan, [AlignmentStep { component: "controller".into(), from_ordinal: 1, to_ordinal: 0 }]);
    }

    #[test]
    fn no_older_revisions_means_no_alignment() {
        let s = sensor("float", 1);
        let mut t = Aslt::new();
        t.add_node_with_id("pkg", None, NodeKind::Package, "c", None).unwrap();
        let c = Nmc::assemble(
            "c",
            "control-systems",
            t,
            TypingContext::new(),
            vec![PortDecl::Required {
                interface: "ISensor".into(),
                node: None,
                signatures: vec![Signature::new("read", Vec::<String>::new(), "int")],
            }],
            vec![Revision::new(0, "1", Vec::<NodeId>::new())],
        )
        .unwrap();
        assert_eq!(rollback_search(&c, &s, "ISensor").unwrap(), None);
        assert!(matches!(classify(&c, &s, "ISensor").unwrap(), Verdict::DoesNotWork { reasons } if reasons.len() == 1));
    }

    #[test]
    fn plan_requires_rollback_verdict() {
        let c = controller();
        let s = sensor("int", 1);
        assert!(matches!(
            alignment_plan(&Verdict::Works, Side::newest(&c), Side::newest(&s)),
            Err(LinkageError::NotARollbackVerdict)
        ));
    }

    #[test]
    fn plan_lists_initial_first() {
        let c = controller();
        let s = sensor("int", 3);
        let v = Verdict::WorksAfterRollback(AlignmentCandidate { initial_ordinal: 0, target_ordinal: 0, distance: 3 });
        let plan = alignment_plan(&v, Side::newest(&c), Side::newest(&s)).unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].component, "controller");
        assert_eq!((plan[1].from_ordinal, plan[1].to_ordinal), (2, 0));
    }

    #[test]
    fn classify_unknown_port() {
        let c = controller();
        let s = sensor("int", 1);
        assert!(matches!(classify(&c, &s, "IMotor"), Err(LinkageError::UnknownPort { .. })));
    }
}
