//! Plain-data component model shared by the integration and acceptance tests.
//!
//! Instances are generated from a seeded RNG, converted into real components,
//! and judged by a brute-force oracle that works on the plain data only.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use semlink::aslt::{Aslt, NodeKind, TypingContext};
use semlink::nmc::{Nmc, PortDecl, Revision, Signature};

pub const PORT: &str = "I";
pub const DOMAIN: &str = "ctl";
pub const TYPES: [&str; 3] = ["t0", "t1", "t2"];
const NAMES: [&str; 3] = ["a", "b", "c"];
const FORWARD_EDGES: [(&str, &str); 3] = [("t0", "t1"), ("t0", "t2"), ("t1", "t2")];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sig {
    pub name: String,
    pub params: Vec<String>,
    pub ret: String,
}

impl Sig {
    fn to_signature(&self) -> Signature {
        Signature::new(&self.name, self.params.clone(), &self.ret)
    }
}

/// A component requiring [`PORT`] through one declaration per class.
#[derive(Debug, Clone)]
pub struct Requirer {
    pub id: String,
    pub domain: String,
    pub decls: Vec<Vec<Sig>>,
    /// Hidden class indices per ordinal; the newest entry is empty.
    pub masks: Vec<BTreeSet<usize>>,
    pub edges: Vec<(String, String)>,
    pub meta: Vec<(usize, String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Hide {
    Interface,
    Method(usize),
    Param(usize, usize),
}

/// A component providing one interface made of `methods`.
#[derive(Debug, Clone)]
pub struct Provider {
    pub id: String,
    pub domain: String,
    pub interface: String,
    pub methods: Vec<Sig>,
    pub masks: Vec<BTreeSet<Hide>>,
    pub edges: Vec<(String, String)>,
}

fn random_type(rng: &mut StdRng) -> String {
    TYPES.choose(rng).unwrap().to_string()
}

fn random_sig(rng: &mut StdRng) -> Sig {
    let arity = rng.gen_range(0..=2);
    Sig {
        name: NAMES.choose(rng).unwrap().to_string(),
        params: (0..arity).map(|_| random_type(rng)).collect(),
        ret: random_type(rng),
    }
}

fn random_edges(rng: &mut StdRng) -> Vec<(String, String)> {
    FORWARD_EDGES
        .iter()
        .filter(|_| rng.gen_bool(0.35))
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

fn random_domain(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.85) { DOMAIN } else { "other" }.to_string()
}

pub fn random_requirer(rng: &mut StdRng, id: &str) -> Requirer {
    let decl_count = rng.gen_range(1..=2);
    let mut budget = 6;
    let mut decls = Vec::new();
    for d in 0..decl_count {
        let max = if d + 1 == decl_count { budget } else { budget.min(3) };
        let n = rng.gen_range(1..=max.min(3));
        budget -= n;
        decls.push((0..n).map(|_| random_sig(rng)).collect());
    }
    let revisions = rng.gen_range(1..=4);
    let mut masks: Vec<BTreeSet<usize>> = (0..revisions - 1)
        .map(|_| (0..decl_count).filter(|_| rng.gen_bool(0.4)).collect())
        .collect();
    masks.push(BTreeSet::new());
    let meta_values = ["plain", "a&b", "<x>", "q\"uote", "tab\there"];
    let meta = (0..rng.gen_range(0..=2))
        .map(|k| {
            (
                rng.gen_range(0..decl_count),
                format!("pattern.k{k}"),
                meta_values.choose(rng).unwrap().to_string(),
            )
        })
        .collect();
    Requirer { id: id.to_owned(), domain: DOMAIN.to_owned(), decls, masks, edges: random_edges(rng), meta }
}

pub fn random_provider(rng: &mut StdRng, id: &str, wanted: &Requirer) -> Provider {
    let wanted_sigs: Vec<&Sig> = wanted.decls.iter().flatten().collect();
    let n = rng.gen_range(1..=6);
    // methods whose last parameter was added on top of a wanted signature
    let mut widened = BTreeSet::new();
    let methods = (0..n)
        .map(|i| {
            if rng.gen_bool(0.6) {
                let mut s = (*wanted_sigs.choose(rng).unwrap()).clone();
                if rng.gen_bool(0.3) {
                    s.ret = random_type(rng);
                }
                if !s.params.is_empty() && rng.gen_bool(0.3) {
                    let i = rng.gen_range(0..s.params.len());
                    s.params[i] = random_type(rng);
                }
                if rng.gen_bool(0.25) {
                    s.params.push(random_type(rng));
                    widened.insert(i);
                }
                s
            } else {
                random_sig(rng)
            }
        })
        .collect::<Vec<Sig>>();
    let revisions = rng.gen_range(1..=4);
    let mut masks: Vec<BTreeSet<Hide>> = (0..revisions - 1)
        .map(|_| {
            let mut hide = BTreeSet::new();
            if rng.gen_bool(0.1) {
                hide.insert(Hide::Interface);
            }
            for (i, m) in methods.iter().enumerate() {
                if rng.gen_bool(0.3) {
                    hide.insert(Hide::Method(i));
                }
                for j in 0..m.params.len() {
                    let odds = if widened.contains(&i) && j + 1 == m.params.len() { 0.6 } else { 0.15 };
                    if rng.gen_bool(odds) {
                        hide.insert(Hide::Param(i, j));
                    }
                }
            }
            hide
        })
        .collect();
    masks.push(BTreeSet::new());
    Provider {
        id: id.to_owned(),
        domain: random_domain(rng),
        interface: if rng.gen_bool(0.85) { PORT } else { "J" }.to_owned(),
        methods,
        masks,
        edges: random_edges(rng),
    }
}

/// A provider offering exactly what `wanted` requires at its newest revision.
pub fn exact_provider(id: &str, wanted: &Requirer) -> Provider {
    exact_provider_at(id, wanted, wanted.newest())
}

/// A provider offering exactly what `wanted` requires at `ordinal`.
pub fn exact_provider_at(id: &str, wanted: &Requirer, ordinal: usize) -> Provider {
    Provider {
        id: id.to_owned(),
        domain: wanted.domain.clone(),
        interface: PORT.to_owned(),
        methods: wanted
            .decls
            .iter()
            .enumerate()
            .filter(|(k, _)| !wanted.masks[ordinal].contains(k))
            .flat_map(|(_, d)| d.iter().cloned())
            .collect(),
        masks: vec![BTreeSet::new()],
        edges: Vec::new(),
    }
}

fn typing(edges: &[(String, String)]) -> TypingContext {
    TypingContext::from_edges(edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap()
}

fn revisions<T>(masks: &[BTreeSet<T>], node_id: impl Fn(&T) -> String) -> Vec<Revision> {
    masks
        .iter()
        .enumerate()
        .rev()
        .map(|(o, m)| Revision::new(o, &format!("r{o}"), m.iter().map(&node_id).collect::<Vec<_>>()))
        .collect()
}

impl Requirer {
    pub fn newest(&self) -> usize {
        self.masks.len() - 1
    }

    pub fn to_nmc(&self) -> Nmc {
        let mut t = Aslt::new();
        t.add_node_with_id("pkg", None, NodeKind::Package, "app", None).unwrap();
        for k in 0..self.decls.len() {
            t.add_node_with_id(&format!("k{k}"), Some("pkg"), NodeKind::Class, &format!("Client{k}"), None).unwrap();
        }
        for (k, key, value) in &self.meta {
            t.attach_meta(&format!("k{k}"), key, value).unwrap();
        }
        let ports = self
            .decls
            .iter()
            .enumerate()
            .map(|(k, sigs)| PortDecl::Required {
                interface: PORT.into(),
                node: Some(format!("k{k}").as_str().into()),
                signatures: sigs.iter().map(Sig::to_signature).collect(),
            })
            .collect();
        Nmc::assemble(&self.id, &self.domain, t, typing(&self.edges), ports, revisions(&self.masks, |k| format!("k{k}")))
            .unwrap()
    }
}

fn hide_id(h: &Hide) -> String {
    match h {
        Hide::Interface => "if".into(),
        Hide::Method(i) => format!("m{i}"),
        Hide::Param(i, j) => format!("m{i}p{j}"),
    }
}

impl Provider {
    pub fn newest(&self) -> usize {
        self.masks.len() - 1
    }

    pub fn to_nmc(&self) -> Nmc {
        let mut t = Aslt::new();
        t.add_node_with_id("pkg", None, NodeKind::Package, "lib", None).unwrap();
        t.add_node_with_id("if", Some("pkg"), NodeKind::Interface, &self.interface, None).unwrap();
        for (i, m) in self.methods.iter().enumerate() {
            let mid = format!("m{i}");
            t.add_node_with_id(&mid, Some("if"), NodeKind::Method, &m.name, Some(&m.ret)).unwrap();
            for (j, p) in m.params.iter().enumerate() {
                t.add_node_with_id(&format!("m{i}p{j}"), Some(&mid), NodeKind::Parameter, &format!("p{j}"), Some(p))
                    .unwrap();
            }
        }
        let ports = vec![PortDecl::Provided { interface: self.interface.clone(), node: "if".into(), declared: None }];
        Nmc::assemble(&self.id, &self.domain, t, typing(&self.edges), ports, revisions(&self.masks, hide_id)).unwrap()
    }

    /// Visible signatures at `ordinal`, or `None` when the interface is hidden.
    pub fn visible_sigs(&self, ordinal: usize) -> Option<Vec<Sig>> {
        let mask = &self.masks[ordinal];
        if mask.contains(&Hide::Interface) {
            return None;
        }
        let sigs = self
            .methods
            .iter()
            .enumerate()
            .filter(|(i, _)| !mask.contains(&Hide::Method(*i)))
            .map(|(i, m)| Sig {
                name: m.name.clone(),
                params: m
                    .params
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !mask.contains(&Hide::Param(i, *j)))
                    .map(|(_, p)| p.clone())
                    .collect(),
                ret: m.ret.clone(),
            })
            .collect();
        Some(sigs)
    }
}

/// Breadth-first reachability over explicit edges, reflexive.
pub fn reachable(edges: &[(String, String)], from: &str, to: &str) -> bool {
    let mut seen = BTreeSet::from([from.to_owned()]);
    let mut queue = VecDeque::from([from.to_owned()]);
    while let Some(t) = queue.pop_front() {
        if t == to {
            return true;
        }
        for (a, b) in edges {
            if *a == t && seen.insert(b.clone()) {
                queue.push_back(b.clone());
            }
        }
    }
    false
}

/// Does `r` at ordinal `ri` link with `p` at ordinal `pi`?
pub fn oracle_works(r: &Requirer, ri: usize, p: &Provider, pi: usize) -> bool {
    if r.domain != p.domain {
        return false;
    }
    let edges: Vec<(String, String)> = r.edges.iter().chain(&p.edges).cloned().collect();
    let active: Vec<&Vec<Sig>> =
        r.decls.iter().enumerate().filter(|(k, _)| !r.masks[ri].contains(k)).map(|(_, d)| d).collect();
    if active.is_empty() || p.interface != PORT {
        return false;
    }
    let Some(offered) = p.visible_sigs(pi) else { return false };
    active.iter().flat_map(|d| d.iter()).all(|want| {
        offered.iter().any(|have| {
            have.name == want.name
                && have.params.len() == want.params.len()
                && want.params.iter().zip(&have.params).all(|(w, h)| reachable(&edges, w, h))
                && reachable(&edges, &have.ret, &want.ret)
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Works,
    Rollback { r: usize, p: usize, distance: usize },
    DoesNotWork,
}

/// Exhaustive classification of a pair starting from the newest revisions.
pub fn oracle_classify(r: &Requirer, p: &Provider) -> Expected {
    let (nr, np) = (r.newest(), p.newest());
    if oracle_works(r, nr, p, np) {
        return Expected::Works;
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for ri in 0..=nr {
        for pi in 0..=np {
            if (ri, pi) == (nr, np) || !oracle_works(r, ri, p, pi) {
                continue;
            }
            let key = (nr - ri + np - pi, nr - ri, np - pi);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    match best {
        Some((distance, dr, dp)) => Expected::Rollback { r: nr - dr, p: np - dp, distance },
        None => Expected::DoesNotWork,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpectedAnalysis {
    NoCandidates,
    Target(String, Expected),
    Nothing,
}

pub fn oracle_analyse(r: &Requirer, candidates: &[Provider]) -> ExpectedAnalysis {
    let eligible: Vec<&Provider> = candidates.iter().filter(|p| p.domain == r.domain).collect();
    if eligible.is_empty() {
        return ExpectedAnalysis::NoCandidates;
    }
    let verdicts: Vec<(&str, Expected)> = eligible.iter().map(|p| (p.id.as_str(), oracle_classify(r, p))).collect();
    if let Some((id, _)) = verdicts.iter().filter(|(_, v)| *v == Expected::Works).min_by_key(|(id, _)| *id) {
        return ExpectedAnalysis::Target(id.to_string(), Expected::Works);
    }
    let best = verdicts
        .iter()
        .filter_map(|(id, v)| match v {
            Expected::Rollback { distance, .. } => Some((*distance, *id, *v)),
            _ => None,
        })
        .min_by_key(|(d, id, _)| (*d, *id));
    match best {
        Some((_, id, v)) => ExpectedAnalysis::Target(id.to_string(), v),
        None => ExpectedAnalysis::Nothing,
    }
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
