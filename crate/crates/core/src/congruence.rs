//! The congruence generated by the strict involutive axioms, computed by
//! bounded equality saturation over an e-graph.
//!
//! Terms registered in a [`CongruenceSession`] become e-nodes whose children
//! are equivalence classes. Axiom instances over a universe are seeded as
//! merges; saturation then matches the axiom shapes against whole classes,
//! so a single rewrite covers every term of the matched classes at once.
//!
//! Classes carry their faces. Merging two classes merges their faces too,
//! since the quotient map is a morphism of cubical sets. Composition of
//! classes is admitted whenever the class-level faces agree.
//!
//! Contraction cells are opaque atoms: two contraction cells over congruent
//! but syntactically distinct pairs stay distinct unless the axioms say
//! otherwise.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presentation::{CellId, Direction, DirectionSet, Side};
use crate::report::Report;
use crate::strict::{Evaluator, Separator};
use crate::term::{Node, TermError, TermId, TermStore, TermUniverse};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationFamily {
    Assoc,
    UnitLeft,
    UnitRight,
    IdFunctoriality,
    Exchange,
    Involutive,
    StarCommute,
    StarAntihomo,
    StarHomoTransverse,
    IdHermitian,
    IdHermitianTransverse,
    ContractionProjection,
}

impl RelationFamily {
    pub const ALL: [RelationFamily; 12] = [
        RelationFamily::Assoc,
        RelationFamily::UnitLeft,
        RelationFamily::UnitRight,
        RelationFamily::IdFunctoriality,
        RelationFamily::Exchange,
        RelationFamily::Involutive,
        RelationFamily::StarCommute,
        RelationFamily::StarAntihomo,
        RelationFamily::StarHomoTransverse,
        RelationFamily::IdHermitian,
        RelationFamily::IdHermitianTransverse,
        RelationFamily::ContractionProjection,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RelationFamily::Assoc => "assoc",
            RelationFamily::UnitLeft => "unit-left",
            RelationFamily::UnitRight => "unit-right",
            RelationFamily::IdFunctoriality => "id-functoriality",
            RelationFamily::Exchange => "exchange",
            RelationFamily::Involutive => "involutive",
            RelationFamily::StarCommute => "star-commute",
            RelationFamily::StarAntihomo => "star-antihomo",
            RelationFamily::StarHomoTransverse => "star-homo-transverse",
            RelationFamily::IdHermitian => "id-hermitian",
            RelationFamily::IdHermitianTransverse => "id-hermitian-transverse",
            RelationFamily::ContractionProjection => "contraction-projection",
        }
    }
}

impl fmt::Display for RelationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RelationFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationFamily::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| format!("unknown relation family `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    Strict,
    Contraction,
}

/// One generating pair of the congruence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationInstance {
    pub left: TermId,
    pub right: TermId,
    pub family: RelationFamily,
}

#[derive(Debug, Error)]
pub enum CongruenceError {
    #[error("term `{0}` is not registered in the session")]
    Unregistered(String),
    #[error("terms live at different levels: {left} vs {right}")]
    LevelMismatch { left: String, right: String },
    #[error(transparent)]
    Term(#[from] TermError),
}

struct Instantiator<'a> {
    store: &'a mut TermStore,
    universe: &'a TermUniverse,
    out: Vec<RelationInstance>,
    seen: HashSet<(RelationFamily, TermId, TermId)>,
}

impl Instantiator<'_> {
    fn w(&self, t: TermId) -> u32 {
        self.store.weight(t)
    }

    /// Keeps instances whose sides both lie in the universe.
    fn emit(&mut self, family: RelationFamily, left: TermId, right: TermId) {
        if self.universe.contains(left) && self.universe.contains(right) {
            self.emit_any(family, left, right);
        }
    }

    fn emit_any(&mut self, family: RelationFamily, left: TermId, right: TermId) {
        if left == right {
            return;
        }
        let key = (family, left.min(right), left.max(right));
        if self.seen.insert(key) {
            self.out.push(RelationInstance {
                left,
                right,
                family,
            });
        }
    }
}

/// Every axiom instance with components in the universe whose two sides
/// both lie in the universe. Contraction-projection instances are emitted
/// for every κ-cell regardless of the size of the identity side.
/// Instances come in universe order, deduplicated up to swapping sides.
pub fn instantiate_relations(
    store: &mut TermStore,
    universe: &TermUniverse,
    mode: RelationMode,
) -> Result<Vec<RelationInstance>, TermError> {
    use RelationFamily::*;
    let max_dim = universe.max_dim;
    let dir_universe = universe.config.universe();
    let bound = universe.config.max_size();
    let terms: Vec<TermId> = universe.terms().to_vec();

    let mut by_target: HashMap<(DirectionSet, Direction, TermId), Vec<TermId>> = HashMap::new();
    for &y in &terms {
        let dirs = store.dirs(y);
        for d in dirs.iter() {
            let ty = store.boundary(y, d, Side::Target)?;
            by_target.entry((dirs, d, ty)).or_default().push(y);
        }
    }
    let empty = Vec::new();
    let lookup = |k: &(DirectionSet, Direction, TermId)| by_target.get(k).unwrap_or(&empty);

    let mut ins = Instantiator {
        store,
        universe,
        out: Vec::new(),
        seen: HashSet::new(),
    };
    for &x in &terms {
        let wx = ins.w(x);
        let dirs = ins.store.dirs(x);
        let fresh: Vec<Direction> = if dirs.len() < max_dim {
            dir_universe.iter().filter(|d| !dirs.contains(*d)).collect()
        } else {
            Vec::new()
        };
        for d in dirs.iter() {
            let sx = ins.store.boundary(x, d, Side::Source)?;
            let tx = ins.store.boundary(x, d, Side::Target)?;

            if wx + ins.w(sx) + 2 <= bound {
                let rs = ins.store.refl(d, sx)?;
                let l = ins.store.comp(d, x, rs)?;
                ins.emit(UnitRight, l, x);
            }
            if wx + ins.w(tx) + 2 <= bound {
                let rt = ins.store.refl(d, tx)?;
                let r = ins.store.comp(d, rt, x)?;
                ins.emit(UnitLeft, x, r);
            }
            if wx + 2 <= bound {
                let xx = ins.store.dual(d, x)?;
                let xxx = ins.store.dual(d, xx)?;
                ins.emit(Involutive, xxx, x);
                for e in dirs.iter().filter(|e| *e > d) {
                    let de = ins.store.dual(d, x)?;
                    let l = ins.store.dual(e, de)?;
                    let ed = ins.store.dual(e, x)?;
                    let r = ins.store.dual(d, ed)?;
                    ins.emit(StarCommute, l, r);
                }
            }

            for &y in lookup(&(dirs, d, sx)) {
                let wy = ins.w(y);
                // the smallest instance containing x ∘ y has weight wx + wy + 1
                if wx + wy + 1 > bound {
                    continue;
                }
                let xy = ins.store.comp(d, x, y)?;
                let sy = ins.store.boundary(y, d, Side::Source)?;
                for &z in lookup(&(dirs, d, sy)) {
                    if wx + wy + ins.w(z) + 2 > bound {
                        continue;
                    }
                    let yz = ins.store.comp(d, y, z)?;
                    let l = ins.store.comp(d, x, yz)?;
                    let r = ins.store.comp(d, xy, z)?;
                    ins.emit(Assoc, l, r);
                }

                if wx + wy + 3 <= bound {
                    let l = ins.store.dual(d, xy)?;
                    let dy = ins.store.dual(d, y)?;
                    let dx = ins.store.dual(d, x)?;
                    let r = ins.store.comp(d, dy, dx)?;
                    ins.emit(StarAntihomo, l, r);

                    for e in dirs.iter().filter(|e| *e != d) {
                        let l = ins.store.dual(e, xy)?;
                        let ex = ins.store.dual(e, x)?;
                        let ey = ins.store.dual(e, y)?;
                        if let Ok(r) = ins.store.comp(d, ex, ey) {
                            ins.emit(StarHomoTransverse, l, r);
                        }
                    }

                    for &e in &fresh {
                        let l = ins.store.refl(e, xy)?;
                        let ex = ins.store.refl(e, x)?;
                        let ey = ins.store.refl(e, y)?;
                        if let Ok(r) = ins.store.comp(d, ex, ey) {
                            ins.emit(IdFunctoriality, l, r);
                        }
                    }
                }

                // (x ∘_d y) ∘_f (w ∘_d z) against (x ∘_f w) ∘_d (y ∘_f z)
                for f in dirs.iter().filter(|f| *f != d) {
                    let sfx = ins.store.boundary(x, f, Side::Source)?;
                    let sfy = ins.store.boundary(y, f, Side::Source)?;
                    for &w in lookup(&(dirs, f, sfx)) {
                        let ww = ins.w(w);
                        if wx + wy + ww + 3 > bound {
                            continue;
                        }
                        let sw = ins.store.boundary(w, d, Side::Source)?;
                        for &z in lookup(&(dirs, d, sw)) {
                            if wx + wy + ww + ins.w(z) + 3 > bound
                                || ins.store.boundary(z, f, Side::Target)? != sfy
                            {
                                continue;
                            }
                            let wz = ins.store.comp(d, w, z)?;
                            let (Ok(l), Ok(xw), Ok(yz)) = (
                                ins.store.comp(f, xy, wz),
                                ins.store.comp(f, x, w),
                                ins.store.comp(f, y, z),
                            ) else {
                                continue;
                            };
                            if let Ok(r) = ins.store.comp(d, xw, yz) {
                                ins.emit(Exchange, l, r);
                            }
                        }
                    }
                }
            }
        }
        for &d in &fresh {
            if wx + 2 > bound {
                continue;
            }
            let ix = ins.store.refl(d, x)?;
            let l = ins.store.dual(d, ix)?;
            ins.emit(IdHermitian, l, ix);
            for e in dirs.iter() {
                let l = ins.store.dual(e, ix)?;
                let ex = ins.store.dual(e, x)?;
                let r = ins.store.refl(d, ex)?;
                ins.emit(IdHermitianTransverse, l, r);
            }
        }
        if mode == RelationMode::Contraction {
            if let Node::Kappa(d, a, _) = ins.store.node(x) {
                let r = ins.store.refl(d, a)?;
                ins.emit_any(ContractionProjection, x, r);
            }
        }
    }
    Ok(ins.out)
}

/// An equivalence class of the session, named by its current root node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    Gen(CellId),
    Atom(TermId),
    Refl(Direction),
    Dual(Direction),
    Comp(Direction),
}

const NO_CHILD: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct ENode {
    op: Op,
    a: u32,
    b: u32,
}

/// Why two nodes were merged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reason {
    Seed { family: RelationFamily },
    Rule { family: RelationFamily },
    Congruence,
    Face,
    Planted,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::Seed { family } => write!(f, "axiom {family}"),
            Reason::Rule { family } => write!(f, "rewrite {family}"),
            Reason::Congruence => f.write_str("congruence"),
            Reason::Face => f.write_str("face of merged cells"),
            Reason::Planted => f.write_str("planted"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub from: String,
    pub to: String,
    pub reason: Reason,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationStats {
    pub rounds: usize,
    pub merges: usize,
    pub nodes: usize,
    pub terms: usize,
    pub fixpoint: bool,
    pub node_cap_hit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Equal,
    NotEqual,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    MergeTrace {
        steps: Vec<ProofStep>,
    },
    Separator {
        separator: String,
        left_value: String,
        right_value: String,
    },
    Budget {
        rounds: usize,
        fixpoint: bool,
        node_cap_hit: bool,
        separators_tried: usize,
        separators_failed: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub left: String,
    pub right: String,
    pub witness: Witness,
}

#[derive(Clone, Debug)]
struct ClassData {
    members: Vec<u32>,
    parents: Vec<u32>,
    faces: Vec<(Direction, Side, u32)>,
    dirs: DirectionSet,
}

enum Rhs {
    Class(u32),
    Refl(Direction, Box<Rhs>),
    Dual(Direction, Box<Rhs>),
    Comp(Direction, Box<Rhs>, Box<Rhs>),
}

fn c(n: u32) -> Box<Rhs> {
    Box::new(Rhs::Class(n))
}

enum Action {
    Merge(u32, u32, RelationFamily),
    Build(u32, Rhs, RelationFamily),
}

/// Bounded congruence closure over the terms of one store.
pub struct CongruenceSession {
    store: TermStore,
    mode: RelationMode,
    max_dim: usize,
    nodes: Vec<ENode>,
    uf: Vec<u32>,
    memo: HashMap<ENode, u32>,
    classes: Vec<Option<ClassData>>,
    term_node: HashMap<TermId, u32>,
    node_term: Vec<Option<TermId>>,
    registered: Vec<TermId>,
    dirty: Vec<u32>,
    pending: Vec<(u32, u32, Reason)>,
    edges: Vec<(u32, u32, Reason)>,
    instances: Vec<RelationInstance>,
    seeded: HashSet<(RelationFamily, TermId, TermId)>,
    disabled: BTreeSet<RelationFamily>,
    node_cap: usize,
    stats: SaturationStats,
}

impl CongruenceSession {
    pub const DEFAULT_NODE_CAP: usize = 400_000;

    pub fn new(store: TermStore, mode: RelationMode, max_dim: usize) -> Self {
        CongruenceSession {
            store,
            mode,
            max_dim,
            nodes: Vec::new(),
            uf: Vec::new(),
            memo: HashMap::new(),
            classes: Vec::new(),
            term_node: HashMap::new(),
            node_term: Vec::new(),
            registered: Vec::new(),
            dirty: Vec::new(),
            pending: Vec::new(),
            edges: Vec::new(),
            instances: Vec::new(),
            seeded: HashSet::new(),
            disabled: BTreeSet::new(),
            node_cap: Self::DEFAULT_NODE_CAP,
            stats: SaturationStats::default(),
        }
    }

    /// Registers the universe, seeds every axiom instance over it and
    /// returns the session ready for [`saturate`](Self::saturate).
    pub fn from_universe(
        store: TermStore,
        universe: &TermUniverse,
        mode: RelationMode,
    ) -> Result<Self, TermError> {
        let mut s = CongruenceSession::new(store, mode, universe.max_dim);
        s.add_universe(universe)?;
        Ok(s)
    }

    /// Registers further terms and seeds the instances over them.
    pub fn add_universe(&mut self, universe: &TermUniverse) -> Result<usize, TermError> {
        self.max_dim = self.max_dim.max(universe.max_dim);
        for &t in universe.terms() {
            self.add_term(t)?;
        }
        let inst = instantiate_relations(&mut self.store, universe, self.mode)?;
        let before = self.instances.len();
        self.seed(&inst)?;
        Ok(self.instances.len() - before)
    }

    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = cap;
        self
    }

    /// Switches a family off for seeding and rewriting. Meant for mutation
    /// tests of the checkers built on top of the session.
    pub fn disable_family(&mut self, family: RelationFamily) {
        self.disabled.insert(family);
    }

    pub fn mode(&self) -> RelationMode {
        self.mode
    }

    pub fn store(&self) -> &TermStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut TermStore {
        &mut self.store
    }

    pub fn into_store(self) -> TermStore {
        self.store
    }

    pub fn stats(&self) -> SaturationStats {
        let mut s = self.stats;
        s.nodes = self.nodes.len();
        s.terms = self.registered.len();
        s
    }

    pub fn instances(&self) -> &[RelationInstance] {
        &self.instances
    }

    /// Registered terms, in registration order.
    pub fn terms(&self) -> &[TermId] {
        &self.registered
    }

    pub fn contains(&self, t: TermId) -> bool {
        self.term_node.contains_key(&t)
    }

    fn find(&self, mut n: u32) -> u32 {
        while self.uf[n as usize] != n {
            n = self.uf[n as usize];
        }
        n
    }

    fn canon(&self, e: ENode) -> ENode {
        ENode {
            op: e.op,
            a: if e.a == NO_CHILD { NO_CHILD } else { self.find(e.a) },
            b: if e.b == NO_CHILD { NO_CHILD } else { self.find(e.b) },
        }
    }

    fn class(&self, n: u32) -> &ClassData {
        self.classes[self.find(n) as usize].as_ref().expect("root carries class data")
    }

    fn dirs_of(&self, n: u32) -> DirectionSet {
        self.class(n).dirs
    }

    fn face(&self, n: u32, d: Direction, side: Side) -> Option<u32> {
        self.class(n)
            .faces
            .iter()
            .find(|(e, s, _)| *e == d && *s == side)
            .map(|&(_, _, f)| self.find(f))
    }

    pub fn class_of(&self, t: TermId) -> Option<ClassId> {
        self.term_node.get(&t).map(|&n| ClassId(self.find(n)))
    }

    /// `Some(true)` when both terms are registered and congruent.
    pub fn same_class(&self, x: TermId, y: TermId) -> Option<bool> {
        Some(self.class_of(x)? == self.class_of(y)?)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    /// Adds `t` and all its subterms and faces.
    pub fn add_term(&mut self, t: TermId) -> Result<ClassId, TermError> {
        let n = self.add_term_node(t)?;
        self.rebuild();
        Ok(ClassId(self.find(n)))
    }

    fn add_term_node(&mut self, t: TermId) -> Result<u32, TermError> {
        if let Some(&n) = self.term_node.get(&t) {
            return Ok(n);
        }
        let e = match self.store.node(t) {
            Node::Gen(c) => ENode {
                op: Op::Gen(c),
                a: NO_CHILD,
                b: NO_CHILD,
            },
            Node::Kappa(_, x, y) => {
                self.add_term_node(x)?;
                self.add_term_node(y)?;
                ENode {
                    op: Op::Atom(t),
                    a: NO_CHILD,
                    b: NO_CHILD,
                }
            }
            Node::Refl(d, x) => ENode {
                op: Op::Refl(d),
                a: self.add_term_node(x)?,
                b: NO_CHILD,
            },
            Node::Dual(d, x) => ENode {
                op: Op::Dual(d),
                a: self.add_term_node(x)?,
                b: NO_CHILD,
            },
            Node::Comp(d, x, y) => {
                let a = self.add_term_node(x)?;
                let b = self.add_term_node(y)?;
                ENode {
                    op: Op::Comp(d),
                    a,
                    b,
                }
            }
        };
        let n = self.get_or_make(e)?;
        if self.node_term[n as usize].is_none() {
            self.node_term[n as usize] = Some(t);
        }
        self.term_node.insert(t, n);
        self.registered.push(t);
        Ok(n)
    }

    fn get_or_make(&mut self, e: ENode) -> Result<u32, TermError> {
        let key = self.canon(e);
        if let Some(&n) = self.memo.get(&key) {
            return Ok(n);
        }
        let dirs = match key.op {
            Op::Gen(c) => self.store.presentation().dirs(c),
            Op::Atom(t) => self.store.dirs(t),
            Op::Refl(d) => self.dirs_of(key.a).with(d),
            Op::Dual(_) | Op::Comp(_) => self.dirs_of(key.a),
        };
        let id = self.nodes.len() as u32;
        self.nodes.push(key);
        self.uf.push(id);
        self.node_term.push(None);
        self.classes.push(Some(ClassData {
            members: vec![id],
            parents: Vec::new(),
            faces: Vec::new(),
            dirs,
        }));
        for kid in [key.a, key.b] {
            if kid != NO_CHILD {
                let r = self.find(kid) as usize;
                self.classes[r].as_mut().unwrap().parents.push(id);
            }
        }
        self.memo.insert(key, id);
        let mut faces = Vec::with_capacity(2 * dirs.len());
        for d in dirs.iter() {
            for side in Side::BOTH {
                faces.push((d, side, self.compute_face(key, d, side)?));
            }
        }
        let r = self.find(id) as usize;
        self.classes[r].as_mut().unwrap().faces = faces;
        Ok(id)
    }

    fn compute_face(&mut self, e: ENode, d: Direction, side: Side) -> Result<u32, TermError> {
        let face = |s: &Self, n: u32, sd: Side| s.face(n, d, sd).expect("faces of existing classes are known");
        match e.op {
            Op::Gen(cell) => {
                let pres = self.store.presentation().clone();
                let f = pres.face(cell, d, side).ok_or_else(|| TermError::MissingFace {
                    cell: pres.qualified(cell),
                    direction: d,
                    side: side.letter().to_string(),
                })?;
                let g = self.store.gen(f);
                self.add_term_node(g)
            }
            Op::Atom(t) => {
                let f = self.store.boundary(t, d, side)?;
                self.add_term_node(f)
            }
            Op::Refl(e2) if e2 == d => Ok(e.a),
            Op::Refl(e2) => {
                let fa = face(self, e.a, side);
                self.get_or_make(ENode {
                    op: Op::Refl(e2),
                    a: fa,
                    b: NO_CHILD,
                })
            }
            Op::Dual(e2) if e2 == d => Ok(face(self, e.a, side.flip())),
            Op::Dual(e2) => {
                let fa = face(self, e.a, side);
                self.get_or_make(ENode {
                    op: Op::Dual(e2),
                    a: fa,
                    b: NO_CHILD,
                })
            }
            Op::Comp(e2) if e2 == d => Ok(match side {
                Side::Source => face(self, e.b, side),
                Side::Target => face(self, e.a, side),
            }),
            Op::Comp(e2) => {
                let fa = face(self, e.a, side);
                let fb = face(self, e.b, side);
                self.get_or_make(ENode {
                    op: Op::Comp(e2),
                    a: fa,
                    b: fb,
                })
            }
        }
    }

    fn union(&mut self, a: u32, b: u32, reason: Reason) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.edges.push((a, b, reason));
        self.stats.merges += 1;
        let (big, small) = {
            let la = self.classes[ra as usize].as_ref().unwrap().members.len();
            let lb = self.classes[rb as usize].as_ref().unwrap().members.len();
            if la >= lb {
                (ra, rb)
            } else {
                (rb, ra)
            }
        };
        self.uf[small as usize] = big;
        let sd = self.classes[small as usize].take().unwrap();
        self.dirty.extend(sd.parents.iter().copied());
        let bd = self.classes[big as usize].as_mut().unwrap();
        bd.members.extend(sd.members);
        bd.parents.extend(sd.parents);
        for (d, side, f) in sd.faces {
            if let Some(&(_, _, g)) = bd.faces.iter().find(|(e, s, _)| *e == d && *s == side) {
                self.pending.push((f, g, Reason::Face));
            }
        }
        true
    }

    /// Restores the congruence and face-compatibility invariants after merges.
    fn rebuild(&mut self) {
        loop {
            while let Some((a, b, r)) = self.pending.pop() {
                self.union(a, b, r);
            }
            if self.dirty.is_empty() {
                break;
            }
            let todo = std::mem::take(&mut self.dirty);
            for p in todo {
                let key = self.canon(self.nodes[p as usize]);
                match self.memo.get(&key) {
                    Some(&q) => {
                        if self.find(q) != self.find(p) {
                            self.pending.push((p, q, Reason::Congruence));
                        }
                    }
                    None => {
                        self.memo.insert(key, p);
                    }
                }
            }
        }
    }

    /// Seeds relation instances as merges (skipping disabled families).
    pub fn seed(&mut self, instances: &[RelationInstance]) -> Result<(), TermError> {
        for inst in instances {
            if self.disabled.contains(&inst.family) {
                continue;
            }
            let key = (inst.family, inst.left, inst.right);
            if !self.seeded.insert(key) {
                continue;
            }
            let a = self.add_term_node(inst.left)?;
            let b = self.add_term_node(inst.right)?;
            self.union(a, b, Reason::Seed {
                family: inst.family,
            });
            self.instances.push(*inst);
        }
        self.rebuild();
        Ok(())
    }

    /// Forces a merge. Only for planting faults in tests of downstream checkers.
    pub fn plant_merge(&mut self, x: TermId, y: TermId) -> Result<(), TermError> {
        let a = self.add_term_node(x)?;
        let b = self.add_term_node(y)?;
        self.union(a, b, Reason::Planted);
        self.rebuild();
        Ok(())
    }

    fn members_with<'s>(&'s self, class: u32) -> impl Iterator<Item = ENode> + 's {
        self.class(class)
            .members
            .iter()
            .map(move |&m| self.canon(self.nodes[m as usize]))
    }

    fn collect_actions(&self, n: u32, out: &mut Vec<Action>) {
        use RelationFamily::*;
        let node = self.canon(self.nodes[n as usize]);
        match node.op {
            Op::Gen(_) | Op::Atom(_) => {}
            Op::Comp(d) => {
                let (a, b) = (node.a, node.b);
                for m in self.members_with(b) {
                    match m.op {
                        Op::Refl(e) if e == d => out.push(Action::Merge(n, a, UnitRight)),
                        Op::Comp(e) if e == d => out.push(Action::Build(
                            n,
                            Rhs::Comp(d, Box::new(Rhs::Comp(d, c(a), c(m.a))), c(m.b)),
                            Assoc,
                        )),
                        _ => {}
                    }
                }
                for m in self.members_with(a) {
                    match m.op {
                        Op::Refl(e) if e == d => out.push(Action::Merge(n, b, UnitLeft)),
                        Op::Comp(e) if e == d => out.push(Action::Build(
                            n,
                            Rhs::Comp(d, c(m.a), Box::new(Rhs::Comp(d, c(m.b), c(b)))),
                            Assoc,
                        )),
                        _ => {}
                    }
                }
                let binary = |m: &ENode| !matches!(m.op, Op::Gen(_) | Op::Atom(_));
                let lefts: Vec<ENode> = self.members_with(a).filter(binary).collect();
                let rights: Vec<ENode> = self.members_with(b).filter(binary).collect();
                for l in &lefts {
                    for r in &rights {
                        match (l.op, r.op) {
                            // (x ∘_e y) ∘_d (w ∘_e z) -> (x ∘_d w) ∘_e (y ∘_d z)
                            (Op::Comp(e), Op::Comp(e2)) if e == e2 && e != d => {
                                out.push(Action::Build(
                                    n,
                                    Rhs::Comp(
                                        e,
                                        Box::new(Rhs::Comp(d, c(l.a), c(r.a))),
                                        Box::new(Rhs::Comp(d, c(l.b), c(r.b))),
                                    ),
                                    Exchange,
                                ))
                            }
                            // y* ∘_d x* -> (x ∘_d y)*
                            (Op::Dual(e), Op::Dual(e2)) if e == e2 && e == d => out.push(Action::Build(
                                n,
                                Rhs::Dual(d, Box::new(Rhs::Comp(d, c(r.a), c(l.a)))),
                                StarAntihomo,
                            )),
                            (Op::Dual(e), Op::Dual(e2)) if e == e2 => out.push(Action::Build(
                                n,
                                Rhs::Dual(e, Box::new(Rhs::Comp(d, c(l.a), c(r.a)))),
                                StarHomoTransverse,
                            )),
                            (Op::Refl(e), Op::Refl(e2)) if e == e2 && e != d => out.push(Action::Build(
                                n,
                                Rhs::Refl(e, Box::new(Rhs::Comp(d, c(l.a), c(r.a)))),
                                IdFunctoriality,
                            )),
                            _ => {}
                        }
                    }
                }
            }
            Op::Dual(d) => {
                for m in self.members_with(node.a) {
                    match m.op {
                        Op::Dual(e) if e == d => out.push(Action::Merge(n, m.a, Involutive)),
                        Op::Dual(e) => out.push(Action::Build(
                            n,
                            Rhs::Dual(e, Box::new(Rhs::Dual(d, c(m.a)))),
                            StarCommute,
                        )),
                        Op::Refl(e) if e == d => out.push(Action::Merge(n, node.a, IdHermitian)),
                        Op::Refl(e) => out.push(Action::Build(
                            n,
                            Rhs::Refl(e, Box::new(Rhs::Dual(d, c(m.a)))),
                            IdHermitianTransverse,
                        )),
                        Op::Comp(e) if e == d => out.push(Action::Build(
                            n,
                            Rhs::Comp(d, Box::new(Rhs::Dual(d, c(m.b))), Box::new(Rhs::Dual(d, c(m.a)))),
                            StarAntihomo,
                        )),
                        Op::Comp(e) => out.push(Action::Build(
                            n,
                            Rhs::Comp(e, Box::new(Rhs::Dual(d, c(m.a))), Box::new(Rhs::Dual(d, c(m.b)))),
                            StarHomoTransverse,
                        )),
                        _ => {}
                    }
                }
            }
            Op::Refl(d) => {
                for m in self.members_with(node.a) {
                    match m.op {
                        Op::Comp(e) => out.push(Action::Build(
                            n,
                            Rhs::Comp(e, Box::new(Rhs::Refl(d, c(m.a))), Box::new(Rhs::Refl(d, c(m.b)))),
                            IdFunctoriality,
                        )),
                        Op::Dual(e) => out.push(Action::Build(
                            n,
                            Rhs::Dual(e, Box::new(Rhs::Refl(d, c(m.a)))),
                            IdHermitianTransverse,
                        )),
                        _ => {}
                    }
                }
            }
        }
    }

    /// Builds the right-hand side with class-level typing; `None` when it
    /// is ill-typed or the node cap is reached.
    fn build(&mut self, r: &Rhs) -> Result<Option<u32>, TermError> {
        Ok(match r {
            Rhs::Class(n) => Some(self.find(*n)),
            Rhs::Refl(d, x) => {
                let Some(x) = self.build(x)? else { return Ok(None) };
                let dirs = self.dirs_of(x);
                if dirs.contains(*d) || dirs.len() >= self.max_dim {
                    return Ok(None);
                }
                self.make_capped(Op::Refl(*d), x, NO_CHILD)?
            }
            Rhs::Dual(d, x) => {
                let Some(x) = self.build(x)? else { return Ok(None) };
                if !self.dirs_of(x).contains(*d) {
                    return Ok(None);
                }
                self.make_capped(Op::Dual(*d), x, NO_CHILD)?
            }
            Rhs::Comp(d, x, y) => {
                let Some(x) = self.build(x)? else { return Ok(None) };
                let Some(y) = self.build(y)? else { return Ok(None) };
                let dirs = self.dirs_of(x);
                if dirs != self.dirs_of(y) || !dirs.contains(*d) {
                    return Ok(None);
                }
                if self.face(x, *d, Side::Source) != self.face(y, *d, Side::Target) {
                    return Ok(None);
                }
                self.make_capped(Op::Comp(*d), x, y)?
            }
        })
    }

    fn make_capped(&mut self, op: Op, a: u32, b: u32) -> Result<Option<u32>, TermError> {
        let e = ENode { op, a, b };
        if let Some(&n) = self.memo.get(&self.canon(e)) {
            return Ok(Some(n));
        }
        if self.nodes.len() >= self.node_cap {
            self.stats.node_cap_hit = true;
            return Ok(None);
        }
        self.get_or_make(e).map(Some)
    }

    /// Runs up to `budget` rounds of class-level rewriting. Stops early at a
    /// fixpoint (a round that neither merges nor creates anything).
    pub fn saturate(&mut self, budget: usize) -> Result<SaturationStats, TermError> {
        self.rebuild();
        self.stats.fixpoint = false;
        for _ in 0..budget {
            let merges0 = self.stats.merges;
            let nodes0 = self.nodes.len();
            let mut actions = Vec::new();
            for n in 0..nodes0 as u32 {
                // congruent duplicates match the same patterns
                if self.memo.get(&self.canon(self.nodes[n as usize])) != Some(&n) {
                    continue;
                }
                self.collect_actions(n, &mut actions);
            }
            for act in actions {
                match act {
                    Action::Merge(a, b, fam) => {
                        if !self.disabled.contains(&fam) {
                            self.union(a, b, Reason::Rule { family: fam });
                        }
                    }
                    Action::Build(a, rhs, fam) => {
                        if self.disabled.contains(&fam) {
                            continue;
                        }
                        if let Some(b) = self.build(&rhs)? {
                            self.union(a, b, Reason::Rule { family: fam });
                        }
                    }
                }
            }
            self.rebuild();
            self.stats.rounds += 1;
            if self.stats.merges == merges0 && self.nodes.len() == nodes0 {
                self.stats.fixpoint = true;
                break;
            }
        }
        Ok(self.stats())
    }

    fn best_of(&self, a: TermId, b: TermId) -> TermId {
        let ka = (self.store.size(a), self.store.display(a));
        let kb = (self.store.size(b), self.store.display(b));
        if kb < ka {
            b
        } else {
            a
        }
    }

    /// Smallest registered member of the class of `t`, by size and then by
    /// printed form.
    pub fn class_representative(&self, t: TermId) -> Option<TermId> {
        let root = self.class_of(t)?;
        let mut best = t;
        for &u in &self.registered {
            if u != best && self.class_of(u) == Some(root) {
                best = self.best_of(best, u);
            }
        }
        Some(best)
    }

    /// Representatives of every class that has a registered member.
    pub fn representatives(&self) -> HashMap<ClassId, TermId> {
        let mut out: HashMap<ClassId, TermId> = HashMap::new();
        for &u in &self.registered {
            let k = self.class_of(u).unwrap();
            let v = match out.get(&k) {
                Some(&b) => self.best_of(b, u),
                None => u,
            };
            out.insert(k, v);
        }
        out
    }

    fn render_node(&self, n: u32, reps: &HashMap<ClassId, TermId>) -> String {
        if let Some(t) = self.node_term[n as usize] {
            return self.store.display(t);
        }
        let name = |k: u32| match reps.get(&ClassId(self.find(k))) {
            Some(&t) => self.store.display(t),
            None => format!("#{}", self.find(k)),
        };
        let e = self.nodes[n as usize];
        match e.op {
            Op::Gen(c) => format!("gen({})", self.store.presentation().name(c)),
            Op::Atom(t) => self.store.display(t),
            Op::Refl(d) => format!("id[{d}]({})", name(e.a)),
            Op::Dual(d) => format!("dual[{d}]({})", name(e.a)),
            Op::Comp(d) => format!("comp[{d}]({},{})", name(e.a), name(e.b)),
        }
    }

    /// A chain of recorded merges connecting the two terms.
    pub fn explain(&self, x: TermId, y: TermId) -> Option<Vec<ProofStep>> {
        let (&a, &b) = (self.term_node.get(&x)?, self.term_node.get(&y)?);
        if self.find(a) != self.find(b) {
            return None;
        }
        let mut adj: HashMap<u32, Vec<(u32, usize)>> = HashMap::new();
        for (i, &(p, q, _)) in self.edges.iter().enumerate() {
            adj.entry(p).or_default().push((q, i));
            adj.entry(q).or_default().push((p, i));
        }
        let mut prev: HashMap<u32, (u32, usize)> = HashMap::new();
        let mut queue = VecDeque::from([a]);
        let mut seen = HashSet::from([a]);
        while let Some(u) = queue.pop_front() {
            if u == b {
                break;
            }
            for &(v, i) in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                if seen.insert(v) {
                    prev.insert(v, (u, i));
                    queue.push_back(v);
                }
            }
        }
        let reps = self.representatives();
        let mut steps = Vec::new();
        let mut cur = b;
        while cur != a {
            let &(p, i) = prev.get(&cur)?;
            steps.push(ProofStep {
                from: self.render_node(p, &reps),
                to: self.render_node(cur, &reps),
                reason: self.edges[i].2,
            });
            cur = p;
        }
        steps.reverse();
        Some(steps)
    }

    /// Equal when congruent, NotEqual when some separator evaluates the two
    /// terms differently, Unknown otherwise.
    pub fn decide_equal(
        &self,
        x: TermId,
        y: TermId,
        separators: &[Separator],
    ) -> Result<Decision, CongruenceError> {
        for t in [x, y] {
            if !self.contains(t) {
                return Err(CongruenceError::Unregistered(self.store.display(t)));
            }
        }
        let (left, right) = (self.store.display(x), self.store.display(y));
        if self.store.dirs(x) != self.store.dirs(y) {
            return Err(CongruenceError::LevelMismatch { left, right });
        }
        if self.same_class(x, y) == Some(true) {
            let steps = self.explain(x, y).unwrap_or_default();
            return Ok(Decision {
                verdict: Verdict::Equal,
                left,
                right,
                witness: Witness::MergeTrace { steps },
            });
        }
        let mut failed = Vec::new();
        for sep in separators {
            let mut ev = Evaluator::new(&sep.assignment);
            match (ev.eval(&self.store, x), ev.eval(&self.store, y)) {
                (Ok(u), Ok(v)) if u != v => {
                    let name = |c| sep.assignment.table().underlying().qualified(c);
                    return Ok(Decision {
                        verdict: Verdict::NotEqual,
                        left,
                        right,
                        witness: Witness::Separator {
                            separator: sep.name.clone(),
                            left_value: name(u),
                            right_value: name(v),
                        },
                    });
                }
                (Ok(_), Ok(_)) => {}
                (Err(e), _) | (_, Err(e)) => failed.push(format!("{}: {e}", sep.name)),
            }
        }
        let st = self.stats();
        Ok(Decision {
            verdict: Verdict::Unknown,
            left,
            right,
            witness: Witness::Budget {
                rounds: st.rounds,
                fixpoint: st.fixpoint,
                node_cap_hit: st.node_cap_hit,
                separators_tried: separators.len(),
                separators_failed: failed,
            },
        })
    }

    /// Post-saturation audit: registered terms built by the same operation
    /// from congruent arguments are congruent, and faces of congruent terms
    /// are congruent. Recomputed from the terms, not from the e-graph tables.
    pub fn audit(&mut self) -> Result<Report, TermError> {
        let mut r = Report::new();
        let mut seen: HashMap<(Op, u32, u32), (u32, TermId)> = HashMap::new();
        let terms = self.registered.clone();
        for &t in &terms {
            let cls = |s: &Self, u: TermId| s.find(s.term_node[&u]);
            let key = match self.store.node(t) {
                Node::Gen(c) => (Op::Gen(c), NO_CHILD, NO_CHILD),
                Node::Kappa(..) => (Op::Atom(t), NO_CHILD, NO_CHILD),
                Node::Refl(d, x) => (Op::Refl(d), cls(self, x), NO_CHILD),
                Node::Dual(d, x) => (Op::Dual(d), cls(self, x), NO_CHILD),
                Node::Comp(d, x, y) => (Op::Comp(d), cls(self, x), cls(self, y)),
            };
            let ct = cls(self, t);
            match seen.get(&key) {
                Some(&(c0, t0)) => r.expect(
                    c0 == ct,
                    "congruence",
                    || self.store.display(t),
                    || format!("same operation on congruent arguments as `{}`", self.store.display(t0)),
                ),
                None => {
                    seen.insert(key, (ct, t));
                    r.tick();
                }
            }
        }
        let mut face_of: HashMap<(u32, Direction, Side), (u32, TermId)> = HashMap::new();
        for &t in &terms {
            let ct = self.find(self.term_node[&t]);
            for d in self.store.dirs(t).iter() {
                for side in Side::BOTH {
                    let f = self.store.boundary(t, d, side)?;
                    let n = self.add_term_node(f)?;
                    let cf = self.find(n);
                    match face_of.get(&(ct, d, side)) {
                        Some(&(c0, t0)) => r.expect(
                            c0 == cf,
                            "face-compatibility",
                            || self.store.display(t),
                            || format!("{}{d} face differs from that of `{}`", side.letter(), self.store.display(t0)),
                        ),
                        None => {
                            face_of.insert((ct, d, side), (cf, t));
                            r.tick();
                        }
                    }
                }
            }
        }
        self.rebuild();
        r.normalize();
        Ok(r)
    }
}
