//! The free self-dual reflective cubical ω-magma as a hash-consed term algebra.
//!
//! Every term lives in a [`TermStore`] arena; structurally equal terms share
//! one [`TermId`]. Faces are computed by structural recursion and memoized.
//! Contraction cells (`Kappa`) are admitted only in contraction mode and
//! only with a certificate that their two faces are identified by the
//! projection onto the quotient.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presentation::{
    level_key, parse_level_key, CellId, Direction, DirectionSet, Presentation, Side,
    TruncationConfig, CUBICAL_IDENTITIES,
};
use crate::report::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One layer of a term. Children are interned ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Gen(CellId),
    /// Identity in a new direction: `(x, d)`.
    Refl(Direction, TermId),
    /// Self-duality in an existing direction: `(x, γ_d)`.
    Dual(Direction, TermId),
    /// Concatenation `(x, d, y)`, defined when `s_d(x) = t_d(y)`.
    Comp(Direction, TermId, TermId),
    /// Free contraction cell `[x, d, y]` over a π-identified pair.
    Kappa(Direction, TermId, TermId),
}

impl Node {
    pub fn children(&self) -> impl Iterator<Item = TermId> {
        let (a, b) = match *self {
            Node::Gen(_) => (None, None),
            Node::Refl(_, x) | Node::Dual(_, x) => (Some(x), None),
            Node::Comp(_, x, y) | Node::Kappa(_, x, y) => (Some(x), Some(y)),
        };
        a.into_iter().chain(b)
    }

    pub fn is_kappa(&self) -> bool {
        matches!(self, Node::Kappa(..))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Magma,
    Contraction,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown generator `{0}`")]
    UnknownCell(String),
    #[error("generator name `{0}` is used at several levels; qualify it as gen(dim/dirs:name)")]
    AmbiguousCell(String),
    #[error("direction bookkeeping violated at `{node}`: {reason}")]
    Direction { node: String, reason: String },
    #[error("not composable in direction {direction}: source of left is `{left_boundary}`, target of right is `{right_boundary}`")]
    NotComposable {
        direction: Direction,
        left_boundary: String,
        right_boundary: String,
    },
    #[error("contraction cells are not allowed in magma mode")]
    KappaInMagma,
    #[error("no certificate that `{left}` and `{right}` have equal projections")]
    KappaUncertified { left: String, right: String },
    #[error("direction {direction} is not a direction of `{term}`")]
    NotInDirs { term: String, direction: Direction },
    #[error("generator `{cell}` has no {side} face in direction {direction}")]
    MissingFace {
        cell: String,
        direction: Direction,
        side: String,
    },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Evidence that two parallel terms are identified by the projection π.
pub trait PiCertificate {
    fn certifies(&self, x: TermId, y: TermId) -> bool;
}

/// Refuses every pair; the right choice in magma mode.
pub struct NoCertificate;

impl PiCertificate for NoCertificate {
    fn certifies(&self, _: TermId, _: TermId) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
struct Entry {
    node: Node,
    dirs: DirectionSet,
    size: u32,
    weight: u32,
}

/// Append-only hash-consing arena for terms over one presentation.
#[derive(Clone, Debug)]
pub struct TermStore {
    pres: Arc<Presentation>,
    entries: Vec<Entry>,
    intern: HashMap<Node, TermId>,
    faces: HashMap<(TermId, Direction, Side), TermId>,
}

impl TermStore {
    pub fn new(pres: Arc<Presentation>) -> Self {
        TermStore {
            pres,
            entries: Vec::new(),
            intern: HashMap::new(),
            faces: HashMap::new(),
        }
    }

    pub fn presentation(&self) -> &Arc<Presentation> {
        &self.pres
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn node(&self, t: TermId) -> Node {
        self.entries[t.index()].node
    }

    pub fn dirs(&self, t: TermId) -> DirectionSet {
        self.entries[t.index()].dirs
    }

    pub fn dim(&self, t: TermId) -> usize {
        self.entries[t.index()].dirs.len()
    }

    /// Node count.
    pub fn size(&self, t: TermId) -> u32 {
        self.entries[t.index()].size
    }

    /// Node count with every contraction cell counted as a single atom.
    /// Depth bounds are measured in weight.
    pub fn weight(&self, t: TermId) -> u32 {
        self.entries[t.index()].weight
    }

    pub fn get(&self, node: &Node) -> Option<TermId> {
        self.intern.get(node).copied()
    }

    pub fn contains_kappa(&self, t: TermId) -> bool {
        match self.node(t) {
            Node::Kappa(..) => true,
            Node::Gen(_) => false,
            n => n.children().any(|c| self.contains_kappa(c)),
        }
    }

    fn intern(&mut self, node: Node, dirs: DirectionSet) -> TermId {
        if let Some(&id) = self.intern.get(&node) {
            return id;
        }
        let size = 1 + node.children().map(|c| self.size(c)).sum::<u32>();
        let weight = if node.is_kappa() {
            1
        } else {
            1 + node.children().map(|c| self.weight(c)).sum::<u32>()
        };
        let id = TermId(self.entries.len() as u32);
        self.entries.push(Entry {
            node,
            dirs,
            size,
            weight,
        });
        self.intern.insert(node, id);
        id
    }

    pub fn gen(&mut self, cell: CellId) -> TermId {
        let dirs = self.pres.dirs(cell);
        self.intern(Node::Gen(cell), dirs)
    }

    pub fn refl(&mut self, d: Direction, x: TermId) -> Result<TermId, TermError> {
        let dirs = self.dirs(x);
        if dirs.contains(d) {
            return Err(TermError::Direction {
                node: format!("id[{d}]({})", self.display(x)),
                reason: format!("direction {d} already belongs to the body"),
            });
        }
        Ok(self.intern(Node::Refl(d, x), dirs.with(d)))
    }

    pub fn dual(&mut self, d: Direction, x: TermId) -> Result<TermId, TermError> {
        let dirs = self.dirs(x);
        if !dirs.contains(d) {
            return Err(TermError::Direction {
                node: format!("dual[{d}]({})", self.display(x)),
                reason: format!("direction {d} is not a direction of the body"),
            });
        }
        Ok(self.intern(Node::Dual(d, x), dirs))
    }

    pub fn comp(&mut self, d: Direction, x: TermId, y: TermId) -> Result<TermId, TermError> {
        let dirs = self.dirs(x);
        if dirs != self.dirs(y) || !dirs.contains(d) {
            return Err(TermError::Direction {
                node: format!("comp[{d}]({},{})", self.display(x), self.display(y)),
                reason: format!(
                    "operands live at {{{}}} and {{{}}}; both must contain {d}",
                    dirs,
                    self.dirs(y)
                ),
            });
        }
        let sx = self.boundary(x, d, Side::Source)?;
        let ty = self.boundary(y, d, Side::Target)?;
        if sx != ty {
            return Err(TermError::NotComposable {
                direction: d,
                left_boundary: self.display(sx),
                right_boundary: self.display(ty),
            });
        }
        Ok(self.intern(Node::Comp(d, x, y), dirs))
    }

    /// `κ_d(x, y)`: the identity when `x = y`, otherwise a contraction cell
    /// that must be certified.
    pub fn kappa(
        &mut self,
        d: Direction,
        x: TermId,
        y: TermId,
        cert: &dyn PiCertificate,
    ) -> Result<TermId, TermError> {
        let dirs = self.dirs(x);
        if dirs != self.dirs(y) || dirs.contains(d) {
            return Err(TermError::Direction {
                node: format!("kappa[{d}]({},{})", self.display(x), self.display(y)),
                reason: format!("operands must share a direction set that excludes {d}"),
            });
        }
        if x == y {
            return self.refl(d, x);
        }
        if !cert.certifies(x, y) {
            return Err(TermError::KappaUncertified {
                left: self.display(x),
                right: self.display(y),
            });
        }
        Ok(self.kappa_unchecked(d, x, y))
    }

    /// Faces of certified contraction cells are again certified, so boundary
    /// computation may build them directly.
    pub(crate) fn kappa_unchecked(&mut self, d: Direction, x: TermId, y: TermId) -> TermId {
        if x == y {
            let dirs = self.dirs(x).with(d);
            return self.intern(Node::Refl(d, x), dirs);
        }
        let dirs = self.dirs(x).with(d);
        self.intern(Node::Kappa(d, x, y), dirs)
    }

    /// The face of `t` in direction `d`.
    pub fn boundary(&mut self, t: TermId, d: Direction, side: Side) -> Result<TermId, TermError> {
        if let Some(&f) = self.faces.get(&(t, d, side)) {
            return Ok(f);
        }
        if !self.dirs(t).contains(d) {
            return Err(TermError::NotInDirs {
                term: self.display(t),
                direction: d,
            });
        }
        let face = match self.node(t) {
            Node::Gen(c) => {
                let f = self.pres.face(c, d, side).ok_or_else(|| TermError::MissingFace {
                    cell: self.pres.qualified(c),
                    direction: d,
                    side: side.letter().to_string(),
                })?;
                self.gen(f)
            }
            Node::Refl(e, x) if e == d => x,
            Node::Refl(e, x) => {
                let fx = self.boundary(x, d, side)?;
                self.refl(e, fx)?
            }
            Node::Dual(e, x) if e == d => self.boundary(x, d, side.flip())?,
            Node::Dual(e, x) => {
                let fx = self.boundary(x, d, side)?;
                self.dual(e, fx)?
            }
            Node::Comp(e, x, y) if e == d => match side {
                Side::Source => self.boundary(y, d, side)?,
                Side::Target => self.boundary(x, d, side)?,
            },
            Node::Comp(e, x, y) => {
                let fx = self.boundary(x, d, side)?;
                let fy = self.boundary(y, d, side)?;
                self.comp(e, fx, fy)?
            }
            Node::Kappa(e, x, y) if e == d => match side {
                Side::Source => x,
                Side::Target => y,
            },
            Node::Kappa(e, x, y) => {
                let fx = self.boundary(x, d, side)?;
                let fy = self.boundary(y, d, side)?;
                self.kappa_unchecked(e, fx, fy)
            }
        };
        self.faces.insert((t, d, side), face);
        Ok(face)
    }

    pub fn display(&self, t: TermId) -> String {
        let mut s = String::new();
        self.write_term(t, &mut s);
        s
    }

    fn write_term(&self, t: TermId, out: &mut String) {
        use std::fmt::Write;
        match self.node(t) {
            Node::Gen(c) => {
                let name = self.pres.name(c);
                if self.pres.name_is_unique(name) {
                    let _ = write!(out, "gen({name})");
                } else {
                    let _ = write!(out, "gen({})", self.pres.qualified(c));
                }
            }
            Node::Refl(d, x) => {
                let _ = write!(out, "id[{d}](");
                self.write_term(x, out);
                out.push(')');
            }
            Node::Dual(d, x) => {
                let _ = write!(out, "dual[{d}](");
                self.write_term(x, out);
                out.push(')');
            }
            Node::Comp(d, x, y) | Node::Kappa(d, x, y) => {
                let op = if matches!(self.node(t), Node::Comp(..)) { "comp" } else { "kappa" };
                let _ = write!(out, "{op}[{d}](");
                self.write_term(x, out);
                out.push(',');
                self.write_term(y, out);
                out.push(')');
            }
        }
    }

    pub fn to_expr(&self, t: TermId) -> TermExpr {
        match self.node(t) {
            Node::Gen(c) => {
                let name = self.pres.name(c).to_string();
                let level = (!self.pres.name_is_unique(&name)).then(|| self.pres.dirs(c));
                TermExpr::Gen { name, level }
            }
            Node::Refl(d, x) => TermExpr::Refl(d, Box::new(self.to_expr(x))),
            Node::Dual(d, x) => TermExpr::Dual(d, Box::new(self.to_expr(x))),
            Node::Comp(d, x, y) => {
                TermExpr::Comp(d, Box::new(self.to_expr(x)), Box::new(self.to_expr(y)))
            }
            Node::Kappa(d, x, y) => {
                TermExpr::Kappa(d, Box::new(self.to_expr(x)), Box::new(self.to_expr(y)))
            }
        }
    }

    /// Builds (and interns) the term denoted by `expr`.
    pub fn construct(
        &mut self,
        expr: &TermExpr,
        mode: Mode,
        cert: &dyn PiCertificate,
    ) -> Result<TermId, TermError> {
        match expr {
            TermExpr::Gen { name, level } => {
                let cell = match level {
                    Some(dirs) => self
                        .pres
                        .find(*dirs, name)
                        .ok_or_else(|| TermError::UnknownCell(name.clone()))?,
                    None => {
                        let found = self.pres.find_by_name(name);
                        match found.as_slice() {
                            [] => return Err(TermError::UnknownCell(name.clone())),
                            [c] => *c,
                            _ => return Err(TermError::AmbiguousCell(name.clone())),
                        }
                    }
                };
                Ok(self.gen(cell))
            }
            TermExpr::Refl(d, x) => {
                let x = self.construct(x, mode, cert)?;
                self.refl(*d, x)
            }
            TermExpr::Dual(d, x) => {
                let x = self.construct(x, mode, cert)?;
                self.dual(*d, x)
            }
            TermExpr::Comp(d, x, y) => {
                let x = self.construct(x, mode, cert)?;
                let y = self.construct(y, mode, cert)?;
                self.comp(*d, x, y)
            }
            TermExpr::Kappa(d, x, y) => {
                if mode == Mode::Magma {
                    return Err(TermError::KappaInMagma);
                }
                let x = self.construct(x, mode, cert)?;
                let y = self.construct(y, mode, cert)?;
                self.kappa(*d, x, y, cert)
            }
        }
    }

    /// Parses the textual syntax and constructs the term.
    pub fn parse(
        &mut self,
        text: &str,
        mode: Mode,
        cert: &dyn PiCertificate,
    ) -> Result<TermId, TermError> {
        let expr: TermExpr = text.parse()?;
        self.construct(&expr, mode, cert)
    }
}

/// A term expression tree, independent of any store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermExpr {
    Gen {
        name: String,
        level: Option<DirectionSet>,
    },
    Refl(Direction, Box<TermExpr>),
    Dual(Direction, Box<TermExpr>),
    Comp(Direction, Box<TermExpr>, Box<TermExpr>),
    Kappa(Direction, Box<TermExpr>, Box<TermExpr>),
}

impl TermExpr {
    pub fn gen(name: &str) -> Self {
        TermExpr::Gen {
            name: name.to_string(),
            level: None,
        }
    }
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermExpr::Gen { name, level: None } => write!(f, "gen({name})"),
            TermExpr::Gen {
                name,
                level: Some(l),
            } => write!(f, "gen({}:{name})", level_key(*l)),
            TermExpr::Refl(d, x) => write!(f, "id[{d}]({x})"),
            TermExpr::Dual(d, x) => write!(f, "dual[{d}]({x})"),
            TermExpr::Comp(d, x, y) => write!(f, "comp[{d}]({x},{y})"),
            TermExpr::Kappa(d, x, y) => write!(f, "kappa[{d}]({x},{y})"),
        }
    }
}

impl std::str::FromStr for TermExpr {
    type Err = TermError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let e = p.term()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> TermError {
        TermError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn eat(&mut self, tok: &str) -> Result<(), TermError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{tok}`")))
        }
    }

    fn keyword(&mut self) -> Result<&str, TermError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        self.pos += len;
        Ok(&self.src[start..start + len])
    }

    fn direction(&mut self) -> Result<Direction, TermError> {
        self.eat("[")?;
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        let label: u32 = rest[..len].parse().map_err(|_| self.err("expected a direction label"))?;
        self.pos += len;
        self.eat("]")?;
        Direction::new(label).map_err(|_| self.err("direction label out of range"))
    }

    fn gen_body(&mut self) -> Result<TermExpr, TermError> {
        self.eat("(")?;
        let start = self.pos;
        let mut depth = 1usize;
        for (i, c) in self.src[start..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        let raw = self.src[start..start + i].trim();
                        self.pos = start + i + 1;
                        if raw.is_empty() {
                            return Err(self.err("empty generator name"));
                        }
                        return Ok(split_qualified(raw));
                    }
                }
                _ => {}
            }
        }
        Err(self.err("unterminated generator name"))
    }

    fn term(&mut self) -> Result<TermExpr, TermError> {
        let kw = self.keyword()?.to_string();
        match kw.as_str() {
            "gen" => self.gen_body(),
            "id" | "dual" => {
                let d = self.direction()?;
                self.eat("(")?;
                let x = Box::new(self.term()?);
                self.eat(")")?;
                Ok(if kw == "id" { TermExpr::Refl(d, x) } else { TermExpr::Dual(d, x) })
            }
            "comp" | "kappa" => {
                let d = self.direction()?;
                self.eat("(")?;
                let x = Box::new(self.term()?);
                self.eat(",")?;
                let y = Box::new(self.term()?);
                self.eat(")")?;
                Ok(if kw == "comp" { TermExpr::Comp(d, x, y) } else { TermExpr::Kappa(d, x, y) })
            }
            "" => Err(self.err("expected a term")),
            other => Err(self.err(&format!("unknown constructor `{other}`"))),
        }
    }
}

fn split_qualified(raw: &str) -> TermExpr {
    if let Some((lvl, name)) = raw.split_once(':') {
        if let Ok(dirs) = parse_level_key(lvl) {
            return TermExpr::Gen {
                name: name.to_string(),
                level: Some(dirs),
            };
        }
    }
    TermExpr::gen(raw)
}

/// Construction grading: number of concatenations, and number of dualities
/// stacked on top of the last concatenation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grade {
    pub concat: u32,
    pub dual: u32,
}

/// Finite, subterm-closed slice of the free magma.
#[derive(Clone, Debug, Default)]
pub struct TermUniverse {
    pub config: TruncationConfig,
    pub max_dim: usize,
    order: Vec<TermId>,
    levels: BTreeMap<DirectionSet, Vec<TermId>>,
    member: HashSet<TermId>,
    grades: HashMap<TermId, Grade>,
    /// Set when the universe cap stopped the enumeration early.
    pub truncated: bool,
}

impl TermUniverse {
    /// All terms, ordered by weight and then by printed form.
    pub fn terms(&self) -> &[TermId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, t: TermId) -> bool {
        self.member.contains(&t)
    }

    pub fn level(&self, dirs: DirectionSet) -> &[TermId] {
        self.levels.get(&dirs).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = (DirectionSet, &[TermId])> + '_ {
        self.levels.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn grade(&self, t: TermId) -> Option<Grade> {
        self.grades.get(&t).copied()
    }

    /// Term counts per level, keyed by `dim/dirs`.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.levels
            .iter()
            .map(|(k, v)| (level_key(*k), v.len()))
            .collect()
    }
}

/// Enumerates every well-typed magma term of size at most `term_depth + 1`
/// and dimension at most `max_dim` with directions in `1..=dir_universe`.
pub fn enumerate_free_magma(
    store: &mut TermStore,
    cfg: &TruncationConfig,
) -> Result<TermUniverse, TermError> {
    enumerate_universe(store, cfg, cfg.max_dim, &[])
}

/// Same enumeration, with extra atoms (contraction cells) admitted at their
/// own size and closed under the operations.
pub fn enumerate_universe(
    store: &mut TermStore,
    cfg: &TruncationConfig,
    max_dim: usize,
    atoms: &[TermId],
) -> Result<TermUniverse, TermError> {
    let max_size = cfg.max_size() as usize;
    let universe = cfg.universe();
    let pres = store.presentation().clone();
    let mut by_size: Vec<Vec<TermId>> = vec![Vec::new(); max_size + 1];
    let mut seen: HashSet<TermId> = HashSet::new();
    let mut truncated = false;

    let admit = |t: TermId, by_size: &mut Vec<Vec<TermId>>, seen: &mut HashSet<TermId>, store: &TermStore| -> bool {
        if seen.len() >= cfg.universe_cap {
            return false;
        }
        if seen.insert(t) {
            by_size[store.weight(t) as usize].push(t);
        }
        true
    };

    for c in pres.cell_ids() {
        let dirs = pres.dirs(c);
        if dirs.len() <= max_dim && dirs.is_subset(universe) && max_size >= 1 {
            let t = store.gen(c);
            truncated |= !admit(t, &mut by_size, &mut seen, store);
        }
    }
    for &a in atoms {
        let s = store.weight(a) as usize;
        if s <= max_size && store.dim(a) <= max_dim && store.dirs(a).is_subset(universe) {
            truncated |= !admit(a, &mut by_size, &mut seen, store);
        }
    }

    // (level dirs, direction, target face) -> terms of a given size with that target face
    let mut target_index: Vec<HashMap<(DirectionSet, Direction, TermId), Vec<TermId>>> =
        vec![HashMap::new(); max_size + 1];

    'sizes: for s in 1..=max_size {
        if s >= 2 {
            let prev = by_size[s - 1].clone();
            for x in prev {
                for d in universe.iter() {
                    let t = if store.dirs(x).contains(d) {
                        store.dual(d, x)?
                    } else if store.dim(x) < max_dim {
                        store.refl(d, x)?
                    } else {
                        continue;
                    };
                    if !admit(t, &mut by_size, &mut seen, store) {
                        truncated = true;
                        break 'sizes;
                    }
                }
            }
            for i in 1..s - 1 {
                let j = s - 1 - i;
                let lefts = by_size[i].clone();
                for x in lefts {
                    let dirs = store.dirs(x);
                    for d in dirs.iter() {
                        let sx = store.boundary(x, d, Side::Source)?;
                        let Some(rights) = target_index[j].get(&(dirs, d, sx)).cloned() else {
                            continue;
                        };
                        for y in rights {
                            let t = store.comp(d, x, y)?;
                            if !admit(t, &mut by_size, &mut seen, store) {
                                truncated = true;
                                break 'sizes;
                            }
                        }
                    }
                }
            }
        }
        // index the now complete size-s layer by target faces
        let layer = by_size[s].clone();
        for y in layer {
            let dirs = store.dirs(y);
            for d in dirs.iter() {
                let ty = store.boundary(y, d, Side::Target)?;
                target_index[s].entry((dirs, d, ty)).or_default().push(y);
            }
        }
    }

    let mut keyed: Vec<(u32, String, TermId)> = seen
        .iter()
        .map(|&t| (store.weight(t), store.display(t), t))
        .collect();
    keyed.sort();
    let order: Vec<TermId> = keyed.into_iter().map(|(_, _, t)| t).collect();
    let mut levels: BTreeMap<DirectionSet, Vec<TermId>> = BTreeMap::new();
    let mut grades = HashMap::new();
    for &t in &order {
        levels.entry(store.dirs(t)).or_default().push(t);
        grades.insert(t, grade_of(store, t, &grades));
    }
    Ok(TermUniverse {
        config: *cfg,
        max_dim,
        member: order.iter().copied().collect(),
        order,
        levels,
        grades,
        truncated,
    })
}

fn grade_of(store: &TermStore, t: TermId, known: &HashMap<TermId, Grade>) -> Grade {
    let g = |x: TermId| known.get(&x).copied().unwrap_or_default();
    match store.node(t) {
        Node::Gen(_) | Node::Refl(..) | Node::Kappa(..) => Grade::default(),
        Node::Dual(_, x) => Grade {
            concat: g(x).concat,
            dual: g(x).dual + 1,
        },
        Node::Comp(_, x, y) => Grade {
            concat: g(x).concat + g(y).concat + 1,
            dual: 0,
        },
    }
}

/// Checks the four cubical identities as term identities on every enumerated
/// term of dimension at least two.
pub fn check_cubical_on_terms(store: &mut TermStore, universe: &TermUniverse) -> Report {
    let mut r = Report::new();
    for &t in universe.terms() {
        if store.dim(t) < 2 {
            continue;
        }
        let ds: Vec<Direction> = store.dirs(t).iter().collect();
        for (i, &d) in ds.iter().enumerate() {
            for &e in &ds[i + 1..] {
                for (tag, outer, inner) in CUBICAL_IDENTITIES {
                    let lhs = store
                        .boundary(t, d, inner)
                        .and_then(|x| store.boundary(x, e, outer));
                    let rhs = store
                        .boundary(t, e, outer)
                        .and_then(|x| store.boundary(x, d, inner));
                    match (lhs, rhs) {
                        (Ok(a), Ok(b)) => {
                            r.tick();
                            if a != b {
                                r.push(
                                    "cubical",
                                    store.display(t),
                                    format!(
                                        "identity {tag} fails for d={d}, e={e}: {} vs {}",
                                        store.display(a),
                                        store.display(b)
                                    ),
                                );
                            }
                        }
                        (Err(err), _) | (_, Err(err)) => {
                            r.tick();
                            r.push("boundary-error", store.display(t), err.to_string());
                        }
                    }
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(l: u32) -> Direction {
        Direction::new(l).unwrap()
    }

    /// Objects a, b; f: a -> b, g: b -> a and a loop h: a -> a in direction 1.
    fn quiver() -> Arc<Presentation> {
        let mut p = Presentation::new(TruncationConfig::new(2, 2, 3));
        let e = DirectionSet::EMPTY;
        let one = DirectionSet::from_labels(&[1]).unwrap();
        let a = p.add_cell(e, "a").unwrap();
        let b = p.add_cell(e, "b").unwrap();
        let f = p.add_cell(one, "f").unwrap();
        let g = p.add_cell(one, "g").unwrap();
        let h = p.add_cell(one, "h").unwrap();
        p.set_faces(f, d(1), a, b);
        p.set_faces(g, d(1), b, a);
        p.set_faces(h, d(1), a, a);
        Arc::new(p)
    }

    fn build(store: &mut TermStore, s: &str) -> Result<TermId, TermError> {
        store.parse(s, Mode::Magma, &NoCertificate)
    }

    #[test]
    fn reflector_of_object_is_one_dimensional() {
        let mut st = TermStore::new(quiver());
        let t = build(&mut st, "id[1](gen(a))").unwrap();
        assert_eq!(st.dim(t), 1);
        assert_eq!(st.dirs(t), DirectionSet::from_labels(&[1]).unwrap());
        let a = build(&mut st, "gen(a)").unwrap();
        assert_eq!(st.boundary(t, d(1), Side::Source).unwrap(), a);
        assert_eq!(st.boundary(t, d(1), Side::Target).unwrap(), a);
    }

    #[test]
    fn composability_follows_source_equals_target() {
        let mut st = TermStore::new(quiver());
        // s(g) = b = t(f)
        assert!(build(&mut st, "comp[1](gen(g),gen(f))").is_ok());
        // s(f) = a but t(f) = b
        match build(&mut st, "comp[1](gen(f),gen(f))") {
            Err(TermError::NotComposable {
                left_boundary,
                right_boundary,
                ..
            }) => {
                assert_eq!(left_boundary, "gen(a)");
                assert_eq!(right_boundary, "gen(b)");
            }
            other => panic!("expected composability error, got {other:?}"),
        }
    }

    #[test]
    fn direction_errors_name_the_node() {
        let mut st = TermStore::new(quiver());
        let err = build(&mut st, "id[1](gen(f))").unwrap_err();
        assert!(matches!(&err, TermError::Direction { node, .. } if node == "id[1](gen(f))"), "{err}");
        let err = build(&mut st, "dual[2](gen(f))").unwrap_err();
        assert!(matches!(err, TermError::Direction { .. }));
        assert!(matches!(build(&mut st, "gen(zz)"), Err(TermError::UnknownCell(_))));
    }

    #[test]
    fn kappa_needs_contraction_mode_and_certificate() {
        let mut st = TermStore::new(quiver());
        assert_eq!(
            build(&mut st, "kappa[2](gen(f),gen(f))"),
            Err(TermError::KappaInMagma)
        );
        let err = st
            .parse("kappa[2](gen(f),gen(h))", Mode::Contraction, &NoCertificate)
            .unwrap_err();
        assert!(matches!(err, TermError::KappaUncertified { .. }));
        // equal operands route to the reflector
        let k = st
            .parse("kappa[2](gen(f),gen(f))", Mode::Contraction, &NoCertificate)
            .unwrap();
        assert_eq!(st.display(k), "id[2](gen(f))");
    }

    #[test]
    fn boundary_rules() {
        let mut st = TermStore::new(quiver());
        let f = build(&mut st, "gen(f)").unwrap();
        let df = build(&mut st, "dual[1](gen(f))").unwrap();
        assert_eq!(
            st.boundary(df, d(1), Side::Source).unwrap(),
            st.boundary(f, d(1), Side::Target).unwrap()
        );
        let gf = build(&mut st, "comp[1](gen(g),gen(f))").unwrap();
        assert_eq!(
            st.boundary(gf, d(1), Side::Source).unwrap(),
            st.boundary(f, d(1), Side::Source).unwrap()
        );
        // transverse faces of a reflector: s_1(id[2](f)) = id[2](s_1 f)
        let rf = build(&mut st, "id[2](gen(f))").unwrap();
        let s1 = st.boundary(rf, d(1), Side::Source).unwrap();
        assert_eq!(st.display(s1), "id[2](gen(a))");
        // transverse faces of a duality keep the duality
        let drf = build(&mut st, "dual[2](id[2](gen(f)))").unwrap();
        let t1 = st.boundary(drf, d(1), Side::Target).unwrap();
        assert_eq!(st.display(t1), "dual[2](id[2](gen(b)))");
        assert!(st.boundary(f, d(2), Side::Source).is_err());
    }

    #[test]
    fn hash_consing_is_idempotent() {
        let mut st = TermStore::new(quiver());
        let x = build(&mut st, "dual[1](comp[1](gen(g),gen(f)))").unwrap();
        let n = st.len();
        let y = build(&mut st, "dual[1](comp[1](gen(g), gen(f)))").unwrap();
        assert_eq!(x, y);
        assert_eq!(st.len(), n);
    }

    #[test]
    fn syntax_roundtrip() {
        let mut st = TermStore::new(quiver());
        for s in [
            "gen(a)",
            "id[2](comp[1](gen(g),gen(f)))",
            "dual[1](dual[1](gen(h)))",
            "comp[2](id[2](gen(f)),dual[2](id[2](gen(f))))",
        ] {
            let t = build(&mut st, s).unwrap();
            assert_eq!(st.display(t), s);
            assert_eq!(st.to_expr(t).to_string(), s);
            assert_eq!(s.parse::<TermExpr>().unwrap().to_string(), s);
        }
        assert!("comp[1](gen(a)".parse::<TermExpr>().is_err());
        assert!("foo[1](gen(a))".parse::<TermExpr>().is_err());
        // names with balanced parentheses survive
        let e: TermExpr = "gen((a,f))".parse().unwrap();
        assert_eq!(e, TermExpr::gen("(a,f)"));
        let q: TermExpr = "gen(1/1:f)".parse().unwrap();
        assert_eq!(q.to_string(), "gen(1/1:f)");
    }

    #[test]
    fn depth_zero_is_generators_only() {
        let p = quiver();
        let mut st = TermStore::new(p.clone());
        let cfg = TruncationConfig::new(2, 2, 0);
        let u = enumerate_free_magma(&mut st, &cfg).unwrap();
        assert_eq!(u.len(), p.len());
    }

    #[test]
    fn single_object_depth_one() {
        let mut p = Presentation::new(TruncationConfig::new(1, 1, 1));
        p.add_cell(DirectionSet::EMPTY, "a").unwrap();
        let mut st = TermStore::new(Arc::new(p));
        let u = enumerate_free_magma(&mut st, &TruncationConfig::new(1, 1, 1)).unwrap();
        let shown: Vec<String> = u.terms().iter().map(|&t| st.display(t)).collect();
        assert_eq!(shown, vec!["gen(a)", "id[1](gen(a))"]);
        let u2 = enumerate_free_magma(&mut st, &TruncationConfig::new(1, 1, 2)).unwrap();
        assert!(u2
            .terms()
            .iter()
            .any(|&t| st.display(t) == "dual[1](id[1](gen(a)))"));
    }

    #[test]
    fn loop_composite_appears_at_depth_two() {
        let mut st = TermStore::new(quiver());
        let u1 = enumerate_free_magma(&mut st, &TruncationConfig::new(1, 1, 1)).unwrap();
        let hh = build(&mut st, "comp[1](gen(h),gen(h))").unwrap();
        assert!(!u1.contains(hh));
        let u2 = enumerate_free_magma(&mut st, &TruncationConfig::new(1, 1, 2)).unwrap();
        assert!(u2.contains(hh));
        assert_eq!(u2.grade(hh), Some(Grade { concat: 1, dual: 0 }));
    }

    #[test]
    fn enumeration_is_subterm_closed_and_ordered() {
        let mut st = TermStore::new(quiver());
        let u = enumerate_free_magma(&mut st, &TruncationConfig::new(2, 2, 3)).unwrap();
        for &t in u.terms() {
            for c in st.node(t).children() {
                assert!(u.contains(c));
            }
        }
        let keys: Vec<(u32, String)> = u.terms().iter().map(|&t| (st.size(t), st.display(t))).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn cubical_identities_hold_on_reflector_towers() {
        let mut st = TermStore::new(quiver());
        let t = build(&mut st, "id[2](id[1](gen(a)))").unwrap();
        for (outer, inner) in [(Side::Source, Side::Target), (Side::Target, Side::Source)] {
            let x = st.boundary(t, d(1), inner).unwrap();
            let lhs = st.boundary(x, d(2), outer).unwrap();
            let y = st.boundary(t, d(2), outer).unwrap();
            let rhs = st.boundary(y, d(1), inner).unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(st.display(lhs), "gen(a)");
        }
        let u = enumerate_free_magma(&mut st, &TruncationConfig::new(2, 2, 3)).unwrap();
        let r = check_cubical_on_terms(&mut st, &u);
        assert!(r.is_ok(), "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn universe_cap_flags_truncation() {
        let mut st = TermStore::new(quiver());
        let mut cfg = TruncationConfig::new(2, 2, 4);
        cfg.universe_cap = 20;
        let u = enumerate_free_magma(&mut st, &cfg).unwrap();
        assert!(u.truncated);
        assert!(u.len() <= 20);
    }
}
