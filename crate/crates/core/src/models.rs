//! Concrete models and independent oracles.
//!
//! Finite involutive 1-categories, their cubical product, small named
//! examples (groups and groupoids with inverse as involution, a partial
//! isometry, relations with converse, truncated word categories), and the
//! normal form for terms of dimension at most one.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::congruence::{CongruenceSession, RelationFamily, RelationMode, SaturationStats};
use crate::presentation::{
    CellId, Direction, DirectionSet, Presentation, PresentationError, SetMorphism, Side,
    TruncationConfig,
};
use crate::report::Report;
use crate::strict::{Evaluator, GeneratorAssignment, Separator, StrictCategoryTable, StrictError};
use crate::term::{enumerate_free_magma, Node, TermError, TermId, TermStore, TermUniverse};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("product needs {needed} factors, got {got}")]
    FamilyTooShort { needed: usize, got: usize },
    #[error("category `{name}` is invalid: {summary}")]
    Invalid { name: String, summary: String },
    #[error("arrow `{0}` has no inverse")]
    NotInvertible(String),
    #[error("term `{term}` is outside the dimension-one fragment: {reason}")]
    NotDimOne { term: String, reason: String },
    #[error("malformed category document: {0}")]
    Doc(String),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Strict(#[from] StrictError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn summarize(r: &Report) -> String {
    match r.violations.first() {
        Some(v) => format!(
            "{} violation(s), first: {} at {}: {}",
            r.violations.len(),
            v.check,
            v.subject,
            v.detail
        ),
        None => "no violations".into(),
    }
}

/// A finite category with arrows indexed `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteCategory {
    pub name: String,
    objects: Vec<String>,
    arrows: Vec<String>,
    source: Vec<usize>,
    target: Vec<usize>,
    identity: Vec<usize>,
    comp: HashMap<(usize, usize), usize>,
}

/// JSON form shared by plain and involutive 1-categories.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CategoryDoc {
    #[serde(default)]
    pub name: String,
    pub objects: Vec<String>,
    /// `arrow -> [source, target]`.
    pub arrows: BTreeMap<String, [String; 2]>,
    pub identity: BTreeMap<String, String>,
    /// Rows `[x, y, x∘y]`, where `x∘y` means `y` first.
    pub comp: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star: Option<BTreeMap<String, String>>,
}

impl FiniteCategory {
    pub fn builder(name: &str) -> CategoryBuilder {
        CategoryBuilder {
            cat: FiniteCategory {
                name: name.to_string(),
                objects: Vec::new(),
                arrows: Vec::new(),
                source: Vec::new(),
                target: Vec::new(),
                identity: Vec::new(),
                comp: HashMap::new(),
            },
            by_name: HashMap::new(),
        }
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn num_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn arrow_name(&self, a: usize) -> &str {
        &self.arrows[a]
    }

    pub fn source(&self, a: usize) -> usize {
        self.source[a]
    }

    pub fn target(&self, a: usize) -> usize {
        self.target[a]
    }

    pub fn identity(&self, o: usize) -> usize {
        self.identity[o]
    }

    /// `x ∘ y`, defined when `s x = t y`.
    pub fn comp(&self, x: usize, y: usize) -> Option<usize> {
        self.comp.get(&(x, y)).copied()
    }

    pub fn arrow(&self, name: &str) -> Option<usize> {
        self.arrows.iter().position(|a| a == name)
    }

    /// Typing, totality on composable pairs, identities, unit laws and
    /// associativity.
    pub fn validate(&self) -> Report {
        let mut r = Report::new();
        let n = self.arrows.len();
        let name = |a: usize| self.arrows[a].clone();
        for (o, &i) in self.identity.iter().enumerate() {
            r.expect(
                self.source[i] == o && self.target[i] == o,
                "identity-typing",
                || self.objects[o].clone(),
                || format!("identity `{}` is not an endo-arrow of it", name(i)),
            );
        }
        let mut keys: Vec<_> = self.comp.iter().map(|(&k, &v)| (k, v)).collect();
        keys.sort();
        for ((x, y), z) in keys {
            r.expect(
                self.source[x] == self.target[y]
                    && self.source[z] == self.source[y]
                    && self.target[z] == self.target[x],
                "comp-typing",
                || format!("{} ∘ {}", name(x), name(y)),
                || format!("entry `{}` is ill-typed", name(z)),
            );
        }
        for x in 0..n {
            for y in 0..n {
                if self.source[x] != self.target[y] {
                    continue;
                }
                let xy = self.comp(x, y);
                r.expect(xy.is_some(), "comp-total", || format!("{} ∘ {}", name(x), name(y)), || "missing".into());
                for z in 0..n {
                    if self.source[y] != self.target[z] {
                        continue;
                    }
                    let lhs = self.comp(y, z).and_then(|yz| self.comp(x, yz));
                    let rhs = xy.and_then(|xy| self.comp(xy, z));
                    r.expect(lhs.is_some() && lhs == rhs, "assoc", || {
                        format!("({}, {}, {})", name(x), name(y), name(z))
                    }, || "associativity fails".into());
                }
            }
            let right = self.comp(x, self.identity[self.source[x]]);
            let left = self.comp(self.identity[self.target[x]], x);
            r.expect(right == Some(x) && left == Some(x), "unit", || name(x), || "unit law fails".into());
        }
        r
    }

    pub fn from_doc(doc: &CategoryDoc) -> Result<Self, ModelError> {
        let mut b = FiniteCategory::builder(&doc.name);
        for o in &doc.objects {
            b.object(o);
        }
        for (a, [s, t]) in &doc.arrows {
            b.arrow(a, s, t)?;
        }
        for (o, i) in &doc.identity {
            b.identity(o, i)?;
        }
        for [x, y, z] in &doc.comp {
            b.comp(x, y, z)?;
        }
        b.finish()
    }

    pub fn to_doc(&self) -> CategoryDoc {
        let mut comp: Vec<[String; 3]> = self
            .comp
            .iter()
            .map(|(&(x, y), &z)| [self.arrows[x].clone(), self.arrows[y].clone(), self.arrows[z].clone()])
            .collect();
        comp.sort();
        CategoryDoc {
            name: self.name.clone(),
            objects: self.objects.clone(),
            arrows: (0..self.arrows.len())
                .map(|a| {
                    (
                        self.arrows[a].clone(),
                        [self.objects[self.source[a]].clone(), self.objects[self.target[a]].clone()],
                    )
                })
                .collect(),
            identity: (0..self.objects.len())
                .map(|o| (self.objects[o].clone(), self.arrows[self.identity[o]].clone()))
                .collect(),
            comp,
            star: None,
        }
    }
}

pub struct CategoryBuilder {
    cat: FiniteCategory,
    by_name: HashMap<String, usize>,
}

impl CategoryBuilder {
    pub fn object(&mut self, name: &str) -> usize {
        self.cat.objects.push(name.to_string());
        self.cat.identity.push(usize::MAX);
        self.cat.objects.len() - 1
    }

    fn obj(&self, name: &str) -> Result<usize, ModelError> {
        self.cat
            .objects
            .iter()
            .position(|o| o == name)
            .ok_or_else(|| ModelError::Doc(format!("unknown object `{name}`")))
    }

    fn arr(&self, name: &str) -> Result<usize, ModelError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::Doc(format!("unknown arrow `{name}`")))
    }

    pub fn arrow(&mut self, name: &str, source: &str, target: &str) -> Result<usize, ModelError> {
        if self.by_name.contains_key(name) {
            return Err(ModelError::Doc(format!("duplicate arrow `{name}`")));
        }
        let (s, t) = (self.obj(source)?, self.obj(target)?);
        let c = &mut self.cat;
        c.arrows.push(name.to_string());
        c.source.push(s);
        c.target.push(t);
        self.by_name.insert(name.to_string(), c.arrows.len() - 1);
        Ok(c.arrows.len() - 1)
    }

    pub fn identity(&mut self, object: &str, arrow: &str) -> Result<(), ModelError> {
        let (o, a) = (self.obj(object)?, self.arr(arrow)?);
        self.cat.identity[o] = a;
        Ok(())
    }

    pub fn comp(&mut self, x: &str, y: &str, z: &str) -> Result<(), ModelError> {
        let (x, y, z) = (self.arr(x)?, self.arr(y)?, self.arr(z)?);
        self.cat.comp.insert((x, y), z);
        Ok(())
    }

    pub fn finish(self) -> Result<FiniteCategory, ModelError> {
        if let Some(o) = self.cat.identity.iter().position(|&i| i == usize::MAX) {
            return Err(ModelError::Doc(format!("object `{}` has no identity", self.cat.objects[o])));
        }
        Ok(self.cat)
    }
}

/// A finite category with an identity-on-objects contravariant involution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvolutiveOneCategory {
    cat: FiniteCategory,
    star: Vec<usize>,
}

impl InvolutiveOneCategory {
    pub fn new(cat: FiniteCategory, star: Vec<usize>) -> Self {
        InvolutiveOneCategory { cat, star }
    }

    pub fn category(&self) -> &FiniteCategory {
        &self.cat
    }

    pub fn name(&self) -> &str {
        &self.cat.name
    }

    pub fn star(&self, a: usize) -> usize {
        self.star[a]
    }

    /// Whether the involution moves some arrow.
    pub fn has_nontrivial_star(&self) -> bool {
        self.star.iter().enumerate().any(|(a, &s)| a != s)
    }

    /// Category axioms plus `(x*)* = x`, `(x∘y)* = y*∘x*`, `ι* = ι` and the
    /// swap of source and target.
    pub fn validate(&self) -> Report {
        let c = &self.cat;
        let mut r = c.validate();
        let name = |a: usize| c.arrows[a].clone();
        for a in 0..c.num_arrows() {
            let s = self.star[a];
            r.expect(
                c.source(s) == c.target(a) && c.target(s) == c.source(a),
                "star-typing",
                || name(a),
                || format!("star `{}` does not reverse the arrow", name(s)),
            );
            r.expect(self.star[s] == a, "involutive", || name(a), || format!("double star is `{}`", name(self.star[s])));
            for b in 0..c.num_arrows() {
                if c.source(a) != c.target(b) {
                    continue;
                }
                let lhs = c.comp(a, b).map(|ab| self.star[ab]);
                let rhs = c.comp(self.star[b], self.star[a]);
                r.expect(lhs.is_some() && lhs == rhs, "star-antihomo", || {
                    format!("({}, {})", name(a), name(b))
                }, || "star is not contravariant".into());
            }
        }
        for o in 0..c.objects.len() {
            let i = c.identity(o);
            r.expect(self.star[i] == i, "id-hermitian", || c.objects[o].clone(), || "identity is not self-adjoint".into());
        }
        r
    }

    pub fn from_doc(doc: &CategoryDoc) -> Result<Self, ModelError> {
        let cat = FiniteCategory::from_doc(doc)?;
        let table = doc
            .star
            .as_ref()
            .ok_or_else(|| ModelError::Doc("missing `star` table".into()))?;
        let mut star = vec![usize::MAX; cat.num_arrows()];
        for (a, b) in table {
            let (a, b) = (
                cat.arrow(a).ok_or_else(|| ModelError::Doc(format!("unknown arrow `{a}`")))?,
                cat.arrow(b).ok_or_else(|| ModelError::Doc(format!("unknown arrow `{b}`")))?,
            );
            star[a] = b;
        }
        if let Some(a) = star.iter().position(|&s| s == usize::MAX) {
            return Err(ModelError::Doc(format!("arrow `{}` has no star", cat.arrows[a])));
        }
        Ok(InvolutiveOneCategory { cat, star })
    }

    pub fn to_doc(&self) -> CategoryDoc {
        let mut doc = self.cat.to_doc();
        doc.star = Some(
            (0..self.cat.num_arrows())
                .map(|a| (self.cat.arrows[a].clone(), self.cat.arrows[self.star[a]].clone()))
                .collect(),
        );
        doc
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_doc(&serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("category serializes")
    }
}

/// Star := inverse. Fails on the first arrow without a two-sided inverse.
pub fn groupoid_involution(g: &FiniteCategory) -> Result<InvolutiveOneCategory, ModelError> {
    let mut star = Vec::with_capacity(g.num_arrows());
    for f in 0..g.num_arrows() {
        let inv = (0..g.num_arrows()).find(|&h| {
            g.source(h) == g.target(f)
                && g.target(h) == g.source(f)
                && g.comp(f, h) == Some(g.identity(g.target(f)))
                && g.comp(h, f) == Some(g.identity(g.source(f)))
        });
        star.push(inv.ok_or_else(|| ModelError::NotInvertible(g.arrows[f].clone()))?);
    }
    Ok(InvolutiveOneCategory::new(g.clone(), star))
}

/// `ℤ/n` as a one-object groupoid.
pub fn cyclic_group(n: usize) -> InvolutiveOneCategory {
    let mut b = FiniteCategory::builder(&format!("Z{n}"));
    b.object("*");
    for i in 0..n {
        b.arrow(&format!("r{i}"), "*", "*").unwrap();
    }
    b.identity("*", "r0").unwrap();
    for i in 0..n {
        for j in 0..n {
            b.comp(&format!("r{i}"), &format!("r{j}"), &format!("r{}", (i + j) % n)).unwrap();
        }
    }
    groupoid_involution(&b.finish().unwrap()).expect("groups are groupoids")
}

/// The groupoid with exactly one arrow `x>y` between any two objects.
pub fn pair_groupoid(k: usize) -> InvolutiveOneCategory {
    let objs: Vec<String> = (1..=k).map(|i| format!("o{i}")).collect();
    let mut b = FiniteCategory::builder(&format!("Pair{k}"));
    for o in &objs {
        b.object(o);
    }
    let arrow = |x: &str, y: &str| format!("{x}>{y}");
    for x in &objs {
        for y in &objs {
            b.arrow(&arrow(x, y), x, y).unwrap();
        }
    }
    for x in &objs {
        b.identity(x, &arrow(x, x)).unwrap();
        for y in &objs {
            for z in &objs {
                // (y>z) ∘ (x>y) = x>z
                b.comp(&arrow(y, z), &arrow(x, y), &arrow(x, z)).unwrap();
            }
        }
    }
    groupoid_involution(&b.finish().unwrap()).expect("pair groupoids are groupoids")
}

/// Identities only.
pub fn discrete(objects: &[&str]) -> InvolutiveOneCategory {
    let mut b = FiniteCategory::builder("Discrete");
    for o in objects {
        b.object(o);
        let i = format!("1{o}");
        b.arrow(&i, o, o).unwrap();
        b.identity(o, &i).unwrap();
        b.comp(&i, &i, &i).unwrap();
    }
    let cat = b.finish().unwrap();
    let star = (0..cat.num_arrows()).collect();
    InvolutiveOneCategory::new(cat, star)
}

/// A partial isometry `u: x -> y` with `u u* u = u`: six arrows, with
/// `p = u*u` and `q = uu*` self-adjoint idempotents. Not a groupoid.
pub fn partial_isometry() -> InvolutiveOneCategory {
    let mut b = FiniteCategory::builder("PartialIsometry");
    b.object("x");
    b.object("y");
    for (a, s, t) in [("1x", "x", "x"), ("1y", "y", "y"), ("u", "x", "y"), ("u*", "y", "x"), ("p", "x", "x"), ("q", "y", "y")] {
        b.arrow(a, s, t).unwrap();
    }
    b.identity("x", "1x").unwrap();
    b.identity("y", "1y").unwrap();
    let rows = [
        ("1x", "1x", "1x"),
        ("1x", "p", "p"),
        ("p", "1x", "p"),
        ("p", "p", "p"),
        ("1y", "1y", "1y"),
        ("1y", "q", "q"),
        ("q", "1y", "q"),
        ("q", "q", "q"),
        ("u", "1x", "u"),
        ("u", "p", "u"),
        ("1y", "u", "u"),
        ("q", "u", "u"),
        ("u*", "1y", "u*"),
        ("u*", "q", "u*"),
        ("1x", "u*", "u*"),
        ("p", "u*", "u*"),
        ("u", "u*", "q"),
        ("u*", "u", "p"),
    ];
    for (x, y, z) in rows {
        b.comp(x, y, z).unwrap();
    }
    let cat = b.finish().unwrap();
    let star = ["1x", "1y", "u*", "u", "p", "q"]
        .iter()
        .map(|n| cat.arrow(n).unwrap())
        .collect();
    InvolutiveOneCategory::new(cat, star)
}

/// Relations between the sets `{1..k}` for `k = 1..=max`, with relational
/// composition and converse.
pub fn relations(max: usize) -> InvolutiveOneCategory {
    let sizes: Vec<usize> = (1..=max).collect();
    let obj = |k: usize| format!("S{k}");
    // a relation A -> B is a bitmask over A×B, bit (i * |B| + j)
    let name = |a: usize, b: usize, bits: u32| format!("R{a}{b}:{bits:0w$b}", w = a * b);
    let mut b = FiniteCategory::builder(&format!("Rel{max}"));
    for &k in &sizes {
        b.object(&obj(k));
    }
    for &x in &sizes {
        for &y in &sizes {
            for bits in 0..(1u32 << (x * y)) {
                b.arrow(&name(x, y, bits), &obj(x), &obj(y)).unwrap();
            }
        }
    }
    for &x in &sizes {
        let diag: u32 = (0..x).map(|i| 1 << (i * x + i)).sum();
        b.identity(&obj(x), &name(x, x, diag)).unwrap();
        for &y in &sizes {
            for &z in &sizes {
                for r in 0..(1u32 << (x * y)) {
                    for s in 0..(1u32 << (y * z)) {
                        // s ∘ r : x -> z
                        let mut t = 0u32;
                        for i in 0..x {
                            for k in 0..z {
                                if (0..y).any(|j| r >> (i * y + j) & 1 == 1 && s >> (j * z + k) & 1 == 1) {
                                    t |= 1 << (i * z + k);
                                }
                            }
                        }
                        b.comp(&name(y, z, s), &name(x, y, r), &name(x, z, t)).unwrap();
                    }
                }
            }
        }
    }
    let cat = b.finish().unwrap();
    let mut star = vec![0; cat.num_arrows()];
    for &x in &sizes {
        for &y in &sizes {
            for r in 0..(1u32 << (x * y)) {
                let mut c = 0u32;
                for i in 0..x {
                    for j in 0..y {
                        if r >> (i * y + j) & 1 == 1 {
                            c |= 1 << (j * x + i);
                        }
                    }
                }
                star[cat.arrow(&name(x, y, r)).unwrap()] = cat.arrow(&name(y, x, c)).unwrap();
            }
        }
    }
    InvolutiveOneCategory::new(cat, star)
}

/// A letter of a dimension-one word: a generator or its involution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    pub cell: CellId,
    pub star: bool,
}

/// Composable words of length at most `max_len` over the one-dimensional
/// generators of `p` in direction `d`, plus one absorbing overflow arrow per
/// pair of objects. Composition concatenates, involution reverses and
/// toggles every letter.
pub fn word_category(p: &Presentation, d: Direction, max_len: usize) -> InvolutiveOneCategory {
    let level0 = DirectionSet::EMPTY;
    let level1 = level0.with(d);
    let objects: Vec<CellId> = p.cells_at(level0).to_vec();
    let gens: Vec<CellId> = p.cells_at(level1).to_vec();
    let ends = |l: Letter| {
        let s = p.face(l.cell, d, Side::Source).unwrap();
        let t = p.face(l.cell, d, Side::Target).unwrap();
        if l.star {
            (t, s)
        } else {
            (s, t)
        }
    };
    let letter_name = |l: Letter| format!("{}{}", p.name(l.cell), if l.star { "*" } else { "" });
    let word_name = |w: &[Letter], o: CellId| {
        if w.is_empty() {
            format!("1{}", p.name(o))
        } else {
            w.iter().map(|&l| letter_name(l)).collect::<Vec<_>>().join(".")
        }
    };
    let over = |s: CellId, t: CellId| format!("over({},{})", p.name(s), p.name(t));

    let mut b = FiniteCategory::builder(&format!("Words{max_len}"));
    for &o in &objects {
        b.object(p.name(o));
    }
    // words as (letters, source, target); letters[0] is applied last
    let mut words: Vec<(Vec<Letter>, CellId, CellId)> = objects.iter().map(|&o| (Vec::new(), o, o)).collect();
    let letters: Vec<Letter> = gens
        .iter()
        .flat_map(|&g| [Letter { cell: g, star: false }, Letter { cell: g, star: true }])
        .collect();
    let mut frontier: Vec<(Vec<Letter>, CellId, CellId)> = letters
        .iter()
        .map(|&l| {
            let (s, t) = ends(l);
            (vec![l], s, t)
        })
        .collect();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (w, s, t) in &frontier {
            for &l in &letters {
                let (ls, lt) = ends(l);
                if lt == *s {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.push((w2, ls, *t));
                }
            }
        }
        words.append(&mut frontier);
        frontier = next;
    }
    let mut index: HashMap<(Vec<Letter>, CellId, CellId), String> = HashMap::new();
    for (w, s, t) in &words {
        let n = word_name(w, *s);
        b.arrow(&n, p.name(*s), p.name(*t)).unwrap();
        index.insert((w.clone(), *s, *t), n);
    }
    for &s in &objects {
        for &t in &objects {
            b.arrow(&over(s, t), p.name(s), p.name(t)).unwrap();
        }
    }
    for &o in &objects {
        b.identity(p.name(o), &word_name(&[], o)).unwrap();
    }
    // every arrow as Some(word) or None for overflow, with its ends
    let mut all: Vec<(Option<Vec<Letter>>, CellId, CellId, String)> = words
        .iter()
        .map(|(w, s, t)| (Some(w.clone()), *s, *t, index[&(w.clone(), *s, *t)].clone()))
        .collect();
    for &s in &objects {
        for &t in &objects {
            all.push((None, s, t, over(s, t)));
        }
    }
    for (wx, sx, tx, nx) in &all {
        for (wy, sy, ty, ny) in &all {
            if sx != ty {
                continue;
            }
            let z = match (wx, wy) {
                (Some(a), Some(c)) if a.len() + c.len() <= max_len => {
                    let mut w = a.clone();
                    w.extend(c);
                    index[&(w, *sy, *tx)].clone()
                }
                _ => over(*sy, *tx),
            };
            b.comp(nx, ny, &z).unwrap();
        }
    }
    let cat = b.finish().unwrap();
    let mut star = vec![0; cat.num_arrows()];
    for (w, s, t, n) in &all {
        let image = match w {
            Some(w) => {
                let r: Vec<Letter> = w.iter().rev().map(|l| Letter { cell: l.cell, star: !l.star }).collect();
                index[&(r, *t, *s)].clone()
            }
            None => over(*t, *s),
        };
        star[cat.arrow(n).unwrap()] = cat.arrow(&image).unwrap();
    }
    InvolutiveOneCategory::new(cat, star)
}

/// A cell of the product: one entry per factor, an arrow index in the
/// slots of its direction set and an object index elsewhere.
type Tuple = Vec<usize>;

/// The cubical product of `K = cfg.dir_universe` involutive 1-categories,
/// truncated at `cfg.max_dim`. All structure acts slot-wise: faces, identities
/// and involutions in direction `d` act on slot `d`, and composition in
/// direction `d` composes slot `d` of two tuples that agree elsewhere.
pub fn build_product(
    family: &[InvolutiveOneCategory],
    cfg: &TruncationConfig,
) -> Result<StrictCategoryTable, ModelError> {
    let k = cfg.dir_universe as usize;
    if family.len() < k {
        return Err(ModelError::FamilyTooShort {
            needed: k,
            got: family.len(),
        });
    }
    let family = &family[..k];
    for f in family {
        let r = f.validate();
        if !r.is_ok() {
            return Err(ModelError::Invalid {
                name: f.name().to_string(),
                summary: summarize(&r),
            });
        }
    }
    let mut pres = Presentation::new(*cfg);
    let mut ids: HashMap<(DirectionSet, Tuple), CellId> = HashMap::new();
    let mut cells: Vec<(DirectionSet, Tuple)> = Vec::new();
    let slot_name = |j: usize, arrow: bool, v: usize| -> &str {
        let c = family[j].category();
        if arrow {
            c.arrow_name(v)
        } else {
            &c.objects()[v]
        }
    };
    for n in 0..=cfg.max_dim {
        for dirs in DirectionSet::subsets(cfg.dir_universe, n) {
            let is_arrow: Vec<bool> = (0..k).map(|j| dirs.contains(Direction::new(j as u32 + 1).unwrap())).collect();
            let radix: Vec<usize> = (0..k)
                .map(|j| {
                    let c = family[j].category();
                    if is_arrow[j] {
                        c.num_arrows()
                    } else {
                        c.objects().len()
                    }
                })
                .collect();
            let mut tuple = vec![0usize; k];
            'outer: loop {
                let name = format!(
                    "({})",
                    (0..k).map(|j| slot_name(j, is_arrow[j], tuple[j])).collect::<Vec<_>>().join(",")
                );
                let id = pres.add_cell(dirs, name)?;
                ids.insert((dirs, tuple.clone()), id);
                cells.push((dirs, tuple.clone()));
                for j in (0..k).rev() {
                    tuple[j] += 1;
                    if tuple[j] < radix[j] {
                        continue 'outer;
                    }
                    tuple[j] = 0;
                }
                break;
            }
        }
    }
    let slot = |d: Direction| d.label() as usize - 1;
    for (dirs, x) in &cells {
        let id = ids[&(*dirs, x.clone())];
        for d in dirs.iter() {
            let j = slot(d);
            let c = family[j].category();
            let mut s = x.clone();
            s[j] = c.source(x[j]);
            let mut t = x.clone();
            t[j] = c.target(x[j]);
            let lower = dirs.without(d);
            pres.set_faces(id, d, ids[&(lower, s)], ids[&(lower, t)]);
        }
    }
    let pres = Arc::new(pres);
    let mut table = StrictCategoryTable::new(pres);
    for (dirs, x) in &cells {
        let id = ids[&(*dirs, x.clone())];
        for d in cfg.universe().iter() {
            let j = slot(d);
            let f = &family[j];
            let c = f.category();
            if dirs.contains(d) {
                let mut y = x.clone();
                y[j] = f.star(x[j]);
                table.set_dual(id, d, ids[&(*dirs, y)]);
                // compose with every y that agrees off slot d and is composable
                for a in 0..c.num_arrows() {
                    if c.target(a) != c.source(x[j]) {
                        continue;
                    }
                    let mut y = x.clone();
                    y[j] = a;
                    let mut z = x.clone();
                    z[j] = c.comp(x[j], a).expect("validated factor");
                    table.set_comp(d, id, ids[&(*dirs, y)], ids[&(*dirs, z)]);
                }
            } else if dirs.len() < cfg.max_dim {
                let mut y = x.clone();
                y[j] = c.identity(x[j]);
                table.set_refl(id, d, ids[&(dirs.with(d), y)]);
            }
        }
    }
    Ok(table)
}

/// The truncated word category in direction `d`, padded with one-object
/// discrete factors, together with the assignment sending each generator
/// to its one-letter word. Separates terms of dimension at most one whose
/// normal forms differ and have at most `max_len` letters.
pub fn word_separator(p: &Arc<Presentation>, d: Direction, max_len: usize) -> Result<Separator, ModelError> {
    let cfg = TruncationConfig {
        max_dim: p.config().max_dim.min(p.config().dir_universe as usize),
        ..*p.config()
    };
    let k = cfg.dir_universe as usize;
    let words = word_category(p, d, max_len);
    let family: Vec<InvolutiveOneCategory> = (1..=k)
        .map(|j| if j == d.label() as usize { words.clone() } else { discrete(&["*"]) })
        .collect();
    let table = Arc::new(build_product(&family, &cfg)?);
    let up = table.underlying().clone();
    let mut entries = Vec::new();
    for c in p.cell_ids() {
        let dirs = p.dirs(c);
        if !(dirs.is_empty() || dirs == DirectionSet::EMPTY.with(d)) {
            return Err(ModelError::Doc(format!(
                "cell `{}` is not of dimension at most one in direction {}",
                p.qualified(c),
                d.label()
            )));
        }
        let name = format!(
            "({})",
            (1..=k)
                .map(|j| if j == d.label() as usize { p.name(c) } else { "*" })
                .collect::<Vec<_>>()
                .join(",")
        );
        let img = up
            .find(dirs, &name)
            .ok_or_else(|| ModelError::Doc(format!("no cell `{name}` in the word target")))?;
        entries.push((c, img));
    }
    let map = SetMorphism::new(p.clone(), up, entries)?;
    Ok(Separator {
        name: format!("words-{max_len}-dir{}", d.label()),
        assignment: GeneratorAssignment::new(map, table)?,
    })
}

/// Normal form of a term of dimension at most one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Word1 {
    /// A 0-cell.
    Object(CellId),
    /// The identity word at an object.
    Identity(CellId),
    /// A nonempty composable word; the first letter is applied last.
    Letters(Vec<Letter>),
}

impl Word1 {
    pub fn render(&self, p: &Presentation) -> String {
        match self {
            Word1::Object(o) => p.name(*o).to_string(),
            Word1::Identity(o) => format!("1{}", p.name(*o)),
            Word1::Letters(ls) => format!(
                "[{}]",
                ls.iter()
                    .map(|l| format!("{}{}", p.name(l.cell), if l.star { "*" } else { "" }))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ast {
    Gen(CellId),
    Id(CellId),
    Dual(Box<Ast>),
    Comp(Box<Ast>, Box<Ast>),
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Gen(c) => write!(f, "g{}", c.0),
            Ast::Id(c) => write!(f, "1_{}", c.0),
            Ast::Dual(x) => write!(f, "({x})*"),
            Ast::Comp(x, y) => write!(f, "({x} o {y})"),
        }
    }
}

fn to_ast(store: &TermStore, t: TermId, dir: Option<Direction>) -> Result<Ast, ModelError> {
    let bad = |reason: &str| ModelError::NotDimOne {
        term: store.display(t),
        reason: reason.to_string(),
    };
    let same_dir = |d: Direction| dir.is_none_or(|e| e == d);
    Ok(match store.node(t) {
        Node::Gen(c) => Ast::Gen(c),
        Node::Kappa(..) => return Err(bad("contraction cells are not allowed")),
        Node::Refl(d, x) => match store.node(x) {
            Node::Gen(o) if same_dir(d) && store.dim(x) == 0 => Ast::Id(o),
            _ => return Err(bad("identity of a cell of positive dimension")),
        },
        Node::Dual(d, x) if same_dir(d) => Ast::Dual(Box::new(to_ast(store, x, Some(d))?)),
        Node::Comp(d, x, y) if same_dir(d) => Ast::Comp(
            Box::new(to_ast(store, x, Some(d))?),
            Box::new(to_ast(store, y, Some(d))?),
        ),
        _ => return Err(bad("more than one direction")),
    })
}

/// The rewrite rules in a fixed order; the result of the first one that
/// applies at the root.
fn rules_at(a: &Ast) -> Vec<Ast> {
    let mut out = Vec::new();
    match a {
        Ast::Dual(x) => match &**x {
            Ast::Dual(y) => out.push((**y).clone()),
            Ast::Comp(y, z) => out.push(Ast::Comp(Box::new(Ast::Dual(z.clone())), Box::new(Ast::Dual(y.clone())))),
            Ast::Id(o) => out.push(Ast::Id(*o)),
            Ast::Gen(_) => {}
        },
        Ast::Comp(x, y) => {
            if matches!(**y, Ast::Id(_)) {
                out.push((**x).clone());
            }
            if matches!(**x, Ast::Id(_)) {
                out.push((**y).clone());
            }
            if let Ast::Comp(p, q) = &**x {
                out.push(Ast::Comp(p.clone(), Box::new(Ast::Comp(q.clone(), y.clone()))));
            }
        }
        _ => {}
    }
    out
}

/// Number of redexes (position, rule) in preorder.
fn count_redexes(a: &Ast) -> usize {
    rules_at(a).len()
        + match a {
            Ast::Dual(x) => count_redexes(x),
            Ast::Comp(x, y) => count_redexes(x) + count_redexes(y),
            _ => 0,
        }
}

/// Rewrites the `k`-th redex in preorder.
fn rewrite_nth(a: &Ast, k: &mut usize) -> Option<Ast> {
    let here = rules_at(a);
    if *k < here.len() {
        return Some(here[*k].clone());
    }
    *k -= here.len();
    match a {
        Ast::Dual(x) => rewrite_nth(x, k).map(|x| Ast::Dual(Box::new(x))),
        Ast::Comp(x, y) => {
            if let Some(x2) = rewrite_nth(x, k) {
                return Some(Ast::Comp(Box::new(x2), y.clone()));
            }
            rewrite_nth(y, k).map(|y2| Ast::Comp(x.clone(), Box::new(y2)))
        }
        _ => None,
    }
}

fn normalize_with(mut a: Ast, mut choose: impl FnMut(usize) -> usize) -> Ast {
    loop {
        let n = count_redexes(&a);
        if n == 0 {
            return a;
        }
        let mut k = choose(n);
        a = rewrite_nth(&a, &mut k).expect("redex index in range");
    }
}

fn read_word(a: &Ast, out: &mut Vec<Letter>) {
    match a {
        Ast::Gen(c) => out.push(Letter { cell: *c, star: false }),
        Ast::Dual(x) => match **x {
            Ast::Gen(c) => out.push(Letter { cell: c, star: true }),
            _ => unreachable!("normal forms carry involutions on letters only"),
        },
        Ast::Comp(x, y) => {
            read_word(x, out);
            read_word(y, out);
        }
        Ast::Id(_) => unreachable!("normal forms of nonempty words contain no identities"),
    }
}

fn word_of(store: &TermStore, t: TermId, nf: Ast) -> Word1 {
    match nf {
        Ast::Id(o) => Word1::Identity(o),
        Ast::Gen(c) if store.dim(t) == 0 => Word1::Object(c),
        other => {
            let mut ls = Vec::new();
            read_word(&other, &mut ls);
            Word1::Letters(ls)
        }
    }
}

fn dim_one_ast(store: &TermStore, t: TermId) -> Result<Ast, ModelError> {
    if store.dim(t) > 1 {
        return Err(ModelError::NotDimOne {
            term: store.display(t),
            reason: "dimension above one".into(),
        });
    }
    to_ast(store, t, store.dirs(t).iter().next())
}

/// Leftmost-outermost rewriting to the unique reduced word.
pub fn normal_form_dim1(store: &TermStore, t: TermId) -> Result<Word1, ModelError> {
    let a = dim_one_ast(store, t)?;
    Ok(word_of(store, t, normalize_with(a, |_| 0)))
}

/// Same normal form, reached by rewriting redexes in random order.
pub fn normal_form_dim1_random<R: Rng>(store: &TermStore, t: TermId, rng: &mut R) -> Result<Word1, ModelError> {
    let a = dim_one_ast(store, t)?;
    Ok(word_of(store, t, normalize_with(a, |n| rng.gen_range(0..n))))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyKind {
    EqualWithDistinctForms,
    NotEqualWithEqualForms,
    UnknownWithEqualForms,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleExample {
    pub kind: DiscrepancyKind,
    pub left: String,
    pub right: String,
    pub left_form: String,
    pub right_form: String,
}

/// Pairwise comparison of congruence verdicts against normal forms.
/// Pairs are unordered pairs of distinct terms at the same level.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub terms: usize,
    pub pairs: u64,
    pub equal: u64,
    pub not_equal: u64,
    pub unknown: u64,
    pub equal_with_distinct_forms: u64,
    pub not_equal_with_equal_forms: u64,
    /// Incompleteness of the bounded saturation, not an error.
    pub unknown_with_equal_forms: u64,
    pub unknown_with_distinct_forms: u64,
    pub saturation: SaturationStats,
    pub examples: Vec<OracleExample>,
}

impl OracleReport {
    pub const MAX_EXAMPLES: usize = 20;

    /// No verdict contradicts the normal forms.
    pub fn is_consistent(&self) -> bool {
        self.equal_with_distinct_forms == 0 && self.not_equal_with_equal_forms == 0
    }

    pub fn unknown_rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.unknown as f64 / self.pairs as f64
        }
    }
}

/// Compares a saturated session with the normal forms over `universe`,
/// using `separators` for NotEqual verdicts.
pub fn oracle_compare_session(
    session: &CongruenceSession,
    universe: &TermUniverse,
    separators: &[Separator],
) -> Result<OracleReport, ModelError> {
    let store = session.store();
    let p = store.presentation().clone();
    struct Row {
        t: TermId,
        class: u32,
        form: Word1,
        sig: Vec<Option<CellId>>,
    }
    let mut evs: Vec<Evaluator> = separators.iter().map(|s| Evaluator::new(&s.assignment)).collect();
    let mut levels: BTreeMap<DirectionSet, Vec<Row>> = BTreeMap::new();
    for &t in universe.terms() {
        let class = session
            .class_of(t)
            .ok_or_else(|| ModelError::Doc(format!("term `{}` is not in the session", store.display(t))))?
            .0;
        let form = normal_form_dim1(store, t)?;
        let sig = evs.iter_mut().map(|e| e.eval(store, t).ok()).collect();
        levels.entry(store.dirs(t)).or_default().push(Row { t, class, form, sig });
    }
    let mut rep = OracleReport {
        terms: universe.len(),
        saturation: session.stats(),
        ..Default::default()
    };
    let mut examples = Vec::new();
    for rows in levels.values() {
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                rep.pairs += 1;
                let same_form = a.form == b.form;
                let separated = a.sig.iter().zip(&b.sig).any(|(x, y)| x.is_some() && y.is_some() && x != y);
                let kind = if a.class == b.class {
                    rep.equal += 1;
                    (!same_form).then(|| {
                        rep.equal_with_distinct_forms += 1;
                        DiscrepancyKind::EqualWithDistinctForms
                    })
                } else if separated {
                    rep.not_equal += 1;
                    same_form.then(|| {
                        rep.not_equal_with_equal_forms += 1;
                        DiscrepancyKind::NotEqualWithEqualForms
                    })
                } else {
                    rep.unknown += 1;
                    if same_form {
                        rep.unknown_with_equal_forms += 1;
                        Some(DiscrepancyKind::UnknownWithEqualForms)
                    } else {
                        rep.unknown_with_distinct_forms += 1;
                        None
                    }
                };
                if let Some(kind) = kind {
                    if examples.len() < OracleReport::MAX_EXAMPLES {
                        examples.push(OracleExample {
                            kind,
                            left: store.display(a.t),
                            right: store.display(b.t),
                            left_form: a.form.render(&p),
                            right_form: b.form.render(&p),
                        });
                    }
                }
            }
        }
    }
    rep.examples = examples;
    Ok(rep)
}

/// Enumerates the universe of a presentation of dimension at most one,
/// saturates the congruence and compares it with the normal forms.
/// Families in `disabled` are left out of the congruence.
pub fn oracle_compare(
    p: &Arc<Presentation>,
    cfg: &TruncationConfig,
    disabled: &[RelationFamily],
) -> Result<OracleReport, ModelError> {
    let cfg = TruncationConfig {
        max_dim: cfg.max_dim.min(1),
        ..*cfg
    };
    let d = p
        .levels()
        .find(|(dirs, cells)| dirs.len() == 1 && !cells.is_empty())
        .map(|(dirs, _)| dirs.iter().next().unwrap())
        .unwrap_or(Direction::new(1).unwrap());
    let mut store = TermStore::new(p.clone());
    let universe = enumerate_free_magma(&mut store, &cfg)?;
    let mut session = CongruenceSession::new(store, RelationMode::Strict, cfg.max_dim);
    for &f in disabled {
        session.disable_family(f);
    }
    session.add_universe(&universe)?;
    session.saturate(cfg.saturation_budget)?;
    let separators = if p.is_empty() {
        Vec::new()
    } else {
        vec![word_separator(p, d, (cfg.max_size() as usize).div_ceil(2))?]
    };
    oracle_compare_session(&session, &universe, &separators)
}

/// Two objects `a, b`, composable generators `f: a -> b` and `g: b -> a` in
/// direction 1 and `u: a -> b` in direction 2.
pub fn seed_presentation(cfg: TruncationConfig) -> Arc<Presentation> {
    let mut p = Presentation::new(cfg);
    let d1 = Direction::new(1).unwrap();
    let lvl1 = DirectionSet::EMPTY.with(d1);
    let a = p.add_cell(DirectionSet::EMPTY, "a").unwrap();
    let b = p.add_cell(DirectionSet::EMPTY, "b").unwrap();
    let f = p.add_cell(lvl1, "f").unwrap();
    let g = p.add_cell(lvl1, "g").unwrap();
    p.set_faces(f, d1, a, b);
    p.set_faces(g, d1, b, a);
    if cfg.dir_universe >= 2 {
        let d2 = Direction::new(2).unwrap();
        let u = p.add_cell(DirectionSet::EMPTY.with(d2), "u").unwrap();
        p.set_faces(u, d2, a, b);
    }
    Arc::new(p)
}

/// The dimension-one part of [`seed_presentation`]: `f: a -> b`, `g: b -> a`.
pub fn quiver_presentation(cfg: TruncationConfig) -> Arc<Presentation> {
    seed_presentation(TruncationConfig { dir_universe: 1, ..cfg })
}

/// Objects `p, q` with arrows both ways and a loop at each object in
/// directions 1 and 2. Every presentation of dimension at most one per
/// direction maps into it in many ways.
pub fn loop_presentation(cfg: TruncationConfig) -> Arc<Presentation> {
    let mut pr = Presentation::new(cfg);
    let p = pr.add_cell(DirectionSet::EMPTY, "p").unwrap();
    let q = pr.add_cell(DirectionSet::EMPTY, "q").unwrap();
    let names = [["h", "k", "l", "m"], ["v", "w", "n", "o"]];
    for (i, row) in names.iter().enumerate().take(cfg.dir_universe.min(2) as usize) {
        let d = Direction::new(i as u32 + 1).unwrap();
        let lvl = DirectionSet::EMPTY.with(d);
        for (name, (s, t)) in row.iter().zip([(p, q), (q, p), (p, p), (q, q)]) {
            let c = pr.add_cell(lvl, *name).unwrap();
            pr.set_faces(c, d, s, t);
        }
    }
    Arc::new(pr)
}
