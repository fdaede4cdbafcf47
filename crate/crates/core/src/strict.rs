//! Finite strict involutive cubical categories as lookup tables, exhaustive
//! axiom checks, and evaluation of free terms into them.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presentation::{
    level_key, parse_level_key, random_morphism, validate_morphism, CellId, Direction,
    DirectionSet, Presentation, PresentationDoc, PresentationError, SetMorphism, Side,
};
use crate::report::Report;
use crate::term::{Node, TermId, TermStore, TermUniverse};

#[derive(Debug, Error)]
pub enum StrictError {
    #[error("composition in direction {direction} of `{left}` and `{right}` is undefined: source of left is `{left_boundary}`, target of right is `{right_boundary}`")]
    NotComposable {
        direction: Direction,
        left: String,
        right: String,
        left_boundary: String,
        right_boundary: String,
    },
    #[error("no identity of `{cell}` in direction {direction}")]
    MissingRefl { cell: String, direction: Direction },
    #[error("no involution of `{cell}` in direction {direction}")]
    MissingDual { cell: String, direction: Direction },
    #[error("generator `{0}` has no image")]
    Unassigned(String),
    #[error("contraction cell `{0}` cannot be evaluated in a strict target")]
    Kappa(String),
    #[error("invalid assignment: {0}")]
    Assignment(String),
    #[error("malformed table: {0}")]
    Table(String),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A finite strict involutive cubical category: an underlying presentation
/// together with identity, involution and partial composition tables.
#[derive(Clone, Debug)]
pub struct StrictCategoryTable {
    underlying: Arc<Presentation>,
    refl: HashMap<(CellId, Direction), CellId>,
    dual: HashMap<(CellId, Direction), CellId>,
    comp: HashMap<(Direction, CellId, CellId), CellId>,
}

/// JSON form: a presentation plus the operation tables, keyed by the level
/// of the argument and the direction (`"dim/dirs/d"`).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StrictTableDoc {
    #[serde(flatten)]
    pub presentation: PresentationDoc,
    #[serde(default)]
    pub refl: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub dual: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub comp: BTreeMap<String, Vec<[String; 3]>>,
}

fn op_key(dirs: DirectionSet, d: Direction) -> String {
    format!("{}/{}", level_key(dirs), d)
}

fn parse_op_key(key: &str) -> Result<(DirectionSet, Direction), StrictError> {
    let (lvl, d) = key
        .rsplit_once('/')
        .ok_or_else(|| StrictError::Table(format!("bad key `{key}`")))?;
    let dirs = parse_level_key(lvl)?;
    let d: u32 = d
        .parse()
        .map_err(|_| StrictError::Table(format!("bad direction in `{key}`")))?;
    Ok((dirs, Direction::new(d)?))
}

impl StrictCategoryTable {
    pub fn new(underlying: Arc<Presentation>) -> Self {
        StrictCategoryTable {
            underlying,
            refl: HashMap::new(),
            dual: HashMap::new(),
            comp: HashMap::new(),
        }
    }

    pub fn underlying(&self) -> &Arc<Presentation> {
        &self.underlying
    }

    pub fn set_refl(&mut self, x: CellId, d: Direction, image: CellId) {
        self.refl.insert((x, d), image);
    }

    pub fn set_dual(&mut self, x: CellId, d: Direction, image: CellId) {
        self.dual.insert((x, d), image);
    }

    pub fn set_comp(&mut self, d: Direction, x: CellId, y: CellId, image: CellId) {
        self.comp.insert((d, x, y), image);
    }

    pub fn remove_comp(&mut self, d: Direction, x: CellId, y: CellId) -> Option<CellId> {
        self.comp.remove(&(d, x, y))
    }

    pub fn refl(&self, x: CellId, d: Direction) -> Option<CellId> {
        self.refl.get(&(x, d)).copied()
    }

    pub fn dual(&self, x: CellId, d: Direction) -> Option<CellId> {
        self.dual.get(&(x, d)).copied()
    }

    /// `x ∘_d y`, defined when `s_d x = t_d y`.
    pub fn comp(&self, d: Direction, x: CellId, y: CellId) -> Option<CellId> {
        self.comp.get(&(d, x, y)).copied()
    }

    pub fn face(&self, x: CellId, d: Direction, side: Side) -> Option<CellId> {
        self.underlying.face(x, d, side)
    }

    pub fn comp_len(&self) -> usize {
        self.comp.len()
    }

    pub fn name(&self, x: CellId) -> String {
        self.underlying.qualified(x)
    }

    pub fn from_json(text: &str) -> Result<Self, StrictError> {
        let doc: StrictTableDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &StrictTableDoc) -> Result<Self, StrictError> {
        let p = Arc::new(Presentation::from_doc(&doc.presentation)?);
        let mut t = StrictCategoryTable::new(p.clone());
        let find = |dirs: DirectionSet, name: &str| {
            p.find(dirs, name).ok_or_else(|| {
                StrictError::Presentation(PresentationError::UnknownCell {
                    name: name.to_string(),
                    level: level_key(dirs),
                })
            })
        };
        for (key, m) in &doc.refl {
            let (dirs, d) = parse_op_key(key)?;
            for (x, z) in m {
                t.set_refl(find(dirs, x)?, d, find(dirs.with(d), z)?);
            }
        }
        for (key, m) in &doc.dual {
            let (dirs, d) = parse_op_key(key)?;
            for (x, z) in m {
                t.set_dual(find(dirs, x)?, d, find(dirs, z)?);
            }
        }
        for (key, rows) in &doc.comp {
            let (dirs, d) = parse_op_key(key)?;
            for [x, y, z] in rows {
                t.set_comp(d, find(dirs, x)?, find(dirs, y)?, find(dirs, z)?);
            }
        }
        Ok(t)
    }

    pub fn to_doc(&self) -> StrictTableDoc {
        let p = &self.underlying;
        let mut doc = StrictTableDoc {
            presentation: p.to_doc(),
            ..Default::default()
        };
        for (&(x, d), &z) in &self.refl {
            doc.refl
                .entry(op_key(p.dirs(x), d))
                .or_default()
                .insert(p.name(x).to_string(), p.name(z).to_string());
        }
        for (&(x, d), &z) in &self.dual {
            doc.dual
                .entry(op_key(p.dirs(x), d))
                .or_default()
                .insert(p.name(x).to_string(), p.name(z).to_string());
        }
        for (&(d, x, y), &z) in &self.comp {
            doc.comp.entry(op_key(p.dirs(x), d)).or_default().push([
                p.name(x).to_string(),
                p.name(y).to_string(),
                p.name(z).to_string(),
            ]);
        }
        for rows in doc.comp.values_mut() {
            rows.sort();
        }
        doc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("table serializes")
    }
}

/// Composable-pair index: `(level, d, t_d y) -> [y]`.
struct Index<'a> {
    c: &'a StrictCategoryTable,
    by_target: HashMap<(DirectionSet, Direction, CellId), Vec<CellId>>,
    cells: Vec<CellId>,
}

impl<'a> Index<'a> {
    fn new(c: &'a StrictCategoryTable) -> Self {
        let p = &c.underlying;
        let mut by_target: HashMap<_, Vec<CellId>> = HashMap::new();
        let mut cells: Vec<CellId> = p.cell_ids().collect();
        cells.sort_by_key(|&x| (p.dirs(x), x));
        for &y in &cells {
            let dirs = p.dirs(y);
            for d in dirs.iter() {
                if let Some(t) = p.face(y, d, Side::Target) {
                    by_target.entry((dirs, d, t)).or_default().push(y);
                }
            }
        }
        Index { c, by_target, cells }
    }

    /// All `y` with `s_d x = t_d y`.
    fn after(&self, x: CellId, d: Direction) -> &[CellId] {
        let p = &self.c.underlying;
        p.face(x, d, Side::Source)
            .and_then(|s| self.by_target.get(&(p.dirs(x), d, s)))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    fn scan<F>(&self, f: F) -> Report
    where
        F: Fn(CellId, &mut Report) + Sync,
    {
        let mut r = self
            .cells
            .par_iter()
            .map(|&x| {
                let mut r = Report::new();
                f(x, &mut r);
                r
            })
            .reduce(Report::new, |mut a, b| {
                a.absorb(b);
                a
            });
        r.normalize();
        r
    }
}

fn show(c: &StrictCategoryTable, x: Option<CellId>) -> String {
    x.map(|x| c.name(x)).unwrap_or_else(|| "undefined".into())
}

/// Structural typing of the three tables and the strict category axioms:
/// associativity, unitality, functoriality of identities and exchange.
pub fn validate_strict(c: &StrictCategoryTable) -> Report {
    let p = c.underlying.clone();
    let cfg = *p.config();
    let universe = cfg.universe();
    let idx = Index::new(c);
    let mut r = Report::new();

    // comp entries must sit on composable pairs and land at the right level
    let mut entries: Vec<_> = c.comp.iter().map(|(&k, &v)| (k, v)).collect();
    entries.sort();
    for ((d, x, y), z) in entries {
        let dirs = p.dirs(x);
        let ok = dirs.contains(d)
            && p.dirs(y) == dirs
            && p.dirs(z) == dirs
            && p.face(x, d, Side::Source).is_some()
            && p.face(x, d, Side::Source) == p.face(y, d, Side::Target);
        r.expect(
            ok,
            "comp-typing",
            || format!("{} ∘{d} {}", c.name(x), c.name(y)),
            || "entry on a non-composable pair or at the wrong level".into(),
        );
    }

    r.absorb(idx.scan(|x, r| {
        let dirs = p.dirs(x);
        let sx = |d, side| p.face(x, d, side);
        for d in universe.iter() {
            if dirs.contains(d) {
                // involution typing
                let xs = c.dual(x, d);
                r.expect(xs.is_some(), "dual-total", || c.name(x), || format!("no involution in direction {d}"));
                if let Some(xs) = xs {
                    r.expect(
                        p.dirs(xs) == dirs
                            && p.face(xs, d, Side::Source) == sx(d, Side::Target)
                            && p.face(xs, d, Side::Target) == sx(d, Side::Source),
                        "dual-faces",
                        || c.name(x),
                        || format!("involution in direction {d} does not swap its {d}-faces"),
                    );
                    for e in dirs.iter().filter(|e| *e != d) {
                        for side in Side::BOTH {
                            let lhs = p.face(xs, e, side);
                            let rhs = sx(e, side).and_then(|f| c.dual(f, d));
                            r.expect(lhs.is_some() && lhs == rhs, "dual-faces", || c.name(x), || {
                                format!("{}{e} of involution {d}: {} vs {}", side.letter(), show(c, lhs), show(c, rhs))
                            });
                        }
                    }
                }
                // composition totality and faces
                for &y in idx.after(x, d) {
                    let z = c.comp(d, x, y);
                    r.expect(z.is_some(), "comp-total", || format!("{} ∘{d} {}", c.name(x), c.name(y)), || {
                        "composable pair without an entry".into()
                    });
                    let Some(z) = z else { continue };
                    r.expect(
                        p.face(z, d, Side::Source) == p.face(y, d, Side::Source)
                            && p.face(z, d, Side::Target) == sx(d, Side::Target),
                        "comp-faces",
                        || format!("{} ∘{d} {}", c.name(x), c.name(y)),
                        || format!("{d}-faces of the composite are wrong"),
                    );
                    for e in dirs.iter().filter(|e| *e != d) {
                        for side in Side::BOTH {
                            let lhs = p.face(z, e, side);
                            let rhs = match (sx(e, side), p.face(y, e, side)) {
                                (Some(a), Some(b)) => c.comp(d, a, b),
                                _ => None,
                            };
                            r.expect(lhs.is_some() && lhs == rhs, "comp-faces", || {
                                format!("{} ∘{d} {}", c.name(x), c.name(y))
                            }, || format!("{}{e} face: {} vs {}", side.letter(), show(c, lhs), show(c, rhs)));
                        }
                    }
                }
                // unitality
                let right = sx(d, Side::Source).and_then(|s| c.refl(s, d)).and_then(|i| c.comp(d, x, i));
                r.expect(right == Some(x), "unit", || c.name(x), || format!("x ∘{d} id(s x) = {}", show(c, right)));
                let left = sx(d, Side::Target).and_then(|t| c.refl(t, d)).and_then(|i| c.comp(d, i, x));
                r.expect(left == Some(x), "unit", || c.name(x), || format!("id(t x) ∘{d} x = {}", show(c, left)));
                // associativity
                for &y in idx.after(x, d) {
                    let Some(xy) = c.comp(d, x, y) else { continue };
                    for &z in idx.after(y, d) {
                        let lhs = c.comp(d, y, z).and_then(|yz| c.comp(d, x, yz));
                        let rhs = c.comp(d, xy, z);
                        r.expect(lhs.is_some() && lhs == rhs, "assoc", || {
                            format!("({}, {}, {}) in direction {d}", c.name(x), c.name(y), c.name(z))
                        }, || format!("{} vs {}", show(c, lhs), show(c, rhs)));
                    }
                }
                // exchange: (x ∘_d y) ∘_f (w ∘_d z) = (x ∘_f w) ∘_d (y ∘_f z)
                for f in dirs.iter().filter(|f| *f != d) {
                    for &y in idx.after(x, d) {
                        let Some(xy) = c.comp(d, x, y) else { continue };
                        for &w in idx.after(x, f) {
                            for &z in idx.after(w, d) {
                                if p.face(y, f, Side::Source) != p.face(z, f, Side::Target) {
                                    continue;
                                }
                                let lhs = c.comp(d, w, z).and_then(|wz| c.comp(f, xy, wz));
                                let rhs = match (c.comp(f, x, w), c.comp(f, y, z)) {
                                    (Some(a), Some(b)) => c.comp(d, a, b),
                                    _ => None,
                                };
                                r.expect(lhs.is_some() && lhs == rhs, "exchange", || {
                                    format!(
                                        "x={}, y={}, w={}, z={} (d={d}, f={f})",
                                        c.name(x),
                                        c.name(y),
                                        c.name(w),
                                        c.name(z)
                                    )
                                }, || format!("{} vs {}", show(c, lhs), show(c, rhs)));
                            }
                        }
                    }
                }
            } else if dirs.len() < cfg.max_dim {
                let ix = c.refl(x, d);
                r.expect(ix.is_some(), "refl-total", || c.name(x), || format!("no identity in direction {d}"));
                let Some(ix) = ix else { continue };
                r.expect(
                    p.dirs(ix) == dirs.with(d)
                        && p.face(ix, d, Side::Source) == Some(x)
                        && p.face(ix, d, Side::Target) == Some(x),
                    "refl-faces",
                    || c.name(x),
                    || format!("identity in direction {d} has wrong level or {d}-faces"),
                );
                for e in dirs.iter() {
                    for side in Side::BOTH {
                        let lhs = p.face(ix, e, side);
                        let rhs = sx(e, side).and_then(|f| c.refl(f, d));
                        r.expect(lhs.is_some() && lhs == rhs, "refl-faces", || c.name(x), || {
                            format!("{}{e} of identity {d}: {} vs {}", side.letter(), show(c, lhs), show(c, rhs))
                        });
                    }
                    // functoriality of identities: ι_d(x ∘_e y) = ι_d x ∘_e ι_d y
                    for &y in idx.after(x, e) {
                        let lhs = c.comp(e, x, y).and_then(|xy| c.refl(xy, d));
                        let rhs = match (c.refl(x, d), c.refl(y, d)) {
                            (Some(a), Some(b)) => c.comp(e, a, b),
                            _ => None,
                        };
                        r.expect(lhs.is_some() && lhs == rhs, "id-functoriality", || {
                            format!("({}, {}) e={e}, d={d}", c.name(x), c.name(y))
                        }, || format!("{} vs {}", show(c, lhs), show(c, rhs)));
                    }
                }
            }
        }
    }));
    r.normalize();
    r
}

/// The involution axioms: involutivity, commutation of involutions in
/// distinct directions, their (anti)functoriality, and Hermitian identities.
pub fn validate_involutive(c: &StrictCategoryTable) -> Report {
    let p = c.underlying.clone();
    let cfg = *p.config();
    let universe = cfg.universe();
    let idx = Index::new(c);
    idx.scan(|x, r| {
        let dirs = p.dirs(x);
        for d in dirs.iter() {
            let xs = c.dual(x, d);
            let xss = xs.and_then(|y| c.dual(y, d));
            r.expect(xss == Some(x), "involutive", || c.name(x), || {
                format!("double involution in direction {d} gives {}", show(c, xss))
            });
            for e in dirs.iter().filter(|e| *e > d) {
                let lhs = c.dual(x, d).and_then(|y| c.dual(y, e));
                let rhs = c.dual(x, e).and_then(|y| c.dual(y, d));
                r.expect(lhs.is_some() && lhs == rhs, "star-commute", || c.name(x), || {
                    format!("directions {d},{e}: {} vs {}", show(c, lhs), show(c, rhs))
                });
            }
            for &y in idx.after(x, d) {
                let xy = c.comp(d, x, y);
                let lhs = xy.and_then(|z| c.dual(z, d));
                let rhs = match (c.dual(y, d), c.dual(x, d)) {
                    (Some(a), Some(b)) => c.comp(d, a, b),
                    _ => None,
                };
                r.expect(lhs.is_some() && lhs == rhs, "star-antihomo", || {
                    format!("({}, {}) d={d}", c.name(x), c.name(y))
                }, || format!("{} vs {}", show(c, lhs), show(c, rhs)));
                for e in dirs.iter().filter(|e| *e != d) {
                    let lhs = xy.and_then(|z| c.dual(z, e));
                    let rhs = match (c.dual(x, e), c.dual(y, e)) {
                        (Some(a), Some(b)) => c.comp(d, a, b),
                        _ => None,
                    };
                    r.expect(lhs.is_some() && lhs == rhs, "star-homo-transverse", || {
                        format!("({}, {}) d={d}, e={e}", c.name(x), c.name(y))
                    }, || format!("{} vs {}", show(c, lhs), show(c, rhs)));
                }
            }
        }
        if dirs.len() < cfg.max_dim {
            for d in universe.iter().filter(|d| !dirs.contains(*d)) {
                let Some(ix) = c.refl(x, d) else { continue };
                let lhs = c.dual(ix, d);
                r.expect(lhs == Some(ix), "id-hermitian", || c.name(x), || {
                    format!("involution {d} of identity {d} is {}", show(c, lhs))
                });
                for e in dirs.iter() {
                    let lhs = c.dual(ix, e);
                    let rhs = c.dual(x, e).and_then(|y| c.refl(y, d));
                    r.expect(lhs.is_some() && lhs == rhs, "id-hermitian-transverse", || c.name(x), || {
                        format!("d={d}, e={e}: {} vs {}", show(c, lhs), show(c, rhs))
                    });
                }
            }
        }
    })
}

/// A face-preserving choice of images for the generators of a presentation.
#[derive(Clone, Debug)]
pub struct GeneratorAssignment {
    table: Arc<StrictCategoryTable>,
    map: SetMorphism,
}

impl GeneratorAssignment {
    /// Rejects maps that are partial or do not commute with faces.
    pub fn new(map: SetMorphism, table: Arc<StrictCategoryTable>) -> Result<Self, StrictError> {
        if !Arc::ptr_eq(map.target(), table.underlying()) {
            return Err(StrictError::Assignment(
                "map does not land in the table's underlying presentation".into(),
            ));
        }
        let r = validate_morphism(&map);
        if let Some(v) = r.violations.first() {
            return Err(StrictError::Assignment(format!(
                "{} violation(s), first: {} at {}: {}",
                r.violations.len(),
                v.check,
                v.subject,
                v.detail
            )));
        }
        Ok(GeneratorAssignment { table, map })
    }

    pub fn random<R: Rng>(
        source: &Arc<Presentation>,
        table: Arc<StrictCategoryTable>,
        rng: &mut R,
    ) -> Option<Self> {
        let map = random_morphism(source, table.underlying(), rng)?;
        GeneratorAssignment::new(map, table).ok()
    }

    pub fn table(&self) -> &Arc<StrictCategoryTable> {
        &self.table
    }

    pub fn source(&self) -> &Arc<Presentation> {
        self.map.source()
    }

    pub fn map(&self) -> &SetMorphism {
        &self.map
    }

    pub fn apply(&self, c: CellId) -> Option<CellId> {
        self.map.apply(c)
    }
}

/// A strict target used to separate terms.
#[derive(Clone, Debug)]
pub struct Separator {
    pub name: String,
    pub assignment: GeneratorAssignment,
}

/// Memoized structural evaluation `φ̂` of magma terms.
pub struct Evaluator<'a> {
    a: &'a GeneratorAssignment,
    memo: HashMap<TermId, CellId>,
}

impl<'a> Evaluator<'a> {
    pub fn new(a: &'a GeneratorAssignment) -> Self {
        Evaluator {
            a,
            memo: HashMap::new(),
        }
    }

    pub fn eval(&mut self, store: &TermStore, t: TermId) -> Result<CellId, StrictError> {
        if let Some(&v) = self.memo.get(&t) {
            return Ok(v);
        }
        let c = &self.a.table;
        let v = match store.node(t) {
            Node::Gen(g) => self
                .a
                .apply(g)
                .ok_or_else(|| StrictError::Unassigned(store.presentation().qualified(g)))?,
            Node::Refl(d, x) => {
                let u = self.eval(store, x)?;
                c.refl(u, d).ok_or_else(|| StrictError::MissingRefl {
                    cell: c.name(u),
                    direction: d,
                })?
            }
            Node::Dual(d, x) => {
                let u = self.eval(store, x)?;
                c.dual(u, d).ok_or_else(|| StrictError::MissingDual {
                    cell: c.name(u),
                    direction: d,
                })?
            }
            Node::Comp(d, x, y) => {
                let u = self.eval(store, x)?;
                let v = self.eval(store, y)?;
                c.comp(d, u, v).ok_or_else(|| StrictError::NotComposable {
                    direction: d,
                    left: c.name(u),
                    right: c.name(v),
                    left_boundary: show(c, c.face(u, d, Side::Source)),
                    right_boundary: show(c, c.face(v, d, Side::Target)),
                })?
            }
            Node::Kappa(..) => return Err(StrictError::Kappa(store.display(t))),
        };
        self.memo.insert(t, v);
        Ok(v)
    }
}

pub fn eval_term(store: &TermStore, t: TermId, a: &GeneratorAssignment) -> Result<CellId, StrictError> {
    Evaluator::new(a).eval(store, t)
}

/// A second homomorphic extension, computed by repeated sweeps over the
/// universe until every term whose arguments are known has a value.
pub fn extend_by_sweeps(
    store: &TermStore,
    universe: &TermUniverse,
    a: &GeneratorAssignment,
) -> HashMap<TermId, CellId> {
    let c = &a.table;
    let mut val: HashMap<TermId, CellId> = HashMap::new();
    loop {
        let mut changed = false;
        for &t in universe.terms().iter().rev() {
            if val.contains_key(&t) {
                continue;
            }
            let v = match store.node(t) {
                Node::Gen(g) => a.apply(g),
                Node::Refl(d, x) => val.get(&x).and_then(|&u| c.refl(u, d)),
                Node::Dual(d, x) => val.get(&x).and_then(|&u| c.dual(u, d)),
                Node::Comp(d, x, y) => match (val.get(&x), val.get(&y)) {
                    (Some(&u), Some(&v)) => c.comp(d, u, v),
                    _ => None,
                },
                Node::Kappa(..) => None,
            };
            if let Some(v) = v {
                val.insert(t, v);
                changed = true;
            }
        }
        if !changed {
            return val;
        }
    }
}

/// Checks `φ̂∘η = φ` on generators, the homomorphism and naturality equations
/// on every enumerated term, and agreement with an independently computed
/// homomorphic extension.
pub fn check_universal_factorization(
    a: &GeneratorAssignment,
    store: &mut TermStore,
    universe: &TermUniverse,
) -> Report {
    let c = a.table.clone();
    let mut r = Report::new();
    let mut ev = Evaluator::new(a);
    let mut values: HashMap<TermId, CellId> = HashMap::new();
    for &t in universe.terms() {
        match ev.eval(store, t) {
            Ok(v) => {
                values.insert(t, v);
            }
            Err(e) => r.push("eval", store.display(t), e.to_string()),
        }
    }
    let val = |t: TermId| values.get(&t).copied();
    for &t in universe.terms() {
        let Some(v) = val(t) else { continue };
        let (expected, check) = match store.node(t) {
            Node::Gen(g) => (a.apply(g), "eta"),
            Node::Refl(d, x) => (val(x).and_then(|u| c.refl(u, d)), "homomorphism"),
            Node::Dual(d, x) => (val(x).and_then(|u| c.dual(u, d)), "homomorphism"),
            Node::Comp(d, x, y) => (
                match (val(x), val(y)) {
                    (Some(u), Some(w)) => c.comp(d, u, w),
                    _ => None,
                },
                "homomorphism",
            ),
            Node::Kappa(..) => continue,
        };
        r.expect(expected == Some(v), check, || store.display(t), || {
            format!("value {} vs {}", c.name(v), show(&c, expected))
        });
        for d in store.dirs(t).iter() {
            for side in Side::BOTH {
                let f = store.boundary(t, d, side).ok();
                let lhs = f.and_then(|f| val(f).or_else(|| ev.eval(store, f).ok()));
                let rhs = c.face(v, d, side);
                r.expect(lhs.is_some() && lhs == rhs, "naturality", || store.display(t), || {
                    format!("{}{d}: {} vs {}", side.letter(), show(&c, lhs), show(&c, rhs))
                });
            }
        }
    }
    let other = extend_by_sweeps(store, universe, a);
    for &t in universe.terms() {
        let (u, w) = (val(t), other.get(&t).copied());
        r.expect(u.is_some() && u == w, "uniqueness", || store.display(t), || {
            format!("eval {} vs sweep {}", show(&c, u), show(&c, w))
        });
    }
    r.normalize();
    r
}
