//! Contraction data and the free contraction on a presentation, built stage
//! by stage up to the truncation dimension, with the generator inclusion η
//! and the free functor on morphisms.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::congruence::{
    ClassId, CongruenceError, CongruenceSession, RelationFamily, RelationInstance, RelationMode,
    SaturationStats,
};
use crate::presentation::{CellId, Direction, Presentation, PresentationError, SetMorphism, Side, TruncationConfig};
use crate::report::Report;
use crate::term::{enumerate_universe, Node, TermError, TermId, TermStore};

#[derive(Debug, Error)]
pub enum ContractionError {
    #[error("generator `{0}` has no image under the morphism")]
    MissingImage(String),
    #[error("morphism source is not the presentation the source contraction was built over")]
    WrongSource,
    #[error("morphism target is not the presentation the target contraction was built over")]
    WrongTarget,
    #[error(
        "contraction cell over ({source_left}, {source_right}) cannot be mapped: images {left} and {right} are not identified in the target"
    )]
    KappaPairLost {
        source_left: String,
        source_right: String,
        left: String,
        right: String,
    },
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Congruence(#[from] CongruenceError),
    #[error(transparent)]
    Presentation(#[from] PresentationError),
}

/// What one stage of the construction did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub level: usize,
    pub terms: usize,
    pub new_kappa_cells: usize,
    /// Pairs at the previous level that share a level but not a class, so
    /// admit no contraction cell.
    pub unproven_pairs: usize,
    pub new_instances: usize,
    pub classes: usize,
    pub saturation: SaturationStats,
    pub universe_truncated: bool,
    /// Budget or node cap stopped saturation before a fixpoint.
    pub partial: bool,
    /// The partition of this stage's terms did not change in later stages.
    pub stable: bool,
}

/// One κ-table entry `κ_d(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KappaKey {
    pub direction: Direction,
    pub left: TermId,
    pub right: TermId,
}

/// The free contraction truncated at `config.max_dim`: a magma universe in
/// contraction mode, the congruence defining π, and the κ-table over every
/// π-equal pair of the stage universes.
pub struct ContractionData {
    pub config: TruncationConfig,
    presentation: Arc<Presentation>,
    session: CongruenceSession,
    /// Terms of each stage universe, stage `n` holding dimensions `0..=n`.
    stage_terms: Vec<Vec<TermId>>,
    kappa: BTreeMap<KappaKey, TermId>,
    pub stages: Vec<StageReport>,
    underlying: Arc<Presentation>,
    cell_of: HashMap<TermId, CellId>,
    term_of: Vec<TermId>,
}

/// Class partition of a list of terms, as a list of index groups.
fn partition(session: &CongruenceSession, terms: &[TermId]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, &t) in terms.iter().enumerate() {
        if let Some(c) = session.class_of(t) {
            groups.entry(c).or_default().push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Builds the free contraction on `p`, one stage per dimension `0..=max_dim`.
/// Stage `n` enumerates terms of dimension at most `n` whose atoms include
/// κ-cells over the π-equal, syntactically distinct pairs of dimension
/// `n - 1` found by stage `n - 1`, then seeds and saturates the congruence.
pub fn build_free_contraction(
    p: Arc<Presentation>,
    cfg: &TruncationConfig,
) -> Result<ContractionData, ContractionError> {
    cfg.validate()?;
    let mut session = CongruenceSession::new(TermStore::new(p.clone()), RelationMode::Contraction, 0);
    let mut kappa: BTreeMap<KappaKey, TermId> = BTreeMap::new();
    let mut atoms: Vec<TermId> = Vec::new();
    let mut stage_terms: Vec<Vec<TermId>> = Vec::new();
    let mut stages: Vec<StageReport> = Vec::new();
    let mut snapshots: Vec<Vec<Vec<usize>>> = Vec::new();
    let dirs_all = cfg.universe();

    for n in 0..=cfg.max_dim {
        let mut new_kappa = 0;
        let mut unproven = 0;
        if n > 0 {
            let prev = &stage_terms[n - 1];
            let mut by_level: BTreeMap<_, Vec<TermId>> = BTreeMap::new();
            for &t in prev {
                let store = session.store();
                if store.dim(t) == n - 1 {
                    by_level.entry(store.dirs(t)).or_default().push(t);
                }
            }
            for (dirs, terms) in by_level {
                for &x in &terms {
                    for &y in &terms {
                        if session.same_class(x, y) != Some(true) {
                            unproven += 1;
                            continue;
                        }
                        for d in dirs_all.iter().filter(|d| !dirs.contains(*d)) {
                            let k = session.store_mut().kappa_unchecked(d, x, y);
                            if x != y {
                                atoms.push(k);
                                new_kappa += 1;
                            }
                            kappa.insert(
                                KappaKey {
                                    direction: d,
                                    left: x,
                                    right: y,
                                },
                                k,
                            );
                        }
                    }
                }
            }
            // unordered count of pairs in distinct classes
            unproven /= 2;
        }
        let universe = enumerate_universe(session.store_mut(), cfg, n, &atoms)?;
        let new_instances = session.add_universe(&universe)?;
        let stats = session.saturate(cfg.saturation_budget)?;
        let terms = universe.terms().to_vec();
        snapshots.push(partition(&session, &terms));
        stages.push(StageReport {
            level: n,
            terms: terms.len(),
            new_kappa_cells: new_kappa,
            unproven_pairs: unproven,
            new_instances,
            classes: session.num_classes(),
            saturation: stats,
            universe_truncated: universe.truncated,
            partial: !stats.fixpoint || stats.node_cap_hit,
            stable: true,
        });
        stage_terms.push(terms);
    }
    for (n, snap) in snapshots.iter().enumerate() {
        stages[n].stable = *snap == partition(&session, &stage_terms[n]);
    }

    let (underlying, cell_of, term_of) = underlying_presentation(&mut session, &stage_terms, cfg)?;
    Ok(ContractionData {
        config: *cfg,
        presentation: p,
        session,
        stage_terms,
        kappa,
        stages,
        underlying,
        cell_of,
        term_of,
    })
}

/// Underlying presentation, term-to-cell map and cell-to-term list.
type Underlying = (Arc<Presentation>, HashMap<TermId, CellId>, Vec<TermId>);

/// The cubical set underlying the magma: every stage term, every generator
/// and all their iterated faces, with cells named by their printed form.
fn underlying_presentation(
    session: &mut CongruenceSession,
    stage_terms: &[Vec<TermId>],
    cfg: &TruncationConfig,
) -> Result<Underlying, ContractionError> {
    let store = session.store_mut();
    let pres = store.presentation().clone();
    let mut todo: Vec<TermId> = pres.cell_ids().map(|c| store.gen(c)).collect();
    todo.extend(stage_terms.iter().flatten().copied());
    let mut order: Vec<TermId> = Vec::new();
    let mut seen: HashMap<TermId, ()> = HashMap::new();
    while let Some(t) = todo.pop() {
        if seen.insert(t, ()).is_some() {
            continue;
        }
        order.push(t);
        for d in store.dirs(t).iter() {
            for side in Side::BOTH {
                todo.push(store.boundary(t, d, side)?);
            }
        }
    }
    order.sort_by_key(|&t| (store.dim(t), store.weight(t), store.display(t)));
    let mut q = Presentation::new(TruncationConfig {
        max_dim: cfg.max_dim.max(pres.max_cell_dim()),
        ..*cfg
    });
    let mut cell_of = HashMap::new();
    for &t in &order {
        let c = q.add_cell(store.dirs(t), store.display(t))?;
        cell_of.insert(t, c);
    }
    for &t in &order {
        for d in store.dirs(t).iter() {
            let s = cell_of[&store.boundary(t, d, Side::Source)?];
            let u = cell_of[&store.boundary(t, d, Side::Target)?];
            q.set_faces(cell_of[&t], d, s, u);
        }
    }
    Ok((Arc::new(q), cell_of, order))
}

impl ContractionData {
    pub fn presentation(&self) -> &Arc<Presentation> {
        &self.presentation
    }

    pub fn session(&self) -> &CongruenceSession {
        &self.session
    }

    pub fn store(&self) -> &TermStore {
        self.session.store()
    }

    pub fn stage_terms(&self, n: usize) -> &[TermId] {
        &self.stage_terms[n]
    }

    /// Every term of the last stage.
    pub fn terms(&self) -> &[TermId] {
        self.stage_terms.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn kappa_table(&self) -> &BTreeMap<KappaKey, TermId> {
        &self.kappa
    }

    /// `κ_d(x, y)` when the pair is in the table.
    pub fn kappa(&self, d: Direction, x: TermId, y: TermId) -> Option<TermId> {
        self.kappa
            .get(&KappaKey {
                direction: d,
                left: x,
                right: y,
            })
            .copied()
    }

    /// π: the class of a term.
    pub fn pi(&self, t: TermId) -> Option<ClassId> {
        self.session.class_of(t)
    }

    /// The quotient restricted to the last stage: each class with its
    /// members in universe order.
    pub fn quotient(&self) -> BTreeMap<ClassId, Vec<TermId>> {
        let mut out: BTreeMap<ClassId, Vec<TermId>> = BTreeMap::new();
        for &t in self.terms() {
            if let Some(c) = self.pi(t) {
                out.entry(c).or_default().push(t);
            }
        }
        out
    }

    /// The cubical set underlying the magma.
    pub fn underlying(&self) -> &Arc<Presentation> {
        &self.underlying
    }

    pub fn cell_of(&self, t: TermId) -> Option<CellId> {
        self.cell_of.get(&t).copied()
    }

    pub fn term_of(&self, c: CellId) -> TermId {
        self.term_of[c.index()]
    }

    /// Replaces a κ-table entry. Only for planting faults in tests of
    /// [`validate_contraction`].
    pub fn plant_kappa(&mut self, key: KappaKey, cell: Option<TermId>) {
        match cell {
            Some(t) => {
                self.kappa.insert(key, t);
            }
            None => {
                self.kappa.remove(&key);
            }
        }
    }

    /// Builds `κ_d(x, y)` without a certificate. Only for planting faults.
    pub fn plant_kappa_term(&mut self, d: Direction, x: TermId, y: TermId) -> TermId {
        self.session.store_mut().kappa_unchecked(d, x, y)
    }

    /// JSON summary: stages, κ-table and class partition of the last stage.
    pub fn to_doc(&self) -> ContractionDoc {
        let store = self.store();
        let show = |t: TermId| store.display(t);
        let mut classes: Vec<Vec<String>> = self
            .quotient()
            .into_values()
            .map(|ms| ms.into_iter().map(show).collect())
            .collect();
        classes.sort();
        ContractionDoc {
            config: self.config,
            stages: self.stages.clone(),
            kappa: self
                .kappa
                .iter()
                .map(|(k, &v)| KappaRow {
                    direction: k.direction.label(),
                    left: show(k.left),
                    right: show(k.right),
                    cell: show(v),
                })
                .collect(),
            classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaRow {
    pub direction: u32,
    pub left: String,
    pub right: String,
    pub cell: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionDoc {
    pub config: TruncationConfig,
    pub stages: Vec<StageReport>,
    pub kappa: Vec<KappaRow>,
    pub classes: Vec<Vec<String>>,
}

/// The expected transverse face `κ_d(s_e x, s_e y)`: the table entry when
/// present, otherwise the canonical cell.
fn transverse_expected(cd: &mut ContractionData, d: Direction, x: TermId, y: TermId) -> TermId {
    cd.kappa(d, x, y)
        .unwrap_or_else(|| cd.session.store_mut().kappa_unchecked(d, x, y))
}

/// Checks the five families of κ-table invariants: domain, faces,
/// transverse faces, projection and degeneracy.
pub fn validate_contraction(cd: &mut ContractionData) -> Result<Report, ContractionError> {
    let mut r = Report::new();
    let entries: Vec<(KappaKey, TermId)> = cd.kappa.iter().map(|(k, &v)| (*k, v)).collect();
    let dirs_all = cd.config.universe();
    for (key, k) in &entries {
        let KappaKey {
            direction: d,
            left: x,
            right: y,
        } = *key;
        let subject = || {
            let s = cd.store();
            format!("kappa[{}]({}, {})", d.label(), s.display(x), s.display(y))
        };
        let subj = subject();
        let store = cd.session.store();
        let (dx, dy) = (store.dirs(x), store.dirs(y));
        r.expect(dx == dy && !dx.contains(d), "domain", || subj.clone(), || {
            "operands must share a level that excludes the direction".into()
        });
        r.expect(cd.session.same_class(x, y) == Some(true), "domain", || subj.clone(), || {
            "operands are not identified by π".into()
        });
        if dx != dy || dx.contains(d) {
            continue;
        }

        let store = cd.session.store_mut();
        let s = store.boundary(*k, d, Side::Source)?;
        let t = store.boundary(*k, d, Side::Target)?;
        r.expect(s == x, "faces", || subj.clone(), || format!("source face is {}", store.display(s)));
        r.expect(t == y, "faces", || subj.clone(), || format!("target face is {}", store.display(t)));

        for e in dx.iter() {
            for side in Side::BOTH {
                let store = cd.session.store_mut();
                let fx = store.boundary(x, e, side)?;
                let fy = store.boundary(y, e, side)?;
                let got = store.boundary(*k, e, side)?;
                let want = transverse_expected(cd, d, fx, fy);
                let store = cd.session.store();
                r.expect(got == want, "transverse-faces", || subj.clone(), || {
                    format!(
                        "{}_{} face is {}, expected {}",
                        side.letter(),
                        e.label(),
                        store.display(got),
                        store.display(want)
                    )
                });
            }
        }

        let rx = cd.session.store_mut().refl(d, x)?;
        cd.session.add_term(*k)?;
        cd.session.add_term(rx)?;
        r.expect(cd.session.same_class(*k, rx) == Some(true), "projection", || subj.clone(), || {
            "not identified with the identity on its source".into()
        });
        if x == y {
            let store = cd.session.store();
            r.expect(*k == rx, "degeneracy", || subj.clone(), || {
                format!("diagonal entry is {}", store.display(*k))
            });
        }
    }

    // completeness of the domain over every stage below the top
    for n in 0..cd.config.max_dim {
        let terms: Vec<TermId> = cd.stage_terms[n]
            .iter()
            .copied()
            .filter(|&t| cd.store().dim(t) == n)
            .collect();
        for &x in &terms {
            for &y in &terms {
                let store = cd.store();
                let dirs = store.dirs(x);
                if dirs != store.dirs(y) || cd.session.same_class(x, y) != Some(true) {
                    continue;
                }
                for d in dirs_all.iter().filter(|d| !dirs.contains(*d)) {
                    r.expect(cd.kappa(d, x, y).is_some(), "domain", || {
                        format!("kappa[{}]({}, {})", d.label(), store.display(x), store.display(y))
                    }, || "π-equal pair has no table entry".into());
                }
            }
        }
    }
    Ok(r)
}

/// The generator inclusion of `p` into the cubical set underlying the
/// contraction magma.
pub fn unit_eta(p: &Arc<Presentation>, cd: &ContractionData) -> Result<SetMorphism, ContractionError> {
    if !Arc::ptr_eq(p, &cd.presentation) {
        return Err(ContractionError::WrongSource);
    }
    let store = cd.store();
    let mut entries = Vec::new();
    for c in p.cell_ids() {
        let t = store
            .get(&Node::Gen(c))
            .ok_or_else(|| ContractionError::MissingImage(p.qualified(c)))?;
        let img = cd.cell_of(t).ok_or_else(|| ContractionError::MissingImage(p.qualified(c)))?;
        entries.push((c, img));
    }
    Ok(SetMorphism::new(p.clone(), cd.underlying.clone(), entries)?)
}

/// `F(f)`: the magma map Φ on the source terms and the induced map φ on
/// classes.
#[derive(Clone, Debug)]
pub struct ContractionMorphism {
    pub magma: HashMap<TermId, TermId>,
    pub classes: HashMap<ClassId, ClassId>,
}

impl ContractionMorphism {
    /// Φ on the underlying cubical sets, defined where the image is a cell
    /// of the target.
    pub fn on_cells(&self, source: &ContractionData, target: &ContractionData) -> Result<SetMorphism, ContractionError> {
        let mut entries = Vec::new();
        for c in source.underlying.cell_ids() {
            let t = source.term_of(c);
            if let Some(img) = self.magma.get(&t).and_then(|&u| target.cell_of(u)) {
                entries.push((c, img));
            }
        }
        Ok(SetMorphism::new(source.underlying.clone(), target.underlying.clone(), entries)?)
    }
}

fn image(
    f: &SetMorphism,
    source: &ContractionData,
    target: &mut ContractionData,
    t: TermId,
    memo: &mut HashMap<TermId, TermId>,
) -> Result<TermId, ContractionError> {
    if let Some(&u) = memo.get(&t) {
        return Ok(u);
    }
    let ss = source.store();
    let u = match ss.node(t) {
        Node::Gen(c) => {
            let img = f
                .apply(c)
                .ok_or_else(|| ContractionError::MissingImage(ss.presentation().qualified(c)))?;
            target.session.store_mut().gen(img)
        }
        Node::Refl(d, x) => {
            let a = image(f, source, target, x, memo)?;
            target.session.store_mut().refl(d, a)?
        }
        Node::Dual(d, x) => {
            let a = image(f, source, target, x, memo)?;
            target.session.store_mut().dual(d, a)?
        }
        Node::Comp(d, x, y) => {
            let a = image(f, source, target, x, memo)?;
            let b = image(f, source, target, y, memo)?;
            target.session.store_mut().comp(d, a, b)?
        }
        Node::Kappa(d, x, y) => {
            let a = image(f, source, target, x, memo)?;
            let b = image(f, source, target, y, memo)?;
            if a == b {
                target.session.store_mut().refl(d, a)?
            } else {
                target.session.add_term(a)?;
                target.session.add_term(b)?;
                if target.session.same_class(a, b) != Some(true) {
                    let ts = target.store();
                    return Err(ContractionError::KappaPairLost {
                        source_left: ss.display(x),
                        source_right: ss.display(y),
                        left: ts.display(a),
                        right: ts.display(b),
                    });
                }
                let k = target.session.store_mut().kappa_unchecked(d, a, b);
                let r = target.session.store_mut().refl(d, a)?;
                target.session.seed(&[RelationInstance {
                    left: k,
                    right: r,
                    family: RelationFamily::ContractionProjection,
                }])?;
                k
            }
        }
    };
    memo.insert(t, u);
    Ok(u)
}

/// The free functor on a morphism of presentations: Φ by structural
/// recursion over every source term (κ-cells go to κ-cells over the image
/// pair) and φ induced on classes. The target session is saturated again
/// after the images are added.
pub fn free_on_morphism(
    f: &SetMorphism,
    source: &ContractionData,
    target: &mut ContractionData,
) -> Result<ContractionMorphism, ContractionError> {
    if !Arc::ptr_eq(f.source(), &source.presentation) {
        return Err(ContractionError::WrongSource);
    }
    if !Arc::ptr_eq(f.target(), &target.presentation) {
        return Err(ContractionError::WrongTarget);
    }
    let mut memo = HashMap::new();
    let mut domain: Vec<TermId> = source.term_of.clone();
    domain.extend(source.kappa.values().copied());
    for &t in &domain {
        image(f, source, target, t, &mut memo)?;
    }
    let mut imgs: Vec<TermId> = memo.values().copied().collect();
    imgs.sort();
    for t in imgs {
        target.session.add_term(t)?;
    }
    target.session.saturate(target.config.saturation_budget)?;
    let mut classes = HashMap::new();
    for (&t, &u) in &memo {
        if let (Some(a), Some(b)) = (source.pi(t), target.pi(u)) {
            classes.entry(a).or_insert(b);
        }
    }
    Ok(ContractionMorphism { magma: memo, classes })
}

/// Checks a contraction morphism: π̂∘Φ = φ∘π on every mapped term, and
/// Φ(κ_d(x, y)) = κ̂_d(Φx, Φy) on every source table entry.
pub fn validate_contraction_morphism(
    m: &ContractionMorphism,
    source: &ContractionData,
    target: &mut ContractionData,
) -> Result<Report, ContractionError> {
    let mut r = Report::new();
    let mut mapped: Vec<(TermId, TermId)> = m.magma.iter().map(|(&a, &b)| (a, b)).collect();
    mapped.sort();
    for (t, u) in mapped {
        let (Some(a), Some(b)) = (source.pi(t), target.pi(u)) else {
            continue;
        };
        r.expect(m.classes.get(&a) == Some(&b), "pi-naturality", || source.store().display(t), || {
            "image class differs from the class map".into()
        });
    }
    let entries: Vec<(KappaKey, TermId)> = source.kappa.iter().map(|(k, &v)| (*k, v)).collect();
    for (key, k) in entries {
        let (Some(&a), Some(&b), Some(&img)) = (m.magma.get(&key.left), m.magma.get(&key.right), m.magma.get(&k)) else {
            r.expect(false, "kappa-preservation", || source.store().display(k), || "unmapped".into());
            continue;
        };
        let want = target.session.store_mut().kappa_unchecked(key.direction, a, b);
        r.expect(img == want, "kappa-preservation", || source.store().display(k), || {
            format!("image is {}", target.store().display(img))
        });
    }
    Ok(r)
}

/// `UF(f) ∘ η = η ∘ f`, compared cell by cell on the source presentation.
pub fn check_naturality(
    f: &SetMorphism,
    source: &ContractionData,
    target: &ContractionData,
    m: &ContractionMorphism,
) -> Result<Report, ContractionError> {
    let eta_s = unit_eta(&source.presentation, source)?;
    let eta_t = unit_eta(&target.presentation, target)?;
    let phi = m.on_cells(source, target)?;
    let left = eta_s.then(&phi)?;
    let right = f.then(&eta_t)?;
    let mut r = Report::new();
    let p = f.source();
    for c in p.cell_ids() {
        let (a, b) = (left.apply(c), right.apply(c));
        r.expect(a.is_some() && a == b, "naturality", || p.qualified(c), || {
            let show = |x: Option<CellId>| x.map_or("-".to_string(), |x| target.underlying.qualified(x));
            format!("UF(f)∘η gives {}, η∘f gives {}", show(a), show(b))
        });
    }
    Ok(r)
}
