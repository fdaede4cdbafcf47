//! Finite, truncated presentations of cubical ω-sets.
//!
//! A presentation lists generator cells per direction set together with
//! total source/target tables. Cells of dimension `n` live at a direction
//! set `D` with `|D| = n`; the face in direction `d ∈ D` lands at `D - {d}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::Report;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PresentationError {
    #[error("malformed level key `{0}`")]
    LevelKey(String),
    #[error("malformed face key `{0}`")]
    FaceKey(String),
    #[error("direction label {0} out of range (labels are 1..=64)")]
    DirectionLabel(u32),
    #[error("duplicate cell `{name}` at level {level}")]
    DuplicateCell { name: String, level: String },
    #[error("unknown cell `{name}` at level {level}")]
    UnknownCell { name: String, level: String },
    #[error("face image `{image}` of cell `{cell}` not found")]
    UnknownImage { cell: String, image: String },
    #[error("face image `{image}` of cell `{cell}` is ambiguous")]
    AmbiguousImage { cell: String, image: String },
    #[error("map entry `{source_cell}` -> `{target_cell}` changes level")]
    LevelMismatch { source_cell: String, target_cell: String },
    #[error("directions {dirs} outside the universe 1..={universe}")]
    OutsideUniverse { dirs: String, universe: u32 },
    #[error("dimension {dim} does not match direction set {dirs}")]
    DimMismatch { dim: usize, dirs: String },
    #[error("dimension {dim} exceeds truncation bound {max_dim}")]
    AboveTruncation { dim: usize, max_dim: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("morphisms are not composable: middle presentations differ")]
    NotComposable,
}

/// An axis label. Labels run over `1..=64` so that direction sets fit a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Direction(u8);

impl Direction {
    pub const MAX_LABEL: u32 = 64;

    pub fn new(label: u32) -> Result<Self, PresentationError> {
        if (1..=Self::MAX_LABEL).contains(&label) {
            Ok(Direction(label as u8))
        } else {
            Err(PresentationError::DirectionLabel(label))
        }
    }

    pub fn label(self) -> u32 {
        self.0 as u32
    }

    fn bit(self) -> u64 {
        1u64 << (self.0 - 1)
    }
}

impl TryFrom<u32> for Direction {
    type Error = PresentationError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Direction::new(v)
    }
}

impl From<Direction> for u32 {
    fn from(d: Direction) -> u32 {
        d.label()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite set of directions, stored canonically as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct DirectionSet(u64);

impl DirectionSet {
    pub const EMPTY: DirectionSet = DirectionSet(0);

    pub fn from_labels(labels: &[u32]) -> Result<Self, PresentationError> {
        let mut s = DirectionSet::EMPTY;
        for &l in labels {
            s = s.with(Direction::new(l)?);
        }
        Ok(s)
    }

    /// `{1, ..., k}`.
    pub fn upto(k: u32) -> Self {
        let mut s = DirectionSet::EMPTY;
        for l in 1..=k.min(Direction::MAX_LABEL) {
            s = s.with(Direction(l as u8));
        }
        s
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, d: Direction) -> bool {
        self.0 & d.bit() != 0
    }

    pub fn with(self, d: Direction) -> Self {
        DirectionSet(self.0 | d.bit())
    }

    pub fn without(self, d: Direction) -> Self {
        DirectionSet(self.0 & !d.bit())
    }

    pub fn is_subset(self, other: DirectionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn max_label(self) -> u32 {
        64 - self.0.leading_zeros()
    }

    pub fn iter(self) -> impl Iterator<Item = Direction> {
        (1..=Direction::MAX_LABEL)
            .filter(move |l| self.0 & (1u64 << (l - 1)) != 0)
            .map(|l| Direction(l as u8))
    }

    /// All subsets of `{1..=k}` with exactly `n` elements, in canonical order.
    pub fn subsets(k: u32, n: usize) -> Vec<DirectionSet> {
        let mut out: Vec<DirectionSet> = (0u64..(1u64 << k.min(20)))
            .map(DirectionSet)
            .filter(|s| s.len() == n)
            .collect();
        out.sort();
        out
    }
}

impl Ord for DirectionSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl PartialOrd for DirectionSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for DirectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl fmt::Display for DirectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for d in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for DirectionSet {
    type Err = PresentationError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(DirectionSet::EMPTY);
        }
        let mut labels = Vec::new();
        for part in s.split(',') {
            let l: u32 = part
                .trim()
                .parse()
                .map_err(|_| PresentationError::LevelKey(s.to_string()))?;
            labels.push(l);
        }
        let set = DirectionSet::from_labels(&labels)?;
        if set.len() != labels.len() {
            return Err(PresentationError::LevelKey(s.to_string()));
        }
        Ok(set)
    }
}

/// `"<dim>/<d1,d2,...>"`.
pub fn level_key(dirs: DirectionSet) -> String {
    format!("{}/{}", dirs.len(), dirs)
}

/// Parses `"<dim>/<dirs>"`; the dimension must equal the cardinality.
pub fn parse_level_key(key: &str) -> Result<DirectionSet, PresentationError> {
    let (dim, dirs) = match key.split_once('/') {
        Some((a, b)) => (a, b),
        None => (key, ""),
    };
    let dim: usize = dim
        .trim()
        .parse()
        .map_err(|_| PresentationError::LevelKey(key.to_string()))?;
    let dirs: DirectionSet = dirs.parse()?;
    if dirs.len() != dim {
        return Err(PresentationError::DimMismatch {
            dim,
            dirs: dirs.to_string(),
        });
    }
    Ok(dirs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "s")]
    Source,
    #[serde(rename = "t")]
    Target,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Source, Side::Target];

    pub fn flip(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Side::Source => "s",
            Side::Target => "t",
        }
    }
}

/// Finite truncation of ω: dimensions `0..=max_dim`, directions `1..=dir_universe`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncationConfig {
    pub max_dim: usize,
    pub dir_universe: u32,
    /// Bound on `size - 1` of enumerated terms.
    pub term_depth: usize,
    /// Number of saturation rounds.
    pub saturation_budget: usize,
    /// Hard cap on the number of terms a universe or session may hold.
    pub universe_cap: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            max_dim: 2,
            dir_universe: 2,
            term_depth: 3,
            saturation_budget: 16,
            universe_cap: 200_000,
        }
    }
}

impl TruncationConfig {
    pub fn new(max_dim: usize, dir_universe: u32, term_depth: usize) -> Self {
        TruncationConfig {
            max_dim,
            dir_universe,
            term_depth,
            ..Default::default()
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.saturation_budget = budget;
        self
    }

    pub fn validate(&self) -> Result<(), PresentationError> {
        if self.dir_universe > Direction::MAX_LABEL {
            return Err(PresentationError::Config(format!(
                "dir_universe {} exceeds {}",
                self.dir_universe,
                Direction::MAX_LABEL
            )));
        }
        if self.max_dim > self.dir_universe as usize {
            return Err(PresentationError::Config(format!(
                "max_dim {} needs at least as many directions (dir_universe {})",
                self.max_dim, self.dir_universe
            )));
        }
        if self.saturation_budget == 0 {
            return Err(PresentationError::Config(
                "saturation_budget must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Largest term size admitted by `term_depth`.
    pub fn max_size(&self) -> u32 {
        self.term_depth as u32 + 1
    }

    pub fn universe(&self) -> DirectionSet {
        DirectionSet::upto(self.dir_universe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub name: String,
    pub dirs: DirectionSet,
}

impl Cell {
    pub fn dim(&self) -> usize {
        self.dirs.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Presentation {
    config: TruncationConfig,
    cells: Vec<Cell>,
    levels: BTreeMap<DirectionSet, Vec<CellId>>,
    by_name: HashMap<(DirectionSet, String), CellId>,
    name_count: HashMap<String, usize>,
    faces: HashMap<(CellId, Direction, Side), CellId>,
}

impl Presentation {
    pub fn new(config: TruncationConfig) -> Self {
        Presentation {
            config,
            ..Default::default()
        }
    }

    pub fn config(&self) -> &TruncationConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: TruncationConfig) {
        self.config = config;
    }

    pub fn add_cell(
        &mut self,
        dirs: DirectionSet,
        name: impl Into<String>,
    ) -> Result<CellId, PresentationError> {
        let name = name.into();
        if self.by_name.contains_key(&(dirs, name.clone())) {
            return Err(PresentationError::DuplicateCell {
                name,
                level: level_key(dirs),
            });
        }
        let id = CellId(self.cells.len() as u32);
        self.cells.push(Cell {
            name: name.clone(),
            dirs,
        });
        self.levels.entry(dirs).or_default().push(id);
        *self.name_count.entry(name.clone()).or_default() += 1;
        self.by_name.insert((dirs, name), id);
        Ok(id)
    }

    /// Records a face entry. Typing is not enforced here; see [`validate_quiver`].
    pub fn set_face(&mut self, cell: CellId, d: Direction, side: Side, image: CellId) {
        self.faces.insert((cell, d, side), image);
    }

    /// Sets both faces in direction `d`.
    pub fn set_faces(&mut self, cell: CellId, d: Direction, source: CellId, target: CellId) {
        self.set_face(cell, d, Side::Source, source);
        self.set_face(cell, d, Side::Target, target);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.index()]
    }

    pub fn name(&self, id: CellId) -> &str {
        &self.cells[id.index()].name
    }

    pub fn dirs(&self, id: CellId) -> DirectionSet {
        self.cells[id.index()].dirs
    }

    /// `dim/dirs:name`, unambiguous across levels.
    pub fn qualified(&self, id: CellId) -> String {
        let c = self.cell(id);
        format!("{}:{}", level_key(c.dirs), c.name)
    }

    /// True when `name` is used at exactly one level.
    pub fn name_is_unique(&self, name: &str) -> bool {
        self.name_count.get(name).copied() == Some(1)
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cells.len() as u32).map(CellId)
    }

    pub fn find(&self, dirs: DirectionSet, name: &str) -> Option<CellId> {
        self.by_name.get(&(dirs, name.to_string())).copied()
    }

    pub fn find_by_name(&self, name: &str) -> Vec<CellId> {
        self.cell_ids().filter(|&c| self.name(c) == name).collect()
    }

    pub fn face(&self, cell: CellId, d: Direction, side: Side) -> Option<CellId> {
        self.faces.get(&(cell, d, side)).copied()
    }

    pub fn face_entries(&self) -> impl Iterator<Item = ((CellId, Direction, Side), CellId)> + '_ {
        self.faces.iter().map(|(k, v)| (*k, *v))
    }

    /// Cells at a direction set, in load order.
    pub fn cells_at(&self, dirs: DirectionSet) -> &[CellId] {
        self.levels.get(&dirs).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = (DirectionSet, &[CellId])> + '_ {
        self.levels.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn max_cell_dim(&self) -> usize {
        self.levels.keys().map(|d| d.len()).max().unwrap_or(0)
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let doc: PresentationDoc = serde_json::from_str(text)?;
        Ok(Self::from_doc(&doc)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("presentation serializes")
    }

    pub fn from_doc(doc: &PresentationDoc) -> Result<Self, PresentationError> {
        let mut p = Presentation::new(doc.config.unwrap_or_default());
        let mut levels: Vec<(DirectionSet, &Vec<String>)> = doc
            .cells
            .iter()
            .map(|(k, v)| Ok((parse_level_key(k)?, v)))
            .collect::<Result<_, PresentationError>>()?;
        levels.sort_by_key(|(d, _)| *d);
        for (dirs, names) in levels {
            for n in names {
                p.add_cell(dirs, n.clone())?;
            }
        }
        for (key, table) in &doc.faces {
            let (dirs, d, side) = parse_face_key(key)?;
            let expected = dirs.without(d);
            for (cell_name, image_name) in table {
                let cell = p.find(dirs, cell_name).ok_or_else(|| PresentationError::UnknownCell {
                    name: cell_name.clone(),
                    level: level_key(dirs),
                })?;
                let image = p.resolve_image(expected, cell_name, image_name)?;
                p.set_face(cell, d, side, image);
            }
        }
        Ok(p)
    }

    /// Face images are looked up at the expected level first; a qualified
    /// `dim/dirs:name` or a globally unique name may point elsewhere, which
    /// then shows up as a typing violation.
    fn resolve_image(
        &self,
        expected: DirectionSet,
        cell: &str,
        image: &str,
    ) -> Result<CellId, PresentationError> {
        if let Some(c) = self.find(expected, image) {
            return Ok(c);
        }
        // cell names may themselves contain ':', so only a parsable prefix qualifies
        if let Some((dirs, name)) = image
            .split_once(':')
            .and_then(|(lvl, name)| Some((parse_level_key(lvl).ok()?, name)))
        {
            return self.find(dirs, name).ok_or_else(|| PresentationError::UnknownImage {
                cell: cell.to_string(),
                image: image.to_string(),
            });
        }
        let found = self.find_by_name(image);
        match found.len() {
            0 => Err(PresentationError::UnknownImage {
                cell: cell.to_string(),
                image: image.to_string(),
            }),
            1 => Ok(found[0]),
            _ => Err(PresentationError::AmbiguousImage {
                cell: cell.to_string(),
                image: image.to_string(),
            }),
        }
    }

    pub fn to_doc(&self) -> PresentationDoc {
        let mut cells = BTreeMap::new();
        for (dirs, ids) in &self.levels {
            cells.insert(
                level_key(*dirs),
                ids.iter().map(|&c| self.name(c).to_string()).collect(),
            );
        }
        let mut faces: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (&(cell, d, side), &image) in &self.faces {
            let dirs = self.dirs(cell);
            let key = format!("{}/{}/{}", level_key(dirs), d, side.letter());
            let img = if self.dirs(image) == dirs.without(d) {
                self.name(image).to_string()
            } else {
                self.qualified(image)
            };
            faces
                .entry(key)
                .or_default()
                .insert(self.name(cell).to_string(), img);
        }
        PresentationDoc {
            config: Some(self.config),
            cells,
            faces,
        }
    }
}

fn parse_face_key(key: &str) -> Result<(DirectionSet, Direction, Side), PresentationError> {
    let parts: Vec<&str> = key.split('/').collect();
    if parts.len() != 4 {
        return Err(PresentationError::FaceKey(key.to_string()));
    }
    let dirs = parse_level_key(&format!("{}/{}", parts[0], parts[1]))?;
    let d: u32 = parts[2]
        .trim()
        .parse()
        .map_err(|_| PresentationError::FaceKey(key.to_string()))?;
    let d = Direction::new(d)?;
    let side = match parts[3].trim() {
        "s" => Side::Source,
        "t" => Side::Target,
        _ => return Err(PresentationError::FaceKey(key.to_string())),
    };
    Ok((dirs, d, side))
}

/// JSON document form of a presentation.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PresentationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TruncationConfig>,
    #[serde(default)]
    pub cells: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub faces: BTreeMap<String, BTreeMap<String, String>>,
}

/// Face typing: every declared face must exist, drop exactly its direction,
/// and every cell must sit inside the truncation.
pub fn validate_quiver(p: &Presentation) -> Report {
    let mut r = Report::new();
    let cfg = p.config();
    let universe = cfg.universe();
    for c in p.cell_ids() {
        let dirs = p.dirs(c);
        r.expect(
            dirs.len() <= cfg.max_dim && dirs.is_subset(universe),
            "truncation",
            || p.qualified(c),
            || format!("outside max_dim {} / directions 1..={}", cfg.max_dim, cfg.dir_universe),
        );
        for d in dirs.iter() {
            for side in Side::BOTH {
                r.tick();
                match p.face(c, d, side) {
                    None => r.push(
                        "missing-face",
                        p.qualified(c),
                        format!("no {}_{} face", side.letter(), d),
                    ),
                    Some(img) if p.dirs(img) != dirs.without(d) => r.push(
                        "face-typing",
                        p.qualified(c),
                        format!(
                            "{}_{} points to {} but must land at level {}",
                            side.letter(),
                            d,
                            p.qualified(img),
                            level_key(dirs.without(d))
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
    }
    for ((c, d, side), img) in p.face_entries() {
        if !p.dirs(c).contains(d) {
            r.push(
                "face-typing",
                p.qualified(c),
                format!("{}_{} declared for a direction the cell lacks (image {})", side.letter(), d, p.qualified(img)),
            );
        }
    }
    r.normalize();
    r
}

/// Which of the four cubical identities an entry refers to. For `d < e`:
/// `ss`: s_e s_d = s_d s_e, `tt`: t_e t_d = t_d t_e,
/// `st`: s_e t_d = t_d s_e, `ts`: t_e s_d = s_d t_e.
pub const CUBICAL_IDENTITIES: [(&str, Side, Side); 4] = [
    ("ss", Side::Source, Side::Source),
    ("tt", Side::Target, Side::Target),
    ("st", Side::Source, Side::Target),
    ("ts", Side::Target, Side::Source),
];

pub fn validate_cubical_axioms(p: &Presentation) -> Report {
    let mut r = Report::new();
    for c in p.cell_ids() {
        let dirs = p.dirs(c);
        if dirs.len() < 2 {
            continue;
        }
        let ds: Vec<Direction> = dirs.iter().collect();
        for (i, &d) in ds.iter().enumerate() {
            for &e in &ds[i + 1..] {
                for (tag, outer, inner) in CUBICAL_IDENTITIES {
                    // outer_e(inner_d x) == inner_d(outer_e x)
                    let lhs = p.face(c, d, inner).and_then(|x| p.face(x, e, outer));
                    let rhs = p.face(c, e, outer).and_then(|x| p.face(x, d, inner));
                    if lhs.is_none() || rhs.is_none() {
                        continue;
                    }
                    r.expect(
                        lhs == rhs,
                        "cubical",
                        || p.qualified(c),
                        || {
                            format!(
                                "identity {tag} fails for d={d}, e={e}: {} vs {}",
                                p.qualified(lhs.unwrap()),
                                p.qualified(rhs.unwrap())
                            )
                        },
                    );
                }
            }
        }
    }
    r
}

/// Deterministic listing of one level.
pub fn enumerate_cells(
    p: &Presentation,
    dim: usize,
    dirs: DirectionSet,
) -> Result<Vec<CellId>, PresentationError> {
    let cfg = p.config();
    if !dirs.is_subset(cfg.universe()) {
        return Err(PresentationError::OutsideUniverse {
            dirs: dirs.to_string(),
            universe: cfg.dir_universe,
        });
    }
    if dirs.len() != dim {
        return Err(PresentationError::DimMismatch {
            dim,
            dirs: dirs.to_string(),
        });
    }
    if dim > cfg.max_dim {
        return Err(PresentationError::AboveTruncation {
            dim,
            max_dim: cfg.max_dim,
        });
    }
    Ok(p.cells_at(dirs).to_vec())
}

/// A level-preserving map between two presentations.
#[derive(Clone, Debug)]
pub struct SetMorphism {
    source: Arc<Presentation>,
    target: Arc<Presentation>,
    map: Vec<Option<CellId>>,
}

impl SetMorphism {
    pub fn new(
        source: Arc<Presentation>,
        target: Arc<Presentation>,
        entries: impl IntoIterator<Item = (CellId, CellId)>,
    ) -> Result<Self, PresentationError> {
        let mut map = vec![None; source.len()];
        for (a, b) in entries {
            if source.dirs(a) != target.dirs(b) {
                return Err(PresentationError::LevelMismatch {
                    source_cell: source.qualified(a),
                    target_cell: target.qualified(b),
                });
            }
            map[a.index()] = Some(b);
        }
        Ok(SetMorphism { source, target, map })
    }

    pub fn identity(p: Arc<Presentation>) -> Self {
        let map = p.cell_ids().map(Some).collect();
        SetMorphism {
            source: p.clone(),
            target: p,
            map,
        }
    }

    pub fn source(&self) -> &Arc<Presentation> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Presentation> {
        &self.target
    }

    pub fn apply(&self, c: CellId) -> Option<CellId> {
        self.map.get(c.index()).copied().flatten()
    }

    pub fn entries(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.map
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (CellId(i as u32), b)))
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &SetMorphism) -> Result<SetMorphism, PresentationError> {
        if !Arc::ptr_eq(&self.target, &then.source) {
            return Err(PresentationError::NotComposable);
        }
        let map = self
            .map
            .iter()
            .map(|v| v.and_then(|b| then.apply(b)))
            .collect();
        Ok(SetMorphism {
            source: self.source.clone(),
            target: then.target.clone(),
            map,
        })
    }

    /// Reads `{"<dim>/<dirs>": {"a": "b", ...}}`.
    pub fn from_json(
        source: Arc<Presentation>,
        target: Arc<Presentation>,
        text: &str,
    ) -> Result<Self, crate::Error> {
        let doc: BTreeMap<String, BTreeMap<String, String>> = serde_json::from_str(text)?;
        let mut entries = Vec::new();
        for (key, table) in &doc {
            let dirs = parse_level_key(key)?;
            for (a, b) in table {
                let ca = source.find(dirs, a).ok_or_else(|| PresentationError::UnknownCell {
                    name: a.clone(),
                    level: key.clone(),
                })?;
                let cb = match target.find(dirs, b) {
                    Some(c) => c,
                    None => {
                        let found = target.find_by_name(b);
                        match found.as_slice() {
                            [c] => *c,
                            _ => {
                                return Err(PresentationError::UnknownCell {
                                    name: b.clone(),
                                    level: key.clone(),
                                }
                                .into())
                            }
                        }
                    }
                };
                entries.push((ca, cb));
            }
        }
        Ok(SetMorphism::new(source, target, entries)?)
    }

    pub fn to_json(&self) -> String {
        let mut doc: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (a, b) in self.entries() {
            doc.entry(level_key(self.source.dirs(a)))
                .or_default()
                .insert(self.source.name(a).to_string(), self.target.name(b).to_string());
        }
        serde_json::to_string_pretty(&doc).expect("map serializes")
    }
}

/// Totality plus `ŝ∘φ = φ∘s` and `t̂∘φ = φ∘t` for every cell and direction.
pub fn validate_morphism(f: &SetMorphism) -> Report {
    let mut r = Report::new();
    let (src, tgt) = (f.source(), f.target());
    for c in src.cell_ids() {
        let Some(img) = f.apply(c) else {
            r.push("totality", src.qualified(c), "cell has no image");
            continue;
        };
        for d in src.dirs(c).iter() {
            for side in Side::BOTH {
                let lhs = tgt.face(img, d, side);
                let rhs = src.face(c, d, side).and_then(|x| f.apply(x));
                r.expect(
                    lhs.is_some() && lhs == rhs,
                    "face-commutation",
                    || src.qualified(c),
                    || {
                        let show = |x: Option<CellId>| x.map(|x| tgt.qualified(x)).unwrap_or("-".into());
                        format!(
                            "direction {d} side {}: image face {} vs mapped face {}",
                            side.letter(),
                            show(lhs),
                            show(rhs)
                        )
                    },
                );
            }
        }
    }
    r
}

/// Searches for a face-preserving map by randomized backtracking, cells
/// processed in increasing dimension. Returns `None` when none exists.
pub fn random_morphism<R: Rng>(
    source: &Arc<Presentation>,
    target: &Arc<Presentation>,
    rng: &mut R,
) -> Option<SetMorphism> {
    let mut order: Vec<CellId> = source.cell_ids().collect();
    order.sort_by_key(|&c| (source.dirs(c).len(), c));
    let mut assigned: Vec<Option<CellId>> = vec![None; source.len()];
    let mut budget = 100_000usize;
    if assign_from(source, target, &order, 0, &mut assigned, rng, &mut budget) {
        let entries = order.iter().map(|&c| (c, assigned[c.index()].unwrap()));
        SetMorphism::new(source.clone(), target.clone(), entries).ok()
    } else {
        None
    }
}

fn assign_from<R: Rng>(
    source: &Presentation,
    target: &Presentation,
    order: &[CellId],
    pos: usize,
    assigned: &mut Vec<Option<CellId>>,
    rng: &mut R,
    budget: &mut usize,
) -> bool {
    if pos == order.len() {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let c = order[pos];
    let dirs = source.dirs(c);
    let mut candidates: Vec<CellId> = target
        .cells_at(dirs)
        .iter()
        .copied()
        .filter(|&x| {
            dirs.iter().all(|d| {
                Side::BOTH.iter().all(|&side| {
                    let want = source.face(c, d, side).and_then(|f| assigned[f.index()]);
                    want.is_some() && target.face(x, d, side) == want
                })
            })
        })
        .collect();
    candidates.shuffle(rng);
    for x in candidates {
        assigned[c.index()] = Some(x);
        if assign_from(source, target, order, pos + 1, assigned, rng, budget) {
            return true;
        }
    }
    assigned[c.index()] = None;
    false
}
