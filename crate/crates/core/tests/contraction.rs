use std::sync::Arc;

use omega_cube::contraction::*;
use omega_cube::models::{loop_presentation, seed_presentation};
use omega_cube::presentation::{random_morphism, validate_morphism};
use omega_cube::term::NoCertificate;
use omega_cube::{Direction, DirectionSet, Mode, Node, Presentation, SetMorphism, TermId, TruncationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn d(l: u32) -> Direction {
    Direction::new(l).unwrap()
}

fn term(cd: &ContractionData, s: &str) -> TermId {
    let expr: omega_cube::TermExpr = s.parse().unwrap();
    // look the term up without growing the store
    let mut st = cd.store().clone();
    let t = st.construct(&expr, Mode::Magma, &NoCertificate).unwrap();
    assert!(t.index() < cd.store().len(), "{s} is not in the store");
    t
}

fn seed(depth: usize) -> (Arc<Presentation>, ContractionData) {
    let cfg = TruncationConfig::new(2, 2, depth);
    let p = seed_presentation(cfg);
    let cd = build_free_contraction(p.clone(), &cfg).unwrap();
    (p, cd)
}

#[test]
fn level_one_cells_are_identities() {
    let (_, cd) = seed(2);
    let objs: Vec<TermId> = cd.stage_terms(0).to_vec();
    assert_eq!(objs.len(), 2);
    for x in objs {
        for l in [1, 2] {
            let k = cd.kappa(d(l), x, x).expect("diagonal entry");
            assert_eq!(cd.store().node(k), Node::Refl(d(l), x));
        }
    }
    assert_eq!(cd.stages[1].new_kappa_cells, 0);
    assert_eq!(cd.stages[0].new_kappa_cells, 0);
}

#[test]
fn involution_law_gives_a_square() {
    let (_, mut cd) = seed(2);
    let f = term(&cd, "gen(f)");
    let ff = term(&cd, "dual[1](dual[1](gen(f)))");
    let k = cd.kappa(d(2), ff, f).expect("π-equal pair has a cell");
    let st = cd.store().clone();
    assert_eq!(st.node(k), Node::Kappa(d(2), ff, f));
    let r = validate_contraction(&mut cd).unwrap();
    assert!(r.is_ok(), "{:?}", r.violations);
}

#[test]
fn unit_law_gives_a_square() {
    let (_, mut cd) = seed(3);
    let f = term(&cd, "gen(f)");
    let fi = term(&cd, "comp[1](gen(f),id[1](gen(a)))");
    let k = cd.kappa(d(2), fi, f).expect("π-equal pair has a cell");
    assert!(matches!(cd.store().node(k), Node::Kappa(..)));
    let r = validate_contraction(&mut cd).unwrap();
    assert!(r.is_ok(), "{:?}", r.violations);
}

#[test]
fn parallel_unrelated_generators_get_no_cell() {
    let cfg = TruncationConfig::new(2, 2, 2);
    let mut p = Presentation::new(cfg);
    let a = p.add_cell(DirectionSet::EMPTY, "a").unwrap();
    let b = p.add_cell(DirectionSet::EMPTY, "b").unwrap();
    for n in ["f", "g"] {
        let c = p.add_cell(DirectionSet::from_labels(&[1]).unwrap(), n).unwrap();
        p.set_faces(c, d(1), a, b);
    }
    let cd = build_free_contraction(Arc::new(p), &cfg).unwrap();
    let f = term(&cd, "gen(f)");
    let g = term(&cd, "gen(g)");
    assert!(cd.kappa(d(2), f, g).is_none());
    assert_ne!(cd.pi(f), cd.pi(g));
}

#[test]
fn fresh_contraction_validates_with_stage_flags() {
    let (_, mut cd) = seed(2);
    let r = validate_contraction(&mut cd).unwrap();
    assert!(r.is_ok(), "{:?}", r.violations);
    assert_eq!(cd.stages.len(), 3);
    assert!(cd.stages.iter().all(|s| s.stable && !s.partial));
}

#[test]
fn swapped_cell_gives_two_face_violations() {
    let (_, mut cd) = seed(2);
    let f = term(&cd, "gen(f)");
    let fi = term(&cd, "dual[1](dual[1](gen(f)))");
    let key = KappaKey {
        direction: d(2),
        left: fi,
        right: f,
    };
    let swapped = cd.plant_kappa_term(d(2), f, fi);
    cd.plant_kappa(key, Some(swapped));
    let r = validate_contraction(&mut cd).unwrap();
    assert_eq!(r.count("faces"), 2, "{:?}", r.violations);
}

#[test]
fn missing_entry_is_a_domain_violation() {
    let (_, mut cd) = seed(2);
    let f = term(&cd, "gen(f)");
    let fi = term(&cd, "dual[1](dual[1](gen(f)))");
    cd.plant_kappa(
        KappaKey {
            direction: d(2),
            left: fi,
            right: f,
        },
        None,
    );
    let r = validate_contraction(&mut cd).unwrap();
    assert_eq!(r.count("domain"), 1, "{:?}", r.violations);
}

#[test]
fn eta_is_a_morphism_and_keeps_generators_apart() {
    let (p, cd) = seed(2);
    let eta = unit_eta(&p, &cd).unwrap();
    assert!(validate_morphism(&eta).is_ok());
    let a = p.find(DirectionSet::EMPTY, "a").unwrap();
    assert_eq!(cd.underlying().name(eta.apply(a).unwrap()), "gen(a)");
    let mut classes: Vec<_> = p
        .cell_ids()
        .map(|c| cd.pi(cd.term_of(eta.apply(c).unwrap())).unwrap())
        .collect();
    classes.sort();
    classes.dedup();
    assert_eq!(classes.len(), p.len());
}

#[test]
fn identity_morphism_acts_as_identity() {
    let (p, source) = seed(2);
    let cfg = source.config;
    let mut target = build_free_contraction(p.clone(), &cfg).unwrap();
    let id = SetMorphism::identity(p.clone());
    let m = free_on_morphism(&id, &source, &mut target).unwrap();
    for &t in source.terms() {
        let u = m.magma[&t];
        assert_eq!(source.store().display(t), target.store().display(u));
    }
    assert!(check_naturality(&id, &source, &target, &m).unwrap().is_ok());
    assert!(validate_contraction_morphism(&m, &source, &mut target).unwrap().is_ok());
}

#[test]
fn identities_are_preserved() {
    let cfg = TruncationConfig::new(2, 2, 2);
    let p = seed_presentation(cfg);
    let q = loop_presentation(cfg);
    let source = build_free_contraction(p.clone(), &cfg).unwrap();
    let mut target = build_free_contraction(q.clone(), &cfg).unwrap();
    let f = random_morphism(&p, &q, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let m = free_on_morphism(&f, &source, &mut target).unwrap();
    let ra = term(&source, "id[1](gen(a))");
    let a = p.find(DirectionSet::EMPTY, "a").unwrap();
    let img = target.store().display(m.magma[&ra]);
    assert_eq!(img, format!("id[1](gen({}))", q.name(f.apply(a).unwrap())));
}

#[test]
fn naturality_for_random_morphisms() {
    let cfg = TruncationConfig::new(2, 2, 2);
    let p = seed_presentation(cfg);
    let q = loop_presentation(cfg);
    let source = build_free_contraction(p.clone(), &cfg).unwrap();
    let mut target = build_free_contraction(q.clone(), &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let f = random_morphism(&p, &q, &mut rng).unwrap();
        let m = free_on_morphism(&f, &source, &mut target).unwrap();
        let r = check_naturality(&f, &source, &target, &m).unwrap();
        assert!(r.is_ok(), "{:?}", r.violations);
        assert_eq!(r.checked, p.len() as u64);
        let r = validate_contraction_morphism(&m, &source, &mut target).unwrap();
        assert!(r.is_ok(), "{:?}", r.violations);
    }
}

#[test]
fn morphism_must_start_at_the_source() {
    let (p, source) = seed(1);
    let cfg = source.config;
    let q = loop_presentation(cfg);
    let mut target = build_free_contraction(q.clone(), &cfg).unwrap();
    let other = seed_presentation(cfg);
    let f = random_morphism(&other, &q, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(matches!(
        free_on_morphism(&f, &source, &mut target),
        Err(ContractionError::WrongSource)
    ));
    let _ = p;
}

#[test]
fn contraction_summary_serializes() {
    let (_, cd) = seed(1);
    let doc = cd.to_doc();
    let text = serde_json::to_string(&doc).unwrap();
    let back: ContractionDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(doc.stages.len(), 3);
}
