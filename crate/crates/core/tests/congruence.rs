use std::sync::Arc;

use omega_cube::congruence::{
    instantiate_relations, CongruenceError, CongruenceSession, RelationFamily, RelationMode,
    Verdict, Witness,
};
use omega_cube::models::{quiver_presentation, seed_presentation, word_separator};
use omega_cube::term::{enumerate_free_magma, NoCertificate};
use omega_cube::{Direction, DirectionSet, Mode, Presentation, TermId, TermStore, TruncationConfig};

fn d(l: u32) -> Direction {
    Direction::new(l).unwrap()
}

fn parse(store: &mut TermStore, s: &str) -> TermId {
    store.parse(s, Mode::Magma, &NoCertificate).unwrap()
}

fn session(p: Arc<Presentation>, cfg: TruncationConfig) -> CongruenceSession {
    let mut store = TermStore::new(p);
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let mut s = CongruenceSession::from_universe(store, &u, RelationMode::Strict).unwrap();
    s.saturate(cfg.saturation_budget).unwrap();
    s
}

#[test]
fn composable_triple_gives_an_assoc_instance() {
    let cfg = TruncationConfig::new(1, 1, 4);
    let mut store = TermStore::new(quiver_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let inst = instantiate_relations(&mut store, &u, RelationMode::Strict).unwrap();
    let l = parse(&mut store, "comp[1](gen(f),comp[1](gen(g),gen(f)))");
    let r = parse(&mut store, "comp[1](comp[1](gen(f),gen(g)),gen(f))");
    let hits: Vec<_> = inst
        .iter()
        .filter(|i| i.family == RelationFamily::Assoc && ((i.left, i.right) == (l, r) || (i.left, i.right) == (r, l)))
        .collect();
    assert_eq!(hits.len(), 1);
}

#[test]
fn double_dual_gives_an_involutive_instance() {
    let cfg = TruncationConfig::new(1, 1, 2);
    let mut store = TermStore::new(quiver_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let inst = instantiate_relations(&mut store, &u, RelationMode::Strict).unwrap();
    let f = parse(&mut store, "gen(f)");
    let ff = parse(&mut store, "dual[1](dual[1](gen(f)))");
    assert!(inst
        .iter()
        .any(|i| i.family == RelationFamily::Involutive && i.left == ff && i.right == f));
}

#[test]
fn objects_only_give_no_instances() {
    let cfg = TruncationConfig::new(0, 1, 3);
    let mut p = Presentation::new(cfg);
    p.add_cell(DirectionSet::EMPTY, "a").unwrap();
    p.add_cell(DirectionSet::EMPTY, "b").unwrap();
    let mut store = TermStore::new(Arc::new(p));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    assert!(instantiate_relations(&mut store, &u, RelationMode::Strict).unwrap().is_empty());
}

#[test]
fn instances_are_deterministic() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let run = || {
        let mut store = TermStore::new(seed_presentation(cfg));
        let u = enumerate_free_magma(&mut store, &cfg).unwrap();
        instantiate_relations(&mut store, &u, RelationMode::Strict)
            .unwrap()
            .iter()
            .map(|i| format!("{} {} {}", i.family, store.display(i.left), store.display(i.right)))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn merges_propagate_through_identities() {
    let cfg = TruncationConfig::new(1, 1, 2);
    let mut store = TermStore::new(quiver_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let fg = parse(&mut store, "comp[1](gen(f),gen(g))");
    let gf = parse(&mut store, "comp[1](gen(g),gen(f))");
    let ia = parse(&mut store, "id[1](gen(a))");
    let mut s = CongruenceSession::new(store, RelationMode::Strict, 1);
    s.add_universe(&u).unwrap();
    for t in [fg, gf, ia] {
        s.add_term(t).unwrap();
    }
    s.saturate(4).unwrap();
    assert_eq!(s.same_class(fg, ia), Some(false));
    // f∘g: b -> b against ι_a: a -> a, so the faces collapse a and b
    s.plant_merge(fg, ia).unwrap();
    assert_eq!(s.same_class(fg, ia), Some(true));
    let a = parse(s.store_mut(), "gen(a)");
    let b = parse(s.store_mut(), "gen(b)");
    assert_eq!(s.same_class(a, b), Some(true));
}

#[test]
fn merged_operands_give_merged_identities() {
    let cfg = TruncationConfig::new(2, 2, 2);
    let mut store = TermStore::new(seed_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let f = parse(&mut store, "gen(f)");
    let fid = parse(&mut store, "comp[1](gen(f),id[1](gen(a)))");
    let rf = parse(&mut store, "id[2](gen(f))");
    let rfid = parse(&mut store, "id[2](comp[1](gen(f),id[1](gen(a))))");
    let mut s = CongruenceSession::new(store, RelationMode::Strict, 2);
    s.add_universe(&u).unwrap();
    s.add_term(rfid).unwrap();
    s.plant_merge(f, fid).unwrap();
    s.saturate(1).unwrap();
    assert_eq!(s.same_class(rf, rfid), Some(true));
}

#[test]
fn decide_equal_reports_all_three_verdicts() {
    let cfg = TruncationConfig::new(1, 1, 5);
    let p = quiver_presentation(cfg);
    let mut s = session(p.clone(), cfg);
    let sep = word_separator(&p, d(1), 3).unwrap();

    let l = parse(s.store_mut(), "dual[1](comp[1](gen(f),gen(g)))");
    let r = parse(s.store_mut(), "comp[1](dual[1](gen(g)),dual[1](gen(f)))");
    let dec = s.decide_equal(l, r, std::slice::from_ref(&sep)).unwrap();
    assert_eq!(dec.verdict, Verdict::Equal);
    match dec.witness {
        Witness::MergeTrace { steps } => assert!(!steps.is_empty()),
        other => panic!("expected a merge trace, got {other:?}"),
    }

    // f: a -> b and g*: a -> b are parallel but different words
    let f = parse(s.store_mut(), "gen(f)");
    let gs = parse(s.store_mut(), "dual[1](gen(g))");
    let dec = s.decide_equal(f, gs, &[sep]).unwrap();
    assert_eq!(dec.verdict, Verdict::NotEqual);
    assert!(matches!(dec.witness, Witness::Separator { .. }));

    let dec = s.decide_equal(f, gs, &[]).unwrap();
    assert_eq!(dec.verdict, Verdict::Unknown);
    assert!(matches!(dec.witness, Witness::Budget { .. }));
}

#[test]
fn decide_equal_rejects_terms_outside_the_session() {
    let cfg = TruncationConfig::new(1, 1, 1);
    let mut s = session(quiver_presentation(cfg), cfg);
    let f = parse(s.store_mut(), "gen(f)");
    let far = parse(s.store_mut(), "comp[1](gen(f),comp[1](gen(g),gen(f)))");
    assert!(matches!(s.decide_equal(f, far, &[]), Err(CongruenceError::Unregistered(_))));
}

#[test]
fn saturated_session_passes_its_audit() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let mut s = session(seed_presentation(cfg), cfg);
    let r = s.audit().unwrap();
    assert!(r.is_ok(), "{:?}", r.violations);
    assert!(r.checked > 0);
}

#[test]
fn every_seeded_instance_is_provable() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let s = session(seed_presentation(cfg), cfg);
    assert!(!s.instances().is_empty());
    for i in s.instances() {
        assert_eq!(s.same_class(i.left, i.right), Some(true));
    }
}

#[test]
fn generators_stay_apart() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let mut s = session(seed_presentation(cfg), cfg);
    let f = parse(s.store_mut(), "gen(f)");
    let g = parse(s.store_mut(), "gen(g)");
    let a = parse(s.store_mut(), "gen(a)");
    let b = parse(s.store_mut(), "gen(b)");
    assert_eq!(s.same_class(f, g), Some(false));
    assert_eq!(s.same_class(a, b), Some(false));
}

#[test]
fn identities_distribute_beyond_the_universe() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let mut s = session(seed_presentation(cfg), cfg);
    // ι_2 f ∘_1 ι_2 g has size 5, outside the universe
    let l = parse(s.store_mut(), "comp[1](id[2](gen(f)),id[2](gen(g)))");
    let r = parse(s.store_mut(), "id[2](comp[1](gen(f),gen(g)))");
    s.add_term(l).unwrap();
    s.saturate(4).unwrap();
    assert_eq!(s.same_class(l, r), Some(true));
}

#[test]
fn disabled_family_is_not_used() {
    let cfg = TruncationConfig::new(1, 1, 3);
    let mut store = TermStore::new(quiver_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let mut s = CongruenceSession::new(store, RelationMode::Strict, 1);
    s.disable_family(RelationFamily::Involutive);
    s.add_universe(&u).unwrap();
    s.saturate(8).unwrap();
    let f = parse(s.store_mut(), "gen(f)");
    let ff = parse(s.store_mut(), "dual[1](dual[1](gen(f)))");
    assert_eq!(s.same_class(f, ff), Some(false));
}

#[test]
fn node_cap_is_reported() {
    let cfg = TruncationConfig::new(2, 2, 3);
    let mut store = TermStore::new(seed_presentation(cfg));
    let u = enumerate_free_magma(&mut store, &cfg).unwrap();
    let mut s = CongruenceSession::from_universe(store, &u, RelationMode::Strict)
        .unwrap()
        .with_node_cap(u.len());
    let st = s.saturate(16).unwrap();
    assert!(st.node_cap_hit);
}
