use std::sync::Arc;

use omega_cube::models::{build_product, cyclic_group, pair_groupoid, partial_isometry, seed_presentation};
use omega_cube::strict::{
    check_universal_factorization, eval_term, extend_by_sweeps, validate_involutive, validate_strict,
    GeneratorAssignment, StrictCategoryTable, StrictError,
};
use omega_cube::term::{enumerate_free_magma, NoCertificate};
use omega_cube::{Direction, DirectionSet, Mode, SetMorphism, TermStore, TruncationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn d(l: u32) -> Direction {
    Direction::new(l).unwrap()
}

fn z3() -> StrictCategoryTable {
    build_product(&[cyclic_group(3)], &TruncationConfig::new(1, 1, 1)).unwrap()
}

fn cell(t: &StrictCategoryTable, level: &[u32], name: &str) -> omega_cube::CellId {
    t.underlying()
        .find(DirectionSet::from_labels(level).unwrap(), name)
        .unwrap_or_else(|| panic!("no cell {name}"))
}

#[test]
fn cyclic_group_table_is_strict_and_involutive() {
    let t = z3();
    assert!(validate_strict(&t).is_ok());
    assert!(validate_involutive(&t).is_ok());
}

#[test]
fn planted_associativity_corruption_is_caught() {
    let mut t = z3();
    let r1 = cell(&t, &[1], "(r1)");
    let r0 = cell(&t, &[1], "(r0)");
    t.set_comp(d(1), r1, r1, r0);
    let rep = validate_strict(&t);
    assert!(rep.count("assoc") > 0, "{:?}", rep.violations);
    assert!(validate_involutive(&t).count("involutive") == 0);
}

#[test]
fn planted_double_star_violation_is_caught() {
    let mut t = z3();
    let r1 = cell(&t, &[1], "(r1)");
    t.set_dual(r1, d(1), r1);
    let rep = validate_involutive(&t);
    assert!(rep.count("involutive") > 0, "{:?}", rep.violations);
}

#[test]
fn missing_composite_is_a_totality_violation() {
    let mut t = z3();
    let r1 = cell(&t, &[1], "(r1)");
    let r2 = cell(&t, &[1], "(r2)");
    assert!(t.remove_comp(d(1), r1, r2).is_some());
    assert!(validate_strict(&t).count("comp-total") > 0);
}

#[test]
fn table_json_round_trip() {
    let t = build_product(&[partial_isometry(), pair_groupoid(2)], &TruncationConfig::new(2, 2, 1)).unwrap();
    let back = StrictCategoryTable::from_json(&t.to_json()).unwrap();
    assert_eq!(back.to_json(), t.to_json());
    assert!(validate_strict(&back).is_ok());
}

fn seed_assignment(seed: u64) -> (GeneratorAssignment, TruncationConfig) {
    let cfg = TruncationConfig::new(2, 2, 3);
    let p = seed_presentation(cfg);
    let t = Arc::new(build_product(&[pair_groupoid(2), partial_isometry()], &TruncationConfig::new(2, 2, 1)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (GeneratorAssignment::random(&p, t, &mut rng).expect("assignment exists"), cfg)
}

#[test]
fn evaluation_is_homomorphic_on_the_universe() {
    for seed in 0..5 {
        let (a, cfg) = seed_assignment(seed);
        let mut store = TermStore::new(a.source().clone());
        let u = enumerate_free_magma(&mut store, &cfg).unwrap();
        let r = check_universal_factorization(&a, &mut store, &u);
        assert!(r.is_ok(), "{:?}", r.violations);
        let sweeps = extend_by_sweeps(&store, &u, &a);
        for &t in u.terms() {
            assert_eq!(Some(&eval_term(&store, t, &a).unwrap()), sweeps.get(&t));
        }
    }
}

#[test]
fn assignment_must_respect_faces() {
    let cfg = TruncationConfig::new(2, 2, 1);
    let p = seed_presentation(cfg);
    let t = Arc::new(build_product(&[pair_groupoid(2), pair_groupoid(2)], &cfg).unwrap());
    let q = t.underlying().clone();
    let obj = q.find(DirectionSet::EMPTY, "(o1,o1)").unwrap();
    let loop1 = q.find(DirectionSet::from_labels(&[1]).unwrap(), "(o1>o1,o1)").unwrap();
    let loop2 = q.find(DirectionSet::from_labels(&[2]).unwrap(), "(o1,o1>o1)").unwrap();
    let entries = p.cell_ids().map(|c| {
        let img = match p.dirs(c).len() {
            0 => obj,
            _ if p.dirs(c).contains(d(1)) => loop1,
            _ => loop2,
        };
        (c, img)
    });
    let ok = SetMorphism::new(p.clone(), q.clone(), entries).unwrap();
    assert!(GeneratorAssignment::new(ok, t.clone()).is_ok());

    // f: a -> b sent to a loop while a and b go to different objects
    let other = q.find(DirectionSet::EMPTY, "(o2,o1)").unwrap();
    let b = p.find(DirectionSet::EMPTY, "b").unwrap();
    let entries = p.cell_ids().map(|c| {
        let img = match p.dirs(c).len() {
            0 if c == b => other,
            0 => obj,
            _ if p.dirs(c).contains(d(1)) => loop1,
            _ => loop2,
        };
        (c, img)
    });
    let bad = SetMorphism::new(p.clone(), q, entries).unwrap();
    assert!(matches!(GeneratorAssignment::new(bad, t), Err(StrictError::Assignment(_))));
}

#[test]
fn contraction_cells_are_not_evaluated_strictly() {
    let (a, _) = seed_assignment(1);
    let mut store = TermStore::new(a.source().clone());
    struct Yes;
    impl omega_cube::term::PiCertificate for Yes {
        fn certifies(&self, _: omega_cube::TermId, _: omega_cube::TermId) -> bool {
            true
        }
    }
    let k = store
        .parse("kappa[2](gen(f),comp[1](gen(f),id[1](gen(a))))", Mode::Contraction, &Yes)
        .unwrap();
    assert!(matches!(eval_term(&store, k, &a), Err(StrictError::Kappa(_))));
    let f = store.parse("gen(f)", Mode::Magma, &NoCertificate).unwrap();
    assert!(eval_term(&store, f, &a).is_ok());
}
