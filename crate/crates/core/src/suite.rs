//! The seeded end-to-end check suite behind `check-all`.
//!
//! Every criterion is a pure function of the seed, and the report carries
//! no timings, so two runs with one seed serialize to identical bytes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::congruence::{CongruenceSession, RelationMode, Verdict};
use crate::contraction::{
    build_free_contraction, check_naturality, free_on_morphism, validate_contraction,
    validate_contraction_morphism,
};
use crate::models::{
    build_product, cyclic_group, loop_presentation, oracle_compare, pair_groupoid,
    partial_isometry, quiver_presentation, relations, seed_presentation, InvolutiveOneCategory,
};
use crate::presentation::{random_morphism, validate_cubical_axioms, validate_quiver, TruncationConfig};
use crate::report::{Report, Violation};
use crate::strict::{
    check_universal_factorization, validate_involutive, validate_strict, Evaluator,
    GeneratorAssignment, StrictCategoryTable,
};
use crate::term::{check_cubical_on_terms, enumerate_free_magma, TermStore};
use crate::Error;

/// Violations kept per criterion in the report.
pub const MAX_LISTED: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, Value>,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Outcome {
    metrics: BTreeMap<String, Value>,
    report: Report,
    extra_ok: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            metrics: BTreeMap::new(),
            report: Report::new(),
            extra_ok: true,
        }
    }

    fn metric(&mut self, key: &str, v: impl Serialize) {
        self.metrics.insert(key.to_string(), serde_json::to_value(v).expect("metric serializes"));
    }

    fn finish(mut self, id: u32, name: &str) -> CriterionOutcome {
        self.report.normalize();
        let total = self.report.violations.len();
        self.metric("checked", self.report.checked);
        self.metric("violations", total);
        self.report.violations.truncate(MAX_LISTED);
        CriterionOutcome {
            id,
            name: name.to_string(),
            passed: total == 0 && self.extra_ok,
            metrics: self.metrics,
            violations: self.report.violations,
        }
    }
}

fn rng_for(seed: u64, id: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(id as u64 + 1)))
}

/// The product runs: two factors up to dimension 2 and three factors up
/// to dimension 3.
pub fn product_runs() -> Vec<(Vec<InvolutiveOneCategory>, TruncationConfig)> {
    vec![
        (vec![partial_isometry(), relations(2)], TruncationConfig::new(2, 2, 1)),
        (
            vec![relations(2), partial_isometry(), pair_groupoid(2)],
            TruncationConfig::new(3, 3, 1),
        ),
    ]
}

/// Full certification of one product table.
pub fn certify_table(t: &StrictCategoryTable) -> Report {
    let mut r = validate_quiver(t.underlying());
    r.absorb(validate_cubical_axioms(t.underlying()));
    r.absorb(validate_strict(t));
    r.absorb(validate_involutive(t));
    r
}

pub fn criterion_products() -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let mut runs = Vec::new();
    for (family, cfg) in product_runs() {
        let t = build_product(&family, &cfg)?;
        let r = certify_table(&t);
        runs.push(json!({
            "factors": family.iter().map(|f| f.name().to_string()).collect::<Vec<_>>(),
            "config": cfg,
            "cells": t.underlying().len(),
            "compositions": t.comp_len(),
            "checked": r.checked,
            "violations": r.violations.len(),
        }));
        o.report.absorb(r);
    }
    o.metric("runs", runs);
    Ok(o.finish(1, "product certification"))
}

pub fn seed_config() -> TruncationConfig {
    TruncationConfig::new(2, 2, 3)
}

pub fn criterion_seed_identities() -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = seed_config();
    let p = seed_presentation(cfg);
    let mut store = TermStore::new(p);
    let u = enumerate_free_magma(&mut store, &cfg)?;
    o.report = check_cubical_on_terms(&mut store, &u);
    let mut depth_one: BTreeMap<String, usize> = BTreeMap::new();
    for (dirs, terms) in u.levels() {
        let n = terms.iter().filter(|&&t| store.size(t) <= 2).count();
        depth_one.insert(crate::presentation::level_key(dirs), n);
    }
    o.metric("config", cfg);
    o.metric("terms", u.counts());
    o.metric("depth_one_terms", depth_one);
    o.metric("dim_two_terms", u.terms().iter().filter(|&&t| store.dim(t) >= 2).count());
    Ok(o.finish(2, "seed presentation cubical identities"))
}

/// Product targets for the seed presentation, each with two factors.
pub fn seed_targets() -> Result<Vec<Arc<StrictCategoryTable>>, Error> {
    let cfg = TruncationConfig::new(2, 2, 1);
    let families = [
        vec![partial_isometry(), pair_groupoid(2)],
        vec![relations(2), partial_isometry()],
        vec![pair_groupoid(3), cyclic_group(4)],
    ];
    let mut out = Vec::new();
    for f in families {
        out.push(Arc::new(build_product(&f, &cfg)?));
    }
    Ok(out)
}

/// A random assignment into one of `targets`; retries across targets.
pub fn random_assignment<R: Rng>(
    source: &Arc<crate::Presentation>,
    targets: &[Arc<StrictCategoryTable>],
    rng: &mut R,
) -> Option<GeneratorAssignment> {
    for _ in 0..32 {
        let t = &targets[rng.gen_range(0..targets.len())];
        if let Some(a) = GeneratorAssignment::random(source, t.clone(), rng) {
            return Some(a);
        }
    }
    None
}

pub fn provability_config() -> TruncationConfig {
    TruncationConfig::new(2, 2, 4)
}

pub const SOUNDNESS_ASSIGNMENTS: usize = 100;

pub fn criterion_provability(seed: u64) -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = provability_config();
    let p = seed_presentation(cfg);
    let mut store = TermStore::new(p.clone());
    let u = enumerate_free_magma(&mut store, &cfg)?;
    let mut s = CongruenceSession::from_universe(store, &u, RelationMode::Strict)?;
    let stats = s.saturate(cfg.saturation_budget)?;
    let instances = s.instances().to_vec();
    let mut equal = 0usize;
    for inst in &instances {
        let d = s.decide_equal(inst.left, inst.right, &[])?;
        if d.verdict == Verdict::Equal {
            equal += 1;
        }
        o.report.expect(d.verdict == Verdict::Equal, "provability", || {
            format!("{} : {} = {}", inst.family, s.store().display(inst.left), s.store().display(inst.right))
        }, || format!("verdict {:?}", d.verdict));
    }
    o.metric("config", cfg);
    o.metric("universe", u.len());
    o.extra_ok &= u.len() <= 500;
    o.metric("instances", instances.len());
    o.metric("equal", equal);
    o.metric("saturation", stats);

    // soundness: classes never split under evaluation in a strict target
    let targets = seed_targets()?;
    let mut rng = rng_for(seed, 3);
    let classes = {
        let mut m: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for &t in u.terms() {
            m.entry(s.class_of(t).expect("registered")).or_default().push(t);
        }
        m
    };
    let mut done = 0usize;
    for i in 0..SOUNDNESS_ASSIGNMENTS {
        let Some(a) = random_assignment(&p, &targets, &mut rng) else {
            o.report.push("assignment", format!("#{i}"), "no assignment found");
            continue;
        };
        done += 1;
        let mut ev = Evaluator::new(&a);
        for members in classes.values() {
            let vals: Vec<_> = members.iter().map(|&t| ev.eval(s.store(), t).ok()).collect();
            let first = vals[0];
            let ok = first.is_some() && vals.iter().all(|v| *v == first);
            o.report.expect(ok, "soundness", || {
                format!("assignment #{i}, class of {}", s.store().display(members[0]))
            }, || "members evaluate differently".into());
        }
    }
    o.metric("assignments", done);
    Ok(o.finish(3, "relation provability and soundness"))
}

pub fn oracle_config() -> TruncationConfig {
    TruncationConfig::new(1, 1, 5)
}

pub fn criterion_oracle() -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = oracle_config();
    let p = quiver_presentation(cfg);
    let r = oracle_compare(&p, &cfg, &[])?;
    o.report.checked = r.pairs;
    for e in &r.examples {
        o.report.push(
            serde_json::to_value(&e.kind).unwrap().as_str().unwrap_or("discrepancy"),
            format!("{} vs {}", e.left, e.right),
            format!("forms {} vs {}", e.left_form, e.right_form),
        );
    }
    o.extra_ok &= r.is_consistent() && r.unknown == 0;
    o.metric("config", cfg);
    o.metric("report", &r);
    Ok(o.finish(4, "dimension-one oracle"))
}

pub fn contraction_config() -> TruncationConfig {
    TruncationConfig::new(2, 2, 2)
}

pub fn criterion_contraction() -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = contraction_config();
    let p = seed_presentation(cfg);
    let mut cd = build_free_contraction(p, &cfg)?;
    o.report = validate_contraction(&mut cd)?;
    let families = ["domain", "faces", "transverse-faces", "projection", "degeneracy"];
    let counts: BTreeMap<&str, usize> = families.iter().map(|f| (*f, o.report.count(f))).collect();
    o.extra_ok &= cd.stages.iter().all(|s| !s.partial && s.stable);
    o.metric("config", cfg);
    o.metric("kappa_entries", cd.kappa_table().len());
    o.metric("stages", &cd.stages);
    o.metric("violations_by_family", counts);
    Ok(o.finish(5, "free contraction invariants"))
}

pub const FACTORIZATION_ASSIGNMENTS: usize = 20;

pub fn criterion_factorization(seed: u64) -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = seed_config();
    let p = seed_presentation(cfg);
    let mut store = TermStore::new(p.clone());
    let u = enumerate_free_magma(&mut store, &cfg)?;
    let targets = seed_targets()?;
    let mut rng = rng_for(seed, 6);
    let mut done = 0usize;
    for i in 0..FACTORIZATION_ASSIGNMENTS {
        let Some(a) = random_assignment(&p, &targets, &mut rng) else {
            o.report.push("assignment", format!("#{i}"), "no assignment found");
            continue;
        };
        done += 1;
        let mut r = check_universal_factorization(&a, &mut store, &u);
        for v in &mut r.violations {
            v.subject = format!("assignment #{i}: {}", v.subject);
        }
        o.report.absorb(r);
    }
    o.metric("config", cfg);
    o.metric("assignments", done);
    o.extra_ok &= done >= FACTORIZATION_ASSIGNMENTS;
    Ok(o.finish(6, "universal factorization"))
}

pub const NATURALITY_MORPHISMS: usize = 10;

pub fn criterion_naturality(seed: u64) -> Result<CriterionOutcome, Error> {
    let mut o = Outcome::new();
    let cfg = TruncationConfig::new(2, 2, 2);
    let p = seed_presentation(cfg);
    let q = loop_presentation(cfg);
    let source = build_free_contraction(p.clone(), &cfg)?;
    let mut target = build_free_contraction(q.clone(), &cfg)?;
    let mut rng = rng_for(seed, 7);
    let mut done = 0usize;
    for i in 0..NATURALITY_MORPHISMS {
        let Some(f) = random_morphism(&p, &q, &mut rng) else {
            o.report.push("morphism", format!("#{i}"), "no morphism found");
            continue;
        };
        let m = match free_on_morphism(&f, &source, &mut target) {
            Ok(m) => m,
            Err(e) => {
                o.report.push("free-functor", format!("#{i}"), e.to_string());
                continue;
            }
        };
        done += 1;
        let mut r = check_naturality(&f, &source, &target, &m)?;
        r.absorb(validate_contraction_morphism(&m, &source, &mut target)?);
        for v in &mut r.violations {
            v.subject = format!("morphism #{i}: {}", v.subject);
        }
        o.report.absorb(r);
    }
    o.metric("config", cfg);
    o.metric("morphisms", done);
    o.extra_ok &= done >= NATURALITY_MORPHISMS;
    Ok(o.finish(7, "unit naturality"))
}

/// Runs criteria 1 to 7.
pub fn check_all(seed: u64) -> Result<SuiteReport, Error> {
    let criteria = vec![
        criterion_products()?,
        criterion_seed_identities()?,
        criterion_provability(seed)?,
        criterion_oracle()?,
        criterion_contraction()?,
        criterion_factorization(seed)?,
        criterion_naturality(seed)?,
    ];
    Ok(SuiteReport {
        seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    })
}
