//! `omega-cube`: build, check and compare truncated involutive cubical
//! ω-categories from the command line.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use omega_cube::congruence::{CongruenceSession, RelationMode, Verdict};
use omega_cube::contraction::{build_free_contraction, validate_contraction};
use omega_cube::models::{build_product, oracle_compare, seed_presentation, word_separator, InvolutiveOneCategory};
use omega_cube::presentation::{validate_cubical_axioms, validate_quiver};
use omega_cube::strict::{eval_term, GeneratorAssignment, Separator, StrictCategoryTable};
use omega_cube::suite::{self, certify_table};
use omega_cube::term::{enumerate_free_magma, NoCertificate};
use omega_cube::{Mode, Presentation, Report, SetMorphism, TermStore, TruncationConfig};

const DEFAULT_SEED: u64 = 2024;
/// Violations printed in the human summary.
const SHOWN: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "omega-cube", version, about = "Truncated involutive cubical ω-categories")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Highest cell dimension.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    /// Number of directions, labelled 1..=dirs.
    #[arg(long, global = true)]
    dirs: Option<u32>,
    /// Bound on term size minus one.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Saturation rounds.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Where to write the output: the table for `product`, the contraction for
    /// `contract`, the JSON report otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a presentation, a strict table or an involutive category.
    Validate { file: PathBuf },
    /// Count the free magma terms of a presentation (default: the seed).
    Enumerate { presentation: Option<PathBuf> },
    /// Decide whether two terms are equal in the free category.
    Decide {
        #[arg(long)]
        t1: String,
        #[arg(long)]
        t2: String,
        /// Presentation file (default: the seed).
        #[arg(long)]
        presentation: Option<PathBuf>,
        /// Strict table used as a separator, with `--assign`.
        #[arg(long, requires = "assign")]
        separator: Option<PathBuf>,
        /// Generator assignment into the separator table.
        #[arg(long)]
        assign: Option<PathBuf>,
        /// Also try the truncated word categories in each direction.
        #[arg(long)]
        words: bool,
    },
    /// Build and certify the product of involutive categories.
    Product {
        #[arg(required = true)]
        categories: Vec<PathBuf>,
    },
    /// Build and check the free contraction of a presentation (default: the seed).
    Contract { presentation: Option<PathBuf> },
    /// Evaluate a term in a strict table under a generator assignment.
    Eval {
        table: PathBuf,
        #[arg(long)]
        assign: PathBuf,
        #[arg(long)]
        term: String,
        /// Presentation file (default: the seed).
        #[arg(long)]
        presentation: Option<PathBuf>,
    },
    /// Compare congruence verdicts with normal forms in dimension one.
    Oracle { quiver: Option<PathBuf> },
    /// Run the seeded end-to-end suite.
    CheckAll,
}

/// What every command hands back: a report and whether its checks passed.
#[derive(Serialize)]
struct Outcome {
    command: &'static str,
    config: Value,
    passed: bool,
    result: Value,
    #[serde(skip)]
    summary: Vec<String>,
    #[serde(skip)]
    artifact: Option<String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Opts {
    fn config(&self, base: TruncationConfig) -> Result<TruncationConfig> {
        let mut c = base;
        if let Some(v) = self.max_dim {
            c.max_dim = v;
        }
        if let Some(v) = self.dirs {
            c.dir_universe = v;
        }
        if let Some(v) = self.depth {
            c.term_depth = v;
        }
        if let Some(v) = self.budget {
            c.saturation_budget = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn config_json(&self, c: &TruncationConfig) -> Value {
        json!({ "truncation": c, "seed": self.seed })
    }

    /// A presentation file, or the seed presentation, under the resolved config.
    fn presentation(&self, path: Option<&Path>) -> Result<(Arc<Presentation>, TruncationConfig)> {
        match path {
            Some(p) => {
                let mut pres = Presentation::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
                let cfg = self.config(*pres.config())?;
                pres.set_config(cfg);
                Ok((Arc::new(pres), cfg))
            }
            None => {
                let cfg = self.config(TruncationConfig::default())?;
                Ok((seed_presentation(cfg), cfg))
            }
        }
    }
}

fn report_json(r: &Report) -> Value {
    json!({ "checked": r.checked, "violations": r.violations })
}

fn report_lines(label: &str, r: &Report) -> Vec<String> {
    let mut out = vec![format!("{label}: {} checked, {} violations", r.checked, r.violations.len())];
    for v in r.violations.iter().take(SHOWN) {
        out.push(format!("  [{}] {}: {}", v.check, v.subject, v.detail));
    }
    out
}

fn validate(opts: &Opts, file: &Path) -> Result<Outcome> {
    let text = read(file)?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    let is = |k: &str| doc.get(k).is_some();
    let (kind, mut r, cfg) = if is("arrows") {
        let c = InvolutiveOneCategory::from_json(&text)?;
        ("category", c.validate(), None)
    } else if is("refl") || is("dual") || is("comp") {
        let t = StrictCategoryTable::from_json(&text)?;
        let cfg = *t.underlying().config();
        ("strict table", certify_table(&t), Some(cfg))
    } else {
        let p = Presentation::from_json(&text)?;
        let cfg = *p.config();
        let mut r = validate_quiver(&p);
        r.absorb(validate_cubical_axioms(&p));
        ("presentation", r, Some(cfg))
    };
    r.normalize();
    Ok(Outcome {
        command: "validate",
        config: cfg.map(|c| opts.config_json(&c)).unwrap_or(json!({ "seed": opts.seed })),
        passed: r.is_ok(),
        result: json!({ "kind": kind, "report": report_json(&r) }),
        summary: report_lines(kind, &r),
        artifact: None,
    })
}

fn enumerate(opts: &Opts, path: Option<&Path>) -> Result<Outcome> {
    let (p, cfg) = opts.presentation(path)?;
    let mut store = TermStore::new(p);
    let u = enumerate_free_magma(&mut store, &cfg)?;
    let counts = u.counts();
    let mut summary = vec![format!("{} terms{}", u.len(), if u.truncated { " (truncated)" } else { "" })];
    summary.extend(counts.iter().map(|(k, n)| format!("  {k}: {n}")));
    let terms: Vec<String> = u.terms().iter().map(|&t| store.display(t)).collect();
    Ok(Outcome {
        command: "enumerate",
        config: opts.config_json(&cfg),
        passed: !u.truncated,
        result: json!({ "total": u.len(), "truncated": u.truncated, "counts": counts, "terms": terms }),
        summary,
        artifact: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn decide(
    opts: &Opts,
    t1: &str,
    t2: &str,
    path: Option<&Path>,
    separator: Option<&Path>,
    assign: Option<&Path>,
    words: bool,
) -> Result<Outcome> {
    let (p, cfg) = opts.presentation(path)?;
    let mut store = TermStore::new(p.clone());
    let u = enumerate_free_magma(&mut store, &cfg)?;
    let x = store.parse(t1, Mode::Magma, &NoCertificate).context("parsing --t1")?;
    let y = store.parse(t2, Mode::Magma, &NoCertificate).context("parsing --t2")?;
    let mut s = CongruenceSession::from_universe(store, &u, RelationMode::Strict)?;
    s.add_term(x)?;
    s.add_term(y)?;
    let stats = s.saturate(cfg.saturation_budget)?;

    let mut seps: Vec<Separator> = Vec::new();
    if let (Some(table), Some(map)) = (separator, assign) {
        let t = Arc::new(StrictCategoryTable::from_json(&read(table)?)?);
        let f = SetMorphism::from_json(p.clone(), t.underlying().clone(), &read(map)?)?;
        seps.push(Separator {
            name: table.display().to_string(),
            assignment: GeneratorAssignment::new(f, t)?,
        });
    }
    let mut skipped = Vec::new();
    if words {
        let len = (cfg.max_size() as usize).div_ceil(2);
        for d in cfg.universe().iter() {
            match word_separator(&p, d, len) {
                Ok(sep) => seps.push(sep),
                Err(e) => skipped.push(format!("words in direction {d}: {e}")),
            }
        }
    }
    let dec = s.decide_equal(x, y, &seps)?;
    let mut summary = vec![
        dec.left.clone(),
        dec.right.clone(),
        format!("verdict: {:?}", dec.verdict),
    ];
    summary.extend(skipped.iter().map(|s| format!("  skipped {s}")));
    Ok(Outcome {
        command: "decide",
        config: opts.config_json(&cfg),
        passed: dec.verdict != Verdict::Unknown,
        result: json!({ "decision": dec, "saturation": stats, "separators_skipped": skipped }),
        summary,
        artifact: None,
    })
}

fn product(opts: &Opts, files: &[PathBuf]) -> Result<Outcome> {
    let family = files
        .iter()
        .map(|f| {
            InvolutiveOneCategory::from_json(&read(f)?).with_context(|| format!("parsing {}", f.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = family.len() as u32;
    let base = TruncationConfig {
        max_dim: k.min(2) as usize,
        dir_universe: k,
        term_depth: 1,
        ..Default::default()
    };
    let cfg = opts.config(base)?;
    let t = build_product(&family, &cfg)?;
    let mut r = certify_table(&t);
    r.normalize();
    let mut summary = vec![format!(
        "{} cells, {} compositions",
        t.underlying().len(),
        t.comp_len()
    )];
    summary.extend(report_lines("certification", &r));
    Ok(Outcome {
        command: "product",
        config: opts.config_json(&cfg),
        passed: r.is_ok(),
        result: json!({
            "factors": family.iter().map(|f| f.name()).collect::<Vec<_>>(),
            "cells": t.underlying().len(),
            "compositions": t.comp_len(),
            "report": report_json(&r),
        }),
        summary,
        artifact: Some(t.to_json()),
    })
}

fn contract(opts: &Opts, path: Option<&Path>) -> Result<Outcome> {
    let (p, cfg) = opts.presentation(path)?;
    let mut cd = build_free_contraction(p, &cfg)?;
    let mut r = validate_contraction(&mut cd)?;
    r.normalize();
    let flags_ok = cd.stages.iter().all(|s| !s.partial && s.stable);
    let mut summary: Vec<String> = cd
        .stages
        .iter()
        .map(|s| {
            format!(
                "stage {}: {} terms, {} new κ-cells, {} classes{}",
                s.level,
                s.terms,
                s.new_kappa_cells,
                s.classes,
                if s.partial { " (partial)" } else { "" }
            )
        })
        .collect();
    summary.extend(report_lines("contraction", &r));
    let doc = cd.to_doc();
    Ok(Outcome {
        command: "contract",
        config: opts.config_json(&cfg),
        passed: r.is_ok() && flags_ok,
        result: json!({ "stages": doc.stages, "kappa_entries": doc.kappa.len(), "report": report_json(&r) }),
        summary,
        artifact: Some(serde_json::to_string_pretty(&doc)?),
    })
}

fn eval(opts: &Opts, table: &Path, assign: &Path, term: &str, path: Option<&Path>) -> Result<Outcome> {
    let t = Arc::new(StrictCategoryTable::from_json(&read(table)?)?);
    let (p, cfg) = opts.presentation(path)?;
    let f = SetMorphism::from_json(p.clone(), t.underlying().clone(), &read(assign)?)?;
    let a = GeneratorAssignment::new(f, t.clone())?;
    let mut store = TermStore::new(p);
    let x = store.parse(term, Mode::Magma, &NoCertificate).context("parsing --term")?;
    let v = eval_term(&store, x, &a)?;
    let value = t.underlying().qualified(v);
    Ok(Outcome {
        command: "eval",
        config: opts.config_json(&cfg),
        passed: true,
        result: json!({ "term": store.display(x), "value": value }),
        summary: vec![format!("{} ↦ {value}", store.display(x))],
        artifact: None,
    })
}

fn oracle(opts: &Opts, path: Option<&Path>) -> Result<Outcome> {
    let (p, cfg) = match path {
        Some(_) => opts.presentation(path)?,
        None => {
            let cfg = opts.config(suite::oracle_config())?;
            (omega_cube::models::quiver_presentation(cfg), cfg)
        }
    };
    if cfg.max_dim != 1 {
        bail!("the oracle works in dimension one; use --max-dim 1");
    }
    let r = oracle_compare(&p, &cfg, &[])?;
    let mut summary = vec![
        format!("{} terms, {} pairs", r.terms, r.pairs),
        format!("equal {}, not equal {}, unknown {}", r.equal, r.not_equal, r.unknown),
        format!(
            "contradictions: {} equal with distinct forms, {} not equal with equal forms",
            r.equal_with_distinct_forms, r.not_equal_with_equal_forms
        ),
    ];
    summary.extend(r.examples.iter().take(SHOWN).map(|e| format!("  {} vs {}", e.left, e.right)));
    Ok(Outcome {
        command: "oracle",
        config: opts.config_json(&cfg),
        passed: r.is_consistent(),
        result: serde_json::to_value(&r)?,
        summary,
        artifact: None,
    })
}

fn check_all(opts: &Opts) -> Result<Outcome> {
    let rep = suite::check_all(opts.seed)?;
    let summary = rep
        .criteria
        .iter()
        .map(|c| {
            format!(
                "{} criterion {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name
            )
        })
        .collect();
    Ok(Outcome {
        command: "check-all",
        config: json!({ "seed": opts.seed }),
        passed: rep.passed,
        result: serde_json::to_value(&rep)?,
        summary,
        artifact: None,
    })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let o = &cli.opts;
    match &cli.command {
        Command::Validate { file } => validate(o, file),
        Command::Enumerate { presentation } => enumerate(o, presentation.as_deref()),
        Command::Decide {
            t1,
            t2,
            presentation,
            separator,
            assign,
            words,
        } => decide(o, t1, t2, presentation.as_deref(), separator.as_deref(), assign.as_deref(), *words),
        Command::Product { categories } => product(o, categories),
        Command::Contract { presentation } => contract(o, presentation.as_deref()),
        Command::Eval {
            table,
            assign,
            term,
            presentation,
        } => eval(o, table, assign, term, presentation.as_deref()),
        Command::Oracle { quiver } => oracle(o, quiver.as_deref()),
        Command::CheckAll => check_all(o),
    }
}

fn emit(cli: &Cli, out: &Outcome) -> Result<()> {
    let report = serde_json::to_string_pretty(out)? + "\n";
    match (&cli.opts.out, &out.artifact) {
        (Some(path), Some(artifact)) => fs::write(path, artifact.clone() + "\n"),
        (Some(path), None) => fs::write(path, &report),
        (None, _) => Ok(()),
    }
    .with_context(|| "writing --out")?;
    if cli.opts.json {
        print!("{report}");
    } else {
        for l in &out.summary {
            println!("{l}");
        }
        println!("seed {}: {}", cli.opts.seed, if out.passed { "ok" } else { "FAILED" });
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("OMEGA_CUBE_THREADS") {
        let n: usize = v.parse().with_context(|| format!("OMEGA_CUBE_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|_| run(&cli)).and_then(|o| emit(&cli, &o).map(|_| o.passed));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
