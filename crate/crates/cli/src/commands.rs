//! Subcommand drivers.  Each returns the inputs it read and an [`Outcome`];
//! nothing is printed until the whole report exists.

use pisupport::support::{default_tower, in_support_by_rank};
use pisupport::{
    axiom_suite, fingerprint, jordan_partition, load_corpus, phi_collapse, pi_operator, restrict_along_pi,
    tate_nonzero, BoundedComplex, NilTuple, Recipe, RepExpr, SamplingPlan,
};
use serde_json::{json, Value};

use crate::config::{RunConfig, Verify};
use crate::inputs;
use crate::report::{CliError, InputRef, Outcome, Table};

pub type Run = Result<(RunConfig, Vec<InputRef>, Outcome), CliError>;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn plan_for(rep: &RepExpr, cfg: &RunConfig, r: usize) -> Result<SamplingPlan, CliError> {
    Ok(SamplingPlan::for_module(rep, cfg.p, r, cfg.samples, cfg.seed)?.with_tower(cfg.tower.clone()))
}

/// Verdict at one tuple, with the cross-checks of `--verify cross-oracle`.
fn verdict(rep: &RepExpr, t: &NilTuple, recipe: Recipe, verify: Verify) -> Result<Value, CliError> {
    let op = pi_operator(rep, t, recipe)?;
    let jt = jordan_partition(&op.theta, t.p())?;
    let mut v = json!({
        "field": t.field().name(),
        "r": t.r(),
        "zero_tuple": t.is_zero(),
        "recipe": recipe,
        "jordan_type": jt.to_string(),
        "multiplicities": jt.mult,
        "in_support": jt.is_stable_nonzero(),
    });
    if verify == Verify::CrossOracle {
        let other = match recipe {
            Recipe::Ur => Recipe::Sum,
            Recipe::Sum => Recipe::Ur,
        };
        let other_jt = jordan_partition(&pi_operator(rep, t, other)?.theta, t.p())?;
        let by_rank = in_support_by_rank(&op.theta, t.p());
        if other_jt.is_stable_nonzero() != jt.is_stable_nonzero() || by_rank != jt.is_stable_nonzero() {
            return Err(CliError::assertion(format!(
                "oracles disagree at {}: {} gives {jt}, {} gives {other_jt}, rank criterion says {by_rank}",
                serde_json::to_string(&t.to_json()).unwrap_or_default(),
                recipe.name(),
                other.name(),
            )));
        }
        v["cross_oracle"] = json!({ "other_recipe_jordan_type": other_jt.to_string(), "rank_in_support": by_rank });
    }
    Ok(v)
}

fn verdict_row(name: &str, index: usize, v: &Value) -> Vec<String> {
    vec![
        name.to_string(),
        v["r"].to_string(),
        index.to_string(),
        v["field"].as_str().unwrap_or_default().to_string(),
        v["zero_tuple"].to_string(),
        v["jordan_type"].as_str().unwrap_or_default().to_string(),
        v["in_support"].to_string(),
    ]
}

const VERDICT_HEADER: [&str; 7] = ["module", "r", "index", "field", "zero_tuple", "jordan_type", "in_support"];

pub fn jordan(cfg: &RunConfig, module: &str, tuple: &str, recipe: Recipe) -> Run {
    let (ml, tl) = (inputs::load("module", module, &cfg.corpus)?, inputs::load("tuple", tuple, &cfg.corpus)?);
    let rep = inputs::module(&ml)?;
    let t = inputs::tuple(&tl)?;
    let cfg = cfg.fit_p(Some(t.p()))?;
    let v = verdict(&rep, &t, recipe, cfg.verify)?;
    let mut table = Table::new(&VERDICT_HEADER);
    table.push(verdict_row(&ml.name, 0, &v));
    let result = json!({ "module": ml.name, "dim": rep.dim(), "verdict": v });
    Ok((cfg, vec![ml.input, tl.input], Outcome { result, table, failed: None }))
}

pub fn support(cfg: &RunConfig, module: &str, tuple: Option<&str>) -> Run {
    let ml = inputs::load("module", module, &cfg.corpus)?;
    let rep = inputs::module(&ml)?;
    let mut table = Table::new(&VERDICT_HEADER);
    if let Some(tuple) = tuple {
        let tl = inputs::load("tuple", tuple, &cfg.corpus)?;
        let t = inputs::tuple(&tl)?;
        let cfg = cfg.fit_p(Some(t.p()))?;
        let v = verdict(&rep, &t, Recipe::Ur, cfg.verify)?;
        table.push(verdict_row(&ml.name, 0, &v));
        let result = json!({ "module": ml.name, "dim": rep.dim(), "verdicts": [v] });
        return Ok((cfg, vec![ml.input, tl.input], Outcome { result, table, failed: None }));
    }
    let cfg = cfg.fit_p(rep.characteristic())?;
    let mut runs = Vec::new();
    for r in cfg.rs() {
        let tuples = plan_for(&rep, &cfg, r)?.sample()?;
        let mut verdicts = Vec::new();
        let (mut nonzero, mut inside) = (0, 0);
        for (i, t) in tuples.iter().enumerate() {
            let v = verdict(&rep, t, Recipe::Ur, cfg.verify)?;
            if !t.is_zero() {
                nonzero += 1;
                inside += v["in_support"].as_bool().unwrap_or(false) as usize;
            }
            table.push(verdict_row(&ml.name, i, &v));
            verdicts.push(v);
        }
        runs.push(json!({
            "r": r,
            "summary": { "samples": tuples.len(), "nonzero_tuples": nonzero, "in_support_nonzero": inside },
            "verdicts": verdicts,
        }));
    }
    let result = json!({ "module": ml.name, "dim": rep.dim(), "runs": runs });
    Ok((cfg, vec![ml.input], Outcome { result, table, failed: None }))
}

pub fn fingerprint_cmd(cfg: &RunConfig, module: &str) -> Run {
    let ml = inputs::load("module", module, &cfg.corpus)?;
    let rep = inputs::module(&ml)?;
    let cfg = cfg.fit_p(rep.characteristic())?;
    let mut table = Table::new(&[
        "module",
        "r",
        "index",
        "field",
        "zero_tuple",
        "jordan_type",
        "in_support",
        "sum_jordan_type",
        "sum_in_support",
        "scaled_in_support",
        "conjugated_in_support",
    ]);
    let mut prints = Vec::new();
    let mut failed = None;
    for r in cfg.rs() {
        let fp = fingerprint(&rep, &plan_for(&rep, &cfg, r)?)?;
        for e in &fp.entries {
            table.push(vec![
                ml.name.clone(),
                r.to_string(),
                e.index.to_string(),
                e.verdict.field.clone(),
                e.verdict.zero_tuple.to_string(),
                e.verdict.jordan_type.clone(),
                e.verdict.stable.to_string(),
                e.sum_jordan_type.clone(),
                e.sum_stable.to_string(),
                e.scaled_stable.to_string(),
                e.conjugated_stable.to_string(),
            ]);
        }
        let s = &fp.summary;
        if cfg.verify == Verify::CrossOracle && failed.is_none() && (s.recipe_disagreements > 0 || s.orbit_violations > 0) {
            failed = Some(format!(
                "r={r}: {} recipe disagreements, {} orbit violations",
                s.recipe_disagreements, s.orbit_violations
            ));
        }
        prints.push(to_value(&fp));
    }
    let result = json!({ "module": ml.name, "dim": rep.dim(), "fingerprints": prints });
    Ok((cfg, vec![ml.input], Outcome { result, table, failed }))
}

pub fn axioms(cfg: &RunConfig) -> Run {
    let corpus = load_corpus(&cfg.corpus)?;
    let mut table = Table::new(&["r", "check", "checked", "violations"]);
    let mut reports = Vec::new();
    let mut violations = 0;
    for r in cfg.rs() {
        let rep = axiom_suite(&corpus, cfg.p, r, cfg.samples, cfg.seed, Some(cfg.tower.clone()))?;
        for (name, c) in &rep.checks {
            table.push(vec![r.to_string(), name.clone(), c.checked.to_string(), c.violations.to_string()]);
        }
        violations += rep.total_violations();
        reports.push(to_value(&rep));
    }
    let failed = (violations > 0).then(|| format!("{violations} axiom violations"));
    let result = json!({ "modules": corpus.len(), "total_violations": violations, "reports": reports });
    Ok((cfg.clone(), Vec::new(), Outcome { result, table, failed }))
}

/// Layer whose group fixes the sampling plan for a complex.
fn plan_layer(c: &BoundedComplex) -> &RepExpr {
    c.layers
        .iter()
        .find(|l| l.required_tag().is_some() || matches!(l.group_size(), Ok(Some(_))))
        .unwrap_or(&c.layers[0])
}

fn complex_verdict(c: &BoundedComplex, t: &NilTuple, verify: Verify) -> Result<Value, CliError> {
    let lc = restrict_along_pi(c, t)?;
    let stable = phi_collapse(&lc)?;
    let inside = !stable.is_zero();
    let mut v = json!({
        "field": t.field().name(),
        "r": t.r(),
        "zero_tuple": t.is_zero(),
        "stable_jordan_type": stable.jordan_type().to_string(),
        "in_support": inside,
    });
    if verify == Verify::CrossOracle {
        let tate = tate_nonzero(&lc)?;
        if tate != inside {
            return Err(CliError::assertion(format!(
                "complex deciders disagree at {}: collapse {inside}, Tate {tate}",
                serde_json::to_string(&t.to_json()).unwrap_or_default()
            )));
        }
        v["cross_oracle"] = json!({ "tate_in_support": tate });
    }
    Ok(v)
}

pub fn complex(cfg: &RunConfig, complex: &str, tuple: Option<&str>) -> Run {
    let cl = inputs::load("complex", complex, &cfg.corpus)?;
    let layer_p = cl
        .value
        .get("layers")
        .and_then(Value::as_array)
        .and_then(|ls| ls.iter().find_map(|l| RepExpr::from_value(l).ok()?.characteristic()))
        .or_else(|| RepExpr::from_value(&cl.value).ok()?.characteristic());
    let mut cfg = cfg.fit_p(inputs::complex_p(&cl).or(layer_p))?;
    let mut sources = vec![cl.input.clone()];
    let tuples: Vec<NilTuple> = match tuple {
        Some(arg) => {
            let tl = inputs::load("tuple", arg, &cfg.corpus)?;
            let t = inputs::tuple(&tl)?;
            cfg = cfg.fit_p(Some(t.p()))?;
            sources.push(tl.input);
            vec![t]
        }
        None => Vec::new(),
    };
    let c = inputs::complex(&cl, cfg.p)?;
    let runs: Vec<(usize, Vec<NilTuple>)> = if tuples.is_empty() {
        cfg.rs().map(|r| Ok((r, plan_for(plan_layer(&c), &cfg, r)?.sample()?))).collect::<Result<_, CliError>>()?
    } else {
        vec![(tuples[0].r(), tuples)]
    };
    let mut table = Table::new(&["complex", "r", "index", "field", "zero_tuple", "stable_jordan_type", "in_support"]);
    let mut out = Vec::new();
    for (r, ts) in runs {
        let mut verdicts = Vec::new();
        for (i, t) in ts.iter().enumerate() {
            let v = complex_verdict(&c, t, cfg.verify)?;
            table.push(vec![
                cl.name.clone(),
                r.to_string(),
                i.to_string(),
                t.field().name(),
                t.is_zero().to_string(),
                v["stable_jordan_type"].as_str().unwrap_or_default().to_string(),
                v["in_support"].to_string(),
            ]);
            verdicts.push(v);
        }
        out.push(json!({ "r": r, "verdicts": verdicts }));
    }
    let (lo, hi) = c.degrees();
    let result = json!({ "complex": cl.name, "degrees": [lo, hi], "runs": out });
    Ok((cfg, sources, Outcome { result, table, failed: None }))
}

/// Parses every corpus file and evaluates one π-operator per module.
pub fn corpus_validate(cfg: &RunConfig) -> Run {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(&cfg.corpus)
        .map_err(|e| CliError::invalid("io", format!("{}: {e}", cfg.corpus.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::invalid("corpus", format!("no modules in {}", cfg.corpus.display())));
    }
    let mut table = Table::new(&["module", "sha256", "dim", "N", "tag", "characteristic"]);
    let mut modules = Vec::new();
    let mut problems = Vec::new();
    for path in &paths {
        let arg = path.to_string_lossy();
        let checked = inputs::load("module", &arg, &cfg.corpus).and_then(|l| {
            let rep = inputs::module(&l)?;
            let p = rep.characteristic().unwrap_or(cfg.p);
            let plan = SamplingPlan::for_module(&rep, p, 1, 2, cfg.seed)?.with_tower(default_tower(p)?[..1].to_vec());
            for t in plan.sample()? {
                pi_operator(&rep, &t, Recipe::Ur)?;
            }
            Ok((l, rep, plan))
        });
        match checked {
            Ok((l, rep, plan)) => {
                let tag = plan.tag.as_ref().map(|t| t.name()).unwrap_or_default();
                let ch = rep.characteristic().map(|c| c.to_string()).unwrap_or_else(|| "any".into());
                table.push(vec![
                    l.name.clone(),
                    l.input.sha256.clone(),
                    rep.dim().to_string(),
                    plan.n.to_string(),
                    tag.clone(),
                    ch.clone(),
                ]);
                modules.push(json!({
                    "name": l.name,
                    "sha256": l.input.sha256,
                    "dim": rep.dim(),
                    "N": plan.n,
                    "tag": tag,
                    "characteristic": ch,
                }));
            }
            Err(e) => problems.push(format!("{}: {}", path.file_name().unwrap_or_default().to_string_lossy(), e.to_json()["error"]["message"].as_str().unwrap_or_default())),
        }
    }
    if !problems.is_empty() {
        return Err(CliError::invalid("corpus", problems.join("; ")));
    }
    let result = json!({ "modules": modules });
    Ok((cfg.clone(), Vec::new(), Outcome { result, table, failed: None }))
}
