//! One function per subcommand. Each returns the report body; `main` adds the
//! common header and writes everything through a [`Staging`] directory.

use std::path::Path;

use anyhow::{bail, Context, Result};
use grouprobust::analysis::{
    enrichment_table, error_set_stats, evaluate_groups, replace_error_set, track_cvar_composition, Criterion,
    EnrichmentTable, GroupMetrics,
};
use grouprobust::datagen::{generate_synthetic, Dataset, GroupId};
use grouprobust::diffcore::Model;
use grouprobust::exec::Execution;
use grouprobust::trainers::{
    identify, train, train_with_error_set, Algorithm, Aux, Checkpoint, ErrorSet, TrainConfig, TrainResult,
};
use grouprobust::tuning::{grid_sweep_with, validation_size_study, Grid, SweepResult};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::io::{checkpoint_text, csv_table, fingerprint, load_splits, Splits, Staging};

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub data_dir: Option<&'a Path>,
    pub out: &'a Staging,
}

fn datasets_json(s: &Splits) -> Value {
    let one = |d: &Dataset| {
        json!({
            "rows": d.len(),
            "annotated": d.has_group_annotations(),
            "fingerprint": fingerprint(d),
        })
    };
    json!({ "train": one(&s.train), "val": one(&s.val), "test": one(&s.test) })
}

pub fn load_data(ctx: &Ctx<'_>) -> Result<Splits> {
    match ctx.data_dir {
        Some(dir) => load_splits(dir),
        None => {
            let s = generate_synthetic(&ctx.cfg.data.spec, ctx.cfg.data.seed)?;
            Ok(Splits {
                train: s.train,
                val: s.val,
                test: s.test,
            })
        }
    }
}

fn group_counts(d: &Dataset) -> Value {
    let mut counts = std::collections::BTreeMap::<GroupId, usize>::new();
    for e in d.examples() {
        if let Some(g) = e.group {
            *counts.entry(g).or_default() += 1;
        }
    }
    Value::Array(
        counts
            .into_iter()
            .map(|(g, n)| json!({"attribute": g.attribute, "label": g.label, "count": n}))
            .collect(),
    )
}

pub fn generate(ctx: &Ctx<'_>) -> Result<Value> {
    let s = load_data(ctx)?;
    for (file, d) in crate::io::SPLIT_FILES.iter().zip([&s.train, &s.val, &s.test]) {
        ctx.out.write(file, d.to_csv_string())?;
    }
    Ok(json!({
        "datasets": datasets_json(&s),
        "group_counts": {
            "train": group_counts(&s.train),
            "val": group_counts(&s.val),
            "test": group_counts(&s.test),
        },
    }))
}

fn metrics_json(model: &Model, val: &Dataset, test: &Dataset) -> Result<Value> {
    Ok(json!({
        "val": evaluate_groups(model, val)?,
        "test": evaluate_groups(model, test)?,
    }))
}

fn checkpoint_json(cp: &Option<Checkpoint>, test: &Dataset) -> Result<Value> {
    Ok(match cp {
        None => Value::Null,
        Some(cp) => json!({
            "epoch": cp.epoch,
            "val": cp.val,
            "test": evaluate_groups(&cp.model, test)?,
        }),
    })
}

fn groups_csv(m: &GroupMetrics) -> String {
    csv_table(
        &["attribute", "label", "count", "correct", "accuracy"],
        m.per_group.iter().map(|(g, s)| {
            vec![
                g.attribute.to_string(),
                g.label.to_string(),
                s.count.to_string(),
                s.correct.to_string(),
                s.accuracy.to_string(),
            ]
        }),
    )
}

fn enrichment_csv(t: &EnrichmentTable) -> String {
    csv_table(
        &["attribute", "label", "count", "in_error_set", "share", "empirical_rate", "enrichment"],
        t.rows.iter().map(|r| {
            vec![
                r.group.attribute.to_string(),
                r.group.label.to_string(),
                r.count.to_string(),
                r.in_error_set.to_string(),
                r.share.to_string(),
                r.empirical_rate.to_string(),
                r.enrichment.to_string(),
            ]
        }),
    )
}

fn error_set_csv(e: &ErrorSet) -> String {
    csv_table(&["index"], e.indices().iter().map(|i| vec![i.to_string()]))
}

fn write_training_outputs(ctx: &Ctx<'_>, r: &TrainResult, s: &Splits) -> Result<Value> {
    let out = ctx.out;
    out.write("model.txt", checkpoint_text(&r.model))?;
    if let Some(cp) = &r.best.worst_group {
        out.write("model_best_worst_group.txt", checkpoint_text(&cp.model))?;
        out.write("groups_test.csv", groups_csv(&evaluate_groups(&cp.model, &s.test)?))?;
    }
    if let Some(cp) = &r.best.average {
        out.write("model_best_average.txt", checkpoint_text(&cp.model))?;
    }
    out.write(
        "history.csv",
        csv_table(
            &["epoch", "train_loss", "val_worst_group", "val_average"],
            r.history.iter().map(|h| {
                vec![
                    h.epoch.to_string(),
                    h.train_loss.to_string(),
                    h.val_worst_group.to_string(),
                    h.val_average.to_string(),
                ]
            }),
        ),
    )?;
    Ok(json!({
        "history": r.history,
        "final": metrics_json(&r.model, &s.val, &s.test)?,
        "selected": {
            "worst_group": checkpoint_json(&r.best.worst_group, &s.test)?,
            "average": checkpoint_json(&r.best.average, &s.test)?,
        },
        "warnings": r.warnings,
    }))
}

/// Reads the diagnostic target from an ERM report: the group with the lowest
/// test accuracy at the worst-group-selected checkpoint.
fn target_from_report(path: &Path) -> Result<GroupId> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let algo = v.pointer("/config/train/algorithm").and_then(Value::as_str);
    if algo != Some("erm") {
        bail!("reference report {} is not an ERM training report", path.display());
    }
    let g = v
        .pointer("/selected/worst_group/test/worst_group")
        .context("reference report lacks selected.worst_group.test.worst_group; use the report of `train`, not `sweep`")?;
    let field = |k: &str| g.get(k).and_then(Value::as_u64).map(|x| x as usize);
    match (field("attribute"), field("label")) {
        (Some(a), Some(y)) => Ok(GroupId::new(a, y)),
        _ => bail!("malformed worst group in {}", path.display()),
    }
}

/// The worst test group of a tuned ERM reference: read from
/// `[analyze] reference_report` when given, otherwise trained here with the
/// `[train]` settings and `algorithm = "erm"`.
fn reference_target(ctx: &Ctx<'_>, s: &Splits) -> Result<(GroupId, Value)> {
    if let Some(p) = &ctx.cfg.analyze.reference_report {
        let g = target_from_report(p)?;
        return Ok((g, json!({"source": "report", "path": p})));
    }
    let erm_cfg = TrainConfig {
        algorithm: Algorithm::Erm,
        ..ctx.cfg.train.clone()
    };
    let r = train(&s.train, &s.val, &erm_cfg)?;
    let cp = r.best.worst_group.context("the ERM reference needs at least one epoch")?;
    let test = evaluate_groups(&cp.model, &s.test)?;
    Ok((
        test.worst_group,
        json!({"source": "trained", "epoch": cp.epoch, "test": test}),
    ))
}

fn jtt_diagnostics(ctx: &Ctx<'_>, r: &TrainResult, s: &Splits, target: GroupId) -> Result<Value> {
    let Aux::Jtt {
        identification,
        identification_history,
        error_set,
        refreshes,
    } = &r.aux
    else {
        return Ok(Value::Null);
    };
    ctx.out.write("model_identification.txt", checkpoint_text(identification))?;
    ctx.out.write("error_set.csv", error_set_csv(error_set))?;
    let table = enrichment_table(error_set, &s.train)?;
    ctx.out.write("enrichment.csv", enrichment_csv(&table))?;
    Ok(json!({
        "identification": {
            "epochs": error_set.source_epoch(),
            "history": identification_history,
            "metrics": metrics_json(identification, &s.val, &s.test)?,
        },
        "error_set_size": error_set.len(),
        "error_set_stats": error_set_stats(error_set, &s.train, target)?,
        "enrichment": table,
        "refreshes": refreshes.iter().map(|e| json!({"after_epoch": e.source_epoch(), "size": e.len()})).collect::<Vec<_>>(),
    }))
}

fn aux_json(ctx: &Ctx<'_>, r: &TrainResult, s: &Splits) -> Result<Value> {
    Ok(match &r.aux {
        Aux::None => Value::Null,
        Aux::Jtt { identification, .. } => {
            // without an ERM reference the identification model's worst test
            // group stands in as the diagnostic target
            let target = match &ctx.cfg.analyze.reference_report {
                Some(p) => target_from_report(p)?,
                None => evaluate_groups(identification, &s.test)?.worst_group,
            };
            jtt_diagnostics(ctx, r, s, target)?
        }
        Aux::Cvar { snapshots } => json!({"snapshots": snapshots.len()}),
        Aux::Lff { biased } => json!({"biased_model": metrics_json(biased, &s.val, &s.test)?}),
        Aux::GroupDro { groups, weights } => json!({
            "final_weights": groups.iter().zip(weights).map(|(g, w)| {
                json!({"attribute": g.attribute, "label": g.label, "weight": w})
            }).collect::<Vec<_>>(),
        }),
        Aux::UpsampleMinority { minority } => json!({"minority_size": minority.len()}),
    })
}

pub fn train_cmd(ctx: &Ctx<'_>) -> Result<Value> {
    let s = load_data(ctx)?;
    let r = train(&s.train, &s.val, &ctx.cfg.train)?;
    let mut body = write_training_outputs(ctx, &r, &s)?;
    body["datasets"] = datasets_json(&s);
    body["aux"] = aux_json(ctx, &r, &s)?;
    Ok(body)
}

fn sweep_csv(res: &SweepResult) -> String {
    let mut header: Vec<&str> = TrainConfig::FIELDS.to_vec();
    let metric_cols = [
        "wg_epoch",
        "wg_val_worst_group",
        "wg_val_average",
        "wg_test_worst_group",
        "wg_test_average",
        "avg_epoch",
        "avg_val_worst_group",
        "avg_val_average",
        "avg_test_worst_group",
        "avg_test_average",
    ];
    header.extend(metric_cols);
    csv_table(
        &header,
        res.rows.iter().map(|r| {
            let mut row: Vec<String> = r.config.fields().into_iter().map(|(_, v)| v).collect();
            for m in [&r.by_worst_group, &r.by_average] {
                row.extend([
                    m.epoch.to_string(),
                    m.val_worst_group.to_string(),
                    m.val_average.to_string(),
                    m.test_worst_group.to_string(),
                    m.test_average.to_string(),
                ]);
            }
            row
        }),
    )
}

fn grid(cfg: &ExperimentConfig) -> Grid {
    Grid {
        base: cfg.train.clone(),
        axes: cfg.grid.clone(),
    }
}

pub fn sweep(ctx: &Ctx<'_>) -> Result<Value> {
    let s = load_data(ctx)?;
    let res = grid_sweep_with(&grid(ctx.cfg), &s.train, &s.val, &s.test, ctx.cfg.criterion, Execution::default())?;
    ctx.out.write("sweep.csv", sweep_csv(&res))?;
    let summary = |c: Criterion| {
        let i = res.best_index(c);
        json!({"row": i, "config": res.rows[i].config, "metrics": res.best(c)})
    };
    Ok(json!({
        "datasets": datasets_json(&s),
        "rows": res.rows.len(),
        "criterion": res.criterion,
        "best_by_worst_group": summary(Criterion::WorstGroup),
        "best_by_average": summary(Criterion::Average),
        "selected": res.selected(),
        "warnings": res.rows.iter().flat_map(|r| r.warnings.clone()).collect::<Vec<_>>(),
    }))
}

pub fn analyze(ctx: &Ctx<'_>) -> Result<Value> {
    let s = load_data(ctx)?;
    let (target, reference) = reference_target(ctx, &s)?;
    let mut cfg = ctx.cfg.train.clone();
    let diagnostics = match cfg.algorithm {
        Algorithm::Jtt | Algorithm::JttDynamic => {
            let r = train(&s.train, &s.val, &cfg)?;
            jtt_diagnostics(ctx, &r, &s, target)?
        }
        Algorithm::Cvar => {
            cfg.track_cvar_set = true;
            let r = train(&s.train, &s.val, &cfg)?;
            let Aux::Cvar { snapshots } = &r.aux else { unreachable!("cvar run") };
            let series = track_cvar_composition(snapshots, cfg.alpha, &s.train, target)?;
            // the static JTT error set under the same base settings is the
            // constant reference line
            let jtt_cfg = TrainConfig {
                algorithm: Algorithm::Jtt,
                ..cfg.clone()
            };
            let e = identify(&s.train, &s.val, &jtt_cfg)?.error_set;
            let jtt = error_set_stats(&e, &s.train, target)?;
            ctx.out.write(
                "composition.csv",
                csv_table(
                    &["snapshot", "set_size", "precision", "recall", "jtt_precision", "jtt_recall"],
                    series.iter().map(|p| {
                        vec![
                            p.snapshot.to_string(),
                            p.set_size.to_string(),
                            p.precision.to_string(),
                            p.recall.to_string(),
                            jtt.precision.to_string(),
                            jtt.recall.to_string(),
                        ]
                    }),
                ),
            )?;
            json!({"composition": series, "jtt_reference": jtt})
        }
        other => bail!("analyze supports jtt, jtt-dynamic and cvar, not {other}"),
    };
    Ok(json!({
        "datasets": datasets_json(&s),
        "target_group": {"attribute": target.attribute, "label": target.label},
        "reference": reference,
        "diagnostics": diagnostics,
    }))
}

fn ablation_row(name: &str, r: &TrainResult, s: &Splits, e: &ErrorSet, with_replacement: bool) -> Result<Value> {
    let cp = r.best.worst_group.as_ref().context("ablation needs at least one epoch")?;
    let test = evaluate_groups(&cp.model, &s.test)?;
    Ok(json!({
        "mode": name,
        "error_set_size": e.len(),
        "sampled_with_replacement": with_replacement,
        "epoch": cp.epoch,
        "val_worst_group": cp.val.worst_group_accuracy,
        "test_worst_group": test.worst_group_accuracy,
        "test_average": test.average_accuracy,
    }))
}

pub fn ablate(ctx: &Ctx<'_>) -> Result<Value> {
    let cfg = &ctx.cfg.train;
    if cfg.algorithm != Algorithm::Jtt {
        bail!("ablate needs [train] algorithm = \"jtt\"");
    }
    let s = load_data(ctx)?;
    let stage1 = identify(&s.train, &s.val, cfg)?;
    let base = train_with_error_set(&s.train, &s.val, cfg, &stage1.error_set)?;
    let mut rows = vec![ablation_row("unmodified", &base, &s, &stage1.error_set, false)?];
    for mode in &ctx.cfg.ablate.modes {
        let edited = replace_error_set(&stage1.error_set, &s.train, *mode, ctx.cfg.ablate.seed)?;
        let r = train_with_error_set(&s.train, &s.val, cfg, &edited.error_set)?;
        rows.push(ablation_row(&mode.to_string(), &r, &s, &edited.error_set, edited.sampled_with_replacement)?);
    }
    let base_wg = rows[0]["test_worst_group"].as_f64().unwrap_or(f64::NAN);
    for r in &mut rows {
        let wg = r["test_worst_group"].as_f64().unwrap_or(f64::NAN);
        r["delta_test_worst_group"] = json!(wg - base_wg);
    }
    let cols = [
        "mode",
        "error_set_size",
        "sampled_with_replacement",
        "epoch",
        "val_worst_group",
        "test_worst_group",
        "test_average",
        "delta_test_worst_group",
    ];
    ctx.out.write(
        "ablation.csv",
        csv_table(
            &cols,
            rows.iter().map(|r| {
                cols.iter()
                    .map(|c| match &r[*c] {
                        Value::String(s) => s.clone(),
                        v => v.to_string(),
                    })
                    .collect()
            }),
        ),
    )?;
    Ok(json!({
        "datasets": datasets_json(&s),
        "rows": rows,
    }))
}

pub fn val_study(ctx: &Ctx<'_>) -> Result<Value> {
    let s = load_data(ctx)?;
    let study = &ctx.cfg.study;
    let rows = validation_size_study(
        &study.fractions,
        &grid(ctx.cfg),
        &s.train,
        &s.val,
        &s.test,
        &study.seeds,
        ctx.cfg.criterion,
        Execution::default(),
    )?;
    ctx.out.write(
        "study.csv",
        csv_table(
            &["fraction", "seed", "val_size", "test_worst_group"],
            rows.iter().flat_map(|r| {
                study.seeds.iter().enumerate().map(move |(i, seed)| {
                    vec![
                        r.fraction.to_string(),
                        seed.to_string(),
                        r.val_sizes[i].to_string(),
                        r.test_worst_group[i].to_string(),
                    ]
                })
            }),
        ),
    )?;
    Ok(json!({
        "datasets": datasets_json(&s),
        "rows": rows,
    }))
}
