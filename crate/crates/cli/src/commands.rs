use std::path::{Path, PathBuf};

use decayrnn_core::artifact::{csv_with_provenance, write_atomic, write_json};
use decayrnn_core::cells::{count_params, size_for_budget, CellKind};
use decayrnn_core::data::{
    dataset_statistics, generate_mask_signal, generate_synthetic, missingness_label_correlation, read_dataset,
    read_raw_series, resample, validation_split, write_dataset, Dataset, Sample, SyntheticConfig, VALIDATION_FRACTION,
};
use decayrnn_core::evaluation::{
    correlation_csv, cross_validate, decay_report, experiment_suite, num, online_eval, online_eval_cv, output_aucs,
    provenance_line, scaling_experiment, EvalReport, OnlineReport, Summary, SuiteConfig,
};
use decayrnn_core::training::{fit, gradient_check, Architecture, GradCheckDims, Model, TrainConfig};
use decayrnn_core::{Error, Result};
use serde_json::json;

use super::output::{opt6, provenance, sig6};
use super::*;

/// Hidden size used when neither `--hidden` nor `--param-budget` is given.
const DEFAULT_HIDDEN: usize = 16;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(&a),
        Command::Ingest(a) => ingest(&a),
        Command::Stats(a) => stats(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Cv(a) => cv(&a),
        Command::OnlineEval(a) => online(&a),
        Command::Scaling(a) => scaling(&a),
        Command::DecayReport(a) => decay(&a),
        Command::Correlate(a) => correlate(&a),
        Command::ParamCount(a) => param_count(&a),
        Command::GradCheck(a) => grad_check(&a),
        Command::Suite(a) => suite(&a),
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    read_dataset(&args.data, &args.labels, args.classes)
}

fn out_dir(args: &DataArgs) -> PathBuf {
    args.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn train_config(path: Option<&Path>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            serde_json::from_str::<TrainConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn hidden_for(kind: CellKind, size: &ModelSize, ds: &Dataset) -> Result<usize> {
    match (size.hidden, size.param_budget) {
        (Some(h), _) => Ok(h),
        (None, Some(budget)) => size_for_budget(kind, ds.n_variables(), ds.task_mode.arity(), budget),
        (None, None) => Ok(DEFAULT_HIDDEN),
    }
}

fn print_auc_lines(names: &[String], aucs: &[Option<f64>]) {
    for (n, a) in names.iter().zip(aucs) {
        println!("  {n}: {}", opt6(*a));
    }
}

fn output_names(ds: &Dataset) -> Vec<String> {
    if ds.task_mode.is_multiclass() {
        (0..ds.task_mode.arity()).map(|k| format!("class{k}")).collect()
    } else {
        ds.task_names.clone()
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let prov = provenance::<_, ()>("generate", a, None);
    let ds = match a.mask_signal {
        Some(gap) => generate_mask_signal(a.samples, a.vars, a.steps, gap, a.seed)?,
        None => generate_synthetic(&SyntheticConfig {
            n_samples: a.samples,
            n_variables: a.vars,
            n_classes: a.classes,
            n_steps: a.steps,
            target_missing_rate: a.rate,
            correlation_strength: a.correlation,
            seed: a.seed,
            ..Default::default()
        })?,
    };
    let line = provenance_line(&prov);
    write_dataset(&ds, &a.out_dir.join("data.csv"), &a.out_dir.join("labels.csv"), &line)?;
    if let Some(s) = &ds.synthetic {
        write_json(&a.out_dir.join("synthetic.json"), &json!({"provenance": prov, "summary": s}))?;
        println!(
            "{} series, missing rate {}, missing-rate/label correlation {}",
            ds.len(),
            sig6(s.achieved_missing_rate),
            sig6(s.achieved_correlation)
        );
    } else {
        println!("{} series written", ds.len());
    }
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let (raw, vars, tasks, mode) = read_raw_series(&a.data, &a.labels, a.classes)?;
    let samples = raw
        .iter()
        .map(|r| resample(r, a.bin_hours))
        .collect::<Result<Vec<Sample>>>()?;
    let ds = Dataset::new(samples, vars, tasks, mode)?;
    let prov = provenance::<_, ()>("ingest", a, None);
    write_dataset(
        &ds,
        &a.out_dir.join("data.csv"),
        &a.out_dir.join("labels.csv"),
        &provenance_line(&prov),
    )?;
    let st = dataset_statistics(&ds);
    println!(
        "{} series resampled to {}h bins; mean steps {}, mean missing rate {}",
        st.n_samples,
        sig6(a.bin_hours),
        sig6(st.mean_steps),
        sig6(st.mean_missing_rate)
    );
    Ok(())
}

fn stats(a: &DataArgs) -> Result<()> {
    let ds = load(a)?;
    let st = dataset_statistics(&ds);
    println!("series: {}", st.n_samples);
    println!("variables: {}", st.n_variables);
    println!("steps: mean {}, max {}", sig6(st.mean_steps), st.max_steps);
    println!("mean missing rate: {}", sig6(st.mean_missing_rate));
    if let Some(dir) = &a.out_dir {
        write_json(&dir.join("stats.json"), &json!({"provenance": provenance::<_, ()>("stats", a, None), "statistics": st}))?;
    }
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let cfg = train_config(a.config.as_deref(), a.seed)?;
    let arch = Architecture {
        kind: a.kind,
        hidden: hidden_for(a.kind, &a.size, &ds)?,
    };
    let all: Vec<usize> = (0..ds.len()).collect();
    let (train_idx, val_idx) = validation_split(&ds.labels(), &all, cfg.seed, VALIDATION_FRACTION);
    let (outcome, _) = fit(arch, &ds, &train_idx, &val_idx, &cfg)?;
    if let Some(msg) = &outcome.aborted {
        if outcome.best_val_auc.is_none() {
            return Err(Error::Numerical(msg.clone()));
        }
        log::warn!("kept the best weights before the abort: {msg}");
    }
    let dir = out_dir(&a.data);
    let prov = provenance("train", a, Some(&cfg));
    outcome.model.save(&dir.join("model.json"), prov.clone())?;
    let mut history = format!("{}\n", json!({"provenance": prov}));
    history.push_str(&outcome.history_jsonl());
    write_atomic(&dir.join("history.jsonl"), history.as_bytes())?;
    println!(
        "{} H={}: {} epochs, best epoch {}, validation AUC {}",
        arch.kind,
        arch.hidden,
        outcome.history.len(),
        outcome.best_epoch,
        opt6(outcome.best_val_auc)
    );
    Ok(())
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let model = Model::load(&a.model)?;
    let probs = model.predict_raw(&ds)?;
    let aucs = output_aucs(&probs, &ds.labels(), ds.task_mode);
    let mean = Summary::of(aucs.iter().copied()).mean;
    let names = output_names(&ds);
    println!("{} on {} series: mean AUC {}", model.kind(), ds.len(), opt6(mean));
    print_auc_lines(&names, &aucs);
    if let Some(dir) = &a.data.out_dir {
        let prov = provenance::<_, ()>("evaluate", a, None);
        let rows: Vec<String> = names.iter().zip(&aucs).map(|(n, x)| format!("{n},{}", num(*x))).collect();
        let mut rows = rows;
        rows.push(format!("average,{}", num(mean)));
        write_atomic(
            &dir.join("evaluation.csv"),
            csv_with_provenance(&provenance_line(&prov), "output,auc", &rows).as_bytes(),
        )?;
        write_json(
            &dir.join("evaluation.json"),
            &json!({"provenance": prov, "outputs": names, "auc": aucs, "mean_auc": mean}),
        )?;
    }
    Ok(())
}

fn cv(a: &CvArgs) -> Result<()> {
    let t = &a.train;
    let ds = load(&t.data)?;
    let cfg = train_config(t.config.as_deref(), t.seed)?;
    let arch = Architecture {
        kind: t.kind,
        hidden: hidden_for(t.kind, &t.size, &ds)?,
    };
    let run = cross_validate(arch, &ds, &cfg, a.folds)?;
    let r = &run.report;
    println!(
        "{} H={} over {} folds: mean AUC {} ± {}",
        arch.kind,
        arch.hidden,
        r.folds.len(),
        opt6(r.average.mean),
        opt6(r.average.std)
    );
    let means: Vec<Option<f64>> = r.per_output.iter().map(|s| s.mean).collect();
    print_auc_lines(&r.output_names, &means);
    let mut report = EvalReport::new(provenance("cv", a, Some(&cfg)));
    report.cv = Some(run.report);
    report.write(&out_dir(&t.data))?;
    Ok(())
}

fn print_online(r: &OnlineReport) {
    for c in &r.cutoffs {
        if c.empty_prefix {
            println!("  {}h: skipped (empty prefixes)", sig6(c.cutoff_hours));
        } else {
            println!("  {}h: {}", sig6(c.cutoff_hours), opt6(c.auc));
        }
    }
    println!("  full: {}", opt6(r.full_auc));
}

fn online(a: &OnlineArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let cfg = train_config(a.config.as_deref(), a.seed)?;
    let mut report = EvalReport::new(provenance("online-eval", a, Some(&cfg)));
    match (&a.model, a.kind) {
        (Some(path), _) => {
            let model = Model::load(path)?;
            let all: Vec<usize> = (0..ds.len()).collect();
            let r = online_eval(&model, &ds, &all, &a.cutoffs)?;
            println!("{} on {} series:", model.kind(), ds.len());
            print_online(&r);
            report.online = Some(r);
        }
        (None, Some(kind)) => {
            let arch = Architecture {
                kind,
                hidden: hidden_for(kind, &a.size, &ds)?,
            };
            let run = cross_validate(arch, &ds, &cfg, a.folds)?;
            let (merged, folds) = online_eval_cv(&run, &ds, &a.cutoffs)?;
            println!("{} H={} averaged over {} folds:", kind, arch.hidden, folds.len());
            print_online(&merged);
            report.cv = Some(run.report);
            report.online = Some(merged);
            report.online_folds = folds;
        }
        (None, None) => return Err(Error::Argument("give --model or --kind".into())),
    }
    report.write(&out_dir(&a.data))?;
    Ok(())
}

fn scaling(a: &ScalingArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let cfg = train_config(a.config.as_deref(), a.seed)?;
    let hidden = a.hidden.unwrap_or(DEFAULT_HIDDEN);
    let archs: Vec<Architecture> = a.kind.iter().map(|&kind| Architecture { kind, hidden }).collect();
    let cells = scaling_experiment(&archs, &ds, &a.sizes, &cfg, a.folds)?;
    let prov = provenance("scaling", a, Some(&cfg));
    let mut rows = Vec::new();
    for c in &cells {
        let s = &c.report.average;
        println!(
            "{} size {}: mean AUC {} ± {}",
            c.report.architecture.kind,
            c.size,
            opt6(s.mean),
            opt6(s.std)
        );
        rows.push(format!(
            "{},{},{},{}",
            c.report.architecture.kind,
            c.size,
            num(s.mean),
            num(s.std)
        ));
    }
    let dir = out_dir(&a.data);
    write_atomic(
        &dir.join("scaling.csv"),
        csv_with_provenance(&provenance_line(&prov), "kind,size,mean_auc,std_auc", &rows).as_bytes(),
    )?;
    write_json(&dir.join("scaling.json"), &json!({"provenance": prov, "cells": cells}))
}

fn decay(a: &DecayArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let d = decay_report(&model)?;
    for c in &d.input_curves {
        let at = |h: f64| c.delta.iter().position(|&x| x == h).map(|i| c.gamma[i]);
        println!(
            "  {}: gamma(0h) {}, gamma(12h) {}, gamma(24h) {}",
            c.variable,
            opt6(at(0.0)),
            opt6(at(12.0)),
            opt6(at(24.0))
        );
    }
    if !d.hidden_histograms.is_empty() {
        println!("  hidden-decay histograms for {} variables", d.hidden_histograms.len());
    }
    let mut report = EvalReport::new(provenance::<_, ()>("decay-report", a, None));
    report.decay = Some(d);
    report.write(&a.out_dir)?;
    Ok(())
}

fn correlate(a: &DataArgs) -> Result<()> {
    let ds = load(a)?;
    let entries = missingness_label_correlation(&ds)?;
    for e in &entries {
        println!("  {} / {}: {}", e.variable, e.task, sig6(e.pearson_r));
    }
    let prov = provenance::<_, ()>("correlate", a, None);
    write_atomic(
        &out_dir(a).join("correlation.csv"),
        correlation_csv(&provenance_line(&prov), &entries).as_bytes(),
    )
}

fn param_count(a: &ParamCountArgs) -> Result<()> {
    let h = match (a.size.hidden, a.size.param_budget) {
        (Some(h), _) => h,
        (None, Some(budget)) => size_for_budget(a.kind, a.vars, a.outputs, budget)?,
        (None, None) => return Err(Error::Argument("give --hidden or --param-budget".into())),
    };
    let n = count_params(a.kind, a.vars, h, a.outputs)?;
    if a.size.hidden.is_some() {
        println!("{n}");
    } else {
        println!("hidden {h}: {n} parameters");
    }
    Ok(())
}

fn grad_check(a: &GradCheckArgs) -> Result<()> {
    let dims = GradCheckDims {
        n_vars: a.vars,
        hidden: a.hidden,
        steps: a.steps,
        ..Default::default()
    };
    let r = gradient_check(a.kind, dims, a.seed)?;
    for b in &r.blocks {
        println!("  {} ({} values): {}", b.block, b.entries, sig6(b.max_rel_err));
    }
    println!("{} seed {}: max relative error {}", a.kind, a.seed, sig6(r.max_rel_err));
    if r.max_rel_err < 1e-5 {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "relative error {} exceeds 1e-5",
            sig6(r.max_rel_err)
        )))
    }
}

fn suite(a: &SuiteArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?;
            SuiteConfig::from_json(&text)?
        }
        None => SuiteConfig::default(),
    };
    let out = experiment_suite(&cfg, &a.out_dir)?;
    if out.reused {
        println!("suite already complete in {}", a.out_dir.display());
    }
    for r in &out.table.rows {
        println!(
            "{} correlation {} seed {}: AUC {} ± {}",
            r.kind,
            sig6(r.correlation),
            r.seed,
            opt6(r.mean_auc),
            opt6(r.std_auc)
        );
    }
    Ok(())
}
