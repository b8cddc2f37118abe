use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Result};
use log::info;
use mdlsynth::bench::{
    budget_csv, budget_svg, budget_sweep, heatmap_svg, random_suite, run_targets,
    structured_family, BenchReport, BenchTarget, BudgetPoint, RandomSuiteConfig,
};
use mdlsynth::datagen::{generate_examples, write_dataset, Dataset};
use mdlsynth::gate::MAX_QUBITS;
use mdlsynth::nn::{metrics_csv, save_model, EpochMetrics};
use mdlsynth::oracle::enumerate_states;
use mdlsynth::search::SearchConfig;
use serde::Serialize;

use crate::args::{QuickstartArgs, SamplerArgs, TrainArgs};
use crate::commands::{run_training, to_json, write_report};
use crate::Ctx;

/// Depth bound of the exhaustive single-qubit suite.
const EXHAUSTIVE_DEPTH: usize = 4;

#[derive(Serialize)]
struct SuiteSummary {
    name: &'static str,
    solved: usize,
    total: usize,
}

#[derive(Serialize)]
struct Summary {
    qubits: usize,
    seed: u64,
    examples: usize,
    best_epoch: usize,
    final_epoch: Option<EpochMetrics>,
    suites: Vec<SuiteSummary>,
    budget_curve: Vec<BudgetPoint>,
    structured: Vec<(String, Option<usize>)>,
    files: Vec<String>,
    timing: QuickstartTiming,
}

#[derive(Serialize)]
struct QuickstartTiming {
    total_secs: f64,
    generated_at_unix: Option<u64>,
}

pub fn run(ctx: &Ctx, a: QuickstartArgs) -> Result<()> {
    let start = Instant::now();
    let n = a.qubits;
    if !(1..=MAX_QUBITS).contains(&n) {
        bail!("--qubits must be in 1..={MAX_QUBITS}");
    }
    let out = ctx.out.sub("quickstart")?;
    let sub = Ctx {
        seed: ctx.seed,
        exec: ctx.exec,
        out: out.clone(),
    };
    let mut files = Vec::new();

    let sampler_args = SamplerArgs {
        t_min: 0,
        t_max: Some(3 * n),
        min_gates: 1,
        max_gates: Some(7 * n),
        no_resuffix: false,
    };
    let sampler = sampler_args.sampler(n, ctx.seed);
    info!("generating {} examples", a.examples);
    let ds = Dataset {
        qubits: n,
        examples: generate_examples(&sampler, a.examples, true, ctx.exec)?,
    };
    write_dataset(&ds, &out.resolve("data.mdld")?)?;
    files.push("data.mdld".to_string());

    let train_args = TrainArgs {
        data: Some(out.resolve("data.mdld")?),
        stream: false,
        qubits: Some(n),
        epochs: a.epochs,
        steps_per_epoch: a.steps_per_epoch,
        hidden: vec![256, 128, 64],
        batch: 128,
        grad_accumulation: 2,
        peak_lr: 2e-3,
        warmup_steps: None,
        cosine_t_max: None,
        replay_buffer: 6000,
        refresh: 32,
        validation_size: 1024,
        sampler: sampler_args,
        out: PathBuf::from("model.mdlm"),
        metrics: PathBuf::from("train_metrics.csv"),
    };
    let trained = run_training(&sub, &train_args)?;
    save_model(&trained.model, &out.resolve("model.mdlm")?)?;
    out.write("train_metrics.csv", metrics_csv(&trained.history))?;
    files.extend(["model.mdlm".into(), "train_metrics.csv".into()]);
    let model = trained.model;

    let trials = a.budgets.iter().copied().max().unwrap_or(1);
    let search = SearchConfig {
        max_steps: a.max_steps,
        threshold: a.threshold,
        trials,
        seed: ctx.seed,
        exec: ctx.exec,
        ..SearchConfig::default()
    };
    let mut suites = Vec::new();
    let mut record = |name: &'static str, r: &BenchReport| {
        info!("{name}: solved {}/{}", r.solved(), r.entries.len());
        suites.push(SuiteSummary {
            name,
            solved: r.solved(),
            total: r.entries.len(),
        });
    };

    let suite = RandomSuiteConfig {
        qubits: n,
        t_min: 0,
        t_max: a.t_max.unwrap_or(2 * n),
        per_bucket: a.per_bucket,
        gate_range: (1, 6 * n),
        seed: ctx.seed,
    };
    let targets = random_suite(&suite)?;
    let (curve, report) = budget_sweep(&targets, &model, &search, &a.budgets)?;
    write_report(
        &sub,
        &report,
        "random_report.json".as_ref(),
        "random_report.csv".as_ref(),
    )?;
    out.write("sweep.csv", budget_csv(&curve))?;
    files.extend(["random_report.json", "random_report.csv", "sweep.csv"].map(String::from));
    if a.emit_svg {
        out.write("sweep_curve.svg", budget_svg(&curve))?;
        out.write("random_heatmap.svg", heatmap_svg(&report.buckets))?;
        files.extend(["sweep_curve.svg", "random_heatmap.svg"].map(String::from));
    }
    record("random", &report);

    let mut structured = Vec::new();
    if n >= 2 {
        let targets: Vec<BenchTarget> = structured_family(n)?.into_iter().map(Into::into).collect();
        let (report, _) = run_targets(&targets, &model, &search)?;
        write_report(
            &sub,
            &report,
            "structured_report.json".as_ref(),
            "structured_report.csv".as_ref(),
        )?;
        files.extend(["structured_report.json", "structured_report.csv"].map(String::from));
        structured = report
            .entries
            .iter()
            .map(|e| (e.name.clone(), e.gate_count))
            .collect();
        record("structured", &report);
    } else {
        let states = enumerate_states(1, EXHAUSTIVE_DEPTH, 100_000, ctx.exec)?;
        let targets: Vec<BenchTarget> = states
            .into_iter()
            .enumerate()
            .map(|(i, c)| BenchTarget::new(format!("depth{}-{i}", c.len()), c))
            .collect();
        let (report, _) = run_targets(&targets, &model, &search)?;
        write_report(
            &sub,
            &report,
            "exhaustive_report.json".as_ref(),
            "exhaustive_report.csv".as_ref(),
        )?;
        files.extend(["exhaustive_report.json", "exhaustive_report.csv"].map(String::from));
        record("exhaustive", &report);
    }

    let summary = Summary {
        qubits: n,
        seed: ctx.seed,
        examples: a.examples,
        best_epoch: trained.best_epoch,
        final_epoch: trained.history.last().cloned(),
        suites,
        budget_curve: curve,
        structured,
        files,
        timing: QuickstartTiming {
            total_secs: start.elapsed().as_secs_f64(),
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
        },
    };
    out.write("summary.json", to_json(&summary)?)?;
    for s in &summary.suites {
        println!("{}: solved {}/{}", s.name, s.solved, s.total);
    }
    println!("reports in {}", out.root().display());
    Ok(())
}
