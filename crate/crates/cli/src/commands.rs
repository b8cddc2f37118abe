use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use mdlsynth::bench::{
    budget_csv, budget_svg, budget_sweep, build_structured, heatmap_svg, random_suite, run_targets,
    structured_family, BenchReport, BenchTarget, RandomSuiteConfig,
};
use mdlsynth::datagen::{generate_examples, read_dataset, write_dataset, Dataset, ExampleStream};
use mdlsynth::metrics::fidelity_to_identity;
use mdlsynth::nn::{
    cycle_examples, load_model, load_model_for, metrics_csv, save_model, train as fit,
    validation_set, TrainConfig, TrainOutcome,
};
use mdlsynth::oracle::{exact_mdl_with, OracleOptions, OracleOutcome};
use mdlsynth::peephole::{optimize as peephole, t_count};
use mdlsynth::search::{synthesize, SearchConfig, SynthesisResult, TrialRecord};
use mdlsynth::{hs_distance, residual, worst_case_distance, Circuit, Unitary};
use serde::Serialize;

use crate::args::{
    BenchCommand, GenArgs, OptimizeArgs, OracleArgs, SearchArgs, SuiteArgs, SynthArgs, TraceArgs,
    TrainArgs,
};
use crate::Ctx;

pub fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse()
        .with_context(|| format!("parsing circuit {}", path.display()))
}

/// Loads `.mat` matrix text or circuit text, deciding by the header.
pub fn read_target(path: &Path) -> Result<Unitary> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let parsed = if header.starts_with("UNITARY") {
        Unitary::from_mat_text(&text)
    } else {
        text.parse::<Circuit>().map(|c| c.unitary())
    };
    parsed.with_context(|| format!("parsing target {}", path.display()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn search_config(args: &SearchArgs, ctx: &Ctx) -> SearchConfig {
    SearchConfig {
        beam_width: args.beam,
        max_steps: args.max_steps,
        temperature: args.tau,
        threshold: args.threshold,
        trials: args.trials,
        seed: ctx.seed,
        permutation_trials: !args.no_permutations,
        inverse_trials: !args.no_inverse,
        exec: ctx.exec,
    }
}

pub fn gen(ctx: &Ctx, a: GenArgs) -> Result<()> {
    let sampler = a.sampler.sampler(a.qubits, ctx.seed);
    let examples = generate_examples(&sampler, a.count, !a.sampler.no_resuffix, ctx.exec)?;
    let ds = Dataset {
        qubits: a.qubits,
        examples,
    };
    let path = ctx.out.resolve(&a.out)?;
    write_dataset(&ds, &path)?;
    info!("wrote {} examples to {}", ds.examples.len(), path.display());
    println!("{}", path.display());
    Ok(())
}

pub fn train_config(a: &TrainArgs, seed: u64) -> TrainConfig {
    let total = a.epochs * a.steps_per_epoch;
    let warmup = a.warmup_steps.unwrap_or(total / 10);
    TrainConfig {
        hidden: a.hidden.clone(),
        batch: a.batch,
        grad_accumulation: a.grad_accumulation,
        warmup_steps: warmup,
        cosine_t_max: a
            .cosine_t_max
            .unwrap_or(total.saturating_sub(warmup).max(1)),
        peak_lr: a.peak_lr,
        epochs: a.epochs,
        steps_per_epoch: a.steps_per_epoch,
        replay_buffer: a.replay_buffer,
        refresh_per_batch: a.refresh,
        validation_size: a.validation_size,
        seed,
        ..TrainConfig::default()
    }
}

/// Trains from a dataset file or the sampler stream; validation always
/// comes from a held-out sampler seed.
pub fn run_training(ctx: &Ctx, a: &TrainArgs) -> Result<TrainOutcome> {
    let cfg = train_config(a, ctx.seed);
    let resuffix = !a.sampler.no_resuffix;
    let (qubits, stream): (usize, Box<dyn Iterator<Item = _>>) = match &a.data {
        Some(path) => {
            let ds = read_dataset(path).with_context(|| format!("reading {}", path.display()))?;
            if let Some(q) = a.qubits {
                if q != ds.qubits {
                    bail!(
                        "--qubits {q} does not match the {}-qubit dataset",
                        ds.qubits
                    );
                }
            }
            if ds.examples.is_empty() {
                bail!("dataset {} is empty", path.display());
            }
            (ds.qubits, Box::new(cycle_examples(ds.examples, ctx.seed)))
        }
        None => {
            let q = a.qubits.context("--stream requires --qubits")?;
            let sampler = a.sampler.sampler(q, ctx.seed);
            (q, Box::new(ExampleStream::new(sampler, resuffix, 0)?))
        }
    };
    let sampler = a.sampler.sampler(qubits, ctx.seed);
    let validation = validation_set(&sampler, resuffix, cfg.validation_size, ctx.exec)?;
    info!(
        "training {qubits}-qubit model: {} epochs x {} steps, hidden {:?}",
        cfg.epochs, cfg.steps_per_epoch, cfg.hidden
    );
    let outcome = fit(stream, &validation, qubits, &cfg, ctx.exec)?;
    for m in &outcome.history {
        info!(
            "epoch {} train_mse {:.4} val_mse {:.4} val_mae {:.4} lr {:.2e}",
            m.epoch, m.train_mse, m.val_mse, m.val_mae, m.lr
        );
    }
    Ok(outcome)
}

pub fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let outcome = run_training(ctx, &a)?;
    let model_path = ctx.out.resolve(&a.out)?;
    save_model(&outcome.model, &model_path)?;
    ctx.out.write(&a.metrics, metrics_csv(&outcome.history))?;
    println!(
        "{} (best epoch {})",
        model_path.display(),
        outcome.best_epoch
    );
    Ok(())
}

#[derive(Serialize)]
pub struct SynthReport {
    pub target: String,
    pub qubits: usize,
    pub success: bool,
    pub gate_count: Option<usize>,
    pub t_count: Option<usize>,
    pub fidelity: f64,
    pub trials_used: usize,
    pub steps_used: usize,
    pub circuit: Option<String>,
    pub config: SearchConfig,
    pub trials: Vec<TrialRecord>,
    pub timing: SynthTiming,
}

#[derive(Serialize)]
pub struct SynthTiming {
    pub wall_time_secs: f64,
}

impl SynthReport {
    pub fn new(target: String, qubits: usize, cfg: &SearchConfig, r: SynthesisResult) -> Self {
        SynthReport {
            target,
            qubits,
            success: r.success(),
            gate_count: r.gate_count(),
            t_count: r.circuit.as_ref().map(t_count),
            fidelity: r.achieved_fidelity,
            trials_used: r.trials_used,
            steps_used: r.steps_used,
            circuit: r.circuit.as_ref().map(Circuit::to_text),
            config: cfg.clone(),
            trials: r.trials,
            timing: SynthTiming {
                wall_time_secs: r.wall_time_secs,
            },
        }
    }
}

pub fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let target = read_target(&a.target)?;
    let model = load_model_for(&a.model, target.qubits())
        .with_context(|| format!("loading model {}", a.model.display()))?;
    let cfg = search_config(&a.search, ctx);
    let result = synthesize(&target, &model, &cfg)?;
    if let Some(c) = &result.circuit {
        ctx.out.write(&a.out, c.to_text())?;
    }
    let report = SynthReport::new(
        a.target.display().to_string(),
        target.qubits(),
        &cfg,
        result,
    );
    ctx.out.write(&a.report, to_json(&report)?)?;
    match report.gate_count {
        Some(g) => println!(
            "found {g} gates (T-count {}), fidelity {:.9}, trials used {}",
            report.t_count.unwrap_or(0),
            report.fidelity,
            report.trials_used
        ),
        None => println!(
            "no circuit found after {} trials (best fidelity {:.6})",
            report.trials_used, report.fidelity
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    found: bool,
    depth: Option<usize>,
    /// Every circuit shorter than this misses the threshold.
    lower_bound: usize,
    fidelity: Option<f64>,
    visited: usize,
    circuit: Option<String>,
}

pub fn oracle(ctx: &Ctx, a: OracleArgs) -> Result<()> {
    let target = read_target(&a.target)?;
    let mut opts = OracleOptions::new(a.max_depth, a.threshold);
    opts.max_states = a.max_states;
    opts.exec = ctx.exec;
    let report = match exact_mdl_with(&target, &opts)? {
        OracleOutcome::Found {
            depth,
            circuit,
            fidelity,
            visited,
        } => {
            if let Some(out) = &a.out {
                ctx.out.write(out, circuit.to_text())?;
            }
            OracleReport {
                found: true,
                depth: Some(depth),
                lower_bound: depth,
                fidelity: Some(fidelity),
                visited,
                circuit: Some(circuit.to_text()),
            }
        }
        OracleOutcome::NotFound {
            lower_bound,
            visited,
        } => OracleReport {
            found: false,
            depth: None,
            lower_bound,
            fidelity: None,
            visited,
            circuit: None,
        },
    };
    print!("{}", to_json(&report)?);
    Ok(())
}

pub fn optimize(ctx: &Ctx, a: OptimizeArgs) -> Result<()> {
    let c = read_circuit(&a.circuit)?;
    let opt = peephole(&c);
    info!("optimized {} -> {} gates", c.len(), opt.len());
    match &a.out {
        Some(out) => {
            let path = ctx.out.write(out, opt.to_text())?;
            println!(
                "{} gates -> {} gates: {}",
                c.len(),
                opt.len(),
                path.display()
            );
        }
        None => print!("{}", opt.to_text()),
    }
    Ok(())
}

pub fn suite_config(s: &SuiteArgs, qubits: usize, seed: u64) -> RandomSuiteConfig {
    RandomSuiteConfig {
        qubits: s.qubits.unwrap_or(qubits),
        t_min: s.t_min,
        t_max: s.t_max,
        per_bucket: s.per_bucket,
        gate_range: (s.min_gates, s.max_gates),
        seed,
    }
}

pub fn write_report(ctx: &Ctx, report: &BenchReport, json: &Path, csv: &Path) -> Result<()> {
    ctx.out.write(json, to_json(report)?)?;
    ctx.out.write(csv, report.to_csv())?;
    Ok(())
}

fn summary(label: &str, report: &BenchReport) {
    println!(
        "{label}: solved {}/{} ({:.1}%)",
        report.solved(),
        report.entries.len(),
        100.0 * report.success_rate()
    );
}

pub fn bench(ctx: &Ctx, cmd: BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Structured(a) => {
            let model = load_model(&a.model)?;
            let targets: Vec<BenchTarget> = if a.names.is_empty() {
                structured_family(model.qubits())
                    .context("structured targets need a model with at least 2 qubits")?
                    .into_iter()
                    .map(Into::into)
                    .collect()
            } else {
                a.names
                    .iter()
                    .map(|n| build_structured(n).map(Into::into))
                    .collect::<mdlsynth::Result<_>>()?
            };
            for t in &targets {
                model.check_target(t.qubits())?;
            }
            let cfg = search_config(&a.search, ctx);
            let (report, _) = run_targets(&targets, &model, &cfg)?;
            write_report(ctx, &report, &a.out, &a.csv)?;
            for e in &report.entries {
                println!(
                    "{}: {}",
                    e.name,
                    e.gate_count
                        .map_or("not found".into(), |g| format!("{g} gates"))
                );
            }
            summary("structured", &report);
        }
        BenchCommand::Random(a) => {
            let model = load_model(&a.model)?;
            let suite = suite_config(&a.suite, model.qubits(), ctx.seed);
            model.check_target(suite.qubits)?;
            let targets = random_suite(&suite)?;
            let (report, _) = run_targets(&targets, &model, &search_config(&a.search, ctx))?;
            write_report(ctx, &report, &a.out, &a.csv)?;
            if a.emit_svg {
                ctx.out
                    .write("random_heatmap.svg", heatmap_svg(&report.buckets))?;
            }
            summary("random", &report);
        }
        BenchCommand::Sweep(a) => {
            let model = load_model(&a.model)?;
            let suite = suite_config(&a.suite, model.qubits(), ctx.seed);
            model.check_target(suite.qubits)?;
            let targets = random_suite(&suite)?;
            let (curve, report) =
                budget_sweep(&targets, &model, &search_config(&a.search, ctx), &a.budgets)?;
            ctx.out.write(&a.out, budget_csv(&curve))?;
            ctx.out.write(&a.report, to_json(&report)?)?;
            if a.emit_svg {
                ctx.out.write("sweep_curve.svg", budget_svg(&curve))?;
                ctx.out
                    .write("sweep_heatmap.svg", heatmap_svg(&report.buckets))?;
            }
            for p in &curve {
                println!(
                    "budget {}: {}/{} ({:.3}, 99% CI [{:.3}, {:.3}])",
                    p.budget, p.solved, p.total, p.rate, p.ci_low, p.ci_high
                );
            }
        }
    }
    Ok(())
}

/// One CSV row per prefix length of the circuit: distances between the
/// residual and the identity, and the model's prediction when given.
pub fn trace_csv(
    circuit: &Circuit,
    target: &Unitary,
    model: Option<&mdlsynth::nn::MlpModel>,
) -> Result<String> {
    let n = target.qubits();
    let id = Unitary::identity(n);
    let mut prefix = Unitary::identity(n);
    let mut out = String::from("step,d_hs,d_worst,f_avg,predicted_mdl\n");
    for step in 0..=circuit.len() {
        if step > 0 {
            prefix.apply_gate(circuit.gates()[step - 1]);
        }
        let r = residual(&prefix, target)?;
        let pred = match model {
            Some(m) => format!(
                "{:.6}",
                m.predict(&mdlsynth::datagen::featurize(&r, m.qubits())?)?
            ),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{step},{:.9},{:.9},{:.9},{pred}",
            hs_distance(&r, &id)?,
            worst_case_distance(&r, &id)?,
            fidelity_to_identity(&r).value(),
        );
    }
    Ok(out)
}

pub fn metrics_trace(ctx: &Ctx, a: TraceArgs) -> Result<()> {
    let circuit = read_circuit(&a.circuit)?;
    let target = match &a.target {
        Some(p) => read_target(p)?,
        None => circuit.unitary(),
    };
    if target.qubits() != circuit.qubits() {
        bail!(
            "circuit has {} qubits but the target has {}",
            circuit.qubits(),
            target.qubits()
        );
    }
    let model = match &a.model {
        Some(p) => Some(load_model_for(p, target.qubits())?),
        None => None,
    };
    let csv = trace_csv(&circuit, &target, model.as_ref())?;
    let path = ctx.out.write(&a.out, csv)?;
    println!("{}", path.display());
    Ok(())
}
