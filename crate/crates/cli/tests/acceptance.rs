//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 6 8`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anyhow::{ensure, Result};
use mdlsynth::bench::{
    budget_csv, budget_curve, build_structured, random_suite, RandomSuiteConfig,
};
use mdlsynth::datagen::{
    generate_examples, sample_circuit, unflatten, Dataset, ExampleStream, SamplerConfig,
    TrainingExample,
};
use mdlsynth::nn::{train, validation_set, MlpModel, TrainConfig, TrainOutcome};
use mdlsynth::oracle::{
    exact_mdl_with, verify_label_bound_with, MdlTable, OracleOptions, OracleOutcome,
};
use mdlsynth::par::Execution;
use mdlsynth::peephole::optimize;
use mdlsynth::rng::substream;
use mdlsynth::search::{
    gumbel_top_b, run_trial, synthesize, variant_schedule, SearchConfig, SynthesisResult,
};
use mdlsynth::{avg_fidelity, Circuit, Gate, Unitary};
use rand::Rng;
use serde_json::Value;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

/// Average gate fidelity straight from its trace definition.
fn reference_fidelity(u: &Unitary, v: &Unitary) -> f64 {
    let d = u.dim();
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in u.entries().iter().zip(v.entries()) {
        // conj(a) * b
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    let d = d as f64;
    (re * re + im * im + d) / (d * (d + 1.0))
}

fn criterion_1() -> Result<Verdict> {
    let mut rng = substream(1, "acceptance", 1);
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        let u = Unitary::random(n, &mut rng);
        worst = worst.max((avg_fidelity(&u, &u)?.value() - 1.0).abs());
    }
    let x: Circuit = "QUBITS 1\nH 0\nS 0\nS 0\nH 0\n".parse()?;
    let x = x.unitary();
    let ix = avg_fidelity(&Unitary::identity(1), &x)?.value();
    let oracle = reference_fidelity(&Unitary::identity(1), &x);
    let pass =
        worst <= 1e-12 && (ix - 1.0 / 3.0).abs() <= 1e-12 && (oracle - 1.0 / 3.0).abs() <= 1e-12;
    verdict(
        pass,
        format!("max |F(U,U)-1| = {worst:.1e}, F(I,X) = {ix:.15}"),
    )
}

fn criterion_2() -> Result<Verdict> {
    let mut rng = substream(2, "acceptance", 2);
    let mut model = MlpModel::new(2, &[16, 8], &mut rng)?;
    ensure!(
        model.layer_dims() == [32, 16, 8, 1],
        "unexpected dims {:?}",
        model.layer_dims()
    );
    let batch: Vec<f64> = (0..20 * 32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..10.0)).collect();
    let (_, grad) = model.loss_and_grad(&batch, &labels)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..model.param_count() {
        let p = model.params()[i];
        model.params_mut()[i] = p + h;
        let up = model.loss_and_grad(&batch, &labels)?.0;
        model.params_mut()[i] = p - h;
        let down = model.loss_and_grad(&batch, &labels)?.0;
        model.params_mut()[i] = p;
        let numeric = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    verdict(
        worst <= 1e-4,
        format!(
            "{} parameters, max relative error {worst:.2e}",
            model.param_count()
        ),
    )
}

fn criterion_3() -> Result<Verdict> {
    const DRAWS: usize = 50_000;
    let cases: [(&[f64], f64); 3] = [
        (&[0.0, 1.0, 2.0], 1.0),
        (&[-3.5, -2.0, -4.1], 1.0),
        (&[0.3, 0.1, -0.4], 0.5),
    ];
    let mut rng = substream(3, "acceptance", 3);
    let mut worst: f64 = 0.0;
    for (scores, tau) in cases {
        let mut counts = [0usize; 3];
        for _ in 0..DRAWS {
            counts[gumbel_top_b(scores, 1, tau, &mut rng)[0]] += 1;
        }
        let z: f64 = scores.iter().map(|s| (s / tau).exp()).sum();
        let tv: f64 = scores
            .iter()
            .zip(counts)
            .map(|(s, c)| ((s / tau).exp() / z - c as f64 / DRAWS as f64).abs())
            .sum::<f64>()
            / 2.0;
        worst = worst.max(tv);
    }
    verdict(
        worst <= 0.02,
        format!("max total variation {worst:.4} over 3 score sets"),
    )
}

fn criterion_4() -> Result<Verdict> {
    let sampler = SamplerConfig::new(2, 4)
        .with_t_range(0, 4)
        .with_gate_range(1, 10);
    let examples: Vec<TrainingExample> =
        generate_examples(&sampler, 2000, true, Execution::default())?
            .into_iter()
            .filter(|e| e.label <= 7)
            .take(200)
            .collect();
    ensure!(
        examples.len() == 200,
        "only {} examples with label <= 7",
        examples.len()
    );
    let ds = Dataset {
        qubits: 2,
        examples,
    };
    let table = MdlTable::build(2, 7, 4_000_000, Execution::default())?;
    let report = verify_label_bound_with(&ds, &table)?;
    // Spot-check the table against a direct search.
    for ex in ds.examples.iter().take(10) {
        let r = unflatten(&ex.features)?;
        let direct = exact_mdl_with(&r, &OracleOptions::new(7, 1.0 - 1e-6))?.depth();
        ensure!(direct == table.lookup(&r)?, "table and search disagree");
    }
    verdict(
        report.holds() && report.checked == 200,
        format!(
            "{} checked, {} violations, mean label gap {:.2}",
            report.checked,
            report.violations.len(),
            report.mean_gap
        ),
    )
}

fn criterion_5() -> Result<Verdict> {
    let mut rng = substream(5, "acceptance", 5);
    let (mut worst, mut grew, mut unstable, mut removed) = (0.0f64, 0, 0, 0);
    for _ in 0..500 {
        let n = rng.random_range(1..=3);
        let actions = Gate::all_actions(n);
        let len = rng.random_range(0..=30);
        let gates = (0..len)
            .map(|_| actions[rng.random_range(0..actions.len())])
            .collect();
        let c = Circuit::new(n, gates)?;
        let o = optimize(&c);
        worst = worst.max(1.0 - reference_fidelity(&o.unitary(), &c.unitary()));
        grew += (o.len() > c.len()) as usize;
        unstable += (optimize(&o) != o) as usize;
        removed += c.len() - o.len().min(c.len());
    }
    verdict(
        worst <= 1e-9 && grew == 0 && unstable == 0,
        format!(
            "max infidelity {worst:.1e}, {grew} grew, {unstable} not idempotent, {removed} gates removed"
        ),
    )
}

fn lr_schedule(cfg: TrainConfig) -> TrainConfig {
    let total = cfg.total_steps();
    TrainConfig {
        warmup_steps: total / 10,
        cosine_t_max: total - total / 10,
        ..cfg
    }
}

fn desk_config(seed: u64) -> TrainConfig {
    lr_schedule(TrainConfig {
        hidden: vec![256, 128, 64],
        batch: 128,
        grad_accumulation: 2,
        peak_lr: 2e-3,
        epochs: 10,
        steps_per_epoch: 150,
        replay_buffer: 6000,
        refresh_per_batch: 32,
        seed,
        ..TrainConfig::default()
    })
}

/// Trains on the sampler stream, returning the model and the number of
/// fresh examples consumed.
fn train_streaming(
    sampler: &SamplerConfig,
    cfg: &TrainConfig,
    validation_size: usize,
) -> Result<(TrainOutcome, usize)> {
    let validation = validation_set(sampler, true, validation_size, Execution::default())?;
    let used = Cell::new(0usize);
    let stream =
        ExampleStream::new(sampler.clone(), true, 0)?.inspect(|_| used.set(used.get() + 1));
    let out = train(
        stream,
        &validation,
        sampler.qubits,
        cfg,
        Execution::default(),
    )?;
    Ok((out, used.get()))
}

fn criterion_6() -> Result<(Verdict, Vec<SynthesisResult>)> {
    let start = Instant::now();
    let sampler = SamplerConfig::new(2, 7)
        .with_t_range(0, 6)
        .with_gate_range(1, 14);
    let (trained, used) = train_streaming(&sampler, &desk_config(7), 2048)?;
    let best = &trained.history[trained.best_epoch];
    let train_secs = start.elapsed().as_secs_f64();

    let targets = random_suite(&RandomSuiteConfig {
        qubits: 2,
        t_min: 0,
        t_max: 6,
        per_bucket: 20,
        gate_range: (3, 12),
        seed: 99,
    })?;
    let cfg = SearchConfig {
        beam_width: 10,
        temperature: 1.0,
        trials: 100,
        threshold: 0.9,
        max_steps: 24,
        seed: 99,
        ..SearchConfig::default()
    };
    let mut results = Vec::with_capacity(targets.len());
    let mut per_bucket: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let (mut comparable, mut optimal) = (0, 0);
    for t in &targets {
        let r = synthesize(&t.unitary, &trained.model, &cfg)?;
        let b = per_bucket.entry(t.t_count).or_default();
        b.0 += 1;
        if let Some(c) = &r.circuit {
            b.1 += 1;
            ensure!(reference_fidelity(&c.unitary(), &t.unitary) >= cfg.threshold);
            let oracle = exact_mdl_with(&t.unitary, &OracleOptions::new(7, cfg.threshold))?;
            if let OracleOutcome::Found { depth, .. } = oracle {
                comparable += 1;
                optimal += (c.len() == depth) as usize;
                ensure!(c.len() >= depth, "search beat the oracle");
            }
        }
        results.push(r);
    }
    let solved = results.iter().filter(|r| r.success()).count();
    let rate = solved as f64 / results.len() as f64;
    let opt_rate = if comparable == 0 {
        0.0
    } else {
        optimal as f64 / comparable as f64
    };
    let buckets: Vec<String> = per_bucket
        .iter()
        .map(|(k, (n, s))| format!("k{k}:{s}/{n}"))
        .collect();
    let pass = used >= 20_000 && rate >= 0.9 && opt_rate >= 0.7;
    Ok((
        Verdict {
            pass,
            detail: format!(
                "trained on {used} examples in {train_secs:.0}s (val MAE {:.2}); solved {solved}/{} ({:.1}%) [{}]; oracle-optimal {optimal}/{comparable} ({:.1}%); {:.0}s total",
                best.val_mae,
                results.len(),
                100.0 * rate,
                buckets.join(" "),
                100.0 * opt_rate,
                start.elapsed().as_secs_f64()
            ),
        },
        results,
    ))
}

fn criterion_7() -> Result<Verdict> {
    let start = Instant::now();
    let sampler = SamplerConfig::new(4, 11)
        .with_t_range(0, 2)
        .with_gate_range(1, 14);
    let (trained, _) = train_streaming(&sampler, &desk_config(11), 1024)?;
    let cfg = SearchConfig {
        trials: 200,
        threshold: 0.99,
        max_steps: 16,
        seed: 3,
        ..SearchConfig::default()
    };
    let mut found = Vec::new();
    let mut all_match = true;
    for name in ["ghz4", "cluster4", "gadget4"] {
        let st = build_structured(name)?;
        let r = synthesize(&st.reference.unitary(), &trained.model, &cfg)?;
        if let Some(c) = &r.circuit {
            ensure!(reference_fidelity(&c.unitary(), &st.reference.unitary()) >= cfg.threshold);
        }
        all_match &= r.gate_count() == Some(st.known_gates);
        found.push(format!(
            "{name}={}",
            r.gate_count().map_or("none".into(), |g| g.to_string())
        ));
    }
    let ghz = build_structured("ghz4")?.reference.unitary();
    let t = Instant::now();
    let oracle = exact_mdl_with(&ghz, &OracleOptions::new(4, 0.99))?;
    let oracle_secs = t.elapsed().as_secs_f64();
    let certified = oracle.depth() == Some(4) && oracle_secs < 60.0;
    let how = if all_match {
        "model matches all three"
    } else {
        "model missed a target, falling back to the oracle"
    };
    verdict(
        all_match || certified,
        format!(
            "{} with 200 trials; {how}; oracle ghz4 depth {:?} in {oracle_secs:.2}s; {:.0}s total",
            found.join(" "),
            oracle.depth(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_8(results: &[SynthesisResult]) -> Result<Verdict> {
    let budgets = [1, 5, 25, 100];
    let curve = budget_curve(results, &budgets)?;
    let monotone = curve.windows(2).all(|w| w[0].rate <= w[1].rate);
    let csv = budget_csv(&curve);
    let header_ok = csv.starts_with("budget,solved,total,rate,ci99_low,ci99_high\n");
    let bracketed = curve
        .iter()
        .all(|p| p.ci_low <= p.rate && p.rate <= p.ci_high);
    let rates: Vec<String> = curve
        .iter()
        .map(|p| {
            format!(
                "{}:{:.3}[{:.3},{:.3}]",
                p.budget, p.rate, p.ci_low, p.ci_high
            )
        })
        .collect();
    verdict(
        monotone && header_ok && bracketed && csv.lines().count() == budgets.len() + 1,
        format!("rates {}", rates.join(" ")),
    )
}

fn criterion_9() -> Result<Verdict> {
    let start = Instant::now();
    let sampler = SamplerConfig::new(3, 21)
        .with_t_range(0, 3)
        .with_gate_range(1, 12);
    let cfg = lr_schedule(TrainConfig {
        hidden: vec![64, 32],
        batch: 64,
        grad_accumulation: 1,
        peak_lr: 3e-3,
        epochs: 5,
        steps_per_epoch: 80,
        refresh_per_batch: 32,
        seed: 21,
        ..TrainConfig::default()
    });
    let (trained, _) = train_streaming(&sampler, &cfg, 256)?;
    let search = SearchConfig {
        trials: 24,
        threshold: 0.99,
        max_steps: 12,
        seed: 9,
        exec: Execution::Sequential,
        ..SearchConfig::default()
    };
    let variants = variant_schedule(3, &search);
    let targets_cfg = sampler.clone().with_gate_range(3, 10);
    let mut rng = substream(9, "acceptance", 9);
    let (mut checked, mut failures, mut solved_targets) = (0, 0, 0);
    for _ in 0..50 {
        let target = sample_circuit(&targets_cfg, &mut rng)?.unitary();
        let mut any = false;
        for i in 0..search.trials {
            let v = &variants[i % variants.len()];
            let mut trial_rng = substream(search.seed, "gumbel", i as u64);
            let out = run_trial(
                &v.transform(&target)?,
                &trained.model,
                &search,
                &mut trial_rng,
            )?;
            let Some(found) = out.circuit else { continue };
            any = true;
            if v.permutation.iter().enumerate().all(|(i, &p)| i == p) && !v.inverse {
                continue;
            }
            checked += 1;
            let mapped = v.back_map(&found)?;
            let f = reference_fidelity(&mapped.unitary(), &target);
            let f_opt = reference_fidelity(&optimize(&mapped).unitary(), &target);
            if f < search.threshold || f_opt < search.threshold {
                failures += 1;
            }
        }
        solved_targets += any as usize;
    }
    verdict(
        failures == 0 && checked > 0,
        format!(
            "{checked} permuted/inverse solutions verified, {failures} failures, {solved_targets}/50 targets solved; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn quickstart(dir: &Path) -> Result<()> {
    let out = Command::new(env!("CARGO_BIN_EXE_mdlsynth"))
        .args(["--seed", "17", "--log-level", "warn", "--out-dir"])
        .arg(dir)
        .args(["quickstart", "--qubits", "2"])
        .env_remove("MDLSYN_OUT_DIR")
        .env_remove("MDLSYN_WORKERS")
        .output()?;
    ensure!(
        out.status.success(),
        "quickstart exited with {}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn criterion_10() -> Result<Verdict> {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    quickstart(a.path())?;
    quickstart(b.path())?;
    let (qa, qb) = (a.path().join("quickstart"), b.path().join("quickstart"));
    let mut names: Vec<String> = fs::read_dir(&qa)?
        .map(|e| Ok(e?.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_>>()?;
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let (x, y) = (
            fs::read(qa.join(name))?,
            fs::read(qb.join(name)).unwrap_or_default(),
        );
        let same = if name.ends_with(".json") {
            let mut x: Value = serde_json::from_slice(&x)?;
            let mut y: Value = serde_json::from_slice(&y)?;
            ensure!(x.get("timing").is_some(), "{name} lacks a timing field");
            strip_timing(&mut x);
            strip_timing(&mut y);
            x == y
        } else {
            x == y
        };
        if !same {
            differing.push(name.clone());
        }
    }
    let summary: Value = serde_json::from_slice(&fs::read(qa.join("summary.json"))?)?;
    let solved: u64 = summary["suites"]
        .as_array()
        .map(|s| s.iter().filter_map(|x| x["solved"].as_u64()).sum())
        .unwrap_or(0);
    verdict(
        differing.is_empty() && names.len() >= 8 && solved > 0,
        format!(
            "{} files compared, differing {:?}, {solved} targets solved; {:.0}s for two runs",
            names.len(),
            differing,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |i: usize| only.is_empty() || only.contains(&i);
    let titles = [
        "fidelity identity",
        "gradient correctness",
        "gumbel-top-b law",
        "label soundness",
        "peephole semantics",
        "desk-scale end-to-end",
        "structured circuits at n = 4",
        "budget monotonicity",
        "symmetry correctness",
        "reproducibility",
    ];

    let mut shared: Option<Vec<SynthesisResult>> = None;
    let mut failed = 0;
    for id in 1..=10 {
        if !wanted(id) && !(id == 6 && wanted(8)) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6().map(|(v, r)| {
                shared = Some(r);
                v
            }),
            7 => criterion_7(),
            8 => match &shared {
                Some(r) => criterion_8(r),
                None => verdict(false, "no end-to-end results to sweep"),
            },
            9 => criterion_9(),
            10 => criterion_10(),
            _ => unreachable!(),
        }));
        if !wanted(id) {
            continue;
        }
        let v = match outcome {
            Ok(Ok(v)) => v,
            Ok(Err(e)) => Verdict {
                pass: false,
                detail: format!("error: {e:#}"),
            },
            Err(_) => Verdict {
                pass: false,
                detail: "panicked".into(),
            },
        };
        failed += !v.pass as usize;
        println!(
            "criterion {id:>2} [{}]: {} ({}; {:.1}s)",
            titles[id - 1],
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
