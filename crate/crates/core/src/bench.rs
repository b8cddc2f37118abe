//! Evaluation harnesses: structured reference circuits, seeded random
//! suites bucketed by T-count, and trial-budget sweeps with CSV and SVG
//! output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::datagen::{sample_with_t_count, SamplerConfig};
use crate::error::{Error, Result};
use crate::gate::{Gate, MAX_QUBITS};
use crate::nn::MlpModel;
use crate::par::map_slice;
use crate::rng::substream;
use crate::search::{synthesize, SearchConfig, SynthesisResult};
use crate::unitary::Unitary;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_549_1;

pub const STRUCTURED_NAMES: [&str; 7] = [
    "ghz4", "cluster4", "gadget4", "ghz5", "cluster5", "gadget5", "code513",
];

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredTarget {
    pub name: String,
    pub qubits: usize,
    pub reference: Circuit,
    /// Best known gate count.
    pub known_gates: usize,
}

fn cx(c: usize, t: usize) -> Gate {
    Gate::Cx(c as u8, t as u8)
}

fn h(q: usize) -> Gate {
    Gate::H(q as u8)
}

/// `CZ(a, b) = H(b) CX(a, b) H(b)`.
fn cz(a: usize, b: usize) -> [Gate; 3] {
    [h(b), cx(a, b), h(b)]
}

pub fn ghz(n: usize) -> Result<Circuit> {
    let mut gates = vec![h(0)];
    gates.extend((1..n).map(|i| cx(0, i)));
    Circuit::new(n, gates)
}

pub fn linear_cluster(n: usize) -> Result<Circuit> {
    let mut gates: Vec<Gate> = (0..n).map(h).collect();
    for i in 0..n.saturating_sub(1) {
        gates.extend(cz(i, i + 1));
    }
    Circuit::new(n, gates)
}

/// `exp(-i pi/8 Z...Z)` up to phase: CX ladder, T on the last qubit, ladder
/// reversed.
pub fn phase_gadget(n: usize) -> Result<Circuit> {
    let ladder: Vec<Gate> = (0..n.saturating_sub(1)).map(|i| cx(i, i + 1)).collect();
    let mut gates = ladder.clone();
    gates.push(Gate::T((n - 1) as u8));
    gates.extend(ladder.into_iter().rev());
    Circuit::new(n, gates)
}

/// Encoder of the five-qubit perfect code with the logical input on qubit 0:
/// fan the input out, Hadamard every qubit, then CZ around the ring.
pub fn five_qubit_code_encoder() -> Result<Circuit> {
    let mut gates: Vec<Gate> = (1..5).map(|i| cx(0, i)).collect();
    gates.extend((0..5).map(h));
    for i in 0..5 {
        gates.extend(cz(i, (i + 1) % 5));
    }
    Circuit::new(5, gates)
}

/// Builds a named target: `ghz<n>`, `cluster<n>`, `gadget<n>` for
/// `n` in 2..=5, or `code513`.
pub fn build_structured(name: &str) -> Result<StructuredTarget> {
    let unknown = || Error::UnknownTarget(name.to_string());
    let (qubits, reference, known_gates) = if name == "code513" {
        (5, five_qubit_code_encoder()?, 14)
    } else {
        let split = name
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(unknown)?;
        let n: usize = name[split..].parse().map_err(|_| unknown())?;
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(unknown());
        }
        match &name[..split] {
            "ghz" => (n, ghz(n)?, n),
            "cluster" => (n, linear_cluster(n)?, 2 * n - 1),
            "gadget" => (n, phase_gadget(n)?, 2 * n - 1),
            _ => return Err(unknown()),
        }
    };
    Ok(StructuredTarget {
        name: name.to_string(),
        qubits,
        reference,
        known_gates,
    })
}

/// The GHZ, cluster and phase-gadget targets on `n` qubits.
pub fn structured_family(n: usize) -> Result<Vec<StructuredTarget>> {
    ["ghz", "cluster", "gadget"]
        .iter()
        .map(|f| build_structured(&format!("{f}{n}")))
        .collect()
}

/// A named synthesis target with the circuit that generated it.
#[derive(Clone, Debug)]
pub struct BenchTarget {
    pub name: String,
    pub t_count: usize,
    pub reference: Circuit,
    pub unitary: Unitary,
}

impl BenchTarget {
    pub fn new(name: impl Into<String>, reference: Circuit) -> Self {
        BenchTarget {
            name: name.into(),
            t_count: reference.t_count(),
            unitary: reference.unitary(),
            reference,
        }
    }

    pub fn qubits(&self) -> usize {
        self.reference.qubits()
    }
}

impl From<StructuredTarget> for BenchTarget {
    fn from(s: StructuredTarget) -> Self {
        BenchTarget::new(s.name, s.reference)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSuiteConfig {
    pub qubits: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub per_bucket: usize,
    pub gate_range: (usize, usize),
    pub seed: u64,
}

impl RandomSuiteConfig {
    pub fn desk(qubits: usize, seed: u64) -> Self {
        RandomSuiteConfig {
            qubits,
            t_min: 0,
            t_max: 8,
            per_bucket: 20,
            gate_range: (3, 30),
            seed,
        }
    }
}

/// `per_bucket` sampled targets for every T-count in `t_min..=t_max`; each
/// bucket draws from its own seed stream.
pub fn random_suite(cfg: &RandomSuiteConfig) -> Result<Vec<BenchTarget>> {
    if cfg.t_min > cfg.t_max {
        return Err(Error::Config("t_min exceeds t_max".into()));
    }
    let sampler = SamplerConfig::new(cfg.qubits, cfg.seed)
        .with_t_range(cfg.t_min, cfg.t_max)
        .with_gate_range(cfg.gate_range.0, cfg.gate_range.1);
    sampler.validate()?;
    let mut out = Vec::with_capacity((cfg.t_max - cfg.t_min + 1) * cfg.per_bucket);
    for k in cfg.t_min..=cfg.t_max {
        let mut rng = substream(cfg.seed, "random-suite", k as u64);
        for i in 0..cfg.per_bucket {
            let c = sample_with_t_count(&sampler, k, &mut rng)?;
            out.push(BenchTarget::new(format!("n{}-t{k}-{i}", cfg.qubits), c));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub name: String,
    pub qubits: usize,
    pub t_count: usize,
    pub reference_gates: usize,
    pub success: bool,
    pub gate_count: Option<usize>,
    pub fidelity: f64,
    pub trials_used: usize,
    /// Index of the first successful trial.
    pub first_success: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub qubits: usize,
    pub t_count: usize,
    pub total: usize,
    pub solved: usize,
    pub rate: f64,
}

/// Wall-clock measurements, kept apart so the rest of a report is
/// reproducible byte for byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub per_target_secs: Vec<f64>,
    pub generated_at_unix: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub threshold: f64,
    pub entries: Vec<BenchEntry>,
    pub buckets: Vec<BucketSummary>,
    pub timing: Timing,
}

impl BenchReport {
    pub fn solved(&self) -> usize {
        self.entries.iter().filter(|e| e.success).count()
    }

    pub fn success_rate(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.solved() as f64 / self.entries.len() as f64
    }

    /// Entries as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "name,qubits,t_count,reference_gates,success,gate_count,fidelity,trials_used,first_success\n",
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.name,
                e.qubits,
                e.t_count,
                e.reference_gates,
                e.success,
                e.gate_count.map(|g| g.to_string()).unwrap_or_default(),
                e.fidelity,
                e.trials_used,
                e.first_success.map(|g| g.to_string()).unwrap_or_default(),
            );
        }
        out
    }
}

fn summarize(entries: &[BenchEntry]) -> Vec<BucketSummary> {
    let mut buckets: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for e in entries {
        let b = buckets.entry((e.qubits, e.t_count)).or_default();
        b.0 += 1;
        b.1 += e.success as usize;
    }
    buckets
        .into_iter()
        .map(|((qubits, t_count), (total, solved))| BucketSummary {
            qubits,
            t_count,
            total,
            solved,
            rate: solved as f64 / total as f64,
        })
        .collect()
}

/// Synthesizes every target and assembles the report. The per-target
/// results are returned alongside for budget sweeps.
pub fn run_targets(
    targets: &[BenchTarget],
    model: &MlpModel,
    cfg: &SearchConfig,
) -> Result<(BenchReport, Vec<SynthesisResult>)> {
    let start = Instant::now();
    let results = map_slice(cfg.exec, targets, |t| synthesize(&t.unitary, model, cfg));
    let mut entries = Vec::with_capacity(targets.len());
    let mut per_target_secs = Vec::with_capacity(targets.len());
    let mut kept = Vec::with_capacity(targets.len());
    for (t, r) in targets.iter().zip(results) {
        let r = r?;
        entries.push(BenchEntry {
            name: t.name.clone(),
            qubits: t.qubits(),
            t_count: t.t_count,
            reference_gates: t.reference.len(),
            success: r.success(),
            gate_count: r.gate_count(),
            fidelity: r.achieved_fidelity,
            trials_used: r.trials_used,
            first_success: r.trials.iter().position(|x| x.success),
        });
        per_target_secs.push(r.wall_time_secs);
        kept.push(r);
    }
    let report = BenchReport {
        threshold: cfg.threshold,
        buckets: summarize(&entries),
        entries,
        timing: Timing {
            total_secs: start.elapsed().as_secs_f64(),
            per_target_secs,
            generated_at_unix: None,
        },
    };
    Ok((report, kept))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub budget: usize,
    pub solved: usize,
    pub total: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Success rate at each budget, counting a target solved at budget `b` when
/// any of its first `b` trials succeeded. Budgets share trial prefixes, so
/// the curve is non-decreasing.
pub fn budget_curve(results: &[SynthesisResult], budgets: &[usize]) -> Result<Vec<BudgetPoint>> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) || budgets[0] == 0 {
        return Err(Error::Config(format!(
            "budgets must be positive and strictly ascending, got {budgets:?}"
        )));
    }
    let last = *budgets.last().expect("non-empty");
    if let Some(r) = results.iter().find(|r| r.trials.len() < last) {
        return Err(Error::Config(format!(
            "budget {last} exceeds the {} recorded trials",
            r.trials.len()
        )));
    }
    Ok(budgets
        .iter()
        .map(|&budget| {
            let solved = results.iter().filter(|r| r.solved_within(budget)).count();
            let total = results.len();
            let (ci_low, ci_high) = wilson_interval(solved, total, Z_99);
            BudgetPoint {
                budget,
                solved,
                total,
                rate: if total == 0 {
                    0.0
                } else {
                    solved as f64 / total as f64
                },
                ci_low,
                ci_high,
            }
        })
        .collect())
}

/// Runs every target once with the largest budget and derives the curve
/// from nested trial prefixes.
pub fn budget_sweep(
    targets: &[BenchTarget],
    model: &MlpModel,
    cfg: &SearchConfig,
    budgets: &[usize],
) -> Result<(Vec<BudgetPoint>, BenchReport)> {
    let trials = budgets.iter().copied().max().unwrap_or(1);
    let cfg = SearchConfig {
        trials,
        ..cfg.clone()
    };
    let (report, results) = run_targets(targets, model, &cfg)?;
    Ok((budget_curve(&results, budgets)?, report))
}

pub fn budget_csv(points: &[BudgetPoint]) -> String {
    let mut out = String::from("budget,solved,total,rate,ci99_low,ci99_high\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            p.budget, p.solved, p.total, p.rate, p.ci_low, p.ci_high
        );
    }
    out
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Success rate against trial budget (log-scaled axis) with the confidence
/// band.
pub fn budget_svg(points: &[BudgetPoint]) -> String {
    let plot_w = SVG_W - 2.0 * MARGIN;
    let plot_h = SVG_H - 2.0 * MARGIN;
    let lo = points.first().map_or(1.0, |p| (p.budget as f64).ln());
    let hi = points.last().map_or(1.0, |p| (p.budget as f64).ln());
    let x = |b: usize| {
        let span = (hi - lo).max(1e-9);
        MARGIN + ((b as f64).ln() - lo) / span * plot_w
    };
    let y = |r: f64| SVG_H - MARGIN - r * plot_h;
    let mut svg = svg_header("Success rate vs trial budget");
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    if !points.is_empty() {
        let upper: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.budget), y(p.ci_high)))
            .collect();
        let lower: Vec<String> = points
            .iter()
            .rev()
            .map(|p| format!("{:.1},{:.1}", x(p.budget), y(p.ci_low)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polygon points="{} {}" fill="#9ecae1" fill-opacity="0.5"/>"##,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.budget), y(p.rate)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
            line.join(" ")
        );
    }
    for p in points {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            x(p.budget),
            y(p.rate),
            x(p.budget),
            SVG_H - MARGIN + 16.0,
            p.budget
        );
    }
    for tick in [0.0, 0.5, 1.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{tick:.1}</text>"#,
            MARGIN - 6.0,
            y(tick) + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Success rate per (qubits, T-count) bucket as a colored grid.
pub fn heatmap_svg(buckets: &[BucketSummary]) -> String {
    let qubits: Vec<usize> = {
        let mut q: Vec<usize> = buckets.iter().map(|b| b.qubits).collect();
        q.sort_unstable();
        q.dedup();
        q
    };
    let max_t = buckets.iter().map(|b| b.t_count).max().unwrap_or(0);
    let cols = max_t + 1;
    let cell_w = (SVG_W - 2.0 * MARGIN) / cols as f64;
    let cell_h = ((SVG_H - 2.0 * MARGIN) / qubits.len().max(1) as f64).min(60.0);
    let mut svg = svg_header("Success rate by T-count");
    for b in buckets {
        let row = qubits.iter().position(|&q| q == b.qubits).unwrap_or(0);
        let shade = (255.0 * (1.0 - b.rate)).round() as u8;
        let x = MARGIN + b.t_count as f64 * cell_w;
        let y = MARGIN + row as f64 * cell_h;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{cell_w:.1}" height="{cell_h:.1}" fill="rgb({shade},{shade},255)" stroke="white"/><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.2}</text>"#,
            x + cell_w / 2.0,
            y + cell_h / 2.0 + 4.0,
            b.rate
        );
    }
    for (row, q) in qubits.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">n={q}</text>"#,
            MARGIN - 6.0,
            MARGIN + (row as f64 + 0.5) * cell_h + 4.0
        );
    }
    for t in 0..cols {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t}</text>"#,
            MARGIN + (t as f64 + 0.5) * cell_w,
            MARGIN + qubits.len() as f64 * cell_h + 16.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\" font-family=\"sans-serif\">\n\
         <text x=\"{}\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        SVG_W / 2.0
    )
}
