//! Stochastic beam search over residual unitaries guided by the MDL model.
//!
//! A candidate commits gates in circuit order; its residual is the part of
//! the target still to be applied, `R = U* U(C)^dagger`, so a candidate whose
//! residual is close to the identity is a solution. Independent trials run
//! on symmetry variants of the target (qubit relabelings and the adjoint) and
//! are mapped back before ranking.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::datagen::featurize;
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::metrics::{avg_fidelity, fidelity_to_identity};
use crate::nn::MlpModel;
use crate::oracle::CanonicalKey;
use crate::par::{map_indexed, Execution};
use crate::peephole::optimize;
use crate::rng::{substream, StreamRng};
use crate::unitary::{validate_permutation, Unitary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub beam_width: usize,
    pub max_steps: usize,
    pub temperature: f64,
    pub threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub permutation_trials: bool,
    pub inverse_trials: bool,
    pub exec: Execution,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 10,
            max_steps: 60,
            temperature: 1.0,
            threshold: 0.99,
            trials: 200,
            seed: 0,
            permutation_trials: true,
            inverse_trials: true,
            exec: Execution::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 || self.max_steps == 0 || self.trials == 0 {
            return Err(Error::Config(
                "beam width, max steps and trials must be at least 1".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BeamCandidate {
    pub residual: Unitary,
    pub circuit: Circuit,
    /// Negated predicted remaining gate count; higher is better.
    pub score: f64,
}

/// One symmetry variant of the target a trial searches on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    /// Qubit `q` of the original target sits at `permutation[q]`.
    pub permutation: Vec<usize>,
    /// Search the adjoint of the permuted target.
    pub inverse: bool,
}

impl Variant {
    pub fn identity(n: usize) -> Self {
        Variant {
            permutation: (0..n).collect(),
            inverse: false,
        }
    }

    pub fn transform(&self, target: &Unitary) -> Result<Unitary> {
        let permuted = permute_target(target, &self.permutation)?;
        Ok(if self.inverse {
            permuted.adjoint()
        } else {
            permuted
        })
    }

    /// Maps a circuit for the transformed target back to the original.
    pub fn back_map(&self, circuit: &Circuit) -> Result<Circuit> {
        let c = if self.inverse {
            adjoint_circuit(circuit)
        } else {
            circuit.clone()
        };
        unpermute_circuit(&c, &self.permutation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub variant: Variant,
    pub success: bool,
    /// Gate count of the back-mapped, optimized solution.
    pub gate_count: Option<usize>,
    /// Fidelity of the solution against the original target, or the best
    /// residual-to-identity fidelity reached when unsolved.
    pub fidelity: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub circuit: Option<Circuit>,
    pub achieved_fidelity: f64,
    pub trials_used: usize,
    pub steps_used: usize,
    pub wall_time_secs: f64,
    pub trials: Vec<TrialRecord>,
}

impl SynthesisResult {
    pub fn success(&self) -> bool {
        self.circuit.is_some()
    }

    pub fn gate_count(&self) -> Option<usize> {
        self.circuit.as_ref().map(Circuit::len)
    }

    /// Whether any of the first `budget` trials succeeded.
    pub fn solved_within(&self, budget: usize) -> bool {
        self.trials.iter().take(budget).any(|t| t.success)
    }
}

/// `P U P^dagger`.
pub fn permute_target(target: &Unitary, permutation: &[usize]) -> Result<Unitary> {
    target.permute_qubits(permutation)
}

/// Relabels a circuit found for `P U P^dagger` so it implements `U`.
pub fn unpermute_circuit(circuit: &Circuit, permutation: &[usize]) -> Result<Circuit> {
    validate_permutation(permutation, circuit.qubits())?;
    let mut inverse = vec![0; permutation.len()];
    for (q, &p) in permutation.iter().enumerate() {
        inverse[p] = q;
    }
    circuit.relabel(&inverse)
}

/// Reversed circuit with every gate replaced by its adjoint spelled over the
/// gate alphabet.
pub fn adjoint_circuit(circuit: &Circuit) -> Circuit {
    let gates = circuit
        .gates()
        .iter()
        .rev()
        .flat_map(Gate::adjoint_expansion)
        .collect();
    Circuit::from_parts_unchecked(circuit.qubits(), gates)
}

fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for q in 0..used.len() {
            if !used[q] {
                used[q] = true;
                prefix.push(q);
                rec(prefix, used, out);
                prefix.pop();
                used[q] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// The round-robin variant schedule: the untouched target first, then the
/// remaining variants in an order shuffled by the seed.
pub fn variant_schedule(n: usize, cfg: &SearchConfig) -> Vec<Variant> {
    let perms = if cfg.permutation_trials {
        lexicographic_permutations(n)
    } else {
        vec![(0..n).collect()]
    };
    let mut variants: Vec<Variant> = perms
        .iter()
        .map(|p| Variant {
            permutation: p.clone(),
            inverse: false,
        })
        .collect();
    if cfg.inverse_trials {
        variants.extend(perms.into_iter().map(|permutation| Variant {
            permutation,
            inverse: true,
        }));
    }
    variants[1..].shuffle(&mut substream(cfg.seed, "trial-scheduling", 0));
    variants
}

/// Appends every action to every beam member and scores the children with
/// one batched model call.
pub fn expand(
    beam: &[BeamCandidate],
    actions: &[Gate],
    model: &MlpModel,
) -> Result<Vec<BeamCandidate>> {
    let mut children = Vec::with_capacity(beam.len() * actions.len());
    let mut features = Vec::new();
    for parent in beam {
        for &g in actions {
            let mut residual = parent.residual.clone();
            residual.peel_gate(g);
            features.extend(featurize(&residual, model.qubits())?);
            let mut gates = Vec::with_capacity(parent.circuit.len() + 1);
            gates.extend_from_slice(parent.circuit.gates());
            gates.push(g);
            children.push(BeamCandidate {
                residual,
                circuit: Circuit::from_parts_unchecked(parent.circuit.qubits(), gates),
                score: 0.0,
            });
        }
    }
    let predictions = model.forward(&features)?;
    for (c, p) in children.iter_mut().zip(predictions) {
        c.score = -p;
    }
    Ok(children)
}

/// Indices of the `b` largest `score / tau + Gumbel(0, 1)` keys, best first.
/// Equivalent to sampling `b` items without replacement from
/// `softmax(score / tau)`.
pub fn gumbel_top_b(scores: &[f64], b: usize, tau: f64, rng: &mut impl Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (s / tau - (-u.ln()).ln(), i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(b).map(|(_, i)| i).collect()
}

/// Drops candidates whose residual equals an earlier one up to phase.
fn dedup(candidates: Vec<BeamCandidate>) -> Result<Vec<BeamCandidate>> {
    let mut seen = HashSet::with_capacity(candidates.len());
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        if seen.insert(CanonicalKey::of(&c.residual)?) {
            out.push(c);
        }
    }
    Ok(out)
}

fn better(a: &(Circuit, f64), b: &(Circuit, f64)) -> Ordering {
    a.0.len()
        .cmp(&b.0.len())
        .then(b.1.total_cmp(&a.1))
        .then_with(|| a.0.cmp(&b.0))
}

/// Raw outcome of one beam search.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    /// The best converged circuit, as searched (not optimized).
    pub circuit: Option<Circuit>,
    /// Residual-to-identity fidelity of the solution, or the best reached.
    pub fidelity: f64,
    pub steps: usize,
}

/// One beam search on `target`.
pub fn run_trial(
    target: &Unitary,
    model: &MlpModel,
    cfg: &SearchConfig,
    rng: &mut StreamRng,
) -> Result<TrialOutcome> {
    cfg.validate()?;
    model.check_target(target.qubits())?;
    let n = target.qubits();
    let actions = Gate::all_actions(n);
    let mut beam = vec![BeamCandidate {
        residual: target.clone(),
        circuit: Circuit::empty(n)?,
        score: 0.0,
    }];
    let mut best_seen = 0.0f64;
    for step in 0..=cfg.max_steps {
        let mut solutions = Vec::new();
        for c in &beam {
            let f = fidelity_to_identity(&c.residual).0;
            best_seen = best_seen.max(f);
            if f >= cfg.threshold {
                solutions.push((c.circuit.clone(), f));
            }
        }
        if let Some(best) = solutions.into_iter().min_by(better) {
            return Ok(TrialOutcome {
                circuit: Some(best.0),
                fidelity: best.1,
                steps: step,
            });
        }
        if step == cfg.max_steps {
            break;
        }
        let candidates = dedup(expand(&beam, &actions, model)?)?;
        if candidates.is_empty() {
            break;
        }
        let scores: Vec<f64> = candidates.iter().map(|c| c.score).collect();
        let picked = gumbel_top_b(&scores, cfg.beam_width, cfg.temperature, rng);
        let mut slots: Vec<Option<BeamCandidate>> = candidates.into_iter().map(Some).collect();
        beam = picked
            .into_iter()
            .map(|i| slots[i].take().expect("distinct indices"))
            .collect();
    }
    Ok(TrialOutcome {
        circuit: None,
        fidelity: best_seen,
        steps: cfg.max_steps,
    })
}

fn run_variant(
    target: &Unitary,
    model: &MlpModel,
    cfg: &SearchConfig,
    trial: usize,
    variant: &Variant,
) -> Result<(TrialRecord, Option<(Circuit, f64)>)> {
    let transformed = variant.transform(target)?;
    let mut rng = substream(cfg.seed, "gumbel", trial as u64);
    let out = run_trial(&transformed, model, cfg, &mut rng)?;
    let mut solution = None;
    let mut fidelity = out.fidelity;
    if let Some(found) = &out.circuit {
        let mapped = optimize(&variant.back_map(found)?);
        let f = avg_fidelity(&mapped.unitary(), target)?.0;
        if f >= cfg.threshold {
            fidelity = f;
            solution = Some((mapped, f));
        } else {
            log::warn!("trial {trial}: back-mapped circuit fails verification (fidelity {f})");
        }
    }
    let record = TrialRecord {
        trial,
        variant: variant.clone(),
        success: solution.is_some(),
        gate_count: solution.as_ref().map(|(c, _)| c.len()),
        fidelity,
        steps: out.steps,
    };
    Ok((record, solution))
}

/// Runs `cfg.trials` independent trials cycling through the symmetry
/// variants and returns the shortest verified solution; ties go to higher
/// fidelity, then the earlier trial.
pub fn synthesize(
    target: &Unitary,
    model: &MlpModel,
    cfg: &SearchConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    model.check_target(target.qubits())?;
    let start = Instant::now();
    let variants = variant_schedule(target.qubits(), cfg);
    let outcomes = map_indexed(cfg.exec, cfg.trials, |i| {
        run_variant(target, model, cfg, i, &variants[i % variants.len()])
    });
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut best: Option<(Circuit, f64)> = None;
    let mut steps_used = 0;
    for outcome in outcomes {
        let (record, solution) = outcome?;
        steps_used += record.steps;
        if let Some(s) = solution {
            let replace = match &best {
                None => true,
                Some(b) => s.0.len() < b.0.len() || (s.0.len() == b.0.len() && s.1 > b.1),
            };
            if replace {
                best = Some(s);
            }
        }
        trials.push(record);
    }
    let achieved_fidelity = match &best {
        Some((_, f)) => *f,
        None => trials.iter().map(|t| t.fidelity).fold(0.0, f64::max),
    };
    Ok(SynthesisResult {
        circuit: best.map(|(c, _)| c),
        achieved_fidelity,
        trials_used: cfg.trials,
        steps_used,
        wall_time_secs: start.elapsed().as_secs_f64(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tests::arb_circuit;
    use crate::gate_matrix;
    use proptest::prelude::*;

    fn zero_model(n: usize) -> MlpModel {
        MlpModel::zeros(n, &[4]).unwrap()
    }

    fn cfg() -> SearchConfig {
        SearchConfig {
            trials: 4,
            max_steps: 6,
            exec: Execution::Sequential,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn expansion_counts() {
        let model = zero_model(2);
        let beam = vec![BeamCandidate {
            residual: Unitary::identity(2),
            circuit: Circuit::empty(2).unwrap(),
            score: 0.0,
        }];
        assert_eq!(
            expand(&beam, &Gate::all_actions(2), &model).unwrap().len(),
            8
        );
        let model5 = zero_model(5);
        let beam5 = vec![
            BeamCandidate {
                residual: Unitary::identity(5),
                circuit: Circuit::empty(5).unwrap(),
                score: 0.0,
            };
            10
        ];
        assert_eq!(
            expand(&beam5, &Gate::all_actions(5), &model5)
                .unwrap()
                .len(),
            350
        );
    }

    #[test]
    fn involutions_return_to_parent() {
        let model = zero_model(2);
        let r = Unitary::random(2, &mut substream(1, "r", 0));
        let parent = BeamCandidate {
            residual: r.clone(),
            circuit: Circuit::empty(2).unwrap(),
            score: 0.0,
        };
        for g in [Gate::H(0), Gate::H(1), Gate::Cx(0, 1), Gate::Cx(1, 0)] {
            let once = expand(std::slice::from_ref(&parent), &[g], &model).unwrap();
            let twice = expand(&once, &[g], &model).unwrap();
            assert!(twice[0].residual.max_abs_diff(&r).unwrap() < 1e-14);
        }
    }

    #[test]
    fn residual_invariant_holds_for_children() {
        let model = zero_model(2);
        let target = Unitary::random(2, &mut substream(2, "r", 0));
        let mut beam = vec![BeamCandidate {
            residual: target.clone(),
            circuit: Circuit::empty(2).unwrap(),
            score: 0.0,
        }];
        for _ in 0..3 {
            beam = expand(&beam, &Gate::all_actions(2), &model).unwrap();
            beam.truncate(5);
        }
        for c in &beam {
            let expected = target.matmul(&c.circuit.unitary().adjoint()).unwrap();
            assert!(c.residual.max_abs_diff(&expected).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_temperature_is_greedy() {
        let scores = [0.3, -1.0, 2.0, 1.5, 0.0];
        let mut rng = substream(0, "g", 0);
        for _ in 0..50 {
            assert_eq!(gumbel_top_b(&scores, 2, 1e-9, &mut rng), vec![2, 3]);
        }
        assert_eq!(gumbel_top_b(&scores, 10, 1.0, &mut rng).len(), 5);
    }

    #[test]
    fn gumbel_pairs_are_fair() {
        let mut rng = substream(1, "g", 0);
        let draws = 10_000;
        let first = (0..draws)
            .filter(|_| gumbel_top_b(&[0.0, 0.0], 1, 1.0, &mut rng)[0] == 0)
            .count();
        let p = first as f64 / draws as f64;
        assert!((p - 0.5).abs() <= 0.03, "{p}");
    }

    #[test]
    fn identity_target_is_trivial() {
        let model = zero_model(2);
        let out = run_trial(
            &Unitary::identity(2),
            &model,
            &cfg(),
            &mut substream(0, "gumbel", 0),
        )
        .unwrap();
        assert_eq!(out.circuit.unwrap().len(), 0);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn single_gate_found_with_wide_beam() {
        let model = zero_model(2);
        let target = gate_matrix(Gate::H(0), 2).unwrap();
        let c = SearchConfig {
            beam_width: 8,
            threshold: 1.0 - 1e-9,
            ..cfg()
        };
        let out = run_trial(&target, &model, &c, &mut substream(0, "gumbel", 0)).unwrap();
        assert_eq!(out.circuit.unwrap().gates(), &[Gate::H(0)]);
        assert_eq!(out.steps, 1);
    }

    #[test]
    fn single_trial_matches_run_trial() {
        let model = zero_model(1);
        let target = Circuit::new(1, vec![Gate::H(0), Gate::T(0)])
            .unwrap()
            .unitary();
        let c = SearchConfig {
            trials: 1,
            beam_width: 3,
            ..cfg()
        };
        let raw = run_trial(&target, &model, &c, &mut substream(c.seed, "gumbel", 0)).unwrap();
        let res = synthesize(&target, &model, &c).unwrap();
        assert_eq!(res.circuit, raw.circuit.map(|c| optimize(&c)));
        assert_eq!(res.trials.len(), 1);
    }

    #[test]
    fn synthesis_is_deterministic_across_modes() {
        let model = MlpModel::new(2, &[8], &mut substream(3, "init", 0)).unwrap();
        let target = Circuit::new(2, vec![Gate::H(0), Gate::Cx(0, 1), Gate::T(1)])
            .unwrap()
            .unitary();
        let seq = synthesize(&target, &model, &SearchConfig { trials: 8, ..cfg() }).unwrap();
        let par = synthesize(
            &target,
            &model,
            &SearchConfig {
                trials: 8,
                exec: Execution::Parallel,
                ..cfg()
            },
        )
        .unwrap();
        assert_eq!(seq.circuit, par.circuit);
        assert_eq!(seq.trials, par.trials);
        if let Some(c) = &seq.circuit {
            assert!(avg_fidelity(&c.unitary(), &target).unwrap().0 >= 0.99);
        }
    }

    #[test]
    fn permutation_examples() {
        let u = Unitary::random(3, &mut substream(4, "r", 0));
        assert_eq!(permute_target(&u, &[0, 1, 2]).unwrap(), u);
        let twice = permute_target(&permute_target(&u, &[1, 0, 2]).unwrap(), &[1, 0, 2]).unwrap();
        assert!(twice.max_abs_diff(&u).unwrap() < 1e-15);
        assert!(permute_target(&u, &[0, 0, 1]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let h = Circuit::new(1, vec![Gate::H(0)]).unwrap();
        assert_eq!(adjoint_circuit(&h), h);
        let t = Circuit::new(1, vec![Gate::T(0)]).unwrap();
        let adj = adjoint_circuit(&t);
        assert_eq!(
            adj.gates(),
            &[Gate::S(0), Gate::S(0), Gate::S(0), Gate::T(0)]
        );
        let tdg = gate_matrix(Gate::T(0), 1).unwrap().adjoint();
        assert!(adj.unitary().max_abs_diff(&tdg).unwrap() < 1e-12);
    }

    #[test]
    fn schedule_starts_with_identity_and_covers_variants() {
        let c = cfg();
        let v = variant_schedule(3, &c);
        assert_eq!(v.len(), 12);
        assert_eq!(v[0], Variant::identity(3));
        let distinct: HashSet<_> = v
            .iter()
            .map(|x| (x.permutation.clone(), x.inverse))
            .collect();
        assert_eq!(distinct.len(), 12);
        let plain = variant_schedule(
            3,
            &SearchConfig {
                permutation_trials: false,
                inverse_trials: false,
                ..c
            },
        );
        assert_eq!(plain, vec![Variant::identity(3)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn adjoint_circuit_inverts(c in arb_circuit(3, 20)) {
            let prod = adjoint_circuit(&c).unitary().matmul(&c.unitary()).unwrap();
            prop_assert!(prod.max_abs_diff(&Unitary::identity(c.qubits())).unwrap() < 1e-9);
        }

        #[test]
        fn variants_back_map_exactly(c in arb_circuit(3, 12), pick in 0usize..12) {
            let n = c.qubits();
            let target = c.unitary();
            let variants = variant_schedule(n, &cfg());
            let v = &variants[pick % variants.len()];
            // A circuit that implements the transformed target exactly.
            let transformed = v.transform(&target).unwrap();
            let forward = c.relabel(&v.permutation).unwrap();
            let solved = if v.inverse { adjoint_circuit(&forward) } else { forward };
            prop_assert!(avg_fidelity(&solved.unitary(), &transformed).unwrap().0 >= 1.0 - 1e-9);
            let back = v.back_map(&solved).unwrap();
            prop_assert!(avg_fidelity(&back.unitary(), &target).unwrap().0 >= 1.0 - 1e-9);
        }
    }
}
