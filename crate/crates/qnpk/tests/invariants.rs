mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qnpk::direct::{qnp_boolean_successors, t_direct};
use qnpk::fixtures;
use qnpk::fond2qnp::{normalize_fond, reduce_r, reduce_r_strong, ExitGMode};
use qnpk::gen::{random_fond, random_qnp, FondShape, QnpShape};
use qnpk::io::{emit_fond, emit_policy, emit_qnp, parse_fond, parse_fond_with, parse_policy, parse_qnp, parse_qnp_with, ParseOptions};
use qnpk::model::{abstract_state, validate_fond, validate_qnp, AbstractState};
use qnpk::qnp2fond::{
    analyze_variables, lift_policy_star, project_full_policy, solve_qnp_full, translate, AnalyzeOptions, Force, PipelineOptions,
};
use qnpk::sieve::{build_policy_graph, compute_annotations, run_sieve, run_sieve_seeded, PolicyGraph, SieveMode, Verdict};
use qnpk::sim::{simulate, Adversary, Agent, Outcome, SimConfig};
use qnpk::solver::{oracle_solve_qnp, solve_strong, solve_strong_cyclic, verify_qnp_policy, verify_strong_cyclic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn any_qnp(seed: u64) -> qnpk::model::Qnp {
    random_qnp(&mut rng(seed), &QnpShape::default())
}

fn any_fond(seed: u64) -> qnpk::model::TaggedFond {
    random_fond(&mut rng(seed), &FondShape::default())
}

#[test]
fn fixtures_validate() {
    for (name, _, _) in fixtures::QNPS {
        let (q, pi) = fixtures::qnp(name);
        assert!(validate_qnp(&q).is_empty(), "{name}");
        assert!(!pi.is_empty(), "{name}");
    }
    assert!(validate_fond(&fixtures::coin()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn abstraction_agrees_with_numeric_state(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let s = common::random_numeric_state(&mut rng(seed ^ 1), &q);
        let a = abstract_state(&q, &s).unwrap();
        for (i, v) in q.bools.iter().enumerate() {
            prop_assert_eq!(a.get(q.bool_index(v).unwrap()), s.bools[i]);
        }
        for (i, v) in q.nums.iter().enumerate() {
            prop_assert_eq!(a.get(q.flag_index(v).unwrap()), s.reals[i] == 0.0);
        }
    }

    #[test]
    fn state_order_is_total(a in proptest::collection::vec(any::<bool>(), 1..70), b in proptest::collection::vec(any::<bool>(), 1..70)) {
        let n = a.len().min(b.len());
        let (x, y) = (AbstractState::from_bits(&a[..n]), AbstractState::from_bits(&b[..n]));
        let rel = [x < y, x == y, x > y];
        prop_assert_eq!(rel.iter().filter(|r| **r).count(), 1);
        prop_assert_eq!(x == y, a[..n] == b[..n]);
    }

    #[test]
    fn formats_round_trip(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let text = emit_qnp(&q);
        prop_assert_eq!(&parse_qnp(&text).unwrap(), &q);
        prop_assert_eq!(emit_qnp(&parse_qnp(&text).unwrap()), text);

        let p = any_fond(seed);
        let text = emit_fond(&p);
        prop_assert_eq!(&parse_fond(&text).unwrap(), &p);

        let d = t_direct(&q);
        let pi = common::random_policy(&mut rng(seed), &d);
        let text = emit_policy(&pi, &q);
        prop_assert_eq!(&parse_policy(&text, &q).unwrap(), &pi);
        prop_assert_eq!(emit_policy(&pi, &q), text);
    }

    #[test]
    fn reductions_round_trip_with_reserved_names(seed in any::<u64>()) {
        let p = normalize_fond(&any_fond(seed));
        let q = reduce_r(&p, ExitGMode::Repaired).unwrap();
        let text = emit_qnp(&q);
        prop_assert!(parse_qnp(&text).is_err());
        prop_assert_eq!(parse_qnp_with(&text, &ParseOptions::generated()).unwrap(), q);
        let fond = emit_fond(&p);
        prop_assert_eq!(parse_fond_with(&fond, &ParseOptions::generated()).unwrap(), p);
    }

    #[test]
    fn direct_translation_shape(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let d = t_direct(&q);
        prop_assert_eq!(d.atoms.len(), q.bools.len() + q.nums.len());
        prop_assert_eq!(d.actions.len(), q.actions.len());
        prop_assert!(validate_fond(&d).is_empty());
    }

    #[test]
    fn transitions_correspond(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let d = t_direct(&q);
        let mut r = rng(seed ^ 2);
        for _ in 0..8 {
            let s = common::random_numeric_state(&mut r, &q);
            let abs = abstract_state(&q, &s).unwrap();
            for a in q.actions.iter().filter(|a| common::holds_all(&q, &s, &a.pre)) {
                let abstract_succ = qnp_boolean_successors(&d, &abs, &a.name).unwrap();
                let concrete: BTreeSet<AbstractState> =
                    common::realized_successors(&q, &s, &a.name).iter().map(|t| abstract_state(&q, t).unwrap()).collect();
                prop_assert_eq!(&concrete, &abstract_succ, "action {}", &a.name);
            }
        }
    }

    #[test]
    fn sieve_verdict_ignores_choice_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..8);
        let k = r.gen_range(1..4);
        let vars: Vec<String> = (0..k).map(|i| format!("V{i}")).collect();
        let pick = |r: &mut ChaCha8Rng| (0..k).filter(|_| r.gen_bool(0.35)).collect::<Vec<_>>();
        let dec: Vec<Vec<usize>> = (0..n).map(|_| pick(&mut r)).collect();
        let inc: Vec<Vec<usize>> = dec.iter().map(|d| pick(&mut r).into_iter().filter(|x| !d.contains(x)).collect()).collect();
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|_| r.gen_bool(0.3)).collect();
        let g = PolicyGraph::synthetic(vars, dec, inc, edges);
        let base = run_sieve(&g, SieveMode::StopWhenAcyclic).verdict;
        for s in 0..10 {
            for mode in [SieveMode::StopWhenAcyclic, SieveMode::Exhaustive] {
                let t = run_sieve_seeded(&g, mode, Some(s));
                prop_assert_eq!(t.verdict, base);
                for step in &t.steps {
                    let x = g.vars.iter().position(|v| *v == step.var).unwrap();
                    for e in &step.removed {
                        prop_assert!(g.dec[e.src].contains(&x));
                    }
                    for &m in &step.members {
                        prop_assert!(!g.inc[m].contains(&x));
                    }
                }
            }
        }
    }

    #[test]
    fn annotations_are_ordered(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let Ok(pi) = oracle_solve_qnp(&q) else { return Ok(()) };
        let g = build_policy_graph(&t_direct(&q), &pi);
        let ann = compute_annotations(&g).unwrap();
        for e in &g.edges {
            let (u, v) = (&g.nodes[e.src], &g.nodes[e.dst]);
            if let (Some(a), Some(b)) = (ann.scc(u), ann.scc(v)) {
                prop_assert!(a <= b);
            }
        }
        for (_, stack) in ann.entries.values() {
            let distinct: BTreeSet<_> = stack.iter().collect();
            prop_assert_eq!(distinct.len(), stack.len());
        }
    }

    #[test]
    fn solver_outputs_verify(seed in any::<u64>()) {
        let p = any_fond(seed);
        if let Ok(pi) = solve_strong_cyclic(&p) {
            prop_assert!(verify_strong_cyclic(&p, &pi).is_ok());
            prop_assert_eq!(solve_strong_cyclic(&p).unwrap(), pi);
        }
        if let Ok(pi) = solve_strong(&p) {
            prop_assert!(verify_strong_cyclic(&p, &pi).is_ok());
            prop_assert!(build_policy_graph(&p, &pi).is_acyclic());
        }
    }

    #[test]
    fn normalization_preserves_solvability(seed in any::<u64>()) {
        let p = any_fond(seed);
        let n = normalize_fond(&p);
        prop_assert!(validate_fond(&n).is_empty());
        prop_assert_eq!(solve_strong_cyclic(&p).is_ok(), solve_strong_cyclic(&n).is_ok());
        prop_assert_eq!(solve_strong(&p).is_ok(), solve_strong(&n).is_ok());
    }

    #[test]
    fn strong_reduction_is_valid(seed in any::<u64>()) {
        let p = normalize_fond(&any_fond(seed));
        for q in [reduce_r(&p, ExitGMode::Repaired).unwrap(), reduce_r(&p, ExitGMode::Faithful).unwrap(), reduce_r_strong(&p).unwrap()] {
            prop_assert!(validate_qnp(&q).is_empty());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_translation_structure(seed in any::<u64>()) {
        let q = any_qnp(seed);
        for force in [Force::None, Force::AllStacked] {
            let layout = analyze_variables(&q, &AnalyzeOptions { force, ..Default::default() }).unwrap();
            prop_assert!(layout.max < 1u128 << layout.width);
            let tr = translate(&q, &layout).unwrap();
            let names: BTreeSet<_> = tr.fond.atoms.iter().collect();
            prop_assert_eq!(names.len(), tr.fond.atoms.len());
            prop_assert!(validate_fond(&tr.fond).is_empty());
            for a in &tr.fond.actions {
                let role = tr.roles.get(&a.name);
                prop_assert!(role.is_some(), "no role for {}", &a.name);
                if role.unwrap().is_internal() {
                    prop_assert!(a.ndets.is_empty());
                    prop_assert!(a.det.iter().all(|l| l.atom >= tr.base), "{} touches a base atom", &a.name);
                }
            }
        }
        let direct = analyze_variables(&q, &AnalyzeOptions { force: Force::AllDirect, ..Default::default() }).unwrap();
        prop_assert_eq!(translate(&q, &direct).unwrap().fond, t_direct(&q));
    }

    #[test]
    fn translated_solutions_terminate_and_oracle_solutions_lift(seed in any::<u64>()) {
        let q = any_qnp(seed);
        if let Ok(sol) = solve_qnp_full(&q, &PipelineOptions::default()) {
            let g = build_policy_graph(&sol.translation.fond, &sol.policy);
            prop_assert_eq!(run_sieve(&g, SieveMode::StopWhenAcyclic).verdict, Verdict::Terminating);
            let ctrl = project_full_policy(&sol.translation, &sol.policy).unwrap();
            let cfg = SimConfig { runs: 10, epsilon: 0.5, seed, adversary: Adversary::ZeroJump, ..Default::default() };
            let runs = simulate(&q, Agent::Controller(&ctrl), &cfg).unwrap();
            prop_assert!(runs.iter().all(|r| r.outcome == Outcome::Goal));
        }
        if let Ok(pi) = oracle_solve_qnp(&q) {
            let ann = compute_annotations(&build_policy_graph(&t_direct(&q), &pi)).unwrap();
            let layout = analyze_variables(&q, &AnalyzeOptions::default()).unwrap();
            let tr = translate(&q, &layout).unwrap();
            let lifted = lift_policy_star(&tr, &pi, &ann).unwrap();
            prop_assert!(verify_strong_cyclic(&tr.fond, &lifted).is_ok());
        }
    }

    #[test]
    fn rollouts_are_epsilon_trajectories(seed in any::<u64>()) {
        let q = any_qnp(seed);
        let Ok(pi) = oracle_solve_qnp(&q) else { return Ok(()) };
        prop_assert!(verify_qnp_policy(&q, &pi).is_ok());
        for adversary in [Adversary::Random, Adversary::MinStep, Adversary::ZeroJump] {
            for epsilon in [0.05, 0.5] {
                let cfg = SimConfig { epsilon, adversary, seed, runs: 5, trace: true, max_steps: 20_000, ..Default::default() };
                let runs = simulate(&q, Agent::Policy(&pi), &cfg).unwrap();
                prop_assert_eq!(&runs, &simulate(&q, Agent::Policy(&pi), &cfg).unwrap());
                for r in &runs {
                    let rows = r.trace.as_ref().unwrap();
                    prop_assert_eq!(common::validate_trajectory(&q, epsilon, rows), Ok(()));
                    prop_assert_eq!(rows.len() as u64, r.steps + 1);
                    prop_assert_eq!(r.outcome == Outcome::Goal, common::holds_all(&q, &r.final_state, &q.goal));
                    prop_assert_eq!(r.outcome, Outcome::Goal);
                }
            }
        }
    }
}
