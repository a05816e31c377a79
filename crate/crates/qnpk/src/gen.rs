//! Seeded random QNPs and FOND problems for the equivalence experiments.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{validate_fond, validate_qnp, AtomLit, FondAction, FondEffect, Literal, NumOp, Qnp, QnpAction, TaggedFond};

#[derive(Clone, Copy, Debug)]
pub struct QnpShape {
    pub max_bools: usize,
    pub max_nums: usize,
    pub max_actions: usize,
}

impl Default for QnpShape {
    fn default() -> Self {
        QnpShape { max_bools: 2, max_nums: 2, max_actions: 4 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FondShape {
    pub max_atoms: usize,
    pub max_actions: usize,
    pub max_outcomes: usize,
}

impl Default for FondShape {
    fn default() -> Self {
        FondShape { max_atoms: 4, max_actions: 4, max_outcomes: 2 }
    }
}

fn bool_lit(name: &str, v: bool) -> Literal {
    if v {
        Literal::pos(name)
    } else {
        Literal::neg(name)
    }
}

fn num_lit(name: &str, zero: bool) -> Literal {
    if zero {
        Literal::zero(name)
    } else {
        Literal::gt(name)
    }
}

/// A valid random QNP with at least one numeric variable.
pub fn random_qnp<R: Rng>(rng: &mut R, shape: &QnpShape) -> Qnp {
    loop {
        let bools: Vec<String> = (0..rng.gen_range(0..=shape.max_bools)).map(|i| format!("p{i}")).collect();
        let nums: Vec<String> = (0..rng.gen_range(1..=shape.max_nums.max(1))).map(|i| format!("X{i}")).collect();
        let mut init: Vec<Literal> = bools.iter().filter(|_| rng.gen_bool(0.5)).map(|b| Literal::pos(b)).collect();
        for x in &nums {
            init.push(num_lit(x, rng.gen_bool(0.25)));
        }
        let mut goal = Vec::new();
        let mut vars: Vec<(&String, bool)> = bools.iter().map(|b| (b, true)).chain(nums.iter().map(|x| (x, false))).collect();
        vars.shuffle(rng);
        for (v, is_bool) in vars.iter().take(rng.gen_range(1..=2)) {
            goal.push(if *is_bool { bool_lit(v, rng.gen_bool(0.5)) } else { num_lit(v, rng.gen_bool(0.75)) });
        }
        let actions = (0..rng.gen_range(1..=shape.max_actions))
            .map(|k| {
                let mut a = QnpAction::new(&format!("a{k}"));
                for b in &bools {
                    if rng.gen_bool(0.3) {
                        a.pre.push(bool_lit(b, rng.gen_bool(0.5)));
                    }
                    if rng.gen_bool(0.35) {
                        a.eff.push(bool_lit(b, rng.gen_bool(0.5)));
                    }
                }
                for x in &nums {
                    match rng.gen_range(0..6) {
                        0 | 1 => {
                            a.pre.push(Literal::gt(x));
                            a.num.push((NumOp::Dec, x.clone()));
                        }
                        2 => {
                            if rng.gen_bool(0.5) {
                                a.pre.push(num_lit(x, rng.gen_bool(0.5)));
                            }
                            a.num.push((NumOp::Inc, x.clone()));
                        }
                        3 => a.pre.push(num_lit(x, rng.gen_bool(0.5))),
                        _ => {}
                    }
                }
                a
            })
            .collect();
        let q = Qnp { name: "rand".into(), bools, nums, init, actions, goal };
        if validate_qnp(&q).is_empty() {
            return q;
        }
    }
}

/// A valid random FOND problem with at most one nondeterministic effect per action.
pub fn random_fond<R: Rng>(rng: &mut R, shape: &FondShape) -> TaggedFond {
    loop {
        let n = rng.gen_range(1..=shape.max_atoms);
        let atoms: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
        let init: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let goal: Vec<AtomLit> = order.iter().take(rng.gen_range(1..=2.min(n))).map(|&i| AtomLit::new(i, rng.gen_bool(0.7))).collect();
        let actions = (0..rng.gen_range(1..=shape.max_actions))
            .map(|k| {
                let mut a = FondAction::new(&format!("o{k}"));
                for i in 0..n {
                    if rng.gen_bool(0.3) {
                        a.pre.push(AtomLit::new(i, rng.gen_bool(0.5)));
                    }
                }
                let ndet = shape.max_outcomes >= 2 && rng.gen_bool(0.5);
                let mut det_atoms = Vec::new();
                for i in 0..n {
                    if rng.gen_bool(if ndet { 0.15 } else { 0.4 }) {
                        a.det.push(AtomLit::new(i, rng.gen_bool(0.5)));
                        det_atoms.push(i);
                    }
                }
                if ndet {
                    let free: Vec<usize> = (0..n).filter(|i| !det_atoms.contains(i)).collect();
                    let outcomes = (0..rng.gen_range(2..=shape.max_outcomes))
                        .map(|_| {
                            let chosen: Vec<usize> = free.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
                            chosen.into_iter().map(|i| AtomLit::new(i, rng.gen_bool(0.6))).collect()
                        })
                        .collect();
                    a.ndets.push(FondEffect { outcomes });
                }
                a
            })
            .collect();
        let p = TaggedFond { name: "rand".into(), atoms, init, actions, goal };
        if validate_fond(&p).is_empty() {
            return p;
        }
    }
}
