//! Reduction of FOND problems to QNPs: a fixed `Dec(X)` loop per
//! nondeterministic action, with `Y_{a,i}` counters that make unfair
//! trajectories non-terminating.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::direct::t_direct;
use crate::model::{
    validate_qnp, AbstractState, AtomLit, FondAction, Literal, NumOp, Policy, Qnp, QnpAction, TaggedFond,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExitGMode {
    Faithful,
    #[default]
    Repaired,
}

#[derive(Clone, Debug, Default)]
pub struct ReduceOptions {
    pub mode: ExitGMode,
    /// Outcomes (action, 1-based index) treated as not fair.
    pub unfair: BTreeSet<(String, usize)>,
    /// Drop every `Y_{a,i}` and every ExitG (the strong-solution variant).
    pub strong: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("action `{0}` has more than one nondeterministic effect; normalize first")]
    NotNormalized(String),
    #[error("unknown outcome `{0}:{1}`")]
    UnknownOutcome(String, usize),
    #[error("generated model is invalid: {0}")]
    Invalid(String),
}

/// Loop gadget bookkeeping for one reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopGadget {
    /// Nondeterministic actions and their outcome counts, in source order.
    pub k: Vec<(String, usize)>,
    pub max_k: usize,
    /// Number of leading booleans copied from the source problem.
    pub base: usize,
    pub mode: ExitGMode,
}

fn safe(a: &str) -> String {
    a.replace(',', ";")
}

pub fn normal_atom() -> String {
    "__normal".into()
}
pub fn ex_atom(a: &str) -> String {
    format!("__ex_{}", safe(a))
}
pub fn cnt_atom(i: usize) -> String {
    format!("__cnt_{i}")
}
pub fn x_var() -> String {
    "__X".into()
}
pub fn y_var(a: &str, i: usize) -> String {
    format!("__Y_{}_{i}", safe(a))
}
pub fn start_action() -> String {
    "__start".into()
}
pub fn exit_action(a: &str, i: usize) -> String {
    format!("__exit_{a}_{i}")
}
pub fn exitg_action(a: &str, i: usize) -> String {
    format!("__exitg_{a}_{i}")
}
pub fn exitg_any_action(a: &str, i: usize) -> String {
    format!("__exitg_{a}_{i}_any")
}
pub fn cont_action(a: &str, i: usize) -> String {
    format!("__cont_{a}_{i}")
}
pub fn loop_action(a: &str) -> String {
    format!("__loop_{a}")
}

/// Split every action with several nondeterministic effects into a chain of
/// actions with one effect each.
pub fn normalize_fond(p: &TaggedFond) -> TaggedFond {
    let multi: Vec<&FondAction> = p.actions.iter().filter(|a| a.ndets.len() > 1).collect();
    if multi.is_empty() {
        return p.clone();
    }
    let mut atoms = p.atoms.clone();
    let seq: BTreeMap<&str, usize> = multi
        .iter()
        .map(|a| {
            atoms.push(format!("__seq_{}", safe(&a.name)));
            (a.name.as_str(), atoms.len() - 1)
        })
        .collect();
    let longest = multi.iter().map(|a| a.ndets.len()).max().unwrap_or(0);
    let next: BTreeMap<usize, usize> = (2..=longest)
        .map(|j| {
            atoms.push(format!("__next_{j}"));
            (j, atoms.len() - 1)
        })
        .collect();
    let idle: Vec<AtomLit> = seq.values().map(|&i| AtomLit::neg(i)).collect();
    let mut actions = Vec::new();
    for a in &p.actions {
        if a.ndets.len() <= 1 {
            let mut b = a.clone();
            b.pre.extend(idle.iter().copied());
            actions.push(b);
            continue;
        }
        let s = seq[a.name.as_str()];
        let n = a.ndets.len();
        for (j, e) in a.ndets.iter().enumerate().map(|(j, e)| (j + 1, e)) {
            let mut b = FondAction::new(&format!("__{}_{j}", a.name));
            if j == 1 {
                b.pre = a.pre.clone();
                b.pre.extend(idle.iter().copied());
                b.det = a.det.clone();
                b.tags = a.tags.clone();
                b.det.push(AtomLit::pos(s));
                b.det.push(AtomLit::pos(next[&2]));
            } else {
                b.pre = vec![AtomLit::pos(s), AtomLit::pos(next[&j])];
                b.det.push(AtomLit::neg(next[&j]));
                if j < n {
                    b.det.push(AtomLit::pos(next[&(j + 1)]));
                } else {
                    b.det.push(AtomLit::neg(s));
                }
            }
            b.ndets = vec![e.clone()];
            actions.push(b);
        }
    }
    TaggedFond { name: p.name.clone(), atoms, init: p.init.clone(), actions, goal: p.goal.clone() }
}

fn lit(p: &TaggedFond, l: &AtomLit) -> Literal {
    if l.value {
        Literal::pos(&p.atoms[l.atom])
    } else {
        Literal::neg(&p.atoms[l.atom])
    }
}

/// Effective outcome list: `None` for deterministic actions.
fn outcomes(a: &FondAction) -> Result<Option<&[Vec<AtomLit>]>, ReduceError> {
    match a.ndets.as_slice() {
        [] => Ok(None),
        [e] if e.outcomes.len() <= 1 => Ok(None),
        [e] => Ok(Some(&e.outcomes)),
        _ => Err(ReduceError::NotNormalized(a.name.clone())),
    }
}

pub fn reduce_r(p: &TaggedFond, mode: ExitGMode) -> Result<Qnp, ReduceError> {
    reduce_with(p, &ReduceOptions { mode, ..Default::default() }).map(|r| r.0)
}

pub fn reduce_r_strong(p: &TaggedFond) -> Result<Qnp, ReduceError> {
    reduce_with(p, &ReduceOptions { strong: true, ..Default::default() }).map(|r| r.0)
}

pub fn reduce_with(p: &TaggedFond, opts: &ReduceOptions) -> Result<(Qnp, LoopGadget), ReduceError> {
    let mut k = Vec::new();
    for a in &p.actions {
        if let Some(o) = outcomes(a)? {
            k.push((a.name.clone(), o.len()));
        }
    }
    for (a, i) in &opts.unfair {
        if !k.iter().any(|(b, n)| b == a && (1..=*n).contains(i)) {
            return Err(ReduceError::UnknownOutcome(a.clone(), *i));
        }
    }
    let max_k = k.iter().map(|x| x.1).max().unwrap_or(0);
    let fair = |a: &str, i: usize| !opts.strong && !opts.unfair.contains(&(a.to_string(), i));

    let mut bools = p.atoms.clone();
    bools.push(normal_atom());
    bools.extend(k.iter().map(|(a, _)| ex_atom(a)));
    bools.extend((0..=max_k + 1).map(cnt_atom));
    let mut nums = vec![x_var()];
    for (a, n) in &k {
        nums.extend((1..=*n).filter(|&i| fair(a, i)).map(|i| y_var(a, i)));
    }

    let mut init: Vec<Literal> = (0..p.atoms.len())
        .map(|i| if p.init.contains(&i) { Literal::pos(&p.atoms[i]) } else { Literal::neg(&p.atoms[i]) })
        .collect();
    init.push(Literal::pos(&normal_atom()));
    init.push(Literal::pos(&cnt_atom(0)));
    init.push(Literal::zero(&x_var()));
    init.extend(nums[1..].iter().map(|y| Literal::gt(y)));
    let goal: Vec<Literal> = p.goal.iter().map(|l| lit(p, l)).collect();

    let ready = [Literal::pos(&normal_atom()), Literal::pos(&cnt_atom(0))];
    let mut actions = Vec::new();
    for a in &p.actions {
        let mut b = QnpAction::new(&a.name);
        b.pre = a.pre.iter().map(|l| lit(p, l)).collect();
        b.pre.extend(ready.iter().cloned());
        match outcomes(a)? {
            None => {
                b.eff = a.det.iter().chain(a.ndets.iter().flat_map(|e| e.outcomes.iter().flatten())).map(|l| lit(p, l)).collect();
            }
            Some(_) => {
                b.eff = vec![Literal::neg(&normal_atom()), Literal::pos(&ex_atom(&a.name))];
                b.num.push((NumOp::Inc, x_var()));
            }
        }
        actions.push(b);
    }
    let mut start = QnpAction::new(&start_action());
    start.pre = vec![Literal::neg(&normal_atom()), Literal::pos(&cnt_atom(0)), Literal::gt(&x_var())];
    start.eff = vec![Literal::neg(&cnt_atom(0)), Literal::pos(&cnt_atom(1))];
    start.num.push((NumOp::Dec, x_var()));
    actions.push(start);

    let leave = |a: &str, i: usize| vec![Literal::neg(&ex_atom(a)), Literal::neg(&cnt_atom(i)), Literal::pos(&normal_atom()), Literal::pos(&cnt_atom(0))];
    for fa in &p.actions {
        let Some(outs) = outcomes(fa)? else { continue };
        let a = fa.name.as_str();
        let n = outs.len();
        let ys: Vec<usize> = (1..=n).filter(|&i| fair(a, i)).collect();
        for (i, o) in outs.iter().enumerate().map(|(i, o)| (i + 1, o)) {
            let mut e = QnpAction::new(&exit_action(a, i));
            e.pre = vec![Literal::pos(&ex_atom(a)), Literal::pos(&cnt_atom(i)), Literal::zero(&x_var())];
            e.pre.extend(ys.iter().map(|&j| Literal::gt(&y_var(a, j))));
            e.eff = leave(a, i);
            let mut src: Vec<AtomLit> = fa.det.clone();
            src.extend(o.iter().copied());
            for l in src {
                let l = lit(p, &l);
                if !e.eff.contains(&l) {
                    e.eff.push(l);
                }
            }
            for &j in &ys {
                e.num.push((if j == i { NumOp::Inc } else { NumOp::Dec }, y_var(a, j)));
            }
            actions.push(e);
        }
        for &i in &ys {
            let mut g = QnpAction::new(&exitg_action(a, i));
            g.pre = vec![Literal::pos(&ex_atom(a)), Literal::pos(&cnt_atom(i)), Literal::zero(&x_var()), Literal::zero(&y_var(a, i))];
            g.eff = leave(a, i);
            g.eff.extend(goal.iter().cloned());
            actions.push(g);
        }
        if opts.mode == ExitGMode::Repaired {
            for &j in &ys {
                let mut g = QnpAction::new(&exitg_any_action(a, j));
                g.pre = vec![Literal::pos(&ex_atom(a)), Literal::zero(&x_var()), Literal::zero(&y_var(a, j))];
                g.eff = vec![Literal::neg(&ex_atom(a)), Literal::pos(&normal_atom()), Literal::pos(&cnt_atom(0))];
                g.eff.extend((1..=max_k + 1).map(|l| Literal::neg(&cnt_atom(l))));
                g.eff.extend(goal.iter().cloned());
                actions.push(g);
            }
        }
        for i in 1..=n {
            let mut c = QnpAction::new(&cont_action(a, i));
            c.pre = vec![Literal::pos(&ex_atom(a)), Literal::pos(&cnt_atom(i)), Literal::gt(&x_var())];
            c.eff = vec![Literal::neg(&cnt_atom(i)), Literal::pos(&cnt_atom(i + 1))];
            c.num.push((NumOp::Dec, x_var()));
            actions.push(c);
        }
        let mut l = QnpAction::new(&loop_action(a));
        l.pre = vec![Literal::pos(&ex_atom(a)), Literal::pos(&cnt_atom(n)), Literal::gt(&x_var())];
        l.eff = vec![Literal::neg(&cnt_atom(n)), Literal::pos(&cnt_atom(1))];
        actions.push(l);
    }
    let q = Qnp { name: p.name.clone(), bools, nums, init, actions, goal };
    let v = validate_qnp(&q);
    if let Some(first) = v.first() {
        return Err(ReduceError::Invalid(format!("{}: {} {}", first.code, first.subject, first.detail)));
    }
    Ok((q, LoopGadget { k, max_k, base: p.atoms.len(), mode: opts.mode }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    PToQ,
    QToP,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TransferError {
    #[error("source policy has no rule for required state {0}")]
    Undefined(String),
    #[error("no gadget action applies at {0}")]
    Stuck(String),
}

fn is_normal(q: &Qnp, s: &AbstractState) -> bool {
    let at = |n: &str| q.bool_index(n).map(|i| s.get(i)).unwrap_or(false);
    at(&normal_atom()) && at(&cnt_atom(0))
}

/// Move a policy between P and R(P). P→Q covers every Q-state reachable
/// under the extended policy; Q→P keeps the normal states only.
pub fn transfer_policies(p: &TaggedFond, q: &Qnp, pi: &Policy, dir: Direction) -> Result<Policy, TransferError> {
    let base = p.atoms.len();
    match dir {
        Direction::QToP => {
            // Several Q-states can share a P-part; the one with no exhausted
            // counter is canonical.
            let mut out = Policy::new();
            let mut best: BTreeMap<AbstractState, bool> = BTreeMap::new();
            for (s, a) in &pi.rules {
                if !is_normal(q, s) {
                    continue;
                }
                let canonical = q.nums.iter().skip(1).all(|y| !s.get(q.flag_index(y).unwrap()));
                let key = s.prefix(base);
                if best.get(&key).is_none_or(|&c| !c && canonical) {
                    best.insert(key.clone(), canonical);
                    out.insert(key, a.clone());
                }
            }
            Ok(out)
        }
        Direction::PToQ => {
            let d = t_direct(q);
            let c = d.compile();
            let mut out = Policy::new();
            let init = d.init_state();
            let mut seen = HashSet::from([init.clone()]);
            let mut queue = VecDeque::from([init]);
            let gadget_rank = |name: &str| -> u8 {
                if name.starts_with("__exitg_") {
                    0
                } else if name.starts_with("__loop_") {
                    1
                } else {
                    2
                }
            };
            while let Some(s) = queue.pop_front() {
                if c.is_goal(&s) {
                    continue;
                }
                let a = if is_normal(q, &s) {
                    let name = pi.get(&s.prefix(base)).ok_or_else(|| TransferError::Undefined(s.prefix(base).render(&p.atoms)))?;
                    d.action_index(name).filter(|&k| c.applicable(&s, k)).ok_or_else(|| TransferError::Undefined(s.render(&d.atoms)))?
                } else {
                    (0..d.actions.len())
                        .filter(|&k| d.actions[k].name.starts_with("__") && c.applicable(&s, k))
                        .min_by_key(|&k| gadget_rank(&d.actions[k].name))
                        .ok_or_else(|| TransferError::Stuck(s.render(&d.atoms)))?
                };
                out.insert(s.clone(), d.actions[a].name.clone());
                for t in c.successors(&s, a) {
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
            Ok(out)
        }
    }
}
