//! Explicit-state FOND solving, policy verification, and a brute-force QNP oracle.

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::FxHashMap;

use crate::direct::t_direct;
use crate::model::{AbstractState, CompiledFond, Policy, Qnp, TaggedFond};
use crate::sieve::{build_policy_graph, run_sieve, NodeStatus, PolicyGraph, SieveMode, Verdict};

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;
pub const DEFAULT_ORACLE_CAP: usize = 6;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub node_budget: usize,
}

impl Default for SolverConfig {
    /// Budget from `QNPK_NODE_BUDGET` when set, else one million states.
    fn default() -> Self {
        let node_budget = std::env::var("QNPK_NODE_BUDGET").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_NODE_BUDGET);
        SolverConfig { node_budget }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("unsolvable ({explored} reachable states, {surviving} survive pruning)")]
    Unsolvable { explored: usize, surviving: usize },
    #[error("node budget of {0} states exceeded")]
    BudgetExceeded(usize),
    #[error("oracle cap exceeded: {atoms} atoms > {cap}")]
    CapExceeded { atoms: usize, cap: usize },
}

impl SolveError {
    pub fn is_unsolvable(&self) -> bool {
        matches!(self, SolveError::Unsolvable { .. })
    }
}

/// Reachable state space with every applicable action expanded at non-goal states.
struct Space {
    states: Vec<AbstractState>,
    goal: Vec<bool>,
    /// Pairs of state `s` are `pair_start[s]..pair_start[s + 1]`.
    pair_start: Vec<usize>,
    pair_action: Vec<u32>,
    /// Successors of pair `k` are `succ[succ_start[k]..succ_start[k + 1]]`.
    succ_start: Vec<usize>,
    succ: Vec<u32>,
}

impl Space {
    fn explore(c: &CompiledFond, budget: usize) -> Result<Space, SolveError> {
        let mut index: FxHashMap<AbstractState, u32> = FxHashMap::default();
        let mut sp = Space {
            states: Vec::new(),
            goal: Vec::new(),
            pair_start: vec![0],
            pair_action: Vec::new(),
            succ_start: vec![0],
            succ: Vec::new(),
        };
        index.insert(c.init().clone(), 0);
        sp.states.push(c.init().clone());
        let mut u = 0;
        while u < sp.states.len() {
            let s = sp.states[u].clone();
            let g = c.is_goal(&s);
            sp.goal.push(g);
            if !g {
                for a in 0..c.num_actions() {
                    if !c.applicable(&s, a) {
                        continue;
                    }
                    for t in c.successors(&s, a) {
                        let id = match index.get(&t) {
                            Some(&id) => id,
                            None => {
                                if sp.states.len() >= budget {
                                    return Err(SolveError::BudgetExceeded(budget));
                                }
                                let id = sp.states.len() as u32;
                                index.insert(t.clone(), id);
                                sp.states.push(t);
                                id
                            }
                        };
                        sp.succ.push(id);
                    }
                    sp.pair_action.push(a as u32);
                    sp.succ_start.push(sp.succ.len());
                }
            }
            sp.pair_start.push(sp.pair_action.len());
            u += 1;
        }
        Ok(sp)
    }

    fn pairs(&self, s: usize) -> std::ops::Range<usize> {
        self.pair_start[s]..self.pair_start[s + 1]
    }

    fn outcomes(&self, k: usize) -> &[u32] {
        &self.succ[self.succ_start[k]..self.succ_start[k + 1]]
    }

    fn owner_table(&self) -> Vec<u32> {
        let mut owner = vec![0u32; self.pair_action.len()];
        for s in 0..self.states.len() {
            for k in self.pairs(s) {
                owner[k] = s as u32;
            }
        }
        owner
    }

    /// For each state, the pairs listing it as an outcome (CSR layout).
    fn reverse(&self) -> (Vec<usize>, Vec<u32>) {
        let n = self.states.len();
        let mut count = vec![0usize; n + 1];
        for &t in &self.succ {
            count[t as usize + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut preds = vec![0u32; self.succ.len()];
        for k in 0..self.pair_action.len() {
            for &t in self.outcomes(k) {
                preds[fill[t as usize]] = k as u32;
                fill[t as usize] += 1;
            }
        }
        (count, preds)
    }
}

/// Number of states reachable from the initial state under any actions.
pub fn count_reachable(p: &TaggedFond, cfg: &SolverConfig) -> Result<usize, SolveError> {
    Ok(Space::explore(&p.compile(), cfg.node_budget)?.states.len())
}

pub fn solve_strong_cyclic(p: &TaggedFond) -> Result<Policy, SolveError> {
    solve_strong_cyclic_with(p, &SolverConfig::default())
}

pub fn solve_strong_cyclic_with(p: &TaggedFond, cfg: &SolverConfig) -> Result<Policy, SolveError> {
    let c = p.compile();
    let sp = Space::explore(&c, cfg.node_budget)?;
    let n = sp.states.len();
    let owner = sp.owner_table();
    let (rstart, rpairs) = sp.reverse();
    let mut alive_pair = vec![true; sp.pair_action.len()];
    let mut alive_count: Vec<usize> = (0..n).map(|s| sp.pairs(s).len()).collect();
    let mut dead: Vec<bool> = (0..n).map(|s| !sp.goal[s] && alive_count[s] == 0).collect();
    let mut work: Vec<usize> = (0..n).filter(|&s| dead[s]).collect();
    loop {
        // Drop pairs that can land in a dead state, cascading.
        while let Some(t) = work.pop() {
            for &k in &rpairs[rstart[t]..rstart[t + 1]] {
                let k = k as usize;
                if !alive_pair[k] {
                    continue;
                }
                alive_pair[k] = false;
                let s = owner[k] as usize;
                alive_count[s] -= 1;
                if alive_count[s] == 0 && !dead[s] {
                    dead[s] = true;
                    work.push(s);
                }
            }
        }
        // Kill states that cannot reach the goal through surviving pairs.
        let mut reach: Vec<bool> = sp.goal.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| sp.goal[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &k in &rpairs[rstart[t]..rstart[t + 1]] {
                let k = k as usize;
                let s = owner[k] as usize;
                if alive_pair[k] && !reach[s] {
                    reach[s] = true;
                    queue.push_back(s);
                }
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !reach[s] && !dead[s] {
                dead[s] = true;
                for k in sp.pairs(s) {
                    if alive_pair[k] {
                        alive_pair[k] = false;
                    }
                }
                alive_count[s] = 0;
                work.push(s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if dead[0] {
        return Err(SolveError::Unsolvable { explored: n, surviving: dead.iter().filter(|d| !**d).count() });
    }
    // Best-case distance to the goal over surviving pairs.
    let mut dist = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (s, d) in dist.iter_mut().enumerate() {
        if sp.goal[s] {
            *d = 0;
            queue.push_back(s);
        }
    }
    while let Some(t) = queue.pop_front() {
        for &k in &rpairs[rstart[t]..rstart[t + 1]] {
            let k = k as usize;
            let s = owner[k] as usize;
            if alive_pair[k] && dist[s] == usize::MAX {
                dist[s] = dist[t] + 1;
                queue.push_back(s);
            }
        }
    }
    let choose = |s: usize| -> usize {
        sp.pairs(s)
            .filter(|&k| alive_pair[k])
            .min_by_key(|&k| (sp.outcomes(k).iter().map(|&t| dist[t as usize]).min().unwrap(), sp.pair_action[k]))
            .expect("surviving state has a pair")
    };
    let mut policy = Policy::new();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        if sp.goal[s] {
            continue;
        }
        let k = choose(s);
        policy.insert(sp.states[s].clone(), p.actions[sp.pair_action[k] as usize].name.clone());
        for &t in sp.outcomes(k) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                queue.push_back(t as usize);
            }
        }
    }
    Ok(policy)
}

pub fn solve_strong(p: &TaggedFond) -> Result<Policy, SolveError> {
    solve_strong_with(p, &SolverConfig::default())
}

/// Backward fixpoint: a state joins once some action has all outcomes already in.
pub fn solve_strong_with(p: &TaggedFond, cfg: &SolverConfig) -> Result<Policy, SolveError> {
    let c = p.compile();
    let sp = Space::explore(&c, cfg.node_budget)?;
    let n = sp.states.len();
    let owner = sp.owner_table();
    let (rstart, rpairs) = sp.reverse();
    let mut missing: Vec<usize> = (0..sp.pair_action.len()).map(|k| sp.outcomes(k).len()).collect();
    let mut chosen: Vec<Option<usize>> = vec![None; n];
    let mut solved: Vec<bool> = sp.goal.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| sp.goal[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &k in &rpairs[rstart[t]..rstart[t + 1]] {
            let k = k as usize;
            missing[k] -= 1;
            let s = owner[k] as usize;
            if missing[k] == 0 && !solved[s] {
                solved[s] = true;
                chosen[s] = Some(k);
                queue.push_back(s);
            }
        }
    }
    if !solved[0] {
        return Err(SolveError::Unsolvable { explored: n, surviving: solved.iter().filter(|x| **x).count() });
    }
    let mut policy = Policy::new();
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let Some(k) = chosen[s] else { continue };
        policy.insert(sp.states[s].clone(), p.actions[sp.pair_action[k] as usize].name.clone());
        for &t in sp.outcomes(k) {
            if !seen[t as usize] {
                seen[t as usize] = true;
                queue.push_back(t as usize);
            }
        }
    }
    Ok(policy)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    /// `open-state`, `inapplicable`, `goal-unreachable` or `non-terminating`.
    pub reason: &'static str,
    pub state: Option<String>,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.state {
            Some(s) => write!(f, "{} at {}", self.reason, s),
            None => f.write_str(self.reason),
        }
    }
}

/// Closure and goal connectivity of the policy graph.
pub fn check_graph(g: &PolicyGraph) -> Result<(), Rejection> {
    for u in 0..g.len() {
        match &g.status[u] {
            NodeStatus::Open => return Err(Rejection { reason: "open-state", state: Some(g.render_node(u)) }),
            NodeStatus::Inapplicable(_) => return Err(Rejection { reason: "inapplicable", state: Some(g.render_node(u)) }),
            _ => {}
        }
    }
    let mut preds = vec![Vec::new(); g.len()];
    for e in &g.edges {
        preds[e.dst].push(e.src);
    }
    let mut reach: Vec<bool> = g.status.iter().map(|s| *s == NodeStatus::Goal).collect();
    let mut queue: VecDeque<usize> = (0..g.len()).filter(|&u| reach[u]).collect();
    while let Some(v) = queue.pop_front() {
        for &u in &preds[v] {
            if !reach[u] {
                reach[u] = true;
                queue.push_back(u);
            }
        }
    }
    match reach.iter().position(|r| !r) {
        Some(u) => Err(Rejection { reason: "goal-unreachable", state: Some(g.render_node(u)) }),
        None => Ok(()),
    }
}

pub fn verify_strong_cyclic(p: &TaggedFond, pi: &Policy) -> Result<(), Rejection> {
    check_graph(&build_policy_graph(p, pi))
}

/// Strong-cyclic on the direct translation and terminating according to Sieve.
pub fn verify_qnp_policy(q: &Qnp, pi: &Policy) -> Result<(), Rejection> {
    verify_fond_policy_terminating(&t_direct(q), pi)
}

pub fn verify_fond_policy_terminating(p: &TaggedFond, pi: &Policy) -> Result<(), Rejection> {
    let g = build_policy_graph(p, pi);
    check_graph(&g)?;
    if run_sieve(&g, SieveMode::StopWhenAcyclic).verdict == Verdict::NonTerminating {
        return Err(Rejection { reason: "non-terminating", state: None });
    }
    Ok(())
}

pub fn oracle_solve_qnp(q: &Qnp) -> Result<Policy, SolveError> {
    oracle_solve_qnp_capped(q, DEFAULT_ORACLE_CAP)
}

/// Generate-and-test over policies of the direct translation. Branches that
/// cannot lead to a strong-cyclic, terminating policy are cut early.
pub fn oracle_solve_qnp_capped(q: &Qnp, cap: usize) -> Result<Policy, SolveError> {
    let atoms = q.num_atoms();
    if atoms > cap {
        return Err(SolveError::CapExceeded { atoms, cap });
    }
    let p = t_direct(q);
    let c = p.compile();
    let sp = Space::explore(&c, 1 << cap.min(24))?;
    let n = sp.states.len();
    // Goal reachability in the unrestricted graph.
    let owner = sp.owner_table();
    let (rstart, rpairs) = sp.reverse();
    let mut can = sp.goal.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| sp.goal[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &k in &rpairs[rstart[t]..rstart[t + 1]] {
            let s = owner[k as usize] as usize;
            if !can[s] {
                can[s] = true;
                queue.push_back(s);
            }
        }
    }
    let options: Vec<Vec<usize>> = (0..n)
        .map(|s| sp.pairs(s).filter(|&k| sp.outcomes(k).iter().all(|&t| can[t as usize])).collect())
        .collect();
    let mut o = Oracle { p: &p, sp: &sp, options, assign: vec![None; n] };
    match o.search() {
        Some(pi) => Ok(pi),
        None => Err(SolveError::Unsolvable { explored: n, surviving: 0 }),
    }
}

struct Oracle<'a> {
    p: &'a TaggedFond,
    sp: &'a Space,
    options: Vec<Vec<usize>>,
    assign: Vec<Option<usize>>,
}

impl Oracle<'_> {
    fn policy(&self, nodes: &[usize]) -> Policy {
        let mut pi = Policy::new();
        for &s in nodes {
            if let Some(k) = self.assign[s] {
                pi.insert(self.sp.states[s].clone(), self.p.actions[self.sp.pair_action[k] as usize].name.clone());
            }
        }
        pi
    }

    /// Reachable states under the partial assignment, in BFS order.
    fn reachable(&self) -> Vec<usize> {
        let n = self.sp.states.len();
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            i += 1;
            if let Some(k) = self.assign[s] {
                for &t in self.sp.outcomes(k) {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        order.push(t as usize);
                    }
                }
            }
        }
        order
    }

    /// Whether every reachable state might still reach the goal once the
    /// unassigned states get some action.
    fn hopeful(&self, nodes: &[usize]) -> bool {
        let n = self.sp.states.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            let ks: Vec<usize> = match self.assign[s] {
                Some(k) => vec![k],
                None => self.options[s].clone(),
            };
            for k in ks {
                for &t in self.sp.outcomes(k) {
                    preds[t as usize].push(s);
                }
            }
        }
        let mut reach = self.sp.goal.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| reach[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !reach[s] {
                    reach[s] = true;
                    queue.push_back(s);
                }
            }
        }
        nodes.iter().all(|&s| reach[s])
    }

    /// A loop among assigned states that Sieve cannot break stays in every completion.
    fn loops_forever(&self, nodes: &[usize]) -> bool {
        let assigned: Vec<usize> = nodes.iter().copied().filter(|&s| self.assign[s].is_some()).collect();
        let pi = self.policy(&assigned);
        let g = build_policy_graph(self.p, &pi);
        run_sieve(&g, SieveMode::StopWhenAcyclic).verdict == Verdict::NonTerminating
    }

    fn search(&mut self) -> Option<Policy> {
        let nodes = self.reachable();
        if !self.hopeful(&nodes) || self.loops_forever(&nodes) {
            return None;
        }
        let next = nodes.iter().copied().find(|&s| !self.sp.goal[s] && self.assign[s].is_none());
        let Some(s) = next else {
            let pi = self.policy(&nodes);
            return verify_fond_policy_terminating(self.p, &pi).ok().map(|_| pi);
        };
        for k in self.options[s].clone() {
            self.assign[s] = Some(k);
            if let Some(pi) = self.search() {
                return Some(pi);
            }
        }
        self.assign[s] = None;
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{emit_policy, parse_fond, parse_policy, parse_qnp};

    const CLEAR: &str = "qnp clear\nbools H\nnums n\naction a\npre -H n>0\neff H n--\naction b\npre H\neff -H\ninit -H n>0\ngoal n=0\n";
    const NEST: &str = "qnp nest\nnums X Y\naction a\npre X>0 Y=0\neff X-- Y++\naction b\npre Y>0\neff Y--\ninit X>0 Y>0\ngoal X=0\n";
    const COIN: &str = "fond coin\natoms g\naction flip\npre\neff\noneof g |\ninit\ngoal g\n";

    #[test]
    fn coin() {
        let p = parse_fond(COIN).unwrap();
        let pi = solve_strong_cyclic(&p).unwrap();
        assert_eq!(emit_policy(&pi, &p), "policy coin\n=> flip\n");
        assert!(solve_strong(&p).unwrap_err().is_unsolvable());
    }

    #[test]
    fn clear_direct() {
        let q = parse_qnp(CLEAR).unwrap();
        let p = t_direct(&q);
        let pi = solve_strong_cyclic(&p).unwrap();
        assert_eq!(emit_policy(&pi, &q), "policy clear\n=> a\nH => b\n");
        assert!(verify_qnp_policy(&q, &pi).is_ok());
        assert!(solve_strong(&p).unwrap_err().is_unsolvable());
    }

    #[test]
    fn sink_is_unsolvable() {
        let p = parse_fond("fond sink\natoms s g\naction a\npre -s\neff s\ninit\ngoal g\n").unwrap();
        assert!(solve_strong_cyclic(&p).unwrap_err().is_unsolvable());
    }

    #[test]
    fn strong_chain() {
        let p = parse_fond("fond chain\natoms x y\naction a\npre -x\neff x\naction b\npre x -y\neff y\ninit\ngoal y\n").unwrap();
        let pi = solve_strong(&p).unwrap();
        assert_eq!(emit_policy(&pi, &p), "policy chain\n=> a\nx => b\n");
        assert!(build_policy_graph(&p, &pi).is_acyclic());
    }

    #[test]
    fn open_state_rejected() {
        let q = parse_qnp(CLEAR).unwrap();
        let pi = parse_policy("policy clear\n=> a\n", &q).unwrap();
        assert_eq!(verify_strong_cyclic(&t_direct(&q), &pi).unwrap_err().reason, "open-state");
    }

    #[test]
    fn oracle_nest_and_clear() {
        let q = parse_qnp(NEST).unwrap();
        let pi = oracle_solve_qnp(&q).unwrap();
        assert_eq!(emit_policy(&pi, &q), "policy nest\n=> b\nY=0 => a\n");
        let q = parse_qnp(CLEAR).unwrap();
        assert_eq!(emit_policy(&oracle_solve_qnp(&q).unwrap(), &q), "policy clear\n=> a\nH => b\n");
    }

    #[test]
    fn oracle_cap() {
        let q = parse_qnp("qnp big\nbools a b c d e f g\ngoal a\n").unwrap();
        assert!(matches!(oracle_solve_qnp(&q), Err(SolveError::CapExceeded { atoms: 7, cap: 6 })));
    }
}
