//! ε-bounded real-valued execution of QNP policies and controllers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::direct::t_direct;
use crate::model::{abstract_state, AbstractState, CompiledFond, NumOp, NumericState, Policy, Qnp, QnpAction};
use crate::qnp2fond::{advance_memory, Controller, Role};
use crate::sieve::{build_policy_graph, run_sieve, tarjan_scc, PolicyGraph, SieveMode, Verdict};
use crate::solver::check_graph;

/// Name of the generator behind every rollout: ChaCha with 8 rounds, seeded
/// from the 64-bit seed, one stream per rollout index.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3, seed_from_u64, stream = rollout index)";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Adversary {
    #[default]
    Random,
    MinStep,
    /// Drops a decremented variable straight to zero unless that completes
    /// the goal, in which case it takes the smallest legal step.
    ZeroJump,
}

impl FromStr for Adversary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Adversary::Random),
            "min-step" => Ok(Adversary::MinStep),
            "zero-jump" => Ok(Adversary::ZeroJump),
            _ => Err(format!("unknown adversary `{s}` (random, min-step, zero-jump)")),
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Adversary::Random => "random",
            Adversary::MinStep => "min-step",
            Adversary::ZeroJump => "zero-jump",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub epsilon: f64,
    pub adversary: Adversary,
    pub seed: u64,
    pub max_steps: u64,
    pub init_high: f64,
    pub runs: usize,
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { epsilon: 0.1, adversary: Adversary::Random, seed: 0, max_steps: 100_000, init_high: 10.0, runs: 100, trace: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Goal,
    DeadEnd,
    StepCap,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Outcome::Goal => "goal",
            Outcome::DeadEnd => "dead-end",
            Outcome::StepCap => "step-cap",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    /// `None` for the initial row.
    pub action: Option<String>,
    pub state: NumericState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub final_state: NumericState,
    pub trace: Option<Vec<TraceRow>>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("policy has no rule for the initial state {0}")]
    NoInitialRule(String),
    #[error("abstract transition {from} -{action}-> {to} is not a successor in the direct translation")]
    Abstraction { from: String, action: String, to: String },
}

/// What picks the actions.
#[derive(Clone, Copy, Debug)]
pub enum Agent<'a> {
    Policy(&'a Policy),
    Controller(&'a Controller),
}

/// Internal controller moves allowed between two source actions.
const INTERNAL_MOVE_LIMIT: usize = 100_000;

impl SimConfig {
    fn check(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.init_high.is_finite() && self.epsilon <= self.init_high) {
            return bad("epsilon must not exceed init_high");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.runs == 0 {
            return bad("runs must be at least 1");
        }
        Ok(())
    }
}

struct Runner<'a> {
    q: &'a Qnp,
    td: CompiledFond,
    td_actions: Vec<String>,
    agent: Agent<'a>,
    cfg: &'a SimConfig,
}

enum Choice {
    Source(usize, Option<String>),
    Stop(String),
}

impl Runner<'_> {
    fn render(&self, s: &AbstractState) -> String {
        s.render(&self.q.atom_names())
    }

    fn pick(&self, s: &AbstractState, memory: &mut Option<AbstractState>) -> Result<Choice, SimError> {
        match self.agent {
            Agent::Policy(pi) => Ok(match pi.get(s) {
                None => Choice::Stop(format!("no rule for {}", self.render(s))),
                Some(a) => match self.q.actions.iter().position(|x| x.name == a) {
                    Some(k) => Choice::Source(k, None),
                    None => Choice::Stop(format!("unknown action `{a}`")),
                },
            }),
            Agent::Controller(c) => {
                let tr = &c.translation;
                for _ in 0..INTERNAL_MOVE_LIMIT {
                    let mem = memory.as_ref().expect("controller memory");
                    let full = s.concat(mem);
                    let Some(a) = c.policy.get(&full) else {
                        return Ok(Choice::Stop(format!("no controller rule for {}", full.render(&tr.fond.atoms))));
                    };
                    match &tr.roles[a] {
                        Role::Source(src) => {
                            let k = self.q.actions.iter().position(|x| &x.name == src).expect("source action");
                            return Ok(Choice::Source(k, Some(a.to_string())));
                        }
                        _ => match advance_memory(tr, &full, a, s) {
                            Some(m) => *memory = Some(m),
                            None => return Ok(Choice::Stop(format!("internal move `{a}` inapplicable"))),
                        },
                    }
                }
                Ok(Choice::Stop("controller loops on internal moves".into()))
            }
        }
    }

    fn dec(&self, rng: &mut ChaCha8Rng, x: f64, zero: bool) -> f64 {
        let eps = self.cfg.epsilon;
        if x < eps {
            return 0.0;
        }
        match self.cfg.adversary {
            Adversary::MinStep => x - eps,
            Adversary::ZeroJump if zero => 0.0,
            Adversary::ZeroJump => x - eps,
            Adversary::Random => {
                let d = rng.gen_range(eps..=x.max(eps));
                (x - d).max(0.0)
            }
        }
    }

    fn apply(&self, rng: &mut ChaCha8Rng, a: &QnpAction, s: &NumericState) -> NumericState {
        let mut t = s.clone();
        for l in &a.eff {
            let i = self.q.bool_index(&l.var).expect("validated");
            t.bools[i] = l.kind == crate::model::LitKind::BoolPos;
        }
        let decs: Vec<usize> = a.num.iter().filter(|e| e.0 == NumOp::Dec).map(|e| self.q.num_index(&e.1).expect("validated")).collect();
        let mut jump = vec![true; decs.len()];
        for (op, v) in &a.num {
            if *op == NumOp::Inc {
                let i = self.q.num_index(v).expect("validated");
                t.reals[i] += rng.gen_range(self.cfg.epsilon..=self.cfg.init_high);
            }
        }
        let base = t.clone();
        loop {
            let mut u = base.clone();
            for (k, &i) in decs.iter().enumerate() {
                u.reals[i] = self.dec(rng, s.reals[i], jump[k]);
            }
            if self.cfg.adversary != Adversary::ZeroJump {
                return u;
            }
            let goal = abstract_state(self.q, &u).map(|x| self.q.is_goal(&x)).unwrap_or(false);
            match jump.iter().position(|&j| j) {
                Some(k) if goal => jump[k] = false,
                _ => return u,
            }
        }
    }

    fn rollout(&self, index: usize) -> Result<RolloutResult, SimError> {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let init = crate::model::qnp_initial_state(self.q).map_err(|e| SimError::Config(e.to_string()))?;
        let nb = self.q.bools.len();
        let mut state = NumericState {
            bools: (0..nb).map(|i| init.get(i)).collect(),
            reals: (0..self.q.nums.len()).map(|i| if init.get(nb + i) { 0.0 } else { rng.gen_range(cfg.epsilon..=cfg.init_high) }).collect(),
        };
        let mut memory = match self.agent {
            Agent::Controller(c) => Some(c.initial_memory()),
            Agent::Policy(_) => None,
        };
        let mut trace = cfg.trace.then(|| vec![TraceRow { action: None, state: state.clone() }]);
        let mut steps = 0;
        let finish = |outcome, steps, state: NumericState, trace, diagnostic| {
            Ok(RolloutResult { outcome, steps, final_state: state, trace, diagnostic })
        };
        loop {
            let s = abstract_state(self.q, &state).expect("simulator keeps values non-negative");
            if self.q.is_goal(&s) {
                return finish(Outcome::Goal, steps, state, trace, None);
            }
            if steps >= cfg.max_steps {
                return finish(Outcome::StepCap, steps, state, trace, None);
            }
            let (k, generated) = match self.pick(&s, &mut memory)? {
                Choice::Source(k, g) => (k, g),
                Choice::Stop(msg) => return finish(Outcome::DeadEnd, steps, state, trace, Some(msg)),
            };
            let a = &self.q.actions[k];
            if !self.q.holds(&s, &a.pre) {
                return finish(Outcome::DeadEnd, steps, state, trace, Some(format!("`{}` inapplicable at {}", a.name, self.render(&s))));
            }
            let next = self.apply(&mut rng, a, &state);
            let t = abstract_state(self.q, &next).expect("non-negative");
            let ti = self.td_actions.iter().position(|n| *n == a.name).expect("same action names");
            if !self.td.successors(&s, ti).contains(&t) {
                return Err(SimError::Abstraction { from: self.render(&s), action: a.name.clone(), to: self.render(&t) });
            }
            if let (Agent::Controller(c), Some(g)) = (self.agent, generated) {
                let full = s.concat(memory.as_ref().expect("controller memory"));
                match advance_memory(&c.translation, &full, &g, &t) {
                    Some(m) => memory = Some(m),
                    None => return Err(SimError::Abstraction { from: self.render(&s), action: g, to: self.render(&t) }),
                }
            }
            state = next;
            steps += 1;
            if let Some(tr) = trace.as_mut() {
                tr.push(TraceRow { action: Some(a.name.clone()), state: state.clone() });
            }
        }
    }
}

/// Run `cfg.runs` seeded rollouts; results are ordered by rollout index.
pub fn simulate(q: &Qnp, agent: Agent<'_>, cfg: &SimConfig) -> Result<Vec<RolloutResult>, SimError> {
    cfg.check()?;
    let td = t_direct(q);
    let init = td.init_state();
    let defined = match agent {
        Agent::Policy(pi) => pi.get(&init).is_some() || q.is_goal(&init),
        Agent::Controller(c) => c.lookup(&init, &c.initial_memory()).is_some() || q.is_goal(&init),
    };
    if !defined {
        return Err(SimError::NoInitialRule(init.render(&td.atoms)));
    }
    let runner = Runner { q, td: td.compile(), td_actions: td.actions.iter().map(|a| a.name.clone()).collect(), agent, cfg };
    (0..cfg.runs).map(|i| runner.rollout(i)).collect()
}

/// Tab-separated trace: one row per state, columns step, action, booleans, reals.
pub fn trace_tsv(q: &Qnp, rows: &[TraceRow]) -> String {
    let mut out = String::from("step\taction");
    for name in q.bools.iter().chain(&q.nums) {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (k, r) in rows.iter().enumerate() {
        out.push_str(&format!("{k}\t{}", r.action.as_deref().unwrap_or("-")));
        for b in &r.state.bools {
            out.push_str(if *b { "\t1" } else { "\t0" });
        }
        for x in &r.state.reals {
            out.push_str(&format!("\t{x}"));
        }
        out.push('\n');
    }
    out
}

/// Upper bound on the number of actions any rollout under `pi` takes, from
/// the elimination structure of its policy graph. `None` when the policy is
/// rejected or the bound overflows.
pub fn derive_step_cap(q: &Qnp, pi: &Policy, cfg: &SimConfig) -> Option<u64> {
    let g = build_policy_graph(&t_direct(q), pi);
    if check_graph(&g).is_err() || run_sieve(&g, SieveMode::StopWhenAcyclic).verdict != Verdict::Terminating {
        return None;
    }
    let flags = g.vars.iter().map(|v| q.flag_index(v)).collect::<Option<Vec<usize>>>()?;
    let b = Bounder { g: &g, flags, eps: cfg.epsilon, high: cfg.init_high };
    let all: Vec<usize> = (0..g.len()).collect();
    let every = vec![true; g.edges.len()];
    let v0: Vec<f64> = b.flags.iter().map(|&f| if g.nodes[0].get(f) { 0.0 } else { b.high }).collect();
    let best = b.dag(&all, &every, &v0, Some(&[0]))?;
    let steps = best.iter().flatten().map(|x| x.0).fold(0.0, f64::max);
    (steps.is_finite() && steps < 1e15).then(|| steps.ceil() as u64)
}

struct Bounder<'a> {
    g: &'a PolicyGraph,
    flags: Vec<usize>,
    eps: f64,
    high: f64,
}

type Bound = (f64, Vec<f64>);

fn join(a: &mut Option<Bound>, b: Bound) {
    match a {
        None => *a = Some(b),
        Some((s, v)) => {
            *s = s.max(b.0);
            for (x, y) in v.iter_mut().zip(b.1) {
                *x = x.max(y);
            }
        }
    }
}

impl Bounder<'_> {
    fn clamp(&self, node: usize, mut v: Vec<f64>) -> Vec<f64> {
        for (k, &f) in self.flags.iter().enumerate() {
            if self.g.nodes[node].get(f) {
                v[k] = 0.0;
            }
        }
        v
    }

    fn after(&self, src: usize, dst: usize, v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        for &i in &self.g.inc[src] {
            v[i] += self.high;
        }
        self.clamp(dst, v)
    }

    /// Longest-path style bound over the components of `nodes` using `alive`
    /// edges; entry at `entries` (all nodes when `None`) with values `v`.
    fn dag(&self, nodes: &[usize], alive: &[bool], v: &[f64], entries: Option<&[usize]>) -> Option<Vec<Option<Bound>>> {
        let g = self.g;
        let local: std::collections::HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        let mut inner: Vec<usize> = Vec::new();
        for (k, e) in g.edges.iter().enumerate() {
            if let (true, Some(&a), Some(&b)) = (alive[k], local.get(&e.src), local.get(&e.dst)) {
                adj[a].push(b);
                inner.push(k);
            }
        }
        let sccs = tarjan_scc(nodes.len(), &adj);
        let members = sccs.members();
        let mut best: Vec<Option<Bound>> = vec![None; g.len()];
        for comp in &members {
            let mut input: Option<Bound> = None;
            for &m in comp {
                let u = nodes[m];
                if entries.is_none_or(|es| es.contains(&u)) {
                    join(&mut input, (0.0, self.clamp(u, v.to_vec())));
                }
            }
            for &k in &inner {
                let e = &g.edges[k];
                let (a, b) = (local[&e.src], local[&e.dst]);
                if sccs.comp[b] == sccs.comp[comp[0]] && sccs.comp[a] != sccs.comp[b] {
                    if let Some((s, vals)) = &best[e.src] {
                        join(&mut input, (s + 1.0, self.after(e.src, e.dst, vals)));
                    }
                }
            }
            let Some((s_in, v_in)) = input else { continue };
            let comp_nodes: Vec<usize> = comp.iter().map(|&m| nodes[m]).collect();
            let cyclic = inner.iter().any(|&k| comp_nodes.contains(&g.edges[k].src) && comp_nodes.contains(&g.edges[k].dst));
            let (s_int, v_out) = if cyclic { self.cyclic(&comp_nodes, alive, &v_in)? } else { (0.0, v_in) };
            for &u in &comp_nodes {
                best[u] = Some((s_in + s_int, self.clamp(u, v_out.clone())));
            }
        }
        Some(best)
    }

    /// Bound on the actions taken inside the cyclic component `c` before leaving it.
    fn cyclic(&self, c: &[usize], alive: &[bool], v: &[f64]) -> Option<Bound> {
        let g = self.g;
        let internal: Vec<usize> =
            (0..g.edges.len()).filter(|&k| alive[k] && c.contains(&g.edges[k].src) && c.contains(&g.edges[k].dst)).collect();
        let x = (0..g.vars.len()).find(|&x| {
            internal.iter().any(|&k| g.dec[g.edges[k].src].contains(&x)) && !internal.iter().any(|&k| g.inc[g.edges[k].src].contains(&x))
        })?;
        let budget = if v[x] > 0.0 { (v[x] / self.eps).ceil() } else { 0.0 };
        let exits_all_dec = (0..g.edges.len())
            .filter(|&k| alive[k] && c.contains(&g.edges[k].src) && !c.contains(&g.edges[k].dst))
            .all(|k| g.dec[g.edges[k].src].contains(&x));
        let m = if exits_all_dec { (budget - 1.0).max(0.0) } else { budget };
        let mut residual = alive.to_vec();
        let mut x_edges = Vec::new();
        for &k in &internal {
            if g.dec[g.edges[k].src].contains(&x) {
                residual[k] = false;
                x_edges.push(k);
            }
        }
        let mut entry = v.to_vec();
        let mut total = 0.0;
        let mut out = v.to_vec();
        let mut j = 0.0;
        loop {
            let best = self.dag(c, &residual, &entry, None)?;
            let mut phase: Option<Bound> = None;
            for &u in c {
                if let Some(b) = &best[u] {
                    join(&mut phase, b.clone());
                }
            }
            let (steps, vals) = phase?;
            total += steps;
            for (o, y) in out.iter_mut().zip(&vals) {
                *o = o.max(*y);
            }
            if j >= m {
                break;
            }
            let mut next: Option<Bound> = None;
            for &k in &x_edges {
                let e = &g.edges[k];
                if let Some((_, vals)) = &best[e.src] {
                    join(&mut next, (0.0, self.after(e.src, e.dst, vals)));
                }
            }
            let next = next.map(|b| b.1).unwrap_or_else(|| entry.clone());
            total += 1.0;
            j += 1.0;
            if next == entry {
                // Every remaining phase repeats this one.
                let rest = m - j;
                total += rest * (steps + 1.0) + steps;
                break;
            }
            entry = next;
            if total > 1e15 {
                return None;
            }
        }
        Some((total, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn cfg(adversary: Adversary, runs: usize) -> SimConfig {
        SimConfig { epsilon: 0.5, adversary, seed: 3, max_steps: 10_000, init_high: 10.0, runs, trace: false }
    }

    #[test]
    fn clear_reaches_goal_within_cap() {
        let (q, pi) = fixtures::qnp("clear");
        let cap = derive_step_cap(&q, &pi, &cfg(Adversary::Random, 1)).unwrap();
        assert!(cap <= 2 * 20 + 2, "cap {cap}");
        for adv in [Adversary::Random, Adversary::MinStep, Adversary::ZeroJump] {
            for r in simulate(&q, Agent::Policy(&pi), &cfg(adv, 50)).unwrap() {
                assert_eq!(r.outcome, Outcome::Goal);
                assert!(r.steps <= cap);
            }
        }
    }

    #[test]
    fn nest_cap_and_min_step() {
        let (q, pi) = fixtures::qnp("nest");
        let cap = derive_step_cap(&q, &pi, &cfg(Adversary::MinStep, 1)).unwrap();
        assert!(cap <= 21 * 42, "cap {cap}");
        for r in simulate(&q, Agent::Policy(&pi), &cfg(Adversary::MinStep, 20)).unwrap() {
            assert_eq!(r.outcome, Outcome::Goal);
            assert!(r.steps <= cap);
        }
    }

    #[test]
    fn loopbug_zero_jump_never_terminates() {
        let (q, pi) = fixtures::qnp("loopbug");
        assert_eq!(derive_step_cap(&q, &pi, &cfg(Adversary::ZeroJump, 1)), None);
        for r in simulate(&q, Agent::Policy(&pi), &cfg(Adversary::ZeroJump, 20)).unwrap() {
            assert_eq!(r.outcome, Outcome::StepCap);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let (q, pi) = fixtures::qnp("gripper");
        let c = SimConfig { trace: true, ..cfg(Adversary::Random, 5) };
        let a = simulate(&q, Agent::Policy(&pi), &c).unwrap();
        assert_eq!(a, simulate(&q, Agent::Policy(&pi), &c).unwrap());
        let tsv = trace_tsv(&q, a[0].trace.as_ref().unwrap());
        assert!(tsv.starts_with("step\taction\t"));
    }

    #[test]
    fn bad_config_and_missing_rule() {
        let (q, pi) = fixtures::qnp("clear");
        let c = SimConfig { epsilon: 20.0, ..cfg(Adversary::Random, 1) };
        assert!(matches!(simulate(&q, Agent::Policy(&pi), &c), Err(SimError::Config(_))));
        assert!(matches!(simulate(&q, Agent::Policy(&Policy::new()), &cfg(Adversary::Random, 1)), Err(SimError::NoInitialRule(_))));
    }
}
