//! The stack-and-counter translation from QNPs to FOND problems, variable
//! analysis, policy lifting and controller projection.
//!
//! Only *stacked* variables get stack atoms, depths and counters. *Direct*
//! variables are translated exactly as in [`t_direct`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::direct::{direct_action, t_direct};
use crate::model::{AbstractState, AtomLit, FondAction, Policy, Qnp, TaggedFond};
use crate::sieve::StackAnnotation;
use crate::solver::{count_reachable, solve_strong_cyclic_with, SolveError, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Treatment {
    Direct,
    Stacked,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Force {
    #[default]
    None,
    AllDirect,
    AllStacked,
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub force: Force,
    pub well_ordered: bool,
    /// Counter capacity; `None` means `1 + 2^n`.
    pub max: Option<u128>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationLayout {
    /// Treatment per numeric variable, in declaration order.
    pub treatment: Vec<(String, Treatment)>,
    pub stacked: Vec<String>,
    /// Stack depth bound D (number of stacked variables).
    pub depth: usize,
    /// Counter width W = 1 + |F| + |V|.
    pub width: usize,
    pub max: u128,
    /// Order found by the well-ordered analysis, when it ran.
    pub order: Option<Vec<String>>,
}

impl TranslationLayout {
    /// True when no variable is stacked and the translation is the direct one.
    pub fn is_degenerate(&self) -> bool {
        self.stacked.is_empty()
    }

    pub fn is_stacked(&self, x: &str) -> bool {
        self.stacked.iter().any(|s| s == x)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("layout does not match the QNP variables")]
    LayoutMismatch,
    #[error("counter capacity {max} does not fit in {width} bits")]
    MaxTooLarge { max: u128, width: usize },
    #[error("counter capacity must be positive")]
    MaxZero,
    #[error("too many variables for the counter encoding ({0})")]
    TooWide(usize),
    #[error("generated name `{0}` collides with an existing name")]
    NameCollision(String),
}

/// Variables in the order `X_1 .. X_k` such that every action incrementing
/// `X_i` decrements some `X_j` with `i < j`; the returned set is maximal.
pub fn well_ordered_subset(q: &Qnp) -> Vec<String> {
    let mut placed: Vec<String> = Vec::new();
    loop {
        let next = q.nums.iter().find(|x| {
            !placed.contains(x)
                && q.actions
                    .iter()
                    .filter(|a| a.increments().any(|v| v == x.as_str()))
                    .all(|a| a.decrements().any(|v| placed.iter().any(|p| p == v)))
        });
        match next {
            Some(x) => placed.push(x.clone()),
            None => break,
        }
    }
    placed.reverse();
    placed
}

pub fn analyze_variables(q: &Qnp, opts: &AnalyzeOptions) -> Result<TranslationLayout, TranslateError> {
    let n = q.num_atoms();
    let width = n + 1;
    if width >= 127 {
        return Err(TranslateError::TooWide(n));
    }
    let max = opts.max.unwrap_or(1 + (1u128 << n));
    if max == 0 {
        return Err(TranslateError::MaxZero);
    }
    if max > (1u128 << width) - 1 {
        return Err(TranslateError::MaxTooLarge { max, width });
    }
    let incremented: HashSet<&str> = q.actions.iter().flat_map(|a| a.increments()).collect();
    let order = if opts.well_ordered && opts.force == Force::None { Some(well_ordered_subset(q)) } else { None };
    let treatment: Vec<(String, Treatment)> = q
        .nums
        .iter()
        .map(|x| {
            let direct = match opts.force {
                Force::AllDirect => true,
                Force::AllStacked => false,
                Force::None => match &order {
                    Some(o) => o.contains(x),
                    None => !incremented.contains(x.as_str()),
                },
            };
            (x.clone(), if direct { Treatment::Direct } else { Treatment::Stacked })
        })
        .collect();
    let stacked: Vec<String> = treatment.iter().filter(|t| t.1 == Treatment::Stacked).map(|t| t.0.clone()).collect();
    Ok(TranslationLayout { depth: stacked.len(), treatment, stacked, width, max, order })
}

/// What a generated action stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    /// Applies the named source action.
    Source(String),
    Push { var: String, depth: usize },
    Pop { var: String, depth: usize },
    Move,
}

impl Role {
    pub fn is_internal(&self) -> bool {
        !matches!(self, Role::Source(_))
    }
}

#[derive(Clone, Debug)]
pub struct FullTranslation {
    pub fond: TaggedFond,
    pub layout: TranslationLayout,
    /// Action name -> role; total over the actions of `fond`.
    pub roles: BTreeMap<String, Role>,
    /// Number of leading atoms that form the direct-translation state.
    pub base: usize,
}

pub fn in_atom(x: &str) -> String {
    format!("in({x})")
}
pub fn depth_atom(d: usize) -> String {
    format!("depth({d})")
}
pub fn index_atom(x: &str, d: usize) -> String {
    format!("index({x}@{d})")
}
fn level_bit(d: usize, i: usize) -> String {
    format!("cbit({d}.{i})")
}
fn top_bit(i: usize) -> String {
    format!("cbit(T.{i})")
}

/// Alternative bit constraints: each inner list is a conjunction of (bit, value).
pub type BitGuards = Vec<Vec<(usize, bool)>>;

/// Action-splitting encoding of `c < Max; c := c + 1` on a `width`-bit counter.
/// Each entry is (carry position i, extra constraints on higher bits); the
/// variant requires bits `0..i` set and bit `i` clear.
pub fn increment_variants(width: usize, max: u128) -> Vec<(usize, BitGuards)> {
    let mut out = Vec::new();
    for i in 0..width {
        let low = 1u128 << i;
        if max < low {
            break;
        }
        // Value = h * 2^(i+1) + 2^i - 1 < max  <=>  h < k.
        let k = (max - low) / (low << 1) + 1;
        let hb = width - i - 1;
        let mut terms = Vec::new();
        if hb >= 127 || k >= (1u128 << hb) {
            terms.push(Vec::new());
        } else {
            for j in (0..hb).rev() {
                if k >> j & 1 == 1 {
                    let mut t: Vec<(usize, bool)> = ((j + 1)..hb).map(|b| (i + 1 + b, k >> b & 1 == 1)).collect();
                    t.push((i + 1 + j, false));
                    terms.push(t);
                }
            }
        }
        out.push((i, terms));
    }
    out
}

struct Builder {
    atoms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn add(&mut self, name: String) -> Result<usize, TranslateError> {
        if self.index.contains_key(&name) {
            return Err(TranslateError::NameCollision(name));
        }
        let i = self.atoms.len();
        self.index.insert(name.clone(), i);
        self.atoms.push(name);
        Ok(i)
    }
    fn get(&self, name: &str) -> usize {
        self.index[name]
    }
}

pub fn t_full(q: &Qnp, layout: &TranslationLayout) -> Result<TaggedFond, TranslateError> {
    Ok(translate(q, layout)?.fond)
}

/// The full translation together with the provenance of each generated action.
pub fn translate(q: &Qnp, layout: &TranslationLayout) -> Result<FullTranslation, TranslateError> {
    if layout.treatment.len() != q.nums.len() || layout.treatment.iter().zip(&q.nums).any(|(t, x)| &t.0 != x) {
        return Err(TranslateError::LayoutMismatch);
    }
    let direct = t_direct(q);
    let base = direct.atoms.len();
    if layout.is_degenerate() {
        let roles = direct.actions.iter().map(|a| (a.name.clone(), Role::Source(a.name.clone()))).collect();
        return Ok(FullTranslation { fond: direct, layout: layout.clone(), roles, base });
    }
    let d_max = layout.depth;
    let w = layout.width;
    let mut b = Builder { atoms: Vec::new(), index: HashMap::new() };
    for a in &direct.atoms {
        b.add(a.clone())?;
    }
    for x in &layout.stacked {
        b.add(in_atom(x))?;
    }
    for d in 0..=d_max {
        b.add(depth_atom(d))?;
    }
    for x in &layout.stacked {
        for d in 1..=d_max {
            b.add(index_atom(x, d))?;
        }
    }
    for d in 0..=d_max {
        for i in 0..w {
            b.add(level_bit(d, i))?;
        }
    }
    for i in 0..w {
        b.add(top_bit(i))?;
    }
    let reset = |b: &Builder, d: usize| -> Vec<AtomLit> { (0..w).map(|i| AtomLit::neg(b.get(&level_bit(d, i)))).collect() };
    let variants = increment_variants(w, layout.max);
    let variant_name = |prefix: &str, i: usize, k: usize, many: bool| -> String {
        if many {
            format!("{prefix}{i}.{k})")
        } else {
            format!("{prefix}{i})")
        }
    };

    let mut actions: Vec<FondAction> = Vec::new();
    let mut roles: BTreeMap<String, Role> = BTreeMap::new();
    for a in &q.actions {
        let base_action = direct_action(q, a);
        let guards: Vec<AtomLit> =
            a.increments().filter(|y| layout.is_stacked(y)).map(|y| AtomLit::neg(b.get(&in_atom(y)))).collect();
        let decs: Vec<&str> = a.decrements().collect();
        let stacked_decs: Vec<&str> = layout.stacked.iter().map(|s| s.as_str()).filter(|x| decs.contains(x)).collect();
        let touches_direct = decs.iter().any(|x| !layout.is_stacked(x));
        if stacked_decs.is_empty() {
            let mut fa = base_action.clone();
            fa.pre.extend(guards.iter().copied());
            if touches_direct {
                for d in 0..=d_max {
                    fa.det.extend(reset(&b, d));
                }
            }
            roles.insert(fa.name.clone(), Role::Source(a.name.clone()));
            actions.push(fa);
            continue;
        }
        for x in &stacked_decs {
            for d in 1..=d_max {
                let mut fa = base_action.clone();
                fa.name = format!("{}({x},{d})", a.name);
                fa.pre.push(AtomLit::pos(b.get(&index_atom(x, d))));
                fa.pre.extend(guards.iter().copied());
                let from = if touches_direct { 0 } else { d };
                for dd in from..=d_max {
                    fa.det.extend(reset(&b, dd));
                }
                roles.insert(fa.name.clone(), Role::Source(a.name.clone()));
                actions.push(fa);
            }
        }
    }
    for x in &layout.stacked {
        for d in 0..d_max {
            for (i, terms) in &variants {
                for (k, term) in terms.iter().enumerate() {
                    let mut fa = FondAction::new(&variant_name(&format!("Push({x},{d},"), *i, k + 1, terms.len() > 1));
                    fa.pre.push(AtomLit::neg(b.get(&in_atom(x))));
                    fa.pre.push(AtomLit::pos(b.get(&depth_atom(d))));
                    fa.pre.extend((0..*i).map(|j| AtomLit::pos(b.get(&level_bit(d, j)))));
                    fa.pre.push(AtomLit::neg(b.get(&level_bit(d, *i))));
                    fa.pre.extend(term.iter().map(|&(bit, v)| AtomLit::new(b.get(&level_bit(d, bit)), v)));
                    fa.det.push(AtomLit::pos(b.get(&in_atom(x))));
                    fa.det.push(AtomLit::pos(b.get(&index_atom(x, d + 1))));
                    fa.det.push(AtomLit::pos(b.get(&depth_atom(d + 1))));
                    fa.det.push(AtomLit::neg(b.get(&depth_atom(d))));
                    fa.det.extend((0..*i).map(|j| AtomLit::neg(b.get(&level_bit(d, j)))));
                    fa.det.push(AtomLit::pos(b.get(&level_bit(d, *i))));
                    fa.det.extend(reset(&b, d + 1));
                    roles.insert(fa.name.clone(), Role::Push { var: x.clone(), depth: d });
                    actions.push(fa);
                }
            }
        }
    }
    for x in &layout.stacked {
        for d in 1..=d_max {
            let mut fa = FondAction::new(&format!("Pop({x},{d})"));
            fa.pre.push(AtomLit::pos(b.get(&in_atom(x))));
            fa.pre.push(AtomLit::pos(b.get(&index_atom(x, d))));
            fa.pre.push(AtomLit::pos(b.get(&depth_atom(d))));
            fa.det.push(AtomLit::neg(b.get(&in_atom(x))));
            fa.det.push(AtomLit::neg(b.get(&index_atom(x, d))));
            fa.det.push(AtomLit::neg(b.get(&depth_atom(d))));
            fa.det.push(AtomLit::pos(b.get(&depth_atom(d - 1))));
            roles.insert(fa.name.clone(), Role::Pop { var: x.clone(), depth: d });
            actions.push(fa);
        }
    }
    for (i, terms) in &variants {
        for (k, term) in terms.iter().enumerate() {
            let mut fa = FondAction::new(&variant_name("Move(", *i, k + 1, terms.len() > 1));
            fa.pre.push(AtomLit::pos(b.get(&depth_atom(0))));
            fa.pre.extend((0..*i).map(|j| AtomLit::pos(b.get(&top_bit(j)))));
            fa.pre.push(AtomLit::neg(b.get(&top_bit(*i))));
            fa.pre.extend(term.iter().map(|&(bit, v)| AtomLit::new(b.get(&top_bit(bit)), v)));
            fa.det.extend((0..*i).map(|j| AtomLit::neg(b.get(&top_bit(j)))));
            fa.det.push(AtomLit::pos(b.get(&top_bit(*i))));
            roles.insert(fa.name.clone(), Role::Move);
            actions.push(fa);
        }
    }
    let mut names = HashSet::new();
    for a in &actions {
        if !names.insert(a.name.as_str()) {
            return Err(TranslateError::NameCollision(a.name.clone()));
        }
    }
    let mut init = direct.init.clone();
    init.push(b.get(&depth_atom(0)));
    let fond = TaggedFond { name: q.name.clone(), atoms: b.atoms, init, actions, goal: direct.goal.clone() };
    Ok(FullTranslation { fond, layout: layout.clone(), roles, base })
}

/// Stack, counters and top counter decoded from a state of the full translation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    pub stack: Vec<String>,
    pub counters: Vec<u128>,
    pub top: u128,
}

impl FullTranslation {
    pub fn decode(&self, s: &AbstractState) -> Memory {
        let f = &self.fond;
        let l = &self.layout;
        let at = |name: &str| f.atom_index(name).map(|i| s.get(i)).unwrap_or(false);
        let depth = (0..=l.depth).find(|&d| at(&depth_atom(d))).unwrap_or(0);
        let mut stack = Vec::new();
        for d in 1..=depth {
            if let Some(x) = l.stacked.iter().find(|x| at(&index_atom(x, d))) {
                stack.push(x.clone());
            }
        }
        let value = |bit: &dyn Fn(usize) -> String| -> u128 {
            (0..l.width).filter(|&i| at(&bit(i))).map(|i| 1u128 << i).sum()
        };
        let counters = (0..=l.depth).map(|d| value(&|i| level_bit(d, i))).collect();
        let top = value(&top_bit);
        Memory { stack, counters, top }
    }

    /// Applicable action of the given role family whose counter variant matches `s`.
    fn pick(&self, s: &AbstractState, want: impl Fn(&Role) -> bool) -> Option<usize> {
        let c = self.fond.compile();
        (0..self.fond.actions.len()).find(|&a| want(&self.roles[&self.fond.actions[a].name]) && c.applicable(s, a))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("state {0} is not covered by the stack annotation")]
    NotAnnotated(String),
    #[error("policy has no rule for reachable state {0}")]
    Open(String),
    #[error("no applicable `{action}` at {state} (counter exhausted?)")]
    NoAction { action: String, state: String },
}

/// The policy over T(q) induced by a terminating solution `pi` of q and the
/// exhaustive-Sieve annotation of its policy graph.
pub fn lift_policy_star(tr: &FullTranslation, pi: &Policy, ann: &StackAnnotation) -> Result<Policy, LiftError> {
    if tr.layout.is_degenerate() {
        // No memory atoms: T(q) is T_D(q) and pi already acts on it.
        return Ok(pi.clone());
    }
    let f = &tr.fond;
    let c = f.compile();
    let mut out = Policy::new();
    let mut seen: HashSet<AbstractState> = HashSet::new();
    let init = f.init_state();
    seen.insert(init.clone());
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        if c.is_goal(&s) {
            continue;
        }
        let sbar = s.prefix(tr.base);
        let render = || s.render(&f.atoms);
        let (scc, full_stack) = ann.entries.get(&sbar).cloned().ok_or_else(|| LiftError::NotAnnotated(sbar.render(&f.atoms[..tr.base])))?;
        let target: Vec<String> = full_stack.into_iter().filter(|x| tr.layout.is_stacked(x)).collect();
        let mem = tr.decode(&s);
        let depth = mem.stack.len();
        let is_prefix = mem.stack.len() <= target.len() && mem.stack.iter().zip(&target).all(|(a, b)| a == b);
        let pop_top = |what: &str| -> Result<usize, LiftError> {
            let x = mem.stack.last().unwrap().clone();
            tr.pick(&s, |r| matches!(r, Role::Pop { var, depth: d } if *var == x && *d == depth))
                .ok_or_else(|| LiftError::NoAction { action: format!("{what} Pop({x},{depth})"), state: render() })
        };
        let chosen = if mem.top < scc as u128 && depth > 0 {
            pop_top("early")?
        } else if mem.top < scc as u128 {
            tr.pick(&s, |r| *r == Role::Move).ok_or_else(|| LiftError::NoAction { action: "Move".into(), state: render() })?
        } else if !is_prefix {
            pop_top("mismatch")?
        } else if depth < target.len() {
            let x = target[depth].clone();
            tr.pick(&s, |r| matches!(r, Role::Push { var, depth: d } if *var == x && *d == depth))
                .ok_or_else(|| LiftError::NoAction { action: format!("Push({x},{depth})"), state: render() })?
        } else {
            let a = pi.get(&sbar).ok_or_else(|| LiftError::Open(sbar.render(&f.atoms[..tr.base])))?;
            let stacked_dec: Vec<String> = f
                .actions
                .iter()
                .find(|fa| tr.roles.get(&fa.name) == Some(&Role::Source(a.to_string())))
                .map(|fa| fa.dec_vars().filter(|x| tr.layout.is_stacked(x)).map(String::from).collect())
                .unwrap_or_default();
            let name = if stacked_dec.is_empty() {
                a.to_string()
            } else {
                let (d, x) = mem
                    .stack
                    .iter()
                    .enumerate()
                    .find(|(_, x)| stacked_dec.contains(x))
                    .map(|(k, x)| (k + 1, x.clone()))
                    .ok_or_else(|| LiftError::NoAction { action: format!("{a}(?,?)"), state: render() })?;
                format!("{a}({x},{d})")
            };
            let k = f.action_index(&name).filter(|&k| c.applicable(&s, k));
            k.ok_or_else(|| LiftError::NoAction { action: name, state: render() })?
        };
        out.insert(s.clone(), f.actions[chosen].name.clone());
        for t in c.successors(&s, chosen) {
            if seen.insert(t.clone()) {
                queue.push_back(t);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControllerMove {
    Source(String),
    Internal(String),
}

/// A policy over T(q) read as a controller for q with memory.
#[derive(Clone, Debug)]
pub struct Controller {
    pub translation: FullTranslation,
    pub policy: Policy,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Refusal {
    /// Q-states that get different source actions under different memories.
    pub conflicts: Vec<(AbstractState, Vec<String>)>,
}

impl Controller {
    pub fn base_atoms(&self) -> &[String] {
        &self.translation.fond.atoms[..self.translation.base]
    }

    pub fn initial_memory(&self) -> AbstractState {
        self.translation.fond.init_state().suffix(self.translation.base)
    }

    /// Rules as (Q-state, memory) -> move.
    pub fn rules(&self) -> Vec<(AbstractState, AbstractState, ControllerMove)> {
        let b = self.translation.base;
        self.policy
            .rules
            .iter()
            .map(|(s, a)| {
                let m = match &self.translation.roles[a] {
                    Role::Source(src) => ControllerMove::Source(src.clone()),
                    _ => ControllerMove::Internal(a.clone()),
                };
                (s.prefix(b), s.suffix(b), m)
            })
            .collect()
    }

    pub fn lookup(&self, q_state: &AbstractState, memory: &AbstractState) -> Option<&str> {
        self.policy.get(&q_state.concat(memory))
    }

    pub fn try_memoryless(&self) -> Result<Policy, Refusal> {
        let mut by_state: BTreeMap<AbstractState, BTreeSet<String>> = BTreeMap::new();
        for (s, _, m) in self.rules() {
            if let ControllerMove::Source(a) = m {
                by_state.entry(s).or_default().insert(a);
            }
        }
        let conflicts: Vec<(AbstractState, Vec<String>)> =
            by_state.iter().filter(|(_, v)| v.len() > 1).map(|(s, v)| (s.clone(), v.iter().cloned().collect())).collect();
        if !conflicts.is_empty() {
            return Err(Refusal { conflicts });
        }
        let mut pi = Policy::new();
        for (s, v) in by_state {
            pi.insert(s, v.into_iter().next().unwrap());
        }
        Ok(pi)
    }
}

pub fn project_full_policy(tr: &FullTranslation, pi_star: &Policy) -> Result<Controller, String> {
    if let Some((s, a)) = pi_star.rules.iter().find(|(s, a)| s.len() != tr.fond.atoms.len() || !tr.roles.contains_key(*a)) {
        return Err(format!("rule `{}` does not belong to the translation", if s.len() != tr.fond.atoms.len() { "state width" } else { a }));
    }
    Ok(Controller { translation: tr.clone(), policy: pi_star.clone() })
}

/// Successor of a controller step: memory after applying `action` in `full`,
/// given the Q-state the environment actually produced.
pub fn advance_memory(tr: &FullTranslation, full: &AbstractState, action: &str, next_q: &AbstractState) -> Option<AbstractState> {
    let c = tr.fond.compile();
    let a = tr.fond.action_index(action)?;
    if !c.applicable(full, a) {
        return None;
    }
    c.successors(full, a).into_iter().find(|t| &t.prefix(tr.base) == next_q).map(|t| t.suffix(tr.base))
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl PipelineError {
    pub fn is_unsolvable(&self) -> bool {
        matches!(self, PipelineError::Solve(e) if e.is_unsolvable())
    }
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub analyze: AnalyzeOptions,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug)]
pub struct PipelineSolution {
    pub translation: FullTranslation,
    /// Strong-cyclic solution of `translation.fond`.
    pub policy: Policy,
}

/// Smallest counter capacity known to keep the translation complete:
/// `1 + 2^n`, or one more than the number of reachable direct-translation
/// states when that is smaller, since no policy graph is larger.
pub fn completeness_max(q: &Qnp, cfg: &SolverConfig) -> Result<u128, SolveError> {
    let full = 1 + (1u128 << q.num_atoms().min(126));
    let reach = count_reachable(&t_direct(q), cfg)? as u128;
    Ok(full.min(reach + 1))
}

/// Translate and solve. With no explicit `max`, tries growing capacities up
/// to [`completeness_max`]: a solution found with a smaller capacity is still
/// sound, and an unsolvable direct translation rules out every capacity.
pub fn solve_qnp_full(q: &Qnp, opts: &PipelineOptions) -> Result<PipelineSolution, PipelineError> {
    let solve = |max: Option<u128>| -> Result<PipelineSolution, PipelineError> {
        let layout = analyze_variables(q, &AnalyzeOptions { max, ..opts.analyze.clone() })?;
        let translation = translate(q, &layout)?;
        let policy = solve_strong_cyclic_with(&translation.fond, &opts.solver)?;
        Ok(PipelineSolution { translation, policy })
    };
    if opts.analyze.max.is_some() || analyze_variables(q, &opts.analyze)?.is_degenerate() {
        return solve(opts.analyze.max);
    }
    solve_strong_cyclic_with(&t_direct(q), &opts.solver)?;
    let bound = completeness_max(q, &opts.solver)?;
    let mut max = 1u128;
    loop {
        let rung = max.min(bound);
        match solve(Some(rung)) {
            Err(e) if e.is_unsolvable() && rung < bound => max *= 2,
            r => return r,
        }
    }
}
