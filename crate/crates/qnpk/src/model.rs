//! Core types: QNPs, tagged FOND problems, abstract states, policies.
//!
//! A [`Qnp`] refers to its variables by name. A [`TaggedFond`] refers to atoms by
//! index into its ordered atom list; the zero-flag of a numeric variable `X` is the
//! atom named `X=0`. The [`AbstractState`] of a QNP lives over the same universe
//! as its direct translation: booleans first, then one zero-flag per numeric.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use smallvec::SmallVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LitKind {
    BoolPos,
    BoolNeg,
    NumZero,
    NumPos,
}

/// A QNP literal: `p`, `¬p`, `X=0` or `X>0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub kind: LitKind,
    pub var: String,
}

impl Literal {
    pub fn pos(v: &str) -> Self {
        Literal { kind: LitKind::BoolPos, var: v.to_string() }
    }
    pub fn neg(v: &str) -> Self {
        Literal { kind: LitKind::BoolNeg, var: v.to_string() }
    }
    pub fn zero(v: &str) -> Self {
        Literal { kind: LitKind::NumZero, var: v.to_string() }
    }
    pub fn gt(v: &str) -> Self {
        Literal { kind: LitKind::NumPos, var: v.to_string() }
    }

    pub fn is_bool(&self) -> bool {
        matches!(self.kind, LitKind::BoolPos | LitKind::BoolNeg)
    }

    pub fn complement(&self) -> Self {
        let kind = match self.kind {
            LitKind::BoolPos => LitKind::BoolNeg,
            LitKind::BoolNeg => LitKind::BoolPos,
            LitKind::NumZero => LitKind::NumPos,
            LitKind::NumPos => LitKind::NumZero,
        };
        Literal { kind, var: self.var.clone() }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LitKind::BoolPos => write!(f, "{}", self.var),
            LitKind::BoolNeg => write!(f, "-{}", self.var),
            LitKind::NumZero => write!(f, "{}=0", self.var),
            LitKind::NumPos => write!(f, "{}>0", self.var),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NumOp {
    Inc,
    Dec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QnpAction {
    pub name: String,
    pub pre: Vec<Literal>,
    /// Boolean effects only.
    pub eff: Vec<Literal>,
    pub num: Vec<(NumOp, String)>,
}

impl QnpAction {
    pub fn new(name: &str) -> Self {
        QnpAction { name: name.to_string(), pre: Vec::new(), eff: Vec::new(), num: Vec::new() }
    }

    pub fn decrements(&self) -> impl Iterator<Item = &str> {
        self.num.iter().filter(|(op, _)| *op == NumOp::Dec).map(|(_, v)| v.as_str())
    }

    pub fn increments(&self) -> impl Iterator<Item = &str> {
        self.num.iter().filter(|(op, _)| *op == NumOp::Inc).map(|(_, v)| v.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qnp {
    pub name: String,
    pub bools: Vec<String>,
    pub nums: Vec<String>,
    pub init: Vec<Literal>,
    pub actions: Vec<QnpAction>,
    pub goal: Vec<Literal>,
}

/// Name of the atom standing for `X=0`.
pub fn zero_flag(var: &str) -> String {
    format!("{var}=0")
}

impl Qnp {
    /// Atom universe shared with the direct translation.
    pub fn atom_names(&self) -> Vec<String> {
        let mut v = self.bools.clone();
        v.extend(self.nums.iter().map(|x| zero_flag(x)));
        v
    }

    pub fn num_atoms(&self) -> usize {
        self.bools.len() + self.nums.len()
    }

    pub fn bool_index(&self, v: &str) -> Option<usize> {
        self.bools.iter().position(|b| b == v)
    }

    pub fn num_index(&self, v: &str) -> Option<usize> {
        self.nums.iter().position(|b| b == v)
    }

    /// Atom index of the zero-flag `X=0`.
    pub fn flag_index(&self, v: &str) -> Option<usize> {
        self.num_index(v).map(|i| self.bools.len() + i)
    }

    pub fn action(&self, name: &str) -> Option<&QnpAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Atom index and value encoded by a literal, if the variable is declared with a matching sort.
    pub fn literal_atom(&self, l: &Literal) -> Option<(usize, bool)> {
        match l.kind {
            LitKind::BoolPos => self.bool_index(&l.var).map(|i| (i, true)),
            LitKind::BoolNeg => self.bool_index(&l.var).map(|i| (i, false)),
            LitKind::NumZero => self.num_index(&l.var).map(|i| (self.bools.len() + i, true)),
            LitKind::NumPos => self.num_index(&l.var).map(|i| (self.bools.len() + i, false)),
        }
    }

    pub fn holds(&self, s: &AbstractState, lits: &[Literal]) -> bool {
        lits.iter().all(|l| match self.literal_atom(l) {
            Some((i, v)) => s.get(i) == v,
            None => false,
        })
    }

    pub fn is_goal(&self, s: &AbstractState) -> bool {
        self.holds(s, &self.goal)
    }
}

/// A FOND literal: atom index plus polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomLit {
    pub atom: usize,
    pub value: bool,
}

impl AtomLit {
    pub fn new(atom: usize, value: bool) -> Self {
        AtomLit { atom, value }
    }
    pub fn pos(atom: usize) -> Self {
        AtomLit { atom, value: true }
    }
    pub fn neg(atom: usize) -> Self {
        AtomLit { atom, value: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FondEffect {
    pub outcomes: Vec<Vec<AtomLit>>,
}

/// Numeric provenance of a FOND action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TagEntry {
    Inc(String),
    Dec(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FondAction {
    pub name: String,
    pub pre: Vec<AtomLit>,
    pub det: Vec<AtomLit>,
    pub ndets: Vec<FondEffect>,
    /// Empty means no tag; several entries form a multi tag.
    pub tags: Vec<TagEntry>,
}

impl FondAction {
    pub fn new(name: &str) -> Self {
        FondAction { name: name.to_string(), pre: Vec::new(), det: Vec::new(), ndets: Vec::new(), tags: Vec::new() }
    }

    pub fn dec_vars(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().filter_map(|t| match t {
            TagEntry::Dec(v) => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn inc_vars(&self) -> impl Iterator<Item = &str> {
        self.tags.iter().filter_map(|t| match t {
            TagEntry::Inc(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedFond {
    pub name: String,
    pub atoms: Vec<String>,
    /// Atoms true initially; everything else is false.
    pub init: Vec<usize>,
    pub actions: Vec<FondAction>,
    pub goal: Vec<AtomLit>,
}

impl TaggedFond {
    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.name == name)
    }

    pub fn init_state(&self) -> AbstractState {
        let mut s = AbstractState::empty(self.atoms.len());
        for &i in &self.init {
            s.set(i, true);
        }
        s
    }

    /// Numeric variables mentioned by tags, ordered by the position of their zero-flag atom.
    pub fn tag_vars(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for a in &self.actions {
            for t in &a.tags {
                let v = match t {
                    TagEntry::Inc(v) | TagEntry::Dec(v) => v,
                };
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
        let key = |v: &String| self.atom_index(&zero_flag(v)).unwrap_or(usize::MAX);
        seen.sort_by(|a, b| key(a).cmp(&key(b)).then_with(|| a.cmp(b)));
        seen
    }

    pub fn compile(&self) -> CompiledFond {
        CompiledFond::new(self)
    }
}

type Words = SmallVec<[u64; 2]>;

/// Total truth assignment over a fixed, ordered atom universe.
///
/// Atom `i` is stored at bit `63 - i % 64` of word `i / 64`, so the derived
/// ordering is lexicographic over atoms with false before true.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractState {
    words: Words,
    len: usize,
}

impl AbstractState {
    pub fn empty(len: usize) -> Self {
        let n = len.div_ceil(64).max(1);
        AbstractState { words: SmallVec::from_elem(0, n), len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    pub fn from_true_atoms(len: usize, atoms: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in atoms {
            s.set(i, true);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn mask(i: usize) -> (usize, u64) {
        (i / 64, 1u64 << (63 - (i % 64)))
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        let (w, m) = Self::mask(i);
        self.words[w] & m != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let (w, m) = Self::mask(i);
        if v {
            self.words[w] |= m;
        } else {
            self.words[w] &= !m;
        }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn true_atoms(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    /// First `n` atoms as a state of their own.
    pub fn prefix(&self, n: usize) -> AbstractState {
        let mut s = AbstractState::empty(n);
        for i in 0..n {
            s.set(i, self.get(i));
        }
        s
    }

    /// Atoms `from..len` as a state of their own.
    pub fn suffix(&self, from: usize) -> AbstractState {
        let mut s = AbstractState::empty(self.len - from);
        for i in from..self.len {
            s.set(i - from, self.get(i));
        }
        s
    }

    pub fn concat(&self, other: &AbstractState) -> AbstractState {
        let mut s = AbstractState::empty(self.len + other.len);
        for i in 0..self.len {
            s.set(i, self.get(i));
        }
        for i in 0..other.len {
            s.set(self.len + i, other.get(i));
        }
        s
    }

    #[inline]
    fn covers(&self, m: &Mask) -> bool {
        self.words.iter().zip(&m.pos).all(|(w, p)| w & p == *p) && self.words.iter().zip(&m.neg).all(|(w, n)| w & n == 0)
    }

    #[inline]
    fn apply(&self, m: &Mask) -> AbstractState {
        let mut words = self.words.clone();
        for (i, w) in words.iter_mut().enumerate() {
            *w = (*w & !m.neg[i]) | m.pos[i];
        }
        AbstractState { words, len: self.len }
    }

    pub fn render(&self, names: &[String]) -> String {
        let parts: Vec<String> = (0..self.len)
            .map(|i| if self.get(i) { names[i].clone() } else { format!("-{}", names[i]) })
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

impl fmt::Debug for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "AbstractState({s})")
    }
}

/// Literal set packed as positive / negative bit masks.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Mask {
    pos: Words,
    neg: Words,
}

impl Mask {
    fn new(len: usize, lits: &[AtomLit]) -> Mask {
        let mut p = AbstractState::empty(len);
        let mut n = AbstractState::empty(len);
        for l in lits {
            if l.value {
                p.set(l.atom, true);
            } else {
                n.set(l.atom, true);
            }
        }
        Mask { pos: p.words, neg: n.words }
    }

    fn merge(&self, o: &Mask) -> Mask {
        Mask {
            pos: self.pos.iter().zip(&o.pos).map(|(a, b)| a | b).collect(),
            neg: self.neg.iter().zip(&o.neg).map(|(a, b)| a | b).collect(),
        }
    }
}

/// Precompiled transition function of a FOND problem.
#[derive(Clone, Debug)]
pub struct CompiledFond {
    pub num_atoms: usize,
    pre: Vec<Mask>,
    /// Effect masks per action: one per combination of ndet outcomes, det merged in.
    effects: Vec<Vec<Mask>>,
    goal: Mask,
    init: AbstractState,
}

impl CompiledFond {
    fn new(p: &TaggedFond) -> Self {
        let n = p.atoms.len();
        let mut pre = Vec::new();
        let mut effects = Vec::new();
        for a in &p.actions {
            pre.push(Mask::new(n, &a.pre));
            let mut combos = vec![Mask::new(n, &a.det)];
            for nd in &a.ndets {
                let mut next = Vec::new();
                for c in &combos {
                    for o in &nd.outcomes {
                        next.push(c.merge(&Mask::new(n, o)));
                    }
                }
                combos = next;
            }
            effects.push(combos);
        }
        CompiledFond { num_atoms: n, pre, effects, goal: Mask::new(n, &p.goal), init: p.init_state() }
    }

    pub fn num_actions(&self) -> usize {
        self.pre.len()
    }

    pub fn init(&self) -> &AbstractState {
        &self.init
    }

    #[inline]
    pub fn applicable(&self, s: &AbstractState, a: usize) -> bool {
        s.covers(&self.pre[a])
    }

    #[inline]
    pub fn is_goal(&self, s: &AbstractState) -> bool {
        s.covers(&self.goal)
    }

    /// Successors of `s` under action `a` (sorted, deduplicated); assumes applicability.
    pub fn successors(&self, s: &AbstractState, a: usize) -> Vec<AbstractState> {
        let mut out: Vec<AbstractState> = self.effects[a].iter().map(|m| s.apply(m)).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Partial mapping from abstract states to action names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub rules: BTreeMap<AbstractState, String>,
}

impl Policy {
    pub fn new() -> Self {
        Policy::default()
    }

    pub fn get(&self, s: &AbstractState) -> Option<&str> {
        self.rules.get(s).map(|x| x.as_str())
    }

    pub fn insert(&mut self, s: AbstractState, a: impl Into<String>) {
        self.rules.insert(s, a.into());
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Full valuation used by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericState {
    pub bools: Vec<bool>,
    pub reals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub subject: String,
    pub detail: String,
}

impl Violation {
    fn new(code: &'static str, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation { code, subject: subject.into(), detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.code, self.subject, self.detail)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("undeclared variable {0}")]
    Undeclared(String),
    #[error("inconsistent init: {0}")]
    InconsistentInit(String),
    #[error("numeric state does not match the model: {0}")]
    Shape(String),
}

fn check_lits(q: &Qnp, lits: &[Literal], subject: &str, out: &mut Vec<Violation>) {
    for l in lits {
        if q.literal_atom(l).is_none() {
            out.push(Violation::new("undeclared-variable", subject, format!("{l}")));
        }
    }
    for (i, l) in lits.iter().enumerate() {
        if lits[i + 1..].contains(&l.complement()) {
            let code = match subject.rsplit('.').next() {
                Some("init") => "inconsistent-init",
                Some("goal") => "inconsistent-goal",
                _ => "complementary-preconditions",
            };
            out.push(Violation::new(code, subject, format!("{l} and {}", l.complement())));
        }
    }
}

/// Checks every structural rule of a QNP; an empty list means the model is valid.
pub fn validate_qnp(q: &Qnp) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut names: HashSet<&str> = HashSet::new();
    for v in q.bools.iter().chain(&q.nums) {
        if !names.insert(v) {
            out.push(Violation::new("duplicate-variable", v.clone(), "declared twice"));
        }
    }
    for x in &q.nums {
        for derived in [format!("{x}=0"), format!("{x}>0"), format!("{x}++"), format!("{x}--")] {
            if q.bools.contains(&derived) {
                out.push(Violation::new("name-clash", derived.clone(), format!("boolean shadows numeric {x}")));
            }
        }
    }
    check_lits(q, &q.init, "init", &mut out);
    check_lits(q, &q.goal, "goal", &mut out);
    let mut anames: HashSet<&str> = HashSet::new();
    for a in &q.actions {
        if !anames.insert(&a.name) {
            out.push(Violation::new("duplicate-action", a.name.clone(), "declared twice"));
        }
        check_lits(q, &a.pre, &format!("{}.pre", a.name), &mut out);
        for l in &a.eff {
            if !l.is_bool() || q.bool_index(&l.var).is_none() {
                out.push(Violation::new("undeclared-variable", format!("{}.eff", a.name), format!("{l}")));
            }
        }
        for (i, l) in a.eff.iter().enumerate() {
            if a.eff[i + 1..].contains(&l.complement()) {
                out.push(Violation::new(
                    "complementary-effects",
                    format!("{}.eff", a.name),
                    format!("{l} and {}", l.complement()),
                ));
            }
        }
        for (op, v) in &a.num {
            if q.num_index(v).is_none() {
                out.push(Violation::new("undeclared-variable", format!("{}.eff", a.name), v.clone()));
            }
            if *op == NumOp::Dec && !a.pre.contains(&Literal::gt(v)) {
                out.push(Violation::new("missing-dec-guard", a.name.clone(), format!("{v}-- without {v}>0")));
            }
        }
        let mut seen_inc = BTreeSet::new();
        let mut seen_dec = BTreeSet::new();
        for (op, v) in &a.num {
            match op {
                NumOp::Inc => seen_inc.insert(v),
                NumOp::Dec => seen_dec.insert(v),
            };
        }
        for v in seen_inc.intersection(&seen_dec) {
            out.push(Violation::new(
                "complementary-qualitative-effects",
                a.name.clone(),
                format!("{v}++ and {v}--"),
            ));
        }
    }
    out
}

fn consistent(lits: &[AtomLit]) -> bool {
    lits.iter().all(|l| !lits.contains(&AtomLit::new(l.atom, !l.value)))
}

/// Checks every structural rule of a tagged FOND problem.
pub fn validate_fond(p: &TaggedFond) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = p.atoms.len();
    let mut seen: HashSet<&str> = HashSet::new();
    for a in &p.atoms {
        if !seen.insert(a) {
            out.push(Violation::new("duplicate-atom", a.clone(), "declared twice"));
        }
    }
    for &i in &p.init {
        if i >= n {
            out.push(Violation::new("unknown-atom", "init", format!("#{i}")));
        }
    }
    let in_range = |ls: &[AtomLit]| ls.iter().all(|l| l.atom < n);
    if !in_range(&p.goal) {
        out.push(Violation::new("unknown-atom", "goal", "atom out of range"));
    } else if !consistent(&p.goal) {
        out.push(Violation::new("inconsistent-goal", "goal", "complementary literals"));
    }
    let mut names: HashSet<&str> = HashSet::new();
    for a in &p.actions {
        if !names.insert(&a.name) {
            out.push(Violation::new("duplicate-action", a.name.clone(), "declared twice"));
        }
        let all_in_range = in_range(&a.pre)
            && in_range(&a.det)
            && a.ndets.iter().all(|e| e.outcomes.iter().all(|o| in_range(o)));
        if !all_in_range {
            out.push(Violation::new("unknown-atom", a.name.clone(), "atom out of range"));
            continue;
        }
        if !consistent(&a.pre) {
            out.push(Violation::new("complementary-preconditions", a.name.clone(), "pre"));
        }
        if !consistent(&a.det) {
            out.push(Violation::new("complementary-effects", a.name.clone(), "det"));
        }
        for (k, e) in a.ndets.iter().enumerate() {
            if e.outcomes.is_empty() {
                out.push(Violation::new("empty-ndet", a.name.clone(), format!("ndet {k}")));
            }
            for o in &e.outcomes {
                let mut joint = o.clone();
                joint.extend_from_slice(&a.det);
                if !consistent(&joint) {
                    out.push(Violation::new(
                        "inconsistent-outcome-choice",
                        a.name.clone(),
                        format!("ndet {k} outcome conflicts with det"),
                    ));
                }
            }
        }
        for i in 0..a.ndets.len() {
            for j in i + 1..a.ndets.len() {
                for o1 in &a.ndets[i].outcomes {
                    for o2 in &a.ndets[j].outcomes {
                        let mut joint = o1.clone();
                        joint.extend_from_slice(o2);
                        if !consistent(&joint) {
                            out.push(Violation::new(
                                "inconsistent-outcome-choice",
                                a.name.clone(),
                                format!("ndets {i} and {j}"),
                            ));
                        }
                    }
                }
            }
        }
        for t in &a.tags {
            if let TagEntry::Dec(v) = t {
                let guarded = p
                    .atom_index(&zero_flag(v))
                    .map(|z| a.pre.contains(&AtomLit::neg(z)))
                    .unwrap_or(false);
                if !guarded {
                    out.push(Violation::new("missing-dec-guard", a.name.clone(), format!("dec:{v} without -{v}=0")));
                }
            }
        }
    }
    out
}

/// Abstraction of a numeric state: booleans copied, zero-flags from the reals.
pub fn abstract_state(q: &Qnp, s: &NumericState) -> Result<AbstractState, ModelError> {
    if s.bools.len() != q.bools.len() || s.reals.len() != q.nums.len() {
        return Err(ModelError::Shape(format!(
            "expected {} booleans and {} reals",
            q.bools.len(),
            q.nums.len()
        )));
    }
    let mut a = AbstractState::empty(q.num_atoms());
    for (i, &b) in s.bools.iter().enumerate() {
        a.set(i, b);
    }
    for (i, &x) in s.reals.iter().enumerate() {
        if x < 0.0 || x.is_nan() {
            return Err(ModelError::Shape(format!("{} is negative", q.nums[i])));
        }
        a.set(q.bools.len() + i, x == 0.0);
    }
    Ok(a)
}

/// Abstraction of a named valuation (`bools` by name, `reals` by name).
pub fn abstract_named(
    q: &Qnp,
    bools: &BTreeMap<String, bool>,
    reals: &BTreeMap<String, f64>,
) -> Result<AbstractState, ModelError> {
    for k in bools.keys() {
        if q.bool_index(k).is_none() {
            return Err(ModelError::Undeclared(k.clone()));
        }
    }
    for k in reals.keys() {
        if q.num_index(k).is_none() {
            return Err(ModelError::Undeclared(k.clone()));
        }
    }
    let mut s = NumericState { bools: vec![false; q.bools.len()], reals: vec![0.0; q.nums.len()] };
    for (i, b) in q.bools.iter().enumerate() {
        s.bools[i] = *bools.get(b).ok_or_else(|| ModelError::Shape(format!("{b} unassigned")))?;
    }
    for (i, x) in q.nums.iter().enumerate() {
        s.reals[i] = *reals.get(x).ok_or_else(|| ModelError::Shape(format!("{x} unassigned")))?;
    }
    abstract_state(q, &s)
}

/// The closed-world initial abstract state of a QNP.
pub fn qnp_initial_state(q: &Qnp) -> Result<AbstractState, ModelError> {
    let mut s = AbstractState::empty(q.num_atoms());
    for l in &q.init {
        if q.init.contains(&l.complement()) {
            return Err(ModelError::InconsistentInit(l.to_string()));
        }
        let (i, v) = q.literal_atom(l).ok_or_else(|| ModelError::Undeclared(l.var.clone()))?;
        s.set(i, v);
    }
    Ok(s)
}

pub enum ModelRef<'a> {
    Qnp(&'a Qnp),
    Fond(&'a TaggedFond),
}

/// Initial abstract states; always a singleton under the closed-world reading.
pub fn initial_abstract_states(m: ModelRef<'_>) -> Result<BTreeSet<AbstractState>, ModelError> {
    let s = match m {
        ModelRef::Qnp(q) => qnp_initial_state(q)?,
        ModelRef::Fond(p) => {
            if let Some(&i) = p.init.iter().find(|&&i| i >= p.atoms.len()) {
                return Err(ModelError::InconsistentInit(format!("#{i}")));
            }
            p.init_state()
        }
    };
    Ok(BTreeSet::from([s]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clear() -> Qnp {
        let mut a = QnpAction::new("a");
        a.pre = vec![Literal::neg("H"), Literal::gt("n")];
        a.eff = vec![Literal::pos("H")];
        a.num = vec![(NumOp::Dec, "n".into())];
        let mut b = QnpAction::new("b");
        b.pre = vec![Literal::pos("H")];
        b.eff = vec![Literal::neg("H")];
        Qnp {
            name: "clear".into(),
            bools: vec!["H".into()],
            nums: vec!["n".into()],
            init: vec![Literal::neg("H"), Literal::gt("n")],
            actions: vec![a, b],
            goal: vec![Literal::zero("n")],
        }
    }

    #[test]
    fn clear_is_valid() {
        assert!(validate_qnp(&clear()).is_empty());
    }

    #[test]
    fn dec_without_guard() {
        let mut q = clear();
        q.actions[0].pre.retain(|l| l.kind != LitKind::NumPos);
        let v = validate_qnp(&q);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, "missing-dec-guard");
    }

    #[test]
    fn inc_and_dec_same_var() {
        let mut q = clear();
        q.actions[0].num.push((NumOp::Inc, "n".into()));
        assert!(validate_qnp(&q).iter().any(|v| v.code == "complementary-qualitative-effects"));
    }

    #[test]
    fn abstraction_examples() {
        let q = clear();
        let s = abstract_state(&q, &NumericState { bools: vec![false], reals: vec![3.7] }).unwrap();
        assert_eq!(s.bits(), vec![false, false]);
        let s = abstract_state(&q, &NumericState { bools: vec![true], reals: vec![0.0] }).unwrap();
        assert_eq!(s.bits(), vec![true, true]);
    }

    #[test]
    fn closed_world_init() {
        let q = Qnp {
            name: "t".into(),
            bools: vec!["p".into()],
            nums: vec!["X".into()],
            init: vec![],
            actions: vec![],
            goal: vec![],
        };
        let s = initial_abstract_states(ModelRef::Qnp(&q)).unwrap();
        assert_eq!(s.into_iter().next().unwrap().bits(), vec![false, false]);
        assert_eq!(qnp_initial_state(&clear()).unwrap().bits(), vec![false, false]);
    }

    #[test]
    fn state_order_is_lexicographic() {
        let a = AbstractState::from_bits(&[false, true, true]);
        let b = AbstractState::from_bits(&[true, false, false]);
        assert!(a < b);
        let wide: Vec<bool> = (0..130).map(|i| i == 129).collect();
        let wide2: Vec<bool> = (0..130).map(|i| i == 64).collect();
        assert!(AbstractState::from_bits(&wide) < AbstractState::from_bits(&wide2));
    }

    #[test]
    fn inconsistent_outcomes_detected() {
        let mut a = FondAction::new("x");
        a.ndets = vec![
            FondEffect { outcomes: vec![vec![AtomLit::pos(0)], vec![]] },
            FondEffect { outcomes: vec![vec![AtomLit::neg(0)], vec![]] },
        ];
        let p = TaggedFond { name: "t".into(), atoms: vec!["p".into()], init: vec![], actions: vec![a], goal: vec![] };
        assert!(validate_fond(&p).iter().any(|v| v.code == "inconsistent-outcome-choice"));
    }

    #[test]
    fn successors_take_one_outcome_per_ndet() {
        let mut a = FondAction::new("x");
        a.det = vec![AtomLit::pos(2)];
        a.ndets = vec![
            FondEffect { outcomes: vec![vec![AtomLit::pos(0)], vec![]] },
            FondEffect { outcomes: vec![vec![AtomLit::pos(1)], vec![AtomLit::neg(1)]] },
        ];
        let p = TaggedFond {
            name: "t".into(),
            atoms: vec!["p".into(), "q".into(), "r".into()],
            init: vec![1],
            actions: vec![a],
            goal: vec![],
        };
        let c = p.compile();
        let succ = c.successors(c.init(), 0);
        assert_eq!(succ.len(), 4);
        assert!(succ.iter().all(|s| s.get(2)));
    }
}
