//! Helpers shared by the integration tests. Everything here is written
//! against the raw model types so it can act as an oracle for the library.
#![allow(dead_code)]

use qnpk::io::pddl_unname;
use qnpk::model::{AbstractState, LitKind, Literal, NumOp, NumericState, Policy, Qnp, TaggedFond};
use qnpk::sim::TraceRow;
use rand::seq::SliceRandom;
use rand::Rng;

const TOL: f64 = 1e-9;

fn lit_holds(q: &Qnp, s: &NumericState, l: &Literal) -> bool {
    match l.kind {
        LitKind::BoolPos => s.bools[q.bool_index(&l.var).unwrap()],
        LitKind::BoolNeg => !s.bools[q.bool_index(&l.var).unwrap()],
        LitKind::NumZero => s.reals[q.num_index(&l.var).unwrap()] == 0.0,
        LitKind::NumPos => s.reals[q.num_index(&l.var).unwrap()] > 0.0,
    }
}

pub fn holds_all(q: &Qnp, s: &NumericState, lits: &[Literal]) -> bool {
    lits.iter().all(|l| lit_holds(q, s, l))
}

/// Checks a rollout trace against the QNP semantics and the epsilon bound:
/// preconditions, boolean effects, strict monotone numeric change, frame,
/// non-negativity, and every change of size at least `eps` unless the
/// variable drops to 0 from below `eps`.
pub fn validate_trajectory(q: &Qnp, eps: f64, rows: &[TraceRow]) -> Result<(), String> {
    let first = rows.first().ok_or("empty trace")?;
    if first.action.is_some() {
        return Err("first row carries an action".into());
    }
    if !holds_all(q, &first.state, &q.init) {
        return Err("initial state violates init".into());
    }
    for (i, w) in rows.windows(2).enumerate() {
        let (s, t) = (&w[0].state, &w[1].state);
        let name = w[1].action.as_deref().ok_or(format!("row {} has no action", i + 1))?;
        let a = q.action(name).ok_or(format!("unknown action {name}"))?;
        if !holds_all(q, s, &a.pre) {
            return Err(format!("step {i}: {name} not applicable"));
        }
        for (b, v) in q.bools.iter().enumerate() {
            let eff = a.eff.iter().find(|l| l.var == *v);
            let want = match eff.map(|l| l.kind) {
                Some(LitKind::BoolPos) => true,
                Some(LitKind::BoolNeg) => false,
                _ => s.bools[b],
            };
            if t.bools[b] != want {
                return Err(format!("step {i}: boolean {v} wrong after {name}"));
            }
        }
        for (x, v) in q.nums.iter().enumerate() {
            let (before, after) = (s.reals[x], t.reals[x]);
            if after < 0.0 {
                return Err(format!("step {i}: {v} negative"));
            }
            let op = a.num.iter().find(|(_, n)| n == v).map(|(o, _)| *o);
            match op {
                Some(NumOp::Inc) if after <= before => return Err(format!("step {i}: {v} not increased")),
                Some(NumOp::Dec) if after >= before => return Err(format!("step {i}: {v} not decreased")),
                None if after != before => return Err(format!("step {i}: {v} changed without effect")),
                _ => {}
            }
            if after != before {
                let big = (after - before).abs() >= eps - TOL;
                let to_zero = after == 0.0 && before < eps;
                if !big && !to_zero {
                    return Err(format!("step {i}: {v} moved {before} -> {after} below epsilon {eps}"));
                }
            }
        }
    }
    Ok(())
}

/// All abstract successors realized by concrete moves from `s`: each
/// decremented variable either drops to 0 or halves.
pub fn realized_successors(q: &Qnp, s: &NumericState, action: &str) -> Vec<NumericState> {
    let a = q.action(action).unwrap();
    let mut base = s.clone();
    for l in &a.eff {
        let b = q.bool_index(&l.var).unwrap();
        base.bools[b] = l.kind == LitKind::BoolPos;
    }
    for (op, v) in &a.num {
        if *op == NumOp::Inc {
            base.reals[q.num_index(v).unwrap()] += 1.0;
        }
    }
    let decs: Vec<usize> = a.num.iter().filter(|(o, _)| *o == NumOp::Dec).map(|(_, v)| q.num_index(v).unwrap()).collect();
    (0..1usize << decs.len())
        .map(|mask| {
            let mut t = base.clone();
            for (k, &x) in decs.iter().enumerate() {
                t.reals[x] = if mask >> k & 1 == 1 { 0.0 } else { s.reals[x] / 2.0 };
            }
            t
        })
        .collect()
}

pub fn random_numeric_state<R: Rng>(rng: &mut R, q: &Qnp) -> NumericState {
    NumericState {
        bools: q.bools.iter().map(|_| rng.gen_bool(0.5)).collect(),
        reals: q.nums.iter().map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..5.0) }).collect(),
    }
}

/// A random total policy over every state of `p` that has an applicable action.
pub fn random_policy<R: Rng>(rng: &mut R, p: &TaggedFond) -> Policy {
    let c = p.compile();
    let n = p.atoms.len();
    let mut pi = Policy::new();
    for bits in 0..1u64 << n {
        let s = AbstractState::from_bits(&(0..n).map(|i| bits >> i & 1 == 1).collect::<Vec<_>>());
        if c.is_goal(&s) {
            continue;
        }
        let app: Vec<usize> = (0..c.num_actions()).filter(|&a| c.applicable(&s, a)).collect();
        if let Some(&a) = app.choose(rng) {
            pi.insert(s, p.actions[a].name.clone());
        }
    }
    pi
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn list(&self) -> &[Sexp] {
        match self {
            Sexp::List(v) => v,
            Sexp::Atom(a) => panic!("expected list, got {a}"),
        }
    }
    fn atom(&self) -> &str {
        match self {
            Sexp::Atom(a) => a,
            Sexp::List(_) => panic!("expected atom"),
        }
    }
}

pub fn parse_sexp(text: &str) -> Sexp {
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for tok in spaced.split_whitespace() {
        match tok {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().expect("balanced");
                stack.last_mut().expect("balanced").push(Sexp::List(done));
            }
            t => stack.last_mut().unwrap().push(Sexp::Atom(t.to_string())),
        }
    }
    assert_eq!(stack.len(), 1, "unbalanced parentheses");
    stack.pop().unwrap().pop().expect("one form")
}

fn section<'a>(form: &'a Sexp, key: &str) -> Option<&'a [Sexp]> {
    form.list().iter().find_map(|x| match x {
        Sexp::List(v) if v.first().map(|h| h == &Sexp::Atom(key.into())).unwrap_or(false) => Some(&v[1..]),
        _ => None,
    })
}

fn unname(s: &str) -> String {
    pddl_unname(s).unwrap_or_else(|| panic!("not a generated pddl name: {s}"))
}

/// Flatten `(and ...)` into `.fond` literal tokens; nested `oneof` forms go to `ndets`.
fn literals(e: &Sexp, out: &mut Vec<String>, ndets: &mut Vec<Vec<Vec<String>>>) {
    let v = e.list();
    match v.first().map(Sexp::atom) {
        Some("and") => v[1..].iter().for_each(|x| literals(x, out, ndets)),
        Some("not") => out.push(format!("-{}", unname(v[1].list()[0].atom()))),
        Some("oneof") => ndets.push(
            v[1..]
                .iter()
                .map(|o| {
                    let mut lits = Vec::new();
                    literals(o, &mut lits, &mut Vec::new());
                    lits
                })
                .collect(),
        ),
        Some(p) => out.push(unname(p)),
        None => {}
    }
}

/// Reimport an exported PDDL domain/problem pair as `.fond` text.
pub fn pddl_to_fond(domain: &str, problem: &str) -> String {
    let d = parse_sexp(domain);
    let p = parse_sexp(problem);
    let mut out = format!("fond {}\n", unname(d.list()[1].list()[1].atom()));
    let preds: Vec<String> = section(&d, ":predicates").unwrap_or(&[]).iter().map(|x| unname(x.list()[0].atom())).collect();
    out += &format!("atoms {}\n", preds.join(" "));
    for a in d.list().iter().filter(|x| matches!(x, Sexp::List(v) if v.first() == Some(&Sexp::Atom(":action".into())))) {
        let v = a.list();
        out += &format!("action {}\n", unname(v[1].atom()));
        let field = |k: &str| v.iter().position(|x| x == &Sexp::Atom(k.into())).map(|i| &v[i + 1]);
        let (mut pre, mut eff, mut ndets) = (Vec::new(), Vec::new(), Vec::new());
        if let Some(e) = field(":precondition") {
            literals(e, &mut pre, &mut Vec::new());
        }
        if let Some(e) = field(":effect") {
            literals(e, &mut eff, &mut ndets);
        }
        out += &format!("pre {}\neff {}\n", pre.join(" "), eff.join(" "));
        for o in ndets {
            out += &format!("oneof {}\n", o.iter().map(|l| l.join(" ")).collect::<Vec<_>>().join(" | "));
        }
    }
    let init: Vec<String> = section(&p, ":init").unwrap_or(&[]).iter().map(|x| unname(x.list()[0].atom())).collect();
    out += &format!("init {}\n", init.join(" "));
    let mut goal = Vec::new();
    for g in section(&p, ":goal").unwrap_or(&[]) {
        literals(g, &mut goal, &mut Vec::new());
    }
    out += &format!("goal {}\n", goal.join(" "));
    out
}

/// `p` with every action tag removed; PDDL carries no tags.
pub fn untagged(p: &TaggedFond) -> TaggedFond {
    let mut p = p.clone();
    for a in &mut p.actions {
        a.tags.clear();
    }
    p
}
