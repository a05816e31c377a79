//! The direct translation from a QNP to a tagged FOND problem.

use std::collections::BTreeSet;

use crate::model::{zero_flag, AbstractState, AtomLit, FondAction, FondEffect, Literal, LitKind, Qnp, TagEntry, TaggedFond};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DirectError {
    #[error("action `{0}` is not applicable in the given state")]
    NotApplicable(String),
    #[error("no action `{0}`")]
    UnknownAction(String),
}

/// Maps a QNP literal onto the T_D atom universe (booleans then zero-flags).
pub fn flag_literal(q: &Qnp, l: &Literal) -> AtomLit {
    let (atom, value) = q.literal_atom(l).expect("validated QNP");
    AtomLit::new(atom, value)
}

/// Translates the action body shared by the direct and full translations.
pub(crate) fn direct_action(q: &Qnp, a: &crate::model::QnpAction) -> FondAction {
    let mut out = FondAction::new(&a.name);
    out.pre = a.pre.iter().map(|l| flag_literal(q, l)).collect();
    out.det = a.eff.iter().map(|l| flag_literal(q, l)).collect();
    for (op, x) in &a.num {
        let z = q.flag_index(x).expect("validated QNP");
        match op {
            crate::model::NumOp::Inc => {
                out.det.push(AtomLit::neg(z));
                out.tags.push(TagEntry::Inc(x.clone()));
            }
            crate::model::NumOp::Dec => {
                out.ndets.push(FondEffect { outcomes: vec![vec![AtomLit::neg(z)], vec![AtomLit::pos(z)]] });
                out.tags.push(TagEntry::Dec(x.clone()));
            }
        }
    }
    out
}

pub fn t_direct(q: &Qnp) -> TaggedFond {
    let atoms = q.atom_names();
    debug_assert!(q.nums.iter().all(|x| atoms.contains(&zero_flag(x))));
    // Closed world: booleans default to false, numerics to X>0.
    let mut init = Vec::new();
    for (i, b) in q.bools.iter().enumerate() {
        if q.init.iter().any(|l| l.kind == LitKind::BoolPos && &l.var == b) {
            init.push(i);
        }
    }
    for x in &q.nums {
        if q.init.iter().any(|l| l.kind == LitKind::NumZero && &l.var == x) {
            init.push(q.flag_index(x).unwrap());
        }
    }
    TaggedFond {
        name: q.name.clone(),
        atoms,
        init,
        actions: q.actions.iter().map(|a| direct_action(q, a)).collect(),
        goal: q.goal.iter().map(|l| flag_literal(q, l)).collect(),
    }
}

/// All successors of `s` under action `a`: one outcome per ndet, det effects on top, frame elsewhere.
pub fn qnp_boolean_successors(p: &TaggedFond, s: &AbstractState, action: &str) -> Result<BTreeSet<AbstractState>, DirectError> {
    let idx = p.action_index(action).ok_or_else(|| DirectError::UnknownAction(action.to_string()))?;
    let a = &p.actions[idx];
    if !a.pre.iter().all(|l| s.get(l.atom) == l.value) {
        return Err(DirectError::NotApplicable(action.to_string()));
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![(0usize, s.clone())];
    while let Some((k, mut t)) = stack.pop() {
        if k == a.ndets.len() {
            for l in &a.det {
                t.set(l.atom, l.value);
            }
            out.insert(t);
            continue;
        }
        for o in &a.ndets[k].outcomes {
            let mut u = t.clone();
            for l in o {
                u.set(l.atom, l.value);
            }
            stack.push((k + 1, u));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_qnp;
    use crate::model::validate_fond;

    const CLEAR: &str = "qnp clear\nbools H\nnums n\naction a\npre -H n>0\neff H n--\naction b\npre H\neff -H\ninit -H n>0\ngoal n=0\n";

    fn st(p: &TaggedFond, atoms: &[&str]) -> AbstractState {
        AbstractState::from_true_atoms(p.atoms.len(), atoms.iter().map(|a| p.atom_index(a).unwrap()))
    }

    #[test]
    fn clear_action_a() {
        let p = t_direct(&parse_qnp(CLEAR).unwrap());
        assert_eq!(p.atoms, vec!["H", "n=0"]);
        let a = &p.actions[0];
        assert_eq!(a.pre, vec![AtomLit::neg(0), AtomLit::neg(1)]);
        assert_eq!(a.det, vec![AtomLit::pos(0)]);
        assert_eq!(a.ndets[0].outcomes, vec![vec![AtomLit::neg(1)], vec![AtomLit::pos(1)]]);
        assert_eq!(a.tags, vec![TagEntry::Dec("n".into())]);
        assert!(validate_fond(&p).is_empty());
        assert!(p.init.is_empty());
    }

    #[test]
    fn clear_successors() {
        let p = t_direct(&parse_qnp(CLEAR).unwrap());
        let got = qnp_boolean_successors(&p, &st(&p, &[]), "a").unwrap();
        let want: BTreeSet<_> = [st(&p, &["H"]), st(&p, &["H", "n=0"])].into_iter().collect();
        assert_eq!(got, want);
        let got = qnp_boolean_successors(&p, &st(&p, &["H"]), "b").unwrap();
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec![st(&p, &[])]);
        assert_eq!(qnp_boolean_successors(&p, &st(&p, &["H"]), "a"), Err(DirectError::NotApplicable("a".into())));
    }

    #[test]
    fn nest_action_a() {
        let q = parse_qnp("qnp nest\nnums X Y\naction a\npre X>0 Y=0\neff X-- Y++\naction b\npre Y>0\neff Y--\ngoal X=0\n").unwrap();
        let p = t_direct(&q);
        let a = &p.actions[0];
        assert_eq!(a.det, vec![AtomLit::neg(1)]);
        assert_eq!(a.ndets.len(), 1);
        assert_eq!(a.tags, vec![TagEntry::Dec("X".into()), TagEntry::Inc("Y".into())]);
    }

    #[test]
    fn no_effects_is_identity() {
        let q = parse_qnp("qnp t\nbools p\naction noop\ninit p\ngoal -p\n").unwrap();
        let p = t_direct(&q);
        let s = st(&p, &["p"]);
        assert_eq!(qnp_boolean_successors(&p, &s, "noop").unwrap().into_iter().collect::<Vec<_>>(), vec![s]);
    }
}
