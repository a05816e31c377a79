//! Line-oriented text formats: `.qnp`, `.fond`, `.pol`, plus PDDL export.
//!
//! Every format uses `#` comments and whitespace-separated tokens. Emission is
//! canonical, and parsing an emitted text gives back the same structure.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::model::{
    validate_fond, validate_qnp, AbstractState, AtomLit, FondAction, FondEffect, Literal, NumOp, Policy, Qnp,
    QnpAction, TagEntry, TaggedFond, Violation,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("{span}: {msg}")]
    Syntax { span: SourceSpan, msg: String },
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl ParseError {
    /// Stable short code (`duplicate-state`, `missing-dec-guard`, ...).
    pub fn code(&self) -> &str {
        match self {
            ParseError::Syntax { msg, .. } => msg.split(':').next().unwrap_or(msg),
            ParseError::Invalid(v) => v.first().map(|v| v.code).unwrap_or("invalid"),
        }
    }
}

pub type ParseResult<T> = Result<T, ParseError>;

/// Parser switches. Reserved names (leading `__`) are only accepted when
/// `allow_reserved` is set, which is how generated models are read back.
#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub file: String,
    pub allow_reserved: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { file: "<input>".into(), allow_reserved: false }
    }
}

impl ParseOptions {
    pub fn named(file: &str) -> Self {
        ParseOptions { file: file.into(), ..Default::default() }
    }
    pub fn generated() -> Self {
        ParseOptions { allow_reserved: true, ..Default::default() }
    }
}

struct Tok<'a> {
    col: usize,
    text: &'a str,
}

struct Line<'a> {
    no: usize,
    toks: Vec<Tok<'a>>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        for (k, c) in body.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push(Tok { col: body[..s].chars().count() + 1, text: &body[s..k] });
                }
            } else if start.is_none() {
                start = Some(k);
            }
        }
        if let Some(s) = start {
            toks.push(Tok { col: body[..s].chars().count() + 1, text: &body[s..] });
        }
        if !toks.is_empty() {
            out.push(Line { no: i + 1, toks });
        }
    }
    out
}

struct Ctx<'o> {
    opts: &'o ParseOptions,
}

impl Ctx<'_> {
    fn err<T>(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseResult<T> {
        Err(ParseError::Syntax { span: SourceSpan { file: self.opts.file.clone(), line, col }, msg: msg.into() })
    }

    fn ident(&self, line: usize, t: &Tok<'_>, allow_comma: bool) -> ParseResult<String> {
        let s = t.text;
        let bad = s.starts_with('-') || s == "=>" || s == "|" || s.contains('|') || (!allow_comma && s.contains(','));
        if bad {
            return self.err(line, t.col, format!("bad-identifier: {s}"));
        }
        if s.starts_with("__") && !self.opts.allow_reserved {
            return self.err(line, t.col, format!("reserved-name: {s}"));
        }
        Ok(s.to_string())
    }
}

/// Syntax-only QNP parse; no semantic validation.
pub fn parse_qnp_unchecked(text: &str, opts: &ParseOptions) -> ParseResult<Qnp> {
    let cx = Ctx { opts };
    let lines = tokenize(text);
    let mut name: Option<String> = None;
    let mut bools = Vec::new();
    let mut nums = Vec::new();
    // Literal tokens are resolved after all declarations are known.
    struct Raw<'a> {
        line: usize,
        toks: Vec<&'a Tok<'a>>,
    }
    let mut actions: Vec<(String, Option<Raw>, Option<Raw>)> = Vec::new();
    let mut init: Option<Raw> = None;
    let mut goal: Option<Raw> = None;
    for l in &lines {
        let head = &l.toks[0];
        let rest: Vec<&Tok> = l.toks[1..].iter().collect();
        match head.text {
            "qnp" => {
                if name.is_some() || rest.len() != 1 {
                    return cx.err(l.no, head.col, "syntax: expected a single `qnp <name>` header");
                }
                name = Some(cx.ident(l.no, rest[0], false)?);
            }
            "bools" | "nums" => {
                for t in &rest {
                    let v = cx.ident(l.no, t, false)?;
                    if head.text == "bools" {
                        bools.push(v);
                    } else {
                        nums.push(v);
                    }
                }
            }
            "action" => {
                if rest.len() != 1 {
                    return cx.err(l.no, head.col, "syntax: expected `action <name>`");
                }
                actions.push((cx.ident(l.no, rest[0], true)?, None, None));
            }
            "pre" | "eff" => {
                let Some(last) = actions.last_mut() else {
                    return cx.err(l.no, head.col, format!("syntax: `{}` outside an action block", head.text));
                };
                let slot = if head.text == "pre" { &mut last.1 } else { &mut last.2 };
                if slot.is_some() {
                    return cx.err(l.no, head.col, format!("syntax: repeated `{}` line", head.text));
                }
                *slot = Some(Raw { line: l.no, toks: rest });
            }
            "init" | "goal" => {
                let slot = if head.text == "init" { &mut init } else { &mut goal };
                if slot.is_some() {
                    return cx.err(l.no, head.col, format!("syntax: repeated `{}` line", head.text));
                }
                *slot = Some(Raw { line: l.no, toks: rest });
            }
            other => return cx.err(l.no, head.col, format!("syntax: unknown keyword `{other}`")),
        }
    }
    let Some(name) = name else {
        return cx.err(1, 1, "syntax: missing `qnp <name>` header");
    };
    let lit = |line: usize, t: &Tok| -> ParseResult<Literal> {
        let s = t.text;
        if let Some(r) = s.strip_prefix('-') {
            if bools.iter().any(|b| b == r) {
                return Ok(Literal::neg(r));
            }
        } else if bools.iter().any(|b| b == s) {
            return Ok(Literal::pos(s));
        } else if let Some(x) = s.strip_suffix("=0").filter(|x| nums.iter().any(|n| n == x)) {
            return Ok(Literal::zero(x));
        } else if let Some(x) = s.strip_suffix(">0").filter(|x| nums.iter().any(|n| n == x)) {
            return Ok(Literal::gt(x));
        }
        cx.err(line, t.col, format!("unknown-literal: {s}"))
    };
    let lits = |r: &Option<Raw>| -> ParseResult<Vec<Literal>> {
        match r {
            None => Ok(Vec::new()),
            Some(r) => r.toks.iter().map(|t| lit(r.line, t)).collect(),
        }
    };
    let mut out_actions = Vec::new();
    for (aname, pre, eff) in &actions {
        let mut a = QnpAction::new(aname);
        a.pre = lits(pre)?;
        if let Some(r) = eff {
            for t in &r.toks {
                let s = t.text;
                if let Some(x) = s.strip_suffix("++").filter(|x| nums.iter().any(|n| n == x)) {
                    a.num.push((NumOp::Inc, x.to_string()));
                } else if let Some(x) = s.strip_suffix("--").filter(|x| nums.iter().any(|n| n == x)) {
                    a.num.push((NumOp::Dec, x.to_string()));
                } else {
                    let l = lit(r.line, t)?;
                    if !l.is_bool() {
                        return cx.err(r.line, t.col, format!("syntax: numeric literal `{s}` used as an effect"));
                    }
                    a.eff.push(l);
                }
            }
        }
        out_actions.push(a);
    }
    let init = lits(&init)?;
    let goal = lits(&goal)?;
    Ok(Qnp { name, bools, nums, init, actions: out_actions, goal })
}

/// Parses and validates a QNP.
pub fn parse_qnp_with(text: &str, opts: &ParseOptions) -> ParseResult<Qnp> {
    let q = parse_qnp_unchecked(text, opts)?;
    let v = validate_qnp(&q);
    if v.is_empty() {
        Ok(q)
    } else {
        Err(ParseError::Invalid(v))
    }
}

pub fn parse_qnp(text: &str) -> ParseResult<Qnp> {
    parse_qnp_with(text, &ParseOptions::default())
}

fn push_line(out: &mut String, head: &str, toks: impl IntoIterator<Item = String>) {
    out.push_str(head);
    for t in toks {
        out.push(' ');
        out.push_str(&t);
    }
    out.push('\n');
}

pub fn emit_qnp(q: &Qnp) -> String {
    let mut out = String::new();
    push_line(&mut out, "qnp", [q.name.clone()]);
    push_line(&mut out, "bools", q.bools.iter().cloned());
    push_line(&mut out, "nums", q.nums.iter().cloned());
    for a in &q.actions {
        push_line(&mut out, "action", [a.name.clone()]);
        push_line(&mut out, "pre", a.pre.iter().map(|l| l.to_string()));
        let nums = a.num.iter().map(|(op, x)| match op {
            NumOp::Inc => format!("{x}++"),
            NumOp::Dec => format!("{x}--"),
        });
        push_line(&mut out, "eff", a.eff.iter().map(|l| l.to_string()).chain(nums));
    }
    push_line(&mut out, "init", q.init.iter().map(|l| l.to_string()));
    push_line(&mut out, "goal", q.goal.iter().map(|l| l.to_string()));
    out
}

/// Syntax-only FOND parse.
pub fn parse_fond_unchecked(text: &str, opts: &ParseOptions) -> ParseResult<TaggedFond> {
    let cx = Ctx { opts };
    let lines = tokenize(text);
    let mut name: Option<String> = None;
    let mut atoms: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut actions: Vec<FondAction> = Vec::new();
    let mut init: Option<Vec<usize>> = None;
    let mut goal: Option<Vec<AtomLit>> = None;
    let mut seen_pre = false;
    let mut seen_eff = false;
    for l in &lines {
        let head = &l.toks[0];
        let rest = &l.toks[1..];
        let lit = |t: &Tok| -> ParseResult<AtomLit> {
            let (neg, s) = match t.text.strip_prefix('-') {
                Some(r) => (true, r),
                None => (false, t.text),
            };
            match index.get(s) {
                Some(&i) => Ok(AtomLit::new(i, !neg)),
                None => cx.err(l.no, t.col, format!("unknown-atom: {s}")),
            }
        };
        match head.text {
            "fond" => {
                if name.is_some() || rest.len() != 1 {
                    return cx.err(l.no, head.col, "syntax: expected a single `fond <name>` header");
                }
                name = Some(cx.ident(l.no, &rest[0], false)?);
            }
            "atoms" => {
                for t in rest {
                    let a = cx.ident(l.no, t, false)?;
                    index.entry(a.clone()).or_insert(atoms.len());
                    atoms.push(a);
                }
            }
            "action" => {
                if rest.len() != 1 {
                    return cx.err(l.no, head.col, "syntax: expected `action <name>`");
                }
                actions.push(FondAction::new(&cx.ident(l.no, &rest[0], true)?));
                seen_pre = false;
                seen_eff = false;
            }
            "pre" | "eff" | "oneof" | "tag" => {
                let Some(a) = actions.last_mut() else {
                    return cx.err(l.no, head.col, format!("syntax: `{}` outside an action block", head.text));
                };
                match head.text {
                    "pre" | "eff" => {
                        let seen = if head.text == "pre" { &mut seen_pre } else { &mut seen_eff };
                        if *seen {
                            return cx.err(l.no, head.col, format!("syntax: repeated `{}` line", head.text));
                        }
                        *seen = true;
                        let ls = rest.iter().map(&lit).collect::<ParseResult<Vec<_>>>()?;
                        if head.text == "pre" {
                            a.pre = ls;
                        } else {
                            a.det = ls;
                        }
                    }
                    "oneof" => {
                        if rest.is_empty() {
                            return cx.err(l.no, head.col, "empty-oneof: a oneof line needs at least one outcome");
                        }
                        let mut outcomes = vec![Vec::new()];
                        for t in rest {
                            if t.text == "|" {
                                outcomes.push(Vec::new());
                            } else {
                                outcomes.last_mut().unwrap().push(lit(t)?);
                            }
                        }
                        a.ndets.push(FondEffect { outcomes });
                    }
                    _ => {
                        if rest.len() != 1 {
                            return cx.err(l.no, head.col, "syntax: expected `tag inc:X` or `tag dec:X`");
                        }
                        let t = &rest[0];
                        let entry = if let Some(x) = t.text.strip_prefix("inc:") {
                            TagEntry::Inc(x.to_string())
                        } else if let Some(x) = t.text.strip_prefix("dec:") {
                            TagEntry::Dec(x.to_string())
                        } else {
                            return cx.err(l.no, t.col, format!("syntax: bad tag `{}`", t.text));
                        };
                        a.tags.push(entry);
                    }
                }
            }
            "init" => {
                if init.is_some() {
                    return cx.err(l.no, head.col, "syntax: repeated `init` line");
                }
                let mut v = Vec::new();
                for t in rest {
                    match index.get(t.text) {
                        Some(&i) => v.push(i),
                        None => return cx.err(l.no, t.col, format!("unknown-atom: {}", t.text)),
                    }
                }
                init = Some(v);
            }
            "goal" => {
                if goal.is_some() {
                    return cx.err(l.no, head.col, "syntax: repeated `goal` line");
                }
                goal = Some(rest.iter().map(&lit).collect::<ParseResult<Vec<_>>>()?);
            }
            other => return cx.err(l.no, head.col, format!("syntax: unknown keyword `{other}`")),
        }
    }
    let Some(name) = name else {
        return cx.err(1, 1, "syntax: missing `fond <name>` header");
    };
    Ok(TaggedFond { name, atoms, init: init.unwrap_or_default(), actions, goal: goal.unwrap_or_default() })
}

pub fn parse_fond_with(text: &str, opts: &ParseOptions) -> ParseResult<TaggedFond> {
    let p = parse_fond_unchecked(text, opts)?;
    let v = validate_fond(&p);
    if v.is_empty() {
        Ok(p)
    } else {
        Err(ParseError::Invalid(v))
    }
}

pub fn parse_fond(text: &str) -> ParseResult<TaggedFond> {
    parse_fond_with(text, &ParseOptions::default())
}

fn fond_lit(p: &TaggedFond, l: &AtomLit) -> String {
    if l.value {
        p.atoms[l.atom].clone()
    } else {
        format!("-{}", p.atoms[l.atom])
    }
}

pub fn emit_fond(p: &TaggedFond) -> String {
    let mut out = String::new();
    push_line(&mut out, "fond", [p.name.clone()]);
    push_line(&mut out, "atoms", p.atoms.iter().cloned());
    for a in &p.actions {
        push_line(&mut out, "action", [a.name.clone()]);
        push_line(&mut out, "pre", a.pre.iter().map(|l| fond_lit(p, l)));
        push_line(&mut out, "eff", a.det.iter().map(|l| fond_lit(p, l)));
        for e in &a.ndets {
            let mut toks = Vec::new();
            for (k, o) in e.outcomes.iter().enumerate() {
                if k > 0 {
                    toks.push("|".to_string());
                }
                toks.extend(o.iter().map(|l| fond_lit(p, l)));
            }
            push_line(&mut out, "oneof", toks);
        }
        for t in &a.tags {
            let s = match t {
                TagEntry::Inc(x) => format!("inc:{x}"),
                TagEntry::Dec(x) => format!("dec:{x}"),
            };
            push_line(&mut out, "tag", [s]);
        }
    }
    push_line(&mut out, "init", p.init.iter().map(|&i| p.atoms[i].clone()));
    push_line(&mut out, "goal", p.goal.iter().map(|l| fond_lit(p, l)));
    out
}

/// What a policy file is checked against: a name, an atom universe and action names.
pub trait PolicyModel {
    fn model_name(&self) -> &str;
    fn atom_universe(&self) -> Vec<String>;
    fn has_action(&self, name: &str) -> bool;
}

impl PolicyModel for Qnp {
    fn model_name(&self) -> &str {
        &self.name
    }
    fn atom_universe(&self) -> Vec<String> {
        self.atom_names()
    }
    fn has_action(&self, name: &str) -> bool {
        self.action(name).is_some()
    }
}

impl PolicyModel for TaggedFond {
    fn model_name(&self) -> &str {
        &self.name
    }
    fn atom_universe(&self) -> Vec<String> {
        self.atoms.clone()
    }
    fn has_action(&self, name: &str) -> bool {
        self.action_index(name).is_some()
    }
}

pub fn parse_policy_with(text: &str, model: &dyn PolicyModel, opts: &ParseOptions) -> ParseResult<Policy> {
    let cx = Ctx { opts };
    let universe = model.atom_universe();
    let index: HashMap<&str, usize> = universe.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let mut policy = Policy::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        if !header {
            let toks: Vec<&str> = body.split_whitespace().collect();
            if toks.len() != 2 || toks[0] != "policy" {
                return cx.err(no, 1, "syntax: expected `policy <model-name>` header");
            }
            if toks[1] != model.model_name() {
                return cx.err(no, 8, format!("model-mismatch: policy for `{}`, model is `{}`", toks[1], model.model_name()));
            }
            header = true;
            continue;
        }
        let Some(k) = body.find("=>") else {
            return cx.err(no, 1, "syntax: expected `<atoms> => <action>`");
        };
        let lhs = &body[..k];
        let action = body[k + 2..].trim();
        let acol = body[..k + 2].chars().count() + 1 + (body[k + 2..].len() - body[k + 2..].trim_start().len());
        if action.is_empty() || action.contains(char::is_whitespace) {
            return cx.err(no, acol, "syntax: expected a single action name after `=>`");
        }
        if !model.has_action(action) {
            return cx.err(no, acol, format!("unknown-action: {action}"));
        }
        let mut s = AbstractState::empty(universe.len());
        if !lhs.trim().is_empty() {
            let mut off = 0;
            for part in lhs.split(',') {
                let name = part.trim();
                let col = off + part.len() - part.trim_start().len() + 1;
                off += part.len() + 1;
                match index.get(name) {
                    Some(&a) => s.set(a, true),
                    None => return cx.err(no, col, format!("unknown-atom: {name}")),
                }
            }
        }
        if policy.rules.contains_key(&s) {
            return cx.err(no, 1, "duplicate-state: two rules for the same state");
        }
        policy.insert(s, action);
    }
    if !header && !text.trim().is_empty() {
        return cx.err(1, 1, "syntax: missing `policy <model-name>` header");
    }
    Ok(policy)
}

/// Empty text parses to the empty policy.
pub fn parse_policy(text: &str, model: &dyn PolicyModel) -> ParseResult<Policy> {
    parse_policy_with(text, model, &ParseOptions::default())
}

pub fn emit_policy(p: &Policy, model: &dyn PolicyModel) -> String {
    let universe = model.atom_universe();
    let mut out = format!("policy {}\n", model.model_name());
    for (s, a) in &p.rules {
        let atoms: Vec<&str> = s.true_atoms().into_iter().map(|i| universe[i].as_str()).collect();
        if atoms.is_empty() {
            out.push_str(&format!("=> {a}\n"));
        } else {
            out.push_str(&format!("{} => {a}\n", atoms.join(", ")));
        }
    }
    out
}

/// Reversible mapping of arbitrary names into PDDL identifiers: a leading `q`,
/// then `[a-z0-9-]` kept and every other byte written as `_hh`.
pub fn pddl_name(s: &str) -> String {
    let mut out = String::from("q");
    for b in s.bytes() {
        if b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("_{b:02x}"));
        }
    }
    out
}

/// Inverse of [`pddl_name`].
pub fn pddl_unname(s: &str) -> Option<String> {
    let body = s.strip_prefix('q')?.as_bytes();
    let mut bytes = Vec::new();
    let mut i = 0;
    while i < body.len() {
        if body[i] == b'_' {
            let h = std::str::from_utf8(body.get(i + 1..i + 3)?).ok()?;
            bytes.push(u8::from_str_radix(h, 16).ok()?);
            i += 3;
        } else {
            bytes.push(body[i]);
            i += 1;
        }
    }
    String::from_utf8(bytes).ok()
}

fn pddl_conj(p: &TaggedFond, lits: &[AtomLit]) -> String {
    let parts: Vec<String> = lits
        .iter()
        .map(|l| {
            let a = format!("({})", pddl_name(&p.atoms[l.atom]));
            if l.value {
                a
            } else {
                format!("(not {a})")
            }
        })
        .collect();
    if parts.is_empty() {
        "(and)".to_string()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

/// Grounded PDDL domain and problem with `oneof` effects and no conditional effects.
pub fn emit_pddl(p: &TaggedFond) -> (String, String) {
    let dname = pddl_name(&p.name);
    let mut d = String::new();
    d.push_str(&format!("(define (domain {dname})\n"));
    d.push_str("  (:requirements :strips :negative-preconditions :non-deterministic)\n");
    let preds: Vec<String> = p.atoms.iter().map(|a| format!("({})", pddl_name(a))).collect();
    d.push_str(&format!("  (:predicates {})\n", preds.join(" ")));
    for a in &p.actions {
        d.push_str(&format!("  (:action {}\n", pddl_name(&a.name)));
        d.push_str("    :parameters ()\n");
        d.push_str(&format!("    :precondition {}\n", pddl_conj(p, &a.pre)));
        let mut parts: Vec<String> = Vec::new();
        for l in &a.det {
            let at = format!("({})", pddl_name(&p.atoms[l.atom]));
            parts.push(if l.value { at } else { format!("(not {at})") });
        }
        for e in &a.ndets {
            let outs: Vec<String> = e.outcomes.iter().map(|o| pddl_conj(p, o)).collect();
            parts.push(format!("(oneof {})", outs.join(" ")));
        }
        if parts.is_empty() {
            d.push_str("    :effect (and))\n");
        } else {
            d.push_str(&format!("    :effect (and {}))\n", parts.join(" ")));
        }
    }
    d.push_str(")\n");
    let mut pr = String::new();
    pr.push_str(&format!("(define (problem {dname}-problem)\n"));
    pr.push_str(&format!("  (:domain {dname})\n"));
    let init: Vec<String> = p.init.iter().map(|&i| format!("({})", pddl_name(&p.atoms[i]))).collect();
    pr.push_str(&format!("  (:init {})\n", init.join(" ")).replace("(:init )", "(:init)"));
    pr.push_str(&format!("  (:goal {}))\n", pddl_conj(p, &p.goal)));
    (d, pr)
}

/// Policy rules grouped by their action name, handy for reports.
pub fn policy_by_action(p: &Policy) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for a in p.rules.values() {
        *m.entry(a.clone()).or_insert(0) += 1;
    }
    m
}
