//! The `qnpk` command line.
//!
//! Exit codes: 0 ok, 1 validation violations, 2 I/O, syntax or resource
//! errors, 3 unsolvable or rejected.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::direct::t_direct;
use crate::fond2qnp::{normalize_fond, reduce_with, ExitGMode, ReduceOptions};
use crate::io::{
    emit_fond, emit_pddl, emit_policy, emit_qnp, parse_fond_unchecked, parse_fond_with, parse_policy_with, parse_qnp_unchecked,
    parse_qnp_with, ParseOptions,
};
use crate::model::{validate_fond, validate_qnp, Policy, Qnp, TaggedFond};
use crate::qnp2fond::{analyze_variables, project_full_policy, solve_qnp_full, translate, AnalyzeOptions, Force, PipelineOptions};
use crate::sieve::{build_policy_graph, run_sieve, SieveMode};
use crate::sim::{derive_step_cap, simulate, trace_tsv, Adversary, Agent, Outcome, SimConfig};
use crate::solver::{
    oracle_solve_qnp_capped, solve_strong_cyclic_with, solve_strong_with, verify_qnp_policy, verify_strong_cyclic, SolveError,
    SolverConfig, DEFAULT_ORACLE_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qnpk", version, about = "Qualitative numerical planning toolkit")]
pub struct Cli {
    /// Print one JSON report on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Accept reserved `__` names, as produced by `reduce`.
    #[arg(long, global = true)]
    pub generated: bool,
    /// Solver node budget (default: QNPK_NODE_BUDGET or 1000000).
    #[arg(long, global = true)]
    pub node_budget: Option<usize>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Direct,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Solutions {
    StrongCyclic,
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExitG {
    Faithful,
    Repaired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Via {
    Full,
    Oracle,
}

#[derive(clap::Args, Debug, Clone)]
pub struct TranslateFlags {
    /// Counter capacity (default 1 + 2^n; `solve-qnp` searches upward when unset).
    #[arg(long)]
    pub max: Option<u128>,
    /// Treat well-ordered variables as direct.
    #[arg(long)]
    pub well_ordered: bool,
    /// Stack every numeric variable.
    #[arg(long)]
    pub force_full: bool,
}

impl TranslateFlags {
    fn analyze(&self, mode: Mode) -> AnalyzeOptions {
        let force = match mode {
            Mode::Direct => Force::AllDirect,
            Mode::Full => Force::AllStacked,
            Mode::Auto if self.force_full => Force::AllStacked,
            Mode::Auto => Force::None,
        };
        AnalyzeOptions { force, well_ordered: self.well_ordered, max: self.max }
    }
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Parse and validate a .qnp or .fond file.
    Validate { path: PathBuf },
    /// Translate a QNP into a FOND problem.
    Translate {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[command(flatten)]
        flags: TranslateFlags,
        /// Also write `<name>-domain.pddl` and `<name>-problem.pddl` next to the output.
        #[arg(long)]
        pddl: bool,
    },
    /// Reduce a FOND problem to a QNP.
    Reduce {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "strong-cyclic")]
        solutions: Solutions,
        #[arg(long, value_enum, default_value = "repaired")]
        exitg: ExitG,
        /// Outcome `action:index` (1-based) to treat as unfair; repeatable.
        #[arg(long, value_parser = parse_unfair)]
        unfair: Vec<(String, usize)>,
    },
    /// Solve a FOND problem.
    Solve {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Require a strong (acyclic) solution.
        #[arg(long)]
        strong: bool,
    },
    /// Solve a QNP through the full translation or the brute-force oracle.
    SolveQnp {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        via: Via,
        #[command(flatten)]
        flags: TranslateFlags,
        /// Largest QNP (atoms) the oracle accepts.
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
    },
    /// Check a policy against a .qnp or .fond model.
    Verify {
        model: PathBuf,
        policy: PathBuf,
        /// Print the Sieve trace of the policy graph (QNP models).
        #[arg(long)]
        sieve_trace: bool,
        /// Run Sieve over every component, not only until acyclic.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Run ε-bounded rollouts of a QNP policy.
    Simulate {
        model: PathBuf,
        policy: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value = "random", value_parser = parse_adversary)]
        adversary: Adversary,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 10.0)]
        init_high: f64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Write the first rollout as tab-separated text to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// The policy is a controller over the full translation.
        #[arg(long)]
        controller: bool,
        #[command(flatten)]
        flags: TranslateFlags,
    },
}

fn parse_unfair(s: &str) -> Result<(String, usize), String> {
    let (a, i) = s.rsplit_once(':').ok_or("expected action:index")?;
    let i: usize = i.parse().map_err(|_| format!("bad outcome index `{i}`"))?;
    Ok((a.to_string(), i))
}

fn parse_adversary(s: &str) -> Result<Adversary, String> {
    s.parse()
}

struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn error(msg: impl ToString) -> Self {
        Failure { code: EXIT_ERROR, msg: msg.to_string() }
    }
}

fn solve_failure(e: impl ToString, unsolvable: bool) -> Failure {
    Failure { code: if unsolvable { EXIT_REJECTED } else { EXIT_ERROR }, msg: e.to_string() }
}

/// Collects the textual report and the JSON fields of one command.
struct Report {
    json: bool,
    text: Vec<String>,
    fields: serde_json::Map<String, Value>,
}

impl Report {
    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }
    fn set(&mut self, k: &str, v: impl Into<Value>) {
        self.fields.insert(k.to_string(), v.into());
    }
}

struct Env<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Env<'_> {
    fn opts(&self, path: &Path) -> ParseOptions {
        ParseOptions { file: path.display().to_string(), allow_reserved: self.cli.generated }
    }

    fn read(&self, path: &Path) -> Result<String, Failure> {
        std::fs::read_to_string(path).map_err(|e| Failure::error(format!("{}: {e}", path.display())))
    }

    fn solver(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        if let Some(b) = self.cli.node_budget {
            c.node_budget = b;
        }
        c
    }

    fn qnp(&self, path: &Path) -> Result<Qnp, Failure> {
        parse_qnp_with(&self.read(path)?, &self.opts(path)).map_err(Failure::error)
    }

    fn fond(&self, path: &Path) -> Result<TaggedFond, Failure> {
        parse_fond_with(&self.read(path)?, &self.opts(path)).map_err(Failure::error)
    }

    /// Write an artifact to `out`, or put it in the report when there is no file.
    fn artifact(&mut self, rep: &mut Report, out: &Option<PathBuf>, key: &str, text: &str) -> Result<(), Failure> {
        match out {
            Some(p) => {
                std::fs::write(p, text).map_err(|e| Failure::error(format!("{}: {e}", p.display())))?;
                rep.set(&format!("{key}_path"), p.display().to_string());
            }
            None if rep.json => rep.set(key, text),
            None => write!(self.out, "{text}").map_err(Failure::error)?,
        }
        Ok(())
    }
}

fn kind(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let json = cli.json;
    let mut env = Env { cli: &cli, out, err };
    let mut rep = Report { json, text: Vec::new(), fields: serde_json::Map::new() };
    let result = dispatch(&mut env, &mut rep);
    let code = match &result {
        Ok(c) => *c,
        Err(f) => f.code,
    };
    if let Err(f) = &result {
        rep.set("error", f.msg.clone());
    }
    rep.set("exit", code);
    if json {
        let _ = writeln!(env.out, "{}", Value::Object(rep.fields));
    } else {
        for l in &rep.text {
            let _ = writeln!(env.err, "{l}");
        }
        if let Err(f) = &result {
            let _ = writeln!(env.err, "error: {}", f.msg);
        }
    }
    code
}

fn dispatch(env: &mut Env<'_>, rep: &mut Report) -> Result<i32, Failure> {
    let cli = env.cli;
    match &cli.cmd {
        Cmd::Validate { path } => validate(env, rep, path),
        Cmd::Translate { path, out, mode, flags, pddl } => {
            let q = env.qnp(path)?;
            let fond = if *mode == Mode::Direct {
                rep.line("warning: direct-only solutions require a termination check (verify with Sieve)");
                t_direct(&q)
            } else {
                let layout = analyze_variables(&q, &flags.analyze(*mode)).map_err(Failure::error)?;
                let direct: Vec<String> = layout.treatment.iter().filter(|t| !layout.is_stacked(&t.0)).map(|t| t.0.clone()).collect();
                rep.set("direct", direct.clone());
                rep.set("stacked", layout.stacked.clone());
                if layout.is_degenerate() {
                    rep.line("note: no variable needs a stack; the translation is the direct one");
                } else {
                    let list = |v: &[String]| if v.is_empty() { "-".to_string() } else { v.join(" ") };
                    rep.line(format!("direct: {}  stacked: {}  max={}", list(&direct), list(&layout.stacked), layout.max));
                    rep.set("max", layout.max.to_string());
                }
                translate(&q, &layout).map_err(Failure::error)?.fond
            };
            rep.line(format!("atoms={} actions={}", fond.atoms.len(), fond.actions.len()));
            rep.set("atoms", fond.atoms.len());
            rep.set("actions", fond.actions.len());
            env.artifact(rep, out, "fond", &emit_fond(&fond))?;
            if *pddl {
                let dir = out.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf).unwrap_or_default();
                let (d, p) = emit_pddl(&fond);
                for (suffix, text) in [("domain", d), ("problem", p)] {
                    let f = dir.join(format!("{}-{suffix}.pddl", fond.name));
                    std::fs::write(&f, text).map_err(|e| Failure::error(format!("{}: {e}", f.display())))?;
                    rep.line(format!("wrote {}", f.display()));
                }
            }
            Ok(EXIT_OK)
        }
        Cmd::Reduce { path, out, solutions, exitg, unfair } => {
            let p = normalize_fond(&env.fond(path)?);
            let opts = ReduceOptions {
                mode: if *exitg == ExitG::Faithful { ExitGMode::Faithful } else { ExitGMode::Repaired },
                unfair: unfair.iter().cloned().collect::<BTreeSet<_>>(),
                strong: *solutions == Solutions::Strong,
            };
            let (q, gadget) = reduce_with(&p, &opts).map_err(Failure::error)?;
            rep.line(format!("bools={} nums={} actions={} K={}", q.bools.len(), q.nums.len(), q.actions.len(), gadget.max_k));
            rep.set("bools", q.bools.len());
            rep.set("nums", q.nums.clone());
            rep.set("actions", q.actions.len());
            env.artifact(rep, out, "qnp", &emit_qnp(&q))?;
            Ok(EXIT_OK)
        }
        Cmd::Solve { path, out, strong } => {
            let p = env.fond(path)?;
            let r = if *strong { solve_strong_with(&p, &env.solver()) } else { solve_strong_cyclic_with(&p, &env.solver()) };
            let pi = r.map_err(|e| solve_failure(&e, e.is_unsolvable()))?;
            rep.line(format!("solved: {} rules", pi.len()));
            rep.set("rules", pi.len());
            env.artifact(rep, out, "policy", &emit_policy(&pi, &p))?;
            Ok(EXIT_OK)
        }
        Cmd::SolveQnp { path, out, via, flags, oracle_cap } => {
            let q = env.qnp(path)?;
            match via {
                Via::Oracle => {
                    let pi = oracle_solve_qnp_capped(&q, *oracle_cap).map_err(|e| solve_failure(&e, e.is_unsolvable()))?;
                    rep.line(format!("solved: {} rules", pi.len()));
                    rep.set("rules", pi.len());
                    env.artifact(rep, out, "policy", &emit_policy(&pi, &q))?;
                }
                Via::Full => {
                    let opts = PipelineOptions { analyze: flags.analyze(Mode::Auto), solver: env.solver() };
                    let sol = solve_qnp_full(&q, &opts).map_err(|e| solve_failure(&e, e.is_unsolvable()))?;
                    let tr = &sol.translation;
                    rep.set("max", tr.layout.max.to_string());
                    rep.set("translated_atoms", tr.fond.atoms.len());
                    rep.set("translated_actions", tr.fond.actions.len());
                    let ctrl = project_full_policy(tr, &sol.policy).map_err(Failure::error)?;
                    match ctrl.try_memoryless() {
                        Ok(pi) => {
                            verify_qnp_policy(&q, &pi).map_err(|r| Failure::error(format!("projection failed verification: {r}")))?;
                            rep.line(format!("solved: {} rules (memoryless, max={})", pi.len(), tr.layout.max));
                            rep.set("memoryless", true);
                            rep.set("rules", pi.len());
                            env.artifact(rep, out, "policy", &emit_policy(&pi, &q))?;
                        }
                        Err(refusal) => {
                            rep.line(format!(
                                "note: no memoryless projection ({} conflicting states); writing the controller over the translation with max={}",
                                refusal.conflicts.len(),
                                tr.layout.max
                            ));
                            rep.set("memoryless", false);
                            rep.set("conflicts", refusal.conflicts.iter().map(|(s, _)| s.render(ctrl.base_atoms())).collect::<Vec<_>>());
                            rep.set("rules", sol.policy.len());
                            env.artifact(rep, out, "policy", &emit_policy(&sol.policy, &tr.fond))?;
                        }
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Cmd::Verify { model, policy, sieve_trace, exhaustive } => {
            let text = env.read(policy)?;
            match kind(model) {
                Some("qnp") => {
                    let q = env.qnp(model)?;
                    let pi = parse_policy_with(&text, &q, &env.opts(policy)).map_err(Failure::error)?;
                    if *sieve_trace {
                        let g = build_policy_graph(&t_direct(&q), &pi);
                        let mode = if *exhaustive { SieveMode::Exhaustive } else { SieveMode::StopWhenAcyclic };
                        let trace = run_sieve(&g, mode);
                        rep.set("sieve_order", trace.variable_order().iter().map(|s| s.to_string()).collect::<Vec<_>>());
                        let rendered = trace.render(&g);
                        rep.set("sieve_trace", rendered.clone());
                        rep.text.extend(rendered.lines().map(String::from));
                    }
                    finish_verify(rep, verify_qnp_policy(&q, &pi))
                }
                Some("fond") => {
                    let p = env.fond(model)?;
                    let pi = parse_policy_with(&text, &p, &env.opts(policy)).map_err(Failure::error)?;
                    finish_verify(rep, verify_strong_cyclic(&p, &pi))
                }
                _ => Err(Failure::error(format!("{}: unknown extension (expected .qnp or .fond)", model.display()))),
            }
        }
        Cmd::Simulate { model, policy, epsilon, adversary, seed, max_steps, init_high, runs, trace, controller, flags } => {
            let q = env.qnp(model)?;
            let text = env.read(policy)?;
            let cfg = SimConfig {
                epsilon: *epsilon,
                adversary: *adversary,
                seed: *seed,
                max_steps: *max_steps,
                init_high: *init_high,
                runs: *runs,
                trace: trace.is_some(),
            };
            let (results, cap) = if *controller {
                let layout = analyze_variables(&q, &flags.analyze(Mode::Auto)).map_err(Failure::error)?;
                let tr = translate(&q, &layout).map_err(Failure::error)?;
                let opts = ParseOptions { allow_reserved: true, ..env.opts(policy) };
                let pi: Policy = parse_policy_with(&text, &tr.fond, &opts).map_err(Failure::error)?;
                let ctrl = project_full_policy(&tr, &pi).map_err(Failure::error)?;
                (simulate(&q, Agent::Controller(&ctrl), &cfg).map_err(Failure::error)?, None)
            } else {
                let pi = parse_policy_with(&text, &q, &env.opts(policy)).map_err(Failure::error)?;
                (simulate(&q, Agent::Policy(&pi), &cfg).map_err(Failure::error)?, derive_step_cap(&q, &pi, &cfg))
            };
            let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count();
            let (goal, dead, capped) = (count(Outcome::Goal), count(Outcome::DeadEnd), count(Outcome::StepCap));
            let longest = results.iter().map(|r| r.steps).max().unwrap_or(0);
            rep.line(format!("runs={} goal={goal} dead-end={dead} step-cap={capped} longest={longest}", results.len()));
            match cap {
                Some(c) => rep.line(format!("derived step cap: {c}")),
                None => rep.line("derived step cap: none"),
            }
            if let Some(d) = results.iter().find_map(|r| r.diagnostic.clone()) {
                rep.line(format!("first dead end: {d}"));
            }
            rep.set("goal", goal);
            rep.set("dead_end", dead);
            rep.set("step_cap", capped);
            rep.set("longest", longest);
            rep.set("derived_cap", cap);
            rep.set("rng", crate::sim::RNG_ALGORITHM);
            if let (Some(path), Some(rows)) = (trace, results.first().and_then(|r| r.trace.as_ref())) {
                std::fs::write(path, trace_tsv(&q, rows)).map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
            }
            Ok(if goal == results.len() { EXIT_OK } else { EXIT_REJECTED })
        }
    }
}

fn finish_verify(rep: &mut Report, r: Result<(), crate::solver::Rejection>) -> Result<i32, Failure> {
    match r {
        Ok(()) => {
            rep.line("accept");
            rep.set("verdict", "accept");
            Ok(EXIT_OK)
        }
        Err(rej) => {
            rep.line(format!("reject: {rej}"));
            rep.set("verdict", "reject");
            rep.set("reason", rej.reason);
            Ok(EXIT_REJECTED)
        }
    }
}

fn validate(env: &mut Env<'_>, rep: &mut Report, path: &Path) -> Result<i32, Failure> {
    let text = env.read(path)?;
    let opts = env.opts(path);
    let violations = match kind(path) {
        Some("qnp") => validate_qnp(&parse_qnp_unchecked(&text, &opts).map_err(Failure::error)?),
        Some("fond") => validate_fond(&parse_fond_unchecked(&text, &opts).map_err(Failure::error)?),
        _ => return Err(Failure::error(format!("{}: unknown extension (expected .qnp or .fond)", path.display()))),
    };
    for v in &violations {
        rep.line(v.to_string());
    }
    rep.set("violations", violations.iter().map(|v| json!({"code": v.code, "subject": v.subject, "detail": v.detail})).collect::<Vec<_>>());
    if violations.is_empty() {
        rep.line("ok");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VIOLATIONS)
    }
}

impl From<&SolveError> for Failure {
    fn from(e: &SolveError) -> Self {
        solve_failure(e, e.is_unsolvable())
    }
}
