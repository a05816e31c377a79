//! Policy graphs, strongly connected components and the Sieve termination test.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{AbstractState, Policy, TaggedFond};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    Goal,
    /// Policy action index into the FOND problem.
    Expanded(usize),
    /// The policy has no rule for this state.
    Open,
    /// The policy names an action that is not applicable (or does not exist).
    Inapplicable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
}

/// States reachable from the initial state under a policy; edges are labelled
/// by the action of their source node.
#[derive(Clone, Debug)]
pub struct PolicyGraph {
    pub atoms: Vec<String>,
    /// Numeric variables from the tags, in zero-flag order.
    pub vars: Vec<String>,
    pub nodes: Vec<AbstractState>,
    pub status: Vec<NodeStatus>,
    pub labels: Vec<Option<String>>,
    /// Per node: indices into `vars` decremented / incremented by its action.
    pub dec: Vec<Vec<usize>>,
    pub inc: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    pub index: HashMap<AbstractState, usize>,
}

pub fn build_policy_graph(p: &TaggedFond, pi: &Policy) -> PolicyGraph {
    let c = p.compile();
    let vars = p.tag_vars();
    let var_ix: HashMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    let mut g = PolicyGraph {
        atoms: p.atoms.clone(),
        vars: vars.clone(),
        nodes: Vec::new(),
        status: Vec::new(),
        labels: Vec::new(),
        dec: Vec::new(),
        inc: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
    };
    let init = p.init_state();
    g.add_node(init);
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let s = g.nodes[u].clone();
        if c.is_goal(&s) {
            g.status[u] = NodeStatus::Goal;
            continue;
        }
        let Some(name) = pi.get(&s) else {
            continue;
        };
        g.labels[u] = Some(name.to_string());
        let Some(a) = p.action_index(name).filter(|&a| c.applicable(&s, a)) else {
            g.status[u] = NodeStatus::Inapplicable(name.to_string());
            continue;
        };
        g.status[u] = NodeStatus::Expanded(a);
        g.dec[u] = p.actions[a].dec_vars().filter_map(|v| var_ix.get(v).copied()).collect();
        g.inc[u] = p.actions[a].inc_vars().filter_map(|v| var_ix.get(v).copied()).collect();
        for t in c.successors(&s, a) {
            let v = match g.index.get(&t) {
                Some(&v) => v,
                None => {
                    let v = g.add_node(t);
                    queue.push_back(v);
                    v
                }
            };
            g.edges.push(Edge { src: u, dst: v });
        }
    }
    g
}

impl PolicyGraph {
    fn add_node(&mut self, s: AbstractState) -> usize {
        let i = self.nodes.len();
        self.index.insert(s.clone(), i);
        self.nodes.push(s);
        self.status.push(NodeStatus::Open);
        self.labels.push(None);
        self.dec.push(Vec::new());
        self.inc.push(Vec::new());
        i
    }

    /// Abstract graph for tests: node `i` decrements `dec[i]` and increments `inc[i]`.
    pub fn synthetic(vars: Vec<String>, dec: Vec<Vec<usize>>, inc: Vec<Vec<usize>>, edges: Vec<(usize, usize)>) -> Self {
        let n = dec.len();
        let width = usize::BITS as usize - n.leading_zeros() as usize;
        let nodes: Vec<AbstractState> =
            (0..n).map(|i| AbstractState::from_bits(&(0..width.max(1)).map(|b| i >> b & 1 == 1).collect::<Vec<_>>())).collect();
        PolicyGraph {
            atoms: (0..width.max(1)).map(|b| format!("b{b}")).collect(),
            vars,
            index: nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect(),
            nodes,
            status: (0..n).map(|_| NodeStatus::Expanded(0)).collect(),
            labels: (0..n).map(|i| Some(format!("a{i}"))).collect(),
            dec,
            inc,
            edges: edges.into_iter().map(|(src, dst)| Edge { src, dst }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn render_node(&self, u: usize) -> String {
        self.nodes[u].render(&self.atoms)
    }

    fn adjacency(&self, alive: &[bool]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (k, e) in self.edges.iter().enumerate() {
            if alive[k] {
                adj[e.src].push(e.dst);
            }
        }
        adj
    }

    pub fn is_acyclic(&self) -> bool {
        let alive = vec![true; self.edges.len()];
        let scc = tarjan_scc(self.nodes.len(), &self.adjacency(&alive));
        !scc.has_cycle(&self.edges, &alive)
    }
}

/// SCC partition with components numbered in topological order: an edge from
/// component `i` to a different component `j` implies `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sccs {
    pub comp: Vec<usize>,
    pub count: usize,
}

impl Sccs {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.count];
        for (u, &c) in self.comp.iter().enumerate() {
            m[c].push(u);
        }
        m
    }

    /// Components that contain at least one edge (size > 1 or a self-loop).
    pub fn cyclic(&self, edges: &[Edge], alive: &[bool]) -> Vec<bool> {
        let mut cyc = vec![false; self.count];
        for (k, e) in edges.iter().enumerate() {
            if alive[k] && self.comp[e.src] == self.comp[e.dst] {
                cyc[self.comp[e.src]] = true;
            }
        }
        cyc
    }

    fn has_cycle(&self, edges: &[Edge], alive: &[bool]) -> bool {
        self.cyclic(edges, alive).into_iter().any(|c| c)
    }
}

/// Iterative Tarjan over an adjacency list.
pub fn tarjan_scc(n: usize, adj: &[Vec<usize>]) -> Sccs {
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSET; n];
    let mut count = 0;
    let mut next = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut k)) = call.last_mut() {
            if *k < adj[u].len() {
                let v = adj[u][*k];
                *k += 1;
                if index[v] == UNSET {
                    index[v] = next;
                    low[v] = next;
                    next += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == u {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    // Renumber topologically; among ready components the one holding the
    // smallest node index goes first, so numbering follows discovery order.
    let mut least = vec![usize::MAX; count];
    for (u, &c) in comp.iter().enumerate() {
        least[c] = least[c].min(u);
    }
    let mut indeg = vec![0usize; count];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); count];
    for u in 0..n {
        for &v in &adj[u] {
            if comp[u] != comp[v] {
                out[comp[u]].push(comp[v]);
                indeg[comp[v]] += 1;
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> =
        (0..count).filter(|&c| indeg[c] == 0).map(|c| Reverse((least[c], c))).collect();
    let mut rank = vec![0; count];
    let mut next_rank = 0;
    while let Some(Reverse((_, c))) = ready.pop() {
        rank[c] = next_rank;
        next_rank += 1;
        for &d in &out[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(Reverse((least[d], d)));
            }
        }
    }
    for c in comp.iter_mut() {
        *c = rank[*c];
    }
    Sccs { comp, count }
}

pub fn graph_sccs(g: &PolicyGraph) -> Sccs {
    tarjan_scc(g.nodes.len(), &g.adjacency(&vec![true; g.edges.len()]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SieveMode {
    /// Stop as soon as the graph is acyclic.
    StopWhenAcyclic,
    /// Keep going until every decremented variable has been chosen somewhere;
    /// this is what the stack annotations need.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Terminating,
    NonTerminating,
}

#[derive(Clone, Debug)]
pub struct SieveStep {
    pub scc: usize,
    pub var: String,
    pub members: Vec<usize>,
    pub removed: Vec<Edge>,
}

#[derive(Clone, Debug)]
pub struct SieveTrace {
    pub steps: Vec<SieveStep>,
    pub verdict: Verdict,
    /// Edge liveness after the run, parallel to `PolicyGraph::edges`.
    pub alive: Vec<bool>,
    /// Per node, the variables chosen for the components containing it.
    pub stacks: Vec<Vec<usize>>,
}

impl SieveTrace {
    pub fn variable_order(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.var.as_str()).collect()
    }

    pub fn render(&self, g: &PolicyGraph) -> String {
        let mut out = String::new();
        for (k, s) in self.steps.iter().enumerate() {
            let edges: Vec<String> = s
                .removed
                .iter()
                .map(|e| {
                    format!("{} -{}-> {}", g.render_node(e.src), g.labels[e.src].as_deref().unwrap_or("?"), g.render_node(e.dst))
                })
                .collect();
            out.push_str(&format!(
                "step {}: var {} in scc {}, removed {} edges: {}\n",
                k + 1,
                s.var,
                s.scc,
                s.removed.len(),
                edges.join(", ")
            ));
        }
        out.push_str(&format!("verdict: {}\n", self.verdict));
        out
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Terminating => "terminating",
            Verdict::NonTerminating => "non-terminating",
        })
    }
}

pub fn run_sieve(g: &PolicyGraph, mode: SieveMode) -> SieveTrace {
    run_sieve_seeded(g, mode, None)
}

/// Sieve with an optional seed that randomizes the choice among eligible
/// (component, variable) pairs. Without a seed the scan order is
/// (topological component index, variable order).
pub fn run_sieve_seeded(g: &PolicyGraph, mode: SieveMode, seed: Option<u64>) -> SieveTrace {
    let n = g.nodes.len();
    let mut alive = vec![true; g.edges.len()];
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut steps = Vec::new();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    loop {
        let scc = tarjan_scc(n, &g.adjacency(&alive));
        let cyclic = scc.cyclic(&g.edges, &alive);
        if mode == SieveMode::StopWhenAcyclic && !cyclic.iter().any(|&c| c) {
            break;
        }
        let members = scc.members();
        let mut eligible: Vec<(usize, usize)> = Vec::new();
        for (c, mem) in members.iter().enumerate() {
            if mode == SieveMode::StopWhenAcyclic && !cyclic[c] {
                continue;
            }
            let stack = &stacks[mem[0]];
            for x in 0..g.vars.len() {
                let decremented = mem.iter().any(|&u| g.dec[u].contains(&x));
                let incremented = mem.iter().any(|&u| g.inc[u].contains(&x));
                if decremented && !incremented && !stack.contains(&x) {
                    eligible.push((c, x));
                }
            }
        }
        let Some(&(c, x)) = (match rng.as_mut() {
            Some(r) => eligible.choose(r),
            None => eligible.first(),
        }) else {
            break;
        };
        let mem = &members[c];
        let mut removed = Vec::new();
        for (k, e) in g.edges.iter().enumerate() {
            if alive[k] && scc.comp[e.src] == c && scc.comp[e.dst] == c && g.dec[e.src].contains(&x) {
                alive[k] = false;
                removed.push(*e);
            }
        }
        for &u in mem {
            stacks[u].push(x);
        }
        steps.push(SieveStep { scc: c, var: g.vars[x].clone(), members: mem.clone(), removed });
    }
    let residual = tarjan_scc(n, &g.adjacency(&alive));
    let verdict = if residual.has_cycle(&g.edges, &alive) { Verdict::NonTerminating } else { Verdict::Terminating };
    SieveTrace { steps, verdict, alive, stacks }
}

/// Per-state data used by the policy lifting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackAnnotation {
    /// State -> (topological index of its top-level component, variable stack).
    pub entries: BTreeMap<AbstractState, (usize, Vec<String>)>,
    pub num_sccs: usize,
}

impl StackAnnotation {
    pub fn scc(&self, s: &AbstractState) -> Option<usize> {
        self.entries.get(s).map(|e| e.0)
    }
    pub fn stack(&self, s: &AbstractState) -> Option<&[String]> {
        self.entries.get(s).map(|e| e.1.as_slice())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SieveError {
    #[error("policy graph is not terminating; no stack annotation exists")]
    NonTerminating,
}

pub fn compute_annotations(g: &PolicyGraph) -> Result<StackAnnotation, SieveError> {
    let trace = run_sieve(g, SieveMode::Exhaustive);
    if trace.verdict != Verdict::Terminating {
        return Err(SieveError::NonTerminating);
    }
    let top = graph_sccs(g);
    let entries = g
        .nodes
        .iter()
        .enumerate()
        .map(|(u, s)| (s.clone(), (top.comp[u], trace.stacks[u].iter().map(|&x| g.vars[x].clone()).collect())))
        .collect();
    Ok(StackAnnotation { entries, num_sccs: top.count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::t_direct;
    use crate::io::{parse_policy, parse_qnp};

    const NEST: &str = "qnp nest\nnums X Y\naction a\npre X>0 Y=0\neff X-- Y++\naction b\npre Y>0\neff Y--\ninit X>0 Y>0\ngoal X=0\n";

    fn nest_graph() -> PolicyGraph {
        let q = parse_qnp(NEST).unwrap();
        let p = t_direct(&q);
        let pi = parse_policy("policy nest\n=> b\nY=0 => a\n", &q).unwrap();
        build_policy_graph(&p, &pi)
    }

    #[test]
    fn nest_graph_shape() {
        let g = nest_graph();
        assert_eq!(g.len(), 3);
        let scc = graph_sccs(&g);
        assert_eq!(scc.count, 2);
        assert_eq!(scc.comp[0], 0);
    }

    #[test]
    fn nest_sieve_order() {
        let g = nest_graph();
        let t = run_sieve(&g, SieveMode::StopWhenAcyclic);
        assert_eq!(t.verdict, Verdict::Terminating);
        assert_eq!(t.variable_order(), vec!["X", "Y"]);
        let text = t.render(&g);
        assert!(text.starts_with("step 1: var X"));
        assert!(text.ends_with("verdict: terminating\n"));
    }

    #[test]
    fn nest_annotations() {
        let g = nest_graph();
        let ann = compute_annotations(&g).unwrap();
        let s0 = &g.nodes[0];
        assert_eq!(ann.stack(s0).unwrap(), ["X", "Y"]);
        // {X>0, Y=0} applies a, which increments Y, so Y is never chosen there.
        let s1 = g.nodes.iter().find(|s| s.get(1) && !s.get(0)).unwrap();
        assert_eq!(ann.stack(s1).unwrap(), ["X"]);
        assert_eq!(ann.scc(s0), ann.scc(s1));
    }

    #[test]
    fn empty_policy_graph() {
        let q = parse_qnp(NEST).unwrap();
        let g = build_policy_graph(&t_direct(&q), &Policy::new());
        assert_eq!(g.len(), 1);
        assert_eq!(g.status[0], NodeStatus::Open);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn tarjan_basics() {
        let chain = tarjan_scc(3, &[vec![1], vec![2], vec![]]);
        assert_eq!(chain.count, 3);
        assert_eq!(chain.comp, vec![0, 1, 2]);
        let cycle = tarjan_scc(2, &[vec![1], vec![0]]);
        assert_eq!(cycle.count, 1);
    }

    #[test]
    fn inc_and_dec_in_one_component_does_not_terminate() {
        let g = PolicyGraph::synthetic(vec!["X".into()], vec![vec![0], vec![]], vec![vec![], vec![0]], vec![(0, 1), (1, 0)]);
        let t = run_sieve(&g, SieveMode::StopWhenAcyclic);
        assert_eq!(t.verdict, Verdict::NonTerminating);
        assert!(t.steps.is_empty());
    }
}
