//! Run Sieve on the bundled policies and print which variables prove termination.

use qnpk::direct::t_direct;
use qnpk::fixtures;
use qnpk::sieve::{build_policy_graph, run_sieve, SieveMode};

fn main() {
    for (name, _, _) in fixtures::QNPS {
        let (q, pi) = fixtures::qnp(name);
        let g = build_policy_graph(&t_direct(&q), &pi);
        let trace = run_sieve(&g, SieveMode::StopWhenAcyclic);
        println!("{name:8} {:?} order={:?}", trace.verdict, trace.variable_order());
    }

    // The full trace for the nested loop: X is removed first, then Y.
    let (q, pi) = fixtures::qnp("nest");
    let g = build_policy_graph(&t_direct(&q), &pi);
    print!("{}", run_sieve(&g, SieveMode::Exhaustive).render(&g));
}
