//! Solve GRIPPER through the full translation and project the result
//! back to a memoryless QNP policy.

use qnpk::fixtures;
use qnpk::io::emit_policy;
use qnpk::qnp2fond::{project_full_policy, solve_qnp_full, PipelineOptions};
use qnpk::solver::verify_qnp_policy;

fn main() {
    let (q, reference) = fixtures::qnp("gripper");
    let sol = solve_qnp_full(&q, &PipelineOptions::default()).expect("gripper is solvable");
    let tr = &sol.translation;
    println!(
        "solved T(Q) with max={}: {} atoms, {} actions, {} rules",
        tr.layout.max,
        tr.fond.atoms.len(),
        tr.fond.actions.len(),
        sol.policy.len()
    );

    let ctrl = project_full_policy(tr, &sol.policy).expect("controller");
    match ctrl.try_memoryless() {
        Ok(pi) => {
            verify_qnp_policy(&q, &pi).expect("projection verifies");
            println!("memoryless projection (same as reference: {}):", pi == reference);
            print!("{}", emit_policy(&pi, &q));
        }
        Err(r) => println!("controller needs memory in {} states", r.conflicts.len()),
    }
}
