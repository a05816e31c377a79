//! Reduce a FOND problem to a QNP, solve the QNP, and carry the policy back.

use qnpk::fixtures;
use qnpk::fond2qnp::{normalize_fond, reduce_r, transfer_policies, Direction, ExitGMode};
use qnpk::io::{emit_policy, emit_qnp};
use qnpk::solver::{solve_strong_cyclic, verify_strong_cyclic};

fn main() {
    let p = normalize_fond(&fixtures::coin());
    let q = reduce_r(&p, ExitGMode::Repaired).expect("reduction");
    print!("{}", emit_qnp(&q));

    let pi = solve_strong_cyclic(&p).expect("coin is solvable");
    let on_q = transfer_policies(&p, &q, &pi, Direction::PToQ).expect("P to Q");
    println!("-- transferred to R(P): {} rules", on_q.len());
    let back = transfer_policies(&p, &q, &on_q, Direction::QToP).expect("Q to P");
    verify_strong_cyclic(&p, &back).expect("round trip verifies");
    print!("{}", emit_policy(&back, &p));
}
