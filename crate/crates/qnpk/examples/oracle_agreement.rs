//! Random QNPs: the full pipeline and the brute-force oracle should agree
//! on solvability.

use qnpk::gen::{random_qnp, QnpShape};
use qnpk::qnp2fond::{solve_qnp_full, PipelineOptions};
use qnpk::solver::oracle_solve_qnp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agree, mut solvable) = (0, 0);
    let n = 50;
    for _ in 0..n {
        let q = random_qnp(&mut rng, &QnpShape::default());
        let full = solve_qnp_full(&q, &PipelineOptions::default()).is_ok();
        let oracle = oracle_solve_qnp(&q).is_ok();
        agree += usize::from(full == oracle);
        solvable += usize::from(oracle);
    }
    println!("{agree}/{n} agree, {solvable} solvable");
}
