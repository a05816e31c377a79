//! Run epsilon-bounded rollouts against each adversary.

use qnpk::fixtures;
use qnpk::sim::{derive_step_cap, simulate, Adversary, Agent, Outcome, SimConfig};

fn main() {
    for (name, _, _) in fixtures::QNPS {
        let (q, pi) = fixtures::qnp(name);
        for adversary in [Adversary::Random, Adversary::MinStep, Adversary::ZeroJump] {
            let cfg = SimConfig { epsilon: 0.5, adversary, runs: 50, max_steps: 20_000, seed: 1, ..Default::default() };
            let runs = simulate(&q, Agent::Policy(&pi), &cfg).expect("simulation");
            let goals = runs.iter().filter(|r| r.outcome == Outcome::Goal).count();
            let longest = runs.iter().map(|r| r.steps).max().unwrap_or(0);
            println!(
                "{name:8} {adversary:9} goal {goals:3}/{}  longest {longest:6}  cap {:?}",
                runs.len(),
                derive_step_cap(&q, &pi, &cfg)
            );
        }
    }
}
