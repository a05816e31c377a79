//! Print the PDDL domain and problem for the translation of CLEAR.

use qnpk::fixtures;
use qnpk::io::emit_pddl;
use qnpk::qnp2fond::{analyze_variables, translate, AnalyzeOptions};

fn main() {
    let (q, _) = fixtures::qnp("clear");
    let layout = analyze_variables(&q, &AnalyzeOptions::default()).expect("layout");
    let (domain, problem) = emit_pddl(&translate(&q, &layout).expect("translation").fond);
    println!("{domain}\n{problem}");
}
