//! Compare the direct translation with the stacked one.

use qnpk::direct::t_direct;
use qnpk::fixtures;
use qnpk::io::emit_fond;
use qnpk::qnp2fond::{analyze_variables, translate, AnalyzeOptions, Force};

fn main() {
    for (name, _, _) in fixtures::QNPS {
        let (q, _) = fixtures::qnp(name);
        let direct = t_direct(&q);
        let layout = analyze_variables(&q, &AnalyzeOptions::default()).expect("layout");
        let full = translate(&q, &layout).expect("translation");
        println!(
            "{name:8} direct {}/{}  stacked={:?} D={} max={}  full {}/{}",
            direct.atoms.len(),
            direct.actions.len(),
            layout.stacked,
            layout.depth,
            layout.max,
            full.fond.atoms.len(),
            full.fond.actions.len(),
        );
    }

    // A small instance with every variable on the stack and a tiny counter.
    let (q, _) = fixtures::qnp("nest");
    let opts = AnalyzeOptions { force: Force::AllStacked, max: Some(2), ..Default::default() };
    let layout = analyze_variables(&q, &opts).expect("layout");
    print!("{}", emit_fond(&translate(&q, &layout).expect("translation").fond));
}
