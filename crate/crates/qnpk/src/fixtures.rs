//! Bundled example models and their reference policies.

use crate::io::{parse_fond, parse_policy, parse_qnp};
use crate::model::{Policy, Qnp, TaggedFond};

pub const CLEAR_QNP: &str = include_str!("../fixtures/clear.qnp");
pub const CLEAR_POL: &str = include_str!("../fixtures/clear.pol");
pub const NEST_QNP: &str = include_str!("../fixtures/nest.qnp");
pub const NEST_POL: &str = include_str!("../fixtures/nest.pol");
pub const LOOPBUG_QNP: &str = include_str!("../fixtures/loopbug.qnp");
pub const LOOPBUG_POL: &str = include_str!("../fixtures/loopbug.pol");
pub const ON_QNP: &str = include_str!("../fixtures/on.qnp");
pub const ON_POL: &str = include_str!("../fixtures/on.pol");
pub const GRIPPER_QNP: &str = include_str!("../fixtures/gripper.qnp");
pub const GRIPPER_POL: &str = include_str!("../fixtures/gripper.pol");
pub const COIN_FOND: &str = include_str!("../fixtures/coin.fond");

/// (name, model text, reference policy text) for every bundled QNP.
pub const QNPS: [(&str, &str, &str); 5] = [
    ("clear", CLEAR_QNP, CLEAR_POL),
    ("nest", NEST_QNP, NEST_POL),
    ("loopbug", LOOPBUG_QNP, LOOPBUG_POL),
    ("on", ON_QNP, ON_POL),
    ("gripper", GRIPPER_QNP, GRIPPER_POL),
];

/// Parses a bundled QNP and its reference policy.
///
/// # Panics
/// Panics if `name` is not a bundled fixture.
pub fn qnp(name: &str) -> (Qnp, Policy) {
    let (_, q, p) = QNPS.iter().find(|f| f.0 == name).unwrap_or_else(|| panic!("no fixture `{name}`"));
    let q = parse_qnp(q).expect("bundled fixture parses");
    let pi = parse_policy(p, &q).expect("bundled policy parses");
    (q, pi)
}

pub fn coin() -> TaggedFond {
    parse_fond(COIN_FOND).expect("bundled fixture parses")
}
