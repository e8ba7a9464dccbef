//! Small built-in markets used by the test suites, the CLI and the scripted scenarios.

use crate::model::{Market, RandomAssignment};
use crate::rational::{int, ratio, Rational};

fn market(
    names: &[&str],
    lower: Vec<Rational>,
    upper: Vec<Option<Rational>>,
    rankings: &[&[&str]],
) -> Market {
    Market::from_names(names, lower, upper, rankings).expect("built-in market is valid")
}

const NO_QUOTA_PREFS: [&[&str]; 4] = [
    &["a", "b", "c"],
    &["a", "c", "b"],
    &["b", "a", "c"],
    &["b", "a", "c"],
];

/// Four students, three projects, no quotas. Every student can get her top choice.
pub fn no_quota_market() -> Market {
    market(
        &["a", "b", "c"],
        vec![int(0); 3],
        vec![None; 3],
        &NO_QUOTA_PREFS,
    )
}

/// The same students as [`no_quota_market`] with `l(b) = 2`, `l(c) = 1`.
pub fn lower_quota_market() -> Market {
    market(
        &["a", "b", "c"],
        vec![int(0), int(2), int(1)],
        vec![None; 3],
        &NO_QUOTA_PREFS,
    )
}

/// Five students; `l = (1,1,2)`, `u = (2,2,2)`. The reserve constraint binds at `t = 3/4`.
pub fn critical_time_market() -> Market {
    market(
        &["a", "b", "c"],
        vec![int(1), int(1), int(2)],
        vec![Some(int(2)); 3],
        &[
            &["a", "b", "c"],
            &["a", "b", "c"],
            &["b", "a", "c"],
            &["b", "a", "c"],
            &["c", "a", "b"],
        ],
    )
}

/// Six students, `l(b) = l(c) = 2`: the random priority lottery is ordinally inefficient here.
pub fn priority_inefficiency_market() -> Market {
    let top_a: &[&str] = &["a", "b", "c", "d"];
    let top_b: &[&str] = &["b", "a", "d", "c"];
    market(
        &["a", "b", "c", "d"],
        vec![int(0), int(2), int(2), int(0)],
        vec![None; 4],
        &[top_a, top_a, top_a, top_b, top_b, top_b],
    )
}

/// Two students, `l(b) = u(b) = 1`: acyclic and non-wasteful yet inefficient assignments exist.
pub fn chain_market() -> Market {
    market(
        &["a", "b", "c"],
        vec![int(0), int(1), int(0)],
        vec![None, Some(int(1)), None],
        &[&["a", "b", "c"], &["b", "c", "a"]],
    )
}

/// The ordinally inefficient assignment on [`chain_market`] fixed by a wasteful chain.
pub fn chain_market_assignment() -> RandomAssignment {
    RandomAssignment::new(vec![
        vec![ratio(1, 2), ratio(1, 2), int(0)],
        vec![int(0), ratio(1, 2), ratio(1, 2)],
    ])
    .expect("rectangular")
}

/// Two students, `l(b) = u(b) = l(c) = u(c) = 2/3`, `a` unbounded.
pub fn fractional_quota_market() -> Market {
    market(
        &["a", "b", "c"],
        vec![int(0), ratio(2, 3), ratio(2, 3)],
        vec![None, Some(ratio(2, 3)), Some(ratio(2, 3))],
        &[&["a", "b", "c"], &["b", "c", "a"]],
    )
}
