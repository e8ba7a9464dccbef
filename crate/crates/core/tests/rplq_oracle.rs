mod common;

use common::{integer_markets, priority_lottery, priority_outcome};
use minquota::axioms::is_weakly_envy_free;
use minquota::mechanisms::{run_priolq, run_rplq_exact, run_rplq_sampled};
use minquota::{is_feasible, Permutation};
use num_traits::ToPrimitive;

#[test]
fn priority_runs_match_independent_implementation() {
    for m in integer_markets(120, 6, 4, 21) {
        for order in common::all_orders(m.num_students())
            .into_iter()
            .step_by(7)
            .take(20)
        {
            let mu = run_priolq(&m, &Permutation::new(order.clone()).unwrap()).unwrap();
            assert_eq!(
                mu.choices(),
                priority_outcome(&m, &order).as_slice(),
                "{m:?} {order:?}"
            );
            assert!(is_feasible(&mu.to_random(), &m).unwrap().is_feasible());
        }
    }
}

#[test]
fn exact_lottery_matches_re_enumeration() {
    for m in integer_markets(80, 6, 4, 22) {
        let r = run_rplq_exact(&m).unwrap().assignment;
        assert_eq!(r, priority_lottery(&m), "{m:?}");
        assert!(is_weakly_envy_free(&r, m.profile()));
    }
}

#[test]
fn sampling_converges_to_exact() {
    for m in integer_markets(5, 5, 4, 23) {
        let exact = run_rplq_exact(&m).unwrap().assignment;
        let approx = run_rplq_sampled(&m, 40_000, 9).unwrap().assignment;
        for (er, ar) in exact.rows().iter().zip(approx.rows()) {
            for (e, a) in er.iter().zip(ar) {
                assert!((e - a).to_f64().unwrap().abs() < 0.02);
            }
        }
    }
}
