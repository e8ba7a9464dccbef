mod common;

use common::integer_markets;
use minquota::decomposition::{decompose, extract_extreme_point, term_bound};
use minquota::eating::run_pslq;
use minquota::mechanisms::run_rplq_exact;
use minquota::rational::{ceil, floor, from_usize};
use num_traits::{One, Zero};

#[test]
fn random_outputs_decompose_exactly() {
    for m in integer_markets(150, 6, 4, 41) {
        for r in [
            run_pslq(&m).unwrap(),
            run_rplq_exact(&m).unwrap().assignment,
        ] {
            let lottery = decompose(&r, &m).unwrap();
            lottery.verify(&r, &m).unwrap();
            assert!(lottery.len() <= term_bound(&r));
        }
    }
}

#[test]
fn extreme_points_respect_rounding_windows() {
    for m in integer_markets(150, 6, 4, 42) {
        let r = run_pslq(&m).unwrap();
        let x = extract_extreme_point(&r, &m).unwrap();
        for (i, &p) in x.choices().iter().enumerate() {
            assert!(!r.get(i, p).is_zero());
            for q in 0..m.num_projects() {
                if r.get(i, q).is_one() {
                    assert_eq!(p, q);
                }
            }
        }
        let counts = x.column_counts();
        for (p, c) in r.column_sums().iter().enumerate() {
            let got = from_usize(counts[p]);
            assert!(floor(c) <= got && got <= ceil(c));
        }
    }
}

#[test]
fn priority_multiset_is_another_valid_lottery() {
    use minquota::decomposition::Lottery;
    use minquota::instances::lower_quota_market;
    use minquota::mechanisms::run_priolq;
    use minquota::Permutation;
    let m = lower_quota_market();
    let r = run_rplq_exact(&m).unwrap().assignment;
    let w = minquota::rational::ratio(1, 24);
    let terms = common::all_orders(4)
        .into_iter()
        .map(|o| {
            (
                w.clone(),
                run_priolq(&m, &Permutation::new(o).unwrap()).unwrap(),
            )
        })
        .collect();
    Lottery { terms }.verify(&r, &m).unwrap();
    decompose(&r, &m).unwrap().verify(&r, &m).unwrap();
}
