mod common;

use common::{grid_dominator, integer_markets};
use minquota::axioms::{
    find_wasteful_chain, is_envy_free, is_ordinally_efficient, is_weakly_envy_free, sd_dominates,
    Efficiency,
};
use minquota::mechanisms::run_priolq;
use minquota::rational::Rational;
use minquota::{is_feasible, DeterministicAssignment, Market, Permutation, RandomAssignment};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lottery_row(k: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(0i64..6, k).prop_map(|w| {
        let total: i64 = w.iter().sum::<i64>().max(1);
        let mut row: Vec<Rational> = w
            .iter()
            .map(|&x| Rational::new(x.into(), total.into()))
            .collect();
        if w.iter().all(|&x| x == 0) {
            row[0] = Rational::from_integer(1.into());
        }
        row
    })
}

fn ranking(k: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..k).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn dominance_is_reflexive_and_antisymmetric(x in lottery_row(4), y in lottery_row(4), r in ranking(4)) {
        prop_assert!(sd_dominates(&x, &x, &r, false));
        if sd_dominates(&x, &y, &r, false) && sd_dominates(&y, &x, &r, false) {
            prop_assert_eq!(&x, &y);
        }
        prop_assert_eq!(sd_dominates(&x, &y, &r, true), sd_dominates(&x, &y, &r, false) && x != y);
    }

    #[test]
    fn dominance_is_transitive(x in lottery_row(4), y in lottery_row(4), z in lottery_row(4), r in ranking(4)) {
        if sd_dominates(&x, &y, &r, false) && sd_dominates(&y, &z, &r, false) {
            prop_assert!(sd_dominates(&x, &z, &r, false));
        }
    }
}

/// A uniformly drawn quota-feasible deterministic assignment (rejection sampling),
/// falling back to a priority outcome.
fn random_deterministic(m: &Market, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (n, k) = (m.num_students(), m.num_projects());
    for _ in 0..1000 {
        let choices: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mu = DeterministicAssignment::new(choices.clone(), k).unwrap();
        if is_feasible(&mu.to_random(), m).unwrap().is_feasible() {
            return choices;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    run_priolq(m, &Permutation::new(order).unwrap())
        .unwrap()
        .choices()
        .to_vec()
}

/// Average of `d` feasible deterministic assignments, a feasible matrix on the `1/d`
/// grid. Half the draws mix priority outcomes, which are usually efficient; the
/// others mix arbitrary feasible assignments, which usually are not.
fn random_feasible(m: &Market, d: usize, rng: &mut ChaCha8Rng) -> RandomAssignment {
    let (n, k) = (m.num_students(), m.num_projects());
    let mut r = RandomAssignment::zeros(n, k);
    let w = Rational::new(1.into(), (d as i64).into());
    let arbitrary = rng.random_bool(0.5);
    for _ in 0..d {
        let choices = if arbitrary {
            random_deterministic(m, rng)
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            run_priolq(m, &Permutation::new(order).unwrap())
                .unwrap()
                .choices()
                .to_vec()
        };
        for (i, &p) in choices.iter().enumerate() {
            *r.get_mut(i, p) += &w;
        }
    }
    r
}

#[test]
fn envy_freeness_implies_weak_envy_freeness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in integer_markets(150, 5, 4, 31) {
        let r = random_feasible(&m, rng.random_range(1..=6), &mut rng);
        if is_envy_free(&r, m.profile()) {
            assert!(is_weakly_envy_free(&r, m.profile()));
        }
    }
}

#[test]
fn witnesses_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut inefficient = 0;
    for m in integer_markets(300, 6, 4, 32) {
        let r = random_feasible(&m, rng.random_range(1..=6), &mut rng);
        let Efficiency::Inefficient(w) = is_ordinally_efficient(&r, &m).unwrap() else {
            continue;
        };
        inefficient += 1;
        assert!(w.delta > Rational::from_integer(0.into()));
        assert!(is_feasible(&w.improved, &m).unwrap().is_feasible());
        assert_ne!(w.improved, r);
        let touched = w.touched_students();
        for i in 0..m.num_students() {
            let (new, old) = (w.improved.row(i), r.row(i));
            assert!(sd_dominates(new, old, m.profile().ranking(i), false));
            if !touched.contains(&i) {
                assert_eq!(new, old);
            }
        }
        if find_wasteful_chain(&r, &m).is_some() {
            let chain = find_wasteful_chain(&r, &m).unwrap();
            assert!(chain.students.len() + 1 == chain.projects.len());
        }
    }
    assert!(inefficient > 50, "only {inefficient} inefficient samples");
}

#[test]
fn checker_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut efficient, mut inefficient) = (0, 0);
    for m in integer_markets(400, 4, 3, 33) {
        let d = rng.random_range(1..=6);
        let r = random_feasible(&m, d, &mut rng);
        let checker = is_ordinally_efficient(&r, &m).unwrap().is_efficient();
        let oracle = grid_dominator(&r, &m, d as i64).is_none();
        assert_eq!(checker, oracle, "{m:?}\n{r}");
        if checker {
            efficient += 1;
        } else {
            inefficient += 1;
        }
    }
    assert!(
        efficient > 20 && inefficient > 20,
        "{efficient} / {inefficient}"
    );
}
