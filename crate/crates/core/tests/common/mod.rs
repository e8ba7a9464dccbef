#![allow(dead_code)]

use minquota::io::{generate_market, GeneratorConfig, QuotaStyle};
use minquota::Market;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic stream of valid integer-quota markets with `n ≤ max_n`, `k ≤ max_k`,
/// cycling through the integer quota styles.
pub fn integer_markets(count: usize, max_n: usize, max_k: usize, seed: u64) -> Vec<Market> {
    let styles = [
        QuotaStyle::IntegerLoose,
        QuotaStyle::IntegerTight,
        QuotaStyle::None,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let n = rng.random_range(1..=max_n);
            let k = rng.random_range(1..=max_k);
            let cfg = GeneratorConfig::new(n, k, rng.random())
                .with_quotas(styles[j % styles.len()].clone());
            generate_market(&cfg).expect("generator config is satisfiable")
        })
        .collect()
}

/// Markets with every lower quota zero (upper quotas random or absent).
pub fn zero_lower_markets(count: usize, max_n: usize, max_k: usize, seed: u64) -> Vec<Market> {
    integer_markets(count * 3, max_n, max_k, seed)
        .into_iter()
        .filter_map(|m| {
            let upper = m.declared_uppers();
            let lower = vec![minquota::rational::int(0); m.num_projects()];
            Market::new(
                m.project_names().to_vec(),
                lower,
                upper,
                m.profile().clone(),
            )
            .ok()
        })
        .take(count)
        .collect()
}

use minquota::axioms::sd_dominates;
use minquota::rational::{from_usize, Rational};
use minquota::RandomAssignment;
use num_traits::{One, Zero};

/// Textbook simultaneous eating without lower quotas: everyone eats her favourite
/// project with supply left; supplies are the upper quotas.
pub fn classical_ps(market: &Market) -> RandomAssignment {
    let n = market.num_students();
    let k = market.num_projects();
    let mut supply: Vec<Rational> = (0..k).map(|p| market.upper(p).clone()).collect();
    let mut r = vec![vec![Rational::zero(); k]; n];
    let mut clock = Rational::zero();
    while clock < Rational::one() {
        let target: Vec<usize> = (0..n)
            .map(|i| {
                *market
                    .profile()
                    .ranking(i)
                    .iter()
                    .find(|&&p| supply[p] > Rational::zero())
                    .expect("total supply covers every student")
            })
            .collect();
        let mut eaters = vec![0usize; k];
        for &p in &target {
            eaters[p] += 1;
        }
        let mut step = Rational::one() - &clock;
        for p in 0..k {
            if eaters[p] > 0 {
                step = step.min(&supply[p] / from_usize(eaters[p]));
            }
        }
        for (i, &p) in target.iter().enumerate() {
            r[i][p] += &step;
            supply[p] -= &step;
        }
        clock += step;
    }
    RandomAssignment::new(r).unwrap()
}

/// Priority mechanism written from scratch: when the students still to choose are
/// exactly enough to fill the open lower quotas, only deficient projects may be taken.
pub fn priority_outcome(market: &Market, order: &[usize]) -> Vec<usize> {
    let k = market.num_projects();
    let mut count = vec![0usize; k];
    let mut result = vec![0; order.len()];
    for (step, &i) in order.iter().enumerate() {
        let waiting = from_usize(order.len() - step);
        let deficit: Rational = (0..k)
            .map(|p| {
                let gap = market.lower(p) - from_usize(count[p]);
                if gap > Rational::zero() {
                    gap
                } else {
                    Rational::zero()
                }
            })
            .sum();
        let restricted = deficit >= waiting;
        let p = *market
            .profile()
            .ranking(i)
            .iter()
            .find(|&&p| {
                let c = from_usize(count[p]);
                if restricted {
                    c < *market.lower(p)
                } else {
                    &c + Rational::one() <= *market.upper(p)
                }
            })
            .expect("feasible market leaves a choice");
        count[p] += 1;
        result[i] = p;
    }
    result
}

/// Heap's algorithm.
pub fn all_orders(n: usize) -> Vec<Vec<usize>> {
    fn heap(m: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m <= 1 {
            out.push(a.clone());
            return;
        }
        for j in 0..m {
            heap(m - 1, a, out);
            let swap = if m.is_multiple_of(2) { j } else { 0 };
            a.swap(swap, m - 1);
        }
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

/// Uniform lottery over priority orders, by direct enumeration.
pub fn priority_lottery(market: &Market) -> RandomAssignment {
    let n = market.num_students();
    let k = market.num_projects();
    let orders = all_orders(n);
    let mut counts = vec![vec![0u64; k]; n];
    for order in &orders {
        for (i, p) in priority_outcome(market, order).into_iter().enumerate() {
            counts[i][p] += 1;
        }
    }
    let total = Rational::from_integer((orders.len() as i64).into());
    RandomAssignment::new(
        counts
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| Rational::from_integer((c as i64).into()) / &total)
                    .collect()
            })
            .collect(),
    )
    .unwrap()
}

/// All ways to write 1 as `k` nonnegative multiples of `1/d`.
fn grid_rows(k: usize, d: i64) -> Vec<Vec<Rational>> {
    fn rec(k: usize, left: i64, d: i64, cur: &mut Vec<Rational>, out: &mut Vec<Vec<Rational>>) {
        if k == 1 {
            cur.push(Rational::new(left.into(), d.into()));
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in 0..=left {
            cur.push(Rational::new(x.into(), d.into()));
            rec(k - 1, left - x, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, d, d, &mut Vec::new(), &mut out);
    out
}

/// Brute-force search for a feasible matrix on the `1/d` grid that sd-dominates `r`
/// for every student and differs from it. With integer quotas and `r` on the same
/// grid, every improvement shift stays on the grid, so this decides ordinal efficiency.
pub fn grid_dominator(r: &RandomAssignment, market: &Market, d: i64) -> Option<RandomAssignment> {
    let n = market.num_students();
    let k = market.num_projects();
    let rows = grid_rows(k, d);
    let options: Vec<Vec<&Vec<Rational>>> = (0..n)
        .map(|i| {
            rows.iter()
                .filter(|row| sd_dominates(row, r.row(i), market.profile().ranking(i), false))
                .collect()
        })
        .collect();
    let mut pick = vec![0usize; n];
    loop {
        let cand: Vec<Vec<Rational>> = (0..n).map(|i| options[i][pick[i]].clone()).collect();
        let cand = RandomAssignment::new(cand).unwrap();
        if cand != *r && minquota::is_feasible(&cand, market).unwrap().is_feasible() {
            return Some(cand);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return None;
            }
            pick[pos] += 1;
            if pick[pos] < options[pos].len() {
                break;
            }
            pick[pos] = 0;
            pos += 1;
        }
    }
}
