//! Serial dictatorship under lower quotas, its uniform lottery, and the multi-unit
//! extension by cloning students.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eating::run_pslq;
use crate::error::{Error, Result};
use crate::model::{
    DeterministicAssignment, Market, Permutation, PreferenceProfile, RandomAssignment,
};
use crate::rational::{format_rational, from_usize, Rational};

/// Largest `n` for which the lottery is computed by enumerating all `n!` orders.
pub const EXACT_ENUMERATION_LIMIT: usize = 8;

/// Book-keeping of one priority run before step `step` is executed.
#[derive(Debug, Clone)]
pub struct PriorityState {
    step: usize,
    counts: Vec<usize>,
    remaining: usize,
}

impl PriorityState {
    fn new(n: usize, k: usize) -> Self {
        Self {
            step: 0,
            counts: vec![0; k],
            remaining: n,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn remaining_students(&self) -> usize {
        self.remaining
    }

    /// Projects whose lower quota is not yet filled.
    pub fn deficient_projects(&self, market: &Market) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&p| from_usize(self.counts[p]) < *market.lower(p))
            .collect()
    }

    /// Total unfilled lower quota over the deficient projects.
    pub fn unfilled_lower(&self, market: &Market) -> Rational {
        self.deficient_projects(market)
            .into_iter()
            .map(|p| market.lower(p) - from_usize(self.counts[p]))
            .sum()
    }

    /// True when the next student may still choose freely among projects with spare
    /// capacity, i.e. the unfilled lower quota is strictly below the remaining students.
    pub fn free_choice(&self, market: &Market) -> bool {
        self.unfilled_lower(market) < from_usize(self.remaining)
    }

    /// The menu offered to the next student.
    pub fn menu(&self, market: &Market) -> Vec<usize> {
        if self.free_choice(market) {
            (0..self.counts.len())
                .filter(|&p| from_usize(self.counts[p] + 1) <= *market.upper(p))
                .collect()
        } else {
            self.deficient_projects(market)
        }
    }

    fn assign(&mut self, project: usize) {
        self.counts[project] += 1;
        self.remaining -= 1;
        self.step += 1;
    }
}

/// Serial dictatorship with lower-quota protection, processing students in `order`.
pub fn run_priolq(market: &Market, order: &Permutation) -> Result<DeterministicAssignment> {
    let n = market.num_students();
    let k = market.num_projects();
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("order of {n} students"),
            found: format!("order of {}", order.len()),
        });
    }
    let mut state = PriorityState::new(n, k);
    let mut choices = vec![0; n];
    for &student in order.as_slice() {
        debug_assert!(state.unfilled_lower(market) <= from_usize(state.remaining));
        let menu = state.menu(market);
        let project = market.choice(student, menu)?;
        choices[student] = project;
        state.assign(project);
    }
    DeterministicAssignment::new(choices, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RplqMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RplqResult {
    pub assignment: RandomAssignment,
    pub mode: RplqMode,
}

/// Tallies how often each student receives each project.
struct Tally {
    counts: Vec<Vec<u64>>,
}

impl Tally {
    fn new(n: usize, k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; n],
        }
    }

    fn add(&mut self, x: &DeterministicAssignment) {
        for (i, &p) in x.choices().iter().enumerate() {
            self.counts[i][p] += 1;
        }
    }

    fn average(&self, total: &BigInt) -> RandomAssignment {
        let rows = self
            .counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| Rational::new(BigInt::from(c), total.clone()))
                    .collect()
            })
            .collect();
        RandomAssignment::new(rows).expect("rectangular tally")
    }
}

/// Uniform lottery over all `n!` priority orders, computed exactly.
pub fn run_rplq_exact(market: &Market) -> Result<RplqResult> {
    let n = market.num_students();
    if n > EXACT_ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "exact enumeration supports n <= {EXACT_ENUMERATION_LIMIT} (got n = {n}); \
             use Monte Carlo sampling instead"
        )));
    }
    let mut tally = Tally::new(n, market.num_projects());
    let mut total = 0u64;
    for order in (0..n).permutations(n) {
        let x = run_priolq(market, &Permutation::new(order)?)?;
        tally.add(&x);
        total += 1;
    }
    Ok(RplqResult {
        assignment: tally.average(&BigInt::from(total)),
        mode: RplqMode::Exact,
    })
}

/// Monte Carlo estimate of the lottery from `samples` uniformly drawn orders.
pub fn run_rplq_sampled(market: &Market, samples: u64, seed: u64) -> Result<RplqResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let n = market.num_students();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new(n, market.num_projects());
    for _ in 0..samples {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        tally.add(&run_priolq(market, &Permutation::new(order)?)?);
    }
    Ok(RplqResult {
        assignment: tally.average(&BigInt::from(samples)),
        mode: RplqMode::MonteCarlo { samples, seed },
    })
}

/// Random assignment mechanisms with exact outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Pslq,
    RplqExact,
}

impl Mechanism {
    pub fn run(&self, market: &Market) -> Result<RandomAssignment> {
        match self {
            Mechanism::Pslq => run_pslq(market),
            Mechanism::RplqExact => run_rplq_exact(market).map(|r| r.assignment),
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Pslq => "pslq",
            Mechanism::RplqExact => "rplq",
        })
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pslq" => Ok(Mechanism::Pslq),
            "rplq" | "rplq-exact" => Ok(Mechanism::RplqExact),
            other => Err(Error::InvalidArgument(format!(
                "unknown mechanism {other:?}"
            ))),
        }
    }
}

/// A market in which every student has been replaced by `q` identical clones.
#[derive(Debug, Clone)]
pub struct ClonedMarket {
    pub market: Market,
    pub copies: usize,
    pub original_students: usize,
}

impl ClonedMarket {
    /// Clone `j` of student `i` is student `i * copies + j` of the cloned market.
    pub fn clone_index(&self, student: usize, copy: usize) -> usize {
        student * self.copies + copy
    }

    /// Sums clone rows back into one row per original student; each row sums to `copies`.
    pub fn aggregate(&self, cloned: &RandomAssignment) -> RandomAssignment {
        let k = cloned.num_projects();
        let rows = (0..self.original_students)
            .map(|i| {
                (0..k)
                    .map(|p| {
                        (0..self.copies)
                            .map(|c| cloned.get(self.clone_index(i, c), p))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        RandomAssignment::new(rows).expect("rectangular")
    }
}

/// Builds the `q`-clone market. Requires `sum l <= q*n <= sum u`.
pub fn clone_market(market: &Market, copies: usize) -> Result<ClonedMarket> {
    if copies == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    let n = market.num_students();
    let total = from_usize(copies * n);
    let sum_lower: Rational = market.lower_quotas().iter().sum();
    let upper = market.declared_uppers();
    let unbounded = upper.iter().any(Option::is_none);
    let sum_upper: Rational = upper.iter().flatten().sum();
    if sum_lower > total || (!unbounded && total > sum_upper) {
        return Err(Error::InvalidMarket(format!(
            "multi-unit feasibility requires sum l <= q*n <= sum u, got {} <= {} <= {}",
            format_rational(&sum_lower),
            format_rational(&total),
            if unbounded {
                "unbounded".to_string()
            } else {
                format_rational(&sum_upper)
            }
        )));
    }
    let rankings = (0..n)
        .flat_map(|i| std::iter::repeat_n(market.profile().ranking(i).to_vec(), copies))
        .collect();
    let profile = PreferenceProfile::new(rankings, market.num_projects())?;
    let cloned = Market::new(
        market.project_names().to_vec(),
        market.lower_quotas().to_vec(),
        upper,
        profile,
    )?;
    Ok(ClonedMarket {
        market: cloned,
        copies,
        original_students: n,
    })
}

/// Multi-unit assignment: each student receives `copies` units; rows sum to `copies`.
pub fn run_multiunit(
    market: &Market,
    copies: usize,
    mechanism: Mechanism,
) -> Result<RandomAssignment> {
    let cloned = clone_market(market, copies)?;
    let r = mechanism.run(&cloned.market)?;
    Ok(cloned.aggregate(&r))
}

/// Checks rows sum to `copies` and columns lie within the quotas (unbounded means `q*n`).
pub fn multiunit_is_feasible(r: &RandomAssignment, market: &Market, copies: usize) -> bool {
    let q = from_usize(copies);
    let cap = from_usize(copies * market.num_students());
    r.num_students() == market.num_students()
        && r.rows().iter().all(|row| row.iter().sum::<Rational>() == q)
        && r.rows().iter().flatten().all(|x| *x >= Rational::zero())
        && (0..market.num_projects()).all(|p| {
            let s = r.column_sum(p);
            let upper = if market.is_upper_unbounded(p) {
                &cap
            } else {
                market.upper(p)
            };
            s >= *market.lower(p) && s <= *upper
        })
}
