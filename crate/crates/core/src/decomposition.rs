//! Lottery decomposition of feasible random assignments.
//!
//! Each step extracts an integral assignment `X` that agrees with `R` on its 0/1
//! entries and rounds every column sum to its floor or ceiling, peels off the
//! largest weight `λ` that keeps `(R − λX)/(1 − λ)` in the same polytope, and
//! repeats on the remainder. Every step makes at least one entry or column integral.

use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::model::{is_feasible, DeterministicAssignment, Market, RandomAssignment};
use crate::rational::{ceil, floor, is_integral, Rational};

/// A finite convex combination of deterministic assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lottery {
    pub terms: Vec<(Rational, DeterministicAssignment)>,
}

impl Lottery {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_weight(&self) -> Rational {
        self.terms.iter().map(|(w, _)| w).sum()
    }

    /// `Σ λ_X X` as a random assignment.
    pub fn expected_assignment(&self) -> Result<RandomAssignment> {
        let (_, first) = self
            .terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty lottery".into()))?;
        let (n, k) = (first.num_students(), first.num_projects());
        let mut r = RandomAssignment::zeros(n, k);
        for (w, x) in &self.terms {
            if x.num_students() != n || x.num_projects() != k {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n}x{k}"),
                    found: format!("{}x{}", x.num_students(), x.num_projects()),
                });
            }
            for (i, &p) in x.choices().iter().enumerate() {
                *r.get_mut(i, p) += w;
            }
        }
        Ok(r)
    }

    /// Checks positive weights summing to one, per-term feasibility, and exact
    /// reconstruction of `target`. Returns a description of the first problem.
    pub fn verify(
        &self,
        target: &RandomAssignment,
        market: &Market,
    ) -> std::result::Result<(), String> {
        if let Some((w, _)) = self.terms.iter().find(|(w, _)| !w.is_positive()) {
            return Err(format!("non-positive weight {w}"));
        }
        let total = self.total_weight();
        if !total.is_one() {
            return Err(format!("weights sum to {total}"));
        }
        for (idx, (_, x)) in self.terms.iter().enumerate() {
            let report = is_feasible(&x.to_random(), market).map_err(|e| e.to_string())?;
            if let Some(v) = report.violations.first() {
                return Err(format!("term {idx} infeasible: {v}"));
            }
        }
        let sum = self.expected_assignment().map_err(|e| e.to_string())?;
        if &sum != target {
            return Err("weighted sum differs from the target assignment".into());
        }
        Ok(())
    }
}

/// Worst-case number of terms produced by [`decompose`]: fractional entries plus
/// fractional column sums plus one.
pub fn term_bound(r: &RandomAssignment) -> usize {
    let entries = r
        .rows()
        .iter()
        .flatten()
        .filter(|x| !is_integral(x))
        .count();
    let columns = r.column_sums().iter().filter(|c| !is_integral(c)).count();
    entries + columns + 1
}

fn check_inputs(r: &RandomAssignment, market: &Market) -> Result<()> {
    if !market.has_integer_quotas() {
        return Err(Error::NonIntegerQuotas);
    }
    let report = is_feasible(r, market)?;
    if let Some(v) = report.violations.first() {
        return Err(Error::Infeasible(v.to_string()));
    }
    Ok(())
}

/// An integral assignment inside the rounding windows of `r`: zero where `r` is
/// zero, one where `r` is one, and every column count within `[⌊Σ⌋, ⌈Σ⌉]`.
pub fn extract_extreme_point(
    r: &RandomAssignment,
    market: &Market,
) -> Result<DeterministicAssignment> {
    check_inputs(r, market)?;
    extreme_point_unchecked(r)
}

fn to_i64(x: &Rational) -> i64 {
    x.to_integer().to_i64().expect("column bound fits in i64")
}

fn extreme_point_unchecked(r: &RandomAssignment) -> Result<DeterministicAssignment> {
    let (n, k) = (r.num_students(), r.num_projects());
    // nodes: source, students, projects, sink
    let source = 0;
    let student = |i: usize| 1 + i;
    let project = |p: usize| 1 + n + p;
    let sink = 1 + n + k;
    let mut net = BoundedNetwork::new(sink + 1);
    for i in 0..n {
        net.add_arc(source, student(i), 1, 1);
    }
    let mut arcs = Vec::new();
    for i in 0..n {
        for p in 0..k {
            let x = r.get(i, p);
            if x.is_positive() {
                let lo = if x.is_one() { 1 } else { 0 };
                arcs.push((i, p, net.add_arc(student(i), project(p), lo, 1)));
            }
        }
    }
    for (p, c) in r.column_sums().iter().enumerate() {
        net.add_arc(project(p), sink, to_i64(&floor(c)), to_i64(&ceil(c)));
    }
    net.add_arc(sink, source, 0, n as i64);
    if !net.find_circulation() {
        return Err(Error::Infeasible(
            "no integral assignment within the rounding windows".into(),
        ));
    }
    let mut choices = vec![usize::MAX; n];
    for (i, p, arc) in arcs {
        if net.flow(arc) == 1 {
            choices[i] = p;
        }
    }
    DeterministicAssignment::new(choices, k)
}

/// Largest `λ ≤ 1` keeping `(r − λx)/(1 − λ)` inside `[0,1]` entrywise and inside the
/// floor/ceiling window of every column.
fn peel_weight(r: &RandomAssignment, x: &DeterministicAssignment) -> Rational {
    let mut lambda = Rational::one();
    for i in 0..r.num_students() {
        for p in 0..r.num_projects() {
            let v = r.get(i, p);
            if is_integral(v) {
                continue;
            }
            let bound = if x.project_of(i) == p {
                v.clone()
            } else {
                Rational::one() - v
            };
            lambda = lambda.min(bound);
        }
    }
    let counts = x.column_counts();
    for (p, c) in r.column_sums().iter().enumerate() {
        if is_integral(c) {
            continue;
        }
        let taken = Rational::from_integer(counts[p].into());
        let bound = if taken == floor(c) {
            ceil(c) - c
        } else {
            c - floor(c)
        };
        lambda = lambda.min(bound);
    }
    lambda
}

/// Decomposes a feasible random assignment (integer quotas) into a lottery over
/// feasible deterministic assignments that reconstructs it exactly.
pub fn decompose(r: &RandomAssignment, market: &Market) -> Result<Lottery> {
    check_inputs(r, market)?;
    let mut terms = Vec::new();
    let mut remainder = r.clone();
    let mut mass = Rational::one();
    loop {
        let x = extreme_point_unchecked(&remainder)?;
        let lambda = peel_weight(&remainder, &x);
        if lambda.is_one() {
            terms.push((mass, x));
            break;
        }
        terms.push((&mass * &lambda, x.clone()));
        let rest = Rational::one() - &lambda;
        let rows = remainder
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(p, v)| {
                        if x.project_of(i) == p {
                            (v - &lambda) / &rest
                        } else {
                            v / &rest
                        }
                    })
                    .collect()
            })
            .collect();
        remainder = RandomAssignment::new(rows)?;
        mass *= rest;
    }
    // identical assignments can appear in non-consecutive steps; merge them
    let mut merged: Vec<(Rational, DeterministicAssignment)> = Vec::with_capacity(terms.len());
    for (w, x) in terms {
        match merged.iter_mut().find(|(_, y)| *y == x) {
            Some((acc, _)) => *acc += w,
            None => merged.push((w, x)),
        }
    }
    Ok(Lottery { terms: merged })
}

/// Dinic max-flow with arc lower bounds, solved as a circulation via a super
/// source/sink.
struct BoundedNetwork {
    nodes: usize,
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    lower: Vec<i64>,
    excess: Vec<i64>,
}

impl BoundedNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            nodes,
            head: vec![Vec::new(); nodes + 2],
            to: Vec::new(),
            cap: Vec::new(),
            lower: Vec::new(),
            excess: vec![0; nodes + 2],
        }
    }

    fn push_edge(&mut self, u: usize, v: usize, cap: i64, lower: i64) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(cap);
        self.lower.push(lower);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(0);
        self.lower.push(0);
        id
    }

    /// Arc `u → v` carrying between `lo` and `hi` units. Returns the arc id.
    fn add_arc(&mut self, u: usize, v: usize, lo: i64, hi: i64) -> usize {
        self.excess[v] += lo;
        self.excess[u] -= lo;
        self.push_edge(u, v, hi - lo, lo)
    }

    /// Flow on an arc created by [`Self::add_arc`], including its lower bound.
    fn flow(&self, arc: usize) -> i64 {
        self.lower[arc] + self.cap[arc ^ 1]
    }

    fn find_circulation(&mut self) -> bool {
        let (ss, tt) = (self.nodes, self.nodes + 1);
        let mut demand = 0;
        for v in 0..self.nodes {
            let e = self.excess[v];
            if e > 0 {
                self.push_edge(ss, v, e, 0);
                demand += e;
            } else if e < 0 {
                self.push_edge(v, tt, -e, 0);
            }
        }
        self.max_flow(ss, tt) == demand
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    fn augment(
        &mut self,
        u: usize,
        t: usize,
        pushed: i64,
        level: &[usize],
        it: &mut [usize],
    ) -> i64 {
        if u == t {
            return pushed;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, it);
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while let Some(level) = self.levels(s, t) {
            let mut it = vec![0; self.head.len()];
            loop {
                let got = self.augment(s, t, i64::MAX, &level, &mut it);
                if got == 0 {
                    break;
                }
                total += got;
            }
        }
        total
    }
}
