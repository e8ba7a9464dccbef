//! Fairness and efficiency checkers.
//!
//! Ordinal efficiency uses the cycle/chain characterization: a feasible random
//! assignment is ordinally efficient iff the relation `p τ q` (some student prefers
//! `p` to `q` yet holds part of `q`) is acyclic and no wasteful chain runs from a
//! project with spare upper capacity to a project above its lower quota. Whenever a
//! cycle or chain is found, the checker shifts probability along it and returns the
//! dominating assignment as a witness.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{
    is_feasible, DeterministicAssignment, Market, MasterList, PreferenceProfile, RandomAssignment,
};
use crate::rational::Rational;

/// Upper bound on `k^n` for exhaustive Pareto checks.
pub const PARETO_ENUMERATION_LIMIT: u64 = 1_000_000;

/// Stochastic dominance of lottery `x` over `y` for a student with `ranking`
/// (project indices, best first). Weak mode compares prefix sums only; strict mode
/// also requires `x != y`.
pub fn sd_dominates(x: &[Rational], y: &[Rational], ranking: &[usize], strict: bool) -> bool {
    let mut px = Rational::zero();
    let mut py = Rational::zero();
    for &p in ranking {
        px += &x[p];
        py += &y[p];
        if px < py {
            return false;
        }
    }
    !strict || x != y
}

/// First ordered pair `(i, j)` such that student `i` does not weakly prefer her row to
/// row `j`.
pub fn envy_violation(r: &RandomAssignment, profile: &PreferenceProfile) -> Option<(usize, usize)> {
    let n = r.num_students();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| i != j && !sd_dominates(r.row(i), r.row(j), profile.ranking(i), false))
}

pub fn is_envy_free(r: &RandomAssignment, profile: &PreferenceProfile) -> bool {
    envy_violation(r, profile).is_none()
}

/// First ordered pair `(i, j)` such that row `j` strictly sd-dominates row `i` under
/// student `i`'s ranking.
pub fn weak_envy_violation(
    r: &RandomAssignment,
    profile: &PreferenceProfile,
) -> Option<(usize, usize)> {
    let n = r.num_students();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| i != j && sd_dominates(r.row(j), r.row(i), profile.ranking(i), true))
}

pub fn is_weakly_envy_free(r: &RandomAssignment, profile: &PreferenceProfile) -> bool {
    weak_envy_violation(r, profile).is_none()
}

/// The relation `p τ q`, stored with the lowest-indexed witnessing student per edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauGraph {
    witness: Vec<Vec<Option<usize>>>,
}

impl TauGraph {
    pub fn new(r: &RandomAssignment, profile: &PreferenceProfile) -> Self {
        let k = profile.num_projects();
        let mut witness = vec![vec![None; k]; k];
        for i in 0..r.num_students() {
            let ranking = profile.ranking(i);
            for (pos, &q) in ranking.iter().enumerate() {
                if !r.get(i, q).is_positive() {
                    continue;
                }
                for &p in &ranking[..pos] {
                    witness[p][q].get_or_insert(i);
                }
            }
        }
        Self { witness }
    }

    pub fn num_projects(&self) -> usize {
        self.witness.len()
    }

    /// Witnessing student for the edge `p → q`, if the edge exists.
    pub fn edge(&self, p: usize, q: usize) -> Option<usize> {
        self.witness[p][q]
    }

    /// All edges `(p, q, student)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        let k = self.num_projects();
        (0..k)
            .flat_map(|p| (0..k).filter_map(move |q| self.witness[p][q].map(|i| (p, q, i))))
            .collect()
    }

    fn successors(&self, p: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.witness[p]
            .iter()
            .enumerate()
            .filter_map(|(q, w)| w.map(|i| (q, i)))
    }
}

/// A path of τ edges: `projects[j] τ projects[j+1]` witnessed by `students[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TauPath {
    pub projects: Vec<usize>,
    pub students: Vec<usize>,
}

impl TauPath {
    fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.students
            .iter()
            .enumerate()
            .map(|(j, &i)| (self.projects[j], self.projects[j + 1], i))
    }
}

/// A τ-cycle as a closed path (first project repeated at the end), or `None`.
pub fn find_tau_cycle(r: &RandomAssignment, profile: &PreferenceProfile) -> Option<TauPath> {
    let graph = TauGraph::new(r, profile);
    let k = graph.num_projects();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; k];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; k];
    for root in 0..k {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(usize, Vec<(usize, usize)>)> =
            vec![(root, graph.successors(root).collect())];
        color[root] = 1;
        while let Some((node, pending)) = stack.last_mut() {
            let node = *node;
            match pending.pop() {
                None => {
                    color[node] = 2;
                    stack.pop();
                }
                Some((next, student)) => match color[next] {
                    0 => {
                        color[next] = 1;
                        parent[next] = Some((node, student));
                        let mut succ: Vec<(usize, usize)> = graph.successors(next).collect();
                        succ.reverse();
                        stack.push((next, succ));
                    }
                    1 => {
                        // back edge node → next closes a cycle next → … → node → next
                        let mut projects = vec![node];
                        let mut students = vec![student];
                        let mut cur = node;
                        while cur != next {
                            let (prev, s) = parent[cur].expect("on-stack node has a parent");
                            projects.push(prev);
                            students.push(s);
                            cur = prev;
                        }
                        projects.reverse();
                        students.reverse();
                        projects.push(next);
                        return Some(TauPath { projects, students });
                    }
                    _ => {}
                },
            }
        }
    }
    None
}

/// Shortest wasteful chain: a τ-path from a project with `Σ r < u` to a project with
/// `Σ r > l`, with at least one edge.
pub fn find_wasteful_chain(r: &RandomAssignment, market: &Market) -> Option<TauPath> {
    let graph = TauGraph::new(r, market.profile());
    let k = market.num_projects();
    let sums = r.column_sums();
    let below_upper: Vec<bool> = (0..k).map(|p| sums[p] < *market.upper(p)).collect();
    let above_lower: Vec<bool> = (0..k).map(|p| sums[p] > *market.lower(p)).collect();

    let mut parent: Vec<Option<(usize, usize)>> = vec![None; k];
    let mut seen = vec![false; k];
    let mut queue = VecDeque::new();
    for p in (0..k).filter(|&p| below_upper[p]) {
        seen[p] = true;
        queue.push_back(p);
    }
    let build = |parent: &[Option<(usize, usize)>], from: usize, to: usize, student: usize| {
        let mut projects = vec![to, from];
        let mut students = vec![student];
        let mut cur = from;
        while let Some((prev, s)) = parent[cur] {
            projects.push(prev);
            students.push(s);
            cur = prev;
        }
        projects.reverse();
        students.reverse();
        TauPath { projects, students }
    };
    while let Some(p) = queue.pop_front() {
        for (q, student) in graph.successors(p) {
            if above_lower[q] {
                let path = build(&parent, p, q, student);
                // a path revisiting its own start is a cycle, handled separately
                if !path.projects[..path.projects.len() - 1].contains(&q) {
                    return Some(path);
                }
            }
            if !seen[q] {
                seen[q] = true;
                parent[q] = Some((p, student));
                queue.push_back(q);
            }
        }
    }
    None
}

/// Non-wastefulness (single-edge chains only). Weaker than the chain condition.
pub fn is_wasteful(r: &RandomAssignment, market: &Market) -> bool {
    let sums = r.column_sums();
    TauGraph::new(r, market.profile())
        .edges()
        .into_iter()
        .any(|(p, q, _)| sums[p] < *market.upper(p) && sums[q] > *market.lower(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    TauCycle,
    WastefulChain,
}

/// A constructive proof of ordinal inefficiency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImprovementWitness {
    pub kind: WitnessKind,
    pub path: TauPath,
    pub delta: Rational,
    pub shift: RandomAssignment,
    pub improved: RandomAssignment,
}

impl ImprovementWitness {
    /// Students whose rows change.
    pub fn touched_students(&self) -> Vec<usize> {
        let mut s = self.path.students.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Moves `delta` along every edge of `path`: for edge `p τ q` witnessed by `i`,
/// `i` gives up `delta` of `q` and receives `delta` of `p`.
fn shift_matrix(n: usize, k: usize, path: &TauPath, delta: &Rational) -> RandomAssignment {
    let mut shift = RandomAssignment::zeros(n, k);
    for (p, q, i) in path.edges() {
        *shift.get_mut(i, p) += delta;
        *shift.get_mut(i, q) -= delta;
    }
    shift
}

fn add(a: &RandomAssignment, b: &RandomAssignment) -> RandomAssignment {
    let rows = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect();
    RandomAssignment::new(rows).expect("same shape")
}

fn witness_for(
    r: &RandomAssignment,
    market: &Market,
    kind: WitnessKind,
    path: TauPath,
) -> ImprovementWitness {
    let mut delta = path
        .edges()
        .map(|(_, q, i)| r.get(i, q).clone())
        .min()
        .expect("path has an edge");
    if kind == WitnessKind::WastefulChain {
        let first = path.projects[0];
        let last = *path.projects.last().expect("nonempty");
        delta = delta
            .min(market.upper(first) - r.column_sum(first))
            .min(r.column_sum(last) - market.lower(last));
    }
    let shift = shift_matrix(r.num_students(), r.num_projects(), &path, &delta);
    let improved = add(r, &shift);
    ImprovementWitness {
        kind,
        path,
        delta,
        shift,
        improved,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Efficiency {
    Efficient,
    Inefficient(Box<ImprovementWitness>),
}

impl Efficiency {
    pub fn is_efficient(&self) -> bool {
        matches!(self, Efficiency::Efficient)
    }

    pub fn witness(&self) -> Option<&ImprovementWitness> {
        match self {
            Efficiency::Efficient => None,
            Efficiency::Inefficient(w) => Some(w),
        }
    }
}

/// Ordinal efficiency of a feasible random assignment, with an improvement witness on
/// failure.
pub fn is_ordinally_efficient(r: &RandomAssignment, market: &Market) -> Result<Efficiency> {
    let report = is_feasible(r, market)?;
    if !report.is_feasible() {
        return Err(Error::Infeasible(
            report
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    if let Some(cycle) = find_tau_cycle(r, market.profile()) {
        return Ok(Efficiency::Inefficient(Box::new(witness_for(
            r,
            market,
            WitnessKind::TauCycle,
            cycle,
        ))));
    }
    if let Some(chain) = find_wasteful_chain(r, market) {
        return Ok(Efficiency::Inefficient(Box::new(witness_for(
            r,
            market,
            WitnessKind::WastefulChain,
            chain,
        ))));
    }
    Ok(Efficiency::Efficient)
}

/// Repeatedly applies improvement witnesses until the assignment is efficient.
/// Returns the final assignment and the number of improvement steps.
pub fn improve_until_efficient(
    r: &RandomAssignment,
    market: &Market,
    max_steps: usize,
) -> Result<(RandomAssignment, usize)> {
    let mut current = r.clone();
    for step in 0..max_steps {
        match is_ordinally_efficient(&current, market)? {
            Efficiency::Efficient => return Ok((current, step)),
            Efficiency::Inefficient(w) => current = w.improved,
        }
    }
    Err(Error::TooLarge(format!(
        "no efficient assignment after {max_steps} improvement steps"
    )))
}

/// First pair `(i, j)` where `i` prefers `j`'s project although `j` does not precede
/// `i` on the master list.
pub fn ml_fairness_violation(
    mu: &DeterministicAssignment,
    profile: &PreferenceProfile,
    ml: &MasterList,
) -> Option<(usize, usize)> {
    let n = mu.num_students();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| {
            i != j && profile.prefers(i, mu.project_of(j), mu.project_of(i)) && !ml.precedes(j, i)
        })
}

pub fn is_ml_fair(
    mu: &DeterministicAssignment,
    profile: &PreferenceProfile,
    ml: &MasterList,
) -> bool {
    ml_fairness_violation(mu, profile, ml).is_none()
}

/// True iff `a` Pareto-dominates `b`: everyone weakly better, someone strictly.
pub fn pareto_dominates(
    a: &DeterministicAssignment,
    b: &DeterministicAssignment,
    profile: &PreferenceProfile,
) -> bool {
    let mut strict = false;
    for i in 0..a.num_students() {
        let (pa, pb) = (a.project_of(i), b.project_of(i));
        if profile.prefers(i, pb, pa) {
            return false;
        }
        strict |= pa != pb;
    }
    strict
}

fn quota_feasible(counts: &[usize], market: &Market) -> bool {
    counts.iter().enumerate().all(|(p, &c)| {
        let c = Rational::from_integer(c.into());
        c >= *market.lower(p) && c <= *market.upper(p)
    })
}

/// Exhaustive search over all feasible deterministic assignments for one that
/// Pareto-dominates `mu`. `Ok(None)` means `mu` is quota-constrained efficient.
pub fn pareto_improvement(
    mu: &DeterministicAssignment,
    market: &Market,
) -> Result<Option<DeterministicAssignment>> {
    let n = market.num_students();
    let k = market.num_projects();
    let size = (k as u64).checked_pow(n as u32);
    if size.is_none_or(|s| s > PARETO_ENUMERATION_LIMIT) {
        return Err(Error::TooLarge(format!(
            "{k}^{n} candidate assignments exceed the enumeration limit \
             {PARETO_ENUMERATION_LIMIT}; use a sampling check instead"
        )));
    }
    let profile = market.profile();
    // odometer over choice vectors, each student restricted to projects she weakly prefers
    let menus: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let ranking = profile.ranking(i);
            let pos = profile.rank(i, mu.project_of(i));
            ranking[..=pos].to_vec()
        })
        .collect();
    let mut idx = vec![0usize; n];
    loop {
        let choices: Vec<usize> = (0..n).map(|i| menus[i][idx[i]]).collect();
        let candidate = DeterministicAssignment::new(choices, k)?;
        if quota_feasible(&candidate.column_counts(), market)
            && pareto_dominates(&candidate, mu, profile)
        {
            return Ok(Some(candidate));
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(None);
            }
            idx[pos] += 1;
            if idx[pos] < menus[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

pub fn is_mqc_efficient(mu: &DeterministicAssignment, market: &Market) -> Result<bool> {
    pareto_improvement(mu, market).map(|d| d.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eating::run_pslq;
    use crate::instances::*;
    use crate::mechanisms::{run_priolq, run_rplq_exact};
    use crate::model::Permutation;
    use crate::rational::{int, ratio};

    fn row(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    #[test]
    fn dominance_basics() {
        let x = row(&[(2, 3), (1, 3), (0, 1)]);
        let y = row(&[(2, 3), (0, 1), (1, 3)]);
        let abc = [0, 1, 2];
        assert!(sd_dominates(&x, &x, &abc, false));
        assert!(!sd_dominates(&x, &x, &abc, true));
        assert!(sd_dominates(&x, &y, &abc, true));
        assert!(!sd_dominates(&y, &x, &abc, false));

        let better = row(&[(2, 3), (0, 1), (1, 3), (0, 1)]);
        let worse = row(&[(3, 5), (1, 15), (1, 3), (0, 1)]);
        assert!(sd_dominates(&better, &worse, &[0, 1, 2, 3], true));
    }

    #[test]
    fn envy_checks() {
        let r = run_pslq(&critical_time_market()).unwrap();
        assert!(is_envy_free(&r, critical_time_market().profile()));

        let m = lower_quota_market();
        let r = run_rplq_exact(&m).unwrap().assignment;
        assert_eq!(envy_violation(&r, m.profile()), Some((0, 2)));
        assert!(is_weakly_envy_free(&r, m.profile()));

        let single = Market::from_names(&["a"], vec![int(0)], vec![None], &[&["a"]]).unwrap();
        let r1 = RandomAssignment::new(vec![vec![int(1)]]).unwrap();
        assert!(is_envy_free(&r1, single.profile()));
    }

    #[test]
    fn weak_envy_two_students() {
        let profile = PreferenceProfile::new(vec![vec![0, 1], vec![0, 1]], 2).unwrap();
        let r = RandomAssignment::new(vec![vec![int(0), int(1)], vec![int(1), int(0)]]).unwrap();
        assert_eq!(weak_envy_violation(&r, &profile), Some((0, 1)));
        assert!(!is_weakly_envy_free(&r, &profile));
    }

    #[test]
    fn tau_edges_of_chain_example() {
        let m = chain_market();
        let g = TauGraph::new(&chain_market_assignment(), m.profile());
        assert_eq!(g.edges(), vec![(0, 1, 0), (1, 2, 1)]);
        assert!(find_tau_cycle(&chain_market_assignment(), m.profile()).is_none());
        assert!(!is_wasteful(&chain_market_assignment(), &m));
    }

    #[test]
    fn tau_edges_of_lottery_example() {
        let m = priority_inefficiency_market();
        let r = run_rplq_exact(&m).unwrap().assignment;
        let g = TauGraph::new(&r, m.profile());
        // a→b, a→c, b→c from the first group; a→c, b→c, d→c from the second
        assert_eq!(
            g.edges()
                .into_iter()
                .map(|(p, q, _)| (p, q))
                .collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (1, 2), (3, 2)]
        );
        assert!(find_tau_cycle(&r, m.profile()).is_none());
    }

    #[test]
    fn integral_top_choices_have_no_edges() {
        let m = no_quota_market();
        let r = run_rplq_exact(&m).unwrap().assignment;
        assert!(TauGraph::new(&r, m.profile()).edges().is_empty());
    }

    #[test]
    fn detects_simple_cycle() {
        // two students each holding the other's favourite
        let profile = PreferenceProfile::new(vec![vec![0, 1], vec![1, 0]], 2).unwrap();
        let r = RandomAssignment::new(vec![vec![int(0), int(1)], vec![int(1), int(0)]]).unwrap();
        let cycle = find_tau_cycle(&r, &profile).unwrap();
        assert_eq!(cycle.projects.first(), cycle.projects.last());
        assert_eq!(cycle.students.len(), 2);
    }

    #[test]
    fn chain_example_witness() {
        let m = chain_market();
        let chain = find_wasteful_chain(&chain_market_assignment(), &m).unwrap();
        assert_eq!(chain.projects, vec![0, 1, 2]);
        assert_eq!(chain.students, vec![0, 1]);
        let eff = is_ordinally_efficient(&chain_market_assignment(), &m).unwrap();
        let w = eff.witness().unwrap();
        assert_eq!(w.kind, WitnessKind::WastefulChain);
        assert_eq!(w.delta, ratio(1, 2));
        assert_eq!(
            w.improved.rows(),
            &[vec![int(1), int(0), int(0)], vec![int(0), int(1), int(0)]]
        );
    }

    #[test]
    fn lottery_example_witness() {
        let m = priority_inefficiency_market();
        let r = run_rplq_exact(&m).unwrap().assignment;
        let eff = is_ordinally_efficient(&r, &m).unwrap();
        let w = eff.witness().unwrap();
        assert_eq!(w.kind, WitnessKind::WastefulChain);
        assert_eq!(w.path.projects, vec![0, 1]);
        assert_eq!(w.delta, ratio(1, 15));
        assert_eq!(
            w.improved.row(0),
            row(&[(2, 3), (0, 1), (1, 3), (0, 1)]).as_slice()
        );
        // iterating the shifts reaches the dominating assignment where every a-first
        // student gets (2/3, 0, 1/3, 0)
        let (best, steps) = improve_until_efficient(&r, &m, 100).unwrap();
        assert_eq!(steps, 3);
        for i in 0..3 {
            assert_eq!(
                best.row(i),
                row(&[(2, 3), (0, 1), (1, 3), (0, 1)]).as_slice()
            );
        }
        for i in 3..6 {
            assert_eq!(best.row(i), r.row(i));
        }
    }

    #[test]
    fn pslq_outputs_have_no_chain() {
        let m = critical_time_market();
        let r = run_pslq(&m).unwrap();
        assert!(find_wasteful_chain(&r, &m).is_none());
        assert!(is_ordinally_efficient(&r, &m).unwrap().is_efficient());
    }

    #[test]
    fn single_project_has_no_chain() {
        let m = Market::from_names(&["a"], vec![int(0)], vec![Some(int(3))], &[&["a"], &["a"]])
            .unwrap();
        let r = RandomAssignment::new(vec![vec![int(1)], vec![int(1)]]).unwrap();
        assert!(find_wasteful_chain(&r, &m).is_none());
    }

    #[test]
    fn infeasible_input_is_an_error() {
        let m = lower_quota_market();
        let x = DeterministicAssignment::new(vec![0, 0, 1, 1], 3).unwrap();
        assert!(matches!(
            is_ordinally_efficient(&x.to_random(), &m),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn ml_fairness() {
        let m = lower_quota_market();
        let mu = run_priolq(&m, &Permutation::identity(4)).unwrap();
        let ml = MasterList::new(Permutation::identity(4));
        assert!(is_ml_fair(&mu, m.profile(), &ml));
        // student 2 (later) holds a, student 1 (earlier, a first) holds c
        let swapped = DeterministicAssignment::new(vec![2, 0, 1, 1], 3).unwrap();
        assert_eq!(
            ml_fairness_violation(&swapped, m.profile(), &ml),
            Some((0, 1))
        );
        let single = DeterministicAssignment::new(vec![0], 1).unwrap();
        let p1 = PreferenceProfile::new(vec![vec![0]], 1).unwrap();
        assert!(is_ml_fair(
            &single,
            &p1,
            &MasterList::new(Permutation::identity(1))
        ));
    }

    #[test]
    fn pareto_checks() {
        let m = lower_quota_market();
        for order in [[0, 1, 2, 3], [2, 3, 0, 1], [3, 1, 2, 0]] {
            let mu = run_priolq(&m, &Permutation::new(order.to_vec()).unwrap()).unwrap();
            assert!(is_mqc_efficient(&mu, &m).unwrap());
        }
        // two students stuck with each other's favourite
        let swap = Market::from_names(
            &["a", "b"],
            vec![int(1), int(1)],
            vec![Some(int(1)), Some(int(1))],
            &[&["a", "b"], &["b", "a"]],
        )
        .unwrap();
        let bad = DeterministicAssignment::new(vec![1, 0], 2).unwrap();
        assert_eq!(
            pareto_improvement(&bad, &swap).unwrap(),
            Some(DeterministicAssignment::new(vec![0, 1], 2).unwrap())
        );
        // only one feasible assignment shape with aligned preferences
        let forced = Market::from_names(
            &["a", "b"],
            vec![int(1), int(1)],
            vec![Some(int(1)), Some(int(1))],
            &[&["a", "b"], &["a", "b"]],
        )
        .unwrap();
        let mu = DeterministicAssignment::new(vec![1, 0], 2).unwrap();
        assert!(is_mqc_efficient(&mu, &forced).unwrap());
    }
}
