//! Misreport search, strategy-proofness verification and the scripted
//! impossibility scenario for non-integer quotas.

use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::axioms::{is_envy_free, is_ordinally_efficient, sd_dominates};
use crate::eating::run_pslq;
use crate::error::{Error, Result};
use crate::instances::fractional_quota_market;
use crate::mechanisms::{run_priolq, Mechanism, EXACT_ENUMERATION_LIMIT};
use crate::model::{DeterministicAssignment, Market, Permutation, RandomAssignment};
use crate::rational::{format_rational, int, ratio, Rational};

/// Largest number of projects for which all `k!` reports are enumerated.
pub const MISREPORT_PROJECT_LIMIT: usize = 7;

/// Largest number of projects for the pairwise coalition search (`(k!)^2` joint reports per pair).
pub const COALITION_PROJECT_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManipulationRelation {
    /// Some misreport strictly sd-dominates the truthful row.
    StrictSdGain,
    /// No strict gain, but some misreport row is incomparable with the truthful row.
    IncomparableChange,
    /// The truthful row weakly sd-dominates every misreport row.
    None,
}

impl fmt::Display for ManipulationRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManipulationRelation::StrictSdGain => "strict-sd-gain",
            ManipulationRelation::IncomparableChange => "incomparable-change",
            ManipulationRelation::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManipulationReport {
    pub mechanism: Mechanism,
    pub student: usize,
    pub truthful_ranking: Vec<usize>,
    pub truthful_row: Vec<Rational>,
    /// The first strictly dominating misreport, else the first incomparable one.
    pub misreport: Option<Vec<usize>>,
    pub misreport_row: Option<Vec<Rational>>,
    pub relation: ManipulationRelation,
    pub misreports_checked: usize,
    /// Misreports whose row differs from the truthful row.
    pub changed_outcomes: usize,
}

impl ManipulationReport {
    /// Whether truth-telling weakly sd-dominates every misreport.
    pub fn truthful_dominates_all(&self) -> bool {
        self.relation == ManipulationRelation::None
    }
}

fn check_sizes(mechanism: Mechanism, market: &Market) -> Result<()> {
    let k = market.num_projects();
    if k > MISREPORT_PROJECT_LIMIT {
        return Err(Error::TooLarge(format!(
            "{k} projects exceed the misreport enumeration limit {MISREPORT_PROJECT_LIMIT}"
        )));
    }
    let n = market.num_students();
    if mechanism == Mechanism::RplqExact && n > EXACT_ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "{n} students exceed the exact lottery limit {EXACT_ENUMERATION_LIMIT}"
        )));
    }
    Ok(())
}

fn search_with_truthful(
    mechanism: Mechanism,
    market: &Market,
    student: usize,
    truthful: &RandomAssignment,
) -> Result<ManipulationReport> {
    let profile = market.profile();
    let ranking = profile.ranking(student).to_vec();
    let truthful_row = truthful.row(student).to_vec();
    let mut strict = None;
    let mut incomparable = None;
    let mut checked = 0;
    let mut changed = 0;
    for report in (0..market.num_projects()).permutations(market.num_projects()) {
        if report == ranking {
            continue;
        }
        let deviated = market.with_profile(profile.with_report(student, report.clone())?)?;
        let row = mechanism.run(&deviated)?.row(student).to_vec();
        checked += 1;
        if row == truthful_row {
            continue;
        }
        changed += 1;
        if strict.is_none() && sd_dominates(&row, &truthful_row, &ranking, true) {
            strict = Some((report, row));
        } else if incomparable.is_none() && !sd_dominates(&truthful_row, &row, &ranking, false) {
            incomparable = Some((report, row));
        }
    }
    let (relation, found) = match (strict, incomparable) {
        (Some(s), _) => (ManipulationRelation::StrictSdGain, Some(s)),
        (None, Some(c)) => (ManipulationRelation::IncomparableChange, Some(c)),
        (None, None) => (ManipulationRelation::None, None),
    };
    let (misreport, misreport_row) = found.map_or((None, None), |(r, row)| (Some(r), Some(row)));
    Ok(ManipulationReport {
        mechanism,
        student,
        truthful_ranking: ranking,
        truthful_row,
        misreport,
        misreport_row,
        relation,
        misreports_checked: checked,
        changed_outcomes: changed,
    })
}

/// Runs `mechanism` under every misreport of `student` and classifies the best
/// deviation against the truthful row.
pub fn search_manipulation(
    mechanism: Mechanism,
    market: &Market,
    student: usize,
) -> Result<ManipulationReport> {
    if student >= market.num_students() {
        return Err(Error::InvalidArgument(format!(
            "student {} out of range 1..={}",
            student + 1,
            market.num_students()
        )));
    }
    check_sizes(mechanism, market)?;
    let truthful = mechanism.run(market)?;
    search_with_truthful(mechanism, market, student, &truthful)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpMode {
    /// No misreport strictly sd-dominates truth.
    Weak,
    /// Truth weakly sd-dominates every misreport.
    Strong,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpVerification {
    pub mode: SpMode,
    pub holds: bool,
    pub counterexample: Option<ManipulationReport>,
    pub reports: Vec<ManipulationReport>,
}

/// Checks (weak or strong) strategy-proofness of `mechanism` on `market` for every
/// student and every misreport.
pub fn verify_weak_sp(
    mechanism: Mechanism,
    market: &Market,
    mode: SpMode,
) -> Result<SpVerification> {
    check_sizes(mechanism, market)?;
    let truthful = mechanism.run(market)?;
    let reports = (0..market.num_students())
        .map(|i| search_with_truthful(mechanism, market, i, &truthful))
        .collect::<Result<Vec<_>>>()?;
    let fails = |r: &ManipulationReport| match mode {
        SpMode::Weak => r.relation == ManipulationRelation::StrictSdGain,
        SpMode::Strong => !r.truthful_dominates_all(),
    };
    let counterexample = reports.iter().find(|r| fails(r)).cloned();
    Ok(SpVerification {
        mode,
        holds: counterexample.is_none(),
        counterexample,
        reports,
    })
}

/// A joint misreport by two students under a fixed priority order that leaves both
/// weakly better off and one strictly better off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionWitness {
    pub students: (usize, usize),
    pub reports: (Vec<usize>, Vec<usize>),
    pub truthful: DeterministicAssignment,
    pub manipulated: DeterministicAssignment,
}

/// Searches all pairs of students and all joint misreports for a profitable
/// coalition deviation under the priority mechanism with `order`.
pub fn find_priority_coalition_manipulation(
    market: &Market,
    order: &Permutation,
) -> Result<Option<CoalitionWitness>> {
    let k = market.num_projects();
    if k > COALITION_PROJECT_LIMIT {
        return Err(Error::TooLarge(format!(
            "{k} projects exceed the coalition search limit {COALITION_PROJECT_LIMIT}"
        )));
    }
    let profile = market.profile();
    let truthful = run_priolq(market, order)?;
    let reports: Vec<Vec<usize>> = (0..k).permutations(k).collect();
    for (i, j) in (0..market.num_students()).tuple_combinations() {
        for ri in &reports {
            let with_i = profile.with_report(i, ri.clone())?;
            for rj in &reports {
                if ri.as_slice() == profile.ranking(i) && rj.as_slice() == profile.ranking(j) {
                    continue;
                }
                let deviated = market.with_profile(with_i.with_report(j, rj.clone())?)?;
                let mu = run_priolq(&deviated, order)?;
                let rank = |s: usize, m: &DeterministicAssignment| profile.rank(s, m.project_of(s));
                let (ti, tj) = (rank(i, &truthful), rank(j, &truthful));
                let (mi, mj) = (rank(i, &mu), rank(j, &mu));
                if mi <= ti && mj <= tj && (mi < ti || mj < tj) {
                    return Ok(Some(CoalitionWitness {
                        students: (i, j),
                        reports: (ri.clone(), rj.clone()),
                        truthful,
                        manipulated: mu,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// One member of the one-parameter family of efficient, envy-free assignments at the
/// truthful profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyMember {
    pub t: Rational,
    pub assignment: RandomAssignment,
    pub ordinally_efficient: bool,
    pub envy_free: bool,
}

/// The three-profile argument showing that ordinal efficiency, envy-freeness and weak
/// strategy-proofness are incompatible once quotas may be fractional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpossibilityReport {
    pub market: Market,
    /// Rankings of the truthful, student-1-deviation and student-2-deviation profiles.
    pub profiles: [Vec<Vec<usize>>; 3],
    pub family: Vec<FamilyMember>,
    pub grid_denominator: i64,
    pub r_prime: RandomAssignment,
    pub r_prime_candidates: usize,
    pub r_double_prime: RandomAssignment,
    pub r_double_prime_candidates: usize,
    pub student1_dominates_family: bool,
    pub student2_dominates_family: bool,
    pub t_from_student1: Rational,
    pub t_from_student2: Rational,
}

impl ImpossibilityReport {
    pub fn family_is_efficient_and_envy_free(&self) -> bool {
        self.family
            .iter()
            .all(|m| m.ordinally_efficient && m.envy_free)
    }

    pub fn is_contradiction(&self) -> bool {
        self.family_is_efficient_and_envy_free()
            && self.r_prime_candidates == 1
            && self.r_double_prime_candidates == 1
            && self.student1_dominates_family
            && self.student2_dominates_family
            && self.t_from_student1 != self.t_from_student2
    }
}

/// The family member with `r_1b = t`.
pub fn family_member(t: &Rational) -> RandomAssignment {
    let third = ratio(1, 3);
    let two_thirds = ratio(2, 3);
    RandomAssignment::new(vec![
        vec![two_thirds.clone(), t.clone(), &third - t],
        vec![int(0), &two_thirds - t, &third + t],
    ])
    .expect("rectangular")
}

/// All efficient, envy-free assignments of the two-student market whose entries lie
/// on the `1/d` grid.
fn efficient_envy_free_on_grid(market: &Market, d: i64) -> Result<Vec<RandomAssignment>> {
    let q = |x: i64| ratio(x, d);
    let two_thirds = ratio(2, 3);
    let mut found = Vec::new();
    for a in 0..=d {
        for b in 0..=d - a {
            let row1 = vec![q(a), q(b), q(d - a - b)];
            // columns b and c sum to 2/3 and rows to one
            let row2 = vec![
                &two_thirds - &row1[0],
                &two_thirds - &row1[1],
                &two_thirds - &row1[2],
            ];
            if row2.iter().any(|x| *x < int(0) || *x > int(1)) {
                continue;
            }
            let r = RandomAssignment::new(vec![row1, row2])?;
            if crate::model::is_feasible(&r, market)?.is_feasible()
                && is_envy_free(&r, market.profile())
                && is_ordinally_efficient(&r, market)?.is_efficient()
            {
                found.push(r);
            }
        }
    }
    Ok(found)
}

fn unique_on_grid(market: &Market, d: i64) -> Result<(RandomAssignment, usize)> {
    let candidates = efficient_envy_free_on_grid(market, d)?;
    let count = candidates.len();
    let pslq = run_pslq(market)?;
    if !candidates.contains(&pslq) {
        return Err(Error::Infeasible(
            "eating outcome is not among the efficient envy-free candidates".into(),
        ));
    }
    Ok((pslq, count))
}

/// Builds the impossibility certificate on the built-in fractional-quota market.
pub fn impossibility_scenario() -> Result<ImpossibilityReport> {
    const GRID: i64 = 12;
    let market = fractional_quota_market();
    let truthful = market.profile().clone();
    let (a, b, c) = (0, 1, 2);

    let family = (0..=GRID / 3)
        .map(|j| {
            let t = ratio(j, GRID);
            let assignment = family_member(&t);
            Ok(FamilyMember {
                ordinally_efficient: is_ordinally_efficient(&assignment, &market)?.is_efficient(),
                envy_free: is_envy_free(&assignment, &truthful),
                t,
                assignment,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let prime = market.with_profile(truthful.with_report(0, vec![b, a, c])?)?;
    let double_prime = market.with_profile(truthful.with_report(1, vec![b, a, c])?)?;
    let (r_prime, r_prime_candidates) = unique_on_grid(&prime, GRID)?;
    let (r_double_prime, r_double_prime_candidates) = unique_on_grid(&double_prime, GRID)?;

    let student1_dominates_family = family.iter().all(|m| {
        sd_dominates(
            r_prime.row(0),
            m.assignment.row(0),
            truthful.ranking(0),
            false,
        )
    });
    let student2_dominates_family = family.iter().all(|m| {
        sd_dominates(
            r_double_prime.row(1),
            m.assignment.row(1),
            truthful.ranking(1),
            false,
        )
    });
    // R^t_1 = R'_1 pins t = r'_1b; R^t_2 = R''_2 pins t = 2/3 − r''_2b
    let t_from_student1 = r_prime.get(0, b).clone();
    let t_from_student2 = ratio(2, 3) - r_double_prime.get(1, b);

    Ok(ImpossibilityReport {
        profiles: [
            truthful.rankings().to_vec(),
            prime.profile().rankings().to_vec(),
            double_prime.profile().rankings().to_vec(),
        ],
        market,
        family,
        grid_denominator: GRID,
        r_prime,
        r_prime_candidates,
        r_double_prime,
        r_double_prime_candidates,
        student1_dominates_family,
        student2_dominates_family,
        t_from_student1,
        t_from_student2,
    })
}

fn fmt_row(row: &[Rational]) -> String {
    format!("({})", row.iter().map(format_rational).join(", "))
}

fn fmt_matrix(f: &mut fmt::Formatter<'_>, r: &RandomAssignment) -> fmt::Result {
    for (i, row) in r.rows().iter().enumerate() {
        writeln!(f, "    student {}: {}", i + 1, fmt_row(row))?;
    }
    Ok(())
}

impl fmt::Display for ImpossibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.market.project_names();
        let profile = |rankings: &[Vec<usize>]| {
            rankings
                .iter()
                .map(|r| r.iter().map(|&p| names[p].as_str()).join(">"))
                .join(", ")
        };
        let quotas = (0..self.market.num_projects())
            .map(|p| {
                let upper = if self.market.is_upper_unbounded(p) {
                    "n".to_string()
                } else {
                    format_rational(self.market.upper(p))
                };
                format!(
                    "{}: [{}, {}]",
                    names[p],
                    format_rational(self.market.lower(p)),
                    upper
                )
            })
            .join("; ");
        let yes = |b: bool| if b { "yes" } else { "no" };
        writeln!(f, "impossibility certificate")?;
        writeln!(
            f,
            "  market: n = {}, quotas {}",
            self.market.num_students(),
            quotas
        )?;
        writeln!(f, "  truthful profile: {}", profile(&self.profiles[0]))?;
        writeln!(
            f,
            "step 1: efficient envy-free family at the truthful profile"
        )?;
        writeln!(
            f,
            "  R^t rows: (2/3, t, 1/3-t) and (0, 2/3-t, 1/3+t), t in [0, 1/3]"
        )?;
        writeln!(f, "  (row 1 is (2/3, t, 1/3-t) so that it sums to one)")?;
        for m in &self.family {
            writeln!(
                f,
                "  t = {:<4} ordinally efficient: {:<3} envy-free: {}",
                format_rational(&m.t),
                yes(m.ordinally_efficient),
                yes(m.envy_free)
            )?;
        }
        writeln!(
            f,
            "step 2: student 1 reports b>a>c, profile {}",
            profile(&self.profiles[1])
        )?;
        writeln!(
            f,
            "  unique efficient envy-free assignment on the 1/{} grid ({} candidate):",
            self.grid_denominator, self.r_prime_candidates
        )?;
        fmt_matrix(f, &self.r_prime)?;
        writeln!(
            f,
            "  R'_1 weakly sd-dominates R^t_1 for every t: {}",
            yes(self.student1_dominates_family)
        )?;
        writeln!(
            f,
            "step 3: student 2 reports b>a>c, profile {}",
            profile(&self.profiles[2])
        )?;
        writeln!(
            f,
            "  unique efficient envy-free assignment on the 1/{} grid ({} candidate):",
            self.grid_denominator, self.r_double_prime_candidates
        )?;
        fmt_matrix(f, &self.r_double_prime)?;
        writeln!(
            f,
            "  R''_2 weakly sd-dominates R^t_2 for every t: {}",
            yes(self.student2_dominates_family)
        )?;
        writeln!(f, "step 4: weak strategy-proofness forces equality")?;
        writeln!(
            f,
            "  R^t_1 = R'_1  requires t* = {}",
            format_rational(&self.t_from_student1)
        )?;
        writeln!(
            f,
            "  R^t_2 = R''_2 requires t* = {}",
            format_rational(&self.t_from_student2)
        )?;
        if self.is_contradiction() {
            writeln!(
                f,
                "contradiction: no mechanism is ordinally efficient, envy-free and weakly strategy-proof here"
            )
        } else {
            writeln!(f, "no contradiction derived")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::*;

    fn row(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    #[test]
    fn pslq_student_three_incomparable() {
        let report = search_manipulation(Mechanism::Pslq, &lower_quota_market(), 2).unwrap();
        assert_eq!(report.relation, ManipulationRelation::IncomparableChange);
        assert_eq!(report.misreport, Some(vec![0, 1, 2]));
        assert_eq!(report.misreport_row, Some(row(&[(1, 3), (5, 9), (1, 9)])));
        assert_eq!(report.truthful_row, row(&[(0, 1), (5, 6), (1, 6)]));
        assert_eq!(report.misreports_checked, 5);
    }

    #[test]
    fn fractional_quotas_admit_strict_gain() {
        let m = fractional_quota_market();
        let report = search_manipulation(Mechanism::Pslq, &m, 0).unwrap();
        assert_eq!(report.relation, ManipulationRelation::StrictSdGain);
        assert_eq!(report.misreport, Some(vec![1, 0, 2]));
        assert_eq!(report.truthful_row, row(&[(2, 3), (0, 1), (1, 3)]));
        assert_eq!(report.misreport_row, Some(row(&[(2, 3), (1, 3), (0, 1)])));
        let v = verify_weak_sp(Mechanism::Pslq, &m, SpMode::Weak).unwrap();
        assert!(!v.holds);
        assert_eq!(v.counterexample.unwrap().student, 0);
    }

    #[test]
    fn pslq_weakly_strategy_proof_on_builtins() {
        for m in [
            no_quota_market(),
            lower_quota_market(),
            critical_time_market(),
            chain_market(),
        ] {
            assert!(
                verify_weak_sp(Mechanism::Pslq, &m, SpMode::Weak)
                    .unwrap()
                    .holds
            );
        }
    }

    #[test]
    fn rplq_strongly_strategy_proof_on_builtins() {
        for m in [no_quota_market(), lower_quota_market(), chain_market()] {
            let v = verify_weak_sp(Mechanism::RplqExact, &m, SpMode::Strong).unwrap();
            assert!(v.holds, "{:?}", v.counterexample);
        }
    }

    #[test]
    fn single_project_market_has_no_misreports() {
        let m = Market::from_names(&["a"], vec![int(0)], vec![None], &[&["a"], &["a"]]).unwrap();
        for mech in [Mechanism::Pslq, Mechanism::RplqExact] {
            let v = verify_weak_sp(mech, &m, SpMode::Strong).unwrap();
            assert!(v.holds);
            assert!(v.reports.iter().all(|r| r.misreports_checked == 0));
        }
    }

    #[test]
    fn rejects_bad_student() {
        assert!(matches!(
            search_manipulation(Mechanism::Pslq, &lower_quota_market(), 9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn priority_pairs_cannot_gain() {
        for m in [lower_quota_market(), critical_time_market(), chain_market()] {
            for order in (0..m.num_students()).permutations(m.num_students()).take(6) {
                let order = Permutation::new(order).unwrap();
                assert_eq!(
                    find_priority_coalition_manipulation(&m, &order).unwrap(),
                    None
                );
            }
        }
    }

    #[test]
    fn impossibility_certificate() {
        let report = impossibility_scenario().unwrap();
        assert!(report.family_is_efficient_and_envy_free());
        assert_eq!(report.family.len(), 5);
        assert_eq!(
            report.r_prime.row(0),
            row(&[(2, 3), (1, 3), (0, 1)]).as_slice()
        );
        assert_eq!(
            report.r_prime.row(1),
            row(&[(0, 1), (1, 3), (2, 3)]).as_slice()
        );
        assert_eq!(
            report.r_double_prime.row(0),
            row(&[(2, 3), (0, 1), (1, 3)]).as_slice()
        );
        assert_eq!(
            report.r_double_prime.row(1),
            row(&[(0, 1), (2, 3), (1, 3)]).as_slice()
        );
        assert_eq!(report.t_from_student1, ratio(1, 3));
        assert_eq!(report.t_from_student2, int(0));
        assert!(report.is_contradiction());
    }
}
