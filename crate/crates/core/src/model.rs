//! Markets, preference profiles and assignment matrices.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, from_usize, is_integral, Rational};

/// Strict, complete rankings of all projects, one per student.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreferenceProfile {
    rankings: Vec<Vec<usize>>,
    // positions[i][p] = rank of project p for student i (0 = best)
    positions: Vec<Vec<usize>>,
    num_projects: usize,
}

impl PreferenceProfile {
    /// Each ranking lists project indices from most to least preferred and must be a
    /// permutation of `0..num_projects`.
    pub fn new(rankings: Vec<Vec<usize>>, num_projects: usize) -> Result<Self> {
        let mut positions = Vec::with_capacity(rankings.len());
        for (i, ranking) in rankings.iter().enumerate() {
            positions.push(ranking_positions(ranking, num_projects).ok_or_else(|| {
                Error::InvalidMarket(format!(
                    "student {} does not rank each of the {num_projects} projects exactly once",
                    i + 1
                ))
            })?);
        }
        Ok(Self {
            rankings,
            positions,
            num_projects,
        })
    }

    pub fn num_students(&self) -> usize {
        self.rankings.len()
    }

    pub fn num_projects(&self) -> usize {
        self.num_projects
    }

    pub fn ranking(&self, student: usize) -> &[usize] {
        &self.rankings[student]
    }

    pub fn rankings(&self) -> &[Vec<usize>] {
        &self.rankings
    }

    /// Position of `project` in the student's ranking (0 is the top choice).
    pub fn rank(&self, student: usize, project: usize) -> usize {
        self.positions[student][project]
    }

    /// True iff `student` strictly prefers `p` to `q`.
    pub fn prefers(&self, student: usize, p: usize, q: usize) -> bool {
        self.positions[student][p] < self.positions[student][q]
    }

    /// The student's most preferred project in `menu`.
    pub fn choice<I>(&self, student: usize, menu: I) -> Result<usize>
    where
        I: IntoIterator<Item = usize>,
    {
        menu.into_iter()
            .min_by_key(|&p| self.positions[student][p])
            .ok_or(Error::EmptyMenu)
    }

    /// The same profile with one student's report replaced.
    pub fn with_report(&self, student: usize, ranking: Vec<usize>) -> Result<Self> {
        let positions = ranking_positions(&ranking, self.num_projects).ok_or_else(|| {
            Error::InvalidArgument("misreport is not a permutation of the projects".into())
        })?;
        let mut out = self.clone();
        out.rankings[student] = ranking;
        out.positions[student] = positions;
        Ok(out)
    }
}

fn ranking_positions(ranking: &[usize], k: usize) -> Option<Vec<usize>> {
    if ranking.len() != k {
        return None;
    }
    let mut positions = vec![usize::MAX; k];
    for (pos, &p) in ranking.iter().enumerate() {
        if p >= k || positions[p] != usize::MAX {
            return None;
        }
        positions[p] = pos;
    }
    Some(positions)
}

/// A market: students with strict preferences and projects with lower and upper quotas.
///
/// Unbounded upper quotas are stored as `n` (the number of students) and remembered
/// as unbounded for serialization and cloning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Market {
    names: Vec<String>,
    lower: Vec<Rational>,
    upper: Vec<Rational>,
    unbounded: Vec<bool>,
    profile: PreferenceProfile,
}

impl Market {
    pub fn new(
        names: Vec<String>,
        lower: Vec<Rational>,
        upper: Vec<Option<Rational>>,
        profile: PreferenceProfile,
    ) -> Result<Self> {
        let k = names.len();
        let n = profile.num_students();
        if k == 0 {
            return Err(Error::InvalidMarket("no projects".into()));
        }
        if n == 0 {
            return Err(Error::InvalidMarket("no students".into()));
        }
        if lower.len() != k || upper.len() != k {
            return Err(Error::DimensionMismatch {
                expected: format!("{k} quotas"),
                found: format!("{} lower, {} upper", lower.len(), upper.len()),
            });
        }
        if profile.num_projects() != k {
            return Err(Error::DimensionMismatch {
                expected: format!("rankings over {k} projects"),
                found: format!("rankings over {} projects", profile.num_projects()),
            });
        }
        let mut seen = HashMap::new();
        for (p, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), p).is_some() {
                return Err(Error::InvalidMarket(format!(
                    "duplicate project name {name:?}"
                )));
            }
        }
        let n_rat = from_usize(n);
        let unbounded: Vec<bool> = upper.iter().map(Option::is_none).collect();
        let upper: Vec<Rational> = upper
            .into_iter()
            .map(|u| u.unwrap_or_else(|| n_rat.clone()))
            .collect();
        for p in 0..k {
            if lower[p].is_negative() {
                return Err(Error::InvalidMarket(format!(
                    "lower quota of {} is negative",
                    names[p]
                )));
            }
            if lower[p] > upper[p] {
                return Err(Error::InvalidMarket(format!(
                    "l({0}) = {1} exceeds u({0}) = {2}",
                    names[p],
                    format_rational(&lower[p]),
                    format_rational(&upper[p])
                )));
            }
        }
        let sum_lower: Rational = lower.iter().sum();
        let sum_upper: Rational = upper.iter().sum();
        if sum_lower > n_rat || n_rat > sum_upper {
            return Err(Error::InvalidMarket(format!(
                "feasibility requires sum of lower quotas <= n <= sum of upper quotas, \
                 got {} <= {n} <= {}",
                format_rational(&sum_lower),
                format_rational(&sum_upper)
            )));
        }
        Ok(Self {
            names,
            lower,
            upper,
            unbounded,
            profile,
        })
    }

    /// Convenience constructor from project names and rankings given as names.
    pub fn from_names(
        names: &[&str],
        lower: Vec<Rational>,
        upper: Vec<Option<Rational>>,
        rankings: &[&[&str]],
    ) -> Result<Self> {
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let rankings = rankings
            .iter()
            .map(|r| {
                r.iter()
                    .map(|name| {
                        index.get(name).copied().ok_or_else(|| {
                            Error::InvalidMarket(format!("unknown project {name:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let profile = PreferenceProfile::new(rankings, names.len())?;
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            lower,
            upper,
            profile,
        )
    }

    pub fn num_students(&self) -> usize {
        self.profile.num_students()
    }

    pub fn num_projects(&self) -> usize {
        self.names.len()
    }

    pub fn profile(&self) -> &PreferenceProfile {
        &self.profile
    }

    pub fn project_names(&self) -> &[String] {
        &self.names
    }

    pub fn project_name(&self, p: usize) -> &str {
        &self.names[p]
    }

    pub fn project_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn lower(&self, p: usize) -> &Rational {
        &self.lower[p]
    }

    pub fn upper(&self, p: usize) -> &Rational {
        &self.upper[p]
    }

    pub fn lower_quotas(&self) -> &[Rational] {
        &self.lower
    }

    pub fn upper_quotas(&self) -> &[Rational] {
        &self.upper
    }

    pub fn is_upper_unbounded(&self, p: usize) -> bool {
        self.unbounded[p]
    }

    /// Upper quotas as given at construction (`None` = unbounded).
    pub fn declared_uppers(&self) -> Vec<Option<Rational>> {
        self.upper
            .iter()
            .zip(&self.unbounded)
            .map(|(u, &unb)| if unb { None } else { Some(u.clone()) })
            .collect()
    }

    /// True iff every lower and upper quota is an integer.
    pub fn has_integer_quotas(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(is_integral)
    }

    pub fn choice<I>(&self, student: usize, menu: I) -> Result<usize>
    where
        I: IntoIterator<Item = usize>,
    {
        self.profile.choice(student, menu)
    }

    /// Same projects and quotas with a different preference profile of the same size.
    pub fn with_profile(&self, profile: PreferenceProfile) -> Result<Self> {
        if profile.num_students() != self.num_students() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} students", self.num_students()),
                found: format!("{} students", profile.num_students()),
            });
        }
        Self::new(
            self.names.clone(),
            self.lower.clone(),
            self.declared_uppers(),
            profile,
        )
    }
}

/// One project per student.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicAssignment {
    choices: Vec<usize>,
    num_projects: usize,
}

impl DeterministicAssignment {
    pub fn new(choices: Vec<usize>, num_projects: usize) -> Result<Self> {
        if let Some(&bad) = choices.iter().find(|&&p| p >= num_projects) {
            return Err(Error::DimensionMismatch {
                expected: format!("project index < {num_projects}"),
                found: bad.to_string(),
            });
        }
        Ok(Self {
            choices,
            num_projects,
        })
    }

    pub fn project_of(&self, student: usize) -> usize {
        self.choices[student]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn num_students(&self) -> usize {
        self.choices.len()
    }

    pub fn num_projects(&self) -> usize {
        self.num_projects
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_projects];
        for &p in &self.choices {
            counts[p] += 1;
        }
        counts
    }

    pub fn to_random(&self) -> RandomAssignment {
        let rows = self
            .choices
            .iter()
            .map(|&c| {
                (0..self.num_projects)
                    .map(|p| {
                        if p == c {
                            Rational::one()
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        RandomAssignment { rows }
    }

    /// Reads a zero-one matrix with exactly one 1 per row.
    pub fn from_matrix(matrix: &RandomAssignment) -> Result<Self> {
        let mut choices = Vec::with_capacity(matrix.num_students());
        for (i, row) in matrix.rows().iter().enumerate() {
            let ones: Vec<usize> = (0..row.len()).filter(|&p| row[p].is_one()).collect();
            let zeros = row.iter().filter(|x| x.is_zero()).count();
            if ones.len() != 1 || zeros + 1 != row.len() {
                return Err(Error::Infeasible(format!(
                    "row {} is not a zero-one row with a single 1",
                    i + 1
                )));
            }
            choices.push(ones[0]);
        }
        Self::new(choices, matrix.num_projects())
    }
}

/// An `n × k` matrix of exact probabilities. Quota feasibility is checked with
/// [`is_feasible`]; every mechanism in this crate returns feasible matrices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomAssignment {
    rows: Vec<Vec<Rational>>,
}

impl RandomAssignment {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let k = first.len();
            if let Some(bad) = rows.iter().find(|r| r.len() != k) {
                return Err(Error::DimensionMismatch {
                    expected: format!("rows of length {k}"),
                    found: format!("row of length {}", bad.len()),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            rows: vec![vec![Rational::zero(); k]; n],
        }
    }

    pub fn num_students(&self) -> usize {
        self.rows.len()
    }

    pub fn num_projects(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn row(&self, student: usize) -> &[Rational] {
        &self.rows[student]
    }

    pub fn get(&self, student: usize, project: usize) -> &Rational {
        &self.rows[student][project]
    }

    pub fn get_mut(&mut self, student: usize, project: usize) -> &mut Rational {
        &mut self.rows[student][project]
    }

    pub fn column_sum(&self, project: usize) -> Rational {
        self.rows.iter().map(|r| &r[project]).sum()
    }

    pub fn column_sums(&self) -> Vec<Rational> {
        (0..self.num_projects())
            .map(|p| self.column_sum(p))
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.rows.iter().flatten().all(is_integral)
    }

    pub fn into_rows(self) -> Vec<Vec<Rational>> {
        self.rows
    }
}

impl From<&DeterministicAssignment> for RandomAssignment {
    fn from(x: &DeterministicAssignment) -> Self {
        x.to_random()
    }
}

impl fmt::Display for RandomAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(format_rational).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

/// A single broken feasibility constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EntryOutOfRange {
        student: usize,
        project: String,
        value: Rational,
    },
    RowSum {
        student: usize,
        sum: Rational,
    },
    BelowLower {
        project: String,
        sum: Rational,
        lower: Rational,
    },
    AboveUpper {
        project: String,
        sum: Rational,
        upper: Rational,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EntryOutOfRange {
                student,
                project,
                value,
            } => write!(
                f,
                "entry ({}, {project}) = {} outside [0,1]",
                student + 1,
                format_rational(value)
            ),
            Violation::RowSum { student, sum } => {
                write!(f, "row {} sum {} != 1", student + 1, format_rational(sum))
            }
            Violation::BelowLower {
                project,
                sum,
                lower,
            } => write!(
                f,
                "column {project} sum {} < l({project})={}",
                format_rational(sum),
                format_rational(lower)
            ),
            Violation::AboveUpper {
                project,
                sum,
                upper,
            } => write!(
                f,
                "column {project} sum {} > u({project})={}",
                format_rational(sum),
                format_rational(upper)
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks entry bounds, unit row sums and every column against `[l(p), u(p)]`.
pub fn is_feasible(r: &RandomAssignment, market: &Market) -> Result<FeasibilityReport> {
    let (n, k) = (market.num_students(), market.num_projects());
    if r.num_students() != n || (n > 0 && r.num_projects() != k) {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{k}"),
            found: format!("{}x{}", r.num_students(), r.num_projects()),
        });
    }
    let mut violations = Vec::new();
    for (i, row) in r.rows().iter().enumerate() {
        for (p, x) in row.iter().enumerate() {
            if x.is_negative() || *x > Rational::one() {
                violations.push(Violation::EntryOutOfRange {
                    student: i,
                    project: market.project_name(p).to_string(),
                    value: x.clone(),
                });
            }
        }
        let sum: Rational = row.iter().sum();
        if !sum.is_one() {
            violations.push(Violation::RowSum { student: i, sum });
        }
    }
    for p in 0..k {
        let sum = r.column_sum(p);
        if sum < *market.lower(p) {
            violations.push(Violation::BelowLower {
                project: market.project_name(p).to_string(),
                sum,
                lower: market.lower(p).clone(),
            });
        } else if sum > *market.upper(p) {
            violations.push(Violation::AboveUpper {
                project: market.project_name(p).to_string(),
                sum,
                upper: market.upper(p).clone(),
            });
        }
    }
    Ok(FeasibilityReport { violations })
}

/// A bijection on `0..n`, read as a processing order: `order[k]` is the k-th student.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "{order:?} is not a permutation of 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// Parses a comma-separated list of 1-based student numbers, e.g. `"3,4,1,2"`.
    pub fn parse_one_based(text: &str) -> Result<Self> {
        let order = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1)
                    .map(|v| v - 1)
                    .ok_or_else(|| Error::Parse(format!("bad student number {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Position of each student in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (k, &i) in self.0.iter().enumerate() {
            pos[i] = k;
        }
        pos
    }
}

/// Exogenous priority ordering of students, highest priority first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterList {
    order: Permutation,
    positions: Vec<usize>,
}

impl MasterList {
    pub fn new(order: Permutation) -> Self {
        let positions = order.positions();
        Self { order, positions }
    }

    pub fn order(&self) -> &Permutation {
        &self.order
    }

    /// True iff `a` comes before `b` on the list.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.positions[a] < self.positions[b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn zeta() -> Market {
        Market::from_names(
            &["a", "b", "c"],
            vec![int(0), int(2), int(1)],
            vec![None, None, None],
            &[
                &["a", "b", "c"],
                &["a", "c", "b"],
                &["b", "a", "c"],
                &["b", "a", "c"],
            ],
        )
        .unwrap()
    }

    fn example_eating() -> Market {
        Market::from_names(
            &["a", "b", "c"],
            vec![int(1), int(1), int(2)],
            vec![Some(int(2)), Some(int(2)), Some(int(2))],
            &[
                &["a", "b", "c"],
                &["a", "b", "c"],
                &["b", "a", "c"],
                &["b", "a", "c"],
                &["c", "a", "b"],
            ],
        )
        .unwrap()
    }

    #[test]
    fn choice_examples() {
        let m = example_eating();
        assert_eq!(m.choice(4, [0, 1, 2]).unwrap(), 2);
        assert_eq!(m.choice(0, [1]).unwrap(), 1);
        assert_eq!(zeta().choice(1, [1, 2]).unwrap(), 2);
        assert_eq!(m.choice(0, []), Err(Error::EmptyMenu));
    }

    #[test]
    fn unbounded_upper_becomes_n() {
        let m = zeta();
        assert_eq!(*m.upper(0), int(4));
        assert!(m.is_upper_unbounded(0));
        assert!(m.has_integer_quotas());
    }

    #[test]
    fn rejects_infeasible_quotas() {
        let err = Market::from_names(
            &["a", "b"],
            vec![int(0), int(3)],
            vec![None, None],
            &[&["a", "b"], &["b", "a"]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMarket(_)));
        let err = Market::from_names(
            &["a", "b"],
            vec![int(0), int(0)],
            vec![Some(int(0)), Some(int(1))],
            &[&["a", "b"], &["b", "a"]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMarket(_)));
        assert!(Market::from_names(&["a"], vec![int(2)], vec![Some(int(1))], &[&["a"]]).is_err());
    }

    #[test]
    fn rejects_incomplete_rankings() {
        assert!(PreferenceProfile::new(vec![vec![0, 0, 1]], 3).is_err());
        assert!(PreferenceProfile::new(vec![vec![0, 1]], 3).is_err());
    }

    #[test]
    fn rplq_zeta_matrix_is_feasible() {
        let r = RandomAssignment::new(vec![
            vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)],
            vec![ratio(1, 2), int(0), ratio(1, 2)],
            vec![int(0), ratio(7, 8), ratio(1, 8)],
            vec![int(0), ratio(7, 8), ratio(1, 8)],
        ])
        .unwrap();
        assert!(is_feasible(&r, &zeta()).unwrap().is_feasible());
    }

    #[test]
    fn permutation_matrix_is_feasible() {
        let m = Market::from_names(
            &["a", "b", "c"],
            vec![int(0); 3],
            vec![Some(int(1)); 3],
            &[&["a", "b", "c"], &["b", "c", "a"], &["c", "a", "b"]],
        )
        .unwrap();
        let x = DeterministicAssignment::new(vec![0, 1, 2], 3).unwrap();
        assert!(is_feasible(&x.to_random(), &m).unwrap().is_feasible());
    }

    #[test]
    fn gamma_assignment_violates_zeta_quota_on_c() {
        let x = DeterministicAssignment::new(vec![0, 0, 1, 1], 3).unwrap();
        let report = is_feasible(&x.to_random(), &zeta()).unwrap();
        assert!(!report.is_feasible());
        let texts: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        assert_eq!(texts, vec!["column c sum 0 < l(c)=1".to_string()]);
    }

    #[test]
    fn feasibility_reports_rows_and_entries() {
        let r = RandomAssignment::new(vec![
            vec![ratio(3, 2), ratio(-1, 2), int(0)],
            vec![int(0), int(0), ratio(1, 2)],
            vec![int(0), int(1), int(0)],
            vec![int(0), int(1), int(0)],
        ])
        .unwrap();
        let report = is_feasible(&r, &zeta()).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RowSum { student: 1, .. })));
        assert_eq!(
            report
                .violations
                .iter()
                .filter(|v| matches!(v, Violation::EntryOutOfRange { .. }))
                .count(),
            2
        );
        assert!(is_feasible(&RandomAssignment::zeros(2, 3), &zeta()).is_err());
    }

    #[test]
    fn permutation_parsing() {
        let p = Permutation::parse_one_based("3,4,1,2").unwrap();
        assert_eq!(p.as_slice(), &[2, 3, 0, 1]);
        assert_eq!(p.positions(), vec![2, 3, 0, 1]);
        assert!(Permutation::parse_one_based("1,1").is_err());
        assert!(Permutation::parse_one_based("0,1").is_err());
    }

    #[test]
    fn deterministic_round_trip_through_matrix() {
        let x = DeterministicAssignment::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(
            DeterministicAssignment::from_matrix(&x.to_random()).unwrap(),
            x
        );
        let bad = RandomAssignment::new(vec![vec![ratio(1, 2), ratio(1, 2)]]).unwrap();
        assert!(DeterministicAssignment::from_matrix(&bad).is_err());
    }
}
