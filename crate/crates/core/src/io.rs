//! JSON interchange, text rendering and random market generation.
//!
//! Rationals are written as `"p/q"` strings (`"p"` for integers); on input plain JSON
//! integers are accepted as well.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use itertools::Itertools;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::Lottery;
use crate::eating::{run_pslq_traced, EatingPhase, EatingTrace, EventKind};
use crate::error::{Error, Result};
use crate::model::{DeterministicAssignment, Market, PreferenceProfile, RandomAssignment};
use crate::rational::{format_rational, parse_rational, ratio, to_decimal, Rational};

/// Significant digits in the lossy decimal column of CSV output.
pub const DECIMAL_DIGITS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RationalText {
    Text(String),
    Integer(i64),
}

impl RationalText {
    fn parse(&self, field: &str) -> Result<Rational> {
        match self {
            RationalText::Text(s) => {
                parse_rational(s).map_err(|e| Error::Parse(format!("{field}: {e}")))
            }
            RationalText::Integer(v) => Ok(Rational::from_integer((*v).into())),
        }
    }
}

impl From<&Rational> for RationalText {
    fn from(x: &Rational) -> Self {
        RationalText::Text(format_rational(x))
    }
}

fn json_error(what: &str, e: serde_json::Error) -> Error {
    Error::Parse(format!("{what}: {e}"))
}

fn to_pretty<T: Serialize>(doc: &T) -> String {
    serde_json::to_string_pretty(doc).expect("documents serialize")
}

// ---------------------------------------------------------------- market

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectDoc {
    name: String,
    #[serde(default = "zero_text")]
    lower: RationalText,
    #[serde(default)]
    upper: Option<RationalText>,
}

fn zero_text() -> RationalText {
    RationalText::Integer(0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketDoc {
    projects: Vec<ProjectDoc>,
    preferences: Vec<Vec<String>>,
}

fn project_lookup(names: &[String]) -> HashMap<&str, usize> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect()
}

fn parse_ranking(
    names: &[String],
    lookup: &HashMap<&str, usize>,
    list: &[String],
    field: &str,
) -> Result<Vec<usize>> {
    let mut seen = vec![false; names.len()];
    let mut ranking = Vec::with_capacity(list.len());
    for (pos, name) in list.iter().enumerate() {
        let p = *lookup
            .get(name.as_str())
            .ok_or_else(|| Error::Parse(format!("{field}[{pos}]: unknown project {name:?}")))?;
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Parse(format!(
                "{field}[{pos}]: project {name:?} listed twice"
            )));
        }
        ranking.push(p);
    }
    if let Some(p) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!(
            "{field}: incomplete preference list, missing {:?}",
            names[p]
        )));
    }
    Ok(ranking)
}

pub fn parse_market(text: &str) -> Result<Market> {
    let doc: MarketDoc = serde_json::from_str(text).map_err(|e| json_error("market", e))?;
    let names: Vec<String> = doc.projects.iter().map(|p| p.name.clone()).collect();
    let mut lower = Vec::with_capacity(names.len());
    let mut upper = Vec::with_capacity(names.len());
    for (j, p) in doc.projects.iter().enumerate() {
        lower.push(p.lower.parse(&format!("projects[{j}].lower"))?);
        upper.push(
            p.upper
                .as_ref()
                .map(|u| u.parse(&format!("projects[{j}].upper")))
                .transpose()?,
        );
    }
    let lookup = project_lookup(&names);
    let rankings = doc
        .preferences
        .iter()
        .enumerate()
        .map(|(i, list)| parse_ranking(&names, &lookup, list, &format!("preferences[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if rankings.is_empty() && !names.is_empty() {
        return Err(Error::InvalidMarket("no students".into()));
    }
    let profile = PreferenceProfile::new(rankings, names.len())?;
    Market::new(names, lower, upper, profile)
}

pub fn market_to_json(market: &Market) -> String {
    let names = market.project_names();
    let doc = MarketDoc {
        projects: (0..market.num_projects())
            .map(|p| ProjectDoc {
                name: names[p].clone(),
                lower: market.lower(p).into(),
                upper: (!market.is_upper_unbounded(p)).then(|| market.upper(p).into()),
            })
            .collect(),
        preferences: market
            .profile()
            .rankings()
            .iter()
            .map(|r| r.iter().map(|&p| names[p].clone()).collect())
            .collect(),
    };
    to_pretty(&doc)
}

// ------------------------------------------------------------ assignments

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentDoc {
    projects: Vec<String>,
    matrix: Vec<Vec<RationalText>>,
}

pub fn assignment_to_json(r: &RandomAssignment, names: &[String]) -> String {
    to_pretty(&AssignmentDoc {
        projects: names.to_vec(),
        matrix: r
            .rows()
            .iter()
            .map(|row| row.iter().map(RationalText::from).collect())
            .collect(),
    })
}

/// Parses an assignment document, returning its column names and matrix.
pub fn parse_assignment(text: &str) -> Result<(Vec<String>, RandomAssignment)> {
    let doc: AssignmentDoc = serde_json::from_str(text).map_err(|e| json_error("assignment", e))?;
    let k = doc.projects.len();
    let rows = doc
        .matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != k {
                return Err(Error::Parse(format!(
                    "matrix[{i}]: expected {k} entries, found {}",
                    row.len()
                )));
            }
            row.iter()
                .enumerate()
                .map(|(p, x)| x.parse(&format!("matrix[{i}][{p}]")))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((doc.projects, RandomAssignment::new(rows)?))
}

/// Parses an assignment document and reorders its columns to `market`'s project order.
pub fn parse_assignment_for(text: &str, market: &Market) -> Result<RandomAssignment> {
    let (names, r) = parse_assignment(text)?;
    let columns = column_map(&names, market)?;
    if r.num_students() != market.num_students() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", market.num_students()),
            found: format!("{} rows", r.num_students()),
        });
    }
    let mut out = RandomAssignment::zeros(r.num_students(), market.num_projects());
    for i in 0..r.num_students() {
        for (col, &p) in columns.iter().enumerate() {
            *out.get_mut(i, p) = r.get(i, col).clone();
        }
    }
    Ok(out)
}

/// Position in `market` of each named column; the names must be a permutation of the
/// market's projects.
fn column_map(names: &[String], market: &Market) -> Result<Vec<usize>> {
    if names.len() != market.num_projects() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} projects", market.num_projects()),
            found: format!("{} projects", names.len()),
        });
    }
    let mut seen = vec![false; names.len()];
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let p = market
                .project_index(name)
                .ok_or_else(|| Error::Parse(format!("projects[{j}]: unknown project {name:?}")))?;
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Parse(format!(
                    "projects[{j}]: project {name:?} listed twice"
                )));
            }
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeterministicDoc {
    projects: Vec<String>,
    assignment: Vec<String>,
}

fn names_of(mu: &DeterministicAssignment, names: &[String]) -> Vec<String> {
    mu.choices().iter().map(|&p| names[p].clone()).collect()
}

fn indices_of(list: &[String], names: &[String], field: &str) -> Result<DeterministicAssignment> {
    let lookup = project_lookup(names);
    let choices = list
        .iter()
        .enumerate()
        .map(|(i, name)| {
            lookup
                .get(name.as_str())
                .copied()
                .ok_or_else(|| Error::Parse(format!("{field}[{i}]: unknown project {name:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    DeterministicAssignment::new(choices, names.len())
}

pub fn deterministic_to_json(mu: &DeterministicAssignment, names: &[String]) -> String {
    to_pretty(&DeterministicDoc {
        projects: names.to_vec(),
        assignment: names_of(mu, names),
    })
}

pub fn parse_deterministic(text: &str) -> Result<(Vec<String>, DeterministicAssignment)> {
    let doc: DeterministicDoc =
        serde_json::from_str(text).map_err(|e| json_error("deterministic assignment", e))?;
    let mu = indices_of(&doc.assignment, &doc.projects, "assignment")?;
    Ok((doc.projects, mu))
}

// ---------------------------------------------------------------- lottery

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    weight: RationalText,
    assignment: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LotteryDoc {
    projects: Vec<String>,
    terms: Vec<TermDoc>,
}

pub fn lottery_to_json(lottery: &Lottery, names: &[String]) -> String {
    to_pretty(&LotteryDoc {
        projects: names.to_vec(),
        terms: lottery
            .terms
            .iter()
            .map(|(w, mu)| TermDoc {
                weight: w.into(),
                assignment: names_of(mu, names),
            })
            .collect(),
    })
}

pub fn parse_lottery(text: &str) -> Result<(Vec<String>, Lottery)> {
    let doc: LotteryDoc = serde_json::from_str(text).map_err(|e| json_error("lottery", e))?;
    let terms = doc
        .terms
        .iter()
        .enumerate()
        .map(|(j, t)| {
            Ok((
                t.weight.parse(&format!("terms[{j}].weight"))?,
                indices_of(
                    &t.assignment,
                    &doc.projects,
                    &format!("terms[{j}].assignment"),
                )?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((doc.projects, Lottery { terms }))
}

// ------------------------------------------------------------------ trace

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseDoc {
    start: RationalText,
    end: RationalText,
    kind: EventKind,
    active: Vec<String>,
    /// Project eaten by each student during the phase.
    pattern: Vec<String>,
    exhausted: Vec<String>,
    shifted: Vec<String>,
    closed_at_end: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    projects: Vec<String>,
    critical_time: Option<RationalText>,
    phases: Vec<PhaseDoc>,
}

pub fn trace_to_json(trace: &EatingTrace, names: &[String]) -> String {
    let list = |ps: &[usize]| ps.iter().map(|&p| names[p].clone()).collect::<Vec<_>>();
    to_pretty(&TraceDoc {
        projects: names.to_vec(),
        critical_time: trace.critical_time.as_ref().map(RationalText::from),
        phases: trace
            .phases
            .iter()
            .map(|ph| PhaseDoc {
                start: (&ph.start).into(),
                end: (&ph.end).into(),
                kind: ph.kind,
                active: list(&ph.active),
                pattern: list(&ph.pattern),
                exhausted: list(&ph.exhausted),
                shifted: list(&ph.shifted),
                closed_at_end: list(&ph.closed_at_end),
            })
            .collect(),
    })
}

pub fn parse_trace(text: &str) -> Result<(Vec<String>, EatingTrace)> {
    let doc: TraceDoc = serde_json::from_str(text).map_err(|e| json_error("trace", e))?;
    let lookup = project_lookup(&doc.projects);
    let list = |xs: &[String], field: String| -> Result<Vec<usize>> {
        xs.iter()
            .enumerate()
            .map(|(i, name)| {
                lookup
                    .get(name.as_str())
                    .copied()
                    .ok_or_else(|| Error::Parse(format!("{field}[{i}]: unknown project {name:?}")))
            })
            .collect()
    };
    let phases = doc
        .phases
        .iter()
        .enumerate()
        .map(|(j, ph)| {
            let f = |name: &str| format!("phases[{j}].{name}");
            Ok(EatingPhase {
                start: ph.start.parse(&f("start"))?,
                end: ph.end.parse(&f("end"))?,
                kind: ph.kind,
                active: list(&ph.active, f("active"))?,
                pattern: list(&ph.pattern, f("pattern"))?,
                exhausted: list(&ph.exhausted, f("exhausted"))?,
                shifted: list(&ph.shifted, f("shifted"))?,
                closed_at_end: list(&ph.closed_at_end, f("closed_at_end"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let critical_time = doc
        .critical_time
        .as_ref()
        .map(|t| t.parse("critical_time"))
        .transpose()?;
    Ok((
        doc.projects,
        EatingTrace {
            phases,
            critical_time,
        },
    ))
}

// -------------------------------------------------------------- rendering

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown format {other:?} (expected table, json or csv)"
            ))),
        }
    }
}

/// Anything the CLI prints.
#[derive(Debug, Clone, Copy)]
pub enum Renderable<'a> {
    Assignment(&'a RandomAssignment),
    Deterministic(&'a DeterministicAssignment),
    Lottery(&'a Lottery),
    Trace(&'a EatingTrace),
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn decimal(x: &Rational) -> String {
    to_decimal(x, DECIMAL_DIGITS)
}

/// Renders `item` with project `names`. Tables and CSV keep exact `p/q` values; the
/// CSV `*_decimal_approx` columns are lossy and for display only.
pub fn render(item: Renderable<'_>, names: &[String], format: Format) -> String {
    let student = |i: usize| (i + 1).to_string();
    let set = |ps: &[usize]| ps.iter().map(|&p| names[p].as_str()).join(" ");
    match (item, format) {
        (Renderable::Assignment(r), Format::Json) => assignment_to_json(r, names),
        (Renderable::Assignment(r), Format::Table) => {
            let header: Vec<String> = ["student".to_string()]
                .into_iter()
                .chain(names.iter().cloned())
                .collect();
            let rows: Vec<Vec<String>> = r
                .rows()
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    [student(i)]
                        .into_iter()
                        .chain(row.iter().map(format_rational))
                        .collect()
                })
                .collect();
            table(&header, &rows)
        }
        (Renderable::Assignment(r), Format::Csv) => csv_text(
            &["student", "project", "probability", "decimal_approx"],
            (0..r.num_students())
                .cartesian_product(0..r.num_projects())
                .map(|(i, p)| {
                    vec![
                        student(i),
                        names[p].clone(),
                        format_rational(r.get(i, p)),
                        decimal(r.get(i, p)),
                    ]
                })
                .collect(),
        ),
        (Renderable::Deterministic(mu), Format::Json) => deterministic_to_json(mu, names),
        (Renderable::Deterministic(mu), Format::Table) => table(
            &["student".into(), "project".into()],
            &mu.choices()
                .iter()
                .enumerate()
                .map(|(i, &p)| vec![student(i), names[p].clone()])
                .collect::<Vec<_>>(),
        ),
        (Renderable::Deterministic(mu), Format::Csv) => csv_text(
            &["student", "project"],
            mu.choices()
                .iter()
                .enumerate()
                .map(|(i, &p)| vec![student(i), names[p].clone()])
                .collect(),
        ),
        (Renderable::Lottery(l), Format::Json) => lottery_to_json(l, names),
        (Renderable::Lottery(l), Format::Table) => {
            let n = l.terms.first().map_or(0, |(_, mu)| mu.num_students());
            let header: Vec<String> = ["weight".to_string()]
                .into_iter()
                .chain((0..n).map(|i| format!("s{}", i + 1)))
                .collect();
            let rows: Vec<Vec<String>> = l
                .terms
                .iter()
                .map(|(w, mu)| {
                    [format_rational(w)]
                        .into_iter()
                        .chain(names_of(mu, names))
                        .collect()
                })
                .collect();
            table(&header, &rows)
        }
        (Renderable::Lottery(l), Format::Csv) => csv_text(
            &[
                "term",
                "weight",
                "weight_decimal_approx",
                "student",
                "project",
            ],
            l.terms
                .iter()
                .enumerate()
                .flat_map(|(j, (w, mu))| {
                    mu.choices()
                        .iter()
                        .enumerate()
                        .map(move |(i, &p)| {
                            vec![
                                (j + 1).to_string(),
                                format_rational(w),
                                decimal(w),
                                student(i),
                                names[p].clone(),
                            ]
                        })
                        .collect::<Vec<_>>()
                })
                .collect(),
        ),
        (Renderable::Trace(t), Format::Json) => trace_to_json(t, names),
        (Renderable::Trace(t), Format::Table) => {
            let header: Vec<String> = ["start", "end", "event", "active", "pattern", "closing"]
                .map(String::from)
                .to_vec();
            let rows: Vec<Vec<String>> = t
                .phases
                .iter()
                .map(|ph| {
                    let closing: Vec<usize> = ph
                        .exhausted
                        .iter()
                        .chain(&ph.shifted)
                        .chain(&ph.closed_at_end)
                        .copied()
                        .unique()
                        .collect();
                    vec![
                        format_rational(&ph.start),
                        format_rational(&ph.end),
                        ph.kind.to_string(),
                        set(&ph.active),
                        set(&ph.pattern),
                        set(&closing),
                    ]
                })
                .collect();
            let mut out = table(&header, &rows);
            match &t.critical_time {
                Some(tc) => {
                    writeln!(out, "critical time: {}", format_rational(tc)).expect("string")
                }
                None => out.push_str("critical time: none\n"),
            }
            out
        }
        (Renderable::Trace(t), Format::Csv) => csv_text(
            &[
                "phase",
                "start",
                "end",
                "start_decimal_approx",
                "end_decimal_approx",
                "event",
                "active",
                "pattern",
            ],
            t.phases
                .iter()
                .enumerate()
                .map(|(j, ph)| {
                    vec![
                        (j + 1).to_string(),
                        format_rational(&ph.start),
                        format_rational(&ph.end),
                        decimal(&ph.start),
                        decimal(&ph.end),
                        ph.kind.to_string(),
                        set(&ph.active),
                        set(&ph.pattern),
                    ]
                })
                .collect(),
        ),
    }
}

// -------------------------------------------------------------- generator

#[derive(Debug, Clone, PartialEq)]
pub enum QuotaStyle {
    /// `l = 0`, `u = n` everywhere.
    None,
    /// Integer quotas with `Σ l = n − 1`, resampled until the eating run has a
    /// critical shift (when one is possible).
    IntegerTight,
    /// Integer quotas with `Σ l ≤ n` drawn freely.
    IntegerLoose,
    /// Quotas on the `1/d` grid.
    Fractional(u32),
}

impl FromStr for QuotaStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(QuotaStyle::None),
            "integer-tight" => Ok(QuotaStyle::IntegerTight),
            "integer-loose" => Ok(QuotaStyle::IntegerLoose),
            _ => s
                .strip_prefix("fractional:")
                .and_then(|d| d.parse().ok())
                .map(QuotaStyle::Fractional)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown quota style {s:?} (none, integer-tight, integer-loose, fractional:D)"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceStyle {
    Uniform,
    /// Plackett-Luce draws: projects with larger weight tend to be ranked higher.
    Correlated(Vec<f64>),
}

impl FromStr for PreferenceStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(PreferenceStyle::Uniform);
        }
        let bad = || {
            Error::InvalidArgument(format!(
                "unknown preference style {s:?} (uniform or correlated:w1,w2,...)"
            ))
        };
        let weights = s.strip_prefix("correlated:").ok_or_else(bad)?;
        weights
            .split(',')
            .map(|w| w.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()
            .map(PreferenceStyle::Correlated)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub quota_style: QuotaStyle,
    pub preference_style: PreferenceStyle,
}

impl GeneratorConfig {
    pub fn new(n: usize, k: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            seed,
            quota_style: QuotaStyle::None,
            preference_style: PreferenceStyle::Uniform,
        }
    }

    pub fn with_quotas(mut self, style: QuotaStyle) -> Self {
        self.quota_style = style;
        self
    }

    pub fn with_preferences(mut self, style: PreferenceStyle) -> Self {
        self.preference_style = style;
        self
    }
}

/// Resampling budget before a configuration is declared unsatisfiable.
const MAX_ATTEMPTS: usize = 10_000;

fn project_names(k: usize) -> Vec<String> {
    if k <= 26 {
        (0..k)
            .map(|p| ((b'a' + p as u8) as char).to_string())
            .collect()
    } else {
        (0..k).map(|p| format!("p{}", p + 1)).collect()
    }
}

fn draw_ranking(rng: &mut ChaCha8Rng, style: &PreferenceStyle, k: usize) -> Vec<usize> {
    match style {
        PreferenceStyle::Uniform => {
            let mut r: Vec<usize> = (0..k).collect();
            r.shuffle(rng);
            r
        }
        PreferenceStyle::Correlated(weights) => {
            let mut left: Vec<usize> = (0..k).collect();
            let mut ranking = Vec::with_capacity(k);
            while !left.is_empty() {
                let dist = WeightedIndex::new(left.iter().map(|&p| weights[p]))
                    .expect("weights validated");
                ranking.push(left.remove(dist.sample(rng)));
            }
            ranking
        }
    }
}

/// Splits `total` units over `k` bins uniformly at random.
fn scatter(rng: &mut ChaCha8Rng, total: usize, k: usize) -> Vec<usize> {
    let mut bins = vec![0; k];
    for _ in 0..total {
        bins[rng.random_range(0..k)] += 1;
    }
    bins
}

fn draw_quotas(
    rng: &mut ChaCha8Rng,
    style: &QuotaStyle,
    n: usize,
    k: usize,
) -> (Vec<Rational>, Vec<Option<Rational>>) {
    let int = |v: usize| Rational::from_integer(v.into());
    match style {
        QuotaStyle::None => (vec![int(0); k], vec![None; k]),
        QuotaStyle::IntegerTight | QuotaStyle::IntegerLoose => {
            let total = if *style == QuotaStyle::IntegerTight {
                n.saturating_sub(1)
            } else {
                rng.random_range(0..=n)
            };
            let lower = scatter(rng, total, k);
            let upper = lower
                .iter()
                .map(|&l| {
                    if rng.random_bool(0.25) {
                        None
                    } else {
                        Some(int((l + rng.random_range(0..=2)).max(1).min(n)))
                    }
                })
                .collect();
            (lower.into_iter().map(int).collect(), upper)
        }
        QuotaStyle::Fractional(d) => {
            let d = *d as usize;
            let total = rng.random_range(0..=n * d);
            let lower: Vec<usize> = scatter(rng, total, k);
            let upper = lower
                .iter()
                .map(|&l| {
                    if rng.random_bool(0.25) {
                        None
                    } else {
                        Some(ratio((l + rng.random_range(0..=2 * d)) as i64, d as i64))
                    }
                })
                .collect();
            (
                lower
                    .into_iter()
                    .map(|l| ratio(l as i64, d as i64))
                    .collect(),
                upper,
            )
        }
    }
}

fn has_critical_shift(market: &Market) -> bool {
    run_pslq_traced(market).is_ok_and(|(_, trace)| {
        trace
            .phases
            .iter()
            .any(|ph| ph.kind == EventKind::CriticalShift)
    })
}

/// Draws a random market; deterministic for a given configuration. Candidates that
/// violate `Σ l ≤ n ≤ Σ u` are discarded and redrawn.
pub fn generate_market(cfg: &GeneratorConfig) -> Result<Market> {
    let (n, k) = (cfg.n, cfg.k);
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "generator needs n >= 1 and k >= 1".into(),
        ));
    }
    match (&cfg.quota_style, &cfg.preference_style) {
        (QuotaStyle::Fractional(0), _) => {
            return Err(Error::InvalidArgument(
                "fractional denominator must be positive".into(),
            ))
        }
        (_, PreferenceStyle::Correlated(w))
            if w.len() != k || w.iter().any(|x| !x.is_finite() || *x <= 0.0) =>
        {
            return Err(Error::InvalidArgument(format!(
                "correlated preferences need {k} positive weights"
            )))
        }
        _ => {}
    }
    // a critical shift needs someone able to eat a non-deficient project while others wait
    let want_shift = cfg.quota_style == QuotaStyle::IntegerTight && n >= 2 && k >= 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = project_names(k);
    for _ in 0..MAX_ATTEMPTS {
        let (lower, upper) = draw_quotas(&mut rng, &cfg.quota_style, n, k);
        let rankings = (0..n)
            .map(|_| draw_ranking(&mut rng, &cfg.preference_style, k))
            .collect();
        let profile = PreferenceProfile::new(rankings, k)?;
        let Ok(market) = Market::new(names.clone(), lower, upper, profile) else {
            continue;
        };
        if want_shift && !has_critical_shift(&market) {
            continue;
        }
        return Ok(market);
    }
    Err(Error::InvalidArgument(format!(
        "no valid market after {MAX_ATTEMPTS} draws; configuration looks unsatisfiable"
    )))
}
