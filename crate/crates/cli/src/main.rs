//! Command-line driver for the `minquota` library.
//!
//! Exit codes: 0 success (all requested properties hold), 1 a violation was found,
//! 2 bad input.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use minquota::axioms::{
    envy_violation, is_ordinally_efficient, ml_fairness_violation, pareto_improvement,
    weak_envy_violation, ImprovementWitness, WitnessKind,
};
use minquota::decomposition::decompose;
use minquota::eating::run_pslq_traced;
use minquota::io::{
    generate_market, parse_assignment_for, parse_deterministic, parse_market, render, Format,
    GeneratorConfig, PreferenceStyle, QuotaStyle, Renderable,
};
use minquota::mechanisms::{
    run_multiunit, run_priolq, run_rplq_exact, run_rplq_sampled, Mechanism,
};
use minquota::model::{DeterministicAssignment, MasterList};
use minquota::rational::format_rational;
use minquota::strategy::{
    impossibility_scenario, search_manipulation, verify_weak_sp, ManipulationRelation,
    ManipulationReport, SpMode,
};
use minquota::{is_feasible, Market, Permutation, RandomAssignment};

#[derive(Parser)]
#[command(
    name = "minquota",
    version,
    about = "Random assignment under minimum and maximum quotas"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Market file (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Seed for sampling and generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Table,
    Json,
    Csv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Table => Format::Table,
            OutputFormat::Json => Format::Json,
            OutputFormat::Csv => Format::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Pslq,
    #[value(alias = "rplq-exact")]
    Rplq,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Pslq => Mechanism::Pslq,
            MechanismArg::Rplq => Mechanism::RplqExact,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism on the input market.
    #[command(subcommand)]
    Run(RunCommand),
    /// Check axioms for an assignment.
    Check {
        #[arg(long)]
        assignment: PathBuf,
        /// Comma-separated: feasible, ef, wef, oe, ml, pareto.
        #[arg(long, value_delimiter = ',', default_value = "feasible,ef,wef,oe")]
        axioms: Vec<Axiom>,
        /// Master list for `ml`, 1-based (default: 1,2,...,n).
        #[arg(long)]
        master_list: Option<String>,
    },
    /// Write an assignment as a lottery over deterministic assignments.
    Decompose {
        #[arg(long)]
        assignment: PathBuf,
        /// Re-multiply the lottery and compare with the input.
        #[arg(long)]
        verify: bool,
    },
    /// Search all misreports of one student (1-based).
    Manipulate {
        #[arg(long, value_enum, default_value_t = MechanismArg::Pslq)]
        mechanism: MechanismArg,
        #[arg(long)]
        student: usize,
    },
    /// Check weak (or, with --strong, full) strategy-proofness for every student.
    VerifyWsp {
        #[arg(long, value_enum, default_value_t = MechanismArg::Pslq)]
        mechanism: MechanismArg,
        #[arg(long)]
        strong: bool,
    },
    /// Print the impossibility certificate for fractional quotas.
    Impossibility,
    /// Generate a random market.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// none | integer-tight | integer-loose | fractional:D
        #[arg(long, default_value = "none")]
        quotas: String,
        /// uniform | correlated:w1,w2,...
        #[arg(long, default_value = "uniform")]
        preferences: String,
    },
}

#[derive(Subcommand)]
enum RunCommand {
    /// Serial dictatorship under lower quotas.
    Priolq {
        /// Priority order, 1-based, e.g. "3,4,1,2" (default: identity).
        #[arg(long)]
        order: Option<String>,
    },
    /// Uniform lottery over priority orders.
    Rplq {
        #[arg(long, conflicts_with = "samples")]
        exact: bool,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Simultaneous eating with lower-quota reserve.
    Pslq {
        #[arg(long)]
        trace: bool,
    },
    /// Multi-unit demand by cloning each student `q` times.
    Multiunit {
        #[arg(long)]
        q: usize,
        #[arg(long, value_enum, default_value_t = MechanismArg::Pslq)]
        mechanism: MechanismArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axiom {
    Feasible,
    Ef,
    Wef,
    Oe,
    Ml,
    Pareto,
}

impl Axiom {
    fn key(self) -> &'static str {
        match self {
            Axiom::Feasible => "feasible",
            Axiom::Ef => "ef",
            Axiom::Wef => "wef",
            Axiom::Oe => "oe",
            Axiom::Ml => "ml",
            Axiom::Pareto => "pareto",
        }
    }
}

/// Bad input of any kind; exits with code 2.
struct InputError(String);

impl From<minquota::Error> for InputError {
    fn from(e: minquota::Error) -> Self {
        InputError(e.to_string())
    }
}

/// Text to emit and whether the checked properties held.
struct Outcome {
    text: String,
    holds: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, holds: true }
    }
}

fn read(path: &PathBuf) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_market(global: &Global) -> Result<Market, InputError> {
    let path = global
        .input
        .as_ref()
        .ok_or_else(|| InputError("--input is required for this command".into()))?;
    Ok(parse_market(&read(path)?)?)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn rationals(row: &[minquota::Rational]) -> Value {
    row.iter().map(format_rational).collect()
}

fn matrix_json(r: &RandomAssignment) -> Value {
    r.rows().iter().map(|row| rationals(row)).collect()
}

fn names_json(market: &Market, ps: &[usize]) -> Value {
    ps.iter().map(|&p| market.project_name(p)).collect()
}

fn run(cli: Cli) -> Result<Outcome, InputError> {
    let g = &cli.global;
    let format: Format = g.format.into();
    match &cli.command {
        Command::Run(cmd) => {
            let market = load_market(g)?;
            let names = market.project_names();
            let text = match cmd {
                RunCommand::Priolq { order } => {
                    let order = match order {
                        Some(s) => Permutation::parse_one_based(s)?,
                        None => Permutation::identity(market.num_students()),
                    };
                    let mu = run_priolq(&market, &order)?;
                    render(Renderable::Deterministic(&mu), names, format)
                }
                RunCommand::Rplq { exact: _, samples } => {
                    let result = match samples {
                        Some(s) => run_rplq_sampled(&market, *s, g.seed)?,
                        None => run_rplq_exact(&market)?,
                    };
                    render(Renderable::Assignment(&result.assignment), names, format)
                }
                RunCommand::Pslq { trace } => {
                    let (r, t) = run_pslq_traced(&market)?;
                    if *trace {
                        render(Renderable::Trace(&t), names, format)
                    } else {
                        render(Renderable::Assignment(&r), names, format)
                    }
                }
                RunCommand::Multiunit { q, mechanism } => {
                    let r = run_multiunit(&market, *q, (*mechanism).into())?;
                    render(Renderable::Assignment(&r), names, format)
                }
            };
            Ok(Outcome::ok(text))
        }
        Command::Check {
            assignment,
            axioms,
            master_list,
        } => {
            let market = load_market(g)?;
            let text = read(assignment)?;
            check(&market, &text, axioms, master_list.as_deref(), format)
        }
        Command::Decompose { assignment, verify } => {
            let market = load_market(g)?;
            let r = load_assignment(&read(assignment)?, &market)?;
            let lottery = decompose(&r, &market)?;
            let mut text = render(
                Renderable::Lottery(&lottery),
                market.project_names(),
                format,
            );
            let mut holds = true;
            if *verify {
                let status = lottery.verify(&r, &market);
                holds = status.is_ok();
                let line = match status {
                    Ok(()) => "verified: weighted sum equals the input".to_string(),
                    Err(e) => format!("verification failed: {e}"),
                };
                // keep machine formats parseable
                if format == Format::Table {
                    text.push_str(&line);
                    text.push('\n');
                } else {
                    eprintln!("{line}");
                }
            }
            Ok(Outcome { text, holds })
        }
        Command::Manipulate { mechanism, student } => {
            let market = load_market(g)?;
            if *student == 0 {
                return Err(InputError("--student is 1-based".into()));
            }
            let report = search_manipulation((*mechanism).into(), &market, student - 1)?;
            let holds = report.relation != ManipulationRelation::StrictSdGain;
            let text = match format {
                Format::Table => manipulation_text(&market, &report),
                _ => pretty(&manipulation_json(&market, &report)),
            };
            Ok(Outcome { text, holds })
        }
        Command::VerifyWsp { mechanism, strong } => {
            let market = load_market(g)?;
            let mode = if *strong {
                SpMode::Strong
            } else {
                SpMode::Weak
            };
            let v = verify_weak_sp((*mechanism).into(), &market, mode)?;
            let label = if *strong {
                "strategy-proof"
            } else {
                "weakly strategy-proof"
            };
            let text = match format {
                Format::Table => {
                    let mut s = format!(
                        "{label} ({} students checked): {}\n",
                        v.reports.len(),
                        if v.holds { "yes" } else { "no" }
                    );
                    if let Some(c) = &v.counterexample {
                        s.push_str(&manipulation_text(&market, c));
                    }
                    s
                }
                _ => pretty(&json!({
                    "mode": if *strong { "strong" } else { "weak" },
                    "holds": v.holds,
                    "counterexample": v.counterexample.as_ref().map(|c| manipulation_json(&market, c)),
                    "reports": v.reports.iter().map(|r| manipulation_json(&market, r)).collect::<Vec<_>>(),
                })),
            };
            Ok(Outcome {
                text,
                holds: v.holds,
            })
        }
        Command::Impossibility => {
            let report = impossibility_scenario()?;
            let text = match format {
                Format::Table => report.to_string(),
                _ => pretty(&json!({
                    "family": report.family.iter().map(|m| json!({
                        "t": format_rational(&m.t),
                        "matrix": matrix_json(&m.assignment),
                        "ordinally_efficient": m.ordinally_efficient,
                        "envy_free": m.envy_free,
                    })).collect::<Vec<_>>(),
                    "r_prime": matrix_json(&report.r_prime),
                    "r_double_prime": matrix_json(&report.r_double_prime),
                    "t_from_student1": format_rational(&report.t_from_student1),
                    "t_from_student2": format_rational(&report.t_from_student2),
                    "contradiction": report.is_contradiction(),
                })),
            };
            Ok(Outcome::ok(text))
        }
        Command::Gen {
            n,
            k,
            quotas,
            preferences,
        } => {
            let cfg = GeneratorConfig::new(*n, *k, g.seed)
                .with_quotas(quotas.parse::<QuotaStyle>()?)
                .with_preferences(preferences.parse::<PreferenceStyle>()?);
            let market = generate_market(&cfg)?;
            Ok(Outcome::ok(minquota::io::market_to_json(&market) + "\n"))
        }
    }
}

/// Accepts either a probability matrix or a deterministic assignment document.
fn load_assignment(text: &str, market: &Market) -> Result<RandomAssignment, InputError> {
    match parse_assignment_for(text, market) {
        Ok(r) => Ok(r),
        Err(matrix_err) => match parse_deterministic(text) {
            Ok((names, mu)) => {
                let r = mu.to_random();
                let doc = minquota::io::assignment_to_json(&r, &names);
                Ok(parse_assignment_for(&doc, market)?)
            }
            Err(_) => Err(matrix_err.into()),
        },
    }
}

fn witness_json(market: &Market, w: &ImprovementWitness) -> Value {
    json!({
        "kind": match w.kind {
            WitnessKind::TauCycle => "tau-cycle",
            WitnessKind::WastefulChain => "wasteful-chain",
        },
        "projects": names_json(market, &w.path.projects),
        "students": w.path.students.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "delta": format_rational(&w.delta),
        "improved": matrix_json(&w.improved),
    })
}

fn check(
    market: &Market,
    text: &str,
    axioms: &[Axiom],
    master_list: Option<&str>,
    format: Format,
) -> Result<Outcome, InputError> {
    let r = load_assignment(text, market)?;
    let profile = market.profile();
    let feasibility = is_feasible(&r, market)?;
    let mut report = serde_json::Map::new();
    let mut lines = Vec::new();
    let mut all = true;
    let deterministic = || {
        DeterministicAssignment::from_matrix(&r)
            .map_err(|_| InputError("ml and pareto need a deterministic assignment".into()))
    };
    for &axiom in axioms {
        let (holds, detail, line) = match axiom {
            Axiom::Feasible => {
                let v: Vec<String> = feasibility
                    .violations
                    .iter()
                    .map(|v| v.to_string())
                    .collect();
                let line = if v.is_empty() {
                    String::new()
                } else {
                    v.join("; ")
                };
                (v.is_empty(), json!({ "violations": v }), line)
            }
            Axiom::Ef => match envy_violation(&r, profile) {
                None => (true, json!({}), String::new()),
                Some((i, j)) => (
                    false,
                    json!({ "pair": [i + 1, j + 1] }),
                    format!("student {} envies student {}", i + 1, j + 1),
                ),
            },
            Axiom::Wef => match weak_envy_violation(&r, profile) {
                None => (true, json!({}), String::new()),
                Some((i, j)) => (
                    false,
                    json!({ "pair": [i + 1, j + 1] }),
                    format!(
                        "row {} strictly dominates row {} for student {}",
                        j + 1,
                        i + 1,
                        i + 1
                    ),
                ),
            },
            Axiom::Oe => {
                if !feasibility.is_feasible() {
                    return Err(InputError(
                        "ordinal efficiency is defined for feasible assignments only".into(),
                    ));
                }
                match is_ordinally_efficient(&r, market)?.witness() {
                    None => (true, json!({}), String::new()),
                    Some(w) => (
                        false,
                        json!({ "witness": witness_json(market, w) }),
                        format!(
                            "{} through projects {} (students {}), delta {}",
                            if w.kind == WitnessKind::TauCycle {
                                "tau-cycle"
                            } else {
                                "wasteful chain"
                            },
                            w.path
                                .projects
                                .iter()
                                .map(|&p| market.project_name(p))
                                .collect::<Vec<_>>()
                                .join(" -> "),
                            w.path
                                .students
                                .iter()
                                .map(|i| (i + 1).to_string())
                                .collect::<Vec<_>>()
                                .join(", "),
                            format_rational(&w.delta)
                        ),
                    ),
                }
            }
            Axiom::Ml => {
                let mu = deterministic()?;
                let order = match master_list {
                    Some(s) => Permutation::parse_one_based(s)?,
                    None => Permutation::identity(market.num_students()),
                };
                match ml_fairness_violation(&mu, profile, &MasterList::new(order)) {
                    None => (true, json!({}), String::new()),
                    Some((i, j)) => (
                        false,
                        json!({ "pair": [i + 1, j + 1] }),
                        format!(
                            "student {} prefers the project of later student {}",
                            i + 1,
                            j + 1
                        ),
                    ),
                }
            }
            Axiom::Pareto => {
                let mu = deterministic()?;
                match pareto_improvement(&mu, market)? {
                    None => (true, json!({}), String::new()),
                    Some(better) => (
                        false,
                        json!({ "dominating": better.choices().iter().map(|&p| market.project_name(p)).collect::<Vec<_>>() }),
                        format!(
                            "dominated by {}",
                            better
                                .choices()
                                .iter()
                                .map(|&p| market.project_name(p))
                                .collect::<Vec<_>>()
                                .join(" ")
                        ),
                    ),
                }
            }
        };
        all &= holds;
        let mut entry = json!({ "holds": holds });
        if let (Value::Object(e), Value::Object(d)) = (&mut entry, detail) {
            e.extend(d);
        }
        report.insert(axiom.key().to_string(), entry);
        lines.push(if holds {
            format!("{}: holds", axiom.key())
        } else {
            format!("{}: violated: {line}", axiom.key())
        });
    }
    let text = match format {
        Format::Table => lines.join("\n") + "\n",
        _ => {
            report.insert("all_hold".into(), Value::Bool(all));
            pretty(&Value::Object(report))
        }
    };
    Ok(Outcome { text, holds: all })
}

fn ranking_names(market: &Market, r: &[usize]) -> String {
    r.iter()
        .map(|&p| market.project_name(p))
        .collect::<Vec<_>>()
        .join(">")
}

fn row_text(row: &[minquota::Rational]) -> String {
    format!(
        "({})",
        row.iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .join(", ")
    )
}

fn manipulation_text(market: &Market, r: &ManipulationReport) -> String {
    let mut s = format!(
        "{} student {}: {}\n  truthful {}: {}\n",
        r.mechanism,
        r.student + 1,
        r.relation,
        ranking_names(market, &r.truthful_ranking),
        row_text(&r.truthful_row)
    );
    if let (Some(m), Some(row)) = (&r.misreport, &r.misreport_row) {
        s.push_str(&format!(
            "  misreport {}: {}\n",
            ranking_names(market, m),
            row_text(row)
        ));
    }
    s.push_str(&format!(
        "  {} misreports checked, {} changed the outcome\n",
        r.misreports_checked, r.changed_outcomes
    ));
    s
}

fn manipulation_json(market: &Market, r: &ManipulationReport) -> Value {
    json!({
        "mechanism": r.mechanism.to_string(),
        "student": r.student + 1,
        "relation": r.relation,
        "truthful_ranking": names_json(market, &r.truthful_ranking),
        "truthful_row": rationals(&r.truthful_row),
        "misreport": r.misreport.as_ref().map(|m| names_json(market, m)),
        "misreport_row": r.misreport_row.as_ref().map(|row| rationals(row)),
        "misreports_checked": r.misreports_checked,
        "changed_outcomes": r.changed_outcomes,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let output = cli.global.output.clone();
    match run(cli) {
        Ok(outcome) => {
            if let Some(path) = output {
                if let Err(e) = fs::write(&path, &outcome.text) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                print!("{}", outcome.text);
            }
            ExitCode::from(if outcome.holds { 0 } else { 1 })
        }
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
