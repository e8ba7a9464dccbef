//! Simultaneous eating under lower and upper quotas.
//!
//! Students eat at unit speed from their best *active* project. A project is active
//! while its lower quota is unmet, or while it has spare upper capacity and the
//! remaining eating mass `n(1-t)` strictly exceeds the total unmet lower quota
//! (the reserve). Between events the eating pattern is frozen, so every quantity is
//! linear in time and each event time is solved exactly.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Market, RandomAssignment};
use crate::rational::{from_usize, positive_part, Rational};

/// Snapshot of the eating process at time `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EatingState {
    time: Rational,
    consumption: RandomAssignment,
    totals: Vec<Rational>,
    active: Vec<bool>,
    pattern: Vec<usize>,
}

impl EatingState {
    /// State at `t = 0`: nothing eaten, active set given by the activity rule.
    pub fn initial(market: &Market) -> Result<Self> {
        let (n, k) = (market.num_students(), market.num_projects());
        let mut state = Self {
            time: Rational::zero(),
            consumption: RandomAssignment::zeros(n, k),
            totals: vec![Rational::zero(); k],
            active: vec![true; k],
            pattern: vec![0; n],
        };
        let active = active_projects(&state, market);
        state.active = mask(&active, k);
        state.select_pattern(market)?;
        Ok(state)
    }

    /// Builds a state from explicit consumption at time `t`; the active set is the
    /// activity rule evaluated on that consumption.
    pub fn at(market: &Market, time: Rational, consumption: RandomAssignment) -> Result<Self> {
        let k = market.num_projects();
        if consumption.num_students() != market.num_students() || consumption.num_projects() != k {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{k}", market.num_students()),
                found: format!(
                    "{}x{}",
                    consumption.num_students(),
                    consumption.num_projects()
                ),
            });
        }
        let totals = consumption.column_sums();
        let mut state = Self {
            time,
            consumption,
            totals,
            active: vec![true; k],
            pattern: vec![0; market.num_students()],
        };
        let active = active_projects(&state, market);
        state.active = mask(&active, k);
        if state.time < Rational::one() {
            state.select_pattern(market)?;
        }
        Ok(state)
    }

    pub fn time(&self) -> &Rational {
        &self.time
    }

    pub fn consumption(&self) -> &RandomAssignment {
        &self.consumption
    }

    /// Total amount eaten from each project so far.
    pub fn totals(&self) -> &[Rational] {
        &self.totals
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&p| self.active[p]).collect()
    }

    pub fn is_active(&self, project: usize) -> bool {
        self.active[project]
    }

    /// Project each student is currently eating.
    pub fn pattern(&self) -> &[usize] {
        &self.pattern
    }

    /// Number of students currently eating each project.
    pub fn eaters(&self) -> Vec<usize> {
        let mut counts = vec![0; self.active.len()];
        for &p in &self.pattern {
            counts[p] += 1;
        }
        counts
    }

    /// Unmet lower quota `(l(p) - ω_p)_+` of each project.
    pub fn residuals(&self, market: &Market) -> Vec<Rational> {
        self.totals
            .iter()
            .enumerate()
            .map(|(p, w)| positive_part(&(market.lower(p) - w)))
            .collect()
    }

    /// `n(1-t) - Σ_p (l(p) - ω_p)_+`; never negative along a run.
    pub fn reserve(&self, market: &Market) -> Rational {
        let remaining = from_usize(market.num_students()) * (Rational::one() - &self.time);
        remaining - self.residuals(market).iter().sum::<Rational>()
    }

    fn select_pattern(&mut self, market: &Market) -> Result<()> {
        let menu = self.active();
        if menu.is_empty() {
            return Err(Error::Infeasible(format!(
                "no active project left at t = {}",
                self.time
            )));
        }
        for i in 0..self.pattern.len() {
            self.pattern[i] = market.choice(i, menu.iter().copied())?;
        }
        Ok(())
    }
}

fn mask(members: &[usize], k: usize) -> Vec<bool> {
    let mut m = vec![false; k];
    for &p in members {
        m[p] = true;
    }
    m
}

/// The activity rule on the state's current consumption: projects below their lower
/// quota, plus projects with spare upper capacity while the reserve is strictly positive.
pub fn active_projects(state: &EatingState, market: &Market) -> Vec<usize> {
    let slack = state.reserve(market).is_positive();
    (0..market.num_projects())
        .filter(|&p| {
            let w = &state.totals[p];
            w < market.lower(p) || (slack && w < market.upper(p))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// Some eaten project hit its upper quota.
    Exhaustion,
    /// The reserve is exhausted: projects at or above their lower quota close.
    CriticalShift,
    /// `t = 1` reached with projects still open.
    EpochEnd,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Exhaustion => "exhaustion",
            EventKind::CriticalShift => "critical-shift",
            EventKind::EpochEnd => "epoch-end",
        })
    }
}

/// The next change of the active set under the current eating pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NextEvent {
    pub time: Rational,
    pub kind: EventKind,
    /// Projects reaching their upper quota at `time`.
    pub exhausted: Vec<usize>,
    /// Projects closed because the reserve is zero and their lower quota is met.
    pub shifted: Vec<usize>,
    /// Projects still open when the epoch ends.
    pub closed_at_end: Vec<usize>,
    /// First time the reserve equation binds under this pattern (capped at 1).
    pub lambda: Rational,
    /// First upper-quota hit under this pattern (capped at 1).
    pub tau: Rational,
}

/// Length of the interval, starting now, on which the reserve stays nonnegative and
/// the active set is unchanged by the reserve condition.
fn reserve_horizon(state: &EatingState, market: &Market, eaters: &[usize]) -> Option<Rational> {
    let n = market.num_students() as i64;
    let residuals: Vec<Rational> = state
        .totals
        .iter()
        .enumerate()
        .map(|(p, w)| market.lower(p) - w)
        .collect();
    // breakpoints where an eaten project's residual reaches zero
    let mut breaks: Vec<(Rational, i64)> = (0..residuals.len())
        .filter(|&p| eaters[p] > 0 && residuals[p].is_positive())
        .map(|p| (&residuals[p] / from_usize(eaters[p]), eaters[p] as i64))
        .collect();
    breaks.sort_by(|a, b| a.0.cmp(&b.0));
    let mut slope = -n + breaks.iter().map(|(_, c)| c).sum::<i64>();
    let reserve = state.reserve(market);
    debug_assert!(!reserve.is_negative(), "reserve went negative");

    if reserve.is_zero() {
        // stays at zero while every eater is on a deficient project
        return if slope < 0 {
            Some(Rational::zero())
        } else {
            breaks.first().map(|(b, _)| b.clone())
        };
    }

    let mut s_prev = Rational::zero();
    let mut g = reserve;
    let mut idx = 0;
    loop {
        let next_break = breaks.get(idx).map(|(b, _)| b.clone());
        if slope < 0 {
            let root = &s_prev + &g / Rational::from_integer((-slope).into());
            if next_break.as_ref().is_none_or(|b| root <= *b) {
                return Some(root);
            }
        }
        let b = next_break?;
        g += Rational::from_integer(slope.into()) * (&b - &s_prev);
        s_prev = b.clone();
        while idx < breaks.len() && breaks[idx].0 == b {
            slope -= breaks[idx].1;
            idx += 1;
        }
    }
}

/// Computes the next event time and which projects leave the active set then.
pub fn next_event(state: &EatingState, market: &Market) -> Result<NextEvent> {
    let one = Rational::one();
    if state.time >= one {
        return Err(Error::InvalidArgument(
            "eating epoch already finished".into(),
        ));
    }
    let left = &one - &state.time;
    let eaters = state.eaters();

    let tau_dt = (0..market.num_projects())
        .filter(|&p| state.active[p] && eaters[p] > 0)
        .map(|p| (market.upper(p) - &state.totals[p]) / from_usize(eaters[p]))
        .min()
        .unwrap_or_else(|| left.clone())
        .min(left.clone());
    let lambda_dt = reserve_horizon(state, market, &eaters)
        .unwrap_or_else(|| left.clone())
        .min(left.clone());
    let dt = tau_dt.clone().min(lambda_dt.clone());
    let time = &state.time + &dt;

    let totals: Vec<Rational> = (0..market.num_projects())
        .map(|p| &state.totals[p] + from_usize(eaters[p]) * &dt)
        .collect();
    let reserve_after = from_usize(market.num_students()) * (&one - &time)
        - totals
            .iter()
            .enumerate()
            .map(|(p, w)| positive_part(&(market.lower(p) - w)))
            .sum::<Rational>();

    let mut exhausted = Vec::new();
    let mut shifted = Vec::new();
    let mut closed_at_end = Vec::new();
    for p in state.active() {
        if totals[p] >= *market.upper(p) {
            exhausted.push(p);
        } else if time == one {
            closed_at_end.push(p);
        } else if !reserve_after.is_positive() && totals[p] >= *market.lower(p) {
            shifted.push(p);
        }
    }
    let kind = if !closed_at_end.is_empty() {
        EventKind::EpochEnd
    } else if !shifted.is_empty() {
        EventKind::CriticalShift
    } else {
        EventKind::Exhaustion
    };
    Ok(NextEvent {
        lambda: &state.time + lambda_dt,
        tau: &state.time + tau_dt,
        time,
        kind,
        exhausted,
        shifted,
        closed_at_end,
    })
}

/// Eats along the frozen pattern until `event.time`, then closes the projects the
/// event names and lets every student re-select her best remaining project.
pub fn advance(state: &mut EatingState, market: &Market, event: &NextEvent) -> Result<()> {
    let dt = &event.time - &state.time;
    for (i, &p) in state.pattern.iter().enumerate() {
        *state.consumption.get_mut(i, p) += &dt;
        state.totals[p] += &dt;
    }
    state.time = event.time.clone();
    for &p in event
        .exhausted
        .iter()
        .chain(&event.shifted)
        .chain(&event.closed_at_end)
    {
        state.active[p] = false;
    }
    if state.time < Rational::one() {
        state.select_pattern(market)?;
    }
    Ok(())
}

/// One constant-pattern stretch of the eating process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EatingPhase {
    pub start: Rational,
    pub end: Rational,
    pub active: Vec<usize>,
    pub pattern: Vec<usize>,
    pub kind: EventKind,
    pub exhausted: Vec<usize>,
    pub shifted: Vec<usize>,
    pub closed_at_end: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EatingTrace {
    pub phases: Vec<EatingPhase>,
    /// First time the reserve reaches zero, if that happens before `t = 1`.
    pub critical_time: Option<Rational>,
}

impl EatingTrace {
    /// Rebuilds the assignment from phase lengths and patterns alone.
    pub fn replay(&self, n: usize, k: usize) -> RandomAssignment {
        let mut r = RandomAssignment::zeros(n, k);
        for phase in &self.phases {
            let dt = &phase.end - &phase.start;
            for (i, &p) in phase.pattern.iter().enumerate() {
                *r.get_mut(i, p) += &dt;
            }
        }
        r
    }
}

/// Runs the eating algorithm and records every phase.
pub fn run_pslq_traced(market: &Market) -> Result<(RandomAssignment, EatingTrace)> {
    let one = Rational::one();
    let mut state = EatingState::initial(market)?;
    let mut phases = Vec::new();
    let mut critical_time = if state.reserve(market).is_zero() {
        Some(Rational::zero())
    } else {
        None
    };
    while state.time < one {
        let event = next_event(&state, market)?;
        let phase = EatingPhase {
            start: state.time.clone(),
            end: event.time.clone(),
            active: state.active(),
            pattern: state.pattern.clone(),
            kind: event.kind,
            exhausted: event.exhausted.clone(),
            shifted: event.shifted.clone(),
            closed_at_end: event.closed_at_end.clone(),
        };
        advance(&mut state, market, &event)?;
        if critical_time.is_none() && state.time < one && state.reserve(market).is_zero() {
            critical_time = Some(state.time.clone());
        }
        debug_assert!(phase.end > phase.start);
        phases.push(phase);
    }
    Ok((
        state.consumption,
        EatingTrace {
            phases,
            critical_time,
        },
    ))
}

/// The eating mechanism's random assignment.
pub fn run_pslq(market: &Market) -> Result<RandomAssignment> {
    run_pslq_traced(market).map(|(r, _)| r)
}
