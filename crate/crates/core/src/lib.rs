//! Random assignment of students to projects with minimum and maximum quotas.
//!
//! * [`eating`]: the simultaneous-eating mechanism with lower-quota reserve (PSLQ).
//! * [`mechanisms`]: serial dictatorship under lower quotas (PrioLQ), its uniform
//!   lottery (RPLQ) and multi-unit cloning.
//! * [`axioms`]: stochastic dominance, envy-freeness, ordinal efficiency with
//!   constructive improvement witnesses, ML-fairness and Pareto checks.
//! * [`decomposition`]: lotteries over feasible deterministic assignments.
//! * [`strategy`]: misreport search and scripted manipulation scenarios.
//! * [`io`]: JSON interchange, rendering and random market generation.
//!
//! All arithmetic is exact ([`rational::Rational`]).

pub mod axioms;
pub mod decomposition;
pub mod eating;
pub mod error;
pub mod instances;
pub mod io;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod strategy;

pub use error::{Error, Result};
pub use model::{
    is_feasible, DeterministicAssignment, Market, MasterList, Permutation, PreferenceProfile,
    RandomAssignment,
};
pub use rational::Rational;
