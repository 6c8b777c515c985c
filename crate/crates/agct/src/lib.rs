//! Abstraction-guided concolic testing.
//!
//! A concolic tester and a coverage-driven CEGAR model checker run in
//! alternation: the model checker's abstract reachability graph is turned
//! into a deterministic monitor, the monitor is composed with the program
//! by label synchronization, and concolic search continues on the product,
//! where paths the abstraction proved infeasible are pruned and some
//! branches can be shown outright unreachable.
//!
//! Module map:
//! - [`ir`]: guarded-command control-flow graphs, branches, products
//! - [`parse`]: the mini-language frontend
//! - [`logic`]: linear atoms, path constraints, weakest preconditions
//! - [`solver`]: integer satisfiability with model extraction
//! - [`concolic`]: concrete+symbolic exploration with search strategies
//! - [`cegar`]: predicate abstraction, refinement and the ARG
//! - [`monitor`]: ARG→monitor conversion and the on-the-fly product
//! - [`driver`]: the alternation loop, replay checking and reports

pub mod cegar;
pub mod concolic;
pub mod driver;
pub mod ir;
pub mod logic;
pub mod monitor;
pub mod parse;
pub mod solver;

pub use concolic::{ConcolicConfig, Strategy, StrategyKind, TestCase};
pub use driver::{crabs_run, replay, BudgetConfig, RunConfig, RunReport};
pub use ir::{GoalSet, Program, TransId};
pub use parse::parse_program;
pub use solver::Fuel;
