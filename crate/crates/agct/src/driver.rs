//! The alternation driver: concolic testing on the monitored product and
//! model checking on the original program take turns under a fuel budget;
//! covered goals are established by replaying tests, never by trusting the
//! engines.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cegar::{abstract_mc, Arg, PostCache, PredicateSet};
use crate::concolic::{concolic_test, ConcolicConfig, Strategy, TestCase};
use crate::ir::{product, GoalSet, Program, TransId};
use crate::monitor::{lift_goals, monitor_from_arg, Monitor};
use crate::solver::Fuel;

/// Fuel budgets: `total` for the whole run, `concolic` and `mc` per
/// iteration. A zero `mc` budget turns the run into the pure-concolic
/// baseline: a single concolic pass over the full total.
#[derive(Debug, Clone, Copy)]
pub struct BudgetConfig {
    pub total: u64,
    pub concolic: u64,
    pub mc: u64,
}

impl BudgetConfig {
    /// Default per-iteration split: a fifth of the total per iteration,
    /// 80% of it for testing and 20% for model checking.
    pub fn with_default_split(total: u64) -> Self {
        let chunk = (total / 5).max(1);
        BudgetConfig {
            total,
            concolic: (chunk * 8 / 10).max(1),
            mc: (chunk * 2 / 10).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub budget: BudgetConfig,
    pub strategy: Strategy,
    pub concolic: ConcolicConfig,
    /// Pure-concolic baseline: skip model checking and report coverage
    /// against the graph-reachable branch count.
    pub baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub covered_new: Vec<String>,
    pub unreachable_new: Vec<String>,
    pub predicates_added: u64,
    pub arg_states: u64,
    pub monitor_states: u64,
    pub product_locations: u64,
    pub fuel_spent: u64,
}

/// Final report; field names are part of the file-format contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub branches: u64,
    pub covered: u64,
    pub unreachable: Vec<String>,
    pub ratio: f64,
    pub iterations: Vec<IterationRecord>,
}

/// Everything a run produced beyond the report, for inspection and dumps.
pub struct RunArtifacts {
    pub suite: BTreeSet<TestCase>,
    pub covered: GoalSet,
    pub remaining: GoalSet,
    pub unreachable: GoalSet,
    pub predicates: PredicateSet,
    pub args: Vec<Arg>,
    pub monitors: Vec<Monitor>,
    pub products: Vec<Program>,
    pub stalled: bool,
    pub fuel_spent: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayResult {
    pub path: Vec<TransId>,
    pub covered: GoalSet,
    pub step_capped: bool,
}

/// Deterministic concrete interpretation of one test. Missing inputs are
/// padded with seeded random values, mirroring how exploration extends a
/// pending test.
pub fn replay(p: &Program, t: &TestCase, config: &ConcolicConfig, pad_seed: u64) -> ReplayResult {
    let mut rng = ChaCha8Rng::seed_from_u64(pad_seed);
    let mut valuation = vec![0i64; p.vars.len()];
    let mut loc = p.init;
    let mut k = 0usize;
    let mut steps = 0u64;
    let mut path = Vec::new();
    let mut covered = GoalSet::new();
    let mut step_capped = false;
    loop {
        if steps >= config.step_cap {
            step_capped = true;
            break;
        }
        let enabled = p.out_edges(loc).iter().find(|e| match &e.cmd.guard {
            None => true,
            Some(g) => g.eval(|v| valuation[v.0 as usize]),
        });
        let Some(e) = enabled else { break };
        match &e.cmd.op {
            crate::ir::Op::Assume => {}
            crate::ir::Op::Input(x) => {
                let w = if k < t.0.len() {
                    t.0[k]
                } else {
                    rng.gen_range(-config.rand_range..=config.rand_range)
                };
                valuation[x.0 as usize] = w;
                k += 1;
            }
            crate::ir::Op::Assign(x, exp) => {
                let Some(v) = exp.eval(|v| valuation[v.0 as usize]) else {
                    step_capped = true;
                    break;
                };
                valuation[x.0 as usize] = v;
            }
        }
        if p.out_edges(e.src).len() == 2 {
            covered.insert(e.id.clone());
        }
        path.push(e.id.clone());
        loc = e.dst;
        steps += 1;
    }
    ReplayResult { path, covered, step_capped }
}

/// The main loop: concolic testing on the current product program and
/// lifted goals, replay-based cover checking, then model checking of the
/// original program with the accumulated predicates; each returned
/// abstraction becomes a monitor multiplied into the product. Stops when
/// every goal is covered or proven unreachable, the budget is spent, or an
/// iteration makes no progress of any kind.
pub fn crabs_run(p: &Program, goals_in: &GoalSet, cfg: &RunConfig) -> (RunReport, RunArtifacts) {
    let all_branches = p.branches();
    let mut goals = goals_in.clone();
    let mut covered = GoalSet::new();
    let mut unreachable = GoalSet::new();
    let mut suite: BTreeSet<TestCase> = BTreeSet::new();
    let mut predicates = PredicateSet::new();
    let mut cache = PostCache::default();
    let mut pbar = p.clone();
    let mut lifted: Option<BTreeMap<TransId, TransId>> = None;
    let mut gbar = goals.clone();
    let mut fuel = Fuel::new(cfg.budget.total);
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut args = Vec::new();
    let mut monitors: Vec<Monitor> = Vec::new();
    let mut products = Vec::new();
    let mut stalled = false;
    let mut iteration = 0u32;

    while !goals.is_empty() && !fuel.exhausted() {
        iteration += 1;
        let spent_before = fuel.spent();
        let mut covered_new = GoalSet::new();
        let mut unreachable_new = GoalSet::new();
        let mut mc_interrupted = false;

        // -- concolic phase on the product program
        let concolic_budget = if cfg.budget.mc == 0 {
            fuel.remaining()
        } else {
            cfg.budget.concolic.min(fuel.remaining())
        };
        let mut phase = Fuel::new(concolic_budget);
        let out = concolic_test(
            &pbar,
            &gbar,
            &mut phase,
            &cfg.strategy,
            &cfg.concolic,
            lifted.as_ref(),
        );
        fuel.charge(phase.spent());
        for t in &out.suite {
            let r = replay(p, t, &cfg.concolic, cfg.strategy.seed);
            for g in r.covered {
                if goals.remove(&g) {
                    covered.insert(g.clone());
                    covered_new.insert(g);
                }
            }
            suite.insert(t.clone());
        }

        if !goals.is_empty() && cfg.budget.mc > 0 && !fuel.exhausted() {
            // -- model checking always runs on the original program
            let mut phase = Fuel::new(cfg.budget.mc.min(fuel.remaining()));
            let preds_before = predicates.len();
            let mc = abstract_mc(p, predicates, &goals, &mut phase, &mut cache);
            fuel.charge(phase.spent());
            predicates = mc.predicates.clone();
            mc_interrupted = mc.fuel_exhausted;
            let predicates_added = (predicates.len() - preds_before) as u64;
            let arg_states = mc.arg.nodes.len() as u64;
            for t in &mc.suite {
                let r = replay(p, t, &cfg.concolic, cfg.strategy.seed);
                for g in r.covered {
                    if goals.remove(&g) {
                        covered.insert(g.clone());
                        covered_new.insert(g);
                    }
                }
                suite.insert(t.clone());
            }
            for g in &mc.unreachable {
                if goals.remove(g) {
                    unreachable.insert(g.clone());
                    unreachable_new.insert(g.clone());
                }
            }
            let mut monitor_states = 0u64;
            let mut refined_product = false;
            if mc.closed && !goals.is_empty() {
                if let Ok(mon) = monitor_from_arg(&mc.arg, p) {
                    monitor_states = mon.program.loc_count as u64;
                    if let Ok(next) = product(&pbar, &mon.program) {
                        pbar = next;
                        let map = lift_goals(&goals, &pbar);
                        gbar = map.keys().cloned().collect();
                        lifted = Some(map);
                        products.push(pbar.clone());
                        refined_product = true;
                    }
                    monitors.push(mon);
                }
            }
            if !refined_product && !goals.is_empty() {
                // goals shrank: retire lifted goals whose projection is done
                if let Some(map) = &lifted {
                    gbar = map
                        .iter()
                        .filter(|(_, orig)| goals.contains(*orig))
                        .map(|(id, _)| id.clone())
                        .collect();
                } else {
                    gbar = goals.clone();
                }
            }
            iterations.push(IterationRecord {
                iteration,
                covered_new: ids(&covered_new),
                unreachable_new: ids(&unreachable_new),
                predicates_added,
                arg_states,
                monitor_states,
                product_locations: pbar.loc_count as u64,
                fuel_spent: fuel.spent() - spent_before,
            });
            args.push(mc.arg);
        } else {
            // concolic-only iteration (baseline, final pass, or done)
            if let Some(map) = &lifted {
                gbar = map
                    .iter()
                    .filter(|(_, orig)| goals.contains(*orig))
                    .map(|(id, _)| id.clone())
                    .collect();
            } else {
                gbar = goals.clone();
            }
            iterations.push(IterationRecord {
                iteration,
                covered_new: ids(&covered_new),
                unreachable_new: ids(&unreachable_new),
                predicates_added: 0,
                arg_states: 0,
                monitor_states: 0,
                product_locations: pbar.loc_count as u64,
                fuel_spent: fuel.spent() - spent_before,
            });
            if cfg.budget.mc == 0 {
                break; // the baseline is a single full-budget pass
            }
        }

        let rec = iterations.last().expect("always recorded");
        if rec.covered_new.is_empty()
            && rec.unreachable_new.is_empty()
            && rec.predicates_added == 0
            && !mc_interrupted
            && !goals.is_empty()
            && !fuel.exhausted()
        {
            // a genuine fixpoint: the model checker finished its drain and
            // changed nothing, so more fuel would replay the same work
            stalled = true;
            break;
        }
    }

    let denominator = if cfg.baseline {
        p.graph_reachable_branches().len() as u64
    } else {
        all_branches.len() as u64 - unreachable.len() as u64
    };
    let c = covered.len() as u64;
    let ratio = if denominator == 0 { 1.0 } else { c as f64 / denominator as f64 };
    let report = RunReport {
        branches: all_branches.len() as u64,
        covered: c,
        unreachable: ids(&unreachable),
        ratio,
        iterations,
    };
    let artifacts = RunArtifacts {
        suite,
        covered,
        remaining: goals,
        unreachable,
        predicates,
        args,
        monitors,
        products,
        stalled,
        fuel_spent: fuel.spent(),
    };
    (report, artifacts)
}

fn ids(set: &GoalSet) -> Vec<String> {
    set.iter().map(|t| t.to_string()).collect()
}

// ------------------------------------------------------------ suite file --

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub values: Vec<i64>,
    pub covers: Vec<String>,
}

/// Serialized test suite: input values plus the branch ids each test
/// covers on replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteFile {
    pub tests: Vec<SuiteEntry>,
}

pub fn serialize_suite(
    p: &Program,
    suite: &BTreeSet<TestCase>,
    config: &ConcolicConfig,
    pad_seed: u64,
) -> SuiteFile {
    SuiteFile {
        tests: suite
            .iter()
            .map(|t| SuiteEntry {
                values: t.0.clone(),
                covers: ids(&replay(p, t, config, pad_seed).covered),
            })
            .collect(),
    }
}

pub fn load_suite(json: &str) -> Result<BTreeSet<TestCase>, serde_json::Error> {
    let file: SuiteFile = serde_json::from_str(json)?;
    Ok(file.tests.into_iter().map(|e| TestCase(e.values)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concolic::StrategyKind;
    use crate::parse::parse_program;

    fn cfg(total: u64, concolic: u64, mc: u64, kind: StrategyKind) -> RunConfig {
        RunConfig {
            budget: BudgetConfig { total, concolic, mc },
            strategy: Strategy { kind, seed: 0 },
            concolic: ConcolicConfig::default(),
            baseline: false,
        }
    }

    #[test]
    fn replay_covers_expected_branches() {
        let src = "var x; var g1 = 0; var g2 = 0; x = input(); if (x == 7) { g1 = 1; } else { g2 = 1; }";
        let p = parse_program(src).unwrap();
        let r = replay(&p, &TestCase(vec![0]), &ConcolicConfig::default(), 0);
        assert_eq!(r.covered.len(), 1);
        let else_arm = r.covered.iter().next().unwrap();
        assert!(else_arm.as_str().ends_with("#1"));
        let r7 = replay(&p, &TestCase(vec![7]), &ConcolicConfig::default(), 0);
        assert!(r7.covered.iter().next().unwrap().as_str().ends_with("#0"));
        assert!(!r7.step_capped);
    }

    #[test]
    fn replay_empty_test_on_input_free_program() {
        let p = parse_program("var x = 1; x = x + 1;").unwrap();
        let r = replay(&p, &TestCase(vec![]), &ConcolicConfig::default(), 0);
        assert_eq!(r.path.len(), 2);
        assert!(r.covered.is_empty());
    }

    #[test]
    fn replay_all_tens_reaches_motivating_goal() {
        let src = "var i = 0; var b; var x; var g; b = 0;
                   while (i < 30) { x = input(); if (x != 10) { b = 1; } i = i + 1; }
                   if (b == 0) { g = 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let r = replay(&p, &TestCase(vec![10; 30]), &ConcolicConfig::default(), 0);
        // the then-arm of the final test plus its marker assignment ran
        let goal = p
            .edges
            .iter()
            .find(|e| {
                matches!(&e.cmd.op, crate::ir::Op::Assume)
                    && e.cmd.guard.as_ref().map(|g| g.rel) == Some(crate::logic::Rel::Eq)
                    && p.out_edges(e.src).len() == 2
            })
            .unwrap();
        assert!(r.covered.contains(&goal.id));
    }

    #[test]
    fn no_branch_program_reports_full_coverage() {
        let p = parse_program("var x = 1; x = x + 1;").unwrap();
        let (report, art) = crabs_run(&p, &GoalSet::new(), &cfg(1_000, 800, 200, StrategyKind::Dfs));
        assert_eq!(report.branches, 0);
        assert_eq!(report.covered, 0);
        assert_eq!(report.ratio, 1.0);
        assert!(!art.stalled);
        assert!(art.remaining.is_empty());
    }

    #[test]
    fn covers_simple_branches_in_one_iteration() {
        let src = "var x; var s = 0; x = input(); if (x == 3) { s = 1; } else { s = 2; }";
        let p = parse_program(src).unwrap();
        let (report, art) = crabs_run(&p, &p.branches(), &cfg(20_000, 8_000, 2_000, StrategyKind::Dfs));
        assert_eq!(report.covered, 2);
        assert!((report.ratio - 1.0).abs() < 1e-12);
        assert!(art.remaining.is_empty());
        assert!(report.iterations.len() == 1);
    }

    #[test]
    fn baseline_equals_pure_concolic_suite() {
        let src = "var x; var y; var s = 0; x = input(); y = input();
                   if (x > 3) { s = s + 1; } if (y < 2) { s = s + 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let goals = p.branches();
        let total = 5_000;
        let mut run_cfg = cfg(total, total, 0, StrategyKind::Dfs);
        run_cfg.baseline = true;
        let (_, art) = crabs_run(&p, &goals, &run_cfg);
        let mut fuel = Fuel::new(total);
        let direct = concolic_test(
            &p,
            &goals,
            &mut fuel,
            &Strategy { kind: StrategyKind::Dfs, seed: 0 },
            &ConcolicConfig::default(),
            None,
        );
        assert_eq!(art.suite, direct.suite);
    }

    #[test]
    fn covered_and_unreachable_stay_disjoint() {
        let src = "var c = 0; var x; var g1 = 0; var g2 = 0; x = input();
                   if (x > 0) { c = c + 1; }
                   if (c < 0) { g1 = 1; } else { g2 = 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let (report, art) = crabs_run(&p, &p.branches(), &cfg(100_000, 2_000, 20_000, StrategyKind::Dfs));
        assert_eq!(art.unreachable.len(), 1);
        assert!(art.covered.is_disjoint(&art.unreachable));
        assert!(art.remaining.is_empty());
        // c/r counts reachable branches only
        assert_eq!(report.branches, 4);
        assert_eq!(report.covered, 3);
        assert!((report.ratio - 1.0).abs() < 1e-12);
        // monotone coverage across iterations
        let mut seen = 0usize;
        for rec in &report.iterations {
            seen += rec.covered_new.len();
        }
        assert_eq!(seen, report.covered as usize);
    }

    #[test]
    fn suite_round_trip_is_lossless() {
        let src = "var x; var s = 0; x = input(); if (x == 3) { s = 1; } else { s = 2; }";
        let p = parse_program(src).unwrap();
        let (_, art) = crabs_run(&p, &p.branches(), &cfg(20_000, 8_000, 2_000, StrategyKind::Dfs));
        let file = serialize_suite(&p, &art.suite, &ConcolicConfig::default(), 0);
        let json = serde_json::to_string_pretty(&file).unwrap();
        let loaded = load_suite(&json).unwrap();
        assert_eq!(loaded, art.suite);
        // recorded covers reproduce on replay
        for entry in &file.tests {
            let r = replay(&p, &TestCase(entry.values.clone()), &ConcolicConfig::default(), 0);
            assert_eq!(ids(&r.covered), entry.covers);
        }
        // empty suite round-trips
        let empty = serialize_suite(&p, &BTreeSet::new(), &ConcolicConfig::default(), 0);
        let json = serde_json::to_string(&empty).unwrap();
        assert!(load_suite(&json).unwrap().is_empty());
    }

    #[test]
    fn reports_are_reproducible() {
        let src = "var x; var s = 0; x = input(); if (x == 3) { s = 1; } else { s = 2; }";
        let p = parse_program(src).unwrap();
        let run = || {
            let (report, _) = crabs_run(&p, &p.branches(), &cfg(10_000, 4_000, 1_000, StrategyKind::UniformRandom));
            serde_json::to_string(&report).unwrap()
        };
        assert_eq!(run(), run());
    }
}
