//! Concolic path exploration: concrete runs drive the path while symbolic
//! constraints over the input symbols are collected, and backtracking
//! negates a chosen path constraint to steer the next run.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ir::{GoalSet, LinExpr, Loc, Op, Program, TransId, VarId};
use crate::logic::{Atom, LinComb};
use crate::solver::{check_sat, Fuel, SatResult};

/// A test: the sequence of values consumed by `input()` along a run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestCase(pub Vec<i64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Flip the largest unexplored branch first.
    Dfs,
    /// Flip a branch chosen uniformly among those on the current path.
    RandomBranch,
    /// Random choice with weight decreasing in path position (∝ 1/(pos+1)).
    UniformRandom,
    /// Flip the branch whose other arm is statically closest to an
    /// uncovered goal.
    CfgGuided,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s {
            "dfs" => Some(StrategyKind::Dfs),
            "rnd-branch" => Some(StrategyKind::RandomBranch),
            "unf-rnd" => Some(StrategyKind::UniformRandom),
            "cfg" => Some(StrategyKind::CfgGuided),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Dfs => "dfs",
            StrategyKind::RandomBranch => "rnd-branch",
            StrategyKind::UniformRandom => "unf-rnd",
            StrategyKind::CfgGuided => "cfg",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ConcolicConfig {
    /// `randVal()` draws uniformly from `[-rand_range, rand_range]`.
    pub rand_range: i64,
    /// Hard cap on executed transitions per concrete run; hitting it ends
    /// the run as if no transition were enabled.
    pub step_cap: u64,
}

impl Default for ConcolicConfig {
    fn default() -> Self {
        ConcolicConfig { rand_range: 1000, step_cap: 10_000 }
    }
}

/// Symbolic memory: per-variable linear expression over input symbols,
/// `None` for not-yet-defined.
#[derive(Debug, Clone)]
pub struct SymbolicMemory(Vec<Option<LinComb<u32>>>);

impl SymbolicMemory {
    pub fn fresh(nvars: usize) -> Self {
        SymbolicMemory(vec![None; nvars])
    }

    pub fn get(&self, v: VarId) -> Option<&LinComb<u32>> {
        self.0[v.0 as usize].as_ref()
    }

    pub fn set(&mut self, v: VarId, e: LinComb<u32>) {
        self.0[v.0 as usize] = Some(e);
    }
}

/// Substitutes symbolic memory into an expression. When the result would
/// contain a product of two symbolic expressions, the operand whose
/// symbolic form mentions fewer input symbols is replaced by its concrete
/// value (ties replace the right operand), and the event is reported so
/// path divergence can be explained.
pub fn update_sym_mem(
    sym: &SymbolicMemory,
    exp: &LinExpr,
    valuation: &[i64],
) -> (LinComb<u32>, bool) {
    let lookup = |v: VarId| -> LinComb<u32> {
        sym.get(v)
            .cloned()
            .unwrap_or_else(|| LinComb::constant(valuation[v.0 as usize]))
    };
    let mut out = exp.lin.subst(|v| lookup(*v));
    let mut concretized = false;
    if let Some(nl) = &exp.nonlinear {
        let sa = lookup(nl.a);
        let sb = lookup(nl.b);
        let contribution = if sa.is_constant() {
            sb.scale(nl.coeff * sa.constant)
        } else if sb.is_constant() {
            sa.scale(nl.coeff * sb.constant)
        } else {
            concretized = true;
            let (na, nb) = (sa.terms.len(), sb.terms.len());
            if na < nb {
                // concretize the leaner left operand
                sb.scale(nl.coeff * valuation[nl.a.0 as usize])
            } else {
                sa.scale(nl.coeff * valuation[nl.b.0 as usize])
            }
        };
        out = out.add(&contribution);
    }
    (out, concretized)
}

/// Reverse-BFS edge distance from every location to the nearest goal
/// branch's source; `None` when no goal is graph-reachable from there.
pub fn compute_cfg_distances(p: &Program, goals: &GoalSet) -> Vec<Option<u64>> {
    let mut preds: Vec<Vec<Loc>> = vec![Vec::new(); p.loc_count as usize];
    for e in &p.edges {
        preds[e.dst.0 as usize].push(e.src);
    }
    let mut dist: Vec<Option<u64>> = vec![None; p.loc_count as usize];
    let mut queue = VecDeque::new();
    for id in goals {
        if let Some(e) = p.edge_by_id(id) {
            if dist[e.src.0 as usize].is_none() {
                dist[e.src.0 as usize] = Some(0);
                queue.push_back(e.src);
            }
        }
    }
    while let Some(l) = queue.pop_front() {
        let d = dist[l.0 as usize].unwrap();
        for &q in &preds[l.0 as usize] {
            if dist[q.0 as usize].is_none() {
                dist[q.0 as usize] = Some(d + 1);
                queue.push_back(q);
            }
        }
    }
    dist
}

/// One collected path constraint with the bookkeeping needed for flipping.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub atom: Atom<u32>,
    /// Source location had two outgoing transitions.
    pub branch_site: bool,
    /// The sibling arm, for distance scoring.
    pub flip_edge: Option<TransId>,
    /// Destination of the sibling arm.
    pub flip_target: Option<Loc>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub test: TestCase,
    pub path: Vec<TransId>,
    pub concretizations: u32,
}

#[derive(Debug)]
pub struct ConcolicOutcome {
    pub suite: BTreeSet<TestCase>,
    pub remaining: GoalSet,
    pub covered: GoalSet,
    pub paths_explored: u64,
    pub traces: Vec<RunTrace>,
}

struct Explorer<'a> {
    program: &'a Program,
    config: &'a ConcolicConfig,
    projection: Option<&'a BTreeMap<TransId, TransId>>,
    strategy: &'a Strategy,
    rng_input: ChaCha8Rng,
    rng_pick: ChaCha8Rng,
    /// Negation prefixes already attempted (SAT or not), per path prefix.
    attempted: HashSet<Vec<Atom<u32>>>,
    goals: GoalSet,
    covered: GoalSet,
    distances: Vec<Option<u64>>,
    distances_stale: bool,
}

impl<'a> Explorer<'a> {
    fn rand_val(&mut self) -> i64 {
        self.rng_input.gen_range(-self.config.rand_range..=self.config.rand_range)
    }

    fn remove_goal(&mut self, id: &TransId) {
        let mut hit = false;
        if self.goals.remove(id) {
            hit = true;
            self.covered.insert(id.clone());
        }
        // on a product, covering one lifted goal covers every goal with the
        // same projection
        if hit {
            if let Some(proj) = self.projection {
                if let Some(orig) = proj.get(id) {
                    let same: Vec<TransId> = self
                        .goals
                        .iter()
                        .filter(|g| proj.get(*g) == Some(orig))
                        .cloned()
                        .collect();
                    for g in same {
                        self.goals.remove(&g);
                        self.covered.insert(g);
                    }
                }
            }
            self.distances_stale = true;
        }
    }

    /// One concrete+symbolic run realizing `tst` (extended with random
    /// values on demand). Returns the collected path entries.
    fn run(&mut self, tst: &mut Vec<i64>, fuel: &mut Fuel) -> (Vec<PathEntry>, Vec<TransId>, u32) {
        let p = self.program;
        let nvars = p.vars.len();
        let mut loc = p.init;
        let mut valuation = vec![0i64; nvars];
        let mut sym = SymbolicMemory::fresh(nvars);
        let mut pathc: Vec<PathEntry> = Vec::new();
        let mut path: Vec<TransId> = Vec::new();
        let mut k = 0usize;
        let mut steps = 0u64;
        let mut events = 0u32;
        loop {
            if steps >= self.config.step_cap || fuel.exhausted() {
                break;
            }
            let enabled = p
                .out_edges(loc)
                .iter()
                .find(|e| match &e.cmd.guard {
                    None => true,
                    Some(g) => g.eval(|v| valuation[v.0 as usize]),
                });
            let Some(e) = enabled else {
                break;
            };
            fuel.charge(1);
            self.remove_goal(&e.id);
            if let Some(g) = &e.cmd.guard {
                let atom = g.subst(|v| {
                    sym.get(*v)
                        .cloned()
                        .unwrap_or_else(|| LinComb::constant(valuation[v.0 as usize]))
                });
                let siblings = p.out_edges(loc);
                let branch_site = siblings.len() == 2;
                let sibling = siblings.iter().find(|s| s.id != e.id);
                pathc.push(PathEntry {
                    atom,
                    branch_site,
                    flip_edge: sibling.map(|s| s.id.clone()),
                    flip_target: sibling.map(|s| s.dst),
                });
            }
            match &e.cmd.op {
                Op::Assume => {}
                Op::Input(x) => {
                    let w = if k < tst.len() {
                        tst[k]
                    } else {
                        let w = self.rand_val();
                        tst.push(w);
                        w
                    };
                    valuation[x.0 as usize] = w;
                    sym.set(*x, LinComb::sym(k as u32));
                    k += 1;
                }
                Op::Assign(x, exp) => {
                    let Some(v) = exp.eval(|v| valuation[v.0 as usize]) else {
                        // arithmetic overflow ends the run like a blocked state
                        break;
                    };
                    let (s, ev) = update_sym_mem(&sym, exp, &valuation);
                    valuation[x.0 as usize] = v;
                    sym.set(*x, s);
                    events += ev as u32;
                }
            }
            path.push(e.id.clone());
            loc = e.dst;
            steps += 1;
        }
        (pathc, path, events)
    }

    /// Candidate order per strategy, most preferred first.
    fn order_candidates(&mut self, pathc: &[PathEntry], candidates: Vec<usize>) -> Vec<usize> {
        match self.strategy.kind {
            StrategyKind::Dfs => {
                let mut c = candidates;
                c.sort_unstable_by(|a, b| b.cmp(a));
                c
            }
            StrategyKind::RandomBranch => {
                let mut c = candidates;
                // Fisher-Yates with the strategy stream
                for i in (1..c.len()).rev() {
                    let j = self.rng_pick.gen_range(0..=i);
                    c.swap(i, j);
                }
                c
            }
            StrategyKind::UniformRandom => {
                let mut remaining = candidates;
                let mut out = Vec::with_capacity(remaining.len());
                while !remaining.is_empty() {
                    let weights: Vec<f64> =
                        remaining.iter().map(|i| 1.0 / (*i as f64 + 1.0)).collect();
                    let total: f64 = weights.iter().sum();
                    let mut pick = self.rng_pick.gen_range(0.0..total);
                    let mut chosen = remaining.len() - 1;
                    for (idx, w) in weights.iter().enumerate() {
                        if pick < *w {
                            chosen = idx;
                            break;
                        }
                        pick -= w;
                    }
                    out.push(remaining.remove(chosen));
                }
                out
            }
            StrategyKind::CfgGuided => {
                if self.distances_stale {
                    self.distances = compute_cfg_distances(self.program, &self.goals);
                    self.distances_stale = false;
                }
                let score = |i: &usize| -> u64 {
                    let entry = &pathc[*i];
                    // flipping straight onto an uncovered goal edge is best
                    if entry
                        .flip_edge
                        .as_ref()
                        .map(|id| self.goals.contains(id))
                        .unwrap_or(false)
                    {
                        return 0;
                    }
                    entry
                        .flip_target
                        .and_then(|l| self.distances[l.0 as usize])
                        .map(|d| d + 1)
                        .unwrap_or(u64::MAX)
                };
                let mut c = candidates;
                // nearest goal first; ties broken toward the deepest branch
                c.sort_by(|a, b| score(a).cmp(&score(b)).then(b.cmp(a)));
                c
            }
        }
    }

    /// Chooses a branch to flip and solves for a new test. Candidates
    /// already attempted on this path prefix are skipped; returns the first
    /// choice whose negated constraint is satisfiable.
    fn pick_backtrack(
        &mut self,
        pathc: &[PathEntry],
        fuel: &mut Fuel,
    ) -> Option<(usize, Vec<i64>)> {
        let candidates: Vec<usize> = (0..pathc.len())
            .filter(|i| pathc[*i].branch_site && pathc[*i].atom.const_value().is_none())
            .collect();
        let ordered = self.order_candidates(pathc, candidates);
        for i in ordered {
            if fuel.exhausted() {
                return None;
            }
            let mut key: Vec<Atom<u32>> = pathc[..i].iter().map(|e| e.atom.clone()).collect();
            key.push(pathc[i].atom.negate());
            if !self.attempted.insert(key) {
                continue;
            }
            let mut phi: Vec<Atom<u32>> = pathc[..i]
                .iter()
                .filter(|e| e.atom.const_value().is_none())
                .map(|e| e.atom.clone())
                .collect();
            phi.push(pathc[i].atom.negate());
            match check_sat(&phi, fuel) {
                SatResult::Sat(model) => {
                    let len = phi
                        .iter()
                        .flat_map(|a| a.syms())
                        .max()
                        .map(|m| m + 1)
                        .unwrap_or(0);
                    let tst = (0..len).map(|j| model.value(&j)).collect();
                    return Some((i, tst));
                }
                SatResult::Unsat => continue,
                // unknown is conservative: skip this flip
                SatResult::Unknown => continue,
            }
        }
        None
    }
}

/// Algorithm: repeatedly execute the program concretely while collecting
/// symbolic path constraints, then negate an unexplored branch constraint
/// to obtain the next test, until the goals are covered, the budget is
/// spent, or no backtrack candidate remains.
pub fn concolic_test(
    program: &Program,
    goals: &GoalSet,
    fuel: &mut Fuel,
    strategy: &Strategy,
    config: &ConcolicConfig,
    projection: Option<&BTreeMap<TransId, TransId>>,
) -> ConcolicOutcome {
    let mut ex = Explorer {
        program,
        config,
        projection,
        strategy,
        rng_input: ChaCha8Rng::seed_from_u64(strategy.seed),
        rng_pick: ChaCha8Rng::seed_from_u64(strategy.seed.wrapping_add(0x9E3779B97F4A7C15)),
        attempted: HashSet::new(),
        goals: goals.clone(),
        covered: GoalSet::new(),
        distances: Vec::new(),
        distances_stale: true,
    };
    let mut suite: BTreeSet<TestCase> = BTreeSet::new();
    let mut traces: Vec<RunTrace> = Vec::new();
    let mut paths = 0u64;
    let mut tst: Vec<i64> = Vec::new();
    loop {
        let (pathc, path, events) = ex.run(&mut tst, fuel);
        paths += 1;
        let test = TestCase(tst.clone());
        suite.insert(test.clone());
        traces.push(RunTrace { test, path, concretizations: events });
        if ex.goals.is_empty() || fuel.exhausted() {
            break;
        }
        match ex.pick_backtrack(&pathc, fuel) {
            Some((_idx, next)) => tst = next,
            None => break,
        }
    }
    ConcolicOutcome {
        suite,
        remaining: ex.goals,
        covered: ex.covered,
        paths_explored: paths,
        traces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::NonlinFactor;
    use crate::parse::parse_program;

    fn strat(kind: StrategyKind) -> Strategy {
        Strategy { kind, seed: 0 }
    }

    #[test]
    fn straight_line_yields_one_test() {
        let p = parse_program("var x = 1; x = x + 1;").unwrap();
        let mut fuel = Fuel::new(1_000);
        let out = concolic_test(
            &p,
            &GoalSet::new(),
            &mut fuel,
            &strat(StrategyKind::Dfs),
            &ConcolicConfig::default(),
            None,
        );
        assert_eq!(out.suite.len(), 1);
        assert!(out.remaining.is_empty());
    }

    #[test]
    fn covers_equality_branch_with_solved_input() {
        let src = "var x; var g1 = 0; var g2 = 0; x = input(); if (x == 7) { g1 = 1; } else { g2 = 1; }";
        let p = parse_program(src).unwrap();
        let goals = p.branches();
        for kind in [
            StrategyKind::Dfs,
            StrategyKind::RandomBranch,
            StrategyKind::UniformRandom,
            StrategyKind::CfgGuided,
        ] {
            let mut fuel = Fuel::new(10_000);
            let out = concolic_test(
                &p,
                &goals,
                &mut fuel,
                &strat(kind),
                &ConcolicConfig::default(),
                None,
            );
            assert!(out.remaining.is_empty(), "{kind:?} left {:?}", out.remaining);
            assert!(out.paths_explored <= 2);
            assert!(
                out.suite.iter().any(|t| t.0.first() == Some(&7)),
                "{kind:?} suite {:?}",
                out.suite
            );
        }
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let src = "var x; var y; var s = 0; x = input(); y = input();
                   if (x > 3) { s = s + 1; } if (y < 2) { s = s + 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let goals = p.branches();
        let run = || {
            let mut fuel = Fuel::new(5_000);
            let out = concolic_test(
                &p,
                &goals,
                &mut fuel,
                &strat(StrategyKind::UniformRandom),
                &ConcolicConfig::default(),
                None,
            );
            (out.suite, out.remaining, out.covered, fuel.spent())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn coverage_soundness_by_replay() {
        let src = "var x; var s = 0; x = input();
                   while (x > 0) { x = x - 1; s = s + 1; }
                   if (s == 3) { s = 0; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let goals = p.branches();
        let mut fuel = Fuel::new(50_000);
        let out = concolic_test(
            &p,
            &goals,
            &mut fuel,
            &strat(StrategyKind::Dfs),
            &ConcolicConfig::default(),
            None,
        );
        // every branch reported covered is traversed by some suite test
        let mut seen = GoalSet::new();
        for t in &out.suite {
            let r = crate::driver::replay(&p, t, &ConcolicConfig::default(), 0);
            seen.extend(r.covered);
        }
        for g in &out.covered {
            assert!(seen.contains(g), "covered {g} not replayed");
        }
    }

    #[test]
    fn fuel_monotone_coverage_dfs() {
        let src = "var x; var y; var s = 0; x = input(); y = input();
                   if (x == 4) { s = 1; } if (y == 9) { s = 2; } if (x + y == 0) { s = 3; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let goals = p.branches();
        let mut prev = GoalSet::new();
        for budget in [5, 20, 100, 1_000, 10_000] {
            let mut fuel = Fuel::new(budget);
            let out = concolic_test(
                &p,
                &goals,
                &mut fuel,
                &strat(StrategyKind::Dfs),
                &ConcolicConfig::default(),
                None,
            );
            assert!(
                prev.is_subset(&out.covered),
                "coverage shrank at budget {budget}: {prev:?} vs {:?}",
                out.covered
            );
            prev = out.covered;
        }
    }

    #[test]
    fn update_sym_mem_examples() {
        // exp = x+1 with sym(x)=r0  →  r0+1
        let p = parse_program("var x = 0; var y = 0; var z = 0;").unwrap();
        let (x, y) = (VarId(0), VarId(1));
        let mut sym = SymbolicMemory::fresh(p.vars.len());
        sym.set(x, LinComb::sym(0));
        let mut exp = LinExpr::linear(LinComb::sym(x));
        exp.lin.constant = 1;
        let (got, ev) = update_sym_mem(&sym, &exp, &[5, 3, 0]);
        assert!(!ev);
        let mut want = LinComb::sym(0u32);
        want.constant = 1;
        assert_eq!(got, want);

        // exp = x*y, sym(x)=r0, sym(y)=r1, v(y)=3: tie → right operand
        sym.set(y, LinComb::sym(1));
        let exp = LinExpr {
            lin: LinComb::constant(0),
            nonlinear: Some(NonlinFactor { coeff: 1, a: x, b: y }),
        };
        let (got, ev) = update_sym_mem(&sym, &exp, &[5, 3, 0]);
        assert!(ev);
        assert_eq!(got, LinComb::sym(0u32).scale(3));

        // exp = 2*x − y with constant sym(y) stays exact
        sym.set(y, LinComb::constant(5));
        let exp = LinExpr::linear(LinComb::sym(x).scale(2).add(&LinComb::sym(y).scale(-1)));
        let (got, ev) = update_sym_mem(&sym, &exp, &[5, 3, 0]);
        assert!(!ev);
        let mut want = LinComb::sym(0u32).scale(2);
        want.constant = -5;
        assert_eq!(got, want);
    }

    #[test]
    fn cfg_distances_examples() {
        let src = "var i = 0; var b; var x; var g; b = 0;
                   while (i < 30) { x = input(); if (x != 10) { b = 1; } i = i + 1; }
                   if (b == 0) { g = 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        // goal: the then-arm of the final if (source = the b-test location)
        let goal_edge = p
            .edges
            .iter()
            .find(|e| {
                matches!(&e.cmd.op, Op::Assume)
                    && e.cmd.guard.as_ref().map(|g| g.rel) == Some(crate::logic::Rel::Eq)
                    && p.out_edges(e.src).len() == 2
                    && p.out_edges(e.dst).len() == 1
            })
            .unwrap();
        let goals: GoalSet = [goal_edge.id.clone()].into_iter().collect();
        let dist = compute_cfg_distances(&p, &goals);
        let btest = goal_edge.src;
        assert_eq!(dist[btest.0 as usize], Some(0));
        // loop head is one edge away (the loop-exit arm)
        let head = p
            .edges
            .iter()
            .find(|e| e.dst == btest)
            .map(|e| e.src)
            .unwrap();
        assert_eq!(dist[head.0 as usize], Some(1));

        // no goals → all None
        let dist = compute_cfg_distances(&p, &GoalSet::new());
        assert!(dist.iter().all(|d| d.is_none()));
    }

    #[test]
    fn cfg_guided_prefers_goal_directed_flips() {
        // x-branch then y-branch; goal sits behind the y-then arm
        let src = "var x; var y; var g = 0; x = input(); y = input();
                   if (x < 0) { g = 1; } if (y == 5) { g = 2; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        // leave only the y==5 then-arm as a goal
        let goal = p
            .edges
            .iter()
            .find(|e| {
                e.cmd.guard.as_ref().map(|g| (g.rel, g.lhs.constant)) == Some((crate::logic::Rel::Eq, -5))
            })
            .unwrap();
        let goals: GoalSet = [goal.id.clone()].into_iter().collect();
        let mut fuel = Fuel::new(10_000);
        let out = concolic_test(
            &p,
            &goals,
            &mut fuel,
            &strat(StrategyKind::CfgGuided),
            &ConcolicConfig::default(),
            None,
        );
        assert!(out.remaining.is_empty());
        // guided search should not need more than the initial run plus one flip
        assert!(out.paths_explored <= 2, "took {} paths", out.paths_explored);
    }
}
