//! Coverage-driven CEGAR with predicate abstraction.
//!
//! The model checker expands an abstract reachability graph (ARG) with a
//! FIFO worklist. Reaching a goal edge triggers a feasibility check of the
//! tree path: a satisfiable path mints a test from the model's input
//! symbols, an infeasible one refines the predicate set with weakest
//! precondition atoms and restarts from scratch. Once the budget is spent
//! the worklist is still drained, so the returned ARG is always closed
//! under the abstract post operator; goals with no witness anywhere in the
//! graph are provably unreachable.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::concolic::TestCase;
use crate::ir::{GoalSet, Loc, Op, Program, TransId, Transition, VarId};
use crate::logic::{path_constraints, transition_formula, wp_atom, Atom, Conj, Sym};
use crate::solver::{check_sat, implies3, Fuel, SatResult};

/// Identifier of a tracked predicate (an atom over unindexed program
/// variables). The distinguished predicate `false` is implicit: it is
/// represented by the dead flag on abstract states rather than a table
/// entry, and every predicate set conceptually contains it.
pub type PredId = u16;

/// The global predicate set π, closed under negation by construction.
#[derive(Debug, Clone, Default)]
pub struct PredicateSet {
    atoms: Vec<Atom<VarId>>,
    index: BTreeMap<Atom<VarId>, PredId>,
}

impl PredicateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts the canonical forms of `a` and `¬a`; returns true when at
    /// least one was new. Constant atoms are ignored.
    pub fn insert_pair(&mut self, a: &Atom<VarId>) -> bool {
        let mut added = false;
        for candidate in [a.canon(), a.negate().canon()] {
            if candidate.const_value().is_some() {
                continue;
            }
            if !self.index.contains_key(&candidate) {
                let id = self.atoms.len() as PredId;
                self.index.insert(candidate.clone(), id);
                self.atoms.push(candidate);
                added = true;
            }
        }
        added
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, id: PredId) -> &Atom<VarId> {
        &self.atoms[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PredId, &Atom<VarId>)> {
        self.atoms.iter().enumerate().map(|(i, a)| (i as PredId, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// A node of the abstract reachability graph: an abstract state
/// `(loc, preds)` plus its tree and subsumption structure.
#[derive(Debug, Clone)]
pub struct ArgNode {
    pub loc: Loc,
    pub preds: BTreeSet<PredId>,
    pub parent: Option<NodeId>,
    /// Index of the creating transition in the program's edge list.
    pub trans: Option<usize>,
    pub trans_id: Option<TransId>,
    pub subsumed_by: Option<NodeId>,
}

/// Closed abstract reachability graph.
#[derive(Debug, Clone)]
pub struct Arg {
    pub nodes: Vec<ArgNode>,
    pub root: NodeId,
    /// Snapshot of the predicate table the node sets index into.
    pub pred_atoms: Vec<Atom<VarId>>,
}

impl Arg {
    pub fn node(&self, id: NodeId) -> &ArgNode {
        &self.nodes[id.0 as usize]
    }

    pub fn is_subsumed(&self, id: NodeId) -> bool {
        self.node(id).subsumed_by.is_some()
    }

    /// Follows subsumption links to the unique non-subsumed representative.
    pub fn subsume_end(&self, mut id: NodeId) -> NodeId {
        while let Some(next) = self.node(id).subsumed_by {
            id = next;
        }
        id
    }

    /// Reflexive-transitive subsumption closure of one node.
    pub fn subsume_star(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(next) = self.node(cur).subsumed_by {
            out.push(next);
            cur = next;
        }
        out
    }

    /// Edges of the tree path from the root to `id`.
    pub fn tree_path(&self, id: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(parent) = self.node(cur).parent {
            out.push(self.node(cur).trans.expect("non-root node has a transition"));
            cur = parent;
        }
        out.reverse();
        out
    }

    /// DOT rendering: solid parent edges labeled by transition id, dashed
    /// subsumption edges, nodes labeled `loc: {preds}`.
    pub fn to_dot(&self, p: &Program) -> String {
        let mut s = String::new();
        s.push_str("digraph arg {\n  rankdir=TB;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let preds: Vec<String> = n
                .preds
                .iter()
                .map(|id| {
                    format!(
                        "{}",
                        self.pred_atoms[*id as usize]
                            .map_syms(|v| p.var_name(*v).to_string())
                    )
                })
                .collect();
            let label = if preds.is_empty() {
                format!("{}: true", p.loc_names[n.loc.0 as usize])
            } else {
                format!("{}: {}", p.loc_names[n.loc.0 as usize], preds.join(" & "))
            };
            let style = if n.subsumed_by.is_some() { ", style=dashed" } else { "" };
            let _ = writeln!(s, "  a{i} [label=\"{label}\", shape=box{style}];");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let (Some(parent), Some(tid)) = (n.parent, &n.trans_id) {
                let _ = writeln!(s, "  a{} -> a{} [label=\"{}\"];", parent.0, i, tid);
            }
            if let Some(by) = n.subsumed_by {
                let _ = writeln!(s, "  a{} -> a{} [style=dashed, constraint=false];", i, by.0);
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Memoized abstract-post computations, keyed by (edge index, predicate
/// set), plus path-feasibility verdicts. Entries extend incrementally as π
/// grows, so a restart or a later model-checking iteration reuses all
/// earlier entailment work.
#[derive(Debug, Default)]
pub struct PostCache {
    map: HashMap<(usize, Vec<PredId>), CacheEntry>,
    /// Definitive (never Unknown) feasibility verdicts per edge-index path:
    /// the minted test for a satisfiable path, `None` for an infeasible one.
    feasibility: HashMap<Vec<usize>, Option<TestCase>>,
}

#[derive(Debug, Clone)]
struct CacheEntry {
    dead: Option<bool>, // None = dead-check came back unknown
    checked_upto: PredId,
    implied: BTreeSet<PredId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbstractPost {
    /// `γ(A) ∧ φ` is unsatisfiable: the post contains `false`.
    Dead,
    Live(BTreeSet<PredId>),
}

/// The abstract strongest post `sp_a(A, φ)`, computed predicate by
/// predicate: `p` is in the result exactly when `γ(A) ∧ φ ⟹ p′` holds.
/// An unknown backend answer omits the predicate, which coarsens the
/// abstraction but keeps it sound.
///
/// `A` is expected to be a reachable-state label: satisfiable and
/// deductively closed within π (any π-predicate entailed by `γ(A)` is in
/// `A`). Labels produced by this function have both properties, which is
/// what lets untouched predicates on guard-free edges be answered from set
/// membership alone.
pub fn abstract_post(
    a: &BTreeSet<PredId>,
    edge_idx: usize,
    p: &Program,
    preds: &PredicateSet,
    fuel: &mut Fuel,
    cache: &mut PostCache,
) -> AbstractPost {
    let key = (edge_idx, a.iter().copied().collect::<Vec<_>>());
    let entry = cache.map.entry(key).or_insert(CacheEntry {
        dead: None,
        checked_upto: 0,
        implied: BTreeSet::new(),
    });
    // fully resolved earlier: no formula rebuild, no fuel
    match entry.dead {
        Some(true) => return AbstractPost::Dead,
        Some(false) if entry.checked_upto as usize >= preds.len() => {
            return AbstractPost::Live(entry.implied.clone());
        }
        _ => {}
    }
    // clone to appease the borrow checker; entries are small
    let mut entry = entry.clone();
    let t = &p.edges[edge_idx];
    let vars = p.var_ids();
    let written: Option<VarId> = match &t.cmd.op {
        Op::Assign(x, _) | Op::Input(x) => Some(*x),
        Op::Assume => None,
    };
    let base: Conj<Sym> = gamma_at_step(a, preds, 0)
        .into_iter()
        .chain(transition_formula(t, &vars))
        .collect();
    if entry.dead.is_none() {
        // a guard-free update is a total function: a live state always has
        // a successor
        entry.dead = if t.cmd.guard.is_none() {
            Some(false)
        } else {
            match check_sat(&base, fuel) {
                SatResult::Unsat => Some(true),
                SatResult::Sat(_) => Some(false),
                SatResult::Unknown => None,
            }
        };
    }
    let result = match entry.dead {
        Some(true) => AbstractPost::Dead,
        _ => {
            // the checked watermark only advances past definitive answers,
            // so a fuel-starved drain leaves no stale entries behind
            let mut upto = entry.checked_upto;
            for id in entry.checked_upto..preds.len() as PredId {
                let pred = preds.get(id);
                let touched = written.map_or(false, |x| pred.syms().any(|v| *v == x));
                if !touched {
                    // frame propagation plus deductive closure of A decide
                    // untouched predicates on guard-free edges outright
                    if a.contains(&id) {
                        entry.implied.insert(id);
                        upto = id + 1;
                        continue;
                    }
                    if t.cmd.guard.is_none() {
                        upto = id + 1;
                        continue;
                    }
                }
                let primed = pred.map_syms(|v| Sym::Var { var: *v, step: 1 });
                match implies3(&base, &primed, fuel) {
                    Some(true) => {
                        entry.implied.insert(id);
                        upto = id + 1;
                    }
                    Some(false) => upto = id + 1,
                    None => break,
                }
            }
            entry.checked_upto = upto;
            AbstractPost::Live(entry.implied.clone())
        }
    };
    let key = (edge_idx, a.iter().copied().collect::<Vec<_>>());
    cache.map.insert(key, entry);
    result
}

/// `γ(A)` as atoms indexed at `step`.
fn gamma_at_step(a: &BTreeSet<PredId>, preds: &PredicateSet, step: u32) -> Conj<Sym> {
    a.iter()
        .map(|id| preds.get(*id).map_syms(|v| Sym::Var { var: *v, step }))
        .collect()
}

/// Weakest-precondition refinement: walks the spurious path backward,
/// conjoining guards and substituting assignments, and collects every
/// non-constant atom that appears in any intermediate precondition.
/// Each collected atom enters π together with its negation, which is what
/// lets the abstraction exclude the path.
pub fn refine(path: &[&Transition]) -> BTreeSet<Atom<VarId>> {
    let mut current: BTreeSet<Atom<VarId>> = BTreeSet::new();
    let mut collected = BTreeSet::new();
    for t in path.iter().rev() {
        let mut next: BTreeSet<Atom<VarId>> = BTreeSet::new();
        for a in &current {
            if let Some(w) = wp_atom(a, t) {
                if w.const_value().is_none() {
                    next.insert(w.canon());
                }
            }
        }
        if let Some(g) = &t.cmd.guard {
            if g.const_value().is_none() {
                next.insert(g.canon());
            }
        }
        collected.extend(next.iter().cloned());
        current = next;
    }
    collected
}

/// Membership test for the ARG path relation: the edge sequence must start
/// at the root and each step must go to a child of some state in the
/// subsume closure of the current states.
pub fn arg_paths_contains(arg: &Arg, path: &[TransId]) -> bool {
    let mut current: BTreeSet<NodeId> = [arg.root].into_iter().collect();
    for id in path {
        let mut reachable: BTreeSet<NodeId> = BTreeSet::new();
        for n in &current {
            reachable.extend(arg.subsume_star(*n));
        }
        let mut next: BTreeSet<NodeId> = BTreeSet::new();
        for (i, node) in arg.nodes.iter().enumerate() {
            if node.trans_id.as_ref() == Some(id) {
                if let Some(parent) = node.parent {
                    if reachable.contains(&parent) {
                        next.insert(NodeId(i as u32));
                    }
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        current = next;
    }
    true
}

#[derive(Debug)]
pub struct McOutcome {
    pub suite: BTreeSet<TestCase>,
    pub remaining: GoalSet,
    pub unreachable: GoalSet,
    pub predicates: PredicateSet,
    pub arg: Arg,
    /// Goals covered by minted tests during this call.
    pub covered: GoalSet,
    pub refinements: u32,
    /// False when the node safety cap interrupted the drain; unreachability
    /// is not claimed and the ARG must not be used as a monitor.
    pub closed: bool,
    /// The budget ran out mid-drain: the coarse tail of this ARG will be
    /// recomputed more precisely by a later call, so reaching this state is
    /// not a fixpoint.
    pub fuel_exhausted: bool,
}

struct PendingState {
    loc: Loc,
    preds: BTreeSet<PredId>,
    parent: Option<NodeId>,
    trans: Option<usize>,
}

const MAX_NODES: usize = 1_000_000;

/// Coverage-driven abstract reachability with refinement restarts.
pub fn abstract_mc(
    p: &Program,
    mut predicates: PredicateSet,
    goals_in: &GoalSet,
    fuel: &mut Fuel,
    cache: &mut PostCache,
) -> McOutcome {
    let mut goals = goals_in.clone();
    let mut suite: BTreeSet<TestCase> = BTreeSet::new();
    let mut covered = GoalSet::new();
    let mut refinements = 0u32;
    let mut closed = true;

    'restart: loop {
        let mut nodes: Vec<ArgNode> = Vec::new();
        let mut by_loc: Vec<Vec<NodeId>> = vec![Vec::new(); p.loc_count as usize];
        let mut worklist: VecDeque<PendingState> = VecDeque::new();
        worklist.push_back(PendingState {
            loc: p.init,
            preds: BTreeSet::new(),
            parent: None,
            trans: None,
        });
        while let Some(pending) = worklist.pop_front() {
            if nodes.len() >= MAX_NODES {
                closed = false;
                break;
            }
            let id = NodeId(nodes.len() as u32);
            nodes.push(ArgNode {
                loc: pending.loc,
                preds: pending.preds.clone(),
                parent: pending.parent,
                trans: pending.trans,
                trans_id: pending.trans.map(|i| p.edges[i].id.clone()),
                subsumed_by: None,
            });
            // subsumption, generality-wise: a state is subsumed by one at
            // the same location whose predicate set is a subset (weaker,
            // hence admitting more behaviors)
            let peers: Vec<NodeId> = by_loc[pending.loc.0 as usize].clone();
            let subsumer = peers.iter().copied().find(|m| {
                nodes[m.0 as usize].subsumed_by.is_none()
                    && nodes[m.0 as usize].preds.is_subset(&pending.preds)
            });
            by_loc[pending.loc.0 as usize].push(id);
            if let Some(m) = subsumer {
                nodes[id.0 as usize].subsumed_by = Some(m);
                continue;
            }
            for m in peers {
                let mn = &nodes[m.0 as usize];
                if mn.subsumed_by.is_none()
                    && pending.preds.is_subset(&mn.preds)
                    && pending.preds != mn.preds
                {
                    nodes[m.0 as usize].subsumed_by = Some(id);
                }
            }
            // expand
            for edge_idx in p.out_edge_indices(pending.loc) {
                let e = &p.edges[edge_idx];
                let post = abstract_post(&pending.preds, edge_idx, p, &predicates, fuel, cache);
                if goals.contains(&e.id) {
                    // feasibility of the tree path that reaches the goal. A
                    // dead child needs no solver call: the edge cannot fire
                    // from any concretization of the parent, and the tree
                    // path ends inside that concretization.
                    let mut path_idx = tree_path_of(&nodes, id);
                    path_idx.push(edge_idx);
                    let verdict: Option<Option<TestCase>> = if post == AbstractPost::Dead {
                        Some(None)
                    } else {
                        cache.feasibility.get(&path_idx).cloned()
                    };
                    let path: Vec<&Transition> = path_idx.iter().map(|i| &p.edges[*i]).collect();
                    let verdict = match verdict {
                        Some(v) => Some(v),
                        None => {
                            let conj: Conj<Sym> = path_constraints(&path, &p.var_ids())
                                .into_iter()
                                .flatten()
                                .collect();
                            match check_sat(&conj, fuel) {
                                SatResult::Sat(model) => {
                                    let inputs = path
                                        .iter()
                                        .filter(|t| matches!(t.cmd.op, Op::Input(_)))
                                        .count();
                                    let test = TestCase(
                                        (0..inputs as u32)
                                            .map(|k| model.value(&Sym::Input(k)))
                                            .collect(),
                                    );
                                    cache
                                        .feasibility
                                        .insert(path_idx.clone(), Some(test.clone()));
                                    Some(Some(test))
                                }
                                SatResult::Unsat => {
                                    cache.feasibility.insert(path_idx.clone(), None);
                                    Some(None)
                                }
                                SatResult::Unknown => None,
                            }
                        }
                    };
                    match verdict {
                        Some(Some(test)) => {
                            suite.insert(test);
                            goals.remove(&e.id);
                            covered.insert(e.id.clone());
                        }
                        Some(None) => {
                            if !fuel.exhausted() {
                                let atoms = refine(&path);
                                let mut grew = false;
                                for a in &atoms {
                                    grew |= predicates.insert_pair(a);
                                }
                                if grew {
                                    refinements += 1;
                                    continue 'restart;
                                }
                                // no new predicate: the abstract path is
                                // already excluded, keep draining
                            }
                        }
                        None => {}
                    }
                }
                match post {
                    AbstractPost::Dead => {}
                    AbstractPost::Live(preds_next) => {
                        worklist.push_back(PendingState {
                            loc: e.dst,
                            preds: preds_next,
                            parent: Some(id),
                            trans: Some(edge_idx),
                        });
                    }
                }
            }
        }
        let witnessed: BTreeSet<&TransId> =
            nodes.iter().filter_map(|n| n.trans_id.as_ref()).collect();
        let unreachable: GoalSet = if closed {
            goals.iter().filter(|g| !witnessed.contains(g)).cloned().collect()
        } else {
            GoalSet::new()
        };
        let remaining: GoalSet = goals.difference(&unreachable).cloned().collect();
        return McOutcome {
            suite,
            remaining,
            unreachable,
            predicates: predicates.clone(),
            arg: Arg {
                nodes,
                root: NodeId(0),
                pred_atoms: predicates.atoms.clone(),
            },
            covered,
            refinements,
            closed,
            fuel_exhausted: fuel.exhausted(),
        };
    }
}

fn tree_path_of(nodes: &[ArgNode], id: NodeId) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = id;
    while let Some(parent) = nodes[cur.0 as usize].parent {
        out.push(nodes[cur.0 as usize].trans.expect("non-root has trans"));
        cur = parent;
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{LinComb, Rel};
    use crate::parse::parse_program;

    fn fig1(bound: i64) -> Program {
        let src = format!(
            "var i = 0; var b; var x; var g; b = 0;
             while (i < {bound}) {{ x = input(); if (x != 10) {{ b = 1; }} i = i + 1; }}
             if (b == 0) {{ g = 1; }}"
        );
        parse_program(&src.replace('\n', " ")).unwrap()
    }

    fn var_by_name(p: &Program, name: &str) -> VarId {
        VarId(p.vars.iter().position(|v| v.name == name).unwrap() as u32)
    }

    fn eq_atom(v: VarId, c: i64) -> Atom<VarId> {
        Atom::cmp(&LinComb::sym(v), Rel::Eq, &LinComb::constant(c))
    }

    fn edge_matching<'a>(p: &'a Program, pred: impl Fn(&Transition) -> bool) -> (usize, &'a Transition) {
        p.edges
            .iter()
            .enumerate()
            .find(|(_, e)| pred(e))
            .expect("edge")
    }

    #[test]
    fn abstract_post_examples() {
        let p = fig1(30);
        let b = var_by_name(&p, "b");
        let mut preds = PredicateSet::new();
        preds.insert_pair(&eq_atom(b, 0)); // adds b==0 and b!=0
        let mut fuel = Fuel::new(100_000);
        let mut cache = PostCache::default();

        // post(∅, b := 0) = {b==0}
        let (idx, _) = edge_matching(&p, |e| {
            matches!(&e.cmd.op, Op::Assign(v, rhs) if *v == b && rhs.lin.constant == 0 && rhs.lin.terms.is_empty())
        });
        let post = abstract_post(&BTreeSet::new(), idx, &p, &preds, &mut fuel, &mut cache);
        let want: BTreeSet<PredId> = [preds.index[&eq_atom(b, 0).canon()]].into_iter().collect();
        assert_eq!(post, AbstractPost::Live(want.clone()));

        // post({b==0}, assume b != 0) is dead
        let (idx, _) = edge_matching(&p, |e| {
            matches!(&e.cmd.op, Op::Assume)
                && e.cmd.guard.as_ref().map(|g| g.rel) == Some(Rel::Ne)
                && e.cmd.guard.as_ref().unwrap().syms().any(|v| *v == b)
        });
        let post = abstract_post(&want, idx, &p, &preds, &mut fuel, &mut cache);
        assert_eq!(post, AbstractPost::Dead);

        // post({b==0}, b := 1) = {b != 0}
        let (idx, _) = edge_matching(&p, |e| {
            matches!(&e.cmd.op, Op::Assign(v, rhs) if *v == b && rhs.lin.constant == 1)
        });
        let post = abstract_post(&want, idx, &p, &preds, &mut fuel, &mut cache);
        let ne_id = preds.index[&eq_atom(b, 0).negate().canon()];
        assert_eq!(post, AbstractPost::Live([ne_id].into_iter().collect()));
    }

    #[test]
    fn refine_discovers_guard_and_wp_atoms() {
        let p = fig1(30);
        let i = var_by_name(&p, "i");
        let b = var_by_name(&p, "b");
        // spurious direct exit: i:=0; b:=0; assume i>=30; assume b==0
        let path_ids: Vec<usize> = {
            let mut v = Vec::new();
            let (i0, _) = edge_matching(&p, |e| {
                matches!(&e.cmd.op, Op::Assign(x, rhs) if *x == i && rhs.lin.constant == 0)
            });
            v.push(i0);
            let (b0, _) = edge_matching(&p, |e| {
                matches!(&e.cmd.op, Op::Assign(x, rhs) if *x == b && rhs.lin.constant == 0)
            });
            v.push(b0);
            let (exit, _) = edge_matching(&p, |e| {
                matches!(&e.cmd.op, Op::Assume)
                    && e.cmd.guard.as_ref().map(|g| g.rel) == Some(Rel::Ge)
            });
            v.push(exit);
            let (goal, _) = edge_matching(&p, |e| {
                matches!(&e.cmd.op, Op::Assume)
                    && e.cmd.guard.as_ref().map(|g| (g.rel, g.syms().next().copied()))
                        == Some((Rel::Eq, Some(b)))
            });
            v.push(goal);
            v
        };
        let path: Vec<&Transition> = path_ids.iter().map(|k| &p.edges[*k]).collect();
        let atoms = refine(&path);
        // harvest includes the b-atom from the goal guard and the loop-exit atom
        assert!(atoms.contains(&eq_atom(b, 0).canon()));
        let exit_atom = Atom::cmp(&LinComb::sym(i), Rel::Ge, &LinComb::constant(30)).canon();
        assert!(atoms.contains(&exit_atom));
    }

    #[test]
    fn empty_goals_builds_closed_reachability() {
        let p = fig1(5);
        let mut fuel = Fuel::new(100_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &GoalSet::new(), &mut fuel, &mut cache);
        assert!(out.suite.is_empty());
        assert!(out.remaining.is_empty());
        assert!(out.unreachable.is_empty());
        assert!(out.closed);
        // with π = {false}: one abstract state per reachable location, the
        // loop revisit subsumed
        assert!(out.arg.nodes.len() >= p.loc_count as usize);
        // subsumption invariants: same location, subsumer not more specific
        for (i, n) in out.arg.nodes.iter().enumerate() {
            if let Some(by) = n.subsumed_by {
                let m = out.arg.node(by);
                assert_eq!(m.loc, n.loc);
                assert!(m.preds.is_subset(&n.preds));
                // no subsume cycles
                let _ = out.arg.subsume_end(NodeId(i as u32));
            }
        }
    }

    #[test]
    fn motivating_goal_refines_b_predicate_and_proves_nothing_unreachable() {
        let p = fig1(30);
        let b = var_by_name(&p, "b");
        // the hard goal: the then-arm of the final b-test
        let (_, goal_edge) = edge_matching(&p, |e| {
            matches!(&e.cmd.op, Op::Assume)
                && e.cmd.guard.as_ref().map(|g| (g.rel, g.syms().next().copied()))
                    == Some((Rel::Eq, Some(b)))
        });
        let goals: GoalSet = [goal_edge.id.clone()].into_iter().collect();
        let mut fuel = Fuel::new(3_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &goals, &mut fuel, &mut cache);
        assert!(out.refinements >= 1);
        // refinement discovers the b predicate
        assert!(out
            .predicates
            .iter()
            .any(|(_, a)| *a == eq_atom(b, 0).canon()));
        // the goal is reachable (after 30 iterations), so it must not be
        // declared unreachable even though no test was found yet
        assert!(out.unreachable.is_empty(), "unreachable: {:?}", out.unreachable);
        assert!(out.closed);
    }

    #[test]
    fn mints_test_for_reachable_goal() {
        // x = input(); if (x == 7) goal
        let src = "var x; var g1 = 0; var g2 = 0; x = input(); if (x == 7) { g1 = 1; } else { g2 = 1; }";
        let p = parse_program(src).unwrap();
        let (_, goal_edge) = edge_matching(&p, |e| {
            e.cmd.guard.as_ref().map(|g| g.rel) == Some(Rel::Eq)
        });
        let goals: GoalSet = [goal_edge.id.clone()].into_iter().collect();
        let mut fuel = Fuel::new(50_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &goals, &mut fuel, &mut cache);
        assert!(out.remaining.is_empty());
        assert!(out.unreachable.is_empty());
        assert!(out.suite.contains(&TestCase(vec![7])));
    }

    #[test]
    fn proves_simple_unreachability() {
        // c starts at 0 and only increments: c < 0 arm unreachable
        let src = "var c = 0; var x; var g1 = 0; var g2 = 0; x = input();
                   if (x > 0) { c = c + 1; }
                   if (c < 0) { g1 = 1; } else { g2 = 1; }";
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let (_, goal_edge) = edge_matching(&p, |e| {
            e.cmd.guard.as_ref().map(|g| g.rel) == Some(Rel::Lt)
                && matches!(e.cmd.op, Op::Assume)
                && p.out_edges(e.dst).len() == 1
        });
        let goals: GoalSet = [goal_edge.id.clone()].into_iter().collect();
        let mut fuel = Fuel::new(100_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &goals, &mut fuel, &mut cache);
        assert_eq!(out.unreachable, goals);
        assert!(out.remaining.is_empty());
        assert!(out.suite.is_empty());
    }

    #[test]
    fn arg_paths_contains_examples() {
        let p = fig1(3);
        let mut fuel = Fuel::new(200_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &GoalSet::new(), &mut fuel, &mut cache);
        // empty path
        assert!(arg_paths_contains(&out.arg, &[]));
        // a real feasible path: replay the all-tens test
        let r = crate::driver::replay(
            &p,
            &TestCase(vec![10, 10, 10]),
            &crate::concolic::ConcolicConfig::default(),
            0,
        );
        assert!(arg_paths_contains(&out.arg, &r.path));
        // an edge that is not a program path
        assert!(!arg_paths_contains(&out.arg, &[TransId::new("99#0")]));
    }
}
