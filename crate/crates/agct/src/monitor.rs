//! Monitor extraction and the program×monitor product.
//!
//! A monitor is the non-subsumed part of a closed ARG read as a program:
//! parent edges between non-subsumed states survive as-is, edges into
//! subsumed states are redirected to the non-subsumed end of the subsume
//! chain. Because its edges carry original-transition labels, composing it
//! with the program by label synchronization prunes exactly the paths the
//! abstraction proved infeasible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::cegar::Arg;
use crate::ir::{assemble, Command, GoalSet, Loc, Program, ProgramError, TransId};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("monitor state {0} has two outgoing edges with label {1}; the ARG is malformed")]
    NonDeterministic(u32, TransId),
    #[error("invalid monitor program: {0}")]
    Program(#[from] ProgramError),
}

/// A deterministic program over abstract states, synchronized with the
/// original program by transition labels.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub program: Program,
    /// Ids of redirected (subsume-closure) edges, for dump styling.
    pub redirected: BTreeSet<TransId>,
}

/// Converts a closed ARG into its monitor. Locations are the non-subsumed
/// reachable states; an edge runs from a state to each non-subsumed child,
/// and to the subsume-chain end of each subsumed child. Monitors are
/// deterministic by construction; a duplicate label is reported as an
/// error since it can only arise from a malformed ARG.
pub fn monitor_from_arg(arg: &Arg, p: &Program) -> Result<Monitor, MonitorError> {
    let mut loc_of: BTreeMap<u32, Loc> = BTreeMap::new();
    let mut labels: Vec<String> = Vec::new();
    for (i, n) in arg.nodes.iter().enumerate() {
        if n.subsumed_by.is_none() {
            let l = Loc(loc_of.len() as u32);
            loc_of.insert(i as u32, l);
            let preds: Vec<String> = n
                .preds
                .iter()
                .map(|id| {
                    format!(
                        "{}",
                        arg.pred_atoms[*id as usize].map_syms(|v| p.var_name(*v).to_string())
                    )
                })
                .collect();
            labels.push(if preds.is_empty() {
                format!("{}", p.loc_names[n.loc.0 as usize])
            } else {
                format!("{}|{}", p.loc_names[n.loc.0 as usize], preds.join(","))
            });
        }
    }
    let root = arg.root;
    assert!(
        arg.node(root).subsumed_by.is_none(),
        "the root state is never subsumed"
    );
    let mut raw: Vec<(Loc, Command, Loc, TransId)> = Vec::new();
    let mut redirected_raw: Vec<(Loc, TransId)> = Vec::new();
    let mut seen: BTreeSet<(Loc, TransId)> = BTreeSet::new();
    for (i, n) in arg.nodes.iter().enumerate() {
        let Some(parent) = n.parent else {
            continue;
        };
        let Some(src) = loc_of.get(&parent.0).copied() else {
            // the parent itself got subsumed later; paths through it are
            // redirected at the parent, so its tree edges drop out
            continue;
        };
        let trans_idx = n.trans.expect("non-root node has a transition");
        let t = &p.edges[trans_idx];
        let dst_node = if n.subsumed_by.is_none() {
            NodeRef(i as u32)
        } else {
            NodeRef(arg.subsume_end(crate::cegar::NodeId(i as u32)).0)
        };
        let dst = loc_of[&dst_node.0];
        if !seen.insert((src, t.label.clone())) {
            return Err(MonitorError::NonDeterministic(src.0, t.label.clone()));
        }
        raw.push((src, t.cmd.clone(), dst, t.label.clone()));
        if n.subsumed_by.is_some() {
            redirected_raw.push((src, t.label.clone()));
        }
    }
    let init = loc_of[&root.0];
    let program = assemble(
        p.vars.clone(),
        loc_of.len() as u32,
        init,
        raw,
        Some(labels),
    )?;
    let redirected = redirected_raw
        .into_iter()
        .filter_map(|(src, label)| {
            program
                .edges
                .iter()
                .find(|e| e.src == src && e.label == label)
                .map(|e| e.id.clone())
        })
        .collect();
    Ok(Monitor { program, redirected })
}

struct NodeRef(u32);

/// Lock-step position in the on-the-fly program×monitor product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProductCursor {
    pub prog: Loc,
    pub mon: Loc,
}

/// Advances both components on a fired original-transition label. `None`
/// means the monitor blocks the label: the abstraction proved every
/// continuation through it infeasible, so exploration backtracks.
pub fn step_product(
    p: &Program,
    m: &Monitor,
    c: ProductCursor,
    fired: &TransId,
) -> Option<ProductCursor> {
    let pe = p.out_edges(c.prog).iter().find(|e| &e.label == fired)?;
    let me = m.program.out_edges(c.mon).iter().find(|e| &e.label == fired)?;
    Some(ProductCursor { prog: pe.dst, mon: me.dst })
}

/// All cursor pairs reachable through [`step_product`], guards ignored.
pub fn reachable_cursor_pairs(p: &Program, m: &Monitor) -> BTreeSet<(Loc, Loc)> {
    let start = ProductCursor { prog: p.init, mon: m.program.init };
    let mut seen: BTreeSet<(Loc, Loc)> = [(start.prog, start.mon)].into_iter().collect();
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for e in p.out_edges(c.prog) {
            if let Some(next) = step_product(p, m, c, &e.label) {
                if seen.insert((next.prog, next.mon)) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen
}

/// Lifts goals to a product program: every product edge whose label is a
/// goal becomes a lifted goal, with the projection recorded so covering
/// one lifted goal can retire all others with the same projection.
pub fn lift_goals(goals: &GoalSet, product: &Program) -> BTreeMap<TransId, TransId> {
    product
        .edges
        .iter()
        .filter(|e| goals.contains(&e.label))
        .map(|e| (e.id.clone(), e.label.clone()))
        .collect()
}

/// DOT rendering with redirected edges dashed.
pub fn monitor_to_dot(m: &Monitor) -> String {
    let p = &m.program;
    let mut s = String::new();
    s.push_str("digraph monitor {\n  rankdir=TB;\n");
    for l in 0..p.loc_count {
        let shape = if Loc(l) == p.init { "doublecircle" } else { "circle" };
        let _ = writeln!(
            s,
            "  m{} [label=\"{}\", shape={}];",
            l, p.loc_names[l as usize], shape
        );
    }
    for e in &p.edges {
        let style = if m.redirected.contains(&e.id) { ", style=dashed" } else { "" };
        let _ = writeln!(
            s,
            "  m{} -> m{} [label=\"{}\"{}];",
            e.src.0,
            e.dst.0,
            e.label,
            style
        );
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cegar::{abstract_mc, PostCache, PredicateSet};
    use crate::ir::{product_with_pairs, Transition};
    use crate::parse::parse_program;
    use crate::solver::Fuel;

    fn closed_arg(src: &str) -> (Program, Arg) {
        let p = parse_program(&src.replace('\n', " ")).unwrap();
        let mut fuel = Fuel::new(500_000);
        let mut cache = PostCache::default();
        let out = abstract_mc(&p, PredicateSet::new(), &GoalSet::new(), &mut fuel, &mut cache);
        assert!(out.closed);
        (p, out.arg)
    }

    #[test]
    fn chain_program_monitor_is_the_chain() {
        let (p, arg) = closed_arg("var x = 0; x = 1; x = 2; x = 3;");
        let m = monitor_from_arg(&arg, &p).unwrap();
        assert_eq!(m.program.loc_count, p.loc_count);
        assert_eq!(m.program.edges.len(), p.edges.len());
        assert!(m.redirected.is_empty());
    }

    #[test]
    fn loop_subsumption_becomes_redirect_edge() {
        let (p, arg) = closed_arg(
            "var i = 0; var x; while (i < 3) { x = input(); i = i + 1; }",
        );
        let m = monitor_from_arg(&arg, &p).unwrap();
        // with π = {false} the revisited loop head is subsumed, so the
        // monitor folds the loop back with a redirected edge
        assert!(!m.redirected.is_empty());
        // determinism: labels unique per state
        for l in 0..m.program.loc_count {
            let labels: Vec<&TransId> =
                m.program.out_edges(Loc(l)).iter().map(|e| &e.label).collect();
            let set: BTreeSet<&&TransId> = labels.iter().collect();
            assert_eq!(labels.len(), set.len());
        }
    }

    #[test]
    fn identity_like_monitor_never_blocks() {
        let (p, arg) = closed_arg("var x; var s = 0; x = input(); if (x > 0) { s = 1; }");
        let m = monitor_from_arg(&arg, &p).unwrap();
        // every program edge can fire somewhere; walk a few concrete paths
        for test in [vec![5], vec![-5]] {
            let r = crate::driver::replay(
                &p,
                &crate::concolic::TestCase(test),
                &crate::concolic::ConcolicConfig::default(),
                0,
            );
            let mut cur = ProductCursor { prog: p.init, mon: m.program.init };
            for id in &r.path {
                let label = p.edge_by_id(id).unwrap().label.clone();
                cur = step_product(&p, &m, cur, &label).expect("monitor must not block");
            }
        }
    }

    #[test]
    fn on_the_fly_matches_explicit_product() {
        let (p, arg) = closed_arg(
            "var i = 0; var x; var b; b = 0;
             while (i < 2) { x = input(); if (x != 1) { b = 1; } i = i + 1; }",
        );
        let m = monitor_from_arg(&arg, &p).unwrap();
        let (_, pairs) = product_with_pairs(&p, &m.program).unwrap();
        let explicit: BTreeSet<(Loc, Loc)> = pairs.into_iter().collect();
        assert_eq!(reachable_cursor_pairs(&p, &m), explicit);
    }

    #[test]
    fn lift_goals_identity_and_empty() {
        let p = parse_program("var x; var s = 0; x = input(); if (x > 0) { s = 1; }").unwrap();
        let prod = crate::ir::product(&p, &p).unwrap();
        let goals = p.branches();
        let lifted = lift_goals(&goals, &prod);
        assert_eq!(lifted.len(), goals.len());
        let projs: GoalSet = lifted.values().cloned().collect();
        assert_eq!(projs, goals);
        assert!(lift_goals(&GoalSet::new(), &prod).is_empty());
    }

    #[test]
    fn blocked_label_returns_none() {
        let (p, arg) = closed_arg("var x; var s = 0; x = input(); if (x > 0) { s = 1; }");
        let m = monitor_from_arg(&arg, &p).unwrap();
        let cur = ProductCursor { prog: p.init, mon: m.program.init };
        assert!(step_product(&p, &m, cur, &TransId::new("77#0")).is_none());
    }

    #[test]
    fn redirect_edge_loops_back_to_representative() {
        // two-state subsumption: straight loop where the second visit of the
        // head is subsumed by the first
        let (p, arg) = closed_arg("var i = 0; while (i < 2) { i = i + 1; }");
        let m = monitor_from_arg(&arg, &p).unwrap();
        let back: Vec<&Transition> = m
            .program
            .edges
            .iter()
            .filter(|e| m.redirected.contains(&e.id))
            .collect();
        assert!(!back.is_empty());
        for e in back {
            // target is a real monitor state with outgoing edges (the loop head)
            assert!(!m.program.out_edges(e.dst).is_empty());
        }
    }
}
