//! Program model: a control-flow graph of guarded commands over integer
//! variables, plus branch enumeration and the synchronous product.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::logic::{Atom, LinComb};

/// A control-flow location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc(pub u32);

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into a program's variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Var {
    pub name: String,
}

/// Stable transition identifier, `srcLoc#k` with `k` the outgoing-edge
/// index in frontend order. Product programs mint fresh ids of the same
/// shape, while their edges keep the original id as `label`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransId(String);

impl TransId {
    pub fn new(s: impl Into<String>) -> Self {
        TransId(s.into())
    }

    pub fn positional(src: Loc, k: usize) -> Self {
        TransId(format!("{}#{}", src.0, k))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TransId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A set of goal branches.
pub type GoalSet = BTreeSet<TransId>;

/// At most one variable·variable product is allowed per expression; it is
/// kept out of the linear part so the solver fragment stays closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonlinFactor {
    pub coeff: i64,
    pub a: VarId,
    pub b: VarId,
}

/// Right-hand side of an assignment: a linear combination plus an optional
/// nonlinear factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinExpr {
    pub lin: LinComb<VarId>,
    pub nonlinear: Option<NonlinFactor>,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr { lin: LinComb::constant(c), nonlinear: None }
    }

    pub fn linear(lin: LinComb<VarId>) -> Self {
        LinExpr { lin, nonlinear: None }
    }

    /// Total evaluation over a concrete valuation; `None` on overflow.
    pub fn eval(&self, val: impl Fn(VarId) -> i64) -> Option<i64> {
        let mut acc = self.lin.eval(|v| val(*v));
        if let Some(nl) = &self.nonlinear {
            acc += nl.coeff as i128 * val(nl.a) as i128 * val(nl.b) as i128;
        }
        i64::try_from(acc).ok()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out: BTreeSet<VarId> = self.lin.syms().copied().collect();
        if let Some(nl) = &self.nonlinear {
            out.insert(nl.a);
            out.insert(nl.b);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Assign(VarId, LinExpr),
    /// `x := input()` — an unconstrained update modeling program input.
    Input(VarId),
    /// Guard only, no update.
    Assume,
}

/// A guarded command. `guard: None` means the trivially-true guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub guard: Option<Atom<VarId>>,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: TransId,
    /// Original-transition label used for product synchronization. Equal to
    /// `id` in programs produced by the frontend.
    pub label: TransId,
    pub src: Loc,
    pub cmd: Command,
    pub dst: Loc,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVar(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransId(TransId),
    #[error("initial location {0} out of range")]
    InitOutOfRange(Loc),
    #[error("location {0} has {1} outgoing transitions (at most 2 allowed)")]
    OutDegree(Loc, usize),
    #[error("location {0} has two outgoing transitions with non-complementary guards")]
    NonComplementaryGuards(Loc),
    #[error("transition endpoint {0} out of range")]
    LocOutOfRange(Loc),
    #[error("programs have different variable vectors")]
    VarMismatch,
}

/// A program: variables, locations `0..loc_count`, an initial location and
/// guarded-command transitions.
#[derive(Debug, Clone)]
pub struct Program {
    pub vars: Vec<Var>,
    pub loc_count: u32,
    pub init: Loc,
    pub edges: Vec<Transition>,
    /// Display names for locations (product and monitor programs use
    /// compound names); indexed by `Loc`.
    pub loc_names: Vec<String>,
    out_start: Vec<u32>,
}

impl Program {
    /// Validates the model invariants: unique variable names and transition
    /// ids, every location in range, out-degree at most 2, and two-way
    /// splits guarded by an atom and its negation.
    pub fn new(
        vars: Vec<Var>,
        loc_count: u32,
        init: Loc,
        edges: Vec<Transition>,
        loc_names: Option<Vec<String>>,
    ) -> Result<Program, ProgramError> {
        let mut names = BTreeSet::new();
        for v in &vars {
            if !names.insert(v.name.as_str()) {
                return Err(ProgramError::DuplicateVar(v.name.clone()));
            }
        }
        if init.0 >= loc_count {
            return Err(ProgramError::InitOutOfRange(init));
        }
        let mut ids = BTreeSet::new();
        for e in &edges {
            if !ids.insert(e.id.clone()) {
                return Err(ProgramError::DuplicateTransId(e.id.clone()));
            }
            if e.src.0 >= loc_count {
                return Err(ProgramError::LocOutOfRange(e.src));
            }
            if e.dst.0 >= loc_count {
                return Err(ProgramError::LocOutOfRange(e.dst));
            }
        }
        let p = Program::new_unchecked(vars, loc_count, init, edges, loc_names);
        for l in 0..loc_count {
            let out = p.out_edges(Loc(l));
            if out.len() > 2 {
                return Err(ProgramError::OutDegree(Loc(l), out.len()));
            }
            if out.len() == 2 {
                let (g0, g1) = (&out[0].cmd.guard, &out[1].cmd.guard);
                let complementary = match (g0, g1) {
                    (Some(a), Some(b)) => a.negate().canon() == b.canon(),
                    _ => false,
                };
                if !complementary {
                    return Err(ProgramError::NonComplementaryGuards(Loc(l)));
                }
            }
        }
        Ok(p)
    }

    /// Structural assembly without the out-degree and complementary-guard
    /// validation. For degenerate synchronization graphs (e.g. a one-state
    /// monitor accepting every label) that are composed with real programs
    /// but never executed directly.
    pub fn new_unchecked(
        vars: Vec<Var>,
        loc_count: u32,
        init: Loc,
        mut edges: Vec<Transition>,
        loc_names: Option<Vec<String>>,
    ) -> Program {
        // stable sort keeps frontend edge order within each source location
        edges.sort_by_key(|e| e.src.0);
        let mut out_start = vec![0u32; loc_count as usize + 1];
        for e in &edges {
            out_start[e.src.0 as usize + 1] += 1;
        }
        for i in 0..loc_count as usize {
            out_start[i + 1] += out_start[i];
        }
        let loc_names =
            loc_names.unwrap_or_else(|| (0..loc_count).map(|l| l.to_string()).collect());
        Program { vars, loc_count, init, edges, loc_names, out_start }
    }

    pub fn out_edges(&self, l: Loc) -> &[Transition] {
        let lo = self.out_start[l.0 as usize] as usize;
        let hi = self.out_start[l.0 as usize + 1] as usize;
        &self.edges[lo..hi]
    }

    /// Indices into `edges` of the outgoing transitions of `l`.
    pub fn out_edge_indices(&self, l: Loc) -> std::ops::Range<usize> {
        self.out_start[l.0 as usize] as usize..self.out_start[l.0 as usize + 1] as usize
    }

    pub fn var_ids(&self) -> Vec<VarId> {
        (0..self.vars.len() as u32).map(VarId).collect()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0 as usize].name
    }

    pub fn edge_by_id(&self, id: &TransId) -> Option<&Transition> {
        self.edges.iter().find(|e| &e.id == id)
    }

    /// Ids of all transitions whose source has out-degree 2.
    pub fn branches(&self) -> GoalSet {
        self.edges
            .iter()
            .filter(|e| self.out_edges(e.src).len() == 2)
            .map(|e| e.id.clone())
            .collect()
    }

    /// Branch ids lying on some syntactic path from the initial location,
    /// guards ignored. This is the denominator baseline for pure-concolic
    /// coverage, excluding only trivially dead code.
    pub fn graph_reachable_branches(&self) -> GoalSet {
        let mut seen = vec![false; self.loc_count as usize];
        let mut queue = VecDeque::from([self.init]);
        seen[self.init.0 as usize] = true;
        while let Some(l) = queue.pop_front() {
            for e in self.out_edges(l) {
                if !seen[e.dst.0 as usize] {
                    seen[e.dst.0 as usize] = true;
                    queue.push_back(e.dst);
                }
            }
        }
        self.edges
            .iter()
            .filter(|e| seen[e.src.0 as usize] && self.out_edges(e.src).len() == 2)
            .map(|e| e.id.clone())
            .collect()
    }

    /// DOT rendering: one node per location, edge labels `id: guard / command`.
    pub fn to_dot(&self, graph_name: &str) -> String {
        let mut s = String::new();
        s.push_str(&format!("digraph {graph_name} {{\n"));
        s.push_str("  rankdir=TB;\n");
        for l in 0..self.loc_count {
            let shape = if Loc(l) == self.init { "doublecircle" } else { "circle" };
            s.push_str(&format!(
                "  n{} [label=\"{}\", shape={}];\n",
                l, self.loc_names[l as usize], shape
            ));
        }
        for e in &self.edges {
            s.push_str(&format!(
                "  n{} -> n{} [label=\"{}: {}\"];\n",
                e.src.0,
                e.dst.0,
                e.id,
                self.render_command(&e.cmd)
            ));
        }
        s.push_str("}\n");
        s
    }

    pub fn render_command(&self, cmd: &Command) -> String {
        let guard = match &cmd.guard {
            Some(g) => format!("{}", g.map_syms(|v| self.var_name(*v).to_string())),
            None => "true".to_string(),
        };
        match &cmd.op {
            Op::Assume => format!("{guard} / assume"),
            Op::Input(x) => format!("{guard} / {} := input()", self.var_name(*x)),
            Op::Assign(x, e) => {
                let mut rhs = format!("{}", e.lin.subst(|v| LinComb::sym(self.var_name(*v).to_string())));
                if let Some(nl) = &e.nonlinear {
                    rhs.push_str(&format!(
                        " + {}*{}*{}",
                        nl.coeff,
                        self.var_name(nl.a),
                        self.var_name(nl.b)
                    ));
                }
                format!("{guard} / {} := {}", self.var_name(*x), rhs)
            }
        }
    }
}

/// Synchronous product on shared original-transition labels. Locations are
/// the label-reachable pairs, numbered in BFS discovery order; an edge
/// exists exactly when both components have an edge with the same label.
pub fn product(p1: &Program, p2: &Program) -> Result<Program, ProgramError> {
    product_with_pairs(p1, p2).map(|(p, _)| p)
}

/// [`product`] plus the component pair of every product location.
pub fn product_with_pairs(
    p1: &Program,
    p2: &Program,
) -> Result<(Program, Vec<(Loc, Loc)>), ProgramError> {
    if p1.vars != p2.vars {
        return Err(ProgramError::VarMismatch);
    }
    let mut pair_of: BTreeMap<(Loc, Loc), Loc> = BTreeMap::new();
    let mut pairs: Vec<(Loc, Loc)> = Vec::new();
    let mut queue = VecDeque::new();
    let start = (p1.init, p2.init);
    pair_of.insert(start, Loc(0));
    pairs.push(start);
    queue.push_back(start);
    let mut raw: Vec<(Loc, Command, Loc, TransId)> = Vec::new();
    while let Some((l1, l2)) = queue.pop_front() {
        let src = pair_of[&(l1, l2)];
        for e1 in p1.out_edges(l1) {
            for e2 in p2.out_edges(l2) {
                if e1.label != e2.label {
                    continue;
                }
                let dst_pair = (e1.dst, e2.dst);
                let dst = *pair_of.entry(dst_pair).or_insert_with(|| {
                    let l = Loc(pairs.len() as u32);
                    pairs.push(dst_pair);
                    queue.push_back(dst_pair);
                    l
                });
                raw.push((src, e1.cmd.clone(), dst, e1.label.clone()));
            }
        }
    }
    let loc_names = pairs
        .iter()
        .map(|(a, b)| {
            format!(
                "({},{})",
                p1.loc_names[a.0 as usize], p2.loc_names[b.0 as usize]
            )
        })
        .collect();
    let program = assemble(p1.vars.clone(), pairs.len() as u32, Loc(0), raw, Some(loc_names))?;
    Ok((program, pairs))
}

/// Like [`assemble`], for frontend programs whose labels are their own ids.
pub fn assemble_self_labeled(
    vars: Vec<Var>,
    loc_count: u32,
    init: Loc,
    raw: Vec<(Loc, Command, Loc)>,
    loc_names: Option<Vec<String>>,
) -> Result<Program, ProgramError> {
    let mut per_src: BTreeMap<Loc, usize> = BTreeMap::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (src, cmd, dst) in raw {
        let k = per_src.entry(src).or_insert(0);
        let id = TransId::positional(src, *k);
        edges.push(Transition { id: id.clone(), label: id, src, cmd, dst });
        *k += 1;
    }
    Program::new(vars, loc_count, init, edges, loc_names)
}

/// Builds a program from raw edges, assigning positional `src#k` ids in the
/// given per-source order.
pub fn assemble(
    vars: Vec<Var>,
    loc_count: u32,
    init: Loc,
    raw: Vec<(Loc, Command, Loc, TransId)>,
    loc_names: Option<Vec<String>>,
) -> Result<Program, ProgramError> {
    let mut per_src: BTreeMap<Loc, usize> = BTreeMap::new();
    let mut edges = Vec::with_capacity(raw.len());
    for (src, cmd, dst, label) in raw {
        let k = per_src.entry(src).or_insert(0);
        edges.push(Transition {
            id: TransId::positional(src, *k),
            label,
            src,
            cmd,
            dst,
        });
        *k += 1;
    }
    Program::new(vars, loc_count, init, edges, loc_names)
}

/// Canonical signature of the reachable part of a program graph, with edges
/// distinguished by `key`. Two programs with equal signatures (and equal
/// location counts) are isomorphic as labeled graphs, provided `key` is
/// injective per source location — true for both original-label keys and
/// guard/command keys in deterministic programs.
pub fn graph_signature(p: &Program, key: impl Fn(&Transition) -> String) -> String {
    let mut index: BTreeMap<Loc, usize> = BTreeMap::new();
    index.insert(p.init, 0);
    let mut order = vec![p.init];
    let mut queue = VecDeque::from([p.init]);
    let mut lines = Vec::new();
    while let Some(l) = queue.pop_front() {
        let mut out: Vec<(String, Loc)> =
            p.out_edges(l).iter().map(|e| (key(e), e.dst)).collect();
        out.sort();
        let src_idx = index[&l];
        for (k, dst) in out {
            let next = order.len();
            let dst_idx = *index.entry(dst).or_insert_with(|| {
                order.push(dst);
                queue.push_back(dst);
                next
            });
            lines.push(format!("{src_idx} --{k}--> {dst_idx}"));
        }
    }
    lines.join("\n")
}
