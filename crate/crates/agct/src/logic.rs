//! Linear integer formulas.
//!
//! Everything the engines reason about is a conjunction of linear atoms
//! over integer symbols: program guards (symbols are variables), path
//! constraints (symbols are SSA-indexed variables and input symbols), and
//! concolic path conditions (symbols are input ordinals). The types here
//! are generic over the symbol kind so the same algebra serves all three.

use std::collections::BTreeMap;
use std::fmt;

use crate::ir::{Op, Transition, VarId};

/// A linear combination `constant + Σ coeff·sym`.
///
/// Zero coefficients are never stored, so structural equality is semantic
/// equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinComb<S: Ord> {
    pub constant: i64,
    pub terms: BTreeMap<S, i64>,
}

impl<S: Ord + Clone> LinComb<S> {
    pub fn constant(c: i64) -> Self {
        LinComb { constant: c, terms: BTreeMap::new() }
    }

    pub fn sym(s: S) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(s, 1);
        LinComb { constant: 0, terms }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, s: S, coeff: i64) {
        if coeff == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(s) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.constant += other.constant;
        for (s, c) in &other.terms {
            out.add_term(s.clone(), *c);
        }
        out
    }

    pub fn scale(&self, k: i64) -> Self {
        if k == 0 {
            return LinComb::constant(0);
        }
        LinComb {
            constant: self.constant * k,
            terms: self.terms.iter().map(|(s, c)| (s.clone(), c * k)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1))
    }

    /// Substitutes every symbol through `f`, producing a combination over a
    /// new symbol kind. Linear-in-linear substitution stays linear.
    pub fn subst<T: Ord + Clone>(&self, mut f: impl FnMut(&S) -> LinComb<T>) -> LinComb<T> {
        let mut out = LinComb::constant(self.constant);
        for (s, c) in &self.terms {
            out = out.add(&f(s).scale(*c));
        }
        out
    }

    pub fn eval(&self, mut f: impl FnMut(&S) -> i64) -> i128 {
        let mut acc = self.constant as i128;
        for (s, c) in &self.terms {
            acc += (*c as i128) * (f(s) as i128);
        }
        acc
    }

    /// Distinct symbols mentioned.
    pub fn syms(&self) -> impl Iterator<Item = &S> {
        self.terms.keys()
    }
}

/// Comparison relations over the integers. Closed under negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
        }
    }

    pub fn holds(self, v: i128) -> bool {
        match self {
            Rel::Lt => v < 0,
            Rel::Le => v <= 0,
            Rel::Eq => v == 0,
            Rel::Ne => v != 0,
            Rel::Ge => v >= 0,
            Rel::Gt => v > 0,
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "==",
            Rel::Ne => "!=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        };
        f.write_str(s)
    }
}

/// A linear atom `lhs ⊙ 0`. Negation is normalized away by flipping the
/// relation, so `¬(a < b)` is stored as `a ≥ b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom<S: Ord> {
    pub lhs: LinComb<S>,
    pub rel: Rel,
}

impl<S: Ord + Clone> Atom<S> {
    pub fn new(lhs: LinComb<S>, rel: Rel) -> Self {
        Atom { lhs, rel }
    }

    /// `lhs ⊙ rhs` folded into the `expr ⊙ 0` form.
    pub fn cmp(lhs: &LinComb<S>, rel: Rel, rhs: &LinComb<S>) -> Self {
        Atom { lhs: lhs.sub(rhs), rel }
    }

    pub fn negate(&self) -> Self {
        Atom { lhs: self.lhs.clone(), rel: self.rel.negate() }
    }

    pub fn eval(&self, f: impl FnMut(&S) -> i64) -> bool {
        self.rel.holds(self.lhs.eval(f))
    }

    /// `Some(truth)` when the atom mentions no symbols.
    pub fn const_value(&self) -> Option<bool> {
        if self.lhs.is_constant() {
            Some(self.rel.holds(self.lhs.constant as i128))
        } else {
            None
        }
    }

    pub fn map_syms<T: Ord + Clone>(&self, mut f: impl FnMut(&S) -> T) -> Atom<T> {
        Atom {
            lhs: self.lhs.subst(|s| LinComb::sym(f(s))),
            rel: self.rel,
        }
    }

    pub fn subst<T: Ord + Clone>(&self, f: impl FnMut(&S) -> LinComb<T>) -> Atom<T> {
        Atom { lhs: self.lhs.subst(f), rel: self.rel }
    }

    /// Canonical form for deduplication: relation reduced to `≤ / = / ≠`,
    /// coefficients gcd-reduced (with integer-exact constant rounding for
    /// `≤`), sign of the leading coefficient normalized for `=` and `≠`.
    /// Constant atoms canonicalize to `0 = 0` or `1 = 0`.
    pub fn canon(&self) -> Atom<S> {
        let (mut lhs, kind) = match self.rel {
            Rel::Lt => {
                let mut e = self.lhs.clone();
                e.constant += 1;
                (e, Rel::Le)
            }
            Rel::Le => (self.lhs.clone(), Rel::Le),
            Rel::Gt => {
                let mut e = self.lhs.scale(-1);
                e.constant += 1;
                (e, Rel::Le)
            }
            Rel::Ge => (self.lhs.scale(-1), Rel::Le),
            Rel::Eq => (self.lhs.clone(), Rel::Eq),
            Rel::Ne => (self.lhs.clone(), Rel::Ne),
        };
        if lhs.is_constant() {
            let truth = kind.holds(lhs.constant as i128);
            return if truth {
                Atom { lhs: LinComb::constant(0), rel: Rel::Eq }
            } else {
                Atom { lhs: LinComb::constant(1), rel: Rel::Eq }
            };
        }
        let mut g: i64 = 0;
        for c in lhs.terms.values() {
            g = gcd(g, c.abs());
        }
        match kind {
            Rel::Le => {
                if g > 1 {
                    for c in lhs.terms.values_mut() {
                        *c /= g;
                    }
                    lhs.constant = -(-lhs.constant).div_euclid(g);
                }
            }
            Rel::Eq | Rel::Ne => {
                if g > 1 && lhs.constant % g != 0 {
                    // gcd of coefficients cannot produce the constant
                    return if kind == Rel::Eq {
                        Atom { lhs: LinComb::constant(1), rel: Rel::Eq }
                    } else {
                        Atom { lhs: LinComb::constant(0), rel: Rel::Eq }
                    };
                }
                if g > 1 {
                    for c in lhs.terms.values_mut() {
                        *c /= g;
                    }
                    lhs.constant /= g;
                }
                if lhs.terms.values().next().map(|c| *c < 0).unwrap_or(false) {
                    lhs = lhs.scale(-1);
                }
            }
            _ => unreachable!(),
        }
        Atom { lhs, rel: kind }
    }

    pub fn syms(&self) -> impl Iterator<Item = &S> {
        self.lhs.syms()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl<S: Ord + fmt::Display> fmt::Display for LinComb<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (s, c) in &self.terms {
            if first {
                match *c {
                    1 => write!(f, "{s}")?,
                    -1 => write!(f, "-{s}")?,
                    c => write!(f, "{c}*{s}")?,
                }
                first = false;
            } else if *c >= 0 {
                if *c == 1 {
                    write!(f, " + {s}")?;
                } else {
                    write!(f, " + {c}*{s}")?;
                }
            } else if *c == -1 {
                write!(f, " - {s}")?;
            } else {
                write!(f, " - {}*{s}", -c)?;
            }
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)?;
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)?;
        }
        Ok(())
    }
}

impl<S: Ord + Clone + fmt::Display> fmt::Display for Atom<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // split the folded form back into `positive rel positive`
        let mut left = LinComb::constant(0);
        let mut right = LinComb::constant(0);
        for (s, c) in &self.lhs.terms {
            if *c > 0 {
                left.add_term(s.clone(), *c);
            } else {
                right.add_term(s.clone(), -*c);
            }
        }
        if self.lhs.constant > 0 {
            left.constant = self.lhs.constant;
        } else {
            right.constant = -self.lhs.constant;
        }
        write!(f, "{left} {} {right}", self.rel)
    }
}

/// SSA-indexed symbol: a program variable at a step, or the k-th input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    /// Value of `var` after `step` executed transitions.
    Var { var: VarId, step: u32 },
    /// The k-th value read by `input()` along the path.
    Input(u32),
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Var { var, step } => write!(f, "v{}_{}", var.0, step),
            Sym::Input(k) => write!(f, "r{k}"),
        }
    }
}

/// A conjunction, kept as an ordered list of atoms.
pub type Conj<S> = Vec<Atom<S>>;

/// A satisfying assignment. Symbols absent from the map evaluate to 0,
/// which keeps test extraction total when an input never reaches a guard.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model<S: Ord> {
    pub assignment: BTreeMap<S, i64>,
}

impl<S: Ord> Model<S> {
    pub fn value(&self, s: &S) -> i64 {
        self.assignment.get(s).copied().unwrap_or(0)
    }

    pub fn satisfies(&self, conj: &[Atom<S>]) -> bool
    where
        S: Clone,
    {
        conj.iter().all(|a| a.eval(|s| self.value(s)))
    }
}

/// Reindexes a formula over `V ∪ V′` (steps 0 and 1) to steps `i` and `i+1`.
/// Input symbols keep their ordinal.
pub fn shift_index(conj: &[Atom<Sym>], i: u32) -> Conj<Sym> {
    conj.iter()
        .map(|a| {
            a.map_syms(|s| match *s {
                Sym::Var { var, step } => Sym::Var { var, step: step + i },
                Sym::Input(k) => Sym::Input(k),
            })
        })
        .collect()
}

/// `frame(x)`: the conjunction of `y′ = y` for every variable other than
/// `x`, in the two-step (0/1) indexing.
pub fn frame(x: VarId, vars: &[VarId]) -> Conj<Sym> {
    vars.iter()
        .filter(|y| **y != x)
        .map(|y| {
            Atom::cmp(
                &LinComb::sym(Sym::Var { var: *y, step: 1 }),
                Rel::Eq,
                &LinComb::sym(Sym::Var { var: *y, step: 0 }),
            )
        })
        .collect()
}

fn frame_all(vars: &[VarId]) -> Conj<Sym> {
    vars.iter()
        .map(|y| {
            Atom::cmp(
                &LinComb::sym(Sym::Var { var: *y, step: 1 }),
                Rel::Eq,
                &LinComb::sym(Sym::Var { var: *y, step: 0 }),
            )
        })
        .collect()
}

/// The two-step (0/1) formula of one transition, excluding any input
/// binding: guard at step 0, update `x₁ = exp₀` plus frame for an
/// assignment, frame of all variables for an assume, frame of the
/// untouched variables for an input.
///
/// A nonlinear update is over-approximated by leaving the assigned
/// variable unconstrained; callers that need exactness (the concolic
/// engine) concretize upstream instead.
pub fn transition_formula(t: &Transition, vars: &[VarId]) -> Conj<Sym> {
    let mut out: Conj<Sym> = Vec::new();
    if let Some(g) = &t.cmd.guard {
        out.push(g.map_syms(|v| Sym::Var { var: *v, step: 0 }));
    }
    match &t.cmd.op {
        Op::Assign(x, exp) => {
            if exp.nonlinear.is_none() {
                let rhs = exp.lin.subst(|v| LinComb::sym(Sym::Var { var: *v, step: 0 }));
                out.push(Atom::cmp(
                    &LinComb::sym(Sym::Var { var: *x, step: 1 }),
                    Rel::Eq,
                    &rhs,
                ));
            }
            out.extend(frame(*x, vars));
        }
        Op::Input(x) => {
            out.extend(frame(*x, vars));
        }
        Op::Assume => {
            out.extend(frame_all(vars));
        }
    }
    out
}

/// Builds the path constraints `C₀,…,C_{n−1}` for an edge-consecutive path:
/// `C_i = (F ∧ x′ = exp ∧ frame(x))[/i]` for an assignment and
/// `C_i = (F ∧ frame(x))[/i] ∧ x_{i+1} = r_k` for an input, with input
/// ordinals `k` consecutive from 0. The concatenation is satisfiable
/// exactly when the path is feasible.
pub fn path_constraints(path: &[&Transition], vars: &[VarId]) -> Vec<Conj<Sym>> {
    let mut out = Vec::with_capacity(path.len());
    let mut k = 0u32;
    for (i, t) in path.iter().enumerate() {
        let mut c = shift_index(&transition_formula(t, vars), i as u32);
        if let Op::Input(x) = &t.cmd.op {
            c.push(Atom::cmp(
                &LinComb::sym(Sym::Var { var: *x, step: i as u32 + 1 }),
                Rel::Eq,
                &LinComb::sym(Sym::Input(k)),
            ));
            k += 1;
        }
        out.push(c);
    }
    out
}

/// Weakest precondition of a single atom across one transition.
///
/// Assignments substitute the right-hand side; assumes leave the atom
/// unchanged (the guard is handled separately by the caller). Returns
/// `None` when the atom is dropped: across an input the assigned variable
/// becomes unconstrained, and a nonlinear right-hand side cannot be
/// substituted into a linear atom.
pub fn wp_atom(a: &Atom<VarId>, t: &Transition) -> Option<Atom<VarId>> {
    match &t.cmd.op {
        Op::Assume => Some(a.clone()),
        Op::Input(x) => {
            if a.syms().any(|v| v == x) {
                None
            } else {
                Some(a.clone())
            }
        }
        Op::Assign(x, exp) => {
            if !a.syms().any(|v| v == x) {
                return Some(a.clone());
            }
            if exp.nonlinear.is_some() {
                return None;
            }
            Some(a.subst(|v| {
                if v == x {
                    exp.lin.clone()
                } else {
                    LinComb::sym(*v)
                }
            }))
        }
    }
}
