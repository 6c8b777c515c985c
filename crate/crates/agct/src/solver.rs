//! Decision procedure for conjunctions of linear integer atoms.
//!
//! The pipeline is: canonicalize atoms, split `≠` into `<`/`>` case pairs,
//! eliminate equalities by substitution, run Fourier–Motzkin over the
//! rationals with gcd tightening of every derived row, then search for an
//! integer model by back-substitution with branch-and-bound on fractional
//! values. UNSAT answers are proofs over the integers; resource limits
//! surface as `Unknown`, which callers must treat conservatively.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::sync::Mutex;

use crate::logic::{Atom, Model, Rel};

/// Deterministic budget shared by every engine: one unit per solver query
/// plus one per case split, one per executed transition in the interpreters.
#[derive(Debug, Clone)]
pub struct Fuel {
    remaining: u64,
    spent: u64,
}

impl Fuel {
    pub fn new(budget: u64) -> Self {
        Fuel { remaining: budget, spent: 0 }
    }

    /// Charges `n` units; returns false once the budget is gone.
    pub fn charge(&mut self, n: u64) -> bool {
        self.spent += n;
        if self.remaining < n {
            self.remaining = 0;
            false
        } else {
            self.remaining -= n;
            true
        }
    }

    pub fn exhausted(&self) -> bool {
        self.remaining == 0
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult<S: Ord> {
    Sat(Model<S>),
    Unsat,
    /// Resource limit hit. Counted against fuel; never a correctness claim.
    Unknown,
}

static QUERY_DUMP: Mutex<Option<std::fs::File>> = Mutex::new(None);

thread_local! {
    static STATS: std::cell::RefCell<QueryStats> = std::cell::RefCell::new(QueryStats::default());
}

/// Aggregate query counters for performance investigation.
#[derive(Debug, Clone, Copy, Default)]
pub struct QueryStats {
    pub queries: u64,
    pub atoms: u64,
    pub nanos: u64,
}

pub fn stats_take() -> QueryStats {
    STATS.with(|s| std::mem::take(&mut *s.borrow_mut()))
}

fn record_query(atoms: usize, nanos: u64) {
    STATS.with(|s| {
        let mut s = s.borrow_mut();
        s.queries += 1;
        s.atoms += atoms as u64;
        s.nanos += nanos;
    });
}

/// Enables the debug dump of every query, one conjunct per line.
pub fn set_query_dump(path: &std::path::Path) -> std::io::Result<()> {
    let f = std::fs::File::create(path)?;
    *QUERY_DUMP.lock().unwrap() = Some(f);
    Ok(())
}

fn dump_query<S: Ord + Clone + Display>(conj: &[Atom<S>]) {
    let mut guard = QUERY_DUMP.lock().unwrap();
    if let Some(f) = guard.as_mut() {
        for a in conj {
            let _ = writeln!(f, "(assert {a})");
        }
        let _ = writeln!(f, "(check-sat)");
    }
}

/// Satisfiability of a conjunction over the integers, with model extraction.
pub fn check_sat<S: Ord + Clone + Display>(conj: &[Atom<S>], fuel: &mut Fuel) -> SatResult<S> {
    let started = std::time::Instant::now();
    let fuel_before = fuel.spent();
    let result = check_sat_inner(conj, fuel);
    record_query(conj.len(), started.elapsed().as_nanos() as u64);
    if std::env::var_os("AGCT_DEBUG_SLOW").is_some() {
        let delta = fuel.spent() - fuel_before;
        if delta > 500 {
            eprintln!(
                "slow query: {} atoms, {} fuel, {:?} -> {}",
                conj.len(),
                delta,
                started.elapsed(),
                match &result {
                    SatResult::Sat(_) => "sat",
                    SatResult::Unsat => "unsat",
                    SatResult::Unknown => "unknown",
                }
            );
            for a in conj.iter().take(60) {
                eprintln!("    {a}");
            }
        }
    }
    result
}

fn check_sat_inner<S: Ord + Clone + Display>(conj: &[Atom<S>], fuel: &mut Fuel) -> SatResult<S> {
    dump_query(conj);
    if !fuel.charge(1) {
        return SatResult::Unknown;
    }
    // intern symbols in first-occurrence order
    let mut index: BTreeMap<&S, usize> = BTreeMap::new();
    let mut syms: Vec<&S> = Vec::new();
    for a in conj {
        for s in a.syms() {
            index.entry(s).or_insert_with(|| {
                syms.push(s);
                syms.len() - 1
            });
        }
    }
    let mut sys = System::default();
    for a in conj {
        let c = a.canon();
        if let Some(truth) = c.const_value() {
            if truth {
                continue;
            }
            return SatResult::Unsat;
        }
        let mut coeffs: BTreeMap<usize, i128> = BTreeMap::new();
        for (s, k) in &c.lhs.terms {
            coeffs.insert(index[s], *k as i128);
        }
        let row = Row { coeffs, bound: -(c.lhs.constant as i128) };
        match c.rel {
            Rel::Le => sys.les.push(row),
            Rel::Eq => sys.eqs.push(row),
            Rel::Ne => sys.nes.push(row),
            _ => unreachable!("canon yields Le/Eq/Ne"),
        }
    }
    match solve(sys.les, sys.eqs, sys.nes, Vec::new(), syms.len(), fuel, 0) {
        Solved::Sat(values) => {
            let mut assignment = BTreeMap::new();
            for (i, v) in values.into_iter().enumerate() {
                assignment.insert(syms[i].clone(), v);
            }
            SatResult::Sat(Model { assignment })
        }
        Solved::Unsat => SatResult::Unsat,
        Solved::Unknown => SatResult::Unknown,
    }
}

/// `true` iff `conj ⟹ a` is valid, i.e. `conj ∧ ¬a` is UNSAT over the
/// integers. An `Unknown` backend answer is reported as `false`, which only
/// ever makes abstractions coarser, never unsound.
pub fn implies<S: Ord + Clone + Display>(conj: &[Atom<S>], a: &Atom<S>, fuel: &mut Fuel) -> bool {
    implies3(conj, a, fuel) == Some(true)
}

/// [`implies`] with the resource limit surfaced: `None` means the backend
/// gave up, so the caller must not record a definitive answer.
pub fn implies3<S: Ord + Clone + Display>(
    conj: &[Atom<S>],
    a: &Atom<S>,
    fuel: &mut Fuel,
) -> Option<bool> {
    let mut q: Vec<Atom<S>> = conj.to_vec();
    q.push(a.negate());
    match check_sat(&q, fuel) {
        SatResult::Unsat => Some(true),
        SatResult::Sat(_) => Some(false),
        SatResult::Unknown => None,
    }
}

/// `Σ coeffs·x ⊙ bound` where ⊙ is ≤ for `les`, = for `eqs`, ≠ for `nes`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Row {
    coeffs: BTreeMap<usize, i128>,
    bound: i128,
}

#[derive(Debug, Clone, Default)]
struct System {
    les: Vec<Row>,
    eqs: Vec<Row>,
    nes: Vec<Row>,
}

enum Solved {
    Sat(Vec<i64>),
    Unsat,
    Unknown,
}

const MAX_ROWS: usize = 20_000;
// deep enough for one lazy split per input symbol on long paths
const MAX_DEPTH: u32 = 4096;

/// Substitution record: `var = Σ rhs·x + constant`.
type Subst = (usize, BTreeMap<usize, i128>, i128);

fn solve(
    mut les: Vec<Row>,
    mut eqs: Vec<Row>,
    mut nes: Vec<Row>,
    mut subs: Vec<Subst>,
    nvars: usize,
    fuel: &mut Fuel,
    depth: u32,
) -> Solved {
    if depth > MAX_DEPTH {
        return Solved::Unknown;
    }
    // Substitute unit-coefficient equalities through every row kind first:
    // most ≠ atoms ground out here, long before any case split.
    loop {
        let Some(pos) = eqs.iter().position(|r| r.coeffs.values().any(|c| c.abs() == 1)) else {
            break;
        };
        let eq = eqs.swap_remove(pos);
        let (&pivot, &pc) = eq
            .coeffs
            .iter()
            .find(|(_, c)| c.abs() == 1)
            .expect("position guaranteed a unit coefficient");
        // pivot = (bound − Σ_{v≠pivot} c·x) / pc, with pc = ±1
        let mut rhs: BTreeMap<usize, i128> = BTreeMap::new();
        for (&v, &c) in &eq.coeffs {
            if v != pivot {
                rhs.insert(v, -c * pc);
            }
        }
        let rhs_const = eq.bound * pc;
        for row in les.iter_mut().chain(eqs.iter_mut()).chain(nes.iter_mut()) {
            substitute(row, pivot, &rhs, rhs_const);
        }
        subs.push((pivot, rhs, rhs_const));
    }
    // remaining equalities have no unit coefficient: gcd-check, then relax
    for eq in std::mem::take(&mut eqs) {
        if eq.coeffs.is_empty() {
            if eq.bound != 0 {
                return Solved::Unsat;
            }
            continue;
        }
        let g = eq.coeffs.values().fold(0i128, |g, c| gcd128(g, c.abs()));
        if g > 1 && eq.bound % g != 0 {
            return Solved::Unsat;
        }
        les.push(Row { coeffs: eq.coeffs.clone(), bound: eq.bound });
        les.push(Row {
            coeffs: eq.coeffs.iter().map(|(v, c)| (*v, -c)).collect(),
            bound: -eq.bound,
        });
    }
    // grounded ≠ rows resolve for free
    let mut live_nes: Vec<Row> = Vec::new();
    for ne in std::mem::take(&mut nes) {
        if ne.coeffs.is_empty() {
            if ne.bound == 0 {
                return Solved::Unsat; // 0 ≠ 0
            }
            continue;
        }
        live_nes.push(ne);
    }
    // Lazy splitting: solve the inequality system alone; an UNSAT answer
    // settles everything, a model settles every ≠ it happens to satisfy,
    // and only a violated ≠ forces a case split.
    if !live_nes.is_empty() {
        let vals = match fm_phase(les.clone(), &subs, nvars, fuel, depth) {
            Solved::Sat(v) => v,
            other => return other,
        };
        let violated = live_nes
            .iter()
            .position(|ne| eval_row(ne, &vals) == ne.bound);
        let Some(pos) = violated else {
            return Solved::Sat(vals);
        };
        let ne = live_nes.swap_remove(pos);
        if !fuel.charge(1) {
            return Solved::Unknown;
        }
        // Σc·x ≤ bound − 1 first, then Σc·x ≥ bound + 1
        let mut lt = les.clone();
        lt.push(Row { coeffs: ne.coeffs.clone(), bound: ne.bound - 1 });
        let mut unknown = false;
        match solve(lt, Vec::new(), live_nes.clone(), subs.clone(), nvars, fuel, depth + 1) {
            Solved::Sat(m) => return Solved::Sat(m),
            Solved::Unknown => unknown = true,
            Solved::Unsat => {}
        }
        let mut gt = les;
        gt.push(Row {
            coeffs: ne.coeffs.iter().map(|(v, c)| (*v, -c)).collect(),
            bound: -ne.bound - 1,
        });
        return match solve(gt, Vec::new(), live_nes, subs, nvars, fuel, depth + 1) {
            Solved::Sat(m) => Solved::Sat(m),
            Solved::Unknown => Solved::Unknown,
            Solved::Unsat if unknown => Solved::Unknown,
            Solved::Unsat => Solved::Unsat,
        };
    }
    fm_phase(les, &subs, nvars, fuel, depth)
}

fn eval_row(row: &Row, vals: &[i64]) -> i128 {
    row.coeffs
        .iter()
        .map(|(v, c)| c * vals[*v] as i128)
        .sum()
}

/// Fourier–Motzkin elimination with per-row gcd tightening, integer model
/// search by back-substitution, and branch-and-bound on fractional values.
fn fm_phase(les: Vec<Row>, subs: &[Subst], nvars: usize, fuel: &mut Fuel, depth: u32) -> Solved {
    let mut stages: Vec<(usize, Vec<Row>, Vec<Row>)> = Vec::new();
    let mut rows = les;
    loop {
        let mut normalized = Vec::with_capacity(rows.len());
        for mut r in rows {
            if r.coeffs.is_empty() {
                if r.bound < 0 {
                    return Solved::Unsat;
                }
                continue;
            }
            let g = r.coeffs.values().fold(0i128, |g, c| gcd128(g, c.abs()));
            if g > 1 {
                for c in r.coeffs.values_mut() {
                    *c /= g;
                }
                r.bound = r.bound.div_euclid(g);
            }
            normalized.push(r);
        }
        normalized.sort();
        normalized.dedup();
        rows = normalized;
        let Some(&v) = pick_elimination_var(&rows) else {
            break;
        };
        let mut lowers = Vec::new();
        let mut uppers = Vec::new();
        let mut keep = Vec::new();
        for r in rows {
            match r.coeffs.get(&v) {
                None => keep.push(r),
                Some(c) if *c > 0 => uppers.push(r),
                Some(_) => lowers.push(r),
            }
        }
        for lo in &lowers {
            for up in &uppers {
                let Some(combined) = combine(lo, up, v) else {
                    return Solved::Unknown;
                };
                keep.push(combined);
            }
        }
        if keep.len() > MAX_ROWS {
            return Solved::Unknown;
        }
        stages.push((v, lowers, uppers));
        rows = keep;
    }
    // rationally satisfiable; search an integer point by back-substitution
    let mut values: Vec<Rat> = vec![Rat::int(0); nvars];
    let mut fractional: Option<(usize, Rat)> = None;
    for (v, lowers, uppers) in stages.iter().rev() {
        let mut lb: Option<Rat> = None;
        let mut ub: Option<Rat> = None;
        for r in lowers {
            let b = bound_for(r, *v, &values);
            lb = Some(match lb {
                Some(x) if x >= b => x,
                _ => b,
            });
        }
        for r in uppers {
            let b = bound_for(r, *v, &values);
            ub = Some(match ub {
                Some(x) if x <= b => x,
                _ => b,
            });
        }
        let chosen = choose(lb, ub);
        if !chosen.is_int() && fractional.is_none() {
            fractional = Some((*v, chosen));
        }
        values[*v] = chosen;
    }
    if let Some((v, val)) = fractional {
        // branch-and-bound on the first fractional assignment
        if !fuel.charge(1) {
            return Solved::Unknown;
        }
        let (floor, ceil) = (val.floor(), val.floor() + 1);
        let rebuild = |extra: Row| -> Vec<Row> {
            let mut out = Vec::new();
            for (_, lowers, uppers) in stages.iter().rev() {
                out.extend(lowers.iter().cloned());
                out.extend(uppers.iter().cloned());
            }
            out.push(extra);
            out
        };
        let le_floor = Row { coeffs: BTreeMap::from([(v, 1)]), bound: floor };
        let ge_ceil = Row { coeffs: BTreeMap::from([(v, -1)]), bound: -ceil };
        let mut unknown = false;
        match solve(
            rebuild(le_floor),
            resubst_eqs(subs),
            Vec::new(),
            Vec::new(),
            nvars,
            fuel,
            depth + 1,
        ) {
            Solved::Sat(m) => return Solved::Sat(m),
            Solved::Unknown => unknown = true,
            Solved::Unsat => {}
        }
        return match solve(
            rebuild(ge_ceil),
            resubst_eqs(subs),
            Vec::new(),
            Vec::new(),
            nvars,
            fuel,
            depth + 1,
        ) {
            Solved::Sat(m) => Solved::Sat(m),
            Solved::Unknown => Solved::Unknown,
            Solved::Unsat if unknown => Solved::Unknown,
            Solved::Unsat => Solved::Unsat,
        };
    }
    // all base variables integral; recover substituted variables
    let mut out: Vec<i64> = values.iter().map(|r| r.num as i64).collect();
    for (v, rhs, c) in subs.iter().rev() {
        let mut acc = *c;
        for (&w, &k) in rhs {
            acc += k * out[w] as i128;
        }
        match i64::try_from(acc) {
            Ok(x) => out[*v] = x,
            Err(_) => return Solved::Unknown,
        }
    }
    Solved::Sat(out)
}

/// Substitution stack re-expressed as equality rows, for branch-and-bound
/// restarts (the substitutions must keep holding under the new bound).
fn resubst_eqs(subs: &[Subst]) -> Vec<Row> {
    subs.iter()
        .map(|(v, rhs, c)| {
            let mut coeffs: BTreeMap<usize, i128> = rhs.iter().map(|(w, k)| (*w, -k)).collect();
            coeffs.insert(*v, 1);
            Row { coeffs, bound: *c }
        })
        .collect()
}

fn substitute(row: &mut Row, v: usize, rhs: &BTreeMap<usize, i128>, rhs_const: i128) {
    let Some(c) = row.coeffs.remove(&v) else {
        return;
    };
    for (&w, &k) in rhs {
        let slot = row.coeffs.entry(w).or_insert(0);
        *slot += c * k;
        if *slot == 0 {
            row.coeffs.remove(&w);
        }
    }
    row.bound -= c * rhs_const;
}

fn pick_elimination_var(rows: &[Row]) -> Option<&usize> {
    let mut counts: BTreeMap<&usize, (usize, usize)> = BTreeMap::new();
    for r in rows {
        for (v, c) in &r.coeffs {
            let e = counts.entry(v).or_insert((0, 0));
            if *c > 0 {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    counts
        .into_iter()
        .min_by_key(|(v, (up, lo))| (up * lo, **v))
        .map(|(v, _)| v)
}

fn combine(lo: &Row, up: &Row, v: usize) -> Option<Row> {
    let cl = -lo.coeffs[&v]; // > 0
    let cu = up.coeffs[&v]; // > 0
    let mut coeffs: BTreeMap<usize, i128> = BTreeMap::new();
    for (&w, &c) in &lo.coeffs {
        if w != v {
            *coeffs.entry(w).or_insert(0) += c.checked_mul(cu)?;
        }
    }
    for (&w, &c) in &up.coeffs {
        if w != v {
            *coeffs.entry(w).or_insert(0) += c.checked_mul(cl)?;
        }
    }
    coeffs.retain(|_, c| *c != 0);
    let bound = lo.bound.checked_mul(cu)?.checked_add(up.bound.checked_mul(cl)?)?;
    Some(Row { coeffs, bound })
}

/// Bound on `v` induced by `r` once every other variable in `r` has a value.
fn bound_for(r: &Row, v: usize, values: &[Rat]) -> Rat {
    let cv = r.coeffs[&v];
    let mut rest = Rat::int(r.bound);
    for (&w, &c) in &r.coeffs {
        if w != v {
            rest = rest.sub(&values[w].mul_int(c));
        }
    }
    rest.div_int(cv)
}

/// Deterministic pick inside a (possibly half-open) rational interval:
/// the integer nearest 0 when one exists, otherwise the fractional bound.
fn choose(lb: Option<Rat>, ub: Option<Rat>) -> Rat {
    match (lb, ub) {
        (None, None) => Rat::int(0),
        (Some(l), None) => {
            let c = l.ceil();
            Rat::int(c.max(0))
        }
        (None, Some(u)) => {
            let f = u.floor();
            Rat::int(f.min(0))
        }
        (Some(l), Some(u)) => {
            let (cl, fu) = (l.ceil(), u.floor());
            if cl <= fu {
                Rat::int(cl.max(0).min(fu))
            } else {
                // rational interval without an integer; report the lower end
                l
            }
        }
    }
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Minimal exact rational on i128, denominators kept positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rat {
    num: i128,
    den: i128,
}

impl Rat {
    fn int(n: i128) -> Self {
        Rat { num: n, den: 1 }
    }

    fn normalize(mut self) -> Self {
        if self.den < 0 {
            self.num = -self.num;
            self.den = -self.den;
        }
        let g = gcd128(self.num, self.den).max(1);
        Rat { num: self.num / g, den: self.den / g }
    }

    fn is_int(&self) -> bool {
        self.den == 1
    }

    fn sub(&self, o: &Rat) -> Rat {
        Rat { num: self.num * o.den - o.num * self.den, den: self.den * o.den }.normalize()
    }

    fn mul_int(&self, k: i128) -> Rat {
        Rat { num: self.num * k, den: self.den }.normalize()
    }

    fn div_int(&self, k: i128) -> Rat {
        Rat { num: self.num, den: self.den * k }.normalize()
    }

    fn floor(&self) -> i128 {
        self.num.div_euclid(self.den)
    }

    fn ceil(&self) -> i128 {
        -(-self.num).div_euclid(self.den)
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::LinComb;

    fn atom(coeffs: &[(&str, i64)], rel: Rel, rhs: i64) -> Atom<String> {
        let mut lhs = LinComb::constant(-rhs);
        for (s, c) in coeffs {
            lhs.add_term(s.to_string(), *c);
        }
        Atom::new(lhs, rel)
    }

    fn sat(conj: &[Atom<String>]) -> SatResult<String> {
        let mut fuel = Fuel::new(10_000);
        check_sat(conj, &mut fuel)
    }

    #[test]
    fn unique_integer_point() {
        // {x > 0, x < 2} → SAT with x = 1
        let conj = vec![atom(&[("x", 1)], Rel::Gt, 0), atom(&[("x", 1)], Rel::Lt, 2)];
        match sat(&conj) {
            SatResult::Sat(m) => assert_eq!(m.value(&"x".to_string()), 1),
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn integrality_gap() {
        // {x > 0, x < 1} is satisfiable over the rationals but not ℤ
        let conj = vec![atom(&[("x", 1)], Rel::Gt, 0), atom(&[("x", 1)], Rel::Lt, 1)];
        assert_eq!(sat(&conj), SatResult::Unsat);
    }

    #[test]
    fn guard_contradiction() {
        // {i = 0, i ≥ 30}
        let conj = vec![atom(&[("i", 1)], Rel::Eq, 0), atom(&[("i", 1)], Rel::Ge, 30)];
        assert_eq!(sat(&conj), SatResult::Unsat);
    }

    #[test]
    fn neq_splitting_finds_models() {
        let conj = vec![
            atom(&[("x", 1)], Rel::Ne, 10),
            atom(&[("x", 1)], Rel::Ge, 10),
            atom(&[("x", 1)], Rel::Le, 11),
        ];
        match sat(&conj) {
            SatResult::Sat(m) => assert_eq!(m.value(&"x".to_string()), 11),
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn equality_chains_substitute() {
        // x = y, y = z + 1, z = 4, x ≤ 5 → x = 5
        let conj = vec![
            atom(&[("x", 1), ("y", -1)], Rel::Eq, 0),
            atom(&[("y", 1), ("z", -1)], Rel::Eq, 1),
            atom(&[("z", 1)], Rel::Eq, 4),
            atom(&[("x", 1)], Rel::Le, 5),
        ];
        match sat(&conj) {
            SatResult::Sat(m) => {
                assert_eq!(m.value(&"x".to_string()), 5);
                assert_eq!(m.value(&"y".to_string()), 5);
                assert_eq!(m.value(&"z".to_string()), 4);
            }
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn parity_equality_unsat() {
        // 2x = 1
        let conj = vec![atom(&[("x", 2)], Rel::Eq, 1)];
        assert_eq!(sat(&conj), SatResult::Unsat);
    }

    #[test]
    fn implies_basics() {
        let mut fuel = Fuel::new(10_000);
        // {x = 1} ⟹ x > 0
        assert!(implies(
            &[atom(&[("x", 1)], Rel::Eq, 1)],
            &atom(&[("x", 1)], Rel::Gt, 0),
            &mut fuel
        ));
        // {} ⟹ x > 0 fails
        assert!(!implies(&[], &atom(&[("x", 1)], Rel::Gt, 0), &mut fuel));
        // {b = 0} ⟹ b ≠ 1
        assert!(implies(
            &[atom(&[("b", 1)], Rel::Eq, 0)],
            &atom(&[("b", 1)], Rel::Ne, 1),
            &mut fuel
        ));
    }

    #[test]
    fn model_satisfies_returned_conjunction() {
        let conj = vec![
            atom(&[("a", 2), ("b", 3)], Rel::Le, 12),
            atom(&[("a", 1), ("b", -1)], Rel::Ge, -2),
            atom(&[("b", 1)], Rel::Gt, 0),
        ];
        match sat(&conj) {
            SatResult::Sat(m) => assert!(m.satisfies(&conj)),
            other => panic!("expected SAT, got {other:?}"),
        }
    }

    #[test]
    fn fuel_exhaustion_is_unknown() {
        let conj = vec![atom(&[("x", 1)], Rel::Gt, 0)];
        let mut fuel = Fuel::new(0);
        assert_eq!(check_sat(&conj, &mut fuel), SatResult::Unknown);
    }

    /// Exhaustive box oracle: brute-force search over assignments in
    /// `[-bound, bound]^n`, pruning as soon as a fully-assigned atom fails.
    pub fn brute_force_in_box(conj: &[Atom<String>], bound: i64) -> Option<BTreeMap<String, i64>> {
        let mut syms: Vec<String> = Vec::new();
        for a in conj {
            for s in a.syms() {
                if !syms.contains(s) {
                    syms.push(s.clone());
                }
            }
        }
        fn rec(
            conj: &[Atom<String>],
            syms: &[String],
            bound: i64,
            partial: &mut BTreeMap<String, i64>,
        ) -> bool {
            let ready = |a: &Atom<String>| a.syms().all(|s| partial.contains_key(s));
            if !conj
                .iter()
                .filter(|a| ready(a))
                .all(|a| a.eval(|s| partial[s]))
            {
                return false;
            }
            let Some(next) = syms.iter().find(|s| !partial.contains_key(*s)) else {
                return true;
            };
            for v in -bound..=bound {
                partial.insert(next.clone(), v);
                if rec(conj, syms, bound, partial) {
                    return true;
                }
            }
            partial.remove(next);
            false
        }
        let mut partial = BTreeMap::new();
        if rec(conj, &syms, bound, &mut partial) {
            Some(partial)
        } else {
            None
        }
    }

    #[test]
    fn agrees_with_box_oracle_on_random_conjunctions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let names = ["a", "b", "c", "d", "e", "f"];
        for _ in 0..300 {
            let nsyms = rng.gen_range(1..=4usize);
            let natoms = rng.gen_range(1..=6usize);
            let conj: Vec<Atom<String>> = (0..natoms)
                .map(|_| {
                    let nterms = rng.gen_range(1..=2usize);
                    let mut coeffs = Vec::new();
                    for _ in 0..nterms {
                        coeffs.push((names[rng.gen_range(0..nsyms)], rng.gen_range(-3..=3i64)));
                    }
                    let rel = match rng.gen_range(0..6) {
                        0 => Rel::Lt,
                        1 => Rel::Le,
                        2 => Rel::Eq,
                        3 => Rel::Ne,
                        4 => Rel::Ge,
                        _ => Rel::Gt,
                    };
                    atom(&coeffs, rel, rng.gen_range(-8..=8i64))
                })
                .collect();
            let oracle = brute_force_in_box(&conj, 8);
            let mut fuel = Fuel::new(100_000);
            match (check_sat(&conj, &mut fuel), oracle) {
                (SatResult::Sat(m), _) => assert!(m.satisfies(&conj), "bad model for {conj:?}"),
                (SatResult::Unsat, Some(model)) => {
                    panic!("solver UNSAT but box model {model:?} for {conj:?}")
                }
                (SatResult::Unsat, None) => {}
                (SatResult::Unknown, _) => {}
            }
        }
    }
}
