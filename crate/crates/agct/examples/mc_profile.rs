use agct::cegar::{abstract_mc, PostCache, PredicateSet};
use agct::ir::GoalSet;
use agct::parse::parse_program;
use agct::solver::{stats_take, Fuel};
use std::time::Instant;

fn main() {
    let src = std::fs::read_to_string(std::env::args().nth(1).unwrap()).unwrap();
    let budget: u64 = std::env::args().nth(2).unwrap().parse().unwrap();
    let rounds: u32 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(1);
    let p = parse_program(&src).unwrap();
    let goals: GoalSet = match std::env::args().nth(4) {
        Some(id) => [agct::ir::TransId::new(id)].into_iter().collect(),
        None => p.branches(),
    };
    let mut cache = PostCache::default();
    let mut preds = PredicateSet::new();
    for round in 0..rounds {
        let t = Instant::now();
        stats_take();
        let mut fuel = Fuel::new(budget);
        let out = abstract_mc(&p, preds.clone(), &goals, &mut fuel, &mut cache);
        preds = out.predicates;
        let st = stats_take();
        println!(
            "round {} time {:.1?} fuel {} refinements {} preds {} arg {} minted {} unreach {} exhausted {} | queries {} avg_atoms {:.1} avg_us {:.1}",
            round, t.elapsed(), fuel.spent(), out.refinements, preds.len(),
            out.arg.nodes.len(), out.suite.len(), out.unreachable.len(), out.fuel_exhausted,
            st.queries, st.atoms as f64 / st.queries.max(1) as f64,
            st.nanos as f64 / 1000.0 / st.queries.max(1) as f64,
        );
        if out.remaining.is_empty() { println!("done"); break; }
    }
}
