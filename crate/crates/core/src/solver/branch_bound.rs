//! Best-first branch-and-bound over the LP relaxation.
//!
//! Deterministic by construction: node ordering breaks ties by
//! insertion sequence, branching picks the most fractional binary with
//! the lowest index, and the underlying simplex is deterministic. A
//! warm start is evaluated by fixing the hinted binaries and solving
//! the resulting LP; it seeds the incumbent and never constrains the
//! search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::solver::model::Model;
use crate::solver::simplex::{solve_lp, LpOutcome};
use crate::solver::VarId;

const INT_TOL: f64 = 1e-6;
const PRUNE_EPS: f64 = 1e-9;
const MAX_NODES: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct MilpOptions {
    /// Relative optimality gap at which the search stops.
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
    /// Suggested 0/1 values for binary variables.
    pub warm_start: Option<Vec<(VarId, f64)>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            mip_gap: 1e-4,
            time_limit: None,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    /// Proven relative gap at termination.
    pub gap: f64,
    pub nodes: u64,
    pub timed_out: bool,
}

struct Node {
    /// (lb, ub) per binary, parallel to the binary list.
    bounds: Vec<(f64, f64)>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the lowest bound pops first,
    // oldest node first among ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves a minimization MILP. Returns the best incumbent with its
/// proven gap; errors with [`Error::NoIncumbent`] if the time limit
/// expires before any feasible point is found.
pub fn solve_milp(model: &Model, opts: &MilpOptions) -> Result<MilpSolution> {
    let binaries = model.binaries();
    let started = Instant::now();

    let mut work = model.clone();
    let base_bounds: Vec<(f64, f64)> = binaries.iter().map(|&b| model.bounds(b)).collect();

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(hints) = &opts.warm_start {
        if let Some(sol) = evaluate_hint(&mut work, &binaries, &base_bounds, hints)? {
            incumbent = Some(sol);
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut nodes: u64 = 0;
    let mut timed_out = false;

    let root = Node {
        bounds: base_bounds.clone(),
        bound: f64::NEG_INFINITY,
        seq,
    };
    heap.push(root);

    let gap_abs = |inc: f64| opts.mip_gap * inc.abs().max(1.0);

    loop {
        let Some(top) = heap.peek() else { break };
        if let Some((inc, _)) = &incumbent {
            // Best-first: the top bound is the global lower bound.
            if top.bound >= inc - gap_abs(*inc).max(PRUNE_EPS) {
                break;
            }
        }
        if let Some(limit) = opts.time_limit {
            if started.elapsed() > limit {
                timed_out = true;
                break;
            }
        }
        if nodes >= MAX_NODES {
            timed_out = true;
            break;
        }
        let node = heap.pop().expect("peeked node is poppable");
        nodes += 1;

        apply_bounds(&mut work, &binaries, &node.bounds);
        let outcome = solve_lp(&work)?;
        let sol = match outcome {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                return Err(Error::Solver("MILP relaxation is unbounded".into()))
            }
        };
        if let Some((inc, _)) = &incumbent {
            if sol.objective >= inc - gap_abs(*inc).max(PRUNE_EPS) {
                continue;
            }
        }

        match most_fractional(&sol.values, &binaries) {
            None => {
                let better = incumbent
                    .as_ref()
                    .map_or(true, |(inc, _)| sol.objective < inc - PRUNE_EPS);
                if better {
                    incumbent = Some((sol.objective, sol.values));
                }
            }
            Some(branch_idx) => {
                for fix in [0.0, 1.0] {
                    let mut bounds = node.bounds.clone();
                    let (lo, hi) = bounds[branch_idx];
                    bounds[branch_idx] = (lo.max(fix), hi.min(fix));
                    seq += 1;
                    heap.push(Node {
                        bounds,
                        bound: sol.objective,
                        seq,
                    });
                }
            }
        }
    }

    apply_bounds(&mut work, &binaries, &base_bounds);

    let (objective, values) = incumbent.ok_or_else(|| {
        Error::NoIncumbent(format!(
            "no feasible point after {nodes} nodes{}",
            if timed_out { " (limit reached)" } else { "" }
        ))
    })?;
    let best_bound = heap
        .peek()
        .map_or(objective, |n| n.bound)
        .min(objective);
    let gap = ((objective - best_bound) / objective.abs().max(1.0)).max(0.0);
    Ok(MilpSolution {
        values,
        objective,
        best_bound,
        gap,
        nodes,
        timed_out,
    })
}

fn apply_bounds(work: &mut Model, binaries: &[VarId], bounds: &[(f64, f64)]) {
    for (&b, &(lo, hi)) in binaries.iter().zip(bounds) {
        work.vars[b.index()].lb = lo;
        work.vars[b.index()].ub = hi;
    }
}

fn evaluate_hint(
    work: &mut Model,
    binaries: &[VarId],
    base_bounds: &[(f64, f64)],
    hints: &[(VarId, f64)],
) -> Result<Option<(f64, Vec<f64>)>> {
    let mut bounds = base_bounds.to_vec();
    for &(var, val) in hints {
        if let Some(k) = binaries.iter().position(|&b| b == var) {
            let v = if val >= 0.5 { 1.0 } else { 0.0 };
            let (lo, hi) = bounds[k];
            bounds[k] = (lo.max(v), hi.min(v));
        }
    }
    apply_bounds(work, binaries, &bounds);
    let outcome = solve_lp(work)?;
    apply_bounds(work, binaries, base_bounds);
    match outcome {
        LpOutcome::Optimal(s) => Ok(Some((s.objective, s.values))),
        _ => Ok(None),
    }
}

fn most_fractional(values: &[f64], binaries: &[VarId]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &b) in binaries.iter().enumerate() {
        let v = values[b.index()];
        let frac = v.min(1.0 - v);
        if frac <= INT_TOL {
            continue;
        }
        if best.map_or(true, |(_, f)| frac > f) {
            best = Some((k, frac));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    /// min -8a -11b -6c -4d subject to 5a+7b+4c+3d <= 14; classic
    /// knapsack with optimum -21 at (0,1,1,1).
    fn knapsack() -> Model {
        let mut m = Model::new();
        let vals = [-8.0, -11.0, -6.0, -4.0];
        let wts = [5.0, 7.0, 4.0, 3.0];
        let mut coeffs = Vec::new();
        for k in 0..4 {
            let z = m.add_binary(("z", k as u32));
            m.set_objective(z, vals[k]);
            coeffs.push((z, wts[k]));
        }
        m.add_row(("cap", 0), coeffs, -INF, 14.0);
        m
    }

    #[test]
    fn knapsack_optimum() {
        let m = knapsack();
        let sol = solve_milp(&m, &MilpOptions { mip_gap: 0.0, ..Default::default() }).unwrap();
        assert!((sol.objective - -21.0).abs() < 1e-9);
        assert!(sol.gap <= 1e-12);
        let z: Vec<bool> = m.binaries().iter().map(|b| sol.values[b.index()] > 0.5).collect();
        assert_eq!(z, vec![false, true, true, true]);
    }

    #[test]
    fn warm_start_at_optimum_is_kept() {
        let m = knapsack();
        let bins = m.binaries();
        let hints: Vec<(VarId, f64)> = bins
            .iter()
            .zip([0.0, 1.0, 1.0, 1.0])
            .map(|(&b, v)| (b, v))
            .collect();
        let sol = solve_milp(
            &m,
            &MilpOptions {
                mip_gap: 0.0,
                warm_start: Some(hints),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((sol.objective - -21.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_binary_model_reports_no_incumbent() {
        let mut m = Model::new();
        let z1 = m.add_binary(("z", 1));
        let z2 = m.add_binary(("z", 2));
        // z1 + z2 = 0.5 has no integral solution (and no LP issue).
        m.add_row(("r", 0), vec![(z1, 1.0), (z2, 1.0)], 0.5, 0.5);
        let err = solve_milp(&m, &MilpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoIncumbent(_)));
    }

    #[test]
    fn pure_lp_passes_through() {
        let mut m = Model::new();
        let x = m.add_var(("x", 0), 0.0, 3.0);
        m.set_objective(x, -2.0);
        let sol = solve_milp(&m, &MilpOptions::default()).unwrap();
        assert!((sol.objective - -6.0).abs() < 1e-9);
        assert_eq!(sol.gap, 0.0);
    }

    #[test]
    fn loose_gap_stops_within_tolerance() {
        let m = knapsack();
        let sol = solve_milp(&m, &MilpOptions { mip_gap: 0.5, ..Default::default() }).unwrap();
        assert!(sol.gap <= 0.5 + 1e-12);
        assert!(sol.best_bound <= sol.objective + 1e-12);
    }

    #[test]
    fn deterministic_across_runs() {
        let m = knapsack();
        let a = solve_milp(&m, &MilpOptions { mip_gap: 0.0, ..Default::default() }).unwrap();
        let b = solve_milp(&m, &MilpOptions { mip_gap: 0.0, ..Default::default() }).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.nodes, b.nodes);
    }
}
