//! Minimum-load-shed DC dispatch with fixed line statuses.
//!
//! This is the shutoff model with the line status variables pinned:
//! flows obey the DC approximation on energized lines, de-energized
//! lines carry no flow and leave their angle difference loose within
//! the big-M window, and every bus may shed up to its demand. Shedding
//! everything is always feasible, so the LP can never be infeasible on
//! a well-formed network.
//!
//! The model builder here is shared with the shutoff MILP so that the
//! fixed-status LP and the optimization problem are structurally the
//! same program.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::net::{BusId, DemandTable, Network};
use crate::solver::{solve_lp, LpOutcome, Model, VarId};
use crate::threshold::DeEnergizationPlan;

/// Big-M window for de-energized lines.
pub const BIG_M_UPPER: f64 = 2.0 * std::f64::consts::PI;
pub const BIG_M_LOWER: f64 = -2.0 * std::f64::consts::PI;

/// Hourly LP solution in MW/radians.
#[derive(Debug, Clone)]
pub struct DispatchResult {
    pub day: NaiveDate,
    pub hour: usize,
    /// Per generator, network order.
    pub p_g_mw: Vec<f64>,
    /// Per line, network order; positive from -> to.
    pub flow_mw: Vec<f64>,
    /// Per bus, network order.
    pub angle_rad: Vec<f64>,
    /// Per bus, network order.
    pub shed_mw: Vec<f64>,
    pub total_shed_mw: f64,
    pub feasible: bool,
}

/// 24 hourly solutions for one plan on one day.
#[derive(Debug, Clone)]
pub struct DayDispatch {
    pub day: NaiveDate,
    pub hours: Vec<DispatchResult>,
    /// MWh over the day at 1-hour steps.
    pub total_shed_mwh: f64,
}

/// Variable handles into the shared power model.
#[derive(Debug, Clone)]
pub struct PowerVars {
    pub p_g: Vec<VarId>,
    pub p_ls: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub theta: Vec<VarId>,
    /// Binary status per line; `None` when the status is a constant.
    pub z: Vec<Option<VarId>>,
}

/// Line status treatment when building the model.
pub enum SwitchMode<'a> {
    /// Status constants per line (dense order).
    Fixed(&'a [bool]),
    /// Binary statuses for the listed (line index, risk) pairs, a risk
    /// budget row over them, and the switching penalty weight.
    Binary {
        switchable: &'a [(usize, f64)],
        budget: f64,
        epsilon: f64,
    },
}

/// Builds the single-hour shutoff model. Demand is per-unit, dense bus
/// order. Generator lower bounds are relaxed to zero.
pub fn build_power_model(network: &Network, demand_pu: &[f64], mode: &SwitchMode) -> (Model, PowerVars) {
    let nb = network.n_buses();
    let nl = network.n_lines();
    assert_eq!(demand_pu.len(), nb, "demand vector must cover every bus");

    let mut m = Model::new();
    let p_g: Vec<VarId> = network
        .generators
        .iter()
        .enumerate()
        .map(|(i, g)| m.add_var(("pg", i as u32), 0.0, network.pu(g.p_max_mw)))
        .collect();
    let p_ls: Vec<VarId> = (0..nb)
        .map(|i| m.add_var(("ls", i as u32), 0.0, demand_pu[i]))
        .collect();
    let flow: Vec<VarId> = network
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let cap = network.pu(l.flow_limit_mw);
            m.add_var(("f", i as u32), -cap, cap)
        })
        .collect();
    let theta: Vec<VarId> = (0..nb)
        .map(|i| m.add_var(("th", i as u32), f64::NEG_INFINITY, f64::INFINITY))
        .collect();

    for v in &p_ls {
        m.set_objective(*v, 1.0);
    }

    let mut z: Vec<Option<VarId>> = vec![None; nl];
    let statuses: Vec<bool> = match mode {
        SwitchMode::Fixed(s) => s.to_vec(),
        SwitchMode::Binary { switchable, budget, epsilon } => {
            let mut budget_row = Vec::with_capacity(switchable.len());
            for &(li, risk) in switchable.iter() {
                let zv = m.add_binary(("z", li as u32));
                // Objective epsilon * (1 - z): the constant part is
                // added back by the caller.
                m.set_objective(zv, -epsilon);
                z[li] = Some(zv);
                budget_row.push((zv, risk));
            }
            m.add_row(("budget", 0), budget_row, f64::NEG_INFINITY, *budget);
            vec![true; nl]
        }
    };

    for (li, line) in network.lines.iter().enumerate() {
        let fr = network.bus_idx(line.from_bus).expect("validated bus ref");
        let to = network.bus_idx(line.to_bus).expect("validated bus ref");
        let b = line.susceptance_b;
        let cap = network.pu(line.flow_limit_mw);
        match z[li] {
            Some(zv) => {
                // Flow limits tied to status: -cap*z <= f <= cap*z.
                m.add_row(("fub", li as u32), vec![(flow[li], 1.0), (zv, -cap)], f64::NEG_INFINITY, 0.0);
                m.add_row(("flb", li as u32), vec![(flow[li], 1.0), (zv, cap)], 0.0, f64::INFINITY);
                // Angle window: delta_min*z + M_lower*(1-z) <= dtheta <= ...
                m.add_row(
                    ("alb", li as u32),
                    vec![(theta[fr], 1.0), (theta[to], -1.0), (zv, -(line.angle_min_rad - BIG_M_LOWER))],
                    BIG_M_LOWER,
                    f64::INFINITY,
                );
                m.add_row(
                    ("aub", li as u32),
                    vec![(theta[fr], 1.0), (theta[to], -1.0), (zv, -(line.angle_max_rad - BIG_M_UPPER))],
                    f64::NEG_INFINITY,
                    BIG_M_UPPER,
                );
                // DC coupling released by big-M when the line is off:
                // |b|*M_lower <= f + b*dtheta + |b|*M*z <= ... as two rows.
                let babs = b.abs();
                m.add_row(
                    ("dlb", li as u32),
                    vec![(flow[li], 1.0), (theta[fr], b), (theta[to], -b), (zv, babs * BIG_M_LOWER)],
                    babs * BIG_M_LOWER,
                    f64::INFINITY,
                );
                m.add_row(
                    ("dub", li as u32),
                    vec![(flow[li], 1.0), (theta[fr], b), (theta[to], -b), (zv, babs * BIG_M_UPPER)],
                    f64::NEG_INFINITY,
                    babs * BIG_M_UPPER,
                );
            }
            None if statuses[li] => {
                m.add_row(
                    ("ang", li as u32),
                    vec![(theta[fr], 1.0), (theta[to], -1.0)],
                    line.angle_min_rad,
                    line.angle_max_rad,
                );
                m.add_row(
                    ("dc", li as u32),
                    vec![(flow[li], 1.0), (theta[fr], b), (theta[to], -b)],
                    0.0,
                    0.0,
                );
            }
            None => {
                // De-energized: no flow, angle difference loose within
                // the big-M window.
                m.fix_var(flow[li], 0.0);
                m.add_row(
                    ("ang", li as u32),
                    vec![(theta[fr], 1.0), (theta[to], -1.0)],
                    BIG_M_LOWER,
                    BIG_M_UPPER,
                );
                let babs = b.abs();
                m.add_row(
                    ("dc", li as u32),
                    vec![(flow[li], 1.0), (theta[fr], b), (theta[to], -b)],
                    babs * BIG_M_LOWER,
                    babs * BIG_M_UPPER,
                );
            }
        }
    }

    // Power balance: sum(out) - sum(in) - sum(gen) - shed = -demand.
    for (bi, bus) in network.buses.iter().enumerate() {
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for (li, line) in network.lines.iter().enumerate() {
            if line.from_bus == bus.id {
                coeffs.push((flow[li], 1.0));
            } else if line.to_bus == bus.id {
                coeffs.push((flow[li], -1.0));
            }
        }
        for (gi, g) in network.generators.iter().enumerate() {
            if g.bus == bus.id {
                coeffs.push((p_g[gi], -1.0));
            }
        }
        coeffs.push((p_ls[bi], -1.0));
        m.add_row(("bal", bi as u32), coeffs, -demand_pu[bi], -demand_pu[bi]);
    }

    // One reference angle per connected component, on the lowest bus id.
    // With binary statuses the components of the fully energized graph
    // are used, since islands there stay tied through big-M windows.
    let energized = |li: usize| match mode {
        SwitchMode::Fixed(s) => s[li],
        SwitchMode::Binary { .. } => true,
    };
    for bi in reference_buses(network, energized) {
        m.fix_var(theta[bi], 0.0);
    }

    (m, PowerVars { p_g, p_ls, flow, theta, z })
}

/// Dense indices of the lowest-id bus in each connected component.
fn reference_buses<F: Fn(usize) -> bool>(network: &Network, energized: F) -> Vec<usize> {
    let labels = network.components(energized);
    let mut best: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (bi, &label) in labels.iter().enumerate() {
        let cur = best.entry(label).or_insert(bi);
        if network.buses[bi].id < network.buses[*cur].id {
            *cur = bi;
        }
    }
    let mut refs: Vec<usize> = best.into_values().collect();
    refs.sort_unstable();
    refs
}

/// Line statuses (dense order) implied by a plan's off set.
pub fn statuses_from_plan(network: &Network, plan: &DeEnergizationPlan) -> Result<Vec<bool>> {
    let mut statuses = vec![true; network.n_lines()];
    for id in &plan.off_lines {
        let li = network
            .line_idx(*id)
            .ok_or_else(|| Error::Reference(format!("plan references absent line {id}")))?;
        statuses[li] = false;
    }
    Ok(statuses)
}

/// Solves the fixed-status dispatch LP for one hour of demand (MW per
/// dense bus index), minimizing total load shed.
pub fn dispatch_fixed(
    network: &Network,
    statuses: &[bool],
    demand_mw: &[f64],
    day: NaiveDate,
    hour: usize,
) -> Result<DispatchResult> {
    if statuses.len() != network.n_lines() {
        return Err(Error::Inconsistency(format!(
            "{} statuses for {} lines",
            statuses.len(),
            network.n_lines()
        )));
    }
    let demand_pu: Vec<f64> = demand_mw.iter().map(|&d| network.pu(d)).collect();
    let (model, vars) = build_power_model(network, &demand_pu, &SwitchMode::Fixed(statuses));
    let sol = match solve_lp(&model)? {
        LpOutcome::Optimal(s) => s,
        outcome => {
            // Shedding all load is always feasible; reaching this means
            // the solver failed. Dump the model for debugging.
            return Err(Error::Solver(format!(
                "dispatch LP reported {} on a model that admits the all-shed point; model:\n{}",
                match outcome {
                    LpOutcome::Infeasible => "infeasible",
                    LpOutcome::Unbounded => "unbounded",
                    LpOutcome::Optimal(_) => unreachable!(),
                },
                model.to_lp_text()
            )));
        }
    };
    Ok(extract_dispatch(network, &sol.values, &vars, day, hour))
}

pub(crate) fn extract_dispatch(
    network: &Network,
    values: &[f64],
    vars: &PowerVars,
    day: NaiveDate,
    hour: usize,
) -> DispatchResult {
    let p_g_mw: Vec<f64> = vars.p_g.iter().map(|v| network.mw(values[v.index()])).collect();
    let flow_mw: Vec<f64> = vars.flow.iter().map(|v| network.mw(values[v.index()])).collect();
    let angle_rad: Vec<f64> = vars.theta.iter().map(|v| values[v.index()]).collect();
    let shed_mw: Vec<f64> = vars.p_ls.iter().map(|v| network.mw(values[v.index()])).collect();
    let total_shed_mw = shed_mw.iter().sum();
    DispatchResult {
        day,
        hour,
        p_g_mw,
        flow_mw,
        angle_rad,
        shed_mw,
        total_shed_mw,
        feasible: true,
    }
}

/// Runs 24 independent hourly dispatches under one plan.
pub fn simulate_day(
    network: &Network,
    plan: &DeEnergizationPlan,
    demand: &DemandTable,
) -> Result<DayDispatch> {
    let statuses = statuses_from_plan(network, plan)?;
    simulate_day_statuses(network, &statuses, demand, plan.day)
}

pub fn simulate_day_statuses(
    network: &Network,
    statuses: &[bool],
    demand: &DemandTable,
    day: NaiveDate,
) -> Result<DayDispatch> {
    let mut hours = Vec::with_capacity(24);
    for hour in 0..24 {
        let demand_mw = demand.bus_demand_mw(network, day, hour);
        hours.push(dispatch_fixed(network, statuses, &demand_mw, day, hour)?);
    }
    let total_shed_mwh = hours.iter().map(|h| h.total_shed_mw).sum();
    Ok(DayDispatch {
        day,
        hours,
        total_shed_mwh,
    })
}

/// Checks the dispatch invariants: power balance residual within
/// tolerance at every bus, shed within [0, demand], flow limits tied to
/// status, and the DC equality on energized lines.
pub fn verify_dispatch(
    network: &Network,
    statuses: &[bool],
    demand_mw: &[f64],
    result: &DispatchResult,
) -> Result<()> {
    const TOL: f64 = 1e-6;
    let nb = network.n_buses();
    for bi in 0..nb {
        let bus: BusId = network.buses[bi].id;
        let mut residual = -network.pu(demand_mw[bi]) + network.pu(result.shed_mw[bi]);
        for (gi, g) in network.generators.iter().enumerate() {
            if g.bus == bus {
                residual += network.pu(result.p_g_mw[gi]);
            }
        }
        for (li, line) in network.lines.iter().enumerate() {
            if line.from_bus == bus {
                residual -= network.pu(result.flow_mw[li]);
            } else if line.to_bus == bus {
                residual += network.pu(result.flow_mw[li]);
            }
        }
        if residual.abs() > TOL {
            return Err(Error::Solver(format!(
                "power balance residual {residual} at bus {bus}"
            )));
        }
        if result.shed_mw[bi] < -TOL * network.base_mva
            || result.shed_mw[bi] > demand_mw[bi] + TOL * network.base_mva
        {
            return Err(Error::Solver(format!(
                "shed {} outside [0, {}] at bus {bus}",
                result.shed_mw[bi], demand_mw[bi]
            )));
        }
    }
    for (li, line) in network.lines.iter().enumerate() {
        let f = network.pu(result.flow_mw[li]);
        if statuses[li] {
            let cap = network.pu(line.flow_limit_mw);
            if f.abs() > cap + TOL {
                return Err(Error::Solver(format!("flow {} exceeds limit on line {}", f, line.id)));
            }
            let fr = network.bus_idx(line.from_bus).unwrap();
            let to = network.bus_idx(line.to_bus).unwrap();
            let dc = f + line.susceptance_b * (result.angle_rad[fr] - result.angle_rad[to]);
            if dc.abs() > TOL {
                return Err(Error::Solver(format!(
                    "DC equality residual {} on energized line {}",
                    dc, line.id
                )));
            }
        } else if f.abs() > TOL {
            return Err(Error::Solver(format!(
                "de-energized line {} carries {} p.u.",
                line.id, f
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_network;
    use crate::testutil::{date, triangle, two_bus};

    #[test]
    fn two_bus_energized_serves_load() {
        let net = two_bus();
        let r = dispatch_fixed(&net, &[true], &[0.0, 50.0], date("2020-07-01"), 0).unwrap();
        assert!(r.total_shed_mw.abs() < 1e-6);
        assert!((r.flow_mw[0] - 50.0).abs() < 1e-6);
        verify_dispatch(&net, &[true], &[0.0, 50.0], &r).unwrap();
    }

    #[test]
    fn two_bus_de_energized_sheds_island_load() {
        let net = two_bus();
        let r = dispatch_fixed(&net, &[false], &[0.0, 50.0], date("2020-07-01"), 0).unwrap();
        assert!((r.total_shed_mw - 50.0).abs() < 1e-6);
        assert!(r.flow_mw[0].abs() < 1e-9);
        verify_dispatch(&net, &[false], &[0.0, 50.0], &r).unwrap();
    }

    #[test]
    fn triangle_reroute_hits_detour_limit() {
        let net = triangle();
        // Direct line 1-3 off: everything detours over the 30 MW leg.
        let statuses = [true, true, false];
        let r = dispatch_fixed(&net, &statuses, &[0.0, 0.0, 50.0], date("2020-07-01"), 0).unwrap();
        assert!((r.total_shed_mw - 20.0).abs() < 1e-6, "shed {}", r.total_shed_mw);
        verify_dispatch(&net, &statuses, &[0.0, 0.0, 50.0], &r).unwrap();
    }

    #[test]
    fn triangle_all_on_serves_everything() {
        let net = triangle();
        let statuses = [true, true, true];
        let r = dispatch_fixed(&net, &statuses, &[0.0, 0.0, 50.0], date("2020-07-01"), 0).unwrap();
        assert!(r.total_shed_mw.abs() < 1e-6);
        verify_dispatch(&net, &statuses, &[0.0, 0.0, 50.0], &r).unwrap();
    }

    #[test]
    fn parallel_weak_line_can_make_switching_beneficial() {
        // Classic loop-flow effect: a weak parallel circuit caps the
        // corridor; removing it increases deliverable power, so shed is
        // not monotone in the number of energized lines.
        let net = parse_network(
            r#"{
            "base_mva": 100.0,
            "buses": [{"id": 1, "name": "g"}, {"id": 2, "name": "load"}],
            "generators": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 200.0}],
            "lines": [
                {"id": 1, "from_bus": 1, "to_bus": 2, "susceptance_b": -10.0,
                 "flow_limit_mw": 10.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
                 "geometry": [[0.0, 0.0], [1.0, 1.0]]},
                {"id": 2, "from_bus": 1, "to_bus": 2, "susceptance_b": -10.0,
                 "flow_limit_mw": 100.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
                 "geometry": [[0.0, 0.0], [1.0, 0.0]]}
            ]
        }"#,
        )
        .unwrap();
        let demand = [0.0, 150.0];
        let both = dispatch_fixed(&net, &[true, true], &demand, date("2020-07-01"), 0).unwrap();
        let strong_only = dispatch_fixed(&net, &[false, true], &demand, date("2020-07-01"), 0).unwrap();
        assert!((both.total_shed_mw - 130.0).abs() < 1e-6);
        assert!((strong_only.total_shed_mw - 50.0).abs() < 1e-6);
    }

    #[test]
    fn radial_network_switching_is_monotone() {
        let net = triangle();
        let demand = [0.0, 0.0, 50.0];
        let d = date("2020-07-01");
        let base = dispatch_fixed(&net, &[true, true, false], &demand, d, 0).unwrap();
        let fewer = dispatch_fixed(&net, &[true, false, false], &demand, d, 0).unwrap();
        assert!(fewer.total_shed_mw >= base.total_shed_mw - 1e-9);
    }

    #[test]
    fn zero_demand_day_sheds_nothing() {
        let net = two_bus();
        let demand = crate::net::parse_demand(
            &{
                let mut s = String::from("day,hour,bus,mw\n");
                for h in 0..24 {
                    s.push_str(&format!("2020-07-01,{h},2,0.0\n"));
                }
                s
            },
            &net,
        )
        .unwrap();
        let plan = DeEnergizationPlan {
            day: date("2020-07-01"),
            metric: crate::metrics::MetricKind::Ma,
            method: crate::threshold::PlanMethod::Threshold,
            off_lines: Default::default(),
            residual_risk: 0.0,
            risk_budget: None,
        };
        let day = simulate_day(&net, &plan, &demand).unwrap();
        assert_eq!(day.total_shed_mwh, 0.0);
    }

    #[test]
    fn simulate_day_composes_hourly_solves() {
        let net = two_bus();
        let mut csv = String::from("day,hour,bus,mw\n");
        for h in 0..24 {
            csv.push_str(&format!("2020-07-01,{h},2,{}\n", 40.0 + (h % 5) as f64 * 30.0));
        }
        let demand = crate::net::parse_demand(&csv, &net).unwrap();
        let plan = DeEnergizationPlan {
            day: date("2020-07-01"),
            metric: crate::metrics::MetricKind::Ma,
            method: crate::threshold::PlanMethod::Threshold,
            off_lines: [crate::net::LineId(1)].into_iter().collect(),
            residual_risk: 0.0,
            risk_budget: None,
        };
        let day = simulate_day(&net, &plan, &demand).unwrap();
        let mut manual = 0.0;
        for h in 0..24 {
            let dm = demand.bus_demand_mw(&net, date("2020-07-01"), h);
            manual += dispatch_fixed(&net, &[false], &dm, date("2020-07-01"), h)
                .unwrap()
                .total_shed_mw;
        }
        assert!((day.total_shed_mwh - manual).abs() < 1e-9);
    }

    #[test]
    fn islanded_bus_can_shed_all_demand() {
        let net = triangle();
        // Both feeds into bus 3 off: bus 3 is islanded.
        let statuses = [true, false, false];
        let demand = [0.0, 0.0, 75.0];
        let r = dispatch_fixed(&net, &statuses, &demand, date("2020-07-01"), 0).unwrap();
        assert!((r.total_shed_mw - 75.0).abs() < 1e-6);
        verify_dispatch(&net, &statuses, &demand, &r).unwrap();
    }
}
