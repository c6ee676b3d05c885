//! The Optimal Power Shutoff planner.
//!
//! For each (day, metric) the MILP minimizes load shed at the day's
//! worst-case hour plus a small penalty per de-energized line, subject
//! to DC power flow with switchable line statuses and a cap on the
//! total risk left energized. The worst-case hour, the risk budget and
//! the warm start all come from the corresponding threshold plan, and
//! the chosen statuses are then held for the whole day.

use std::collections::BTreeSet;
use std::time::Duration;

use chrono::NaiveDate;

use crate::dispatch::{
    build_power_model, extract_dispatch, simulate_day_statuses, DayDispatch, DispatchResult,
    SwitchMode, BIG_M_LOWER, BIG_M_UPPER,
};
use crate::error::{Error, Result};
use crate::metrics::{LineRiskTable, MetricKind};
use crate::net::{DemandTable, Network};
use crate::solver::{solve_milp, MilpOptions, Model, VarId};
use crate::threshold::{DeEnergizationPlan, PlanMethod};

pub const DEFAULT_EPSILON_SWITCH: f64 = 0.01;
pub const DEFAULT_MIP_GAP: f64 = 1e-4;

/// One day's shutoff MILP instance.
#[derive(Debug, Clone)]
pub struct OpsInstance<'a> {
    pub network: &'a Network,
    pub day: NaiveDate,
    pub metric: MetricKind,
    /// Decision hour the MILP dispatches.
    pub hour: usize,
    /// (dense line index, risk) for every switchable line; the
    /// switchable set is exactly the lines with nonzero risk that day.
    pub switchable: Vec<(usize, f64)>,
    pub risk_budget: f64,
    pub epsilon_switch: f64,
    pub big_m_upper: f64,
    pub big_m_lower: f64,
    /// Energized flag per switchable entry, usually the threshold plan.
    pub warm_start: Option<Vec<bool>>,
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
}

impl<'a> OpsInstance<'a> {
    /// Assembles an instance from the day's risk values. Only lines
    /// with strictly positive risk become switchable.
    pub fn new(
        network: &'a Network,
        table: &LineRiskTable,
        metric: MetricKind,
        day: NaiveDate,
        hour: usize,
        risk_budget: f64,
    ) -> Result<OpsInstance<'a>> {
        if !(risk_budget >= 0.0) {
            return Err(Error::Inconsistency(format!("risk budget {risk_budget} is negative")));
        }
        let mut switchable = Vec::new();
        for (line, risk) in table.day_risks(day, metric)? {
            if risk > 0.0 {
                let li = network
                    .line_idx(line)
                    .ok_or_else(|| Error::Reference(format!("risk table names absent line {line}")))?;
                switchable.push((li, risk));
            }
        }
        switchable.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(OpsInstance {
            network,
            day,
            metric,
            hour,
            switchable,
            risk_budget,
            epsilon_switch: DEFAULT_EPSILON_SWITCH,
            big_m_upper: BIG_M_UPPER,
            big_m_lower: BIG_M_LOWER,
            warm_start: None,
            mip_gap: DEFAULT_MIP_GAP,
            time_limit: None,
        })
    }

    pub fn with_warm_start_from(mut self, plan: &DeEnergizationPlan) -> Self {
        let hints = self
            .switchable
            .iter()
            .map(|&(li, _)| !plan.off_lines.contains(&self.network.lines[li].id))
            .collect();
        self.warm_start = Some(hints);
        self
    }
}

/// Solved shutoff decision with its decision-hour dispatch.
#[derive(Debug, Clone)]
pub struct OpsSolution {
    pub plan: DeEnergizationPlan,
    pub dispatch: DispatchResult,
    /// Model-1 objective: decision-hour shed (p.u.) plus
    /// epsilon_switch per de-energized line.
    pub objective_pu: f64,
    pub gap: f64,
    pub nodes: u64,
    pub timed_out: bool,
}

/// Full-day outcome: the MILP decision plus its 24-hour simulation.
#[derive(Debug, Clone)]
pub struct OpsDayResult {
    pub solution: OpsSolution,
    pub day_dispatch: DayDispatch,
}

/// The hour whose threshold-plan dispatch shed the most load; earliest
/// hour wins ties.
pub fn worst_case_hour(threshold_sim: &DayDispatch) -> usize {
    let mut best_hour = 0;
    let mut best_shed = f64::NEG_INFINITY;
    for h in &threshold_sim.hours {
        if h.total_shed_mw > best_shed {
            best_shed = h.total_shed_mw;
            best_hour = h.hour;
        }
    }
    best_hour
}

/// Risk budget for the OPS: the risk left on the network by the
/// threshold plan of the same day and metric.
pub fn risk_budget(threshold_plan: &DeEnergizationPlan) -> f64 {
    threshold_plan.residual_risk
}

/// Builds the MILP for the instance's decision hour, given that hour's
/// per-unit demand in dense bus order.
pub fn build_ops(instance: &OpsInstance, demand_pu: &[f64]) -> Result<(Model, crate::dispatch::PowerVars)> {
    if instance.hour > 23 {
        return Err(Error::Inconsistency(format!("hour {} outside 0-23", instance.hour)));
    }
    if !(instance.epsilon_switch > 0.0) {
        return Err(Error::Inconsistency(format!(
            "epsilon_switch must be positive, got {}",
            instance.epsilon_switch
        )));
    }
    if demand_pu.len() != instance.network.n_buses() {
        return Err(Error::Inconsistency(format!(
            "{} demand entries for {} buses",
            demand_pu.len(),
            instance.network.n_buses()
        )));
    }
    for &(li, risk) in &instance.switchable {
        if li >= instance.network.n_lines() || !(risk > 0.0) {
            return Err(Error::Inconsistency(format!(
                "switchable entry (line index {li}, risk {risk}) is invalid"
            )));
        }
    }
    Ok(build_power_model(
        instance.network,
        demand_pu,
        &SwitchMode::Binary {
            switchable: &instance.switchable,
            budget: instance.risk_budget,
            epsilon: instance.epsilon_switch,
        },
    ))
}

/// Solves the shutoff MILP for the decision hour.
pub fn solve_ops(instance: &OpsInstance, demand: &DemandTable) -> Result<OpsSolution> {
    let network = instance.network;
    let demand_mw = demand.bus_demand_mw(network, instance.day, instance.hour);
    let demand_pu: Vec<f64> = demand_mw.iter().map(|&d| network.pu(d)).collect();
    let (model, vars) = build_ops(instance, &demand_pu)?;

    let warm_start = instance.warm_start.as_ref().map(|hints| {
        instance
            .switchable
            .iter()
            .zip(hints)
            .map(|(&(li, _), &on)| {
                let zv = vars.z[li].expect("switchable line has a binary");
                (zv, if on { 1.0 } else { 0.0 })
            })
            .collect::<Vec<(VarId, f64)>>()
    });
    let opts = MilpOptions {
        mip_gap: instance.mip_gap,
        time_limit: instance.time_limit,
        warm_start,
    };
    let milp = solve_milp(&model, &opts)?;

    let mut off_lines = BTreeSet::new();
    let mut residual_risk = 0.0;
    for &(li, risk) in &instance.switchable {
        let zv = vars.z[li].expect("switchable line has a binary");
        if milp.values[zv.index()] > 0.5 {
            residual_risk += risk;
        } else {
            off_lines.insert(network.lines[li].id);
        }
    }
    let n_off = off_lines.len();
    let dispatch = extract_dispatch(network, &milp.values, &vars, instance.day, instance.hour);
    let plan = DeEnergizationPlan {
        day: instance.day,
        metric: instance.metric,
        method: PlanMethod::Ops,
        off_lines,
        residual_risk,
        risk_budget: Some(instance.risk_budget),
    };
    // The model minimizes shed - eps*sum(z); restore eps*sum(1-z).
    let objective_pu = milp.objective + instance.epsilon_switch * instance.switchable.len() as f64;
    debug_assert!(
        (objective_pu
            - (network.pu(dispatch.total_shed_mw) + instance.epsilon_switch * n_off as f64))
            .abs()
            < 1e-6
    );
    Ok(OpsSolution {
        plan,
        dispatch,
        objective_pu,
        gap: milp.gap,
        nodes: milp.nodes,
        timed_out: milp.timed_out,
    })
}

/// Plans one day end to end: decision hour and budget from the
/// threshold plan, MILP at that hour, then a 24-hour simulation with
/// the chosen statuses.
pub fn plan_ops_day(
    network: &Network,
    table: &LineRiskTable,
    metric: MetricKind,
    day: NaiveDate,
    demand: &DemandTable,
    threshold_plan: &DeEnergizationPlan,
    config: &OpsConfig,
) -> Result<OpsDayResult> {
    let statuses = crate::dispatch::statuses_from_plan(network, threshold_plan)?;
    let threshold_sim = simulate_day_statuses(network, &statuses, demand, day)?;
    plan_ops_day_with_sim(network, table, metric, day, demand, threshold_plan, &threshold_sim, config)
}

/// Like [`plan_ops_day`] but reuses an existing threshold simulation.
#[allow(clippy::too_many_arguments)]
pub fn plan_ops_day_with_sim(
    network: &Network,
    table: &LineRiskTable,
    metric: MetricKind,
    day: NaiveDate,
    demand: &DemandTable,
    threshold_plan: &DeEnergizationPlan,
    threshold_sim: &DayDispatch,
    config: &OpsConfig,
) -> Result<OpsDayResult> {
    let hour = worst_case_hour(threshold_sim);
    let mut instance = OpsInstance::new(network, table, metric, day, hour, risk_budget(threshold_plan))?
        .with_warm_start_from(threshold_plan);
    instance.epsilon_switch = config.epsilon_switch;
    instance.mip_gap = config.mip_gap;
    instance.time_limit = config.time_limit;
    let solution = solve_ops(&instance, demand)?;
    let statuses = crate::dispatch::statuses_from_plan(network, &solution.plan)?;
    let day_dispatch = simulate_day_statuses(network, &statuses, demand, day)?;
    Ok(OpsDayResult {
        solution,
        day_dispatch,
    })
}

/// Solver knobs shared by every per-day job.
#[derive(Debug, Clone)]
pub struct OpsConfig {
    pub epsilon_switch: f64,
    pub mip_gap: f64,
    pub time_limit: Option<Duration>,
}

impl Default for OpsConfig {
    fn default() -> Self {
        OpsConfig {
            epsilon_switch: DEFAULT_EPSILON_SWITCH,
            mip_gap: DEFAULT_MIP_GAP,
            time_limit: None,
        }
    }
}

/// Verifies an OPS solution against the Model-1 constraints: budget
/// satisfied, flows and statuses consistent, big-M windows respected.
pub fn verify_ops_solution(instance: &OpsInstance, demand: &DemandTable, sol: &OpsSolution) -> Result<()> {
    const TOL: f64 = 1e-6;
    let network = instance.network;
    let off = &sol.plan.off_lines;
    let mut energized_risk = 0.0;
    for &(li, risk) in &instance.switchable {
        if !off.contains(&network.lines[li].id) {
            energized_risk += risk;
        }
    }
    if energized_risk > instance.risk_budget + 1e-9 * instance.risk_budget.abs().max(1.0) {
        return Err(Error::Solver(format!(
            "risk budget violated: {} > {}",
            energized_risk, instance.risk_budget
        )));
    }
    let statuses = crate::dispatch::statuses_from_plan(network, &sol.plan)?;
    let demand_mw = demand.bus_demand_mw(network, instance.day, instance.hour);
    crate::dispatch::verify_dispatch(network, &statuses, &demand_mw, &sol.dispatch)?;
    // Big-M windows on de-energized lines.
    for id in off {
        let li = network.line_idx(*id).unwrap();
        let line = &network.lines[li];
        let fr = network.bus_idx(line.from_bus).unwrap();
        let to = network.bus_idx(line.to_bus).unwrap();
        let dtheta = sol.dispatch.angle_rad[fr] - sol.dispatch.angle_rad[to];
        if dtheta < instance.big_m_lower - TOL || dtheta > instance.big_m_upper + TOL {
            return Err(Error::Solver(format!(
                "angle difference {dtheta} outside the big-M window on de-energized line {id}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::dispatch_fixed;
    use crate::metrics::ALL_METRICS;
    use crate::net::LineId;
    use crate::testutil::{constant_demand, date, triangle, two_bus};

    fn day_dispatch(sheds: &[f64]) -> DayDispatch {
        let hours = sheds
            .iter()
            .enumerate()
            .map(|(h, &s)| DispatchResult {
                day: date("2020-07-01"),
                hour: h,
                p_g_mw: vec![],
                flow_mw: vec![],
                angle_rad: vec![],
                shed_mw: vec![],
                total_shed_mw: s,
                feasible: true,
            })
            .collect();
        DayDispatch {
            day: date("2020-07-01"),
            hours,
            total_shed_mwh: sheds.iter().sum(),
        }
    }

    #[test]
    fn worst_hour_unique_maximum() {
        let mut sheds = vec![0.0; 24];
        sheds[18] = 12.0;
        assert_eq!(worst_case_hour(&day_dispatch(&sheds)), 18);
    }

    #[test]
    fn worst_hour_all_zero_is_hour_zero() {
        assert_eq!(worst_case_hour(&day_dispatch(&[0.0; 24])), 0);
    }

    #[test]
    fn worst_hour_tie_takes_earliest() {
        let mut sheds = vec![0.0; 24];
        sheds[10] = 7.0;
        sheds[20] = 7.0;
        assert_eq!(worst_case_hour(&day_dispatch(&sheds)), 10);
    }

    #[test]
    fn budget_is_the_residual_risk() {
        let plan = DeEnergizationPlan {
            day: date("2020-07-01"),
            metric: MetricKind::Ma,
            method: PlanMethod::Threshold,
            off_lines: Default::default(),
            residual_risk: 5.0,
            risk_budget: None,
        };
        assert_eq!(risk_budget(&plan), 5.0);
    }

    /// Risk table with one MA row per line for a single day.
    fn table_for(day: &str, risks: &[(u32, f64)]) -> LineRiskTable {
        let mut csv = String::from("line,day,metric,risk\n");
        for (line, risk) in risks {
            for kind in ALL_METRICS {
                let v = if kind == MetricKind::Ma { *risk } else { 0.0 };
                csv.push_str(&format!("{line},{day},{kind},{v}\n"));
            }
        }
        LineRiskTable::from_csv(&csv).unwrap()
    }

    #[test]
    fn no_switchable_lines_reduces_to_dispatch() {
        let net = triangle();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 0.0), (2, 0.0), (3, 0.0)]);
        let demand = constant_demand(&net, &[(3, 50.0)], day);
        let instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 0.0).unwrap();
        assert!(instance.switchable.is_empty());
        let sol = solve_ops(&instance, &demand).unwrap();
        let fixed = dispatch_fixed(&net, &[true; 3], &[0.0, 0.0, 50.0], date(day), 0).unwrap();
        assert!((sol.dispatch.total_shed_mw - fixed.total_shed_mw).abs() < 1e-6);
        assert!(sol.plan.off_lines.is_empty());
    }

    #[test]
    fn loaded_line_stays_on_when_budget_allows() {
        let net = two_bus();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 10.0)]);
        let demand = constant_demand(&net, &[(2, 50.0)], day);
        let instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 20.0).unwrap();
        let sol = solve_ops(&instance, &demand).unwrap();
        assert!(sol.plan.off_lines.is_empty());
        assert!(sol.dispatch.total_shed_mw.abs() < 1e-6);
    }

    #[test]
    fn zero_budget_turns_every_risky_line_off() {
        let net = triangle();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 5.0), (2, 3.0), (3, 8.0)]);
        let demand = constant_demand(&net, &[(3, 50.0)], day);
        let instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 0.0).unwrap();
        let sol = solve_ops(&instance, &demand).unwrap();
        assert_eq!(sol.plan.off_lines.len(), 3);
        assert!((sol.dispatch.total_shed_mw - 50.0).abs() < 1e-6);
        verify_ops_solution(&instance, &demand, &sol).unwrap();
    }

    #[test]
    fn unused_risky_line_is_dropped_to_meet_budget() {
        // The detour leg (line 2) carries nothing when the direct line
        // is up; with a tight budget the solver sheds risk by dropping
        // it rather than cutting the loaded path.
        let net = triangle();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 4.0), (2, 6.0), (3, 4.0)]);
        let demand = constant_demand(&net, &[(3, 50.0)], day);
        let instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 8.0).unwrap();
        let sol = solve_ops(&instance, &demand).unwrap();
        assert!(sol.plan.off_lines.contains(&LineId(2)));
        assert!(sol.dispatch.total_shed_mw.abs() < 1e-6);
        verify_ops_solution(&instance, &demand, &sol).unwrap();
    }

    #[test]
    fn warm_start_equal_to_optimum_is_accepted() {
        let net = triangle();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 4.0), (2, 6.0), (3, 4.0)]);
        let demand = constant_demand(&net, &[(3, 50.0)], day);
        let mut instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 8.0).unwrap();
        let cold = solve_ops(&instance, &demand).unwrap();
        instance.warm_start = Some(
            instance
                .switchable
                .iter()
                .map(|&(li, _)| !cold.plan.off_lines.contains(&net.lines[li].id))
                .collect(),
        );
        let warm = solve_ops(&instance, &demand).unwrap();
        assert!((warm.objective_pu - cold.objective_pu).abs() < 1e-9);
        assert_eq!(warm.plan.off_lines, cold.plan.off_lines);
    }

    #[test]
    fn epsilon_keeps_harmless_lines_energized() {
        // Budget is slack: nothing needs to switch, and epsilon should
        // keep it that way even though switching costs no shed.
        let net = triangle();
        let day = "2020-07-01";
        let table = table_for(day, &[(1, 1.0), (2, 1.0), (3, 1.0)]);
        let demand = constant_demand(&net, &[(3, 50.0)], day);
        let instance = OpsInstance::new(&net, &table, MetricKind::Ma, date(day), 0, 3.0).unwrap();
        let sol = solve_ops(&instance, &demand).unwrap();
        assert!(sol.plan.off_lines.is_empty());
    }
}
