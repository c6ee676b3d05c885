//! Percentile-based de-energization planning.
//!
//! A single percentile threshold is computed per metric over every
//! (line, day) risk value of the study period; on each day, lines whose
//! risk is strictly above the threshold are de-energized. Ties stay
//! energized, erring toward service.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::metrics::{LineRiskTable, MetricKind};
use crate::net::LineId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlanMethod {
    Threshold,
    Ops,
}

impl PlanMethod {
    pub fn name(self) -> &'static str {
        match self {
            PlanMethod::Threshold => "THRESHOLD",
            PlanMethod::Ops => "OPS",
        }
    }
}

impl fmt::Display for PlanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "THRESHOLD" => Ok(PlanMethod::Threshold),
            "OPS" => Ok(PlanMethod::Ops),
            other => Err(Error::Config(format!("unknown plan method {other:?}"))),
        }
    }
}

/// Nearest-rank percentile of a metric's risk population.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileThreshold {
    pub metric: MetricKind,
    pub q: f64,
    pub value: f64,
}

/// One day's de-energization decision for a (metric, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DeEnergizationPlan {
    pub day: NaiveDate,
    pub metric: MetricKind,
    pub method: PlanMethod,
    pub off_lines: BTreeSet<LineId>,
    /// Total risk left energized across switchable lines.
    pub residual_risk: f64,
    /// Risk budget the plan was solved under (OPS only).
    pub risk_budget: Option<f64>,
}

/// Computes the q-th percentile by nearest rank: the ⌈qN/100⌉-th order
/// statistic, with no interpolation.
pub fn compute_percentile(table: &LineRiskTable, metric: MetricKind, q: f64) -> Result<PercentileThreshold> {
    if !(0.0 < q && q < 100.0) {
        return Err(Error::Config(format!("percentile q must be in (0, 100), got {q}")));
    }
    let mut values = table.metric_values(metric);
    if values.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no risk values for metric {metric}"
        )));
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("risk values are finite"));
    let n = values.len();
    let rank = ((q / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(PercentileThreshold {
        metric,
        q,
        value: values[rank - 1],
    })
}

/// De-energizes every line whose risk on `day` is strictly above the
/// percentile value. Residual risk sums the risk of lines left
/// energized.
pub fn plan_threshold(
    table: &LineRiskTable,
    metric: MetricKind,
    day: NaiveDate,
    pct: &PercentileThreshold,
) -> Result<DeEnergizationPlan> {
    if pct.metric != metric {
        return Err(Error::Inconsistency(format!(
            "percentile was computed for {} but the plan requests {}",
            pct.metric, metric
        )));
    }
    let risks = table.day_risks(day, metric)?;
    let mut off_lines = BTreeSet::new();
    let mut residual_risk = 0.0;
    for (line, risk) in risks {
        if risk > pct.value {
            off_lines.insert(line);
        } else {
            residual_risk += risk;
        }
    }
    Ok(DeEnergizationPlan {
        day,
        metric,
        method: PlanMethod::Threshold,
        off_lines,
        residual_risk,
        risk_budget: None,
    })
}
