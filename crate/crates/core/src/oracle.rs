//! Brute-force reference implementations used for verification.
//!
//! These deliberately avoid the production code paths: metric formulas
//! are re-implemented directly, shutoff planning enumerates every
//! status vector, and raster traversal is checked by dense point
//! sampling. They live in the library (not just the test tree) so the
//! CLI can expose `verify` subcommands.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dispatch::dispatch_fixed;
use crate::error::{Error, Result};
use crate::metrics::HighRiskThreshold;
use crate::net::{DemandTable, Line, Network};
use crate::ops::OpsInstance;
use crate::raster::{PixelRef, RiskRaster};

/// Hard cap on the switchable-set size for exhaustive enumeration.
pub const ENUMERATION_CAP: usize = 20;

/// Best status vector over switchable lines by exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    /// Energized flag per switchable entry (instance order).
    pub statuses: Vec<bool>,
    /// Decision-hour shed (p.u.) plus epsilon per de-energized line.
    pub objective_pu: f64,
    pub evaluations: u64,
}

/// Iterates all 2^k status vectors over the instance's switchable set,
/// keeps those within the risk budget, and evaluates each by a fixed
/// dispatch plus the switching penalty. Lexicographic tie-break with
/// energized-first ordering makes the result deterministic.
pub fn enumerate_ops(
    network: &Network,
    instance: &OpsInstance,
    demand: &DemandTable,
) -> Result<EnumerationResult> {
    let k = instance.switchable.len();
    if k > ENUMERATION_CAP {
        return Err(Error::Inconsistency(format!(
            "enumeration refused: {k} switchable lines exceed the cap of {ENUMERATION_CAP}"
        )));
    }
    let demand_mw = demand.bus_demand_mw(network, instance.day, instance.hour);
    let budget_tol = 1e-9 * instance.risk_budget.abs().max(1.0);

    let total: u64 = 1 << k;
    let results: Vec<(u64, f64)> = (0..total)
        .into_par_iter()
        .map(|mask| -> Result<Option<(u64, f64)>> {
            // Bit i set = switchable line i de-energized.
            let mut energized_risk = 0.0;
            let mut n_off = 0u32;
            for (i, &(_, risk)) in instance.switchable.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    n_off += 1;
                } else {
                    energized_risk += risk;
                }
            }
            if energized_risk > instance.risk_budget + budget_tol {
                return Ok(None);
            }
            let mut statuses = vec![true; network.n_lines()];
            for (i, &(li, _)) in instance.switchable.iter().enumerate() {
                statuses[li] = mask >> i & 1 == 0;
            }
            let r = dispatch_fixed(network, &statuses, &demand_mw, instance.day, instance.hour)?;
            let objective =
                network.pu(r.total_shed_mw) + instance.epsilon_switch * f64::from(n_off);
            Ok(Some((mask, objective)))
        })
        .collect::<Result<Vec<Option<(u64, f64)>>>>()?
        .into_iter()
        .flatten()
        .collect();

    if results.is_empty() {
        return Err(Error::InsufficientData(
            "no status vector satisfies the risk budget".into(),
        ));
    }
    // Deterministic reduction: best objective, then lowest mask, which
    // is lexicographic with energized lines first.
    let (best_mask, best_obj) = results
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("nonempty feasible set");
    let statuses = (0..k).map(|i| best_mask >> i & 1 == 0).collect();
    Ok(EnumerationResult {
        statuses,
        objective_pu: best_obj,
        evaluations: total,
    })
}

/// The six metric formulas re-implemented directly: max, sum/|P| and
/// sum over all values, then the same over the values at or above the
/// threshold. Returned in MA, ME, CU, HRMA, HRME, HRCU order.
pub fn naive_metrics(values: &[f64], pixel_count: usize, thr: &HighRiskThreshold) -> Result<[f64; 6]> {
    if pixel_count == 0 && !values.is_empty() {
        return Err(Error::Inconsistency(format!(
            "pixel_count is 0 but {} values were supplied",
            values.len()
        )));
    }
    if values.len() > pixel_count {
        return Err(Error::Inconsistency(format!(
            "{} values exceed pixel_count {}",
            values.len(),
            pixel_count
        )));
    }
    let mut ma = 0.0_f64;
    let mut cu = 0.0_f64;
    let mut hrma = 0.0_f64;
    let mut hrcu = 0.0_f64;
    for &v in values {
        if v > ma {
            ma = v;
        }
        cu += v;
        if v >= thr.threshold {
            if v > hrma {
                hrma = v;
            }
            hrcu += v;
        }
    }
    let me = if pixel_count == 0 { 0.0 } else { cu / pixel_count as f64 };
    let hrme = if pixel_count == 0 { 0.0 } else { hrcu / pixel_count as f64 };
    Ok([ma, me, cu, hrma, hrme, hrcu])
}

/// Cells found by dense point sampling along each polyline segment.
/// Boundary samples contribute every cell whose closed square contains
/// them, so the result is always a subset of the supercover.
pub fn sample_trace(line: &Line, raster: &RiskRaster, samples_per_segment: usize) -> BTreeSet<PixelRef> {
    let geom = raster.geometry();
    let mut cells = BTreeSet::new();
    let max_col = geom.n_cols as i64 - 1;
    let max_row = geom.n_rows as i64 - 1;
    for seg in line.geometry.windows(2) {
        for s in 0..=samples_per_segment {
            let t = s as f64 / samples_per_segment as f64;
            let x = seg[0].x + t * (seg[1].x - seg[0].x);
            let y = seg[0].y + t * (seg[1].y - seg[0].y);
            let u = (x - geom.x_origin) / geom.cell_size;
            let v = (y - geom.y_origin) / geom.cell_size;
            let cols = if u == u.floor() {
                vec![u as i64 - 1, u as i64]
            } else {
                vec![u.floor() as i64]
            };
            let rows = if v == v.floor() {
                vec![v as i64 - 1, v as i64]
            } else {
                vec![v.floor() as i64]
            };
            for &c in &cols {
                for &r in &rows {
                    let c = c.clamp(0, max_col);
                    let r = r.clamp(0, max_row);
                    cells.insert(PixelRef {
                        col: c as u32,
                        row: (max_row - r) as u32,
                    });
                }
            }
        }
    }
    cells
}

/// Shortest distance from the center of `pixel` to the polyline, in
/// CRS units.
pub fn pixel_center_distance(line: &Line, raster: &RiskRaster, pixel: PixelRef) -> f64 {
    let geom = raster.geometry();
    let cx = geom.x_origin + (pixel.col as f64 + 0.5) * geom.cell_size;
    let row_from_bottom = geom.n_rows as f64 - 1.0 - pixel.row as f64;
    let cy = geom.y_origin + (row_from_bottom + 0.5) * geom.cell_size;
    let mut best = f64::INFINITY;
    for seg in line.geometry.windows(2) {
        let (ax, ay) = (seg[0].x, seg[0].y);
        let (bx, by) = (seg[1].x, seg[1].y);
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((cx - ax) * dx + (cy - ay) * dy) / len2).clamp(0.0, 1.0)
        };
        let (px, py) = (ax + t * dx, ay + t * dy);
        best = best.min(((cx - px).powi(2) + (cy - py).powi(2)).sqrt());
    }
    best
}
