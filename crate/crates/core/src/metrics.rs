//! The six per-line wildfire risk metrics and their parameters.
//!
//! Baseline metrics aggregate all pixel values a line intersects:
//! maximum (MA), mean (ME) and cumulative (CU). The high-risk variants
//! (HRMA, HRME, HRCU) first restrict to pixels at or above a threshold
//! of one standard deviation above the mean of a training year's pixel
//! values. HRME keeps the full burnable pixel count as its denominator.
//! Any empty relevant set yields zero risk under every metric.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{LineId, Network};
use crate::raster::{pixel_risks, trace_line, LinePixelSet, RiskRaster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Ma,
    Me,
    Cu,
    Hrma,
    Hrme,
    Hrcu,
}

/// Canonical metric order used in tables and reports.
pub const ALL_METRICS: [MetricKind; 6] = [
    MetricKind::Ma,
    MetricKind::Me,
    MetricKind::Cu,
    MetricKind::Hrma,
    MetricKind::Hrme,
    MetricKind::Hrcu,
];

impl MetricKind {
    pub fn index(self) -> usize {
        match self {
            MetricKind::Ma => 0,
            MetricKind::Me => 1,
            MetricKind::Cu => 2,
            MetricKind::Hrma => 3,
            MetricKind::Hrme => 4,
            MetricKind::Hrcu => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ma => "MA",
            MetricKind::Me => "ME",
            MetricKind::Cu => "CU",
            MetricKind::Hrma => "HRMA",
            MetricKind::Hrme => "HRME",
            MetricKind::Hrcu => "HRCU",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MA" => Ok(MetricKind::Ma),
            "ME" => Ok(MetricKind::Me),
            "CU" => Ok(MetricKind::Cu),
            "HRMA" => Ok(MetricKind::Hrma),
            "HRME" => Ok(MetricKind::Hrme),
            "HRCU" => Ok(MetricKind::Hrcu),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// High-risk pixel cutoff: one standard deviation above the mean of the
/// training-year pixel risk population.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HighRiskThreshold {
    pub mean_r: f64,
    pub std_r: f64,
    pub threshold: f64,
    pub training_year: String,
}

impl HighRiskThreshold {
    pub fn new(mean_r: f64, std_r: f64, training_year: impl Into<String>) -> Self {
        HighRiskThreshold {
            mean_r,
            std_r,
            threshold: mean_r + std_r,
            training_year: training_year.into(),
        }
    }
}

/// Population mean and standard deviation of every (line, day, pixel)
/// risk sample in a training year. Pixels crossed by several lines
/// contribute once per line.
pub fn compute_high_risk_threshold(
    samples: &[f64],
    training_year: impl Into<String>,
) -> Result<HighRiskThreshold> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "high-risk threshold needs at least one pixel risk sample".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(HighRiskThreshold::new(mean, var.sqrt(), training_year))
}

/// Pixel values at or above the threshold (inclusive).
pub fn high_risk_pixels(values: &[f64], thr: &HighRiskThreshold) -> Vec<f64> {
    values.iter().copied().filter(|&v| v >= thr.threshold).collect()
}

/// Aggregates pixel risks into one metric value. `pixel_count` is the
/// burnable pixel count |P| used by the mean denominators; an empty
/// relevant set gives zero under every metric.
pub fn aggregate(
    values: &[f64],
    pixel_count: usize,
    kind: MetricKind,
    thr: &HighRiskThreshold,
) -> Result<f64> {
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
    let max = |vs: &[f64]| vs.iter().copied().fold(0.0_f64, f64::max);
    let sum = |vs: &[f64]| vs.iter().sum::<f64>();
    let mean = |vs: &[f64]| {
        if pixel_count == 0 {
            0.0
        } else {
            sum(vs) / pixel_count as f64
        }
    };
    Ok(match kind {
        MetricKind::Ma => max(values),
        MetricKind::Me => mean(values),
        MetricKind::Cu => sum(values),
        MetricKind::Hrma => max(&high_risk_pixels(values, thr)),
        MetricKind::Hrme => mean(&high_risk_pixels(values, thr)),
        MetricKind::Hrcu => sum(&high_risk_pixels(values, thr)),
    })
}

/// All six metrics for one pixel vector, in [`ALL_METRICS`] order.
pub fn aggregate_all(values: &[f64], pixel_count: usize, thr: &HighRiskThreshold) -> Result<[f64; 6]> {
    let mut out = [0.0; 6];
    for kind in ALL_METRICS {
        out[kind.index()] = aggregate(values, pixel_count, kind, thr)?;
    }
    Ok(out)
}

/// Per-line, per-day, per-metric risk values R over a study period.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRiskTable {
    line_ids: Vec<LineId>,
    days: Vec<NaiveDate>,
    line_pos: HashMap<LineId, usize>,
    day_pos: HashMap<NaiveDate, usize>,
    /// Day-major, then line, then metric.
    values: Vec<f64>,
}

impl LineRiskTable {
    fn new(line_ids: Vec<LineId>, days: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if values.len() != line_ids.len() * days.len() * 6 {
            return Err(Error::Inconsistency(format!(
                "risk table has {} values for {} lines x {} days x 6 metrics",
                values.len(),
                line_ids.len(),
                days.len()
            )));
        }
        for &v in &values {
            if !(v >= 0.0) {
                return Err(Error::Validation(format!("risk value {v} is negative or NaN")));
            }
        }
        let line_pos = line_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let day_pos = days.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(LineRiskTable {
            line_ids,
            days,
            line_pos,
            day_pos,
            values,
        })
    }

    pub fn line_ids(&self) -> &[LineId] {
        &self.line_ids
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, line: LineId, day: NaiveDate, metric: MetricKind) -> Option<f64> {
        let li = *self.line_pos.get(&line)?;
        let di = *self.day_pos.get(&day)?;
        Some(self.values[(di * self.line_ids.len() + li) * 6 + metric.index()])
    }

    /// All values of one metric, day-major then line order.
    pub fn metric_values(&self, metric: MetricKind) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.days.len() * self.line_ids.len());
        for di in 0..self.days.len() {
            for li in 0..self.line_ids.len() {
                out.push(self.values[(di * self.line_ids.len() + li) * 6 + metric.index()]);
            }
        }
        out
    }

    /// Per-line risks for one day and metric, in table line order.
    pub fn day_risks(&self, day: NaiveDate, metric: MetricKind) -> Result<Vec<(LineId, f64)>> {
        let di = *self
            .day_pos
            .get(&day)
            .ok_or_else(|| Error::Data(format!("no risk entries for day {day}")))?;
        Ok(self
            .line_ids
            .iter()
            .enumerate()
            .map(|(li, &id)| (id, self.values[(di * self.line_ids.len() + li) * 6 + metric.index()]))
            .collect())
    }

    /// Writes the audit CSV `line,day,metric,risk` with full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("line,day,metric,risk\n");
        for (di, day) in self.days.iter().enumerate() {
            for (li, line) in self.line_ids.iter().enumerate() {
                for kind in ALL_METRICS {
                    let v = self.values[(di * self.line_ids.len() + li) * 6 + kind.index()];
                    out.push_str(&format!("{},{},{},{}\n", line, day, kind, v));
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Parses a table CSV written by [`to_csv`], requiring complete
    /// line x day x metric coverage.
    pub fn from_csv(text: &str) -> Result<LineRiskTable> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut entries: HashMap<(LineId, NaiveDate, usize), f64> = HashMap::new();
        let mut line_ids: Vec<LineId> = Vec::new();
        let mut days: Vec<NaiveDate> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse("risk table csv", e.to_string()))?;
            if rec.len() != 4 {
                return Err(Error::parse("risk table csv", format!("bad record {:?}", rec)));
            }
            let line = LineId(
                rec[0]
                    .parse()
                    .map_err(|_| Error::parse("risk table csv", format!("bad line id {:?}", &rec[0])))?,
            );
            let day: NaiveDate = rec[1]
                .parse()
                .map_err(|_| Error::parse("risk table csv", format!("bad day {:?}", &rec[1])))?;
            let metric: MetricKind = rec[2].parse()?;
            let risk: f64 = rec[3]
                .parse()
                .map_err(|_| Error::parse("risk table csv", format!("bad risk {:?}", &rec[3])))?;
            if !line_ids.contains(&line) {
                line_ids.push(line);
            }
            if !days.contains(&day) {
                days.push(day);
            }
            if entries.insert((line, day, metric.index()), risk).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate risk entry for line {line} day {day} metric {metric}"
                )));
            }
        }
        days.sort_unstable();
        let mut values = Vec::with_capacity(line_ids.len() * days.len() * 6);
        for &day in &days {
            for &line in &line_ids {
                for kind in ALL_METRICS {
                    match entries.get(&(line, day, kind.index())) {
                        Some(&v) => values.push(v),
                        None => {
                            return Err(Error::Data(format!(
                                "risk table is missing line {line} day {day} metric {kind}"
                            )))
                        }
                    }
                }
            }
        }
        LineRiskTable::new(line_ids, days, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LineRiskTable> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        LineRiskTable::from_csv(&text)
    }
}

/// Validates that all rasters share one grid geometry and returns them
/// ordered by day.
fn ordered_rasters<'a>(rasters: &'a [RiskRaster]) -> Result<Vec<&'a RiskRaster>> {
    if rasters.is_empty() {
        return Err(Error::InsufficientData("no rasters supplied".into()));
    }
    let geom = rasters[0].geometry();
    for r in rasters {
        if r.geometry() != geom {
            return Err(Error::Geometry(format!(
                "raster for {} does not match the study grid geometry",
                r.day
            )));
        }
    }
    let mut ordered: Vec<&RiskRaster> = rasters.iter().collect();
    ordered.sort_by_key(|r| r.day);
    for w in ordered.windows(2) {
        if w[0].day == w[1].day {
            return Err(Error::Validation(format!("duplicate raster for day {}", w[0].day)));
        }
    }
    Ok(ordered)
}

/// Traces every line once against the shared study grid.
pub fn trace_all_lines(network: &Network, raster: &RiskRaster) -> Result<Vec<LinePixelSet>> {
    network
        .lines
        .iter()
        .map(|l| {
            trace_line(l, raster).map_err(|e| match e {
                Error::Bounds(msg) => Error::Bounds(format!("line {}: {msg}", l.id)),
                other => other,
            })
        })
        .collect()
}

/// Flattens every (line, day, burnable pixel) risk sample, in
/// deterministic (day, line, pixel) order. This is the population the
/// high-risk threshold statistics are computed over.
pub fn pixel_population(network: &Network, rasters: &[RiskRaster]) -> Result<Vec<f64>> {
    let ordered = ordered_rasters(rasters)?;
    let traces = trace_all_lines(network, ordered[0])?;
    let mut samples = Vec::new();
    for raster in ordered {
        for set in &traces {
            samples.extend(pixel_risks(set, raster)?.values);
        }
    }
    Ok(samples)
}

/// Builds the full risk table: every line, every day, all six metrics.
pub fn build_table(
    network: &Network,
    rasters: &[RiskRaster],
    thr: &HighRiskThreshold,
) -> Result<LineRiskTable> {
    let ordered = ordered_rasters(rasters)?;
    let traces = trace_all_lines(network, ordered[0])?;
    let days: Vec<NaiveDate> = ordered.iter().map(|r| r.day).collect();
    let line_ids: Vec<LineId> = network.lines.iter().map(|l| l.id).collect();

    let blocks: Vec<Result<Vec<f64>>> = ordered
        .par_iter()
        .map(|raster| {
            let mut block = Vec::with_capacity(traces.len() * 6);
            for set in &traces {
                let pr = pixel_risks(set, raster).map_err(|e| {
                    Error::Data(format!("line {} day {}: {e}", set.line, raster.day))
                })?;
                block.extend(aggregate_all(&pr.values, pr.pixel_count, thr)?);
            }
            Ok(block)
        })
        .collect();

    let mut values = Vec::with_capacity(days.len() * line_ids.len() * 6);
    for block in blocks {
        values.extend(block?);
    }
    LineRiskTable::new(line_ids, days, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thr(threshold: f64) -> HighRiskThreshold {
        HighRiskThreshold {
            mean_r: threshold,
            std_r: 0.0,
            threshold,
            training_year: "test".into(),
        }
    }

    #[test]
    fn threshold_hand_arithmetic() {
        let t = compute_high_risk_threshold(&[0.0, 0.0, 10.0, 10.0], "2019").unwrap();
        assert_eq!(t.mean_r, 5.0);
        assert_eq!(t.std_r, 5.0);
        assert_eq!(t.threshold, 10.0);
    }

    #[test]
    fn threshold_single_value() {
        let t = compute_high_risk_threshold(&[42.0], "2019").unwrap();
        assert_eq!(t.mean_r, 42.0);
        assert_eq!(t.std_r, 0.0);
        assert_eq!(t.threshold, 42.0);
    }

    #[test]
    fn threshold_empty_population_is_an_error() {
        assert!(matches!(
            compute_high_risk_threshold(&[], "2019").unwrap_err(),
            Error::InsufficientData(_)
        ));
    }

    // Independent streaming (Welford) statistics used as an oracle.
    fn welford(samples: &[f64]) -> (f64, f64) {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        (mean, (m2 / samples.len() as f64).sqrt())
    }

    #[test]
    fn threshold_matches_streaming_oracle() {
        let mut samples = Vec::new();
        let mut x = 0.37_f64;
        for _ in 0..10_000 {
            x = (x * 997.13).fract();
            samples.push(x * 150.0);
        }
        let t = compute_high_risk_threshold(&samples, "2019").unwrap();
        let (mean, std) = welford(&samples);
        assert!((t.mean_r - mean).abs() <= 1e-9 * mean.abs());
        assert!((t.std_r - std).abs() <= 1e-9 * std.abs());
    }

    #[test]
    fn high_risk_filter_is_inclusive() {
        let t = thr(80.0);
        assert_eq!(high_risk_pixels(&[100.0, 30.0, 20.0], &t), vec![100.0]);
        assert!(high_risk_pixels(&[10.0, 20.0], &t).is_empty());
        assert_eq!(high_risk_pixels(&[80.0], &t), vec![80.0]);
    }

    fn all_six(values: &[f64], count: usize, t: &HighRiskThreshold) -> [f64; 6] {
        aggregate_all(values, count, t).unwrap()
    }

    #[test]
    fn table1_line1() {
        let got = all_six(&[100.0, 30.0, 20.0], 3, &thr(80.0));
        assert_eq!(got[MetricKind::Ma.index()], 100.0);
        assert_eq!(got[MetricKind::Me.index()], 50.0);
        assert_eq!(got[MetricKind::Cu.index()], 150.0);
        assert_eq!(got[MetricKind::Hrma.index()], 100.0);
        assert!((got[MetricKind::Hrme.index()] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(got[MetricKind::Hrcu.index()], 100.0);
    }

    #[test]
    fn table1_line2() {
        let got = all_six(&[100.0, 95.0, 90.0, 25.0, 20.0], 5, &thr(80.0));
        assert_eq!(got[MetricKind::Ma.index()], 100.0);
        // The published table rounds this mean to 67; the exact value is 66.
        assert_eq!(got[MetricKind::Me.index()], 66.0);
        assert_eq!(got[MetricKind::Cu.index()], 330.0);
        assert_eq!(got[MetricKind::Hrma.index()], 100.0);
        assert_eq!(got[MetricKind::Hrme.index()], 57.0);
        assert_eq!(got[MetricKind::Hrcu.index()], 285.0);
    }

    #[test]
    fn table1_line3() {
        let got = all_six(&[100.0, 100.0, 55.0, 55.0, 40.0, 40.0, 30.0], 7, &thr(80.0));
        assert_eq!(got[MetricKind::Ma.index()], 100.0);
        assert_eq!(got[MetricKind::Me.index()], 60.0);
        assert_eq!(got[MetricKind::Cu.index()], 420.0);
        assert_eq!(got[MetricKind::Hrma.index()], 100.0);
        assert!((got[MetricKind::Hrme.index()] - 200.0 / 7.0).abs() < 1e-12);
        assert_eq!(got[MetricKind::Hrcu.index()], 200.0);
    }

    #[test]
    fn empty_set_gives_zero_under_every_metric() {
        assert_eq!(all_six(&[], 0, &thr(80.0)), [0.0; 6]);
    }

    #[test]
    fn zero_count_with_values_is_inconsistent() {
        assert!(matches!(
            aggregate(&[1.0], 0, MetricKind::Ma, &thr(80.0)).unwrap_err(),
            Error::Inconsistency(_)
        ));
    }

    proptest! {
        #[test]
        fn metric_order_properties(
            values in proptest::collection::vec(0.0_f64..200.0, 0..40),
            threshold in 0.0_f64..220.0,
        ) {
            let t = thr(threshold);
            let m = all_six(&values, values.len(), &t);
            let [ma, me, cu, hrma, hrme, hrcu] = m;
            prop_assert!(hrma <= ma + 1e-12);
            prop_assert!(hrme <= me + 1e-12);
            prop_assert!(hrcu <= cu + 1e-12);
            prop_assert!(me <= ma + 1e-12);
            if !values.is_empty() {
                prop_assert!(cu >= ma - 1e-12);
            }
            // HRMA is either zero or the baseline maximum.
            prop_assert!(hrma.abs() < 1e-12 || (hrma - ma).abs() < 1e-12);
            if hrma > 0.0 {
                prop_assert!(hrme <= hrma + 1e-12);
            }
        }

        #[test]
        fn scale_equivariance(
            values in proptest::collection::vec(0.0_f64..200.0, 1..30),
            threshold in 0.0_f64..220.0,
            scale in prop_oneof![Just(0.5_f64), Just(2.0), Just(10.0)],
        ) {
            let t = thr(threshold);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let ts = thr(threshold * scale);
            let base = all_six(&values, values.len(), &t);
            let got = all_six(&scaled, values.len(), &ts);
            for k in 0..6 {
                let want = base[k] * scale;
                prop_assert!((got[k] - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }

        #[test]
        fn permutation_invariance(
            mut values in proptest::collection::vec(0.0_f64..200.0, 1..20),
            threshold in 0.0_f64..220.0,
        ) {
            let t = thr(threshold);
            let base = all_six(&values, values.len(), &t);
            values.reverse();
            let got = all_six(&values, values.len(), &t);
            for k in 0..6 {
                prop_assert!((base[k] - got[k]).abs() <= 1e-9 * base[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let days = vec!["2020-01-01".parse().unwrap(), "2020-01-02".parse().unwrap()];
        let values: Vec<f64> = (0..24).map(|i| i as f64 / 3.0).collect();
        let table = LineRiskTable::new(vec![LineId(5), LineId(9)], days, values).unwrap();
        let parsed = LineRiskTable::from_csv(&table.to_csv()).unwrap();
        assert_eq!(table, parsed);
    }

    #[test]
    fn missing_entry_on_import_is_a_data_error() {
        let days = vec!["2020-01-01".parse().unwrap()];
        let table = LineRiskTable::new(vec![LineId(1)], days, vec![0.0; 6]).unwrap();
        let mut csv = table.to_csv();
        let last = csv.trim_end().rfind('\n').unwrap();
        csv.truncate(last + 1);
        assert!(matches!(
            LineRiskTable::from_csv(&csv).unwrap_err(),
            Error::Data(_)
        ));
    }
}
