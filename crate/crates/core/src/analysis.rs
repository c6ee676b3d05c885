//! Post-processing: unique-line counts, rolling-average load shed,
//! plan-similarity matrix and report files.
//!
//! The CSVs are the contract; the SVG charts are conveniences rendered
//! as plain text so output is deterministic byte for byte.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, ALL_METRICS};
use crate::net::LineId;
use crate::threshold::{DeEnergizationPlan, PlanMethod};

/// Days each line was de-energized over a study period, for one
/// (method, metric) pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct DeEnergizationCountVector {
    pub method: PlanMethod,
    pub metric: MetricKind,
    /// Parallel to the line universe used to build the vector.
    pub counts: Vec<u32>,
}

impl DeEnergizationCountVector {
    /// Counts de-energizations per line over the given plans.
    pub fn from_plans(
        method: PlanMethod,
        metric: MetricKind,
        line_ids: &[LineId],
        plans: &[DeEnergizationPlan],
    ) -> Result<Self> {
        let mut counts = vec![0u32; line_ids.len()];
        for plan in plans {
            if plan.method != method || plan.metric != metric {
                return Err(Error::Inconsistency(format!(
                    "plan for {}/{} mixed into the {}/{} count vector",
                    plan.method, plan.metric, method, metric
                )));
            }
            for off in &plan.off_lines {
                let idx = line_ids
                    .iter()
                    .position(|l| l == off)
                    .ok_or_else(|| Error::Reference(format!("plan references absent line {off}")))?;
                counts[idx] += 1;
            }
        }
        Ok(DeEnergizationCountVector {
            method,
            metric,
            counts,
        })
    }
}

/// Number of distinct lines de-energized at least once.
pub fn unique_lines(plans: &[DeEnergizationPlan]) -> usize {
    let mut seen: BTreeSet<LineId> = BTreeSet::new();
    for plan in plans {
        seen.extend(plan.off_lines.iter().copied());
    }
    seen.len()
}

/// Cosine similarity of two count vectors; all-zero vectors compare as
/// zero so the measure stays defined.
pub fn similarity(u: &[u32], v: &[u32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Inconsistency(format!(
            "count vectors over different line universes ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum();
    let nu: f64 = u.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}

/// 12x12 similarity between every (metric, method) pairing, ordered
/// MA,ME,CU,HRMA,HRME,HRCU with THRESHOLD before OPS inside each metric.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub labels: Vec<(MetricKind, PlanMethod)>,
    pub values: Vec<Vec<f64>>,
}

pub fn pairing_order() -> Vec<(MetricKind, PlanMethod)> {
    let mut labels = Vec::with_capacity(12);
    for metric in ALL_METRICS {
        for method in [PlanMethod::Threshold, PlanMethod::Ops] {
            labels.push((metric, method));
        }
    }
    labels
}

impl SimilarityMatrix {
    pub fn from_vectors(vectors: &[DeEnergizationCountVector]) -> Result<SimilarityMatrix> {
        let labels = pairing_order();
        let mut ordered = Vec::with_capacity(labels.len());
        for &(metric, method) in &labels {
            let v = vectors
                .iter()
                .find(|v| v.metric == metric && v.method == method)
                .ok_or_else(|| Error::Data(format!("missing count vector for {metric}/{method}")))?;
            ordered.push(v);
        }
        let n = ordered.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                values[i][j] = similarity(&ordered[i].counts, &ordered[j].counts)?;
            }
        }
        Ok(SimilarityMatrix { labels, values })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pairing");
        for (metric, method) in &self.labels {
            let _ = write!(out, ",{metric}_{method}");
        }
        out.push('\n');
        for (i, (metric, method)) in self.labels.iter().enumerate() {
            let _ = write!(out, "{metric}_{method}");
            for v in &self.values[i] {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }
}

/// Trailing moving average; the first `window - 1` entries average the
/// available prefix.
pub fn rolling_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InsufficientData("rolling average over an empty series".into()));
    }
    if window == 0 {
        return Err(Error::Inconsistency("rolling window must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    Ok(out)
}

/// Writes a simple multi-series line chart as SVG text.
pub fn line_chart_svg(title: &str, series: &[(String, Vec<f64>)]) -> String {
    const W: f64 = 900.0;
    const H: f64 = 420.0;
    const ML: f64 = 60.0;
    const MB: f64 = 40.0;
    const MT: f64 = 30.0;
    const MR: f64 = 20.0;
    let palette = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    ];
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let max_y = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>",
        ML
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    let _ = writeln!(svg, "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"black\"/>", H - MB);
    let _ = writeln!(
        svg,
        "<text x=\"6\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{max_y:.1}</text>",
        MT + 10.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"6\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">0</text>",
        H - MB
    );
    for (si, (name, values)) in series.iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        let color = palette[si % palette.len()];
        let mut path = String::new();
        for (i, v) in values.iter().enumerate() {
            let x = ML + (W - ML - MR) * if n <= 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let y = (H - MB) - (H - MB - MT) * (v / max_y);
            let _ = write!(path, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        let _ = writeln!(svg, "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>");
        let lx = ML + 10.0 + (si as f64 % 4.0) * 200.0;
        let ly = MT + 14.0 * (si / 4) as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>",
            ly - 9.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" font-family=\"sans-serif\" font-size=\"11\">{name}</text>",
            lx + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders the similarity matrix as an SVG heatmap.
pub fn heatmap_svg(matrix: &SimilarityMatrix) -> String {
    let n = matrix.labels.len();
    const CELL: f64 = 46.0;
    const ML: f64 = 120.0;
    const MT: f64 = 110.0;
    let w = ML + CELL * n as f64 + 20.0;
    let h = MT + CELL * n as f64 + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"white\"/>");
    for (i, (metric, method)) in matrix.labels.iter().enumerate() {
        let label = format!("{metric}_{method}");
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{label}</text>",
            ML - 6.0,
            MT + CELL * (i as f64 + 0.6)
        );
        let cx = ML + CELL * (i as f64 + 0.5);
        let _ = writeln!(
            svg,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-60 {cx:.1} {:.1})\">{label}</text>",
            MT - 8.0,
            MT - 8.0
        );
    }
    for i in 0..n {
        for j in 0..n {
            let v = matrix.values[i][j].clamp(0.0, 1.0);
            // Black at 0 through to yellow at 1.
            let r = (255.0 * v).round() as u8;
            let g = (220.0 * v).round() as u8;
            let b = (40.0 * v * v).round() as u8;
            let x = ML + CELL * j as f64;
            let y = MT + CELL * i as f64;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" fill=\"rgb({r},{g},{b})\" stroke=\"white\"/>"
            );
            let tcolor = if v > 0.5 { "black" } else { "white" };
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{tcolor}\" text-anchor=\"middle\">{v:.2}</text>",
                x + CELL / 2.0,
                y + CELL / 2.0 + 3.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::date;

    fn plan(method: PlanMethod, metric: MetricKind, day: &str, off: &[u32]) -> DeEnergizationPlan {
        DeEnergizationPlan {
            day: date(day),
            metric,
            method,
            off_lines: off.iter().map(|&l| LineId(l)).collect(),
            residual_risk: 0.0,
            risk_budget: None,
        }
    }

    #[test]
    fn unique_lines_is_the_union_cardinality() {
        let plans = vec![
            plan(PlanMethod::Threshold, MetricKind::Ma, "2020-01-01", &[1]),
            plan(PlanMethod::Threshold, MetricKind::Ma, "2020-01-02", &[1, 2]),
        ];
        assert_eq!(unique_lines(&plans), 2);
        assert_eq!(unique_lines(&[]), 0);
    }

    #[test]
    fn unique_lines_matches_set_union_oracle() {
        let mut x = 0.77_f64;
        let mut plans = Vec::new();
        let mut union = BTreeSet::new();
        for d in 0..40 {
            let mut off = Vec::new();
            for l in 1..=15u32 {
                x = (x * 467.11).fract();
                if x < 0.2 {
                    off.push(l);
                    union.insert(l);
                }
            }
            plans.push(plan(
                PlanMethod::Ops,
                MetricKind::Cu,
                &format!("2020-02-{:02}", d % 28 + 1),
                &off,
            ));
        }
        assert_eq!(unique_lines(&plans), union.len());
    }

    #[test]
    fn unique_lines_is_monotone_in_days() {
        let plans = vec![
            plan(PlanMethod::Threshold, MetricKind::Ma, "2020-01-01", &[3, 4]),
            plan(PlanMethod::Threshold, MetricKind::Ma, "2020-01-02", &[4]),
            plan(PlanMethod::Threshold, MetricKind::Ma, "2020-01-03", &[5]),
        ];
        let mut last = 0;
        for k in 0..=plans.len() {
            let u = unique_lines(&plans[..k]);
            assert!(u >= last);
            last = u;
        }
    }

    #[test]
    fn identical_nonzero_vectors_have_similarity_one() {
        let v = vec![2, 0, 3, 1];
        assert!((similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_have_similarity_zero() {
        assert_eq!(similarity(&[1, 1, 0, 0], &[0, 0, 2, 5]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_cosine() {
        let got = similarity(&[1, 1], &[1, 0]).unwrap();
        assert!((got - 1.0 / 2.0_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_vector_similarity_is_defined_as_zero() {
        assert_eq!(similarity(&[0, 0], &[1, 2]).unwrap(), 0.0);
        assert_eq!(similarity(&[0, 0], &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(similarity(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn similarity_is_scale_invariant() {
        let u = vec![3, 1, 0, 7];
        let v = vec![1, 2, 5, 1];
        let scaled: Vec<u32> = v.iter().map(|&x| x * 9).collect();
        let a = similarity(&u, &v).unwrap();
        let b = similarity(&u, &scaled).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rolling_average_of_constant_is_constant() {
        let out = rolling_average(&[10.0; 30], 7).unwrap();
        assert!(out.iter().all(|&v| (v - 10.0).abs() < 1e-12));
    }

    #[test]
    fn rolling_average_prefix_shortens() {
        let out = rolling_average(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0], 7).unwrap();
        assert_eq!(out[6], 1.0);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn rolling_average_matches_convolution_oracle() {
        let mut x = 0.4_f64;
        let series: Vec<f64> = (0..60)
            .map(|_| {
                x = (x * 733.19).fract();
                x * 100.0
            })
            .collect();
        let got = rolling_average(&series, 7).unwrap();
        for i in 0..series.len() {
            let lo = i.saturating_sub(6);
            let want: f64 = series[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64;
            assert!((got[i] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn rolling_average_bounded_by_window_extremes() {
        let series = [5.0, 1.0, 9.0, 4.0, 8.0, 2.0, 6.0, 3.0];
        let got = rolling_average(&series, 3).unwrap();
        for i in 0..series.len() {
            let lo = i.saturating_sub(2);
            let w = &series[lo..=i];
            let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(got[i] >= min - 1e-12 && got[i] <= max + 1e-12);
        }
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(rolling_average(&[], 7).is_err());
    }

    #[test]
    fn similarity_matrix_is_symmetric_with_unit_diagonal() {
        let mut vectors = Vec::new();
        let mut x = 0.3_f64;
        for (metric, method) in pairing_order() {
            let counts: Vec<u32> = (0..10)
                .map(|_| {
                    x = (x * 251.3).fract();
                    (x * 5.0) as u32 + 1
                })
                .collect();
            vectors.push(DeEnergizationCountVector {
                method,
                metric,
                counts,
            });
        }
        let m = SimilarityMatrix::from_vectors(&vectors).unwrap();
        assert_eq!(m.labels.len(), 12);
        for i in 0..12 {
            assert!((m.values[i][i] - 1.0).abs() < 1e-9);
            for j in 0..12 {
                assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
            }
        }
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("pairing,MA_THRESHOLD,MA_OPS,ME_THRESHOLD"));
    }

    #[test]
    fn svg_output_is_deterministic() {
        let series = vec![("MA".to_string(), vec![1.0, 4.0, 2.0])];
        assert_eq!(line_chart_svg("t", &series), line_chart_svg("t", &series));
    }
}
