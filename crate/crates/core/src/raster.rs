//! Daily risk rasters and line-to-pixel intersection.
//!
//! Rasters are ESRI-style ASCII grids, one per day, named
//! `wfpi_YYYY-MM-DD.asc`. Cells with no associated risk (unburnable or
//! agricultural land) carry the NODATA sentinel.
//!
//! [`trace_line`] computes the supercover of a polyline: every cell
//! whose closed square the line touches, corner contacts included. Ties
//! at exact cell boundaries include both adjacent cells; there is no
//! epsilon nudging. NO_DATA cells are part of the traced set — they are
//! dropped later by [`pixel_risks`], which looks values up.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::net::{Line, LineId, Point};

/// Raster placement and resolution; all rasters in a study must agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub n_cols: usize,
    pub n_rows: usize,
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
}

/// One day's gridded wildfire potential. `values` is row-major with row
/// 0 the top row (maximum y), matching the file layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskRaster {
    pub day: NaiveDate,
    pub n_cols: usize,
    pub n_rows: usize,
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
    values: Vec<Option<f64>>,
}

/// Raster cell index. `row` counts from the top row, as stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelRef {
    pub col: u32,
    pub row: u32,
}

/// Pixels a line traverses, in deterministic first-touch order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinePixelSet {
    pub line: LineId,
    pub geometry: GridGeometry,
    pub pixels: Vec<PixelRef>,
}

/// Risk values over a traced pixel set. `pixel_count` counts burnable
/// (non-NO_DATA) pixels only and equals `values.len()` here; metric
/// aggregation takes both so callers can pre-filter values.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRisks {
    pub values: Vec<f64>,
    pub pixel_count: usize,
}

impl RiskRaster {
    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            n_cols: self.n_cols,
            n_rows: self.n_rows,
            x_origin: self.x_origin,
            y_origin: self.y_origin,
            cell_size: self.cell_size,
        }
    }

    /// Risk at a pixel; `None` for NO_DATA.
    pub fn value(&self, p: PixelRef) -> Option<f64> {
        self.values[p.row as usize * self.n_cols + p.col as usize]
    }

    pub fn no_data_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Builds a raster from rows as stored in the file (top row first).
    pub fn from_rows(
        day: NaiveDate,
        x_origin: f64,
        y_origin: f64,
        cell_size: f64,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<RiskRaster> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Validation("raster must have at least one cell".into()));
        }
        if !(cell_size > 0.0) {
            return Err(Error::Validation(format!(
                "cell_size must be positive, got {cell_size}"
            )));
        }
        let n_cols = rows[0].len();
        let n_rows = rows.len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Validation(format!(
                    "raster row {} has {} cells, expected {}",
                    r,
                    row.len(),
                    n_cols
                )));
            }
            for (c, v) in row.iter().enumerate() {
                if let Some(x) = v {
                    if *x < 0.0 {
                        return Err(Error::Validation(format!(
                            "negative risk value {} at row {} col {}",
                            x, r, c
                        )));
                    }
                }
                values.push(*v);
            }
        }
        Ok(RiskRaster {
            day,
            n_cols,
            n_rows,
            x_origin,
            y_origin,
            cell_size,
            values,
        })
    }
}

/// Loads an ASCII-grid raster. The day is taken from the
/// `wfpi_YYYY-MM-DD.asc` file name.
pub fn load_raster(path: impl AsRef<Path>) -> Result<RiskRaster> {
    let path = path.as_ref();
    let day = day_from_filename(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_raster(&text, day).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{} ({})", context, path.display()),
            message,
        },
        other => other,
    })
}

fn day_from_filename(path: &Path) -> Result<NaiveDate> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::parse("raster filename", "not valid UTF-8"))?;
    let date = stem
        .strip_prefix("wfpi_")
        .ok_or_else(|| Error::parse("raster filename", format!("expected wfpi_YYYY-MM-DD.asc, got {stem}")))?;
    date.parse::<NaiveDate>()
        .map_err(|_| Error::parse("raster filename", format!("bad date in {stem}")))
}

/// Parses ASCII-grid text. Header keys may appear in any order but must
/// all precede the data rows; the first data row is the top of the grid.
pub fn parse_raster(text: &str, day: NaiveDate) -> Result<RiskRaster> {
    let mut n_cols: Option<usize> = None;
    let mut n_rows: Option<usize> = None;
    let mut x_origin: Option<f64> = None;
    let mut y_origin: Option<f64> = None;
    let mut cell_size: Option<f64> = None;
    let mut no_data: Option<f64> = None;

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut pending: Option<(usize, &str)> = None;
    for (ln, line) in lines.by_ref() {
        let mut it = line.split_whitespace();
        let key = it.next().unwrap_or("");
        let lowered = key.to_ascii_lowercase();
        let slot: &mut Option<f64> = match lowered.as_str() {
            "ncols" | "nrows" => {
                let v: usize = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .filter(|&v| v > 0)
                    .ok_or_else(|| {
                        Error::parse(format!("raster header line {}", ln + 1), format!("bad {key} value"))
                    })?;
                if lowered == "ncols" {
                    n_cols = Some(v);
                } else {
                    n_rows = Some(v);
                }
                continue;
            }
            "xllcorner" => &mut x_origin,
            "yllcorner" => &mut y_origin,
            "cellsize" => &mut cell_size,
            "nodata_value" => &mut no_data,
            _ => {
                pending = Some((ln, line));
                break;
            }
        };
        let v: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(format!("raster header line {}", ln + 1), format!("bad {key} value")))?;
        *slot = Some(v);
    }

    let n_cols = n_cols.ok_or_else(|| Error::parse("raster header", "missing ncols"))?;
    let n_rows = n_rows.ok_or_else(|| Error::parse("raster header", "missing nrows"))?;
    let x_origin = x_origin.ok_or_else(|| Error::parse("raster header", "missing xllcorner"))?;
    let y_origin = y_origin.ok_or_else(|| Error::parse("raster header", "missing yllcorner"))?;
    let cell_size = cell_size.ok_or_else(|| Error::parse("raster header", "missing cellsize"))?;
    let no_data = no_data.ok_or_else(|| Error::parse("raster header", "missing NODATA_value"))?;
    if !(cell_size > 0.0) {
        return Err(Error::parse("raster header", format!("cellsize must be positive, got {cell_size}")));
    }

    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(n_rows);
    let data_lines = pending.into_iter().chain(lines);
    for (ln, line) in data_lines {
        let r = rows.len();
        if r >= n_rows {
            return Err(Error::Validation(format!(
                "raster has more than the declared {} data rows (extra at line {})",
                n_rows,
                ln + 1
            )));
        }
        let mut row = Vec::with_capacity(n_cols);
        for (c, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                Error::parse(
                    format!("raster data row {} col {}", r, c),
                    format!("non-numeric cell {:?}", tok),
                )
            })?;
            if v == no_data {
                row.push(None);
            } else {
                if v < 0.0 {
                    return Err(Error::Validation(format!(
                        "negative risk value {} at row {} col {}",
                        v, r, c
                    )));
                }
                row.push(Some(v));
            }
        }
        if row.len() != n_cols {
            return Err(Error::Validation(format!(
                "raster data row {} has {} cells, header declares ncols {}",
                r,
                row.len(),
                n_cols
            )));
        }
        rows.push(row);
    }
    if rows.len() != n_rows {
        return Err(Error::Validation(format!(
            "raster has {} data rows, header declares nrows {}",
            rows.len(),
            n_rows
        )));
    }
    RiskRaster::from_rows(day, x_origin, y_origin, cell_size, rows)
}

/// Cells of the closed unit-interval lattice touched by the closed
/// interval [lo, hi]: cell k covers [k, k+1], so an integer endpoint
/// touches the cells on both sides.
fn lattice_range(lo: f64, hi: f64) -> (i64, i64) {
    ((lo.ceil() as i64) - 1, hi.floor() as i64)
}

/// Computes the supercover of `line`'s polyline over the raster grid:
/// all cells whose closed square the polyline intersects, deduplicated,
/// in first-touch order. NO_DATA cells are included.
pub fn trace_line(line: &Line, raster: &RiskRaster) -> Result<LinePixelSet> {
    let geom = raster.geometry();
    let cs = geom.cell_size;
    // Grid-unit coordinates: column strip i covers u in [i, i+1], row
    // strip j (from the bottom) covers v in [j, j+1].
    let to_grid = |p: &Point| ((p.x - geom.x_origin) / cs, (p.y - geom.y_origin) / cs);

    for (i, p) in line.geometry.iter().enumerate() {
        let (u, v) = to_grid(p);
        if !(0.0 <= u && u <= geom.n_cols as f64 && 0.0 <= v && v <= geom.n_rows as f64) {
            return Err(Error::Bounds(format!(
                "line {} vertex {} at ({}, {}) lies outside the raster extent",
                line.id, i, p.x, p.y
            )));
        }
    }

    let mut pixels = Vec::new();
    let mut seen = HashSet::new();
    let max_col = geom.n_cols as i64 - 1;
    let max_row = geom.n_rows as i64 - 1;
    let mut emit = |col: i64, row_from_bottom: i64| {
        let col = col.clamp(0, max_col);
        let row_from_bottom = row_from_bottom.clamp(0, max_row);
        let p = PixelRef {
            col: col as u32,
            row: (max_row - row_from_bottom) as u32,
        };
        if seen.insert(p) {
            pixels.push(p);
        }
    };

    for seg in line.geometry.windows(2) {
        let (mut u0, mut v0) = to_grid(&seg[0]);
        let (mut u1, mut v1) = to_grid(&seg[1]);
        if u0 > u1 {
            std::mem::swap(&mut u0, &mut u1);
            std::mem::swap(&mut v0, &mut v1);
        }
        let du = u1 - u0;
        let dv = v1 - v0;
        let (col_lo, col_hi) = lattice_range(u0, u1);
        if du == 0.0 {
            let (row_lo, row_hi) = lattice_range(v0.min(v1), v0.max(v1));
            for col in col_lo..=col_hi {
                for row in row_lo..=row_hi {
                    emit(col, row);
                }
            }
            continue;
        }
        let (vseg_lo, vseg_hi) = (v0.min(v1), v0.max(v1));
        for col in col_lo..=col_hi {
            // Parameter range where the segment is inside this column
            // strip; a single-point intersection is a corner touch.
            let t_lo = ((col as f64 - u0) / du).max(0.0);
            let t_hi = (((col + 1) as f64 - u0) / du).min(1.0);
            if t_lo > t_hi {
                continue;
            }
            let va = v0 + t_lo * dv;
            let vb = v0 + t_hi * dv;
            let v_lo = va.min(vb).max(vseg_lo);
            let v_hi = va.max(vb).min(vseg_hi);
            let (row_lo, row_hi) = lattice_range(v_lo, v_hi);
            for row in row_lo..=row_hi {
                emit(col, row);
            }
        }
    }

    Ok(LinePixelSet {
        line: line.id,
        geometry: geom,
        pixels,
    })
}

/// Looks up risk values for a traced pixel set, dropping NO_DATA cells.
/// The returned `pixel_count` counts burnable pixels only.
pub fn pixel_risks(pixel_set: &LinePixelSet, raster: &RiskRaster) -> Result<PixelRisks> {
    if pixel_set.geometry != raster.geometry() {
        return Err(Error::Geometry(format!(
            "pixel set for line {} was traced on a different grid",
            pixel_set.line
        )));
    }
    let values: Vec<f64> = pixel_set
        .pixels
        .iter()
        .filter_map(|&p| raster.value(p))
        .collect();
    let pixel_count = values.len();
    Ok(PixelRisks { values, pixel_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::BusId;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn grid(n_cols: usize, n_rows: usize, cell: f64) -> RiskRaster {
        let rows = vec![vec![Some(1.0); n_cols]; n_rows];
        RiskRaster::from_rows(date("2020-01-01"), 0.0, 0.0, cell, rows).unwrap()
    }

    fn line_with(geometry: Vec<Point>) -> Line {
        Line {
            id: LineId(7),
            from_bus: BusId(1),
            to_bus: BusId(2),
            susceptance_b: -10.0,
            flow_limit_mw: 100.0,
            angle_min_rad: -0.5,
            angle_max_rad: 0.5,
            geometry,
        }
    }

    fn cells(set: &LinePixelSet) -> Vec<(u32, u32)> {
        set.pixels.iter().map(|p| (p.col, p.row)).collect()
    }

    #[test]
    fn parses_two_by_two_with_nodata() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n10 -9999\n0 150\n";
        let r = parse_raster(text, date("2020-01-01")).unwrap();
        assert_eq!(r.no_data_count(), 1);
        assert_eq!(r.value(PixelRef { col: 0, row: 0 }), Some(10.0));
        assert_eq!(r.value(PixelRef { col: 1, row: 0 }), None);
        assert_eq!(r.value(PixelRef { col: 1, row: 1 }), Some(150.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = "ncols 3\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n10 20\n";
        let err = parse_raster(text, date("2020-01-01")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "got {err:?}");
    }

    #[test]
    fn value_above_nominal_range_is_accepted() {
        // The index can exceed 150 under very high wind speeds.
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n151\n";
        let r = parse_raster(text, date("2020-01-01")).unwrap();
        assert_eq!(r.value(PixelRef { col: 0, row: 0 }), Some(151.0));
    }

    #[test]
    fn negative_value_is_rejected() {
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-3\n";
        assert!(matches!(
            parse_raster(text, date("2020-01-01")).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn non_numeric_cell_is_rejected() {
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\nxyz\n";
        assert!(matches!(
            parse_raster(text, date("2020-01-01")).unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn horizontal_segment_spans_three_cells() {
        let r = grid(3, 3, 1.0);
        let l = line_with(vec![Point { x: 0.5, y: 1.5 }, Point { x: 2.5, y: 1.5 }]);
        let set = trace_line(&l, &r).unwrap();
        // Middle row from the bottom is stored row 1.
        assert_eq!(cells(&set), vec![(0, 1), (1, 1), (2, 1)]);
    }

    #[test]
    fn diagonal_through_corner_touches_all_four_cells() {
        let r = grid(2, 2, 1.0);
        let l = line_with(vec![Point { x: 0.0, y: 0.0 }, Point { x: 2.0, y: 2.0 }]);
        let set = trace_line(&l, &r).unwrap();
        let mut got = cells(&set);
        got.sort_unstable();
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn revisited_cell_appears_once() {
        let r = grid(3, 3, 1.0);
        let l = line_with(vec![
            Point { x: 0.5, y: 0.5 },
            Point { x: 2.5, y: 0.5 },
            Point { x: 0.5, y: 0.5 },
        ]);
        let set = trace_line(&l, &r).unwrap();
        assert_eq!(cells(&set), vec![(0, 2), (1, 2), (2, 2)]);
    }

    #[test]
    fn segment_along_grid_line_touches_both_rows() {
        let r = grid(2, 2, 1.0);
        let l = line_with(vec![Point { x: 0.25, y: 1.0 }, Point { x: 1.75, y: 1.0 }]);
        let set = trace_line(&l, &r).unwrap();
        let mut got = cells(&set);
        got.sort_unstable();
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn out_of_bounds_vertex_is_named() {
        let r = grid(2, 2, 1.0);
        let l = line_with(vec![Point { x: 0.5, y: 0.5 }, Point { x: 5.0, y: 0.5 }]);
        let err = trace_line(&l, &r).unwrap_err();
        match err {
            Error::Bounds(msg) => assert!(msg.contains("vertex 1"), "message was: {msg}"),
            other => panic!("expected bounds error, got {other:?}"),
        }
    }

    #[test]
    fn pixel_risks_drops_nodata_and_counts_burnable() {
        let rows = vec![vec![Some(100.0), None, Some(30.0), Some(20.0)]];
        let r = RiskRaster::from_rows(date("2020-01-01"), 0.0, 0.0, 1.0, rows).unwrap();
        let l = line_with(vec![Point { x: 0.1, y: 0.5 }, Point { x: 3.9, y: 0.5 }]);
        let set = trace_line(&l, &r).unwrap();
        let pr = pixel_risks(&set, &r).unwrap();
        assert_eq!(pr.values, vec![100.0, 30.0, 20.0]);
        assert_eq!(pr.pixel_count, 3);
    }

    #[test]
    fn all_nodata_yields_empty_with_zero_count() {
        let rows = vec![vec![None, None]];
        let r = RiskRaster::from_rows(date("2020-01-01"), 0.0, 0.0, 1.0, rows).unwrap();
        let l = line_with(vec![Point { x: 0.2, y: 0.5 }, Point { x: 1.8, y: 0.5 }]);
        let pr = pixel_risks(&trace_line(&l, &r).unwrap(), &r).unwrap();
        assert!(pr.values.is_empty());
        assert_eq!(pr.pixel_count, 0);
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let r1 = grid(3, 3, 1.0);
        let mut r2 = grid(3, 3, 1.0);
        r2.x_origin = 10.0;
        let l = line_with(vec![Point { x: 0.5, y: 0.5 }, Point { x: 1.5, y: 0.5 }]);
        let set = trace_line(&l, &r1).unwrap();
        assert!(matches!(pixel_risks(&set, &r2).unwrap_err(), Error::Geometry(_)));
    }

    #[test]
    fn translation_invariance() {
        let rows: Vec<Vec<Option<f64>>> = (0..4)
            .map(|r| (0..4).map(|c| Some((r * 4 + c) as f64)).collect())
            .collect();
        let base = RiskRaster::from_rows(date("2020-01-01"), 0.0, 0.0, 1.0, rows.clone()).unwrap();
        let shifted = RiskRaster::from_rows(date("2020-01-01"), 17.0, -5.0, 1.0, rows).unwrap();
        let l0 = line_with(vec![Point { x: 0.3, y: 0.4 }, Point { x: 3.6, y: 3.2 }]);
        let l1 = line_with(vec![Point { x: 17.3, y: -4.6 }, Point { x: 20.6, y: -1.8 }]);
        let p0 = pixel_risks(&trace_line(&l0, &base).unwrap(), &base).unwrap();
        let p1 = pixel_risks(&trace_line(&l1, &shifted).unwrap(), &shifted).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn trace_is_deterministic() {
        let r = grid(8, 8, 2.5);
        let l = line_with(vec![
            Point { x: 1.0, y: 1.0 },
            Point { x: 19.0, y: 7.0 },
            Point { x: 3.0, y: 18.0 },
        ]);
        let a = trace_line(&l, &r).unwrap();
        let b = trace_line(&l, &r).unwrap();
        assert_eq!(a, b);
    }
}
