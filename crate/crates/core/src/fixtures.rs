//! Deterministic synthetic test systems.
//!
//! The 14-bus study system models a generation-rich west side feeding a
//! valley load pocket across a mountain barrier. Three corridor lines
//! cross the barrier through two passes; redundant scenic circuits run
//! through the highest-risk ridges, and a foothill mesh gives the west
//! side switching slack. Daily rasters follow a fire-season calendar
//! with calm, elevated and extreme days. Everything derives from pure
//! hashes of (year, day, cell), so regeneration is bit-identical with
//! no RNG state to thread.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::net::{Bus, BusId, DemandTable, Generator, GenId, Line, LineId, Network, Point};
use crate::raster::RiskRaster;

pub const GRID_COLS: usize = 30;
pub const GRID_ROWS: usize = 22;
pub const CELL_SIZE: f64 = 1000.0;

const Z_MOUNTAIN: f64 = 150.0;
const Z_PASS: f64 = 135.0;
const Z_FOOTHILL: f64 = 90.0;
const Z_VALLEY: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayType {
    Calm,
    Elevated,
    Extreme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Zone {
    Farmland,
    Foothill,
    Mountain,
    Pass,
    Valley,
    Lake,
}

/// Cells (col, row from the bottom) that are permanent NO_DATA lakes.
const LAKES: [(usize, usize); 5] = [(10, 2), (11, 2), (21, 18), (22, 18), (27, 3)];

fn zone(col: usize, row_from_bottom: usize) -> Zone {
    if LAKES.contains(&(col, row_from_bottom)) {
        return Zone::Lake;
    }
    match col {
        0..=8 => Zone::Farmland,
        9..=13 => Zone::Foothill,
        14..=18 => {
            if matches!(row_from_bottom, 7 | 8 | 13 | 14) {
                Zone::Pass
            } else {
                Zone::Mountain
            }
        }
        _ => Zone::Valley,
    }
}

// splitmix64; the fixture's only source of randomness.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn u01(parts: &[u64]) -> f64 {
    let mut h = 0x2545f4914f6cdd1d_u64;
    for &p in parts {
        h = mix(h ^ p);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn fire_season(year: i32) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(year, 7, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(year, 11, 15).unwrap();
    let mut days = Vec::new();
    let mut d = start;
    while d <= end {
        days.push(d);
        d = d.checked_add_days(Days::new(1)).unwrap();
    }
    days
}

/// Calendar of day types: the fire season holds a fixed number of
/// extreme and elevated days, chosen by hash rank so they scatter
/// through the season.
pub fn day_type(day: NaiveDate) -> DayType {
    let year = day.year();
    let (n_extreme, n_elevated) = if year % 2 == 0 { (55, 60) } else { (52, 58) };
    let season = fire_season(year);
    let mut ranked: Vec<(u64, NaiveDate)> = season
        .iter()
        .map(|&d| (mix((year as u64) << 16 ^ d.ordinal() as u64 ^ 0x5eed), d))
        .collect();
    ranked.sort_unstable();
    let pos = ranked.iter().position(|&(_, d)| d == day);
    match pos {
        Some(i) if i < n_extreme => DayType::Extreme,
        Some(i) if i < n_extreme + n_elevated => DayType::Elevated,
        _ => DayType::Calm,
    }
}

/// Day-wide fire intensity multiplier.
pub fn day_intensity(day: NaiveDate) -> f64 {
    let u = u01(&[day.year() as u64, day.ordinal() as u64, 0xd4]);
    match day_type(day) {
        DayType::Calm => 0.16 + 0.14 * u,
        DayType::Elevated => 0.70 + 0.03 * u,
        DayType::Extreme => 0.92 + 0.13 * u,
    }
}

/// One day's synthetic risk raster.
pub fn cats14_raster(day: NaiveDate) -> RiskRaster {
    let m = day_intensity(day);
    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(GRID_ROWS);
    for stored_row in 0..GRID_ROWS {
        let row_from_bottom = GRID_ROWS - 1 - stored_row;
        let mut row = Vec::with_capacity(GRID_COLS);
        for col in 0..GRID_COLS {
            let base = match zone(col, row_from_bottom) {
                Zone::Farmland | Zone::Lake => {
                    row.push(None);
                    continue;
                }
                Zone::Foothill => Z_FOOTHILL,
                Zone::Mountain => Z_MOUNTAIN,
                Zone::Pass => Z_PASS,
                Zone::Valley => Z_VALLEY,
            };
            let jitter =
                1.0 + 0.05 * (2.0 * u01(&[day.year() as u64, day.ordinal() as u64, col as u64, row_from_bottom as u64]) - 1.0);
            let v = (base * m * jitter * 100.0).round() / 100.0;
            row.push(Some(v.max(0.0)));
        }
        rows.push(row);
    }
    RiskRaster::from_rows(day, 0.0, 0.0, CELL_SIZE, rows).expect("fixture raster is valid")
}

/// ASCII-grid text for one day, as written to `wfpi_YYYY-MM-DD.asc`.
pub fn cats14_raster_text(day: NaiveDate) -> String {
    let raster = cats14_raster(day);
    let mut out = String::new();
    let _ = writeln!(out, "ncols {GRID_COLS}");
    let _ = writeln!(out, "nrows {GRID_ROWS}");
    let _ = writeln!(out, "xllcorner 0.0");
    let _ = writeln!(out, "yllcorner 0.0");
    let _ = writeln!(out, "cellsize {CELL_SIZE}");
    let _ = writeln!(out, "NODATA_value -9999");
    for r in 0..GRID_ROWS {
        let mut line = String::new();
        for c in 0..GRID_COLS {
            if c > 0 {
                line.push(' ');
            }
            match raster.value(crate::raster::PixelRef { col: c as u32, row: r as u32 }) {
                Some(v) => {
                    let _ = write!(line, "{v}");
                }
                None => line.push_str("-9999"),
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn km(points: &[(f64, f64)]) -> Vec<Point> {
    points
        .iter()
        .map(|&(x, y)| Point {
            x: x * 1000.0,
            y: y * 1000.0,
        })
        .collect()
}

/// The 14-bus synthetic study network.
pub fn cats14_network() -> Network {
    let buses = vec![
        ("west_hub", 1),
        ("north_gen", 2),
        ("west_town", 3),
        ("north_farm", 4),
        ("south_farm", 5),
        ("south_gen", 6),
        ("pass_gate", 7),
        ("foothill_gen", 8),
        ("canyon", 9),
        ("ridge", 10),
        ("summit", 11),
        ("mine", 12),
        ("east_town", 13),
        ("far_east", 14),
    ]
    .into_iter()
    .map(|(name, id)| Bus {
        id: BusId(id),
        name: name.to_string(),
    })
    .collect();

    let generators = vec![
        Generator { id: GenId(1), bus: BusId(1), p_min_mw: 50.0, p_max_mw: 400.0 },
        Generator { id: GenId(2), bus: BusId(2), p_min_mw: 20.0, p_max_mw: 200.0 },
        Generator { id: GenId(3), bus: BusId(6), p_min_mw: 20.0, p_max_mw: 150.0 },
        Generator { id: GenId(4), bus: BusId(8), p_min_mw: 0.0, p_max_mw: 100.0 },
        Generator { id: GenId(5), bus: BusId(12), p_min_mw: 0.0, p_max_mw: 40.0 },
    ];

    let mut lines = Vec::new();
    let mut add = |id: u32, from: u32, to: u32, b: f64, limit: f64, geom: Vec<Point>| {
        lines.push(Line {
            id: LineId(id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            susceptance_b: b,
            flow_limit_mw: limit,
            angle_min_rad: -0.5236,
            angle_max_rad: 0.5236,
            geometry: geom,
        });
    };

    // Farmland backbone and load stubs (zero wildfire risk, never
    // switchable).
    add(1, 1, 2, -15.0, 300.0, km(&[(3.5, 11.5), (5.5, 16.5)]));
    add(2, 1, 6, -15.0, 300.0, km(&[(3.5, 11.5), (5.5, 5.5)]));
    add(3, 1, 3, -10.0, 120.0, km(&[(3.5, 11.5), (2.5, 14.5)]));
    add(4, 2, 4, -10.0, 120.0, km(&[(5.5, 16.5), (7.5, 18.5)]));
    add(5, 6, 5, -10.0, 120.0, km(&[(5.5, 5.5), (7.5, 2.5)]));

    // Foothill mesh: redundant west-side ties with moderate risk.
    add(
        6,
        2,
        6,
        -8.0,
        150.0,
        km(&[(5.5, 16.5), (9.5, 15.5), (11.5, 13.5), (12.5, 10.5), (11.5, 7.5), (9.5, 6.5), (5.5, 5.5)]),
    );
    add(
        7,
        6,
        8,
        -8.0,
        150.0,
        km(&[(5.5, 5.5), (8.5, 4.5), (10.5, 4.5), (12.5, 5.5), (13.5, 7.5), (11.5, 8.5)]),
    );
    add(
        8,
        2,
        8,
        -8.0,
        150.0,
        km(&[(5.5, 16.5), (8.5, 14.5), (9.5, 12.5), (10.5, 10.5), (12.5, 9.5), (11.5, 8.5)]),
    );
    add(
        9,
        1,
        8,
        -8.0,
        150.0,
        km(&[(3.5, 11.5), (6.5, 10.5), (9.5, 11.5), (10.5, 9.5), (12.5, 8.5), (11.5, 8.5)]),
    );

    // Corridor into the pocket: the north chain 2-7-9 through the upper
    // pass and two south feeders through the lower pass.
    add(
        10,
        2,
        7,
        -7.0,
        160.0,
        km(&[(5.5, 16.5), (8.5, 15.5), (10.5, 14.5), (12.5, 14.5), (13.5, 14.5)]),
    );
    add(
        11,
        7,
        9,
        -7.0,
        160.0,
        km(&[(13.5, 14.5), (14.5, 13.5), (15.5, 14.5), (16.5, 13.5), (17.5, 14.5), (18.5, 13.5), (20.5, 13.5)]),
    );
    add(
        12,
        6,
        10,
        -6.0,
        160.0,
        km(&[(5.5, 5.5), (9.5, 5.5), (12.5, 6.5), (14.5, 7.5), (15.5, 8.5), (16.5, 7.5), (17.5, 8.5), (18.5, 7.5), (20.5, 7.5)]),
    );
    add(
        13,
        8,
        10,
        -6.0,
        160.0,
        km(&[(11.5, 8.5), (13.5, 7.5), (14.5, 8.5), (15.5, 7.5), (16.5, 8.5), (17.5, 7.5), (18.5, 8.5), (20.5, 7.5)]),
    );

    // Valley spine inside the pocket.
    add(14, 9, 10, -10.0, 220.0, km(&[(20.5, 13.5), (19.5, 10.5), (20.5, 7.5)]));
    add(15, 9, 11, -10.0, 220.0, km(&[(20.5, 13.5), (22.5, 14.5), (24.5, 15.5)]));
    add(16, 11, 12, -10.0, 220.0, km(&[(24.5, 15.5), (25.5, 13.5), (26.5, 11.5)]));
    add(17, 12, 13, -10.0, 220.0, km(&[(26.5, 11.5), (25.5, 8.5), (24.5, 5.5)]));
    add(18, 13, 14, -10.0, 220.0, km(&[(24.5, 5.5), (26.5, 6.5), (28.5, 8.5)]));

    // Scenic redundant circuits through the ridge tops: the riskiest
    // paths on the map, and harmless to drop.
    add(
        19,
        9,
        10,
        -3.0,
        70.0,
        km(&[(20.5, 13.5), (18.5, 12.5), (16.5, 11.5), (14.5, 10.5), (15.5, 9.5), (17.5, 10.5), (18.5, 9.5), (19.5, 9.5), (20.5, 7.5)]),
    );
    add(
        20,
        2,
        9,
        -1.2,
        70.0,
        km(&[(5.5, 16.5), (9.5, 16.5), (12.5, 16.5), (14.5, 16.5), (15.5, 17.5), (16.5, 16.5), (17.5, 17.5), (18.5, 16.5), (19.5, 15.5), (20.5, 13.5)]),
    );

    Network::new(100.0, buses, generators, lines).expect("fixture network is valid")
}

pub fn cats14_network_json() -> String {
    crate::net::network_to_json(&cats14_network()) + "\n"
}

const HOUR_PROFILE: [f64; 24] = [
    0.62, 0.58, 0.55, 0.54, 0.55, 0.58, 0.65, 0.72, 0.78, 0.82, 0.85, 0.87, 0.88, 0.90, 0.92,
    0.94, 0.97, 1.00, 0.99, 0.96, 0.90, 0.82, 0.74, 0.67,
];

const LOADS: [(u32, f64); 9] = [
    (3, 40.0),
    (4, 30.0),
    (5, 30.0),
    (9, 70.0),
    (10, 60.0),
    (11, 50.0),
    (12, 45.0),
    (13, 40.0),
    (14, 35.0),
];

fn season_factor(day: NaiveDate) -> f64 {
    let doy = day.ordinal() as f64;
    let days_in_year = if day.leap_year() { 366.0 } else { 365.0 };
    0.92 + 0.13 * (2.0 * std::f64::consts::PI * (doy - 197.0) / days_in_year).cos()
}

/// Demand in MW for one bus at one hour of the fixture year.
pub fn cats14_demand_mw(bus: u32, day: NaiveDate, hour: usize) -> f64 {
    let base = LOADS
        .iter()
        .find(|&&(b, _)| b == bus)
        .map(|&(_, mw)| mw)
        .unwrap_or(0.0);
    let raw = base * season_factor(day) * HOUR_PROFILE[hour];
    (raw * 1000.0).round() / 1000.0
}

/// Demand CSV for a full year, load buses only.
pub fn cats14_demand_csv(year: i32) -> String {
    let mut out = String::from("day,hour,bus,mw\n");
    let mut day = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
    while day.year() == year {
        for hour in 0..24 {
            for &(bus, _) in &LOADS {
                let _ = writeln!(out, "{day},{hour},{bus},{:.3}", cats14_demand_mw(bus, day, hour));
            }
        }
        day = day.checked_add_days(Days::new(1)).unwrap();
    }
    out
}

/// Study configuration text shipped with the generated fixture.
pub fn cats14_config_toml() -> String {
    r#"network = "network.json"
raster_dir = "rasters"
demand = "demand_2020.csv"
training_start = 2019-01-01
training_end = 2019-12-31
study_start = 2020-01-01
study_end = 2020-12-31
metrics = ["MA", "ME", "CU", "HRMA", "HRME", "HRCU"]
percentile_q = 95.0
epsilon_switch = 0.01
mip_gap = 0.0
out_dir = "out"
workers = 0
"#
    .to_string()
}

/// Writes the complete study fixture: network, demand year, two raster
/// years and the study config.
pub fn write_study_fixture(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let rasters = dir.join("rasters");
    std::fs::create_dir_all(&rasters).map_err(|e| Error::io(rasters.display().to_string(), e))?;
    let write = |path: std::path::PathBuf, text: String| -> Result<()> {
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    };
    write(dir.join("network.json"), cats14_network_json())?;
    write(dir.join("demand_2020.csv"), cats14_demand_csv(2020))?;
    write(dir.join("study.toml"), cats14_config_toml())?;
    for year in [2019, 2020] {
        let mut day = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        while day.year() == year {
            write(rasters.join(format!("wfpi_{day}.asc")), cats14_raster_text(day))?;
            day = day.checked_add_days(Days::new(1)).unwrap();
        }
    }
    Ok(())
}

/// Random connected network for oracle-equivalence testing: up to
/// `max_buses` buses, a spanning tree plus a few extra lines, loads on
/// non-generator buses.
pub fn random_small_network(seed: u64, max_buses: usize) -> Network {
    let mut rng = StdRng::seed_from_u64(seed);
    let n_buses = rng.gen_range(4..=max_buses.max(4));
    let buses: Vec<Bus> = (1..=n_buses)
        .map(|i| Bus {
            id: BusId(i as u32),
            name: format!("b{i}"),
        })
        .collect();
    let n_gens = rng.gen_range(1..=3.min(n_buses));
    let generators: Vec<Generator> = (0..n_gens)
        .map(|g| Generator {
            id: GenId(g as u32 + 1),
            bus: BusId(g as u32 + 1),
            p_min_mw: 0.0,
            p_max_mw: rng.gen_range(60.0..200.0),
        })
        .collect();

    let mut lines = Vec::new();
    let mut add_line = |rng: &mut StdRng, id: u32, from: u32, to: u32| {
        let x = id as f64;
        lines.push(Line {
            id: LineId(id),
            from_bus: BusId(from),
            to_bus: BusId(to),
            susceptance_b: -rng.gen_range(2.0..12.0),
            flow_limit_mw: rng.gen_range(30.0..120.0),
            angle_min_rad: -0.5236,
            angle_max_rad: 0.5236,
            geometry: vec![Point { x, y: 0.0 }, Point { x, y: 1.0 }],
        });
    };
    let mut next_id = 1;
    for b in 2..=n_buses {
        let parent = rng.gen_range(1..b);
        add_line(&mut rng, next_id, parent as u32, b as u32);
        next_id += 1;
    }
    let extras = rng.gen_range(1..=4);
    for _ in 0..extras {
        let a = rng.gen_range(1..=n_buses) as u32;
        let b = rng.gen_range(1..=n_buses) as u32;
        if a != b {
            add_line(&mut rng, next_id, a, b);
            next_id += 1;
        }
    }
    Network::new(100.0, buses, generators, lines).expect("random network is valid")
}

/// One-day constant demand for a random network: loads on non-generator
/// buses sized against total generation.
pub fn random_demand(network: &Network, seed: u64, day: NaiveDate) -> DemandTable {
    let mut rng = StdRng::seed_from_u64(seed ^ 0xdeaf);
    let gen_buses: Vec<BusId> = network.generators.iter().map(|g| g.bus).collect();
    let mut csv = String::from("day,hour,bus,mw\n");
    for bus in &network.buses {
        if gen_buses.contains(&bus.id) {
            continue;
        }
        let mw = rng.gen_range(0.0..60.0);
        for hour in 0..24 {
            let _ = writeln!(csv, "{day},{hour},{},{:.3}", bus.id, mw);
        }
    }
    crate::net::parse_demand(&csv, network).expect("random demand is valid")
}
