//! Power network data model and ingestion of network/demand files.
//!
//! The network file is UTF-8 JSON with top-level keys `base_mva`,
//! `buses[]`, `generators[]` and `lines[]`; line geometry is a polyline
//! `[[x,y],...]` in the raster's planar CRS. Demand is CSV with header
//! `day,hour,bus,mw`. See `docs/formats.md` for the exact schemas.
//!
//! MW quantities are stored exactly as loaded; per-unit values are
//! derived on demand through [`Network::pu`] so the conversion happens
//! exactly once on each use and files round-trip bit-exactly.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GenId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for GenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    /// Lower generation limit as given in the data. Planners relax this
    /// to zero; the raw value is retained for reporting.
    pub p_min_mw: f64,
    pub p_max_mw: f64,
}

/// Planar coordinate in the raster CRS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Per-unit susceptance, sign taken as given in the data.
    pub susceptance_b: f64,
    pub flow_limit_mw: f64,
    pub angle_min_rad: f64,
    pub angle_max_rad: f64,
    /// Polyline of at least two points; total length must be positive.
    pub geometry: Vec<Point>,
}

impl Line {
    pub fn length(&self) -> f64 {
        self.geometry
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .sum()
    }
}

/// 24 hourly demand values for one bus on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    pub bus: BusId,
    pub day: NaiveDate,
    pub hourly_mw: [f64; 24],
}

/// Immutable cross-referenced network. Safe for concurrent shared reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    #[serde(skip)]
    bus_index: HashMap<BusId, usize>,
    #[serde(skip)]
    line_index: HashMap<LineId, usize>,
}

/// On-disk schema. Field order is preserved on write.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkFile {
    base_mva: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    lines: Vec<LineRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LineRecord {
    id: LineId,
    from_bus: BusId,
    to_bus: BusId,
    susceptance_b: f64,
    flow_limit_mw: f64,
    angle_min_rad: f64,
    angle_max_rad: f64,
    geometry: Vec<[f64; 2]>,
}

impl From<Network> for NetworkFile {
    fn from(n: Network) -> Self {
        NetworkFile {
            base_mva: n.base_mva,
            buses: n.buses,
            generators: n.generators,
            lines: n
                .lines
                .into_iter()
                .map(|l| LineRecord {
                    id: l.id,
                    from_bus: l.from_bus,
                    to_bus: l.to_bus,
                    susceptance_b: l.susceptance_b,
                    flow_limit_mw: l.flow_limit_mw,
                    angle_min_rad: l.angle_min_rad,
                    angle_max_rad: l.angle_max_rad,
                    geometry: l.geometry.into_iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(f: NetworkFile) -> Result<Network> {
        let lines = f
            .lines
            .into_iter()
            .map(|l| Line {
                id: l.id,
                from_bus: l.from_bus,
                to_bus: l.to_bus,
                susceptance_b: l.susceptance_b,
                flow_limit_mw: l.flow_limit_mw,
                angle_min_rad: l.angle_min_rad,
                angle_max_rad: l.angle_max_rad,
                geometry: l.geometry.iter().map(|p| Point { x: p[0], y: p[1] }).collect(),
            })
            .collect();
        Network::new(f.base_mva, f.buses, f.generators, lines)
    }
}

impl Network {
    /// Builds and validates a network. All invariants from the data
    /// model are checked here so every constructed `Network` is sound.
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        lines: Vec<Line>,
    ) -> Result<Network> {
        if !(base_mva > 0.0) {
            return Err(Error::parse("base_mva", "must be positive"));
        }
        if buses.is_empty() {
            return Err(Error::parse("buses", "at least one bus required"));
        }
        let mut bus_index = HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(Error::parse("buses", format!("duplicate bus id {}", b.id)));
            }
        }
        let mut gen_ids = HashMap::new();
        for g in &generators {
            if gen_ids.insert(g.id, ()).is_some() {
                return Err(Error::parse(
                    "generators",
                    format!("duplicate generator id {}", g.id),
                ));
            }
            if !bus_index.contains_key(&g.bus) {
                return Err(Error::Reference(format!(
                    "generator {} references absent bus {}",
                    g.id, g.bus
                )));
            }
            if !(g.p_min_mw >= 0.0) {
                return Err(Error::Validation(format!(
                    "generator {}: p_min_mw must be >= 0, got {}",
                    g.id, g.p_min_mw
                )));
            }
            if g.p_min_mw > g.p_max_mw {
                return Err(Error::Validation(format!(
                    "generator {}: p_min_mw {} exceeds p_max_mw {}",
                    g.id, g.p_min_mw, g.p_max_mw
                )));
            }
        }
        let mut line_index = HashMap::new();
        for (i, l) in lines.iter().enumerate() {
            if line_index.insert(l.id, i).is_some() {
                return Err(Error::parse("lines", format!("duplicate line id {}", l.id)));
            }
            for (end, bus) in [("from_bus", l.from_bus), ("to_bus", l.to_bus)] {
                if !bus_index.contains_key(&bus) {
                    return Err(Error::Reference(format!(
                        "line {} references absent bus {} in {end}",
                        l.id, bus
                    )));
                }
            }
            if l.from_bus == l.to_bus {
                return Err(Error::Validation(format!(
                    "line {}: from_bus equals to_bus ({})",
                    l.id, l.from_bus
                )));
            }
            if !(l.flow_limit_mw > 0.0) {
                return Err(Error::Validation(format!(
                    "line {}: flow_limit_mw must be positive, got {}",
                    l.id, l.flow_limit_mw
                )));
            }
            if !(l.angle_min_rad < 0.0 && 0.0 < l.angle_max_rad) {
                return Err(Error::Validation(format!(
                    "line {}: angle limits must satisfy angle_min < 0 < angle_max, got [{}, {}]",
                    l.id, l.angle_min_rad, l.angle_max_rad
                )));
            }
            if l.geometry.len() < 2 {
                return Err(Error::Validation(format!(
                    "line {}: geometry needs at least 2 points",
                    l.id
                )));
            }
            if !(l.length() > 0.0) {
                return Err(Error::Validation(format!(
                    "line {}: degenerate geometry with zero total length",
                    l.id
                )));
            }
        }
        let net = Network {
            base_mva,
            buses,
            generators,
            lines,
            bus_index,
            line_index,
        };
        if net.component_count(|_| true) > 1 {
            log::warn!("network is not connected with all lines energized");
        }
        Ok(net)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Dense index of a bus id.
    pub fn bus_idx(&self, id: BusId) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn line_idx(&self, id: LineId) -> Option<usize> {
        self.line_index.get(&id).copied()
    }

    /// MW to per-unit.
    pub fn pu(&self, mw: f64) -> f64 {
        mw / self.base_mva
    }

    /// Per-unit back to MW.
    pub fn mw(&self, pu: f64) -> f64 {
        pu * self.base_mva
    }

    /// Component label per bus, considering only lines accepted by the
    /// filter (by dense line index). Labels are the smallest dense bus
    /// index in each component.
    pub fn components<F: Fn(usize) -> bool>(&self, energized: F) -> Vec<usize> {
        let n = self.buses.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (li, l) in self.lines.iter().enumerate() {
            if energized(li) {
                let a = self.bus_index[&l.from_bus];
                let b = self.bus_index[&l.to_bus];
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut label = vec![usize::MAX; n];
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = start;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = start;
                        stack.push(v);
                    }
                }
            }
        }
        label
    }

    pub fn component_count<F: Fn(usize) -> bool>(&self, energized: F) -> usize {
        let labels = self.components(energized);
        let mut roots: Vec<usize> = labels.clone();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

/// Loads and validates a network file.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_network(&text)
}

/// Parses network JSON from a string.
pub fn parse_network(text: &str) -> Result<Network> {
    serde_json::from_str::<Network>(text).map_err(|e| match find_net_error(text) {
        Some(err) => err,
        None => Error::parse("network file", e.to_string()),
    })
}

// serde_json flattens our TryFrom error into its own message; recover the
// original typed error so callers can match on it.
fn find_net_error(text: &str) -> Option<Error> {
    let file: NetworkFile = serde_json::from_str(text).ok()?;
    Network::try_from(file).err()
}

/// Serializes a network back to its file representation.
pub fn network_to_json(network: &Network) -> String {
    serde_json::to_string_pretty(network).expect("network serialization cannot fail")
}

pub fn save_network(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, network_to_json(network) + "\n")
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Demand lookup covering every (bus, day) in a demand file.
#[derive(Debug, Clone, Default)]
pub struct DemandTable {
    series: Vec<DemandSeries>,
    days: Vec<NaiveDate>,
    by_bus_day: HashMap<(BusId, NaiveDate), usize>,
}

impl DemandTable {
    /// All days present in the file, ascending.
    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn series(&self) -> &[DemandSeries] {
        &self.series
    }

    /// Demand in MW; buses absent from the file have zero demand.
    pub fn demand_mw(&self, bus: BusId, day: NaiveDate, hour: usize) -> f64 {
        self.by_bus_day
            .get(&(bus, day))
            .map(|&i| self.series[i].hourly_mw[hour])
            .unwrap_or(0.0)
    }

    /// Per-bus demand vector (dense bus order) for one hour.
    pub fn bus_demand_mw(&self, network: &Network, day: NaiveDate, hour: usize) -> Vec<f64> {
        network
            .buses
            .iter()
            .map(|b| self.demand_mw(b.id, day, hour))
            .collect()
    }
}

/// Loads a demand CSV (`day,hour,bus,mw`) and checks full 24-hour
/// coverage for every (bus, day) that appears.
pub fn load_demand(path: impl AsRef<Path>, network: &Network) -> Result<DemandTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_demand(&text, network)
}

pub fn parse_demand(text: &str, network: &Network) -> Result<DemandTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse("demand csv", e.to_string()))?
        .clone();
    let expect = ["day", "hour", "bus", "mw"];
    if headers.iter().collect::<Vec<_>>() != expect {
        return Err(Error::parse(
            "demand csv",
            format!("expected header day,hour,bus,mw, got {:?}", headers),
        ));
    }

    // (bus, day) -> [Option<f64>; 24], insertion order retained for output.
    let mut slots: HashMap<(BusId, NaiveDate), [Option<f64>; 24]> = HashMap::new();
    let mut order: Vec<(BusId, NaiveDate)> = Vec::new();
    for (lineno, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse("demand csv", e.to_string()))?;
        let ctx = format!("demand csv record {}", lineno + 2);
        let day: NaiveDate = rec[0]
            .parse()
            .map_err(|_| Error::parse(&ctx, format!("bad date {:?}", &rec[0])))?;
        let hour: usize = rec[1]
            .parse()
            .map_err(|_| Error::parse(&ctx, format!("bad hour {:?}", &rec[1])))?;
        if hour > 23 {
            return Err(Error::parse(&ctx, format!("hour {} outside 0-23", hour)));
        }
        let bus = BusId(
            rec[2]
                .parse()
                .map_err(|_| Error::parse(&ctx, format!("bad bus id {:?}", &rec[2])))?,
        );
        let mw: f64 = rec[3]
            .parse()
            .map_err(|_| Error::parse(&ctx, format!("bad mw value {:?}", &rec[3])))?;
        if network.bus_idx(bus).is_none() {
            return Err(Error::Reference(format!(
                "{}: demand references absent bus {}",
                ctx, bus
            )));
        }
        if mw < 0.0 {
            return Err(Error::Validation(format!(
                "{}: negative demand {} at bus {}",
                ctx, mw, bus
            )));
        }
        let entry = slots.entry((bus, day)).or_insert_with(|| {
            order.push((bus, day));
            [None; 24]
        });
        if entry[hour].is_some() {
            return Err(Error::Validation(format!(
                "duplicate demand entry for bus {} on {} hour {}",
                bus, day, hour
            )));
        }
        entry[hour] = Some(mw);
    }

    let mut series = Vec::with_capacity(order.len());
    order.sort_by_key(|&(bus, day)| (day, bus));
    for (bus, day) in order {
        let slot = &slots[&(bus, day)];
        let mut hourly = [0.0; 24];
        for (h, v) in slot.iter().enumerate() {
            match v {
                Some(mw) => hourly[h] = *mw,
                None => {
                    return Err(Error::Validation(format!(
                        "bus {} on {} is missing hour {}",
                        bus, day, h
                    )))
                }
            }
        }
        series.push(DemandSeries {
            bus,
            day,
            hourly_mw: hourly,
        });
    }

    let mut days: Vec<NaiveDate> = series.iter().map(|s| s.day).collect();
    days.sort_unstable();
    days.dedup();
    let by_bus_day = series
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.bus, s.day), i))
        .collect();
    Ok(DemandTable {
        series,
        days,
        by_bus_day,
    })
}
