//! Shared in-memory fixtures for unit tests.

use chrono::NaiveDate;

use crate::net::{parse_network, Network};

pub(crate) fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub(crate) fn two_bus() -> Network {
    parse_network(
        r#"{
        "base_mva": 100.0,
        "buses": [{"id": 1, "name": "gen"}, {"id": 2, "name": "load"}],
        "generators": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 100.0}],
        "lines": [
            {"id": 1, "from_bus": 1, "to_bus": 2, "susceptance_b": -10.0,
             "flow_limit_mw": 100.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
             "geometry": [[0.5, 0.5], [2.5, 0.5]]}
        ]
    }"#,
    )
    .unwrap()
}

/// Gen at bus 1, 50 MW load at bus 3; direct line 1-3 plus the detour
/// 1-2-3 whose second leg is limited to 30 MW.
pub(crate) fn triangle() -> Network {
    parse_network(
        r#"{
        "base_mva": 100.0,
        "buses": [{"id": 1, "name": "g"}, {"id": 2, "name": "mid"}, {"id": 3, "name": "load"}],
        "generators": [{"id": 1, "bus": 1, "p_min_mw": 0.0, "p_max_mw": 100.0}],
        "lines": [
            {"id": 1, "from_bus": 1, "to_bus": 2, "susceptance_b": -10.0,
             "flow_limit_mw": 100.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
             "geometry": [[0.0, 0.0], [1.0, 1.0]]},
            {"id": 2, "from_bus": 2, "to_bus": 3, "susceptance_b": -10.0,
             "flow_limit_mw": 30.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
             "geometry": [[1.0, 1.0], [2.0, 0.0]]},
            {"id": 3, "from_bus": 1, "to_bus": 3, "susceptance_b": -10.0,
             "flow_limit_mw": 100.0, "angle_min_rad": -0.5236, "angle_max_rad": 0.5236,
             "geometry": [[0.0, 0.0], [2.0, 0.0]]}
        ]
    }"#,
    )
    .unwrap()
}

/// Constant demand at the given (bus, MW) pairs for all 24 hours.
pub(crate) fn constant_demand(net: &Network, loads: &[(u32, f64)], day: &str) -> crate::net::DemandTable {
    let mut csv = String::from("day,hour,bus,mw\n");
    for h in 0..24 {
        for (bus, mw) in loads {
            csv.push_str(&format!("{day},{h},{bus},{mw}\n"));
        }
    }
    crate::net::parse_demand(&csv, net).unwrap()
}
