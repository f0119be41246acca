//! Reader for the EVRP benchmark file format: a `KEY: value` header followed
//! by `NODE_COORD_SECTION`, `DEMAND_SECTION`, `STATIONS_COORD_SECTION` and
//! `DEPOT_SECTION`.
//!
//! Station coordinates may be given inline (`id x y`) in the stations
//! section, or listed by id only when the coordinate section already holds
//! them. Distances are full-precision Euclidean.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    euclidean, materialize_station_copies, EdgeMatrices, Instance, Node, NodeKind,
    RobustnessParams, VehicleSpec,
};
use crate::error::{Error, Result};

/// Model parameters the benchmark format does not carry.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub charge_rate: f64,
    pub station_copies: usize,
    pub robustness: RobustnessParams,
    /// Customer limit per tour; `None` means unlimited.
    pub n_max: Option<usize>,
    pub soc_min: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            charge_rate: 1.0,
            station_copies: super::DEFAULT_STATION_COPIES,
            robustness: RobustnessParams::default(),
            n_max: None,
            soc_min: 0.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Demand,
    Stations,
    Depots,
}

fn number<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("invalid {what} `{tok}`")))
}

pub fn parse_benchmark(text: &str, opts: &ParseOptions) -> Result<Instance> {
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut coords: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut coord_order: Vec<usize> = Vec::new();
    let mut demands: BTreeMap<usize, f64> = BTreeMap::new();
    let mut station_ids: Vec<usize> = Vec::new();
    let mut depot_ids: Vec<usize> = Vec::new();
    let mut section = Section::Header;
    let mut first_section_line = 0usize;
    let mut last_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        let next = match upper.as_str() {
            "NODE_COORD_SECTION" => Some(Section::Coords),
            "DEMAND_SECTION" => Some(Section::Demand),
            "STATIONS_COORD_SECTION" => Some(Section::Stations),
            "DEPOT_SECTION" => Some(Section::Depots),
            "EOF" => break,
            _ => None,
        };
        if let Some(s) = next {
            if section == Section::Header {
                first_section_line = line_no;
            }
            section = s;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Header => {
                let (key, value) = line.split_once(':').ok_or_else(|| {
                    Error::parse(line_no, format!("expected `KEY: value`, got `{line}`"))
                })?;
                header.insert(
                    key.trim().to_ascii_uppercase(),
                    (line_no, value.trim().to_string()),
                );
            }
            Section::Coords => {
                if toks.len() != 3 {
                    return Err(Error::parse(line_no, "coordinate line needs `id x y`"));
                }
                let id: usize = number(toks[0], line_no, "node id")?;
                let xy = (
                    number(toks[1], line_no, "x")?,
                    number(toks[2], line_no, "y")?,
                );
                if coords.insert(id, xy).is_some() {
                    return Err(Error::parse(line_no, format!("duplicate node {id}")));
                }
                coord_order.push(id);
            }
            Section::Demand => {
                if toks.len() != 2 {
                    return Err(Error::parse(line_no, "demand line needs `id demand`"));
                }
                let id: usize = number(toks[0], line_no, "node id")?;
                demands.insert(id, number(toks[1], line_no, "demand")?);
            }
            Section::Stations => {
                let id: usize = number(toks[0], line_no, "station id")?;
                match toks.len() {
                    1 => {}
                    3 => {
                        let xy = (
                            number(toks[1], line_no, "x")?,
                            number(toks[2], line_no, "y")?,
                        );
                        if coords.insert(id, xy).is_none() {
                            coord_order.push(id);
                        }
                    }
                    _ => return Err(Error::parse(line_no, "station line needs `id` or `id x y`")),
                }
                station_ids.push(id);
            }
            Section::Depots => {
                let id: i64 = number(toks[0], line_no, "depot id")?;
                if id < 0 {
                    section = Section::Header;
                    continue;
                }
                depot_ids.push(id as usize);
            }
        }
    }

    let key_line = if first_section_line > 0 {
        first_section_line
    } else {
        last_line
    };
    let get = |k: &str| -> Result<(usize, &str)> {
        header
            .get(k)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| Error::parse(key_line, format!("missing mandatory header key {k}")))
    };
    let (l, v) = get("DIMENSION")?;
    let dimension: usize = number(v, l, "DIMENSION")?;
    let (l, v) = get("CAPACITY")?;
    let capacity: f64 = number(v, l, "CAPACITY")?;
    let (l, v) = get("ENERGY_CAPACITY")?;
    let energy_capacity: f64 = number(v, l, "ENERGY_CAPACITY")?;
    let (l, v) = get("ENERGY_CONSUMPTION")?;
    let consumption: f64 = number(v, l, "ENERGY_CONSUMPTION")?;
    let (l, v) = get("VEHICLES")?;
    let vehicles: usize = number(v, l, "VEHICLES")?;
    let declared_stations = match header.get("STATIONS") {
        Some((l, v)) => Some(number::<usize>(v, *l, "STATIONS")?),
        None => None,
    };
    let reference_cost = match header.get("OPTIMAL_VALUE") {
        Some((l, v)) => Some(number::<f64>(v, *l, "OPTIMAL_VALUE")?),
        None => None,
    };
    let name = header
        .get("NAME")
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| "unnamed".to_string());

    if let Some(s) = declared_stations {
        if s != station_ids.len() {
            return Err(Error::parse(
                key_line,
                format!("STATIONS is {s} but {} stations listed", station_ids.len()),
            ));
        }
    }
    if depot_ids.is_empty() {
        return Err(Error::parse(last_line, "DEPOT_SECTION lists no depot"));
    }
    let station_set: BTreeSet<usize> = station_ids.iter().copied().collect();
    let core_ids: Vec<usize> = coord_order
        .iter()
        .copied()
        .filter(|id| !station_set.contains(id) || depot_ids.contains(id))
        .collect();
    if core_ids.len() != dimension {
        return Err(Error::parse(
            key_line,
            format!(
                "DIMENSION is {dimension} but {} depot/customer coordinates found",
                core_ids.len()
            ),
        ));
    }
    for id in &core_ids {
        if !depot_ids.contains(id) && !demands.contains_key(id) {
            return Err(Error::parse(
                key_line,
                format!("customer {id} has no demand entry"),
            ));
        }
    }
    for id in station_ids.iter().chain(depot_ids.iter()) {
        if !coords.contains_key(id) {
            return Err(Error::parse(
                key_line,
                format!("node {id} has no coordinates"),
            ));
        }
    }

    // Depots and customers first (file order), then stations (listed order).
    // A depot also listed as a station gets a co-located station node.
    let mut nodes = Vec::new();
    let mut positions = Vec::new();
    let per_depot = vehicles / depot_ids.len();
    let extra = vehicles % depot_ids.len();
    for &fid in &core_ids {
        let pos = coords[&fid];
        let idx = nodes.len();
        let node = if let Some(d) = depot_ids.iter().position(|&x| x == fid) {
            Node::depot(idx, Some(pos), per_depot + usize::from(d < extra))
        } else {
            Node::customer(idx, Some(pos), demands[&fid])
        };
        nodes.push(node);
        positions.push(pos);
    }
    for &fid in &station_ids {
        let pos = coords[&fid];
        nodes.push(Node::station(nodes.len(), Some(pos)));
        positions.push(pos);
    }
    let n_customers = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Customer)
        .count();

    let mut edges = EdgeMatrices::deterministic(euclidean(&positions), consumption);
    materialize_station_copies(&mut nodes, &mut edges, opts.station_copies);
    let inst = Instance {
        name,
        nodes,
        edges,
        vehicle: VehicleSpec {
            capacity,
            soc_max: energy_capacity,
            soc_min: opts.soc_min,
            soc_start: energy_capacity,
            n_max: opts.n_max.unwrap_or(n_customers.max(1)),
            charge_rate: opts.charge_rate,
        },
        robustness: opts.robustness,
        station_copies: opts.station_copies,
        reference_cost,
    };
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::NodeId;

    const SMALL: &str = "\
NAME: unit-5
TYPE: EVRP
VEHICLES: 2
DIMENSION: 5
STATIONS: 1
CAPACITY: 10
ENERGY_CAPACITY: 50
ENERGY_CONSUMPTION: 1.5
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 0 0
2 1 0
3 0 1
4 -1 0
5 0 -1
6 1 1
DEMAND_SECTION
1 0
2 3
3 4
4 2
5 5
STATIONS_COORD_SECTION
6
DEPOT_SECTION
1
-1
EOF
";

    #[test]
    fn parses_small_file() {
        let inst = parse_benchmark(SMALL, &ParseOptions::default()).unwrap();
        assert_eq!(inst.name, "unit-5");
        // 5 depot/customer nodes, 1 station, 1 extra copy.
        assert_eq!(inst.n(), 7);
        assert_eq!(inst.depots(), vec![NodeId(0)]);
        assert_eq!(inst.customers().len(), 4);
        assert_eq!(inst.stations(), vec![NodeId(5), NodeId(6)]);
        assert_eq!(inst.total_vehicles(), 2);
        assert!(inst.edges.t_mu.is_symmetric());
        assert_eq!(inst.t_mu(NodeId(0), NodeId(1)), 1.0);
        assert_eq!(inst.t_mu(NodeId(1), NodeId(2)), 2f64.sqrt());
        assert_eq!(inst.e_mu(NodeId(0), NodeId(1)), 1.5);
        assert!(inst.edges.t_sigma.values().iter().all(|&s| s == 0.0));
        assert_eq!(inst.vehicle.soc_max, 50.0);
        assert_eq!(inst.vehicle.soc_start, 50.0);
    }

    #[test]
    fn inline_station_coordinates() {
        let text = SMALL.replace("6 1 1\n", "").replace(
            "STATIONS_COORD_SECTION\n6\n",
            "STATIONS_COORD_SECTION\n6 1 1\n",
        );
        let a = parse_benchmark(&text, &ParseOptions::default()).unwrap();
        let b = parse_benchmark(SMALL, &ParseOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_capacity_reports_line() {
        let text = SMALL.replace("CAPACITY: 10\n", "");
        match parse_benchmark(&text, &ParseOptions::default()) {
            Err(Error::Parse { line, message }) => {
                assert!(message.contains("CAPACITY"), "{message}");
                assert_eq!(line, 9);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn oversized_demand_is_validation_error() {
        let text = SMALL.replace("5 5\n", "5 11\n");
        assert!(matches!(
            parse_benchmark(&text, &ParseOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let text = SMALL.replace("DIMENSION: 5", "DIMENSION: 6");
        assert!(matches!(
            parse_benchmark(&text, &ParseOptions::default()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bad_number_reports_its_line() {
        let text = SMALL.replace("3 0 1\n", "3 zero 1\n");
        match parse_benchmark(&text, &ParseOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
