//! Whole-solution cost, feasibility checking and the solution document.
//!
//! ```text
//! RECVRP-SOLUTION 1
//! instance <name>
//! routes <count>
//! route <vehicle_id> <node> <node> ...
//! charge <position>:<tau> ...        (`charge -` when empty)
//! cost <t_mu> <t_var> <robust>
//! ...
//! total <per_route_sum> <global> <mean_time>
//! end
//! ```
//!
//! Reals use shortest round-trip decimal form.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{check_energy_feasible, soc_profile, tour_time, ChargingPlan, Route};
use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId, NodeKind};
use crate::stochmath::quantile;

pub const MAGIC: &str = "RECVRP-SOLUTION";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteCost {
    pub t_mu: f64,
    pub t_var: f64,
    pub robust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub routes: Vec<RouteCost>,
    /// Sum of per-route robust costs; the reported objective.
    pub per_route_sum: f64,
    /// Total mean plus one quantile term over the pooled variance.
    pub global: f64,
    pub mean_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub plans: Vec<ChargingPlan>,
    pub cost_report: CostReport,
}

impl Solution {
    /// Assembles a solution and computes its cost report.
    pub fn new(routes: Vec<Route>, plans: Vec<ChargingPlan>, inst: &Instance) -> Result<Self> {
        if routes.len() != plans.len() {
            return Err(Error::Validation(format!(
                "{} routes but {} charging plans",
                routes.len(),
                plans.len()
            )));
        }
        let cost_report = route_costs(&routes, &plans, inst)?;
        Ok(Self {
            routes,
            plans,
            cost_report,
        })
    }

    /// Recomputes the cost report from routes and plans.
    pub fn refresh_cost(&mut self, inst: &Instance) -> Result<()> {
        self.cost_report = route_costs(&self.routes, &self.plans, inst)?;
        Ok(())
    }

    pub fn cost(&self) -> f64 {
        self.cost_report.per_route_sum
    }
}

fn route_costs(routes: &[Route], plans: &[ChargingPlan], inst: &Instance) -> Result<CostReport> {
    let z = quantile(inst.robustness.p_t)?;
    let mut out = Vec::with_capacity(routes.len());
    for (r, p) in routes.iter().zip(plans) {
        r.validate(inst)?;
        let tt = tour_time(r, p, inst)?;
        out.push(RouteCost {
            t_mu: tt.time.mu,
            t_var: tt.time.var,
            robust: tt.robust_cost,
        });
    }
    let mean_time: f64 = out.iter().map(|c| c.t_mu).sum();
    let var: f64 = out.iter().map(|c| c.t_var).sum();
    Ok(CostReport {
        per_route_sum: out.iter().map(|c| c.robust).sum(),
        global: mean_time + z * var.sqrt(),
        mean_time,
        routes: out,
    })
}

pub fn solution_cost(sol: &Solution, inst: &Instance) -> Result<CostReport> {
    route_costs(&sol.routes, &sol.plans, inst)
}

/// Depot of every vehicle: depots in node order, each contributing
/// `vehicles_at` consecutive vehicle ids.
pub fn vehicle_depots(inst: &Instance) -> Vec<NodeId> {
    inst.depots()
        .into_iter()
        .flat_map(|d| std::iter::repeat(d).take(inst.node(d).vehicles_at))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    PlanCount {
        routes: usize,
        plans: usize,
    },
    Structure {
        vehicle: usize,
        message: String,
    },
    UnknownVehicle {
        vehicle: usize,
    },
    DuplicateVehicle {
        vehicle: usize,
    },
    WrongDepot {
        vehicle: usize,
        expected: NodeId,
        found: NodeId,
    },
    DepotRouteCount {
        depot: NodeId,
        expected: usize,
        found: usize,
    },
    CustomerUnvisited(NodeId),
    CustomerRepeated {
        customer: NodeId,
        visits: usize,
    },
    StationReused {
        station: NodeId,
        visits: usize,
    },
    TooManyCustomers {
        vehicle: usize,
        count: usize,
        n_max: usize,
    },
    Capacity {
        vehicle: usize,
        load: f64,
        capacity: f64,
    },
    Plan {
        vehicle: usize,
        message: String,
    },
    Energy {
        vehicle: usize,
        position: usize,
        robust_soc: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PlanCount { routes, plans } => write!(f, "{routes} routes but {plans} charging plans"),
            Violation::Structure { vehicle, message } => write!(f, "vehicle {vehicle}: malformed route: {message}"),
            Violation::UnknownVehicle { vehicle } => write!(f, "vehicle {vehicle} does not exist"),
            Violation::DuplicateVehicle { vehicle } => write!(f, "vehicle {vehicle} has more than one route"),
            Violation::WrongDepot { vehicle, expected, found } => {
                write!(f, "vehicle {vehicle} starts at depot {found}, expected {expected}")
            }
            Violation::DepotRouteCount { depot, expected, found } => {
                write!(f, "depot {depot}: {found} routes, expected {expected}")
            }
            Violation::CustomerUnvisited(c) => write!(f, "customer unvisited: {c}"),
            Violation::CustomerRepeated { customer, visits } => {
                write!(f, "customer visited more than once: {customer} ({visits} visits)")
            }
            Violation::StationReused { station, visits } => {
                write!(f, "station node entered more than once: {station} ({visits} visits)")
            }
            Violation::TooManyCustomers { vehicle, count, n_max } => {
                write!(f, "vehicle {vehicle}: {count} customers exceed n_max {n_max}")
            }
            Violation::Capacity { vehicle, load, capacity } => {
                write!(f, "vehicle {vehicle}: capacity exceeded, load {load} > {capacity}")
            }
            Violation::Plan { vehicle, message } => write!(f, "vehicle {vehicle}: invalid charging plan: {message}"),
            Violation::Energy {
                vehicle,
                position,
                robust_soc,
            } => write!(
                f,
                "vehicle {vehicle}: robust SoC {robust_soc} below soc_min at route position {position}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "feasible");
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        Ok(())
    }
}

/// Checks every structural, capacity and robust energy constraint. Never
/// fails: problems are reported as violations.
pub fn check_solution(sol: &Solution, inst: &Instance) -> FeasibilityReport {
    let mut out = Vec::new();
    if sol.routes.len() != sol.plans.len() {
        out.push(Violation::PlanCount {
            routes: sol.routes.len(),
            plans: sol.plans.len(),
        });
    }
    let fleet = vehicle_depots(inst);
    let mut used_vehicle = vec![false; fleet.len()];
    let mut per_depot: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut visits: BTreeMap<NodeId, usize> = BTreeMap::new();
    let empty = ChargingPlan::default();
    for (k, route) in sol.routes.iter().enumerate() {
        let vehicle = route.vehicle_id;
        match fleet.get(vehicle) {
            None => out.push(Violation::UnknownVehicle { vehicle }),
            Some(_) if used_vehicle[vehicle] => out.push(Violation::DuplicateVehicle { vehicle }),
            Some(&expected) => {
                used_vehicle[vehicle] = true;
                if let Some(&found) = route.nodes.first() {
                    if found != expected {
                        out.push(Violation::WrongDepot {
                            vehicle,
                            expected,
                            found,
                        });
                    }
                }
            }
        }
        if route.nodes.iter().any(|v| v.0 >= inst.n()) {
            out.push(Violation::Structure {
                vehicle,
                message: "unknown node id".into(),
            });
            continue;
        }
        for &v in route
            .nodes
            .iter()
            .skip(1)
            .take(route.nodes.len().saturating_sub(2))
        {
            if inst.kind(v) != NodeKind::Depot {
                *visits.entry(v).or_default() += 1;
            }
        }
        if let Some(&d) = route.nodes.first() {
            if inst.kind(d) == NodeKind::Depot {
                *per_depot.entry(d).or_default() += 1;
            }
        }
        let count = route
            .nodes
            .iter()
            .filter(|&&v| inst.kind(v) == NodeKind::Customer)
            .count();
        if count > inst.vehicle.n_max {
            out.push(Violation::TooManyCustomers {
                vehicle,
                count,
                n_max: inst.vehicle.n_max,
            });
        }
        let load: f64 = route
            .nodes
            .iter()
            .filter(|&&v| inst.kind(v) == NodeKind::Customer)
            .map(|&v| inst.node(v).demand)
            .sum();
        if load > inst.vehicle.capacity + 1e-9 {
            out.push(Violation::Capacity {
                vehicle,
                load,
                capacity: inst.vehicle.capacity,
            });
        }
        if let Some(message) = route.shape_error(inst) {
            out.push(Violation::Structure { vehicle, message });
            continue;
        }
        let plan = sol.plans.get(k).unwrap_or(&empty);
        match soc_profile(route, plan, inst) {
            Err(e) => out.push(Violation::Plan {
                vehicle,
                message: match e {
                    Error::Plan(m) => m,
                    other => other.to_string(),
                },
            }),
            Ok(profile) => {
                let chk = check_energy_feasible(&profile, inst);
                if let Some(position) = chk.first_violation {
                    out.push(Violation::Energy {
                        vehicle,
                        position,
                        robust_soc: profile.points[position].robust_enter,
                    });
                }
            }
        }
    }
    for d in inst.depots() {
        let expected = inst.node(d).vehicles_at;
        let found = per_depot.get(&d).copied().unwrap_or(0);
        if found != expected {
            out.push(Violation::DepotRouteCount {
                depot: d,
                expected,
                found,
            });
        }
    }
    for c in inst.customers() {
        match visits.get(&c).copied().unwrap_or(0) {
            0 => out.push(Violation::CustomerUnvisited(c)),
            1 => {}
            n => out.push(Violation::CustomerRepeated {
                customer: c,
                visits: n,
            }),
        }
    }
    for s in inst.stations() {
        let n = visits.get(&s).copied().unwrap_or(0);
        if n > 1 {
            out.push(Violation::StationReused {
                station: s,
                visits: n,
            });
        }
    }
    FeasibilityReport { violations: out }
}

pub fn save_solution(sol: &Solution, instance_name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "instance {instance_name}");
    let _ = writeln!(out, "routes {}", sol.routes.len());
    let empty = ChargingPlan::default();
    for (k, r) in sol.routes.iter().enumerate() {
        let nodes: Vec<String> = r.nodes.iter().map(|v| v.0.to_string()).collect();
        let _ = writeln!(out, "route {} {}", r.vehicle_id, nodes.join(" "));
        let plan = sol.plans.get(k).unwrap_or(&empty);
        if plan.tau.is_empty() {
            out.push_str("charge -\n");
        } else {
            let taus: Vec<String> = plan.tau.iter().map(|(p, t)| format!("{p}:{t}")).collect();
            let _ = writeln!(out, "charge {}", taus.join(" "));
        }
        if let Some(c) = sol.cost_report.routes.get(k) {
            let _ = writeln!(out, "cost {} {} {}", c.t_mu, c.t_var, c.robust);
        }
    }
    let c = &sol.cost_report;
    let _ = writeln!(
        out,
        "total {} {} {}",
        c.per_route_sum, c.global, c.mean_time
    );
    out.push_str("end\n");
    out
}

/// Parses a solution document. Returns the instance name recorded in it.
pub fn load_solution(text: &str) -> Result<(String, Solution)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    let mut last = 0;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        match lines.next() {
            Some((no, l)) => {
                last = no;
                Ok((no, l))
            }
            None => Err(Error::parse(
                last + 1,
                format!("unexpected end of document, expected {what}"),
            )),
        }
    };
    let (no, head) = next("header")?;
    let version = head
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::parse(no, "not a recvrp solution document"))?;
    if version != VERSION.to_string() {
        return Err(Error::parse(
            no,
            format!("unsupported solution format version `{version}` (expected {VERSION})"),
        ));
    }
    let (no, l) = next("instance")?;
    let name = l
        .strip_prefix("instance ")
        .ok_or_else(|| Error::parse(no, "expected `instance <name>`"))?
        .to_string();
    let (no, l) = next("routes")?;
    let count: usize = l
        .strip_prefix("routes ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::parse(no, "expected `routes <count>`"))?;
    let num = |tok: &str, no: usize| -> Result<f64> {
        tok.parse()
            .map_err(|_| Error::parse(no, format!("invalid number `{tok}`")))
    };
    let int = |tok: &str, no: usize| -> Result<usize> {
        tok.parse()
            .map_err(|_| Error::parse(no, format!("invalid integer `{tok}`")))
    };
    let mut routes = Vec::with_capacity(count);
    let mut plans = Vec::with_capacity(count);
    let mut costs = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, l) = next("route")?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.first() != Some(&"route") || t.len() < 2 {
            return Err(Error::parse(no, "expected `route <vehicle> <nodes...>`"));
        }
        let vehicle = int(t[1], no)?;
        let nodes = t[2..]
            .iter()
            .map(|s| int(s, no).map(NodeId))
            .collect::<Result<Vec<_>>>()?;
        routes.push(Route::new(vehicle, nodes));

        let (no, l) = next("charge")?;
        let rest = l
            .strip_prefix("charge ")
            .ok_or_else(|| Error::parse(no, "expected `charge ...`"))?;
        let mut plan = ChargingPlan::default();
        if rest.trim() != "-" {
            for tok in rest.split_whitespace() {
                let (p, t) = tok.split_once(':').ok_or_else(|| {
                    Error::parse(no, format!("expected `<position>:<tau>`, got `{tok}`"))
                })?;
                plan.tau.insert(int(p, no)?, num(t, no)?);
            }
        }
        plans.push(plan);

        let (no, l) = next("cost")?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 4 || t[0] != "cost" {
            return Err(Error::parse(no, "expected `cost <t_mu> <t_var> <robust>`"));
        }
        costs.push(RouteCost {
            t_mu: num(t[1], no)?,
            t_var: num(t[2], no)?,
            robust: num(t[3], no)?,
        });
    }
    let (no, l) = next("total")?;
    let t: Vec<&str> = l.split_whitespace().collect();
    if t.len() != 4 || t[0] != "total" {
        return Err(Error::parse(
            no,
            "expected `total <per_route_sum> <global> <mean_time>`",
        ));
    }
    let cost_report = CostReport {
        routes: costs,
        per_route_sum: num(t[1], no)?,
        global: num(t[2], no)?,
        mean_time: num(t[3], no)?,
    };
    let (no, l) = next("end")?;
    if l != "end" {
        return Err(Error::parse(no, "expected `end`"));
    }
    Ok((
        name,
        Solution {
            routes,
            plans,
            cost_report,
        },
    ))
}
