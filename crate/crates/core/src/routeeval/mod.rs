//! Evaluation of fixed routes under the stochastic edge model.
//!
//! State of charge (SoC) is propagated along a route as a normal variable:
//! the mean drops by the mean edge energy and the variance grows by the
//! squared edge sigma. The chance constraint at each position is checked on
//! `mean - z(p_e) * sigma` at entry. Charging is deterministic and linear in
//! time.

mod solution;

pub use solution::{
    check_solution, load_solution, save_solution, solution_cost, vehicle_depots, CostReport,
    FeasibilityReport, RouteCost, Solution, Violation,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId, NodeKind};
use crate::stochmath::{quantile, NormalSummary};

/// Slack allowed when comparing SoC values against their bounds.
pub fn soc_tolerance(inst: &Instance) -> f64 {
    1e-9 * inst.vehicle.soc_max.abs().max(1.0)
}

/// One vehicle tour: starts and ends at the same depot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Route {
    pub vehicle_id: usize,
    pub nodes: Vec<NodeId>,
}

impl Route {
    pub fn new(vehicle_id: usize, nodes: Vec<NodeId>) -> Self {
        Self { vehicle_id, nodes }
    }

    pub fn depot(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn interior(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn customers<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = NodeId> + 'a {
        self.interior()
            .iter()
            .copied()
            .filter(|&v| inst.kind(v) == NodeKind::Customer)
    }

    pub fn load(&self, inst: &Instance) -> f64 {
        self.customers(inst).map(|c| inst.node(c).demand).sum()
    }

    /// Positions of station nodes along the route.
    pub fn station_positions(&self, inst: &Instance) -> Vec<usize> {
        (1..self.nodes.len() - 1)
            .filter(|&k| inst.kind(self.nodes[k]) == NodeKind::Station)
            .collect()
    }

    /// Closed at one depot with a nonempty interior free of depots.
    pub(crate) fn shape_error(&self, inst: &Instance) -> Option<String> {
        if self.nodes.iter().any(|v| v.0 >= inst.n()) {
            return Some("unknown node id".into());
        }
        if self.nodes.len() < 3 {
            return Some(
                "route must visit at least one node between depot departure and return".into(),
            );
        }
        let first = self.nodes[0];
        if inst.kind(first) != NodeKind::Depot || *self.nodes.last().unwrap() != first {
            return Some("route must start and end at the same depot".into());
        }
        if let Some(v) = self
            .interior()
            .iter()
            .find(|&&v| inst.kind(v) == NodeKind::Depot)
        {
            return Some(format!("depot {v} inside the route"));
        }
        None
    }

    /// Shape checks plus no repeated nodes and at most `n_max` customers.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let bad = |m: String| {
            Err(Error::Validation(format!(
                "route of vehicle {}: {m}",
                self.vehicle_id
            )))
        };
        if let Some(m) = self.shape_error(inst) {
            return bad(m);
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(v) = self.interior().iter().find(|&&v| !seen.insert(v)) {
            return bad(format!("node {v} visited twice"));
        }
        let nc = self.customers(inst).count();
        if nc > inst.vehicle.n_max {
            return bad(format!(
                "{nc} customers exceed n_max {}",
                inst.vehicle.n_max
            ));
        }
        Ok(())
    }
}

/// Charging time per station position along a route.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargingPlan {
    pub tau: BTreeMap<usize, f64>,
}

impl ChargingPlan {
    pub fn total(&self) -> f64 {
        self.tau.values().sum()
    }

    pub fn at(&self, position: usize) -> f64 {
        self.tau.get(&position).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, route: &Route, inst: &Instance) -> Result<()> {
        for (&k, &t) in &self.tau {
            if k == 0
                || k + 1 >= route.nodes.len()
                || inst.kind(route.nodes[k]) != NodeKind::Station
            {
                return Err(Error::Plan(format!(
                    "charging time at position {k}, which is not a station visit"
                )));
            }
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Plan(format!(
                    "invalid charging time {t} at position {k}"
                )));
            }
        }
        Ok(())
    }
}

/// SoC statistics at one route position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocPoint {
    pub enter_mu: f64,
    pub exit_mu: f64,
    /// Accumulated energy variance from the depot to this position.
    pub var: f64,
    /// `enter_mu - z(p_e) * sqrt(var)`.
    pub robust_enter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocProfile {
    pub points: Vec<SocPoint>,
}

pub fn propagate_soc(route: &Route, plan: &ChargingPlan, inst: &Instance) -> Result<SocProfile> {
    route.validate(inst)?;
    soc_profile(route, plan, inst)
}

/// Propagation for a route whose shape is already known to be valid.
pub(crate) fn soc_profile(
    route: &Route,
    plan: &ChargingPlan,
    inst: &Instance,
) -> Result<SocProfile> {
    plan.validate(route, inst)?;
    let z = quantile(inst.robustness.p_e)?;
    let v = &inst.vehicle;
    let tol = soc_tolerance(inst);
    let mut points = Vec::with_capacity(route.nodes.len());
    points.push(SocPoint {
        enter_mu: v.soc_start,
        exit_mu: v.soc_start,
        var: 0.0,
        robust_enter: v.soc_start,
    });
    for k in 1..route.nodes.len() {
        let (i, j) = (route.nodes[k - 1], route.nodes[k]);
        let prev = points[k - 1];
        let enter_mu = prev.exit_mu - inst.e_mu(i, j);
        let var = prev.var + inst.e_var(i, j);
        let exit_mu = enter_mu + plan.at(k) * v.charge_rate;
        if exit_mu > v.soc_max + tol {
            return Err(Error::Plan(format!(
                "SoC {exit_mu} after charging at position {k} exceeds soc_max {}",
                v.soc_max
            )));
        }
        points.push(SocPoint {
            enter_mu,
            exit_mu,
            var,
            robust_enter: enter_mu - z * var.sqrt(),
        });
    }
    Ok(SocProfile { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyCheck {
    pub feasible: bool,
    pub first_violation: Option<usize>,
}

/// Robust entry SoC must stay at or above `soc_min` at every position after
/// the departure, the depot return included.
pub fn check_energy_feasible(profile: &SocProfile, inst: &Instance) -> EnergyCheck {
    let floor = inst.vehicle.soc_min - soc_tolerance(inst);
    let first_violation = profile
        .points
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, p)| p.robust_enter < floor)
        .map(|(k, _)| k);
    EnergyCheck {
        feasible: first_violation.is_none(),
        first_violation,
    }
}

/// Minimum total charging time that keeps the route robustly feasible.
///
/// Every optimal plan buys the same energy: the largest cumulative
/// requirement along the route. This one charges just in time: at each
/// station only what is needed to reach the next station (or the depot),
/// which also keeps every exit SoC as low as possible.
pub fn optimize_charging(route: &Route, inst: &Instance) -> Result<ChargingPlan> {
    route.validate(inst)?;
    let z = quantile(inst.robustness.p_e)?;
    let v = &inst.vehicle;
    let tol = soc_tolerance(inst);
    let len = route.nodes.len();

    // need[k]: cumulative charge that must be bought before entering k.
    let mut need = vec![f64::NEG_INFINITY; len];
    let mut consumed = vec![0.0; len];
    let (mut e, mut var) = (0.0, 0.0);
    for k in 1..len {
        let (i, j) = (route.nodes[k - 1], route.nodes[k]);
        e += inst.e_mu(i, j);
        var += inst.e_var(i, j);
        consumed[k] = e;
        need[k] = v.soc_min + e + z * var.sqrt() - v.soc_start;
    }
    let stations = route.station_positions(inst);
    let first = stations.first().copied().unwrap_or(len - 1);
    if let Some(k) = (1..=first).find(|&k| need[k] > tol) {
        return Err(Error::InfeasibleRoute(format!(
            "robust SoC falls below soc_min at position {k} before any charging opportunity"
        )));
    }
    let mut plan = ChargingPlan::default();
    let mut bought: f64 = 0.0;
    for (m, &s) in stations.iter().enumerate() {
        let next = stations.get(m + 1).copied().unwrap_or(len - 1);
        let required = need[s + 1..=next]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let cap = v.soc_max - v.soc_start + consumed[s];
        let mut target = bought.max(required);
        if target > cap {
            if target > cap + tol {
                return Err(Error::InfeasibleRoute(format!(
                    "station at position {s} cannot supply enough energy to reach position {next}"
                )));
            }
            target = cap;
        }
        plan.tau.insert(s, (target - bought) / v.charge_rate);
        bought = target;
    }
    Ok(plan)
}

/// Travel-time distribution of a route plus its robust cost
/// `mu + z(p_t) * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TourTime {
    pub time: NormalSummary,
    pub robust_cost: f64,
}

pub fn tour_time(route: &Route, plan: &ChargingPlan, inst: &Instance) -> Result<TourTime> {
    let z = quantile(inst.robustness.p_t)?;
    let mut time = NormalSummary::ZERO;
    for k in 1..route.nodes.len() {
        let (i, j) = (route.nodes[k - 1], route.nodes[k]);
        time = time + NormalSummary::new(inst.t_mu(i, j) + plan.at(k), inst.t_var(i, j));
    }
    Ok(TourTime {
        time,
        robust_cost: time.mu + z * time.sigma(),
    })
}

/// Charging plan and cost of a route, or the reason it is infeasible.
pub fn evaluate_route(route: &Route, inst: &Instance) -> Result<(ChargingPlan, TourTime)> {
    let plan = optimize_charging(route, inst)?;
    let tt = tour_time(route, &plan, inst)?;
    Ok((plan, tt))
}
