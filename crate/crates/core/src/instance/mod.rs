//! Problem data model: nodes, stochastic edge matrices, vehicle and
//! robustness parameters.
//!
//! Charging stations may be materialized as several virtual copies of one
//! physical station. Every copy is its own node (visitable at most once) and
//! shares all edge data with its physical original.

mod benchmark;
mod generate;
mod native;

pub use benchmark::{parse_benchmark, ParseOptions};
pub use generate::{
    generate_random, make_stochastic, parse_scenario_name, scenario_name, GeneratorParams, RelSigma,
};
pub use native::{load, save, MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Default number of virtual copies per physical station.
pub const DEFAULT_STATION_COPIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Depot,
    Customer,
    Station,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Depot => "depot",
            NodeKind::Customer => "customer",
            NodeKind::Station => "station",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "depot" => Some(NodeKind::Depot),
            "customer" => Some(NodeKind::Customer),
            "station" => Some(NodeKind::Station),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Option<(f64, f64)>,
    pub demand: f64,
    pub vehicles_at: usize,
    /// For a virtual station copy, the physical station it duplicates.
    pub copy_of: Option<NodeId>,
}

impl Node {
    pub fn depot(id: usize, position: Option<(f64, f64)>, vehicles: usize) -> Self {
        Self {
            id: NodeId(id),
            kind: NodeKind::Depot,
            position,
            demand: 0.0,
            vehicles_at: vehicles,
            copy_of: None,
        }
    }

    pub fn customer(id: usize, position: Option<(f64, f64)>, demand: f64) -> Self {
        Self {
            id: NodeId(id),
            kind: NodeKind::Customer,
            position,
            demand,
            vehicles_at: 0,
            copy_of: None,
        }
    }

    pub fn station(id: usize, position: Option<(f64, f64)>) -> Self {
        Self {
            id: NodeId(id),
            kind: NodeKind::Station,
            position,
            demand: 0.0,
            vehicles_at: 0,
            copy_of: None,
        }
    }
}

/// Per-edge mean and standard deviation of travel time and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMatrices {
    pub t_mu: SquareMatrix,
    pub t_sigma: SquareMatrix,
    pub e_mu: SquareMatrix,
    pub e_sigma: SquareMatrix,
}

impl EdgeMatrices {
    /// Deterministic matrices from a time matrix and an energy-per-time factor.
    pub fn deterministic(t_mu: SquareMatrix, energy_per_unit: f64) -> Self {
        let n = t_mu.dim();
        let e_mu = t_mu.map(|t| t * energy_per_unit);
        Self {
            t_mu,
            t_sigma: SquareMatrix::zeros(n),
            e_mu,
            e_sigma: SquareMatrix::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.t_mu.dim()
    }

    fn all(&self) -> [(&'static str, &SquareMatrix); 4] {
        [
            ("t_mu", &self.t_mu),
            ("t_sigma", &self.t_sigma),
            ("e_mu", &self.e_mu),
            ("e_sigma", &self.e_sigma),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub capacity: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    pub soc_start: f64,
    /// Maximum number of customers on one tour.
    pub n_max: usize,
    /// Energy gained per unit of charging time.
    pub charge_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessParams {
    pub p_e: f64,
    pub p_t: f64,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        Self {
            p_e: 0.999,
            p_t: 0.9,
        }
    }
}

impl RobustnessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_e > 0.5 && self.p_e < 1.0) {
            return Err(Error::Validation(format!(
                "p_e must lie in (0.5, 1), got {}",
                self.p_e
            )));
        }
        if !(self.p_t >= 0.5 && self.p_t < 1.0) {
            return Err(Error::Validation(format!(
                "p_t must lie in [0.5, 1), got {}",
                self.p_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: EdgeMatrices,
    pub vehicle: VehicleSpec,
    pub robustness: RobustnessParams,
    pub station_copies: usize,
    /// Best known cost carried over from a benchmark file, if any.
    pub reference_cost: Option<f64>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.0].kind
    }

    fn ids_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.kind == kind)
            .map(|n| n.id)
    }

    pub fn depots(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Depot).collect()
    }

    pub fn customers(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Customer).collect()
    }

    pub fn stations(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Station).collect()
    }

    /// Physical station a node stands for (itself unless it is a copy).
    pub fn physical(&self, id: NodeId) -> NodeId {
        self.nodes[id.0].copy_of.unwrap_or(id)
    }

    pub fn total_vehicles(&self) -> usize {
        self.nodes.iter().map(|n| n.vehicles_at).sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.nodes.iter().map(|n| n.demand).sum()
    }

    /// Mean travel time of edge `(i, j)`.
    pub fn t_mu(&self, i: NodeId, j: NodeId) -> f64 {
        self.edges.t_mu[(i.0, j.0)]
    }

    pub fn t_var(&self, i: NodeId, j: NodeId) -> f64 {
        let s = self.edges.t_sigma[(i.0, j.0)];
        s * s
    }

    pub fn e_mu(&self, i: NodeId, j: NodeId) -> f64 {
        self.edges.e_mu[(i.0, j.0)]
    }

    pub fn e_var(&self, i: NodeId, j: NodeId) -> f64 {
        let s = self.edges.e_sigma[(i.0, j.0)];
        s * s
    }

    /// Checks every structural invariant. Capacity shortfall across the
    /// whole fleet is not an error; see [`Instance::infeasibility`].
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id.0 != i {
                return Err(Error::Validation(format!(
                    "node at position {i} has id {}",
                    node.id
                )));
            }
            if node.demand < 0.0 || !node.demand.is_finite() {
                return Err(Error::Validation(format!(
                    "node {i} has invalid demand {}",
                    node.demand
                )));
            }
            if node.kind != NodeKind::Customer && node.demand != 0.0 {
                return Err(Error::Validation(format!(
                    "non-customer node {i} has demand {}",
                    node.demand
                )));
            }
            if node.kind != NodeKind::Depot && node.vehicles_at != 0 {
                return Err(Error::Validation(format!(
                    "non-depot node {i} hosts vehicles"
                )));
            }
            if node.kind == NodeKind::Customer && node.demand > self.vehicle.capacity {
                return Err(Error::Validation(format!(
                    "customer {i} demand {} exceeds vehicle capacity {}",
                    node.demand, self.vehicle.capacity
                )));
            }
            if let Some(orig) = node.copy_of {
                if node.kind != NodeKind::Station
                    || orig.0 >= n
                    || self.nodes[orig.0].kind != NodeKind::Station
                    || self.nodes[orig.0].copy_of.is_some()
                {
                    return Err(Error::Validation(format!(
                        "node {i} is an invalid station copy"
                    )));
                }
            }
        }
        if self.depots().is_empty() {
            return Err(Error::Validation("instance has no depot".into()));
        }
        if self.customers().is_empty() {
            return Err(Error::Validation("instance has no customer".into()));
        }
        if self.total_vehicles() == 0 {
            return Err(Error::Validation("instance has no vehicle".into()));
        }
        if self.station_copies == 0 {
            return Err(Error::Validation(
                "station_copies must be at least 1".into(),
            ));
        }
        for (name, m) in self.edges.all() {
            if m.dim() != n {
                return Err(Error::Validation(format!(
                    "{name} has dimension {} but there are {n} nodes",
                    m.dim()
                )));
            }
            if let Some(v) = m.values().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::Validation(format!("{name} has invalid entry {v}")));
            }
            if (0..n).any(|i| m[(i, i)] != 0.0) {
                return Err(Error::Validation(format!("{name} has a nonzero diagonal")));
            }
        }
        let v = &self.vehicle;
        if !(v.capacity > 0.0) {
            return Err(Error::Validation(
                "vehicle capacity must be positive".into(),
            ));
        }
        if !(v.charge_rate > 0.0) {
            return Err(Error::Validation("charge rate must be positive".into()));
        }
        if !(v.soc_min < v.soc_start && v.soc_start <= v.soc_max) {
            return Err(Error::Validation(format!(
                "state-of-charge bounds must satisfy soc_min < soc_start <= soc_max (got {}, {}, {})",
                v.soc_min, v.soc_start, v.soc_max
            )));
        }
        if v.n_max == 0 {
            return Err(Error::Validation("n_max must be at least 1".into()));
        }
        self.robustness.validate()
    }

    /// Reason the fleet cannot serve every customer, if any.
    pub fn infeasibility(&self) -> Option<String> {
        let m = self.total_vehicles();
        let demand = self.total_demand();
        let fleet = m as f64 * self.vehicle.capacity;
        if demand > fleet {
            return Some(format!(
                "total demand {demand} exceeds fleet capacity {fleet}"
            ));
        }
        let nc = self.customers().len();
        if nc < m {
            return Some(format!(
                "{m} vehicles but only {nc} customers; every vehicle must serve one"
            ));
        }
        if nc > m * self.vehicle.n_max {
            return Some(format!(
                "{nc} customers exceed {m} vehicles x n_max {}",
                self.vehicle.n_max
            ));
        }
        None
    }

    pub fn is_feasible(&self) -> bool {
        self.infeasibility().is_none()
    }
}

/// Appends `copies - 1` virtual duplicates of every physical station. Copies
/// share all matrix rows and columns with their original; the distance
/// between an original and its copy is zero.
pub(crate) fn materialize_station_copies(
    nodes: &mut Vec<Node>,
    edges: &mut EdgeMatrices,
    copies: usize,
) {
    let physical: Vec<NodeId> = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Station && n.copy_of.is_none())
        .map(|n| n.id)
        .collect();
    let mut origin: Vec<usize> = (0..nodes.len()).collect();
    for _ in 1..copies {
        for &s in &physical {
            let id = nodes.len();
            nodes.push(Node {
                id: NodeId(id),
                copy_of: Some(s),
                ..nodes[s.0].clone()
            });
            origin.push(s.0);
        }
    }
    let n = nodes.len();
    let expand = |m: &SquareMatrix| SquareMatrix::from_fn(n, |i, j| m[(origin[i], origin[j])]);
    *edges = EdgeMatrices {
        t_mu: expand(&edges.t_mu),
        t_sigma: expand(&edges.t_sigma),
        e_mu: expand(&edges.e_mu),
        e_sigma: expand(&edges.e_sigma),
    };
}

/// Euclidean distance matrix from node positions.
pub(crate) fn euclidean(positions: &[(f64, f64)]) -> SquareMatrix {
    SquareMatrix::from_fn(positions.len(), |i, j| {
        if i == j {
            0.0
        } else {
            let (dx, dy) = (
                positions[i].0 - positions[j].0,
                positions[i].1 - positions[j].1,
            );
            (dx * dx + dy * dy).sqrt()
        }
    })
}
