//! Single-vehicle tour search for one group: best-first depth-first
//! branch-and-bound over customer orders and optional station visits.
//!
//! Customers are visited subgroup by subgroup; stations may be entered at any
//! point. A child is pruned when the robust time bound reaches the incumbent,
//! or when even charging to full at every station so far cannot keep the
//! robust SoC above `soc_min`. Completed tours get a just-in-time charging
//! plan and are scored by their robust time.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{partition, CostMatrixZ, CostType, Group, GroupLimits};
use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId};
use crate::routeeval::{optimize_charging, soc_tolerance, tour_time, ChargingPlan, Route};
use crate::stochmath::{quantile, NormalSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Customers per subgroup; `None` searches the whole group at once.
    pub subgroup_target_size: Option<usize>,
    pub timeout: Option<Duration>,
    pub parallel_width: usize,
    pub cost_type: CostType,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            subgroup_target_size: None,
            timeout: None,
            parallel_width: 1,
            cost_type: CostType::F3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupPlan {
    pub subgroups: Vec<Vec<NodeId>>,
    pub membership: BTreeMap<NodeId, usize>,
}

impl SubgroupPlan {
    pub fn single(customers: &[NodeId]) -> Self {
        Self::from_blocks(vec![customers.to_vec()])
    }

    fn from_blocks(subgroups: Vec<Vec<NodeId>>) -> Self {
        let membership = subgroups
            .iter()
            .enumerate()
            .flat_map(|(k, b)| b.iter().map(move |&c| (c, k)))
            .collect();
        Self {
            subgroups,
            membership,
        }
    }
}

/// Splits the group's customers into blocks of at most the target size with
/// the clustering procedure (capacity ignored), nearest block first.
pub fn make_subgroups(group: &Group, z: &CostMatrixZ, cfg: &SearchConfig) -> Result<SubgroupPlan> {
    let n = group.customers.len();
    let target = match cfg.subgroup_target_size {
        Some(t) if t == 0 => {
            return Err(Error::Validation("subgroup size must be at least 1".into()))
        }
        Some(t) if t < n => t,
        _ => return Ok(SubgroupPlan::single(&group.customers)),
    };
    let blocks = n.div_ceil(target);
    let seeds = vec![group.depot; blocks];
    let limits = GroupLimits {
        capacity: f64::INFINITY,
        n_max: target,
    };
    let mut members =
        partition(&seeds, &group.customers, |_| 0.0, limits, z, cfg.cost_type)?.members;
    let key = |b: &Vec<NodeId>| {
        let near = b
            .iter()
            .map(|&c| z.at(group.depot, c))
            .fold(f64::INFINITY, f64::min);
        (near, b[0])
    };
    members.sort_by(|a, b| {
        key(a)
            .partial_cmp(&key(b))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(SubgroupPlan::from_blocks(members))
}

/// Partial tour statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteState {
    pub route: Vec<NodeId>,
    pub load: f64,
    pub time: NormalSummary,
    pub energy: NormalSummary,
    /// Mean SoC on leaving the current node if every station so far charged to full.
    pub soc_exit: f64,
    /// Energy that could still have been bought at the last station.
    pub charging_potential: f64,
}

impl RouteState {
    pub fn start(depot: NodeId, inst: &Instance) -> Self {
        Self {
            route: vec![depot],
            load: 0.0,
            time: NormalSummary::ZERO,
            energy: NormalSummary::ZERO,
            soc_exit: inst.vehicle.soc_start,
            charging_potential: 0.0,
        }
    }

    pub fn current(&self) -> NodeId {
        *self.route.last().unwrap()
    }

    pub fn extend(&self, next: NodeId, inst: &Instance) -> Self {
        let cur = self.current();
        let mut s = self.clone();
        s.route.push(next);
        s.load += inst.node(next).demand;
        s.time = s.time + NormalSummary::new(inst.t_mu(cur, next), inst.t_var(cur, next));
        s.energy = s.energy + NormalSummary::new(inst.e_mu(cur, next), inst.e_var(cur, next));
        let enter = self.soc_exit - inst.e_mu(cur, next);
        if inst.kind(next) == crate::instance::NodeKind::Station {
            s.charging_potential = inst.vehicle.soc_max - enter;
            s.soc_exit = inst.vehicle.soc_max;
        } else {
            s.soc_exit = enter;
        }
        s
    }
}

/// Admissible completion bounds from the current node back to the depot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompletionBounds {
    pub time: f64,
    pub time_var: f64,
    pub energy: f64,
    pub energy_var: f64,
}

/// Each remaining customer is entered over its cheapest edge from the
/// current node, another remaining customer or an available station; the
/// depot is entered over its cheapest edge from any node that may precede it.
pub fn lower_bounds(
    state: &RouteState,
    remaining: &[NodeId],
    stations: &[NodeId],
    inst: &Instance,
) -> CompletionBounds {
    let depot = state.route[0];
    let mut nodes = vec![depot, state.current()];
    nodes.extend_from_slice(remaining);
    nodes.extend_from_slice(stations);
    let ctx = Local::new(&nodes, inst);
    let rem: Vec<usize> = (2..2 + remaining.len()).collect();
    let st: Vec<usize> = (2 + remaining.len()..nodes.len()).collect();
    ctx.completion(1, &rem, &st)
}

/// Edge data restricted to a small node set, indexed locally.
struct Local {
    n: usize,
    t_mu: Vec<f64>,
    t_var: Vec<f64>,
    e_mu: Vec<f64>,
    e_var: Vec<f64>,
}

impl Local {
    fn new(nodes: &[NodeId], inst: &Instance) -> Self {
        let n = nodes.len();
        let build = |f: &dyn Fn(NodeId, NodeId) -> f64| {
            let mut v = vec![0.0; n * n];
            for a in 0..n {
                for b in 0..n {
                    v[a * n + b] = f(nodes[a], nodes[b]);
                }
            }
            v
        };
        Self {
            n,
            t_mu: build(&|i, j| inst.t_mu(i, j)),
            t_var: build(&|i, j| inst.t_var(i, j)),
            e_mu: build(&|i, j| inst.e_mu(i, j)),
            e_var: build(&|i, j| inst.e_var(i, j)),
        }
    }

    #[inline]
    fn at(&self, m: &[f64], a: usize, b: usize) -> f64 {
        m[a * self.n + b]
    }

    /// Local index 0 is the depot.
    fn completion(&self, cur: usize, rem: &[usize], st: &[usize]) -> CompletionBounds {
        let mut out = CompletionBounds::default();
        let mut min_in = |r: usize, preds: &mut dyn Iterator<Item = usize>| {
            let mut m = [f64::INFINITY; 4];
            for p in preds {
                if p == r {
                    continue;
                }
                m[0] = m[0].min(self.at(&self.t_mu, p, r));
                m[1] = m[1].min(self.at(&self.t_var, p, r));
                m[2] = m[2].min(self.at(&self.e_mu, p, r));
                m[3] = m[3].min(self.at(&self.e_var, p, r));
            }
            out.time += m[0];
            out.time_var += m[1];
            out.energy += m[2];
            out.energy_var += m[3];
        };
        for &r in rem {
            min_in(
                r,
                &mut std::iter::once(cur)
                    .chain(rem.iter().copied())
                    .chain(st.iter().copied()),
            );
        }
        if rem.is_empty() {
            min_in(0, &mut std::iter::once(cur).chain(st.iter().copied()));
        } else {
            min_in(0, &mut rem.iter().copied().chain(st.iter().copied()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub route: Route,
    pub plan: ChargingPlan,
    pub cost: f64,
    pub updates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub route: Route,
    pub plan: ChargingPlan,
    pub cost: f64,
    pub timed_out: bool,
    /// Incumbent costs in the order they were found.
    pub history: Vec<f64>,
    pub expanded: u64,
}

struct Search<'a> {
    inst: &'a Instance,
    ctx: Local,
    /// Local index to node id; 0 is the depot, then customers, then stations.
    ids: Vec<NodeId>,
    is_station: Vec<bool>,
    /// Subgroup of each local customer index.
    block: Vec<usize>,
    blocks: usize,
    z_t: f64,
    z_e: f64,
    tol: f64,
    vehicle_id: usize,
    deadline: Option<Instant>,
    stop: AtomicBool,
    best_bits: AtomicU64,
    best: Mutex<Option<(f64, Vec<NodeId>, ChargingPlan)>>,
    history: Mutex<Vec<f64>>,
    expanded: AtomicU64,
}

#[derive(Clone)]
struct Node {
    route: Vec<usize>,
    visited: Vec<bool>,
    left_in_block: Vec<usize>,
    customers_left: usize,
    t_mu: f64,
    t_var: f64,
    e_mu: f64,
    e_var: f64,
    soc_hi: f64,
    max_need: f64,
}

impl Search<'_> {
    fn best_cost(&self) -> f64 {
        f64::from_bits(self.best_bits.load(Ordering::Relaxed))
    }

    fn current_block(&self, s: &Node) -> Option<usize> {
        (0..self.blocks).find(|&b| s.left_in_block[b] > 0)
    }

    fn children(&self, s: &Node) -> Vec<usize> {
        let cur = *s.route.last().unwrap();
        let mut out: Vec<usize> = Vec::new();
        match self.current_block(s) {
            Some(b) => out.extend(
                (1..self.ids.len())
                    .filter(|&k| !self.is_station[k] && !s.visited[k] && self.block[k] == b),
            ),
            None => out.push(0),
        }
        out.extend((1..self.ids.len()).filter(|&k| self.is_station[k] && !s.visited[k]));
        out.sort_by(|&a, &b| {
            self.ctx
                .at(&self.ctx.t_mu, cur, a)
                .partial_cmp(&self.ctx.at(&self.ctx.t_mu, cur, b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.ids[a].cmp(&self.ids[b]))
        });
        out
    }

    fn robust_ok(&self, mean: f64, var: f64) -> bool {
        mean - self.z_e * var.sqrt() >= self.inst.vehicle.soc_min - self.tol
    }

    /// Child state, or `None` when the child is pruned.
    fn step(&self, s: &Node, j: usize) -> Option<Node> {
        let v = &self.inst.vehicle;
        let cur = *s.route.last().unwrap();
        let c = &self.ctx;
        let mut n = s.clone();
        n.route.push(j);
        n.t_mu += c.at(&c.t_mu, cur, j);
        n.t_var += c.at(&c.t_var, cur, j);
        n.e_mu += c.at(&c.e_mu, cur, j);
        n.e_var += c.at(&c.e_var, cur, j);
        let enter = s.soc_hi - c.at(&c.e_mu, cur, j);
        if !self.robust_ok(enter, n.e_var) {
            return None;
        }
        n.max_need = n
            .max_need
            .max(v.soc_min + n.e_mu + self.z_e * n.e_var.sqrt() - v.soc_start);
        if j == 0 {
            return Some(n);
        }
        n.visited[j] = true;
        if self.is_station[j] {
            n.soc_hi = v.soc_max;
        } else {
            n.soc_hi = enter;
            n.customers_left -= 1;
            n.left_in_block[self.block[j]] -= 1;
        }
        let rem: Vec<usize> = (1..self.ids.len())
            .filter(|&k| !self.is_station[k] && !n.visited[k])
            .collect();
        let st: Vec<usize> = (1..self.ids.len())
            .filter(|&k| self.is_station[k] && !n.visited[k])
            .collect();

        // One step ahead: some admissible successor must be robustly reachable.
        let succ = rem
            .iter()
            .chain(st.iter())
            .copied()
            .chain(rem.is_empty().then_some(0));
        if !succ.into_iter().any(|k| {
            self.robust_ok(
                n.soc_hi - c.at(&c.e_mu, j, k),
                n.e_var + c.at(&c.e_var, j, k),
            )
        }) {
            return None;
        }
        let b = c.completion(j, &rem, &st);
        if st.is_empty() && !self.robust_ok(n.soc_hi - b.energy, n.e_var + b.energy_var) {
            return None;
        }
        let final_need = v.soc_min + n.e_mu + b.energy + self.z_e * (n.e_var + b.energy_var).sqrt()
            - v.soc_start;
        let charge_lb = n.max_need.max(final_need).max(0.0) / v.charge_rate;
        let lb = n.t_mu + b.time + charge_lb + self.z_t * (n.t_var + b.time_var).sqrt();
        let best = self.best_cost();
        if lb >= best + 1e-9 * best.abs().max(1.0) {
            return None;
        }
        Some(n)
    }

    fn finish(&self, s: &Node) {
        let nodes: Vec<NodeId> = s.route.iter().map(|&k| self.ids[k]).collect();
        let route = Route::new(self.vehicle_id, nodes);
        let Ok(plan) = optimize_charging(&route, self.inst) else {
            return;
        };
        let Ok(tt) = tour_time(&route, &plan, self.inst) else {
            return;
        };
        let cost = tt.robust_cost;
        let mut best = self.best.lock().unwrap();
        let better = match &*best {
            None => true,
            Some((bc, br, _)) => cost < *bc || (cost == *bc && route.nodes < *br),
        };
        if better {
            self.best_bits.store(cost.to_bits(), Ordering::Relaxed);
            self.history.lock().unwrap().push(cost);
            *best = Some((cost, route.nodes, plan));
        }
    }

    fn expired(&self) -> bool {
        if self.stop.load(Ordering::Relaxed) {
            return true;
        }
        let count = self.expanded.fetch_add(1, Ordering::Relaxed);
        if let Some(d) = self.deadline {
            if count % 256 == 0 && Instant::now() >= d {
                self.stop.store(true, Ordering::Relaxed);
                return true;
            }
        }
        false
    }

    fn dfs(&self, s: &Node) {
        if self.expired() {
            return;
        }
        for j in self.children(s) {
            if let Some(n) = self.step(s, j) {
                if j == 0 {
                    self.finish(&n);
                } else {
                    self.dfs(&n);
                }
            }
            if self.stop.load(Ordering::Relaxed) {
                return;
            }
        }
    }
}

/// Best robust tour through all group customers, visiting any subset of the
/// group's stations.
pub fn solve(
    group: &Group,
    plan: &SubgroupPlan,
    inst: &Instance,
    cfg: &SearchConfig,
) -> Result<SolveOutcome> {
    solve_for_vehicle(group, plan, inst, cfg, 0)
}

pub fn solve_for_vehicle(
    group: &Group,
    plan: &SubgroupPlan,
    inst: &Instance,
    cfg: &SearchConfig,
    vehicle_id: usize,
) -> Result<SolveOutcome> {
    if group.customers.is_empty() {
        return Err(Error::Validation("group has no customers".into()));
    }
    let mut ids = vec![group.depot];
    ids.extend_from_slice(&group.customers);
    ids.extend_from_slice(&group.stations);
    let n = ids.len();
    let nc = group.customers.len();
    let mut block = vec![usize::MAX; n];
    for k in 1..=nc {
        block[k] = *plan.membership.get(&ids[k]).ok_or_else(|| {
            Error::Validation(format!(
                "customer {} missing from the subgroup plan",
                ids[k]
            ))
        })?;
    }
    let blocks = plan.subgroups.len();
    let mut left_in_block = vec![0usize; blocks];
    for k in 1..=nc {
        left_in_block[block[k]] += 1;
    }
    let search = Search {
        inst,
        ctx: Local::new(&ids, inst),
        is_station: (0..n).map(|k| k > nc).collect(),
        ids,
        block,
        blocks,
        z_t: quantile(inst.robustness.p_t)?,
        z_e: quantile(inst.robustness.p_e)?,
        tol: soc_tolerance(inst),
        vehicle_id,
        deadline: cfg.timeout.map(|t| Instant::now() + t),
        stop: AtomicBool::new(false),
        best_bits: AtomicU64::new(f64::INFINITY.to_bits()),
        best: Mutex::new(None),
        history: Mutex::new(Vec::new()),
        expanded: AtomicU64::new(0),
    };
    let root = Node {
        route: vec![0],
        visited: vec![false; n],
        left_in_block,
        customers_left: nc,
        t_mu: 0.0,
        t_var: 0.0,
        e_mu: 0.0,
        e_var: 0.0,
        soc_hi: inst.vehicle.soc_start,
        max_need: f64::NEG_INFINITY,
    };
    let first: Vec<usize> = search.children(&root);
    let expand = |j: &usize| {
        if let Some(s) = search.step(&root, *j) {
            search.dfs(&s);
        }
    };
    if cfg.parallel_width > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel_width)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| first.par_iter().for_each(expand));
    } else {
        first.iter().for_each(expand);
    }
    let timed_out = search.stop.load(Ordering::Relaxed);
    let history = search.history.into_inner().unwrap();
    let expanded = search.expanded.load(Ordering::Relaxed);
    match search.best.into_inner().unwrap() {
        Some((cost, nodes, plan)) => Ok(SolveOutcome {
            route: Route::new(vehicle_id, nodes),
            plan,
            cost,
            timed_out,
            history,
            expanded,
        }),
        None if timed_out => Err(Error::InfeasibleGroup {
            message: format!(
                "no tour found for the group at depot {} before the timeout",
                group.depot
            ),
            timed_out: true,
        }),
        None => Err(Error::InfeasibleGroup {
            message: format!(
                "no energy-feasible tour exists for the group at depot {}",
                group.depot
            ),
            timed_out: false,
        }),
    }
}

/// Rewrites station visits so that no station node is entered twice across
/// the routes: each repeated visit moves to the lowest unused copy of the
/// same physical station. Visits beyond the available copies are left as is.
pub fn relabel_station_copies(routes: &mut [Route], inst: &Instance) {
    let mut copies: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for s in inst.stations() {
        copies.entry(inst.physical(s)).or_default().push(s);
    }
    let mut used: BTreeMap<NodeId, usize> = BTreeMap::new();
    for r in routes.iter_mut() {
        let last = r.nodes.len().saturating_sub(1);
        for v in r.nodes.iter_mut().take(last).skip(1) {
            if inst.kind(*v) != crate::instance::NodeKind::Station {
                continue;
            }
            let p = inst.physical(*v);
            let k = used.entry(p).or_default();
            if let Some(&c) = copies.get(&p).and_then(|cs| cs.get(*k)) {
                *v = c;
            }
            *k += 1;
        }
    }
}

#[cfg(test)]
mod tests;
