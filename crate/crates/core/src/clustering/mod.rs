//! Capacity- and size-constrained partition of customers into vehicle groups.
//!
//! Each group is anchored at the depot of its vehicle and scored by a
//! spectral or norm cost of its slice of the combined cost matrix Z. A greedy
//! insertion builds a first partition, then relocation, 1-1 swap and 2-1
//! swap passes improve it until the total stops decreasing.

mod cost;

pub use cost::{
    build_cost_matrix, group_cost, group_matrix, power_iteration, CostMatrixZ, CostType,
};

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId, NodeKind};
use crate::routeeval::vehicle_depots;

pub const MAX_OUTER_ITERATIONS: usize = 50;
pub const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub depot: NodeId,
    /// Sorted ascending.
    pub customers: Vec<NodeId>,
    /// Attached charging stations, sorted ascending.
    pub stations: Vec<NodeId>,
}

impl Group {
    /// Depot followed by the customers: the node set the group cost is taken on.
    pub fn cost_nodes(&self) -> Vec<NodeId> {
        let mut v = Vec::with_capacity(self.customers.len() + 1);
        v.push(self.depot);
        v.extend_from_slice(&self.customers);
        v
    }

    pub fn load(&self, inst: &Instance) -> f64 {
        self.customers.iter().map(|&c| inst.node(c).demand).sum()
    }

    pub fn cost(&self, z: &CostMatrixZ, cost_type: CostType) -> f64 {
        group_cost(&self.cost_nodes(), z, cost_type)
    }

    pub fn cost_matrix(&self, z: &CostMatrixZ) -> nalgebra::DMatrix<f64> {
        group_matrix(&self.cost_nodes(), z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub groups: Vec<Group>,
    pub cost_type: CostType,
    pub total_cost: f64,
    /// Total cost after greedy insertion, then after every improvement round.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Limits applied to every group during partitioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupLimits {
    pub capacity: f64,
    pub n_max: usize,
}

pub(crate) struct Partition {
    pub members: Vec<Vec<NodeId>>,
    pub history: Vec<f64>,
    pub iterations: usize,
}

struct Engine<'a, D: Fn(NodeId) -> f64> {
    seeds: &'a [NodeId],
    demand: D,
    limits: GroupLimits,
    z: &'a CostMatrixZ,
    cost_type: CostType,
    members: Vec<Vec<NodeId>>,
    loads: Vec<f64>,
    costs: Vec<f64>,
}

impl<D: Fn(NodeId) -> f64> Engine<'_, D> {
    fn eval(&self, g: usize, members: &[NodeId]) -> f64 {
        let mut nodes = Vec::with_capacity(members.len() + 1);
        nodes.push(self.seeds[g]);
        nodes.extend_from_slice(members);
        group_cost(&nodes, self.z, self.cost_type)
    }

    fn eval_with(&self, g: usize, drop: &[NodeId], add: &[NodeId]) -> f64 {
        let mut m: Vec<NodeId> = self.members[g]
            .iter()
            .copied()
            .filter(|v| !drop.contains(v))
            .collect();
        m.extend_from_slice(add);
        self.eval(g, &m)
    }

    fn fits(&self, g: usize, load_delta: f64, size_delta: isize) -> bool {
        let size = self.members[g].len() as isize + size_delta;
        self.loads[g] + load_delta <= self.limits.capacity + 1e-9
            && size <= self.limits.n_max as isize
    }

    fn total(&self) -> f64 {
        self.costs.iter().sum()
    }

    fn refresh(&mut self, g: usize) {
        self.loads[g] = self.members[g].iter().map(|&v| (self.demand)(v)).sum();
        self.costs[g] = self.eval(g, &self.members[g]);
    }

    fn greedy_insert(&mut self, items: &[NodeId]) -> Result<()> {
        for &item in items {
            let d = (self.demand)(item);
            let mut best: Option<(f64, usize)> = None;
            for g in 0..self.seeds.len() {
                if !self.fits(g, d, 1) {
                    continue;
                }
                let c = self.eval_with(g, &[], &[item]);
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, g));
                }
            }
            let Some((c, g)) = best else {
                return Err(Error::InfeasibleClustering(format!(
                    "Can't find feasible solution. add more vehicles. (node {item} fits no group)"
                )));
            };
            self.members[g].push(item);
            self.loads[g] += d;
            self.costs[g] = c;
        }
        Ok(())
    }

    /// Gives every empty group one node, taken where the total cost rises least.
    fn fill_empty(&mut self) -> Result<()> {
        for g in 0..self.seeds.len() {
            if !self.members[g].is_empty() {
                continue;
            }
            let mut best: Option<(f64, usize, NodeId, f64, f64)> = None;
            for h in 0..self.seeds.len() {
                if self.members[h].len() < 2 {
                    continue;
                }
                for &x in &self.members[h] {
                    if !self.fits(g, (self.demand)(x), 1) {
                        continue;
                    }
                    let ch = self.eval_with(h, &[x], &[]);
                    let cg = self.eval(g, &[x]);
                    let delta = ch + cg - self.costs[h] - self.costs[g];
                    if best.is_none_or(|b| delta < b.0) {
                        best = Some((delta, h, x, ch, cg));
                    }
                }
            }
            let Some((_, h, x, ch, cg)) = best else {
                return Err(Error::InfeasibleClustering(format!(
                    "no node can be moved into empty group {g}"
                )));
            };
            self.members[h].retain(|&v| v != x);
            self.members[g].push(x);
            self.refresh(h);
            self.refresh(g);
            debug_assert!((self.costs[h] - ch).abs() < 1e-9 && (self.costs[g] - cg).abs() < 1e-9);
        }
        Ok(())
    }

    fn relocate(&mut self, items: &[NodeId]) {
        for &item in items {
            let g = match self.members.iter().position(|m| m.contains(&item)) {
                Some(g) => g,
                None => continue,
            };
            if self.members[g].len() < 2 {
                continue;
            }
            let d = (self.demand)(item);
            let without = self.eval_with(g, &[item], &[]);
            let mut best: Option<(f64, usize)> = None;
            for h in 0..self.seeds.len() {
                if h == g || !self.fits(h, d, 1) {
                    continue;
                }
                let delta =
                    without + self.eval_with(h, &[], &[item]) - self.costs[g] - self.costs[h];
                if delta < -IMPROVEMENT_EPS && best.is_none_or(|(bd, _)| delta < bd) {
                    best = Some((delta, h));
                }
            }
            if let Some((_, h)) = best {
                self.members[g].retain(|&v| v != item);
                self.members[h].push(item);
                self.refresh(g);
                self.refresh(h);
            }
        }
    }

    fn swap_one_one(&mut self) {
        let m = self.seeds.len();
        for a in 0..m {
            for b in a + 1..m {
                let mut ia = 0;
                while ia < self.members[a].len() {
                    let mut ib = 0;
                    while ib < self.members[b].len() {
                        let (x, y) = (self.members[a][ia], self.members[b][ib]);
                        let (dx, dy) = ((self.demand)(x), (self.demand)(y));
                        if self.fits(a, dy - dx, 0) && self.fits(b, dx - dy, 0) {
                            let ca = self.eval_with(a, &[x], &[y]);
                            let cb = self.eval_with(b, &[y], &[x]);
                            if ca + cb - self.costs[a] - self.costs[b] < -IMPROVEMENT_EPS {
                                self.members[a][ia] = y;
                                self.members[b][ib] = x;
                                self.refresh(a);
                                self.refresh(b);
                            }
                        }
                        ib += 1;
                    }
                    ia += 1;
                }
            }
        }
    }

    fn first_two_one(&self, a: usize, b: usize) -> Option<(NodeId, NodeId, NodeId)> {
        let ga = &self.members[a];
        for p in 0..ga.len() {
            for q in p + 1..ga.len() {
                let (x1, x2) = (ga[p], ga[q]);
                let dx = (self.demand)(x1) + (self.demand)(x2);
                for &y in &self.members[b] {
                    let dy = (self.demand)(y);
                    if !self.fits(a, dy - dx, -1) || !self.fits(b, dx - dy, 1) {
                        continue;
                    }
                    let ca = self.eval_with(a, &[x1, x2], &[y]);
                    let cb = self.eval_with(b, &[y], &[x1, x2]);
                    if ca + cb - self.costs[a] - self.costs[b] < -IMPROVEMENT_EPS {
                        return Some((x1, x2, y));
                    }
                }
            }
        }
        None
    }

    fn swap_two_one(&mut self) {
        let m = self.seeds.len();
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                while let Some((x1, x2, y)) = self.first_two_one(a, b) {
                    self.members[a].retain(|&v| v != x1 && v != x2);
                    self.members[a].push(y);
                    self.members[b].retain(|&v| v != y);
                    self.members[b].extend([x1, x2]);
                    self.refresh(a);
                    self.refresh(b);
                }
            }
        }
    }
}

/// Partitions `items` into one block per seed.
pub(crate) fn partition(
    seeds: &[NodeId],
    items: &[NodeId],
    demand: impl Fn(NodeId) -> f64,
    limits: GroupLimits,
    z: &CostMatrixZ,
    cost_type: CostType,
) -> Result<Partition> {
    let m = seeds.len();
    if m == 0 {
        return Err(Error::InfeasibleClustering("no vehicles".into()));
    }
    if items.len() < m {
        return Err(Error::InfeasibleClustering(format!(
            "{} nodes cannot occupy {m} groups",
            items.len()
        )));
    }
    let mut e = Engine {
        seeds,
        demand,
        limits,
        z,
        cost_type,
        members: vec![Vec::new(); m],
        loads: vec![0.0; m],
        costs: (0..m)
            .map(|g| group_cost(&[seeds[g]], z, cost_type))
            .collect(),
    };
    e.greedy_insert(items)?;
    e.fill_empty()?;
    let mut history = vec![e.total()];
    let mut iterations = 0;
    while iterations < MAX_OUTER_ITERATIONS {
        let before = e.total();
        e.relocate(items);
        e.swap_one_one();
        e.swap_two_one();
        iterations += 1;
        let after = e.total();
        history.push(after);
        if before - after <= IMPROVEMENT_EPS {
            break;
        }
    }
    for m in &mut e.members {
        m.sort();
    }
    Ok(Partition {
        members: e.members,
        history,
        iterations,
    })
}

pub fn cluster(inst: &Instance, z: &CostMatrixZ, cost_type: CostType) -> Result<Clustering> {
    let seeds = vehicle_depots(inst);
    let customers = inst.customers();
    let total = inst.total_demand();
    let fleet_cap = seeds.len() as f64 * inst.vehicle.capacity;
    if total > fleet_cap + 1e-9 {
        return Err(Error::InfeasibleClustering(format!(
            "Can't find feasible solution. add more vehicles. (demand {total} exceeds fleet capacity {fleet_cap})"
        )));
    }
    let limits = GroupLimits {
        capacity: inst.vehicle.capacity,
        n_max: inst.vehicle.n_max,
    };
    let p = partition(
        &seeds,
        &customers,
        |c| inst.node(c).demand,
        limits,
        z,
        cost_type,
    )?;
    let groups: Vec<Group> = seeds
        .iter()
        .zip(p.members)
        .map(|(&depot, customers)| Group {
            depot,
            customers,
            stations: Vec::new(),
        })
        .collect();
    let total_cost = groups.iter().map(|g| g.cost(z, cost_type)).sum();
    Ok(Clustering {
        groups,
        cost_type,
        total_cost,
        history: p.history,
        iterations: p.iterations,
    })
}

/// Adds, for every depot and customer of a group, its cheapest station
/// (ties to the lowest id). Station copies tie with their original, so only
/// originals are attached.
pub fn attach_stations(clu: &Clustering, inst: &Instance, z: &CostMatrixZ) -> Clustering {
    let stations = inst.stations();
    let mut out = clu.clone();
    if stations.is_empty() {
        return out;
    }
    for g in &mut out.groups {
        for v in g.cost_nodes() {
            let mut best = stations[0];
            for &s in &stations[1..] {
                if z.at(v, s) < z.at(v, best) {
                    best = s;
                }
            }
            if !g.stations.contains(&best) {
                g.stations.push(best);
            }
        }
        g.stations.sort();
    }
    out
}

/// Checks the partition constraints; returns one message per violation.
pub fn validate_clustering(clu: &Clustering, inst: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen = vec![0usize; inst.n()];
    for (k, g) in clu.groups.iter().enumerate() {
        if g.depot.0 >= inst.n() || inst.kind(g.depot) != NodeKind::Depot {
            out.push(format!("group {k}: anchor {} is not a depot", g.depot));
        }
        if g.customers.is_empty() {
            out.push(format!("group {k}: no customers"));
        }
        if g.customers.len() > inst.vehicle.n_max {
            out.push(format!(
                "group {k}: {} customers exceed n_max {}",
                g.customers.len(),
                inst.vehicle.n_max
            ));
        }
        for &c in &g.customers {
            if c.0 >= inst.n() || inst.kind(c) != NodeKind::Customer {
                out.push(format!("group {k}: {c} is not a customer"));
            } else {
                seen[c.0] += 1;
            }
        }
        for &s in &g.stations {
            if s.0 >= inst.n() || inst.kind(s) != NodeKind::Station {
                out.push(format!("group {k}: {s} is not a station"));
            }
        }
        let load: f64 = g
            .customers
            .iter()
            .filter(|c| c.0 < inst.n())
            .map(|&c| inst.node(c).demand)
            .sum();
        if load > inst.vehicle.capacity + 1e-9 {
            out.push(format!(
                "group {k}: load {load} exceeds capacity {}",
                inst.vehicle.capacity
            ));
        }
    }
    for c in inst.customers() {
        match seen[c.0] {
            1 => {}
            0 => out.push(format!("customer {c} in no group")),
            n => out.push(format!("customer {c} in {n} groups")),
        }
    }
    for d in inst.depots() {
        let count = clu.groups.iter().filter(|g| g.depot == d).count();
        if count != inst.node(d).vehicles_at {
            out.push(format!(
                "depot {d}: {count} groups for {} vehicles",
                inst.node(d).vehicles_at
            ));
        }
    }
    out
}

/// Text dump of a clustering.
pub fn dump_clustering(clu: &Clustering) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "RECVRP-CLUSTERING 1");
    let _ = writeln!(out, "cost_type {}", clu.cost_type);
    let _ = writeln!(out, "total_cost {}", clu.total_cost);
    let _ = writeln!(out, "iterations {}", clu.iterations);
    let hist: Vec<String> = clu.history.iter().map(|h| h.to_string()).collect();
    let _ = writeln!(out, "history {}", hist.join(" "));
    let ids = |v: &[NodeId]| {
        v.iter()
            .map(|x| x.0.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for (k, g) in clu.groups.iter().enumerate() {
        let _ = writeln!(
            out,
            "group {k} depot {} customers {} stations {}",
            g.depot,
            ids(&g.customers),
            ids(&g.stations)
        );
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::{
        generate_random, EdgeMatrices, GeneratorParams, Node, RobustnessParams, VehicleSpec,
    };
    use crate::matrix::SquareMatrix;

    pub(crate) fn planar(
        depots: &[((f64, f64), usize)],
        customers: &[(f64, f64)],
        stations: &[(f64, f64)],
    ) -> Instance {
        let mut nodes = Vec::new();
        let mut pos = Vec::new();
        for &(p, v) in depots {
            nodes.push(Node::depot(nodes.len(), Some(p), v));
            pos.push(p);
        }
        for &p in customers {
            nodes.push(Node::customer(nodes.len(), Some(p), 10.0));
            pos.push(p);
        }
        for &p in stations {
            nodes.push(Node::station(nodes.len(), Some(p)));
            pos.push(p);
        }
        let n = pos.len();
        let d = SquareMatrix::from_fn(n, |i, j| {
            ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt()
        });
        Instance {
            name: "planar".into(),
            nodes,
            edges: EdgeMatrices::deterministic(d, 1.0),
            vehicle: VehicleSpec {
                capacity: 100.0,
                soc_max: 1000.0,
                soc_min: 0.0,
                soc_start: 1000.0,
                n_max: 50,
                charge_rate: 1.0,
            },
            robustness: RobustnessParams::default(),
            station_copies: 1,
            reference_cost: None,
        }
    }

    #[test]
    fn symmetric_separation() {
        let inst = planar(
            &[((-50.0, 0.0), 1), ((50.0, 0.0), 1)],
            &[(-45.0, 5.0), (40.0, -5.0), (-40.0, -5.0), (45.0, 5.0)],
            &[],
        );
        let z = build_cost_matrix(&inst, None).unwrap();
        for ct in [CostType::F1, CostType::F2, CostType::F3] {
            let clu = cluster(&inst, &z, ct).unwrap();
            assert_eq!(clu.groups[0].customers, vec![NodeId(2), NodeId(4)], "{ct}");
            assert_eq!(clu.groups[1].customers, vec![NodeId(3), NodeId(5)], "{ct}");
            assert!(validate_clustering(&clu, &inst).is_empty());
        }
    }

    #[test]
    fn infeasible_when_fleet_too_small() {
        let mut inst = planar(&[((0.0, 0.0), 1)], &[(1.0, 0.0), (2.0, 0.0)], &[]);
        inst.vehicle.capacity = 15.0;
        let z = build_cost_matrix(&inst, None).unwrap();
        assert!(matches!(
            cluster(&inst, &z, CostType::F3),
            Err(Error::InfeasibleClustering(_))
        ));
        inst.vehicle.capacity = 100.0;
        inst.vehicle.n_max = 1;
        match cluster(&inst, &z, CostType::F3) {
            Err(Error::InfeasibleClustering(m)) => assert!(m.contains("add more vehicles")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_group_gets_a_customer() {
        // All customers sit on top of depot 0; depot 1 would stay empty.
        let inst = planar(
            &[((0.0, 0.0), 1), ((90.0, 0.0), 1)],
            &[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)],
            &[],
        );
        let z = build_cost_matrix(&inst, None).unwrap();
        let clu = cluster(&inst, &z, CostType::F3).unwrap();
        assert!(clu.groups.iter().all(|g| !g.customers.is_empty()));
        assert!(validate_clustering(&clu, &inst).is_empty());
    }

    #[test]
    fn station_attachment() {
        let inst = planar(
            &[((0.0, 0.0), 1)],
            &[(10.0, 0.0), (20.0, 0.0)],
            &[(5.0, 5.0)],
        );
        let z = build_cost_matrix(&inst, None).unwrap();
        let clu = attach_stations(&cluster(&inst, &z, CostType::F3).unwrap(), &inst, &z);
        assert_eq!(clu.groups[0].stations, vec![NodeId(3)]);

        // Two stations equally far from every node: the lower id wins.
        let inst = planar(
            &[((0.0, 0.0), 1)],
            &[(10.0, 0.0)],
            &[(5.0, 5.0), (5.0, -5.0)],
        );
        let z = build_cost_matrix(&inst, None).unwrap();
        let clu = attach_stations(&cluster(&inst, &z, CostType::F3).unwrap(), &inst, &z);
        assert_eq!(clu.groups[0].stations, vec![NodeId(2)]);
    }

    #[test]
    fn history_is_monotone_and_bounded() {
        for seed in 0..10 {
            let inst = generate_random(&GeneratorParams::new(24, vec![2, 1], seed)).unwrap();
            let z = build_cost_matrix(&inst, None).unwrap();
            let clu = cluster(&inst, &z, CostType::F3).unwrap();
            assert!(clu.iterations <= MAX_OUTER_ITERATIONS);
            assert!(
                clu.history.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "{:?}",
                clu.history
            );
            assert!((clu.total_cost - clu.history.last().unwrap()).abs() < 1e-6);
            let with = attach_stations(&clu, &inst, &z);
            for g in &with.groups {
                assert!(g.stations.len() <= g.customers.len() + 1);
            }
        }
    }

    #[test]
    fn dump_is_stable() {
        let inst = planar(
            &[((0.0, 0.0), 2)],
            &[(1.0, 0.0), (2.0, 0.0), (0.0, 3.0)],
            &[(1.0, 1.0)],
        );
        let z = build_cost_matrix(&inst, None).unwrap();
        let clu = attach_stations(&cluster(&inst, &z, CostType::F2).unwrap(), &inst, &z);
        let text = dump_clustering(&clu);
        assert!(text.starts_with("RECVRP-CLUSTERING 1\ncost_type F2\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("group ")).count(), 2);
        assert_eq!(text, dump_clustering(&clu));
    }
}
