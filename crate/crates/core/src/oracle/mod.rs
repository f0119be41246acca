//! Ground truth for small instances: exhaustive exact solver and a
//! Monte-Carlo replay of solutions under the normal edge model.

mod montecarlo;

pub use montecarlo::{simulate, simulate_with_traces, write_traces, McReport, RouteMc, Trace};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId};
use crate::rectsp::relabel_station_copies;
use crate::routeeval::{evaluate_route, vehicle_depots, ChargingPlan, Route, Solution};

pub const DEFAULT_CUSTOMER_LIMIT: usize = 9;

/// Best route found for one depot, customer set and station budget.
#[derive(Debug, Clone)]
struct Best {
    cost: f64,
    nodes: Vec<NodeId>,
    plan: ChargingPlan,
}

struct Exact<'a> {
    inst: &'a Instance,
    customers: Vec<NodeId>,
    /// Physical stations and how many nodes stand for each.
    stations: Vec<(NodeId, usize)>,
    memo: HashMap<(NodeId, u32, Vec<usize>), Option<Best>>,
}

impl Exact<'_> {
    fn route(&mut self, depot: NodeId, mask: u32, budget: &[usize]) -> Option<Best> {
        let key = (depot, mask, budget.to_vec());
        if let Some(b) = self.memo.get(&key) {
            return b.clone();
        }
        let members: Vec<NodeId> = (0..self.customers.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| self.customers[i])
            .collect();
        let mut best: Option<Best> = None;
        let mut seq = vec![depot];
        let mut used = vec![false; members.len()];
        let mut left = budget.to_vec();
        self.extend(&members, &mut used, &mut left, &mut seq, 0.0, &mut best);
        self.memo.insert(key, best.clone());
        best
    }

    /// Every order of `members` with any stations within budget spliced in.
    /// Partial mean time bounds the robust cost from below, so a prefix
    /// already as slow as the best complete route is dropped.
    fn extend(
        &self,
        members: &[NodeId],
        used: &mut [bool],
        left: &mut [usize],
        seq: &mut Vec<NodeId>,
        t_mu: f64,
        best: &mut Option<Best>,
    ) {
        if best.as_ref().is_some_and(|b| t_mu >= b.cost) {
            return;
        }
        let last = *seq.last().unwrap();
        if used.iter().all(|&u| u) {
            let mut nodes = seq.clone();
            nodes.push(seq[0]);
            let r = Route::new(0, nodes);
            if let Ok((plan, tt)) = evaluate_route(&r, self.inst) {
                if best.as_ref().is_none_or(|b| tt.robust_cost < b.cost) {
                    *best = Some(Best {
                        cost: tt.robust_cost,
                        nodes: r.nodes,
                        plan,
                    });
                }
            }
        }
        for i in 0..members.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            seq.push(members[i]);
            let t = t_mu + self.inst.t_mu(last, members[i]);
            self.extend(members, used, left, seq, t, best);
            seq.pop();
            used[i] = false;
        }
        for s in 0..self.stations.len() {
            if left[s] == 0 {
                continue;
            }
            let node = self.stations[s].0;
            left[s] -= 1;
            seq.push(node);
            let t = t_mu + self.inst.t_mu(last, node);
            self.extend(members, used, left, seq, t, best);
            seq.pop();
            left[s] += 1;
        }
    }
}

fn budget_splits(left: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &l in left {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=l).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

struct Assign<'a, 'b> {
    ex: &'b mut Exact<'a>,
    depots: Vec<NodeId>,
    best: Option<(f64, Vec<Best>)>,
}

impl Assign<'_, '_> {
    fn go(&mut self, k: usize, remaining: u32, left: &[usize], acc: f64, chosen: &mut Vec<Best>) {
        if self.best.as_ref().is_some_and(|(b, _)| acc >= *b) {
            return;
        }
        let vehicles = self.depots.len();
        if k == vehicles {
            if remaining == 0 && self.best.as_ref().is_none_or(|(b, _)| acc < *b) {
                self.best = Some((acc, chosen.clone()));
            }
            return;
        }
        if (remaining.count_ones() as usize) < vehicles - k {
            return;
        }
        let inst = self.ex.inst;
        // Nonempty subsets of the remaining customers.
        let mut sub = remaining;
        while sub != 0 {
            let members: Vec<NodeId> = (0..self.ex.customers.len())
                .filter(|&i| sub >> i & 1 == 1)
                .map(|i| self.ex.customers[i])
                .collect();
            let load: f64 = members.iter().map(|&c| inst.node(c).demand).sum();
            let fits = members.len() <= inst.vehicle.n_max && load <= inst.vehicle.capacity + 1e-9;
            let last = k + 1 == vehicles;
            if fits && (!last || sub == remaining) {
                for b in budget_splits(left) {
                    if let Some(r) = self.ex.route(self.depots[k], sub, &b) {
                        let rest: Vec<usize> = left.iter().zip(&b).map(|(l, u)| l - u).collect();
                        let cost = r.cost;
                        chosen.push(r);
                        self.go(k + 1, remaining & !sub, &rest, acc + cost, chosen);
                        chosen.pop();
                    }
                }
            }
            sub = (sub - 1) & remaining;
        }
    }
}

/// Globally optimal solution by enumeration: customer-to-vehicle assignments
/// (every vehicle serves at least one customer), all visiting orders, and
/// all station visit patterns within the available station copies. The
/// objective is the sum of per-route robust costs.
pub fn exact_solve(inst: &Instance) -> Result<Solution> {
    exact_solve_limited(inst, DEFAULT_CUSTOMER_LIMIT)
}

pub fn exact_solve_limited(inst: &Instance, max_customers: usize) -> Result<Solution> {
    let customers = inst.customers();
    if customers.len() > max_customers || customers.len() > 31 {
        return Err(Error::RefusedTooLarge(format!(
            "{} customers exceed the exact solver limit of {}",
            customers.len(),
            max_customers.min(31)
        )));
    }
    let mut stations: Vec<(NodeId, usize)> = Vec::new();
    for s in inst.stations() {
        let p = inst.physical(s);
        match stations.iter_mut().find(|(q, _)| *q == p) {
            Some(e) => e.1 += 1,
            None => stations.push((p, 1)),
        }
    }
    let budget: Vec<usize> = stations.iter().map(|s| s.1).collect();
    let depots = vehicle_depots(inst);
    let all = if customers.is_empty() {
        0
    } else {
        u32::MAX >> (32 - customers.len())
    };
    let mut ex = Exact {
        inst,
        customers,
        stations,
        memo: HashMap::new(),
    };
    let mut a = Assign {
        ex: &mut ex,
        depots,
        best: None,
    };
    a.go(0, all, &budget, 0.0, &mut Vec::new());
    let Some((_, chosen)) = a.best else {
        return Err(Error::Infeasible(
            "no assignment of customers to vehicles admits feasible routes".into(),
        ));
    };
    let mut routes: Vec<Route> = chosen
        .iter()
        .enumerate()
        .map(|(k, b)| Route::new(k, b.nodes.clone()))
        .collect();
    relabel_station_copies(&mut routes, inst);
    let plans = chosen.into_iter().map(|b| b.plan).collect();
    Solution::new(routes, plans, inst)
}
