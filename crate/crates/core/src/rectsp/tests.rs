use super::*;
use crate::clustering::build_cost_matrix;
use crate::clustering::tests::planar;
use crate::instance::{generate_random, GeneratorParams, NodeKind};
use crate::routeeval::{check_energy_feasible, propagate_soc};

fn whole(inst: &Instance) -> Group {
    Group {
        depot: inst.depots()[0],
        customers: inst.customers(),
        stations: inst
            .stations()
            .into_iter()
            .filter(|&s| inst.node(s).copy_of.is_none())
            .collect(),
    }
}

/// Minimum over every customer order with every subset and order of
/// stations spliced in.
fn brute_force(inst: &Instance, g: &Group) -> Option<f64> {
    fn rec(inst: &Instance, g: &Group, seq: &mut Vec<NodeId>, best: &mut Option<f64>) {
        let used_all = g.customers.iter().all(|c| seq.contains(c));
        if used_all {
            let mut nodes = vec![g.depot];
            nodes.extend(seq.iter().copied());
            nodes.push(g.depot);
            let r = Route::new(0, nodes);
            if let Ok(p) = optimize_charging(&r, inst) {
                let c = tour_time(&r, &p, inst).unwrap().robust_cost;
                if best.is_none_or(|b| c < b) {
                    *best = Some(c);
                }
            }
        }
        for &v in g.customers.iter().chain(g.stations.iter()) {
            if seq.contains(&v) {
                continue;
            }
            seq.push(v);
            rec(inst, g, seq, best);
            seq.pop();
        }
    }
    let mut best = None;
    rec(inst, g, &mut Vec::new(), &mut best);
    best
}

fn small(seed: u64, n: usize, map: f64) -> Instance {
    let mut p = GeneratorParams::new(n, vec![1], seed);
    p.map_size = map;
    p.station_copies = 1;
    generate_random(&p).unwrap()
}

#[test]
fn single_customer_closed_form() {
    let inst = small(3, 4, 20.0);
    let g = Group {
        depot: NodeId(0),
        customers: vec![NodeId(1)],
        stations: vec![],
    };
    let out = solve(
        &g,
        &SubgroupPlan::single(&g.customers),
        &inst,
        &SearchConfig::default(),
    )
    .unwrap();
    let (d, c) = (NodeId(0), NodeId(1));
    let want = inst.t_mu(d, c)
        + inst.t_mu(c, d)
        + 1.281_551_565_544_600_5 * (inst.t_var(d, c) + inst.t_var(c, d)).sqrt();
    assert_eq!(out.route.nodes, vec![d, c, d]);
    assert!((out.cost - want).abs() < 1e-9);
}

#[test]
fn matches_brute_force() {
    let mut compared = 0;
    for seed in 0..40u64 {
        let n = 6 + (seed % 3) as usize;
        let inst = small(seed, n, 22.0);
        let g = whole(&inst);
        let oracle = brute_force(&inst, &g);
        let got = solve(
            &g,
            &SubgroupPlan::single(&g.customers),
            &inst,
            &SearchConfig::default(),
        );
        match (oracle, got) {
            (
                None,
                Err(Error::InfeasibleGroup {
                    timed_out: false, ..
                }),
            ) => {}
            (Some(o), Ok(r)) => {
                assert!(
                    (o - r.cost).abs() < 1e-9,
                    "seed {seed}: oracle {o} search {}",
                    r.cost
                );
                compared += 1;
            }
            (o, r) => panic!("seed {seed}: oracle {o:?}, search {r:?}"),
        }
    }
    assert!(compared >= 20, "{compared}");
}

#[test]
fn uses_station_when_direct_tour_is_infeasible() {
    let mut inst = planar(
        &[((0.0, 0.0), 1)],
        &[(40.0, 0.0), (40.0, 10.0)],
        &[(20.0, 5.0)],
    );
    inst.vehicle.soc_max = 70.0;
    inst.vehicle.soc_start = 70.0;
    let g = whole(&inst);
    let direct = Route::new(0, vec![NodeId(0), NodeId(1), NodeId(2), NodeId(0)]);
    assert!(optimize_charging(&direct, &inst).is_err());
    let out = solve(
        &g,
        &SubgroupPlan::single(&g.customers),
        &inst,
        &SearchConfig::default(),
    )
    .unwrap();
    assert!(out.route.nodes.contains(&NodeId(3)));
    assert!((out.cost - brute_force(&inst, &g).unwrap()).abs() < 1e-9);
    let p = propagate_soc(&out.route, &out.plan, &inst).unwrap();
    assert!(check_energy_feasible(&p, &inst).feasible);
}

#[test]
fn infeasible_group() {
    let mut inst = planar(&[((0.0, 0.0), 1)], &[(80.0, 0.0)], &[]);
    inst.vehicle.soc_max = 100.0;
    inst.vehicle.soc_start = 100.0;
    let g = whole(&inst);
    match solve(
        &g,
        &SubgroupPlan::single(&g.customers),
        &inst,
        &SearchConfig::default(),
    ) {
        Err(Error::InfeasibleGroup {
            timed_out: false, ..
        }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn subgroup_shapes() {
    let inst = generate_random(&GeneratorParams::new(11, vec![1], 5)).unwrap();
    let z = build_cost_matrix(&inst, None).unwrap();
    let g = whole(&inst);
    assert_eq!(g.customers.len(), 8);
    let cfg = |t| SearchConfig {
        subgroup_target_size: Some(t),
        ..SearchConfig::default()
    };
    let one = make_subgroups(&g, &z, &cfg(8)).unwrap();
    assert_eq!(one.subgroups, vec![g.customers.clone()]);
    let two = make_subgroups(&g, &z, &cfg(4)).unwrap();
    assert_eq!(two.subgroups.len(), 2);
    let mut all: Vec<NodeId> = two.subgroups.concat();
    all.sort();
    assert_eq!(all, g.customers);
    assert!(two.subgroups.iter().all(|b| !b.is_empty() && b.len() <= 4));
    assert_eq!(make_subgroups(&g, &z, &cfg(4)).unwrap(), two);
    let near = |b: &Vec<NodeId>| {
        b.iter()
            .map(|&c| z.at(g.depot, c))
            .fold(f64::INFINITY, f64::min)
    };
    assert!(near(&two.subgroups[0]) <= near(&two.subgroups[1]));
    assert!(make_subgroups(&g, &z, &cfg(0)).is_err());
}

#[test]
fn decomposed_search_respects_blocks() {
    let cfg = SearchConfig {
        subgroup_target_size: Some(3),
        ..SearchConfig::default()
    };
    let mut solved = 0;
    for seed in 0..10u64 {
        let inst = small(seed, 11, 15.0);
        let z = build_cost_matrix(&inst, None).unwrap();
        let g = whole(&inst);
        let plan = make_subgroups(&g, &z, &cfg).unwrap();
        assert_eq!(plan.subgroups.len(), 3);
        let Ok(out) = solve(&g, &plan, &inst, &cfg) else {
            continue;
        };
        solved += 1;
        let exact = solve(
            &g,
            &SubgroupPlan::single(&g.customers),
            &inst,
            &SearchConfig::default(),
        )
        .unwrap();
        assert!(out.cost >= exact.cost - 1e-9);
        let order: Vec<usize> = out
            .route
            .nodes
            .iter()
            .filter(|&&v| inst.kind(v) == NodeKind::Customer)
            .map(|v| plan.membership[v])
            .collect();
        assert!(order.windows(2).all(|w| w[0] <= w[1]), "{order:?}");
    }
    assert!(solved >= 5, "{solved}");
}

#[test]
fn zero_matrices_give_zero_bounds() {
    let mut inst = small(1, 8, 30.0);
    for m in [
        &mut inst.edges.t_mu,
        &mut inst.edges.t_sigma,
        &mut inst.edges.e_mu,
        &mut inst.edges.e_sigma,
    ] {
        *m = m.map(|_| 0.0);
    }
    let s = RouteState::start(NodeId(0), &inst);
    let b = lower_bounds(&s, &inst.customers(), &inst.stations(), &inst);
    assert_eq!(b, CompletionBounds::default());
}

#[test]
fn single_remaining_node_bound() {
    let inst = small(2, 8, 30.0);
    let d = NodeId(0);
    let c1 = inst.customers()[0];
    let c2 = inst.customers()[1];
    let s = RouteState::start(d, &inst).extend(c1, &inst);
    let b = lower_bounds(&s, &[c2], &[], &inst);
    assert!((b.time - (inst.t_mu(c1, c2) + inst.t_mu(c2, d))).abs() < 1e-12);
    assert!((b.energy_var - (inst.e_var(c1, c2) + inst.e_var(c2, d))).abs() < 1e-12);
}

#[test]
fn bounds_are_admissible() {
    let mut checked = 0;
    for seed in 0..100u64 {
        let inst = small(seed, 9, 100.0);
        let cs = inst.customers();
        let st = inst.stations();
        let k = (seed as usize) % 3;
        let mut s = RouteState::start(NodeId(0), &inst);
        for &c in &cs[..k] {
            s = s.extend(c, &inst);
        }
        let rem = &cs[k..];
        let b = lower_bounds(&s, rem, &st, &inst);
        // Every completion order, with an optional station stop anywhere.
        let mut perm: Vec<NodeId> = rem.to_vec();
        let mut seen_min = [f64::INFINITY; 4];
        permute(&mut perm, 0, &mut |p| {
            for at in 0..=p.len() + 1 {
                let mut tail: Vec<NodeId> = p.to_vec();
                if at <= p.len() {
                    tail.insert(at, st[0]);
                }
                let mut t = s.clone();
                for &v in &tail {
                    t = t.extend(v, &inst);
                }
                t = t.extend(NodeId(0), &inst);
                let got = [
                    t.time.mu - s.time.mu,
                    t.time.var - s.time.var,
                    t.energy.mu - s.energy.mu,
                    t.energy.var - s.energy.var,
                ];
                for q in 0..4 {
                    seen_min[q] = seen_min[q].min(got[q]);
                }
            }
        });
        let bounds = [b.time, b.time_var, b.energy, b.energy_var];
        for q in 0..4 {
            assert!(bounds[q] <= seen_min[q] + 1e-9, "seed {seed} component {q}");
        }
        checked += 1;
    }
    assert_eq!(checked, 100);
}

fn permute(v: &mut Vec<NodeId>, k: usize, f: &mut dyn FnMut(&[NodeId])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

#[test]
fn parallel_width_does_not_change_result() {
    for seed in 0..8u64 {
        let inst = small(seed, 10, 30.0);
        let g = whole(&inst);
        let plan = SubgroupPlan::single(&g.customers);
        let a = solve(&g, &plan, &inst, &SearchConfig::default());
        let b = solve(
            &g,
            &plan,
            &inst,
            &SearchConfig {
                parallel_width: 4,
                ..SearchConfig::default()
            },
        );
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a.route, b.route);
                assert_eq!(a.cost.to_bits(), b.cost.to_bits());
                assert!(a.history.windows(2).all(|w| w[1] < w[0]));
            }
            (Err(_), Err(_)) => {}
            (a, b) => panic!("{a:?} vs {b:?}"),
        }
    }
}

#[test]
fn zero_timeout_reports_flag() {
    let inst = small(4, 12, 30.0);
    let g = whole(&inst);
    let cfg = SearchConfig {
        timeout: Some(Duration::ZERO),
        ..SearchConfig::default()
    };
    match solve(&g, &SubgroupPlan::single(&g.customers), &inst, &cfg) {
        Ok(out) => assert!(out.timed_out),
        Err(Error::InfeasibleGroup { timed_out, .. }) => assert!(timed_out),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn relabeling_spreads_station_visits() {
    let mut p = GeneratorParams::new(12, vec![2], 1);
    p.station_copies = 2;
    let inst = generate_random(&p).unwrap();
    let s = inst.stations()[0];
    let (a, b) = (inst.customers()[0], inst.customers()[1]);
    let mut routes = vec![
        Route::new(0, vec![NodeId(0), a, s, NodeId(0)]),
        Route::new(1, vec![NodeId(0), s, b, NodeId(0)]),
    ];
    relabel_station_copies(&mut routes, &inst);
    assert_eq!(routes[0].nodes[2], s);
    assert_ne!(routes[1].nodes[1], s);
    assert_eq!(inst.physical(routes[1].nodes[1]), s);
}
