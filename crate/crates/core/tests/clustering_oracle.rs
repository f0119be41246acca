use recvrp::clustering::{
    build_cost_matrix, cluster, group_cost, validate_clustering, CostMatrixZ, CostType,
};
use recvrp::instance::{generate_random, GeneratorParams, Instance, NodeId};

fn cost_of(z: &CostMatrixZ, ct: CostType, depot: NodeId, members: &[NodeId]) -> f64 {
    let mut nodes = vec![depot];
    nodes.extend_from_slice(members);
    group_cost(&nodes, z, ct)
}

fn feasible(inst: &Instance, members: &[NodeId]) -> bool {
    !members.is_empty()
        && members.len() <= inst.vehicle.n_max
        && members.iter().map(|&c| inst.node(c).demand).sum::<f64>() <= inst.vehicle.capacity + 1e-9
}

/// Total cost of every feasible two-way split, keyed by the mask of
/// customers that go to the first vehicle.
fn landscape(inst: &Instance, z: &CostMatrixZ, ct: CostType) -> Vec<(u32, f64)> {
    let cs = inst.customers();
    let d = inst.depots()[0];
    let mut out = Vec::new();
    for mask in 0..(1u32 << cs.len()) {
        let a: Vec<NodeId> = (0..cs.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| cs[i])
            .collect();
        let b: Vec<NodeId> = (0..cs.len())
            .filter(|i| mask >> i & 1 == 0)
            .map(|i| cs[i])
            .collect();
        if feasible(inst, &a) && feasible(inst, &b) {
            out.push((mask, cost_of(z, ct, d, &a) + cost_of(z, ct, d, &b)));
        }
    }
    out
}

/// A split is locally optimal when no relocation, 1-1 or 2-1 exchange
/// lowers the total by more than the acceptance threshold.
fn is_local_optimum(mask: u32, cost: f64, all: &[(u32, f64)], n: usize) -> bool {
    let lookup = |m: u32| all.iter().find(|(k, _)| *k == m).map(|(_, c)| *c);
    let mut neighbours = Vec::new();
    for i in 0..n {
        neighbours.push(mask ^ (1 << i));
        for j in 0..n {
            if (mask >> i & 1) != (mask >> j & 1) {
                neighbours.push(mask ^ (1 << i) ^ (1 << j));
                for k in j + 1..n {
                    if (mask >> j & 1) == (mask >> k & 1) && k != i {
                        neighbours.push(mask ^ (1 << i) ^ (1 << j) ^ (1 << k));
                    }
                }
            }
        }
    }
    neighbours
        .into_iter()
        .filter_map(lookup)
        .all(|c| c >= cost - 1e-9)
}

#[test]
fn result_is_a_local_optimum_never_below_global() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let inst = generate_random(&GeneratorParams::new(8, vec![2], seed)).unwrap();
        assert_eq!(inst.customers().len(), 6);
        for ct in [CostType::F1, CostType::F2, CostType::F3] {
            let z = build_cost_matrix(&inst, None).unwrap();
            let clu = cluster(&inst, &z, ct).unwrap();
            assert!(validate_clustering(&clu, &inst).is_empty());
            let all = landscape(&inst, &z, ct);
            let global = all.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
            assert!(clu.total_cost >= global - 1e-9);
            let cs = inst.customers();
            let mask: u32 = (0..cs.len())
                .filter(|&i| clu.groups[0].customers.contains(&cs[i]))
                .map(|i| 1 << i)
                .sum();
            let (_, cost) = all.iter().find(|(m, _)| *m == mask).copied().unwrap();
            assert!((cost - clu.total_cost).abs() < 1e-6);
            assert!(
                is_local_optimum(mask, cost, &all, cs.len()),
                "seed {seed} {ct}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 120);
}
