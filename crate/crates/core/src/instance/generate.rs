//! Seeded random instances and stochastic edge perturbation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    euclidean, materialize_station_copies, EdgeMatrices, Instance, Node, RobustnessParams,
    VehicleSpec,
};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Relative standard deviation applied to every edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelSigma {
    Fixed(f64),
    /// Drawn uniformly per ordered edge from `[lo, hi]`.
    Range(f64, f64),
}

impl RelSigma {
    fn validate(self) -> Result<()> {
        let ok = |r: f64| (0.0..1.0).contains(&r);
        match self {
            RelSigma::Fixed(r) if ok(r) => Ok(()),
            RelSigma::Range(lo, hi) if ok(lo) && ok(hi) && lo <= hi => Ok(()),
            other => Err(Error::Validation(format!(
                "relative sigma must lie in [0, 1), got {other:?}"
            ))),
        }
    }
}

/// Sets `t_sigma = r * t_mu` and `e_sigma = r' * e_mu` per ordered edge.
///
/// Draws are taken per ordered pair of physical nodes in row-major order,
/// time before energy; station copies inherit the values of their original.
pub fn make_stochastic(inst: &Instance, rel_sigma: RelSigma, seed: u64) -> Result<Instance> {
    rel_sigma.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.n();
    let mut t_sigma = SquareMatrix::zeros(n);
    let mut e_sigma = SquareMatrix::zeros(n);
    let draw = |rng: &mut ChaCha8Rng| match rel_sigma {
        RelSigma::Fixed(r) => r,
        RelSigma::Range(lo, hi) if lo == hi => lo,
        RelSigma::Range(lo, hi) => rng.random_range(lo..=hi),
    };
    let physical: Vec<usize> = (0..n)
        .filter(|&i| inst.nodes[i].copy_of.is_none())
        .collect();
    for &i in &physical {
        for &j in &physical {
            if i == j {
                continue;
            }
            let rt = draw(&mut rng);
            let re = draw(&mut rng);
            t_sigma[(i, j)] = rt * inst.edges.t_mu[(i, j)];
            e_sigma[(i, j)] = re * inst.edges.e_mu[(i, j)];
        }
    }
    let origin: Vec<usize> = (0..n).map(|i| inst.physical(super::NodeId(i)).0).collect();
    let t_sigma = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            t_sigma[(origin[i], origin[j])]
        }
    });
    let e_sigma = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            e_sigma[(origin[i], origin[j])]
        }
    });
    let mut out = inst.clone();
    out.edges.t_sigma = t_sigma;
    out.edges.e_sigma = e_sigma;
    Ok(out)
}

/// Parameters of the random scenario family. Defaults reproduce the
/// published setting: a 100 x 100 map, demand in [5, 20], capacity 100,
/// 1.85 energy per distance unit, a 100-unit battery charged at rate 3,
/// 10 % stations, edge sigmas at 5 % to 30 % of nominal.
#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub n_nodes: usize,
    /// Vehicles per depot; its length is the number of depots.
    pub depot_vehicles: Vec<usize>,
    pub seed: u64,
    pub map_size: f64,
    pub demand_range: (u32, u32),
    pub capacity: f64,
    pub energy_per_distance: f64,
    pub soc_max: f64,
    pub soc_min: f64,
    pub charge_rate: f64,
    pub station_fraction: f64,
    pub rel_sigma: RelSigma,
    pub n_max: Option<usize>,
    pub station_copies: usize,
    pub robustness: RobustnessParams,
}

impl GeneratorParams {
    pub fn new(n_nodes: usize, depot_vehicles: Vec<usize>, seed: u64) -> Self {
        Self {
            n_nodes,
            depot_vehicles,
            seed,
            map_size: 100.0,
            demand_range: (5, 20),
            capacity: 100.0,
            energy_per_distance: 1.85,
            soc_max: 100.0,
            soc_min: 0.0,
            charge_rate: 3.0,
            station_fraction: 0.1,
            rel_sigma: RelSigma::Range(0.05, 0.30),
            n_max: None,
            station_copies: super::DEFAULT_STATION_COPIES,
            robustness: RobustnessParams::default(),
        }
    }
}

/// Scenario name in the `SR-n<nodes>-k<depots><vehicles...>` convention;
/// the vehicle part collapses to one digit when all depots are equal.
pub fn scenario_name(n_nodes: usize, depot_vehicles: &[usize]) -> String {
    let mut k = depot_vehicles.len().to_string();
    let uniform = depot_vehicles.windows(2).all(|w| w[0] == w[1]);
    if uniform && !depot_vehicles.is_empty() {
        k.push_str(&depot_vehicles[0].to_string());
    } else {
        for v in depot_vehicles {
            k.push_str(&v.to_string());
        }
    }
    format!("SR-n{n_nodes}-k{k}")
}

/// Inverse of [`scenario_name`]: `SR-n25-k221` gives `(25, [2, 1])`.
pub fn parse_scenario_name(name: &str) -> Option<(usize, Vec<usize>)> {
    let rest = name.strip_prefix("SR-n")?;
    let (n, k) = rest.split_once("-k")?;
    let n: usize = n.parse().ok()?;
    let digits: Vec<usize> = k
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()?;
    let (&depots, tail) = digits.split_first()?;
    match tail.len() {
        1 => Some((n, vec![tail[0]; depots])),
        l if l == depots && depots > 1 => Some((n, tail.to_vec())),
        _ => None,
    }
}

pub fn generate_random(params: &GeneratorParams) -> Result<Instance> {
    let depots = params.depot_vehicles.len();
    if depots == 0 || params.depot_vehicles.iter().sum::<usize>() == 0 {
        return Err(Error::Validation("vehicle layout has no vehicles".into()));
    }
    let n = params.n_nodes;
    let n_stations = ((n as f64 * params.station_fraction).ceil() as usize).max(1);
    if n < depots + n_stations + 1 {
        return Err(Error::Validation(format!(
            "{n} nodes cannot hold {depots} depots, {n_stations} stations and a customer"
        )));
    }
    params.rel_sigma.validate()?;
    let n_customers = n - depots - n_stations;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..params.map_size);
            let y = rng.random_range(0.0..params.map_size);
            (x, y)
        })
        .collect();
    let mut nodes = Vec::with_capacity(n);
    for (d, &v) in params.depot_vehicles.iter().enumerate() {
        nodes.push(Node::depot(d, Some(positions[d]), v));
    }
    for i in depots..depots + n_customers {
        let q = rng.random_range(params.demand_range.0..=params.demand_range.1);
        nodes.push(Node::customer(i, Some(positions[i]), q as f64));
    }
    for i in depots + n_customers..n {
        nodes.push(Node::station(i, Some(positions[i])));
    }
    let mut edges = EdgeMatrices::deterministic(euclidean(&positions), params.energy_per_distance);
    materialize_station_copies(&mut nodes, &mut edges, params.station_copies);
    let sigma_seed: u64 = rng.random();
    let inst = Instance {
        name: scenario_name(n, &params.depot_vehicles),
        nodes,
        edges,
        vehicle: VehicleSpec {
            capacity: params.capacity,
            soc_max: params.soc_max,
            soc_min: params.soc_min,
            soc_start: params.soc_max,
            n_max: params.n_max.unwrap_or(n_customers),
            charge_rate: params.charge_rate,
        },
        robustness: params.robustness,
        station_copies: params.station_copies,
        reference_cost: None,
    };
    let inst = make_stochastic(&inst, params.rel_sigma, sigma_seed)?;
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::line_instance;
    use crate::instance::NodeKind;

    #[test]
    fn zero_sigma_is_identity_on_deterministic_input() {
        let inst = line_instance();
        assert_eq!(
            make_stochastic(&inst, RelSigma::Fixed(0.0), 3).unwrap(),
            inst
        );
    }

    #[test]
    fn fixed_fraction_is_exact() {
        let inst = line_instance();
        let s = make_stochastic(&inst, RelSigma::Fixed(0.01), 3).unwrap();
        for i in 0..inst.n() {
            for j in 0..inst.n() {
                assert_eq!(s.edges.t_sigma[(i, j)], 0.01 * inst.edges.t_mu[(i, j)]);
                assert_eq!(s.edges.e_sigma[(i, j)], 0.01 * inst.edges.e_mu[(i, j)]);
            }
        }
    }

    #[test]
    fn range_draws_are_seeded_and_bounded() {
        let inst = line_instance();
        let a = make_stochastic(&inst, RelSigma::Range(0.05, 0.30), 11).unwrap();
        let b = make_stochastic(&inst, RelSigma::Range(0.05, 0.30), 11).unwrap();
        let c = make_stochastic(&inst, RelSigma::Range(0.05, 0.30), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..inst.n() {
            for j in 0..inst.n() {
                let t = inst.edges.t_mu[(i, j)];
                let s = a.edges.t_sigma[(i, j)];
                assert!(s >= 0.05 * t - 1e-12 && s <= 0.30 * t + 1e-12);
            }
        }
        // Copy 4 duplicates station 3.
        assert_eq!(a.edges.t_sigma[(4, 1)], a.edges.t_sigma[(3, 1)]);
        assert_eq!(a.edges.e_sigma[(2, 4)], a.edges.e_sigma[(2, 3)]);
    }

    #[test]
    fn rejects_bad_sigma() {
        let inst = line_instance();
        assert!(make_stochastic(&inst, RelSigma::Fixed(1.0), 0).is_err());
        assert!(make_stochastic(&inst, RelSigma::Range(0.3, 0.1), 0).is_err());
    }

    #[test]
    fn small_random_scenario_shape() {
        let inst = generate_random(&GeneratorParams::new(11, vec![1], 5)).unwrap();
        assert_eq!(inst.name, "SR-n11-k11");
        let physical = inst.nodes.iter().filter(|n| n.copy_of.is_none()).count();
        assert_eq!(physical, 11);
        assert_eq!(inst.depots().len(), 1);
        assert_eq!(inst.total_vehicles(), 1);
        let stations = inst
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Station && n.copy_of.is_none())
            .count();
        assert_eq!(stations, 2);
        assert_eq!(inst.customers().len(), 8);
        for c in inst.customers() {
            let q = inst.node(c).demand;
            assert!((5.0..=20.0).contains(&q) && q.fract() == 0.0);
        }
        assert_eq!(inst.vehicle.capacity, 100.0);
        assert_eq!(inst.vehicle.soc_max, 100.0);
        assert_eq!(inst.vehicle.charge_rate, 3.0);
        let (i, j) = (1, 2);
        assert!((inst.edges.e_mu[(i, j)] - 1.85 * inst.edges.t_mu[(i, j)]).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = GeneratorParams::new(20, vec![2, 1], 99);
        assert_eq!(generate_random(&p).unwrap(), generate_random(&p).unwrap());
    }

    #[test]
    fn tiny_fleet_is_flagged() {
        let mut p = GeneratorParams::new(30, vec![1], 4);
        p.capacity = 20.0;
        let inst = generate_random(&p).unwrap();
        assert!(inst.total_demand() > 20.0);
        assert!(inst.infeasibility().is_some());
    }

    #[test]
    fn empty_layout_rejected() {
        assert!(generate_random(&GeneratorParams::new(10, vec![0, 0], 1)).is_err());
        assert!(generate_random(&GeneratorParams::new(10, vec![], 1)).is_err());
        assert!(generate_random(&GeneratorParams::new(2, vec![1], 1)).is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for (name, n, layout) in [
            ("SR-n11-k11", 11, vec![1]),
            ("SR-n15-k22", 15, vec![2, 2]),
            ("SR-n25-k221", 25, vec![2, 1]),
            ("SR-n30-k32", 30, vec![2, 2, 2]),
        ] {
            assert_eq!(scenario_name(n, &layout), name);
            assert_eq!(parse_scenario_name(name), Some((n, layout)));
        }
        assert_eq!(parse_scenario_name("E-n22-k4"), None);
    }
}
