use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::routeeval::{soc_tolerance, Solution};

/// Probabilities at which empirical tour-time quantiles are reported.
pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.5, 0.9, 0.99, 0.999];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMc {
    pub vehicle_id: usize,
    /// Fraction of samples in which the SoC fell below `soc_min` anywhere on the route.
    pub violation_rate: f64,
    pub time_quantiles: BTreeMap<String, f64>,
    pub mean_time: f64,
    pub min_soc_mean: f64,
    pub min_soc_lowest: f64,
    /// Empirical 0.001-quantile of the route's minimum SoC.
    pub min_soc_q001: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub samples: usize,
    pub seed: u64,
    /// Worst per-route violation rate.
    pub soc_violation_rate: f64,
    /// Fraction of samples with a violation on any route.
    pub any_route_violation_rate: f64,
    /// Quantiles of the summed tour time over all routes.
    pub time_quantiles: BTreeMap<String, f64>,
    pub routes: Vec<RouteMc>,
}

/// One replayed route in one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub sample: usize,
    pub route: usize,
    pub tour_time: f64,
    pub min_soc: f64,
    pub violated: bool,
}

/// Normal draw conditioned on being nonnegative.
fn draw(rng: &mut ChaCha8Rng, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.max(0.0);
    }
    let d = Normal::new(mu, sigma).expect("finite sigma");
    loop {
        let x = d.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

fn replay(sol: &Solution, inst: &Instance, sample: usize, seed: u64) -> Vec<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    let v = &inst.vehicle;
    let floor = v.soc_min - soc_tolerance(inst);
    let e = &inst.edges;
    sol.routes
        .iter()
        .zip(&sol.plans)
        .enumerate()
        .map(|(r, (route, plan))| {
            let mut soc = v.soc_start;
            let mut min_soc = soc;
            let mut time = 0.0;
            for k in 1..route.nodes.len() {
                let (i, j) = (route.nodes[k - 1].0, route.nodes[k].0);
                time += draw(&mut rng, e.t_mu[(i, j)], e.t_sigma[(i, j)]);
                soc -= draw(&mut rng, e.e_mu[(i, j)], e.e_sigma[(i, j)]);
                min_soc = min_soc.min(soc);
                let tau = plan.at(k);
                if tau > 0.0 {
                    time += tau;
                    soc = (soc + tau * v.charge_rate).min(v.soc_max);
                }
            }
            Trace {
                sample,
                route: r,
                tour_time: time,
                min_soc,
                violated: min_soc < floor,
            }
        })
        .collect()
}

/// Empirical quantile: the smallest sample with at least `p` of the mass at or below it.
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn quantile_map(mut xs: Vec<f64>) -> BTreeMap<String, f64> {
    xs.sort_by(f64::total_cmp);
    QUANTILE_LEVELS
        .iter()
        .map(|&p| (p.to_string(), empirical_quantile(&xs, p)))
        .collect()
}

/// Replays every route `samples` times with independently drawn edge times
/// and energies (normal, truncated at zero) and the fixed charging plan.
/// Sample `s` always uses the same random stream, so results do not depend
/// on thread count.
pub fn simulate_with_traces(
    sol: &Solution,
    inst: &Instance,
    samples: usize,
    seed: u64,
) -> (McReport, Vec<Trace>) {
    let samples = samples.max(1);
    let traces: Vec<Trace> = (0..samples)
        .into_par_iter()
        .flat_map_iter(|s| replay(sol, inst, s, seed))
        .collect();
    let nr = sol.routes.len();
    let mut routes = Vec::with_capacity(nr);
    for r in 0..nr {
        let mine: Vec<&Trace> = traces.iter().filter(|t| t.route == r).collect();
        let n = mine.len() as f64;
        let mut mins: Vec<f64> = mine.iter().map(|t| t.min_soc).collect();
        mins.sort_by(f64::total_cmp);
        routes.push(RouteMc {
            vehicle_id: sol.routes[r].vehicle_id,
            violation_rate: mine.iter().filter(|t| t.violated).count() as f64 / n,
            time_quantiles: quantile_map(mine.iter().map(|t| t.tour_time).collect()),
            mean_time: mine.iter().map(|t| t.tour_time).sum::<f64>() / n,
            min_soc_mean: mins.iter().sum::<f64>() / n,
            min_soc_lowest: mins[0],
            min_soc_q001: empirical_quantile(&mins, 0.001),
        });
    }
    let per_sample = |s: usize| &traces[s * nr..(s + 1) * nr];
    let any = (0..samples)
        .filter(|&s| per_sample(s).iter().any(|t| t.violated))
        .count();
    let totals = (0..samples)
        .map(|s| per_sample(s).iter().map(|t| t.tour_time).sum())
        .collect();
    let report = McReport {
        samples,
        seed,
        soc_violation_rate: routes.iter().map(|r| r.violation_rate).fold(0.0, f64::max),
        any_route_violation_rate: if nr == 0 {
            0.0
        } else {
            any as f64 / samples as f64
        },
        time_quantiles: if nr == 0 {
            BTreeMap::new()
        } else {
            quantile_map(totals)
        },
        routes,
    };
    (report, traces)
}

pub fn simulate(sol: &Solution, inst: &Instance, samples: usize, seed: u64) -> McReport {
    simulate_with_traces(sol, inst, samples, seed).0
}

/// CSV with one row per sample and route.
pub fn write_traces(traces: &[Trace]) -> String {
    let mut out = String::from("sample,route,tour_time,min_soc\n");
    for t in traces {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            t.sample, t.route, t.tour_time, t.min_soc
        );
    }
    out
}

impl fmt::Display for McReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RECVRP-MC 1")?;
        writeln!(f, "samples {}", self.samples)?;
        writeln!(f, "seed {}", self.seed)?;
        writeln!(f, "soc_violation_rate {}", self.soc_violation_rate)?;
        writeln!(
            f,
            "any_route_violation_rate {}",
            self.any_route_violation_rate
        )?;
        for (p, q) in &self.time_quantiles {
            writeln!(f, "time_quantile {p} {q}")?;
        }
        for r in &self.routes {
            writeln!(
                f,
                "route {} violation_rate {} mean_time {} min_soc_mean {} min_soc_lowest {} min_soc_q001 {}",
                r.vehicle_id, r.violation_rate, r.mean_time, r.min_soc_mean, r.min_soc_lowest, r.min_soc_q001
            )?;
            for (p, q) in &r.time_quantiles {
                writeln!(f, "route_time_quantile {} {p} {q}", r.vehicle_id)?;
            }
        }
        writeln!(f, "end")
    }
}
