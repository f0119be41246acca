//! End-to-end solve: cluster, attach stations, search each group, check.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::clustering::{
    attach_stations, build_cost_matrix, cluster, Clustering, CostMatrixZ, Group,
};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rectsp::{make_subgroups, relabel_station_copies, solve_for_vehicle, SearchConfig};
use crate::routeeval::{check_solution, FeasibilityReport, Solution};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    /// Energy-to-time conversion in the cost matrix; defaults to the charge rate.
    pub r_param: Option<f64>,
    pub search: SearchConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub clustering: Duration,
    pub routing: Duration,
    pub checking: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub clustering: Clustering,
    pub solution: Solution,
    pub feasibility: FeasibilityReport,
    /// Some group search hit its timeout and returned its incumbent.
    pub timed_out: bool,
    pub timings: StageTimings,
}

pub fn solve_instance(inst: &Instance, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let t0 = Instant::now();
    let z = build_cost_matrix(inst, cfg.r_param)?;
    let clu = cluster(inst, &z, cfg.search.cost_type)?;
    let clu = attach_stations(&clu, inst, &z);
    let t1 = Instant::now();
    let (solution, timed_out) = solve_groups(&clu.groups, inst, &z, &cfg.search)?;
    let t2 = Instant::now();
    let feasibility = check_solution(&solution, inst);
    let timings = StageTimings {
        clustering: t1 - t0,
        routing: t2 - t1,
        checking: t2.elapsed(),
    };
    Ok(PipelineOutput {
        clustering: clu,
        solution,
        feasibility,
        timed_out,
        timings,
    })
}

/// Searches every group independently; group `k` becomes vehicle `k`.
/// Returns the assembled solution and whether any search timed out.
pub fn solve_groups(
    groups: &[Group],
    inst: &Instance,
    z: &CostMatrixZ,
    cfg: &SearchConfig,
) -> Result<(Solution, bool)> {
    let one = |(k, g): (usize, &Group)| {
        let plan = make_subgroups(g, z, cfg)?;
        solve_for_vehicle(g, &plan, inst, cfg, k)
    };
    let outcomes: Vec<_> = if cfg.parallel_width > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel_width)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| groups.par_iter().enumerate().map(one).collect())
    } else {
        groups.iter().enumerate().map(one).collect()
    };
    let mut routes = Vec::with_capacity(groups.len());
    let mut plans = Vec::with_capacity(groups.len());
    let mut timed_out = false;
    for o in outcomes {
        let o = o?;
        timed_out |= o.timed_out;
        routes.push(o.route);
        plans.push(o.plan);
    }
    relabel_station_copies(&mut routes, inst);
    Ok((Solution::new(routes, plans, inst)?, timed_out))
}
