//! Group cost matrix and the three spectral/norm group costs.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, NodeId};
use crate::matrix::SquareMatrix;
use crate::stochmath::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CostType {
    /// Largest eigenvalue times the number of group nodes.
    F1,
    /// Frobenius norm.
    F2,
    /// Sum of absolute eigenvalues.
    #[default]
    F3,
}

impl fmt::Display for CostType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostType::F1 => "F1",
            CostType::F2 => "F2",
            CostType::F3 => "F3",
        })
    }
}

impl FromStr for CostType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(CostType::F1),
            "F2" => Ok(CostType::F2),
            "F3" => Ok(CostType::F3),
            _ => Err(Error::Validation(format!(
                "unknown cost type `{s}` (expected F1, F2 or F3)"
            ))),
        }
    }
}

/// Combined travel cost `t_mu + z_t t_sigma + (e_mu + z_e e_sigma) / R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrixZ {
    pub z: SquareMatrix,
    pub r_param: f64,
    /// Symmetric part `(Z + Z^T) / 2`, on which all group costs are taken.
    sym: SquareMatrix,
}

impl CostMatrixZ {
    pub fn new(z: SquareMatrix, r_param: f64) -> Self {
        let sym = SquareMatrix::from_fn(z.dim(), |i, j| 0.5 * (z[(i, j)] + z[(j, i)]));
        Self { z, r_param, sym }
    }

    pub fn at(&self, i: NodeId, j: NodeId) -> f64 {
        self.z[(i.0, j.0)]
    }

    pub fn symmetric(&self) -> &SquareMatrix {
        &self.sym
    }
}

/// `r_param` defaults to the vehicle charge rate.
pub fn build_cost_matrix(inst: &Instance, r_param: Option<f64>) -> Result<CostMatrixZ> {
    let r = r_param.unwrap_or(inst.vehicle.charge_rate);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Validation(format!("R must be positive, got {r}")));
    }
    let zt = quantile(inst.robustness.p_t)?;
    let ze = quantile(inst.robustness.p_e)?;
    let e = &inst.edges;
    let z = SquareMatrix::from_fn(inst.n(), |i, j| {
        e.t_mu[(i, j)] + zt * e.t_sigma[(i, j)] + (e.e_mu[(i, j)] + ze * e.e_sigma[(i, j)]) / r
    });
    Ok(CostMatrixZ::new(z, r))
}

const POWER_TOL: f64 = 1e-8;

/// Dominant eigenvalue of a symmetric nonnegative matrix by power iteration
/// from the all-ones vector. `None` when it fails to settle within
/// `10 * dim` steps.
pub fn power_iteration(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    if n == 0 {
        return Some(0.0);
    }
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..10 * n {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Some(0.0);
        }
        let done = (norm - lambda).abs() <= POWER_TOL * norm.max(1.0);
        lambda = norm;
        v = w / norm;
        if done {
            return Some(lambda);
        }
    }
    None
}

fn eigenvalues(m: DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::SymmetricEigen::new(m).eigenvalues
}

/// Principal submatrix of the symmetrized Z over `nodes`.
pub fn group_matrix(nodes: &[NodeId], z: &CostMatrixZ) -> DMatrix<f64> {
    let s = z.symmetric();
    DMatrix::from_fn(nodes.len(), nodes.len(), |a, b| s[(nodes[a].0, nodes[b].0)])
}

pub fn group_cost(nodes: &[NodeId], z: &CostMatrixZ, cost_type: CostType) -> f64 {
    let m = group_matrix(nodes, z);
    match cost_type {
        CostType::F1 => {
            let lambda = power_iteration(&m).unwrap_or_else(|| eigenvalues(m).amax());
            lambda * nodes.len() as f64
        }
        CostType::F2 => m.norm(),
        CostType::F3 => eigenvalues(m).iter().map(|l| l.abs()).sum(),
    }
}
