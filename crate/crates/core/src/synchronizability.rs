//! Cluster synchronizability: the best (over positive diagonal `D`) of the
//! smallest transverse Rayleigh quotient of `-(DL)^s` against `D`, and the
//! coupling threshold it implies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ClusteredGraph;
use crate::spectral::{
    left_perron_vector, scale_rows, symmetric_eigenvalues, symmetric_part, transverse_basis,
    TransverseBasis, WeightedLaplacian,
};

/// Default number of quotient evaluations for [`cs_optimize`].
pub const DEFAULT_BUDGET: usize = 500;

const INITIAL_STEP: f64 = 2.0;
const FINAL_STEP: f64 = 1.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynchronizabilityResult {
    /// Quotient for the Perron diagonal (or uniform `D` if none exists).
    pub cs_fixed: f64,
    /// Best quotient found; a lower bound on the true maximum.
    pub cs_best: f64,
    /// Diagonal achieving `cs_best`, normalized to trace `m`.
    pub d_best: Vec<f64>,
    /// `alpha / cs_best` when an `alpha` was supplied and `cs_best > 0`.
    pub c_min: Option<f64>,
    pub evaluations: usize,
}

/// `min_{u in T, u != 0} -u^T (DL)^s u / u^T D u`, the smallest eigenvalue of
/// the projected pencil, computed by a Cholesky reduction.
pub fn cs_fixed_d(l: &WeightedLaplacian, d: &DVector<f64>, basis: &TransverseBasis) -> Result<f64> {
    let m = l.dim();
    if d.len() != m || basis.basis.nrows() != m {
        return Err(Error::Dimension(format!(
            "L is {m}x{m}, d has length {}, basis has {} rows",
            d.len(),
            basis.basis.nrows()
        )));
    }
    if basis.dim() == 0 {
        return Err(Error::EmptyTransverseSpace);
    }
    let b = &basis.basis;
    let a = -symmetric_part(&(b.transpose() * symmetric_part(&scale_rows(d, &l.entries)) * b));
    let s = symmetric_part(&(b.transpose() * scale_rows(d, b)));
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Eigen("projected D is not positive definite".into()))?;
    let lower = chol.l();
    // C = L^{-1} A L^{-T}
    let y = lower
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = lower
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    Ok(symmetric_eigenvalues(symmetric_part(&c))?.min())
}

/// Quotient for the diagonal `d` on `graph`'s clustering.
pub fn cs_for_diagonal(
    graph: &ClusteredGraph,
    l: &WeightedLaplacian,
    d: &DVector<f64>,
) -> Result<f64> {
    let basis = transverse_basis(graph, d)?;
    cs_fixed_d(l, d, &basis)
}

fn normalize_trace(d: &mut DVector<f64>) {
    let m = d.len() as f64;
    let s = d.sum();
    *d *= m / s;
}

/// Coordinate ascent on the log-diagonal of `D`, starting from the Perron
/// vector, with multiplicative steps starting at 2 and shrinking
/// (square root) down to 1.01. At most `budget` quotient evaluations are
/// used. The result is deterministic.
pub fn cs_optimize(
    graph: &ClusteredGraph,
    l: &WeightedLaplacian,
    budget: usize,
    alpha: Option<f64>,
) -> Result<SynchronizabilityResult> {
    let m = graph.m();
    if l.dim() != m {
        return Err(Error::Dimension(format!(
            "L is {}x{}, graph has {m} vertices",
            l.dim(),
            l.dim()
        )));
    }
    let mut d = left_perron_vector(l).unwrap_or_else(|_| DVector::from_element(m, 1.0));
    normalize_trace(&mut d);
    let cs_fixed = cs_for_diagonal(graph, l, &d)?;
    let mut best = cs_fixed;
    let mut evaluations = 1;
    let mut step = INITIAL_STEP;

    'outer: while step >= FINAL_STEP {
        let mut improved = false;
        for i in 0..m {
            for factor in [step, 1.0 / step] {
                if evaluations >= budget {
                    break 'outer;
                }
                let mut trial = d.clone();
                trial[i] *= factor;
                normalize_trace(&mut trial);
                let value = cs_for_diagonal(graph, l, &trial)?;
                evaluations += 1;
                if value > best + 1e-13 {
                    best = value;
                    d = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step = step.sqrt();
        }
    }

    let c_min = match alpha {
        Some(a) if best > 0.0 => Some(coupling_threshold(a, best)?),
        _ => None,
    };
    Ok(SynchronizabilityResult {
        cs_fixed,
        cs_best: best,
        d_best: d.iter().copied().collect(),
        c_min,
        evaluations,
    })
}

/// `c_min = alpha / cs`.
pub fn coupling_threshold(alpha: f64, cs: f64) -> Result<f64> {
    if !(cs > 0.0) {
        return Err(Error::NotSynchronizable(cs));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(alpha / cs)
}

/// Largest eigenvalue of `-L` restricted to the `d = 1` transverse space;
/// for a symmetric `L` this equals the quotient with `D = I`.
pub fn restricted_spectrum(graph: &ClusteredGraph, l: &WeightedLaplacian) -> Result<DVector<f64>> {
    let ones = DVector::from_element(graph.m(), 1.0);
    let basis = transverse_basis(graph, &ones)?;
    if basis.dim() == 0 {
        return Err(Error::EmptyTransverseSpace);
    }
    let b = &basis.basis;
    let projected: DMatrix<f64> =
        -symmetric_part(&(b.transpose() * symmetric_part(&l.entries) * b));
    symmetric_eigenvalues(projected)
}
