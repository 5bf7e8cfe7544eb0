//! Synchronization diagnostics computed from sampled runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ClusteredGraph;
use crate::simulator::{cluster_average, SimulationRun};

/// Default averaging window for [`var_metric`].
pub const DEFAULT_WINDOW: (f64, f64) = (50.0, 100.0);
/// Weight oscillation below which an edge counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-4;
/// Fraction of the run (at the end) inspected for weight convergence.
pub const CONVERGENCE_TAIL: f64 = 0.2;

const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MetricTrace {
    fn new(name: &str, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            times,
            values,
        }
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Smallest value among samples with `a <= t <= b`.
    pub fn min_over(&self, a: f64, b: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&t, _)| t >= a - TIME_SLACK && t <= b + TIME_SLACK)
            .map(|(_, &v)| v)
            .reduce(f64::min)
    }
}

/// Unweighted cluster means, `K` rows of length `n`.
pub fn cluster_means(state: &[f64], n: usize, graph: &ClusteredGraph) -> Vec<Vec<f64>> {
    cluster_average(state, n, graph, &vec![1.0; graph.m()])
}

/// `sum_k 1/(#C_k - 1) sum_{i in C_k} |x_i - mean_k|^2`; singleton
/// clusters contribute 0.
pub fn intra_variance(state: &[f64], n: usize, graph: &ClusteredGraph) -> f64 {
    let means = cluster_means(state, n, graph);
    graph
        .clusters()
        .iter()
        .zip(&means)
        .filter(|(members, _)| members.len() > 1)
        .map(|(members, mean)| {
            let s: f64 = members
                .iter()
                .map(|&i| {
                    (0..n)
                        .map(|k| (state[i * n + k] - mean[k]).powi(2))
                        .sum::<f64>()
                })
                .sum();
            s / (members.len() - 1) as f64
        })
        .sum()
}

/// Instantaneous intra-cluster variance `K(t)` at every sample.
pub fn k_metric(run: &SimulationRun, graph: &ClusteredGraph) -> MetricTrace {
    let values = run
        .states
        .iter()
        .map(|s| intra_variance(s, run.n, graph))
        .collect();
    MetricTrace::new("K", run.times.clone(), values)
}

/// Mean of `K(t)` over the samples in `window`.
pub fn var_metric(run: &SimulationRun, graph: &ClusteredGraph, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    let first = run.times.first().copied().unwrap_or(f64::INFINITY);
    let last = run.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    if !(a <= b) || first > a + TIME_SLACK || last < b - TIME_SLACK {
        return Err(Error::InvalidParameter(format!(
            "window [{a}, {b}] is not covered by the run [{first}, {last}]"
        )));
    }
    let values: Vec<f64> = run
        .times
        .iter()
        .zip(&run.states)
        .filter(|(&t, _)| t >= a - TIME_SLACK && t <= b + TIME_SLACK)
        .map(|(_, s)| intra_variance(s, run.n, graph))
        .collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Smallest squared distance between two cluster means, per sample.
pub fn dis_metric(run: &SimulationRun, graph: &ClusteredGraph) -> Result<MetricTrace> {
    let kk = graph.n_clusters();
    if kk < 2 {
        return Err(Error::InvalidParameter(
            "dis needs at least two clusters".into(),
        ));
    }
    let values = run
        .states
        .iter()
        .map(|s| {
            let means = cluster_means(s, run.n, graph);
            let mut best = f64::INFINITY;
            for a in 0..kk {
                for b in a + 1..kk {
                    let d2: f64 = means[a]
                        .iter()
                        .zip(&means[b])
                        .map(|(x, y)| (x - y).powi(2))
                        .sum();
                    best = best.min(d2);
                }
            }
            best
        })
        .collect();
    Ok(MetricTrace::new("dis", run.times.clone(), values))
}

/// `V = 1/2 sum_i d_i |x_i - xbar^k_d|^2` for one state.
pub fn lyapunov_value(state: &[f64], n: usize, graph: &ClusteredGraph, d: &[f64]) -> f64 {
    let averages = cluster_average(state, n, graph, d);
    0.5 * (0..graph.m())
        .map(|i| {
            let avg = &averages[graph.cluster_of(i)];
            d[i] * (0..n)
                .map(|k| (state[i * n + k] - avg[k]).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
}

pub fn lyapunov_v(run: &SimulationRun, graph: &ClusteredGraph, d: &[f64]) -> MetricTrace {
    let values = run
        .states
        .iter()
        .map(|s| lyapunov_value(s, run.n, graph, d))
        .collect();
    MetricTrace::new("V", run.times.clone(), values)
}

/// `Q = V + sum_{(i,j)} (w_ij - r_ij)^2 / (2 rho_ij)` over directed edges,
/// with reference weights `r_ij` (typically `c l_ij`).
pub fn lyapunov_q(
    run: &SimulationRun,
    graph: &ClusteredGraph,
    d: &[f64],
    reference: &[f64],
    rho: &[f64],
) -> Result<MetricTrace> {
    let weights = run
        .weights
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("Q needs an adaptive run".into()))?;
    if reference.len() != run.directed_edges.len() || rho.len() != run.directed_edges.len() {
        return Err(Error::Dimension(
            "one reference weight and gain per directed edge".into(),
        ));
    }
    let values = run
        .states
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            lyapunov_value(s, run.n, graph, d)
                + w.iter()
                    .zip(reference)
                    .zip(rho)
                    .map(|((w, r), p)| (w - r).powi(2) / (2.0 * p))
                    .sum::<f64>()
        })
        .collect();
    Ok(MetricTrace::new("Q", run.times.clone(), values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceVerdict {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConvergence {
    pub i: usize,
    pub j: usize,
    pub intra: bool,
    /// `sup - inf` of the weight over the final part of the run.
    pub oscillation: f64,
    pub final_weight: f64,
    pub verdict: ConvergenceVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConvergenceReport {
    pub edges: Vec<EdgeConvergence>,
    pub intra_converged: usize,
    pub intra_total: usize,
    pub inter_converged: usize,
    pub inter_total: usize,
    pub negative_final: usize,
    pub max_intra_oscillation: f64,
}

impl WeightConvergenceReport {
    pub fn all_intra_converged(&self) -> bool {
        self.intra_converged == self.intra_total
    }
}

/// Oscillation of every directed-edge weight over the final 20% of the run.
pub fn weight_convergence_report(
    run: &SimulationRun,
    graph: &ClusteredGraph,
) -> Result<WeightConvergenceReport> {
    let weights = run
        .weights
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("weight report needs an adaptive run".into()))?;
    let t_last = *run.times.last().unwrap_or(&0.0);
    let t_from = (1.0 - CONVERGENCE_TAIL) * t_last;
    let tail: Vec<&Vec<f64>> = run
        .times
        .iter()
        .zip(weights)
        .filter(|(&t, _)| t >= t_from - TIME_SLACK)
        .map(|(_, w)| w)
        .collect();
    let mut edges = Vec::with_capacity(run.directed_edges.len());
    for (e, &(i, j)) in run.directed_edges.iter().enumerate() {
        let (lo, hi) = tail
            .iter()
            .map(|w| w[e])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        let oscillation = hi - lo;
        edges.push(EdgeConvergence {
            i,
            j,
            intra: graph.is_intra_edge(i, j),
            oscillation,
            final_weight: tail.last().map(|w| w[e]).unwrap_or(f64::NAN),
            verdict: if oscillation <= CONVERGENCE_TOL {
                ConvergenceVerdict::Converged
            } else {
                ConvergenceVerdict::NotConverged
            },
        });
    }
    let count = |intra: bool, conv: bool| {
        edges
            .iter()
            .filter(|e| e.intra == intra && (!conv || e.verdict == ConvergenceVerdict::Converged))
            .count()
    };
    Ok(WeightConvergenceReport {
        intra_converged: count(true, true),
        intra_total: count(true, false),
        inter_converged: count(false, true),
        inter_total: count(false, false),
        negative_final: edges.iter().filter(|e| e.final_weight < 0.0).count(),
        max_intra_oscillation: edges
            .iter()
            .filter(|e| e.intra)
            .map(|e| e.oscillation)
            .fold(0.0, f64::max),
        edges,
    })
}
