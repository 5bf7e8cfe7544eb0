//! Integration of the fixed-weight and adaptive coupled systems.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{NodeDynamics, Region, Rk4};
use crate::error::{Error, Result};
use crate::graph::ClusteredGraph;
use crate::spectral::{EdgeWeights, WeightedLaplacian};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default number of steps between stored samples.
pub const DEFAULT_SAMPLE_EVERY: usize = 10;
/// A run is stopped once any coordinate exceeds this magnitude.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Random stream used for initial states.
pub const STATE_STREAM: u64 = 0;
/// Random stream used for initial adaptive weights.
pub const WEIGHT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// `x_i' = f_k(x_i) + c sum_j l_ij Gamma x_j`.
    Fixed {
        c: f64,
        laplacian: WeightedLaplacian,
    },
    /// Weights evolve by `w_ij' = rho_ij d_i (x_i - xbar_k)^T Gamma (x_i - x_j)`;
    /// `rho` is indexed like [`ClusteredGraph::directed_edges`].
    Adaptive { rho: Vec<f64>, d: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    pub graph: ClusteredGraph,
    pub dynamics: NodeDynamics,
    pub coupling: Coupling,
}

impl CoupledSystem {
    pub fn new(graph: ClusteredGraph, dynamics: NodeDynamics, coupling: Coupling) -> Result<Self> {
        if dynamics.n_clusters() != graph.n_clusters() {
            return Err(Error::Dimension(format!(
                "{} fields for {} clusters",
                dynamics.n_clusters(),
                graph.n_clusters()
            )));
        }
        match &coupling {
            Coupling::Fixed { c, laplacian } => {
                if laplacian.dim() != graph.m() {
                    return Err(Error::Dimension("Laplacian size differs from graph".into()));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidParameter("c must be finite".into()));
                }
            }
            Coupling::Adaptive { rho, d } => {
                if rho.len() != 2 * graph.edges().len() {
                    return Err(Error::Dimension(
                        "one gain per directed edge is required".into(),
                    ));
                }
                if rho.iter().any(|&r| !(r > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "adaptive gains must be positive".into(),
                    ));
                }
                if d.len() != graph.m() || d.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "d must be positive with length m".into(),
                    ));
                }
            }
        }
        Ok(Self {
            graph,
            dynamics,
            coupling,
        })
    }

    pub fn n(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    Diverged { t: f64 },
}

/// Sampled trajectory. States are stored flat, node-major (`x[i * n + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub m: usize,
    pub n: usize,
    pub h: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Directed-edge weights per sample (adaptive runs only).
    pub weights: Option<Vec<Vec<f64>>>,
    pub directed_edges: Vec<(usize, usize)>,
    pub status: RunStatus,
}

impl SimulationRun {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("runs hold at least the initial sample")
    }

    pub fn node<'a>(&self, state: &'a [f64], i: usize) -> &'a [f64] {
        &state[i * self.n..(i + 1) * self.n]
    }

    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// `x_bar^k_d = sum_{i in C_k} d_i x_i / sum_{i in C_k} d_i`, as `K` rows of
/// length `n`.
pub fn cluster_average(x: &[f64], n: usize, graph: &ClusteredGraph, d: &[f64]) -> Vec<Vec<f64>> {
    graph
        .clusters()
        .iter()
        .map(|members| {
            let mut acc = vec![0.0; n];
            let mut total = 0.0;
            for &i in members {
                total += d[i];
                for k in 0..n {
                    acc[k] += d[i] * x[i * n + k];
                }
            }
            acc.iter_mut().for_each(|a| *a /= total);
            acc
        })
        .collect()
}

/// Uniform initial states in `[-3, 3]` from stream [`STATE_STREAM`].
pub fn random_initial_states(m: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STATE_STREAM);
    (0..m * n).map(|_| rng.random_range(-3.0..=3.0)).collect()
}

/// Uniform initial weights in `[-5, 5]` from stream [`WEIGHT_STREAM`].
pub fn random_initial_weights(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WEIGHT_STREAM);
    (0..count).map(|_| rng.random_range(-5.0..=5.0)).collect()
}

/// Directed weights from an [`EdgeWeights`] map, ordered like
/// [`ClusteredGraph::directed_edges`].
pub fn weights_vector(graph: &ClusteredGraph, weights: &EdgeWeights) -> Result<Vec<f64>> {
    graph
        .directed_edges()
        .iter()
        .map(|&(i, j)| weights.get(i, j).ok_or(Error::MissingWeight(i, j)))
        .collect()
}

fn validate_run(
    x0: &[f64],
    expected: usize,
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<usize> {
    if x0.len() != expected {
        return Err(Error::Dimension(format!(
            "initial state has length {}, expected {expected}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial state must be finite".into(),
        ));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "T must be positive, got {t_end}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "h must be positive, got {h}"
        )));
    }
    if sample_every == 0 {
        return Err(Error::InvalidParameter(
            "sample_every must be at least 1".into(),
        ));
    }
    Ok((t_end / h).round().max(1.0) as usize)
}

/// Precomputed sparse rows of `c L` (including the diagonal).
fn coupling_rows(graph: &ClusteredGraph, c: f64, l: &WeightedLaplacian) -> Vec<Vec<(usize, f64)>> {
    (0..graph.m())
        .map(|i| {
            let mut row = vec![(i, c * l.entries[(i, i)])];
            row.extend(
                graph
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, c * l.entries[(i, j)])),
            );
            row.retain(|&(_, v)| v != 0.0);
            row
        })
        .collect()
}

fn add_node_fields(system: &CoupledSystem, x: &[f64], out: &mut [f64]) {
    let n = system.n();
    for i in 0..system.m() {
        let field = &system.dynamics.fields[system.graph.cluster_of(i)];
        field.eval_into(&x[i * n..(i + 1) * n], &mut out[i * n..(i + 1) * n]);
    }
}

fn diverged(x: &[f64]) -> bool {
    x.iter().any(|v| !(v.abs() <= DIVERGENCE_THRESHOLD))
}

/// Shared stepping loop: integrates `state`, sampling every `sample_every`
/// steps and at the end, and stopping early on divergence.
fn integrate<F>(
    mut derivative: F,
    mut state: Vec<f64>,
    steps: usize,
    h: f64,
    sample_every: usize,
    mut record: impl FnMut(f64, &[f64]),
) -> RunStatus
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut rk = Rk4::new(state.len());
    record(0.0, &state);
    for step in 1..=steps {
        let t = step as f64 * h;
        if rk.step(&mut derivative, &mut state, h, t - h).is_err() || diverged(&state) {
            return RunStatus::Diverged { t };
        }
        if step % sample_every == 0 || step == steps {
            record(t, &state);
        }
    }
    RunStatus::Completed
}

/// Fixed-weight run of `T / h` (rounded) RK4 steps.
pub fn simulate_fixed(
    system: &CoupledSystem,
    x0: &[f64],
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<SimulationRun> {
    let Coupling::Fixed { c, laplacian } = &system.coupling else {
        return Err(Error::InvalidParameter(
            "simulate_fixed needs a fixed coupling".into(),
        ));
    };
    let (m, n) = (system.m(), system.n());
    let steps = validate_run(x0, m * n, t_end, h, sample_every)?;
    let rows = coupling_rows(&system.graph, *c, laplacian);
    let gamma = &system.dynamics.gamma;
    let mut gx = vec![0.0; m * n];

    let derivative = |x: &[f64], out: &mut [f64]| {
        add_node_fields(system, x, out);
        for j in 0..m {
            gamma.apply(&x[j * n..(j + 1) * n], &mut gx[j * n..(j + 1) * n]);
        }
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                for k in 0..n {
                    out[i * n + k] += w * gx[j * n + k];
                }
            }
        }
    };

    let (mut times, mut states) = (Vec::new(), Vec::new());
    let status = integrate(derivative, x0.to_vec(), steps, h, sample_every, |t, s| {
        times.push(t);
        states.push(s.to_vec());
    });
    Ok(SimulationRun {
        m,
        n,
        h,
        times,
        states,
        weights: None,
        directed_edges: system.graph.directed_edges(),
        status,
    })
}

/// Adaptive run: states and directed-edge weights are integrated together;
/// the weighted cluster averages are recomputed at every RK4 stage.
pub fn simulate_adaptive(
    system: &CoupledSystem,
    x0: &[f64],
    w0: &[f64],
    t_end: f64,
    h: f64,
    sample_every: usize,
) -> Result<SimulationRun> {
    let Coupling::Adaptive { rho, d } = &system.coupling else {
        return Err(Error::InvalidParameter(
            "simulate_adaptive needs an adaptive coupling".into(),
        ));
    };
    let (m, n) = (system.m(), system.n());
    let steps = validate_run(x0, m * n, t_end, h, sample_every)?;
    let directed = system.graph.directed_edges();
    if w0.len() != directed.len() {
        return Err(Error::Dimension(format!(
            "{} initial weights for {} directed edges",
            w0.len(),
            directed.len()
        )));
    }
    if w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial weights must be finite".into(),
        ));
    }
    let d: Vec<f64> = d.iter().copied().collect();
    let gamma = &system.dynamics.gamma;
    let graph = &system.graph;
    let offset = m * n;
    let (mut diff, mut gdiff) = (vec![0.0; n], vec![0.0; n]);
    let mut dev = vec![0.0; n];

    let derivative = |s: &[f64], out: &mut [f64]| {
        let (x, w) = s.split_at(offset);
        let (dx, dw) = out.split_at_mut(offset);
        add_node_fields(system, x, dx);
        let averages = cluster_average(x, n, graph, &d);
        for (e, &(i, j)) in directed.iter().enumerate() {
            let xi = &x[i * n..(i + 1) * n];
            let xj = &x[j * n..(j + 1) * n];
            let avg = &averages[graph.cluster_of(i)];
            for k in 0..n {
                diff[k] = xj[k] - xi[k];
                dev[k] = xi[k] - avg[k];
            }
            gamma.apply(&diff, &mut gdiff);
            for k in 0..n {
                dx[i * n + k] += w[e] * gdiff[k];
            }
            // (x_i - xbar)^T Gamma (x_i - x_j) = -dev^T Gamma diff
            dw[e] = -rho[e] * d[i] * dev.iter().zip(&gdiff).map(|(a, b)| a * b).sum::<f64>();
        }
    };

    let mut initial = x0.to_vec();
    initial.extend_from_slice(w0);
    let (mut times, mut states, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let status = integrate(derivative, initial, steps, h, sample_every, |t, s| {
        times.push(t);
        states.push(s[..offset].to_vec());
        weights.push(s[offset..].to_vec());
    });
    Ok(SimulationRun {
        m,
        n,
        h,
        times,
        states,
        weights: Some(weights),
        directed_edges: directed,
        status,
    })
}

/// Per-coordinate extent of the uncoupled trajectories from `x0` after a
/// transient of `t_skip`, widened by `fraction` of the half-width. Used to
/// refine the region on which the decreasing condition is estimated.
pub fn observed_region(
    system: &CoupledSystem,
    x0: &[f64],
    t_end: f64,
    t_skip: f64,
    h: f64,
    fraction: f64,
) -> Result<Region> {
    let uncoupled = CoupledSystem {
        coupling: Coupling::Fixed {
            c: 0.0,
            laplacian: WeightedLaplacian {
                entries: nalgebra::DMatrix::zeros(system.m(), system.m()),
                kind: crate::spectral::LaplacianKind::Normalized,
            },
        },
        ..system.clone()
    };
    let run = simulate_fixed(&uncoupled, x0, t_end, h, 1)?;
    if !run.is_completed() {
        return Err(Error::InvalidParameter("uncoupled run diverged".into()));
    }
    let n = system.n();
    let (mut lo, mut hi) = (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]);
    for (t, s) in run.times.iter().zip(&run.states) {
        if *t < t_skip {
            continue;
        }
        for i in 0..system.m() {
            for k in 0..n {
                lo[k] = lo[k].min(s[i * n + k]);
                hi[k] = hi[k].max(s[i * n + k]);
            }
        }
    }
    Ok(Region::expanded(&lo, &hi, fraction))
}
