//! Weighted Laplacians, the left Perron vector, the transverse space and
//! the restricted-definiteness test that decides whether a coupling
//! strength is sufficient for cluster synchronization.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ClusteredGraph;

/// Row-sum tolerance for constructed Laplacians.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Default tolerance on the extremal eigenvalue of a projected matrix.
pub const DEFINITENESS_TOL: f64 = 1e-9;
/// Tolerance for the weighted invariance check.
pub const INVARIANCE_TOL: f64 = 1e-10;
/// Required residual of the left Perron vector.
pub const PERRON_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaplacianKind {
    /// `l_ij = 1/d_{i,k'}` on edges.
    Normalized,
    /// Arbitrary (possibly negative, asymmetric) edge weights.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian {
    pub entries: DMatrix<f64>,
    pub kind: LaplacianKind,
}

impl WeightedLaplacian {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> WeightedLaplacian {
        WeightedLaplacian {
            entries: &self.entries * c,
            kind: self.kind,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= tol))
    }
}

/// Directed edge weights `w_ij` (the weight with which `j` drives `i`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeWeights {
    map: BTreeMap<(usize, usize), f64>,
}

impl EdgeWeights {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `w_ij` and `w_ji` for the edge `{i, j}`.
    pub fn set_edge(&mut self, i: usize, j: usize, w_ij: f64, w_ji: f64) {
        self.map.insert((i, j), w_ij);
        self.map.insert((j, i), w_ji);
    }

    pub fn set(&mut self, i: usize, j: usize, w_ij: f64) {
        self.map.insert((i, j), w_ij);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.map.get(&(i, j)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }

    /// `w_ij = c / d_{i,k'}` for `j` in cluster `k'`.
    pub fn normalized(graph: &ClusteredGraph, c: f64) -> Self {
        let mut w = EdgeWeights::new();
        for i in 0..graph.m() {
            for (&j, count) in graph
                .neighbors(i)
                .iter()
                .zip(neighbor_cluster_counts(graph, i))
            {
                w.set(i, j, c / count as f64);
            }
        }
        w
    }
}

/// For every neighbour `j` of `i`, the size of `N_{k(j)}(i)`.
fn neighbor_cluster_counts(graph: &ClusteredGraph, i: usize) -> Vec<usize> {
    let mut counts = vec![0usize; graph.n_clusters()];
    for &j in graph.neighbors(i) {
        counts[graph.cluster_of(j)] += 1;
    }
    graph
        .neighbors(i)
        .iter()
        .map(|&j| counts[graph.cluster_of(j)])
        .collect()
}

fn fill_diagonal(mut l: DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let s: f64 = l.row(i).sum();
        l[(i, i)] = -s;
    }
    l
}

pub fn build_normalized_laplacian(graph: &ClusteredGraph) -> WeightedLaplacian {
    let m = graph.m();
    let mut l = DMatrix::zeros(m, m);
    for i in 0..m {
        for (&j, count) in graph
            .neighbors(i)
            .iter()
            .zip(neighbor_cluster_counts(graph, i))
        {
            l[(i, j)] = 1.0 / count as f64;
        }
    }
    WeightedLaplacian {
        entries: fill_diagonal(l),
        kind: LaplacianKind::Normalized,
    }
}

pub fn build_general_laplacian(
    graph: &ClusteredGraph,
    weights: &EdgeWeights,
) -> Result<WeightedLaplacian> {
    let m = graph.m();
    let mut l = DMatrix::zeros(m, m);
    for ((i, j), w) in weights.iter() {
        if i >= m || j >= m || !graph.has_edge(i, j) {
            return Err(Error::WeightOnNonEdge(i, j));
        }
        l[(i, j)] = w;
    }
    for &(a, b) in graph.edges() {
        for (i, j) in [(a, b), (b, a)] {
            if weights.get(i, j).is_none() {
                return Err(Error::MissingWeight(i, j));
            }
        }
    }
    Ok(WeightedLaplacian {
        entries: fill_diagonal(l),
        kind: LaplacianKind::General,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceViolation {
    pub cluster: usize,
    pub foreign: usize,
    pub a: usize,
    pub b: usize,
    pub sum_a: f64,
    pub sum_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub holds: bool,
    pub violations: Vec<InvarianceViolation>,
}

/// Checks that `sum_{j in N_k'(i)} w_ij` is the same for every `i` in a
/// cluster, for every foreign cluster `k'`. Missing weights count as zero.
pub fn check_weighted_invariance(
    graph: &ClusteredGraph,
    weights: &EdgeWeights,
) -> InvarianceReport {
    let kk = graph.n_clusters();
    let sums: Vec<Vec<f64>> = (0..graph.m())
        .map(|i| {
            let mut s = vec![0.0; kk];
            for &j in graph.neighbors(i) {
                s[graph.cluster_of(j)] += weights.get(i, j).unwrap_or(0.0);
            }
            s
        })
        .collect();
    let mut violations = Vec::new();
    for (k, members) in graph.clusters().iter().enumerate() {
        let first = members[0];
        for &i in &members[1..] {
            for foreign in (0..kk).filter(|&f| f != k) {
                let (sa, sb) = (sums[first][foreign], sums[i][foreign]);
                if (sa - sb).abs() > INVARIANCE_TOL {
                    violations.push(InvarianceViolation {
                        cluster: k,
                        foreign,
                        a: first,
                        b: i,
                        sum_a: sa,
                        sum_b: sb,
                    });
                }
            }
        }
    }
    InvarianceReport {
        holds: violations.is_empty(),
        violations,
    }
}

/// Components of the coupling pattern of `l` (an off-diagonal entry in
/// either direction joins two vertices), ordered by smallest vertex.
pub fn pattern_components(l: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = l.nrows();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut stack = vec![s];
        let mut comp = Vec::new();
        label[s] = id;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for u in 0..n {
                if u != v && label[u] == usize::MAX && (l[(v, u)] != 0.0 || l[(u, v)] != 0.0) {
                    label[u] = id;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Positive `d` with `d^T L = 0`, normalized so every connected block sums
/// to its size (hence `sum d = m`).
///
/// Each irreducible block is solved directly: one column of `L^T d = 0` is
/// replaced by the normalization, followed by up to three steps of
/// iterative refinement.
pub fn left_perron_vector(l: &WeightedLaplacian) -> Result<DVector<f64>> {
    let m = l.dim();
    let mut d = DVector::zeros(m);
    for comp in pattern_components(&l.entries) {
        let p = comp.len();
        if p == 1 {
            d[comp[0]] = 1.0;
            continue;
        }
        let block = DMatrix::from_fn(p, p, |a, b| l.entries[(comp[a], comp[b])]);
        let mut system = block.transpose();
        for b in 0..p {
            system[(p - 1, b)] = 1.0;
        }
        let mut rhs = DVector::zeros(p);
        rhs[p - 1] = p as f64;
        let lu = system.clone().lu();
        let mut x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::PerronNotFound("singular block system".into()))?;
        let scale = block.amax().max(1.0);
        let mut residual = f64::INFINITY;
        for _ in 0..4 {
            residual = (block.transpose() * &x).amax() / scale;
            if residual <= PERRON_TOL {
                break;
            }
            let r = &rhs - &system * &x;
            if let Some(dx) = lu.solve(&r) {
                x += dx;
            }
        }
        if residual > PERRON_TOL {
            return Err(Error::PerronNotFound(format!(
                "residual {residual:e} after refinement"
            )));
        }
        if x.iter().any(|&v| v <= 0.0) {
            return Err(Error::PerronNotFound(
                "null vector is not strictly positive".into(),
            ));
        }
        for (a, &v) in comp.iter().enumerate() {
            d[v] = x[a];
        }
    }
    Ok(d)
}

/// Orthonormal basis of `{u : sum_{i in C_k} d_i u_i = 0 for all k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseBasis {
    pub d: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl TransverseBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `B B^T v`: orthogonal projection onto the transverse space.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Largest `|sum_{i in C_k} d_i u_i|` over clusters.
    pub fn cluster_residual(&self, graph: &ClusteredGraph, u: &DVector<f64>) -> f64 {
        graph
            .clusters()
            .iter()
            .map(|c| c.iter().map(|&i| self.d[i] * u[i]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Built cluster by cluster with modified Gram-Schmidt (two passes) of unit
/// vectors against the d-weighted cluster indicator, so every column is
/// supported on a single cluster.
pub fn transverse_basis(graph: &ClusteredGraph, d: &DVector<f64>) -> Result<TransverseBasis> {
    let m = graph.m();
    if d.len() != m {
        return Err(Error::Dimension(format!(
            "d has length {}, expected {m}",
            d.len()
        )));
    }
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "d must be strictly positive".into(),
        ));
    }
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(m - graph.n_clusters());
    for members in graph.clusters() {
        let p = members.len();
        if p < 2 {
            continue;
        }
        let mut local: Vec<DVector<f64>> = Vec::with_capacity(p);
        let mut ind = DVector::from_iterator(p, members.iter().map(|&i| d[i]));
        ind.normalize_mut();
        local.push(ind);
        // drop the unit vector with the largest weight: it is the one most
        // aligned with the indicator
        let skip = (0..p)
            .max_by(|&a, &b| d[members[a]].total_cmp(&d[members[b]]))
            .unwrap();
        for a in (0..p).filter(|&a| a != skip) {
            let mut v = DVector::zeros(p);
            v[a] = 1.0;
            for _ in 0..2 {
                for q in &local {
                    let proj = q.dot(&v);
                    v.axpy(-proj, q, 1.0);
                }
            }
            v.normalize_mut();
            local.push(v);
        }
        for q in local.into_iter().skip(1) {
            let mut col = DVector::zeros(m);
            for (a, &i) in members.iter().enumerate() {
                col[i] = q[a];
            }
            columns.push(col);
        }
    }
    let basis = if columns.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Ok(TransverseBasis {
        d: d.clone(),
        basis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    NegativeDefinite,
    NegativeSemidefinite,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessResult {
    pub verdict: Definiteness,
    /// Largest eigenvalue of `B^T M^s B`; `-inf` on an empty space.
    pub max_eigenvalue: f64,
}

impl DefinitenessResult {
    pub fn is_nonpositive(&self) -> bool {
        self.verdict != Definiteness::Indefinite
    }
}

pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn symmetric_eigenvalues(a: DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    SymmetricEigen::try_new(a, f64::EPSILON, 1000 * n.max(1))
        .map(|e| e.eigenvalues)
        .ok_or_else(|| {
            Error::Eigen(format!(
                "symmetric eigen-decomposition of size {n} did not converge"
            ))
        })
}

/// Sign of the symmetric part of `m` on the span of `basis`.
pub fn check_restricted_definiteness(
    m: &DMatrix<f64>,
    basis: &TransverseBasis,
    tol: f64,
) -> Result<DefinitenessResult> {
    if m.nrows() != basis.basis.nrows() || !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix {}x{} vs basis with {} rows",
            m.nrows(),
            m.ncols(),
            basis.basis.nrows()
        )));
    }
    if basis.dim() == 0 {
        return Ok(DefinitenessResult {
            verdict: Definiteness::NegativeDefinite,
            max_eigenvalue: f64::NEG_INFINITY,
        });
    }
    let b = &basis.basis;
    let projected = symmetric_part(&(b.transpose() * symmetric_part(m) * b));
    let lambda = symmetric_eigenvalues(projected)?.max();
    let verdict = if lambda < -tol {
        Definiteness::NegativeDefinite
    } else if lambda <= tol {
        Definiteness::NegativeSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(DefinitenessResult {
        verdict,
        max_eigenvalue: lambda,
    })
}

/// `diag(d) * a`.
pub fn scale_rows(d: &DVector<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= d[i];
    }
    out
}

/// Restricted condition `[D(cL + alpha I)]^s <= 0` on the transverse space of `d`.
pub fn check_cluster_sync_condition(
    graph: &ClusteredGraph,
    l: &WeightedLaplacian,
    c: f64,
    alpha: f64,
    d: &DVector<f64>,
) -> Result<DefinitenessResult> {
    let basis = transverse_basis(graph, d)?;
    let m = graph.m();
    let shifted = &l.entries * c + DMatrix::identity(m, m) * alpha;
    check_restricted_definiteness(&scale_rows(d, &shifted), &basis, DEFINITENESS_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessCase {
    /// The spanning cluster has no edges to other clusters.
    IsolatedCluster,
    /// Built from the reduced cluster-level matrices of two components.
    Reduced,
}

/// Nonzero `u` in the transverse space with `u^T D L u = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseWitness {
    pub u: DVector<f64>,
    pub residual: f64,
    pub cluster: usize,
    pub case: WitnessCase,
}

/// Witness that the restricted condition fails for every `c` when some
/// cluster spans two connected components. Requires the common inter-cluster
/// condition in the non-isolated case.
pub fn split_cluster_witness(
    graph: &ClusteredGraph,
    l: &WeightedLaplacian,
    d: &DVector<f64>,
) -> Result<TransverseWitness> {
    let m = graph.m();
    if d.len() != m || l.dim() != m {
        return Err(Error::Dimension("d, L and graph sizes differ".into()));
    }
    let labels = graph.component_labels();
    let (k, first, second) = graph
        .clusters()
        .iter()
        .enumerate()
        .find_map(|(k, c)| {
            let c1 = labels[c[0]];
            c.iter()
                .map(|&v| labels[v])
                .find(|&lab| lab != c1)
                .map(|c2| (k, c1, c2))
        })
        .ok_or(Error::NoSpanningCluster)?;

    let members = graph.cluster(k);
    let isolated = members
        .iter()
        .all(|&i| graph.neighbors(i).iter().all(|&j| graph.cluster_of(j) == k));

    let mut u = DVector::zeros(m);
    let case = if isolated {
        let a: f64 = members
            .iter()
            .filter(|&&i| labels[i] == first)
            .map(|&i| d[i])
            .sum();
        let b: f64 = members
            .iter()
            .filter(|&&i| labels[i] == second)
            .map(|&i| d[i])
            .sum();
        let beta = -a / b;
        for &i in members {
            if labels[i] == first {
                u[i] = 1.0;
            } else if labels[i] == second {
                u[i] = beta;
            }
        }
        WitnessCase::IsolatedCluster
    } else {
        reduced_witness(graph, d, &labels, first, second, &mut u)?;
        WitnessCase::Reduced
    };

    let norm = u.norm();
    u /= norm;
    let du = u.component_mul(d);
    let residual = du.dot(&(&l.entries * &u)).abs();
    Ok(TransverseWitness {
        u,
        residual,
        cluster: k,
        case,
    })
}

fn reduced_witness(
    graph: &ClusteredGraph,
    d: &DVector<f64>,
    labels: &[usize],
    first: usize,
    second: usize,
    u: &mut DVector<f64>,
) -> Result<()> {
    let kk = graph.n_clusters();
    let mut d1 = vec![0.0; kk];
    let mut d2 = vec![0.0; kk];
    for i in 0..graph.m() {
        if labels[i] == first {
            d1[graph.cluster_of(i)] += d[i];
        } else if labels[i] == second {
            d2[graph.cluster_of(i)] += d[i];
        }
    }
    let present: Vec<usize> = (0..kk).filter(|&k| d1[k] > 0.0).collect();
    if present.iter().any(|&k| d2[k] <= 0.0) || (0..kk).any(|k| d2[k] > 0.0 && d1[k] <= 0.0) {
        return Err(Error::InvalidParameter(
            "components carry different cluster sets; the common inter-cluster condition is required"
                .into(),
        ));
    }
    let p = present.len();
    let pos: BTreeMap<usize, usize> = present.iter().enumerate().map(|(a, &k)| (k, a)).collect();

    // cluster-level interaction pattern inside the first component
    let mut w1 = DMatrix::<f64>::zeros(p, p);
    for &(a, b) in graph.edges() {
        if labels[a] != first {
            continue;
        }
        let (ka, kb) = (graph.cluster_of(a), graph.cluster_of(b));
        if ka != kb {
            w1[(pos[&ka], pos[&kb])] = 1.0;
            w1[(pos[&kb], pos[&ka])] = 1.0;
        }
    }
    let w1 = fill_diagonal(w1);
    let inv_sum = DMatrix::from_diagonal(&DVector::from_iterator(
        p,
        present.iter().map(|&k| 1.0 / d1[k] + 1.0 / d2[k]),
    ));
    let reduced = &w1 * inv_sum;
    let svd = reduced.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Eigen("SVD of reduced matrix failed".into()))?;
    let smallest = (0..p)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap();
    let mut v: DVector<f64> = v_t.row(smallest).transpose();
    if v.sum() < 0.0 {
        v = -v;
    }
    for i in 0..graph.m() {
        let k = graph.cluster_of(i);
        if labels[i] == first {
            u[i] = v[pos[&k]] / d1[k];
        } else if labels[i] == second {
            u[i] = -v[pos[&k]] / d2[k];
        }
    }
    Ok(())
}
