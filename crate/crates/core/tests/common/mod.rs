//! Shared fixtures, random graph generators and independent oracles.
//!
//! The oracles here deliberately avoid the library's own algorithms: they
//! use breadth-first search on adjacency matrices, cyclic Jacobi rotations
//! and plain loops.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::VecDeque;
use std::path::PathBuf;

use clustersync::ClusteredGraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub const FIXTURES: [&str; 3] = ["graph1", "graph2", "graph3"];
pub const LORENZ_B: [f64; 3] = [28.0, 38.0, 58.0];
pub const GAMMA_DIAG: [f64; 3] = [1.0, 1.0, 0.0];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> ClusteredGraph {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    ClusteredGraph::from_json_str(&text).expect("fixture parses")
}

/// Random clustered graph with `1 <= m <= max_m` and edge density drawn
/// per graph.
pub fn random_graph<R: Rng>(rng: &mut R, max_m: usize) -> ClusteredGraph {
    let m = rng.random_range(1..=max_m);
    let k = rng.random_range(1..=m);
    let mut labels: Vec<usize> = (0..m)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    labels.shuffle(rng);
    let clusters: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..m).filter(|&i| labels[i] == c).collect())
        .collect();
    let p: f64 = rng.random_range(0.05..0.8);
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    ClusteredGraph::new(m, &edges, clusters).expect("generator yields valid graphs")
}

/// Random graph satisfying the common inter-cluster condition: clusters
/// are related by a random symmetric relation and every vertex of a
/// related pair gets at least one neighbour in the other cluster.
pub fn random_common_graph<R: Rng>(rng: &mut R, max_k: usize, max_size: usize) -> ClusteredGraph {
    let k = rng.random_range(1..=max_k);
    let mut clusters = Vec::new();
    let mut next = 0;
    for _ in 0..k {
        let size = rng.random_range(1..=max_size);
        clusters.push((next..next + size).collect::<Vec<_>>());
        next += size;
    }
    let m = next;
    let mut adj = vec![vec![false; m]; m];
    let link = |a: usize, b: usize, adj: &mut Vec<Vec<bool>>| {
        adj[a][b] = true;
        adj[b][a] = true;
    };
    let p_rel: f64 = rng.random_range(0.0..0.8);
    let p_extra: f64 = rng.random_range(0.0..0.6);
    for a in 0..k {
        for b in a + 1..k {
            if !rng.random_bool(p_rel) {
                continue;
            }
            for &u in &clusters[a] {
                let v = clusters[b][rng.random_range(0..clusters[b].len())];
                link(u, v, &mut adj);
            }
            for &v in &clusters[b] {
                let u = clusters[a][rng.random_range(0..clusters[a].len())];
                link(u, v, &mut adj);
            }
            for &u in &clusters[a] {
                for &v in &clusters[b] {
                    if rng.random_bool(p_extra) {
                        link(u, v, &mut adj);
                    }
                }
            }
        }
    }
    let p_intra: f64 = rng.random_range(0.0..0.9);
    for c in &clusters {
        for (x, &u) in c.iter().enumerate() {
            for &v in &c[x + 1..] {
                if rng.random_bool(p_intra) {
                    link(u, v, &mut adj);
                }
            }
        }
    }
    let edges: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|&(a, b)| adj[a][b])
        .collect();
    ClusteredGraph::new(m, &edges, clusters).expect("generator yields valid graphs")
}

pub fn adjacency_matrix(g: &ClusteredGraph) -> Vec<Vec<bool>> {
    let m = g.m();
    let mut adj = vec![vec![false; m]; m];
    for &(a, b) in g.edges() {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

/// Breadth-first reachability from `s` over edges accepted by `keep`.
pub fn bfs_reach(adj: &[Vec<bool>], s: usize, keep: &dyn Fn(usize, usize) -> bool) -> Vec<bool> {
    let m = adj.len();
    let mut seen = vec![false; m];
    let mut queue = VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if adj[u][v] && !seen[v] && keep(u, v) {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Brute-force communicability of cluster `k`: every pair of its vertices
/// is checked separately.
pub fn oracle_communicability(g: &ClusteredGraph, k: usize) -> (bool, bool) {
    let adj = adjacency_matrix(g);
    let label: Vec<usize> = (0..g.m()).map(|i| g.cluster_of(i)).collect();
    let members = g.cluster(k).to_vec();
    let intra_only = |u: usize, v: usize| label[u] == k && label[v] == k;
    let without_own = |u: usize, v: usize| !(label[u] == k && label[v] == k);
    let mut intra = true;
    let mut inter = true;
    for &u in &members {
        let a = bfs_reach(&adj, u, &intra_only);
        let b = bfs_reach(&adj, u, &without_own);
        for &v in &members {
            intra &= a[v];
            inter &= b[v];
        }
    }
    (intra, inter)
}

/// Class name from the two communicability tests.
pub fn oracle_class_name(intra: bool, inter: bool) -> &'static str {
    match (intra, inter) {
        (true, false) => "SelfOrganized",
        (false, true) => "Driven",
        (true, true) => "Mixed",
        (false, false) => "Hybrid",
    }
}

/// Connected-component label per vertex by repeated BFS.
pub fn oracle_components(g: &ClusteredGraph) -> Vec<usize> {
    let adj = adjacency_matrix(g);
    let mut label = vec![usize::MAX; g.m()];
    let mut next = 0;
    for s in 0..g.m() {
        if label[s] == usize::MAX {
            for (v, r) in bfs_reach(&adj, s, &|_, _| true).into_iter().enumerate() {
                if r {
                    label[v] = next;
                }
            }
            next += 1;
        }
    }
    label
}

pub fn oracle_same_component(g: &ClusteredGraph) -> bool {
    let label = oracle_components(g);
    g.clusters()
        .iter()
        .all(|c| c.iter().all(|&v| label[v] == label[c[0]]))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of `-L^s` on `{u : sum_{i in C_k} u_i = 0}` via the
/// shifted projector matrix `P(-L^s)P + sigma (I - P)`.
pub fn oracle_restricted_min(g: &ClusteredGraph, l: &[Vec<f64>]) -> f64 {
    let m = g.m();
    let mut p = vec![vec![0.0; m]; m];
    for i in 0..m {
        p[i][i] = 1.0;
    }
    for c in g.clusters() {
        let w = 1.0 / c.len() as f64;
        for &i in c {
            for &j in c {
                p[i][j] -= w;
            }
        }
    }
    let norm: f64 = l.iter().flatten().map(|x| x.abs()).sum();
    let sigma = 10.0 * norm + 10.0;
    let neg_sym: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| -0.5 * (l[i][j] + l[j][i])).collect())
        .collect();
    let mul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum())
                    .collect()
            })
            .collect()
    };
    let mut a = mul(&mul(&p, &neg_sym), &p);
    for i in 0..m {
        for j in 0..m {
            let id = if i == j { 1.0 } else { 0.0 };
            a[i][j] += sigma * (id - p[i][j]);
        }
    }
    jacobi_eigenvalues(a)[0]
}

/// `K(t)` by a direct loop over unweighted cluster means.
pub fn oracle_intra_variance(state: &[f64], n: usize, g: &ClusteredGraph) -> f64 {
    let mut total = 0.0;
    for c in g.clusters() {
        if c.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        for k in 0..n {
            let mean = c.iter().map(|&i| state[i * n + k]).sum::<f64>() / c.len() as f64;
            for &i in c {
                sum += (state[i * n + k] - mean).powi(2);
            }
        }
        total += sum / (c.len() - 1) as f64;
    }
    total
}

/// Largest distance between two nodes of the same cluster.
pub fn intra_spread(state: &[f64], n: usize, g: &ClusteredGraph) -> f64 {
    let mut worst: f64 = 0.0;
    for c in g.clusters() {
        for &i in c {
            for &j in c {
                let d2: f64 = (0..n)
                    .map(|k| (state[i * n + k] - state[j * n + k]).powi(2))
                    .sum();
                worst = worst.max(d2.sqrt());
            }
        }
    }
    worst
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fitted_slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
