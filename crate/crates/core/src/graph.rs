//! Clustered graphs: the simple bi-directed graph together with a disjoint
//! partition of its vertices into clusters, plus the purely structural
//! checks that decide whether cluster synchronization is possible at all.
//!
//! Vertices and clusters are 0-based inside the library. The graph file
//! format and every user-facing message are 1-based.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated graph description, exactly as it appears in a graph file
/// (1-based vertex ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub m: usize,
    pub edges: Vec<[usize; 2]>,
    pub clusters: Vec<Vec<usize>>,
}

/// A broken [`ClusteredGraph`] invariant. Vertex and cluster numbers are
/// stored 1-based so they print the way they were written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoClusters,
    EmptyCluster {
        cluster: usize,
    },
    VertexOutOfRange {
        field: String,
        vertex: usize,
        m: usize,
    },
    SelfLoop {
        edge: usize,
        vertex: usize,
    },
    DuplicateEdge {
        edge: usize,
        a: usize,
        b: usize,
    },
    VertexInTwoClusters {
        vertex: usize,
        first: usize,
        second: usize,
    },
    VertexUnassigned {
        vertex: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoClusters => write!(f, "clusters: at least one cluster is required"),
            Violation::EmptyCluster { cluster } => {
                write!(f, "clusters[{}]: cluster {} is empty", cluster - 1, cluster)
            }
            Violation::VertexOutOfRange { field, vertex, m } => {
                write!(f, "{field}: vertex {vertex} out of range 1..={m}")
            }
            Violation::SelfLoop { edge, vertex } => {
                write!(f, "edges[{}]: self-loop at vertex {vertex}", edge - 1)
            }
            Violation::DuplicateEdge { edge, a, b } => {
                write!(f, "edges[{}]: duplicate edge {{{a},{b}}}", edge - 1)
            }
            Violation::VertexInTwoClusters {
                vertex,
                first,
                second,
            } => write!(
                f,
                "clusters: vertex {vertex} in two clusters ({first} and {second})"
            ),
            Violation::VertexUnassigned { vertex } => {
                write!(f, "clusters: vertex {vertex} is not in any cluster")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl GraphSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> ValidationReport {
        let m = self.m;
        let mut violations = Vec::new();

        let mut seen = BTreeSet::new();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let mut ok = true;
            for (slot, v) in [a, b].into_iter().enumerate() {
                if v == 0 || v > m {
                    violations.push(Violation::VertexOutOfRange {
                        field: format!("edges[{e}][{slot}]"),
                        vertex: v,
                        m,
                    });
                    ok = false;
                }
            }
            if a == b {
                violations.push(Violation::SelfLoop {
                    edge: e + 1,
                    vertex: a,
                });
                continue;
            }
            if ok && !seen.insert((a.min(b), a.max(b))) {
                violations.push(Violation::DuplicateEdge { edge: e + 1, a, b });
            }
        }

        if self.clusters.is_empty() {
            violations.push(Violation::NoClusters);
        }
        let mut owner: Vec<Option<usize>> = vec![None; m];
        for (k, cluster) in self.clusters.iter().enumerate() {
            if cluster.is_empty() {
                violations.push(Violation::EmptyCluster { cluster: k + 1 });
            }
            for (slot, &v) in cluster.iter().enumerate() {
                if v == 0 || v > m {
                    violations.push(Violation::VertexOutOfRange {
                        field: format!("clusters[{k}][{slot}]"),
                        vertex: v,
                        m,
                    });
                    continue;
                }
                match owner[v - 1] {
                    Some(first) => violations.push(Violation::VertexInTwoClusters {
                        vertex: v,
                        first: first + 1,
                        second: k + 1,
                    }),
                    None => owner[v - 1] = Some(k),
                }
            }
        }
        for (i, o) in owner.iter().enumerate() {
            if o.is_none() {
                violations.push(Violation::VertexUnassigned { vertex: i + 1 });
            }
        }

        ValidationReport { violations }
    }

    /// Compact, deterministic JSON rendering (one line per list).
    pub fn to_json_string(&self) -> String {
        let edges = self
            .edges
            .iter()
            .map(|[a, b]| format!("[{a}, {b}]"))
            .collect::<Vec<_>>()
            .join(", ");
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                let inner = c.iter().map(|v| v.to_string()).collect::<Vec<_>>();
                format!("[{}]", inner.join(", "))
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "{{\n  \"m\": {},\n  \"edges\": [{}],\n  \"clusters\": [{}]\n}}\n",
            self.m, edges, clusters
        )
    }
}

/// Connectivity class of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterClass {
    /// Intra-cluster edges alone connect the cluster; inter-cluster edges alone do not.
    SelfOrganized,
    /// Inter-cluster routes alone connect the cluster; intra-cluster edges alone do not.
    Driven,
    /// Either kind of edge alone suffices.
    Mixed,
    /// Neither kind alone suffices.
    Hybrid,
}

impl ClusterClass {
    /// Maps the pair (intra-connected, connected-without-own-intra-edges).
    pub fn from_tests(intra: bool, inter: bool) -> Self {
        match (intra, inter) {
            (true, false) => ClusterClass::SelfOrganized,
            (false, true) => ClusterClass::Driven,
            (true, true) => ClusterClass::Mixed,
            (false, false) => ClusterClass::Hybrid,
        }
    }

    /// Whether the two classes may share a connected graph.
    pub fn can_coexist(self, other: ClusterClass) -> bool {
        use ClusterClass::*;
        !matches!(
            (self, other),
            (SelfOrganized, SelfOrganized)
                | (SelfOrganized, Hybrid)
                | (Hybrid, SelfOrganized)
                | (SelfOrganized, Mixed)
                | (Mixed, SelfOrganized)
                | (Hybrid, Mixed)
                | (Mixed, Hybrid)
        )
    }
}

impl fmt::Display for ClusterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClusterClass::SelfOrganized => "self-organized",
            ClusterClass::Driven => "driven",
            ClusterClass::Mixed => "mixed",
            ClusterClass::Hybrid => "hybrid",
        };
        f.write_str(s)
    }
}

/// Outcome of the common inter-cluster coupling check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterClusterReport {
    pub holds: bool,
    pub violations: Vec<InterClusterViolation>,
}

/// Vertices `a` and `b` of `cluster` link to different sets of foreign
/// clusters; `differing` is the symmetric difference. All 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterClusterViolation {
    pub cluster: usize,
    pub a: usize,
    pub b: usize,
    pub differing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SameComponentReport {
    pub holds: bool,
    pub per_cluster: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoexistenceReport {
    /// The coexistence table only speaks about connected graphs.
    NotApplicable,
    /// Pairs of clusters (0-based) whose class combination is excluded.
    Checked { flagged: Vec<(usize, usize)> },
}

impl CoexistenceReport {
    pub fn is_consistent(&self) -> bool {
        match self {
            CoexistenceReport::NotApplicable => true,
            CoexistenceReport::Checked { flagged } => flagged.is_empty(),
        }
    }
}

/// Simple bi-directed graph plus a disjoint vertex partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteredGraph {
    m: usize,
    edges: Vec<(usize, usize)>,
    clusters: Vec<Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
    cluster_of: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl ClusteredGraph {
    /// Builds a graph from 0-based edges and clusters.
    pub fn new(m: usize, edges: &[(usize, usize)], clusters: Vec<Vec<usize>>) -> Result<Self> {
        let spec = GraphSpec {
            m,
            edges: edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            clusters: clusters
                .iter()
                .map(|c| c.iter().map(|v| v + 1).collect())
                .collect(),
        };
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        let report = spec.validate();
        if !report.is_ok() {
            return Err(Error::InvalidGraph(report.violations));
        }
        let m = spec.m;
        let mut edges: Vec<(usize, usize)> = spec
            .edges
            .iter()
            .map(|&[a, b]| ((a - 1).min(b - 1), (a - 1).max(b - 1)))
            .collect();
        edges.sort_unstable();
        let mut adjacency = vec![Vec::new(); m];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let clusters: Vec<Vec<usize>> = spec
            .clusters
            .iter()
            .map(|c| {
                let mut c: Vec<usize> = c.iter().map(|v| v - 1).collect();
                c.sort_unstable();
                c
            })
            .collect();
        let mut cluster_of = vec![0; m];
        for (k, c) in clusters.iter().enumerate() {
            for &v in c {
                cluster_of[v] = k;
            }
        }
        Ok(ClusteredGraph {
            m,
            edges,
            clusters,
            adjacency,
            cluster_of,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_spec(&GraphSpec::from_json_str(text)?)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            m: self.m,
            edges: self.edges.iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            clusters: self
                .clusters
                .iter()
                .map(|c| c.iter().map(|v| v + 1).collect())
                .collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, k: usize) -> &[usize] {
        &self.clusters[k]
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn is_intra_edge(&self, i: usize, j: usize) -> bool {
        self.cluster_of[i] == self.cluster_of[j]
    }

    /// Both orientations of every edge: entry `2e` is `(a, b)` and entry
    /// `2e + 1` is `(b, a)` for the `e`-th edge `(a, b)` of [`Self::edges`].
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .collect()
    }

    fn check_vertex(&self, i: usize) -> Result<()> {
        if i >= self.m {
            return Err(Error::IndexOutOfRange {
                what: "vertex",
                index: i,
                size: self.m,
            });
        }
        Ok(())
    }

    fn check_cluster(&self, k: usize) -> Result<()> {
        if k >= self.clusters.len() {
            return Err(Error::IndexOutOfRange {
                what: "cluster",
                index: k,
                size: self.clusters.len(),
            });
        }
        Ok(())
    }

    /// Neighbours of `i` that belong to cluster `k`; its length is `d_{i,k}`.
    pub fn neighbors_in_cluster(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.check_vertex(i)?;
        self.check_cluster(k)?;
        Ok(self.adjacency[i]
            .iter()
            .copied()
            .filter(|&j| self.cluster_of[j] == k)
            .collect())
    }

    /// Foreign clusters adjacent to vertex `i`.
    pub fn inter_cluster_index_set(&self, i: usize) -> BTreeSet<usize> {
        let own = self.cluster_of[i];
        self.adjacency[i]
            .iter()
            .map(|&j| self.cluster_of[j])
            .filter(|&k| k != own)
            .collect()
    }

    pub fn check_common_inter_cluster(&self) -> InterClusterReport {
        let sets: Vec<BTreeSet<usize>> = (0..self.m)
            .map(|i| self.inter_cluster_index_set(i))
            .collect();
        let mut violations = Vec::new();
        for (k, cluster) in self.clusters.iter().enumerate() {
            for (p, &a) in cluster.iter().enumerate() {
                for &b in &cluster[p + 1..] {
                    if sets[a] != sets[b] {
                        violations.push(InterClusterViolation {
                            cluster: k,
                            a,
                            b,
                            differing: sets[a].symmetric_difference(&sets[b]).copied().collect(),
                        });
                    }
                }
            }
        }
        InterClusterReport {
            holds: violations.is_empty(),
            violations,
        }
    }

    fn union_find_over(&self, keep: impl Fn(usize, usize) -> bool) -> UnionFind {
        let mut uf = UnionFind::new(self.m);
        for &(a, b) in &self.edges {
            if keep(a, b) {
                uf.union(a, b);
            }
        }
        uf
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut uf = self.union_find_over(|_, _| true);
        let mut index_of_root = vec![usize::MAX; self.m];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for v in 0..self.m {
            let r = uf.find(v);
            if index_of_root[r] == usize::MAX {
                index_of_root[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[index_of_root[r]].push(v);
        }
        comps
    }

    /// Component index of every vertex, consistent with [`Self::connected_components`].
    pub fn component_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.m];
        for (c, comp) in self.connected_components().iter().enumerate() {
            for &v in comp {
                labels[v] = c;
            }
        }
        labels
    }

    pub fn is_connected(&self) -> bool {
        self.m <= 1 || self.connected_components().len() == 1
    }

    pub fn check_same_component(&self) -> SameComponentReport {
        let labels = self.component_labels();
        let per_cluster: Vec<bool> = self
            .clusters
            .iter()
            .map(|c| c.iter().all(|&v| labels[v] == labels[c[0]]))
            .collect();
        SameComponentReport {
            holds: per_cluster.iter().all(|&x| x),
            per_cluster,
        }
    }

    /// `(T_intra, T_inter)` for cluster `k`: whether the induced subgraph is
    /// connected, and whether all of the cluster stays mutually reachable
    /// once the cluster's own intra-cluster edges are removed.
    pub fn communicability(&self, k: usize) -> Result<(bool, bool)> {
        self.check_cluster(k)?;
        let of = &self.cluster_of;
        let members = &self.clusters[k];
        let all_joined = |uf: &mut UnionFind| {
            let r = uf.find(members[0]);
            members.iter().all(|&v| uf.find(v) == r)
        };
        let mut intra = self.union_find_over(|a, b| of[a] == k && of[b] == k);
        let mut inter = self.union_find_over(|a, b| !(of[a] == k && of[b] == k));
        Ok((all_joined(&mut intra), all_joined(&mut inter)))
    }

    pub fn classify_cluster(&self, k: usize) -> Result<ClusterClass> {
        let (intra, inter) = self.communicability(k)?;
        Ok(ClusterClass::from_tests(intra, inter))
    }

    pub fn classify_all(&self) -> Vec<ClusterClass> {
        (0..self.n_clusters())
            .map(|k| self.classify_cluster(k).expect("cluster index in range"))
            .collect()
    }

    /// Flags cluster pairs whose classes cannot share a connected graph.
    /// Advisory only.
    pub fn check_coexistence(&self, classes: &[ClusterClass]) -> CoexistenceReport {
        if !self.is_connected() {
            return CoexistenceReport::NotApplicable;
        }
        let mut flagged = Vec::new();
        for a in 0..classes.len() {
            for b in a + 1..classes.len() {
                if !classes[a].can_coexist(classes[b]) {
                    flagged.push((a, b));
                }
            }
        }
        CoexistenceReport::Checked { flagged }
    }
}
