//! End-to-end report written as `report.json`.

use clustersync::dynamics::DecreasingEstimate;
use clustersync::graph::{CoexistenceReport, InterClusterReport, SameComponentReport};
use clustersync::metrics::WeightConvergenceReport;
use clustersync::simulator::RunStatus;
use clustersync::synchronizability::SynchronizabilityResult;
use clustersync::{ClusterClass, ClusteredGraph};
use serde::{Deserialize, Serialize};

/// Structural verdicts for a graph. Vertex and cluster indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSection {
    pub vertices: usize,
    pub edges: usize,
    pub clusters: usize,
    pub connected: bool,
    pub common_inter_cluster: InterClusterReport,
    pub same_component: SameComponentReport,
    pub classes: Vec<ClusterClass>,
    pub coexistence: CoexistenceReport,
}

impl StructureSection {
    pub fn of(graph: &ClusteredGraph) -> Self {
        let classes = graph.classify_all();
        Self {
            vertices: graph.m(),
            edges: graph.edges().len(),
            clusters: graph.n_clusters(),
            connected: graph.is_connected(),
            common_inter_cluster: graph.check_common_inter_cluster(),
            same_component: graph.check_same_component(),
            coexistence: graph.check_coexistence(&classes),
            classes,
        }
    }

    /// Both conditions needed for the synchronization guarantees.
    pub fn conditions_hold(&self) -> bool {
        self.common_inter_cluster.holds && self.same_component.holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Fixed,
    Adaptive,
}

/// Summary of one simulation. Metric values are `None` when undefined
/// (for example after divergence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: RunMode,
    pub c: Option<f64>,
    pub rho: Option<f64>,
    pub seed: u64,
    pub t_end: f64,
    pub h: f64,
    pub status: RunStatus,
    pub k_final: Option<f64>,
    pub var: Option<f64>,
    pub var_window: (f64, f64),
    pub dis_min: Option<f64>,
    pub v_final: Option<f64>,
    pub weights: Option<WeightConvergenceReport>,
}

/// One row of a coupling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub var: Option<f64>,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SyncReport {
    pub structure: Option<StructureSection>,
    pub synchronizability: Option<SynchronizabilityResult>,
    pub alpha: Option<DecreasingEstimate>,
    pub runs: Vec<RunSummary>,
    pub sweep: Vec<SweepRow>,
}

impl SyncReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Maps non-finite values to `None` so the report stays valid JSON.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
