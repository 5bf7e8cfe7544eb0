//! JSON run configuration.

use std::path::{Path, PathBuf};

use clustersync::dynamics::{Gamma, LorenzParams, NodeDynamics, NodeField};
use clustersync::simulator::{DEFAULT_SAMPLE_EVERY, DEFAULT_STEP};
use clustersync::ClusteredGraph;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CLUSTERSYNC_OUT";
/// Output directory used when neither flag, config nor environment set one.
pub const DEFAULT_OUT: &str = "clustersync-out";

/// Inner coupling matrix, either as its diagonal or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl GammaSpec {
    pub fn build(&self) -> CliResult<Gamma> {
        match self {
            GammaSpec::Diagonal(d) => Ok(Gamma::diag(d)?),
            GammaSpec::Matrix(rows) => Ok(Gamma::from_rows(rows)?),
        }
    }
}

/// Parameters of a simulation. The coupling mode is chosen by the
/// subcommand (`simulate` is fixed, `adapt` is adaptive); `c` is used by
/// fixed runs and `rho` by adaptive ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Graph file; relative paths are resolved against the config file.
    pub graph: PathBuf,
    /// One field per cluster, or a single field shared by all clusters.
    #[serde(default = "default_fields")]
    pub fields: Vec<NodeField>,
    #[serde(default = "default_gamma")]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_fields() -> Vec<NodeField> {
    vec![NodeField::Lorenz(LorenzParams { b: 28.0 })]
}

fn default_gamma() -> GammaSpec {
    GammaSpec::Diagonal(vec![1.0, 1.0, 0.0])
}

fn default_rho() -> f64 {
    1.0
}

fn default_t_end() -> f64 {
    100.0
}

fn default_h() -> f64 {
    DEFAULT_STEP
}

fn default_seed() -> u64 {
    1
}

fn default_sample_every() -> usize {
    DEFAULT_SAMPLE_EVERY
}

impl RunConfig {
    /// Config with defaults for everything but the graph.
    pub fn for_graph(graph: impl Into<PathBuf>) -> Self {
        Self {
            graph: graph.into(),
            fields: default_fields(),
            gamma: default_gamma(),
            c: None,
            rho: default_rho(),
            t_end: default_t_end(),
            h: default_h(),
            seed: default_seed(),
            sample_every: default_sample_every(),
            output: None,
        }
    }

    /// Reads a config and resolves the graph path against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        if cfg.graph.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.graph = dir.join(&cfg.graph);
            }
        }
        Ok(cfg)
    }

    /// Range checks that do not need the graph.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end: must be positive and finite");
        }
        if !(self.h > 0.0 && self.h <= self.t_end) {
            return bad("h: must be positive and at most t_end");
        }
        if self.sample_every == 0 {
            return bad("sample_every: must be at least 1");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho: must be positive and finite");
        }
        if let Some(c) = self.c {
            if !(c >= 0.0 && c.is_finite()) {
                return bad("c: must be nonnegative and finite");
            }
        }
        if self.fields.is_empty() {
            return bad("fields: at least one field is required");
        }
        Ok(())
    }

    pub fn load_graph(&self) -> CliResult<ClusteredGraph> {
        load_graph(&self.graph)
    }

    /// Node dynamics for `graph`, broadcasting a single field to every cluster.
    pub fn dynamics(&self, graph: &ClusteredGraph) -> CliResult<NodeDynamics> {
        let fields = match self.fields.len() {
            1 => vec![self.fields[0]; graph.n_clusters()],
            k if k == graph.n_clusters() => self.fields.clone(),
            k => {
                return Err(CliError::Usage(format!(
                    "fields: {k} fields given for {} clusters",
                    graph.n_clusters()
                )))
            }
        };
        Ok(NodeDynamics::new(fields, self.gamma.build()?)?)
    }

    /// Averaging window for `var`: the second half of the run.
    pub fn window(&self) -> (f64, f64) {
        (0.5 * self.t_end, self.t_end)
    }
}

pub fn load_graph(path: &Path) -> CliResult<ClusteredGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ClusteredGraph::from_json_str(&text).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

/// Output directory: flag, then config, then environment, then default.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}
