use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::exec::{CostModel, Strategy};
use crate::graph::{self, CsrGraph, EdgeListOptions, GraphGenSpec};
use crate::sampler::SampleConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    EdgeList,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Generate(GraphGenSpec),
    File {
        path: PathBuf,
        format: GraphFormat,
        #[serde(default)]
        symmetric: bool,
        #[serde(default)]
        compact_ids: bool,
    },
}

impl GraphSource {
    /// Generated graphs use `seed`; files ignore it.
    pub fn load(&self, seed: u64) -> Result<CsrGraph> {
        match self {
            GraphSource::Generate(spec) => graph::generate(spec, seed),
            GraphSource::File {
                path,
                format,
                symmetric,
                compact_ids,
            } => {
                let reader = BufReader::new(File::open(path)?);
                match format {
                    GraphFormat::Binary => graph::read_binary(reader),
                    GraphFormat::EdgeList => graph::load_edge_list(
                        reader,
                        &EdgeListOptions {
                            symmetric: *symmetric,
                            compact_ids: *compact_ids,
                            num_vertices: None,
                        },
                    ),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeParams {
    pub confidence: f64,
    /// Defaults to the iteration count.
    #[serde(default)]
    pub repetitions: Option<u64>,
    pub safety_factor: f64,
}

impl Default for EnvelopeParams {
    fn default() -> Self {
        Self {
            confidence: 0.999,
            repetitions: None,
            safety_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub batch_sizes: Vec<usize>,
    /// Hop counts for the memory comparison; depth `N` uses `N` copies of
    /// `depth_fanout`.
    pub depths: Vec<usize>,
    pub depth_fanout: usize,
    pub strategies: Vec<Strategy>,
    pub workers: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            batch_sizes: vec![64, 256, 1024, 4096],
            depths: vec![2, 3, 4],
            depth_fanout: 10,
            strategies: Strategy::ALL.to_vec(),
            workers: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    /// Fixed graph seed; derived from `master_seed` when absent.
    #[serde(default)]
    pub graph_seed: Option<u64>,
    pub sample: SampleParams,
    pub layers: usize,
    pub feature_dim: usize,
    #[serde(default)]
    pub envelope: EnvelopeParams,
    /// Cost model file; the committed default calibration when absent.
    #[serde(default)]
    pub cost_model: Option<PathBuf>,
    pub iterations: u64,
    #[serde(default)]
    pub sweep: SweepAxes,
    /// Per-step all-reduce time for data-parallel runs.
    #[serde(default)]
    pub allreduce_cost: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Power-law graph with `1e5` vertices and `4e7` directed edge slots
/// (average degree 400), exponent 2.1.
pub fn reference_graph_spec() -> GraphGenSpec {
    GraphGenSpec::power_law(100_000, 40_000_000, 2.1)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSource::Generate(reference_graph_spec()),
            graph_seed: None,
            sample: SampleParams {
                batch_size: 1024,
                fanouts: vec![10, 10],
            },
            layers: 2,
            feature_dim: 128,
            envelope: EnvelopeParams::default(),
            cost_model: None,
            iterations: 200,
            sweep: SweepAxes::default(),
            allreduce_cost: 2.0,
            output: default_output(),
            master_seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        let s = &self.sweep;
        for (name, empty) in [
            ("batch_sizes", s.batch_sizes.is_empty()),
            ("depths", s.depths.is_empty()),
            ("strategies", s.strategies.is_empty()),
            ("workers", s.workers.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("sweep.{name} must not be empty")));
            }
        }
        if s.workers.contains(&0) {
            return Err(Error::Config("worker counts must be positive".into()));
        }
        if s.depths.contains(&0) {
            return Err(Error::Config("depths must be positive".into()));
        }
        if !(self.allreduce_cost >= 0.0) {
            return Err(Error::Config("allreduce_cost must be >= 0".into()));
        }
        self.sample_config(0).validate()
    }

    pub fn sample_config(&self, seed: u64) -> SampleConfig {
        SampleConfig::new(self.sample.batch_size, self.sample.fanouts.clone(), seed)
    }

    pub fn repetitions(&self) -> u64 {
        self.envelope.repetitions.unwrap_or(self.iterations)
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        match &self.cost_model {
            Some(path) => CostModel::load(path),
            None => Ok(CostModel::default_calibration()),
        }
    }
}
