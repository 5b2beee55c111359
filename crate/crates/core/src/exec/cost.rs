use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Device time `a + b_v |V| + b_e |E| + b_f |V| feature_dim`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCoefficients {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b_v: f64,
    #[serde(default)]
    pub b_e: f64,
    #[serde(default)]
    pub b_f: f64,
}

impl KernelCoefficients {
    pub fn time(&self, vertices: usize, edges: usize, feature_dim: usize) -> f64 {
        let v = vertices as f64;
        self.a + self.b_v * v + self.b_e * edges as f64 + self.b_f * v * feature_dim as f64
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            a: self.a * k,
            b_v: self.b_v * k,
            b_e: self.b_e * k,
            b_f: self.b_f * k,
        }
    }

    fn check(&self, kind: &str) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b_v", self.b_v),
            ("b_e", self.b_e),
            ("b_f", self.b_f),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{kind}.{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Presample,
    Scan,
    Sample,
    Relabel,
    Build,
    Gather,
    Train,
}

impl KernelKind {
    pub const ALL: [KernelKind; 7] = [
        KernelKind::Presample,
        KernelKind::Scan,
        KernelKind::Sample,
        KernelKind::Relabel,
        KernelKind::Build,
        KernelKind::Gather,
        KernelKind::Train,
    ];
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCosts {
    pub presample: KernelCoefficients,
    pub scan: KernelCoefficients,
    pub sample: KernelCoefficients,
    pub relabel: KernelCoefficients,
    pub build: KernelCoefficients,
    pub gather: KernelCoefficients,
    pub train: KernelCoefficients,
}

impl KernelCosts {
    pub fn get(&self, kind: KernelKind) -> &KernelCoefficients {
        match kind {
            KernelKind::Presample => &self.presample,
            KernelKind::Scan => &self.scan,
            KernelKind::Sample => &self.sample,
            KernelKind::Relabel => &self.relabel,
            KernelKind::Build => &self.build,
            KernelKind::Gather => &self.gather,
            KernelKind::Train => &self.train,
        }
    }

    fn get_mut(&mut self, kind: KernelKind) -> &mut KernelCoefficients {
        match kind {
            KernelKind::Presample => &mut self.presample,
            KernelKind::Scan => &mut self.scan,
            KernelKind::Sample => &mut self.sample,
            KernelKind::Relabel => &mut self.relabel,
            KernelKind::Build => &mut self.build,
            KernelKind::Gather => &mut self.gather,
            KernelKind::Train => &mut self.train,
        }
    }
}

/// Host and device latency parameters, in abstract time units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub host_launch_latency: f64,
    /// Device-to-host export of one metadata value, including the stall.
    pub sync_export_latency: f64,
    pub host_logic_latency: f64,
    pub graph_replay_latency: f64,
    pub pilot_child_launch_latency: f64,
    pub early_exit_block_cost: f64,
    /// Work items per block.
    pub block_quota: usize,
    pub kernels: KernelCosts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// The committed default calibration.
pub const DEFAULT_CALIBRATION: &str = include_str!("../../../../calibration/default.json");

impl CostModel {
    pub fn default_calibration() -> Self {
        Self::from_json(DEFAULT_CALIBRATION).expect("committed calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CostModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("host_launch_latency", self.host_launch_latency),
            ("sync_export_latency", self.sync_export_latency),
            ("host_logic_latency", self.host_logic_latency),
            ("graph_replay_latency", self.graph_replay_latency),
            (
                "pilot_child_launch_latency",
                self.pilot_child_launch_latency,
            ),
            ("early_exit_block_cost", self.early_exit_block_cost),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.block_quota < 2 {
            return Err(Error::Config("block_quota must be at least 2".into()));
        }
        for kind in KernelKind::ALL {
            self.kernels.get(kind).check(&format!("{kind:?}"))?;
        }
        Ok(())
    }

    /// Every latency set to zero, device coefficients kept.
    pub fn device_only(&self) -> Self {
        Self {
            host_launch_latency: 0.0,
            sync_export_latency: 0.0,
            host_logic_latency: 0.0,
            graph_replay_latency: 0.0,
            pilot_child_launch_latency: 0.0,
            early_exit_block_cost: 0.0,
            ..self.clone()
        }
    }

    /// Multiplies every device-side coefficient, early-exit cost included.
    pub fn scale_device(&self, k: f64) -> Self {
        let mut out = self.clone();
        for kind in KernelKind::ALL {
            *out.kernels.get_mut(kind) = self.kernels.get(kind).scaled(k);
        }
        out.early_exit_block_cost *= k;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calibration_loads() {
        let m = CostModel::default_calibration();
        assert!(m.block_quota >= 2);
        assert!(m.provenance.is_some());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CALIBRATION).unwrap();
        v["bogus"] = 1.into();
        assert!(CostModel::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn negative_latency_rejected() {
        let mut m = CostModel::default_calibration();
        m.sync_export_latency = -1.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn scaling_is_linear() {
        let m = CostModel::default_calibration();
        let s = m.scale_device(2.0);
        let t = |m: &CostModel| m.kernels.train.time(100, 1000, 16);
        assert!((t(&s) - 2.0 * t(&m)).abs() < 1e-9);
        assert_eq!(s.host_launch_latency, m.host_launch_latency);
    }
}
