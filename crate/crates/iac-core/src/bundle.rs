//! The design bundle: one versioned JSON document holding everything needed
//! to reload, re-verify and simulate a finished design.
//!
//! Channels are stored as the seed they were drawn from, not as matrices;
//! regeneration is deterministic. Timestamps honor the `IAC_TIMESTAMP`
//! environment variable (unix milliseconds) so scripted runs can produce
//! byte-identical bundles.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IacError, Result};
use crate::graph::{AlignmentEquationSet, ConstructionTrace, IacGraph};
use crate::linalg::CMatrix;
use crate::pipeline::DesignArtifacts;
use crate::solver::{PrecoderSet, ReceiverSet};
use crate::system::{generate_channels, ChannelSet, SystemConfig};
use crate::verify::{DesignReport, Tolerances};

pub const BUNDLE_VERSION: u32 = 1;

/// Dense complex matrix as row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push([m[(r, c)].re, m[(r, c)].im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(IacError::BundleFormat(format!(
                "matrix payload holds {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        let entries: Vec<Complex64> = self
            .data
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        Ok(CMatrix::from_row_slice(self.rows, self.cols, &entries))
    }
}

/// Everything needed to reproduce a run, plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub created_unix_ms: u64,
    pub channel_seed: u64,
    pub graph_seed: u64,
    pub tolerances: Tolerances,
}

fn timestamp_ms() -> u64 {
    if let Ok(raw) = std::env::var("IAC_TIMESTAMP") {
        if let Ok(ms) = raw.parse() {
            return ms;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// A complete, self-describing design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignBundle {
    pub version: u32,
    pub config: SystemConfig,
    pub manifest: RunManifest,
    pub used_optimal_construction: bool,
    pub graph: IacGraph,
    pub equations: AlignmentEquationSet,
    pub trace: ConstructionTrace,
    pub precoders: Vec<MatrixData>,
    pub receivers: Vec<MatrixData>,
    pub report: DesignReport,
}

impl DesignBundle {
    pub fn from_artifacts(artifacts: &DesignArtifacts, command: &str, tolerances: Tolerances) -> Self {
        Self {
            version: BUNDLE_VERSION,
            config: artifacts.config.clone(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                created_unix_ms: timestamp_ms(),
                channel_seed: artifacts.channels.seed,
                graph_seed: artifacts.graph_seed,
                tolerances,
            },
            used_optimal_construction: artifacts.used_optimal_construction,
            graph: artifacts.graph.clone(),
            equations: artifacts.equations.clone(),
            trace: artifacts.trace.clone(),
            precoders: artifacts
                .precoders
                .matrices()
                .iter()
                .map(MatrixData::from_matrix)
                .collect(),
            receivers: artifacts
                .receivers
                .matrices()
                .iter()
                .map(MatrixData::from_matrix)
                .collect(),
            report: artifacts.report.clone(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let bundle: Self =
            serde_json::from_str(&raw).map_err(|e| IacError::BundleFormat(e.to_string()))?;
        if bundle.version != BUNDLE_VERSION {
            return Err(IacError::BundleFormat(format!(
                "unsupported bundle version {}",
                bundle.version
            )));
        }
        bundle.config.validate()?;
        Ok(bundle)
    }

    /// Re-draws the channel set recorded by seed in the manifest.
    pub fn regenerate_channels(&self) -> Result<ChannelSet> {
        generate_channels(&self.config, self.manifest.channel_seed)
    }

    /// Rehydrates and re-validates the stored precoders.
    pub fn precoder_set(&self) -> Result<PrecoderSet> {
        let mats = self
            .precoders
            .iter()
            .map(|m| m.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        PrecoderSet::new(mats, &self.config)
    }

    /// Rehydrates and re-validates the stored receivers.
    pub fn receiver_set(&self) -> Result<ReceiverSet> {
        let mats = self
            .receivers
            .iter()
            .map(|m| m.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        ReceiverSet::new(mats, &self.config)
    }
}
