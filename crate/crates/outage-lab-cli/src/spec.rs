//! JSON experiment descriptions.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use outage_lab::channel::ChannelParams;
use outage_lab::constellation::{Constellation, ConstellationKind};
use outage_lab::mi_table::MiTable;
use outage_lab::power::PowerPolicy;
use outage_lab::rotation::{Matrix, RotationFamily, RotationScheme};
use outage_lab::sim::{MiModel, SimConfig, DEFAULT_MIN_EVENTS};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSpec {
    pub kind: ConstellationKind,
    #[serde(rename = "M")]
    pub bits: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub family: RotationFamily,
    /// Matrix file for the `custom` family.
    #[serde(default)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub estimates_csv: Option<PathBuf>,
    #[serde(default)]
    pub summary_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub channel: ChannelParams,
    pub constellation: ConstellationSpec,
    #[serde(rename = "rate_R")]
    pub rate: f64,
    pub policy: PowerPolicy,
    #[serde(default)]
    pub rotation: Option<RotationSpec>,
    pub snr_grid_db: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default = "default_min_events")]
    pub min_events: u64,
    /// Precomputed table; built on the fly when absent.
    #[serde(default)]
    pub mi_table: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_min_events() -> u64 {
    DEFAULT_MIN_EVENTS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub label: String,
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub experiments: Vec<SweepEntry>,
    #[serde(default)]
    pub output: OutputSpec,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl ExperimentSpec {
    /// Builds and validates the simulation config without sampling anything.
    pub fn to_config(&self) -> Result<SimConfig> {
        self.channel.validate()?;
        let c = Constellation::build(self.constellation.kind, self.constellation.bits)?;
        let mut cfg = SimConfig::new(self.channel, c, self.rate, self.policy).with_grid(
            self.snr_grid_db.clone(),
            self.n_samples,
            self.seed,
        );
        cfg.min_events = self.min_events;
        if let Some(r) = &self.rotation {
            let b = self.channel.b as usize;
            let scheme = match (r.family, &r.matrix) {
                (RotationFamily::Custom, Some(path)) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let u = Matrix::from_json(&text)?;
                    if u.dim() != r.n {
                        bail!("matrix file is {}×{}, spec says N = {}", u.dim(), u.dim(), r.n);
                    }
                    RotationScheme::repeated(RotationFamily::Custom, u, b)?
                }
                (RotationFamily::Custom, None) => bail!("custom rotation needs a `matrix` file"),
                (family, _) => RotationScheme::build(family, r.n, b)?,
            };
            cfg = cfg.with_rotation(scheme);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Interpolation tables for `cfg`: the declared file, or freshly built defaults.
    pub fn mi_model(&self, cfg: &SimConfig) -> Result<MiModel> {
        match (&self.mi_table, &cfg.rotation) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(MiModel::Table(MiTable::from_json(&text)?))
            }
            (Some(_), Some(_)) => bail!("`mi_table` applies to unrotated experiments only"),
            _ => Ok(MiModel::for_config(cfg)?),
        }
    }
}
