//! End-to-end transfer over feature tensor files.
//!
//! load -> concatenate style sets -> k-means -> data cost -> graph-cut
//! labeling -> per-group transform -> blend -> assemble -> write.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_fit, ClusterModel, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::feature_io::{read_tensor, write_tensor, FeatureMap, FeatureMatrix};
use crate::label_map::save_labels;
use crate::matching::{
    build_data_cost, gather_groups, solve_labeling, total_energy, EnergyParams, LabelField, Metric,
};
use crate::metrics::{self, FeatureBundle, CONTENT_LAYER, DEFAULT_GAMMA};
use crate::transform::{adain_group, assemble, blend, wct_group, GroupPair, TransformMode};

pub use crate::transform::Alpha;

pub const CONFIG_VERSION: u32 = 1;

/// Every knob of a transfer that is independent of file locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub k: usize,
    pub lambda: f64,
    pub metric: Metric,
    pub mode: TransformMode,
    pub alpha: Alpha,
    pub seed: u64,
    pub max_iters: usize,
    pub eig_floor: f64,
    pub gamma: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            k: 3,
            lambda: 0.1,
            metric: Metric::Cosine,
            mode: TransformMode::Wct,
            alpha: Alpha::Scalar(1.0),
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            eig_floor: crate::transform::DEFAULT_EIG_FLOOR,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if !(self.eig_floor > 0.0 && self.eig_floor.is_finite()) {
            return Err(Error::Argument("eigenvalue floor must be positive".into()));
        }
        self.energy_params()?;
        self.alpha.validate(self.k)
    }

    pub fn energy_params(&self) -> Result<EnergyParams> {
        EnergyParams::new(self.lambda, self.metric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub content: PathBuf,
    pub style: Vec<PathBuf>,
    pub output: PathBuf,
    pub save_labels: Option<PathBuf>,
    pub save_clusters: Option<PathBuf>,
    pub settings: Settings,
}

impl PipelineConfig {
    pub fn new(content: impl Into<PathBuf>, style: Vec<PathBuf>, output: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            content: content.into(),
            style,
            output: output.into(),
            save_labels: None,
            save_clusters: None,
            settings: Settings::default(),
        }
    }
}

/// On-disk JSON config. Every field is optional so that it can be merged
/// with command line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub content: Option<PathBuf>,
    pub style: Option<Vec<PathBuf>>,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub metric: Option<Metric>,
    pub mode: Option<TransformMode>,
    pub alpha: Option<Alpha>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub save_labels: Option<PathBuf>,
    pub save_clusters: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub load: f64,
    pub cluster: f64,
    #[serde(rename = "match")]
    pub matching: f64,
    pub transform: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub content_loss: f64,
    pub style_loss: f64,
    pub total: f64,
    pub energy: f64,
    pub k: usize,
    /// Style vectors per cluster.
    pub cluster_sizes: Vec<usize>,
    /// Content positions matched to each cluster.
    pub matched_sizes: Vec<usize>,
    pub timing: Timing,
}

/// Everything a transfer produces besides the files it writes.
#[derive(Debug, Clone)]
pub struct Stylized {
    pub features: FeatureMap,
    pub clusters: ClusterModel,
    pub labels: LabelField,
    pub report: Report,
}

/// Column-concatenates the style maps after checking channel counts.
pub fn style_matrix(content_channels: usize, styles: &[FeatureMap]) -> Result<FeatureMatrix> {
    if styles.is_empty() {
        return Err(Error::Argument("at least one style tensor is required".into()));
    }
    if let Some(s) = styles.iter().find(|s| s.channels() != content_channels) {
        return Err(Error::ChannelMismatch {
            content: content_channels,
            style: s.channels(),
        });
    }
    let parts: Vec<FeatureMatrix> = styles.iter().map(FeatureMap::as_matrix).collect();
    FeatureMatrix::concat(&parts)
}

pub fn cluster_styles(style: &FeatureMatrix, settings: &Settings) -> Result<ClusterModel> {
    kmeans_fit(style, settings.k, settings.seed, settings.max_iters)
}

/// Labels every content position with a cluster. Returns the labeling and
/// its energy.
pub fn match_content(
    content: &FeatureMap,
    clusters: &ClusterModel,
    params: &EnergyParams,
) -> Result<(LabelField, f64)> {
    let matrix = content.as_matrix();
    let costs = build_data_cost(&matrix, &clusters.centers, params)?;
    let labels = solve_labeling(&costs, content.height(), content.width(), params, None)?;
    let energy = total_energy(&labels, &costs, params);
    Ok((labels, energy))
}

/// Runs the whole transfer in memory.
pub fn stylize(content: &FeatureMap, styles: &[FeatureMap], settings: &Settings) -> Result<Stylized> {
    settings.validate()?;
    let params = settings.energy_params()?;
    let style = style_matrix(content.channels(), styles)?;

    let t = Instant::now();
    let clusters = cluster_styles(&style, settings)?;
    let cluster_time = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (labels, energy) = match_content(content, &clusters, &params)?;
    let match_time = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let content_matrix = content.as_matrix();
    let groups = gather_groups(&content_matrix, &labels)?;
    let mut style_members = vec![Vec::new(); clusters.k()];
    for (i, &l) in clusters.labels.iter().enumerate() {
        style_members[l].push(i);
    }
    let transferred = groups
        .par_iter()
        .map(|(label, positions)| {
            let pair = GroupPair::new(
                &content_matrix.select(positions),
                &style.select(&style_members[*label]),
                positions.clone(),
            )?;
            let out = match settings.mode {
                TransformMode::Wct => wct_group(&pair, settings.eig_floor),
                TransformMode::Adain => adain_group(&pair),
            };
            let mixed = blend(&out, &pair.content, settings.alpha.for_cluster(*label))?;
            Ok((pair.positions, mixed))
        })
        .collect::<Result<Vec<_>>>()?;
    let features = assemble(&transferred, content.height(), content.width())?;
    let transform_time = t.elapsed().as_secs_f64();

    let mut matched_sizes = vec![0; clusters.k()];
    for (label, positions) in &groups {
        matched_sizes[*label] = positions.len();
    }

    let out_bundle = FeatureBundle::single(CONTENT_LAYER, features.clone())?;
    let content_bundle = FeatureBundle::single(CONTENT_LAYER, content.clone())?;
    let style_flat = FeatureMap::from_matrix(&style, 1, style.columns())?;
    let style_bundle = FeatureBundle::single(CONTENT_LAYER, style_flat)?;
    let content_loss = metrics::content_loss(&out_bundle, &content_bundle)?;
    let style_loss = metrics::style_loss(&out_bundle, &style_bundle)?;

    let report = Report {
        content_loss,
        style_loss,
        total: content_loss + settings.gamma * style_loss,
        energy,
        k: clusters.k(),
        cluster_sizes: clusters.counts.clone(),
        matched_sizes,
        timing: Timing {
            load: 0.0,
            cluster: cluster_time,
            matching: match_time,
            transform: transform_time,
            total: cluster_time + match_time + transform_time,
        },
    };
    Ok(Stylized {
        features,
        clusters,
        labels,
        report,
    })
}

/// Reads the configured tensors, runs the transfer and writes the output
/// tensor along with any requested sidecars.
pub fn run_mst(config: &PipelineConfig) -> Result<(FeatureMap, Report)> {
    config.settings.validate()?;
    let t = Instant::now();
    let content = read_tensor(&config.content)?;
    let styles = config
        .style
        .iter()
        .map(read_tensor)
        .collect::<Result<Vec<_>>>()?;
    let load_time = t.elapsed().as_secs_f64();

    let mut result = stylize(&content, &styles, &config.settings)?;
    result.report.timing.load = load_time;
    result.report.timing.total += load_time;

    write_tensor(&result.features, &config.output)?;
    if let Some(path) = &config.save_labels {
        save_labels(&result.labels, path)?;
    }
    if let Some(path) = &config.save_clusters {
        result.clusters.save_json(path)?;
    }
    Ok((result.features, result.report))
}
