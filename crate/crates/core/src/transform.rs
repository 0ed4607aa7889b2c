//! Per-group feature transforms and reassembly.
//!
//! Each matched content/style group is transferred independently, blended
//! with the original content by its own weight, and scattered back to the
//! content grid.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::{FeatureMap, FeatureMatrix};

pub const DEFAULT_EIG_FLOOR: f64 = 1e-8;
pub const ADAIN_STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformMode {
    #[default]
    Wct,
    Adain,
}

impl FromStr for TransformMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wct" => Ok(TransformMode::Wct),
            "adain" => Ok(TransformMode::Adain),
            other => Err(Error::Argument(format!("unknown transform mode {other:?}"))),
        }
    }
}

impl fmt::Display for TransformMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformMode::Wct => "wct",
            TransformMode::Adain => "adain",
        })
    }
}

/// Content/style trade-off, either one weight for every cluster or one per
/// cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Scalar(f64),
    PerCluster(Vec<f64>),
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Scalar(1.0)
    }
}

impl Alpha {
    pub fn for_cluster(&self, k: usize) -> f64 {
        match self {
            Alpha::Scalar(a) => *a,
            Alpha::PerCluster(v) => v[k],
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let values: &[f64] = match self {
            Alpha::Scalar(a) => std::slice::from_ref(a),
            Alpha::PerCluster(v) => {
                if v.len() != k {
                    return Err(Error::Argument(format!(
                        "{} blend weights given for {k} clusters",
                        v.len()
                    )));
                }
                v
            }
        };
        match values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            Some(a) => Err(Error::Argument(format!("blend weight {a} outside [0, 1]"))),
            None => Ok(()),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// `0.5` or a comma separated list such as `0.2,1,0.7`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Argument(format!("bad blend weight {t:?}")))
        };
        if s.contains(',') {
            Ok(Alpha::PerCluster(
                s.split(',').map(parse).collect::<Result<_>>()?,
            ))
        } else {
            Ok(Alpha::Scalar(parse(s)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams {
    pub mode: TransformMode,
    pub alpha: Alpha,
    pub eig_floor: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        TransformParams {
            mode: TransformMode::Wct,
            alpha: Alpha::default(),
            eig_floor: DEFAULT_EIG_FLOOR,
        }
    }
}

/// Content features matched to one cluster, with that cluster's style
/// features.
#[derive(Debug, Clone)]
pub struct GroupPair {
    pub content: DMatrix<f64>,
    pub style: DMatrix<f64>,
    pub positions: Vec<usize>,
}

impl GroupPair {
    pub fn new(content: &FeatureMatrix, style: &FeatureMatrix, positions: Vec<usize>) -> Result<Self> {
        if content.columns() == 0 || style.columns() == 0 {
            return Err(Error::Argument("a group needs at least one content and one style vector".into()));
        }
        if content.channels() != style.channels() {
            return Err(Error::ChannelMismatch {
                content: content.channels(),
                style: style.channels(),
            });
        }
        if positions.len() != content.columns() {
            return Err(Error::Dimension(format!(
                "{} positions for {} content columns",
                positions.len(),
                content.columns()
            )));
        }
        Ok(GroupPair {
            content: content.matrix().clone(),
            style: style.matrix().clone(),
            positions,
        })
    }
}

/// Subtracts the column mean. Returns the centered matrix and the mean.
pub fn mean_center(features: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean = features.column_mean();
    let mut centered = features.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (centered, mean)
}

/// `(1/M) X X^T`, symmetrized.
pub fn covariance(centered: &DMatrix<f64>) -> DMatrix<f64> {
    let m = centered.ncols() as f64;
    let cov = centered * centered.transpose() / m;
    (&cov + cov.transpose()) * 0.5
}

/// `E diag(f(max(d, floor))) E^T` for the covariance eigendecomposition.
fn spectral_map(cov: DMatrix<f64>, floor: f64, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov);
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &d) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= f(d.max(floor));
    }
    scaled * eig.eigenvectors.transpose()
}

/// Decorrelates mean-centered features. Returns the whitened features and
/// the whitening matrix `E D^{-1/2} E^T`.
pub fn whiten(centered: &DMatrix<f64>, eig_floor: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = spectral_map(covariance(centered), eig_floor, |d| d.powf(-0.5));
    let whitened = &w * centered;
    (whitened, w)
}

/// The coloring matrix `E D^{1/2} E^T` of mean-centered style features.
pub fn coloring_matrix(style_centered: &DMatrix<f64>, eig_floor: f64) -> DMatrix<f64> {
    spectral_map(covariance(style_centered), eig_floor, f64::sqrt)
}

/// Imposes the covariance of `style_centered` on whitened features.
pub fn color(whitened: &DMatrix<f64>, style_centered: &DMatrix<f64>, eig_floor: f64) -> DMatrix<f64> {
    coloring_matrix(style_centered, eig_floor) * whitened
}

fn mean_shift(pair: &GroupPair) -> DMatrix<f64> {
    let (mut out, _) = mean_center(&pair.content);
    let style_mean = pair.style.column_mean();
    for mut col in out.column_iter_mut() {
        col += &style_mean;
    }
    out
}

/// Whitening/coloring transfer of one group. Groups with fewer than two
/// content or style vectors only get their mean shifted to the style mean.
pub fn wct_group(pair: &GroupPair, eig_floor: f64) -> DMatrix<f64> {
    if pair.content.ncols() < 2 || pair.style.ncols() < 2 {
        return mean_shift(pair);
    }
    let (content_centered, _) = mean_center(&pair.content);
    let (style_centered, style_mean) = mean_center(&pair.style);
    let (whitened, _) = whiten(&content_centered, eig_floor);
    let mut out = color(&whitened, &style_centered, eig_floor);
    for mut col in out.column_iter_mut() {
        col += &style_mean;
    }
    out
}

/// Per-channel mean and population standard deviation.
pub fn channel_stats(features: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
    let m = features.ncols() as f64;
    let mean = features.column_mean();
    let var = DVector::from_fn(features.nrows(), |c, _| {
        features.row(c).iter().map(|x| (x - mean[c]).powi(2)).sum::<f64>() / m
    });
    (mean, var.map(f64::sqrt))
}

/// Per-channel statistic replacement:
/// `sigma_s (x - mu_c) / max(sigma_c, 1e-8) + mu_s`.
pub fn adain_group(pair: &GroupPair) -> DMatrix<f64> {
    let (mu_c, sd_c) = channel_stats(&pair.content);
    let (mu_s, sd_s) = channel_stats(&pair.style);
    let mut out = pair.content.clone();
    for c in 0..out.nrows() {
        let scale = sd_s[c] / sd_c[c].max(ADAIN_STD_FLOOR);
        for x in out.row_mut(c).iter_mut() {
            *x = scale * (*x - mu_c[c]) + mu_s[c];
        }
    }
    out
}

/// `alpha * transferred + (1 - alpha) * content`.
pub fn blend(transferred: &DMatrix<f64>, content: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Argument(format!("blend weight {alpha} outside [0, 1]")));
    }
    if transferred.shape() != content.shape() {
        return Err(Error::Dimension(format!(
            "blend shapes differ: {:?} vs {:?}",
            transferred.shape(),
            content.shape()
        )));
    }
    // endpoints are returned verbatim so that 0 and 1 are exact
    if alpha == 0.0 {
        return Ok(content.clone());
    }
    if alpha == 1.0 {
        return Ok(transferred.clone());
    }
    Ok(transferred * alpha + content * (1.0 - alpha))
}

/// Scatters group columns back to their grid positions. The position lists
/// must cover `0..height*width` exactly once.
pub fn assemble(groups: &[(Vec<usize>, DMatrix<f64>)], height: usize, width: usize) -> Result<FeatureMap> {
    let n = height * width;
    let channels = match groups.first() {
        Some((_, m)) => m.nrows(),
        None => return Err(Error::Partition("no groups to assemble".into())),
    };
    let mut out = DMatrix::zeros(channels, n);
    let mut written = vec![false; n];
    for (positions, features) in groups {
        if features.nrows() != channels || features.ncols() != positions.len() {
            return Err(Error::Dimension(format!(
                "group of {} positions carries a {}x{} matrix",
                positions.len(),
                features.nrows(),
                features.ncols()
            )));
        }
        for (j, &p) in positions.iter().enumerate() {
            if p >= n {
                return Err(Error::Partition(format!("position {p} outside a {n}-position grid")));
            }
            if written[p] {
                return Err(Error::Partition(format!("position {p} written twice")));
            }
            written[p] = true;
            out.set_column(p, &features.column(j));
        }
    }
    if let Some(p) = written.iter().position(|w| !w) {
        return Err(Error::Partition(format!("position {p} never written")));
    }
    FeatureMap::from_matrix(&FeatureMatrix::new(out), height, width)
}
