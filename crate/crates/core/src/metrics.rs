//! Content and style losses over multi-layer feature bundles, used as
//! quality metrics for transferred features.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::feature_io::FeatureMap;

pub const LAYER_NAMES: [&str; 4] = ["conv1_1", "conv2_1", "conv3_1", "conv4_1"];
pub const CONTENT_LAYER: &str = "conv4_1";
pub const DEFAULT_GAMMA: f64 = 1e-2;
const VARIANCE_FLOOR: f64 = 1e-8;

/// Encoder activations of one image, keyed by layer.
#[derive(Debug, Clone, Default)]
pub struct FeatureBundle {
    layers: Vec<(String, FeatureMap)>,
}

impl FeatureBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(layer: &str, map: FeatureMap) -> Result<Self> {
        let mut b = Self::new();
        b.insert(layer, map)?;
        Ok(b)
    }

    pub fn insert(&mut self, layer: &str, map: FeatureMap) -> Result<()> {
        if !LAYER_NAMES.contains(&layer) {
            return Err(Error::Argument(format!(
                "unknown layer {layer:?}, expected one of {LAYER_NAMES:?}"
            )));
        }
        if self.get(layer).is_some() {
            return Err(Error::Argument(format!("layer {layer} given twice")));
        }
        self.layers.push((layer.to_string(), map));
        Ok(())
    }

    pub fn get(&self, layer: &str) -> Option<&FeatureMap> {
        self.layers.iter().find(|(n, _)| n == layer).map(|(_, m)| m)
    }

    pub fn layer_names(&self) -> BTreeSet<&str> {
        self.layers.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

fn content_layer(b: &FeatureBundle) -> Result<&FeatureMap> {
    b.get(CONTENT_LAYER)
        .ok_or_else(|| Error::Argument(format!("bundle lacks {CONTENT_LAYER}")))
}

/// Euclidean norm of the conv4_1 difference.
pub fn content_loss(a: &FeatureBundle, b: &FeatureBundle) -> Result<f64> {
    let (fa, fb) = (content_layer(a)?, content_layer(b)?);
    if fa.shape() != fb.shape() {
        return Err(Error::Dimension(format!(
            "{CONTENT_LAYER} shapes differ: {:?} vs {:?}",
            fa.shape(),
            fb.shape()
        )));
    }
    Ok(fa
        .data()
        .iter()
        .zip(fb.data())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Per-channel spatial mean and standard deviation (population, with the
/// variance floored at 1e-8).
pub fn channel_moments(map: &FeatureMap) -> (Vec<f64>, Vec<f64>) {
    let n = map.positions();
    let mut means = Vec::with_capacity(map.channels());
    let mut stds = Vec::with_capacity(map.channels());
    for plane in map.data().chunks_exact(n) {
        let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let var = plane.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        means.push(mean);
        stds.push(var.max(VARIANCE_FLOOR).sqrt());
    }
    (means, stds)
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sum over layers of the distances between channel means and between
/// channel standard deviations.
pub fn style_loss(a: &FeatureBundle, b: &FeatureBundle) -> Result<f64> {
    if a.is_empty() || a.layer_names() != b.layer_names() {
        return Err(Error::Argument(format!(
            "style loss needs matching non-empty layer sets, got {:?} and {:?}",
            a.layer_names(),
            b.layer_names()
        )));
    }
    let mut total = 0.0;
    for name in LAYER_NAMES {
        let (Some(fa), Some(fb)) = (a.get(name), b.get(name)) else {
            continue;
        };
        if fa.channels() != fb.channels() {
            return Err(Error::Dimension(format!(
                "{name}: {} vs {} channels",
                fa.channels(),
                fb.channels()
            )));
        }
        let (ma, sa) = channel_moments(fa);
        let (mb, sb) = channel_moments(fb);
        total += l2_diff(&ma, &mb) + l2_diff(&sa, &sb);
    }
    Ok(total)
}

/// `content_loss(a, content) + gamma * style_loss(a, style)`.
pub fn perceptual_total(
    a: &FeatureBundle,
    content: &FeatureBundle,
    style: &FeatureBundle,
    gamma: f64,
) -> Result<f64> {
    Ok(content_loss(a, content)? + gamma * style_loss(a, style)?)
}
