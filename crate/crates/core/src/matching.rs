//! Graph-cut matching of content positions to style clusters.
//!
//! Each content position `p` receives a cluster label `f_p`. The labeling
//! minimizes
//!
//! ```text
//! E(f) = sum_p D(content_p, center_{f_p}) + lambda * #{(p, q) 4-neighbors : f_p != f_q}
//! ```
//!
//! Two labels are solved exactly with a single min-cut. Three or more use
//! alpha-expansion, where every move is itself a binary min-cut.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_io::FeatureMatrix;
use crate::maxflow::{solve_maxflow, FlowNetwork, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Cosine => cosine_distance(a, b),
            Metric::Euclidean => euclidean_distance(a, b),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Argument(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

/// Pairwise neighborhood over the content grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Neighborhood {
    #[default]
    FourConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub lambda: f64,
    pub metric: Metric,
    pub neighborhood: Neighborhood,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            lambda: 0.1,
            metric: Metric::Cosine,
            neighborhood: Neighborhood::FourConnected,
        }
    }
}

impl EnergyParams {
    pub fn new(lambda: f64, metric: Metric) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Argument(format!(
                "smoothness weight must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(EnergyParams {
            lambda,
            metric,
            neighborhood: Neighborhood::FourConnected,
        })
    }
}

fn cosine_raw(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0))
}

/// `1 - a.b / (|a| |b|)`, clamped to `[0, 2]`. A zero vector is treated as
/// orthogonal to everything (distance 1).
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    cosine_raw(a, b).unwrap_or_else(|| {
        log::warn!("cosine distance with a zero-magnitude vector; using 1.0");
        1.0
    })
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `costs[k][p]`: distance of content position `p` to cluster center `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCost {
    k: usize,
    n: usize,
    costs: Vec<f64>,
}

impl DataCost {
    /// Builds from a label-major table (`rows[k][p]`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::Argument("data cost needs at least one label".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged data cost rows".into()));
        }
        let costs: Vec<f64> = rows.iter().flatten().copied().collect();
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data("data costs must be finite".into()));
        }
        Ok(DataCost { k, n, costs })
    }

    pub fn labels(&self) -> usize {
        self.k
    }

    pub fn positions(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, label: usize, position: usize) -> f64 {
        self.costs[label * self.n + position]
    }

    /// Per-position argmin, ties to the smallest label.
    pub fn argmin_labels(&self) -> Vec<usize> {
        (0..self.n)
            .map(|p| {
                let mut best = 0;
                for k in 1..self.k {
                    if self.get(k, p) < self.get(best, p) {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Sum of every entry, label-major.
    pub fn total(&self) -> f64 {
        self.costs.iter().sum()
    }
}

/// Distances from every column of `features` to every column of `centers`.
pub(crate) fn distance_table(
    features: &FeatureMatrix,
    centers: &DMatrix<f64>,
    metric: Metric,
) -> Result<DataCost> {
    if features.channels() != centers.nrows() {
        return Err(Error::Dimension(format!(
            "features have {} channels, centers have {}",
            features.channels(),
            centers.nrows()
        )));
    }
    let k = centers.ncols();
    if k == 0 {
        return Err(Error::Argument("at least one center is required".into()));
    }
    let n = features.columns();
    let center_cols: Vec<&[f64]> = (0..k)
        .map(|j| &centers.as_slice()[j * centers.nrows()..(j + 1) * centers.nrows()])
        .collect();
    let per_position: Vec<(Vec<f64>, bool)> = (0..n)
        .into_par_iter()
        .map(|p| {
            let col = features.column(p);
            let mut degenerate = false;
            let row = center_cols
                .iter()
                .map(|c| match metric {
                    Metric::Cosine => cosine_raw(col, c).unwrap_or_else(|| {
                        degenerate = true;
                        1.0
                    }),
                    Metric::Euclidean => euclidean_distance(col, c),
                })
                .collect();
            (row, degenerate)
        })
        .collect();
    let zero_pairs = per_position.iter().filter(|(_, d)| *d).count();
    if zero_pairs > 0 {
        log::warn!("{zero_pairs} positions met a zero-magnitude vector; cosine distance set to 1.0");
    }
    let mut costs = vec![0.0; k * n];
    for (p, (row, _)) in per_position.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            costs[j * n + p] = v;
        }
    }
    Ok(DataCost { k, n, costs })
}

pub fn build_data_cost(
    content: &FeatureMatrix,
    centers: &DMatrix<f64>,
    params: &EnergyParams,
) -> Result<DataCost> {
    distance_table(content, centers, params.metric)
}

/// A label per content grid position, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    height: usize,
    width: usize,
    labels: Vec<usize>,
}

impl LabelField {
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{} labels for a {height}x{width} grid",
                labels.len()
            )));
        }
        Ok(LabelField {
            height,
            width,
            labels,
        })
    }

    pub fn uniform(height: usize, width: usize, label: usize) -> Self {
        LabelField {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, p: usize) -> usize {
        self.labels[p]
    }

    /// Checks shape and label range against a data cost table.
    pub fn check_against(&self, costs: &DataCost) -> Result<()> {
        if self.labels.len() != costs.positions() {
            return Err(Error::Dimension(format!(
                "label field has {} positions, data cost has {}",
                self.labels.len(),
                costs.positions()
            )));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= costs.labels()) {
            return Err(Error::Data(format!(
                "label {l} out of range for {} clusters",
                costs.labels()
            )));
        }
        Ok(())
    }

    /// Number of 4-connected neighbor pairs carrying different labels.
    pub fn discordant_pairs(&self) -> usize {
        let mut count = 0;
        for (p, q) in grid_pairs(self.height, self.width) {
            if self.labels[p] != self.labels[q] {
                count += 1;
            }
        }
        count
    }
}

/// Every unordered 4-connected pair `(p, q)` with `p < q`, row-major.
pub fn grid_pairs(height: usize, width: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            let p = y * width + x;
            let right = (x + 1 < width).then_some((p, p + 1));
            let down = (y + 1 < height).then_some((p, p + width));
            right.into_iter().chain(down)
        })
    })
}

fn energy_of(labels: &[usize], costs: &DataCost, height: usize, width: usize, lambda: f64) -> f64 {
    let mut data = 0.0;
    for (p, &l) in labels.iter().enumerate() {
        data += costs.get(l, p);
    }
    let mut discordant = 0usize;
    for (p, q) in grid_pairs(height, width) {
        if labels[p] != labels[q] {
            discordant += 1;
        }
    }
    data + lambda * discordant as f64
}

/// Data term plus Potts smoothness over the 4-connected grid.
///
/// Panics if the label field does not match `costs`; see
/// [`LabelField::check_against`].
pub fn total_energy(labels: &LabelField, costs: &DataCost, params: &EnergyParams) -> f64 {
    assert_eq!(
        labels.labels.len(),
        costs.positions(),
        "label field and data cost disagree on the number of positions"
    );
    energy_of(&labels.labels, costs, labels.height, labels.width, params.lambda)
}

/// Minimizes the labeling energy.
///
/// `init` defaults to the per-position argmin of the data cost. The result
/// never has higher energy than its initialization.
pub fn solve_labeling(
    costs: &DataCost,
    height: usize,
    width: usize,
    params: &EnergyParams,
    init: Option<&LabelField>,
) -> Result<LabelField> {
    if height * width != costs.positions() {
        return Err(Error::Dimension(format!(
            "{height}x{width} grid for {} data cost positions",
            costs.positions()
        )));
    }
    let start = match init {
        Some(f) => {
            if f.height != height || f.width != width {
                return Err(Error::Dimension("initial labeling has the wrong shape".into()));
            }
            f.check_against(costs)?;
            f.labels.clone()
        }
        None => costs.argmin_labels(),
    };
    let lambda = params.lambda;
    let labels = match costs.labels() {
        1 => vec![0; height * width],
        2 => {
            let cut = binary_cut(costs, height, width, lambda);
            let e_cut = energy_of(&cut, costs, height, width, lambda);
            let e_start = energy_of(&start, costs, height, width, lambda);
            if e_start < e_cut {
                start
            } else {
                cut
            }
        }
        _ => alpha_expansion(costs, height, width, lambda, start),
    };
    LabelField::new(height, width, labels)
}

/// Exact two-label minimum. Sink side carries label 0, so positions the cut
/// leaves undecided fall to the smaller label.
fn binary_cut(costs: &DataCost, height: usize, width: usize, lambda: f64) -> Vec<usize> {
    let n = height * width;
    let mut net = FlowNetwork::new(n);
    for p in 0..n {
        net.add_terminal_caps(p, costs.get(0, p), costs.get(1, p))
            .expect("data costs are finite and non-negative");
    }
    if lambda > 0.0 {
        for (p, q) in grid_pairs(height, width) {
            net.add_edge(p, q, lambda, lambda).expect("valid grid edge");
        }
    }
    let cut = solve_maxflow(&net);
    cut.sides
        .iter()
        .map(|s| match s {
            Side::Sink => 0,
            Side::Source => 1,
        })
        .collect()
}

fn alpha_expansion(
    costs: &DataCost,
    height: usize,
    width: usize,
    lambda: f64,
    mut labels: Vec<usize>,
) -> Vec<usize> {
    let mut energy = energy_of(&labels, costs, height, width, lambda);
    loop {
        let mut improved = false;
        for alpha in 0..costs.labels() {
            let candidate = expansion_move(costs, height, width, lambda, &labels, alpha);
            let e = energy_of(&candidate, costs, height, width, lambda);
            if e < energy {
                labels = candidate;
                energy = e;
                improved = true;
            }
        }
        if !improved {
            return labels;
        }
    }
}

/// Best labeling reachable from `labels` by switching any subset of
/// positions to `alpha`.
///
/// Positions already labeled `alpha` stay fixed; their smoothness terms fold
/// into the unary costs of free neighbors. A free node on the source side
/// keeps its label, on the sink side it takes `alpha`. Neighbors with
/// different current labels are joined through an auxiliary node.
fn expansion_move(
    costs: &DataCost,
    height: usize,
    width: usize,
    lambda: f64,
    labels: &[usize],
    alpha: usize,
) -> Vec<usize> {
    let n = height * width;
    let mut node_of = vec![usize::MAX; n];
    let mut free = Vec::new();
    for p in 0..n {
        if labels[p] != alpha {
            node_of[p] = free.len();
            free.push(p);
        }
    }
    if free.is_empty() {
        return labels.to_vec();
    }

    // (cost of taking alpha, cost of keeping the current label)
    let mut unary: Vec<(f64, f64)> = free
        .iter()
        .map(|&p| (costs.get(alpha, p), costs.get(labels[p], p)))
        .collect();
    let mut pairs = Vec::new();
    for (p, q) in grid_pairs(height, width) {
        match (node_of[p], node_of[q]) {
            (usize::MAX, usize::MAX) => {}
            (usize::MAX, v) | (v, usize::MAX) => unary[v].1 += lambda,
            (u, v) => pairs.push((u, v, labels[p] == labels[q])),
        }
    }

    let mut net = FlowNetwork::new(free.len());
    for (v, &(take, keep)) in unary.iter().enumerate() {
        net.add_terminal_caps(v, take, keep)
            .expect("unary costs are finite and non-negative");
    }
    if lambda > 0.0 {
        for (u, v, same) in pairs {
            if same {
                net.add_edge(u, v, lambda, lambda).expect("valid edge");
            } else {
                let aux = net.add_node();
                net.add_edge(u, aux, lambda, lambda).expect("valid edge");
                net.add_edge(aux, v, lambda, lambda).expect("valid edge");
                net.add_terminal_caps(aux, 0.0, lambda).expect("valid cap");
            }
        }
    }

    let cut = solve_maxflow(&net);
    let mut out = labels.to_vec();
    for (v, &p) in free.iter().enumerate() {
        if cut.side(v) == Side::Sink {
            out[p] = alpha;
        }
    }
    out
}

/// Exact minimum by enumerating all `K^(H*W)` labelings (at most 10^7).
/// Among equal energies the lexicographically first labeling wins.
pub fn brute_force_labeling(
    costs: &DataCost,
    height: usize,
    width: usize,
    params: &EnergyParams,
) -> Result<LabelField> {
    let n = height * width;
    if n != costs.positions() {
        return Err(Error::Dimension("grid does not match data cost".into()));
    }
    let k = costs.labels();
    let space = (k as f64).powi(n as i32);
    if space > 1e7 {
        return Err(Error::TooLarge(space));
    }
    let pairs: Vec<(usize, usize)> = grid_pairs(height, width).collect();
    let mut current = vec![0usize; n];
    let mut best = current.clone();
    let mut best_energy = f64::INFINITY;
    loop {
        let mut data = 0.0;
        for (p, &l) in current.iter().enumerate() {
            data += costs.get(l, p);
        }
        let discordant = pairs.iter().filter(|(p, q)| current[*p] != current[*q]).count();
        let e = data + params.lambda * discordant as f64;
        if e < best_energy {
            best_energy = e;
            best.copy_from_slice(&current);
        }
        // odometer, last position fastest
        let mut i = n;
        loop {
            if i == 0 {
                return LabelField::new(height, width, best);
            }
            i -= 1;
            current[i] += 1;
            if current[i] < k {
                break;
            }
            current[i] = 0;
        }
    }
}

/// Partitions content positions by label: `(label, ascending positions)`,
/// ordered by label, empty labels omitted.
pub fn gather_groups(
    content: &FeatureMatrix,
    labels: &LabelField,
) -> Result<Vec<(usize, Vec<usize>)>> {
    if content.columns() != labels.labels.len() {
        return Err(Error::Dimension(format!(
            "{} content columns for {} labels",
            content.columns(),
            labels.labels.len()
        )));
    }
    let k = labels.labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (p, &l) in labels.labels.iter().enumerate() {
        groups[l].push(p);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .collect())
}
