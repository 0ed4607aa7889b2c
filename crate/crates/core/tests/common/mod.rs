#![allow(dead_code)]

use mst_core::{DataCost, FeatureMap, FlowNetwork};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_costs(rng: &mut ChaCha8Rng, k: usize, n: usize, max: f64) -> DataCost {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..max)).collect())
        .collect();
    DataCost::from_rows(&rows).unwrap()
}

/// Random network on up to `max_nodes` nodes with integer capacities in `0..=max_cap`.
pub fn random_network(rng: &mut ChaCha8Rng, max_nodes: usize, max_cap: u32) -> FlowNetwork {
    let n = rng.gen_range(1..=max_nodes);
    let mut net = FlowNetwork::new(n);
    for i in 0..n {
        let s = if rng.gen_bool(0.6) { rng.gen_range(0..=max_cap) } else { 0 };
        let t = if rng.gen_bool(0.6) { rng.gen_range(0..=max_cap) } else { 0 };
        net.add_terminal_caps(i, s as f64, t as f64).unwrap();
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.5) {
                let a = rng.gen_range(0..=max_cap) as f64;
                let b = if rng.gen_bool(0.5) { rng.gen_range(0..=max_cap) as f64 } else { 0.0 };
                net.add_edge(u, v, a, b).unwrap();
            }
        }
    }
    net
}

/// Minimum s-t cut capacity by enumerating every source set.
pub fn brute_force_min_cut(net: &FlowNetwork) -> f64 {
    let n = net.node_count();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let in_source = |i: usize| mask & (1 << i) != 0;
        let mut cap = 0.0;
        for i in 0..n {
            let (s, t) = net.terminal_caps(i);
            cap += if in_source(i) { t } else { s };
        }
        for e in net.edges() {
            if in_source(e.from) && !in_source(e.to) {
                cap += e.cap;
            }
            if in_source(e.to) && !in_source(e.from) {
                cap += e.rev_cap;
            }
        }
        best = best.min(cap);
    }
    best
}

/// Literal energy: data term plus lambda for every discordant 4-neighbor pair.
pub fn literal_energy(labels: &[usize], costs: &DataCost, h: usize, w: usize, lambda: f64) -> f64 {
    let mut data = 0.0;
    for p in 0..h * w {
        data += costs.get(labels[p], p);
    }
    let mut smooth = 0.0;
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w && labels[p] != labels[p + 1] {
                smooth += lambda;
            }
            if y + 1 < h && labels[p] != labels[p + w] {
                smooth += lambda;
            }
        }
    }
    data + smooth
}

/// Exhaustive minimum energy over all labelings.
pub fn exhaustive_min(costs: &DataCost, h: usize, w: usize, lambda: f64) -> (f64, Vec<usize>) {
    let n = h * w;
    let k = costs.labels();
    let total = k.pow(n as u32);
    let mut best = (f64::INFINITY, vec![]);
    for mut code in 0..total {
        let mut labels = vec![0; n];
        for slot in labels.iter_mut() {
            *slot = code % k;
            code /= k;
        }
        let e = literal_energy(&labels, costs, h, w, lambda);
        if e < best.0 {
            best = (e, labels);
        }
    }
    best
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Correlated full-rank data: `A z + b` for standard normal `z`.
pub fn correlated(rng: &mut ChaCha8Rng, c: usize, m: usize) -> DMatrix<f64> {
    let mix = DMatrix::from_fn(c, c, |i, j| {
        if i == j {
            1.0 + rng.gen::<f64>()
        } else {
            0.4 * gaussian(rng)
        }
    });
    let shift = DMatrix::from_fn(c, 1, |_, _| 3.0 * gaussian(rng));
    let z = DMatrix::from_fn(c, m, |_, _| gaussian(rng));
    let mut x = mix * z;
    for mut col in x.column_iter_mut() {
        col += shift.column(0);
    }
    x
}

/// Naive-loop mean and population covariance.
pub fn naive_mean_cov(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (c, m) = x.shape();
    let mut mean = vec![0.0; c];
    for i in 0..c {
        for j in 0..m {
            mean[i] += x[(i, j)];
        }
        mean[i] /= m as f64;
    }
    let mut cov = DMatrix::zeros(c, c);
    for a in 0..c {
        for b in 0..c {
            let mut s = 0.0;
            for j in 0..m {
                s += (x[(a, j)] - mean[a]) * (x[(b, j)] - mean[b]);
            }
            cov[(a, b)] = s / m as f64;
        }
    }
    (mean, cov)
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    let data = (0..c * h * w).map(|_| gaussian(rng) as f32).collect();
    FeatureMap::new(c, h, w, data).unwrap()
}

/// Non-negative features drawn around `modes` centers, like rectified
/// encoder activations.
pub fn modal_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, modes: usize) -> FeatureMap {
    let centers: Vec<Vec<f64>> = (0..modes)
        .map(|_| (0..c).map(|_| rng.gen_range(0.0..2.0)).collect())
        .collect();
    let n = h * w;
    let mut data = vec![0f32; c * n];
    for p in 0..n {
        // spatially coherent modes: vertical bands
        let mode = (p % w) * modes / w;
        for ch in 0..c {
            let v = centers[mode][ch] + 0.3 * gaussian(rng);
            data[ch * n + p] = v.max(0.0) as f32;
        }
    }
    FeatureMap::new(c, h, w, data).unwrap()
}
