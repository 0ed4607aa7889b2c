//! Dense feature tensors and their on-disk NPY representation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::npy;

/// A `C x H x W` tensor of deep features, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "feature map dimensions must be positive, got ({channels}, {height}, {width})"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "{} values do not fill a ({channels}, {height}, {width}) tensor",
                data.len()
            )));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, h: usize, w: usize) -> f32 {
        self.data[(c * self.height + h) * self.width + w]
    }

    /// Flattens to a `C x (H*W)` matrix; column `p` is position `(p / W, p % W)`.
    pub fn as_matrix(&self) -> FeatureMatrix {
        let n = self.positions();
        let data = DMatrix::from_fn(self.channels, n, |c, p| self.data[c * n + p] as f64);
        FeatureMatrix { data }
    }

    /// Inverse of [`FeatureMap::as_matrix`]. Values are rounded to `f32`.
    pub fn from_matrix(mat: &FeatureMatrix, height: usize, width: usize) -> Result<Self> {
        let n = height * width;
        if mat.columns() != n {
            return Err(Error::Dimension(format!(
                "matrix has {} columns, a {height}x{width} grid needs {n}",
                mat.columns()
            )));
        }
        let c = mat.channels();
        let mut data = vec![0f32; c * n];
        for (p, col) in mat.data.column_iter().enumerate() {
            for (ch, v) in col.iter().enumerate() {
                data[ch * n + p] = *v as f32;
            }
        }
        Self::new(c, height, width, data)
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Data(format!(
                "non-finite value {} at flat index {i}",
                self.data[i]
            ))),
        }
    }
}

/// A `C x N` matrix whose columns are per-position feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Self {
        FeatureMatrix { data }
    }

    pub fn from_columns(channels: usize, columns: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = columns.iter().find(|c| c.len() != channels) {
            return Err(Error::Dimension(format!(
                "column of length {} in a {channels}-channel matrix",
                bad.len()
            )));
        }
        Ok(FeatureMatrix {
            data: DMatrix::from_fn(channels, columns.len(), |c, p| columns[p][c]),
        })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn columns(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, p: usize) -> &[f64] {
        let c = self.channels();
        &self.data.as_slice()[p * c..(p + 1) * c]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Gathers the given columns, in order, into a new matrix.
    pub fn select(&self, positions: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            data: self.data.select_columns(positions),
        }
    }

    /// Concatenates matrices column-wise. All parts must share a channel count.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        let c = first.channels();
        if let Some(p) = parts.iter().find(|p| p.channels() != c) {
            return Err(Error::ChannelMismatch {
                content: c,
                style: p.channels(),
            });
        }
        let total: usize = parts.iter().map(|p| p.columns()).sum();
        let mut data = DMatrix::zeros(c, total);
        let mut at = 0;
        for p in parts {
            data.columns_mut(at, p.columns()).copy_from(&p.data);
            at += p.columns();
        }
        Ok(FeatureMatrix { data })
    }
}

/// Loads a `(C, H, W)` or `(1, C, H, W)` float32 NPY tensor.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let mut reader = BufReader::new(File::open(path.as_ref())?);
    let (shape, values) = npy::read_f32(&mut reader)?;
    let dims = match shape.as_slice() {
        [c, h, w] => [*c, *h, *w],
        [1, c, h, w] => [*c, *h, *w],
        other => {
            return Err(Error::Format(format!(
                "expected shape (C,H,W) or (1,C,H,W), found {other:?}"
            )))
        }
    };
    let map = FeatureMap::new(dims[0], dims[1], dims[2], values)
        .map_err(|e| Error::Format(e.to_string()))?;
    map.check_finite()?;
    Ok(map)
}

pub fn write_tensor(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path.as_ref())?);
    npy::write_f32(&mut writer, &map.shape(), &map.data)?;
    writer.flush()?;
    Ok(())
}
