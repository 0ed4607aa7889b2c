//! Export and import of label fields: `<i4` NPY arrays of shape `(H, W)` and
//! paletted PNG cluster maps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::LabelField;
use crate::npy;

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [145, 30, 180],
    [70, 240, 240],
    [245, 130, 48],
    [240, 50, 230],
    [210, 245, 60],
    [0, 128, 128],
    [170, 110, 40],
    [128, 128, 128],
];

pub fn write_labels_npy(labels: &LabelField, path: impl AsRef<Path>) -> Result<()> {
    let values: Vec<i32> = labels
        .labels()
        .iter()
        .map(|&l| i32::try_from(l).map_err(|_| Error::Data(format!("label {l} too large"))))
        .collect::<Result<_>>()?;
    let mut w = BufWriter::new(File::create(path)?);
    npy::write_i32(&mut w, &[labels.height(), labels.width()], &values)?;
    w.flush()?;
    Ok(())
}

pub fn read_labels_npy(path: impl AsRef<Path>) -> Result<LabelField> {
    let (shape, values) = npy::read_i64(&mut BufReader::new(File::open(path)?))?;
    let [h, w] = shape[..] else {
        return Err(Error::Format(format!("label array must be 2-D, got {shape:?}")));
    };
    let labels = values
        .into_iter()
        .map(|v| usize::try_from(v).map_err(|_| Error::Data(format!("negative label {v}"))))
        .collect::<Result<Vec<_>>>()?;
    LabelField::new(h, w, labels)
}

/// One pixel per grid position; supports up to 256 labels.
pub fn write_labels_png(labels: &LabelField, path: impl AsRef<Path>) -> Result<()> {
    let max = labels.labels().iter().copied().max().unwrap_or(0);
    if max > 255 {
        return Err(Error::Data(format!("label {max} does not fit a paletted png")));
    }
    let palette: Vec<u8> = (0..=max)
        .flat_map(|l| {
            let base = PALETTE[l % PALETTE.len()];
            // darken on wrap-around so that colors stay distinct
            let shade = 1.0 / (1 + l / PALETTE.len()) as f32;
            base.map(|c| (c as f32 * shade) as u8)
        })
        .collect();
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, labels.width() as u32, labels.height() as u32);
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(palette);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let pixels: Vec<u8> = labels.labels().iter().map(|&l| l as u8).collect();
    writer
        .write_image_data(&pixels)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Writes PNG for a `.png` extension and NPY otherwise.
pub fn save_labels(labels: &LabelField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        write_labels_png(labels, path)
    } else {
        write_labels_npy(labels, path)
    }
}
