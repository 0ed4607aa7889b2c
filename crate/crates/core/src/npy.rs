//! Minimal reader and writer for the numpy `.npy` v1.0 format.
//!
//! Only C-order little-endian arrays are handled. Headers are written with
//! the same layout numpy itself produces (including the growth padding on
//! the leading axis), so files written here are byte-identical to
//! `numpy.save` output for the same array.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";

const ARRAY_ALIGN: usize = 64;
const GROWTH_AXIS_MAX_DIGITS: usize = 21;
// magic + version + u16 header length
const PREFIX_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

impl Header {
    pub fn new(descr: &str, shape: &[usize]) -> Self {
        Header {
            descr: descr.to_string(),
            fortran_order: false,
            shape: shape.to_vec(),
        }
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    fn dict_repr(&self) -> String {
        let shape = match self.shape.len() {
            0 => "()".to_string(),
            1 => format!("({},)", self.shape[0]),
            _ => {
                let parts: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
                format!("({})", parts.join(", "))
            }
        };
        let order = if self.fortran_order { "True" } else { "False" };
        format!(
            "{{'descr': '{}', 'fortran_order': {}, 'shape': {}, }}",
            self.descr, order, shape
        )
    }

    /// Serializes the magic, version and padded header dict.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut dict = self.dict_repr();
        let lead = if self.fortran_order {
            self.shape.last()
        } else {
            self.shape.first()
        };
        let lead_digits = lead.map_or(1, |d| d.to_string().len());
        dict.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(lead_digits)));
        let hlen = dict.len() + 1;
        let pad = ARRAY_ALIGN - (PREFIX_LEN + hlen) % ARRAY_ALIGN;
        dict.push_str(&" ".repeat(pad));
        dict.push('\n');
        let len = u16::try_from(dict.len())
            .map_err(|_| Error::Format("header longer than a v1.0 file allows".into()))?;

        let mut out = Vec::with_capacity(PREFIX_LEN + dict.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(dict.as_bytes());
        Ok(out)
    }

    pub fn read<R: Read>(reader: &mut R) -> Result<Self> {
        let mut prefix = [0u8; 8];
        reader
            .read_exact(&mut prefix)
            .map_err(|_| Error::Format("file shorter than the npy preamble".into()))?;
        if &prefix[..6] != MAGIC {
            return Err(Error::Format("missing \\x93NUMPY magic".into()));
        }
        let hlen = match (prefix[6], prefix[7]) {
            (1, 0) => {
                let mut b = [0u8; 2];
                reader.read_exact(&mut b)?;
                u16::from_le_bytes(b) as usize
            }
            (2, 0) | (3, 0) => {
                let mut b = [0u8; 4];
                reader.read_exact(&mut b)?;
                u32::from_le_bytes(b) as usize
            }
            (major, minor) => {
                return Err(Error::Format(format!("unsupported version {major}.{minor}")))
            }
        };
        let mut raw = vec![0u8; hlen];
        reader
            .read_exact(&mut raw)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let text =
            std::str::from_utf8(&raw).map_err(|_| Error::Format("header is not text".into()))?;
        parse_dict(text)
    }
}

fn parse_dict(text: &str) -> Result<Header> {
    let body = text.trim();
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| Error::Format(format!("header is not a dict: {body:?}")))?;

    let mut descr = None;
    let mut fortran_order = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest)?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::Format(format!("expected ':' after key {key:?}")))?
            .trim_start();
        rest = match key {
            "descr" => {
                let (v, r) = take_quoted(after)?;
                descr = Some(v.to_string());
                r
            }
            "fortran_order" => {
                if let Some(r) = after.strip_prefix("False") {
                    fortran_order = Some(false);
                    r
                } else if let Some(r) = after.strip_prefix("True") {
                    fortran_order = Some(true);
                    r
                } else {
                    return Err(Error::Format("fortran_order must be True or False".into()));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| Error::Format("shape must be a tuple".into()))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| Error::Format("unterminated shape tuple".into()))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L')
                            .parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad shape entry {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(Error::Format(format!("unexpected header key {other:?}"))),
        };
        rest = rest.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    match (descr, fortran_order, shape) {
        (Some(descr), Some(fortran_order), Some(shape)) => Ok(Header {
            descr,
            fortran_order,
            shape,
        }),
        _ => Err(Error::Format("header is missing descr, fortran_order or shape".into())),
    }
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::Format(format!("expected quoted string at {s:?}")))?;
    let body = &s[1..];
    let end = body
        .find(quote)
        .ok_or_else(|| Error::Format("unterminated string in header".into()))?;
    Ok((&body[..end], &body[end + 1..]))
}

fn read_payload<R: Read>(reader: &mut R, header: &Header, width: usize) -> Result<Vec<u8>> {
    if header.fortran_order {
        return Err(Error::Format("fortran-ordered arrays are not supported".into()));
    }
    let n = header.element_count();
    let mut bytes = vec![0u8; n * width];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("payload shorter than {n} elements")))?;
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(bytes)
}

/// Reads an `<f4` array, returning its shape and values.
pub fn read_f32<R: Read>(reader: &mut R) -> Result<(Vec<usize>, Vec<f32>)> {
    let header = Header::read(reader)?;
    if header.descr != "<f4" {
        return Err(Error::Dtype {
            found: header.descr,
            expected: "<f4".into(),
        });
    }
    let bytes = read_payload(reader, &header, 4)?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header.shape, values))
}

pub fn write_f32<W: Write>(writer: &mut W, shape: &[usize], values: &[f32]) -> Result<()> {
    let header = Header::new("<f4", shape);
    debug_assert_eq!(header.element_count(), values.len());
    writer.write_all(&header.to_bytes()?)?;
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

/// Reads a signed integer array stored as `<i4` or `<i8`.
pub fn read_i64<R: Read>(reader: &mut R) -> Result<(Vec<usize>, Vec<i64>)> {
    let header = Header::read(reader)?;
    let values = match header.descr.as_str() {
        "<i4" => read_payload(reader, &header, 4)?
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as i64)
            .collect(),
        "<i8" => read_payload(reader, &header, 8)?
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        _ => {
            return Err(Error::Dtype {
                found: header.descr,
                expected: "<i4 or <i8".into(),
            })
        }
    };
    Ok((header.shape, values))
}

pub fn write_i32<W: Write>(writer: &mut W, shape: &[usize], values: &[i32]) -> Result<()> {
    let header = Header::new("<i4", shape);
    writer.write_all(&header.to_bytes()?)?;
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_numpy_layout() {
        // numpy.save(np.zeros((512, 64, 64), '<f4')) header
        let bytes = Header::new("<f4", &[512, 64, 64]).to_bytes().unwrap();
        let dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (512, 64, 64), }";
        let mut expected = b"\x93NUMPY\x01\x00v\x00".to_vec();
        expected.extend_from_slice(dict.as_bytes());
        expected.extend_from_slice(&[b' '; 51]);
        expected.push(b'\n');
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len(), 128);
    }

    #[test]
    fn header_shapes_of_other_ranks() {
        let h = Header::new("<i4", &[7]);
        assert!(h.dict_repr().contains("'shape': (7,)"));
        let h = Header::new("<f4", &[]);
        assert!(h.dict_repr().contains("'shape': ()"));
        for shape in [vec![3, 4], vec![1, 1, 1], vec![123456, 2]] {
            let b = Header::new("<f4", &shape).to_bytes().unwrap();
            assert_eq!(b.len() % 64, 0);
            assert_eq!(*b.last().unwrap(), b'\n');
            let parsed = Header::read(&mut b.as_slice()).unwrap();
            assert_eq!(parsed.shape, shape);
        }
    }

    #[test]
    fn parses_double_quoted_and_reordered_keys() {
        let h = parse_dict("{\"shape\": (2, 3), \"fortran_order\": False, \"descr\": \"<f4\"}")
            .unwrap();
        assert_eq!(h, Header::new("<f4", &[2, 3]));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(
            Header::read(&mut &b"\x93NUMPX\x01\x00"[..]),
            Err(Error::Format(_))
        ));
        let mut b = Header::new("<f4", &[2]).to_bytes().unwrap();
        b.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(matches!(read_f32(&mut b.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn integer_round_trip() {
        let mut buf = Vec::new();
        write_i32(&mut buf, &[2, 2], &[0, 1, 2, -3]).unwrap();
        let (shape, v) = read_i64(&mut buf.as_slice()).unwrap();
        assert_eq!(shape, vec![2, 2]);
        assert_eq!(v, vec![0, 1, 2, -3]);
    }
}
