//! Tensor container and long-format CSV.
//!
//! Container layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   b"RELTNSR\0"
//! version      u32       1
//! header_len   u32       length of the JSON header in bytes
//! header       JSON      {"dims":[d1,d2,d3,d4],"layout":"first-index-fastest","labels":{...}|null}
//! values       f64 x d1*d2*d3*d4, in layout order
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Tensor4;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RELTNSR\0";
const VERSION: u32 = 1;
pub(crate) const LAYOUT_TAG: &str = "first-index-fastest";

/// Optional axis labels carried alongside a tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub actors: Vec<String>,
    pub variables: Vec<String>,
    pub periods: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dims: [usize; 4],
    layout: String,
    labels: Option<Labels>,
}

fn container_err(detail: impl Into<String>) -> Error {
    Error::Container {
        path: None,
        detail: detail.into(),
    }
}

pub fn write_container<W: Write>(mut out: W, tensor: &Tensor4, labels: Option<&Labels>) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        dims: tensor.dims(),
        layout: LAYOUT_TAG.to_string(),
        labels: labels.cloned(),
    })?;
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * tensor.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in tensor.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
        .map_err(|e| container_err(format!("write failed: {e}")))
}

pub fn read_container<R: Read>(mut input: R) -> Result<(Tensor4, Option<Labels>)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| container_err(format!("read failed: {e}")))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(container_err("bad magic; not a tensor container"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(container_err(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body_start = 16 + header_len;
    if bytes.len() < body_start {
        return Err(container_err("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..body_start])?;
    if header.layout != LAYOUT_TAG {
        return Err(container_err(format!("unknown layout {:?}", header.layout)));
    }
    let len: usize = header.dims.iter().product();
    let body = &bytes[body_start..];
    if body.len() != 8 * len {
        return Err(container_err(format!(
            "expected {} value bytes for dims {:?}, found {}",
            8 * len,
            header.dims,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(l) = &header.labels {
        let [d1, d2, d3, d4] = header.dims;
        if l.actors.len() != d1 || d1 != d2 || l.variables.len() != d3 || l.periods.len() != d4 {
            return Err(container_err("labels do not match dims"));
        }
    }
    Ok((Tensor4::from_vec(header.dims, values)?, header.labels))
}

/// Long-format export, one row per entry: `i,j,w,t,value` (zero-based indices).
pub fn write_tensor_csv<W: Write>(out: W, tensor: &Tensor4) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["i", "j", "w", "t", "value"])?;
    let [d1, d2, d3, d4] = tensor.dims();
    for t in 0..d4 {
        for w in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    wtr.write_record(&[
                        i.to_string(),
                        j.to_string(),
                        w.to_string(),
                        t.to_string(),
                        format!("{:?}", tensor.get(i, j, w, t)),
                    ])?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| container_err(format!("csv flush failed: {e}")))?;
    Ok(())
}

/// Reads long-format CSV into a tensor of the given dims; absent entries are zero.
pub fn read_tensor_csv<R: Read>(input: R, dims: [usize; 4]) -> Result<Tensor4> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Tensor4::zeros(dims);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k)
                .ok_or_else(|| Error::InvalidInput(format!("row {}: missing column {k}", line + 2)))
        };
        let mut idx = [0usize; 4];
        for (k, slot) in idx.iter_mut().enumerate() {
            *slot = field(k)?.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("row {}: bad index {:?}", line + 2, rec.get(k)))
            })?;
            if *slot >= dims[k] {
                return Err(Error::dims("read_tensor_csv", format!("row {}: index out of range", line + 2)));
            }
        }
        let v: f64 = field(4)?
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("row {}: bad value", line + 2)))?;
        if !v.is_finite() {
            return Err(Error::NonFinite("read_tensor_csv"));
        }
        out.set(idx[0], idx[1], idx[2], idx[3], v);
    }
    Ok(out)
}
