//! Chain file: header plus flattened draws.
//!
//! ```text
//! magic        8 bytes   b"RELFIT\0\0"
//! version      u32 LE    1
//! header_len   u32 LE
//! header       JSON      dims, spec, seeds, labels, per-chain metadata
//! body         f64 LE    for each chain: warmup (B3 row-major, sigma2) per
//!                        burn-in iteration, then each draw flattened as
//!                        B1, B2, B3 (row-major), sigma2
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AlsReport, CoefficientSet, FitMethod, FitResult, ModelSpec};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const MAGIC: &[u8; 8] = b"RELFIT\0\0";
const VERSION: u32 = 1;

/// Labels and run context stored with the chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub actors: Vec<String>,
    pub variables: Vec<String>,
    /// Free-form run context (preprocessing toggles, input hashes).
    pub context: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitFile {
    pub meta: FitMeta,
    pub chains: Vec<FitResult>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainHeader {
    seed: u64,
    draws: usize,
    warmup: usize,
    jitter_retries: usize,
    start: Vec<f64>,
    als: AlsReport,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    num_actors: usize,
    num_variables: usize,
    method: FitMethod,
    spec: ModelSpec,
    meta: FitMeta,
    chains: Vec<ChainHeader>,
}

fn malformed(detail: impl Into<String>) -> Error {
    Error::Container {
        path: None,
        detail: detail.into(),
    }
}

pub fn write_fit_file<W: Write>(mut out: W, file: &FitFile) -> Result<()> {
    let first = file
        .chains
        .first()
        .ok_or_else(|| Error::InvalidInput("fit file needs at least one chain".into()))?;
    let (m, v) = (first.num_actors(), first.num_variables());
    if file.chains.iter().any(|c| c.num_actors() != m || c.num_variables() != v || c.method != first.method) {
        return Err(Error::InvalidInput("chains disagree on dims or method".into()));
    }
    let header = Header {
        num_actors: m,
        num_variables: v,
        method: first.method,
        spec: first.spec.clone(),
        meta: file.meta.clone(),
        chains: file
            .chains
            .iter()
            .map(|c| ChainHeader {
                seed: c.seed,
                draws: c.draws.len(),
                warmup: c.warmup.len(),
                jitter_retries: c.jitter_retries,
                start: c.start.flatten(),
                als: c.als.clone(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for chain in &file.chains {
        for (b3, s2) in &chain.warmup {
            for x in b3.values().iter().chain(std::iter::once(s2)) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        for d in &chain.draws {
            for x in d.flatten() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out.write_all(&buf).map_err(|e| malformed(format!("write failed: {e}")))
}

pub fn read_fit_file<R: Read>(mut input: R) -> Result<FitFile> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| malformed(format!("read failed: {e}")))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(malformed("bad magic; not a fit file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(malformed(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < 16 + hlen {
        return Err(malformed("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..16 + hlen])?;
    let (m, v) = (header.num_actors, header.num_variables);
    let draw_len = 2 * m * m + 3 * v * v + 1;
    let warm_len = 3 * v * v + 1;
    let expected: usize = header
        .chains
        .iter()
        .map(|c| c.warmup * warm_len + c.draws * draw_len)
        .sum::<usize>()
        * 8;
    let body = &bytes[16 + hlen..];
    if body.len() != expected {
        return Err(malformed(format!("expected {expected} body bytes, found {}", body.len())));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };

    let mut chains = Vec::with_capacity(header.chains.len());
    for ch in header.chains {
        let mut warmup = Vec::with_capacity(ch.warmup);
        for _ in 0..ch.warmup {
            let w = take(warm_len);
            warmup.push((Matrix::from_vec(v, 3 * v, w[..warm_len - 1].to_vec())?, w[warm_len - 1]));
        }
        let draws = (0..ch.draws)
            .map(|_| CoefficientSet::unflatten(m, v, &take(draw_len), true))
            .collect::<Result<Vec<_>>>()?;
        chains.push(FitResult {
            method: header.method,
            spec: header.spec.clone(),
            seed: ch.seed,
            draws,
            warmup,
            start: CoefficientSet::unflatten(m, v, &ch.start, true)?,
            als: ch.als,
            jitter_retries: ch.jitter_retries,
        });
    }
    Ok(FitFile {
        meta: header.meta,
        chains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, RelationalSeries};
    use crate::estimation::gibbs_fit;
    use crate::tensor::Tensor4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fit_file_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let data = Tensor4::from_fn([3, 3, 1, 6], |i, j, _, _| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
        let d = build_design(&RelationalSeries::unlabeled(data).unwrap()).unwrap();
        let spec = ModelSpec {
            iterations: 12,
            burn_in: 2,
            ..ModelSpec::default()
        };
        let fit = gibbs_fit(&d, &spec).unwrap();
        let file = FitFile {
            meta: FitMeta {
                actors: vec!["a".into(), "b".into(), "c".into()],
                variables: vec!["x".into()],
                context: serde_json::json!({"qq_normalize": true}),
            },
            chains: vec![fit],
        };
        let mut buf = Vec::new();
        write_fit_file(&mut buf, &file).unwrap();
        let back = read_fit_file(buf.as_slice()).unwrap();
        assert_eq!(back, file);
        assert!(read_fit_file(&buf[..buf.len() - 8]).is_err());
    }
}
