//! `dicca-model-v1` container.
//!
//! ```text
//! dicca-model-v1
//! config <json>
//! tensor <name> <len>        (one line per tensor, in parameter order)
//! param_count <total>
//! end
//! <total little-endian f64 values>
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DiccaConfig, DiccaParams};

pub const MODEL_VERSION: &str = "dicca-model-v1";
const MAGIC_PREFIX: &str = "dicca-model-";
const HEADER_END: &[u8] = b"\nend\n";
const MAX_HEADER: usize = 1 << 20;

/// Serialize the text header that precedes the float blocks.
pub fn model_header(params: &DiccaParams, config: &DiccaConfig) -> Result<String> {
    params.check_against(config)?;
    let json = serde_json::to_string(config).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut h = format!("{MODEL_VERSION}\nconfig {json}\n");
    for (name, (_, t)) in params.tensor_names().iter().zip(params.tensors()) {
        h.push_str(&format!("tensor {name} {}\n", t.len()));
    }
    h.push_str(&format!("param_count {}\nend\n", params.param_count()));
    Ok(h)
}

pub fn encode_model(params: &DiccaParams, config: &DiccaConfig) -> Result<Vec<u8>> {
    let header = model_header(params, config)?;
    let mut out = Vec::with_capacity(header.len() + 8 * params.param_count());
    out.extend_from_slice(header.as_bytes());
    for (_, t) in params.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(DiccaParams, DiccaConfig)> {
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(first_line);
    if first != MODEL_VERSION {
        if first.starts_with(MAGIC_PREFIX) {
            return Err(Error::UnsupportedVersion { found: first.into_owned(), expected: MODEL_VERSION.into() });
        }
        return Err(Error::format("not a dicca model file"));
    }
    let scan = &bytes[..bytes.len().min(MAX_HEADER)];
    let end = scan
        .windows(HEADER_END.len())
        .position(|w| w == HEADER_END)
        .ok_or_else(|| Error::format("model header is not terminated"))?
        + HEADER_END.len();
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format("model header is not utf-8"))?;

    let mut lines = header.lines().skip(1);
    let config_json = lines
        .next()
        .and_then(|l| l.strip_prefix("config "))
        .ok_or_else(|| Error::format("model header line 2 must hold the config"))?;
    let config: DiccaConfig =
        serde_json::from_str(config_json).map_err(|e| Error::format(format!("model config: {e}")))?;
    config.validate().map_err(|e| Error::format(format!("model config: {e}")))?;
    let mut params = DiccaParams::zeros(&config).map_err(|e| Error::format(format!("model config: {e}")))?;
    let names = params.tensor_names();
    let lens: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();

    let mut declared = Vec::new();
    let mut count = None;
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("tensor") => {
                let name = parts.next().ok_or_else(|| Error::format(format!("header line {line_no}: missing name")))?;
                let len: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::format(format!("header line {line_no}: bad tensor length")))?;
                declared.push((name.to_string(), len));
            }
            Some("param_count") => {
                count = parts.next().and_then(|s| s.parse::<usize>().ok());
                if count.is_none() {
                    return Err(Error::format(format!("header line {line_no}: bad param_count")));
                }
            }
            Some("end") => break,
            _ => return Err(Error::format(format!("header line {line_no}: unexpected {line:?}"))),
        }
    }
    if declared.len() != names.len() {
        return Err(Error::format(format!(
            "header declares {} tensors, config implies {}",
            declared.len(),
            names.len()
        )));
    }
    for ((name, len), (expect_name, expect_len)) in declared.iter().zip(names.iter().zip(&lens)) {
        if name != expect_name || len != expect_len {
            return Err(Error::format(format!(
                "header tensor {name} ({len}) does not match config ({expect_name}, {expect_len})"
            )));
        }
    }
    let total = params.param_count();
    if count != Some(total) {
        return Err(Error::format(format!("header param_count {count:?} does not match config ({total})")));
    }

    let body = &bytes[end..];
    if body.len() != 8 * total {
        return Err(Error::format(format!(
            "model body at byte {end} holds {} bytes, expected {}",
            body.len(),
            8 * total
        )));
    }
    let mut chunks = body.chunks_exact(8);
    for (_, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            let c = chunks.next().expect("length checked");
            *v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        }
    }
    Ok((params, config))
}

pub fn save_model(params: &DiccaParams, config: &DiccaConfig, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(params, config)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(DiccaParams, DiccaConfig)> {
    let path = path.as_ref();
    decode_model(&fs::read(path)?).map_err(|e| e.with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (DiccaParams, DiccaConfig) {
        let cfg = DiccaConfig::new(vec![3, 2], 2, vec![1, 1]);
        (DiccaParams::init(&cfg, 7).unwrap(), cfg)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (p, c) = sample();
        let bytes = encode_model(&p, &c).unwrap();
        let (q, d) = decode_model(&bytes).unwrap();
        assert_eq!(d, c);
        for ((_, a), (_, b)) in p.tensors().iter().zip(q.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let header = model_header(&p, &c).unwrap();
        assert_eq!(bytes.len(), header.len() + 8 * p.param_count());
    }

    #[test]
    fn truncated_and_versioned() {
        let (p, c) = sample();
        let bytes = encode_model(&p, &c).unwrap();
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
        let mut v2 = bytes.clone();
        v2[13] = b'2';
        assert!(matches!(decode_model(&v2), Err(Error::UnsupportedVersion { .. })));
        assert!(matches!(decode_model(b"hello\n"), Err(Error::Format { .. })));
    }

    #[test]
    fn tampered_dims_fail_before_body() {
        let (p, c) = sample();
        let header = model_header(&p, &c).unwrap();
        let tampered = header.replacen("tensor lambda", "tensor lambda_x", 1);
        // no body at all: the header check must fail first
        let err = decode_model(tampered.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("does not match"), "{err}");
    }
}
