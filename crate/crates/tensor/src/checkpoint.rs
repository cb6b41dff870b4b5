//! Checkpoint file format.
//!
//! A plain-text header followed by a raw little-endian f64 payload:
//!
//! ```text
//! GRAFT-CKPT 1
//! config {...single JSON line...}
//! tensor <name> <rows>x<cols> <element offset>
//! ...
//! payload <total element count>
//! <raw bytes, 8 per element, in manifest order>
//! ```
//!
//! The payload is always f64 regardless of the in-memory scalar type, so
//! checkpoints written by an f32 build load into an f64 build and vice
//! versa (with the usual precision caveats).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &str = "GRAFT-CKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("payload truncated: expected {expected} elements, got {got}")]
    Truncated { expected: usize, got: usize },
}

/// Writes every parameter with a config echo.
pub fn save_checkpoint<S: Scalar>(
    store: &ParamStore<S>,
    config_json: &str,
    path: impl AsRef<Path>,
) -> Result<(), CheckpointError> {
    assert!(
        !config_json.contains('\n'),
        "config echo must be a single line"
    );
    let path = path.as_ref();
    let io_err = |e: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);

    let mut header = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\nconfig {config_json}\n");
    let mut offset = 0usize;
    for (name, tensor) in store.iter() {
        header.push_str(&format!(
            "tensor {name} {}x{} {offset}\n",
            tensor.rows(),
            tensor.cols()
        ));
        offset += tensor.len();
    }
    header.push_str(&format!("payload {offset}\n"));
    w.write_all(header.as_bytes()).map_err(io_err)?;

    for (_, tensor) in store.iter() {
        for &v in tensor.data() {
            let bits = v.to_f64().unwrap_or(f64::NAN).to_le_bytes();
            w.write_all(&bits).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads a checkpoint back into a parameter store plus the config echo.
pub fn load_checkpoint<S: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(ParamStore<S>, String), CheckpointError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);

    let read_line = |r: &mut BufReader<File>| -> Result<String, CheckpointError> {
        let mut line = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            let n = r.read(&mut byte).map_err(io_err)?;
            if n == 0 || byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
        }
        String::from_utf8(line).map_err(|e| CheckpointError::Header(e.to_string()))
    };

    let magic_line = read_line(&mut r)?;
    let mut parts = magic_line.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(CheckpointError::Header(format!(
            "expected {CHECKPOINT_MAGIC}, found {magic_line:?}"
        )));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CheckpointError::Header("missing version".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }

    let config_line = read_line(&mut r)?;
    let config = config_line
        .strip_prefix("config ")
        .ok_or_else(|| CheckpointError::Header("missing config line".into()))?
        .to_string();

    let mut manifest: Vec<(String, usize, usize, usize)> = Vec::new();
    let total;
    loop {
        let line = read_line(&mut r)?;
        if let Some(rest) = line.strip_prefix("tensor ") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let bad = || CheckpointError::Header(format!("malformed tensor line {line:?}"));
            if fields.len() != 3 {
                return Err(bad());
            }
            let (rows, cols) = fields[1].split_once('x').ok_or_else(bad)?;
            let rows: usize = rows.parse().map_err(|_| bad())?;
            let cols: usize = cols.parse().map_err(|_| bad())?;
            let offset: usize = fields[2].parse().map_err(|_| bad())?;
            manifest.push((fields[0].to_string(), rows, cols, offset));
        } else if let Some(rest) = line.strip_prefix("payload ") {
            total = rest
                .parse::<usize>()
                .map_err(|_| CheckpointError::Header(format!("bad payload count {rest:?}")))?;
            break;
        } else {
            return Err(CheckpointError::Header(format!("unexpected line {line:?}")));
        }
    }

    let declared: usize = manifest.iter().map(|(_, r, c, _)| r * c).sum();
    if declared != total {
        return Err(CheckpointError::Header(format!(
            "manifest declares {declared} elements but payload says {total}"
        )));
    }
    let mut expected_offset = 0usize;
    for (name, rows, cols, offset) in &manifest {
        if *offset != expected_offset {
            return Err(CheckpointError::Header(format!(
                "tensor {name} at offset {offset}, expected {expected_offset}"
            )));
        }
        expected_offset += rows * cols;
    }

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() != total * 8 {
        return Err(CheckpointError::Truncated {
            expected: total,
            got: bytes.len() / 8,
        });
    }

    let mut store = ParamStore::new();
    for (name, rows, cols, offset) in manifest {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            let at = (offset + i) * 8;
            let raw: [u8; 8] = bytes[at..at + 8].try_into().unwrap();
            data.push(S::lit(f64::from_le_bytes(raw)));
        }
        store.insert(&name, Tensor::from_vec(rows, cols, data));
    }
    Ok((store, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use graft_core::Rng;

    fn sample_store() -> ParamStore<f64> {
        let mut rng = Rng::new(17);
        let mut store = ParamStore::new();
        store.add_matrix("encoder.w", 4, 6, &mut rng);
        store.add_zeros("encoder.b", 1, 6);
        store.add_embedding("emb", 9, 4, &mut rng);
        store
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&store, r#"{"dim":6}"#, &path).unwrap();
        let (loaded, config) = load_checkpoint::<f64>(&path).unwrap();
        assert_eq!(config, r#"{"dim":6}"#);
        assert_eq!(loaded.len(), store.len());
        for (name, tensor) in store.iter() {
            assert_eq!(loaded.get(name).unwrap(), tensor, "{name} differs");
        }
    }

    #[test]
    fn corrupted_header_is_rejected() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&store, "{}", &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path),
            Err(CheckpointError::Header(_))
        ));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&store, "{}", &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 16]).unwrap();
        assert!(matches!(
            load_checkpoint::<f64>(&path),
            Err(CheckpointError::Truncated { .. })
        ));
    }

    #[test]
    fn f32_build_reads_f64_checkpoint() {
        let store = sample_store();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&store, "{}", &path).unwrap();
        let (loaded, _) = load_checkpoint::<f32>(&path).unwrap();
        let w64 = store.get("encoder.w").unwrap();
        let w32 = loaded.get("encoder.w").unwrap();
        for (a, b) in w64.data().iter().zip(w32.data()) {
            assert!((*a as f32 - *b).abs() < f32::EPSILON);
        }
    }
}
