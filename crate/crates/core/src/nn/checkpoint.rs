//! Self-describing checkpoint container: a JSON header naming the tensors
//! plus a raw little-endian f64 payload. Byte layout is a pure function of
//! content, so save -> load -> save reproduces identical bytes.

use super::matrix::Matrix;
use super::params::ParamSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MINDCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// What the checkpoint holds ("bed", "lm", "vlp", "blm", ...).
    pub kind: String,
    /// Hash of the config that produced it.
    pub config_hash: String,
    /// Free-form training-state metadata (rng stream seeds, epochs, losses).
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorInfo>,
}

pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParamSet,
}

pub fn save(
    path: &Path,
    kind: &str,
    config_hash: &str,
    params: &ParamSet,
    meta: serde_json::Value,
) -> Result<()> {
    let mut ids: Vec<_> = params.ids().collect();
    ids.sort_by(|&a, &b| params.name(a).cmp(params.name(b)));
    let tensors: Vec<TensorInfo> = ids
        .iter()
        .map(|&id| TensorInfo {
            name: params.name(id).to_string(),
            rows: params.get(id).rows(),
            cols: params.get(id).cols(),
        })
        .collect();
    let header = CheckpointHeader {
        kind: kind.to_string(),
        config_hash: config_hash.to_string(),
        meta,
        tensors,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("checkpoint header encode: {e}")))?;

    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    for &id in &ids {
        for v in params.get(id).data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::io(path.display().to_string(), e))?;
    if buf.len() < 20 || &buf[..8] != MAGIC {
        return Err(Error::Format(format!("{}: not a checkpoint file", path.display())));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u64::from_le_bytes(buf[12..20].try_into().unwrap()) as usize;
    if buf.len() < 20 + hlen {
        return Err(Error::Format("truncated checkpoint header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&buf[20..20 + hlen])
        .map_err(|e| Error::Format(format!("checkpoint header decode: {e}")))?;
    let mut at = 20 + hlen;
    let mut params = ParamSet::new();
    for info in &header.tensors {
        let count = info.rows * info.cols;
        let need = count * 8;
        if buf.len() < at + need {
            return Err(Error::Format(format!(
                "truncated tensor payload for '{}'",
                info.name
            )));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let off = at + i * 8;
            data.push(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()));
        }
        params.add(info.name.clone(), Matrix::from_vec(info.rows, info.cols, data));
        at += need;
    }
    if at != buf.len() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok(Checkpoint { header, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let mut params = ParamSet::new();
        params.add_init("enc.w", 4, 6, 3);
        params.add_init("dec.w", 2, 2, 3);
        save(&p1, "test", "cfg123", &params, serde_json::json!({"epochs": 5})).unwrap();
        let loaded = load(&p1).unwrap();
        assert_eq!(loaded.header.kind, "test");
        assert_eq!(loaded.header.meta["epochs"], 5);
        save(&p2, &loaded.header.kind, &loaded.header.config_hash, &loaded.params, loaded.header.meta.clone()).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(loaded.params.digest(), params.digest());
    }

    #[test]
    fn corrupt_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        std::fs::write(&p, b"garbage").unwrap();
        assert!(load(&p).is_err());
    }
}
