//! Tensor-exchange files: one JSON header line, a newline, then the values
//! as raw little-endian `f32` in row-major `[height, width, channels]` order.
//!
//! ```text
//! {"shape":[128,128,1],"dtype":"f32","order":"row-major","name":"hm"}
//! <65536 x 4 bytes>
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use changeforge_core::codec::{FeatureMap, TargetMaps};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const DTYPE: &str = "f32";
pub const ORDER: &str = "row-major";
pub const EXTENSION: &str = "tensor";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: [usize; 3],
    pub dtype: String,
    pub order: String,
    pub name: String,
}

pub fn to_bytes(name: &str, map: &FeatureMap) -> Vec<u8> {
    let header = TensorHeader {
        shape: map.shape(),
        dtype: DTYPE.into(),
        order: ORDER.into(),
        name: name.into(),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(map.as_slice().len() * 4);
    for &v in map.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses a tensor; `path` only labels errors.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<(TensorHeader, FeatureMap)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let header: TensorHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|source| Error::Json { path: path.into(), source })?;
    if header.dtype != DTYPE {
        return Err(Error::format(path, format!("dtype `{}`, expected `{DTYPE}`", header.dtype)));
    }
    if header.order != ORDER {
        return Err(Error::format(path, format!("order `{}`, expected `{ORDER}`", header.order)));
    }
    let [h, w, c] = header.shape;
    let body = &bytes[newline + 1..];
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "shape overflows"))?;
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("{} payload bytes for shape {:?}, expected {expected}", body.len(), header.shape),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let map = FeatureMap::from_vec(w, h, c, data).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((header, map))
}

pub fn write_tensor(path: impl AsRef<Path>, name: &str, map: &FeatureMap) -> Result<()> {
    write_atomic(path.as_ref(), &to_bytes(name, map))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<(TensorHeader, FeatureMap)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// `<dir>/<pair_id>_<name>.tensor`
pub fn map_path(dir: &Path, pair_id: &str, name: &str) -> PathBuf {
    dir.join(format!("{pair_id}_{name}.{EXTENSION}"))
}

/// Writes the three maps of one pair.
pub fn write_maps(dir: &Path, pair_id: &str, maps: &TargetMaps) -> Result<()> {
    write_tensor(map_path(dir, pair_id, "hm"), "hm", &maps.hm)?;
    write_tensor(map_path(dir, pair_id, "wh"), "wh", &maps.wh)?;
    write_tensor(map_path(dir, pair_id, "offset"), "offset", &maps.offset)
}

/// Reads the three maps of one pair, checking channel counts.
pub fn read_maps(dir: &Path, pair_id: &str) -> Result<TargetMaps> {
    let read = |name: &str, channels: usize| -> Result<FeatureMap> {
        let path = map_path(dir, pair_id, name);
        let (_, map) = read_tensor(&path)?;
        if map.channels() != channels {
            return Err(Error::format(&path, format!("{} channels, expected {channels}", map.channels())));
        }
        Ok(map)
    };
    Ok(TargetMaps {
        hm: read("hm", 1)?,
        wh: read("wh", 2)?,
        offset: read("offset", 2)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload_layout() {
        let map = FeatureMap::from_vec(2, 1, 2, vec![1.0, -2.5, 0.25, 3.0]).unwrap();
        let bytes = to_bytes("wh", &map);
        let text = std::str::from_utf8(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()]).unwrap();
        assert_eq!(text, r#"{"shape":[1,2,2],"dtype":"f32","order":"row-major","name":"wh"}"#);
        let payload = &bytes[text.len() + 1..];
        assert_eq!(payload.len(), 16);
        assert_eq!(&payload[4..8], &(-2.5f32).to_le_bytes());
        let (h, back) = from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(h.name, "wh");
        assert_eq!(back, map);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let map = FeatureMap::zeros(2, 2, 1);
        let mut bytes = to_bytes("hm", &map);
        bytes.pop();
        assert!(from_bytes(&bytes, Path::new("x")).is_err());
        assert!(from_bytes(b"no header", Path::new("x")).is_err());
        let f64_header = br#"{"shape":[1,1,1],"dtype":"f64","order":"row-major","name":"hm"}
12345678"#;
        assert!(from_bytes(f64_header, Path::new("x")).is_err());
    }
}
