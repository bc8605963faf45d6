//! On-disk activation traces.
//!
//! A trace directory holds `manifest.json` and one `epoch_<E>.act` file per
//! snapshot epoch. Each snapshot file is the 8-byte magic `IPTRACE1` followed,
//! for every recorded layer, by three little-endian `u32`s (layer index, rows,
//! cols) and `rows * cols` little-endian `f64`s in row-major order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::network::NetworkConfig;
use crate::{Error, Matrix, Result};

pub const MAGIC: &[u8; 8] = b"IPTRACE1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Size in bytes of the per-layer header in a snapshot file.
pub const LAYER_HEADER_BYTES: u64 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceManifest {
    /// Units in each recorded layer (hidden layers, then the softmax output).
    pub layer_units: Vec<usize>,
    pub epochs: Vec<u64>,
    pub config: NetworkConfig,
    pub dataset_fingerprint: u64,
    /// Labels of the recorded rows as a string of `0`/`1`, in row order.
    pub labels: String,
}

impl TraceManifest {
    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn label_vec(&self) -> Result<Vec<u8>> {
        self.labels
            .bytes()
            .map(|b| match b {
                b'0' => Ok(0),
                b'1' => Ok(1),
                _ => Err(Error::InvalidArgument(format!(
                    "manifest label {:?} is not binary",
                    char::from(b)
                ))),
            })
            .collect()
    }

    pub fn encode_labels(labels: &[u8]) -> String {
        labels.iter().map(|&l| if l == 0 { '0' } else { '1' }).collect()
    }
}

/// Activations of every recorded layer at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub epoch: u64,
    pub layers: Vec<Matrix>,
}

/// Per-epoch, per-layer activations over a fixed set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    manifest: TraceManifest,
    snapshots: Vec<Snapshot>,
}

impl ActivationTrace {
    /// Checks that snapshots match the manifest one-to-one in epoch and shape.
    pub fn new(manifest: TraceManifest, snapshots: Vec<Snapshot>) -> Result<Self> {
        if manifest.epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "manifest epochs must be strictly increasing".into(),
            ));
        }
        if snapshots.len() != manifest.epochs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} snapshots for {} manifest epochs",
                snapshots.len(),
                manifest.epochs.len()
            )));
        }
        for (snap, &epoch) in snapshots.iter().zip(&manifest.epochs) {
            if snap.epoch != epoch {
                return Err(Error::InvalidArgument(format!(
                    "snapshot epoch {} where manifest lists {epoch}",
                    snap.epoch
                )));
            }
            check_shapes(&manifest, &snap.layers).map_err(Error::InvalidArgument)?;
        }
        Ok(ActivationTrace { manifest, snapshots })
    }

    pub fn manifest(&self) -> &TraceManifest {
        &self.manifest
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn epochs(&self) -> &[u64] {
        &self.manifest.epochs
    }

    pub fn n_layers(&self) -> usize {
        self.manifest.layer_units.len()
    }

    pub fn snapshot(&self, epoch: u64) -> Option<&Snapshot> {
        self.manifest
            .epochs
            .binary_search(&epoch)
            .ok()
            .map(|i| &self.snapshots[i])
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

fn check_shapes(manifest: &TraceManifest, layers: &[Matrix]) -> std::result::Result<(), String> {
    if layers.len() != manifest.layer_units.len() {
        return Err(format!(
            "{} layers where manifest lists {}",
            layers.len(),
            manifest.layer_units.len()
        ));
    }
    for (k, (m, &units)) in layers.iter().zip(&manifest.layer_units).enumerate() {
        if m.shape() != (manifest.samples(), units) {
            return Err(format!(
                "layer {k} has shape {:?}, manifest expects ({}, {units})",
                m.shape(),
                manifest.samples()
            ));
        }
    }
    Ok(())
}

pub fn snapshot_file_name(epoch: u64) -> String {
    format!("epoch_{epoch}.act")
}

/// Encoded size of a snapshot with the given layer shapes.
pub fn snapshot_file_size(shapes: &[(usize, usize)]) -> u64 {
    MAGIC.len() as u64
        + shapes
            .iter()
            .map(|&(r, c)| LAYER_HEADER_BYTES + 8 * (r * c) as u64)
            .sum::<u64>()
}

pub fn encode_snapshot(layers: &[Matrix]) -> Vec<u8> {
    let shapes: Vec<_> = layers.iter().map(Matrix::shape).collect();
    let mut buf = Vec::with_capacity(snapshot_file_size(&shapes) as usize);
    buf.extend_from_slice(MAGIC);
    for (k, m) in layers.iter().enumerate() {
        buf.extend_from_slice(&(k as u32).to_le_bytes());
        buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for v in m.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Decodes a snapshot file body; `path` is only used in error messages.
pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<Vec<Matrix>> {
    let format_err = |offset: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    if bytes.len() < MAGIC.len() {
        return Err(format_err(0, "file shorter than magic".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err(0, "bad magic".into()));
    }
    let mut pos = MAGIC.len();
    let mut layers = Vec::new();
    let read_u32 = |pos: usize| -> Result<u32> {
        bytes
            .get(pos..pos + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| format_err(pos, "truncated layer header".into()))
    };
    while pos < bytes.len() {
        let index = read_u32(pos)? as usize;
        if index != layers.len() {
            return Err(format_err(
                pos,
                format!("layer index {index}, expected {}", layers.len()),
            ));
        }
        let rows = read_u32(pos + 4)? as usize;
        let cols = read_u32(pos + 8)? as usize;
        pos += LAYER_HEADER_BYTES as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| format_err(pos, "layer size overflows".into()))?;
        let body = bytes
            .get(pos..pos + len)
            .ok_or_else(|| format_err(pos, format!("truncated data for layer {index}")))?;
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        layers.push(Matrix::from_vec(rows, cols, data)?);
        pos += len;
    }
    Ok(layers)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `trace` into `dir`, which must be absent or empty.
///
/// Snapshots are written before the manifest so a directory with a readable
/// manifest is always complete.
pub fn write_trace(trace: &ActivationTrace, dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::DirectoryNotEmpty(dir.to_path_buf()));
        }
    } else {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for snap in &trace.snapshots {
        let path = dir.join(snapshot_file_name(snap.epoch));
        write_atomic(&path, &encode_snapshot(&snap.layers))?;
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&trace.manifest).map_err(|e| Error::json(&manifest_path, e))?;
    write_atomic(&manifest_path, &json)
}

pub fn read_manifest(dir: &Path) -> Result<TraceManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::json(&path, e))
}

pub fn read_trace(dir: &Path) -> Result<ActivationTrace> {
    let manifest = read_manifest(dir)?;
    if manifest.epochs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Incomplete {
            dir: dir.to_path_buf(),
            message: "manifest epochs are not strictly increasing".into(),
        });
    }
    let mut snapshots = Vec::with_capacity(manifest.epochs.len());
    for &epoch in &manifest.epochs {
        let path: PathBuf = dir.join(snapshot_file_name(epoch));
        if !path.exists() {
            return Err(Error::Incomplete {
                dir: dir.to_path_buf(),
                message: format!("missing snapshot for epoch {epoch}"),
            });
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let layers = decode_snapshot(&bytes, &path)?;
        check_shapes(&manifest, &layers).map_err(|message| Error::Format {
            path: path.clone(),
            offset: MAGIC.len() as u64,
            message,
        })?;
        snapshots.push(Snapshot { epoch, layers });
    }
    Ok(ActivationTrace { manifest, snapshots })
}
