//! On-disk formats: sequence directories and SDF grid cache files.
//!
//! A sequence directory holds `meta.json` plus `frame_0000.raw`,
//! `frame_0001.raw`, … — little-endian u8 voxels in x-fastest order, one
//! byte per voxel, values 0 or 1.
//!
//! Grid cache files start with the 16-byte magic `NSDF0001` (padded with
//! zeros), a header of grid dims (u32 × 3), time coordinate (f64), scale
//! (f64), normalized origin and step (f64 × 6), then f32 values x-fastest.
//! All integers and floats are little-endian.

use super::{IngestError, SdfGrid, Volume, VoxelSequence};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const GRID_MAGIC: &[u8; 8] = b"NSDF0001";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub dims: [usize; 3],
    pub spacing_um: [f64; 3],
    pub n_time: usize,
    pub name: String,
}

/// Loads and validates a sequence directory.
pub fn load_voxel_sequence(path: &Path) -> Result<VoxelSequence, IngestError> {
    let meta_path = path.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|source| IngestError::Io {
        path: meta_path.display().to_string(),
        source,
    })?;
    let meta: SequenceMeta =
        serde_json::from_str(&meta_text).map_err(|e| IngestError::Meta(e.to_string()))?;
    if meta.n_time == 0 {
        return Err(IngestError::Schema("n_time must be at least 1".into()));
    }
    let dims = (meta.dims[0], meta.dims[1], meta.dims[2]);
    let expected = dims.0 * dims.1 * dims.2;
    let mut volumes = Vec::with_capacity(meta.n_time);
    for frame in 0..meta.n_time {
        let fpath = path.join(format!("frame_{frame:04}.raw"));
        let data = fs::read(&fpath).map_err(|source| IngestError::Frame {
            frame,
            path: fpath.display().to_string(),
            source,
        })?;
        if data.len() != expected {
            return Err(IngestError::CorruptFrame {
                frame,
                detail: format!("expected {expected} bytes, found {}", data.len()),
            });
        }
        if let Some(bad) = data.iter().find(|&&b| b > 1) {
            return Err(IngestError::CorruptFrame {
                frame,
                detail: format!("voxel value {bad} outside {{0,1}}"),
            });
        }
        volumes.push(Volume { dims, data });
    }
    let seq = VoxelSequence {
        volumes,
        spacing: (meta.spacing_um[0], meta.spacing_um[1], meta.spacing_um[2]),
        dims,
        name: meta.name,
    };
    seq.validate()?;
    Ok(seq)
}

/// Writes a sequence directory in the `meta.json` + raw-frames layout.
pub fn write_voxel_sequence(path: &Path, seq: &VoxelSequence) -> std::io::Result<()> {
    fs::create_dir_all(path)?;
    let meta = SequenceMeta {
        dims: [seq.dims.0, seq.dims.1, seq.dims.2],
        spacing_um: [seq.spacing.0, seq.spacing.1, seq.spacing.2],
        n_time: seq.n_time(),
        name: seq.name.clone(),
    };
    fs::write(
        path.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    for (k, vol) in seq.volumes.iter().enumerate() {
        fs::write(path.join(format!("frame_{k:04}.raw")), &vol.data)?;
    }
    Ok(())
}

pub fn write_sdf_grid(path: &Path, grid: &SdfGrid) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    let mut header = Vec::with_capacity(16 + 12 + 8 * 8);
    header.extend_from_slice(GRID_MAGIC);
    header.extend_from_slice(&[0u8; 8]);
    for d in [grid.grid.0, grid.grid.1, grid.grid.2] {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    header.extend_from_slice(&grid.time_coord.to_le_bytes());
    header.extend_from_slice(&grid.scale.to_le_bytes());
    for v in [
        grid.origin.0,
        grid.origin.1,
        grid.origin.2,
        grid.step.0,
        grid.step.1,
        grid.step.2,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&header)?;
    let mut buf = Vec::with_capacity(grid.values.len() * 4);
    for &v in &grid.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    f.write_all(&buf)
}

pub fn read_sdf_grid(path: &Path) -> Result<SdfGrid, IngestError> {
    let mut f = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut raw = Vec::new();
    f.read_to_end(&mut raw).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fail = |detail: &str| IngestError::Schema(format!("{}: {detail}", path.display()));
    if raw.len() < 16 + 12 + 64 {
        return Err(fail("truncated header"));
    }
    if &raw[..8] != GRID_MAGIC {
        return Err(fail("bad magic"));
    }
    let mut off = 16;
    let mut u32_at = |raw: &[u8]| {
        let v = u32::from_le_bytes(raw[off..off + 4].try_into().unwrap());
        off += 4;
        v as usize
    };
    let gx = u32_at(&raw);
    let gy = u32_at(&raw);
    let gz = u32_at(&raw);
    let mut f64_at = |raw: &[u8]| {
        let v = f64::from_le_bytes(raw[off..off + 8].try_into().unwrap());
        off += 8;
        v
    };
    let time_coord = f64_at(&raw);
    let scale = f64_at(&raw);
    let origin = (f64_at(&raw), f64_at(&raw), f64_at(&raw));
    let step = (f64_at(&raw), f64_at(&raw), f64_at(&raw));
    let count = gx * gy * gz;
    if raw.len() != off + count * 4 {
        return Err(fail(&format!(
            "payload holds {} bytes, expected {}",
            raw.len() - off,
            count * 4
        )));
    }
    let mut values = Vec::with_capacity(count);
    for chunk in raw[off..].chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    Ok(SdfGrid {
        values,
        grid: (gx, gy, gz),
        time_coord,
        scale,
        origin,
        step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdfdata::ContentError;

    fn tmpdir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("nsdf-fmt-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn tiny_sequence(n_time: usize) -> VoxelSequence {
        let dims = (6, 5, 4);
        let mut volumes = Vec::new();
        for k in 0..n_time {
            let mut vol = Volume::zeros(dims);
            vol.set(1 + k % 3, 2, 2, 1);
            vol.set(2, 2, 2, 1);
            volumes.push(vol);
        }
        VoxelSequence {
            volumes,
            spacing: (0.5, 0.5, 1.0),
            dims,
            name: "tiny".into(),
        }
    }

    #[test]
    fn sequence_round_trip() {
        let dir = tmpdir("seq");
        let seq = tiny_sequence(3);
        write_voxel_sequence(&dir, &seq).unwrap();
        let loaded = load_voxel_sequence(&dir).unwrap();
        assert_eq!(loaded.n_time(), 3);
        assert_eq!(loaded.dims, seq.dims);
        for (a, b) in loaded.volumes.iter().zip(&seq.volumes) {
            assert_eq!(a.data, b.data);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn single_voxel_single_frame_is_valid() {
        let dir = tmpdir("single");
        let dims = (8, 8, 8);
        let mut vol = Volume::zeros(dims);
        vol.set(4, 4, 4, 1);
        let seq = VoxelSequence {
            volumes: vec![vol],
            spacing: (1.0, 1.0, 1.0),
            dims,
            name: "one".into(),
        };
        write_voxel_sequence(&dir, &seq).unwrap();
        assert_eq!(load_voxel_sequence(&dir).unwrap().n_time(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_frame_named_in_error() {
        let dir = tmpdir("empty");
        let mut seq = tiny_sequence(9);
        seq.volumes[7] = Volume::zeros(seq.dims);
        write_voxel_sequence(&dir, &seq).unwrap();
        let err = load_voxel_sequence(&dir).unwrap_err();
        match err {
            IngestError::Content(ContentError::EmptyFrame(7)) => {}
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("empty frame 7"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_frame_named_in_error() {
        let dir = tmpdir("missing");
        let seq = tiny_sequence(4);
        write_voxel_sequence(&dir, &seq).unwrap();
        fs::remove_file(dir.join("frame_0002.raw")).unwrap();
        match load_voxel_sequence(&dir).unwrap_err() {
            IngestError::Frame { frame: 2, .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn wrong_size_frame_rejected() {
        let dir = tmpdir("badsize");
        let seq = tiny_sequence(2);
        write_voxel_sequence(&dir, &seq).unwrap();
        fs::write(dir.join("frame_0001.raw"), vec![0u8; 10]).unwrap();
        match load_voxel_sequence(&dir).unwrap_err() {
            IngestError::CorruptFrame { frame: 1, .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn grid_file_round_trip_and_truncation() {
        let dir = tmpdir("grid");
        let grid = SdfGrid {
            values: (0..24).map(|i| i as f64 * 0.25 - 2.0).collect(),
            grid: (4, 3, 2),
            time_coord: -0.5,
            scale: 16.0,
            origin: (-0.9, -0.8, -0.7),
            step: (0.1, 0.2, 0.3),
        };
        let path = dir.join("t.nsdf");
        write_sdf_grid(&path, &grid).unwrap();
        let loaded = read_sdf_grid(&path).unwrap();
        assert_eq!(loaded.grid, grid.grid);
        assert_eq!(loaded.time_coord, grid.time_coord);
        assert_eq!(loaded.scale, grid.scale);
        // f32 storage: values match to f32 precision exactly.
        for (a, b) in loaded.values.iter().zip(&grid.values) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let raw = fs::read(&path).unwrap();
        fs::write(&path, &raw[..raw.len() - 5]).unwrap();
        assert!(read_sdf_grid(&path).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
