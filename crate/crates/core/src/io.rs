//! NIfTI-1 volume I/O (.nii / .nii.gz) with JSON label-table sidecars.
//!
//! Spacing and origin live in the standard pixdim / qform header fields.
//! NIfTI-1 stores those as f32, so grid metadata round-trips bit-faithfully
//! at f32 precision; voxel values are stored as f64 (scalar) or i32 (labels)
//! and round-trip exactly. Orientation handling is deliberately minimal: the
//! loader canonicalizes so the slice axis is last and records axis codes,
//! nothing more.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, ReaderOptions};

use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::volume::{LabelVolume, ScalarVolume};

/// A loaded volume of either kind.
pub enum Volume {
    Scalar(ScalarVolume),
    Labels(LabelVolume),
}

fn header_for(grid: &Grid3) -> NiftiHeader {
    let mut hdr = NiftiHeader::default();
    hdr.dim = [
        3,
        grid.dims[0] as u16,
        grid.dims[1] as u16,
        grid.dims[2] as u16,
        1,
        1,
        1,
        1,
    ];
    hdr.pixdim = [
        1.0,
        grid.spacing[0] as f32,
        grid.spacing[1] as f32,
        grid.spacing[2] as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    hdr.qform_code = 1;
    hdr.sform_code = 0;
    hdr.quatern_b = 0.0;
    hdr.quatern_c = 0.0;
    hdr.quatern_d = 0.0;
    hdr.quatern_x = grid.origin[0] as f32;
    hdr.quatern_y = grid.origin[1] as f32;
    hdr.quatern_z = grid.origin[2] as f32;
    hdr.xyzt_units = 2; // mm
    hdr.dim_info = ((grid.slice_axis as u8 + 1) & 0x3) << 4;
    hdr
}

fn grid_from_header(hdr: &NiftiHeader) -> Result<Grid3> {
    if hdr.dim[0] < 3 {
        return Err(Error::InvalidGrid(format!(
            "expected a 3D volume, header rank is {}",
            hdr.dim[0]
        )));
    }
    if hdr.dim[0] > 3 && hdr.dim[4..].iter().any(|&d| d > 1) {
        return Err(Error::InvalidGrid("4D volumes are not supported".into()));
    }
    let dims = [hdr.dim[1] as usize, hdr.dim[2] as usize, hdr.dim[3] as usize];
    let spacing = [
        hdr.pixdim[1] as f64,
        hdr.pixdim[2] as f64,
        hdr.pixdim[3] as f64,
    ];
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidGrid(format!("non-positive spacing in header: {spacing:?}")));
    }
    let origin = if hdr.qform_code > 0 || hdr.sform_code == 0 {
        [hdr.quatern_x as f64, hdr.quatern_y as f64, hdr.quatern_z as f64]
    } else {
        [hdr.srow_x[3] as f64, hdr.srow_y[3] as f64, hdr.srow_z[3] as f64]
    };
    // slice axis from dim_info when set, else the coarsest axis
    let slice_dim = (hdr.dim_info >> 4) & 0x3;
    let slice_axis = if (1..=3).contains(&slice_dim) {
        slice_dim as usize - 1
    } else {
        let mut a = 2;
        for i in 0..3 {
            if spacing[i] > spacing[a] + 1e-9 {
                a = i;
            }
        }
        a
    };
    Grid3::new(dims, spacing, origin, ['R', 'A', 'S'], slice_axis)
}

/// Move the slice axis to the last position, permuting data accordingly.
fn canonicalize_scalar(grid: Grid3, values: Array3<f64>) -> (Grid3, Array3<f64>) {
    if grid.slice_axis == 2 {
        return (grid, values);
    }
    let a = grid.slice_axis;
    let perm: [usize; 3] = match a {
        0 => [1, 2, 0],
        1 => [0, 2, 1],
        _ => [0, 1, 2],
    };
    let dims = [grid.dims[perm[0]], grid.dims[perm[1]], grid.dims[perm[2]]];
    let spacing = [grid.spacing[perm[0]], grid.spacing[perm[1]], grid.spacing[perm[2]]];
    let origin = [grid.origin[perm[0]], grid.origin[perm[1]], grid.origin[perm[2]]];
    let codes = [grid.axis_codes[perm[0]], grid.axis_codes[perm[1]], grid.axis_codes[perm[2]]];
    let values = values.permuted_axes(perm).as_standard_layout().to_owned();
    (
        Grid3::new(dims, spacing, origin, codes, 2).expect("permutation preserves validity"),
        values,
    )
}

/// Save a scalar volume as NIfTI-1 (f64 data).
pub fn save_scalar(vol: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let hdr = header_for(&vol.grid);
    nifti::writer::WriterOptions::new(path.as_ref())
        .reference_header(&hdr)
        .write_nifti(&vol.values)?;
    Ok(())
}

/// Load a scalar volume, canonicalizing the axis order (slice axis last).
pub fn load_scalar(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let obj = ReaderOptions::new().read_file(path.as_ref())?;
    let grid = grid_from_header(obj.header())?;
    let values = obj.into_volume().into_ndarray::<f64>()?;
    let values = values
        .into_dimensionality::<ndarray::Ix3>()
        .map_err(|e| Error::InvalidGrid(format!("expected 3D data: {e}")))?;
    let (grid, values) = canonicalize_scalar(grid, values);
    ScalarVolume::new(grid, values)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    let base = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name);
    path.with_file_name(format!("{base}.labels.json"))
}

/// Save a label volume (i32 data) and its `{id: name}` JSON sidecar.
pub fn save_labels(vol: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let hdr = header_for(&vol.grid);
    let data = vol.labels.mapv(|l| l as i32);
    nifti::writer::WriterOptions::new(path)
        .reference_header(&hdr)
        .write_nifti(&data)?;
    let table: BTreeMap<String, String> =
        vol.label_table.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(&table)?)?;
    Ok(())
}

/// Load a label volume; reads the JSON sidecar when present and otherwise
/// synthesizes `label<N>` names for the ids found in the data.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let obj = ReaderOptions::new().read_file(path)?;
    let grid = grid_from_header(obj.header())?;
    let raw = obj.into_volume().into_ndarray::<f64>()?;
    let raw = raw
        .into_dimensionality::<ndarray::Ix3>()
        .map_err(|e| Error::InvalidGrid(format!("expected 3D data: {e}")))?;
    for &v in raw.iter() {
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::InvalidParam(format!(
                "label file contains non-label value {v}"
            )));
        }
    }
    let (grid, raw) = canonicalize_scalar(grid, raw);
    let labels = raw.mapv(|v| v as u32);
    let sc = sidecar_path(path);
    let table: BTreeMap<u32, String> = if sc.exists() {
        let text = std::fs::read_to_string(&sc)?;
        let raw_table: BTreeMap<String, String> = serde_json::from_str(&text)?;
        let mut t = BTreeMap::new();
        for (k, v) in raw_table {
            let id: u32 = k
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad label id {k:?} in {sc:?}")))?;
            t.insert(id, v);
        }
        t
    } else {
        let mut t = BTreeMap::new();
        for &l in labels.iter() {
            t.entry(l).or_insert_with(|| {
                if l == 0 {
                    "background".to_string()
                } else {
                    format!("label{l}")
                }
            });
        }
        t
    };
    let mut table = table;
    table.entry(0).or_insert_with(|| "background".to_string());
    LabelVolume::new(grid, labels, table)
}

/// Load either kind of volume, deciding by on-disk datatype: integer types
/// load as labels, floating types as scalars.
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let obj = ReaderOptions::new().read_file(path)?;
    let dt = obj.header().datatype;
    drop(obj);
    // NIfTI datatype codes: 2,4,8,256,512,768,1024,1280 are integers
    let is_int = matches!(dt, 2 | 4 | 8 | 256 | 512 | 768 | 1024 | 1280);
    if is_int {
        Ok(Volume::Labels(load_labels(path)?))
    } else {
        Ok(Volume::Scalar(load_scalar(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::par_fill3;

    #[test]
    fn scalar_roundtrip_preserves_grid_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.nii.gz");
        // grid values chosen representable in f32 so metadata round-trips exactly
        let grid = Grid3::canonical([5, 6, 7], [0.5, 0.25, 2.5], [-4.5, 3.0, 10.25]).unwrap();
        let vol = ScalarVolume::from_world_fn(grid.clone(), |w| {
            (w[0] * 1.7).sin() + w[1] * 0.3 - w[2]
        })
        .unwrap();
        save_scalar(&vol, &path).unwrap();
        let back = load_scalar(&path).unwrap();
        assert_eq!(back.grid, grid);
        assert_eq!(back.values, vol.values);
    }

    #[test]
    fn label_roundtrip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.nii.gz");
        let grid = Grid3::canonical([4, 4, 6], [1.0, 1.0, 2.0], [0.0, 0.0, 0.0]).unwrap();
        let table: BTreeMap<u32, String> = (0..9u32)
            .map(|i| (i, if i == 0 { "background".into() } else { format!("region{i}") }))
            .collect();
        let labels = par_fill3(grid.dims, |idx| ((idx[0] + idx[1] + idx[2]) % 9) as u32);
        let vol = LabelVolume::new(grid, labels, table).unwrap();
        save_labels(&vol, &path).unwrap();
        assert!(dir.path().join("seg.labels.json").exists());
        let back = load_labels(&path).unwrap();
        assert_eq!(back.labels, vol.labels);
        assert_eq!(back.label_table, vol.label_table);
        assert_eq!(back.grid, vol.grid);
    }

    #[test]
    fn load_volume_distinguishes_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let spath = dir.path().join("s.nii.gz");
        let lpath = dir.path().join("l.nii.gz");
        let grid = Grid3::canonical([3, 3, 3], [1.0; 3], [0.0; 3]).unwrap();
        save_scalar(&ScalarVolume::constant(grid.clone(), 1.5).unwrap(), &spath).unwrap();
        let labels = Array3::zeros((3, 3, 3));
        let table = [(0u32, "background".to_string())].into_iter().collect();
        save_labels(&LabelVolume::new(grid, labels, table).unwrap(), &lpath).unwrap();
        assert!(matches!(load_volume(&spath).unwrap(), Volume::Scalar(_)));
        assert!(matches!(load_volume(&lpath).unwrap(), Volume::Labels(_)));
    }

    #[test]
    fn rejects_nonpositive_spacing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nii");
        let mut hdr = NiftiHeader::default();
        hdr.dim = [3, 2, 2, 2, 1, 1, 1, 1];
        hdr.pixdim = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let arr = Array3::<f64>::zeros((2, 2, 2));
        nifti::writer::WriterOptions::new(&path)
            .reference_header(&hdr)
            .write_nifti(&arr)
            .unwrap();
        assert!(load_scalar(&path).is_err());
    }

    #[test]
    fn noncanonical_slice_axis_is_permuted_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ax0.nii.gz");
        // grid whose slice axis is axis 0
        let grid = Grid3::new([6, 8, 9], [2.5, 0.5, 0.5], [0.0; 3], ['R', 'A', 'S'], 0).unwrap();
        let vol = ScalarVolume::from_world_fn(grid, |w| w[0] * 100.0 + w[1] * 10.0 + w[2]).unwrap();
        save_scalar(&vol, &path).unwrap();
        let back = load_scalar(&path).unwrap();
        assert_eq!(back.grid.slice_axis, 2);
        assert_eq!(back.grid.dims, [8, 9, 6]);
        assert_eq!(back.grid.spacing, [0.5, 0.5, 2.5]);
        // world-consistent: the value at a given world position is unchanged
        assert_eq!(back.values[[3, 4, 2]], vol.values[[2, 3, 4]]);
    }
}
