//! Scalar, label, and one-hot volumes plus the resampling and encoding
//! operations every pipeline stage builds on.
//!
//! Volumes are immutable after construction and all operations here are pure
//! functions, safe to call from multiple threads.

use std::collections::BTreeMap;

use ndarray::{Array3, Array4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid3;

/// Background label id.
pub const BACKGROUND: u32 = 0;

/// Label table used by the MTL subregion protocol (plus background).
pub fn mtl_label_table() -> BTreeMap<u32, String> {
    [
        (0, "background"),
        (1, "CA1-3"),
        (2, "DG"),
        (3, "SUB"),
        (4, "ERC"),
        (5, "BA35"),
        (6, "BA36"),
        (7, "PHC"),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect()
}

/// A scalar field sampled on a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub grid: Grid3,
    pub values: Array3<f64>,
}

/// A labeled segmentation sampled on a [`Grid3`], with an id -> name table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    pub grid: Grid3,
    pub labels: Array3<u32>,
    pub label_table: BTreeMap<u32, String>,
}

/// Per-label soft channels in [0, 1] on a [`Grid3`]; background has no channel.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotVolume {
    pub grid: Grid3,
    /// Ordered label ids, one per channel.
    pub channel_ids: Vec<u32>,
    /// Shape (channels, x, y, z).
    pub values: Array4<f64>,
}

impl ScalarVolume {
    pub fn new(grid: Grid3, values: Array3<f64>) -> Result<Self> {
        if values.shape() != grid.dims {
            return Err(Error::ShapeMismatch(format!(
                "value array shape {:?} != grid dims {:?}",
                values.shape(),
                grid.dims
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("scalar volume contains non-finite values".into()));
        }
        Ok(ScalarVolume { grid, values })
    }

    pub fn constant(grid: Grid3, value: f64) -> Result<Self> {
        let dims = grid.dims;
        ScalarVolume::new(grid, Array3::from_elem(dims, value))
    }

    /// Evaluate `f` at every voxel center (world mm), in parallel.
    pub fn from_world_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64 + Sync) -> Result<Self> {
        let values = par_fill3(grid.dims, |idx| f(grid.voxel_center(idx)));
        ScalarVolume::new(grid, values)
    }
}

impl LabelVolume {
    pub fn new(grid: Grid3, labels: Array3<u32>, label_table: BTreeMap<u32, String>) -> Result<Self> {
        if labels.shape() != grid.dims {
            return Err(Error::ShapeMismatch(format!(
                "label array shape {:?} != grid dims {:?}",
                labels.shape(),
                grid.dims
            )));
        }
        for &l in labels.iter() {
            if !label_table.contains_key(&l) {
                return Err(Error::UnknownLabel(l));
            }
        }
        Ok(LabelVolume { grid, labels, label_table })
    }

    pub fn from_world_fn(
        grid: Grid3,
        label_table: BTreeMap<u32, String>,
        f: impl Fn([f64; 3]) -> u32 + Sync,
    ) -> Result<Self> {
        let labels = par_fill3(grid.dims, |idx| f(grid.voxel_center(idx)));
        LabelVolume::new(grid, labels, label_table)
    }

    /// Ids present in the table except background, in ascending order.
    pub fn foreground_ids(&self) -> Vec<u32> {
        self.label_table.keys().copied().filter(|&id| id != BACKGROUND).collect()
    }

    /// Number of non-background voxels.
    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != BACKGROUND).count()
    }

    /// Look up the id of a label name.
    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.label_table.iter().find(|(_, n)| n.as_str() == name).map(|(&id, _)| id)
    }

    /// Nearest-neighbor resampling onto a target grid. Labels are never
    /// interpolated; out-of-support voxels become background.
    pub fn resample_nearest(&self, target: &Grid3) -> Result<LabelVolume> {
        if !self.grid.overlaps(target) {
            return Err(Error::EmptyOverlap);
        }
        let src = &self.labels;
        let labels = par_fill3(target.dims, |idx| {
            let w = target.voxel_center(idx);
            match self.grid.voxel_containing(w) {
                Some(i) => src[[i[0], i[1], i[2]]],
                None => BACKGROUND,
            }
        });
        LabelVolume::new(target.clone(), labels, self.label_table.clone())
    }
}

impl OneHotVolume {
    pub fn new(grid: Grid3, channel_ids: Vec<u32>, values: Array4<f64>) -> Result<Self> {
        let expect = [channel_ids.len(), grid.dims[0], grid.dims[1], grid.dims[2]];
        if values.shape() != expect {
            return Err(Error::ShapeMismatch(format!(
                "one-hot shape {:?} != expected {:?}",
                values.shape(),
                expect
            )));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParam("one-hot values must lie in [0, 1]".into()));
        }
        Ok(OneHotVolume { grid, channel_ids, values })
    }

    pub fn num_channels(&self) -> usize {
        self.channel_ids.len()
    }
}

/// Fill a 3D array by evaluating `f` per voxel index, parallel over the
/// leading axis. Each slab is written by exactly one task, so the result is
/// bit-identical regardless of thread count.
pub(crate) fn par_fill3<T: Copy + Default + Send + Sync>(
    dims: [usize; 3],
    f: impl Fn([usize; 3]) -> T + Sync,
) -> Array3<T> {
    let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
    let mut data = vec![T::default(); nx * ny * nz];
    data.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| {
        for j in 0..ny {
            for k in 0..nz {
                slab[j * nz + k] = f([i, j, k]);
            }
        }
    });
    Array3::from_shape_vec((nx, ny, nz), data).expect("shape is consistent by construction")
}

/// Trilinear resampling of a scalar volume onto a target grid. Samples
/// outside the source support take the nearest-edge value, which avoids
/// zero-halo artifacts at crop borders.
pub fn resample_linear(vol: &ScalarVolume, target: &Grid3) -> Result<ScalarVolume> {
    if !vol.grid.overlaps(target) {
        return Err(Error::EmptyOverlap);
    }
    let src = &vol.values;
    let sdims = vol.grid.dims;
    let values = par_fill3(target.dims, |idx| {
        let w = target.voxel_center(idx);
        let t = vol.grid.world_to_index(w);
        let mut i0 = [0usize; 3];
        let mut fr = [0f64; 3];
        for a in 0..3 {
            let tc = t[a].clamp(0.0, (sdims[a] - 1) as f64);
            let f = tc.floor().min((sdims[a] - 1) as f64);
            i0[a] = f as usize;
            fr[a] = tc - f;
        }
        let i1 = [
            (i0[0] + 1).min(sdims[0] - 1),
            (i0[1] + 1).min(sdims[1] - 1),
            (i0[2] + 1).min(sdims[2] - 1),
        ];
        let c000 = src[[i0[0], i0[1], i0[2]]];
        let c100 = src[[i1[0], i0[1], i0[2]]];
        let c010 = src[[i0[0], i1[1], i0[2]]];
        let c110 = src[[i1[0], i1[1], i0[2]]];
        let c001 = src[[i0[0], i0[1], i1[2]]];
        let c101 = src[[i1[0], i0[1], i1[2]]];
        let c011 = src[[i0[0], i1[1], i1[2]]];
        let c111 = src[[i1[0], i1[1], i1[2]]];
        let (fx, fy, fz) = (fr[0], fr[1], fr[2]);
        let c00 = c000 * (1.0 - fx) + c100 * fx;
        let c10 = c010 * (1.0 - fx) + c110 * fx;
        let c01 = c001 * (1.0 - fx) + c101 * fx;
        let c11 = c011 * (1.0 - fx) + c111 * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        c0 * (1.0 - fz) + c1 * fz
    });
    ScalarVolume::new(target.clone(), values)
}

fn block_average_axis3(values: &Array3<f64>, axis: usize, factor: usize) -> Array3<f64> {
    let dims = [values.shape()[0], values.shape()[1], values.shape()[2]];
    let mut out_dims = dims;
    out_dims[axis] = dims[axis] / factor;
    let inv = 1.0 / factor as f64;
    par_fill3(out_dims, |idx| {
        let mut acc = 0.0;
        let mut src_idx = idx;
        for s in 0..factor {
            src_idx[axis] = idx[axis] * factor + s;
            acc += values[[src_idx[0], src_idx[1], src_idx[2]]];
        }
        acc * inv
    })
}

/// Average pooling along the slice axis: each output slice is the arithmetic
/// mean of `factor` consecutive input slices; in-plane sampling is untouched.
pub fn block_average_downsample_slice(vol: &ScalarVolume, factor: usize) -> Result<ScalarVolume> {
    let axis = vol.grid.slice_axis;
    if factor < 1 || vol.grid.dims[axis] % factor != 0 {
        return Err(Error::NonDivisible { dim: vol.grid.dims[axis], factor });
    }
    let grid = vol.grid.block_merged_axis(axis, factor)?;
    let values = block_average_axis3(&vol.values, axis, factor);
    ScalarVolume::new(grid, values)
}

/// Average pooling of a one-hot volume along the slice axis (see
/// [`block_average_downsample_slice`]).
pub fn block_average_downsample_slice_onehot(
    oh: &OneHotVolume,
    factor: usize,
) -> Result<OneHotVolume> {
    let axis = oh.grid.slice_axis;
    if factor < 1 || oh.grid.dims[axis] % factor != 0 {
        return Err(Error::NonDivisible { dim: oh.grid.dims[axis], factor });
    }
    let grid = oh.grid.block_merged_axis(axis, factor)?;
    let mut out = Array4::zeros([
        oh.num_channels(),
        grid.dims[0],
        grid.dims[1],
        grid.dims[2],
    ]);
    for (c, mut ch_out) in out.outer_iter_mut().enumerate() {
        let ch_in = oh.values.index_axis(ndarray::Axis(0), c).to_owned();
        ch_out.assign(&block_average_axis3(&ch_in, axis, factor));
    }
    OneHotVolume::new(grid, oh.channel_ids.clone(), out)
}

/// Encode a label volume as per-label binary channels. Background gets no
/// channel; every requested id must exist in the label table.
pub fn one_hot_encode(labels: &LabelVolume, channel_ids: &[u32]) -> Result<OneHotVolume> {
    for &id in channel_ids {
        if id == BACKGROUND {
            return Err(Error::InvalidParam("background cannot be a one-hot channel".into()));
        }
        if !labels.label_table.contains_key(&id) {
            return Err(Error::UnknownLabel(id));
        }
    }
    let dims = labels.grid.dims;
    let mut values = Array4::zeros([channel_ids.len(), dims[0], dims[1], dims[2]]);
    for (c, &id) in channel_ids.iter().enumerate() {
        let mut ch = values.index_axis_mut(ndarray::Axis(0), c);
        ndarray::Zip::from(&mut ch).and(&labels.labels).for_each(|o, &l| {
            *o = if l == id { 1.0 } else { 0.0 };
        });
    }
    OneHotVolume::new(labels.grid.clone(), channel_ids.to_vec(), values)
}

/// Decode soft channels to labels: a voxel takes the channel with the largest
/// value when that value reaches `bg_threshold`, otherwise background. Ties
/// break toward the lowest channel index.
pub fn argmax_decode(
    oh: &OneHotVolume,
    bg_threshold: f64,
    label_table: &BTreeMap<u32, String>,
) -> Result<LabelVolume> {
    for &id in &oh.channel_ids {
        if !label_table.contains_key(&id) {
            return Err(Error::UnknownLabel(id));
        }
    }
    let nch = oh.num_channels();
    let values = &oh.values;
    let labels = par_fill3(oh.grid.dims, |idx| {
        let mut best = f64::NEG_INFINITY;
        let mut best_c = usize::MAX;
        for c in 0..nch {
            let v = values[[c, idx[0], idx[1], idx[2]]];
            if v > best {
                best = v;
                best_c = c;
            }
        }
        if best_c != usize::MAX && best >= bg_threshold {
            oh.channel_ids[best_c]
        } else {
            BACKGROUND
        }
    });
    let mut table = label_table.clone();
    table.entry(BACKGROUND).or_insert_with(|| "background".to_string());
    LabelVolume::new(oh.grid.clone(), labels, table)
}

/// Default background threshold for [`argmax_decode`].
pub const DEFAULT_BG_THRESHOLD: f64 = 0.5;
