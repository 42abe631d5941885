//! Sampling grids in world (mm) coordinates.
//!
//! A [`Grid3`] is an axis-aligned voxel lattice: voxel `(i, j, k)` has its
//! center at `origin + (i, j, k) * spacing`. Each voxel owns the cell of one
//! spacing around its center, so the grid covers the slab
//! `[origin - spacing/2, origin + (dims - 1/2) * spacing]` along each axis.
//! All pipeline stages run in a canonical axis order (in-plane x, y; slice
//! last), established at load time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned 3D sampling grid with physical spacing in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    /// Voxel counts per axis.
    pub dims: [usize; 3],
    /// Voxel spacing per axis in mm (through-plane axis holds the slice thickness).
    pub spacing: [f64; 3],
    /// World position of the center of voxel (0, 0, 0), in mm.
    pub origin: [f64; 3],
    /// Orientation labels per axis, e.g. `['R', 'A', 'S']`.
    pub axis_codes: [char; 3],
    /// Index of the through-plane (slice) axis; canonically 2.
    pub slice_axis: usize,
}

/// How [`hyperres_grid`] picks the target slice spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperResMode {
    /// Training-space definition: slice spacing becomes one fifth of the source's.
    TrainDivide5,
    /// Inference-space definition: slice spacing is pinned to the given value (mm).
    InferFixed(f64),
}

impl Grid3 {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        axis_codes: [char; 3],
        slice_axis: usize,
    ) -> Result<Self> {
        if dims.iter().any(|&d| d < 1) {
            return Err(Error::InvalidGrid(format!("all dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "all spacing must be positive and finite, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin must be finite, got {origin:?}")));
        }
        if slice_axis > 2 {
            return Err(Error::InvalidGrid(format!("slice_axis must be 0..3, got {slice_axis}")));
        }
        Ok(Grid3 { dims, spacing, origin, axis_codes, slice_axis })
    }

    /// Canonical grid (slice axis = z, RAS codes) — the common case after load.
    pub fn canonical(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Grid3::new(dims, spacing, origin, ['R', 'A', 'S'], 2)
    }

    pub fn num_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// World position of a voxel center.
    pub fn voxel_center(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + idx[0] as f64 * self.spacing[0],
            self.origin[1] + idx[1] as f64 * self.spacing[1],
            self.origin[2] + idx[2] as f64 * self.spacing[2],
        ]
    }

    /// Continuous voxel index of a world point (0 at the first voxel center).
    pub fn world_to_index(&self, w: [f64; 3]) -> [f64; 3] {
        [
            (w[0] - self.origin[0]) / self.spacing[0],
            (w[1] - self.origin[1]) / self.spacing[1],
            (w[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Voxel containing the world point, or None outside the covered slab.
    pub fn voxel_containing(&self, w: [f64; 3]) -> Option<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let t = (w[a] - self.origin[a]) / self.spacing[a];
            let i = t.round();
            if (t - i).abs() > 0.5 + 1e-12 {
                return None;
            }
            if i < -0.5 || i > self.dims[a] as f64 - 0.5 {
                return None;
            }
            idx[a] = i.max(0.0).min(self.dims[a] as f64 - 1.0) as usize;
        }
        Some(idx)
    }

    /// Slab interval `[low, high]` covered by this grid along one axis.
    pub fn slab(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis] - self.spacing[axis] / 2.0;
        (lo, lo + self.dims[axis] as f64 * self.spacing[axis])
    }

    /// Physical extent covered along one axis, in mm.
    pub fn extent(&self, axis: usize) -> f64 {
        self.dims[axis] as f64 * self.spacing[axis]
    }

    /// True when the covered slabs of the two grids intersect on every axis.
    pub fn overlaps(&self, other: &Grid3) -> bool {
        (0..3).all(|a| {
            let (lo1, hi1) = self.slab(a);
            let (lo2, hi2) = other.slab(a);
            lo1 < hi2 && lo2 < hi1
        })
    }

    /// Grid refined along `axis` by an integer factor, ceil-covering the
    /// source extent with a symmetric origin shift.
    pub fn refined_axis(&self, axis: usize, factor: usize) -> Result<Grid3> {
        if factor < 1 {
            return Err(Error::InvalidParam("refinement factor must be >= 1".into()));
        }
        let s_new = self.spacing[axis] / factor as f64;
        self.with_axis_spacing(axis, s_new)
    }

    /// Grid with the spacing along `axis` replaced by `s_new`, dims chosen so
    /// the source extent is covered (ceil) and the leftover split evenly on
    /// both ends so voxel centers sit symmetrically within the old slab.
    pub fn with_axis_spacing(&self, axis: usize, s_new: f64) -> Result<Grid3> {
        if !(s_new > 0.0) {
            return Err(Error::InvalidParam(format!("target spacing must be > 0, got {s_new}")));
        }
        let extent = self.extent(axis);
        let n_new = (extent / s_new - 1e-9).ceil().max(1.0) as usize;
        let leftover = n_new as f64 * s_new - extent;
        let mut dims = self.dims;
        let mut spacing = self.spacing;
        let mut origin = self.origin;
        dims[axis] = n_new;
        spacing[axis] = s_new;
        // new slab low edge = old low edge - leftover/2; origin is half a new
        // voxel above the low edge
        origin[axis] = self.origin[axis] - self.spacing[axis] / 2.0 - leftover / 2.0 + s_new / 2.0;
        Grid3::new(dims, spacing, origin, self.axis_codes, self.slice_axis)
    }

    /// Grid coarsened along `axis` by merging `factor` consecutive voxels.
    /// The axis dimension must be divisible by the factor.
    pub fn block_merged_axis(&self, axis: usize, factor: usize) -> Result<Grid3> {
        if factor < 1 || self.dims[axis] % factor != 0 {
            return Err(Error::NonDivisible { dim: self.dims[axis], factor });
        }
        let mut dims = self.dims;
        let mut spacing = self.spacing;
        let mut origin = self.origin;
        dims[axis] = self.dims[axis] / factor;
        spacing[axis] = self.spacing[axis] * factor as f64;
        origin[axis] = self.origin[axis] + (factor - 1) as f64 / 2.0 * self.spacing[axis];
        Grid3::new(dims, spacing, origin, self.axis_codes, self.slice_axis)
    }
}

/// Target grid of the nearly isotropic hyper-resolution space: in-plane
/// spacing preserved, slice spacing divided by five (training) or pinned to a
/// fixed value (inference). The new slice dimension ceil-covers the source
/// slab extent and the origin is shifted so the leftover is split evenly.
pub fn hyperres_grid(source: &Grid3, mode: HyperResMode) -> Result<Grid3> {
    let axis = source.slice_axis;
    let s_new = match mode {
        HyperResMode::TrainDivide5 => source.spacing[axis] / 5.0,
        HyperResMode::InferFixed(mm) => {
            if !(mm > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "fixed slice spacing must be > 0, got {mm}"
                )));
            }
            mm
        }
    };
    source.with_axis_spacing(axis, s_new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: [usize; 3], spacing: [f64; 3]) -> Grid3 {
        Grid3::canonical(dims, spacing, [0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid3::canonical([0, 4, 4], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid3::canonical([4, 4, 4], [1.0, -1.0, 1.0], [0.0; 3]).is_err());
        assert!(Grid3::canonical([4, 4, 4], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn hyperres_train_divide5_paper_spacing() {
        let g = grid([96, 96, 20], [0.4, 0.4, 2.6]);
        let h = hyperres_grid(&g, HyperResMode::TrainDivide5).unwrap();
        assert_eq!(h.spacing[0], 0.4);
        assert_eq!(h.spacing[1], 0.4);
        assert!((h.spacing[2] - 0.52).abs() < 1e-12);
        assert_eq!(h.dims[2], 100);
        assert_eq!(h.dims[0], 96);
    }

    #[test]
    fn hyperres_infer_fixed_identity() {
        let g = grid([32, 32, 50], [0.4, 0.4, 0.52]);
        let h = hyperres_grid(&g, HyperResMode::InferFixed(0.52)).unwrap();
        assert_eq!(h.dims, g.dims);
        assert!((h.spacing[2] - 0.52).abs() < 1e-12);
        assert!((h.origin[2] - g.origin[2]).abs() < 1e-9);
    }

    #[test]
    fn hyperres_divide5_slice_count() {
        let g = grid([16, 16, 10], [0.5, 0.5, 3.0]);
        let h = hyperres_grid(&g, HyperResMode::TrainDivide5).unwrap();
        assert!((h.spacing[2] - 0.6).abs() < 1e-12);
        assert_eq!(h.dims[2], 50);
        // fine block centers average back to the coarse centers
        let fine0 = h.origin[2];
        let block0_center = fine0 + 2.0 * h.spacing[2];
        assert!((block0_center - g.origin[2]).abs() < 1e-9);
    }

    #[test]
    fn hyperres_rejects_nonpositive_fixed() {
        let g = grid([4, 4, 4], [1.0; 3]);
        assert!(hyperres_grid(&g, HyperResMode::InferFixed(0.0)).is_err());
        assert!(hyperres_grid(&g, HyperResMode::InferFixed(-1.0)).is_err());
    }

    #[test]
    fn block_merge_inverts_refine() {
        let g = grid([16, 16, 12], [0.7, 0.7, 2.1]);
        let fine = g.refined_axis(2, 5).unwrap();
        assert_eq!(fine.dims[2], 60);
        let back = fine.block_merged_axis(2, 5).unwrap();
        assert_eq!(back.dims, g.dims);
        assert!((back.origin[2] - g.origin[2]).abs() < 1e-9);
        assert!((back.spacing[2] - g.spacing[2]).abs() < 1e-12);
    }

    #[test]
    fn ceil_cover_is_symmetric() {
        // extent 7.0 mm, new spacing 2.0 -> 4 voxels covering 8.0; leftover
        // 1.0 split as 0.5 each side
        let g = grid([7, 1, 1], [1.0, 1.0, 1.0]);
        let r = g.with_axis_spacing(0, 2.0).unwrap();
        assert_eq!(r.dims[0], 4);
        let (lo_old, hi_old) = g.slab(0);
        let (lo_new, hi_new) = r.slab(0);
        assert!((lo_old - lo_new - 0.5).abs() < 1e-12);
        assert!((hi_new - hi_old - 0.5).abs() < 1e-12);
    }

    #[test]
    fn voxel_containing_clamps_edges() {
        let g = grid([4, 4, 4], [1.0; 3]);
        assert_eq!(g.voxel_containing([0.0, 0.0, 0.0]), Some([0, 0, 0]));
        assert_eq!(g.voxel_containing([3.49, 0.0, 0.0]), Some([3, 0, 0]));
        assert_eq!(g.voxel_containing([3.6, 0.0, 0.0]), None);
        assert_eq!(g.voxel_containing([-0.49, 0.0, 0.0]), Some([0, 0, 0]));
        assert_eq!(g.voxel_containing([-0.6, 0.0, 0.0]), None);
    }
}
