//! The dense output volume of per-voxel density estimates.

use crate::grid::{GridSpec, VoxelIndex};

/// Dense 3D array of 64-bit densities over a grid, laid out with the
/// temporal axis innermost: `index(x, y, t) = (x·G_y + y)·G_t + t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityVolume {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl DensityVolume {
    pub fn zeroed(grid: GridSpec) -> Self {
        let len = grid.num_voxels();
        DensityVolume { grid, values: vec![0.0; len] }
    }

    #[inline(always)]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (x * self.grid.ny + y) * self.grid.nt + t
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.values[self.index(x, y, t)]
    }

    pub fn at(&self, v: VoxelIndex) -> f64 {
        self.get(v.x, v.y, v.t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `(max |a−b|, max |a−b| / max(1, max |b|))` with `self` as the
    /// reference `b`. Panics if shapes differ; callers compare grids first.
    pub fn diff_from(&self, other: &DensityVolume) -> (f64, f64) {
        assert_eq!(self.values.len(), other.values.len(), "volume shapes differ");
        let mut max_abs_diff = 0.0_f64;
        for (a, b) in other.values.iter().zip(self.values.iter()) {
            max_abs_diff = max_abs_diff.max((a - b).abs());
        }
        let scale = self.max_abs().max(1.0);
        (max_abs_diff, max_abs_diff / scale)
    }

    pub fn bitwise_eq(&self, other: &DensityVolume) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_t_innermost() {
        let grid =
            GridSpec::new((0.0, 0.0, 0.0), (2.0, 3.0, 4.0), 1.0, 1.0, 1.0, 1.0).unwrap();
        let mut v = DensityVolume::zeroed(grid);
        assert_eq!(v.values.len(), 24);
        assert_eq!(v.index(0, 0, 1), 1);
        assert_eq!(v.index(0, 1, 0), 4);
        assert_eq!(v.index(1, 0, 0), 12);
        let i = v.index(1, 2, 3);
        v.values[i] = 7.0;
        assert_eq!(v.get(1, 2, 3), 7.0);
    }

    #[test]
    fn diff_uses_reference_scale() {
        let grid =
            GridSpec::new((0.0, 0.0, 0.0), (1.0, 1.0, 2.0), 1.0, 1.0, 1.0, 1.0).unwrap();
        let mut a = DensityVolume::zeroed(grid);
        let mut b = DensityVolume::zeroed(grid);
        a.values[0] = 4.0;
        b.values[0] = 5.0;
        let (abs, rel) = b.diff_from(&a);
        assert_eq!(abs, 1.0);
        assert_eq!(rel, 1.0 / 5.0);
        // Small reference magnitudes fall back to an absolute scale.
        b.values[0] = 0.5;
        a.values[0] = 0.25;
        let (abs, rel) = b.diff_from(&a);
        assert_eq!(abs, 0.25);
        assert_eq!(rel, 0.25);
    }
}
