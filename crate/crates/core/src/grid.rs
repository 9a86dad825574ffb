//! World-space domain, voxel grid geometry, and the world↔voxel mapping.
//!
//! Conventions used by every algorithm in this crate:
//! - the domain box is half-open, `[origin, origin + extent)` per axis;
//! - a voxel's sampling coordinate is its center, `origin + (index + 0.5) * res`;
//! - voxel counts are `ceil(extent / res)` and bandwidth radii are
//!   `ceil(bandwidth / res)`, both per axis.

use crate::error::{Error, Result};

/// One event in world coordinates. All three fields are finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, t: f64) -> Result<Self> {
        for (field, v) in [("x", x), ("y", y), ("t", t)] {
            if !v.is_finite() {
                return Err(Error::validation(field, format!("must be finite, got {v}")));
            }
        }
        Ok(Point { x, y, t })
    }
}

/// A voxel position, in-bounds with respect to its grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VoxelIndex {
    pub x: usize,
    pub y: usize,
    pub t: usize,
}

/// Domain box, resolutions, bandwidths, and their voxel-space images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// World origin (x0, y0, t0).
    pub origin: (f64, f64, f64),
    /// World extent (g_x, g_y, g_t), strictly positive per axis.
    pub extent: (f64, f64, f64),
    /// Spatial resolution (world units per voxel along x and y).
    pub sres: f64,
    /// Temporal resolution (world units per voxel along t).
    pub tres: f64,
    /// Spatial bandwidth (world units).
    pub hs: f64,
    /// Temporal bandwidth (world units).
    pub ht: f64,
    /// Voxel counts per axis: ceil(extent / res).
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Bandwidth radii in voxels: ceil(h / res).
    pub hs_vox: usize,
    pub ht_vox: usize,
    /// Cached upper corner of the half-open domain box.
    upper: (f64, f64, f64),
}

impl GridSpec {
    pub fn new(
        origin: (f64, f64, f64),
        extent: (f64, f64, f64),
        sres: f64,
        tres: f64,
        hs: f64,
        ht: f64,
    ) -> Result<Self> {
        for (field, v) in [("origin.x", origin.0), ("origin.y", origin.1), ("origin.t", origin.2)] {
            if !v.is_finite() {
                return Err(Error::validation(field, format!("must be finite, got {v}")));
            }
        }
        for (field, v) in [
            ("extent.x", extent.0),
            ("extent.y", extent.1),
            ("extent.t", extent.2),
            ("sres", sres),
            ("tres", tres),
            ("hs", hs),
            ("ht", ht),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be > 0, got {v}")));
            }
        }
        let nx = (extent.0 / sres).ceil() as usize;
        let ny = (extent.1 / sres).ceil() as usize;
        let nt = (extent.2 / tres).ceil() as usize;
        let hs_vox = (hs / sres).ceil() as usize;
        let ht_vox = (ht / tres).ceil() as usize;
        debug_assert!(nx >= 1 && ny >= 1 && nt >= 1);
        // Guard the dense allocation downstream against nonsense inputs.
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nt))
            .ok_or_else(|| Error::validation("extent", "voxel count overflows".to_string()))?;
        let upper = (origin.0 + extent.0, origin.1 + extent.1, origin.2 + extent.2);
        Ok(GridSpec { origin, extent, sres, tres, hs, ht, nx, ny, nt, hs_vox, ht_vox, upper })
    }

    pub fn num_voxels(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    /// Upper corner of the half-open domain box.
    pub fn upper(&self) -> (f64, f64, f64) {
        self.upper
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.origin.0
            && p.x < self.upper.0
            && p.y >= self.origin.1
            && p.y < self.upper.1
            && p.t >= self.origin.2
            && p.t < self.upper.2
    }

    /// Maps a point inside the domain box to its voxel. A floor result that
    /// lands exactly on the upper edge (possible when the division rounds up)
    /// clamps back to the last voxel.
    pub fn point_to_voxel(&self, p: &Point) -> Result<VoxelIndex> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain { x: p.x, y: p.y, t: p.t, line: None });
        }
        let clamp = |v: f64, n: usize| -> usize {
            let i = v.floor() as isize;
            debug_assert!(i >= 0);
            (i.max(0) as usize).min(n - 1)
        };
        Ok(VoxelIndex {
            x: clamp((p.x - self.origin.0) / self.sres, self.nx),
            y: clamp((p.y - self.origin.1) / self.sres, self.ny),
            t: clamp((p.t - self.origin.2) / self.tres, self.nt),
        })
    }

    /// World coordinate of a voxel's center.
    pub fn voxel_center(&self, v: VoxelIndex) -> (f64, f64, f64) {
        (self.center_x(v.x), self.center_y(v.y), self.center_t(v.t))
    }

    #[inline(always)]
    pub fn center_x(&self, x: usize) -> f64 {
        self.origin.0 + (x as f64 + 0.5) * self.sres
    }

    #[inline(always)]
    pub fn center_y(&self, y: usize) -> f64 {
        self.origin.1 + (y as f64 + 0.5) * self.sres
    }

    #[inline(always)]
    pub fn center_t(&self, t: usize) -> f64 {
        self.origin.2 + (t as f64 + 0.5) * self.tres
    }

    /// The whole grid as a half-open voxel box.
    pub fn full_box(&self) -> VoxelBox {
        VoxelBox { x0: 0, x1: self.nx, y0: 0, y1: self.ny, t0: 0, t1: self.nt }
    }

    /// The voxel box a point scatters into: its voxel ± (H_s, H_s, H_t),
    /// clipped to the grid.
    pub fn scatter_box(&self, v: VoxelIndex) -> VoxelBox {
        VoxelBox {
            x0: v.x.saturating_sub(self.hs_vox),
            x1: (v.x + self.hs_vox + 1).min(self.nx),
            y0: v.y.saturating_sub(self.hs_vox),
            y1: (v.y + self.hs_vox + 1).min(self.ny),
            t0: v.t.saturating_sub(self.ht_vox),
            t1: (v.t + self.ht_vox + 1).min(self.nt),
        }
    }
}

/// Half-open box of voxel indices, `[x0, x1) × [y0, y1) × [t0, t1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoxelBox {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    pub t0: usize,
    pub t1: usize,
}

impl VoxelBox {
    pub fn intersect(&self, other: &VoxelBox) -> VoxelBox {
        VoxelBox {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
            t0: self.t0.max(other.t0),
            t1: self.t1.min(other.t1),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1 || self.t0 >= self.t1
    }

    pub fn dx(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn dy(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }

    pub fn dt(&self) -> usize {
        self.t1.saturating_sub(self.t0)
    }

    pub fn len(&self) -> usize {
        self.dx() * self.dy() * self.dt()
    }

    pub fn contains(&self, x: usize, y: usize, t: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1 && t >= self.t0 && t < self.t1
    }

    /// Grows the box by the bandwidth radii on every face, clipping to `grid`.
    pub fn dilate(&self, grid: &GridSpec) -> VoxelBox {
        VoxelBox {
            x0: self.x0.saturating_sub(grid.hs_vox),
            x1: (self.x1 + grid.hs_vox).min(grid.nx),
            y0: self.y0.saturating_sub(grid.hs_vox),
            y1: (self.y1 + grid.hs_vox).min(grid.ny),
            t0: self.t0.saturating_sub(grid.ht_vox),
            t1: (self.t1 + grid.ht_vox).min(grid.nt),
        }
    }
}

/// Next representable f64 toward +inf (total order on the bit pattern).
pub(crate) fn next_up(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        return v;
    }
    let bits = v.to_bits();
    if v == 0.0 {
        f64::from_bits(1)
    } else if bits >> 63 == 0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

/// Next representable f64 toward -inf.
pub(crate) fn next_down(v: f64) -> f64 {
    if v.is_nan() || v == f64::NEG_INFINITY {
        return v;
    }
    if v == 0.0 {
        f64::from_bits(1 | (1 << 63))
    } else {
        let bits = v.to_bits();
        if bits >> 63 == 0 {
            f64::from_bits(bits - 1)
        } else {
            f64::from_bits(bits + 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_100m() -> GridSpec {
        GridSpec::new((0.0, 0.0, 0.0), (400.0, 400.0, 10.0), 100.0, 1.0, 150.0, 2.0).unwrap()
    }

    #[test]
    fn grid_dimensions_from_ceiling() {
        let g = GridSpec::new(
            (0.0, 0.0, 0.0),
            (14800.0, 19400.0, 728.0),
            100.0,
            1.0,
            300.0,
            1.0,
        )
        .unwrap();
        assert_eq!((g.nx, g.ny, g.nt), (148, 194, 728));
        assert_eq!(g.hs_vox, 3);
        assert_eq!(g.ht_vox, 1);

        let g = GridSpec::new((0.0, 0.0, 0.0), (10.0, 10.0, 10.0), 3.0, 3.0, 1.0, 1.0).unwrap();
        assert_eq!((g.nx, g.ny, g.nt), (4, 4, 4));
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let err =
            GridSpec::new((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), -2.0, 1.0, 1.0, 1.0).unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "sres"),
            other => panic!("unexpected error {other:?}"),
        }
        let err = GridSpec::new((0.0, 0.0, 0.0), (1.0, 0.0, 1.0), 1.0, 1.0, 1.0, 1.0).unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "extent.y"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn point_to_voxel_floors_and_clamps() {
        let g = grid_100m();
        let v = g.point_to_voxel(&Point::new(250.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(v.x, 2);
        let v = g.point_to_voxel(&Point::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(v.x, 0);
        let v = g.point_to_voxel(&Point::new(next_down(400.0), 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(v.x, 3);
        assert!(g.point_to_voxel(&Point::new(400.0, 0.0, 0.0).unwrap()).is_err());
        assert!(g.point_to_voxel(&Point::new(-0.001, 0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn voxel_center_examples() {
        let g = grid_100m();
        assert_eq!(g.center_x(0), 50.0);
        let g = GridSpec::new((0.0, 0.0, 0.0), (10.0, 10.0, 10.0), 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(g.center_t(2), 2.5);
        let g = GridSpec::new((10.0, 0.0, 0.0), (5.0, 5.0, 5.0), 0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(g.center_x(3), 11.75);
    }

    #[test]
    fn non_finite_point_rejected() {
        assert!(Point::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(Point::new(0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn scatter_box_clips_to_grid() {
        let g = grid_100m(); // 4x4x10 voxels, hs_vox=2, ht_vox=2
        let b = g.scatter_box(VoxelIndex { x: 0, y: 3, t: 9 });
        assert_eq!(b, VoxelBox { x0: 0, x1: 3, y0: 1, y1: 4, t0: 7, t1: 10 });
    }

    #[test]
    fn float_step_helpers() {
        assert!(next_up(1.0) > 1.0);
        assert!(next_down(1.0) < 1.0);
        assert!(next_up(0.0) > 0.0);
        assert!(next_down(0.0) < 0.0);
        assert_eq!(next_down(next_up(42.5)), 42.5);
    }
}
