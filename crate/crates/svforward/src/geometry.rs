//! Spatial bookkeeping for the nine-lens system: sensor and padded-frame
//! sizes, chief-ray positions, sub-view windows, patch tiling, and the global
//! normalized coordinate frame shared by every patch.

use ndauto::{Array, Error, Result};

pub const NUM_LENSES: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub sensor: (usize, usize),
    pub pad: (usize, usize),
    /// Sub-view centers in the padded frame, row-major over the 3x3 lattice.
    pub chief_rays: [(usize, usize); NUM_LENSES],
    pub subview: (usize, usize),
    pub patch: usize,
    pub stride: usize,
    /// Ratio between this configuration and the full-scale instrument;
    /// metadata only.
    pub scale_factor: f64,
}

/// Chief rays on a centered 3x3 grid with the given spacing.
pub fn grid_chief_rays(pad: (usize, usize), spacing: usize) -> [(usize, usize); NUM_LENSES] {
    let (cy, cx) = (pad.0 / 2, pad.1 / 2);
    let mut rays = [(0usize, 0usize); NUM_LENSES];
    for gy in 0..3 {
        for gx in 0..3 {
            let ry = (cy as isize + (gy as isize - 1) * spacing as isize) as usize;
            let rx = (cx as isize + (gx as isize - 1) * spacing as isize) as usize;
            rays[gy * 3 + gx] = (ry, rx);
        }
    }
    rays
}

impl Geometry {
    pub fn new(
        sensor: (usize, usize),
        pad: (usize, usize),
        chief_rays: [(usize, usize); NUM_LENSES],
        subview: (usize, usize),
        patch: usize,
        stride: usize,
        scale_factor: f64,
    ) -> Result<Geometry> {
        let g = Geometry {
            sensor,
            pad,
            chief_rays,
            subview,
            patch,
            stride,
            scale_factor,
        };
        g.validate()?;
        for lens in 0..NUM_LENSES {
            let (r0, c0) = g.window_start(lens);
            if r0 < 0
                || c0 < 0
                || r0 as usize + subview.0 > pad.0
                || c0 as usize + subview.1 > pad.1
            {
                return Err(Error::InvalidArgument(format!(
                    "sub-view window of lens {lens} (start {r0},{c0}) leaves the {}x{} padded frame",
                    pad.0, pad.1
                )));
            }
        }
        Ok(g)
    }

    /// Skips the window-containment check; extraction zero-fills outside the
    /// padded frame. Needed for degenerate configurations such as
    /// pad == sub-view.
    pub fn new_relaxed(
        sensor: (usize, usize),
        pad: (usize, usize),
        chief_rays: [(usize, usize); NUM_LENSES],
        subview: (usize, usize),
        patch: usize,
        stride: usize,
        scale_factor: f64,
    ) -> Result<Geometry> {
        let g = Geometry {
            sensor,
            pad,
            chief_rays,
            subview,
            patch,
            stride,
            scale_factor,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.sensor.0 > self.pad.0 || self.sensor.1 > self.pad.1 {
            return Err(Error::InvalidArgument(format!(
                "sensor {:?} larger than padded frame {:?}",
                self.sensor, self.pad
            )));
        }
        if self.patch > self.subview.0 || self.patch > self.subview.1 {
            return Err(Error::InvalidArgument(format!(
                "patch size {} exceeds sub-view {:?}",
                self.patch, self.subview
            )));
        }
        if self.stride == 0 || self.stride > self.patch {
            return Err(Error::InvalidArgument(format!(
                "stride {} must be in [1, patch {}]",
                self.stride, self.patch
            )));
        }
        Ok(())
    }

    /// Desk-scale default: every full-scale ratio divided by 10.
    pub fn desk() -> Geometry {
        Geometry::new(
            (360, 360),
            (420, 420),
            grid_chief_rays((420, 420), 90),
            (240, 240),
            48,
            24,
            10.0,
        )
        .expect("desk geometry is valid")
    }

    /// Full-scale instrument geometry (4200 padded frame, 2400 sub-views,
    /// 480/240 patch tiling).
    pub fn full_scale() -> Geometry {
        Geometry::new(
            (3600, 3600),
            (4200, 4200),
            grid_chief_rays((4200, 4200), 900),
            (2400, 2400),
            480,
            240,
            1.0,
        )
        .expect("full-scale geometry is valid")
    }

    /// Top-left corner of a lens's sub-view window in the padded frame.
    /// May be negative for relaxed geometries.
    pub fn window_start(&self, lens: usize) -> (isize, isize) {
        let (ry, rx) = self.chief_rays[lens];
        (
            ry as isize - self.subview.0 as isize / 2,
            rx as isize - self.subview.1 as isize / 2,
        )
    }

    /// Margins of the centered sensor inside the padded frame.
    pub fn pad_offset(&self) -> (usize, usize) {
        ((self.pad.0 - self.sensor.0) / 2, (self.pad.1 - self.sensor.1) / 2)
    }

    /// Patch origins along one axis: multiples of the stride plus a final
    /// flush patch when the stride does not divide evenly.
    pub fn patch_origins_axis(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
        let mut origins = Vec::new();
        let last = extent - patch;
        let mut o = 0;
        while o <= last {
            origins.push(o);
            o += stride;
        }
        if *origins.last().expect("at least one origin") != last {
            origins.push(last);
        }
        origins
    }

    /// All patch origins, row-major.
    pub fn patch_origins(&self) -> Vec<(usize, usize)> {
        let rows = Self::patch_origins_axis(self.subview.0, self.patch, self.stride);
        let cols = Self::patch_origins_axis(self.subview.1, self.patch, self.stride);
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &r in &rows {
            for &c in &cols {
                out.push((r, c));
            }
        }
        out
    }

    pub fn patches_per_subview(&self) -> usize {
        Self::patch_origins_axis(self.subview.0, self.patch, self.stride).len()
            * Self::patch_origins_axis(self.subview.1, self.patch, self.stride).len()
    }

    /// Normalized global coordinate of a sub-view pixel: `2 p / (n - 1) - 1`.
    pub fn norm_coord(&self, row: usize, col: usize) -> (f64, f64) {
        let u = 2.0 * col as f64 / (self.subview.1 - 1) as f64 - 1.0;
        let v = 2.0 * row as f64 / (self.subview.0 - 1) as f64 - 1.0;
        (u, v)
    }

    /// Coordinate grid of one patch in the global sub-view frame, as a
    /// `2 x P x P` array with channel 0 = u (columns) and channel 1 = v
    /// (rows).
    pub fn patch_coords(&self, origin: (usize, usize), patch: usize) -> Array {
        let mut coords = Array::zeros(&[2, patch, patch]);
        for i in 0..patch {
            for j in 0..patch {
                let (u, v) = self.norm_coord(origin.0 + i, origin.1 + j);
                coords.set3(0, i, j, u);
                coords.set3(1, i, j, v);
            }
        }
        coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_tiling_is_9_by_9() {
        let g = Geometry::desk();
        assert_eq!(g.patches_per_subview(), 81);
        let origins = Geometry::patch_origins_axis(240, 48, 24);
        assert_eq!(origins, vec![0, 24, 48, 72, 96, 120, 144, 168, 192]);
    }

    #[test]
    fn full_scale_matches_instrument_arithmetic() {
        let g = Geometry::full_scale();
        assert_eq!(g.patches_per_subview(), 81);
        // 1307 source images at 81 patches each
        assert_eq!(1307 * g.patches_per_subview(), 105_867);
        for lens in 0..NUM_LENSES {
            let (r, c) = g.window_start(lens);
            assert!(r >= 0 && c >= 0);
            assert!(r as usize + 2400 <= 4200 && c as usize + 2400 <= 4200);
        }
    }

    #[test]
    fn flush_patch_added_when_stride_misaligns() {
        let origins = Geometry::patch_origins_axis(100, 48, 24);
        // 0, 24, 48 then flush at 52
        assert_eq!(origins, vec![0, 24, 48, 52]);
    }

    #[test]
    fn corner_patch_coords_reach_extremes() {
        let g = Geometry::desk();
        let coords = g.patch_coords((192, 192), 48);
        assert_eq!(coords.at3(0, 47, 47), 1.0);
        assert_eq!(coords.at3(1, 47, 47), 1.0);
        let c0 = g.patch_coords((0, 0), 48);
        assert_eq!(c0.at3(0, 0, 0), -1.0);
        assert_eq!(c0.at3(1, 0, 0), -1.0);
    }

    #[test]
    fn overlapping_patches_agree_on_shared_pixels() {
        let g = Geometry::desk();
        let a = g.patch_coords((0, 0), 48);
        let b = g.patch_coords((24, 24), 48);
        // pixel (30, 30) in sub-view frame = a[30,30] = b[6,6]
        assert_eq!(a.at3(0, 30, 30), b.at3(0, 6, 6));
        assert_eq!(a.at3(1, 30, 30), b.at3(1, 6, 6));
    }

    #[test]
    fn oversized_patch_rejected() {
        assert!(Geometry::new(
            (64, 64),
            (64, 64),
            grid_chief_rays((64, 64), 0),
            (64, 64),
            128,
            24,
            1.0
        )
        .is_err());
    }

    #[test]
    fn window_escaping_pad_rejected_by_strict_constructor() {
        // spacing so large the corner windows leave the padded frame
        let rays = grid_chief_rays((420, 420), 120);
        assert!(Geometry::new((360, 360), (420, 420), rays, (240, 240), 48, 24, 1.0).is_err());
        assert!(Geometry::new_relaxed((360, 360), (420, 420), rays, (240, 240), 48, 24, 1.0).is_ok());
    }
}
