//! Per-patch visual itemsets from a pool5-style feature map.
//!
//! Each filter keeps only its strongest cell (non-max suppression across the
//! grid), then every cell is binarized by marking its top-k surviving
//! filters. Grid cells map back to pixel regions of the input image through
//! [`cell_to_roi`].

use serde::{Deserialize, Serialize};

use crate::corpus::FeatureMap;
use crate::error::{Error, Result};

pub const DEFAULT_K_TOP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchCell {
    pub row: u32,
    pub col: u32,
}

impl PatchCell {
    pub fn new(row: u32, col: u32) -> Self {
        PatchCell { row, col }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualItemset {
    pub cell: PatchCell,
    /// Filter indices, strictly increasing.
    pub items: Vec<u32>,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`; x runs along columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl RoiRect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }
}

/// Receptive-field geometry of the grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub image_side: u32,
    pub patch_side: u32,
    pub stride: u32,
    pub pad: u32,
}

impl Default for PatchGeometry {
    fn default() -> Self {
        PatchGeometry {
            image_side: 227,
            patch_side: 196,
            stride: 32,
            pad: 64,
        }
    }
}

impl PatchGeometry {
    /// Checks that every cell of an `height × width` grid has a nonempty
    /// region inside the image.
    pub fn validate(&self, height: u32, width: u32) -> Result<()> {
        if self.image_side == 0 || self.patch_side == 0 {
            return Err(Error::Config("image_side and patch_side must be positive".into()));
        }
        let side = height.max(width);
        for i in 0..side {
            if self.span(i).is_none() {
                return Err(Error::Config(format!(
                    "grid index {i} maps outside a {}px image (patch {}, stride {}, pad {})",
                    self.image_side, self.patch_side, self.stride, self.pad
                )));
            }
        }
        Ok(())
    }

    fn span(&self, index: u32) -> Option<(u32, u32)> {
        let start = i64::from(self.stride) * i64::from(index) - i64::from(self.pad);
        let end = start + i64::from(self.patch_side);
        let lo = start.max(0);
        let hi = end.min(i64::from(self.image_side));
        (lo < hi).then_some((lo as u32, hi as u32))
    }
}

/// Keeps, for every filter, only its maximum cell. Ties go to the smallest
/// row-major cell index; all-zero filters stay all zero.
pub fn nms_per_filter(map: &FeatureMap) -> FeatureMap {
    let (h, w, f) = map.dims();
    let cells = h * w;
    let values = map.values();
    let mut best = vec![(0usize, 0f32); f];
    for cell in 0..cells {
        let row = &values[cell * f..(cell + 1) * f];
        for (filter, &v) in row.iter().enumerate() {
            if v > best[filter].1 {
                best[filter] = (cell, v);
            }
        }
    }
    let mut out = FeatureMap::zeros(h, w, f);
    for (filter, &(cell, v)) in best.iter().enumerate() {
        if v > 0.0 {
            out.set(cell / w, cell % w, filter, v);
        }
    }
    out
}

/// Marks the `k_top` strongest nonzero filters of each cell. Ties go to the
/// smaller filter index and cells with nothing left are omitted.
pub fn binarize_patches(map_nms: &FeatureMap, k_top: usize) -> Vec<VisualItemset> {
    assert!(k_top >= 1, "k_top must be at least 1");
    let (h, w, _) = map_nms.dims();
    let mut out = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let mut candidates: Vec<(u32, f32)> = map_nms
                .cell(row, col)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            candidates.truncate(k_top);
            let mut items: Vec<u32> = candidates.into_iter().map(|(i, _)| i).collect();
            items.sort_unstable();
            out.push(VisualItemset {
                cell: PatchCell::new(row as u32, col as u32),
                items,
            });
        }
    }
    out
}

/// NMS followed by binarization.
pub fn visual_itemsets(map: &FeatureMap, k_top: usize) -> Vec<VisualItemset> {
    binarize_patches(&nms_per_filter(map), k_top)
}

/// Pixel region of the unpadded image seen by a grid cell.
pub fn cell_to_roi(cell: PatchCell, geom: &PatchGeometry) -> Result<RoiRect> {
    let (y0, y1) = geom.span(cell.row).ok_or_else(|| {
        Error::Config(format!("row {} has no pixels inside the image", cell.row))
    })?;
    let (x0, x1) = geom.span(cell.col).ok_or_else(|| {
        Error::Config(format!("column {} has no pixels inside the image", cell.col))
    })?;
    Ok(RoiRect { x0, y0, x1, y1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(h: usize, w: usize, f: usize, v: &[f32]) -> FeatureMap {
        FeatureMap::new(h, w, f, v.to_vec()).unwrap()
    }

    #[test]
    fn nms_keeps_max() {
        let m = map(2, 2, 1, &[1.0, 3.0, 2.0, 0.0]);
        assert_eq!(nms_per_filter(&m).values(), &[0.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn nms_tie_goes_to_first_cell() {
        let m = map(2, 2, 1, &[5.0, 0.0, 0.0, 5.0]);
        assert_eq!(nms_per_filter(&m).values(), &[5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nms_all_zero() {
        let m = FeatureMap::zeros(3, 3, 4);
        assert_eq!(nms_per_filter(&m), m);
    }

    #[test]
    fn binarize_top_k() {
        let m = map(1, 1, 6, &[0.0, 7.2, 0.0, 3.1, 0.5, 0.0]);
        let sets = binarize_patches(&m, 2);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].items, vec![1, 3]);
    }

    #[test]
    fn binarize_ties_prefer_small_index() {
        let m = map(1, 1, 6, &[2.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(binarize_patches(&m, 2)[0].items, vec![0, 1]);
    }

    #[test]
    fn binarize_omits_empty_cells() {
        let m = map(1, 2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let sets = binarize_patches(&m, 5);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].cell, PatchCell::new(0, 1));
        assert_eq!(sets[0].items, vec![0]);
    }

    #[test]
    fn default_roi_examples() {
        let g = PatchGeometry::default();
        let r = cell_to_roi(PatchCell::new(0, 0), &g).unwrap();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (0, 0, 132, 132));
        let r = cell_to_roi(PatchCell::new(2, 2), &g).unwrap();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (0, 0, 196, 196));
        let r = cell_to_roi(PatchCell::new(5, 5), &g).unwrap();
        assert_eq!((r.x0, r.y0, r.x1, r.y1), (96, 96, 227, 227));
        let r = cell_to_roi(PatchCell::new(1, 4), &g).unwrap();
        assert_eq!((r.y0, r.y1, r.x0, r.x1), (0, 164, 64, 227));
    }

    #[test]
    fn empty_geometry_is_a_config_error() {
        let g = PatchGeometry {
            image_side: 100,
            patch_side: 10,
            stride: 32,
            pad: 0,
        };
        assert!(g.validate(6, 6).is_err());
        assert!(cell_to_roi(PatchCell::new(5, 0), &g).is_err());
        assert!(PatchGeometry::default().validate(6, 6).is_ok());
    }
}
