mod common;

use common::{naive_binarize, naive_nms, random_map};
use mmpm::visual_tx::{binarize_patches, cell_to_roi, nms_per_filter, visual_itemsets, PatchCell, PatchGeometry};
use proptest::prelude::*;

#[test]
fn default_geometry_stays_inside_the_image() {
    let g = PatchGeometry::default();
    for row in 0..6 {
        for col in 0..6 {
            let r = cell_to_roi(PatchCell::new(row, col), &g).unwrap();
            assert!(r.x0 < r.x1 && r.x1 <= 227 && r.y0 < r.y1 && r.y1 <= 227);
            assert!(r.width() <= 196 && r.height() <= 196);
        }
    }
    let corner = cell_to_roi(PatchCell::new(0, 0), &g).unwrap();
    assert_eq!((corner.width(), corner.height()), (132, 132));
    let last = cell_to_roi(PatchCell::new(5, 5), &g).unwrap();
    assert_eq!((last.x0, last.y0, last.x1, last.y1), (96, 96, 227, 227));
    // only the central cell's receptive field lies wholly inside the image
    let full: Vec<(u32, u32)> = (0..6)
        .flat_map(|r| (0..6).map(move |c| (r, c)))
        .filter(|&(r, c)| {
            let roi = cell_to_roi(PatchCell::new(r, c), &g).unwrap();
            (roi.width(), roi.height()) == (196, 196)
        })
        .collect();
    assert_eq!(full, vec![(2, 2)]);
}

#[test]
fn cells_outside_the_image_are_rejected() {
    assert!(cell_to_roi(PatchCell::new(0, 40), &PatchGeometry::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nms_matches_oracle_and_is_idempotent(seed in any::<u64>(), k_top in 1usize..25) {
        let map = random_map(seed);
        let once = nms_per_filter(&map);
        prop_assert_eq!(&once, &naive_nms(&map));
        prop_assert_eq!(&nms_per_filter(&once), &once);
        let (h, w, f) = map.dims();
        for filter in 0..f {
            let nonzero = (0..h * w).filter(|c| once.get(c / w, c % w, filter) != 0.0).count();
            prop_assert!(nonzero <= 1);
        }
        let got: Vec<((u32, u32), Vec<u32>)> = binarize_patches(&once, k_top)
            .into_iter()
            .map(|v| ((v.cell.row, v.cell.col), v.items))
            .collect();
        prop_assert_eq!(&got, &naive_binarize(&once, k_top));
        for v in visual_itemsets(&map, k_top) {
            prop_assert!(!v.items.is_empty() && v.items.len() <= k_top);
        }
    }
}
