use std::f64::consts::{FRAC_PI_2, PI};

use borderforge::grid::{
    load_map, save_map, CellCoord, CellValue, MapOrigin, OccupancyGrid, WorldPoint,
};
use proptest::prelude::*;

fn cell_value() -> impl Strategy<Value = CellValue> {
    prop_oneof![
        Just(CellValue::Free),
        Just(CellValue::Occupied),
        Just(CellValue::Unknown)
    ]
}

fn grid() -> impl Strategy<Value = OccupancyGrid> {
    (
        1usize..40,
        1usize..40,
        0.005..0.5f64,
        -20.0..20.0f64,
        -20.0..20.0f64,
        0usize..4,
    )
        .prop_flat_map(|(w, h, res, ox, oy, quarter)| {
            prop::collection::vec(cell_value(), w * h).prop_map(move |cells| {
                let origin = MapOrigin {
                    x: ox,
                    y: oy,
                    theta: [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2][quarter],
                };
                OccupancyGrid::from_cells(w, h, res, origin, cells).unwrap()
            })
        })
}

proptest! {
    #[test]
    fn cell_centers_map_back_to_their_cells(g in grid()) {
        for c in g.coords() {
            let w = g.cell_to_world(c).unwrap();
            prop_assert_eq!(g.world_to_cell(w).unwrap(), c);
        }
    }

    #[test]
    fn lookup_is_total_on_the_grid_and_fails_outside(g in grid(), x in 0usize..60, y in 0usize..60) {
        let c = CellCoord::new(x, y);
        prop_assert_eq!(g.get(c).is_ok(), x < g.width() && y < g.height());
    }

    #[test]
    fn points_off_the_map_are_rejected(g in grid(), u in -1.0..2.0f64, v in -1.0..2.0f64) {
        let p = g.normalized_to_world(u, v);
        let inside = (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v);
        // Avoid points that straddle the edge within rounding.
        let near_edge = [u, v].iter().any(|t| t.abs() < 1e-9 || (t - 1.0).abs() < 1e-9);
        prop_assume!(!near_edge);
        prop_assert_eq!(g.world_to_cell(p).is_ok(), inside);
        let (nu, nv) = g.world_to_normalized(p);
        prop_assert!((nu - u).abs() < 1e-9 && (nv - v).abs() < 1e-9);
    }

    #[test]
    fn file_round_trip_preserves_everything(g in grid()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        save_map(&g, &path).unwrap();
        let back = load_map(&path).unwrap();
        prop_assert_eq!(back.width(), g.width());
        prop_assert_eq!(back.height(), g.height());
        prop_assert_eq!(back.resolution(), g.resolution());
        prop_assert_eq!(back.origin(), g.origin());
        prop_assert_eq!(back.cells(), g.cells());
    }
}

#[test]
fn axis_aligned_map_hand_values() {
    let g = OccupancyGrid::new(244, 140, 0.025, MapOrigin::default(), CellValue::Free).unwrap();
    assert_eq!(
        g.world_to_cell(WorldPoint::new(0.05, 0.05)).unwrap(),
        CellCoord::new(2, 2)
    );
    let w = g.cell_to_world(CellCoord::new(2, 2)).unwrap();
    assert!((w.x - 0.0625).abs() < 1e-12 && (w.y - 0.0625).abs() < 1e-12);
    let (ex, ey) = g.extent();
    assert!((ex - 6.1).abs() < 1e-9 && (ey - 3.5).abs() < 1e-9);
}
