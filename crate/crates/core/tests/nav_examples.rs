use borderforge::grid::MapOrigin;
use borderforge::grid::{CellCoord, CellValue, OccupancyGrid};
use borderforge::nav::*;
use std::collections::BTreeSet;

fn grid(w: usize, h: usize) -> OccupancyGrid {
    OccupancyGrid::new(w, h, 0.025, MapOrigin::default(), CellValue::Free).unwrap()
}

fn c(x: usize, y: usize) -> CellCoord {
    CellCoord::new(x, y)
}

#[test]
fn straight_path_on_empty_grid() {
    let p = plan_path(&grid(10, 10), c(0, 0), c(0, 9)).unwrap();
    assert_eq!(p.steps(), 9);
    assert!((p.length - 9.0 * 0.025).abs() < 1e-12);
    assert!(p.cells.iter().all(|cell| cell.x == 0));
}

#[test]
fn full_wall_blocks() {
    let wall: Vec<_> = (0..10).map(|x| c(x, 5)).collect();
    let g = grid(10, 10)
        .with_cells_set(&wall, CellValue::Occupied)
        .unwrap();
    assert!(matches!(
        plan_path(&g, c(0, 0), c(0, 9)),
        Err(NavError::NoPath { .. })
    ));
}

#[test]
fn gap_forces_detour() {
    let wall: Vec<_> = (0..9).map(|x| c(x, 5)).collect();
    let g = grid(10, 10)
        .with_cells_set(&wall, CellValue::Occupied)
        .unwrap();
    let p = plan_path(&g, c(0, 0), c(0, 9)).unwrap();
    // across to the gap at x = 9 and back: 9 + 9 + 9
    assert_eq!(p.steps(), 27);
    assert!(p.cells.contains(&c(9, 5)));
    for pair in p.cells.windows(2) {
        assert_eq!(
            pair[0].x.abs_diff(pair[1].x) + pair[0].y.abs_diff(pair[1].y),
            1
        );
    }
}

#[test]
fn blocked_endpoints_have_no_path() {
    let g = grid(5, 5)
        .with_cells_set(&[c(4, 4)], CellValue::Unknown)
        .unwrap();
    assert!(plan_path(&g, c(0, 0), c(4, 4)).is_err());
    assert!(plan_path(&g, c(4, 4), c(0, 0)).is_err());
}

#[test]
fn inflation_narrows_free_space() {
    let wall: Vec<_> = (0..9).map(|x| c(x, 5)).collect();
    let g = grid(10, 10)
        .with_cells_set(&wall, CellValue::Occupied)
        .unwrap();
    let cfg = PlannerConfig { inflation_cells: 1 };
    assert!(plan_path_with(&g, c(0, 0), c(0, 9), &cfg).is_err());
}

#[test]
fn intersection() {
    let p = plan_path(&grid(5, 5), c(0, 2), c(4, 2)).unwrap();
    let on: BTreeSet<_> = [c(2, 2)].into();
    let off: BTreeSet<_> = [c(2, 4)].into();
    assert!(path_intersects(&p, &on));
    assert!(!path_intersects(&p, &off));
}

#[test]
fn deterministic_tie_breaking() {
    let a = plan_path(&grid(8, 8), c(0, 0), c(7, 7)).unwrap();
    let b = plan_path(&grid(8, 8), c(0, 0), c(7, 7)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.steps(), 14);
}
