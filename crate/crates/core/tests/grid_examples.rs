use borderforge::grid::*;
use std::f64::consts::PI;

fn grid(w: usize, h: usize, res: f64) -> OccupancyGrid {
    OccupancyGrid::new(w, h, res, MapOrigin::default(), CellValue::Free).unwrap()
}

#[test]
fn world_to_cell_examples() {
    let g = grid(10, 10, 0.025);
    assert_eq!(
        g.world_to_cell(WorldPoint::new(0.05, 0.05)).unwrap(),
        CellCoord::new(2, 2)
    );
    assert_eq!(
        g.world_to_cell(WorldPoint::new(0.0, 0.0)).unwrap(),
        CellCoord::new(0, 0)
    );
    assert!(matches!(
        g.world_to_cell(WorldPoint::new(0.3, 0.1)),
        Err(GridError::OutOfBounds { .. })
    ));
    assert!(g.world_to_cell(WorldPoint::new(-0.001, 0.1)).is_err());
}

#[test]
fn cell_to_world_examples() {
    let g = grid(10, 10, 0.025);
    let p = g.cell_to_world(CellCoord::new(2, 2)).unwrap();
    assert!((p.x - 0.0625).abs() < 1e-12 && (p.y - 0.0625).abs() < 1e-12);
    let p = g.cell_to_world(CellCoord::new(0, 0)).unwrap();
    assert!((p.x - 0.0125).abs() < 1e-12 && (p.y - 0.0125).abs() < 1e-12);
    assert!(g.cell_to_world(CellCoord::new(10, 0)).is_err());
}

#[test]
fn rotated_origin_round_trip() {
    for k in 0..4 {
        let origin = MapOrigin {
            x: 1.5,
            y: -2.0,
            theta: k as f64 * PI / 2.0,
        };
        let g = OccupancyGrid::new(13, 7, 0.05, origin, CellValue::Free).unwrap();
        for c in g.coords() {
            let w = g.cell_to_world(c).unwrap();
            assert_eq!(g.world_to_cell(w).unwrap(), c);
        }
    }
}

#[test]
fn lookup_is_total_inside_and_errors_outside() {
    let g = grid(4, 3, 0.1);
    assert!(g.coords().all(|c| g.get(c).is_ok()));
    assert!(g.get(CellCoord::new(4, 0)).is_err());
    assert!(g.get(CellCoord::new(0, 3)).is_err());
}

#[test]
fn invalid_grids_rejected() {
    let o = MapOrigin::default();
    assert!(OccupancyGrid::new(0, 3, 0.1, o, CellValue::Free).is_err());
    assert!(OccupancyGrid::new(3, 3, 0.0, o, CellValue::Free).is_err());
    assert!(OccupancyGrid::from_cells(3, 3, 0.1, o, vec![CellValue::Free; 8]).is_err());
}

#[test]
fn pgm_rows_are_flipped() {
    let mut cells = vec![CellValue::Free; 6];
    cells[0] = CellValue::Occupied; // bottom-left
    let g = OccupancyGrid::from_cells(3, 2, 0.1, MapOrigin::default(), cells).unwrap();
    let bytes = g.to_pgm_bytes();
    let header = b"P5\n3 2\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(&bytes[header.len()..], &[254, 254, 254, 0, 254, 254]);
}

#[test]
fn pixel_mapping() {
    assert_eq!(CellValue::from_pixel(0), CellValue::Occupied);
    assert_eq!(CellValue::from_pixel(254), CellValue::Free);
    assert_eq!(CellValue::from_pixel(255), CellValue::Free);
    assert_eq!(CellValue::from_pixel(1), CellValue::Unknown);
    assert_eq!(CellValue::from_pixel(205), CellValue::Unknown);
    assert_eq!(CellValue::from_pixel(253), CellValue::Unknown);
}

const META: &str = "resolution: 0.025\norigin: 0 0 0\nnegate: 0\n";

#[test]
fn all_unknown_file() {
    let mut pgm = b"P5\n4 2\n255\n".to_vec();
    pgm.extend([205u8; 8]);
    let g = OccupancyGrid::from_pgm_and_meta(&pgm, META).unwrap();
    assert!(g.cells().iter().all(|&c| c == CellValue::Unknown));
}

#[test]
fn malformed_files() {
    let mut pgm = b"P5\n4 2\n15\n".to_vec();
    pgm.extend([0u8; 8]);
    let err = OccupancyGrid::from_pgm_and_meta(&pgm, META).unwrap_err();
    assert!(err.contains("maxval"), "{err}");

    let mut pgm = b"P2\n4 2\n255\n".to_vec();
    pgm.extend([0u8; 8]);
    assert!(OccupancyGrid::from_pgm_and_meta(&pgm, META)
        .unwrap_err()
        .contains("magic"));

    let mut pgm = b"P5\n4 2\n255\n".to_vec();
    pgm.extend([0u8; 7]);
    assert!(OccupancyGrid::from_pgm_and_meta(&pgm, META)
        .unwrap_err()
        .contains("truncated"));

    let mut pgm = b"P5\n4 2\n255\n".to_vec();
    pgm.extend([0u8; 8]);
    let err = OccupancyGrid::from_pgm_and_meta(&pgm, "resolution: 0.1\nnegate: 0\n").unwrap_err();
    assert!(err.contains("origin"), "{err}");
}

#[test]
fn header_comments_and_extra_keys() {
    let mut pgm = b"P5\n# made by hand\n2 1\n255\n".to_vec();
    pgm.extend([0u8, 254]);
    let meta = "image: lab.pgm\nresolution: 0.05\norigin: [1.0, 2.0, 0.0]\nnegate: 0\noccupied_thresh: 0.65\n";
    let g = OccupancyGrid::from_pgm_and_meta(&pgm, meta).unwrap();
    assert_eq!(g.at(CellCoord::new(0, 0)), CellValue::Occupied);
    assert_eq!(g.at(CellCoord::new(1, 0)), CellValue::Free);
    assert_eq!(g.origin().x, 1.0);
}

#[test]
fn lab_sized_save_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.pgm");
    let mut g = grid(244, 140, 0.025);
    let walls: Vec<_> = g.coords().filter(|c| c.x == 0 || c.y % 17 == 3).collect();
    g = g.with_cells_set(&walls, CellValue::Occupied).unwrap();
    let unknown = [CellCoord::new(100, 100), CellCoord::new(5, 139)];
    g = g.with_cells_set(&unknown, CellValue::Unknown).unwrap();
    save_map(&g, &path).unwrap();
    let back = load_map(&path).unwrap();
    assert_eq!(back, g);
    assert_eq!(back.extent().0, 244.0 * 0.025);
}

#[test]
fn missing_meta_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    std::fs::write(&path, b"P5\n1 1\n255\n\x00").unwrap();
    let err = load_map(&path).unwrap_err();
    assert!(err.to_string().contains("m.meta"), "{err}");
}
