use std::collections::BTreeSet;

use borderforge::border::{border_length, BorderKind, PolygonalChain};
use borderforge::eval::{fit_line, jaccard, virtual_cells, FitError, UndefinedIndex};
use borderforge::grid::{CellCoord, CellValue, MapOrigin, OccupancyGrid, WorldPoint};
use proptest::prelude::*;

fn cells(range: std::ops::Range<usize>) -> BTreeSet<CellCoord> {
    range.map(|i| CellCoord::new(i % 50, i / 50)).collect()
}

#[test]
fn jaccard_of_hand_counted_sets() {
    // 100 and 100 cells overlapping in 60.
    let gt = cells(0..100);
    let ud = cells(40..140);
    assert!((jaccard(&gt, &ud).unwrap() - 60.0 / 140.0).abs() < 1e-15);
    assert_eq!(jaccard(&gt, &gt).unwrap(), 1.0);
    assert_eq!(jaccard(&gt, &cells(200..210)).unwrap(), 0.0);
    assert_eq!(
        jaccard(&BTreeSet::new(), &BTreeSet::new()),
        Err(UndefinedIndex)
    );
}

fn cell_set() -> impl Strategy<Value = BTreeSet<CellCoord>> {
    prop::collection::btree_set(
        (0usize..12, 0usize..12).prop_map(|(x, y)| CellCoord::new(x, y)),
        0..60,
    )
}

proptest! {
    #[test]
    fn jaccard_is_symmetric(a in cell_set(), b in cell_set()) {
        prop_assume!(!(a.is_empty() && b.is_empty()));
        prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&b, &a).unwrap());
    }

    #[test]
    fn jaccard_is_one_exactly_for_equal_sets(a in cell_set(), b in cell_set()) {
        prop_assume!(!(a.is_empty() && b.is_empty()));
        let j = jaccard(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j == 1.0, a == b);
    }

    #[test]
    fn adding_cells_outside_gt_never_raises_jaccard(gt in cell_set(), ud in cell_set(), extra in cell_set()) {
        prop_assume!(!(gt.is_empty() && ud.is_empty()));
        let before = jaccard(&gt, &ud).unwrap();
        let grown: BTreeSet<_> = ud.union(&extra).filter(|c| ud.contains(c) || !gt.contains(c)).copied().collect();
        prop_assert!(jaccard(&gt, &grown).unwrap() <= before);
    }

    #[test]
    fn exact_lines_fit_perfectly(slope in -20.0..20.0f64, intercept in -50.0..50.0f64, xs in prop::collection::vec(0.0..15.0f64, 3..12)) {
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 0.5);
        let pts: Vec<_> = xs.iter().map(|&x| (x, slope * x + intercept)).collect();
        let fit = fit_line(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-8);
        prop_assert!((fit.intercept - intercept).abs() < 1e-7);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
    }
}

#[test]
fn fit_of_eight_seconds_per_meter() {
    let pts: Vec<_> = (4..=13).map(|l| (l as f64, 8.0 * l as f64 + 2.0)).collect();
    let fit = fit_line(&pts).unwrap();
    assert!((fit.slope - 8.0).abs() < 1e-12);
    assert!((fit.intercept - 2.0).abs() < 1e-10);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_fits() {
    assert_eq!(
        fit_line(&[(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)]),
        Err(FitError::DegenerateFit)
    );
    assert_eq!(
        fit_line(&[(1.0, 1.0), (2.0, 2.0)]),
        Err(FitError::TooFewPoints(2))
    );
}

#[test]
fn virtual_cells_are_newly_occupied_free_cells() {
    let mut prior_cells = vec![CellValue::Free; 16];
    prior_cells[0] = CellValue::Occupied;
    prior_cells[1] = CellValue::Unknown;
    let prior = OccupancyGrid::from_cells(4, 4, 0.1, MapOrigin::default(), prior_cells).unwrap();
    let taught = [
        CellCoord::new(0, 0),
        CellCoord::new(1, 0),
        CellCoord::new(2, 0),
        CellCoord::new(3, 3),
    ];
    let map = prior.with_cells_set(&taught, CellValue::Occupied).unwrap();
    let want: BTreeSet<_> = [CellCoord::new(2, 0), CellCoord::new(3, 3)]
        .into_iter()
        .collect();
    assert_eq!(virtual_cells(&map, &prior), want);
}

#[test]
fn carpet_perimeter() {
    let p = |x, y| WorldPoint::new(x, y);
    let chain =
        PolygonalChain::new(vec![p(2.6, 1.0), p(4.6, 1.0), p(4.6, 2.25), p(2.6, 2.25)]).unwrap();
    assert!((border_length(&chain, BorderKind::ClosedChain) - 6.5).abs() < 1e-12);
    assert!((border_length(&chain, BorderKind::SimpleChain) - 5.25).abs() < 1e-12);
}
