use borderforge::detect::*;
use borderforge::projection::PixelCoord;
use borderforge::scene::RenderedFrame;

fn gray_frame(w: usize, h: usize, level: u8) -> RenderedFrame {
    let mut f = RenderedFrame::new(w, h);
    f.color.fill([level; 3]);
    f.hsv.fill([0, 0, level]);
    f.depth.fill(1.0);
    f
}

fn paint(f: &mut RenderedFrame, x: usize, y: usize, hsv: [u8; 3]) {
    let i = f.index(x, y);
    f.hsv[i] = hsv;
}

fn mask_from(w: usize, h: usize, cells: &[(usize, usize)]) -> BinaryMask {
    let mut m = BinaryMask::new(w, h);
    for &(x, y) in cells {
        m.set(x, y, true);
    }
    m
}

#[test]
fn gray_frame_has_empty_mask() {
    let f = gray_frame(64, 48, 200);
    assert_eq!(candidate_mask(&f, &DetectionParams::default()).count(), 0);
}

#[test]
fn uniformly_red_frame_has_empty_mask() {
    let mut f = gray_frame(64, 48, 0);
    f.hsv.fill([0, 255, 255]);
    assert_eq!(candidate_mask(&f, &DetectionParams::default()).count(), 0);
}

#[test]
fn bright_red_dot_is_masked() {
    let mut f = gray_frame(64, 48, 100);
    for (x, y) in [(30, 20), (31, 20), (30, 21), (31, 21)] {
        paint(&mut f, x, y, [2, 200, 255]);
    }
    let m = candidate_mask(&f, &DetectionParams::default());
    assert_eq!(m.count(), 4);
    assert!(m.get(30, 20) && m.get(31, 21));
}

/// Mask from its definition with a clamped window, summed directly.
fn mask_oracle(f: &RenderedFrame, params: &DetectionParams) -> Vec<bool> {
    let half = (params.window / 2) as i64;
    let (w, h) = (f.width as i64, f.height as i64);
    let mut out = vec![false; f.hsv.len()];
    for y in 0..h {
        for x in 0..w {
            let p = f.hsv[(y * w + x) as usize];
            let red = params
                .hue_bands
                .iter()
                .any(|b| p[0] >= b[0] && p[0] <= b[1]);
            if !(red && p[1] >= params.min_saturation) {
                continue;
            }
            let (mut sum, mut n) = (0u64, 0u64);
            for yy in (y - half).max(0)..=(y + half).min(h - 1) {
                for xx in (x - half).max(0)..=(x + half).min(w - 1) {
                    sum += f.hsv[(yy * w + xx) as usize][2] as u64;
                    n += 1;
                }
            }
            out[(y * w + x) as usize] = p[2] as f64 > sum as f64 / n as f64 + params.margin;
        }
    }
    out
}

#[test]
fn candidate_mask_matches_definition_for_sparse_and_dense_red() {
    let params = DetectionParams {
        window: 7,
        ..DetectionParams::default()
    };
    // Few red pixels take the direct-sum path, many take the integral image.
    for stride in [97usize, 3] {
        let mut f = gray_frame(50, 40, 0);
        for (i, p) in f.hsv.iter_mut().enumerate() {
            let v = ((i * 37) % 251) as u8;
            *p = if i % stride == 0 {
                [(i % 12) as u8, 200, v]
            } else {
                [90, 10, v / 3]
            };
        }
        let m = candidate_mask(&f, &params);
        let want = mask_oracle(&f, &params);
        for y in 0..40 {
            for x in 0..50 {
                assert_eq!(
                    m.get(x, y),
                    want[y * 50 + x],
                    "stride {stride} at ({x}, {y})"
                );
            }
        }
        assert!(m.count() > 0);
    }
}

#[test]
fn square_blob() {
    let cells: Vec<_> = (4..7).flat_map(|y| (10..13).map(move |x| (x, y))).collect();
    let blobs = extract_blobs(&mask_from(20, 20, &cells));
    assert_eq!(blobs.len(), 1);
    assert_eq!(blobs[0].area, 9);
    assert_eq!(blobs[0].center, PixelCoord::new(11.0, 5.0));
}

#[test]
fn separated_squares_are_two_blobs_in_row_major_order() {
    let mask = mask_from(20, 20, &[(15, 2), (16, 2), (2, 10), (3, 10)]);
    let blobs = extract_blobs(&mask);
    assert_eq!(blobs.len(), 2);
    assert!(blobs[0].center.y < blobs[1].center.y);
}

#[test]
fn diagonal_pixels_are_eight_connected() {
    let blobs = extract_blobs(&mask_from(10, 10, &[(1, 1), (2, 2), (3, 3)]));
    assert_eq!(blobs.len(), 1);
}

#[test]
fn empty_mask_has_no_blobs() {
    assert!(extract_blobs(&BinaryMask::new(5, 5)).is_empty());
}

#[test]
fn thin_bar_is_not_circular() {
    let cells: Vec<_> = (0..20).map(|x| (x + 2, 5)).collect();
    let blob = &extract_blobs(&mask_from(30, 10, &cells))[0];
    // 42 boundary edges: 4π·20 / (42·π/4)²
    let expected = 4.0 * std::f64::consts::PI * 20.0 / (42.0 * std::f64::consts::FRAC_PI_4).powi(2);
    assert!((blob.circularity - expected).abs() < 1e-12);
    assert!(blob.circularity < 0.3);
    let f = gray_frame(30, 10, 255);
    assert!(filter_blobs(vec![blob.clone()], &f, &DetectionParams::default()).is_empty());
}

#[test]
fn digital_disk_is_nearly_circular() {
    let cells: Vec<_> = (0..21)
        .flat_map(|y| (0..21).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            let (dx, dy) = (x as f64 - 10.0, y as f64 - 10.0);
            dx * dx + dy * dy <= 42.0
        })
        .collect();
    let blob = &extract_blobs(&mask_from(21, 21, &cells))[0];
    assert!(blob.circularity > 0.9, "{}", blob.circularity);
}

#[test]
fn size_gate() {
    let f = gray_frame(10, 10, 255);
    let blob = extract_blobs(&mask_from(10, 10, &[(5, 5)])).remove(0);
    let params = DetectionParams {
        min_area: 2,
        ..DetectionParams::default()
    };
    assert!(filter_blobs(vec![blob.clone()], &f, &params).is_empty());
    let params = DetectionParams {
        min_area: 1,
        ..DetectionParams::default()
    };
    assert_eq!(filter_blobs(vec![blob], &f, &params).len(), 1);
}

#[test]
fn brightness_gate_uses_centroid_value() {
    let mut f = gray_frame(10, 10, 100);
    let cells: Vec<_> = (4..7).flat_map(|y| (4..7).map(move |x| (x, y))).collect();
    let blob = extract_blobs(&mask_from(10, 10, &cells)).remove(0);
    assert!(filter_blobs(vec![blob.clone()], &f, &DetectionParams::default()).is_empty());
    paint(&mut f, 5, 5, [0, 255, 255]);
    assert_eq!(
        filter_blobs(vec![blob], &f, &DetectionParams::default()).len(),
        1
    );
}

fn blob_at(x: f64, y: f64) -> BlobCandidate {
    BlobCandidate {
        center: PixelCoord::new(x, y),
        area: 9,
        perimeter: 9.4,
        circularity: 1.0,
        pixels: vec![],
    }
}

#[test]
fn brightest_wins() {
    let mut f = gray_frame(30, 30, 0);
    paint(&mut f, 3, 3, [0, 255, 250]);
    paint(&mut f, 20, 20, [0, 255, 230]);
    let blobs = [blob_at(20.0, 20.0), blob_at(3.0, 3.0)];
    assert_eq!(
        select_brightest(&blobs, &f),
        Some(PixelCoord::new(3.0, 3.0))
    );
    assert_eq!(select_brightest(&[], &f), None);
}

#[test]
fn ties_prefer_smaller_row() {
    let mut f = gray_frame(30, 30, 0);
    paint(&mut f, 10, 10, [0, 255, 240]);
    paint(&mut f, 20, 5, [0, 255, 240]);
    // row 5 beats row 10 regardless of column and input order
    let a = [blob_at(10.0, 10.0), blob_at(20.0, 5.0)];
    let b = [blob_at(20.0, 5.0), blob_at(10.0, 10.0)];
    assert_eq!(select_brightest(&a, &f), Some(PixelCoord::new(20.0, 5.0)));
    assert_eq!(select_brightest(&b, &f), Some(PixelCoord::new(20.0, 5.0)));
    // same row: smaller column
    paint(&mut f, 4, 5, [0, 255, 240]);
    let c = [blob_at(20.0, 5.0), blob_at(4.0, 5.0)];
    assert_eq!(select_brightest(&c, &f), Some(PixelCoord::new(4.0, 5.0)));
}

#[test]
fn spotless_frame_detects_nothing() {
    let f = gray_frame(64, 48, 120);
    assert_eq!(detect_laser_point(&f, &DetectionParams::default()), None);
}
