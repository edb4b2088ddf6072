mod common;

use borderforge::camera::{CameraIntrinsics, CameraMount};
use borderforge::corpus::{distractor_case, spot_case, spotless_case, CorpusCase};
use borderforge::detect::{detect_with_details, select_brightest, DetectionParams};
use borderforge::scene::{render_frame, RenderedFrame};
use common::Camera;
use proptest::prelude::*;

fn render(case: &CorpusCase, intr: &CameraIntrinsics) -> RenderedFrame {
    render_frame(&case.scene, intr, &case.camera)
}

fn truth_pixel(case: &CorpusCase, intr: &CameraIntrinsics) -> (f64, f64) {
    let c = &case.camera;
    let cam = Camera::new(intr, [c.x, c.y, c.height], c.yaw, c.pitch);
    let spot = case.scene.laser.position.expect("spot case");
    cam.project([spot.x, spot.y, 0.0])
        .expect("spot in front of the camera")
}

#[test]
fn spot_corpus_is_detected_with_subpixel_median_error() {
    let intr = CameraIntrinsics::default();
    let mount = CameraMount::default();
    let params = DetectionParams::default();
    let n = 1000;
    let mut errors = Vec::new();
    for seed in 0..n {
        let case = spot_case(seed, &intr, &mount, 0.5, 3.0);
        let frame = render(&case, &intr);
        if let Some(p) = detect_with_details(&frame, &params).point {
            let (u, v) = truth_pixel(&case, &intr);
            errors.push((p.x - u).hypot(p.y - v));
        }
    }
    let rate = errors.len() as f64 / n as f64;
    errors.sort_by(f64::total_cmp);
    let median = errors[errors.len() / 2];
    assert!(rate >= 0.99, "detection rate {rate}");
    assert!(median <= 1.0, "median error {median} px");
    // The detection must be the spot, never something else in the frame.
    assert!(
        errors.last().copied().unwrap_or(0.0) < 3.0,
        "worst error {:?}",
        errors.last()
    );
}

#[test]
fn distractor_corpus_yields_no_detection() {
    let intr = CameraIntrinsics::default();
    let mount = CameraMount::default();
    let params = DetectionParams::default();
    for seed in 0..500 {
        let case = distractor_case(10_000 + seed, &intr, &mount);
        let out = detect_with_details(&render(&case, &intr), &params);
        assert!(
            out.point.is_none(),
            "seed {seed}: {:?} from {:?}",
            out.point,
            case.scene.distractors
        );
    }
}

#[test]
fn spotless_floors_yield_no_detection() {
    let intr = CameraIntrinsics::default();
    let mount = CameraMount::default();
    let params = DetectionParams::default();
    for seed in 0..100 {
        let case = spotless_case(20_000 + seed, &mount);
        let out = detect_with_details(&render(&case, &intr), &params);
        assert!(out.point.is_none() && out.kept.is_empty(), "seed {seed}");
    }
}

#[test]
fn pipeline_stages_are_nested() {
    let intr = CameraIntrinsics::default();
    let mount = CameraMount::default();
    let params = DetectionParams::default();
    for seed in 0..60 {
        let case = if seed % 2 == 0 {
            spot_case(seed, &intr, &mount, 0.5, 3.0)
        } else {
            distractor_case(seed, &intr, &mount)
        };
        let out = detect_with_details(&render(&case, &intr), &params);
        for k in &out.kept {
            assert!(out
                .blobs
                .iter()
                .any(|b| b.center == k.center && b.area == k.area));
        }
        assert!(out.blobs.iter().map(|b| b.area).sum::<usize>() <= out.mask_pixels);
        if let Some(i) = out.selected {
            assert!(i < out.kept.len());
            assert_eq!(
                select_brightest(&out.kept, &render(&case, &intr)),
                Some(out.kept[i].center)
            );
        }
        assert_eq!(out.point.is_some(), out.selected.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn brightest_selection_ignores_input_order(seed in 0u64..500, rot in 0usize..16, rev in any::<bool>()) {
        let intr = CameraIntrinsics::default();
        let case = distractor_case(seed, &intr, &CameraMount::default());
        let frame = render(&case, &intr);
        let blobs = detect_with_details(&frame, &DetectionParams::default()).blobs;
        let mut shuffled = blobs.clone();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
        }
        if rev {
            shuffled.reverse();
        }
        prop_assert_eq!(select_brightest(&blobs, &frame), select_brightest(&shuffled, &frame));
    }
}
