use borderforge::fsm::*;
use borderforge::grid::{CellValue, MapOrigin};
use borderforge::grid::{OccupancyGrid, WorldPoint};
use borderforge::robot::RobotPose;

fn session() -> TeachingSession {
    let g = OccupancyGrid::new(40, 40, 0.025, MapOrigin::default(), CellValue::Free).unwrap();
    TeachingSession::new(g, SessionConfig::default())
}

#[test]
fn start_next_enters_record_with_feedback() {
    let mut s = session();
    s.tick(RobotPose::new(0.5, 0.5, 0.0), None, 1.0);
    let out = s.handle_event(TransitionEvent::Next).unwrap();
    assert_eq!(
        out,
        EventOutcome::Changed {
            from: TeachingState::Start,
            to: TeachingState::Record
        }
    );
    assert_eq!(s.record_start(), Some(1.0));
    assert_eq!(s.recorded().len(), 1);
    assert_eq!(s.feedback().len(), 1);
    assert_eq!(s.feedback()[0].led, LedColor::Red);
    assert!(s.feedback()[0].beep);
}

#[test]
fn previous_in_start_is_silent() {
    let mut s = session();
    assert_eq!(
        s.handle_event(TransitionEvent::Previous).unwrap(),
        EventOutcome::Unchanged
    );
    assert!(s.feedback().is_empty());
}

#[test]
fn previous_from_record_restores_start() {
    let mut s = session();
    s.tick(
        RobotPose::new(0.2, 0.2, 0.0),
        Some(WorldPoint::new(0.3, 0.3)),
        0.5,
    );
    let before = s.observable();
    s.handle_event(TransitionEvent::Next).unwrap();
    s.tick(
        RobotPose::new(0.4, 0.2, 0.0),
        Some(WorldPoint::new(0.7, 0.3)),
        1.0,
    );
    assert_eq!(s.recorded().len(), 2);
    s.handle_event(TransitionEvent::Previous).unwrap();
    assert_eq!(s.observable(), before);
    assert_eq!(s.feedback().len(), 2);
}

#[test]
fn spacing_gate() {
    let mut s = session();
    s.tick(RobotPose::new(0.2, 0.2, 0.0), None, 0.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    s.tick(RobotPose::new(0.21, 0.2, 0.0), None, 0.05);
    assert_eq!(s.recorded().len(), 1);
    s.tick(RobotPose::new(0.30, 0.2, 0.0), None, 0.10);
    assert_eq!(s.recorded().len(), 2);
}

#[test]
fn keep_off_tracks_laser_without_recording() {
    let mut s = session();
    s.tick(RobotPose::new(0.2, 0.2, 0.0), None, 0.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    s.tick(RobotPose::new(0.5, 0.2, 0.0), None, 1.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    assert_eq!(s.drive_mode(), DriveMode::Rotate);
    let n = s.recorded().len();
    s.tick(
        RobotPose::new(0.7, 0.2, 0.0),
        Some(WorldPoint::new(0.6, 0.8)),
        2.0,
    );
    assert_eq!(s.recorded().len(), n);
    assert_eq!(s.last_laser_world(), Some(WorldPoint::new(0.6, 0.8)));
}

#[test]
fn finalize_without_history_fails_and_stays_in_keep_off() {
    let mut s = session();
    s.handle_event(TransitionEvent::Next).unwrap();
    s.handle_event(TransitionEvent::Next).unwrap();
    let err = s.handle_event(TransitionEvent::Next).unwrap_err();
    assert!(matches!(
        err.0,
        FinalizeError::InsufficientHistory { count: 0 }
    ));
    assert_eq!(s.state(), TeachingState::KeepOff);
    assert_eq!(s.feedback().len(), 2);
}

#[test]
fn finalize_without_keep_off_point_fails() {
    let mut s = session();
    s.tick(RobotPose::new(0.1, 0.5, 0.0), None, 0.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    s.tick(RobotPose::new(0.9, 0.5, 0.0), None, 1.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    let err = s.handle_event(TransitionEvent::Next).unwrap_err();
    assert!(matches!(err.0, FinalizeError::NoKeepOffPoint));
}

#[test]
fn finalized_border_becomes_the_next_prior() {
    let mut s = session();
    // horizontal line across a 1 m map, keep-off above
    s.tick(RobotPose::new(0.2, 0.5, 0.0), None, 0.0);
    s.handle_event(TransitionEvent::Next).unwrap();
    for k in 1..=30 {
        s.tick(
            RobotPose::new(0.2 + 0.02 * k as f64, 0.5, 0.0),
            None,
            0.1 * k as f64,
        );
    }
    s.handle_event(TransitionEvent::Next).unwrap();
    s.tick(
        RobotPose::new(0.8, 0.5, 0.0),
        Some(WorldPoint::new(0.5, 0.8)),
        3.5,
    );
    let out = s.handle_event(TransitionEvent::Next).unwrap();
    let EventOutcome::Finalized(done) = out else {
        panic!("expected finalization")
    };
    assert_eq!(s.state(), TeachingState::Start);
    assert!((done.record.teaching_time - 3.0).abs() < 1e-12);
    assert_eq!(s.map(), &done.posterior);
    assert_eq!(s.borders().len(), 1);
    let occupied = s.map().cells_with(CellValue::Occupied).len();
    assert_eq!(
        occupied,
        done.partition.connected.len() + done.partition.border_cells.len()
    );
    assert_eq!(s.feedback().len(), 3);
    s.check_consistency().unwrap();
}
