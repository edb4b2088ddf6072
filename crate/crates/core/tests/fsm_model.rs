use borderforge::fsm::{
    EventOutcome, ObservableSession, SessionConfig, TeachingSession, TeachingState, TransitionEvent,
};
use borderforge::grid::{CellValue, MapOrigin, OccupancyGrid, WorldPoint};
use borderforge::robot::RobotPose;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symbol {
    Next,
    Previous,
    Reset,
}

const TICKS_BETWEEN_EVENTS: usize = 4;
const DT: f64 = 0.05;

/// Drives the robot north along x = 0.5 with the laser alternating sides of
/// its track, so that finalization can both succeed and fail.
struct Driver {
    session: TeachingSession,
    tick: usize,
}

impl Driver {
    fn new() -> Self {
        let map = OccupancyGrid::new(40, 40, 0.025, MapOrigin::default(), CellValue::Free).unwrap();
        Self {
            session: TeachingSession::new(map, SessionConfig::default()),
            tick: 0,
        }
    }

    fn advance(&mut self) {
        for _ in 0..TICKS_BETWEEN_EVENTS {
            self.tick += 1;
            let y = 0.05 + 0.03 * self.tick as f64;
            let side = if (self.tick / 7) % 2 == 0 { 0.2 } else { 0.8 };
            let laser = (self.tick % 3 != 0).then(|| WorldPoint::new(side, y));
            self.session.tick(
                RobotPose::new(0.5, y, std::f64::consts::FRAC_PI_2),
                laser,
                self.tick as f64 * DT,
            );
        }
    }
}

fn expected_state(from: TeachingState, symbol: Symbol, finalized: bool) -> TeachingState {
    use TeachingState::*;
    match (from, symbol) {
        (_, Symbol::Reset) => Start,
        (Start, Symbol::Next) => Record,
        (Start, Symbol::Previous) => Start,
        (Record, Symbol::Next) => KeepOff,
        (Record, Symbol::Previous) => Start,
        (KeepOff, Symbol::Previous) => Record,
        (KeepOff, Symbol::Next) if finalized => Start,
        (KeepOff, Symbol::Next) => KeepOff,
    }
}

#[derive(Default)]
struct Tally {
    runs: usize,
    finalized: usize,
    failed_finalize: usize,
    restored: usize,
}

fn check_string(symbols: &[Symbol], tally: &mut Tally) {
    let mut d = Driver::new();
    let mut before_record: Option<ObservableSession> = None;
    let mut state_changes = 0;
    d.session.check_consistency().unwrap();
    for (k, &sym) in symbols.iter().enumerate() {
        d.advance();
        let from = d.session.state();
        if from == TeachingState::Start && sym == Symbol::Next {
            before_record = Some(d.session.observable());
        }
        let feedback_before = d.session.feedback().len();
        let finalized = match sym {
            Symbol::Next => match d.session.handle_event(TransitionEvent::Next) {
                Ok(EventOutcome::Finalized(_)) => {
                    tally.finalized += 1;
                    true
                }
                Ok(_) => false,
                Err(_) => {
                    tally.failed_finalize += 1;
                    false
                }
            },
            Symbol::Previous => {
                d.session
                    .handle_event(TransitionEvent::Previous)
                    .expect("previous never fails");
                false
            }
            Symbol::Reset => {
                d.session.reset();
                false
            }
        };
        let to = d.session.state();
        let ctx = format!("{symbols:?} at {k}");
        assert_eq!(to, expected_state(from, sym, finalized), "{ctx}");
        if to != from {
            state_changes += 1;
        }
        assert_eq!(
            d.session.feedback().len() - feedback_before,
            usize::from(to != from),
            "{ctx}: feedback for {from:?} -> {to:?}"
        );
        d.session
            .check_consistency()
            .unwrap_or_else(|e| panic!("{ctx}: {e}"));

        // Abandoning a recording restores the session seen before it began.
        if from == TeachingState::Record && to == TeachingState::Start
            || from != TeachingState::Start && sym == Symbol::Reset
        {
            assert_eq!(Some(d.session.observable()), before_record, "{ctx}");
            tally.restored += 1;
        }
        if let Some(s) = d.session.record_start() {
            let end = d.session.record_end().unwrap_or(d.session.now());
            assert!(
                d.session
                    .recorded()
                    .samples()
                    .iter()
                    .all(|(t, _)| *t >= s && *t <= end),
                "{ctx}"
            );
            assert!(end >= s);
        } else {
            assert!(d.session.recorded().is_empty(), "{ctx}");
        }
        if !d.session.recorded().is_empty() {
            assert_ne!(d.session.state(), TeachingState::Start, "{ctx}");
        }
        for fb in d.session.feedback() {
            assert_eq!(fb.led, fb.state.led());
            assert!(fb.beep);
        }
    }
    assert_eq!(d.session.feedback().len(), state_changes);
    tally.runs += 1;
}

fn all_strings(alphabet: &[Symbol], max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s: &Vec<Symbol>| {
                alphabet.iter().map(move |&a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

#[test]
fn every_next_previous_string_up_to_six_is_consistent() {
    let strings = all_strings(&[Symbol::Next, Symbol::Previous], 6);
    assert_eq!(strings.len(), 127);
    let mut tally = Tally::default();
    for s in &strings {
        check_string(s, &mut tally);
    }
    assert_eq!(tally.runs, 127);
    assert!(tally.finalized > 0 && tally.failed_finalize > 0 && tally.restored > 0);
}

#[test]
fn strings_with_reset_up_to_five_are_consistent() {
    let mut tally = Tally::default();
    for s in &all_strings(&[Symbol::Next, Symbol::Previous, Symbol::Reset], 5) {
        check_string(s, &mut tally);
    }
    assert!(tally.finalized > 0 && tally.restored > 0);
}
