//! Simulation of teaching virtual borders to a mobile robot with a laser
//! pointer: rendering, laser detection, visual-servo following, the teaching
//! state machine, map integration and the evaluation harness.

pub mod border;
pub mod camera;
pub mod corpus;
pub mod detect;
pub mod eval;
pub mod fsm;
pub mod grid;
pub mod nav;
pub mod projection;
pub mod robot;
pub mod scenario;
pub mod scene;
pub mod sim;
