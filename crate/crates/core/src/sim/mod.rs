//! Synthetic bidirectional CSI for the two-room through-the-wall scene.

mod channel;
mod config;
mod occupancy;
mod session;

pub use channel::{simulate_frame, ComplexCsiFrame, Scene};
pub use config::SceneConfig;
pub use occupancy::{CaseLabel, OccupancyState, RoomState, StateTag};
pub use session::{frames_in, simulate_session, LabeledSession, ScenarioScript, Segment};
