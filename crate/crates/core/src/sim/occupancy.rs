use serde::{Deserialize, Serialize};
use std::fmt;

/// What one room contains at a given instant. At most one person per room.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomState {
    Empty,
    /// Standing still in the direct Tx-Rx line of sight.
    StaticLos,
    /// Standing still away from the direct path.
    StaticNlos,
    /// Walking.
    Dynamic,
}

impl RoomState {
    pub fn is_occupied(self) -> bool {
        self != RoomState::Empty
    }

    pub fn is_static(self) -> bool {
        matches!(self, RoomState::StaticLos | RoomState::StaticNlos)
    }

    pub(crate) fn position_index(self) -> u64 {
        match self {
            RoomState::StaticLos => 0,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupancyState {
    pub room1: RoomState,
    pub room2: RoomState,
}

impl OccupancyState {
    pub const fn new(room1: RoomState, room2: RoomState) -> Self {
        Self { room1, room2 }
    }

    pub fn rooms(&self) -> [RoomState; 2] {
        [self.room1, self.room2]
    }

    /// Four-case label: nobody, room 1 only, room 2 only, both rooms.
    pub fn case(&self) -> CaseLabel {
        match (self.room1.is_occupied(), self.room2.is_occupied()) {
            (false, false) => CaseLabel(0),
            (true, false) => CaseLabel(1),
            (false, true) => CaseLabel(2),
            (true, true) => CaseLabel(3),
        }
    }

    pub fn has_motion(&self) -> bool {
        self.room1 == RoomState::Dynamic || self.room2 == RoomState::Dynamic
    }
}

/// Zero-based class index. Displayed one-based (`Case 1` ... `Case 4`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseLabel(pub usize);

impl CaseLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case {}", self.0 + 1)
    }
}

/// Test condition a frame was recorded under.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    /// Occupants move and stand freely.
    #[default]
    Normal,
    /// Occupants only stand still.
    Static,
    /// Normal behaviour plus people moving outside both rooms.
    Interference,
}

impl StateTag {
    pub const ALL: [StateTag; 3] = [StateTag::Normal, StateTag::Static, StateTag::Interference];

    pub fn as_str(self) -> &'static str {
        match self {
            StateTag::Normal => "normal",
            StateTag::Static => "static",
            StateTag::Interference => "interference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}
