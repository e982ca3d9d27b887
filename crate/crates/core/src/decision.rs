use serde::{Deserialize, Serialize};

/// Number of discrete supervisor decisions (the policy's output dimension).
pub const ACTION_DIM: usize = 3;

/// A lane-change decision issued by the supervisor each simulator step.
///
/// One-hot layout is `[ChangeLeft, Keep, ChangeRight]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    ChangeLeft,
    Keep,
    ChangeRight,
}

impl Decision {
    pub const ALL: [Decision; ACTION_DIM] =
        [Decision::ChangeLeft, Decision::Keep, Decision::ChangeRight];

    pub fn index(self) -> usize {
        match self {
            Decision::ChangeLeft => 0,
            Decision::Keep => 1,
            Decision::ChangeRight => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Decision> {
        Self::ALL.get(index).copied()
    }

    pub fn one_hot(self) -> [f64; ACTION_DIM] {
        let mut v = [0.0; ACTION_DIM];
        v[self.index()] = 1.0;
        v
    }

    /// Lateral direction in lane-index units: left is toward lane 0.
    pub fn lane_step(self) -> i64 {
        match self {
            Decision::ChangeLeft => -1,
            Decision::Keep => 0,
            Decision::ChangeRight => 1,
        }
    }

    /// Argmax over logits with tie-break precedence Keep > ChangeLeft > ChangeRight.
    pub fn from_logits(logits: &[f64]) -> Decision {
        debug_assert_eq!(logits.len(), ACTION_DIM);
        let mut best = Decision::Keep;
        for candidate in [Decision::ChangeLeft, Decision::ChangeRight] {
            if logits[candidate.index()] > logits[best.index()] {
                best = candidate;
            }
        }
        best
    }
}
