use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ReviewError;

/// Reviewer-facing meaning of each code, indexed by `code - 1`. The UI
/// renders these strings unmodified.
pub const CODE_DESCRIPTIONS: [&str; 5] = [
    "The relation clearly exists.",
    "It is not clear whether the relation exists, but it is plausible.",
    "It is not clear whether the relation exists, but the chance is low.",
    "The relation clearly does not exist.",
    "No statement about the relation can be made.",
];

/// Expert verdict on a candidate relation, 1 (clearly exists) to 5 (no
/// statement possible).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct RatingCode(u8);

impl RatingCode {
    pub const ALL: [RatingCode; 5] = [RatingCode(1), RatingCode(2), RatingCode(3), RatingCode(4), RatingCode(5)];
    pub const CLEARLY_EXISTS: RatingCode = RatingCode(1);

    pub fn new(code: i64) -> Result<Self, ReviewError> {
        match code {
            1..=5 => Ok(RatingCode(code as u8)),
            other => Err(ReviewError::InvalidCode(other)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Position in per-code count arrays.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn description(self) -> &'static str {
        CODE_DESCRIPTIONS[self.index()]
    }
}

impl TryFrom<i64> for RatingCode {
    type Error = ReviewError;
    fn try_from(code: i64) -> Result<Self, Self::Error> {
        RatingCode::new(code)
    }
}

impl From<RatingCode> for u8 {
    fn from(code: RatingCode) -> u8 {
        code.0
    }
}

impl fmt::Display for RatingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_one_to_five_are_codes() {
        for c in 1..=5 {
            assert_eq!(RatingCode::new(c).unwrap().get() as i64, c);
        }
        for c in [0, 6, -1, 255] {
            assert!(matches!(RatingCode::new(c), Err(ReviewError::InvalidCode(x)) if x == c));
        }
    }

    #[test]
    fn serde_rejects_out_of_range() {
        assert_eq!(serde_json::from_str::<RatingCode>("2").unwrap(), RatingCode(2));
        assert!(serde_json::from_str::<RatingCode>("6").is_err());
        assert_eq!(serde_json::to_string(&RatingCode(4)).unwrap(), "4");
    }

    #[test]
    fn descriptions_line_up_with_codes() {
        assert_eq!(RatingCode::CLEARLY_EXISTS.description(), "The relation clearly exists.");
        assert_eq!(RatingCode(5).description(), "No statement about the relation can be made.");
    }
}
