//! Domain core for facilitated group appraisal interviews: practice
//! catalog, card voting, rating rules, the interview state machine, its
//! journal and the findings report.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod catalog;
pub mod journal;
pub mod projection;
pub mod rating;
pub mod report;
pub mod script;
pub mod session;
pub mod voting;

/// Practitioner seat, 0-based, in roster order. Journals identify
/// practitioners only by seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seat(pub u32);

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seat {}", self.0)
    }
}
