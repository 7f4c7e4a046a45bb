//! Parking lot: deferred discussion items, reviewed and closed at the end of
//! the interview.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Phase;
use crate::Seat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParkingTag {
    General,
    /// Raised by the assessor to come back to a topic after follow-on questions.
    GoDeeper,
    /// Disputed interpretation of a preliminary finding.
    Interpretation,
    /// Suggested by a practitioner.
    Suggestion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParkingStatus {
    Open,
    Assigned,
    Resolved,
    AgreedToDisagree,
    AssessorDecided,
}

impl ParkingStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            ParkingStatus::Resolved | ParkingStatus::AgreedToDisagree | ParkingStatus::AssessorDecided
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaisedDuring {
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub story_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParkingItem {
    pub item_id: u32,
    pub text: String,
    pub tag: ParkingTag,
    pub raised_during: RaisedDuring,
    pub status: ParkingStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub owner: Option<Seat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence_note: Option<String>,
    pub consensus_reached: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParkingError {
    #[error("unknown parking item {0}")]
    UnknownItem(u32),
    #[error("parking item {0} is already closed")]
    AlreadyClosed(u32),
    #[error("parking item id {got} out of sequence (expected {expected})")]
    OutOfSequence { got: u32, expected: u32 },
    #[error("parking item text must not be empty")]
    EmptyText,
    #[error("a parking item cannot be closed as open or assigned")]
    NotAClosingStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParkingLot {
    items: Vec<ParkingItem>,
}

impl ParkingLot {
    pub fn items(&self) -> &[ParkingItem] {
        &self.items
    }

    pub fn get(&self, id: u32) -> Result<&ParkingItem, ParkingError> {
        self.items
            .iter()
            .find(|i| i.item_id == id)
            .ok_or(ParkingError::UnknownItem(id))
    }

    fn get_mut(&mut self, id: u32) -> Result<&mut ParkingItem, ParkingError> {
        self.items
            .iter_mut()
            .find(|i| i.item_id == id)
            .ok_or(ParkingError::UnknownItem(id))
    }

    pub fn next_id(&self) -> u32 {
        self.items.len() as u32 + 1
    }

    pub fn count(&self, status: ParkingStatus) -> usize {
        self.items.iter().filter(|i| i.status == status).count()
    }

    pub fn unsettled(&self) -> usize {
        self.items.iter().filter(|i| !i.status.is_terminal()).count()
    }

    pub fn check_add(&self, item_id: u32, text: &str) -> Result<(), ParkingError> {
        if item_id != self.next_id() {
            return Err(ParkingError::OutOfSequence {
                got: item_id,
                expected: self.next_id(),
            });
        }
        if text.trim().is_empty() {
            return Err(ParkingError::EmptyText);
        }
        Ok(())
    }

    pub fn add(
        &mut self,
        item_id: u32,
        text: &str,
        tag: ParkingTag,
        raised_during: RaisedDuring,
    ) -> Result<(), ParkingError> {
        self.check_add(item_id, text)?;
        self.items.push(ParkingItem {
            item_id,
            text: text.to_string(),
            tag,
            raised_during,
            status: ParkingStatus::Open,
            owner: None,
            evidence_note: None,
            consensus_reached: false,
        });
        Ok(())
    }

    pub fn check_assign(&self, item_id: u32) -> Result<(), ParkingError> {
        let item = self.get(item_id)?;
        if item.status.is_terminal() {
            return Err(ParkingError::AlreadyClosed(item_id));
        }
        Ok(())
    }

    pub fn assign(
        &mut self,
        item_id: u32,
        owner: Seat,
        evidence_note: Option<&str>,
    ) -> Result<(), ParkingError> {
        self.check_assign(item_id)?;
        let item = self.get_mut(item_id)?;
        item.status = ParkingStatus::Assigned;
        item.owner = Some(owner);
        if let Some(note) = evidence_note {
            item.evidence_note = Some(note.to_string());
        }
        Ok(())
    }

    pub fn check_close(&self, item_id: u32, status: ParkingStatus) -> Result<(), ParkingError> {
        if !status.is_terminal() {
            return Err(ParkingError::NotAClosingStatus);
        }
        self.check_assign(item_id)
    }

    /// Closing as `AssessorDecided` always records that no consensus was reached.
    pub fn close(
        &mut self,
        item_id: u32,
        status: ParkingStatus,
        consensus_reached: bool,
        evidence_note: Option<&str>,
    ) -> Result<(), ParkingError> {
        self.check_close(item_id, status)?;
        let item = self.get_mut(item_id)?;
        item.status = status;
        item.consensus_reached = consensus_reached && status != ParkingStatus::AssessorDecided;
        if let Some(note) = evidence_note {
            item.evidence_note = Some(note.to_string());
        }
        Ok(())
    }
}
