//! A premise ⇒ hypothesis pair as seen by scorers.

use crate::discovery::ScoreTriple;
use crate::path::Relation;
use crate::teg::SlotType;

/// Both paths are read from their own argument-1 end. A `reversed` flag says
/// that the path's argument 1 is bound to the candidate's argument B rather
/// than A.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub premise: Relation,
    pub hypothesis: Relation,
    pub premise_types: (SlotType, SlotType),
    pub hypothesis_types: (SlotType, SlotType),
    pub premise_reversed: bool,
    pub hypothesis_reversed: bool,
    pub scores: Option<ScoreTriple>,
}

impl Candidate {
    pub fn new(id: impl Into<String>, premise: Relation, hypothesis: Relation) -> Self {
        Candidate {
            id: id.into(),
            premise,
            hypothesis,
            premise_types: (SlotType::Top, SlotType::Top),
            hypothesis_types: (SlotType::Top, SlotType::Top),
            premise_reversed: false,
            hypothesis_reversed: false,
            scores: None,
        }
    }

    /// Types of arguments A and B, taken from the premise.
    pub fn signature(&self) -> (String, String) {
        let (s, u) = &self.premise_types;
        if self.premise_reversed {
            (u.to_string(), s.to_string())
        } else {
            (s.to_string(), u.to_string())
        }
    }
}
