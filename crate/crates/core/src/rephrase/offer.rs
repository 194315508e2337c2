use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::strategy::Strategy;
use crate::clock::Millis;
use crate::conversation::Provenance;
use crate::ids::{MessageId, OfferId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub strategy: Strategy,
    pub text: String,
}

/// The six orderings of the three strategies.
pub const ALL_ORDERS: [[Strategy; 3]; 6] = {
    use Strategy::*;
    [
        [Restate, Validate, Polite],
        [Restate, Polite, Validate],
        [Validate, Restate, Polite],
        [Validate, Polite, Restate],
        [Polite, Restate, Validate],
        [Polite, Validate, Restate],
    ]
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RephraseOffer {
    pub offer_id: OfferId,
    pub message_id: MessageId,
    pub original_text: String,
    /// One per strategy, in `Strategy::ALL` order.
    pub suggestions: Vec<Suggestion>,
    pub display_order: [Strategy; 3],
    pub created_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OfferError {
    #[error("an offer needs exactly one suggestion per strategy")]
    IncompleteSuggestions,
    #[error("suggestion for {0} is empty")]
    EmptySuggestion(Strategy),
}

impl RephraseOffer {
    /// Builds an offer and draws its display order uniformly from the six
    /// permutations.
    pub fn assemble<R: Rng + ?Sized>(
        offer_id: OfferId,
        message_id: MessageId,
        original_text: String,
        suggestions: Vec<Suggestion>,
        rng: &mut R,
        created_at: Millis,
    ) -> Result<Self, OfferError> {
        let display_order = ALL_ORDERS[rng.random_range(0..ALL_ORDERS.len())];
        Self::with_order(
            offer_id,
            message_id,
            original_text,
            suggestions,
            display_order,
            created_at,
        )
    }

    pub fn with_order(
        offer_id: OfferId,
        message_id: MessageId,
        original_text: String,
        mut suggestions: Vec<Suggestion>,
        display_order: [Strategy; 3],
        created_at: Millis,
    ) -> Result<Self, OfferError> {
        suggestions.sort_by_key(|s| s.strategy.index());
        let strategies: Vec<Strategy> = suggestions.iter().map(|s| s.strategy).collect();
        if strategies != Strategy::ALL {
            return Err(OfferError::IncompleteSuggestions);
        }
        let mut sorted_order = display_order;
        sorted_order.sort_by_key(|s| s.index());
        if sorted_order != Strategy::ALL {
            return Err(OfferError::IncompleteSuggestions);
        }
        if let Some(empty) = suggestions.iter().find(|s| s.text.trim().is_empty()) {
            return Err(OfferError::EmptySuggestion(empty.strategy));
        }
        Ok(Self {
            offer_id,
            message_id,
            original_text,
            suggestions,
            display_order,
            created_at,
        })
    }

    pub fn suggestion(&self, strategy: Strategy) -> &Suggestion {
        &self.suggestions[strategy.index()]
    }

    /// Suggestions as the author sees them.
    pub fn displayed(&self) -> impl Iterator<Item = &Suggestion> + '_ {
        self.display_order.iter().map(|s| self.suggestion(*s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Selection {
    Suggestion(Strategy),
    Original,
    Edited(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub offer_id: OfferId,
    pub selection: Selection,
}

/// Finalized text and provenance of an intercepted message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub final_text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChoiceError {
    #[error("choice refers to offer {got}, live offer is {live}")]
    StaleOffer { live: OfferId, got: OfferId },
    #[error("edited text is empty")]
    EmptyEdit,
}

pub fn resolve_choice(offer: &RephraseOffer, choice: &Choice) -> Result<Resolution, ChoiceError> {
    if choice.offer_id != offer.offer_id {
        return Err(ChoiceError::StaleOffer {
            live: offer.offer_id.clone(),
            got: choice.offer_id.clone(),
        });
    }
    Ok(match &choice.selection {
        Selection::Suggestion(strategy) => Resolution {
            final_text: offer.suggestion(*strategy).text.clone(),
            provenance: Provenance::AcceptedSuggestion(*strategy),
        },
        Selection::Original => Resolution {
            final_text: offer.original_text.clone(),
            provenance: Provenance::Original,
        },
        Selection::Edited(text) => {
            if text.trim().is_empty() {
                return Err(ChoiceError::EmptyEdit);
            }
            Resolution {
                final_text: text.clone(),
                provenance: Provenance::Edited,
            }
        }
    })
}

/// Forces an unanswered offer to the original text once `deadline_ms` has
/// elapsed since it was shown.
pub fn choice_timeout(offer: &RephraseOffer, now: Millis, deadline_ms: Millis) -> Option<Resolution> {
    (now.saturating_sub(offer.created_at) >= deadline_ms).then(|| Resolution {
        final_text: offer.original_text.clone(),
        provenance: Provenance::Original,
    })
}
