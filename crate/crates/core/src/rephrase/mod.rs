//! Rephrasing suggestions for intercepted messages.
//!
//! An intercepted message is sent to the provider once per [`Strategy`]; the
//! three answers are assembled into a [`RephraseOffer`] whose display order is
//! a uniformly drawn permutation. The author then picks a suggestion, sends
//! the original, or edits (see [`resolve_choice`]). Any provider failure after
//! retries aborts the offer and the original message goes out unchanged.

mod engine;
mod offer;
mod prompt;
pub mod provider;
mod strategy;

pub use engine::{OfferFailure, OfferRequest, RephraseEngine, RetryPolicy};
pub use offer::{
    choice_timeout, resolve_choice, Choice, ChoiceError, RephraseOffer, Resolution, Selection,
    Suggestion, ALL_ORDERS,
};
pub use prompt::{build_prompt, ContextLine, Exemplar, PromptConfig, Speaker, StrategyPrompt};
pub use provider::{
    CallContext, MockProvider, Provider, ProviderError, ProviderRequest, ProviderResponse,
    RefusingProvider, RemoteProvider, TimeoutProvider,
};
pub use strategy::Strategy;

/// Most recent delivered messages sent along as context.
pub const CONTEXT_WINDOW: usize = 6;
