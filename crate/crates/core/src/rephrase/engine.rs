use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::offer::{OfferError, RephraseOffer, Suggestion};
use super::prompt::{build_prompt, ContextLine, PromptConfig, Speaker};
use super::provider::{CallContext, Provider, ProviderError, ProviderRequest};
use super::strategy::Strategy;
use super::CONTEXT_WINDOW;
use crate::clock::{Clock, Millis};
use crate::conversation::ConversationState;
use crate::ids::{MessageId, OfferId, ParticipantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub retries: u32,
    pub call_timeout_ms: Millis,
    /// First backoff; doubles on each retry.
    pub backoff_base_ms: Millis,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 2,
            call_timeout_ms: 10_000,
            backoff_base_ms: 500,
        }
    }
}

impl RetryPolicy {
    /// Upper bound on the time one offer may take: every strategy spending
    /// every attempt at the full timeout.
    pub fn offer_budget_ms(&self) -> Millis {
        Strategy::ALL.len() as Millis * Millis::from(self.retries + 1) * self.call_timeout_ms
    }
}

/// What the engine needs to produce suggestions for one intercepted message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferRequest {
    pub message_id: MessageId,
    pub original: String,
    pub context: Vec<ContextLine>,
}

impl OfferRequest {
    /// Request for `message_id` with the last delivered messages as context.
    pub fn from_state(
        state: &ConversationState,
        message_id: &MessageId,
        author: &ParticipantId,
        original: &str,
    ) -> Self {
        let context = state
            .recent_delivered(CONTEXT_WINDOW)
            .into_iter()
            .map(|m| ContextLine {
                speaker: if &m.author == author {
                    Speaker::Author
                } else {
                    Speaker::Partner
                },
                text: m.final_text.clone(),
            })
            .collect();
        Self {
            message_id: message_id.clone(),
            original: original.to_owned(),
            context,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum OfferFailure {
    #[error("{strategy} failed after {attempts} attempts: {last_error}")]
    Provider {
        strategy: Strategy,
        attempts: u32,
        last_error: String,
    },
    #[error("offer budget exhausted before {strategy} completed")]
    BudgetExhausted { strategy: Strategy },
    #[error("invalid offer: {0}")]
    Invalid(String),
}

impl From<OfferError> for OfferFailure {
    fn from(value: OfferError) -> Self {
        OfferFailure::Invalid(value.to_string())
    }
}

pub struct RephraseEngine {
    provider: Arc<dyn Provider>,
    prompts: PromptConfig,
    policy: RetryPolicy,
    max_tokens: u32,
}

impl RephraseEngine {
    pub fn new(provider: Arc<dyn Provider>, prompts: PromptConfig, policy: RetryPolicy) -> Self {
        Self {
            provider,
            prompts,
            policy,
            max_tokens: 160,
        }
    }

    pub fn policy(&self) -> RetryPolicy {
        self.policy
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// One provider call per strategy, in `Strategy::ALL` order. The first
    /// strategy that fails after retries aborts the whole offer. Total time
    /// on `clock` never exceeds [`RetryPolicy::offer_budget_ms`].
    pub fn fetch_suggestions(
        &self,
        request: &OfferRequest,
        clock: &dyn Clock,
    ) -> Result<Vec<Suggestion>, OfferFailure> {
        let deadline = clock.now_ms() + self.policy.offer_budget_ms();
        Strategy::ALL
            .iter()
            .map(|&strategy| {
                self.call_with_retries(strategy, request, clock, deadline)
                    .map(|text| Suggestion { strategy, text })
            })
            .collect()
    }

    fn call_with_retries(
        &self,
        strategy: Strategy,
        request: &OfferRequest,
        clock: &dyn Clock,
        deadline: Millis,
    ) -> Result<String, OfferFailure> {
        let provider_request = ProviderRequest {
            strategy,
            original: request.original.clone(),
            context: request.context.clone(),
            max_tokens: self.max_tokens,
            prompt: build_prompt(&self.prompts, strategy, &request.original, &request.context),
        };
        let mut last_error = ProviderError::Timeout;
        let mut backoff = self.policy.backoff_base_ms;
        for attempt in 0..=self.policy.retries {
            if attempt > 0 {
                let remaining = deadline.saturating_sub(clock.now_ms());
                clock.sleep_ms(backoff.min(remaining));
                backoff = backoff.saturating_mul(2);
            }
            let remaining = deadline.saturating_sub(clock.now_ms());
            if remaining == 0 {
                return Err(OfferFailure::BudgetExhausted { strategy });
            }
            let call = CallContext {
                timeout_ms: self.policy.call_timeout_ms.min(remaining),
                clock,
            };
            match self.provider.complete(&provider_request, &call) {
                Ok(response) if !response.text.trim().is_empty() => return Ok(response.text),
                Ok(_) => last_error = ProviderError::Refusal,
                Err(e) => last_error = e,
            }
            tracing::debug!(%strategy, attempt, error = %last_error, "provider attempt failed");
        }
        Err(OfferFailure::Provider {
            strategy,
            attempts: self.policy.retries + 1,
            last_error: last_error.to_string(),
        })
    }

    /// Fetches suggestions and assembles an offer with a random display order.
    pub fn generate_offer<R: Rng + ?Sized>(
        &self,
        offer_id: OfferId,
        request: &OfferRequest,
        rng: &mut R,
        clock: &dyn Clock,
    ) -> Result<RephraseOffer, OfferFailure> {
        let suggestions = self.fetch_suggestions(request, clock)?;
        Ok(RephraseOffer::assemble(
            offer_id,
            request.message_id.clone(),
            request.original.clone(),
            suggestions,
            rng,
            clock.now_ms(),
        )?)
    }
}
