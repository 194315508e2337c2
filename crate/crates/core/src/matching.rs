//! Stance queues and dyad formation.
//!
//! Participants who want stricter gun laws are paired with participants from
//! the merged "about right" / "less strict" pool, first-come first-served on
//! both sides. Nobody is ever paired inside their own matching group.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Millis;
use crate::conversation::{ArmKind, TreatmentArm};
use crate::ids::ParticipantId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stance {
    MoreStrict,
    AboutRight,
    LessStrict,
}

impl Stance {
    pub const ALL: [Stance; 3] = [Stance::MoreStrict, Stance::AboutRight, Stance::LessStrict];

    pub fn group(self) -> MatchGroup {
        match self {
            Stance::MoreStrict => MatchGroup::MoreStrict,
            Stance::AboutRight | Stance::LessStrict => MatchGroup::NotMoreStrict,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::MoreStrict => "MoreStrict",
            Stance::AboutRight => "AboutRight",
            Stance::LessStrict => "LessStrict",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown stance {0:?}")]
pub struct UnknownStance(pub String);

impl FromStr for Stance {
    type Err = UnknownStance;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "MoreStrict" => Ok(Stance::MoreStrict),
            "AboutRight" => Ok(Stance::AboutRight),
            "LessStrict" => Ok(Stance::LessStrict),
            other => Err(UnknownStance(other.to_owned())),
        }
    }
}

/// The two sides of the matching market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchGroup {
    MoreStrict,
    NotMoreStrict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub participant: ParticipantId,
    pub stance: Stance,
    pub enqueued_at: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("participant {0} is already queued")]
    AlreadyQueued(ParticipantId),
}

/// A formed dyad: the `MoreStrict` entry first, the pool entry second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub more_strict: QueueEntry,
    pub other: QueueEntry,
}

impl Pair {
    pub fn participants(&self) -> [ParticipantId; 2] {
        [
            self.more_strict.participant.clone(),
            self.other.participant.clone(),
        ]
    }
}

#[derive(Debug, Default, Clone)]
pub struct Matcher {
    more_strict: VecDeque<QueueEntry>,
    pool: VecDeque<QueueEntry>,
}

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_queued(&self, who: &ParticipantId) -> bool {
        self.more_strict
            .iter()
            .chain(self.pool.iter())
            .any(|e| &e.participant == who)
    }

    pub fn len(&self) -> usize {
        self.more_strict.len() + self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn enqueue(&mut self, entry: QueueEntry) -> Result<(), MatchError> {
        if self.is_queued(&entry.participant) {
            return Err(MatchError::AlreadyQueued(entry.participant));
        }
        match entry.stance.group() {
            MatchGroup::MoreStrict => self.more_strict.push_back(entry),
            MatchGroup::NotMoreStrict => self.pool.push_back(entry),
        }
        Ok(())
    }

    /// Pops the oldest entry of each side if both are non-empty.
    pub fn try_match(&mut self) -> Option<Pair> {
        if self.more_strict.is_empty() || self.pool.is_empty() {
            return None;
        }
        let more_strict = self.more_strict.pop_front()?;
        let other = self.pool.pop_front()?;
        Some(Pair { more_strict, other })
    }

    pub fn remove(&mut self, who: &ParticipantId) -> Option<QueueEntry> {
        for queue in [&mut self.more_strict, &mut self.pool] {
            if let Some(pos) = queue.iter().position(|e| &e.participant == who) {
                return queue.remove(pos);
            }
        }
        None
    }

    /// Removes and returns entries that have waited at least `timeout` ms,
    /// oldest first.
    pub fn expire(&mut self, now: Millis, timeout: Millis) -> Vec<QueueEntry> {
        let mut expired = Vec::new();
        for queue in [&mut self.more_strict, &mut self.pool] {
            queue.retain(|e| {
                let keep = now.saturating_sub(e.enqueued_at) < timeout;
                if !keep {
                    expired.push(e.clone());
                }
                keep
            });
        }
        expired.sort_by(|a, b| {
            a.enqueued_at
                .cmp(&b.enqueued_at)
                .then_with(|| a.participant.cmp(&b.participant))
        });
        expired
    }

    /// Earliest enqueue time still waiting, for deadline scheduling.
    pub fn oldest_enqueued_at(&self) -> Option<Millis> {
        self.more_strict
            .iter()
            .chain(self.pool.iter())
            .map(|e| e.enqueued_at)
            .min()
    }
}

/// Fair coin for the arm, fair coin for the designated participant.
pub fn assign_arm<R: Rng + ?Sized>(pair: &Pair, rng: &mut R) -> TreatmentArm {
    let kind = if rng.random_bool(0.5) {
        ArmKind::Treated
    } else {
        ArmKind::Control
    };
    let designated = if rng.random_bool(0.5) {
        pair.more_strict.participant.clone()
    } else {
        pair.other.participant.clone()
    };
    TreatmentArm { kind, designated }
}
