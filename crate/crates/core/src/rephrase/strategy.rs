use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three rephrasing techniques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Repeat back the partner's main point to show it was understood.
    Restate,
    /// Affirm that it is legitimate to hold a different view.
    Validate,
    /// Soften the wording.
    Polite,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Restate, Strategy::Validate, Strategy::Polite];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Restate => "Restate",
            Strategy::Validate => "Validate",
            Strategy::Polite => "Polite",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Strategy::Restate => 0,
            Strategy::Validate => 1,
            Strategy::Polite => 2,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}
