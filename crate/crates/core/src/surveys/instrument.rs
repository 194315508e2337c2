use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::ParticipantId;

/// Item id of the stance question on the pre-survey.
pub const STANCE_ITEM: &str = "stance";

/// Answer options of the stance question, in display order.
pub const STANCE_OPTIONS: [&str; 3] = [
    "Gun laws should be MORE strict than they are today",
    "Gun laws are about right",
    "Gun laws should be LESS strict than they are today",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstrumentId {
    PreSurvey,
    PostSurvey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Likert7,
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    ConvQuality,
    DemReciprocity,
    PolicyAttitude,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub wording: String,
    pub scale: Scale,
    #[serde(default)]
    pub index: Option<IndexKind>,
    #[serde(default)]
    pub reverse: bool,
    /// Stand-in wording; replace from the full item battery before fielding.
    #[serde(default)]
    pub placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instrument {
    pub id: InstrumentId,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Likert(u8),
    Choice(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub participant: ParticipantId,
    pub wave: InstrumentId,
    pub answers: BTreeMap<String, Answer>,
}

#[derive(Debug, Error)]
pub enum InstrumentError {
    #[error("instrument file: {0}")]
    Io(#[from] std::io::Error),
    #[error("instrument file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn likert(id: &str, wording: &str, index: IndexKind) -> Item {
    Item {
        id: id.to_owned(),
        wording: wording.to_owned(),
        scale: Scale::Likert7,
        index: Some(index),
        reverse: false,
        placeholder: false,
    }
}

fn placeholder(mut item: Item) -> Item {
    item.placeholder = true;
    item
}

fn reversed(mut item: Item) -> Item {
    item.reverse = true;
    item
}

fn policy_items() -> Vec<Item> {
    use IndexKind::PolicyAttitude as P;
    vec![
        placeholder(likert(
            "pa1",
            "All private gun sales should require a background check.",
            P,
        )),
        placeholder(likert(
            "pa2",
            "Courts should be able to temporarily remove guns from people judged a danger to themselves or others.",
            P,
        )),
        placeholder(reversed(likert(
            "pa3",
            "Adults should be able to carry a concealed gun without a permit.",
            P,
        ))),
    ]
}

impl Instrument {
    pub fn default_pre() -> Self {
        let mut items = vec![Item {
            id: STANCE_ITEM.to_owned(),
            wording: "Which of the following statements comes closest to your overall view of \
                      gun laws in the United States?"
                .to_owned(),
            scale: Scale::Categorical(STANCE_OPTIONS.iter().map(|s| s.to_string()).collect()),
            index: None,
            reverse: false,
            placeholder: false,
        }];
        items.extend(policy_items());
        Self {
            id: InstrumentId::PreSurvey,
            items,
        }
    }

    pub fn default_post() -> Self {
        use IndexKind::{ConvQuality as Q, DemReciprocity as D};
        let mut items = vec![
            likert("cq1", "I felt heard and understood by my partner.", Q),
            placeholder(likert("cq2", "My partner was respectful toward me.", Q)),
            placeholder(likert("cq3", "I understood my partner's point of view.", Q)),
            placeholder(likert("cq4", "I would be willing to talk with my partner again.", Q)),
            placeholder(reversed(likert("cq5", "The conversation felt hostile.", Q))),
            likert(
                "dr1",
                "I respect the opinions of people who disagree with me on gun regulation.",
                D,
            ),
            likert(
                "dr2",
                "It is important to understand people who disagree with me on gun regulation \
                 by imagining how things look from their perspective.",
                D,
            ),
            placeholder(likert(
                "dr3",
                "People who disagree with me on gun regulation should be free to advocate for their views.",
                D,
            )),
            placeholder(reversed(likert(
                "dr4",
                "People who disagree with me on gun regulation do not deserve a say in policy.",
                D,
            ))),
        ];
        items.extend(policy_items());
        Self {
            id: InstrumentId::PostSurvey,
            items,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, InstrumentError> {
        let instrument: Self = toml::from_str(s)?;
        instrument.validate()?;
        Ok(instrument)
    }

    pub fn load(path: &Path) -> Result<Self, InstrumentError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn index_items(&self, kind: IndexKind) -> Vec<&Item> {
        self.items.iter().filter(|i| i.index == Some(kind)).collect()
    }

    /// Structural checks for the two known instruments.
    pub fn validate(&self) -> Result<(), InstrumentError> {
        let mut ids: Vec<&str> = self.items.iter().map(|i| i.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(InstrumentError::Invalid("duplicate item id".into()));
        }
        for item in &self.items {
            if item.index.is_some() && item.scale != Scale::Likert7 {
                return Err(InstrumentError::Invalid(format!(
                    "index item {} must be Likert-7",
                    item.id
                )));
            }
        }
        match self.id {
            InstrumentId::PreSurvey => {
                let stance = self.item(STANCE_ITEM).ok_or_else(|| {
                    InstrumentError::Invalid("pre-survey lacks the stance item".into())
                })?;
                let expected: Vec<String> = STANCE_OPTIONS.iter().map(|s| s.to_string()).collect();
                if stance.scale != Scale::Categorical(expected) {
                    return Err(InstrumentError::Invalid(
                        "stance item must offer exactly the three stance options".into(),
                    ));
                }
            }
            InstrumentId::PostSurvey => {
                let q = self.index_items(IndexKind::ConvQuality).len();
                let d = self.index_items(IndexKind::DemReciprocity).len();
                if q != 5 || d != 4 {
                    return Err(InstrumentError::Invalid(format!(
                        "post-survey needs 5 conversation-quality and 4 reciprocity items, found {q} and {d}"
                    )));
                }
            }
        }
        Ok(())
    }
}
