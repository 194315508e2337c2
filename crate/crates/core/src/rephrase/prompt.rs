use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::strategy::Strategy;

/// Who wrote a context line, relative to the author being helped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    #[serde(rename = "self")]
    Author,
    Partner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLine {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub partner: String,
    pub original: String,
    pub rephrased: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyPrompt {
    pub name: String,
    pub directive: String,
    pub exemplars: Vec<Exemplar>,
}

/// Prompt templates. The built-in default can be replaced by a TOML file with
/// a `preamble` string and `restate`, `validate`, `polite` tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub preamble: String,
    pub restate: StrategyPrompt,
    pub validate: StrategyPrompt,
    pub polite: StrategyPrompt,
}

impl PromptConfig {
    pub fn for_strategy(&self, strategy: Strategy) -> &StrategyPrompt {
        match strategy {
            Strategy::Restate => &self.restate,
            Strategy::Validate => &self.validate,
            Strategy::Polite => &self.polite,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        Self::from_toml_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

fn ex(partner: &str, original: &str, rephrased: &str) -> Exemplar {
    Exemplar {
        partner: partner.to_owned(),
        original: original.to_owned(),
        rephrased: rephrased.to_owned(),
    }
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            preamble: "You help one participant in a text conversation about gun policy with \
                       someone who holds a different view. Rewrite the participant's next \
                       message. Keep the author's policy position and the topic of the message \
                       exactly as they are: do not change what they argue for, do not add new \
                       claims, and do not try to persuade anyone. Reply with the rewritten \
                       message only."
                .to_owned(),
            restate: StrategyPrompt {
                name: "Restatement".to_owned(),
                directive: "Begin by briefly repeating back the partner's main point in your \
                            own words so the partner can tell it was heard and understood, \
                            then make the author's point."
                    .to_owned(),
                exemplars: vec![
                    ex(
                        "Background checks just punish people who follow the law.",
                        "That's ridiculous, criminals don't go through background checks anyway.",
                        "So you're saying background checks mostly burden law-abiding buyers. \
                         My worry is that criminals skip them anyway.",
                    ),
                    ex(
                        "We need to get weapons of war off our streets.",
                        "Banning rifles won't fix anything, most crimes use handguns.",
                        "It sounds like you want fewer military-style weapons in public. \
                         From what I've read, most crimes involve handguns rather than rifles.",
                    ),
                ],
            },
            validate: StrategyPrompt {
                name: "Validation".to_owned(),
                directive: "Acknowledge that it is legitimate for the partner to hold a \
                            different opinion, for example \"I can see you care a lot about this \
                            issue\". Do not say that the author shares the partner's view and \
                            do not change the author's position."
                    .to_owned(),
                exemplars: vec![
                    ex(
                        "My kids do active shooter drills every month. It's insane.",
                        "Drills are not the problem, the problem is people who want to take our guns.",
                        "I can see how much you care about your kids' safety. For me the bigger \
                         issue is protecting the right to own guns.",
                    ),
                    ex(
                        "I grew up hunting and I don't want to lose that.",
                        "Hunting is not what the second amendment is about.",
                        "It makes sense that hunting matters to you given how you grew up. I see \
                         the second amendment as being about more than hunting.",
                    ),
                ],
            },
            polite: StrategyPrompt {
                name: "Politeness".to_owned(),
                directive: "Rewrite the message in more polite language: soften absolute \
                            statements with hedges, remove insults or sarcasm, and add warmth \
                            where it fits."
                    .to_owned(),
                exemplars: vec![
                    ex(
                        "Red flag laws violate due process.",
                        "Your idea is dumb, red flag laws save lives.",
                        "I might see it differently, since I think red flag laws could save lives.",
                    ),
                    ex(
                        "More guns make everyone safer.",
                        "That is just wrong and you know it.",
                        "I'm not sure that's quite right, but I'm glad we can talk it through.",
                    ),
                    ex(
                        "Permits are a hassle for no reason.",
                        "Obviously permits matter, stop whining.",
                        "I'd gently suggest that permits might matter more than they seem.",
                    ),
                ],
            },
        }
    }
}

/// Deterministic provider prompt for one strategy.
pub fn build_prompt(
    config: &PromptConfig,
    strategy: Strategy,
    original_text: &str,
    context: &[ContextLine],
) -> String {
    let spec = config.for_strategy(strategy);
    let mut out = String::new();
    out.push_str(&config.preamble);
    out.push_str("\n\n");
    let _ = writeln!(out, "Technique: {}", spec.name);
    out.push_str(&spec.directive);
    out.push_str("\n\nExamples:\n");
    for exemplar in &spec.exemplars {
        let _ = writeln!(out, "Partner: {}", exemplar.partner);
        let _ = writeln!(out, "Original: {}", exemplar.original);
        let _ = writeln!(out, "Rewritten: {}\n", exemplar.rephrased);
    }
    out.push_str("Recent conversation:\n");
    if context.is_empty() {
        out.push_str("(none)\n");
    }
    for line in context {
        let who = match line.speaker {
            Speaker::Author => "Author",
            Speaker::Partner => "Partner",
        };
        let _ = writeln!(out, "{who}: {}", line.text);
    }
    let _ = write!(out, "\nOriginal: {original_text}\nRewritten:");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Vec<ContextLine> {
        vec![
            ContextLine {
                speaker: Speaker::Partner,
                text: "Background checks are useless.".into(),
            },
            ContextLine {
                speaker: Speaker::Author,
                text: "I disagree.".into(),
            },
        ]
    }

    #[test]
    fn polite_prompt_keeps_position_and_original() {
        let cfg = PromptConfig::default();
        let prompt = build_prompt(&cfg, Strategy::Polite, "your idea is dumb", &ctx());
        assert!(prompt.contains("Keep the author's policy position and the topic"));
        assert!(prompt.contains("Original: your idea is dumb\nRewritten:"));
        assert!(prompt.contains("Partner: Background checks are useless."));
    }

    #[test]
    fn validate_prompt_affirms_legitimacy_without_asking_for_agreement() {
        let cfg = PromptConfig::default();
        let prompt = build_prompt(&cfg, Strategy::Validate, "guns are a right", &[]);
        assert!(prompt.contains("legitimate for the partner to hold a different opinion"));
        assert!(prompt.contains("I can see you care a lot about this issue"));
        assert!(!prompt.to_lowercase().contains("agree"));
    }

    #[test]
    fn prompts_are_deterministic_and_carry_exemplars() {
        let cfg = PromptConfig::default();
        for strategy in Strategy::ALL {
            let a = build_prompt(&cfg, strategy, "some text here", &ctx());
            let b = build_prompt(&cfg, strategy, "some text here", &ctx());
            assert_eq!(a, b);
            let n = cfg.for_strategy(strategy).exemplars.len();
            assert!((2..=3).contains(&n));
            assert_eq!(a.matches("Rewritten:").count(), n + 1);
        }
        assert!(build_prompt(&cfg, Strategy::Restate, "x", &[]).contains("(none)"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = PromptConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(PromptConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
