//! Synthetic planted-fact conversations.
//!
//! Each case has 50 turns. Facts are planted over turns 1..=35 and every
//! question is asked after the compression turn (40). Every turn is rendered
//! twice: a tagged form whose facts carry marker prefixes for the offline
//! extractor, and a natural form for live extractors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use canvas_core::extraction::ConversationTurn;
use canvas_core::model::{ArtifactKind, Source};
use canvas_core::text::{word_tokens, Analyzer};

pub const TURNS: u32 = 50;
pub const COMPRESSION_TURN: u32 = 40;
pub const LAST_PLANT_TURN: u32 = 35;
pub const FACTS_PER_CASE: usize = 8;
const MAX_KEYWORDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Standard,
    MultiHop,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::MultiHop => "multi-hop",
        })
    }
}

#[derive(Debug, Error)]
#[error("unknown variant {0:?} (expected standard or multi-hop)")]
pub struct UnknownVariant(String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "standard" => Ok(Variant::Standard),
            "multi-hop" | "multihop" => Ok(Variant::MultiHop),
            _ => Err(UnknownVariant(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuestionKind {
    Recall,
    /// "Why was X decided?"
    Causal,
    /// "What did Y affect?"
    Impact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFact {
    pub category: ArtifactKind,
    /// Verbatim fact string as it appears in the plant turn.
    pub text: String,
    pub plant_turn: u32,
    pub source: Source,
    /// Whether the fact is the first sentence of its message.
    pub leads: bool,
    pub question: String,
    pub question_kind: QuestionKind,
    pub answer_key: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub seed: u64,
    pub variant: Variant,
    pub compression_turn: u32,
    pub turns: Vec<ConversationTurn>,
    pub natural_turns: Vec<ConversationTurn>,
    pub planted: Vec<PlantedFact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rendering {
    #[default]
    Tagged,
    Natural,
}

impl BenchmarkCase {
    pub fn rendered(&self, rendering: Rendering) -> &[ConversationTurn] {
        match rendering {
            Rendering::Tagged => &self.turns,
            Rendering::Natural => &self.natural_turns,
        }
    }

    /// Turns up to and including the compression turn.
    pub fn history(&self, rendering: Rendering) -> &[ConversationTurn] {
        let turns = self.rendered(rendering);
        let n = turns.iter().take_while(|t| t.index <= self.compression_turn).count();
        &turns[..n]
    }
}

const SYSTEMS: [&str; 12] = [
    "billing service",
    "auth gateway",
    "search indexer",
    "payment queue",
    "report exporter",
    "image resizer",
    "email worker",
    "audit logger",
    "session store",
    "metrics collector",
    "upload handler",
    "geocoding proxy",
];

const METRICS: [(&str, &str, [u32; 3]); 6] = [
    ("timeout", "seconds", [15, 45, 90]),
    ("retry limit", "attempts", [3, 5, 7]),
    ("batch size", "records", [100, 250, 500]),
    ("cache lifetime", "minutes", [5, 10, 30]),
    ("pool size", "connections", [8, 16, 32]),
    ("rate limit", "requests", [50, 200, 1000]),
];

const TECHS: [&str; 10] = [
    "PostgreSQL",
    "Redis",
    "Kafka",
    "gRPC",
    "Rust",
    "GraphQL",
    "Elasticsearch",
    "SQLite",
    "RabbitMQ",
    "Terraform",
];

const PRACTICES: [&str; 8] = [
    "log request ids",
    "pin dependency versions",
    "validate input payloads",
    "use type hints",
    "write integration tests",
    "encrypt secrets at rest",
    "tag every release",
    "review schema migrations",
];

const CAUSES: [&str; 8] = [
    "lock contention",
    "cold caches",
    "oversized payloads",
    "chatty logging",
    "slow dns lookups",
    "garbage collection pauses",
    "unindexed joins",
    "serial network calls",
];

const FILLER_USER: [&str; 12] = [
    "Can we go over the dashboard colors again?",
    "I shuffled the standup to the afternoon.",
    "Did anyone read the onboarding guide draft?",
    "The design review notes are in the shared folder.",
    "Let me know if the sidebar layout looks odd to you.",
    "I think the font on the landing page is too small.",
    "We should plan the team lunch for next week.",
    "Can you skim the glossary page for typos?",
    "The holiday calendar finally got published.",
    "I am drafting the newsletter intro today.",
    "Somebody asked about the parking situation again.",
    "The slide deck for the demo needs a cover page.",
];

const FILLER_ASSISTANT: [&str; 12] = [
    "Sure, happy to take a look.",
    "Sounds good to me.",
    "Got it, I will keep that in mind.",
    "Thanks for the heads up.",
    "I can help with that later today.",
    "Okay, noted.",
    "That makes sense.",
    "Let me check and get back to you.",
    "Great, thanks for sharing.",
    "I agree with that plan.",
    "No problem at all.",
    "Right, that works for me.",
];

/// Second sentences appended to filler, so turns have realistic length.
const FILLER_MORE: [&str; 10] = [
    "I went through most of it during the morning and left a few comments for later.",
    "Nothing urgent here, but it would be nice to settle it before the next planning round.",
    "Maria mentioned she had some thoughts too, so we could loop her in on the thread.",
    "It is mostly a matter of taste, and people on the team seem to disagree a little.",
    "Let us keep it short in the notes so nobody has to scroll through a wall of text.",
    "I also saw a couple of older threads that touched on this without much follow up.",
    "We can revisit the wording once the rest of the page is in decent shape.",
    "The last round of feedback was positive overall, with only small nitpicks.",
    "If it takes more than an hour we should probably split it into smaller pieces.",
    "Happy to pair on it whenever you have a free slot this week.",
];

/// Distractor artifacts whose vocabulary never overlaps a planted fact.
const DISTRACTORS: [(ArtifactKind, &str); 10] = [
    (ArtifactKind::Todo, "tidy the sidebar icons"),
    (ArtifactKind::Todo, "fix the typo in the onboarding guide"),
    (ArtifactKind::Todo, "book a room for the design review"),
    (ArtifactKind::Todo, "refresh the team calendar"),
    (ArtifactKind::Todo, "rename the banner on the landing page"),
    (ArtifactKind::Insight, "shorter meetings keep everyone focused"),
    (ArtifactKind::Insight, "larger fonts help readers on phones"),
    (ArtifactKind::Insight, "pairing on docs speeds up onboarding"),
    (ArtifactKind::Todo, "order snacks for the demo day"),
    (ArtifactKind::Insight, "friday demos get more attendance"),
];

const LEAD_SENTENCES: [&str; 6] = [
    "Quick update before I forget.",
    "One more thing on my list.",
    "Small note from the last sync.",
    "Something worth writing down.",
    "Circling back on an earlier thread.",
    "A detail from yesterday.",
];

fn natural_prefix(kind: ArtifactKind) -> &'static str {
    match kind {
        ArtifactKind::KeyFact => "For the record,",
        ArtifactKind::Decision => "Final call:",
        ArtifactKind::Reminder => "Please remember:",
        ArtifactKind::Insight => "Interesting finding:",
        ArtifactKind::Todo => "We still need to",
    }
}

fn source_for(kind: ArtifactKind) -> Source {
    match kind {
        ArtifactKind::Decision | ArtifactKind::Insight => Source::Assistant,
        _ => Source::User,
    }
}

/// A fact before it is assigned a turn.
struct Draft {
    category: ArtifactKind,
    text: String,
    question: String,
    question_kind: QuestionKind,
    answer_key: String,
}

struct Pools {
    systems: Vec<&'static str>,
    techs: Vec<&'static str>,
    practices: Vec<&'static str>,
    causes: Vec<&'static str>,
}

impl Pools {
    fn shuffled(rng: &mut ChaCha8Rng) -> Self {
        let mut p = Pools {
            systems: SYSTEMS.to_vec(),
            techs: TECHS.to_vec(),
            practices: PRACTICES.to_vec(),
            causes: CAUSES.to_vec(),
        };
        p.systems.shuffle(rng);
        p.techs.shuffle(rng);
        p.practices.shuffle(rng);
        p.causes.shuffle(rng);
        p
    }
}

fn key_fact(rng: &mut ChaCha8Rng, system: &str) -> (String, &'static str) {
    let (metric, unit, values) = METRICS[rng.gen_range(0..METRICS.len())];
    let value = values[rng.gen_range(0..values.len())];
    (format!("the {system} {metric} is {value} {unit}"), metric)
}

fn recall_draft(rng: &mut ChaCha8Rng, category: ArtifactKind, system: &str, pools: &mut Pools) -> Draft {
    let (text, question) = match category {
        ArtifactKind::KeyFact => {
            let (text, metric) = key_fact(rng, system);
            (text, format!("What is the {system} {metric}?"))
        }
        ArtifactKind::Decision => {
            let tech = pools.techs.pop().expect("tech pool exceeds facts per case");
            (
                format!("we decided to move the {system} to {tech}"),
                format!("What did we decide about the {system}?"),
            )
        }
        ArtifactKind::Reminder => {
            let practice = pools.practices.pop().expect("practice pool exceeds facts per case");
            (
                format!("always {practice} in the {system}"),
                format!("What should we always do in the {system}?"),
            )
        }
        _ => {
            let cause = pools.causes.pop().expect("cause pool exceeds facts per case");
            (
                format!("the {system} slowdown comes from {cause}"),
                format!("What is behind the {system} slowdown?"),
            )
        }
    };
    Draft {
        category,
        answer_key: text.clone(),
        text,
        question,
        question_kind: QuestionKind::Recall,
    }
}

/// A reason artifact followed by the decision it motivated.
fn chain_drafts(rng: &mut ChaCha8Rng, system: &str, pools: &mut Pools) -> [Draft; 2] {
    let tech = pools.techs.pop().expect("tech pool exceeds chains per case");
    let decision = format!("we decided to move the {system} to {tech}");
    let (reason_kind, reason, subject) = if rng.gen_bool(0.5) {
        let (text, metric) = key_fact(rng, system);
        (ArtifactKind::KeyFact, text, format!("{system} {metric}"))
    } else {
        let practice = pools.practices.pop().expect("practice pool exceeds chains per case");
        (
            ArtifactKind::Reminder,
            format!("always {practice} in the {system}"),
            format!("{system} reminder"),
        )
    };
    [
        Draft {
            category: reason_kind,
            text: reason.clone(),
            question: format!("What did the {subject} affect?"),
            question_kind: QuestionKind::Impact,
            answer_key: decision.clone(),
        },
        Draft {
            category: ArtifactKind::Decision,
            text: decision,
            question: format!("Why was the {system} moved to {tech}?"),
            question_kind: QuestionKind::Causal,
            answer_key: reason,
        },
    ]
}

/// Content tokens of the answer key that the question does not already
/// give away; all content tokens if that leaves nothing.
pub fn answer_keywords(analyzer: &Analyzer, question: &str, answer_key: &str) -> Vec<String> {
    let asked: BTreeSet<String> = word_tokens(question).into_iter().collect();
    let mut seen = BTreeSet::new();
    let tokens = analyzer.content_tokens(answer_key);
    let fresh: Vec<String> = tokens
        .iter()
        .filter(|t| !asked.contains(*t) && seen.insert((*t).clone()))
        .take(MAX_KEYWORDS)
        .cloned()
        .collect();
    if !fresh.is_empty() {
        return fresh;
    }
    let mut seen = BTreeSet::new();
    let all: Vec<String> = tokens.into_iter().filter(|t| seen.insert(t.clone())).take(MAX_KEYWORDS).collect();
    if all.is_empty() {
        word_tokens(answer_key).into_iter().take(MAX_KEYWORDS).collect()
    } else {
        all
    }
}

/// Picks `n` distinct turns in 1..=LAST_PLANT_TURN.
fn spread_turns(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
    let mut all: Vec<u32> = (1..=LAST_PLANT_TURN).collect();
    all.shuffle(rng);
    let mut picked = all[..n].to_vec();
    picked.sort_unstable();
    picked
}

/// Reason turns with their decision 1..=3 turns later; all turns distinct.
fn chain_turns(rng: &mut ChaCha8Rng, chains: usize) -> Vec<(u32, u32)> {
    loop {
        let mut used = BTreeSet::new();
        let mut out = Vec::with_capacity(chains);
        for _ in 0..chains {
            let reason = rng.gen_range(1..=LAST_PLANT_TURN - 3);
            let decision = reason + rng.gen_range(1..=3);
            if used.insert(reason) && used.insert(decision) {
                out.push((reason, decision));
            }
        }
        if out.len() == chains {
            out.sort_unstable();
            return out;
        }
    }
}

struct Slot {
    fact: usize,
    tagged: String,
    natural: String,
}

fn compose(lead: &str, fact_sentence: &str, leads: bool, tail: &str) -> String {
    if leads {
        format!("{fact_sentence} {tail}")
    } else {
        format!("{lead} {fact_sentence} {tail}")
    }
}

/// Deterministically generates one case from `seed`.
pub fn generate_case(seed: u64, variant: Variant) -> BenchmarkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let analyzer = Analyzer::default();
    let mut pools = Pools::shuffled(&mut rng);

    let mut placed: Vec<(Draft, u32)> = Vec::with_capacity(FACTS_PER_CASE);
    match variant {
        Variant::Standard => {
            let mut categories: Vec<ArtifactKind> = [
                ArtifactKind::KeyFact,
                ArtifactKind::Decision,
                ArtifactKind::Reminder,
                ArtifactKind::Insight,
            ]
            .repeat(FACTS_PER_CASE / 4);
            categories.shuffle(&mut rng);
            let turns = spread_turns(&mut rng, FACTS_PER_CASE);
            for (category, turn) in categories.into_iter().zip(turns) {
                let system = pools.systems.pop().expect("system pool exceeds facts per case");
                placed.push((recall_draft(&mut rng, category, system, &mut pools), turn));
            }
        }
        Variant::MultiHop => {
            for (reason_turn, decision_turn) in chain_turns(&mut rng, FACTS_PER_CASE / 2) {
                let system = pools.systems.pop().expect("system pool exceeds chains per case");
                let [reason, decision] = chain_drafts(&mut rng, system, &mut pools);
                placed.push((reason, reason_turn));
                placed.push((decision, decision_turn));
            }
        }
    }
    placed.sort_by_key(|(_, t)| *t);

    let planted: Vec<PlantedFact> = placed
        .into_iter()
        .map(|(d, turn)| PlantedFact {
            category: d.category,
            source: source_for(d.category),
            leads: rng.gen_ratio(1, 4),
            keywords: answer_keywords(&analyzer, &d.question, &d.answer_key),
            text: d.text,
            plant_turn: turn,
            question: d.question,
            question_kind: d.question_kind,
            answer_key: d.answer_key,
        })
        .collect();

    let offset = rng.gen_range(0..FILLER_USER.len());
    let mut turns = Vec::with_capacity(TURNS as usize);
    let mut natural_turns = Vec::with_capacity(TURNS as usize);
    for index in 1..=TURNS {
        let i = index as usize + offset;
        let user_base = format!("{} {}", FILLER_USER[i % FILLER_USER.len()], FILLER_MORE[(i * 3) % FILLER_MORE.len()]);
        let assistant_base = format!(
            "{} {}",
            FILLER_ASSISTANT[(i * 7) % FILLER_ASSISTANT.len()],
            FILLER_MORE[(i * 3 + 5) % FILLER_MORE.len()]
        );
        let mut user = [user_base, String::new()];
        let mut assistant = [assistant_base, String::new()];

        let slot = planted.iter().position(|f| f.plant_turn == index).map(|fact| {
            let f = &planted[fact];
            Slot {
                fact,
                tagged: format!("{}: {}.", f.category.tag(), f.text),
                natural: format!("{} {}.", natural_prefix(f.category), f.text),
            }
        });
        match slot {
            Some(Slot { fact, tagged, natural }) => {
                let f = &planted[fact];
                let lead = LEAD_SENTENCES[(i * 5) % LEAD_SENTENCES.len()];
                let side = match f.source {
                    Source::User => &mut user,
                    Source::Assistant => &mut assistant,
                };
                let tail = side[0].clone();
                side[1] = compose(lead, &natural, f.leads, &tail);
                side[0] = compose(lead, &tagged, f.leads, &tail);
            }
            None if index % 3 == 0 => {
                let (kind, text) = DISTRACTORS[(i * 3 + index as usize / 3) % DISTRACTORS.len()];
                let base = assistant[0].clone();
                assistant[1] = format!("{base} {} {text}.", natural_prefix(kind));
                assistant[0] = format!("{base} {}: {text}.", kind.tag());
            }
            None => {}
        }
        let pick = |pair: &[String; 2], natural: bool| {
            if natural && !pair[1].is_empty() {
                pair[1].clone()
            } else {
                pair[0].clone()
            }
        };
        turns.push(ConversationTurn::new(index, pick(&user, false), pick(&assistant, false)));
        natural_turns.push(ConversationTurn::new(index, pick(&user, true), pick(&assistant, true)));
    }

    BenchmarkCase {
        seed,
        variant,
        compression_turn: COMPRESSION_TURN,
        turns,
        natural_turns,
        planted,
    }
}

/// Cases for seeds `first_seed .. first_seed + n`.
pub fn generate_cases(first_seed: u64, n: usize, variant: Variant) -> Vec<BenchmarkCase> {
    (0..n as u64).map(|i| generate_case(first_seed + i, variant)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use canvas_core::extraction::{ExtractionPass, MarkerExtractor};

    #[test]
    fn facts_are_verbatim_in_their_turns() {
        for variant in [Variant::Standard, Variant::MultiHop] {
            let case = generate_case(1, variant);
            assert_eq!(case.turns.len(), 50);
            assert_eq!(case.planted.len(), FACTS_PER_CASE);
            for f in &case.planted {
                assert!(f.plant_turn >= 1 && f.plant_turn <= LAST_PLANT_TURN);
                assert!(f.plant_turn < case.compression_turn);
                assert!(!f.answer_key.is_empty() && !f.keywords.is_empty());
                for turns in [&case.turns, &case.natural_turns] {
                    let t = &turns[f.plant_turn as usize - 1];
                    assert!(t.text(f.source).contains(&f.text), "{f:?} not in {t:?}");
                }
            }
        }
    }

    #[test]
    fn same_seed_same_case() {
        assert_eq!(generate_case(9, Variant::Standard), generate_case(9, Variant::Standard));
        assert_ne!(generate_case(9, Variant::Standard), generate_case(10, Variant::Standard));
    }

    #[test]
    fn multi_hop_questions_use_templates() {
        for seed in 0..20 {
            for f in generate_case(seed, Variant::MultiHop).planted {
                let ok = match f.question_kind {
                    QuestionKind::Causal => f.question.starts_with("Why was"),
                    QuestionKind::Impact => f.question.starts_with("What did") && f.question.ends_with("affect?"),
                    QuestionKind::Recall => false,
                };
                assert!(ok, "{}", f.question);
            }
        }
    }

    #[test]
    fn chains_fall_inside_the_heuristic_window() {
        let case = generate_case(4, Variant::MultiHop);
        for f in case.planted.iter().filter(|f| f.question_kind == QuestionKind::Causal) {
            let reason = case.planted.iter().find(|r| r.text == f.answer_key).unwrap();
            assert!(f.plant_turn > reason.plant_turn && f.plant_turn - reason.plant_turn <= 3);
        }
    }

    #[test]
    fn natural_rendering_has_no_markers() {
        let case = generate_case(2, Variant::Standard);
        let ex = MarkerExtractor::default();
        for t in &case.natural_turns {
            assert!(ex.scan(&t.user, Source::User, ExtractionPass::First).is_empty());
            assert!(ex.scan(&t.assistant, Source::Assistant, ExtractionPass::First).is_empty());
        }
        let tagged: usize = case
            .turns
            .iter()
            .map(|t| ex.scan(&t.user, Source::User, ExtractionPass::First).len()
                + ex.scan(&t.assistant, Source::Assistant, ExtractionPass::First).len())
            .sum();
        assert!(tagged > FACTS_PER_CASE);
    }

    #[test]
    fn keywords_skip_question_words() {
        let kw = answer_keywords(
            &Analyzer::default(),
            "What is the billing service timeout?",
            "the billing service timeout is 45 seconds",
        );
        assert_eq!(kw, vec!["45", "seconds"]);
    }

    #[test]
    fn variant_parses() {
        assert_eq!("multi_hop".parse::<Variant>().unwrap(), Variant::MultiHop);
        assert_eq!("Standard".parse::<Variant>().unwrap(), Variant::Standard);
        assert!("other".parse::<Variant>().is_err());
    }
}
