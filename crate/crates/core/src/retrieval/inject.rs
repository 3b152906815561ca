use crate::model::{ArtifactKind, CanvasObject};

use super::plan::QueryClass;

pub const INJECTION_FORMAT_VERSION: u32 = 1;

pub const INJECTION_HEADER: &str =
    "### Conversation memory (v1)\nArtifacts recorded earlier in this conversation, with verbatim quotes:";

pub const REASONING_INSTRUCTION: &str = "Reasoning: the question asks about causes or consequences. \
Analyze the artifacts above, infer how constraints and facts led to decisions (and what those \
decisions affected), and explain the connection even when no explicit link is stated.";

pub const TEMPORAL_INSTRUCTION: &str = "Timing: when answering, cite explicit dates, times and \
durations exactly as they appear in the quotes above.";

/// Order in which kinds are grouped inside the block.
pub const KIND_ORDER: [ArtifactKind; 5] = [
    ArtifactKind::Decision,
    ArtifactKind::KeyFact,
    ArtifactKind::Reminder,
    ArtifactKind::Insight,
    ArtifactKind::Todo,
];

/// One object as rendered in the block. Token costs are charged per line.
pub fn render_object_line(obj: &CanvasObject) -> String {
    format!(
        "[{}] turn {} | quote: \"{}\" | content: {}",
        obj.kind.tag(),
        obj.turn,
        single_line(&obj.quote),
        single_line(&obj.content)
    )
}

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Assembles the injection block: header, object lines grouped by kind (in
/// selection order within a group), then the class-specific instruction.
pub fn build_injection(selected: &[&CanvasObject], class: QueryClass) -> String {
    let mut out = String::from(INJECTION_HEADER);
    out.push('\n');
    for kind in KIND_ORDER {
        for obj in selected.iter().filter(|o| o.kind == kind) {
            out.push_str(&render_object_line(obj));
            out.push('\n');
        }
    }
    match class {
        QueryClass::MultiHop => {
            out.push('\n');
            out.push_str(REASONING_INSTRUCTION);
            out.push('\n');
        }
        QueryClass::Temporal => {
            out.push('\n');
            out.push_str(TEMPORAL_INSTRUCTION);
            out.push('\n');
        }
        QueryClass::Simple => {}
    }
    out
}

/// The object lines of a block, for cost accounting.
pub fn object_lines(block: &str) -> impl Iterator<Item = &str> {
    block
        .lines()
        .filter(|l| KIND_ORDER.iter().any(|k| l.starts_with(&format!("[{}] turn ", k.tag()))))
}
