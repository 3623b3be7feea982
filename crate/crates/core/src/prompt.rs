//! Prompt assembly.
//!
//! Every model gets byte-identical prompts for the same window and profile.
//! The user message is built from six fixed sections followed by the window
//! payload:
//!
//! 1. role of the model and the multi-resident task
//! 2. rooms and appliances
//! 3. input/output structure (including [`expected_output_schema`])
//! 4. the full label vocabulary, one `N. name` line per label
//! 5. disambiguation rules (omitted entirely when the profile has none)
//! 6. a structural input/output example

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{HomeProfile, Window};
use crate::window::window_to_json;

pub const HOME_HEADER: &str = "## Home";
pub const IO_HEADER: &str = "## Input and output";
pub const LABELS_HEADER: &str = "## Activity labels";
pub const RULES_HEADER: &str = "## Rules";
pub const EXAMPLE_HEADER: &str = "## Example";
pub const EVENTS_HEADER: &str = "## Sensor events";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub system_text: String,
    pub user_text: String,
    pub prompt_hash: String,
}

impl PromptText {
    pub fn new(system_text: String, user_text: String) -> Self {
        let prompt_hash = prompt_hash(&system_text, &user_text);
        PromptText {
            system_text,
            user_text,
            prompt_hash,
        }
    }
}

/// Hex SHA-256 over `system || 0x00 || user`.
pub fn prompt_hash(system_text: &str, user_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(system_text.as_bytes());
    h.update([0u8]);
    h.update(user_text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Move the five static sections into the system message and keep only
    /// the payload in the user message.
    #[serde(default)]
    pub static_in_system: bool,
}

/// Answer-format instruction shared by all prompts.
pub fn expected_output_schema(_profile: &HomeProfile) -> String {
    concat!(
        "Answer with a JSON list containing exactly one object per input event, ",
        "in the same order as the input: ",
        r#"[{"id": <event id>, "activity": "<label number>. <label name>"}, ...]"#,
        ". Only use activity labels from the activity label list."
    )
    .to_string()
}

fn static_sections(profile: &HomeProfile) -> String {
    let mut out = String::new();
    out.push_str(profile.role_text.trim_end());
    out.push_str("\n\n");

    out.push_str(HOME_HEADER);
    out.push_str("\nThe home contains the following rooms:\n");
    for room in &profile.rooms {
        if room.appliances.trim().is_empty() {
            out.push_str(&format!("- {}\n", room.name));
        } else {
            out.push_str(&format!("- {}: {}\n", room.name, room.appliances.trim()));
        }
    }
    out.push('\n');

    out.push_str(IO_HEADER);
    out.push('\n');
    out.push_str(profile.io_description.trim_end());
    out.push('\n');
    out.push_str(&expected_output_schema(profile));
    out.push_str("\n\n");

    out.push_str(LABELS_HEADER);
    out.push('\n');
    for label in &profile.labels {
        out.push_str(&label.display());
        out.push('\n');
    }
    out.push('\n');

    if !profile.rules.is_empty() {
        out.push_str(RULES_HEADER);
        out.push('\n');
        for rule in &profile.rules {
            out.push_str(&format!("- {}\n", rule.trim()));
        }
        out.push('\n');
    }

    out.push_str(EXAMPLE_HEADER);
    out.push_str("\nExample input:\n");
    out.push_str(profile.static_example.input.trim_end());
    out.push_str("\nExample output:\n");
    out.push_str(profile.static_example.output.trim_end());
    out.push('\n');
    out
}

fn payload_section(window: &Window) -> String {
    format!("{EVENTS_HEADER}\n{}\n", window_to_json(window))
}

pub fn build_prompt(window: &Window, profile: &HomeProfile, options: PromptOptions) -> PromptText {
    let statics = static_sections(profile);
    let payload = payload_section(window);
    if options.static_in_system {
        PromptText::new(statics, payload)
    } else {
        PromptText::new(String::new(), format!("{statics}\n{payload}"))
    }
}
