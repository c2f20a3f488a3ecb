use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::skilldb::Category;

pub const INSTRUCTION_TEMPLATE: &str = include_str!("../../prompts/instruction_template.txt");
pub const MIMIC: &str = include_str!("../../prompts/mimic.txt");
pub const ACTION: &str = include_str!("../../prompts/action.txt");
pub const SCENE: &str = include_str!("../../prompts/scene.txt");
pub const SKILL_SYSTEM: &str = include_str!("../../prompts/skill_system.txt");

pub const REASONING_ON: &str = "Write the \"reasoning\" field first: one short sentence on which gait, \
period and speed suit the command and why. Then write the descriptor that follows from it.";
pub const REASONING_OFF: &str = "Set \"reasoning\" to null.";

/// Header line of the exclusion list in instruction requests.
pub const EXCLUDE_HEADER: &str = "Do not repeat any of these:";
/// Header line of the command list in descriptor requests.
pub const COMMANDS_HEADER: &str = "Commands:";

pub fn category_prompt(category: Category) -> &'static str {
    match category {
        Category::Mimic => MIMIC,
        Category::Scene => SCENE,
        Category::Direct => ACTION,
    }
}

pub fn instruction_system_prompt(category: Category) -> String {
    INSTRUCTION_TEMPLATE.replace("{category_prompt}", category_prompt(category).trim_end())
}

pub fn instruction_user_prompt(n: usize, exclude: &[String]) -> String {
    let mut s = format!("Generate {n} new commands.");
    if !exclude.is_empty() {
        s.push('\n');
        s.push_str(EXCLUDE_HEADER);
        for e in exclude {
            s.push_str("\n- ");
            s.push_str(e);
        }
    }
    s
}

pub fn skill_system_prompt(with_reasoning: bool) -> String {
    let rule = if with_reasoning { REASONING_ON } else { REASONING_OFF };
    SKILL_SYSTEM.replace("{reasoning_rule}", rule)
}

pub fn skill_user_prompt(instructions: &[&str]) -> String {
    let list = serde_json::to_string_pretty(instructions).expect("strings serialize");
    format!("{COMMANDS_HEADER}\n{list}")
}

/// SHA-256 of every prompt asset, keyed by file name.
pub fn prompt_hashes() -> BTreeMap<String, String> {
    [
        ("instruction_template.txt", INSTRUCTION_TEMPLATE),
        ("mimic.txt", MIMIC),
        ("action.txt", ACTION),
        ("scene.txt", SCENE),
        ("skill_system.txt", SKILL_SYSTEM),
    ]
    .into_iter()
    .map(|(name, body)| (name.to_string(), hex::encode(Sha256::digest(body.as_bytes()))))
    .collect()
}
