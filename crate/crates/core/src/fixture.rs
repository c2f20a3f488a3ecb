//! Deterministic stand-in for a live LLM, plus the bundled fixture data.
//!
//! [`FixtureProvider`] understands the two request shapes produced by
//! [`crate::genpipe::prompts`] and answers them from fixed catalogs and
//! keyword rules, so the whole generation pipeline runs offline and
//! reproduces byte-identical databases.

use sha2::{Digest, Sha256};

use crate::descriptor::{canonical_offsets, GaitClass, MotionDescriptor};
use crate::genpipe::prompts::{COMMANDS_HEADER, EXCLUDE_HEADER, REASONING_ON};
use crate::genpipe::{
    approx_tokens, build_database, BuildOutcome, Completion, GenConfig, GenError, LlmProvider,
    ProviderError, QueryLedger,
};
use crate::skilldb::{normalize_instruction, Annotation, AnnotationSet, Category, SkillDatabase};

pub const FIXTURE_MODEL: &str = "fixture-v1";
pub const FIXTURE_SEED: u64 = 0;
pub const FIXTURE_PER_CATEGORY: usize = 100;
pub const FIXTURE_ANNOTATIONS: usize = 100;

/// The bundled database and annotation set.
pub const FIXTURE_DB_JSON: &str = include_str!("../fixtures/skilldb.json");
pub const FIXTURE_ANNOTATIONS_JSON: &str = include_str!("../fixtures/annotations.json");

const MIMIC_SEED: &[&str] = &[
    "trundle along like a hippo",
    "run beautifully like a horse",
    "jumping like a frog",
    "let's jump like a rabbit",
    "hop around like a kangaroo",
    "creep like a cat stalking its prey",
    "waddle like a penguin",
    "gallop like a wild stallion",
    "prance like a deer",
    "scurry like a mouse",
];
const MIMIC_VERBS: &[&str] = &["move", "walk", "run", "bounce", "sneak", "stomp", "dash", "strut"];
const MIMIC_ANIMALS: &[&str] = &[
    "an elephant", "a cheetah", "a puppy", "a bear", "a fox", "a goat", "a tortoise",
    "a squirrel", "a wolf", "a pony", "a lion", "a lamb", "a crab", "a camel",
];

const SCENE_SEED: &[&str] = &[
    "oh no! catch that thief running!",
    "the sound of a human voice, stay hidden.",
    "a busy marketplace, navigate through the crowd.",
    "shh! someone is sleeping, move quietly",
    "the floor is wet, walk cautiously",
    "a wide open hall, move freely",
    "a narrow cluttered corridor, squeeze through carefully",
];
const SCENES: &[&str] = &[
    "the grass is tall", "a storm is coming", "the ice is thin", "kids are playing nearby",
    "there is a fire alarm", "the hallway is crowded", "a dog is barking",
    "the floor is covered in toys", "the sun is setting", "the music is playing",
    "there are stairs ahead", "the park is empty",
];
const REACTIONS: &[&str] = &[
    "hurry up", "take it slow", "stay calm", "be careful", "show some energy", "keep going",
    "tread lightly", "move with purpose", "make some noise",
];

const DIRECT_SEED: &[&str] = &[
    "show me some pronk",
    "trot slowly",
    "pace forward at a steady rhythm",
    "bound quickly",
    "do a rotary gallop",
];
const DIRECT_GAITS: &[&str] = &["trot", "pronk", "pace", "bound", "gallop"];
const DIRECT_ADVERBS: &[&str] = &[
    "slowly", "quickly", "gently", "energetically", "steadily", "carefully", "briskly",
    "lazily", "calmly", "playfully",
];
const DIRECT_FORMS: &[&str] = &["{g} {a}", "{g} {a} forward", "please {g} {a}"];

/// Every instruction the fixture provider can produce for `category`, in
/// the order it hands them out.
pub fn catalog(category: Category) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    match category {
        Category::Mimic => {
            out.extend(MIMIC_SEED.iter().map(|s| s.to_string()));
            for a in MIMIC_ANIMALS {
                for v in MIMIC_VERBS {
                    out.push(format!("{v} like {a}"));
                }
            }
        }
        Category::Scene => {
            out.extend(SCENE_SEED.iter().map(|s| s.to_string()));
            for s in SCENES {
                for r in REACTIONS {
                    out.push(format!("{s}, {r}"));
                }
            }
        }
        Category::Direct => {
            out.extend(DIRECT_SEED.iter().map(|s| s.to_string()));
            for form in DIRECT_FORMS {
                for a in DIRECT_ADVERBS {
                    for g in DIRECT_GAITS {
                        out.push(form.replace("{g}", g).replace("{a}", a));
                    }
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|s| seen.insert(normalize_instruction(s)));
    out
}

struct Canned {
    instruction: &'static str,
    gait: GaitClass,
    period_s: f64,
    vel_limit: f64,
    reasoning: &'static str,
}

const CANNED: &[Canned] = &[
    Canned {
        instruction: "trundle along like a hippo",
        gait: GaitClass::Trot,
        period_s: 0.8,
        vel_limit: 0.4,
        reasoning: "slow and heavy trot, lower vel_lim and increase T",
    },
    Canned {
        instruction: "oh no! catch that thief running!",
        gait: GaitClass::RotaryGallop,
        period_s: 0.25,
        vel_limit: 2.6,
        reasoning: "fast and aggressive gait, low T and high vel_lim",
    },
    Canned {
        instruction: "the sound of a human voice, stay hidden.",
        gait: GaitClass::Trot,
        period_s: 0.7,
        vel_limit: 0.3,
        reasoning: "use a trot with high T for stealthy movement, low vel lim for quietness",
    },
    Canned {
        instruction: "a busy marketplace, navigate through the crowd.",
        gait: GaitClass::Pace,
        period_s: 0.5,
        vel_limit: 0.5,
        reasoning: "slow pace with moderate T for careful navigation",
    },
    Canned {
        instruction: "a wide open hall, move freely",
        gait: GaitClass::Trot,
        period_s: 0.35,
        vel_limit: 2.0,
        reasoning: "open space allows a brisk trot, short T and high vel_lim",
    },
    Canned {
        instruction: "a narrow cluttered corridor, squeeze through carefully",
        gait: GaitClass::Trot,
        period_s: 0.5,
        vel_limit: 0.3,
        reasoning: "tight space calls for a careful trot, moderate T and very low vel_lim",
    },
];

const GAIT_CUES: &[(GaitClass, &[&str])] = &[
    (GaitClass::Pronk, &["pronk", "jump", "jumping", "hop", "frog", "rabbit", "kangaroo"]),
    (GaitClass::Bound, &["bound", "bounce", "leap", "deer", "squirrel", "prance"]),
    (GaitClass::RotaryGallop, &["gallop", "horse", "stallion", "pony", "cheetah", "race"]),
    (GaitClass::Pace, &["pace", "camel", "bear", "amble", "crab"]),
    (GaitClass::Trot, &["trot", "walk", "puppy", "fox", "wolf", "march", "hippo"]),
];

const FAST_WORDS: &[&str] = &[
    "run", "running", "dash", "hurry", "quickly", "fast", "briskly", "energetically",
    "energy", "cheetah", "thief", "chase", "storm", "alarm", "fire", "lion", "wolf",
    "purpose", "noise",
];
const SLOW_WORDS: &[&str] = &[
    "slow", "slowly", "lazily", "gently", "calmly", "calm", "carefully", "cautiously",
    "careful", "quiet", "quietly", "sleeping", "hidden", "sneak", "creep", "tortoise",
    "elephant", "hippo", "stomp", "tread", "lightly", "ice", "wet", "crowd", "crowded",
    "narrow", "cluttered", "toys", "stairs", "lamb", "penguin",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tempo {
    Fast,
    Steady,
    Slow,
}

/// Uniform draws in [0, 1) derived from the instruction text.
fn unit_draws(text: &str) -> [f64; 8] {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = [0.0; 8];
    for (i, chunk) in digest.chunks_exact(4).enumerate() {
        let v = u32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        out[i] = v as f64 / (u32::MAX as f64 + 1.0);
    }
    out
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn lerp(lo: f64, hi: f64, u: f64) -> f64 {
    lo + (hi - lo) * u
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

/// The descriptor (and reasoning) the fixture model assigns to `instruction`.
pub fn fixture_skill(instruction: &str, with_reasoning: bool) -> (Option<String>, MotionDescriptor) {
    let key = normalize_instruction(instruction);
    if let Some(c) = CANNED.iter().find(|c| c.instruction == key) {
        let offsets = canonical_offsets(c.gait).expect("canned gaits are canonical");
        let reasoning = with_reasoning.then(|| c.reasoning.to_string());
        return (reasoning, MotionDescriptor::new(offsets, c.period_s, c.vel_limit));
    }
    let w = words(&key);
    let has = |list: &[&str]| w.iter().any(|x| list.contains(&x.as_str()));
    let count = |list: &[&str]| w.iter().filter(|x| list.contains(&x.as_str())).count();
    let u = unit_draws(&key);

    let tempo = match count(FAST_WORDS).cmp(&count(SLOW_WORDS)) {
        std::cmp::Ordering::Greater => Tempo::Fast,
        std::cmp::Ordering::Less => Tempo::Slow,
        std::cmp::Ordering::Equal => Tempo::Steady,
    };
    // Without a reasoning step the fixture model drifts off the gait table
    // more often.
    let others_rate = if with_reasoning { 0.04 } else { 0.18 };
    let cued = GAIT_CUES.iter().find(|(_, cues)| has(cues)).map(|(g, _)| *g);
    let gait = match cued {
        Some(g) => g,
        None if u[0] < others_rate => GaitClass::Others,
        None => match tempo {
            Tempo::Fast if u[1] < 0.5 => GaitClass::RotaryGallop,
            Tempo::Fast => GaitClass::Bound,
            Tempo::Slow if u[1] < 0.7 => GaitClass::Trot,
            Tempo::Slow => GaitClass::Pace,
            Tempo::Steady => GaitClass::CANONICAL[(u[1] * 5.0) as usize % 5],
        },
    };
    let offsets = match canonical_offsets(gait) {
        Ok(o) => o,
        Err(_) => [
            0.0,
            (u[2] * 20.0).floor() / 20.0,
            (u[3] * 20.0).floor() / 20.0,
            (u[4] * 20.0).floor() / 20.0,
        ],
    };
    let (t_range, v_range) = match tempo {
        Tempo::Fast => ((0.2, 0.35), (1.8, 2.8)),
        Tempo::Steady => ((0.3, 0.6), (0.6, 1.6)),
        Tempo::Slow => ((0.55, 0.8), (0.2, 0.6)),
    };
    let period_s = round2(lerp(t_range.0, t_range.1, u[5]));
    let vel_limit = round2(lerp(v_range.0, v_range.1, u[6]));

    let reasoning = with_reasoning.then(|| {
        let (adj, t, v) = match tempo {
            Tempo::Fast => ("fast and energetic", "low T", "high vel_lim"),
            Tempo::Steady => ("steady", "moderate T", "moderate vel_lim"),
            Tempo::Slow => ("slow and careful", "high T", "low vel_lim"),
        };
        let name = match gait {
            GaitClass::Others => "irregular gait".to_string(),
            g => g.as_str().replace('_', " "),
        };
        format!("{adj} {name}, {t} and {v}")
    });
    (reasoning, MotionDescriptor::new(offsets, period_s, vel_limit))
}

/// Offline provider answering from [`catalog`] and [`fixture_skill`].
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider;

impl FixtureProvider {
    fn instructions(&self, category: Category, user: &str) -> Result<String, ProviderError> {
        let n: usize = user
            .strip_prefix("Generate ")
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| ProviderError::Fatal("fixture: cannot read requested count".into()))?;
        let excluded: std::collections::HashSet<String> = user
            .split_once(EXCLUDE_HEADER)
            .map(|(_, list)| {
                list.lines()
                    .filter_map(|l| l.strip_prefix("- "))
                    .map(normalize_instruction)
                    .collect()
            })
            .unwrap_or_default();
        let out: Vec<String> = catalog(category)
            .into_iter()
            .filter(|s| !excluded.contains(&normalize_instruction(s)))
            .take(n)
            .collect();
        Ok(serde_json::to_string(&out).expect("strings serialize"))
    }

    fn descriptors(&self, system: &str, user: &str) -> Result<String, ProviderError> {
        let list = user
            .strip_prefix(COMMANDS_HEADER)
            .ok_or_else(|| ProviderError::Fatal("fixture: unrecognised request".into()))?;
        let commands: Vec<String> = serde_json::from_str(list.trim())
            .map_err(|e| ProviderError::Fatal(format!("fixture: bad command list: {e}")))?;
        let with_reasoning = system.contains(REASONING_ON);
        let items: Vec<serde_json::Value> = commands
            .iter()
            .map(|c| {
                let (reasoning, descriptor) = fixture_skill(c, with_reasoning);
                serde_json::json!({
                    "instruction": c,
                    "reasoning": reasoning,
                    "descriptor": descriptor,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&items).expect("values serialize"))
    }
}

impl LlmProvider for FixtureProvider {
    fn model_name(&self) -> String {
        FIXTURE_MODEL.into()
    }

    fn complete(&self, system_prompt: &str, user_prompt: &str) -> Result<Completion, ProviderError> {
        let category = system_prompt
            .lines()
            .find_map(|l| l.strip_prefix("Category: "))
            .map(|c| c.trim().parse::<Category>());
        let text = match category {
            Some(Ok(c)) => self.instructions(c, user_prompt)?,
            Some(Err(e)) => return Err(ProviderError::Fatal(e)),
            None => self.descriptors(system_prompt, user_prompt)?,
        };
        Ok(Completion {
            prompt_tokens: approx_tokens(system_prompt) + approx_tokens(user_prompt),
            completion_tokens: approx_tokens(&text),
            text,
        })
    }
}

/// Split `n` records across the three categories as evenly as possible.
pub fn category_counts(n: usize) -> Vec<(Category, usize)> {
    Category::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, n / 3 + usize::from(i < n % 3)))
        .filter(|&(_, k)| k > 0)
        .collect()
}

/// Run the full pipeline against the fixture provider.
pub fn generate_fixture_database(
    n: usize,
    cfg: &GenConfig,
    ledger: &QueryLedger,
) -> Result<BuildOutcome, GenError> {
    build_database(&FixtureProvider, "fixture", &category_counts(n), cfg, ledger)
}

/// The configuration behind the bundled fixture database.
pub fn fixture_config() -> GenConfig {
    GenConfig {
        shuffle_seed: FIXTURE_SEED,
        ..GenConfig::default()
    }
}

const PARAPHRASES: &[&str] = &[
    "hey robot, {i}",
    "{i}, please",
    "could you {i}",
    "now {i}",
    "{i} right away",
];

/// Paraphrased queries for every third record, each pointing back at the
/// record it paraphrases.
pub fn fixture_annotations(db: &SkillDatabase) -> AnnotationSet {
    let entries = db
        .records()
        .iter()
        .step_by(3)
        .take(FIXTURE_ANNOTATIONS)
        .enumerate()
        .map(|(i, r)| {
            let base = r.instruction.trim_end_matches(['.', '!']);
            Annotation {
                query: PARAPHRASES[i % PARAPHRASES.len()].replace("{i}", base),
                expected_id: r.id,
            }
        })
        .collect();
    AnnotationSet { entries }
}

pub fn fixture_database() -> SkillDatabase {
    SkillDatabase::from_json_str(FIXTURE_DB_JSON).expect("bundled fixture database is valid")
}

pub fn fixture_annotation_set() -> AnnotationSet {
    AnnotationSet::from_json_str(FIXTURE_ANNOTATIONS_JSON).expect("bundled annotations are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genpipe::gen_instructions;
    use crate::retrieval::{render_text_image, RenderConfig};

    #[test]
    fn catalogs_are_large_enough() {
        for c in Category::ALL {
            assert!(catalog(c).len() >= FIXTURE_PER_CATEGORY + 10, "{c}");
        }
    }

    #[test]
    fn mimic_triple() {
        let out = gen_instructions(&FixtureProvider, Category::Mimic, 3, &QueryLedger::new()).unwrap();
        assert_eq!(
            out.instructions,
            ["trundle along like a hippo", "run beautifully like a horse", "jumping like a frog"]
        );
    }

    #[test]
    fn fixture_skills_are_valid_and_deterministic() {
        for c in Category::ALL {
            for s in catalog(c) {
                for r in [true, false] {
                    let a = fixture_skill(&s, r);
                    assert!(a.1.validate().is_ok(), "{s}");
                    assert_eq!(a, fixture_skill(&s, r));
                    assert_eq!(a.0.is_some(), r);
                }
            }
        }
    }

    #[test]
    fn bundled_database_matches_regeneration() {
        let out = generate_fixture_database(300, &fixture_config(), &QueryLedger::new()).unwrap();
        assert!(out.is_complete());
        assert_eq!(out.db.to_json_string(), FIXTURE_DB_JSON);
        assert_eq!(fixture_annotations(&out.db).to_json_string(), FIXTURE_ANNOTATIONS_JSON);
    }

    #[test]
    fn annotations_fit_the_canvas_and_reference_real_records() {
        let db = fixture_database();
        let ann = fixture_annotation_set();
        assert_eq!(ann.entries.len(), FIXTURE_ANNOTATIONS);
        ann.validate_against(&db).unwrap();
        for a in &ann.entries {
            render_text_image(&a.query, &RenderConfig::default()).unwrap();
            assert!(db.find_instruction(&a.query).is_none());
        }
        for r in db.records() {
            render_text_image(&r.instruction, &RenderConfig::default()).unwrap();
        }
    }

    #[test]
    fn category_split() {
        assert_eq!(
            category_counts(300),
            [(Category::Mimic, 100), (Category::Scene, 100), (Category::Direct, 100)]
        );
        assert_eq!(category_counts(2), [(Category::Mimic, 1), (Category::Scene, 1)]);
    }
}
