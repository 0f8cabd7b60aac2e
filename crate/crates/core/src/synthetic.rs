//! Seeded synthetic corpora in the corpus file schema.
//!
//! Toxic posts carry class-specific marker tokens that annotators mark as
//! rationales; some toxic posts carry only an ambiguous cue shared with
//! normal posts. Community terms appear in toxic posts and, as decoys, in
//! normal posts, so an unmasked model can pick up community words as a
//! label signal.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatorRecord, Label, Post, Split};

pub const HATE_MARKERS: [&str; 3] = ["zork", "blarg", "vorp"];
pub const OFFENSIVE_MARKERS: [&str; 3] = ["frob", "snarf", "gleep"];
pub const AMBIGUOUS_CUES: [&str; 2] = ["ugh", "meh"];
/// (community identifier, surface term)
pub const COMMUNITIES: [(&str, &str); 4] = [
    ("Jewish", "jews"),
    ("Islam", "muslims"),
    ("Women", "women"),
    ("African", "africans"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub posts: usize,
    pub seed: u64,
    pub filler_vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a toxic post has a class marker rather than only an ambiguous cue.
    pub marker_rate: f64,
    /// Probability that a toxic post mentions a community.
    pub toxic_mention_rate: f64,
    /// Probability that a normal post mentions a community.
    pub decoy_rate: f64,
    /// Probability that an annotator votes the intended label.
    pub annotator_accuracy: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            posts: 500,
            seed: 7,
            filler_vocab: 60,
            min_len: 6,
            max_len: 12,
            marker_rate: 0.7,
            toxic_mention_rate: 0.35,
            decoy_rate: 0.6,
            annotator_accuracy: 0.9,
            train_fraction: 0.7,
            val_fraction: 0.1,
        }
    }
}

fn place(rng: &mut ChaCha8Rng, tokens: &mut [String], word: &str) -> usize {
    let at = rng.random_range(0..tokens.len());
    tokens[at] = word.to_string();
    at
}

fn other_label(rng: &mut ChaCha8Rng, label: Label) -> Label {
    let others: Vec<Label> = Label::ALL.into_iter().filter(|&l| l != label).collect();
    *others.choose(rng).expect("two other labels")
}

/// Generates raw posts (before vote resolution).
pub fn generate(config: &SyntheticConfig) -> Vec<Post> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler: Vec<String> = (0..config.filler_vocab).map(|i| format!("w{i:02}")).collect();
    (0..config.posts)
        .map(|i| {
            let label = match rng.random::<f64>() {
                x if x < 0.3 => Label::Hatespeech,
                x if x < 0.6 => Label::Offensive,
                _ => Label::Normal,
            };
            let len = rng.random_range(config.min_len..=config.max_len);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| filler.choose(&mut rng).expect("filler").clone())
                .collect();
            let mut key_positions = Vec::new();
            let mut cue_positions = Vec::new();
            let mut community = None;

            if label.is_toxic() {
                if rng.random::<f64>() < config.marker_rate {
                    let markers = if label == Label::Hatespeech { &HATE_MARKERS } else { &OFFENSIVE_MARKERS };
                    let count = rng.random_range(1..=2);
                    for _ in 0..count {
                        let m = *markers.choose(&mut rng).expect("markers");
                        key_positions.push(place(&mut rng, &mut tokens, m));
                    }
                } else {
                    let cue = *AMBIGUOUS_CUES.choose(&mut rng).expect("cues");
                    key_positions.push(place(&mut rng, &mut tokens, cue));
                }
                if rng.random::<f64>() < config.toxic_mention_rate {
                    community = Some(*COMMUNITIES.choose(&mut rng).expect("communities"));
                }
            } else {
                if rng.random::<f64>() < 0.2 {
                    let cue = *AMBIGUOUS_CUES.choose(&mut rng).expect("cues");
                    cue_positions.push(place(&mut rng, &mut tokens, cue));
                }
                if rng.random::<f64>() < config.decoy_rate {
                    community = Some(*COMMUNITIES.choose(&mut rng).expect("communities"));
                }
            }
            let community_position = community.map(|(_, term)| place(&mut rng, &mut tokens, term));
            // a later placement may overwrite an earlier one
            key_positions.retain(|&p| Some(p) != community_position);

            let annotators = (0..3)
                .map(|_| {
                    let vote = if rng.random::<f64>() < config.annotator_accuracy {
                        label
                    } else {
                        other_label(&mut rng, label)
                    };
                    let rationale = vote.is_toxic().then(|| {
                        let mut r = vec![false; tokens.len()];
                        for &p in &key_positions {
                            r[p] = rng.random::<f64>() < 0.9;
                        }
                        for &p in &cue_positions {
                            r[p] = rng.random::<f64>() < 0.5;
                        }
                        if let Some(p) = community_position {
                            r[p] = rng.random::<f64>() < 0.4;
                        }
                        for slot in r.iter_mut() {
                            if !*slot && rng.random::<f64>() < 0.05 {
                                *slot = true;
                            }
                        }
                        r
                    });
                    let targets = community
                        .filter(|_| rng.random::<f64>() < 0.9)
                        .map(|(id, _)| [id.to_string()].into_iter().collect())
                        .unwrap_or_default();
                    AnnotatorRecord { label: vote, rationale, targets }
                })
                .collect();

            let u = rng.random::<f64>();
            let split = if u < config.train_fraction {
                Split::Train
            } else if u < config.train_fraction + config.val_fraction {
                Split::Val
            } else {
                Split::Test
            };
            Post {
                id: format!("syn-{i:05}"),
                tokens,
                split,
                annotators,
            }
        })
        .collect()
}

pub fn generate_json(config: &SyntheticConfig) -> String {
    serde_json::to_string(&generate(config)).expect("posts serialize")
}
