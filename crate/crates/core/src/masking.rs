//! Replacing target-community terms with a mask token.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ResolvedPost, Split};
use crate::error::{Error, Result};

const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.json");

/// Community identifier → lowercase single-token surface terms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct CommunityLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
    terms: BTreeSet<String>,
}

impl CommunityLexicon {
    pub fn new<I, C, T>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C, Vec<T>)>,
        C: Into<String>,
        T: AsRef<str>,
    {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (community, terms) in entries {
            let community = community.into();
            if terms.is_empty() {
                return Err(Error::Lexicon(format!("community {community:?} has no terms")));
            }
            let set = map.entry(community.clone()).or_default();
            for term in terms {
                let term = term.as_ref();
                if term.is_empty() || term.chars().any(char::is_whitespace) {
                    return Err(Error::Lexicon(format!(
                        "term {term:?} of {community:?} is not a single token"
                    )));
                }
                set.insert(term.to_lowercase());
            }
        }
        let terms = map.values().flatten().cloned().collect();
        Ok(CommunityLexicon {
            entries: map,
            terms,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json_str(DEFAULT_LEXICON).expect("built-in lexicon is valid")
    }

    /// Built-in lexicon extended with the corpus's own community identifiers.
    pub fn default_for(corpus: &Corpus) -> Self {
        let mut entries: BTreeMap<String, Vec<String>> = Self::builtin().into();
        for community in corpus.community_index().keys() {
            if community.chars().any(char::is_whitespace) {
                continue;
            }
            entries
                .entry(community.clone())
                .or_default()
                .push(community.to_lowercase());
        }
        Self::new(entries).expect("derived lexicon is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::json("lexicon", e))?;
        Self::new(raw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Exact match after lowercasing.
    pub fn matches(&self, token: &str) -> bool {
        !self.terms.is_empty() && self.terms.contains(&token.to_lowercase())
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for CommunityLexicon {
    type Error = Error;

    fn try_from(value: BTreeMap<String, Vec<String>>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CommunityLexicon> for BTreeMap<String, Vec<String>> {
    fn from(lexicon: CommunityLexicon) -> Self {
        lexicon
            .entries
            .into_iter()
            .map(|(c, terms)| (c, terms.into_iter().collect()))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyTo {
    #[default]
    TrainOnly,
    TrainAndEval,
}

impl FromStr for ApplyTo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train_only" => Ok(ApplyTo::TrainOnly),
            "train_and_eval" => Ok(ApplyTo::TrainAndEval),
            other => Err(format!("unknown apply_to {other:?} (expected train_only or train_and_eval)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub mask_token: String,
    pub apply_to: ApplyTo,
}

pub const DEFAULT_MASK_TOKEN: &str = "[UNK]";

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            apply_to: ApplyTo::TrainOnly,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mask_token.is_empty() {
            return Err(Error::Config(vec!["mask_token must be non-empty".into()]));
        }
        Ok(())
    }
}

/// Masks lexicon hits in place and returns how many tokens changed.
fn mask_tokens(tokens: &mut [String], lexicon: &CommunityLexicon, mask_token: &str) -> usize {
    let mut count = 0;
    for token in tokens.iter_mut() {
        if token != mask_token && lexicon.matches(token) {
            *token = mask_token.to_string();
            count += 1;
        }
    }
    count
}

pub fn mask_post(post: &ResolvedPost, lexicon: &CommunityLexicon, config: &MaskConfig) -> ResolvedPost {
    let mut masked = post.clone();
    mask_tokens(&mut masked.post.tokens, lexicon, &config.mask_token);
    masked
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl MaskCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    fn slot(&mut self, split: Split) -> &mut usize {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Masks the train split, and val/test too when configured.
pub fn mask_corpus(
    corpus: Corpus,
    lexicon: &CommunityLexicon,
    config: &MaskConfig,
) -> (Corpus, MaskCounts) {
    let mut counts = MaskCounts::default();
    let masked = corpus.map_posts(|mut post| {
        let split = post.split();
        if split == Split::Train || config.apply_to == ApplyTo::TrainAndEval {
            *counts.slot(split) += mask_tokens(&mut post.post.tokens, lexicon, &config.mask_token);
        }
        post
    });
    (masked, counts)
}
