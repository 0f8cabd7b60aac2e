//! Dataset schema, loading and gold-label resolution.
//!
//! A corpus file is a JSON array of posts. Each post carries its tokens, the
//! split it belongs to and one record per annotator (label, optional binary
//! rationale, target communities). Loading validates every post, resolves
//! annotator votes into gold values and drops posts that cannot be resolved.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hatespeech,
    Offensive,
    Normal,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Hatespeech, Label::Offensive, Label::Normal];
    pub const COUNT: usize = 3;

    /// Position of this label in probability vectors.
    pub fn index(self) -> usize {
        match self {
            Label::Hatespeech => 0,
            Label::Offensive => 1,
            Label::Normal => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn is_toxic(self) -> bool {
        self != Label::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hatespeech => "hatespeech",
            Label::Offensive => "offensive",
            Label::Normal => "normal",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hatespeech" => Ok(Label::Hatespeech),
            "offensive" => Ok(Label::Offensive),
            "normal" => Ok(Label::Normal),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorRecord {
    pub label: Label,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "binary_vector"
    )]
    pub rationale: Option<Vec<bool>>,
    #[serde(default)]
    pub targets: BTreeSet<String>,
}

impl AnnotatorRecord {
    pub fn new(label: Label, rationale: Option<Vec<bool>>, targets: &[&str]) -> Self {
        AnnotatorRecord {
            label,
            rationale,
            targets: targets.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub tokens: Vec<String>,
    pub split: Split,
    pub annotators: Vec<AnnotatorRecord>,
}

impl Post {
    /// Checks the per-post invariants; returns the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err("no tokens".into());
        }
        if self.annotators.is_empty() {
            return Err("no annotators".into());
        }
        for (i, record) in self.annotators.iter().enumerate() {
            match &record.rationale {
                Some(r) if r.len() != self.tokens.len() => {
                    return Err(format!(
                        "annotator {i}: rationale length {} != token length {}",
                        r.len(),
                        self.tokens.len()
                    ));
                }
                None if record.label.is_toxic() => {
                    return Err(format!(
                        "annotator {i}: rationale absent for label {}",
                        record.label
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Rationale vectors supplied by annotators, in annotator order.
    pub fn rationales(&self) -> Vec<&[bool]> {
        self.annotators
            .iter()
            .filter_map(|a| a.rationale.as_deref())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedPost {
    pub post: Post,
    pub gold_label: Label,
    pub gold_targets: BTreeSet<String>,
    pub gold_rationale_union: Vec<bool>,
}

impl ResolvedPost {
    /// Resolves votes for a validated post. `None` when no label wins a strict majority.
    pub fn resolve(post: Post) -> Option<ResolvedPost> {
        let gold_label = resolve_label(&post.annotators)?;
        let gold_targets = resolve_targets(&post.annotators);
        let mut union = vec![false; post.tokens.len()];
        for rationale in post.rationales() {
            for (slot, &marked) in union.iter_mut().zip(rationale) {
                *slot |= marked;
            }
        }
        Some(ResolvedPost {
            post,
            gold_label,
            gold_targets,
            gold_rationale_union: union,
        })
    }

    pub fn id(&self) -> &str {
        &self.post.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.post.tokens
    }

    pub fn split(&self) -> Split {
        self.post.split
    }

    pub fn mentions(&self, community: &str) -> bool {
        self.gold_targets.contains(community)
    }
}

/// Label held by a strict majority of annotators, if any.
pub fn resolve_label(records: &[AnnotatorRecord]) -> Option<Label> {
    let mut counts = [0usize; Label::COUNT];
    for record in records {
        counts[record.label.index()] += 1;
    }
    Label::ALL
        .into_iter()
        .find(|label| 2 * counts[label.index()] > records.len())
}

/// Communities named by at least `ceil(n / 2)` of the `n` annotators.
pub fn resolve_targets(records: &[AnnotatorRecord]) -> BTreeSet<String> {
    let threshold = records.len().div_ceil(2);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for record in records {
        for target in &record.targets {
            *counts.entry(target.as_str()).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, count)| count >= threshold.max(1))
        .map(|(community, _)| community.to_string())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub total: usize,
    pub loaded: usize,
    pub excluded: Vec<Exclusion>,
    /// Toxic-gold posts where no annotator marked any token.
    pub toxic_without_rationale: Vec<String>,
    pub per_split: BTreeMap<Split, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<ResolvedPost>,
    community_index: BTreeMap<String, Vec<String>>,
}

impl Corpus {
    /// Builds a corpus from already resolved posts. Fails on duplicate ids.
    pub fn from_resolved(posts: Vec<ResolvedPost>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for post in &posts {
            if !seen.insert(post.id()) {
                return Err(Error::Schema {
                    id: post.id().to_string(),
                    reason: "duplicate post id".into(),
                });
            }
        }
        Ok(Self::build(posts))
    }

    fn build(posts: Vec<ResolvedPost>) -> Corpus {
        let mut community_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for post in &posts {
            for community in &post.gold_targets {
                community_index
                    .entry(community.clone())
                    .or_default()
                    .push(post.id().to_string());
            }
        }
        Corpus {
            posts,
            community_index,
        }
    }

    /// Parses and validates corpus JSON. Structural errors abort the load;
    /// invariant violations and unresolvable votes exclude the post.
    pub fn from_json_str(text: &str) -> Result<(Corpus, LoadSummary)> {
        let raw: Vec<serde_json::Value> =
            serde_json::from_str(text).map_err(|e| Error::json("corpus", e))?;
        let mut summary = LoadSummary {
            total: raw.len(),
            ..LoadSummary::default()
        };
        let mut seen = HashSet::new();
        let mut posts = Vec::with_capacity(raw.len());
        for (position, value) in raw.into_iter().enumerate() {
            let id = value
                .get("id")
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .unwrap_or_else(|| format!("#{position}"));
            let post: Post = serde_json::from_value(value).map_err(|e| Error::Schema {
                id: id.clone(),
                reason: e.to_string(),
            })?;
            let mut exclude = |reason: String| {
                summary.excluded.push(Exclusion {
                    id: id.clone(),
                    reason,
                })
            };
            if !seen.insert(post.id.clone()) {
                exclude("duplicate post id".into());
                continue;
            }
            if let Err(reason) = post.validate() {
                exclude(reason);
                continue;
            }
            match ResolvedPost::resolve(post) {
                Some(resolved) => {
                    if resolved.gold_label.is_toxic()
                        && !resolved.gold_rationale_union.iter().any(|&m| m)
                    {
                        summary.toxic_without_rationale.push(id.clone());
                    }
                    *summary.per_split.entry(resolved.split()).or_default() += 1;
                    posts.push(resolved);
                }
                None => exclude("no strict majority label".into()),
            }
        }
        summary.loaded = posts.len();
        Ok((Self::build(posts), summary))
    }

    pub fn posts(&self) -> &[ResolvedPost] {
        &self.posts
    }

    pub fn into_posts(self) -> Vec<ResolvedPost> {
        self.posts
    }

    /// Posts of one split, in file order.
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ResolvedPost> + '_ {
        self.posts.iter().filter(move |p| p.split() == split)
    }

    pub fn split_vec(&self, split: Split) -> Vec<ResolvedPost> {
        self.split(split).cloned().collect()
    }

    /// Community → ids of posts whose gold targets contain it.
    pub fn community_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.community_index
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Applies `f` to every post, keeping ids and splits. Used by masking.
    pub(crate) fn map_posts(self, mut f: impl FnMut(ResolvedPost) -> ResolvedPost) -> Corpus {
        let posts = self.posts.into_iter().map(&mut f).collect();
        Corpus {
            posts,
            community_index: self.community_index,
        }
    }

    /// Serializes the underlying raw posts back into corpus JSON.
    pub fn to_json_string(&self) -> String {
        let raw: Vec<&Post> = self.posts.iter().map(|p| &p.post).collect();
        serde_json::to_string(&raw).expect("posts serialize")
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Corpus, LoadSummary)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_json_str(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::json(path.display().to_string(), source),
        other => other,
    })
}

/// Rationales are 0/1 integer arrays on the wire.
mod binary_vector {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<bool>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bits) => s.collect_seq(bits.iter().map(|&b| b as u8)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<bool>>, D::Error> {
        let raw: Option<Vec<i64>> = Option::deserialize(d)?;
        raw.map(|values| {
            values
                .into_iter()
                .map(|v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(D::Error::custom(format!(
                        "rationale entry {other} is not 0 or 1"
                    ))),
                })
                .collect()
        })
        .transpose()
    }
}
