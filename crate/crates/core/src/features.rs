//! Topic-wise feature extraction and the fixed-layout feature vector.
//!
//! Every topic of the dictionary owns a slot of 93 word-category frequencies,
//! 222 COVAREP functionals, 15 formant functionals and 60 action-unit
//! functionals. A vector starts with gender, the topic presence bits and one
//! scalar per key topic. Slots of topics that were not discussed hold
//! [`MISSING`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FrameSeries, Session, Speaker, StreamKind, Window};
use crate::exec;
use crate::topic::{merge_segments, normalize_sentence, segment_interview, TopicDictionary, TopicOccurrence};

/// Marker for slots without data.
pub const MISSING: f64 = -1.0;
pub const WORD_CATEGORIES: usize = 93;
pub const STATS_PER_CHANNEL: usize = 3;
pub const COVAREP_DIM: usize = 74 * STATS_PER_CHANNEL;
pub const FORMANT_DIM: usize = 5 * STATS_PER_CHANNEL;
pub const AUDIO_DIM: usize = COVAREP_DIM + FORMANT_DIM;
pub const VIDEO_DIM: usize = 20 * STATS_PER_CHANNEL;
/// Per-topic slot: word categories, COVAREP, formant, AU.
pub const TOPIC_BLOCK: usize = WORD_CATEGORIES + AUDIO_DIM + VIDEO_DIM;
/// Gender, whole-interview word categories, audio and video functionals.
pub const CONTEXT_UNAWARE_DIM: usize = 1 + WORD_CATEGORIES + AUDIO_DIM + VIDEO_DIM;

const DEFAULT_WORD_DICTIONARY: &str = include_str!("../data/word_categories.dic");
const DEFAULT_KEY_RULES: &str = include_str!("../data/key_topic_rules.toml");

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("frame slice has no rows")]
    EmptySegment,
    #[error("layout expects {expected} topics but the dictionary has {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("word-category dictionary must define exactly {WORD_CATEGORIES} categories, found {0}")]
    WrongCategoryCount(usize),
    #[error("unknown word category `{0}`")]
    UnknownCategory(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot parse key-topic rules: {0}")]
    RuleParse(String),
    #[error("key-topic rule for topic {topic}: {reason}")]
    InvalidRule { topic: usize, reason: String },
}

/// Word → category map with exact and trailing-wildcard prefix entries.
#[derive(Debug, Clone)]
pub struct WordCategoryDictionary {
    names: Vec<String>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: HashMap<String, Vec<usize>>,
}

impl WordCategoryDictionary {
    /// `entries` pairs a pattern (`word` or `prefix*`) with category indices.
    pub fn new(names: Vec<String>, entries: Vec<(String, Vec<usize>)>) -> Result<Self, FeatureError> {
        if names.len() != WORD_CATEGORIES {
            return Err(FeatureError::WrongCategoryCount(names.len()));
        }
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: HashMap<String, Vec<usize>> = HashMap::new();
        for (pattern, cats) in entries {
            if let Some(&bad) = cats.iter().find(|&&c| c >= WORD_CATEGORIES) {
                return Err(FeatureError::UnknownCategory(bad.to_string()));
            }
            let pattern = pattern.trim().to_lowercase();
            let (target, word) = match pattern.strip_suffix('*') {
                Some(p) => (&mut prefixes, p.to_string()),
                None => (&mut exact, pattern),
            };
            let slot = target.entry(word).or_default();
            for c in cats {
                if !slot.contains(&c) {
                    slot.push(c);
                }
            }
        }
        Ok(Self { names, exact, prefixes })
    }

    /// Parses the `[categories]` / `[entries]` text format. Entries read
    /// `word[*] : cat, cat, ...` where a category is a name or a 1-based number.
    pub fn parse(raw: &str) -> Result<Self, FeatureError> {
        enum Section {
            None,
            Categories,
            Entries,
        }
        let mut section = Section::None;
        let mut names = Vec::new();
        let mut raw_entries: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.to_ascii_lowercase().as_str() {
                "[categories]" => {
                    section = Section::Categories;
                    continue;
                }
                "[entries]" => {
                    section = Section::Entries;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Categories => names.push(line.to_string()),
                Section::Entries => {
                    let (word, cats) = line.split_once(':').ok_or_else(|| FeatureError::Parse {
                        line: i + 1,
                        reason: "expected `word : categories`".into(),
                    })?;
                    let cats = cats.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
                    raw_entries.push((i + 1, word.trim().to_string(), cats));
                }
                Section::None => {
                    return Err(FeatureError::Parse { line: i + 1, reason: "content outside a section".into() })
                }
            }
        }
        let lookup: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.to_lowercase(), i)).collect();
        let mut entries = Vec::with_capacity(raw_entries.len());
        for (_, word, cats) in raw_entries {
            let idx = cats
                .iter()
                .map(|c| match c.parse::<usize>() {
                    Ok(n) if (1..=names.len()).contains(&n) => Ok(n - 1),
                    _ => lookup.get(&c.to_lowercase()).copied().ok_or_else(|| FeatureError::UnknownCategory(c.clone())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            entries.push((word, idx));
        }
        Self::new(names, entries)
    }

    /// Small illustrative dictionary shipped with the crate.
    pub fn example() -> Self {
        Self::parse(DEFAULT_WORD_DICTIONARY).expect("bundled word dictionary is valid")
    }

    pub fn category_names(&self) -> &[String] {
        &self.names
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Categories of a token: exact entry first, else the longest prefix entry.
    pub fn lookup(&self, token: &str) -> Option<&[usize]> {
        if let Some(c) = self.exact.get(token) {
            return Some(c);
        }
        let mut ends: Vec<usize> = token.char_indices().map(|(i, _)| i).skip(1).collect();
        ends.push(token.len());
        ends.iter().rev().find_map(|&end| self.prefixes.get(&token[..end]).map(Vec::as_slice))
    }
}

/// Per-category share of tokens in `text` (tokens split on spaces).
pub fn liwc_counts(dict: &WordCategoryDictionary, text: &str) -> Vec<f64> {
    let mut counts = vec![0.0; WORD_CATEGORIES];
    let mut tokens = 0usize;
    for token in text.split(' ').filter(|t| !t.is_empty()) {
        tokens += 1;
        if let Some(cats) = dict.lookup(token) {
            for &c in cats {
                counts[c] += 1.0;
            }
        }
    }
    if tokens > 0 {
        let n = tokens as f64;
        counts.iter_mut().for_each(|c| *c /= n);
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyCategory {
    pub name: String,
    pub phrases: Vec<String>,
}

/// Ordered answer categories of one key topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyTopicRule {
    pub topic: usize,
    pub categories: Vec<KeyCategory>,
}

impl KeyTopicRule {
    fn normalized(mut self) -> Result<Self, FeatureError> {
        let bad = |reason: String| FeatureError::InvalidRule { topic: self.topic, reason };
        if !(2..=3).contains(&self.categories.len()) {
            return Err(bad(format!("needs 2 or 3 categories, has {}", self.categories.len())));
        }
        let mut owner: HashMap<String, usize> = HashMap::new();
        for (ci, cat) in self.categories.iter_mut().enumerate() {
            cat.phrases = cat.phrases.iter().map(|p| normalize_sentence(p)).filter(|p| !p.is_empty()).collect();
            for p in &cat.phrases {
                if owner.get(p).is_some_and(|&o| o != ci) {
                    return Err(bad(format!("phrase `{p}` belongs to two categories")));
                }
                owner.insert(p.clone(), ci);
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KeyTopicRules {
    #[serde(rename = "rule", default)]
    pub rules: Vec<KeyTopicRule>,
}

impl KeyTopicRules {
    pub fn new(rules: Vec<KeyTopicRule>) -> Result<Self, FeatureError> {
        let mut seen = Vec::new();
        let mut out = Vec::with_capacity(rules.len());
        for r in rules {
            if seen.contains(&r.topic) {
                return Err(FeatureError::InvalidRule { topic: r.topic, reason: "duplicate rule".into() });
            }
            seen.push(r.topic);
            out.push(r.normalized()?);
        }
        Ok(Self { rules: out })
    }

    pub fn from_toml(raw: &str) -> Result<Self, FeatureError> {
        let parsed: KeyTopicRules = toml::from_str(raw).map_err(|e| FeatureError::RuleParse(e.to_string()))?;
        Self::new(parsed.rules)
    }

    /// Shipped rules for topics 76–83.
    pub fn example() -> Self {
        Self::from_toml(DEFAULT_KEY_RULES).expect("bundled key-topic rules are valid")
    }

    pub fn for_topic(&self, topic: usize) -> Option<&KeyTopicRule> {
        self.rules.iter().find(|r| r.topic == topic)
    }

    /// Every rule must target a key topic of `dict`.
    pub fn check_against(&self, dict: &TopicDictionary) -> Result<(), FeatureError> {
        let keys = dict.key_topics();
        match self.rules.iter().find(|r| !keys.contains(&r.topic)) {
            Some(r) => Err(FeatureError::InvalidRule { topic: r.topic, reason: "topic is not a key topic".into() }),
            None => Ok(()),
        }
    }
}

/// Code of the first category (in rule order) whose phrase occurs in `text`.
pub fn classify_key_topic(rule: &KeyTopicRule, text: &str) -> Option<usize> {
    let text = normalize_sentence(text);
    if text.is_empty() {
        return None;
    }
    rule.categories.iter().position(|c| c.phrases.iter().any(|p| text.contains(p.as_str())))
}

/// Mean, max and min of every channel over the finite values of the frames,
/// laid out channel-major. Channels without a finite value yield [`MISSING`].
pub fn apply_functionals(frames: &FrameSeries) -> Result<Vec<f64>, FeatureError> {
    if frames.is_empty() {
        return Err(FeatureError::EmptySegment);
    }
    let width = frames.channel_count();
    let mut sum = vec![0.0; width];
    let mut count = vec![0usize; width];
    let mut max = vec![f64::NEG_INFINITY; width];
    let mut min = vec![f64::INFINITY; width];
    for i in 0..frames.len() {
        for (c, &v) in frames.row(i).iter().enumerate() {
            if v.is_finite() {
                sum[c] += v;
                count[c] += 1;
                max[c] = max[c].max(v);
                min[c] = min[c].min(v);
            }
        }
    }
    let mut out = Vec::with_capacity(width * STATS_PER_CHANNEL);
    for c in 0..width {
        if count[c] == 0 {
            out.extend([MISSING; STATS_PER_CHANNEL]);
        } else {
            // clamp guards against the mean drifting outside [min, max] by rounding
            let mean = (sum[c] / count[c] as f64).clamp(min[c], max[c]);
            out.extend([mean, max[c], min[c]]);
        }
    }
    Ok(out)
}

fn functionals_or_missing(series: &FrameSeries, windows: &[Window], dim: usize) -> Vec<f64> {
    match apply_functionals(&series.gather(windows)) {
        Ok(v) if v.len() == dim => v,
        _ => vec![MISSING; dim],
    }
}

/// COVAREP (74×3) then formant (5×3) functionals over the windows.
pub fn audio_features_for_segment(covarep: &FrameSeries, formant: &FrameSeries, windows: &[Window]) -> Vec<f64> {
    let mut out = functionals_or_missing(covarep, windows, COVAREP_DIM);
    out.extend(functionals_or_missing(formant, windows, FORMANT_DIM));
    out
}

/// Action-unit functionals (20×3) over the windows.
pub fn video_features_for_segment(aus: &FrameSeries, windows: &[Window]) -> Vec<f64> {
    functionals_or_missing(aus, windows, VIDEO_DIM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Mean,
    Max,
    Min,
}

impl Stat {
    pub const ALL: [Stat; 3] = [Stat::Mean, Stat::Max, Stat::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Max => "max",
            Stat::Min => "min",
        }
    }

    fn offset(self) -> usize {
        self as usize
    }
}

/// Frame-stream modality of a functional feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Covarep,
    Formant,
    Au,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Covarep => "covarep",
            Stream::Formant => "formant",
            Stream::Au => "au",
        }
    }

    pub fn kind(self) -> StreamKind {
        match self {
            Stream::Covarep => StreamKind::Covarep,
            Stream::Formant => StreamKind::Formant,
            Stream::Au => StreamKind::Au,
        }
    }

    pub fn channels(self) -> usize {
        self.kind().channel_count()
    }

    /// Offset of the stream's functionals inside a topic slot.
    fn block_offset(self) -> usize {
        match self {
            Stream::Covarep => WORD_CATEGORIES,
            Stream::Formant => WORD_CATEGORIES + COVAREP_DIM,
            Stream::Au => WORD_CATEGORIES + AUDIO_DIM,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "covarep" => Some(Stream::Covarep),
            "formant" => Some(Stream::Formant),
            "au" => Some(Stream::Au),
            _ => None,
        }
    }
}

/// What a vector slot holds. Topics are 1-based dictionary indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureDescriptor {
    Gender,
    Presence { topic: usize },
    Key { topic: usize },
    Liwc { topic: usize, category: usize },
    Functional { topic: usize, stream: Stream, channel: usize, stat: Stat },
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FeatureDescriptor::Gender => write!(f, "gender"),
            FeatureDescriptor::Presence { topic } => write!(f, "t{topic:02}.presence"),
            FeatureDescriptor::Key { topic } => write!(f, "t{topic:02}.key"),
            FeatureDescriptor::Liwc { topic, category } => write!(f, "t{topic:02}.liwc.c{category:02}"),
            FeatureDescriptor::Functional { topic, stream, channel, stat } => {
                write!(f, "t{topic:02}.{}.ch{channel:02}.{}", stream.as_str(), stat.as_str())
            }
        }
    }
}

impl std::str::FromStr for FeatureDescriptor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("not a feature name: `{s}`");
        if s == "gender" {
            return Ok(FeatureDescriptor::Gender);
        }
        let parts: Vec<&str> = s.split('.').collect();
        let topic = parts
            .first()
            .and_then(|t| t.strip_prefix('t'))
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(err)?;
        let num = |p: &str, prefix: &str| p.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok());
        match parts.as_slice() {
            [_, "presence"] => Ok(FeatureDescriptor::Presence { topic }),
            [_, "key"] => Ok(FeatureDescriptor::Key { topic }),
            [_, "liwc", c] => Ok(FeatureDescriptor::Liwc { topic, category: num(c, "c").ok_or_else(err)? }),
            [_, stream, ch, stat] => {
                let stream = Stream::parse(stream).ok_or_else(err)?;
                let stat = Stat::ALL.into_iter().find(|x| x.as_str() == *stat).ok_or_else(err)?;
                Ok(FeatureDescriptor::Functional { topic, stream, channel: num(ch, "ch").ok_or_else(err)?, stat })
            }
            _ => Err(err()),
        }
    }
}

/// Dimension of each feature family in a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCounts {
    pub gender: usize,
    pub presence: usize,
    pub key: usize,
    pub liwc: usize,
    pub formant: usize,
    pub covarep: usize,
    pub au: usize,
}

impl BlockCounts {
    pub fn total(&self) -> usize {
        self.gender + self.presence + self.key + self.liwc + self.formant + self.covarep + self.au
    }
}

/// Index ↔ descriptor map of the topic-wise vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    topics: usize,
    key_topics: Vec<usize>,
}

impl FeatureLayout {
    pub fn new(topics: usize, key_topics: Vec<usize>) -> Self {
        Self { topics, key_topics }
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn key_topics(&self) -> &[usize] {
        &self.key_topics
    }

    fn topic_base(&self) -> usize {
        1 + self.topics + self.key_topics.len()
    }

    pub fn total_dim(&self) -> usize {
        self.topic_base() + self.topics * TOPIC_BLOCK
    }

    pub fn block_counts(&self) -> BlockCounts {
        BlockCounts {
            gender: 1,
            presence: self.topics,
            key: self.key_topics.len(),
            liwc: self.topics * WORD_CATEGORIES,
            formant: self.topics * FORMANT_DIM,
            covarep: self.topics * COVAREP_DIM,
            au: self.topics * VIDEO_DIM,
        }
    }

    /// First index of a topic's slot.
    pub fn topic_offset(&self, topic: usize) -> usize {
        self.topic_base() + (topic - 1) * TOPIC_BLOCK
    }

    pub fn index_of(&self, d: &FeatureDescriptor) -> Option<usize> {
        let topic_ok = |t: usize| (1..=self.topics).contains(&t);
        match *d {
            FeatureDescriptor::Gender => Some(0),
            FeatureDescriptor::Presence { topic } => topic_ok(topic).then_some(topic),
            FeatureDescriptor::Key { topic } => {
                self.key_topics.iter().position(|&k| k == topic).map(|p| 1 + self.topics + p)
            }
            FeatureDescriptor::Liwc { topic, category } => {
                (topic_ok(topic) && category < WORD_CATEGORIES).then(|| self.topic_offset(topic) + category)
            }
            FeatureDescriptor::Functional { topic, stream, channel, stat } => (topic_ok(topic)
                && channel < stream.channels())
            .then(|| self.topic_offset(topic) + stream.block_offset() + channel * STATS_PER_CHANNEL + stat.offset()),
        }
    }

    pub fn descriptor(&self, index: usize) -> Option<FeatureDescriptor> {
        if index >= self.total_dim() {
            return None;
        }
        if index == 0 {
            return Some(FeatureDescriptor::Gender);
        }
        if index <= self.topics {
            return Some(FeatureDescriptor::Presence { topic: index });
        }
        if index < self.topic_base() {
            return Some(FeatureDescriptor::Key { topic: self.key_topics[index - 1 - self.topics] });
        }
        let rel = index - self.topic_base();
        let topic = rel / TOPIC_BLOCK + 1;
        let inner = rel % TOPIC_BLOCK;
        if inner < WORD_CATEGORIES {
            return Some(FeatureDescriptor::Liwc { topic, category: inner });
        }
        let stream = if inner < Stream::Formant.block_offset() {
            Stream::Covarep
        } else if inner < Stream::Au.block_offset() {
            Stream::Formant
        } else {
            Stream::Au
        };
        let k = inner - stream.block_offset();
        Some(FeatureDescriptor::Functional {
            topic,
            stream,
            channel: k / STATS_PER_CHANNEL,
            stat: Stat::ALL[k % STATS_PER_CHANNEL],
        })
    }

    pub fn name(&self, index: usize) -> Option<String> {
        self.descriptor(index).map(|d| d.to_string())
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        name.parse::<FeatureDescriptor>().ok().and_then(|d| self.index_of(&d))
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.total_dim()).map(|i| self.name(i).expect("index in range")).collect()
    }
}

pub fn layout_for(dict: &TopicDictionary) -> FeatureLayout {
    FeatureLayout::new(dict.len(), dict.key_topics())
}

/// Names of the whole-interview (context-unaware) vector.
pub fn context_unaware_names() -> Vec<String> {
    let mut names = vec!["gender".to_string()];
    names.extend((0..WORD_CATEGORIES).map(|c| format!("all.liwc.c{c:02}")));
    for stream in [Stream::Covarep, Stream::Formant, Stream::Au] {
        for ch in 0..stream.channels() {
            for stat in Stat::ALL {
                names.push(format!("all.{}.ch{ch:02}.{}", stream.as_str(), stat.as_str()));
            }
        }
    }
    names
}

/// A dense feature vector; absent data is [`MISSING`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dictionaries and layout shared by every session's featurization.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub topics: TopicDictionary,
    pub words: WordCategoryDictionary,
    pub rules: KeyTopicRules,
    pub layout: FeatureLayout,
}

impl FeatureContext {
    pub fn new(topics: TopicDictionary, words: WordCategoryDictionary, rules: KeyTopicRules) -> Result<Self, FeatureError> {
        rules.check_against(&topics)?;
        let layout = layout_for(&topics);
        Ok(Self { topics, words, rules, layout })
    }

    /// The shipped example dictionaries.
    pub fn example() -> Self {
        Self::new(TopicDictionary::example(), WordCategoryDictionary::example(), KeyTopicRules::example())
            .expect("bundled dictionaries agree")
    }
}

/// Fills the topic-wise vector of one session from its merged topic occurrences.
pub fn assemble_vector(
    session: &Session,
    occurrences: &[TopicOccurrence],
    ctx: &FeatureContext,
) -> Result<FeatureVector, FeatureError> {
    let layout = &ctx.layout;
    if layout.topics() != ctx.topics.len() {
        return Err(FeatureError::LayoutMismatch { expected: layout.topics(), found: ctx.topics.len() });
    }
    let mut v = vec![MISSING; layout.total_dim()];
    v[0] = f64::from(session.meta.gender);
    v[1..=layout.topics()].fill(0.0);
    for occ in occurrences {
        let t = occ.topic_index;
        if !(1..=layout.topics()).contains(&t) {
            return Err(FeatureError::LayoutMismatch { expected: layout.topics(), found: t });
        }
        v[t] = 1.0;
        if let Some(slot) = layout.index_of(&FeatureDescriptor::Key { topic: t }) {
            if let Some(code) = ctx.rules.for_topic(t).and_then(|r| classify_key_topic(r, &occ.participant_text)) {
                v[slot] = code as f64;
            }
        }
        let base = layout.topic_offset(t);
        let block = &mut v[base..base + TOPIC_BLOCK];
        block[..WORD_CATEGORIES].copy_from_slice(&liwc_counts(&ctx.words, &occ.participant_text));
        block[WORD_CATEGORIES..WORD_CATEGORIES + AUDIO_DIM]
            .copy_from_slice(&audio_features_for_segment(&session.covarep, &session.formant, &occ.windows));
        block[WORD_CATEGORIES + AUDIO_DIM..].copy_from_slice(&video_features_for_segment(&session.aus, &occ.windows));
    }
    Ok(FeatureVector(v))
}

/// Segments, merges and assembles one session.
pub fn featurize_session(session: &Session, ctx: &FeatureContext) -> Result<FeatureVector, FeatureError> {
    let occurrences = merge_segments(&segment_interview(&ctx.topics, &session.transcript));
    assemble_vector(session, &occurrences, ctx)
}

pub fn featurize_sessions(sessions: &[Session], ctx: &FeatureContext) -> Result<Vec<FeatureVector>, FeatureError> {
    exec::map(sessions, |s| featurize_session(s, ctx)).into_iter().collect()
}

/// Whole-interview vector: gender, word categories of all participant speech,
/// and functionals over every frame of each stream.
pub fn context_unaware_vector(session: &Session, words: &WordCategoryDictionary) -> FeatureVector {
    let text = session
        .transcript
        .iter()
        .filter(|u| u.speaker == Speaker::Participant)
        .map(|u| u.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let mut v = Vec::with_capacity(CONTEXT_UNAWARE_DIM);
    v.push(f64::from(session.meta.gender));
    v.extend(liwc_counts(words, &normalize_sentence(&text)));
    let all = [Window::new(f64::NEG_INFINITY, f64::INFINITY)];
    v.extend(audio_features_for_segment(&session.covarep, &session.formant, &all));
    v.extend(video_features_for_segment(&session.aus, &all));
    FeatureVector(v)
}

pub fn context_unaware_vectors(sessions: &[Session], words: &WordCategoryDictionary) -> Vec<FeatureVector> {
    exec::map(sessions, |s| context_unaware_vector(s, words))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SessionMeta, Split, Utterance, FRAME_HOP};
    use proptest::prelude::*;

    fn toy_words() -> WordCategoryDictionary {
        let mut names: Vec<String> = (0..WORD_CATEGORIES).map(|i| format!("cat{i}")).collect();
        names[0] = "neg".into();
        names[1] = "pos".into();
        WordCategoryDictionary::new(
            names,
            vec![("sad".into(), vec![0]), ("happy".into(), vec![1]), ("abandon*".into(), vec![0, 2]), ("ab*".into(), vec![3])],
        )
        .unwrap()
    }

    #[test]
    fn word_category_frequencies() {
        let d = toy_words();
        let c = liwc_counts(&d, "sad sad happy");
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(c[2..].iter().all(|&x| x == 0.0));
        assert_eq!(liwc_counts(&d, ""), vec![0.0; WORD_CATEGORIES]);
        // longest prefix wins over the shorter `ab*`
        let c = liwc_counts(&d, "abandoned");
        assert_eq!((c[0], c[2], c[3]), (1.0, 1.0, 0.0));
        let c = liwc_counts(&d, "abs");
        assert_eq!(c[3], 1.0);
    }

    #[test]
    fn word_dictionary_validation() {
        assert_eq!(
            WordCategoryDictionary::new(vec!["a".into()], vec![]).unwrap_err(),
            FeatureError::WrongCategoryCount(1)
        );
        let names: Vec<String> = (0..WORD_CATEGORIES).map(|i| format!("c{i}")).collect();
        assert!(WordCategoryDictionary::new(names, vec![("x".into(), vec![93])]).is_err());
        let ex = WordCategoryDictionary::example();
        assert_eq!(ex.category_names().len(), 93);
        let sad = ex.category_index("sad").unwrap();
        assert!(ex.lookup("sadness").unwrap().contains(&sad));
        let text = "[categories]\n".to_string()
            + &(0..93).map(|i| format!("c{i}\n")).collect::<String>()
            + "[entries]\nfoo : c3, 5\nbar* : c0\n";
        let d = WordCategoryDictionary::parse(&text).unwrap();
        assert_eq!(d.lookup("foo").unwrap(), &[3, 4]);
        assert_eq!(d.lookup("barn").unwrap(), &[0]);
        assert!(matches!(WordCategoryDictionary::parse(&(text + "baz : nope\n")), Err(FeatureError::UnknownCategory(_))));
    }

    proptest! {
        #[test]
        fn frequencies_are_bounded(words in proptest::collection::vec("sad|happy|abandon[a-z]{0,3}|zzz", 0..30)) {
            let c = liwc_counts(&toy_words(), &words.join(" "));
            prop_assert!(c.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn key_topic_classification() {
        let rules = KeyTopicRules::example();
        let sleep = rules.for_topic(78).unwrap();
        assert_eq!(classify_key_topic(sleep, "oh no problem at all"), Some(0));
        assert_eq!(classify_key_topic(sleep, "well it depends"), Some(1));
        assert_eq!(classify_key_topic(sleep, "it's really difficult"), Some(2));
        assert_eq!(classify_key_topic(sleep, "i slept on a boat"), None);
        assert_eq!(classify_key_topic(sleep, ""), None);
        assert_eq!(rules.rules.len(), 8);
        rules.check_against(&TopicDictionary::example()).unwrap();
    }

    #[test]
    fn key_rule_validation() {
        let cat = |n: &str, p: &[&str]| KeyCategory { name: n.into(), phrases: p.iter().map(|s| s.to_string()).collect() };
        let one = KeyTopicRule { topic: 78, categories: vec![cat("a", &["x"])] };
        assert!(KeyTopicRules::new(vec![one]).is_err());
        let overlap = KeyTopicRule { topic: 78, categories: vec![cat("a", &["x y"]), cat("b", &["X Y!"])] };
        assert!(KeyTopicRules::new(vec![overlap]).is_err());
        let not_key = KeyTopicRule { topic: 3, categories: vec![cat("a", &["x"]), cat("b", &["y"])] };
        let r = KeyTopicRules::new(vec![not_key]).unwrap();
        assert!(r.check_against(&TopicDictionary::example()).is_err());
    }

    fn series(kind: StreamKind, rows: &[Vec<f64>]) -> FrameSeries {
        let t = (0..rows.len()).map(|i| i as f64 * FRAME_HOP).collect();
        FrameSeries::new(
            t,
            rows.concat(),
            kind.channel_names().iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    fn one_channel(values: &[f64]) -> FrameSeries {
        let t = (0..values.len()).map(|i| i as f64).collect();
        FrameSeries::new(t, values.to_vec(), vec!["c".into()]).unwrap()
    }

    #[test]
    fn functional_examples() {
        assert_eq!(apply_functionals(&one_channel(&[1.0, 2.0, 3.0])).unwrap(), vec![2.0, 3.0, 1.0]);
        assert_eq!(apply_functionals(&one_channel(&[5.0, 5.0])).unwrap(), vec![5.0, 5.0, 5.0]);
        // oracle: statistics of the finite subset {1, 3}
        let finite = [1.0f64, 3.0];
        let expect = vec![finite.iter().sum::<f64>() / 2.0, 3.0, 1.0];
        assert_eq!(apply_functionals(&one_channel(&[1.0, f64::NAN, 3.0])).unwrap(), expect);
        assert_eq!(apply_functionals(&one_channel(&[f64::NAN])).unwrap(), vec![MISSING; 3]);
        assert_eq!(apply_functionals(&one_channel(&[])), Err(FeatureError::EmptySegment));
    }

    proptest! {
        #[test]
        fn functionals_are_ordered(values in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
            let f = apply_functionals(&one_channel(&values)).unwrap();
            prop_assert!(f[2] <= f[0] && f[0] <= f[1]);
        }
    }

    #[test]
    fn segment_functionals() {
        let cov = series(StreamKind::Covarep, &vec![vec![1.0; 74]; 100]);
        let fmt = series(StreamKind::Formant, &vec![vec![2.0; 5]; 100]);
        let aus = series(StreamKind::Au, &vec![vec![0.5; 20]; 100]);
        let w = [Window::new(0.1, 0.3)];
        let a = audio_features_for_segment(&cov, &fmt, &w);
        assert_eq!(a.len(), 237);
        assert!(a[..222].iter().all(|&x| x == 1.0));
        assert!(a[222..].iter().all(|&x| x == 2.0));
        let v = video_features_for_segment(&aus, &w);
        assert_eq!(v, vec![0.5; 60]);
        let empty = [Window::new(50.0, 60.0)];
        assert_eq!(audio_features_for_segment(&cov, &fmt, &empty), vec![MISSING; 237]);
        assert_eq!(video_features_for_segment(&aus, &empty), vec![MISSING; 60]);
        // single frame: mean = max = min
        let mut rows = vec![vec![0.0; 74]; 10];
        rows[4] = (0..74).map(|c| c as f64).collect();
        let cov = series(StreamKind::Covarep, &rows);
        let a = audio_features_for_segment(&cov, &fmt, &[Window::new(0.035, 0.045)]);
        for c in 0..74 {
            assert_eq!(&a[c * 3..c * 3 + 3], &[c as f64; 3]);
        }
    }

    #[test]
    fn layout_matches_published_dimensions() {
        let layout = layout_for(&TopicDictionary::example());
        assert_eq!(layout.total_dim(), 32_462);
        let b = layout.block_counts();
        assert_eq!(
            (b.gender, b.presence, b.key, b.liwc, b.formant, b.covarep, b.au),
            (1, 83, 8, 7_719, 1_245, 18_426, 4_980)
        );
        assert_eq!(b.total(), 32_462);
        assert_eq!(layout.name(0).unwrap(), "gender");
        assert_eq!(layout.name(4).unwrap(), "t04.presence");
        assert_eq!(layout.name(84).unwrap(), "t76.key");
        let i = layout.index_of_name("t30.covarep.ch07.max").unwrap();
        assert_eq!(i, 92 + 29 * 390 + 93 + 7 * 3 + 1);
        assert_eq!(layout.name(i).unwrap(), "t30.covarep.ch07.max");
        assert_eq!(layout.name(32_461).unwrap(), "t83.au.ch19.min");
        assert!(layout.name(32_462).is_none());
        assert!(layout.index_of_name("t84.presence").is_none());
        assert!(layout.index_of_name("t10.key").is_none());
    }

    #[test]
    fn every_name_round_trips() {
        let layout = layout_for(&TopicDictionary::example());
        for (i, name) in layout.names().iter().enumerate() {
            assert_eq!(layout.index_of_name(name), Some(i), "{name}");
        }
        let cu = context_unaware_names();
        assert_eq!(cu.len(), CONTEXT_UNAWARE_DIM);
        assert_eq!(CONTEXT_UNAWARE_DIM, 391);
    }

    fn toy_session() -> Session {
        let n = 1000;
        let rows = |w: usize, f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..w).map(|c| f(i, c)).collect()).collect()
        };
        Session {
            meta: SessionMeta { session_id: "s1".into(), gender: 1, phq8: 7, split: Split::Train },
            transcript: vec![
                Utterance { start: 1.0, stop: 2.0, speaker: Speaker::Interviewer, text: "where are you from originally".into() },
                Utterance { start: 2.0, stop: 4.0, speaker: Speaker::Participant, text: "I'm from a sad place".into() },
            ],
            covarep: series(StreamKind::Covarep, &rows(74, &|i, c| (i % 7) as f64 + c as f64)),
            formant: series(StreamKind::Formant, &rows(5, &|i, _| i as f64)),
            aus: series(StreamKind::Au, &rows(20, &|_, c| c as f64 / 10.0)),
        }
    }

    #[test]
    fn single_topic_session_fills_only_its_slot() {
        let ctx = FeatureContext::example();
        let s = toy_session();
        let v = featurize_session(&s, &ctx).unwrap();
        let layout = &ctx.layout;
        assert_eq!(v.len(), 32_462);
        assert_eq!(v.0[0], 1.0);
        let presence: Vec<usize> = (1..=83).filter(|&t| v.0[t] == 1.0).collect();
        assert_eq!(presence, vec![4]);
        assert!((1..=83).all(|t| v.0[t] == 0.0 || t == 4));
        for i in 0..layout.total_dim() {
            match layout.descriptor(i).unwrap() {
                FeatureDescriptor::Key { .. } => assert_eq!(v.0[i], MISSING),
                FeatureDescriptor::Liwc { topic, .. } | FeatureDescriptor::Functional { topic, .. } if topic != 4 => {
                    assert_eq!(v.0[i], MISSING, "{}", layout.name(i).unwrap())
                }
                FeatureDescriptor::Functional { topic: 4, .. } => assert_ne!(v.0[i], MISSING),
                _ => {}
            }
        }
        // formant ch0 over frames 100..400 (window [1.0, 4.0))
        let i = layout.index_of_name("t04.formant.ch00.mean").unwrap();
        assert!((v.0[i] - 249.5).abs() < 1e-9);
        assert_eq!(v.0[layout.index_of_name("t04.formant.ch00.max").unwrap()], 399.0);
        assert_eq!(v.0[layout.index_of_name("t04.au.ch03.min").unwrap()], 0.3);
        let sad = ctx.words.category_index("sad").unwrap();
        assert_eq!(v.0[layout.index_of(&FeatureDescriptor::Liwc { topic: 4, category: sad }).unwrap()], 0.2);
        // determinism
        assert_eq!(featurize_session(&s, &ctx).unwrap(), v);
    }

    #[test]
    fn session_without_topics_is_all_missing() {
        let ctx = FeatureContext::example();
        let mut s = toy_session();
        s.transcript[0].text = "hello there".into();
        let v = featurize_session(&s, &ctx).unwrap();
        assert_eq!(v.0[0], 1.0);
        assert!(v.0[1..=83].iter().all(|&x| x == 0.0));
        assert!(v.0[84..].iter().all(|&x| x == MISSING));
    }

    #[test]
    fn key_slot_follows_rule() {
        let ctx = FeatureContext::example();
        let mut s = toy_session();
        s.transcript[0].text = "how easy is it for you to get a good night sleep".into();
        s.transcript[1].text = "No problem, I sleep like a baby".into();
        let v = featurize_session(&s, &ctx).unwrap();
        assert_eq!(v.0[ctx.layout.index_of_name("t78.key").unwrap()], 0.0);
        assert_eq!(v.0[78], 1.0);
    }

    #[test]
    fn layout_mismatch_is_reported() {
        let mut ctx = FeatureContext::example();
        ctx.layout = FeatureLayout::new(10, vec![]);
        assert!(matches!(featurize_session(&toy_session(), &ctx), Err(FeatureError::LayoutMismatch { .. })));
    }

    #[test]
    fn context_unaware_dimension() {
        let v = context_unaware_vector(&toy_session(), &WordCategoryDictionary::example());
        assert_eq!(v.len(), 391);
        assert_eq!(v.0[0], 1.0);
        // formant ch0 over all 1000 frames
        assert_eq!(v.0[1 + 93 + 222 + 1], 999.0);
    }
}
