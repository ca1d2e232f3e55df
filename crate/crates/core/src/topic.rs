//! Topic dictionary construction and application.
//!
//! Interview topics are opened by the interviewer with one of a small set of
//! fixed sentences. A topic dictionary maps those trigger sentences to topics;
//! matching tolerates small edits so that transcription variants still hit.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Speaker, Utterance, Window};
use crate::exec;

/// Largest edit distance at which a sentence still matches a trigger.
pub const DEFAULT_MAX_EDITS: usize = 3;

const DEFAULT_DICTIONARY: &str = include_str!("../data/topics_83.toml");

#[derive(Debug, Error, PartialEq)]
pub enum TopicError {
    #[error("cannot parse topic dictionary: {0}")]
    Parse(String),
    #[error("topic indices must run 1..=n without gaps: expected {expected}, found {found}")]
    NonContiguousIndex { expected: usize, found: usize },
    #[error("topic {0} has no trigger sentences")]
    EmptyTriggers(usize),
    #[error("trigger `{sentence}` appears in topics {first} and {second}")]
    DuplicateTrigger { sentence: String, first: usize, second: usize },
    #[error("dataset has no sessions")]
    EmptyDataset,
}

/// Lowercases, strips everything but letters, digits, `_`, `'` and spaces,
/// and collapses whitespace runs to single spaces.
pub fn normalize_sentence(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_alphanumeric() || c == '_' || c == '\'' {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

/// Levenshtein distance with unit insert/delete/substitute costs, over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b, usize::MAX).unwrap_or(usize::MAX)
}

/// Distance if it is at most `max`, `None` otherwise. Cheaper than a full
/// computation because it abandons a pair as soon as every DP cell exceeds `max`.
pub fn edit_distance_within(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b, max)
}

fn levenshtein(a: &[char], b: &[char], max: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        return Some(a.len().max(b.len()));
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}

/// Distinct normalized interviewer sentences with their corpus frequency,
/// most frequent first (ties keep first-occurrence order).
pub fn build_preliminary_dictionary(dataset: &Dataset) -> Result<Vec<(String, usize)>, TopicError> {
    if dataset.is_empty() {
        return Err(TopicError::EmptyDataset);
    }
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    let interviewer = dataset
        .sessions
        .iter()
        .flat_map(|s| s.transcript.iter())
        .filter(|u| u.speaker == Speaker::Interviewer);
    for u in interviewer {
        let s = normalize_sentence(&u.text);
        if s.is_empty() {
            continue;
        }
        let n = counts.entry(s.clone()).or_insert(0);
        if *n == 0 {
            order.push(s);
        }
        *n += 1;
    }
    let mut out: Vec<(String, usize)> = order.into_iter().map(|s| { let n = counts[&s]; (s, n) }).collect();
    // stable: equal counts stay in first-occurrence order
    out.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(out)
}

/// Groups sentences into the connected components of the relation
/// `edit_distance <= max_dist` (single linkage). Sentences are normalized and
/// deduplicated first; members are sorted and clusters ordered by their
/// smallest member.
pub fn cluster_sentences<S: AsRef<str>>(sentences: &[S], max_dist: usize) -> Vec<Vec<String>> {
    let mut uniq: Vec<String> = sentences.iter().map(|s| normalize_sentence(s.as_ref())).collect();
    uniq.sort();
    uniq.dedup();
    let chars: Vec<Vec<char>> = uniq.iter().map(|s| s.chars().collect()).collect();

    let neighbours: Vec<Vec<usize>> = exec::map_range(uniq.len(), |i| {
        ((i + 1)..uniq.len())
            .filter(|&j| levenshtein(&chars[i], &chars[j], max_dist).is_some())
            .collect()
    });

    let mut parent: Vec<usize> = (0..uniq.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, ns) in neighbours.iter().enumerate() {
        for &j in ns {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a != b {
                // keep the smaller index as root so clusters come out ordered
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..uniq.len() {
        let r = root(&mut parent, i);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(uniq[i].clone());
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub index: usize,
    pub name: String,
    #[serde(rename = "key", default)]
    pub is_key_topic: bool,
    #[serde(rename = "triggers")]
    pub trigger_sentences: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DictionaryFile {
    topic: Vec<TopicEntry>,
}

struct Trigger {
    topic: usize,
    chars: Vec<char>,
}

/// Ordered topic entries plus a lookup index over their trigger sentences.
pub struct TopicDictionary {
    entries: Vec<TopicEntry>,
    exact: HashMap<String, usize>,
    triggers: Vec<Trigger>,
}

impl std::fmt::Debug for TopicDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TopicDictionary").field("entries", &self.entries).finish()
    }
}

impl Clone for TopicDictionary {
    fn clone(&self) -> Self {
        Self::new(self.entries.clone()).expect("entries were validated")
    }
}

impl TopicDictionary {
    /// Validates and indexes entries. Trigger sentences are normalized.
    pub fn new(mut entries: Vec<TopicEntry>) -> Result<Self, TopicError> {
        let mut exact = HashMap::new();
        let mut triggers = Vec::new();
        for (pos, entry) in entries.iter_mut().enumerate() {
            if entry.index != pos + 1 {
                return Err(TopicError::NonContiguousIndex { expected: pos + 1, found: entry.index });
            }
            let mut seen = HashSet::new();
            entry.trigger_sentences = entry
                .trigger_sentences
                .iter()
                .map(|s| normalize_sentence(s))
                .filter(|s| !s.is_empty() && seen.insert(s.clone()))
                .collect();
            if entry.trigger_sentences.is_empty() {
                return Err(TopicError::EmptyTriggers(entry.index));
            }
            for s in &entry.trigger_sentences {
                if let Some(&first) = exact.get(s) {
                    return Err(TopicError::DuplicateTrigger { sentence: s.clone(), first, second: entry.index });
                }
                exact.insert(s.clone(), entry.index);
                triggers.push(Trigger { topic: entry.index, chars: s.chars().collect() });
            }
        }
        Ok(Self { entries, exact, triggers })
    }

    pub fn from_toml(raw: &str) -> Result<Self, TopicError> {
        let file: DictionaryFile = toml::from_str(raw).map_err(|e| TopicError::Parse(e.to_string()))?;
        Self::new(file.topic)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&DictionaryFile { topic: self.entries.clone() }).expect("dictionary serializes")
    }

    /// The shipped 83-topic example dictionary.
    pub fn example() -> Self {
        Self::from_toml(DEFAULT_DICTIONARY).expect("bundled dictionary is valid")
    }

    pub fn entries(&self) -> &[TopicEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for a 1-based topic index.
    pub fn get(&self, index: usize) -> Option<&TopicEntry> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    /// Key-topic indices in dictionary order.
    pub fn key_topics(&self) -> Vec<usize> {
        self.entries.iter().filter(|e| e.is_key_topic).map(|e| e.index).collect()
    }

    /// Topic whose triggers are closest to `sentence`, see [`match_topic`].
    pub fn match_sentence(&self, sentence: &str, max_dist: usize) -> Option<usize> {
        let s = normalize_sentence(sentence);
        if s.is_empty() {
            return None;
        }
        if let Some(&t) = self.exact.get(&s) {
            return Some(t);
        }
        let chars: Vec<char> = s.chars().collect();
        let mut best: Option<(usize, usize)> = None;
        for trig in &self.triggers {
            let bound = best.map_or(max_dist, |(d, _)| d);
            if let Some(d) = levenshtein(&chars, &trig.chars, bound) {
                let better = match best {
                    None => true,
                    Some((bd, bt)) => d < bd || (d == bd && trig.topic < bt),
                };
                if better {
                    best = Some((d, trig.topic));
                }
            }
        }
        best.map(|(_, t)| t)
    }
}

/// Exact trigger hit first, otherwise the topic with a trigger within three
/// edits (smallest distance, then lowest topic index).
pub fn match_topic(dict: &TopicDictionary, sentence: &str) -> Option<usize> {
    dict.match_sentence(sentence, DEFAULT_MAX_EDITS)
}

/// One topic occurrence inside an interview.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSegment {
    pub topic_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub participant_text: String,
}

/// All occurrences of one topic in an interview, merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicOccurrence {
    pub topic_index: usize,
    pub windows: Vec<Window>,
    pub participant_text: String,
}

/// Splits a transcript into topic segments.
///
/// Each interviewer utterance matching the dictionary opens a segment that
/// lasts until the next matching interviewer utterance (the last one closes
/// at the final utterance's stop time). Participant utterances are assigned by
/// start time; speech before the first topic belongs to no segment.
pub fn segment_interview(dict: &TopicDictionary, transcript: &[Utterance]) -> Vec<TopicSegment> {
    segment_with(dict, transcript, DEFAULT_MAX_EDITS)
}

pub fn segment_with(dict: &TopicDictionary, transcript: &[Utterance], max_dist: usize) -> Vec<TopicSegment> {
    let mut utts: Vec<&Utterance> = transcript.iter().collect();
    utts.sort_by(|a, b| a.start.total_cmp(&b.start));
    let end_of_interview = utts.iter().map(|u| u.stop).fold(f64::NEG_INFINITY, f64::max);

    let opens: Vec<(usize, f64)> = utts
        .iter()
        .filter(|u| u.speaker == Speaker::Interviewer)
        .filter_map(|u| dict.match_sentence(&u.text, max_dist).map(|t| (t, u.start)))
        .collect();

    let mut segments: Vec<TopicSegment> = opens
        .iter()
        .enumerate()
        .map(|(i, &(topic, start))| TopicSegment {
            topic_index: topic,
            t_start: start,
            t_end: opens.get(i + 1).map_or(end_of_interview.max(start), |&(_, next)| next),
            participant_text: String::new(),
        })
        .collect();

    let last = segments.len().wrapping_sub(1);
    let mut texts: Vec<Vec<&str>> = vec![Vec::new(); segments.len()];
    for u in utts.iter().filter(|u| u.speaker == Speaker::Participant) {
        // index of the last segment opened at or before the utterance
        let k = segments.partition_point(|s| s.t_start <= u.start);
        if k == 0 {
            continue;
        }
        let seg = &segments[k - 1];
        if u.start < seg.t_end || (k - 1 == last && u.start <= seg.t_end) {
            texts[k - 1].push(&u.text);
        }
    }
    for (seg, parts) in segments.iter_mut().zip(texts) {
        seg.participant_text = normalize_sentence(&parts.join(" "));
    }
    segments
}

/// Merges repeated topics: windows are kept in time order and texts concatenated.
/// Output is ordered by topic index.
pub fn merge_segments(segments: &[TopicSegment]) -> Vec<TopicOccurrence> {
    let mut by_topic: Vec<TopicOccurrence> = Vec::new();
    let mut ordered: Vec<&TopicSegment> = segments.iter().collect();
    ordered.sort_by(|a, b| a.topic_index.cmp(&b.topic_index).then(a.t_start.total_cmp(&b.t_start)));
    for seg in ordered {
        match by_topic.last_mut() {
            Some(occ) if occ.topic_index == seg.topic_index => {
                occ.windows.push(Window::new(seg.t_start, seg.t_end));
                if !seg.participant_text.is_empty() {
                    if !occ.participant_text.is_empty() {
                        occ.participant_text.push(' ');
                    }
                    occ.participant_text.push_str(&seg.participant_text);
                }
            }
            _ => by_topic.push(TopicOccurrence {
                topic_index: seg.topic_index,
                windows: vec![Window::new(seg.t_start, seg.t_end)],
                participant_text: seg.participant_text.clone(),
            }),
        }
    }
    by_topic
}

/// Per-topic cover rate over a corpus and its 10-bin histogram on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub interviews: usize,
    /// `rates[t - 1]` is the fraction of interviews containing topic `t`.
    pub rates: Vec<f64>,
    pub histogram: [usize; 10],
}

impl CoverageStats {
    pub fn from_presence(presence: &[Vec<bool>], topics: usize) -> Result<Self, TopicError> {
        if presence.is_empty() {
            return Err(TopicError::EmptyDataset);
        }
        let n = presence.len() as f64;
        let rates: Vec<f64> = (0..topics)
            .map(|t| presence.iter().filter(|p| p[t]).count() as f64 / n)
            .collect();
        let mut histogram = [0usize; 10];
        for &r in &rates {
            histogram[((r * 10.0).floor() as usize).min(9)] += 1;
        }
        Ok(Self { interviews: presence.len(), rates, histogram })
    }

    /// Number of topics present in at least `fraction` of interviews.
    pub fn topics_at_least(&self, fraction: f64) -> usize {
        self.rates.iter().filter(|&&r| r >= fraction).count()
    }
}

pub fn coverage_stats(dataset: &Dataset, dict: &TopicDictionary) -> Result<CoverageStats, TopicError> {
    let presence = exec::map(&dataset.sessions, |s| {
        let mut p = vec![false; dict.len()];
        for seg in segment_interview(dict, &s.transcript) {
            p[seg.topic_index - 1] = true;
        }
        p
    });
    CoverageStats::from_presence(&presence, dict.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FrameSeries, Session, SessionMeta, Split, StreamKind};
    use proptest::prelude::*;

    /// Plain recursive definition, memoized; independent of the two-row DP.
    fn oracle_distance(a: &str, b: &str) -> usize {
        fn go(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
            if a.is_empty() {
                return b.len();
            }
            if b.is_empty() {
                return a.len();
            }
            if let Some(&d) = memo.get(&(a.len(), b.len())) {
                return d;
            }
            let d = if a[0] == b[0] {
                go(&a[1..], &b[1..], memo)
            } else {
                1 + go(&a[1..], b, memo).min(go(a, &b[1..], memo)).min(go(&a[1..], &b[1..], memo))
            };
            memo.insert((a.len(), b.len()), d);
            d
        }
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        go(&a, &b, &mut HashMap::new())
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_sentence("Why did you move to L_A?"), "why did you move to l_a");
        assert_eq!(normalize_sentence(""), "");
        assert_eq!(normalize_sentence("  how   are you  "), "how are you");
        assert_eq!(normalize_sentence("That's\tgood!"), "that's good");
        assert_eq!(normalize_sentence("<laughter> ok"), "laughter ok");
    }

    #[test]
    fn distance_examples() {
        assert_eq!(oracle_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("why", "whys"), 1);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance_within("kitten", "sitting", 2), None);
        assert_eq!(edit_distance_within("kitten", "sitting", 3), Some(3));
    }

    proptest! {
        #[test]
        fn distance_matches_oracle(a in "[a-d ]{0,9}", b in "[a-d ]{0,9}") {
            let d = edit_distance(&a, &b);
            prop_assert_eq!(d, oracle_distance(&a, &b));
            for max in 0..5 {
                prop_assert_eq!(edit_distance_within(&a, &b, max), (d <= max).then_some(d));
            }
        }

        #[test]
        fn distance_is_a_metric(a in "[a-c]{0,8}", b in "[a-c]{0,8}", c in "[a-c]{0,8}") {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
            prop_assert_eq!(edit_distance(&a, &b) == 0, a == b);
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        }

        #[test]
        fn clusters_are_the_connected_components(
            sentences in proptest::collection::vec("[ab]{1,6}", 1..20),
            max_dist in 0usize..3,
        ) {
            let clusters = cluster_sentences(&sentences, max_dist);
            let mut all: Vec<&String> = clusters.iter().flatten().collect();
            let total = all.len();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), total, "a sentence landed in two clusters");
            let mut expected: Vec<String> = sentences.clone();
            expected.sort();
            expected.dedup();
            prop_assert_eq!(total, expected.len());
            // no cross-cluster pair is within range
            for (i, ci) in clusters.iter().enumerate() {
                for cj in &clusters[i + 1..] {
                    for a in ci {
                        for b in cj {
                            prop_assert!(oracle_distance(a, b) > max_dist);
                        }
                    }
                }
                // each cluster is connected: grow from its first member
                let mut reached = vec![false; ci.len()];
                reached[0] = true;
                let mut changed = true;
                while changed {
                    changed = false;
                    for x in 0..ci.len() {
                        if !reached[x] && (0..ci.len()).any(|y| reached[y] && oracle_distance(&ci[x], &ci[y]) <= max_dist) {
                            reached[x] = true;
                            changed = true;
                        }
                    }
                }
                prop_assert!(reached.iter().all(|&r| r));
            }
            for w in clusters.windows(2) {
                prop_assert!(w[0][0] < w[1][0]);
            }
        }
    }

    #[test]
    fn cluster_examples() {
        assert_eq!(cluster_sentences(&["why", "why "], 3), vec![vec!["why".to_string()]]);
        let c = cluster_sentences(&["how are you doing today", "how are you doing today?", "where do you live"], 3);
        assert_eq!(c.len(), 2);
        let c = cluster_sentences(&["abc", "abd", "abc"], 0);
        assert_eq!(c, vec![vec!["abc".to_string()], vec!["abd".to_string()]]);
    }

    #[test]
    fn example_dictionary_shape() {
        let d = TopicDictionary::example();
        assert_eq!(d.len(), 83);
        assert_eq!(d.key_topics(), (76..=83).collect::<Vec<_>>());
        assert_eq!(d.get(4).unwrap().name, "origin");
        assert_eq!(d.get(26).unwrap().trigger_sentences, vec!["why did you move to l_a"]);
        let again = TopicDictionary::from_toml(&d.to_toml()).unwrap();
        assert_eq!(again.entries(), d.entries());
    }

    #[test]
    fn dictionary_validation() {
        let e = |i: usize, t: &str| TopicEntry { index: i, name: format!("t{i}"), is_key_topic: false, trigger_sentences: vec![t.into()] };
        assert!(matches!(TopicDictionary::new(vec![e(2, "a")]), Err(TopicError::NonContiguousIndex { .. })));
        assert!(matches!(TopicDictionary::new(vec![e(1, "Hi!"), e(2, "hi")]), Err(TopicError::DuplicateTrigger { .. })));
        assert!(matches!(TopicDictionary::new(vec![e(1, "??")]), Err(TopicError::EmptyTriggers(1))));
    }

    #[test]
    fn matching_examples() {
        let d = TopicDictionary::example();
        assert_eq!(match_topic(&d, "where are you from originally"), Some(4));
        assert_eq!(match_topic(&d, "Where are you from originally?"), Some(4));
        assert_eq!(match_topic(&d, "that's good"), None);
        assert_eq!(oracle_distance("where are you from originaly", "where are you from originally"), 1);
        assert_eq!(match_topic(&d, "where are you from originaly"), Some(4));
        assert_eq!(match_topic(&d, ""), None);
    }

    proptest! {
        #[test]
        fn a_match_has_a_trigger_in_range(s in "[a-z ]{1,12}|where are you from [a-z]{4,10}|how [a-z ]{3,8} today") {
            let d = TopicDictionary::example();
            let norm = normalize_sentence(&s);
            let n = norm.as_str();
            let best = d.entries().iter()
                .flat_map(|e| e.trigger_sentences.iter().map(move |t| (oracle_distance(n, t), e.index)))
                .min();
            match match_topic(&d, &s) {
                Some(t) => {
                    let (dist, topic) = best.unwrap();
                    prop_assert!(dist <= 3);
                    prop_assert_eq!(t, topic);
                }
                None => prop_assert!(norm.is_empty() || best.unwrap().0 > 3),
            }
        }
    }

    fn utt(start: f64, stop: f64, ellie: bool, text: &str) -> Utterance {
        Utterance { start, stop, speaker: if ellie { Speaker::Interviewer } else { Speaker::Participant }, text: text.into() }
    }

    fn toy_transcript() -> Vec<Utterance> {
        vec![
            utt(0.0, 1.0, false, "hello"),
            utt(1.0, 2.0, true, "Where are you from originally?"),
            utt(2.0, 4.0, false, "I'm from Ohio"),
            utt(4.0, 4.5, true, "that's good"),
            utt(5.0, 6.0, true, "what are some things you like to do for fun"),
            utt(6.0, 9.0, false, "Hiking, mostly."),
        ]
    }

    #[test]
    fn segmentation_of_toy_transcript() {
        let segs = segment_interview(&TopicDictionary::example(), &toy_transcript());
        assert_eq!(
            segs,
            vec![
                TopicSegment { topic_index: 4, t_start: 1.0, t_end: 5.0, participant_text: "i'm from ohio".into() },
                TopicSegment { topic_index: 21, t_start: 5.0, t_end: 9.0, participant_text: "hiking mostly".into() },
            ]
        );
    }

    #[test]
    fn segmentation_without_matches_is_empty() {
        let t = vec![utt(0.0, 1.0, true, "that's good"), utt(1.0, 2.0, false, "yes")];
        assert!(segment_interview(&TopicDictionary::example(), &t).is_empty());
        assert!(segment_interview(&TopicDictionary::example(), &[]).is_empty());
    }

    #[test]
    fn repeated_topics_merge() {
        let mut t = toy_transcript();
        t.push(utt(9.0, 9.5, true, "where are you from originally"));
        t.push(utt(9.5, 11.0, false, "Ohio again"));
        let segs = segment_interview(&TopicDictionary::example(), &t);
        assert_eq!(segs.len(), 3);
        let merged = merge_segments(&segs);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[0].topic_index, 4);
        assert_eq!(merged[0].windows, vec![Window::new(1.0, 5.0), Window::new(9.0, 11.0)]);
        assert_eq!(merged[0].participant_text, "i'm from ohio ohio again");
    }

    proptest! {
        #[test]
        fn segments_are_ordered_and_disjoint(picks in proptest::collection::vec((0usize..6, 0.1f64..3.0, any::<bool>()), 0..30)) {
            let d = TopicDictionary::example();
            let lines = ["why", "where are you from originally", "that's good", "mhmm okay", "do you travel a lot", "yes"];
            let mut t = 0.0;
            let transcript: Vec<Utterance> = picks.iter().map(|&(k, dur, ellie)| {
                let u = utt(t, t + dur, ellie, lines[k]);
                t += dur;
                u
            }).collect();
            let segs = segment_interview(&d, &transcript);
            for w in segs.windows(2) {
                prop_assert!(w[0].t_end <= w[1].t_start + 1e-12);
                prop_assert!(w[0].t_start <= w[1].t_start);
            }
            // each participant utterance's text lands in at most one segment window
            for u in transcript.iter().filter(|u| u.speaker == Speaker::Participant) {
                let hits = segs.iter().filter(|s| s.t_start <= u.start && u.start < s.t_end).count();
                prop_assert!(hits <= 1);
            }
        }
    }

    fn session(id: &str, transcript: Vec<Utterance>) -> Session {
        Session {
            meta: SessionMeta { session_id: id.into(), gender: 0, phq8: 0, split: Split::Train },
            transcript,
            covarep: FrameSeries::empty(StreamKind::Covarep),
            formant: FrameSeries::empty(StreamKind::Formant),
            aus: FrameSeries::empty(StreamKind::Au),
        }
    }

    #[test]
    fn preliminary_dictionary_dedups_and_ranks() {
        let ds = Dataset {
            sessions: vec![
                session("a", vec![utt(0.0, 1.0, true, "Why?"), utt(1.0, 2.0, true, "can you tell me about that")]),
                session("b", vec![utt(0.0, 1.0, true, "why"), utt(1.0, 2.0, false, "because"),
                                  utt(2.0, 3.0, true, "Can you tell me about that"), utt(3.0, 4.0, true, "can you tell me about that")]),
            ],
        };
        let prelim = build_preliminary_dictionary(&ds).unwrap();
        assert_eq!(prelim, vec![("can you tell me about that".to_string(), 3), ("why".to_string(), 2)]);
        let none = Dataset { sessions: vec![session("c", vec![utt(0.0, 1.0, false, "hi")])] };
        assert!(build_preliminary_dictionary(&none).unwrap().is_empty());
        assert_eq!(build_preliminary_dictionary(&Dataset::default()), Err(TopicError::EmptyDataset));
    }

    #[test]
    fn coverage_rates_and_histogram() {
        let d = TopicDictionary::example();
        let ds = Dataset {
            sessions: vec![session("a", toy_transcript()), session("b", toy_transcript()[..3].to_vec())],
        };
        let c = coverage_stats(&ds, &d).unwrap();
        assert_eq!(c.rates[3], 1.0);
        assert_eq!(c.rates[20], 0.5);
        assert_eq!(c.rates[0], 0.0);
        assert_eq!(c.histogram.iter().sum::<usize>(), 83);
        assert_eq!(c.histogram[9], 1);
        assert_eq!(c.histogram[5], 1);
        assert_eq!(c.topics_at_least(0.8), 1);
        assert_eq!(coverage_stats(&Dataset::default(), &d), Err(TopicError::EmptyDataset));
    }
}
