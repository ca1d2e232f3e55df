//! Deterministic synthetic interview corpus with planted, recoverable signal.
//!
//! Planted features are frame channels held constant inside one topic's
//! window (or the whole session for [`SignalScope::Global`]) plus key-topic
//! answers. Their standardized values share one latent factor and the score
//! is linear in them. Every other channel gets a fresh random level per
//! window with small per-frame jitter.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    write_transcript, ManifestEntry, Manifest, Speaker, Split, StreamKind, Utterance, AU_CHANNELS, FRAME_HOP,
    PHQ8_MAX,
};
use crate::exec;
use crate::features::{classify_key_topic, FeatureContext, FeatureDescriptor, Stat};
use crate::seed;
use crate::topic::{normalize_sentence, TopicDictionary, DEFAULT_MAX_EDITS};

pub const TRUTH_FILE: &str = "planted_truth.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Frames per topic window.
const WINDOW_FRAMES: usize = 25;
/// Frames of greeting before the first topic.
const LEAD_FRAMES: usize = 20;
/// Spread of a planted channel around its center, in channel units.
const PLANTED_SCALE: f64 = 0.5;
/// Per-frame jitter of non-planted channels relative to their level spread.
const JITTER: f64 = 0.1;
/// Standard normal tertile cut for three-way key answers.
const TERTILE: f64 = 0.430_727_299_295_457_5;

const GREETING: &str = "hi i'm ellie thanks for coming in today";
const BACKCHANNELS: [&str; 4] = [
    "i see what you mean",
    "that sounds like a lot to handle",
    "thank you for telling me that",
    "i understand how that could feel",
];
const VOCABULARY: [&str; 40] = [
    "i", "my", "we", "they", "it", "that", "the", "a", "in", "on", "to", "with", "and", "but", "really", "very",
    "happy", "sad", "tired", "worried", "family", "friends", "work", "job", "school", "home", "money", "music",
    "movies", "walk", "run", "think", "know", "feel", "love", "hate", "lonely", "nervous", "angry", "fun",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot read spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalScope {
    /// Planted channels hold their value only inside the topic window.
    Topic,
    /// Planted channels hold their value for the whole session.
    Global,
}

impl std::str::FromStr for SignalScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topic" => Ok(SignalScope::Topic),
            "global" => Ok(SignalScope::Global),
            _ => Err(format!("unknown scope `{s}` (expected topic or global)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    /// A functional (any stat: the channel is constant in the window) or a key slot.
    pub descriptor: FeatureDescriptor,
    /// Score change per standard deviation of the feature.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub session_count: usize,
    pub seed: u64,
    pub common_topics: Vec<usize>,
    pub common_presence: f64,
    pub rare_presence: f64,
    pub planted: Vec<PlantedFeature>,
    /// Share of variance planted values draw from the common factor.
    pub factor_share: f64,
    pub intercept: f64,
    pub noise_std: f64,
    pub scope: SignalScope,
    pub dev_fraction: f64,
    /// Probability that a trigger sentence is perturbed by 1 to 3 edits.
    pub perturb_rate: f64,
}

fn functional(topic: usize, stream: crate::features::Stream, channel: usize) -> PlantedFeature {
    PlantedFeature { descriptor: FeatureDescriptor::Functional { topic, stream, channel, stat: Stat::Mean }, weight: 0.75 }
}

impl Default for SynthSpec {
    fn default() -> Self {
        use crate::features::Stream::{Au, Covarep, Formant};
        Self {
            session_count: 150,
            seed: 7,
            common_topics: vec![3, 4, 7, 9, 11, 14, 15, 21, 28, 66, 76, 78, 79, 80],
            common_presence: 0.9,
            rare_presence: 0.05,
            planted: vec![
                functional(4, Covarep, 0),
                functional(9, Covarep, 12),
                functional(11, Formant, 0),
                functional(15, Formant, 2),
                functional(21, Au, 3),
                functional(28, Au, 8),
                functional(66, Covarep, 30),
                PlantedFeature { descriptor: FeatureDescriptor::Key { topic: 78 }, weight: 0.75 },
            ],
            factor_share: 0.5,
            intercept: 9.0,
            noise_std: 1.0,
            scope: SignalScope::Topic,
            dev_fraction: 0.3,
            perturb_rate: 0.3,
        }
    }
}

impl SynthSpec {
    pub fn from_toml(raw: &str) -> Result<Self, SynthError> {
        toml::from_str(raw).map_err(|e| SynthError::Parse(e.to_string()))
    }

    fn planted_topics(&self) -> Vec<usize> {
        self.planted.iter().map(|p| descriptor_topic(&p.descriptor)).collect()
    }

    /// Probability that topic `t` occurs in a session; planted topics always occur.
    pub fn presence(&self, topic: usize) -> f64 {
        if self.planted_topics().contains(&topic) {
            1.0
        } else if self.common_topics.contains(&topic) {
            self.common_presence
        } else {
            self.rare_presence
        }
    }

    pub fn validate(&self, ctx: &FeatureContext) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.session_count == 0 {
            return bad("session_count must be positive".into());
        }
        if self.planted.is_empty() {
            return bad("at least one planted feature is required".into());
        }
        for (name, p) in [
            ("common_presence", self.common_presence),
            ("rare_presence", self.rare_presence),
            ("factor_share", self.factor_share),
            ("dev_fraction", self.dev_fraction),
            ("perturb_rate", self.perturb_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be non-negative".into());
        }
        if let Some(&t) = self.common_topics.iter().find(|&&t| ctx.topics.get(t).is_none()) {
            return bad(format!("common topic {t} is not in the dictionary"));
        }
        let mut seen = Vec::new();
        for p in &self.planted {
            let d = &p.descriptor;
            if ctx.layout.index_of(d).is_none() {
                return bad(format!("planted feature {d} is not in the layout"));
            }
            match d {
                FeatureDescriptor::Key { topic } if ctx.rules.for_topic(*topic).is_none() => {
                    return bad(format!("key topic {topic} has no answer rule"))
                }
                FeatureDescriptor::Key { .. } | FeatureDescriptor::Functional { .. } => {}
                _ => return bad(format!("only functional and key features can be planted, got {d}")),
            }
            // one planted channel per (topic, stream, channel): its stats coincide
            let slot = match *d {
                FeatureDescriptor::Functional { topic, stream, channel, .. } => (topic, Some((stream, channel))),
                FeatureDescriptor::Key { topic } => (topic, None),
                _ => unreachable!(),
            };
            if seen.contains(&slot) {
                return bad(format!("{d} plants the same slot twice"));
            }
            seen.push(slot);
        }
        Ok(())
    }
}

fn descriptor_topic(d: &FeatureDescriptor) -> usize {
    match *d {
        FeatureDescriptor::Gender => 0,
        FeatureDescriptor::Presence { topic }
        | FeatureDescriptor::Key { topic }
        | FeatureDescriptor::Liwc { topic, .. }
        | FeatureDescriptor::Functional { topic, .. } => topic,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTruth {
    pub session_id: String,
    /// Planted feature values, in `PlantedTruth::indices` order.
    pub values: Vec<f64>,
    pub phq8: u8,
}

/// What the generator planted, in layout coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    /// Score change per unit of each raw feature value.
    pub weights: Vec<f64>,
    /// Score at all raw feature values zero, before rounding and clipping.
    pub intercept: f64,
    pub scope: SignalScope,
    pub sessions: Vec<SessionTruth>,
}

impl PlantedTruth {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let raw = std::fs::read_to_string(path).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&raw).map_err(|e| SynthError::Parse(e.to_string()))
    }
}

/// Fraction of planted indices present in `selected`.
pub fn verify_recovery(truth: &PlantedTruth, selected: &[usize]) -> f64 {
    if truth.indices.is_empty() {
        return 0.0;
    }
    let hit = truth.indices.iter().filter(|i| selected.contains(i)).count();
    hit as f64 / truth.indices.len() as f64
}

fn stream_index(kind: StreamKind) -> usize {
    match kind {
        StreamKind::Covarep => 0,
        StreamKind::Formant => 1,
        StreamKind::Au => 2,
    }
}

/// Typical level of a channel.
fn center(kind: StreamKind, channel: usize) -> f64 {
    match kind {
        StreamKind::Covarep => 1.0 + 0.1 * channel as f64,
        StreamKind::Formant => 5.0 + 2.0 * channel as f64,
        StreamKind::Au => 1.0 + 0.05 * channel as f64,
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let m = 10f64.powi(decimals);
    (x * m).round() / m
}

/// Checked sentences for interviewer lines that must not open a topic.
fn safe_lines(dict: &TopicDictionary) -> Result<Vec<&'static str>, SynthError> {
    if dict.match_sentence(GREETING, DEFAULT_MAX_EDITS).is_some() {
        return Err(SynthError::InvalidSpec("greeting matches a topic trigger".into()));
    }
    let lines: Vec<&'static str> =
        BACKCHANNELS.iter().copied().filter(|b| dict.match_sentence(b, DEFAULT_MAX_EDITS).is_none()).collect();
    if lines.is_empty() {
        return Err(SynthError::InvalidSpec("every backchannel matches a topic trigger".into()));
    }
    Ok(lines)
}

/// Applies 1 to 3 random character edits that keep the sentence on its topic.
fn perturb(sentence: &str, topic: usize, dict: &TopicDictionary, rng: &mut seed::Rng) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    for _ in 0..10 {
        let mut chars: Vec<char> = sentence.chars().collect();
        for _ in 0..rng.random_range(1..=3) {
            let letter = LETTERS[rng.random_range(0..LETTERS.len())] as char;
            match rng.random_range(0..3) {
                0 if !chars.is_empty() => {
                    let i = rng.random_range(0..chars.len());
                    chars[i] = letter;
                }
                1 if chars.len() > 1 => {
                    chars.remove(rng.random_range(0..chars.len()));
                }
                _ => chars.insert(rng.random_range(0..=chars.len()), letter),
            }
        }
        let out: String = chars.into_iter().collect();
        if out != sentence && dict.match_sentence(&out, DEFAULT_MAX_EDITS) == Some(topic) {
            return out;
        }
    }
    sentence.to_string()
}

fn filler(rng: &mut seed::Rng) -> String {
    let n = rng.random_range(6..=14);
    (0..n).map(|_| VOCABULARY[rng.random_range(0..VOCABULARY.len())]).collect::<Vec<_>>().join(" ")
}

/// Participant answer; key topics carry a phrase of category `code`.
fn answer(ctx: &FeatureContext, topic: usize, code: Option<usize>, rng: &mut seed::Rng) -> Result<String, SynthError> {
    let Some(rule) = ctx.rules.for_topic(topic) else {
        return Ok(filler(rng));
    };
    let code = code.unwrap_or_else(|| rng.random_range(0..rule.categories.len()));
    let phrases = &rule.categories[code].phrases;
    for _ in 0..50 {
        let phrase = &phrases[rng.random_range(0..phrases.len())];
        let text = format!("{} {} {}", filler(rng), phrase, filler(rng));
        if classify_key_topic(rule, &text) == Some(code) {
            return Ok(text);
        }
    }
    Err(SynthError::InvalidSpec(format!("cannot phrase answer {code} for key topic {topic}")))
}

struct Generated {
    id: String,
    gender: u8,
    phq8: u8,
    values: Vec<f64>,
    transcript: String,
    covarep: String,
    formant: String,
    aus: String,
}

/// Raw planted value and its standardized contribution to the score.
fn planted_value(p: &PlantedFeature, z: f64) -> (f64, f64) {
    match p.descriptor {
        FeatureDescriptor::Key { .. } => {
            let code = if z < -TERTILE { 0.0 } else if z < TERTILE { 1.0 } else { 2.0 };
            // three equiprobable codes have variance 2/3
            (code, (code - 1.0) * 1.5f64.sqrt())
        }
        FeatureDescriptor::Functional { stream, channel, .. } => {
            let v = round_to(center(stream.kind(), channel) + PLANTED_SCALE * z, 4);
            (v, (v - center(stream.kind(), channel)) / PLANTED_SCALE)
        }
        _ => unreachable!("validated"),
    }
}

fn generate_session(spec: &SynthSpec, ctx: &FeatureContext, index: usize, backchannels: &[&str]) -> Result<Generated, SynthError> {
    let id = format!("{}", 300 + index);
    let sid = seed::label(&id);
    let mut label_rng = seed::rng(spec.seed, &[sid, seed::label("label")]);
    let mut text_rng = seed::rng(spec.seed, &[sid, seed::label("text")]);
    let mut frame_rng = seed::rng(spec.seed, &[sid, seed::label("frames")]);

    let latent: f64 = label_rng.sample(StandardNormal);
    let mut values = Vec::with_capacity(spec.planted.len());
    let mut score = spec.intercept;
    for p in &spec.planted {
        let e: f64 = label_rng.sample(StandardNormal);
        let z = spec.factor_share.sqrt() * latent + (1.0 - spec.factor_share).sqrt() * e;
        let (v, zc) = planted_value(p, z);
        values.push(v);
        score += p.weight * zc;
    }
    let noise: f64 = label_rng.sample(StandardNormal);
    score += spec.noise_std * noise;
    let phq8 = score.round().clamp(0.0, f64::from(PHQ8_MAX)) as u8;
    let gender = u8::from(label_rng.random_bool(0.5));

    let mut present: Vec<usize> =
        (1..=ctx.topics.len()).filter(|&t| text_rng.random_bool(spec.presence(t))).collect();
    present.shuffle(&mut text_rng);

    let frames = LEAD_FRAMES + present.len() * WINDOW_FRAMES;
    let time = |frame: f64| round_to(frame * FRAME_HOP, 3);
    let mut utterances = vec![
        Utterance { start: time(0.5), stop: time(8.5), speaker: Speaker::Interviewer, text: GREETING.into() },
        Utterance { start: time(9.5), stop: time(LEAD_FRAMES as f64 - 1.5), speaker: Speaker::Participant, text: "hello".into() },
    ];
    // (topic, first frame) of every window
    let mut windows = Vec::with_capacity(present.len());
    for (w, &topic) in present.iter().enumerate() {
        let f0 = (LEAD_FRAMES + w * WINDOW_FRAMES) as f64;
        windows.push((topic, f0 as usize));
        let trigger = &ctx.topics.get(topic).expect("topic from dictionary").trigger_sentences[0];
        let text = if text_rng.random_bool(spec.perturb_rate) {
            perturb(trigger, topic, &ctx.topics, &mut text_rng)
        } else {
            trigger.clone()
        };
        let key_code = spec
            .planted
            .iter()
            .zip(&values)
            .find(|(p, _)| p.descriptor == FeatureDescriptor::Key { topic })
            .map(|(_, &v)| v as usize);
        let end = f0 + WINDOW_FRAMES as f64 - 0.5;
        utterances.push(Utterance { start: time(f0 - 0.5), stop: time(f0 + 4.5), speaker: Speaker::Interviewer, text });
        utterances.push(Utterance {
            start: time(f0 + 5.5),
            stop: time(end - 4.0),
            speaker: Speaker::Participant,
            text: answer(ctx, topic, key_code, &mut text_rng)?,
        });
        let bc = backchannels[text_rng.random_range(0..backchannels.len())];
        utterances.push(Utterance { start: time(end - 3.0), stop: time(end), speaker: Speaker::Interviewer, text: bc.into() });
    }

    // planted overrides per stream: (channel, first frame, frame count, value)
    let mut overrides: [Vec<(usize, usize, usize, f64)>; 3] = Default::default();
    for (p, &v) in spec.planted.iter().zip(&values) {
        if let FeatureDescriptor::Functional { topic, stream, channel, .. } = p.descriptor {
            let span = match spec.scope {
                SignalScope::Global => (0, frames),
                SignalScope::Topic => {
                    let &(_, f0) = windows.iter().find(|w| w.0 == topic).expect("planted topics are present");
                    (f0, WINDOW_FRAMES)
                }
            };
            overrides[stream_index(stream.kind())].push((channel, span.0, span.1, v));
        }
    }
    // window boundaries in frames, starting with the greeting
    let mut bounds: Vec<usize> = vec![0];
    bounds.extend(windows.iter().map(|w| w.1));
    bounds.push(frames);

    let mut streams = Vec::with_capacity(3);
    for kind in [StreamKind::Covarep, StreamKind::Formant, StreamKind::Au] {
        let width = kind.channel_count();
        let mut out = String::with_capacity(frames * width * 7);
        if kind == StreamKind::Au {
            out.push_str("frame,timestamp,confidence,success");
            for name in AU_CHANNELS {
                out.push(',');
                out.push_str(name);
            }
            out.push('\n');
        }
        let fixed = &overrides[stream_index(kind)];
        let mut row = vec![0.0; width];
        for seg in bounds.windows(2) {
            let levels: Vec<f64> = (0..width)
                .map(|c| center(kind, c) + PLANTED_SCALE * frame_rng.sample::<f64, _>(StandardNormal))
                .collect();
            for f in seg[0]..seg[1] {
                for c in 0..width {
                    let jitter: f64 = frame_rng.sample(StandardNormal);
                    row[c] = round_to(levels[c] + JITTER * PLANTED_SCALE * jitter, 3);
                }
                for &(c, f0, n, v) in fixed {
                    if (f0..f0 + n).contains(&f) {
                        row[c] = v;
                    }
                }
                if kind == StreamKind::Au {
                    let _ = write!(out, "{},{:.2},0.98,1,", f + 1, f as f64 * FRAME_HOP);
                }
                for (c, v) in row.iter().enumerate() {
                    if c > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{v}");
                }
                out.push('\n');
            }
        }
        streams.push(out);
    }
    let aus = streams.pop().expect("three streams");
    let formant = streams.pop().expect("three streams");
    let covarep = streams.pop().expect("three streams");
    Ok(Generated { id, gender, phq8, values, transcript: write_transcript(&utterances), covarep, formant, aus })
}

fn write(path: &Path, body: &str) -> Result<(), SynthError> {
    std::fs::write(path, body).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })
}

/// Writes a corpus for the shipped example dictionaries; see [`generate_corpus_with`].
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<PlantedTruth, SynthError> {
    generate_corpus_with(spec, &FeatureContext::example(), out_dir)
}

/// Writes `manifest.json`, per-session transcript and frame files under
/// `sessions/`, and `planted_truth.json`. Output depends only on `spec`.
pub fn generate_corpus_with(spec: &SynthSpec, ctx: &FeatureContext, out_dir: &Path) -> Result<PlantedTruth, SynthError> {
    spec.validate(ctx)?;
    let backchannels = safe_lines(&ctx.topics)?;
    for t in 1..=ctx.topics.len() {
        let trigger = &ctx.topics.get(t).expect("contiguous indices").trigger_sentences[0];
        if normalize_sentence(trigger).is_empty() {
            return Err(SynthError::InvalidSpec(format!("topic {t} has an empty trigger")));
        }
    }
    let generated: Vec<Generated> = exec::map_range(spec.session_count, |i| generate_session(spec, ctx, i, &backchannels))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut order: Vec<usize> = (0..generated.len()).collect();
    order.shuffle(&mut seed::rng(spec.seed, &[seed::label("splits")]));
    let dev_count = (spec.dev_fraction * generated.len() as f64).round() as usize;
    let mut split = vec![Split::Train; generated.len()];
    for &i in &order[..dev_count] {
        split[i] = Split::Dev;
    }

    let sessions_dir = out_dir.join("sessions");
    std::fs::create_dir_all(&sessions_dir).map_err(|source| SynthError::Io { path: sessions_dir.clone(), source })?;
    let mut entries = Vec::with_capacity(generated.len());
    for (g, &s) in generated.iter().zip(&split) {
        let rel = |suffix: &str| PathBuf::from("sessions").join(format!("{}_{suffix}", g.id));
        let entry = ManifestEntry {
            id: g.id.clone(),
            transcript_path: rel("TRANSCRIPT.csv"),
            covarep_path: rel("COVAREP.csv"),
            formant_path: rel("FORMANT.csv"),
            au_path: rel("CLNF_AUs.txt"),
            gender: g.gender,
            phq8: g.phq8,
            split: s,
        };
        write(&out_dir.join(&entry.transcript_path), &g.transcript)?;
        write(&out_dir.join(&entry.covarep_path), &g.covarep)?;
        write(&out_dir.join(&entry.formant_path), &g.formant)?;
        write(&out_dir.join(&entry.au_path), &g.aus)?;
        entries.push(entry);
    }
    let manifest = Manifest { sessions: entries };
    write(&out_dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;

    let truth = truth_of(spec, ctx, &generated);
    write(&out_dir.join(TRUTH_FILE), &serde_json::to_string_pretty(&truth).expect("truth serializes"))?;
    Ok(truth)
}

fn truth_of(spec: &SynthSpec, ctx: &FeatureContext, generated: &[Generated]) -> PlantedTruth {
    let mut weights = Vec::with_capacity(spec.planted.len());
    let mut intercept = spec.intercept;
    for p in &spec.planted {
        match p.descriptor {
            FeatureDescriptor::Key { .. } => {
                let w = p.weight * 1.5f64.sqrt();
                weights.push(w);
                intercept -= w;
            }
            FeatureDescriptor::Functional { stream, channel, .. } => {
                let w = p.weight / PLANTED_SCALE;
                weights.push(w);
                intercept -= w * center(stream.kind(), channel);
            }
            _ => unreachable!("validated"),
        }
    }
    PlantedTruth {
        indices: spec.planted.iter().map(|p| ctx.layout.index_of(&p.descriptor).expect("validated")).collect(),
        names: spec.planted.iter().map(|p| p.descriptor.to_string()).collect(),
        weights,
        intercept,
        scope: spec.scope,
        sessions: generated
            .iter()
            .map(|g| SessionTruth { session_id: g.id.clone(), values: g.values.clone(), phq8: g.phq8 })
            .collect(),
    }
}
