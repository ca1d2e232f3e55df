//! Library-level acceptance criteria 1 to 6, shared by both acceptance targets.
//! Every reference value here is computed by code written independently of
//! the library (plain loops, exhaustive enumeration, regression ANOVA).

use std::time::{Duration, Instant};

use rand::Rng;
use topicwise::corpus::load_dataset;
use topicwise::eval::{f1_at_threshold, mae, pearson_cc, rmse};
use topicwise::features::{
    assemble_vector, FeatureContext, FeatureDescriptor, Stream, MISSING, TOPIC_BLOCK, WORD_CATEGORIES,
};
use topicwise::matrix::Matrix;
use topicwise::model::oversample_indices;
use topicwise::seed;
use topicwise::select::{cfs_search, f_value, CfsConfig, CorrelationCache};
use topicwise::synth::{generate_corpus, SynthSpec, MANIFEST_FILE};
use topicwise::topic::{merge_segments, segment_interview};

pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        let within = self.elapsed <= self.limit;
        format!(
            "{} [{}] {}: {} ({:.2}s, limit {}s{})",
            if self.pass && within { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            if within { "" } else { ", over time" }
        )
    }

    pub fn ok(&self) -> bool {
        self.pass && self.elapsed <= self.limit
    }
}

pub fn timed(id: u32, name: &'static str, limit_s: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    Outcome { id, name, pass, detail, elapsed: t.elapsed(), limit: Duration::from_secs(limit_s) }
}

pub fn library_criteria() -> Vec<Outcome> {
    vec![
        timed(1, "layout exactness", 1, layout_exactness),
        timed(2, "functional counts", 1, functional_counts),
        timed(3, "CFS oracle equivalence", 30, cfs_oracle),
        timed(4, "F-value oracle", 5, f_value_oracle),
        timed(5, "metric oracles", 5, metric_oracles),
        timed(6, "oversampling balance", 5, oversampling_balance),
    ]
}

/// Gender, presence, key, LIWC, formant, COVAREP, AU dimensions of the 83-topic vector.
const TABLE_DIMS: [usize; 7] = [1, 83, 8, 7719, 1245, 18426, 4980];

fn layout_exactness() -> (bool, String) {
    let dir = tempfile::tempdir().expect("temp dir");
    generate_corpus(&SynthSpec { session_count: 1, ..Default::default() }, dir.path()).expect("corpus");
    let ds = load_dataset(&dir.path().join(MANIFEST_FILE)).expect("load");
    let ctx = FeatureContext::example();
    let s = &ds.sessions[0];
    let v = assemble_vector(s, &merge_segments(&segment_interview(&ctx.topics, &s.transcript)), &ctx).expect("vector");

    let mut counts = [0usize; 7];
    for i in 0..v.len() {
        let slot = match ctx.layout.descriptor(i) {
            Some(FeatureDescriptor::Gender) => 0,
            Some(FeatureDescriptor::Presence { .. }) => 1,
            Some(FeatureDescriptor::Key { .. }) => 2,
            Some(FeatureDescriptor::Liwc { .. }) => 3,
            Some(FeatureDescriptor::Functional { stream: Stream::Formant, .. }) => 4,
            Some(FeatureDescriptor::Functional { stream: Stream::Covarep, .. }) => 5,
            Some(FeatureDescriptor::Functional { stream: Stream::Au, .. }) => 6,
            None => return (false, format!("index {i} has no descriptor")),
        };
        counts[slot] += 1;
    }
    let b = ctx.layout.block_counts();
    let declared = [b.gender, b.presence, b.key, b.liwc, b.formant, b.covarep, b.au];
    let pass = v.len() == 32_462 && counts == TABLE_DIMS && declared == TABLE_DIMS;
    (pass, format!("dim {}, blocks {:?} (want {:?})", v.len(), counts, TABLE_DIMS))
}

fn functional_counts() -> (bool, String) {
    let dir = tempfile::tempdir().expect("temp dir");
    generate_corpus(&SynthSpec { session_count: 3, ..Default::default() }, dir.path()).expect("corpus");
    let ds = load_dataset(&dir.path().join(MANIFEST_FILE)).expect("load");
    let ctx = FeatureContext::example();
    let (mut present, mut absent) = (0, 0);
    for s in &ds.sessions {
        let v = assemble_vector(s, &merge_segments(&segment_interview(&ctx.topics, &s.transcript)), &ctx).expect("vector");
        for t in 1..=ctx.topics.len() {
            let block = &v.0[ctx.layout.topic_offset(t)..ctx.layout.topic_offset(t) + TOPIC_BLOCK];
            let filled = |r: &[f64]| r.iter().filter(|&&x| x != MISSING && x.is_finite()).count();
            if v.0[t] == 1.0 {
                let audio = filled(&block[WORD_CATEGORIES..WORD_CATEGORIES + 237]);
                let video = filled(&block[WORD_CATEGORIES + 237..]);
                if audio != 237 || video != 60 {
                    return (false, format!("session {} topic {t}: {audio} audio, {video} video", s.meta.session_id));
                }
                present += 1;
            } else {
                let key_missing = ctx
                    .layout
                    .index_of(&FeatureDescriptor::Key { topic: t })
                    .is_none_or(|k| v.0[k] == MISSING);
                if !block.iter().all(|&x| x == MISSING) || !key_missing {
                    return (false, format!("session {} absent topic {t} has values", s.meta.session_id));
                }
                absent += 1;
            }
        }
    }
    (present > 0 && absent > 0, format!("{present} present topics with 237 audio + 60 video, {absent} absent topics all -1"))
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma).powi(2);
        sbb += (b[i] - mb).powi(2);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

fn normal(rng: &mut seed::Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn cfs_oracle() -> (bool, String) {
    let mut equal = 0;
    let mut worst_gap: f64 = 0.0;
    for inst in 0..50u64 {
        let mut rng = seed::rng(2024, &[inst]);
        let n = rng.random_range(15..=60);
        let p = rng.random_range(3..=12);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = if j > 0 && rng.random_bool(0.4) {
                let src = rng.random_range(0..j);
                let w = rng.random_range(0.3..1.5);
                (0..n).map(|i| w * cols[src][i] + normal(&mut rng)).collect()
            } else {
                (0..n).map(|_| normal(&mut rng)).collect()
            };
            cols.push(col);
        }
        let y: Vec<f64> = (0..n)
            .map(|i| cols.iter().take(3).enumerate().map(|(j, c)| (j as f64 + 1.0) * 0.5 * c[i]).sum::<f64>() + 1.5 * normal(&mut rng))
            .collect();

        let rcf: Vec<f64> = cols.iter().map(|c| corr(c, &y).abs()).collect();
        let rff: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| corr(a, b).abs()).collect()).collect();
        let mut best: f64 = 0.0;
        for mask in 1u32..(1 << p) {
            let s: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
            let k = s.len() as f64;
            let cf: f64 = s.iter().map(|&j| rcf[j]).sum();
            let mut ff = 0.0;
            for (a, &i) in s.iter().enumerate() {
                for &j in &s[a + 1..] {
                    ff += rff[i][j];
                }
            }
            best = best.max(cf / (k + 2.0 * ff).sqrt());
        }

        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let x = Matrix::from_rows(&rows, p).expect("matrix");
        let cache = CorrelationCache::new(&x, &y).expect("cache");
        let got = cfs_search(&cache, &CfsConfig::default()).expect("search");
        let gap = best - got.merit;
        if gap.abs() <= 1e-12 {
            equal += 1;
        } else {
            worst_gap = worst_gap.max(gap);
        }
    }
    (equal >= 45, format!("{equal}/50 instances reach the exhaustive maximum within 1e-12, largest greedy gap {worst_gap:.3e}"))
}

fn f_value_oracle() -> (bool, String) {
    let mut rng = seed::rng(77, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(3..=200);
        let beta = rng.random_range(-2.0..2.0);
        let sigma = rng.random_range(0.1..2.0);
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng) * 3.0 + 1.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| beta * v + sigma * normal(&mut rng) + 4.0).collect();
        // least-squares fit, then explained and residual sums of squares
        let nf = n as f64;
        let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let icpt = my - slope * mx;
        let ssr: f64 = x.iter().map(|v| (icpt + slope * v - my).powi(2)).sum();
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
        let reference = ssr / (sse / (nf - 2.0));
        let got = f_value(&x, &y).expect("f value");
        worst = worst.max(((got - reference) / reference).abs());
    }
    (worst <= 1e-9, format!("1000 pairs, largest relative error {worst:.3e} (tolerance 1e-9)"))
}

fn metric_oracles() -> (bool, String) {
    let mut rng = seed::rng(55, &[]);
    let mut worst: f64 = 0.0;
    let mut order_violations = 0;
    let mut flag_mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=200);
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=24u8))).collect();
        let yhat: Vec<f64> = match case % 4 {
            0 => y.iter().map(|v| v + normal(&mut rng) * 3.0).collect(),
            1 => (0..n).map(|_| rng.random_range(0.0..24.0)).collect(),
            2 => vec![rng.random_range(0.0..24.0); n],
            _ => y.iter().map(|v| v + 0.25).collect(),
        };
        let mut se = 0.0;
        let mut ae = 0.0;
        for i in 0..n {
            se += (y[i] - yhat[i]) * (y[i] - yhat[i]);
            ae += (y[i] - yhat[i]).abs();
        }
        let ref_rmse = (se / n as f64).sqrt();
        let ref_mae = ae / n as f64;
        let (mut tp, mut fp, mut fnn) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (a, b) = (y[i] >= 10.0, yhat[i] >= 10.0);
            if a && b {
                tp += 1.0;
            } else if b {
                fp += 1.0;
            } else if a {
                fnn += 1.0;
            }
        }
        let ref_f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fnn) } else { 0.0 };
        let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
        let cc_defined = n >= 2 && !constant(&y) && !constant(&yhat);

        let r = rmse(&y, &yhat).expect("rmse");
        let m = mae(&y, &yhat).expect("mae");
        let cc = pearson_cc(&y, &yhat).expect("cc");
        let f1 = f1_at_threshold(&y, &yhat, 10.0).expect("f1");
        let err = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        worst = worst.max(err(r, ref_rmse)).max(err(m, ref_mae)).max(err(f1.value, ref_f1));
        if cc_defined {
            worst = worst.max(err(cc.value, corr(&y, &yhat)));
        }
        if cc.degenerate == cc_defined {
            flag_mismatches += 1;
        }
        if m > r {
            order_violations += 1;
        }
    }
    let pass = worst <= 1e-12 && order_violations == 0 && flag_mismatches == 0;
    (
        pass,
        format!(
            "1000 vectors, largest error {worst:.3e} (tolerance 1e-12), mae > rmse {order_violations} times, cc flag mismatches {flag_mismatches}"
        ),
    )
}

fn oversampling_balance() -> (bool, String) {
    let mut rng = seed::rng(99, &[]);
    let mut worst_spread = 0;
    let mut nondeterministic = 0;
    let mut lost = 0;
    for case in 0..100u64 {
        let n = rng.random_range(1..=150);
        // skewed toward low scores
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=24u8).min(rng.random_range(0..=24u8)))).collect();
        let idx = oversample_indices(&y, case).expect("oversample");
        if idx != oversample_indices(&y, case).expect("oversample") {
            nondeterministic += 1;
        }
        let mut counts = std::collections::BTreeMap::new();
        for &i in &idx {
            *counts.entry(y[i] as u8).or_insert(0usize) += 1;
        }
        let max = *counts.values().max().expect("non-empty");
        let min = *counts.values().min().expect("non-empty");
        worst_spread = worst_spread.max(max - min);
        if idx[..n] != (0..n).collect::<Vec<_>>()[..] {
            lost += 1;
        }
    }
    let pass = worst_spread <= 1 && nondeterministic == 0 && lost == 0;
    (
        pass,
        format!("100 multisets, largest count gap {worst_spread} (allowed 1), {nondeterministic} nondeterministic, {lost} lost originals"),
    )
}
