//! Generator of small grounded worlds: topic-coherent captions over images
//! whose features are sums of concept prototypes, word-pair ratings with a
//! visual-only component, and priming trials with known RT effects.
//!
//! Concepts belong to a topic (which drives textual co-occurrence) and to a
//! visual cluster (which drives appearance). Captions never mix topics, so
//! same-cluster concepts from different topics are visual synonyms that
//! never co-occur in text.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Caption, CorpusError, ImageFeatureStore, PairedCorpus};
use crate::priming::{Lexicon, PrimeCondition, PrimingError, RawPrimingTrial, Soa, Task};
use crate::similarity::{PairKind, RatedPair, SimilarityDataset, SimilarityError};

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("infeasible world: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Priming(#[from] PrimingError),
}

/// Ground-truth rating = text·same_topic + visual·visual_similarity + noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingWeights {
    pub text: f64,
    pub visual: f64,
    pub noise_sd: f64,
}

/// Additive effects on log RT (milliseconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtWeights {
    pub base: f64,
    pub text: f64,
    pub visual: f64,
    pub long_soa: f64,
    pub naming: f64,
    /// Per character of target length, centered.
    pub length: f64,
    /// Per unit of log target frequency, centered.
    pub log_frequency: f64,
    pub subject_sd: f64,
    pub noise_sd: f64,
    pub error_rate: f64,
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub n_topics: usize,
    pub concepts_per_topic: usize,
    pub n_visual_clusters: usize,
    pub feature_dim: usize,
    pub n_images: usize,
    pub n_dev_images: usize,
    pub captions_per_image: usize,
    pub min_concepts_per_image: usize,
    pub max_concepts_per_image: usize,
    /// Chance that a caption mentions each of its image's concepts; at
    /// least one is always mentioned.
    pub mention_prob: f64,
    pub n_function_words: usize,
    pub min_function_words: usize,
    pub max_function_words: usize,
    /// Spread of concept prototypes around their cluster center.
    pub cluster_spread: f64,
    pub feature_noise: f64,
    pub rating: RatingWeights,
    pub n_rating_pairs: usize,
    pub rt: RtWeights,
    pub n_subjects: usize,
    /// Extra lexicon entries that never occur in captions.
    pub n_lexicon_fillers: usize,
    /// Targets given a fifth prime, which preprocessing must discard.
    pub malformed_targets: usize,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            n_topics: 6,
            concepts_per_topic: 8,
            n_visual_clusters: 8,
            feature_dim: 64,
            n_images: 400,
            n_dev_images: 50,
            captions_per_image: 5,
            min_concepts_per_image: 2,
            max_concepts_per_image: 3,
            mention_prob: 0.85,
            n_function_words: 8,
            min_function_words: 1,
            max_function_words: 3,
            cluster_spread: 0.35,
            feature_noise: 0.1,
            // rating noise comparable to the signal, as in human judgments
            rating: RatingWeights {
                text: 1.0,
                visual: 1.0,
                noise_sd: 1.0,
            },
            n_rating_pairs: 300,
            rt: RtWeights {
                base: 6.4,
                text: -0.04,
                visual: -0.04,
                long_soa: -0.05,
                naming: -0.1,
                length: 0.02,
                log_frequency: -0.03,
                subject_sd: 0.05,
                noise_sd: 0.15,
                error_rate: 0.03,
                missing_rate: 0.01,
            },
            n_subjects: 8,
            n_lexicon_fillers: 300,
            malformed_targets: 1,
            seed: 0,
        }
    }
}

impl WorldSpec {
    pub fn n_concepts(&self) -> usize {
        self.n_topics * self.concepts_per_topic
    }

    /// Shortest and longest caption in tokens.
    pub fn caption_length_range(&self) -> (usize, usize) {
        (1 + self.min_function_words, self.max_concepts_per_image + self.max_function_words)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::Infeasible(m));
        if self.n_topics < 2 {
            return bad("need at least 2 topics".into());
        }
        if self.n_visual_clusters < 1 || self.concepts_per_topic < 2 {
            return bad("need at least 1 visual cluster and 2 concepts per topic".into());
        }
        if self.feature_dim == 0 || self.feature_dim > 2048 {
            return bad(format!("feature_dim must be in 1..=2048, got {}", self.feature_dim));
        }
        if self.min_concepts_per_image == 0 || self.min_concepts_per_image > self.max_concepts_per_image {
            return bad("need 1 <= min_concepts_per_image <= max_concepts_per_image".into());
        }
        if self.max_concepts_per_image > self.concepts_per_topic {
            return bad(format!(
                "images hold up to {} concepts but topics have only {}",
                self.max_concepts_per_image, self.concepts_per_topic
            ));
        }
        if self.n_images < self.n_concepts() {
            return bad(format!(
                "{} training images cannot cover {} concept words",
                self.n_images,
                self.n_concepts()
            ));
        }
        if self.captions_per_image == 0 || self.n_dev_images < 2 {
            return bad("need captions_per_image >= 1 and n_dev_images >= 2".into());
        }
        if self.min_function_words > self.max_function_words || (self.max_function_words > 0 && self.n_function_words == 0) {
            return bad("function word counts are inconsistent".into());
        }
        if self.n_subjects == 0 || self.n_rating_pairs < 3 {
            return bad("need at least 1 subject and 3 rating pairs".into());
        }
        let r = &self.rating;
        let t = &self.rt;
        let finite = [
            r.text, r.visual, r.noise_sd, t.base, t.text, t.visual, t.long_soa, t.naming, t.length, t.log_frequency,
            t.subject_sd, t.noise_sd, self.cluster_spread, self.feature_noise, self.mention_prob,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("weights must be finite".into());
        }
        if r.noise_sd < 0.0 || t.noise_sd < 0.0 || t.subject_sd < 0.0 || self.feature_noise < 0.0 || self.cluster_spread < 0.0 {
            return bad("noise levels must be >= 0".into());
        }
        if !(0.0..1.0).contains(&t.error_rate) || !(0.0..1.0).contains(&t.missing_rate) || !(0.0..=1.0).contains(&self.mention_prob) {
            return bad("rates must be in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub word: String,
    pub topic: usize,
    pub cluster: usize,
    /// Unit-norm visual prototype.
    pub prototype: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub concepts: Vec<Concept>,
    pub function_words: Vec<String>,
    pub train: PairedCorpus,
    pub dev: PairedCorpus,
    pub similarity: SimilarityDataset,
    pub trials: Vec<RawPrimingTrial>,
    pub lexicon: Lexicon,
}

const STREAM_LAYOUT: u64 = 0;
const STREAM_IMAGES: u64 = 1;
const STREAM_RATINGS: u64 = 2;
const STREAM_PRIMING: u64 = 3;
const STREAM_LEXICON: u64 = 4;

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "pl", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Unique pseudo-word of `syllables` consonant–vowel syllables, optionally
/// closed by a consonant.
fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize, taken: &mut HashSet<String>) -> String {
    loop {
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if rng.random_bool(0.4) {
            w.push_str(["n", "s", "t", "m"][rng.random_range(0..4)]);
        }
        if taken.insert(w.clone()) {
            return w;
        }
    }
}

/// Index drawn with probability proportional to `1 / (i + 1)^0.8`.
fn zipf_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let weights: Vec<f64> = (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(0.8)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    n - 1
}

struct Layout {
    concepts: Vec<Concept>,
    function_words: Vec<String>,
    taken: HashSet<String>,
}

fn layout(spec: &WorldSpec) -> Layout {
    let mut rng = stream(spec.seed, STREAM_LAYOUT);
    let mut taken = HashSet::new();
    let function_words: Vec<String> = (0..spec.n_function_words).map(|_| pseudo_word(&mut rng, 1, &mut taken)).collect();
    let centers: Vec<Vec<f64>> = (0..spec.n_visual_clusters).map(|_| unit(gaussian(&mut rng, spec.feature_dim))).collect();
    let mut concepts = Vec::with_capacity(spec.n_concepts());
    for topic in 0..spec.n_topics {
        let mut perm: Vec<usize> = (0..spec.concepts_per_topic.max(spec.n_visual_clusters)).collect();
        perm.shuffle(&mut rng);
        for k in 0..spec.concepts_per_topic {
            let cluster = perm[k] % spec.n_visual_clusters;
            let syllables = rng.random_range(1..=3);
            let word = pseudo_word(&mut rng, syllables, &mut taken);
            let noise = gaussian(&mut rng, spec.feature_dim);
            let prototype = unit(
                centers[cluster]
                    .iter()
                    .zip(&noise)
                    .map(|(c, e)| c + spec.cluster_spread * e / (spec.feature_dim as f64).sqrt())
                    .collect(),
            );
            concepts.push(Concept {
                word,
                topic,
                cluster,
                prototype,
            });
        }
    }
    Layout {
        concepts,
        function_words,
        taken,
    }
}

fn caption_tokens(spec: &WorldSpec, rng: &mut ChaCha8Rng, concepts: &[usize], layout: &Layout) -> Vec<String> {
    let mut mentioned: Vec<usize> = concepts.iter().copied().filter(|_| rng.random_bool(spec.mention_prob)).collect();
    if mentioned.is_empty() {
        mentioned.push(concepts[rng.random_range(0..concepts.len())]);
    }
    mentioned.shuffle(rng);
    let mut tokens: Vec<String> = mentioned.iter().map(|&c| layout.concepts[c].word.clone()).collect();
    let n_fn = rng.random_range(spec.min_function_words..=spec.max_function_words);
    for _ in 0..n_fn {
        let w = layout.function_words[zipf_index(rng, layout.function_words.len())].clone();
        let at = rng.random_range(0..=tokens.len());
        tokens.insert(at, w);
    }
    tokens
}

fn images(
    spec: &WorldSpec,
    rng: &mut ChaCha8Rng,
    layout: &Layout,
    count: usize,
    prefix: &str,
    cover: bool,
) -> Result<PairedCorpus, WorldError> {
    let cpt = spec.concepts_per_topic;
    let mut captions = Vec::new();
    let mut features = ImageFeatureStore::new(spec.feature_dim);
    for i in 0..count {
        let topic = if cover { i % spec.n_topics } else { rng.random_range(0..spec.n_topics) };
        let m = rng.random_range(spec.min_concepts_per_image..=spec.max_concepts_per_image);
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        if cover {
            // cycle through the topic's concepts so every concept appears
            chosen.push((i / spec.n_topics) % cpt);
        }
        while chosen.len() < m {
            let k = zipf_index(rng, cpt);
            if !chosen.contains(&k) {
                chosen.push(k);
            }
        }
        let ids: Vec<usize> = chosen.iter().map(|k| topic * cpt + k).collect();
        let mut f = vec![0.0; spec.feature_dim];
        for &c in &ids {
            for (a, p) in f.iter_mut().zip(&layout.concepts[c].prototype) {
                *a += p;
            }
        }
        for a in f.iter_mut() {
            *a += spec.feature_noise * rng.sample::<f64, _>(StandardNormal);
        }
        let id = format!("{prefix}{i:05}");
        features.insert(id.clone(), f)?;
        for _ in 0..spec.captions_per_image {
            captions.push(Caption {
                image_id: id.clone(),
                tokens: caption_tokens(spec, rng, &ids, layout),
            });
        }
    }
    Ok(PairedCorpus::new(captions, features))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rated pairs drawn evenly from three strata: same topic, visual synonyms
/// (different topic, same cluster), and unrelated.
fn rating_dataset(spec: &WorldSpec, concepts: &[Concept]) -> Result<SimilarityDataset, WorldError> {
    let mut rng = stream(spec.seed, STREAM_RATINGS);
    let mut strata: [Vec<(usize, usize)>; 3] = Default::default();
    for a in 0..concepts.len() {
        for b in a + 1..concepts.len() {
            let (ca, cb) = (&concepts[a], &concepts[b]);
            let s = if ca.topic == cb.topic {
                0
            } else if ca.cluster == cb.cluster {
                1
            } else {
                2
            };
            strata[s].push((a, b));
        }
    }
    let per = spec.n_rating_pairs / 3;
    let mut chosen = Vec::new();
    for (s, pool) in strata.iter_mut().enumerate() {
        pool.shuffle(&mut rng);
        // the unrelated stratum absorbs any shortfall of the other two
        let take = if s == 2 { spec.n_rating_pairs - chosen.len() } else { per };
        chosen.extend(pool.iter().take(take).copied());
    }
    let pairs = chosen
        .into_iter()
        .map(|(a, b)| {
            let (ca, cb) = (&concepts[a], &concepts[b]);
            let text = f64::from(u8::from(ca.topic == cb.topic));
            let visual = cosine(&ca.prototype, &cb.prototype);
            let noise: f64 = rng.sample(StandardNormal);
            RatedPair {
                w1: ca.word.clone(),
                w2: cb.word.clone(),
                rating: spec.rating.text * text + spec.rating.visual * visual + spec.rating.noise_sd * noise,
            }
        })
        .collect();
    Ok(SimilarityDataset::new("synthetic", PairKind::Similarity, pairs)?)
}

fn corpus_counts(corpora: &[&PairedCorpus]) -> (BTreeMap<String, (u64, u64)>, u64) {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    let mut docs = 0;
    for c in corpora {
        for cap in &c.captions {
            docs += 1;
            let mut seen = BTreeSet::new();
            for t in &cap.tokens {
                let e = counts.entry(t.clone()).or_default();
                e.0 += 1;
                if seen.insert(t) {
                    e.1 += 1;
                }
            }
        }
    }
    (counts, docs)
}

fn lexicon(spec: &WorldSpec, layout: &mut Layout, train: &PairedCorpus, dev: &PairedCorpus) -> Result<Lexicon, WorldError> {
    let mut rng = stream(spec.seed, STREAM_LEXICON);
    let (counts, docs) = corpus_counts(&[train, dev]);
    let filler_docs = 1000u64;
    let mut entries: Vec<(String, u64, u64)> = counts.into_iter().map(|(w, (f, d))| (w, f, d)).collect();
    for _ in 0..spec.n_lexicon_fillers {
        let syllables = rng.random_range(1..=3);
        let w = pseudo_word(&mut rng, syllables, &mut layout.taken);
        let freq = 1 + (rng.random::<f64>().powi(3) * 2000.0) as u64;
        let d = 1 + rng.random_range(0..freq.min(filler_docs));
        entries.push((w, freq, d));
    }
    Ok(Lexicon::new(entries, docs + filler_docs)?)
}

fn priming_trials(spec: &WorldSpec, concepts: &[Concept], lexicon: &Lexicon) -> Vec<RawPrimingTrial> {
    let mut rng = stream(spec.seed, STREAM_PRIMING);
    let n = concepts.len();
    let subject_offsets: Vec<f64> = (0..spec.n_subjects).map(|_| spec.rt.subject_sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let mean_len = concepts.iter().map(|c| c.word.chars().count() as f64).sum::<f64>() / n as f64;
    let log_freq = |w: &str| (lexicon.get(w).map_or(1, |e| e.0) as f64).ln();
    let mean_freq = concepts.iter().map(|c| log_freq(&c.word)).sum::<f64>() / n as f64;

    let mut trials = Vec::new();
    for (t, target) in concepts.iter().enumerate() {
        let pick = |rng: &mut ChaCha8Rng, pred: &dyn Fn(&Concept) -> bool, exclude: &[usize]| -> Option<usize> {
            let pool: Vec<usize> = (0..n).filter(|&i| i != t && !exclude.contains(&i) && pred(&concepts[i])).collect();
            (!pool.is_empty()).then(|| pool[rng.random_range(0..pool.len())])
        };
        let unrelated = |c: &Concept| c.topic != target.topic && c.cluster != target.cluster;
        let strong = pick(&mut rng, &|c| c.topic == target.topic, &[]).expect("topics have 2+ concepts");
        let weak = pick(&mut rng, &|c| c.topic != target.topic && c.cluster == target.cluster, &[strong])
            .or_else(|| pick(&mut rng, &unrelated, &[strong]))
            .expect("some other concept");
        let u1 = pick(&mut rng, &unrelated, &[strong, weak]).unwrap_or(weak);
        let u2 = pick(&mut rng, &unrelated, &[strong, weak, u1]).unwrap_or(u1);
        let mut primes = vec![
            (strong, PrimeCondition::Strong),
            (weak, PrimeCondition::Weak),
            (u1, PrimeCondition::Unrelated1),
            (u2, PrimeCondition::Unrelated2),
        ];
        if t < spec.malformed_targets {
            if let Some(extra) = pick(&mut rng, &|_| true, &[strong, weak, u1, u2]) {
                primes.push((extra, PrimeCondition::Unrelated2));
            }
        }
        let length = target.word.chars().count() as f64 - mean_len;
        let freq = log_freq(&target.word) - mean_freq;
        for &(p, condition) in &primes {
            let prime = &concepts[p];
            let text = f64::from(u8::from(prime.topic == target.topic));
            let visual = cosine(&prime.prototype, &target.prototype);
            for soa in [Soa::Short, Soa::Long] {
                for task in [Task::LexicalDecision, Task::Naming] {
                    for (s, offset) in subject_offsets.iter().enumerate() {
                        let w = &spec.rt;
                        let mean = w.base
                            + w.long_soa * f64::from(u8::from(soa == Soa::Long))
                            + w.naming * f64::from(u8::from(task == Task::Naming))
                            + w.length * length
                            + w.log_frequency * freq
                            + w.text * text
                            + w.visual * visual
                            + offset;
                        let log_rt = mean + w.noise_sd * rng.sample::<f64, _>(StandardNormal);
                        let missing = rng.random_bool(w.missing_rate);
                        let error = !missing && rng.random_bool(w.error_rate);
                        trials.push(RawPrimingTrial {
                            subject: format!("s{s:02}"),
                            target: target.word.clone(),
                            prime: prime.word.clone(),
                            condition,
                            soa,
                            task,
                            rt: if missing { 0.0 } else { log_rt.exp() },
                            error,
                            missing,
                        });
                    }
                }
            }
        }
    }
    trials
}

/// Build a world from `spec`; identical specs give identical worlds.
pub fn generate_world(spec: &WorldSpec) -> Result<World, WorldError> {
    spec.validate()?;
    let mut layout = layout(spec);
    let mut rng = stream(spec.seed, STREAM_IMAGES);
    let train = images(spec, &mut rng, &layout, spec.n_images, "img", true)?;
    let dev = images(spec, &mut rng, &layout, spec.n_dev_images, "dev", false)?;
    let similarity = rating_dataset(spec, &layout.concepts)?;
    let lexicon = lexicon(spec, &mut layout, &train, &dev)?;
    let trials = priming_trials(spec, &layout.concepts, &lexicon);
    Ok(World {
        spec: spec.clone(),
        concepts: layout.concepts,
        function_words: layout.function_words,
        train,
        dev,
        similarity,
        trials,
        lexicon,
    })
}

impl World {
    pub fn concept(&self, word: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.word == word)
    }

    /// Concept pairs from different topics that share a visual cluster.
    pub fn visual_synonym_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.concepts.iter().enumerate() {
            for b in &self.concepts[i + 1..] {
                if a.topic != b.topic && a.cluster == b.cluster {
                    out.push((a.word.clone(), b.word.clone()));
                }
            }
        }
        out
    }

    /// Number of training and dev captions containing both words.
    pub fn cooccurrence(&self, a: &str, b: &str) -> usize {
        self.train
            .captions
            .iter()
            .chain(&self.dev.captions)
            .filter(|c| c.tokens.iter().any(|t| t == a) && c.tokens.iter().any(|t| t == b))
            .count()
    }

    pub fn visual_similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(&self.concept(a)?.prototype, &self.concept(b)?.prototype))
    }

    pub fn text_similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(f64::from(u8::from(self.concept(a)?.topic == self.concept(b)?.topic)))
    }
}
