use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mock::marker_token;
use crate::corpus::{Document, LabeledDoc};
use crate::rng::{derive_seed, seeded, Rng};
use crate::sampler::largest_remainder;
use crate::schema::LabelSchema;
use crate::{Error, Result};

const OTHER_GENRES: [&str; 3] = ["Promotion", "Opinion/Argumentation", "Information/Explanation"];

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub langs: Vec<String>,
    pub seed: u64,
    /// Chance that a document carries the marker token of its true label.
    pub marker_prob: f64,
    /// Chance of one extra marker token of another label.
    pub distractor_prob: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Label `i` in a seeded order gets weight `1 / (i + 1)^label_skew`.
    pub label_skew: f64,
    pub news_fraction: f64,
    /// Share of words drawn from the label's per-language vocabulary.
    pub topical_share: f64,
    /// Share of words drawn from the label's language-independent words.
    pub shared_share: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_docs: 2_000,
            langs: ["sl", "hr", "el", "ca"].map(String::from).to_vec(),
            seed: 0,
            marker_prob: 0.85,
            distractor_prob: 0.1,
            min_words: 30,
            max_words: 90,
            label_skew: 0.6,
            news_fraction: 1.0,
            topical_share: 0.08,
            shared_share: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub docs: Vec<Document>,
    /// Generating label per document id.
    pub truth: BTreeMap<String, String>,
}

impl SyntheticCorpus {
    /// The documents with their generating label, as a gold pool.
    pub fn gold(&self) -> Vec<LabeledDoc> {
        self.gold_for(&self.docs)
    }

    pub fn gold_for<'a>(&self, docs: impl IntoIterator<Item = &'a Document>) -> Vec<LabeledDoc> {
        docs.into_iter()
            .map(|d| LabeledDoc::from_document(d, self.truth.get(&d.id).cloned()))
            .collect()
    }
}

const COMMON_WORDS: usize = 300;

struct Vocab {
    common: Vec<String>,
    topical: Vec<Vec<String>>,
}

fn syllables(lang: &str) -> (&'static [&'static str], &'static [&'static str]) {
    if lang == "el" {
        (
            &["β", "γ", "δ", "θ", "κ", "λ", "μ", "ν", "π", "ρ", "σ", "τ", "φ", "χ"],
            &["α", "ε", "η", "ι", "ο", "υ", "ω"],
        )
    } else {
        (
            &["b", "c", "d", "f", "g", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"],
            &["a", "e", "i", "o", "u"],
        )
    }
}

fn word(rng: &mut Rng, lang: &str) -> String {
    let (cons, vowels) = syllables(lang);
    let n = rng.random_range(2..=4);
    (0..n)
        .map(|_| format!("{}{}", cons.choose(rng).expect("non-empty"), vowels.choose(rng).expect("non-empty")))
        .collect()
}

fn words(seed: u64, tags: &[&str], lang: &str, n: usize) -> Vec<String> {
    let mut rng = seeded(derive_seed(seed, tags));
    (0..n).map(|_| word(&mut rng, lang)).collect()
}

/// Generates documents whose text depends on a hidden topic label: each
/// language has its own topical and filler vocabularies, every topic also
/// has a few language-independent words, and most documents carry the
/// marker token read by the mock teacher.
pub fn generate(spec: &SyntheticSpec, schema: &LabelSchema) -> Result<SyntheticCorpus> {
    if spec.langs.is_empty() {
        return Err(Error::Config("synthetic corpus needs at least one language".into()));
    }
    if spec.min_words == 0 || spec.min_words > spec.max_words {
        return Err(Error::Config("need 1 <= min_words <= max_words".into()));
    }
    if spec.topical_share + spec.shared_share > 1.0 {
        return Err(Error::Config("topical_share + shared_share exceeds 1".into()));
    }
    for p in [spec.marker_prob, spec.distractor_prob, spec.news_fraction, spec.topical_share, spec.shared_share] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("probability {p} outside [0, 1]")));
        }
    }
    let labels: Vec<String> = schema.topic_ids();
    let mut ranked: Vec<usize> = (0..labels.len()).collect();
    ranked.shuffle(&mut seeded(derive_seed(spec.seed, &["label-rank"])));
    let mut weights = vec![0.0; labels.len()];
    for (rank, &i) in ranked.iter().enumerate() {
        weights[i] = 1.0 / ((rank + 1) as f64).powf(spec.label_skew);
    }
    let label_dist = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;

    let shared: Vec<Vec<String>> = labels
        .iter()
        .map(|l| words(spec.seed, &["shared", l], "", 8))
        .collect();
    let per_lang = largest_remainder(&vec![1; spec.langs.len()], spec.n_docs as u64);
    // Filler words follow a Zipf law, like function words in real text.
    let zipf = WeightedIndex::new((0..COMMON_WORDS).map(|r| 1.0 / (r + 1) as f64)).expect("positive weights");

    let mut docs = Vec::with_capacity(spec.n_docs);
    let mut truth = BTreeMap::new();
    for (lang, &count) in spec.langs.iter().zip(&per_lang) {
        let vocab = Vocab {
            common: words(spec.seed, &["common", lang], lang, COMMON_WORDS),
            topical: labels
                .iter()
                .map(|l| words(spec.seed, &["topical", lang, l], lang, 40))
                .collect(),
        };
        let mut rng = seeded(derive_seed(spec.seed, &["docs", lang]));
        for i in 0..count as usize {
            let label = label_dist.sample(&mut rng);
            let n_words = rng.random_range(spec.min_words..=spec.max_words);
            let mut body: Vec<String> = (0..n_words)
                .map(|_| {
                    let r: f64 = rng.random();
                    let pool = if r < spec.topical_share {
                        &vocab.topical[label]
                    } else if r < spec.topical_share + spec.shared_share {
                        &shared[label]
                    } else {
                        return vocab.common[zipf.sample(&mut rng)].clone();
                    };
                    pool.choose(&mut rng).expect("non-empty").clone()
                })
                .collect();
            if rng.random_bool(spec.marker_prob) {
                let at = rng.random_range(0..=body.len());
                body.insert(at, marker_token(&labels[label]));
            }
            if rng.random_bool(spec.distractor_prob) {
                let other = (label + rng.random_range(1..labels.len().max(2))) % labels.len();
                let at = rng.random_range(0..=body.len());
                body.insert(at, marker_token(&labels[other]));
            }
            let genre = if rng.random_bool(spec.news_fraction) {
                "News"
            } else {
                OTHER_GENRES.choose(&mut rng).expect("non-empty")
            };
            let text = body
                .chunks(12)
                .map(|s| s.join(" ") + ".")
                .collect::<Vec<_>>()
                .join(" ");
            let id = format!("syn-{lang}-{i:05}");
            truth.insert(id.clone(), labels[label].clone());
            docs.push(Document::new(id, lang.as_str(), genre, text));
        }
    }
    Ok(SyntheticCorpus { docs, truth })
}
