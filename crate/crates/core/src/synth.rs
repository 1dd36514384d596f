//! Planted-partition comparative corpora with known ground truth.
//!
//! Document `i` of either collection belongs to cluster `i mod k`. Every
//! object draw picks, in order of probability, a term from the document's
//! own cluster vocabulary (`p_in`), a background term (`p_out`), or a term
//! from the topical vocabulary of any cluster. Anchored posts hyperlink an
//! article of their own cluster and repeat one of its words.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_collection, CorpusPair, Document, EntityClass, Source};
use crate::error::{HintError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub k: usize,
    pub n1: usize,
    pub n2: usize,
    pub vocab_per_cluster: usize,
    pub shared_vocab: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub words_per_doc1: usize,
    pub words_per_doc2: usize,
    pub anchor_rate: f64,
    pub entity_fraction: f64,
    /// Fraction of anchors redirected to a uniformly random article.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k: 4,
            n1: 200,
            n2: 200,
            vocab_per_cluster: 40,
            shared_vocab: 100,
            p_in: 0.3,
            p_out: 0.02,
            words_per_doc1: 12,
            words_per_doc2: 80,
            anchor_rate: 0.5,
            entity_fraction: 0.2,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HintError::Config(m));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.k == 0 || self.k > self.n1.min(self.n2) {
            return bad(format!(
                "k = {} must lie in 1..=min(n1, n2) = {}",
                self.k,
                self.n1.min(self.n2)
            ));
        }
        if self.vocab_per_cluster == 0 {
            return bad("vocab_per_cluster must be >= 1".into());
        }
        if !unit(self.anchor_rate) || !unit(self.noise_rate) || !unit(self.entity_fraction) {
            return bad("anchor_rate, noise_rate and entity_fraction must lie in [0, 1]".into());
        }
        if !unit(self.p_in) || !unit(self.p_out) || self.p_in + self.p_out > 1.0 {
            return bad("p_in and p_out must be probabilities with p_in + p_out <= 1".into());
        }
        if self.p_in <= self.p_out {
            return bad(format!("p_in ({}) must exceed p_out ({})", self.p_in, self.p_out));
        }
        if self.p_out > 0.0 && self.shared_vocab == 0 {
            return bad("p_out > 0 needs shared_vocab >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: CorpusPair,
    pub truth1: Vec<usize>,
    pub truth2: Vec<usize>,
}

impl SynthCorpus {
    /// Writes `tweets.jsonl`, `news.jsonl` and `truth.csv` into `dir`, creating it if needed.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HintError::io(dir, e))?;
        let write = |name: &str, f: &dyn Fn(&mut BufWriter<fs::File>) -> std::io::Result<()>| {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| HintError::io(&path, e))?;
            let mut out = BufWriter::new(file);
            f(&mut out)
                .and_then(|_| out.flush())
                .map_err(|e| HintError::io(&path, e))
        };
        write("tweets.jsonl", &|w| write_collection(w, &self.corpus.collection1))?;
        write("news.jsonl", &|w| write_collection(w, &self.corpus.collection2))?;
        write("truth.csv", &|w| {
            writeln!(w, "collection,id,cluster")?;
            for (name, docs, truth) in [
                ("tweet", &self.corpus.collection1, &self.truth1),
                ("news", &self.corpus.collection2, &self.truth2),
            ] {
                for (d, c) in docs.iter().zip(truth.iter()) {
                    writeln!(w, "{name},{},{c}", d.id)?;
                }
            }
            Ok(())
        })
    }
}

pub fn article_url(j: usize) -> String {
    format!("https://news.example.com/n{j}")
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    entity_cut: usize,
}

impl Sampler<'_> {
    fn add_topical(&self, doc: &mut Document, cluster: usize, i: usize) {
        let name = format!("c{cluster}_w{i}");
        if i < self.entity_cut {
            let class = [EntityClass::Person, EntityClass::Organization, EntityClass::Location][i % 3];
            doc.add_entity(name, class, 1);
        } else {
            doc.add_word(name, 1);
        }
    }

    fn fill(&self, doc: &mut Document, cluster: usize, draws: usize, rng: &mut ChaCha8Rng) {
        let v = self.cfg.vocab_per_cluster;
        for _ in 0..draws {
            let r: f64 = rng.random();
            if r < self.cfg.p_in {
                self.add_topical(doc, cluster, rng.random_range(0..v));
            } else if r < self.cfg.p_in + self.cfg.p_out {
                doc.add_word(format!("bg{}", rng.random_range(0..self.cfg.shared_vocab)), 1);
            } else {
                let c = rng.random_range(0..self.cfg.k);
                self.add_topical(doc, c, rng.random_range(0..v));
            }
        }
    }
}

/// Generates a corpus pair and its planted labels. Identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sampler = Sampler {
        cfg,
        entity_cut: (cfg.entity_fraction * cfg.vocab_per_cluster as f64).round() as usize,
    };
    let truth1: Vec<usize> = (0..cfg.n1).map(|i| i % cfg.k).collect();
    let truth2: Vec<usize> = (0..cfg.n2).map(|j| j % cfg.k).collect();

    let mut news: Vec<Document> = (0..cfg.n2)
        .map(|j| {
            let mut d = Document::new(format!("n{j}"), Source::Type2);
            d.url = Some(article_url(j));
            sampler.fill(&mut d, truth2[j], cfg.words_per_doc2, &mut rng);
            d
        })
        .collect();
    let mut tweets: Vec<Document> = (0..cfg.n1)
        .map(|i| {
            let mut d = Document::new(format!("t{i}"), Source::Type1);
            sampler.fill(&mut d, truth1[i], cfg.words_per_doc1, &mut rng);
            d
        })
        .collect();

    let mut order: Vec<usize> = (0..cfg.n1).collect();
    order.shuffle(&mut rng);
    let anchored = (cfg.anchor_rate * cfg.n1 as f64).round() as usize;
    for &i in &order[..anchored] {
        let j = if rng.random::<f64>() < cfg.noise_rate {
            rng.random_range(0..cfg.n2)
        } else {
            // Articles of cluster c sit at c, c + k, c + 2k, ...
            let c = truth1[i];
            let members = (cfg.n2 - c).div_ceil(cfg.k);
            c + cfg.k * rng.random_range(0..members)
        };
        let words: Vec<&String> = news[j].words.keys().collect();
        let shared = if words.is_empty() {
            let w = format!("link_n{j}");
            news[j].add_word(w.clone(), 1);
            w
        } else {
            words[rng.random_range(0..words.len())].clone()
        };
        tweets[i].add_word(shared, 1);
        tweets[i].hyperlinks.insert(article_url(j));
    }

    Ok(SynthCorpus {
        corpus: CorpusPair::new(tweets, news)?,
        truth1,
        truth2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::extract_anchors;

    fn small(anchor_rate: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            k: 3,
            n1: 30,
            n2: 12,
            anchor_rate,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn anchor_rate_extremes() {
        let none = generate(&small(0.0, 1)).unwrap();
        assert!(extract_anchors(&none.corpus, 1).unwrap().is_empty());
        let all = generate(&small(1.0, 1)).unwrap();
        assert_eq!(extract_anchors(&all.corpus, 1).unwrap().len(), 30);
    }

    #[test]
    fn anchors_respect_planted_clusters() {
        for seed in 0..5 {
            let s = generate(&small(0.6, seed)).unwrap();
            let a = extract_anchors(&s.corpus, 1).unwrap();
            assert_eq!(a.len(), 18);
            assert!(a.pairs().iter().all(|&(i, j)| s.truth1[i] == s.truth2[j]));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small(0.5, 9)).unwrap(), generate(&small(0.5, 9)).unwrap());
        assert_ne!(generate(&small(0.5, 9)).unwrap(), generate(&small(0.5, 10)).unwrap());
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig { k: 13, ..small(0.5, 0) },
            SynthConfig { anchor_rate: 1.5, ..small(0.5, 0) },
            SynthConfig { p_in: 0.01, ..small(0.5, 0) },
            SynthConfig { k: 0, ..small(0.5, 0) },
        ] {
            assert!(matches!(generate(&cfg), Err(HintError::Config(_))));
        }
    }

    #[test]
    fn files_round_trip() {
        let s = generate(&small(0.5, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write_files(dir.path()).unwrap();
        let back = crate::corpus::parse_corpus(
            &dir.path().join("tweets.jsonl"),
            &dir.path().join("news.jsonl"),
        )
        .unwrap();
        assert_eq!(back, s.corpus);
        let truth = fs::read_to_string(dir.path().join("truth.csv")).unwrap();
        assert_eq!(truth.lines().count(), 1 + 30 + 12);
    }
}
