//! Annotated document model, JSON-Lines I/O and anchor extraction.
//!
//! Documents arrive pre-annotated: tokenisation, entity recognition and
//! keyword extraction happen upstream. Every object multiset stores the
//! occurrence count of each member, which later becomes the object weight
//! when path instances are counted.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HintError, Result};

/// Token → multiplicity. Every stored multiplicity is at least 1.
pub type Bag = BTreeMap<String, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    /// Short, post-like documents (collection 1).
    #[serde(rename = "tweet")]
    Type1,
    /// Long, article-like documents (collection 2).
    #[serde(rename = "news")]
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityClass {
    #[serde(rename = "P")]
    Person,
    #[serde(rename = "O")]
    Organization,
    #[serde(rename = "L")]
    Location,
}

impl EntityClass {
    pub fn code(self) -> &'static str {
        match self {
            EntityClass::Person => "P",
            EntityClass::Organization => "O",
            EntityClass::Location => "L",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub words: Bag,
    pub entities: BTreeMap<(String, EntityClass), u32>,
    pub hashtags: Bag,
    pub mentions: Bag,
    pub hyperlinks: BTreeSet<String>,
    pub retweet_of: Option<String>,
    pub url: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, source: Source) -> Self {
        Document {
            id: id.into(),
            source,
            words: Bag::new(),
            entities: BTreeMap::new(),
            hashtags: Bag::new(),
            mentions: Bag::new(),
            hyperlinks: BTreeSet::new(),
            retweet_of: None,
            url: None,
        }
    }

    pub fn add_word(&mut self, word: impl Into<String>, count: u32) {
        if count > 0 {
            *self.words.entry(word.into()).or_insert(0) += count;
        }
    }

    pub fn add_entity(&mut self, name: impl Into<String>, class: EntityClass, count: u32) {
        if count > 0 {
            *self.entities.entry((name.into(), class)).or_insert(0) += count;
        }
    }

    /// Number of distinct words plus distinct entities shared with `other`.
    pub fn common_objects(&self, other: &Document) -> usize {
        let words = self
            .words
            .keys()
            .filter(|w| other.words.contains_key(*w))
            .count();
        let entities = self
            .entities
            .keys()
            .filter(|e| other.entities.contains_key(*e))
            .count();
        words + entities
    }

    fn validate(&self) -> Result<()> {
        let zero = self.words.values().any(|&c| c == 0)
            || self.entities.values().any(|&c| c == 0)
            || self.hashtags.values().any(|&c| c == 0)
            || self.mentions.values().any(|&c| c == 0);
        if zero {
            return Err(HintError::Validation(format!(
                "document {:?}: object multiplicities must be >= 1",
                self.id
            )));
        }
        if self.source == Source::Type2 {
            let tweet_only = !self.hashtags.is_empty()
                || !self.mentions.is_empty()
                || !self.hyperlinks.is_empty()
                || self.retweet_of.is_some();
            if tweet_only {
                return Err(HintError::Validation(format!(
                    "news document {:?} carries hashtags, mentions, hyperlinks or retweet_of",
                    self.id
                )));
            }
        } else if self.url.is_some() {
            return Err(HintError::Validation(format!(
                "tweet document {:?} must not carry a url",
                self.id
            )));
        }
        Ok(())
    }
}

/// The two comparative collections: posts (`collection1`) and articles (`collection2`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub collection1: Vec<Document>,
    pub collection2: Vec<Document>,
}

impl CorpusPair {
    /// Validates and wraps two collections.
    pub fn new(collection1: Vec<Document>, collection2: Vec<Document>) -> Result<Self> {
        let pair = CorpusPair {
            collection1,
            collection2,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn n1(&self) -> usize {
        self.collection1.len()
    }

    pub fn n2(&self) -> usize {
        self.collection2.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (docs, expected) in [
            (&self.collection1, Source::Type1),
            (&self.collection2, Source::Type2),
        ] {
            let mut seen = HashSet::new();
            for doc in docs {
                if doc.source != expected {
                    return Err(HintError::Validation(format!(
                        "document {:?} has source {:?} but sits in the {:?} collection",
                        doc.id, doc.source, expected
                    )));
                }
                if !seen.insert(doc.id.as_str()) {
                    return Err(HintError::Validation(format!("duplicate id {:?}", doc.id)));
                }
                doc.validate()?;
            }
        }
        let ids: HashSet<&str> = self.collection1.iter().map(|d| d.id.as_str()).collect();
        for doc in &self.collection1 {
            if let Some(target) = &doc.retweet_of {
                if !ids.contains(target.as_str()) {
                    return Err(HintError::Validation(format!(
                        "document {:?} retweets unknown id {:?}",
                        doc.id, target
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fails unless both collections hold at least one document.
    pub fn require_non_empty(&self) -> Result<()> {
        if self.collection1.is_empty() || self.collection2.is_empty() {
            return Err(HintError::Validation(
                "both collections must be non-empty before clustering".into(),
            ));
        }
        Ok(())
    }
}

/// Wire format of one JSON-Lines record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    id: String,
    source: Source,
    #[serde(default)]
    words: Vec<(String, u32)>,
    #[serde(default)]
    entities: Vec<(String, EntityClass, u32)>,
    #[serde(default)]
    hashtags: Vec<(String, u32)>,
    #[serde(default)]
    mentions: Vec<(String, u32)>,
    #[serde(default)]
    hyperlinks: Vec<String>,
    #[serde(default)]
    retweet_of: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

fn collect_bag(items: Vec<(String, u32)>) -> std::result::Result<Bag, String> {
    let mut bag = Bag::new();
    for (token, count) in items {
        if count == 0 {
            return Err(format!("multiplicity of {token:?} must be >= 1"));
        }
        *bag.entry(token).or_insert(0) += count;
    }
    Ok(bag)
}

impl DocRecord {
    fn into_document(self) -> std::result::Result<Document, String> {
        let mut entities = BTreeMap::new();
        for (name, class, count) in self.entities {
            if count == 0 {
                return Err(format!("multiplicity of entity {name:?} must be >= 1"));
            }
            *entities.entry((name, class)).or_insert(0) += count;
        }
        Ok(Document {
            id: self.id,
            source: self.source,
            words: collect_bag(self.words)?,
            entities,
            hashtags: collect_bag(self.hashtags)?,
            mentions: collect_bag(self.mentions)?,
            hyperlinks: self.hyperlinks.into_iter().collect(),
            retweet_of: self.retweet_of,
            url: self.url,
        })
    }

    fn from_document(doc: &Document) -> Self {
        let bag = |b: &Bag| b.iter().map(|(k, &v)| (k.clone(), v)).collect::<Vec<_>>();
        DocRecord {
            id: doc.id.clone(),
            source: doc.source,
            words: bag(&doc.words),
            entities: doc
                .entities
                .iter()
                .map(|((name, class), &c)| (name.clone(), *class, c))
                .collect(),
            hashtags: bag(&doc.hashtags),
            mentions: bag(&doc.mentions),
            hyperlinks: doc.hyperlinks.iter().cloned().collect(),
            retweet_of: doc.retweet_of.clone(),
            url: doc.url.clone(),
        }
    }
}

/// Reads one JSON-Lines collection. Blank lines are skipped.
pub fn read_collection(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| HintError::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HintError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| HintError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: DocRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        docs.push(record.into_document().map_err(parse_err)?);
    }
    Ok(docs)
}

/// Parses the post file and the article file into a validated [`CorpusPair`].
pub fn parse_corpus(path1: &Path, path2: &Path) -> Result<CorpusPair> {
    let c1 = read_collection(path1)?;
    let c2 = read_collection(path2)?;
    CorpusPair::new(c1, c2)
}

pub fn write_collection<W: Write>(mut out: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, &DocRecord::from_document(doc))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Anchor pairs `(idx1, idx2)` sorted by `idx1`; each `idx1` occurs at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    pairs: Vec<(usize, usize)>,
}

impl AnchorSet {
    /// Builds an anchor set, rejecting a post that anchors more than one article.
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(HintError::Validation(format!(
                "collection-1 document {} anchors more than one document",
                w[0].0
            )));
        }
        Ok(AnchorSet { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The article anchored by post `idx1`, if any.
    pub fn partner(&self, idx1: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&idx1, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }
}

/// Lowercases and strips trailing slashes.
pub fn normalize_url(url: &str) -> String {
    url.trim().to_lowercase().trim_end_matches('/').to_string()
}

/// Links posts to the articles they hyperlink, keeping a link only when the
/// pair shares at least `min_common` distinct words or entities. A post that
/// qualifies for several articles keeps the one with the most common objects
/// (lowest article index on ties).
pub fn extract_anchors(corpus: &CorpusPair, min_common: usize) -> Result<AnchorSet> {
    if min_common < 1 {
        return Err(HintError::Config("min_common must be >= 1".into()));
    }
    let mut by_url: HashMap<String, Vec<usize>> = HashMap::new();
    for (j, doc) in corpus.collection2.iter().enumerate() {
        if let Some(url) = &doc.url {
            by_url.entry(normalize_url(url)).or_default().push(j);
        }
    }

    let mut pairs = Vec::new();
    for (i, tweet) in corpus.collection1.iter().enumerate() {
        let targets: BTreeSet<usize> = tweet
            .hyperlinks
            .iter()
            .filter_map(|h| by_url.get(&normalize_url(h)))
            .flatten()
            .copied()
            .collect();
        // BTreeSet iterates ascending, so a strict `>` keeps the lowest index on ties.
        let mut best: Option<(usize, usize)> = None;
        for j in targets {
            let common = tweet.common_objects(&corpus.collection2[j]);
            if common >= min_common && best.is_none_or(|(_, c)| common > c) {
                best = Some((j, common));
            }
        }
        if let Some((j, _)) = best {
            pairs.push((i, j));
        }
    }
    AnchorSet::from_pairs(pairs)
}
