//! Path-instance count matrices over the star-schema networks.
//!
//! Every meta-path here has length at most two through the star schema: a
//! document links to an object (word, entity, mention, ...) which links back
//! to another document, or documents link directly through retweets. An
//! object occurring `c` times in a document carries weight `c`, so two
//! documents holding the same object `c_x` and `c_y` times are joined by
//! `c_x * c_y` path instances through it.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityClass, Source};
use crate::error::{HintError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    Word,
    /// Entities of every class pooled into one object type.
    Entity,
    EntityP,
    EntityO,
    EntityL,
    Mention,
    Hashtag,
    Hyperlink,
}

impl ObjectClass {
    fn name(self) -> &'static str {
        match self {
            ObjectClass::Word => "word",
            ObjectClass::Entity => "entity",
            ObjectClass::EntityP => "entity_p",
            ObjectClass::EntityO => "entity_o",
            ObjectClass::EntityL => "entity_l",
            ObjectClass::Mention => "mention",
            ObjectClass::Hashtag => "hashtag",
            ObjectClass::Hyperlink => "hyperlink",
        }
    }

    fn entity_filter(self) -> Option<Option<EntityClass>> {
        match self {
            ObjectClass::Entity => Some(None),
            ObjectClass::EntityP => Some(Some(EntityClass::Person)),
            ObjectClass::EntityO => Some(Some(EntityClass::Organization)),
            ObjectClass::EntityL => Some(Some(EntityClass::Location)),
            _ => None,
        }
    }

    /// The `(object key, weight)` pairs of this class held by `doc`.
    pub fn objects(self, doc: &Document) -> Vec<(String, u64)> {
        let bag = |b: &crate::corpus::Bag| {
            b.iter()
                .map(|(k, &c)| (k.clone(), u64::from(c)))
                .collect::<Vec<_>>()
        };
        match self {
            ObjectClass::Word => bag(&doc.words),
            ObjectClass::Mention => bag(&doc.mentions),
            ObjectClass::Hashtag => bag(&doc.hashtags),
            ObjectClass::Hyperlink => doc
                .hyperlinks
                .iter()
                .map(|h| (crate::corpus::normalize_url(h), 1))
                .collect(),
            _ => {
                let wanted = self.entity_filter().expect("entity class");
                doc.entities
                    .iter()
                    .filter(|((_, class), _)| wanted.is_none_or(|w| w == *class))
                    .map(|((name, class), &c)| (format!("{}:{name}", class.code()), u64::from(c)))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    /// Post ↔ post through a direct retweet.
    Retweet,
    /// Post → post ← post: both retweet the same post.
    CommonRetweet,
    /// Sum of `Retweet` and `CommonRetweet`.
    RetweetRelation,
    /// Document → object ← document.
    CommonObject(ObjectClass),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaPath {
    pub id: String,
    pub side: Source,
    pub kind: PathKind,
}

impl MetaPath {
    pub fn new(side: Source, kind: PathKind) -> Result<Self> {
        let ok = match (side, kind) {
            (Source::Type1, _) => true,
            (Source::Type2, PathKind::CommonObject(c)) => matches!(
                c,
                ObjectClass::Word | ObjectClass::EntityP | ObjectClass::EntityO | ObjectClass::EntityL
            ),
            (Source::Type2, _) => false,
        };
        if !ok {
            return Err(HintError::Config(format!(
                "meta-path {kind:?} is not defined on the {side:?} network"
            )));
        }
        let prefix = match side {
            Source::Type1 => "t1",
            Source::Type2 => "t2",
        };
        let suffix = match kind {
            PathKind::Retweet => "retweet".to_string(),
            PathKind::CommonRetweet => "common_retweet".to_string(),
            PathKind::RetweetRelation => "retweet_relation".to_string(),
            PathKind::CommonObject(c) => c.name().to_string(),
        };
        Ok(MetaPath {
            id: format!("{prefix}_{suffix}"),
            side,
            kind,
        })
    }

    /// Post meta-paths. With `split_retweet` the two retweet paths stay
    /// separate (seven paths), otherwise they are summed into one (six).
    pub fn defaults_type1(split_retweet: bool) -> Vec<MetaPath> {
        let mut kinds = if split_retweet {
            vec![PathKind::Retweet, PathKind::CommonRetweet]
        } else {
            vec![PathKind::RetweetRelation]
        };
        kinds.extend(
            [
                ObjectClass::Word,
                ObjectClass::Entity,
                ObjectClass::Mention,
                ObjectClass::Hashtag,
                ObjectClass::Hyperlink,
            ]
            .map(PathKind::CommonObject),
        );
        kinds
            .into_iter()
            .map(|k| MetaPath::new(Source::Type1, k).expect("valid default"))
            .collect()
    }

    /// Article meta-paths: words and the three entity classes.
    pub fn defaults_type2() -> Vec<MetaPath> {
        [
            ObjectClass::Word,
            ObjectClass::EntityP,
            ObjectClass::EntityO,
            ObjectClass::EntityL,
        ]
        .into_iter()
        .map(|c| MetaPath::new(Source::Type2, PathKind::CommonObject(c)).expect("valid default"))
        .collect()
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Sparse non-negative integer matrix of path-instance counts for one meta-path.
///
/// Rows are stored as column-sorted `(col, count)` lists holding only
/// non-zero entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    pub meta_path: MetaPath,
    rows: Vec<Vec<(usize, u64)>>,
    row_totals: Vec<u64>,
}

impl CountMatrix {
    fn from_rows(meta_path: MetaPath, maps: Vec<HashMap<usize, u64>>) -> Self {
        let rows: Vec<Vec<(usize, u64)>> = maps
            .into_iter()
            .map(|m| {
                let mut r: Vec<_> = m.into_iter().filter(|&(_, c)| c > 0).collect();
                r.sort_unstable();
                r
            })
            .collect();
        let row_totals = rows.iter().map(|r| r.iter().map(|&(_, c)| c).sum()).collect();
        CountMatrix {
            meta_path,
            rows,
            row_totals,
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, x: usize, y: usize) -> u64 {
        let row = &self.rows[x];
        row.binary_search_by_key(&y, |&(c, _)| c)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    /// Non-zero entries of row `x` as `(col, count)`, ascending by column.
    pub fn row(&self, x: usize) -> &[(usize, u64)] {
        &self.rows[x]
    }

    /// `|P(x ⇝ •)|`: the number of path instances leaving `x`.
    pub fn row_total(&self, x: usize) -> u64 {
        self.row_totals[x]
    }

    pub fn row_totals(&self) -> &[u64] {
        &self.row_totals
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Non-zero entries as `(row, col, count)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, r)| r.iter().map(move |&(y, c)| (x, y, c)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(x, y, c)| self.get(y, x) == c)
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let n = self.n();
        let mut m = vec![vec![0; n]; n];
        for (x, y, c) in self.triplets() {
            m[x][y] = c;
        }
        m
    }

    /// Writes `row,col,count` triplet CSV with a header row.
    pub fn write_triplet_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,col,count")?;
        for (x, y, c) in self.triplets() {
            writeln!(out, "{x},{y},{c}")?;
        }
        Ok(())
    }
}

/// Counts path instances of `meta_path` between every pair of documents.
pub fn build_count_matrix(docs: &[Document], meta_path: &MetaPath) -> Result<CountMatrix> {
    if let Some(doc) = docs.iter().find(|d| d.source != meta_path.side) {
        return Err(HintError::Validation(format!(
            "document {:?} ({:?}) does not match meta-path {} on {:?}",
            doc.id, doc.source, meta_path.id, meta_path.side
        )));
    }
    let n = docs.len();
    let mut rows: Vec<HashMap<usize, u64>> = vec![HashMap::new(); n];
    match meta_path.kind {
        PathKind::CommonObject(class) => common_object(docs, class, &mut rows),
        PathKind::Retweet => retweet(docs, &mut rows),
        PathKind::CommonRetweet => common_retweet(docs, &mut rows),
        PathKind::RetweetRelation => {
            retweet(docs, &mut rows);
            common_retweet(docs, &mut rows);
        }
    }
    Ok(CountMatrix::from_rows(meta_path.clone(), rows))
}

fn common_object(docs: &[Document], class: ObjectClass, rows: &mut [HashMap<usize, u64>]) {
    // Inverted index: object → postings (document, weight).
    let mut postings: HashMap<String, Vec<(usize, u64)>> = HashMap::new();
    for (x, doc) in docs.iter().enumerate() {
        for (key, c) in class.objects(doc) {
            postings.entry(key).or_default().push((x, c));
        }
    }
    for list in postings.values() {
        for &(x, cx) in list {
            for &(y, cy) in list {
                *rows[x].entry(y).or_insert(0) += cx * cy;
            }
        }
    }
}

fn id_index(docs: &[Document]) -> HashMap<&str, usize> {
    docs.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect()
}

fn retweet(docs: &[Document], rows: &mut [HashMap<usize, u64>]) {
    let index = id_index(docs);
    let mut linked = std::collections::BTreeSet::new();
    for (x, doc) in docs.iter().enumerate() {
        if let Some(&y) = doc.retweet_of.as_deref().and_then(|id| index.get(id)) {
            if x != y {
                linked.insert((x.min(y), x.max(y)));
            }
        }
    }
    for (x, y) in linked {
        *rows[x].entry(y).or_insert(0) += 1;
        *rows[y].entry(x).or_insert(0) += 1;
    }
}

fn common_retweet(docs: &[Document], rows: &mut [HashMap<usize, u64>]) {
    let index = id_index(docs);
    let mut retweeters: HashMap<usize, Vec<usize>> = HashMap::new();
    for (x, doc) in docs.iter().enumerate() {
        if let Some(&z) = doc.retweet_of.as_deref().and_then(|id| index.get(id)) {
            retweeters.entry(z).or_default().push(x);
        }
    }
    for group in retweeters.values() {
        for &x in group {
            for &y in group {
                if x != y {
                    *rows[x].entry(y).or_insert(0) += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, words: &[(&str, u32)]) -> Document {
        let mut d = Document::new(id, Source::Type1);
        for &(w, c) in words {
            d.add_word(w, c);
        }
        d
    }

    fn word_path() -> MetaPath {
        MetaPath::new(Source::Type1, PathKind::CommonObject(ObjectClass::Word)).unwrap()
    }

    #[test]
    fn occurrence_products() {
        let docs = [doc("x", &[("obama", 2)]), doc("y", &[("obama", 1)])];
        let a = build_count_matrix(&docs, &word_path()).unwrap();
        assert_eq!(a.get(0, 1), 2);
        assert_eq!(a.get(0, 0), 4);
        assert_eq!(a.get(1, 1), 1);
        assert_eq!(a.row_total(0), 6);
    }

    #[test]
    fn disjoint_documents_have_no_paths() {
        let docs = [doc("x", &[("a", 1)]), doc("y", &[("b", 3)])];
        let a = build_count_matrix(&docs, &word_path()).unwrap();
        assert_eq!(a.get(0, 1), 0);
        assert_eq!(a.get(1, 0), 0);
    }

    #[test]
    fn common_retweet_counts_shared_targets() {
        let mut x = doc("x", &[]);
        let mut y = doc("y", &[]);
        x.retweet_of = Some("z".into());
        y.retweet_of = Some("z".into());
        let docs = [x, y, doc("z", &[])];
        let cr = MetaPath::new(Source::Type1, PathKind::CommonRetweet).unwrap();
        let a = build_count_matrix(&docs, &cr).unwrap();
        assert_eq!(a.get(0, 1), 1);
        assert_eq!(a.get(1, 0), 1);
        assert_eq!(a.get(0, 0), 0);
        assert_eq!(a.get(0, 2), 0);

        let rt = MetaPath::new(Source::Type1, PathKind::Retweet).unwrap();
        let r = build_count_matrix(&docs, &rt).unwrap();
        assert_eq!((r.get(0, 2), r.get(2, 0), r.get(0, 1)), (1, 1, 0));

        let both = MetaPath::new(Source::Type1, PathKind::RetweetRelation).unwrap();
        let s = build_count_matrix(&docs, &both).unwrap();
        assert_eq!(s.to_dense(), vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn entity_paths_respect_class() {
        let mut x = Document::new("x", Source::Type2);
        let mut y = Document::new("y", Source::Type2);
        x.add_entity("Paris", EntityClass::Location, 1);
        y.add_entity("Paris", EntityClass::Person, 1);
        let docs = [x, y];
        for class in [ObjectClass::EntityL, ObjectClass::EntityP] {
            let p = MetaPath::new(Source::Type2, PathKind::CommonObject(class)).unwrap();
            assert_eq!(build_count_matrix(&docs, &p).unwrap().get(0, 1), 0);
        }
    }

    #[test]
    fn wrong_side_is_rejected() {
        let p = MetaPath::new(Source::Type2, PathKind::CommonObject(ObjectClass::Word)).unwrap();
        assert!(build_count_matrix(&[doc("x", &[])], &p).is_err());
        assert!(MetaPath::new(Source::Type2, PathKind::Retweet).is_err());
        assert!(MetaPath::new(Source::Type2, PathKind::CommonObject(ObjectClass::Hashtag)).is_err());
    }

    #[test]
    fn default_path_counts() {
        assert_eq!(MetaPath::defaults_type1(false).len(), 6);
        assert_eq!(MetaPath::defaults_type1(true).len(), 7);
        assert_eq!(MetaPath::defaults_type2().len(), 4);
    }

    #[test]
    fn triplet_csv() {
        let docs = [doc("x", &[("a", 1)]), doc("y", &[("a", 2)])];
        let a = build_count_matrix(&docs, &word_path()).unwrap();
        let mut buf = Vec::new();
        a.write_triplet_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row,col,count\n0,0,1\n0,1,2\n1,0,2\n1,1,4\n"
        );
    }
}
