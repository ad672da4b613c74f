//! Document data model: bag-of-words counts, categorical Q&A records and
//! precomputed document embeddings, plus the index that aligns them.
//!
//! Parsing lives in the CLI crate; everything here validates in-memory
//! records and is immutable once built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Sparse word counts of one document, sorted by word index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowDoc {
    pub doc_id: String,
    pub counts: Vec<(usize, u64)>,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowDataset {
    vocab: Vec<String>,
    docs: Vec<BowDoc>,
}

impl BowDataset {
    /// Builds a dataset from `(doc_id, [(word, count)])` records.
    ///
    /// Zero counts are dropped, repeated word entries are summed.
    pub fn new(vocab: Vec<String>, docs: Vec<(String, Vec<(usize, u64)>)>) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Empty("vocabulary"));
        }
        let v = vocab.len();
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(docs.len());
        for (doc_id, raw) in docs {
            if !seen.insert(doc_id.clone()) {
                return Err(Error::DuplicateId(doc_id));
            }
            let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
            for (w, c) in raw {
                if w >= v {
                    return Err(Error::Value(format!(
                        "word index {w} out of range for vocabulary of {v} in `{doc_id}`"
                    )));
                }
                if c > 0 {
                    *merged.entry(w).or_insert(0) += c;
                }
            }
            let total: u64 = merged.values().sum();
            if total == 0 {
                return Err(Error::EmptyDocument(doc_id));
            }
            out.push(BowDoc {
                doc_id,
                counts: merged.into_iter().collect(),
                total,
            });
        }
        Ok(Self { vocab, docs: out })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn docs(&self) -> &[BowDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().map(|d| d.doc_id.as_str())
    }

    /// Re-orders (and filters) documents to follow `index`.
    pub fn select(&self, index: &DocIndex) -> Result<Self> {
        let by_id: BTreeMap<&str, &BowDoc> =
            self.docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
        let docs = index
            .ids()
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|d| (*d).clone())
                    .ok_or_else(|| Error::Alignment(format!("`{id}` missing from bag-of-words")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vocab: self.vocab.clone(),
            docs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    pub doc_id: String,
    /// Zero-based answer per question.
    pub answers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaDataset {
    num_questions: usize,
    num_answers: usize,
    records: Vec<QaRecord>,
}

impl QaDataset {
    /// Builds a dataset from zero-based answers.
    pub fn new(num_questions: usize, num_answers: usize, records: Vec<QaRecord>) -> Result<Self> {
        if num_questions == 0 {
            return Err(Error::Config("number of questions must be positive".into()));
        }
        if num_answers == 0 {
            return Err(Error::Config("number of answers must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.doc_id.as_str()) {
                return Err(Error::DuplicateId(r.doc_id.clone()));
            }
            if r.answers.len() != num_questions {
                return Err(Error::Arity {
                    doc_id: r.doc_id.clone(),
                    expected: num_questions,
                    got: r.answers.len(),
                });
            }
            if let Some((q, &a)) = r
                .answers
                .iter()
                .enumerate()
                .find(|(_, &a)| a >= num_answers)
            {
                return Err(Error::AnswerRange {
                    doc_id: r.doc_id.clone(),
                    question: q + 1,
                    answer: a as i64 + 1,
                    answers: num_answers,
                });
            }
        }
        Ok(Self {
            num_questions,
            num_answers,
            records,
        })
    }

    /// Builds a dataset from one-based answers as they appear in files.
    pub fn from_one_based(
        num_questions: usize,
        num_answers: usize,
        records: Vec<(String, Vec<i64>)>,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(records.len());
        for (doc_id, answers) in records {
            if answers.len() != num_questions {
                return Err(Error::Arity {
                    doc_id,
                    expected: num_questions,
                    got: answers.len(),
                });
            }
            let mut shifted = Vec::with_capacity(answers.len());
            for (q, &a) in answers.iter().enumerate() {
                if a < 1 || a > num_answers as i64 {
                    return Err(Error::AnswerRange {
                        doc_id,
                        question: q + 1,
                        answer: a,
                        answers: num_answers,
                    });
                }
                shifted.push((a - 1) as usize);
            }
            out.push(QaRecord {
                doc_id,
                answers: shifted,
            });
        }
        Self::new(num_questions, num_answers, out)
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_answers(&self) -> usize {
        self.num_answers
    }

    pub fn records(&self) -> &[QaRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.doc_id.as_str())
    }

    pub fn get(&self, doc_id: &str) -> Option<&QaRecord> {
        self.records.iter().find(|r| r.doc_id == doc_id)
    }

    pub fn select(&self, index: &DocIndex) -> Result<Self> {
        self.select_ids(index.ids())
    }

    /// Records for the listed ids, in the listed order.
    pub fn select_ids(&self, ids: &[String]) -> Result<Self> {
        let by_id: BTreeMap<&str, &QaRecord> = self
            .records
            .iter()
            .map(|r| (r.doc_id.as_str(), r))
            .collect();
        let records = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|r| (*r).clone())
                    .ok_or_else(|| Error::Alignment(format!("`{id}` missing from Q&A records")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            num_questions: self.num_questions,
            num_answers: self.num_answers,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = entries
            .first()
            .map(|(_, v)| v.len())
            .ok_or(Error::Empty("embeddings"))?;
        if dim == 0 {
            return Err(Error::Empty("embedding vector"));
        }
        let mut vectors = BTreeMap::new();
        for (id, v) in entries {
            if v.len() != dim {
                return Err(Error::Dimension {
                    context: "embedding vector",
                    expected: dim,
                    got: v.len(),
                });
            }
            if !crate::math::all_finite(&v) {
                return Err(Error::Value(format!(
                    "non-finite embedding entry for `{id}`"
                )));
            }
            if vectors.insert(id.clone(), v).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&[f64]> {
        self.vectors.get(doc_id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Stacks the vectors of `ids` into an `ids.len() × dim` matrix.
    pub fn matrix(&self, ids: &[String]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let v = self
                .get(id)
                .ok_or_else(|| Error::Alignment(format!("`{id}` missing from embeddings")))?;
            data.extend_from_slice(v);
        }
        Matrix::from_vec(ids.len(), self.dim, data)
    }
}

/// Bijection between document ids and contiguous indices `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocIndex {
    ids: Vec<String>,
}

impl DocIndex {
    /// Index over the given ids, sorted lexicographically.
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId(w[0].clone()));
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.ids.binary_search_by(|x| x.as_str().cmp(doc_id)).ok()
    }
}

/// Ids discarded by [`align`], per source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignReport {
    pub dropped_bow: Vec<String>,
    pub dropped_qa: Vec<String>,
    pub dropped_embeddings: Vec<String>,
}

impl AlignReport {
    pub fn is_clean(&self) -> bool {
        self.dropped_bow.is_empty()
            && self.dropped_qa.is_empty()
            && self.dropped_embeddings.is_empty()
    }
}

/// Intersects the document ids of every provided source.
pub fn align(
    bow: Option<&BowDataset>,
    qa: Option<&QaDataset>,
    emb: Option<&EmbeddingSet>,
) -> Result<(DocIndex, AlignReport)> {
    let sets: Vec<BTreeSet<&str>> = [
        bow.map(|b| b.ids().collect::<BTreeSet<_>>()),
        qa.map(|q| q.ids().collect()),
        emb.map(|e| e.ids().collect()),
    ]
    .into_iter()
    .flatten()
    .collect();
    let Some(first) = sets.first() else {
        return Err(Error::Alignment("no data source provided".into()));
    };
    let common: BTreeSet<&str> = first
        .iter()
        .copied()
        .filter(|id| sets.iter().all(|s| s.contains(id)))
        .collect();
    if common.is_empty() {
        return Err(Error::Alignment("sources share no document ids".into()));
    }
    let dropped = |ids: Option<BTreeSet<&str>>| -> Vec<String> {
        ids.map(|s| {
            s.into_iter()
                .filter(|id| !common.contains(id))
                .map(String::from)
                .collect()
        })
        .unwrap_or_default()
    };
    let report = AlignReport {
        dropped_bow: dropped(bow.map(|b| b.ids().collect())),
        dropped_qa: dropped(qa.map(|q| q.ids().collect())),
        dropped_embeddings: dropped(emb.map(|e| e.ids().collect())),
    };
    Ok((DocIndex::new(common)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn s(x: &str) -> String {
        x.to_string()
    }

    fn bow(ids: &[&str]) -> BowDataset {
        BowDataset::new(
            vec![s("a"), s("b")],
            ids.iter().map(|id| (s(id), vec![(0, 1)])).collect(),
        )
        .unwrap()
    }

    fn qa(ids: &[&str]) -> QaDataset {
        QaDataset::from_one_based(1, 2, ids.iter().map(|id| (s(id), vec![1])).collect()).unwrap()
    }

    #[test]
    fn bow_totals_and_zero_drop() {
        let b =
            BowDataset::new(vec![s("a"), s("b")], vec![(s("d1"), vec![(0, 2), (1, 0)])]).unwrap();
        assert_eq!(b.vocab_size(), 2);
        assert_eq!(b.len(), 1);
        assert_eq!(b.docs()[0].total, 2);
        assert_eq!(b.docs()[0].counts, vec![(0, 2)]);
    }

    #[test]
    fn bow_rejections() {
        let dup = BowDataset::new(
            vec![s("a")],
            vec![(s("d1"), vec![(0, 1)]), (s("d1"), vec![(0, 1)])],
        );
        assert_eq!(dup, Err(Error::DuplicateId(s("d1"))));
        let empty = BowDataset::new(vec![s("a")], vec![(s("d1"), vec![])]);
        assert_eq!(empty, Err(Error::EmptyDocument(s("d1"))));
        let zero = BowDataset::new(vec![s("a")], vec![(s("d1"), vec![(0, 0)])]);
        assert_eq!(zero, Err(Error::EmptyDocument(s("d1"))));
        assert!(BowDataset::new(vec![s("a")], vec![(s("d1"), vec![(1, 1)])]).is_err());
        assert!(BowDataset::new(vec![], vec![]).is_err());
    }

    #[test]
    fn qa_shift_and_errors() {
        let q = QaDataset::from_one_based(2, 4, vec![(s("d1"), vec![1, 4])]).unwrap();
        assert_eq!(q.records()[0].answers, vec![0, 3]);
        assert!(matches!(
            QaDataset::from_one_based(2, 4, vec![(s("d1"), vec![1, 2, 3])]),
            Err(Error::Arity { got: 3, .. })
        ));
        assert!(matches!(
            QaDataset::from_one_based(2, 4, vec![(s("d1"), vec![5, 1])]),
            Err(Error::AnswerRange { answer: 5, .. })
        ));
        assert!(matches!(
            QaDataset::from_one_based(1, 4, vec![(s("d1"), vec![0])]),
            Err(Error::AnswerRange { answer: 0, .. })
        ));
        assert!(matches!(
            QaDataset::from_one_based(1, 4, vec![(s("d"), vec![1]), (s("d"), vec![2])]),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn embeddings_validation() {
        let e = EmbeddingSet::new(vec![(s("a"), vec![0.0; 4]), (s("b"), vec![1.0; 4])]).unwrap();
        assert_eq!((e.dim(), e.len()), (4, 2));
        assert!(matches!(
            EmbeddingSet::new(vec![(s("a"), vec![0.0; 4]), (s("b"), vec![1.0; 5])]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            EmbeddingSet::new(vec![(s("a"), vec![f64::NAN])]),
            Err(Error::Value(_))
        ));
    }

    #[test]
    fn align_intersection() {
        let (idx, rep) = align(Some(&bow(&["d1", "d2"])), Some(&qa(&["d2", "d3"])), None).unwrap();
        assert_eq!(idx.ids(), &[s("d2")]);
        assert_eq!(rep.dropped_bow, vec![s("d1")]);
        assert_eq!(rep.dropped_qa, vec![s("d3")]);

        let (idx, rep) = align(Some(&bow(&["b", "a"])), Some(&qa(&["a", "b"])), None).unwrap();
        assert_eq!(idx.ids(), &[s("a"), s("b")]);
        assert!(rep.is_clean());

        assert!(matches!(
            align(Some(&bow(&["a"])), Some(&qa(&["b"])), None),
            Err(Error::Alignment(_))
        ));
        assert!(align(None, None, None).is_err());
    }

    #[test]
    fn align_is_order_insensitive_and_idempotent() {
        let b = bow(&["x", "y", "z"]);
        let q = qa(&["z", "y", "w"]);
        let (i1, _) = align(Some(&b), Some(&q), None).unwrap();
        let (i2, _) = align(
            Some(&b.select(&i1).unwrap()),
            Some(&q.select(&i1).unwrap()),
            None,
        )
        .unwrap();
        assert_eq!(i1, i2);
        for (k, id) in i1.ids().iter().enumerate() {
            assert_eq!(i1.position(id), Some(k));
            assert_eq!(i1.id(k), Some(id.as_str()));
        }
    }
}
