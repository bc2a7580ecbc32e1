//! Speaker embeddings, candidate samples, and corpora, with their on-disk forms.
//!
//! Embedding CSV: first line `# dim=<d>`, then `speaker_id,v1,...,vd` per row.
//! Corpus manifest: JSON lines of `{"sample_id": ..., "iteration": k}`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::ScreeningMetrics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub speaker_id: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn new(speaker_id: impl Into<String>, vector: Vec<f64>) -> Self {
        Embedding {
            speaker_id: speaker_id.into(),
            vector,
        }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// An ordered collection of embeddings sharing one dimension, ids unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    dim: usize,
    items: Vec<Embedding>,
}

impl EmbeddingSet {
    pub fn new(dim: usize, items: Vec<Embedding>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("embedding dimension must be positive"));
        }
        let mut seen = HashSet::with_capacity(items.len());
        for e in &items {
            if e.vector.len() != dim {
                return Err(Error::validation(format!(
                    "embedding {} has dimension {}, expected {dim}",
                    e.speaker_id,
                    e.vector.len()
                )));
            }
            if let Some(bad) = e.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "embedding {} has non-finite component {bad}",
                    e.speaker_id
                )));
            }
            if !seen.insert(e.speaker_id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate speaker id {}",
                    e.speaker_id
                )));
            }
        }
        Ok(EmbeddingSet { dim, items })
    }

    /// Build from bare vectors with ids `<prefix><index>`.
    pub fn from_vectors(prefix: &str, dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let items = vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| Embedding::new(format!("{prefix}{i}"), v))
            .collect();
        Self::new(dim, items)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Embedding] {
        &self.items
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.items.iter().map(|e| e.vector.clone()).collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# dim={}\n", self.dim);
        for e in &self.items {
            out.push_str(&e.speaker_id);
            for v in &e.vector {
                // `{}` on f64 prints the shortest string that parses back exactly.
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `# dim=<d>` header".into()))?;
        let dim: usize = header
            .trim()
            .strip_prefix("# dim=")
            .and_then(|d| d.trim().parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| parse_err(1, format!("bad header {header:?}, expected `# dim=<d>`")))?;

        let mut items = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(parse_err(lineno, "empty speaker id".into()));
            }
            let vector = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(lineno, format!("non-numeric value {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.len() != dim {
                return Err(parse_err(
                    lineno,
                    format!("row has {} values, header declares dim={dim}", vector.len()),
                ));
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::validation(format!(
                    "duplicate speaker id {id} at {origin}:{lineno}"
                )));
            }
            items.push(Embedding::new(id, vector));
        }
        Ok(EmbeddingSet { dim, items })
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingSet::parse_csv(&text, &path.display().to_string())
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    std::fs::write(path, set.to_csv_string()).map_err(|e| Error::io(path, e))
}

/// One candidate training sample: a video-level utterance group with its
/// speaker embedding and pre-screening measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSample {
    pub sample_id: String,
    pub source_id: String,
    pub speaker_embedding: Embedding,
    pub duration_sec: f64,
    pub screening: ScreeningMetrics,
}

pub fn check_sample_pool(pool: &[DataSample]) -> Result<()> {
    let mut seen = HashSet::with_capacity(pool.len());
    let dim = pool.first().map(|s| s.speaker_embedding.dim());
    for s in pool {
        if !seen.insert(s.sample_id.as_str()) {
            return Err(Error::validation(format!("duplicate sample id {}", s.sample_id)));
        }
        if !(s.duration_sec >= 0.0) {
            return Err(Error::validation(format!(
                "sample {} has negative duration",
                s.sample_id
            )));
        }
        if Some(s.speaker_embedding.dim()) != dim {
            return Err(Error::validation(format!(
                "sample {} embedding dimension differs from the pool",
                s.sample_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub sample_id: String,
    pub iteration: u32,
}

/// A selected training set with the iteration at which each sample joined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn empty(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn new(name: impl Into<String>, entries: Vec<CorpusEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut last = 1;
        for e in &entries {
            if e.iteration < 1 {
                return Err(Error::validation(format!(
                    "corpus entry {} has iteration 0",
                    e.sample_id
                )));
            }
            if e.iteration < last {
                return Err(Error::validation(format!(
                    "corpus entry {} has iteration {} after iteration {last}",
                    e.sample_id, e.iteration
                )));
            }
            last = e.iteration;
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate corpus entry {}",
                    e.sample_id
                )));
            }
        }
        Ok(Corpus {
            name: name.into(),
            entries,
        })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.sample_id.as_str())
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.entries.iter().any(|e| e.sample_id == sample_id)
    }

    pub fn last_iteration(&self) -> Option<u32> {
        self.entries.last().map(|e| e.iteration)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("corpus entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_manifest(name: &str, text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<CorpusEntry>(l).map_err(|e| Error::Parse {
                    path: name.to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(name, entries)
    }
}

/// Append `additions` to `base`, tagged with iteration `k`.
pub fn corpus_merge(base: &Corpus, additions: &[String], k: u32) -> Result<Corpus> {
    if k < 1 {
        return Err(Error::validation("iteration index must be >= 1"));
    }
    if let Some(last) = base.last_iteration() {
        if k < last {
            return Err(Error::validation(format!(
                "cannot add iteration {k} after iteration {last}"
            )));
        }
    }
    let existing: HashSet<&str> = base.sample_ids().collect();
    let mut fresh = HashSet::with_capacity(additions.len());
    let mut offenders: Vec<&str> = Vec::new();
    for id in additions {
        if existing.contains(id.as_str()) || !fresh.insert(id.as_str()) {
            offenders.push(id);
        }
    }
    if !offenders.is_empty() {
        return Err(Error::validation(format!(
            "duplicate sample ids in merge: {}",
            offenders.join(", ")
        )));
    }
    let mut entries = base.entries.clone();
    entries.extend(additions.iter().map(|id| CorpusEntry {
        sample_id: id.clone(),
        iteration: k,
    }));
    Ok(Corpus {
        name: base.name.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(ids: &[&str]) -> Corpus {
        Corpus::new(
            "c",
            ids.iter()
                .map(|s| CorpusEntry {
                    sample_id: s.to_string(),
                    iteration: 1,
                })
                .collect(),
        )
        .unwrap()
    }

    fn strings(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_minimal_file() {
        let set = EmbeddingSet::parse_csv("# dim=2\ns1,1.0,0.0\ns2,0.0,1.0\n", "t").unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.len(), 2);
        assert_eq!(set.items()[1].speaker_id, "s2");
    }

    #[test]
    fn header_only_file_is_empty_set() {
        let set = EmbeddingSet::parse_csv("# dim=5\n", "t").unwrap();
        assert_eq!(set.dim(), 5);
        assert!(set.is_empty());
    }

    #[test]
    fn arity_mismatch_names_line() {
        let err = EmbeddingSet::parse_csv("# dim=2\ns0,1.0,2.0\ns1,1.0\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn non_numeric_and_duplicates_rejected() {
        let err = EmbeddingSet::parse_csv("# dim=1\na,x\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = EmbeddingSet::parse_csv("# dim=1\na,1\na,2\n", "t").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = EmbeddingSet::parse_csv("dim=1\na,1\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let set = EmbeddingSet::from_vectors("s", 3, vec![vec![0.1, -2.5e-12, 3.0]; 1]).unwrap();
        save_embeddings(&set, &path).unwrap();
        assert_eq!(load_embeddings(&path).unwrap(), set);
    }

    #[test]
    fn merge_tags_new_entries() {
        let base = corpus(&["a", "b", "c"]);
        let merged = corpus_merge(&base, &strings(&["d", "e"]), 2).unwrap();
        assert_eq!(merged.len(), 5);
        assert_eq!(&merged.entries()[..3], base.entries());
        assert!(merged.entries()[3..].iter().all(|e| e.iteration == 2));
    }

    #[test]
    fn merge_empty_is_identity() {
        let base = corpus(&["a", "b"]);
        assert_eq!(corpus_merge(&base, &[], 2).unwrap(), base);
    }

    #[test]
    fn merge_rejects_duplicates() {
        let base = corpus(&["a"]);
        let err = corpus_merge(&base, &strings(&["a"]), 2).unwrap_err();
        assert!(err.to_string().contains('a'));
        assert!(corpus_merge(&base, &strings(&["x", "x"]), 2).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let c = corpus_merge(&corpus(&["a", "b"]), &strings(&["z"]), 3).unwrap();
        let text = c.to_manifest();
        assert!(text.starts_with("{\"sample_id\":\"a\",\"iteration\":1}"));
        assert_eq!(Corpus::parse_manifest("c", &text).unwrap(), c);
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 0..20)) {
            let set = EmbeddingSet::from_vectors("spk", 4, rows).unwrap();
            let back = EmbeddingSet::parse_csv(&set.to_csv_string(), "p").unwrap();
            prop_assert_eq!(back, set);
        }

        #[test]
        fn merge_is_associative(n1 in 0usize..6, n2 in 0usize..6) {
            let base = corpus(&["root"]);
            let a: Vec<String> = (0..n1).map(|i| format!("a{i}")).collect();
            let b: Vec<String> = (0..n2).map(|i| format!("b{i}")).collect();
            let stepwise = corpus_merge(&corpus_merge(&base, &a, 2).unwrap(), &b, 2).unwrap();
            let joined: Vec<String> = a.iter().chain(&b).cloned().collect();
            let at_once = corpus_merge(&base, &joined, 2).unwrap();
            prop_assert_eq!(&stepwise, &at_once);
            prop_assert!(stepwise.len() >= base.len());
        }
    }
}
