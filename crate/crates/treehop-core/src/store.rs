//! In-memory vector store with exact cosine top-k search and a small binary
//! on-disk format.
//!
//! Binary layout (all integers little-endian, values stored as `f32`):
//!
//! ```text
//! bytes 0..4    magic "THS1"
//! bytes 4..8    u32 embedding dimension
//! bytes 8..16   u64 record count
//! per record:   u32 id byte length, id bytes (UTF-8), dim * f32 values
//! ```
//!
//! Titles and texts are not part of the binary file; when present they go to
//! a JSONL sidecar named `<file>.meta.jsonl` next to it, keyed by chunk id.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binio::Offsets;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{dot, dot_many};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"THS1";
const MAX_ID_BYTES: u32 = 1 << 20;

/// One stored chunk: stable id, optional display metadata, embedding.
#[derive(Clone, Debug)]
pub struct ChunkRecord<F: Scalar> {
    pub id: String,
    pub title: Option<String>,
    pub text: Option<String>,
    pub embedding: Embedding<F>,
}

/// A search hit: chunk id plus its cosine score against the query.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredHit<F: Scalar> {
    pub chunk_id: String,
    pub score: F,
}

/// Append-only collection of embeddings with exact top-k retrieval.
///
/// Iteration order is insertion order; retrieval order depends only on
/// scores and ids, never on insertion order.
#[derive(Clone, Debug)]
pub struct VectorStore<F: Scalar> {
    dim: usize,
    records: Vec<ChunkRecord<F>>,
    norms: Vec<F>,
    index: HashMap<String, usize>,
}

/// Cosine similarity between two embeddings of equal dimension.
pub fn cosine_similarity<F: Scalar>(a: &Embedding<F>, b: &Embedding<F>) -> Result<F> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == F::zero() || nb == F::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(dot(a.as_slice(), b.as_slice()) / (na * nb))
}

/// Best-first candidate list capped at k, ordered by score descending with
/// ascending chunk id as the tie-break.
struct TopSelector<F: Scalar> {
    k: usize,
    entries: Vec<(F, usize)>,
}

impl<F: Scalar> TopSelector<F> {
    fn new(k: usize) -> Self {
        TopSelector { k, entries: Vec::with_capacity(k.min(1024) + 1) }
    }

    fn rank(a: &(F, usize), b: &(F, usize), records: &[ChunkRecord<F>]) -> std::cmp::Ordering {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then_with(|| records[a.1].id.cmp(&records[b.1].id))
    }

    fn offer(&mut self, score: F, rec_idx: usize, records: &[ChunkRecord<F>]) {
        if self.k == 0 {
            return;
        }
        let cand = (score, rec_idx);
        if self.entries.len() == self.k {
            let last = self.entries.last().unwrap();
            if Self::rank(&cand, last, records) != std::cmp::Ordering::Less {
                return;
            }
        }
        let pos = self
            .entries
            .binary_search_by(|e| Self::rank(e, &cand, records))
            .unwrap_or_else(|p| p);
        self.entries.insert(pos, cand);
        self.entries.truncate(self.k);
    }

    fn into_hits(self, records: &[ChunkRecord<F>]) -> Vec<ScoredHit<F>> {
        self.entries
            .into_iter()
            .map(|(score, idx)| ScoredHit { chunk_id: records[idx].id.clone(), score })
            .collect()
    }
}

impl<F: Scalar> VectorStore<F> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(VectorStore { dim, records: Vec::new(), norms: Vec::new(), index: HashMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, record: ChunkRecord<F>) -> Result<()> {
        if record.embedding.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: record.embedding.dim() });
        }
        if self.index.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        let n = record.embedding.norm();
        if n == F::zero() {
            return Err(Error::ZeroNorm);
        }
        self.index.insert(record.id.clone(), self.records.len());
        self.norms.push(n);
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ChunkRecord<F>> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn id_at(&self, idx: usize) -> &str {
        &self.records[idx].id
    }

    /// Records in insertion order.
    pub fn records(&self) -> impl Iterator<Item = &ChunkRecord<F>> {
        self.records.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChunkRecord<F>> {
        self.records.iter()
    }

    /// Exact top-k by cosine score for a single query.
    pub fn top_k(&self, query: &Embedding<F>, k: usize) -> Result<Vec<ScoredHit<F>>> {
        Ok(self.top_k_many(&[query], k)?.pop().unwrap())
    }

    /// Exact top-k for several queries in one pass over the store.
    ///
    /// Scores are bitwise identical to per-query [`VectorStore::top_k`]
    /// calls; the batch form only amortizes the scan.
    pub fn top_k_many(&self, queries: &[&Embedding<F>], k: usize) -> Result<Vec<Vec<ScoredHit<F>>>> {
        if self.records.is_empty() {
            return Err(Error::EmptyStore);
        }
        let mut slices: Vec<&[F]> = Vec::with_capacity(queries.len());
        let mut qnorms: Vec<F> = Vec::with_capacity(queries.len());
        for q in queries {
            if q.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: q.dim() });
            }
            let n = q.norm();
            if n == F::zero() {
                return Err(Error::ZeroNorm);
            }
            slices.push(q.as_slice());
            qnorms.push(n);
        }
        let mut selectors: Vec<TopSelector<F>> =
            (0..queries.len()).map(|_| TopSelector::new(k)).collect();
        let mut scores = vec![F::zero(); queries.len()];
        for (ri, rec) in self.records.iter().enumerate() {
            dot_many(rec.embedding.as_slice(), &slices, &mut scores);
            let rn = self.norms[ri];
            for (j, sel) in selectors.iter_mut().enumerate() {
                sel.offer(scores[j] / (qnorms[j] * rn), ri, &self.records);
            }
        }
        Ok(selectors.into_iter().map(|s| s.into_hits(&self.records)).collect())
    }

    /// Re-insert every record at a different scalar precision. Norms are
    /// recomputed in the target precision.
    pub fn convert<G: Scalar>(&self) -> VectorStore<G> {
        let mut out = VectorStore::<G>::new(self.dim).expect("dim already validated");
        for rec in &self.records {
            out.insert(ChunkRecord {
                id: rec.id.clone(),
                title: rec.title.clone(),
                text: rec.text.clone(),
                embedding: rec.embedding.convert(),
            })
            .expect("records already validated");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.records.len() as u64).to_le_bytes())?;
        for rec in &self.records {
            let id_bytes = rec.id.as_bytes();
            w.write_all(&(id_bytes.len() as u32).to_le_bytes())?;
            w.write_all(id_bytes)?;
            for v in rec.embedding.as_slice() {
                w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
            }
        }
        w.flush()?;

        if self.records.iter().any(|r| r.title.is_some() || r.text.is_some()) {
            let mut mw = BufWriter::new(File::create(sidecar_path(path))?);
            for rec in &self.records {
                let line = MetaLine {
                    id: rec.id.clone(),
                    title: rec.title.clone(),
                    text: rec.text.clone(),
                };
                serde_json::to_writer(&mut mw, &line)
                    .map_err(|e| Error::Numeric(format!("metadata serialization: {e}")))?;
                mw.write_all(b"\n")?;
            }
            mw.flush()?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let label = path.display().to_string();
        let mut r = Offsets::new(BufReader::new(File::open(path)?));

        let mut magic = [0u8; 4];
        r.read_exact_at(&mut magic, &label, "magic")?;
        if &magic != MAGIC {
            return Err(Error::format(&label, 0, format!("bad magic {magic:?}, expected {MAGIC:?}")));
        }
        let dim = r.read_u32(&label, "dimension")? as usize;
        if dim == 0 {
            return Err(Error::format(&label, 4, "dimension must be at least 1"));
        }
        let count = r.read_u64(&label, "record count")?;

        let mut store = VectorStore::new(dim)?;
        let mut value_buf = vec![0u8; dim * 4];
        for _ in 0..count {
            let id_start = r.offset;
            let id_len = r.read_u32(&label, "id length")?;
            if id_len > MAX_ID_BYTES {
                return Err(Error::format(&label, id_start, format!("id length {id_len} too large")));
            }
            let mut id_buf = vec![0u8; id_len as usize];
            r.read_exact_at(&mut id_buf, &label, "id bytes")?;
            let id = String::from_utf8(id_buf)
                .map_err(|_| Error::format(&label, id_start + 4, "id is not valid UTF-8"))?;
            let values_start = r.offset;
            r.read_exact_at(&mut value_buf, &label, "embedding values")?;
            let values: Vec<F> = value_buf
                .chunks_exact(4)
                .map(|c| F::of_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
                .collect();
            let embedding = Embedding::new(values)
                .map_err(|e| Error::format(&label, values_start, e.to_string()))?;
            store
                .insert(ChunkRecord { id, title: None, text: None, embedding })
                .map_err(|e| Error::format(&label, id_start, e.to_string()))?;
        }
        r.expect_eof(&label)?;

        let meta = sidecar_path(path);
        if meta.exists() {
            store.load_sidecar(&meta)?;
        }
        Ok(store)
    }

    fn load_sidecar(&mut self, path: &Path) -> Result<()> {
        let label = path.display().to_string();
        let reader = BufReader::new(File::open(path)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let meta: MetaLine = serde_json::from_str(&line)
                .map_err(|e| Error::parse(&label, lineno + 1, e.to_string()))?;
            let idx = *self
                .index
                .get(&meta.id)
                .ok_or_else(|| Error::parse(&label, lineno + 1, format!("unknown chunk id {:?}", meta.id)))?;
            self.records[idx].title = meta.title;
            self.records[idx].text = meta.text;
        }
        Ok(())
    }

    /// Build a store from JSONL lines `{"id", "title"?, "text"?, "embedding"}`.
    ///
    /// `expected_dim = None` locks the dimension to the first record. With
    /// `normalize` set, embeddings are unit-normalized on the way in (cosine
    /// ranking is unchanged; stored vectors become unit length).
    pub fn ingest_jsonl<R: BufRead>(
        reader: R,
        source_label: &str,
        expected_dim: Option<usize>,
        normalize: bool,
    ) -> Result<Self> {
        let mut store: Option<VectorStore<F>> = match expected_dim {
            Some(d) => Some(VectorStore::new(d)?),
            None => None,
        };
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawChunkLine = serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
            let mut embedding = Embedding::<F>::from_f64(&raw.embedding)
                .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
            if normalize {
                embedding = embedding
                    .normalized()
                    .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
            }
            let store = match &mut store {
                Some(s) => s,
                None => {
                    store = Some(VectorStore::new(embedding.dim())
                        .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?);
                    store.as_mut().unwrap()
                }
            };
            store
                .insert(ChunkRecord { id: raw.id, title: raw.title, text: raw.text, embedding })
                .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
        }
        store.ok_or_else(|| Error::parse(source_label, 0, "no records in input"))
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.jsonl");
    path.with_file_name(name)
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawChunkLine {
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    text: Option<String>,
    embedding: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn emb(values: &[f64]) -> Embedding<f64> {
        Embedding::new(values.to_vec()).unwrap()
    }

    fn rec(id: &str, values: &[f64]) -> ChunkRecord<f64> {
        ChunkRecord { id: id.into(), title: None, text: None, embedding: emb(values) }
    }

    #[test]
    fn cosine_known_value() {
        let got = cosine_similarity(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((got - 0.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn cosine_scale_invariant() {
        let a = emb(&[0.3, -1.2, 0.7]);
        let b = emb(&[-0.5, 0.4, 2.0]);
        let a10 = emb(&[3.0, -12.0, 7.0]);
        let s1 = cosine_similarity(&a, &b).unwrap();
        let s2 = cosine_similarity(&a10, &b).unwrap();
        assert!((s1 - s2).abs() < 1e-6);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn insert_errors() {
        let mut s = VectorStore::<f64>::new(2).unwrap();
        s.insert(rec("a", &[1.0, 0.0])).unwrap();
        assert!(matches!(s.insert(rec("a", &[0.0, 1.0])), Err(Error::DuplicateId(_))));
        assert!(matches!(
            s.insert(rec("b", &[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(s.insert(rec("c", &[0.0, 0.0])), Err(Error::ZeroNorm)));
        assert!(matches!(VectorStore::<f64>::new(0), Err(Error::InvalidDimension)));
    }

    #[test]
    fn top_k_empty_store_errors() {
        let s = VectorStore::<f64>::new(2).unwrap();
        assert!(matches!(s.top_k(&emb(&[1.0, 0.0]), 3), Err(Error::EmptyStore)));
    }

    #[test]
    fn top_k_orders_by_score_then_id() {
        let mut s = VectorStore::<f64>::new(2).unwrap();
        // "b" and "a" share an embedding; the tie must resolve to "a" first
        // regardless of insertion order.
        s.insert(rec("b", &[1.0, 0.0])).unwrap();
        s.insert(rec("a", &[1.0, 0.0])).unwrap();
        s.insert(rec("c", &[0.0, 1.0])).unwrap();
        let hits = s.top_k(&emb(&[1.0, 0.1]), 3).unwrap();
        let ids: Vec<&str> = hits.iter().map(|h| h.chunk_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(hits[0].score >= hits[1].score && hits[1].score >= hits[2].score);
    }

    #[test]
    fn top_k_len_is_min_k_store_size() {
        let mut s = VectorStore::<f64>::new(2).unwrap();
        s.insert(rec("a", &[1.0, 0.0])).unwrap();
        s.insert(rec("b", &[0.0, 1.0])).unwrap();
        assert_eq!(s.top_k(&emb(&[1.0, 1.0]), 10).unwrap().len(), 2);
        assert_eq!(s.top_k(&emb(&[1.0, 1.0]), 1).unwrap().len(), 1);
    }

    #[test]
    fn top_k_many_matches_top_k_bitwise() {
        let mut s = VectorStore::<f32>::new(3).unwrap();
        let vals = [
            [0.3, 0.7, -0.2],
            [-0.9, 0.1, 0.4],
            [0.5, 0.5, 0.5],
            [0.01, -0.99, 0.3],
            [1.0, 2.0, 3.0],
        ];
        for (i, v) in vals.iter().enumerate() {
            let e = Embedding::<f32>::from_f64(v).unwrap();
            s.insert(ChunkRecord { id: format!("c{i}"), title: None, text: None, embedding: e })
                .unwrap();
        }
        let q1 = Embedding::<f32>::from_f64(&[0.2, -0.4, 0.9]).unwrap();
        let q2 = Embedding::<f32>::from_f64(&[-1.0, 0.3, 0.1]).unwrap();
        let batch = s.top_k_many(&[&q1, &q2], 3).unwrap();
        for (q, got) in [(&q1, &batch[0]), (&q2, &batch[1])] {
            let solo = s.top_k(q, 3).unwrap();
            assert_eq!(solo.len(), got.len());
            for (a, b) in solo.iter().zip(got.iter()) {
                assert_eq!(a.chunk_id, b.chunk_id);
                assert_eq!(a.score.to_bits(), b.score.to_bits());
            }
        }
    }

    #[test]
    fn save_load_roundtrip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let mut s = VectorStore::<f32>::new(3).unwrap();
        for i in 0..20 {
            let v = [i as f64 * 0.37 - 2.0, (i * i) as f64 * 0.011, -(i as f64) * 1.5 + 0.25];
            let e = Embedding::<f32>::from_f64(&v).unwrap();
            s.insert(ChunkRecord {
                id: format!("chunk-{i:03}"),
                title: if i % 2 == 0 { Some(format!("title {i}")) } else { None },
                text: Some(format!("body {i}")),
                embedding: e,
            })
            .unwrap();
        }
        s.save(&path).unwrap();
        let loaded = VectorStore::<f32>::load(&path).unwrap();
        assert_eq!(loaded.len(), s.len());
        assert_eq!(loaded.dim(), s.dim());
        for (a, b) in s.iter().zip(loaded.iter()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.title, b.title);
            assert_eq!(a.text, b.text);
            for (x, y) in a.embedding.as_slice().iter().zip(b.embedding.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn load_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();

        let bad = dir.path().join("bad.bin");
        std::fs::write(&bad, b"NOPE\x02\x00\x00\x00").unwrap();
        match VectorStore::<f32>::load(&bad) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }

        let path = dir.path().join("trunc.bin");
        let mut s = VectorStore::<f32>::new(2).unwrap();
        let e = Embedding::<f32>::from_f64(&[1.0, 2.0]).unwrap();
        s.insert(ChunkRecord { id: "x".into(), title: None, text: None, embedding: e }).unwrap();
        s.save(&path).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 3]).unwrap();
        match VectorStore::<f32>::load(&path) {
            Err(Error::Format { offset, msg, .. }) => {
                assert!(offset > 0, "offset should point into the record, got {offset}");
                assert!(msg.contains("end of file"), "msg: {msg}");
            }
            other => panic!("expected format error, got {other:?}"),
        }

        // Dimension in the header larger than the payload supports.
        let path2 = dir.path().join("dim.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"THS1");
        bytes.extend_from_slice(&100u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(b"x");
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path2, &bytes).unwrap();
        assert!(matches!(VectorStore::<f32>::load(&path2), Err(Error::Format { .. })));
    }

    #[test]
    fn ingest_jsonl_happy_path_and_line_errors() {
        let good = concat!(
            "{\"id\":\"a\",\"title\":\"t\",\"embedding\":[3.0,4.0]}\n",
            "\n",
            "{\"id\":\"b\",\"embedding\":[1.0,0.0]}\n",
        );
        let s = VectorStore::<f64>::ingest_jsonl(Cursor::new(good), "mem", None, true).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.get("a").unwrap().embedding.as_slice(), &[0.6, 0.8]);
        assert_eq!(s.get("a").unwrap().title.as_deref(), Some("t"));

        let bad_json = "{\"id\":\"a\",\"embedding\":[1.0]}\nnot json\n";
        match VectorStore::<f64>::ingest_jsonl(Cursor::new(bad_json), "mem", None, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let dup = "{\"id\":\"a\",\"embedding\":[1.0]}\n{\"id\":\"a\",\"embedding\":[2.0]}\n";
        match VectorStore::<f64>::ingest_jsonl(Cursor::new(dup), "mem", None, false) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("duplicate"), "msg: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let wrong_dim = "{\"id\":\"a\",\"embedding\":[1.0,2.0]}\n";
        assert!(matches!(
            VectorStore::<f64>::ingest_jsonl(Cursor::new(wrong_dim), "mem", Some(3), false),
            Err(Error::Parse { line: 1, .. })
        ));

        let zero = "{\"id\":\"a\",\"embedding\":[0.0,0.0]}\n";
        assert!(matches!(
            VectorStore::<f64>::ingest_jsonl(Cursor::new(zero), "mem", None, true),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
