//! Training-data preparation: decomposition records, curation, hop-level
//! pair construction, and a synthetic multi-hop corpus generator.
//!
//! A decomposition record describes one multi-hop question at the
//! embedding level: the full question embedding, the ordered gold chunk
//! per hop, and the gold sub-query embedding per hop. Records typically
//! come from an upstream decomposition pipeline; the synthetic generator
//! here produces them with known geometry so retrieval quality can be
//! measured without any external model.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::scalar::Scalar;
use crate::seeding::{derive, SALT_NEGATIVES};
use crate::store::VectorStore;
use crate::training::{sample_negatives, TrainConfig, TrainExample};

/// Question categories. Only multi-hop categories whose hops form a chain
/// of retrievable facts are usable for hop-level training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Inference,
    Compositional,
    BridgeComparison,
    Comparison,
    Other,
}

impl QuestionType {
    /// Comparison questions weigh two facts against each other; their hops
    /// are independent lookups, not a chain, so they are excluded.
    pub fn trainable(self) -> bool {
        matches!(
            self,
            QuestionType::Inference | QuestionType::Compositional | QuestionType::BridgeComparison
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HopStep {
    pub sub_query: String,
    pub gold_chunk_id: String,
}

/// One multi-hop question, decomposed per hop, with embeddings attached.
///
/// `hop_context_embs[r]` is the embedding of the gold sub-query for hop
/// `r+1`; it aligns 1:1 with `hops`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub question_id: String,
    pub question_type: QuestionType,
    pub hops: Vec<HopStep>,
    pub query_emb: Vec<f64>,
    pub hop_context_embs: Vec<Vec<f64>>,
}

impl DecompositionRecord {
    pub fn integrity_ok(&self) -> bool {
        self.hops.len() >= 2
            && self.hop_context_embs.len() == self.hops.len()
            && !self.query_emb.is_empty()
            && self
                .hop_context_embs
                .iter()
                .all(|e| e.len() == self.query_emb.len())
    }
}

/// Counts of what curation kept and why it dropped the rest.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CurationReport {
    pub kept: usize,
    /// Reason -> count; reasons are "question_type", "integrity",
    /// "unresolvable_chunk".
    pub dropped: BTreeMap<String, usize>,
}

/// Filter decomposition records down to trainable, internally consistent
/// ones. When `known_ids` is given, records whose gold chunks are not all
/// resolvable against it are dropped too. Curation is idempotent.
pub fn curate(
    records: Vec<DecompositionRecord>,
    known_ids: Option<&HashSet<String>>,
) -> (Vec<DecompositionRecord>, CurationReport) {
    let mut kept = Vec::with_capacity(records.len());
    let mut report = CurationReport::default();
    for rec in records {
        if !rec.question_type.trainable() {
            *report.dropped.entry("question_type".into()).or_insert(0) += 1;
            continue;
        }
        if !rec.integrity_ok() {
            *report.dropped.entry("integrity".into()).or_insert(0) += 1;
            continue;
        }
        if let Some(ids) = known_ids {
            if rec.hops.iter().any(|h| !ids.contains(&h.gold_chunk_id)) {
                *report.dropped.entry("unresolvable_chunk".into()).or_insert(0) += 1;
                continue;
            }
        }
        kept.push(rec);
    }
    report.kept = kept.len();
    (kept, report)
}

/// Expand records into hop-level training examples.
///
/// Hop `r` (1-based) of a record becomes one example: the query is the
/// question embedding for `r = 1` and the gold sub-query embedding of hop
/// `r` otherwise; the context is the stored embedding of hop `r`'s gold
/// chunk; the positive is hop `r+1`'s gold chunk. Negatives are sampled
/// uniformly, excluding the positive and the context chunk.
pub fn build_train_examples<F: Scalar>(
    records: &[DecompositionRecord],
    store: &VectorStore<F>,
    cfg: &TrainConfig,
) -> Result<Vec<TrainExample<F>>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (rec_idx, rec) in records.iter().enumerate() {
        if !rec.integrity_ok() {
            return Err(Error::Data(format!(
                "record {:?}: hops and hop_context_embs are inconsistent",
                rec.question_id
            )));
        }
        for r in 1..rec.hops.len() {
            let query_f64: &[f64] =
                if r == 1 { &rec.query_emb } else { &rec.hop_context_embs[r - 1] };
            let context_id = &rec.hops[r - 1].gold_chunk_id;
            let positive_id = &rec.hops[r].gold_chunk_id;
            let context = store
                .get(context_id)
                .ok_or_else(|| Error::UnknownId(context_id.clone()))?;
            if !store.contains(positive_id) {
                return Err(Error::UnknownId(positive_id.clone()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive(
                cfg.seed,
                SALT_NEGATIVES,
                rec_idx as u64,
                r as u64,
            ));
            let negative_ids = sample_negatives(
                store,
                &[positive_id.as_str(), context_id.as_str()],
                cfg.num_negatives,
                &mut rng,
            )?;
            out.push(TrainExample {
                query_emb: Embedding::from_f64(query_f64)?,
                context_emb: context.embedding.clone(),
                positive_id: positive_id.clone(),
                negative_ids,
            });
        }
    }
    Ok(out)
}

/// Geometry of the synthetic corpus.
///
/// Facts are triples over random unit entity/relation vectors. Chain `i`
/// links entities `(a, b, c)` through two distinct relations: chunk 1
/// encodes `a -r1-> b`, chunk 2 encodes `b -r2-> c`, and the question
/// embedding is `unit(a + r1 + r2 + noise)`: it names the start entity and
/// both relations but not the bridge entity `b`, which only hop 1 can
/// reveal. Distractor chunks encode random unrelated triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_chains: usize,
    pub num_distractors: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 64,
            num_entities: 1600,
            num_relations: 200,
            num_chains: 500,
            num_distractors: 4500,
            noise_sigma: 0.05,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if self.num_chains == 0 {
            return Err(Error::Config("num_chains must be at least 1".into()));
        }
        if self.num_entities < 3 * self.num_chains {
            return Err(Error::Config(format!(
                "need at least 3 entities per chain: {} chains require {}, got {}",
                self.num_chains,
                3 * self.num_chains,
                self.num_entities
            )));
        }
        if self.num_relations < 2 {
            return Err(Error::Config("num_relations must be at least 2".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::Config("noise_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// A corpus chunk in the ingest JSONL schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthChunk {
    pub id: String,
    pub title: String,
    pub text: String,
    pub embedding: Vec<f64>,
}

/// An evaluation query: embedding plus the gold chunk ids it should fetch.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawEvalQuery {
    pub question_id: String,
    pub query_emb: Vec<f64>,
    pub gold_ids: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub chunks: Vec<SynthChunk>,
    pub records: Vec<DecompositionRecord>,
    pub queries: Vec<RawEvalQuery>,
}

fn unit_normal(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn noisy_unit_sum(parts: &[&[f64]], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = parts[0].len();
    let mut v = vec![0.0f64; d];
    for p in parts {
        for i in 0..d {
            v[i] += p[i];
        }
    }
    if sigma > 0.0 {
        for x in v.iter_mut() {
            *x += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

/// Generate a synthetic corpus. Deterministic in the config: entity and
/// relation vectors are drawn first, then per-chain relations and noise,
/// then distractors, all from one seeded stream.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;

    let entities: Vec<Vec<f64>> = (0..cfg.num_entities).map(|_| unit_normal(d, &mut rng)).collect();
    let relations: Vec<Vec<f64>> =
        (0..cfg.num_relations).map(|_| unit_normal(d, &mut rng)).collect();

    let mut chunks = Vec::with_capacity(2 * cfg.num_chains + cfg.num_distractors);
    let mut records = Vec::with_capacity(cfg.num_chains);
    let mut queries = Vec::with_capacity(cfg.num_chains);
    let mut used_triples: HashSet<(usize, usize, usize)> = HashSet::new();

    for chain in 0..cfg.num_chains {
        let (a, b, c) = (3 * chain, 3 * chain + 1, 3 * chain + 2);
        let r1 = rng.gen_range(0..cfg.num_relations);
        let r2 = loop {
            let cand = rng.gen_range(0..cfg.num_relations);
            if cand != r1 {
                break cand;
            }
        };
        used_triples.insert((a, r1, b));
        used_triples.insert((b, r2, c));

        let chunk1_id = format!("c{chain:05}-h1");
        let chunk2_id = format!("c{chain:05}-h2");
        let chunk1_emb =
            noisy_unit_sum(&[&entities[a], &relations[r1], &entities[b]], cfg.noise_sigma, &mut rng);
        let chunk2_emb =
            noisy_unit_sum(&[&entities[b], &relations[r2], &entities[c]], cfg.noise_sigma, &mut rng);
        chunks.push(SynthChunk {
            id: chunk1_id.clone(),
            title: format!("fact e{a}-r{r1}-e{b}"),
            text: format!("Entity e{a} relates to entity e{b} via relation r{r1}."),
            embedding: chunk1_emb,
        });
        chunks.push(SynthChunk {
            id: chunk2_id.clone(),
            title: format!("fact e{b}-r{r2}-e{c}"),
            text: format!("Entity e{b} relates to entity e{c} via relation r{r2}."),
            embedding: chunk2_emb,
        });

        let query_emb = noisy_unit_sum(
            &[&entities[a], &relations[r1], &relations[r2]],
            cfg.noise_sigma,
            &mut rng,
        );
        // Gold sub-queries are noise-free: hop 1 asks a + r1, hop 2 asks
        // b + r2 (the bridge entity is known once hop 1 resolves).
        let hop1_emb = noisy_unit_sum(&[&entities[a], &relations[r1]], 0.0, &mut rng);
        let hop2_emb = noisy_unit_sum(&[&entities[b], &relations[r2]], 0.0, &mut rng);

        let question_id = format!("q{chain:05}");
        records.push(DecompositionRecord {
            question_id: question_id.clone(),
            question_type: QuestionType::Compositional,
            hops: vec![
                HopStep {
                    sub_query: format!("which entity does e{a} reach via r{r1}?"),
                    gold_chunk_id: chunk1_id.clone(),
                },
                HopStep {
                    sub_query: format!("which entity does e{b} reach via r{r2}?"),
                    gold_chunk_id: chunk2_id.clone(),
                },
            ],
            query_emb: query_emb.clone(),
            hop_context_embs: vec![hop1_emb, hop2_emb],
        });
        queries.push(RawEvalQuery {
            question_id,
            query_emb,
            gold_ids: vec![chunk1_id, chunk2_id],
        });
    }

    for j in 0..cfg.num_distractors {
        let (x, rel, y) = loop {
            let x = rng.gen_range(0..cfg.num_entities);
            let rel = rng.gen_range(0..cfg.num_relations);
            let y = rng.gen_range(0..cfg.num_entities);
            if x != y && !used_triples.contains(&(x, rel, y)) {
                break (x, rel, y);
            }
        };
        used_triples.insert((x, rel, y));
        chunks.push(SynthChunk {
            id: format!("d{j:06}"),
            title: format!("fact e{x}-r{rel}-e{y}"),
            text: format!("Entity e{x} relates to entity e{y} via relation r{rel}."),
            embedding: noisy_unit_sum(
                &[&entities[x], &relations[rel], &entities[y]],
                cfg.noise_sigma,
                &mut rng,
            ),
        });
    }

    Ok(SynthCorpus { config: cfg.clone(), chunks, records, queries })
}

/// Where [`write_corpus`] put each artifact.
#[derive(Clone, Debug, Serialize)]
pub struct CorpusPaths {
    pub chunks: PathBuf,
    pub records: PathBuf,
    pub queries: PathBuf,
}

/// Write a corpus as three JSONL files: `chunks.jsonl` (ingest schema),
/// `records.jsonl` (decomposition records), `queries.jsonl` (eval queries).
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<CorpusPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = CorpusPaths {
        chunks: dir.join("chunks.jsonl"),
        records: dir.join("records.jsonl"),
        queries: dir.join("queries.jsonl"),
    };
    write_jsonl(&paths.chunks, &corpus.chunks)?;
    write_jsonl(&paths.records, &corpus.records)?;
    write_jsonl(&paths.queries, &corpus.queries)?;
    Ok(paths)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| Error::Numeric(format!("serialization: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read decomposition records from JSONL, one per line.
pub fn load_records_jsonl<R: BufRead>(
    reader: R,
    source_label: &str,
) -> Result<Vec<DecompositionRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DecompositionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_label, lineno + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::ChunkRecord;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            dim: 16,
            num_entities: 60,
            num_relations: 8,
            num_chains: 20,
            num_distractors: 30,
            noise_sigma: 0.02,
            seed: 9,
        }
    }

    fn store_of(corpus: &SynthCorpus) -> VectorStore<f64> {
        let mut s = VectorStore::new(corpus.config.dim).unwrap();
        for ch in &corpus.chunks {
            s.insert(ChunkRecord {
                id: ch.id.clone(),
                title: Some(ch.title.clone()),
                text: Some(ch.text.clone()),
                embedding: Embedding::from_f64(&ch.embedding).unwrap(),
            })
            .unwrap();
        }
        s
    }

    fn record(id: &str, qtype: QuestionType, hops: usize, d: usize) -> DecompositionRecord {
        DecompositionRecord {
            question_id: id.into(),
            question_type: qtype,
            hops: (0..hops)
                .map(|i| HopStep {
                    sub_query: format!("hop {i}"),
                    gold_chunk_id: format!("g{i}"),
                })
                .collect(),
            query_emb: vec![0.5; d],
            hop_context_embs: vec![vec![0.25; d]; hops],
        }
    }

    #[test]
    fn generation_shapes_and_determinism() {
        let cfg = small_cfg();
        let a = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.chunks.len(), 2 * cfg.num_chains + cfg.num_distractors);
        assert_eq!(a.records.len(), cfg.num_chains);
        assert_eq!(a.queries.len(), cfg.num_chains);
        for ch in &a.chunks {
            assert_eq!(ch.embedding.len(), cfg.dim);
            assert!((norm(&ch.embedding) - 1.0).abs() < 1e-9, "chunks are unit vectors");
        }
        for rec in &a.records {
            assert!(rec.integrity_ok());
            assert_eq!(rec.hops.len(), 2);
        }

        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a.chunks).unwrap(), serde_json::to_string(&b.chunks).unwrap());
        assert_eq!(
            serde_json::to_string(&a.records).unwrap(),
            serde_json::to_string(&b.records).unwrap()
        );

        let other = SynthConfig { seed: 10, ..cfg };
        let c = generate_synthetic(&other).unwrap();
        assert_ne!(
            serde_json::to_string(&a.chunks).unwrap(),
            serde_json::to_string(&c.chunks).unwrap()
        );
    }

    #[test]
    fn generation_validates_config() {
        assert!(matches!(
            generate_synthetic(&SynthConfig { dim: 0, ..small_cfg() }),
            Err(Error::InvalidDimension)
        ));
        assert!(matches!(
            generate_synthetic(&SynthConfig { num_entities: 10, ..small_cfg() }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_synthetic(&SynthConfig { num_relations: 1, ..small_cfg() }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generate_synthetic(&SynthConfig { noise_sigma: -0.1, ..small_cfg() }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn write_corpus_is_byte_deterministic() {
        let cfg = small_cfg();
        let dir = tempfile::tempdir().unwrap();
        let d1 = dir.path().join("one");
        let d2 = dir.path().join("two");
        write_corpus(&generate_synthetic(&cfg).unwrap(), &d1).unwrap();
        write_corpus(&generate_synthetic(&cfg).unwrap(), &d2).unwrap();
        for name in ["chunks.jsonl", "records.jsonl", "queries.jsonl"] {
            let a = std::fs::read(d1.join(name)).unwrap();
            let b = std::fs::read(d2.join(name)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn curate_filters_and_is_idempotent() {
        let d = 4;
        let mut records = vec![
            record("ok", QuestionType::Compositional, 2, d),
            record("cmp", QuestionType::Comparison, 2, d),
            record("other", QuestionType::Other, 2, d),
            record("short", QuestionType::Inference, 1, d),
            record("ok2", QuestionType::BridgeComparison, 3, d),
        ];
        // Misaligned embeddings: drop for integrity.
        records.push(DecompositionRecord {
            hop_context_embs: vec![vec![0.1; d]],
            ..record("misaligned", QuestionType::Inference, 2, d)
        });

        let (kept, report) = curate(records, None);
        let ids: Vec<&str> = kept.iter().map(|r| r.question_id.as_str()).collect();
        assert_eq!(ids, ["ok", "ok2"]);
        assert_eq!(report.kept, 2);
        assert_eq!(report.dropped.get("question_type"), Some(&2));
        assert_eq!(report.dropped.get("integrity"), Some(&2));

        let (kept2, report2) = curate(kept.clone(), None);
        assert_eq!(kept2.len(), kept.len());
        assert!(report2.dropped.is_empty());

        // Unresolvable gold ids drop when a known-id set is provided.
        let known: HashSet<String> = ["g0", "g1"].iter().map(|s| s.to_string()).collect();
        let (kept3, report3) = curate(kept2, Some(&known));
        assert_eq!(kept3.len(), 1, "3-hop record references g2 which is unknown");
        assert_eq!(report3.dropped.get("unresolvable_chunk"), Some(&1));
    }

    #[test]
    fn build_examples_aligns_hops() {
        let corpus = generate_synthetic(&small_cfg()).unwrap();
        let store = store_of(&corpus);
        let cfg = TrainConfig { num_negatives: 3, ..TrainConfig::default() };
        let examples = build_train_examples(&corpus.records, &store, &cfg).unwrap();
        // Two hops per record -> one example per record.
        assert_eq!(examples.len(), corpus.records.len());
        for (ex, rec) in examples.iter().zip(&corpus.records) {
            assert_eq!(ex.query_emb.to_f64_vec(), rec.query_emb);
            assert_eq!(
                ex.context_emb.to_f64_vec(),
                store.get(&rec.hops[0].gold_chunk_id).unwrap().embedding.to_f64_vec()
            );
            assert_eq!(ex.positive_id, rec.hops[1].gold_chunk_id);
            assert_eq!(ex.negative_ids.len(), 3);
            assert!(!ex.negative_ids.contains(&ex.positive_id));
            assert!(!ex.negative_ids.contains(&rec.hops[0].gold_chunk_id));
        }

        // Same config, same negatives.
        let again = build_train_examples(&corpus.records, &store, &cfg).unwrap();
        for (a, b) in examples.iter().zip(&again) {
            assert_eq!(a.negative_ids, b.negative_ids);
        }

        // Three-hop records yield two examples, the second hop querying
        // with the gold sub-query embedding of hop 2.
        let mut rec3 = corpus.records[0].clone();
        rec3.hops.push(HopStep {
            sub_query: "hop 3".into(),
            gold_chunk_id: corpus.records[1].hops[0].gold_chunk_id.clone(),
        });
        rec3.hop_context_embs.push(rec3.hop_context_embs[1].clone());
        let ex3 = build_train_examples(std::slice::from_ref(&rec3), &store, &cfg).unwrap();
        assert_eq!(ex3.len(), 2);
        assert_eq!(ex3[1].query_emb.to_f64_vec(), rec3.hop_context_embs[1]);
        assert_eq!(ex3[1].positive_id, rec3.hops[2].gold_chunk_id);
    }

    #[test]
    fn build_examples_unknown_chunk_errors() {
        let corpus = generate_synthetic(&small_cfg()).unwrap();
        let store = store_of(&corpus);
        let cfg = TrainConfig::default();
        let mut records = corpus.records.clone();
        records[3].hops[1].gold_chunk_id = "ghost".into();
        match build_train_examples(&records, &store, &cfg) {
            Err(Error::UnknownId(id)) => assert_eq!(id, "ghost"),
            other => panic!("expected unknown id, got {other:?}"),
        }
    }

    #[test]
    fn records_jsonl_roundtrip() {
        let corpus = generate_synthetic(&small_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(&corpus, dir.path()).unwrap();
        let file = std::fs::File::open(&paths.records).unwrap();
        let records =
            load_records_jsonl(std::io::BufReader::new(file), "records.jsonl").unwrap();
        assert_eq!(records.len(), corpus.records.len());
        assert_eq!(records[0].question_id, corpus.records[0].question_id);
        assert_eq!(records[0].query_emb, corpus.records[0].query_emb);

        let bad = "not json\n";
        match load_records_jsonl(bad.as_bytes(), "mem") {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn queries_have_resolvable_gold() {
        let corpus = generate_synthetic(&small_cfg()).unwrap();
        let store = store_of(&corpus);
        for q in &corpus.queries {
            assert_eq!(q.gold_ids.len(), 2);
            for id in &q.gold_ids {
                assert!(store.contains(id));
            }
        }
    }
}
