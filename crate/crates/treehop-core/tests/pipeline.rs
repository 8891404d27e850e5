//! End-to-end pipeline through the public API only: generate a corpus,
//! write and re-ingest it from disk, curate, build training pairs, train,
//! checkpoint, retrieve with the reloaded model, and evaluate.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;

use treehop_core::data::{
    build_train_examples, curate, generate_synthetic, load_records_jsonl, write_corpus,
    SynthConfig,
};
use treehop_core::embedding::Embedding;
use treehop_core::eval::{build_report, load_eval_queries, render_markdown, run_eval, EvalSystem};
use treehop_core::model::ModelParams;
use treehop_core::multihop::{multihop_retrieve, ControllerConfig};
use treehop_core::store::VectorStore;
use treehop_core::training::{load_examples_jsonl, save_examples_jsonl, train, TrainConfig};
use treehop_core::Store64;

#[test]
fn synthetic_corpus_roundtrips_through_files_and_trains() {
    let cfg = SynthConfig {
        dim: 24,
        num_entities: 150,
        num_relations: 14,
        num_chains: 50,
        num_distractors: 150,
        noise_sigma: 0.05,
        seed: 31,
    };
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");

    // Generate and persist.
    let corpus = generate_synthetic(&cfg).unwrap();
    let paths = write_corpus(&corpus, &corpus_dir).unwrap();

    // Ingest the chunk file from disk.
    let store: Store64 = VectorStore::ingest_jsonl(
        BufReader::new(File::open(&paths.chunks).unwrap()),
        "chunks.jsonl",
        None,
        false,
    )
    .unwrap();
    assert_eq!(store.len(), corpus.chunks.len());
    assert_eq!(store.dim(), cfg.dim);

    // Store binary roundtrip preserves every byte of every record.
    let store_path = dir.path().join("store.ths");
    store.save(&store_path).unwrap();
    let reloaded = Store64::load(&store_path).unwrap();
    assert_eq!(reloaded.len(), store.len());
    for rec in store.records() {
        let other = reloaded.get(&rec.id).unwrap();
        assert_eq!(other.title, rec.title);
        // THS1 stores f32 payloads, so compare at f32 precision.
        let a: Vec<f32> = rec.embedding.to_f64_vec().iter().map(|v| *v as f32).collect();
        let b: Vec<f32> = other.embedding.to_f64_vec().iter().map(|v| *v as f32).collect();
        assert_eq!(a, b);
    }

    // Curate the decomposition records against the ingested ids.
    let records = load_records_jsonl(
        BufReader::new(File::open(&paths.records).unwrap()),
        "records.jsonl",
    )
    .unwrap();
    let known: HashSet<String> = store.ids().map(|s| s.to_string()).collect();
    let (kept, report) = curate(records, Some(&known));
    assert_eq!(report.kept, corpus.records.len());
    assert!(report.dropped.is_empty());

    // Build pairs, persist them, reload them: identical examples.
    let tcfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let examples = build_train_examples(&kept, &store, &tcfg).unwrap();
    assert_eq!(examples.len(), kept.len());
    let examples_path = dir.path().join("examples.jsonl");
    save_examples_jsonl(&examples, File::create(&examples_path).unwrap()).unwrap();
    let loaded = load_examples_jsonl(
        BufReader::new(File::open(&examples_path).unwrap()),
        "examples.jsonl",
        &store,
        &tcfg,
    )
    .unwrap();
    assert_eq!(loaded.len(), examples.len());
    for (a, b) in examples.iter().zip(&loaded) {
        assert_eq!(a.positive_id, b.positive_id);
        assert_eq!(a.negative_ids, b.negative_ids);
        assert_eq!(a.query_emb.to_f64_vec(), b.query_emb.to_f64_vec());
    }

    // Train briefly; the loss curve must be finite and recorded per epoch.
    let (params, train_report) = train(&loaded, &store, &tcfg).unwrap();
    assert_eq!(train_report.epochs_run, 4);
    assert_eq!(train_report.epoch_losses.len(), 4);
    assert!(train_report.epoch_losses.iter().all(|l| l.is_finite()));

    // Checkpoint roundtrip drives retrieval identically (THM1 is f32, so
    // run both sides at f32 precision).
    let ckpt = dir.path().join("gate.thm");
    params.save(&ckpt).unwrap();
    let restored: ModelParams<f32> = ModelParams::load(&ckpt).unwrap();
    let store32 = store.convert::<f32>();
    let params32 = params.convert::<f32>();
    let hop_cfg = ControllerConfig { k: 4, hops: 2, ..ControllerConfig::default() };
    for q in &corpus.queries[..10] {
        let emb: Embedding<f32> =
            Embedding::new(q.query_emb.iter().map(|v| *v as f32).collect()).unwrap();
        let a = multihop_retrieve(&store32, &params32, &emb, &hop_cfg).unwrap();
        let b = multihop_retrieve(&store32, &restored, &emb, &hop_cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap(),
            "reloaded checkpoint changed retrieval for {}",
            q.question_id
        );
    }

    // Evaluate the trained gate against the direct baseline and render.
    let queries = load_eval_queries(
        BufReader::new(File::open(&paths.queries).unwrap()),
        "queries.jsonl",
    )
    .unwrap();
    assert_eq!(queries.len(), corpus.queries.len());
    let direct = run_eval("direct", &EvalSystem::Direct { k: 4 }, &store, &queries, 1).unwrap();
    let multi = run_eval(
        "multihop",
        &EvalSystem::MultiHop { params: &params, config: hop_cfg },
        &store,
        &queries,
        1,
    )
    .unwrap();
    assert_eq!(direct.query_count, queries.len());
    assert!(multi.avg_k <= 8.0);
    assert!(multi.model_forwards > 0);

    let report = build_report(&store, vec![direct, multi]).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.deltas.len(), 1);
    let md = render_markdown(&report);
    assert!(md.contains("| direct |") && md.contains("| multihop |"));
    let json = serde_json::to_string_pretty(&report).unwrap();
    assert!(json.contains("\"recall_at_k\""));
}

#[test]
fn mixed_precision_paths_agree_on_ranking() {
    // The f32 and f64 paths run the same corpus; rankings may differ in
    // exact score bits but the retrieved sets at small k should coincide
    // on a well-separated corpus.
    let cfg = SynthConfig {
        dim: 16,
        num_entities: 60,
        num_relations: 8,
        num_chains: 20,
        num_distractors: 40,
        noise_sigma: 0.01,
        seed: 13,
    };
    let corpus = generate_synthetic(&cfg).unwrap();
    let mut store64 = Store64::new(cfg.dim).unwrap();
    for ch in &corpus.chunks {
        store64
            .insert(treehop_core::store::ChunkRecord {
                id: ch.id.clone(),
                title: None,
                text: None,
                embedding: Embedding::from_f64(&ch.embedding).unwrap(),
            })
            .unwrap();
    }
    let store32 = store64.convert::<f32>();
    for q in &corpus.queries[..10] {
        let q64 = Embedding::from_f64(&q.query_emb).unwrap();
        let q32: Embedding<f32> =
            Embedding::new(q.query_emb.iter().map(|v| *v as f32).collect()).unwrap();
        let ids64: Vec<String> =
            store64.top_k(&q64, 3).unwrap().into_iter().map(|h| h.chunk_id).collect();
        let ids32: Vec<String> =
            store32.top_k(&q32, 3).unwrap().into_iter().map(|h| h.chunk_id).collect();
        assert_eq!(ids64, ids32, "precision changed top-3 for {}", q.question_id);
    }
}
