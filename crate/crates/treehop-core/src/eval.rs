//! Evaluation harness: runs direct (single-pass) retrieval and multi-hop
//! retrieval over the same query set and reports recall, hit rate,
//! retrieved-set size, and latency side by side.
//!
//! Metrics and timing are measured in separate passes. The metrics pass
//! runs each query once and collects retrieved sets plus per-stage timing
//! from the hop controller. Latency then comes from `reps` additional
//! full passes; the reported figure is the median over passes of the mean
//! per-query wall time, which damps scheduler noise on shared machines.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::RawEvalQuery;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::multihop::{multihop_retrieve, multihop_retrieve_timed, ControllerConfig};
use crate::scalar::Scalar;
use crate::store::VectorStore;

/// One evaluation query: an embedding and the set of chunk ids that count
/// as correct retrievals.
#[derive(Clone, Debug)]
pub struct EvalQuery<F: Scalar> {
    pub question_id: String,
    pub query: Embedding<F>,
    pub gold: BTreeSet<String>,
}

/// Fraction of the gold set present in `retrieved`. Retrieved ids are
/// assumed unique (both retrieval paths guarantee that).
pub fn recall(retrieved: &[String], gold: &BTreeSet<String>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Data("gold set is empty; recall is undefined".into()));
    }
    let found = gold.iter().filter(|g| retrieved.contains(*g)).count();
    Ok(found as f64 / gold.len() as f64)
}

/// A retrieval system under evaluation.
pub enum EvalSystem<'a, F: Scalar> {
    /// Plain top-k cosine retrieval with the raw query.
    Direct { k: usize },
    /// Query-hopping retrieval through a gate model.
    MultiHop { params: &'a ModelParams<F>, config: ControllerConfig },
}

/// Aggregated results for one system over one query set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRow {
    pub label: String,
    /// "direct" or "multihop".
    pub system: String,
    pub k: usize,
    pub hops: usize,
    /// Mean over queries of (gold chunks retrieved / gold chunks).
    pub recall_at_k: f64,
    /// Fraction of queries whose whole gold set was retrieved.
    pub hit_rate: f64,
    /// Mean retrieved-set size.
    pub avg_k: f64,
    /// Median over latency passes of mean per-query seconds.
    pub latency_seconds: f64,
    /// Total store-scan seconds across the metrics pass.
    pub retrieval_seconds: f64,
    /// Total gate-model seconds across the metrics pass.
    pub model_seconds: f64,
    /// Gate forward passes across the metrics pass.
    pub model_forwards: u64,
    /// Individually timed query executions in the latency passes
    /// (`reps * query_count`).
    pub timed_sections: u64,
    pub query_count: usize,
}

/// Run one system over the query set. `reps` controls the latency passes;
/// with `reps = 0` the row reports zero latency and no timed sections.
pub fn run_eval<F: Scalar>(
    label: &str,
    system: &EvalSystem<'_, F>,
    store: &VectorStore<F>,
    queries: &[EvalQuery<F>],
    reps: usize,
) -> Result<EvalRow> {
    if queries.is_empty() {
        return Err(Error::Data("no evaluation queries".into()));
    }
    let (system_name, k, hops) = match system {
        EvalSystem::Direct { k } => {
            if *k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
            ("direct", *k, 1)
        }
        EvalSystem::MultiHop { config, .. } => {
            config.validate()?;
            ("multihop", config.k, config.hops)
        }
    };

    let mut recall_sum = 0.0f64;
    let mut full_hits = 0usize;
    let mut size_sum = 0usize;
    let mut retrieval_seconds = 0.0f64;
    let mut model_seconds = 0.0f64;
    let mut model_forwards = 0u64;

    for q in queries {
        let ids = match system {
            EvalSystem::Direct { k } => {
                let t0 = Instant::now();
                let hits = store.top_k(&q.query, *k)?;
                retrieval_seconds += t0.elapsed().as_secs_f64();
                hits.into_iter().map(|h| h.chunk_id).collect::<Vec<_>>()
            }
            EvalSystem::MultiHop { params, config } => {
                let trace = multihop_retrieve_timed(store, params, &q.query, config)?;
                if let Some(t) = &trace.timing {
                    retrieval_seconds += t.retrieval_seconds;
                    model_seconds += t.model_seconds;
                }
                model_forwards += trace.forward_count;
                trace.retrieved_ids()
            }
        };
        recall_sum += recall(&ids, &q.gold)?;
        if q.gold.iter().all(|g| ids.contains(g)) {
            full_hits += 1;
        }
        size_sum += ids.len();
    }

    let n = queries.len();
    let mut timed_sections = 0u64;
    let mut per_pass = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut total = 0.0f64;
        for q in queries {
            let t0 = Instant::now();
            match system {
                EvalSystem::Direct { k } => {
                    store.top_k(&q.query, *k)?;
                }
                EvalSystem::MultiHop { params, config } => {
                    multihop_retrieve(store, params, &q.query, config)?;
                }
            }
            total += t0.elapsed().as_secs_f64();
            timed_sections += 1;
        }
        per_pass.push(total / n as f64);
    }

    Ok(EvalRow {
        label: label.to_string(),
        system: system_name.to_string(),
        k,
        hops,
        recall_at_k: recall_sum / n as f64,
        hit_rate: full_hits as f64 / n as f64,
        avg_k: size_sum as f64 / n as f64,
        latency_seconds: median(per_pass),
        retrieval_seconds,
        model_seconds,
        model_forwards,
        timed_sections,
        query_count: n,
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("latency is never NaN"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// A row's metrics relative to the baseline row (differences, except
/// latency which is a ratio and omitted when the baseline reports zero).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalDelta {
    pub label: String,
    pub baseline: String,
    pub recall_at_k: f64,
    pub hit_rate: f64,
    pub avg_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ratio: Option<f64>,
}

/// Sort rows by label and compute each row's deltas against the first.
/// Needs at least two rows to have anything to compare.
pub fn compare(mut rows: Vec<EvalRow>) -> Result<(Vec<EvalRow>, Vec<EvalDelta>)> {
    if rows.len() < 2 {
        return Err(Error::Config(format!(
            "comparison needs at least 2 result rows, got {}",
            rows.len()
        )));
    }
    rows.sort_by(|a, b| a.label.cmp(&b.label));
    let base = rows[0].clone();
    let deltas = rows[1..]
        .iter()
        .map(|r| EvalDelta {
            label: r.label.clone(),
            baseline: base.label.clone(),
            recall_at_k: r.recall_at_k - base.recall_at_k,
            hit_rate: r.hit_rate - base.hit_rate,
            avg_k: r.avg_k - base.avg_k,
            latency_ratio: (base.latency_seconds > 0.0)
                .then(|| r.latency_seconds / base.latency_seconds),
        })
        .collect();
    Ok((rows, deltas))
}

/// Full evaluation output: store fingerprint, per-system rows, and deltas
/// against the baseline (the alphabetically first label).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub store_chunks: usize,
    pub store_dim: usize,
    pub rows: Vec<EvalRow>,
    pub deltas: Vec<EvalDelta>,
}

pub fn build_report<F: Scalar>(
    store: &VectorStore<F>,
    rows: Vec<EvalRow>,
) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Config("no evaluation rows".into()));
    }
    let (rows, deltas) = if rows.len() >= 2 {
        compare(rows)?
    } else {
        (rows, Vec::new())
    };
    Ok(EvalReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        store_chunks: store.len(),
        store_dim: store.dim(),
        rows,
        deltas,
    })
}

pub fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str("# Retrieval evaluation\n\n");
    out.push_str(&format!(
        "Store: {} chunks, dim {}. Harness version {}.\n\n",
        report.store_chunks, report.store_dim, report.version
    ));
    out.push_str(
        "| label | system | k | hops | recall@k | hit rate | avg chunks | latency (s) | scan (s) | model (s) | forwards |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|---|---|---|---|\n");
    for r in &report.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.4} | {:.4} | {:.2} | {:.6} | {:.6} | {:.6} | {} |\n",
            r.label,
            r.system,
            r.k,
            r.hops,
            r.recall_at_k,
            r.hit_rate,
            r.avg_k,
            r.latency_seconds,
            r.retrieval_seconds,
            r.model_seconds,
            r.model_forwards,
        ));
    }
    if !report.deltas.is_empty() {
        out.push_str(&format!("\nDeltas vs `{}`:\n\n", report.deltas[0].baseline));
        out.push_str("| label | recall@k | hit rate | avg chunks | latency ratio |\n");
        out.push_str("|---|---|---|---|---|\n");
        for d in &report.deltas {
            let ratio = d
                .latency_ratio
                .map(|r| format!("{r:.2}x"))
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "| {} | {:+.4} | {:+.4} | {:+.2} | {} |\n",
                d.label, d.recall_at_k, d.hit_rate, d.avg_k, ratio
            ));
        }
    }
    out
}

/// Read eval queries from JSONL lines of `{question_id, query_emb,
/// gold_ids}`. Empty gold sets are rejected at this point so downstream
/// metric code never sees them.
pub fn load_eval_queries<F: Scalar, R: BufRead>(
    reader: R,
    source_label: &str,
) -> Result<Vec<EvalQuery<F>>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEvalQuery = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_label, lineno + 1, e.to_string()))?;
        if raw.gold_ids.is_empty() {
            return Err(Error::parse(source_label, lineno + 1, "gold_ids is empty"));
        }
        let query = Embedding::from_f64(&raw.query_emb)
            .map_err(|e| Error::parse(source_label, lineno + 1, e.to_string()))?;
        out.push(EvalQuery {
            question_id: raw.question_id,
            query,
            gold: raw.gold_ids.into_iter().collect(),
        });
    }
    Ok(out)
}
