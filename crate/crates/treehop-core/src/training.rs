//! Contrastive training of the query-update network.
//!
//! Each training example is one hop of a multi-hop question: the hop's
//! query embedding, the gold chunk it conditions on, the id of the chunk
//! the *next* hop should retrieve (the positive), and sampled negative
//! chunk ids. The updated query is scored by cosine against positive and
//! negatives, and the scores feed a temperature-scaled contrastive loss.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{backward, next_query_training, ModelParams, ParamGrads};
use crate::scalar::Scalar;
use crate::seeding::{derive, SALT_DROPOUT, SALT_NEGATIVES, SALT_SHUFFLE};
use crate::store::VectorStore;

/// One hop-level training example.
#[derive(Clone, Debug)]
pub struct TrainExample<F: Scalar> {
    pub query_emb: Embedding<F>,
    pub context_emb: Embedding<F>,
    pub positive_id: String,
    pub negative_ids: Vec<String>,
}

fn default_temperature() -> f64 {
    0.15
}
fn default_num_negatives() -> usize {
    5
}
fn default_batch_size() -> usize {
    64
}
fn default_learning_rate() -> f64 {
    6e-5
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    20
}
fn default_dropout_rate() -> f64 {
    0.1
}
fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_num_negatives")]
    pub num_negatives: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_dropout_rate")]
    pub dropout_rate: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            temperature: default_temperature(),
            num_negatives: default_num_negatives(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            weight_decay: default_weight_decay(),
            epochs: default_epochs(),
            dropout_rate: default_dropout_rate(),
            seed: default_seed(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.num_negatives == 0 {
            return Err(Error::Config("num_negatives must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Contrastive loss value with its gradients w.r.t. the similarity scores.
#[derive(Clone, Debug)]
pub struct InfoNce<F: Scalar> {
    pub loss: F,
    pub dpos: F,
    pub dnegs: Vec<F>,
}

/// Temperature-scaled contrastive loss: `-log softmax(pos/t)` over the
/// positive and negative similarity scores.
///
/// Computed as `(m - pos/t) + ln(sum exp(logit - m))` with `m` the maximum
/// logit; this is overflow-safe and returns exactly `ln(1 + n)` when all
/// similarities are equal, and exactly zero with no negatives.
pub fn info_nce_loss<F: Scalar>(pos_sim: F, neg_sims: &[F], temperature: F) -> Result<InfoNce<F>> {
    if temperature <= F::zero() {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if !pos_sim.is_finite() || neg_sims.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite similarity score".into()));
    }
    let l0 = pos_sim / temperature;
    let logits: Vec<F> = neg_sims.iter().map(|&s| s / temperature).collect();
    let mut m = l0;
    for &l in &logits {
        if l > m {
            m = l;
        }
    }
    let e0 = (l0 - m).exp();
    let mut z = e0;
    let mut exps = Vec::with_capacity(logits.len());
    for &l in &logits {
        let e = (l - m).exp();
        exps.push(e);
        z = z + e;
    }
    let loss = (m - l0) + z.ln();
    let dpos = (e0 / z - F::one()) / temperature;
    let dnegs: Vec<F> = exps.iter().map(|&e| e / z / temperature).collect();
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite contrastive loss".into()));
    }
    Ok(InfoNce { loss, dpos, dnegs })
}

/// Loss and parameter gradients for one example.
///
/// Runs the hop in training mode (dropout drawn from `rng`), scores the
/// updated query against the positive and negative chunks by cosine, and
/// backpropagates the contrastive loss through scores, hop, and projections.
pub fn example_loss<F: Scalar>(
    params: &ModelParams<F>,
    example: &TrainExample<F>,
    store: &VectorStore<F>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(F, ParamGrads<F>)> {
    let pos = store
        .get(&example.positive_id)
        .ok_or_else(|| Error::UnknownId(example.positive_id.clone()))?;
    let mut negs = Vec::with_capacity(example.negative_ids.len());
    for id in &example.negative_ids {
        negs.push(store.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?);
    }

    let (y, trace) =
        next_query_training(params, &example.query_emb, &example.context_emb, rng)?;
    let ys = y.as_slice();
    let ny = norm(ys);
    if ny == F::zero() {
        return Err(Error::Numeric("updated query has zero norm".into()));
    }

    let score = |e: &Embedding<F>| -> (F, F) {
        let ne = norm(e.as_slice());
        (dot(ys, e.as_slice()) / (ny * ne), ne)
    };
    let (pos_sim, pos_norm) = score(&pos.embedding);
    let mut neg_sims = Vec::with_capacity(negs.len());
    let mut neg_norms = Vec::with_capacity(negs.len());
    for n in &negs {
        let (s, ne) = score(&n.embedding);
        neg_sims.push(s);
        neg_norms.push(ne);
    }

    let nce = info_nce_loss(pos_sim, &neg_sims, F::of_f64(cfg.temperature))?;

    // dL/dy = sum over scored chunks of dL/ds * dcos(y, e)/dy,
    // with dcos/dy = e/(|y||e|) - cos * y/|y|^2.
    let mut dy = vec![F::zero(); ys.len()];
    let mut add_term = |dscore: F, e: &Embedding<F>, ne: F, sim: F| {
        let c1 = dscore / (ny * ne);
        let c2 = dscore * sim / (ny * ny);
        for (i, v) in e.as_slice().iter().enumerate() {
            dy[i] = dy[i] + *v * c1 - ys[i] * c2;
        }
    };
    add_term(nce.dpos, &pos.embedding, pos_norm, pos_sim);
    for (j, n) in negs.iter().enumerate() {
        add_term(nce.dnegs[j], &n.embedding, neg_norms[j], neg_sims[j]);
    }

    let result = backward(params, &trace, &dy)?;
    Ok((nce.loss, result.grads))
}

/// Draw `n` distinct chunk ids uniformly from the store, never returning
/// anything in `exclude`.
pub fn sample_negatives<F: Scalar>(
    store: &VectorStore<F>,
    exclude: &[&str],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let excluded: HashSet<&str> =
        exclude.iter().copied().filter(|id| store.contains(id)).collect();
    let available = store.len() - excluded.len();
    if available < n {
        return Err(Error::InsufficientCandidates { need: n, have: available });
    }
    let mut chosen_idx: HashSet<usize> = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let attempt_cap = 50 * n + 200;
    while out.len() < n {
        if attempts >= attempt_cap {
            // Rejection sampling is slow when nearly everything is already
            // taken; finish with a partial Fisher-Yates over the remainder.
            let mut rest: Vec<usize> = (0..store.len())
                .filter(|i| !chosen_idx.contains(i) && !excluded.contains(store.id_at(*i)))
                .collect();
            while out.len() < n {
                let j = rng.gen_range(0..rest.len());
                let idx = rest.swap_remove(j);
                out.push(store.id_at(idx).to_string());
            }
            break;
        }
        attempts += 1;
        let idx = rng.gen_range(0..store.len());
        if chosen_idx.contains(&idx) || excluded.contains(store.id_at(idx)) {
            continue;
        }
        chosen_idx.insert(idx);
        out.push(store.id_at(idx).to_string());
    }
    Ok(out)
}

/// First and second moment accumulators for the optimizer.
#[derive(Clone, Debug)]
pub struct AdamState<F: Scalar> {
    step: u64,
    m: ParamGrads<F>,
    v: ParamGrads<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(d: usize) -> Self {
        AdamState { step: 0, m: ParamGrads::zeros(d), v: ParamGrads::zeros(d) }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One decoupled-weight-decay Adam update. Rejects non-finite gradients
/// before touching any state, so an aborted step leaves parameters,
/// moments, and the step counter unchanged.
pub fn adamw_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &ParamGrads<F>,
    state: &mut AdamState<F>,
    cfg: &TrainConfig,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient; optimizer step aborted".into()));
    }
    let t = state.step + 1;
    let b1 = F::of_f64(cfg.beta1);
    let b2 = F::of_f64(cfg.beta2);
    let one = F::one();
    let lr = F::of_f64(cfg.learning_rate);
    let eps = F::of_f64(cfg.epsilon);
    let wd = F::of_f64(cfg.weight_decay);
    let bc1 = F::of_f64(1.0 - cfg.beta1.powi(t as i32));
    let bc2 = F::of_f64(1.0 - cfg.beta2.powi(t as i32));

    let mut p_tensors = params.tensors_mut();
    let g_tensors = grads.tensors();
    let mut m_tensors = state.m.tensors_mut();
    let mut v_tensors = state.v.tensors_mut();
    for k in 0..p_tensors.len() {
        let p = &mut p_tensors[k];
        let g = g_tensors[k];
        let m = &mut m_tensors[k];
        let v = &mut v_tensors[k];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = p[i] - lr * (m_hat / (v_hat.sqrt() + eps) + wd * p[i]);
        }
    }
    state.step = t;
    Ok(())
}

/// Per-run training summary; serialized next to the checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub examples: usize,
    pub epochs_run: usize,
    pub epoch_losses: Vec<f64>,
    pub wall_seconds: f64,
    pub config: TrainConfig,
    pub checkpoint_path: Option<String>,
}

/// Train a fresh model on the dataset.
///
/// Initialization, epoch shuffling, and per-example dropout all derive from
/// `cfg.seed` through independent streams, so a run is reproducible bit for
/// bit regardless of thread count: per-example gradients are computed in
/// parallel but accumulated in batch order.
pub fn train<F: Scalar>(
    dataset: &[TrainExample<F>],
    store: &VectorStore<F>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<F>, TrainReport)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let d = dataset[0].query_emb.dim();
    if store.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: store.dim() });
    }
    for ex in dataset {
        for got in [ex.query_emb.dim(), ex.context_emb.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
    }

    let started = Instant::now();
    let mut params = ModelParams::<F>::init(d, cfg.seed, cfg.dropout_rate)?;
    let mut state = AdamState::new(d);
    let mut shuffle_rng =
        ChaCha8Rng::seed_from_u64(derive(cfg.seed, SALT_SHUFFLE, 0, 0));
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(F, ParamGrads<F>)>> = batch
                .par_iter()
                .map(|&idx| {
                    let mut ex_rng = ChaCha8Rng::seed_from_u64(derive(
                        cfg.seed,
                        SALT_DROPOUT,
                        epoch as u64,
                        idx as u64,
                    ));
                    example_loss(&params, &dataset[idx], store, cfg, &mut ex_rng)
                })
                .collect();
            let mut total = ParamGrads::<F>::zeros(d);
            for r in results {
                let (loss, grads) = r?;
                loss_sum += loss.as_f64();
                total.add_assign(&grads);
            }
            total.scale_assign(F::one() / F::of_usize(batch.len()));
            adamw_step(&mut params, &total, &mut state, cfg)?;
        }
        epoch_losses.push(loss_sum / dataset.len() as f64);
    }

    let report = TrainReport {
        examples: dataset.len(),
        epochs_run: cfg.epochs,
        epoch_losses,
        wall_seconds: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
        checkpoint_path: None,
    };
    Ok((params, report))
}

#[derive(Serialize, Deserialize)]
struct RawTrainLine {
    query_emb: Vec<f64>,
    context_emb: Vec<f64>,
    positive_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negative_ids: Option<Vec<String>>,
}

/// Read training examples from JSONL
/// `{"query_emb", "context_emb", "positive_id", "negative_ids"?}`.
///
/// Lines without `negative_ids` get `cfg.num_negatives` negatives sampled
/// here (uniform over the store minus the positive), deterministically from
/// `cfg.seed` and the line number.
pub fn load_examples_jsonl<F: Scalar, R: BufRead>(
    reader: R,
    source_label: &str,
    store: &VectorStore<F>,
    cfg: &TrainConfig,
) -> Result<Vec<TrainExample<F>>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTrainLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
        let query_emb = Embedding::<F>::from_f64(&raw.query_emb)
            .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
        let context_emb = Embedding::<F>::from_f64(&raw.context_emb)
            .map_err(|e| Error::parse(source_label, lineno, e.to_string()))?;
        if !store.contains(&raw.positive_id) {
            return Err(Error::parse(
                source_label,
                lineno,
                format!("unknown chunk id {:?}", raw.positive_id),
            ));
        }
        let negative_ids = match raw.negative_ids {
            Some(ids) => {
                for id in &ids {
                    if !store.contains(id) {
                        return Err(Error::parse(
                            source_label,
                            lineno,
                            format!("unknown chunk id {id:?}"),
                        ));
                    }
                }
                ids
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive(
                    cfg.seed,
                    SALT_NEGATIVES,
                    lineno as u64,
                    0,
                ));
                sample_negatives(store, &[raw.positive_id.as_str()], cfg.num_negatives, &mut rng)?
            }
        };
        out.push(TrainExample { query_emb, context_emb, positive_id: raw.positive_id, negative_ids });
    }
    Ok(out)
}

pub fn save_examples_jsonl<F: Scalar, W: Write>(
    examples: &[TrainExample<F>],
    mut writer: W,
) -> Result<()> {
    for ex in examples {
        let raw = RawTrainLine {
            query_emb: ex.query_emb.to_f64_vec(),
            context_emb: ex.context_emb.to_f64_vec(),
            positive_id: ex.positive_id.clone(),
            negative_ids: Some(ex.negative_ids.clone()),
        };
        serde_json::to_writer(&mut writer, &raw)
            .map_err(|e| Error::Numeric(format!("example serialization: {e}")))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
