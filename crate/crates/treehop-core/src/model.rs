//! The query-update network.
//!
//! Given the current query embedding `q` and a retrieved chunk embedding
//! `c` (both dimension `d`), one hop computes
//!
//! ```text
//! q' = W_Q q + b_Q          k' = W_K c + b_K          v' = W_V c + b_V
//! z  = (q' . k') / sqrt(d)        (componentwise product, scaled)
//! w  = softmax(z)                 (over the d components, single head)
//! g  = w . v'                     (the update gate)
//! y  = q - c + g                  (next-hop query)
//! ```
//!
//! The `q - c` residual deletes the information already covered by the
//! retrieved chunk; the gate reinjects the parts of the chunk that should
//! carry over to the next hop. In training mode an inverted-dropout mask is
//! applied to `g` before the residual addition.
//!
//! The backward pass is hand-derived and exact; `gradcheck` validates it
//! against central finite differences.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::Offsets;
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{softmax, Matrix};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"THM1";
const VERSION: u32 = 1;

/// Model parameters: three square projection matrices with biases, plus the
/// training-mode dropout rate applied to the gate output.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F: Scalar> {
    d: usize,
    pub w_q: Matrix<F>,
    pub b_q: Vec<F>,
    pub w_k: Matrix<F>,
    pub b_k: Vec<F>,
    pub w_v: Matrix<F>,
    pub b_v: Vec<F>,
    pub dropout_rate: f64,
}

impl<F: Scalar> ModelParams<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w_q: Matrix<F>,
        b_q: Vec<F>,
        w_k: Matrix<F>,
        b_k: Vec<F>,
        w_v: Matrix<F>,
        b_v: Vec<F>,
        dropout_rate: f64,
    ) -> Result<Self> {
        let d = w_q.rows();
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        for m in [&w_q, &w_k, &w_v] {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.rows().max(m.cols()) });
            }
        }
        for b in [&b_q, &b_k, &b_v] {
            if b.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: b.len() });
            }
        }
        let params =
            ModelParams { d, w_q, b_q, w_k, b_k, w_v, b_v, dropout_rate };
        if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite);
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {dropout_rate}"
            )));
        }
        Ok(params)
    }

    /// Glorot-uniform weights (bound `sqrt(6 / 2d)` for square layers) and
    /// zero biases, reproducible from the seed. Draw order is fixed: W_Q,
    /// W_K, W_V, row-major.
    pub fn init(d: usize, seed: u64, dropout_rate: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / (2.0 * d as f64)).sqrt();
        let draw_matrix = |rng: &mut ChaCha8Rng| {
            let data: Vec<F> = (0..d * d)
                .map(|_| F::of_f64(rng.gen::<f64>() * 2.0 * bound - bound))
                .collect();
            Matrix::from_rows(d, d, data).expect("sized by construction")
        };
        let w_q = draw_matrix(&mut rng);
        let w_k = draw_matrix(&mut rng);
        let w_v = draw_matrix(&mut rng);
        let zeros = vec![F::zero(); d];
        ModelParams::new(w_q, zeros.clone(), w_k, zeros.clone(), w_v, zeros, dropout_rate)
    }

    /// All-zero parameters. The gate is identically zero, so the hop reduces
    /// to `y = q - c`; useful as an untrained baseline.
    pub fn zeros(d: usize, dropout_rate: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension);
        }
        let z = vec![F::zero(); d];
        ModelParams::new(
            Matrix::zeros(d, d),
            z.clone(),
            Matrix::zeros(d, d),
            z.clone(),
            Matrix::zeros(d, d),
            z,
            dropout_rate,
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub(crate) fn tensors(&self) -> [&[F]; 6] {
        [self.w_q.data(), &self.b_q, self.w_k.data(), &self.b_k, self.w_v.data(), &self.b_v]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [F]; 6] {
        [
            self.w_q.data_mut(),
            &mut self.b_q,
            self.w_k.data_mut(),
            &mut self.b_k,
            self.w_v.data_mut(),
            &mut self.b_v,
        ]
    }

    pub fn convert<G: Scalar>(&self) -> ModelParams<G> {
        let conv_m = |m: &Matrix<F>| {
            Matrix::from_rows(
                m.rows(),
                m.cols(),
                m.data().iter().map(|v| G::of_f64(v.as_f64())).collect(),
            )
            .expect("same shape")
        };
        let conv_v = |v: &[F]| v.iter().map(|x| G::of_f64(x.as_f64())).collect::<Vec<G>>();
        ModelParams {
            d: self.d,
            w_q: conv_m(&self.w_q),
            b_q: conv_v(&self.b_q),
            w_k: conv_m(&self.w_k),
            b_k: conv_v(&self.b_k),
            w_v: conv_m(&self.w_v),
            b_v: conv_v(&self.b_v),
            dropout_rate: self.dropout_rate,
        }
    }

    /// Checkpoint layout: magic "THM1", u32 version, u32 dim, f32 dropout
    /// rate, then W_Q, b_Q, W_K, b_K, W_V, b_V as little-endian f32
    /// (matrices row-major). Values are stored at f32 precision regardless
    /// of the in-memory scalar type.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&(self.dropout_rate as f32).to_le_bytes())?;
        for tensor in self.tensors() {
            for v in tensor {
                w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
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
        let version = r.read_u32(&label, "version")?;
        if version != VERSION {
            return Err(Error::format(&label, 4, format!("unsupported version {version}")));
        }
        let d = r.read_u32(&label, "dimension")? as usize;
        if d == 0 {
            return Err(Error::format(&label, 8, "dimension must be at least 1"));
        }
        let dropout_rate = r.read_f32(&label, "dropout rate")? as f64;

        let read_tensor = |r: &mut Offsets<_>, len: usize, what: &str| -> Result<Vec<F>> {
            let start = r.offset;
            let mut buf = vec![0u8; len * 4];
            r.read_exact_at(&mut buf, &label, what)?;
            let vals: Vec<F> = buf
                .chunks_exact(4)
                .map(|c| F::of_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
                .collect();
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(&label, start, format!("non-finite value in {what}")));
            }
            Ok(vals)
        };
        let w_q = read_tensor(&mut r, d * d, "W_Q")?;
        let b_q = read_tensor(&mut r, d, "b_Q")?;
        let w_k = read_tensor(&mut r, d * d, "W_K")?;
        let b_k = read_tensor(&mut r, d, "b_K")?;
        let w_v = read_tensor(&mut r, d * d, "W_V")?;
        let b_v = read_tensor(&mut r, d, "b_V")?;
        r.expect_eof(&label)?;

        ModelParams::new(
            Matrix::from_rows(d, d, w_q)?,
            b_q,
            Matrix::from_rows(d, d, w_k)?,
            b_k,
            Matrix::from_rows(d, d, w_v)?,
            b_v,
            dropout_rate,
        )
    }
}

/// Every intermediate of one forward pass, kept for the backward pass and
/// for inspection in tests.
#[derive(Clone, Debug)]
pub struct ForwardTrace<F: Scalar> {
    pub q: Vec<F>,
    pub c: Vec<F>,
    pub q_proj: Vec<F>,
    pub k_proj: Vec<F>,
    pub v_proj: Vec<F>,
    pub attn_logits: Vec<F>,
    pub attn_weights: Vec<F>,
    pub gate_out: Vec<F>,
    pub next_q: Vec<F>,
    /// Inverted-dropout mask (entries 0 or 1/(1-p)); `None` in inference.
    pub dropout_mask: Option<Vec<F>>,
}

/// Parameter gradients; same shapes as [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<F: Scalar> {
    pub w_q: Matrix<F>,
    pub b_q: Vec<F>,
    pub w_k: Matrix<F>,
    pub b_k: Vec<F>,
    pub w_v: Matrix<F>,
    pub b_v: Vec<F>,
}

impl<F: Scalar> ParamGrads<F> {
    pub fn zeros(d: usize) -> Self {
        ParamGrads {
            w_q: Matrix::zeros(d, d),
            b_q: vec![F::zero(); d],
            w_k: Matrix::zeros(d, d),
            b_k: vec![F::zero(); d],
            w_v: Matrix::zeros(d, d),
            b_v: vec![F::zero(); d],
        }
    }

    pub(crate) fn tensors(&self) -> [&[F]; 6] {
        [self.w_q.data(), &self.b_q, self.w_k.data(), &self.b_k, self.w_v.data(), &self.b_v]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [F]; 6] {
        [
            self.w_q.data_mut(),
            &mut self.b_q,
            self.w_k.data_mut(),
            &mut self.b_k,
            self.w_v.data_mut(),
            &mut self.b_v,
        ]
    }

    pub fn add_assign(&mut self, other: &ParamGrads<F>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::linalg::add_assign(a, b);
        }
    }

    pub fn scale_assign(&mut self, s: F) {
        for t in self.tensors_mut() {
            crate::linalg::scale_assign(t, s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Gradients flowing out of one hop.
#[derive(Clone, Debug)]
pub struct BackwardResult<F: Scalar> {
    pub grads: ParamGrads<F>,
    pub grad_q: Vec<F>,
    pub grad_c: Vec<F>,
}

fn check_dims<F: Scalar>(params: &ModelParams<F>, q: &Embedding<F>, c: &Embedding<F>) -> Result<()> {
    if q.dim() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: q.dim() });
    }
    if c.dim() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, got: c.dim() });
    }
    Ok(())
}

fn forward<F: Scalar>(
    params: &ModelParams<F>,
    q: &Embedding<F>,
    c: &Embedding<F>,
    dropout_mask: Option<Vec<F>>,
) -> Result<(Embedding<F>, ForwardTrace<F>)> {
    check_dims(params, q, c)?;
    let d = params.d;
    let qs = q.as_slice();
    let cs = c.as_slice();

    let mut q_proj = params.w_q.matvec(qs);
    crate::linalg::add_assign(&mut q_proj, &params.b_q);
    let mut k_proj = params.w_k.matvec(cs);
    crate::linalg::add_assign(&mut k_proj, &params.b_k);
    let mut v_proj = params.w_v.matvec(cs);
    crate::linalg::add_assign(&mut v_proj, &params.b_v);

    let inv_sqrt_d = F::one() / F::of_usize(d).sqrt();
    let attn_logits: Vec<F> =
        (0..d).map(|i| q_proj[i] * k_proj[i] * inv_sqrt_d).collect();
    let attn_weights = softmax(&attn_logits);
    let gate_out: Vec<F> = (0..d).map(|i| attn_weights[i] * v_proj[i]).collect();

    let next_q: Vec<F> = match &dropout_mask {
        Some(mask) => (0..d).map(|i| qs[i] - cs[i] + gate_out[i] * mask[i]).collect(),
        None => (0..d).map(|i| qs[i] - cs[i] + gate_out[i]).collect(),
    };
    let next_q_emb = Embedding::new(next_q.clone())
        .map_err(|_| Error::Numeric("non-finite value in next-query forward".into()))?;

    Ok((
        next_q_emb,
        ForwardTrace {
            q: qs.to_vec(),
            c: cs.to_vec(),
            q_proj,
            k_proj,
            v_proj,
            attn_logits,
            attn_weights,
            gate_out,
            next_q,
            dropout_mask,
        },
    ))
}

/// Gate output alone (inference mode): `g = softmax(q'.k'/sqrt(d)) . v'`.
pub fn update_gate<F: Scalar>(
    params: &ModelParams<F>,
    q: &Embedding<F>,
    c: &Embedding<F>,
) -> Result<(Embedding<F>, ForwardTrace<F>)> {
    let (_, trace) = forward(params, q, c, None)?;
    let gate = Embedding::new(trace.gate_out.clone())
        .map_err(|_| Error::Numeric("non-finite value in gate output".into()))?;
    Ok((gate, trace))
}

/// Next-hop query, inference mode (no dropout).
pub fn next_query<F: Scalar>(
    params: &ModelParams<F>,
    q: &Embedding<F>,
    c: &Embedding<F>,
) -> Result<(Embedding<F>, ForwardTrace<F>)> {
    forward(params, q, c, None)
}

/// Next-hop query, training mode: an inverted-dropout mask (rate
/// `params.dropout_rate`) multiplies the gate output before the residual
/// addition. With rate 0 this is bitwise identical to inference.
pub fn next_query_training<F: Scalar, R: Rng>(
    params: &ModelParams<F>,
    q: &Embedding<F>,
    c: &Embedding<F>,
    rng: &mut R,
) -> Result<(Embedding<F>, ForwardTrace<F>)> {
    check_dims(params, q, c)?;
    let p = params.dropout_rate;
    let keep_scale = F::of_f64(1.0 / (1.0 - p));
    let mask: Vec<F> = (0..params.d)
        .map(|_| if rng.gen::<f64>() < p { F::zero() } else { keep_scale })
        .collect();
    forward(params, q, c, Some(mask))
}

/// Backward pass through one hop.
///
/// `upstream` is dL/dy for the hop output y. Returns parameter gradients
/// plus dL/dq and dL/dc. All formulas are exact derivatives of the forward
/// definition; the softmax term uses the full Jacobian
/// `dz = w . (dw - (w . dw) 1)`.
pub fn backward<F: Scalar>(
    params: &ModelParams<F>,
    trace: &ForwardTrace<F>,
    upstream: &[F],
) -> Result<BackwardResult<F>> {
    let d = params.d;
    if upstream.len() != d || trace.q.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: upstream.len() });
    }
    let w = &trace.attn_weights;
    let inv_sqrt_d = F::one() / F::of_usize(d).sqrt();

    // Through dropout (identity in inference).
    let dgate: Vec<F> = match &trace.dropout_mask {
        Some(mask) => (0..d).map(|i| upstream[i] * mask[i]).collect(),
        None => upstream.to_vec(),
    };

    // g = w . v'
    let dweights: Vec<F> = (0..d).map(|i| dgate[i] * trace.v_proj[i]).collect();
    let dv_proj: Vec<F> = (0..d).map(|i| dgate[i] * w[i]).collect();

    // Softmax Jacobian: dz_i = w_i (dw_i - sum_j w_j dw_j)
    let mut wdot = F::zero();
    for i in 0..d {
        wdot = wdot + w[i] * dweights[i];
    }
    let dlogits: Vec<F> = (0..d).map(|i| w[i] * (dweights[i] - wdot)).collect();

    // z = q' . k' / sqrt(d)
    let dq_proj: Vec<F> = (0..d).map(|i| dlogits[i] * trace.k_proj[i] * inv_sqrt_d).collect();
    let dk_proj: Vec<F> = (0..d).map(|i| dlogits[i] * trace.q_proj[i] * inv_sqrt_d).collect();

    let mut grads = ParamGrads::zeros(d);
    grads.w_q.set_outer(&dq_proj, &trace.q);
    grads.b_q.copy_from_slice(&dq_proj);
    grads.w_k.set_outer(&dk_proj, &trace.c);
    grads.b_k.copy_from_slice(&dk_proj);
    grads.w_v.set_outer(&dv_proj, &trace.c);
    grads.b_v.copy_from_slice(&dv_proj);

    // y = q - c + g: the residual couples q and c directly.
    let mut grad_q = params.w_q.matvec_t(&dq_proj);
    let mut grad_c = params.w_k.matvec_t(&dk_proj);
    let wv_term = params.w_v.matvec_t(&dv_proj);
    for i in 0..d {
        grad_q[i] = grad_q[i] + upstream[i];
        grad_c[i] = grad_c[i] + wv_term[i] - upstream[i];
    }

    if !grads.is_finite()
        || grad_q.iter().any(|v| !v.is_finite())
        || grad_c.iter().any(|v| !v.is_finite())
    {
        return Err(Error::Numeric("non-finite gradient in backward pass".into()));
    }
    Ok(BackwardResult { grads, grad_q, grad_c })
}
