//! Central finite-difference validation of the analytic backward pass.
//!
//! Each trial draws random parameters and inputs, evaluates a scalar loss
//! through the forward pass, and compares the analytic gradient of every
//! coordinate (all six parameter tensors plus q and c) against
//! `(L(x+h) - L(x-h)) / 2h`. Trials alternate between a plain linear loss
//! on the hop output and the actual retrieval loss (cosine scores into the
//! contrastive loss), so both the bare hop Jacobian and the full training
//! chain get exercised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::model::{backward, next_query, ModelParams};
use crate::seeding::{derive, SALT_TRIAL};
use crate::training::info_nce_loss;

pub const FD_STEP: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Relative error with a small-magnitude floor: coordinates where both
/// gradients are below the floor compare in absolute terms, which keeps
/// finite-difference roundoff on near-zero coordinates from dominating.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub dim: usize,
    pub trials: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

enum LossSpec {
    /// L = u . y
    Linear { u: Vec<f64> },
    /// L = contrastive loss over cosine scores of y against fixed targets.
    Retrieval { pos: Vec<f64>, negs: Vec<Vec<f64>>, tau: f64 },
}

fn cos(y: &[f64], e: &[f64]) -> f64 {
    dot(y, e) / (norm(y) * norm(e))
}

/// d cos(y, e) / dy = e / (|y||e|) - cos * y / |y|^2
fn dcos_dy(y: &[f64], e: &[f64], scale: f64, acc: &mut [f64]) {
    let ny = norm(y);
    let ne = norm(e);
    let c = dot(y, e) / (ny * ne);
    for i in 0..y.len() {
        acc[i] += scale * (e[i] / (ny * ne) - c * y[i] / (ny * ny));
    }
}

impl LossSpec {
    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            LossSpec::Linear { u } => dot(u, y),
            LossSpec::Retrieval { pos, negs, tau } => {
                let pos_sim = cos(y, pos);
                let neg_sims: Vec<f64> = negs.iter().map(|e| cos(y, e)).collect();
                info_nce_loss(pos_sim, &neg_sims, *tau).expect("valid loss inputs").loss
            }
        }
    }

    fn dloss_dy(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LossSpec::Linear { u } => u.clone(),
            LossSpec::Retrieval { pos, negs, tau } => {
                let pos_sim = cos(y, pos);
                let neg_sims: Vec<f64> = negs.iter().map(|e| cos(y, e)).collect();
                let out = info_nce_loss(pos_sim, &neg_sims, *tau).expect("valid loss inputs");
                let mut dy = vec![0.0; y.len()];
                dcos_dy(y, pos, out.dpos, &mut dy);
                for (e, dneg) in negs.iter().zip(&out.dnegs) {
                    dcos_dy(y, e, *dneg, &mut dy);
                }
                dy
            }
        }
    }
}

fn loss_of(params: &ModelParams<f64>, q: &[f64], c: &[f64], spec: &LossSpec) -> f64 {
    let qe = Embedding::new(q.to_vec()).expect("finite q");
    let ce = Embedding::new(c.to_vec()).expect("finite c");
    let (y, _) = next_query(params, &qe, &ce).expect("forward");
    spec.eval(y.as_slice())
}

fn rand_vec(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

fn rand_unit(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v = rand_vec(d, rng);
        let n = norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Run `trials` finite-difference trials at dimension `dim` and report the
/// worst relative error seen across every parameter and input coordinate.
pub fn gradcheck(dim: usize, trials: usize, seed: u64) -> Result<GradCheckReport> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut max_rel: f64 = 0.0;

    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, SALT_TRIAL, dim as u64, trial as u64));
        let mut params = ModelParams::<f64>::init(dim, rng.gen(), 0.0)?;
        // Nonzero biases so their gradient paths are exercised from a
        // generic point, not from the zero initialization.
        for b in [&mut params.b_q, &mut params.b_k, &mut params.b_v] {
            for v in b.iter_mut() {
                *v = rng.gen::<f64>() * 0.2 - 0.1;
            }
        }
        let q = rand_vec(dim, &mut rng);
        let c = rand_vec(dim, &mut rng);
        let spec = if trial % 2 == 0 {
            LossSpec::Linear { u: rand_vec(dim, &mut rng) }
        } else {
            LossSpec::Retrieval {
                pos: rand_unit(dim, &mut rng),
                negs: (0..3).map(|_| rand_unit(dim, &mut rng)).collect(),
                tau: 0.15,
            }
        };

        // Analytic gradients.
        let qe = Embedding::new(q.clone())?;
        let ce = Embedding::new(c.clone())?;
        let (y, trace) = next_query(&params, &qe, &ce)?;
        let upstream = spec.dloss_dy(y.as_slice());
        let result = backward(&params, &trace, &upstream)?;

        // Parameter coordinates.
        let group_lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        for (g, &len) in group_lens.iter().enumerate() {
            for i in 0..len {
                let orig = params.tensors()[g][i];
                params.tensors_mut()[g][i] = orig + FD_STEP;
                let lp = loss_of(&params, &q, &c, &spec);
                params.tensors_mut()[g][i] = orig - FD_STEP;
                let lm = loss_of(&params, &q, &c, &spec);
                params.tensors_mut()[g][i] = orig;
                let numeric = (lp - lm) / (2.0 * FD_STEP);
                let analytic = result.grads.tensors()[g][i];
                max_rel = max_rel.max(rel_err(analytic, numeric));
            }
        }

        // Input coordinates.
        let mut qv = q.clone();
        for i in 0..dim {
            let orig = qv[i];
            qv[i] = orig + FD_STEP;
            let lp = loss_of(&params, &qv, &c, &spec);
            qv[i] = orig - FD_STEP;
            let lm = loss_of(&params, &qv, &c, &spec);
            qv[i] = orig;
            max_rel = max_rel.max(rel_err(result.grad_q[i], (lp - lm) / (2.0 * FD_STEP)));
        }
        let mut cv = c.clone();
        for i in 0..dim {
            let orig = cv[i];
            cv[i] = orig + FD_STEP;
            let lp = loss_of(&params, &q, &cv, &spec);
            cv[i] = orig - FD_STEP;
            let lm = loss_of(&params, &q, &cv, &spec);
            cv[i] = orig;
            max_rel = max_rel.max(rel_err(result.grad_c[i], (lp - lm) / (2.0 * FD_STEP)));
        }
    }

    Ok(GradCheckReport {
        dim,
        trials,
        max_rel_err: max_rel,
        tolerance: DEFAULT_TOLERANCE,
        pass: max_rel < DEFAULT_TOLERANCE,
    })
}
