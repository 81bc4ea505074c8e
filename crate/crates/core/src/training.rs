//! Variational training of the latent residual model.
//!
//! The posterior factorizes into `q(y0 | x_{0:n_cond})` (MLP on the first encoded
//! frames) and a filtering `q(z_t | x_{0:t})` (LSTM over encoded frames); states
//! follow deterministically from the residual dynamics. The loss minimized is
//! the negative ELBO plus `lambda` times the residual norm penalty.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::diff::{gaussian_sample, Adam, DiagGaussian, ParamGrads, ParamStore, Tape, Tensor, Var};
use crate::dynamics::{Model, ModelConfig};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::rng::{self, derive_seed, normal_tensor, rng_from, Rng};
use crate::video::VideoTensor;

/// How the residual penalty measures `f(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    /// Unsquared Euclidean norm.
    #[default]
    L2,
    SquaredL2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub lambda: f64,
    pub adam: Adam,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
    pub penalty: Penalty,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            lambda: 1e-2,
            adam: Adam::default(),
            batch_size: 16,
            steps: 2000,
            seed: 0,
            penalty: Penalty::L2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.batch_size == 0 || !(self.adam.lr > 0.0) {
            return Err(invalid("batch_size and learning rate must be positive"));
        }
        Ok(())
    }
}

/// Everything sampled from the posterior for one sequence.
#[derive(Debug, Clone)]
pub struct PosteriorPass {
    pub encodings: Vec<Var>,
    pub q_y0: DiagGaussian,
    /// `q(z_t | x_{0:t})` for `t = 1..len`.
    pub q_z: Vec<DiagGaussian>,
    /// Sampled integer-time states `y_0..y_{len-1}`.
    pub states: Vec<Var>,
    pub draws: Vec<Var>,
    /// Residuals of every Euler sub-step, grouped per unit step.
    pub residuals: Vec<Vec<Var>>,
    pub substeps: usize,
}

/// Loss terms in minimization form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl_y0: f64,
    pub kl_z: f64,
    pub penalty: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.recon += o.recon;
        self.kl_y0 += o.kl_y0;
        self.kl_z += o.kl_z;
        self.penalty += o.penalty;
        self.total += o.total;
    }

    fn scale(&mut self, f: f64) {
        self.recon *= f;
        self.kl_y0 *= f;
        self.kl_z *= f;
        self.penalty *= f;
        self.total *= f;
    }
}

/// Tape handles of the loss terms.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub recon: Var,
    pub kl_y0: Var,
    pub kl_z: Var,
    pub penalty: Var,
    pub total: Var,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            recon: tape.value(self.recon).item(),
            kl_y0: tape.value(self.kl_y0).item(),
            kl_z: tape.value(self.kl_z).item(),
            penalty: tape.value(self.penalty).item(),
            total: tape.value(self.total).item(),
        }
    }
}

/// Closed-form `KL(q || p)` between diagonal Gaussians, summed over coordinates.
pub fn kl_diag_gaussian(tape: &mut Tape, q: DiagGaussian, p: DiagGaussian) -> Result<Var> {
    let (qs, ps) = (tape.value(q.std).shape(), tape.value(p.std).shape());
    if qs != ps || tape.value(q.mean).shape() != tape.value(p.mean).shape() {
        return Err(Error::Shape {
            op: "kl_diag_gaussian",
            lhs: qs.to_vec(),
            rhs: ps.to_vec(),
        });
    }
    let log_ps = tape.log(p.std)?;
    let log_qs = tape.log(q.std)?;
    let log_ratio = tape.sub(log_ps, log_qs)?;
    let q_var = tape.square(q.std)?;
    let diff = tape.sub(q.mean, p.mean)?;
    let diff2 = tape.square(diff)?;
    let num = tape.add(q_var, diff2)?;
    let p_var = tape.square(p.std)?;
    let den = tape.scale(p_var, 2.0)?;
    let ratio = tape.div(num, den)?;
    let terms = tape.add(log_ratio, ratio)?;
    let terms = tape.shift(terms, -0.5)?;
    tape.sum(terms)
}

/// Evenly spaced frame indices with a random phase: `phase + i * (len / k)`.
pub fn content_indices(len: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k == 0 || k > len {
        return Err(invalid(format!("cannot pick {k} content frames from {len}")));
    }
    let spacing = len / k;
    let phase = rng.random_range(0..spacing);
    Ok((0..k).map(|i| phase + i * spacing).collect())
}

fn draw(tape: &mut Tape, g: DiagGaussian, rng: &mut Rng) -> Result<Var> {
    let shape = tape.value(g.mean).shape().to_vec();
    gaussian_sample(tape, g, normal_tensor(rng, &shape))
}

/// Encodes every frame once and samples one full latent sequence from the posterior.
pub fn infer_posterior(model: &Model, tape: &mut Tape, store: &ParamStore, x: &VideoTensor, rng: &mut Rng) -> Result<PosteriorPass> {
    let cfg = &model.cfg;
    if x.len() < cfg.n_cond.max(cfg.k_content) || x.len() < 2 {
        return Err(invalid(format!(
            "sequence of {} frames shorter than n_cond={} / k={}",
            x.len(),
            cfg.n_cond,
            cfg.k_content
        )));
    }
    if x.frame_dims() != cfg.frame_dims() {
        return Err(Error::Shape {
            op: "infer_posterior",
            lhs: x.frame_dims().to_vec(),
            rhs: cfg.frame_dims().to_vec(),
        });
    }
    let encodings = (0..x.len())
        .map(|t| model.encode_frame(tape, store, &x.frame(t)))
        .collect::<Result<Vec<_>>>()?;
    let q_y0 = model.posterior_y0(tape, store, &encodings)?;
    let mut y = draw(tape, q_y0, rng)?;
    let mut states = Vec::with_capacity(x.len());
    states.push(y);
    let mut q_z = Vec::with_capacity(x.len() - 1);
    let mut draws = Vec::with_capacity(x.len() - 1);
    let mut residuals = Vec::with_capacity(x.len() - 1);
    let mut lstm = model.filter_start(tape, store, encodings[0])?;
    for &enc in &encodings[1..] {
        let (q, next) = model.filter_step(tape, store, enc, lstm)?;
        lstm = next;
        let z = draw(tape, q, rng)?;
        let steps = model.advance_unit(tape, store, y, z, cfg.substeps)?;
        y = steps.last().unwrap().state;
        residuals.push(steps.iter().map(|s| s.residual).collect());
        q_z.push(q);
        draws.push(z);
        states.push(y);
    }
    Ok(PosteriorPass {
        encodings,
        q_y0,
        q_z,
        states,
        draws,
        residuals,
        substeps: cfg.substeps,
    })
}

/// Negative ELBO plus `lambda` times the residual penalty.
///
/// The penalty sums `dt * |f(y, z)|` over every Euler sub-step, which is the
/// plain per-transition norm when `substeps = 1`.
#[allow(clippy::too_many_arguments)]
pub fn elbo_loss(
    model: &Model,
    tape: &mut Tape,
    store: &ParamStore,
    x: &VideoTensor,
    pass: &PosteriorPass,
    w: Var,
    lambda: f64,
    penalty: Penalty,
) -> Result<LossVars> {
    if pass.states.len() != x.len() {
        return Err(Error::Shape {
            op: "elbo_loss",
            lhs: alloc::vec![pass.states.len()],
            rhs: alloc::vec![x.len()],
        });
    }
    let mut recon_terms = Vec::with_capacity(x.len());
    for (t, &y) in pass.states.iter().enumerate() {
        let pred = model.decode(tape, store, y, w)?;
        let target = tape.constant(x.frame(t))?;
        let diff = tape.sub(target, pred)?;
        let sq = tape.square(diff)?;
        recon_terms.push(tape.sum(sq)?);
    }
    let recon = tape.sum_n(&recon_terms)?;
    let recon = tape.scale(recon, 0.5)?;

    let p0 = model.initial_prior(tape)?;
    let kl_y0 = kl_diag_gaussian(tape, pass.q_y0, p0)?;

    let mut kl_terms = Vec::with_capacity(pass.q_z.len());
    for (t, &q) in pass.q_z.iter().enumerate() {
        let prior = model.transition_prior(tape, store, pass.states[t])?;
        kl_terms.push(kl_diag_gaussian(tape, q, prior)?);
    }
    let zero = tape.constant(Tensor::scalar(0.0))?;
    let kl_z = if kl_terms.is_empty() { zero } else { tape.sum_n(&kl_terms)? };

    let dt = 1.0 / pass.substeps as f64;
    let mut pen_terms = Vec::new();
    for r in pass.residuals.iter().flatten() {
        let n = match penalty {
            Penalty::L2 => tape.l2_norm(*r)?,
            Penalty::SquaredL2 => {
                let sq = tape.square(*r)?;
                tape.sum(sq)?
            }
        };
        pen_terms.push(tape.scale(n, dt)?);
    }
    let pen = if pen_terms.is_empty() { zero } else { tape.sum_n(&pen_terms)? };

    let neg_elbo = tape.add(recon, kl_y0)?;
    let neg_elbo = tape.add(neg_elbo, kl_z)?;
    let weighted = tape.scale(pen, lambda)?;
    let total = tape.add(neg_elbo, weighted)?;
    Ok(LossVars {
        recon,
        kl_y0,
        kl_z,
        penalty: pen,
        total,
    })
}

/// Builds the full loss of one sequence on a fresh tape.
#[allow(clippy::too_many_arguments)]
pub fn sequence_loss(
    model: &Model,
    tape: &mut Tape,
    store: &ParamStore,
    x: &VideoTensor,
    content_idx: &[usize],
    rng: &mut Rng,
    lambda: f64,
    penalty: Penalty,
) -> Result<LossVars> {
    let pass = infer_posterior(model, tape, store, x, rng)?;
    let encs: Vec<Var> = content_idx
        .iter()
        .map(|&i| pass.encodings.get(i).copied().ok_or_else(|| invalid(format!("content index {i} out of range"))))
        .collect::<Result<_>>()?;
    let w = model.content_from_encodings(tape, store, &encs)?;
    elbo_loss(model, tape, store, x, &pass, w, lambda, penalty)
}

/// Loss and parameter gradients of one training example.
pub fn example_gradients(
    model: &Model,
    store: &ParamStore,
    x: &VideoTensor,
    seed: u64,
    lambda: f64,
    penalty: Penalty,
) -> Result<(LossBreakdown, ParamGrads)> {
    let mut rng = rng_from(seed);
    let idx = content_indices(x.len(), model.cfg.k_content, &mut rng)?;
    let mut tape = Tape::new();
    let loss = sequence_loss(model, &mut tape, store, x, &idx, &mut rng, lambda, penalty)?;
    let breakdown = loss.breakdown(&tape);
    let grads = tape.backward(loss.total)?.into_param_grads();
    Ok((breakdown, grads))
}

/// Batch-averaged loss terms of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub loss: LossBreakdown,
}

/// Stateful optimizer loop over an in-memory dataset.
#[derive(Debug)]
pub struct Trainer<'a> {
    model: Model,
    store: ParamStore,
    cfg: TrainConfig,
    data: &'a [VideoTensor],
    step: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, data: &'a [VideoTensor]) -> Result<Self> {
        cfg.validate()?;
        let first = data.first().ok_or_else(|| invalid("training dataset is empty"))?;
        for (i, v) in data.iter().enumerate() {
            if v.dims() != first.dims() {
                return Err(invalid(format!("sequence {i} has dims {:?}, expected {:?}", v.dims(), first.dims())));
            }
        }
        if first.frame_dims() != cfg.model.frame_dims() {
            return Err(Error::Shape {
                op: "train",
                lhs: first.frame_dims().to_vec(),
                rhs: cfg.model.frame_dims().to_vec(),
            });
        }
        if first.len() < cfg.model.n_cond.max(cfg.model.k_content) || first.len() < 2 {
            return Err(invalid(format!("sequences of {} frames are too short", first.len())));
        }
        let (model, store) = Model::new(cfg.model.clone(), cfg.seed)?;
        Ok(Self { model, store, cfg, data, step: 0 })
    }

    /// Continues from existing parameter values (names and shapes must match).
    pub fn with_params(mut self, store: ParamStore) -> Result<Self> {
        for (name, t) in store.iter() {
            self.store.set_value(name, t.shape(), t.data().to_vec())?;
        }
        Ok(self)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    pub fn into_parts(self) -> (Model, ParamStore) {
        (self.model, self.store)
    }

    /// Minibatch indices for a step, drawn without replacement.
    fn batch(&self) -> Vec<usize> {
        let mut rng = rng_from(derive_seed(self.cfg.seed, &[rng::stream::TRAIN_STEP, self.step]));
        let n = self.data.len();
        let amount = self.cfg.batch_size.min(n);
        rand::seq::index::sample(&mut rng, n, amount).into_vec()
    }

    pub fn step<E: Executor>(&mut self, exec: &E) -> Result<StepMetrics> {
        let batch = self.batch();
        let step = self.step;
        let seed = self.cfg.seed;
        let (model, store, data, lambda, penalty) = (&self.model, &self.store, self.data, self.cfg.lambda, self.cfg.penalty);
        let results = exec.map(batch.len(), |slot| {
            let ex_seed = derive_seed(seed, &[rng::stream::TRAIN_EXAMPLE, step, slot as u64]);
            example_gradients(model, store, &data[batch[slot]], ex_seed, lambda, penalty)
        });

        self.store.zero_grads();
        let mut mean = LossBreakdown::default();
        for r in results {
            let (loss, grads) = r.map_err(|e| match e {
                Error::NonFinite { op } => Error::Diverged {
                    step,
                    detail: format!("non-finite value in {op}"),
                },
                other => other,
            })?;
            if loss.kl_y0 < -1e-9 || loss.kl_z < -1e-9 {
                return Err(Error::Diverged {
                    step,
                    detail: format!("negative KL (y0 {}, z {})", loss.kl_y0, loss.kl_z),
                });
            }
            if !loss.total.is_finite() {
                return Err(Error::Diverged {
                    step,
                    detail: format!("loss {}", loss.total),
                });
            }
            mean.add(&loss);
            grads.accumulate_into(&mut self.store)?;
        }
        let scale = 1.0 / batch.len() as f64;
        mean.scale(scale);
        self.store.scale_grads(scale);
        self.store.adam_step(&self.cfg.adam);
        self.step += 1;
        Ok(StepMetrics { step, loss: mean })
    }
}

/// Trained parameters and the per-step log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub store: ParamStore,
    pub log: Vec<StepMetrics>,
}

pub fn train<E: Executor>(data: &[VideoTensor], cfg: TrainConfig, exec: &E) -> Result<TrainOutcome> {
    let steps = cfg.steps;
    let mut trainer = Trainer::new(cfg, data)?;
    let mut log = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        log.push(trainer.step(exec)?);
    }
    let (model, store) = trainer.into_parts();
    Ok(TrainOutcome { model, store, log })
}

fn log_normal(x: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    const LOG_2PI: f64 = 1.837_877_066_409_345_5;
    x.iter()
        .zip(mean)
        .zip(std)
        .map(|((x, m), s)| {
            let u = (x - m) / s;
            -0.5 * (u * u + LOG_2PI) - libm::log(*s)
        })
        .sum()
}

/// Importance-sampled estimate of `log p(x | w)` against the single-sample ELBO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodEstimate {
    /// `log mean_k exp(log_w_k)` over the posterior draws.
    pub log_likelihood: f64,
    /// Mean and standard error of the per-draw ELBO (analytic KL).
    pub elbo_mean: f64,
    pub elbo_std_err: f64,
}

/// Both quantities drop the same Gaussian pixel-likelihood constant.
pub fn importance_log_likelihood(model: &Model, store: &ParamStore, x: &VideoTensor, content_idx: &[usize], samples: usize, seed: u64) -> Result<LikelihoodEstimate> {
    if samples == 0 {
        return Err(invalid("need at least one importance sample"));
    }
    let mut log_w = Vec::with_capacity(samples);
    let mut elbos = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut rng = rng_from(derive_seed(seed, &[rng::stream::SAMPLE, s as u64]));
        let mut tape = Tape::new();
        let pass = infer_posterior(model, &mut tape, store, x, &mut rng)?;
        let encs: Vec<Var> = content_idx.iter().map(|&i| pass.encodings[i]).collect();
        let w = model.content_from_encodings(&mut tape, store, &encs)?;
        let loss = elbo_loss(model, &mut tape, store, x, &pass, w, 0.0, Penalty::L2)?;
        let b = loss.breakdown(&tape);
        elbos.push(-(b.recon + b.kl_y0 + b.kl_z));

        let v = |v: Var| tape.value(v).data();
        let y0 = v(pass.states[0]);
        let mut lw = -b.recon;
        lw += log_normal(y0, &alloc::vec![0.0; y0.len()], &alloc::vec![1.0; y0.len()]);
        lw -= log_normal(y0, v(pass.q_y0.mean), v(pass.q_y0.std));
        for (t, q) in pass.q_z.iter().enumerate() {
            let z = tape.value(pass.draws[t]).data().to_vec();
            let prior = model.transition_prior(&mut tape, store, pass.states[t])?;
            lw += log_normal(&z, tape.value(prior.mean).data(), tape.value(prior.std).data());
            lw -= log_normal(&z, tape.value(q.mean).data(), tape.value(q.std).data());
        }
        log_w.push(lw);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(log_w.iter().map(|l| libm::exp(l - max)).sum::<f64>() / samples as f64);
    let n = samples as f64;
    let mean = elbos.iter().sum::<f64>() / n;
    let var = if samples > 1 {
        elbos.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(LikelihoodEstimate {
        log_likelihood: lse,
        elbo_mean: mean,
        elbo_std_err: libm::sqrt(var / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;

    fn gauss(tape: &mut Tape, m: &[f64], s: &[f64]) -> DiagGaussian {
        DiagGaussian {
            mean: tape.constant(Tensor::row(m.to_vec())).unwrap(),
            std: tape.constant(Tensor::row(s.to_vec())).unwrap(),
        }
    }

    #[test]
    fn kl_closed_form_examples() {
        let mut tape = Tape::new();
        let q = gauss(&mut tape, &[0.3, -1.0], &[0.5, 2.0]);
        let k = kl_diag_gaussian(&mut tape, q, q).unwrap();
        assert!(tape.value(k).item().abs() < 1e-15);

        let q = gauss(&mut tape, &[1.0], &[1.0]);
        let p = gauss(&mut tape, &[0.0], &[1.0]);
        let k = kl_diag_gaussian(&mut tape, q, p).unwrap();
        assert!((tape.value(k).item() - 0.5).abs() < 1e-15);

        // variance 4 against standard normal: log(1/2) + 4/2 - 1/2
        let q = gauss(&mut tape, &[0.0], &[2.0]);
        let k = kl_diag_gaussian(&mut tape, q, p).unwrap();
        assert!((tape.value(k).item() - 0.806_852_819_440_054_7).abs() < 1e-12);

        let wide = gauss(&mut tape, &[0.0, 0.0], &[1.0, 1.0]);
        assert!(kl_diag_gaussian(&mut tape, q, wide).is_err());
    }

    #[test]
    fn content_indices_evenly_spaced() {
        let mut rng = rng_from(3);
        for _ in 0..50 {
            let idx = content_indices(12, 2, &mut rng).unwrap();
            assert_eq!(idx[1] - idx[0], 6);
            assert!(idx[0] < 6);
        }
        assert!(content_indices(3, 4, &mut rng).is_err());
    }

    fn tiny() -> ModelConfig {
        ModelConfig {
            bands: 1,
            height: 8,
            width: 8,
            channels: vec![2, 4],
            enc_width: 6,
            d_y: 4,
            d_z: 4,
            d_w: 5,
            hidden: 8,
            lstm_width: 6,
            n_cond: 2,
            k_content: 2,
            substeps: 2,
        }
    }

    fn video(seed: u64, len: usize) -> VideoTensor {
        let mut r = rng_from(seed);
        let t = normal_tensor(&mut r, &[len, 1, 8, 8]);
        let data = t.data().iter().map(|v| crate::diff::sigmoid(*v)).collect();
        VideoTensor::new([len, 1, 8, 8], data).unwrap()
    }

    #[test]
    fn posterior_counts_and_zero_residual_states() {
        let (model, store) = Model::new(tiny(), 0).unwrap();
        let x = video(1, 5);
        let mut tape = Tape::new();
        let pass = infer_posterior(&model, &mut tape, &store, &x, &mut rng_from(0)).unwrap();
        assert_eq!(pass.q_z.len(), 4);
        assert_eq!(pass.states.len(), 5);
        for s in &pass.states {
            assert_eq!(tape.value(*s), tape.value(pass.states[0]));
        }
        let short = video(1, 1);
        assert!(infer_posterior(&model, &mut tape, &store, &short, &mut rng_from(0)).is_err());
    }

    #[test]
    fn posterior_filters() {
        let (model, store) = Model::new(tiny(), 0).unwrap();
        let x = video(2, 6);
        let head = x.frames(0, 4).unwrap();
        let mut t1 = Tape::new();
        let full = infer_posterior(&model, &mut t1, &store, &x, &mut rng_from(9)).unwrap();
        let mut t2 = Tape::new();
        let part = infer_posterior(&model, &mut t2, &store, &head, &mut rng_from(9)).unwrap();
        for t in 0..3 {
            assert_eq!(t1.value(full.q_z[t].mean), t2.value(part.q_z[t].mean));
            assert_eq!(t1.value(full.q_z[t].std), t2.value(part.q_z[t].std));
        }
    }

    #[test]
    fn lambda_zero_is_negative_elbo() {
        let (model, store) = Model::new(tiny(), 0).unwrap();
        let x = video(3, 4);
        let mut tape = Tape::new();
        let l = sequence_loss(&model, &mut tape, &store, &x, &[0, 2], &mut rng_from(1), 0.0, Penalty::L2).unwrap();
        let b = l.breakdown(&tape);
        assert_eq!(b.total, b.recon + b.kl_y0 + b.kl_z);
        assert!(b.kl_y0 >= 0.0 && b.kl_z >= 0.0);
    }

    #[test]
    fn perfect_fit_leaves_only_penalty() {
        // frames equal to the decoder output and q = p everywhere
        let (model, store) = Model::new(tiny(), 0).unwrap();
        let mut tape = Tape::new();
        let x0 = video(4, 3);
        let mut pass = infer_posterior(&model, &mut tape, &store, &x0, &mut rng_from(2)).unwrap();
        let w = tape.constant(Tensor::zeros(&[1, 5])).unwrap();
        let frames: Vec<Tensor> = pass
            .states
            .iter()
            .map(|&y| {
                let f = model.decode(&mut tape, &store, y, w).unwrap();
                tape.value(f).clone()
            })
            .collect();
        let x = VideoTensor::from_frames(&frames, [1, 8, 8]).unwrap();
        pass.q_y0 = model.initial_prior(&mut tape).unwrap();
        for t in 0..pass.q_z.len() {
            pass.q_z[t] = model.transition_prior(&mut tape, &store, pass.states[t]).unwrap();
        }
        let l = elbo_loss(&model, &mut tape, &store, &x, &pass, w, 3.0, Penalty::L2).unwrap();
        let b = l.breakdown(&tape);
        assert_eq!(b.recon, 0.0);
        assert!(b.kl_y0.abs() < 1e-15 && b.kl_z.abs() < 1e-15);
        assert!((b.total - 3.0 * b.penalty).abs() < 1e-15);
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<VideoTensor> = (0..3).map(|i| video(i, 4)).collect();
        let cfg = TrainConfig {
            model: tiny(),
            batch_size: 2,
            steps: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(&data, cfg.clone(), &Sequential).unwrap();
        let b = train(&data, cfg, &Sequential).unwrap();
        assert_eq!(a.log, b.log);
        for ((_, x), (_, y)) in a.store.iter().zip(b.store.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn trainer_rejects_bad_data() {
        let cfg = TrainConfig { model: tiny(), ..TrainConfig::default() };
        assert!(Trainer::new(cfg.clone(), &[]).is_err());
        let mixed = [video(0, 4), video(1, 5)];
        assert!(Trainer::new(cfg.clone(), &mixed).is_err());
        let bad = TrainConfig { lambda: -1.0, ..cfg };
        assert!(Trainer::new(bad, &[video(0, 4)]).is_err());
    }
}
