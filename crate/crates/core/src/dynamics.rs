//! Latent residual generative model.
//!
//! A low-dimensional state `y` evolves by residual updates driven by a per-step
//! auxiliary draw `z`; frames are decoded from `(y, w)` where `w` is a static
//! content vector. The unit step can be split into `substeps` Euler steps with
//! `z` held fixed, and every intermediate state can be decoded.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::diff::{gaussian_sample, DiagGaussian, ParamStore, Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::nets::{ConvCoderSpec, ConvDecoder, ConvEncoder, GaussianHead, LstmCell, LstmState, Mlp, MlpSpec};
use crate::rng::{self, normal_tensor, rng_from, Rng};
use crate::video::VideoTensor;

/// Architecture and latent sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    /// Encoder stage widths; the decoder mirrors them.
    pub channels: Vec<usize>,
    /// Width of the per-frame encoding.
    pub enc_width: usize,
    pub d_y: usize,
    pub d_z: usize,
    pub d_w: usize,
    /// Hidden width of the MLPs (residual, prior, posterior trunk, content).
    pub hidden: usize,
    pub lstm_width: usize,
    /// Conditioning frames; also the frames `y0` is inferred from.
    pub n_cond: usize,
    /// Frames fed to the content encoder.
    pub k_content: usize,
    /// Euler steps per unit time step (`1/dt`).
    pub substeps: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            bands: 1,
            height: 64,
            width: 64,
            channels: vec![32, 64, 128, 256],
            enc_width: 128,
            d_y: 20,
            d_z: 20,
            d_w: 64,
            hidden: 64,
            lstm_width: 128,
            n_cond: 2,
            k_content: 2,
            substeps: 2,
        }
    }
}

impl ModelConfig {
    pub fn coder_spec(&self) -> ConvCoderSpec {
        ConvCoderSpec {
            bands: self.bands,
            height: self.height,
            width: self.width,
            channels: self.channels.clone(),
            latent: self.enc_width,
        }
    }

    pub fn frame_dims(&self) -> [usize; 3] {
        [self.bands, self.height, self.width]
    }

    pub fn validate(&self) -> Result<()> {
        self.coder_spec().validate()?;
        let sizes = [self.d_y, self.d_z, self.d_w, self.hidden, self.lstm_width, self.n_cond, self.k_content, self.substeps];
        if sizes.contains(&0) {
            return Err(invalid(format!("model sizes must be positive: {self:?}")));
        }
        if self.k_content > self.n_cond {
            return Err(invalid("k_content cannot exceed n_cond (content comes from conditioning frames at test time)"));
        }
        Ok(())
    }
}

/// Content vector and the frame indices it was computed from.
#[derive(Debug, Clone)]
pub struct ContentVar {
    pub w: Var,
    pub sources: Vec<usize>,
}

/// One Euler sub-step: the new state and the residual that produced it.
#[derive(Debug, Clone, Copy)]
pub struct SubStep {
    pub state: Var,
    pub residual: Var,
}

/// Sampled latent path of one generated future.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    /// Integer-time states, starting at the last conditioning time (`h + 1` entries).
    pub states: Vec<Tensor>,
    /// All sub-step states per future unit step (`substeps` entries each, last is integer time).
    pub substates: Vec<Vec<Tensor>>,
    pub draws: Vec<Tensor>,
    /// `(mean, std)` of the prior each draw came from.
    pub priors: Vec<(Tensor, Tensor)>,
    /// `sum_s dt * |f(y, z)|` per unit step.
    pub residual_norms: Vec<f64>,
    pub substeps: usize,
}

/// Output of [`Model::generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub frames: VideoTensor,
    pub trajectory: LatentTrajectory,
    pub content: Tensor,
}

/// Encodings of conditioning frames and the content vector, reusable across samples.
#[derive(Debug, Clone)]
pub struct Conditioning {
    pub encodings: Vec<Tensor>,
    pub content: Tensor,
}

/// All networks of the model. Parameter values live in a separate [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    encoder: ConvEncoder,
    decoder: ConvDecoder,
    content: Mlp,
    y0_trunk: Mlp,
    y0_head: GaussianHead,
    z_lstm: LstmCell,
    z_head: GaussianHead,
    prior_trunk: Mlp,
    prior_head: GaussianHead,
    residual: Mlp,
}

impl Model {
    /// Builds the networks and a freshly initialized parameter store.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<(Self, ParamStore)> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = rng_from(rng::derive_seed(seed, &[rng::stream::INIT]));
        let rng = &mut rng;
        let s = &mut store;
        let e = cfg.enc_width;
        let model = Self {
            encoder: ConvEncoder::new(s, "enc", cfg.coder_spec(), rng)?,
            decoder: ConvDecoder::new(s, "dec", cfg.coder_spec(), cfg.d_y + cfg.d_w, rng)?,
            content: Mlp::new(s, "content", MlpSpec::new(&[e, cfg.hidden, cfg.d_w])?, false, rng)?,
            y0_trunk: Mlp::new(s, "post_y0.trunk", MlpSpec::new(&[cfg.n_cond * e, cfg.hidden])?, false, rng)?,
            y0_head: GaussianHead::new(s, "post_y0.head", cfg.hidden, cfg.d_y, rng)?,
            z_lstm: LstmCell::new(s, "post_z.lstm", e, cfg.lstm_width, rng)?,
            z_head: GaussianHead::new(s, "post_z.head", cfg.lstm_width, cfg.d_z, rng)?,
            prior_trunk: Mlp::new(s, "prior.trunk", MlpSpec::new(&[cfg.d_y, cfg.hidden])?, false, rng)?,
            prior_head: GaussianHead::new(s, "prior.head", cfg.hidden, cfg.d_z, rng)?,
            residual: Mlp::new(s, "residual", MlpSpec::new(&[cfg.d_y + cfg.d_z, cfg.hidden, cfg.hidden, cfg.d_y])?, true, rng)?,
            cfg,
        };
        Ok((model, store))
    }

    /// Parameter names of the residual network `f`.
    pub fn residual_param_names(&self, store: &ParamStore) -> Vec<alloc::string::String> {
        self.residual
            .layers()
            .iter()
            .flat_map(|l| [l.weight, l.bias])
            .map(|id| store.name(id).into())
            .collect()
    }

    pub fn encode_frame(&self, tape: &mut Tape, store: &ParamStore, frame: &Tensor) -> Result<Var> {
        let f = tape.constant(frame.clone())?;
        self.encoder.encode(tape, store, f)
    }

    /// `w = MLP(sum_i enc_i)` over already encoded frames.
    pub fn content_from_encodings(&self, tape: &mut Tape, store: &ParamStore, encodings: &[Var]) -> Result<Var> {
        if encodings.is_empty() {
            return Err(invalid("content_encode needs at least one frame"));
        }
        let pooled = tape.sum_n(encodings)?;
        self.content.forward(tape, store, pooled)
    }

    pub fn content_encode(&self, tape: &mut Tape, store: &ParamStore, frames: &[Tensor]) -> Result<ContentVar> {
        if frames.is_empty() {
            return Err(invalid("content_encode needs at least one frame"));
        }
        let encs = frames
            .iter()
            .map(|f| self.encode_frame(tape, store, f))
            .collect::<Result<Vec<_>>>()?;
        let w = self.content_from_encodings(tape, store, &encs)?;
        Ok(ContentVar { w, sources: (0..frames.len()).collect() })
    }

    /// Standard normal prior on the initial state.
    pub fn initial_prior(&self, tape: &mut Tape) -> Result<DiagGaussian> {
        let mean = tape.constant(Tensor::zeros(&[1, self.cfg.d_y]))?;
        let std = tape.constant(Tensor::full(&[1, self.cfg.d_y], 1.0))?;
        Ok(DiagGaussian { mean, std })
    }

    pub fn transition_prior(&self, tape: &mut Tape, store: &ParamStore, y: Var) -> Result<DiagGaussian> {
        let h = self.prior_trunk.forward(tape, store, y)?;
        let h = tape.tanh(h)?;
        self.prior_head.forward(tape, store, h)
    }

    /// Residual `f(y, z)`.
    pub fn residual(&self, tape: &mut Tape, store: &ParamStore, y: Var, z: Var) -> Result<Var> {
        let yz = tape.concat(&[y, z])?;
        self.residual.forward(tape, store, yz)
    }

    /// `y + dt * f(y, z)`; `dt` must lie in `(0, 1]` with `1/dt` integral.
    pub fn euler_step(&self, tape: &mut Tape, store: &ParamStore, y: Var, z: Var, dt: f64) -> Result<SubStep> {
        let inv = 1.0 / dt;
        if !(dt > 0.0 && dt <= 1.0) || (inv - libm::round(inv)).abs() > 1e-9 {
            return Err(invalid(format!("euler step dt={dt} must be in (0,1] with 1/dt integral")));
        }
        let residual = self.residual(tape, store, y, z)?;
        let step = tape.scale(residual, dt)?;
        let state = tape.add(y, step)?;
        Ok(SubStep { state, residual })
    }

    /// `substeps` Euler steps of size `1/substeps` with `z` fixed; the last state is at integer time.
    pub fn advance_unit(&self, tape: &mut Tape, store: &ParamStore, y: Var, z: Var, substeps: usize) -> Result<Vec<SubStep>> {
        if substeps == 0 {
            return Err(invalid("substeps must be >= 1"));
        }
        let dt = 1.0 / substeps as f64;
        let mut out = Vec::with_capacity(substeps);
        let mut cur = y;
        for _ in 0..substeps {
            let s = self.euler_step(tape, store, cur, z, dt)?;
            cur = s.state;
            out.push(s);
        }
        Ok(out)
    }

    /// Frame emitted from state `y` and content `w`.
    pub fn decode(&self, tape: &mut Tape, store: &ParamStore, y: Var, w: Var) -> Result<Var> {
        let code = tape.concat(&[y, w])?;
        self.decoder.decode(tape, store, code)
    }

    /// `q(y0 | first n_cond encodings)`.
    pub fn posterior_y0(&self, tape: &mut Tape, store: &ParamStore, encodings: &[Var]) -> Result<DiagGaussian> {
        if encodings.len() < self.cfg.n_cond {
            return Err(invalid(format!(
                "need {} encodings to infer y0, got {}",
                self.cfg.n_cond,
                encodings.len()
            )));
        }
        let joined = tape.concat(&encodings[..self.cfg.n_cond])?;
        let h = self.y0_trunk.forward(tape, store, joined)?;
        let h = tape.tanh(h)?;
        self.y0_head.forward(tape, store, h)
    }

    pub fn filter_start(&self, tape: &mut Tape, store: &ParamStore, first_encoding: Var) -> Result<LstmState> {
        let s0 = self.z_lstm.zero_state(tape)?;
        self.z_lstm.step(tape, store, first_encoding, s0)
    }

    /// Consumes the encoding of frame `t` and returns `q(z_t | x_{0:t})`.
    pub fn filter_step(&self, tape: &mut Tape, store: &ParamStore, encoding: Var, state: LstmState) -> Result<(DiagGaussian, LstmState)> {
        let next = self.z_lstm.step(tape, store, encoding, state)?;
        let q = self.z_head.forward(tape, store, next.hidden)?;
        Ok((q, next))
    }

    /// Encodes the conditioning frames and computes `w` from the last `k_content` of them.
    pub fn condition(&self, store: &ParamStore, cond: &VideoTensor) -> Result<Conditioning> {
        if cond.len() != self.cfg.n_cond {
            return Err(invalid(format!(
                "expected {} conditioning frames, got {}",
                self.cfg.n_cond,
                cond.len()
            )));
        }
        if cond.frame_dims() != self.cfg.frame_dims() {
            return Err(Error::Shape {
                op: "condition",
                lhs: cond.frame_dims().to_vec(),
                rhs: self.cfg.frame_dims().to_vec(),
            });
        }
        let mut tape = Tape::new();
        let encs = (0..cond.len())
            .map(|t| self.encode_frame(&mut tape, store, &cond.frame(t)))
            .collect::<Result<Vec<_>>>()?;
        let w = self.content_from_encodings(&mut tape, store, &encs[cond.len() - self.cfg.k_content..])?;
        Ok(Conditioning {
            encodings: encs.iter().map(|&e| tape.value(e).clone()).collect(),
            content: tape.value(w).clone(),
        })
    }

    /// Forecasts `horizon` frames after the conditioning frames.
    pub fn generate(&self, store: &ParamStore, cond: &VideoTensor, horizon: usize, substeps: usize, seed: u64) -> Result<Generation> {
        let ctx = self.condition(store, cond)?;
        self.sample_future(store, &ctx, horizon, substeps, seed)
    }

    /// One stochastic future from precomputed conditioning.
    pub fn sample_future(&self, store: &ParamStore, ctx: &Conditioning, horizon: usize, substeps: usize, seed: u64) -> Result<Generation> {
        let mut tape = Tape::new();
        let (generation, _) = self.sample_future_on(&mut tape, store, ctx, horizon, substeps, seed)?;
        Ok(generation)
    }

    pub(crate) fn sample_future_on(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        ctx: &Conditioning,
        horizon: usize,
        substeps: usize,
        seed: u64,
    ) -> Result<(Generation, Vec<Var>)> {
        if substeps == 0 {
            return Err(invalid("substeps must be >= 1"));
        }
        let mut rng = rng_from(seed);
        let encs = ctx
            .encodings
            .iter()
            .map(|e| tape.constant(e.clone()))
            .collect::<Result<Vec<_>>>()?;
        let w = tape.constant(ctx.content.clone())?;

        let q0 = self.posterior_y0(tape, store, &encs)?;
        let mut y = self.draw(tape, q0, &mut rng)?;
        let mut lstm = self.filter_start(tape, store, encs[0])?;
        for &enc in &encs[1..] {
            let (q, next) = self.filter_step(tape, store, enc, lstm)?;
            lstm = next;
            let z = self.draw(tape, q, &mut rng)?;
            y = self.advance_unit(tape, store, y, z, substeps)?.last().unwrap().state;
        }

        let dt = 1.0 / substeps as f64;
        let mut traj = LatentTrajectory {
            states: vec![tape.value(y).clone()],
            substates: Vec::with_capacity(horizon),
            draws: Vec::with_capacity(horizon),
            priors: Vec::with_capacity(horizon),
            residual_norms: Vec::with_capacity(horizon),
            substeps,
        };
        let mut frame_vars = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let prior = self.transition_prior(tape, store, y)?;
            let z = self.draw(tape, prior, &mut rng)?;
            let steps = self.advance_unit(tape, store, y, z, substeps)?;
            let norm: f64 = steps
                .iter()
                .map(|s| dt * libm::sqrt(tape.value(s.residual).data().iter().map(|r| r * r).sum()))
                .sum();
            y = steps.last().unwrap().state;
            traj.priors.push((tape.value(prior.mean).clone(), tape.value(prior.std).clone()));
            traj.draws.push(tape.value(z).clone());
            traj.substates.push(steps.iter().map(|s| tape.value(s.state).clone()).collect());
            traj.states.push(tape.value(y).clone());
            traj.residual_norms.push(norm);
            frame_vars.push(self.decode(tape, store, y, w)?);
        }
        let frames: Vec<Tensor> = frame_vars.iter().map(|&f| tape.value(f).clone()).collect();
        let frames = VideoTensor::from_frames(&frames, self.cfg.frame_dims())?;
        Ok((
            Generation {
                frames,
                trajectory: traj,
                content: ctx.content.clone(),
            },
            frame_vars,
        ))
    }

    fn draw(&self, tape: &mut Tape, g: DiagGaussian, rng: &mut Rng) -> Result<Var> {
        let shape = tape.value(g.mean).shape().to_vec();
        let eps = normal_tensor(rng, &shape);
        gaussian_sample(tape, g, eps)
    }

    /// Decodes every sub-step state of a trajectory (`h * substeps` frames).
    pub fn decode_dense(&self, store: &ParamStore, traj: &LatentTrajectory, w: &Tensor) -> Result<VideoTensor> {
        let mut frames = Vec::with_capacity(traj.substates.len() * traj.substeps);
        for unit in &traj.substates {
            for state in unit {
                let mut tape = Tape::new();
                let y = tape.constant(state.clone())?;
                let wv = tape.constant(w.clone())?;
                let f = self.decode(&mut tape, store, y, wv)?;
                frames.push(tape.value(f).clone());
            }
        }
        VideoTensor::from_frames(&frames, self.cfg.frame_dims())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            bands: 1,
            height: 8,
            width: 8,
            channels: vec![2, 4],
            enc_width: 6,
            d_y: 4,
            d_z: 3,
            d_w: 5,
            hidden: 8,
            lstm_width: 6,
            n_cond: 2,
            k_content: 2,
            substeps: 2,
        }
    }

    fn frame(seed: u64) -> Tensor {
        let mut r = rng_from(seed);
        let t = normal_tensor(&mut r, &[1, 8, 8]);
        let data = t.data().iter().map(|v| crate::diff::sigmoid(*v)).collect();
        Tensor::new(vec![1, 8, 8], data).unwrap()
    }

    fn set_all(store: &mut ParamStore, names: &[alloc::string::String], v: f64) {
        for n in names {
            let id = store.id(n).unwrap();
            store.value_mut(id).data_mut().iter_mut().for_each(|x| *x = v);
        }
    }

    #[test]
    fn content_is_permutation_invariant() {
        let (model, store) = Model::new(tiny_cfg(), 1).unwrap();
        let frames = [frame(1), frame(2), frame(3)];
        let mut tape = Tape::new();
        let a = model.content_encode(&mut tape, &store, &frames).unwrap();
        let b = model
            .content_encode(&mut tape, &store, &[frames[2].clone(), frames[0].clone(), frames[1].clone()])
            .unwrap();
        assert_eq!(tape.value(a.w), tape.value(b.w));
        let err = model.content_encode(&mut tape, &store, &[]);
        assert!(err.is_err());
    }

    #[test]
    fn duplicated_frame_differs_from_single() {
        let (model, store) = Model::new(tiny_cfg(), 1).unwrap();
        let mut tape = Tape::new();
        let one = model.content_encode(&mut tape, &store, &[frame(4)]).unwrap();
        let two = model.content_encode(&mut tape, &store, &[frame(4), frame(4)]).unwrap();
        // direct evaluation: MLP(2 * enc(A))
        let e = model.encode_frame(&mut tape, &store, &frame(4)).unwrap();
        let e2 = tape.scale(e, 2.0).unwrap();
        let direct = model.content.forward(&mut tape, &store, e2).unwrap();
        assert_eq!(tape.value(two.w), tape.value(direct));
        assert_ne!(tape.value(one.w), tape.value(two.w));
    }

    #[test]
    fn initial_prior_is_standard() {
        let (model, _) = Model::new(tiny_cfg(), 0).unwrap();
        let mut tape = Tape::new();
        let p = model.initial_prior(&mut tape).unwrap();
        assert!(tape.value(p.mean).data().iter().all(|&m| m == 0.0));
        assert!(tape.value(p.std).data().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn zero_residual_leaves_state() {
        let (model, store) = Model::new(tiny_cfg(), 0).unwrap();
        let mut tape = Tape::new();
        let y = tape.constant(Tensor::row(vec![0.1, -0.2, 0.3, 0.4])).unwrap();
        let z = tape.constant(Tensor::row(vec![1.0, 2.0, 3.0])).unwrap();
        let out = model.advance_unit(&mut tape, &store, y, z, 3).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(tape.value(out[2].state), tape.value(y));
    }

    #[test]
    fn constant_residual_is_substep_invariant() {
        let (model, mut store) = Model::new(tiny_cfg(), 0).unwrap();
        let names = model.residual_param_names(&store);
        // zero every residual weight, constant output bias c
        set_all(&mut store, &names, 0.0);
        let last_bias = names.last().unwrap().clone();
        store.set_value(&last_bias, &[4], vec![0.5, -0.25, 0.125, 1.0]).unwrap();
        let y0 = Tensor::row(vec![0.1, -0.2, 0.3, 0.4]);
        let z0 = Tensor::row(vec![1.0, 2.0, 3.0]);
        let mut finals = Vec::new();
        for substeps in [1, 2, 4] {
            let mut tape = Tape::new();
            let y = tape.constant(y0.clone()).unwrap();
            let z = tape.constant(z0.clone()).unwrap();
            let out = model.advance_unit(&mut tape, &store, y, z, substeps).unwrap();
            finals.push(tape.value(out.last().unwrap().state).clone());
        }
        let expected = [0.6, -0.45, 0.425, 1.4];
        for f in &finals {
            for (a, b) in f.data().iter().zip(expected) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(finals[0], finals[1]);
        assert_eq!(finals[1], finals[2]);
    }

    #[test]
    fn euler_dt_validation() {
        let (model, store) = Model::new(tiny_cfg(), 0).unwrap();
        let mut tape = Tape::new();
        let y = tape.constant(Tensor::zeros(&[1, 4])).unwrap();
        let z = tape.constant(Tensor::zeros(&[1, 3])).unwrap();
        for dt in [0.0, 1.5, 0.4, -0.5] {
            assert!(model.euler_step(&mut tape, &store, y, z, dt).is_err(), "dt={dt}");
        }
        assert!(model.euler_step(&mut tape, &store, y, z, 0.25).is_ok());
        assert!(model.advance_unit(&mut tape, &store, y, z, 0).is_err());
    }

    #[test]
    fn generation_counts_and_determinism() {
        let (model, store) = Model::new(tiny_cfg(), 0).unwrap();
        let cond = VideoTensor::from_frames(&[frame(1), frame(2)], [1, 8, 8]).unwrap();
        let g0 = model.generate(&store, &cond, 0, 2, 5).unwrap();
        assert_eq!(g0.frames.len(), 0);
        let a = model.generate(&store, &cond, 3, 2, 5).unwrap();
        let b = model.generate(&store, &cond, 3, 2, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames.len(), 3);
        assert_eq!(a.trajectory.states.len(), 4);
        let c = model.generate(&store, &cond, 3, 2, 6).unwrap();
        assert_ne!(a.frames, c.frames);
        let wrong = VideoTensor::from_frames(&[frame(1)], [1, 8, 8]).unwrap();
        assert!(model.generate(&store, &wrong, 3, 2, 5).is_err());
    }

    #[test]
    fn dense_decoding_contains_sparse_frames() {
        let (model, store) = Model::new(tiny_cfg(), 0).unwrap();
        let cond = VideoTensor::from_frames(&[frame(1), frame(2)], [1, 8, 8]).unwrap();
        let g = model.generate(&store, &cond, 3, 2, 5).unwrap();
        let dense = model.decode_dense(&store, &g.trajectory, &g.content).unwrap();
        assert_eq!(dense.len(), 6);
        for t in 0..3 {
            assert_eq!(dense.frame_data(2 * t + 1), g.frames.frame_data(t));
        }
        let g1 = model.generate(&store, &cond, 3, 1, 5).unwrap();
        let dense1 = model.decode_dense(&store, &g1.trajectory, &g1.content).unwrap();
        assert_eq!(dense1, g1.frames);
    }

    #[test]
    fn decoded_frames_feed_no_further_op() {
        let (model, store) = Model::new(tiny_cfg(), 0).unwrap();
        let cond = VideoTensor::from_frames(&[frame(1), frame(2)], [1, 8, 8]).unwrap();
        let ctx = model.condition(&store, &cond).unwrap();
        let mut tape = Tape::new();
        let (_, frames) = model.sample_future_on(&mut tape, &store, &ctx, 4, 2, 1).unwrap();
        for v in tape.vars() {
            let inputs = tape.inputs(v);
            assert!(inputs.iter().all(|x| !frames.contains(x)), "{v:?} consumes a decoded frame");
        }
    }
}
