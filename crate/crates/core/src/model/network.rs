use std::path::Path;

use crate::encoders::{Modality, RawFeatures};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{seeded_rng, Init, ParamStore, ParamVars, Real, Shape, Tape, Tensor, Var};

use super::ModelConfig;

/// Raw per-modality tokens of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTokens {
    pub visual: Matrix,
    pub text: Matrix,
    pub audio: Matrix,
}

impl ClipTokens {
    pub fn new(visual: Matrix, text: Matrix, audio: Matrix) -> Self {
        Self { visual, text, audio }
    }

    pub fn from_raw(visual: RawFeatures, text: RawFeatures, audio: RawFeatures) -> Self {
        Self::new(visual.tokens, text.tokens, audio.tokens)
    }

    pub fn get(&self, m: Modality) -> &Matrix {
        match m {
            Modality::Visual => &self.visual,
            Modality::Text => &self.text,
            Modality::Audio => &self.audio,
        }
    }

    /// Each modality collapsed to the mean of its tokens.
    pub fn pooled(&self) -> Result<Self> {
        let pool = |m: &Matrix| Matrix::from_vec(1, m.cols(), m.mean_rows());
        Ok(Self::new(pool(&self.visual)?, pool(&self.text)?, pool(&self.audio)?))
    }
}

/// Graph handles for one clip of a batch.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    /// Cross-attention maps, indexed by [`Modality::index`].
    pub cross: [Var; 3],
    /// `A_i · V_i` re-projected to the shared width, same indexing.
    pub cross_out: [Var; 3],
    /// Summed cross-attention output.
    pub fused: Var,
    pub self_attention: Var,
    /// Fused tokens after the residual self-attention.
    pub caf: Var,
}

#[derive(Debug, Clone)]
pub struct BatchForward {
    /// `(1, B, 2)`; column 1 is funny.
    pub logits: Var,
    /// Row-mean projected embedding per clip, `(1, B, n_proj)`, by [`Modality::index`].
    pub pooled: [Var; 3],
    pub samples: Vec<SampleTrace>,
}

/// Parameter names of the projection head for `m`.
pub fn head_names(m: Modality) -> [String; 6] {
    let k = m.key();
    ["w1", "b1", "w2", "b2", "ln_gain", "ln_bias"].map(|p| format!("proj.{k}.{p}"))
}

/// `layer_norm(dropout(gelu(x W1 + b1) W2 + b2))` with affine gain and bias, per token.
pub fn project<T: Real>(tape: &mut Tape<T>, vars: &ParamVars, m: Modality, x: Var, dropout: f64) -> Result<Var> {
    let [w1, b1, w2, b2, g, b] = head_names(m);
    let h = tape.matmul(x, vars.get(&w1)?)?;
    let h = tape.add_row(h, vars.get(&b1)?)?;
    let h = tape.gelu(h);
    let o = tape.matmul(h, vars.get(&w2)?)?;
    let o = tape.add_row(o, vars.get(&b2)?)?;
    let o = tape.dropout(o, dropout);
    let o = tape.layer_norm(o);
    let o = tape.mul_row(o, vars.get(&g)?)?;
    tape.add_row(o, vars.get(&b)?)
}

fn attend<T: Real>(tape: &mut Tape<T>, q: Var, k: Var, v: Var, d: usize) -> Result<(Var, Var)> {
    let kt = tape.transpose(k);
    let s = tape.matmul(q, kt)?;
    let s = tape.scale(s, T::from_f64(1.0 / (d as f64).sqrt()));
    let a = tape.row_softmax(s);
    let out = tape.matmul(a, v)?;
    Ok((a, out))
}

fn reproject<T: Real>(tape: &mut Tape<T>, vars: &ParamVars, name: &str, x: Var) -> Result<Var> {
    match vars.try_get(name) {
        Some(w) => tape.matmul(x, w),
        None => Ok(x),
    }
}

/// Cross-attention of the stacked query `q_s` against each modality's keys
/// and values (indexed by [`Modality::index`]); returns `F_U`, the maps and
/// the per-modality outputs.
pub fn cross_attend<T: Real>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    d: usize,
    q_s: Var,
    keys: [Var; 3],
    values: [Var; 3],
) -> Result<(Var, [Var; 3], [Var; 3])> {
    let mut maps = Vec::with_capacity(3);
    let mut outs = Vec::with_capacity(3);
    for m in Modality::ALL {
        let (a, o) = attend(tape, q_s, keys[m.index()], values[m.index()], d)?;
        let o = reproject(tape, vars, &format!("caf.{}.w_o", m.key()), o)?;
        maps.push(a);
        outs.push(o);
    }
    let sum = tape.add(outs[0], outs[1])?;
    let fused = tape.add(sum, outs[2])?;
    Ok((fused, [maps[0], maps[1], maps[2]], [outs[0], outs[1], outs[2]]))
}

/// `F_U + softmax(Q_U K_Uᵀ / √d) V_U` given the projections of `F_U`.
pub fn self_attend<T: Real>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    d: usize,
    fused: Var,
    q: Var,
    k: Var,
    v: Var,
) -> Result<(Var, Var)> {
    let (a, o) = attend(tape, q, k, v, d)?;
    let o = reproject(tape, vars, "caf.sa.w_o", o)?;
    Ok((tape.add(fused, o)?, a))
}

/// Single-clip cross fusion from projected tokens `(1, m_i, n_proj)`.
pub fn caf_cross_fuse<T: Real>(
    tape: &mut Tape<T>,
    vars: &ParamVars,
    cfg: &ModelConfig,
    tokens: [Var; 3],
) -> Result<(Var, [Var; 3], [Var; 3])> {
    let stacked: Vec<Var> = cfg.stack_order.iter().map(|m| tokens[m.index()]).collect();
    let f_s = tape.concat_rows(&stacked)?;
    let q_s = tape.matmul(f_s, vars.get("caf.w_qs")?)?;
    let mut keys = Vec::with_capacity(3);
    let mut values = Vec::with_capacity(3);
    for m in Modality::ALL {
        keys.push(tape.matmul(tokens[m.index()], vars.get(&format!("caf.{}.w_k", m.key()))?)?);
        values.push(tape.matmul(tokens[m.index()], vars.get(&format!("caf.{}.w_v", m.key()))?)?);
    }
    cross_attend(tape, vars, cfg.d, q_s, [keys[0], keys[1], keys[2]], [values[0], values[1], values[2]])
}

/// Single-clip residual self-attention over `F_U`; returns `F_CAF` and the map.
pub fn caf_self_attend<T: Real>(tape: &mut Tape<T>, vars: &ParamVars, cfg: &ModelConfig, fused: Var) -> Result<(Var, Var)> {
    let q = tape.matmul(fused, vars.get("caf.sa.w_q")?)?;
    let k = tape.matmul(fused, vars.get("caf.sa.w_k")?)?;
    let v = tape.matmul(fused, vars.get("caf.sa.w_v")?)?;
    self_attend(tape, vars, cfg.d, fused, q, k, v)
}

/// Logits `(1, rows, 2)` from already averaged tokens `(1, rows, n_proj)`.
pub fn classify_pooled<T: Real>(tape: &mut Tape<T>, vars: &ParamVars, pooled: Var) -> Result<Var> {
    let z = tape.matmul(pooled, vars.get("cls.w")?)?;
    tape.add_row(z, vars.get("cls.b")?)
}

/// Logits `(1, 1, 2)` for one clip's `F_CAF`.
pub fn classify<T: Real>(tape: &mut Tape<T>, vars: &ParamVars, caf: Var) -> Result<Var> {
    let mean = tape.mean_rows(caf);
    classify_pooled(tape, vars, mean)
}

/// Cross-attention fusion classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FunnyNet {
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// One clip's eval-mode outputs as plain matrices.
#[derive(Debug, Clone)]
pub struct Inference {
    pub prob_funny: f32,
    pub logits: [f32; 2],
    /// By [`Modality::index`].
    pub cross: [Matrix; 3],
    pub cross_out: [Matrix; 3],
    pub self_attention: Matrix,
    pub fused: Matrix,
    pub caf: Matrix,
    /// Change of the funny-minus-not-funny logit when one modality's
    /// cross-attention output is removed from `F_U`.
    pub occlusion: [f32; 3],
}

fn to_matrix<T: Real>(tape: &Tape<T>, v: Var) -> Result<Matrix> {
    let t = tape.value(v);
    Matrix::from_vec(
        t.shape.batch * t.shape.rows,
        t.shape.cols,
        t.values.iter().map(|x| x.to_f64() as f32).collect(),
    )
}

/// Softmax probability of the funny class from a logit pair.
pub fn funny_probability(l0: f64, l1: f64) -> f64 {
    1.0 / (1.0 + (l0 - l1).exp())
}

impl FunnyNet {
    /// Fresh model; weights Xavier-uniform from `seed`, biases zero, layer-norm gains one.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let mut p = ParamStore::new();
        let (n, h, d) = (config.n_proj, config.hidden, config.d);
        for m in Modality::ALL {
            let [w1, b1, w2, b2, g, b] = head_names(m);
            p.add(&w1, config.raw_dim(m), h, Init::Xavier, &mut rng)?;
            p.add(&b1, 1, h, Init::Zeros, &mut rng)?;
            p.add(&w2, h, n, Init::Xavier, &mut rng)?;
            p.add(&b2, 1, n, Init::Zeros, &mut rng)?;
            p.add(&g, 1, n, Init::Ones, &mut rng)?;
            p.add(&b, 1, n, Init::Zeros, &mut rng)?;
        }
        p.add("caf.w_qs", n, d, Init::Xavier, &mut rng)?;
        for m in Modality::ALL {
            let k = m.key();
            p.add(&format!("caf.{k}.w_k"), n, d, Init::Xavier, &mut rng)?;
            p.add(&format!("caf.{k}.w_v"), n, d, Init::Xavier, &mut rng)?;
            if d != n {
                p.add(&format!("caf.{k}.w_o"), d, n, Init::Xavier, &mut rng)?;
            }
        }
        for w in ["w_q", "w_k", "w_v"] {
            p.add(&format!("caf.sa.{w}"), n, d, Init::Xavier, &mut rng)?;
        }
        if d != n {
            p.add("caf.sa.w_o", d, n, Init::Xavier, &mut rng)?;
        }
        p.add("cls.w", n, 2, Init::Xavier, &mut rng)?;
        p.add("cls.b", 1, 2, Init::Zeros, &mut rng)?;
        Ok(Self { config, params: p })
    }

    /// Wraps loaded parameters, checking they match what `config` expects.
    pub fn from_parts(config: ModelConfig, mut params: ParamStore) -> Result<Self> {
        let reference = Self::new(config.clone(), 0)?;
        params.reorder(reference.params.names())?;
        for (name, t) in reference.params.names().iter().zip(reference.params.tensors()) {
            let got = params.get(name)?.shape;
            if got != t.shape {
                return Err(Error::Dimension(format!("parameter `{name}` is {got:?}, expected {:?}", t.shape)));
            }
        }
        Ok(Self { config, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path, &serde_json::to_value(&self.config)?)
    }

    /// Loads a checkpoint written by [`FunnyNet::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let (store, meta) = ParamStore::load(path)?;
        let config: ModelConfig = serde_json::from_value(meta)
            .map_err(|e| Error::Format(format!("{}: bad model config: {e}", path.display())))?;
        Self::from_parts(config, store)
    }

    fn check_clip(&self, i: usize, clip: &ClipTokens) -> Result<()> {
        for m in Modality::ALL {
            let t = clip.get(m);
            if t.rows() == 0 || t.cols() != self.config.raw_dim(m) {
                return Err(Error::Dimension(format!(
                    "clip {i}: {m} tokens are {}x{}, model expects width {}",
                    t.rows(),
                    t.cols(),
                    self.config.raw_dim(m)
                )));
            }
        }
        Ok(())
    }

    /// Builds the batched graph. Projections and attention projections run
    /// over all clips at once; attention itself is per clip.
    pub fn forward<T: Real>(&self, tape: &mut Tape<T>, vars: &ParamVars, batch: &[ClipTokens]) -> Result<BatchForward> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let pooled_storage;
        let batch = if self.config.pooled_mode {
            pooled_storage = batch.iter().map(ClipTokens::pooled).collect::<Result<Vec<_>>>()?;
            &pooled_storage[..]
        } else {
            batch
        };
        for (i, clip) in batch.iter().enumerate() {
            self.check_clip(i, clip)?;
        }
        let cfg = &self.config;
        let n = cfg.n_proj;
        let w_qs = vars.get("caf.w_qs")?;

        // Per modality: projected tokens, Q/K/V for every clip, plus the row offsets.
        let mut offsets: Vec<Vec<(usize, usize)>> = Vec::with_capacity(3);
        let mut proj = Vec::with_capacity(3);
        let mut q = Vec::with_capacity(3);
        let mut k = Vec::with_capacity(3);
        let mut v = Vec::with_capacity(3);
        for m in Modality::ALL {
            let mats: Vec<&Matrix> = batch.iter().map(|c| c.get(m)).collect();
            let mut offs = Vec::with_capacity(batch.len());
            let mut at = 0;
            for t in &mats {
                offs.push((at, t.rows()));
                at += t.rows();
            }
            let stacked = Matrix::vstack(&mats)?;
            let x = tape.constant(Tensor::from_f32(Shape::matrix(stacked.rows(), stacked.cols()), stacked.as_slice())?);
            let f = project(tape, vars, m, x, cfg.dropout)?;
            q.push(tape.matmul(f, w_qs)?);
            k.push(tape.matmul(f, vars.get(&format!("caf.{}.w_k", m.key()))?)?);
            v.push(tape.matmul(f, vars.get(&format!("caf.{}.w_v", m.key()))?)?);
            proj.push(f);
            offsets.push(offs);
        }

        let mut pooled_rows: [Vec<Var>; 3] = Default::default();
        let mut fused_all = Vec::with_capacity(batch.len());
        let mut cross_maps = Vec::with_capacity(batch.len());
        for b in 0..batch.len() {
            let mut ks = Vec::with_capacity(3);
            let mut vs = Vec::with_capacity(3);
            let mut qs = [None; 3];
            for m in Modality::ALL {
                let i = m.index();
                let (at, len) = offsets[i][b];
                let f = tape.slice_rows(proj[i], at, len)?;
                pooled_rows[i].push(tape.mean_rows(f));
                ks.push(tape.slice_rows(k[i], at, len)?);
                vs.push(tape.slice_rows(v[i], at, len)?);
                qs[i] = Some(tape.slice_rows(q[i], at, len)?);
            }
            let q_parts: Vec<Var> = cfg.stack_order.iter().map(|m| qs[m.index()].expect("query slice")).collect();
            let q_s = tape.concat_rows(&q_parts)?;
            let (fused, maps, outs) = cross_attend(tape, vars, cfg.d, q_s, [ks[0], ks[1], ks[2]], [vs[0], vs[1], vs[2]])?;
            fused_all.push(fused);
            cross_maps.push((maps, outs));
        }

        let fu = tape.concat_rows(&fused_all)?;
        let qu = tape.matmul(fu, vars.get("caf.sa.w_q")?)?;
        let ku = tape.matmul(fu, vars.get("caf.sa.w_k")?)?;
        let vu = tape.matmul(fu, vars.get("caf.sa.w_v")?)?;
        let mut samples = Vec::with_capacity(batch.len());
        let mut means = Vec::with_capacity(batch.len());
        let mut at = 0;
        for (b, fused) in fused_all.iter().enumerate() {
            let len = tape.shape(*fused).rows;
            let qb = tape.slice_rows(qu, at, len)?;
            let kb = tape.slice_rows(ku, at, len)?;
            let vb = tape.slice_rows(vu, at, len)?;
            at += len;
            let (caf, a) = self_attend(tape, vars, cfg.d, *fused, qb, kb, vb)?;
            means.push(tape.mean_rows(caf));
            let (cross, cross_out) = cross_maps[b];
            samples.push(SampleTrace {
                cross,
                cross_out,
                fused: *fused,
                self_attention: a,
                caf,
            });
        }
        let pooled_caf = tape.concat_rows(&means)?;
        let pooled_caf = tape.reshape(pooled_caf, Shape::matrix(batch.len(), n))?;
        let logits = classify_pooled(tape, vars, pooled_caf)?;
        let mut pooled = Vec::with_capacity(3);
        for rows in &pooled_rows {
            let c = tape.concat_rows(rows)?;
            pooled.push(tape.reshape(c, Shape::matrix(batch.len(), n))?);
        }
        Ok(BatchForward {
            logits,
            pooled: [pooled[0], pooled[1], pooled[2]],
            samples,
        })
    }

    /// Eval-mode funny probabilities.
    pub fn predict(&self, batch: &[ClipTokens]) -> Result<Vec<f32>> {
        let mut tape = Tape::<f32>::eval();
        let vars = self.params.load_into(&mut tape);
        let out = self.forward(&mut tape, &vars, batch)?;
        let l = &tape.value(out.logits).values;
        Ok(l.chunks(2).map(|z| funny_probability(z[0] as f64, z[1] as f64) as f32).collect())
    }

    /// Eval-mode outputs of one clip with every intermediate exposed.
    pub fn infer(&self, clip: &ClipTokens) -> Result<Inference> {
        let mut tape = Tape::<f32>::eval();
        let vars = self.params.load_into(&mut tape);
        let out = self.forward(&mut tape, &vars, std::slice::from_ref(clip))?;
        let s = &out.samples[0];
        let l = &tape.value(out.logits).values;
        let margin = l[1] - l[0];
        let mut occlusion = [0.0f32; 3];
        for (slot, o) in occlusion.iter_mut().zip(s.cross_out) {
            let minus = tape.scale(o, -1.0);
            let fused = tape.add(s.fused, minus)?;
            let (caf, _) = caf_self_attend(&mut tape, &vars, &self.config, fused)?;
            let z = classify(&mut tape, &vars, caf)?;
            let z = &tape.value(z).values;
            *slot = (margin - (z[1] - z[0])).abs();
        }
        let l = &tape.value(out.logits).values;
        let grab3 = |vs: [Var; 3]| -> Result<[Matrix; 3]> {
            Ok([to_matrix(&tape, vs[0])?, to_matrix(&tape, vs[1])?, to_matrix(&tape, vs[2])?])
        };
        Ok(Inference {
            prob_funny: funny_probability(l[0] as f64, l[1] as f64) as f32,
            logits: [l[0], l[1]],
            cross: grab3(s.cross)?,
            cross_out: grab3(s.cross_out)?,
            self_attention: to_matrix(&tape, s.self_attention)?,
            fused: to_matrix(&tape, s.fused)?,
            caf: to_matrix(&tape, s.caf)?,
            occlusion,
        })
    }
}
