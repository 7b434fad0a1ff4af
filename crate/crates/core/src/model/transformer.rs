//! Pre-layer-norm causal Transformer with two layer schedules: the shared,
//! adaptively deep sliding-dilated stack and a fixed-depth full-attention
//! baseline.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Arch, ModelConfig};
use super::mask::{causal_pattern, checked_depth, dilated_pattern, pad_input};
use crate::autodiff::{AttnPattern, Tape, Var};
use crate::error::{Error, Result};
use crate::param::{normal_init, ParamId, ParamStore};
use crate::tensor::{Float, Tensor};

/// Weights are drawn from `N(0, 1/fan_in)`, embeddings from `N(0, 1)`.
fn fan_in_std(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

/// How attention is evaluated. Both routes compute the same function; the
/// dense one materializes the full `-inf`-masked score matrix and exists as
/// a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionRoute {
    #[default]
    Sparse,
    Dense,
}

/// Parameter ids of one SA + FFN sublayer.
#[derive(Debug, Clone)]
pub struct Sublayer {
    pub ln1_gain: ParamId,
    pub ln1_bias: ParamId,
    pub qkv_weight: ParamId,
    pub qkv_bias: ParamId,
    pub out_weight: ParamId,
    pub out_bias: ParamId,
    /// Per-head relative scalars, `[heads, slots]`.
    pub rel_bias: ParamId,
    pub ln2_gain: ParamId,
    pub ln2_bias: ParamId,
    pub fc1_weight: ParamId,
    pub fc1_bias: ParamId,
    pub fc2_weight: ParamId,
    pub fc2_bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct Model<F> {
    config: ModelConfig,
    params: ParamStore<F>,
    embed: ParamId,
    sublayers: Vec<Sublayer>,
    ln_f_gain: ParamId,
    ln_f_bias: ParamId,
    head: ParamId,
}

/// Sequences sharing one packed matrix (same depth).
#[derive(Debug, Clone)]
pub struct BucketTrace {
    /// Indices into the batch.
    pub members: Vec<usize>,
    /// First packed row of each member.
    pub offsets: Vec<usize>,
    /// Padded length of each member.
    pub padded_lens: Vec<usize>,
    /// Packed row of each member's last real token.
    pub readout_rows: Vec<usize>,
    pub depth: usize,
    pub sublayer_calls: usize,
    /// Token embeddings, `rows × d_model`.
    pub embedding: Var,
    /// Residual stream after each depth group.
    pub group_outputs: Vec<Var>,
    /// Output of the last FFN inside each depth group (before the residual add).
    pub ffn_outputs: Vec<Var>,
    /// `members × vocab`.
    pub logits: Var,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch_size: usize,
    pub buckets: Vec<BucketTrace>,
}

impl ForwardTrace {
    /// Mean cross-entropy over the whole batch at each readout position.
    pub fn loss<F: Float>(&self, tape: &mut Tape<F>, targets: &[usize]) -> Result<Var> {
        if targets.len() != self.batch_size {
            return Err(Error::shape("loss", &[self.batch_size], &[targets.len()]));
        }
        let mut total: Option<Var> = None;
        for b in &self.buckets {
            let t: Vec<usize> = b.members.iter().map(|&i| targets[i]).collect();
            let ce = tape.cross_entropy(b.logits, &t)?;
            let weighted = tape.scale(ce, F::of(b.members.len() as f64 / self.batch_size as f64));
            total = Some(match total {
                Some(acc) => tape.add(acc, weighted)?,
                None => weighted,
            });
        }
        total.ok_or_else(|| Error::invalid("loss", "empty batch"))
    }

    /// Logits of every sequence in batch order.
    pub fn logits<F: Float>(&self, tape: &Tape<F>) -> Vec<Vec<F>> {
        let mut out = vec![Vec::new(); self.batch_size];
        for b in &self.buckets {
            let l = tape.value(b.logits);
            for (r, &i) in b.members.iter().enumerate() {
                out[i] = l.row(r).to_vec();
            }
        }
        out
    }
}

struct Packed {
    members: Vec<usize>,
    tokens: Vec<usize>,
    offsets: Vec<usize>,
    padded_lens: Vec<usize>,
    readout_rows: Vec<usize>,
    depth: usize,
}

impl<F: Float> Model<F> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d = config.d_model;
        let h = config.n_heads;
        let embed = params.add("embed", normal_init(&mut rng, &[config.vocab_size, d], 1.0))?;
        let (count, slots, prefix) = match config.arch {
            Arch::Regular => (config.thickness, config.chunk_size, "block"),
            Arch::Vanilla {
                layers,
                distance_buckets,
            } => (layers, distance_buckets, "layer"),
        };
        let mut sublayers = Vec::with_capacity(count);
        for k in 0..count {
            let mut add = |name: &str, value: Tensor<F>| params.add(format!("{prefix}.{k}.{name}"), value);
            let ones = |n: usize| Tensor::full(&[n], F::one());
            let zeros = |n: usize| Tensor::zeros(&[n]);
            sublayers.push(Sublayer {
                ln1_gain: add("ln1.gain", ones(d))?,
                ln1_bias: add("ln1.bias", zeros(d))?,
                qkv_weight: add("attn.qkv.weight", normal_init(&mut rng, &[d, 3 * d], fan_in_std(d)))?,
                qkv_bias: add("attn.qkv.bias", zeros(3 * d))?,
                out_weight: add("attn.out.weight", normal_init(&mut rng, &[d, d], fan_in_std(d)))?,
                out_bias: add("attn.out.bias", zeros(d))?,
                rel_bias: add("attn.r", Tensor::zeros(&[h, slots]))?,
                ln2_gain: add("ln2.gain", ones(d))?,
                ln2_bias: add("ln2.bias", zeros(d))?,
                fc1_weight: add("ffn.fc1.weight", normal_init(&mut rng, &[d, config.d_ffn], fan_in_std(d)))?,
                fc1_bias: add("ffn.fc1.bias", zeros(config.d_ffn))?,
                fc2_weight: add("ffn.fc2.weight", normal_init(&mut rng, &[config.d_ffn, d], fan_in_std(config.d_ffn)))?,
                fc2_bias: add("ffn.fc2.bias", zeros(d))?,
            });
        }
        let ln_f_gain = params.add("ln_f.gain", Tensor::full(&[d], F::one()))?;
        let ln_f_bias = params.add("ln_f.bias", Tensor::zeros(&[d]))?;
        let head = params.add("head.weight", normal_init(&mut rng, &[d, config.vocab_size], fan_in_std(d)))?;
        Ok(Model {
            config,
            params,
            embed,
            sublayers,
            ln_f_gain,
            ln_f_bias,
            head,
        })
    }

    /// Rebuilds a model around existing parameters (e.g. from a checkpoint).
    pub fn from_params(config: ModelConfig, params: ParamStore<F>) -> Result<Self> {
        let template = Model::<F>::new(config.clone(), 0)?;
        if template.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for (want, got) in template.params.iter().zip(params.iter()) {
            if want.name != got.name {
                return Err(Error::Checkpoint(format!("expected parameter `{}`, found `{}`", want.name, got.name)));
            }
            if want.value.shape() != got.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` has shape {:?}, config implies {:?}",
                    got.name,
                    got.value.shape(),
                    want.value.shape()
                )));
            }
        }
        Ok(Model { params, ..template })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn sublayers(&self) -> &[Sublayer] {
        &self.sublayers
    }

    pub fn cast<G: Float>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            embed: self.embed,
            sublayers: self.sublayers.clone(),
            ln_f_gain: self.ln_f_gain,
            ln_f_bias: self.ln_f_bias,
            head: self.head,
        }
    }

    /// Number of depth groups (or layers) run for an input of length `len`.
    pub fn depth_for(&self, len: usize) -> Result<usize> {
        match self.config.arch {
            Arch::Regular => {
                let len = self.config.input_len(len);
                let padded = len.div_ceil(self.config.chunk_size) * self.config.chunk_size;
                checked_depth(padded, self.config.chunk_size, self.config.max_groups)
            }
            Arch::Vanilla { layers, .. } => Ok(layers),
        }
    }

    /// `(sublayer index, group)` in execution order.
    fn schedule(&self, depth: usize) -> Vec<(usize, usize)> {
        match self.config.arch {
            Arch::Regular => (0..depth)
                .flat_map(|l| (0..self.config.thickness).map(move |k| (k, l)))
                .collect(),
            Arch::Vanilla { layers, .. } => (0..layers).map(|i| (i, i)).collect(),
        }
    }

    fn sublayers_per_group(&self) -> usize {
        match self.config.arch {
            Arch::Regular => self.config.thickness,
            Arch::Vanilla { .. } => 1,
        }
    }

    fn pattern_for(&self, group: usize, lens: &[usize]) -> AttnPattern {
        let parts: Vec<AttnPattern> = lens
            .iter()
            .map(|&len| match self.config.arch {
                Arch::Regular => dilated_pattern(group, self.config.chunk_size, len),
                Arch::Vanilla { distance_buckets, .. } => causal_pattern(len, distance_buckets),
            })
            .collect();
        let refs: Vec<&AttnPattern> = parts.iter().collect();
        AttnPattern::stack(&refs)
    }

    fn pack(&self, seqs: &[&[usize]]) -> Result<Vec<Packed>> {
        let mut buckets: Vec<Packed> = Vec::new();
        let mut by_depth: HashMap<usize, usize> = HashMap::new();
        for (i, seq) in seqs.iter().enumerate() {
            if let Some(&bad) = seq.iter().find(|&&t| t >= self.config.vocab_size) {
                return Err(Error::invalid("forward", format!("token {bad} outside vocabulary")));
            }
            if seq.is_empty() {
                return Err(Error::invalid("forward", "empty input"));
            }
            let input: Vec<usize> = self.config.bos_token().into_iter().chain(seq.iter().copied()).collect();
            let (tokens, readout) = match self.config.arch {
                Arch::Regular => pad_input(&input, self.config.chunk_size, self.config.pad_token)?,
                Arch::Vanilla { .. } => {
                    let last = input.len() - 1;
                    (input, last)
                }
            };
            let depth = self.depth_for(seq.len())?;
            let slot = *by_depth.entry(depth).or_insert_with(|| {
                buckets.push(Packed {
                    members: Vec::new(),
                    tokens: Vec::new(),
                    offsets: Vec::new(),
                    padded_lens: Vec::new(),
                    readout_rows: Vec::new(),
                    depth,
                });
                buckets.len() - 1
            });
            let b = &mut buckets[slot];
            let offset = b.tokens.len();
            b.members.push(i);
            b.offsets.push(offset);
            b.padded_lens.push(tokens.len());
            b.readout_rows.push(offset + readout);
            b.tokens.extend_from_slice(&tokens);
        }
        Ok(buckets)
    }

    /// One pre-LN attention + FFN sublayer. Returns the new residual stream
    /// and the FFN output.
    fn sublayer(
        &self,
        tape: &mut Tape<F>,
        h: Var,
        sub: &Sublayer,
        pattern: &Arc<AttnPattern>,
        route: AttentionRoute,
    ) -> Result<(Var, Var)> {
        let p = &self.params;
        let d = self.config.d_model;

        let g1 = tape.param(p, sub.ln1_gain);
        let b1 = tape.param(p, sub.ln1_bias);
        let a = tape.layer_norm(h);
        let a = tape.mul_row(a, g1)?;
        let a = tape.add_row(a, b1)?;

        let w = tape.param(p, sub.qkv_weight);
        let wb = tape.param(p, sub.qkv_bias);
        let qkv = tape.matmul(a, w)?;
        let qkv = tape.add_row(qkv, wb)?;
        let q = tape.slice_cols(qkv, 0, d)?;
        let k = tape.slice_cols(qkv, d, 2 * d)?;
        let v = tape.slice_cols(qkv, 2 * d, 3 * d)?;
        let rel = tape.param(p, sub.rel_bias);
        let att = match route {
            AttentionRoute::Sparse => tape.sparse_attention(q, k, v, rel, pattern.clone(), self.config.n_heads)?,
            AttentionRoute::Dense => self.dense_attention(tape, q, k, v, rel, pattern)?,
        };
        let wo = tape.param(p, sub.out_weight);
        let bo = tape.param(p, sub.out_bias);
        let o = tape.matmul(att, wo)?;
        let o = tape.add_row(o, bo)?;
        let h = tape.add(h, o)?;

        let g2 = tape.param(p, sub.ln2_gain);
        let b2 = tape.param(p, sub.ln2_bias);
        let a = tape.layer_norm(h);
        let a = tape.mul_row(a, g2)?;
        let a = tape.add_row(a, b2)?;
        let w1 = tape.param(p, sub.fc1_weight);
        let c1 = tape.param(p, sub.fc1_bias);
        let w2 = tape.param(p, sub.fc2_weight);
        let c2 = tape.param(p, sub.fc2_bias);
        let f = tape.matmul(a, w1)?;
        let f = tape.add_row(f, c1)?;
        let f = tape.relu(f);
        let f = tape.matmul(f, w2)?;
        let f = tape.add_row(f, c2)?;
        let h = tape.add(h, f)?;
        Ok((h, f))
    }

    /// Reference attention: per head, `masked_softmax(q kᵀ / sqrt(d_h) + bias) v`
    /// with the bias gathered from the relative scalars and `-inf` off-pattern.
    fn dense_attention(
        &self,
        tape: &mut Tape<F>,
        q: Var,
        k: Var,
        v: Var,
        rel: Var,
        pattern: &AttnPattern,
    ) -> Result<Var> {
        let rows = pattern.num_queries();
        let heads = self.config.n_heads;
        let dh = self.config.head_dim();
        let (_, slots) = tape.value(rel).dims2();
        let scale = F::of(1.0 / (dh as f64).sqrt());
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.slice_cols(q, h * dh, (h + 1) * dh)?;
            let kh = tape.slice_cols(k, h * dh, (h + 1) * dh)?;
            let vh = tape.slice_cols(v, h * dh, (h + 1) * dh)?;
            let s = tape.matmul_t(qh, kh)?;
            let s = tape.scale(s, scale);
            let mut index = vec![None; rows * rows];
            for m in 0..rows {
                for (n, slot) in pattern.row(m) {
                    index[m * rows + n] = Some(h * slots + slot);
                }
            }
            let bias = tape.gather_fill(rel, index, &[rows, rows], F::neg_infinity())?;
            let s = tape.add(s, bias)?;
            let p = tape.masked_softmax(s)?;
            outs.push(tape.matmul(p, vh)?);
        }
        tape.concat_cols(&outs)
    }

    fn readout(&self, tape: &mut Tape<F>, h: Var, rows: &[usize]) -> Result<Var> {
        let sel = tape.select_rows(h, rows)?;
        let g = tape.param(&self.params, self.ln_f_gain);
        let b = tape.param(&self.params, self.ln_f_bias);
        let w = tape.param(&self.params, self.head);
        let a = tape.layer_norm(sel);
        let a = tape.mul_row(a, g)?;
        let a = tape.add_row(a, b)?;
        tape.matmul(a, w)
    }

    /// Full forward pass recorded on `tape`, for training and analyses that
    /// need gradients or intermediate values.
    pub fn forward_tape(&self, tape: &mut Tape<F>, seqs: &[&[usize]], route: AttentionRoute) -> Result<ForwardTrace> {
        let mut buckets = Vec::new();
        for packed in self.pack(seqs)? {
            let table = tape.param(&self.params, self.embed);
            let embedding = tape.embedding(table, &packed.tokens)?;
            let mut h = embedding;
            let mut group_outputs = Vec::new();
            let mut ffn_outputs = Vec::new();
            let mut patterns: HashMap<usize, Arc<AttnPattern>> = HashMap::new();
            let schedule = self.schedule(packed.depth);
            let per_group = self.sublayers_per_group();
            for (step, &(k, group)) in schedule.iter().enumerate() {
                let pattern = patterns
                    .entry(group)
                    .or_insert_with(|| Arc::new(self.pattern_for(group, &packed.padded_lens)))
                    .clone();
                let (next, f) = self.sublayer(tape, h, &self.sublayers[k], &pattern, route)?;
                h = next;
                if (step + 1) % per_group == 0 {
                    group_outputs.push(h);
                    ffn_outputs.push(f);
                }
            }
            let logits = self.readout(tape, h, &packed.readout_rows)?;
            buckets.push(BucketTrace {
                members: packed.members,
                offsets: packed.offsets,
                padded_lens: packed.padded_lens,
                readout_rows: packed.readout_rows,
                depth: packed.depth,
                sublayer_calls: schedule.len(),
                embedding,
                group_outputs,
                ffn_outputs,
                logits,
            });
        }
        Ok(ForwardTrace {
            batch_size: seqs.len(),
            buckets,
        })
    }

    /// Readout logits for each sequence without keeping the whole trace
    /// alive; memory stays bounded by one sublayer.
    pub fn predict_logits(&self, seqs: &[&[usize]]) -> Result<Vec<Vec<F>>> {
        let mut out = vec![Vec::new(); seqs.len()];
        for packed in self.pack(seqs)? {
            let mut h = {
                let mut tape = Tape::new();
                let table = tape.param(&self.params, self.embed);
                let e = tape.embedding(table, &packed.tokens)?;
                tape.value(e).clone()
            };
            let mut patterns: HashMap<usize, Arc<AttnPattern>> = HashMap::new();
            for (k, group) in self.schedule(packed.depth) {
                let pattern = patterns
                    .entry(group)
                    .or_insert_with(|| Arc::new(self.pattern_for(group, &packed.padded_lens)))
                    .clone();
                let mut tape = Tape::new();
                let hv = tape.constant(h);
                let (next, _) = self.sublayer(&mut tape, hv, &self.sublayers[k], &pattern, AttentionRoute::Sparse)?;
                h = tape.value(next).clone();
            }
            let mut tape = Tape::new();
            let hv = tape.constant(h);
            let logits = self.readout(&mut tape, hv, &packed.readout_rows)?;
            let l = tape.value(logits);
            for (r, &i) in packed.members.iter().enumerate() {
                out[i] = l.row(r).to_vec();
            }
        }
        Ok(out)
    }

    pub fn logits(&self, tokens: &[usize]) -> Result<Vec<F>> {
        Ok(self.predict_logits(&[tokens])?.remove(0))
    }
}

/// Index of the largest logit; ties resolve to the lowest index.
pub fn argmax<F: Float>(logits: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::make_task;

    fn tiny(arch: Arch) -> ModelConfig {
        let t = make_task("parity").unwrap();
        ModelConfig {
            arch,
            d_model: 8,
            n_heads: 2,
            d_ffn: 16,
            thickness: 2,
            ..ModelConfig::for_task(&t)
        }
    }

    #[test]
    fn sparse_matches_dense() {
        for arch in [Arch::Regular, Arch::Vanilla { layers: 2, distance_buckets: 5 }] {
            let mut model = Model::<f64>::new(tiny(arch), 7).unwrap();
            // non-zero relative scalars so the bias path is exercised
            for p in model.params_mut().iter_mut() {
                if p.name.ends_with("attn.r") {
                    let n = p.value.len();
                    for (i, x) in p.value.data_mut().iter_mut().enumerate() {
                        *x = (i as f64 - n as f64 / 2.0) * 0.3;
                    }
                }
            }
            let seqs: Vec<Vec<usize>> = vec![vec![0, 1, 1], vec![1; 9], vec![0], vec![1, 0, 1, 0, 1]];
            let refs: Vec<&[usize]> = seqs.iter().map(|s| s.as_slice()).collect();
            let mut a = Tape::new();
            let ta = model.forward_tape(&mut a, &refs, AttentionRoute::Sparse).unwrap();
            let mut b = Tape::new();
            let tb = model.forward_tape(&mut b, &refs, AttentionRoute::Dense).unwrap();
            let (la, lb) = (ta.logits(&a), tb.logits(&b));
            let streamed = model.predict_logits(&refs).unwrap();
            for i in 0..seqs.len() {
                for j in 0..la[i].len() {
                    assert!((la[i][j] - lb[i][j]).abs() < 1e-12);
                    assert!((la[i][j] - streamed[i][j]).abs() < 1e-12);
                }
            }
            let la_ = ta.loss(&mut a, &[0, 1, 0, 1]).unwrap();
            let ga = a.backward(la_).unwrap();
            let lb_ = tb.loss(&mut b, &[0, 1, 0, 1]).unwrap();
            let gb = b.backward(lb_).unwrap();
            let mut sa = model.params().clone();
            let mut sb = model.params().clone();
            sa.zero_grad();
            sb.zero_grad();
            ga.accumulate_into(&mut sa, 1.0);
            gb.accumulate_into(&mut sb, 1.0);
            for (x, y) in sa.iter().zip(sb.iter()) {
                for (u, v) in x.grad.data().iter().zip(y.grad.data()) {
                    assert!((u - v).abs() < 1e-10, "{}", x.name);
                }
            }
        }
    }

    #[test]
    fn single_token_runs_one_group() {
        let model = Model::<f32>::new(tiny(Arch::Regular), 1).unwrap();
        let mut tape = Tape::new();
        let tr = model.forward_tape(&mut tape, &[&[1]], AttentionRoute::Sparse).unwrap();
        assert_eq!(tr.buckets[0].depth, 1);
        assert_eq!(tr.buckets[0].sublayer_calls, 2);
        assert_eq!(tr.buckets[0].padded_lens, vec![2]);
    }

    #[test]
    fn start_token_separates_lone_and_repeated_positions() {
        // "1" attends only to itself; the last "1" of "1 1" averages two
        // identical values. Without a start token both readouts coincide,
        // although the parities differ.
        let model = Model::<f64>::new(tiny(Arch::Regular), 4).unwrap();
        assert_eq!(model.logits(&[1]).unwrap(), model.logits(&[1, 1]).unwrap());

        let mut cfg = tiny(Arch::Regular);
        cfg.bos = true;
        cfg.fit_task(&make_task("parity").unwrap());
        let model = Model::<f64>::new(cfg, 4).unwrap();
        assert_ne!(model.logits(&[1]).unwrap(), model.logits(&[1, 1]).unwrap());
        assert_eq!(model.depth_for(1).unwrap(), 1);
        assert_eq!(model.depth_for(2).unwrap(), 2);
        let mut tape = Tape::new();
        let tr = model.forward_tape(&mut tape, &[&[1, 0, 1]], AttentionRoute::Sparse).unwrap();
        assert_eq!((tr.buckets[0].padded_lens[0], tr.buckets[0].readout_rows[0]), (4, 3));
    }

    #[test]
    fn batch_order_is_independent_of_bucketing() {
        let model = Model::<f64>::new(tiny(Arch::Regular), 3).unwrap();
        let long = vec![1usize; 17];
        let short = vec![0usize, 1];
        let both = model.predict_logits(&[&long, &short]).unwrap();
        assert_eq!(both[0], model.logits(&long).unwrap());
        assert_eq!(both[1], model.logits(&short).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = tiny(Arch::Regular);
        cfg.max_groups = 3;
        let model = Model::<f32>::new(cfg, 1).unwrap();
        assert!(matches!(model.logits(&[0; 9]), Err(Error::DepthExceeded { needed: 4, .. })));
        assert!(model.logits(&[]).is_err());
        assert!(model.logits(&[99]).is_err());
    }

    #[test]
    fn parameter_count_is_independent_of_length() {
        let model = Model::<f32>::new(tiny(Arch::Regular), 1).unwrap();
        let n = model.params().num_elements();
        let d = 8;
        let v = model.config().vocab_size;
        let per_block = 4 * d + 3 * d * d + 3 * d + d * d + d + 2 * 2 + 2 * d * 16 + 16 + d;
        assert_eq!(n, v * d + per_block * 2 + 2 * d + d * v);
    }
}
