//! Word-level denoising stand-in for a pretrained sequence-to-sequence infiller.
//!
//! The decoder is conditioned on the previous token, the mean source embedding and a
//! copy pointer into the source. The pointer advances when the emitted token equals the
//! source token under it; at the mask it waits until the token after the mask is emitted.
//! Three scalar features per candidate (pointer copy, resume after the mask, occurs in the
//! source) are added to a bilinear language-model score.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DecodeLimits, GeneratorError, Result, Seq2Seq};
use crate::nn::{gaussian_init, log_sum_exp, softmax_in_place, Adam};
use crate::seeds::rng;
use crate::text::{detokenize, tokenize, MASK, UNK};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const MASK_ID: u32 = 4;
const SPECIALS: [&str; 5] = ["<pad>", "<s>", "<eos>", UNK, MASK];
const N_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TinyDenoiserParams {
    pub dim: usize,
    pub init_std: f64,
    /// Multiplier mapping configured learning rates onto this model's scale.
    pub lr_scale: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
    /// Inclusive bounds on the length of spans masked during pretraining.
    pub pretrain_span: (usize, usize),
}

impl Default for TinyDenoiserParams {
    fn default() -> Self {
        Self {
            dim: 24,
            init_std: 0.1,
            lr_scale: 2000.0,
            pretrain_epochs: 30,
            pretrain_lr: 0.05,
            pretrain_batch: 8,
            pretrain_span: (3, 8),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TinyDenoiser {
    hyper: TinyDenoiserParams,
    vocab: Vec<String>,
    params: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    #[serde(skip)]
    adam: Option<Adam>,
}

struct Source {
    ids: Vec<u32>,
    ctx: Vec<f64>,
    members: Vec<u32>,
}

impl Source {
    fn copy_target(&self, ptr: usize) -> Option<u32> {
        match self.ids.get(ptr) {
            Some(&MASK_ID) => None,
            Some(&id) => Some(id),
            None => Some(EOS),
        }
    }

    fn in_span(&self, ptr: usize) -> bool {
        self.ids.get(ptr) == Some(&MASK_ID)
    }

    fn resume_target(&self, ptr: usize) -> Option<u32> {
        self.in_span(ptr).then(|| self.ids.get(ptr + 1).copied().unwrap_or(EOS))
    }

    fn advance(&self, ptr: usize, emitted: u32) -> usize {
        if self.in_span(ptr) {
            if self.resume_target(ptr) == Some(emitted) {
                ptr + 2
            } else {
                ptr
            }
        } else if self.copy_target(ptr) == Some(emitted) && ptr < self.ids.len() {
            ptr + 1
        } else {
            ptr
        }
    }
}

struct Layout {
    v: usize,
    d: usize,
}

impl Layout {
    fn emb(&self, id: u32) -> usize {
        id as usize * self.d
    }
    fn out(&self, id: u32) -> usize {
        (self.v + id as usize) * self.d
    }
    fn bias(&self) -> usize {
        2 * self.v * self.d
    }
    fn span(&self) -> usize {
        self.bias() + self.v
    }
    fn features(&self) -> usize {
        self.span() + self.d
    }
    fn len(&self) -> usize {
        self.features() + N_FEATURES
    }
}

/// Keeps at most `max_len` ids, cutting the tail unless that would drop the mask, in
/// which case a window centred on the mask is kept.
fn truncate_around_mask(ids: &mut Vec<u32>, max_len: usize) {
    if ids.len() <= max_len {
        return;
    }
    match ids.iter().position(|&i| i == MASK_ID) {
        Some(m) if m >= max_len => {
            let start = (m + 1 - max_len / 2).min(ids.len() - max_len);
            ids.drain(..start);
            ids.truncate(max_len);
        }
        _ => ids.truncate(max_len),
    }
}

impl TinyDenoiser {
    /// Fresh model whose vocabulary is every token of `texts`.
    pub fn new<'a>(texts: impl IntoIterator<Item = &'a str>, hyper: TinyDenoiserParams, seed: u64) -> Self {
        let mut words: Vec<&str> = texts
            .into_iter()
            .flat_map(tokenize)
            .filter(|t| !SPECIALS.contains(t))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        words.sort_unstable();
        let vocab: Vec<String> = SPECIALS.iter().copied().chain(words).map(str::to_string).collect();
        let layout = Layout { v: vocab.len(), d: hyper.dim };
        let mut g = rng(seed);
        let mut params = vec![0.0; layout.len()];
        let emb_out = gaussian_init(layout.bias(), hyper.init_std, &mut g);
        params[..layout.bias()].copy_from_slice(&emb_out);
        let span = gaussian_init(hyper.dim, hyper.init_std, &mut g);
        params[layout.span()..layout.features()].copy_from_slice(&span);
        let mut model = Self { hyper, vocab, params, index: HashMap::new(), adam: None };
        model.rebuild_index();
        model
    }

    /// Builds a model over `sources` and pretrains it by random-span denoising on them.
    /// Each source's own mask marker is removed before a fresh span is masked, so
    /// pretraining never sees what any source's marker hides.
    pub fn pretrained(sources: &[&str], hyper: TinyDenoiserParams, seed: u64) -> Result<Self> {
        let mut model = Self::new(sources.iter().copied(), hyper, seed);
        model.pretrain(sources, seed)?;
        Ok(model)
    }

    /// Extends a pretrained model's vocabulary with the tokens of `texts`; new rows are
    /// freshly initialized.
    pub fn with_extended_vocab<'a>(&self, texts: impl IntoIterator<Item = &'a str>, seed: u64) -> Self {
        let extra = Self::new(texts, self.hyper, seed);
        let mut vocab = self.vocab.clone();
        for w in &extra.vocab {
            if !self.index.contains_key(w) {
                vocab.push(w.clone());
            }
        }
        let old = Layout { v: self.vocab.len(), d: self.hyper.dim };
        let new = Layout { v: vocab.len(), d: self.hyper.dim };
        let mut g = rng(seed ^ 0x5eed);
        let mut params = gaussian_init(new.len(), self.hyper.init_std, &mut g);
        let d = self.hyper.dim;
        for id in 0..old.v as u32 {
            params[new.emb(id)..new.emb(id) + d].copy_from_slice(&self.params[old.emb(id)..old.emb(id) + d]);
            params[new.out(id)..new.out(id) + d].copy_from_slice(&self.params[old.out(id)..old.out(id) + d]);
            params[new.bias() + id as usize] = self.params[old.bias() + id as usize];
        }
        for i in old.v..new.v {
            params[new.bias() + i] = 0.0;
        }
        params[new.span()..].copy_from_slice(&self.params[old.span()..]);
        let mut model = Self { hyper: self.hyper, vocab, params, index: HashMap::new(), adam: None };
        model.rebuild_index();
        model
    }

    fn rebuild_index(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    }

    fn layout(&self) -> Layout {
        Layout { v: self.vocab.len(), d: self.hyper.dim }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn hyper(&self) -> &TinyDenoiserParams {
        &self.hyper
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).into_iter().map(|t| self.index.get(t).copied().unwrap_or(UNK_ID)).collect()
    }

    fn source(&self, mut ids: Vec<u32>, max_len: usize) -> Source {
        truncate_around_mask(&mut ids, max_len);
        let l = self.layout();
        let mut ctx = vec![0.0; l.d];
        for &id in &ids {
            let e = &self.params[l.emb(id)..l.emb(id) + l.d];
            ctx.iter_mut().zip(e).for_each(|(c, x)| *c += x);
        }
        if !ids.is_empty() {
            ctx.iter_mut().for_each(|c| *c /= ids.len() as f64);
        }
        let members = ids.iter().copied().filter(|&i| i > MASK_ID).collect::<BTreeSet<_>>().into_iter().collect();
        Source { ids, ctx, members }
    }

    fn hidden(&self, src: &Source, prev: u32, ptr: usize) -> Vec<f64> {
        let l = self.layout();
        let e = &self.params[l.emb(prev)..l.emb(prev) + l.d];
        let span = src.in_span(ptr);
        (0..l.d)
            .map(|k| {
                let mut x = e[k] + src.ctx[k];
                if span {
                    x += self.params[l.span() + k];
                }
                x.tanh()
            })
            .collect()
    }

    fn feature_ids(&self, src: &Source, ptr: usize) -> [Option<u32>; 2] {
        [src.copy_target(ptr), src.resume_target(ptr)]
    }

    fn logits(&self, src: &Source, h: &[f64], ptr: usize) -> Vec<f64> {
        let l = self.layout();
        let mut logits: Vec<f64> = (0..l.v as u32)
            .map(|v| {
                let o = &self.params[l.out(v)..l.out(v) + l.d];
                o.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() + self.params[l.bias() + v as usize]
            })
            .collect();
        let w = &self.params[l.features()..];
        for (k, id) in self.feature_ids(src, ptr).into_iter().enumerate() {
            if let Some(id) = id {
                logits[id as usize] += w[k];
            }
        }
        for &id in &src.members {
            logits[id as usize] += w[2];
        }
        logits
    }

    /// Summed token cross-entropy of `target` (EOS appended) given `src`, accumulating
    /// gradients into `grad` when given. Returns (loss sum, token count).
    fn example(&self, src: &Source, target: &[u32], mut grad: Option<&mut [f64]>) -> (f64, usize) {
        let l = self.layout();
        let mut loss = 0.0;
        let mut dctx = vec![0.0; l.d];
        let mut ptr = 0;
        let mut prev = BOS;
        for &y in target.iter().chain(std::iter::once(&EOS)) {
            let h = self.hidden(src, prev, ptr);
            let mut p = self.logits(src, &h, ptr);
            loss += log_sum_exp(&p) - p[y as usize];
            if let Some(g) = grad.as_deref_mut() {
                softmax_in_place(&mut p);
                p[y as usize] -= 1.0;
                let mut dh = vec![0.0; l.d];
                for v in 0..l.v as u32 {
                    let gv = p[v as usize];
                    let o = l.out(v);
                    for k in 0..l.d {
                        dh[k] += gv * self.params[o + k];
                        g[o + k] += gv * h[k];
                    }
                    g[l.bias() + v as usize] += gv;
                }
                for (k, id) in self.feature_ids(src, ptr).into_iter().enumerate() {
                    if let Some(id) = id {
                        g[l.features() + k] += p[id as usize];
                    }
                }
                for &id in &src.members {
                    g[l.features() + 2] += p[id as usize];
                }
                let span = src.in_span(ptr);
                for k in 0..l.d {
                    let dx = dh[k] * (1.0 - h[k] * h[k]);
                    g[l.emb(prev) + k] += dx;
                    dctx[k] += dx;
                    if span {
                        g[l.span() + k] += dx;
                    }
                }
            }
            ptr = src.advance(ptr, y);
            prev = y;
        }
        if let Some(g) = grad {
            let n = src.ids.len().max(1) as f64;
            for &id in &src.ids {
                for k in 0..l.d {
                    g[l.emb(id) + k] += dctx[k] / n;
                }
            }
        }
        (loss, target.len() + 1)
    }

    fn step_ids(&mut self, batch: &[(Vec<u32>, Vec<u32>)], lr: f64) -> f64 {
        let limits = DecodeLimits::default();
        let mut grad = vec![0.0; self.params.len()];
        let (mut loss, mut count) = (0.0, 0);
        for (s, t) in batch {
            let src = self.source(s.clone(), limits.max_len);
            let mut t = t.clone();
            t.truncate(limits.max_len + limits.max_span);
            let (l, c) = self.example(&src, &t, Some(&mut grad));
            loss += l;
            count += c;
        }
        let count = count.max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= count);
        let len = self.params.len();
        let adam = self.adam.get_or_insert_with(|| Adam::new(len));
        adam.step(&mut self.params, &grad, lr);
        loss / count
    }

    fn pretrain(&mut self, sources: &[&str], seed: u64) -> Result<()> {
        let mut g = rng(seed.wrapping_add(1));
        let texts: Vec<Vec<u32>> = sources
            .iter()
            .map(|s| self.encode(s).into_iter().filter(|&i| i != MASK_ID).collect::<Vec<_>>())
            .filter(|t: &Vec<u32>| t.len() > self.hyper.pretrain_span.0)
            .collect();
        let batch = self.hyper.pretrain_batch.max(1);
        for epoch in 0..self.hyper.pretrain_epochs {
            let mut order: Vec<usize> = (0..texts.len()).collect();
            order.shuffle(&mut g);
            for (step, chunk) in order.chunks(batch).enumerate() {
                let pairs: Vec<(Vec<u32>, Vec<u32>)> = chunk
                    .iter()
                    .map(|&i| {
                        let t = &texts[i];
                        let (lo, hi) = self.hyper.pretrain_span;
                        let len = g.random_range(lo..=hi.min(t.len() - 1).max(lo));
                        let start = g.random_range(0..=t.len() - len);
                        let mut s = t[..start].to_vec();
                        s.push(MASK_ID);
                        s.extend_from_slice(&t[start + len..]);
                        (s, t.clone())
                    })
                    .collect();
                let loss = self.step_ids(&pairs, self.hyper.pretrain_lr);
                if !loss.is_finite() {
                    return Err(GeneratorError::DivergenceDetected { epoch: epoch + 1, step: step + 1 });
                }
            }
        }
        self.adam = None;
        Ok(())
    }

    /// Drops optimizer state, as when a checkpoint is restored.
    pub fn reset_optimizer(&mut self) {
        self.adam = None;
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| GeneratorError::Model(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| GeneratorError::Model(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| GeneratorError::Model(format!("{}: {e}", path.display())))?;
        let mut m: Self = serde_json::from_slice(&bytes).map_err(|e| GeneratorError::Model(e.to_string()))?;
        if m.params.len() != m.layout().len() {
            return Err(GeneratorError::Model("parameter count does not match vocabulary".into()));
        }
        m.rebuild_index();
        Ok(m)
    }

    fn decode_ids(&self, src: &Source, beam: usize, min_len: usize, max_len: usize) -> Vec<u32> {
        struct Hyp {
            ids: Vec<u32>,
            ptr: usize,
            logp: f64,
            done: bool,
        }
        let score = |h: &Hyp| h.logp / h.ids.len().max(1) as f64;
        let mut cache: HashMap<(u32, usize), Vec<f64>> = HashMap::new();
        let mut beams = vec![Hyp { ids: vec![], ptr: 0, logp: 0.0, done: false }];
        let beam = beam.max(1);
        while beams.iter().any(|h| !h.done) {
            let mut next: Vec<Hyp> = Vec::new();
            for h in beams {
                if h.done {
                    next.push(h);
                    continue;
                }
                let prev = h.ids.last().copied().unwrap_or(BOS);
                let lp = cache.entry((prev, h.ptr)).or_insert_with(|| {
                    let hid = self.hidden(src, prev, h.ptr);
                    let mut l = self.logits(src, &hid, h.ptr);
                    let z = log_sum_exp(&l);
                    l.iter_mut().for_each(|x| *x -= z);
                    l
                });
                let len = h.ids.len() + 1;
                let allowed = |v: u32| match v {
                    PAD | BOS | UNK_ID | MASK_ID => false,
                    EOS => len > min_len,
                    _ => len <= max_len,
                };
                let mut cands: Vec<(u32, f64)> =
                    (0..lp.len() as u32).filter(|&v| allowed(v)).map(|v| (v, lp[v as usize])).collect();
                cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                for &(v, l) in cands.iter().take(beam) {
                    let mut ids = h.ids.clone();
                    ids.push(v);
                    next.push(Hyp { ptr: src.advance(h.ptr, v), ids, logp: h.logp + l, done: v == EOS });
                }
            }
            next.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| a.ids.cmp(&b.ids)));
            next.truncate(beam);
            beams = next;
        }
        let mut best = beams.into_iter().next().map(|h| h.ids).unwrap_or_default();
        if best.last() == Some(&EOS) {
            best.pop();
        }
        best
    }
}

impl Seq2Seq for TinyDenoiser {
    fn beam_decode(&self, masked: &str, beam: usize, limits: DecodeLimits) -> Result<String> {
        let src = self.source(self.encode(masked), limits.max_len);
        let context = src.ids.len().saturating_sub(1);
        let ids = self.decode_ids(&src, beam, context + limits.min_span, context + limits.max_span);
        let words: Vec<&str> = ids.iter().map(|&i| self.vocab[i as usize].as_str()).collect();
        Ok(detokenize(&words))
    }

    fn train_step(&mut self, batch: &[(&str, &str)], lr: f64) -> Result<f64> {
        let pairs: Vec<(Vec<u32>, Vec<u32>)> = batch.iter().map(|(s, t)| (self.encode(s), self.encode(t))).collect();
        let scaled = lr * self.hyper.lr_scale;
        Ok(self.step_ids(&pairs, scaled))
    }

    fn loss(&self, batch: &[(&str, &str)]) -> f64 {
        let limits = DecodeLimits::default();
        let (mut loss, mut count) = (0.0, 0);
        for (s, t) in batch {
            let src = self.source(self.encode(s), limits.max_len);
            let mut t = self.encode(t);
            t.truncate(limits.max_len + limits.max_span);
            let (l, c) = self.example(&src, &t, None);
            loss += l;
            count += c;
        }
        loss / count.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> TinyDenoiser {
        let hyper = TinyDenoiserParams { dim: 4, ..Default::default() };
        let mut m = TinyDenoiser::new(["museums matter because kids learn there ."], hyper, 3);
        let l = m.layout();
        for k in 0..N_FEATURES {
            m.params[l.features() + k] = 0.3 * (k as f64 + 1.0);
        }
        m
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = small();
        let s = m.encode("kids learn <mask> .");
        let t = m.encode("kids learn museums matter .");
        let src = m.source(s.clone(), 512);
        let mut grad = vec![0.0; m.params.len()];
        m.example(&src, &t, Some(&mut grad));
        let eps = 1e-6;
        for (i, &g) in grad.iter().enumerate() {
            let mut plus = m.clone();
            plus.params[i] += eps;
            let mut minus = m.clone();
            minus.params[i] -= eps;
            let lp = plus.example(&plus.source(s.clone(), 512), &t, None).0;
            let lm = minus.example(&minus.source(s.clone(), 512), &t, None).0;
            assert_abs_diff_eq!(g, (lp - lm) / (2.0 * eps), epsilon = 1e-5);
        }
    }

    #[test]
    fn pointer_waits_at_mask_until_resumed() {
        let m = small();
        let src = m.source(m.encode("kids learn <mask> ."), 512);
        let [kids, learn, museums, dot] = ["kids", "learn", "museums", "."].map(|w| m.index[w]);
        let mut ptr = 0;
        for (tok, expect) in [(kids, 1), (learn, 2), (museums, 2), (museums, 2), (dot, 4)] {
            ptr = src.advance(ptr, tok);
            assert_eq!(ptr, expect);
        }
        assert_eq!(src.copy_target(ptr), Some(EOS));
    }

    #[test]
    fn truncation_keeps_the_mask() {
        let mut ids: Vec<u32> = (10..30).collect();
        ids[15] = MASK_ID;
        truncate_around_mask(&mut ids, 8);
        assert_eq!(ids.len(), 8);
        assert!(ids.contains(&MASK_ID));
        let mut ids: Vec<u32> = (10..30).collect();
        ids[2] = MASK_ID;
        truncate_around_mask(&mut ids, 8);
        assert_eq!(ids, [10, 11, MASK_ID, 13, 14, 15, 16, 17]);
    }

    #[test]
    fn overfits_and_decodes_the_training_target() {
        let pairs = [
            ("Kids learn there, so <mask>.", "Kids learn there, so museums matter."),
            ("Buses are cheap. Thus, <mask>.", "Buses are cheap. Thus, people should ride buses."),
        ];
        let texts = pairs.iter().flat_map(|(s, t)| [*s, *t]);
        let mut m = TinyDenoiser::new(texts, TinyDenoiserParams::default(), 1);
        let batch: Vec<(&str, &str)> = pairs.to_vec();
        let first = m.loss(&batch);
        for _ in 0..300 {
            m.train_step(&batch, 5e-5).unwrap();
        }
        assert!(m.loss(&batch) < first / 10.0);
        let limits = DecodeLimits { min_span: 2, ..Default::default() };
        for (s, t) in pairs {
            assert_eq!(m.beam_decode(s, 5, limits).unwrap(), t);
        }
    }

    #[test]
    fn decoding_is_deterministic_and_round_trips_through_disk() {
        let sources = ["Kids learn there, so <mask>.", "Buses are cheap and clean. Thus, <mask>."];
        let m = TinyDenoiser::pretrained(&sources, TinyDenoiserParams::default(), 5).unwrap();
        let a = m.beam_decode(sources[1], 5, DecodeLimits::default()).unwrap();
        assert_eq!(a, m.beam_decode(sources[1], 5, DecodeLimits::default()).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = TinyDenoiser::load(&path).unwrap();
        assert_eq!(a, back.beam_decode(sources[1], 5, DecodeLimits::default()).unwrap());
    }

    #[test]
    fn extended_vocab_preserves_known_rows() {
        let m = TinyDenoiser::new(["kids learn"], TinyDenoiserParams::default(), 2);
        let e = m.with_extended_vocab(["kids play games"], 4);
        assert_eq!(e.vocab_size(), m.vocab_size() + 2);
        let logits = |model: &TinyDenoiser| {
            let src = model.source(model.encode("kids <mask>"), 512);
            let h = model.hidden(&src, BOS, 0);
            model.logits(&src, &h, 0)
        };
        let (old, new) = (logits(&m), logits(&e));
        for (a, b) in old.iter().zip(&new) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
