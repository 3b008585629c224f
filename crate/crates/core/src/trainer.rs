//! Negative-sampling training with per-coordinate AdaGrad.
//!
//! Each positive triple is followed by `neg` corruptions of its head or tail.
//! Every example costs one score evaluation, one gradient and a sparse update
//! of the three embedding rows it touches, including the `λθ/d` L2 pull on
//! those rows.
//!
//! With `workers == 1` training is serial and bit-reproducible from the
//! seed. With more workers the positives of an epoch are partitioned and the
//! workers update shared parameters without locks. Lost or interleaved
//! updates are accepted; only convergence is expected, not reproducibility.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{FilterIndex, Triple, TripleSet};
use crate::error::{Error, Result};
use crate::scoring::{init_embeddings, probability, EmbeddingTable, ModelConfig, ScoreFn, TripleGradient};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Attempts at drawing a corruption outside the filter before keeping one anyway.
const FILTER_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Segment count `k`.
    pub k: usize,
    pub dim: usize,
    /// L2 coefficient `λ`.
    pub lambda: f64,
    /// Negatives per positive, `η`.
    pub neg: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub workers: usize,
    pub score_fn: ScoreFn,
    /// Redraw corruptions that are known true triples.
    pub filter_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 4,
            dim: 400,
            lambda: 0.01,
            neg: 100,
            lr: 0.1,
            epochs: 100,
            seed: 0,
            workers: 1,
            score_fn: ScoreFn::F4,
            filter_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.neg == 0 {
            return Err(Error::Config("neg must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            segments: self.k,
            seed: self.seed,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.workers == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: Label,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        Self {
            triple,
            label: Label::Positive,
        }
    }

    pub fn negative(triple: Triple) -> Self {
        Self {
            triple,
            label: Label::Negative,
        }
    }
}

/// AdaGrad squared-gradient accumulators, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub accum_entities: Vec<f64>,
    pub accum_relations: Vec<f64>,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(table: &EmbeddingTable) -> Self {
        Self {
            accum_entities: vec![0.0; table.entities().len()],
            accum_relations: vec![0.0; table.relations().len()],
            epsilon: ADAGRAD_EPSILON,
        }
    }
}

/// Replaces the head or tail (chosen uniformly) by a different, uniformly
/// drawn entity.
pub fn corrupt(pos: Triple, num_entities: usize, rng: &mut impl Rng) -> Triple {
    let replace_head = rng.gen_bool(0.5);
    let old = if replace_head { pos.h } else { pos.t };
    let mut e = rng.gen_range(0..num_entities - 1);
    if e >= old {
        e += 1;
    }
    if replace_head {
        Triple::new(e, pos.r, pos.t)
    } else {
        Triple::new(pos.h, pos.r, e)
    }
}

pub fn sample_negatives(
    pos: Triple,
    neg: usize,
    num_entities: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledTriple>> {
    if num_entities < 2 {
        return Err(Error::TooFewEntities(num_entities));
    }
    Ok((0..neg)
        .map(|_| LabeledTriple::negative(corrupt(pos, num_entities, rng)))
        .collect())
}

fn corrupt_filtered(pos: Triple, num_entities: usize, filter: Option<&FilterIndex>, rng: &mut impl Rng) -> Triple {
    let mut candidate = corrupt(pos, num_entities, rng);
    if let Some(filter) = filter {
        for _ in 0..FILTER_RETRIES {
            if !filter.contains(&candidate) {
                break;
            }
            candidate = corrupt(pos, num_entities, rng);
        }
    }
    candidate
}

/// `-log σ(label · score)`, as a softplus that neither overflows nor goes negative.
pub fn loss_term(score: f64, label: Label) -> f64 {
    let z = -label.sign() * score;
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Parameter storage a training step reads rows from and applies AdaGrad
/// updates to.
trait ParamStore {
    fn load_entity(&self, id: usize, out: &mut [f64]);
    fn load_relation(&self, id: usize, out: &mut [f64]);
    fn update_entity(&mut self, id: usize, grad: &[f64], lr: f64);
    fn update_relation(&mut self, id: usize, grad: &[f64], lr: f64);
}

#[inline]
fn adagrad(params: &mut [f64], accum: &mut [f64], grad: &[f64], lr: f64, eps: f64) {
    for ((p, a), g) in params.iter_mut().zip(accum.iter_mut()).zip(grad) {
        *a += g * g;
        *p -= lr * g / (*a + eps).sqrt();
    }
}

struct Exclusive<'a> {
    table: &'a mut EmbeddingTable,
    opt: &'a mut OptimizerState,
}

impl ParamStore for Exclusive<'_> {
    fn load_entity(&self, id: usize, out: &mut [f64]) {
        out.copy_from_slice(self.table.entity(id));
    }

    fn load_relation(&self, id: usize, out: &mut [f64]) {
        out.copy_from_slice(self.table.relation(id));
    }

    fn update_entity(&mut self, id: usize, grad: &[f64], lr: f64) {
        let d = grad.len();
        let accum = &mut self.opt.accum_entities[id * d..(id + 1) * d];
        adagrad(self.table.entity_mut(id), accum, grad, lr, self.opt.epsilon);
    }

    fn update_relation(&mut self, id: usize, grad: &[f64], lr: f64) {
        let d = grad.len();
        let accum = &mut self.opt.accum_relations[id * d..(id + 1) * d];
        adagrad(self.table.relation_mut(id), accum, grad, lr, self.opt.epsilon);
    }
}

/// Parameters shared between workers without locks. Each coordinate is an
/// `f64` stored in an `AtomicU64` and accessed with relaxed loads and stores,
/// so concurrent updates to one row may be lost but never tear a value.
struct Shared {
    dim: usize,
    entities: Vec<AtomicU64>,
    relations: Vec<AtomicU64>,
    accum_entities: Vec<AtomicU64>,
    accum_relations: Vec<AtomicU64>,
    epsilon: f64,
}

fn to_atomic(values: &[f64]) -> Vec<AtomicU64> {
    values.iter().map(|v| AtomicU64::new(v.to_bits())).collect()
}

fn from_atomic(values: &[AtomicU64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| f64::from_bits(v.load(Ordering::Relaxed)))
        .collect()
}

fn load_row(src: &[AtomicU64], id: usize, out: &mut [f64]) {
    let d = out.len();
    for (o, v) in out.iter_mut().zip(&src[id * d..(id + 1) * d]) {
        *o = f64::from_bits(v.load(Ordering::Relaxed));
    }
}

fn adagrad_shared(params: &[AtomicU64], accum: &[AtomicU64], id: usize, grad: &[f64], lr: f64, eps: f64) {
    let d = grad.len();
    let rows = params[id * d..(id + 1) * d].iter().zip(&accum[id * d..(id + 1) * d]);
    for ((p, a), g) in rows.zip(grad) {
        let acc = f64::from_bits(a.load(Ordering::Relaxed)) + g * g;
        a.store(acc.to_bits(), Ordering::Relaxed);
        let value = f64::from_bits(p.load(Ordering::Relaxed)) - lr * g / (acc + eps).sqrt();
        p.store(value.to_bits(), Ordering::Relaxed);
    }
}

impl Shared {
    fn new(table: &EmbeddingTable, opt: &OptimizerState) -> Self {
        Self {
            dim: table.dim(),
            entities: to_atomic(table.entities()),
            relations: to_atomic(table.relations()),
            accum_entities: to_atomic(&opt.accum_entities),
            accum_relations: to_atomic(&opt.accum_relations),
            epsilon: opt.epsilon,
        }
    }

    fn into_parts(self) -> Result<(EmbeddingTable, OptimizerState)> {
        let table = EmbeddingTable::from_parts(self.dim, from_atomic(&self.entities), from_atomic(&self.relations))?;
        let opt = OptimizerState {
            accum_entities: from_atomic(&self.accum_entities),
            accum_relations: from_atomic(&self.accum_relations),
            epsilon: self.epsilon,
        };
        Ok((table, opt))
    }
}

impl ParamStore for &Shared {
    fn load_entity(&self, id: usize, out: &mut [f64]) {
        load_row(&self.entities, id, out);
    }

    fn load_relation(&self, id: usize, out: &mut [f64]) {
        load_row(&self.relations, id, out);
    }

    fn update_entity(&mut self, id: usize, grad: &[f64], lr: f64) {
        adagrad_shared(&self.entities, &self.accum_entities, id, grad, lr, self.epsilon);
    }

    fn update_relation(&mut self, id: usize, grad: &[f64], lr: f64) {
        adagrad_shared(&self.relations, &self.accum_relations, id, grad, lr, self.epsilon);
    }
}

/// Per-worker buffers reused across steps.
struct StepBuffers {
    h: Vec<f64>,
    r: Vec<f64>,
    t: Vec<f64>,
    grad: TripleGradient,
}

impl StepBuffers {
    fn new(dim: usize) -> Self {
        Self {
            h: vec![0.0; dim],
            r: vec![0.0; dim],
            t: vec![0.0; dim],
            grad: TripleGradient::zeros(dim),
        }
    }
}

fn step(example: LabeledTriple, store: &mut impl ParamStore, cfg: &TrainConfig, buf: &mut StepBuffers) -> Result<f64> {
    let Triple { h, r, t } = example.triple;
    store.load_entity(h, &mut buf.h);
    store.load_relation(r, &mut buf.r);
    store.load_entity(t, &mut buf.t);

    let y = example.label.sign();
    let score = cfg.score_fn.score(&buf.h, &buf.r, &buf.t, cfg.k);
    let loss = loss_term(score, example.label);
    // ∂/∂score of -log σ(y·score)
    let dloss = (probability(y * score) - 1.0) * y;
    cfg.score_fn.gradient(&buf.h, &buf.r, &buf.t, cfg.k, &mut buf.grad);

    let decay = cfg.lambda / cfg.dim as f64;
    let grad = &mut buf.grad;
    for (g, p) in grad.d_r.iter_mut().zip(&buf.r) {
        *g = dloss * *g + decay * p;
    }
    if h == t {
        // One row plays both roles: its gradient is the sum of both partials
        // and it receives a single L2 pull.
        for ((gh, gt), p) in grad.d_h.iter_mut().zip(&grad.d_t).zip(&buf.h) {
            *gh = dloss * (*gh + gt) + decay * p;
        }
    } else {
        for (g, p) in grad.d_h.iter_mut().zip(&buf.h) {
            *g = dloss * *g + decay * p;
        }
        for (g, p) in grad.d_t.iter_mut().zip(&buf.t) {
            *g = dloss * *g + decay * p;
        }
    }
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite {
            triple: example.triple,
            epoch: None,
        });
    }

    store.update_relation(r, &grad.d_r, cfg.lr);
    store.update_entity(h, &grad.d_h, cfg.lr);
    if h != t {
        store.update_entity(t, &grad.d_t, cfg.lr);
    }
    Ok(loss)
}

/// One AdaGrad step on a single labeled example; returns its loss before the
/// update.
pub fn sgd_step(
    example: LabeledTriple,
    table: &mut EmbeddingTable,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
) -> Result<f64> {
    table.check_triple(example.triple)?;
    let mut buf = StepBuffers::new(table.dim());
    step(example, &mut Exclusive { table, opt }, cfg, &mut buf)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean loss over all positive and negative examples of the epoch.
    pub mean_loss: f64,
    pub seconds: f64,
}

/// Owns the parameters and optimizer state across epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    table: EmbeddingTable,
    opt: OptimizerState,
}

impl Trainer {
    /// Starts from freshly initialized embeddings.
    pub fn new(cfg: TrainConfig, num_entities: usize, num_relations: usize) -> Result<Self> {
        cfg.validate()?;
        let table = init_embeddings(num_entities, num_relations, &cfg.model_config())?;
        Self::with_table(cfg, table)
    }

    pub fn with_table(cfg: TrainConfig, table: EmbeddingTable) -> Result<Self> {
        cfg.validate()?;
        if table.dim() != cfg.dim {
            return Err(Error::Config(format!(
                "table dimension {} does not match configured dim {}",
                table.dim(),
                cfg.dim
            )));
        }
        let opt = OptimizerState::new(&table);
        Ok(Self { cfg, table, opt })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn into_table(self) -> EmbeddingTable {
        self.table
    }

    /// Runs one pass over `positives`. `epoch` is 1-based and seeds the
    /// shuffle as `seed ^ epoch`. `filter` is consulted only when
    /// `filter_negatives` is set.
    pub fn run_epoch(
        &mut self,
        epoch: usize,
        positives: &[Triple],
        filter: Option<&FilterIndex>,
    ) -> Result<EpochStats> {
        let start = Instant::now();
        let num_entities = self.table.num_entities();
        if num_entities < 2 {
            return Err(Error::TooFewEntities(num_entities));
        }
        for &triple in positives {
            self.table.check_triple(triple)?;
        }
        let filter = filter.filter(|_| self.cfg.filter_negatives);

        let epoch_seed = self.cfg.seed ^ epoch as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
        let mut order: Vec<usize> = (0..positives.len()).collect();
        order.shuffle(&mut rng);

        let total_loss = if self.cfg.workers == 1 {
            let mut store = Exclusive {
                table: &mut self.table,
                opt: &mut self.opt,
            };
            run_partition(&order, positives, filter, &self.cfg, &mut store, &mut rng, num_entities)
        } else {
            self.run_parallel(&order, positives, filter, epoch_seed, num_entities)
        }
        .map_err(|e| match e {
            Error::NonFinite { triple, .. } => Error::NonFinite {
                triple,
                epoch: Some(epoch),
            },
            other => other,
        })?;

        let examples = positives.len() * (1 + self.cfg.neg);
        Ok(EpochStats {
            epoch,
            mean_loss: if examples == 0 {
                0.0
            } else {
                total_loss / examples as f64
            },
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn run_parallel(
        &mut self,
        order: &[usize],
        positives: &[Triple],
        filter: Option<&FilterIndex>,
        epoch_seed: u64,
        num_entities: usize,
    ) -> Result<f64> {
        let shared = Shared::new(&self.table, &self.opt);
        let workers = self.cfg.workers.min(order.len().max(1));
        let chunk = order.len().div_ceil(workers).max(1);
        let cfg = &self.cfg;
        let results: Vec<Result<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .chunks(chunk)
                .enumerate()
                .map(|(worker, part)| {
                    let shared = &shared;
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
                        rng.set_stream(worker as u64 + 1);
                        let mut store = shared;
                        run_partition(part, positives, filter, cfg, &mut store, &mut rng, num_entities)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let (table, opt) = shared.into_parts()?;
        self.table = table;
        self.opt = opt;
        results.into_iter().sum()
    }
}

fn run_partition(
    order: &[usize],
    positives: &[Triple],
    filter: Option<&FilterIndex>,
    cfg: &TrainConfig,
    store: &mut impl ParamStore,
    rng: &mut ChaCha8Rng,
    num_entities: usize,
) -> Result<f64> {
    let mut buf = StepBuffers::new(cfg.dim);
    let mut total = 0.0;
    for &index in order {
        let pos = positives[index];
        total += step(LabeledTriple::positive(pos), store, cfg, &mut buf)?;
        for _ in 0..cfg.neg {
            let negative = corrupt_filtered(pos, num_entities, filter, rng);
            total += step(LabeledTriple::negative(negative), store, cfg, &mut buf)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub table: EmbeddingTable,
    pub epochs: Vec<EpochStats>,
}

/// Initializes embeddings and runs `cfg.epochs` passes over `train_set`.
pub fn train(
    train_set: &TripleSet,
    num_entities: usize,
    num_relations: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_filtered(train_set, num_entities, num_relations, cfg, None)
}

pub fn train_filtered(
    train_set: &TripleSet,
    num_entities: usize,
    num_relations: usize,
    cfg: &TrainConfig,
    filter: Option<&FilterIndex>,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut trainer = Trainer::new(cfg.clone(), num_entities, num_relations)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        epochs.push(trainer.run_epoch(epoch, &train_set.triples, filter)?);
    }
    Ok(TrainOutcome {
        table: trainer.into_table(),
        epochs,
    })
}

/// Writes `epoch,mean_loss,seconds` rows.
pub fn write_loss_csv(path: &Path, epochs: &[EpochStats]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "epoch,mean_loss,seconds")?;
        for e in epochs {
            writeln!(out, "{},{},{}", e.epoch, e.mean_loss, e.seconds)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(dim: usize, k: usize) -> TrainConfig {
        TrainConfig {
            k,
            dim,
            lambda: 0.0,
            neg: 1,
            lr: 0.1,
            epochs: 1,
            seed: 3,
            workers: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_values() {
        assert_relative_eq!(loss_term(0.0, Label::Positive), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(loss_term(0.0, Label::Negative), std::f64::consts::LN_2, epsilon = 1e-15);
        let saturated = loss_term(50.0, Label::Positive);
        assert!((0.0..1e-20).contains(&saturated));
        assert_relative_eq!(loss_term(2.0, Label::Negative), 2.1269280110429727, epsilon = 1e-14);
        assert_relative_eq!(loss_term(-800.0, Label::Positive), 800.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_computed_first_step() {
        let c = cfg(2, 1);
        let mut table = EmbeddingTable::from_parts(2, vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let mut opt = OptimizerState::new(&table);
        let loss = sgd_step(LabeledTriple::negative(Triple::new(0, 0, 1)), &mut table, &mut opt, &c).unwrap();
        assert_relative_eq!(loss, 2.1269280110429727, epsilon = 1e-14);
        let g = 0.8807970779778823_f64;
        for &acc in opt.accum_entities.iter().chain(&opt.accum_relations) {
            assert_relative_eq!(acc, g * g, epsilon = 1e-15);
        }
        for &v in table.entities().iter().chain(table.relations()) {
            assert_relative_eq!(v, 0.9, epsilon = 1e-8);
        }
    }

    #[test]
    fn saturated_positive_barely_moves() {
        let c = cfg(2, 1);
        let mut table = EmbeddingTable::from_parts(2, vec![6.0, 6.0, 6.0, 6.0], vec![1.0, 1.0]).unwrap();
        let before = table.clone();
        let mut opt = OptimizerState::new(&table);
        sgd_step(LabeledTriple::positive(Triple::new(0, 0, 1)), &mut table, &mut opt, &c).unwrap();
        // g ≈ -e^-72 · 36: far below √ε, so the AdaGrad ratio stays tiny.
        for (a, b) in table.entities().iter().zip(before.entities()) {
            assert!((a - b).abs() < 1e-20);
        }
    }

    #[test]
    fn negatives_differ_in_one_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos = Triple::new(3, 1, 7);
        let negs = sample_negatives(pos, 1000, 10, &mut rng).unwrap();
        assert_eq!(negs.len(), 1000);
        for n in &negs {
            assert_eq!(n.label, Label::Negative);
            assert_eq!(n.triple.r, 1);
            let changed = (n.triple.h != pos.h) as u8 + (n.triple.t != pos.t) as u8;
            assert_eq!(changed, 1);
            assert!(n.triple.h < 10 && n.triple.t < 10);
        }
    }

    #[test]
    fn two_entity_corruption_is_forced() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let n = sample_negatives(Triple::new(0, 2, 1), 1, 2, &mut rng).unwrap();
            assert!(n[0].triple == Triple::new(1, 2, 1) || n[0].triple == Triple::new(0, 2, 0));
        }
        assert!(matches!(
            sample_negatives(Triple::new(0, 0, 0), 1, 1, &mut rng),
            Err(Error::TooFewEntities(1))
        ));
    }

    #[test]
    fn head_tail_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let pos = Triple::new(0, 0, 1);
        let heads = sample_negatives(pos, 10_000, 50, &mut rng)
            .unwrap()
            .iter()
            .filter(|n| n.triple.h != pos.h)
            .count();
        let fraction = heads as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&fraction), "{fraction}");
    }

    #[test]
    fn replacement_is_uniform_over_other_entities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 5];
        for _ in 0..40_000 {
            let c = corrupt(Triple::new(2, 0, 2), 5, &mut rng);
            let replaced = if c.h != 2 { c.h } else { c.t };
            counts[replaced] += 1;
        }
        assert_eq!(counts[2], 0);
        for (e, &n) in counts.iter().enumerate().filter(|(e, _)| *e != 2) {
            assert!((9_400..=10_600).contains(&n), "entity {e}: {n}");
        }
    }

    #[test]
    fn self_loop_updates_row_once() {
        let c = TrainConfig {
            lambda: 0.5,
            ..cfg(4, 2)
        };
        let model = c.model_config();
        let mut table = init_embeddings(3, 1, &model).unwrap();
        let mut opt = OptimizerState::new(&table);
        sgd_step(LabeledTriple::positive(Triple::new(1, 0, 1)), &mut table, &mut opt, &c).unwrap();
        assert!(opt.accum_entities[4..8].iter().all(|&a| a > 0.0));
        assert!(opt.accum_entities[..4]
            .iter()
            .chain(&opt.accum_entities[8..])
            .all(|&a| a == 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let c = cfg(2, 1);
        let mut table = EmbeddingTable::from_parts(2, vec![1e200, 1e200, 1e200, 1e200], vec![1e200, 1e200]).unwrap();
        let mut opt = OptimizerState::new(&table);
        let err = sgd_step(LabeledTriple::positive(Triple::new(0, 0, 1)), &mut table, &mut opt, &c).unwrap_err();
        assert!(matches!(err, Error::NonFinite { triple, .. } if triple == Triple::new(0, 0, 1)));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            k: 3,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            workers: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            neg: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
