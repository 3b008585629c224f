//! Timing of score + gradient evaluation as a function of the segment count.

use std::hint::black_box;
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Triple;
use crate::error::{Error, Result};
use crate::scoring::{validate_shape, ScoreFn, TripleGradient};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub dim: usize,
    pub ks: Vec<usize>,
    /// Score + gradient evaluations per timed run.
    pub ops: usize,
    /// Timed runs per `k`; the fastest is reported.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dim: 400,
            ks: vec![1, 4, 8, 16, 20],
            ops: 20_000,
            repeats: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub seconds: f64,
}

/// Times `ops` evaluations of `f4` and its gradient for every `k`.
///
/// Triples are drawn from `triples` when given, otherwise uniformly from a
/// synthetic table of `num_entities × num_relations`. Runs for different `k`
/// are interleaved so that background load affects all of them alike.
pub fn bench_k(
    cfg: &BenchConfig,
    triples: Option<&[Triple]>,
    num_entities: usize,
    num_relations: usize,
) -> Result<Vec<BenchRow>> {
    if cfg.ks.is_empty() || cfg.ops == 0 || cfg.repeats == 0 {
        return Err(Error::Config("bench needs at least one k, op and repeat".into()));
    }
    for &k in &cfg.ks {
        validate_shape(cfg.dim, k)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (pool, entities, relations) = match triples {
        Some(t) if !t.is_empty() => (t.to_vec(), num_entities, num_relations),
        _ => {
            let (ne, nr) = (num_entities.max(2), num_relations.max(1));
            let pool = (0..4096)
                .map(|_| Triple::new(rng.gen_range(0..ne), rng.gen_range(0..nr), rng.gen_range(0..ne)))
                .collect();
            (pool, ne, nr)
        }
    };
    // Embedding values do not affect timing. Rows come from a pool small
    // enough to stay in cache, so the timing reflects score and gradient
    // arithmetic rather than memory latency.
    let rows = 64;
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let ent: Vec<f64> = (0..entities.min(rows) * cfg.dim)
        .map(|_| dist.sample(&mut rng))
        .collect();
    let rel: Vec<f64> = (0..relations.min(rows) * cfg.dim)
        .map(|_| dist.sample(&mut rng))
        .collect();
    let (ne, nr) = (entities.min(rows), relations.min(rows));
    let row = |i: usize| i * cfg.dim..(i + 1) * cfg.dim;

    let mut best = vec![f64::INFINITY; cfg.ks.len()];
    let mut grad = TripleGradient::zeros(cfg.dim);
    for _ in 0..cfg.repeats {
        for (slot, &k) in cfg.ks.iter().enumerate() {
            let start = Instant::now();
            let mut sink = 0.0;
            for op in 0..cfg.ops {
                let t = pool[op % pool.len()];
                let h = &ent[row(t.h % ne)];
                let r = &rel[row(t.r % nr)];
                let tail = &ent[row(t.t % ne)];
                sink += ScoreFn::F4.score(black_box(h), black_box(r), black_box(tail), k);
                ScoreFn::F4.gradient(h, r, tail, k, &mut grad);
                sink += grad.d_h[0] + grad.d_r[0] + grad.d_t[0];
            }
            black_box(sink);
            best[slot] = best[slot].min(start.elapsed().as_secs_f64());
        }
    }
    Ok(cfg
        .ks
        .iter()
        .zip(best)
        .map(|(&k, seconds)| BenchRow { k, seconds })
        .collect())
}
