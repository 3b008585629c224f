//! Segmented embeddings and the multi-linear scoring functions.
//!
//! Every embedding of dimension `d` is split into `k` contiguous segments of
//! width `d / k`. Four scoring functions are provided:
//!
//! * `f1`: the plain multi-linear product `Σ_i r_i h_i t_i`.
//! * `f2`: the multi-linear product summed over every segment combination.
//! * `f3`: `f2` with a sign `s(x, y)` on each term, which lets the odd
//!   relation segments model antisymmetry.
//! * `f4`: `f3` restricted to `k²` terms by tying the tail segment to
//!   `w(x, y)`. This is the training objective's score, `O(kd)` per triple.
//!
//! All products are evaluated as `r * (h * t)`. Because `h * t == t * h`
//! exactly, swapping head and tail reproduces term values bit for bit, which
//! makes the symmetry identities hold exactly rather than approximately.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Triple;
use crate::error::{Error, Result};

/// Embedding dimension, segment count and initialization seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub dim: usize,
    pub segments: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(dim: usize, segments: usize, seed: u64) -> Result<Self> {
        let cfg = Self { dim, segments, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_shape(self.dim, self.segments)
    }

    pub fn segment_width(&self) -> usize {
        self.dim / self.segments
    }
}

pub(crate) fn validate_shape(dim: usize, segments: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    if segments == 0 {
        return Err(Error::Config("segment count k must be at least 1".into()));
    }
    if !dim.is_multiple_of(segments) {
        return Err(Error::Config(format!("k must divide dim (k={segments}, dim={dim})")));
    }
    Ok(())
}

/// Sign of the `(x, y)` term: `-1` iff `x` is odd and `x + y >= k`.
#[inline]
pub fn sign_coeff(x: usize, y: usize, k: usize) -> f64 {
    assert!(x < k && y < k, "segment index out of range: ({x}, {y}) for k={k}");
    term_sign(x, y, k)
}

/// Tail segment paired with relation segment `x` and head segment `y` in `f4`.
#[inline]
pub fn tail_index(x: usize, y: usize, k: usize) -> usize {
    assert!(x < k && y < k, "segment index out of range: ({x}, {y}) for k={k}");
    term_tail(x, y, k)
}

/// `sign_coeff` for indices already known to be below `k`.
#[inline(always)]
fn term_sign(x: usize, y: usize, k: usize) -> f64 {
    if x & 1 == 1 && x + y >= k {
        -1.0
    } else {
        1.0
    }
}

/// `tail_index` for indices already known to be below `k`.
#[inline(always)]
fn term_tail(x: usize, y: usize, k: usize) -> usize {
    if x & 1 == 0 {
        y
    } else if x + y >= k {
        x + y - k
    } else {
        x + y
    }
}

#[inline]
fn segment(v: &[f64], index: usize, width: usize) -> &[f64] {
    &v[index * width..(index + 1) * width]
}

#[inline]
fn segment_mut(v: &mut [f64], index: usize, width: usize) -> &mut [f64] {
    &mut v[index * width..(index + 1) * width]
}

/// Four interleaved partial sums: element `i` of a reduction goes to lane
/// `i % 4`, and the lanes are combined as `(l0 + l1) + (l2 + l3)`. A
/// reduction split into pieces whose lengths are multiples of 4 (except the
/// last) gives the same bits as one pass.
#[derive(Default)]
struct Lanes([f64; 4]);

impl Lanes {
    #[inline]
    fn add_products(&mut self, a: &[f64], b: &[f64]) {
        let (a4, b4) = (a.chunks_exact(4), b.chunks_exact(4));
        let (ra, rb) = (a4.remainder(), b4.remainder());
        for (a, b) in a4.zip(b4) {
            for lane in 0..4 {
                self.0[lane] += a[lane] * b[lane];
            }
        }
        for (lane, (a, b)) in ra.iter().zip(rb).enumerate() {
            self.0[lane] += a * b;
        }
    }

    #[inline]
    fn add_triple_products(&mut self, r: &[f64], h: &[f64], t: &[f64]) {
        let (r4, h4, t4) = (r.chunks_exact(4), h.chunks_exact(4), t.chunks_exact(4));
        let (rr, rh, rt) = (r4.remainder(), h4.remainder(), t4.remainder());
        for ((r, h), t) in r4.zip(h4).zip(t4) {
            for lane in 0..4 {
                self.0[lane] += r[lane] * (h[lane] * t[lane]);
            }
        }
        for (lane, ((r, h), t)) in rr.iter().zip(rh).zip(rt).enumerate() {
            self.0[lane] += r * (h * t);
        }
    }

    #[inline]
    fn sum(&self) -> f64 {
        (self.0[0] + self.0[1]) + (self.0[2] + self.0[3])
    }
}

#[inline]
fn triple_dot(r: &[f64], h: &[f64], t: &[f64]) -> f64 {
    let mut lanes = Lanes::default();
    lanes.add_triple_products(r, h, t);
    lanes.sum()
}

/// `out += sign * (a ⊙ b)`
#[inline]
fn add_product(out: &mut [f64], sign: f64, a: &[f64], b: &[f64]) {
    for ((o, a), b) in out.iter_mut().zip(a).zip(b) {
        *o += sign * (a * b);
    }
}

/// Sum of the `k` segments of `v`, a vector of width `d / k`.
fn segment_sum(v: &[f64], k: usize) -> Vec<f64> {
    let width = v.len() / k;
    let mut sum = vec![0.0; width];
    for chunk in v.chunks_exact(width) {
        for (s, x) in sum.iter_mut().zip(chunk) {
            *s += x;
        }
    }
    sum
}

fn check_shape(h: &[f64], r: &[f64], t: &[f64], k: usize) {
    assert!(
        h.len() == r.len() && r.len() == t.len(),
        "dimension mismatch: h={}, r={}, t={}",
        h.len(),
        r.len(),
        t.len()
    );
    assert!(
        k >= 1 && r.len().is_multiple_of(k),
        "k={k} does not divide dimension {}",
        r.len()
    );
}

pub fn score_f1(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    check_shape(h, r, t, 1);
    triple_dot(r, h, t)
}

/// Sum of `⟨r_x, h_y, t_w⟩` over all `k³` segment combinations.
///
/// The triple sum factorizes into one product of segment sums, so this runs
/// in `O(d)`.
pub fn score_f2(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    check_shape(h, r, t, k);
    let (rs, hs, ts) = (segment_sum(r, k), segment_sum(h, k), segment_sum(t, k));
    triple_dot(&rs, &hs, &ts)
}

/// Signed sum of `s(x, y) ⟨r_x, h_y, t_w⟩` over all `k³` combinations.
///
/// The sign does not depend on `w`, so the tail collapses to its segment
/// sum. For a fixed `x` the head segments split into a positive block
/// `y < k - x` and, for odd `x`, a negative block `y >= k - x`; each block
/// is summed first, giving `O(kd)` overall.
pub fn score_f3(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    check_shape(h, r, t, k);
    let width = r.len() / k;
    let hs = segment_sum(h, k);
    let ts = segment_sum(t, k);
    let mut positive = vec![0.0; width];
    let mut negative = vec![0.0; width];
    let mut score = 0.0;
    for x in 0..k {
        let rx = segment(r, x, width);
        if x % 2 == 0 {
            score += triple_dot(rx, &hs, &ts);
            continue;
        }
        positive.fill(0.0);
        negative.fill(0.0);
        for y in 0..k {
            let block = if term_sign(x, y, k) > 0.0 {
                &mut positive
            } else {
                &mut negative
            };
            for (b, v) in block.iter_mut().zip(segment(h, y, width)) {
                *b += v;
            }
        }
        score += triple_dot(rx, &positive, &ts);
        score -= triple_dot(rx, &negative, &ts);
    }
    score
}

/// Stack scratch length for the blocked `f4` loops.
const BLOCK: usize = 64;

/// `out = Σ_even v_x` over the `[start, start + out.len())` slice of every
/// even segment. Every even relation segment pairs `h_y` with `t_y`, so they
/// only enter `f4` through this sum.
fn even_segment_sum(out: &mut [f64], v: &[f64], k: usize, start: usize) {
    let width = v.len() / k;
    let len = out.len();
    out.fill(0.0);
    for x in (0..k).step_by(2) {
        let from = x * width + start;
        for (o, x) in out.iter_mut().zip(&v[from..from + len]) {
            *o += x;
        }
    }
}

/// `out += Σ_y h_y ⊙ t_y` over the same sub-slice of every segment.
fn diagonal_products(out: &mut [f64], h: &[f64], t: &[f64], k: usize, start: usize) {
    let width = h.len() / k;
    let len = out.len();
    for y in 0..k {
        let from = y * width + start;
        add_product(out, 1.0, &h[from..from + len], &t[from..from + len]);
    }
}

/// `out = Σ_y s(x, y) h_y ⊙ t_{w(x,y)}` for odd `x`, restricted to
/// `[start, start + out.len())` within each segment.
fn odd_products(out: &mut [f64], h: &[f64], t: &[f64], x: usize, k: usize, start: usize) {
    let width = h.len() / k;
    let len = out.len();
    out.fill(0.0);
    for y in 0..k {
        let (hy, tw) = (y * width + start, term_tail(x, y, k) * width + start);
        add_product(out, term_sign(x, y, k), &h[hy..hy + len], &t[tw..tw + len]);
    }
}

/// `Σ_{x,y} s(x, y) ⟨r_x, h_y, t_{w(x,y)}⟩`.
///
/// Even `x` contribute `⟨Σ_even r_x, Σ_y h_y ⊙ t_y⟩`; each odd `x`
/// contributes `⟨r_x, Σ_y s(x, y) h_y ⊙ t_{w(x,y)}⟩`. Products are formed as
/// `r * (h * t)` throughout, so swapping `h` and `t` reproduces every term
/// bit for bit.
pub fn score_f4_vectors(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    check_shape(h, r, t, k);
    let width = r.len() / k;
    let (mut left, mut right) = ([0.0; BLOCK], [0.0; BLOCK]);
    let mut even = Lanes::default();
    for start in (0..width).step_by(BLOCK) {
        let len = BLOCK.min(width - start);
        let (even_r, diagonal) = (&mut left[..len], &mut right[..len]);
        even_segment_sum(even_r, r, k, start);
        diagonal.fill(0.0);
        diagonal_products(diagonal, h, t, k, start);
        even.add_products(even_r, diagonal);
    }
    let mut score = even.sum();
    for x in (1..k).step_by(2) {
        let mut term = Lanes::default();
        for start in (0..width).step_by(BLOCK) {
            let len = BLOCK.min(width - start);
            let odd = &mut left[..len];
            odd_products(odd, h, t, x, k, start);
            let from = x * width + start;
            term.add_products(&r[from..from + len], odd);
        }
        score += term.sum();
    }
    score
}

/// `f4` for a triple of ids.
pub fn score_f4(triple: Triple, table: &EmbeddingTable, cfg: &ModelConfig) -> Result<f64> {
    ScoreFn::F4.score_triple(triple, table, cfg.segments)
}

/// Analytic gradient of `f4` with respect to the three embeddings.
pub fn grad_f4(triple: Triple, table: &EmbeddingTable, cfg: &ModelConfig) -> Result<TripleGradient> {
    table.check_triple(triple)?;
    let mut grad = TripleGradient::zeros(table.dim());
    ScoreFn::F4.gradient(
        table.entity(triple.h),
        table.relation(triple.r),
        table.entity(triple.t),
        cfg.segments,
        &mut grad,
    );
    Ok(grad)
}

/// Logistic sigmoid, evaluated without overflow for large `|score|`.
pub fn probability(score: f64) -> f64 {
    if score >= 0.0 {
        1.0 / (1.0 + (-score).exp())
    } else {
        let e = score.exp();
        e / (1.0 + e)
    }
}

/// Which scoring function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScoreFn {
    F1,
    F2,
    F3,
    #[default]
    F4,
}

impl ScoreFn {
    pub const ALL: [ScoreFn; 4] = [ScoreFn::F1, ScoreFn::F2, ScoreFn::F3, ScoreFn::F4];

    pub fn score(self, h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
        match self {
            ScoreFn::F1 => score_f1(h, r, t),
            ScoreFn::F2 => score_f2(h, r, t, k),
            ScoreFn::F3 => score_f3(h, r, t, k),
            ScoreFn::F4 => score_f4_vectors(h, r, t, k),
        }
    }

    pub fn score_triple(self, triple: Triple, table: &EmbeddingTable, k: usize) -> Result<f64> {
        table.check_triple(triple)?;
        Ok(self.score(
            table.entity(triple.h),
            table.relation(triple.r),
            table.entity(triple.t),
            k,
        ))
    }

    /// Writes all three partial derivatives into `grad`.
    pub fn gradient(self, h: &[f64], r: &[f64], t: &[f64], k: usize, grad: &mut TripleGradient) {
        self.head_coefficients(r, t, k, &mut grad.d_h);
        self.relation_coefficients(h, t, k, &mut grad.d_r);
        self.tail_coefficients(h, r, k, &mut grad.d_t);
    }

    /// `∂score/∂h`. Every function here is linear in `h`, so this does not
    /// depend on `h` and `score = ⟨out, h⟩` for any head.
    pub fn head_coefficients(self, r: &[f64], t: &[f64], k: usize, out: &mut [f64]) {
        check_shape(out, r, t, k);
        out.fill(0.0);
        let width = r.len() / k;
        match self {
            ScoreFn::F1 => add_product(out, 1.0, r, t),
            ScoreFn::F2 => {
                let (rs, ts) = (segment_sum(r, k), segment_sum(t, k));
                for y in 0..k {
                    add_product(segment_mut(out, y, width), 1.0, &rs, &ts);
                }
            }
            ScoreFn::F3 => {
                let ts = segment_sum(t, k);
                for x in 0..k {
                    for y in 0..k {
                        let sign = term_sign(x, y, k);
                        add_product(segment_mut(out, y, width), sign, segment(r, x, width), &ts);
                    }
                }
            }
            ScoreFn::F4 => {
                let mut even_r = [0.0; BLOCK];
                for start in (0..width).step_by(BLOCK) {
                    let len = BLOCK.min(width - start);
                    even_segment_sum(&mut even_r[..len], r, k, start);
                    for y in 0..k {
                        let from = y * width + start;
                        add_product(&mut out[from..from + len], 1.0, &even_r[..len], &t[from..from + len]);
                    }
                }
                for x in (1..k).step_by(2) {
                    let rx = segment(r, x, width);
                    for y in 0..k {
                        let tw = segment(t, term_tail(x, y, k), width);
                        add_product(segment_mut(out, y, width), term_sign(x, y, k), rx, tw);
                    }
                }
            }
        }
    }

    /// `∂score/∂r`, independent of `r`.
    pub fn relation_coefficients(self, h: &[f64], t: &[f64], k: usize, out: &mut [f64]) {
        check_shape(h, out, t, k);
        out.fill(0.0);
        let width = h.len() / k;
        match self {
            ScoreFn::F1 => add_product(out, 1.0, h, t),
            ScoreFn::F2 => {
                let (hs, ts) = (segment_sum(h, k), segment_sum(t, k));
                for x in 0..k {
                    add_product(segment_mut(out, x, width), 1.0, &hs, &ts);
                }
            }
            ScoreFn::F3 => {
                let ts = segment_sum(t, k);
                for x in 0..k {
                    for y in 0..k {
                        let sign = term_sign(x, y, k);
                        add_product(segment_mut(out, x, width), sign, segment(h, y, width), &ts);
                    }
                }
            }
            ScoreFn::F4 => {
                diagonal_products(&mut out[..width], h, t, k, 0);
                for x in (2..k).step_by(2) {
                    out.copy_within(..width, x * width);
                }
                for x in (1..k).step_by(2) {
                    odd_products(segment_mut(out, x, width), h, t, x, k, 0);
                }
            }
        }
    }

    /// `∂score/∂t`, independent of `t`. For `f4` a tail segment `w`
    /// collects every `(x, y)` term with `w(x, y) = w`.
    pub fn tail_coefficients(self, h: &[f64], r: &[f64], k: usize, out: &mut [f64]) {
        check_shape(h, r, out, k);
        out.fill(0.0);
        let width = r.len() / k;
        match self {
            ScoreFn::F1 => add_product(out, 1.0, r, h),
            ScoreFn::F2 => {
                let (rs, hs) = (segment_sum(r, k), segment_sum(h, k));
                for w in 0..k {
                    add_product(segment_mut(out, w, width), 1.0, &rs, &hs);
                }
            }
            ScoreFn::F3 => {
                let mut shared = vec![0.0; width];
                for x in 0..k {
                    for y in 0..k {
                        let sign = term_sign(x, y, k);
                        add_product(&mut shared, sign, segment(r, x, width), segment(h, y, width));
                    }
                }
                for w in 0..k {
                    segment_mut(out, w, width).copy_from_slice(&shared);
                }
            }
            ScoreFn::F4 => {
                let mut even_r = [0.0; BLOCK];
                for start in (0..width).step_by(BLOCK) {
                    let len = BLOCK.min(width - start);
                    even_segment_sum(&mut even_r[..len], r, k, start);
                    for y in 0..k {
                        let from = y * width + start;
                        add_product(&mut out[from..from + len], 1.0, &even_r[..len], &h[from..from + len]);
                    }
                }
                for x in (1..k).step_by(2) {
                    let rx = segment(r, x, width);
                    for y in 0..k {
                        let out_w = segment_mut(out, term_tail(x, y, k), width);
                        add_product(out_w, term_sign(x, y, k), rx, segment(h, y, width));
                    }
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreFn::F1 => "f1",
            ScoreFn::F2 => "f2",
            ScoreFn::F3 => "f3",
            ScoreFn::F4 => "f4",
        }
    }
}

impl fmt::Display for ScoreFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(ScoreFn::F1),
            "f2" => Ok(ScoreFn::F2),
            "f3" => Ok(ScoreFn::F3),
            "f4" => Ok(ScoreFn::F4),
            other => Err(Error::Config(format!(
                "unknown scoring function `{other}` (expected f1, f2, f3 or f4)"
            ))),
        }
    }
}

/// Partial derivatives of a score with respect to head, relation and tail.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradient {
    pub d_h: Vec<f64>,
    pub d_r: Vec<f64>,
    pub d_t: Vec<f64>,
}

impl TripleGradient {
    pub fn zeros(dim: usize) -> Self {
        Self {
            d_h: vec![0.0; dim],
            d_r: vec![0.0; dim],
            d_t: vec![0.0; dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_h.iter().chain(&self.d_r).chain(&self.d_t).all(|v| v.is_finite())
    }
}

/// Row-major entity and relation embedding matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        Self {
            dim,
            entities: vec![0.0; num_entities * dim],
            relations: vec![0.0; num_relations * dim],
        }
    }

    /// Builds a table from flat row-major matrices.
    pub fn from_parts(dim: usize, entities: Vec<f64>, relations: Vec<f64>) -> Result<Self> {
        if dim == 0 || !entities.len().is_multiple_of(dim) || !relations.len().is_multiple_of(dim) {
            return Err(Error::Config(format!(
                "matrix sizes {} and {} are not multiples of dim {dim}",
                entities.len(),
                relations.len()
            )));
        }
        Ok(Self {
            dim,
            entities,
            relations,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len() / self.dim
    }

    pub fn entity(&self, id: usize) -> &[f64] {
        &self.entities[id * self.dim..(id + 1) * self.dim]
    }

    pub fn entity_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.entities[id * self.dim..(id + 1) * self.dim]
    }

    pub fn relation(&self, id: usize) -> &[f64] {
        &self.relations[id * self.dim..(id + 1) * self.dim]
    }

    pub fn relation_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.relations[id * self.dim..(id + 1) * self.dim]
    }

    pub fn entities(&self) -> &[f64] {
        &self.entities
    }

    pub fn relations(&self) -> &[f64] {
        &self.relations
    }

    pub fn is_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|v| v.is_finite())
    }

    pub fn check_triple(&self, triple: Triple) -> Result<()> {
        let (ne, nr) = (self.num_entities(), self.num_relations());
        for id in [triple.h, triple.t] {
            if id >= ne {
                return Err(Error::IdOutOfRange {
                    kind: "entity",
                    id,
                    count: ne,
                });
            }
        }
        if triple.r >= nr {
            return Err(Error::IdOutOfRange {
                kind: "relation",
                id: triple.r,
                count: nr,
            });
        }
        Ok(())
    }
}

/// Draws every parameter i.i.d. from `U[-6/√d, 6/√d]`, entities first.
pub fn init_embeddings(num_entities: usize, num_relations: usize, cfg: &ModelConfig) -> Result<EmbeddingTable> {
    cfg.validate()?;
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n * cfg.dim).map(|_| dist.sample(&mut rng)).collect() };
    let entities = draw(num_entities);
    let relations = draw(num_relations);
    Ok(EmbeddingTable {
        dim: cfg.dim,
        entities,
        relations,
    })
}
