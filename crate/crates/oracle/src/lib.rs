//! Brute-force references for checking `seek-core` in tests.
//!
//! Nothing here calls into the scoring code of `seek-core`; only its plain
//! data types are shared. Each function spells out its formula literally,
//! trading speed for being obviously right, and is meant for small inputs.

use seek_core::{EmbeddingTable, FilterIndex, Side, Triple, TripleGradient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTolerance {
    pub abs_tol: f64,
    pub grad_rel_tol: f64,
    pub fd_step: f64,
}

impl Default for OracleTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            grad_rel_tol: 1e-4,
            fd_step: 1e-5,
        }
    }
}

fn sign(x: usize, y: usize, k: usize) -> f64 {
    if x % 2 == 1 && x + y >= k {
        -1.0
    } else {
        1.0
    }
}

fn tail_segment(x: usize, y: usize, k: usize) -> usize {
    if x.is_multiple_of(2) {
        y
    } else {
        (x + y) % k
    }
}

/// `⟨r_x, h_y, t_w⟩` with segment width `width`.
fn segment_product(r: &[f64], h: &[f64], t: &[f64], x: usize, y: usize, w: usize, width: usize) -> f64 {
    let mut sum = 0.0;
    for j in 0..width {
        sum += r[x * width + j] * (h[y * width + j] * t[w * width + j]);
    }
    sum
}

fn width_of(h: &[f64], r: &[f64], t: &[f64], k: usize) -> usize {
    assert!(h.len() == r.len() && r.len() == t.len());
    assert!(k >= 1 && r.len().is_multiple_of(k));
    r.len() / k
}

pub fn naive_f1(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..r.len() {
        sum += r[i] * h[i] * t[i];
    }
    sum
}

/// All `k³` terms of the unsigned segment sum.
pub fn naive_f2(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    let width = width_of(h, r, t, k);
    let mut score = 0.0;
    for x in 0..k {
        for y in 0..k {
            for w in 0..k {
                score += segment_product(r, h, t, x, y, w, width);
            }
        }
    }
    score
}

/// All `k³` signed terms.
pub fn naive_f3(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    let width = width_of(h, r, t, k);
    let mut score = 0.0;
    for x in 0..k {
        for y in 0..k {
            for w in 0..k {
                score += sign(x, y, k) * segment_product(r, h, t, x, y, w, width);
            }
        }
    }
    score
}

/// The `k²` signed terms with the tail segment tied to `(x, y)`.
pub fn naive_f4(h: &[f64], r: &[f64], t: &[f64], k: usize) -> f64 {
    let width = width_of(h, r, t, k);
    let mut score = 0.0;
    for x in 0..k {
        for y in 0..k {
            score += sign(x, y, k) * segment_product(r, h, t, x, y, tail_segment(x, y, k), width);
        }
    }
    score
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn mul(self, other: Complex) -> Complex {
        Complex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn conj(self) -> Complex {
        Complex {
            re: self.re,
            im: -self.im,
        }
    }
}

/// `Re(Σ_i h_i r_i conj(t_i))` where the first half of each vector holds
/// real parts and the second half imaginary parts.
pub fn complex_reference(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    assert!(r.len().is_multiple_of(2), "complex reference needs an even dimension");
    let n = r.len() / 2;
    let at = |v: &[f64], i: usize| Complex { re: v[i], im: v[n + i] };
    let mut re = 0.0;
    for i in 0..n {
        re += at(h, i).mul(at(r, i)).mul(at(t, i).conj()).re;
    }
    re
}

/// Central differences `(f(θ+ε) − f(θ−ε)) / 2ε` for every coordinate of
/// `h`, `r` and `t`.
pub fn numeric_gradient<F>(score: F, h: &[f64], r: &[f64], t: &[f64], fd_step: f64) -> TripleGradient
where
    F: Fn(&[f64], &[f64], &[f64]) -> f64,
{
    let mut grad = TripleGradient::zeros(r.len());
    let (mut h, mut r, mut t) = (h.to_vec(), r.to_vec(), t.to_vec());
    for i in 0..h.len() {
        let orig = h[i];
        h[i] = orig + fd_step;
        let plus = score(&h, &r, &t);
        h[i] = orig - fd_step;
        let minus = score(&h, &r, &t);
        h[i] = orig;
        grad.d_h[i] = (plus - minus) / (2.0 * fd_step);
    }
    for i in 0..r.len() {
        let orig = r[i];
        r[i] = orig + fd_step;
        let plus = score(&h, &r, &t);
        r[i] = orig - fd_step;
        let minus = score(&h, &r, &t);
        r[i] = orig;
        grad.d_r[i] = (plus - minus) / (2.0 * fd_step);
    }
    for i in 0..t.len() {
        let orig = t[i];
        t[i] = orig + fd_step;
        let plus = score(&h, &r, &t);
        t[i] = orig - fd_step;
        let minus = score(&h, &r, &t);
        t[i] = orig;
        grad.d_t[i] = (plus - minus) / (2.0 * fd_step);
    }
    grad
}

/// Largest `|a − b| / max(|a|, |b|, floor)` over all coordinates.
pub fn max_relative_error(a: &TripleGradient, b: &TripleGradient, floor: f64) -> f64 {
    let pairs = a
        .d_h
        .iter()
        .zip(&b.d_h)
        .chain(a.d_r.iter().zip(&b.d_r))
        .chain(a.d_t.iter().zip(&b.d_t));
    pairs
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Rank of `test` by scoring every candidate with `naive_f4`, one at a time.
pub fn exhaustive_rank(
    test: Triple,
    side: Side,
    table: &EmbeddingTable,
    k: usize,
    filter: Option<&FilterIndex>,
) -> usize {
    exhaustive_rank_with(test, side, table, filter, |h, r, t| naive_f4(h, r, t, k))
}

pub fn exhaustive_rank_with<F>(
    test: Triple,
    side: Side,
    table: &EmbeddingTable,
    filter: Option<&FilterIndex>,
    score: F,
) -> usize
where
    F: Fn(&[f64], &[f64], &[f64]) -> f64,
{
    let score_of = |tr: Triple| score(table.entity(tr.h), table.relation(tr.r), table.entity(tr.t));
    let true_score = score_of(test);
    let mut rank = 1;
    for e in 0..table.num_entities() {
        let candidate = match side {
            Side::Head => Triple::new(e, test.r, test.t),
            Side::Tail => Triple::new(test.h, test.r, e),
        };
        if candidate == test {
            continue;
        }
        if let Some(filter) = filter {
            if filter.contains(&candidate) {
                continue;
            }
        }
        if score_of(candidate) > true_score {
            rank += 1;
        }
    }
    rank
}
