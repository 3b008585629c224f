//! A small synthetic family graph with one symmetric and one antisymmetric
//! relation, used for end-to-end checks and demos.
//!
//! Entities are split into generations of equal size. `sibling_of` links
//! every ordered pair inside a generation (both directions are always
//! asserted). `parent_of` links every member of generation `g` to every
//! member of generation `g + 1`, so it never holds in reverse.
//!
//! Held-out `sibling_of` triples keep their reverse in training. Held-out
//! `parent_of` triples have no reverse anywhere.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Split, Triple, TripleSet, Vocabulary};

pub const SIBLING: &str = "sibling_of";
pub const PARENT: &str = "parent_of";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub generations: usize,
    pub generation_size: usize,
    /// Fraction of each relation's triples moved to the test split.
    pub test_fraction: f64,
    /// Fraction moved to the validation split.
    pub valid_fraction: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            generations: 12,
            generation_size: 5,
            test_fraction: 0.1,
            valid_fraction: 0.05,
            seed: 17,
        }
    }
}

/// Builds the family graph. Entity `person_<g>_<i>` is member `i` of generation `g`.
pub fn family_graph(cfg: &ToyConfig) -> Dataset {
    let mut vocab = Vocabulary::new();
    let mut members = Vec::with_capacity(cfg.generations);
    for g in 0..cfg.generations {
        let ids: Vec<usize> = (0..cfg.generation_size)
            .map(|i| vocab.intern_entity(&format!("person_{g}_{i}")))
            .collect();
        members.push(ids);
    }
    let sibling = vocab.intern_relation(SIBLING);
    let parent = vocab.intern_relation(PARENT);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();

    // One direction of a held-out sibling pair is held out, the other trains.
    let mut pairs: Vec<(usize, usize)> = members
        .iter()
        .flat_map(|gen| {
            gen.iter()
                .enumerate()
                .flat_map(move |(i, &a)| gen[i + 1..].iter().map(move |&b| (a, b)))
        })
        .collect();
    pairs.shuffle(&mut rng);
    let (n_test, n_valid) = split_counts(pairs.len(), cfg);
    for (index, &(a, b)) in pairs.iter().enumerate() {
        let forward = Triple::new(a, sibling, b);
        let backward = Triple::new(b, sibling, a);
        train.push(backward);
        if index < n_test {
            test.push(forward);
        } else if index < n_test + n_valid {
            valid.push(forward);
        } else {
            train.push(forward);
        }
    }

    let mut parents: Vec<Triple> = members
        .windows(2)
        .flat_map(|w| {
            let (older, younger) = (&w[0], &w[1]);
            older
                .iter()
                .flat_map(move |&a| younger.iter().map(move |&b| Triple::new(a, parent, b)))
        })
        .collect();
    parents.shuffle(&mut rng);
    let (n_test, n_valid) = split_counts(parents.len(), cfg);
    test.extend_from_slice(&parents[..n_test]);
    valid.extend_from_slice(&parents[n_test..n_test + n_valid]);
    train.extend_from_slice(&parents[n_test + n_valid..]);

    train.sort();
    valid.sort();
    test.sort();
    Dataset {
        vocab,
        train: TripleSet::new(Split::Train, train),
        valid: TripleSet::new(Split::Valid, valid),
        test: TripleSet::new(Split::Test, test),
    }
}

fn split_counts(n: usize, cfg: &ToyConfig) -> (usize, usize) {
    let test = ((n as f64) * cfg.test_fraction).round() as usize;
    let valid = ((n as f64) * cfg.valid_fraction).round() as usize;
    (test.min(n), valid.min(n - test.min(n)))
}
