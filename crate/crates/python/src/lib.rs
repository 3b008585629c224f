//! Python bindings: scoring primitives, dataset loading, training,
//! evaluation, case studies and checkpoints.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seek_core::toy::{family_graph, ToyConfig};
use seek_core::{self as core, Checkpoint, Error, FilterIndex, ScoreFn, Scorer, Triple, TripleGradient, TripleSet};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        Error::UnknownName { .. } | Error::IdOutOfRange { .. } => PyKeyError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn score_fn(name: &str) -> PyResult<ScoreFn> {
    name.parse().map_err(to_py)
}

fn check_vectors(h: &[f64], r: &[f64], t: &[f64], k: usize) -> PyResult<()> {
    if h.len() != r.len() || r.len() != t.len() {
        return Err(PyValueError::new_err(format!(
            "vectors differ in length ({}, {}, {})",
            h.len(),
            r.len(),
            t.len()
        )));
    }
    core::ModelConfig::new(h.len(), k, 0).map(|_| ()).map_err(to_py)
}

/// Score of `(h, r, t)` under `fn` ("f1".."f4") with `k` segments.
#[pyfunction]
#[pyo3(signature = (h, r, t, k, r#fn = "f4"))]
fn score(h: Vec<f64>, r: Vec<f64>, t: Vec<f64>, k: usize, r#fn: &str) -> PyResult<f64> {
    let f = score_fn(r#fn)?;
    check_vectors(&h, &r, &t, k)?;
    Ok(f.score(&h, &r, &t, k))
}

/// `(d_h, d_r, d_t)`, the exact partial derivatives of `score`.
#[pyfunction]
#[pyo3(signature = (h, r, t, k, r#fn = "f4"))]
fn gradient(h: Vec<f64>, r: Vec<f64>, t: Vec<f64>, k: usize, r#fn: &str) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let f = score_fn(r#fn)?;
    check_vectors(&h, &r, &t, k)?;
    let mut grad = TripleGradient::zeros(h.len());
    f.gradient(&h, &r, &t, k, &mut grad);
    Ok((grad.d_h, grad.d_r, grad.d_t))
}

fn check_segment(x: usize, y: usize, k: usize) -> PyResult<()> {
    if k == 0 || x >= k || y >= k {
        return Err(PyValueError::new_err(format!("need x, y < k (x={x}, y={y}, k={k})")));
    }
    Ok(())
}

#[pyfunction]
fn sign_coeff(x: usize, y: usize, k: usize) -> PyResult<f64> {
    check_segment(x, y, k)?;
    Ok(core::sign_coeff(x, y, k))
}

#[pyfunction]
fn tail_index(x: usize, y: usize, k: usize) -> PyResult<usize> {
    check_segment(x, y, k)?;
    Ok(core::tail_index(x, y, k))
}

/// Logistic sigmoid of a score.
#[pyfunction]
fn probability(score: f64) -> f64 {
    core::probability(score)
}

/// A knowledge graph split into train, valid and test triples.
#[pyclass(module = "seek")]
struct Dataset {
    inner: core::Dataset,
}

fn id_tuples(set: &TripleSet) -> Vec<(usize, usize, usize)> {
    set.iter().map(|t| (t.h, t.r, t.t)).collect()
}

#[pymethods]
impl Dataset {
    /// Loads `train.txt`, `valid.txt` and `test.txt` from a directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::Dataset::load(&path).map(|inner| Self { inner }).map_err(to_py)
    }

    /// The synthetic family graph with a symmetric and an antisymmetric relation.
    #[staticmethod]
    #[pyo3(signature = (seed = 17))]
    fn toy(seed: u64) -> Self {
        let inner = family_graph(&ToyConfig {
            seed,
            ..ToyConfig::default()
        });
        Self { inner }
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.inner.vocab.num_entities()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.vocab.num_relations()
    }

    #[getter]
    fn train(&self) -> Vec<(usize, usize, usize)> {
        id_tuples(&self.inner.train)
    }

    #[getter]
    fn valid(&self) -> Vec<(usize, usize, usize)> {
        id_tuples(&self.inner.valid)
    }

    #[getter]
    fn test(&self) -> Vec<(usize, usize, usize)> {
        id_tuples(&self.inner.test)
    }

    fn entity(&self, id: usize) -> PyResult<String> {
        self.inner
            .vocab
            .entity(id)
            .map(str::to_string)
            .ok_or_else(|| PyKeyError::new_err(id))
    }

    fn relation(&self, id: usize) -> PyResult<String> {
        self.inner
            .vocab
            .relation(id)
            .map(str::to_string)
            .ok_or_else(|| PyKeyError::new_err(id))
    }

    fn entity_id(&self, name: &str) -> Option<usize> {
        self.inner.vocab.entity_id(name)
    }

    fn relation_id(&self, name: &str) -> Option<usize> {
        self.inner.vocab.relation_id(name)
    }

    /// Names of an id triple.
    fn decode(&self, triple: (usize, usize, usize)) -> PyResult<(String, String, String)> {
        Ok((self.entity(triple.0)?, self.relation(triple.1)?, self.entity(triple.2)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(entities={}, relations={}, train={}, valid={}, test={})",
            self.num_entities(),
            self.num_relations(),
            self.inner.train.len(),
            self.inner.valid.len(),
            self.inner.test.len()
        )
    }
}

/// Training hyperparameters. Only `workers=1` is bit-reproducible.
#[pyclass(module = "seek", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct TrainConfig {
    k: usize,
    dim: usize,
    lambda_: f64,
    neg: usize,
    lr: f64,
    epochs: usize,
    seed: u64,
    workers: usize,
    r#fn: String,
    filter_negatives: bool,
}

#[pymethods]
impl TrainConfig {
    #[new]
    #[pyo3(signature = (k = 4, dim = 400, lambda_ = 0.01, neg = 100, lr = 0.1, epochs = 100, seed = 0, workers = 1, r#fn = "f4".to_string(), filter_negatives = false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        k: usize,
        dim: usize,
        lambda_: f64,
        neg: usize,
        lr: f64,
        epochs: usize,
        seed: u64,
        workers: usize,
        r#fn: String,
        filter_negatives: bool,
    ) -> PyResult<Self> {
        let cfg = Self {
            k,
            dim,
            lambda_,
            neg,
            lr,
            epochs,
            seed,
            workers,
            r#fn,
            filter_negatives,
        };
        cfg.to_core()?.validate().map_err(to_py)?;
        Ok(cfg)
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(k={}, dim={}, lambda_={}, neg={}, lr={}, epochs={}, seed={}, workers={}, fn='{}', filter_negatives={})",
            self.k,
            self.dim,
            self.lambda_,
            self.neg,
            self.lr,
            self.epochs,
            self.seed,
            self.workers,
            self.r#fn,
            if self.filter_negatives { "True" } else { "False" }
        )
    }
}

impl TrainConfig {
    fn to_core(&self) -> PyResult<core::TrainConfig> {
        Ok(core::TrainConfig {
            k: self.k,
            dim: self.dim,
            lambda: self.lambda_,
            neg: self.neg,
            lr: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            workers: self.workers,
            score_fn: score_fn(&self.r#fn)?,
            filter_negatives: self.filter_negatives,
        })
    }
}

/// Trained embeddings together with their vocabulary and segment count.
#[pyclass(module = "seek")]
struct Model {
    ckpt: Checkpoint,
    losses: Vec<f64>,
}

fn remap(set: &TripleSet, from: &core::Vocabulary, to: &core::Vocabulary) -> PyResult<TripleSet> {
    let triples = set
        .iter()
        .map(|&t| {
            let (h, r, tail) = from.decode(t);
            to.encode(h, r, tail).map_err(to_py)
        })
        .collect::<PyResult<Vec<Triple>>>()?;
    Ok(TripleSet::new(set.split, triples))
}

#[pymethods]
impl Model {
    /// Trains on `dataset.train`. The GIL is released while training.
    #[staticmethod]
    fn train(py: Python<'_>, dataset: &Dataset, config: &TrainConfig) -> PyResult<Self> {
        let cfg = config.to_core()?;
        let data = &dataset.inner;
        let outcome = py
            .detach(|| {
                let filter = cfg.filter_negatives.then(|| data.filter_index());
                core::trainer::train_filtered(
                    &data.train,
                    data.vocab.num_entities(),
                    data.vocab.num_relations(),
                    &cfg,
                    filter.as_ref(),
                )
            })
            .map_err(to_py)?;
        let ckpt = Checkpoint::new(cfg.k, data.vocab.clone(), outcome.table).map_err(to_py)?;
        let losses = outcome.epochs.iter().map(|e| e.mean_loss).collect();
        Ok(Self { ckpt, losses })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ckpt = Checkpoint::read(&path).map_err(to_py)?;
        Ok(Self {
            ckpt,
            losses: Vec::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.ckpt.write(&path).map_err(to_py)
    }

    /// Mean loss per epoch of the training run that produced this model.
    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }

    #[getter]
    fn k(&self) -> usize {
        self.ckpt.segments
    }

    #[getter]
    fn dim(&self) -> usize {
        self.ckpt.table.dim()
    }

    fn entity_embedding(&self, name: &str) -> PyResult<Vec<f64>> {
        let id = self
            .ckpt
            .vocab
            .entity_id(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok(self.ckpt.table.entity(id).to_vec())
    }

    fn relation_embedding(&self, name: &str) -> PyResult<Vec<f64>> {
        let id = self
            .ckpt
            .vocab
            .relation_id(name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok(self.ckpt.table.relation(id).to_vec())
    }

    /// Score of a named triple.
    #[pyo3(signature = (head, relation, tail, r#fn = "f4"))]
    fn score(&self, head: &str, relation: &str, tail: &str, r#fn: &str) -> PyResult<f64> {
        let triple = self.ckpt.vocab.encode(head, relation, tail).map_err(to_py)?;
        score_fn(r#fn)?
            .score_triple(triple, &self.ckpt.table, self.ckpt.segments)
            .map_err(to_py)
    }

    /// Link prediction on `split` ("test" or "valid"). Returns a dict with
    /// `mrr`, `hits1`, `hits3`, `hits10` and `count` for both sides, plus
    /// per-side dicts under `head` and `tail`.
    #[pyo3(signature = (dataset, r#fn = "f4", raw = false, split = "test"))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        r#fn: &str,
        raw: bool,
        split: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let data = &dataset.inner;
        let (from, to) = (&data.vocab, &self.ckpt.vocab);
        let (train, valid, test) = (
            remap(&data.train, from, to)?,
            remap(&data.valid, from, to)?,
            remap(&data.test, from, to)?,
        );
        let target = match split {
            "test" => &test,
            "valid" => &valid,
            other => return Err(PyValueError::new_err(format!("unknown split `{other}`"))),
        };
        let scorer = Scorer::new(score_fn(r#fn)?, self.ckpt.segments);
        let table = &self.ckpt.table;
        let report = py
            .detach(|| {
                let filter: Option<FilterIndex> = (!raw).then(|| core::build_filter_index(&train, &valid, &test));
                core::evaluate(target, table, scorer, filter.as_ref())
            })
            .map_err(to_py)?;

        let side = |r: &core::RankingReport| -> PyResult<Bound<'py, PyDict>> {
            let d = PyDict::new(py);
            d.set_item("mrr", r.mrr)?;
            d.set_item("hits1", r.hits1)?;
            d.set_item("hits3", r.hits3)?;
            d.set_item("hits10", r.hits10)?;
            d.set_item("count", r.count)?;
            Ok(d)
        };
        let out = side(&report.both)?;
        out.set_item("head", side(&report.head)?)?;
        out.set_item("tail", side(&report.tail)?)?;
        Ok(out)
    }

    /// `(label, fn, p_forward, p_reverse)` rows for named triples.
    #[pyo3(signature = (triples, fns = vec!["f1".to_string(), "f2".to_string(), "f4".to_string()]))]
    fn case_study(
        &self,
        triples: Vec<(String, String, String)>,
        fns: Vec<String>,
    ) -> PyResult<Vec<(String, String, f64, f64)>> {
        let ids = triples
            .iter()
            .map(|(h, r, t)| self.ckpt.vocab.encode(h, r, t).map_err(to_py))
            .collect::<PyResult<Vec<Triple>>>()?;
        let mut rows = Vec::new();
        for name in &fns {
            let f = score_fn(name)?;
            for row in core::case_study(&ids, &self.ckpt.table, self.ckpt.segments, f).map_err(to_py)? {
                rows.push((row.label(&self.ckpt.vocab), f.to_string(), row.p_forward, row.p_reverse));
            }
        }
        Ok(rows)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(k={}, dim={}, entities={}, relations={})",
            self.ckpt.segments,
            self.ckpt.table.dim(),
            self.ckpt.table.num_entities(),
            self.ckpt.table.num_relations()
        )
    }
}

#[pymodule]
fn seek(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(sign_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(tail_index, m)?)?;
    m.add_function(wrap_pyfunction!(probability, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<Model>()?;
    Ok(())
}
