use seek_core::toy::{family_graph, ToyConfig};
use seek_core::*;

fn small_cfg() -> TrainConfig {
    TrainConfig {
        k: 4,
        dim: 16,
        lambda: 0.0,
        neg: 5,
        lr: 0.1,
        epochs: 3,
        seed: 42,
        workers: 1,
        ..TrainConfig::default()
    }
}

#[test]
fn repeated_positive_loss_never_increases() {
    let cfg = small_cfg();
    let mut table = init_embeddings(4, 2, &cfg.model_config()).unwrap();
    let mut opt = OptimizerState::new(&table);
    let example = LabeledTriple::positive(Triple::new(0, 1, 3));
    let mut previous = f64::INFINITY;
    for step in 0..100 {
        sgd_step(example, &mut table, &mut opt, &cfg).unwrap();
        let loss = loss_term(
            score_f4(example.triple, &table, &cfg.model_config()).unwrap(),
            Label::Positive,
        );
        assert!(loss <= previous, "step {step}: {loss} > {previous}");
        previous = loss;
    }
    assert!(previous < 0.01);
}

#[test]
fn l2_pull_shrinks_rows_without_score_signal() {
    let cfg = TrainConfig {
        lambda: 0.5,
        ..small_cfg()
    };
    let mut table = init_embeddings(3, 1, &cfg.model_config()).unwrap();
    // A zero head leaves the relation and tail with only the L2 term.
    table.entity_mut(0).fill(0.0);
    let mut opt = OptimizerState::new(&table);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for label in [Label::Positive, Label::Negative, Label::Positive] {
        let (r_before, t_before) = (norm(table.relation(0)), norm(table.entity(2)));
        let example = LabeledTriple {
            triple: Triple::new(0, 0, 2),
            label,
        };
        table.entity_mut(0).fill(0.0);
        sgd_step(example, &mut table, &mut opt, &cfg).unwrap();
        assert!(norm(table.relation(0)) < r_before);
        assert!(norm(table.entity(2)) < t_before);
    }
}

#[test]
fn step_touches_only_its_rows() {
    let cfg = TrainConfig {
        lambda: 0.01,
        ..small_cfg()
    };
    let before = init_embeddings(6, 3, &cfg.model_config()).unwrap();
    let mut table = before.clone();
    let mut opt = OptimizerState::new(&table);
    sgd_step(
        LabeledTriple::negative(Triple::new(1, 2, 4)),
        &mut table,
        &mut opt,
        &cfg,
    )
    .unwrap();
    for e in 0..6 {
        let changed = table.entity(e) != before.entity(e);
        assert_eq!(changed, e == 1 || e == 4, "entity {e}");
    }
    for r in 0..3 {
        assert_eq!(table.relation(r) != before.relation(r), r == 2, "relation {r}");
    }
}

#[test]
fn accumulators_never_decrease() {
    let data = family_graph(&ToyConfig::default());
    let mut trainer = Trainer::new(small_cfg(), 60, 2).unwrap();
    let mut previous = trainer.optimizer().clone();
    for epoch in 1..=3 {
        trainer.run_epoch(epoch, &data.train.triples, None).unwrap();
        let now = trainer.optimizer();
        for (a, b) in now
            .accum_entities
            .iter()
            .zip(&previous.accum_entities)
            .chain(now.accum_relations.iter().zip(&previous.accum_relations))
        {
            assert!(a >= b && *a >= 0.0);
        }
        previous = now.clone();
    }
}

#[test]
fn serial_training_is_bit_reproducible() {
    let data = family_graph(&ToyConfig::default());
    let a = train(&data.train, 60, 2, &small_cfg()).unwrap();
    let b = train(&data.train, 60, 2, &small_cfg()).unwrap();
    assert_eq!(a.table, b.table);
    let losses = |o: &TrainOutcome| o.epochs.iter().map(|e| e.mean_loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));

    let other = train(
        &data.train,
        60,
        2,
        &TrainConfig {
            seed: 43,
            ..small_cfg()
        },
    )
    .unwrap();
    assert_ne!(a.table, other.table);
}

#[test]
fn zero_epochs_returns_initialization() {
    let data = family_graph(&ToyConfig::default());
    let cfg = TrainConfig {
        epochs: 0,
        ..small_cfg()
    };
    let out = train(&data.train, 60, 2, &cfg).unwrap();
    assert!(out.epochs.is_empty());
    assert_eq!(out.table, init_embeddings(60, 2, &cfg.model_config()).unwrap());
}

#[test]
fn empty_training_set_is_rejected() {
    let empty = TripleSet::new(Split::Train, vec![]);
    assert!(matches!(train(&empty, 10, 1, &small_cfg()), Err(Error::Config(_))));
}

#[test]
fn toy_loss_drops_below_five_hundredths_in_fifty_epochs() {
    let data = family_graph(&ToyConfig::default());
    let cfg = TrainConfig {
        k: 4,
        dim: 32,
        lambda: 0.01,
        neg: 20,
        epochs: 50,
        seed: 0,
        filter_negatives: true,
        ..TrainConfig::default()
    };
    let filter = data.filter_index();
    let out = trainer::train_filtered(&data.train, 60, 2, &cfg, Some(&filter)).unwrap();
    let last = out.epochs.last().unwrap().mean_loss;
    assert!(last < 0.05, "{last}");
    assert!(out.epochs[0].mean_loss > last);
}

#[test]
fn asynchronous_workers_still_converge() {
    let data = family_graph(&ToyConfig::default());
    let cfg = TrainConfig {
        k: 4,
        dim: 32,
        lambda: 0.01,
        neg: 20,
        epochs: 60,
        seed: 1,
        workers: 4,
        filter_negatives: true,
        ..TrainConfig::default()
    };
    let filter = data.filter_index();
    let out = trainer::train_filtered(&data.train, 60, 2, &cfg, Some(&filter)).unwrap();
    assert!(out.table.is_finite());
    assert!(out.epochs.last().unwrap().mean_loss < 0.1);
    let report = evaluate(&data.test, &out.table, Scorer::new(ScoreFn::F4, 4), Some(&filter)).unwrap();
    assert!(report.both.mrr > 0.8, "{}", report.both.mrr);
}

#[test]
fn other_scoring_functions_train() {
    let data = family_graph(&ToyConfig::default());
    let filter = data.filter_index();
    for score_fn in [ScoreFn::F1, ScoreFn::F2, ScoreFn::F3] {
        let cfg = TrainConfig {
            k: 4,
            dim: 16,
            lambda: 0.01,
            neg: 5,
            epochs: 20,
            score_fn,
            filter_negatives: true,
            ..TrainConfig::default()
        };
        let out = trainer::train_filtered(&data.train, 60, 2, &cfg, Some(&filter)).unwrap();
        let first = out.epochs.first().unwrap().mean_loss;
        let last = out.epochs.last().unwrap().mean_loss;
        assert!(last < first, "{score_fn}: {first} -> {last}");
    }
}

#[test]
fn loss_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    let stats = [EpochStats {
        epoch: 1,
        mean_loss: 0.5,
        seconds: 0.25,
    }];
    trainer::write_loss_csv(&path, &stats).unwrap();
    assert_eq!(
        std::fs::read_to_string(path).unwrap(),
        "epoch,mean_loss,seconds\n1,0.5,0.25\n"
    );
}
