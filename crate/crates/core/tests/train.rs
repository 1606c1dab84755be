use std::sync::OnceLock;

use hqtn::aero::*;
use hqtn::encoding::EncodingConfig;
use hqtn::exec::ExecMode;
use hqtn::tensor::{Tape, Tensor};
use hqtn::train::hpo::{aggregate_folds, holdout, retrain_and_test, SearchSpace};
use hqtn::train::metrics::*;
use hqtn::train::optim::{adam_step, AdamState};
use hqtn::train::run::{fit_scaler, supervision, train, Splits};
use hqtn::train::split::{shuffle_split, stratified_holdout};
use hqtn::train::*;
use hqtn::Error;

const MODE: ExecMode = ExecMode::Parallel;

fn data() -> &'static PreparedData {
    static DATA: OnceLock<PreparedData> = OnceLock::new();
    DATA.get_or_init(|| {
        let grid = GridSpec {
            a: Axis::new(-0.4, 0.4, 3),
            mu: Axis::new(10.0, 50.0, 2),
            u_inf: Axis::new(10.0, 210.0, 21),
        };
        let ds =
            generate_dataset(&grid, &StructuralConstants::default(), 0.5, 201, 0, MODE).unwrap();
        PreparedData::from_dataset(&ds, &EncodingConfig::default(), MODE).unwrap()
    })
}

/// 16 of each class.
fn balanced(d: &PreparedData) -> Vec<usize> {
    let pick = |c: u8| (0..d.len()).filter(move |&i| d.labels[i] == c).take(16);
    let mut v: Vec<usize> = pick(0).chain(pick(1)).collect();
    v.sort_unstable();
    assert_eq!(v.len(), 32, "test grid needs both classes");
    v
}

fn small_cfg() -> ExperimentConfig {
    ExperimentConfig {
        vqc_layers: 1,
        batch_size: 8,
        epochs: 6,
        learning_rate: 0.05,
        ..ExperimentConfig::default()
    }
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = vec![0.3, -1.2, 4.0];
    let mut s = AdamState::new(3);
    for _ in 0..5 {
        adam_step(&mut p, &[0.0; 3], &mut s, 0.1).unwrap();
    }
    assert_eq!(p, vec![0.3, -1.2, 4.0]);
}

#[test]
fn adam_matches_hand_computation() {
    let mut p = vec![1.0];
    let mut s = AdamState::new(1);
    adam_step(&mut p, &[0.5], &mut s, 0.01).unwrap();
    assert!((p[0] - (1.0 - 0.01)).abs() < 1e-9);

    // second step with g = −0.2
    adam_step(&mut p, &[-0.2], &mut s, 0.01).unwrap();
    let m = 0.9 * 0.05 + 0.1 * -0.2;
    let v = 0.999 * 0.00025 + 0.001 * 0.04;
    let m_hat = m / (1.0 - 0.81);
    let v_hat = v / (1.0 - 0.999f64 * 0.999);
    let first = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
    let expect = first - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
    assert!((p[0] - expect).abs() < 1e-12);

    assert!(matches!(
        adam_step(&mut p, &[0.0, 1.0], &mut s, 0.01),
        Err(Error::Shape(_))
    ));
}

#[test]
fn cross_entropy_values_and_gradient() {
    assert!(
        cross_entropy_values(&[[1.0, 0.0]], &[[1.0, 0.0]])
            .unwrap()
            .abs()
            < 1e-15
    );
    let ln2 = cross_entropy_values(&[[0.5, 0.5]], &[[1.0, 0.0]]).unwrap();
    assert!((ln2 - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(cross_entropy_values(&[[0.0, 1.0]], &[[1.0, 0.0]])
        .unwrap()
        .is_finite());

    let y = Tensor::real(&[2], &["out"], vec![0.0, 1.0]).unwrap();
    let loss = |p: &[f64]| {
        let t = Tensor::real(&[2], &["out"], p.to_vec()).unwrap();
        cross_entropy(&t, &y).unwrap().real_data()[0]
    };
    let p0 = [0.3, 0.7];
    let tape = Tape::new();
    let pt = tape.param(&Tensor::real(&[2], &["out"], p0.to_vec()).unwrap());
    let g = tape
        .backward(&cross_entropy(&pt, &y).unwrap())
        .unwrap()
        .real_wrt(&pt)
        .unwrap();
    for i in 0..2 {
        let h = 1e-6;
        let (mut a, mut b) = (p0, p0);
        a[i] += h;
        b[i] -= h;
        let fd = (loss(&a) - loss(&b)) / (2.0 * h);
        assert!((g[i] - fd).abs() < 1e-6, "{i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn huber_branches_and_continuity() {
    assert!((huber(0.5, 1.0) - 0.125).abs() < 1e-15);
    assert!((huber(-2.0, 1.0) - 1.5).abs() < 1e-15);
    for delta in [0.1, 1.0, 3.0] {
        let below = huber(delta * (1.0 - 1e-12), delta);
        let above = huber(delta * (1.0 + 1e-12), delta);
        assert!((below - above).abs() < 1e-10);
    }
    assert!(
        (huber_values(&[0.5, 3.0], &[0.0, 1.0], 1.0).unwrap() - (0.125 + 1.5) / 2.0).abs() < 1e-15
    );
}

#[test]
fn f1_cases() {
    assert_eq!(
        f1_score(&[true, false, true], &[true, false, true]).unwrap(),
        1.0
    );
    let two_thirds = f1_score(&[true, true], &[true, false]).unwrap();
    assert!((two_thirds - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(f1_score(&[false, false], &[false, false]).unwrap(), 0.0);
    assert!(matches!(
        f1_score(&[true], &[true, false]),
        Err(Error::Shape(_))
    ));
}

#[test]
fn r2_cases() {
    let t = vec![vec![1.0], vec![2.0], vec![3.0]];
    assert_eq!(r2_score(&t, &t).unwrap().0, 1.0);
    let mean = vec![vec![2.0]; 3];
    assert!(r2_score(&mean, &t).unwrap().0.abs() < 1e-15);
    let t2 = vec![vec![1.0], vec![-1.0]];
    let neg = vec![vec![-1.0], vec![1.0]];
    assert!((r2_score(&neg, &t2).unwrap().0 - -3.0).abs() < 1e-15);
    let flat = vec![vec![5.0], vec![5.0]];
    assert!(matches!(
        r2_score(&flat, &flat),
        Err(Error::DegenerateInput(_))
    ));
}

#[test]
fn shuffle_split_partitions() {
    let folds = shuffle_split(10, 5, 0.2, 7).unwrap();
    assert_eq!(folds.len(), 5);
    for f in &folds {
        assert_eq!((f.train.len(), f.eval.len()), (8, 2));
        let mut all: Vec<usize> = f.train.iter().chain(&f.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
    assert_eq!(folds, shuffle_split(10, 5, 0.2, 7).unwrap());
    for bad in [0.0, 1.0, -0.1] {
        assert!(matches!(
            shuffle_split(10, 5, bad, 7),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn stratified_holdout_keeps_class_ratio() {
    let classes: Vec<u8> = (0..100).map(|i| (i % 4 == 0) as u8).collect();
    let f = stratified_holdout(&classes, 0.2, 3).unwrap();
    assert_eq!(f.eval.len(), 20);
    assert_eq!(f.eval.iter().filter(|&&i| classes[i] == 1).count(), 5);
    assert!(f.train.iter().all(|i| f.eval.binary_search(i).is_err()));
}

#[test]
fn fold_aggregation() {
    let s = [Some(0.9), Some(1.0), Some(0.8), Some(1.0), Some(0.9)];
    assert!((aggregate_folds(&s).unwrap() - 0.92).abs() < 1e-12);
    assert_eq!(aggregate_folds(&[Some(0.9), None]), None);
    assert_eq!(aggregate_folds(&[]), None);
}

#[test]
fn scaler_maps_training_targets_into_unit_box() {
    let d = data();
    let cfg = ExperimentConfig {
        task: Task::RegressMulti,
        readout: ReadoutMode::ExpvalZ,
        ..small_cfg()
    };
    let idx: Vec<usize> = (0..d.len()).step_by(3).collect();
    let s = fit_scaler(&cfg, d, &idx).unwrap().unwrap();
    let sup = supervision(&cfg, d, Some(&s));
    for &i in &idx {
        let Supervision::Values(v) = &sup[i] else {
            panic!()
        };
        assert!(v.iter().all(|x| (-1.0 - 1e-12..=1.0 + 1e-12).contains(x)));
        let back = s.inverse(v);
        for (b, t) in back.iter().zip(Task::RegressMulti.targets()) {
            assert!((b - d.params[i][t.column()]).abs() < 1e-9);
        }
    }
    assert!(fit_scaler(&small_cfg(), d, &idx).unwrap().is_none());
}

#[test]
fn training_reduces_loss_on_a_small_balanced_subset() {
    let d = data();
    let idx = balanced(d);
    let cfg = small_cfg();
    let splits = Splits {
        train: &idx,
        eval: &idx,
        test: None,
    };
    let a = train(&cfg, d, splits, MODE).unwrap();
    assert!(!a.record.failed());
    let e = &a.record.epochs;
    assert_eq!(e.len(), 6);
    assert!(
        e[5].train_loss < e[0].train_loss,
        "{} !< {}",
        e[5].train_loss,
        e[0].train_loss
    );
    assert!(e
        .iter()
        .all(|r| r.grad_var_mpo.is_finite() && r.grad_var_vqc.is_finite()));

    let b = train(&cfg, d, splits, ExecMode::Sequential).unwrap();
    assert_eq!(a.params, b.params);
    let bits = |o: &hqtn::train::run::RunOutcome| {
        o.record
            .epochs
            .iter()
            .map(|r| r.train_loss.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn zero_learning_rate_freezes_everything() {
    let d = data();
    let idx = balanced(d);
    let cfg = ExperimentConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..small_cfg()
    };
    let out = train(
        &cfg,
        d,
        Splits {
            train: &idx,
            eval: &idx,
            test: None,
        },
        MODE,
    )
    .unwrap();
    assert_eq!(out.params, ModelParams::init(&cfg).unwrap());
    let e = &out.record.epochs;
    assert!(e
        .iter()
        .all(|r| r.train_loss.to_bits() == e[0].train_loss.to_bits()));
}

#[test]
fn training_requires_both_classes() {
    let d = data();
    let only: Vec<usize> = (0..d.len())
        .filter(|&i| d.labels[i] == 0)
        .take(10)
        .collect();
    let r = train(
        &small_cfg(),
        d,
        Splits {
            train: &only,
            eval: &only,
            test: None,
        },
        MODE,
    );
    assert!(matches!(r, Err(Error::DegenerateInput(_))));
}

#[test]
fn search_space_sampling() {
    let space = SearchSpace::default();
    let base = ExperimentConfig::default();
    let a = space.candidates(&base, 6, 11).unwrap();
    assert_eq!(a, space.candidates(&base, 6, 11).unwrap());
    for c in &a {
        assert!(space.chi_mpo.contains(&c.chi_mpo) && space.k_mpd.contains(&c.k_mpd));
        assert!((1e-4..=1e-1).contains(&c.learning_rate));
        assert_eq!(c.epochs, base.epochs);
    }
    assert!(space.chi_mpo.contains(&base.chi_mpo));
    assert!(space.k_mpd.contains(&base.k_mpd));
    assert!(space.vqc_layers.contains(&base.vqc_layers));
    assert!(space.gate_kind.contains(&base.gate_kind));
    assert!(space.batch_size.contains(&base.batch_size));
    assert!(space.measure_layer.contains(&base.measure_layer));

    let empty = SearchSpace {
        batch_size: vec![],
        ..SearchSpace::default()
    };
    assert!(matches!(
        empty.candidates(&base, 1, 0),
        Err(Error::Config(_))
    ));
}

#[test]
fn retraining_replicates_over_seeds() {
    let d = data();
    let cfg = ExperimentConfig {
        epochs: 2,
        ..small_cfg()
    };
    let split = holdout(&cfg, d).unwrap();
    let rep = retrain_and_test(&cfg, d, &split.train, &split.eval, 5, MODE).unwrap();
    assert_eq!(rep.runs.len(), 5);
    let mut sums: Vec<u64> = rep.runs.iter().map(|r| r.init_checksum).collect();
    sums.dedup();
    assert_eq!(sums.len(), 5);
    let metrics: Vec<f64> = rep
        .runs
        .iter()
        .map(|r| r.test.as_ref().unwrap().metric)
        .collect();
    assert!(rep
        .runs
        .iter()
        .all(|r| r.test.as_ref().unwrap().confusion.is_some()));
    let spread = rep.test_metric.unwrap();
    assert_eq!(spread.n, 5);
    assert!((spread.mean - metrics.iter().sum::<f64>() / 5.0).abs() < 1e-15);

    let overlap = [split.eval[0]];
    let mut tr = split.train.clone();
    tr.push(split.eval[0]);
    assert!(matches!(
        retrain_and_test(&cfg, d, &tr, &overlap, 1, MODE),
        Err(Error::Config(_))
    ));
}
