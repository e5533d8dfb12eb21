use mlcbart::predict::pattern_index;
use mlcbart::simulate::{
    correlation_recovery_summary, default_correlation, generate_dataset, generate_with_latents, run_experiment,
    true_combination_distribution, true_combination_distribution_at, true_means, ExperimentConfig, ModelKind,
    SimulationScenario,
};
use mlcbart::stats::{orthant_distribution, CorrelationMatrix};
use mlcbart::RngStream;
use nalgebra::DMatrix;

#[test]
fn true_means_examples() {
    let x = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 0.5, 1.0, 0.2]);
    let f = true_means(&x, 1.0, 0.1).unwrap();
    assert_eq!(f.row(0).iter().copied().collect::<Vec<_>>(), vec![-0.1, 0.1, 0.0]);
    assert!((f[(1, 0)] - 0.9).abs() < 1e-15 && (f[(1, 1)] - 1.1).abs() < 1e-15 && (f[(1, 2)] - 0.2).abs() < 1e-15);
    assert!(true_means(&DMatrix::zeros(1, 2), 1.0, 0.1).is_err());
    let mut rng = RngStream::new(1);
    let x = DMatrix::from_fn(50, 5, |_, _| rng.uniform_range(-1.0, 1.0));
    let f = true_means(&x, 0.7, 0.3).unwrap();
    for i in 0..50 {
        assert!((f[(i, 0)] + 0.3 - (f[(i, 1)] - 0.3)).abs() < 1e-15);
    }
}

#[test]
fn scenario_tokens() {
    let s = SimulationScenario::named("weak+noise2", 1).unwrap();
    assert_eq!((s.a, s.b, s.extra_noise_predictors, s.n_features()), (0.3, 0.1, 2, 5));
    assert_eq!(SimulationScenario::named("strong", 1).unwrap().a, 1.0);
    assert_eq!(SimulationScenario::named("moderate", 1).unwrap().a, 0.6);
    assert!(SimulationScenario::named("medium", 1).is_err());
    assert!(SimulationScenario::named("weak+extra", 1).is_err());
}

fn label_rates(y: &DMatrix<u8>) -> Vec<f64> {
    (0..y.ncols())
        .map(|k| y.column(k).iter().map(|&v| f64::from(v)).sum::<f64>() / y.nrows() as f64)
        .collect()
}

#[test]
fn zero_signal_labels_follow_the_orthant_probabilities() {
    let mut s = SimulationScenario::new("null", 0.0, 0.0, 2);
    s.n_train = 10_000;
    s.n_test = 1;
    let data = generate_dataset(&s, &RngStream::new(2)).unwrap();
    for r in label_rates(&data.train.y) {
        assert!((r - 0.5).abs() <= 0.02, "{r}");
    }
    let exact = orthant_distribution(&[0.0; 3], &s.r_true, 2e-4, &mut RngStream::new(3)).unwrap();
    let mut counts = [0usize; 8];
    for i in 0..data.train.n_rows() {
        counts[pattern_index(&data.train.label_row(i))] += 1;
    }
    for (c, e) in counts.iter().zip(&exact) {
        let f = *c as f64 / 10_000.0;
        let se = (e.probability * (1.0 - e.probability) / 10_000.0).sqrt();
        assert!((f - e.probability).abs() <= 3.0 * se + 3.0 * e.std_error, "{f} vs {}", e.probability);
    }
}

#[test]
fn weak_signal_label_rates_are_moderate() {
    let mut s = SimulationScenario::named("weak", 4).unwrap();
    s.n_train = 10_000;
    let data = generate_dataset(&s, &RngStream::new(4)).unwrap();
    for r in label_rates(&data.train.y) {
        assert!((0.25..=0.65).contains(&r), "{r}");
    }
}

#[test]
fn generation_is_deterministic_and_noise_predictors_do_not_move_labels() {
    let s = SimulationScenario::named("weak", 5).unwrap();
    let a = generate_dataset(&s, &RngStream::new(5)).unwrap();
    let b = generate_dataset(&s, &RngStream::new(5)).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&s, &RngStream::new(6)).unwrap();
    assert_ne!(a.train.y, c.train.y);

    let noisy = SimulationScenario::named("weak+noise2", 5).unwrap();
    let d = generate_dataset(&noisy, &RngStream::new(5)).unwrap();
    assert_eq!(d.train.n_features(), 5);
    assert_eq!(a.train.y, d.train.y);
    assert_eq!(a.test.y, d.test.y);
    assert_eq!(a.train.x.columns(0, 3), d.train.x.columns(0, 3));
    assert_eq!(a.test_true_means, d.test_true_means);
}

#[test]
fn labels_are_the_thresholded_latents() {
    let s = SimulationScenario::named("strong", 7).unwrap();
    let (data, z_train, z_test) = generate_with_latents(&s, &RngStream::new(7)).unwrap();
    assert_eq!(data.train.y, z_train.map(|v| u8::from(v > 0.0)));
    assert_eq!(data.test.y, z_test.map(|v| u8::from(v > 0.0)));
    assert_eq!(data.train.n_rows(), 500);
    assert_eq!(data.test.n_rows(), 1000);
}

#[test]
fn true_distribution_examples() {
    let s = SimulationScenario::named("weak", 0).unwrap();
    let mut rng = RngStream::new(8);
    let far = true_combination_distribution_at(&[10.0; 3], &s.r_true, 1e-3, &mut rng).unwrap();
    assert!(far.probability(7) >= 1.0 - 1e-6);

    let indep = true_combination_distribution_at(&[0.0; 3], &CorrelationMatrix::identity(3), 1e-3, &mut rng).unwrap();
    for p in indep.probabilities() {
        assert!((p - 0.125).abs() <= 3e-3, "{p}");
    }

    let centered = true_combination_distribution_at(&[0.0; 3], &default_correlation(), 1e-3, &mut rng).unwrap();
    assert_eq!(centered.probability(0b111), centered.probability(0b000));

    let d = true_combination_distribution(&[0.3, -0.2, 0.5, 0.9], &s, 1e-3, &mut rng).unwrap();
    assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

#[test]
fn raw_orthant_estimates_nearly_sum_to_one() {
    let mut rng = RngStream::new(9);
    let se = 1e-3;
    for _ in 0..10 {
        let m: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
        let est = orthant_distribution(&m, &default_correlation(), se, &mut rng).unwrap();
        let total: f64 = est.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() <= 4.0 * se * 2f64.powf(1.5));
    }
}

fn tiny(models: Vec<ModelKind>, reps: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(vec!["weak".into()], models, reps, seed);
    c.n_train = 60;
    c.n_test = 25;
    c.model.iterations = 20;
    c.model.burn_in = 10;
    c.model.tree_prior.b = 5;
    c.true_target_se = 1e-2;
    c
}

#[test]
fn identical_models_center_to_zero() {
    let res = run_experiment(&tiny(vec![ModelKind::Ubart, ModelKind::Ubart], 2, 10)).unwrap();
    assert_eq!(res.cells.len(), 4);
    for centered in res.centered() {
        for v in centered.iter().flatten() {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn centered_values_sum_to_zero_per_dataset() {
    let res = run_experiment(&tiny(vec![ModelKind::Mlcbart, ModelKind::Ubart, ModelKind::Mtru], 2, 11)).unwrap();
    assert!(!res.has_failures());
    let centered = res.centered();
    for rep in 0..2 {
        for m in 0..9 {
            let s: f64 = res
                .cells
                .iter()
                .zip(&centered)
                .filter(|(c, _)| c.replication == rep)
                .filter_map(|(_, v)| v[m])
                .sum();
            assert!(s.abs() < 1e-12);
        }
    }
    let fixed = correlation_recovery_summary(&res, "weak", ModelKind::Ubart).unwrap();
    assert!(fixed.iter().all(|c| c.mean == 0.0 && c.sd == 0.0));
}

#[test]
fn experiments_are_reproducible_and_write_files() {
    let cfg = tiny(vec![ModelKind::Mlcbart, ModelKind::Ulin], 1, 12);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    a.write_csv(&dir.path().join("r.csv")).unwrap();
    a.write_summary_json(&dir.path().join("s.json")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 9);
    assert!(text.starts_with("scenario,replication,model,metric,value,centered,error"));
}

#[test]
fn failing_cells_are_recorded_and_the_run_continues() {
    // one training row per replication makes every fit fail
    let mut cfg = tiny(vec![ModelKind::Mlcbart], 1, 13);
    cfg.n_train = 1;
    let res = run_experiment(&cfg).unwrap();
    assert!(res.has_failures());
    assert!(res.cells[0].error.is_some());
}
