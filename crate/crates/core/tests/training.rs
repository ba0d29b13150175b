use isac_core::dataset::TrainingExample;
use isac_core::nn::{train, ClrnetArch, TrainConfig};
use isac_core::rng::{stream, Purpose};
use isac_core::sensing::AngleHistory;
use rand::Rng;

/// Labels are a fixed linear map of the most recent column.
fn linear_toy(count: usize, arch: &ClrnetArch) -> Vec<TrainingExample> {
    let mut rng = stream(42, Purpose::TrainTrajectory, 0);
    let k = arch.num_vehicles;
    (0..count)
        .map(|_| {
            let cols: Vec<Vec<f64>> = (0..arch.window)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let last = &cols[0];
            let label = (0..k).map(|i| 0.6 * last[i] - 0.3 * last[(i + 1) % k] + 0.2).collect();
            TrainingExample {
                input: AngleHistory::from_columns(&cols, arch.window).unwrap(),
                label,
            }
        })
        .collect()
}

#[test]
fn loss_drops_hundredfold_on_linear_toy() {
    let arch = ClrnetArch::new(4, 3);
    let data = linear_toy(512, &arch);
    // Default optimizer and batch settings; only the budget is set here.
    let cfg = TrainConfig {
        max_iterations: 8000,
        validation_fraction: 0.0,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train::<f64>(&arch, &data, &cfg).unwrap();
    assert!(
        out.final_train_loss * 100.0 <= out.initial_train_loss,
        "initial {} final {}",
        out.initial_train_loss,
        out.final_train_loss
    );
    assert_eq!(out.loss_trace.len(), 8000);
}

#[test]
fn training_is_deterministic() {
    let arch = ClrnetArch::new(4, 2);
    let data = linear_toy(100, &arch);
    let cfg = TrainConfig {
        max_iterations: 50,
        batch_size: 16,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train::<f64>(&arch, &data, &cfg).unwrap();
    let b = train::<f64>(&arch, &data, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.final_train_loss < a.initial_train_loss);
    assert_eq!(a.validation_examples, 10);
}

#[test]
fn single_precision_training_runs() {
    let arch = ClrnetArch::new(4, 2);
    let data = linear_toy(100, &arch);
    let cfg = TrainConfig {
        max_iterations: 200,
        batch_size: 16,
        standardize: true,
        seed: 3,
        ..TrainConfig::default()
    };
    let out = train::<f32>(&arch, &data, &cfg).unwrap();
    assert!(out.final_train_loss < out.initial_train_loss);
    assert!(!out.params.norm.is_identity());
}

#[test]
fn early_stopping_halts() {
    let arch = ClrnetArch::new(4, 2);
    let data = linear_toy(100, &arch);
    let cfg = TrainConfig {
        max_iterations: 100_000,
        batch_size: 16,
        learning_rate: 0.05,
        eval_every: 10,
        early_stop_patience: Some(5),
        seed: 4,
        ..TrainConfig::default()
    };
    let out = train::<f64>(&arch, &data, &cfg).unwrap();
    assert!(out.iterations < 100_000);
    assert!(out.best_iteration <= out.iterations);
}

#[test]
fn rejects_empty_and_mismatched_data() {
    let arch = ClrnetArch::new(4, 2);
    assert!(train::<f64>(&arch, &[], &TrainConfig::default()).is_err());
    let data = linear_toy(10, &ClrnetArch::new(4, 3));
    assert!(train::<f64>(&arch, &data, &TrainConfig::default()).is_err());
}
