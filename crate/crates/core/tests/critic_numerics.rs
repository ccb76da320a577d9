mod common;

use common::{random_experience, relative_error};
use iov_sim::critic::{mse_loss, target_value, Critic, Experience, ReplayMemory};
use iov_sim::scenario::TrainingConfig;
use iov_sim::seed;
use rand::Rng;

const H: f64 = 1e-5;

/// Central differences of the batch loss against the analytic gradient.
fn max_fd_error(critic: &Critic, batch: &[&Experience], indices: &[usize]) -> f64 {
    let (_, grad) = critic.gradient(batch).unwrap();
    let base = critic.params();
    let mut probe = critic.clone();
    let mut worst: f64 = 0.0;
    for &i in indices {
        let mut p = base.clone();
        p[i] = base[i] + H;
        probe.set_params(&p);
        let up = probe.loss(batch).unwrap();
        p[i] = base[i] - H;
        probe.set_params(&p);
        let down = probe.loss(batch).unwrap();
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max(relative_error(grad[i], numeric));
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = seed::rng(2024);
    for draw in 0..50u64 {
        let (edges, services) = (rng.gen_range(1..=4), rng.gen_range(1..=3));
        let mut critic = Critic::new(edges, services, &[6, 5], draw);
        let params: Vec<f64> = (0..critic.num_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        critic.set_params(&params);
        let owned: Vec<Experience> = (0..rng.gen_range(1..=6))
            .map(|_| random_experience(&mut rng, edges, services))
            .collect();
        let batch: Vec<&Experience> = owned.iter().collect();
        let all: Vec<usize> = (0..critic.num_params()).collect();
        let err = max_fd_error(&critic, &batch, &all);
        assert!(err <= 1e-4, "draw {draw}: relative error {err:e}");
    }
}

#[test]
fn gradient_at_full_scale_on_sampled_parameters() {
    let mut rng = seed::rng(77);
    let critic = Critic::new(6, 8, &[64, 64], 5);
    let owned: Vec<Experience> = (0..8).map(|_| random_experience(&mut rng, 6, 8)).collect();
    let batch: Vec<&Experience> = owned.iter().collect();
    let picks: Vec<usize> = (0..300).map(|_| rng.gen_range(0..critic.num_params())).collect();
    let err = max_fd_error(&critic, &batch, &picks);
    assert!(err <= 1e-4, "relative error {err:e}");
}

#[test]
fn loss_unit_values() {
    assert!((mse_loss(&[0.5], &[0.3]).unwrap() - 0.04).abs() <= 1e-12);
    assert_eq!(mse_loss(&[0.2, 0.7], &[0.2, 0.7]).unwrap(), 0.0);
    assert!((mse_loss(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() <= 1e-12);
    assert!(mse_loss(&[], &[]).is_err());
}

#[test]
fn target_mapping() {
    assert!((target_value(20.0, 20.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    assert!(target_value(1e-9, 20.0).unwrap() > 0.999_999);
    assert!(target_value(5.0, 20.0).unwrap() > target_value(6.0, 20.0).unwrap());
    assert!(target_value(0.0, 20.0).is_err());
    // fully poisoned feedback tops out at 9 ms
    assert!(target_value(9.0, 20.0).unwrap() > 0.63);
}

#[test]
fn training_on_fixed_replay_converges() {
    let mut rng = seed::rng(11);
    let mut replay = ReplayMemory::new(16);
    for _ in 0..16 {
        replay.push(random_experience(&mut rng, 3, 2));
    }
    let cfg = TrainingConfig {
        batch_size: 16,
        replay_capacity: 16,
        learning_rate: 0.5,
        hidden_layers: vec![16, 16],
        ..TrainingConfig::default()
    };
    let mut critic = Critic::new(3, 2, &cfg.hidden_layers, 3);
    let all: Vec<&Experience> = replay.iter().collect();
    let start = critic.loss(&all).unwrap();
    let mut losses = Vec::with_capacity(200);
    for _ in 0..200 {
        losses.push(critic.train_step(&replay, &cfg, &mut rng).unwrap());
    }
    // full batch, so the reported loss is the loss before each step
    assert!((losses[0] - start).abs() < 1e-12);
    let upticks = losses.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-9)).count();
    assert!(upticks <= 10, "{upticks} upticks in 200 steps");
    assert!(losses[199] < 0.5 * start, "loss {start} -> {}", losses[199]);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut rng = seed::rng(4);
    let mut replay = ReplayMemory::new(8);
    for _ in 0..8 {
        replay.push(random_experience(&mut rng, 2, 2));
    }
    let cfg = TrainingConfig {
        batch_size: 4,
        learning_rate: 0.0,
        hidden_layers: vec![4],
        ..TrainingConfig::default()
    };
    let mut critic = Critic::new(2, 2, &[4], 9);
    let before = critic.params();
    critic.train_step(&replay, &cfg, &mut rng).unwrap();
    assert_eq!(critic.params(), before);
}
