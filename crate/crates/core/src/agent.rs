//! The per-tick control loop.
//!
//! Each tick, in order: draw requests, serve them under the placement in
//! force, let the adversary rewrite reported delays, aggregate per
//! (service, serving edge) feedback and rewards, observe the state, store an
//! experience, train the critic when due, and decide whether to re-optimize.
//! A re-optimized placement takes effect from the next tick.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{self, ActorError, SearchParams};
use crate::adversary::{self, SybilRoster};
use crate::critic::{self, Critic, CriticError, Experience, ReplayMemory, StateObservation};
use crate::mobility::{self, ServiceRequest, Vehicle};
use crate::netmodel::{self, Placement, Serving};
use crate::scenario::ScenarioConfig;
use crate::seed;
use crate::{ServiceId, Tick, VehicleId};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("tick {tick}: placement: {source}")]
    Actor {
        tick: Tick,
        #[source]
        source: ActorError,
    },
    #[error("tick {tick}: critic: {source}")]
    Critic {
        tick: Tick,
        #[source]
        source: CriticError,
    },
}

/// Delays reported for one service served from one place during one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSample {
    pub service_id: ServiceId,
    pub serving: Serving,
    pub time: Tick,
    /// What the agent receives; possibly poisoned.
    pub reported_delays: Vec<(VehicleId, f64)>,
    /// Ground truth from the network model.
    pub true_delays: Vec<(VehicleId, f64)>,
    pub avg_reported: f64,
    pub avg_true: f64,
}

fn mean(values: &[(VehicleId, f64)]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|(_, d)| d).sum::<f64>() / values.len() as f64
}

impl FeedbackSample {
    /// Honest sample: reported delays equal true delays.
    pub fn new(service_id: ServiceId, serving: Serving, time: Tick, delays: Vec<(VehicleId, f64)>) -> Self {
        let avg = mean(&delays);
        Self {
            service_id,
            serving,
            time,
            reported_delays: delays.clone(),
            true_delays: delays,
            avg_reported: avg,
            avg_true: avg,
        }
    }

    pub fn recompute_reported_mean(&mut self) {
        self.avg_reported = mean(&self.reported_delays);
    }
}

/// Reward of a sample: mean reported delay (ms). `None` for an empty sample.
pub fn reward(sample: &FeedbackSample) -> Option<f64> {
    (!sample.reported_delays.is_empty()).then(|| mean(&sample.reported_delays))
}

/// Re-optimize iff the critic's quality is strictly below `threshold`.
pub fn decide_reoptimize(q_value: f64, threshold: f64) -> bool {
    q_value < threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickLog {
    pub time: Tick,
    pub state: StateObservation,
    /// Placement that served this tick's requests.
    pub action: Placement,
    pub feedback: Vec<FeedbackSample>,
    pub reoptimized: bool,
    pub q_value: f64,
    /// Critic not yet trained; re-optimization followed the threshold rule
    /// on observed delays instead of the critic.
    pub warmup: bool,
    /// Mean batch loss when the critic trained this tick.
    pub train_loss: Option<f64>,
}

/// Writes logs as newline-delimited JSON, one tick per line.
pub fn write_ndjson<W: Write>(logs: &[TickLog], mut out: W) -> std::io::Result<()> {
    for log in logs {
        serde_json::to_writer(&mut out, log)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Requests at tick `t` for a run seeded with `run_seed`. Depends only on
/// `(run_seed, t)` and the vehicles, so matched runs see identical streams.
pub fn requests_at(cfg: &ScenarioConfig, vehicles: &[Vehicle], run_seed: u64, t: Tick) -> Vec<ServiceRequest> {
    let mut rng = seed::stream_at(run_seed, "requests", t as u64);
    mobility::generate_requests(vehicles, &cfg.services, t, &mut rng)
}

/// Honest feedback for `requests` under `placement`, grouped by
/// (service, serving) in ascending order.
pub fn collect_feedback(
    requests: &[ServiceRequest],
    placement: &Placement,
    cfg: &ScenarioConfig,
    t: Tick,
) -> Vec<FeedbackSample> {
    let mut groups: BTreeMap<(ServiceId, Serving), Vec<(VehicleId, f64)>> = BTreeMap::new();
    for r in requests {
        let obs = netmodel::observe(r, placement, &cfg.edges, &cfg.delay_model);
        groups
            .entry((obs.service_id, obs.serving))
            .or_default()
            .push((obs.vehicle_id, obs.true_delay));
    }
    groups
        .into_iter()
        .map(|((s, serving), delays)| FeedbackSample::new(s, serving, t, delays))
        .collect()
}

/// Seed of the adversary streams for a run; distinct per attack setting.
pub fn attack_seed(run_seed: u64, cfg: &ScenarioConfig) -> u64 {
    let a = &cfg.attack;
    let label = format!("attack/{}/{}", a.mode.label(), (a.proportion * 1e6).round() as u64);
    seed::derive(run_seed, &label)
}

pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    vehicles: &'a [Vehicle],
    run_seed: u64,
    attack_seed: u64,
    roster: SybilRoster,
    critic: Critic,
    replay: ReplayMemory,
    placement: Placement,
    train_rng: ChaCha8Rng,
    period_rng: ChaCha8Rng,
    next_train: Tick,
    trained_rounds: u32,
    reopt_count: u32,
    experiences: u32,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub logs: Vec<TickLog>,
    pub roster: SybilRoster,
    pub critic: Critic,
}

impl<'a> Simulation<'a> {
    /// Fresh run: empty placement (every service on the cloud), untrained
    /// critic, and the adversary's compromise and deployment phases done.
    pub fn new(cfg: &'a ScenarioConfig, vehicles: &'a [Vehicle], run_seed: u64) -> Self {
        let attack_seed = attack_seed(run_seed, cfg);
        let roster = if cfg.attack.is_active() {
            let r = adversary::compromise(vehicles, &cfg.attack, &mut seed::stream(attack_seed, "compromise"));
            adversary::deploy(r, &cfg.area_size, &mut seed::stream(attack_seed, "deploy"))
        } else {
            SybilRoster::default()
        };
        let t = &cfg.training;
        let critic = Critic::new(
            cfg.num_edges(),
            cfg.num_services(),
            &t.hidden_layers,
            seed::derive(run_seed, "critic-init"),
        );
        let mut period_rng = seed::stream(run_seed, "train-period");
        let next_train = draw_period(&mut period_rng, t.train_period_mean);
        Self {
            cfg,
            vehicles,
            run_seed,
            attack_seed,
            roster,
            critic,
            replay: ReplayMemory::new(t.replay_capacity),
            placement: Placement::empty(cfg.num_services()),
            train_rng: seed::stream(run_seed, "train"),
            period_rng,
            next_train,
            trained_rounds: 0,
            reopt_count: 0,
            experiences: 0,
        }
    }

    pub fn roster(&self) -> &SybilRoster {
        &self.roster
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn reopt_count(&self) -> u32 {
        self.reopt_count
    }

    pub fn experiences_pushed(&self) -> u32 {
        self.experiences
    }

    pub fn trained_rounds(&self) -> u32 {
        self.trained_rounds
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn tick(&mut self, t: Tick) -> Result<TickLog, AgentError> {
        let cfg = self.cfg;
        let tc = &cfg.training;
        let critic_err = |source| AgentError::Critic { tick: t, source };

        let requests = requests_at(cfg, self.vehicles, self.run_seed, t);
        let honest = collect_feedback(&requests, &self.placement, cfg, t);
        let mut poison_rng = seed::stream_at(self.attack_seed, "poison", t as u64);
        let feedback: Vec<FeedbackSample> = honest
            .iter()
            .map(|s| adversary::poison(s, &self.roster, &cfg.attack, &mut poison_rng))
            .collect();
        let rewards: Vec<f64> = feedback.iter().filter_map(reward).collect();
        let state = StateObservation::from_requests(&requests, &cfg.edges, cfg.num_services());

        if !rewards.is_empty() {
            let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
            let mut target = critic::target_value(mean_reward, tc.quality_scale).map_err(critic_err)?;
            if tc.bootstrap_discount > 0.0 {
                let q = self.critic.quality(&state, &self.placement).map_err(critic_err)?;
                target = (1.0 - tc.bootstrap_discount) * target + tc.bootstrap_discount * q;
            }
            self.replay.push(Experience::new(state.clone(), &self.placement, target));
            self.experiences += 1;
        }

        let mut train_loss = None;
        if t >= self.next_train {
            if self.replay.len() >= tc.batch_size {
                let mut total = 0.0;
                for _ in 0..tc.steps_per_round.max(1) {
                    total += self.critic.train_step(&self.replay, tc, &mut self.train_rng).map_err(critic_err)?;
                }
                train_loss = Some(total / tc.steps_per_round.max(1) as f64);
                self.trained_rounds += 1;
            }
            self.next_train = t + draw_period(&mut self.period_rng, tc.train_period_mean);
        }

        let q_value = self.critic.quality(&state, &self.placement).map_err(critic_err)?;
        let warmup = self.trained_rounds == 0;
        let reoptimized = if feedback.is_empty() {
            false
        } else if warmup {
            self.any_service_over_threshold(&feedback)
        } else {
            decide_reoptimize(q_value, tc.reopt_threshold)
        };

        let log = TickLog {
            time: t,
            state,
            action: self.placement.clone(),
            feedback,
            reoptimized,
            q_value,
            warmup,
            train_loss,
        };

        if reoptimized {
            let params = SearchParams {
                seed: seed::derive_indexed(self.run_seed, "actor", t as u64),
                ..SearchParams::default()
            };
            self.placement = actor::optimize_placement(&requests, cfg, &self.placement, params)
                .map_err(|source| AgentError::Actor { tick: t, source })?;
            self.reopt_count += 1;
        }
        Ok(log)
    }

    /// Observed (reported) mean delay of some service exceeds its threshold.
    fn any_service_over_threshold(&self, feedback: &[FeedbackSample]) -> bool {
        let mut sums: BTreeMap<ServiceId, (f64, usize)> = BTreeMap::new();
        for s in feedback {
            let e = sums.entry(s.service_id).or_default();
            e.0 += s.reported_delays.iter().map(|(_, d)| d).sum::<f64>();
            e.1 += s.reported_delays.len();
        }
        sums.iter()
            .any(|(&id, &(sum, n))| n > 0 && sum / n as f64 > self.cfg.service(id).delay_threshold)
    }

    pub fn run(mut self) -> Result<RunOutcome, AgentError> {
        let logs = (1..=self.cfg.horizon)
            .map(|t| self.tick(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RunOutcome {
            logs,
            roster: self.roster,
            critic: self.critic,
        })
    }
}

/// Random gap between training rounds, uniform on `1..=2*mean-1`.
fn draw_period<R: Rng>(rng: &mut R, mean: u32) -> Tick {
    let mean = mean.max(1);
    rng.gen_range(1..=2 * mean - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackMode;

    fn small_cfg(horizon: u32, vehicles: u32) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::baseline();
        cfg.horizon = horizon;
        cfg.mobility.vehicles = vehicles;
        cfg.training.batch_size = 8;
        cfg.training.hidden_layers = vec![8];
        cfg
    }

    #[test]
    fn reward_is_mean_reported() {
        let s = FeedbackSample::new(1, Serving::Edge(1), 1, vec![(1, 10.0), (2, 12.0), (3, 14.0)]);
        assert_eq!(reward(&s), Some(12.0));
        let one = FeedbackSample::new(1, Serving::Edge(1), 1, vec![(9, 7.0)]);
        assert_eq!(reward(&one), Some(7.0));
        let empty = FeedbackSample::new(1, Serving::Edge(1), 1, vec![]);
        assert_eq!(reward(&empty), None);
    }

    #[test]
    fn reoptimize_is_strict() {
        assert!(decide_reoptimize(0.2, 0.5));
        assert!(!decide_reoptimize(0.5, 0.5));
        assert!(!decide_reoptimize(0.7, 0.5));
    }

    #[test]
    fn period_draw_range() {
        let mut rng = seed::rng(1);
        for _ in 0..1000 {
            let p = draw_period(&mut rng, 4);
            assert!((1..=7).contains(&p));
        }
        assert_eq!(draw_period(&mut rng, 1), 1);
    }

    #[test]
    fn degenerate_tick_without_vehicles() {
        let cfg = small_cfg(3, 4);
        let vehicles: Vec<Vehicle> = (1..=4).map(|id| Vehicle::inactive(id, 3)).collect();
        let mut sim = Simulation::new(&cfg, &vehicles, 1);
        let log = sim.tick(1).unwrap();
        assert!(log.feedback.is_empty());
        assert!(!log.reoptimized);
        assert_eq!(sim.experiences_pushed(), 0);
        assert_eq!(sim.replay_len(), 0);
    }

    #[test]
    fn first_tick_leaves_the_cloud() {
        let cfg = small_cfg(2, 30);
        let vehicles = mobility::synthesize_vehicles(30, 2, &cfg.area_size, &cfg.mobility, 1);
        let mut sim = Simulation::new(&cfg, &vehicles, 1);
        let log = sim.tick(1).unwrap();
        assert!(log.feedback.iter().all(|f| f.serving == Serving::Cloud));
        assert!(log.reoptimized && log.warmup);
        assert!(sim.placement().covers_all());
    }

    #[test]
    fn no_attack_reports_truth() {
        let cfg = small_cfg(20, 40);
        let vehicles = mobility::synthesize_vehicles(40, 20, &cfg.area_size, &cfg.mobility, 2);
        let out = Simulation::new(&cfg, &vehicles, 2).run().unwrap();
        for f in out.logs.iter().flat_map(|l| &l.feedback) {
            assert_eq!(f.reported_delays, f.true_delays);
            assert_eq!(f.avg_reported, f.avg_true);
        }
    }

    #[test]
    fn enabled_attack_with_zero_proportion_is_identity() {
        let mut cfg = small_cfg(20, 40);
        cfg.attack.enabled = true;
        cfg.attack.proportion = 0.0;
        cfg.attack.mode = AttackMode::Any;
        let vehicles = mobility::synthesize_vehicles(40, 20, &cfg.area_size, &cfg.mobility, 2);
        let out = Simulation::new(&cfg, &vehicles, 2).run().unwrap();
        assert!(out.roster.is_empty());
        assert!(out
            .logs
            .iter()
            .flat_map(|l| &l.feedback)
            .all(|f| f.reported_delays == f.true_delays));
    }

    #[test]
    fn bookkeeping_invariants() {
        let cfg = small_cfg(60, 50);
        let vehicles = mobility::synthesize_vehicles(50, 60, &cfg.area_size, &cfg.mobility, 3);
        let mut sim = Simulation::new(&cfg, &vehicles, 3);
        let mut logs = Vec::new();
        for t in 1..=cfg.horizon {
            logs.push(sim.tick(t).unwrap());
            if logs.last().unwrap().train_loss.is_some() {
                assert!(sim.replay_len() >= cfg.training.batch_size);
            }
        }
        assert_eq!(logs.len(), 60);
        assert!(sim.experiences_pushed() <= cfg.horizon);
        assert_eq!(
            sim.reopt_count() as usize,
            logs.iter().filter(|l| l.reoptimized).count()
        );
        assert!(sim.trained_rounds() > 0);
        for l in &logs {
            assert!(netmodel::is_feasible(&l.action, &cfg.services, &cfg.edges));
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = small_cfg(30, 30);
        let vehicles = mobility::synthesize_vehicles(30, 30, &cfg.area_size, &cfg.mobility, 4);
        let a = Simulation::new(&cfg, &vehicles, 4).run().unwrap();
        let b = Simulation::new(&cfg, &vehicles, 4).run().unwrap();
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        write_ndjson(&a.logs, &mut ja).unwrap();
        write_ndjson(&b.logs, &mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.critic, b.critic);
    }
}
