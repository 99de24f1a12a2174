use proptest::prelude::*;

use super::*;
use crate::policy::{ActorConfig, ChannelSpec};

struct Bandit {
    rewards: Vec<f64>,
    horizon: usize,
    cost: f64,
}

impl Bandit {
    fn config(&self) -> ActorConfig {
        let ch = ChannelSpec::new("obs", 1, self.cost).measured();
        ActorConfig::new(vec![ch], vec![self.rewards.len()]).with_sizes(8, 4, 8)
    }
}

impl Environment for Bandit {
    fn actor_names(&self) -> Vec<String> {
        vec!["bandit".into()]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn rollout(&mut self, actors: &[RirlActor], rng: &mut SimRng) -> Result<Vec<Trajectory>> {
        let mut hidden = actors[0].initial_state();
        let mut steps = Vec::new();
        let mut utilities = Vec::new();
        for _ in 0..self.horizon {
            let step = actors[0].act(&[vec![1.0]], &hidden, rng)?;
            hidden = step.hidden_after.clone();
            utilities.push(self.rewards[step.actions[0]]);
            steps.push(step);
        }
        Ok(vec![Trajectory::new(0, steps, utilities)])
    }
}

fn bandit_run(batches: usize, seed: u64, scale: bool, horizon: usize) -> (TrainOutcome, Bandit) {
    let mut env = Bandit {
        rewards: vec![1.0, 0.0],
        horizon,
        cost: 0.0,
    };
    let mut rng = rng::stream(seed, streams::INIT);
    let actor = RirlActor::new(env.config(), &mut rng).unwrap();
    let cfg = TrainConfig {
        policy_lr: 0.02,
        discriminator_lr: 0.01,
        batch_size: 16,
        batches,
        seed,
        scale_rewards: scale,
        entropy_coef: 0.0,
        discriminator_hidden: vec![8],
        ..TrainConfig::default()
    };
    (train(&cfg, &mut env, vec![actor]).unwrap(), env)
}

fn best_action_prob(actor: &RirlActor) -> f64 {
    let mut rng = rng::stream(99, streams::EVAL);
    let step = actor.act(&[vec![1.0]], &actor.initial_state(), &mut rng).unwrap();
    step.heads[0].probs()[0]
}

#[test]
fn geometric_returns() {
    let r = discounted_returns(&[1.0, 1.0, 1.0], 0.9);
    for (a, b) in r.iter().zip([2.71, 1.9, 1.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(discounted_returns(&[3.0, -1.0, 2.0], 0.0), vec![3.0, -1.0, 2.0]);
}

#[test]
fn anneal_schedule() {
    assert_eq!(anneal_lambda(0, 3.0, 4e-4), 0.0);
    assert!((anneal_lambda(2500, 3.0, 4e-4) - 1.0).abs() < 1e-12);
    assert_eq!(anneal_lambda(7500, 3.0, 4e-4), 3.0);
    assert_eq!(anneal_lambda(1_000_000, 3.0, 4e-4), 3.0);
}

#[test]
fn entropy_coefficient_fades_over_last_third() {
    let cfg = TrainConfig {
        batches: 300,
        entropy_coef: 0.3,
        ..TrainConfig::default()
    };
    assert_eq!(cfg.entropy_coef_at(0), 0.3);
    assert_eq!(cfg.entropy_coef_at(199), 0.3);
    assert!((cfg.entropy_coef_at(250) - 0.15).abs() < 1e-12);
    assert!(cfg.entropy_coef_at(299) < 0.01);
}

#[test]
fn bad_gamma_is_rejected() {
    let cfg = TrainConfig {
        gamma: 1.5,
        ..TrainConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn bandit_learns_the_better_arm() {
    let (out, _) = bandit_run(300, 0, false, 1);
    let p = best_action_prob(&out.actors[0]);
    assert!(p > 0.99, "p = {p}");
}

#[test]
fn reward_scaling_keeps_the_bandit_argmax() {
    let (out, _) = bandit_run(300, 1, true, 2);
    assert!(best_action_prob(&out.actors[0]) > 0.9);
}

#[test]
fn zero_batches_return_actors_unchanged() {
    let env = Bandit {
        rewards: vec![1.0, 0.0],
        horizon: 1,
        cost: 0.0,
    };
    let mut rng = rng::stream(0, streams::INIT);
    let actor = RirlActor::new(env.config(), &mut rng).unwrap();
    let (out, _) = bandit_run(0, 0, false, 1);
    assert_eq!(out.actors[0], actor);
    assert!(out.metrics.is_empty());
}

#[test]
fn identical_seeds_give_identical_metrics() {
    let (a, _) = bandit_run(20, 4, true, 2);
    let (b, _) = bandit_run(20, 4, true, 2);
    assert_eq!(a.metrics, b.metrics);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    write_metrics_csv(&a.metrics, &mut buf_a).unwrap();
    write_metrics_csv(&b.metrics, &mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
    let text = String::from_utf8(buf_a).unwrap();
    assert!(text.starts_with("batch,actor,mean_utility,mean_RI_utility,mi_obs,lambda_obs,entropy,seed"));
}

#[test]
fn centered_advantage_gives_zero_gradient() {
    let env = Bandit {
        rewards: vec![1.0, 1.0],
        horizon: 1,
        cost: 0.0,
    };
    let mut rng = rng::stream(0, streams::INIT);
    let mut actor = RirlActor::new(env.config(), &mut rng).unwrap();
    let before = actor.clone();
    let mut trajs = Vec::new();
    for _ in 0..4 {
        let step = actor.act(&[vec![1.0]], &actor.initial_state(), &mut rng).unwrap();
        let mut t = Trajectory::new(0, vec![step], vec![1.0]);
        t.returns = vec![1.0];
        trajs.push(t);
    }
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    let mut opt = Adam::new(0.1);
    policy_gradient_step(&mut actor, &refs, &mut opt, GradientOptions::plain(0.0)).unwrap();
    assert_eq!(actor, before);

    let mut opt = Adam::new(0.0);
    trajs[0].returns = vec![5.0];
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    policy_gradient_step(&mut actor, &refs, &mut opt, GradientOptions::plain(0.0)).unwrap();
    assert_eq!(actor, before);
}

#[test]
fn single_head_credit_matches_total_advantage() {
    let env = Bandit {
        rewards: vec![1.0, 0.0],
        horizon: 3,
        cost: 0.0,
    };
    let mut rng = rng::stream(3, streams::INIT);
    let actor = RirlActor::new(env.config(), &mut rng).unwrap();
    let trajs: Vec<Trajectory> = (0..5)
        .map(|k| {
            let steps = (0..3)
                .map(|_| actor.act(&[vec![1.0]], &actor.initial_state(), &mut rng).unwrap())
                .collect();
            let returns: Vec<f64> = (0..3).map(|t| (k * 3 + t) as f64 * 0.7 - t as f64).collect();
            let mut t = Trajectory::new(0, steps, vec![0.0; 3]);
            t.head_returns = Some(returns.iter().map(|&r| vec![r]).collect());
            t.returns = returns;
            t
        })
        .collect();
    let refs: Vec<&Trajectory> = trajs.iter().collect();
    for baseline in [Baseline::Mean, Baseline::Linear] {
        for normalize in [false, true] {
            let total = advantages(&refs, baseline, normalize);
            let split = head_advantages(&refs, baseline, normalize).unwrap();
            for (a, h) in total.iter().flatten().zip(split.iter().flatten()) {
                assert!((a - h[0]).abs() < 1e-12);
            }
        }
    }
    let mut unsplit = trajs[0].clone();
    unsplit.head_returns = None;
    let mixed = [refs[1], &unsplit];
    assert!(head_advantages(&mixed, Baseline::Mean, false).is_none());
}

#[test]
fn ri_identity_and_zero_lambda_reduce_to_reinforce() {
    let env = Bandit {
        rewards: vec![1.0, 0.0],
        horizon: 3,
        cost: 2.0,
    };
    let mut rng = rng::stream(3, streams::INIT);
    let actor = RirlActor::new(env.config(), &mut rng).unwrap();
    let discs = ActorDiscriminators::new(&actor, &[8], 1e-3, &mut rng);
    let mut env = env;
    let mut traj = env.rollout(std::slice::from_ref(&actor), &mut rng).unwrap().remove(0);
    let lam = Lambdas {
        channels: vec![2.0],
        decoder: 0.0,
    };
    score_trajectory(&mut traj, &discs, &lam, 1.0, 1.0 / 3.0);
    for t in 0..3 {
        let mi = traj.penalties[t].channels[0].unwrap();
        assert!((traj.ri_utilities[t] - (traj.utilities[t] - 2.0 * mi)).abs() < 1e-12);
    }
    let zero = Lambdas {
        channels: vec![0.0],
        decoder: 0.0,
    };
    score_trajectory(&mut traj, &discs, &zero, 1.0, 1.0);
    assert_eq!(traj.ri_utilities, traj.utilities);
    assert_eq!(traj.returns, discounted_returns(&traj.utilities, 1.0));
}

#[test]
fn divergence_aborts_with_dump() {
    struct Broken;
    impl Environment for Broken {
        fn actor_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
        fn horizon(&self) -> usize {
            1
        }
        fn rollout(&mut self, actors: &[RirlActor], rng: &mut SimRng) -> Result<Vec<Trajectory>> {
            let step = actors[0].act(&[vec![1.0]], &actors[0].initial_state(), rng)?;
            Ok(vec![Trajectory::new(0, vec![step], vec![f64::NAN])])
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng::stream(0, streams::INIT);
    let cfg_actor = ActorConfig::new(vec![ChannelSpec::new("obs", 1, 0.0)], vec![2]).with_sizes(4, 4, 4);
    let actor = RirlActor::new(cfg_actor, &mut rng).unwrap();
    let cfg = TrainConfig {
        batches: 3,
        batch_size: 2,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..TrainConfig::default()
    };
    let err = train(&cfg, &mut Broken, vec![actor]).err().unwrap();
    assert!(matches!(err, Error::Divergence { batch: 0, .. }));
    assert!(dir.path().join("divergence.txt").exists());
}

proptest! {
    #[test]
    fn returns_match_naive_double_sum(
        rewards in prop::collection::vec(-10.0f64..10.0, 0..20),
        gamma in 0.0f64..=1.0,
    ) {
        let fast = discounted_returns(&rewards, gamma);
        for t in 0..rewards.len() {
            let naive: f64 = (t..rewards.len()).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
            prop_assert!((fast[t] - naive).abs() < 1e-9);
        }
        if let Some(last) = rewards.last() {
            prop_assert_eq!(*fast.last().unwrap(), *last);
        }
    }

    #[test]
    fn annealed_lambda_is_monotone_and_capped(
        b in 0usize..100_000, target in 0.0f64..10.0, rate in 1e-5f64..1.0,
    ) {
        let now = anneal_lambda(b, target, rate);
        let next = anneal_lambda(b + 1, target, rate);
        prop_assert!(now <= next && next <= target);
    }
}
