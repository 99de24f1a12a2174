use proptest::prelude::*;

use super::*;
use crate::nn::{blockwise_relative_error, central_difference, recurrent_step};
use crate::rng::stream;

fn small_config() -> ActorConfig {
    let mut cfg = ActorConfig::new(
        vec![ChannelSpec::new("a", 2, 0.5), ChannelSpec::new("b", 1, 0.0)],
        vec![3, 2],
    )
    .with_sizes(5, 4, 6);
    cfg.decoder_discriminated = true;
    cfg
}

fn episode(actor: &RirlActor, len: usize, seed: u64) -> Vec<ActStep> {
    let mut rng = stream(seed, 9);
    let mut hidden = actor.initial_state();
    let mut steps = Vec::new();
    for t in 0..len {
        let obs = vec![vec![0.3 * t as f64, -0.2], vec![0.7]];
        let step = actor.act(&obs, &hidden, &mut rng).unwrap();
        hidden = step.hidden_after.clone();
        steps.push(step);
    }
    steps
}

/// Surrogate with the encodings recomputed pathwise and the density
/// arguments frozen at their recorded values.
fn surrogate(actor: &RirlActor, steps: &[ActStep], w: &[f64], ew: &[f64]) -> f64 {
    let hw: Vec<Vec<f64>> = w.iter().map(|&w| vec![w; actor.config().heads.len()]).collect();
    split_surrogate(actor, steps, &hw, w, ew)
}

fn split_surrogate(actor: &RirlActor, steps: &[ActStep], hw: &[Vec<f64>], w: &[f64], ew: &[f64]) -> f64 {
    let mut hidden = actor.initial_state();
    let mut total = 0.0;
    for (t, rec) in steps.iter().enumerate() {
        let mut y = Vec::new();
        let mut log_q = 0.0;
        for (k, ch) in rec.channels.iter().enumerate() {
            let enc = actor.encode_channel(k, &ch.obs, &hidden, &ch.noise).unwrap();
            let frozen: Vec<f64> = ch.y.iter().zip(&ch.obs).map(|(y, o)| y - o).collect();
            log_q += enc.head.log_density(&frozen);
            y.extend(enc.y);
        }
        let next = recurrent_step(&actor.cell, &y, &hidden).unwrap();
        let mut dec_in = y.clone();
        dec_in.extend_from_slice(&next.h);
        let logits = actor.decoder.predict(&dec_in);
        let mut off = 0;
        let mut weighted_omega = 0.0;
        let mut entropy = 0.0;
        for ((&size, &a), &hw) in actor.config().heads.iter().zip(&rec.actions).zip(&hw[t]) {
            let head = CategoricalHead::new(logits[off..off + size].to_vec());
            weighted_omega += hw * head.log_prob(a);
            entropy += head.entropy();
            off += size;
        }
        total += weighted_omega + w[t] * log_q + ew[t] * entropy;
        hidden = next;
    }
    total
}

#[test]
fn replay_reproduces_recorded_log_pi() {
    let mut rng = stream(3, 1);
    let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
    actor.init_low_noise(DEFAULT_LOW_NOISE_OFFSET);
    for step in episode(&actor, 4, 1) {
        let replay = actor.replay_log_pi(&step).unwrap();
        assert!((replay - step.log_pi).abs() < 1e-9);
        assert!((step.log_omega + step.log_q_sum() - step.log_pi).abs() < 1e-12);
    }
}

#[test]
fn episode_gradient_matches_finite_differences() {
    for seed in 0..4 {
        let mut rng = stream(seed, 1);
        let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
        // Larger noise so the log-density terms carry real gradient.
        actor.init_low_noise(-1.0);
        let steps = episode(&actor, 3, seed + 10);
        let w = [0.8, -1.3, 0.5];
        let ew = [0.1, 0.0, 0.2];
        actor.zero_grad();
        actor.accumulate_gradients(&steps, &w, &ew, 1.0);
        let analytic = actor.flat_grads();
        let base = actor.flat_values();
        let mut probe = actor.clone();
        let numeric = central_difference(
            |theta| {
                probe.set_flat_values(theta);
                surrogate(&probe, &steps, &w, &ew)
            },
            &base,
            1e-6,
        );
        let err = blockwise_relative_error(&analytic, &numeric, &actor.shapes());
        assert!(err < 1e-3, "seed {seed}: relative error {err}");
    }
}

#[test]
fn split_head_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let mut rng = stream(seed, 1);
        let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
        actor.init_low_noise(-1.0);
        let steps = episode(&actor, 3, seed + 20);
        let hw = vec![vec![0.4, -1.1], vec![1.5, 0.2], vec![-0.3, 0.9]];
        let w = [0.8, -1.3, 0.5];
        let ew = [0.1, 0.0, 0.2];
        actor.zero_grad();
        actor.accumulate_split_gradients(&steps, &hw, &w, &ew, 1.0);
        let analytic = actor.flat_grads();
        let base = actor.flat_values();
        let mut probe = actor.clone();
        let numeric = central_difference(
            |theta| {
                probe.set_flat_values(theta);
                split_surrogate(&probe, &steps, &hw, &w, &ew)
            },
            &base,
            1e-6,
        );
        let err = blockwise_relative_error(&analytic, &numeric, &actor.shapes());
        assert!(err < 1e-3, "seed {seed}: relative error {err}");
    }
}

#[test]
fn decoder_signal_reaches_encoders_through_the_encoding() {
    let mut rng = stream(5, 1);
    let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
    let steps = episode(&actor, 2, 4);
    actor.zero_grad();
    // Entropy only: no log-density term at all.
    actor.accumulate_gradients(&steps, &[0.0, 0.0], &[1.0, 1.0], 1.0);
    let enc_grad: f64 = actor.encoders[0].flat_grads().iter().map(|g| g.abs()).sum();
    assert!(enc_grad > 0.0);
}

#[test]
fn low_noise_init_sets_small_std() {
    let mut rng = stream(2, 1);
    let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
    actor.init_low_noise(-4.0);
    let hidden = actor.initial_state();
    let ch = actor.encode_channel(0, &[0.5, -0.5], &hidden, &[0.0, 0.0]).unwrap();
    for s in ch.std() {
        assert!((s.ln() + 4.0).abs() < 0.1, "std {s}");
    }
    for m in ch.mean() {
        assert!(m.abs() < 0.1);
    }
}

#[test]
fn wrong_observation_shapes_are_errors() {
    let mut rng = stream(2, 1);
    let actor = RirlActor::new(small_config(), &mut rng).unwrap();
    let hidden = actor.initial_state();
    assert!(actor.act(&[vec![0.0, 0.0]], &hidden, &mut rng).is_err());
    assert!(actor.act(&[vec![0.0], vec![0.0]], &hidden, &mut rng).is_err());
    assert!(matches!(
        actor.act(&[vec![f64::NAN, 0.0], vec![0.0]], &hidden, &mut rng),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut rng = stream(2, 1);
    let bad = ActorConfig::new(vec![ChannelSpec::new("a", 0, 0.0)], vec![2]);
    assert!(RirlActor::new(bad, &mut rng).is_err());
    let bad = ActorConfig::new(vec![ChannelSpec::new("a", 1, -1.0)], vec![2]);
    assert!(RirlActor::new(bad, &mut rng).is_err());
    let bad = ActorConfig::new(vec![ChannelSpec::new("a", 1, 0.0)], vec![]);
    assert!(RirlActor::new(bad, &mut rng).is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut rng = stream(7, 1);
    let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
    actor.init_low_noise(-4.0);
    let mut bytes = Vec::new();
    write_checkpoint(&actor, &mut bytes).unwrap();
    let (header, restored) = read_checkpoint(bytes.as_slice()).unwrap();
    assert_eq!(header.version, CHECKPOINT_VERSION);
    assert_eq!(header.lambdas, vec![0.5, 0.0]);
    assert_eq!(restored, actor);

    let mut corrupt = bytes.clone();
    corrupt[0] = b'X';
    assert!(matches!(read_checkpoint(corrupt.as_slice()), Err(Error::Checkpoint(_))));
    let truncated = &bytes[..bytes.len() - 4];
    assert!(read_checkpoint(truncated).is_err());
    let mut extra = bytes;
    extra.push(0);
    assert!(read_checkpoint(extra.as_slice()).is_err());
}

#[test]
fn discriminators_follow_channel_flags() {
    let mut rng = stream(1, 1);
    let actor = RirlActor::new(small_config(), &mut rng).unwrap();
    let discs = ActorDiscriminators::new(&actor, &[8], 1e-3, &mut rng);
    assert!(discs.channels[0].is_some());
    assert!(discs.channels[1].is_none());
    assert!(discs.decoder.is_some());
    let steps = episode(&actor, 3, 2);
    let p = attention_penalties(&steps[1], &discs);
    assert!(p.channels[0].is_some() && p.channels[1].is_none());
    let cost = p.cost(&[2.0, 5.0], 0.0);
    assert!((cost - 2.0 * p.channels[0].unwrap()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn log_pi_is_finite_and_replayable(
        a in prop::collection::vec(-5.0f64..5.0, 2),
        b in -5.0f64..5.0,
        seed in 0u64..1000,
    ) {
        let mut rng = stream(seed, 1);
        let mut actor = RirlActor::new(small_config(), &mut rng).unwrap();
        actor.init_low_noise(DEFAULT_LOW_NOISE_OFFSET);
        let step = actor.act(&[a, vec![b]], &actor.initial_state(), &mut rng).unwrap();
        prop_assert!(step.log_pi.is_finite());
        prop_assert!(step.log_omega <= 0.0);
        prop_assert!((actor.replay_log_pi(&step).unwrap() - step.log_pi).abs() < 1e-9);
        prop_assert!(step.actions[0] < 3 && step.actions[1] < 2);
    }
}
