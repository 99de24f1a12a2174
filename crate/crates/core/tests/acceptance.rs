//! Primary acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Criteria share a lock so wall-clock limits are measured without other
//! tests competing for the CPU, and share trained runs through caches.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rirl::contract::{
    fit_mirrlees, learn_schedule, mirrlees_curve, zero_pay_principal_utility, Beta, ContractConfig, Regularizer,
};
use rirl::experiments::{apply_contract_profile, apply_team_profile, brute_force_config, Profile};
use rirl::metrics::{bootstrap_lower_bound, early_attention_excess, spearman, summarize_team_run, WelfareSummary};
use rirl::mi::{make_factorized, MiDiscriminator, PairBatch};
use rirl::nn::{blockwise_relative_error, central_difference, CategoricalHead, GaussianHead, LstmCell, LstmState, Mlp, Parameterized};
use rirl::team::{brute_force_wages, learn_team, TeamRunConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: &str, pass: bool, detail: String) {
    // Written to the raw handle so the line survives the harness's output capture.
    let line = format!("{} {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{id}: {detail}");
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0)).sqrt()
}

// ---------------------------------------------------------------------------
// MI estimator oracle

fn train_and_estimate(sample: &dyn Fn(&mut ChaCha8Rng) -> (f64, f64), seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disc = MiDiscriminator::new(1, 1, &[64, 64], 2e-3, &mut rng);
    let batch = |rng: &mut ChaCha8Rng, n: usize| {
        let (x, c): (Vec<_>, Vec<_>) = (0..n).map(|_| sample(rng)).map(|(x, c)| (vec![x], vec![c])).unzip();
        PairBatch::joint(x, c)
    };
    for _ in 0..1500 {
        let joint = batch(&mut rng, 256);
        let fact = make_factorized(&joint, &mut rng).unwrap();
        disc.train_step(&joint, &fact).unwrap();
    }
    disc.batch_mean_mi(&batch(&mut rng, 20_000))
}

#[test]
fn mi_estimator_oracle() {
    let _g = serial();
    let start = Instant::now();
    let coin = |r: &mut ChaCha8Rng| {
        let b = f64::from(u8::from(r.random::<bool>()));
        (b, b)
    };
    let independent = |r: &mut ChaCha8Rng| (r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal));
    let rho = 0.9;
    let gaussian = move |r: &mut ChaCha8Rng| {
        let x: f64 = r.sample(StandardNormal);
        let e: f64 = r.sample(StandardNormal);
        (x, rho * x + (1.0f64 - rho * rho).sqrt() * e)
    };
    let i_coin = train_and_estimate(&coin, 1);
    let i_indep = train_and_estimate(&independent, 2);
    let i_gauss = train_and_estimate(&gaussian, 3);
    let exact_gauss = -0.5 * (1.0f64 - rho * rho).ln();
    let elapsed = start.elapsed();
    let pass = (i_coin - std::f64::consts::LN_2).abs() <= 0.05
        && i_indep.abs() <= 0.05
        && (i_gauss - exact_gauss).abs() <= 0.10
        && elapsed < Duration::from_secs(120);
    report(
        "mi-oracle",
        pass,
        format!(
            "coin {i_coin:.3} (ln2 ± 0.05), independent {i_indep:.3} (|·| ≤ 0.05), gaussian {i_gauss:.3} ({exact_gauss:.3} ± 0.10), {:.1}s (< 120s)",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// Gradient checks

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Encoder MLP feeding a Gaussian head; loss `a·y + b·log q(y₀)` with the
/// sample `y = μ + σε` pathwise and `y₀` frozen.
fn encoder_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (din, dout) = (3, 2);
    let mut net = Mlp::new(&[din, 6, 2 * dout], &mut rng);
    let x = rand_vec(&mut rng, din);
    let noise = rand_vec(&mut rng, dout);
    let a = rand_vec(&mut rng, dout);
    let b = rng.random_range(-1.0..1.0);
    let head_of = |net: &Mlp| {
        let out = net.predict(&x);
        GaussianHead::new(out[..dout].to_vec(), out[dout..].to_vec()).unwrap()
    };
    let frozen = head_of(&net).sample(&noise).unwrap().0;
    let (out, cache) = net.forward(&x).unwrap();
    let head = GaussianHead::new(out[..dout].to_vec(), out[dout..].to_vec()).unwrap();
    let (dm, dl) = head.backward(&noise, &a, b);
    net.zero_grad();
    net.backward(&cache, &[dm, dl].concat());
    let analytic = net.flat_grads();
    let mut probe = net.clone();
    let numeric = central_difference(
        |p| {
            probe.set_flat_values(p);
            let h = head_of(&probe);
            let y = h.sample(&noise).unwrap().0;
            y.iter().zip(&a).map(|(y, a)| y * a).sum::<f64>() + b * h.log_density(&frozen)
        },
        &net.flat_values(),
        1e-6,
    );
    blockwise_relative_error(&analytic, &numeric, &net.shapes())
}

/// Three LSTM steps; loss is a weighted sum of the final hidden and cell state.
fn recurrent_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (din, hs) = (3, 4);
    let mut cell = LstmCell::new(din, hs, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, din)).collect();
    let wh = rand_vec(&mut rng, hs);
    let wc = rand_vec(&mut rng, hs);
    let loss = |cell: &LstmCell| {
        let mut s = LstmState::zeros(hs);
        for x in &xs {
            s = cell.step(x, &s).unwrap().0;
        }
        s.h.iter().zip(&wh).map(|(h, w)| h * w).sum::<f64>() + s.c.iter().zip(&wc).map(|(c, w)| c * w).sum::<f64>()
    };
    let mut s = LstmState::zeros(hs);
    let mut caches = Vec::new();
    for x in &xs {
        let (next, cache) = cell.step(x, &s).unwrap();
        caches.push(cache);
        s = next;
    }
    cell.zero_grad();
    let (mut dh, mut dc) = (wh.clone(), wc.clone());
    for cache in caches.iter().rev() {
        let (_, dhp, dcp) = cell.backward(cache, &dh, &dc);
        dh = dhp;
        dc = dcp;
    }
    let analytic = cell.flat_grads();
    let mut probe = cell.clone();
    let numeric = central_difference(
        |p| {
            probe.set_flat_values(p);
            loss(&probe)
        },
        &cell.flat_values(),
        1e-6,
    );
    blockwise_relative_error(&analytic, &numeric, &cell.shapes())
}

/// Decoder MLP into two categorical heads; loss `Σ w_j log ω_j(a_j) + e·H`.
fn decoder_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = [4usize, 3];
    let mut net = Mlp::new(&[5, 8, heads.iter().sum()], &mut rng);
    let x = rand_vec(&mut rng, 5);
    let actions: Vec<usize> = heads.iter().map(|&n| rng.random_range(0..n)).collect();
    let w = rand_vec(&mut rng, 2);
    let e = rng.random_range(0.0..1.0);
    let loss = |net: &Mlp| {
        let logits = net.predict(&x);
        let mut off = 0;
        let mut total = 0.0;
        for (j, &n) in heads.iter().enumerate() {
            let h = CategoricalHead::new(logits[off..off + n].to_vec());
            total += w[j] * h.log_prob(actions[j]) + e * h.entropy();
            off += n;
        }
        total
    };
    let (logits, cache) = net.forward(&x).unwrap();
    let mut d = Vec::new();
    let mut off = 0;
    for (j, &n) in heads.iter().enumerate() {
        let h = CategoricalHead::new(logits[off..off + n].to_vec());
        let g = h.log_prob_grad(actions[j]);
        let ge = h.entropy_grad();
        d.extend(g.iter().zip(&ge).map(|(g, ge)| w[j] * g + e * ge));
        off += n;
    }
    net.zero_grad();
    net.backward(&cache, &d);
    let analytic = net.flat_grads();
    let mut probe = net.clone();
    let numeric = central_difference(
        |p| {
            probe.set_flat_values(p);
            loss(&probe)
        },
        &net.flat_values(),
        1e-6,
    );
    blockwise_relative_error(&analytic, &numeric, &net.shapes())
}

/// Discriminator cross-entropy over a joint and a factorized batch.
fn discriminator_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disc = MiDiscriminator::new(2, 3, &[8, 8], 1e-3, &mut rng);
    let joint = PairBatch::joint((0..6).map(|_| rand_vec(&mut rng, 2)).collect(), (0..6).map(|_| rand_vec(&mut rng, 3)).collect());
    let fact = make_factorized(&joint, &mut rng).unwrap();
    disc.accumulate_loss_gradient(&joint, &fact).unwrap();
    let analytic = disc.network().flat_grads();
    let base = disc.network().flat_values();
    let shapes = disc.network().shapes();
    let mut probe = disc.clone();
    let numeric = central_difference(
        |p| {
            probe.network_mut().set_flat_values(p);
            probe.loss(&joint, &fact)
        },
        &base,
        1e-6,
    );
    blockwise_relative_error(&analytic, &numeric, &shapes)
}

#[test]
fn gradient_suite() {
    let _g = serial();
    let start = Instant::now();
    let modules: [(&str, fn(u64) -> f64); 4] = [
        ("encoder", encoder_error),
        ("recurrent", recurrent_error),
        ("decoder", decoder_error),
        ("discriminator", discriminator_error),
    ];
    let mut worst = BTreeMap::new();
    for (name, check) in modules {
        let w = (0..10).map(|s| check(100 + s)).fold(0.0f64, f64::max);
        worst.insert(name, w);
    }
    let elapsed = start.elapsed();
    let pass = worst.values().all(|&e| e < 1e-3) && elapsed < Duration::from_secs(60);
    let detail: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.2e}")).collect();
    report(
        "gradients",
        pass,
        format!("max relative error over 10 instances: {} (< 1e-3), {:.1}s (< 60s)", detail.join(", "), elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Brute-force equivalence

#[test]
fn brute_force_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let base = brute_force_config(0);
    let step = base.team.wage_step;
    let optimum = brute_force_wages(&base.team);
    let mut pass = true;
    let mut detail = Vec::new();
    for seed in 0..3 {
        let out = learn_team(&brute_force_config(seed)).unwrap();
        let mut modes = Vec::new();
        for &(nu, best) in &optimum {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for r in out.rows.iter().filter(|r| r.ability == nu) {
                *counts.entry((r.wage / step).round() as i64).or_default() += 1;
            }
            let mode = counts.iter().max_by_key(|(_, &c)| c).map(|(&k, _)| k as f64 * step).unwrap_or(f64::NAN);
            pass &= (mode - best).abs() <= step + 1e-9;
            modes.push(mode);
        }
        detail.push(format!("seed {seed} modes {modes:?}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(30 * 60);
    let best: Vec<f64> = optimum.iter().map(|p| p.1).collect();
    report(
        "brute-force",
        pass,
        format!("optimum {best:?}; {}; {:.0}s (< 1800s)", detail.join("; "), elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------------------
// Contract runs shared by the Mirrlees, flattening and lower-bound criteria

const LAMBDAS: [f64; 3] = [0.0, 1.0, 3.0];
const BETAS: [f64; 3] = [3.0, 5.0, f64::INFINITY];

#[derive(Debug, Clone)]
struct ContractRun {
    regularizer: Regularizer,
    lambda: f64,
    beta: f64,
    u_p: f64,
    zero_pay: f64,
    range: f64,
    mi: f64,
    r2: f64,
}

fn contract_run(regularizer: Regularizer, lambda: f64, beta: f64, seed: u64) -> ContractRun {
    let mut cfg = ContractConfig {
        regularizer,
        lambda,
        seed,
        ..ContractConfig::default()
    };
    cfg.agent.beta = Beta(beta);
    apply_contract_profile(&mut cfg, Profile::Desk);
    let out = learn_schedule(&cfg).unwrap();
    ContractRun {
        regularizer,
        lambda,
        beta,
        u_p: out.evaluation.principal_utility,
        zero_pay: zero_pay_principal_utility(&cfg).unwrap(),
        range: out.schedule.range(),
        mi: out.evaluation.mi_estimate,
        r2: out.fit.r2,
    }
}

fn mi_runs() -> &'static [ContractRun] {
    static RUNS: OnceLock<Vec<ContractRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut v = Vec::new();
        for &beta in &BETAS {
            for &lambda in &LAMBDAS {
                for seed in 0..5 {
                    v.push(contract_run(Regularizer::Mi, lambda, beta, seed));
                }
            }
        }
        v
    })
}

fn entropy_runs() -> &'static [ContractRun] {
    static RUNS: OnceLock<Vec<ContractRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut v = Vec::new();
        for &lambda in &LAMBDAS {
            for seed in 0..5 {
                v.push(contract_run(Regularizer::Entropy, lambda, f64::INFINITY, seed));
            }
        }
        v
    })
}

#[test]
fn mirrlees_fit() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z: Vec<f64> = (-5..=10).map(f64::from).collect();
    let mut worst_param = 0.0f64;
    for _ in 0..5 {
        let a = rng.random_range(0.5..3.0);
        let rho = rng.random_range(1.0..4.0);
        let c = rng.random_range(0.5..2.0);
        // Kink inside the grid with several points on each side.
        let kink = rng.random_range(-2.0..5.0);
        let b = c - a * kink;
        let mu: Vec<f64> = z.iter().map(|&z| mirrlees_curve(z, a, b, c, rho)).collect();
        let fit = fit_mirrlees(&z, &mu).unwrap();
        for (got, want) in [(fit.a, a), (fit.b, b), (fit.c, c), (fit.rho, rho)] {
            worst_param = worst_param.max((got - want).abs());
        }
    }
    let runs: Vec<&ContractRun> = mi_runs().iter().filter(|r| r.lambda == 0.0).collect();
    let min_r2 = runs.iter().map(|r| r.r2).fold(f64::INFINITY, f64::min);
    let per_beta: Vec<String> = BETAS
        .iter()
        .map(|&b| {
            let r2: Vec<f64> = runs.iter().filter(|r| r.beta == b).map(|r| r.r2).collect();
            format!("β={} min r² {:.3}", Beta(b).label(), r2.iter().copied().fold(f64::INFINITY, f64::min))
        })
        .collect();
    report(
        "mirrlees-fit",
        runs.len() == 15 && min_r2 >= 0.95 && worst_param < 1e-3,
        format!("{} (≥ 0.95); synthetic max parameter error {worst_param:.1e} (< 1e-3)", per_beta.join(", ")),
    );
}

#[test]
fn flattening_trend() {
    let _g = serial();
    let runs = mi_runs();
    let by_lambda = |f: fn(&ContractRun) -> f64| -> Vec<f64> {
        LAMBDAS.iter().map(|&l| mean(&runs.iter().filter(|r| r.lambda == l).map(f).collect::<Vec<_>>())).collect()
    };
    let range = by_lambda(|r| r.range);
    let mi = by_lambda(|r| r.mi);
    let strictly_decreasing = range.windows(2).all(|p| p[1] < p[0]);
    let nonincreasing = mi.windows(2).all(|p| p[1] <= p[0]);
    let per_beta: Vec<String> = BETAS
        .iter()
        .map(|&b| {
            let r: Vec<String> = LAMBDAS
                .iter()
                .map(|&l| format!("{:.2}", mean(&runs.iter().filter(|r| r.beta == b && r.lambda == l).map(|r| r.range).collect::<Vec<_>>())))
                .collect();
            format!("β={} [{}]", Beta(b).label(), r.join(", "))
        })
        .collect();
    report(
        "flattening",
        strictly_decreasing && nonincreasing,
        format!(
            "mean range over λ {LAMBDAS:?}: {range:.3?} (strictly decreasing); mean Ĩ(w;z): {mi:.3?} (nonincreasing); by β {}",
            per_beta.join(" ")
        ),
    );
}

#[test]
fn lower_bound_property() {
    let _g = serial();
    let mut pass = true;
    let mut detail = Vec::new();
    for &beta in &BETAS {
        for &lambda in &LAMBDAS {
            let group: Vec<&ContractRun> = mi_runs().iter().filter(|r| r.beta == beta && r.lambda == lambda).collect();
            let u: Vec<f64> = group.iter().map(|r| r.u_p).collect();
            // Seed-to-seed spread of the learned utility is the noise scale.
            let bound = group[0].zero_pay - 2.0 * std_dev(&u);
            let ok = mean(&u) >= bound;
            pass &= ok;
            if !ok || lambda == 3.0 {
                detail.push(format!("mi β={} λ={lambda}: u_p {:.3} vs bound {:.3}", Beta(beta).label(), mean(&u), bound));
            }
        }
    }
    let top = *LAMBDAS.last().unwrap();
    let ent: Vec<&ContractRun> = entropy_runs().iter().filter(|r| r.lambda == top).collect();
    let ent_u = mean(&ent.iter().map(|r| r.u_p).collect::<Vec<_>>());
    let zero = ent[0].zero_pay;
    pass &= ent_u < zero;
    let ent_curve: Vec<String> = LAMBDAS
        .iter()
        .map(|&l| format!("{:.3}", mean(&entropy_runs().iter().filter(|r| r.lambda == l).map(|r| r.u_p).collect::<Vec<_>>())))
        .collect();
    debug_assert!(entropy_runs().iter().all(|r| r.regularizer == Regularizer::Entropy));
    report(
        "lower-bound",
        pass,
        format!("{}; entropy β=inf u_p over λ [{}] vs zero-pay {zero:.3} (must fall below at λ={top})", detail.join("; "), ent_curve.join(", ")),
    );
}

// ---------------------------------------------------------------------------
// Team runs shared by the sequential-setting criteria

fn team_summary(lambda_z: f64, lambda_e: f64, horizon: usize, seed: u64) -> WelfareSummary {
    let mut cfg = TeamRunConfig::default();
    cfg.team.lambda_z = lambda_z;
    cfg.team.lambda_e = lambda_e;
    cfg.team.horizon = horizon;
    cfg.train.seed = seed;
    apply_team_profile(&mut cfg, Profile::Desk);
    summarize_team_run(&learn_team(&cfg).unwrap().rows).unwrap()
}

type TeamKey = (u64, u64, usize);

fn team_cache() -> &'static Mutex<BTreeMap<TeamKey, &'static [WelfareSummary]>> {
    static CACHE: OnceLock<Mutex<BTreeMap<TeamKey, &'static [WelfareSummary]>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Twenty desk seeds at one `(λ^z, λ^e, T)` point.
fn team_point(lambda_z: f64, lambda_e: f64, horizon: usize) -> &'static [WelfareSummary] {
    let key = (lambda_z.to_bits(), lambda_e.to_bits(), horizon);
    if let Some(v) = team_cache().lock().unwrap().get(&key) {
        return v;
    }
    let runs: Vec<WelfareSummary> = (0..20).map(|s| team_summary(lambda_z, lambda_e, horizon, s)).collect();
    let leaked: &'static [WelfareSummary] = Box::leak(runs.into_boxed_slice());
    team_cache().lock().unwrap().insert(key, leaked);
    leaked
}

fn point_mean(runs: &[WelfareSummary], f: fn(&WelfareSummary) -> f64) -> f64 {
    mean(&runs.iter().map(f).collect::<Vec<_>>())
}

#[test]
fn attention_time_course() {
    let _g = serial();
    let lz = 3.0;
    let mut pass = true;
    let mut detail = Vec::new();
    let mut initial = Vec::new();
    for horizon in [5, 10] {
        let runs = team_point(lz, 0.0, horizon);
        let refs: Vec<&WelfareSummary> = runs.iter().collect();
        let excess = early_attention_excess(&refs);
        let lower = bootstrap_lower_bound(&excess, 0.95);
        let first = mean(&runs.iter().filter_map(|r| r.mi_z[0]).collect::<Vec<_>>());
        initial.push(first);
        pass &= excess.len() == runs.len() && lower > 0.0;
        detail.push(format!(
            "T={horizon}: Ĩ^z_0 {first:.3}, mean excess over last half {:.3}, 95% one-sided lower bound {lower:.3} (> 0)",
            mean(&excess)
        ));
    }
    pass &= initial[1] > initial[0];
    report("attention-time-course", pass, format!("λ^z={lz}; {}; initial T=10 > T=5", detail.join("; ")));
}

#[test]
fn welfare_opposition() {
    let _g = serial();
    let lz = [0.0, 3.0, 6.0];
    let up: Vec<f64> = lz.iter().map(|&l| point_mean(team_point(l, 0.0, 5), |r| r.mean_u_p)).collect();
    let ua: Vec<f64> = lz.iter().map(|&l| point_mean(team_point(l, 0.0, 5), |r| r.mean_u_a)).collect();
    let (rp, ra) = (spearman(&lz, &up), spearman(&lz, &ua));
    report(
        "welfare-opposition",
        rp < 0.0 && ra > 0.0,
        format!("λ^z {lz:?}: mean u_p {up:.3?} (rank corr {rp:.2} < 0), mean u_a {ua:.3?} (rank corr {ra:.2} > 0)"),
    );
}

#[test]
fn wage_gap_closure() {
    let _g = serial();
    let lz = [0.0, 3.0, 6.0];
    let spread: Vec<f64> = lz.iter().map(|&l| point_mean(team_point(l, 0.0, 5), |r| r.wage_spread())).collect();
    let wage: Vec<f64> = lz.iter().map(|&l| point_mean(team_point(l, 0.0, 5), |r| r.mean_wage)).collect();
    let eq: Vec<f64> = lz.iter().map(|&l| point_mean(team_point(l, 0.0, 5), |r| r.equality)).collect();
    let req = spearman(&lz, &eq);
    report(
        "wage-gap",
        spread[2] < spread[0] && wage[2] > wage[0] && req > 0.0,
        format!(
            "λ^z {lz:?}: top-bottom wage spread {spread:.3?} (λ=6 < λ=0), mean wage {wage:.3?} (λ=6 > λ=0), equality {eq:.3?} (rank corr {req:.2} > 0)"
        ),
    );
}

#[test]
fn effort_dilemma() {
    let _g = serial();
    let le = [0.0, 2.0, 6.0];
    let effort: Vec<f64> = le.iter().map(|&l| point_mean(team_point(0.0, l, 5), |r| r.mean_effort)).collect();
    let wage: Vec<f64> = le.iter().map(|&l| point_mean(team_point(0.0, l, 5), |r| r.mean_wage)).collect();
    let ua: Vec<f64> = le.iter().map(|&l| point_mean(team_point(0.0, l, 5), |r| r.mean_u_a)).collect();
    let step = TeamRunConfig::default().team.wage_step;
    let max_change = wage.iter().map(|w| (w - wage[0]).abs()).fold(0.0, f64::max);
    let (re, ru) = (spearman(&le, &effort), spearman(&le, &ua));
    report(
        "effort-dilemma",
        re > 0.0 && max_change <= step && ru < 0.0,
        format!(
            "λ^e {le:?}: mean effort {effort:.3?} (rank corr {re:.2} > 0), mean wage {wage:.3?} (max change {max_change:.3} ≤ {step}), mean u_a {ua:.3?} (rank corr {ru:.2} < 0)"
        ),
    );
}
