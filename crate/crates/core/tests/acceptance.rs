//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines are always printed and the timed
//! end-to-end criterion has the machine to itself. Set
//! `ACCEPTANCE_CRITERIA=1,2,5` to run a subset.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture, fixture_demos, point_goal_config, ExpertRef};
use dsac_core::diff::{adam_step, backward, AdamConfig, AdamState, ParamSet, Tape, Tensor};
use dsac_core::envs::{absorbing_obs, augment, wrap_for_absorbing_states};
use dsac_core::harness::{imitate, RunOutput};
use dsac_core::imitation::{
    bc_loss, discriminator_loss, dsac_reward_assignment, gradient_penalty, logit_reward,
    reward_bound, sample_epsilon, Algo, ImitationWeights, RewardProvider,
};
use dsac_core::nets::{policy_log_prob, Discriminator, GaussianPolicy, NetProfile};
use dsac_core::replay::{Source, Trajectory, Transition};
use dsac_core::sac::{
    actor_loss, critic_loss, critic_loss_with_targets, normal_noise, polyak_update,
    temperature_loss, RewardedBatch, SacConfig, SacLearner, SacParams,
};

// Pinned tolerances.
const FD_STEP: f64 = 1e-5;
const FD_TYPICAL: f64 = 1e-5;
const FD_TYPICAL_FRACTION: f64 = 0.95;
const FD_WORST: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
const FD_FLOOR: f64 = 1e-8;
const FD_BUDGET_S: f64 = 60.0;
const IDENTITY_TOL: f64 = 1e-12;
const REWARD_LIMIT: f64 = 16.2;
const WRAPPER_CASES: u32 = 1000;
const FIXED_POINT_TOL: f64 = 1e-3;
const FIXED_POINT_BUDGET_S: f64 = 30.0;
const E2E_BUDGET_S: f64 = 20.0 * 60.0;
const E2E_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const E2E_MIN_REACHED: usize = 3;
const TREND_MIN_SEEDS: usize = 4;
const DENSITY_TOL: f64 = 1e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. Finite-difference gradient checks.

struct GradReport {
    entries: usize,
    typical_ok: usize,
    worst: f64,
}

/// `f(params, want_grad)` returns the loss and, when asked, its analytic
/// gradient with the same layout as `params`.
fn grad_check(
    params: &ParamSet,
    f: &dyn Fn(&ParamSet, bool) -> (f64, Option<ParamSet>),
) -> GradReport {
    let analytic = f(params, true).1.expect("gradient requested").flatten();
    let n = params.numel();
    let mut report = GradReport {
        entries: n,
        typical_ok: 0,
        worst: 0.0,
    };
    for i in 0..n {
        let mut plus = params.clone();
        *plus.entry_mut(i) += FD_STEP;
        let mut minus = params.clone();
        *minus.entry_mut(i) -= FD_STEP;
        let numeric = (f(&plus, false).0 - f(&minus, false).0) / (2.0 * FD_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
        if rel < FD_TYPICAL {
            report.typical_ok += 1;
        }
        report.worst = report.worst.max(rel);
    }
    report
}

fn random_transitions(n: usize, obs: usize, act: usize, rng: &mut ChaCha8Rng) -> Vec<Transition> {
    (0..n)
        .map(|i| Transition {
            obs: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            action: (0..act).map(|_| rng.random_range(-0.95..0.95)).collect(),
            next_obs: (0..obs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bootstrap_mask: if i % 5 == 4 { 0.0 } else { 1.0 },
            source: if i % 2 == 0 {
                Source::Demo
            } else {
                Source::Sample
            },
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let desk = NetProfile::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (obs, act, rows) = (5, 2, 8);
    let p = SacParams::new(
        obs,
        act,
        &desk.policy_hidden,
        &desk.critic_hidden,
        0.3,
        true,
        &mut rng,
    )
    .unwrap();
    let mut ts = random_transitions(rows, obs, act, &mut rng);
    ts[3].next_obs = absorbing_obs(obs - 1);
    for t in &mut ts {
        if t.obs[obs - 1] > 0.0 {
            t.obs[obs - 1] = 0.0;
        }
    }
    let refs: Vec<&Transition> = ts.iter().collect();
    let rewards: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let weights: Vec<f64> = (0..rows)
        .map(|i| if i % 2 == 0 { 1.0 } else { 0.5 })
        .collect();
    let batch = RewardedBatch::new(refs.clone(), rewards, weights).unwrap();
    let next_noise = normal_noise(rows, act, &mut rng);
    let states = batch.obs().unwrap();
    let noise = normal_noise(rows, act, &mut rng);

    let mut checks: Vec<(&str, GradReport)> = Vec::new();

    let critics = p.critics.q1.prefixed("q1/");
    let mut critics_all = critics.clone();
    critics_all.extend(p.critics.q2.prefixed("q2/")).unwrap();
    checks.push((
        "critic",
        grad_check(&critics_all, &|ps, want| {
            let mut q = p.clone();
            q.critics.q1 = ps.strip_prefix("q1/");
            q.critics.q2 = ps.strip_prefix("q2/");
            let tape = Tape::new();
            let b = q.bind(&tape);
            let loss = critic_loss(&q, &b, &batch, 0.99, &next_noise).unwrap();
            let g = want.then(|| {
                let g = tape.backward(loss).unwrap();
                let mut out = g.wrt(&b.q1).prefixed("q1/");
                out.extend(g.wrt(&b.q2).prefixed("q2/")).unwrap();
                out
            });
            (loss.item(), g)
        }),
    ));

    checks.push((
        "actor",
        grad_check(&p.policy.params, &|ps, want| {
            let mut q = p.clone();
            q.policy.params = ps.clone();
            let tape = Tape::new();
            let b = q.bind(&tape);
            let (loss, _) = actor_loss(&q, &b, &states, &noise);
            (
                loss.item(),
                want.then(|| backward(loss, &b.policy).unwrap()),
            )
        }),
    ));

    let log_probs: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..1.0)).collect();
    let mut alpha_set = ParamSet::new();
    alpha_set.insert("log_alpha", Tensor::scalar(-0.7)).unwrap();
    checks.push((
        "temperature",
        grad_check(&alpha_set, &|ps, want| {
            let tape = Tape::new();
            let b = tape.bind(ps);
            let loss = temperature_loss(b.get("log_alpha").unwrap(), &log_probs, -2.0);
            (loss.item(), want.then(|| backward(loss, &b).unwrap()))
        }),
    ));

    let disc = Discriminator::new(obs + act, &desk.disc_hidden, &mut rng).unwrap();
    let demo_x = dsac_core::imitation::disc_inputs(&refs[..rows / 2]).unwrap();
    let samp_x = dsac_core::imitation::disc_inputs(&refs[rows / 2..]).unwrap();
    let eps = sample_epsilon(rows / 2, &mut rng);
    checks.push((
        "discriminator",
        grad_check(&disc.params, &|ps, want| {
            let d = Discriminator {
                spec: disc.spec.clone(),
                params: ps.clone(),
            };
            let tape = Tape::new();
            let b = tape.bind(ps);
            let loss = discriminator_loss(&d, &b, &demo_x, &samp_x, &eps, 10.0)
                .unwrap()
                .total;
            (loss.item(), want.then(|| backward(loss, &b).unwrap()))
        }),
    ));
    checks.push((
        "gradient penalty",
        grad_check(&disc.params, &|ps, want| {
            let d = Discriminator {
                spec: disc.spec.clone(),
                params: ps.clone(),
            };
            let tape = Tape::new();
            let b = tape.bind(ps);
            let loss = gradient_penalty(&d, &b, &demo_x, &samp_x, &eps).unwrap();
            (loss.item(), want.then(|| backward(loss, &b).unwrap()))
        }),
    ));

    checks.push((
        "bc",
        grad_check(&p.policy.params, &|ps, want| {
            let pol = GaussianPolicy {
                spec: p.policy.spec.clone(),
                params: ps.clone(),
            };
            let tape = Tape::new();
            let b = tape.bind(ps);
            let loss = bc_loss(&pol, &b, &refs).unwrap();
            (loss.item(), want.then(|| backward(loss, &b).unwrap()))
        }),
    ));

    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs < FD_BUDGET_S;
    let mut parts = Vec::new();
    for (name, r) in &checks {
        let frac = r.typical_ok as f64 / r.entries as f64;
        pass &= frac >= FD_TYPICAL_FRACTION && r.worst < FD_WORST;
        parts.push(format!(
            "{name}: {:.1}% < {FD_TYPICAL:e}, worst {:.1e} ({} entries)",
            100.0 * frac,
            r.worst,
            r.entries
        ));
    }
    outcome(pass, format!("{}; {secs:.1} s", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 2. SQIL as a special case of DSAC.

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let desk = NetProfile::desk();
    let (obs, act, m) = (5, 2, 32);
    let p = SacParams::new(
        obs,
        act,
        &desk.policy_hidden,
        &desk.critic_hidden,
        0.5,
        true,
        &mut rng,
    )
    .unwrap();
    let learner = SacLearner::new(p, SacConfig::default());
    let zero = Discriminator::zeroed(obs + act, &desk.disc_hidden).unwrap();
    let unit = ImitationWeights {
        lambda_demo: 1.0,
        lambda_samp: 1.0,
    };
    let trials = 20;
    let mut identical = 0;
    for _ in 0..trials {
        let demo = random_transitions(m, obs, act, &mut rng);
        let samp = random_transitions(m, obs, act, &mut rng);
        let next_noise = normal_noise(2 * m, act, &mut rng);
        let grads = |rp: &RewardProvider| {
            let (d, s) =
                dsac_reward_assignment(rp, demo.iter().collect(), samp.iter().collect(), unit)
                    .unwrap();
            let (g1, g2) = learner.critic_gradients(&d.concat(s), &next_noise).unwrap();
            g1.flatten()
                .into_iter()
                .chain(g2.flatten())
                .map(f64::to_bits)
                .collect::<Vec<u64>>()
        };
        let sqil = grads(&RewardProvider::SqilConstant);
        let dsac = grads(&RewardProvider::Airl {
            disc: &zero,
            demo_bonus: 1.0,
        });
        if sqil == dsac {
            identical += 1;
        }
    }
    outcome(
        identical == trials,
        format!("{identical}/{trials} minibatches with bitwise-identical critic gradients"),
    )
}

// ---------------------------------------------------------------------------
// 3. Absorbing-state wrapper properties.

fn trajectory_strategy() -> impl Strategy<Value = Trajectory> {
    (1usize..40, 1usize..5, 1usize..4, any::<bool>())
        .prop_flat_map(|(n, od, ad, terminal)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0f64..5.0, od), n + 1),
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, ad), n),
                Just(terminal),
                -100.0f64..0.0,
            )
        })
        .prop_map(|(obs, actions, terminal, env_return)| Trajectory {
            obs,
            actions,
            terminal,
            truncated: !terminal,
            env_return,
            augmented: false,
        })
}

fn check_wrapper(traj: &Trajectory) -> Result<(), TestCaseError> {
    let w = wrap_for_absorbing_states(traj).unwrap();
    prop_assert_eq!(
        &wrap_for_absorbing_states(&w).unwrap(),
        &w,
        "not idempotent"
    );
    let before = traj.transitions_from(Source::Sample);
    let after = w.transitions_from(Source::Sample);
    let od = traj.obs[0].len();
    let ad = traj.actions[0].len();
    let sa = absorbing_obs(od);
    if traj.truncated {
        prop_assert_eq!(after.len(), before.len());
        for (a, b) in after.iter().zip(&before) {
            prop_assert_eq!(&a.obs, &augment(&b.obs, false));
            prop_assert_eq!(&a.action, &b.action);
            prop_assert_eq!(&a.next_obs, &augment(&b.next_obs, false));
            prop_assert_eq!(a.bootstrap_mask, b.bootstrap_mask);
        }
    } else {
        let n = before.len();
        prop_assert_eq!(after.len(), n + 1);
        for (a, b) in after[..n - 1].iter().zip(&before) {
            prop_assert_eq!(&a.obs, &augment(&b.obs, false));
            prop_assert_eq!(&a.next_obs, &augment(&b.next_obs, false));
        }
        let last_real = &after[n - 1];
        prop_assert_eq!(&last_real.obs, &augment(&before[n - 1].obs, false));
        prop_assert_eq!(&last_real.next_obs, &sa, "final next-state not rewritten");
        let tail = &after[n];
        prop_assert_eq!(&tail.obs, &sa);
        prop_assert_eq!(&tail.action, &vec![0.0; ad]);
        prop_assert_eq!(&tail.next_obs, &sa);
        prop_assert!(after.iter().all(|t| t.bootstrap_mask == 1.0));
    }
    Ok(())
}

fn criterion_3() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: WRAPPER_CASES,
        failure_persistence: None,
        ..PropConfig::default()
    });
    match runner.run(&trajectory_strategy(), |t| check_wrapper(&t)) {
        Ok(()) => outcome(true, format!("{WRAPPER_CASES} random trajectories")),
        Err(e) => outcome(false, format!("{e}")),
    }
}

// ---------------------------------------------------------------------------
// 4. Reward identities.

fn criterion_4() -> Outcome {
    let mut worst_sym: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ds: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    ds.extend([0.0, 1.0, 1e-300, 1e-9, 1.0 - 1e-9, 0.25, 0.75]);
    let mut max_abs: f64 = 0.0;
    for &d in &ds {
        worst_sym = worst_sym.max((logit_reward(d) + logit_reward(1.0 - d)).abs());
        max_abs = max_abs.max(logit_reward(d).abs());
    }
    let half = logit_reward(0.5);
    let pass = half == 0.0
        && worst_sym <= IDENTITY_TOL
        && max_abs <= REWARD_LIMIT
        && reward_bound() <= REWARD_LIMIT;
    outcome(
        pass,
        format!("R(0.5) = {half}, max |R(D) + R(1-D)| = {worst_sym:.1e}, max |R| = {max_abs:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 5. Soft-Q fixed point on a two-state, two-action MDP.

const GAMMA_5: f64 = 0.9;
const ALPHA_5: f64 = 0.1;
const NEXT: [[usize; 2]; 2] = [[0, 1], [0, 1]];
const REWARD: [[f64; 2]; 2] = [[0.0, 1.0], [-0.5, 2.0]];

fn soft_max(q: [f64; 2]) -> f64 {
    let m = q[0].max(q[1]);
    m + ALPHA_5 * (((q[0] - m) / ALPHA_5).exp() + ((q[1] - m) / ALPHA_5).exp()).ln()
}

/// Soft value iteration to machine precision.
fn soft_q_oracle() -> [[f64; 2]; 2] {
    let mut q = [[0.0; 2]; 2];
    for _ in 0..2000 {
        let v = [soft_max(q[0]), soft_max(q[1])];
        for s in 0..2 {
            for a in 0..2 {
                q[s][a] = REWARD[s][a] + GAMMA_5 * v[NEXT[s][a]];
            }
        }
    }
    q
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let oracle = soft_q_oracle();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut p = SacParams::new(2, 1, &[4], &[32], ALPHA_5, false, &mut rng).unwrap();
    let state = |s: usize| {
        if s == 0 {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        }
    };
    let action = |a: usize| vec![if a == 0 { -0.5 } else { 0.5 }];
    let ts: Vec<Transition> = (0..4)
        .map(|k| {
            let (s, a) = (k / 2, k % 2);
            Transition {
                obs: state(s),
                action: action(a),
                next_obs: state(NEXT[s][a]),
                bootstrap_mask: 1.0,
                source: Source::Sample,
            }
        })
        .collect();
    let rewards: Vec<f64> = (0..4).map(|k| REWARD[k / 2][k % 2]).collect();
    let batch = RewardedBatch::uniform(ts.iter().collect(), rewards.clone(), 1.0).unwrap();
    let all_s = Tensor::from_rows(&[state(0), state(0), state(1), state(1)]).unwrap();
    let all_a = Tensor::from_rows(&[action(0), action(1), action(0), action(1)]).unwrap();
    let mut opt1 = AdamState::new(&p.critics.q1, AdamConfig::default());
    let mut opt2 = AdamState::new(&p.critics.q2, AdamConfig::default());
    let q_table = |q1: &[f64], q2: &[f64]| -> [[f64; 2]; 2] {
        let m = |k: usize| q1[k].min(q2[k]);
        [[m(0), m(1)], [m(2), m(3)]]
    };
    let iterations = 20_000;
    for it in 0..iterations {
        let (t1, t2) = p.target_critics.eval_batch(&all_s, &all_a).unwrap();
        let tq = q_table(&t1, &t2);
        let v = [soft_max(tq[0]), soft_max(tq[1])];
        let targets: Vec<f64> = (0..4)
            .map(|k| rewards[k] + GAMMA_5 * v[NEXT[k / 2][k % 2]])
            .collect();
        let tape = Tape::new();
        let b = p.bind(&tape);
        let loss = critic_loss_with_targets(&p, &b, &batch, &targets).unwrap();
        let g = tape.backward(loss).unwrap();
        let lr = if it < iterations / 2 { 3e-3 } else { 3e-4 };
        adam_step(&mut p.critics.q1, &g.wrt(&b.q1), &mut opt1, lr).unwrap();
        adam_step(&mut p.critics.q2, &g.wrt(&b.q2), &mut opt2, lr).unwrap();
        polyak_update(&mut p.target_critics, &p.critics, 0.02).unwrap();
    }
    let (q1, q2) = p.critics.eval_batch(&all_s, &all_a).unwrap();
    let learned = q_table(&q1, &q2);
    let err = (0..4)
        .map(|k| (learned[k / 2][k % 2] - oracle[k / 2][k % 2]).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        err < FIXED_POINT_TOL && secs < FIXED_POINT_BUDGET_S,
        format!("max |Q - Q*| = {err:.2e} (Q* = {oracle:.4?}); {secs:.1} s"),
    )
}

// ---------------------------------------------------------------------------
// 6-8. End-to-end point-goal runs.

fn run_seeds(algo: Algo, wrapper: bool, stop_at: Option<f64>) -> Vec<RunOutput> {
    let demos = fixture_demos();
    E2E_SEEDS
        .iter()
        .map(|&seed| {
            let mut cfg = point_goal_config(algo, wrapper, seed);
            cfg.stop_at_return = stop_at;
            let out = imitate(&cfg, &demos).unwrap();
            let last = out.rows.last().unwrap();
            eprintln!(
                "  {algo} wrapper={wrapper} seed {seed}: last eval {:.2} at step {}",
                last.eval_mean, last.step
            );
            out
        })
        .collect()
}

fn first_reaching(out: &RunOutput, threshold: f64) -> Option<u64> {
    out.rows
        .iter()
        .find(|r| r.eval_mean >= threshold)
        .map(|r| r.step)
}

fn criterion_6(reference: &ExpertRef) -> Outcome {
    let threshold = reference.threshold();
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for algo in [Algo::Sqil, Algo::Dsac] {
        let runs = run_seeds(algo, true, Some(threshold));
        let steps: Vec<Option<u64>> = runs.iter().map(|o| first_reaching(o, threshold)).collect();
        let reached = steps.iter().flatten().count();
        let strict = runs
            .iter()
            .filter(|o| {
                o.rows
                    .iter()
                    .any(|r| r.eval_mean >= reference.expert_mean / 0.9)
            })
            .count();
        pass &= reached >= E2E_MIN_REACHED;
        parts.push(format!("{algo}: {reached}/5 reached (steps {steps:?}; {strict}/5 within 1/0.9 of expert return before stopping)"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < E2E_BUDGET_S;
    outcome(
        pass,
        format!(
            "threshold {threshold:.2} = 90% from uniform {:.2} to expert {:.2}; {}; {:.0} s",
            reference.uniform_mean,
            reference.expert_mean,
            parts.join("; "),
            secs
        ),
    )
}

fn abs_mean(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).sum::<f64>() / xs.len() as f64
}

fn criterion_7(runs: &[RunOutput]) -> Outcome {
    let mut trending = 0;
    let mut parts = Vec::new();
    for run in runs {
        let demo: Vec<f64> = run
            .iterations
            .iter()
            .filter_map(|m| m.demo_reward_mean)
            .collect();
        let k = (demo.len() / 10).max(1);
        let (early, late) = (abs_mean(&demo[..k]), abs_mean(&demo[demo.len() - k..]));
        if late < early {
            trending += 1;
        }
        parts.push(format!("{early:.4}->{late:.4}"));
    }
    outcome(
        trending >= TREND_MIN_SEEDS,
        format!(
            "{trending}/5 seeds with smaller |demo reward| in the final 10% ({})",
            parts.join(", ")
        ),
    )
}

fn final_mean(runs: &[RunOutput]) -> f64 {
    runs.iter()
        .map(|o| o.rows.last().unwrap().eval_mean)
        .sum::<f64>()
        / runs.len() as f64
}

fn criterion_8(with: &[RunOutput], without: &[RunOutput]) -> Outcome {
    let (a, b) = (final_mean(with), final_mean(without));
    outcome(
        a >= b,
        format!("mean final score with wrapper {a:.2}, without {b:.2}"),
    )
}

// ---------------------------------------------------------------------------
// 9. Byte-identical metrics from the command line.

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.txt");
    std::fs::write(
        &config,
        "env = point_goal_v1\nalgo = dsac\nprofile = small\ntotal_steps = 3000\nwarm_up = 1000\n\
         eval_interval = 1000\neval_episodes = 3\nminibatch = 32\nseed = 3\n",
    )
    .unwrap();
    let run = |name: &str| -> Vec<u8> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dsac"))
            .args(["imitate", "--config"])
            .arg(&config)
            .arg("--demos")
            .arg(fixture("point_goal_demos.json"))
            .arg("--out")
            .arg(&out)
            .env("IL_LOG_LEVEL", "error")
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "imitate exited with {status}");
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
    outcome(
        a == b,
        format!("{} bytes, {rows} rows, identical = {}", a.len(), a == b),
    )
}

// ---------------------------------------------------------------------------
// 10. Squashed Gaussian density normalization.

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    step(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        depth,
    )
}

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for mu in [-1.5, -0.5, 0.0, 0.7, 1.5] {
        for log_std in [-2.0, -1.0, -0.5, 0.0] {
            let mut policy = GaussianPolicy::zeroed(1, 1, &[]).unwrap();
            let bias = policy.params.get_mut("l0.b").unwrap();
            bias[0] = mu;
            bias[1] = log_std;
            let density = |a: f64| policy_log_prob(&policy, &[0.0], &[a]).unwrap().exp();
            let panels = 400;
            let edge = 1.0 - 1e-12;
            let mass: f64 = (0..panels)
                .map(|k| {
                    let lo = -edge + 2.0 * edge * k as f64 / panels as f64;
                    let hi = -edge + 2.0 * edge * (k + 1) as f64 / panels as f64;
                    adaptive_simpson(&density, lo, hi, 1e-12, 30)
                })
                .sum();
            worst = worst.max((mass - 1.0).abs());
            cases += 1;
        }
    }
    outcome(
        worst < DENSITY_TOL,
        format!("{cases} (mean, log std) pairs, max |mass - 1| = {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let selected: BTreeSet<u32> = match std::env::var("ACCEPTANCE_CRITERIA") {
        Ok(v) if !v.trim().is_empty() => v
            .split(',')
            .map(|s| s.trim().parse().expect("criterion number"))
            .collect(),
        _ => (1..=10).collect(),
    };
    let reference = ExpertRef::load();
    let mut hard_failures = Vec::new();
    let mut report = |n: u32, o: Outcome, advisory: bool| {
        let verdict = match (o.pass, advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FLAGGED REGRESSION",
        };
        println!("criterion {n:>2}: {verdict} - {}", o.detail);
        if !o.pass && !advisory {
            hard_failures.push(n);
        }
    };
    for n in [1, 2, 3, 4, 5] {
        if selected.contains(&n) {
            let o = match n {
                1 => criterion_1(),
                2 => criterion_2(),
                3 => criterion_3(),
                4 => criterion_4(),
                _ => criterion_5(),
            };
            report(n, o, false);
        }
    }
    if selected.contains(&6) {
        report(6, criterion_6(&reference), false);
    }
    if selected.contains(&7) || selected.contains(&8) {
        let with = run_seeds(Algo::Dsac, true, None);
        if selected.contains(&7) {
            report(7, criterion_7(&with), false);
        }
        if selected.contains(&8) {
            let without = run_seeds(Algo::Dsac, false, None);
            report(8, criterion_8(&with, &without), true);
        }
    }
    if selected.contains(&9) {
        report(9, criterion_9(), false);
    }
    if selected.contains(&10) {
        report(10, criterion_10(), false);
    }
    if !hard_failures.is_empty() {
        println!("acceptance: failed criteria {hard_failures:?}");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
