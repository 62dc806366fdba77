//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria 3-7 are exact checks; a failure there makes this target fail.
//! Criteria 1 and 2 are end-to-end training runs on the maze through the
//! command line (about an hour on one core) and are reported as measured.
//! `ACCEPTANCE_QUICK=1` skips those two.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skill_guidance::approx::{ExpertClassifier, GmmPolicy, LinearProjection, SkillDiscriminator};
use skill_guidance::buffer::{Batch, Transition};
use skill_guidance::dataset::Standardizer;
use skill_guidance::env::{Environment, ExternalEnv};
use skill_guidance::eval::{csv::SUMMARY_HEADER, displacement_stats, FiveNumber};
use skill_guidance::nn::{polyak_update, Mat};
use skill_guidance::sac::{td_target, SacTrainer};
use skill_guidance::skill::{intrinsic_reward, mi_lower_bound_check, SkillPrior};
use skill_guidance::Config;

struct Line {
    id: usize,
    pass: Option<bool>,
    detail: String,
}

fn main() {
    let quick = std::env::var_os("ACCEPTANCE_QUICK").is_some_and(|v| v != "0");
    let mut lines = Vec::new();

    let (c1, c2) = if quick {
        let skip = |id| Line {
            id,
            pass: None,
            detail: "skipped (ACCEPTANCE_QUICK)".into(),
        };
        (skip(1), skip(2))
    } else {
        end_to_end()
    };
    lines.push(c1);
    lines.push(c2);
    lines.push(criterion_3());
    lines.push(criterion_4());
    lines.push(criterion_5());
    lines.push(criterion_6());
    lines.push(criterion_7());
    let passed_1_to_7 = lines.iter().filter(|l| l.pass == Some(true)).count();
    lines.push(criterion_8(passed_1_to_7));

    lines.sort_by_key(|l| l.id);
    for l in &lines {
        let status = match l.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("criterion {}: {status} - {}", l.id, l.detail);
    }
    let exact_failed = lines.iter().any(|l| (3..=7).contains(&l.id) && l.pass != Some(true));
    if exact_failed {
        std::process::exit(1);
    }
}

fn run_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn cli(root: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(common::BIN)
        .args(args)
        .env("SKILL_GUIDANCE_OUT", root)
        .current_dir(root)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

/// Criteria 1 and 2: default config, five seeds through train-ref,
/// collect and fit-encoder; then skills on the seed-0 projection.
fn end_to_end() -> (Line, Line) {
    let root = run_dir();
    let clock = Instant::now();
    let mut accuracies = Vec::new();
    let mut failure = None;
    for seed in 0..5u64 {
        let s = seed.to_string();
        let (r, d, p) = (format!("ref{seed}"), format!("data{seed}.bin"), format!("proj{seed}.txt"));
        let step = cli(&root, &["train-ref", "--seed", &s, "--steps", "100000", "--out", &r])
            .and_then(|_| cli(&root, &["collect", "--seed", &s, "--checkpoint", &r, "--out", &d]))
            .and_then(|_| cli(&root, &["fit-encoder", "--seed", &s, "--embedding-dim", "1", "--dataset", &d, "--out", &p]));
        if let Err(e) = step {
            failure = Some(e);
            break;
        }
        let log = fs::read_to_string(root.join("encoder_accuracy.csv")).unwrap();
        let last = log.lines().last().unwrap();
        accuracies.push(last.rsplit(',').next().unwrap().parse::<f64>().unwrap());
    }
    let c1_time = clock.elapsed().as_secs_f64();
    let c1 = match failure {
        Some(e) => Line {
            id: 1,
            pass: Some(false),
            detail: format!("pipeline error: {e}"),
        },
        None => {
            let good = accuracies.iter().filter(|&&a| a >= 0.95).count();
            Line {
                id: 1,
                pass: Some(good >= 4),
                detail: format!(
                    "encoder held-out accuracy per seed {accuracies:?}, {good}/5 >= 0.95 (need 4), {:.0} s",
                    c1_time
                ),
            }
        }
    };

    let clock = Instant::now();
    let c2 = match cli(
        &root,
        &["train-skills", "--seed", "0", "--skills", "10", "--steps", "100000", "--projection", "proj0.txt", "--out", "skills"],
    )
    .and_then(|_| cli(&root, &["eval", "--checkpoint", "skills", "--stochastic", "--dataset", "data0.bin", "--out", "eval"]))
    {
        Err(e) => Line {
            id: 2,
            pass: Some(false),
            detail: format!("pipeline error: {e}"),
        },
        Ok(_) => {
            let text = fs::read_to_string(root.join("eval/separation.csv")).unwrap();
            let fields: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
            let (acc, span) = (fields[0], fields[1]);
            Line {
                id: 2,
                pass: Some(acc >= 0.5 && span >= 0.5),
                detail: format!(
                    "K=10, 100k steps: discriminator held-out accuracy {acc:.3} (need 0.50), span {span:.3} of expert range (need 0.50), {:.0} s",
                    clock.elapsed().as_secs_f64()
                ),
            }
        }
    };
    (c1, c2)
}

/// Dyadic values: every product and sum below is exact in f64.
fn dyadic(rng: &mut ChaCha8Rng, scale: i32) -> f64 {
    rng.gen_range(-64i32..=64) as f64 / 2f64.powi(scale)
}

fn criterion_3() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prior = SkillPrior::new(10).unwrap();
    let mut checked = 0;
    let mut mismatches = 0;
    for trial in 0..1000 {
        let disc = if trial % 100 == 0 || trial == 0 {
            Some(SkillDiscriminator::new(1, 10, 32, &mut rng))
        } else {
            None
        };
        let disc = disc.unwrap_or_else(|| SkillDiscriminator::new(1, 10, 8, &mut rng));
        // chi = (a, b, c), standardization with power-of-two scales
        let (a, b, c) = (dyadic(&mut rng, 4), dyadic(&mut rng, 4), dyadic(&mut rng, 4));
        let std: Vec<f64> = (0..3).map(|_| 2f64.powi(rng.gen_range(-2..3))).collect();
        let mean: Vec<f64> = (0..3).map(|_| dyadic(&mut rng, 5)).collect();
        let proj = LinearProjection::new(
            Mat::from_vec(1, 3, vec![a, b, c]),
            Standardizer {
                mean,
                std: std.clone(),
            },
        )
        .unwrap();
        let s: Vec<f64> = (0..3).map(|_| dyadic(&mut rng, 6)).collect();
        // null space of chi in standardized units: (b, -a, 0) and (0, c, -b)
        let (t1, t2) = (rng.gen_range(-8i32..=8) as f64, rng.gen_range(-8i32..=8) as f64);
        let n_std = [t1 * b, -t1 * a + t2 * c, -t2 * b];
        let moved: Vec<f64> = (0..3).map(|i| s[i] + n_std[i] * std[i]).collect();
        let z = rng.gen_range(0..10);
        let r0 = intrinsic_reward(&disc, &proj, &s, z, &prior).unwrap();
        let r1 = intrinsic_reward(&disc, &proj, &moved, z, &prior).unwrap();
        checked += 1;
        if r0.to_bits() != r1.to_bits() {
            mismatches += 1;
        }

        // arbitrary real perturbation along a zero column of chi
        let zero_col = LinearProjection::new(Mat::from_vec(1, 3, vec![a, b, 0.0]), Standardizer::identity(3)).unwrap();
        let real: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut pushed = real.clone();
        pushed[2] += rng.gen_range(-1e3..1e3);
        let r0 = intrinsic_reward(&disc, &zero_col, &real, z, &prior).unwrap();
        let r1 = intrinsic_reward(&disc, &zero_col, &pushed, z, &prior).unwrap();
        checked += 1;
        if r0.to_bits() != r1.to_bits() {
            mismatches += 1;
        }
    }
    Line {
        id: 3,
        pass: Some(mismatches == 0),
        detail: format!("intrinsic reward under null-space perturbations: {mismatches} of {checked} pairs differ in any bit"),
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn criterion_4() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let states = rng.gen_range(2..8);
        let skills = rng.gen_range(2..6);
        let p_s = random_simplex(&mut rng, states);
        let table = |rng: &mut ChaCha8Rng| {
            let rows: Vec<Vec<f64>> = (0..states).map(|_| random_simplex(rng, skills)).collect();
            Mat::from_rows(&rows)
        };
        let posterior = table(&mut rng);
        let variational = table(&mut rng);
        let (exact, bound) = mi_lower_bound_check(&p_s, &posterior, &variational).unwrap();
        if bound > exact {
            violations += 1;
        }
        min_gap = min_gap.min(exact - bound);
    }
    Line {
        id: 4,
        pass: Some(violations == 0),
        detail: format!("E_p[log q] <= E_p[log p] on 100 random tables: {violations} violations, smallest gap {min_gap:.3e}"),
    }
}

const FD_STEP: f64 = 1e-5;

/// Largest coordinate-wise relative error between `analytic` and central
/// differences of `f` over `params`. Coordinates where both are below
/// `floor` in magnitude are compared absolutely against `floor`.
fn fd_check(params: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let floor = 1e-7;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + FD_STEP;
        let fp = f(params);
        params[i] = orig - FD_STEP;
        let fm = f(params);
        params[i] = orig;
        let fd = (fp - fm) / (2.0 * FD_STEP);
        let scale = analytic[i].abs().max(fd.abs()).max(floor);
        worst = worst.max((analytic[i] - fd).abs() / scale);
    }
    worst
}

fn criterion_5() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 3];
    for _ in 0..10 {
        // policy log-density of squashed actions, w.r.t. all parameters
        let policy = GmmPolicy::new(2, 3, 2, 4, 8, 1.0, &mut rng);
        let n = 6;
        let states = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let skills: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let pre = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let mut grads = vec![0.0; policy.net().num_params()];
        policy.log_prob_backward(&states, &skills, &pre, &mut grads).unwrap();
        let mut params = policy.net().params().to_vec();
        let mut probe = policy.clone();
        worst[0] = worst[0].max(fd_check(&mut params, &grads, |p| {
            probe.net_mut().params_mut().copy_from_slice(p);
            probe.log_prob(&states, &skills, &pre).unwrap().iter().sum()
        }));

        // discriminator cross-entropy
        let disc = SkillDiscriminator::new(2, 5, 8, &mut rng);
        let e = Mat::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect());
        let z: Vec<usize> = (0..n).map(|_| rng.gen_range(0..5)).collect();
        let mut grads = vec![0.0; disc.net().num_params()];
        disc.nll_backward(&e, &z, &mut grads).unwrap();
        let mut params = disc.net().params().to_vec();
        let mut probe = disc.clone();
        worst[1] = worst[1].max(fd_check(&mut params, &grads, |p| {
            probe.net_mut().params_mut().copy_from_slice(p);
            probe.nll(&e, &z).unwrap().loss
        }));

        // classifier binary cross-entropy, parameters and embedding input
        let clf = ExpertClassifier::new(2, 8, &mut rng);
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let mut grads = vec![0.0; clf.net().num_params()];
        let (_, d_e) = clf.bce_backward(&e, &labels, &mut grads).unwrap();
        let mut params = clf.net().params().to_vec();
        let mut probe = clf.clone();
        worst[2] = worst[2].max(fd_check(&mut params, &grads, |p| {
            probe.net_mut().params_mut().copy_from_slice(p);
            probe.bce(&e, &labels).unwrap()
        }));
        let mut inputs = e.data.clone();
        worst[2] = worst[2].max(fd_check(&mut inputs, &d_e.data, |x| {
            clf.bce(&Mat::from_vec(n, 2, x.to_vec()), &labels).unwrap()
        }));
    }
    Line {
        id: 5,
        pass: Some(worst.iter().all(|&w| w < 1e-4)),
        detail: format!(
            "worst relative error vs central differences (h=1e-5) over 10 points: policy log-prob {:.1e}, discriminator NLL {:.1e}, classifier BCE {:.1e}",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn criterion_6() -> Line {
    let td = [
        td_target(1.0, true, 0.99, 5.0, 0.1, -3.0) == 1.0,
        td_target(0.7, false, 0.0, 5.0, 0.1, -3.0) == 0.7,
        td_target(1.0, false, 0.9, 2.0, 0.1, -1.0) == 1.0 + 0.9 * (2.0 + 0.1 * 1.0),
    ];
    let polyak = |main: f64, target: f64, tau: f64| {
        let mut t = [target];
        polyak_update(&[main], &mut t, tau).unwrap();
        t[0]
    };
    let pk = [polyak(3.25, -1.5, 1.0) == 3.25, polyak(3.25, -1.5, 0.0) == -1.5, polyak(2.0, 0.0, 0.5) == 1.0];

    let config = Config {
        hidden_width: 64,
        ..Config::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut trainer = SacTrainer::new(&config, 1, &mut rng);
    let t = Transition {
        state: vec![0.3, -0.2],
        skill: 0,
        action: vec![0.1, 0.5],
        next_state: vec![0.31, -0.19],
        extrinsic_reward: 1.0,
        done: false,
    };
    let batch = Batch::from_transitions([&t]);
    for _ in 0..500 {
        trainer.q_update(&batch, &[2.5]).unwrap();
    }
    let err = trainer
        .q
        .iter()
        .map(|q| (q.values(&batch.states, &batch.skills, &batch.actions).unwrap()[0] - 2.5).abs())
        .fold(0.0, f64::max);
    let ok = td.iter().chain(&pk).all(|&b| b) && err < 1e-2;
    Line {
        id: 6,
        pass: Some(ok),
        detail: format!(
            "TD examples {}/3 exact (2.89 case included), polyak examples {}/3 exact, Q regression |Q - y| = {err:.2e} after 500 steps",
            td.iter().filter(|&&b| b).count(),
            pk.iter().filter(|&&b| b).count()
        ),
    }
}

/// Insertion sort, then linear interpolation at rank q (n - 1).
fn oracle_five(values: &[f64]) -> [f64; 5] {
    let mut v = Vec::with_capacity(values.len());
    for &x in values {
        let at = v.iter().position(|&y| y > x).unwrap_or(v.len());
        v.insert(at, x);
    }
    let q = |p: f64| {
        let rank = p * (v.len() - 1) as f64;
        let below = rank.floor() as usize;
        let above = rank.ceil() as usize;
        v[below] + (rank - below as f64) * (v[above] - v[below])
    };
    [v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]]
}

fn criterion_7() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..200);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let got = displacement_stats(&values).unwrap().to_array();
        let want = oracle_five(&values);
        if got.iter().zip(&want).any(|(a, b)| a.to_bits() != b.to_bits()) {
            mismatches += 1;
        }
    }
    let stats = |x: f64| FiveNumber {
        min: x,
        q25: x,
        median: x,
        q75: x,
        max: x,
    };
    let table = skill_guidance::eval::csv::summary(&[("v".into(), vec![stats(1.0), stats(3.0)])]).unwrap();
    let header: Vec<&str> = table.lines().next().unwrap().split(',').collect();
    let columns = ["variant", "min", "min_std", "25%", "25%_std", "50%", "50%_std", "75%", "75%_std", "max", "max_std"];
    let layout = header == columns && SUMMARY_HEADER == columns.join(",");
    let row_ok = table.lines().nth(1) == Some("v,2,1,2,1,2,1,2,1,2,1");
    Line {
        id: 7,
        pass: Some(mismatches == 0 && layout && row_ok),
        detail: format!(
            "five-number summary vs sort oracle: {mismatches}/100 mismatches; summary columns {}",
            header.join(" ")
        ),
    }
}

fn criterion_8(passed_1_to_7: usize) -> Line {
    let mut cmd = Command::new(common::BIN);
    cmd.arg("serve-maze");
    let adapter = (|| -> skill_guidance::Result<usize> {
        let mut env = ExternalEnv::spawn(cmd, Some((2, 2)))?;
        env.seed(8)?;
        env.reset()?;
        let mut steps = 0;
        while !env.step(&[0.5, -0.5])?.done {
            steps += 1;
        }
        env.close()?;
        Ok(steps + 1)
    })();
    let adapter_ok = matches!(adapter, Ok(100));
    Line {
        id: 8,
        pass: Some(adapter_ok && passed_1_to_7 == 7),
        detail: format!(
            "Mujoco table values not reproduced (needs a physics engine and 5 x 2.5M-step runs); external adapter {} (`--env-cmd`); criteria 1-7 passing: {passed_1_to_7}/7",
            if adapter_ok { "works end to end" } else { "FAILED" }
        ),
    }
}
