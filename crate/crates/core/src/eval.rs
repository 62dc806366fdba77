//! Rollouts, displacement statistics, projection weights, visitation
//! exports and return curves, plus their CSV writers.

use std::fmt::Write as _;
use std::path::Path;

use crate::approx::{ActionMode, GmmPolicy, LinearProjection, SkillDiscriminator};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::seeding::{derive_indexed_seed, indexed_rng};

/// States visited by one episode, initial state first.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub skill: usize,
    pub states: Vec<Vec<f64>>,
    pub extrinsic_return: f64,
}

/// Runs at most `horizon` steps, stopping early when the episode ends.
pub fn rollout<E: Environment>(
    policy: &GmmPolicy,
    env: &mut E,
    skill: usize,
    horizon: usize,
    mode: ActionMode,
    rng: &mut crate::seeding::Rng,
) -> Result<Trajectory> {
    let mut state = env.reset()?;
    let mut states = vec![state.clone()];
    let mut total = 0.0;
    for _ in 0..horizon {
        let action = policy.act(&state, skill, mode, rng)?;
        let step = env.step(&action)?;
        total += step.extrinsic_reward;
        state = step.next_state;
        states.push(state.clone());
        if step.done {
            break;
        }
    }
    Ok(Trajectory {
        skill,
        states,
        extrinsic_return: total,
    })
}

pub fn deterministic_rollout<E: Environment>(
    policy: &GmmPolicy,
    env: &mut E,
    skill: usize,
    horizon: usize,
) -> Result<Trajectory> {
    let mut rng = indexed_rng(0, "deterministic-rollout", skill as u64);
    rollout(policy, env, skill, horizon, ActionMode::Deterministic, &mut rng)
}

/// One rollout job: which skill, and which of its rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutJob {
    pub skill: usize,
    pub rollout: usize,
}

/// `rollouts` episodes per skill. Job `j` seeds its environment and action
/// noise from `(seed, j)`, so the result does not depend on `workers`.
pub fn skill_rollouts<E: Environment, F: Fn() -> Result<E> + Sync>(
    policy: &GmmPolicy,
    make_env: F,
    rollouts: usize,
    horizon: usize,
    mode: ActionMode,
    seed: u64,
    workers: usize,
) -> Result<Vec<(RolloutJob, Trajectory)>> {
    let jobs: Vec<RolloutJob> = (0..policy.num_skills())
        .flat_map(|skill| (0..rollouts).map(move |rollout| RolloutJob { skill, rollout }))
        .collect();
    let jobs = &jobs;
    let run = |j: usize| -> Result<Trajectory> {
        let mut env = make_env()?;
        env.seed(derive_indexed_seed(seed, "eval-env", j as u64))?;
        let mut rng = indexed_rng(seed, "eval-act", j as u64);
        rollout(policy, &mut env, jobs[j].skill, horizon, mode, &mut rng)
    };
    let workers = workers.clamp(1, jobs.len().max(1));
    let results: Vec<Result<Trajectory>> = if workers == 1 {
        (0..jobs.len()).map(run).collect()
    } else {
        let mut slots: Vec<Option<Result<Trajectory>>> = (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run = &run;
                    scope.spawn(move || {
                        (w..jobs.len())
                            .step_by(workers)
                            .map(|j| (j, run(j)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (j, r) in h.join().expect("rollout worker panicked") {
                    slots[j] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every job ran")).collect()
    };
    jobs.iter()
        .zip(results)
        .map(|(job, r)| r.map(|t| (*job, t)))
        .collect()
}

/// Final minus initial coordinate `axis`.
pub fn displacement(traj: &Trajectory, axis: usize) -> Result<f64> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| Error::Validation("empty trajectory".into()))?;
    let last = traj.states.last().unwrap_or(first);
    if axis >= first.len() {
        return Err(Error::Validation(format!("axis {axis} outside state of size {}", first.len())));
    }
    Ok(last[axis] - first[axis])
}

/// Min, quartiles and max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn to_array(self) -> [f64; 5] {
        [self.min, self.q25, self.median, self.q75, self.max]
    }
}

/// Quantile `q` of ascending `sorted` by linear interpolation between
/// order statistics at position `q (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn displacement_stats(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::Validation("no displacements to summarize".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN displacement".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(FiveNumber {
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Per-feature weights of a projection and their normalized L2 magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    /// `weights[j]` holds column `j` of `chi` (one entry per embedding row).
    pub weights: Vec<Vec<f64>>,
    /// Column norms divided by their sum; all zero when `chi` is zero.
    pub importance: Vec<f64>,
}

pub fn feature_importance(proj: &LinearProjection) -> FeatureImportance {
    let chi = proj.matrix();
    let weights: Vec<Vec<f64>> = (0..chi.cols)
        .map(|j| (0..chi.rows).map(|r| chi.get(r, j)).collect())
        .collect();
    let norms: Vec<f64> = weights
        .iter()
        .map(|w| w.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let total: f64 = norms.iter().sum();
    let importance = if total > 0.0 {
        norms.iter().map(|n| n / total).collect()
    } else {
        vec![0.0; norms.len()]
    };
    FeatureImportance { weights, importance }
}

/// Held-out skill separation of a trained policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Discriminator accuracy over every next-state of the rollouts.
    pub held_out_accuracy: f64,
    /// Mean projected final state per skill (first embedding coordinate).
    pub skill_means: Vec<f64>,
    /// Spread of `skill_means` over the width of `reference_range`.
    pub span_fraction: f64,
}

/// Scores fresh rollouts: how often the discriminator names the right skill,
/// and how much of `reference_range` (a projected interval, typically the
/// one covered by expert states) the per-skill mean final embeddings span.
pub fn skill_separation(
    rollouts: &[(RolloutJob, Trajectory)],
    disc: &SkillDiscriminator,
    proj: &LinearProjection,
    reference_range: (f64, f64),
) -> Result<SeparationReport> {
    let k = disc.num_skills();
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (job, traj) in rollouts {
        let next = &traj.states[1..];
        if next.is_empty() {
            continue;
        }
        let states = Mat::from_rows(next);
        let e = proj.embed_batch(&states)?;
        let pred = disc.predict(&e)?;
        correct += pred.iter().filter(|&&p| p == job.skill).count();
        total += pred.len();
        sums[job.skill] += e.get(e.rows - 1, 0);
        counts[job.skill] += 1;
    }
    if total == 0 {
        return Err(Error::Validation("no rollout steps to score".into()));
    }
    let skill_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let lo = skill_means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = skill_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = reference_range.1 - reference_range.0;
    Ok(SeparationReport {
        held_out_accuracy: correct as f64 / total as f64,
        span_fraction: if width > 0.0 { (hi - lo) / width } else { f64::NAN },
        skill_means,
    })
}

/// Per-skill returns of one evaluation epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub epoch: usize,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub epoch: usize,
    pub max: f64,
    pub mean: f64,
    pub min: f64,
}

pub fn return_curves(records: &[EvalRecord]) -> Result<Vec<CurveRow>> {
    let k = records.first().map_or(0, |r| r.returns.len());
    records
        .iter()
        .map(|r| {
            if r.returns.len() != k || k == 0 {
                return Err(Error::Validation(format!(
                    "epoch {} has {} skill returns, expected {k}",
                    r.epoch,
                    r.returns.len()
                )));
            }
            Ok(CurveRow {
                epoch: r.epoch,
                max: r.returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: r.returns.iter().sum::<f64>() / k as f64,
                min: r.returns.iter().copied().fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Curves of several seeds, epoch by epoch: `(epoch, [(mean, std); 3])` for
/// max, mean and min.
pub fn aggregate_curves(per_seed: &[Vec<CurveRow>]) -> Result<Vec<(usize, [(f64, f64); 3])>> {
    let first = per_seed
        .first()
        .ok_or_else(|| Error::Validation("no curves to aggregate".into()))?;
    if per_seed.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Validation("seeds have different numbers of epochs".into()));
    }
    (0..first.len())
        .map(|i| {
            let rows: Vec<CurveRow> = per_seed.iter().map(|c| c[i]).collect();
            if rows.iter().any(|r| r.epoch != rows[0].epoch) {
                return Err(Error::Validation("seeds disagree on epoch numbers".into()));
            }
            let col = |f: fn(&CurveRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
            Ok((rows[0].epoch, [col(|r| r.max), col(|r| r.mean), col(|r| r.min)]))
        })
        .collect()
}

/// CSV writers. Every file starts with a header row.
pub mod csv {
    use super::*;

    pub const SUMMARY_HEADER: &str = "variant,min,min_std,25%,25%_std,50%,50%_std,75%,75%_std,max,max_std";

    fn write(path: &Path, text: String) -> Result<()> {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Rows `(skill, seed, displacement)`.
    pub fn displacements(rows: &[(usize, u64, f64)]) -> String {
        let mut out = String::from("skill,seed,displacement\n");
        for (skill, seed, d) in rows {
            let _ = writeln!(out, "{skill},{seed},{d}");
        }
        out
    }

    pub fn write_displacements(path: impl AsRef<Path>, rows: &[(usize, u64, f64)]) -> Result<()> {
        write(path.as_ref(), displacements(rows))
    }

    /// One row per variant: each of the five statistics averaged over
    /// seeds, followed by its standard deviation across seeds.
    pub fn summary(variants: &[(String, Vec<FiveNumber>)]) -> Result<String> {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for (name, per_seed) in variants {
            if per_seed.is_empty() {
                return Err(Error::Validation(format!("variant {name} has no seeds")));
            }
            let _ = write!(out, "{name}");
            for i in 0..5 {
                let (m, s) = mean_std(&per_seed.iter().map(|f| f.to_array()[i]).collect::<Vec<_>>());
                let _ = write!(out, ",{m},{s}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_summary(path: impl AsRef<Path>, variants: &[(String, Vec<FiveNumber>)]) -> Result<()> {
        write(path.as_ref(), summary(variants)?)
    }

    pub fn importance(fi: &FeatureImportance) -> String {
        let e = fi.weights.first().map_or(0, |w| w.len());
        let mut out = String::from("feature");
        for r in 0..e {
            let _ = write!(out, ",w{r}");
        }
        out.push_str(",importance\n");
        for (j, (w, imp)) in fi.weights.iter().zip(&fi.importance).enumerate() {
            let _ = write!(out, "{j}");
            for v in w {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{imp}");
        }
        out
    }

    pub fn write_importance(path: impl AsRef<Path>, fi: &FeatureImportance) -> Result<()> {
        write(path.as_ref(), importance(fi))
    }

    /// Rows `(skill, rollout, step, s_0.., e_0..)` for every state after
    /// the initial one; `step` counts from 1.
    pub fn visitation(rollouts: &[(RolloutJob, Trajectory)], proj: &LinearProjection) -> Result<String> {
        let mut out = String::from("skill,rollout,step");
        for i in 0..proj.state_dim() {
            let _ = write!(out, ",s{i}");
        }
        for i in 0..proj.embedding_dim() {
            let _ = write!(out, ",e{i}");
        }
        out.push('\n');
        for (job, traj) in rollouts {
            for (step, s) in traj.states.iter().enumerate().skip(1) {
                let e = proj.embed(s)?;
                let _ = write!(out, "{},{},{step}", job.skill, job.rollout);
                for v in s.iter().chain(&e) {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        Ok(out)
    }

    pub fn write_visitation(
        path: impl AsRef<Path>,
        rollouts: &[(RolloutJob, Trajectory)],
        proj: &LinearProjection,
    ) -> Result<()> {
        write(path.as_ref(), visitation(rollouts, proj)?)
    }

    /// Rows `(epoch, skill, return)`, the raw stream behind the curves.
    pub fn eval_returns(records: &[EvalRecord]) -> String {
        let mut out = String::from("epoch,skill,return\n");
        for r in records {
            for (z, v) in r.returns.iter().enumerate() {
                let _ = writeln!(out, "{},{z},{v}", r.epoch);
            }
        }
        out
    }

    pub fn parse_eval_returns(text: &str) -> Result<Vec<EvalRecord>> {
        let mut records: Vec<EvalRecord> = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Validation(format!("eval returns line {}: {line:?}", n + 1));
            let f: Vec<&str> = line.split(',').collect();
            let [epoch, skill, value] = f[..] else { return Err(bad()) };
            let epoch: usize = epoch.parse().map_err(|_| bad())?;
            let skill: usize = skill.parse().map_err(|_| bad())?;
            let value: f64 = value.parse().map_err(|_| bad())?;
            match records.last_mut() {
                Some(r) if r.epoch == epoch => {
                    if skill != r.returns.len() {
                        return Err(bad());
                    }
                    r.returns.push(value);
                }
                _ => {
                    if skill != 0 {
                        return Err(bad());
                    }
                    records.push(EvalRecord {
                        epoch,
                        returns: vec![value],
                    });
                }
            }
        }
        Ok(records)
    }

    pub fn curves(rows: &[CurveRow]) -> String {
        let mut out = String::from("epoch,max,mean,min\n");
        for r in rows {
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.max, r.mean, r.min);
        }
        out
    }

    pub fn aggregated_curves(rows: &[(usize, [(f64, f64); 3])]) -> String {
        let mut out = String::from("epoch,max,max_std,mean,mean_std,min,min_std\n");
        for (epoch, cols) in rows {
            let _ = write!(out, "{epoch}");
            for (m, s) in cols {
                let _ = write!(out, ",{m},{s}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Standardizer;
    use crate::env::PointMaze;
    use crate::nn::Mlp;
    use crate::seeding::component_rng;
    use rand::Rng;

    fn traj(states: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            skill: 0,
            states,
            extrinsic_return: 0.0,
        }
    }

    #[test]
    fn displacement_examples() {
        let t = traj(vec![vec![0.5, 0.1], vec![0.6, 0.1], vec![0.7, 0.3]]);
        assert!((displacement(&t, 0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(displacement(&traj(vec![vec![0.4, 0.4]]), 1).unwrap(), 0.0);
        let mut rev = t.clone();
        rev.states.reverse();
        assert_eq!(displacement(&rev, 0).unwrap(), -displacement(&t, 0).unwrap());
        assert!(displacement(&t, 2).is_err());
    }

    #[test]
    fn five_number_examples() {
        let f = displacement_stats(&[-1.0, 0.0, 2.0, 5.0, 10.0]).unwrap();
        assert_eq!((f.min, f.median, f.max), (-1.0, 2.0, 10.0));
        let f = displacement_stats(&[3.0; 3]).unwrap();
        assert_eq!(f.to_array(), [3.0; 5]);
        assert!(displacement_stats(&[]).is_err());
        let f = displacement_stats(&[1.0, 2.0]).unwrap();
        assert_eq!((f.q25, f.median, f.q75), (1.25, 1.5, 1.75));
    }

    #[test]
    fn importance_examples() {
        let zero_col = LinearProjection::new(Mat::from_rows(&[[1.0, 0.0, 2.0]]), Standardizer::identity(3)).unwrap();
        let fi = feature_importance(&zero_col);
        assert_eq!(fi.importance[1], 0.0);
        let single = LinearProjection::new(Mat::from_rows(&[[0.0, -3.0, 0.0]]), Standardizer::identity(3)).unwrap();
        assert_eq!(feature_importance(&single).importance, vec![0.0, 1.0, 0.0]);
        let mut rng = component_rng(0, "fi");
        let chi = Mat::from_vec(3, 7, (0..21).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let fi = feature_importance(&LinearProjection::new(chi, Standardizer::identity(7)).unwrap());
        assert!((fi.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn curve_examples() {
        let rows = return_curves(&[EvalRecord {
            epoch: 0,
            returns: vec![1.0, 2.0, 3.0],
        }])
        .unwrap();
        assert_eq!((rows[0].max, rows[0].mean, rows[0].min), (3.0, 2.0, 1.0));
        let one = return_curves(&[EvalRecord {
            epoch: 4,
            returns: vec![0.7],
        }])
        .unwrap();
        assert_eq!((one[0].max, one[0].mean), (0.7, 0.7));
        assert_eq!(one[0].min, 0.7);
        let bad = [
            EvalRecord {
                epoch: 0,
                returns: vec![1.0, 2.0],
            },
            EvalRecord {
                epoch: 1,
                returns: vec![1.0],
            },
        ];
        assert!(return_curves(&bad).is_err());
        let agg = aggregate_curves(&[rows.clone(), rows]).unwrap();
        assert!(agg[0].1.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn eval_returns_round_trip() {
        let records = vec![
            EvalRecord {
                epoch: 0,
                returns: vec![1.5, -2.0],
            },
            EvalRecord {
                epoch: 3,
                returns: vec![0.1, 0.2],
            },
        ];
        assert_eq!(csv::parse_eval_returns(&csv::eval_returns(&records)).unwrap(), records);
        assert!(csv::parse_eval_returns("epoch,skill,return\n0,1,2.0\n").is_err());
    }

    fn maze_policy(k: usize) -> GmmPolicy {
        GmmPolicy::new(2, k, 2, 4, 16, 1.0, &mut component_rng(1, "eval-policy"))
    }

    #[test]
    fn deterministic_rollouts_repeat() {
        let policy = maze_policy(3);
        let mut a = PointMaze::new(100, false, 5);
        let mut b = PointMaze::new(100, false, 5);
        let ta = deterministic_rollout(&policy, &mut a, 2, 100).unwrap();
        let tb = deterministic_rollout(&policy, &mut b, 2, 100).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(ta.states.len(), 101);
        let empty = deterministic_rollout(&policy, &mut a, 0, 0).unwrap();
        assert_eq!(empty.states.len(), 1);
        let long = deterministic_rollout(&policy, &mut a, 0, 500).unwrap();
        assert!(long.states.len() <= 101);
    }

    #[test]
    fn workers_do_not_change_results() {
        let policy = maze_policy(3);
        let make = || Ok(PointMaze::new(20, false, 0));
        let serial = skill_rollouts(&policy, make, 2, 20, ActionMode::Stochastic, 9, 1).unwrap();
        let parallel = skill_rollouts(&policy, make, 2, 20, ActionMode::Stochastic, 9, 4).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 6);
    }

    #[test]
    fn visitation_schema_and_projection() {
        let policy = maze_policy(10);
        let proj = LinearProjection::new(
            Mat::from_rows(&[[0.8, -0.6]]),
            Standardizer {
                mean: vec![0.5, 0.5],
                std: vec![0.1, 0.2],
            },
        )
        .unwrap();
        let rollouts = skill_rollouts(&policy, || Ok(PointMaze::new(100, false, 0)), 5, 100, ActionMode::Deterministic, 1, 1)
            .unwrap();
        let text = csv::visitation(&rollouts, &proj).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5001);
        for line in &lines[1..] {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f.len(), 3 + 2 + 1);
            let e = 0.8 * (f[3] - 0.5) / 0.1 - 0.6 * (f[4] - 0.5) / 0.2;
            assert!((f[5] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_of_a_perfect_discriminator() {
        // skill z always ends at x = z / 10; the discriminator reads x
        let rollouts: Vec<(RolloutJob, Trajectory)> = (0..3)
            .map(|z| {
                let x = z as f64 / 10.0;
                (
                    RolloutJob { skill: z, rollout: 0 },
                    Trajectory {
                        skill: z,
                        states: vec![vec![0.0, 0.0], vec![x, 0.0], vec![x, 0.0]],
                        extrinsic_return: 0.0,
                    },
                )
            })
            .collect();
        // logit_z = 200 z x - 10 z^2 peaks at z = 10 x
        let mut net = Mlp::zeros(&[1, 3, 3, 3]);
        let (w0, _) = net.layer_mut(0);
        w0.copy_from_slice(&[1.0, 0.0, 0.0]);
        let (w1, _) = net.layer_mut(1);
        w1.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (w2, b2) = net.layer_mut(2);
        for z in 0..3 {
            w2[z] = 200.0 * z as f64;
            b2[z] = -10.0 * (z * z) as f64;
        }
        let disc = SkillDiscriminator::from_net(net);
        let proj = LinearProjection::new(Mat::from_rows(&[[1.0, 0.0]]), Standardizer::identity(2)).unwrap();
        let r = skill_separation(&rollouts, &disc, &proj, (0.0, 0.4)).unwrap();
        assert_eq!(r.held_out_accuracy, 1.0);
        assert_eq!(r.skill_means, vec![0.0, 0.1, 0.2]);
        assert!((r.span_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn summary_layout() {
        let f = |x: f64| FiveNumber {
            min: x,
            q25: x + 1.0,
            median: x + 2.0,
            q75: x + 3.0,
            max: x + 4.0,
        };
        let text = csv::summary(&[("enc".into(), vec![f(0.0), f(2.0)])]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], csv::SUMMARY_HEADER);
        assert_eq!(lines[1], "enc,1,1,2,1,3,1,4,1,5,1");
    }
}
