//! Reference policy, labeled states, encoder, projection-guided skills and
//! their separation, all in one process on the point maze.
//!
//! Usage: `full_pipeline [seed] [skill env steps] [train steps per epoch]`

use std::time::Instant;

use skill_guidance::approx::ActionMode;
use skill_guidance::env::{optimal_return, PointMaze, PointMazeState};
use skill_guidance::eval::{skill_rollouts, skill_separation};
use skill_guidance::project::{collect_labeled_states, pretrain_encoder};
use skill_guidance::sac::train_reference_policy;
use skill_guidance::skill::SkillTrainer;
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let arg = |i: usize, default: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let seed = arg(1, 0) as u64;
    let steps = arg(2, 100_000);
    let config = Config {
        seed,
        train_steps_per_epoch: arg(3, 1000),
        ..Config::default()
    };
    let clock = Instant::now();
    let maze = || PointMaze::new(config.horizon, config.shared_start_noise, 0);
    let horizon = config.horizon;
    let optimum = move |s: &[f64]| optimal_return(PointMazeState { x: s[0], y: s[1] }, horizon);
    let reference = train_reference_policy(&mut maze(), &mut maze(), &config, Some(&optimum), |_| {})?;
    println!("reference: {} steps ({:.0}s)", reference.env_steps, clock.elapsed().as_secs_f64());

    let dataset = collect_labeled_states(&mut maze(), &reference.trainer.policy, config.n_traj, horizon, seed, true)?;
    let fit = pretrain_encoder(&dataset, config.embedding_dim, &config)?;
    println!(
        "encoder: held-out accuracy {:.3} after {} steps ({:.0}s)",
        fit.held_out_accuracy,
        fit.steps(),
        clock.elapsed().as_secs_f64()
    );
    let expert: Vec<f64> = dataset
        .samples
        .iter()
        .filter(|s| s.expert)
        .map(|s| fit.projection.embed(&s.state).map(|e| e[0]))
        .collect::<Result<_, _>>()?;
    let range = (
        expert.iter().copied().fold(f64::INFINITY, f64::min),
        expert.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );

    let mut trainer = SkillTrainer::new(&config, fit.projection)?;
    let mut env = maze();
    for _ in 0..config.epochs_for_steps(steps) {
        let m = trainer.run_skill_epoch(&mut env)?;
        if m.epoch % 10 == 9 {
            let rollouts = skill_rollouts(&trainer.sac.policy, || Ok(maze()), 5, horizon, ActionMode::Stochastic, seed, 1)?;
            let sep = skill_separation(&rollouts, &trainer.discriminator, &trainer.projection, range)?;
            println!(
                "epoch {:3} disc acc {:.3} reward {:.3} held-out {:.3} span {:.2} ({:.0}s)",
                m.epoch,
                m.disc_acc,
                m.mean_intrinsic_reward,
                sep.held_out_accuracy,
                sep.span_fraction,
                clock.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
