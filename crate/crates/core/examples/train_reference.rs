//! Trains the single-skill reference policy on the point maze against the
//! extrinsic reward and prints one line per evaluation epoch.

use skill_guidance::env::{optimal_return, PointMaze, PointMazeState, KERNEL_CENTER};
use skill_guidance::sac::train_reference_policy;
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse()).unwrap_or(0);
    let config = Config {
        seed,
        ..Config::default()
    };
    let mut env = PointMaze::new(config.horizon, config.shared_start_noise, 0);
    let mut eval_env = PointMaze::new(config.horizon, config.shared_start_noise, 0);
    let horizon = config.horizon;
    let optimum = move |s: &[f64]| optimal_return(PointMazeState { x: s[0], y: s[1] }, horizon);
    let start = std::time::Instant::now();
    let run = train_reference_policy(&mut env, &mut eval_env, &config, Some(&optimum), |m| {
        let dist: f64 = m
            .final_states
            .iter()
            .map(|s| ((s[0] - KERNEL_CENTER[0]).powi(2) + (s[1] - KERNEL_CENTER[1]).powi(2)).sqrt())
            .sum::<f64>()
            / m.final_states.len() as f64;
        println!(
            "epoch {:3} steps {:6} q {:.4} pi {:.3} return {:.2}/{:.2} final distance {:.4} ({:.0}s)",
            m.epoch,
            m.env_steps,
            m.q1_loss,
            m.policy_loss,
            m.eval_return,
            m.optimal_return,
            dist,
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("stopped early: {} after {} steps", run.stopped_early, run.env_steps);
    Ok(())
}
