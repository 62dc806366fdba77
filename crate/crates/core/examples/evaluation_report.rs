//! Evaluation tables for a (here untrained) skill policy: per-rollout
//! displacement, the five-number summary, skill separation and the state
//! visitation export, written to a temporary directory.

use skill_guidance::approx::{ActionMode, LinearProjection};
use skill_guidance::env::PointMaze;
use skill_guidance::eval::{self, csv};
use skill_guidance::skill::SkillTrainer;
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let config = Config {
        num_skills: 10,
        hidden_width: 32,
        ..Config::default()
    };
    let trainer = SkillTrainer::new(&config, LinearProjection::identity(2))?;
    let rollouts = eval::skill_rollouts(
        &trainer.sac.policy,
        || Ok(PointMaze::new(config.horizon, false, 0)),
        5,
        config.horizon,
        ActionMode::Stochastic,
        config.seed,
        2,
    )?;
    let rows: Vec<(usize, u64, f64)> = rollouts
        .iter()
        .map(|(job, traj)| eval::displacement(traj, 0).map(|d| (job.skill, config.seed, d)))
        .collect::<Result<_, _>>()?;
    print!("{}", csv::displacements(&rows[..5]));
    println!("... {} rows", rows.len());

    let values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let stats = eval::displacement_stats(&values)?;
    // a second "seed" so the std columns are not all zero
    let shifted: Vec<f64> = values.iter().map(|v| v * 0.5).collect();
    let table = vec![("untrained".to_string(), vec![stats, eval::displacement_stats(&shifted)?])];
    print!("{}", csv::summary(&table)?);

    let sep = eval::skill_separation(&rollouts, &trainer.discriminator, &trainer.projection, (0.0, 1.0))?;
    println!(
        "discriminator accuracy on fresh rollouts {:.3}, skill mean x span {:.3}",
        sep.held_out_accuracy, sep.span_fraction
    );

    let dir = std::env::temp_dir().join("skill-guidance-report");
    std::fs::create_dir_all(&dir)?;
    csv::write_visitation(dir.join("visitation.csv"), &rollouts, &trainer.projection)?;
    csv::write_importance(dir.join("importance.csv"), &eval::feature_importance(&trainer.projection))?;
    csv::write_summary(dir.join("summary.csv"), &table)?;
    println!("tables written to {}", dir.display());
    Ok(())
}
