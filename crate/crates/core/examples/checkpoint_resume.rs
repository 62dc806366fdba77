//! Checkpoints a skill run, reloads it and shows that the resumed run
//! matches one that was never interrupted.

use skill_guidance::approx::LinearProjection;
use skill_guidance::checkpoint::{load_skills, save_skills};
use skill_guidance::env::PointMaze;
use skill_guidance::skill::SkillTrainer;
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let config = Config {
        num_skills: 3,
        hidden_width: 32,
        batch_size: 32,
        train_steps_per_epoch: 50,
        ..Config::default()
    };
    let dir = std::env::temp_dir().join("skill-guidance-checkpoint");
    let mut env = PointMaze::new(config.horizon, false, 0);

    let mut uninterrupted = SkillTrainer::new(&config, LinearProjection::identity(2))?;
    for _ in 0..3 {
        uninterrupted.run_skill_epoch(&mut env)?;
    }

    let mut first = SkillTrainer::new(&config, LinearProjection::identity(2))?;
    first.run_skill_epoch(&mut env)?;
    first.run_skill_epoch(&mut env)?;
    let manifest = save_skills(&dir, &first)?;
    print!("{}", manifest.to_text());

    let (_, mut resumed) = load_skills(&dir)?;
    let m = resumed.run_skill_epoch(&mut env)?;
    println!("resumed epoch {} at {} env steps", m.epoch, m.env_steps);
    println!(
        "policy identical to the uninterrupted run: {}",
        resumed.sac.policy == uninterrupted.sac.policy
    );
    Ok(())
}
