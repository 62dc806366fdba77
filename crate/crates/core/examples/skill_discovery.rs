//! Skill discovery on the maze for a few epochs, once with the
//! discriminator reading a fixed projection onto the x coordinate and once
//! on raw states, printing the per-epoch metrics stream.
//!
//! Usage: `skill_discovery [epochs]`

use skill_guidance::approx::LinearProjection;
use skill_guidance::dataset::Standardizer;
use skill_guidance::env::PointMaze;
use skill_guidance::nn::Mat;
use skill_guidance::skill::{SkillTrainer, METRICS_HEADER};
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let config = Config {
        num_skills: 4,
        hidden_width: 64,
        batch_size: 64,
        train_steps_per_epoch: 200,
        ..Config::default()
    };
    let x_only = LinearProjection::new(
        Mat::from_vec(1, 2, vec![1.0, 0.0]),
        Standardizer {
            mean: vec![0.5, 0.5],
            std: vec![1.0 / 14.0, 1.0 / 14.0],
        },
    )?;
    let variants = [
        ("projected", x_only, config.clone()),
        (
            "raw states",
            LinearProjection::identity(2),
            Config {
                use_projection: false,
                standardize: false,
                ..config.clone()
            },
        ),
    ];
    for (name, projection, config) in variants {
        println!("# {name}");
        println!("{METRICS_HEADER}");
        let mut trainer = SkillTrainer::new(&config, projection)?;
        let mut env = PointMaze::new(config.horizon, false, 0);
        for _ in 0..epochs {
            println!("{}", trainer.run_skill_epoch(&mut env)?.csv_row());
        }
    }
    Ok(())
}
