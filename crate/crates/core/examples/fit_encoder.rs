//! Pretrains a 1-D projection that separates states of a scripted expert
//! (full speed toward the reward kernel) from uniform-random-walk states,
//! then reads off which maze coordinate the projection relies on.
//!
//! With a trained reference policy, `project::collect_labeled_states`
//! produces the same kind of dataset; see `full_pipeline`.

use rand::Rng;
use skill_guidance::dataset::{LabeledState, LabeledStateDataset};
use skill_guidance::env::{Environment, PointMaze, KERNEL_CENTER, MAX_DISPLACEMENT};
use skill_guidance::eval::feature_importance;
use skill_guidance::project::pretrain_encoder;
use skill_guidance::seeding::component_rng;
use skill_guidance::Config;

fn main() -> skill_guidance::Result<()> {
    let config = Config {
        hidden_width: 64,
        lr_classifier: 3e-3,
        ..Config::default()
    };
    let mut env = PointMaze::new(config.horizon, false, 0);
    env.seed(1)?;
    let mut rng = component_rng(1, "example-walk");
    let mut samples = Vec::new();
    for expert in [true, false] {
        for _ in 0..config.n_traj {
            let mut s = env.reset()?;
            for _ in 0..config.horizon {
                let action: Vec<f64> = if expert {
                    (0..2)
                        .map(|i| ((KERNEL_CENTER[i] - s[i]) / MAX_DISPLACEMENT).clamp(-0.999, 0.999))
                        .collect()
                } else {
                    (0..2).map(|_| rng.gen_range(-0.999..0.999)).collect()
                };
                s = env.step(&action)?.next_state;
                samples.push(LabeledState {
                    state: s.clone(),
                    expert,
                });
            }
        }
    }
    let dataset = LabeledStateDataset::new(samples)?;
    println!("{} states, {} from the expert", dataset.len(), dataset.expert_count());

    let fit = pretrain_encoder(&dataset, 1, &config)?;
    println!(
        "held-out accuracy {:.3} (train {:.3}) after {} full-batch steps",
        fit.held_out_accuracy,
        fit.train_accuracy,
        fit.steps()
    );
    let fi = feature_importance(&fit.projection);
    println!("chi = {:?}", fit.projection.matrix().row(0));
    println!("importance: x {:.3}, y {:.3}", fi.importance[0], fi.importance[1]);
    print!("{}", fit.projection.to_text());
    Ok(())
}
