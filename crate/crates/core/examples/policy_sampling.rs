//! The tanh-squashed Gaussian-mixture policy: its three action modes and
//! the log-density of what it samples.

use skill_guidance::approx::{ActionMode, GmmPolicy};
use skill_guidance::nn::Mat;
use skill_guidance::seeding::component_rng;

fn main() -> skill_guidance::Result<()> {
    let mut rng = component_rng(0, "example-policy");
    // |S| = 2, K = 3 skills, |A| = 2, 4 components, width 32
    let policy = GmmPolicy::new(2, 3, 2, 4, 32, 1.0, &mut rng);
    let states = Mat::from_rows(&[[0.5, 0.5], [0.5, 0.5], [0.2, 0.8]]);
    let skills = [0, 1, 2];

    for mode in [ActionMode::Deterministic, ActionMode::Stochastic, ActionMode::Reparameterized] {
        let sample = policy.sample(&states, &skills, mode, &mut rng)?;
        println!("{mode:?}");
        for r in 0..states.rows {
            println!(
                "  skill {}  action {:+.4?}  log pi {:+.3}",
                skills[r],
                sample.actions.row(r),
                sample.log_probs[r]
            );
        }
    }

    let again = policy.sample(&states, &skills, ActionMode::Deterministic, &mut rng)?;
    let first = policy.sample(&states, &skills, ActionMode::Deterministic, &mut rng)?;
    assert_eq!(again.actions, first.actions);
    println!("deterministic actions do not consume randomness");
    Ok(())
}
