//! The point maze on its own: a uniform-random walk next to the greedy
//! path toward the reward kernel, and the analytic optimum they compare to.

use rand::Rng;
use skill_guidance::env::{kernel_reward, optimal_return, Environment, PointMaze, KERNEL_CENTER, MAX_DISPLACEMENT};
use skill_guidance::seeding::component_rng;

fn main() -> skill_guidance::Result<()> {
    let mut env = PointMaze::new(100, false, 0);
    env.seed(7)?;
    let mut rng = component_rng(7, "example-actions");

    let start = env.reset()?;
    let mut random_return = 0.0;
    loop {
        let action: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.999..0.999)).collect();
        let step = env.step(&action)?;
        random_return += step.extrinsic_reward;
        if step.done {
            println!("random walk from {start:.3?} ended at {:.3?}", step.next_state);
            break;
        }
    }

    let mut state = env.reset()?;
    let origin = env.position();
    let mut greedy_return = 0.0;
    loop {
        // full speed per axis toward the kernel center, slowing on arrival
        let action: Vec<f64> = (0..2)
            .map(|i| ((KERNEL_CENTER[i] - state[i]) / MAX_DISPLACEMENT).clamp(-0.999, 0.999))
            .collect();
        let step = env.step(&action)?;
        greedy_return += step.extrinsic_reward;
        state = step.next_state;
        if step.done {
            break;
        }
    }
    println!("random return {random_return:.2}");
    println!(
        "greedy return {greedy_return:.2}, analytic optimum {:.2}",
        optimal_return(origin, 100)
    );
    println!("reward at the kernel center: {}", kernel_reward(skill_guidance::env::PointMazeState {
        x: KERNEL_CENTER[0],
        y: KERNEL_CENTER[1],
    }));
    Ok(())
}
