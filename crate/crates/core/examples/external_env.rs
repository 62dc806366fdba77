//! Drives an environment through the process-boundary protocol. The server
//! here is the built-in maze on a socket pair; a Mujoco-backed server would
//! speak the same frames (see `skill-guidance serve-maze` and `--env-cmd`).

use std::os::unix::net::UnixStream;
use std::thread;

use skill_guidance::env::{serve, Environment, ExternalEnv, PointMaze};

fn main() -> skill_guidance::Result<()> {
    let (client, mut server) = UnixStream::pair()?;
    let handle = thread::spawn(move || serve(&mut PointMaze::new(50, false, 0), &mut server));

    let mut env = ExternalEnv::connect(client, Some((2, 2)))?;
    println!("remote spec: {:?}", env.spec());
    env.seed(3)?;
    let mut state = env.reset()?;
    println!("start {state:.3?}");
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        let step = env.step(&[0.5, -0.9])?;
        total += step.extrinsic_reward;
        steps += 1;
        state = step.next_state;
        if step.done {
            println!("episode over after {steps} steps (truncated: {})", step.truncated);
            break;
        }
    }
    println!("final state {state:.3?}, return {total:.3}");
    env.close()?;
    handle.join().expect("server thread")?;
    Ok(())
}
