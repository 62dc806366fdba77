#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_skill-guidance");

/// Small networks and short epochs so every command finishes in seconds.
pub const TINY: &[&str] = &[
    "--set",
    "hidden_width=16",
    "--set",
    "batch_size=32",
    "--set",
    "env_steps_per_epoch=200",
    "--set",
    "train_steps_per_epoch=20",
    "--set",
    "pretrain_max_steps=300",
];

pub fn cli(root: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SKILL_GUIDANCE_OUT", root)
        .current_dir(root)
        .output()
        .expect("binary runs")
}

pub fn ok(root: &Path, args: &[&str]) -> String {
    let out = cli(root, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn with_tiny<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut all = args.to_vec();
    all.extend_from_slice(TINY);
    all
}
