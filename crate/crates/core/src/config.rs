//! Experiment configuration and its flat `key = value` file format.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key must be known; unknown or repeated keys are rejected.
//!
//! ```text
//! name = maze-guided
//! seed = 7
//! num_skills = 10
//! embedding_dim = 1
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub name: String,
    pub seed: u64,
    /// Number of discrete skills `K`.
    pub num_skills: usize,
    /// Rows of the projection matrix.
    pub embedding_dim: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    /// When false the discriminator sees raw states (baseline mode).
    pub use_projection: bool,
    /// Standardize states before projecting them.
    pub standardize: bool,
    /// Entropy bonus weight `alpha`.
    pub entropy_weight: f64,
    pub discount: f64,
    pub polyak_rate: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub env_steps_per_epoch: usize,
    pub train_steps_per_epoch: usize,
    pub lr_policy: f64,
    pub lr_q: f64,
    pub lr_discriminator: f64,
    pub lr_classifier: f64,
    pub gmm_components: usize,
    pub gumbel_temperature: f64,
    /// Width of both hidden layers in every MLP.
    pub hidden_width: usize,
    /// Episode horizon of the built-in maze.
    pub horizon: usize,
    /// Use one start-noise draw for both maze axes instead of one per axis.
    pub shared_start_noise: bool,
    /// Epoch budget for reference-policy training.
    pub ref_epochs: usize,
    /// Reference training stops once the evaluation return reaches this
    /// fraction of the analytic optimum.
    pub ref_early_stop: f64,
    /// Evaluation episodes per reference-training epoch.
    pub ref_eval_episodes: usize,
    /// Trajectories per label when collecting the labeled dataset.
    pub n_traj: usize,
    pub pretrain_max_steps: usize,
    pub pretrain_patience: usize,
    pub pretrain_min_improvement: f64,
    /// Evaluate every n-th epoch during skill training (0 disables).
    pub eval_every: usize,
    /// Rollouts per skill in `eval`.
    pub eval_rollouts: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            name: "point-maze".into(),
            seed: 0,
            num_skills: 10,
            embedding_dim: 1,
            state_dim: 2,
            action_dim: 2,
            use_projection: true,
            standardize: true,
            entropy_weight: 0.1,
            discount: 0.99,
            polyak_rate: 0.005,
            buffer_capacity: 1_000_000,
            batch_size: 256,
            epochs: 100,
            env_steps_per_epoch: 1000,
            train_steps_per_epoch: 1000,
            lr_policy: 3e-4,
            lr_q: 3e-4,
            lr_discriminator: 3e-4,
            lr_classifier: 3e-4,
            gmm_components: 4,
            gumbel_temperature: 1.0,
            hidden_width: 300,
            horizon: 100,
            shared_start_noise: false,
            ref_epochs: 100,
            ref_early_stop: 0.97,
            ref_eval_episodes: 5,
            n_traj: 10,
            pretrain_max_steps: 20_000,
            pretrain_patience: 50,
            pretrain_min_improvement: 1e-5,
            eval_every: 1,
            eval_rollouts: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key {key}")))
}

macro_rules! config_keys {
    ($($field:ident),* $(,)?) => {
        /// Every key accepted in a config file, in canonical order.
        pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

        /// Sets one field from its textual form.
        pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
            match key {
                $(stringify!($field) => self.$field = parse(key, value)?,)*
                _ => return Err(Error::Config(format!("unknown key {key:?}"))),
            }
            Ok(())
        }

        fn write_fields(&self, out: &mut String) {
            $(let _ = writeln!(out, "{} = {}", stringify!($field), self.$field);)*
        }
    };
}

impl Config {
    config_keys!(
        name,
        seed,
        num_skills,
        embedding_dim,
        state_dim,
        action_dim,
        use_projection,
        standardize,
        entropy_weight,
        discount,
        polyak_rate,
        buffer_capacity,
        batch_size,
        epochs,
        env_steps_per_epoch,
        train_steps_per_epoch,
        lr_policy,
        lr_q,
        lr_discriminator,
        lr_classifier,
        gmm_components,
        gumbel_temperature,
        hidden_width,
        horizon,
        shared_start_noise,
        ref_epochs,
        ref_early_stop,
        ref_eval_episodes,
        n_traj,
        pretrain_max_steps,
        pretrain_patience,
        pretrain_min_improvement,
        eval_every,
        eval_rollouts,
    );

    /// Parses the flat key-value format on top of the defaults and validates the result.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
            config.set(key, value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Canonical serialization; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_fields(&mut out);
        out
    }

    /// Hex SHA-256 of the canonical text, truncated to 16 characters.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_skills", self.num_skills),
            ("embedding_dim", self.embedding_dim),
            ("state_dim", self.state_dim),
            ("action_dim", self.action_dim),
            ("buffer_capacity", self.buffer_capacity),
            ("batch_size", self.batch_size),
            ("gmm_components", self.gmm_components),
            ("hidden_width", self.hidden_width),
            ("horizon", self.horizon),
            ("env_steps_per_epoch", self.env_steps_per_epoch),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{key} must be at least 1")));
            }
        }
        if self.use_projection && self.embedding_dim >= self.state_dim {
            return Err(Error::Config(format!(
                "embedding_dim ({}) must be strictly smaller than state_dim ({})",
                self.embedding_dim, self.state_dim
            )));
        }
        if !(self.entropy_weight > 0.0 && self.entropy_weight.is_finite()) {
            return Err(Error::Config("entropy_weight must be > 0".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("discount must lie in (0, 1]".into()));
        }
        if !(self.polyak_rate > 0.0 && self.polyak_rate <= 1.0) {
            return Err(Error::Config("polyak_rate must lie in (0, 1]".into()));
        }
        for (key, lr) in [
            ("lr_policy", self.lr_policy),
            ("lr_q", self.lr_q),
            ("lr_discriminator", self.lr_discriminator),
            ("lr_classifier", self.lr_classifier),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{key} must be > 0")));
            }
        }
        if !(self.gumbel_temperature > 0.0 && self.gumbel_temperature.is_finite()) {
            return Err(Error::Config("gumbel_temperature must be > 0".into()));
        }
        if !(self.ref_early_stop > 0.0) {
            return Err(Error::Config("ref_early_stop must be > 0".into()));
        }
        Ok(())
    }

    /// Number of epochs covering `steps` environment interactions.
    pub fn epochs_for_steps(&self, steps: usize) -> usize {
        steps.div_ceil(self.env_steps_per_epoch)
    }
}
