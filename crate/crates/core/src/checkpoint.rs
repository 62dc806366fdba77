//! Checkpoint directories.
//!
//! A checkpoint is a directory holding `manifest.txt`, the canonical
//! `config.txt`, one parameter blob per network and optimizer, and for skill
//! runs the projection and the replay buffer (so a run can resume exactly).
//!
//! Parameter blob layout (little-endian):
//!
//! ```text
//! magic    4 bytes  "SGPB"
//! version  u8       1
//! ndims    u32
//! dims     ndims x u64   layer sizes for a network, [len] for a flat vector
//! len      u64
//! values   len x f64
//! ```
//!
//! The manifest is `key=value` lines. `content` is the truncated SHA-256 of
//! every other file in the directory (sorted by name), so any edited or
//! truncated blob is caught on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::approx::{GmmPolicy, LinearProjection, QFunction, SkillDiscriminator};
use crate::buffer::{ReplayBuffer, Transition, TransitionShape};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::nn::{Adam, Mlp};
use crate::sac::SacTrainer;
use crate::skill::{SkillPrior, SkillTrainer};

pub const BLOB_MAGIC: &[u8; 4] = b"SGPB";
pub const BUFFER_MAGIC: &[u8; 4] = b"SGRB";
pub const FORMAT_VERSION: u8 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONFIG_FILE: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    Reference,
    Skills,
}

impl CheckpointKind {
    fn as_str(self) -> &'static str {
        match self {
            CheckpointKind::Reference => "reference",
            CheckpointKind::Skills => "skills",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub kind: CheckpointKind,
    pub config_hash: String,
    pub seed: u64,
    pub epoch: usize,
    pub env_steps: u64,
    pub crate_version: String,
    /// Hash over the other files of the checkpoint.
    pub content: String,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        format!(
            "format=skill-guidance-checkpoint {FORMAT_VERSION}\nkind={}\nconfig_hash={}\nseed={}\nepoch={}\nenv_steps={}\ncrate_version={}\ncontent={}\n",
            self.kind.as_str(),
            self.config_hash,
            self.seed,
            self.epoch,
            self.env_steps,
            self.crate_version,
            self.content
        )
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::artifact(path, format!("manifest line without '=': {line:?}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::artifact(path, format!("manifest is missing {k}")))
        };
        let expected_format = format!("skill-guidance-checkpoint {FORMAT_VERSION}");
        if get("format")? != expected_format {
            return Err(Error::artifact(path, format!("unsupported format {:?}", get("format")?)));
        }
        let kind = match get("kind")? {
            "reference" => CheckpointKind::Reference,
            "skills" => CheckpointKind::Skills,
            other => return Err(Error::artifact(path, format!("unknown checkpoint kind {other:?}"))),
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::artifact(path, format!("manifest field {k} is not an integer")))
        };
        Ok(Manifest {
            kind,
            config_hash: get("config_hash")?.to_string(),
            seed: num("seed")?,
            epoch: num("epoch")? as usize,
            env_steps: num("env_steps")?,
            crate_version: get("crate_version")?.to_string(),
            content: get("content")?.to_string(),
        })
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_text(&text, &path)
    }
}

pub fn encode_blob(dims: &[usize], values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 1 + 4 + 8 * dims.len() + 8 + 8 * values.len());
    out.extend_from_slice(BLOB_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("truncated")?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("length overflow")?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> std::result::Result<(), String> {
        if self.at == self.bytes.len() {
            Ok(())
        } else {
            Err(format!("{} trailing bytes", self.bytes.len() - self.at))
        }
    }
}

pub fn decode_blob(bytes: &[u8]) -> std::result::Result<(Vec<usize>, Vec<f64>), String> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != BLOB_MAGIC {
        return Err("bad magic".into());
    }
    let version = c.u8()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let ndims = c.u32()? as usize;
    if ndims > 64 {
        return Err(format!("implausible rank {ndims}"));
    }
    let dims = (0..ndims).map(|_| c.u64().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
    let len = c.u64()? as usize;
    let values = c.f64s(len)?;
    c.finish()?;
    Ok((dims, values))
}

fn encode_buffer(buffer: &ReplayBuffer) -> Vec<u8> {
    let shape = buffer.shape();
    let (slots, cursor) = buffer.slots();
    let mut out = Vec::new();
    out.extend_from_slice(BUFFER_MAGIC);
    out.push(FORMAT_VERSION);
    for d in [shape.state_dim, shape.action_dim, shape.num_skills] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for n in [buffer.capacity(), cursor, slots.len()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for t in slots {
        out.extend(t.state.iter().flat_map(|v| v.to_le_bytes()));
        out.extend_from_slice(&(t.skill as u32).to_le_bytes());
        out.extend(t.action.iter().flat_map(|v| v.to_le_bytes()));
        out.extend(t.next_state.iter().flat_map(|v| v.to_le_bytes()));
        out.extend_from_slice(&t.extrinsic_reward.to_le_bytes());
        out.push(t.done as u8);
    }
    out
}

fn decode_buffer(bytes: &[u8]) -> std::result::Result<ReplayBuffer, String> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != BUFFER_MAGIC {
        return Err("bad magic".into());
    }
    let version = c.u8()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let shape = TransitionShape {
        state_dim: c.u32()? as usize,
        action_dim: c.u32()? as usize,
        num_skills: c.u32()? as usize,
    };
    let capacity = c.u64()? as usize;
    let cursor = c.u64()? as usize;
    let len = c.u64()? as usize;
    let record = 8 * (2 * shape.state_dim + shape.action_dim + 1) + 4 + 1;
    if len.checked_mul(record) != Some(bytes.len() - c.at) {
        return Err(format!("{len} transitions do not fit the remaining {} bytes", bytes.len() - c.at));
    }
    let mut storage = Vec::with_capacity(len);
    for _ in 0..len {
        let state = c.f64s(shape.state_dim)?;
        let skill = c.u32()? as usize;
        let action = c.f64s(shape.action_dim)?;
        let next_state = c.f64s(shape.state_dim)?;
        let extrinsic_reward = c.f64()?;
        let done = match c.u8()? {
            0 => false,
            1 => true,
            b => return Err(format!("bad done flag {b}")),
        };
        storage.push(Transition {
            state,
            skill,
            action,
            next_state,
            extrinsic_reward,
            done,
        });
    }
    c.finish()?;
    ReplayBuffer::from_slots(capacity, shape, storage, cursor).map_err(|e| e.to_string())
}

/// Files collected in memory and written out together.
#[derive(Default)]
struct Writer {
    files: BTreeMap<String, Vec<u8>>,
}

impl Writer {
    fn net(&mut self, name: &str, net: &Mlp) {
        self.files.insert(format!("{name}.bin"), encode_blob(net.sizes(), net.params()));
    }

    fn adam(&mut self, name: &str, opt: &Adam) {
        let state = opt.state();
        self.files.insert(format!("{name}.adam"), encode_blob(&[state.len()], &state));
    }

    fn finish(mut self, dir: &Path, kind: CheckpointKind, config: &Config, epoch: usize, env_steps: u64) -> Result<Manifest> {
        self.files.insert(CONFIG_FILE.into(), config.to_text().into_bytes());
        let manifest = Manifest {
            kind,
            config_hash: config.hash(),
            seed: config.seed,
            epoch,
            env_steps,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            content: content_hash(self.files.iter().map(|(k, v)| (k.as_str(), v.as_slice()))),
        };
        self.files.insert(MANIFEST_FILE.into(), manifest.to_text().into_bytes());

        // Write beside the target, then swap it in, so an interrupted save
        // never leaves a half-written checkpoint under the final name.
        let staging = sibling(dir, "partial");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        for (name, bytes) in &self.files {
            let path = staging.join(name);
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        }
        if dir.exists() {
            let old = sibling(dir, "old");
            if old.exists() {
                fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
            }
            fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
            fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        } else {
            fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(manifest)
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "checkpoint".into());
    name.push(format!(".{suffix}"));
    dir.with_file_name(name)
}

fn content_hash<'a>(files: impl Iterator<Item = (&'a str, &'a [u8])>) -> String {
    let mut hasher = Sha256::new();
    for (name, bytes) in files {
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// A loaded, integrity-checked checkpoint directory.
pub struct Reader {
    dir: PathBuf,
    pub manifest: Manifest,
    pub config: Config,
    files: BTreeMap<String, Vec<u8>>,
}

impl Reader {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(Error::artifact(&dir, "checkpoint directory does not exist"));
        }
        let manifest = Manifest::read(&dir)?;
        let mut files = BTreeMap::new();
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST_FILE {
                continue;
            }
            let mut bytes = Vec::new();
            let path = entry.path();
            fs::File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(&path, e))?;
            files.insert(name, bytes);
        }
        let actual = content_hash(files.iter().map(|(k, v)| (k.as_str(), v.as_slice())));
        if actual != manifest.content {
            return Err(Error::artifact(
                &dir,
                format!("content hash {actual} does not match manifest {}", manifest.content),
            ));
        }
        let config_text = std::str::from_utf8(files.get(CONFIG_FILE).map(Vec::as_slice).unwrap_or_default())
            .map_err(|_| Error::artifact(dir.join(CONFIG_FILE), "not UTF-8"))?;
        let config = Config::from_text(config_text).map_err(|e| Error::artifact(dir.join(CONFIG_FILE), e.to_string()))?;
        if config.hash() != manifest.config_hash {
            return Err(Error::artifact(&dir, "config hash does not match manifest"));
        }
        Ok(Reader {
            dir,
            manifest,
            config,
            files,
        })
    }

    fn bytes(&self, name: &str) -> Result<&[u8]> {
        self.files
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::artifact(self.dir.join(name), "missing from checkpoint"))
    }

    fn blob(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        decode_blob(self.bytes(name)?).map_err(|r| Error::artifact(self.dir.join(name), r))
    }

    fn net(&self, name: &str) -> Result<Mlp> {
        let file = format!("{name}.bin");
        let (sizes, params) = self.blob(&file)?;
        Mlp::from_params(&sizes, params).map_err(|e| Error::artifact(self.dir.join(&file), e.to_string()))
    }

    fn adam_into(&self, name: &str, opt: &mut Adam) -> Result<()> {
        let file = format!("{name}.adam");
        let (_, state) = self.blob(&file)?;
        opt.restore(&state).map_err(|e| Error::artifact(self.dir.join(&file), e.to_string()))
    }

    fn wrap<T>(&self, r: Result<T>) -> Result<T> {
        r.map_err(|e| match e {
            Error::Validation(reason) => Error::artifact(&self.dir, reason),
            other => other,
        })
    }

    fn sac(&self, num_skills: usize) -> Result<SacTrainer> {
        let c = &self.config;
        let policy = self.wrap(GmmPolicy::from_net(
            self.net("policy")?,
            c.state_dim,
            num_skills,
            c.action_dim,
            c.gmm_components,
            c.gumbel_temperature,
        ))?;
        let q = |name: &str| -> Result<QFunction> {
            self.wrap(QFunction::from_net(self.net(name)?, c.state_dim, num_skills, c.action_dim))
        };
        let mut sac = SacTrainer::from_parts(policy, [q("q1")?, q("q2")?], c);
        sac.q_target = [q("q1_target")?, q("q2_target")?];
        self.adam_into("policy", &mut sac.policy_opt)?;
        self.adam_into("q1", &mut sac.q_opt[0])?;
        self.adam_into("q2", &mut sac.q_opt[1])?;
        Ok(sac)
    }

    fn expect(&self, kind: CheckpointKind) -> Result<()> {
        if self.manifest.kind != kind {
            return Err(Error::artifact(
                &self.dir,
                format!("expected a {} checkpoint, found {}", kind.as_str(), self.manifest.kind.as_str()),
            ));
        }
        Ok(())
    }
}

fn write_sac(w: &mut Writer, sac: &SacTrainer) {
    w.net("policy", sac.policy.net());
    w.net("q1", sac.q[0].net());
    w.net("q2", sac.q[1].net());
    w.net("q1_target", sac.q_target[0].net());
    w.net("q2_target", sac.q_target[1].net());
    w.adam("policy", &sac.policy_opt);
    w.adam("q1", &sac.q_opt[0]);
    w.adam("q2", &sac.q_opt[1]);
}

/// Saves a single-skill reference policy with its critics.
pub fn save_reference(dir: impl AsRef<Path>, config: &Config, sac: &SacTrainer, epoch: usize, env_steps: u64) -> Result<Manifest> {
    let mut w = Writer::default();
    write_sac(&mut w, sac);
    w.finish(dir.as_ref(), CheckpointKind::Reference, config, epoch, env_steps)
}

pub struct ReferenceCheckpoint {
    pub manifest: Manifest,
    pub config: Config,
    pub trainer: SacTrainer,
}

pub fn load_reference(dir: impl AsRef<Path>) -> Result<ReferenceCheckpoint> {
    let r = Reader::open(dir)?;
    r.expect(CheckpointKind::Reference)?;
    let trainer = r.sac(1)?;
    Ok(ReferenceCheckpoint {
        trainer,
        manifest: r.manifest,
        config: r.config,
    })
}

pub fn save_skills(dir: impl AsRef<Path>, trainer: &SkillTrainer) -> Result<Manifest> {
    let mut w = Writer::default();
    write_sac(&mut w, &trainer.sac);
    w.net("discriminator", trainer.discriminator.net());
    w.adam("discriminator", &trainer.disc_opt);
    w.files.insert("projection.txt".into(), trainer.projection.to_text().into_bytes());
    w.files.insert("buffer.bin".into(), encode_buffer(&trainer.buffer));
    w.finish(dir.as_ref(), CheckpointKind::Skills, &trainer.config, trainer.epoch, trainer.env_steps)
}

pub fn load_skills(dir: impl AsRef<Path>) -> Result<(Manifest, SkillTrainer)> {
    let r = Reader::open(dir)?;
    r.expect(CheckpointKind::Skills)?;
    let c = &r.config;
    let sac = r.sac(c.num_skills)?;
    let proj_path = r.dir.join("projection.txt");
    let proj_text = std::str::from_utf8(r.bytes("projection.txt")?).map_err(|_| Error::artifact(&proj_path, "not UTF-8"))?;
    let projection = LinearProjection::from_text(proj_text).map_err(|e| Error::artifact(&proj_path, e.to_string()))?;
    let discriminator = SkillDiscriminator::from_net(r.net("discriminator")?);
    if discriminator.input_dim() != projection.embedding_dim() || discriminator.num_skills() != c.num_skills {
        return Err(Error::artifact(&r.dir, "discriminator shape does not fit projection and skill count"));
    }
    let mut disc_opt = Adam::new(discriminator.net().num_params(), c.lr_discriminator);
    r.adam_into("discriminator", &mut disc_opt)?;
    let buffer = decode_buffer(r.bytes("buffer.bin")?).map_err(|e| Error::artifact(r.dir.join("buffer.bin"), e))?;
    let expected = TransitionShape {
        state_dim: c.state_dim,
        action_dim: c.action_dim,
        num_skills: c.num_skills,
    };
    if buffer.shape() != expected {
        return Err(Error::artifact(r.dir.join("buffer.bin"), "buffer shape does not match config"));
    }
    let trainer = SkillTrainer {
        config: c.clone(),
        sac,
        discriminator,
        disc_opt,
        prior: SkillPrior::new(c.num_skills)?,
        projection,
        buffer,
        epoch: r.manifest.epoch,
        env_steps: r.manifest.env_steps,
    };
    Ok((r.manifest, trainer))
}
