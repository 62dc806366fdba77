//! Process-boundary adapter for environments implemented elsewhere.
//!
//! Every message is a frame `[len: u32 LE][payload; len]`. A payload starts
//! with the 4-byte magic `SGEP`, the version byte and an opcode byte,
//! followed by the body. Floats are `f64` little-endian.
//!
//! | request           | body                    | reply        | body                                             |
//! |-------------------|-------------------------|--------------|--------------------------------------------------|
//! | `0x01` HELLO      | –                       | `0x81` SPEC  | `|S|` u32, `|A|` u32, max steps u32, low[A], high[A] |
//! | `0x02` SEED       | seed u64                | `0x82` ACK   | –                                                |
//! | `0x03` RESET      | –                       | `0x83` STATE | state[S]                                         |
//! | `0x04` STEP       | action[A] (native units)| `0x84` STEP  | state[S], reward f64, done u8                    |
//! | `0x05` CLOSE      | –                       | `0x85` BYE   | –                                                |
//!
//! The done byte is 0 while running, 1 on a terminal state and 2 when the
//! episode ended on its time limit. Any request may instead be answered with
//! `0xFF` ERROR carrying a UTF-8 message.

use std::io::{BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::{check_action, EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};

pub const PROTOCOL_MAGIC: &[u8; 4] = b"SGEP";
pub const PROTOCOL_VERSION: u8 = 1;
const MAX_FRAME: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Hello = 0x01,
    Seed = 0x02,
    Reset = 0x03,
    Step = 0x04,
    Close = 0x05,
    Spec = 0x81,
    Ack = 0x82,
    State = 0x83,
    StepResult = 0x84,
    Bye = 0x85,
    Error = 0xFF,
}

impl Opcode {
    fn from_byte(b: u8) -> Option<Self> {
        use Opcode::*;
        Some(match b {
            0x01 => Hello,
            0x02 => Seed,
            0x03 => Reset,
            0x04 => Step,
            0x05 => Close,
            0x81 => Spec,
            0x82 => Ack,
            0x83 => State,
            0x84 => StepResult,
            0x85 => Bye,
            0xFF => Error,
            _ => return None,
        })
    }
}

fn write_frame<W: Write>(w: &mut W, op: Opcode, body: &[u8]) -> Result<()> {
    let len = (PROTOCOL_MAGIC.len() + 2 + body.len()) as u32;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(PROTOCOL_MAGIC)?;
    w.write_all(&[PROTOCOL_VERSION, op as u8])?;
    w.write_all(body)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
fn read_frame<R: Read>(r: &mut R) -> Result<Option<(Opcode, Vec<u8>)>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len);
    if !(6..=MAX_FRAME).contains(&len) {
        return Err(Error::Protocol(format!("frame length {len} out of range")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    if &payload[..4] != PROTOCOL_MAGIC {
        return Err(Error::Protocol("bad magic".into()));
    }
    if payload[4] != PROTOCOL_VERSION {
        return Err(Error::Protocol(format!("unsupported protocol version {}", payload[4])));
    }
    let op = Opcode::from_byte(payload[5])
        .ok_or_else(|| Error::Protocol(format!("unknown opcode {:#04x}", payload[5])))?;
    payload.drain(..6);
    Ok(Some((op, payload)))
}

fn push_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Protocol("message body too short".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Protocol(format!("{} unexpected trailing bytes", self.bytes.len())))
        }
    }
}

fn encode_spec(spec: &EnvSpec) -> Vec<u8> {
    let mut body = Vec::new();
    body.extend_from_slice(&(spec.state_dim as u32).to_le_bytes());
    body.extend_from_slice(&(spec.action_dim as u32).to_le_bytes());
    body.extend_from_slice(&(spec.max_episode_steps as u32).to_le_bytes());
    push_f64s(&mut body, &spec.action_low);
    push_f64s(&mut body, &spec.action_high);
    body
}

fn decode_spec(body: &[u8]) -> Result<EnvSpec> {
    let mut c = Cursor { bytes: body };
    let state_dim = c.u32()? as usize;
    let action_dim = c.u32()? as usize;
    let max_episode_steps = c.u32()? as usize;
    let action_low = c.f64s(action_dim)?;
    let action_high = c.f64s(action_dim)?;
    c.finish()?;
    let spec = EnvSpec {
        state_dim,
        action_dim,
        action_low,
        action_high,
        max_episode_steps,
    };
    spec.validate()?;
    Ok(spec)
}

fn is_unit_box(spec: &EnvSpec) -> bool {
    spec.action_low.iter().all(|&l| l == -1.0) && spec.action_high.iter().all(|&h| h == 1.0)
}

fn to_native(spec: &EnvSpec, action: &[f64]) -> Vec<f64> {
    if is_unit_box(spec) {
        return action.to_vec();
    }
    action
        .iter()
        .zip(spec.action_low.iter().zip(&spec.action_high))
        .map(|(a, (lo, hi))| lo + (a + 1.0) * 0.5 * (hi - lo))
        .collect()
}

fn from_native(spec: &EnvSpec, native: &[f64]) -> Vec<f64> {
    if is_unit_box(spec) {
        return native.to_vec();
    }
    native
        .iter()
        .zip(spec.action_low.iter().zip(&spec.action_high))
        .map(|(x, (lo, hi))| (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0 + 1e-12, 1.0 - 1e-12))
        .collect()
}

/// Read/write halves of a spawned child process.
pub struct ChildPipe {
    child: Child,
    reader: BufReader<ChildStdout>,
    writer: Option<BufWriter<ChildStdin>>,
}

impl Read for ChildPipe {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.reader.read(buf)
    }
}

impl Write for ChildPipe {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.writer.as_mut().expect("open pipe").write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.writer.as_mut().expect("open pipe").flush()
    }
}

impl Drop for ChildPipe {
    fn drop(&mut self) {
        // closing stdin lets the child see end of stream and exit
        drop(self.writer.take());
        let _ = self.child.wait();
    }
}

/// Client side of the adapter. Rescales `(-1, 1)` actions to the remote
/// action box and enforces the episode limit locally.
pub struct ExternalEnv<S: Read + Write> {
    stream: S,
    spec: EnvSpec,
    steps: usize,
    finished: Option<bool>,
}

impl<S: Read + Write> ExternalEnv<S> {
    /// Performs the HELLO handshake. When `expected` dimensions are given,
    /// a remote spec that disagrees is a construction error.
    pub fn connect(mut stream: S, expected: Option<(usize, usize)>) -> Result<Self> {
        write_frame(&mut stream, Opcode::Hello, &[])?;
        let body = expect_reply(&mut stream, Opcode::Spec)?;
        let spec = decode_spec(&body)?;
        if let Some((state_dim, action_dim)) = expected {
            spec.expect_dims(state_dim, action_dim)?;
        }
        Ok(ExternalEnv {
            stream,
            spec,
            steps: 0,
            finished: None,
        })
    }

    /// Sends CLOSE and waits for the acknowledgement.
    pub fn close(mut self) -> Result<()> {
        write_frame(&mut self.stream, Opcode::Close, &[])?;
        expect_reply(&mut self.stream, Opcode::Bye).map(|_| ())
    }
}

impl ExternalEnv<ChildPipe> {
    /// Spawns `command` and speaks the protocol over its stdin/stdout.
    pub fn spawn(mut command: Command, expected: Option<(usize, usize)>) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let pipe = ChildPipe {
            child,
            reader: BufReader::new(stdout),
            writer: Some(BufWriter::new(stdin)),
        };
        Self::connect(pipe, expected)
    }
}

fn expect_reply<S: Read>(stream: &mut S, want: Opcode) -> Result<Vec<u8>> {
    match read_frame(stream)? {
        Some((op, body)) if op == want => Ok(body),
        Some((Opcode::Error, body)) => Err(Error::Protocol(format!(
            "remote error: {}",
            String::from_utf8_lossy(&body)
        ))),
        Some((op, _)) => Err(Error::Protocol(format!("expected {want:?}, got {op:?}"))),
        None => Err(Error::Protocol("connection closed".into())),
    }
}

impl<S: Read + Write> Environment for ExternalEnv<S> {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) -> Result<()> {
        write_frame(&mut self.stream, Opcode::Seed, &seed.to_le_bytes())?;
        expect_reply(&mut self.stream, Opcode::Ack).map(|_| ())
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        write_frame(&mut self.stream, Opcode::Reset, &[])?;
        let body = expect_reply(&mut self.stream, Opcode::State)?;
        let mut c = Cursor { bytes: &body };
        let state = c.f64s(self.spec.state_dim)?;
        c.finish()?;
        self.steps = 0;
        self.finished = Some(false);
        Ok(state)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        match self.finished {
            None => return Err(Error::Validation("step called before reset".into())),
            Some(true) => return Err(Error::Validation("episode already finished; reset first".into())),
            Some(false) => {}
        }
        check_action(action, self.spec.action_dim)?;
        let native = to_native(&self.spec, action);
        let mut body = Vec::with_capacity(8 * native.len());
        push_f64s(&mut body, &native);
        write_frame(&mut self.stream, Opcode::Step, &body)?;
        let reply = expect_reply(&mut self.stream, Opcode::StepResult)?;
        let mut c = Cursor { bytes: &reply };
        let next_state = c.f64s(self.spec.state_dim)?;
        let reward = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
        let flag = c.take(1)?[0];
        c.finish()?;
        self.steps += 1;
        let (mut done, mut truncated) = match flag {
            0 => (false, false),
            1 => (true, false),
            2 => (true, true),
            other => return Err(Error::Protocol(format!("invalid done byte {other}"))),
        };
        if !done && self.steps >= self.spec.max_episode_steps {
            done = true;
            truncated = true;
        }
        self.finished = Some(done);
        Ok(StepResult {
            next_state,
            extrinsic_reward: reward,
            done,
            truncated,
        })
    }
}

/// Server side: answers requests for `env` until CLOSE or end of stream.
///
/// Incoming STEP actions are in native units and are mapped back to the
/// `(-1, 1)` box before reaching `env`.
pub fn serve<E: Environment, S: Read + Write>(env: &mut E, stream: &mut S) -> Result<()> {
    while let Some((op, body)) = read_frame(stream)? {
        let outcome: Result<(Opcode, Vec<u8>)> = (|| match op {
            Opcode::Hello => Ok((Opcode::Spec, encode_spec(env.spec()))),
            Opcode::Seed => {
                let mut c = Cursor { bytes: &body };
                let seed = c.u64()?;
                c.finish()?;
                env.seed(seed)?;
                Ok((Opcode::Ack, Vec::new()))
            }
            Opcode::Reset => {
                let mut out = Vec::new();
                push_f64s(&mut out, &env.reset()?);
                Ok((Opcode::State, out))
            }
            Opcode::Step => {
                let spec = env.spec().clone();
                let mut c = Cursor { bytes: &body };
                let native = c.f64s(spec.action_dim)?;
                c.finish()?;
                let unit = from_native(&spec, &native);
                let r = env.step(&unit)?;
                let mut out = Vec::new();
                push_f64s(&mut out, &r.next_state);
                out.extend_from_slice(&r.extrinsic_reward.to_le_bytes());
                out.push(match (r.done, r.truncated) {
                    (false, _) => 0,
                    (true, false) => 1,
                    (true, true) => 2,
                });
                Ok((Opcode::StepResult, out))
            }
            Opcode::Close => Ok((Opcode::Bye, Vec::new())),
            other => Err(Error::Protocol(format!("unexpected request {other:?}"))),
        })();
        match outcome {
            Ok((reply, body)) => {
                write_frame(stream, reply, &body)?;
                if reply == Opcode::Bye {
                    return Ok(());
                }
            }
            Err(e) => write_frame(stream, Opcode::Error, e.to_string().as_bytes())?,
        }
    }
    Ok(())
}
