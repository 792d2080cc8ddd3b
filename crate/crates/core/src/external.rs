//! Out-of-process models speaking a newline-delimited text protocol.
//!
//! ```text
//! tool  -> HELLO 1
//! model -> OK <p>
//! tool  -> EVAL <x_1> ... <x_p> <noise-seed-u64>
//! model -> <decimal float>
//! ```
//!
//! Numbers are sent with 17 significant digits. The model derives its own
//! noise from the seed, so equal seeds must give equal outputs. Each worker
//! thread gets its own subprocess; sessions are pooled and never shared by
//! two evaluations at once.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{InputSpec, StochasticModel};
use crate::rng::NoiseStream;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

fn protocol(request: &str, message: impl Into<String>) -> Error {
    Error::Protocol {
        request: request.to_string(),
        message: message.into(),
    }
}

struct Session {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    replies: Receiver<std::io::Result<String>>,
}

impl Session {
    fn spawn(command: &[String]) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| protocol("", "empty command line"))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| protocol("", format!("cannot spawn {program:?}: {e}")))?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, replies) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            replies,
        })
    }

    fn request(&mut self, line: &str, timeout: Duration) -> Result<String> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| protocol(line, "session closed"))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| protocol(line, format!("write failed: {e}")))?;
        match self.replies.recv_timeout(timeout) {
            Ok(Ok(reply)) => Ok(reply.trim().to_string()),
            Ok(Err(e)) => Err(protocol(line, format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(protocol(line, format!("no reply within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => Err(protocol(line, "model closed its output")),
        }
    }

    fn handshake(&mut self, timeout: Duration) -> Result<usize> {
        let hello = format!("HELLO {PROTOCOL_VERSION}");
        let reply = self.request(&hello, timeout)?;
        reply
            .strip_prefix("OK ")
            .and_then(|p| p.trim().parse::<usize>().ok())
            .filter(|&p| p >= 1)
            .ok_or_else(|| protocol(&hello, format!("bad handshake reply {reply:?}")))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A model run as a subprocess.
pub struct ExternalModel {
    command: Vec<String>,
    inputs: InputSpec,
    timeout: Duration,
    idle: Mutex<Vec<Session>>,
}

impl ExternalModel {
    /// Spawns the model and performs the handshake. Without `inputs`, every
    /// coordinate is standard normal.
    pub fn connect(
        command: Vec<String>,
        inputs: Option<InputSpec>,
        timeout: Duration,
    ) -> Result<Self> {
        let mut session = Session::spawn(&command)?;
        let p = session.handshake(timeout)?;
        let inputs = match inputs {
            Some(spec) if spec.dimension() != p => {
                return Err(protocol(
                    &format!("HELLO {PROTOCOL_VERSION}"),
                    format!(
                        "model reports p={p} but {} input laws were configured",
                        spec.dimension()
                    ),
                ))
            }
            Some(spec) => spec,
            None => InputSpec::standard_normal(p)?,
        };
        Ok(ExternalModel {
            command,
            inputs,
            timeout,
            idle: Mutex::new(vec![session]),
        })
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    fn checkout(&self) -> Result<Session> {
        if let Some(s) = self.idle.lock().expect("session pool").pop() {
            return Ok(s);
        }
        let mut session = Session::spawn(&self.command)?;
        let p = session.handshake(self.timeout)?;
        if p != self.inputs.dimension() {
            return Err(protocol(
                "HELLO 1",
                format!("model changed its dimension to {p}"),
            ));
        }
        Ok(session)
    }

    /// Request line for one evaluation.
    pub fn eval_request(x: &[f64], seed: u64) -> String {
        let mut line = String::from("EVAL");
        for v in x {
            line.push(' ');
            line.push_str(&format!("{v:.16e}"));
        }
        line.push(' ');
        line.push_str(&seed.to_string());
        line
    }
}

impl StochasticModel for ExternalModel {
    fn name(&self) -> String {
        format!("external({})", self.command.join(" "))
    }

    fn inputs(&self) -> &InputSpec {
        &self.inputs
    }

    fn evaluate(&self, x: &[f64], noise: &mut NoiseStream) -> Result<f64> {
        let request = Self::eval_request(x, noise.next_u64());
        let mut session = self.checkout()?;
        let reply = session.request(&request, self.timeout)?;
        let value: f64 = reply
            .parse()
            .map_err(|_| protocol(&request, format!("malformed number {reply:?}")))?;
        if !value.is_finite() {
            return Err(protocol(&request, format!("non-finite output {reply:?}")));
        }
        self.idle.lock().expect("session pool").push(session);
        Ok(value)
    }
}
