//! Subprocess evaluator protocol.
//!
//! The optimizer launches the evaluator as a child process and exchanges
//! newline-delimited JSON objects over its standard input and output, one object
//! per line, strictly in request order:
//!
//! ```text
//! -> {"type":"hello","protocol":1,"dimension":6}
//! <- {"type":"ready","protocol":1,"dimension":6}
//! -> {"type":"evaluate","id":1,"genome":[0.5,0.1,3.2,7.0,1.5,11.0],"sample_index":0,"seed":912...}
//! <- {"type":"result","id":1,"value":480.0}
//! -> {"type":"evaluate","id":2,...}
//! <- {"type":"result","id":2,"error":"simulation diverged"}
//! -> {"type":"shutdown"}
//! ```
//!
//! Request ids start at 1 and increase by one per request. Every request gets
//! exactly one `result` carrying the same id and either a finite `value` or an
//! `error` string. `seed` is the per-sample seed; evaluators that have their own
//! randomness should use it so repeated runs reproduce. Reals are written in
//! shortest round-trip form, so genomes arrive without loss. After `shutdown` the
//! evaluator should exit with status 0. Anything written to stderr is kept and
//! attached to evaluation errors.
//!
//! A PhysiCell build is wired in with a thin wrapper that reads request lines,
//! writes the six genome values into the scenario's XML settings, runs the binary
//! with the given seed, counts surviving cancer cells from the final output, and
//! prints the `result` line.

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError, SampleRequest};
use crate::genome::{Genome, GenomeError, GenomeKind};

pub const PROTOCOL_VERSION: u32 = 1;

const STDERR_KEEP: usize = 2048;

/// How to launch an external evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Per-response timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    600
}

impl ExternalCommand {
    pub fn new(command: impl Into<String>, args: &[&str]) -> Self {
        ExternalCommand {
            command: command.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRequest {
    pub id: u64,
    pub genome: Vec<f64>,
    pub sample_index: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Lines written by the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello { protocol: u32, dimension: usize },
    Evaluate(ExternalRequest),
    Shutdown,
}

/// Lines written by the evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvaluatorMessage {
    Ready { protocol: u32, dimension: usize },
    Result(ExternalResponse),
}

/// A running evaluator process.
pub struct ExternalSession {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<io::Result<String>>,
    stderr: Arc<Mutex<String>>,
    stderr_thread: Option<JoinHandle<()>>,
    line_no: u64,
    next_id: u64,
    dimension: usize,
    timeout: Duration,
}

impl ExternalSession {
    /// Spawns the evaluator and performs the handshake.
    pub fn launch(cmd: &ExternalCommand, dimension: usize) -> Result<Self, ObjectiveError> {
        let mut child = Command::new(&cmd.command)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ObjectiveError::Launch {
                command: cmd.command.clone(),
                message: e.to_string(),
            })?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });

        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let mut pipe = child.stderr.take().expect("stderr is piped");
        let stderr_thread = thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap();
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_KEEP {
                    let mut cut = s.len() - STDERR_KEEP;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });

        let stdin = BufWriter::new(child.stdin.take().expect("stdin is piped"));
        let mut session = ExternalSession {
            child,
            stdin: Some(stdin),
            lines,
            stderr,
            stderr_thread: Some(stderr_thread),
            line_no: 0,
            next_id: 1,
            dimension,
            timeout: Duration::from_secs(cmd.timeout_secs),
        };
        session.handshake()?;
        Ok(session)
    }

    fn handshake(&mut self) -> Result<(), ObjectiveError> {
        self.send(&ClientMessage::Hello {
            protocol: PROTOCOL_VERSION,
            dimension: self.dimension,
        })
        .map_err(|e| ObjectiveError::Handshake(e.to_string()))?;
        let line = self.read_line().map_err(|e| match e {
            ObjectiveError::Evaluation { message, stderr } => {
                ObjectiveError::Handshake(format!("{message}{}", super::excerpt(&stderr)))
            }
            other => other,
        })?;
        match self.parse(&line)? {
            EvaluatorMessage::Ready { protocol, dimension } => {
                if protocol != PROTOCOL_VERSION {
                    return Err(ObjectiveError::Handshake(format!(
                        "evaluator speaks protocol {protocol}, expected {PROTOCOL_VERSION}"
                    )));
                }
                if dimension != self.dimension {
                    return Err(ObjectiveError::Handshake(format!(
                        "evaluator expects dimension {dimension}, optimizer uses {}",
                        self.dimension
                    )));
                }
                Ok(())
            }
            EvaluatorMessage::Result(_) => Err(self.protocol_error(&line, "expected a ready message")),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Requests issued so far.
    pub fn requests_sent(&self) -> u64 {
        self.next_id - 1
    }

    /// Operating-system process id of the evaluator.
    pub fn child_id(&self) -> u32 {
        self.child.id()
    }

    /// Stderr captured so far (the last couple of kilobytes).
    pub fn stderr_excerpt(&self) -> String {
        self.stderr.lock().unwrap().clone()
    }

    /// Sends one evaluation request and waits for its response.
    pub fn request(&mut self, genome: &[f64], sample_index: u32, seed: u64) -> Result<f64, ObjectiveError> {
        if genome.len() != self.dimension {
            return Err(GenomeError::LengthMismatch {
                left: genome.len(),
                right: self.dimension,
            }
            .into());
        }
        let id = self.next_id;
        self.next_id += 1;
        let msg = ClientMessage::Evaluate(ExternalRequest {
            id,
            genome: genome.to_vec(),
            sample_index,
            seed,
        });
        if let Err(e) = self.send(&msg) {
            return Err(self.exited(format!("cannot write request {id}: {e}")));
        }
        let line = self.read_line()?;
        let response = match self.parse(&line)? {
            EvaluatorMessage::Result(r) => r,
            EvaluatorMessage::Ready { .. } => return Err(self.protocol_error(&line, "expected a result message")),
        };
        if response.id != id {
            return Err(self.protocol_error(
                &line,
                &format!("response id {} does not answer request {id}", response.id),
            ));
        }
        if let Some(message) = response.error {
            return Err(ObjectiveError::Evaluation {
                message: format!("evaluator reported for request {id}: {message}"),
                stderr: self.stderr_excerpt(),
            });
        }
        match response.value {
            Some(v) if v.is_finite() => Ok(v),
            Some(_) => Err(self.protocol_error(&line, "non-finite value")),
            None => Err(self.protocol_error(&line, "result carries neither value nor error")),
        }
    }

    /// Sends the shutdown message and waits for the evaluator to exit.
    pub fn close(mut self) -> Result<(), ObjectiveError> {
        self.shutdown();
        Ok(())
    }

    fn send(&mut self, msg: &ClientMessage) -> io::Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| io::Error::new(io::ErrorKind::BrokenPipe, "session closed"))?;
        serde_json::to_writer(&mut *stdin, msg)?;
        stdin.write_all(b"\n")?;
        stdin.flush()
    }

    fn read_line(&mut self) -> Result<String, ObjectiveError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => {
                self.line_no += 1;
                Ok(line)
            }
            Ok(Err(e)) => Err(self.exited(format!("cannot read evaluator output: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                let _ = self.child.kill();
                let _ = self.child.wait();
                Err(ObjectiveError::Timeout {
                    seconds: self.timeout.as_secs(),
                    stderr: self.drain_stderr(),
                })
            }
            Err(RecvTimeoutError::Disconnected) => Err(self.exited("evaluator closed its output".into())),
        }
    }

    fn parse(&self, line: &str) -> Result<EvaluatorMessage, ObjectiveError> {
        serde_json::from_str(line).map_err(|e| self.protocol_error(line, &e.to_string()))
    }

    fn protocol_error(&self, line: &str, reason: &str) -> ObjectiveError {
        ObjectiveError::Protocol {
            line: self.line_no,
            text: line.chars().take(200).collect(),
            reason: reason.to_string(),
        }
    }

    /// Builds the error for a child that stopped answering, reaping it first.
    fn exited(&mut self, context: String) -> ObjectiveError {
        self.stdin = None;
        let status = match self.child.try_wait() {
            Ok(Some(s)) => Some(s),
            _ => {
                // Give a dying process a moment before declaring it hung.
                let deadline = Instant::now() + Duration::from_secs(2);
                loop {
                    match self.child.try_wait() {
                        Ok(Some(s)) => break Some(s),
                        Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                        _ => {
                            let _ = self.child.kill();
                            break self.child.wait().ok();
                        }
                    }
                }
            }
        };
        let status = status.map_or_else(|| "unknown status".to_string(), |s| s.to_string());
        ObjectiveError::Evaluation {
            message: format!("{context}; evaluator exited ({status})"),
            stderr: self.drain_stderr(),
        }
    }

    fn drain_stderr(&mut self) -> String {
        if let Some(handle) = self.stderr_thread.take() {
            let _ = handle.join();
        }
        self.stderr_excerpt()
    }

    fn shutdown(&mut self) {
        if self.stdin.is_some() {
            let _ = self.send(&ClientMessage::Shutdown);
            self.stdin = None;
        }
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    break;
                }
            }
        }
    }
}

impl Drop for ExternalSession {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Objective for ExternalSession {
    fn sample(&mut self, genome: &Genome, request: &SampleRequest) -> Result<f64, ObjectiveError> {
        let real = genome.as_real().ok_or(GenomeError::KindMismatch {
            expected: GenomeKind::Real,
            found: genome.kind(),
        })?;
        self.request(real.values(), request.sample_index, request.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let hello = serde_json::to_string(&ClientMessage::Hello {
            protocol: 1,
            dimension: 6,
        })
        .unwrap();
        assert_eq!(hello, r#"{"type":"hello","protocol":1,"dimension":6}"#);

        let req = serde_json::to_string(&ClientMessage::Evaluate(ExternalRequest {
            id: 3,
            genome: vec![0.1, 2.0],
            sample_index: 4,
            seed: 9,
        }))
        .unwrap();
        assert_eq!(
            req,
            r#"{"type":"evaluate","id":3,"genome":[0.1,2.0],"sample_index":4,"seed":9}"#
        );

        let ok: EvaluatorMessage = serde_json::from_str(r#"{"type":"result","id":3,"value":480}"#).unwrap();
        assert_eq!(
            ok,
            EvaluatorMessage::Result(ExternalResponse {
                id: 3,
                value: Some(480.0),
                error: None
            })
        );
        let shutdown = serde_json::to_string(&ClientMessage::Shutdown).unwrap();
        assert_eq!(shutdown, r#"{"type":"shutdown"}"#);
    }

    #[test]
    fn genomes_round_trip_through_json() {
        let genome = vec![0.1 + 0.2, std::f64::consts::PI, 1e-300, 19.999999999999996, 5e-324];
        let line = serde_json::to_string(&ClientMessage::Evaluate(ExternalRequest {
            id: 1,
            genome: genome.clone(),
            sample_index: 0,
            seed: 0,
        }))
        .unwrap();
        match serde_json::from_str(&line).unwrap() {
            ClientMessage::Evaluate(r) => assert_eq!(r.genome, genome),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn launch_failure_is_categorized() {
        let cmd = ExternalCommand::new("/nonexistent/evaluator-binary", &[]);
        let err = ExternalSession::launch(&cmd, 6).err().unwrap();
        assert!(matches!(err, ObjectiveError::Launch { .. }));
        assert_eq!(err.category(), "io");
    }
}
