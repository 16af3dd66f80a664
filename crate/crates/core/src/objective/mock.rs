//! Reference evaluator speaking the subprocess protocol.
//!
//! `hdea eval-server --mock` runs [`serve_mock`] on its standard streams. Besides
//! serving as a working evaluator (the surrogate objective by default), the mock
//! can misbehave on purpose so clients can exercise their error paths.

use std::io::{self, BufRead, Write};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::external::{ClientMessage, EvaluatorMessage, ExternalResponse, PROTOCOL_VERSION};
use super::surrogate::{surrogate_evaluate, SurrogateParams};
use super::SearchSpace;
use crate::genome::{Genome, RealGenome};
use crate::rng::{stream, SAMPLE_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub enum MockMode {
    /// Answers every request with the same value.
    Constant(f64),
    /// Answers with the first genome value.
    Echo,
    /// Noisy surrogate seeded by the request seed.
    Surrogate(SurrogateParams),
    /// Replies to the handshake with a line that is not JSON.
    Garbage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockOptions {
    pub mode: MockMode,
    /// Protocol version announced in the handshake.
    pub protocol: u32,
    /// Dimension announced in the handshake; echoes the client's when unset.
    pub dimension: Option<usize>,
    /// Stop abruptly after answering this many requests.
    pub exit_after: Option<u64>,
    /// Stop answering (but stay alive) after this many requests.
    pub hang_after: Option<u64>,
}

impl Default for MockOptions {
    fn default() -> Self {
        MockOptions {
            mode: MockMode::Surrogate(SurrogateParams::default()),
            protocol: PROTOCOL_VERSION,
            dimension: None,
            exit_after: None,
            hang_after: None,
        }
    }
}

/// How a mock session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockOutcome {
    /// Client sent shutdown or closed the input.
    Shutdown,
    /// `exit_after` was reached; the caller should terminate without cleanup.
    Crash,
}

fn write_line<W: Write>(out: &mut W, msg: &EvaluatorMessage) -> io::Result<()> {
    serde_json::to_writer(&mut *out, msg)?;
    out.write_all(b"\n")?;
    out.flush()
}

fn evaluate(mode: &MockMode, genome: &[f64], seed: u64) -> Result<f64, String> {
    match mode {
        MockMode::Constant(v) => Ok(*v),
        MockMode::Echo => genome.first().copied().ok_or_else(|| "empty genome".to_string()),
        MockMode::Surrogate(params) => {
            let bounds: Arc<[_]> = SearchSpace::worker_cell().bounds().into();
            let g = RealGenome::new(genome.to_vec(), bounds).map_err(|e| e.to_string())?;
            surrogate_evaluate(params, &Genome::Real(g), &mut stream(seed, SAMPLE_STREAM)).map_err(|e| e.to_string())
        }
        MockMode::Garbage => Err("garbage mode".into()),
    }
}

/// Serves the protocol until shutdown, end of input, or a scripted failure.
pub fn serve_mock<R: BufRead, W: Write>(input: R, mut output: W, opts: &MockOptions) -> io::Result<MockOutcome> {
    let mut answered = 0u64;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: ClientMessage = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("mock evaluator: bad request line: {e}");
                continue;
            }
        };
        match msg {
            ClientMessage::Hello { dimension, .. } => {
                if opts.mode == MockMode::Garbage {
                    output.write_all(b"~~ not a protocol message ~~\n")?;
                    output.flush()?;
                    continue;
                }
                write_line(
                    &mut output,
                    &EvaluatorMessage::Ready {
                        protocol: opts.protocol,
                        dimension: opts.dimension.unwrap_or(dimension),
                    },
                )?;
            }
            ClientMessage::Evaluate(req) => {
                if opts.hang_after.is_some_and(|n| answered >= n) {
                    eprintln!("mock evaluator: hanging on request {}", req.id);
                    loop {
                        thread::sleep(Duration::from_secs(3600));
                    }
                }
                let response = match evaluate(&opts.mode, &req.genome, req.seed) {
                    Ok(v) => ExternalResponse {
                        id: req.id,
                        value: Some(v),
                        error: None,
                    },
                    Err(e) => ExternalResponse {
                        id: req.id,
                        value: None,
                        error: Some(e),
                    },
                };
                write_line(&mut output, &EvaluatorMessage::Result(response))?;
                answered += 1;
                if opts.exit_after.is_some_and(|n| answered >= n) {
                    eprintln!("mock evaluator: simulated crash after {answered} requests");
                    return Ok(MockOutcome::Crash);
                }
            }
            ClientMessage::Shutdown => return Ok(MockOutcome::Shutdown),
        }
    }
    Ok(MockOutcome::Shutdown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str, opts: &MockOptions) -> (MockOutcome, Vec<String>) {
        let mut out = Vec::new();
        let outcome = serve_mock(input.as_bytes(), &mut out, opts).unwrap();
        let lines = String::from_utf8(out).unwrap().lines().map(String::from).collect();
        (outcome, lines)
    }

    #[test]
    fn constant_session() {
        let opts = MockOptions {
            mode: MockMode::Constant(480.0),
            ..Default::default()
        };
        let input = concat!(
            r#"{"type":"hello","protocol":1,"dimension":6}"#,
            "\n",
            r#"{"type":"evaluate","id":1,"genome":[0,0,0,0,0,0],"sample_index":0,"seed":5}"#,
            "\n",
            r#"{"type":"shutdown"}"#,
            "\n"
        );
        let (outcome, lines) = run(input, &opts);
        assert_eq!(outcome, MockOutcome::Shutdown);
        assert_eq!(lines[0], r#"{"type":"ready","protocol":1,"dimension":6}"#);
        assert_eq!(lines[1], r#"{"type":"result","id":1,"value":480.0}"#);
    }

    #[test]
    fn exit_after_reports_crash() {
        let opts = MockOptions {
            mode: MockMode::Echo,
            exit_after: Some(1),
            ..Default::default()
        };
        let input = concat!(
            r#"{"type":"evaluate","id":1,"genome":[0.25],"sample_index":0,"seed":5}"#,
            "\n",
            r#"{"type":"evaluate","id":2,"genome":[0.5],"sample_index":0,"seed":5}"#,
            "\n"
        );
        let (outcome, lines) = run(input, &opts);
        assert_eq!(outcome, MockOutcome::Crash);
        assert_eq!(lines, vec![r#"{"type":"result","id":1,"value":0.25}"#.to_string()]);
    }

    #[test]
    fn surrogate_mode_rejects_out_of_range_genomes() {
        let opts = MockOptions::default();
        let input = concat!(
            r#"{"type":"evaluate","id":7,"genome":[0,0,0,0,0,99],"sample_index":0,"seed":5}"#,
            "\n"
        );
        let (_, lines) = run(input, &opts);
        let reply: EvaluatorMessage = serde_json::from_str(&lines[0]).unwrap();
        match reply {
            EvaluatorMessage::Result(r) => {
                assert_eq!(r.id, 7);
                assert!(r.value.is_none() && r.error.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
