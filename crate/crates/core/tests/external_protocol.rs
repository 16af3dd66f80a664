//! The subprocess protocol against the bundled mock evaluator.

use std::process::Command;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use hdea::evolve::{self, Algorithm, EaConfig, EvolveError};
use hdea::objective::{
    Direction, Evaluate, ExternalCommand, ExternalSession, ObjectiveError, SampledObjective, SearchSpace,
};

const BIN: &str = env!("CARGO_BIN_EXE_hdea");

fn mock(extra: &[&str]) -> ExternalCommand {
    let mut args = vec!["eval-server", "--mock"];
    args.extend_from_slice(extra);
    ExternalCommand::new(BIN, &args)
}

#[test]
fn handshake_and_echo() {
    let mut s = ExternalSession::launch(&mock(&["--mode", "echo"]), 6).unwrap();
    assert_eq!(s.dimension(), 6);
    assert_eq!(s.request(&[0.25, 0.0, 1.0, 2.0, 3.0, 4.0], 0, 9).unwrap(), 0.25);
    assert_eq!(
        s.request(&[0.1 + 0.2, 0.0, 1.0, 2.0, 3.0, 4.0], 1, 9).unwrap(),
        0.1 + 0.2
    );
    assert_eq!(s.requests_sent(), 2);
    s.close().unwrap();
}

#[test]
fn constant_evaluator_under_minimize() {
    let s = ExternalSession::launch(&mock(&["--mode", "constant", "--value", "480"]), 6).unwrap();
    let mut obj = SampledObjective::new(Box::new(s), Direction::Minimize, 5, 1);
    let g = SearchSpace::worker_cell().genome_spec();
    let genome = hdea::genome::random_genome(&g, &mut hdea::rng::stream(1, 0)).unwrap();
    let e = obj.evaluate(&genome).unwrap();
    assert_eq!((e.raw, e.fitness), (480.0, -480.0));
    assert_eq!(e.samples, vec![480.0; 5]);
}

#[test]
fn garbage_reply_names_the_line() {
    let err = ExternalSession::launch(&mock(&["--mode", "garbage"]), 6).err().unwrap();
    match &err {
        ObjectiveError::Protocol { line, text, .. } => {
            assert_eq!(*line, 1);
            assert!(text.contains("not a protocol message"));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.category(), "protocol");
}

#[test]
fn version_and_dimension_mismatch_fail_the_handshake() {
    let err = ExternalSession::launch(&mock(&["--protocol", "2"]), 6).err().unwrap();
    assert!(
        matches!(err, ObjectiveError::Handshake(ref m) if m.contains("protocol 2")),
        "{err}"
    );
    let err = ExternalSession::launch(&mock(&["--dimension", "5"]), 6).err().unwrap();
    assert!(
        matches!(err, ObjectiveError::Handshake(ref m) if m.contains("dimension 5")),
        "{err}"
    );
}

#[test]
fn evaluator_exit_is_an_evaluation_error_with_stderr() {
    let mut s = ExternalSession::launch(&mock(&["--mode", "echo", "--exit-after", "3"]), 6).unwrap();
    for i in 0..3 {
        s.request(&[0.5; 6], i, 0).unwrap();
    }
    let err = s.request(&[0.5; 6], 3, 0).unwrap_err();
    assert_eq!(err.category(), "evaluation");
    assert!(err.to_string().contains("simulated crash"), "{err}");
}

#[test]
fn killed_evaluator_fails_the_run_promptly() {
    let s = ExternalSession::launch(&mock(&[]), 6).unwrap();
    let pid = s.child_id();
    let (tx, rx) = mpsc::channel();
    let start = Instant::now();
    let worker = thread::spawn(move || {
        let mut obj = SampledObjective::new(Box::new(s), Direction::Minimize, 5, 3);
        let cfg = EaConfig {
            budget: 1_000_000,
            ..EaConfig::real_valued(Algorithm::Hdea, 3)
        };
        let result = evolve::run(&cfg, &SearchSpace::worker_cell().genome_spec(), &mut obj);
        tx.send(result.map(|_| ())).unwrap();
    });
    thread::sleep(Duration::from_millis(200));
    let status = Command::new("kill").args(["-9", &pid.to_string()]).status().unwrap();
    assert!(status.success());
    let result = rx
        .recv_timeout(Duration::from_secs(20))
        .expect("run hung after the evaluator was killed");
    worker.join().unwrap();
    match result {
        Err(EvolveError::Objective { source, .. }) => assert_eq!(source.category(), "evaluation"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(start.elapsed() < Duration::from_secs(20));
}

#[test]
fn silent_evaluator_times_out() {
    let cmd = ExternalCommand {
        timeout_secs: 1,
        ..mock(&["--hang-after", "1"])
    };
    let mut s = ExternalSession::launch(&cmd, 6).unwrap();
    s.request(&[0.5; 6], 0, 0).unwrap();
    let start = Instant::now();
    let err = s.request(&[0.5; 6], 1, 0).unwrap_err();
    assert!(matches!(err, ObjectiveError::Timeout { seconds: 1, .. }), "{err}");
    assert_eq!(err.category(), "evaluation");
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn mock_surrogate_matches_in_process_surrogate() {
    let space = SearchSpace::worker_cell();
    let cfg = EaConfig {
        budget: 30,
        ..EaConfig::real_valued(Algorithm::Hdea, 12)
    };
    let run_with = |inner: Box<dyn hdea::objective::Objective>| {
        let mut obj = SampledObjective::new(inner, Direction::Minimize, 5, 12);
        evolve::run(&cfg, &space.genome_spec(), &mut obj).unwrap()
    };
    let remote = run_with(Box::new(ExternalSession::launch(&mock(&[]), 6).unwrap()));
    let local = run_with(Box::new(hdea::objective::Surrogate::new(Default::default())));
    assert_eq!(remote, local);
}
