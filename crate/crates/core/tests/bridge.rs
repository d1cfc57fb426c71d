//! Conformance of the bridge client against the mock forecaster process.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use tscausal::forecast::external::{BridgeError, ExternalHandle, ExternalPool, ExternalSpec};
use tscausal::forecast::{rolling_one_step, ForecastError, Forecaster, NativeForecaster, ForecasterSpec};

const MOCK: &str = env!("CARGO_BIN_EXE_tscausal-mock-bridge");

fn spec(args: &[&str]) -> ExternalSpec {
    let mut command = vec![MOCK.to_string()];
    command.extend(args.iter().map(|a| a.to_string()));
    ExternalSpec::new(command)
}

#[test]
fn handshake_advertises_batch() {
    assert!(!ExternalHandle::spawn(&spec(&[])).unwrap().supports_batch());
    assert!(ExternalHandle::spawn(&spec(&["--batch"])).unwrap().supports_batch());
}

#[test]
fn thousand_sequential_requests_echo_last_value() {
    let mut h = ExternalHandle::spawn(&spec(&[])).unwrap();
    for k in 0..1000usize {
        let series: Vec<f64> = (0..=k % 17).map(|i| i as f64 * 0.1 + k as f64).collect();
        let horizon = 1 + k % 7;
        let f = h.request(&series, horizon, None).unwrap();
        assert_eq!(f, vec![*series.last().unwrap(); horizon], "request {k}");
    }
}

#[test]
fn covariates_are_accepted() {
    let mut h = ExternalHandle::spawn(&spec(&[])).unwrap();
    let f = h.request(&[1.0, 2.0, 3.0], 2, Some(vec![vec![0.5, 0.6, 0.7]])).unwrap();
    assert_eq!(f, vec![3.0, 3.0]);
}

#[test]
fn horizon_zero_and_empty_series_rejected_client_side() {
    let mut h = ExternalHandle::spawn(&spec(&[])).unwrap();
    assert!(matches!(h.request(&[1.0], 0, None), Err(BridgeError::Protocol(_))));
    assert!(matches!(h.request(&[], 1, None), Err(BridgeError::Protocol(_))));
    // Nothing was sent, so the handle stays usable.
    assert_eq!(h.request(&[4.0], 1, None).unwrap(), vec![4.0]);
}

#[test]
fn remote_error_keeps_process_alive() {
    let mut h = ExternalHandle::spawn(&spec(&["--mode", "reject", "--after", "1"])).unwrap();
    assert_eq!(h.request(&[1.0], 1, None).unwrap(), vec![1.0]);
    for _ in 0..3 {
        match h.request(&[1.0], 1, None) {
            Err(BridgeError::Remote { message, .. }) => assert_eq!(message, "rejected by mock"),
            other => panic!("expected remote error, got {other:?}"),
        }
    }
}

#[test]
fn remote_error_inside_batch_keeps_stream_in_sync() {
    let mut h = ExternalHandle::spawn(&spec(&["--batch", "--mode", "reject", "--after", "3"])).unwrap();
    let series: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64]).collect();
    let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
    assert!(matches!(h.request_many(&refs, 1), Err(BridgeError::Remote { id: 4, .. })));
    // The next request's response must carry the next id, not a stale one.
    assert!(matches!(h.request(&[9.0], 1, None), Err(BridgeError::Remote { id: 6, .. })));
}

#[test]
fn mismatched_id_is_malformed() {
    let mut h = ExternalHandle::spawn(&spec(&["--mode", "wrong-id"])).unwrap();
    assert!(matches!(h.request(&[1.0], 1, None), Err(BridgeError::Malformed(_))));
    // A desynchronised stream is not reused.
    assert!(matches!(h.request(&[1.0], 1, None), Err(BridgeError::Protocol(_))));
}

#[test]
fn garbage_and_short_forecasts_are_malformed() {
    let mut h = ExternalHandle::spawn(&spec(&["--mode", "garbage"])).unwrap();
    assert!(matches!(h.request(&[1.0], 1, None), Err(BridgeError::Malformed(_))));
    let mut h = ExternalHandle::spawn(&spec(&["--mode", "short-forecast"])).unwrap();
    assert!(matches!(h.request(&[1.0], 3, None), Err(BridgeError::Malformed(m)) if m.contains("horizon 3")));
}

#[test]
fn silent_bridge_times_out() {
    let mut s = spec(&["--mode", "hang"]);
    s.timeout_secs = 0.3;
    let mut h = ExternalHandle::spawn(&s).unwrap();
    let start = Instant::now();
    assert!(matches!(h.request(&[1.0], 1, None), Err(BridgeError::Timeout(_))));
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn exiting_bridge_reports_status() {
    let mut h = ExternalHandle::spawn(&spec(&["--mode", "exit", "--after", "2"])).unwrap();
    assert!(h.request(&[1.0], 1, None).is_ok());
    assert!(h.request(&[2.0], 1, None).is_ok());
    match h.request(&[3.0], 1, None) {
        Err(BridgeError::Exited { status }) => assert!(status.contains('3'), "{status}"),
        other => panic!("expected exit, got {other:?}"),
    }
}

#[test]
fn unsupported_protocol_version_is_refused() {
    assert!(matches!(ExternalHandle::spawn(&spec(&["--protocol", "2"])), Err(BridgeError::Protocol(_))));
}

#[test]
fn mock_answers_malformed_requests_with_negative_id() {
    let mut child = Command::new(MOCK).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let handshake: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(handshake, serde_json::json!({"protocol": 1, "batch": false}));
    writeln!(stdin, "{{not json").unwrap();
    writeln!(stdin, r#"{{"id": 5, "series": [], "horizon": 2}}"#).unwrap();
    writeln!(stdin, r#"{{"id": 6, "series": [1.5], "horizon": 0}}"#).unwrap();
    stdin.flush().unwrap();
    let bad: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!(bad["id"], -1);
    let empty: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!((empty["id"].as_i64(), empty["error"].is_string()), (Some(5), true));
    let zero: serde_json::Value = serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap();
    assert_eq!((zero["id"].as_i64(), zero["error"].is_string()), (Some(6), true));
    drop(stdin);
    assert!(child.wait().unwrap().success());
}

#[test]
fn batched_and_pooled_rolling_forecasts_match_native_naive_last() {
    let series: Vec<f64> = (0..150).map(|t| (t as f64 * 0.37).sin() + 0.01 * t as f64).collect();
    let native = NativeForecaster::new(ForecasterSpec::NaiveLast).unwrap();
    let want = rolling_one_step(&native, &series, 30).unwrap();
    for args in [&[][..], &["--batch"][..]] {
        let mut s = spec(args);
        s.pool_size = 3;
        let pool = ExternalPool::launch(&s).unwrap();
        assert_eq!(pool.size(), 3);
        assert_eq!(rolling_one_step(&pool, &series, 30).unwrap(), want);
        // Concurrent callers share the pool.
        let outs: Vec<Vec<f64>> = (0..24usize)
            .into_par_iter()
            .map(|k| pool.forecast(&series[..10 + k], 2).unwrap())
            .collect();
        for (k, f) in outs.iter().enumerate() {
            assert_eq!(f, &vec![series[9 + k]; 2]);
        }
        assert!(matches!(pool.forecast(&series, 0), Err(ForecastError::ZeroHorizon)));
    }
}
