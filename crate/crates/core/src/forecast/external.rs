//! Client side of the forecaster line protocol.
//!
//! A bridge is a child process that speaks newline-delimited JSON on its
//! stdin/stdout:
//!
//! ```text
//! child  → {"protocol": 1, "batch": true|false}                       (first line)
//! parent → {"id": 7, "series": [..], "horizon": 1, "covariates": [[..]]}
//! child  → {"id": 7, "forecast": [..]}   or   {"id": 7, "error": "..."}
//! ```
//!
//! Responses arrive in request order. A handle keeps one request in flight;
//! when the bridge advertises `batch`, up to [`ROLLING_BATCH`] requests are
//! written back to back and their responses read in order.
//!
//! [`ROLLING_BATCH`]: super::ROLLING_BATCH

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ForecastError, Forecaster, ROLLING_BATCH};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("failed to launch bridge '{command}': {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bridge did not answer within {0:?}")]
    Timeout(Duration),
    #[error("malformed bridge response: {0}")]
    Malformed(String),
    #[error("bridge exited ({status})")]
    Exited { status: String },
    #[error("bridge reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("bridge i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Launch command and client-side limits for an external forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSpec {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
}

fn default_timeout() -> f64 {
    120.0
}

fn default_pool() -> usize {
    1
}

impl ExternalSpec {
    pub fn new(command: Vec<String>) -> Self {
        Self { command, timeout_secs: default_timeout(), pool_size: default_pool() }
    }

    /// Splits a command line on whitespace.
    pub fn from_command_line(line: &str) -> Self {
        Self::new(line.split_whitespace().map(str::to_string).collect())
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.command.is_empty() {
            return Err(BridgeError::Protocol("empty bridge command".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(BridgeError::Protocol("timeout must be positive".into()));
        }
        if self.pool_size == 0 {
            return Err(BridgeError::Protocol("pool size must be >= 1".into()));
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub series: Vec<f64>,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub covariates: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: u32,
    pub batch: bool,
}

/// A decoded response line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Forecast { id: u64, forecast: Vec<f64> },
    Error { id: i64, error: String },
}

pub fn parse_response(line: &str) -> Result<Response, BridgeError> {
    serde_json::from_str(line).map_err(|e| BridgeError::Malformed(format!("{e}: {}", truncate(line))))
}

fn truncate(line: &str) -> String {
    const MAX: usize = 120;
    if line.len() <= MAX {
        line.to_string()
    } else {
        let cut = (0..=MAX).rev().find(|&i| line.is_char_boundary(i)).unwrap_or(0);
        format!("{}...", &line[..cut])
    }
}

/// One running bridge process.
pub struct ExternalHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    batch: bool,
    next_id: u64,
    dead: bool,
}

impl ExternalHandle {
    pub fn spawn(spec: &ExternalSpec) -> Result<Self, BridgeError> {
        spec.validate()?;
        let mut child = Command::new(&spec.command[0])
            .args(&spec.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BridgeError::Spawn { command: spec.command.join(" "), source })?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut handle = Self {
            child,
            stdin,
            lines: rx,
            timeout: spec.timeout(),
            batch: false,
            next_id: 1,
            dead: false,
        };
        let first = handle.read_line()?;
        let hs: Handshake = serde_json::from_str(&first)
            .map_err(|e| BridgeError::Malformed(format!("bad handshake ({e}): {}", truncate(&first))))?;
        if hs.protocol != PROTOCOL_VERSION {
            handle.dead = true;
            return Err(BridgeError::Protocol(format!("unsupported protocol version {}", hs.protocol)));
        }
        handle.batch = hs.batch;
        Ok(handle)
    }

    pub fn supports_batch(&self) -> bool {
        self.batch
    }

    fn exit_status(&mut self) -> String {
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) => return describe(status),
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                Ok(None) => return "closed its output but is still running".into(),
                Err(e) => return format!("unknown status: {e}"),
            }
        }
    }

    fn read_line(&mut self) -> Result<String, BridgeError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                self.dead = true;
                Err(BridgeError::Io(e))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.dead = true;
                let _ = self.child.kill();
                Err(BridgeError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.dead = true;
                Err(BridgeError::Exited { status: self.exit_status() })
            }
        }
    }

    fn write_request(&mut self, req: &Request) -> Result<(), BridgeError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| BridgeError::Protocol("bridge input closed".into()))?;
        let mut line = serde_json::to_vec(req).map_err(|e| BridgeError::Protocol(e.to_string()))?;
        line.push(b'\n');
        if let Err(e) = stdin.write_all(&line) {
            self.dead = true;
            // A broken pipe means the child is gone.
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                return Err(BridgeError::Exited { status: self.exit_status() });
            }
            return Err(e.into());
        }
        Ok(())
    }

    fn read_response(&mut self, id: u64, horizon: usize) -> Result<Vec<f64>, BridgeError> {
        let result = self.decode_response(id, horizon);
        if matches!(result, Err(BridgeError::Malformed(_))) {
            self.dead = true;
        }
        result
    }

    fn decode_response(&mut self, id: u64, horizon: usize) -> Result<Vec<f64>, BridgeError> {
        let line = self.read_line()?;
        match parse_response(&line)? {
            Response::Forecast { id: got, forecast } => {
                if got != id {
                    return Err(BridgeError::Malformed(format!("response id {got} does not match request id {id}")));
                }
                if forecast.len() != horizon {
                    return Err(BridgeError::Malformed(format!(
                        "forecast has {} values for horizon {horizon}",
                        forecast.len()
                    )));
                }
                if forecast.iter().any(|v| !v.is_finite()) {
                    return Err(BridgeError::Malformed("non-finite forecast value".into()));
                }
                Ok(forecast)
            }
            Response::Error { id: got, error } => {
                if got != id as i64 {
                    return Err(BridgeError::Malformed(format!("error response id {got} does not match request id {id}")));
                }
                Err(BridgeError::Remote { id, message: error })
            }
        }
    }

    fn check_request(&self, series: &[f64], horizon: usize) -> Result<(), BridgeError> {
        if self.dead {
            return Err(BridgeError::Protocol("bridge is no longer usable after an earlier failure".into()));
        }
        if horizon == 0 {
            return Err(BridgeError::Protocol("horizon must be at least 1".into()));
        }
        if series.is_empty() {
            return Err(BridgeError::Protocol("series must not be empty".into()));
        }
        Ok(())
    }

    /// Sends one request and waits for its response.
    pub fn request(
        &mut self,
        series: &[f64],
        horizon: usize,
        covariates: Option<Vec<Vec<f64>>>,
    ) -> Result<Vec<f64>, BridgeError> {
        self.check_request(series, horizon)?;
        let id = self.next_id;
        self.next_id += 1;
        self.write_request(&Request { id, series: series.to_vec(), horizon, covariates })?;
        self.flush()?;
        self.read_response(id, horizon)
    }

    fn flush(&mut self) -> Result<(), BridgeError> {
        if let Some(stdin) = self.stdin.as_mut() {
            if let Err(e) = stdin.flush() {
                self.dead = true;
                return Err(e.into());
            }
        }
        Ok(())
    }

    /// Forecasts several series, pipelining when the bridge allows it.
    pub fn request_many(&mut self, histories: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>, BridgeError> {
        if !self.batch {
            return histories.iter().map(|h| self.request(h, horizon, None)).collect();
        }
        let mut out = Vec::with_capacity(histories.len());
        for chunk in histories.chunks(ROLLING_BATCH) {
            for h in chunk {
                self.check_request(h, horizon)?;
            }
            let first = self.next_id;
            for h in chunk {
                let id = self.next_id;
                self.next_id += 1;
                self.write_request(&Request { id, series: h.to_vec(), horizon, covariates: None })?;
            }
            self.flush()?;
            // Remote errors leave the stream in sync; read the whole chunk
            // before reporting the first one.
            let mut first_err = None;
            for k in 0..chunk.len() as u64 {
                match self.read_response(first + k, horizon) {
                    Ok(f) => out.push(f),
                    Err(e @ BridgeError::Remote { .. }) => {
                        first_err.get_or_insert(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Ok(out)
    }
}

fn describe(status: ExitStatus) -> String {
    match status.code() {
        Some(code) => format!("exit code {code}"),
        None => "terminated by signal".into(),
    }
}

impl Drop for ExternalHandle {
    fn drop(&mut self) {
        // Closing stdin asks the bridge to exit.
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A fixed-size pool of bridge processes, each with one request in flight.
pub struct ExternalPool {
    idle: Mutex<Vec<ExternalHandle>>,
    available: Condvar,
    size: usize,
}

impl ExternalPool {
    pub fn launch(spec: &ExternalSpec) -> Result<Self, BridgeError> {
        spec.validate()?;
        let handles = (0..spec.pool_size).map(|_| ExternalHandle::spawn(spec)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { idle: Mutex::new(handles), available: Condvar::new(), size: spec.pool_size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn with_handle<T>(&self, f: impl FnOnce(&mut ExternalHandle) -> T) -> T {
        let mut handle = {
            let mut idle = self.idle.lock().expect("pool lock");
            loop {
                if let Some(h) = idle.pop() {
                    break h;
                }
                idle = self.available.wait(idle).expect("pool lock");
            }
        };
        let out = f(&mut handle);
        self.idle.lock().expect("pool lock").push(handle);
        self.available.notify_one();
        out
    }

    /// Forecast with optional covariates, one request.
    pub fn forecast_with_covariates(
        &self,
        history: &[f64],
        horizon: usize,
        covariates: Option<Vec<Vec<f64>>>,
    ) -> Result<Vec<f64>, BridgeError> {
        self.with_handle(|h| h.request(history, horizon, covariates))
    }
}

impl Forecaster for ExternalPool {
    fn label(&self) -> String {
        "external".into()
    }

    fn min_history(&self) -> usize {
        1
    }

    fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, ForecastError> {
        if horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        Ok(self.forecast_with_covariates(history, horizon, None)?)
    }

    fn forecast_many(&self, histories: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>, ForecastError> {
        if horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        Ok(self.with_handle(|h| h.request_many(histories, horizon))?)
    }
}
