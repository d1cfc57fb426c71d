//! Stand-in forecaster process for the bridge protocol.
//!
//! Answers every request by repeating the last value of the series for the
//! requested horizon. Fault modes let tests exercise the client's error paths.

use std::io::{self, BufRead, Write};
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Correct echo-last answers.
    Echo,
    /// Answers with an id that does not match the request.
    WrongId,
    /// Answers with a line that is not JSON.
    Garbage,
    /// Never answers.
    Hang,
    /// Exits with status 3 instead of answering.
    Exit,
    /// Returns one value fewer than the horizon.
    ShortForecast,
    /// Answers every request with an error response and keeps running.
    Reject,
}

#[derive(Debug, Parser)]
#[command(about = "Echo-last forecaster speaking the line protocol on stdin/stdout")]
struct Args {
    /// Advertise pipelined batches in the handshake.
    #[arg(long)]
    batch: bool,
    #[arg(long, value_enum, default_value_t = Mode::Echo)]
    mode: Mode,
    /// Behave correctly for this many requests before switching to `mode`.
    #[arg(long, default_value_t = 0)]
    after: u64,
    /// Protocol version announced in the handshake.
    #[arg(long, default_value_t = 1)]
    protocol: u32,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    series: Vec<f64>,
    horizon: usize,
}

fn answer(req: &Request) -> serde_json::Value {
    match req.series.last() {
        None => json!({"id": req.id, "error": "empty series"}),
        Some(_) if req.horizon == 0 => json!({"id": req.id, "error": "horizon must be at least 1"}),
        Some(&last) => json!({"id": req.id, "forecast": vec![last; req.horizon]}),
    }
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    writeln!(out, "{}", json!({"protocol": args.protocol, "batch": args.batch}))?;
    out.flush()?;

    let mut served = 0u64;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                writeln!(out, "{}", json!({"id": -1, "error": format!("malformed request: {e}")}))?;
                out.flush()?;
                continue;
            }
        };
        let mode = if served < args.after { Mode::Echo } else { args.mode };
        served += 1;
        match mode {
            Mode::Echo => writeln!(out, "{}", answer(&req))?,
            Mode::WrongId => writeln!(out, "{}", json!({"id": req.id + 1000, "forecast": vec![0.0; req.horizon]}))?,
            Mode::Garbage => writeln!(out, "this is not a response")?,
            Mode::ShortForecast => {
                writeln!(out, "{}", json!({"id": req.id, "forecast": vec![0.0; req.horizon.saturating_sub(1)]}))?
            }
            Mode::Reject => writeln!(out, "{}", json!({"id": req.id, "error": "rejected by mock"}))?,
            Mode::Hang => loop {
                std::thread::sleep(Duration::from_secs(3600));
            },
            Mode::Exit => std::process::exit(3),
        }
        out.flush()?;
    }
    Ok(())
}
