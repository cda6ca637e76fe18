//! Reference model speaking the JSON-lines protocol, for tests and demos.
//!
//! ```text
//! stripmask-stub [--mode MODE] [--value V] [--after N] [--points d:t,...]
//! ```
//!
//! Modes:
//! * `echo` (default): returns the input values flattened feature-major.
//! * `sum`: one output, the sum of all inputs.
//! * `square-sum`: one output, the sum of squares over `--points` (1-based
//!   `d:t` pairs), or over every point when none are given.
//! * `constant`: one output, `--value`.
//! * `classify`: two probabilities, a logistic of the input sum.
//! * `crash`: exits without replying once `--after` requests were answered.
//! * `hang`: stops replying once `--after` requests were answered.
//! * `bad-version`: announces protocol version 2.
//! * `silent`: never says hello.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Echo,
    Sum,
    SquareSum,
    Constant,
    Classify,
    Crash,
    Hang,
    BadVersion,
    Silent,
}

struct Options {
    mode: Mode,
    value: f64,
    after: usize,
    points: Option<Vec<(usize, usize)>>,
}

fn parse_points(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(',')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (d, t) = p.split_once(':').ok_or_else(|| format!("bad point {p:?}"))?;
            let d: usize = d.parse().map_err(|_| format!("bad point {p:?}"))?;
            let t: usize = t.parse().map_err(|_| format!("bad point {p:?}"))?;
            if d == 0 || t == 0 {
                return Err(format!("points are 1-based: {p:?}"));
            }
            Ok((d - 1, t - 1))
        })
        .collect()
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options {
        mode: Mode::Echo,
        value: 0.0,
        after: 0,
        points: None,
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let mut value = || args.next().ok_or_else(|| format!("{flag} needs a value"));
        match flag.as_str() {
            "--mode" => {
                opts.mode = match value()?.as_str() {
                    "echo" => Mode::Echo,
                    "sum" => Mode::Sum,
                    "square-sum" => Mode::SquareSum,
                    "constant" => Mode::Constant,
                    "classify" => Mode::Classify,
                    "crash" => Mode::Crash,
                    "hang" => Mode::Hang,
                    "bad-version" => Mode::BadVersion,
                    "silent" => Mode::Silent,
                    other => return Err(format!("unknown mode {other:?}")),
                }
            }
            "--value" => opts.value = value()?.parse().map_err(|_| "bad --value".to_string())?,
            "--after" => opts.after = value()?.parse().map_err(|_| "bad --after".to_string())?,
            "--points" => opts.points = Some(parse_points(&value()?)?),
            other => return Err(format!("unknown argument {other:?}")),
        }
    }
    Ok(opts)
}

fn predict(opts: &Options, rows: &[Vec<f64>]) -> Vec<f64> {
    match opts.mode {
        Mode::Sum => vec![rows.iter().flatten().sum()],
        Mode::SquareSum => {
            let s = match &opts.points {
                Some(points) => points
                    .iter()
                    .filter_map(|&(d, t)| rows.get(d).and_then(|r| r.get(t)))
                    .map(|v| v * v)
                    .sum(),
                None => rows.iter().flatten().map(|v| v * v).sum(),
            };
            vec![s]
        }
        Mode::Constant => vec![opts.value],
        Mode::Classify => {
            let s: f64 = rows.iter().flatten().sum();
            let p = 1.0 / (1.0 + (-s).exp());
            vec![p, 1.0 - p]
        }
        _ => rows.iter().flatten().copied().collect(),
    }
}

fn serve(opts: &Options) -> Result<(), String> {
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    let task = if opts.mode == Mode::Classify {
        "classification"
    } else {
        "regression"
    };
    let mut answered = 0usize;
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: Value = serde_json::from_str(&line).map_err(|e| format!("bad request: {e}"))?;
        let reply = match msg["type"].as_str() {
            Some("hello") => match opts.mode {
                Mode::Silent => continue,
                Mode::BadVersion => json!({"type": "hello", "version": 2, "task": task}),
                _ => json!({"type": "hello", "version": 1, "task": task}),
            },
            Some("predict") => {
                if answered >= opts.after {
                    match opts.mode {
                        Mode::Crash => std::process::exit(9),
                        Mode::Hang => loop {
                            std::thread::park();
                        },
                        _ => {}
                    }
                }
                let rows: Vec<Vec<f64>> =
                    serde_json::from_value(msg["values"].clone()).map_err(|e| format!("bad values: {e}"))?;
                answered += 1;
                json!({"type": "prediction", "values": predict(opts, &rows)})
            }
            _ => return Err(format!("unexpected message {line}")),
        };
        writeln!(stdout, "{reply}").map_err(|e| e.to_string())?;
        stdout.flush().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = parse_args().and_then(|opts| serve(&opts));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stripmask-stub: {e}");
            ExitCode::from(2)
        }
    }
}
