//! Line-delimited JSON protocol for external predictors.
//!
//! The adapter talks to a child process over stdin/stdout, one JSON object per
//! line:
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"hello","version":1,"task":"regression"}
//! -> {"type":"predict","d":2,"t":3,"values":[[...],[...]]}
//! <- {"type":"prediction","values":[0.5]}
//! ```
//!
//! `values` in a request is row-major by feature. One request is in flight per
//! handle; [`ExternalModelPool`] runs several children for parallel work.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::BlackBoxModel;
use crate::scalar::Scalar;
use crate::series::{ModelOutput, TaskKind, TimeSeries};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);
pub const DEFAULT_REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no hello from the model within {0:?}")]
    HandshakeTimeout(Duration),
    #[error("no reply from the model within {0:?}")]
    Timeout(Duration),
    #[error("model process exited ({0})")]
    ChildExited(String),
    #[error("model speaks protocol version {got}, expected {PROTOCOL_VERSION}")]
    VersionMismatch { got: u32 },
    #[error("model declared task {got}, expected {expected}")]
    TaskMismatch { expected: TaskKind, got: TaskKind },
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("pipe error: {0}")]
    Pipe(#[source] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Message {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<TaskKind>,
    },
    Predict {
        d: usize,
        t: usize,
        values: Vec<Vec<f64>>,
    },
    Prediction {
        values: Vec<f64>,
    },
}

/// Program and arguments of an external model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ModelCommand {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Splits a command line on whitespace. No quoting is supported.
    pub fn parse(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty model command".into()))?;
        Ok(Self::new(program, parts))
    }
}

impl std::fmt::Display for ModelCommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.program)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExternalModelOptions {
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
}

impl Default for ExternalModelOptions {
    fn default() -> Self {
        Self {
            handshake_timeout: DEFAULT_HANDSHAKE_TIMEOUT,
            request_timeout: DEFAULT_REQUEST_TIMEOUT,
        }
    }
}

struct Connection {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    dead: Option<String>,
}

impl Connection {
    fn exit_reason(&mut self) -> String {
        let status: Option<ExitStatus> = self.child.try_wait().ok().flatten();
        match status {
            Some(s) => s.to_string(),
            None => "closed its output".to_string(),
        }
    }

    fn kill(&mut self, reason: String) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.dead = Some(reason);
    }

    fn exchange(&mut self, request: &Message, timeout: Duration, handshake: bool) -> Result<Message, ProtocolError> {
        if let Some(reason) = &self.dead {
            return Err(ProtocolError::ChildExited(reason.clone()));
        }
        let mut line = serde_json::to_string(request).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        line.push('\n');
        if let Err(e) = self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()) {
            // a broken pipe means the child is gone; report it as such
            let _ = self.child.wait();
            let reason = self.exit_reason();
            self.dead = Some(reason.clone());
            return Err(if e.kind() == std::io::ErrorKind::BrokenPipe {
                ProtocolError::ChildExited(reason)
            } else {
                ProtocolError::Pipe(e)
            });
        }
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => serde_json::from_str(&reply)
                .map_err(|e| ProtocolError::Malformed(format!("{e}: {}", truncate(&reply)))),
            Ok(Err(e)) => {
                self.kill(format!("read error: {e}"));
                Err(ProtocolError::Pipe(e))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill("killed after timeout".into());
                Err(if handshake {
                    ProtocolError::HandshakeTimeout(timeout)
                } else {
                    ProtocolError::Timeout(timeout)
                })
            }
            Err(RecvTimeoutError::Disconnected) => {
                let _ = self.child.wait();
                let reason = self.exit_reason();
                self.dead = Some(reason.clone());
                Err(ProtocolError::ChildExited(reason))
            }
        }
    }
}

fn truncate(s: &str) -> String {
    if s.len() <= 120 {
        s.to_string()
    } else {
        let cut = (0..=120).rev().find(|&i| s.is_char_boundary(i)).unwrap_or(0);
        format!("{}...", &s[..cut])
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if self.dead.is_none() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// A handshaken child process serving predictions.
pub struct ExternalModel {
    command: ModelCommand,
    task: TaskKind,
    options: ExternalModelOptions,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("command", &self.command)
            .field("task", &self.task)
            .finish_non_exhaustive()
    }
}

/// Starts `command` and completes the hello handshake. When `expected` is
/// given the child must declare that task.
pub fn spawn_external_model(
    command: &ModelCommand,
    expected: Option<TaskKind>,
    options: ExternalModelOptions,
) -> Result<ExternalModel, ProtocolError> {
    let mut child = Command::new(&command.program)
        .args(&command.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| ProtocolError::Spawn {
            command: command.to_string(),
            source,
        })?;
    let stdin = child.stdin.take().expect("stdin is piped");
    let stdout = child.stdout.take().expect("stdout is piped");
    let (tx, rx) = mpsc::channel();
    thread::Builder::new()
        .name("model-stdout".into())
        .spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        })
        .map_err(ProtocolError::Pipe)?;
    let mut conn = Connection {
        child,
        stdin,
        lines: rx,
        dead: None,
    };
    let hello = Message::Hello {
        version: PROTOCOL_VERSION,
        task: None,
    };
    let task = match conn.exchange(&hello, options.handshake_timeout, true)? {
        Message::Hello { version, task } => {
            if version != PROTOCOL_VERSION {
                conn.kill("version mismatch".into());
                return Err(ProtocolError::VersionMismatch { got: version });
            }
            let task = task.ok_or_else(|| ProtocolError::Malformed("hello without task".into()))?;
            if let Some(expected) = expected.filter(|&e| e != task) {
                conn.kill("task mismatch".into());
                return Err(ProtocolError::TaskMismatch { expected, got: task });
            }
            task
        }
        other => {
            conn.kill("bad handshake".into());
            return Err(ProtocolError::Malformed(format!("expected hello, got {other:?}")));
        }
    };
    Ok(ExternalModel {
        command: command.clone(),
        task,
        options,
        conn: Mutex::new(conn),
    })
}

impl ExternalModel {
    pub fn command(&self) -> &ModelCommand {
        &self.command
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task
    }

    /// Sends one prediction request and waits for the reply.
    pub fn request(&self, d: usize, t: usize, rows: Vec<Vec<f64>>) -> Result<Vec<f64>, ProtocolError> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        match conn.exchange(&Message::Predict { d, t, values: rows }, self.options.request_timeout, false)? {
            Message::Prediction { values } => Ok(values),
            other => Err(ProtocolError::Malformed(format!("expected prediction, got {other:?}"))),
        }
    }

    pub fn is_alive(&self) -> bool {
        self.conn.lock().map(|c| c.dead.is_none()).unwrap_or(false)
    }

    /// OS process id of the child.
    pub fn pid(&self) -> u32 {
        self.conn.lock().map(|c| c.child.id()).unwrap_or(0)
    }
}

fn predict_via<S: Scalar>(model: &ExternalModel, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
    let rows = x.rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect();
    let values = model.request(x.d_features(), x.t_steps(), rows)?;
    ModelOutput::new(values.into_iter().map(S::from_f64_lossy).collect(), model.task)
}

impl<S: Scalar> BlackBoxModel<S> for ExternalModel {
    fn task(&self) -> TaskKind {
        self.task
    }

    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        predict_via(self, x)
    }

    fn concurrent_safe(&self) -> bool {
        false
    }
}

/// Several children of the same command, each confined to one request at a
/// time.
pub struct ExternalModelPool {
    handles: Vec<ExternalModel>,
    free: Mutex<Vec<usize>>,
    ready: Condvar,
}

impl ExternalModelPool {
    pub fn spawn(
        command: &ModelCommand,
        expected: Option<TaskKind>,
        options: ExternalModelOptions,
        size: usize,
    ) -> Result<Self, ProtocolError> {
        let size = size.max(1);
        let handles: Vec<ExternalModel> = (0..size)
            .map(|_| spawn_external_model(command, expected, options))
            .collect::<Result<_, _>>()?;
        let task = handles[0].task;
        if let Some(h) = handles.iter().find(|h| h.task != task) {
            return Err(ProtocolError::TaskMismatch { expected: task, got: h.task });
        }
        Ok(Self {
            handles,
            free: Mutex::new((0..size).rev().collect()),
            ready: Condvar::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.handles.len()
    }

    fn with_handle<T>(&self, f: impl FnOnce(&ExternalModel) -> T) -> T {
        let idx = {
            let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
            loop {
                if let Some(i) = free.pop() {
                    break i;
                }
                free = self.ready.wait(free).unwrap_or_else(|p| p.into_inner());
            }
        };
        let out = f(&self.handles[idx]);
        self.free.lock().unwrap_or_else(|p| p.into_inner()).push(idx);
        self.ready.notify_one();
        out
    }
}

impl<S: Scalar> BlackBoxModel<S> for ExternalModelPool {
    fn task(&self) -> TaskKind {
        self.handles[0].task
    }

    fn predict(&self, x: &TimeSeries<S>) -> Result<ModelOutput<S>> {
        self.with_handle(|h| predict_via(h, x))
    }

    fn concurrent_safe(&self) -> bool {
        self.handles.len() > 1
    }
}
