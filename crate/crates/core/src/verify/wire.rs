//! NDJSON wire protocol for external proof checkers.
//!
//! One request per line: `{"id","cmd":"check","statement","proof","timeout_s"}`.
//! One response per line: `{"id","status","messages":[...],"elapsed_s"}`. The
//! memory bound never crosses the wire; checkers own their resource limits
//! and report `resource-exhausted` when they hit them.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::mutate::{OracleError, UsageOracle};
use crate::print::print_statement_header;
use crate::statement::TheoremStatement;
use crate::verify::{
    CheckerBackend, Diagnostic, ProofJob, Status, VerificationResult,
};

/// Extra seconds past the job's own timeout before the client gives up on a
/// checker that enforces timeouts remotely.
const TIMEOUT_GRACE_S: f64 = 10.0;

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    id: &'a str,
    cmd: &'a str,
    statement: &'a str,
    proof: &'a str,
    timeout_s: f64,
}

/// Encodes one request line, newline not included.
pub fn encode_request(job: &ProofJob) -> String {
    serde_json::to_string(&WireRequest {
        id: &job.id,
        cmd: "check",
        statement: &job.statement,
        proof: &job.proof,
        timeout_s: job.limits.timeout_s,
    })
    .expect("request serialization cannot fail")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedResponse {
    pub id: String,
    pub status: Status,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("response is not a JSON object: {0}")]
    NotObject(String),
    #[error("response missing field `{0}`")]
    MissingField(&'static str),
    #[error("response field `{0}` has the wrong type")]
    BadField(&'static str),
}

/// Decodes one response line. Total on arbitrary input: malformed lines
/// produce an error, never a panic. An unrecognized status string decodes to
/// `ProtocolError` with a diagnostic, since the checker did speak the frame
/// format and the id is still usable.
pub fn decode_response(line: &str) -> Result<DecodedResponse, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| DecodeError::NotObject(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| DecodeError::NotObject("not an object".into()))?;

    let id = match obj.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(DecodeError::BadField("id")),
        None => return Err(DecodeError::MissingField("id")),
    };

    let status_raw = obj
        .get("status")
        .ok_or(DecodeError::MissingField("status"))?
        .as_str()
        .ok_or(DecodeError::BadField("status"))?;
    let mut diagnostics = Vec::new();
    let status = match status_raw {
        "verified" => Status::Verified,
        "failed" => Status::Failed,
        "timeout" => Status::Timeout,
        "resource-exhausted" => Status::ResourceExhausted,
        other => {
            diagnostics.push(Diagnostic::error(&format!(
                "checker reported unknown status `{other}`"
            )));
            Status::ProtocolError
        }
    };

    if let Some(messages) = obj.get("messages") {
        let list = messages.as_array().ok_or(DecodeError::BadField("messages"))?;
        for m in list {
            match m {
                serde_json::Value::String(s) => diagnostics.push(Diagnostic::from_message(s)),
                serde_json::Value::Object(o) => {
                    let message = o
                        .get("message")
                        .and_then(|v| v.as_str())
                        .ok_or(DecodeError::BadField("messages"))?;
                    let d = match o.get("severity").and_then(|v| v.as_str()) {
                        Some("warning") => Diagnostic::warning(message),
                        Some("info") => Diagnostic::info(message),
                        // Unknown severities read as errors so they can never
                        // soften a verdict.
                        _ => Diagnostic::error(message),
                    };
                    diagnostics.push(d);
                }
                _ => return Err(DecodeError::BadField("messages")),
            }
        }
    }

    let elapsed_s = match obj.get("elapsed_s") {
        Some(v) => v.as_f64().ok_or(DecodeError::BadField("elapsed_s"))?,
        None => 0.0,
    };

    Ok(DecodedResponse {
        id,
        status,
        diagnostics,
        elapsed_s,
    })
}

fn protocol_error(job: &ProofJob, elapsed: Duration, detail: &str) -> VerificationResult {
    VerificationResult {
        id: job.id.clone(),
        status: Status::ProtocolError,
        diagnostics: vec![Diagnostic::error(detail)],
        elapsed_s: elapsed.as_secs_f64(),
        contains_sorry: false,
    }
    .normalized(&job.proof)
}

fn finish(job: &ProofJob, elapsed: Duration, decoded: DecodedResponse) -> VerificationResult {
    if decoded.id != job.id {
        return protocol_error(
            job,
            elapsed,
            &format!("response id `{}` does not match request id", decoded.id),
        );
    }
    VerificationResult {
        id: decoded.id,
        status: decoded.status,
        diagnostics: decoded.diagnostics,
        elapsed_s: decoded.elapsed_s,
        contains_sorry: false,
    }
    .normalized(&job.proof)
}

/// Splits a command string into argv, honoring single and double quotes.
pub fn shell_split(cmd: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut pending = false;
    for c in cmd.chars() {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                } else {
                    cur.push(c);
                }
            }
            None => match c {
                '\'' | '"' => {
                    quote = Some(c);
                    pending = true;
                }
                c if c.is_whitespace() => {
                    if pending || !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                        pending = false;
                    }
                }
                c => cur.push(c),
            },
        }
    }
    if pending || !cur.is_empty() {
        out.push(cur);
    }
    out
}

struct Conn {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Conn {
    fn spawn(argv: &[String]) -> std::io::Result<Conn> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Conn {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Drop for Conn {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Checker client that talks NDJSON to a subprocess's stdio. Processes are
/// pooled and reused across requests; a process that times out or garbles a
/// frame is killed rather than reused.
pub struct SubprocessBackend {
    argv: Vec<String>,
    pool: Mutex<Vec<Conn>>,
    grace_s: f64,
}

impl SubprocessBackend {
    pub fn new(cmd: &str) -> Result<Self, String> {
        let argv = shell_split(cmd);
        if argv.is_empty() {
            return Err("empty verifier command".into());
        }
        Ok(SubprocessBackend {
            argv,
            pool: Mutex::new(Vec::new()),
            grace_s: TIMEOUT_GRACE_S,
        })
    }

    #[cfg(test)]
    fn with_grace(mut self, grace_s: f64) -> Self {
        self.grace_s = grace_s;
        self
    }
}

impl CheckerBackend for SubprocessBackend {
    fn check(&self, job: &ProofJob) -> VerificationResult {
        let start = Instant::now();
        let mut conn = match self.pool.lock().expect("conn pool lock").pop() {
            Some(c) => c,
            None => match Conn::spawn(&self.argv) {
                Ok(c) => c,
                Err(e) => {
                    return protocol_error(
                        job,
                        start.elapsed(),
                        &format!("failed to start verifier `{}`: {e}", self.argv[0]),
                    )
                }
            },
        };

        let line = encode_request(job);
        if let Err(e) = writeln!(conn.stdin, "{line}").and_then(|_| conn.stdin.flush()) {
            return protocol_error(job, start.elapsed(), &format!("write to verifier failed: {e}"));
        }

        let wait = Duration::from_secs_f64(job.limits.timeout_s + self.grace_s);
        match conn.lines.recv_timeout(wait) {
            Ok(Ok(line)) => match decode_response(&line) {
                Ok(decoded) => {
                    let result = finish(job, start.elapsed(), decoded);
                    if result.status != Status::ProtocolError {
                        self.pool.lock().expect("conn pool lock").push(conn);
                    }
                    result
                }
                Err(e) => protocol_error(job, start.elapsed(), &format!("bad response frame: {e}")),
            },
            Ok(Err(e)) => {
                protocol_error(job, start.elapsed(), &format!("read from verifier failed: {e}"))
            }
            Err(RecvTimeoutError::Timeout) => VerificationResult {
                id: job.id.clone(),
                status: Status::Timeout,
                diagnostics: vec![Diagnostic::error(&format!(
                    "no response within {:.1}s; verifier killed",
                    wait.as_secs_f64()
                ))],
                elapsed_s: start.elapsed().as_secs_f64(),
                contains_sorry: false,
            }
            .normalized(&job.proof),
            Err(RecvTimeoutError::Disconnected) => {
                protocol_error(job, start.elapsed(), "verifier process exited mid-request")
            }
        }
    }
}

/// Checker client over TCP, one connection per request.
pub struct TcpBackend {
    addr: String,
    grace_s: f64,
}

impl TcpBackend {
    pub fn new(addr: &str) -> Self {
        TcpBackend {
            addr: addr.to_string(),
            grace_s: TIMEOUT_GRACE_S,
        }
    }
}

impl CheckerBackend for TcpBackend {
    fn check(&self, job: &ProofJob) -> VerificationResult {
        let start = Instant::now();
        let mut stream = match TcpStream::connect(&self.addr) {
            Ok(s) => s,
            Err(e) => {
                return protocol_error(
                    job,
                    start.elapsed(),
                    &format!("connect to {} failed: {e}", self.addr),
                )
            }
        };
        let wait = Duration::from_secs_f64(job.limits.timeout_s + self.grace_s);
        let _ = stream.set_read_timeout(Some(wait));

        let line = encode_request(job);
        if let Err(e) = writeln!(stream, "{line}").and_then(|_| stream.flush()) {
            return protocol_error(job, start.elapsed(), &format!("write to verifier failed: {e}"));
        }

        let mut reader = BufReader::new(stream);
        let mut response = String::new();
        match reader.read_line(&mut response) {
            Ok(0) => protocol_error(job, start.elapsed(), "verifier closed the connection"),
            Ok(_) => match decode_response(response.trim_end()) {
                Ok(decoded) => finish(job, start.elapsed(), decoded),
                Err(e) => protocol_error(job, start.elapsed(), &format!("bad response frame: {e}")),
            },
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                VerificationResult {
                    id: job.id.clone(),
                    status: Status::Timeout,
                    diagnostics: vec![Diagnostic::error(&format!(
                        "no response within {:.1}s",
                        wait.as_secs_f64()
                    ))],
                    elapsed_s: start.elapsed().as_secs_f64(),
                    contains_sorry: false,
                }
                .normalized(&job.proof)
            }
            Err(e) => protocol_error(job, start.elapsed(), &format!("read failed: {e}")),
        }
    }
}

/// Hypothesis-usage oracle backed by a real checker: replays the theorem's
/// own proof and reads `unused variable` diagnostics off the result.
pub struct CheckerUsage<'a> {
    pub backend: &'a dyn CheckerBackend,
}

impl UsageOracle for CheckerUsage<'_> {
    fn unused_hypotheses(&self, theorem: &TheoremStatement) -> Result<Vec<usize>, OracleError> {
        let Some(proof) = &theorem.proof else {
            return Err(OracleError::Unavailable(
                "theorem carries no proof to replay".into(),
            ));
        };
        if !proof.is_tactic() {
            return Err(OracleError::Unavailable(
                "only tactic proofs can be replayed over the wire".into(),
            ));
        }
        let job = ProofJob {
            id: format!("usage::{}", theorem.name),
            statement: print_statement_header(theorem),
            proof: proof.body(),
            limits: Default::default(),
        };
        let result = self.backend.check(&job);
        if result.status != Status::Verified {
            return Err(OracleError::Backend(format!(
                "proof replay for `{}` ended {:?}",
                theorem.name, result.status
            )));
        }
        let mut unused = Vec::new();
        for d in &result.diagnostics {
            if let Some(name) = unused_variable_name(&d.message) {
                if let Some(idx) = theorem.hypotheses.iter().position(|h| h.name == name) {
                    if !unused.contains(&idx) {
                        unused.push(idx);
                    }
                }
            }
        }
        unused.sort_unstable();
        Ok(unused)
    }
}

/// Pulls the variable name out of an `unused variable \u{2018}h\u{2019}` diagnostic,
/// accepting backtick, straight-quote, and curly-quote delimiters.
fn unused_variable_name(message: &str) -> Option<String> {
    let rest = message.split("unused variable").nth(1)?;
    let rest = rest.trim_start_matches([' ', ':', '`', '\'', '\u{2018}']);
    let end = rest
        .find(['`', '\'', '\u{2019}'])
        .unwrap_or(rest.len());
    let name = rest[..end].trim();
    if name.is_empty() {
        None
    } else {
        Some(name.to_string())
    }
}
