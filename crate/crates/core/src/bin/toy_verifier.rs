//! Standalone checker speaking the NDJSON wire protocol over stdio or TCP,
//! backed by the toy ground checker. Lets the subprocess and TCP client
//! paths run end to end without a real proof assistant.

use std::io::{BufRead, BufReader, Write};
use std::process::ExitCode;

use cexmut::verify::toy::{ToyBackend, DEFAULT_BOUND};
use cexmut::verify::{CheckerBackend, Limits, ProofJob, Severity};

const USAGE: &str = "usage: toy-verifier [--bound N] [--tcp ADDR]

Serves NDJSON check requests over stdin/stdout, or over TCP with --tcp.
Requests: {\"id\",\"cmd\":\"check\",\"statement\",\"proof\",\"timeout_s\"}
Responses: {\"id\",\"status\",\"messages\":[...],\"elapsed_s\"}";

fn main() -> ExitCode {
    let mut bound = DEFAULT_BOUND;
    let mut tcp: Option<String> = None;
    let mut args = std::env::args().skip(1);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--bound" => match args.next().and_then(|v| v.parse().ok()) {
                Some(v) => bound = v,
                None => return usage_error("--bound needs an integer"),
            },
            "--tcp" => match args.next() {
                Some(v) => tcp = Some(v),
                None => return usage_error("--tcp needs an address"),
            },
            "--help" | "-h" => {
                println!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            other => return usage_error(&format!("unknown argument `{other}`")),
        }
    }

    let backend = ToyBackend { bound };
    match tcp {
        None => {
            let stdin = std::io::stdin().lock();
            let mut stdout = std::io::stdout().lock();
            serve(stdin, &mut stdout, &backend);
            ExitCode::SUCCESS
        }
        Some(addr) => serve_tcp(&addr, backend),
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("toy-verifier: {msg}\n{USAGE}");
    ExitCode::from(2)
}

fn serve_tcp(addr: &str, backend: ToyBackend) -> ExitCode {
    let listener = match std::net::TcpListener::bind(addr) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("toy-verifier: bind {addr}: {e}");
            return ExitCode::from(2);
        }
    };
    eprintln!(
        "toy-verifier: listening on {}",
        listener.local_addr().map_or(addr.to_string(), |a| a.to_string())
    );
    std::thread::scope(|scope| {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let backend = &backend;
            scope.spawn(move || {
                let reader = BufReader::new(stream.try_clone().expect("clone tcp stream"));
                let mut writer = stream;
                serve(reader, &mut writer, backend);
            });
        }
    });
    ExitCode::SUCCESS
}

/// Handles one NDJSON session: a response line per request line, until EOF.
fn serve(reader: impl BufRead, writer: &mut impl Write, backend: &ToyBackend) {
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = handle_line(&line, backend);
        if writeln!(writer, "{response}").and_then(|_| writer.flush()).is_err() {
            break;
        }
    }
}

fn handle_line(line: &str, backend: &ToyBackend) -> serde_json::Value {
    let parsed: Result<serde_json::Value, _> = serde_json::from_str(line);
    let Ok(req) = parsed else {
        return error_response("unknown", "request is not valid JSON");
    };
    let id = match req.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        _ => return error_response("unknown", "request has no id"),
    };
    if req.get("cmd").and_then(|c| c.as_str()) != Some("check") {
        return error_response(&id, "unsupported cmd, expected \"check\"");
    }
    let (Some(statement), Some(proof)) = (
        req.get("statement").and_then(|v| v.as_str()),
        req.get("proof").and_then(|v| v.as_str()),
    ) else {
        return error_response(&id, "request missing statement or proof");
    };
    let timeout_s = req
        .get("timeout_s")
        .and_then(|v| v.as_f64())
        .unwrap_or(cexmut::verify::DEFAULT_TIMEOUT_S);

    let job = ProofJob {
        id: id.clone(),
        statement: statement.to_string(),
        proof: proof.to_string(),
        limits: Limits {
            timeout_s,
            ..Default::default()
        },
    };
    let result = backend.check(&job);
    let messages: Vec<serde_json::Value> = result
        .diagnostics
        .iter()
        .map(|d| {
            serde_json::json!({
                "severity": match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                    Severity::Info => "info",
                },
                "message": d.message,
            })
        })
        .collect();
    serde_json::json!({
        "id": result.id,
        "status": result.status,
        "messages": messages,
        "elapsed_s": result.elapsed_s,
    })
}

fn error_response(id: &str, message: &str) -> serde_json::Value {
    serde_json::json!({
        "id": id,
        "status": "failed",
        "messages": [{"severity": "error", "message": message}],
        "elapsed_s": 0.0,
    })
}
