//! Clients for the two generator roles: the counterexample proposer and the
//! proof writer. Prompt construction is fixed by golden templates; transport
//! is JSON-over-HTTP or a scripted mock for offline runs.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TEMPERATURE: f64 = 0.9;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;
const HTTP_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Proposer,
    Prover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub role: Role,
    /// HTTP endpoint, or `mock:<path>` for a scripted client.
    pub endpoint: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub samples_per_call: usize,
}

impl GeneratorConfig {
    pub fn new(role: Role, endpoint: &str) -> Self {
        GeneratorConfig {
            role,
            endpoint: endpoint.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            samples_per_call: 1,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if !(self.temperature >= 0.0) {
            return Err(GeneratorError::BadConfig(format!(
                "temperature must be nonnegative, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GeneratorError::BadConfig("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("endpoint `{endpoint}` unavailable after {attempts} attempts: {detail}")]
    EndpointUnavailable {
        endpoint: String,
        attempts: u32,
        detail: String,
    },
    #[error("mock script has no {role:?} response for problem `{problem_id}`")]
    ScriptMiss { problem_id: String, role: Role },
    #[error("mock script `{path}`: {detail}")]
    ScriptLoad { path: String, detail: String },
}

/// The informal-reasoning template. Only `{formal_statement}` is substituted;
/// the doubled braces and backslashes are part of the template text.
const PROPOSER_TEMPLATE: &str = "Find a concrete example to prove the following existential problem.
Note that:
1. Please reason the problem and give the final answer in Natural Language.
2. The final answer should be in the format \\\\boxed{{...}}.
The problem is: {formal_statement}";

/// Renders the proposer prompt around a full problem text (statement with
/// its `sorry` placeholder).
pub fn proposer_prompt_for_text(formal_statement: &str) -> String {
    PROPOSER_TEMPLATE.replace("{formal_statement}", formal_statement)
}

pub fn build_proposer_prompt(problem: &crate::statement::ExistentialProblem) -> String {
    proposer_prompt_for_text(&crate::print::print_problem(problem))
}

/// Renders the prover prompt: statement ends at `:= by` so the completion is
/// the tactic proof. An empty header contributes no line.
pub fn prover_prompt_for_text(example: &str, header: &str, formal_statement: &str) -> String {
    let mut out = format!(
        "Complete the following Lean 4 code using the given concrete example {example}:\n```lean4\n"
    );
    if !header.is_empty() {
        out.push_str(header);
        out.push('\n');
    }
    out.push_str(formal_statement);
    out
}

pub fn build_prover_prompt(
    problem: &crate::statement::ExistentialProblem,
    example: &str,
    header: &str,
) -> String {
    prover_prompt_for_text(example, header, &crate::print::print_problem_header(problem))
}

/// Extracts the last `\boxed{...}` payload, brace-aware, tolerating a
/// doubled backslash. Empty payloads count as extraction failure.
pub fn extract_boxed(response: &str) -> Option<String> {
    let mut last = None;
    let mut search = 0;
    while let Some(found) = response[search..].find("\\boxed") {
        let start = search + found;
        let after = start + "\\boxed".len();
        let rest = &response[after..];
        let brace_off = rest.find(|c: char| !c.is_whitespace());
        if let Some(off) = brace_off {
            if rest[off..].starts_with('{') {
                if let Some(inner) = balanced_braces(&rest[off..]) {
                    last = Some(inner);
                }
            }
        }
        search = after;
    }
    let inner = last?;
    let trimmed = inner.trim();
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_string())
    }
}

/// Contents of the brace group starting at `s[0] == '{'`, if balanced.
fn balanced_braces(s: &str) -> Option<String> {
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(s[1..i].to_string());
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCandidate {
    pub problem_id: String,
    pub response: String,
    /// Extracted boxed answer; `None` records an extraction failure while
    /// keeping the candidate.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofCandidate {
    pub problem_id: String,
    pub response: String,
    /// Tactic body ready for a ProofJob; `None` records an empty extraction.
    pub proof: Option<String>,
    /// True when the response restated a different declaration header and
    /// verification will use the canonical statement instead.
    pub header_mismatch: bool,
}

/// Pulls a tactic proof out of a prover response: contents of the last code
/// fence, split at the first `:= by`. Responses without fences are treated
/// as bare tactic text.
pub fn extract_proof(response: &str, canonical_header: &str) -> ProofExtraction {
    let body_text = last_fenced_block(response).unwrap_or_else(|| response.trim().to_string());
    let (stated_header, proof) = match body_text.find(":= by") {
        Some(idx) => {
            let header = &body_text[..idx + ":= by".len()];
            let proof = &body_text[idx + ":= by".len()..];
            (Some(header.to_string()), proof.to_string())
        }
        None => {
            let t = body_text.trim_start();
            let proof = t
                .strip_prefix("by\n")
                .or_else(|| t.strip_prefix("by "))
                .unwrap_or(t);
            (None, proof.to_string())
        }
    };
    let header_mismatch = stated_header
        .as_deref()
        .is_some_and(|h| normalize_ws(h) != normalize_ws(canonical_header));
    let proof = crate::statement::dedent(&proof);
    ProofExtraction {
        proof: if proof.trim().is_empty() {
            None
        } else {
            Some(proof)
        },
        header_mismatch,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofExtraction {
    pub proof: Option<String>,
    pub header_mismatch: bool,
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Contents of the last ``` fence, tolerating `lean4`/`lean` info strings
/// and a missing closing fence.
fn last_fenced_block(response: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in response.lines() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => {
                    let _info = rest.trim();
                    current = Some(String::new());
                }
            }
            continue;
        }
        if let Some(block) = current.as_mut() {
            if !block.is_empty() {
                block.push('\n');
            }
            block.push_str(line);
        }
    }
    if let Some(unclosed) = current {
        blocks.push(unclosed);
    }
    blocks.pop()
}

/// A completion source. `n` asks for that many samples for one prompt.
pub trait GeneratorClient: Sync {
    fn complete(
        &self,
        problem_id: &str,
        prompt: &str,
        cfg: &GeneratorConfig,
        n: usize,
    ) -> Result<Vec<String>, GeneratorError>;
}

/// Scripted client: a JSONL file of `{problem_id, role, response}` records.
/// Repeated records for one key are served in file order, cycling.
pub struct MockScript {
    responses: HashMap<(String, Role), Vec<String>>,
    cursors: Mutex<HashMap<(String, Role), usize>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ScriptRecord {
    problem_id: String,
    role: Role,
    response: String,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GeneratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| GeneratorError::ScriptLoad {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut responses: HashMap<(String, Role), Vec<String>> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScriptRecord =
                serde_json::from_str(line).map_err(|e| GeneratorError::ScriptLoad {
                    path: path.display().to_string(),
                    detail: format!("line {}: {e}", lineno + 1),
                })?;
            responses
                .entry((rec.problem_id, rec.role))
                .or_default()
                .push(rec.response);
        }
        Ok(MockScript {
            responses,
            cursors: Mutex::new(HashMap::new()),
        })
    }
}

impl GeneratorClient for MockScript {
    fn complete(
        &self,
        problem_id: &str,
        _prompt: &str,
        cfg: &GeneratorConfig,
        n: usize,
    ) -> Result<Vec<String>, GeneratorError> {
        let key = (problem_id.to_string(), cfg.role);
        let Some(pool) = self.responses.get(&key) else {
            return Err(GeneratorError::ScriptMiss {
                problem_id: problem_id.to_string(),
                role: cfg.role,
            });
        };
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(key).or_insert(0);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(pool[*cursor % pool.len()].clone());
            *cursor += 1;
        }
        Ok(out)
    }
}

/// JSON-over-HTTP client: POST `{prompt, temperature, max_tokens, n}`,
/// expect `{choices: [{text}]}`.
pub struct HttpClient {
    url: String,
}

impl HttpClient {
    pub fn new(endpoint: &str) -> Self {
        let url = if endpoint.contains("://") {
            endpoint.to_string()
        } else {
            format!("http://{endpoint}")
        };
        HttpClient { url }
    }
}

impl GeneratorClient for HttpClient {
    fn complete(
        &self,
        _problem_id: &str,
        prompt: &str,
        cfg: &GeneratorConfig,
        n: usize,
    ) -> Result<Vec<String>, GeneratorError> {
        let body = serde_json::json!({
            "prompt": prompt,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "n": n,
        });
        let mut last_err = String::new();
        for attempt in 0..HTTP_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(200 << attempt));
            }
            match ureq::post(&self.url).send_json(&body) {
                Ok(mut response) => {
                    let parsed: Result<serde_json::Value, _> = response.body_mut().read_json();
                    match parsed {
                        Ok(v) => {
                            let texts: Option<Vec<String>> =
                                v.get("choices").and_then(|c| c.as_array()).map(|arr| {
                                    arr.iter()
                                        .filter_map(|ch| ch.get("text"))
                                        .filter_map(|t| t.as_str())
                                        .map(String::from)
                                        .collect()
                                });
                            match texts {
                                Some(t) if t.len() == n => return Ok(t),
                                Some(t) => {
                                    last_err =
                                        format!("expected {n} choices, got {}", t.len());
                                }
                                None => last_err = "response has no choices array".into(),
                            }
                        }
                        Err(e) => last_err = format!("bad response body: {e}"),
                    }
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(GeneratorError::EndpointUnavailable {
            endpoint: self.url.clone(),
            attempts: HTTP_ATTEMPTS,
            detail: last_err,
        })
    }
}

/// Picks a client for an endpoint: `mock:<path>` loads a script, anything
/// else is an HTTP endpoint.
pub fn resolve_client(endpoint: &str) -> Result<Box<dyn GeneratorClient>, GeneratorError> {
    match endpoint.strip_prefix("mock:") {
        Some(path) => Ok(Box::new(MockScript::load(Path::new(path))?)),
        None => Ok(Box::new(HttpClient::new(endpoint))),
    }
}

/// Samples `n` counterexample candidates for one problem. Extraction failure
/// is per candidate and non-fatal.
pub fn propose(
    client: &dyn GeneratorClient,
    problem_id: &str,
    problem_text: &str,
    cfg: &GeneratorConfig,
    n: usize,
) -> Result<Vec<CounterexampleCandidate>, GeneratorError> {
    let prompt = proposer_prompt_for_text(problem_text);
    let responses = client.complete(problem_id, &prompt, cfg, n)?;
    Ok(responses
        .into_iter()
        .map(|response| {
            let witness = extract_boxed(&response);
            CounterexampleCandidate {
                problem_id: problem_id.to_string(),
                response,
                witness,
            }
        })
        .collect())
}

/// Samples `n` proofs of `statement_header` (a declaration ending at
/// `:= by`) under the given witness.
pub fn prove(
    client: &dyn GeneratorClient,
    problem_id: &str,
    statement_header: &str,
    witness: &str,
    preamble: &str,
    cfg: &GeneratorConfig,
    n: usize,
) -> Result<Vec<ProofCandidate>, GeneratorError> {
    let prompt = prover_prompt_for_text(witness, preamble, statement_header);
    let responses = client.complete(problem_id, &prompt, cfg, n)?;
    Ok(responses
        .into_iter()
        .map(|response| {
            let extraction = extract_proof(&response, statement_header);
            ProofCandidate {
                problem_id: problem_id.to_string(),
                response,
                proof: extraction.proof,
                header_mismatch: extraction.header_mismatch,
            }
        })
        .collect())
}

/// Archives raw responses in the mock-script schema, so any run transcript
/// can be replayed as a script.
pub struct TranscriptWriter {
    file: Mutex<std::fs::File>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(TranscriptWriter {
            file: Mutex::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)?,
            ),
        })
    }

    pub fn record(&self, problem_id: &str, role: Role, response: &str) -> std::io::Result<()> {
        let line = serde_json::to_string(&ScriptRecord {
            problem_id: problem_id.to_string(),
            role,
            response: response.to_string(),
        })
        .expect("transcript record serializes");
        let mut file = self.file.lock().expect("transcript lock");
        writeln!(file, "{line}")?;
        file.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxed_extraction_takes_the_last_and_handles_nesting() {
        assert_eq!(extract_boxed("answer \\boxed{7}"), Some("7".into()));
        assert_eq!(
            extract_boxed("first \\boxed{1} then \\boxed{2}"),
            Some("2".into())
        );
        assert_eq!(
            extract_boxed("\\boxed{x = \\frac{1}{2}}"),
            Some("x = \\frac{1}{2}".into())
        );
        assert_eq!(extract_boxed("\\boxed {  spaced  }"), Some("spaced".into()));
        assert_eq!(extract_boxed("\\\\boxed{double}"), Some("double".into()));
        assert_eq!(extract_boxed("no box here"), None);
        assert_eq!(extract_boxed("\\boxed{}"), None);
        assert_eq!(extract_boxed("\\boxed{unbalanced"), None);
        // An unbalanced later box does not clobber an earlier good one.
        assert_eq!(
            extract_boxed("\\boxed{good} \\boxed{bad"),
            Some("good".into())
        );
    }

    #[test]
    fn proposer_prompt_substitutes_exactly_once() {
        let stmt = "theorem t : \u{2203} n : \u{2115}, \u{ac} (n \u{2265} 1) := by sorry";
        let p = proposer_prompt_for_text(stmt);
        assert!(p.starts_with(
            "Find a concrete example to prove the following existential problem."
        ));
        assert_eq!(p.matches(stmt).count(), 1);
        assert!(!p.contains("{formal_statement}"));
        assert!(p.contains("\\\\boxed{{...}}"));
    }

    #[test]
    fn prover_prompt_embeds_witness_and_fence() {
        let p = prover_prompt_for_text(
            "0",
            "",
            "theorem t : \u{2203} n : \u{2115}, \u{ac} (n \u{2265} 1) := by",
        );
        assert!(p.starts_with(
            "Complete the following Lean 4 code using the given concrete example 0:\n```lean4\n"
        ));
        assert!(p.ends_with(":= by"));
        // Empty header contributes no blank line.
        assert!(p.contains("```lean4\ntheorem t"));

        let with_header = prover_prompt_for_text("0", "import Mathlib", "theorem t : True := by");
        assert!(with_header.contains("```lean4\nimport Mathlib\ntheorem t"));
    }

    #[test]
    fn unicode_survives_substitution() {
        let stmt = "theorem a : \u{2203} x : \u{2124}, x \u{2260} 0 \u{2227} x \u{2264} -1 := by";
        let p = prover_prompt_for_text("x = -1", "", stmt);
        assert!(p.contains(stmt));
    }

    #[test]
    fn proof_extraction_from_fenced_response() {
        let canonical = "theorem p : \u{2203} n : \u{2115}, n = 0 := by";
        let response = format!(
            "Thinking...\n```lean4\n{canonical}\n  use 0\n  rfl\n```\ntrailing prose"
        );
        let e = extract_proof(&response, canonical);
        assert_eq!(e.proof.as_deref(), Some("use 0\nrfl"));
        assert!(!e.header_mismatch);
    }

    #[test]
    fn restated_header_with_other_name_is_flagged() {
        let canonical = "theorem p : \u{2203} n : \u{2115}, n = 0 := by";
        let response =
            "```lean4\ntheorem other : \u{2203} n : \u{2115}, n = 5 := by\n  use 5\n```";
        let e = extract_proof(response, canonical);
        assert_eq!(e.proof.as_deref(), Some("use 5"));
        assert!(e.header_mismatch);
    }

    #[test]
    fn bare_tactic_responses_are_accepted() {
        let canonical = "theorem p : \u{2203} n : \u{2115}, n = 0 := by";
        let e = extract_proof("by exact \u{27e8}0, by decide\u{27e9}", canonical);
        assert_eq!(e.proof.as_deref(), Some("exact \u{27e8}0, by decide\u{27e9}"));
        assert!(!e.header_mismatch);

        let e = extract_proof("use 0", canonical);
        assert_eq!(e.proof.as_deref(), Some("use 0"));

        let e = extract_proof("   ", canonical);
        assert_eq!(e.proof, None);
    }

    #[test]
    fn last_fence_wins_and_unclosed_fences_count() {
        let response = "```lean\nfirst\n```\nmore\n```lean4\nsecond block\n  line";
        assert_eq!(
            last_fenced_block(response),
            Some("second block\n  line".into())
        );
        assert_eq!(last_fenced_block("no fences"), None);
    }

    fn write_script(lines: &[serde_json::Value]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn mock_script_cycles_per_key() {
        let f = write_script(&[
            serde_json::json!({"problem_id": "p", "role": "proposer", "response": "\\boxed{1}"}),
            serde_json::json!({"problem_id": "p", "role": "proposer", "response": "\\boxed{2}"}),
            serde_json::json!({"problem_id": "p", "role": "prover", "response": "use 1"}),
        ]);
        let script = MockScript::load(f.path()).unwrap();
        let cfg = GeneratorConfig::new(Role::Proposer, "mock:ignored");
        let got = script.complete("p", "prompt", &cfg, 3).unwrap();
        assert_eq!(got, vec!["\\boxed{1}", "\\boxed{2}", "\\boxed{1}"]);

        let cfg = GeneratorConfig::new(Role::Prover, "mock:ignored");
        assert_eq!(script.complete("p", "x", &cfg, 1).unwrap(), vec!["use 1"]);
        assert!(matches!(
            script.complete("q", "x", &cfg, 1),
            Err(GeneratorError::ScriptMiss { .. })
        ));
    }

    #[test]
    fn propose_records_extraction_failures_without_dropping() {
        let f = write_script(&[
            serde_json::json!({"problem_id": "p", "role": "proposer", "response": "the answer is \\boxed{n = 3}"}),
            serde_json::json!({"problem_id": "p", "role": "proposer", "response": "I am not sure."}),
        ]);
        let script = MockScript::load(f.path()).unwrap();
        let cfg = GeneratorConfig::new(Role::Proposer, "mock:x");
        let cands = propose(&script, "p", "theorem ...", &cfg, 2).unwrap();
        assert_eq!(cands.len(), 2);
        assert_eq!(cands[0].witness.as_deref(), Some("n = 3"));
        assert_eq!(cands[1].witness, None);
    }

    #[test]
    fn config_validation() {
        let mut cfg = GeneratorConfig::new(Role::Proposer, "x");
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.temperature, DEFAULT_TEMPERATURE);
        assert_eq!(cfg.max_tokens, DEFAULT_MAX_TOKENS);
        cfg.temperature = -0.1;
        assert!(cfg.validate().is_err());
        cfg.temperature = f64::NAN;
        assert!(cfg.validate().is_err());
        cfg.temperature = 0.9;
        cfg.max_tokens = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn transcripts_replay_as_scripts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcripts").join("proposer.jsonl");
        let w = TranscriptWriter::create(&path).unwrap();
        w.record("p", Role::Proposer, "\\boxed{5}").unwrap();
        w.record("p", Role::Proposer, "\\boxed{6}").unwrap();
        drop(w);

        let script = MockScript::load(&path).unwrap();
        let cfg = GeneratorConfig::new(Role::Proposer, "mock:x");
        assert_eq!(
            script.complete("p", "prompt", &cfg, 2).unwrap(),
            vec!["\\boxed{5}", "\\boxed{6}"]
        );
    }
}
