//! Out-of-process model adapter: newline-delimited JSON over the child's
//! standard input/output, one request per line, one response per line, in
//! order.
//!
//! Requests:
//! `{"op":"draft","prefix":[ids],"gamma":k}` ->
//! `{"tokens":[ids],"top_prob":[floats]}`;
//! `{"op":"verify","prefix":[ids],"draft":[ids],"exit":i}` ->
//! `{"accepted":d,"next":id,"confidence":f}`.

use crate::backend::{Drafter, Verifier};
use crate::decode::{BatchPayload, DraftBatch, DraftMode, PayloadMode, VerifyMode, VerifyResult};
use crate::error::{Error, Result};
use crate::types::TokenSeq;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum Request<'a> {
    Draft {
        prefix: &'a [u32],
        gamma: usize,
    },
    Verify {
        prefix: &'a [u32],
        draft: &'a [u32],
        exit: usize,
    },
}

#[derive(Deserialize)]
struct DraftResponse {
    tokens: Vec<u32>,
    top_prob: Vec<f64>,
}

#[derive(Deserialize)]
struct VerifyResponse {
    accepted: usize,
    next: u32,
    confidence: f64,
}

struct Pipes {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// A model served by a child process.
pub struct StdioModel {
    child: Mutex<Child>,
    pipes: Mutex<Pipes>,
    num_exits: usize,
}

impl StdioModel {
    /// Spawn `command` (split on whitespace) and speak the line protocol
    /// with it. `num_exits` is the exit count the child's `verify` honors.
    pub fn spawn(command: &str, num_exits: usize) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::config("adapter command is empty"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::config(format!("cannot spawn adapter '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout was piped"));
        Ok(StdioModel {
            child: Mutex::new(child),
            pipes: Mutex::new(Pipes { stdin, stdout }),
            num_exits,
        })
    }

    fn round_trip<R: for<'de> Deserialize<'de>>(&self, req: &Request) -> Result<R> {
        let mut pipes = self.pipes.lock().expect("adapter pipes poisoned");
        let line = serde_json::to_string(req)
            .map_err(|e| Error::protocol(format!("adapter request encode: {e}")))?;
        pipes.stdin.write_all(line.as_bytes())?;
        pipes.stdin.write_all(b"\n")?;
        pipes.stdin.flush()?;
        let mut reply = String::new();
        let n = pipes.stdout.read_line(&mut reply)?;
        if n == 0 {
            return Err(Error::protocol("adapter closed its stdout"));
        }
        serde_json::from_str(reply.trim_end())
            .map_err(|e| Error::protocol(format!("adapter response decode: {e}")))
    }
}

impl Drop for StdioModel {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drafter for StdioModel {
    fn draft_batch(
        &self,
        prefix: &TokenSeq,
        gamma: usize,
        _mode: DraftMode,
        _payload_mode: PayloadMode,
        _session_seed: u64,
        round_id: u32,
    ) -> Result<DraftBatch> {
        let resp: DraftResponse = self.round_trip(&Request::Draft {
            prefix: prefix.as_slice(),
            gamma,
        })?;
        if resp.tokens.len() != gamma || resp.top_prob.len() != gamma {
            return Err(Error::protocol(format!(
                "adapter drafted {} tokens / {} probs, expected {gamma}",
                resp.tokens.len(),
                resp.top_prob.len()
            )));
        }
        Ok(DraftBatch {
            round_id,
            prefix_len: prefix.len(),
            tokens: TokenSeq::new(resp.tokens),
            payload: BatchPayload::Compact(resp.top_prob),
        })
    }
}

impl Verifier for StdioModel {
    fn exit_count(&self) -> usize {
        self.num_exits
    }

    fn verify_batch(
        &self,
        prefix: &TokenSeq,
        batch: &DraftBatch,
        _mode: VerifyMode,
        _rng_seed: u64,
    ) -> Result<Vec<VerifyResult>> {
        let mut results = Vec::with_capacity(self.num_exits);
        for exit in 1..=self.num_exits {
            let resp: VerifyResponse = self.round_trip(&Request::Verify {
                prefix: prefix.as_slice(),
                draft: batch.tokens.as_slice(),
                exit,
            })?;
            if resp.accepted > batch.gamma() {
                return Err(Error::protocol("adapter accepted more tokens than drafted"));
            }
            let mut output = TokenSeq::new(batch.tokens.as_slice()[..resp.accepted].to_vec());
            output.push(resp.next);
            // The adapter reports one aggregate confidence for the output.
            let per_token_probs = vec![resp.confidence; resp.accepted + 1];
            results.push(VerifyResult {
                exit_index: exit,
                accepted: resp.accepted,
                output,
                per_token_probs,
                confidence: resp.confidence,
            });
        }
        Ok(results)
    }
}
