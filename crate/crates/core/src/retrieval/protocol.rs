//! Line-delimited JSON protocol for external scorers.
//!
//! Each request is one line `{"id": u64, "concepts": [..], "sentence": ".."}`
//! and each answer one line `{"id": u64, "score": f64}`. Answers may come back
//! in any order. A request `{"id": 0, "ping": true}` must be answered (any
//! line with id 0) within the client's timeout.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RetrieverKind, Scorer};
use crate::corpus::{ConceptSet, SentenceId, SentenceRecord};
use crate::error::{Error, Result};

pub const PING_ID: u64 = 0;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub concepts: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub sentence: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ping: bool,
}

impl ScoreRequest {
    pub fn ping() -> Self {
        ScoreRequest {
            id: PING_ID,
            concepts: Vec::new(),
            sentence: String::new(),
            ping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pong: bool,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<String>,
    next_id: u64,
    child: Option<Child>,
}

impl Connection {
    fn send(&mut self, request: &ScoreRequest) -> Result<()> {
        let mut line =
            serde_json::to_string(request).map_err(|e| Error::json("scorer request", e))?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .map_err(|e| Error::Protocol(format!("write failed: {e}")))
    }

    fn flush(&mut self) -> Result<()> {
        self.writer
            .flush()
            .map_err(|e| Error::Protocol(format!("flush failed: {e}")))
    }

    fn receive(&self, timeout: Duration) -> Result<ScoreResponse> {
        let line = self.lines.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => Error::Protocol(format!("no answer within {timeout:?}")),
            RecvTimeoutError::Disconnected => {
                Error::Protocol("scorer closed the connection".to_string())
            }
        })?;
        serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("malformed response {line:?}: {e}")))
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.writer = Box::new(std::io::sink());
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Client for a scorer speaking the line protocol over a child process's
/// stdio or a TCP socket. Scores are cached per (concept list, sentence id).
pub struct ExternalScorer {
    conn: Mutex<Connection>,
    cache: Mutex<HashMap<(String, SentenceId), f64>>,
    timeout: Duration,
    batch_size: usize,
}

impl ExternalScorer {
    /// Wraps an existing stream pair and pings the peer.
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Result<Self>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::with_child(reader, Box::new(writer), None, timeout)
    }

    fn with_child<R>(
        reader: R,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
        timeout: Duration,
    ) -> Result<Self>
    where
        R: BufRead + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let scorer = ExternalScorer {
            conn: Mutex::new(Connection {
                writer,
                lines: rx,
                next_id: PING_ID + 1,
                child,
            }),
            cache: Mutex::new(HashMap::new()),
            timeout,
            batch_size: DEFAULT_BATCH_SIZE,
        };
        scorer.ping()?;
        Ok(scorer)
    }

    /// Starts `program args...` and talks to it over stdin/stdout.
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start scorer {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::with_child(
            BufReader::new(stdout),
            Box::new(stdin),
            Some(child),
            timeout,
        )
    }

    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::Protocol(format!("cannot connect to {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::Protocol(format!("cannot clone socket: {e}")))?;
        Self::with_child(BufReader::new(reader), Box::new(stream), None, timeout)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Sends a ping and waits for the id-0 answer.
    pub fn ping(&self) -> Result<()> {
        let mut conn = self.conn.lock().expect("connection lock");
        conn.send(&ScoreRequest::ping())?;
        conn.flush()?;
        loop {
            let response = conn.receive(self.timeout)?;
            if response.id == PING_ID {
                return Ok(());
            }
        }
    }

    fn score_uncached(&self, concepts: &[String], records: &[&SentenceRecord]) -> Result<Vec<f64>> {
        let mut conn = self.conn.lock().expect("connection lock");
        let mut pending: HashMap<u64, usize> = HashMap::with_capacity(records.len());
        for (slot, record) in records.iter().enumerate() {
            let id = conn.next_id;
            conn.next_id += 1;
            pending.insert(id, slot);
            conn.send(&ScoreRequest {
                id,
                concepts: concepts.to_vec(),
                sentence: record.text.clone(),
                ping: false,
            })?;
        }
        conn.flush()?;

        let mut scores = vec![f64::NAN; records.len()];
        while !pending.is_empty() {
            let response = conn.receive(self.timeout).map_err(|e| match e {
                Error::Protocol(m) => {
                    Error::Protocol(format!("{m} ({} scores outstanding)", pending.len()))
                }
                other => other,
            })?;
            let Some(slot) = pending.remove(&response.id) else {
                continue;
            };
            let sentence_id = records[slot].id;
            if let Some(message) = response.error {
                return Err(Error::Scorer {
                    sentence_id,
                    message,
                });
            }
            match response.score {
                Some(s) if s.is_finite() && (0.0..=1.0).contains(&s) => scores[slot] = s,
                other => {
                    return Err(Error::Scorer {
                        sentence_id,
                        message: format!("score {other:?} is not in [0, 1]"),
                    })
                }
            }
        }
        Ok(scores)
    }
}

impl Scorer for ExternalScorer {
    fn kind(&self) -> RetrieverKind {
        RetrieverKind::External
    }

    fn score_batch(&self, concepts: &ConceptSet, records: &[&SentenceRecord]) -> Result<Vec<f64>> {
        let key = concepts.concepts().join(" ");
        let mut out = vec![f64::NAN; records.len()];
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.lock().expect("cache lock");
            for (i, r) in records.iter().enumerate() {
                match cache.get(&(key.clone(), r.id)) {
                    Some(&s) => out[i] = s,
                    None => missing.push(i),
                }
            }
        }
        for chunk in missing.chunks(self.batch_size) {
            let batch: Vec<&SentenceRecord> = chunk.iter().map(|&i| records[i]).collect();
            let scores = self.score_uncached(concepts.concepts(), &batch)?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (&i, s) in chunk.iter().zip(scores) {
                out[i] = s;
                cache.insert((key.clone(), records[i].id), s);
            }
        }
        Ok(out)
    }
}

/// Answers protocol requests read from `reader` until end of input, one
/// response line per request line. Malformed lines get an error response
/// and do not stop the loop. Returns the number of lines answered.
pub fn serve<R, W, F>(reader: R, mut writer: W, handler: F) -> std::io::Result<usize>
where
    R: BufRead,
    W: Write,
    F: Fn(&[String], &str) -> std::result::Result<f64, String>,
{
    let mut answered = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<ScoreRequest>(&line) {
            Ok(req) if req.ping => ScoreResponse {
                id: req.id,
                score: None,
                error: None,
                pong: true,
            },
            Ok(req) => match handler(&req.concepts, &req.sentence) {
                Ok(score) => ScoreResponse {
                    id: req.id,
                    score: Some(score),
                    error: None,
                    pong: false,
                },
                Err(message) => ScoreResponse {
                    id: req.id,
                    score: None,
                    error: Some(message),
                    pong: false,
                },
            },
            Err(e) => ScoreResponse {
                id: serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(serde_json::Value::as_u64))
                    .unwrap_or(PING_ID),
                score: None,
                error: Some(format!("malformed request: {e}")),
                pong: false,
            },
        };
        serde_json::to_writer(&mut writer, &response)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        answered += 1;
    }
    Ok(answered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::LemmaLexicon;
    use std::io::{pipe, PipeReader, PipeWriter};

    fn records(texts: &[&str]) -> Vec<SentenceRecord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut r = SentenceRecord::from_text(t, LemmaLexicon::shipped());
                r.id = i as u64 + 1;
                r
            })
            .collect()
    }

    fn length_score(_: &[String], sentence: &str) -> std::result::Result<f64, String> {
        Ok(1.0 / (1.0 + sentence.len() as f64))
    }

    fn spawn_server<F>(handler: F) -> (BufReader<PipeReader>, PipeWriter)
    where
        F: Fn(&[String], &str) -> std::result::Result<f64, String> + Send + 'static,
    {
        let (req_rx, req_tx) = pipe().unwrap();
        let (resp_rx, resp_tx) = pipe().unwrap();
        std::thread::spawn(move || serve(BufReader::new(req_rx), resp_tx, handler));
        (BufReader::new(resp_rx), req_tx)
    }

    #[test]
    fn request_and_response_shapes() {
        let req = ScoreRequest {
            id: 7,
            concepts: vec!["dog".into()],
            sentence: "a dog".into(),
            ping: false,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"id":7,"concepts":["dog"],"sentence":"a dog"}"#
        );
        assert_eq!(
            serde_json::to_string(&ScoreRequest::ping()).unwrap(),
            r#"{"id":0,"ping":true}"#
        );
        let resp: ScoreResponse = serde_json::from_str(r#"{"id":7,"score":0.25}"#).unwrap();
        assert_eq!(resp.score, Some(0.25));
    }

    #[test]
    fn scores_through_reference_server_and_caches() {
        let (reader, writer) = spawn_server(length_score);
        let scorer = ExternalScorer::from_streams(reader, writer, Duration::from_secs(5))
            .unwrap()
            .with_batch_size(2);
        let recs = records(&["a dog", "a dog runs fast", "cat"]);
        let refs: Vec<&SentenceRecord> = recs.iter().collect();
        let concepts = ConceptSet::new(["dog"]).unwrap();
        let scores = scorer.score_batch(&concepts, &refs).unwrap();
        let expected: Vec<f64> = recs
            .iter()
            .map(|r| length_score(&[], &r.text).unwrap())
            .collect();
        assert_eq!(scores, expected);
        assert_eq!(scorer.cached(), 3);
        assert_eq!(scorer.score_batch(&concepts, &refs).unwrap(), expected);
    }

    #[test]
    fn accepts_out_of_order_answers() {
        let (req_rx, req_tx) = pipe().unwrap();
        let (resp_rx, mut resp_tx) = pipe().unwrap();
        std::thread::spawn(move || {
            let mut held: Vec<ScoreRequest> = Vec::new();
            for line in BufReader::new(req_rx).lines() {
                let req: ScoreRequest = serde_json::from_str(&line.unwrap()).unwrap();
                if req.ping {
                    writeln!(resp_tx, r#"{{"id":0,"pong":true}}"#).unwrap();
                    continue;
                }
                held.push(req);
                if held.len() == 3 {
                    for r in held.drain(..).rev() {
                        writeln!(
                            resp_tx,
                            r#"{{"id":{},"score":{}}}"#,
                            r.id,
                            r.sentence.len() as f64 / 100.0
                        )
                        .unwrap();
                    }
                }
            }
        });
        let scorer =
            ExternalScorer::from_streams(BufReader::new(resp_rx), req_tx, Duration::from_secs(5))
                .unwrap()
                .with_batch_size(3);
        let recs = records(&["a", "bb", "ccc"]);
        let refs: Vec<&SentenceRecord> = recs.iter().collect();
        let scores = scorer
            .score_batch(&ConceptSet::new(["x"]).unwrap(), &refs)
            .unwrap();
        assert_eq!(scores, vec![0.01, 0.02, 0.03]);
    }

    #[test]
    fn silent_peer_fails_ping() {
        let (_req_rx, req_tx) = pipe().unwrap();
        let (resp_rx, _resp_tx) = pipe().unwrap();
        let err = ExternalScorer::from_streams(
            BufReader::new(resp_rx),
            req_tx,
            Duration::from_millis(100),
        )
        .err()
        .expect("ping must time out");
        assert!(matches!(err, Error::Protocol(_)));
        assert_eq!(err.category(), crate::ErrorCategory::ScorerProtocol);
    }

    #[test]
    fn error_and_out_of_range_answers_name_the_sentence() {
        let (reader, writer) = spawn_server(|_, s| {
            if s == "bad" {
                Err("nope".into())
            } else {
                Ok(0.5)
            }
        });
        let scorer = ExternalScorer::from_streams(reader, writer, Duration::from_secs(5)).unwrap();
        let recs = records(&["fine", "bad"]);
        let refs: Vec<&SentenceRecord> = recs.iter().collect();
        match scorer.score_batch(&ConceptSet::new(["x"]).unwrap(), &refs) {
            Err(Error::Scorer { sentence_id, .. }) => assert_eq!(sentence_id, 2),
            other => panic!("unexpected {other:?}"),
        }

        let (reader, writer) = spawn_server(|_, _| Ok(1.5));
        let scorer = ExternalScorer::from_streams(reader, writer, Duration::from_secs(5)).unwrap();
        assert!(matches!(
            scorer.score_batch(&ConceptSet::new(["x"]).unwrap(), &refs[..1]),
            Err(Error::Scorer { sentence_id: 1, .. })
        ));
    }

    #[test]
    fn server_survives_malformed_lines() {
        let input = "{\"id\":0,\"ping\":true}\nnot json\n{\"id\":5,\"oops\":1,\"sentence\":3}\n{\"id\":6,\"concepts\":[\"a\"],\"sentence\":\"ab\"}\n";
        let mut out = Vec::new();
        let n = serve(input.as_bytes(), &mut out, length_score).unwrap();
        assert_eq!(n, 4);
        let responses: Vec<ScoreResponse> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert!(responses[0].pong);
        assert!(responses[1].error.is_some());
        assert_eq!(responses[2].id, 5);
        assert!(responses[2].error.is_some());
        assert_eq!(responses[3].score, Some(1.0 / 3.0));
    }
}
