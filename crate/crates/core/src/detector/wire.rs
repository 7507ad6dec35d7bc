//! Client side of the detector wire protocol.
//!
//! One JSON object per request and per response, either as the body of an
//! HTTP `POST /detect` or as newline-delimited lines over a child process's
//! stdin/stdout.
//!
//! ```text
//! request:  {"image_png_base64": str, "categories": [str], "n_max": int}
//! response: {"detections": [{"box": [x1,y1,x2,y2], "scores": {cat: float}}],
//!            "scores_available": bool}
//! ```
//!
//! Responses are validated strictly: a malformed box, an out-of-range score,
//! a missing field or more than `n_max` detections is an error. Unknown
//! fields are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::Detector;
use crate::detection::{Category, Detection, DetectionSet};
use crate::geometry::BBox;
use crate::raster::Image;
use crate::{DetectorError, Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub image_png_base64: String,
    pub categories: Vec<String>,
    pub n_max: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireDetection {
    #[serde(rename = "box")]
    pub bbox: Vec<f64>,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub detections: Vec<WireDetection>,
    pub scores_available: bool,
}

pub fn encode_request(image: &Image, categories: &[Category], n_max: usize) -> Result<String, DetectorError> {
    let png = image
        .to_png_bytes()
        .map_err(|e| DetectorError::Encode(e.to_string()))?;
    let req = WireRequest {
        image_png_base64: base64::engine::general_purpose::STANDARD.encode(png),
        categories: categories.iter().map(|c| c.as_str().to_owned()).collect(),
        n_max,
    };
    serde_json::to_string(&req).map_err(|e| DetectorError::Encode(e.to_string()))
}

/// Parses and validates one response body.
pub fn decode_response(body: &str, n_max: usize) -> Result<DetectionSet, DetectorError> {
    let malformed = |msg: String| DetectorError::Malformed(msg);
    let resp: WireResponse = serde_json::from_str(body.trim())
        .map_err(|e| malformed(format!("{e}; body: {}", truncate(body, 200))))?;
    if resp.detections.len() > n_max {
        return Err(malformed(format!(
            "{} detections exceed n_max = {n_max}",
            resp.detections.len()
        )));
    }
    let detections = resp
        .detections
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let [x1, y1, x2, y2] = d.bbox[..] else {
                return Err(malformed(format!(
                    "detection {i}: box has {} coordinates",
                    d.bbox.len()
                )));
            };
            let bbox = BBox::new(x1, y1, x2, y2).map_err(|e| malformed(format!("detection {i}: {e}")))?;
            let scores = d.scores.into_iter().map(|(k, v)| (Category::from(k), v)).collect();
            Detection::new(bbox, scores).map_err(|e| malformed(format!("detection {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DetectionSet {
        detections,
        scores_available: resp.scores_available,
    })
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Base URL; requests go to `<base>/detect`.
    Http(String),
    /// Command line of a server speaking the protocol on stdio.
    Stdio(String),
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("stdio:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("stdio endpoint needs a command".into()));
            }
            Ok(Endpoint::Stdio(cmd.to_owned()))
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Endpoint::Http(s.trim_end_matches('/').to_owned()))
        } else {
            Err(Error::Config(format!(
                "wire endpoint {s:?} must be http(s)://… or stdio:<command>"
            )))
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Http(url) => f.write_str(url),
            Endpoint::Stdio(cmd) => write!(f, "stdio:{cmd}"),
        }
    }
}

/// A line-oriented request/response channel. Requests are serialized by the
/// caller's lock, so one channel never interleaves two exchanges.
pub struct LineChannel {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl LineChannel {
    pub fn new(reader: impl BufRead + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        Self {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
        }
    }

    /// Spawns `command` (split on whitespace) with piped stdin/stdout.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty stdio command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(program, e))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        Ok(Self {
            reader: Box::new(BufReader::new(stdout)),
            writer: Box::new(stdin),
            child: Some(child),
        })
    }

    fn exchange(&mut self, line: &str) -> Result<String, DetectorError> {
        let transport = |e: std::io::Error| DetectorError::Transport(e.to_string());
        self.writer.write_all(line.as_bytes()).map_err(transport)?;
        self.writer.write_all(b"\n").map_err(transport)?;
        self.writer.flush().map_err(transport)?;
        let mut reply = String::new();
        let n = self.reader.read_line(&mut reply).map_err(transport)?;
        if n == 0 {
            return Err(DetectorError::Transport("server closed the stream".into()));
        }
        Ok(reply)
    }
}

impl Drop for LineChannel {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

enum Transport {
    Http { agent: ureq::Agent, url: String },
    Lines(Mutex<LineChannel>),
}

pub struct WireDetector {
    transport: Transport,
    categories: Vec<Category>,
    n_max: usize,
    label: String,
}

impl WireDetector {
    pub fn connect(endpoint: Endpoint, categories: Vec<Category>, n_max: usize) -> Result<Self> {
        let label = endpoint.to_string();
        let transport = match endpoint {
            Endpoint::Http(base) => Transport::Http {
                agent: ureq::Agent::config_builder()
                    .timeout_global(Some(DEFAULT_TIMEOUT))
                    .build()
                    .into(),
                url: format!("{base}/detect"),
            },
            Endpoint::Stdio(cmd) => Transport::Lines(Mutex::new(LineChannel::spawn(&cmd)?)),
        };
        Ok(Self {
            transport,
            categories,
            n_max,
            label,
        })
    }

    pub fn over_channel(channel: LineChannel, categories: Vec<Category>, n_max: usize) -> Self {
        Self {
            transport: Transport::Lines(Mutex::new(channel)),
            categories,
            n_max,
            label: "stdio:channel".into(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        if let Transport::Http { agent, .. } = &mut self.transport {
            *agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .build()
                .into();
        }
        self
    }
}

fn http_error(e: ureq::Error) -> DetectorError {
    match e {
        ureq::Error::Timeout(t) => DetectorError::Timeout(t.to_string()),
        other => DetectorError::Transport(other.to_string()),
    }
}

impl Detector for WireDetector {
    fn detect(&self, image: &Image) -> Result<DetectionSet, DetectorError> {
        let body = encode_request(image, &self.categories, self.n_max)?;
        let reply = match &self.transport {
            Transport::Http { agent, url } => {
                let mut resp = agent
                    .post(url)
                    .header("content-type", "application/json")
                    .send(body.as_str())
                    .map_err(http_error)?;
                resp.body_mut().read_to_string().map_err(http_error)?
            }
            Transport::Lines(channel) => channel
                .lock()
                .map_err(|_| DetectorError::Transport("channel lock poisoned".into()))?
                .exchange(&body)?,
        };
        decode_response(&reply, self.n_max)
    }

    fn fingerprint(&self) -> String {
        format!("wire:{}", self.label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_valid_response_and_ignores_unknown_fields() {
        let body = r#"{"detections":[{"box":[1,2,3,4],"scores":{"dog":0.001},"extra":1}],
                       "scores_available":true,"model":"x"}"#;
        let set = decode_response(body, 10).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.detections[0].scores[&Category::from("dog")], 0.001);
    }

    #[test]
    fn rejects_schema_violations() {
        let cases = [
            r#"{"detections":[]}"#,
            r#"{"detections":[{"box":[1,2,3],"scores":{"a":0.5}}],"scores_available":true}"#,
            r#"{"detections":[{"box":[3,2,1,4],"scores":{"a":0.5}}],"scores_available":true}"#,
            r#"{"detections":[{"box":[1,2,3,4],"scores":{"a":1.5}}],"scores_available":true}"#,
            r#"{"detections":[{"box":[1,2,3,4],"scores":{}}],"scores_available":true}"#,
            r#"{"detections":[{"box":[1,2,3,4],"scores":{"a":"high"}}],"scores_available":true}"#,
            r#"{"detections":"none","scores_available":true}"#,
            "not json",
        ];
        for body in cases {
            assert!(
                matches!(decode_response(body, 10), Err(DetectorError::Malformed(_))),
                "accepted {body}"
            );
        }
        let two = r#"{"detections":[{"box":[1,2,3,4],"scores":{"a":0.5}},{"box":[1,2,3,4],"scores":{"a":0.5}}],"scores_available":true}"#;
        assert!(decode_response(two, 1).is_err());
    }

    #[test]
    fn request_roundtrips_image() {
        let img = Image::from_fn(3, 2, |x, y| [x as u8, y as u8, 7]).unwrap();
        let line = encode_request(&img, &[Category::from("dog")], 5).unwrap();
        assert!(!line.contains('\n'));
        let req: WireRequest = serde_json::from_str(&line).unwrap();
        assert_eq!(req.n_max, 5);
        assert_eq!(req.categories, vec!["dog"]);
        let png = base64::engine::general_purpose::STANDARD
            .decode(req.image_png_base64)
            .unwrap();
        assert_eq!(Image::from_png_bytes(&png).unwrap(), img);
    }
}
