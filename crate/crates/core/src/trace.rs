//! Line-oriented run traces.
//!
//! ```text
//! #lowinfo-trace v1
//! config {"mode":"single",...}
//! event <stage> <oracle> <program> <output> <use>
//! stage <t> admitted=<k>
//! transfer e=<e> sigma=<σ> from=<rung|-> to=<rung>
//! act <req> branch family=<level>:<pattern> level=<n>
//! act <req> request e=<e> target=<σ> length=<l> origin=<key>/<program>
//! act <req> injury e=<e> control=<i> family=<f> level=<n> sigma=<σ> key=<k> program=<τ> leaf=<leaf> suffix=<s> mass=<num>/2^<exp>
//! digest <sha256 of every preceding line>
//! ```
//!
//! Strings use `-` for the empty string, as in stream files.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunSpec;
use crate::construction::{ActionKind, StageRecord};
use crate::oracle::DescriptionEvent;
use crate::tree::FamilyKey;

pub const TRACE_MAGIC: &str = "#lowinfo-trace v1";

pub fn family_token(f: &FamilyKey) -> String {
    format!("{}:{}", f.level, f.pattern.to_token())
}

/// Body lines for one stage.
pub fn render_stage(record: &StageRecord, out: &mut Vec<String>) {
    out.push(format!("stage {} admitted={}", record.stage, record.admitted));
    for (e, t) in &record.transfers {
        let from = t.from.map_or("-".to_string(), |r| r.to_string());
        out.push(format!("transfer e={e} sigma={} from={from} to={}", t.sigma.to_token(), t.to));
    }
    for a in &record.actions {
        let line = match &a.kind {
            ActionKind::Branch { family, level } => {
                format!("act {} branch family={} level={level}", a.req, family_token(family))
            }
            ActionKind::Request { e, request } => format!(
                "act {} request e={e} target={} length={} origin={}/{}",
                a.req,
                request.target.to_token(),
                request.length,
                request.origin.oracle.to_token(),
                request.origin.program.to_token()
            ),
            ActionKind::Injury(i) => format!(
                "act {} injury e={} control={} family={} level={} sigma={} key={} program={} leaf={} suffix={} mass={}",
                a.req,
                i.e,
                i.control,
                family_token(&i.family),
                i.level,
                i.sigma.to_token(),
                i.trigger_key.to_token(),
                i.trigger_program.to_token(),
                i.leaf.to_token(),
                i.suffix.to_token(),
                i.mass
            ),
        };
        out.push(line);
    }
}

pub fn render_body(records: &[StageRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        render_stage(r, &mut out);
    }
    out
}

pub fn digest_of(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The whole trace, ending in its digest line.
pub fn render_trace(spec: &RunSpec, events: &[DescriptionEvent], records: &[StageRecord]) -> String {
    let mut text = String::new();
    text.push_str(TRACE_MAGIC);
    text.push('\n');
    text.push_str("config ");
    text.push_str(&serde_json::to_string(spec).expect("spec serializes"));
    text.push('\n');
    for e in events {
        text.push_str(&format!("event {e}\n"));
    }
    for line in render_body(records) {
        text.push_str(&line);
        text.push('\n');
    }
    let digest = digest_of(&text);
    text.push_str(&format!("digest {digest}\n"));
    text
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace digest mismatch: recorded {recorded}, computed {computed}")]
    Digest { recorded: String, computed: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedTrace {
    pub spec: RunSpec,
    pub events: Vec<DescriptionEvent>,
    /// Stage, transfer and act lines with their 1-based line numbers.
    pub body: Vec<(usize, String)>,
}

/// Parse a trace and check its digest. Structure is checked line by line;
/// content is left to replay.
pub fn parse_trace(text: &str) -> Result<ParsedTrace, TraceError> {
    let perr = |line: usize, message: &str| TraceError::Parse {
        line,
        message: message.to_string(),
    };
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    match lines.first() {
        Some(h) if h.trim_end_matches('\n') == TRACE_MAGIC => {}
        _ => return Err(perr(1, "missing trace header")),
    }
    let last = lines.len() - 1;
    let digest_line = lines[last].trim_end_matches('\n');
    let Some(recorded) = digest_line.strip_prefix("digest ") else {
        return Err(perr(last + 1, "missing digest line"));
    };
    if !text.ends_with('\n') {
        return Err(perr(last + 1, "trace must end with a newline"));
    }
    let covered: String = lines[..last].concat();
    let computed = digest_of(&covered);
    if recorded != computed {
        return Err(TraceError::Digest {
            recorded: recorded.to_string(),
            computed,
        });
    }
    let config = lines
        .get(1)
        .and_then(|l| l.trim_end_matches('\n').strip_prefix("config "))
        .ok_or_else(|| perr(2, "missing config line"))?;
    let spec: RunSpec = serde_json::from_str(config).map_err(|e| perr(2, &e.to_string()))?;
    let mut events = Vec::new();
    let mut body = Vec::new();
    for (i, raw) in lines[2..last].iter().enumerate() {
        let n = i + 3;
        let line = raw.trim_end_matches('\n');
        if let Some(rest) = line.strip_prefix("event ") {
            if !body.is_empty() {
                return Err(perr(n, "event after stage records"));
            }
            let e: DescriptionEvent = rest.parse().map_err(|err: crate::oracle::EventParseError| perr(n, &err.to_string()))?;
            events.push(e);
        } else if ["stage ", "transfer ", "act "].iter().any(|p| line.starts_with(p)) {
            body.push((n, line.to_string()));
        } else {
            return Err(perr(n, "unrecognized record"));
        }
    }
    Ok(ParsedTrace { spec, events, body })
}
