//! Runs, artifacts and trace audits.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::analysis::{analyze, dimension_check, format_fraction, DimensionSample, Report};
use crate::bits::BitString;
use crate::config::{ConfigError, RunConfig, RunMode, RunSpec};
use crate::construction::{EngineError, RunResult};
use crate::function::ApproximatedFunction;
use crate::kc::PrefixCode;
use crate::oracle::{DescriptionEvent, EventStream, StreamError};
use crate::single::run_construction;
use crate::trace::{parse_trace, render_body, render_trace, TraceError};
use crate::universal::{extract_t_star, run_universal};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Engine(_) => 1,
            RunError::Config(_) | RunError::Io { .. } => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifacts {
    pub trace: String,
    pub requests: String,
    pub code: String,
    pub report: String,
    pub stream: String,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub spec: RunSpec,
    pub result: RunResult,
    pub report: Report,
    pub artifacts: Artifacts,
}

impl Outcome {
    /// 0 when every check passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_pass() {
            0
        } else {
            1
        }
    }
}

pub fn simulate(spec: &RunSpec, events: &[DescriptionEvent]) -> Result<RunResult, EngineError> {
    let fns: Vec<&dyn ApproximatedFunction> = spec.functions.iter().map(|f| f as &dyn ApproximatedFunction).collect();
    match spec.mode {
        RunMode::Single | RunMode::Dimension => run_construction(fns[0], events, spec.horizon),
        RunMode::Universal => run_universal(&fns, events, spec.horizon),
    }
}

/// The full verification report for a finished run.
pub fn report_for(spec: &RunSpec, result: &RunResult) -> Report {
    let (mut r, codes) = analyze(result, spec.shift);
    match spec.mode {
        RunMode::Universal => {
            let truth: Vec<bool> = spec.functions.iter().map(|f| f.is_finite_to_one()).collect();
            let t = extract_t_star(result, &truth);
            r.int_bound("tstar.perfect", i128::from(!t.is_perfect()), 0);
            r.note(format!("tstar depth={} perfect_depth={}", t.depth, t.perfect_depth));
        }
        RunMode::Dimension => dimension_lines(spec, result, codes.first().and_then(Option::as_ref), &mut r),
        RunMode::Single => {}
    }
    let quiescent: Vec<String> = result.quiescent.iter().map(|q| q.to_string()).collect();
    r.note(format!("quiescent {}", quiescent.join(",")));
    r.note(format!("injuries total={}", result.injury_count()));
    for inj in &result.injuries {
        r.note(format!(
            "injury stage={} family={} level={} mass={}",
            inj.stage,
            crate::trace::family_token(&inj.family),
            inj.level,
            inj.mass
        ));
    }
    r
}

fn dimension_lines(spec: &RunSpec, result: &RunResult, code: Option<&PrefixCode>, r: &mut Report) {
    let Some(code) = code else {
        r.fail("dimension.code");
        return;
    };
    let samples: Result<Vec<DimensionSample>, ConfigError> = spec
        .samples
        .iter()
        .map(|s| Ok(DimensionSample { sequence: s.bits()?, n: s.n }))
        .collect();
    let samples = match samples {
        Ok(s) => s,
        Err(err) => {
            r.fail("dimension.samples");
            r.note(err.to_string());
            return;
        }
    };
    let path = result
        .state
        .tree
        .leftmost_leaf_from(&BitString::new())
        .expect("root lives");
    match dimension_check(result, code, &path, 0, &samples) {
        Ok((rep, rows)) => {
            r.extend(rep);
            for (k, row) in rows.iter().enumerate() {
                r.note(format!(
                    "dimension.{k} n={} K={} KA={} f={} log_term={}",
                    row.n,
                    row.k,
                    row.k_a,
                    row.f,
                    format_fraction(row.log_term)
                ));
            }
        }
        Err(err) => {
            r.fail("dimension.resolved");
            r.note(err.to_string());
        }
    }
}

pub fn render_requests(result: &RunResult) -> String {
    let mut out = String::new();
    for (e, set) in result.state.requests.iter().enumerate() {
        let _ = writeln!(out, "# e={e}");
        for q in set.requests() {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                q.target.to_token(),
                q.length,
                q.stage,
                q.origin.oracle.to_token(),
                q.origin.program.to_token()
            );
        }
    }
    out
}

pub fn render_codes(result: &RunResult, shift: u64) -> String {
    let mut out = String::new();
    for (e, set) in result.state.requests.iter().enumerate() {
        let _ = writeln!(out, "# e={e} shift={shift}");
        match crate::kc::build_prefix_code(set, shift) {
            Ok(code) => out.push_str(&code.dump()),
            Err(err) => {
                let _ = writeln!(out, "# {err}");
            }
        }
    }
    out
}

pub fn execute(spec: &RunSpec, stream: &EventStream) -> Result<Outcome, RunError> {
    let result = simulate(spec, &stream.events)?;
    let report = report_for(spec, &result);
    let artifacts = Artifacts {
        trace: render_trace(spec, &stream.events, &result.records),
        requests: render_requests(&result),
        code: render_codes(&result, spec.shift),
        report: report.to_string(),
        stream: stream.to_string(),
    };
    Ok(Outcome {
        spec: spec.clone(),
        result,
        report,
        artifacts,
    })
}

pub fn run_config(config: &RunConfig) -> Result<Outcome, RunError> {
    let (spec, stream) = config.resolve()?;
    execute(&spec, &stream)
}

pub fn write_artifacts(artifacts: &Artifacts, dir: &Path) -> Result<(), RunError> {
    let io = |path: &Path, err: std::io::Error| RunError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, text) in [
        ("trace.txt", &artifacts.trace),
        ("requests.txt", &artifacts.requests),
        ("code.txt", &artifacts.code),
        ("report.txt", &artifacts.report),
        ("stream.txt", &artifacts.stream),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("recorded events rejected: {0}")]
    Stream(#[from] StreamError),
    #[error("replay failed: {0}")]
    Engine(#[from] EngineError),
    #[error("trace line {line}: recorded {recorded:?}, replay gives {replayed:?}")]
    Mismatch {
        line: usize,
        recorded: String,
        replayed: String,
    },
}

impl VerifyError {
    pub fn exit_code(&self) -> i32 {
        match self {
            VerifyError::Trace(TraceError::Parse { .. }) => 2,
            _ => 1,
        }
    }
}

/// Replay a trace from its recorded config and events, compare every stage
/// record, and recompute the report. An empty trace verifies vacuously.
pub fn verify_trace(text: &str) -> Result<Report, VerifyError> {
    if text.trim().is_empty() {
        let mut r = Report::new();
        r.note("empty trace: no checks");
        return Ok(r);
    }
    let parsed = parse_trace(text)?;
    let stream = EventStream {
        provenance: parsed.spec.provenance.clone(),
        events: parsed.events,
    };
    stream.replay()?;
    let result = simulate(&parsed.spec, &stream.events)?;
    let replayed = render_body(&result.records);
    let end_line = text.lines().count();
    for k in 0..parsed.body.len().max(replayed.len()) {
        let recorded = parsed.body.get(k);
        let again = replayed.get(k);
        if recorded.map(|(_, l)| l) != again {
            return Err(VerifyError::Mismatch {
                line: recorded.map_or(end_line, |(n, _)| *n),
                recorded: recorded.map_or(String::new(), |(_, l)| l.clone()),
                replayed: again.cloned().unwrap_or_default(),
            });
        }
    }
    Ok(report_for(&parsed.spec, &result))
}
