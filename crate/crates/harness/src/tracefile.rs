//! Run traces on disk: `# key=value` provenance lines, a CSV header, one row per iteration.
//!
//! Floats are written in Rust's shortest round-trip form, so a trace read back from
//! disk is bit-identical to the one that was written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cpnest::accel::{IterationRecord, RunStatus, RunTrace};
use sha2::{Digest, Sha256};

use crate::error::{io_err, HarnessError, Result};

pub const TRACE_MAGIC: &str = "cpnest-trace v1";
pub const TRACE_EXTENSION: &str = "trace";

const COLUMNS: [&str; 12] = [
    "k",
    "f",
    "grad_norm",
    "delta_x_norm",
    "beta",
    "alpha",
    "restarted",
    "n_f_evals",
    "n_g_evals",
    "n_als_sweeps",
    "sweep_equivalents",
    "wall_seconds",
];

/// A trace with its provenance header. Keys written by the runner include `problem`,
/// `solver`, `seed`, `spec`, `config`, `init`, `repetition` and `version`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub meta: Vec<(String, String)>,
    pub trace: RunTrace,
}

impl TraceFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn problem(&self) -> &str {
        self.get("problem").unwrap_or("")
    }

    pub fn to_text(&self) -> String {
        let t = &self.trace;
        let mut s = format!("# {TRACE_MAGIC}\n");
        for (k, v) in &self.meta {
            writeln!(s, "# {k}={v}").unwrap();
        }
        writeln!(s, "# solver_name={}", t.solver).unwrap();
        writeln!(s, "# n_vars={}", t.n_vars).unwrap();
        writeln!(s, "# tol={:?}", t.tol).unwrap();
        writeln!(s, "# status={}", t.status).unwrap();
        writeln!(s, "{}", COLUMNS.join(",")).unwrap();
        for r in &t.records {
            writeln!(
                s,
                "{},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{:?},{:?}",
                r.k,
                r.f,
                r.grad_norm,
                r.delta_x_norm,
                r.beta_used,
                r.alpha_used,
                u8::from(r.restarted),
                r.n_f_evals,
                r.n_g_evals,
                r.n_als_sweeps,
                r.sweep_equivalents,
                r.wall_seconds
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |msg: String| HarnessError::Trace { path: path.to_path_buf(), msg };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(&format!("# {TRACE_MAGIC}")) {
            return Err(bad(format!("first line must be '# {TRACE_MAGIC}'")));
        }
        let mut meta = Vec::new();
        let mut solver = None;
        let mut n_vars = None;
        let mut tol = None;
        let mut status = None;
        let mut header_seen = false;
        let mut records = Vec::new();
        for (no, line) in lines.enumerate() {
            let lineno = no + 2;
            if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("line {lineno}: expected key=value")))?;
                match k {
                    "solver_name" => solver = Some(v.to_string()),
                    "n_vars" => n_vars = Some(v.parse().map_err(|e| bad(format!("line {lineno}: {e}")))?),
                    "tol" => tol = Some(v.parse().map_err(|e| bad(format!("line {lineno}: {e}")))?),
                    "status" => status = Some(v.parse::<RunStatus>().map_err(|e| bad(format!("line {lineno}: {e}")))?),
                    _ => meta.push((k.to_string(), v.to_string())),
                }
                continue;
            }
            if !header_seen {
                if line != COLUMNS.join(",") {
                    return Err(bad(format!("line {lineno}: unexpected column header")));
                }
                header_seen = true;
                continue;
            }
            records.push(parse_record(line).map_err(|m| bad(format!("line {lineno}: {m}")))?);
        }
        if !header_seen {
            return Err(bad("missing column header".into()));
        }
        let missing = |k: &str| bad(format!("missing '{k}' header line"));
        Ok(Self {
            meta,
            trace: RunTrace {
                solver: solver.ok_or_else(|| missing("solver_name"))?,
                n_vars: n_vars.ok_or_else(|| missing("n_vars"))?,
                tol: tol.ok_or_else(|| missing("tol"))?,
                records,
                status: status.ok_or_else(|| missing("status"))?,
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }
}

fn parse_record(line: &str) -> std::result::Result<IterationRecord, String> {
    let cells: Vec<&str> = line.split(',').collect();
    if cells.len() != COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", COLUMNS.len(), cells.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, col: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {col} value {s:?}"))
    }
    Ok(IterationRecord {
        k: num(cells[0], "k")?,
        f: num(cells[1], "f")?,
        grad_norm: num(cells[2], "grad_norm")?,
        delta_x_norm: num(cells[3], "delta_x_norm")?,
        beta_used: num(cells[4], "beta")?,
        alpha_used: num(cells[5], "alpha")?,
        restarted: match cells[6] {
            "0" => false,
            "1" => true,
            other => return Err(format!("bad restarted flag {other:?}")),
        },
        n_f_evals: num(cells[7], "n_f_evals")?,
        n_g_evals: num(cells[8], "n_g_evals")?,
        n_als_sweeps: num(cells[9], "n_als_sweeps")?,
        sweep_equivalents: num(cells[10], "sweep_equivalents")?,
        wall_seconds: num(cells[11], "wall_seconds")?,
    })
}

/// SHA-256 over everything in a trace except wall-clock time, as lowercase hex.
pub fn work_checksum(trace: &RunTrace) -> String {
    let mut h = Sha256::new();
    h.update(trace.solver.as_bytes());
    h.update([0]);
    h.update((trace.n_vars as u64).to_le_bytes());
    h.update(trace.tol.to_bits().to_le_bytes());
    h.update(trace.status.as_str().as_bytes());
    for r in &trace.records {
        h.update((r.k as u64).to_le_bytes());
        for v in [r.f, r.grad_norm, r.delta_x_norm, r.beta_used, r.alpha_used, r.sweep_equivalents] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([u8::from(r.restarted)]);
        for n in [r.n_f_evals, r.n_g_evals, r.n_als_sweeps] {
            h.update(n.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// All `*.trace` files under `dir`, sorted by path.
pub fn list_traces(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.extension().is_some_and(|e| e == TRACE_EXTENSION) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_dir_traces(dir: &Path) -> Result<Vec<TraceFile>> {
    list_traces(dir)?.iter().map(|p| TraceFile::read(p)).collect()
}
