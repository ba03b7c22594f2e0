//! Trace CSV: `# key=value` metadata lines, a header, one row per round.
//! Floats are written with 17 significant digits so they round-trip.

use std::fmt::Write as _;

use crate::convex::NormKind;
use crate::error::{Error, Result};
use crate::traders::{ConvergenceTrace, TraceRow};

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64], sep: &str) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(sep)
}

pub fn trace_to_csv(trace: &ConvergenceTrace) -> String {
    let d = trace.belief.len();
    let mut out = String::new();
    let _ = writeln!(out, "# norm={}", trace.norm);
    let _ = writeln!(out, "# mode={}", trace.mode);
    let _ = writeln!(out, "# smoothness={}", fmt_f64(trace.smoothness));
    let _ = writeln!(out, "# experimental_l1={}", trace.experimental_l1);
    let _ = writeln!(out, "# belief={}", join(&trace.belief, ";"));
    let _ = writeln!(out, "# q_star={}", join(&trace.q_star, ";"));
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("q{i}")));
    header.extend((0..d).map(|i| format!("p{i}")));
    header.extend(["l1_gap", "suboptimality", "payment", "revenue"].map(String::from));
    let _ = writeln!(out, "{}", header.join(","));
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.t,
            join(&row.q, ","),
            join(&row.price, ","),
            fmt_f64(row.l1_gap),
            fmt_f64(row.suboptimality),
            fmt_f64(row.payment),
            fmt_f64(row.revenue)
        );
    }
    out
}

/// Marker appended to a partial trace when a run stops early.
pub fn failure_marker(round: u64, error: &Error) -> String {
    format!("# failure round={round} error={}\n", error.to_string().replace('\n', " "))
}

pub fn trace_from_csv(text: &str) -> Result<ConvergenceTrace> {
    let mut norm = None;
    let mut mode = None;
    let mut smoothness = None;
    let mut experimental_l1 = false;
    let mut belief = None;
    let mut q_star = None;
    let mut header_seen = false;
    let mut rows = Vec::new();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let floats = |line: usize, s: &str, sep: char| -> Result<Vec<f64>> {
        s.split(sep)
            .map(|t| t.trim().parse::<f64>().map_err(|_| parse_err(line, format!("bad number `{t}`"))))
            .collect()
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        if let Some(meta) = raw.strip_prefix('#') {
            let Some((key, value)) = meta.trim().split_once('=') else { continue };
            match key {
                "norm" => norm = Some(value.parse::<NormKind>().map_err(|e| parse_err(line, e.to_string()))?),
                "mode" => mode = Some(value.to_string()),
                "smoothness" => smoothness = Some(floats(line, value, ';')?[0]),
                "experimental_l1" => experimental_l1 = value == "true",
                "belief" => belief = Some(floats(line, value, ';')?),
                "q_star" => q_star = Some(floats(line, value, ';')?),
                _ => {}
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let d = belief.as_ref().map(Vec::len).ok_or_else(|| parse_err(line, "row before belief metadata".into()))?;
        let (t, rest) = raw.split_once(',').ok_or_else(|| parse_err(line, "short row".into()))?;
        let t = t.parse::<u64>().map_err(|_| parse_err(line, format!("bad round `{t}`")))?;
        let values = floats(line, rest, ',')?;
        if values.len() != 2 * d + 4 {
            return Err(parse_err(line, format!("expected {} values, got {}", 2 * d + 4, values.len())));
        }
        rows.push(TraceRow {
            t,
            q: values[..d].to_vec(),
            price: values[d..2 * d].to_vec(),
            l1_gap: values[2 * d],
            suboptimality: values[2 * d + 1],
            payment: values[2 * d + 2],
            revenue: values[2 * d + 3],
        });
    }
    let missing = |what: &str| Error::Validation(format!("trace is missing `{what}` metadata"));
    if rows.is_empty() {
        return Err(Error::Validation("trace has no rows".into()));
    }
    Ok(ConvergenceTrace {
        belief: belief.ok_or_else(|| missing("belief"))?,
        norm: norm.ok_or_else(|| missing("norm"))?,
        mode: mode.ok_or_else(|| missing("mode"))?,
        smoothness: smoothness.ok_or_else(|| missing("smoothness"))?,
        q_star: q_star.ok_or_else(|| missing("q_star"))?,
        experimental_l1,
        rows,
    })
}
