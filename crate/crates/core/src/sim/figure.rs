//! Plot-ready CSV derived from a convergence trace.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::trace_io::fmt_f64;
use crate::convex::NormKind;
use crate::error::{Error, Result};
use crate::traders::ConvergenceTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureStyle {
    /// Price path in 2-D barycentric coordinates; three outcomes only.
    SimplexPath,
    /// `||p_t - mu||_1` and suboptimality against `t`, with both envelopes.
    GapVsT,
    /// Suboptimality against the envelope for the trading norm.
    Envelope,
}

impl FromStr for FigureStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplex_path" => Ok(FigureStyle::SimplexPath),
            "gap_vs_t" => Ok(FigureStyle::GapVsT),
            "envelope" => Ok(FigureStyle::Envelope),
            other => Err(Error::InvalidInput(format!(
                "unknown figure style `{other}` (expected simplex_path, gap_vs_t or envelope)"
            ))),
        }
    }
}

/// Maps a point of the 3-simplex onto the triangle with vertices
/// `(0, 0)`, `(1, 0)` and `(1/2, sqrt(3)/2)`.
pub fn simplex_xy(p: &[f64]) -> (f64, f64) {
    (p[1] + 0.5 * p[2], 0.5 * 3f64.sqrt() * p[2])
}

pub fn emit_figure_data(trace: &ConvergenceTrace, style: FigureStyle) -> Result<String> {
    let mut out = String::new();
    match style {
        FigureStyle::SimplexPath => {
            if trace.belief.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "simplex_path needs three outcomes, trace has {}",
                    trace.belief.len()
                )));
            }
            let _ = writeln!(out, "t,p0,p1,p2,x,y");
            let mut line = |label: String, p: &[f64]| {
                let (x, y) = simplex_xy(p);
                let _ = writeln!(
                    out,
                    "{label},{},{},{},{},{}",
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(p[2]),
                    fmt_f64(x),
                    fmt_f64(y)
                );
            };
            for row in &trace.rows {
                line(row.t.to_string(), &row.price);
            }
            line("belief".into(), &trace.belief);
        }
        FigureStyle::GapVsT => {
            let _ = writeln!(out, "t,l1_gap,suboptimality,gd_envelope,sd_envelope");
            for row in &trace.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.t,
                    fmt_f64(row.l1_gap),
                    fmt_f64(row.suboptimality),
                    fmt_f64(trace.gd_envelope(row.t)),
                    fmt_f64(trace.sd_envelope(row.t))
                );
            }
        }
        FigureStyle::Envelope => {
            let _ = writeln!(out, "t,suboptimality,envelope,within");
            for row in trace.rows.iter().filter(|r| r.t > 0) {
                let envelope = match trace.norm {
                    NormKind::L2 => trace.gd_envelope(row.t),
                    _ => trace.sd_envelope(row.t),
                };
                let within = row.suboptimality <= envelope;
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    row.t,
                    fmt_f64(row.suboptimality),
                    fmt_f64(envelope),
                    u8::from(within)
                );
            }
        }
    }
    Ok(out)
}
