//! Result emission: CSV (pinned schema) and an aligned text table.

use std::path::Path;

use crate::runner::Summary;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Table,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "table" => Ok(OutputFormat::Table),
            other => Err(format!("unknown format '{other}' (use csv or table)")),
        }
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|t| format!("{t}")).unwrap_or_else(|| "-".into())
}

fn opt_usize(v: Option<usize>) -> String {
    v.map(|t| format!("{t}")).unwrap_or_else(|| "-".into())
}

/// Serializes summary rows as CSV with the pinned header
/// `procedure,nu,T,m,calls,mean_gap,fail_prob,samples,seed`
/// (UTF-8, LF line endings, no timestamps or paths in the body).
pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut out = String::from("procedure,nu,T,m,calls,mean_gap,fail_prob,samples,seed\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.procedure,
            opt_f64(s.nu),
            opt_usize(s.t_rounds),
            opt_usize(s.m),
            s.calls,
            s.mean_gap,
            s.fail_prob,
            s.samples,
            s.seed
        ));
    }
    out
}

/// Parsed summary row (the numeric subset of [`Summary`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub procedure: String,
    pub nu: Option<f64>,
    pub t_rounds: Option<usize>,
    pub m: Option<usize>,
    pub calls: f64,
    pub mean_gap: f64,
    pub fail_prob: f64,
    pub samples: f64,
    pub seed: u64,
}

/// Re-parses a summary CSV body.
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, BenchError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| BenchError::Config("empty CSV".into()))?;
    if header != "procedure,nu,T,m,calls,mean_gap,fail_prob,samples,seed" {
        return Err(BenchError::Config(format!("unexpected CSV header '{header}'")));
    }
    let parse_opt_f64 = |s: &str| -> Result<Option<f64>, BenchError> {
        if s == "-" {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|e| BenchError::Config(format!("bad number '{s}': {e}")))
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(BenchError::Config(format!("bad CSV row '{line}'")));
        }
        rows.push(SummaryRow {
            procedure: f[0].to_string(),
            nu: parse_opt_f64(f[1])?,
            t_rounds: parse_opt_f64(f[2])?.map(|t| t as usize),
            m: parse_opt_f64(f[3])?.map(|t| t as usize),
            calls: f[4]
                .parse()
                .map_err(|e| BenchError::Config(format!("bad calls: {e}")))?,
            mean_gap: f[5]
                .parse()
                .map_err(|e| BenchError::Config(format!("bad mean_gap: {e}")))?,
            fail_prob: f[6]
                .parse()
                .map_err(|e| BenchError::Config(format!("bad fail_prob: {e}")))?,
            samples: f[7]
                .parse()
                .map_err(|e| BenchError::Config(format!("bad samples: {e}")))?,
            seed: f[8]
                .parse()
                .map_err(|e| BenchError::Config(format!("bad seed: {e}")))?,
        });
    }
    Ok(rows)
}

/// Renders an aligned text table mirroring the comparison-table layout:
/// procedure | ν | T | m | # of calls | E[gap] | P[gap > ε] (with the 95%
/// binomial interval).
pub fn text_table(summaries: &[Summary], epsilon: f64) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>5} {:>4} {:>5} {:>12} {:>12} {:>22}\n",
        "procedure",
        "nu",
        "T",
        "m",
        "# of calls",
        "E[gap]",
        format!("P[gap > {epsilon}]")
    ));
    out.push_str(&"-".repeat(81));
    out.push('\n');
    for s in summaries {
        let fail = format!(
            "{:.1}% [{:.1}, {:.1}]",
            100.0 * s.fail_prob,
            100.0 * s.fail_ci.0,
            100.0 * s.fail_ci.1
        );
        out.push_str(&format!(
            "{:<16} {:>5} {:>4} {:>5} {:>12.1} {:>12.5} {:>22}\n",
            s.procedure,
            opt_f64(s.nu),
            opt_usize(s.t_rounds),
            opt_usize(s.m),
            s.calls,
            s.mean_gap,
            fail
        ));
        if s.errors > 0 {
            out.push_str(&format!(
                "  ! {} of {} replications failed to complete\n",
                s.errors, s.replications
            ));
        }
    }
    out
}

/// Writes results in the requested format.
pub fn emit_results(
    summaries: &[Summary],
    format: OutputFormat,
    epsilon: f64,
    path: &Path,
) -> Result<(), BenchError> {
    if summaries.is_empty() {
        return Err(BenchError::Config("no results to emit".into()));
    }
    let body = match format {
        OutputFormat::Csv => summary_csv(summaries),
        OutputFormat::Table => text_table(summaries, epsilon),
    };
    std::fs::write(path, body)?;
    Ok(())
}
