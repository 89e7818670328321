//! Report rendering. Text output prints every number with the same shortest
//! round-trip representation that JSON uses, so the two modes agree exactly.

use std::fmt::Write as _;

use segpower_core::power::{PosthocResult, PowerResult, SampleSizeResult};
use segpower_core::report::TestReport;
use segpower_core::simlab::RejectionTable;

use crate::{CliError, OutputFormat};

fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    s.push('\n');
    Ok(s)
}

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn decision(reject: bool) -> &'static str {
    if reject {
        "reject"
    } else {
        "do not reject"
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn test_report(r: &TestReport, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            if let Some(w) = &r.w {
                rows.push(vec![
                    "W".into(),
                    w.w_max.to_string(),
                    w.critical_value.to_string(),
                    String::new(),
                    w.reject.to_string(),
                    w.changepoint.clone(),
                ]);
            }
            if let Some(p) = &r.pscore {
                rows.push(vec![
                    "P.Score".into(),
                    p.s0.to_string(),
                    String::new(),
                    p.p_value.to_string(),
                    p.reject.to_string(),
                    p.changepoint.clone(),
                ]);
            }
            if let Some(l) = &r.l {
                rows.push(vec![
                    "L".into(),
                    l.l_max.to_string(),
                    l.critical_value.to_string(),
                    String::new(),
                    l.reject.to_string(),
                    l.changepoint.clone(),
                ]);
            }
            csv_rows(&["test", "statistic", "critical_value", "p_value", "reject", "changepoint"], &rows)
        }
        OutputFormat::Text => {
            let mut s = String::new();
            writeln!(s, "n = {}, alpha = {}", r.n, r.alpha).unwrap();
            if let Some(w) = &r.w {
                let note = if w.critical_extrapolated { " (extrapolated)" } else { "" };
                writeln!(
                    s,
                    "W:       T_max = {}, W_max = {}, critical value = {}{note}, {}, changepoint = {}",
                    w.t_max,
                    w.w_max,
                    w.critical_value,
                    decision(w.reject),
                    w.changepoint
                )
                .unwrap();
            }
            if let Some(p) = &r.pscore {
                writeln!(
                    s,
                    "P.Score: s0 = {}, p-value = {} ({}), {}, psi_hat = {}, changepoint = {}",
                    p.s0,
                    p.p_value,
                    p.alternative,
                    decision(p.reject),
                    p.psi_hat,
                    p.changepoint
                )
                .unwrap();
            }
            if let Some(l) = &r.l {
                writeln!(
                    s,
                    "L:       L_max = {}, critical value = {}, {}, changepoint = {}",
                    l.l_max,
                    l.critical_value,
                    decision(l.reject),
                    l.changepoint
                )
                .unwrap();
            }
            Ok(s)
        }
    }
}

pub fn power(r: &PowerResult, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => csv_rows(&["n", "power", "e1"], &[vec![r.n_used.to_string(), r.power.to_string(), r.e1.to_string()]]),
        OutputFormat::Text => Ok(format!("power = {}\ne1 = {}\nn = {}\n", r.power, r.e1, r.n_used)),
    }
}

pub fn sample_size(r: &SampleSizeResult, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => csv_rows(
            &["n", "power_at_n", "target_power"],
            &[vec![r.n.to_string(), r.power_at_n.to_string(), r.target_power.to_string()]],
        ),
        OutputFormat::Text => Ok(format!(
            "n = {}\npower at n = {}\ntarget power = {}\n",
            r.n, r.power_at_n, r.target_power
        )),
    }
}

pub fn posthoc(r: &PosthocResult, format: OutputFormat) -> Result<String, CliError> {
    let (lower, upper) = (r.interval.as_ref().map(|i| i.lower), r.interval.as_ref().map(|i| i.upper));
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => csv_rows(
            &["n", "power", "e1", "psi_hat", "delta_hat", "sigma_hat", "ci_lower", "ci_upper"],
            &[vec![
                r.n_used.to_string(),
                r.power.to_string(),
                r.e1.to_string(),
                r.fit.psi_hat.to_string(),
                r.fit.delta_hat.to_string(),
                r.fit.sigma_hat.to_string(),
                opt(lower),
                opt(upper),
            ]],
        ),
        OutputFormat::Text => {
            let mut s = String::new();
            writeln!(
                s,
                "fit: psi_hat = {}, delta_hat = {}, sigma_hat = {}",
                r.fit.psi_hat, r.fit.delta_hat, r.fit.sigma_hat
            )
            .unwrap();
            writeln!(s, "power = {}\ne1 = {}\nn = {}", r.power, r.e1, r.n_used).unwrap();
            if let Some(i) = &r.interval {
                writeln!(s, "interval = [{}, {}] ({} draws, seed {})", i.lower, i.upper, i.draws, i.seed).unwrap();
            }
            Ok(s)
        }
    }
}

pub fn rejection_table(t: &RejectionTable, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => {
            let mut s = t.to_json();
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => Ok(t.to_csv()?),
        OutputFormat::Text => {
            let mut s = String::new();
            writeln!(s, "alpha = {}", t.alpha).unwrap();
            writeln!(s, "{:<8} {:<8} {:>4} {:>6} {:>8} {:>6}", "family", "test", "n", "delta", "rate", "reps").unwrap();
            for r in &t.rows {
                writeln!(
                    s,
                    "{:<8} {:<8} {:>4} {:>6} {:>8} {:>6}",
                    r.family, r.test, r.n, r.delta, r.rate, r.reps
                )
                .unwrap();
            }
            Ok(s)
        }
    }
}
