use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, PolicyReport, Saving};
use crate::cost::CacheMode;

pub const CSV_COLUMNS: [&str; 11] = [
    "policy",
    "microservice",
    "registry",
    "device",
    "t_deploy_s",
    "t_transfer_s",
    "t_process_s",
    "ct_s",
    "e_active_j",
    "e_static_j",
    "ec_j",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown format `{s}`")),
        }
    }
}

/// Everything one `solve` produces for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub cache_mode: CacheMode,
    pub reports: Vec<PolicyReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub savings: Vec<Saving>,
}

fn csv_rows(run: &RunReport) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in &run.reports {
        let policy = r.policy.as_str();
        for m in &r.per_microservice {
            let c = &m.cost;
            w.write_record([
                policy.to_owned(),
                m.microservice.clone(),
                m.registry.clone(),
                m.device.clone(),
                c.t_deploy_s.to_string(),
                c.t_transfer_s.to_string(),
                c.t_process_s.to_string(),
                c.ct_s.to_string(),
                c.e_active_j.to_string(),
                c.e_static_j.to_string(),
                c.ec_j.to_string(),
            ])?;
        }
    }
    // Footer: key in the microservice column, value in the first numeric one.
    let blank = || String::new();
    for r in &run.reports {
        let policy = r.policy.as_str().to_owned();
        let mut footer = |key: &str, registry: String, device: String, value: String| {
            let mut rec = vec![policy.clone(), key.to_owned(), registry, device, value];
            rec.resize(CSV_COLUMNS.len(), blank());
            w.write_record(rec)
        };
        footer(
            "total_energy_j",
            blank(),
            blank(),
            r.total_energy_j.to_string(),
        )?;
        footer(
            "makespan_serial_s",
            blank(),
            blank(),
            r.makespan_serial_s.to_string(),
        )?;
        for cell in &r.distribution {
            footer(
                "distribution_percent",
                cell.registry.clone(),
                cell.device.clone(),
                cell.percent.to_string(),
            )?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| BenchError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Byte-deterministic rendering.
pub fn render(run: &RunReport, format: OutputFormat) -> Result<String, BenchError> {
    match format {
        OutputFormat::Csv => csv_rows(run),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(run).expect("reports serialize");
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit(run: &RunReport, format: OutputFormat, path: &Path) -> Result<(), BenchError> {
    let text = render(run, format)?;
    std::fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{compare, run_all, text_scenario, Policy, SolveOptions};

    fn text_run() -> RunReport {
        let s = text_scenario();
        let reports = run_all(&s, CacheMode::Cold, SolveOptions::default()).unwrap();
        RunReport {
            scenario: s.name.clone(),
            cache_mode: CacheMode::Cold,
            savings: compare(&reports, Policy::Hybrid),
            reports,
        }
    }

    #[test]
    fn csv_has_one_row_per_policy_and_microservice() {
        let run = text_run();
        let text = render(&run, OutputFormat::Csv).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_COLUMNS);
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        let body = rows
            .iter()
            .filter(|r| !r[4].is_empty() && !r[5].is_empty())
            .count();
        assert_eq!(body, 4 * 6);
        // 2 scalar footers and 4 distribution cells per policy.
        assert_eq!(rows.len(), 4 * 6 + 4 * (2 + 4));
        assert!(rows.iter().all(|r| r.len() == CSV_COLUMNS.len()));
    }

    #[test]
    fn rendering_is_deterministic_and_json_roundtrips() {
        let run = text_run();
        assert_eq!(
            render(&run, OutputFormat::Csv).unwrap(),
            render(&text_run(), OutputFormat::Csv).unwrap()
        );
        let json = render(&run, OutputFormat::Json).unwrap();
        assert_eq!(json, render(&text_run(), OutputFormat::Json).unwrap());
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn emit_writes_file() {
        let run = text_run();
        let dir = std::env::temp_dir().join(format!("regplace-emit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.json");
        emit(&run, OutputFormat::Json, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            render(&run, OutputFormat::Json).unwrap()
        );
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(matches!(
            emit(&run, OutputFormat::Json, &dir.join("missing/x.json")),
            Err(BenchError::Io { .. })
        ));
    }
}
