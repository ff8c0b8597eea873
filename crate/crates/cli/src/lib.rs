//! Scenario runner behind the `lab` binary: `run` executes the experiments
//! of one config, `sweep` repeats them over values of one numeric key.

pub mod config;
pub mod experiments;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use lateral_lab::report::{csv_record, summary, write_csv, EstimateReport, CSV_HEADER};

pub use config::{Experiment, ScenarioConfig};
pub use experiments::{ExperimentOutput, Scenario, Table};

/// Everything one config produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Reports that precede the experiments (admissibility, hypotheses).
    pub setup: Vec<EstimateReport>,
    pub outputs: Vec<ExperimentOutput>,
}

impl RunOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &EstimateReport> {
        self.setup.iter().chain(self.outputs.iter().flat_map(|o| o.reports.iter()))
    }

    /// `true` iff no report has `pass = false`.
    pub fn passed(&self) -> bool {
        self.reports().all(|r| r.pass)
    }
}

/// Runs the experiments of `cfg` in order. A `ψ` failing admissibility
/// stops the run after the setup report.
pub fn execute(cfg: &ScenarioConfig) -> anyhow::Result<RunOutcome> {
    let sc = match Scenario::build(cfg)? {
        Ok(sc) => sc,
        Err(report) => return Ok(RunOutcome { setup: vec![report], outputs: vec![] }),
    };
    let setup = sc.hypothesis_reports()?;
    let mut outputs = Vec::new();
    for e in cfg.experiment.expand() {
        outputs.push(sc.run(e).with_context(|| format!("experiment {}", e.name()))?);
    }
    Ok(RunOutcome { setup, outputs })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_reports(path: &Path, reports: &[EstimateReport]) -> anyhow::Result<()> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_csv(f, reports)?;
    Ok(())
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn manifest(config_text: &str, command: &str, timings: &[(String, f64)]) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "command = {command:?}");
    let _ = writeln!(m, "config_sha256 = \"{}\"", sha256_hex(config_text.as_bytes()));
    let _ = writeln!(m, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "\n[wall_seconds]");
    for (label, secs) in timings {
        let _ = writeln!(m, "{label:?} = {secs:.6}");
    }
    m
}

/// Where outputs go: `--out`, else the config's `out`, else `lab-out`.
pub fn output_dir(cli: Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    cli.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("lab-out"))
}

/// `lab run`: executes, writes `report.txt`, one CSV per experiment, extra
/// tables and `manifest.toml`. Returns whether every report passed.
pub fn run(config_path: &Path, out: Option<PathBuf>) -> anyhow::Result<bool> {
    let text = fs::read_to_string(config_path).with_context(|| format!("cannot read {}", config_path.display()))?;
    let cfg = ScenarioConfig::from_str(&text, &config_path.display().to_string())?;
    let dir = output_dir(out, &cfg);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let outcome = execute(&cfg)?;

    let mut text_report = format!("scenario {}\nconfig {}\n\n", cfg.name, config_path.display());
    if !outcome.setup.is_empty() {
        write_reports(&dir.join("setup.csv"), &outcome.setup)?;
        text_report += &summary(&outcome.setup);
    }
    let mut timings = Vec::new();
    for o in &outcome.outputs {
        write_reports(&dir.join(format!("{}.csv", o.experiment.name())), &o.reports)?;
        for t in &o.tables {
            write_table(&dir.join(format!("{}.csv", t.name)), &t.header, &t.rows)?;
        }
        text_report += &summary(&o.reports);
        timings.push((o.experiment.name().to_string(), o.wall_seconds));
        timings.extend(o.timings.iter().cloned());
    }
    let failed = outcome.reports().filter(|r| !r.pass).count();
    let total = outcome.reports().count();
    let _ = writeln!(text_report, "\n{} of {total} checks passed", total - failed);
    fs::write(dir.join("report.txt"), &text_report)?;
    fs::write(dir.join("manifest.toml"), manifest(&text, "run", &timings))?;
    print!("{text_report}");
    Ok(failed == 0)
}

/// `lab sweep`: one run per value, reports concatenated in value order into
/// `sweep.csv` (plus `sweep-<table>.csv` for extra tables).
pub fn sweep(config_path: &Path, axis: &str, values: &[f64], out: Option<PathBuf>) -> anyhow::Result<bool> {
    let text = fs::read_to_string(config_path).with_context(|| format!("cannot read {}", config_path.display()))?;
    let base = ScenarioConfig::from_str(&text, &config_path.display().to_string())?;
    let doc: toml::Table = toml::from_str(&text)?;
    let mut cells = Vec::with_capacity(values.len());
    for &v in values {
        let mut d = doc.clone();
        config::set_numeric(&mut d, axis, v)?;
        let cfg = ScenarioConfig::from_str(&toml::to_string(&d)?, &format!("{} with {axis} = {v}", config_path.display()))?;
        cells.push((v, cfg));
    }
    if values.is_empty() {
        // still reject an unknown axis
        config::set_numeric(&mut doc.clone(), axis, 1.0)?;
    }
    let outcomes: Vec<(f64, RunOutcome)> = cells
        .par_iter()
        .map(|(v, cfg)| execute(cfg).map(|o| (*v, o)))
        .collect::<anyhow::Result<_>>()?;

    let dir = output_dir(out, &base);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut header = vec!["axis".to_string(), "value".to_string()];
    header.extend(CSV_HEADER.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut tables: Vec<(String, Vec<String>, Vec<Vec<String>>)> = Vec::new();
    let mut timings = Vec::new();
    let mut text_report = String::new();
    for (v, o) in &outcomes {
        let value = lateral_lab::report::fmt_f64(*v);
        for r in o.reports() {
            let mut row = vec![axis.to_string(), value.clone()];
            row.extend(csv_record(r));
            rows.push(row);
        }
        let _ = writeln!(text_report, "{axis} = {value}");
        text_report += &summary(&o.setup);
        for out in &o.outputs {
            text_report += &summary(&out.reports);
            timings.push((format!("{axis}={value} {}", out.experiment.name()), out.wall_seconds));
            for t in &out.tables {
                let idx = match tables.iter().position(|x| x.0 == t.name) {
                    Some(i) => i,
                    None => {
                        let mut h = vec!["value".to_string()];
                        h.extend(t.header.iter().cloned());
                        tables.push((t.name.clone(), h, Vec::new()));
                        tables.len() - 1
                    }
                };
                for r in &t.rows {
                    let mut row = vec![value.clone()];
                    row.extend(r.iter().cloned());
                    tables[idx].2.push(row);
                }
            }
        }
    }
    write_table(&dir.join("sweep.csv"), &header, &rows)?;
    for (name, h, r) in &tables {
        write_table(&dir.join(format!("sweep-{name}.csv")), h, r)?;
    }
    let passed = outcomes.iter().all(|(_, o)| o.passed());
    let _ = writeln!(text_report, "\n{} sweep cells, {}", outcomes.len(), if passed { "all checks passed" } else { "some checks failed" });
    fs::write(dir.join("report.txt"), &text_report)?;
    fs::write(dir.join("manifest.toml"), manifest(&text, &format!("sweep {axis}"), &timings))?;
    print!("{text_report}");
    Ok(passed)
}
