//! Duration sweeps with a completed-row manifest for resumption.
//!
//! Points run in grid order. After each point its rows are appended to
//! `sweep_manifest.jsonl`, whose first line records the resolved sweep
//! config. A rerun with the same config skips the recorded points; the final
//! CSV is assembled from the manifest in grid order.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sta_shuttle::dynamics::{ExcitationReport, Particle};
use sta_shuttle::noise::{monte_carlo_sensitivity, write_scan_csv, ScanRow};
use sta_shuttle::trajectory::TransportTask;
use sta_shuttle::{io, Error, Result};

use crate::commands::run_simulation;
use crate::config::{NoiseAnalysis, NoiseJob, SimulateJob, SweepJob};

pub const MANIFEST: &str = "sweep_manifest.jsonl";
pub const TABLE: &str = "sweep.csv";

/// One engine's result at one duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub t_f: f64,
    pub engine: String,
    pub final_excess_energy: f64,
    pub initial_excess_energy: f64,
    pub fidelity: Option<f64>,
    pub max_transient_energy: f64,
    pub max_relative_displacement: f64,
}

impl SimRow {
    fn new(t_f: f64, engine: &str, r: &ExcitationReport) -> Self {
        SimRow {
            t_f,
            engine: engine.to_string(),
            final_excess_energy: r.final_excess_energy,
            initial_excess_energy: r.initial_excess_energy,
            fidelity: r.fidelity,
            max_transient_energy: r.max_transient_energy,
            max_relative_displacement: r.max_relative_displacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    index: usize,
    t_f: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    simulate: Vec<SimRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<ScanRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: serde_json::Value,
}

pub struct SweepSummary {
    pub points: usize,
    pub resumed: usize,
}

fn simulate_point(task: &TransportTask, job: &SimulateJob, index: usize) -> Result<Entry> {
    let (reports, _) = run_simulation(task, job)?;
    let t_f = task.duration();
    let mut rows = Vec::new();
    if let Some(r) = &reports.classical {
        rows.push(SimRow::new(t_f, "classical", r));
    }
    if let Some(r) = &reports.quantum {
        rows.push(SimRow::new(t_f, "quantum", r));
    }
    Ok(Entry {
        index,
        t_f,
        simulate: rows,
        noise: None,
    })
}

fn noise_point(task: &TransportTask, job: &NoiseJob, index: usize) -> Result<Entry> {
    let NoiseAnalysis::Sensitivity {
        path,
        realizations,
        options,
    } = &job.analysis
    else {
        return Err(Error::InvalidInput("noise sweeps need a sensitivity analysis".into()));
    };
    let trap = path.trap(task)?;
    let r = monte_carlo_sensitivity(
        &trap,
        &job.lattice,
        Particle::from(task),
        &job.model,
        *realizations,
        options,
    )?;
    Ok(Entry {
        index,
        t_f: task.duration(),
        simulate: Vec::new(),
        noise: Some(ScanRow {
            t_f: task.duration(),
            mean_excess: r.noise_induced_excess,
            stderr: r.standard_error,
            n: r.n_realizations,
        }),
    })
}

/// Completed entries from an existing manifest. A truncated final line (an
/// interrupted write) is dropped; a different config is an error.
fn load_manifest(path: &Path, header: &Header, durations: &[f64]) -> Result<Vec<Entry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let Some(first) = lines.next().transpose()? else {
        return Ok(Vec::new());
    };
    let Ok(found) = serde_json::from_str::<Header>(&first) else {
        return Ok(Vec::new());
    };
    if found.config != header.config {
        return Err(Error::InvalidInput(format!(
            "{} belongs to a different sweep config; remove it or use another output directory",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    for line in lines {
        let Ok(e) = serde_json::from_str::<Entry>(&line?) else {
            break;
        };
        if e.index != entries.len() || durations.get(e.index) != Some(&e.t_f) {
            break;
        }
        entries.push(e);
    }
    Ok(entries)
}

fn line(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sweep(task: &TransportTask, job: &SweepJob, dir: &Path) -> Result<SweepSummary> {
    let durations = job.durations.values();
    let header = Header {
        config: serde_json::to_value(job)?,
    };
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(MANIFEST);
    let mut entries = load_manifest(&manifest_path, &header, &durations)?;
    let resumed = entries.len();

    let mut text = line(&header)?;
    for e in &entries {
        text.extend(line(e)?);
    }
    std::fs::write(&manifest_path, &text)?;
    let mut manifest = OpenOptions::new().append(true).open(&manifest_path)?;

    for (index, &t_f) in durations.iter().enumerate().skip(resumed) {
        let t = task.with_duration(t_f)?;
        let entry = match (&job.simulate, &job.noise) {
            (Some(s), None) => simulate_point(&t, s, index)?,
            (None, Some(n)) => noise_point(&t, n, index)?,
            _ => {
                return Err(Error::InvalidInput(
                    "sweep needs exactly one of `simulate` or `noise`".into(),
                ))
            }
        };
        manifest.write_all(&line(&entry)?)?;
        manifest.flush()?;
        entries.push(entry);
    }

    let table = if job.simulate.is_some() {
        io::csv_bytes(|w| {
            let mut csv = csv::Writer::from_writer(w);
            for row in entries.iter().flat_map(|e| &e.simulate) {
                csv.serialize(row)?;
            }
            csv.flush()?;
            Ok(())
        })?
    } else {
        let rows: Vec<ScanRow> = entries.iter().filter_map(|e| e.noise.clone()).collect();
        io::csv_bytes(|w| write_scan_csv(&rows, w))?
    };
    std::fs::write(dir.join(TABLE), table)?;
    Ok(SweepSummary {
        points: durations.len(),
        resumed,
    })
}
