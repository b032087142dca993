//! Files written for a finished (or partially finished) run.
//!
//! | file | content |
//! |---|---|
//! | `config.json` | effective configuration |
//! | `snap_<i>.csv` | `T,Y,x,u,v,xi,P,Px,Q,Qx` per label |
//! | `physical_<i>.csv` | `x,u,ux,singular` on a uniform grid, `ux` empty where singular |
//! | `diagnostics.csv` | one row per diagnostic check |
//! | `summary.json` | breaking times, Hölder fit, atom table, final diagnostics |
//!
//! CSV numbers carry 17 significant digits.

use crate::config::EffectiveConfig;
use crate::diagnostics::DiagnosticsReport;
use crate::evolve::{BreakingEvent, EvolveError, RunResult};
use crate::reconstruct::{cusp_holder_fit, measure_decompose, to_physical, uniform_samples, Atom, HolderFit};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

pub const DIAGNOSTICS_HEADER: &str = "T,E,drift,H,dH_dT,residual_uY,residual_xY,min_cos2,x_decrease,xi_min,xi_max,\
sup_u,sup_P,sup_Px,bound_u,bound_P,margin_u,margin_P,margin_Px,margin_convolution,\
u_bound_ok,p_bound_ok,px_bound_ok,convolution_ok,xi_positive,x_monotone,q_vanishes";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}; check that the output directory is writable")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub snapshot: usize,
    pub time: f64,
    /// `H(T)`, the total mass of the measure.
    pub total: f64,
    pub atom_mass: f64,
    pub ac_mass: f64,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub lambda: u32,
    pub k: u32,
    pub completed: bool,
    pub failure: Option<String>,
    pub e0: f64,
    pub max_energy_drift: f64,
    pub bounds_hold: bool,
    pub first_breaking_time: Option<f64>,
    pub first_breaking_node: Option<usize>,
    pub breaking_events: Vec<BreakingEvent>,
    /// Fitted exponent at the first breaking, if one happened and the fit succeeded.
    pub holder_fit: Option<f64>,
    /// `1 − 1/k`
    pub holder_expected: f64,
    pub holder_detail: Option<HolderFit>,
    pub holder_error: Option<String>,
    pub snapshots: Vec<SnapshotEntry>,
    pub atom_table: Vec<AtomEntry>,
    pub final_diagnostics: Option<DiagnosticsReport>,
}

/// Exit status of a run: `Ok` when it completed with every hard check passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// A diagnostic or a priori bound failed.
    DiagnosticsFailed,
    /// The integration stopped for another reason.
    RuntimeFailed,
}

pub fn run_status(result: &RunResult) -> RunStatus {
    match &result.failure {
        Some(EvolveError::DiagnosticsFailure { .. }) => RunStatus::DiagnosticsFailed,
        Some(_) => RunStatus::RuntimeFailed,
        None if !result.all_bounds_hold() => RunStatus::DiagnosticsFailed,
        None => RunStatus::Ok,
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_at(path: &Path) -> impl Fn(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Build the summary without touching the file system.
pub fn summarize(cfg: &EffectiveConfig, result: &RunResult) -> Summary {
    let params = &result.params;
    let (holder_detail, holder_error) = match (&result.breaking.first_state, result.breaking.first_node) {
        (Some(state), Some(node)) => match cusp_holder_fit(state, node) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        },
        _ => (None, None),
    };
    let atom_table = result
        .trajectory
        .snapshots
        .iter()
        .enumerate()
        .map(|(i, snap)| {
            let s = &snap.state;
            let samples = uniform_samples(s.x[0], s.x[s.len() - 1], 2);
            let m = measure_decompose(s, &result.grid, params, &samples, cfg.epsilon_sing)
                .expect("end points lie inside the domain");
            AtomEntry {
                snapshot: i,
                time: s.time,
                total: m.total,
                atom_mass: m.atom_mass(),
                ac_mass: m.ac_mass,
                atoms: m.atoms,
            }
        })
        .collect();
    Summary {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.name().to_string(),
        lambda: params.lambda(),
        k: params.k(),
        completed: result.completed(),
        failure: result.failure.as_ref().map(|e| e.to_string()),
        e0: result.e0,
        max_energy_drift: result.max_energy_drift(),
        bounds_hold: result.all_bounds_hold(),
        first_breaking_time: result.breaking.first_time,
        first_breaking_node: result.breaking.first_node,
        breaking_events: result.breaking.events.clone(),
        holder_fit: holder_detail.as_ref().map(|f| f.exponent),
        holder_expected: 1.0 - 1.0 / f64::from(params.k()),
        holder_detail,
        holder_error,
        snapshots: result
            .trajectory
            .snapshots
            .iter()
            .enumerate()
            .map(|(index, s)| SnapshotEntry {
                index,
                step: s.step,
                time: s.state.time,
            })
            .collect(),
        atom_table,
        final_diagnostics: result.trajectory.reports.last().cloned(),
    }
}

pub fn write_diagnostics_csv<W: Write>(w: &mut W, reports: &[DiagnosticsReport]) -> io::Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in reports {
        let nums = [
            r.time,
            r.energy,
            r.energy_drift,
            r.higher,
            r.higher_rate,
            r.residual_uy,
            r.residual_xy,
            r.min_cos2,
            r.x_decrease,
            r.xi_min,
            r.xi_max,
            r.sup_u,
            r.sup_p,
            r.sup_px,
            r.bound_u,
            r.bound_p,
            r.margin_u,
            r.margin_p,
            r.margin_px,
            r.margin_convolution,
        ];
        let f = &r.flags;
        let flags = [
            f.u_bound,
            f.p_bound,
            f.px_bound,
            f.convolution_bound,
            f.xi_positive,
            f.x_monotone,
            f.q_vanishes,
        ];
        let mut row: Vec<String> = nums.iter().map(|&v| fmt(v)).collect();
        row.extend(flags.iter().map(|&b| u8::from(b).to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Write every output file of `result` into `cfg.output_dir`.
pub fn emit_outputs(cfg: &EffectiveConfig, result: &RunResult) -> Result<Summary, OutputError> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(io_at(dir))?;

    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json() + "\n").map_err(io_at(&path))?;

    let y = result.grid.nodes();
    for (i, snap) in result.trajectory.snapshots.iter().enumerate() {
        let path = dir.join(format!("snap_{i}.csv"));
        let mut w = create(&path)?;
        let (s, f) = (&snap.state, &snap.fields);
        let t = fmt(s.time);
        let mut body = String::from("T,Y,x,u,v,xi,P,Px,Q,Qx\n");
        for j in 0..s.len() {
            let row = [y[j], s.x[j], s.u[j], s.v[j], s.xi[j], f.p[j], f.px[j], f.q[j], f.qx[j]];
            body.push_str(&t);
            for v in row {
                body.push(',');
                body.push_str(&fmt(v));
            }
            body.push('\n');
        }
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_at(&path))?;

        let path = dir.join(format!("physical_{i}.csv"));
        let mut w = create(&path)?;
        let samples = uniform_samples(s.x[0], s.x[s.len() - 1], s.len());
        let phys = to_physical(s, &samples, cfg.epsilon_sing).expect("samples span the domain");
        let mut body = String::from("x,u,ux,singular\n");
        for j in 0..phys.len() {
            let ux = phys.ux[j].map(fmt).unwrap_or_default();
            body.push_str(&format!("{},{},{},{}\n", fmt(phys.x[j]), fmt(phys.u[j]), ux, u8::from(phys.singular[j])));
        }
        w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(io_at(&path))?;
    }

    let path = dir.join("diagnostics.csv");
    let mut w = create(&path)?;
    write_diagnostics_csv(&mut w, &result.trajectory.reports)
        .and_then(|_| w.flush())
        .map_err(io_at(&path))?;

    let summary = summarize(cfg, result);
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("plain data serializes");
    std::fs::write(&path, json + "\n").map_err(io_at(&path))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigOverrides;
    use crate::evolve::run;

    fn zero_run(dir: &Path) -> (EffectiveConfig, RunResult) {
        let cfg = ConfigOverrides {
            scenario: Some("zero".into()),
            n_points: Some(64),
            t_end: Some(0.05),
            snapshot_every: Some(25),
            output_dir: Some(dir.to_path_buf()),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let result = run(&cfg.initial_data().unwrap(), &cfg.model_params(), &cfg.run_config(Default::default())).unwrap();
        (cfg, result)
    }

    #[test]
    fn zero_scenario_files() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, result) = zero_run(dir.path());
        assert_eq!(run_status(&result), RunStatus::Ok);
        let summary = emit_outputs(&cfg, &result).unwrap();
        assert_eq!(summary.snapshots.len(), 3);
        assert_eq!(summary.first_breaking_time, None);
        assert!(summary.atom_table.iter().all(|a| a.atoms.is_empty() && a.total == 0.0));

        let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        let mut lines = diag.lines();
        assert_eq!(lines.next(), Some(DIAGNOSTICS_HEADER));
        for line in lines {
            assert_eq!(line.split(',').nth(1).unwrap().parse::<f64>().unwrap(), 0.0);
        }
        let snap = std::fs::read_to_string(dir.path().join("snap_2.csv")).unwrap();
        assert_eq!(snap.lines().count(), 65);
        assert!(snap.starts_with("T,Y,x,u,v,xi,P,Px,Q,Qx\n5.0000000000000003e-2,"));
        let phys = std::fs::read_to_string(dir.path().join("physical_0.csv")).unwrap();
        assert_eq!(phys.lines().nth(1).unwrap().split(',').count(), 4);

        let back: Summary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back.schema_version, SCHEMA_VERSION);
        let cfg_back = ConfigOverrides::from_file(&dir.path().join("config.json")).unwrap().resolve().unwrap();
        assert_eq!(cfg_back, cfg);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [a.path(), b.path()] {
            let (cfg, result) = zero_run(d);
            emit_outputs(&cfg, &result).unwrap();
        }
        for name in ["snap_1.csv", "physical_1.csv", "diagnostics.csv", "summary.json"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let (mut cfg, result) = zero_run(dir.path());
        cfg.output_dir = blocker.join("sub");
        assert!(matches!(emit_outputs(&cfg, &result), Err(OutputError::Io { .. })));
    }
}
