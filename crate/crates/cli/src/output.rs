//! CSV and JSON writers. CSV floats carry 17 significant digits; JSON floats
//! use the shortest representation that round-trips.

use std::io::Write;
use std::path::Path;

use chatter_core::flow::{EventKind, Regime, Trajectory};
use serde::Serialize;

use crate::error::{CliError, Result};

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Bang => "bang",
        Regime::Singular => "singular",
        Regime::Degenerate => "degenerate",
    }
}

/// Columns `t, q0.., p0.., u0.., regime, h_norm`.
pub fn sample_header(n: usize, controls: usize) -> Vec<String> {
    let mut h = vec!["t".to_owned()];
    h.extend((0..n).map(|i| format!("q{i}")));
    h.extend((0..n).map(|i| format!("p{i}")));
    h.extend((0..controls).map(|i| format!("u{i}")));
    h.push("regime".into());
    h.push("h_norm".into());
    h
}

pub fn write_samples<W: Write>(out: W, traj: &Trajectory, n: usize, controls: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sample_header(n, controls))?;
    for s in &traj.samples {
        let mut rec: Vec<String> = Vec::with_capacity(2 * n + controls + 3);
        rec.push(format!("{:.16e}", s.t));
        rec.extend(s.state.q.iter().chain(&s.state.p).chain(&s.u).map(|x| format!("{x:.16e}")));
        rec.push(regime_name(s.regime).into());
        rec.push(format!("{:.16e}", s.h_norm));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| CliError::Io { path: "<csv>".into(), message: e.to_string() })
}

#[derive(Debug, Serialize)]
pub struct EventOut {
    pub t: f64,
    pub kind: &'static str,
    pub goh_rank: usize,
    pub h_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulationOut {
    pub termination: &'static str,
    pub theta: f64,
    pub samples: usize,
    pub events: Vec<EventOut>,
    pub hamiltonian_drift: f64,
}

pub fn simulation_summary(traj: &Trajectory, drift: f64) -> SimulationOut {
    SimulationOut {
        termination: match traj.termination {
            chatter_core::flow::Termination::Horizon => "horizon",
            chatter_core::flow::Termination::Chattering => "chattering",
        },
        theta: traj.theta,
        samples: traj.samples.len(),
        events: traj
            .events
            .iter()
            .map(|e| EventOut {
                t: e.t,
                kind: match e.kind {
                    EventKind::Crossing => "crossing",
                    EventKind::Entry => "entry",
                    EventKind::Exit => "exit",
                },
                goh_rank: e.goh_rank,
                h_norm: e.h_norm,
            })
            .collect(),
        hamiltonian_drift: drift,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}
