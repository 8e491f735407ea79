//! CSV and JSON artifacts consumed by the plotting scripts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::inner::{AttractorFit, InnerPoint};
use crate::integrate::Trajectory;
use crate::melnikov::MelnikovEval;
use crate::stdmap::BasinCell;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub const TRAJECTORY_HEADER: &str = "t,p,q,I,theta,s,segment_id";
pub const JUMPS_HEADER: &str = "index,gap";
pub const ORBIT_HEADER: &str = "k,I,theta";
pub const MELNIKOV_GRID_HEADER: &str = "I,theta_bar,L_star,dL_dI,dL_dtheta,tau_star,nondeg";
pub const SCATTERING_SWEEP_HEADER: &str = "eps,I,theta_bar,dI_fo,dI_sh,dTheta_fo,dTheta_sh,resid";
pub const BASIN_HEADER: &str = "I0,theta0,rotation_number";

/// Header first, so that empty tables still carry their columns.
fn write_rows<W: Write, R: Serialize>(out: W, header: &str, rows: impl IntoIterator<Item = R>) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    p: f64,
    q: f64,
    #[serde(rename = "I")]
    action: f64,
    theta: f64,
    s: f64,
    segment_id: usize,
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<(), IoError> {
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(&traj.segment_ids)
        .map(|((t, z), id)| TrajectoryRow {
            t: *t,
            p: z.state.p,
            q: z.state.q,
            action: z.state.action,
            theta: z.state.angle,
            s: z.s,
            segment_id: *id,
        });
    write_rows(out, TRAJECTORY_HEADER, rows)
}

pub fn write_jumps<W: Write>(out: W, traj: &Trajectory) -> Result<(), IoError> {
    write_rows(out, JUMPS_HEADER, &traj.jumps)
}

#[derive(Serialize)]
struct OrbitRow {
    k: usize,
    #[serde(rename = "I")]
    action: f64,
    theta: f64,
}

pub fn write_inner_orbit<W: Write>(out: W, orbit: &[InnerPoint]) -> Result<(), IoError> {
    write_rows(
        out,
        ORBIT_HEADER,
        orbit.iter().enumerate().map(|(k, z)| OrbitRow {
            k,
            action: z.action,
            theta: z.angle,
        }),
    )
}

/// Orbit rows `(k, I, θ)`.
pub fn write_orbit<W: Write>(out: W, orbit: &[(usize, f64, f64)]) -> Result<(), IoError> {
    write_rows(
        out,
        ORBIT_HEADER,
        orbit.iter().map(|&(k, action, theta)| OrbitRow { k, action, theta }),
    )
}

#[derive(Serialize)]
struct MelnikovRow {
    #[serde(rename = "I")]
    action: f64,
    theta_bar: f64,
    #[serde(rename = "L_star")]
    reduced: f64,
    #[serde(rename = "dL_dI")]
    d_action: f64,
    #[serde(rename = "dL_dtheta")]
    d_angle: f64,
    tau_star: f64,
    nondeg: f64,
}

pub fn write_melnikov_grid<W: Write>(out: W, evals: &[MelnikovEval]) -> Result<(), IoError> {
    write_rows(
        out,
        MELNIKOV_GRID_HEADER,
        evals.iter().map(|e| MelnikovRow {
            action: e.action,
            theta_bar: e.theta_bar,
            reduced: e.reduced,
            d_action: e.reduced_grad.d_action,
            d_angle: e.reduced_grad.d_angle,
            tau_star: e.tau_star,
            nondeg: e.nondegeneracy,
        }),
    )
}

/// One comparison of the two scattering maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    #[serde(rename = "I")]
    pub action: f64,
    pub theta_bar: f64,
    #[serde(rename = "dI_fo")]
    pub d_action_first_order: f64,
    #[serde(rename = "dI_sh")]
    pub d_action_shooting: f64,
    #[serde(rename = "dTheta_fo")]
    pub d_theta_first_order: f64,
    #[serde(rename = "dTheta_sh")]
    pub d_theta_shooting: f64,
    pub resid: f64,
}

pub fn write_scattering_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), IoError> {
    write_rows(out, SCATTERING_SWEEP_HEADER, rows)
}

#[derive(Serialize)]
struct BasinRow {
    #[serde(rename = "I0")]
    action: f64,
    theta0: f64,
    rotation_number: f64,
}

pub fn write_basin<W: Write>(out: W, cells: &[BasinCell]) -> Result<(), IoError> {
    write_rows(
        out,
        BASIN_HEADER,
        cells.iter().map(|c| BasinRow {
            action: c.action,
            theta0: c.theta,
            rotation_number: c.rotation_number,
        }),
    )
}

#[derive(Serialize)]
struct FitSummary {
    rate: f64,
    predicted: f64,
    residual: f64,
    degenerate: bool,
}

/// `{rate, predicted, residual}` with `rate` the fitted log-slope.
pub fn write_attractor_fit<W: Write>(out: W, fit: &AttractorFit) -> Result<(), IoError> {
    let summary = FitSummary {
        rate: fit.slope,
        predicted: -fit.predicted_rate,
        residual: fit.residual,
        degenerate: fit.degenerate,
    };
    write_json(out, &summary)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Create `path` and hand a buffered writer to `f`.
pub fn to_file<F>(path: &Path, f: F) -> Result<(), IoError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), IoError>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExtendedState, State};

    fn header(bytes: &[u8]) -> String {
        String::from_utf8(bytes.to_vec())
            .unwrap()
            .lines()
            .next()
            .unwrap_or_default()
            .to_string()
    }

    #[test]
    fn trajectory_and_jumps_headers() {
        let mut traj = Trajectory::default();
        let z = ExtendedState::new(State::on_cylinder(1.0, 0.5), 0.0);
        traj.push_segment(&[0.0], &[z]);
        traj.push_segment(&[1.0, 2.0], &[z, z]);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_trajectory(&mut a, &traj).unwrap();
        write_jumps(&mut b, &traj).unwrap();
        assert_eq!(header(&a), TRAJECTORY_HEADER);
        assert_eq!(header(&b), JUMPS_HEADER);
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
        let mut empty = Vec::new();
        write_jumps(&mut empty, &Trajectory::default()).unwrap();
        assert_eq!(header(&empty), JUMPS_HEADER);
    }

    #[test]
    fn orbit_and_basin_headers() {
        let mut a = Vec::new();
        write_orbit(&mut a, &[(0, 1.0, 2.0)]).unwrap();
        assert_eq!(header(&a), ORBIT_HEADER);
        let mut b = Vec::new();
        write_basin(
            &mut b,
            &[BasinCell {
                action: 0.0,
                theta: 0.0,
                rotation_number: 0.1,
            }],
        )
        .unwrap();
        assert_eq!(header(&b), BASIN_HEADER);
    }

    #[test]
    fn sweep_header() {
        let row = SweepRow {
            eps: 1e-2,
            action: 1.0,
            theta_bar: 4.0,
            d_action_first_order: 0.0,
            d_action_shooting: 0.0,
            d_theta_first_order: 0.0,
            d_theta_shooting: 0.0,
            resid: 0.0,
        };
        let mut a = Vec::new();
        write_scattering_sweep(&mut a, &[row]).unwrap();
        assert_eq!(header(&a), SCATTERING_SWEEP_HEADER);
    }
}
