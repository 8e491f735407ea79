//! One function per subcommand. Each writes fixed file names under the output directory.

use std::fmt;
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rotpend::diffusion::{assemble_pseudo_orbit, build_strip, diffuse, rho_bar_bound, StripSearch, StripSpec};
use rotpend::inner::{attractor_fit_after, inner_lemma_bounds, inner_orbit, InnerPoint, LemmaReport};
use rotpend::integrate::integrate;
use rotpend::io::{self, SweepRow};
use rotpend::melnikov::{evaluate, MelnikovEval, ReducedGradient, TauBranch};
use rotpend::model::{wrap_angle, ExtendedState, ModelParams, State, Variant};
use rotpend::scattering::{scattering_first_order, scattering_shooting, ReducedPoint};
use rotpend::stdmap::{basin_scan, phase_portrait, rotation_number, StdMapParams};
use serde::Serialize;

use crate::config::{required, BranchRule, CylinderPoint, ExperimentConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Inner,
    MelnikovGrid,
    ScatteringSweep,
    Diffuse,
    Stdmap,
    Basin,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved"), cfg.resolved()?)?;
    match cmd {
        Command::Simulate => simulate(cfg, dir),
        Command::Inner => inner(cfg, dir),
        Command::MelnikovGrid => melnikov_grid(cfg, dir),
        Command::ScatteringSweep => scattering_sweep(cfg, dir),
        Command::Diffuse => run_diffuse(cfg, dir),
        Command::Stdmap => stdmap(cfg, dir),
        Command::Basin => basin(cfg, dir),
    }
}

fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("simulate", &cfg.simulate)?;
    let z = block.initial;
    let z0 = ExtendedState::new(State::new(z.p, z.q, z.action, z.theta), z.s);
    let traj = integrate(&z0, (block.t_start, block.t_end), &cfg.model, &cfg.integrator)
        .map_err(|e| CliError::numerical("integrate", e))?;
    io::to_file(&dir.join("trajectory.csv"), |w| io::write_trajectory(w, &traj))?;
    io::to_file(&dir.join("jumps.csv"), |w| io::write_jumps(w, &traj))?;
    Ok(())
}

#[derive(Serialize)]
struct LemmaPoint {
    #[serde(rename = "I")]
    action: f64,
    theta: f64,
    #[serde(flatten)]
    report: LemmaReport,
}

#[derive(Serialize)]
struct LemmaSummary {
    t0: f64,
    max_action_ratio: f64,
    max_angle_ratio: f64,
    max_energy_ratio: f64,
    points: Vec<LemmaPoint>,
}

fn inner(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("inner", &cfg.inner)?;
    let z0 = InnerPoint::new(block.initial.action, block.initial.theta);
    let orbit = inner_orbit(&z0, block.iterates, &cfg.model, &cfg.integrator)
        .map_err(|e| CliError::numerical("inner_orbit", e))?;
    io::to_file(&dir.join("orbit.csv"), |w| io::write_inner_orbit(w, &orbit))?;

    if cfg.model.eps > 0.0 {
        let fit = attractor_fit_after(&z0, block.iterates, block.transient, &cfg.model, &cfg.integrator)
            .map_err(|e| CliError::numerical("attractor_fit", e))?;
        io::to_file(&dir.join("attractor_fit.json"), |w| io::write_attractor_fit(w, &fit))?;
    }

    let Some(lemma) = block.lemma else {
        return Ok(());
    };
    if cfg.model.variant != Variant::NonVanishing {
        return Err(CliError::Config(
            "inner.lemma requires model.variant = \"non-vanishing\"".into(),
        ));
    }
    if cfg.model.eps <= 0.0 {
        return Err(CliError::Config("inner.lemma requires model.eps > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(lemma.seed);
    let starts: Vec<InnerPoint> = (0..lemma.points)
        .map(|_| {
            let i = sample(&mut rng, lemma.action_range);
            let t = sample(&mut rng, lemma.theta_range);
            InnerPoint::new(i, t)
        })
        .collect();
    let points = starts
        .par_iter()
        .map(|z| {
            inner_lemma_bounds(z, lemma.t0, lemma.samples, &cfg.model, &cfg.integrator)
                .map(|report| LemmaPoint {
                    action: z.action,
                    theta: z.angle,
                    report,
                })
                .map_err(|e| CliError::numerical(format!("inner_lemma_bounds at I = {}", z.action), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let max = |f: fn(&LemmaReport) -> f64| points.iter().map(|p| f(&p.report)).fold(0.0, f64::max);
    let summary = LemmaSummary {
        t0: lemma.t0,
        max_action_ratio: max(|r| r.action_ratio),
        max_angle_ratio: max(|r| r.angle_ratio),
        max_energy_ratio: max(|r| r.energy_ratio),
        points,
    };
    io::to_file(&dir.join("lemma.json"), |w| io::write_json(w, &summary))?;
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Branch selector for a point, either pointwise or continued along a strip channel.
fn branch_for(rule: BranchRule, strip: Option<&StripSpec>, action: f64, theta_bar: f64) -> TauBranch {
    match (rule, strip) {
        (BranchRule::Strip, Some(s)) => s.channel.branch(action, theta_bar),
        _ => TauBranch::MaxNondegeneracy,
    }
}

fn strip_for(
    rule: BranchRule,
    search: Option<StripSearch>,
    params: &ModelParams,
) -> Result<Option<StripSpec>, CliError> {
    match rule {
        BranchRule::MaxNondegeneracy => Ok(None),
        BranchRule::Strip => build_strip(params, &search.unwrap_or_default())
            .map(Some)
            .map_err(|e| CliError::numerical("build_strip", e)),
    }
}

/// Grid cell without a transverse critical phase.
fn missing_eval(action: f64, theta_bar: f64) -> MelnikovEval {
    MelnikovEval {
        action,
        theta_bar,
        potential: f64::NAN,
        d_potential_d_action: f64::NAN,
        d_potential_d_angle: f64::NAN,
        tau_star: f64::NAN,
        nondegeneracy: f64::NAN,
        reduced: f64::NAN,
        reduced_grad: ReducedGradient {
            d_action: f64::NAN,
            d_angle: f64::NAN,
        },
    }
}

fn melnikov_grid(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("melnikov_grid", &cfg.melnikov_grid)?;
    if block.n_action == 0 || block.n_theta == 0 {
        return Err(CliError::Config(
            "melnikov_grid.n_action and n_theta must be positive".into(),
        ));
    }
    let strip = strip_for(block.branch, block.strip, &cfg.model)?;
    let actions = axis(block.action_range.0, block.action_range.1, block.n_action);
    let thetas = axis(block.theta_range.0, block.theta_range.1, block.n_theta);
    let cells: Vec<(f64, f64)> = actions
        .iter()
        .flat_map(|&i| thetas.iter().map(move |&t| (i, t)))
        .collect();
    let evals: Vec<MelnikovEval> = cells
        .par_iter()
        .map(|&(i, t)| {
            let branch = branch_for(block.branch, strip.as_ref(), i, t);
            evaluate(i, t, &cfg.model, branch).unwrap_or_else(|_| missing_eval(i, t))
        })
        .collect();
    let missing = evals.iter().filter(|e| e.tau_star.is_nan()).count();
    if missing > 0 {
        eprintln!(
            "melnikov-grid: {missing} of {} cells have no transverse critical phase",
            evals.len()
        );
    }
    io::to_file(&dir.join("melnikov_grid.csv"), |w| io::write_melnikov_grid(w, &evals))?;
    Ok(())
}

fn sweep_point(
    params: &ModelParams,
    strip: Option<&StripSpec>,
    rule: BranchRule,
    point: CylinderPoint,
    s: f64,
    shooting: &rotpend::scattering::ShootingConfig,
) -> Result<SweepRow, CliError> {
    let z = ReducedPoint::new(point.action, point.theta);
    let branch = branch_for(rule, strip, z.action, z.theta_bar);
    let at = || format!("at eps = {}, I = {}, theta_bar = {}", params.eps, z.action, z.theta_bar);
    let (shot, orbit) = scattering_shooting(&z, s, params, branch, shooting)
        .map_err(|e| CliError::numerical(format!("scattering_shooting {}", at()), e))?;
    let first = scattering_first_order(&z, params, branch)
        .map_err(|e| CliError::numerical(format!("scattering_first_order {}", at()), e))?;
    Ok(SweepRow {
        eps: params.eps,
        action: z.action,
        theta_bar: z.theta_bar,
        d_action_first_order: first.d_action,
        d_action_shooting: shot.d_action,
        d_theta_first_order: first.d_theta,
        d_theta_shooting: shot.d_theta,
        resid: orbit.residual,
    })
}

fn scattering_sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("scattering_sweep", &cfg.scattering_sweep)?;
    if let Some(bad) = block.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(CliError::Config(format!(
            "scattering_sweep.eps entries must lie in (0, 1), got {bad}"
        )));
    }
    let per_eps = block
        .eps
        .iter()
        .map(|&eps| {
            let params = cfg.model.with_eps(eps);
            strip_for(block.branch, block.strip, &params).map(|strip| (params, strip))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&(ModelParams, Option<StripSpec>), CylinderPoint)> = per_eps
        .iter()
        .flat_map(|run| block.points.iter().map(move |&pt| (run, pt)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|((params, strip), pt)| sweep_point(params, strip.as_ref(), block.branch, *pt, block.s, &block.shooting))
        .collect::<Result<Vec<_>, _>>()?;
    io::to_file(&dir.join("scattering_sweep.csv"), |w| {
        io::write_scattering_sweep(w, &rows)
    })?;
    Ok(())
}

#[derive(Serialize)]
struct StripSummary<'a> {
    rho_bar: f64,
    rho_bar_max: Option<f64>,
    #[serde(flatten)]
    strip: &'a StripSpec,
}

fn run_diffuse(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("diffuse", &cfg.diffuse)?;
    let strip_err = |e| CliError::numerical("build_strip", e);
    let (params, rho_bar_max) = match block.rho_bar_fraction {
        Some(fraction) => {
            if !(fraction.is_finite() && fraction >= 0.0) {
                return Err(CliError::Config(format!(
                    "diffuse.rho_bar_fraction must be non-negative, got {fraction}"
                )));
            }
            let undamped = build_strip(&cfg.model.with_rho_bar(0.0), &block.strip).map_err(strip_err)?;
            let bound = rho_bar_bound(undamped.c, undamped.d_max, block.strip.t0)
                .map_err(|e| CliError::numerical("rho_bar_bound", e))?;
            (cfg.model.with_rho_bar(fraction * bound), Some(bound))
        }
        None => (cfg.model, None),
    };
    let strip = build_strip(&params, &block.strip).map_err(strip_err)?;
    let summary = StripSummary {
        rho_bar: params.rho_bar,
        rho_bar_max,
        strip: &strip,
    };
    io::to_file(&dir.join("strip.json"), |w| io::write_json(w, &summary))?;

    let (orbit, report) =
        diffuse(&params, &strip, &block.options, &cfg.integrator).map_err(|e| CliError::numerical("diffuse", e))?;
    io::to_file(&dir.join("report.json"), |w| io::write_json(w, &report))?;
    let (traj, splices) = assemble_pseudo_orbit(&orbit, &params, &strip, &block.assemble, &cfg.integrator)
        .map_err(|e| CliError::numerical("assemble_pseudo_orbit", e))?;
    io::to_file(&dir.join("orbit.csv"), |w| io::write_trajectory(w, &traj))?;
    io::to_file(&dir.join("jumps.csv"), |w| io::write_jumps(w, &traj))?;
    io::to_file(&dir.join("splices.json"), |w| io::write_json(w, &splices))?;
    Ok(())
}

#[derive(Serialize)]
struct RotationRow {
    index: usize,
    #[serde(rename = "I")]
    action: f64,
    theta: f64,
    rotation_number: f64,
}

fn stdmap(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("stdmap", &cfg.stdmap)?;
    let params = std_params(block.params)?;
    let initial: Vec<(f64, f64)> = block.initial.iter().map(|p| (p.action, p.theta)).collect();
    let orbits = phase_portrait(&initial, &params, block.iterates);
    for (n, orbit) in orbits.iter().enumerate() {
        io::to_file(&dir.join(format!("orbit_{n}.csv")), |w| io::write_orbit(w, orbit))?;
    }
    let rotations = initial
        .iter()
        .enumerate()
        .map(|(index, &(i, t))| {
            rotation_number(i, t, &params, block.rotation_iterates)
                .map(|rotation_number| RotationRow {
                    index,
                    action: i,
                    theta: wrap_angle(t),
                    rotation_number,
                })
                .map_err(|e| CliError::Config(format!("stdmap.rotation_iterates: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    io::to_file(&dir.join("rotation.json"), |w| io::write_json(w, &rotations))?;
    Ok(())
}

fn std_params(p: StdMapParams) -> Result<StdMapParams, CliError> {
    StdMapParams::new(p.eps, p.lambda, p.mu).map_err(|e| CliError::Config(e.to_string()))
}

fn basin(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let block = required("basin", &cfg.basin)?;
    let params = std_params(block.params)?;
    let cells =
        basin_scan(&block.grid, &params, block.iterates).map_err(|e| CliError::Config(format!("basin: {e}")))?;
    io::to_file(&dir.join("basin.csv"), |w| io::write_basin(w, &cells))?;
    Ok(())
}
