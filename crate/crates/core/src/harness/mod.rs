//! Experiment drivers: convergence studies on the manufactured disk problem and
//! phase-separation simulations on the unit square.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bdf::{bdf_coefficients, recover_w, run, RunSummary, StartingValues, StepView};
use crate::error::{Error, Result};
use crate::fem::{assemble, energy, interpolate, norm_k, norm_m, total_mass, FemMatrices};
use crate::mesh::{unit_disk_mesh, unit_square_mesh, Mesh};
use crate::model::{initial_field, manufactured_disk_problem, Problem};

pub use config::{Experiment, RunConfig, Scenario};
pub use output::SeriesRow;

/// Combined bulk+surface errors of `u` and `w`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorTuple {
    pub u_l2: f64,
    pub u_h1: f64,
    pub w_l2: f64,
    pub w_h1: f64,
}

impl ErrorTuple {
    pub fn as_array(&self) -> [f64; 4] {
        [self.u_l2, self.u_h1, self.w_l2, self.w_h1]
    }

    pub fn max(&self, other: &Self) -> Self {
        Self {
            u_l2: self.u_l2.max(other.u_l2),
            u_h1: self.u_h1.max(other.u_h1),
            w_l2: self.w_l2.max(other.w_l2),
            w_h1: self.w_h1.max(other.w_h1),
        }
    }
}

/// Errors against the nodal interpolant of the exact solution at time `t`.
pub fn measure_errors(
    mesh: &Mesh,
    mats: &FemMatrices,
    problem: &Problem,
    u: &[f64],
    w: &[f64],
    t: f64,
) -> Result<ErrorTuple> {
    let (Some(eu), Some(ew)) = (problem.exact_u.as_ref(), problem.exact_w.as_ref()) else {
        return Err(Error::Config("error measurement needs an exact solution".into()));
    };
    let du = interpolate(mesh, &|x, t| eu.eval(x, t), t)?.sub(&u.to_vec().into());
    let dw = interpolate(mesh, &|x, t| ew.eval(x, t), t)?.sub(&w.to_vec().into());
    Ok(ErrorTuple {
        u_l2: norm_m(mats, &du),
        u_h1: norm_k(mats, &du),
        w_l2: norm_m(mats, &dw),
        w_h1: norm_k(mats, &dw),
    })
}

/// Experimental orders `log(eᵢ/eᵢ₊₁) / log(pᵢ/pᵢ₊₁)`; absent where an error is zero.
pub fn eoc(errors: &[f64], params: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != params.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "eoc needs equally long lists of at least two entries (got {} and {})",
            errors.len(),
            params.len()
        )));
    }
    if params.windows(2).any(|p| !(p[0] > p[1] && p[1] > 0.0)) {
        return Err(Error::InvalidArgument("eoc parameters must be positive and strictly decreasing".into()));
    }
    if errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("errors must be non-negative".into()));
    }
    Ok(errors
        .windows(2)
        .zip(params.windows(2))
        .map(|(e, p)| (e[0] > 0.0 && e[1] > 0.0).then(|| (e[0] / e[1]).ln() / (p[0] / p[1]).ln()))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    pub dof: usize,
    /// Maxima over all recorded times.
    pub errors: ErrorTuple,
    /// Orders against the previous row of the same series, in column order
    /// `u_l2, u_h1, w_l2, w_h1`.
    pub eoc: [Option<f64>; 4],
}

/// Runs the manufactured disk problem and returns the errors maximized over
/// every accepted step.
pub fn manufactured_run(q: usize, level: usize, tau: f64, config: &RunConfig) -> Result<ConvergenceRecord> {
    let mesh = unit_disk_mesh(level)?;
    let mats = assemble(&mesh)?;
    manufactured_run_on(&mesh, &mats, level, q, tau, config)
}

fn manufactured_run_on(
    mesh: &Mesh,
    mats: &FemMatrices,
    level: usize,
    q: usize,
    tau: f64,
    config: &RunConfig,
) -> Result<ConvergenceRecord> {
    let p = &config.problem;
    let problem = manufactured_disk_problem(p.eps, p.delta, p.kappa)?;
    let scheme = bdf_coefficients(q)?;
    let mut worst = ErrorTuple::default();
    // Only accepted steps count: the starting u are exact interpolants and the
    // starting w comes from an elliptic recovery that is not part of the scheme.
    let mut record = |v: &StepView<'_>| -> Result<()> {
        if !v.initial {
            worst = worst.max(&measure_errors(v.mesh, v.mats, v.problem, v.u, v.w, v.t)?);
        }
        Ok(())
    };
    run(
        &scheme,
        &problem,
        mesh,
        mats,
        tau,
        config.t_end,
        &StartingValues::ExactInterpolation,
        config.solver_options(),
        &mut [&mut record],
    )?;
    Ok(ConvergenceRecord { level, h: mesh.h(), tau, dof: mesh.n_vertices(), errors: worst, eoc: [None; 4] })
}

fn fill_eoc(series: &mut [ConvergenceRecord], param: impl Fn(&ConvergenceRecord) -> f64) -> Result<()> {
    if series.len() < 2 {
        return Ok(());
    }
    let params: Vec<f64> = series.iter().map(&param).collect();
    for col in 0..4 {
        let errs: Vec<f64> = series.iter().map(|r| r.errors.as_array()[col]).collect();
        for (i, e) in eoc(&errs, &params)?.into_iter().enumerate() {
            series[i + 1].eoc[col] = e;
        }
    }
    Ok(())
}

/// All `(level, τ)` runs of a study, executed in parallel.
fn run_grid(config: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    let meshes: Vec<(usize, Mesh, FemMatrices)> = config
        .levels
        .par_iter()
        .map(|&level| {
            let mesh = unit_disk_mesh(level)?;
            let mats = assemble(&mesh)?;
            Ok((level, mesh, mats))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..meshes.len()).flat_map(|i| config.tau.iter().map(move |&tau| (i, tau))).collect();
    jobs.par_iter()
        .map(|&(i, tau)| {
            let (level, mesh, mats) = &meshes[i];
            manufactured_run_on(mesh, mats, *level, config.q, tau, config)
        })
        .collect()
}

/// Spatial study: one series per τ, levels ascending, EOC in `h`.
pub fn converge_space(config: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    let mut groups: BTreeMap<u64, Vec<ConvergenceRecord>> = BTreeMap::new();
    for r in run_grid(config)? {
        groups.entry(r.tau.to_bits()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, mut series) in groups.into_iter().rev() {
        series.sort_by_key(|r| r.level);
        series.dedup_by_key(|r| r.level);
        fill_eoc(&mut series, |r| r.h)?;
        out.extend(series);
    }
    Ok(out)
}

/// Temporal study: one series per level, τ descending, EOC in `τ`.
pub fn converge_time(config: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    let mut groups: BTreeMap<usize, Vec<ConvergenceRecord>> = BTreeMap::new();
    for r in run_grid(config)? {
        groups.entry(r.level).or_default().push(r);
    }
    let mut out = Vec::new();
    for (_, mut series) in groups {
        series.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        series.dedup_by(|a, b| a.tau == b.tau);
        fill_eoc(&mut series, |r| r.tau)?;
        out.extend(series);
    }
    Ok(out)
}

/// Differences between final states of consecutive step sizes on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvergenceRow {
    /// The larger of the two step sizes compared.
    pub tau: f64,
    pub diff_u_l2: f64,
    pub diff_w_l2: f64,
    pub eoc_u: Option<f64>,
    pub eoc_w: Option<f64>,
}

/// Temporal order with the spatial error cancelled: `‖u_τ(T) − u_{τ'}(T)‖_M`
/// for consecutive entries of the τ list, all runs on the first configured level.
pub fn temporal_self_convergence(config: &RunConfig) -> Result<Vec<SelfConvergenceRow>> {
    let level = *config.levels.first().ok_or_else(|| Error::Config("missing refinement level".into()))?;
    let mesh = unit_disk_mesh(level)?;
    let mats = assemble(&mesh)?;
    let p = &config.problem;
    let problem = manufactured_disk_problem(p.eps, p.delta, p.kappa)?;
    let scheme = bdf_coefficients(config.q)?;
    let mut taus = config.tau.clone();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    if taus.len() < 3 {
        return Err(Error::Config("self-convergence needs at least three step sizes".into()));
    }
    let finals: Vec<RunSummary> = taus
        .par_iter()
        .map(|&tau| {
            run(
                &scheme,
                &problem,
                &mesh,
                &mats,
                tau,
                config.t_end,
                &StartingValues::ExactInterpolation,
                config.solver_options(),
                &mut [],
            )
        })
        .collect::<Result<_>>()?;
    let diffs: Vec<(f64, f64)> = finals
        .windows(2)
        .map(|f| (norm_m(&mats, &f[0].final_u.sub(&f[1].final_u)), norm_m(&mats, &f[0].final_w.sub(&f[1].final_w))))
        .collect();
    let params = &taus[..diffs.len()];
    let eu = eoc(&diffs.iter().map(|d| d.0).collect::<Vec<_>>(), params)?;
    let ew = eoc(&diffs.iter().map(|d| d.1).collect::<Vec<_>>(), params)?;
    Ok(diffs
        .iter()
        .enumerate()
        .map(|(i, d)| SelfConvergenceRow {
            tau: taus[i],
            diff_u_l2: d.0,
            diff_w_l2: d.1,
            eoc_u: i.checked_sub(1).and_then(|j| eu[j]),
            eoc_w: i.checked_sub(1).and_then(|j| ew[j]),
        })
        .collect())
}

pub struct SimulationReport {
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<PathBuf>,
    pub summary: Option<RunSummary>,
    /// Set when the run stopped early; `series` then holds what was recorded.
    pub aborted: Option<Error>,
}

/// Phase-separation run on the unit square. With `out` set, writes
/// `series.csv` and the configured `snapshot_<step>.vtk` files there.
pub fn simulate(config: &RunConfig, out: Option<&Path>) -> Result<SimulationReport> {
    let sim = config.simulate.as_ref().ok_or_else(|| Error::Config("missing [simulate] section".into()))?;
    if sim.series_every == 0 {
        return Err(Error::Config("series_every must be at least 1".into()));
    }
    let tau = *config.tau.first().ok_or_else(|| Error::Config("missing tau".into()))?;
    let mesh = unit_square_mesh(sim.square_n)?;
    let mats = assemble(&mesh)?;
    let problem = config.problem()?;
    let initial = initial_field(&config.initial_data()?, &mesh, &problem)?;
    let scheme = bdf_coefficients(config.q)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }

    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    // for q ≥ 2 the observers first see u^{q−1}; record u⁰ here
    if config.q > 1 {
        series.push(SeriesRow {
            step: 0,
            t: 0.0,
            mass: total_mass(&mats, &initial),
            energy: energy(&mats, &problem, &initial),
        });
        if let (Some(dir), true) = (out, sim.snapshot_steps.contains(&0)) {
            let weighted = mats.weighted_stiffness(&problem);
            let w0 = recover_w(&mesh, &mats, &problem, &weighted, &initial, 0.0, config.solver_options())?;
            snapshots.push(output::write_vtk_file(dir, &mesh, 0, &initial, &w0)?);
        }
    }
    let mut observer = |v: &StepView<'_>| -> Result<()> {
        if v.initial || v.step.is_multiple_of(sim.series_every) {
            series.push(SeriesRow {
                step: v.step,
                t: v.t,
                mass: total_mass(v.mats, v.u),
                energy: energy(v.mats, v.problem, v.u),
            });
        }
        if let Some(dir) = out {
            if sim.snapshot_steps.contains(&v.step) {
                snapshots.push(output::write_vtk_file(dir, v.mesh, v.step, v.u, v.w)?);
            }
        }
        Ok(())
    };
    let result = run(
        &scheme,
        &problem,
        &mesh,
        &mats,
        tau,
        config.t_end,
        &StartingValues::EulerBootstrap { initial: initial.clone() },
        config.solver_options(),
        &mut [&mut observer],
    );
    if let Some(dir) = out {
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join("series.csv"))?);
        output::write_series_csv(file, &series)?;
    }
    let (summary, aborted) = match result {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e)),
    };
    Ok(SimulationReport { series, snapshots, summary, aborted })
}
