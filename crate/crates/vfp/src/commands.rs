//! Command entry points. Each writes its outputs, the resolved config
//! (`config.json`) and the audit (`audit.csv`) under the output directory.

use std::path::Path;

use vfp_core::diagnostics::{
    bounds_check, conservation_report, density_temperature_check, h_theorem_check, lp_growth_check,
    moment_integrability_check, third_moment_check, AuditReport, ConservationTolerance, LpKind, RateWindow, Status,
    ROUNDOFF,
};
use vfp_core::moments::compute_moments;
use vfp_core::particles::{estimate_moments, run_particles};
use vfp_core::regularize::{build_mollifier, mollify, mollify_vector, regularize_initial};
use vfp_core::solver::{
    continuation_study, picard_solve, run, ContinuationRow, Integrator, Sample, SolverConfig, Trajectory,
};
use vfp_core::{DistField, MomentSet, PhaseGrid, RegParams, VfpError};

use crate::config::{Initial, RunConfig};
use crate::error::{Error, Result};
use crate::output::{
    read_table, write_audit, write_continuation, write_residuals, write_table, write_trajectory, Table,
};
use crate::plot::{Chart, Series};
use crate::snapshot::write_snapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Run,
    Picard,
    Particles,
    Sweep,
    Compare,
    Check,
    Plot,
}

/// Runs `command` with `cfg` (already resolved) and writes everything under
/// `out`. Errors that abort a run are returned after writing what exists.
pub fn dispatch(command: Command, cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    let echo = out.join("config.json");
    std::fs::write(&echo, cfg.to_json()).map_err(Error::io(&echo))?;
    let report = match command {
        Command::Run => cmd_run(cfg, out)?,
        Command::Picard => cmd_picard(cfg, out)?,
        Command::Particles => cmd_particles(cfg, out)?,
        Command::Sweep => cmd_sweep(cfg, out)?,
        Command::Compare => cmd_compare(cfg, out)?,
        Command::Check => cmd_check(cfg, out)?,
        Command::Plot => cmd_plot(out)?,
    };
    write_audit(&out.join("audit.csv"), &report)?;
    Ok(report)
}

fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:03}.txt")
}

/// Runs the integrator; an abort leaves its last state in `aborted.txt`.
fn integrate(sc: &SolverConfig, f0: &DistField, out: &Path) -> Result<Trajectory> {
    match run(sc, f0) {
        Err(VfpError::Aborted { time, reason, snapshot }) => {
            write_snapshot(&out.join("aborted.txt"), &snapshot, time)?;
            Err(VfpError::Aborted { time, reason, snapshot }.into())
        }
        other => Ok(other?),
    }
}

/// Conservation audit; the regularized coefficients conserve mass only, so
/// momentum and energy drifts are then recorded without a bound.
fn conservation_audit(
    samples: &[Sample],
    dim: usize,
    reg: Option<RegParams>,
    tol: ConservationTolerance,
) -> Result<AuditReport> {
    let mut r = conservation_report(samples, dim, tol)?;
    if reg.is_some() {
        for c in r.checks.iter_mut().filter(|c| c.name != "mass_drift") {
            c.bound = f64::NAN;
            c.status = Status::Pass;
        }
        r.note("regularized run: momentum and energy drifts recorded only");
    }
    Ok(r)
}

/// Worst-case algebraic bounds over the recorded regularized samples.
pub fn sample_bounds_report(samples: &[Sample]) -> AuditReport {
    let mut r = AuditReport::new();
    let b: Vec<_> = samples.iter().filter_map(|s| s.bounds).collect();
    if b.is_empty() {
        return r;
    }
    let worst = |f: &dyn Fn(&vfp_core::solver::BoundSummary) -> f64, max: bool| {
        b.iter()
            .map(f)
            .fold(if max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, v| {
                if max {
                    a.max(v)
                } else {
                    a.min(v)
                }
            })
    };
    let scale = worst(&|s| s.phi_min.abs(), true).max(1.0);
    let slack = 1.0 + ROUNDOFF;
    r.upper(
        "u_eps_times_eps",
        worst(&|s| s.u_eps_max * s.eps, true),
        slack,
        Status::Fail,
        "regularized velocity bound",
    );
    r.upper(
        "t_eps_delta_times_delta",
        worst(&|s| s.t_max * s.delta, true),
        slack,
        Status::Fail,
        "regularized temperature bound",
    );
    r.lower(
        "t_eps_delta_min",
        worst(&|s| s.t_min, false),
        0.0,
        Status::Fail,
        "regularized temperature bound",
    );
    r.lower(
        "phi_minus_thermal_min",
        worst(&|s| s.phi_excess_min, false),
        -ROUNDOFF * scale,
        Status::Fail,
        "phi lower bound",
    );
    r.lower(
        "thermal_moll_min",
        worst(&|s| s.thermal_min, false),
        -ROUNDOFF * scale,
        Status::Fail,
        "phi lower bound",
    );
    r
}

/// The audits that apply to a grid trajectory under `cfg`.
pub fn trajectory_audit(traj: &Trajectory, cfg: &RunConfig) -> Result<AuditReport> {
    let a = &cfg.audit;
    let reg = cfg.reg_params()?;
    let dim = traj.dim;
    let mut r = AuditReport::new();
    if a.conservation {
        let tol = ConservationTolerance {
            momentum: a.momentum_tol,
            energy: a.energy_tol,
            ..ConservationTolerance::default()
        };
        r.merge(conservation_audit(&traj.samples, dim, reg, tol)?);
    }
    if a.entropy {
        if reg.is_none() {
            let rate = a.rate_window.map(|[t0, t1]| RateWindow {
                t0,
                t1,
                rel_tol: a.rate_tol,
            });
            r.merge(h_theorem_check(&traj.samples, a.entropy_tol_step, rate)?);
        } else {
            r.note("entropy monotonicity holds for the raw coefficients only; not audited");
        }
    }
    if a.bounds && reg.is_some() {
        r.merge(sample_bounds_report(&traj.samples));
    }
    if a.lp {
        for kind in [LpKind::One, LpKind::Two, LpKind::Max] {
            r.merge(lp_growth_check(&traj.samples, dim, kind, a.lp_slack)?);
        }
    }
    if a.third_moment {
        r.merge(third_moment_check(&traj.samples)?);
    }
    if a.density_temperature {
        r.merge(density_temperature_check(&traj.final_state));
    }
    r.merge(moment_integrability_check(&traj.final_state));
    Ok(r)
}

fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let f0 = cfg.initial.field(&grid)?;
    let sc = cfg.solver_config()?;
    let traj = integrate(&sc, &f0, out)?;
    write_trajectory(&out.join("trajectory.csv"), traj.dim, &traj.samples)?;
    for (k, (t, s)) in traj.snapshots.iter().enumerate() {
        write_snapshot(&out.join(snapshot_name(k)), s, *t)?;
    }
    write_snapshot(&out.join("final.txt"), &traj.final_state, cfg.t_end)?;
    let mut r = trajectory_audit(&traj, cfg)?;
    r.metadata.push(("steps".into(), sc.n_steps().to_string()));
    r.metadata.push(("dt".into(), format!("{:e}", sc.effective_dt())));
    Ok(r)
}

fn cmd_picard(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let mut sc = cfg.solver_config()?;
    let reg = sc
        .reg
        .ok_or_else(|| Error::validation("reg", "the Picard iteration needs regularized coefficients"))?;
    let f0eps = regularize_initial(&cfg.initial.field(&grid)?, reg.eps())?;
    let outcome = match picard_solve(&f0eps, &sc) {
        Err(VfpError::PicardDivergence { iterations, residuals }) => {
            write_residuals(&out.join("picard_residuals.csv"), &residuals)?;
            return Err(VfpError::PicardDivergence { iterations, residuals }.into());
        }
        other => other?,
    };
    write_residuals(&out.join("picard_residuals.csv"), &outcome.residuals)?;
    write_snapshot(&out.join("final.txt"), &outcome.final_state, cfg.t_end)?;

    let mut r = AuditReport::new();
    let res = &outcome.residuals;
    r.push(
        "picard_converged",
        *res.last().unwrap_or(&0.0),
        sc.picard.tol,
        if outcome.converged { Status::Pass } else { Status::Flag },
        "Picard contraction",
    );
    let rises = res.windows(2).filter(|w| w[1] >= w[0]).count();
    r.upper(
        "picard_residual_increases",
        rises as f64,
        0.0,
        Status::Flag,
        "Picard contraction",
    );
    let ratios: Vec<f64> = res.windows(2).map(|w| w[1] / w[0]).collect();
    let ratio_rises = ratios.windows(2).filter(|w| w[1] > w[0]).count();
    r.upper(
        "picard_ratio_increases",
        ratio_rises as f64,
        0.0,
        Status::Flag,
        "Picard contraction",
    );
    r.record("picard_iterations", res.len() as f64, "Picard contraction");
    if cfg.picard.compare_direct {
        sc.keep_states = true;
        sc.record_every = usize::MAX;
        let direct = Integrator::new(sc.clone())?.run_from(f0eps)?;
        let dt = sc.effective_dt();
        let mut worst = 0.0f64;
        for (t, s) in outcome.times.iter().zip(&outcome.states) {
            let k = (t / dt).round() as usize;
            worst = worst.max(s.l1_distance(&direct.states[k])?);
        }
        r.upper(
            "picard_vs_direct_sup_l1",
            worst,
            cfg.picard.agreement_tol,
            Status::Flag,
            "Picard fixed point",
        );
    }
    Ok(r)
}

fn cmd_particles(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let sc = cfg.solver_config()?;
    if sc.reg.is_none() {
        return Err(Error::validation("reg", "particle runs need regularized coefficients"));
    }
    let f0 = cfg.initial.field(&grid)?;
    let pr = run_particles(&sc, &f0, cfg.particles.n_p, cfg.seed)?;
    write_trajectory(&out.join("trajectory.csv"), grid.dim(), &pr.samples)?;
    let rows: Vec<Vec<f64>> = pr.fourth_moment.iter().map(|&(t, m)| vec![t, m]).collect();
    write_table(&out.join("fourth_moment.csv"), &["time", "fourth_moment"], &rows)?;
    for (k, (t, ens)) in pr.snapshots.iter().enumerate() {
        write_snapshot(&out.join(snapshot_name(k)), &ens.histogram(&grid)?, *t)?;
    }
    let mut r = conservation_audit(&pr.samples, grid.dim(), sc.reg, ConservationTolerance::default())?;
    if cfg.audit.bounds {
        r.merge(sample_bounds_report(&pr.samples));
    }
    r.metadata.push(("n_p".into(), cfg.particles.n_p.to_string()));
    r.metadata.push(("seed".into(), cfg.seed.to_string()));
    Ok(r)
}

fn decreasing(values: &[f64]) -> usize {
    values.windows(2).filter(|w| !(w[1] < w[0])).count()
}

/// Successive distances must shrink in the L¹ norm of `(ρ, ρu, E)`; the
/// per-component counts are recorded.
fn continuation_checks(r: &mut AuditReport, stage: &str, rows: &[ContinuationRow]) {
    let d: Vec<_> = rows.iter().filter_map(|r| r.successive).collect();
    let total: Vec<f64> = d.iter().map(|m| m.rho + m.mom + m.energy).collect();
    r.upper(
        format!("{stage}_successive_increases"),
        decreasing(&total) as f64,
        0.0,
        Status::Flag,
        "regularization limit",
    );
    for (name, pick) in [
        ("rho", (|m: &vfp_core::solver::MomentDistance| m.rho) as fn(&_) -> f64),
        ("mom", |m| m.mom),
        ("energy", |m| m.energy),
    ] {
        let v: Vec<f64> = d.iter().map(pick).collect();
        r.record(
            format!("{stage}_successive_{name}_increases"),
            decreasing(&v) as f64,
            "regularization limit",
        );
    }
}

fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let f0 = cfg.initial.field(&grid)?;
    let mut sc = cfg.solver_config()?;
    sc.snapshot_times.clear();
    let s = &cfg.sweep;
    let eps_stage: Vec<RegParams> = s
        .eps
        .iter()
        .map(|&e| RegParams::new(e, s.delta_for_eps))
        .collect::<vfp_core::Result<_>>()?;
    let eps_d = s.eps_for_delta.unwrap_or(*s.eps.last().expect("validated non-empty"));
    let delta_stage: Vec<RegParams> = s
        .delta
        .iter()
        .map(|&d| RegParams::new(eps_d, d))
        .collect::<vfp_core::Result<_>>()?;
    let rows_eps = continuation_study(&sc, &eps_stage, &f0, None)?;
    let reference = if s.reference {
        let mut raw = sc.clone();
        raw.reg = None;
        raw.record_every = usize::MAX;
        Some(run(&raw, &regularize_initial(&f0, eps_d)?)?.final_state)
    } else {
        None
    };
    let rows_delta = continuation_study(&sc, &delta_stage, &f0, reference.as_ref())?;
    let all: Vec<ContinuationRow> = rows_eps.iter().chain(&rows_delta).copied().collect();
    write_continuation(&out.join("continuation.csv"), &all, false)?;
    let mut r = AuditReport::new();
    continuation_checks(&mut r, "eps", &rows_eps);
    continuation_checks(&mut r, "delta", &rows_delta);
    if reference.is_some() {
        write_continuation(&out.join("continuation_reference.csv"), &rows_delta, true)?;
        let combined: Vec<f64> = rows_delta
            .iter()
            .filter_map(|r| r.to_reference)
            .map(|d| d.rho + d.mom + d.energy)
            .collect();
        r.upper(
            "delta_reference_increases",
            decreasing(&combined) as f64,
            0.0,
            Status::Flag,
            "regularization limit",
        );
    }
    Ok(r)
}

/// Mollified grid moments, for comparison with mollified particle estimates.
fn mollified_moments(state: &DistField, kernel: &vfp_core::MollifierKernel) -> Result<MomentSet> {
    let mut m = compute_moments(state);
    m.rho = mollify(kernel, &m.rho)?;
    m.mom = mollify_vector(kernel, &m.mom)?;
    m.en2 = mollify(kernel, &m.en2)?;
    Ok(m)
}

/// `(grid, particle, σ_particle)` for ρ, each momentum component, en2.
fn moment_columns(m: &MomentSet, dim: usize) -> Vec<(String, Vec<f64>)> {
    let mut cols = vec![("rho".to_string(), m.rho.values().to_vec())];
    for k in 0..dim {
        cols.push((format!("mom_{}", k + 1), m.mom.values().iter().map(|p| p[k]).collect()));
    }
    cols.push(("en2".to_string(), m.en2.values().to_vec()));
    cols
}

fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let mut sc = cfg.solver_config()?;
    let reg = sc
        .reg
        .ok_or_else(|| Error::validation("reg", "particle comparison needs regularized coefficients"))?;
    let times = if cfg.compare.times.is_empty() {
        vec![cfg.t_end]
    } else {
        cfg.compare.times.clone()
    };
    sc.snapshot_times = times.clone();
    sc.record_every = usize::MAX;
    let f0 = cfg.initial.field(&grid)?;
    let grid_run = integrate(&sc, &f0, out)?;
    let fine = match (&cfg.initial, cfg.compare.refine) {
        (Initial::File { .. }, _) | (_, false) => None,
        (init, true) => {
            let g2 = PhaseGrid::new(grid.dim(), grid.nx(), 2 * grid.nv(), grid.vmax(), grid.period())?;
            let mut s2 = sc.clone();
            s2.grid = g2;
            s2.dt = sc.dt / 2.0;
            Some(integrate(&s2, &init.field(&g2)?, out)?)
        }
    };
    let pr = run_particles(&sc, &f0, cfg.particles.n_p, cfg.seed)?;
    let kernel = build_mollifier(&grid, reg.eps())?;
    let dim = grid.dim();
    let mut rows = Vec::new();
    let mut r = AuditReport::new();
    for (k, (t, ens)) in pr.snapshots.iter().enumerate() {
        let est = estimate_moments(ens, &grid, Some(&kernel))?;
        let g = mollified_moments(&grid_run.snapshots[k].1, &kernel)?;
        let refined = match &fine {
            Some(tr) => Some(mollified_moments(&tr.snapshots[k].1, &kernel)?),
            None => None,
        };
        let mut se = vec![("rho", est.se_rho.values().to_vec())];
        let se_mom: Vec<Vec<f64>> = (0..dim)
            .map(|c| est.se_mom.values().iter().map(|p| p[c]).collect())
            .collect();
        for s in &se_mom {
            se.push(("mom", s.clone()));
        }
        se.push(("en2", est.se_en2.values().to_vec()));
        let gc = moment_columns(&g, dim);
        let pc = moment_columns(&est.moments, dim);
        let fc = refined.as_ref().map(|m| moment_columns(m, dim));
        for (q, ((name, gv), (_, pv))) in gc.iter().zip(&pc).enumerate() {
            let mut zmax = 0.0f64;
            let mut l1 = 0.0;
            for i in 0..gv.len() {
                let grid_err = fc.as_ref().map_or(0.0, |f| (f[q].1[i] - gv[i]).abs());
                let sigma = (se[q].1[i].powi(2) + grid_err.powi(2)).sqrt();
                let z = if sigma > 0.0 { (pv[i] - gv[i]) / sigma } else { 0.0 };
                zmax = zmax.max(z.abs());
                l1 += (pv[i] - gv[i]).abs() * grid.space_cell_volume();
                rows.push(vec![*t, q as f64, i as f64, gv[i], pv[i], se[q].1[i], grid_err, z]);
            }
            println!("t = {t:<8} {name:<6} L1 distance {l1:.3e}   max |z| {zmax:.2}");
            r.upper(
                format!("max_z_{name}_t{t}"),
                zmax,
                cfg.compare.z_max,
                Status::Flag,
                "particle oracle",
            );
        }
    }
    write_table(
        &out.join("compare.csv"),
        &[
            "time",
            "quantity",
            "cell",
            "grid",
            "particle",
            "se_particle",
            "grid_error",
            "z",
        ],
        &rows,
    )?;
    Ok(r)
}

fn cmd_check(cfg: &RunConfig, out: &Path) -> Result<AuditReport> {
    let grid = cfg.grid()?;
    let f = cfg.initial.raw_field(&grid)?;
    let mut r = AuditReport::new();
    let nonfinite = f.values().iter().filter(|v| !v.is_finite()).count();
    r.upper(
        "non_finite_values",
        nonfinite as f64,
        0.0,
        Status::Fail,
        "valid distribution",
    );
    if nonfinite > 0 {
        return Ok(r);
    }
    let (at, min) = f
        .values()
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (k, &v)| if v < a.1 { (k, v) } else { a });
    r.lower("f_min", min, 0.0, Status::Fail, "positivity");
    if min < 0.0 {
        let nvel = grid.n_vel();
        r.note(format!(
            "most negative value at spatial cell {}, velocity cell {}",
            at / nvel,
            at % nvel
        ));
    }
    let m = compute_moments(&f);
    let cs = m
        .mom
        .values()
        .iter()
        .zip(m.rho.values().iter().zip(m.en2.values()))
        .map(|(p, (rho, en2))| {
            let p2 = p[0] * p[0] + p[1] * p[1];
            if rho * en2 > 0.0 {
                p2 / (rho * en2)
            } else if p2 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    r.upper(
        "cauchy_schwarz_ratio",
        cs,
        1.0 + ROUNDOFF,
        Status::Fail,
        "moment identities",
    );
    if min >= 0.0 {
        r.merge(density_temperature_check(&f));
        r.merge(moment_integrability_check(&f));
        if let Some(p) = cfg.reg_params()? {
            let k = build_mollifier(&grid, p.eps())?;
            r.merge(bounds_check(&f, &vfp_core::RegFields::from_field(&f, &k, p)?, false));
        }
    }
    write_snapshot(&out.join("checked.txt"), &f, 0.0)?;
    Ok(r)
}

fn load(path: &Path) -> Result<Option<Table>> {
    if path.exists() {
        Ok(Some(read_table(path)?))
    } else {
        Ok(None)
    }
}

fn write_svg(path: &Path, chart: &Chart) -> Result<()> {
    std::fs::write(path, chart.to_svg()).map_err(Error::io(path))
}

fn cmd_plot(out: &Path) -> Result<AuditReport> {
    let mut r = AuditReport::new();
    let mut made = 0;
    if let Some(t) = load(&out.join("trajectory.csv"))? {
        let time = t.column("time").unwrap_or_default();
        if let Some(h) = t.column("entropy") {
            let chart = Chart {
                title: "Entropy".into(),
                x_label: "t".into(),
                y_label: "H".into(),
                log_y: false,
                series: vec![Series::new("H", &time, &h)],
            };
            write_svg(&out.join("entropy.svg"), &chart)?;
            made += 1;
        }
        let mut series = Vec::new();
        for name in t
            .header
            .iter()
            .filter(|h| *h == "mass" || h.starts_with("mom_") || *h == "energy")
        {
            let v = t.column(name).unwrap_or_default();
            let Some(&v0) = v.first() else { continue };
            let drift: Vec<f64> = v
                .iter()
                .map(|x| if v0 != 0.0 { (x - v0) / v0.abs() } else { x - v0 })
                .collect();
            series.push(Series::new(name.clone(), &time, &drift));
        }
        if !series.is_empty() {
            let chart = Chart {
                title: "Moment drift".into(),
                x_label: "t".into(),
                y_label: "relative drift".into(),
                log_y: false,
                series,
            };
            write_svg(&out.join("moment_drift.svg"), &chart)?;
            made += 1;
        }
    }
    if let Some(t) = load(&out.join("picard_residuals.csv"))? {
        let chart = Chart {
            title: "Picard residuals".into(),
            x_label: "iteration".into(),
            y_label: "residual".into(),
            log_y: true,
            series: vec![Series::new(
                "r_n",
                &t.column("iteration").unwrap_or_default(),
                &t.column("residual").unwrap_or_default(),
            )],
        };
        write_svg(&out.join("picard_residuals.svg"), &chart)?;
        made += 1;
    }
    if let Some(t) = load(&out.join("continuation.csv"))? {
        let idx: Vec<f64> = (1..=t.rows.len()).map(|k| k as f64).collect();
        let series = ["dist_rho", "dist_mom", "dist_energy"]
            .iter()
            .map(|c| Series::new(*c, &idx, &t.column(c).unwrap_or_default()))
            .collect();
        let chart = Chart {
            title: "Continuation distances".into(),
            x_label: "row".into(),
            y_label: "L1 distance".into(),
            log_y: true,
            series,
        };
        write_svg(&out.join("continuation.svg"), &chart)?;
        made += 1;
    }
    if made == 0 {
        return Err(Error::NothingToPlot(out.to_path_buf()));
    }
    r.record("plots_written", made as f64, "output");
    Ok(r)
}
