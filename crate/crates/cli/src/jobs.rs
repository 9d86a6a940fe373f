//! Execution of validated jobs.

use std::path::PathBuf;

use anyhow::Result;
use serde_json::{json, Value};

use selfsim::canonicalize::{canonicalize, classify, verify_homomorphism, DEFAULT_QUAD_TOL};
use selfsim::fragmentation::{
    compare_routes, direct_samples, levy_samples, simulate_direct, simulate_via_levy, total_dissipation_samples,
    DislocationMeasure, EquivalenceOptions, FragPath,
};
use selfsim::invariance::{check_good, check_group, grid_points, InvarianceComponents, DEFAULT_GRID_SIZE};
use selfsim::lamperti::{build_trajectory, lifetime_law_sample, sample_at, SelfSimilarProcessSpec};
use selfsim::levy::{simulate, LevyModel};
use selfsim::rng::derive_seed;
use selfsim::stats::{summarize, Estimate};
use selfsim::tgroup::{estimate_alpha_m, levy_on_t, RecenteredW};

use crate::config::{ComponentSelection, FragMode, Job, LampertiMode, Task};
use crate::output::{lifetime_json, write_json, write_path, write_table};

pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_MC_PATHS: usize = 10_000;
pub const HOMOMORPHISM_TOL: f64 = 1e-5;
pub const PATH_INDEPENDENCE_TOL: f64 = 1e-6;
pub const ALPHA_CONSISTENCY_TOL: f64 = 1e-6;

pub struct Outcome {
    pub pass: bool,
    pub report: Value,
    pub files: Vec<PathBuf>,
}

fn float(x: f64) -> String {
    x.to_string()
}

fn file_name(path: &std::path::Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs the job, writes its artifacts and the `*.report.json`.
pub fn execute(job: &Job) -> Result<Outcome> {
    let mut files = Vec::new();
    let (pass, body) = match &job.task {
        Task::Simulate { model } => run_simulate(job, model, &mut files)?,
        Task::Lamperti { spec, mode, t } => run_lamperti(job, spec, *mode, *t, &mut files)?,
        Task::Canonicalize { selection, components } => run_canonicalize(job, selection, components, &mut files)?,
        Task::Verify { selection, components } => run_verify(job, selection, components)?,
        Task::Tgroup { model, big } => run_tgroup(job, model, *big, &mut files)?,
        Task::Frag {
            nu,
            alpha,
            mode,
            x0,
            t_probe,
        } => run_frag(job, nu, *alpha, *mode, *x0, *t_probe, &mut files)?,
    };
    let report = json!({
        "subcommand": job.task.name().as_str(),
        "seed": job.seed,
        "pass": pass,
        "files": files.iter().map(|f| file_name(f)).collect::<Vec<_>>(),
        "result": body,
    });
    let report_path = job.output.file(".report.json");
    write_json(&report_path, &report)?;
    files.push(report_path);
    Ok(Outcome { pass, report, files })
}

fn run_simulate(job: &Job, model: &LevyModel, files: &mut Vec<PathBuf>) -> Result<(bool, Value)> {
    let horizon = job.horizon.unwrap_or(DEFAULT_HORIZON);
    let path = simulate(model, horizon, job.seed)?;
    let csv = job.output.file(".csv");
    write_path(&csv, &path)?;
    files.push(csv);
    let mut body = json!({
        "horizon": horizon,
        "path": {
            "breakpoints": path.breakpoints().len(),
            "jumps": path.jump_count(),
            "kill_time": path.kill_time(),
            "end_value": (0..model.dim).map(|i| path.end_value()[i]).collect::<Vec<_>>(),
        },
    });
    let n = job.n_paths.unwrap_or(1);
    if n > 1 {
        let mut ends: Vec<Vec<f64>> = vec![Vec::new(); model.dim];
        let mut killed = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let p = simulate(model, horizon, derive_seed(job.seed, 0, i))?;
            killed.push(f64::from(u8::from(p.is_killed())));
            if !p.is_killed() {
                for (k, column) in ends.iter_mut().enumerate() {
                    column.push(p.end_value()[k]);
                }
            }
        }
        let endpoints = ends
            .iter()
            .map(|c| summarize(c).map(|s| json!(s)).unwrap_or(Value::Null))
            .collect::<Vec<_>>();
        body["monte_carlo"] = json!({
            "n_paths": n,
            "killed_fraction": Estimate::of(&killed)?,
            "endpoint": endpoints,
        });
    }
    Ok((true, body))
}

fn run_lamperti(
    job: &Job,
    spec: &SelfSimilarProcessSpec,
    mode: LampertiMode,
    t: Option<f64>,
    files: &mut Vec<PathBuf>,
) -> Result<(bool, Value)> {
    let horizon = job.horizon.unwrap_or(DEFAULT_HORIZON);
    let dim = spec.psi.dim();
    let csv = job.output.file(".csv");
    let body = match mode {
        LampertiMode::Trajectory => {
            let traj = build_trajectory(spec, horizon, job.seed)?;
            write_path(&csv, &traj.path)?;
            let value = traj.value_at(t.unwrap_or(horizon))?.alive();
            json!({
                "mode": "trajectory",
                "horizon": horizon,
                "lifetime": lifetime_json(&traj.lifetime),
                "truncated": traj.truncated,
                "breakpoints": traj.path.breakpoints().len(),
                "value": value.map(|v| (0..dim).map(|i| v[i]).collect::<Vec<_>>()),
            })
        }
        LampertiMode::Sample => {
            let at = t.unwrap_or(horizon);
            let n = job.n_paths.unwrap_or(DEFAULT_SAMPLES);
            let values = sample_at(spec, at, n, job.seed)?;
            let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
            header.push("alive".into());
            let rows = values.iter().map(|v| {
                let mut row: Vec<String> = match v.alive() {
                    Some(p) => (0..dim).map(|i| float(p[i])).collect(),
                    None => vec![String::new(); dim],
                };
                row.push(u8::from(!v.is_cemetery()).to_string());
                row
            });
            write_table(&csv, &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
            let alive: Vec<f64> = values.iter().map(|v| f64::from(u8::from(!v.is_cemetery()))).collect();
            let coordinates = (0..dim)
                .map(|i| {
                    let column: Vec<f64> = values.iter().filter_map(|v| v.alive()).map(|p| p[i]).collect();
                    summarize(&column).map(|s| json!(s)).unwrap_or(Value::Null)
                })
                .collect::<Vec<_>>();
            json!({
                "mode": "sample",
                "t": at,
                "n_paths": n,
                "alive_fraction": Estimate::of(&alive)?,
                "coordinates": coordinates,
            })
        }
        LampertiMode::Lifetime => {
            let n = job.n_paths.unwrap_or(DEFAULT_SAMPLES);
            let out = lifetime_law_sample(spec, n, job.seed)?;
            write_table(&csv, &["lifetime"], out.samples.iter().map(|&x| vec![float(x)]))?;
            json!({
                "mode": "lifetime",
                "n_paths": n,
                "excluded": out.excluded,
                "summary": summarize(&out.samples).map(|s| json!(s)).unwrap_or(Value::Null),
            })
        }
    };
    files.push(csv);
    Ok((true, body))
}

fn grid_size(selection: &ComponentSelection, components: &InvarianceComponents) -> usize {
    selection
        .grid_size
        .unwrap_or(if components.dim == 1 { 32 } else { 12 })
}

fn run_canonicalize(
    job: &Job,
    selection: &ComponentSelection,
    components: &InvarianceComponents,
    files: &mut Vec<PathBuf>,
) -> Result<(bool, Value)> {
    let tol = &job.tolerances;
    let g = canonicalize(components, tol.quad.unwrap_or(DEFAULT_QUAD_TOL))?;
    let grid = grid_size(selection, components);
    let classification = if components.dim == 2 {
        Some(classify(components, None)?)
    } else {
        None
    };
    let homomorphism = verify_homomorphism(&g, grid)?;
    let alpha_consistency = g.alpha_consistency(grid)?;
    let path_independence = if components.dim == 2 {
        Some(g.path_independence(grid.min(8))?)
    } else {
        None
    };
    let limits = (
        tol.homomorphism.unwrap_or(HOMOMORPHISM_TOL),
        tol.path_independence.unwrap_or(PATH_INDEPENDENCE_TOL),
        tol.alpha_consistency.unwrap_or(ALPHA_CONSISTENCY_TOL),
    );
    let checks = json!({
        "homomorphism": homomorphism.max_residual < limits.0,
        "path_independence": path_independence.map_or(true, |d| d < limits.1),
        "alpha_consistency": alpha_consistency < limits.2,
    });
    let pass = checks.as_object().expect("object").values().all(|v| v == &Value::Bool(true));

    let (points, _) = grid_points(&components.domain, 64);
    let dim = components.dim;
    let header: Vec<String> = (0..dim)
        .map(|i| format!("y{i}"))
        .chain((0..dim).map(|i| format!("g{i}")))
        .collect();
    let mut rows = Vec::with_capacity(points.len());
    for y in &points {
        let z = g.forward(y)?;
        rows.push((0..dim).map(|i| float(y[i])).chain((0..dim).map(|i| float(z[i]))).collect());
    }
    let csv = job.output.file(".csv");
    write_table(&csv, &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
    files.push(csv);

    let body = json!({
        "component": components.name,
        "canonical": g.summary(),
        "classification": classification,
        "residuals": {
            "homomorphism": homomorphism,
            "alpha_consistency": alpha_consistency,
            "path_independence": path_independence,
        },
        "tolerances": {
            "homomorphism": limits.0,
            "path_independence": limits.1,
            "alpha_consistency": limits.2,
        },
        "checks": checks,
    });
    Ok((pass, body))
}

fn run_verify(job: &Job, selection: &ComponentSelection, components: &InvarianceComponents) -> Result<(bool, Value)> {
    let grid = selection.grid_size.unwrap_or(DEFAULT_GRID_SIZE);
    let good = check_good(components, grid, job.tolerances.check)?;
    let group = check_group(components, grid, job.tolerances.check)?;
    let pass = good.pass && group.pass;
    Ok((
        pass,
        json!({
            "component": components.name,
            "grid_size": grid,
            "good": good,
            "group": group,
        }),
    ))
}

fn run_tgroup(job: &Job, model: &LevyModel, big: f64, files: &mut Vec<PathBuf>) -> Result<(bool, Value)> {
    let horizon = job.horizon.unwrap_or(DEFAULT_HORIZON);
    let n = job.n_paths.unwrap_or(DEFAULT_MC_PATHS);
    let estimate = estimate_alpha_m(model, big, n, job.seed)?;

    let y = levy_on_t(&simulate(model, horizon, job.seed)?)?;
    let w = RecenteredW::new(&y, big, estimate.alpha_m)?;
    let csv = job.output.file(".csv");
    write_path(&csv, y.path())?;
    files.push(csv);
    let w_csv = job.output.file(".w.csv");
    write_path(&w_csv, &w.path()?)?;
    files.push(w_csv);

    let mut at_horizon = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let path = levy_on_t(&simulate(model, horizon, derive_seed(job.seed, 1, i))?)?;
        at_horizon.push(RecenteredW::new(&path, big, estimate.alpha_m)?.at(horizon)?);
    }
    let w_mean = Estimate::of(&at_horizon)?;
    let pass = w_mean.within(0.0, 3.0);
    Ok((
        pass,
        json!({
            "big": big,
            "horizon": horizon,
            "alpha_m": estimate,
            "w_mean_at_horizon": w_mean,
            "big_jumps_in_path": y.t_jumps().iter().filter(|(_, j)| j.sup_norm() > big).count(),
        }),
    ))
}

fn frag_rows(path: &FragPath) -> Vec<Vec<String>> {
    path.times()
        .iter()
        .zip(path.right_states())
        .map(|(t, s)| vec![float(*t), float(s.mass), float(s.dissipated), u8::from(s.alive).to_string()])
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_frag(
    job: &Job,
    nu: &DislocationMeasure,
    alpha: f64,
    mode: FragMode,
    x0: f64,
    t_probe: f64,
    files: &mut Vec<PathBuf>,
) -> Result<(bool, Value)> {
    let csv = job.output.file(".csv");
    let level = job.tolerances.level;
    let (pass, body) = match mode {
        FragMode::Direct | FragMode::Levy => {
            let horizon = job.horizon.unwrap_or(DEFAULT_HORIZON);
            let path = if mode == FragMode::Direct {
                simulate_direct(nu, alpha, x0, horizon, job.seed)?
            } else {
                simulate_via_levy(nu, alpha, x0, horizon, job.seed)?
            };
            write_table(&csv, &["t", "mass", "dissipated", "alive"], frag_rows(&path))?;
            let mut body = json!({
                "mode": if mode == FragMode::Direct { "direct" } else { "levy" },
                "alpha": alpha,
                "x0": x0,
                "horizon": horizon,
                "events": path.event_count(),
                "death_time": path.death_time(),
                "capped": path.capped(),
            });
            if let Some(n) = job.n_paths.filter(|&n| n > 1) {
                let opts = EquivalenceOptions::new(x0, horizon, n);
                let s = if mode == FragMode::Direct {
                    direct_samples(nu, alpha, &opts, job.seed)?
                } else {
                    levy_samples(nu, alpha, &opts, job.seed)?
                };
                let dead: Vec<f64> = s.death.iter().map(|d| f64::from(u8::from(d.is_finite()))).collect();
                body["monte_carlo"] = json!({
                    "n_paths": n,
                    "mean_mass": Estimate::of(&s.mass)?,
                    "mean_dissipated": Estimate::of(&s.dissipated)?,
                    "dead_fraction": Estimate::of(&dead)?,
                    "capped": s.capped,
                });
            }
            (true, body)
        }
        FragMode::Equivalence => {
            let n = job.n_paths.unwrap_or(DEFAULT_MC_PATHS);
            let mut opts = EquivalenceOptions::new(x0, t_probe, n);
            if let Some(level) = level {
                opts.level = level;
            }
            let report = compare_routes(nu, alpha, alpha, &opts, job.seed)?;
            let direct = direct_samples(nu, alpha, &opts, job.seed)?;
            let levy = levy_samples(nu, alpha, &opts, job.seed)?;
            let rows = [("direct", &direct), ("levy", &levy)].into_iter().flat_map(|(route, s)| {
                (0..s.mass.len()).map(move |i| {
                    vec![route.to_string(), float(s.mass[i]), float(s.dissipated[i]), float(s.death[i])]
                })
            });
            write_table(&csv, &["route", "mass", "dissipated", "death"], rows)?;
            let pass = report.pass;
            (
                pass,
                json!({
                    "mode": "equivalence",
                    "report": report,
                    "pass_flags": {
                        "mass": report.ks_mass.pass,
                        "dissipated": report.ks_dissipated.pass,
                        "death": report.ks_death.pass,
                    },
                }),
            )
        }
        FragMode::Dissipation => {
            let n = job.n_paths.unwrap_or(DEFAULT_MC_PATHS);
            let out = total_dissipation_samples(nu, alpha, x0, n, job.seed)?;
            write_table(&csv, &["dissipated"], out.samples.iter().map(|&x| vec![float(x)]))?;
            (
                true,
                json!({
                    "mode": "dissipation",
                    "x0": x0,
                    "n_paths": n,
                    "capped": out.capped,
                    "mean": Estimate::of(&out.samples)?,
                    "summary": summarize(&out.samples)?,
                }),
            )
        }
    };
    files.push(csv);
    Ok((pass, body))
}
