use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use srot::geometry::{is_two_generating, lie_bracket, two_step_rank, validate_system_lagrangian, SampleBox};
use srot::hamiltonian::{energy_drift, ham_flow, pmp_check, ControlGrid, PhasePoint};
use srot::io::{format_float, parse_point, read_measure, write_frames_csv, write_plan_csv};
use srot::monge::{
    displacement_interpolation, grushin_interpolation_to_delta, kantorovich_field, pushforward_check, Grid,
    PotentialField,
};
use srot::ot::{
    c_concavify, closed_form_cost, cost_matrix, solve_kantorovich, support_slackness, CostBackend, DiscreteMeasure,
};
use srot::shooting::{connect, ShootingOptions};
use srot::{make_system, BuiltinSystem, ControlSystem, SystemKind};

use crate::svg::frames_svg;
use crate::{Command, ConfigError, Method, ShootArgs};

const MANIFEST_VERSION: u32 = 1;

pub fn output_dir(cmd: &Command) -> PathBuf {
    match cmd {
        Command::Distance(a) => a.output.out.clone(),
        Command::Flow(a) => a.output.out.clone(),
        Command::Transport(a) => a.output.out.clone(),
        Command::Interpolate(a) => a.output.out.clone(),
        Command::PmpCheck(a) => a.output.out.clone(),
        Command::Brackets(a) => a.output.out.clone(),
        Command::ValidateLagrangian(a) => a.output.out.clone(),
        Command::Run(a) => a.output.out.clone(),
    }
}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("--{name} must be positive, got {v}")))
    }
}

fn system(name: &str) -> Result<BuiltinSystem> {
    make_system(name).map_err(|e| bad(e.to_string()))
}

fn point(text: &str, sys: &dyn ControlSystem, flag: &str) -> Result<DVector<f64>> {
    let p = parse_point(text).map_err(|e| bad(format!("--{flag}: {e}")))?;
    if p.len() != sys.state_dim() {
        return Err(bad(format!(
            "--{flag} has {} coordinates but {} has dimension {}",
            p.len(),
            sys.name(),
            sys.state_dim()
        )));
    }
    Ok(p)
}

fn measure(path: &Path, sys: &dyn ControlSystem) -> Result<DiscreteMeasure> {
    let mu = read_measure(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if mu.dim() != sys.state_dim() {
        return Err(bad(format!(
            "{} holds points of dimension {} but {} has dimension {}",
            path.display(),
            mu.dim(),
            sys.name(),
            sys.state_dim()
        )));
    }
    Ok(mu)
}

fn shooting_options(s: &ShootArgs) -> Result<ShootingOptions> {
    positive("tol", s.tol)?;
    positive("step", s.step)?;
    if s.starts == 0 {
        return Err(bad("--starts must be at least 1"));
    }
    Ok(ShootingOptions {
        starts: s.starts,
        tol: s.tol,
        step: s.step,
        seed: s.seed,
        ..ShootingOptions::default()
    })
}

fn backend(method: Method, s: &ShootArgs) -> Result<CostBackend> {
    let opts = shooting_options(s)?;
    Ok(match method {
        Method::Auto => CostBackend::Auto(opts),
        Method::ClosedForm => CostBackend::ClosedForm,
        Method::Shooting => CostBackend::Shooting(opts),
    })
}

fn prepare(out: &Path, cmd: &Command) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = json!({
        "spec_version": MANIFEST_VERSION,
        "tool": "srot",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cmd,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn execute(cmd: Command) -> Result<()> {
    if let Command::Run(args) = &cmd {
        let text = std::fs::read_to_string(&args.config).map_err(|e| bad(format!("{}: {e}", args.config.display())))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", args.config.display())))?;
        if manifest.get("spec_version").and_then(|v| v.as_u64()) != Some(MANIFEST_VERSION as u64) {
            return Err(bad("manifest has an unsupported spec_version"));
        }
        let config = manifest
            .get("config")
            .cloned()
            .ok_or_else(|| bad("manifest has no config"))?;
        let mut inner: Command = serde_json::from_value(config).map_err(|e| bad(format!("bad config: {e}")))?;
        let out = args.output.clone();
        match &mut inner {
            Command::Distance(a) => a.output = out,
            Command::Flow(a) => a.output = out,
            Command::Transport(a) => a.output = out,
            Command::Interpolate(a) => a.output = out,
            Command::PmpCheck(a) => a.output = out,
            Command::Brackets(a) => a.output = out,
            Command::ValidateLagrangian(a) => a.output = out,
            Command::Run(_) => return Err(bad("a manifest cannot replay another replay")),
        }
        return execute(inner);
    }
    let out = output_dir(&cmd);
    prepare(&out, &cmd)?;
    match &cmd {
        Command::Distance(a) => distance(a, &out),
        Command::Flow(a) => flow(a, &out),
        Command::Transport(a) => transport(a, &out),
        Command::Interpolate(a) => interpolate(a, &out),
        Command::PmpCheck(a) => pmp(a, &out),
        Command::Brackets(a) => brackets(a, &out),
        Command::ValidateLagrangian(a) => lagrangian(a, &out),
        Command::Run(_) => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct Distance {
    d: f64,
    d2: f64,
}

fn squared_distance(
    method: Method,
    sys: &dyn ControlSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    s: &ShootArgs,
) -> Result<f64> {
    let opts = shooting_options(s)?;
    let closed = closed_form_cost(sys, x, y);
    Ok(match (method, closed) {
        (Method::Auto | Method::ClosedForm, Some(c)) => c,
        (Method::ClosedForm, None) => {
            return Err(bad(format!(
                "no closed form on {} for this pair; use --method shooting",
                sys.name()
            )))
        }
        _ => connect(sys, x, y, &opts)?.cost,
    })
}

fn lattice(spec: &str, dim: usize) -> Result<Vec<DVector<f64>>> {
    let axes = spec
        .split(',')
        .map(|axis| {
            let parts: Vec<&str> = axis.split(':').collect();
            let parsed = match parts.as_slice() {
                [lo, hi, n] => lo
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .zip(hi.trim().parse::<f64>().ok())
                    .zip(n.trim().parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some(((lo, hi), n)) if n >= 1 && lo.is_finite() && hi.is_finite() => Ok((lo, hi, n)),
                _ => Err(bad(format!("bad table axis {axis:?}; expected lo:hi:n"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if axes.len() != dim {
        return Err(bad(format!("--table has {} axes, expected {dim}", axes.len())));
    }
    let total: usize = axes.iter().map(|a| a.2).product();
    Ok((0..total)
        .map(|mut k| {
            DVector::from_iterator(
                dim,
                axes.iter().map(|&(lo, hi, n)| {
                    let i = k % n;
                    k /= n;
                    if n == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                }),
            )
        })
        .collect())
}

fn distance(a: &crate::DistanceArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    let x = point(&a.from, &sys, "from")?;
    match (&a.to, &a.table) {
        (Some(to), None) => {
            let y = point(to, &sys, "to")?;
            let d2 = squared_distance(a.method, &sys, &x, &y, &a.shoot)?;
            let result = Distance { d: d2.sqrt(), d2 };
            write_json(&out.join("distance.json"), &result)?;
            println!("{}", serde_json::to_string(&result)?);
            Ok(())
        }
        (None, Some(spec)) => {
            let targets = lattice(spec, sys.state_dim())?;
            let source = DiscreteMeasure::dirac(x.clone())?;
            let nu = DiscreteMeasure::uniform(targets.clone())?;
            let c = cost_matrix(&backend(a.method, &a.shoot)?, &sys, &source, &nu)?;
            let path = out.join("distance_table.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            let header: Vec<String> = (1..=sys.state_dim()).map(|k| format!("x{k}")).collect();
            writeln!(w, "{},d,d2", header.join(","))?;
            for (j, y) in targets.iter().enumerate() {
                let coords: Vec<String> = y.iter().map(|v| format_float(*v)).collect();
                let d2 = c[(0, j)];
                writeln!(
                    w,
                    "{},{},{}",
                    coords.join(","),
                    format_float(d2.sqrt()),
                    format_float(d2)
                )?;
            }
            w.flush()?;
            println!("{}", json!({ "rows": targets.len(), "table": path }));
            Ok(())
        }
        _ => Err(bad("give exactly one of --to or --table")),
    }
}

fn flow(a: &crate::FlowArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    positive("t", a.t)?;
    positive("step", a.step)?;
    let x = point(&a.x, &sys, "x")?;
    let p = point(&a.p, &sys, "p")?;
    let traj = ham_flow(&sys, &PhasePoint::new(x, p), a.t, a.step)?;

    let n = sys.state_dim();
    let k = sys.control_dim();
    let mut w = BufWriter::new(File::create(out.join("trajectory.csv"))?);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=n).map(|i| format!("p{i}")))
        .chain((1..=k).map(|i| format!("u{i}")))
        .chain(std::iter::once("H".to_string()))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for m in 0..traj.len() {
        let row: Vec<String> = std::iter::once(traj.times[m])
            .chain(traj.states[m].iter().cloned())
            .chain(traj.covectors[m].iter().cloned())
            .chain(traj.controls[m].iter().cloned())
            .chain(std::iter::once(traj.energy[m]))
            .map(format_float)
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;

    let end = traj.endpoint();
    let summary = json!({
        "samples": traj.len(),
        "endpoint": end.x.as_slice(),
        "covector": end.p.as_slice(),
        "energy": traj.energy[0],
        "energy_drift": energy_drift(&traj),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn transport(a: &crate::TransportArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    let mu = measure(&a.mu, &sys)?;
    let nu = measure(&a.nu, &sys)?;
    let c = cost_matrix(&backend(a.method, &a.shoot)?, &sys, &mu, &nu)?;
    let (plan, duals) = solve_kantorovich(&c, &mu, &nu)?;
    let dual_value = duals.value(mu.weights(), nu.weights());
    let violations = support_slackness(&plan, &duals, &c, 1e-9);
    let concave = c_concavify(&duals, &c);

    write_plan_csv(&out.join("plan.csv"), &plan)?;
    write_json(
        &out.join("duals.json"),
        &json!({ "f": duals.f, "g": duals.g, "c_concave": concave }),
    )?;
    let summary = json!({
        "value": plan.value,
        "dual_value": dual_value,
        "duality_gap": plan.value - dual_value,
        "marginal_error": plan.marginal_error(mu.weights(), nu.weights()),
        "max_dual_violation": duals.max_violation(&c).max(0.0),
        "slackness_violations": violations,
        "plan_entries": plan.triplets().len(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn parse_times(text: &str) -> Result<Vec<f64>> {
    let times = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("--times: {e}")))?;
    if times.is_empty() || times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(bad("--times must be a nonempty list of values in [0, 1]"));
    }
    Ok(times)
}

/// Ten points on the circle of radius 0.8, at 9 degrees plus multiples of 36.
fn default_source() -> Result<DiscreteMeasure> {
    let points = (0..10)
        .map(|k| {
            let angle = (9.0 + 36.0 * k as f64).to_radians();
            DVector::from_vec(vec![0.8 * angle.cos(), 0.8 * angle.sin()])
        })
        .collect();
    Ok(DiscreteMeasure::uniform(points)?)
}

fn interpolate(a: &crate::InterpolateArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    positive("grid-h", a.grid_h)?;
    if a.grid_margin.is_nan() || a.grid_margin < 0.0 {
        return Err(bad("--grid-margin must be nonnegative"));
    }
    let opts = shooting_options(&a.shoot)?;
    let times = parse_times(&a.times)?;
    let mu = match &a.mu {
        Some(path) => measure(path, &sys)?,
        None if sys.state_dim() == 2 => default_source()?,
        None => return Err(bad("--mu is required for systems that are not planar")),
    };
    let grid = match &a.grid_box {
        Some(text) => {
            let v = parse_point(text).map_err(|e| bad(format!("--grid-box: {e}")))?;
            let n = sys.state_dim();
            if v.len() != 2 * n {
                return Err(bad(format!("--grid-box needs {} numbers", 2 * n)));
            }
            Grid::new(
                v.rows(0, n).iter().cloned().collect(),
                v.rows(n, n).iter().cloned().collect(),
                a.grid_h,
            )
            .map_err(|e| bad(e.to_string()))?
        }
        None => Grid::around(mu.points(), a.grid_margin, a.grid_h)?,
    };
    if let Some(x) = mu.points().iter().find(|x| !grid.contains(x)) {
        return Err(bad(format!(
            "source point {:?} lies outside the potential grid",
            x.as_slice()
        )));
    }
    let method = backend(a.method, &a.shoot)?;

    let (field, target) = match (&a.delta_target, &a.nu) {
        (Some(text), None) => {
            let target = point(text, &sys, "delta-target")?;
            let field = PotentialField::from_c_transform(grid, &sys, &method, std::slice::from_ref(&target), &[0.0])?;
            (field, Some(target))
        }
        (None, Some(path)) => {
            let nu = measure(path, &sys)?;
            let (_, _, field) = kantorovich_field(&sys, &method, &mu, &nu, grid)?;
            (field, None)
        }
        _ => return Err(bad("give exactly one of --delta-target or --nu")),
    };

    let frames = displacement_interpolation(&sys, &field, &mu, &times, opts.step)?;
    write_frames_csv(&out.join("frames.csv"), &frames)?;
    std::fs::write(out.join("frames.svg"), frames_svg(&frames, target.as_ref()))?;

    let mut summary = json!({
        "points": mu.len(),
        "times": times,
        "grid_spacing": field.grid().spacing(),
    });
    if let Some(target) = &target {
        if let Some(m) = times.iter().position(|t| *t == 1.0) {
            let err = frames.clouds[m].iter().map(|p| (p - target).amax()).fold(0.0, f64::max);
            summary["endpoint_error"] = json!(err);
        }
        let on_axis = matches!(sys.kind(), SystemKind::Grushin) && target[0] == 0.0;
        if on_axis {
            let mut gap: f64 = 0.0;
            for (t, cloud) in times.iter().zip(&frames.clouds) {
                for p in cloud.iter().zip(mu.points()) {
                    let exact = grushin_interpolation_to_delta(p.1[0], p.1[1], target[1], *t);
                    gap = gap.max((p.0[0] - exact[0]).abs()).max((p.0[1] - exact[1]).abs());
                }
            }
            summary["closed_form_gap"] = json!(gap);
        }
    } else if let Some(path) = &a.nu {
        let nu = measure(path, &sys)?;
        summary["pushforward_residual"] = json!(pushforward_check(&sys, &field, &mu, &nu, 1.0, opts.step)?);
    }
    write_json(&out.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn pmp(a: &crate::PmpArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    positive("t", a.t)?;
    positive("grid-radius", a.grid_radius)?;
    positive("check-tol", a.check_tol)?;
    if a.grid_points < 2 {
        return Err(bad("--grid-points must be at least 2"));
    }
    let opts = shooting_options(&a.shoot)?;
    let x = point(&a.x, &sys, "x")?;
    let p = match (&a.p, &a.to) {
        (Some(p), None) => point(p, &sys, "p")?,
        (None, Some(to)) => {
            let y = point(to, &sys, "to")?;
            connect(&sys, &x, &y, &opts)?.p0
        }
        _ => return Err(bad("give exactly one of --p or --to")),
    };
    let traj = ham_flow(&sys, &PhasePoint::new(x, p.clone()), a.t, opts.step)?;
    let grid = ControlGrid::uniform(sys.control_dim(), a.grid_radius, a.grid_points)?;
    let report = pmp_check(&sys, &traj, &grid)?;
    let summary = json!({
        "p0": p.as_slice(),
        "report": report,
        "passes": report.passes(a.check_tol),
    });
    write_json(&out.join("pmp.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn brackets(a: &crate::BracketArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    positive("rank-tol", a.rank_tol)?;
    let x = point(&a.x, &sys, "x")?;
    let k = sys.control_dim();
    let mut list = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            list.push(json!({ "i": i, "j": j, "bracket": lie_bracket(&sys, i, j, &x)?.as_slice() }));
        }
    }
    let fields: Vec<Vec<f64>> = sys.fields(&x).iter().map(|f| f.as_slice().to_vec()).collect();
    let summary = json!({
        "fields": fields,
        "brackets": list,
        "rank": two_step_rank(&sys, &x, a.rank_tol)?,
        "state_dim": sys.state_dim(),
        "two_generating": is_two_generating(&sys, &x, a.rank_tol),
    });
    write_json(&out.join("brackets.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

fn lagrangian(a: &crate::LagrangianArgs, out: &Path) -> Result<()> {
    let sys = system(&a.system)?;
    positive("half-width", a.half_width)?;
    let report = validate_system_lagrangian(&sys, &SampleBox::cube(sys.state_dim(), a.half_width))?;
    let summary = json!({ "report": report, "all_passed": report.all_passed() });
    write_json(&out.join("lagrangian.json"), &summary)?;
    println!("{summary}");
    Ok(())
}
