//! One function per subcommand. Each fills `Artifacts` and returns a failure
//! message when the run completed but some results are unusable.

use std::f64::consts::FRAC_PI_4;

use dirac_bohm::dirac_exact::{evolve_grid, ExactEvolution};
use dirac_bohm::packets::{
    bohmian_observables, expected_energy, expected_momentum, norm_squared, BohmianObservables,
};
use dirac_bohm::spa::{error_scaling, SpaParams};
use dirac_bohm::trajectories::{
    barrier_check, barrier_curves, bloch_clusters, find_bifurcation, integrate_trajectory, make_field,
    run_ensemble, run_ensemble_from, BarrierReport, Classification, ClusterReport, Ensemble, EnsembleConfig,
    EnsembleSummary, Trajectory, TrajectoryConfig,
};
use dirac_bohm::CayleyKlein;
use serde::Serialize;

use crate::config::{Command, EnsembleSpec, RunConfig};
use crate::output::{json_bytes, num, schema, Artifacts, Csv};
use crate::CliError;

pub type Outcome = Result<Option<String>, CliError>;

pub fn run(cmd: Command, cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    match cmd {
        Command::Field => field(cfg, art),
        Command::SpaCompare => spa_compare(cfg, art),
        Command::Trajectories => trajectories(cfg, art),
        Command::Bloch => bloch(cfg, art),
        Command::Observables => observables(cfg, art),
        Command::Barriers => barriers(cfg, art),
    }
}

fn status_text(e: &dirac_bohm::Error) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

pub fn field(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let ts = cfg.field.t.points();
    let ss = cfg.field.s.points();
    let points: Vec<(f64, f64)> = ts.iter().flat_map(|&t| ss.iter().map(move |&s| (t, s))).collect();
    let samples = art.time("evaluate", || evolve_grid(&points, &cfg.packet, &cfg.quad))?;

    let mut csv = Csv::new(
        "field",
        &[
            "t", "s", "re_minus", "im_minus", "re_plus", "im_plus", "rho", "j", "v", "err_est", "status",
        ],
    );
    let mut failed = 0;
    let mut rho = Vec::with_capacity(points.len());
    for (&(t, s), r) in points.iter().zip(&samples) {
        match r {
            Ok(f) => {
                let p = f.psi;
                let d = p.density();
                rho.push(d);
                csv.row([
                    num(t),
                    num(s),
                    num(p.minus.re),
                    num(p.minus.im),
                    num(p.plus.re),
                    num(p.plus.im),
                    num(d),
                    num(p.current()),
                    num(p.velocity().unwrap_or(f64::NAN)),
                    num(f.err_est),
                    "ok".to_string(),
                ]);
            }
            Err(e) => {
                failed += 1;
                rho.push(f64::NAN);
                let mut row = vec![num(t), num(s)];
                row.extend(std::iter::repeat_n(num(f64::NAN), 8));
                row.push(status_text(e));
                csv.row(row);
            }
        }
    }
    art.add("field.csv", csv.into_bytes());

    let mut norms = Csv::new("field-norms", &["t", "norm"]);
    for (i, &t) in ts.iter().enumerate() {
        let slice = &rho[i * ss.len()..(i + 1) * ss.len()];
        norms.row([num(t), num(trapezoid(&ss, slice))]);
    }
    art.add("field_norms.csv", norms.into_bytes());

    Ok((failed > 0).then(|| format!("{failed} of {} grid points failed", points.len())))
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

#[derive(Serialize)]
struct SpaCompareReport {
    schema: String,
    p0: f64,
    sigma: f64,
    vartheta: f64,
    azimuth: f64,
    t: f64,
    omegas: Vec<f64>,
    sup_err: Vec<f64>,
    slope: Option<f64>,
    intercept: Option<f64>,
    underdetermined: bool,
    /// Errors non-increasing along the ladder, allowing 10% growth per step.
    monotone: bool,
}

pub fn spa_compare(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let c = &cfg.spa_compare;
    let params = SpaParams {
        p0: c.p0,
        sigma: c.sigma,
        omega: c.omegas[0],
        vartheta: c.vartheta,
        azimuth: c.azimuth,
    };
    let s = c.s.points();
    let scaling = art.time("compare", || {
        error_scaling(&params, c.t, &c.omegas, &s, &cfg.quad)
    })?;

    let mut csv = Csv::new("spa-compare", &["omega", "sup_err"]);
    for (w, e) in scaling.omegas.iter().zip(&scaling.per_omega_sup_err) {
        csv.row([num(*w), num(*e)]);
    }
    art.add("spa_compare.csv", csv.into_bytes());

    let monotone = scaling.per_omega_sup_err.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let report = SpaCompareReport {
        schema: schema("spa-compare"),
        p0: c.p0,
        sigma: c.sigma,
        vartheta: c.vartheta,
        azimuth: c.azimuth,
        t: c.t,
        omegas: scaling.omegas,
        sup_err: scaling.per_omega_sup_err,
        slope: scaling.slope,
        intercept: scaling.intercept,
        underdetermined: scaling.underdetermined,
        monotone,
    };
    art.add("spa_compare.json", json_bytes(&report));
    Ok(None)
}

fn ensemble_config(
    cfg: &RunConfig,
    n: usize,
    t_final: f64,
    mode: dirac_bohm::trajectories::FieldMode,
) -> EnsembleConfig {
    EnsembleConfig {
        n,
        t_final,
        seed: cfg.seed,
        mode,
        trajectory: TrajectoryConfig {
            record_ck: true,
            ..cfg.trajectory
        },
        quad: cfg.quad,
    }
}

fn terminal_ck(tr: &Trajectory) -> Option<CayleyKlein> {
    tr.ck_series.as_ref().and_then(|c| c.last().copied())
}

fn trajectory_csv(tr: &Trajectory) -> Vec<u8> {
    let mut csv = Csv::new("trajectory", &["t", "q", "v", "R", "Theta", "Omega", "Phi"]);
    for (i, ((&t, &q), &v)) in tr.times.iter().zip(&tr.positions).zip(&tr.velocities).enumerate() {
        let ck = tr.ck_series.as_ref().and_then(|c| c.get(i));
        let a = |f: fn(&CayleyKlein) -> f64| num(ck.map(f).unwrap_or(f64::NAN));
        csv.row([
            num(t),
            num(q),
            num(v),
            a(|c| c.r),
            a(|c| c.theta),
            a(|c| c.omega),
            a(|c| c.phi),
        ]);
    }
    csv.into_bytes()
}

#[derive(Serialize)]
struct MemberReport {
    index: usize,
    q0: f64,
    classification: Option<Classification>,
    asymptotic_velocity: Option<f64>,
    p_final: Option<f64>,
    e_final: Option<f64>,
    node_events: usize,
    error: Option<String>,
}

#[derive(Serialize, Default)]
struct GroupStats {
    count: usize,
    p_mean: Option<f64>,
    p_std: Option<f64>,
    e_mean: Option<f64>,
    e_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (Some(m), Some(v.sqrt()))
}

fn group_stats(members: &[MemberReport], which: Classification) -> GroupStats {
    let sel: Vec<&MemberReport> = members
        .iter()
        .filter(|m| m.classification == Some(which))
        .collect();
    let ps: Vec<f64> = sel.iter().filter_map(|m| m.p_final).collect();
    let es: Vec<f64> = sel.iter().filter_map(|m| m.e_final).collect();
    let (p_mean, p_std) = mean_std(&ps);
    let (e_mean, e_std) = mean_std(&es);
    GroupStats {
        count: sel.len(),
        p_mean,
        p_std,
        e_mean,
        e_std,
    }
}

#[derive(Serialize)]
struct TrajectoriesReport {
    schema: String,
    seed: u64,
    mode: dirac_bohm::trajectories::FieldMode,
    t_final: f64,
    summary: EnsembleSummary,
    s0_bisection: Option<f64>,
    s0_bisection_error: Option<String>,
    right: GroupStats,
    left: GroupStats,
    members: Vec<MemberReport>,
}

fn member_reports(ens: &Ensemble, mass: f64) -> Vec<MemberReport> {
    ens.members
        .iter()
        .map(|m| match &m.result {
            Ok(tr) => {
                let obs: Option<BohmianObservables> =
                    terminal_ck(tr).and_then(|ck| bohmian_observables(&ck, mass).ok());
                MemberReport {
                    index: m.index,
                    q0: m.q0,
                    classification: Some(tr.classification),
                    asymptotic_velocity: tr.asymptotic_velocity,
                    p_final: obs.map(|o| o.p),
                    e_final: obs.map(|o| o.e),
                    node_events: tr.node_events,
                    error: None,
                }
            }
            Err(e) => MemberReport {
                index: m.index,
                q0: m.q0,
                classification: None,
                asymptotic_velocity: None,
                p_final: None,
                e_final: None,
                node_events: 0,
                error: Some(e.clone()),
            },
        })
        .collect()
}

fn failure_message(s: &EnsembleSummary) -> Option<String> {
    (s.failed > 0).then(|| format!("{} of {} trajectories failed", s.failed, s.n))
}

pub fn trajectories(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let spec: &EnsembleSpec = &cfg.trajectories;
    let ec = ensemble_config(cfg, spec.n, spec.t_final, spec.mode);
    let ens = art.time("ensemble", || match &spec.positions {
        Some(ps) => run_ensemble_from(&cfg.packet, ps, &ec),
        None => run_ensemble(&cfg.packet, &ec),
    })?;
    for m in &ens.members {
        if let Ok(tr) = &m.result {
            art.add(
                format!("trajectories/traj_{:04}.csv", m.index),
                trajectory_csv(tr),
            );
        }
    }

    let (mut s0_bisection, mut s0_bisection_error) = (None, None);
    if spec.bisection {
        let bracket = spec
            .bracket
            .map(|[a, b]| (a, b))
            .unwrap_or((-5.0 * cfg.packet.sigma, 5.0 * cfg.packet.sigma));
        match art.time("bisection", || {
            find_bifurcation(
                &cfg.packet,
                spec.mode,
                spec.t_final,
                bracket,
                spec.tol_s,
                &cfg.trajectory,
                &cfg.quad,
            )
        }) {
            Ok(s) => s0_bisection = Some(s),
            Err(e) => s0_bisection_error = Some(e.to_string()),
        }
    }

    let members = member_reports(&ens, cfg.packet.mass);
    let report = TrajectoriesReport {
        schema: schema("trajectories"),
        seed: cfg.seed,
        mode: spec.mode,
        t_final: spec.t_final,
        summary: ens.summary.clone(),
        s0_bisection,
        s0_bisection_error,
        right: group_stats(&members, Classification::Right),
        left: group_stats(&members, Classification::Left),
        members,
    };
    art.add("summary.json", json_bytes(&report));
    Ok(failure_message(&ens.summary))
}

#[derive(Serialize)]
struct BlochReport {
    schema: String,
    seed: u64,
    mode: dirac_bohm::trajectories::FieldMode,
    t_final: f64,
    n: usize,
    failed: usize,
    /// Largest `| |n| - 1 |` over every emitted vector.
    max_norm_deviation: f64,
    clusters: Option<ClusterReport>,
}

pub fn bloch(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let b = &cfg.bloch;
    let ec = ensemble_config(cfg, b.n, b.t_final, b.mode);
    let ens = art.time("ensemble", || run_ensemble(&cfg.packet, &ec))?;

    let mut csv = Csv::new("bloch", &["index", "t", "x", "y", "z"]);
    let mut terminal = Vec::new();
    let mut dev: f64 = 0.0;
    for m in &ens.members {
        let Ok(tr) = &m.result else { continue };
        let Some(series) = tr.bloch_series() else { continue };
        for (&t, n) in tr.times.iter().zip(&series) {
            dev = dev.max(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs());
            csv.row([m.index.to_string(), num(t), num(n[0]), num(n[1]), num(n[2])]);
        }
        if let Some(last) = series.last() {
            terminal.push(*last);
        }
    }
    art.add("bloch.csv", csv.into_bytes());

    let clusters = if terminal.is_empty() {
        None
    } else {
        Some(bloch_clusters(&terminal)?)
    };
    let report = BlochReport {
        schema: schema("bloch"),
        seed: cfg.seed,
        mode: b.mode,
        t_final: b.t_final,
        n: b.n,
        failed: ens.summary.failed,
        max_norm_deviation: dev,
        clusters,
    };
    art.add("bloch_clusters.json", json_bytes(&report));
    Ok(failure_message(&ens.summary))
}

#[derive(Serialize)]
struct TrajectoryObservables {
    q0: f64,
    t_final: f64,
    mode: dirac_bohm::trajectories::FieldMode,
    q_final: f64,
    v_final: f64,
    p_final: Option<f64>,
    e_final: Option<f64>,
}

#[derive(Serialize)]
struct ObservablesReport {
    schema: String,
    k0: f64,
    mass: f64,
    times: Vec<f64>,
    norm: Vec<f64>,
    momentum: Vec<f64>,
    energy: Vec<f64>,
    /// `k0 cos Theta0 + m sin Theta0 cos Omega0`.
    energy_initial_closed_form: f64,
    trajectory: TrajectoryObservables,
}

pub fn observables(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let o = &cfg.observables;
    let p = &cfg.packet;
    let (mut norm, mut momentum, mut energy) = (Vec::new(), Vec::new(), Vec::new());
    art.time("expectations", || -> Result<(), CliError> {
        for &t in &o.times {
            let ev = ExactEvolution::new(p, t, cfg.quad)?;
            norm.push(norm_squared(&ev, o.quad_tol)?);
            momentum.push(expected_momentum(&ev, o.quad_tol)?);
            energy.push(expected_energy(&ev, p.mass, o.quad_tol)?);
        }
        Ok(())
    })?;

    let field = make_field(p, o.mode, &cfg.quad)?;
    let tc = TrajectoryConfig {
        record_ck: true,
        ..cfg.trajectory
    };
    let tr = art.time("trajectory", || {
        integrate_trajectory(o.q0, (0.0, o.t_final), field.as_ref(), &tc)
    })?;

    let mut csv = Csv::new("observables-trajectory", &["t", "q", "v", "p", "E"]);
    let cks = tr.ck_series.as_deref().unwrap_or(&[]);
    let mut last = None;
    for (i, ((&t, &q), &v)) in tr.times.iter().zip(&tr.positions).zip(&tr.velocities).enumerate() {
        let obs = cks.get(i).and_then(|ck| bohmian_observables(ck, p.mass).ok());
        last = obs;
        csv.row([
            num(t),
            num(q),
            num(v),
            num(obs.map_or(f64::NAN, |b| b.p)),
            num(obs.map_or(f64::NAN, |b| b.e)),
        ]);
    }
    art.add("observables_trajectory.csv", csv.into_bytes());

    let amp = p.amplitude();
    let ck0 = dirac_bohm::packets::cayley_klein(amp)?;
    let report = ObservablesReport {
        schema: schema("observables"),
        k0: p.k0,
        mass: p.mass,
        times: o.times.clone(),
        norm,
        momentum,
        energy,
        energy_initial_closed_form: p.k0 * ck0.theta.cos() + p.mass * ck0.theta.sin() * ck0.omega.cos(),
        trajectory: TrajectoryObservables {
            q0: o.q0,
            t_final: o.t_final,
            mode: o.mode,
            q_final: *tr.positions.last().expect("non-empty"),
            v_final: *tr.velocities.last().expect("non-empty"),
            p_final: last.map(|b| b.p),
            e_final: last.map(|b| b.e),
        },
    };
    art.add("observables.json", json_bytes(&report));
    Ok(None)
}

#[derive(Serialize)]
struct BarrierEntry {
    theta0: f64,
    c_plus: f64,
    c_minus: f64,
    report: BarrierReport,
}

#[derive(Serialize)]
struct BarriersReport {
    schema: String,
    /// `C_+` at `Theta0 = pi/4`, which vanishes.
    c_plus_quarter_pi: f64,
    entries: Vec<BarrierEntry>,
}

pub fn barriers(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let b = &cfg.barriers;
    let xs = b.x.points();
    let ys = b.y.points();
    let phases = b.phase_values();
    let mut entries = Vec::new();
    let mut curves = Csv::new("barriers", &["theta0", "x", "b_plus", "b_minus"]);
    for &theta0 in &b.theta0 {
        let spec = barrier_curves(theta0)?;
        for &x in &xs {
            curves.row([num(theta0), num(x), num(spec.c_plus / x), num(spec.c_minus / x)]);
        }
        let report = art.time("grid-check", || barrier_check(&spec, &xs, &ys, &phases));
        entries.push(BarrierEntry {
            theta0,
            c_plus: spec.c_plus,
            c_minus: spec.c_minus,
            report,
        });
    }
    art.add("barriers.csv", curves.into_bytes());
    let violations: usize = entries.iter().map(|e| e.report.violations).sum();
    let report = BarriersReport {
        schema: schema("barriers"),
        c_plus_quarter_pi: barrier_curves(FRAC_PI_4)?.c_plus,
        entries,
    };
    art.add("barriers.json", json_bytes(&report));
    Ok((violations > 0).then(|| format!("{violations} barrier sign violations on the grid")))
}
