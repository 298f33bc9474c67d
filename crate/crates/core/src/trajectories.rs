//! Bohmian trajectories `dq/dt = J/rho (t, q)` under the exact, SPA or
//! Schrödinger velocity fields, ensembles drawn from `|psi(0)|^2`, barrier
//! curves of the SPA field and asymptotic classification.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dirac_exact::{evolve_packet, schrodinger_reference};
use crate::error::{domain, Error, Result};
use crate::ode::{self, OdeConfig, Rhs, Solution};
use crate::packets::{
    bloch_vector_from_spinor, cayley_klein, make_initial_packet, CayleyKlein, InitialPacket, PacketParams,
    Spinor,
};
use crate::quadrature::{self, QuadConfig};
use crate::spa::{spa_full, SpaParams};

/// Relative density below which a point counts as a node.
pub const NODE_EPS: f64 = 1e-14;

/// Field value at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub v: f64,
    pub rho: f64,
    pub psi: Option<Spinor>,
}

/// A velocity field that can be sampled concurrently.
pub trait VelocityField: Sync {
    fn sample(&self, t: f64, s: f64) -> Result<FieldPoint>;
    /// Peak density of the initial data; nodes are judged relative to it.
    fn peak_density(&self) -> f64;
}

fn point_from_spinor(psi: Spinor) -> FieldPoint {
    let rho = psi.density();
    FieldPoint {
        v: psi.velocity().unwrap_or(0.0),
        rho,
        psi: Some(psi),
    }
}

/// Velocity of the exactly evolved spinor.
#[derive(Debug, Clone, Copy)]
pub struct ExactField {
    packet: InitialPacket,
    mass: f64,
    cfg: QuadConfig,
}

impl ExactField {
    pub fn new(data: &PacketParams, cfg: QuadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            packet: make_initial_packet(data)?,
            mass: data.mass,
            cfg,
        })
    }
}

impl VelocityField for ExactField {
    fn sample(&self, t: f64, s: f64) -> Result<FieldPoint> {
        evolve_packet(t, s, &self.packet, self.mass, &self.cfg).map(|f| point_from_spinor(f.psi))
    }
    fn peak_density(&self) -> f64 {
        1.0 / ((TAU).sqrt() * self.packet.sigma)
    }
}

/// Velocity of the stationary-phase approximation with both critical points.
#[derive(Debug, Clone, Copy)]
pub struct SpaField {
    pub params: SpaParams,
}

impl SpaField {
    pub fn new(params: SpaParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl VelocityField for SpaField {
    fn sample(&self, t: f64, s: f64) -> Result<FieldPoint> {
        if !(t >= 0.0) {
            return Err(domain(format!("t must be >= 0, got {t}")));
        }
        Ok(point_from_spinor(spa_full(t, s, &self.params)))
    }
    fn peak_density(&self) -> f64 {
        1.0 / ((TAU).sqrt() * self.params.sigma)
    }
}

/// Free Schrödinger packet with unit mass and initial width 1/2.
#[derive(Debug, Clone, Copy)]
pub struct SchrodingerField {
    pub k0: f64,
}

impl VelocityField for SchrodingerField {
    fn sample(&self, t: f64, s: f64) -> Result<FieldPoint> {
        let (_, rho, v) = schrodinger_reference(t, s, self.k0);
        Ok(FieldPoint { v, rho, psi: None })
    }
    fn peak_density(&self) -> f64 {
        (2.0 / PI).sqrt()
    }
}

/// `v^(U)(t, s)` of the full SPA. Fails with a node error where both packets underflow.
pub fn spa_velocity_field(t: f64, s: f64, p: &SpaParams) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) {
        return Err(domain(format!("t must be >= 0, got {t}")));
    }
    spa_full(t, s, p).velocity().ok_or(Error::Node)
}

/// Asymptotic velocity of a trajectory relative to the signed group velocity
/// `v0 = k0 / E`: `Right` is `+v0`, `Left` is `-v0`. For `k0 < 0` a `Right`
/// trajectory therefore moves towards negative `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Right,
    Left,
    Unresolved,
}

/// Tolerance on the windowed mean velocity for [`Classification`].
pub const CLASSIFY_TOL: f64 = 0.02;

/// Step controls for trajectory integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub record_ck: bool,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-10,
            h_init: 1e-3,
            h_max: 0.05,
            record_ck: false,
        }
    }
}

impl TrajectoryConfig {
    fn ode(&self) -> OdeConfig {
        OdeConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_init: self.h_init,
            h_max: self.h_max,
            ..OdeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.h_init > 0.0 && self.h_max > 0.0) {
            return Err(domain("trajectory tolerances and step sizes must be > 0"));
        }
        Ok(())
    }
}

/// An integrated trajectory sampled at the accepted steps.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub q0: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub ck_series: Option<Vec<CayleyKlein>>,
    pub node_events: usize,
    pub asymptotic_velocity: Option<f64>,
    pub classification: Classification,
    #[serde(skip)]
    pub dense: Solution,
}

impl Trajectory {
    /// Position at any time in the integrated span.
    pub fn position_at(&self, t: f64) -> Option<f64> {
        self.dense.eval(t)
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("a trajectory has at least one sample")
    }

    /// Mean velocity over the last tenth of the span, compared against the signed `+-v0`.
    pub fn classify(&mut self, v0: f64) -> Classification {
        let t1 = self.t_final();
        let t0 = self.times[0];
        let tw = t1 - 0.1 * (t1 - t0);
        let mean = match (self.position_at(t1), self.position_at(tw)) {
            (Some(a), Some(b)) if t1 > tw => Some((a - b) / (t1 - tw)),
            _ => None,
        };
        self.asymptotic_velocity = mean;
        self.classification = match mean {
            Some(m) if (m - v0).abs() <= CLASSIFY_TOL => Classification::Right,
            Some(m) if (m + v0).abs() <= CLASSIFY_TOL => Classification::Left,
            _ => Classification::Unresolved,
        };
        self.classification
    }

    /// Unit Bloch vectors along the trajectory, where the field carries a spinor.
    pub fn bloch_series(&self) -> Option<Vec<[f64; 3]>> {
        self.ck_series
            .as_ref()
            .map(|cks| cks.iter().map(|c| c.bloch_vector()).collect())
    }
}

fn unwrap_near(value: f64, previous: f64) -> f64 {
    value + TAU * ((previous - value) / TAU).round()
}

/// Integrates `dq/dt = v(t, q)` over `t_span` from `q(t_span.0) = q0`.
///
/// Where the density falls below `NODE_EPS` times the initial peak the
/// velocity is taken as zero and the event counted.
pub fn integrate_trajectory(
    q0: f64,
    t_span: (f64, f64),
    field: &dyn VelocityField,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !q0.is_finite() {
        return Err(domain(format!("q0 must be finite, got {q0}")));
    }
    let node_floor = NODE_EPS * field.peak_density();
    let mut node_events = 0usize;
    let mut failure: Option<Error> = None;
    let sol = ode::integrate(
        |t, q| match field.sample(t, q) {
            Ok(p) if p.rho < node_floor => {
                node_events += 1;
                Rhs::Value(0.0)
            }
            Ok(p) => Rhs::Value(p.v),
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Rhs::Reject(msg)
            }
        },
        t0,
        q0,
        t1,
        &cfg.ode(),
    );
    let sol = match sol {
        Ok(s) => s,
        Err(e) => return Err(failure.unwrap_or(e)),
    };

    let mut times = Vec::with_capacity(sol.steps.len() + 1);
    let mut positions = Vec::with_capacity(sol.steps.len() + 1);
    times.push(t0);
    positions.push(q0);
    for s in &sol.steps {
        times.push(s.t1());
        positions.push(s.y1());
    }
    let mut velocities = Vec::with_capacity(times.len());
    let mut cks = cfg.record_ck.then(Vec::new);
    let mut prev_phi: Option<f64> = None;
    for (&t, &q) in times.iter().zip(&positions) {
        let p = field.sample(t, q)?;
        velocities.push(if p.rho < node_floor { 0.0 } else { p.v });
        if let (Some(list), Some(psi)) = (cks.as_mut(), p.psi) {
            match cayley_klein(psi) {
                Ok(mut ck) => {
                    if let Some(prev) = prev_phi {
                        ck.phi = unwrap_near(ck.phi, prev);
                    }
                    prev_phi = Some(ck.phi);
                    list.push(ck);
                }
                Err(_) => list.push(CayleyKlein {
                    r: 0.0,
                    theta: f64::NAN,
                    omega: f64::NAN,
                    phi: f64::NAN,
                }),
            }
        }
    }
    Ok(Trajectory {
        q0,
        times,
        positions,
        velocities,
        ck_series: cks,
        node_events,
        asymptotic_velocity: None,
        classification: Classification::Unresolved,
        dense: sol,
    })
}

/// `sup |q_a(t) - q_b(t)|` over the shared window, using dense output at all step times of both.
pub fn trajectory_closeness(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let lo = a.times[0].max(b.times[0]);
    let hi = a.t_final().min(b.t_final());
    if !(hi >= lo) {
        return Err(domain(format!(
            "trajectories share no time window ([{lo}, {hi}])"
        )));
    }
    let mut worst: f64 = 0.0;
    for &t in a.times.iter().chain(&b.times) {
        if t < lo || t > hi {
            continue;
        }
        if let (Some(x), Some(y)) = (a.position_at(t), b.position_at(t)) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Which field guides an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Exact,
    Spa,
}

/// Builds the velocity field for `mode`; the SPA reads `data` in macroscopic form.
pub fn make_field(data: &PacketParams, mode: FieldMode, q: &QuadConfig) -> Result<Box<dyn VelocityField>> {
    Ok(match mode {
        FieldMode::Exact => Box::new(ExactField::new(data, *q)?),
        FieldMode::Spa => {
            data.validate()?;
            Box::new(SpaField::new(SpaParams::from_packet(data))?)
        }
    })
}

/// `q0 = sigma Phi^{-1}(u)` with `u` from a ChaCha8 stream keyed by `(seed, index)`.
pub fn sample_initial_position(seed: u64, index: u64, sigma: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return sigma * normal.inverse_cdf(u);
        }
    }
}

/// One member of an ensemble run.
#[derive(Debug, Clone, Serialize)]
pub struct Member {
    pub index: usize,
    pub q0: f64,
    pub result: std::result::Result<Trajectory, String>,
}

/// Counts and the empirical bifurcation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub right: usize,
    pub left: usize,
    pub unresolved: usize,
    pub failed: usize,
    pub v0: f64,
    /// Whether the resolved classifications, ordered by `q0`, switch side exactly once
    /// (or never), in the direction fixed by the sign of `k0`.
    pub single_crossing: bool,
    pub s0: Option<f64>,
    pub node_events: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ensemble {
    pub members: Vec<Member>,
    pub summary: EnsembleSummary,
}

/// Ensemble parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub t_final: f64,
    pub seed: u64,
    pub mode: FieldMode,
    pub trajectory: TrajectoryConfig,
    pub quad: QuadConfig,
}

/// Integrates `n` trajectories with `|psi(0)|^2`-distributed starting points in parallel.
/// Member `i` depends only on `(seed, i)`.
pub fn run_ensemble(data: &PacketParams, cfg: &EnsembleConfig) -> Result<Ensemble> {
    if cfg.n == 0 {
        return Err(domain("ensemble size must be >= 1"));
    }
    let positions: Vec<f64> = (0..cfg.n)
        .map(|i| sample_initial_position(cfg.seed, i as u64, data.sigma))
        .collect();
    run_ensemble_from(data, &positions, cfg)
}

/// As [`run_ensemble`] with given starting points; `cfg.n` and `cfg.seed` are not used.
pub fn run_ensemble_from(data: &PacketParams, positions: &[f64], cfg: &EnsembleConfig) -> Result<Ensemble> {
    if positions.is_empty() {
        return Err(domain("ensemble size must be >= 1"));
    }
    if !(cfg.t_final > 0.0) {
        return Err(domain(format!("t_final must be > 0, got {}", cfg.t_final)));
    }
    let field = make_field(data, cfg.mode, &cfg.quad)?;
    let v0 = data.group_velocity();
    let members: Vec<Member> = positions
        .par_iter()
        .enumerate()
        .map(|(i, &q0)| {
            let result = integrate_trajectory(q0, (0.0, cfg.t_final), field.as_ref(), &cfg.trajectory)
                .map(|mut tr| {
                    tr.classify(v0);
                    tr
                })
                .map_err(|e| e.to_string());
            Member { index: i, q0, result }
        })
        .collect();
    let summary = summarize(&members, v0, data.k0);
    Ok(Ensemble { members, summary })
}

fn summarize(members: &[Member], v0: f64, k0: f64) -> EnsembleSummary {
    let mut s = EnsembleSummary {
        n: members.len(),
        right: 0,
        left: 0,
        unresolved: 0,
        failed: 0,
        v0,
        single_crossing: true,
        s0: None,
        node_events: 0,
    };
    let mut resolved: Vec<(f64, Classification)> = Vec::new();
    for m in members {
        match &m.result {
            Ok(t) => {
                s.node_events += t.node_events;
                match t.classification {
                    Classification::Right => s.right += 1,
                    Classification::Left => s.left += 1,
                    Classification::Unresolved => s.unresolved += 1,
                }
                if t.classification != Classification::Unresolved {
                    resolved.push((m.q0, t.classification));
                }
            }
            Err(_) => s.failed += 1,
        }
    }
    resolved.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (low_side, high_side) = if k0 >= 0.0 {
        (Classification::Left, Classification::Right)
    } else {
        (Classification::Right, Classification::Left)
    };
    let switches: Vec<usize> = (1..resolved.len())
        .filter(|&i| resolved[i].1 != resolved[i - 1].1)
        .collect();
    s.single_crossing = match switches.as_slice() {
        [] => true,
        [i] => resolved[*i - 1].1 == low_side && resolved[*i].1 == high_side,
        _ => false,
    };
    if let [i] = switches.as_slice() {
        if s.single_crossing {
            s.s0 = Some(0.5 * (resolved[*i - 1].0 + resolved[*i].0));
        }
    }
    s
}

/// Bisection on the starting point for the boundary between the two asymptotic directions.
pub fn find_bifurcation(
    data: &PacketParams,
    mode: FieldMode,
    t_final: f64,
    bracket: (f64, f64),
    tol_s: f64,
    traj: &TrajectoryConfig,
    q: &QuadConfig,
) -> Result<f64> {
    if !(tol_s > 0.0) {
        return Err(domain(format!("tol_s must be > 0, got {tol_s}")));
    }
    let field = make_field(data, mode, q)?;
    let v0 = data.group_velocity();
    let classify = |q0: f64| -> Result<Classification> {
        let mut tr = integrate_trajectory(q0, (0.0, t_final), field.as_ref(), traj)?;
        Ok(tr.classify(v0))
    };
    let (mut lo, mut hi) = bracket;
    let c_lo = classify(lo)?;
    let c_hi = classify(hi)?;
    if c_lo == c_hi || c_lo == Classification::Unresolved || c_hi == Classification::Unresolved {
        return Err(Error::Bracketing { lo, hi });
    }
    while hi - lo > tol_s {
        let mid = 0.5 * (lo + hi);
        match classify(mid)? {
            c if c == c_lo => lo = mid,
            c if c == c_hi => hi = mid,
            _ => return Err(Error::Bracketing { lo, hi }),
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The two hyperbola constants `C_+-` bounding the zero set of the rescaled SPA field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub theta0: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

/// `C_+- = ln tan(Theta0/2) - ln tan(pi/4 -+ Theta0/2)`, which equals
/// `ln tan(Theta0/2) - ln((1 -+ sin Theta0)/cos Theta0)`.
///
/// The rescaled field belongs to data `(1, 0)` with `cot Theta0 = p0`, so
/// `Theta0` must lie in `(0, pi/2)`; the left-moving mirror image is obtained by `s -> -s`.
pub fn barrier_curves(theta0: f64) -> Result<BarrierSpec> {
    if !(theta0 > 0.0 && theta0 < FRAC_PI_2) {
        return Err(Error::Degenerate(format!(
            "barrier curves need theta0 in (0, pi/2), got {theta0}"
        )));
    }
    let h = 0.5 * theta0;
    let ln_eta = h.tan().ln();
    Ok(BarrierSpec {
        theta0,
        c_plus: ln_eta - (FRAC_PI_4 - h).tan().ln(),
        c_minus: ln_eta - (FRAC_PI_4 + h).tan().ln(),
    })
}

/// `F = cos T tanh(xy - ln eta) + sin T sech(xy - ln eta) c` with `eta = tan(T/2)`;
/// `c` stands for `cos(a omega x)`.
pub fn barrier_function(theta0: f64, x: f64, y: f64, c: f64) -> f64 {
    let z = x * y - (0.5 * theta0).tan().ln();
    let (st, ct) = theta0.sin_cos();
    ct * z.tanh() + st * c / z.cosh()
}

/// Rescaled SPA velocity `F(x, y)` with `x = sqrt(v0) t / sigma`, `y = sqrt(v0) s / sigma`
/// and `a = 2 sigma E0 / sqrt(v0)`.
pub fn rescaled_velocity(theta0: f64, omega: f64, sigma: f64, x: f64, y: f64) -> f64 {
    let (st, ct) = theta0.sin_cos();
    let e0 = 1.0 / st;
    let a = 2.0 * sigma * e0 / ct.sqrt();
    barrier_function(theta0, x, y, (a * omega * x).cos())
}

/// SPA parameters whose velocity field is [`rescaled_velocity`].
pub fn barrier_params(theta0: f64, omega: f64, sigma: f64) -> SpaParams {
    SpaParams::new(1.0 / theta0.tan(), sigma, omega, 0.0)
}

/// Outcome of [`barrier_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub checked_above: usize,
    pub checked_below: usize,
    pub violations: usize,
    /// Smallest `F` seen above `B_+` and largest seen below `B_-`.
    pub min_above: f64,
    pub max_below: f64,
}

/// Samples `F` at every `(x, y, c)`: `F >= 0` is required where `y >= C_+/x` and
/// `F <= 0` where `y <= C_-/x`. Points with `x <= 0` are skipped.
pub fn barrier_check(spec: &BarrierSpec, xs: &[f64], ys: &[f64], phases: &[f64]) -> BarrierReport {
    let mut r = BarrierReport {
        checked_above: 0,
        checked_below: 0,
        violations: 0,
        min_above: f64::INFINITY,
        max_below: f64::NEG_INFINITY,
    };
    for &x in xs.iter().filter(|&&x| x > 0.0) {
        let (bp, bm) = (spec.c_plus / x, spec.c_minus / x);
        for &y in ys {
            for &c in phases {
                let f = barrier_function(spec.theta0, x, y, c);
                if y >= bp {
                    r.checked_above += 1;
                    r.min_above = r.min_above.min(f);
                    if f < 0.0 {
                        r.violations += 1;
                    }
                }
                if y <= bm {
                    r.checked_below += 1;
                    r.max_below = r.max_below.max(f);
                    if f > 0.0 {
                        r.violations += 1;
                    }
                }
            }
        }
    }
    r
}

/// Counts returns from above to below `B_+` along a trajectory of the field of [`barrier_params`].
pub fn barrier_recrossings(tr: &Trajectory, spec: &BarrierSpec, sigma: f64) -> usize {
    let sv = spec.theta0.cos().sqrt();
    let mut above = false;
    let mut count = 0;
    for (&t, &s) in tr.times.iter().zip(&tr.positions) {
        let x = sv * t / sigma;
        if x <= 0.0 {
            continue;
        }
        let y = sv * s / sigma;
        let now = y >= spec.c_plus / x;
        if above && !now {
            count += 1;
        }
        above = now;
    }
    count
}

/// Two antipodal groups of Bloch vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub centers: Vec<[f64; 3]>,
    pub counts: Vec<usize>,
    /// Largest angle between a vector and its group centre.
    pub max_radius: f64,
    /// `|pi - angle(centre_0, centre_1)|`, or `None` with fewer than two groups.
    pub antipodal_error: Option<f64>,
}

fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    c.atan2(dot)
}

fn normalized_mean(vs: &[[f64; 3]]) -> [f64; 3] {
    let mut m = [0.0; 3];
    for v in vs {
        for k in 0..3 {
            m[k] += v[k];
        }
    }
    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    [m[0] / n, m[1] / n, m[2] / n]
}

/// Splits unit vectors by the hemisphere of the first one and summarises both groups.
pub fn bloch_clusters(vectors: &[[f64; 3]]) -> Result<ClusterReport> {
    let Some(reference) = vectors.first() else {
        return Err(domain("no Bloch vectors to cluster"));
    };
    let (a, b): (Vec<[f64; 3]>, Vec<[f64; 3]>) =
        vectors.iter().partition(|v| angle(v, reference) <= FRAC_PI_2);
    let groups: Vec<Vec<[f64; 3]>> = [a, b].into_iter().filter(|g| !g.is_empty()).collect();
    let centers: Vec<[f64; 3]> = groups.iter().map(|g| normalized_mean(g)).collect();
    let max_radius = groups
        .iter()
        .zip(&centers)
        .flat_map(|(g, c)| g.iter().map(move |v| angle(v, c)))
        .fold(0.0_f64, f64::max);
    let antipodal_error = (centers.len() == 2).then(|| (PI - angle(&centers[0], &centers[1])).abs());
    Ok(ClusterReport {
        counts: groups.iter().map(|g| g.len()).collect(),
        centers,
        max_radius,
        antipodal_error,
    })
}

/// Bloch vector of the guiding spinor at the end of a trajectory.
pub fn terminal_bloch(tr: &Trajectory, field: &dyn VelocityField) -> Result<[f64; 3]> {
    let t = tr.t_final();
    let q = *tr.positions.last().expect("non-empty");
    let psi = field
        .sample(t, q)?
        .psi
        .ok_or_else(|| domain("field carries no spinor"))?;
    bloch_vector_from_spinor(&psi).ok_or(Error::Node)
}

/// Kolmogorov-Smirnov distance between samples and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `int_{-L}^{s} rho(t, u) du` of the exact solution, `L = 10 sigma + t`.
pub fn exact_cdf(data: &PacketParams, t: f64, s: f64, q: &QuadConfig) -> Result<f64> {
    let packet = make_initial_packet(data)?;
    let lo = -(10.0 * data.sigma + t);
    if s <= lo {
        return Ok(0.0);
    }
    let mut failure = None;
    let r = quadrature::integrate(
        |u| match evolve_packet(t, u, &packet, data.mass, q) {
            Ok(f) => f.psi.density(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        lo,
        s,
        Some(data.sigma),
        &QuadConfig {
            max_panels: 1 << 12,
            ..QuadConfig::with_tolerances(1e-7, 1e-9)
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac_exact::schrodinger_trajectory;
    use crate::packets::EnergySign;

    fn fig3_spa() -> SpaField {
        SpaField::new(SpaParams::from_packet(&PacketParams::gaussian(
            1.0, 10.0, FRAC_PI_2, 0.0, 3.0,
        )))
        .unwrap()
    }

    #[test]
    fn schrodinger_oracle() {
        let f = SchrodingerField { k0: 1.5 };
        let tr = integrate_trajectory(0.3, (0.0, 5.0), &f, &TrajectoryConfig::default()).unwrap();
        for (&t, &q) in tr.times.iter().zip(&tr.positions) {
            assert!((q - schrodinger_trajectory(t, 0.3, 1.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetric_data_keeps_centre_fixed() {
        let data = PacketParams::gaussian(1.0, 0.0, FRAC_PI_2, 0.0, 1.0);
        let f = ExactField::new(&data, QuadConfig::default()).unwrap();
        let tr = integrate_trajectory(0.0, (0.0, 2.0), &f, &TrajectoryConfig::default()).unwrap();
        assert!(tr.positions.iter().all(|q| q.abs() < 1e-8));
    }

    #[test]
    fn spa_limits_and_zero_curve() {
        let theta0: f64 = 0.6;
        let p = barrier_params(theta0, 40.0, 0.2);
        let v0 = theta0.cos();
        assert!((spa_velocity_field(1.0, 2.0, &p).unwrap() - v0).abs() < 1e-10);
        assert!((spa_velocity_field(1.0, -2.0, &p).unwrap() + v0).abs() < 1e-10);
        // zero set: sinh z = -tan(theta0) c
        let (x, c): (f64, f64) = (1.3, 0.4);
        let z = (-theta0.tan() * c).asinh();
        let y = (z + (0.5 * theta0).tan().ln()) / x;
        assert!(barrier_function(theta0, x, y, c).abs() < 1e-12);
    }

    #[test]
    fn rescaled_field_identity() {
        for &theta0 in &[0.3, 0.7, 1.2] {
            let (omega, sigma) = (30.0, 0.25);
            let p = barrier_params(theta0, omega, sigma);
            let sv = p.v0().sqrt();
            for &(t, s) in &[(0.3, 0.1), (0.8, -0.2), (1.1, 0.05)] {
                let v = spa_velocity_field(t, s, &p).unwrap();
                let f = rescaled_velocity(theta0, omega, sigma, sv * t / sigma, sv * s / sigma);
                assert!((v - f).abs() < 1e-12, "theta0={theta0} t={t} s={s}: {v} vs {f}");
            }
        }
    }

    #[test]
    fn barrier_constants() {
        let b = barrier_curves(FRAC_PI_4).unwrap();
        assert_eq!(b.c_plus, 0.0);
        for &t in &[0.1, PI / 8.0, 0.7, 3.0 * PI / 8.0, 1.5] {
            let b = barrier_curves(t).unwrap();
            assert!(b.c_minus < 0.0 && b.c_plus.abs() < -b.c_minus);
            let alt = (0.5 * t).tan().ln() - ((1.0 - t.sin()) / t.cos()).ln();
            assert!((alt - b.c_plus).abs() < 1e-12);
        }
        let b = barrier_curves(PI / 8.0).unwrap();
        assert!(b.c_plus < 0.0);
        let b = barrier_curves(3.0 * PI / 8.0).unwrap();
        assert!(b.c_plus > 0.0);
        assert!(
            barrier_curves(0.0).is_err() && barrier_curves(PI).is_err() && barrier_curves(FRAC_PI_2).is_err()
        );
    }

    #[test]
    fn barrier_grid() {
        for &t in &[PI / 8.0, 3.0 * PI / 8.0] {
            let b = barrier_curves(t).unwrap();
            let xs: Vec<f64> = (1..=50).map(|i| 0.1 * i as f64).collect();
            let ys: Vec<f64> = (0..50).map(|i| -5.0 + 0.2 * i as f64).collect();
            let cs: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
            let r = barrier_check(&b, &xs, &ys, &cs);
            assert_eq!(r.violations, 0);
            assert!(r.checked_above > 0 && r.checked_below > 0);
        }
    }

    #[test]
    fn spa_trajectory_deep_in_right_packet() {
        let f = fig3_spa();
        let mut tr = integrate_trajectory(2.0, (0.0, 8.0), &f, &TrajectoryConfig::default()).unwrap();
        let v0 = 10.0 / 109f64.sqrt();
        assert_eq!(tr.classify(v0), Classification::Right);
        assert!((tr.velocities.last().unwrap() - v0).abs() < 1e-3);
        assert!(tr.velocities.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn seeding_is_stable() {
        let a = sample_initial_position(7, 3, 1.0);
        assert_eq!(a, sample_initial_position(7, 3, 1.0));
        assert_ne!(a, sample_initial_position(7, 4, 1.0));
        assert_ne!(a, sample_initial_position(8, 3, 1.0));
    }

    #[test]
    fn closeness_of_identical_paths() {
        let f = fig3_spa();
        let tr = integrate_trajectory(0.5, (0.0, 1.0), &f, &TrajectoryConfig::default()).unwrap();
        assert_eq!(trajectory_closeness(&tr, &tr).unwrap(), 0.0);
        let other = integrate_trajectory(0.5, (2.0, 3.0), &f, &TrajectoryConfig::default()).unwrap();
        assert!(trajectory_closeness(&tr, &other).is_err());
    }

    #[test]
    fn eigen_packet_spa_has_no_bifurcation() {
        let data = PacketParams::eigen(1.0, 10.0, 3.0, EnergySign::Positive);
        let f = SpaField::new(SpaParams::from_packet(&data)).unwrap();
        let mut tr = integrate_trajectory(-1.5, (0.0, 8.0), &f, &TrajectoryConfig::default()).unwrap();
        assert_eq!(tr.classify(data.group_velocity()), Classification::Right);
    }

    #[test]
    fn clusters() {
        let n = [0.0, 0.6, 0.8];
        let m = [0.0, -0.6, -0.8];
        let r = bloch_clusters(&[n, m, n, m, n]).unwrap();
        assert_eq!(r.counts, vec![3, 2]);
        assert!(r.max_radius < 1e-12 && r.antipodal_error.unwrap() < 1e-12);
    }

    #[test]
    fn ks_uniform() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!(ks_distance(&xs, |x| x.clamp(0.0, 1.0)) <= 0.005 + 1e-12);
    }

    #[test]
    fn unwrapping() {
        assert!((unwrap_near(0.1, TAU - 0.1) - (TAU + 0.1)).abs() < 1e-15);
        assert_eq!(unwrap_near(1.0, 1.2), 1.0);
    }
}
