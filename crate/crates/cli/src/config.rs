//! Run configuration: a TOML file merged with `key.path=value` overrides.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};
use std::path::{Path, PathBuf};

use dirac_bohm::packets::PacketMode;
use dirac_bohm::trajectories::{FieldMode, TrajectoryConfig};
use dirac_bohm::{PacketParams, QuadConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Evenly spaced axis `min..=max` with `n` points; `n = 1` is the single point `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.min],
            n => {
                let h = (self.max - self.min) / (n - 1) as f64;
                (0..n).map(|i| self.min + h * i as f64).collect()
            }
        }
    }

    fn check(&self, name: &str, problems: &mut Vec<String>) {
        if self.n == 0 {
            problems.push(format!("{name}.n is 0: the grid is empty, use n >= 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            problems.push(format!("{name}.min and {name}.max must be finite"));
        } else if self.n > 1 && !(self.max > self.min) {
            problems.push(format!(
                "{name}.max ({}) must exceed {name}.min ({}) when n > 1",
                self.max, self.min
            ));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub t: Axis,
    pub s: Axis,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            t: Axis {
                min: 0.5,
                max: 2.0,
                n: 4,
            },
            s: Axis {
                min: -16.0,
                max: 16.0,
                n: 641,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaCompareSpec {
    pub p0: f64,
    pub sigma: f64,
    pub vartheta: f64,
    pub azimuth: f64,
    pub t: f64,
    pub omegas: Vec<f64>,
    pub s: Axis,
}

impl Default for SpaCompareSpec {
    fn default() -> Self {
        Self {
            p0: 1.0,
            sigma: 0.2,
            vartheta: 0.0,
            azimuth: 0.0,
            t: 1.0,
            omegas: vec![50.0, 100.0, 200.0, 400.0],
            s: Axis {
                min: -1.6,
                max: 1.6,
                n: 161,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n: usize,
    pub t_final: f64,
    pub mode: FieldMode,
    /// Also locate the bifurcation point by bisection on `q0`.
    pub bisection: bool,
    pub tol_s: f64,
    /// Bisection bracket; defaults to `+-5 sigma`.
    pub bracket: Option<[f64; 2]>,
    /// Starting points to use instead of `n` seeded draws.
    pub positions: Option<Vec<f64>>,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n: 50,
            t_final: 8.0,
            mode: FieldMode::Spa,
            bisection: true,
            tol_s: 1e-3,
            bracket: None,
            positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlochSpec {
    pub n: usize,
    pub t_final: f64,
    pub mode: FieldMode,
}

impl Default for BlochSpec {
    fn default() -> Self {
        Self {
            n: 100,
            t_final: 8.0,
            mode: FieldMode::Spa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservablesSpec {
    pub times: Vec<f64>,
    pub quad_tol: f64,
    /// Starting point of the trajectory whose Bohmian observables are reported.
    pub q0: f64,
    pub t_final: f64,
    pub mode: FieldMode,
}

impl Default for ObservablesSpec {
    fn default() -> Self {
        Self {
            times: vec![0.0, 0.5, 1.0],
            quad_tol: 1e-9,
            q0: 0.0,
            t_final: 1.0,
            mode: FieldMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarriersSpec {
    pub theta0: Vec<f64>,
    /// `x` runs over `(0, x_max]`.
    pub x: Axis,
    pub y: Axis,
    /// Number of samples of `cos(a omega x)` in `[-1, 1]`.
    pub phases: usize,
}

impl Default for BarriersSpec {
    fn default() -> Self {
        Self {
            theta0: vec![FRAC_PI_8, 3.0 * FRAC_PI_8],
            x: Axis {
                min: 0.1,
                max: 5.0,
                n: 50,
            },
            y: Axis {
                min: -5.0,
                max: 5.0,
                n: 50,
            },
            phases: 17,
        }
    }
}

impl BarriersSpec {
    pub fn phase_values(&self) -> Vec<f64> {
        Axis {
            min: -1.0,
            max: 1.0,
            n: self.phases,
        }
        .points()
    }
}

/// Everything a run needs. Missing keys take the defaults, which reproduce the
/// `k0 = 10, m = 3, sigma = 1, Theta0 = pi/2` experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run directory; defaults to `$DIRAC_BOHM_OUT/<command>` or `runs/<command>`.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    pub workers: Option<usize>,
    pub packet: PacketParams,
    pub quad: QuadConfig,
    pub trajectory: TrajectoryConfig,
    pub field: FieldSpec,
    pub spa_compare: SpaCompareSpec,
    pub trajectories: EnsembleSpec,
    pub bloch: BlochSpec,
    pub observables: ObservablesSpec,
    pub barriers: BarriersSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            seed: 1,
            workers: None,
            packet: PacketParams::gaussian(1.0, 10.0, FRAC_PI_2, 0.0, 3.0),
            quad: QuadConfig::default(),
            trajectory: TrajectoryConfig::default(),
            field: FieldSpec::default(),
            spa_compare: SpaCompareSpec::default(),
            trajectories: EnsembleSpec::default(),
            bloch: BlochSpec::default(),
            observables: ObservablesSpec::default(),
            barriers: BarriersSpec::default(),
        }
    }
}

/// The subcommands, used to pick which sections are validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Field,
    SpaCompare,
    Trajectories,
    Bloch,
    Observables,
    Barriers,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Field => "field",
            Command::SpaCompare => "spa-compare",
            Command::Trajectories => "trajectories",
            Command::Bloch => "bloch",
            Command::Observables => "observables",
            Command::Barriers => "barriers",
        }
    }
}

fn check_packet(p: &PacketParams, problems: &mut Vec<String>) {
    let before = problems.len();
    if !(p.sigma > 0.0) {
        problems.push(format!("packet.sigma must be > 0, got {}", p.sigma));
    }
    if !(0.0..=PI).contains(&p.theta0) {
        problems.push(format!("packet.theta0 must lie in [0, pi], got {}", p.theta0));
    }
    if problems.len() == before {
        if let Err(e) = p.validate() {
            problems.push(format!("packet: {e}"));
        }
    }
}

fn check_times(name: &str, t: f64, problems: &mut Vec<String>) {
    if !(t > 0.0 && t.is_finite()) {
        problems.push(format!("{name} must be a positive finite time, got {t}"));
    }
}

/// Rejects ladders that are not strictly increasing with a constant ratio.
pub fn check_ladder(omegas: &[f64]) -> Result<(), String> {
    if omegas.is_empty() {
        return Err("spa_compare.omegas is empty: give at least one omega".into());
    }
    if omegas.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(format!(
            "spa_compare.omegas must be positive and finite, got {omegas:?}"
        ));
    }
    if omegas.len() > 1 {
        let r = omegas[1] / omegas[0];
        if !(r > 1.0) {
            return Err(format!("spa_compare.omegas must increase, got {omegas:?}"));
        }
        for w in omegas.windows(2) {
            if ((w[1] / w[0]) / r - 1.0).abs() > 1e-9 {
                return Err(format!(
                    "spa_compare.omegas is not geometric: ratio {} differs from {r}; use e.g. [50, 100, 200, 400]",
                    w[1] / w[0]
                ));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Checks the sections `cmd` reads; every problem is reported, not only the first.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.workers == Some(0) {
            problems.push("workers must be >= 1".to_string());
        }
        if let Err(e) = self.quad.validate() {
            problems.push(format!("quad: {e}"));
        }
        match cmd {
            Command::Field => {
                check_packet(&self.packet, &mut problems);
                self.field.t.check("field.t", &mut problems);
                self.field.s.check("field.s", &mut problems);
                if self.field.t.min < 0.0 {
                    problems.push(format!("field.t.min must be >= 0, got {}", self.field.t.min));
                }
            }
            Command::SpaCompare => {
                let c = &self.spa_compare;
                if !(c.sigma > 0.0) {
                    problems.push(format!("spa_compare.sigma must be > 0, got {}", c.sigma));
                }
                if !(0.0..=PI).contains(&c.vartheta) {
                    problems.push(format!(
                        "spa_compare.vartheta must lie in [0, pi], got {}",
                        c.vartheta
                    ));
                }
                if c.p0 == 0.0 || !c.p0.is_finite() {
                    problems.push(format!(
                        "spa_compare.p0 must be non-zero and finite, got {}",
                        c.p0
                    ));
                }
                check_times("spa_compare.t", c.t, &mut problems);
                if let Err(e) = check_ladder(&c.omegas) {
                    problems.push(e);
                }
                c.s.check("spa_compare.s", &mut problems);
            }
            Command::Trajectories | Command::Bloch => {
                check_packet(&self.packet, &mut problems);
                if let Err(e) = self.trajectory.validate() {
                    problems.push(format!("trajectory: {e}"));
                }
                let (n, t, name) = if cmd == Command::Bloch {
                    (self.bloch.n, self.bloch.t_final, "bloch")
                } else {
                    (self.trajectories.n, self.trajectories.t_final, "trajectories")
                };
                let pinned = if cmd == Command::Trajectories {
                    self.trajectories.positions.as_deref()
                } else {
                    None
                };
                match pinned {
                    Some([]) => problems.push("trajectories.positions is empty".to_string()),
                    Some(ps) if ps.iter().any(|q| !q.is_finite()) => {
                        problems.push(format!("trajectories.positions must be finite, got {ps:?}"))
                    }
                    Some(_) => {}
                    None if n == 0 => problems.push(format!("{name}.n must be >= 1")),
                    None => {}
                }
                check_times(&format!("{name}.t_final"), t, &mut problems);
                if cmd == Command::Trajectories && self.trajectories.bisection {
                    if !(self.trajectories.tol_s > 0.0) {
                        problems.push(format!(
                            "trajectories.tol_s must be > 0, got {}",
                            self.trajectories.tol_s
                        ));
                    }
                    if let Some([lo, hi]) = self.trajectories.bracket {
                        if !(hi > lo) {
                            problems.push(format!(
                                "trajectories.bracket must satisfy lo < hi, got [{lo}, {hi}]"
                            ));
                        }
                    }
                }
            }
            Command::Observables => {
                check_packet(&self.packet, &mut problems);
                let o = &self.observables;
                if o.times.is_empty() {
                    problems.push("observables.times is empty".to_string());
                }
                if o.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    problems.push(format!(
                        "observables.times must be finite and >= 0, got {:?}",
                        o.times
                    ));
                }
                if !(o.quad_tol > 0.0) {
                    problems.push(format!("observables.quad_tol must be > 0, got {}", o.quad_tol));
                }
                check_times("observables.t_final", o.t_final, &mut problems);
                if let Err(e) = self.trajectory.validate() {
                    problems.push(format!("trajectory: {e}"));
                }
            }
            Command::Barriers => {
                let b = &self.barriers;
                if b.theta0.is_empty() {
                    problems.push("barriers.theta0 is empty".to_string());
                }
                for &t in &b.theta0 {
                    if !(t > 0.0 && t < FRAC_PI_2) {
                        problems.push(format!("barriers.theta0 entries must lie in (0, pi/2), got {t}"));
                    }
                }
                b.x.check("barriers.x", &mut problems);
                b.y.check("barriers.y", &mut problems);
                if !(b.x.min > 0.0) {
                    problems.push(format!("barriers.x.min must be > 0, got {}", b.x.min));
                }
                if b.phases == 0 {
                    problems.push("barriers.phases must be >= 1".to_string());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems.join("\n")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()))
}

/// Applies `a.b.c=value` to `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!(
            "override key `{key}` has an empty segment"
        )));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

/// Recursive merge: tables merge key by key, anything else is replaced.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Layers the file at `path` (if any) and then the overrides over the defaults.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table = Table::try_from(RunConfig::default()).expect("defaults serialize");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
        let file =
            toml::from_str::<Table>(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        merge(&mut table, file);
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let mut cfg = RunConfig::deserialize(Value::Table(table))
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    cfg.packet = derive_angles(cfg.packet);
    Ok(cfg)
}

/// Eigen and mixed packets fix `theta0` and `omega0` from `k0` and `mass`.
pub fn derive_angles(p: PacketParams) -> PacketParams {
    match p.mode {
        PacketMode::Gaussian => p,
        PacketMode::Eigen { sign } => PacketParams::eigen(p.sigma, p.k0, p.mass, sign),
        PacketMode::Mixed => PacketParams::mixed(p.sigma, p.k0, p.mass, p.mixing_theta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = RunConfig {
            out_dir: Some("x/y".into()),
            workers: Some(3),
            ..Default::default()
        };
        c.trajectories.bracket = Some([-0.1, 0.7]);
        c.packet.theta0 = 0.1 + 0.2;
        let text = c.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.packet.theta0.to_bits(), c.packet.theta0.to_bits());
    }

    #[test]
    fn overrides_and_partial_tables() {
        let c = load(
            None,
            &[
                "packet.sigma=0.5".into(),
                "quad.rel_tol=1e-8".into(),
                "trajectories.mode=\"exact\"".into(),
                "spa_compare.omegas=[10, 20]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.packet.sigma, 0.5);
        assert_eq!(c.packet.k0, 10.0);
        assert_eq!(c.quad.rel_tol, 1e-8);
        assert_eq!(c.quad.abs_tol, QuadConfig::default().abs_tol);
        assert_eq!(c.trajectories.mode, FieldMode::Exact);
        assert_eq!(c.spa_compare.omegas, vec![10.0, 20.0]);
        assert!(load(None, &["nonsense".into()]).is_err());
        let e = load(None, &["packet.mode={kind=\"eigen\", sign=\"negative\"}".into()]).unwrap();
        assert!(e.packet.validate().is_ok());
        assert!((e.packet.theta0 - (std::f64::consts::PI - 3.0_f64.atan2(10.0))).abs() < 1e-15);
        assert!(load(None, &["typo_key=1".into()]).is_err());
    }

    #[test]
    fn rejections_are_actionable() {
        let mut c = RunConfig::default();
        c.packet.sigma = -1.0;
        c.packet.theta0 = 4.0;
        let msg = c.validate(Command::Field).unwrap_err().to_string();
        assert!(
            msg.contains("packet.sigma") && msg.contains("packet.theta0"),
            "{msg}"
        );

        let mut c = RunConfig::default();
        c.field.s.n = 0;
        assert!(c
            .validate(Command::Field)
            .unwrap_err()
            .to_string()
            .contains("empty"));

        assert!(check_ladder(&[50.0, 100.0, 300.0])
            .unwrap_err()
            .contains("not geometric"));
        assert!(check_ladder(&[100.0, 50.0]).is_err());
        assert!(check_ladder(&[]).is_err());
        assert!(check_ladder(&[50.0]).is_ok());
        assert!(check_ladder(&[50.0, 100.0, 200.0, 400.0]).is_ok());
    }

    #[test]
    fn axis_points() {
        assert_eq!(
            Axis {
                min: 1.0,
                max: 3.0,
                n: 3
            }
            .points(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            Axis {
                min: 1.0,
                max: 3.0,
                n: 1
            }
            .points(),
            vec![1.0]
        );
        assert!(Axis {
            min: 1.0,
            max: 3.0,
            n: 0
        }
        .points()
        .is_empty());
    }
}
