//! Stationary-phase approximation (SPA) of the evolved spinor in
//! macroscopic variables, where the mass is the large parameter `omega`.
//!
//! For data `(c_-, c_+) f(s) e^{i omega p0 s}` the SPA is
//! `U = c_- U2 + c_+ U1` with
//!
//! ```text
//! U1 = ( (phi_- - phi_+) / 2E0 ,  ((E0 - p0) phi_- + (E0 + p0) phi_+) / 2E0 )
//! U2 = ( ((E0 + p0) phi_- + (E0 - p0) phi_+) / 2E0 ,  (phi_- - phi_+) / 2E0 )
//! phi_-+ = f(s -+ v0 t) e^{i omega (p0 s -+ E0 t)}
//! ```
//!
//! `U1` belongs to data `(0, 1)`, `U2` to data `(1, 0)`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirac_exact::evolve_exact;
use crate::error::{domain, Error, Result};
use crate::packets::{gaussian_profile, PacketParams, Spinor};
use crate::quadrature::QuadConfig;
use crate::specfun::{bessel_j0, J0_FIRST_ZERO};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Macroscopic packet parameters: `omega` is the mass, the momentum is `omega * p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaParams {
    pub p0: f64,
    pub sigma: f64,
    pub omega: f64,
    /// Polar Bloch angle of the data spinor.
    pub vartheta: f64,
    /// Azimuthal Bloch angle of the data spinor.
    #[serde(default)]
    pub azimuth: f64,
}

impl SpaParams {
    pub fn new(p0: f64, sigma: f64, omega: f64, vartheta: f64) -> Self {
        Self {
            p0,
            sigma,
            omega,
            vartheta,
            azimuth: 0.0,
        }
    }

    /// Reads a Gaussian packet as macroscopic data: `omega = mass`, `p0 = k0 / mass`.
    pub fn from_packet(p: &PacketParams) -> Self {
        Self {
            p0: p.k0 / p.mass,
            sigma: p.sigma,
            omega: p.mass,
            vartheta: p.theta0,
            azimuth: p.omega0,
        }
    }

    /// The Gaussian packet with these parameters.
    pub fn packet(&self) -> PacketParams {
        PacketParams::macroscopic(self.sigma, self.p0, self.omega, self.vartheta, self.azimuth)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.p0 != 0.0 && self.p0.is_finite()) {
            problems.push(format!("p0 must be finite and nonzero, got {}", self.p0));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            problems.push(format!("omega must be > 0, got {}", self.omega));
        }
        if !(0.0..=PI).contains(&self.vartheta) {
            problems.push(format!("vartheta must lie in [0, pi], got {}", self.vartheta));
        }
        if !self.azimuth.is_finite() {
            problems.push(format!("azimuth must be finite, got {}", self.azimuth));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// `E0 = sqrt(1 + p0^2)`.
    pub fn e0(&self) -> f64 {
        self.p0.hypot(1.0)
    }

    /// `v0 = p0 / E0`.
    pub fn v0(&self) -> f64 {
        self.p0 / self.e0()
    }

    /// Whether both critical points lie outside the removed cap: `omega t > j0 E0`.
    pub fn both_critical_points(&self, t: f64) -> bool {
        self.omega * t > J0_FIRST_ZERO * self.e0()
    }

    /// The SPA guarantee covers `t` in `[|v0| T / 2, T]`; returns a message when `t` is outside.
    pub fn validity_warning(&self, t: f64, horizon: f64) -> Option<String> {
        let lo = 0.5 * self.v0().abs() * horizon;
        if t < lo || t > horizon {
            Some(format!(
                "t = {t} lies outside the SPA validity window [{lo}, {horizon}]"
            ))
        } else {
            None
        }
    }

    fn weights(&self) -> (Complex64, Complex64) {
        let (s, c) = (0.5 * self.vartheta).sin_cos();
        (
            Complex64::from_polar(c, 0.5 * self.azimuth),
            Complex64::from_polar(s, -0.5 * self.azimuth),
        )
    }
}

/// Result of [`spa_evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaResult {
    pub u: Spinor,
    pub phi_minus: Complex64,
    pub phi_plus: Complex64,
    pub both_critical_points: bool,
    /// `|p0|^5 e^{t/sigma} / sqrt(omega)`, the error-bound shape with unit constants.
    pub err_bound_scale: f64,
}

/// The packets `(phi_-, phi_+)` at `(t, s)`.
pub fn packet_envelopes(t: f64, s: f64, p: &SpaParams) -> (Complex64, Complex64) {
    let (e0, v0) = (p.e0(), p.v0());
    let w = p.omega;
    let minus = Complex64::from_polar(gaussian_profile(s - v0 * t, p.sigma), w * (p.p0 * s - e0 * t));
    let plus = Complex64::from_polar(gaussian_profile(s + v0 * t, p.sigma), w * (p.p0 * s + e0 * t));
    (minus, plus)
}

/// `A |p0|^5 e^{B t / sigma} / sqrt(omega)`.
pub fn error_bound(a: f64, b: f64, p0: f64, t: f64, sigma: f64, omega: f64) -> f64 {
    a * p0.abs().powi(5) * (b * t / sigma).exp() / omega.sqrt()
}

/// Full SPA value with both critical points, valid for `t >= 0` (at `t = 0` it equals the data).
pub(crate) fn spa_full(t: f64, s: f64, p: &SpaParams) -> Spinor {
    let (fm, fp) = packet_envelopes(t, s, p);
    let (e0, p0) = (p.e0(), p.p0);
    let k = 0.5 / e0;
    let u1 = Spinor::new((fm - fp) * k, (fm * (e0 - p0) + fp * (e0 + p0)) * k);
    let u2 = Spinor::new((fm * (e0 + p0) + fp * (e0 - p0)) * k, (fm - fp) * k);
    let (cm, cp) = p.weights();
    u2 * cm + u1 * cp
}

/// SPA of `psi(t, s)`. Below `omega t = j0 E0` the `J1` kernels keep only the
/// critical point away from the removed cap, which is the term weighted by `E0 - |p0|`.
pub fn spa_evaluate(t: f64, s: f64, p: &SpaParams) -> Result<SpaResult> {
    p.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain(format!("t must be > 0, got {t}")));
    }
    let (fm, fp) = packet_envelopes(t, s, p);
    let both = p.both_critical_points(t);
    let (e0, p0) = (p.e0(), p.p0);
    let k = 0.5 / e0;
    let (cm, cp) = p.weights();
    let off = (fm - fp) * k;
    // J1 parts: U1^+ and U2^-
    let (u1_plus, u2_minus) = if both {
        (
            (fm * (e0 - p0) + fp * (e0 + p0)) * k,
            (fm * (e0 + p0) + fp * (e0 - p0)) * k,
        )
    } else if p0 > 0.0 {
        (fm * (e0 - p0) * k, fp * (e0 - p0) * k)
    } else {
        (fp * (e0 + p0) * k, fm * (e0 + p0) * k)
    };
    let u = Spinor::new(u2_minus * cm + off * cp, off * cm + u1_plus * cp);
    Ok(SpaResult {
        u,
        phi_minus: fm,
        phi_plus: fp,
        both_critical_points: both,
        err_bound_scale: error_bound(1.0, 1.0, p0, t, p.sigma, p.omega),
    })
}

/// Solves `1 - J0(2 omega_t sqrt(beta)) = alpha` for `beta` in `(0, j0^2 / (4 omega_t^2)]`.
pub fn transport_beta(alpha: f64, omega_t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(omega_t > 0.5 * J0_FIRST_ZERO && omega_t.is_finite()) {
        return Err(domain(format!("omega*t must exceed j0/2, got {omega_t}")));
    }
    let upper = J0_FIRST_ZERO * J0_FIRST_ZERO / (4.0 * omega_t * omega_t);
    if alpha == 1.0 {
        return Ok(upper);
    }
    let g = |beta: f64| -> Result<f64> { Ok(1.0 - bessel_j0(2.0 * omega_t * beta.sqrt())? - alpha) };
    let (mut lo, mut hi) = (0.0, upper);
    if g(lo)? > 0.0 || g(hi)? < 0.0 {
        return Err(Error::Bracketing { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Phase of the sphere integrand in stereographic coordinates `x + i y = cot(theta/2) e^{i phi}`:
/// `p0 s - t (p0 (r^2 - 1) + 2 y) / (1 + r^2)`.
pub fn phase_function(x: f64, y: f64, t: f64, s: f64, p0: f64) -> f64 {
    let r2 = x * x + y * y;
    p0 * s - t * (p0 * (r2 - 1.0) + 2.0 * y) / (1.0 + r2)
}

/// Analytic gradient of [`phase_function`] in `(x, y)`.
pub fn phase_gradient(x: f64, y: f64, t: f64, p0: f64) -> [f64; 2] {
    let d = 1.0 + x * x + y * y;
    let d2 = d * d;
    [
        -t * 4.0 * x * (p0 - y) / d2,
        -t * (4.0 * p0 * y + 2.0 + 2.0 * x * x - 2.0 * y * y) / d2,
    ]
}

/// Critical points, Hessians per unit `t` and signatures of the phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    pub y_plus: f64,
    pub y_minus: f64,
    /// Diagonal entry of the Hessian at `(0, y_+)`, divided by `t`.
    pub hess_plus: f64,
    pub hess_minus: f64,
    pub sig_plus: i32,
    pub sig_minus: i32,
}

/// Critical points `y_+- = p0 +- sqrt(p0^2 + 1)` and the Hessians `+-1/(E0 (p0 +- E0)^2) I`.
pub fn phase_diagnostics(p0: f64) -> Result<PhaseDiagnostics> {
    if p0 == 0.0 || !p0.is_finite() {
        return Err(Error::Degenerate(format!("phase needs finite p0 != 0, got {p0}")));
    }
    let e0 = p0.hypot(1.0);
    let y_plus = p0 + e0;
    // y_- = -1 / y_+ avoids cancellation for large p0
    let y_minus = -1.0 / y_plus;
    let y_minus = if p0 < 0.0 { p0 - e0 } else { y_minus };
    let y_plus = if p0 < 0.0 { -1.0 / y_minus } else { y_plus };
    let hess_plus = 1.0 / (e0 * y_plus * y_plus);
    let hess_minus = -1.0 / (e0 * y_minus * y_minus);
    Ok(PhaseDiagnostics {
        y_plus,
        y_minus,
        hess_plus,
        hess_minus,
        sig_plus: 2 * hess_plus.signum() as i32,
        sig_minus: 2 * hess_minus.signum() as i32,
    })
}

/// Leading stationary-phase contribution `g e^{i omega phase} e^{i sig pi/4} (2 pi / omega) / sqrt|det|`
/// of one interior critical point of a two-dimensional integral.
pub fn spa_leading_term(
    g_at_crit: Complex64,
    phase_at_crit: f64,
    hess_det: f64,
    signature: i32,
    omega: f64,
) -> Result<Complex64> {
    if hess_det == 0.0 || !hess_det.is_finite() {
        return Err(Error::Degenerate(format!("Hessian determinant is {hess_det}")));
    }
    if ![-2, 0, 2].contains(&signature) {
        return Err(domain(format!("signature must be -2, 0 or 2, got {signature}")));
    }
    if !(omega > 0.0) {
        return Err(domain(format!("omega must be > 0, got {omega}")));
    }
    let rot = Complex64::from_polar(1.0, signature as f64 * FRAC_PI_4);
    Ok(
        g_at_crit * Complex64::from_polar(1.0, omega * phase_at_crit) * rot * (2.0 * PI / omega)
            / hess_det.abs().sqrt(),
    )
}

/// Contribution of a critical point on the boundary of the domain: half of the interior value.
pub fn spa_boundary_term(
    g_at_crit: Complex64,
    phase_at_crit: f64,
    hess_det: f64,
    signature: i32,
    omega: f64,
) -> Result<Complex64> {
    Ok(spa_leading_term(g_at_crit, phase_at_crit, hess_det, signature, omega)? * 0.5)
}

/// Builds the full SPA from [`spa_leading_term`] applied at both critical
/// points of the four kernel integrals, scaled by `-omega t / 4 pi`.
pub fn spa_assembled(t: f64, s: f64, p: &SpaParams) -> Result<Spinor> {
    p.validate()?;
    if !(t > 0.0) {
        return Err(domain(format!("t must be > 0, got {t}")));
    }
    let d = phase_diagnostics(p.p0)?;
    let (cm, cp) = p.weights();
    let mut u = Spinor::ZERO;
    for (y, hess, sig) in [
        (d.y_plus, d.hess_plus, d.sig_plus),
        (d.y_minus, d.hess_minus, d.sig_minus),
    ] {
        let r = y.abs();
        let e_iphi = I * y.signum();
        let dd = (1.0 + r * r) * (1.0 + r * r);
        // cos(theta) at the critical point fixes the data argument
        let cos = (r * r - 1.0) / (r * r + 1.0);
        let f = gaussian_profile(s - t * cos, p.sigma);
        let det = (hess * t) * (hess * t);
        let phase = phase_function(0.0, y, t, s, p.p0);
        let term = |g: Complex64| spa_leading_term(g * f, phase, det, sig, p.omega);
        let j1_minus = term(e_iphi * (4.0 * r / dd))?;
        let j1_plus = term(e_iphi * (4.0 / (r * dd)))?;
        let j0 = term(I * (4.0 / dd))?;
        u = u + Spinor::new(j1_minus * cm + j0 * cp, j1_plus * cp + j0 * cm);
    }
    Ok(u * (-p.omega * t / (4.0 * PI)))
}

/// Measured SPA errors along an `omega` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScaling {
    pub omegas: Vec<f64>,
    pub per_omega_sup_err: Vec<f64>,
    /// Least-squares slope of `log(sup err)` against `log(omega)`; `None` below two points.
    pub slope: Option<f64>,
    /// Intercept of the same fit.
    pub intercept: Option<f64>,
    /// Set when fewer than four ladder points were supplied.
    pub underdetermined: bool,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// `sup_s |psi_exact - U|` for each `omega`, evaluated in parallel.
pub fn error_scaling(
    params: &SpaParams,
    t_fixed: f64,
    omega_ladder: &[f64],
    s_grid: &[f64],
    q: &QuadConfig,
) -> Result<ErrorScaling> {
    params.validate()?;
    if omega_ladder.is_empty() || s_grid.is_empty() {
        return Err(domain("omega ladder and s grid must be non-empty"));
    }
    for &w in omega_ladder {
        let pw = SpaParams { omega: w, ..*params };
        pw.validate()?;
        if !pw.both_critical_points(t_fixed) {
            return Err(domain(format!(
                "omega = {w} violates omega*t > j0*E0 at t = {t_fixed}"
            )));
        }
    }
    let errs: Vec<f64> = omega_ladder
        .par_iter()
        .map(|&w| {
            let pw = SpaParams { omega: w, ..*params };
            let data = pw.packet();
            s_grid
                .iter()
                .map(|&s| {
                    let exact = evolve_exact(t_fixed, s, &data, q)?.psi;
                    let approx = spa_evaluate(t_fixed, s, &pw)?.u;
                    Ok((exact - approx).norm())
                })
                .try_fold(0.0_f64, |m, e: Result<f64>| Ok(m.max(e?)))
        })
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = omega_ladder.iter().map(|w| w.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let fit = least_squares(&lx, &ly);
    Ok(ErrorScaling {
        omegas: omega_ladder.to_vec(),
        per_omega_sup_err: errs,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        underdetermined: omega_ladder.len() < 4,
    })
}

/// Fits `A` and `B` of [`error_bound`] to measured `(t, omega, err)` triples.
pub fn fit_bound_constants(samples: &[(f64, f64, f64)], p0: f64, sigma: f64) -> Option<(f64, f64)> {
    let x: Vec<f64> = samples.iter().map(|&(t, _, _)| t / sigma).collect();
    let y: Vec<f64> = samples
        .iter()
        .map(|&(_, w, e)| (e * w.sqrt() / p0.abs().powi(5)).ln())
        .collect();
    least_squares(&x, &y).map(|(b, ln_a)| (ln_a.exp(), b))
}
