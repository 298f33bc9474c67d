//! The evolved spinor `psi(t, s)` of the free Dirac equation
//! `i d_t psi = ((-i d_s, m), (m, i d_s)) psi` by quadrature of its
//! Bessel-kernel representation, plus the free Schrödinger packet used as a
//! closed-form reference.
//!
//! With `sigma = s - t cos(theta)` the kernel integrals over `[s - t, s + t]`
//! become smooth integrals over `theta` in `[0, pi]`:
//!
//! ```text
//! psi_-(t,s) = psi0_-(s-t) - (m t/2) int [J1(m t sin) (1+cos) psi0_-(sigma) + i J0(m t sin) sin psi0_+(sigma)] dtheta
//! psi_+(t,s) = psi0_+(s+t) - (m t/2) int [J1(m t sin) (1-cos) psi0_+(sigma) + i J0(m t sin) sin psi0_-(sigma)] dtheta
//! ```

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::packets::{make_initial_packet, InitialPacket, PacketParams, Spinor, WaveFunction};
use crate::quadrature::{self, QuadConfig, QuadValue};
use crate::specfun::{j0_j1, J0_FIRST_ZERO};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One evaluation of the evolved spinor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub t: f64,
    pub s: f64,
    pub psi: Spinor,
    pub err_est: f64,
}

#[derive(Clone, Copy)]
struct SpinorPair(Spinor, Spinor);

impl Add for SpinorPair {
    type Output = SpinorPair;
    fn add(self, o: SpinorPair) -> SpinorPair {
        SpinorPair(self.0 + o.0, self.1 + o.1)
    }
}
impl Sub for SpinorPair {
    type Output = SpinorPair;
    fn sub(self, o: SpinorPair) -> SpinorPair {
        SpinorPair(self.0 - o.0, self.1 - o.1)
    }
}
impl Mul<f64> for SpinorPair {
    type Output = SpinorPair;
    fn mul(self, c: f64) -> SpinorPair {
        SpinorPair(self.0 * c, self.1 * c)
    }
}
impl QuadValue for SpinorPair {
    fn zero() -> Self {
        SpinorPair(Spinor::ZERO, Spinor::ZERO)
    }
    fn magnitude(&self) -> f64 {
        self.0.norm().hypot(self.1.norm())
    }
    fn leading(&self) -> Complex64 {
        self.0.minus
    }
}

/// Kernel applied to a single data value at angle `theta`.
#[inline]
fn kernel(x: f64, cos: f64, sin: f64, d: Spinor) -> Spinor {
    let (j0, j1) = j0_j1(x);
    Spinor::new(
        d.minus * (j1 * (1.0 + cos)) + I * d.plus * (j0 * sin),
        d.plus * (j1 * (1.0 - cos)) + I * d.minus * (j0 * sin),
    )
}

/// The `theta` window on which `|s - t cos(theta)| <= radius`, or `None` if empty.
fn theta_window(t: f64, s: f64, radius: f64) -> Option<(f64, f64)> {
    let hi_cos = ((s + radius) / t).min(1.0);
    let lo_cos = ((s - radius) / t).max(-1.0);
    if lo_cos > hi_cos {
        return None;
    }
    Some((hi_cos.acos(), lo_cos.acos()))
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("t must be finite and >= 0, got {t}")))
    }
}

/// Integration mesh hint for a `theta` integrand at time `t`.
fn theta_wavelength(t: f64, k0: f64, mass: f64) -> f64 {
    TAU / ((k0.abs() + mass) * t + 1.0)
}

fn kernel_config(cfg: &QuadConfig, prefactor: f64) -> QuadConfig {
    let mut c = *cfg;
    if prefactor > 0.0 {
        c.abs_tol = cfg.abs_tol / prefactor;
    }
    c
}

/// `(psi(t, s), d_s psi(t, s))` with a shared error estimate.
pub fn evolve_with_derivative(
    t: f64,
    s: f64,
    packet: &InitialPacket,
    mass: f64,
    cfg: &QuadConfig,
) -> Result<(Spinor, Spinor, f64)> {
    check_time(t)?;
    cfg.validate()?;
    if !s.is_finite() {
        return Err(domain(format!("s must be finite, got {s}")));
    }
    let left = packet.value(s - t);
    let right = packet.value(s + t);
    let dleft = packet.derivative(s - t);
    let dright = packet.derivative(s + t);
    let transport = Spinor::new(left.minus, right.plus);
    let dtransport = Spinor::new(dleft.minus, dright.plus);
    if t == 0.0 {
        return Ok((transport, dtransport, 0.0));
    }
    let Some((a, b)) = theta_window(t, s, packet.support_radius()) else {
        return Ok((transport, dtransport, 0.0));
    };
    let mt = mass * t;
    let pre = 0.5 * mt;
    let q = quadrature::integrate(
        |theta: f64| {
            let (sin, cos) = theta.sin_cos();
            let sigma = s - t * cos;
            let x = mt * sin;
            SpinorPair(
                kernel(x, cos, sin, packet.value(sigma)),
                kernel(x, cos, sin, packet.derivative(sigma)),
            )
        },
        a,
        b,
        Some(theta_wavelength(t, packet.k0, mass)),
        &kernel_config(cfg, pre),
    )?;
    Ok((
        transport - q.value.0 * pre,
        dtransport - q.value.1 * pre,
        q.err_est * pre,
    ))
}

pub(crate) fn evolve_packet(
    t: f64,
    s: f64,
    packet: &InitialPacket,
    mass: f64,
    cfg: &QuadConfig,
) -> Result<FieldSample> {
    check_time(t)?;
    cfg.validate()?;
    let transport = Spinor::new(packet.value(s - t).minus, packet.value(s + t).plus);
    if t == 0.0 {
        return Ok(FieldSample {
            t,
            s,
            psi: packet.value(s),
            err_est: 0.0,
        });
    }
    let Some((a, b)) = theta_window(t, s, packet.support_radius()) else {
        return Ok(FieldSample {
            t,
            s,
            psi: transport,
            err_est: 0.0,
        });
    };
    let mt = mass * t;
    let pre = 0.5 * mt;
    let q = quadrature::integrate(
        |theta: f64| {
            let (sin, cos) = theta.sin_cos();
            kernel(mt * sin, cos, sin, packet.value(s - t * cos))
        },
        a,
        b,
        Some(theta_wavelength(t, packet.k0, mass)),
        &kernel_config(cfg, pre),
    )?;
    Ok(FieldSample {
        t,
        s,
        psi: transport - q.value * pre,
        err_est: q.err_est * pre,
    })
}

/// `psi(t, s)` for Gaussian data; at `t = 0` the data itself.
pub fn evolve_exact(t: f64, s: f64, data: &PacketParams, q: &QuadConfig) -> Result<FieldSample> {
    let packet = make_initial_packet(data)?;
    evolve_packet(t, s, &packet, data.mass, q)
}

/// Evaluates [`evolve_exact`] on every `(t, s)` pair in parallel; output order matches input.
pub fn evolve_grid(
    points: &[(f64, f64)],
    data: &PacketParams,
    q: &QuadConfig,
) -> Result<Vec<Result<FieldSample>>> {
    let packet = make_initial_packet(data)?;
    q.validate()?;
    Ok(points
        .par_iter()
        .map(|&(t, s)| evolve_packet(t, s, &packet, data.mass, q))
        .collect())
}

/// Which part of the sphere the angular route covers.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Sphere {
    Full,
    /// Drop the transport term of `psi_+` and the `J1` contribution on `theta > theta0`.
    CapCut {
        theta0: f64,
    },
}

/// `theta0 = arccos(2 delta / (m t)^2 - 1)` with `delta = j0^2 / 4`.
pub fn cap_angle(omega_t: f64) -> Result<f64> {
    let delta = 0.25 * J0_FIRST_ZERO * J0_FIRST_ZERO;
    if !(omega_t > 0.5 * J0_FIRST_ZERO) || !omega_t.is_finite() {
        return Err(Error::DomainCut { omega_t });
    }
    Ok((2.0 * delta / (omega_t * omega_t) - 1.0).acos())
}

/// Radius `R = sqrt(delta) / sqrt((m t)^2 - delta)` of the removed disk in the stereographic plane.
pub fn cap_radius(omega_t: f64) -> Result<f64> {
    let delta = 0.25 * J0_FIRST_ZERO * J0_FIRST_ZERO;
    if !(omega_t > 0.5 * J0_FIRST_ZERO) || !omega_t.is_finite() {
        return Err(Error::DomainCut { omega_t });
    }
    Ok(delta.sqrt() / (omega_t * omega_t - delta).sqrt())
}

fn spherical(t: f64, s: f64, data: &PacketParams, cfg: &QuadConfig, sphere: Sphere) -> Result<FieldSample> {
    check_time(t)?;
    cfg.validate()?;
    let packet = make_initial_packet(data)?;
    let transport = match sphere {
        Sphere::Full => Spinor::new(packet.value(s - t).minus, packet.value(s + t).plus),
        Sphere::CapCut { .. } => Spinor::new(packet.value(s - t).minus, Complex64::new(0.0, 0.0)),
    };
    if t == 0.0 {
        return Ok(FieldSample {
            t,
            s,
            psi: packet.value(s),
            err_est: 0.0,
        });
    }
    let mt = data.mass * t;
    let pre = mt / (4.0 * PI);
    let mut failure = None;
    // The phi integral restores J0 and J1 from their integral representation.
    let mut outer = |theta: f64, keep_j1_plus: bool| -> Spinor {
        let (sin, cos) = theta.sin_cos();
        let d = packet.value(s - t * cos);
        let x = mt * sin;
        let min_nodes = (x.abs() as usize) + 32;
        // the rule is exact once the node count exceeds x, so only rounding remains
        let inner_tol = (1e-13 * TAU * 2.0 * d.norm()).max(f64::MIN_POSITIVE);
        let r = quadrature::periodic_trapezoid(
            |phi: f64| {
                let (sp, cp) = phi.sin_cos();
                let e = Complex64::from_polar(1.0, -x * sp);
                let rot = Complex64::new(cp, sp) * e;
                let j1_plus = if keep_j1_plus {
                    d.plus * (1.0 - cos) * rot
                } else {
                    Complex64::new(0.0, 0.0)
                };
                Spinor::new(
                    d.minus * (1.0 + cos) * rot + I * d.plus * sin * e,
                    j1_plus + I * d.minus * sin * e,
                )
            },
            0.0,
            TAU,
            min_nodes,
            inner_tol,
        );
        match r {
            Ok(q) => q.value,
            Err(e) => {
                failure.get_or_insert(e);
                Spinor::ZERO
            }
        }
    };
    let wl = Some(theta_wavelength(t, data.k0, data.mass));
    let ocfg = kernel_config(cfg, pre);
    let (value, err) = match sphere {
        Sphere::Full => {
            let q = quadrature::integrate(|th| outer(th, true), 0.0, PI, wl, &ocfg)?;
            (q.value, q.err_est)
        }
        Sphere::CapCut { theta0 } => {
            let a = quadrature::integrate(|th| outer(th, true), 0.0, theta0, wl, &ocfg)?;
            let b = quadrature::integrate(|th| outer(th, false), theta0, PI, wl, &ocfg)?;
            (a.value + b.value, a.err_est + b.err_est)
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(FieldSample {
        t,
        s,
        psi: transport - value * pre,
        err_est: err * pre,
    })
}

/// Independent route: the Bessel kernels are expanded into their angular
/// integrals and the resulting two-dimensional integral over the sphere is
/// evaluated directly. Bessel functions are never called.
pub fn evolve_exact_spherical(t: f64, s: f64, data: &PacketParams, q: &QuadConfig) -> Result<FieldSample> {
    spherical(t, s, data, q, Sphere::Full)
}

/// `psi(t, s)` with the transport term of `psi_+` replaced by removing the
/// polar cap `theta > theta0` from its `J1` integral. The discrepancy to
/// [`evolve_exact`] decays like `1/(m t)`. Requires `m t > j0/2`.
pub fn evolve_cap_cut(t: f64, s: f64, data: &PacketParams, q: &QuadConfig) -> Result<FieldSample> {
    check_time(t)?;
    let theta0 = cap_angle(data.mass * t)?;
    spherical(t, s, data, q, Sphere::CapCut { theta0 })
}

/// `(psi, rho, v)` of the free Schrödinger packet `psi(0, s) = (2/pi)^{1/4} e^{-s^2 + i k0 s}` with `hbar = m = 1`.
pub fn schrodinger_reference(t: f64, s: f64, k0: f64) -> (Complex64, f64, f64) {
    let denom = Complex64::new(1.0, 2.0 * t);
    let x = s - k0 * t;
    let psi = (2.0 / PI).powf(0.25) / denom.sqrt()
        * (-x * x / denom).exp()
        * Complex64::from_polar(1.0, k0 * s - 0.5 * k0 * k0 * t);
    let w = 1.0 + 4.0 * t * t;
    let rho = (2.0 / PI).sqrt() / w.sqrt() * (-2.0 * x * x / w).exp();
    let v = k0 + 4.0 * t * x / w;
    (psi, rho, v)
}

/// `q(t) = k0 t + q0 sqrt(1 + 4 t^2)`.
pub fn schrodinger_trajectory(t: f64, q0: f64, k0: f64) -> f64 {
    k0 * t + q0 * (1.0 + 4.0 * t * t).sqrt()
}

/// Central-difference estimate of `d_t rho + d_s J` at `(t, s)`; needs `t >= h`.
pub fn continuity_residual(t: f64, s: f64, data: &PacketParams, h: f64, q: &QuadConfig) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(domain(format!("h must be > 0, got {h}")));
    }
    if t < h {
        return Err(domain(format!("t = {t} must be at least h = {h}")));
    }
    let packet = make_initial_packet(data)?;
    let f = |tt: f64, ss: f64| evolve_packet(tt, ss, &packet, data.mass, q).map(|x| x.psi);
    let drho = (f(t + h, s)?.density() - f(t - h, s)?.density()) / (2.0 * h);
    let dj = (f(t, s + h)?.current() - f(t, s - h)?.current()) / (2.0 * h);
    Ok(drho + dj)
}

/// The evolved field at a fixed time, usable with the expectation routines.
#[derive(Debug, Clone, Copy)]
pub struct ExactEvolution {
    pub packet: InitialPacket,
    pub mass: f64,
    pub t: f64,
    pub cfg: QuadConfig,
}

impl ExactEvolution {
    pub fn new(data: &PacketParams, t: f64, cfg: QuadConfig) -> Result<Self> {
        check_time(t)?;
        cfg.validate()?;
        Ok(Self {
            packet: make_initial_packet(data)?,
            mass: data.mass,
            t,
            cfg,
        })
    }
}

impl WaveFunction for ExactEvolution {
    fn value_and_derivative(&self, s: f64) -> Result<(Spinor, Spinor)> {
        evolve_with_derivative(self.t, s, &self.packet, self.mass, &self.cfg).map(|(v, d, _)| (v, d))
    }

    fn support(&self) -> (f64, f64) {
        let l = 10.0 * self.packet.sigma + self.t;
        (-l, l)
    }

    fn wavelength(&self) -> Option<f64> {
        Some(self.packet.sigma)
    }
}
