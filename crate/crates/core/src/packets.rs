//! Initial data, the Cayley-Klein decomposition of a spinor, and observables.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{self, QuadConfig, QuadValue};

/// Two complex amplitudes `(psi_minus, psi_plus)` at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Spinor {
    pub minus: Complex64,
    pub plus: Complex64,
}

impl Spinor {
    pub const ZERO: Spinor = Spinor {
        minus: Complex64 { re: 0.0, im: 0.0 },
        plus: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(minus: Complex64, plus: Complex64) -> Self {
        Self { minus, plus }
    }

    /// `rho = |psi_-|^2 + |psi_+|^2`.
    pub fn density(&self) -> f64 {
        self.minus.norm_sqr() + self.plus.norm_sqr()
    }

    /// `J = |psi_-|^2 - |psi_+|^2`.
    pub fn current(&self) -> f64 {
        self.minus.norm_sqr() - self.plus.norm_sqr()
    }

    /// `J / rho`, or `None` at a node.
    pub fn velocity(&self) -> Option<f64> {
        let rho = self.density();
        if rho > 0.0 {
            Some((self.current() / rho).clamp(-1.0, 1.0))
        } else {
            None
        }
    }

    pub fn norm(&self) -> f64 {
        self.density().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Spinor {
        Spinor::new(self.minus * c, self.plus * c)
    }

    pub fn is_finite(&self) -> bool {
        self.minus.is_finite() && self.plus.is_finite()
    }
}

impl Add for Spinor {
    type Output = Spinor;
    fn add(self, o: Spinor) -> Spinor {
        Spinor::new(self.minus + o.minus, self.plus + o.plus)
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    fn sub(self, o: Spinor) -> Spinor {
        Spinor::new(self.minus - o.minus, self.plus - o.plus)
    }
}

impl Neg for Spinor {
    type Output = Spinor;
    fn neg(self) -> Spinor {
        Spinor::new(-self.minus, -self.plus)
    }
}

impl Mul<f64> for Spinor {
    type Output = Spinor;
    fn mul(self, c: f64) -> Spinor {
        Spinor::new(self.minus * c, self.plus * c)
    }
}

impl Mul<Complex64> for Spinor {
    type Output = Spinor;
    fn mul(self, c: Complex64) -> Spinor {
        self.scale(c)
    }
}

impl QuadValue for Spinor {
    fn zero() -> Self {
        Spinor::ZERO
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn leading(&self) -> Complex64 {
        self.minus
    }
}

/// Sign of the energy of a plane-wave eigenspinor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergySign {
    Positive,
    Negative,
}

/// How the constant spinor part of the initial data is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PacketMode {
    /// Bloch angles `(theta0, omega0)` as given.
    Gaussian,
    /// Angles locked to the eigenspinor of momentum `k0`.
    Eigen { sign: EnergySign },
    /// `sin(mixing/2) * negative + cos(mixing/2) * positive` eigenspinors.
    Mixed,
}

/// Gaussian spinor packet `f_sigma(s) e^{i k0 s} chi` with constant spinor `chi`.
///
/// In macroscopic variables `mass` is the large parameter `omega` and
/// `k0 = omega * p0`; see [`PacketParams::macroscopic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketParams {
    pub sigma: f64,
    pub k0: f64,
    pub theta0: f64,
    pub omega0: f64,
    pub mass: f64,
    #[serde(default)]
    pub mixing_theta: f64,
    #[serde(default = "default_mode")]
    pub mode: PacketMode,
}

fn default_mode() -> PacketMode {
    PacketMode::Gaussian
}

/// Angles `(Theta_{+-,k}, Omega_{+-})` of the plane-wave eigenspinor with momentum `k`.
pub fn eigen_angles(k: f64, mass: f64, sign: EnergySign) -> (f64, f64) {
    let theta_plus = mass.atan2(k);
    match sign {
        EnergySign::Positive => (theta_plus, 0.0),
        EnergySign::Negative => (PI - theta_plus, PI),
    }
}

/// Spinor of unit norm with Bloch angles `(theta, omega)` and zero total phase.
pub fn bloch_spinor(theta: f64, omega: f64) -> Spinor {
    let (s, c) = (0.5 * theta).sin_cos();
    Spinor::new(
        Complex64::from_polar(c, 0.5 * omega),
        Complex64::from_polar(s, -0.5 * omega),
    )
}

impl PacketParams {
    /// Packet with arbitrary initial Bloch angles.
    pub fn gaussian(sigma: f64, k0: f64, theta0: f64, omega0: f64, mass: f64) -> Self {
        Self {
            sigma,
            k0,
            theta0,
            omega0,
            mass,
            mixing_theta: 0.0,
            mode: PacketMode::Gaussian,
        }
    }

    /// Packet aligned with the energy eigenspinor of momentum `k`.
    pub fn eigen(sigma: f64, k: f64, mass: f64, sign: EnergySign) -> Self {
        let (theta0, omega0) = eigen_angles(k, mass, sign);
        Self {
            sigma,
            k0: k,
            theta0,
            omega0,
            mass,
            mixing_theta: 0.0,
            mode: PacketMode::Eigen { sign },
        }
    }

    /// Superposition `sin(vartheta/2) Psi^- + cos(vartheta/2) Psi^+` of eigen-packets.
    pub fn mixed(sigma: f64, k: f64, mass: f64, vartheta: f64) -> Self {
        let mut p = Self {
            sigma,
            k0: k,
            theta0: 0.0,
            omega0: 0.0,
            mass,
            mixing_theta: vartheta,
            mode: PacketMode::Mixed,
        };
        if let Ok(ck) = cayley_klein(p.amplitude()) {
            p.theta0 = ck.theta;
            p.omega0 = ck.omega.rem_euclid(2.0 * PI);
        }
        p
    }

    /// Macroscopic parametrisation: mass becomes `omega`, momentum `omega * p0`.
    pub fn macroscopic(sigma: f64, p0: f64, omega: f64, theta0: f64, omega0: f64) -> Self {
        Self::gaussian(sigma, omega * p0, theta0, omega0, omega)
    }

    /// The constant unit spinor multiplying the scalar Gaussian.
    pub fn amplitude(&self) -> Spinor {
        match self.mode {
            PacketMode::Gaussian => bloch_spinor(self.theta0, self.omega0),
            PacketMode::Eigen { sign } => {
                let (t, o) = eigen_angles(self.k0, self.mass, sign);
                bloch_spinor(t, o)
            }
            PacketMode::Mixed => {
                let (tp, op) = eigen_angles(self.k0, self.mass, EnergySign::Positive);
                let (tn, on) = eigen_angles(self.k0, self.mass, EnergySign::Negative);
                let (s, c) = (0.5 * self.mixing_theta).sin_cos();
                bloch_spinor(tn, on) * s + bloch_spinor(tp, op) * c
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            problems.push(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !self.k0.is_finite() {
            problems.push(format!("k0 must be finite, got {}", self.k0));
        }
        if !(0.0..=PI).contains(&self.theta0) {
            problems.push(format!("theta0 must lie in [0, pi], got {}", self.theta0));
        }
        if !(0.0..2.0 * PI).contains(&self.omega0) {
            problems.push(format!("omega0 must lie in [0, 2pi), got {}", self.omega0));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            problems.push(format!("mass must be > 0, got {}", self.mass));
        }
        if !(0.0..=PI).contains(&self.mixing_theta) {
            problems.push(format!(
                "mixing_theta must lie in [0, pi], got {}",
                self.mixing_theta
            ));
        }
        if let PacketMode::Eigen { sign } = self.mode {
            let (t, o) = eigen_angles(self.k0, self.mass, sign);
            if (t - self.theta0).abs() > 1e-12 || (o - self.omega0).abs() > 1e-12 {
                problems.push(format!(
                    "eigen-packet angles must be (theta, omega) = ({t}, {o}), got ({}, {})",
                    self.theta0, self.omega0
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Scale separation `1/|k0| << sigma`, reported rather than enforced.
    pub fn regime_check(&self) -> RegimeReport {
        let wavelength_over_sigma = 1.0 / (self.k0.abs() * self.sigma);
        RegimeReport {
            wavelength_over_sigma,
            sigma: self.sigma,
            satisfied: wavelength_over_sigma <= 0.1,
        }
    }

    /// `E = sqrt(k0^2 + m^2)`.
    pub fn energy(&self) -> f64 {
        self.k0.hypot(self.mass)
    }

    /// `v0 = k0 / E`.
    pub fn group_velocity(&self) -> f64 {
        self.k0 / self.energy()
    }
}

/// Outcome of [`PacketParams::regime_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub wavelength_over_sigma: f64,
    pub sigma: f64,
    pub satisfied: bool,
}

/// `f_sigma(x) = (2 pi sigma^2)^{-1/4} exp(-x^2 / (4 sigma^2))`; its square is the N(0, sigma^2) density.
#[inline]
pub fn gaussian_profile(x: f64, sigma: f64) -> f64 {
    (2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp()
}

/// Initial wave function built from validated [`PacketParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPacket {
    pub amplitude: Spinor,
    pub sigma: f64,
    pub k0: f64,
    norm: f64,
}

/// Multiples of sigma beyond which the profile is below double precision relative to its peak.
pub const SUPPORT_SIGMAS: f64 = 12.0;

impl InitialPacket {
    pub fn value(&self, s: f64) -> Spinor {
        let g = self.norm * (-s * s / (4.0 * self.sigma * self.sigma)).exp();
        self.amplitude * Complex64::from_polar(g, self.k0 * s)
    }

    /// `d/ds` of [`InitialPacket::value`].
    pub fn derivative(&self, s: f64) -> Spinor {
        let factor = Complex64::new(-s / (2.0 * self.sigma * self.sigma), self.k0);
        self.value(s) * factor
    }

    /// Radius outside of which the packet is numerically zero.
    pub fn support_radius(&self) -> f64 {
        SUPPORT_SIGMAS * self.sigma
    }
}

/// Builds `psi(s) = f_sigma(s) e^{i k0 s} chi`.
pub fn make_initial_packet(p: &PacketParams) -> Result<InitialPacket> {
    p.validate()?;
    Ok(InitialPacket {
        amplitude: p.amplitude(),
        sigma: p.sigma,
        k0: p.k0,
        norm: (2.0 * PI * p.sigma * p.sigma).powf(-0.25),
    })
}

/// `(R, Theta, Omega, Phi)` with `psi = R e^{i Phi/2} (cos(Theta/2) e^{i Omega/2}, sin(Theta/2) e^{-i Omega/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CayleyKlein {
    pub r: f64,
    pub theta: f64,
    pub omega: f64,
    pub phi: f64,
}

impl CayleyKlein {
    pub fn spinor(&self) -> Spinor {
        bloch_spinor(self.theta, self.omega) * Complex64::from_polar(self.r, 0.5 * self.phi)
    }

    pub fn bloch_vector(&self) -> [f64; 3] {
        bloch_vector(self)
    }
}

fn wrap_pm_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Cayley-Klein decomposition with `Omega` in `[-pi, pi)`.
pub fn cayley_klein(psi: Spinor) -> Result<CayleyKlein> {
    let a = psi.minus.norm();
    let b = psi.plus.norm();
    let r = a.hypot(b);
    if !(r > 0.0) {
        return Err(Error::Node);
    }
    let am = psi.minus.arg();
    let ap = psi.plus.arg();
    // the argument of a vanishing component is arbitrary; pick it so that Omega = 0
    let (am, ap) = match (a > 0.0, b > 0.0) {
        (true, true) => (am, ap),
        (true, false) => (am, am),
        (false, true) => (ap, ap),
        (false, false) => unreachable!(),
    };
    let raw = am - ap;
    let omega = wrap_pm_pi(raw);
    Ok(CayleyKlein {
        r,
        theta: 2.0 * b.atan2(a),
        omega,
        // absorb the wrap of Omega so that the rebuilt spinor keeps its sign
        phi: am + ap + (raw - omega),
    })
}

/// Unit vector `(sin T cos O, sin T sin O, cos T)` on the Bloch sphere.
pub fn bloch_vector(ck: &CayleyKlein) -> [f64; 3] {
    let (st, ct) = ck.theta.sin_cos();
    let (so, co) = ck.omega.sin_cos();
    [st * co, st * so, ct]
}

/// Bloch vector straight from the spinor components, without angles.
pub fn bloch_vector_from_spinor(psi: &Spinor) -> Option<[f64; 3]> {
    let rho = psi.density();
    if !(rho > 0.0) {
        return None;
    }
    let cross = psi.minus * psi.plus.conj();
    Some([2.0 * cross.re / rho, 2.0 * cross.im / rho, psi.current() / rho])
}

/// Local Bohmian velocity, momentum and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BohmianObservables {
    pub v: f64,
    pub p: f64,
    pub e: f64,
}

const ANGLE_EPS: f64 = 1e-12;

/// `v = cos T`, `p = m cot T sec O`, `E = m csc T sec O`.
pub fn bohmian_observables(ck: &CayleyKlein, mass: f64) -> Result<BohmianObservables> {
    let (st, ct) = ck.theta.sin_cos();
    let co = ck.omega.cos();
    if st.abs() < ANGLE_EPS {
        return Err(Error::InfiniteMomentum);
    }
    if co.abs() < ANGLE_EPS {
        return Err(Error::UndefinedSecant);
    }
    Ok(BohmianObservables {
        v: ct,
        p: mass * ct / (st * co),
        e: mass / (st * co),
    })
}

/// A square-integrable spinor field on the line, sampled pointwise.
pub trait WaveFunction: Sync {
    fn value_and_derivative(&self, s: f64) -> Result<(Spinor, Spinor)>;
    /// Interval outside of which the field is negligible.
    fn support(&self) -> (f64, f64);
    /// Shortest spatial oscillation period of `psi^dagger psi'`, if known.
    fn wavelength(&self) -> Option<f64> {
        None
    }
}

impl WaveFunction for InitialPacket {
    fn value_and_derivative(&self, s: f64) -> Result<(Spinor, Spinor)> {
        Ok((self.value(s), self.derivative(s)))
    }

    fn support(&self) -> (f64, f64) {
        // operator expectations integrate over [-10 sigma, 10 sigma] at t = 0
        let l = 10.0 * self.sigma;
        (-l, l)
    }
}

#[derive(Clone, Copy)]
struct Pair(f64, f64);

impl Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}
impl Sub for Pair {
    type Output = Pair;
    fn sub(self, o: Pair) -> Pair {
        Pair(self.0 - o.0, self.1 - o.1)
    }
}
impl Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, c: f64) -> Pair {
        Pair(self.0 * c, self.1 * c)
    }
}
impl QuadValue for Pair {
    fn zero() -> Self {
        Pair(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.0.hypot(self.1)
    }
    fn leading(&self) -> Complex64 {
        Complex64::new(self.0, self.1)
    }
}

const EXPECTATION_MAX_PANELS: usize = 1 << 14;

fn expectation<F>(psi: &dyn WaveFunction, quad_tol: f64, density: F) -> Result<f64>
where
    F: Fn(&Spinor, &Spinor) -> f64,
{
    if !(quad_tol > 0.0) {
        return Err(domain(format!("quad_tol must be > 0, got {quad_tol}")));
    }
    let (lo, hi) = psi.support();
    let cfg = QuadConfig {
        max_panels: EXPECTATION_MAX_PANELS,
        ..QuadConfig::with_tolerances(0.1 * quad_tol, 0.1 * quad_tol)
    };
    let mut failure = None;
    // integrand returns (observable density, probability density)
    let r = quadrature::integrate(
        |s| match psi.value_and_derivative(s) {
            Ok((v, d)) => Pair(density(&v, &d), v.density()),
            Err(e) => {
                failure.get_or_insert(e);
                Pair(0.0, 0.0)
            }
        },
        lo,
        hi,
        psi.wavelength(),
        &cfg,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value.0)
}

/// `<psi, P psi>` with `P = -i d/ds`.
pub fn expected_momentum(psi: &dyn WaveFunction, quad_tol: f64) -> Result<f64> {
    expectation(psi, quad_tol, |v, d| {
        (v.minus.conj() * d.minus + v.plus.conj() * d.plus).im
    })
}

/// `<psi, H psi>` with `H = ((P, m), (m, -P))`.
pub fn expected_energy(psi: &dyn WaveFunction, mass: f64, quad_tol: f64) -> Result<f64> {
    expectation(psi, quad_tol, |v, d| {
        (v.minus.conj() * d.minus).im - (v.plus.conj() * d.plus).im
            + 2.0 * mass * (v.minus.conj() * v.plus).re
    })
}

/// `<psi, psi>` over the field's support.
pub fn norm_squared(psi: &dyn WaveFunction, quad_tol: f64) -> Result<f64> {
    expectation(psi, quad_tol, |v, _| v.density())
}

/// `(1/sqrt 2)(1, 1)`: the `Theta = pi/2`, `Omega = 0` spinor.
pub fn equator_spinor() -> Spinor {
    Spinor::new(
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pure_components() {
        let ck = cayley_klein(Spinor::new(c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert_eq!(ck.r, 1.0);
        assert_eq!(ck.theta, 0.0);
        let ck = cayley_klein(Spinor::new(c(0.0, 0.0), c(0.0, 1.0))).unwrap();
        assert!((ck.r - 1.0).abs() < 1e-15);
        assert!((ck.theta - PI).abs() < 1e-15);
        assert!((ck.spinor() - Spinor::new(c(0.0, 0.0), c(0.0, 1.0))).norm() < 1e-15);
    }

    #[test]
    fn equator() {
        let ck = cayley_klein(equator_spinor()).unwrap();
        assert!((ck.theta - FRAC_PI_2).abs() < 1e-15);
        assert!(ck.omega.abs() < 1e-15);
        let n = bloch_vector(&ck);
        assert!((n[0] - 1.0).abs() < 1e-15 && n[1].abs() < 1e-15 && n[2].abs() < 1e-15);
    }

    #[test]
    fn zero_spinor_is_a_node() {
        assert!(matches!(cayley_klein(Spinor::ZERO), Err(Error::Node)));
        assert_eq!(Spinor::ZERO.velocity(), None);
    }

    #[test]
    fn bloch_named_points() {
        let ck = CayleyKlein {
            r: 1.0,
            theta: 0.0,
            omega: 0.3,
            phi: 0.0,
        };
        assert_eq!(bloch_vector(&ck), [0.0, 0.0, 1.0]);
        let ck = CayleyKlein {
            r: 1.0,
            theta: FRAC_PI_2,
            omega: FRAC_PI_2,
            phi: 0.0,
        };
        let n = bloch_vector(&ck);
        assert!(n[0].abs() < 1e-15 && (n[1] - 1.0).abs() < 1e-15 && n[2].abs() < 1e-15);
    }

    #[test]
    fn observables_at_rest_and_eigen() {
        let ck = CayleyKlein {
            r: 1.0,
            theta: FRAC_PI_2,
            omega: 0.0,
            phi: 0.0,
        };
        let o = bohmian_observables(&ck, 1.0).unwrap();
        assert!(o.v.abs() < 1e-15 && o.p.abs() < 1e-15 && (o.e - 1.0).abs() < 1e-15);

        let (k, m) = (10.0_f64, 3.0);
        let e = (k * k + m * m).sqrt();
        let (t, om) = eigen_angles(k, m, EnergySign::Positive);
        assert!((t.tan() - m / k).abs() < 1e-14);
        let o = bohmian_observables(
            &CayleyKlein {
                r: 1.0,
                theta: t,
                omega: om,
                phi: 0.0,
            },
            m,
        )
        .unwrap();
        assert!((o.p - k).abs() < 1e-12 && (o.e - e).abs() < 1e-12 && (o.v - k / e).abs() < 1e-14);

        let (t, om) = eigen_angles(k, m, EnergySign::Negative);
        let o = bohmian_observables(
            &CayleyKlein {
                r: 1.0,
                theta: t,
                omega: om,
                phi: 0.0,
            },
            m,
        )
        .unwrap();
        assert!((o.p - k).abs() < 1e-12 && (o.e + e).abs() < 1e-12 && (o.v + k / e).abs() < 1e-14);
    }

    #[test]
    fn observables_singular_angles() {
        let ck = CayleyKlein {
            r: 1.0,
            theta: 0.0,
            omega: 0.0,
            phi: 0.0,
        };
        assert!(matches!(
            bohmian_observables(&ck, 1.0),
            Err(Error::InfiniteMomentum)
        ));
        let ck = CayleyKlein {
            r: 1.0,
            theta: 1.0,
            omega: FRAC_PI_2,
            phi: 0.0,
        };
        assert!(matches!(
            bohmian_observables(&ck, 1.0),
            Err(Error::UndefinedSecant)
        ));
    }

    #[test]
    fn theta_zero_packet_has_no_lower_component() {
        let p = make_initial_packet(&PacketParams::gaussian(0.7, 2.0, 0.0, 1.0, 1.0)).unwrap();
        for i in -20..=20 {
            assert_eq!(p.value(0.3 * i as f64).plus, c(0.0, 0.0));
        }
    }

    #[test]
    fn packet_is_normalised() {
        let p = make_initial_packet(&PacketParams::gaussian(0.4, 7.0, 1.1, 2.0, 1.5)).unwrap();
        let n = norm_squared(&p, 1e-10).unwrap();
        assert!((n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigen_packet_is_a_hamiltonian_eigenvector() {
        // H chi = E chi for the plane-wave matrix ((k, m), (m, -k))
        let (k, m) = (2.5_f64, 1.3);
        let e = k.hypot(m);
        for (sign, ev) in [(EnergySign::Positive, e), (EnergySign::Negative, -e)] {
            let chi = PacketParams::eigen(1.0, k, m, sign).amplitude();
            let h_minus = chi.minus * k + chi.plus * m;
            let h_plus = chi.minus * m - chi.plus * k;
            assert!((h_minus - chi.minus * ev).norm() < 1e-13);
            assert!((h_plus - chi.plus * ev).norm() < 1e-13);
        }
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut p = PacketParams::gaussian(-1.0, 1.0, 4.0, 7.0, 0.0);
        p.mixing_theta = -1.0;
        match p.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 5),
            other => panic!("unexpected {other:?}"),
        }
        let mut e = PacketParams::eigen(1.0, 2.0, 1.0, EnergySign::Positive);
        e.theta0 += 0.1;
        assert!(e.validate().is_err());
    }

    #[test]
    fn mixed_endpoints_are_eigen_packets() {
        let (k, m) = (1.7, 0.9);
        let m0 = PacketParams::mixed(1.0, k, m, 0.0).amplitude();
        let pos = PacketParams::eigen(1.0, k, m, EnergySign::Positive).amplitude();
        assert!((m0 - pos).norm() < 1e-15);
        let mpi = PacketParams::mixed(1.0, k, m, PI).amplitude();
        let neg = PacketParams::eigen(1.0, k, m, EnergySign::Negative).amplitude();
        assert!((mpi - neg).norm() < 1e-15);
        assert!(PacketParams::mixed(1.0, k, m, 1.0).validate().is_ok());
    }

    #[test]
    fn regime_report() {
        let r = PacketParams::macroscopic(0.1, 1.0, 400.0, 0.5, 0.0).regime_check();
        assert!(r.satisfied);
        let r = PacketParams::macroscopic(0.1, 1.0, 20.0, 0.5, 0.0).regime_check();
        assert!(!r.satisfied);
    }
}
