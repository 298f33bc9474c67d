use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use dirac_bohm::ode::{self, OdeConfig, Rhs};
use dirac_bohm::packets::{
    bloch_vector, bloch_vector_from_spinor, bohmian_observables, cayley_klein, expected_energy,
    expected_momentum, make_initial_packet, norm_squared, EnergySign,
};
use dirac_bohm::quadrature::{integrate, QuadConfig};
use dirac_bohm::spa::{
    phase_diagnostics, phase_function, phase_gradient, spa_assembled, spa_evaluate, transport_beta, SpaParams,
};
use dirac_bohm::specfun::{bessel_j0, bessel_j1, j0_j1};
use dirac_bohm::trajectories::{barrier_curves, integrate_trajectory, SpaField, TrajectoryConfig};
use dirac_bohm::{PacketParams, Spinor};

fn spinor() -> impl Strategy<Value = Spinor> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-6)
        .prop_map(|(a, b, c, d)| Spinor::new(Complex64::new(a, b), Complex64::new(c, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bessel_parity(x in -200.0..200.0f64) {
        prop_assert_eq!(bessel_j0(-x).unwrap(), bessel_j0(x).unwrap());
        prop_assert_eq!(bessel_j1(-x).unwrap(), -bessel_j1(x).unwrap());
    }

    #[test]
    fn bessel_derivative_identities(x in 0.5..60.0f64) {
        let h = 1e-5;
        let (j0p, j1p) = j0_j1(x + h);
        let (j0m, j1m) = j0_j1(x - h);
        let (j0, j1) = j0_j1(x);
        // J0' = -J1 and (x J1)' = x J0
        prop_assert!(((j0p - j0m) / (2.0 * h) + j1).abs() < 1e-8);
        prop_assert!((((x + h) * j1p - (x - h) * j1m) / (2.0 * h) - x * j0).abs() < 1e-7);
    }

    #[test]
    fn cayley_klein_round_trip(psi in spinor()) {
        let ck = cayley_klein(psi).unwrap();
        prop_assert!((ck.spinor() - psi).norm() < 1e-12 * psi.norm().max(1.0));
        prop_assert!((0.0..=PI).contains(&ck.theta));
        prop_assert!((-PI..PI).contains(&ck.omega));
        let n = bloch_vector(&ck);
        prop_assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) - 1.0).abs() < 1e-12);
        let direct = bloch_vector_from_spinor(&psi).unwrap();
        for k in 0..3 {
            prop_assert!((n[k] - direct[k]).abs() < 1e-12);
        }
        prop_assert!((psi.velocity().unwrap() - ck.theta.cos()).abs() < 1e-12);
        prop_assert!(psi.velocity().unwrap().abs() <= 1.0);
    }

    #[test]
    fn observables_identity(theta in 0.05..3.09f64, omega in -1.4..1.4f64, m in 0.1..5.0f64) {
        let ck = dirac_bohm::CayleyKlein { r: 1.0, theta, omega, phi: 0.0 };
        let o = bohmian_observables(&ck, m).unwrap();
        let sec = 1.0 / omega.cos();
        let lhs = o.e * o.e - o.p * o.p;
        let rhs = m * m * (1.0 / (theta.sin() * theta.sin()) - 1.0 / (theta.tan() * theta.tan())) * sec * sec;
        prop_assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn beta_is_monotone_and_in_range(a in 0.01..0.99f64, b in 0.01..0.99f64, wt in 1.3..80.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let bl = transport_beta(lo, wt).unwrap();
        let bh = transport_beta(hi, wt).unwrap();
        let upper = dirac_bohm::specfun::J0_FIRST_ZERO.powi(2) / (4.0 * wt * wt);
        prop_assert!(bl <= bh);
        prop_assert!(bl > 0.0 && bh < upper);
    }

    #[test]
    fn gradient_vanishes_at_critical_points(p0 in prop_oneof![-4.0..-0.1f64, 0.1..4.0f64], t in 0.1..3.0f64) {
        let d = phase_diagnostics(p0).unwrap();
        for y in [d.y_plus, d.y_minus] {
            let g = phase_gradient(0.0, y, t, p0);
            prop_assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
            let h = 1e-6;
            let fd = (phase_function(0.0, y + h, t, 0.3, p0) - phase_function(0.0, y - h, t, 0.3, p0)) / (2.0 * h);
            prop_assert!(fd.abs() < 1e-8);
        }
        prop_assert_eq!((d.sig_plus, d.sig_minus), (2, -2));
    }

    #[test]
    fn assembled_spa_matches(p0 in prop_oneof![-3.0..-0.2f64, 0.2..3.0f64], vt in 0.0..PI, az in 0.0..TAU, s in -1.0..1.0f64) {
        let p = SpaParams { p0, sigma: 0.15, omega: 60.0, vartheta: vt, azimuth: az };
        let a = spa_assembled(1.0, s, &p).unwrap();
        let b = spa_evaluate(1.0, s, &p).unwrap().u;
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn barrier_constant_order(theta in 0.01..1.56f64) {
        let b = barrier_curves(theta).unwrap();
        prop_assert!(b.c_minus < 0.0);
        prop_assert!(b.c_plus.abs() < -b.c_minus);
    }

    #[test]
    fn polynomial_integrals(c in proptest::collection::vec(-5.0..5.0f64, 1..12), a in -3.0..0.0f64, b in 0.0..3.0f64) {
        let poly = |x: f64| c.iter().rev().fold(0.0, |acc, k| acc * x + k);
        let anti = |x: f64| c.iter().enumerate().map(|(i, k)| k * x.powi(i as i32 + 1) / (i as f64 + 1.0)).sum::<f64>();
        let r = integrate(poly, a, b, None, &QuadConfig::default()).unwrap();
        prop_assert!((r.value - (anti(b) - anti(a))).abs() < 1e-9 * (1.0 + (anti(b) - anti(a)).abs()));
    }

    #[test]
    fn ode_linear_decay(y0 in -10.0..10.0f64, k in 0.1..3.0f64) {
        let sol = ode::integrate(|_, y| Rhs::Value(-k * y), 0.0, y0, 3.0, &OdeConfig::default()).unwrap();
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            prop_assert!((sol.eval(t).unwrap() - y0 * (-k * t).exp()).abs() < 1e-8 * (1.0 + y0.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn initial_expectations(sigma in 0.3..2.0f64, k0 in -5.0..5.0f64, theta in 0.0..PI, omega in 0.0..TAU, m in 0.2..4.0f64) {
        let p = PacketParams::gaussian(sigma, k0, theta, omega, m);
        let psi = make_initial_packet(&p).unwrap();
        assert_abs_diff_eq!(norm_squared(&psi, 1e-10).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(expected_momentum(&psi, 1e-9).unwrap(), k0, epsilon = 1e-8);
        let e = k0 * theta.cos() + m * theta.sin() * omega.cos();
        assert_abs_diff_eq!(expected_energy(&psi, m, 1e-9).unwrap(), e, epsilon = 1e-8);
    }

    #[test]
    fn eigen_packet_energy(k in -4.0..4.0f64, m in 0.3..3.0f64) {
        // a wide packet approaches the plane-wave energy
        for (sign, e) in [(EnergySign::Positive, k.hypot(m)), (EnergySign::Negative, -k.hypot(m))] {
            let p = PacketParams::eigen(30.0, k, m, sign);
            let psi = make_initial_packet(&p).unwrap();
            let h = expected_energy(&psi, m, 1e-10).unwrap();
            prop_assert!((h - e).abs() < 2e-3, "{h} vs {e}");
        }
    }

    #[test]
    fn spa_trajectories_do_not_cross(a in -2.0..2.0f64, gap in 0.01..0.5f64) {
        let f = SpaField::new(SpaParams::new(10.0 / 3.0, 1.0, 3.0, PI / 2.0)).unwrap();
        let cfg = TrajectoryConfig::default();
        let lo = integrate_trajectory(a, (0.0, 4.0), &f, &cfg).unwrap();
        let hi = integrate_trajectory(a + gap, (0.0, 4.0), &f, &cfg).unwrap();
        for &t in lo.times.iter().chain(&hi.times) {
            prop_assert!(lo.position_at(t).unwrap() < hi.position_at(t).unwrap() + 1e-6);
        }
        for w in lo.times.windows(2).zip(lo.positions.windows(2)) {
            let (ts, qs) = w;
            prop_assert!((qs[1] - qs[0]).abs() <= ts[1] - ts[0] + 1e-9);
        }
    }
}
