//! Dormand-Prince 5(4) for scalar ODEs `y' = f(t, y)` with step-size control
//! and fourth-order dense output.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Fifth minus fourth order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// Outcome of a right-hand-side evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Value(f64),
    /// The step must be retried with a smaller size; carries a reason.
    Reject(String),
}

/// One accepted step with its interpolant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    coeffs: [f64; 5],
}

impl Step {
    /// Dense output at `t` in `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [c0, c1, c2, c3, c4] = self.coeffs;
        c0 + th * (c1 + th1 * (c2 + th * (c3 + th1 * c4)))
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn y1(&self) -> f64 {
        self.coeffs[0] + self.coeffs[1]
    }
}

/// A complete integration: accepted steps in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub steps: Vec<Step>,
    pub rejected: usize,
    pub evaluations: usize,
}

impl Solution {
    /// Dense output anywhere within the integrated span.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let first = self.steps.first()?;
        let last = self.steps.last()?;
        if t < first.t0 || t > last.t1() {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t1() < t);
        Some(self.steps[i.min(self.steps.len() - 1)].eval(t))
    }

    pub fn end(&self) -> Option<(f64, f64)> {
        self.steps.last().map(|s| (s.t1(), s.y1()))
    }
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t1 > t0`.
///
/// `f` may return [`Rhs::Reject`] to force a smaller step, for instance
/// where the field is undefined.
pub fn integrate<F>(mut f: F, t0: f64, y0: f64, t1: f64, cfg: &OdeConfig) -> Result<Solution>
where
    F: FnMut(f64, f64) -> Rhs,
{
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() || !y0.is_finite() {
        return Err(Error::Integrator {
            t: t0,
            reason: format!("need finite t1 > t0 and y0, got [{t0}, {t1}], y0 = {y0}"),
        });
    }
    let mut evaluations = 0usize;
    let mut eval = |t: f64, y: f64, evaluations: &mut usize| -> std::result::Result<f64, String> {
        *evaluations += 1;
        match f(t, y) {
            Rhs::Value(v) if v.is_finite() => Ok(v),
            Rhs::Value(v) => Err(format!("non-finite derivative {v}")),
            Rhs::Reject(r) => Err(r),
        }
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, y, &mut evaluations).map_err(|reason| Error::Integrator { t, reason })?;
    let mut h = cfg.h_init.min(cfg.h_max).min(t1 - t0);
    let mut steps = Vec::new();
    let mut rejected = 0usize;
    let mut last_reason = String::new();

    while t < t1 {
        if steps.len() + rejected >= cfg.max_steps {
            return Err(Error::Integrator {
                t,
                reason: "step budget exhausted".into(),
            });
        }
        if h < cfg.h_min {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow ({last_reason})"),
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let stage = |k: &[f64], a: &[f64]| y + h * a.iter().zip(k).map(|(a, k)| a * k).sum::<f64>();
        let attempt = (|| {
            let mut k = [k1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            k[1] = eval(t + C[1] * h, stage(&k[..1], &A2), &mut evaluations)?;
            k[2] = eval(t + C[2] * h, stage(&k[..2], &A3), &mut evaluations)?;
            k[3] = eval(t + C[3] * h, stage(&k[..3], &A4), &mut evaluations)?;
            k[4] = eval(t + C[4] * h, stage(&k[..4], &A5), &mut evaluations)?;
            k[5] = eval(t + C[5] * h, stage(&k[..5], &A6), &mut evaluations)?;
            let y_new = stage(&k[..6], &B[..6]);
            let tn = if last { t1 } else { t + h };
            k[6] = eval(tn, y_new, &mut evaluations)?;
            Ok::<_, String>((k, y_new))
        })();
        let (k, y_new) = match attempt {
            Ok(v) => v,
            Err(reason) => {
                last_reason = reason;
                rejected += 1;
                h *= 0.25;
                continue;
            }
        };
        let err = h * E.iter().zip(&k).map(|(e, k)| e * k).sum::<f64>();
        let scale = cfg.abs_tol + cfg.rel_tol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();
        if ratio <= 1.0 {
            let ydiff = y_new - y;
            let c2 = h * k[0] - ydiff;
            let c3 = ydiff - h * k[6] - c2;
            let c4 = h * D.iter().zip(&k).map(|(d, k)| d * k).sum::<f64>();
            steps.push(Step {
                t0: t,
                h,
                coeffs: [y, ydiff, c2, c3, c4],
            });
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k[6];
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(cfg.h_max);
        } else {
            rejected += 1;
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(Solution {
        steps,
        rejected,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_consistency() {
        for (i, row) in [&A2[..], &A3, &A4, &A5, &A6].iter().enumerate() {
            let s: f64 = row.iter().sum();
            assert!((s - C[i + 1]).abs() < 1e-14);
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(E.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn exponential_growth() {
        let sol = integrate(|_, y| Rhs::Value(y), 0.0, 1.0, 2.0, &OdeConfig::default()).unwrap();
        let (t, y) = sol.end().unwrap();
        assert_eq!(t, 2.0);
        assert!((y - 2f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_accurate() {
        let sol = integrate(|t, _| Rhs::Value(t.cos()), 0.0, 0.0, 10.0, &OdeConfig::default()).unwrap();
        for i in 0..=200 {
            let t = 0.05 * i as f64;
            assert!((sol.eval(t).unwrap() - t.sin()).abs() < 1e-8, "t = {t}");
        }
        assert!(sol.eval(10.5).is_none());
    }

    #[test]
    fn rejection_shrinks_step() {
        // derivative undefined for t in (0.5, 0.5 + 1e-9); the solver must step around it
        let sol = integrate(
            |t, _| {
                if t > 0.5 && t < 0.5 + 1e-9 {
                    Rhs::Reject("hole".into())
                } else {
                    Rhs::Value(1.0)
                }
            },
            0.0,
            0.0,
            1.0,
            &OdeConfig {
                h_init: 0.3,
                ..OdeConfig::default()
            },
        );
        match sol {
            Ok(s) => assert!((s.end().unwrap().1 - 1.0).abs() < 1e-12),
            Err(Error::Integrator { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn bad_interval() {
        assert!(integrate(|_, _| Rhs::Value(0.0), 1.0, 0.0, 0.0, &OdeConfig::default()).is_err());
    }
}
