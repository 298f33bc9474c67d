//! Globally adaptive Gauss-Kronrod (G15/K31) quadrature.
//!
//! Integrands may be real, complex or spinor valued; anything implementing
//! [`QuadValue`] works. The initial mesh honours an optional oscillation
//! wavelength so that no panel starts out under-sampled.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Minimum number of Kronrod nodes per oscillation wavelength on the initial mesh.
    pub oscillation_guard: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_panels: 1 << 20,
            oscillation_guard: 8.0,
        }
    }
}

impl QuadConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.rel_tol > 0.0) {
            problems.push(format!("rel_tol must be > 0, got {}", self.rel_tol));
        }
        if !(self.abs_tol > 0.0) {
            problems.push(format!("abs_tol must be > 0, got {}", self.abs_tol));
        }
        if self.max_panels == 0 {
            problems.push("max_panels must be positive".to_string());
        }
        if !(self.oscillation_guard >= 4.0) {
            problems.push(format!(
                "oscillation_guard must be >= 4, got {}",
                self.oscillation_guard
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Values that can be integrated: a real vector space with a norm.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    /// Used only to report partial results in errors.
    fn leading(&self) -> Complex64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn leading(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn leading(&self) -> Complex64 {
        *self
    }
}

/// Integral estimate with bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub err_est: f64,
    pub panels: usize,
    pub evaluations: usize,
}

const XGK: [f64; 16] = [
    0.0,
    0.101_142_066_918_717_499_027_074_231_447_392,
    0.201_194_093_997_434_522_300_628_303_394_596,
    0.299_180_007_153_168_812_166_780_024_266_389,
    0.394_151_347_077_563_369_897_207_370_981_045,
    0.485_081_863_640_239_680_693_655_740_232_351,
    0.570_972_172_608_538_847_537_226_737_253_911,
    0.650_996_741_297_416_970_533_735_895_313_275,
    0.724_417_731_360_170_047_416_186_054_613_938,
    0.790_418_501_442_465_932_967_649_294_817_947,
    0.848_206_583_410_427_216_200_648_320_774_217,
    0.897_264_532_344_081_900_882_509_656_454_496,
    0.937_273_392_400_705_904_307_758_947_710_209,
    0.967_739_075_679_139_134_257_347_978_784_337,
    0.987_992_518_020_485_428_489_565_718_586_613,
    0.998_002_298_693_397_060_285_172_840_152_271,
];

const WGK: [f64; 16] = [
    0.101_330_007_014_791_549_017_374_792_767_492,
    0.100_769_845_523_875_595_044_946_662_617_569,
    0.099_173_598_721_791_959_332_393_173_484_603,
    0.096_642_726_983_623_678_505_179_907_627_589,
    0.093_126_598_170_825_321_225_486_872_747_345,
    0.088_564_443_056_211_770_647_275_443_693_774,
    0.083_080_502_823_133_021_038_289_247_286_103,
    0.076_849_680_757_720_378_894_432_777_482_659,
    0.069_854_121_318_728_258_709_520_077_099_147,
    0.062_009_567_800_670_640_285_139_230_960_802,
    0.053_481_524_690_928_087_265_343_147_239_430,
    0.044_589_751_324_764_876_608_227_299_373_279,
    0.035_346_360_791_375_846_222_037_948_478_360,
    0.025_460_847_326_715_320_186_874_001_019_653,
    0.015_007_947_329_316_122_538_374_763_075_807,
    0.005_377_479_872_923_348_987_792_051_430_127,
];

/// Gauss weights for the even-indexed Kronrod nodes.
const WG: [f64; 8] = [
    0.202_578_241_925_561_272_880_620_199_967_519,
    0.198_431_485_327_111_576_456_118_326_443_839,
    0.186_161_000_015_562_211_026_800_561_866_423,
    0.166_269_205_816_993_933_553_200_860_481_209,
    0.139_570_677_926_154_314_447_804_794_511_028,
    0.107_159_220_467_171_935_011_869_546_685_869,
    0.070_366_047_488_108_124_709_267_416_450_667,
    0.030_753_241_996_117_268_354_628_393_577_204,
];

pub const NODES_PER_PANEL: usize = 31;

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One G15/K31 panel: returns the Kronrod value and a QUADPACK-style error estimate.
pub fn gk31<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [T::zero(); 31];
    fv[0] = f(center);
    for j in 1..16 {
        let dx = half * XGK[j];
        fv[2 * j - 1] = f(center - dx);
        fv[2 * j] = f(center + dx);
    }
    let mut kron = fv[0] * WGK[0];
    let mut gauss = fv[0] * WG[0];
    let mut res_abs = WGK[0] * fv[0].magnitude();
    for j in 1..16 {
        let pair = fv[2 * j - 1] + fv[2 * j];
        kron = kron + pair * WGK[j];
        if j % 2 == 0 {
            gauss = gauss + pair * WG[j / 2];
        }
        res_abs += WGK[j] * (fv[2 * j - 1].magnitude() + fv[2 * j].magnitude());
    }
    let mean = kron * 0.5;
    let mut res_asc = WGK[0] * (fv[0] - mean).magnitude();
    for j in 1..16 {
        res_asc += WGK[j] * ((fv[2 * j - 1] - mean).magnitude() + (fv[2 * j] - mean).magnitude());
    }
    let scale = half.abs();
    res_abs *= scale;
    res_asc *= scale;
    let mut err = (kron - gauss).magnitude() * scale;
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (kron * half, err)
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// `wavelength`, when given, is the shortest oscillation period of the
/// integrand; the initial mesh places at least `oscillation_guard` nodes in
/// each period.
pub fn integrate<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    wavelength: Option<f64>,
    cfg: &QuadConfig,
) -> Result<Quadrature<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite: [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            err_est: 0.0,
            panels: 0,
            evaluations: 0,
        });
    }
    let width = b - a;
    let mut n0 = 1usize;
    if let Some(w) = wavelength {
        if w.is_finite() && w > 0.0 {
            let cap = w * NODES_PER_PANEL as f64 / cfg.oscillation_guard;
            n0 = ((width.abs() / cap).ceil() as usize).max(1);
        }
    }
    if n0 > cfg.max_panels {
        return Err(Error::Integration {
            partial: Complex64::new(f64::NAN, f64::NAN),
            residual: f64::INFINITY,
            panels: n0,
        });
    }

    let mut heap = BinaryHeap::with_capacity(2 * n0 + 16);
    let mut total = T::zero();
    let mut total_err = 0.0;
    let mut evaluations = 0usize;
    let step = width / n0 as f64;
    for i in 0..n0 {
        let pa = a + step * i as f64;
        let pb = if i + 1 == n0 { b } else { a + step * (i + 1) as f64 };
        let (value, err) = gk31(&mut f, pa, pb);
        evaluations += NODES_PER_PANEL;
        total = total + value;
        total_err += err;
        heap.push(Panel {
            a: pa,
            b: pb,
            value,
            err,
        });
    }

    let tolerance = |total: &T| cfg.abs_tol.max(cfg.rel_tol * total.magnitude());
    loop {
        if total_err <= tolerance(&total) {
            // re-sum to shed drift from the incremental updates
            let (t, e) = resum(&heap);
            total = t;
            total_err = e;
            if total_err <= tolerance(&total) {
                break;
            }
        }
        if heap.len() >= cfg.max_panels {
            return Err(Error::Integration {
                partial: total.leading(),
                residual: total_err,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
            return Err(Error::Integration {
                partial: total.leading(),
                residual: total_err,
                panels: heap.len() + 1,
            });
        }
        let (v1, e1) = gk31(&mut f, worst.a, mid);
        let (v2, e2) = gk31(&mut f, mid, worst.b);
        evaluations += 2 * NODES_PER_PANEL;
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }

    Ok(Quadrature {
        value: total,
        err_est: total_err,
        panels: heap.len(),
        evaluations,
    })
}

fn resum<T: QuadValue>(heap: &BinaryHeap<Panel<T>>) -> (T, f64) {
    let mut panels: Vec<&Panel<T>> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut total = T::zero();
    let mut err = 0.0;
    for p in panels {
        total = total + p.value;
        err += p.err;
    }
    (total, err)
}

/// Periodic trapezoid rule over one period `[lo, lo + period)`, doubling the
/// node count until successive estimates agree to `tol`.
pub fn periodic_trapezoid<T, F>(
    mut f: F,
    lo: f64,
    period: f64,
    min_nodes: usize,
    tol: f64,
) -> Result<Quadrature<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let mut n = min_nodes.max(8);
    let mut sum = T::zero();
    for k in 0..n {
        sum = sum + f(lo + period * k as f64 / n as f64);
    }
    let mut evaluations = n;
    let mut estimate = sum * (period / n as f64);
    for _ in 0..20 {
        // add the midpoints of the current grid
        let h = period / n as f64;
        for k in 0..n {
            sum = sum + f(lo + h * (k as f64 + 0.5));
        }
        evaluations += n;
        n *= 2;
        let refined = sum * (period / n as f64);
        let change = (refined - estimate).magnitude();
        estimate = refined;
        if change <= tol {
            return Ok(Quadrature {
                value: estimate,
                err_est: change,
                panels: n,
                evaluations,
            });
        }
    }
    Err(Error::Integration {
        partial: estimate.leading(),
        residual: f64::NAN,
        panels: n,
    })
}
