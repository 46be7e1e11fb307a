//! Adaptive Dormand–Prince 5(4) stepping for complex first-order systems
//! `y' = f(z, y)`.
//!
//! The stepper is driven one accepted step at a time so that callers can
//! inspect (and re-chart) the state between steps.

use crate::{Error, Result, C64};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Reusable Dormand–Prince workspace for systems of a fixed dimension.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    tol: Tolerances,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    stage: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        let zeros = || vec![C64::new(0.0, 0.0); dim];
        Dopri5 {
            tol,
            h: None,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            stage: zeros(),
            y_new: zeros(),
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    /// Forget the cached first stage; call after modifying `y` externally.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    pub fn suggested_step(&self) -> Option<f64> {
        self.h
    }

    pub fn set_step(&mut self, h: f64) {
        self.h = Some(h);
    }

    /// Takes one accepted step from `z` toward `z_max` (never beyond it),
    /// updating `z` and `y` in place.
    pub fn advance<F>(&mut self, f: &mut F, z: &mut f64, y: &mut [C64], z_max: f64) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let span = z_max - *z;
        if span <= 0.0 {
            return Ok(());
        }
        if !self.fsal_valid {
            f(*z, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(f, *z, y, span),
        };
        let h_min = 1e-14 * z.abs().max(1.0);
        loop {
            let last = h >= span;
            let h_try = if last { span } else { h };
            if h_try < h_min && !last {
                return Err(Error::StepSizeUnderflow { z: *z, h: h_try });
            }
            let err = self.trial(f, *z, y, h_try);
            if err.is_finite() && err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                *z = if last { z_max } else { *z + h_try };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                // A step clipped to the target keeps the unclipped suggestion.
                self.h = Some(if last { h } else { h_try * factor });
                return Ok(());
            }
            self.stats.rejected += 1;
            let factor = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h = h_try * factor;
        }
    }

    /// Integrates to exactly `z_end`.
    pub fn integrate_to<F>(&mut self, f: &mut F, z: &mut f64, y: &mut [C64], z_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        while *z < z_end {
            self.advance(f, z, y, z_end)?;
        }
        Ok(())
    }

    fn initial_step<F>(&mut self, f: &mut F, z: f64, y: &[C64], span: f64) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let Tolerances { rtol, atol } = self.tol;
        let scale = |v: &C64| atol + rtol * v.norm();
        let d0 = rms(y.iter().map(|v| v.norm() / scale(v)));
        let d1 = rms(y.iter().zip(&self.k[0]).map(|(v, d)| d.norm() / scale(v)));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for (s, (yi, ki)) in self.stage.iter_mut().zip(y.iter().zip(&self.k[0])) {
            *s = yi + ki * h0;
        }
        f(z + h0, &self.stage, &mut self.k[1]);
        self.stats.evaluations += 1;
        let d2 = rms(
            y.iter()
                .zip(self.k[1].iter().zip(&self.k[0]))
                .map(|(v, (a, b))| (a - b).norm() / scale(v)),
        ) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    fn trial<F>(&mut self, f: &mut F, z: f64, y: &[C64], h: f64) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($a:expr, $i:expr)),*]) => {{
                for j in 0..n {
                    let mut acc = y[j];
                    $( acc += self.k[$i][j] * (h * $a); )*
                    self.stage[j] = acc;
                }
                f(z + $c * h, &self.stage, &mut self.k[$dst]);
                self.stats.evaluations += 1;
            }};
        }
        stage!(1, C2, [(A21, 0)]);
        stage!(2, C3, [(A31, 0), (A32, 1)]);
        stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
        stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
        stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            self.y_new[j] = y[j]
                + (self.k[0][j] * A71
                    + self.k[2][j] * A73
                    + self.k[3][j] * A74
                    + self.k[4][j] * A75
                    + self.k[5][j] * A76)
                    * h;
        }
        f(z + h, &self.y_new, &mut self.k[6]);
        self.stats.evaluations += 1;

        let Tolerances { rtol, atol } = self.tol;
        let mut sum = 0.0;
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            let e = (self.k[0][j] * E1
                + self.k[2][j] * E3
                + self.k[3][j] * E4
                + self.k[4][j] * E5
                + self.k[5][j] * E6
                + self.k[6][j] * E7)
                * h;
            let sc = atol + rtol * y[j].norm().max(self.y_new[j].norm());
            let r = e.norm() / sc;
            sum += r * r;
        }
        let err = (sum / n.max(1) as f64).sqrt();
        if self.y_new.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            f64::INFINITY
        } else {
            err
        }
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_and_rotation() {
        let lambda = C64::new(0.3, 2.0);
        let mut f = |_z: f64, y: &[C64], dy: &mut [C64]| dy[0] = lambda * y[0];
        let mut stepper = Dopri5::new(1, Tolerances { rtol: 1e-12, atol: 1e-14 });
        let mut z = 0.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        stepper.integrate_to(&mut f, &mut z, &mut y, 5.0).unwrap();
        assert_eq!(z, 5.0);
        let exact = (lambda * 5.0).exp();
        assert!((y[0] - exact).norm() < 1e-10 * exact.norm());
    }

    #[test]
    fn hits_intermediate_targets_exactly() {
        let mut f = |z: f64, _y: &[C64], dy: &mut [C64]| dy[0] = C64::new(z.cos(), 0.0);
        let mut stepper = Dopri5::new(1, Tolerances::default());
        let mut z = 0.0;
        let mut y = vec![C64::new(0.0, 0.0)];
        for k in 1..=10 {
            let target = 0.37 * k as f64;
            stepper.integrate_to(&mut f, &mut z, &mut y, target).unwrap();
            assert_eq!(z, target);
            assert!((y[0].re - target.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_time_blowup_reports_underflow() {
        // y' = y², y(0) = 1 has a pole at z = 1.
        let mut f = |_z: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * y[0];
        let mut stepper = Dopri5::new(1, Tolerances::default());
        let mut z = 0.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let err = stepper.integrate_to(&mut f, &mut z, &mut y, 2.0).unwrap_err();
        match err {
            Error::StepSizeUnderflow { z, .. } => assert!((z - 1.0).abs() < 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
