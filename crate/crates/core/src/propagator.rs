//! Propagators of `∂z U = i M1(z) U`, `U(0) = 1`.
//!
//! The primary route integrates the eight normal-ordered factor parameters
//! `υ_X(z)` of
//!
//! ```text
//! U = e^{iυ I+} e^{iυ U+} e^{iυ V+} e^{iυ I0} e^{iυ Y} e^{iυ V-} e^{iυ U-} e^{iυ I-}
//! ```
//!
//! whose equations form a triangular hierarchy: a coupled Riccati pair for
//! `(υ_I+, υ_V+)`, a scalar Riccati equation for `υ_U+` and plain quadratures
//! for the rest. Riccati solutions may diverge at finite `z`, which only
//! signals the edge of the coordinate chart: the integrator then folds the
//! current factor product into a base matrix and restarts from zero
//! coordinates, `U(z) = U_chart(z)·U(z_restart)`.

use std::cell::Cell;

use crate::algebra::{
    exp_generator, frobenius, gauge_phase, is_finite, normal_order_factors, traceless_part,
    Coupling, GeneratorLabel,
};
use crate::ode::{Dopri5, StepStats, Tolerances};
use crate::spectral::{
    classify, invariants, local_frame, local_frame_ordered, track_branches, Regime,
    TrackingOptions, DEFAULT_EP_EPS,
};
use crate::{ComplexMatrix, Error, FieldVector, Result, C64};

/// Parameters `υ_X` of the normal-ordered propagator, stored in factor order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeiNormanCoords {
    pub v_ip: C64,
    pub v_up: C64,
    pub v_vp: C64,
    pub v_i0: C64,
    pub v_y: C64,
    pub v_vm: C64,
    pub v_um: C64,
    pub v_im: C64,
}

impl WeiNormanCoords {
    /// Values in the order of [`GeneratorLabel::NORMAL_ORDER`].
    pub fn to_array(&self) -> [C64; 8] {
        [
            self.v_ip, self.v_up, self.v_vp, self.v_i0, self.v_y, self.v_vm, self.v_um, self.v_im,
        ]
    }

    pub fn from_array(a: [C64; 8]) -> Self {
        WeiNormanCoords {
            v_ip: a[0],
            v_up: a[1],
            v_vp: a[2],
            v_i0: a[3],
            v_y: a[4],
            v_vm: a[5],
            v_um: a[6],
            v_im: a[7],
        }
    }

    fn from_slice(s: &[C64]) -> Self {
        Self::from_array([s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]])
    }

    pub fn get(&self, label: GeneratorLabel) -> C64 {
        let k = GeneratorLabel::NORMAL_ORDER
            .iter()
            .position(|g| *g == label)
            .expect("every label has a factor");
        self.to_array()[k]
    }
}

/// Right-hand side of the factor-parameter hierarchy for the traceless
/// coupling `mu` (entries `μ_jk`; `μ33 = −μ11 − μ22` is implied).
pub fn wei_norman_rhs(v: &WeiNormanCoords, mu: &ComplexMatrix) -> WeiNormanCoords {
    let i = C64::i();
    let (m11, m12, m13) = (mu[(0, 0)], mu[(0, 1)], mu[(0, 2)]);
    let (m21, m22, m23) = (mu[(1, 0)], mu[(1, 1)], mu[(1, 2)]);
    let (m31, m32) = (mu[(2, 0)], mu[(2, 1)]);
    let (v1, v2, v3) = (v.v_ip, v.v_up, v.v_vp);
    let (v4, v5, v7) = (v.v_i0, v.v_y, v.v_um);

    // Riccati pair.
    let d_ip = m12 + m21 * v1 * v1 - i * m32 * v3 + v1 * (i * m11 - i * m22 + m31 * v3);
    let d_vp = m13 + m31 * v3 * v3 + v1 * (m21 * v3 - i * m23) + v3 * (2.0 * i * m11 + i * m22);
    // Scalar Riccati equation driven by the pair.
    let d_up = i * m21 * v3
        + m23
        + m32 * v2 * v2
        + v1 * (-m21 * v2 + i * m31 * v2 * v2)
        + v2 * (i * m11 + 2.0 * i * m22 + m31 * v3);
    // Quadratures.
    let d_i0 = m11 - m22 - 2.0 * i * m21 * v1 - m31 * v1 * v2 - i * m31 * v3 + i * m32 * v2;
    let d_y = 1.5 * (m11 + m22 + m31 * v1 * v2 - i * m31 * v3 - i * m32 * v2);
    let e_i0 = (i * v4).exp();
    let d_vm = -i * m21 * v7 * e_i0 - m31 * v2 * v7 * e_i0 + m31 * (i * (v4 / 2.0 + v5)).exp();
    let d_um = (i * m31 * v1 + m32) * (i * (-v4 / 2.0 + v5)).exp();
    let d_im = (m21 - i * m31 * v2) * e_i0;

    WeiNormanCoords {
        v_ip: d_ip,
        v_up: d_up,
        v_vp: d_vp,
        v_i0: d_i0,
        v_y: d_y,
        v_vm: d_vm,
        v_um: d_um,
        v_im: d_im,
    }
}

/// Ordered product of the eight factor exponentials.
pub fn reconstruct_u(v: &WeiNormanCoords) -> ComplexMatrix {
    GeneratorLabel::NORMAL_ORDER
        .iter()
        .zip(v.to_array())
        .fold(ComplexMatrix::identity(), |acc, (g, a)| acc * exp_generator(*g, a))
}

/// Factor parameters of a unimodular matrix, if it lies in the chart (all
/// trailing principal minors nonzero).
pub fn wei_norman_coords_of(u: &ComplexMatrix) -> Option<WeiNormanCoords> {
    use crate::algebra::{lower_ladder_parameters, upper_ladder_parameters};
    let f = normal_order_factors(u, 1e-14)?;
    let [ip, up, vp] = upper_ladder_parameters(&f.upper);
    let [vm, um, im] = lower_ladder_parameters(&f.lower);
    let [d1, d2, _] = f.diagonal;
    let (l1, l2) = (d1.ln(), d2.ln());
    let mi = -C64::i();
    Some(WeiNormanCoords::from_array([
        ip,
        up,
        vp,
        mi * (l1 - l2),
        mi * 1.5 * (l1 + l2),
        vm,
        um,
        im,
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub tol: Tolerances,
    /// Coordinate magnitude above which the chart is restarted.
    pub chart_limit: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            tol: Tolerances::default(),
            chart_limit: 10.0,
        }
    }
}

impl PropagationOptions {
    pub fn with_tol(rtol: f64) -> Self {
        PropagationOptions {
            tol: Tolerances {
                rtol,
                atol: rtol * 1e-2,
            },
            ..Default::default()
        }
    }
}

/// A chart restart: the coordinate that left the chart and where.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartEvent {
    pub z: f64,
    pub variable: GeneratorLabel,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub z_samples: Vec<f64>,
    /// Chart-local coordinates; `u[k] = reconstruct_u(coords[k])·base[k]`.
    pub coords: Vec<WeiNormanCoords>,
    pub base: Vec<ComplexMatrix>,
    pub u: Vec<ComplexMatrix>,
    pub blowup_events: Vec<ChartEvent>,
    pub stats: StepStats,
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.iter().any(|z| !z.is_finite() || *z < 0.0) || samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "sample points must be finite, non-negative and non-decreasing".into(),
        ));
    }
    Ok(())
}

/// `n` equally spaced points on `[0, z_end]`, both ends included.
pub fn uniform_samples(z_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![z_end],
        _ => (0..n).map(|k| z_end * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Keeps the first failure raised inside an ODE right-hand side.
fn record(slot: &Cell<Option<Error>>, e: Error) {
    let prev = slot.take();
    slot.set(Some(prev.unwrap_or(e)));
}

fn coupling_at<F: Coupling + ?Sized>(family: &F, z: f64) -> Result<ComplexMatrix> {
    let m = family.matrix_at(z);
    if !is_finite(&m) {
        return Err(Error::NonFinite {
            what: "coupling matrix",
            z,
        });
    }
    Ok(traceless_part(&m))
}

/// Integrates the factor-parameter hierarchy from `z = 0` and reports `U` at
/// each sample point.
pub fn integrate_wei_norman<F: Coupling + ?Sized>(
    family: &F,
    samples: &[f64],
    opts: &PropagationOptions,
) -> Result<PropagationResult> {
    check_samples(samples)?;
    let mut stepper = Dopri5::new(8, opts.tol);
    let mut y = [C64::new(0.0, 0.0); 8];
    let mut base = ComplexMatrix::identity();
    let mut z = 0.0;
    let failure: Cell<Option<Error>> = Cell::new(None);
    let mut rhs = |zz: f64, s: &[C64], ds: &mut [C64]| {
        let m = family.matrix_at(zz);
        if !is_finite(&m) {
            record(&failure, Error::NonFinite {
                what: "coupling matrix",
                z: zz,
            });
            ds.fill(C64::new(f64::NAN, 0.0));
            return;
        }
        let d = wei_norman_rhs(&WeiNormanCoords::from_slice(s), &traceless_part(&m));
        ds.copy_from_slice(&d.to_array());
    };

    let mut out = PropagationResult {
        z_samples: samples.to_vec(),
        coords: Vec::with_capacity(samples.len()),
        base: Vec::with_capacity(samples.len()),
        u: Vec::with_capacity(samples.len()),
        blowup_events: Vec::new(),
        stats: StepStats::default(),
    };
    let restart = |z: f64, y: &mut [C64; 8], base: &mut ComplexMatrix, events: &mut Vec<ChartEvent>| {
        let v = WeiNormanCoords::from_slice(y);
        let (k, magnitude) = y
            .iter()
            .map(|c| c.norm())
            .enumerate()
            .fold((0, 0.0), |acc, (k, m)| if m > acc.1 { (k, m) } else { acc });
        *base = reconstruct_u(&v) * *base;
        *y = [C64::new(0.0, 0.0); 8];
        events.push(ChartEvent {
            z,
            variable: GeneratorLabel::NORMAL_ORDER[k],
            magnitude,
        });
    };
    for &target in samples {
        while z < target {
            let before = z;
            match stepper.advance(&mut rhs, &mut z, &mut y, target) {
                Ok(()) => {}
                Err(Error::StepSizeUnderflow { .. }) if y.iter().any(|c| c.norm() > 1.0) => {
                    // A Riccati pole between accepted steps: restart the chart
                    // at the last good point and retry.
                    restart(z, &mut y, &mut base, &mut out.blowup_events);
                    stepper.invalidate();
                    continue;
                }
                Err(e) => return Err(failure.take().unwrap_or(e)),
            }
            if let Some(e) = failure.take() {
                return Err(e);
            }
            let finite = y.iter().all(|c| c.re.is_finite() && c.im.is_finite());
            if !finite {
                return Err(Error::NonFinite {
                    what: "factor coordinates",
                    z: before,
                });
            }
            if y.iter().any(|c| c.norm() > opts.chart_limit) {
                restart(z, &mut y, &mut base, &mut out.blowup_events);
                stepper.invalidate();
            }
        }
        let v = WeiNormanCoords::from_slice(&y);
        out.coords.push(v);
        out.base.push(base);
        out.u.push(reconstruct_u(&v) * base);
    }
    out.stats = stepper.stats.clone();
    Ok(out)
}

/// Oracle: integrates the nine entries of `U` directly.
pub fn integrate_direct<F: Coupling + ?Sized>(
    family: &F,
    samples: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<ComplexMatrix>> {
    check_samples(samples)?;
    let mut stepper = Dopri5::new(9, opts.tol);
    let mut y = [C64::new(0.0, 0.0); 9];
    for k in 0..3 {
        y[4 * k] = C64::new(1.0, 0.0);
    }
    let failure: Cell<Option<Error>> = Cell::new(None);
    let mut rhs = |zz: f64, s: &[C64], ds: &mut [C64]| match coupling_at(family, zz) {
        Ok(m) => {
            let u = ComplexMatrix::from_row_slice(s);
            let d = m * u * C64::i();
            for r in 0..3 {
                for c in 0..3 {
                    ds[3 * r + c] = d[(r, c)];
                }
            }
        }
        Err(e) => {
            record(&failure, e);
            ds.fill(C64::new(f64::NAN, 0.0));
        }
    };
    let mut z = 0.0;
    let mut out = Vec::with_capacity(samples.len());
    for &target in samples {
        let res = stepper.integrate_to(&mut rhs, &mut z, &mut y, target);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        res?;
        out.push(ComplexMatrix::from_row_slice(&y));
    }
    Ok(out)
}

/// `exp(i z M1)` by scaling and squaring a Taylor series. Exceptional-point
/// matrices of the triple kind are nilpotent, and the series is then cut
/// after the quadratic term.
pub fn exp_constant(m1: &ComplexMatrix, z: f64) -> ComplexMatrix {
    let a = m1 * C64::new(0.0, z);
    let id = ComplexMatrix::identity();
    if let Ok(inv) = invariants(m1) {
        match classify(&inv, frobenius(m1), DEFAULT_EP_EPS) {
            Regime::ZeroMatrix => return id,
            Regime::Ep3 => return id + a + a * a * C64::from(0.5),
            _ => {}
        }
    }
    let norm = a
        .row_iter()
        .map(|r| r.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / C64::from(2f64.powi(squarings));
    let mut term = id;
    let mut sum = id;
    for k in 1..=24 {
        term = term * b / C64::from(k as f64);
        sum += term;
        if frobenius(&term) <= 1e-18 * frobenius(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Physical field `E(z) = exp(i·gauge(z))·U(z)·E(0)` at the sample points.
pub fn propagate_field<F: Coupling + ?Sized>(
    family: &F,
    e0: &FieldVector,
    samples: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<FieldVector>> {
    let result = integrate_wei_norman(family, samples, opts)?;
    samples
        .iter()
        .zip(&result.u)
        .map(|(&z, u)| {
            let phase = gauge_phase(family, z, opts.tol.rtol)?;
            Ok(u * e0 * (C64::i() * phase).exp())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Holonomy {
    pub h: ComplexMatrix,
    pub steps: usize,
    /// `‖H_N − H_2N‖ / ‖H_2N − H_4N‖`; `None` when both differences are at
    /// rounding level.
    pub convergence_ratio: Option<f64>,
    /// `(φ_I0, φ_Y)` with the Cartan factor of `H` equal to
    /// `e^{iφ_I0 I0} e^{iφ_Y Y}`; principal logarithms, so each phase is
    /// defined modulo the lattice generated by the `2π` ambiguities of the
    /// two diagonal entries. `None` when `H` has no normal-ordered
    /// factorisation.
    pub cartan_phases: Option<(C64, C64)>,
    pub determinant: C64,
}

/// Path-ordered exponential of the frame connection `i T⁻¹ ∂z T` around the
/// closed loop `[0, length]`, by the exponential midpoint rule with `steps`
/// intervals; the scheme is repeated at `2·steps` and `4·steps` for the
/// convergence diagnostic.
pub fn holonomy<F: Coupling + ?Sized>(family: &F, length: f64, steps: usize) -> Result<Holonomy> {
    if !(length > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter("loop length and step count must be positive".into()));
    }
    let h1 = holonomy_product(family, length, steps)?;
    let h2 = holonomy_product(family, length, 2 * steps)?;
    let h4 = holonomy_product(family, length, 4 * steps)?;
    let coarse = frobenius(&(h1 - h2));
    let fine = frobenius(&(h2 - h4));
    let floor = 1e-13 * frobenius(&h4).max(1.0);
    let convergence_ratio = (coarse > floor || fine > floor).then(|| coarse / fine.max(f64::MIN_POSITIVE));
    let cartan_phases = normal_order_factors(&h4, 1e-14).map(|f| {
        let (l1, l2) = (f.diagonal[0].ln(), f.diagonal[1].ln());
        let mi = -C64::i();
        (mi * (l1 - l2), mi * 1.5 * (l1 + l2))
    });
    Ok(Holonomy {
        h: h4,
        steps: 4 * steps,
        convergence_ratio,
        cartan_phases,
        determinant: h4.determinant(),
    })
}

fn holonomy_product<F: Coupling + ?Sized>(family: &F, length: f64, steps: usize) -> Result<ComplexMatrix> {
    let grid: Vec<f64> = (0..=steps).map(|k| length * k as f64 / steps as f64).collect();
    let m0 = coupling_at(family, 0.0)?;
    let start = local_frame(&m0, 0.0)?;
    let tracking = track_branches(family, &grid, &TrackingOptions::default())?;
    if let Some(e) = tracking.events.first() {
        let regime = match e.kind {
            crate::spectral::EventKind::Ep3 => Regime::Ep3,
            _ => Regime::Ep2,
        };
        return Err(Error::ExceptionalPoint { z: e.z, regime });
    }
    // Reorder the tracked branches to start in the frame's own ordering.
    let perm: Vec<usize> = start
        .lambdas
        .iter()
        .map(|l| {
            (0..3)
                .min_by(|&a, &b| {
                    (tracking.lambdas[0][a] - l).norm().total_cmp(&(tracking.lambdas[0][b] - l).norm())
                })
                .unwrap()
        })
        .collect();
    let mut frames = Vec::with_capacity(grid.len());
    for (k, &z) in grid.iter().enumerate() {
        let m = coupling_at(family, z)?;
        let inv = invariants(&m)?;
        let regime = classify(&inv, frobenius(&m), DEFAULT_EP_EPS);
        if regime != Regime::Distinct {
            return Err(Error::ExceptionalPoint { z, regime });
        }
        let l = tracking.lambdas[k];
        frames.push(local_frame_ordered(&m, z, [l[perm[0]], l[perm[1]], l[perm[2]]])?.t);
    }
    let mut h = ComplexMatrix::identity();
    for w in frames.windows(2) {
        let mid = (w[0] + w[1]) * C64::from(0.5);
        let mid_inv = mid.try_inverse().ok_or(Error::FrameSingular {
            z: 0.0,
            reason: "singular midpoint frame".into(),
        })?;
        let a = traceless_part(&(mid_inv * (w[1] - w[0]) * C64::i()));
        h = exp_constant(&(a * C64::new(0.0, -1.0)), 1.0) * h;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &ComplexMatrix) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn random_c(rng: &mut ChaCha8Rng, s: f64) -> C64 {
        C64::new(rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn random_traceless(rng: &mut ChaCha8Rng) -> ComplexMatrix {
        traceless_part(&ComplexMatrix::from_fn(|_, _| random_c(rng, 1.0)))
    }

    fn trimer(g: f64, k1: f64, k2: f64) -> ComplexMatrix {
        let c = C64::from;
        Matrix3::new(
            C64::new(0.0, g),
            c(k1),
            c(k2),
            c(k1),
            c(0.0),
            c(k1),
            c(k2),
            c(k1),
            C64::new(0.0, -g),
        )
    }

    #[test]
    fn rhs_at_origin() {
        let zero = wei_norman_rhs(&WeiNormanCoords::default(), &ComplexMatrix::zeros());
        assert_eq!(zero, WeiNormanCoords::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_traceless(&mut rng);
        let d = wei_norman_rhs(&WeiNormanCoords::default(), &m);
        assert_eq!(d.v_ip, m[(0, 1)]);
        assert_eq!(d.v_vp, m[(0, 2)]);
        assert_eq!(d.v_up, m[(1, 2)]);
        assert_eq!(d.v_i0, m[(0, 0)] - m[(1, 1)]);
        assert_eq!(d.v_y, (m[(0, 0)] + m[(1, 1)]) * 1.5);
        assert_eq!(d.v_vm, m[(2, 0)]);
        assert_eq!(d.v_um, m[(2, 1)]);
        assert_eq!(d.v_im, m[(1, 0)]);
    }

    #[test]
    fn rhs_reproduces_generator_along_random_directions() {
        // d/dz reconstruct_u(υ(z)) must equal i·M1·U for υ' = rhs(υ, M1).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let v = WeiNormanCoords::from_array(std::array::from_fn(|_| random_c(&mut rng, 0.8)));
            let m = random_traceless(&mut rng);
            let d = wei_norman_rhs(&v, &m).to_array();
            let h = 1e-5;
            let shift = |s: f64| {
                let a = v.to_array();
                WeiNormanCoords::from_array(std::array::from_fn(|k| a[k] + d[k] * h * s))
            };
            // Fourth-order central difference.
            let du = (reconstruct_u(&shift(-2.0)) - reconstruct_u(&shift(-1.0)) * C64::from(8.0)
                + reconstruct_u(&shift(1.0)) * C64::from(8.0)
                - reconstruct_u(&shift(2.0)))
                / C64::from(12.0 * h);
            let expected = m * reconstruct_u(&v) * C64::i();
            assert!(max_abs(&(du - expected)) < 1e-8 * max_abs(&expected).max(1.0));
        }
    }

    #[test]
    fn reconstruct_examples() {
        assert_eq!(reconstruct_u(&WeiNormanCoords::default()), ComplexMatrix::identity());
        let a = C64::new(0.4, -0.2);
        let u = reconstruct_u(&WeiNormanCoords {
            v_i0: a,
            ..Default::default()
        });
        let i = C64::i();
        assert!((u[(0, 0)] - (i * a / 2.0).exp()).norm() < 1e-15);
        assert!((u[(1, 1)] - (-i * a / 2.0).exp()).norm() < 1e-15);
        assert!((u[(2, 2)] - C64::from(1.0)).norm() < 1e-15);

        let b = C64::new(-0.7, 0.1);
        let u = reconstruct_u(&WeiNormanCoords {
            v_ip: a,
            v_im: b,
            ..Default::default()
        });
        // (1 + iα I+)(1 + iβ I-) = [[1 − αβ, iα, 0], [iβ, 1, 0], [0, 0, 1]].
        let one = C64::from(1.0);
        let zero = C64::from(0.0);
        let expected = Matrix3::new(one - a * b, i * a, zero, i * b, one, zero, zero, zero, one);
        assert!(max_abs(&(u - expected)) < 1e-15);
    }

    #[test]
    fn reconstruct_is_unimodular_and_invertible_by_coords() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = WeiNormanCoords::from_array(std::array::from_fn(|_| random_c(&mut rng, 1.0)));
            let u = reconstruct_u(&v);
            assert!((u.determinant() - C64::from(1.0)).norm() < 1e-12);
            let back = wei_norman_coords_of(&u).unwrap();
            assert!(max_abs(&(reconstruct_u(&back) - u)) < 1e-11 * max_abs(&u));
        }
    }

    #[test]
    fn zero_family_stays_at_identity() {
        let family = |_z: f64| ComplexMatrix::zeros();
        let r = integrate_wei_norman(&family, &uniform_samples(3.0, 7), &PropagationOptions::default()).unwrap();
        assert!(r.u.iter().all(|u| *u == ComplexMatrix::identity()));
        let d = integrate_direct(&family, &uniform_samples(3.0, 7), &PropagationOptions::default()).unwrap();
        assert!(d.iter().all(|u| *u == ComplexMatrix::identity()));
    }

    #[test]
    fn hermitian_doublet_rotates() {
        let kappa = 1.3;
        let m = (GeneratorLabel::Ip.matrix() + GeneratorLabel::Im.matrix()) * C64::from(kappa);
        let family = move |_z: f64| m;
        let samples = uniform_samples(4.0, 21);
        let r = integrate_wei_norman(&family, &samples, &PropagationOptions::with_tol(1e-12)).unwrap();
        for (z, u) in samples.iter().zip(&r.u) {
            let (c, s) = ((kappa * z).cos(), (kappa * z).sin());
            assert!((u[(0, 0)] - C64::from(c)).norm() < 1e-9);
            assert!((u[(0, 1)] - C64::new(0.0, s)).norm() < 1e-9);
            assert!((u[(1, 0)] - C64::new(0.0, s)).norm() < 1e-9);
            assert!((u[(2, 2)] - C64::from(1.0)).norm() < 1e-9);
        }
        // cos(κz) vanishes inside the range, so the chart must have restarted.
        assert!(!r.blowup_events.is_empty());
    }

    #[test]
    fn direct_matches_exponential_and_stays_unitary() {
        let m = trimer(0.0, 0.9, 1.7);
        let family = move |_z: f64| m;
        let samples = uniform_samples(6.0, 13);
        let d = integrate_direct(&family, &samples, &PropagationOptions::with_tol(1e-12)).unwrap();
        for (z, u) in samples.iter().zip(&d) {
            assert!(max_abs(&(u - exp_constant(&m, *z))) < 1e-10);
            let unitarity = u.adjoint() * u - ComplexMatrix::identity();
            assert!(max_abs(&unitarity) < 1e-10);
        }
    }

    #[test]
    fn wei_norman_matches_direct_on_generic_family() {
        let family = |z: f64| trimer(1.0 + 0.3 * z.sin(), 1.5, 1.5 + 0.5 * (0.7 * z).cos());
        let samples = uniform_samples(5.0, 11);
        let opts = PropagationOptions::with_tol(1e-12);
        let w = integrate_wei_norman(&family, &samples, &opts).unwrap();
        let d = integrate_direct(&family, &samples, &opts).unwrap();
        for (a, b) in w.u.iter().zip(&d) {
            assert!(max_abs(&(a - b)) < 1e-8 * max_abs(b).max(1.0));
            assert!((a.determinant() - C64::from(1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn group_property_at_random_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let family = |z: f64| trimer(0.8, 1.1 + 0.2 * z, 0.4);
        let opts = PropagationOptions::with_tol(1e-12);
        for _ in 0..3 {
            let z1: f64 = rng.random_range(0.5..2.0);
            let z2 = z1 + rng.random_range(0.5..2.0);
            let full = integrate_direct(&family, &[z2], &opts).unwrap()[0];
            let first = integrate_direct(&family, &[z1], &opts).unwrap()[0];
            let shifted = move |z: f64| family(z + z1);
            let second = integrate_direct(&shifted, &[z2 - z1], &opts).unwrap()[0];
            assert!(max_abs(&(second * first - full)) < 1e-9 * max_abs(&full));
        }
    }

    #[test]
    fn exp_constant_examples() {
        assert_eq!(exp_constant(&ComplexMatrix::zeros(), 2.0), ComplexMatrix::identity());
        let i = C64::i();
        let d = Matrix3::from_diagonal(&FieldVector::new(i, -i, C64::from(0.0)));
        let e = exp_constant(&d, std::f64::consts::PI);
        let pi = std::f64::consts::PI;
        assert!((e[(0, 0)] - C64::from((-pi).exp())).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::from(pi.exp())).norm() < 1e-12 * pi.exp());
        assert!((e[(2, 2)] - C64::from(1.0)).norm() < 1e-14);

        let m = trimer(1.0, 0.5f64.sqrt(), 0.0);
        assert!(max_abs(&(m * m * m)) < 1e-13);
        let z = 3.0;
        let quad = ComplexMatrix::identity() + m * C64::new(0.0, z) - m * m * C64::from(z * z / 2.0);
        assert!(max_abs(&(exp_constant(&m, z) - quad)) < 1e-14);
    }

    #[test]
    fn exp_constant_agrees_with_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let m = random_traceless(&mut rng);
            let Ok(f) = local_frame(&m, 0.0) else { continue };
            let z = rng.random_range(0.0..4.0);
            let d = Matrix3::from_diagonal(&FieldVector::from_fn(|k, _| (C64::i() * z * f.lambdas[k]).exp()));
            let expected = f.t * d * f.t_inv;
            assert!(max_abs(&(exp_constant(&m, z) - expected)) < 1e-9 * max_abs(&expected));
        }
    }

    #[test]
    fn constant_family_has_trivial_holonomy() {
        let family = |_z: f64| trimer(1.0, 1.5, 3.5);
        let h = holonomy(&family, 1.0, 64).unwrap();
        assert!(max_abs(&(h.h - ComplexMatrix::identity())) < 1e-12);
        assert!(h.convergence_ratio.is_none());
    }

    #[test]
    fn holonomy_refuses_loops_through_exceptional_points() {
        let family = |z: f64| {
            let phase = 2.0 * std::f64::consts::PI * z;
            trimer(1.0, 0.5f64.sqrt() + 0.4253 * phase.cos(), 0.4253 * phase.sin())
        };
        assert!(matches!(holonomy(&family, 1.0, 64), Err(Error::ExceptionalPoint { .. })));
    }
}
