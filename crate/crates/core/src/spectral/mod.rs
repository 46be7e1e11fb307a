//! Spectral structure of traceless 3×3 couplers: trace invariants, the
//! discriminant, exceptional-point classification and the depressed-cubic
//! eigensolver. Frames live in [`frame`], path continuation in [`tracking`].

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;

use crate::algebra::{ensure_traceless, frobenius};
use crate::{ComplexMatrix, Error, Result, C64};

mod frame;
mod tracking;

pub use frame::{local_frame, local_frame_ordered, project_biorthogonal, SpectralFrame};
pub use tracking::{track_branches, BranchEvent, BranchTracking, EventKind, TrackingOptions};

/// Default relative tolerance for exceptional-point classification.
pub const DEFAULT_EP_EPS: f64 = 1e-9;

/// Coefficients of the depressed characteristic polynomial
/// `λ³ + β₂λ + β₃`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Invariants {
    pub beta2: C64,
    pub beta3: C64,
}

impl Invariants {
    /// Natural magnitude of the eigenvalues implied by the invariants alone.
    pub fn scale(&self) -> f64 {
        self.beta2.norm().sqrt().max(self.beta3.norm().cbrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Distinct,
    Ep2,
    Ep3,
    ZeroMatrix,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Distinct => "Distinct",
            Regime::Ep2 => "EP2",
            Regime::Ep3 => "EP3",
            Regime::ZeroMatrix => "ZeroMatrix",
        })
    }
}

/// `β₂ = −½Tr M1²`, `β₃ = −⅓Tr M1³`.
pub fn invariants(m1: &ComplexMatrix) -> Result<Invariants> {
    ensure_traceless(m1)?;
    let sq = m1 * m1;
    let beta2 = -sq.trace() / 2.0;
    let beta3 = -(sq * m1).trace() / 3.0;
    Ok(Invariants { beta2, beta3 })
}

/// Newton–Girard recursion `β_k = −(1/k) Σ_{j=1..k} β_{k−j} Tr[M^j]` with
/// `β₀ = 1`. `traces[j-1]` holds `Tr[M^j]`; the returned vector holds
/// `β₀..β_N`, i.e. the characteristic polynomial `Σ β_k λ^{N−k}`.
pub fn char_poly_from_traces(traces: &[C64]) -> Vec<C64> {
    let n = traces.len();
    let mut beta = vec![C64::new(1.0, 0.0); n + 1];
    for k in 1..=n {
        let acc: C64 = (1..=k).map(|j| beta[k - j] * traces[j - 1]).sum();
        beta[k] = -acc / k as f64;
    }
    beta
}

/// `Δ = −4β₂³ − 27β₃²`.
pub fn discriminant(inv: &Invariants) -> C64 {
    let b2 = inv.beta2;
    -4.0 * b2 * b2 * b2 - 27.0 * inv.beta3 * inv.beta3
}

/// Discriminant of `Σ c_k λ^{N−k}` (coefficients from the leading one down)
/// as `(−1)^{N(N−1)/2} Res(p, p′) / c₀`, the resultant evaluated as the
/// determinant of the Sylvester matrix.
pub fn discriminant_resultant(coeffs: &[C64]) -> Result<C64> {
    let lead = *coeffs.first().ok_or(Error::ZeroLeadingCoefficient)?;
    if lead == C64::new(0.0, 0.0) {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let deriv: Vec<C64> = coeffs[..n]
        .iter()
        .enumerate()
        .map(|(k, c)| c * (n - k) as f64)
        .collect();
    let size = 2 * n - 1;
    let mut syl = DMatrix::<C64>::zeros(size, size);
    // n−1 shifted rows of p, then n shifted rows of p′.
    for row in 0..n - 1 {
        for (k, c) in coeffs.iter().enumerate() {
            syl[(row, row + k)] = *c;
        }
    }
    for row in 0..n {
        for (k, c) in deriv.iter().enumerate() {
            syl[(n - 1 + row, row + k)] = *c;
        }
    }
    let res = syl.determinant();
    let sign = if (n * (n - 1) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(res * sign / lead)
}

/// Roots of `λ³ + β₂λ + β₃` in canonical order (descending real part, ties
/// broken by descending imaginary part).
pub fn cubic_roots(inv: &Invariants) -> [C64; 3] {
    let p = inv.beta2;
    let q = inv.beta3;
    let zero = C64::new(0.0, 0.0);
    if p == zero && q == zero {
        return [zero; 3];
    }
    let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let (a, b) = (-q / 2.0 + s, -q / 2.0 - s);
    let w = if a.norm() >= b.norm() { a } else { b };
    let u = w.powf(1.0 / 3.0);
    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut roots = [zero; 3];
    let mut uk = u;
    for root in roots.iter_mut() {
        *root = if uk == zero { zero } else { uk - p / (3.0 * uk) };
        uk *= omega;
    }
    for root in roots.iter_mut() {
        *root = polish(*root, p, q);
    }
    canonical_order(&mut roots, inv.scale());
    roots
}

fn polish(mut x: C64, p: C64, q: C64) -> C64 {
    let f = |x: C64| x * x * x + p * x + q;
    let mut fx = f(x);
    for _ in 0..4 {
        let d = 3.0 * x * x + p;
        if d.norm() == 0.0 {
            break;
        }
        let next = x - fx / d;
        let fn_ = f(next);
        if !(fn_.norm() < fx.norm()) {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Sorts by descending real part, treating real parts within `1e-10·scale`
/// as tied and then ordering by descending imaginary part.
pub fn canonical_order(values: &mut [C64], scale: f64) {
    let tie = 1e-10 * scale.max(f64::MIN_POSITIVE);
    values.sort_by(|a, b| {
        if (a.re - b.re).abs() <= tie {
            b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal)
        } else {
            b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal)
        }
    });
}

/// Dimensionally consistent classification: `scale` is a norm of the source
/// matrix, `|β₂|` is compared with `eps·scale²`, `|β₃|` with `eps·scale³` and
/// `|Δ|` with `eps·scale⁶`.
pub fn classify(inv: &Invariants, scale: f64, eps: f64) -> Regime {
    if scale < eps {
        return Regime::ZeroMatrix;
    }
    let s2 = scale * scale;
    if inv.beta2.norm() < eps * s2 && inv.beta3.norm() < eps * s2 * scale {
        return Regime::Ep3;
    }
    if discriminant(inv).norm() < eps * s2 * s2 * s2 {
        return Regime::Ep2;
    }
    Regime::Distinct
}

/// Invariants and regime of a traceless matrix, using its Frobenius norm as
/// the scale.
pub fn classify_matrix(m1: &ComplexMatrix, eps: f64) -> Result<(Invariants, Regime)> {
    let inv = invariants(m1)?;
    Ok((inv, classify(&inv, frobenius(m1), eps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn trimer(g: f64, k1: f64, k2: f64) -> ComplexMatrix {
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
    fn invariants_examples() {
        let inv = invariants(&ComplexMatrix::zeros()).unwrap();
        assert_eq!(inv, Invariants::default());

        let inv = invariants(&trimer(1.0, 1.5, 3.5)).unwrap();
        assert_relative_eq!(inv.beta2.re, -15.75, epsilon = 1e-12);
        assert_relative_eq!(inv.beta3.re, -15.75, epsilon = 1e-12);
        assert!(inv.beta2.im.abs() < 1e-12 && inv.beta3.im.abs() < 1e-12);

        let inv = invariants(&trimer(1.0, 0.5f64.sqrt(), 0.0)).unwrap();
        assert!(inv.beta2.norm() < 1e-15 && inv.beta3.norm() < 1e-15);
    }

    #[test]
    fn recursion_matches_closed_form() {
        let m = trimer(0.7, 1.3, -0.4);
        let traces = [m.trace(), (m * m).trace(), (m * m * m).trace()];
        let beta = char_poly_from_traces(&traces);
        let inv = invariants(&m).unwrap();
        assert!(beta[1].norm() < 1e-14);
        assert!((beta[2] - inv.beta2).norm() < 1e-13);
        assert!((beta[3] - inv.beta3).norm() < 1e-13);
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(discriminant(&Invariants::default()), c(0.0));
        let d = discriminant(&invariants(&trimer(1.0, 1.5, 3.5)).unwrap());
        assert_relative_eq!(d.re, 8930.25, max_relative = 1e-12);
        let d = discriminant(&invariants(&trimer(1.0, 1.5, 1.5)).unwrap());
        assert_relative_eq!(d.re, -469.75, max_relative = 1e-12);
    }

    #[test]
    fn resultant_examples() {
        let d = discriminant_resultant(&[c(1.0), c(0.0), c(-1.0), c(0.0)]).unwrap();
        assert!((d - c(4.0)).norm() < 1e-12);
        let d = discriminant_resultant(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        assert!(d.norm() < 1e-15);
        let d = discriminant_resultant(&[c(1.0), c(0.0), c(-1.0)]).unwrap();
        assert!((d - c(4.0)).norm() < 1e-12);
        assert_eq!(
            discriminant_resultant(&[c(0.0), c(1.0)]),
            Err(Error::ZeroLeadingCoefficient)
        );
    }

    #[test]
    fn resultant_quartic_against_root_product() {
        let roots = [c(1.0), c(-2.0), C64::new(0.5, 1.0), C64::new(0.5, -1.0)];
        // (λ−r₁)…(λ−r₄) expanded.
        let mut poly = vec![c(1.0)];
        for r in roots {
            let mut next = vec![c(0.0); poly.len() + 1];
            for (k, a) in poly.iter().enumerate() {
                next[k] += a;
                next[k + 1] -= a * r;
            }
            poly = next;
        }
        let mut expected = c(1.0);
        for i in 0..4 {
            for j in i + 1..4 {
                expected *= (roots[i] - roots[j]) * (roots[i] - roots[j]);
            }
        }
        let d = discriminant_resultant(&poly).unwrap();
        assert!((d - expected).norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn cubic_roots_examples() {
        assert_eq!(cubic_roots(&Invariants::default()), [c(0.0); 3]);
        let r = cubic_roots(&Invariants {
            beta2: c(-1.0),
            beta3: c(0.0),
        });
        for (a, b) in r.iter().zip([1.0, 0.0, -1.0]) {
            assert!((a - c(b)).norm() < 1e-14);
        }
        let r = cubic_roots(&invariants(&trimer(1.0, 1.0, 0.0)).unwrap());
        for (a, b) in r.iter().zip([1.0, 0.0, -1.0]) {
            assert!((a - c(b)).norm() < 1e-12);
        }
    }

    #[test]
    fn cubic_roots_complex_pair_order() {
        let r = cubic_roots(&invariants(&trimer(1.0, 1.5, 1.5)).unwrap());
        assert!(r[0].im.abs() < 1e-12);
        assert!(r[1].im > 0.0 && r[2].im < 0.0);
        assert_relative_eq!(r[1].re, r[2].re, epsilon = 1e-12);
    }

    #[test]
    fn classify_examples() {
        let zero = ComplexMatrix::zeros();
        assert_eq!(classify_matrix(&zero, DEFAULT_EP_EPS).unwrap().1, Regime::ZeroMatrix);
        let ep3 = trimer(1.0, 0.5f64.sqrt(), 0.0);
        assert_eq!(classify_matrix(&ep3, DEFAULT_EP_EPS).unwrap().1, Regime::Ep3);
        let ep2 = trimer(1.0, 1.5, 0.6718);
        assert_eq!(classify_matrix(&ep2, 1e-3).unwrap().1, Regime::Ep2);
        let generic = trimer(1.0, 1.5, 3.5);
        assert_eq!(classify_matrix(&generic, DEFAULT_EP_EPS).unwrap().1, Regime::Distinct);
        assert_eq!(Regime::Ep3.to_string(), "EP3");
    }
}
