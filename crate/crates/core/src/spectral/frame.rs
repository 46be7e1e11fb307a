use nalgebra::Matrix3;

use super::{classify, cubic_roots, invariants, Regime, DEFAULT_EP_EPS};
use crate::algebra::{
    frobenius, lower_ladder_parameters, normal_order_factors, unit_lower_inverse,
    unit_upper_inverse, upper_ladder_parameters,
};
use crate::{ComplexMatrix, Error, FieldVector, Result, C64};

/// Smallest admissible elimination pivot relative to the eigenvector matrix.
const PIVOT_TOL: f64 = 1e-10;

/// Biorthogonal eigenframe of a traceless matrix at one propagation
/// coordinate.
///
/// `t` is normal ordered, `t = e^{iα I+} e^{iα U+} e^{iα V+} · e^{iα V-}
/// e^{iα U-} e^{iα I-}`, with no Cartan factor. Its columns are the right
/// eigenvectors and the rows of `t_inv` the left ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFrame {
    pub z0: f64,
    pub lambdas: [C64; 3],
    pub lambda_i0: C64,
    pub lambda_y: C64,
    pub t: ComplexMatrix,
    pub t_inv: ComplexMatrix,
    /// Ladder gauge parameters in factor order `I+, U+, V+, V-, U-, I-`.
    pub alphas: [C64; 6],
}

impl SpectralFrame {
    pub fn right(&self, j: usize) -> FieldVector {
        self.t.column(j).into_owned()
    }

    pub fn left(&self, j: usize) -> nalgebra::RowVector3<C64> {
        self.t_inv.row(j).into_owned()
    }

    /// `diag(λ_I0/2 + λ_Y/3, −λ_I0/2 + λ_Y/3, −2λ_Y/3)`.
    pub fn cartan_spectrum(&self) -> [C64; 3] {
        let (a, b) = (self.lambda_i0 / 2.0, self.lambda_y / 3.0);
        [a + b, -a + b, -2.0 * b]
    }
}

/// Frame with eigenvalues in canonical order. When the eigenbasis has no
/// normal-ordered factorisation in that order (a diagonal input, say), the
/// ordering with the best-conditioned elimination pivots is used instead.
/// Fails at exceptional points.
pub fn local_frame(m1: &ComplexMatrix, z0: f64) -> Result<SpectralFrame> {
    let inv = invariants(m1)?;
    let regime = classify(&inv, frobenius(m1), DEFAULT_EP_EPS);
    if regime != Regime::Distinct {
        return Err(Error::ExceptionalPoint { z: z0, regime });
    }
    let roots = cubic_roots(&inv);
    match local_frame_ordered(m1, z0, roots) {
        Err(Error::FrameSingular { .. }) => {}
        other => return other,
    }
    let mut best: Option<(f64, [C64; 3])> = None;
    for p in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let order = [roots[p[0]], roots[p[1]], roots[p[2]]];
        let Some(v) = eigenvector_matrix(m1, &order) else { continue };
        let Some(f) = normal_order_factors(&v, PIVOT_TOL) else { continue };
        let pivot = f.diagonal.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(b, _)| pivot > b) {
            best = Some((pivot, order));
        }
    }
    match best {
        Some((_, order)) => local_frame_ordered(m1, z0, order),
        None => Err(Error::FrameSingular {
            z: z0,
            reason: "no eigenvalue ordering admits a normal-ordered frame".into(),
        }),
    }
}

fn eigenvector_matrix(m1: &ComplexMatrix, lambdas: &[C64; 3]) -> Option<ComplexMatrix> {
    let mut v = ComplexMatrix::zeros();
    for (j, &lambda) in lambdas.iter().enumerate() {
        v.set_column(j, &eigenvector(m1, lambda)?);
    }
    Some(v)
}

/// Frame for a caller-supplied eigenvalue ordering (e.g. from branch
/// tracking). The eigenvalues must be those of `m1`.
pub fn local_frame_ordered(m1: &ComplexMatrix, z0: f64, lambdas: [C64; 3]) -> Result<SpectralFrame> {
    let singular = |reason: &str| Error::FrameSingular {
        z: z0,
        reason: reason.to_string(),
    };
    let v = eigenvector_matrix(m1, &lambdas).ok_or_else(|| singular("eigenvector null"))?;
    let f = normal_order_factors(&v, PIVOT_TOL)
        .ok_or_else(|| singular("vanishing principal minor of the eigenbasis"))?;
    let [d1, d2, d3] = f.diagonal;
    let d = Matrix3::from_diagonal(&FieldVector::new(d1, d2, d3));
    let d_inv = Matrix3::from_diagonal(&FieldVector::new(d1.inv(), d2.inv(), d3.inv()));
    let lower = d * f.lower * d_inv;
    let t = f.upper * lower;
    let t_inv = unit_lower_inverse(&lower) * unit_upper_inverse(&f.upper);
    let [ip, up, vp] = upper_ladder_parameters(&f.upper);
    let [vm, um, im] = lower_ladder_parameters(&lower);
    Ok(SpectralFrame {
        z0,
        lambdas,
        lambda_i0: lambdas[0] - lambdas[1],
        lambda_y: 1.5 * (lambdas[0] + lambdas[1]),
        t,
        t_inv,
        alphas: [ip, up, vp, vm, um, im],
    })
}

/// Largest column of `adj(M − λ)`; every column lies in the kernel.
fn eigenvector(m1: &ComplexMatrix, lambda: C64) -> Option<FieldVector> {
    let mut a = *m1;
    for k in 0..3 {
        a[(k, k)] -= lambda;
    }
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[(r0, c0)] * a[(r1, c1)] - a[(r0, c1)] * a[(r1, c0)];
    // adj[i][j] = cofactor(j, i).
    let adj = Matrix3::new(
        cof(1, 2, 1, 2),
        -cof(0, 2, 1, 2),
        cof(0, 1, 1, 2),
        -cof(1, 2, 0, 2),
        cof(0, 2, 0, 2),
        -cof(0, 1, 0, 2),
        cof(1, 2, 0, 1),
        -cof(0, 2, 0, 1),
        cof(0, 1, 0, 1),
    );
    let best = (0..3)
        .max_by(|&i, &j| adj.column(i).norm().total_cmp(&adj.column(j).norm()))
        .unwrap();
    let col = adj.column(best).into_owned();
    let norm = col.norm();
    (norm > 0.0 && norm.is_finite()).then(|| col / C64::from(norm))
}

/// Biorthogonal components `c_j = l_j·E`, so that `Σ c_j r_j = E`.
pub fn project_biorthogonal(frame: &SpectralFrame, e: &FieldVector) -> [C64; 3] {
    let c = frame.t_inv * e;
    [c[0], c[1], c[2]]
}
