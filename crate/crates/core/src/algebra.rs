//! sl(3,ℂ) in the isospin–hypercharge basis.
//!
//! Cartan generators `I0 = diag(1,-1,0)/2`, `Y = diag(1,1,-2)/3` and the six
//! ladder generators `I± (1↔2)`, `U± (2↔3)`, `V± (1↔3)` span the traceless
//! 3×3 matrices. Coordinates in this basis are [`GellMannCoefficients`].

use nalgebra::Matrix3;

use crate::quadrature::adaptive_simpson;
use crate::{ComplexMatrix, Error, Result, C64};

const ONE: C64 = C64::new(1.0, 0.0);

/// Anything that yields a mode-coupling matrix as a function of the
/// propagation coordinate `z`.
pub trait Coupling {
    fn matrix_at(&self, z: f64) -> ComplexMatrix;
}

impl<F> Coupling for F
where
    F: Fn(f64) -> ComplexMatrix,
{
    fn matrix_at(&self, z: f64) -> ComplexMatrix {
        self(z)
    }
}

/// Labels of the eight sl(3,ℂ) generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorLabel {
    I0,
    Y,
    Ip,
    Im,
    Up,
    Um,
    Vp,
    Vm,
}

impl GeneratorLabel {
    pub const ALL: [GeneratorLabel; 8] = [
        GeneratorLabel::I0,
        GeneratorLabel::Y,
        GeneratorLabel::Ip,
        GeneratorLabel::Im,
        GeneratorLabel::Up,
        GeneratorLabel::Um,
        GeneratorLabel::Vp,
        GeneratorLabel::Vm,
    ];

    /// Factor order of the normal-ordered group element
    /// `e^{iυ I+} e^{iυ U+} e^{iυ V+} e^{iυ I0} e^{iυ Y} e^{iυ V-} e^{iυ U-} e^{iυ I-}`.
    pub const NORMAL_ORDER: [GeneratorLabel; 8] = [
        GeneratorLabel::Ip,
        GeneratorLabel::Up,
        GeneratorLabel::Vp,
        GeneratorLabel::I0,
        GeneratorLabel::Y,
        GeneratorLabel::Vm,
        GeneratorLabel::Um,
        GeneratorLabel::Im,
    ];

    pub fn is_cartan(self) -> bool {
        matches!(self, GeneratorLabel::I0 | GeneratorLabel::Y)
    }

    /// Extraction weight `w_X`: 2 for `I0`, 3/2 for `Y`, 1 for ladders.
    pub fn weight(self) -> f64 {
        match self {
            GeneratorLabel::I0 => 2.0,
            GeneratorLabel::Y => 1.5,
            _ => 1.0,
        }
    }

    /// The ladder partner (`I+ ↔ I-` etc.); Cartan labels are self-paired.
    pub fn conjugate(self) -> GeneratorLabel {
        use GeneratorLabel::*;
        match self {
            Ip => Im,
            Im => Ip,
            Up => Um,
            Um => Up,
            Vp => Vm,
            Vm => Vp,
            c => c,
        }
    }

    /// Position `(row, col)` of the single unit entry of a ladder generator.
    pub fn ladder_position(self) -> Option<(usize, usize)> {
        use GeneratorLabel::*;
        match self {
            Ip => Some((0, 1)),
            Im => Some((1, 0)),
            Up => Some((1, 2)),
            Um => Some((2, 1)),
            Vp => Some((0, 2)),
            Vm => Some((2, 0)),
            I0 | Y => None,
        }
    }

    /// Diagonal of a Cartan generator.
    pub fn cartan_diagonal(self) -> Option<[f64; 3]> {
        match self {
            GeneratorLabel::I0 => Some([0.5, -0.5, 0.0]),
            GeneratorLabel::Y => Some([1.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0]),
            _ => None,
        }
    }

    pub fn matrix(self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros();
        if let Some((r, c)) = self.ladder_position() {
            m[(r, c)] = ONE;
        } else if let Some(d) = self.cartan_diagonal() {
            for (k, dk) in d.iter().enumerate() {
                m[(k, k)] = C64::from(*dk);
            }
        }
        m
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorLabel::I0 => "I0",
            GeneratorLabel::Y => "Y",
            GeneratorLabel::Ip => "I+",
            GeneratorLabel::Im => "I-",
            GeneratorLabel::Up => "U+",
            GeneratorLabel::Um => "U-",
            GeneratorLabel::Vp => "V+",
            GeneratorLabel::Vm => "V-",
        }
    }
}

/// Elementary matrix `O_{j,k}` with a single one at `(j, k)` (zero based).
pub fn elementary(j: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros();
    m[(j, k)] = ONE;
    m
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Coordinates of a traceless matrix in the isospin–hypercharge basis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GellMannCoefficients {
    pub mu_i0: C64,
    pub mu_y: C64,
    pub mu_ip: C64,
    pub mu_im: C64,
    pub mu_up: C64,
    pub mu_um: C64,
    pub mu_vp: C64,
    pub mu_vm: C64,
}

impl GellMannCoefficients {
    pub fn get(&self, label: GeneratorLabel) -> C64 {
        match label {
            GeneratorLabel::I0 => self.mu_i0,
            GeneratorLabel::Y => self.mu_y,
            GeneratorLabel::Ip => self.mu_ip,
            GeneratorLabel::Im => self.mu_im,
            GeneratorLabel::Up => self.mu_up,
            GeneratorLabel::Um => self.mu_um,
            GeneratorLabel::Vp => self.mu_vp,
            GeneratorLabel::Vm => self.mu_vm,
        }
    }

    pub fn set(&mut self, label: GeneratorLabel, value: C64) {
        let slot = match label {
            GeneratorLabel::I0 => &mut self.mu_i0,
            GeneratorLabel::Y => &mut self.mu_y,
            GeneratorLabel::Ip => &mut self.mu_ip,
            GeneratorLabel::Im => &mut self.mu_im,
            GeneratorLabel::Up => &mut self.mu_up,
            GeneratorLabel::Um => &mut self.mu_um,
            GeneratorLabel::Vp => &mut self.mu_vp,
            GeneratorLabel::Vm => &mut self.mu_vm,
        };
        *slot = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (GeneratorLabel, C64)> + '_ {
        GeneratorLabel::ALL.iter().map(move |&g| (g, self.get(g)))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max)
    }
}

/// Frobenius norm.
pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// `M - (Tr M / 3)·1`.
pub fn traceless_part(m: &ComplexMatrix) -> ComplexMatrix {
    let shift = m.trace() / 3.0;
    let mut out = *m;
    for k in 0..3 {
        out[(k, k)] -= shift;
    }
    out
}

/// Returns an error unless `|Tr M| <= 1e-12·max(1, ‖M‖)`.
pub fn ensure_traceless(m: &ComplexMatrix) -> Result<()> {
    let norm = frobenius(m);
    let trace = m.trace().norm();
    if trace > 1e-12 * norm.max(1.0) {
        return Err(Error::NotTraceless { trace, norm });
    }
    Ok(())
}

/// Scalar gauge `(1/3)∫₀ᶻ Tr M(ζ) dζ`; the physical field is
/// `E = exp(i·gauge_phase)·E₁`.
pub fn gauge_phase<F: Coupling + ?Sized>(family: &F, z: f64, tol: f64) -> Result<C64> {
    let trace = |zeta: f64| -> Result<C64> {
        let t = family.matrix_at(zeta).trace();
        if t.re.is_finite() && t.im.is_finite() {
            Ok(t)
        } else {
            Err(Error::NonFinite {
                what: "trace sample",
                z: zeta,
            })
        }
    };
    let re = adaptive_simpson(|s| trace(s).map(|t| t.re), 0.0, z, tol)?;
    let im = adaptive_simpson(|s| trace(s).map(|t| t.im), 0.0, z, tol)?;
    Ok(C64::new(re, im) / 3.0)
}

/// Coefficients `μ_X` with `Σ μ_X X = M1`.
///
/// Cartan coefficients use `μ_X = w_X·Tr[M1 X]`; ladder coefficients pair
/// with the conjugate generator, `μ_{X±} = Tr[M1 X∓]`, since `Tr[X± X∓] = 1`
/// while `Tr[X± X±] = 0`.
pub fn decompose(m1: &ComplexMatrix) -> Result<GellMannCoefficients> {
    ensure_traceless(m1)?;
    let mut c = GellMannCoefficients::default();
    for g in GeneratorLabel::ALL {
        let value = if g.is_cartan() {
            (m1 * g.matrix()).trace() * g.weight()
        } else {
            (m1 * g.conjugate().matrix()).trace()
        };
        c.set(g, value);
    }
    Ok(c)
}

pub fn reconstruct(c: &GellMannCoefficients) -> ComplexMatrix {
    c.iter()
        .fold(ComplexMatrix::zeros(), |acc, (g, mu)| acc + g.matrix() * mu)
}

/// `exp(iα X_g)`. Ladder generators square to zero, so the series stops at
/// first order; Cartan generators are diagonal.
pub fn exp_generator(g: GeneratorLabel, alpha: C64) -> ComplexMatrix {
    let ia = C64::i() * alpha;
    if let Some((r, c)) = g.ladder_position() {
        let mut m = ComplexMatrix::identity();
        m[(r, c)] = ia;
        m
    } else {
        let d = g.cartan_diagonal().expect("cartan label");
        Matrix3::from_diagonal(&nalgebra::Vector3::new(
            (ia * d[0]).exp(),
            (ia * d[1]).exp(),
            (ia * d[2]).exp(),
        ))
    }
}

/// Gauss factorisation `G = R·D·L` with `R` unit upper triangular, `D`
/// diagonal and `L` unit lower triangular. Elimination runs from the
/// bottom-right corner without pivoting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalOrderFactors {
    pub upper: ComplexMatrix,
    pub diagonal: [C64; 3],
    pub lower: ComplexMatrix,
}

impl NormalOrderFactors {
    pub fn product(&self) -> ComplexMatrix {
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::from(self.diagonal));
        self.upper * d * self.lower
    }
}

/// Returns `None` when a trailing pivot falls below `pivot_tol` times the
/// largest entry of `g`.
pub fn normal_order_factors(g: &ComplexMatrix, pivot_tol: f64) -> Option<NormalOrderFactors> {
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let small = |p: C64| p.norm() <= pivot_tol * scale;
    let d3 = g[(2, 2)];
    if small(d3) {
        return None;
    }
    let r13 = g[(0, 2)] / d3;
    let r23 = g[(1, 2)] / d3;
    let l31 = g[(2, 0)] / d3;
    let l32 = g[(2, 1)] / d3;
    let s11 = g[(0, 0)] - r13 * d3 * l31;
    let s12 = g[(0, 1)] - r13 * d3 * l32;
    let s21 = g[(1, 0)] - r23 * d3 * l31;
    let s22 = g[(1, 1)] - r23 * d3 * l32;
    if small(s22) {
        return None;
    }
    let d2 = s22;
    let r12 = s12 / d2;
    let l21 = s21 / d2;
    let d1 = s11 - r12 * d2 * l21;
    if small(d1) {
        return None;
    }
    let o = C64::new(0.0, 0.0);
    let i = ONE;
    Some(NormalOrderFactors {
        upper: Matrix3::new(i, r12, r13, o, i, r23, o, o, i),
        diagonal: [d1, d2, d3],
        lower: Matrix3::new(i, o, o, l21, i, o, l31, l32, i),
    })
}

/// Inverse of a unit upper triangular 3×3 matrix.
pub fn unit_upper_inverse(r: &ComplexMatrix) -> ComplexMatrix {
    let (a, b, c) = (r[(0, 1)], r[(0, 2)], r[(1, 2)]);
    let o = C64::new(0.0, 0.0);
    Matrix3::new(ONE, -a, a * c - b, o, ONE, -c, o, o, ONE)
}

/// Inverse of a unit lower triangular 3×3 matrix.
pub fn unit_lower_inverse(l: &ComplexMatrix) -> ComplexMatrix {
    unit_upper_inverse(&l.transpose()).transpose()
}

/// Ladder parameters `(α_{X1}, α_{X2}, α_{X3})` of a unit upper triangular
/// matrix written as `e^{iα I+} e^{iα U+} e^{iα V+}`, in that order.
pub fn upper_ladder_parameters(r: &ComplexMatrix) -> [C64; 3] {
    let mi = -C64::i();
    let ip = mi * r[(0, 1)];
    let up = mi * r[(1, 2)];
    let vp = mi * (r[(0, 2)] - r[(0, 1)] * r[(1, 2)]);
    [ip, up, vp]
}

/// Ladder parameters `(α_{V-}, α_{U-}, α_{I-})` of a unit lower triangular
/// matrix written as `e^{iα V-} e^{iα U-} e^{iα I-}`.
pub fn lower_ladder_parameters(l: &ComplexMatrix) -> [C64; 3] {
    let mi = -C64::i();
    let im = mi * l[(1, 0)];
    let um = mi * l[(2, 1)];
    let vm = mi * (l[(2, 0)] - l[(2, 1)] * l[(1, 0)]);
    [vm, um, im]
}
