//! Concrete coupler families, loops around the triple point, EP2 search and
//! discriminant maps.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Matrix3;

use crate::algebra::{frobenius, traceless_part, Coupling};
use crate::spectral::{classify, discriminant, invariants, Invariants, Regime, DEFAULT_EP_EPS};
use crate::{ComplexMatrix, Error, Result, C64};

/// A real parameter as a function of the propagation coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `value + slope·z`.
    Linear { value: f64, slope: f64 },
    /// `offset + amplitude·cos(angular·z + phase)`.
    Harmonic {
        offset: f64,
        amplitude: f64,
        angular: f64,
        phase: f64,
    },
    /// Piecewise-cubic (Catmull–Rom) interpolation of samples, held
    /// constant outside the sampled range.
    Sampled(Sampled<f64>),
}

impl Profile {
    pub fn at(&self, z: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Linear { value, slope } => value + slope * z,
            Profile::Harmonic {
                offset,
                amplitude,
                angular,
                phase,
            } => offset + amplitude * (angular * z + phase).cos(),
            Profile::Sampled(s) => s.at(z),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Profile::Constant(v) => v.is_finite(),
            Profile::Linear { value, slope } => value.is_finite() && slope.is_finite(),
            Profile::Harmonic {
                offset,
                amplitude,
                angular,
                phase,
            } => [offset, amplitude, angular, phase].iter().all(|v| v.is_finite()),
            Profile::Sampled(_) => true,
        }
    }
}

impl From<f64> for Profile {
    fn from(v: f64) -> Self {
        Profile::Constant(v)
    }
}

/// Values on a strictly increasing grid with cubic interpolation between.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<T> {
    z: Vec<f64>,
    values: Vec<T>,
}

/// Values that can be combined linearly by the cubic interpolant.
pub trait Interpolable: Copy {
    fn scaled(self, s: f64) -> Self;
    fn plus(self, other: Self) -> Self;
}

impl Interpolable for f64 {
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    fn plus(self, other: Self) -> Self {
        self + other
    }
}

impl Interpolable for ComplexMatrix {
    fn scaled(self, s: f64) -> Self {
        self * C64::from(s)
    }
    fn plus(self, other: Self) -> Self {
        self + other
    }
}

impl<T: Interpolable> Sampled<T> {
    pub fn new(z: Vec<f64>, values: Vec<T>) -> Result<Self> {
        if z.len() != values.len() || z.len() < 2 {
            return Err(Error::InvalidParameter(
                "sampled profile needs at least two (z, value) pairs".into(),
            ));
        }
        if z.iter().any(|v| !v.is_finite()) || z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "sample coordinates must be finite and strictly increasing".into(),
            ));
        }
        Ok(Sampled { z, values })
    }

    fn slope(&self, k: usize) -> T {
        let n = self.z.len();
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k == n - 1 {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        self.values[b]
            .plus(self.values[a].scaled(-1.0))
            .scaled(1.0 / (self.z[b] - self.z[a]))
    }

    pub fn at(&self, z: f64) -> T {
        let n = self.z.len();
        if z <= self.z[0] {
            return self.values[0];
        }
        if z >= self.z[n - 1] {
            return self.values[n - 1];
        }
        let k = self.z.partition_point(|&g| g <= z) - 1;
        let h = self.z[k + 1] - self.z[k];
        let t = (z - self.z[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        self.values[k]
            .scaled(2.0 * t3 - 3.0 * t2 + 1.0)
            .plus(self.slope(k).scaled((t3 - 2.0 * t2 + t) * h))
            .plus(self.values[k + 1].scaled(-2.0 * t3 + 3.0 * t2))
            .plus(self.slope(k + 1).scaled((t3 - t2) * h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `[[iγ, κ₁, κ₂], [κ₁, 0, κ₁], [κ₂, κ₁, −iγ]]`; a PT-symmetric trimer
    /// when `κ₂ = 0`.
    PtCyclic,
    /// `[[iγ, κ₁, iκ₂], [κ₁, 0, κ₁], [iκ₂, κ₁, −iγ]]`.
    Chiral1,
    /// `[[iγ, κ, −κ], [κ, 0, iκ], [−κ, iκ, −iγ]]`.
    Chiral2,
    Custom,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::PtCyclic => "pt-cyclic",
            FamilyKind::Chiral1 => "chiral1",
            FamilyKind::Chiral2 => "chiral2",
            FamilyKind::Custom => "custom",
        }
    }

    /// Coupling matrix for scalar parameters; `Chiral2` reads `κ` from
    /// `kappa1` and ignores `kappa2`. `Custom` yields zero.
    pub fn matrix(self, gamma: f64, kappa1: f64, kappa2: f64) -> ComplexMatrix {
        let c = |v: f64| C64::new(v, 0.0);
        let ic = |v: f64| C64::new(0.0, v);
        match self {
            FamilyKind::PtCyclic => Matrix3::new(
                ic(gamma),
                c(kappa1),
                c(kappa2),
                c(kappa1),
                c(0.0),
                c(kappa1),
                c(kappa2),
                c(kappa1),
                ic(-gamma),
            ),
            FamilyKind::Chiral1 => Matrix3::new(
                ic(gamma),
                c(kappa1),
                ic(kappa2),
                c(kappa1),
                c(0.0),
                c(kappa1),
                ic(kappa2),
                c(kappa1),
                ic(-gamma),
            ),
            FamilyKind::Chiral2 => {
                let k = kappa1;
                Matrix3::new(ic(gamma), c(k), c(-k), c(k), c(0.0), ic(k), c(-k), ic(k), ic(-gamma))
            }
            FamilyKind::Custom => ComplexMatrix::zeros(),
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pt-cyclic" | "ptcyclic" | "cyclic" => Ok(FamilyKind::PtCyclic),
            "chiral1" | "chiral-1" => Ok(FamilyKind::Chiral1),
            "chiral2" | "chiral-2" => Ok(FamilyKind::Chiral2),
            "custom" => Ok(FamilyKind::Custom),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

/// Externally supplied coupling for [`FamilyKind::Custom`].
#[derive(Debug, Clone, PartialEq)]
pub enum CustomCoupling {
    Constant(ComplexMatrix),
    Sampled(Sampled<ComplexMatrix>),
}

/// A z-dependent mode-coupling matrix. Evaluation returns the traceless part
/// of the underlying matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplerFamily {
    pub kind: FamilyKind,
    pub gamma: Profile,
    pub kappa1: Profile,
    pub kappa2: Profile,
    pub custom: Option<CustomCoupling>,
    /// Closed interval on which the family is meant to be evaluated.
    pub domain: (f64, f64),
}

impl CouplerFamily {
    pub fn new(kind: FamilyKind, gamma: Profile, kappa1: Profile, kappa2: Profile) -> Result<Self> {
        if kind == FamilyKind::Custom {
            return Err(Error::InvalidParameter(
                "custom families are built from matrices".into(),
            ));
        }
        if ![&gamma, &kappa1, &kappa2].iter().all(|p| p.is_finite()) {
            return Err(Error::InvalidParameter("family parameters must be finite".into()));
        }
        Ok(CouplerFamily {
            kind,
            gamma,
            kappa1,
            kappa2,
            custom: None,
            domain: (0.0, f64::INFINITY),
        })
    }

    pub fn custom(coupling: CustomCoupling) -> Self {
        CouplerFamily {
            kind: FamilyKind::Custom,
            gamma: Profile::Constant(0.0),
            kappa1: Profile::Constant(0.0),
            kappa2: Profile::Constant(0.0),
            custom: Some(coupling),
            domain: (0.0, f64::INFINITY),
        }
    }

    /// `(γ, κ₁, κ₂)` at `z`.
    pub fn parameters_at(&self, z: f64) -> (f64, f64, f64) {
        (self.gamma.at(z), self.kappa1.at(z), self.kappa2.at(z))
    }
}

impl Coupling for CouplerFamily {
    fn matrix_at(&self, z: f64) -> ComplexMatrix {
        let m = match &self.custom {
            Some(CustomCoupling::Constant(m)) => *m,
            Some(CustomCoupling::Sampled(s)) => s.at(z),
            None => {
                let (g, k1, k2) = self.parameters_at(z);
                self.kind.matrix(g, k1, k2)
            }
        };
        traceless_part(&m)
    }
}

pub fn pt_cyclic(gamma: f64, kappa1: f64, kappa2: f64) -> Result<CouplerFamily> {
    CouplerFamily::new(FamilyKind::PtCyclic, gamma.into(), kappa1.into(), kappa2.into())
}

pub fn chiral_1(gamma: f64, kappa1: f64, kappa2: f64) -> Result<CouplerFamily> {
    CouplerFamily::new(FamilyKind::Chiral1, gamma.into(), kappa1.into(), kappa2.into())
}

pub fn chiral_2(gamma: f64, kappa: f64) -> Result<CouplerFamily> {
    CouplerFamily::new(FamilyKind::Chiral2, gamma.into(), kappa.into(), 0.0.into())
}

/// Closed-form invariants of the PT-cyclic family:
/// `β₂ = γ² − 2κ₁² − κ₂²`, `β₃ = −2κ₁²κ₂`.
pub fn pt_cyclic_invariants(gamma: f64, kappa1: f64, kappa2: f64) -> Invariants {
    Invariants {
        beta2: C64::from(gamma * gamma - 2.0 * kappa1 * kappa1 - kappa2 * kappa2),
        beta3: C64::from(-2.0 * kappa1 * kappa1 * kappa2),
    }
}

/// Circular loop of radius `r` in the `(κ₁/γ, κ₂/γ)` plane centred on the
/// triple point `(1/√2, 0)`, traversed `turns` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec {
    pub r: f64,
    pub turns: u32,
}

impl LoopSpec {
    /// Propagation length of the full loop at gain `gamma`.
    pub fn length(&self, gamma: f64) -> f64 {
        self.turns as f64 / gamma
    }
}

/// `κ₁ = γ(1/√2 + r cos 2πγz)`, `κ₂ = γ r sin 2πγz` at constant `γ`, on
/// `z ∈ [0, turns/γ]`.
pub fn ep3_loop(spec: LoopSpec, gamma: f64) -> Result<CouplerFamily> {
    circular_loop((FRAC_1_SQRT_2, 0.0), spec, gamma)
}

/// Same parametrisation as [`ep3_loop`] around an arbitrary centre in the
/// `(κ₁/γ, κ₂/γ)` plane.
pub fn circular_loop(center: (f64, f64), spec: LoopSpec, gamma: f64) -> Result<CouplerFamily> {
    if !(spec.r > 0.0) || spec.turns == 0 || !(gamma > 0.0) || !spec.r.is_finite() || !gamma.is_finite() {
        return Err(Error::InvalidParameter(
            "loop needs r > 0, at least one turn and γ > 0".into(),
        ));
    }
    if !center.0.is_finite() || !center.1.is_finite() {
        return Err(Error::InvalidParameter("loop centre must be finite".into()));
    }
    let angular = 2.0 * PI * gamma;
    let mut family = CouplerFamily::new(
        FamilyKind::PtCyclic,
        Profile::Constant(gamma),
        Profile::Harmonic {
            offset: gamma * center.0,
            amplitude: gamma * spec.r,
            angular,
            phase: 0.0,
        },
        Profile::Harmonic {
            offset: gamma * center.1,
            amplitude: gamma * spec.r,
            angular,
            phase: -PI / 2.0,
        },
    )?;
    family.domain = (0.0, spec.length(gamma));
    Ok(family)
}

/// Sign changes of `f` on `n` equal subintervals of `[a, b]`, each refined
/// by bisection followed by secant steps to `|Δz| ≤ xtol`.
pub fn find_sign_changes<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, xtol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (b - a) / n as f64;
    let mut za = a;
    let mut fa = f(za);
    for k in 1..=n {
        let zb = if k == n { b } else { a + h * k as f64 };
        let fb = f(zb);
        if fa == 0.0 {
            roots.push(za);
        } else if fa * fb < 0.0 {
            roots.push(refine_root(&f, za, zb, fa, fb, xtol));
        }
        za = zb;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(za);
    }
    roots
}

fn refine_root<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, xtol: f64) -> f64 {
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    // Secant step inside the final bracket.
    let s = a - fa * (b - a) / (fb - fa);
    if s.is_finite() && s >= a && s <= b {
        s
    } else {
        0.5 * (a + b)
    }
}

/// Values of `κ₂/γ` in `bracket` where the PT-cyclic discriminant at `γ = 1`
/// and the given `κ₁/γ` changes sign. Roots where both invariants vanish
/// (the triple point) are excluded.
pub fn find_ep2(kappa1_over_gamma: f64, bracket: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = bracket;
    if !(a < b) || !a.is_finite() || !b.is_finite() || !kappa1_over_gamma.is_finite() {
        return Err(Error::InvalidParameter("bracket must be a finite interval".into()));
    }
    let k1 = kappa1_over_gamma;
    let delta = |k2: f64| discriminant(&pt_cyclic_invariants(1.0, k1, k2)).re;
    let roots = find_sign_changes(delta, a, b, 4096, 1e-15 * (a.abs() + b.abs()).max(1.0));
    Ok(roots
        .into_iter()
        .filter(|&k2| {
            let inv = pt_cyclic_invariants(1.0, k1, k2);
            let s = frobenius(&FamilyKind::PtCyclic.matrix(1.0, k1, k2));
            classify(&inv, s, 1e-12) != Regime::Ep3
        })
        .collect())
}

/// Plane of a discriminant map: `(κ₁/γ, κ₂/γ)` at `γ = 1` for the
/// two-coupling families, `(γ, κ)` for `Chiral2`.
pub fn map_matrix(kind: FamilyKind, x: f64, y: f64) -> ComplexMatrix {
    match kind {
        FamilyKind::Chiral2 => kind.matrix(x, y, 0.0),
        _ => kind.matrix(1.0, x, y),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapRecord {
    pub x: f64,
    pub y: f64,
    pub delta: C64,
    pub regime: Regime,
}

pub fn map_record(kind: FamilyKind, x: f64, y: f64, eps: f64) -> MapRecord {
    let m = traceless_part(&map_matrix(kind, x, y));
    let inv = invariants(&m).expect("traceless by construction");
    MapRecord {
        x,
        y,
        delta: discriminant(&inv),
        regime: classify(&inv, frobenius(&m), eps),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantMap {
    pub records: Vec<MapRecord>,
    /// Points on `Δ = 0` located by root polishing along each grid row.
    pub ep2_loci: Vec<(f64, f64)>,
    /// Points inside the grid where both invariants vanish, polished by
    /// Gauss–Newton.
    pub ep3_points: Vec<TriplePoint>,
}

/// A point with a threefold zero eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriplePoint {
    pub x: f64,
    pub y: f64,
    /// True for a single 3×3 Jordan block (rank two); false when the
    /// nilpotent matrix splits into a 2×2 block plus a 1×1 block.
    pub single_block: bool,
}

/// Row-major grid over `xs × ys`, with polished exceptional loci.
pub fn discriminant_map(kind: FamilyKind, xs: &[f64], ys: &[f64], eps: f64) -> Result<DiscriminantMap> {
    if kind == FamilyKind::Custom {
        return Err(Error::InvalidParameter("maps need a parametric family".into()));
    }
    let records: Vec<MapRecord> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .map(|(x, y)| map_record(kind, x, y, eps))
        .collect();
    Ok(polish_loci(kind, xs, ys, records))
}

/// Adds polished loci to grid records computed elsewhere (e.g. in
/// parallel). `records` must be row-major over `xs × ys`.
pub fn polish_loci(kind: FamilyKind, xs: &[f64], ys: &[f64], records: Vec<MapRecord>) -> DiscriminantMap {
    let ny = ys.len();
    let mut ep2_loci = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let row = &records[i * ny..(i + 1) * ny];
        for k in 1..ny {
            let (a, b) = (row[k - 1].delta.re, row[k].delta.re);
            if a * b < 0.0 {
                let f = |y: f64| discriminant(&invariants(&traceless_part(&map_matrix(kind, x, y))).unwrap()).re;
                let y = refine_root(&f, ys[k - 1], ys[k], a, b, 1e-14 * ys[k].abs().max(1.0));
                ep2_loci.push((x, y));
            }
        }
    }

    // Triple points: local minima of the scaled invariants, then
    // Gauss–Newton on (β₂, β₃) = 0.
    let nx = xs.len();
    let weight = |r: &MapRecord| {
        let m = traceless_part(&map_matrix(kind, r.x, r.y));
        let s = frobenius(&m);
        if s == 0.0 {
            return f64::INFINITY;
        }
        let inv = invariants(&m).unwrap();
        inv.beta2.norm() / (s * s) + inv.beta3.norm() / (s * s * s)
    };
    let w: Vec<f64> = records.iter().map(weight).collect();
    let mut ep3_points: Vec<TriplePoint> = Vec::new();
    let (xlo, xhi) = bounds(xs);
    let (ylo, yhi) = bounds(ys);
    let dx = grid_step(xs) + grid_step(ys);
    for i in 0..nx {
        for k in 0..ny {
            let c = w[i * ny + k];
            if !(c < 0.2) {
                continue;
            }
            let mut is_min = true;
            for (di, dk) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ii, kk) = (i as i64 + di, k as i64 + dk);
                if ii >= 0 && kk >= 0 && (ii as usize) < nx && (kk as usize) < ny && w[ii as usize * ny + kk as usize] < c {
                    is_min = false;
                }
            }
            if !is_min {
                continue;
            }
            let Some((x, y)) = polish_triple_point(kind, xs[i], ys[k]) else {
                continue;
            };
            let slack = 1e-9 * dx;
            let inside = x >= xlo - slack && x <= xhi + slack && y >= ylo - slack && y <= yhi + slack;
            let seen = ep3_points
                .iter()
                .any(|q| (q.x - x).abs() + (q.y - y).abs() < 1e-3 * dx.max(1e-12));
            if inside && !seen {
                let m = traceless_part(&map_matrix(kind, x, y));
                let sv = m.singular_values();
                ep3_points.push(TriplePoint {
                    x,
                    y,
                    single_block: sv[1] > 1e-6 * sv[0],
                });
            }
        }
    }
    DiscriminantMap {
        records,
        ep2_loci,
        ep3_points,
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn grid_step(v: &[f64]) -> f64 {
    if v.len() < 2 {
        1.0
    } else {
        (v[v.len() - 1] - v[0]).abs() / (v.len() - 1) as f64
    }
}

fn polish_triple_point(kind: FamilyKind, x0: f64, y0: f64) -> Option<(f64, f64)> {
    let residual = |x: f64, y: f64| -> [f64; 4] {
        let inv = invariants(&traceless_part(&map_matrix(kind, x, y))).unwrap();
        [inv.beta2.re, inv.beta2.im, inv.beta3.re, inv.beta3.im]
    };
    let (mut x, mut y) = (x0, y0);
    for _ in 0..60 {
        let r = residual(x, y);
        let h = 1e-7 * (1.0 + x.abs() + y.abs());
        let rx = residual(x + h, y);
        let ry = residual(x, y + h);
        let jx: Vec<f64> = (0..4).map(|k| (rx[k] - r[k]) / h).collect();
        let jy: Vec<f64> = (0..4).map(|k| (ry[k] - r[k]) / h).collect();
        let (a, b, c) = (dot(&jx, &jx), dot(&jx, &jy), dot(&jy, &jy));
        let (gx, gy) = (dot(&jx, &r), dot(&jy, &r));
        let det = a * c - b * b;
        if det.abs() < 1e-300 {
            break;
        }
        let dx = (c * gx - b * gy) / det;
        let dy = (a * gy - b * gx) / det;
        x -= dx;
        y -= dy;
        if dx.abs() + dy.abs() < 1e-15 * (1.0 + x.abs() + y.abs()) {
            break;
        }
    }
    let m = traceless_part(&map_matrix(kind, x, y));
    let s = frobenius(&m);
    let inv = invariants(&m).ok()?;
    (s > 1e-12 && inv.beta2.norm() < 1e-10 * s * s && inv.beta3.norm() < 1e-10 * s * s * s && x.is_finite() && y.is_finite())
        .then_some((x, y))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regime of a parametric family at one set of scalar parameters using the
/// default tolerance.
pub fn regime_of(kind: FamilyKind, gamma: f64, kappa1: f64, kappa2: f64) -> Regime {
    let m = traceless_part(&kind.matrix(gamma, kappa1, kappa2));
    classify(&invariants(&m).unwrap(), frobenius(&m), DEFAULT_EP_EPS)
}
