//! Fixed-excitation bosonic sectors of three modes.
//!
//! A 3×3 matrix `M` is promoted to the number-conserving bilinear
//! `M̂ = Σ M_jk a†_j a_k`, which acts within the sector of `n` total
//! excitations (the totally symmetric irrep `(n,0)` of sl(3,ℂ)).

use std::cell::Cell;
use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::algebra::{gauge_phase, is_finite, traceless_part, Coupling};
use crate::ode::Dopri5;
use crate::propagator::PropagationOptions;
use crate::spectral::SpectralFrame;
use crate::{ComplexMatrix, Error, Result, C64};

/// Occupation numbers `(n₁, n₂, n₃)`.
pub type Occupation = [usize; 3];

/// Default largest sector stored densely by [`promote`].
pub const DENSE_MAX_N: usize = 8;

/// One nonzero matrix element of `a†_j a_k`: `⟨to| a†_j a_k |from⟩ = amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Transfer {
    to: usize,
    from: usize,
    j: usize,
    k: usize,
    amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    n: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    transfers: Vec<Transfer>,
}

/// Number of occupation triples with `n` excitations, `(n+1)(n+2)/2`.
pub fn sector_dimension(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

impl FockBasis {
    /// States ordered lexicographically descending in `(n₁, n₂)`.
    pub fn new(n: usize) -> Self {
        let mut states = Vec::with_capacity(sector_dimension(n));
        for n1 in (0..=n).rev() {
            for n2 in (0..=n - n1).rev() {
                states.push([n1, n2, n - n1 - n2]);
            }
        }
        let index: HashMap<Occupation, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut transfers = Vec::new();
        for (from, m) in states.iter().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    if j == k {
                        if m[j] > 0 {
                            transfers.push(Transfer {
                                to: from,
                                from,
                                j,
                                k,
                                amp: m[j] as f64,
                            });
                        }
                        continue;
                    }
                    if m[k] == 0 {
                        continue;
                    }
                    let mut p = *m;
                    p[k] -= 1;
                    p[j] += 1;
                    transfers.push(Transfer {
                        to: index[&p],
                        from,
                        j,
                        k,
                        amp: (((m[j] + 1) * m[k]) as f64).sqrt(),
                    });
                }
            }
        }
        FockBasis {
            n,
            states,
            index,
            transfers,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn index_of(&self, state: &Occupation) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// `y = M̂ x` without forming the operator.
    pub fn apply(&self, m: &ComplexMatrix, x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        for t in &self.transfers {
            y[t.to] += m[(t.j, t.k)] * t.amp * x[t.from];
        }
    }

    /// `y = x M̂` for a row vector `x`.
    pub fn apply_left(&self, m: &ComplexMatrix, x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        for t in &self.transfers {
            y[t.from] += x[t.to] * m[(t.j, t.k)] * t.amp;
        }
    }
}

/// Weight-diagram coordinates of an occupation state: `I0` in halves, `Y` in
/// thirds, and the Dynkin-style pair `(n₁−n₂, n₂−n₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightPoint {
    pub i0_halves: i64,
    pub y_thirds: i64,
    pub dynkin_p: i64,
    pub dynkin_q: i64,
}

impl WeightPoint {
    pub fn i0(&self) -> f64 {
        self.i0_halves as f64 / 2.0
    }

    pub fn y(&self) -> f64 {
        self.y_thirds as f64 / 3.0
    }
}

pub fn weight_coordinates(state: &Occupation) -> WeightPoint {
    let [n1, n2, n3] = state.map(|v| v as i64);
    let n = n1 + n2 + n3;
    WeightPoint {
        i0_halves: n - 2 * n2 - n3,
        y_thirds: n - 3 * n3,
        dynkin_p: n1 - n2,
        dynkin_q: n2 - n3,
    }
}

/// Amplitudes over a [`FockBasis`]. Propagation under non-Hermitian
/// couplings does not preserve the norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub n: usize,
    pub amplitudes: Vec<C64>,
}

impl FockVector {
    pub fn zeros(basis: &FockBasis) -> Self {
        FockVector {
            n: basis.n,
            amplitudes: vec![C64::new(0.0, 0.0); basis.len()],
        }
    }

    pub fn basis_state(basis: &FockBasis, state: &Occupation) -> Result<Self> {
        let mut v = Self::zeros(basis);
        let k = basis.index_of(state).ok_or(Error::SectorMismatch {
            expected: basis.n,
            got: state.iter().sum(),
        })?;
        v.amplitudes[k] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// Normalised superposition of the given occupation states with equal
    /// weights, e.g. a NOON pair.
    pub fn superposition(basis: &FockBasis, states: &[Occupation]) -> Result<Self> {
        let mut v = Self::zeros(basis);
        let w = 1.0 / (states.len() as f64).sqrt();
        for s in states {
            let k = basis.index_of(s).ok_or(Error::SectorMismatch {
                expected: basis.n,
                got: s.iter().sum(),
            })?;
            v.amplitudes[k] += C64::new(w, 0.0);
        }
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check(&self, basis: &FockBasis) -> Result<()> {
        if self.n != basis.n || self.amplitudes.len() != basis.len() {
            return Err(Error::SectorMismatch {
                expected: basis.n,
                got: self.n,
            });
        }
        Ok(())
    }
}

/// Promoted operator, dense for small sectors and a coordinate list above.
#[derive(Debug, Clone, PartialEq)]
pub enum FockOperator {
    Dense(DMatrix<C64>),
    Sparse {
        dim: usize,
        entries: Vec<(usize, usize, C64)>,
    },
}

impl FockOperator {
    pub fn dim(&self) -> usize {
        match self {
            FockOperator::Dense(m) => m.nrows(),
            FockOperator::Sparse { dim, .. } => *dim,
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            FockOperator::Dense(m) => m.clone(),
            FockOperator::Sparse { dim, entries } => {
                let mut m = DMatrix::zeros(*dim, *dim);
                for &(r, c, v) in entries {
                    m[(r, c)] += v;
                }
                m
            }
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self {
            FockOperator::Dense(m) => (m * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec(),
            FockOperator::Sparse { dim, entries } => {
                let mut y = vec![C64::new(0.0, 0.0); *dim];
                for &(r, c, v) in entries {
                    y[r] += v * x[c];
                }
                y
            }
        }
    }
}

/// `Σ M_jk a†_j a_k` on the `n`-excitation sector.
pub fn promote(m: &ComplexMatrix, basis: &FockBasis) -> FockOperator {
    promote_with_threshold(m, basis, DENSE_MAX_N)
}

pub fn promote_with_threshold(m: &ComplexMatrix, basis: &FockBasis, dense_max_n: usize) -> FockOperator {
    if basis.n <= dense_max_n {
        let mut d = DMatrix::zeros(basis.len(), basis.len());
        for t in &basis.transfers {
            d[(t.to, t.from)] += m[(t.j, t.k)] * t.amp;
        }
        FockOperator::Dense(d)
    } else {
        let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
        for t in &basis.transfers {
            let v = m[(t.j, t.k)] * t.amp;
            if v != C64::new(0.0, 0.0) {
                *acc.entry((t.to, t.from)).or_default() += v;
            }
        }
        let mut entries: Vec<(usize, usize, C64)> = acc.into_iter().map(|((r, c), v)| (r, c, v)).collect();
        entries.sort_by_key(|e| (e.0, e.1));
        FockOperator::Sparse {
            dim: basis.len(),
            entries,
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Representation `Ĝ` of a group element `G` on the sector, defined by
/// `Ĝ a†_k Ĝ⁻¹ = Σ_j G_jk a†_j` and `Ĝ|0⟩ = |0⟩`.
pub fn promote_group(g: &ComplexMatrix, basis: &FockBasis) -> DMatrix<C64> {
    let n = basis.n;
    let lower: Vec<FockBasis> = (0..=n).map(FockBasis::new).collect();
    let mut out = DMatrix::zeros(basis.len(), basis.len());
    for (col, m) in basis.states.iter().enumerate() {
        // Coefficients of Π_k (Σ_j G_jk x_j)^{m_k} over monomials of rising
        // degree, indexed through the basis of that degree.
        let mut poly = vec![C64::new(1.0, 0.0)];
        let mut degree = 0;
        for k in 0..3 {
            for _ in 0..m[k] {
                let next_basis = &lower[degree + 1];
                let mut next = vec![C64::new(0.0, 0.0); next_basis.len()];
                for (idx, p) in lower[degree].states.iter().enumerate() {
                    let c = poly[idx];
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..3 {
                        let mut q = *p;
                        q[j] += 1;
                        next[next_basis.index[&q]] += c * g[(j, k)];
                    }
                }
                poly = next;
                degree += 1;
            }
        }
        let norm_m: f64 = m.iter().map(|&v| factorial(v)).product::<f64>().sqrt();
        for (row, p) in basis.states.iter().enumerate() {
            let norm_p: f64 = p.iter().map(|&v| factorial(v)).product::<f64>().sqrt();
            out[(row, col)] = poly[row] * norm_p / norm_m;
        }
    }
    out
}

/// Heisenberg-picture operator `Û⁻¹ X̂ Û` for a unimodular propagator `U`.
pub fn heisenberg_operator(u: &ComplexMatrix, x: &ComplexMatrix, basis: &FockBasis) -> Result<DMatrix<C64>> {
    let u_inv = u.try_inverse().ok_or(Error::InvalidParameter("singular propagator".into()))?;
    Ok(promote_group(&u_inv, basis) * promote(x, basis).to_dense() * promote_group(u, basis))
}

/// Integrates `∂z ψ = i M̂1(z) ψ` on the sector of `psi0` and restores the
/// scalar gauge, `ψ → exp(i n·gauge(z)) ψ`.
pub fn propagate_fock<F: Coupling + ?Sized>(
    family: &F,
    basis: &FockBasis,
    psi0: &FockVector,
    samples: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<FockVector>> {
    propagate_sector(family, basis, psi0, samples, opts, false)
}

/// Left (bra) evolution `∂z l = −i l M̂1(z)`, which keeps `l(z)·r(z)`
/// constant for a right state `r` evolved with [`propagate_fock`].
pub fn propagate_fock_left<F: Coupling + ?Sized>(
    family: &F,
    basis: &FockBasis,
    l0: &FockVector,
    samples: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<FockVector>> {
    propagate_sector(family, basis, l0, samples, opts, true)
}

fn propagate_sector<F: Coupling + ?Sized>(
    family: &F,
    basis: &FockBasis,
    psi0: &FockVector,
    samples: &[f64],
    opts: &PropagationOptions,
    left: bool,
) -> Result<Vec<FockVector>> {
    psi0.check(basis)?;
    if samples.iter().any(|z| !z.is_finite() || *z < 0.0) || samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "sample points must be finite, non-negative and non-decreasing".into(),
        ));
    }
    let dim = basis.len();
    let mut stepper = Dopri5::new(dim, opts.tol);
    let mut y = psi0.amplitudes.clone();
    let bad: Cell<Option<f64>> = Cell::new(None);
    let sign = if left { -C64::i() } else { C64::i() };
    let mut rhs = |z: f64, x: &[C64], dx: &mut [C64]| {
        let m = family.matrix_at(z);
        if !is_finite(&m) {
            if bad.get().is_none() {
                bad.set(Some(z));
            }
            dx.fill(C64::new(f64::NAN, 0.0));
            return;
        }
        let m1 = traceless_part(&m) * sign;
        if left {
            basis.apply_left(&m1, x, dx);
        } else {
            basis.apply(&m1, x, dx);
        }
    };
    let mut z = 0.0;
    let mut raw = Vec::with_capacity(samples.len());
    for &target in samples {
        let res = stepper.integrate_to(&mut rhs, &mut z, &mut y, target);
        if let Some(zb) = bad.get() {
            return Err(Error::NonFinite {
                what: "coupling matrix",
                z: zb,
            });
        }
        res?;
        raw.push(y.clone());
    }
    let n = basis.n as f64;
    samples
        .iter()
        .zip(raw)
        .map(|(&z, amps)| {
            let phase = (sign * n * gauge_phase(family, z, opts.tol.rtol)?).exp();
            Ok(FockVector {
                n: basis.n,
                amplitudes: amps.into_iter().map(|a| a * phase).collect(),
            })
        })
        .collect()
}

/// Occupation probabilities `P = |⟨m|ψ⟩|²` and their renormalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitudes {
    pub states: Vec<Occupation>,
    pub p: Vec<f64>,
    pub p_tilde: Vec<f64>,
}

pub fn amplitudes(basis: &FockBasis, psi: &FockVector) -> Result<Amplitudes> {
    psi.check(basis)?;
    let p: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::UndefinedRenormalization);
    }
    Ok(Amplitudes {
        states: basis.states.clone(),
        p_tilde: p.iter().map(|v| v / total).collect(),
        p,
    })
}

/// Biorthogonal mode populations `n_j = ⟨l| n̂_j |r⟩` and `ñ_j = n_j / Σ|n_k|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations {
    pub n: [C64; 3],
    pub n_tilde: [C64; 3],
}

impl Populations {
    pub fn moduli(&self) -> [f64; 3] {
        self.n.map(|v| v.norm())
    }
}

pub fn biorthogonal_populations(basis: &FockBasis, right: &FockVector, left: &FockVector) -> Result<Populations> {
    right.check(basis)?;
    left.check(basis)?;
    let mut n = [C64::new(0.0, 0.0); 3];
    for (s, m) in basis.states.iter().enumerate() {
        let w = left.amplitudes[s] * right.amplitudes[s];
        for j in 0..3 {
            n[j] += w * m[j] as f64;
        }
    }
    let total: f64 = n.iter().map(|v| v.norm()).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::UndefinedRenormalization);
    }
    Ok(Populations {
        n,
        n_tilde: n.map(|v| v / total),
    })
}

/// Eigenbasis of a promoted matrix obtained from a classical frame: the
/// right eigenstates are the columns of `T̂`, the left ones the rows of
/// `T̂⁻¹`, with eigenvalue `Σ m_j λ_j` for occupation `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromotedFrame {
    pub n: usize,
    pub t: DMatrix<C64>,
    pub t_inv: DMatrix<C64>,
    pub eigenvalues: Vec<C64>,
}

impl PromotedFrame {
    pub fn new(frame: &SpectralFrame, basis: &FockBasis) -> Self {
        PromotedFrame {
            n: basis.n,
            t: promote_group(&frame.t, basis),
            t_inv: promote_group(&frame.t_inv, basis),
            eigenvalues: basis
                .states
                .iter()
                .map(|m| (0..3).map(|j| frame.lambdas[j] * m[j] as f64).sum())
                .collect(),
        }
    }

    pub fn right(&self, k: usize) -> FockVector {
        FockVector {
            n: self.n,
            amplitudes: self.t.column(k).iter().copied().collect(),
        }
    }

    pub fn left(&self, k: usize) -> FockVector {
        FockVector {
            n: self.n,
            amplitudes: self.t_inv.row(k).iter().copied().collect(),
        }
    }
}

fn rank(m: &DMatrix<C64>, threshold: f64) -> usize {
    m.clone().singular_values().iter().filter(|s| **s > threshold).count()
}

/// Smallest `k` with `A^k = 0`, judged by the numerical rank of `A^k` with
/// singular values below `tol·‖A‖^k` treated as zero. `None` if `A` is not
/// nilpotent within `dim + 1` powers.
pub fn nilpotency_index(a: &DMatrix<C64>, tol: f64) -> Option<usize> {
    let norm = a.norm();
    if norm == 0.0 {
        return Some(1);
    }
    let mut power = a.clone();
    for k in 1..=a.nrows() + 1 {
        if rank(&power, tol * norm.powi(k as i32)) == 0 {
            return Some(k);
        }
        power = &power * a;
    }
    None
}

/// Sizes of the Jordan blocks of `A` at eigenvalue `lambda`, largest first,
/// from the ranks of `(A − λ)^k`.
pub fn jordan_block_sizes(a: &DMatrix<C64>, lambda: C64, tol: f64) -> Vec<usize> {
    let dim = a.nrows();
    let shifted = a - DMatrix::identity(dim, dim) * lambda;
    let norm = shifted.norm().max(1.0);
    let mut ranks = vec![dim];
    let mut power = DMatrix::identity(dim, dim);
    for k in 1..=dim {
        power = &power * &shifted;
        let r = rank(&power, tol * norm.powi(k as i32));
        ranks.push(r);
        if r == ranks[k - 1] {
            break;
        }
    }
    // blocks of size ≥ k: ranks[k−1] − ranks[k].
    let at_least: Vec<usize> = ranks.windows(2).map(|w| w[0] - w[1]).collect();
    let mut sizes = Vec::new();
    for k in (0..at_least.len()).rev() {
        let exactly = at_least[k] - at_least.get(k + 1).copied().unwrap_or(0);
        sizes.extend(std::iter::repeat_n(k + 1, exactly));
    }
    sizes
}

/// Number operators `n̂_j` as diagonal matrices on the sector.
pub fn number_operator(basis: &FockBasis, j: usize) -> DMatrix<C64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        basis.len(),
        basis.states.iter().map(|m| C64::from(m[j] as f64)),
    ))
}
