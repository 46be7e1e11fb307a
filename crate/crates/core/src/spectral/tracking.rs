//! Continuation of the three eigenvalue branches along a parameter path, with
//! detection of the points where two or three of them meet.

use super::{cubic_roots, discriminant, invariants, Invariants, DEFAULT_EP_EPS};
use crate::algebra::{frobenius, is_finite, traceless_part, Coupling};
use crate::{ComplexMatrix, Error, Result, C64};

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOptions {
    /// Relative threshold on `|Δ|/scale⁶` below which a local minimum of the
    /// discriminant counts as a degeneracy.
    pub eps: f64,
    /// Relative threshold on `|β₂|/scale²` and `|β₃|/scale³` for calling a
    /// located degeneracy a triple point.
    pub ep3_tol: f64,
    /// Relative threshold on the second singular value of `M − λ` separating
    /// diabolical crossings from exceptional ones.
    pub diabolical_tol: f64,
    /// Maximum bisection depth when a grid step is too coarse to match
    /// branches unambiguously.
    pub max_refine: u32,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        TrackingOptions {
            eps: DEFAULT_EP_EPS,
            ep3_tol: 1e-6,
            diabolical_tol: 1e-6,
            max_refine: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Ep2,
    Ep3,
    Diabolical,
    /// Two branch assignments were equally good after maximal refinement.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub z: f64,
    pub kind: EventKind,
    /// Tracked branch indices that meet (for `Ep3`, the closest pair).
    pub branches: (usize, usize),
    pub discriminant: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTracking {
    pub z: Vec<f64>,
    /// Eigenvalues per grid point, column `j` continuous along the path.
    pub lambdas: Vec<[C64; 3]>,
    pub events: Vec<BranchEvent>,
}

impl BranchTracking {
    pub fn branch(&self, j: usize) -> impl Iterator<Item = C64> + '_ {
        self.lambdas.iter().map(move |l| l[j])
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

struct Sample {
    inv: Invariants,
    scale: f64,
    m1: ComplexMatrix,
}

struct Tracker<'a, F: ?Sized> {
    family: &'a F,
    opts: TrackingOptions,
    events: Vec<BranchEvent>,
}

impl<F: Coupling + ?Sized> Tracker<'_, F> {
    fn sample(&self, z: f64) -> Result<Sample> {
        let m = self.family.matrix_at(z);
        if !is_finite(&m) {
            return Err(Error::NonFinite {
                what: "coupling matrix",
                z,
            });
        }
        let m1 = traceless_part(&m);
        Ok(Sample {
            inv: invariants(&m1)?,
            scale: frobenius(&m1),
            m1,
        })
    }

    fn relative_discriminant(&self, z: f64) -> Result<f64> {
        let s = self.sample(z)?;
        Ok(if s.scale == 0.0 {
            0.0
        } else {
            discriminant(&s.inv).norm() / s.scale.powi(6)
        })
    }

    /// Eigenvalues at `zb` ordered to continue `prev` (taken at `za`).
    fn advance(&mut self, za: f64, prev: [C64; 3], zb: f64, depth: u32) -> Result<[C64; 3]> {
        let s = self.sample(zb)?;
        let roots = cubic_roots(&s.inv);
        let ranked = rank_assignments(&prev, &roots);
        let (best_cost, best) = ranked[0];
        let next = [roots[best[0]], roots[best[1]], roots[best[2]]];
        let step = (0..3).map(|j| (next[j] - prev[j]).norm()).fold(0.0, f64::max);
        let sep = min_separation(&roots);
        if step > 0.5 * sep && depth < self.opts.max_refine {
            let mid = 0.5 * (za + zb);
            let at_mid = self.advance(za, prev, mid, depth + 1)?;
            return self.advance(mid, at_mid, zb, depth + 1);
        }
        let tie = 1e-9 * s.scale.max(f64::MIN_POSITIVE);
        if depth >= self.opts.max_refine && ranked[1].0 - best_cost <= tie && sep > 1e-6 * s.scale {
            self.events.push(BranchEvent {
                z: zb,
                kind: EventKind::Ambiguous,
                branches: (0, 0),
                discriminant: discriminant(&s.inv),
            });
        }
        Ok(next)
    }

    fn classify_event(&mut self, za: f64, prev: [C64; 3], z: f64) -> Result<BranchEvent> {
        let s = self.sample(z)?;
        let ordered = self.advance(za, prev, z, 0)?;
        let (i, j) = closest_pair(&ordered);
        let scale = s.scale.max(f64::MIN_POSITIVE);
        let kind = if s.inv.beta2.norm() < self.opts.ep3_tol * scale * scale
            && s.inv.beta3.norm() < self.opts.ep3_tol * scale.powi(3)
        {
            EventKind::Ep3
        } else {
            let centre = 0.5 * (ordered[i] + ordered[j]);
            let mut shifted = s.m1;
            for k in 0..3 {
                shifted[(k, k)] -= centre;
            }
            let sv = shifted.singular_values();
            let mut sv: Vec<f64> = sv.iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            if sv[1] <= self.opts.diabolical_tol * sv[0].max(scale) {
                EventKind::Diabolical
            } else {
                EventKind::Ep2
            }
        };
        Ok(BranchEvent {
            z,
            kind,
            branches: (i, j),
            discriminant: discriminant(&s.inv),
        })
    }

    fn signed_discriminant(&self, z: f64) -> Result<Option<f64>> {
        let s = self.sample(z)?;
        let d = discriminant(&s.inv);
        Ok((d.im.abs() <= 1e-8 * d.norm().max(f64::MIN_POSITIVE)).then_some(d.re))
    }

    fn bisect_sign_change(&self, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.signed_discriminant(m)?.unwrap_or(0.0);
            if fm == 0.0 {
                return Ok(m);
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    fn golden_minimum(&self, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.relative_discriminant(c)?;
        let mut fd = self.relative_discriminant(d)?;
        for _ in 0..200 {
            if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.relative_discriminant(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.relative_discriminant(d)?;
            }
        }
        Ok(if fc < fd { (c, fc) } else { (d, fd) })
    }
}

/// Follows the eigenvalues of the traceless part of `family` across the
/// ordered grid and reports where branches meet.
///
/// Adjacent grid points are matched by the permutation of minimal total
/// displacement; steps whose displacement exceeds half the branch separation
/// are bisected. Degeneracies are located where a real discriminant changes
/// sign (bisection) or where `|Δ|` has an interior local minimum below
/// `eps·scale⁶` (golden-section search).
pub fn track_branches<F: Coupling + ?Sized>(
    family: &F,
    z_grid: &[f64],
    opts: &TrackingOptions,
) -> Result<BranchTracking> {
    if z_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let mut tracker = Tracker {
        family,
        opts: *opts,
        events: Vec::new(),
    };
    let mut lambdas = Vec::with_capacity(z_grid.len());
    let Some(&z0) = z_grid.first() else {
        return Ok(BranchTracking {
            z: Vec::new(),
            lambdas,
            events: Vec::new(),
        });
    };
    lambdas.push(cubic_roots(&tracker.sample(z0)?.inv));
    for k in 1..z_grid.len() {
        let next = tracker.advance(z_grid[k - 1], lambdas[k - 1], z_grid[k], 0)?;
        lambdas.push(next);
    }

    let signs = z_grid
        .iter()
        .map(|&z| tracker.signed_discriminant(z))
        .collect::<Result<Vec<_>>>()?;
    let rel = z_grid
        .iter()
        .map(|&z| tracker.relative_discriminant(z))
        .collect::<Result<Vec<_>>>()?;

    let mut located: Vec<(f64, usize)> = Vec::new();
    for k in 1..z_grid.len() {
        if let (Some(a), Some(b)) = (signs[k - 1], signs[k]) {
            if a * b < 0.0 {
                let z = tracker.bisect_sign_change(z_grid[k - 1], z_grid[k], a)?;
                located.push((z, k - 1));
            }
        }
    }
    for k in 0..z_grid.len() {
        let left = if k > 0 { rel[k - 1] } else { f64::INFINITY };
        let right = rel.get(k + 1).copied().unwrap_or(f64::INFINITY);
        if !(rel[k] <= left && rel[k] <= right) || (k == 0 && k + 1 == z_grid.len()) {
            continue;
        }
        let a = z_grid[k.saturating_sub(1)];
        let b = z_grid[(k + 1).min(z_grid.len() - 1)];
        let (z, value) = if rel[k] == 0.0 { (z_grid[k], 0.0) } else { tracker.golden_minimum(a, b)? };
        if value >= opts.eps {
            continue;
        }
        if located.iter().any(|(zl, _)| (a..=b).contains(zl)) {
            continue;
        }
        let base = z_grid.partition_point(|&g| g <= z).saturating_sub(1);
        located.push((z, base));
    }
    located.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut events = Vec::with_capacity(located.len());
    for &(z, base) in &located {
        events.push(tracker.classify_event(z_grid[base], lambdas[base], z)?);
    }
    // Matching is ambiguous by nature next to a branch point; only keep
    // ambiguities that no located degeneracy explains.
    let explained = |z: f64| {
        located.iter().any(|&(_, base)| {
            let hi = z_grid[(base + 1).min(z_grid.len() - 1)];
            (z_grid[base]..=hi).contains(&z)
        })
    };
    events.extend(tracker.events.drain(..).filter(|e| !explained(e.z)));
    events.sort_by(|a, b| a.z.total_cmp(&b.z));
    Ok(BranchTracking {
        z: z_grid.to_vec(),
        lambdas,
        events,
    })
}

/// Permutations of `next` sorted by total distance to `prev`.
fn rank_assignments(prev: &[C64; 3], next: &[C64; 3]) -> Vec<(f64, [usize; 3])> {
    let mut ranked: Vec<(f64, [usize; 3])> = PERMUTATIONS
        .iter()
        .map(|p| ((0..3).map(|j| (next[p[j]] - prev[j]).norm()).sum(), *p))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    ranked
}

fn min_separation(v: &[C64; 3]) -> f64 {
    let (i, j) = closest_pair(v);
    (v[i] - v[j]).norm()
}

fn closest_pair(v: &[C64; 3]) -> (usize, usize) {
    [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .min_by(|a, b| (v[a.0] - v[a.1]).norm().total_cmp(&(v[b.0] - v[b.1]).norm()))
        .unwrap()
}
