//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sl3_coupler::algebra::{commutator, elementary, frobenius, traceless_part, Coupling};
use sl3_coupler::families::{circular_loop, ep3_loop, find_ep2, pt_cyclic, LoopSpec};
use sl3_coupler::fock::{
    nilpotency_index, promote, propagate_fock, sector_dimension, FockBasis, FockVector,
};
use sl3_coupler::propagator::{
    holonomy, integrate_direct, integrate_wei_norman, propagate_field, uniform_samples, PropagationOptions,
};
use sl3_coupler::spectral::{
    classify_matrix, cubic_roots, discriminant, discriminant_resultant, invariants, local_frame,
    local_frame_ordered, project_biorthogonal, track_branches, EventKind, TrackingOptions,
};
use sl3_coupler::{ComplexMatrix, FieldVector, Regime, C64};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn max_abs_dyn(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn pt(g: f64, k1: f64, k2: f64) -> ComplexMatrix {
    let c = C64::from;
    Matrix3::new(C64::new(0.0, g), c(k1), c(k2), c(k1), c(0.0), c(k1), c(k2), c(k1), C64::new(0.0, -g))
}

fn random_traceless(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    traceless_part(&m)
}

/// `(γ, κ₁, κ₂)`: real spectrum, complex pair, triple point and the two
/// EP2 points at `κ₁ = 3/2`.
const REGIME_SETS: [(f64, f64, f64); 5] = [
    (1.0, 1.5, 3.5),
    (1.0, 1.5, 1.5),
    (1.0, FRAC_1_SQRT_2, 0.0),
    (1.0, 1.5, 0.6718),
    (1.0, 1.5, 2.3882),
];

fn ep3_locus() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut ep3 = 0;
    for k in 0..1000 {
        let g: f64 = rng.random_range(0.3..3.0);
        let k1 = match k % 4 {
            // Exactly on the locus up to rounding of the inputs.
            0 => g * FRAC_1_SQRT_2,
            // Relative offsets spread over fourteen decades on both sides.
            1 | 2 => {
                let d = 10f64.powf(rng.random_range(-14.0..0.0));
                g * FRAC_1_SQRT_2 * (1.0 + if k % 4 == 1 { d } else { -d })
            }
            _ => rng.random_range(0.0..3.0),
        };
        let m = pt(g, k1, 0.0);
        let s = frobenius(&m);
        let expected = (g * g - 2.0 * k1 * k1).abs() < 1e-8 * s * s;
        let (_, regime) = classify_matrix(&m, 1e-8).map_err(|e| e.to_string())?;
        ep3 += (regime == Regime::Ep3) as usize;
        if (regime == Regime::Ep3) != expected {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    check(
        mismatches == 0 && ep3 > 250 && within(t, Duration::from_secs(1)),
        format!("1000 points, {ep3} EP3, {mismatches} mismatches, {t:.2?}"),
    )
}

/// Independent oracle: bisection on `Δ(κ₂)` written out for `γ = 1`,
/// `κ₁ = 3/2`.
fn oracle_ep2_roots() -> Vec<f64> {
    let delta = |k2: f64| {
        let b2 = 1.0 - 2.0 * 2.25 - k2 * k2;
        let b3 = -2.0 * 2.25 * k2;
        -4.0 * b2 * b2 * b2 - 27.0 * b3 * b3
    };
    let mut roots = Vec::new();
    let n = 3000;
    for i in 0..n {
        let (mut a, mut b) = (0.01 + 2.99 * i as f64 / n as f64, 0.01 + 2.99 * (i + 1) as f64 / n as f64);
        if delta(a) * delta(b) < 0.0 {
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if delta(a) * delta(m) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    roots
}

fn published_ep2() -> Outcome {
    let start = Instant::now();
    let roots = find_ep2(1.5, (0.01, 3.0)).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let oracle = oracle_ep2_roots();
    let rounded: Vec<String> = roots.iter().map(|r| format!("{r:.4}")).collect();
    let agree = roots.len() == oracle.len() && roots.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-10);
    check(
        rounded == ["0.6718", "2.3882"] && agree && within(t, Duration::from_millis(100)),
        format!("roots {rounded:?}, oracle {oracle:.10?}, {t:.2?}"),
    )
}

/// Characteristic-polynomial coefficients from principal minors.
fn char_poly_by_minors(m: &ComplexMatrix) -> [C64; 4] {
    let tr = m.trace();
    let minor = |i: usize, j: usize| m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
    let e2 = minor(0, 1) + minor(0, 2) + minor(1, 2);
    [C64::from(1.0), -tr, e2, -m.determinant()]
}

fn discriminant_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_delta, mut worst_root) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let m = random_traceless(&mut rng);
        let inv = invariants(&m).map_err(|e| e.to_string())?;
        let closed = discriminant(&inv);
        let res = discriminant_resultant(&char_poly_by_minors(&m)).map_err(|e| e.to_string())?;
        worst_delta = worst_delta.max((closed - res).norm() / closed.norm());
        let s = inv.scale().max(frobenius(&m));
        for l in cubic_roots(&inv) {
            let r = (l * l * l + inv.beta2 * l + inv.beta3).norm();
            worst_root = worst_root.max(r / s.powi(3));
        }
    }
    check(
        worst_delta < 1e-10 && worst_root < 1e-10,
        format!("max relative Δ mismatch {worst_delta:.2e}, max root residual {worst_root:.2e}·scale³"),
    )
}

fn propagator_equivalence() -> Outcome {
    let start = Instant::now();
    let z = uniform_samples(5.0, 101);
    let opts = PropagationOptions::with_tol(1e-12);
    let mut worst = 0.0f64;
    let mut charts = 0;
    for (g, k1, k2) in REGIME_SETS {
        let family = pt_cyclic(g, k1, k2).map_err(|e| e.to_string())?;
        let wn = integrate_wei_norman(&family, &z, &opts).map_err(|e| e.to_string())?;
        let direct = integrate_direct(&family, &z, &opts).map_err(|e| e.to_string())?;
        charts += wn.blowup_events.len();
        for (a, b) in wn.u.iter().zip(&direct) {
            worst = worst.max(max_abs(&(a - b)));
        }
    }
    let t = start.elapsed();
    check(
        worst < 1e-8 && within(t, Duration::from_secs(10)),
        format!("max |U_WN − U_direct| = {worst:.2e}, {charts} chart restarts, {t:.2?}"),
    )
}

fn ep3_dynamics() -> Outcome {
    let m1 = pt(1.0, FRAC_1_SQRT_2, 0.0);
    let cube = max_abs(&(m1 * m1 * m1));
    let family = pt_cyclic(1.0, FRAC_1_SQRT_2, 0.0).map_err(|e| e.to_string())?;
    let z = uniform_samples(10.0, 201);
    let wn = integrate_wei_norman(&family, &z, &PropagationOptions::with_tol(1e-12)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (&zk, u) in z.iter().zip(&wn.u) {
        let i = C64::i();
        let poly = ComplexMatrix::identity() + m1 * (i * zk) - m1 * m1 * C64::from(zk * zk / 2.0);
        worst = worst.max(max_abs(&(u - poly)));
    }
    check(
        cube < 1e-13 && worst < 1e-10,
        format!("max |M1³| = {cube:.2e}, max |U − (1 + izM1 − z²M1²/2)| = {worst:.2e} on [0, 10]"),
    )
}

fn total_intensity(family: &impl Coupling, z: &[f64]) -> Result<Vec<f64>, String> {
    let e0 = FieldVector::new(C64::from(1.0), C64::from(0.0), C64::from(0.0));
    let fields = propagate_field(family, &e0, z, &PropagationOptions::with_tol(1e-11)).map_err(|e| e.to_string())?;
    Ok(fields.iter().map(|e| e.norm_squared()).collect())
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn regime_signatures() -> Outcome {
    let z = uniform_samples(50.0, 2001);
    let stable = pt_cyclic(1.0, 1.5, 3.5).map_err(|e| e.to_string())?;
    let total = total_intensity(&stable, &z)?;
    let logs: Vec<f64> = total.iter().map(|v| v.ln()).collect();
    let peak = total.iter().cloned().fold(0.0, f64::max);
    let stable_slope = slope(&z, &logs);

    let growing = pt_cyclic(1.0, 1.5, 1.5).map_err(|e| e.to_string())?;
    let total = total_intensity(&growing, &z)?;
    let window: Vec<usize> = (0..z.len()).filter(|&k| z[k] >= 25.0).collect();
    let zw: Vec<f64> = window.iter().map(|&k| z[k]).collect();
    let lw: Vec<f64> = window.iter().map(|&k| total[k].ln()).collect();
    let rate = slope(&zw, &lw);
    let inv = invariants(&pt(1.0, 1.5, 1.5)).map_err(|e| e.to_string())?;
    let expected = 2.0 * cubic_roots(&inv).iter().map(|l| l.im).fold(f64::NEG_INFINITY, f64::max);
    let rel = (rate - expected).abs() / expected;
    check(
        peak.is_finite() && stable_slope.abs() < 1e-3 && rel < 0.05,
        format!(
            "Δ>0: max ΣI = {peak:.3}, log-slope {stable_slope:.2e}; Δ<0: slope {rate:.5} vs 2·max Im λ = {expected:.5} ({:.2}%)",
            100.0 * rel
        ),
    )
}

fn loop_crossings() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for turns in [1u32, 3] {
        let spec = LoopSpec { r: 0.4253, turns };
        let family = ep3_loop(spec, 1.0).map_err(|e| e.to_string())?;
        let n = 600 * turns as usize + 1;
        let z = uniform_samples(spec.length(1.0), n);
        let tracking = track_branches(&family, &z, &TrackingOptions::default()).map_err(|e| e.to_string())?;
        let crossings: Vec<f64> = tracking
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Ep2)
            .map(|e| e.z)
            .collect();
        let others = tracking.events.len() - crossings.len();

        let e0 = FieldVector::new(C64::from(1.0), C64::from(0.0), C64::from(0.0));
        let fields = propagate_field(&family, &e0, &z, &PropagationOptions::with_tol(1e-11)).map_err(|e| e.to_string())?;
        let weight: Vec<f64> = z
            .iter()
            .zip(&fields)
            .enumerate()
            .map(|(k, (&zk, e))| {
                let m1 = traceless_part(&family.matrix_at(zk));
                match local_frame_ordered(&m1, zk, tracking.lambdas[k]) {
                    Ok(f) => project_biorthogonal(&f, e).iter().map(|c| c.norm()).fold(0.0, f64::max) / e.norm(),
                    Err(_) => f64::INFINITY,
                }
            })
            .collect();
        let mut sorted: Vec<f64> = weight.iter().cloned().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let peaks = crossings
            .iter()
            .filter(|&&zc| {
                let near = (0..z.len()).filter(|&k| (z[k] - zc).abs() <= 0.01);
                near.map(|k| weight[k]).fold(0.0, f64::max) > 3.0 * median
            })
            .count();
        ok &= crossings.len() == 2 * turns as usize && others == 0 && peaks == crossings.len();
        details.push(format!(
            "{turns} turn(s): {} EP2 crossings at {:.4?}, {others} other events, {peaks} |c| peaks > 3× median",
            crossings.len(),
            crossings
        ));
    }
    check(ok, details.join("; "))
}

fn fock_sector() -> Outcome {
    let sizes = [sector_dimension(1), sector_dimension(2), FockBasis::new(1).len(), FockBasis::new(2).len()];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let b1 = FockBasis::new(1);
    let mut exact = true;
    for _ in 0..100 {
        let m = random_traceless(&mut rng);
        exact &= promote(&m, &b1).to_dense() == DMatrix::from_fn(3, 3, |r, c| m[(r, c)]);
    }

    let mut classical_gap = 0.0f64;
    let z = uniform_samples(5.0, 51);
    let opts = PropagationOptions::with_tol(1e-12);
    for (g, k1, k2) in REGIME_SETS {
        let family = pt_cyclic(g, k1, k2).map_err(|e| e.to_string())?;
        for j in 0..3 {
            let mut occ = [0; 3];
            occ[j] = 1;
            let psi0 = FockVector::basis_state(&b1, &occ).map_err(|e| e.to_string())?;
            let quantum = propagate_fock(&family, &b1, &psi0, &z, &opts).map_err(|e| e.to_string())?;
            let e0 = FieldVector::from_fn(|r, _| C64::from((r == j) as u8 as f64));
            let classical = propagate_field(&family, &e0, &z, &opts).map_err(|e| e.to_string())?;
            for (q, c) in quantum.iter().zip(&classical) {
                for r in 0..3 {
                    classical_gap = classical_gap.max((q.amplitudes[r] - c[r]).norm());
                }
            }
        }
    }

    let m_ep3 = pt(1.0, FRAC_1_SQRT_2, 0.0);
    let idx2 = nilpotency_index(&promote(&m_ep3, &FockBasis::new(2)).to_dense(), 1e-8);
    let idx3 = nilpotency_index(&promote(&m_ep3, &FockBasis::new(3)).to_dense(), 1e-8);
    check(
        sizes == [3, 6, 3, 6] && exact && classical_gap < 1e-10 && idx2 == Some(5) && idx3 == Some(7),
        format!(
            "sizes {sizes:?}, n=1 promote exact: {exact}, quantum vs classical {classical_gap:.2e}, nilpotency n=2 {idx2:?}, n=3 {idx3:?}"
        ),
    )
}

fn morphism_and_biorthogonality() -> Outcome {
    let mut table_ok = true;
    for (i, j, k, l) in (0..81).map(|x| (x / 27, (x / 9) % 3, (x / 3) % 3, x % 3)) {
        let lhs = commutator(&elementary(i, j), &elementary(k, l));
        let mut rhs = ComplexMatrix::zeros();
        if j == k {
            rhs += elementary(i, l);
        }
        if l == i {
            rhs -= elementary(k, j);
        }
        table_ok &= lhs == rhs;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut morph = 0.0f64;
    for n in 1..=4 {
        let basis = FockBasis::new(n);
        let mut pairs: Vec<(ComplexMatrix, ComplexMatrix)> = (0..9)
            .flat_map(|a| (0..9).map(move |b| (elementary(a / 3, a % 3), elementary(b / 3, b % 3))))
            .collect();
        pairs.extend((0..20).map(|_| (random_traceless(&mut rng), random_traceless(&mut rng))));
        for (a, b) in pairs {
            let pa = promote(&a, &basis).to_dense();
            let pb = promote(&b, &basis).to_dense();
            let lhs = promote(&commutator(&a, &b), &basis).to_dense();
            morph = morph.max(max_abs_dyn(&(lhs - (&pa * &pb - &pb * &pa))));
        }
    }

    let mut bio = 0.0f64;
    let mut tested = 0;
    while tested < 1000 {
        let m = random_traceless(&mut rng);
        let (_, regime) = classify_matrix(&m, 1e-9).map_err(|e| e.to_string())?;
        if regime != Regime::Distinct {
            continue;
        }
        let f = local_frame(&m, 0.0).map_err(|e| e.to_string())?;
        for j in 0..3 {
            for k in 0..3 {
                let d = (f.left(j) * f.right(k))[(0, 0)] - C64::from((j == k) as u8 as f64);
                bio = bio.max(d.norm());
            }
        }
        tested += 1;
    }
    check(
        table_ok && morph < 1e-12 && bio < 1e-12,
        format!("commutator table exact: {table_ok}, morphism n≤4 {morph:.2e}, biorthogonality {bio:.2e} on {tested} matrices"),
    )
}

fn holonomy_well_posed() -> Outcome {
    let constant = |_z: f64| pt(1.0, 1.5, 3.5);
    let h0 = holonomy(&constant, 1.0, 64).map_err(|e| e.to_string())?;
    let ident = max_abs(&(h0.h - ComplexMatrix::identity()));

    let generic = circular_loop((1.5, 3.5), LoopSpec { r: 0.3, turns: 1 }, 1.0).map_err(|e| e.to_string())?;
    let h = holonomy(&generic, 1.0, 256).map_err(|e| e.to_string())?;
    let ratio = h.convergence_ratio.unwrap_or(0.0);
    let det = (h.determinant - C64::from(1.0)).norm();
    check(
        ident < 1e-12 && ratio >= 3.0 && det < 1e-10,
        format!("constant loop |H − 1| = {ident:.2e}, step-doubling ratio {ratio:.3}, |det H − 1| = {det:.2e}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("EP3 locus of the PT trimer", ep3_locus),
        ("published EP2 values", published_ep2),
        ("discriminant consistency", discriminant_consistency),
        ("propagator equivalence", propagator_equivalence),
        ("EP3 dynamics", ep3_dynamics),
        ("regime dynamics signatures", regime_signatures),
        ("loop crossings", loop_crossings),
        ("Fock sector", fock_sector),
        ("algebra morphism and biorthogonality", morphism_and_biorthogonality),
        ("holonomy well-posedness", holonomy_well_posed),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let t = start.elapsed();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{t:.2?}]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{t:.2?}]", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

