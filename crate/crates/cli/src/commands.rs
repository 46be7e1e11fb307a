//! One function per command, each turning a validated config into tables.

use rayon::prelude::*;
use sl3_coupler::algebra::{frobenius, traceless_part, Coupling};
use sl3_coupler::families::{self, circular_loop, find_ep2, map_record, CouplerFamily, FamilyKind, LoopSpec};
use sl3_coupler::fock::{
    amplitudes, biorthogonal_populations, propagate_fock, propagate_fock_left, FockBasis, FockVector, Occupation,
};
use sl3_coupler::propagator::{holonomy, propagate_field, uniform_samples, PropagationOptions};
use sl3_coupler::spectral::{
    classify_matrix, cubic_roots, discriminant, local_frame_ordered, project_biorthogonal, track_branches,
    EventKind, TrackingOptions,
};
use sl3_coupler::FieldVector;

use crate::config::{Command, RunConfig, StateSpec};
use crate::output::{emit_intensities, Cell, ColumnKind, Output, Table};
use crate::CliError;

use ColumnKind::{Complex, Scalar};

pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    let (command, tables) = match cfg.command {
        Command::Classify => ("classify", classify(cfg)?),
        Command::Map => ("map", map(cfg)?),
        Command::Propagate => ("propagate", propagate(cfg)?),
        Command::Loop => ("loop", loop_run(cfg)?),
        Command::Fock => ("fock", fock(cfg)?),
        Command::Holonomy => ("holonomy", holonomy_run(cfg)?),
        Command::FindEp => ("find-ep", find_ep(cfg)?),
    };
    Ok(Output { command, tables })
}

fn family(cfg: &RunConfig) -> Result<CouplerFamily, CliError> {
    Ok(match FamilyKind::from(cfg.family) {
        FamilyKind::Chiral2 => families::chiral_2(cfg.gamma, cfg.kappa1)?,
        FamilyKind::Chiral1 => families::chiral_1(cfg.gamma, cfg.kappa1, cfg.kappa2)?,
        _ => families::pt_cyclic(cfg.gamma, cfg.kappa1, cfg.kappa2)?,
    })
}

fn loop_family(cfg: &RunConfig) -> Result<(CouplerFamily, f64), CliError> {
    let spec = LoopSpec {
        r: cfg.loop_r,
        turns: cfg.loop_turns,
    };
    let center = (cfg.loop_center[0], cfg.loop_center[1]);
    Ok((circular_loop(center, spec, cfg.gamma)?, spec.length(cfg.gamma)))
}

fn options(cfg: &RunConfig) -> PropagationOptions {
    PropagationOptions::with_tol(cfg.tol)
}

fn classical_state(cfg: &RunConfig) -> Result<FieldVector, CliError> {
    match cfg.state_spec()? {
        StateSpec::Field(e) => Ok(e),
        _ => Err(CliError::Config(
            "field `state`: classical runs need three field amplitudes".into(),
        )),
    }
}

fn classify(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let m1 = traceless_part(&family(cfg)?.matrix_at(0.0));
    let (inv, regime) = classify_matrix(&m1, cfg.eps_ep)?;
    let mut t = Table::new(
        "records",
        &[
            ("gamma", Scalar),
            ("kappa1", Scalar),
            ("kappa2", Scalar),
            ("regime", Scalar),
            ("beta2", Complex),
            ("beta3", Complex),
            ("discriminant", Complex),
            ("lambda1", Complex),
            ("lambda2", Complex),
            ("lambda3", Complex),
        ],
    );
    let [l1, l2, l3] = cubic_roots(&inv);
    t.push(vec![
        cfg.gamma.into(),
        cfg.kappa1.into(),
        cfg.kappa2.into(),
        Cell::Text(regime_name(regime)),
        inv.beta2.into(),
        inv.beta3.into(),
        discriminant(&inv).into(),
        l1.into(),
        l2.into(),
        l3.into(),
    ]);
    Ok(vec![t])
}

fn regime_name(r: sl3_coupler::Regime) -> &'static str {
    match r {
        sl3_coupler::Regime::Distinct => "Distinct",
        sl3_coupler::Regime::Ep2 => "EP2",
        sl3_coupler::Regime::Ep3 => "EP3",
        sl3_coupler::Regime::ZeroMatrix => "ZeroMatrix",
    }
}

fn axis(r: [f64; 2], n: usize) -> Vec<f64> {
    (0..n).map(|k| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64).collect()
}

fn map(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let kind = FamilyKind::from(cfg.family);
    let xs = axis(cfg.x_range, cfg.grid[0]);
    let ys = axis(cfg.y_range, cfg.grid[1]);
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let eval = |&(x, y): &(f64, f64)| map_record(kind, x, y, cfg.eps_ep);
    let records = match cfg.jobs {
        Some(1) => points.iter().map(eval).collect(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Config(format!("field `jobs`: {e}")))?
            .install(|| points.par_iter().map(eval).collect()),
        None => points.par_iter().map(eval).collect(),
    };
    let map = families::polish_loci(kind, &xs, &ys, records);

    let mut grid = Table::new(
        "records",
        &[("x", Scalar), ("y", Scalar), ("discriminant", Complex), ("regime", Scalar)],
    );
    for r in &map.records {
        grid.push(vec![r.x.into(), r.y.into(), r.delta.into(), Cell::Text(regime_name(r.regime))]);
    }
    let mut ep2 = Table::new("ep2", &[("x", Scalar), ("y", Scalar)]);
    for &(x, y) in &map.ep2_loci {
        ep2.push(vec![x.into(), y.into()]);
    }
    let mut ep3 = Table::new("ep3", &[("x", Scalar), ("y", Scalar), ("single_block", Scalar)]);
    for p in &map.ep3_points {
        ep3.push(vec![p.x.into(), p.y.into(), Cell::Bool(p.single_block)]);
    }
    Ok(vec![grid, ep2, ep3])
}

fn intensity_columns() -> Vec<(&'static str, ColumnKind)> {
    vec![
        ("I1", Scalar),
        ("I2", Scalar),
        ("I3", Scalar),
        ("It1", Scalar),
        ("It2", Scalar),
        ("It3", Scalar),
    ]
}

fn intensity_cells(e: &FieldVector) -> Vec<Cell> {
    let r = emit_intensities(std::slice::from_ref(e))[0];
    let mut cells: Vec<Cell> = r.intensity.iter().map(|&v| v.into()).collect();
    match r.normalized {
        Some(n) => cells.extend(n.iter().map(|&v| Cell::from(v))),
        None => cells.extend([Cell::Empty; 3]),
    }
    cells
}

fn propagate(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let fam = family(cfg)?;
    let e0 = classical_state(cfg)?;
    let z = uniform_samples(cfg.z_max, cfg.samples);
    let fields = propagate_field(&fam, &e0, &z, &options(cfg))?;
    let mut cols = vec![("z", Scalar)];
    cols.extend(intensity_columns());
    let mut t = Table::new("records", &cols);
    for (zk, e) in z.iter().zip(&fields) {
        let mut row = vec![Cell::Real(*zk)];
        row.extend(intensity_cells(e));
        t.push(row);
    }
    Ok(vec![t])
}

fn event_name(k: EventKind) -> &'static str {
    match k {
        EventKind::Ep2 => "EP2",
        EventKind::Ep3 => "EP3",
        EventKind::Diabolical => "diabolical",
        EventKind::Ambiguous => "ambiguous",
    }
}

fn loop_run(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let (fam, length) = loop_family(cfg)?;
    let e0 = classical_state(cfg)?;
    let z = uniform_samples(length, cfg.samples);
    let tracking = track_branches(
        &fam,
        &z,
        &TrackingOptions {
            eps: cfg.eps_ep,
            ..TrackingOptions::default()
        },
    )?;
    let fields = propagate_field(&fam, &e0, &z, &options(cfg))?;

    let mut cols = vec![("z", Scalar), ("kappa1", Scalar), ("kappa2", Scalar)];
    cols.extend([("lambda1", Complex), ("lambda2", Complex), ("lambda3", Complex)]);
    cols.push(("discriminant", Complex));
    cols.extend(intensity_columns());
    cols.extend([("c1", Complex), ("c2", Complex), ("c3", Complex)]);
    let mut t = Table::new("records", &cols);
    for (k, (&zk, e)) in z.iter().zip(&fields).enumerate() {
        let (_, k1, k2) = fam.parameters_at(zk);
        let m1 = traceless_part(&fam.matrix_at(zk));
        let lambdas = tracking.lambdas[k];
        let inv = sl3_coupler::spectral::invariants(&m1)?;
        let mut row = vec![Cell::Real(zk), k1.into(), k2.into()];
        row.extend(lambdas.iter().map(|&l| Cell::from(l)));
        row.push(discriminant(&inv).into());
        row.extend(intensity_cells(e));
        match local_frame_ordered(&m1, zk, lambdas) {
            Ok(frame) => row.extend(project_biorthogonal(&frame, e).iter().map(|&c| Cell::from(c))),
            // Exactly at a degeneracy the eigenbasis does not exist.
            Err(_) => row.extend([Cell::Empty; 3]),
        }
        t.push(row);
    }

    let mut events = Table::new(
        "events",
        &[
            ("z", Scalar),
            ("kind", Scalar),
            ("branch_a", Scalar),
            ("branch_b", Scalar),
            ("discriminant", Complex),
        ],
    );
    for e in &tracking.events {
        events.push(vec![
            e.z.into(),
            Cell::Text(event_name(e.kind)),
            Cell::Int(e.branches.0 as i64 + 1),
            Cell::Int(e.branches.1 as i64 + 1),
            e.discriminant.into(),
        ]);
    }
    Ok(vec![t, events])
}

fn occupation_label(prefix: &str, m: &Occupation) -> String {
    format!("{prefix}_{}_{}_{}", m[0], m[1], m[2])
}

fn fock(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let fam = family(cfg)?;
    let basis = FockBasis::new(cfg.n);
    let psi0 = match cfg.state_spec()? {
        StateSpec::Occupation(m) => FockVector::basis_state(&basis, &m)?,
        StateSpec::Noon(j, k) => {
            let mut a = [0; 3];
            let mut b = [0; 3];
            a[j] = cfg.n;
            b[k] = cfg.n;
            FockVector::superposition(&basis, &[a, b])?
        }
        StateSpec::Field(_) => {
            return Err(CliError::Config(
                "field `state`: Fock runs need `occ:` or `noon:` states".into(),
            ))
        }
    };
    let z = uniform_samples(cfg.z_max, cfg.samples);
    let states = propagate_fock(&fam, &basis, &psi0, &z, &options(cfg))?;
    // Bra seeded with the conjugate state so that l·r = 1 at z = 0.
    let l0 = FockVector {
        n: psi0.n,
        amplitudes: psi0.amplitudes.iter().map(|a| a.conj()).collect(),
    };
    let bras = propagate_fock_left(&fam, &basis, &l0, &z, &options(cfg))?;

    let mut cols: Vec<(String, ColumnKind)> = vec![("z".into(), Scalar), ("norm".into(), Scalar)];
    cols.extend(basis.states().iter().map(|m| (occupation_label("P", m), Scalar)));
    cols.extend(basis.states().iter().map(|m| (occupation_label("Pt", m), Scalar)));
    cols.extend((1..=3).map(|j| (format!("n{j}"), Complex)));
    cols.extend((1..=3).map(|j| (format!("nt{j}"), Complex)));
    let mut t = Table::with_columns("records", cols);
    for ((&zk, psi), bra) in z.iter().zip(&states).zip(&bras) {
        let mut row = vec![Cell::Real(zk), psi.norm().into()];
        match amplitudes(&basis, psi) {
            Ok(a) => {
                row.extend(a.p.iter().map(|&v| Cell::from(v)));
                row.extend(a.p_tilde.iter().map(|&v| Cell::from(v)));
            }
            Err(sl3_coupler::Error::UndefinedRenormalization) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 2 * basis.len()));
            }
            Err(e) => return Err(e.into()),
        }
        match biorthogonal_populations(&basis, psi, bra) {
            Ok(p) => {
                row.extend(p.n.iter().map(|&v| Cell::from(v)));
                row.extend(p.n_tilde.iter().map(|&v| Cell::from(v)));
            }
            Err(sl3_coupler::Error::UndefinedRenormalization) => row.extend([Cell::Empty; 6]),
            Err(e) => return Err(e.into()),
        }
        t.push(row);
    }
    Ok(vec![t])
}

fn holonomy_run(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let (fam, length) = loop_family(cfg)?;
    let h = holonomy(&fam, length, cfg.holonomy_steps)?;
    let mut cols = vec![
        ("steps".to_string(), Scalar),
        ("convergence_ratio".to_string(), Scalar),
        ("determinant".to_string(), Complex),
        ("phase_i0".to_string(), Complex),
        ("phase_y".to_string(), Complex),
    ];
    for r in 1..=3 {
        for c in 1..=3 {
            cols.push((format!("h{r}{c}"), Complex));
        }
    }
    let mut t = Table::with_columns("records", cols);
    let (p0, py) = match h.cartan_phases {
        Some((a, b)) => (Cell::Complex(a), Cell::Complex(b)),
        None => (Cell::Empty, Cell::Empty),
    };
    let mut row = vec![
        Cell::Int(h.steps as i64),
        h.convergence_ratio.into(),
        h.determinant.into(),
        p0,
        py,
    ];
    for r in 0..3 {
        for c in 0..3 {
            row.push(h.h[(r, c)].into());
        }
    }
    t.push(row);
    Ok(vec![t])
}

fn find_ep(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let ratio = cfg.kappa1 / cfg.gamma;
    let roots = find_ep2(ratio, (cfg.y_range[0], cfg.y_range[1]))?;
    let mut t = Table::new(
        "records",
        &[
            ("kappa1_over_gamma", Scalar),
            ("kappa2_over_gamma", Scalar),
            ("discriminant", Complex),
            ("relative_discriminant", Scalar),
        ],
    );
    for k2 in roots {
        let inv = families::pt_cyclic_invariants(1.0, ratio, k2);
        let d = discriminant(&inv);
        let s = frobenius(&FamilyKind::PtCyclic.matrix(1.0, ratio, k2));
        t.push(vec![ratio.into(), k2.into(), d.into(), (d.norm() / s.powi(6)).into()]);
    }
    Ok(vec![t])
}
