use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Command, ExperimentConfig};
use super::output::{ResultRecord, Table, Value};
use super::CliError;
use crate::cocycle::{cocycle_matrix, lyapunov_spectrum, LyapunovOptions};
use crate::ergodic::{ErgodicModel, SiteSource};
use crate::linalg::{frobenius, CVec};
use crate::operator::{
    dirichlet_neumann_solutions, green_formula_defect, solution_identity_residuals, wronskian_constancy_defect,
    VectorSeq,
};
use crate::spectral::{ac_scan, ids_empirical, kotani_from_spectrum, map_grid, thouless_from_parts};
use crate::weyl::{green_kernel, m_sum_identity_sides, weyl_m, HalfLine};
use crate::C64;

type Out = Result<Table, CliError>;

/// Execute the configured analysis. No I/O happens here.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    config.validate()?;
    let table = match config.command {
        Command::Lyapunov => lyapunov(config),
        Command::Ids => ids(config),
        Command::Thouless => thouless(config),
        Command::Weyl => weyl(config),
        Command::Kotani => kotani(config),
        Command::AcScan => scan(config),
        Command::Verify => verify(config),
    }?;
    Ok(ResultRecord {
        command: config.command,
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION"),
        table,
    })
}

fn options(c: &ExperimentConfig) -> LyapunovOptions {
    LyapunovOptions {
        reorth_period: c.run.reorth,
        ..LyapunovOptions::with_steps(c.run.steps)
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

fn lyapunov(c: &ExperimentConfig) -> Out {
    let n = 2 * c.model.l();
    let mut cols = vec!["x".to_string(), "y".into(), "gamma".into(), "gamma_se".into()];
    cols.extend(numbered("exponent", n));
    cols.extend(numbered("se", n));
    let mut t = Table::new(cols);
    let points = c.run.points();
    let opts = options(c);
    let results = map_grid(points.len(), |i| lyapunov_spectrum(&c.model, points[i], &opts));
    for (z, s) in points.iter().zip(results) {
        let s = s?;
        let mut row: Vec<Value> = vec![
            z.re.into(),
            z.im.into(),
            s.gamma().into(),
            s.partial_sum_se(c.model.l()).into(),
        ];
        row.extend(s.exponents.iter().map(|&x| Value::from(x)));
        row.extend(s.standard_errors.iter().map(|&x| Value::from(x)));
        t.push(row);
    }
    Ok(t)
}

fn ids(c: &ExperimentConfig) -> Out {
    let h = ids_empirical(&c.model, c.run.sites)?;
    Ok(match &c.run.grid {
        Some(g) => {
            let mut t = Table::new(["x", "k"]);
            for x in g.points() {
                t.push(vec![x.into(), h.k(x).into()]);
            }
            t
        }
        None => {
            let mut t = Table::new(["index", "eigenvalue", "k"]);
            for (i, &e) in h.eigenvalues.iter().enumerate() {
                t.push(vec![(i + 1).into(), e.into(), h.k(e).into()]);
            }
            t
        }
    })
}

fn thouless(c: &ExperimentConfig) -> Out {
    let h = ids_empirical(&c.model, c.run.sites)?;
    let mut t = Table::new([
        "x",
        "y",
        "lhs",
        "lhs_se",
        "rhs",
        "log_potential",
        "det_term",
        "defect",
        "sites",
        "steps",
    ]);
    let points = c.run.points();
    let opts = options(c);
    let results = map_grid(points.len(), |i| {
        lyapunov_spectrum(&c.model, points[i], &opts).and_then(|s| thouless_from_parts(&c.model, &h, &s))
    });
    for (z, r) in points.iter().zip(results) {
        let r = r?;
        t.push(vec![
            z.re.into(),
            z.im.into(),
            r.lhs.into(),
            r.lhs_se.into(),
            r.rhs.into(),
            r.log_potential.into(),
            r.det_term.into(),
            r.defect.into(),
            r.sites.into(),
            r.steps.into(),
        ]);
    }
    Ok(t)
}

fn weyl(c: &ExperimentConfig) -> Out {
    let l = c.model.l();
    let mut cols = vec![
        "x".to_string(),
        "y".into(),
        "half_line".into(),
        "depth".into(),
        "residual".into(),
        "im_min_eigenvalue".into(),
        "im_rank".into(),
    ];
    for i in 1..=l {
        for j in 1..=l {
            cols.push(format!("m_{i}{j}_re"));
            cols.push(format!("m_{i}{j}_im"));
        }
    }
    let mut t = Table::new(cols);
    let points = c.run.points();
    let results = map_grid(points.len(), |i| {
        [HalfLine::Plus, HalfLine::Minus].map(|h| weyl_m(&c.model, points[i], c.run.depth, h))
    });
    for (z, pair) in points.iter().zip(results) {
        for (half, w) in [1i64, -1].into_iter().zip(pair) {
            let w = w?;
            let mut row: Vec<Value> = vec![
                z.re.into(),
                z.im.into(),
                half.into(),
                w.depth.into(),
                w.residual.into(),
                w.im_min_eigenvalue().into(),
                w.im_rank().into(),
            ];
            for i in 0..l {
                for j in 0..l {
                    row.push(w.m[(i, j)].re.into());
                    row.push(w.m[(i, j)].im.into());
                }
            }
            t.push(row);
        }
    }
    Ok(t)
}

fn kotani(c: &ExperimentConfig) -> Out {
    let l = c.model.l();
    let mut cols: Vec<String> = [
        "x",
        "y",
        "lhs",
        "lhs_se",
        "rhs",
        "rhs_se",
        "defect",
        "trace_bound_lhs",
        "trace_bound_lhs_se",
        "harmonic_lhs",
        "trace_bound_rhs",
        "identity_holds",
        "inequalities_hold",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    for j in 1..=l {
        cols.push(format!("partial_lhs_{j}"));
        cols.push(format!("partial_rhs_{j}"));
    }
    cols.extend(numbered("mu", l));
    let mut t = Table::new(cols);
    let points = c.run.points();
    let opts = options(c);
    let results = map_grid(points.len(), |i| {
        lyapunov_spectrum(&c.model, points[i], &opts).and_then(|s| kotani_from_spectrum(&c.model, &s, c.run.orbit))
    });
    for (z, r) in points.iter().zip(results) {
        let r = r?;
        let mut row: Vec<Value> = vec![
            z.re.into(),
            z.im.into(),
            r.lhs.into(),
            r.lhs_se.into(),
            r.rhs.into(),
            r.rhs_se.into(),
            r.defect.into(),
            r.trace_bound_lhs.into(),
            r.trace_bound_lhs_se.into(),
            r.harmonic_lhs.into(),
            r.trace_bound_rhs.into(),
            r.identity_holds(3.0).into(),
            r.inequalities_hold(1.0).into(),
        ];
        for p in &r.partial_sums {
            row.push(p.lhs.into());
            row.push(p.rhs.into());
        }
        row.extend(r.mu.iter().map(|&m| Value::from(m)));
        t.push(row);
    }
    Ok(t)
}

fn scan(c: &ExperimentConfig) -> Out {
    let n = 2 * c.model.l();
    let xs: Vec<f64> = c.run.grid.map(|g| g.points()).unwrap_or_else(|| vec![c.run.z.re]);
    let report = ac_scan(&c.model, &xs, &c.run.y_ladder, c.run.steps)?;
    let mut cols: Vec<String> = [
        "x",
        "vanishing_exponents",
        "zero_tol",
        "rank_plus",
        "rank_minus",
        "y_min_plus",
        "y_min_minus",
        "trace_plus",
        "trace_minus",
        "singular_plus",
        "singular_minus",
        "r",
        "multiplicity",
        "full_line",
        "consistent",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    cols.extend(numbered("exponent", n));
    cols.push("errors".into());
    let mut t = Table::new(cols);
    for p in &report.points {
        let last = |h: &Option<crate::spectral::HalfLineTrace>, f: fn(&crate::spectral::HalfLineTrace) -> Value| {
            h.as_ref().map(f).unwrap_or(Value::Num(f64::NAN))
        };
        let mut row: Vec<Value> = vec![
            p.x.into(),
            p.vanishing_exponents.into(),
            p.zero_tol.into(),
            last(&p.plus, |h| h.rank.into()),
            last(&p.minus, |h| h.rank.into()),
            last(&p.plus, |h| (*h.y.last().unwrap()).into()),
            last(&p.minus, |h| (*h.y.last().unwrap()).into()),
            last(&p.plus, |h| (*h.trace.last().unwrap()).into()),
            last(&p.minus, |h| (*h.trace.last().unwrap()).into()),
            last(&p.plus, |h| h.singular_support.into()),
            last(&p.minus, |h| h.singular_support.into()),
            p.r.into(),
            p.multiplicity.into(),
            p.full_line.into(),
            p.consistent.into(),
        ];
        for k in 0..n {
            row.push(p.exponents.get(k).copied().unwrap_or(f64::NAN).into());
        }
        row.push(p.errors.join("; ").into());
        t.push(row);
    }
    Ok(t)
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn below(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        value,
        tolerance,
        pass: value < tolerance,
    }
}

fn random_sequence(rng: &mut ChaCha8Rng, l: usize, lo: i64, hi: i64) -> VectorSeq {
    VectorSeq::from_fn(lo..=hi, |_| {
        CVec::from_fn(l, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    })
}

/// Identity suite at the configured `z`.
fn verify_checks(
    model: &ErgodicModel,
    z: C64,
    n_max: usize,
    orbit: usize,
    opts: &LyapunovOptions,
) -> Result<Vec<Check>, CliError> {
    let l = model.l();
    let mut checks = Vec::new();
    let mut worst = 0.0f64;
    for n in -20..=20 {
        let a = cocycle_matrix(&model.site(n)?, z)?;
        worst = worst.max(a.symplectic_defect() / frobenius(&a.0).powi(2));
    }
    checks.push(below("symplectic", worst, 1e-12));

    let window = n_max.min(60) as i64;
    let sol = dirichlet_neumann_solutions(model, z, window as usize + 1)?;
    let mut wr = 0.0f64;
    for a in 0..l {
        for b in 0..l {
            wr = wr.max(wronskian_constancy_defect(
                model,
                &sol.psi.column(a),
                &sol.phi.column(b),
                1,
                window,
            )?);
        }
    }
    checks.push(below("wronskian_constancy", wr, 1e-9));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut green = 0.0f64;
    for _ in 0..5 {
        let u = random_sequence(&mut rng, l, -11, 11);
        let v = random_sequence(&mut rng, l, -11, 11);
        green = green.max(green_formula_defect(model, &u, &v, -9, 9)?);
    }
    checks.push(below("green_formula", green, 1e-9));

    let lemma = solution_identity_residuals(model, z, window as usize)?;
    checks.push(below("solution_identity_a", lemma[0], 1e-9));
    checks.push(below("solution_identity_b", lemma[1], 1e-9));
    checks.push(below("solution_identity_c", lemma[2], 1e-9));

    let w = weyl_m(model, z, crate::weyl::DEFAULT_DEPTH, HalfLine::Plus)?;
    checks.push(below("weyl_symmetry", w.symmetry_defect(), 1e-9));
    let herglotz = w.im_min_eigenvalue();
    checks.push(Check {
        name: "weyl_herglotz",
        value: herglotz,
        tolerance: 0.0,
        pass: herglotz > 0.0,
    });

    let (lhs, rhs) = m_sum_identity_sides(model, z, n_max)?;
    checks.push(below(
        "m_sum_identity",
        frobenius(&(&lhs - &rhs)) / frobenius(&lhs),
        1e-6,
    ));

    let g = green_kernel(model, z, &[(1, 1)])?;
    checks.push(below(
        "green_kernel_diagonal",
        frobenius(&(g.get(1, 1).expect("requested") - &w.m)),
        1e-9,
    ));

    let spectrum = lyapunov_spectrum(model, z, opts)?;
    let k = kotani_from_spectrum(model, &spectrum, orbit.max(1000))?;
    let tol = (3.0 * k.combined_se()).max(1e-6);
    checks.push(below("kotani_identity", k.defect, tol));
    Ok(checks)
}

fn verify(c: &ExperimentConfig) -> Out {
    let checks = verify_checks(&c.model, c.run.z, c.run.n_max, c.run.orbit, &options(c))?;
    let mut t = Table::new(["identity", "value", "tolerance", "pass"]);
    for ch in checks {
        t.push(vec![
            ch.name.into(),
            ch.value.into(),
            ch.tolerance.into(),
            ch.pass.into(),
        ]);
    }
    Ok(t)
}
