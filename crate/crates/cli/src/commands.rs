//! One function per subcommand. Each returns the artifacts to write; nothing
//! here touches the filesystem, so outputs depend only on the config.

use std::sync::Arc;

use kf_core::dirichlet::{minmax_check, trace, trace_report, BridgeKernel};
use kf_core::fields::{self, evolve_parabolic, sample_whittle_matern, FieldConfig, OuConfig};
use kf_core::gentrig::{self, derivative_relation_residual, trig_eval_route, TrigEval};
use kf_core::kernels::KernelTable;
use kf_core::measure::{compile, AtomicMeasure};
use kf_core::oracle::{assemble_cycle, compare_spectra, dense_spectrum, fredholm_coefficients, CompareReport};
use kf_core::spectrum::{
    growth_exponent, rho_coeff_at, solve_spectrum, tail_sum, BoundaryCondition, Spectrum, SpectrumReport,
};
use serde::Serialize;

use crate::cache::Artifact;
use crate::config::{Command, Format, RunConfig};
use crate::error::{CliError, CliResult};

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// false only when `validate` finds a failing property
    pub passed: bool,
}

fn ok(artifacts: Vec<Artifact>) -> CliResult<Outcome> {
    Ok(Outcome { artifacts, passed: true })
}

fn json<T: Serialize>(name: &str, value: &T) -> CliResult<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.into(), bytes })
}

fn csv<F>(name: &str, write: F) -> CliResult<Artifact>
where
    F: FnOnce(&mut Vec<u8>) -> kf_core::Result<()>,
{
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(Artifact { name: name.into(), bytes })
}

type Pair = (Arc<AtomicMeasure>, Arc<AtomicMeasure>);

fn measures(cfg: &RunConfig) -> CliResult<Pair> {
    let w = compile(cfg.w_spec(), cfg.resolution)?;
    let v = compile(cfg.v_spec(), cfg.resolution)?;
    Ok((Arc::new(w), Arc::new(v)))
}

fn table(cfg: &RunConfig, (w, v): &Pair) -> CliResult<KernelTable> {
    Ok(KernelTable::build(w.clone(), v.clone(), cfg.order)?)
}

pub fn dispatch(cfg: &RunConfig, command: Command) -> CliResult<Outcome> {
    match command {
        Command::MeasureCompile => measure_compile(cfg),
        Command::Kernels => kernels(cfg),
        Command::Trig => trig(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::DirichletTrace => dirichlet_trace(cfg),
        Command::OracleCompare => oracle_compare(cfg),
        Command::FieldSample => field_sample(cfg),
        Command::SpdeEvolve => spde_evolve(cfg),
        Command::Validate => validate(cfg),
        Command::Report => report(cfg),
    }
}

#[derive(Serialize)]
struct MeasureSummary {
    atoms: usize,
    total_mass: f64,
    chirality: &'static str,
    digest: String,
}

fn summary(m: &AtomicMeasure) -> MeasureSummary {
    MeasureSummary {
        atoms: m.len(),
        total_mass: m.total_mass(),
        chirality: m.chirality().as_str(),
        digest: m.digest().to_string(),
    }
}

fn measure_compile(cfg: &RunConfig) -> CliResult<Outcome> {
    let (w, v) = measures(cfg)?;
    ok(vec![
        csv("w.csv", |b| w.write_csv(b))?,
        csv("v.csv", |b| v.write_csv(b))?,
        json("measures.json", &serde_json::json!({ "w": summary(&w), "v": summary(&v) }))?,
    ])
}

fn kernels(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = table(cfg, &measures(cfg)?)?;
    let a = t.secular_coefficients();
    let rho = growth_exponent(Some(&t), None).ok().and_then(|g| g.rho_coeff);
    ok(vec![
        csv("kernels.csv", |b| t.write_csv(b))?,
        json(
            "kernels.json",
            &serde_json::json!({
                "order": t.order(),
                "f2_total": t.f2_total(),
                "g2_total": t.g2_total(),
                "f_at_one": t.f_at_one(),
                "g_at_one": t.g_at_one(),
                "secular_coefficients": a,
                "rho_coeff": rho,
            }),
        )?,
    ])
}

fn trig_rows(cfg: &RunConfig, t: &KernelTable) -> CliResult<Vec<TrigEval>> {
    let mut rows = Vec::new();
    for &alpha in &cfg.frequencies {
        for &x in &cfg.points {
            rows.push(trig_eval_route(t, alpha, x, cfg.route)?);
        }
    }
    Ok(rows)
}

fn trig(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = table(cfg, &measures(cfg)?)?;
    let rows = trig_rows(cfg, &t)?;
    let defects: Vec<f64> = rows.iter().map(|r| r.values().pythagorean_defect()).collect();
    ok(vec![
        csv("trig.csv", |b| gentrig::write_csv(&rows, b))?,
        json("trig.json", &serde_json::json!({ "rows": rows, "pythagorean_defect": defects }))?,
    ])
}

fn spectrum_report(t: &KernelTable, sp: &Spectrum) -> SpectrumReport {
    let growth = growth_exponent(Some(t), Some(sp)).ok();
    sp.report(growth.as_ref())
}

fn eigenvectors_csv(sp: &Spectrum) -> CliResult<Artifact> {
    csv("eigenvectors.csv", |b| {
        use std::io::Write;
        writeln!(b, "index,lambda,position,value")?;
        for (i, p) in sp.pairs.iter().enumerate() {
            for (x, f) in sp.v().positions().iter().zip(&p.values) {
                writeln!(b, "{i},{},{x},{f}", p.lambda)?;
            }
        }
        Ok(())
    })
}

fn spectrum(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = table(cfg, &measures(cfg)?)?;
    let sp = solve_spectrum(&t, cfg.bc, cfg.count)?;
    ok(vec![
        json("spectrum.json", &spectrum_report(&t, &sp))?,
        csv("spectrum.csv", |b| sp.write_csv(b))?,
        eigenvectors_csv(&sp)?,
    ])
}

fn dirichlet_trace(cfg: &RunConfig) -> CliResult<Outcome> {
    let pair = measures(cfg)?;
    let t = table(cfg, &pair)?;
    let k = BridgeKernel::new(pair.0.clone())?;
    let dir = solve_spectrum(&t, BoundaryCondition::Dirichlet, cfg.count)?;
    let per = solve_spectrum(&t, BoundaryCondition::Periodic, cfg.count)?;
    let rep = trace_report(&k, &pair.1, &dir.eigenvalues());
    let tail = tail_sum(&dir, 1.0).ok();
    let mm = minmax_check(&per, &dir)?;
    ok(vec![json(
        "trace.json",
        &serde_json::json!({
            "trace": rep,
            "eigenvalues_used": dir.len(),
            "eigenvalues_available": dir.n_available,
            "tail_sum_s1": tail,
            "minmax": mm,
        }),
    )?])
}

#[derive(Serialize)]
struct OracleResult {
    bc: BoundaryCondition,
    compare: CompareReport,
    series: Vec<f64>,
    oracle: Vec<f64>,
    /// largest relative gap between Fredholm roots and oracle eigenvalues
    fredholm_max_rel: Option<f64>,
}

/// Dense comparison over the whole spectrum of the atomic problem.
fn oracle_result(pair: &Pair, order: usize, bc: BoundaryCondition) -> CliResult<OracleResult> {
    let (w, v) = pair;
    let op = assemble_cycle(w, v, bc)?;
    let ds = dense_spectrum(&op)?;
    let t = KernelTable::build(w.clone(), v.clone(), order)?;
    let sp = solve_spectrum(&t, bc, ds.eigenvalues.len())?;
    let compare = compare_spectra(&sp, &ds)?;
    const FREDHOLM_MAX: usize = 60;
    let fredholm_max_rel = if op.len() <= FREDHOLM_MAX && bc == BoundaryCondition::Dirichlet {
        let roots = fredholm_coefficients(&op)?.roots()?;
        Some(roots.iter().zip(&ds.eigenvalues).map(|(r, l)| (r - l).abs() / l).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(OracleResult { bc, compare, series: sp.eigenvalues(), oracle: ds.eigenvalues, fredholm_max_rel })
}

fn oracle_compare(cfg: &RunConfig) -> CliResult<Outcome> {
    let res = oracle_result(&measures(cfg)?, cfg.order, cfg.bc)?;
    let rows = csv("oracle.csv", |b| {
        use std::io::Write;
        writeln!(b, "index,series,oracle")?;
        for (i, (s, o)) in res.series.iter().zip(&res.oracle).enumerate() {
            writeln!(b, "{i},{s},{o}")?;
        }
        Ok(())
    })?;
    ok(vec![json("oracle.json", &res)?, rows])
}

fn table_artifact(name: &str, format: Format, values: &[Vec<f64>], positions: &[f64]) -> CliResult<Artifact> {
    match format {
        Format::Csv => csv(&format!("{name}.csv"), |b| fields::write_csv(values, positions, b)),
        Format::Binary => csv(&format!("{name}.bin"), |b| fields::write_binary(values, b)),
    }
}

fn field_sample(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = table(cfg, &measures(cfg)?)?;
    let modes = cfg.field_modes();
    let sp = solve_spectrum(&t, cfg.bc, modes)?;
    let fc = FieldConfig {
        kappa: cfg.field.kappa,
        beta: cfg.field.beta,
        modes,
        samples: cfg.field.samples,
        seed: cfg.seed,
    };
    let fs = sample_whittle_matern(&sp, &fc)?;
    if !fs.validity_flag {
        log::warn!("2 beta = {} <= rho_hat = {:?}: the field is not in L2", 2.0 * fc.beta, fs.rho_hat);
    }
    let meta = serde_json::json!({
        "config": fc,
        "mode_weights": fs.mode_weights,
        "validity_flag": fs.validity_flag,
        "rho_hat": fs.rho_hat,
        "tail_mass": fs.tail_mass,
        "samples": fs.values.len(),
        "atoms": fs.positions.len(),
    });
    ok(vec![json("field.json", &meta)?, table_artifact("field", cfg.output.format, &fs.values, &fs.positions)?])
}

fn spde_evolve(cfg: &RunConfig) -> CliResult<Outcome> {
    let t = table(cfg, &measures(cfg)?)?;
    let modes = cfg.spde_modes();
    let sp = solve_spectrum(&t, cfg.bc, modes)?;
    let oc = OuConfig {
        alpha: cfg.spde.alpha,
        beta: cfg.spde.beta,
        dt: cfg.spde.dt,
        t_end: cfg.spde.t_end,
        modes,
        paths: cfg.spde.paths,
        seed: cfg.seed,
        initial: cfg.spde.initial.clone(),
    };
    let ens = evolve_parabolic(&sp, &oc)?;
    let meta = serde_json::json!({ "config": oc, "lambdas": ens.lambdas, "steps": ens.times.len() - 1 });
    // one row per (path, mode), one column per time
    let rows: Vec<Vec<f64>> = ens.paths.iter().flat_map(|p| p.iter().cloned()).collect();
    let data = match cfg.output.format {
        Format::Binary => csv("ou.bin", |b| fields::write_binary(&rows, b))?,
        Format::Csv => csv("ou.csv", |b| {
            use std::io::Write;
            writeln!(b, "path,mode,time,value")?;
            for (p, path) in ens.paths.iter().enumerate() {
                for (i, mode) in path.iter().enumerate() {
                    for (t, y) in ens.times.iter().zip(mode) {
                        writeln!(b, "{p},{i},{t},{y}")?;
                    }
                }
            }
            Ok(())
        })?,
    };
    ok(vec![json("ou.json", &meta)?, data])
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyRow {
    pub property: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

fn row(property: impl Into<String>, value: f64, tolerance: f64, pass: bool, note: impl Into<String>) -> PropertyRow {
    PropertyRow { property: property.into(), value, tolerance, pass, note: note.into() }
}

/// Runs the identity suite; every failure or module error becomes a failed row.
pub fn validation_rows(cfg: &RunConfig) -> CliResult<Vec<PropertyRow>> {
    let tol = &cfg.tolerances;
    let pair = measures(cfg)?;
    let t = table(cfg, &pair)?;
    let mut rows = Vec::new();

    // Pythagorean identity at the configured frequencies and points, and at 1
    let mut points = cfg.points.clone();
    points.push(1.0);
    let mut worst: f64 = 0.0;
    let mut pyth = Ok(true);
    for &alpha in &cfg.frequencies {
        for &x in &points {
            match trig_eval_route(&t, alpha, x, cfg.route) {
                Ok(e) => {
                    let r = e.values().pythagorean_defect().abs();
                    worst = worst.max(r / e.err_bound.max(f64::MIN_POSITIVE));
                    if r > tol.pythagorean_factor * e.err_bound {
                        pyth = Ok(false);
                    }
                }
                Err(e) => pyth = Err(e.to_string()),
            }
        }
    }
    rows.push(match pyth {
        Ok(p) => row("pythagorean", worst, tol.pythagorean_factor, p, "residual / err_bound"),
        Err(e) => row("pythagorean", f64::NAN, tol.pythagorean_factor, false, e),
    });

    // derivative relations (integration by parts on atoms)
    let mut worst: f64 = 0.0;
    let mut note = String::new();
    for &alpha in &cfg.frequencies {
        match derivative_relation_residual(&t, alpha) {
            Ok(r) => worst = worst.max(r),
            Err(e) => note = e.to_string(),
        }
    }
    rows.push(row("derivative_relations", worst, tol.derivative, note.is_empty() && worst <= tol.derivative, note));

    // min-max comparison
    let count = cfg.count;
    match (solve_spectrum(&t, BoundaryCondition::Periodic, count), solve_spectrum(&t, BoundaryCondition::Dirichlet, count)) {
        (Ok(p), Ok(d)) => {
            let mm = minmax_check(&p, &d)?;
            rows.push(row("minmax", mm.rows.len() as f64, 0.0, mm.all_hold, "periodic lambda_k <= dirichlet mu_k"));
        }
        (Err(e), _) | (_, Err(e)) => rows.push(row("minmax", f64::NAN, 0.0, false, e.to_string())),
    }

    // trace identity and oracle equivalence need the dense oracle
    if pair.1.len() > tol.oracle_max_atoms {
        let note = format!("skipped: {} V atoms > oracle_max_atoms", pair.1.len());
        rows.push(row("trace_identity", f64::NAN, tol.rel, true, note.clone()));
        rows.push(row("oracle_compare", f64::NAN, tol.rel, true, note));
        return Ok(rows);
    }
    let k = BridgeKernel::new(pair.0.clone())?;
    match assemble_cycle(&pair.0, &pair.1, BoundaryCondition::Dirichlet).and_then(|op| dense_spectrum(&op)) {
        Ok(ds) => {
            let rep = trace_report(&k, &pair.1, &ds.eigenvalues);
            rows.push(row("trace_identity", rep.relative_gap, tol.rel, rep.relative_gap <= tol.rel, "tr K vs sum 1/mu"));
        }
        Err(e) => rows.push(row("trace_identity", trace(&k, &pair.1), tol.rel, false, e.to_string())),
    }
    for bc in [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet] {
        let name = format!("oracle_compare_{}", bc.as_str());
        match oracle_result(&pair, cfg.order, bc) {
            Ok(r) => {
                let c = &r.compare;
                let pass = c.max_rel_gap <= tol.rel && c.min_cosine >= tol.cosine && c.multiplicity_mismatches == 0;
                let note = format!("min cosine {}, multiplicity mismatches {}", c.min_cosine, c.multiplicity_mismatches);
                rows.push(row(name, c.max_rel_gap, tol.rel, pass, note));
            }
            Err(e) => rows.push(row(name, f64::NAN, tol.rel, false, e.to_string())),
        }
    }
    Ok(rows)
}

fn validate(cfg: &RunConfig) -> CliResult<Outcome> {
    let rows = validation_rows(cfg)?;
    let passed = rows.iter().all(|r| r.pass);
    let mut text = String::new();
    for r in &rows {
        let status = if r.pass { "PASS" } else { "FAIL" };
        text.push_str(&format!("{status}  {}: {:e} (tol {:e}) {}\n", r.property, r.value, r.tolerance, r.note));
    }
    Ok(Outcome {
        artifacts: vec![
            json("validate.json", &serde_json::json!({ "passed": passed, "properties": rows }))?,
            Artifact { name: "validate.txt".into(), bytes: text.into_bytes() },
        ],
        passed,
    })
}

fn report(cfg: &RunConfig) -> CliResult<Outcome> {
    let pair = measures(cfg)?;
    let t = table(cfg, &pair)?;
    let sp = solve_spectrum(&t, cfg.bc, cfg.count)?;
    let rep = spectrum_report(&t, &sp);
    let k = BridgeKernel::new(pair.0.clone())?;
    let tr = trace(&k, &pair.1);
    let s1 = tail_sum(&sp, 1.0).ok();

    let mut md = String::new();
    md.push_str(&format!("# Spectral report ({} boundary conditions)\n\n", cfg.bc.as_str()));
    md.push_str(&format!("- W: {} atoms, total mass {}\n", pair.0.len(), pair.0.total_mass()));
    md.push_str(&format!("- V: {} atoms, total mass {}\n", pair.1.len(), pair.1.total_mass()));
    md.push_str(&format!("- eigenvalues computed: {} of {}\n", sp.len(), sp.n_available));
    md.push_str(&format!("- rho_coeff: {:?}\n- rho_fit: {:?}\n- fit constant C: {:?}\n", rep.rho_coeff, rep.rho_fit, rep.fit_constant));
    md.push_str(&format!("- trace of the bridge kernel on L2(V): {tr}\n"));
    if let Some(s) = s1 {
        md.push_str(&format!("- sum 1/lambda: partial {} + tail {} = {}\n", s.partial, s.remainder, s.total()));
    }
    md.push_str("\n| k | lambda | multiplicity |\n|---|---|---|\n");
    for (i, p) in sp.pairs.iter().enumerate() {
        md.push_str(&format!("| {i} | {} | {} |\n", p.lambda, p.multiplicity));
    }

    let coeffs = t.secular_coefficients();
    ok(vec![
        Artifact { name: "report.md".into(), bytes: md.into_bytes() },
        json("report.json", &serde_json::json!({ "spectrum": rep, "trace": tr, "tail_sum_s1": s1 }))?,
        csv("counting.csv", |b| {
            use std::io::Write;
            writeln!(b, "lambda,count")?;
            for (i, l) in sp.eigenvalues().iter().enumerate() {
                writeln!(b, "{l},{}", i + 1)?;
            }
            Ok(())
        })?,
        csv("coefficients.csv", |b| {
            use std::io::Write;
            writeln!(b, "n,a_n,rho_coeff_n")?;
            for (i, a) in coeffs.iter().enumerate() {
                let r = rho_coeff_at(&coeffs, i + 1).map_or(String::new(), |r| r.to_string());
                writeln!(b, "{},{a},{r}", i + 1)?;
            }
            Ok(())
        })?,
    ])
}
