use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use kyorbit::bifurcation;
use kyorbit::dde::{self, HistorySegment, DEFAULT_EPS_SPEC};
use kyorbit::export::{to_json, write_samples_csv};
use kyorbit::expr::{self, ExprError};
use kyorbit::orbit::{find_orbits, OrbitRecord, OrbitSearch};
use kyorbit::periodmap::{sample_with, Classification, PeriodMapTable};
use kyorbit::planar::symmetry_residuals;
use kyorbit::{Bindings, Nonlinearity, Tolerances};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::svg;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = to_json(value).map_err(|e| CliError::numerical("io", e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn warn_irregular(nl: &Nonlinearity) {
    if nl.regularity_warning() {
        eprintln!("warning: [nonlinearity] the expression uses abs or sqrt and may not be twice differentiable");
    }
}

fn table(cfg: &RunConfig, nl: &Nonlinearity) -> Result<PeriodMapTable, CliError> {
    Ok(sample_with(nl, cfg.a_max, cfg.m, cfg.periodmap_options())?)
}

fn orbit_search(cfg: &RunConfig, nl: &Nonlinearity) -> Result<(PeriodMapTable, OrbitSearch), CliError> {
    let table = table(cfg, nl)?;
    let search = find_orbits(nl, &table, cfg.n_max, cfg.orbit_options())?;
    for t in search.tangencies() {
        eprintln!(
            "warning: [periodmap] T_f touches {} (n = {}) near a = {} without crossing; reported as a saddle-node candidate",
            t.period.value, t.period.n, t.amplitude
        );
    }
    Ok((table, search))
}

/// Branch-local labels `n{n}_{k}` for output file names.
fn labels(records: &[OrbitRecord]) -> Vec<String> {
    let mut seen = std::collections::BTreeMap::new();
    records
        .iter()
        .map(|r| {
            let k = seen.entry(r.n).and_modify(|k| *k += 1).or_insert(1);
            format!("n{}_{}", r.n, k)
        })
        .collect()
}

#[derive(Serialize)]
struct Validation<'a> {
    nonlinearity: String,
    feedback: kyorbit::Feedback,
    origin_rate: f64,
    analytic_partials: bool,
    regularity_warning: bool,
    report: &'a kyorbit::SymmetryReport,
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    let report = nl.report();
    println!("nonlinearity: {}", nl.describe());
    println!("feedback: {}", nl.feedback());
    println!("|d2 f(0,0)|: {}", nl.origin_rate());
    println!(
        "grid: [-{e}, {e}]^2 with {} points per axis, tolerance {:e}",
        report.grid.points,
        report.grid.tol,
        e = report.grid.extent
    );
    println!("even defect: {:e}", report.max_even_defect);
    println!("odd defect: {:e}", report.max_odd_defect);
    println!("min |d2 f|: {:e}", report.min_abs_d2);
    warn_irregular(&nl);
    if cfg.wants(Format::Json) {
        let path = cfg.out_path("validation.json")?;
        write_json(
            &path,
            &Validation {
                nonlinearity: nl.describe(),
                feedback: nl.feedback(),
                origin_rate: nl.origin_rate(),
                analytic_partials: nl.uses_analytic_partials(),
                regularity_warning: nl.regularity_warning(),
                report,
            },
        )?;
        announce(&path);
    }
    Ok(())
}

pub fn periodmap(cfg: &RunConfig, svg_flag: bool) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    warn_irregular(&nl);
    let table = table(cfg, &nl)?;
    println!("classification: {}", table.classification);
    let path = cfg.out_path("periodmap.csv")?;
    let mut w = create(&path)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    announce(&path);
    let orbits = if table.classification == Classification::LocallyConstant {
        eprintln!(
            "warning: [periodmap] T_f is constant to within {:e} of T_f(0); orbit conclusions do not apply",
            table.options.plateau_rel
        );
        Vec::new()
    } else if svg_flag || cfg.wants(Format::Svg) {
        find_orbits(&nl, &table, cfg.n_max, cfg.orbit_options())?.records.iter().map(OrbitRecord::summary).collect()
    } else {
        Vec::new()
    };
    if svg_flag || cfg.wants(Format::Svg) {
        let path = cfg.out_path("periodmap.svg")?;
        std::fs::write(&path, svg::render(&nl, &table, &orbits, cfg.n_max))?;
        announce(&path);
    }
    Ok(())
}

pub fn orbits(cfg: &RunConfig, resolution: usize) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    warn_irregular(&nl);
    let (_, search) = orbit_search(cfg, &nl)?;
    let summaries: Vec<_> = search.records.iter().map(OrbitRecord::summary).collect();
    for s in &summaries {
        println!(
            "n = {} amplitude = {} period = {} slope = {:e} hyperbolic = {} morse_index = {}",
            s.n, s.amplitude, s.period, s.slope, s.hyperbolic, s.morse_index
        );
    }
    if summaries.is_empty() {
        println!("no orbits with n <= {} on (0, {}]", cfg.n_max, cfg.a_max);
    }
    if cfg.wants(Format::Json) {
        let path = cfg.out_path("orbits.json")?;
        write_json(&path, &summaries)?;
        announce(&path);
    }
    if cfg.wants(Format::Csv) {
        for (rec, label) in search.records.iter().zip(labels(&search.records)) {
            let path = cfg.out_path(&format!("orbit_{label}.csv"))?;
            let mut w = create(&path)?;
            write_samples_csv(&mut w, "t,x", &rec.construct_solution().samples(resolution))?;
            w.flush()?;
            announce(&path);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Verification {
    n: u32,
    amplitude: f64,
    period: f64,
    residual: f64,
    antisymmetry: f64,
    shift_residual: f64,
    wrong_shift_residual: f64,
    even_residual: f64,
    odd_residual: f64,
    pass: bool,
}

pub const RESIDUAL_GATE: f64 = 1e-6;
pub const SYMMETRY_GATE: f64 = 1e-7;

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    let (_, search) = orbit_search(cfg, &nl)?;
    let tol = Tolerances::new(cfg.rtol, cfg.atol);
    let mut results = Vec::new();
    for rec in &search.records {
        let x = rec.construct_solution();
        let residual = dde::residual(&nl, &x)?;
        let antisymmetry = (0..4096)
            .map(|i| -1.0 + (rec.period + 1.0) * i as f64 / 4096.0)
            .map(|t| (dde::PeriodicSignal::value(&x, t - 2.0) + dde::PeriodicSignal::value(&x, t)).abs())
            .fold(0.0, f64::max);
        let sym = symmetry_residuals(&nl, rec.amplitude, tol)?;
        let pass = residual < RESIDUAL_GATE && antisymmetry < SYMMETRY_GATE && sym.max_valid() < SYMMETRY_GATE;
        println!(
            "{} n = {} amplitude = {}: residual {:e}, x(t-2)+x(t) {:e}, symmetry {:e} (wrong shift {:e})",
            if pass { "PASS" } else { "FAIL" },
            rec.n,
            rec.amplitude,
            residual,
            antisymmetry,
            sym.max_valid(),
            sym.wrong_shift
        );
        results.push(Verification {
            n: rec.n,
            amplitude: rec.amplitude,
            period: rec.period,
            residual,
            antisymmetry,
            shift_residual: sym.shift,
            wrong_shift_residual: sym.wrong_shift,
            even_residual: sym.even,
            odd_residual: sym.odd,
            pass,
        });
    }
    if cfg.wants(Format::Json) {
        let path = cfg.out_path("verify.json")?;
        write_json(&path, &results)?;
        announce(&path);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::numerical("dde", format!("{failed} orbit(s) failed verification")));
    }
    Ok(())
}

pub fn floquet(cfg: &RunConfig, mesh: usize, half: bool, eps_spec: Option<f64>) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    let (_, search) = orbit_search(cfg, &nl)?;
    let eps = eps_spec.unwrap_or(DEFAULT_EPS_SPEC);
    let mut mismatches = 0;
    for (rec, label) in search.records.iter().zip(labels(&search.records)) {
        let x = rec.construct_solution();
        let full = dde::orbit_spectrum(&nl, &x, rec.period, mesh, eps)?;
        let verdict = if !rec.hyperbolic {
            "SKIP (non-hyperbolic)"
        } else if full.unstable_count as u32 == rec.morse_index {
            "PASS"
        } else {
            mismatches += 1;
            "FAIL"
        };
        println!(
            "{verdict} n = {} amplitude = {}: morse_index {} vs unstable_count {} (trivial defect {:e})",
            rec.n, rec.amplitude, rec.morse_index, full.unstable_count, full.trivial_defect
        );
        if cfg.wants(Format::Json) {
            let path = cfg.out_path(&format!("floquet_{label}.json"))?;
            write_json(&path, &full)?;
            announce(&path);
        }
        if half {
            let n_spec = dde::orbit_spectrum(&nl, &x, 0.5 * rec.period, mesh, eps)?;
            println!("  half-period negative real multipliers: {:?}", n_spec.negative_real());
            if cfg.wants(Format::Json) {
                let path = cfg.out_path(&format!("floquet_{label}_half.json"))?;
                write_json(&path, &n_spec)?;
                announce(&path);
            }
        }
    }
    if mismatches > 0 {
        return Err(CliError::numerical(
            "dde",
            format!("{mismatches} orbit(s) disagree with the predicted Morse index"),
        ));
    }
    Ok(())
}

pub struct SimulateArgs<'a> {
    pub history: Option<f64>,
    pub history_expr: Option<&'a str>,
    pub t_max: f64,
    pub mesh: usize,
    pub dt: f64,
}

fn history_from_expr(text: &str, mesh: usize) -> Result<HistorySegment, CliError> {
    let e = expr::parse(text)?;
    if let Some(name) = e.free_names().into_iter().find(|n| n != "theta") {
        return Err(ExprError::UnboundParameter(name).into());
    }
    let mut bindings = Bindings::new();
    let mut samples = Vec::with_capacity(mesh + 1);
    for j in 0..=mesh {
        let theta = if j == mesh { 0.0 } else { -1.0 + j as f64 / mesh as f64 };
        bindings.insert("theta".into(), theta);
        samples.push(e.eval(0.0, 0.0, &bindings)?);
    }
    Ok(HistorySegment::new(samples)?)
}

pub fn simulate(cfg: &RunConfig, args: SimulateArgs<'_>) -> Result<(), CliError> {
    let nl = cfg.nonlinearity()?;
    if args.dt.is_nan() || args.dt <= 0.0 {
        return Err(CliError::usage(format!("dt = {} must be positive", args.dt)));
    }
    let history = match (args.history, args.history_expr) {
        (_, Some(text)) => history_from_expr(text, args.mesh)?,
        (c, None) => HistorySegment::constant(args.mesh, c.unwrap_or(0.5))?,
    };
    let sol = dde::simulate(&nl, history, args.t_max, Tolerances::new(cfg.rtol, cfg.atol))?;
    let window = args.t_max.min(20.0);
    println!("trailing amplitude ({window} time units): {}", sol.trailing_amplitude(window));
    match sol.trailing_period(window) {
        Some(p) => println!("trailing period: {p}"),
        None => println!("trailing period: no oscillation detected"),
    }
    let path = cfg.out_path("simulation.csv")?;
    let mut w = create(&path)?;
    write_samples_csv(&mut w, "t,x", &sol.samples(args.dt))?;
    w.flush()?;
    announce(&path);
    Ok(())
}

pub fn bifurcate(cfg: &RunConfig, alpha_lo: f64, alpha_hi: f64) -> Result<(), CliError> {
    if !(alpha_lo > 0.0 && alpha_hi >= alpha_lo) {
        return Err(CliError::usage(format!("alpha range [{alpha_lo}, {alpha_hi}] must satisfy 0 < lo <= hi")));
    }
    let nl = cfg.nonlinearity()?;
    let table = table(cfg, &nl)?;
    let events = bifurcation::scan(&table, [alpha_lo, alpha_hi], cfg.n_max);
    for e in &events {
        println!("{} alpha = {} n = {} amplitude = {} period = {}", e.kind, e.alpha, e.n, e.amplitude, e.period);
    }
    if cfg.wants(Format::Json) {
        let path = cfg.out_path("bifurcation.json")?;
        write_json(&path, &events)?;
        announce(&path);
    }
    if cfg.wants(Format::Csv) {
        let path = cfg.out_path("bifurcation.csv")?;
        let mut w = create(&path)?;
        bifurcation::write_csv(&events, &mut w)?;
        w.flush()?;
        announce(&path);
    }
    Ok(())
}
