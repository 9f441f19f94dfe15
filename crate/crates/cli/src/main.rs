use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use stathyper::deformation::{
    delta_geometry, parse_deformation, Coefficients, Deformation, DeterminantPath, VariationOptions,
};
use stathyper::dynamics::{replicator_orbit, Shift};
use stathyper::geometry::geometry_at;
use stathyper::integral::cone::{linear_entropy_volume_check, parse_region};
use stathyper::integral::{asymptote_s2, closed_s2, entropy_integral};
use stathyper::model::{parse_model, shannon_entropy, StatisticalModel};
use stathyper::potential::{
    closed_form_jacobian, closed_form_weights, fit_params, integrate_weight_pde, integrate_weight_pde_polyline,
    weight_pde_matrix, PotentialParams,
};
use stathyper::suite::{run_all, SuiteSize};
use stathyper::testkit::uniform_vector;

const DEFAULT_SEED: u64 = 0xC0FFEE;
const EXIT_VALIDATION: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "stathyper", version, about = "Geometry, entropy variations and integral identities of statistical hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise geometry.
    Geom {
        #[command(subcommand)]
        action: GeomAction,
    },
    /// First-order variations under a deformation.
    Deform {
        #[command(subcommand)]
        action: DeformAction,
    },
    /// Discrete replicator dynamics of the Gibbs weights.
    Replicator {
        #[command(subcommand)]
        action: ReplicatorAction,
    },
    /// Shifted-Gibbs potential checks.
    Potential {
        #[command(subcommand)]
        action: PotentialAction,
    },
    /// Parameter sweeps.
    Sweep {
        #[command(subcommand)]
        action: SweepAction,
    },
    /// Entropy difference against the volume of a cone region.
    Volume {
        #[command(subcommand)]
        action: VolumeAction,
    },
    /// Runs every property suite.
    VerifyAll {
        #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
        seed: u64,
        /// Use the full acceptance trial counts.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Subcommand)]
enum GeomAction {
    /// Metric, normal, curvatures and entropy at a point.
    At {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        point: Vector,
    },
}

#[derive(Subcommand)]
enum DeformAction {
    /// Variation report and thermodynamic classification.
    Report(DeformArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DetPath {
    Adjugate,
    Inverse,
}

#[derive(Args)]
struct DeformArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    point: Vector,
    /// Deformation document: {"delta_f": [...]} or {"shift": {"v": [...], "tau": t}}.
    #[arg(long)]
    deformation: Option<PathBuf>,
    /// Constant deformation vector.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
    delta_f: Option<Vector>,
    /// Coordinate shift direction.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_list, requires = "tau")]
    shift: Option<Vector>,
    #[arg(long, allow_hyphen_values = true, requires = "shift")]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value = "adjugate")]
    det_path: DetPath,
    /// Reproduce the printed coefficients in the curvature variations.
    #[arg(long)]
    as_printed: bool,
}

#[derive(Subcommand)]
enum ReplicatorAction {
    /// CSV trajectory: step, w_1..w_m, S.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_list)]
        point: Vector,
        #[arg(long)]
        steps: usize,
        /// `auto`, `none`, or a number.
        #[arg(long, allow_hyphen_values = true, default_value = "none", value_parser = parse_shift)]
        shift: Shift,
    },
}

#[derive(Subcommand)]
enum PotentialAction {
    /// Round-trip and path-independence residuals on a random instance.
    Verify {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

#[derive(Subcommand)]
enum SweepAction {
    /// CSV: c, closed, quadrature, asymptote, ratio.
    S2 {
        #[arg(long)]
        c_min: f64,
        #[arg(long)]
        c_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum VolumeAction {
    /// JSON: delta_S, volume_times, mc_sigma.
    Check {
        #[arg(long)]
        region: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED, value_parser = parse_seed)]
        seed: u64,
    },
}

#[derive(Clone, Debug)]
struct Vector(Vec<f64>);

fn parse_list(text: &str) -> std::result::Result<Vector, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Vector)
}

fn parse_seed(text: &str) -> std::result::Result<u64, String> {
    match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => text.parse(),
    }
    .map_err(|e| e.to_string())
}

fn parse_shift(text: &str) -> std::result::Result<Shift, String> {
    match text {
        "auto" => Ok(Shift::Auto),
        "none" => Ok(Shift::None),
        other => other
            .parse::<f64>()
            .map(Shift::Fixed)
            .map_err(|_| format!("expected auto, none or a number, got `{other}`")),
    }
}

fn read_model(path: &Path) -> Result<StatisticalModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit_json(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_csv(header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn geom_at(model: &Path, point: &[f64]) -> Result<u8> {
    let model = read_model(model)?;
    let eval = model.evaluate(point)?;
    let mut value = serde_json::to_value(geometry_at(&eval))?;
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("x".into(), json!(point));
    obj.insert("F".into(), json!(eval.free_energy));
    obj.insert("w".into(), json!(eval.w.as_slice()));
    emit_json(&value)?;
    Ok(0)
}

fn deform_report(args: DeformArgs) -> Result<u8> {
    let model = read_model(&args.model)?;
    let inline = args.delta_f.is_some() || args.shift.is_some();
    if args.delta_f.is_some() && args.shift.is_some() {
        bail!("give either --delta-f or --shift, not both");
    }
    let deformation = match (&args.deformation, inline) {
        (Some(_), true) => bail!("--deformation file conflicts with an inline deformation literal"),
        (Some(path), false) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_deformation(&text, model.n()).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, true) => match (args.delta_f, args.shift, args.tau) {
            (Some(df), _, _) => Deformation::values(df.0),
            (None, Some(v), Some(tau)) => Deformation::coordinate_shift(v.0, tau),
            _ => unreachable!("clap enforces --shift with --tau"),
        },
        (None, false) => bail!("a deformation is required: --deformation, --delta-f or --shift/--tau"),
    };
    let eval = model.evaluate(&args.point.0)?;
    let jet = deformation.resolve(&model, &args.point.0)?;
    let options = VariationOptions {
        determinant: match args.det_path {
            DetPath::Adjugate => DeterminantPath::Adjugate,
            DetPath::Inverse => DeterminantPath::Inverse,
        },
        coefficients: if args.as_printed {
            Coefficients::AsPrinted
        } else {
            Coefficients::Corrected
        },
    };
    let report = delta_geometry(&eval, &jet, options)?;
    let mut value = serde_json::to_value(&report)?;
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("x".into(), json!(args.point.0));
    obj.insert("delta_f".into(), json!(jet.f.as_slice()));
    obj.insert("coefficients".into(), json!(if args.as_printed { "as-printed" } else { "corrected" }));
    emit_json(&value)?;
    Ok(0)
}

fn replicator_run(model: &Path, point: &[f64], steps: usize, shift: Shift) -> Result<u8> {
    let model = read_model(model)?;
    let orbit = replicator_orbit(&model, point, steps, shift)?;
    if orbit.negative_fitness {
        eprintln!("warning: negative fitness values; weights may leave the simplex");
    }
    let m = model.m();
    let mut header = vec!["step".to_string()];
    header.extend((1..=m).map(|a| format!("w_{a}")));
    header.push("S".into());
    let rows: Vec<Vec<String>> = orbit
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let mut row = vec![t.to_string()];
            row.extend(s.w.iter().map(|v| v.to_string()));
            row.push(shannon_entropy(s.w.as_slice()).to_string());
            row
        })
        .collect();
    emit_csv(&header, &rows)?;
    Ok(0)
}

fn potential_verify(m: usize, seed: u64, steps: usize) -> Result<u8> {
    if m == 0 {
        bail!("--m must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = uniform_vector(&mut rng, m, -1.0, 1.0);
    sigma[0] = 0.0;
    let params = PotentialParams {
        gamma: uniform_vector(&mut rng, 1, 0.0, 2.0)[0],
        sigma,
    };
    let f0 = uniform_vector(&mut rng, m, -1.0, 1.0);
    let f1 = uniform_vector(&mut rng, m, -1.0, 1.0);
    let mid_a = uniform_vector(&mut rng, m, -1.5, 1.5);
    let mid_b = uniform_vector(&mut rng, m, -1.5, 1.5);
    let h0 = closed_form_weights(&f0, &params)?;
    let exact = closed_form_weights(&f1, &params)?;
    let straight = integrate_weight_pde(&f0, &f1, h0.as_slice(), steps)?;
    let path_a = integrate_weight_pde_polyline(&[f0.clone(), mid_a, f1.clone()], h0.as_slice(), steps)?;
    let path_b = integrate_weight_pde_polyline(&[f0.clone(), mid_b, f1.clone()], h0.as_slice(), steps)?;
    let fitted = fit_params(&f0, h0.as_slice())?;
    let round_trip = fitted
        .sigma
        .iter()
        .zip(&params.sigma)
        .map(|(a, b)| (a - b).abs())
        .fold((fitted.gamma - params.gamma).abs(), f64::max);
    let jacobian = (closed_form_jacobian(&f0, &params)? - weight_pde_matrix(&h0)).amax();
    let straight_residual = (&straight - &exact).amax();
    let path_residual = (&path_a - &path_b).amax().max((&path_a - &exact).amax());
    let passed = straight_residual <= 1e-9 && path_residual <= 1e-9 && round_trip <= 1e-10 && jacobian <= 1e-10;
    emit_json(&json!({
        "seed": seed,
        "m": m,
        "steps": steps,
        "gamma": params.gamma,
        "sigma": params.sigma,
        "straight_residual": straight_residual,
        "path_independence_residual": path_residual,
        "round_trip_residual": round_trip,
        "jacobian_residual": jacobian,
        "passed": passed,
    }))?;
    Ok(if passed { 0 } else { EXIT_VERIFICATION })
}

fn sweep_s2(c_min: f64, c_max: f64, steps: usize, tol: f64) -> Result<u8> {
    if steps == 0 || !(c_min >= 0.0) || !(c_max >= c_min) {
        bail!("need steps >= 1 and 0 <= c_min <= c_max");
    }
    let model = StatisticalModel::super_ideal(2)?;
    let header: Vec<String> = ["c", "closed", "quadrature", "asymptote", "ratio"].map(String::from).to_vec();
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let c = if steps == 1 {
            c_min
        } else {
            c_min + (c_max - c_min) * k as f64 / (steps - 1) as f64
        };
        let closed = closed_s2(c)?;
        let quadrature = entropy_integral(&model, &[-c, -c], &[c, c], tol)?.value;
        let asymptote = asymptote_s2(c);
        rows.push(
            [c, closed, quadrature, asymptote, closed / asymptote]
                .iter()
                .map(|v| v.to_string())
                .collect(),
        );
    }
    emit_csv(&header, &rows)?;
    Ok(0)
}

fn volume_check(region: &Path, samples: usize, seed: u64) -> Result<u8> {
    let text = fs::read_to_string(region).with_context(|| format!("reading {}", region.display()))?;
    let region = parse_region(&text).with_context(|| format!("parsing {}", region.display()))?;
    let check = linear_entropy_volume_check(&region, samples, seed)?;
    let within = (check.delta_s - check.volume_times).abs() <= 3.0 * check.mc_sigma;
    let mut value = serde_json::to_value(check)?;
    let obj = value.as_object_mut().expect("check is an object");
    obj.insert("seed".into(), json!(seed));
    obj.insert("samples".into(), json!(samples));
    obj.insert("within_3_sigma".into(), json!(within));
    emit_json(&value)?;
    Ok(if within { 0 } else { EXIT_VERIFICATION })
}

fn verify_all(seed: u64, full: bool) -> Result<u8> {
    let size = if full { SuiteSize::full() } else { SuiteSize::quick() };
    let reports = run_all(seed, &size);
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        eprintln!("[{}] {:>2} {}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.name);
    }
    emit_json(&json!({
        "seed": seed,
        "size": if full { "full" } else { "quick" },
        "criteria": reports,
        "passed": passed,
    }))?;
    Ok(if passed { 0 } else { EXIT_VERIFICATION })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Geom {
            action: GeomAction::At { model, point },
        } => geom_at(&model, &point.0),
        Command::Deform {
            action: DeformAction::Report(args),
        } => deform_report(args),
        Command::Replicator {
            action: ReplicatorAction::Run {
                model,
                point,
                steps,
                shift,
            },
        } => replicator_run(&model, &point.0, steps, shift),
        Command::Potential {
            action: PotentialAction::Verify { m, seed, steps },
        } => potential_verify(m, seed, steps),
        Command::Sweep {
            action: SweepAction::S2 {
                c_min,
                c_max,
                steps,
                tol,
            },
        } => sweep_s2(c_min, c_max, steps, tol),
        Command::Volume {
            action: VolumeAction::Check { region, samples, seed },
        } => volume_check(&region, samples, seed),
        Command::VerifyAll { seed, full } => verify_all(seed, full),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
        || e
            .downcast_ref::<serde_json::Error>()
            .and_then(|j| j.io_error_kind())
            .is_some_and(|k| k == io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
