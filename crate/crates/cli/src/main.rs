mod qspec;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use dirac_core::constraints::{sample_surface, synth_linear, validate};
use dirac_core::first_order::{ambiguity_record, default_lift_data, first_order_artifacts, irreducible_lift_1};
use dirac_core::irreducible::{build_default, compare_at, integrate, random_quadratic};
use dirac_core::oracle::{compare_fundamental, fundamental};
use dirac_core::second_order::{ambiguity_records, second_order_artifacts};
use dirac_core::threeform::{build_threeform, paper_choices_report, run_threeform_checks};
use dirac_core::{
    CheckRecord, CheckReport, ConstraintSet, Derivative, Error, ExtendedPoint, LatticeSpec, Method, PhasePoint,
    SystemFile, Tolerance,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "dirac", version, about = "Dirac brackets for reducible second-class constraint systems")]
struct Cli {
    /// Relative singular-value cutoff used for ranks.
    #[arg(long, global = true, default_value_t = 1e-10)]
    rank_tol: f64,
    /// Threshold for weak (on-surface) equalities.
    #[arg(long, global = true, default_value_t = 1e-8)]
    weak_tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check reducibility relations and rank counts of a system file.
    Validate {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the whole certification chain and compare every bracket formulation.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random function pairs tested at every point.
        #[arg(long, default_value_t = 3)]
        functions: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the fundamental bracket matrix of one formulation.
    Bracket {
        file: PathBuf,
        #[arg(long, default_value = "subset")]
        method: String,
        /// Comma-separated coordinates of the evaluation point; a sampled surface point otherwise.
        #[arg(long)]
        at: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a random affine second-order system.
    Synth {
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        m0: usize,
        #[arg(long)]
        m1: usize,
        #[arg(long)]
        m2: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Gauge-fixed three-form field on a periodic lattice.
    Threeform {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        lattice: usize,
        #[arg(long, value_enum, default_value_t = DerivativeArg::Fd)]
        derivative: DerivativeArg,
        /// Also check the closed-form choices of the irreducible reformulation.
        #[arg(long)]
        paper_choices: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Integrate the irreducible equations of motion for a quadratic Hamiltonian.
    Evolve {
        file: PathBuf,
        /// Terms `coef:monomial`, e.g. `0.5:q2*q2,0.5:p2*p2`.
        #[arg(long = "h")]
        hamiltonian: String,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        dt: f64,
        /// Comma-separated starting point; a sampled surface point otherwise.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Project back to the surface after every step.
        #[arg(long)]
        project: bool,
        #[arg(long, default_value_t = 1e-6)]
        drift_tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DerivativeArg {
    Fd,
    Spectral,
}

enum Failure {
    Input(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidParameters(_) | Error::OffSurface { .. } => {
                Failure::Input(e.to_string())
            }
            other => Failure::Check(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn load(path: &Path, tol: &Tolerance) -> Result<ConstraintSet, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map_or("system".into(), |s| s.to_string_lossy().into_owned());
    let file = SystemFile::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(file.to_constraint_set(&name, tol)?)
}

fn parse_point(text: &str, dim: usize) -> Result<PhasePoint, Failure> {
    let z: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Failure::Input(format!("bad coordinate `{s}`"))))
        .collect::<Result<_, _>>()?;
    if z.len() != dim {
        return Err(Failure::Input(format!("point has {} coordinates, expected {dim}", z.len())));
    }
    Ok(PhasePoint::from_slice(&z))
}

fn emit(report: &CheckReport, json: Option<&Path>) -> Outcome {
    print!("{}", report.to_table());
    if let Some(path) = json {
        fs::write(path, report.to_json()).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(report.pass())
}

fn timed<T>(report: &mut CheckReport, stage: &str, f: impl FnOnce() -> Result<T, Failure>) -> Result<T, Failure> {
    let started = Instant::now();
    let out = f();
    *report.timings.entry(stage.to_string()).or_insert(0.0) += started.elapsed().as_secs_f64();
    out
}

fn run_validate(file: &Path, points: usize, seed: u64, tol: &Tolerance) -> Outcome {
    let cs = load(file, tol)?;
    let pts = sample_surface(&cs, seed, points, tol)?;
    let mut report = validate(&cs, &pts, tol)?;
    report.seeds.push(seed);
    emit(&report, None)
}

fn run_analyze(file: &Path, points: usize, seed: u64, functions: usize, json: Option<&Path>, tol: &Tolerance) -> Outcome {
    let cs = load(file, tol)?;
    let mut report = CheckReport::new(cs.name.clone(), *tol);
    report.seeds.push(seed);
    let pts = timed(&mut report, "sample", || Ok(sample_surface(&cs, seed, points, tol)?))?;
    let checked = timed(&mut report, "validate", || Ok(validate(&cs, &pts, tol)?))?;
    report.merge_worst(checked.records);
    if !report.pass() {
        return emit(&report, json);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let pairs: Vec<_> =
        (0..functions).map(|_| (random_quadratic(cs.dim(), &mut rng), random_quadratic(cs.dim(), &mut rng))).collect();
    for (k, p) in pts.iter().enumerate() {
        if cs.order() == 2 {
            let recs = timed(&mut report, "second_order", || Ok(second_order_artifacts(&cs, p, tol)?.checks(&cs, tol)?))?;
            report.merge_worst(recs);
            let recs = timed(&mut report, "irreducible", || Ok(build_default(&cs, p, tol)?.checks(tol, seed + k as u64)?))?;
            report.merge_worst(recs);
            let recs = timed(&mut report, "compare", || Ok(compare_at(&cs, &ExtendedPoint::on_base(p, cs.m1()), &pairs, tol)?))?;
            report.merge_worst(recs);
        } else {
            let recs = timed(&mut report, "first_order", || {
                let mut recs = first_order_artifacts(&cs, p, tol)?.checks(&cs, tol)?;
                if cs.m1() % 2 == 0 {
                    let (gamma, a) = default_lift_data(&cs, p)?;
                    recs.extend(irreducible_lift_1(&cs, &gamma, &a, p, tol)?.checks(tol)?);
                }
                Ok(recs)
            })?;
            report.merge_worst(recs);
            let methods: Vec<Method> =
                Method::for_order(1).into_iter().filter(|&m| m != Method::FirstOrderLift || cs.m1() % 2 == 0).collect();
            let recs = timed(&mut report, "compare", || Ok(compare_fundamental(&cs, &methods, p, tol)?.records))?;
            report.merge_worst(recs);
        }
    }
    let recs: Vec<CheckRecord> = timed(&mut report, "ambiguity", || {
        if cs.order() == 2 {
            Ok(ambiguity_records(&cs, &pts[0], 10, seed, tol)?)
        } else {
            Ok(vec![ambiguity_record(&cs, &pts[0], 10, seed, tol)?])
        }
    })?;
    report.merge_worst(recs);
    emit(&report, json)
}

fn run_bracket(file: &Path, method: &str, at: Option<&str>, seed: u64, tol: &Tolerance) -> Outcome {
    let cs = load(file, tol)?;
    let method: Method = method.parse()?;
    if !Method::for_order(cs.order()).contains(&method) {
        return Err(Failure::Input(format!("method `{method}` does not apply to a system of order {}", cs.order())));
    }
    let point = match at {
        Some(text) => parse_point(text, cs.dim())?,
        None => sample_surface(&cs, seed, 1, tol)?.remove(0),
    };
    cs.ensure_on_surface(&point, tol)?;
    let p = fundamental(&cs, method, &point, tol)?;
    let labels: Vec<String> = (0..cs.dim()).map(|i| cs.spec.label(i)).collect();
    println!("{:>8} {}", "", labels.iter().map(|l| format!("{l:>12}")).collect::<String>());
    for (i, label) in labels.iter().enumerate() {
        let row: String = p.row(i).iter().map(|x| format!("{x:>12.6}")).collect();
        println!("{label:>8} {row}");
    }
    Ok(true)
}

fn run_synth(pairs: usize, m0: usize, m1: usize, m2: usize, seed: u64, output: &Path) -> Outcome {
    let cs = synth_linear(pairs, m0, m1, m2, seed)?;
    let text = SystemFile::from_constraint_set(&cs)?.to_json();
    fs::write(output, text).map_err(|e| Failure::Input(format!("{}: {e}", output.display())))?;
    println!("wrote {} ({} pairs, M0 = {m0}, M1 = {m1}, M2 = {m2})", output.display(), pairs);
    Ok(true)
}

fn run_threeform(d: usize, l: usize, derivative: DerivativeArg, paper: bool, json: Option<&Path>, tol: &Tolerance) -> Outcome {
    let derivative = match derivative {
        DerivativeArg::Fd => Derivative::ForwardDifference,
        DerivativeArg::Spectral => Derivative::Spectral,
    };
    let spec = LatticeSpec::new(d, l, derivative)?;
    let started = Instant::now();
    let sys = build_threeform(&spec, tol)?;
    let build_time = started.elapsed().as_secs_f64();
    let mut report = run_threeform_checks(&sys, tol)?;
    report.timings.insert("threeform_build".into(), build_time);
    if paper {
        let extra = paper_choices_report(&sys, tol)?;
        report.merge_worst(extra.records);
        report.timings.extend(extra.timings.into_iter().map(|(k, v)| (format!("paper_{k}"), v)));
    }
    emit(&report, json)
}

#[allow(clippy::too_many_arguments)]
fn run_evolve(
    file: &Path,
    hamiltonian: &str,
    steps: usize,
    dt: f64,
    start: Option<&str>,
    seed: u64,
    project: bool,
    drift_tol: f64,
    json: Option<&Path>,
    tol: &Tolerance,
) -> Outcome {
    let cs = load(file, tol)?;
    if cs.order() != 2 {
        return Err(Failure::Input("evolve needs a second-order system".into()));
    }
    let h = qspec::parse(hamiltonian, &cs.spec)?;
    let point = match start {
        Some(text) => parse_point(text, cs.dim())?,
        None => sample_surface(&cs, seed, 1, tol)?.remove(0),
    };
    cs.ensure_on_surface(&point, tol)?;
    let mut report = CheckReport::new(cs.name.clone(), *tol);
    report.seeds.push(seed);
    let sys = timed(&mut report, "build", || Ok(build_default(&cs, &point, tol)?))?;
    let at = ExtendedPoint::on_base(&point, cs.m1());
    let tr = timed(&mut report, "integrate", || Ok(integrate(&sys, &h, &at, dt, steps, project, tol)?))?;
    let y_change = (&tr.end.y - &at.y).amax();
    report.push(CheckRecord::bound("evolve_drift", tr.max_drift, drift_tol));
    report.push(CheckRecord::bound("evolve_y_fixed", y_change, 0.0));
    let end: Vec<String> =
        tr.end.z.iter().enumerate().map(|(i, x)| format!("{}={x:.9}", cs.spec.label(i))).collect();
    println!("t = {:.6} after {} steps: {}", dt * steps as f64, tr.steps, end.join(" "));
    emit(&report, json)
}

fn dispatch(cli: Cli) -> Outcome {
    let tol = Tolerance::new(cli.rank_tol, cli.weak_tol, Tolerance::default().surface)?;
    match cli.command {
        Command::Validate { file, points, seed } => run_validate(&file, points, seed, &tol),
        Command::Analyze { file, points, seed, functions, json } => {
            run_analyze(&file, points, seed, functions, json.as_deref(), &tol)
        }
        Command::Bracket { file, method, at, seed } => run_bracket(&file, &method, at.as_deref(), seed, &tol),
        Command::Synth { pairs, m0, m1, m2, seed, output } => run_synth(pairs, m0, m1, m2, seed, &output),
        Command::Threeform { dim, lattice, derivative, paper_choices, json } => {
            run_threeform(dim, lattice, derivative, paper_choices, json.as_deref(), &tol)
        }
        Command::Evolve { file, hamiltonian, steps, dt, start, seed, project, drift_tol, json } => run_evolve(
            &file,
            &hamiltonian,
            steps,
            dt,
            start.as_deref(),
            seed,
            project,
            drift_tol,
            json.as_deref(),
            &tol,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dirac_core::Vector;

    #[test]
    fn point_parsing() {
        let p = parse_point("1, -2.5,0,3e-1", 4).ok().unwrap();
        assert_eq!(p.z, Vector::from_vec(vec![1.0, -2.5, 0.0, 0.3]));
        assert!(matches!(parse_point("1,2", 4), Err(Failure::Input(_))));
        assert!(matches!(parse_point("1,x,2,3", 4), Err(Failure::Input(_))));
    }

    #[test]
    fn error_classes() {
        assert!(matches!(Failure::from(Error::InvalidInput("x".into())), Failure::Input(_)));
        assert!(matches!(Failure::from(Error::NoSolution { residual: 1.0 }), Failure::Check(_)));
    }
}
