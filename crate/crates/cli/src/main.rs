use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kamforge::continuation::{
    crosscheck, inverse_scattering, picard_solve, taylor0_eval, taylor0_recursion, CrosscheckConfig, Method,
    PicardConfig, QTaylorData, TaylorEvalReport,
};
use kamforge::frequency::{export_set_geometry, GeometryOptions};
use kamforge::kam::{dynamical_residual, solve_curve, InvariantCurve, SolverConfig};
use kamforge::obstruction::{obstruction_order, Exactness, RationalFreq, DEFAULT_THRESHOLD};
use kamforge::operators::{apply, MultiplierKind};
use kamforge::sweep::{run_sweep, Axis, SweepConfig, SweepGrid};
use kamforge::{verify, DiophantineClass, Error, FourierSeries, Frequency};
use num_complex::Complex64;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "kamforge", version, about = "Invariant curves of the standard map at complex rotation number")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for one invariant curve.
    Solve(SolveArgs),
    /// Solve on a grid of frequencies and coupling values.
    Sweep(SweepArgs),
    /// Gap list and boundary of the Diophantine set.
    Geometry(GeometryArgs),
    /// First order at which the formal series fails at a rational frequency.
    Obstruction(ObstructionArgs),
    /// Taylor coefficients of the solution at q = 0.
    Taylor0(Taylor0Args),
    /// Run several methods at the same point and compare.
    Crosscheck(CrosscheckArgs),
    /// Run the built-in verification suites.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct FreqArgs {
    /// Real part of the rotation number ω.
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["q_re", "q_im"])]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0, requires = "omega")]
    omega_im: f64,
    /// Real part of q = exp(2πiω).
    #[arg(long, allow_hyphen_values = true)]
    q_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q_im: Option<f64>,
}

impl FreqArgs {
    fn frequency(&self) -> Result<Frequency, Error> {
        match (self.omega, self.q_re, self.q_im) {
            (Some(re), None, None) => Ok(Frequency::from_omega(Complex64::new(re, self.omega_im))),
            (None, None, None) => Err(Error::InvalidParameter("give --omega or --q-re/--q-im".into())),
            (None, re, im) => Ok(Frequency::from_q(Complex64::new(re.unwrap_or(0.0), im.unwrap_or(0.0)))),
            _ => Err(Error::InvalidParameter("--omega and --q-re/--q-im are exclusive".into())),
        }
    }
}

#[derive(Args, Clone)]
struct ForcingArgs {
    /// `cos`, `sin`, a mode list like `1:0.5,-1:0.5` or `2:0:0.25` (k:re[:im]),
    /// or a path to a Fourier series JSON file.
    #[arg(long = "f", default_value = "cos")]
    forcing: String,
}

impl ForcingArgs {
    fn series(&self) -> Result<FourierSeries, Error> {
        parse_forcing(&self.forcing)
    }
}

#[derive(Args, Clone)]
struct EpsArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    eps_im: f64,
}

impl EpsArgs {
    fn value(&self) -> Complex64 {
        Complex64::new(self.eps, self.eps_im)
    }
}

#[derive(Args, Clone)]
struct ClassArgs {
    #[arg(long = "M", default_value_t = 6.0)]
    m: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 1000)]
    mmax: u64,
}

impl ClassArgs {
    fn class(&self) -> Result<DiophantineClass, Error> {
        DiophantineClass::new(self.m, self.tau, self.mmax)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Newton,
    Picard,
    Taylor0,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    freq: FreqArgs,
    #[command(flatten)]
    eps: EpsArgs,
    #[command(flatten)]
    forcing: ForcingArgs,
    #[arg(long, value_enum, default_value = "newton")]
    method: SolveMethod,
    /// Fourier cutoff N.
    #[arg(long, default_value_t = 128)]
    modes: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 30)]
    max_iters: usize,
    /// Warm-start steps in ε (Newton only).
    #[arg(long, default_value_t = 0)]
    warm_start: usize,
    /// Taylor orders (taylor0 only).
    #[arg(long, default_value_t = 40)]
    orders: usize,
    /// Warn when ω is outside the Diophantine class given by --M/--tau/--mmax.
    #[arg(long)]
    check_class: bool,
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long, default_value_t = 1024)]
    grid: usize,
    /// Curve JSON output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Curve samples as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    samples: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    re_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    re_max: f64,
    #[arg(long, default_value_t = 1)]
    re_n: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    im_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    im_max: f64,
    #[arg(long, default_value_t = 1)]
    im_n: usize,
    /// Coupling values, comma separated; `a+bi` not supported, use --eps-im for a shared imaginary part.
    #[arg(long, value_delimiter = ',', default_value = "0.05", allow_hyphen_values = true)]
    eps: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    eps_im: f64,
    #[command(flatten)]
    forcing: ForcingArgs,
    #[arg(long, default_value_t = 128)]
    modes: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "KAMFORGE_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Keep u and du/dq in every record.
    #[arg(long)]
    store_curves: bool,
    /// JSON-lines output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampled family JSON, for the C¹-holomorphic norm estimate.
    #[arg(long)]
    family: Option<PathBuf>,
}

#[derive(Args)]
struct GeometryArgs {
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long, default_value_t = 1000)]
    boundary_points: usize,
    /// Only report the total gap measure.
    #[arg(long)]
    no_gaps: bool,
    #[arg(long, default_value_t = 0.0)]
    min_width: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObstructionArgs {
    #[arg(long)]
    p: i64,
    #[arg(long)]
    m: i64,
    #[command(flatten)]
    forcing: ForcingArgs,
    #[arg(long, default_value_t = 12)]
    max_order: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Double-double arithmetic for the recursion.
    #[arg(long)]
    extended: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Taylor0Args {
    #[command(flatten)]
    eps: EpsArgs,
    #[command(flatten)]
    forcing: ForcingArgs,
    #[arg(long, default_value_t = 40)]
    orders: usize,
    /// Evaluate the series at this q as well.
    #[arg(long, allow_hyphen_values = true)]
    q_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    q_im: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrosscheckArgs {
    #[command(flatten)]
    freq: FreqArgs,
    #[command(flatten)]
    eps: EpsArgs,
    #[command(flatten)]
    forcing: ForcingArgs,
    #[arg(long, value_delimiter = ',', default_value = "newton,picard,taylor0")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 128)]
    modes: usize,
    #[arg(long, default_value_t = 40)]
    orders: usize,
    #[arg(long, env = "KAMFORGE_WORKERS", default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// `acceptance`, `properties`, `all`, a criterion number 1-11 or P1-P4.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Also write the results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorOut<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct Taylor0Out {
    data: QTaylorData,
    /// Modes `±k` of `u_k`, enough to recover the forcing.
    inverse_scattering: FourierSeries,
    evaluation: Option<Evaluation>,
}

#[derive(Serialize)]
struct Evaluation {
    q: Complex64,
    u: FourierSeries,
    report: TaylorEvalReport,
}

enum Failure {
    Solver(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Geometry(a) => geometry(a),
        Cmd::Obstruction(a) => obstruction(a),
        Cmd::Taylor0(a) => taylor0(a),
        Cmd::Crosscheck(a) => crosscheck_cmd(a),
        Cmd::Verify(a) => verify_cmd(a),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            let (kind, message) = match f {
                Failure::Solver(e) => (e.kind(), e.to_string()),
                Failure::Io(m) => ("io", m),
            };
            let out = ErrorOut {
                error: ErrorBody { kind, message },
            };
            println!("{}", serde_json::to_string(&out).unwrap());
            ExitCode::FAILURE
        }
    }
}

fn parse_forcing(spec: &str) -> Result<FourierSeries, Error> {
    match spec {
        "cos" => return Ok(FourierSeries::cosine(1, 0)),
        "sin" => return Ok(FourierSeries::sine(1, 0)),
        _ => {}
    }
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("{spec}: {e}")))?;
        return serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{spec}: {e}")));
    }
    let bad = || Error::InvalidParameter(format!("cannot parse forcing `{spec}`"));
    let mut modes = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let k: i64 = parts[0].parse().map_err(|_| bad())?;
        let re: f64 = parts[1].parse().map_err(|_| bad())?;
        let im: f64 = match parts.get(2) {
            Some(s) => s.parse().map_err(|_| bad())?,
            None => 0.0,
        };
        modes.push((k, Complex64::new(re, im)));
    }
    if modes.is_empty() {
        return Err(bad());
    }
    Ok(FourierSeries::from_modes(&modes, 0))
}

fn writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), Failure> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn init_pool(workers: usize) {
    if workers > 0 {
        // Fails only if the global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
}

fn solve(a: SolveArgs) -> Result<ExitCode, Failure> {
    let freq = a.freq.frequency()?;
    let f = a.forcing.series()?;
    let eps = a.eps.value();
    let class = if a.check_class { Some(a.class.class()?) } else { None };
    let mut curve = match a.method {
        SolveMethod::Newton => {
            let cfg = SolverConfig {
                tol: a.tol,
                max_iters: a.max_iters,
                cutoff: a.modes,
                warm_start_steps: a.warm_start,
                class,
                ..SolverConfig::default()
            };
            solve_curve(&f, &freq, eps, &cfg)?
        }
        SolveMethod::Picard => {
            let cfg = PicardConfig {
                tol: a.tol.min(1e-14),
                cutoff: a.modes,
                ..PicardConfig::default()
            };
            let (u, report) = picard_solve(&f, &freq, eps, &cfg)?;
            let v = apply(MultiplierKind::NablaMinus, &u, &freq)?;
            InvariantCurve {
                freq,
                eps,
                f: f.clone(),
                u,
                v,
                report,
                dynamical_residual: None,
            }
        }
        SolveMethod::Taylor0 => {
            let q = freq
                .q()
                .ok_or_else(|| Error::Precondition("Taylor evaluation needs a finite q".into()))?;
            let data = taylor0_recursion(&f, eps, a.orders)?;
            let (u, rep) = taylor0_eval(&data, q)?;
            let u = u.resized(a.modes.max(u.cutoff()));
            let v = apply(MultiplierKind::NablaMinus, &u, &freq)?;
            let mut report = kamforge::kam::SolveReport {
                residual_history: vec![rep.last_term],
                quadratic_fit_slope: None,
                beta: Complex64::new(0.0, 0.0),
                aliasing_tail: 0.0,
                converged: rep.decaying,
                iterations: data.len(),
                effective_cutoff: u.cutoff(),
                max_lambda: 0.0,
                strip_norms: Vec::new(),
                warnings: rep.warnings,
            };
            if !rep.decaying {
                report.warnings.push("Taylor terms are not decaying".into());
            }
            InvariantCurve {
                freq,
                eps,
                f: f.clone(),
                u,
                v,
                report,
                dynamical_residual: None,
            }
        }
    };
    if curve.dynamical_residual.is_none() && freq.on_unit_circle() {
        curve.dynamical_residual = Some(dynamical_residual(&curve, a.grid)?);
    }
    if let Some(path) = &a.csv {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?);
        writeln!(w, "theta,re_x,im_x,re_y,im_y")?;
        for p in curve.points(a.samples)? {
            writeln!(w, "{},{},{},{},{}", p.theta, p.x.re, p.x.im, p.y.re, p.y.im)?;
        }
        w.flush()?;
    }
    let r = &curve.report;
    let summary = format!(
        "iterations {}  residual {:.3e}  dynamical residual {}  cutoff {}",
        r.iterations,
        r.residual_history.last().copied().unwrap_or(f64::NAN),
        curve
            .dynamical_residual
            .map_or_else(|| "n/a".to_string(), |d| format!("{d:.3e}")),
        r.effective_cutoff
    );
    eprintln!("{summary}");
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&a.out, &curve)?;
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs) -> Result<ExitCode, Failure> {
    let f = a.forcing.series()?;
    if a.re_n == 0 || a.im_n == 0 || a.eps.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()).into());
    }
    let grid = SweepGrid {
        omega_re: Axis::new(a.re_min, a.re_max, a.re_n),
        omega_im: Axis::new(a.im_min, a.im_max, a.im_n),
        eps: a.eps.iter().map(|&e| Complex64::new(e, a.eps_im)).collect(),
    };
    let cfg = SweepConfig {
        solver: SolverConfig {
            tol: a.tol,
            cutoff: a.modes,
            ..SolverConfig::default()
        },
        workers: a.workers,
        store_curves: a.store_curves,
        ..SweepConfig::default()
    };
    let out = run_sweep(&f, &grid, &cfg)?;
    let mut w = writer(&a.out)?;
    out.write_jsonl(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.family {
        write_json(&Some(p.clone()), &out.family)?;
    }
    eprintln!("{} of {} points converged", out.converged_count(), out.records.len());
    Ok(if out.all_failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn geometry(a: GeometryArgs) -> Result<ExitCode, Failure> {
    let class = a.class.class()?;
    let opts = GeometryOptions {
        boundary_points: a.boundary_points,
        list_gaps: !a.no_gaps,
        min_listed_width: a.min_width,
    };
    let g = export_set_geometry(&class, &opts);
    eprintln!("gap measure {:.6} (bound {:.6})", g.total_gap_measure, g.measure_bound);
    write_json(&a.out, &g)?;
    Ok(ExitCode::SUCCESS)
}

fn obstruction(a: ObstructionArgs) -> Result<ExitCode, Failure> {
    let rf = RationalFreq::new(a.p, a.m)?;
    let f = a.forcing.series()?;
    let ex = if a.extended { Exactness::Extended } else { Exactness::Float };
    let rep = obstruction_order(&f, &rf, a.max_order, a.threshold, ex);
    match rep.n_star {
        Some(n) => eprintln!("obstruction at order {n} (predicted {})", rep.predicted_n_star),
        None => eprintln!("no obstruction up to order {}", a.max_order),
    }
    write_json(&a.out, &rep)?;
    Ok(ExitCode::SUCCESS)
}

fn taylor0(a: Taylor0Args) -> Result<ExitCode, Failure> {
    let f = a.forcing.series()?;
    let data = taylor0_recursion(&f, a.eps.value(), a.orders)?;
    let evaluation = match a.q_re {
        Some(re) => {
            let q = Complex64::new(re, a.q_im);
            let (u, report) = taylor0_eval(&data, q)?;
            Some(Evaluation { q, u, report })
        }
        None => None,
    };
    let out = Taylor0Out {
        inverse_scattering: inverse_scattering(&data),
        data,
        evaluation,
    };
    write_json(&a.out, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn crosscheck_cmd(a: CrosscheckArgs) -> Result<ExitCode, Failure> {
    init_pool(a.workers);
    let freq = a.freq.frequency()?;
    let f = a.forcing.series()?;
    let methods = a
        .methods
        .iter()
        .map(|m| match m.trim() {
            "newton" => Ok(Method::Newton),
            "picard" => Ok(Method::Picard),
            "taylor0" => Ok(Method::Taylor0),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = CrosscheckConfig {
        newton: SolverConfig::with_cutoff(a.modes),
        picard: PicardConfig {
            cutoff: a.modes,
            ..PicardConfig::default()
        },
        taylor_orders: a.orders,
        ..CrosscheckConfig::default()
    };
    let rep = crosscheck(&f, &freq, a.eps.value(), &methods, &cfg);
    for p in &rep.pairs {
        eprintln!("{} vs {}: {:.3e}", p.a.name(), p.b.name(), p.sup_diff);
    }
    write_json(&a.out, &rep)?;
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(a: VerifyArgs) -> Result<ExitCode, Failure> {
    let results = verify::run_suite(&a.suite)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{}`", a.suite)))?;
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {} failed", results.len() - failed, failed);
    if a.out.is_some() {
        write_json(&a.out, &results)?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
