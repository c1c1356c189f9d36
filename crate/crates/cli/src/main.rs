use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rand::Rng;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gapflag::geometry::{bures_decomposition, MetricTensor, fisher_metric_r, kl_exact, kl_quadratic, purity_from_spectrum, shannon_entropy};
use gapflag::gkls::{integrate_direct, integrate_split, IntegrationOptions, Trajectory};
use gapflag::io::{matrix_to_json, parse_model, parse_state, write_trajectory_csv, Provenance};
use gapflag::montecarlo::shard_rng;
use gapflag::spectral::{
    crossover_index, estimate_ordered_simplex_volume, estimate_weighted_simplex_volume, gaps_from_probs, in_polytope,
    ordered_simplex_volume, probs_from_gap_slice, ratio_to_f64, weighted_simplex_volume,
};
use gapflag::sun::{
    coset_unitary, flag_volume, full_unitary, integrate_flag_density, qutrit_coset_explicit, resolution_check, sample_flag,
    sample_flag_with, state_space_volume,
};
use gapflag::{AngleSet, Error, GapVector, ProbVector};

#[derive(Parser, Debug)]
#[command(name = "gapflag", version, about = "Gap coordinates, flag frames and GKLS evolution for n-level density matrices")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "GAPFLAG_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert between eigenvalues and gap coordinates.
    Convert(ConvertArgs),
    /// Information-geometric quantities at a gap vector.
    Geometry(GeometryArgs),
    /// Numerical self-checks.
    Verify(VerifyArgs),
    /// Integrate a GKLS model.
    Evolve(EvolveArgs),
    /// Draw frames from the invariant flag measure.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    n: usize,
    /// Eigenvalues, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "r", required_unless_present = "r")]
    p: Option<Vec<f64>>,
    /// Gap coordinates, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    r: Option<Vec<f64>>,
    /// Sort `--p` into descending order instead of rejecting it.
    #[arg(long)]
    sort: bool,
}

#[derive(Args, Debug)]
#[group(id = "quantity", required = true, multiple = false)]
struct Quantity {
    #[arg(long, group = "quantity")]
    fisher: bool,
    #[arg(long, group = "quantity")]
    bures: bool,
    #[arg(long, group = "quantity")]
    purity: bool,
    #[arg(long, group = "quantity")]
    kl: bool,
    #[arg(long, group = "quantity")]
    entropy: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct GeometryArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    r: Vec<f64>,
    #[command(flatten)]
    quantity: Quantity,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Check {
    Identity,
    Measure,
    Volumes,
    Unitarity,
    QutritMatrix,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    which: Check,
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Monte-Carlo sample count.
    #[arg(long = "N", default_value_t = 100_000)]
    samples: usize,
    /// Random draws for the unitarity and qutrit-matrix checks.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Frobenius threshold for the identity check.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Direct,
    Split,
    Both,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    /// Model JSON: `{"n", "H", "jumps", "rates"}`.
    #[arg(long)]
    model: PathBuf,
    /// Initial state JSON: `{"n", "rho"}`.
    #[arg(long)]
    rho0: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 1.0)]
    t_end: f64,
    /// Output directory for `direct.csv`, `split.csv` and `summary.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "record-every", default_value_t = 1)]
    record_every: usize,
    /// Finish on the direct integrator if the split chart breaks down.
    #[arg(long)]
    fallback: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "N")]
    samples: usize,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Io(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn emit(v: &Value) -> CmdResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn provenance(command: &str, seed: u64, params: Value) -> Value {
    serde_json::to_value(Provenance::new(command, Some(seed), params)).expect("provenance serializes")
}

fn check_len(v: &[f64], want: usize, what: &str) -> Result<(), Error> {
    if v.len() != want {
        return Err(Error::InvalidProbs(format!("{what} has {} entries, expected {want}", v.len())));
    }
    Ok(())
}

fn gap_vector(n: usize, r: &[f64]) -> Result<GapVector, Error> {
    if n < 2 {
        return Err(Error::Dimension(n));
    }
    check_len(r, n - 1, "--r")?;
    GapVector::new(r.to_vec())
}

fn convert(args: &ConvertArgs, seed: u64) -> CmdResult {
    let n = args.n;
    if n < 2 {
        return Err(Error::Dimension(n).into());
    }
    let params = json!({"n": n, "p": args.p, "r": args.r, "sort": args.sort});
    let (p, r) = match (&args.p, &args.r) {
        (Some(p), _) => {
            check_len(p, n, "--p")?;
            let pv = if args.sort { ProbVector::from_unsorted(p.clone())? } else { ProbVector::new(p.clone())? };
            let r = gaps_from_probs(&pv);
            (pv.as_slice().to_vec(), r)
        }
        (None, Some(r)) => {
            let r = gap_vector(n, r)?;
            (probs_from_gap_slice(r.as_slice()), r)
        }
        (None, None) => unreachable!("clap requires one of --p/--r"),
    };
    let crossover = crossover_index(&r).ok();
    emit(&json!({
        "provenance": provenance("convert", seed, params),
        "p": p,
        "r": r.as_slice(),
        "in_polytope": in_polytope(r.as_slice(), n),
        "crossover_index": crossover,
    }))
}

fn matrix_rows(g: &MetricTensor) -> Vec<Vec<f64>> {
    let m = g.components();
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn geometry(args: &GeometryArgs, seed: u64) -> CmdResult {
    let r = gap_vector(args.n, &args.r)?;
    let p = probs_from_gap_slice(r.as_slice());
    let q = &args.quantity;
    let (name, value): (&str, Value) = if q.fisher {
        ("fisher", json!(matrix_rows(&fisher_metric_r(&r)?)))
    } else if q.bures {
        let b = bures_decomposition(&r)?;
        let weights: Vec<Value> = b.angular_weights.iter().map(|(&(i, j), w)| json!({"i": i + 1, "j": j + 1, "weight": w})).collect();
        ("bures", json!({"spectral": matrix_rows(&b.spectral_part), "angular": weights}))
    } else if q.purity {
        ("purity", json!(purity_from_spectrum(&p)))
    } else if q.kl {
        let pv = ProbVector::new(p.clone())?;
        ("kl", json!({"exact": kl_exact(&pv)?, "quadratic": kl_quadratic(&r)}))
    } else {
        ("entropy", json!(shannon_entropy(&ProbVector::new(p.clone())?)))
    };
    let params = json!({"n": args.n, "r": args.r, "quantity": name});
    match args.format {
        Format::Json => emit(&json!({"provenance": provenance("geometry", seed, params), name: value})),
        Format::Csv => {
            let prov = Provenance::new("geometry", Some(seed), params);
            let mut out = io::stdout().lock();
            for line in prov.header_lines() {
                writeln!(out, "{line}")?;
            }
            write_csv_value(&mut out, name, &value)?;
            Ok(())
        }
    }
}

fn write_csv_value<W: Write>(w: &mut W, name: &str, v: &Value) -> io::Result<()> {
    match v {
        Value::Array(rows) if rows.iter().all(Value::is_array) => {
            for row in rows {
                let cells: Vec<String> = row.as_array().unwrap().iter().map(|x| x.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Value::Object(map) if name == "bures" => {
            writeln!(w, "# spectral")?;
            write_csv_value(w, "spectral", &map["spectral"])?;
            writeln!(w, "# angular")?;
            writeln!(w, "i,j,weight")?;
            for e in map["angular"].as_array().unwrap() {
                writeln!(w, "{},{},{}", e["i"], e["j"], e["weight"])?;
            }
        }
        Value::Object(map) => {
            let keys: Vec<&String> = map.keys().collect();
            writeln!(w, "{}", keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","))?;
            writeln!(w, "{}", keys.iter().map(|k| map[*k].to_string()).collect::<Vec<_>>().join(","))?;
        }
        other => {
            writeln!(w, "{name}")?;
            writeln!(w, "{other}")?;
        }
    }
    Ok(())
}

fn verify(args: &VerifyArgs, seed: u64) -> CmdResult {
    let n = args.n;
    let params = json!({"which": format!("{:?}", args.which), "n": n, "N": args.samples, "trials": args.trials, "tol": args.tol});
    let (pass, report) = match args.which {
        Check::Identity => {
            let mut cols = Vec::new();
            let mut pass = true;
            for i in 0..n.max(1) {
                let rep = resolution_check(n, i, args.samples, seed.wrapping_add(i as u64))?;
                pass &= rep.frobenius_error < args.tol;
                cols.push(json!({"column": i + 1, "frobenius_error": rep.frobenius_error}));
            }
            (pass, json!({"columns": cols, "threshold": args.tol}))
        }
        Check::Measure => {
            let est = integrate_flag_density(n, args.samples, seed)?;
            let z = est.z_score(1.0);
            (z < 3.0, json!({"integral": est.value, "std_err": est.std_err, "z": z}))
        }
        Check::Volumes => {
            let w = weighted_simplex_volume(n)?;
            let o = ordered_simplex_volume(n)?;
            let f: i128 = (1..n as i128).product();
            let ratio = w / o;
            let exact_ok = *w.numer() == 1 && *w.denom() == f * f && *ratio.numer() == n as i128 && *ratio.denom() == 1;
            let mc = estimate_weighted_simplex_volume(n, args.samples, seed)?;
            let mco = estimate_ordered_simplex_volume(n, args.samples, seed.wrapping_add(1))?;
            let zw = mc.z_score(ratio_to_f64(&w));
            let zo = mco.z_score(ratio_to_f64(&o));
            let flag = flag_volume(n).ok();
            let total = state_space_volume(n).ok();
            (
                exact_ok && zw < 3.0 && zo < 3.0,
                json!({
                    "weighted_simplex": w.to_string(),
                    "ordered_simplex": o.to_string(),
                    "ratio": ratio.to_string(),
                    "mc_weighted": {"value": mc.value, "std_err": mc.std_err, "z": zw},
                    "mc_ordered": {"value": mco.value, "std_err": mco.std_err, "z": zo},
                    "flag_volume": flag,
                    "state_space_volume": total,
                }),
            )
        }
        Check::Unitarity => {
            let mut rng = shard_rng(seed, 0);
            let mut worst: f64 = 0.0;
            if n < 2 {
                return Err(Error::Dimension(n).into());
            }
            for k in 0..args.trials {
                let a = AngleSet::random(n, &mut rng);
                let torus: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
                let frames = [coset_unitary(&a), full_unitary(&a.with_torus(torus)?)?, sample_flag(n, seed.wrapping_add(k as u64))];
                for f in &frames {
                    worst = worst.max(f.unitarity_error()).max(f.determinant_error());
                }
            }
            (worst < 1e-12, json!({"max_error": worst}))
        }
        Check::QutritMatrix => {
            let mut rng = shard_rng(seed, 0);
            let mut worst: f64 = 0.0;
            for _ in 0..args.trials {
                let a = AngleSet::random(3, &mut rng);
                let e = qutrit_coset_explicit(&a)?;
                worst = worst.max((coset_unitary(&a).matrix() - e).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            (worst < 1e-12, json!({"max_entry_deviation": worst}))
        }
    };
    let status = if pass { "PASS" } else { "FAIL" };
    emit(&json!({"provenance": provenance("verify", seed, params), "status": status, "report": report}))?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("verify {:?} failed", args.which)))
    }
}

fn log_slopes(traj: &Trajectory) -> Vec<Option<f64>> {
    let m = traj.n().saturating_sub(1);
    (0..m)
        .map(|a| {
            let pts: Vec<(f64, f64)> = traj.points.iter().filter(|p| p.gaps[a] > 0.0).map(|p| (p.t, p.gaps[a].ln())).collect();
            if pts.len() < 2 {
                return None;
            }
            let k = pts.len() as f64;
            let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let num: f64 = pts.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
            let den: f64 = pts.iter().map(|(t, _)| (t - tm).powi(2)).sum();
            (den > 0.0).then(|| num / den)
        })
        .collect()
}

fn traj_summary(traj: &Trajectory) -> Value {
    let last = traj.points.last().expect("trajectory has an initial point");
    json!({
        "points": traj.points.len(),
        "t_final": last.t,
        "r_final": last.gaps,
        "log_slopes": log_slopes(traj),
        "max_trace_error": traj.points.iter().map(|p| p.diagnostics.trace_error).fold(0.0, f64::max),
        "min_eigenvalue": traj.points.iter().map(|p| p.diagnostics.min_eigenvalue).fold(f64::INFINITY, f64::min),
        "breakdown": traj.breakdown,
    })
}

fn write_csv(path: &Path, traj: &Trajectory, prov: &Provenance) -> CmdResult {
    let file = fs::File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut w = io::BufWriter::new(file);
    write_trajectory_csv(&mut w, traj, prov).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn evolve(args: &EvolveArgs, seed: u64) -> CmdResult {
    let model = parse_model(&read_text(&args.model)?)?;
    let rho0 = parse_state(&read_text(&args.rho0)?)?;
    if rho0.n() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: rho0.n() }.into());
    }
    if args.record_every == 0 {
        return Err(Error::Integration("--record-every must be at least 1".into()).into());
    }
    let opts = IntegrationOptions { record_every: args.record_every, fallback_to_direct: args.fallback, ..Default::default() };
    let params = json!({
        "model": args.model.display().to_string(),
        "rho0": args.rho0.display().to_string(),
        "method": format!("{:?}", args.method).to_lowercase(),
        "dt": args.dt,
        "t_end": args.t_end,
        "record_every": args.record_every,
        "fallback": args.fallback,
    });
    let prov = Provenance::new("evolve", Some(seed), params.clone());
    fs::create_dir_all(&args.out).map_err(|e| Failure::Io(format!("{}: {e}", args.out.display())))?;

    let mut summary = serde_json::Map::new();
    summary.insert("provenance".into(), provenance("evolve", seed, params));
    let mut failure = None;
    let mut direct = None;
    let mut split = None;
    if matches!(args.method, MethodArg::Direct | MethodArg::Both) {
        let traj = integrate_direct(&rho0, &model, args.t_end, args.dt, &opts)?;
        write_csv(&args.out.join("direct.csv"), &traj, &prov)?;
        summary.insert("direct".into(), traj_summary(&traj));
        direct = Some(traj);
    }
    if matches!(args.method, MethodArg::Split | MethodArg::Both) {
        match integrate_split(&rho0, &model, args.t_end, args.dt, &opts) {
            Ok(traj) => {
                write_csv(&args.out.join("split.csv"), &traj, &prov)?;
                summary.insert("split".into(), traj_summary(&traj));
                split = Some(traj);
            }
            Err(e @ Error::Breakdown { t, min_gap }) => {
                summary.insert("split".into(), json!({"error": e.to_string(), "breakdown": t, "min_gap": min_gap}));
                failure = Some(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let (Some(a), Some(b)) = (&direct, &split) {
        summary.insert("max_divergence".into(), json!(a.max_divergence(b)));
    }
    let summary = Value::Object(summary);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(args.out.join("summary.json"), format!("{text}\n")).map_err(|e| Failure::Io(e.to_string()))?;
    emit(&summary)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// Kolmogorov–Smirnov statistic of `|u_11|^2` against its Beta(1, n-1) law.
fn ks_statistic(mut xs: Vec<f64>, n: usize) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    let cdf = |x: f64| 1.0 - (1.0 - x).powi(n as i32 - 1);
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / m).max((k + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

fn sample(args: &SampleArgs, seed: u64) -> CmdResult {
    let n = args.n;
    if n < 2 {
        return Err(Error::Dimension(n).into());
    }
    let mut rng = shard_rng(seed, 0);
    let frames: Vec<_> = (0..args.samples).map(|_| sample_flag_with(n, &mut rng)).collect();
    let diagnostics = if frames.is_empty() {
        Value::Null
    } else {
        let xs: Vec<f64> = frames.iter().map(|f| f.matrix()[(0, 0)].norm_sqr()).collect();
        let d = ks_statistic(xs, n);
        let critical = 1.628 / (frames.len() as f64).sqrt();
        json!({
            "statistic": "|u_11|^2 against Beta(1, n-1)",
            "ks": d,
            "critical_1pct": critical,
            "pass": d < critical,
            "max_unitarity_error": frames.iter().map(|f| f.unitarity_error()).fold(0.0, f64::max),
        })
    };
    let doc = json!({
        "provenance": provenance("sample", seed, json!({"n": n, "N": args.samples})),
        "diagnostics": diagnostics,
        "frames": frames.iter().map(|f| matrix_to_json(f.matrix())).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string(&doc).expect("frames serialize");
    match &args.out {
        Some(path) => fs::write(path, format!("{text}\n")).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Convert(a) => convert(a, cli.seed),
        Command::Geometry(a) => geometry(a, cli.seed),
        Command::Verify(a) => verify(a, cli.seed),
        Command::Evolve(a) => evolve(a, cli.seed),
        Command::Sample(a) => sample(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
