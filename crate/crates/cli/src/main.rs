use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nhse_core::amoeba::{self, MinimizeOptions};
use nhse_core::band_topology::{nu_table, MIN_TRACK_GRID};
use nhse_core::io::{self, LoadedModel};
use nhse_core::model_zoo;
use nhse_core::spectral::{self, Selector};
use nhse_core::symmetry::find_intertwiner;
use nhse_core::verify::{self, CheckOptions, PartnerCheckResult, Verdict};
use nhse_core::{Complex64, Error, Result, SymmetryKind, TightBindingModel};

#[derive(Parser)]
#[command(name = "nhse", version, about = "Non-Hermitian skin effect toolkit")]
struct Cli {
    /// Cap on worker threads (also NHSE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// OBC or PBC eigenvalues as `re,im` CSV.
    Spectrum(SpectrumArgs),
    /// Density profile and decay-factor fit of one OBC eigenstate.
    Localize(LocalizeArgs),
    /// Winding of det[E - H] along one momentum axis.
    Winding(WindingArgs),
    /// Ronkin function value and gradient, or its minimum.
    Ronkin(RonkinArgs),
    /// TRS-dagger invariant over transverse momenta.
    Nu(NuArgs),
    /// Skin-mode partner check for one internal symmetry.
    Verify(VerifyArgs),
    /// Built-in models.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Obc,
    Pbc,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "obc")]
    bc: Bc,
    /// Lattice size (OBC) or momentum grid (PBC); one value is used for every axis.
    #[arg(long, default_value = "40")]
    size: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a scatter plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, default_value = "40")]
    size: String,
    /// Row index into the `spectrum` output (sorted by real, then imaginary part).
    #[arg(long, conflicts_with = "energy")]
    index: Option<usize>,
    /// Take the eigenvalue nearest this energy.
    #[arg(long, allow_hyphen_values = true)]
    energy: Option<String>,
    /// Profile CSV `x_1,...,x_d,prob`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Localization report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Heat map (2D models only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct WindingArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, allow_hyphen_values = true)]
    energy: String,
    /// Axis: x, y, z or an index.
    #[arg(long, default_value = "x")]
    axis: String,
    /// Comma-separated decay factors, one per axis.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Comma-separated momenta for the other axes.
    #[arg(long, allow_hyphen_values = true)]
    transverse: Option<String>,
    /// Initial points on the momentum cycle.
    #[arg(long, default_value_t = amoeba::MIN_GRID)]
    kpoints: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RonkinArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, allow_hyphen_values = true)]
    energy: String,
    /// Evaluation point, or starting point with --minimize.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Quadrature points per axis.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long)]
    minimize: bool,
    #[arg(long, default_value_t = 1e-4)]
    gtol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NuArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, allow_hyphen_values = true)]
    energy: String,
    #[arg(long, default_value = "x")]
    axis: String,
    /// Transverse momenta sampled per transverse axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Tracking points along the winding axis.
    #[arg(long, default_value_t = MIN_TRACK_GRID)]
    kpoints: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-pair band windings as JSON.
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    symmetry: String,
    #[arg(long, default_value = "40")]
    size: String,
    /// Bulk eigenstates to sample.
    #[arg(long, default_value_t = 40)]
    samples: usize,
    /// Random instead of evenly strided sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra energies to check, e.g. 3.19+0.80i (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    energy: Vec<String>,
    #[arg(long, default_value = "verify_report.json")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ZooAction {
    /// Ids, dimensions, parameters and descriptions.
    List,
    /// Write a model file.
    Export {
        id: String,
        /// Parameter override `name=value` (repeatable).
        #[arg(long = "set", allow_hyphen_values = true)]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A quoted energy must sit this close to an OBC eigenvalue.
const QUOTE_TOL: f64 = model_zoo::MATCH_TOL;

fn load(arg: &ModelArg) -> Result<LoadedModel> {
    let loaded = io::parse_model_file(&arg.model)?;
    for w in &loaded.warnings {
        eprintln!("WARNING: {}: {w}", arg.model.display());
    }
    Ok(loaded)
}

fn parse_axis(s: &str, model: &TightBindingModel) -> Result<usize> {
    let axis = match s {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => s.parse().map_err(|_| Error::Parse(format!("bad axis '{s}'")))?,
    };
    if axis >= model.dimension() {
        return Err(Error::Precondition(format!("axis {s} out of range for dimension {}", model.dimension())));
    }
    Ok(axis)
}

fn parse_sizes(s: &str, model: &TightBindingModel) -> Result<Vec<usize>> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Parse(format!("bad size '{t}' in '{s}'"))))
        .collect::<Result<_>>()?;
    let d = model.dimension();
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v),
        n => Err(Error::DimensionMismatch(format!("{n} sizes given for a {d}D model"))),
    }
}

fn parse_mu(s: Option<&str>, model: &TightBindingModel) -> Result<Vec<f64>> {
    let d = model.dimension();
    let mu = s.map(io::parse_reals).transpose()?.unwrap_or_else(|| vec![0.0; d]);
    if mu.len() != d {
        return Err(Error::DimensionMismatch(format!("--mu has {} values for a {d}D model", mu.len())));
    }
    Ok(mu)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn spectrum(a: &SpectrumArgs) -> Result<ExitCode> {
    let m = load(&a.model)?.model;
    let sizes = parse_sizes(&a.size, &m)?;
    let r = match a.bc {
        Bc::Obc => spectral::obc_eigenvalues(&m, &sizes)?,
        Bc::Pbc => spectral::pbc_spectrum(&m, &sizes)?,
    };
    let mut values = r.eigenvalues.clone();
    spectral::sort_complex(&mut values);
    emit(a.out.as_ref(), &io::spectrum_csv(&values))?;
    if let Some(p) = &a.svg {
        let bc = match a.bc {
            Bc::Obc => "OBC",
            Bc::Pbc => "PBC",
        };
        std::fs::write(p, io::spectrum_svg(&values, &format!("{} {bc} {:?}", m.name(), sizes)))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn localize(a: &LocalizeArgs) -> Result<ExitCode> {
    let m = load(&a.model)?.model;
    let sizes = parse_sizes(&a.size, &m)?;
    let r = spectral::obc_spectrum(&m, &sizes)?;
    // rows are numbered as in the sorted `spectrum` output
    let v = &r.eigenvalues;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&x, &y| v[x].re.total_cmp(&v[y].re).then(v[x].im.total_cmp(&v[y].im)));
    let i = match (&a.index, &a.energy) {
        (Some(row), _) => *order.get(*row).ok_or(Error::IndexOutOfRange(*row))?,
        (None, Some(e)) => r.select(Selector::Nearest(io::parse_complex(e)?))?,
        (None, None) => return Err(Error::Precondition("give --index or --energy".into())),
    };
    let row = order.iter().position(|&j| j == i).unwrap_or(i);
    let profile = spectral::density_profile(&r, Selector::Index(i))?;
    let report = spectral::fit_decay_factor(&profile, &Default::default())?;
    emit(a.out.as_ref(), &io::profile_csv(&profile))?;
    if let Some(p) = &a.report {
        #[derive(serde::Serialize)]
        struct Out<'a> {
            index: usize,
            energy: Complex64,
            #[serde(flatten)]
            report: &'a spectral::LocalizationReport,
        }
        std::fs::write(p, io::to_json(&Out { index: row, energy: r.eigenvalues[i], report: &report }) + "\n")?;
    }
    if let Some(p) = &a.svg {
        let title = format!("{} E = {}", m.name(), io::format_complex(r.eigenvalues[i]));
        std::fs::write(p, io::profile_svg(&profile, &title)?)?;
    }
    eprintln!("E = {}  class {}  mu {:?}", io::format_complex(r.eigenvalues[i]), report.class.label(), report.mu_fit);
    Ok(ExitCode::SUCCESS)
}

fn winding(a: &WindingArgs) -> Result<ExitCode> {
    let m = load(&a.model)?.model;
    let e = io::parse_complex(&a.energy)?;
    let axis = parse_axis(&a.axis, &m)?;
    let mu = parse_mu(a.mu.as_deref(), &m)?;
    let transverse = a.transverse.as_deref().map(io::parse_reals).transpose()?.unwrap_or_else(|| vec![0.0; m.dimension() - 1]);
    let w = amoeba::winding_number(&m, e, &mu, axis, &transverse, a.kpoints)?;
    emit(a.out.as_ref(), &(io::to_json(&w) + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn ronkin(a: &RonkinArgs) -> Result<ExitCode> {
    let m = load(&a.model)?.model;
    let e = io::parse_complex(&a.energy)?;
    let mu = parse_mu(a.mu.as_deref(), &m)?;
    let grid = vec![a.grid; m.dimension()];
    let text = if a.minimize {
        let min = amoeba::ronkin_minimize_with(&m, e, &mu, &grid, &MinimizeOptions { gtol: a.gtol, ..Default::default() })?;
        io::to_json(&min)
    } else {
        io::to_json(&amoeba::ronkin_evaluate(&m, e, &mu, &grid)?)
    };
    emit(a.out.as_ref(), &(text + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn nu(a: &NuArgs) -> Result<ExitCode> {
    let m = load(&a.model)?.model;
    let e = io::parse_complex(&a.energy)?;
    let axis = parse_axis(&a.axis, &m)?;
    let table = nu_table(&m, e, axis, a.grid, a.kpoints)?;
    emit(a.out.as_ref(), &io::nu_csv(&table))?;
    if let Some(p) = &a.pairs {
        std::fs::write(p, io::to_json(&table) + "\n")?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Quoted zoo energies apply when the file holds exactly that zoo model.
fn zoo_quotes(m: &TightBindingModel, sizes: &[usize]) -> Vec<Complex64> {
    let Ok(entry) = model_zoo::entry(m.name()) else { return vec![] };
    entry
        .references
        .iter()
        .filter(|r| r.sizes == sizes)
        .filter(|r| {
            let over: Vec<(&str, f64)> = r.overrides.clone();
            model_zoo::build_with(entry.id, &over).is_ok_and(|b| same_model(&b.model, m))
        })
        .map(|r| r.value)
        .collect()
}

fn same_model(a: &TightBindingModel, b: &TightBindingModel) -> bool {
    a.dimension() == b.dimension()
        && a.orbitals() == b.orbitals()
        && a.hoppings().count() == b.hoppings().count()
        && a.hoppings().zip(b.hoppings()).all(|((va, ma), (vb, mb))| va == vb && nhse_core::linalg::max_abs_diff(ma, mb) == 0.0)
}

fn row(tag: &str, r: &PartnerCheckResult) -> String {
    format!(
        "{tag:<7} {:>22} {:>22} {:>18} {:>18} {:<17} {}{}",
        io::format_complex(round(r.energy)),
        io::format_complex(round(r.partner_energy)),
        format!("{:.4?}", r.report.mu_fit),
        format!("{:.4?}", r.partner_report.mu_fit),
        format!("{:?}", r.verdict),
        if r.verdict == r.expected { "ok" } else { "MISMATCH" },
        if r.weak { " (weak)" } else { "" },
    )
}

fn round(z: Complex64) -> Complex64 {
    let r = |x: f64| (x * 1e4).round() / 1e4 + 0.0;
    Complex64::new(r(z.re), r(z.im))
}

fn verify_cmd(a: &VerifyArgs) -> Result<ExitCode> {
    let loaded = load(&a.model)?;
    let m = &loaded.model;
    let kind: SymmetryKind = a.symmetry.parse()?;
    let op = match loaded.symmetries.iter().find(|s| s.kind == kind) {
        Some(op) => op.clone(),
        None => find_intertwiner(kind, m, 1e-8)?,
    };
    let sizes = parse_sizes(&a.size, m)?;
    let opts = CheckOptions { n_samples: a.samples, seed: a.seed, ..Default::default() };
    let result = spectral::obc_spectrum(m, &sizes)?;
    let reports = verify::localize(&result, &opts)?;
    let summary = verify::table1_check_result(m, &result, &reports, &op, &opts)?;
    let mut energies: Vec<Complex64> = a.energy.iter().map(|s| io::parse_complex(s)).collect::<Result<_>>()?;
    energies.extend(zoo_quotes(m, &sizes));
    let quoted: Vec<PartnerCheckResult> = energies
        .iter()
        .map(|&e| verify::check_quoted(&result, &reports, &op, e, QUOTE_TOL, &opts))
        .collect::<Result<_>>()?;

    println!("symmetry {kind}  expected {:?}  sizes {sizes:?}", summary.expected);
    println!("{:<7} {:>22} {:>22} {:>18} {:>18} {:<17} result", "source", "E", "partner", "mu(E)", "mu(partner)", "verdict");
    for r in &quoted {
        println!("{}", row("quoted", r));
    }
    for r in &summary.results {
        println!("{}", row("sample", r));
    }
    let quoted_bad = quoted.iter().filter(|r| r.verdict != r.expected).count();
    println!(
        "agreement {:.4} over {} samples; {} strong mismatches; {} quoted mismatches",
        summary.agreement,
        summary.results.len(),
        summary.strong_mismatches,
        quoted_bad
    );

    #[derive(serde::Serialize)]
    struct Report<'a> {
        model: &'a str,
        sizes: &'a [usize],
        symmetry: SymmetryKind,
        expected: Verdict,
        quoted: &'a [PartnerCheckResult],
        samples: &'a [PartnerCheckResult],
        agreement: f64,
        strong_mismatches: usize,
    }
    let report = Report {
        model: m.name(),
        sizes: &sizes,
        symmetry: kind,
        expected: summary.expected,
        quoted: &quoted,
        samples: &summary.results,
        agreement: summary.agreement,
        strong_mismatches: summary.strong_mismatches,
    };
    std::fs::write(&a.out, io::to_json(&report) + "\n")?;
    Ok(if quoted_bad + summary.strong_mismatches > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn zoo(action: &ZooAction) -> Result<ExitCode> {
    match action {
        ZooAction::List => {
            for e in model_zoo::list() {
                let params: Vec<String> = e.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{:<14} {}D  [{}]  {}", e.id, e.dimension, params.join(" "), e.description);
            }
        }
        ZooAction::Export { id, set, out } => {
            let mut overrides = BTreeMap::new();
            for s in set {
                let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse(format!("--set expects name=value, got '{s}'")))?;
                let v: f64 = v.parse().map_err(|_| Error::Parse(format!("bad value in --set '{s}'")))?;
                overrides.insert(k.to_string(), v);
            }
            let b = model_zoo::build(id, &overrides)?;
            emit(out.as_ref(), &(io::model_to_json(&b.model, &b.symmetries) + "\n"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("NHSE_THREADS") {
            Ok(s) => Some(s.trim().parse().map_err(|_| Error::Parse(format!("bad NHSE_THREADS '{s}'")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Precondition("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Precondition(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    threads(cli.threads)?;
    match &cli.command {
        Command::Spectrum(a) => spectrum(a),
        Command::Localize(a) => localize(a),
        Command::Winding(a) => winding(a),
        Command::Ronkin(a) => ronkin(a),
        Command::Nu(a) => nu(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Zoo { action } => zoo(action),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    return ExitCode::from(2);
                }
                _ => {}
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR UsageError: {first}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
