use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use optomech_macro::emit::{self, EmitContext, Format, Meta};
use optomech_macro::error::{Error, Result};
use optomech_macro::measure::macroscopicity;
use optomech_macro::model::{make_params, thermal_occupation_from_ratio, ModelParams};
use optomech_macro::oracle::{self, FdOrder, Kernel, QuadratureSpec, RATIO_CV_TOLERANCE};
use optomech_macro::sweep::{self, FigureId, Method, ParamName, PhononReference, SweepAxis, SweepSpec};
use optomech_macro::wigner::{normalization, phonon_number};

#[derive(Parser, Debug)]
#[command(name = "optomech-macro", version, about = "Macroscopicity of two-mirror optomechanical states")]
struct Cli {
    /// Output format; defaults to the --out extension, else csv (json for eval/oracle/calibrate).
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Suppress progress messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a single parameter point.
    Eval(EvalArgs),
    /// Run a Cartesian sweep given by flags or a JSON config.
    Sweep(SweepArgs),
    /// Generate a preset figure dataset (fig2, fig3, fig4, fig5).
    Figure {
        id: String,
    },
    /// Compare the closed form against phase-space quadrature.
    Oracle(OracleArgs),
    /// Check the quadrature functional on single-mode even cat states.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, allow_negative_numbers = true)]
    n_particles: i64,
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "temperature_ratio")]
    nbar: Option<f64>,
    /// ħω_m/(k_B T), converted to n̄.
    #[arg(long, allow_negative_numbers = true)]
    temperature_ratio: Option<f64>,
    #[arg(long = "d", alias = "d-factor", default_value_t = 0.0, allow_negative_numbers = true)]
    d_factor: f64,
    /// Also evaluate by quadrature.
    #[arg(long)]
    quadrature: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Grid points per phase-space axis.
    #[arg(long, default_value_t = 61)]
    points: usize,
    /// Half-width of the grid in peak standard deviations.
    #[arg(long, default_value_t = 7.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.01)]
    fd_step: f64,
    /// Finite-difference order, 2 or 4.
    #[arg(long, default_value_t = 4)]
    fd_order: u8,
    /// Evaluate the field at every stencil point instead of from per-axis tables.
    #[arg(long)]
    direct: bool,
}

impl GridArgs {
    fn spec(&self) -> Result<QuadratureSpec> {
        let spec = QuadratureSpec::new(self.points, self.extent, self.fd_step, FdOrder::try_from(self.fd_order)?)?;
        Ok(if self.direct { spec.with_kernel(Kernel::Direct) } else { spec })
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON file mirroring the sweep specification.
    #[arg(long, conflicts_with_all = ["axis", "fixed"])]
    config: Option<PathBuf>,
    /// `name=v1,v2,...` or `name=start:step:end`; repeat for more axes, first is slowest.
    #[arg(long)]
    axis: Vec<String>,
    /// `name=value`.
    #[arg(long)]
    fixed: Vec<String>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Report n_ph at d = 0 instead of for the dephased state.
    #[arg(long)]
    decoherence_free_phonons: bool,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value = "1,2")]
    n_particles: String,
    #[arg(long, default_value = "0.5,1,1.5")]
    gamma: String,
    #[arg(long, default_value = "0,0.5")]
    nbar: String,
    #[arg(long = "d", default_value = "0,0.3")]
    d_factor: String,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value = "0.5,1,2")]
    alpha: String,
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long, default_value_t = 8.0)]
    extent: f64,
    #[arg(long, default_value_t = 0.004)]
    fd_step: f64,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "closed_form" | "closed-form" => Ok(Method::ClosedForm),
        "quadrature" => Ok(Method::Quadrature),
        "both" => Ok(Method::Both),
        _ => Err(format!("unknown method `{s}` (closed_form, quadrature, both)")),
    }
}

/// `a,b,c` or `start:step:end` (inclusive).
fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("`{t}` is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(num).collect(),
        [start, step, end] => {
            let (a, h, b) = (num(start)?, num(step)?, num(end)?);
            if h.is_nan() || h <= 0.0 || b < a {
                return Err(Error::Parse(format!("range `{text}` needs step > 0 and end >= start")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + i as f64 * h).collect())
        }
        _ => Err(Error::Parse(format!("cannot read value list `{text}`"))),
    }
}

fn split_assignment(text: &str) -> Result<(ParamName, &str)> {
    let (name, values) = text
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected name=values, got `{text}`")))?;
    Ok((name.trim().parse()?, values))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn params_grid(n: &str, gamma: &str, nbar: &str, d: &str) -> Result<Vec<ModelParams>> {
    let (ns, gs, nbs, ds) = (parse_values(n)?, parse_values(gamma)?, parse_values(nbar)?, parse_values(d)?);
    let mut grid = Vec::new();
    for &n in &ns {
        if n.fract() != 0.0 {
            return Err(Error::Domain {
                field: "n_particles",
                reason: format!("{n} is not an integer"),
            });
        }
        for &g in &gs {
            for &nb in &nbs {
                for &d in &ds {
                    grid.push(make_params(n as i64, g, nb, d)?);
                }
            }
        }
    }
    Ok(grid)
}

struct Runner {
    format: Option<Format>,
    out: Option<PathBuf>,
    quiet: bool,
}

impl Runner {
    fn format_or(&self, fallback: Format) -> Format {
        self.format
            .or_else(|| self.out.as_deref().and_then(Format::from_path))
            .unwrap_or(fallback)
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn deliver(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                emit::write_file(path, text)?;
                self.note(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn deliver_record<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<()> {
        match self.format_or(Format::Json) {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
                s.push('\n');
                self.deliver(&s)
            }
            Format::Csv => self.deliver(&text()),
            Format::Svg => Err(Error::domain("format", "svg is only available for sweeps and figures")),
        }
    }

    fn deliver_rows(&self, rows: &[sweep::SweepRow], spec: SweepSpec, title: &str) -> Result<()> {
        let axes: Vec<ParamName> = spec.axes.iter().map(|a| a.name).collect();
        let ctx = EmitContext {
            axes: &axes,
            title,
            meta: Meta::now(Some(spec)),
        };
        let text = emit::render(rows, self.format_or(Format::Csv), &ctx)?;
        self.deliver(&text)
    }
}

#[derive(Serialize)]
struct EvalRecord {
    params: ModelParams,
    i_raw: f64,
    i_value: f64,
    numerator: f64,
    denominator: f64,
    n_terms: u64,
    n_ph: f64,
    z_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature: Option<QuadRecord>,
}

#[derive(Serialize)]
struct QuadRecord {
    i_raw: f64,
    i_value: f64,
    n_ph: f64,
    z_norm: f64,
    missing_mass_bound: f64,
}

fn run_eval(run: &Runner, args: &EvalArgs) -> Result<()> {
    let nbar = match (args.nbar, args.temperature_ratio) {
        (Some(nb), _) => nb,
        (None, Some(x)) if x > 0.0 => thermal_occupation_from_ratio(x),
        (None, Some(x)) => return Err(Error::domain("temperature_ratio", format!("{x} must be positive"))),
        (None, None) => return Err(Error::domain("nbar", "give --nbar or --temperature-ratio")),
    };
    let params = make_params(args.n_particles, args.gamma, nbar, args.d_factor)?;
    let m = macroscopicity(&params)?;
    let quadrature = if args.quadrature {
        let q = oracle::quadrature_pass(&params, &args.grid.spec()?, true)?;
        Some(QuadRecord {
            i_raw: q.measure_raw,
            i_value: q.measure(),
            n_ph: q.phonons,
            z_norm: q.norm,
            missing_mass_bound: q.missing_mass_bound,
        })
    } else {
        None
    };
    let rec = EvalRecord {
        params,
        i_raw: m.raw_value,
        i_value: m.value,
        numerator: m.numerator,
        denominator: m.denominator,
        n_terms: m.n_terms,
        n_ph: phonon_number(&params),
        z_norm: normalization(&params),
        quadrature,
    };
    run.deliver_record(&rec, || {
        let mut s = String::from("i_raw,i_value,n_ph,z_norm\n");
        let f = emit::fmt_real;
        let _ = writeln!(s, "{},{},{},{}", f(rec.i_raw), f(rec.i_value), f(rec.n_ph), f(rec.z_norm));
        s
    })
}

fn run_sweep_cmd(run: &Runner, args: &SweepArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => serde_json::from_str::<SweepSpec>(&read_file(path)?)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
        None => {
            let mut axes = Vec::new();
            for a in &args.axis {
                let (name, values) = split_assignment(a)?;
                axes.push(SweepAxis::new(name, parse_values(values)?));
            }
            let mut fixed = Vec::new();
            for f in &args.fixed {
                let (name, value) = split_assignment(f)?;
                let v = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("`{value}` is not a number")))?;
                fixed.push((name, v));
            }
            if axes.is_empty() {
                return Err(Error::domain("axes", "give at least one --axis or a --config file"));
            }
            let mut s = SweepSpec::new(axes, fixed);
            s.quadrature = Some(args.grid.spec()?);
            s
        }
    };
    if let Some(m) = args.method {
        spec.method = m;
    }
    if args.decoherence_free_phonons {
        spec.phonon_reference = PhononReference::DecoherenceFree;
    }
    let out_override = spec.output.clone();
    let rows = sweep::run_sweep(&spec)?;
    run.note(&format!("{} rows", rows.len()));
    let runner = match (&run.out, out_override) {
        (None, Some(o)) => Runner {
            format: run.format.or(o.format),
            out: Some(o.path),
            quiet: run.quiet,
        },
        _ => Runner {
            format: run.format,
            out: run.out.clone(),
            quiet: run.quiet,
        },
    };
    runner.deliver_rows(&rows, spec, "sweep")
}

fn run_figure(run: &Runner, id: &str) -> Result<()> {
    let fig: FigureId = id.parse()?;
    let spec = sweep::figure_spec(fig);
    let rows = sweep::run_sweep(&spec)?;
    run.note(&format!("{fig}: {} rows", rows.len()));
    run.deliver_rows(&rows, spec, &fig.to_string())
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    report: &'a oracle::ConsistencyReport,
    cv_tolerance: f64,
    passed: bool,
}

fn run_oracle(run: &Runner, args: &OracleArgs) -> Result<bool> {
    let grid = params_grid(&args.n_particles, &args.gamma, &args.nbar, &args.d_factor)?;
    let spec = args.grid.spec()?;
    run.note(&format!("quadrature over {} points at {} nodes per axis", grid.len(), spec.points_per_axis()));
    let report = oracle::consistency_report(&grid, &spec)?;
    let passed = report
        .summary
        .is_some_and(|s| s.coefficient_of_variation <= RATIO_CV_TOLERANCE);
    if let Some(s) = &report.summary {
        run.note(&format!(
            "mean ratio {:.6}, cv {:.3e}, norm gap {:.2e}, phonon gap {:.2e}{}",
            s.mean_ratio,
            s.coefficient_of_variation,
            report.max_norm_gap(),
            report.max_phonon_gap(),
            if s.constant_factor_flag { ", constant-factor discrepancy flagged" } else { "" }
        ));
    }
    let out = OracleOutput {
        report: &report,
        cv_tolerance: RATIO_CV_TOLERANCE,
        passed,
    };
    run.deliver_record(&out, || {
        let mut s = String::from("n_particles,gamma,nbar,d_factor,i_closed,i_quad,ratio,nph_closed,nph_quad,norm_closed,norm_quad\n");
        let f = emit::fmt_real;
        for r in &report.rows {
            let p = &r.params;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.n_particles(),
                f(p.gamma()),
                f(p.nbar()),
                f(p.d_factor()),
                f(r.i_closed),
                f(r.i_quad),
                r.ratio.map(f).unwrap_or_default(),
                f(r.nph_closed),
                f(r.nph_quad),
                f(r.norm_closed),
                f(r.norm_quad)
            );
        }
        s
    })?;
    Ok(passed)
}

fn run_calibrate(run: &Runner, args: &CalibrateArgs) -> Result<()> {
    let spec = QuadratureSpec::new(args.points, args.extent, args.fd_step, FdOrder::Fourth)?;
    let rows = parse_values(&args.alpha)?
        .into_iter()
        .map(|a| oracle::single_mode_cat_calibration(a, &spec))
        .collect::<Result<Vec<_>>>()?;
    for r in &rows {
        run.note(&format!("alpha {}: relative gap {:.2e}", r.alpha, r.relative_gap()));
    }
    run.deliver_record(&rows, || {
        let mut s = String::from("alpha,i_one_mode,mean_excitation,norm\n");
        let f = emit::fmt_real;
        for r in &rows {
            let _ = writeln!(s, "{},{},{},{}", f(r.alpha), f(r.i_one_mode), f(r.mean_excitation), f(r.norm));
        }
        s
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let run = Runner {
        format: cli.format,
        out: cli.out,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Eval(a) => run_eval(&run, a).map(|()| true),
        Command::Sweep(a) => run_sweep_cmd(&run, a).map(|()| true),
        Command::Figure { id } => run_figure(&run, id).map(|()| true),
        Command::Oracle(a) => run_oracle(&run, a),
        Command::Calibrate(a) => run_calibrate(&run, a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("oracle: closed-form/quadrature ratio is not constant (cv above {RATIO_CV_TOLERANCE:e})");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
