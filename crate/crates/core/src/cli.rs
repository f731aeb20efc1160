//! The `molcomm` command line.
//!
//! ```text
//! molcomm cir [--scenario FILE] [--receiver passive|absorbing] [--r 1um,2um] [--t 0,1s]
//! molcomm regions FILE [--scheme NAME] [--grid-max N] [--out FILE]
//! molcomm ber FILE [--mode MODE] [--method exact|monte-carlo] [--seed N] [--trials N] [--threads N] [--out-dir DIR]
//! molcomm constellation check|separation FILE [--scheme NAME]
//! molcomm constellation budget --orders 4,16,64 [--axes 2]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 infeasible scenario.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use crate::channel::{mean_distance_absorbing_cir, mean_passive_cir, ChannelParams, Receiver};
use crate::constellation::{
    check_channel_free, min_symbol_separation, normalize_budget, Constellation,
};
use crate::decoder::{raster_regions, DecoderSpec};
use crate::error::{Error, Result};
use crate::evaluation::{
    ber_vs_budget, curves_to_csv, fmt_num, imperfect_csi_sweep, monte_carlo_mobile,
    monte_carlo_static, relative_gain, with_threads, Curve, Method,
};
use crate::scenario::{parse_quantity, Dimension, Mode, Scenario};

/// Seed used when neither the command line, the scenario nor
/// `MOLCOMM_SEED` provides one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "molcomm",
    version,
    about = "Multi-axis concentration modulation for diffusive molecular communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hit probability against distance, or its mean against time.
    Cir(CirArgs),
    /// Rasterize the decision regions of one scheme.
    Regions(RegionsArgs),
    /// Error-rate experiments driven by a scenario file.
    Ber(BerArgs),
    /// Constellation diagnostics and budget tables.
    Constellation {
        #[command(subcommand)]
        action: ConstellationAction,
    },
}

#[derive(Args, Debug)]
struct CirArgs {
    /// Take channel parameters from this scenario file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    receiver: Option<ReceiverArg>,
    /// Diffusion coefficient of the molecules, e.g. `5e-9m2/s`.
    #[arg(long)]
    d_inf: Option<String>,
    /// Combined diffusion coefficient of the transceivers.
    #[arg(long)]
    d_tr: Option<String>,
    #[arg(long)]
    r_rx: Option<String>,
    #[arg(long)]
    r0: Option<String>,
    #[arg(long)]
    tau_s: Option<String>,
    #[arg(long)]
    tb: Option<String>,
    /// Comma-separated distances; an empty list writes only the header.
    /// Defaults to `r0`.
    #[arg(long)]
    r: Option<String>,
    /// Comma-separated release times; switches the output to the mean gain
    /// of the mobile channel.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReceiverArg {
    Passive,
    Absorbing,
}

impl From<ReceiverArg> for Receiver {
    fn from(r: ReceiverArg) -> Self {
        match r {
            ReceiverArg::Passive => Receiver::Passive,
            ReceiverArg::Absorbing => Receiver::Absorbing,
        }
    }
}

#[derive(Args, Debug)]
struct RegionsArgs {
    scenario: PathBuf,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    grid_max: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BerArgs {
    scenario: PathBuf,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum ConstellationAction {
    /// Is ML decoding independent of the channel and noise?
    Check(ConstellationFile),
    /// Minimum Euclidean distance between symbols.
    Separation(ConstellationFile),
    /// Single-axis against multi-axis symbol spacing at equal per-bit budget.
    Budget {
        #[arg(long, value_delimiter = ',', required = true)]
        orders: Vec<u64>,
        #[arg(long, default_value_t = 2)]
        axes: u32,
    },
}

#[derive(Args, Debug)]
struct ConstellationFile {
    /// A scenario file, or a bare symbol block (one symbol per line).
    file: PathBuf,
    #[arg(long)]
    scheme: Option<String>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter { .. }
        | Error::InvalidGeometry(_)
        | Error::InvalidConstellation(_)
        | Error::Io(_) => 2,
        Error::Quadrature { .. } | Error::ImpossibleObservation => 3,
        Error::Infeasible(_)
        | Error::SupportTooLarge { .. }
        | Error::StaticChannel
        | Error::NotChannelFree(_) => 4,
    }
}

/// Entry point of the binary.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("molcomm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Cir(args) => cmd_cir(&args, out),
        Command::Regions(args) => cmd_regions(&args, out),
        Command::Ber(args) => cmd_ber(&args),
        Command::Constellation { action } => cmd_constellation(&action, out),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cli_quantity(flag: &str, raw: &str, dim: Dimension) -> Result<f64> {
    parse_quantity(raw, Some(dim), 0)
        .map_err(|_| Error::config(None, format!("--{flag}: `{raw}` is not a valid quantity")))
}

fn cli_list(flag: &str, raw: &str, dim: Dimension) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| cli_quantity(flag, s, dim))
        .collect()
}

fn cmd_cir(args: &CirArgs, out: &mut dyn Write) -> Result<()> {
    let (mut params, mut receiver) = match &args.scenario {
        Some(path) => {
            let sc = Scenario::load(path)?;
            (sc.params, sc.receiver)
        }
        None => (ChannelParams::table2(), Receiver::Passive),
    };
    if let Some(r) = args.receiver {
        receiver = r.into();
    }
    let overrides: [(&str, &Option<String>, &mut f64, Dimension); 6] = [
        (
            "d-inf",
            &args.d_inf,
            &mut params.d_inf,
            Dimension::Diffusion,
        ),
        ("d-tr", &args.d_tr, &mut params.d_tr, Dimension::Diffusion),
        ("r-rx", &args.r_rx, &mut params.r_rx, Dimension::Length),
        ("r0", &args.r0, &mut params.r0, Dimension::Length),
        ("tau-s", &args.tau_s, &mut params.tau_s, Dimension::Time),
        ("tb", &args.tb, &mut params.t_b, Dimension::Time),
    ];
    for (flag, raw, slot, dim) in overrides {
        if let Some(raw) = raw {
            *slot = cli_quantity(flag, raw, dim)?;
        }
    }
    params.validate()?;
    let mut text = String::new();
    if let Some(times) = &args.t {
        text.push_str("t_seconds,mean_h\n");
        for t in cli_list("t", times, Dimension::Time)? {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::param(
                    "t",
                    format!("must be finite and >= 0, got {t}"),
                ));
            }
            let h = match receiver {
                Receiver::Passive => mean_passive_cir(t, &params),
                Receiver::Absorbing => mean_distance_absorbing_cir(t, &params)?,
            };
            text.push_str(&format!("{},{}\n", fmt_num(t), fmt_num(h)));
        }
    } else {
        text.push_str("r_m,h\n");
        let rs = match &args.r {
            Some(raw) => cli_list("r", raw, Dimension::Length)?,
            None => vec![params.r0],
        };
        for r in rs {
            let h = receiver.hit_probability(r, &params)?;
            text.push_str(&format!("{},{}\n", fmt_num(r), fmt_num(h)));
        }
    }
    emit(&text, args.out.as_deref(), out)
}

fn cmd_regions(args: &RegionsArgs, out: &mut dyn Write) -> Result<()> {
    let sc = Scenario::load(&args.scenario)?;
    let name = args
        .scheme
        .clone()
        .or_else(|| sc.regions.scheme.clone())
        .or_else(|| sc.schemes.first().map(|s| s.name.clone()))
        .ok_or_else(|| Error::config(None, "the scenario defines no scheme"))?;
    let scheme = sc.scheme(&name)?;
    let cst = scheme.constellation(None)?;
    if !(2..=3).contains(&cst.k()) {
        return Err(Error::Infeasible(format!(
            "decision regions can be rasterized for 2 or 3 molecule types, scheme `{name}` has {}",
            cst.k()
        )));
    }
    let lambda = match sc.lambdas.as_slice() {
        [l] => *l,
        _ => return Err(Error::config(None, "regions need exactly one lambda")),
    };
    let spec = DecoderSpec::new(scheme.decoder, sc.region_knowledge(scheme.decoder)?)?;
    let decoder = spec.bind(&cst, lambda)?;
    let grid_max = args.grid_max.unwrap_or(sc.regions.grid_max);
    let raster = raster_regions(&decoder, cst.k(), grid_max)?;
    emit(&raster.to_csv(), args.out.as_deref(), out)
}

/// Seed precedence: command line, scenario, `MOLCOMM_SEED`, then
/// [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, scenario: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(scenario) {
        return Ok(s);
    }
    match std::env::var("MOLCOMM_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::config(
                None,
                format!("MOLCOMM_SEED=`{v}` is not a 64-bit unsigned integer"),
            )
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn cmd_ber(args: &BerArgs) -> Result<()> {
    let mut sc = Scenario::load(&args.scenario)?;
    if let Some(m) = &args.mode {
        sc.run.mode = m.parse()?;
    }
    if let Some(m) = &args.method {
        sc.run.method = m.parse()?;
    }
    if let Some(t) = args.trials {
        sc.run.trials = t;
    }
    sc.run.seed = Some(resolve_seed(args.seed, sc.run.seed)?);
    if sc.run.trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    if sc.schemes.is_empty() {
        return Err(Error::config(None, "the scenario defines no scheme"));
    }
    let stem = args
        .scenario
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    let csv = with_threads(args.threads, || ber_table(&sc))??;
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join(format!("{stem}.csv")), csv)?;
    let meta = format!(
        "# molcomm {} (resolved configuration; rerun with `molcomm ber` on this file)\n{}",
        env!("CARGO_PKG_VERSION"),
        sc.to_text()
    );
    fs::write(args.out_dir.join(format!("{stem}.meta.scenario")), meta)?;
    Ok(())
}

/// Runs the experiment a resolved scenario describes and returns its CSV.
pub fn ber_table(sc: &Scenario) -> Result<String> {
    let seed = sc.run.seed.unwrap_or(DEFAULT_SEED);
    let trials = sc.run.trials;
    match sc.run.mode {
        Mode::Static => {
            let mut text =
                String::from("lambda,p_e,ci_low,ci_high,trials,decoder,constellation,method\n");
            for scheme in &sc.schemes {
                for &lambda in &sc.lambdas {
                    let st = sc.static_scenario(scheme, lambda)?;
                    let e = match sc.run.method {
                        Method::Exact => st.exact()?,
                        Method::MonteCarlo => monte_carlo_static(&st, trials, seed)?,
                    };
                    text.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        fmt_num(lambda),
                        fmt_num(e.value),
                        fmt_num(e.ci_low),
                        fmt_num(e.ci_high),
                        e.trials,
                        scheme.decoder,
                        scheme.name,
                        e.method
                    ));
                }
            }
            Ok(text)
        }
        Mode::Mobile => {
            require_monte_carlo(sc)?;
            let curves = sc
                .schemes
                .iter()
                .map(|s| monte_carlo_mobile(&sc.mobile_scenario(s)?, trials, seed))
                .collect::<Result<Vec<_>>>()?;
            report_averages(&curves);
            Ok(curves_to_csv(&curves))
        }
        Mode::BudgetSweep => {
            require_monte_carlo(sc)?;
            let first = sc
                .run
                .budgets
                .first()
                .copied()
                .ok_or_else(|| Error::config(None, "budget-sweep needs run.budgets"))?;
            let curves = sc
                .schemes
                .iter()
                .map(|s| {
                    let template = sc.mobile_with(s.constellation(Some(first))?, s.decoder)?;
                    ber_vs_budget(
                        &template,
                        |c| s.constellation(Some(c)),
                        &sc.run.budgets,
                        trials,
                        seed,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(curves_to_csv(&curves))
        }
        Mode::ImperfectCsi => {
            require_monte_carlo(sc)?;
            let wrong = sc
                .declared
                .ok_or_else(|| Error::config(None, "imperfect-csi needs a [declared] section"))?;
            let mut curves = Vec::new();
            for s in &sc.schemes {
                let (truthful, mismatched) =
                    imperfect_csi_sweep(&sc.mobile_scenario(s)?, &wrong, trials, seed)?;
                eprintln!(
                    "{}: time-averaged error {} with true parameters, {} with declared ones",
                    s.name,
                    fmt_num(truthful.time_average().value),
                    fmt_num(mismatched.time_average().value)
                );
                curves.push(truthful);
                curves.push(mismatched);
            }
            Ok(curves_to_csv(&curves))
        }
    }
}

fn require_monte_carlo(sc: &Scenario) -> Result<()> {
    if sc.run.method == Method::Exact {
        return Err(Error::Infeasible(format!(
            "mode {} is evaluated by Monte Carlo only; set method = monte-carlo",
            sc.run.mode.name()
        )));
    }
    Ok(())
}

fn report_averages(curves: &[Curve]) {
    for c in curves {
        let avg = c.time_average();
        eprintln!(
            "{} ({}): time-averaged error {} [{}, {}]",
            c.constellation,
            c.decoder,
            fmt_num(avg.value),
            fmt_num(avg.ci_low),
            fmt_num(avg.ci_high)
        );
    }
    if let Some((first, rest)) = curves.split_first() {
        for c in rest {
            eprintln!(
                "gain of {} over {}: {:.2}%",
                first.constellation,
                c.constellation,
                100.0 * relative_gain(first, c)
            );
        }
    }
}

fn load_constellation(file: &ConstellationFile) -> Result<Constellation> {
    let text = fs::read_to_string(&file.file)?;
    let label = file
        .file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("constellation");
    if !text.lines().any(|l| l.trim_start().starts_with('[')) {
        return Constellation::parse_block(label, &text, 1);
    }
    let sc = Scenario::parse(&text)?;
    let scheme = match &file.scheme {
        Some(name) => sc.scheme(name)?,
        None => sc
            .schemes
            .first()
            .ok_or_else(|| Error::config(None, "the scenario defines no scheme"))?,
    };
    scheme.constellation(None)
}

fn rational_times_c(r: Ratio<u64>) -> String {
    match (*r.numer(), *r.denom()) {
        (1, 1) => "c".into(),
        (n, 1) => format!("{n}c"),
        (n, d) => format!("{n}/{d}c"),
    }
}

fn cmd_constellation(action: &ConstellationAction, out: &mut dyn Write) -> Result<()> {
    let text = match action {
        ConstellationAction::Check(file) => {
            let cst = load_constellation(file)?;
            let report = check_channel_free(&cst);
            match report.witness {
                None => "channel-free: true\n".to_string(),
                Some(w) => format!("channel-free: false\nwitness: {w}\n"),
            }
        }
        ConstellationAction::Separation(file) => {
            let cst = load_constellation(file)?;
            format!(
                "min-separation: {}\n",
                fmt_num(min_symbol_separation(&cst)?)
            )
        }
        ConstellationAction::Budget { orders, axes } => {
            let mut text = String::from("order,bits_per_symbol,multi_axis_spacing,single_axis_spacing,per_symbol_budget,per_bit_budget\n");
            for &order in orders {
                let cmp = normalize_budget(*axes, order, 1.0)?;
                text.push_str(&format!(
                    "{},{},{},{},{},c\n",
                    cmp.order,
                    cmp.multi_axis.bits_per_symbol,
                    rational_times_c(cmp.multi_axis.spacing_coefficient),
                    rational_times_c(cmp.single_axis.spacing_coefficient),
                    rational_times_c(cmp.per_symbol_coefficient)
                ));
            }
            text
        }
    };
    emit(&text, None, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<String> {
        let cli = Cli::try_parse_from(std::iter::once("molcomm").chain(args.iter().copied()))
            .map_err(|e| Error::config(None, e.to_string()))?;
        let mut buf = Vec::new();
        execute(cli, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn cir_defaults_and_absorbing() {
        let out = run_args(&["cir"]).unwrap();
        let h: f64 = out
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!((h - 0.0281).abs() < 5e-4, "{out}");
        let out = run_args(&["cir", "--receiver", "absorbing", "--tb", "1e-5"]).unwrap();
        let h: f64 = out
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!((h - 0.0369).abs() < 5e-4, "{out}");
        assert_eq!(run_args(&["cir", "--r", ""]).unwrap(), "r_m,h\n");
    }

    #[test]
    fn table_one_rationals() {
        let out = run_args(&["constellation", "budget", "--orders", "4,16,64"]).unwrap();
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(
            rows,
            [
                "4,2,2c,4/3c,2c,c",
                "16,4,4/3c,8/15c,4c,c",
                "64,6,6/7c,4/21c,6c,c"
            ]
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config(Some(1), "x")), 2);
        assert_eq!(exit_code(&Error::ImpossibleObservation), 3);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 4);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some(4)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some(4)).unwrap(), 4);
    }
}
