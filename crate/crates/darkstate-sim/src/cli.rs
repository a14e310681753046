//! Command-line front end: seven subcommands over the library pipeline.
//!
//! Every subcommand reads the same configuration surface (a TOML file, a
//! named preset, dotted `--set` overrides, applied in that order), writes
//! its results into `--out`, and prints a one-line summary to stdout.
//! Warnings (censored cells, truncation leakage, boundary minima) go to
//! stderr. Exit status is nonzero only for hard failures: a single
//! trajectory that diverges, a sweep with no usable cells, or bad input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::config::{parse_config_with, RunConfig};
use crate::error::{Error, Result};
use crate::hilbert::pure_density;
use crate::integrate::{evolve_partial, Divergence, TrajectoryRecord};
use crate::linalg::{max_abs, CVec};
use crate::model::{
    apply_liouvillian, build_channels, build_hamiltonian, compress, dark_state,
    reduced_projection, LindbladChannel,
};
use crate::output::{
    state_labels, write_diagonal, write_gmin, write_heatmap, write_k0, write_oracle,
    write_trajectory, Formats, Written,
};
use crate::sweep::{diagonal_scan, gmin_vs_g, k0_scan, run_heatmap, steady_state_oracle};

#[derive(Parser)]
#[command(
    name = "darkstate-sim",
    version,
    about = "Dark-state lifetimes of two atoms in a lossy cavity under dephasing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and export every recorded sample.
    Evolve(CommonArgs),
    /// Map stabilization time and retention over a two-parameter grid.
    Heatmap(CommonArgs),
    /// Scan symmetric dephasing and locate the optimal rate.
    Diagonal(CommonArgs),
    /// Track the optimal dephasing rate as the coupling scale grows.
    Gmin(CommonArgs),
    /// Bisect the coupling ratio where the scan shape changes character.
    K0scan(CommonArgs),
    /// Evolve inside the three-state single-excitation manifold.
    Reduced(CommonArgs),
    /// Solve the steady state directly and report the residual.
    Oracle(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named preset to start from; shorthand for --set preset=NAME.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override one config key by dotted path, e.g. model.g2=45.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for result files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Comma-separated output formats: csv, json.
    #[arg(long, default_value = "csv,json")]
    format: String,
    /// Worker threads for sweeps; 0 keeps the default pool.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let (args, outcome) = match &cli.command {
        Command::Evolve(a) => (a, cmd_evolve(a)),
        Command::Heatmap(a) => (a, cmd_heatmap(a)),
        Command::Diagonal(a) => (a, cmd_diagonal(a)),
        Command::Gmin(a) => (a, cmd_gmin(a)),
        Command::K0scan(a) => (a, cmd_k0scan(a)),
        Command::Reduced(a) => (a, cmd_reduced(a)),
        Command::Oracle(a) => (a, cmd_oracle(a)),
    };
    let _ = args;
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    if args.config.is_none() && args.preset.is_none() && args.set.is_empty() {
        return Err(Error::Config(
            "no configuration given; pass --config <path>, --preset <name>, or --set key=value"
                .to_string(),
        ));
    }
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut sets = Vec::new();
    if let Some(name) = &args.preset {
        sets.push(format!("preset={name}"));
    }
    sets.extend(args.set.iter().cloned());
    parse_config_with(&text, &sets)
}

fn prepare(args: &CommonArgs) -> Result<(RunConfig, Formats)> {
    let formats = Formats::parse(&args.format)?;
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&args.out)?;
    Ok((cfg, formats))
}

fn files_list(written: &Written) -> String {
    written
        .files
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn warn_leakage(rec: &TrajectoryRecord) {
    let max = rec.leakage.iter().copied().fold(0.0_f64, f64::max);
    if max > 1e-6 {
        eprintln!("warning: photon truncation leakage reached {max:.3e}; raise n_max");
    }
}

fn finish(diverged: Option<Divergence>) -> Result<ExitCode> {
    match diverged {
        None => Ok(ExitCode::SUCCESS),
        Some(d) => {
            eprintln!(
                "warning: integration diverged at t={:.6} ({} deviation {:.3e}); trajectory truncated",
                d.t, d.what, d.deviation
            );
            Ok(ExitCode::FAILURE)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "-".to_string(),
    }
}

fn cmd_evolve(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let space = cfg.space()?;
    let h = build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating);
    let channels = build_channels(&space, &cfg.model, cfg.channels);
    let dark = dark_state(&space, &cfg.model, 0)?;
    let rho0 = cfg.initial_state()?.build(&space, &cfg.model)?;
    let (rec, diverged) = evolve_partial(&rho0, &h, &channels, &cfg.integrator, &dark)?;
    let labels = state_labels(&space);
    let written = write_trajectory(
        &args.out,
        "trajectory",
        formats,
        &cfg,
        "evolve",
        &labels,
        &rec,
    )?;
    warn_leakage(&rec);
    let w0 = rec.dark_weight.first().copied().unwrap_or(f64::NAN);
    let w1 = rec.dark_weight.last().copied().unwrap_or(f64::NAN);
    println!(
        "evolve[{}]: {} steps to t={:.6}, dark weight {:.6} -> {:.6}{} ({})",
        cfg.preset,
        rec.steps,
        rec.t_final(),
        w0,
        w1,
        if rec.stopped_early {
            ", stationary early"
        } else {
            ""
        },
        files_list(&written),
    );
    finish(diverged)
}

fn cmd_heatmap(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let block = cfg.heatmap.clone().ok_or_else(|| {
        Error::Config("missing [heatmap] block; pick a heatmap preset or define both axes".into())
    })?;
    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(args.threads);
    let map = run_heatmap(
        &space,
        &cfg.model,
        cfg.channels,
        [block.x, block.y],
        &initial,
        &cfg.integrator,
        &opts,
    )?;
    let written = write_heatmap(&args.out, "heatmap", formats, &cfg, "heatmap", &map)?;
    let censored = map.censored.iter().filter(|&&c| c).count();
    if censored > 0 {
        eprintln!(
            "warning: {censored} of {} cells censored (diverged or never stationary)",
            map.censored.len()
        );
    }
    println!(
        "heatmap[{}]: {}x{} {} vs {}, t_stab [{:.4}, {:.4}], p_ret [{:.4}, {:.4}], censored {} ({})",
        cfg.preset,
        map.axes[0].points,
        map.axes[1].points,
        map.axes[0].param.name(),
        map.axes[1].param.name(),
        map.t_stab_range.0,
        map.t_stab_range.1,
        map.p_ret_range.0,
        map.p_ret_range.1,
        censored,
        files_list(&written),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_diagonal(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let block = cfg.diagonal.ok_or_else(|| {
        Error::Config("missing [diagonal] block; pick a diagonal preset or define the range".into())
    })?;
    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(args.threads);
    let scan = diagonal_scan(
        &space,
        &cfg.model,
        cfg.channels,
        (block.min, block.max),
        block.points,
        &initial,
        &cfg.integrator,
        &opts,
    )?;
    let written = write_diagonal(&args.out, "diagonal", formats, &cfg, "diagonal", &scan)?;
    let censored = scan.censored.iter().filter(|&&c| c).count();
    if censored > 0 {
        eprintln!("warning: {censored} of {} points censored", scan.gamma.len());
    }
    if scan.boundary_minimum {
        eprintln!("warning: minimum sits on the scan boundary; widen the [diagonal] range");
    }
    println!(
        "diagonal[{}]: {} points, gamma_min={}, t_min={}, p_ret={} ({})",
        cfg.preset,
        scan.gamma.len(),
        fmt_opt(scan.gamma_min),
        fmt_opt(scan.t_min),
        fmt_opt(scan.p_ret_at_min),
        files_list(&written),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gmin(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let block = cfg.gmin.clone().ok_or_else(|| {
        Error::Config("missing [gmin] block; pick the gmin preset or define g_values".into())
    })?;
    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(args.threads);
    let series = gmin_vs_g(
        &space,
        &cfg.model,
        cfg.channels,
        &block.g_values,
        (block.gamma.min, block.gamma.max),
        block.gamma.points,
        &initial,
        &cfg.integrator,
        &opts,
    )?;
    let written = write_gmin(&args.out, "gmin", formats, &cfg, "gmin", &series)?;
    let boundary = series.iter().filter(|p| p.boundary_minimum).count();
    if boundary > 0 {
        eprintln!(
            "warning: {boundary} of {} couplings have a boundary minimum; widen [gmin.gamma]",
            series.len()
        );
    }
    let first = series.first().and_then(|p| p.gamma_min);
    let last = series.last().and_then(|p| p.gamma_min);
    println!(
        "gmin[{}]: {} couplings, gamma_min {} -> {} ({})",
        cfg.preset,
        series.len(),
        fmt_opt(first),
        fmt_opt(last),
        files_list(&written),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_k0scan(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let block = cfg.k0.clone().ok_or_else(|| {
        Error::Config("missing [k0] block; pick the k0 preset or define the bracket".into())
    })?;
    let space = cfg.space()?;
    let initial = cfg.initial_state()?;
    let opts = cfg.sweep_options(args.threads);
    let scan = k0_scan(
        &space,
        &cfg.model,
        cfg.channels,
        &block.to_spec(),
        &initial,
        &cfg.integrator,
        &opts,
    )?;
    let written = write_k0(&args.out, "k0scan", formats, &cfg, "k0scan", &scan)?;
    let head = scan
        .g1
        .first()
        .zip(scan.k0.first())
        .map(|(g, k)| format!("k0(g1={g:.1})={k:.4}"))
        .unwrap_or_else(|| "empty".to_string());
    println!(
        "k0scan[{}]: {} over {} couplings, {} evaluations ({})",
        cfg.preset,
        head,
        scan.g1.len(),
        scan.evaluations.len(),
        files_list(&written),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_reduced(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let space = cfg.space()?;
    let (indices, _) = reduced_projection(&space);
    let h = compress(
        &space,
        &indices,
        &build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating),
    );
    let channels: Vec<LindbladChannel> = build_channels(&space, &cfg.model, cfg.channels)
        .into_iter()
        .filter_map(|ch| {
            let op = compress(&space, &indices, &ch.op);
            (max_abs(&op) > 0.0).then_some(LindbladChannel {
                kind: ch.kind,
                rate: ch.rate,
                op,
            })
        })
        .collect();
    let psi_full = cfg.initial_state()?.build_ket(&space, &cfg.model)?;
    let mut psi: CVec = CVec::zeros(indices.len());
    for (r, &i) in indices.iter().enumerate() {
        psi[r] = psi_full[i];
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (1.0 - norm).abs() > 1e-9 {
        return Err(Error::Config(
            "initial state has weight outside the single-excitation manifold".into(),
        ));
    }
    psi.mapv_inplace(|z| z / Complex64::new(norm, 0.0));
    let rho0 = pure_density(&psi);
    let dark_full = dark_state(&space, &cfg.model, 0)?;
    let mut dark: CVec = CVec::zeros(indices.len());
    for (r, &i) in indices.iter().enumerate() {
        dark[r] = dark_full[i];
    }
    let (rec, diverged) = evolve_partial(&rho0, &h, &channels, &cfg.integrator, &dark)?;
    let full_labels = state_labels(&space);
    let labels: Vec<String> = indices.iter().map(|&i| full_labels[i].clone()).collect();
    let written = write_trajectory(&args.out, "reduced", formats, &cfg, "reduced", &labels, &rec)?;
    let f0 = rec.dark_weight.first().copied().unwrap_or(f64::NAN);
    let f1 = rec.dark_weight.last().copied().unwrap_or(f64::NAN);
    println!(
        "reduced[{}]: {} steps to t={:.6}, fidelity {:.6} -> {:.6} ({})",
        cfg.preset,
        rec.steps,
        rec.t_final(),
        f0,
        f1,
        files_list(&written),
    );
    finish(diverged)
}

fn cmd_oracle(args: &CommonArgs) -> Result<ExitCode> {
    let (cfg, formats) = prepare(args)?;
    let space = cfg.space()?;
    let h = build_hamiltonian(&space, &cfg.model, cfg.sweep.rotating);
    let channels = build_channels(&space, &cfg.model, cfg.channels);
    let rho = steady_state_oracle(&h, &channels)?;
    let residual = max_abs(&apply_liouvillian(&h, &channels, &rho));
    let labels = state_labels(&space);
    let written = write_oracle(
        &args.out,
        "steady_state",
        formats,
        &cfg,
        "oracle",
        &labels,
        &rho,
        residual,
    )?;
    println!(
        "oracle[{}]: dim {}, residual {:.3e} ({})",
        cfg.preset,
        space.dim(),
        residual,
        files_list(&written),
    );
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommands_are_the_published_names() {
        use clap::CommandFactory;
        let cmd = Cli::command();
        let names: Vec<_> = cmd.get_subcommands().map(|c| c.get_name()).collect();
        assert_eq!(
            names,
            [
                "evolve", "heatmap", "diagonal", "gmin", "k0scan", "reduced", "oracle"
            ]
        );
    }

    #[test]
    fn missing_configuration_is_a_clear_error() {
        let args = CommonArgs {
            config: None,
            preset: None,
            set: vec![],
            out: PathBuf::from("out"),
            format: "csv".into(),
            threads: 0,
        };
        let err = load_config(&args).unwrap_err();
        assert!(err.to_string().contains("--preset"));
    }
}
