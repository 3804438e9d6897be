use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use targetwave::analysis::{
    analyze_state, ansatz_residual, oracle_row, scaling_fit, scaling_table, sweep, sweep_table, RunAnalysis,
    ScalingFit,
};
use targetwave::config::Config;
use targetwave::diagnostics::{
    decay_fit, measure_frequency, polar_decompose, usable_radius, DecayFit, DecayOptions, PolarMethod,
};
use targetwave::hierarchy::hierarchy_verify;
use targetwave::integrator::{resolve, run_with, RunOutput};
use targetwave::io::{
    checkpoint_bytes, pgm_bytes, read_checkpoint, total_phase, CsvTable, OutputDir, PgmFormat, RunManifest,
};
use targetwave::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "targetwave", version, about = "Target patterns in the nonlocal eikonal equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write probes, snapshots and the final checkpoint.
    Simulate(Common),
    /// Oracle predictions (and optionally simulations) over the configured eps list.
    Sweep(Common),
    /// Measure frequency, wavenumber, anisotropy and decay of a finished run.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Output directory of a previous `simulate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Frequency predictions of the radial oracles at the configured eps.
    Oracle(Common),
    /// Spectral vs closed-form hierarchy terms and the reduction identity.
    HierarchyVerify {
        #[command(flatten)]
        common: Common,
        /// Points per axis of the test grid.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Number of seeded random fields.
        #[arg(long, default_value_t = 4)]
        random: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Run even when eps * M > 0.
    #[arg(long)]
    allow_positive_mass: bool,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        Ok(cfg)
    }

    fn out_dir(&self, command: &str) -> Result<OutputDir> {
        let root = self.out.clone().unwrap_or_else(|| PathBuf::from(format!("{command}-out")));
        OutputDir::create(&root)
    }
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("WARN: {}", msg.as_ref());
}

fn check_pacemaker(cfg: &Config, allow: bool) -> Result<()> {
    let forcing = resolve(&cfg.sim)?.forcing;
    for w in cfg.check_pacemaker(forcing.mass()?, allow)? {
        warn(w);
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn probe_table(out: &RunOutput) -> Result<CsvTable> {
    let mut header = vec!["t".to_string()];
    header.extend((0..out.probes.len()).map(|k| format!("phi_probe{k}")));
    let mut t = CsvTable::new(&header);
    for (n, time) in out.times.iter().enumerate() {
        let mut row = vec![*time];
        row.extend(out.probes.iter().map(|s| s[n]));
        t.push_f64(&row)?;
    }
    Ok(t)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    model: &'a str,
    steps: usize,
    dt: f64,
    t_end: f64,
    probes: &'a [(usize, usize)],
    modulus_deviation: Option<f64>,
}

fn write_run(dir: &mut OutputDir, prefix: &str, cfg: &Config, out: &RunOutput) -> Result<()> {
    dir.write_csv(&format!("{prefix}probes.csv"), &probe_table(out)?)?;
    let stride = cfg.sim.snapshot_stride;
    for (k, snap) in out.snapshots.iter().enumerate() {
        let step = k * stride;
        dir.write(
            &format!("{prefix}snapshots/phase_{step:07}.pgm"),
            &pgm_bytes(&total_phase(snap), PgmFormat::Binary),
        )?;
    }
    dir.write(&format!("{prefix}final.chk"), &checkpoint_bytes(&out.final_state))?;
    dir.write(&format!("{prefix}final.pgm"), &pgm_bytes(&total_phase(&out.final_state), PgmFormat::Binary))?;
    let summary = RunSummary {
        model: cfg.sim.model.as_str(),
        steps: out.steps,
        dt: out.dt,
        t_end: out.final_state.t,
        probes: &out.probe_points,
        modulus_deviation: out.modulus_deviation,
    };
    dir.write(&format!("{prefix}run.json"), &to_json(&summary)?)?;
    Ok(())
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    check_pacemaker(&cfg, common.allow_positive_mass)?;
    let res = resolve(&cfg.sim)?;
    let mut dir = common.out_dir("simulate")?;
    let text = cfg.to_canonical_string();
    dir.write("config.txt", text.as_bytes())?;
    let out = run_with(&cfg.sim, &res)?;
    write_run(&mut dir, "", &cfg, &out)?;
    dir.finish("simulate", &text)?;
    Ok(())
}

fn sweep_command(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    for &eps in &cfg.analysis.epsilons {
        let mut c = cfg.clone();
        c.sim.eps = eps;
        check_pacemaker(&c, common.allow_positive_mass)?;
    }
    let mut dir = common.out_dir("sweep")?;
    let text = cfg.to_canonical_string();
    dir.write("config.txt", text.as_bytes())?;
    let simulate = cfg.analysis.sweep_simulate;
    let members = sweep(&cfg.sim, &cfg.analysis, simulate, common.workers)?;
    let rows: Vec<_> = members.iter().map(|m| m.0.clone()).collect();
    dir.write_csv("sweep.csv", &sweep_table(&rows)?)?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mut fits: Vec<(&str, ScalingFit)> = Vec::new();
    let schrod: Vec<f64> = rows.iter().map(|r| r.omega_schrod).collect();
    match scaling_fit(&eps, &schrod) {
        Ok(f) => fits.push(("omega_schrod", f)),
        Err(e) => warn(format!("no scaling fit for omega_schrod: {e}")),
    }
    if simulate {
        let measured: Vec<f64> = rows.iter().map(|r| r.omega_measured).collect();
        match scaling_fit(&eps, &measured) {
            Ok(f) => fits.push(("omega_measured", f)),
            Err(e) => warn(format!("no scaling fit for omega_measured: {e}")),
        }
        for (k, (_, out)) in members.iter().enumerate() {
            if let Some(out) = out {
                let mut c = cfg.clone();
                c.sim.eps = eps[k];
                write_run(&mut dir, &format!("eps-{k}/"), &c, out)?;
            }
        }
    }
    if let Some((first, rest)) = fits.split_first() {
        let mut table = scaling_table(&first.1, first.0)?;
        for (name, f) in rest {
            for row in scaling_table(f, name)?.rows {
                table.push(row)?;
            }
        }
        dir.write_csv("scaling.csv", &table)?;
        for (name, f) in &fits {
            println!("slope of ln {name} vs 1/eps: {:?}", f.slope);
        }
    }
    dir.finish("sweep", &text)?;
    Ok(())
}

#[derive(Serialize)]
struct AnalysisSummary<'a> {
    input: String,
    analysis: &'a RunAnalysis,
    decay: Option<DecayFit>,
}

fn decay_of(state: &targetwave::integrator::SimState, a: &RunAnalysis, cfg: &Config) -> Result<DecayFit> {
    let k = a
        .wavenumber
        .as_ref()
        .map(|w| w.k)
        .ok_or_else(|| Error::Domain("no far-field wavenumber was measured".to_string()))?;
    let lambda = if a.frequency.omega > 0.0 { a.frequency.omega.sqrt() } else { k };
    let phase = total_phase(state);
    let profile = polar_decompose(&phase, (0.0, 0.0), cfg.analysis.n_max, cfg.analysis.nbins, PolarMethod::Circles)?;
    let (r, amp) = ansatz_residual(&profile, lambda)?;
    let opts = DecayOptions {
        gamma: cfg.analysis.decay_gamma,
        ..DecayOptions::default()
    };
    decay_fit(&r, &amp, (2.0 / lambda, usable_radius(phase.grid())), &opts)
}

fn analyze_command(common: &Common, input: &Path) -> Result<()> {
    let manifest = RunManifest::read(input)?;
    manifest.verify(input)?;
    let cfg = match &common.config {
        Some(_) => common.load()?,
        None => Config::parse(&std::fs::read_to_string(input.join("config.txt"))?)?,
    };
    let probes = CsvTable::read(&input.join("probes.csv"))?;
    let t = probes.column_f64("t")?;
    let phi = probes.column_f64("phi_probe0")?;
    let state = read_checkpoint(&input.join("final.chk"))?;
    let frequency = measure_frequency(&t, &phi, cfg.analysis.window_fraction)?;
    if frequency.transient {
        warn("frequency fit window still looks transient");
    }
    let a = analyze_state(&state, frequency, &cfg.analysis)?;
    if a.wavenumber.is_none() {
        warn("far-field wavenumber not measured (omega <= 0 or window beyond the usable radius)");
    }
    let decay = match decay_of(&state, &a, &cfg) {
        Ok(d) => Some(d),
        Err(e) => {
            warn(format!("decay fit skipped: {e}"));
            None
        }
    };
    let mut dir = common.out_dir("analyze")?;
    let text = cfg.to_canonical_string();
    dir.write_csv("profile.csv", &a.profile_table()?)?;
    let summary = AnalysisSummary {
        input: input.display().to_string(),
        analysis: &a,
        decay,
    };
    dir.write("analysis.json", &to_json(&summary)?)?;
    println!("omega_measured {:?}", a.frequency.omega);
    if let Some(w) = &a.wavenumber {
        println!("k_inf {:?}", w.k);
    }
    dir.finish("analyze", &text)?;
    Ok(())
}

fn oracle_command(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    check_pacemaker(&cfg, common.allow_positive_mass)?;
    let res = resolve(&cfg.sim)?;
    let row = oracle_row(cfg.sim.eps, &res.forcing, &cfg.analysis)?;
    let table = sweep_table(std::slice::from_ref(&row))?;
    let mut dir = common.out_dir("oracle")?;
    let text = cfg.to_canonical_string();
    dir.write_csv("oracle.csv", &table)?;
    print!("{}", table.to_text());
    dir.finish("oracle", &text)?;
    Ok(())
}

fn hierarchy_command(common: &Common, n: usize, random: usize) -> Result<()> {
    let seed = common.seed.unwrap_or(0);
    let report = hierarchy_verify(n, seed, random)?;
    let mut rows = CsvTable::new(&["k", "field", "gamma_err", "sigma_err", "aliasing"]);
    for r in &report.rows {
        rows.push(vec![
            r.k.to_string(),
            r.field.clone(),
            format!("{:?}", r.gamma_err),
            format!("{:?}", r.sigma_err),
            format!("{:?}", r.aliasing),
        ])?;
    }
    let mut reduction = CsvTable::new(&["field", "lhs", "rhs", "relerr", "aliasing"]);
    let fields: Vec<&str> = report.rows.iter().filter(|r| r.k == 1).map(|r| r.field.as_str()).collect();
    for (name, c) in fields.iter().zip(&report.reduction) {
        reduction.push(vec![
            name.to_string(),
            format!("{:?}", c.lhs),
            format!("{:?}", c.rhs),
            format!("{:?}", c.relerr),
            format!("{:?}", c.aliasing),
        ])?;
    }
    let mut dispersion = CsvTable::new(&["k2", "omega"]);
    for (k2, w) in &report.dispersion {
        dispersion.push_f64(&[*k2, *w])?;
    }
    let mut dir = common.out_dir("hierarchy")?;
    let text = format!("n = {n}\nseed = {seed}\nrandom = {random}\n");
    dir.write_csv("hierarchy.csv", &rows)?;
    dir.write_csv("reduction.csv", &reduction)?;
    dir.write_csv("dispersion.csv", &dispersion)?;
    println!("max relative error {:?}", report.max_error());
    for r in report.rows.iter().filter(|r| r.aliasing > targetwave::hierarchy::ALIASING_THRESHOLD) {
        warn(format!("field {} is not band-limited (aliasing {:.2e})", r.field, r.aliasing));
    }
    dir.finish("hierarchy-verify", &text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Sweep(c) => sweep_command(c),
        Command::Analyze { common, input } => analyze_command(common, input),
        Command::Oracle(c) => oracle_command(c),
        Command::HierarchyVerify { common, n, random } => hierarchy_command(common, *n, *random),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
