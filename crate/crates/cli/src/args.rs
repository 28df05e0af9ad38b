use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qduffing_core::plyap::{EpsilonPolicy, NoisePairing};
use qduffing_core::qsd::BasisPolicy;

use crate::commands::{self, Outcome};
use crate::config::{Command, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "qduffing", version, about = "Quantum state diffusion for the dissipative Duffing oscillator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Stroboscopic map of one trajectory from the coherent vacuum.
    Strobe(RunArgs),
    /// Pseudo-Lyapunov separation for each beta.
    Plyap(RunArgs),
    /// Compare a trajectory ensemble with the master equation.
    MasterCheck(RunArgs),
    /// Classical Poincare section and Lyapunov exponent.
    Classical(RunArgs),
    /// Re-run from a manifest and verify every output hash.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EpsilonArg {
    Fixed,
    Planck,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    Independent,
    Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BasisArg {
    Fixed,
    Adaptive,
}

/// Flags override the config file, which overrides the command defaults.
#[derive(Clone, Debug, Default, Args)]
pub struct RunArgs {
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated for plyap sweeps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub beta: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    /// Fock basis size (the cap under the adaptive policy).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub realizations: Option<usize>,
    #[arg(long, value_enum)]
    pub epsilon_policy: Option<EpsilonArg>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long, value_enum)]
    pub basis: Option<BasisArg>,
    /// 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub leak_threshold: Option<f64>,
    #[arg(long)]
    pub record_stride: Option<usize>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_large_dim: bool,
    #[arg(long, hide = true)]
    pub me_gamma: Option<f64>,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    /// manifest.json or the directory holding it.
    pub manifest: PathBuf,
    /// Defaults to `replay/` next to the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl RunArgs {
    pub fn resolve(&self, command: Command) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(command, path)?,
            None => RunConfig::defaults(command),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(beta, gamma, g, omega, dim, dt, tau_max, seed, pairs, realizations, workers, leak_threshold, record_stride, x0, p0, out);
        if let Some(e) = self.epsilon_policy {
            c.epsilon_policy = match e {
                EpsilonArg::Fixed => EpsilonPolicy::Fixed,
                EpsilonArg::Planck => EpsilonPolicy::Planck,
            };
        }
        if let Some(n) = self.noise {
            c.noise = match n {
                NoiseArg::Independent => NoisePairing::Independent,
                NoiseArg::Common => NoisePairing::Common,
            };
        }
        if let Some(b) = self.basis {
            c.basis = match b {
                BasisArg::Fixed => BasisPolicy::Fixed,
                BasisArg::Adaptive => BasisPolicy::Adaptive,
            };
        }
        if self.allow_large_dim {
            c.allow_large_dim = true;
        }
        if self.me_gamma.is_some() {
            c.me_gamma = self.me_gamma;
        }
        Ok(c)
    }
}

fn describe(outcome: &Outcome) -> String {
    match outcome {
        Outcome::Strobe(s) => format!(
            "strobe: {} periods, basis {} ({} reruns)",
            s.summary.periods, s.summary.dim, s.summary.escalations
        ),
        Outcome::Plyap(list) => list
            .iter()
            .map(|o| {
                let s = &o.summary;
                let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                format!(
                    "beta {}: tau0 {} delta_asymp {:.4} tau_asymp {} growth {}",
                    s.beta,
                    show(s.tau0),
                    s.delta_asymp,
                    show(s.tau_asymp),
                    show(s.growth_rate)
                )
            })
            .collect::<Vec<_>>()
            .join("\n"),
        Outcome::MasterCheck(r) => {
            let parts: Vec<String> = r
                .observables
                .iter()
                .map(|a| format!("{} {:.1}%", a.observable, 100.0 * a.fraction))
                .collect();
            format!("{} ({})", if r.pass { "PASS" } else { "FAIL" }, parts.join(", "))
        }
        Outcome::Classical(c) => format!(
            "classical: {} section points, lyapunov {:.4}",
            c.summary.poincare_points, c.summary.lyapunov
        ),
    }
}

/// Runs a parsed command line and returns the text for stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    let (command, args) = match cli.command {
        CliCommand::Strobe(a) => (Command::Strobe, a),
        CliCommand::Plyap(a) => (Command::Plyap, a),
        CliCommand::MasterCheck(a) => (Command::MasterCheck, a),
        CliCommand::Classical(a) => (Command::Classical, a),
        CliCommand::Replay(r) => {
            let report = commands::replay(&r.manifest, r.out, r.workers)?;
            return Ok(format!(
                "replay of {}: {} files identical, written to {}",
                report.manifest_path.display(),
                report.files.len(),
                report.result.manifest.config.out.display()
            ));
        }
    };
    let config = args.resolve(command)?;
    let result = commands::execute_to_disk(&config)?;
    Ok(format!("{}\noutputs in {}", describe(&result.outcome), config.out.display()))
}
