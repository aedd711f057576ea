use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(name = "cmnoise", version, about = "Colored multiplicative noise: scales, equilibria, Monte Carlo, PDE and moments")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "cmnoise-out")]
    pub out: PathBuf,

    /// Worker threads for Monte Carlo ensembles; 0 lets rayon decide.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Print the JSON summary instead of the text table.
    #[arg(long, global = true)]
    pub json: bool,

    /// `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Derived scales; `--sweep gamma_tau=a:b:n` tabulates R against γτ.
    Scales {
        #[arg(long, value_name = "gamma_tau=A:B:N")]
        sweep: Option<String>,
    },
    /// Monte Carlo ensemble: histogram, moments, running ⟨x²⟩.
    Simulate,
    /// Third-order and Fick equilibrium densities.
    Peq,
    /// Time-dependent master equation from a Gaussian start.
    Evolve,
    /// Moment hierarchy: equilibrium table and evolution from a point start.
    Moments,
    /// Monte Carlo against every equilibrium, with a PASS/FAIL verdict.
    Compare,
    /// Coefficient tensors of the N-dimensional model.
    Ndcoeffs,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scales { .. } => "scales",
            Command::Simulate => "simulate",
            Command::Peq => "peq",
            Command::Evolve => "evolve",
            Command::Moments => "moments",
            Command::Compare => "compare",
            Command::Ndcoeffs => "ndcoeffs",
        }
    }
}

/// Parsed `--sweep` argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (key, range) = s.split_once('=').ok_or_else(|| format!("expected gamma_tau=A:B:N, got `{s}`"))?;
        if key.trim() != "gamma_tau" {
            return Err(format!("only gamma_tau can be swept, got `{key}`"));
        }
        let parts: Vec<&str> = range.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected A:B:N, got `{range}`"));
        };
        let lo: f64 = a.trim().parse().map_err(|e| format!("sweep start `{a}`: {e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("sweep end `{b}`: {e}"))?;
        let n: usize = n.trim().parse().map_err(|e| format!("sweep count `{n}`: {e}"))?;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
            return Err(format!("sweep needs 0 < A < B and N >= 2, got {lo}:{hi}:{n}"));
        }
        Ok(Self { lo, hi, n })
    }

    /// Log-spaced points from `lo` to `hi` inclusive.
    pub fn points(&self) -> Vec<f64> {
        let (l0, l1) = (self.lo.ln(), self.hi.ln());
        (0..self.n).map(|i| if i + 1 == self.n { self.hi } else { (l0 + (l1 - l0) * i as f64 / (self.n - 1) as f64).exp() }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s = Sweep::parse("gamma_tau=0.01:10:4").unwrap();
        let p = s.points();
        assert_eq!(p.len(), 4);
        assert!((p[0] - 0.01).abs() < 1e-15 && p[3] == 10.0);
        assert!((p[1] - 0.1).abs() < 1e-12);
        assert!(Sweep::parse("delta=0.1:1:3").is_err());
        assert!(Sweep::parse("gamma_tau=1:0.5:3").is_err());
        assert!(Sweep::parse("gamma_tau=0.1:1").is_err());
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["cmnoise", "compare", "--seed", "7", "--threads", "2", "--json"]).unwrap();
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.threads, 2);
        assert!(cli.json);
        assert_eq!(cli.command.name(), "compare");
    }
}
