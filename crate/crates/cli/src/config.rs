use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use kyorbit::nonlinearity::{Source, ValidationGrid};
use kyorbit::orbit::OrbitOptions;
use kyorbit::periodmap::PeriodMapOptions;
use kyorbit::{Bindings, Builtin, Feedback, Nonlinearity};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub expr: Option<String>,
    pub builtin: Option<String>,
    pub feedback: Option<Feedback>,
    pub grid_extent: Option<f64>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub a_max: Option<f64>,
    pub m: Option<usize>,
    pub n_max: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub orbit_rtol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Nonlinearity as an expression in `xi`, `eta` and parameters.
    #[arg(long, conflicts_with = "builtin")]
    pub expr: Option<String>,
    /// Builtin family: linear, cubic_hard, tanh_soft or sinh.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Parameter binding `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub params: Vec<(String, f64)>,
    /// Declared feedback sign, checked against the inferred one.
    #[arg(long)]
    pub feedback: Option<Feedback>,
    /// Half-width of the symmetry validation grid.
    #[arg(long)]
    pub grid_extent: Option<f64>,
    /// Points per axis of the symmetry validation grid.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Symmetry and monotonicity tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Relative integration tolerance for period-map sampling.
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Output formats to write (default: csv, json).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Largest sampled amplitude.
    #[arg(long)]
    pub amax: Option<f64>,
    /// Number of positive grid amplitudes.
    #[arg(long)]
    pub m: Option<usize>,
    /// Largest branch index.
    #[arg(long)]
    pub nmax: Option<u32>,
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("`{s}` is not of the form NAME=VALUE"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SourceSpec,
    pub params: Bindings,
    pub feedback: Option<Feedback>,
    pub grid_extent: Option<f64>,
    pub grid_n: Option<usize>,
    pub tol: Option<f64>,
    pub a_max: f64,
    pub m: usize,
    pub n_max: u32,
    pub rtol: f64,
    pub atol: f64,
    pub orbit_rtol: f64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone)]
pub enum SourceSpec {
    Expr(String),
    Builtin(String),
}

fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs, grid: &GridArgs) -> Result<RunConfig, CliError> {
        let file = match &common.config {
            Some(path) => load(path)?,
            None => FileConfig::default(),
        };
        let nl = file.nonlinearity;
        let source = match (&common.expr, &common.builtin) {
            (Some(e), _) => SourceSpec::Expr(e.clone()),
            (None, Some(b)) => SourceSpec::Builtin(b.clone()),
            (None, None) => match (nl.expr, nl.builtin) {
                (Some(_), Some(_)) => return Err(CliError::usage("config sets both `expr` and `builtin`")),
                (Some(e), None) => SourceSpec::Expr(e),
                (None, Some(b)) => SourceSpec::Builtin(b),
                (None, None) => {
                    return Err(CliError::usage("no nonlinearity given; use --expr, --builtin or --config"))
                }
            },
        };
        let mut params = nl.params;
        params.extend(common.params.iter().cloned());
        let cfg = RunConfig {
            source,
            params,
            feedback: common.feedback.or(nl.feedback),
            grid_extent: common.grid_extent.or(nl.grid_extent),
            grid_n: common.grid_n.or(nl.grid_n),
            tol: common.tol.or(nl.tol),
            a_max: grid.amax.or(file.grid.a_max).unwrap_or(8.0),
            m: grid.m.or(file.grid.m).unwrap_or(32),
            n_max: grid.nmax.or(file.grid.n_max).unwrap_or(1),
            rtol: common.rtol.or(file.tolerances.rtol).unwrap_or(1e-10),
            atol: file.tolerances.atol.unwrap_or(1e-12),
            orbit_rtol: file.tolerances.orbit_rtol.unwrap_or(1e-12),
            out: common.out.clone().or(file.output.dir).unwrap_or_else(|| PathBuf::from("out")),
            formats: common.formats.clone().or(file.output.formats).unwrap_or_else(|| vec![Format::Csv, Format::Json]),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::usage(format!("{name} = {v} must be positive")))
            }
        };
        positive("a_max", self.a_max)?;
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("orbit_rtol", self.orbit_rtol)?;
        if let Some(tol) = self.tol {
            positive("tol", tol)?;
        }
        if self.m < 16 {
            return Err(CliError::usage(format!("m = {} must be at least 16", self.m)));
        }
        if self.n_max < 1 {
            return Err(CliError::usage("n_max must be at least 1"));
        }
        Ok(())
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        let source = match &self.source {
            SourceSpec::Expr(text) => Source::parse_expr(text)?,
            SourceSpec::Builtin(name) => Source::Builtin(name.parse::<Builtin>()?),
        };
        let mut grid = ValidationGrid::for_source(&source);
        if let Some(extent) = self.grid_extent {
            grid.extent = extent;
        }
        if let Some(n) = self.grid_n {
            grid.points = n;
        }
        if let Some(tol) = self.tol {
            grid.tol = tol;
        }
        Ok(Nonlinearity::build(source, self.params.clone(), grid, self.feedback)?)
    }

    pub fn periodmap_options(&self) -> PeriodMapOptions {
        PeriodMapOptions { rtol: self.rtol, atol: self.atol, ..PeriodMapOptions::default() }
    }

    pub fn orbit_options(&self) -> OrbitOptions {
        OrbitOptions { rtol: self.orbit_rtol, atol: self.orbit_rtol * 1e-2, ..OrbitOptions::default() }
    }

    pub fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}
