use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use stablekern::estimator::{fit, EstimationProblem, SearchConfig};
use stablekern::formats::{
    metadata_header, parse_band_csv, parse_grid, parse_io_csv, parse_matrix_csv,
    write_band_csv, write_matrix_csv,
};
use stablekern::kernels::gram;
use stablekern::maxent::{
    band_extend, band_project, completion_entropy_test, increment_constrained_entropy_test,
    BandSkeleton, GaussianEntropyReport,
};
use stablekern::oracle::consistency_report;
use stablekern::process::{audit_constraints, sample, PathSet, GAUSSIAN_ALGORITHM, RNG_ALGORITHM};
use stablekern::structure::{closed_form_inverse, log_det, precision_factor, sqrt_factor};
use stablekern::{KernelFamily, KernelSpec, SamplingGrid};

use crate::{Cli, Command, GridSource, KernelGrid, OptionalGridSource, Which};

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl From<stablekern::Error> for CliError {
    fn from(e: stablekern::Error) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        code: "Io",
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError {
        code: "ParseError",
        message: format!("{}: {e}", path.display()),
    })
}

fn parse_uniform(text: &str) -> CliResult<SamplingGrid> {
    let bad = || CliError {
        code: "ParseError",
        message: format!("--uniform expects `n,delta,t_start`, got `{text}`"),
    };
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [n, delta, start] = parts[..] else {
        return Err(bad());
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    let delta: f64 = delta.parse().map_err(|_| bad())?;
    let start: f64 = start.parse().map_err(|_| bad())?;
    Ok(SamplingGrid::uniform(n, delta, start)?)
}

fn load_grid(file: Option<&Path>, uniform: Option<&str>) -> CliResult<Option<SamplingGrid>> {
    match (file, uniform) {
        (Some(path), _) => Ok(Some(parse_grid(&read(path)?)?)),
        (None, Some(u)) => parse_uniform(u).map(Some),
        (None, None) => Ok(None),
    }
}

fn grid_of(src: &GridSource) -> CliResult<SamplingGrid> {
    let g = load_grid(src.grid.as_deref(), src.uniform.as_deref())?;
    Ok(g.expect("clap enforces one grid source"))
}

fn load(kg: &KernelGrid) -> CliResult<(KernelSpec, SamplingGrid)> {
    Ok((read_json(&kg.kernel)?, grid_of(&kg.grid)?))
}

/// Provenance attached to every output.
#[derive(Debug, Serialize)]
struct Meta {
    tool: String,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    seed: u64,
    rng: &'static str,
    gaussian: &'static str,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: T,
}

impl Meta {
    fn new(cli: &Cli, command: &'static str) -> Self {
        Self {
            tool: format!("stablekern {}", env!("CARGO_PKG_VERSION")),
            command,
            kernel: None,
            n: None,
            seed: cli.seed,
            rng: RNG_ALGORITHM,
            gaussian: GAUSSIAN_ALGORITHM,
        }
    }

    fn with(mut self, spec: &KernelSpec, grid: &SamplingGrid) -> Self {
        self.kernel = Some(*spec);
        self.n = Some(grid.len());
        self
    }

    /// `#` lines for CSV outputs.
    fn header(&self) -> String {
        let mut pairs = vec![("tool", self.tool.clone()), ("command", self.command.to_string())];
        if let Some(k) = &self.kernel {
            pairs.push(("kernel", serde_json::to_string(k).expect("spec serializes")));
        }
        if let Some(n) = self.n {
            pairs.push(("n", n.to_string()));
        }
        pairs.push(("seed", self.seed.to_string()));
        pairs.push(("rng", self.rng.to_string()));
        pairs.push(("gaussian", self.gaussian.to_string()));
        metadata_header(&pairs)
    }

    fn json<T: Serialize>(&self, body: T) -> String {
        let mut s = serde_json::to_string_pretty(&Tagged { meta: self, body })
            .expect("reports serialize");
        s.push('\n');
        s
    }
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| io_error(path, e))?;
            if !cli.quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| io_error(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LogDet {
    log_det: f64,
}

#[derive(Serialize)]
struct EntropyAudit {
    completion: GaussianEntropyReport,
    increments: GaussianEntropyReport,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let text = match &cli.command {
        Command::Gram(kg) => {
            let (spec, grid) = load(kg)?;
            let p = gram(&spec, &grid)?.values;
            Meta::new(cli, "gram").with(&spec, &grid).header() + &write_matrix_csv(&p)
        }
        Command::Inverse(kg) => {
            let (spec, grid) = load(kg)?;
            let t = closed_form_inverse(&spec, &grid)?;
            Meta::new(cli, "inverse").with(&spec, &grid).header() + &write_band_csv(t.diag(), t.offdiag())
        }
        Command::Logdet(kg) => {
            let (spec, grid) = load(kg)?;
            let log_det = log_det(&spec, &grid)?;
            Meta::new(cli, "logdet").with(&spec, &grid).json(LogDet { log_det })
        }
        Command::Factor { kg, which: Which::Precision } => {
            let (spec, grid) = load(kg)?;
            let f = precision_factor(&spec, &grid)?;
            Meta::new(cli, "factor").with(&spec, &grid).header() + &write_band_csv(f.diag(), f.sup())
        }
        Command::Factor { kg, which: Which::Sqrt } | Command::Sqrt(kg) => {
            let (spec, grid) = load(kg)?;
            let u = sqrt_factor(&spec, &grid)?.to_dense();
            let name = if matches!(cli.command, Command::Sqrt(_)) { "sqrt" } else { "factor" };
            Meta::new(cli, name).with(&spec, &grid).header() + &write_matrix_csv(&u)
        }
        Command::Sample { kg, paths } => {
            let (spec, grid) = load(kg)?;
            let ps = sample(&spec, &grid, cli.seed, *paths)?;
            Meta::new(cli, "sample").with(&spec, &grid).header() + &write_matrix_csv(ps.paths())
        }
        Command::Audit { kg, paths } => {
            let (spec, grid) = load(kg)?;
            let ps = PathSet::new(grid.clone(), parse_matrix_csv(&read(paths)?)?)?;
            let report = audit_constraints(&ps, &spec)?;
            Meta::new(cli, "audit").with(&spec, &grid).json(report)
        }
        Command::Extend { band } => {
            let (diag, offdiag) = parse_band_csv(&read(band)?)?;
            let m = band_extend(&BandSkeleton::new(diag, offdiag)?)?;
            Meta::new(cli, "extend").header() + &write_matrix_csv(&m)
        }
        Command::MaxentAudit { kg, trials } => {
            let (spec, grid) = load(kg)?;
            let skeleton = band_project(&gram(&spec, &grid)?.values)?;
            let body = EntropyAudit {
                completion: completion_entropy_test(&skeleton, cli.seed, *trials)?,
                increments: increment_constrained_entropy_test(&spec, &grid, cli.seed, *trials)?,
            };
            Meta::new(cli, "maxent-audit").with(&spec, &grid).json(body)
        }
        Command::Fit { data, order, kernel_family, search, sigma2, grid } => {
            run_fit(cli, data, *order, kernel_family.as_deref(), search.as_deref(), *sigma2, grid)?
        }
        Command::Check(kg) => {
            let (spec, grid) = load(kg)?;
            let report = consistency_report(&spec, &grid)?;
            let text = Meta::new(cli, "check").with(&spec, &grid).json(&report);
            if !report.pass {
                emit(cli, &text)?;
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                return Err(CliError {
                    code: "CheckFailed",
                    message: format!("residual above threshold: {}", failed.join(", ")),
                });
            }
            text
        }
    };
    emit(cli, &text)
}

fn run_fit(
    cli: &Cli,
    data: &Path,
    order: usize,
    family: Option<&str>,
    search: Option<&Path>,
    sigma2: Option<f64>,
    grid: &OptionalGridSource,
) -> CliResult<String> {
    let (u, y) = parse_io_csv(&read(data)?)?;
    let problem = EstimationProblem::new(u, y, order, sigma2)?;
    let mut config: SearchConfig = match search {
        Some(path) => read_json(path)?,
        None => SearchConfig::default(),
    };
    if let Some(f) = family {
        config.family = f.parse::<KernelFamily>()?;
    }
    let grid = load_grid(grid.grid.as_deref(), grid.uniform.as_deref())?
        .unwrap_or_else(|| problem.default_grid());
    let estimate = fit(&problem, &grid, &config)?;
    let mut meta = Meta::new(cli, "fit");
    meta.n = Some(grid.len());
    Ok(meta.json(estimate))
}
