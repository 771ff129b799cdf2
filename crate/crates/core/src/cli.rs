//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::energy::{approx_energy_density, dirichlet_energy, Normalization};
use crate::error::{Error, Result};
use crate::examples::{
    annulus_points, build_covering, build_eta, constant_map, eta_phwc_suite, sum_map, torus_sawtooth, CoveringSpec,
    EtaSpec,
};
use crate::harmonic::{assemble_stiffness, solve_harmonic_map, weak_harmonic_residual, SolverOptions};
use crate::io::{read_boundary, read_json, read_map, read_polyhedron, to_json, write_json, MapFile};
use crate::meshes::flat_torus;
use crate::morphism::{
    factorization_suite, hwc_residual, phm_check, phwc_residual, pullback_harmonicity_suite, samples_from_plmap,
    Tolerances,
};
use crate::quadrature::QuadratureOrder;
use crate::riemannian::SurfacePoint;
use crate::target::{standard_family, target_from_name, FlatC, HolomorphicFunction};

/// Exit status for a true verdict or a successful computation.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FALSE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Settings shared by all subcommands; a `--config` file overrides the
/// defaults field by field, and explicit flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub quadrature: QuadratureOrder,
    pub solver: SolverOptions,
    pub seed: u64,
    pub format: OutputFormat,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            quadrature: QuadratureOrder::default(),
            solver: SolverOptions::default(),
            seed: 42,
            format: OutputFormat::Json,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        if !(self.solver.tol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerance must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "polyharm", version, about = "Harmonic maps and pseudo harmonic morphisms on polyhedra")]
pub struct Cli {
    /// JSON file overriding the default run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckMode {
    Hwc,
    Phwc,
    Phm,
    Pullback,
    Factor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    GradientSquared,
    KsRaw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check admissibility of a mesh.
    Validate { mesh: PathBuf },
    /// Upper bound for the intrinsic distance between two points.
    Distance {
        mesh: PathBuf,
        #[arg(long)]
        metric: Option<PathBuf>,
        /// `v:<id>` or `s:<simplex>:<b0>,<b1>,..`
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 3)]
        level: u32,
    },
    /// Dirichlet energy of a PL map.
    Energy {
        mesh: PathBuf,
        map: PathBuf,
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, default_value = "flat:1")]
        target: String,
        #[arg(long, value_enum, default_value = "gradient-squared")]
        normalization: NormalizationArg,
        /// Also estimate the ε-ball density at this point (`s:<simplex>:<bary>`).
        #[arg(long)]
        at: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
    /// Harmonic map with prescribed boundary values.
    Solve {
        mesh: PathBuf,
        boundary: PathBuf,
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, default_value = "flat:1")]
        target: String,
        /// Where to write the solution map file.
        #[arg(long)]
        map_out: PathBuf,
    },
    /// HWC / PHWC / PHM, pullback and factorization checks.
    Check {
        #[arg(long, value_enum)]
        mode: CheckMode,
        /// `mesh map` (hwc, phwc, phm), `mesh map mesh map ..` coarse to fine
        /// (pullback), or `map` on the covering base (factor).
        files: Vec<PathBuf>,
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, default_value = "flat:1")]
        target: String,
        /// `standard`, `none`, or a JSON list of functions.
        #[arg(long, default_value = "standard")]
        family: String,
        #[arg(long, default_value = "torus_cover")]
        cover: String,
        #[arg(long, default_value_t = 4)]
        cells: usize,
    },
    /// Gallery examples with their suite reports.
    Example {
        #[command(subcommand)]
        which: ExampleCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExampleCommand {
    /// η map built from `(u_a/u_b)(v̄_c/v̄_d)` components.
    Eta {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Also run the suite on the sum of two copies.
        #[arg(long)]
        sum: bool,
    },
    /// Factorization through the 2:1 torus covering.
    TorusFactor {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
}

struct Outcome {
    text: String,
    verdict: Option<bool>,
}

impl Outcome {
    fn report<T: Serialize>(value: &T, verdict: Option<bool>) -> Result<Self> {
        Ok(Self {
            text: to_json(value)?,
            verdict,
        })
    }
}

fn surface_point(spec: &str, complex: &crate::simplicial::SimplicialComplex) -> Result<SurfacePoint> {
    let bad = || Error::InvalidParameter(format!("point {spec:?}: expected v:<id> or s:<simplex>:<b0>,<b1>,.."));
    let mut parts = spec.splitn(3, ':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some("v"), Some(id), None) => SurfacePoint::at_vertex(complex, id.parse().map_err(|_| bad())?),
        (Some("s"), Some(t), Some(b)) => {
            let bary = b
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            Ok(SurfacePoint::new(t.parse().map_err(|_| bad())?, bary))
        }
        _ => Err(bad()),
    }
}

fn family(spec: &str, n: usize) -> Result<Vec<HolomorphicFunction>> {
    match spec {
        "standard" => Ok(standard_family(n)),
        "none" => Ok(Vec::new()),
        path => read_json(Path::new(path)),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Ok(t) = std::env::var("POLYHARM_THREADS") {
        let t = t
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("POLYHARM_THREADS={t:?}")))?;
        cfg.threads = Some(cfg.threads.map_or(t, |c| c.min(t)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // the global pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn pair<'a>(files: &'a [PathBuf], mode: &str) -> Result<(&'a Path, &'a Path)> {
    match files {
        [mesh, map] => Ok((mesh, map)),
        _ => Err(Error::InvalidParameter(format!("--mode {mode} takes a mesh file and a map file"))),
    }
}

fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Outcome> {
    let order = cfg.quadrature;
    let tol = &cfg.tolerances;
    match &cli.command {
        Command::Validate { mesh } => {
            let complex = crate::io::read_mesh(mesh)?;
            let report = complex.check_admissible();
            let ok = report.admissible();
            Outcome::report(&json!({ "admissible": ok, "report": report }), Some(ok))
        }
        Command::Distance {
            mesh,
            metric,
            from,
            to,
            level,
        } => {
            let poly = read_polyhedron(mesh, metric.as_deref(), order)?;
            let x = surface_point(from, poly.complex())?;
            let y = surface_point(to, poly.complex())?;
            Outcome::report(&poly.intrinsic_distance(&x, &y, *level)?, None)
        }
        Command::Energy {
            mesh,
            map,
            metric,
            target,
            normalization,
            at,
            epsilon,
            samples,
        } => {
            let poly = read_polyhedron(mesh, metric.as_deref(), order)?;
            let map = read_map(map, poly.complex())?;
            let target = target_from_name(target)?;
            let norm = match normalization {
                NormalizationArg::GradientSquared => Normalization::GradientSquared,
                NormalizationArg::KsRaw => Normalization::KsRaw,
            };
            let report = dirichlet_energy(&poly, &map, target.as_ref(), norm)?;
            let mut value = serde_json::to_value(&report).map_err(|source| Error::Format {
                context: "energy report".into(),
                source,
            })?;
            if let Some(at) = at {
                let x = surface_point(at, poly.complex())?;
                let est = approx_energy_density(&poly, &map, target.as_ref(), &x, *epsilon, *samples, cfg.seed)?;
                value["approximation"] = json!(est);
            }
            Outcome::report(&value, None)
        }
        Command::Solve {
            mesh,
            boundary,
            metric,
            target,
            map_out,
        } => {
            let poly = read_polyhedron(mesh, metric.as_deref(), order)?;
            let target = target_from_name(target)?;
            let data = read_boundary(boundary)?;
            let system = assemble_stiffness(&poly)?;
            let sol = solve_harmonic_map(&system, target.as_ref(), &data, &cfg.solver)?;
            let residual = weak_harmonic_residual(&system, target.as_ref(), &sol.map)?;
            write_json(map_out, &MapFile::from_map(&sol.map))?;
            Outcome::report(
                &json!({
                    "map_file": map_out.display().to_string(),
                    "iterations": sol.iterations,
                    "history": sol.history,
                    "residual": residual,
                }),
                None,
            )
        }
        Command::Check {
            mode,
            files,
            metric,
            target,
            family: fam,
            cover,
            cells,
        } => {
            let target = target_from_name(target)?;
            match mode {
                CheckMode::Hwc | CheckMode::Phwc | CheckMode::Phm => {
                    let name = format!("{mode:?}").to_lowercase();
                    let (mesh, map) = pair(files, &name)?;
                    let poly = read_polyhedron(mesh, metric.as_deref(), order)?;
                    let map = read_map(map, poly.complex())?;
                    match mode {
                        CheckMode::Hwc => {
                            let r = hwc_residual(&samples_from_plmap(&poly, &map)?, target.as_ref(), tol.tol_c)?;
                            Outcome::report(&r, Some(r.verdict))
                        }
                        CheckMode::Phwc => {
                            let r = phwc_residual(&samples_from_plmap(&poly, &map)?, tol.tol_c)?;
                            Outcome::report(&r, Some(r.verdict))
                        }
                        _ => {
                            let fam = family(fam, map.complex_target_dim())?;
                            let r = phm_check(&poly, &map, target.as_ref(), &fam, tol)?;
                            Outcome::report(&r, Some(r.verdict))
                        }
                    }
                }
                CheckMode::Pullback => {
                    if files.len() < 4 || files.len() % 2 != 0 {
                        return Err(Error::InvalidParameter(
                            "--mode pullback takes mesh/map pairs for at least two levels".into(),
                        ));
                    }
                    let levels = files
                        .chunks(2)
                        .map(|p| {
                            let poly = read_polyhedron(&p[0], None, order)?;
                            let map = read_map(&p[1], poly.complex())?;
                            Ok((poly, map))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let fam = family(fam, levels[0].1.complex_target_dim())?;
                    let table = pullback_harmonicity_suite(&levels, &fam, tol)?;
                    let text = match cfg.format {
                        OutputFormat::Csv => table.to_csv(),
                        OutputFormat::Json => to_json(&table)?,
                    };
                    Ok(Outcome {
                        text,
                        verdict: Some(table.verdict),
                    })
                }
                CheckMode::Factor => {
                    let [map] = files.as_slice() else {
                        return Err(Error::InvalidParameter("--mode factor takes one map file on the base".into()));
                    };
                    let cov = build_covering(cover.parse()?, *cells)?;
                    let map = read_map(map, cov.base.complex())?;
                    let fam = family(fam, map.complex_target_dim())?;
                    let r = factorization_suite(&cov, &map, target.as_ref(), &fam, tol)?;
                    Outcome::report(&r, Some(r.passes))
                }
            }
        }
        Command::Example { which } => match which {
            ExampleCommand::Eta { k, s, r, samples, sum } => {
                let eta = build_eta(EtaSpec::cyclic(*k, *s, *r)?)?;
                let points = annulus_points(k + s, *samples, cfg.seed);
                let suite = eta_phwc_suite(&eta, &points, &eta.holomorphic_vars())?;
                let mut ok = suite.passes;
                let sum_report = if *sum {
                    let total = sum_map(&eta, &eta)?;
                    let pts = annulus_points(2 * (k + s), *samples, cfg.seed);
                    let vars: Vec<usize> = (0..*k).chain(k + s..2 * k + s).collect();
                    let rep = eta_phwc_suite(&total, &pts, &vars)?;
                    ok &= rep.passes;
                    Some(rep)
                } else {
                    None
                };
                Outcome::report(
                    &json!({ "k": k, "s": s, "r": r, "seed": cfg.seed, "suite": suite, "sum": sum_report, "passes": ok }),
                    Some(ok),
                )
            }
            ExampleCommand::TorusFactor { n } => {
                let cov = build_covering(CoveringSpec::TorusCover, *n)?;
                let fam = standard_family(1);
                let flat = FlatC::new(1);
                let phm = factorization_suite(&cov, &constant_map(&cov.base, &[0.25, -0.5])?, &flat, &fam, tol)?;
                let saw = torus_sawtooth(&flat_torus(*n, *n, 1.0, 1.0))?;
                let non_phm = factorization_suite(&cov, &saw, &flat, &fam, tol)?;
                let ok = phm.passes && non_phm.passes && phm.base.verdict && !non_phm.base.verdict;
                Outcome::report(&json!({ "n": n, "phm": phm, "non_phm": non_phm, "passes": ok }), Some(ok))
            }
        },
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = load_config(&cli).and_then(|cfg| {
        configure_threads(cfg.threads);
        execute(&cli, &cfg)
    });
    match result {
        Ok(outcome) => {
            let mut text = outcome.text;
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let written = match &cli.output {
                Some(p) => std::fs::write(p, &text).map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                }),
                None => out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                }),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_ERROR;
            }
            match outcome.verdict {
                Some(false) => EXIT_FALSE,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
