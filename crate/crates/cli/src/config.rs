//! Run configuration. Config files and command-line flags resolve to the same
//! [`Job`].

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use selfsim::fragmentation::{Atom, DislocationMeasure};
use selfsim::invariance::InvarianceComponents;
use selfsim::lamperti::{Psi, PsiSpec, SelfSimilarProcessSpec};
use selfsim::levy::LevyModel;
use selfsim::{scalar, Point};

pub const SPEC_VERSION: &str = "1";

pub const COMPONENTS: [&str; 8] = [
    "pssmp",
    "pssmp-bad-c",
    "additive-line",
    "additive-plane",
    "t-law",
    "fragmentation",
    "perturbed-product",
    "process",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: at `{field}`: {message}")]
    Schema { origin: String, field: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn schema_error<E: Display>(origin: &str, prefix: &str, err: serde_path_to_error::Error<E>) -> ConfigError {
    let path = err.path().to_string();
    let field = match (prefix, path.as_str()) {
        ("", p) => p.to_string(),
        (pre, ".") => pre.to_string(),
        (pre, p) => format!("{pre}.{p}"),
    };
    ConfigError::Schema {
        origin: origin.to_string(),
        field,
        message: err.into_inner().to_string(),
    }
}

/// Parses JSON text, reporting the path of the offending field.
pub fn parse_str<T: DeserializeOwned>(origin: &str, text: &str) -> Result<T, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| schema_error(origin, "", e))?;
    de.end().map_err(|e| ConfigError::Schema {
        origin: origin.to_string(),
        field: ".".into(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&path.display().to_string(), &text)
}

fn from_value<T: DeserializeOwned>(origin: &str, prefix: &str, value: serde_json::Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| schema_error(origin, prefix, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Simulate,
    Lamperti,
    Canonicalize,
    Verify,
    Tgroup,
    Frag,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Simulate => "simulate",
            CommandName::Lamperti => "lamperti",
            CommandName::Canonicalize => "canonicalize",
            CommandName::Verify => "verify",
            CommandName::Tgroup => "tgroup",
            CommandName::Frag => "frag",
        }
    }
}

/// Top-level config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: String,
    pub subcommand: CommandName,
    pub seed: u64,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub payload: serde_json::Value,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

/// Overrides of the default tolerances.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Good-component and group checks.
    pub check: Option<f64>,
    /// Quadrature tolerance of the canonical map.
    pub quad: Option<f64>,
    pub homomorphism: Option<f64>,
    pub path_independence: Option<f64>,
    pub alpha_consistency: Option<f64>,
    /// KS level.
    pub level: Option<f64>,
}

impl Tolerances {
    fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("tolerances.check", self.check),
            ("tolerances.quad", self.quad),
            ("tolerances.homomorphism", self.homomorphism),
            ("tolerances.path_independence", self.path_independence),
            ("tolerances.alpha_consistency", self.alpha_consistency),
        ];
        for (name, value) in fields {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(name, format!("must be positive, got {v}")));
                }
            }
        }
        if let Some(level) = self.level {
            if !(level > 0.0 && level < 1.0) {
                return Err(invalid("tolerances.level", format!("must lie in (0, 1), got {level}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatePayload {
    pub model: LevyModel,
}

/// A self-similar process family on disk.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessFile {
    pub psi: PsiSpec,
    pub driver: LevyModel,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub start: Vec<f64>,
}

impl ProcessFile {
    pub fn build(&self, field: &str) -> Result<SelfSimilarProcessSpec, ConfigError> {
        let psi = self.psi.build().map_err(|e| invalid(&format!("{field}.psi"), e))?;
        let start = match self.start.as_slice() {
            [x] if psi.dim() == 1 => scalar(*x),
            [x, y] if psi.dim() == 2 => Point::new(*x, *y),
            other => {
                return Err(invalid(
                    &format!("{field}.start"),
                    format!("expected {} coordinates, got {}", psi.dim(), other.len()),
                ))
            }
        };
        let spec = SelfSimilarProcessSpec {
            psi,
            driver: self.driver.clone(),
            alpha: self.alpha,
            beta: self.beta,
            start,
        };
        spec.validate().map_err(|e| invalid(field, e))?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LampertiMode {
    #[default]
    Trajectory,
    Sample,
    Lifetime,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LampertiPayload {
    pub process: ProcessFile,
    #[serde(default)]
    pub mode: LampertiMode,
    pub t: Option<f64>,
}

/// A registered component family with its parameters, optionally pushed
/// through a registered `ψ`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSelection {
    pub component: String,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub psi: Option<String>,
    pub grid_size: Option<usize>,
}

impl ComponentSelection {
    pub fn build(&self) -> Result<InvarianceComponents, ConfigError> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(invalid("alpha", "alpha and beta must be finite"));
        }
        let psi = self
            .psi
            .as_deref()
            .map(Psi::by_name)
            .transpose()
            .map_err(|e| invalid("psi", e))?;
        let (alpha, beta) = (self.alpha, self.beta);
        let base = match self.component.as_str() {
            "pssmp" => InvarianceComponents::pssmp(alpha),
            "pssmp-bad-c" => InvarianceComponents::pssmp_bad_c(alpha),
            "additive-line" => InvarianceComponents::additive_line(),
            "additive-plane" => InvarianceComponents::additive_plane(),
            "t-law" => InvarianceComponents::t_law(beta),
            "fragmentation" => InvarianceComponents::fragmentation(alpha),
            "perturbed-product" => InvarianceComponents::perturbed_product(),
            "process" => {
                let psi = psi.ok_or_else(|| invalid("psi", "component `process` needs a psi"))?;
                return Ok(InvarianceComponents::from_process(&psi, alpha, beta));
            }
            other => {
                return Err(invalid(
                    "component",
                    format!("unknown component '{other}' (known: {})", COMPONENTS.join(", ")),
                ))
            }
        };
        match psi {
            Some(psi) => base.pushforward(&psi).map_err(|e| invalid("psi", e)),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TgroupPayload {
    pub model: LevyModel,
    #[serde(default = "one")]
    pub big: f64,
}

fn one() -> f64 {
    1.0
}

/// A dislocation measure file; `alpha` is optional.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuFile {
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub erosion: f64,
    pub alpha: Option<f64>,
}

impl NuFile {
    pub fn measure(&self, field: &str) -> Result<DislocationMeasure, ConfigError> {
        let nu = DislocationMeasure {
            atoms: self.atoms.clone(),
            erosion: self.erosion,
        };
        nu.validate().map_err(|e| invalid(field, e))?;
        Ok(nu)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FragMode {
    Direct,
    Levy,
    #[default]
    Equivalence,
    Dissipation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragPayload {
    pub nu: NuFile,
    #[serde(default)]
    pub mode: FragMode,
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default = "one")]
    pub t_probe: f64,
}

/// Where artifacts go: `{dir}/{prefix}.csv` and `{dir}/{prefix}.report.json`.
#[derive(Clone, Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Output {
    pub fn file(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.prefix))
    }
}

#[derive(Debug)]
pub enum Task {
    Simulate {
        model: LevyModel,
    },
    Lamperti {
        spec: SelfSimilarProcessSpec,
        mode: LampertiMode,
        t: Option<f64>,
    },
    Canonicalize {
        selection: ComponentSelection,
        components: InvarianceComponents,
    },
    Verify {
        selection: ComponentSelection,
        components: InvarianceComponents,
    },
    Tgroup {
        model: LevyModel,
        big: f64,
    },
    Frag {
        nu: DislocationMeasure,
        alpha: f64,
        mode: FragMode,
        x0: f64,
        t_probe: f64,
    },
}

impl Task {
    pub fn name(&self) -> CommandName {
        match self {
            Task::Simulate { .. } => CommandName::Simulate,
            Task::Lamperti { .. } => CommandName::Lamperti,
            Task::Canonicalize { .. } => CommandName::Canonicalize,
            Task::Verify { .. } => CommandName::Verify,
            Task::Tgroup { .. } => CommandName::Tgroup,
            Task::Frag { .. } => CommandName::Frag,
        }
    }

    pub fn simulate(model: LevyModel, field: &str) -> Result<Self, ConfigError> {
        model.validate().map_err(|e| invalid(field, e))?;
        Ok(Task::Simulate { model })
    }

    pub fn lamperti(process: &ProcessFile, mode: LampertiMode, t: Option<f64>, field: &str) -> Result<Self, ConfigError> {
        let spec = process.build(field)?;
        if let Some(t) = t {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("t", format!("must be >= 0, got {t}")));
            }
        }
        Ok(Task::Lamperti { spec, mode, t })
    }

    pub fn canonicalize(selection: ComponentSelection) -> Result<Self, ConfigError> {
        let components = selection.build()?;
        Ok(Task::Canonicalize { selection, components })
    }

    pub fn verify(selection: ComponentSelection) -> Result<Self, ConfigError> {
        let components = selection.build()?;
        Ok(Task::Verify { selection, components })
    }

    pub fn tgroup(model: LevyModel, big: f64, field: &str) -> Result<Self, ConfigError> {
        model.validate().map_err(|e| invalid(field, e))?;
        if model.dim != 2 {
            return Err(invalid(&format!("{field}.dim"), "the pair model must be two-dimensional"));
        }
        if model.total_kill_rate() > 0.0 {
            return Err(invalid(field, "the pair model must not kill"));
        }
        if !(big > 0.0) {
            return Err(invalid("big", format!("must be positive, got {big}")));
        }
        Ok(Task::Tgroup { model, big })
    }

    pub fn frag(nu: &NuFile, alpha: Option<f64>, mode: FragMode, x0: f64, t_probe: f64, field: &str) -> Result<Self, ConfigError> {
        let measure = nu.measure(field)?;
        let alpha = alpha.or(nu.alpha).unwrap_or(0.0);
        if !alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(invalid("x0", format!("must be positive, got {x0}")));
        }
        if !(t_probe > 0.0 && t_probe.is_finite()) {
            return Err(invalid("t_probe", format!("must be positive, got {t_probe}")));
        }
        Ok(Task::Frag {
            nu: measure,
            alpha,
            mode,
            x0,
            t_probe,
        })
    }
}

/// A fully validated run.
#[derive(Debug)]
pub struct Job {
    pub seed: u64,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    pub output: Output,
    pub tolerances: Tolerances,
    pub task: Task,
}

impl Job {
    pub fn new(
        seed: u64,
        n_paths: Option<usize>,
        horizon: Option<f64>,
        output: Output,
        tolerances: Tolerances,
        task: Task,
    ) -> Result<Self, ConfigError> {
        if n_paths == Some(0) {
            return Err(invalid("n_paths", "must be >= 1"));
        }
        if let Some(h) = horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("horizon", format!("must be positive, got {h}")));
            }
        }
        tolerances.validate()?;
        Ok(Self {
            seed,
            n_paths,
            horizon,
            output,
            tolerances,
            task,
        })
    }
}

impl RunConfig {
    pub fn into_job(self, origin: &str, base_dir: &Path) -> Result<Job, ConfigError> {
        if self.spec_version != SPEC_VERSION {
            return Err(ConfigError::Schema {
                origin: origin.to_string(),
                field: "spec_version".into(),
                message: format!("unsupported version '{}', expected '{SPEC_VERSION}'", self.spec_version),
            });
        }
        let payload = self.payload;
        let task = match self.subcommand {
            CommandName::Simulate => {
                let p: SimulatePayload = from_value(origin, "payload", payload)?;
                Task::simulate(p.model, "payload.model")?
            }
            CommandName::Lamperti => {
                let p: LampertiPayload = from_value(origin, "payload", payload)?;
                Task::lamperti(&p.process, p.mode, p.t, "payload.process")?
            }
            CommandName::Canonicalize => Task::canonicalize(from_value(origin, "payload", payload)?)?,
            CommandName::Verify => Task::verify(from_value(origin, "payload", payload)?)?,
            CommandName::Tgroup => {
                let p: TgroupPayload = from_value(origin, "payload", payload)?;
                Task::tgroup(p.model, p.big, "payload.model")?
            }
            CommandName::Frag => {
                let p: FragPayload = from_value(origin, "payload", payload)?;
                Task::frag(&p.nu, p.alpha, p.mode, p.x0, p.t_probe, "payload.nu")?
            }
        };
        let dir = match self.output.dir {
            Some(d) if d.is_relative() => base_dir.join(d),
            Some(d) => d,
            None => base_dir.to_path_buf(),
        };
        let output = Output {
            dir,
            prefix: self.output.prefix.unwrap_or_else(|| self.subcommand.as_str().to_string()),
        };
        Job::new(self.seed, self.n_paths, self.horizon, output, self.tolerances, task)
    }
}
