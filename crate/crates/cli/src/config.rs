//! Line-oriented `key = value` experiment configuration.
//!
//! `#` starts a comment. Relative paths are resolved against the directory
//! holding the configuration file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regrom::{
    AdConfig, AdMethod, Bdf2Start, ConvectingCoupling, FilterConfig, NewtonConfig, RomModelKind,
    TimeScheme,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing required key `{key}`")]
    MissingKey { key: &'static str },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    BurgersBuiltin,
    ExternalImport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Grom,
    Lrom,
    Adlrom,
}

impl ModelName {
    pub const ALL: [ModelName; 3] = [ModelName::Grom, ModelName::Lrom, ModelName::Adlrom];

    pub fn label(self) -> &'static str {
        match self {
            ModelName::Grom => "grom",
            ModelName::Lrom => "lrom",
            ModelName::Adlrom => "adlrom",
        }
    }
}

impl FromStr for ModelName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "grom" | "galerkin" => Ok(ModelName::Grom),
            "lrom" | "leray" => Ok(ModelName::Lrom),
            "adlrom" | "adl" => Ok(ModelName::Adlrom),
            _ => Err(format!("unknown model `{s}` (grom, lrom, adlrom)")),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdMethodName {
    VanCittert,
    Tikhonov,
    Lavrentiev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    Step,
    Zero,
}

/// Files read by the external-import problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportFiles {
    pub snapshots: Option<PathBuf>,
    pub times: Option<PathBuf>,
    pub mass: Option<PathBuf>,
    pub stiffness: Option<PathBuf>,
    pub tensor: Option<PathBuf>,
    pub conv_center_left: Option<PathBuf>,
    pub conv_center_right: Option<PathBuf>,
    pub conv_center_self: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub n_elements: usize,
    pub nu: f64,
    pub dt: f64,
    /// `None` for imports, where the snapshot count decides.
    pub n_steps: Option<usize>,
    pub r: usize,
    pub model: ModelName,
    pub ad_method: AdMethodName,
    pub delta: Option<f64>,
    pub mu: Option<f64>,
    pub order_n: Option<usize>,
    pub scheme: TimeScheme,
    pub coupling: ConvectingCoupling,
    pub center: bool,
    pub initial_condition: InitialCondition,
    pub newton: NewtonConfig<f64>,
    pub output_dir: PathBuf,
    pub sweep_delta: Option<Vec<f64>>,
    pub sweep_mu: Option<Vec<f64>>,
    pub reference_elements: Option<usize>,
    pub reference_steps: Option<usize>,
    pub import: ImportFiles,
}

impl ExperimentConfig {
    /// Defaults for everything optional, with the given required values.
    pub fn burgers(n_elements: usize, nu: f64, dt: f64, n_steps: usize, r: usize) -> Self {
        Self {
            problem: Problem::BurgersBuiltin,
            n_elements,
            nu,
            dt,
            n_steps: Some(n_steps),
            r,
            model: ModelName::Adlrom,
            ad_method: AdMethodName::Lavrentiev,
            delta: None,
            mu: None,
            order_n: None,
            scheme: TimeScheme::ImplicitEuler,
            coupling: ConvectingCoupling::Implicit,
            center: false,
            initial_condition: InitialCondition::Step,
            newton: NewtonConfig::default(),
            output_dir: PathBuf::from("output"),
            sweep_delta: None,
            sweep_mu: None,
            reference_elements: None,
            reference_steps: None,
            import: ImportFiles::default(),
        }
    }

    fn delta_or_missing(&self) -> Result<f64, ConfigError> {
        self.delta.ok_or(ConfigError::MissingKey { key: "delta" })
    }

    pub fn ad_config(&self) -> Result<AdConfig<f64>, ConfigError> {
        let filter = FilterConfig {
            delta: self.delta_or_missing()?,
        };
        let method = match self.ad_method {
            AdMethodName::VanCittert => AdMethod::VanCittert {
                order: self
                    .order_n
                    .ok_or(ConfigError::MissingKey { key: "order_n" })?,
            },
            AdMethodName::Tikhonov => AdMethod::Tikhonov {
                mu: self.mu.ok_or(ConfigError::MissingKey { key: "mu" })?,
            },
            AdMethodName::Lavrentiev => AdMethod::Lavrentiev {
                mu: self.mu.ok_or(ConfigError::MissingKey { key: "mu" })?,
            },
        };
        Ok(AdConfig { method, filter })
    }

    pub fn model_kind(&self, model: ModelName) -> Result<RomModelKind<f64>, ConfigError> {
        Ok(match model {
            ModelName::Grom => RomModelKind::Galerkin,
            ModelName::Lrom => RomModelKind::Leray(FilterConfig {
                delta: self.delta_or_missing()?,
            }),
            ModelName::Adlrom => RomModelKind::ApproximateDeconvolution(self.ad_config()?),
        })
    }

    /// `(δ, μ)` grid of a sweep; a missing list falls back to the single
    /// configured value.
    pub fn sweep_points(&self) -> Result<Vec<(f64, f64)>, ConfigError> {
        let deltas = match &self.sweep_delta {
            Some(d) => d.clone(),
            None => vec![self.delta_or_missing()?],
        };
        let mus = match (&self.sweep_mu, self.ad_method) {
            (Some(m), _) => m.clone(),
            (None, AdMethodName::VanCittert) => vec![f64::NAN],
            (None, _) => vec![self.mu.ok_or(ConfigError::MissingKey { key: "mu" })?],
        };
        Ok(deltas
            .iter()
            .flat_map(|&d| mus.iter().map(move |&m| (d, m)))
            .collect())
    }
}

const KEYS: &[&str] = &[
    "problem",
    "n_elements",
    "nu",
    "dt",
    "n_steps",
    "r",
    "model",
    "ad_method",
    "delta",
    "mu",
    "order_n",
    "scheme",
    "coupling",
    "center",
    "initial_condition",
    "newton_tol",
    "newton_max_iter",
    "output_dir",
    "sweep_delta",
    "sweep_mu",
    "reference_elements",
    "reference_steps",
    "snapshots_file",
    "times_file",
    "mass_file",
    "stiffness_file",
    "tensor_file",
    "conv_center_left_file",
    "conv_center_right_file",
    "conv_center_self_file",
    "reference_file",
];

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

struct Raw<'a> {
    entries: Vec<(&'a str, Entry<'a>)>,
}

impl<'a> Raw<'a> {
    fn get(&self, key: &str) -> Option<&Entry<'a>> {
        self.entries.iter().find(|(k, _)| *k == key).map(|(_, e)| e)
    }

    fn parse<T>(
        &self,
        key: &str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => f(e.value)
                .map(Some)
                .map_err(|message| ConfigError::InvalidValue {
                    line: e.line,
                    key: key.to_string(),
                    message,
                }),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(0, |e| e.line)
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = nonneg_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

fn nonneg_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be a finite nonnegative number"))
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    let v = nonneg_usize(s)?;
    if v > 0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

fn nonneg_usize(s: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn bool_value(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{s}` is not a boolean")),
    }
}

fn list(s: &str, item: fn(&str) -> Result<f64, String>) -> Result<Vec<f64>, String> {
    let items: Vec<&str> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if items.is_empty() {
        return Err("sweep list is empty".into());
    }
    items.into_iter().map(item).collect()
}

fn choice<'a, T: Copy>(options: &'a [(&'a str, T)]) -> impl Fn(&str) -> Result<T, String> + 'a {
    move |s| {
        options
            .iter()
            .find(|(name, _)| *name == s)
            .map(|&(_, v)| v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                format!("`{s}` is not one of {}", names.join(", "))
            })
    }
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = Raw {
        entries: Vec::new(),
    };
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: line_no })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&key) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        };
        if raw.get(key).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        raw.entries.push((
            key,
            Entry {
                line: line_no,
                value,
            },
        ));
    }

    let problem = raw
        .parse(
            "problem",
            choice(&[
                ("burgers_builtin", Problem::BurgersBuiltin),
                ("external_import", Problem::ExternalImport),
            ]),
        )?
        .unwrap_or(Problem::BurgersBuiltin);
    let required_f64 = |key: &'static str| -> Result<f64, ConfigError> {
        raw.parse(key, positive_f64)?
            .ok_or(ConfigError::MissingKey { key })
    };
    let required_usize = |key: &'static str| -> Result<usize, ConfigError> {
        raw.parse(key, positive_usize)?
            .ok_or(ConfigError::MissingKey { key })
    };
    let path = |key: &str| -> Result<Option<PathBuf>, ConfigError> {
        raw.parse(key, |s| {
            if s.is_empty() {
                Err("empty path".to_string())
            } else {
                Ok(base_dir.join(s))
            }
        })
    };

    let n_elements = match problem {
        Problem::BurgersBuiltin => required_usize("n_elements")?,
        Problem::ExternalImport => raw.parse("n_elements", positive_usize)?.unwrap_or(0),
    };
    let nu = required_f64("nu")?;
    let dt = required_f64("dt")?;
    let n_steps = match problem {
        Problem::BurgersBuiltin => Some(
            raw.parse("n_steps", nonneg_usize)?
                .ok_or(ConfigError::MissingKey { key: "n_steps" })?,
        ),
        Problem::ExternalImport => raw.parse("n_steps", nonneg_usize)?,
    };
    let r = required_usize("r")?;

    let mut cfg = ExperimentConfig::burgers(n_elements, nu, dt, n_steps.unwrap_or(0), r);
    cfg.problem = problem;
    cfg.n_steps = n_steps;
    if let Some(m) = raw.parse("model", |s| s.parse::<ModelName>())? {
        cfg.model = m;
    }
    if let Some(m) = raw.parse(
        "ad_method",
        choice(&[
            ("van_cittert", AdMethodName::VanCittert),
            ("tikhonov", AdMethodName::Tikhonov),
            ("lavrentiev", AdMethodName::Lavrentiev),
        ]),
    )? {
        cfg.ad_method = m;
    }
    cfg.delta = raw.parse("delta", nonneg_f64)?;
    cfg.mu = raw.parse("mu", nonneg_f64)?;
    cfg.order_n = raw.parse("order_n", nonneg_usize)?;
    if let Some(s) = raw.parse(
        "scheme",
        choice(&[
            ("implicit_euler", TimeScheme::ImplicitEuler),
            ("bdf2", TimeScheme::Bdf2(Bdf2Start::FirstStepEuler)),
        ]),
    )? {
        cfg.scheme = s;
    }
    if let Some(c) = raw.parse(
        "coupling",
        choice(&[
            ("implicit", ConvectingCoupling::Implicit),
            ("lagged", ConvectingCoupling::Lagged),
        ]),
    )? {
        cfg.coupling = c;
    }
    if let Some(c) = raw.parse("center", bool_value)? {
        cfg.center = c;
    }
    if let Some(ic) = raw.parse(
        "initial_condition",
        choice(&[
            ("step", InitialCondition::Step),
            ("zero", InitialCondition::Zero),
        ]),
    )? {
        cfg.initial_condition = ic;
    }
    if let Some(t) = raw.parse("newton_tol", positive_f64)? {
        cfg.newton.abs_tol = t;
    }
    if let Some(n) = raw.parse("newton_max_iter", positive_usize)? {
        cfg.newton.max_iter = n;
    }
    cfg.output_dir = path("output_dir")?.unwrap_or_else(|| base_dir.join("output"));
    cfg.sweep_delta = raw.parse("sweep_delta", |s| list(s, nonneg_f64))?;
    cfg.sweep_mu = raw.parse("sweep_mu", |s| list(s, nonneg_f64))?;
    cfg.reference_elements = raw.parse("reference_elements", positive_usize)?;
    cfg.reference_steps = raw.parse("reference_steps", positive_usize)?;
    cfg.import = ImportFiles {
        snapshots: path("snapshots_file")?,
        times: path("times_file")?,
        mass: path("mass_file")?,
        stiffness: path("stiffness_file")?,
        tensor: path("tensor_file")?,
        conv_center_left: path("conv_center_left_file")?,
        conv_center_right: path("conv_center_right_file")?,
        conv_center_self: path("conv_center_self_file")?,
        reference: path("reference_file")?,
    };

    if problem == Problem::BurgersBuiltin && n_elements < 2 {
        return Err(ConfigError::InvalidValue {
            line: raw.line_of("n_elements"),
            key: "n_elements".into(),
            message: "the mesh needs at least 2 elements".into(),
        });
    }
    if problem == Problem::ExternalImport {
        for (key, p) in [
            ("snapshots_file", &cfg.import.snapshots),
            ("mass_file", &cfg.import.mass),
            ("stiffness_file", &cfg.import.stiffness),
        ] {
            if p.is_none() {
                return Err(ConfigError::MissingKey { key });
            }
        }
        let blocks = [
            &cfg.import.conv_center_left,
            &cfg.import.conv_center_right,
            &cfg.import.conv_center_self,
        ];
        if cfg.center && cfg.import.tensor.is_some() && blocks.iter().any(|b| b.is_none()) {
            let key = [
                "conv_center_left_file",
                "conv_center_right_file",
                "conv_center_self_file",
            ][blocks.iter().position(|b| b.is_none()).unwrap_or(0)];
            return Err(ConfigError::MissingKey { key });
        }
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}
