//! Experiment configs and the parameter tables shared by flags and TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use landmark_core::KernelSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Classify,
    Shoot,
    Twobody,
    Sde,
    Length,
    Figure1,
    ReproCollision,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Classify => "classify",
            CommandName::Shoot => "shoot",
            CommandName::Twobody => "twobody",
            CommandName::Sde => "sde",
            CommandName::Length => "length",
            CommandName::Figure1 => "figure1",
            CommandName::ReproCollision => "repro-collision",
        }
    }

    /// File stem used for artifacts.
    pub fn stem(self) -> &'static str {
        match self {
            CommandName::ReproCollision => "repro_collision",
            c => c.as_str(),
        }
    }

    fn needs_kernel(self) -> bool {
        !matches!(self, CommandName::Figure1 | CommandName::ReproCollision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// Empty means every format the command produces.
    #[serde(default)]
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// Upper limit of the criterion integral
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { a: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ShootParams {
    /// Initial state as JSON: {n, d, x: [[..]], p: [[..]]}
    #[arg(long)]
    pub init: PathBuf,
    /// Final integration time
    #[arg(long = "t-end")]
    pub t_end: f64,
    /// Relative tolerance of the adaptive solver
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    /// Absolute tolerance of the adaptive solver
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Separation at which a collision is reported
    #[arg(long = "collision-eps", default_value_t = 1e-6)]
    pub collision_eps: f64,
    /// Norm at which a landmark is reported as escaped
    #[arg(long = "escape-radius", default_value_t = 1e6)]
    pub escape_radius: f64,
}

impl Default for ShootParams {
    fn default() -> Self {
        ShootParams {
            init: PathBuf::new(),
            t_end: f64::NAN,
            rtol: 1e-9,
            atol: 1e-12,
            collision_eps: 1e-6,
            escape_radius: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct TwobodyParams {
    /// Relative position x1 - x2, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub u: Vec<f64>,
    /// Relative momentum (p1 - p2) / 2, comma separated
    #[arg(long = "Q", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    /// Total momentum p1 + p2, comma separated
    #[arg(long = "P", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    /// Midpoint (x1 + x2) / 2, comma separated [default: origin]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub v: Vec<f64>,
    /// Report the breakdown forecast (the default mode)
    #[arg(long, conflicts_with = "simulate")]
    pub forecast: bool,
    /// Integrate the reduced system instead of forecasting
    #[arg(long)]
    pub simulate: bool,
    /// Final time for --simulate
    #[arg(long = "t-end", default_value_t = 10.0)]
    pub t_end: f64,
}

impl Default for TwobodyParams {
    fn default() -> Self {
        TwobodyParams { u: vec![], q: vec![], p: vec![], v: vec![], forecast: false, simulate: false, t_end: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct SdeParams {
    /// Ambient dimension
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Initial separation
    #[arg(long, default_value_t = 0.1)]
    pub r0: f64,
    /// Euler-Maruyama step
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Simulated time per path
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    /// Number of Monte-Carlo paths
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    /// Master seed; path k uses stream k
    #[arg(long, default_value_t = 42)]
    #[serde(skip_deserializing)]
    pub seed: u64,
    /// Absorption threshold
    #[arg(long = "eps-hit", default_value_t = 1e-4)]
    pub eps_hit: f64,
    /// Also run the three-integral hitting test
    #[arg(long)]
    pub ce: bool,
    /// Upper limit for the integral test [default: 0.4 for log_modified, else 1]
    #[arg(long)]
    pub a: Option<f64>,
    /// Repeat the simulation with eps-hit in {1e-3, 1e-4, 1e-5}
    #[arg(long)]
    pub sensitivity: bool,
}

impl Default for SdeParams {
    fn default() -> Self {
        SdeParams {
            d: 2,
            r0: 0.1,
            dt: 1e-4,
            horizon: 5.0,
            paths: 10_000,
            seed: 42,
            eps_hit: 1e-4,
            ce: false,
            a: None,
            sensitivity: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct LengthParams {
    /// Sampled curve as CSV with columns t, x_i_k (0-based)
    #[arg(long)]
    pub curve: PathBuf,
    /// Also report the collision bound for landmarks i and j
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub pair: Option<Vec<usize>>,
    /// Also report the escape bound for landmark i
    #[arg(long, value_name = "I")]
    pub escape: Option<usize>,
    /// Split every sample interval into this many linear pieces
    #[arg(long, default_value_t = 1)]
    pub refine: usize,
}

impl Default for LengthParams {
    fn default() -> Self {
        LengthParams { curve: PathBuf::new(), pair: None, escape: None, refine: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Params {
    /// Right end of the plotted range
    #[arg(long = "r-max", default_value_t = 4.0)]
    pub r_max: f64,
    /// Number of sample points
    #[arg(long, default_value_t = 401)]
    pub samples: usize,
}

impl Default for Figure1Params {
    fn default() -> Self {
        Figure1Params { r_max: 4.0, samples: 401 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ReproParams {
    /// Momentum scale of the exact solution
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    /// Collision time of the exact solution
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub t_collide: f64,
    /// Rows in the trajectory CSV
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Separation at which the collision event fires
    #[arg(long = "collision-eps", default_value_t = 1e-6)]
    pub collision_eps: f64,
}

impl Default for ReproParams {
    fn default() -> Self {
        ReproParams { b: 1.0, t_collide: 1.0, samples: 201, collision_eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Classify(ClassifyParams),
    Shoot(ShootParams),
    Twobody(TwobodyParams),
    Sde(SdeParams),
    Length(LengthParams),
    Figure1(Figure1Params),
    ReproCollision(ReproParams),
}

/// A fully resolved experiment. Its JSON form is what gets hashed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub command: CommandName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    pub params: Params,
}

impl Job {
    pub fn new(kernel: Option<KernelSpec>, params: Params) -> Result<Self> {
        let command = match &params {
            Params::Classify(_) => CommandName::Classify,
            Params::Shoot(_) => CommandName::Shoot,
            Params::Twobody(_) => CommandName::Twobody,
            Params::Sde(_) => CommandName::Sde,
            Params::Length(_) => CommandName::Length,
            Params::Figure1(_) => CommandName::Figure1,
            Params::ReproCollision(_) => CommandName::ReproCollision,
        };
        if command.needs_kernel() && kernel.is_none() {
            bail!("`{}` needs a kernel", command.as_str());
        }
        if let Some(k) = &kernel {
            k.check()?;
        }
        let job = Job { command, kernel, params };
        job.validate()?;
        Ok(job)
    }

    pub fn kernel(&self) -> Result<&KernelSpec> {
        self.kernel.as_ref().context("no kernel configured")
    }

    fn validate(&self) -> Result<()> {
        match &self.params {
            Params::Classify(p) => positive("a", p.a)?,
            Params::Shoot(p) => {
                existing_file("init", &p.init)?;
                positive("t_end", p.t_end)?;
                positive("rtol", p.rtol)?;
                positive("atol", p.atol)?;
                positive("collision_eps", p.collision_eps)?;
                positive("escape_radius", p.escape_radius)?;
            }
            Params::Twobody(p) => {
                if p.u.is_empty() || p.q.is_empty() || p.p.is_empty() {
                    bail!("twobody needs u, Q and P");
                }
                let d = p.u.len();
                if p.q.len() != d || p.p.len() != d || (!p.v.is_empty() && p.v.len() != d) {
                    bail!("u, Q, P and v must have the same length");
                }
                if p.forecast && p.simulate {
                    bail!("forecast and simulate are mutually exclusive");
                }
                positive("t_end", p.t_end)?;
            }
            Params::Sde(p) => {
                if p.d == 0 {
                    bail!("d must be at least 1");
                }
                positive("r0", p.r0)?;
                positive("dt", p.dt)?;
                positive("horizon", p.horizon)?;
                positive("eps_hit", p.eps_hit)?;
                if p.paths == 0 {
                    bail!("paths must be at least 1");
                }
                if let Some(a) = p.a {
                    positive("a", a)?;
                }
            }
            Params::Length(p) => {
                existing_file("curve", &p.curve)?;
                if p.refine == 0 {
                    bail!("refine must be at least 1");
                }
                if let Some(pair) = &p.pair {
                    if pair.len() != 2 || pair[0] == pair[1] {
                        bail!("pair needs two distinct landmark indices");
                    }
                }
            }
            Params::Figure1(p) => {
                positive("r_max", p.r_max)?;
                if p.samples < 2 {
                    bail!("samples must be at least 2");
                }
            }
            Params::ReproCollision(p) => {
                positive("b", p.b)?;
                positive("T", p.t_collide)?;
                positive("collision_eps", p.collision_eps)?;
                if p.samples < 2 {
                    bail!("samples must be at least 2");
                }
            }
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_nan() {
        bail!("{name} is required");
    }
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

fn existing_file(name: &str, path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        bail!("{name} file is required");
    }
    if !path.is_file() {
        bail!("{name} file {} does not exist", path.display());
    }
    Ok(())
}

/// On-disk experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandName,
    pub kernel: Option<KernelSpec>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    pub classify: Option<ClassifyParams>,
    pub shoot: Option<ShootParams>,
    pub twobody: Option<TwobodyParams>,
    pub sde: Option<SdeParams>,
    pub length: Option<LengthParams>,
    pub figure1: Option<Figure1Params>,
    #[serde(rename = "repro-collision")]
    pub repro_collision: Option<ReproParams>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Resolves the config into a job; relative paths are taken from `base`.
    pub fn into_job(self, base: &Path) -> Result<(Job, OutputSpec)> {
        let tables = [
            (CommandName::Classify, self.classify.is_some()),
            (CommandName::Shoot, self.shoot.is_some()),
            (CommandName::Twobody, self.twobody.is_some()),
            (CommandName::Sde, self.sde.is_some()),
            (CommandName::Length, self.length.is_some()),
            (CommandName::Figure1, self.figure1.is_some()),
            (CommandName::ReproCollision, self.repro_collision.is_some()),
        ];
        for (name, present) in tables {
            if present && name != self.command {
                bail!("table [{}] does not belong to command `{}`", name.as_str(), self.command.as_str());
            }
        }
        if self.seed.is_some() && self.command != CommandName::Sde {
            bail!("seed is only used by `sde`");
        }
        let rebase = |p: &Path| if p.as_os_str().is_empty() || p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let params = match self.command {
            CommandName::Classify => Params::Classify(self.classify.unwrap_or_default()),
            CommandName::Shoot => {
                let mut p = self.shoot.unwrap_or_default();
                p.init = rebase(&p.init);
                Params::Shoot(p)
            }
            CommandName::Twobody => Params::Twobody(self.twobody.unwrap_or_default()),
            CommandName::Sde => {
                let mut p = self.sde.unwrap_or_default();
                p.seed = self.seed.unwrap_or(p.seed);
                Params::Sde(p)
            }
            CommandName::Length => {
                let mut p = self.length.unwrap_or_default();
                p.curve = rebase(&p.curve);
                Params::Length(p)
            }
            CommandName::Figure1 => Params::Figure1(self.figure1.unwrap_or_default()),
            CommandName::ReproCollision => Params::ReproCollision(self.repro_collision.unwrap_or_default()),
        };
        let mut output = self.output;
        output.dir = Some(rebase(output.dir.as_deref().unwrap_or(Path::new("."))));
        Ok((Job::new(self.kernel, params)?, output))
    }
}

/// Parses `--kernel`: a bare name, `name:key=value,...`, or an inline TOML table.
pub fn parse_kernel(s: &str) -> Result<KernelSpec, String> {
    let s = s.trim();
    let text = if s.starts_with('{') {
        format!("kernel = {s}")
    } else {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut t = format!("[kernel]\nvariant = \"{}\"\n", name.trim());
        for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
            t.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
        }
        t
    };
    #[derive(Deserialize)]
    struct Wrap {
        kernel: KernelSpec,
    }
    toml::from_str::<Wrap>(&text).map(|w| w.kernel).map_err(|e| e.message().to_string())
}
