//! Run configuration: a TOML document with a `command`, an `output_path`, a
//! `seed` and one section per parameter group the command needs.

use std::fmt;
use std::path::PathBuf;

use pmelab_core::solver::SolverConfig;
use pmelab_core::Exponent;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Barenblatt,
    SolveDirichlet,
    SolveCauchy,
    SweepDirichlet,
    SweepCauchy,
    CheckEstimates,
    CheckLemmas,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Barenblatt,
        Command::SolveDirichlet,
        Command::SolveCauchy,
        Command::SweepDirichlet,
        Command::SweepCauchy,
        Command::CheckEstimates,
        Command::CheckLemmas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Barenblatt => "barenblatt",
            Command::SolveDirichlet => "solve-dirichlet",
            Command::SolveCauchy => "solve-cauchy",
            Command::SweepDirichlet => "sweep-dirichlet",
            Command::SweepCauchy => "sweep-cauchy",
            Command::CheckEstimates => "check-estimates",
            Command::CheckLemmas => "check-lemmas",
        }
    }

    /// Sections the command reads; every other section is rejected.
    fn sections(self) -> &'static [&'static str] {
        match self {
            Command::Barenblatt => &["barenblatt"],
            Command::SolveDirichlet => &["dirichlet", "solver"],
            Command::SolveCauchy => &["cauchy", "solver"],
            Command::SweepDirichlet => &["dirichlet", "solver", "sweep"],
            Command::SweepCauchy => &["cauchy", "solver", "sweep"],
            Command::CheckEstimates => &["dirichlet", "cauchy", "solver", "estimates"],
            Command::CheckLemmas => &["lemmas"],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarenblattParams {
    pub m: f64,
    pub n: usize,
    pub t: f64,
    pub samples: usize,
    /// Sampling radius; defaults to 1.5 times the front (PME) or 10 (FDE).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

/// Initial data on the interval, as a function of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialShape {
    /// `amplitude · cos(π ξ / 2)` with `ξ ∈ [-1, 1]` the rescaled coordinate.
    Cosine,
    /// `amplitude · exp(-(x - center)^2 / width^2)`.
    Gaussian,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub m: f64,
    pub a: f64,
    pub b: f64,
    pub cells: usize,
    pub final_time: f64,
    pub initial: InitialShape,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Constant boundary value of `u^m`.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyParams {
    pub m: f64,
    pub n: usize,
    pub r_max: f64,
    pub cells: usize,
    pub mass: f64,
    /// Barenblatt initial data at this time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_time: Option<f64>,
    /// Indicator of the innermost cells instead of Barenblatt data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator_cells: Option<usize>,
    pub final_time: f64,
    pub truncation_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub deltas: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub refine: usize,
    pub rate_branch: bool,
    /// Error window radius for Cauchy sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub rho: f64,
    pub t0: f64,
    pub q: f64,
    pub window: f64,
    pub cutoff_radius: f64,
    pub oleinik_deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub output_path: PathBuf,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barenblatt: Option<BarenblattParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cauchy: Option<CauchyParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<EstimateParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaParams>,
}

/// Collects field-level errors while reading one section.
struct Reader<'a> {
    name: &'a str,
    table: &'a Table,
    used: Vec<&'static str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Reader<'a> {
    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{}.{key}: {msg}", self.name));
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.get(key)
    }

    fn opt_f64(&mut self, key: &'static str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.fail(key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn f64(&mut self, key: &'static str) -> f64 {
        let present = self.table.contains_key(key);
        match self.opt_f64(key) {
            Some(v) => v,
            None => {
                if !present {
                    self.fail(key, "missing");
                }
                f64::NAN
            }
        }
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> f64 {
        if self.table.contains_key(key) {
            self.f64(key)
        } else {
            self.used.push(key);
            default
        }
    }

    fn opt_usize(&mut self, key: &'static str) -> Option<usize> {
        match self.raw(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as usize),
            other => {
                self.fail(key, format!("expected a nonnegative integer, found {other}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &'static str) -> usize {
        let present = self.table.contains_key(key);
        self.opt_usize(key).unwrap_or_else(|| {
            if !present {
                self.fail(key, "missing");
            }
            0
        })
    }

    fn bool_or(&mut self, key: &'static str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                self.fail(key, format!("expected a boolean, found {}", other.type_str()));
                default
            }
        }
    }

    fn f64_list(&mut self, key: &'static str) -> Vec<f64> {
        match self.raw(key) {
            None => {
                self.fail(key, "missing");
                Vec::new()
            }
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(v) => out.push(*v),
                        Value::Integer(v) => out.push(*v as f64),
                        other => self.fail(key, format!("expected numbers, found {other}")),
                    }
                }
                out
            }
            Some(other) => {
                self.fail(key, format!("expected an array, found {}", other.type_str()));
                Vec::new()
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.raw(key) {
            None => {
                self.fail(key, "missing");
                None
            }
            Some(Value::String(s)) => Some(s),
            Some(other) => {
                self.fail(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn finish(self) {
        for key in self.table.keys() {
            if !self.used.contains(&key.as_str()) {
                self.errors.push(format!("{}.{key}: unknown key", self.name));
            }
        }
    }
}

fn exponent_check(name: &str, m: f64, n: usize, errors: &mut Vec<String>) {
    if m.is_nan() || n == 0 {
        return;
    }
    if let Err(e) = Exponent::new(m, n) {
        errors.push(format!("{name}.m: {e}"));
    }
}

fn positive(name: &str, key: &str, v: f64, errors: &mut Vec<String>) {
    if !v.is_nan() && !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name}.{key}: must be positive, got {v}"));
    }
}

fn read_solver(t: &Table, errors: &mut Vec<String>) -> SolverConfig {
    let d = SolverConfig::default();
    let mut r = Reader {
        name: "solver",
        table: t,
        used: Vec::new(),
        errors,
    };
    let cfg = SolverConfig {
        dt: r.f64("dt"),
        newton_tol: r.f64_or("newton_tol", d.newton_tol),
        newton_max_iters: r.opt_usize("newton_max_iters").unwrap_or(d.newton_max_iters),
        jacobian_floor: r.f64_or("jacobian_floor", d.jacobian_floor),
        positivity_clip_tol: r.f64_or("positivity_clip_tol", d.positivity_clip_tol),
        max_halvings: r.opt_usize("max_halvings").unwrap_or(d.max_halvings),
        store_every: r.opt_usize("store_every").unwrap_or(d.store_every),
    };
    r.finish();
    if !cfg.dt.is_nan() {
        if let Err(e) = cfg.validate() {
            errors.push(format!("solver: {e}"));
        }
    }
    cfg
}

fn read_barenblatt(t: &Table, errors: &mut Vec<String>) -> BarenblattParams {
    let mut r = Reader {
        name: "barenblatt",
        table: t,
        used: Vec::new(),
        errors,
    };
    let p = BarenblattParams {
        m: r.f64("m"),
        n: r.usize("n"),
        t: r.f64("t"),
        samples: r.usize("samples"),
        r_max: r.opt_f64("r_max"),
    };
    r.finish();
    exponent_check("barenblatt", p.m, p.n, errors);
    if p.m == 1.0 {
        errors.push("barenblatt.m: the source solution is defined for m != 1".into());
    }
    positive("barenblatt", "t", p.t, errors);
    if p.samples < 2 {
        errors.push("barenblatt.samples: need at least 2".into());
    }
    if let Some(r) = p.r_max {
        positive("barenblatt", "r_max", r, errors);
    }
    p
}

fn read_dirichlet(t: &Table, errors: &mut Vec<String>) -> DirichletParams {
    let mut r = Reader {
        name: "dirichlet",
        table: t,
        used: Vec::new(),
        errors,
    };
    let m = r.f64("m");
    let a = r.f64("a");
    let b = r.f64("b");
    let cells = r.usize("cells");
    let final_time = r.f64("final_time");
    let initial = match r.string("initial") {
        Some("cosine") => InitialShape::Cosine,
        Some("gaussian") => InitialShape::Gaussian,
        Some("constant") => InitialShape::Constant,
        Some(other) => {
            r.fail("initial", format!("unknown shape {other:?} (cosine, gaussian, constant)"));
            InitialShape::Cosine
        }
        None => InitialShape::Cosine,
    };
    let p = DirichletParams {
        m,
        a,
        b,
        cells,
        final_time,
        initial,
        amplitude: r.f64_or("amplitude", 1.0),
        center: r.f64_or("center", 0.0),
        width: r.f64_or("width", 0.25),
        boundary: r.f64_or("boundary", 0.0),
    };
    r.finish();
    exponent_check("dirichlet", p.m, 1, errors);
    if !(p.a < p.b) && !p.a.is_nan() && !p.b.is_nan() {
        errors.push(format!("dirichlet: need a < b, got [{}, {}]", p.a, p.b));
    }
    if p.cells < 2 {
        errors.push("dirichlet.cells: need at least 2".into());
    }
    positive("dirichlet", "final_time", p.final_time, errors);
    positive("dirichlet", "width", p.width, errors);
    if p.amplitude < 0.0 || p.boundary < 0.0 {
        errors.push("dirichlet: amplitude and boundary must be nonnegative".into());
    }
    p
}

fn read_cauchy(t: &Table, errors: &mut Vec<String>) -> CauchyParams {
    let mut r = Reader {
        name: "cauchy",
        table: t,
        used: Vec::new(),
        errors,
    };
    let p = CauchyParams {
        m: r.f64("m"),
        n: r.usize("n"),
        r_max: r.f64("r_max"),
        cells: r.usize("cells"),
        mass: r.f64_or("mass", 1.0),
        start_time: r.opt_f64("start_time"),
        indicator_cells: r.opt_usize("indicator_cells"),
        final_time: r.f64("final_time"),
        truncation_tol: r.f64_or("truncation_tol", 1e-10),
    };
    r.finish();
    exponent_check("cauchy", p.m, p.n, errors);
    positive("cauchy", "r_max", p.r_max, errors);
    positive("cauchy", "mass", p.mass, errors);
    positive("cauchy", "final_time", p.final_time, errors);
    positive("cauchy", "truncation_tol", p.truncation_tol, errors);
    if p.cells < 2 {
        errors.push("cauchy.cells: need at least 2".into());
    }
    match (p.start_time, p.indicator_cells) {
        (Some(s), None) => {
            positive("cauchy", "start_time", s, errors);
            if s >= p.final_time {
                errors.push("cauchy.start_time: must be below final_time".into());
            }
        }
        (None, Some(c)) => {
            if c == 0 || c > p.cells {
                errors.push(format!("cauchy.indicator_cells: must lie in 1..={}", p.cells));
            }
        }
        _ => errors.push("cauchy: give exactly one of start_time, indicator_cells".into()),
    }
    p
}

fn read_sweep(t: &Table, errors: &mut Vec<String>) -> SweepParams {
    let mut r = Reader {
        name: "sweep",
        table: t,
        used: Vec::new(),
        errors,
    };
    let p = SweepParams {
        deltas: r.f64_list("deltas"),
        q: r.f64_list("q"),
        s: r.f64_list("s"),
        refine: r.opt_usize("refine").unwrap_or(2),
        rate_branch: r.bool_or("rate_branch", false),
        window: r.opt_f64("window"),
    };
    r.finish();
    if p.deltas.is_empty() {
        errors.push("sweep.deltas: need at least one delta".into());
    }
    if p.q.is_empty() || p.q.len() != p.s.len() {
        errors.push("sweep: q and s must be nonempty and of equal length".into());
    }
    if p.refine == 0 {
        errors.push("sweep.refine: must be positive".into());
    }
    p
}

fn read_estimates(t: &Table, errors: &mut Vec<String>) -> EstimateParams {
    let mut r = Reader {
        name: "estimates",
        table: t,
        used: Vec::new(),
        errors,
    };
    let p = EstimateParams {
        rho: r.f64("rho"),
        t0: r.f64("t0"),
        q: r.f64("q"),
        window: r.f64("window"),
        cutoff_radius: r.f64("cutoff_radius"),
        oleinik_deltas: r.f64_list("oleinik_deltas"),
    };
    r.finish();
    positive("estimates", "rho", p.rho, errors);
    positive("estimates", "cutoff_radius", p.cutoff_radius, errors);
    if p.oleinik_deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        errors.push("estimates.oleinik_deltas: every delta must lie in (0, 1)".into());
    }
    p
}

fn read_lemmas(t: &Table, errors: &mut Vec<String>) -> LemmaParams {
    let mut r = Reader {
        name: "lemmas",
        table: t,
        used: Vec::new(),
        errors,
    };
    let p = LemmaParams {
        samples: r.usize("samples"),
    };
    r.finish();
    if p.samples == 0 {
        errors.push("lemmas.samples: must be positive".into());
    }
    p
}

/// Parse and validate a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::ConfigInvalid(vec![format!("syntax: {}", e.message())]))?;
    let mut errors = Vec::new();

    let command = match root.get("command") {
        None => {
            errors.push("command: missing".to_string());
            None
        }
        Some(Value::String(s)) => {
            let found = Command::ALL.into_iter().find(|c| c.name() == s);
            if found.is_none() {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                errors.push(format!("command: unknown {s:?} (expected one of {})", names.join(", ")));
            }
            found
        }
        Some(other) => {
            errors.push(format!("command: expected a string, found {}", other.type_str()));
            None
        }
    };
    let output_path = match root.get("output_path") {
        None => {
            errors.push("output_path: missing".to_string());
            PathBuf::new()
        }
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(_) => {
            errors.push("output_path: expected a nonempty string".to_string());
            PathBuf::new()
        }
    };
    let seed = match root.get("seed") {
        None => 0,
        Some(Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(other) => {
            errors.push(format!("seed: expected a nonnegative integer, found {other}"));
            0
        }
    };

    let mut cfg = RunConfig {
        command: command.unwrap_or(Command::Barenblatt),
        output_path,
        seed,
        solver: None,
        barenblatt: None,
        dirichlet: None,
        cauchy: None,
        sweep: None,
        estimates: None,
        lemmas: None,
    };
    for (key, value) in &root {
        if matches!(key.as_str(), "command" | "output_path" | "seed") {
            continue;
        }
        let Value::Table(t) = value else {
            errors.push(format!("{key}: unknown key"));
            continue;
        };
        if let Some(c) = command {
            if !c.sections().contains(&key.as_str()) {
                errors.push(format!("{key}: section not used by {c}"));
                continue;
            }
        }
        match key.as_str() {
            "solver" => cfg.solver = Some(read_solver(t, &mut errors)),
            "barenblatt" => cfg.barenblatt = Some(read_barenblatt(t, &mut errors)),
            "dirichlet" => cfg.dirichlet = Some(read_dirichlet(t, &mut errors)),
            "cauchy" => cfg.cauchy = Some(read_cauchy(t, &mut errors)),
            "sweep" => cfg.sweep = Some(read_sweep(t, &mut errors)),
            "estimates" => cfg.estimates = Some(read_estimates(t, &mut errors)),
            "lemmas" => cfg.lemmas = Some(read_lemmas(t, &mut errors)),
            _ => errors.push(format!("{key}: unknown section")),
        }
    }
    if let Some(c) = command {
        for section in c.sections() {
            if !root.contains_key(*section) {
                errors.push(format!("{section}: section required by {c} is missing"));
            }
        }
        if c == Command::CheckEstimates {
            if let Some(s) = &cfg.solver {
                if s.store_every != 1 {
                    errors.push("solver.store_every: estimate runs must store every step".into());
                }
            }
        }
        if c == Command::SweepCauchy {
            if let Some(s) = &cfg.sweep {
                if s.window.is_none() {
                    errors.push("sweep.window: required for Cauchy sweeps".into());
                }
            }
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::ConfigInvalid(errors))
    }
}

/// Inverse of `parse_config` on valid configurations.
pub fn serialize_config(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("configuration is representable in TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "barenblatt"
output_path = "out/profile.csv"

[barenblatt]
m = 2.0
n = 1
t = 1.0
samples = 100
"#;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(CliError::ConfigInvalid(e)) => e,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn minimal_barenblatt_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Barenblatt);
        assert_eq!(cfg.barenblatt.as_ref().unwrap().samples, 100);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn subcritical_exponent_is_reported() {
        let text = MINIMAL.replace("m = 2.0", "m = 0.2").replace("n = 1", "n = 3");
        let e = errors(&text);
        assert_eq!(e.len(), 1, "{e:?}");
        assert!(e[0].contains("barenblatt.m") && e[0].contains("critical"), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = r#"
command = "solve-dirichlet"
[dirichlet]
m = "two"
a = 0.0
b = -1.0
cells = 1
final_time = 1.0
initial = "square"
colour = 3
"#;
        let e = errors(text);
        let joined = e.join("\n");
        for needle in ["output_path", "dirichlet.m", "need a < b", "dirichlet.cells", "square", "colour", "solver"] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
    }

    #[test]
    fn sections_must_match_command() {
        let text = format!("{MINIMAL}\n[lemmas]\nsamples = 3\n");
        assert!(errors(&text).iter().any(|e| e.contains("lemmas: section not used")));
    }

    #[test]
    fn round_trip() {
        let text = r#"
command = "sweep-cauchy"
output_path = "sweep.csv"
seed = 7
[cauchy]
m = 2
n = 1
r_max = 3.0
cells = 60
start_time = 0.5
final_time = 1.0
[solver]
dt = 0.01
[sweep]
deltas = [0.1, -0.1]
q = [2.0]
s = [1.5]
window = 2.0
"#;
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, again);
    }
}
