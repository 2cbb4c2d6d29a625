//! Scenario configuration: a TOML document of `key = value` lines under `[section]` headers.
//!
//! ```toml
//! kind = "trapped-kinetic"
//!
//! [potential.normal]
//! profile = "wall"        # flat | parabolic | wall | tabulated
//! w_m = 4.0
//! z_m = 0.5
//!
//! [potential.tangential]
//! profile = "harmonic"    # flat | harmonic | cosine
//! u_m = 1.0
//! delta = 0.05
//!
//! [grid]
//! nx = 64
//! dt = "auto"             # or a number
//!
//! [physics]
//! tau_ms = 1.0
//! epsilon = 0.1
//!
//! [output]
//! directory = "out"
//! snapshot_every = 100
//! ```
//!
//! Syntax errors stop parsing with the offending line. Semantic checks run over the whole
//! document and report every violation together.

use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::diffusion_solvers::TimeScheme;
use crate::error::{Error, Result};
use crate::kinetic_solvers::{CouplingRegime, TransportScheme, XBoundary};
use crate::potential_geometry::{NormalPotential, TangentialPotential};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Scenario selected by the top-level `kind` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Trapped surface kinetics.
    TrappedKinetic,
    /// Trapped and free groups with an ambient boundary.
    TwoGroup,
    /// Two coupled channel walls.
    Channel,
    /// Homogenized mesoscopic model.
    Mesoscopic,
    /// Fine model with the tangential potential resolved.
    FineTangential,
    /// Isothermal drift-diffusion.
    DiffusionIso,
    /// Non-isothermal drift-diffusion.
    DiffusionNoniso,
    /// Two diffusing layers with exchange.
    CoupledDiffusion,
    /// Coefficient table.
    Coeffs,
    /// Kinetic against diffusion as `eps -> 0`.
    StudyDiffusionLimit,
    /// Fine against mesoscopic as `delta -> 0`.
    StudyHomogenization,
    /// Channel coupling regimes.
    StudyCoupling,
}

impl ScenarioKind {
    /// Every kind, in documentation order.
    pub const ALL: [ScenarioKind; 12] = [
        ScenarioKind::TrappedKinetic,
        ScenarioKind::TwoGroup,
        ScenarioKind::Channel,
        ScenarioKind::Mesoscopic,
        ScenarioKind::FineTangential,
        ScenarioKind::DiffusionIso,
        ScenarioKind::DiffusionNoniso,
        ScenarioKind::CoupledDiffusion,
        ScenarioKind::Coeffs,
        ScenarioKind::StudyDiffusionLimit,
        ScenarioKind::StudyHomogenization,
        ScenarioKind::StudyCoupling,
    ];

    /// Name used in configuration files.
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TrappedKinetic => "trapped-kinetic",
            ScenarioKind::TwoGroup => "two-group",
            ScenarioKind::Channel => "channel",
            ScenarioKind::Mesoscopic => "mesoscopic",
            ScenarioKind::FineTangential => "fine-tangential",
            ScenarioKind::DiffusionIso => "diffusion-iso",
            ScenarioKind::DiffusionNoniso => "diffusion-noniso",
            ScenarioKind::CoupledDiffusion => "coupled-diffusion",
            ScenarioKind::Coeffs => "coeffs",
            ScenarioKind::StudyDiffusionLimit => "study-diffusion-limit",
            ScenarioKind::StudyHomogenization => "study-homogenization",
            ScenarioKind::StudyCoupling => "study-coupling",
        }
    }

    /// Looks a kind up by name.
    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds that need `[potential.normal]`.
    pub fn needs_normal(self) -> bool {
        !matches!(self, ScenarioKind::DiffusionIso)
    }

    /// Kinds that need `[potential.tangential]`.
    pub fn needs_tangential(self) -> bool {
        matches!(
            self,
            ScenarioKind::Mesoscopic | ScenarioKind::FineTangential | ScenarioKind::StudyHomogenization
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normal potential descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalSpec {
    /// No potential.
    Flat,
    /// Piecewise parabola.
    Parabolic {
        /// Depth.
        w_m: f64,
        /// Minimum.
        z_m: f64,
    },
    /// Inverse-square wall with a parabolic attractive side.
    Wall {
        /// Depth.
        w_m: f64,
        /// Minimum.
        z_m: f64,
    },
    /// Monotone cubic through a table.
    Tabulated {
        /// Nodes.
        z: Vec<f64>,
        /// Values.
        w: Vec<f64>,
    },
}

impl NormalSpec {
    /// Builds the potential.
    pub fn build(&self) -> Result<NormalPotential> {
        match self {
            NormalSpec::Flat => Ok(NormalPotential::flat()),
            NormalSpec::Parabolic { w_m, z_m } => NormalPotential::piecewise_parabolic(*w_m, *z_m),
            NormalSpec::Wall { w_m, z_m } => NormalPotential::inverse_square_wall(*w_m, *z_m),
            NormalSpec::Tabulated { z, w } => NormalPotential::tabulated(z.clone(), w.clone()),
        }
    }

    /// Same profile family with depth `w_m` (tables and the flat layer are returned unchanged).
    pub fn with_depth(&self, w_m: f64) -> NormalSpec {
        match self {
            NormalSpec::Parabolic { z_m, .. } => NormalSpec::Parabolic { w_m, z_m: *z_m },
            NormalSpec::Wall { z_m, .. } => NormalSpec::Wall { w_m, z_m: *z_m },
            other => other.clone(),
        }
    }

    /// Depth and minimum, with `(0, 0.5)` for the flat layer and the table's own values.
    pub fn depth_and_minimum(&self) -> Result<(f64, f64)> {
        let p = self.build()?;
        Ok((p.w_m, p.z_m))
    }
}

/// Tangential potential descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentialSpec {
    /// No potential.
    Flat {
        /// Half-period.
        delta: f64,
    },
    /// Harmonic wells.
    Harmonic {
        /// Barrier.
        u_m: f64,
        /// Half-period.
        delta: f64,
    },
    /// Cosine profile.
    Cosine {
        /// Barrier.
        u_m: f64,
        /// Half-period.
        delta: f64,
    },
}

impl TangentialSpec {
    /// Builds the potential.
    pub fn build(&self) -> Result<TangentialPotential> {
        match self {
            TangentialSpec::Flat { delta } => Ok(TangentialPotential::flat(*delta)),
            TangentialSpec::Harmonic { u_m, delta } => TangentialPotential::harmonic(*u_m, *delta),
            TangentialSpec::Cosine { u_m, delta } => TangentialPotential::cosine(*u_m, *delta),
        }
    }

    /// Barrier height.
    pub fn u_m(&self) -> f64 {
        match self {
            TangentialSpec::Flat { .. } => 0.0,
            TangentialSpec::Harmonic { u_m, .. } | TangentialSpec::Cosine { u_m, .. } => *u_m,
        }
    }

    /// Half-period.
    pub fn delta(&self) -> f64 {
        match self {
            TangentialSpec::Flat { delta } | TangentialSpec::Harmonic { delta, .. } | TangentialSpec::Cosine { delta, .. } => {
                *delta
            }
        }
    }
}

/// Time step selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// Derived from the stability bound of the chosen solver.
    Auto,
    /// Given value.
    Fixed(f64),
}

/// `[grid]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Left end of the `x` interval.
    pub x_min: f64,
    /// Interval length.
    pub length: f64,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `v_x` cells.
    pub nv: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
    /// Number of `e_x` cells.
    pub nex: usize,
    /// `v_x` cutoff.
    pub v_max: f64,
    /// `e_z` cutoff.
    pub e_max: f64,
    /// `e_x` cutoff.
    pub ex_max: f64,
    /// Time step.
    pub dt: StepSize,
    /// Final time; each scenario has its own default.
    pub t_final: Option<f64>,
    /// `x` boundary.
    pub boundary: XBoundary,
    /// Transport reconstruction.
    pub scheme: TransportScheme,
    /// Diffusion time integrator.
    pub time_scheme: TimeScheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            length: 1.0,
            nx: 64,
            nv: 16,
            ne: 16,
            nex: 12,
            v_max: 6.0,
            e_max: 6.0,
            ex_max: 4.0,
            dt: StepSize::Auto,
            t_final: None,
            boundary: XBoundary::Periodic,
            scheme: TransportScheme::Upwind,
            time_scheme: TimeScheme::Rk2,
        }
    }
}

/// Ambient boundary of the two-group model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmbientMode {
    /// No exchange with the ambient gas.
    Closed,
    /// Maxwellian ambient at the given density.
    Maxwellian(f64),
}

/// `[physics]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    /// Relaxation time (dimensionless).
    pub tau_ms: f64,
    /// Scale separation `eps`.
    pub epsilon: f64,
    /// Secondary scale `eps0`.
    pub epsilon0: f64,
    /// Amplitude `A` of the initial density `1 + A exp(-(x - x_c)^2 / (2 s^2))`.
    pub initial_amplitude: f64,
    /// Width `s` of the initial bump.
    pub initial_width: f64,
    /// Amplitude `a` of `U(x) = a cos(2 pi (x - x_min) / L)`.
    pub force_amplitude: f64,
    /// Amplitude `b` of `T(x) = 1 + b sin(2 pi (x - x_min) / L)`.
    pub temperature_amplitude: f64,
    /// Ambient boundary of the two-group model.
    pub ambient: AmbientMode,
    /// Coupling regime of the channel model.
    pub regime: CouplingRegime,
    /// Density multiplier of layer 1.
    pub n1: f64,
    /// Density multiplier of layer 2.
    pub n2: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            tau_ms: 1.0,
            epsilon: 1.0,
            epsilon0: 1.0,
            initial_amplitude: 1.0,
            initial_width: 0.1,
            force_amplitude: 0.0,
            temperature_amplitude: 0.0,
            ambient: AmbientMode::Closed,
            regime: CouplingRegime::Moderate,
            n1: 1.5,
            n2: 0.5,
        }
    }
}

/// `[sweep]` section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepConfig {
    /// Swept values (`eps`, `delta` or `W_m` depending on the kind).
    pub values: Vec<f64>,
    /// Regimes of the coupling study.
    pub regimes: Vec<CouplingRegime>,
}

/// `[output]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Output directory.
    pub directory: PathBuf,
    /// Steps between snapshots; zero writes only the first and last.
    pub snapshot_every: usize,
    /// Also write binary phase-space dumps.
    pub binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            snapshot_every: 0,
            binary: false,
        }
    }
}

/// `[units]` section: physical reference values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitsConfig {
    /// Temperature in K.
    pub temperature_k: f64,
    /// Molecular mass in kg.
    pub mass_kg: f64,
    /// Reference length in m.
    pub length_m: f64,
    /// Relaxation time in s.
    pub tau_ms_s: f64,
}

impl UnitsConfig {
    /// Thermal speed `v* = sqrt(2 k T / m)` in m/s.
    pub fn thermal_speed(&self) -> f64 {
        (2.0 * BOLTZMANN * self.temperature_k / self.mass_kg).sqrt()
    }

    /// Dimensionless relaxation time `tau_ms v* / L`.
    pub fn dimensionless_tau(&self) -> f64 {
        self.tau_ms_s * self.thermal_speed() / self.length_m
    }
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Scenario kind.
    pub kind: ScenarioKind,
    /// Normal potential.
    pub normal: Option<NormalSpec>,
    /// Tangential potential.
    pub tangential: Option<TangentialSpec>,
    /// Grid.
    pub grid: GridConfig,
    /// Physics.
    pub physics: PhysicsConfig,
    /// Sweep.
    pub sweep: SweepConfig,
    /// Output.
    pub output: OutputConfig,
    /// Physical units, when given.
    pub units: Option<UnitsConfig>,
}

/// Every semantic violation found in one document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Violations(pub Vec<String>);

impl Violations {
    fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Violations {}

impl From<Violations> for Error {
    fn from(v: Violations) -> Self {
        Error::Validation(v.0)
    }
}

/// Typed reads from one section, recording violations and the keys consumed.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, table: Option<&'a Table>) -> Self {
        Self {
            name,
            table,
            used: Vec::new(),
        }
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.used.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn label(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn f64(&mut self, key: &'static str, v: &mut Violations) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                v.push(format!("{} must be a number, got {}", self.label(key), other.type_str()));
                None
            }
        }
    }

    fn usize(&mut self, key: &'static str, v: &mut Violations) -> Option<usize> {
        match self.raw(key)? {
            Value::Integer(i) if *i > 0 => Some(*i as usize),
            Value::Integer(i) => {
                v.push(format!("{} must be a positive integer, got {i}", self.label(key)));
                None
            }
            other => {
                v.push(format!("{} must be an integer, got {}", self.label(key), other.type_str()));
                None
            }
        }
    }

    fn str(&mut self, key: &'static str, v: &mut Violations) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                v.push(format!("{} must be a string, got {}", self.label(key), other.type_str()));
                None
            }
        }
    }

    fn bool(&mut self, key: &'static str, v: &mut Violations) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                v.push(format!("{} must be true or false, got {}", self.label(key), other.type_str()));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &'static str, v: &mut Violations) -> Option<Vec<f64>> {
        let label = self.label(key);
        match self.raw(key)? {
            Value::Array(a) => {
                let mut out = Vec::with_capacity(a.len());
                for x in a {
                    match x {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            v.push(format!("{label} must hold numbers, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                v.push(format!("{label} must be an array, got {}", other.type_str()));
                None
            }
        }
    }

    fn str_list(&mut self, key: &'static str, v: &mut Violations) -> Option<Vec<&'a str>> {
        let label = self.label(key);
        match self.raw(key)? {
            Value::Array(a) => {
                let mut out = Vec::with_capacity(a.len());
                for x in a {
                    match x {
                        Value::String(s) => out.push(s.as_str()),
                        other => {
                            v.push(format!("{label} must hold strings, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                v.push(format!("{label} must be an array, got {}", other.type_str()));
                None
            }
        }
    }

    /// Reports keys that no read asked for.
    fn finish(self, v: &mut Violations, nested: &[&str]) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(&key.as_str()) && !nested.contains(&key.as_str()) {
                    v.push(format!("unknown key {}", self.label(key)));
                }
            }
        }
    }
}

fn sub_table<'a>(t: &'a Table, key: &str, v: &mut Violations, label: &str) -> Option<&'a Table> {
    match t.get(key) {
        Some(Value::Table(s)) => Some(s),
        Some(other) => {
            v.push(format!("{label} must be a section, got {}", other.type_str()));
            None
        }
        None => None,
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn regime_from(s: &str) -> Option<CouplingRegime> {
    match s {
        "strong" => Some(CouplingRegime::Strong),
        "moderate" => Some(CouplingRegime::Moderate),
        "weak" => Some(CouplingRegime::Weak),
        _ => None,
    }
}

/// Parses and validates a configuration held in memory.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut v = Violations::default();

    let mut top = Section::new("", Some(&doc));
    let kind = match top.str("kind", &mut v) {
        Some(s) => match ScenarioKind::from_name(s) {
            Some(k) => Some(k),
            None => {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                v.push(format!("kind \"{s}\" is not one of {}", names.join(", ")));
                None
            }
        },
        None => {
            if !v.0.iter().any(|m| m.starts_with("kind ")) {
                v.push("missing key kind");
            }
            None
        }
    };
    top.finish(&mut v, &["potential", "grid", "physics", "sweep", "output", "units"]);

    let potential = sub_table(&doc, "potential", &mut v, "potential");
    if let Some(p) = potential {
        for key in p.keys() {
            if key != "normal" && key != "tangential" {
                v.push(format!("unknown section potential.{key}"));
            }
        }
    }
    let normal_t = potential.and_then(|p| sub_table(p, "normal", &mut v, "potential.normal"));
    let tangential_t = potential.and_then(|p| sub_table(p, "tangential", &mut v, "potential.tangential"));

    let normal = parse_normal(normal_t, &mut v);
    let tangential = parse_tangential(tangential_t, &mut v);

    let grid = parse_grid(sub_table(&doc, "grid", &mut v, "grid"), &mut v);
    let mut physics = parse_physics(sub_table(&doc, "physics", &mut v, "physics"), &mut v);
    let sweep = parse_sweep(sub_table(&doc, "sweep", &mut v, "sweep"), &mut v);
    let output = parse_output(sub_table(&doc, "output", &mut v, "output"), &mut v);
    let units = parse_units(sub_table(&doc, "units", &mut v, "units"), &mut v);
    if let Some(u) = &units {
        physics.tau_ms = u.dimensionless_tau();
    }

    if let Some(k) = kind {
        check_kind(
            k,
            normal_t.is_some(),
            tangential_t.is_some(),
            normal.as_ref(),
            tangential.as_ref(),
            &grid,
            &mut v,
        );
    }

    if !v.0.is_empty() {
        return Err(v.into());
    }
    Ok(ScenarioConfig {
        kind: kind.expect("kind is set when no violation was recorded"),
        normal,
        tangential,
        grid,
        physics,
        sweep,
        output,
        units,
    })
}

/// Section and profile requirements of one kind.
fn check_kind(
    k: ScenarioKind,
    has_normal: bool,
    has_tangential: bool,
    normal: Option<&NormalSpec>,
    tangential: Option<&TangentialSpec>,
    grid: &GridConfig,
    v: &mut Violations,
) {
    if k.needs_normal() && !has_normal {
        v.push(format!("kind {k} requires section [potential.normal]"));
    }
    if k.needs_tangential() && !has_tangential {
        v.push(format!("kind {k} requires section [potential.tangential]"));
    }
    let study = matches!(
        k,
        ScenarioKind::StudyDiffusionLimit | ScenarioKind::StudyHomogenization | ScenarioKind::StudyCoupling
    );
    if study && !matches!(normal, None | Some(NormalSpec::Wall { .. })) {
        v.push(format!("kind {k} runs on the inverse-square wall: potential.normal.profile must be wall"));
    }
    if k == ScenarioKind::CoupledDiffusion && matches!(normal, Some(NormalSpec::Flat)) {
        v.push(format!("kind {k} needs a well: potential.normal.profile must not be flat"));
    }
    if k == ScenarioKind::StudyHomogenization && matches!(tangential, Some(TangentialSpec::Cosine { .. })) {
        v.push(format!("kind {k} uses harmonic wells: potential.tangential.profile must be harmonic or flat"));
    }
    if k == ScenarioKind::Channel && grid.scheme == TransportScheme::Muscl {
        v.push("grid.scheme must be upwind for kind channel");
    }
}

impl ScenarioConfig {
    /// The same configuration run as `kind`, with the requirements of that kind checked.
    pub fn with_kind(&self, kind: ScenarioKind) -> Result<ScenarioConfig> {
        let mut v = Violations::default();
        check_kind(
            kind,
            self.normal.is_some(),
            self.tangential.is_some(),
            self.normal.as_ref(),
            self.tangential.as_ref(),
            &self.grid,
            &mut v,
        );
        if !v.0.is_empty() {
            return Err(v.into());
        }
        Ok(ScenarioConfig {
            kind,
            ..self.clone()
        })
    }
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config_str(&text)
}

fn positive(x: Option<f64>, label: &str, v: &mut Violations) -> Option<f64> {
    match x {
        Some(a) if a > 0.0 && a.is_finite() => Some(a),
        Some(a) => {
            v.push(format!("{label} must be positive, got {a}"));
            None
        }
        None => None,
    }
}

fn parse_normal(t: Option<&Table>, v: &mut Violations) -> Option<NormalSpec> {
    let mut s = Section::new("potential.normal", t);
    if !s.present() {
        return None;
    }
    let profile = s.str("profile", v).unwrap_or("wall");
    let w_m = s.f64("w_m", v);
    let z_m = s.f64("z_m", v).unwrap_or(0.5);
    let z = s.f64_list("z", v);
    let w = s.f64_list("w", v);
    let out = match profile {
        "flat" => Some(NormalSpec::Flat),
        "parabolic" | "wall" => {
            let w_m = match w_m {
                Some(w) if w > 0.0 && w.is_finite() => Some(w),
                Some(w) => {
                    v.push(format!("potential.normal.w_m must be > 0, got {w}"));
                    None
                }
                None => {
                    v.push("missing key potential.normal.w_m");
                    None
                }
            };
            if !(z_m > 0.0 && z_m < 1.0) {
                v.push(format!("potential.normal.z_m must lie in (0, 1), got {z_m}"));
            }
            w_m.map(|w_m| {
                if profile == "wall" {
                    NormalSpec::Wall { w_m, z_m }
                } else {
                    NormalSpec::Parabolic { w_m, z_m }
                }
            })
        }
        "tabulated" => match (z, w) {
            (Some(z), Some(w)) if z.len() == w.len() && z.len() >= 3 => Some(NormalSpec::Tabulated { z, w }),
            (Some(_), Some(_)) => {
                v.push("potential.normal.z and potential.normal.w must have the same length (at least 3)");
                None
            }
            _ => {
                v.push("tabulated potential.normal needs arrays z and w");
                None
            }
        },
        other => {
            v.push(format!(
                "potential.normal.profile \"{other}\" is not one of flat, parabolic, wall, tabulated"
            ));
            None
        }
    };
    s.finish(v, &[]);
    if let Some(spec) = &out {
        if let Err(e) = spec.build() {
            v.push(format!("potential.normal: {e}"));
            return None;
        }
    }
    out
}

fn parse_tangential(t: Option<&Table>, v: &mut Violations) -> Option<TangentialSpec> {
    let mut s = Section::new("potential.tangential", t);
    if !s.present() {
        return None;
    }
    let profile = s.str("profile", v).unwrap_or("harmonic");
    let u_m = s.f64("u_m", v);
    let delta = positive(s.f64("delta", v), "potential.tangential.delta", v).unwrap_or(0.05);
    let barrier = |v: &mut Violations| match u_m {
        Some(u) if u > 0.0 && u.is_finite() => Some(u),
        Some(u) => {
            v.push(format!("potential.tangential.u_m must be > 0, got {u}"));
            None
        }
        None => {
            v.push("missing key potential.tangential.u_m");
            None
        }
    };
    let out = match profile {
        "flat" => Some(TangentialSpec::Flat { delta }),
        "harmonic" => barrier(v).map(|u_m| TangentialSpec::Harmonic { u_m, delta }),
        "cosine" => barrier(v).map(|u_m| TangentialSpec::Cosine { u_m, delta }),
        other => {
            v.push(format!(
                "potential.tangential.profile \"{other}\" is not one of flat, harmonic, cosine"
            ));
            None
        }
    };
    s.finish(v, &[]);
    out
}

fn parse_grid(t: Option<&Table>, v: &mut Violations) -> GridConfig {
    let mut s = Section::new("grid", t);
    let mut g = GridConfig::default();
    if let Some(x) = s.f64("x_min", v) {
        g.x_min = x;
    }
    if let Some(x) = positive(s.f64("length", v), "grid.length", v) {
        g.length = x;
    }
    for (key, slot) in [("nx", &mut g.nx), ("nv", &mut g.nv), ("ne", &mut g.ne), ("nex", &mut g.nex)] {
        if let Some(n) = s.usize(key, v) {
            *slot = n;
        }
    }
    for (key, slot) in [("v_max", &mut g.v_max), ("e_max", &mut g.e_max), ("ex_max", &mut g.ex_max)] {
        if let Some(x) = positive(s.f64(key, v), &format!("grid.{key}"), v) {
            *slot = x;
        }
    }
    match s.raw("dt") {
        None => {}
        Some(Value::String(a)) if a == "auto" => g.dt = StepSize::Auto,
        Some(Value::Float(x)) if *x > 0.0 => g.dt = StepSize::Fixed(*x),
        Some(Value::Integer(i)) if *i > 0 => g.dt = StepSize::Fixed(*i as f64),
        Some(other) => v.push(format!("grid.dt must be \"auto\" or a positive number, got {other}")),
    }
    g.t_final = positive(s.f64("t_final", v), "grid.t_final", v);
    match s.str("boundary", v) {
        None => {}
        Some("periodic") => g.boundary = XBoundary::Periodic,
        Some("reflective") => g.boundary = XBoundary::Reflective,
        Some(o) => v.push(format!("grid.boundary \"{o}\" is not one of periodic, reflective")),
    }
    match s.str("scheme", v) {
        None => {}
        Some("upwind") => g.scheme = TransportScheme::Upwind,
        Some("muscl") => g.scheme = TransportScheme::Muscl,
        Some(o) => v.push(format!("grid.scheme \"{o}\" is not one of upwind, muscl")),
    }
    match s.str("time_scheme", v) {
        None => {}
        Some("rk2") => g.time_scheme = TimeScheme::Rk2,
        Some("forward-euler") => g.time_scheme = TimeScheme::ForwardEuler,
        Some("crank-nicolson") => g.time_scheme = TimeScheme::CrankNicolson,
        Some(o) => v.push(format!(
            "grid.time_scheme \"{o}\" is not one of rk2, forward-euler, crank-nicolson"
        )),
    }
    s.finish(v, &[]);
    g
}

fn parse_physics(t: Option<&Table>, v: &mut Violations) -> PhysicsConfig {
    let mut s = Section::new("physics", t);
    let mut p = PhysicsConfig::default();
    if let Some(x) = positive(s.f64("tau_ms", v), "physics.tau_ms", v) {
        p.tau_ms = x;
    }
    for (key, slot) in [("epsilon", &mut p.epsilon), ("epsilon0", &mut p.epsilon0)] {
        if let Some(x) = s.f64(key, v) {
            if x > 0.0 && x <= 1.0 {
                *slot = x;
            } else {
                v.push(format!("physics.{key} must be in (0,1], got {x}"));
            }
        }
    }
    if let Some(x) = s.f64("initial_amplitude", v) {
        if x > -1.0 {
            p.initial_amplitude = x;
        } else {
            v.push(format!("physics.initial_amplitude must exceed -1, got {x}"));
        }
    }
    if let Some(x) = positive(s.f64("initial_width", v), "physics.initial_width", v) {
        p.initial_width = x;
    }
    if let Some(x) = s.f64("force_amplitude", v) {
        p.force_amplitude = x;
    }
    if let Some(x) = s.f64("temperature_amplitude", v) {
        if x.abs() < 1.0 {
            p.temperature_amplitude = x;
        } else {
            v.push(format!("physics.temperature_amplitude must lie in (-1, 1), got {x}"));
        }
    }
    let density = positive(s.f64("ambient_density", v), "physics.ambient_density", v).unwrap_or(1.0);
    match s.str("ambient", v) {
        None | Some("closed") => {}
        Some("maxwellian") => p.ambient = AmbientMode::Maxwellian(density),
        Some(o) => v.push(format!("physics.ambient \"{o}\" is not one of closed, maxwellian")),
    }
    if let Some(r) = s.str("regime", v) {
        match regime_from(r) {
            Some(r) => p.regime = r,
            None => v.push(format!("physics.regime \"{r}\" is not one of strong, moderate, weak")),
        }
    }
    if let Some(x) = positive(s.f64("n1", v), "physics.n1", v) {
        p.n1 = x;
    }
    if let Some(x) = positive(s.f64("n2", v), "physics.n2", v) {
        p.n2 = x;
    }
    s.finish(v, &[]);
    p
}

fn parse_sweep(t: Option<&Table>, v: &mut Violations) -> SweepConfig {
    let mut s = Section::new("sweep", t);
    let mut out = SweepConfig::default();
    if let Some(vals) = s.f64_list("values", v) {
        if vals.iter().all(|x| *x > 0.0 && x.is_finite()) {
            out.values = vals;
        } else {
            v.push("sweep.values must all be positive");
        }
    }
    if let Some(rs) = s.str_list("regimes", v) {
        for r in rs {
            match regime_from(r) {
                Some(r) => out.regimes.push(r),
                None => v.push(format!("sweep.regimes entry \"{r}\" is not one of strong, moderate, weak")),
            }
        }
    }
    s.finish(v, &[]);
    out
}

fn parse_output(t: Option<&Table>, v: &mut Violations) -> OutputConfig {
    let mut s = Section::new("output", t);
    let mut o = OutputConfig::default();
    if let Some(d) = s.str("directory", v) {
        o.directory = PathBuf::from(d);
    }
    match s.raw("snapshot_every") {
        None => {}
        Some(Value::Integer(i)) if *i >= 0 => o.snapshot_every = *i as usize,
        Some(other) => v.push(format!("output.snapshot_every must be a nonnegative integer, got {other}")),
    }
    if let Some(b) = s.bool("binary", v) {
        o.binary = b;
    }
    s.finish(v, &[]);
    o
}

fn parse_units(t: Option<&Table>, v: &mut Violations) -> Option<UnitsConfig> {
    let mut s = Section::new("units", t);
    if !s.present() {
        return None;
    }
    let mut get = |key: &'static str, v: &mut Violations| {
        let x = s.f64(key, v);
        if x.is_none() && !v.0.iter().any(|m| m.contains(&format!("units.{key}"))) {
            v.push(format!("missing key units.{key}"));
        }
        positive(x, &format!("units.{key}"), v)
    };
    let temperature_k = get("temperature_k", v);
    let mass_kg = get("mass_kg", v);
    let length_m = get("length_m", v);
    let tau_ms_s = get("tau_ms_s", v);
    s.finish(v, &[]);
    Some(UnitsConfig {
        temperature_k: temperature_k?,
        mass_kg: mass_kg?,
        length_m: length_m?,
        tau_ms_s: tau_ms_s?,
    })
}
