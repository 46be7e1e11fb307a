//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sl3_coupler::families::FamilyKind;
use sl3_coupler::fock::Occupation;
use sl3_coupler::{FieldVector, C64};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    Map,
    Propagate,
    Loop,
    Fock,
    Holonomy,
    FindEp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PtCyclic,
    Chiral1,
    Chiral2,
}

impl From<Family> for FamilyKind {
    fn from(f: Family) -> Self {
        match f {
            Family::PtCyclic => FamilyKind::PtCyclic,
            Family::Chiral1 => FamilyKind::Chiral1,
            Family::Chiral2 => FamilyKind::Chiral2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Everything needed to reproduce one run. Unset fields take defaults;
/// `chiral2` reads its single coupling from `kappa1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub command: Command,
    pub family: Family,
    pub gamma: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub z_max: f64,
    pub samples: usize,
    /// Excitation number of the Fock sector.
    pub n: usize,
    /// Initial state; see [`StateSpec`] for the syntax. `None` selects
    /// `1,0,0` for classical runs and `noon:1,2` for Fock runs.
    pub state: Option<String>,
    pub loop_r: f64,
    pub loop_turns: u32,
    /// Loop centre in the `(κ₁/γ, κ₂/γ)` plane; the triple point by default.
    pub loop_center: [f64; 2],
    pub tol: f64,
    pub eps_ep: f64,
    /// Map abscissa range: `κ₁/γ`, or `γ` for `chiral2`.
    pub x_range: [f64; 2],
    /// Map ordinate range: `κ₂/γ`, or `κ` for `chiral2`. Also the search
    /// bracket of `find-ep`.
    pub y_range: [f64; 2],
    pub grid: [usize; 2],
    pub holonomy_steps: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub plot_script: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Classify,
            family: Family::PtCyclic,
            gamma: 1.0,
            kappa1: 1.5,
            kappa2: 3.5,
            z_max: 5.0,
            samples: 501,
            n: 2,
            state: None,
            loop_r: 0.4253,
            loop_turns: 1,
            loop_center: [std::f64::consts::FRAC_1_SQRT_2, 0.0],
            tol: 1e-10,
            eps_ep: sl3_coupler::spectral::DEFAULT_EP_EPS,
            x_range: [0.0, 3.0],
            y_range: [0.0, 4.0],
            grid: [121, 161],
            holonomy_steps: 2048,
            out: None,
            format: Format::Csv,
            jobs: None,
            plot_script: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serialisable")
    }

    /// Rejects non-finite numbers and inconsistent settings, naming the
    /// offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let reals = [
            ("gamma", self.gamma),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("z-max", self.z_max),
            ("loop-r", self.loop_r),
            ("loop-center", self.loop_center[0]),
            ("loop-center", self.loop_center[1]),
            ("tol", self.tol),
            ("eps-ep", self.eps_ep),
            ("x-range", self.x_range[0]),
            ("x-range", self.x_range[1]),
            ("y-range", self.y_range[0]),
            ("y-range", self.y_range[1]),
        ];
        for (name, v) in reals {
            if !v.is_finite() {
                return Err(field(name, "must be finite"));
            }
        }
        if self.z_max < 0.0 {
            return Err(field("z-max", "must be non-negative"));
        }
        if self.samples < 2 {
            return Err(field("samples", "must be at least 2"));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(field("tol", "must lie in (0, 1e-2)"));
        }
        if !(self.eps_ep > 0.0 && self.eps_ep < 1.0) {
            return Err(field("eps-ep", "must lie in (0, 1)"));
        }
        if self.jobs == Some(0) {
            return Err(field("jobs", "must be positive"));
        }
        match self.command {
            Command::Fock if self.n == 0 => return Err(field("n", "must be positive")),
            Command::Map => {
                if self.grid[0] < 2 || self.grid[1] < 2 {
                    return Err(field("grid", "needs at least 2 points per axis"));
                }
                check_range("x-range", self.x_range)?;
                check_range("y-range", self.y_range)?;
            }
            Command::FindEp => {
                if self.family != Family::PtCyclic {
                    return Err(field("family", "find-ep supports pt-cyclic only"));
                }
                if self.gamma == 0.0 {
                    return Err(field("gamma", "must be non-zero"));
                }
                check_range("y-range", self.y_range)?;
            }
            Command::Loop | Command::Holonomy => {
                if self.family != Family::PtCyclic {
                    return Err(field("family", "loops are defined on pt-cyclic"));
                }
                if self.loop_r <= 0.0 {
                    return Err(field("loop-r", "must be positive"));
                }
                if self.loop_turns == 0 {
                    return Err(field("loop-turns", "must be positive"));
                }
                if self.gamma <= 0.0 {
                    return Err(field("gamma", "must be positive on a loop"));
                }
                if self.command == Command::Holonomy && self.holonomy_steps == 0 {
                    return Err(field("holonomy-steps", "must be positive"));
                }
            }
            _ => {}
        }
        if self.plot_script.is_some() && (self.format != Format::Csv || self.out.is_none()) {
            return Err(field("plot-script", "needs CSV output written to --out"));
        }
        if let Some(s) = &self.state {
            StateSpec::parse(s)?;
        }
        Ok(())
    }

    pub fn state_spec(&self) -> Result<StateSpec, CliError> {
        match &self.state {
            Some(s) => StateSpec::parse(s),
            None if self.command == Command::Fock => Ok(StateSpec::Noon(0, 1)),
            None => Ok(StateSpec::Field(FieldVector::new(C64::from(1.0), C64::from(0.0), C64::from(0.0)))),
        }
    }
}

fn field(name: &str, msg: &str) -> CliError {
    CliError::Config(format!("field `{name}`: {msg}"))
}

fn check_range(name: &str, r: [f64; 2]) -> Result<(), CliError> {
    if r[0] < r[1] {
        Ok(())
    } else {
        Err(field(name, "needs min < max"))
    }
}

/// Initial-state syntax:
///
/// * `a,b,c` or `field:a,b,c`: classical amplitudes, each a real or complex
///   literal such as `0.5` or `1+2i`;
/// * `occ:n1,n2,n3`: an occupation-number state;
/// * `noon:j,k`: `(|n at mode j⟩ + |n at mode k⟩)/√2` with modes numbered
///   from 1.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Field(FieldVector),
    Occupation(Occupation),
    /// Zero-based mode pair.
    Noon(usize, usize),
}

impl StateSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |msg: &str| field("state", &format!("`{text}`: {msg}"));
        let (kind, body) = match text.split_once(':') {
            Some((k, b)) => (k.trim(), b),
            None => ("field", text),
        };
        let parts: Vec<&str> = body.split(',').map(str::trim).collect();
        match kind {
            "field" => {
                if parts.len() != 3 {
                    return Err(bad("expected three amplitudes"));
                }
                let mut v = [C64::from(0.0); 3];
                for (slot, p) in v.iter_mut().zip(&parts) {
                    *slot = p.parse::<C64>().map_err(|_| bad("unparsable amplitude"))?;
                    if !slot.re.is_finite() || !slot.im.is_finite() {
                        return Err(bad("amplitudes must be finite"));
                    }
                }
                if v.iter().all(|c| c.norm() == 0.0) {
                    return Err(bad("field must be non-zero"));
                }
                Ok(StateSpec::Field(FieldVector::new(v[0], v[1], v[2])))
            }
            "occ" => {
                let occ: Vec<usize> = parts
                    .iter()
                    .map(|p| p.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("occupations are non-negative integers"))?;
                let occ: Occupation = occ.try_into().map_err(|_| bad("expected three occupations"))?;
                Ok(StateSpec::Occupation(occ))
            }
            "noon" => {
                let modes: Vec<usize> = parts
                    .iter()
                    .map(|p| p.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("modes are integers 1..=3"))?;
                match modes[..] {
                    [j, k] if (1..=3).contains(&j) && (1..=3).contains(&k) && j != k => Ok(StateSpec::Noon(j - 1, k - 1)),
                    _ => Err(bad("expected two distinct modes in 1..=3")),
                }
            }
            _ => Err(bad("unknown state kind (field, occ, noon)")),
        }
    }
}
