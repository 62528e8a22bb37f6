//! Experiment configuration. Every section has defaults so that a config file
//! only names what it changes; unknown keys are rejected at every level.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dyadlab::oscillation::{Functional, Symbol};
use dyadlab::DomainSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub cloud: CloudSpec,
    pub symbols: Vec<Symbol>,
    pub functionals: Vec<Functional>,
    pub experiments: Vec<Experiment>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainSpec::Ball { n: 1 },
            grid: GridSpec::default(),
            cloud: CloudSpec::default(),
            symbols: Vec::new(),
            functionals: Vec::new(),
            experiments: Vec::new(),
            seed: 0,
            out_dir: None,
        }
    }
}

/// Dyadic grid parameters; `adjacent` independently seeded grids share one
/// uniform boundary sample of `sample_count` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub s: f64,
    pub delta_cal: f64,
    pub levels: usize,
    pub adjacent: usize,
    pub sample_count: usize,
    /// Reuse a grid file instead of building.
    pub file: Option<PathBuf>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { s: 2.0, delta_cal: 0.7, levels: 5, adjacent: 1, sample_count: 300_000, file: None }
    }
}

/// Quadrature clouds: `points` for the Nyström projection, `per_scale` for
/// local clouds, centers log-uniform in `[delta_min, delta_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudSpec {
    pub points: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub per_scale: usize,
    pub ball_points: usize,
    pub centers_per_decade: usize,
}

impl Default for CloudSpec {
    fn default() -> Self {
        CloudSpec { points: 4000, delta_min: 1e-3, delta_max: 0.5, per_scale: 400, ball_points: 1024, centers_per_decade: 50 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryAudit {
    Ballbox,
    BbDistance,
    LocalConstancy,
    Rf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BerezinMode {
    Dyadic,
    Modified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    GridAudit,
    Geometry { audit: GeometryAudit, samples: usize },
    RfAudit { a: f64, b: f64, zdecades: usize, per_scale: usize },
    Berezin { mode: BerezinMode },
    Bmo { r: f64, p: f64 },
    VmoProfile { r: f64, p: f64, thresholds: Vec<f64> },
    Commutator { p: f64 },
    Compactness { cuts: Vec<f64> },
    CfVerify { eps: f64 },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::GridAudit => "grid_audit",
            Experiment::Geometry { .. } => "geometry",
            Experiment::RfAudit { .. } => "rf_audit",
            Experiment::Berezin { .. } => "berezin",
            Experiment::Bmo { .. } => "bmo",
            Experiment::VmoProfile { .. } => "vmo_profile",
            Experiment::Commutator { .. } => "commutator",
            Experiment::Compactness { .. } => "compactness",
            Experiment::CfVerify { .. } => "cf_verify",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("config does not match the schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Range checks serde cannot express.
    pub fn validate(&self) -> Result<()> {
        dyadlab::Domain::new(self.domain.clone()).context("invalid domain")?;
        let g = &self.grid;
        if !(g.s > 1.0) || !(g.delta_cal > 0.0) || g.adjacent == 0 || g.sample_count == 0 {
            bail!("grid needs s > 1, delta_cal > 0, adjacent >= 1 and a nonempty sample");
        }
        let c = &self.cloud;
        if !(c.delta_min > 0.0 && c.delta_min < c.delta_max) || c.points == 0 || c.per_scale == 0 || c.centers_per_decade == 0 {
            bail!("cloud needs 0 < delta_min < delta_max and positive counts");
        }
        for e in &self.experiments {
            match e {
                Experiment::Bmo { p, .. } | Experiment::VmoProfile { p, .. } | Experiment::Commutator { p } if !(*p >= 1.0) => {
                    bail!("{}: need p >= 1, got {p}", e.kind())
                }
                Experiment::Compactness { cuts } if cuts.windows(2).any(|w| w[1] >= w[0]) => {
                    bail!("compactness cuts must be strictly decreasing")
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Symbols to run; the BMO family when none are listed.
    pub fn symbols_or_default(&self) -> Vec<Symbol> {
        if self.symbols.is_empty() {
            Symbol::bmo_family()
        } else {
            self.symbols.clone()
        }
    }

    pub fn functionals_or_default(&self) -> Vec<Functional> {
        if self.functionals.is_empty() {
            vec![Functional::Kobayashi, Functional::Dyadic, Functional::Berezin]
        } else {
            self.functionals.clone()
        }
    }
}

/// Parses `name[:arg[:arg]]`, e.g. `logdelta`, `compact_support:0.5`,
/// `delta_power:0.3:1e-3`, `constant:2`.
pub fn parse_symbol(text: &str) -> Result<Symbol> {
    let mut parts = text.split(':');
    let name = parts.next().unwrap_or_default().to_ascii_lowercase().replace(['-', '_'], "");
    let args: Vec<f64> = parts.map(|p| p.parse::<f64>().with_context(|| format!("bad number {p:?} in symbol {text:?}"))).collect::<Result<_>>()?;
    let arity = |k: usize| -> Result<()> {
        if args.len() > k {
            bail!("symbol {text:?} takes at most {k} arguments");
        }
        Ok(())
    };
    let sym = match name.as_str() {
        "constant" => {
            arity(1)?;
            Symbol::Constant { value: args.first().copied().unwrap_or(1.0) }
        }
        "boundedsmooth" => {
            arity(0)?;
            Symbol::BoundedSmooth
        }
        "compactsupport" => {
            arity(1)?;
            Symbol::CompactSupport { radius: args.first().copied().unwrap_or(0.5) }
        }
        "logdelta" => {
            arity(0)?;
            Symbol::LogDelta
        }
        "deltapower" => {
            arity(2)?;
            Symbol::DeltaPower { alpha: args.first().copied().unwrap_or(0.3), floor: args.get(1).copied().unwrap_or(1e-3) }
        }
        "oscillating" => {
            arity(0)?;
            Symbol::Oscillating
        }
        "conjholomorphic" | "conjw" => {
            arity(0)?;
            Symbol::ConjHolomorphic
        }
        _ => bail!("unknown symbol {text:?}"),
    };
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_config() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        assert!(ExperimentConfig::from_json(r#"{"sed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"grid": {"s": 2, "depth": 3}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiments": [{"kind": "bmo", "r": 1, "p": 2, "q": 3}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"domain": {"domain": "ball", "n": 2, "eps": 0.1}}"#).is_err());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(ExperimentConfig::from_json(r#"{"grid": {"s": 1.0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiments": [{"kind": "commutator", "p": 0.5}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiments": [{"kind": "compactness", "cuts": [0.01, 0.1]}]}"#).is_err());
    }

    #[test]
    fn symbol_strings() {
        assert_eq!(parse_symbol("logdelta").unwrap(), Symbol::LogDelta);
        assert_eq!(parse_symbol("log_delta").unwrap(), Symbol::LogDelta);
        assert_eq!(parse_symbol("compact_support:0.25").unwrap(), Symbol::CompactSupport { radius: 0.25 });
        assert_eq!(parse_symbol("delta_power:0.3:1e-2").unwrap(), Symbol::DeltaPower { alpha: 0.3, floor: 1e-2 });
        assert_eq!(parse_symbol("constant:2").unwrap(), Symbol::Constant { value: 2.0 });
        assert!(parse_symbol("logdelta:1").is_err());
        assert!(parse_symbol("nope").is_err());
    }
}
