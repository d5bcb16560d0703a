use serde::{Deserialize, Serialize};

use crate::blockvar::{
    make_blocks, pair_from_rho, r_from_variations, BlockStrategy, BlockStructure,
    BlockVariationPair, SeriesProtocol, DEFAULT_HORIZON,
};
use crate::coupling::{CouplingStrategy, InitialLaw};
use crate::error::{invalid, Result};
use crate::measures::{stationary_measure_at, CylinderMeasure};
use crate::symbolic::{Alphabet, Couplings, Decay, GFunction, Tail, VariationSequence};

pub const CONFIG_SCHEMA: &str = "gmeasure.config/1";

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default)]
    pub g: Option<GSpec>,
    #[serde(default)]
    pub g_other: Option<GSpec>,
    #[serde(default)]
    pub variations: Option<VariationSpec>,
    #[serde(default)]
    pub blocks: Option<BlocksSpec>,
    #[serde(default)]
    pub rates: Option<RatesSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub check: Option<CheckSpec>,
    #[serde(default)]
    pub renewal: Option<RenewalSpecConfig>,
    #[serde(default)]
    pub couple: Option<CoupleSpec>,
    #[serde(default)]
    pub hellinger: Option<HellingerSpec>,
    #[serde(default)]
    pub iterate: Option<IterateSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GSpec {
    /// `columns[h][a] = g(a . h)`.
    Table { alphabet: usize, memory: usize, columns: Vec<Vec<f64>> },
    BinaryMarkov { p11: f64, p10: f64 },
    Iid { probs: Vec<f64> },
    Logistic { theta0: f64, couplings: Couplings, depth: usize },
}

impl GSpec {
    pub fn build(&self) -> Result<GFunction> {
        match self {
            GSpec::Table { alphabet, memory, columns } => {
                GFunction::table(Alphabet::new(*alphabet)?, *memory, columns.clone())
            }
            GSpec::BinaryMarkov { p11, p10 } => GFunction::binary_markov(*p11, *p10),
            GSpec::Iid { probs } => GFunction::iid(probs.clone()),
            GSpec::Logistic { theta0, couplings, depth } => {
                GFunction::logistic(*theta0, couplings.clone(), *depth)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TailSpec {
    Zero,
    Unknown,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariationSpec {
    /// `var_n = scale * n^-exponent`.
    Power { scale: f64, exponent: f64 },
    /// `var_n = scale * ratio^n`.
    Geometric { scale: f64, ratio: f64 },
    /// `var_0, var_1, ..` listed.
    Explicit { values: Vec<f64>, tail: TailSpec },
    /// Computed from `g`.
    FromG,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksSpec {
    pub strategy: BlockStrategy,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub max_total: Option<usize>,
}

fn default_levels() -> usize {
    20
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RateSourceSpec {
    FromRho,
    FromS,
    Manual,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    pub source: RateSourceSpec,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Square,
    BerbeeEps,
    Main,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub condition: ConditionKind,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub protocol: SeriesProtocol,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalSpecConfig {
    pub horizon: usize,
    #[serde(default)]
    pub simulate_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleSpec {
    pub horizon: usize,
    pub trials: usize,
    #[serde(default)]
    pub strategy: CouplingStrategy,
    #[serde(default)]
    pub initial: InitialLaw,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
}

fn default_tail_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HellingerSpec {
    pub max_start: usize,
    pub max_b: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Point(Vec<usize>),
    Uniform { depth: usize },
    Stationary { depth: usize },
    Masses { depth: usize, values: Vec<f64> },
}

impl MeasureSpec {
    pub fn build(&self, g: &GFunction) -> Result<CylinderMeasure> {
        let a = g.alphabet();
        match self {
            MeasureSpec::Point(w) => CylinderMeasure::point_mass(a, w),
            MeasureSpec::Uniform { depth } => CylinderMeasure::uniform(a, *depth),
            MeasureSpec::Stationary { depth } => stationary_measure_at(g, *depth),
            MeasureSpec::Masses { depth, values } => CylinderMeasure::new(a, *depth, values.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IterateSpec {
    pub steps: usize,
    pub nu1: MeasureSpec,
    pub nu2: MeasureSpec,
    #[serde(default)]
    pub depth_cap: Option<usize>,
    #[serde(default = "default_iterate_tolerance")]
    pub tolerance: f64,
}

fn default_iterate_tolerance() -> f64 {
    1e-3
}

impl ExperimentConfig {
    pub fn g(&self) -> Result<GFunction> {
        match &self.g {
            Some(spec) => spec.build(),
            None => invalid("this command needs `g`"),
        }
    }

    /// Variation sequence of length `len` (stored terms), from the explicit
    /// spec or else from `g`.
    pub fn variations(&self, len: usize) -> Result<VariationSequence> {
        match &self.variations {
            Some(VariationSpec::Power { scale, exponent }) => {
                VariationSequence::from_decay(Decay::Power { scale: *scale, exponent: *exponent }, len)
            }
            Some(VariationSpec::Geometric { scale, ratio }) => {
                VariationSequence::from_decay(Decay::Geometric { scale: *scale, ratio: *ratio }, len)
            }
            Some(VariationSpec::Explicit { values, tail }) => {
                let tail = match tail {
                    TailSpec::Zero => Tail::Zero,
                    TailSpec::Unknown => Tail::Unknown,
                };
                VariationSequence::exact(values.clone(), tail)
            }
            Some(VariationSpec::FromG) | None => match &self.g {
                Some(_) => Ok(VariationSequence::from_g(&self.g()?, len)),
                None => invalid("need `variations` or `g`"),
            },
        }
    }

    pub fn block_structure(&self, vars: Option<&VariationSequence>, max_total: Option<usize>) -> Result<BlockStructure> {
        let Some(spec) = &self.blocks else {
            return invalid("this command needs `blocks`");
        };
        let cap = match (spec.max_total, max_total) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        make_blocks(&spec.strategy, vars, spec.levels, cap)
    }

    /// Block-variation pair from `blocks` and `rates`.
    pub fn pair(&self, max_total: Option<usize>) -> Result<BlockVariationPair> {
        let Some(rates) = &self.rates else {
            return invalid("this command needs `rates`");
        };
        let needs_vars = matches!(self.blocks.as_ref().map(|b| &b.strategy), Some(BlockStrategy::Tail))
            || rates.source == RateSourceSpec::FromS;
        let vars = if needs_vars {
            let len = self.blocks.as_ref().map_or(0, |b| b.max_total.unwrap_or(0)).max(max_total.unwrap_or(0));
            Some(self.variations(len.max(1) + 1)?)
        } else {
            None
        };
        let blocks = self.block_structure(vars.as_ref(), max_total)?;
        match rates.source {
            RateSourceSpec::FromRho => pair_from_rho(&self.g()?, &blocks),
            RateSourceSpec::FromS => {
                let vars = match vars {
                    Some(v) if v.len() >= blocks.total() => v,
                    _ => self.variations(blocks.total() + 1)?,
                };
                r_from_variations(&vars, &blocks)
            }
            RateSourceSpec::Manual => {
                let Some(values) = &rates.values else {
                    return invalid("manual rates need `values`");
                };
                if values.len() < blocks.levels() {
                    return invalid(format!(
                        "{} manual rates for {} levels",
                        values.len(),
                        blocks.levels()
                    ));
                }
                BlockVariationPair::new(blocks.clone(), values[..blocks.levels()].to_vec())
            }
        }
    }
}

/// Parse a config, reporting the path of the offending field on failure.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("config field `{path}`: {}", e.into_inner())
    })?;
    if cfg.schema != CONFIG_SCHEMA {
        return Err(format!(
            "config field `schema`: expected \"{CONFIG_SCHEMA}\", found \"{}\"",
            cfg.schema
        ));
    }
    Ok(cfg)
}
