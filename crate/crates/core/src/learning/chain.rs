use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{nmse, Sample};
use super::mlp::{train_mlp, MlpRegressor, TrainConfig, TrainReport};
use crate::coupling::AvoidanceParams;
use crate::error::{invalid, Error, Result};
use crate::sim::CouplingPolicy;

pub const CHAIN_FORMAT_VERSION: u32 = 1;

/// Inputs of the chain: the section alone, or the section and the
/// requested clearance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainVariant {
    #[serde(rename = "rc")]
    Section,
    #[serde(rename = "rc-delta")]
    SectionClearance,
}

impl ChainVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Section => "rc",
            Self::SectionClearance => "rc-delta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rc" => Ok(Self::Section),
            "rc-delta" => Ok(Self::SectionClearance),
            _ => invalid(format!("unknown chain variant {s:?}; expected rc or rc-delta")),
        }
    }

    pub fn n_inputs(self) -> usize {
        match self {
            Self::Section => 2,
            Self::SectionClearance => 3,
        }
    }

    /// Chain input for a sample.
    pub fn features(self, s: &Sample) -> Vec<f64> {
        match self {
            Self::Section => vec![s.lp1, s.lp2],
            Self::SectionClearance => vec![s.lp1, s.lp2, s.clearance],
        }
    }
}

/// kappa from the input, then psi from input and kappa, then alpha from
/// input, kappa and psi.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorChain {
    pub format_version: u32,
    pub variant: ChainVariant,
    pub y1: MlpRegressor,
    pub y2: MlpRegressor,
    pub y3: MlpRegressor,
}

static HULL_WARNED: AtomicBool = AtomicBool::new(false);

impl RegressorChain {
    /// `(kappa, psi, alpha)` for input `h`.
    pub fn predict(&self, h: &[f64]) -> Result<(f64, f64, f64)> {
        if h.len() != self.variant.n_inputs() {
            return invalid(format!("{} chain takes {} inputs, got {}", self.variant.name(), self.variant.n_inputs(), h.len()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chain input".into()));
        }
        if !self.in_hull(h) {
            if HULL_WARNED.swap(true, Ordering::Relaxed) {
                log::debug!("chain input {h:?} outside the training range");
            } else {
                log::warn!("chain input {h:?} outside the training range; predictions are extrapolated");
            }
        }
        let kappa = self.y1.predict(h);
        let mut x = h.to_vec();
        x.push(kappa);
        let psi = self.y2.predict(&x);
        x.push(psi);
        let alpha = self.y3.predict(&x);
        Ok((kappa, psi, alpha))
    }

    /// Whether `h` lies in the box spanned by the training inputs.
    pub fn in_hull(&self, h: &[f64]) -> bool {
        self.y1.norm.contains(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHAIN_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "chain format {} is not supported (expected {CHAIN_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let d = self.variant.n_inputs();
        for (m, n) in [(&self.y1, d), (&self.y2, d + 1), (&self.y3, d + 2)] {
            m.validate()?;
            if m.net.n_inputs() != n {
                return Err(Error::Format(format!("chain stage expects {n} inputs, network has {}", m.net.n_inputs())));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl CouplingPolicy for RegressorChain {
    fn params(&self, lambda_p: (f64, f64), clearance: Option<f64>) -> Result<AvoidanceParams> {
        let h = match (self.variant, clearance) {
            (ChainVariant::Section, _) => vec![lambda_p.0, lambda_p.1],
            (ChainVariant::SectionClearance, Some(d)) => vec![lambda_p.0, lambda_p.1, d],
            (ChainVariant::SectionClearance, None) => {
                return invalid("the rc-delta chain needs a clearance target");
            }
        };
        let (kappa, psi, alpha) = self.predict(&h)?;
        AvoidanceParams::new(alpha, psi, kappa)
    }
}

/// Both chain variants: scenarios without a clearance target use the
/// section-only chain, the rest use the clearance-aware one.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainSet {
    pub section: Option<RegressorChain>,
    pub section_clearance: Option<RegressorChain>,
}

impl CouplingPolicy for ChainSet {
    fn params(&self, lambda_p: (f64, f64), clearance: Option<f64>) -> Result<AvoidanceParams> {
        let chain = match clearance {
            None => self.section.as_ref(),
            Some(_) => self.section_clearance.as_ref(),
        };
        chain.ok_or(Error::Untrained)?.params(lambda_p, clearance)
    }
}

/// Independent seed for a named part of a run.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainTraining {
    pub chain: RegressorChain,
    pub reports: [TrainReport; 3],
}

/// Train the three stages in order. Each stage sees the true values of the
/// preceding targets.
pub fn train_chain(train: &[Sample], variant: ChainVariant, cfg: &TrainConfig, seed: u64) -> Result<ChainTraining> {
    let base: Vec<Vec<f64>> = train.iter().map(|s| variant.features(s)).collect();
    let with_kappa: Vec<Vec<f64>> = base.iter().zip(train).map(|(x, s)| [&x[..], &[s.kappa]].concat()).collect();
    let with_psi: Vec<Vec<f64>> = with_kappa.iter().zip(train).map(|(x, s)| [&x[..], &[s.psi]].concat()).collect();
    let kappa: Vec<f64> = train.iter().map(|s| s.kappa).collect();
    let psi: Vec<f64> = train.iter().map(|s| s.psi).collect();
    let alpha: Vec<f64> = train.iter().map(|s| s.alpha).collect();
    let (y1, r1) = train_mlp(&base, &kappa, cfg, derive_seed(seed, 1))?;
    let (y2, r2) = train_mlp(&with_kappa, &psi, cfg, derive_seed(seed, 2))?;
    let (y3, r3) = train_mlp(&with_psi, &alpha, cfg, derive_seed(seed, 3))?;
    Ok(ChainTraining {
        chain: RegressorChain {
            format_version: CHAIN_FORMAT_VERSION,
            variant,
            y1,
            y2,
            y3,
        },
        reports: [r1, r2, r3],
    })
}

/// NMSE of each stage on raw targets, feeding the true preceding targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainScores {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

pub fn chain_nmse(chain: &RegressorChain, data: &[Sample]) -> Result<ChainScores> {
    let v = chain.variant;
    let mut p = [Vec::new(), Vec::new(), Vec::new()];
    for s in data {
        let x = v.features(s);
        p[0].push(chain.y1.predict(&x));
        let x = [&x[..], &[s.kappa]].concat();
        p[1].push(chain.y2.predict(&x));
        let x = [&x[..], &[s.psi]].concat();
        p[2].push(chain.y3.predict(&x));
    }
    let truth = |f: fn(&Sample) -> f64| data.iter().map(f).collect::<Vec<f64>>();
    Ok(ChainScores {
        y1: nmse(&p[0], &truth(|s| s.kappa))?,
        y2: nmse(&p[1], &truth(|s| s.psi))?,
        y3: nmse(&p[2], &truth(|s| s.alpha))?,
    })
}
