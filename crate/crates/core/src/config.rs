//! Experiment configuration, read from TOML.
//!
//! Every section has defaults, so an empty file runs the full suite. Unknown
//! keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conjugate::Profile;
use crate::error::{Error, Result};
use crate::fleet::Fleet;
use crate::flt::Rect;
use crate::seqspace::SeqWeightFamily;
use crate::weights::WeightKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Conjugate,
    Kernel,
    Approx,
    Flt,
    Seq,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Conjugate,
        Experiment::Kernel,
        Experiment::Approx,
        Experiment::Flt,
        Experiment::Seq,
    ];
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Conjugate => "conjugate",
            Experiment::Kernel => "kernel",
            Experiment::Approx => "approx",
            Experiment::Flt => "flt",
            Experiment::Seq => "seq",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Record wall times; off by default so output files are reproducible.
    pub timing: bool,
    pub plot_data: bool,
    pub experiments: Vec<Experiment>,
    pub weight: WeightKind,
    pub conjugate: ConjugateConfig,
    pub kernel: KernelConfig,
    pub approx: ApproxConfig,
    pub flt: FltConfig,
    pub seq: SeqConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240917,
            out_dir: "out".into(),
            timing: false,
            plot_data: false,
            experiments: Experiment::ALL.to_vec(),
            weight: WeightKind::Power { a: 2.0 },
            conjugate: ConjugateConfig::default(),
            kernel: KernelConfig::default(),
            approx: ApproxConfig::default(),
            flt: FltConfig::default(),
            seq: SeqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConjugateConfig {
    pub functions: Vec<Profile>,
    pub x_max: f64,
    pub x_points: usize,
    pub nodes: usize,
    pub lemma_lo: f64,
    pub lemma_hi: f64,
    pub lemma_points: usize,
    pub lemma_nodes: usize,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        Self {
            functions: Profile::CONVEX.to_vec(),
            x_max: 3.0,
            x_points: 50,
            nodes: 200_001,
            lemma_lo: 0.1,
            lemma_hi: 20.0,
            lemma_points: 200,
            lemma_nodes: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub max_order: usize,
    pub sup_points: usize,
    pub sup_half_width: f64,
    pub random_points: usize,
    pub radius: f64,
    pub degree_max: usize,
    pub dims: Vec<usize>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            sup_points: 100_000,
            sup_half_width: 50.0,
            random_points: 10_000,
            radius: 5.0,
            degree_max: 20,
            dims: vec![1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxConfig {
    pub m: usize,
    pub points_per_axis: usize,
    pub stage1_f: Fleet,
    pub nus: Vec<usize>,
    pub stage2_f: Fleet,
    pub stage2_nu: usize,
    pub lambdas: Vec<f64>,
    pub split_points: Vec<f64>,
    pub stage3_f: Fleet,
    pub stage3_nu: usize,
    pub stage3_lambda: f64,
    pub degree_max: usize,
    pub pipeline_f: Fleet,
    pub eps: f64,
    pub nu_max: usize,
    pub lambda_max: f64,
    pub n_max: usize,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            m: 1,
            points_per_axis: 2049,
            stage1_f: Fleet::Cosh,
            nus: (1..=8).collect(),
            stage2_f: Fleet::Bump,
            stage2_nu: 1,
            lambdas: vec![10.0, 100.0, 1000.0],
            split_points: vec![0.0, 0.3, -0.55, 0.9],
            stage3_f: Fleet::Bump,
            stage3_nu: 2,
            stage3_lambda: 2.0,
            degree_max: 30,
            pipeline_f: Fleet::Gaussian,
            eps: 1.0,
            nu_max: 12,
            lambda_max: 64.0,
            n_max: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FltConfig {
    pub orders: Vec<usize>,
    pub moment_max: usize,
    pub fd_step: f64,
    pub hermitian_half_width: f64,
    pub hermitian_points: usize,
    pub rect: Rect,
}

impl Default for FltConfig {
    fn default() -> Self {
        Self {
            orders: vec![0, 1, 2, 3],
            moment_max: 6,
            fd_step: 0.02,
            hermitian_half_width: 4.0,
            hermitian_points: 64,
            rect: Rect::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqConfig {
    pub weights: SeqWeightFamily,
    pub m: usize,
    pub m_max: usize,
    pub functions: Vec<Fleet>,
    pub radius: f64,
    pub points_per_axis: usize,
    pub km_tol: f64,
}

impl Default for SeqConfig {
    fn default() -> Self {
        Self {
            weights: SeqWeightFamily::default(),
            m: 3,
            m_max: 6,
            functions: Fleet::ALL.to_vec(),
            radius: 4.0,
            points_per_axis: 1025,
            km_tol: 1e-14,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed {} exceeds {}",
                self.seed,
                i64::MAX
            )));
        }
        crate::weights::WeightFamily::new(self.weight, 1)?;
        self.seq.weights.validate()?;
        let a = &self.approx;
        if a.m == 0 || a.m > 4 {
            return Err(Error::Config(format!("approx.m = {} outside 1..=4", a.m)));
        }
        if a.points_per_axis < 3 || self.seq.points_per_axis < 3 {
            return Err(Error::Config("points_per_axis must be at least 3".into()));
        }
        if a.lambdas.iter().any(|l| !(*l > 1.0)) || !(a.stage3_lambda > 1.0) {
            return Err(Error::Config("every λ must exceed 1".into()));
        }
        if a.nus.contains(&0) || a.stage2_nu == 0 || a.stage3_nu == 0 {
            return Err(Error::Config("ν starts at 1".into()));
        }
        if !(a.eps > 0.0) {
            return Err(Error::Config("approx.eps must be positive".into()));
        }
        let c = &self.conjugate;
        if !(c.lemma_lo > 0.0) || !(c.lemma_hi > c.lemma_lo) || c.lemma_points < 2 {
            return Err(Error::Config(
                "lemma range must satisfy 0 < lo < hi with >= 2 points".into(),
            ));
        }
        if !(c.x_max > 0.0) || c.x_points < 2 || c.nodes < 3 {
            return Err(Error::Config("conjugate grid is degenerate".into()));
        }
        if self.kernel.max_order > crate::kernel::MAX_KERNEL_ORDER {
            return Err(Error::Config(format!(
                "kernel.max_order = {} exceeds {}",
                self.kernel.max_order,
                crate::kernel::MAX_KERNEL_ORDER
            )));
        }
        if self.kernel.dims.iter().any(|&d| d == 0 || d > 2) {
            return Err(Error::Config("kernel.dims must be 1 or 2".into()));
        }
        if self.flt.moment_max > 6 {
            return Err(Error::Config("flt.moment_max is at most 6".into()));
        }
        if self.seq.m == 0 || self.seq.m_max == 0 {
            return Err(Error::Config("seq orders start at 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `power:A` or `log_penalty:C:B`.
pub fn parse_weight(s: &str) -> Result<WeightKind> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number `{t}` in weight `{s}`")))
    };
    match parts.as_slice() {
        ["power", a] => Ok(WeightKind::Power { a: num(a)? }),
        ["log_penalty", c, b] => Ok(WeightKind::LogPenalty {
            coeff: num(c)?,
            exponent: num(b)?,
        }),
        _ => Err(Error::Config(format!(
            "weight `{s}`: expected power:A or log_penalty:C:B"
        ))),
    }
}
