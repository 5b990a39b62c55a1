use serde::{Deserialize, Serialize};

use super::model::{HandModel, LinkKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspMode {
    Power,
    Precision,
    Uniform,
}

impl std::str::FromStr for GraspMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "power" => Ok(Self::Power),
            "precision" => Ok(Self::Precision),
            "uniform" => Ok(Self::Uniform),
            other => Err(format!("unknown grasp mode '{other}'")),
        }
    }
}

impl std::fmt::Display for GraspMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Power => "power",
            Self::Precision => "precision",
            Self::Uniform => "uniform",
        })
    }
}

/// Per-link base weights plus a Gaussian over each link's (length, width) chart.
///
/// Power: covariance `diag(l/2, w/0.1)` centered on the link.
/// Precision: covariance `diag(l/5, w/0.1)` centered on the link's distal end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub mode: GraspMode,
    pub palm: f64,
    pub proximal: f64,
    pub distal: f64,
}

impl WeightProfile {
    pub fn power() -> Self {
        Self { mode: GraspMode::Power, palm: 0.1, proximal: 0.1, distal: 1.0 }
    }

    pub fn precision() -> Self {
        Self { mode: GraspMode::Precision, palm: 0.01, proximal: 0.01, distal: 1.0 }
    }

    pub fn uniform() -> Self {
        Self { mode: GraspMode::Uniform, palm: 1.0, proximal: 1.0, distal: 1.0 }
    }

    pub fn for_mode(mode: GraspMode) -> Self {
        match mode {
            GraspMode::Power => Self::power(),
            GraspMode::Precision => Self::precision(),
            GraspMode::Uniform => Self::uniform(),
        }
    }

    pub fn base(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Palm => self.palm,
            LinkKind::Proximal => self.proximal,
            LinkKind::Distal => self.distal,
        }
    }

    /// Weight of a sample at chart coordinates `chart` on a link of the given shape.
    pub fn weight(&self, kind: LinkKind, length: f64, width: f64, chart: [f64; 2]) -> f64 {
        let (var_len, mean_len) = match self.mode {
            GraspMode::Uniform => return 1.0,
            GraspMode::Power => (length / 2.0, length / 2.0),
            GraspMode::Precision if kind == LinkKind::Palm => (length / 5.0, length / 2.0),
            GraspMode::Precision => (length / 5.0, length),
        };
        let var_wid = width / 0.1;
        let du = chart[0] - mean_len;
        let dv = chart[1];
        self.base(kind) * (-0.5 * (du * du / var_len + dv * dv / var_wid)).exp()
    }
}

/// Fitting weight of every surface sample under `profile`.
pub fn shape_weights(model: &HandModel, profile: &WeightProfile) -> Vec<f64> {
    model
        .samples
        .iter()
        .map(|s| {
            let link = &model.links[s.link];
            profile.weight(link.kind, link.length, link.width, s.chart)
        })
        .collect()
}
