use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::InitMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Norm-induced transform fine-tuned jointly with the prototypes.
    FtTim,
    /// Prototypes only, on the input features.
    TimBaseline,
    /// `x -> W x` in place of the norm-induced map (ablation).
    LinearTransform,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::TimBaseline,
        Variant::LinearTransform,
        Variant::FtTim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FtTim => "ft_tim",
            Variant::TimBaseline => "tim_baseline",
            Variant::LinearTransform => "linear_transform",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ft_tim" => Ok(Variant::FtTim),
            "tim_baseline" => Ok(Variant::TimBaseline),
            "linear_transform" => Ok(Variant::LinearTransform),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    PlainGradient,
    AdaptiveMoment,
}

impl FromStr for UpdateRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain_gradient" => Ok(UpdateRule::PlainGradient),
            "adaptive_moment" => Ok(UpdateRule::AdaptiveMoment),
            other => Err(Error::InvalidConfig(format!(
                "unknown update rule `{other}`"
            ))),
        }
    }
}

/// What happens to the prototypes when the features switch into the
/// transformed space at `transform_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeHandoff {
    /// Keep the current prototypes unchanged.
    Keep,
    /// Reset each prototype to its transformed, normalized support feature.
    Reinit,
}

impl FromStr for PrototypeHandoff {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "keep" => Ok(PrototypeHandoff::Keep),
            "reinit" => Ok(PrototypeHandoff::Reinit),
            other => Err(Error::InvalidConfig(format!(
                "unknown prototype handoff `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimConfig {
    pub tau: f64,
    pub lambda_ce: f64,
    pub alpha_cond: f64,
    pub iterations: usize,
    /// First iteration at which the transform is applied and updated. Values
    /// above `iterations` disable the transform altogether.
    pub transform_start: usize,
    pub lr_theta: f64,
    pub lr_w: f64,
    pub update_rule: UpdateRule,
    pub variant: Variant,
    pub prototype_handoff: PrototypeHandoff,
    /// Gram (`X_s^T X_s`) or the diagonal-perturbed mean support.
    #[serde(with = "init_mode_serde")]
    pub init_mode: InitMode,
    pub seed: u64,
}

impl Default for TimConfig {
    fn default() -> Self {
        Self {
            tau: 15.0,
            lambda_ce: 0.1,
            alpha_cond: 1.0,
            iterations: 1000,
            transform_start: 200,
            lr_theta: 1e-4,
            lr_w: 0.01,
            update_rule: UpdateRule::AdaptiveMoment,
            variant: Variant::FtTim,
            prototype_handoff: PrototypeHandoff::Keep,
            init_mode: InitMode::Gram,
            seed: 0,
        }
    }
}

impl TimConfig {
    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let non_negative = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        positive(self.tau, "tau")?;
        positive(self.lr_theta, "lr_theta")?;
        positive(self.lr_w, "lr_w")?;
        non_negative(self.lambda_ce, "lambda_ce")?;
        non_negative(self.alpha_cond, "alpha_cond")?;
        if let InitMode::IdentityLike { epsilon } = self.init_mode {
            non_negative(epsilon, "init epsilon")?;
        }
        Ok(())
    }

    /// Whether the transformed feature space is in use at iteration `iter`.
    pub fn transform_active_at(&self, iter: usize) -> bool {
        self.variant != Variant::TimBaseline && iter >= self.transform_start
    }
}

mod init_mode_serde {
    use super::InitMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &InitMode, s: S) -> Result<S::Ok, S::Error> {
        match m {
            InitMode::Gram => s.serialize_str("gram"),
            InitMode::IdentityLike { epsilon } => {
                s.serialize_str(&format!("identity_like:{epsilon}"))
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<InitMode, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_init_mode(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses `gram` or `identity_like[:epsilon]` (epsilon defaults to 1e-3).
pub(crate) fn parse_init_mode(s: &str) -> Result<InitMode> {
    match s.split_once(':') {
        None if s == "gram" => Ok(InitMode::Gram),
        None if s == "identity_like" => Ok(InitMode::IdentityLike { epsilon: 1e-3 }),
        Some(("identity_like", eps)) => eps
            .parse()
            .map(|epsilon| InitMode::IdentityLike { epsilon })
            .map_err(|_| Error::InvalidConfig(format!("bad epsilon `{eps}`"))),
        _ => Err(Error::InvalidConfig(format!("unknown init mode `{s}`"))),
    }
}

impl FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_init_mode(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.lr_w, 0.01);
        assert_eq!(c.transform_start, 200);
    }

    #[test]
    fn rejects_bad_values() {
        let c = TimConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TimConfig {
            alpha_cond: -1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn names_parse_back() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("ft-tim".parse::<Variant>().is_err());
        assert_eq!(
            "identity_like:0.5".parse::<InitMode>().unwrap(),
            InitMode::IdentityLike { epsilon: 0.5 }
        );
    }

    #[test]
    fn baseline_never_activates_the_transform() {
        let c = TimConfig {
            variant: Variant::TimBaseline,
            transform_start: 0,
            ..Default::default()
        };
        assert!(!c.transform_active_at(500));
        let c = TimConfig::default();
        assert!(!c.transform_active_at(199) && c.transform_active_at(200));
    }
}
