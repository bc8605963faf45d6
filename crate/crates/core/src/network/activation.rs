//! Hidden-layer nonlinearities and their derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Nonlinearity applied by every hidden layer. The output layer is always softmax.
///
/// `Prelu::slope` is the initial negative-side slope; the network learns one
/// slope per hidden unit starting from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationKind {
    Tanh,
    Relu,
    Abs,
    Prelu { slope: f64 },
    Elu { alpha: f64 },
    Softplus,
    CenteredSoftplus,
    Swish { beta: f64 },
}

impl ActivationKind {
    pub const PRELU_DEFAULT_SLOPE: f64 = 0.25;
    pub const ELU_DEFAULT_ALPHA: f64 = 1.0;
    pub const SWISH_DEFAULT_BETA: f64 = 1.0;

    /// The eight kinds with their default parameters.
    pub fn all() -> [ActivationKind; 8] {
        [
            ActivationKind::Tanh,
            ActivationKind::Relu,
            ActivationKind::Abs,
            ActivationKind::Prelu {
                slope: Self::PRELU_DEFAULT_SLOPE,
            },
            ActivationKind::Elu {
                alpha: Self::ELU_DEFAULT_ALPHA,
            },
            ActivationKind::Softplus,
            ActivationKind::CenteredSoftplus,
            ActivationKind::Swish {
                beta: Self::SWISH_DEFAULT_BETA,
            },
        ]
    }

    /// Whether the network carries a learnable per-unit slope for this kind.
    pub fn has_learnable_slope(&self) -> bool {
        matches!(self, ActivationKind::Prelu { .. })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Prelu { slope } => prelu(x, slope),
            _ => self.apply_with_slope(x, 0.0),
        }
    }

    /// Evaluates the activation; `slope` is only read for PReLU.
    #[inline]
    pub fn apply_with_slope(&self, x: f64, slope: f64) -> f64 {
        match *self {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Abs => x.abs(),
            ActivationKind::Prelu { .. } => prelu(x, slope),
            ActivationKind::Elu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * x.exp_m1()
                }
            }
            ActivationKind::Softplus => softplus(x),
            ActivationKind::CenteredSoftplus => softplus(x) - std::f64::consts::LN_2,
            ActivationKind::Swish { beta } => x * sigmoid(beta * x),
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative_with_slope(&self, x: f64, slope: f64) -> f64 {
        match *self {
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Prelu { .. } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationKind::Elu { alpha } => {
                if x > 0.0 {
                    1.0
                } else {
                    alpha * x.exp()
                }
            }
            ActivationKind::Softplus | ActivationKind::CenteredSoftplus => sigmoid(x),
            ActivationKind::Swish { beta } => {
                let s = sigmoid(beta * x);
                s + beta * x * s * (1.0 - s)
            }
        }
    }

    /// Short name used in directory names and CSV output, e.g. `prelu-0.25`.
    pub fn label(&self) -> String {
        match *self {
            ActivationKind::Tanh => "tanh".into(),
            ActivationKind::Relu => "relu".into(),
            ActivationKind::Abs => "abs".into(),
            ActivationKind::Prelu { slope } => format!("prelu-{slope}"),
            ActivationKind::Elu { alpha } => format!("elu-{alpha}"),
            ActivationKind::Softplus => "softplus".into(),
            ActivationKind::CenteredSoftplus => "centered_softplus".into(),
            ActivationKind::Swish { beta } => format!("swish-{beta}"),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `relu`, `prelu`, `prelu-0.1`, `elu:2`, `swish-1.5`, ...
impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(['-', ':']) {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let parse_param = |default: f64| -> Result<f64, Error> {
            match param {
                None => Ok(default),
                Some(p) => p
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad activation parameter in {s:?}"))),
            }
        };
        let no_param = |kind| {
            if param.is_some() {
                Err(Error::InvalidArgument(format!("{name} takes no parameter")))
            } else {
                Ok(kind)
            }
        };
        match name.to_ascii_lowercase().as_str() {
            "tanh" => no_param(ActivationKind::Tanh),
            "relu" => no_param(ActivationKind::Relu),
            "abs" => no_param(ActivationKind::Abs),
            "softplus" => no_param(ActivationKind::Softplus),
            "centered_softplus" | "centered" => no_param(ActivationKind::CenteredSoftplus),
            "prelu" => Ok(ActivationKind::Prelu {
                slope: parse_param(Self::PRELU_DEFAULT_SLOPE)?,
            }),
            "elu" => Ok(ActivationKind::Elu {
                alpha: parse_param(Self::ELU_DEFAULT_ALPHA)?,
            }),
            "swish" => Ok(ActivationKind::Swish {
                beta: parse_param(Self::SWISH_DEFAULT_BETA)?,
            }),
            _ => Err(Error::InvalidArgument(format!("unknown activation {s:?}"))),
        }
    }
}

/// Evaluates `kind` at `x`, using the kind's own slope for PReLU.
pub fn apply_activation(kind: ActivationKind, x: f64) -> f64 {
    kind.apply(x)
}

#[inline]
fn prelu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defining_values() {
        assert_eq!(apply_activation(ActivationKind::Relu, -1.0), 0.0);
        assert_eq!(apply_activation(ActivationKind::Relu, 2.0), 2.0);
        assert_eq!(apply_activation(ActivationKind::CenteredSoftplus, 0.0), 0.0);
        assert!((apply_activation(ActivationKind::Softplus, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(apply_activation(ActivationKind::Swish { beta: 1.0 }, 0.0), 0.0);
        assert_eq!(apply_activation(ActivationKind::Abs, -3.5), 3.5);
        assert_eq!(
            apply_activation(ActivationKind::Prelu { slope: 0.25 }, -4.0),
            -1.0
        );
        let elu = apply_activation(ActivationKind::Elu { alpha: 1.0 }, -1.0);
        assert!((elu - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn large_arguments_stay_finite() {
        for kind in ActivationKind::all() {
            for x in [-1e3, -700.0, 700.0, 1e3] {
                let y = kind.apply(x);
                let d = kind.derivative_with_slope(x, 0.25);
                assert!(y.is_finite() && d.is_finite(), "{kind} at {x}: {y} {d}");
            }
        }
        assert_eq!(softplus(1e3), 1e3);
        assert!(softplus(-1e3) >= 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences_away_from_kinks() {
        let h = 1e-6;
        for kind in ActivationKind::all() {
            for x in [-2.3, -0.7, 0.4, 1.9] {
                let numeric =
                    (kind.apply_with_slope(x + h, 0.3) - kind.apply_with_slope(x - h, 0.3)) / (2.0 * h);
                let analytic = kind.derivative_with_slope(x, 0.3);
                assert!((numeric - analytic).abs() < 1e-8, "{kind} at {x}");
            }
        }
    }

    #[test]
    fn parse_and_label() {
        assert_eq!("relu".parse::<ActivationKind>().unwrap(), ActivationKind::Relu);
        assert_eq!(
            "prelu-0.1".parse::<ActivationKind>().unwrap(),
            ActivationKind::Prelu { slope: 0.1 }
        );
        assert_eq!(
            "swish".parse::<ActivationKind>().unwrap(),
            ActivationKind::Swish { beta: 1.0 }
        );
        assert!("relu-2".parse::<ActivationKind>().is_err());
        assert!("gelu".parse::<ActivationKind>().is_err());
        for kind in ActivationKind::all() {
            assert_eq!(kind.label().parse::<ActivationKind>().unwrap(), kind);
        }
    }

    #[test]
    fn serde_form() {
        let json = serde_json::to_string(&ActivationKind::Elu { alpha: 1.0 }).unwrap();
        assert_eq!(json, r#"{"kind":"elu","alpha":1.0}"#);
        let back: ActivationKind = serde_json::from_str(r#"{"kind":"centered_softplus"}"#).unwrap();
        assert_eq!(back, ActivationKind::CenteredSoftplus);
    }
}
