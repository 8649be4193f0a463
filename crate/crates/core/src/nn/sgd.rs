//! SGD with classical momentum and optional L2 weight decay.
//!
//! Update rule per parameter tensor:
//!   v <- momentum * v + grad + weight_decay * theta
//!   theta <- theta - learning_rate * v
//! Weight decay reads the pre-update parameters.

use crate::error::{Error, Result};
use crate::nn::layer::{Layer, LayerGrad};
use crate::nn::network::Network;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be finite and >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffers, one slot per layer, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Velocity {
    slots: Vec<LayerGrad>,
}

impl Velocity {
    pub fn zeros_for(net: &Network) -> Velocity {
        let slots = net
            .layers()
            .iter()
            .map(|layer| match layer {
                Layer::Affine { weight, bias } => LayerGrad::Affine {
                    weight: Tensor::zeros(weight.shape().to_vec()),
                    bias: Tensor::zeros(bias.shape().to_vec()),
                },
                Layer::Conv2d { kernels, bias, .. } => LayerGrad::Conv2d {
                    kernels: Tensor::zeros(kernels.shape().to_vec()),
                    bias: Tensor::zeros(bias.shape().to_vec()),
                },
                Layer::Relu => LayerGrad::None,
            })
            .collect();
        Velocity { slots }
    }
}

fn apply(theta: &mut Tensor, grad: &Tensor, vel: &mut Tensor, cfg: &SgdConfig) {
    let (m, lr, wd) = (cfg.momentum, cfg.learning_rate, cfg.weight_decay);
    for ((t, g), v) in theta
        .values_mut()
        .iter_mut()
        .zip(grad.values())
        .zip(vel.values_mut())
    {
        *v = m * *v + *g + wd * *t;
        *t -= lr * *v;
    }
}

/// One optimizer step over every parametric layer.
pub fn sgd_step(
    net: &mut Network,
    grads: &[LayerGrad],
    vel: &mut Velocity,
    cfg: &SgdConfig,
) -> Result<()> {
    cfg.validate()?;
    if grads.len() != net.layers().len() || vel.slots.len() != net.layers().len() {
        return Err(Error::ShapeMismatch {
            expected: vec![net.layers().len()],
            actual: vec![grads.len()],
            context: "gradient slots per layer",
        });
    }
    for ((layer, grad), slot) in net.layers_mut().iter_mut().zip(grads).zip(&mut vel.slots) {
        match (layer, grad, slot) {
            (
                Layer::Affine { weight, bias },
                LayerGrad::Affine {
                    weight: gw,
                    bias: gb,
                },
                LayerGrad::Affine {
                    weight: vw,
                    bias: vb,
                },
            ) => {
                apply(weight, gw, vw, cfg);
                apply(bias, gb, vb, cfg);
            }
            (
                Layer::Conv2d { kernels, bias, .. },
                LayerGrad::Conv2d {
                    kernels: gk,
                    bias: gb,
                },
                LayerGrad::Conv2d {
                    kernels: vk,
                    bias: vb,
                },
            ) => {
                apply(kernels, gk, vk, cfg);
                apply(bias, gb, vb, cfg);
            }
            (Layer::Relu, LayerGrad::None, LayerGrad::None) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "gradient kind does not match layer kind".into(),
                ))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param_net(w: f64) -> Network {
        Network::new(
            vec![Layer::Affine {
                weight: Tensor::new(vec![2, 1], vec![w, 0.0]).unwrap(),
                bias: Tensor::zeros(vec![2]),
            }],
            vec![1],
            2,
        )
        .unwrap()
    }

    fn grad(v: f64) -> Vec<LayerGrad> {
        vec![LayerGrad::Affine {
            weight: Tensor::new(vec![2, 1], vec![v, 0.0]).unwrap(),
            bias: Tensor::zeros(vec![2]),
        }]
    }

    fn weight0(net: &Network) -> f64 {
        match &net.layers()[0] {
            Layer::Affine { weight, .. } => weight.values()[0],
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut net = one_param_net(1.5);
        let mut vel = Velocity::zeros_for(&net);
        let cfg = SgdConfig {
            learning_rate: 0.0,
            ..SgdConfig::default()
        };
        sgd_step(&mut net, &grad(3.0), &mut vel, &cfg).unwrap();
        assert_eq!(weight0(&net), 1.5);
    }

    #[test]
    fn plain_sgd_is_theta_minus_lr_grad() {
        let mut net = one_param_net(1.0);
        let mut vel = Velocity::zeros_for(&net);
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
        };
        sgd_step(&mut net, &grad(2.0), &mut vel, &cfg).unwrap();
        assert!((weight0(&net) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_momentum_steps_match_hand_unrolled_arithmetic() {
        // v1 = g; theta1 = theta0 - lr*g
        // v2 = 0.9g + g = 1.9g; theta2 = theta1 - lr*1.9g
        // total displacement = 2.9 * lr * g
        let mut net = one_param_net(1.0);
        let mut vel = Velocity::zeros_for(&net);
        let cfg = SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0,
        };
        sgd_step(&mut net, &grad(1.0), &mut vel, &cfg).unwrap();
        sgd_step(&mut net, &grad(1.0), &mut vel, &cfg).unwrap();
        assert!((weight0(&net) - (1.0 - 2.9 * 0.01)).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_uses_pre_update_theta() {
        // v = g + wd*theta0 = 1 + 0.1*2 = 1.2; theta1 = 2 - 0.5*1.2 = 1.4
        let mut net = one_param_net(2.0);
        let mut vel = Velocity::zeros_for(&net);
        let cfg = SgdConfig {
            learning_rate: 0.5,
            momentum: 0.0,
            weight_decay: 0.1,
        };
        sgd_step(&mut net, &grad(1.0), &mut vel, &cfg).unwrap();
        assert!((weight0(&net) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn config_validation_rejects_bad_ranges() {
        assert!(SgdConfig {
            momentum: 1.0,
            ..SgdConfig::default()
        }
        .validate()
        .is_err());
        assert!(SgdConfig {
            momentum: -0.1,
            ..SgdConfig::default()
        }
        .validate()
        .is_err());
        assert!(SgdConfig {
            learning_rate: -1.0,
            ..SgdConfig::default()
        }
        .validate()
        .is_err());
        assert!(SgdConfig {
            weight_decay: f64::NAN,
            ..SgdConfig::default()
        }
        .validate()
        .is_err());
        assert!(SgdConfig::default().validate().is_ok());
    }
}
