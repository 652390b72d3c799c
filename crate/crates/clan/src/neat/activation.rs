use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Activation function tag carried by node genes.
///
/// The default for hidden and output nodes is the steepened sigmoid
/// `1 / (1 + e^(-4.9x))`; input nodes pass their value through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    SteepSigmoid,
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply<S: Scalar>(self, x: S) -> S {
        let one = S::one();
        match self {
            Activation::SteepSigmoid => {
                one / (one + (-S::from_config(4.9) * x).exp())
            }
            Activation::Sigmoid => one / (one + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x > S::zero() {
                    x
                } else {
                    S::zero()
                }
            }
            Activation::Identity => x,
        }
    }

    pub fn to_wire(self) -> u8 {
        match self {
            Activation::SteepSigmoid => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Relu => 3,
            Activation::Identity => 4,
        }
    }

    pub fn from_wire(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::SteepSigmoid,
            1 => Activation::Sigmoid,
            2 => Activation::Tanh,
            3 => Activation::Relu,
            4 => Activation::Identity,
            _ => return None,
        })
    }
}
