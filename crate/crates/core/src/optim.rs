//! First-order optimizers over [`ParamSet`]s.
//!
//! Groups flagged inactive for a step are skipped entirely: neither their
//! parameters nor their moment buffers nor their step counters change.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ParamGroup, ParamSet};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Decoupled: `p -= lr * weight_decay * p` on active groups.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// SGD only.
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-4,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            ));
        }
        for (name, b) in [
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("momentum", self.momentum),
        ] {
            if !(0.0..1.0).contains(&b) {
                return Err(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(format!("eps must be > 0, got {}", self.eps));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct GroupState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

/// One optimizer spanning all five parameter groups.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: [GroupState; 5],
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Self {
        Optimizer {
            cfg,
            state: Default::default(),
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps(&self, g: ParamGroup) -> u64 {
        self.state[g.index()].steps
    }

    pub fn step<T: Real>(
        &mut self,
        params: &mut ParamSet<T>,
        grads: &ParamSet<T>,
        active: &[bool; 5],
    ) {
        for g in ParamGroup::ALL {
            if !active[g.index()] {
                continue;
            }
            let (p, d) = (params.group_mut(g), grads.group(g));
            assert_eq!(p.len(), d.len(), "gradient length for {}", g.name());
            let st = &mut self.state[g.index()];
            if st.m.len() != p.len() {
                st.m = vec![0.0; p.len()];
                st.v = vec![0.0; p.len()];
                st.steps = 0;
            }
            st.steps += 1;
            let c = &self.cfg;
            let lr = c.learning_rate;
            let decay = 1.0 - lr * c.weight_decay;
            match c.kind {
                OptimizerKind::Adam => {
                    let t = st.steps as i32;
                    let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
                    let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
                    for i in 0..p.len() {
                        let gi = d[i].as_f64();
                        st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * gi;
                        st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * gi * gi;
                        let mh = st.m[i] / bc1;
                        let vh = st.v[i] / bc2;
                        let pi = p[i].as_f64() * decay - lr * mh / (libm::sqrt(vh) + c.eps);
                        p[i] = T::lit(pi);
                    }
                }
                OptimizerKind::Sgd => {
                    for i in 0..p.len() {
                        let gi = d[i].as_f64();
                        st.m[i] = c.momentum * st.m[i] + gi;
                        p[i] = T::lit(p[i].as_f64() * decay - lr * st.m[i]);
                    }
                }
            }
        }
    }
}
