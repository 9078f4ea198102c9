// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use serde::{Deserialize, Serialize};

use crate::error::{GalaError, Result};

/// Linear variance-preserving schedule `beta(t) = beta_min + (beta_max - beta_min) t`
/// on `t in [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule { beta_min: 0.1, beta_max: 20.0 }
    }
}

impl NoiseSchedule {
    pub fn new(beta_min: f64, beta_max: f64) -> Result<Self> {
        if !(beta_min > 0.0 && beta_max > beta_min && beta_max.is_finite()) {
            return Err(GalaError::Argument(format!(
                "need 0 < beta_min < beta_max, got {beta_min} and {beta_max}"
            )));
        }
        Ok(NoiseSchedule { beta_min, beta_max })
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + (self.beta_max - self.beta_min) * t
    }

    /// `int_0^t beta(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
    }

    /// Scale `m(t)` of the conditional mean `A0 m(t)`.
    pub fn mean_scale(&self, t: f64) -> f64 {
        (-0.5 * self.integral(t)).exp()
    }

    /// Conditional variance `v(t) = 1 - exp(-int beta)`.
    pub fn variance(&self, t: f64) -> f64 {
        -(-self.integral(t)).exp_m1()
    }

    pub fn std(&self, t: f64) -> f64 {
        self.variance(t).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_against_quadrature_values() {
        let s = NoiseSchedule::default();
        assert!((s.integral(0.1) - 0.1095).abs() < 1e-12);
        assert!((s.mean_scale(0.1) - 0.946722).abs() < 1e-6);
        assert!((s.std(0.1) - 0.322053).abs() < 1e-6);
        assert!((s.variance(0.5) - 0.920936).abs() < 1e-6);
        assert!((s.variance(1.0) - 0.999957).abs() < 1e-6);
    }

    #[test]
    fn integral_strictly_increasing() {
        let s = NoiseSchedule::default();
        let mut prev = s.integral(0.0);
        for i in 1..=1000 {
            let t = i as f64 / 1000.0;
            assert!(s.beta(t) > 0.0);
            let cur = s.integral(t);
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn rejects_bad_endpoints() {
        assert!(NoiseSchedule::new(0.0, 1.0).is_err());
        assert!(NoiseSchedule::new(2.0, 1.0).is_err());
    }
}
