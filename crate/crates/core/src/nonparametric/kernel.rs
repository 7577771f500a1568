use serde::{Deserialize, Serialize};

/// Second-order kernels for the product-kernel smoothers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    /// Truncated at |u| ≤ 8, where the density is below 1e-14.
    Gaussian,
}

const GAUSS_NORM: f64 = 0.398_942_280_401_432_7; // 1/√(2π)
const GAUSS_CUTOFF: f64 = 8.0;

impl Kernel {
    #[inline]
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => {
                if u.abs() <= GAUSS_CUTOFF {
                    GAUSS_NORM * (-0.5 * u * u).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the support in bandwidth units.
    pub fn radius(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => GAUSS_CUTOFF,
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "gaussian" => Ok(Kernel::Gaussian),
            other => Err(format!("unknown kernel {other:?} (expected epanechnikov or gaussian)")),
        }
    }
}
