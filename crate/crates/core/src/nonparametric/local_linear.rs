//! Bivariate local-linear regression of ΔY on (D1, ΔD).
//!
//! Evaluation points sharing a δ coordinate are handled together: units
//! outside the δ-window are discarded once, the rest are sorted by D1, and
//! each point scans only its D1-window.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::error::{Result, WaossError};
use crate::panel::DifferencedUnit;

/// Relative pivot threshold below which a local plane fit is singular.
const SINGULAR_PIVOT: f64 = 1e-10;
const MAX_WIDENINGS: u32 = 30;

/// How a point's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    LocalLinear,
    /// Local-linear system singular; Nadaraya–Watson at the same bandwidths.
    LocalConstant,
    /// No kernel mass at the requested bandwidths; Nadaraya–Watson after
    /// doubling both bandwidths `widenings` times.
    Widened {
        widenings: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFit {
    pub value: f64,
    /// Σ of unit weight × kernel weight at the bandwidths finally used.
    pub kernel_mass: f64,
    pub kind: FitKind,
}

impl PointFit {
    pub fn is_fallback(&self) -> bool {
        self.kind != FitKind::LocalLinear
    }
}

#[derive(Clone, Copy)]
struct Obs {
    d1: f64,
    dd: f64,
    dy: f64,
    w: f64,
    index: usize,
}

#[derive(Default)]
struct Moments {
    s: [f64; 6], // 1, a, b, aa, ab, bb
    t: [f64; 3], // y, ay, by
}

impl Moments {
    #[inline]
    fn add(&mut self, k: f64, a: f64, b: f64, y: f64) {
        self.s[0] += k;
        self.s[1] += k * a;
        self.s[2] += k * b;
        self.s[3] += k * a * a;
        self.s[4] += k * a * b;
        self.s[5] += k * b * b;
        self.t[0] += k * y;
        self.t[1] += k * a * y;
        self.t[2] += k * b * y;
    }

    fn intercept(&self) -> Option<f64> {
        let s0 = self.s[0];
        if !(s0 > 0.0) {
            return None;
        }
        let s = self.s.map(|v| v / s0);
        let m = Matrix3::new(s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5]);
        let chol = m.cholesky()?;
        let l = chol.l_dirty();
        let min_pivot = (0..3).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > SINGULAR_PIVOT) {
            return None;
        }
        let rhs = Vector3::from_iterator(self.t.iter().map(|v| v / s0));
        Some(chol.solve(&rhs)[0])
    }
}

/// Local-linear fits at `points` = [(d1*, δ*)], with bandwidths already
/// resolved. `exclude_self[i] = Some(j)` leaves unit j out of point i's fit
/// (leave-one-out).
pub(crate) fn fit_points(
    units: &[DifferencedUnit],
    points: &[(f64, f64)],
    h_d1: f64,
    h_dd: f64,
    kernel: Kernel,
    exclude_self: Option<&[usize]>,
) -> Result<Vec<PointFit>> {
    assert!(h_d1 > 0.0 && h_dd > 0.0);
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, (_, dd)) in points.iter().enumerate() {
        groups.entry(dd.to_bits()).or_default().push(i);
    }
    let radius = kernel.radius();
    let mut out = vec![None; points.len()];
    for (bits, members) in groups {
        let dd_star = f64::from_bits(bits);
        let mut window: Vec<Obs> = units
            .iter()
            .enumerate()
            .filter(|(_, u)| ((u.dd - dd_star) / h_dd).abs() <= radius && u.weight > 0.0)
            .map(|(index, u)| Obs {
                d1: u.d1,
                dd: u.dd,
                dy: u.dy,
                w: u.weight,
                index,
            })
            .collect();
        window.sort_by(|a, b| a.d1.total_cmp(&b.d1).then(a.index.cmp(&b.index)));
        for i in members {
            let (d1_star, _) = points[i];
            let skip = exclude_self.map(|e| e[i]);
            let lo = window.partition_point(|o| o.d1 < d1_star - radius * h_d1);
            let mut mom = Moments::default();
            for o in &window[lo..] {
                let a = (o.d1 - d1_star) / h_d1;
                if a > radius {
                    break;
                }
                if Some(o.index) == skip {
                    continue;
                }
                let k = o.w * kernel.weight(a) * kernel.weight((o.dd - dd_star) / h_dd);
                if k > 0.0 {
                    mom.add(k, a, (o.dd - dd_star) / h_dd, o.dy);
                }
            }
            let fit = if let Some(value) = mom.intercept() {
                PointFit {
                    value,
                    kernel_mass: mom.s[0],
                    kind: FitKind::LocalLinear,
                }
            } else if mom.s[0] > 0.0 {
                PointFit {
                    value: mom.t[0] / mom.s[0],
                    kernel_mass: mom.s[0],
                    kind: FitKind::LocalConstant,
                }
            } else {
                widened_fit(units, points[i], h_d1, h_dd, kernel, skip)?
            };
            out[i] = Some(fit);
        }
    }
    Ok(out
        .into_iter()
        .map(|f| f.expect("every point belongs to a group"))
        .collect())
}

fn widened_fit(
    units: &[DifferencedUnit],
    (d1_star, dd_star): (f64, f64),
    h_d1: f64,
    h_dd: f64,
    kernel: Kernel,
    skip: Option<usize>,
) -> Result<PointFit> {
    for widenings in 1..=MAX_WIDENINGS {
        let scale = f64::from(1u32 << widenings.min(30));
        let (h1, h2) = (h_d1 * scale, h_dd * scale);
        let (mut mass, mut num) = (0.0, 0.0);
        for (j, u) in units.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let k = u.weight * kernel.weight((u.d1 - d1_star) / h1) * kernel.weight((u.dd - dd_star) / h2);
            mass += k;
            num += k * u.dy;
        }
        if mass > 0.0 {
            return Ok(PointFit {
                value: num / mass,
                kernel_mass: mass,
                kind: FitKind::Widened { widenings },
            });
        }
    }
    Err(WaossError::SingularLocalFit {
        d1: d1_star,
        dd: dd_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_units(f: impl Fn(f64, f64) -> f64) -> Vec<DifferencedUnit> {
        let mut units = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let d1 = i as f64 / 39.0 * 2.0;
                let dd = -1.0 + j as f64 / 39.0 * 2.0 + 1e-3;
                units.push(DifferencedUnit {
                    dy: f(d1, dd),
                    dd,
                    s: if dd > 0.0 { 1 } else { -1 },
                    d1,
                    weight: 1.0 + (i % 3) as f64,
                });
            }
        }
        units
    }

    #[test]
    fn reproduces_planes() {
        let units = grid_units(|d1, dd| 1.5 - 2.0 * d1 + 0.7 * dd);
        let pts = [(1.0, 0.0), (0.5, 0.2), (1.3, -0.4)];
        for k in [Kernel::Epanechnikov, Kernel::Gaussian] {
            let fits = fit_points(&units, &pts, 0.3, 0.3, k, None).unwrap();
            for ((d1, dd), f) in pts.iter().zip(&fits) {
                assert_eq!(f.kind, FitKind::LocalLinear);
                assert!((f.value - (1.5 - 2.0 * d1 + 0.7 * dd)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn falls_back_when_plane_is_unidentified() {
        // All units share one d1: the d1 slope is not identified.
        let units: Vec<_> = (0..20)
            .map(|j| DifferencedUnit {
                dy: 3.0,
                dd: 0.05 * (j as f64 - 9.5),
                s: if j >= 10 { 1 } else { -1 },
                d1: 1.0,
                weight: 1.0,
            })
            .collect();
        let f = fit_points(&units, &[(1.0, 0.0)], 0.5, 1.0, Kernel::Epanechnikov, None).unwrap()[0];
        assert_eq!(f.kind, FitKind::LocalConstant);
        assert!((f.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn widens_when_window_is_empty() {
        let units = grid_units(|_, _| 2.0);
        let f = fit_points(&units, &[(10.0, 0.0)], 0.1, 0.1, Kernel::Epanechnikov, None).unwrap()[0];
        assert!(matches!(f.kind, FitKind::Widened { .. }));
        assert!((f.value - 2.0).abs() < 1e-12);
        assert!(f.kernel_mass > 0.0);
    }

    #[test]
    fn leave_one_out_excludes_the_unit() {
        let mut units = grid_units(|d1, dd| d1 + dd);
        units[0].dy += 100.0;
        let pt = [(units[0].d1, units[0].dd)];
        let with = fit_points(&units, &pt, 0.2, 0.2, Kernel::Epanechnikov, None).unwrap()[0];
        let without = fit_points(&units, &pt, 0.2, 0.2, Kernel::Epanechnikov, Some(&[0])).unwrap()[0];
        assert!((without.value - (units[0].d1 + units[0].dd)).abs() < 1e-10);
        assert!(with.value > without.value + 1.0);
    }
}
