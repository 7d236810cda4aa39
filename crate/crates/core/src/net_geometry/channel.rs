use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::num::{db_to_linear, Real};

use super::geometry::Point;
use super::layout::NetworkLayout;
use super::ChannelError;

/// Radio parameters of the multi-cell uplink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Fractional power-control compensation factor.
    pub s: f64,
    /// `P_0 / W` in dB: SNR of an unfaded link at 1 km.
    pub snr_db: f64,
    /// Users per km².
    pub lambda: f64,
    /// UE placements closer than this to their RAP are redrawn.
    pub min_distance_km: f64,
    /// Interferers further than this many Voronoi hops from the receiving
    /// RAP are ignored; `None` keeps every active cell.
    pub interference_tiers: Option<u32>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 3.7,
            s: 0.1,
            snr_db: 20.0,
            lambda: 0.1,
            min_distance_km: 1e-3,
            interference_tiers: None,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(ChannelError::Param("alpha must exceed 2"));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(ChannelError::Param("s must lie in [0, 1]"));
        }
        if !self.snr_db.is_finite() {
            return Err(ChannelError::Param("snr_db must be finite"));
        }
        if !(self.lambda >= 0.0) {
            return Err(ChannelError::Param("lambda must be nonnegative"));
        }
        if !(self.min_distance_km > 0.0 && self.min_distance_km.is_finite()) {
            return Err(ChannelError::Param("min_distance_km must be positive"));
        }
        Ok(())
    }

    /// Probability that a cell of `area_km2` holds at least one user.
    pub fn activation_prob(&self, area_km2: f64) -> f64 {
        -(-self.lambda * area_km2).exp_m1()
    }
}

/// One network snapshot.
///
/// Every cell gets a UE position, an activation variate and a fading row
/// whether or not it turns out active, so the random stream layout does not
/// depend on the user density.
#[derive(Debug, Clone, PartialEq)]
pub struct SubframeDrop {
    pub active: Vec<bool>,
    /// `X_i`, meaningful only where `active[i]`.
    pub ue_positions: Vec<Point<f64>>,
    /// `g[i * n_cloud + k]`: fading from UE `i` to the `k`-th cloud RAP.
    pub fading: Vec<f64>,
    /// `P_i / P_0 = |Y_i - X_i|^(s alpha)`; zero when inactive.
    pub tx_powers: Vec<f64>,
    /// Linear SINR at each cloud RAP; `None` when its cell is idle.
    pub sinr: Vec<Option<f64>>,
}

impl SubframeDrop {
    pub fn fading(&self, ue: usize, cloud_k: usize) -> f64 {
        self.fading[ue * self.sinr.len() + cloud_k]
    }
}

/// Draws activity, UE positions, fading and the cloud-group SINRs.
pub fn draw_subframe<R: Rng + ?Sized>(
    layout: &NetworkLayout<f64>,
    params: &ChannelParams,
    rng: &mut R,
) -> SubframeDrop {
    let n = layout.n_total();
    let n_cloud = layout.n_cloud();
    let sa = params.s * params.alpha;
    let min_sq = params.min_distance_km * params.min_distance_km;
    let mut active = Vec::with_capacity(n);
    let mut ue_positions = Vec::with_capacity(n);
    let mut tx_powers = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let is_active = u < params.activation_prob(layout.areas()[i]);
        let x = sample_in_cell(layout, i, min_sq, rng);
        active.push(is_active);
        ue_positions.push(x);
        tx_powers.push(if is_active {
            layout.raps()[i].distance(x).powf(sa)
        } else {
            0.0
        });
    }
    let fading = (0..n * n_cloud).map(|_| Exp1.sample(rng)).collect();
    let mut drop = SubframeDrop {
        active,
        ue_positions,
        fading,
        tx_powers,
        sinr: vec![None; n_cloud],
    };
    drop.sinr = (0..n_cloud)
        .map(|k| compute_sinr(&drop, layout, params, k))
        .collect();
    drop
}

/// Uniform point in cell `i`, at least `sqrt(min_sq)` from its RAP, by
/// rejection from the cell's bounding box.
pub fn sample_in_cell<R: Rng + ?Sized>(
    layout: &NetworkLayout<f64>,
    i: usize,
    min_sq: f64,
    rng: &mut R,
) -> Point<f64> {
    let cell = &layout.cells()[i];
    let bb = cell.bounding_box();
    let y = layout.raps()[i];
    loop {
        let p = Point::new(
            bb.x_min + rng.random::<f64>() * bb.width(),
            bb.y_min + rng.random::<f64>() * bb.height(),
        );
        if cell.contains(p) && p.distance_sq(y) >= min_sq {
            return p;
        }
    }
}

/// One interfering UE as seen from the receiving RAP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer<T> {
    /// Fading `g_{i,j}`.
    pub gain: T,
    /// `|Y_j - X_i|`.
    pub distance_to_rap: T,
    /// `|Y_i - X_i|`, which sets the interferer's transmit power.
    pub own_distance: T,
}

/// Uplink SINR under fractional power control:
///
/// `g_jj d_jj^(alpha (s - 1)) / (1/snr + sum_i g_ij |Y_j - X_i|^(-alpha) |Y_i - X_i|^(s alpha))`,
/// evaluated as `signal * snr / (1 + snr * interference)`.
pub fn sinr_kernel<T: Real>(
    gain: T,
    serving_distance: T,
    interferers: impl IntoIterator<Item = Interferer<T>>,
    alpha: T,
    s: T,
    snr_linear: T,
) -> T {
    let signal = gain * serving_distance.powf(alpha * (s - T::one()));
    let interference = interferers.into_iter().fold(T::zero(), |acc, it| {
        acc + it.gain * it.distance_to_rap.powf(-alpha) * it.own_distance.powf(s * alpha)
    });
    signal * snr_linear / (T::one() + snr_linear * interference)
}

/// Linear SINR at the `cloud_k`-th cloud RAP, or `None` if its cell is idle.
pub fn compute_sinr(
    drop: &SubframeDrop,
    layout: &NetworkLayout<f64>,
    params: &ChannelParams,
    cloud_k: usize,
) -> Option<f64> {
    let j = layout.cloud_group()[cloud_k];
    if !drop.active[j] {
        return None;
    }
    let yj = layout.raps()[j];
    let interferers = (0..layout.n_total())
        .filter(|&i| i != j && drop.active[i])
        .filter(|&i| {
            params
                .interference_tiers
                .is_none_or(|t| layout.hops_from_cloud(cloud_k, i) <= t)
        })
        .map(|i| Interferer {
            gain: drop.fading(i, cloud_k),
            distance_to_rap: yj.distance(drop.ue_positions[i]),
            own_distance: layout.raps()[i].distance(drop.ue_positions[i]),
        });
    Some(sinr_kernel(
        drop.fading(j, cloud_k),
        yj.distance(drop.ue_positions[j]),
        interferers,
        params.alpha,
        params.s,
        db_to_linear(params.snr_db),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net_geometry::{build_layout, Rect};
    use crate::rng::{substream, Domain};

    #[test]
    fn unit_distance_gives_snr() {
        for s in [0.0, 0.1, 0.5, 1.0] {
            let g = sinr_kernel(1.0, 1.0, [], 3.7, s, 100.0);
            assert!((g - 100.0f64).abs() < 1e-12);
        }
    }

    #[test]
    fn full_compensation_ignores_distance() {
        for d in [0.01, 0.7, 3.0, 12.0] {
            let g = sinr_kernel(1.0, d, [], 3.7, 1.0, 100.0);
            assert!((g - 100.0f64).abs() < 1e-9);
        }
    }

    #[test]
    fn single_interferer_by_hand() {
        let it = Interferer {
            gain: 0.5,
            distance_to_rap: 2.0,
            own_distance: 0.5,
        };
        let got: f64 = sinr_kernel(2.0, 0.8, [it], 4.0, 0.5, 10.0);
        // 2 * 0.8^-2 / (0.1 + 0.5 * 2^-4 * 0.5^2)
        let want = 3.125 / (0.1 + 0.5 / 16.0 * 0.25);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn zero_density_is_silent() {
        let layout = build_layout(
            vec![Point::new(1.0, 1.0), Point::new(3.0, 1.0)],
            Rect::new(0.0, 0.0, 4.0, 2.0),
            vec![0, 1],
        )
        .unwrap();
        let params = ChannelParams {
            lambda: 0.0,
            ..Default::default()
        };
        let mut rng = substream(3, Domain::Validation, 0, 0);
        let d = draw_subframe(&layout, &params, &mut rng);
        assert!(d.active.iter().all(|a| !a));
        assert!(d.sinr.iter().all(Option::is_none));
        assert!(d.fading.iter().all(|&g| g > 0.0));
        let dense = ChannelParams {
            lambda: 1e6,
            ..Default::default()
        };
        let d = draw_subframe(&layout, &dense, &mut rng);
        assert!(d.active.iter().all(|&a| a));
        for (i, x) in d.ue_positions.iter().enumerate() {
            assert!(layout.cells()[i].contains(*x));
        }
    }

    #[test]
    fn param_validation() {
        assert!(ChannelParams::default().validate().is_ok());
        let bad = ChannelParams {
            alpha: 2.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChannelParams {
            s: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
