use crate::num::Real;

use super::LinkError;

/// Largest turbo code block, in information bits.
pub const MAX_CB_BITS: u32 = 6144;

/// Splits a transport block into `ceil(tb_bits / 6144)` code blocks whose
/// sizes differ by at most one bit. Larger blocks come first.
///
/// Panics if `tb_bits` is zero.
pub fn segment_tb(tb_bits: u32) -> Vec<u32> {
    assert!(tb_bits >= 1, "a transport block carries at least one bit");
    let num_cbs = tb_bits.div_ceil(MAX_CB_BITS);
    let base = tb_bits / num_cbs;
    let extra = tb_bits % num_cbs;
    (0..num_cbs).map(|r| base + u32::from(r < extra)).collect()
}

/// Probability that at least one of `num_cbs` independent code blocks fails,
/// `1 - (1 - eps_cb)^C`.
pub fn tb_channel_outage_prob<T: Real>(eps_cb: T, num_cbs: u32) -> Result<T, LinkError> {
    if !(eps_cb >= T::zero() && eps_cb <= T::one()) {
        return Err(LinkError::InvalidProbability(eps_cb.as_f64()));
    }
    if num_cbs == 0 {
        return Err(LinkError::InvalidCbCount(num_cbs));
    }
    // expm1/ln1p keeps precision when eps_cb is tiny.
    let c = T::lit(f64::from(num_cbs));
    Ok(-(c * (-eps_cb).ln_1p()).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn segmentation_examples() {
        assert_eq!(segment_tb(8064), vec![4032, 4032]);
        assert_eq!(segment_tb(6144), vec![6144]);
        assert_eq!(segment_tb(6145), vec![3073, 3072]);
        assert_eq!(segment_tb(13000), vec![4334, 4333, 4333]);
        assert_eq!(segment_tb(1), vec![1]);
    }

    #[test]
    #[should_panic]
    fn zero_bits_rejected() {
        segment_tb(0);
    }

    #[test]
    fn outage_examples() {
        assert_eq!(tb_channel_outage_prob(0.0f64, 5).unwrap(), 0.0);
        assert!((tb_channel_outage_prob(0.1f64, 2).unwrap() - 0.19).abs() < 1e-15);
        assert!((tb_channel_outage_prob(0.25f64, 1).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(tb_channel_outage_prob(1.0f64, 3).unwrap(), 1.0);
        assert!((tb_channel_outage_prob(0.1f32, 2).unwrap() - 0.19).abs() < 1e-6);
    }

    #[test]
    fn outage_domain_errors() {
        assert_eq!(
            tb_channel_outage_prob(1.5f64, 2),
            Err(LinkError::InvalidProbability(1.5))
        );
        assert!(tb_channel_outage_prob(-0.1f64, 2).is_err());
        assert!(tb_channel_outage_prob(f64::NAN, 2).is_err());
        assert_eq!(
            tb_channel_outage_prob(0.1f64, 0),
            Err(LinkError::InvalidCbCount(0))
        );
    }

    proptest! {
        #[test]
        fn segmentation_is_balanced(tb in 1u32..200_000) {
            let cbs = segment_tb(tb);
            prop_assert_eq!(cbs.len() as u32, tb.div_ceil(MAX_CB_BITS));
            prop_assert_eq!(cbs.iter().sum::<u32>(), tb);
            let max = *cbs.iter().max().unwrap();
            let min = *cbs.iter().min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert!(max <= MAX_CB_BITS);
        }

        #[test]
        fn outage_grows_with_cb_count(eps in 0.0f64..=1.0, c in 1u32..12) {
            let a = tb_channel_outage_prob(eps, c).unwrap();
            let b = tb_channel_outage_prob(eps, c + 1).unwrap();
            prop_assert!(a <= b + 1e-15);
            prop_assert!(a >= eps - 1e-15);
        }
    }
}
