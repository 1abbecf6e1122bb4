//! Market clearing of bid curves and block orders at realized prices.

use crate::scenarios::Block;
use crate::ModelError;

/// Interpolation weights `(level index, weight)` of the price-dependent
/// volumes dispatched at price `rho`. Prices outside the level range are
/// clamped to the nearest level.
pub fn dispatch_weights(rho: f64, levels: &[f64]) -> Result<Vec<(usize, f64)>, ModelError> {
    if levels.is_empty() {
        return Err(ModelError::Argument("no price levels".into()));
    }
    if levels.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(ModelError::Argument(format!(
            "price levels are not sorted: {levels:?}"
        )));
    }
    let last = levels.len() - 1;
    if rho >= levels[last] {
        return Ok(vec![(last, 1.0)]);
    }
    if rho <= levels[0] {
        return Ok(vec![(0, 1.0)]);
    }
    // levels[i] <= rho < levels[i + 1], so the gap is positive
    let i = levels.partition_point(|&p| p <= rho) - 1;
    let upper = (rho - levels[i]) / (levels[i + 1] - levels[i]);
    Ok(vec![(i, 1.0 - upper), (i + 1, upper)])
}

/// Volume dispatched in one hour: the price-independent volume plus the
/// bid curve interpolated at `rho`.
pub fn hourly_dispatch(
    rho: f64,
    levels: &[f64],
    independent: f64,
    dependent: &[f64],
) -> Result<f64, ModelError> {
    if dependent.len() != levels.len() {
        return Err(ModelError::Argument(format!(
            "{} bid volumes for {} price levels",
            dependent.len(),
            levels.len()
        )));
    }
    let weights = dispatch_weights(rho, levels)?;
    Ok(independent + weights.iter().map(|&(i, w)| w * dependent[i]).sum::<f64>())
}

/// Accepted volume of one block: every level priced at or below the block's
/// mean price is accepted in full.
pub fn accepted_block_volume(mean_price: f64, levels: &[f64], volumes: &[f64]) -> f64 {
    levels
        .iter()
        .zip(volumes)
        .filter(|(p, _)| **p <= mean_price)
        .map(|(_, v)| v)
        .sum()
}

/// Dispatched block volumes for a price curve; `volumes[i][b]` is the bid of
/// level `i` on block `b` and `block_levels[b][i]` its price.
pub fn block_dispatch(
    prices: &[f64],
    blocks: &[Block],
    block_levels: &[Vec<f64>],
    volumes: &[Vec<f64>],
) -> Vec<f64> {
    blocks
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let per_level: Vec<f64> = volumes.iter().map(|v| v[b]).collect();
            accepted_block_volume(block.mean(prices), &block_levels[b], &per_level)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_prices_dispatch_exactly() {
        let levels = [10.0, 20.0, 30.0];
        let vols = [1.0, 4.0, 9.0];
        for (i, &p) in levels.iter().enumerate() {
            assert_eq!(
                hourly_dispatch(p, &levels, 2.0, &vols).unwrap(),
                2.0 + vols[i]
            );
        }
        assert_eq!(hourly_dispatch(25.0, &levels, 0.0, &vols).unwrap(), 6.5);
        assert_eq!(hourly_dispatch(-5.0, &levels, 0.0, &vols).unwrap(), 1.0);
        assert_eq!(hourly_dispatch(99.0, &levels, 0.0, &vols).unwrap(), 9.0);
        assert!(hourly_dispatch(1.0, &[2.0, 1.0], 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn equal_levels_are_handled() {
        assert_eq!(
            dispatch_weights(5.0, &[5.0, 5.0, 5.0]).unwrap(),
            vec![(2, 1.0)]
        );
        assert_eq!(
            dispatch_weights(4.0, &[5.0, 5.0, 5.0]).unwrap(),
            vec![(0, 1.0)]
        );
    }

    #[test]
    fn blocks_accept_all_or_nothing() {
        assert_eq!(
            accepted_block_volume(26.0, &[20.0, 25.0, 30.0], &[5.0, 7.0, 11.0]),
            12.0
        );
        assert_eq!(
            accepted_block_volume(1.0, &[20.0, 25.0, 30.0], &[5.0, 7.0, 11.0]),
            0.0
        );
        assert_eq!(
            accepted_block_volume(31.0, &[20.0, 25.0, 30.0], &[5.0, 7.0, 11.0]),
            23.0
        );
    }
}
