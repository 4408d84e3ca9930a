//! Day-level primitives: opening range, overnight gap, running extremes.

use serde::{Deserialize, Serialize};

use super::{MarketDataError, Price, TradingDay};

/// Bars 0..OPENING_RANGE_BARS form the opening range (09:30–09:55 on RTH).
pub const OPENING_RANGE_BARS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayPrimitives {
    pub opening_range_high: Price,
    pub opening_range_low: Price,
    /// Session open minus prior RTH close.
    pub overnight_gap: Option<Price>,
    /// Close of bar 5 minus open of bar 0.
    pub first30_return: Price,
    pub first_bar_volume: u64,
    /// Highest high over bars `0..=i`.
    pub session_high_so_far: Vec<Price>,
    /// Lowest low over bars `0..=i`.
    pub session_low_so_far: Vec<Price>,
}

pub fn day_primitives(day: &TradingDay) -> Result<DayPrimitives, MarketDataError> {
    if day.bars.len() < OPENING_RANGE_BARS {
        return Err(MarketDataError::TooFewBars {
            date: day.date,
            have: day.bars.len(),
            need: OPENING_RANGE_BARS,
        });
    }
    let or = &day.bars[..OPENING_RANGE_BARS];
    let opening_range_high = or.iter().map(|b| b.high).max().unwrap();
    let opening_range_low = or.iter().map(|b| b.low).min().unwrap();

    let mut session_high_so_far = Vec::with_capacity(day.bars.len());
    let mut session_low_so_far = Vec::with_capacity(day.bars.len());
    let (mut hi, mut lo) = (day.bars[0].high, day.bars[0].low);
    for b in &day.bars {
        hi = hi.max(b.high);
        lo = lo.min(b.low);
        session_high_so_far.push(hi);
        session_low_so_far.push(lo);
    }

    Ok(DayPrimitives {
        opening_range_high,
        opening_range_low,
        overnight_gap: day.prior_rth_close.map(|c| day.bars[0].open - c),
        first30_return: or[OPENING_RANGE_BARS - 1].close - or[0].open,
        first_bar_volume: day.bars[0].volume,
        session_high_so_far,
        session_low_so_far,
    })
}
