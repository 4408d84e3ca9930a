//! Placement-randomization permutation test.
//!
//! The null re-places the same number of entries, with the same directions,
//! at uniformly random admissible (day, bar) positions and re-simulates them
//! under the same exit and friction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::StatsError;
use crate::execution::{fill, Entry, ExitSpec, FrictionModel, SkipReason, TradeRecord};
use crate::market::{Price, TradingDay};

pub const MIN_ITERATIONS: usize = 1000;
const MAX_REDRAWS: usize = 1000;

/// Trades that share one exit rule and one pool of days to re-place into.
#[derive(Debug, Clone, Copy)]
pub struct PermutationGroup<'a> {
    pub trades: &'a [TradeRecord],
    pub day_pool: &'a [TradingDay],
    pub exit: &'a ExitSpec,
}

/// `p = (1 + #{null total net ≥ observed total net}) / (iterations + 1)`.
/// Iteration `k` draws from its own ChaCha stream, so the result does not
/// depend on thread scheduling.
pub fn permutation_test(
    trades: &[TradeRecord],
    day_pool: &[TradingDay],
    exit: &ExitSpec,
    friction: &FrictionModel,
    iterations: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    permutation_test_grouped(
        &[PermutationGroup {
            trades,
            day_pool,
            exit,
        }],
        friction,
        iterations,
        seed,
    )
}

struct Prepared<'a> {
    group: PermutationGroup<'a>,
    slots: Vec<(usize, usize)>,
    costs: Vec<Price>,
}

/// As [`permutation_test`], with each group's trades re-placed within its
/// own day pool under its own exit; the statistic is the total over groups.
pub fn permutation_test_grouped(
    groups: &[PermutationGroup<'_>],
    friction: &FrictionModel,
    iterations: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    if groups.iter().all(|g| g.trades.is_empty()) {
        return Err(StatsError::NoTrades);
    }
    if iterations < MIN_ITERATIONS {
        return Err(StatsError::TooFewIterations {
            min: MIN_ITERATIONS,
            got: iterations,
        });
    }
    let mut prepared = Vec::new();
    for &group in groups.iter().filter(|g| !g.trades.is_empty()) {
        let exit = group.exit;
        let slots: Vec<(usize, usize)> = group
            .day_pool
            .iter()
            .enumerate()
            .flat_map(|(d, day)| {
                (0..day.len())
                    .filter(move |&b| exit.admits(day, b))
                    .map(move |b| (d, b))
            })
            .collect();
        if slots.is_empty() {
            return Err(StatsError::NoPlacements(exit.to_string()));
        }
        let costs: Vec<Price> = group
            .day_pool
            .iter()
            .map(|d| {
                friction
                    .ticks(d.tick)
                    .map_err(|e| StatsError::Evaluation(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        prepared.push(Prepared {
            group,
            slots,
            costs,
        });
    }
    let observed: i64 = prepared
        .iter()
        .flat_map(|p| p.group.trades)
        .map(|t| t.net.0)
        .sum();

    let exceed: Result<Vec<bool>, StatsError> = (0..iterations)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut total = 0i64;
            for p in &prepared {
                let exit = p.group.exit;
                for t in p.group.trades {
                    let mut tries = 0;
                    let net = loop {
                        let (d, b) = p.slots[rng.random_range(0..p.slots.len())];
                        let e = Entry {
                            family: t.family,
                            direction: t.direction,
                            signal_bar: b,
                            entry_limit: None,
                        };
                        match fill(&p.group.day_pool[d], e, exit, p.costs[d]) {
                            Ok(r) => break r.net.0,
                            Err(SkipReason::LimitUnfilled) if tries < MAX_REDRAWS => tries += 1,
                            Err(_) => return Err(StatsError::NoPlacements(exit.to_string())),
                        }
                    };
                    total += net;
                }
            }
            Ok(total >= observed)
        })
        .collect();
    let hits = exceed?.into_iter().filter(|&b| b).count();
    Ok((1 + hits) as f64 / (iterations + 1) as f64)
}
