//! Logarithmic market scoring rule baseline with myopic Bayesian traders.
//!
//! Prices are `softmax(q / b)`; the cost function is
//! `C(q) = b · ln Σ_j exp(q_j / b)`, so the market maker's worst-case
//! loss is bounded by `b · ln(#outcomes)`. Traders condition only on
//! their own private signal and the public prior, not on the price path,
//! and each trades the market to its posterior belief.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{InformationStructure, ReportProfile};

/// Belief entries closer to the current price than this trigger no trade.
pub const NO_TRADE_TOL: f64 = 1e-12;

/// One executed trade leg. A trade that adjusts several outcomes logs one
/// record per leg, applied sequentially; leg costs sum to the trade cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeRecord {
    pub step: usize,
    pub agent: usize,
    pub outcome: usize,
    pub shares: f64,
    pub cost: f64,
    pub price_after: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketState {
    b: f64,
    quantities: Vec<f64>,
    trade_log: Vec<TradeRecord>,
    steps: usize,
}

impl MarketState {
    pub fn new(b: f64, n_outcomes: usize) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "liquidity b must be positive, got {b}"
            )));
        }
        if n_outcomes < 2 {
            return Err(Error::InvalidParameter(
                "market needs at least 2 outcomes".into(),
            ));
        }
        Ok(Self {
            b,
            quantities: vec![0.0; n_outcomes],
            trade_log: Vec::new(),
            steps: 0,
        })
    }

    pub fn liquidity(&self) -> f64 {
        self.b
    }

    pub fn quantities(&self) -> &[f64] {
        &self.quantities
    }

    pub fn trade_log(&self) -> &[TradeRecord] {
        &self.trade_log
    }

    /// `C(q) = b · ln Σ exp(q_j / b)`, evaluated stably.
    pub fn cost(&self) -> f64 {
        cost_fn(self.b, &self.quantities)
    }

    /// Instantaneous prices, a normalized probability vector.
    pub fn price(&self) -> Vec<f64> {
        let max = self
            .quantities
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self
            .quantities
            .iter()
            .map(|&q| ((q - max) / self.b).exp())
            .collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Buy/sell the unique bundle moving prices to `belief`. Returns
    /// `false` (and logs nothing) when the belief already matches the
    /// price. A belief with a zero entry is rejected: matching it would
    /// require an unbounded short position.
    pub fn trade_to_belief(&mut self, agent: usize, belief: &[f64]) -> Result<bool> {
        if belief.len() != self.quantities.len() {
            return Err(Error::InvalidParameter(format!(
                "belief has {} entries for {} outcomes",
                belief.len(),
                self.quantities.len()
            )));
        }
        let sum: f64 = belief.iter().sum();
        if belief.iter().any(|&p| !p.is_finite() || p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "belief must be a normalized probability vector".into(),
            ));
        }
        let price = self.price();
        if belief
            .iter()
            .zip(&price)
            .all(|(b, p)| (b - p).abs() <= NO_TRADE_TOL)
        {
            return Ok(false);
        }
        if belief.iter().any(|&p| p == 0.0) {
            return Err(Error::DegenerateBelief);
        }

        let step = self.steps;
        self.steps += 1;
        for outcome in 0..self.quantities.len() {
            let delta = self.b * (belief[outcome].ln() - price[outcome].ln());
            if delta == 0.0 {
                continue;
            }
            let before = self.cost();
            self.quantities[outcome] += delta;
            let leg_cost = self.cost() - before;
            self.trade_log.push(TradeRecord {
                step,
                agent,
                outcome,
                shares: delta,
                cost: leg_cost,
                price_after: self.price(),
            });
        }
        Ok(true)
    }
}

fn cost_fn(b: f64, q: &[f64]) -> f64 {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = q.iter().map(|&x| ((x - max) / b).exp()).sum();
    max + b * sum.ln()
}

/// A trader's myopic posterior over market outcomes given only its own
/// signal: `P(m | s_i) ∝ Σ_{w : map(w) = m} prior(w) · P(s_i | w)`.
pub fn trader_belief(
    structure: &InformationStructure,
    market_outcome_map: &[usize],
    agent: usize,
    signal: usize,
    n_market_outcomes: usize,
) -> Result<Vec<f64>> {
    let ch = structure.channel(agent);
    let mut belief = vec![0.0; n_market_outcomes];
    let mut total = 0.0;
    for world in 0..structure.world_count() {
        let p = structure.world_space().prior()[world] * ch.likelihood(world, signal);
        belief[market_outcome_map[world]] += p;
        total += p;
    }
    if total <= 0.0 {
        return Err(Error::ImpossibleProfile);
    }
    for p in &mut belief {
        *p /= total;
    }
    Ok(belief)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketRun {
    pub final_price: Vec<f64>,
    pub trade_log: Vec<TradeRecord>,
    pub maker_cost: f64,
}

/// Run the sequential market: traders act in `order`, each trading to the
/// myopic posterior implied by its private signal in `realization`.
///
/// `market_outcome_map` sends each world to a market outcome index; the
/// market has `max(map) + 1` outcomes.
pub fn run_market(
    structure: &InformationStructure,
    market_outcome_map: &[usize],
    order: &[usize],
    realization: &ReportProfile,
    b: f64,
) -> Result<MarketRun> {
    if market_outcome_map.len() != structure.world_count() {
        return Err(Error::InvalidParameter(format!(
            "market outcome map covers {} worlds, structure has {}",
            market_outcome_map.len(),
            structure.world_count()
        )));
    }
    if realization.symbols.len() != structure.agent_count() {
        return Err(Error::ProfileLengthMismatch {
            expected: structure.agent_count(),
            got: realization.symbols.len(),
        });
    }
    let n_market_outcomes = market_outcome_map.iter().max().unwrap() + 1;
    let mut state = MarketState::new(b, n_market_outcomes)?;
    let initial_cost = state.cost();
    for &agent in order {
        if agent >= structure.agent_count() {
            return Err(Error::InvalidParameter(format!(
                "unknown agent {agent} in trading order"
            )));
        }
        let belief = trader_belief(
            structure,
            market_outcome_map,
            agent,
            realization.symbols[agent],
            n_market_outcomes,
        )?;
        state.trade_to_belief(agent, &belief)?;
    }
    Ok(MarketRun {
        final_price: state.price(),
        maker_cost: state.cost() - initial_cost,
        trade_log: state.trade_log,
    })
}

/// CSV rendering of a trade log: `step, agent, outcome, shares, cost,
/// price_after` with the price vector joined by `;`.
pub fn trade_log_csv(log: &[TradeRecord]) -> String {
    let mut out = String::from("step,agent,outcome,shares,cost,price_after\n");
    for rec in log {
        let price = rec
            .price_after
            .iter()
            .map(|p| format!("{p}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.step, rec.agent, rec.outcome, rec.shares, rec.cost, price
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_xor, xor_world_parity};

    #[test]
    fn fresh_market_prices_uniformly() {
        let m = MarketState::new(10.0, 3).unwrap();
        for p in m.price() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(MarketState::new(0.0, 2).is_err());
        assert!(MarketState::new(10.0, 1).is_err());
    }

    #[test]
    fn price_is_softmax_of_quantities() {
        let b = 2.0;
        let mut m = MarketState::new(b, 2).unwrap();
        // push q0 so that exp(q0/b) = 3 exp(q1/b)
        m.trade_to_belief(0, &[0.75, 0.25]).unwrap();
        let price = m.price();
        assert!((price[0] - 0.75).abs() < 1e-12);
        let q = m.quantities();
        assert!(((q[0] - q[1]) - b * 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn trade_moves_price_to_belief() {
        let mut m = MarketState::new(5.0, 3).unwrap();
        let belief = [0.2, 0.5, 0.3];
        assert!(m.trade_to_belief(1, &belief).unwrap());
        for (p, target) in m.price().iter().zip(belief) {
            assert!((p - target).abs() < 1e-12);
        }
        // trading to the current price is a no-op and logs nothing
        let log_len = m.trade_log().len();
        assert!(!m.trade_to_belief(2, &belief).unwrap());
        assert_eq!(m.trade_log().len(), log_len);
    }

    #[test]
    fn zero_belief_entry_is_rejected() {
        let mut m = MarketState::new(5.0, 2).unwrap();
        assert!(matches!(
            m.trade_to_belief(0, &[1.0, 0.0]),
            Err(Error::DegenerateBelief)
        ));
    }

    #[test]
    fn leg_costs_sum_to_cost_delta() {
        let mut m = MarketState::new(3.0, 3).unwrap();
        let before = m.cost();
        m.trade_to_belief(0, &[0.6, 0.3, 0.1]).unwrap();
        let after = m.cost();
        let logged: f64 = m.trade_log().iter().map(|r| r.cost).sum();
        assert!((logged - (after - before)).abs() < 1e-9);
    }

    #[test]
    fn xor_market_never_trades() {
        // each agent sees only one side of the parity, so its myopic
        // posterior over Z stays at the prior and no order moves the price
        let s = build_xor(2.0 / 3.0, 3).unwrap();
        let map: Vec<usize> = (0..4).map(xor_world_parity).collect();
        let order: Vec<usize> = (0..6).collect();
        for (profile, _) in s.enumerate_profiles(1 << 20).unwrap() {
            let run = run_market(&s, &map, &order, &profile, 10.0).unwrap();
            assert!(run.trade_log.is_empty());
            assert!((run.final_price[0] - 0.5).abs() < NO_TRADE_TOL);
            assert!(run.maker_cost.abs() < 1e-9);
        }
    }

    #[test]
    fn direct_signal_market_aggregates() {
        // market over the world itself: a p = 2/3 observer moves the
        // price to its posterior (2/3, 1/3)
        let s = build_xor(2.0 / 3.0, 1).unwrap();
        let map = vec![0, 0, 1, 1]; // world -> X
        let run = run_market(&s, &map, &[0], &ReportProfile::new(vec![0, 0]), 10.0).unwrap();
        assert!((run.final_price[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!(!run.trade_log.is_empty());
    }

    #[test]
    fn maker_loss_is_bounded() {
        // worst-case maker subsidy for b and m outcomes is b ln m
        let s = build_xor(0.9, 1).unwrap();
        let map = vec![0, 0, 1, 1];
        let b = 4.0;
        for (profile, _) in s.enumerate_profiles(1 << 10).unwrap() {
            let run = run_market(&s, &map, &[0, 1, 0, 1], &profile, b).unwrap();
            assert!(run.maker_cost <= b * 2.0f64.ln() + 1e-9);
        }
    }

    #[test]
    fn run_market_validates_inputs() {
        let s = build_xor(2.0 / 3.0, 1).unwrap();
        let profile = ReportProfile::new(vec![0, 0]);
        assert!(run_market(&s, &[0, 0, 1], &[0], &profile, 1.0).is_err());
        assert!(run_market(&s, &[0, 0, 1, 1], &[5], &profile, 1.0).is_err());
        assert!(run_market(&s, &[0, 0, 1, 1], &[0], &ReportProfile::new(vec![0]), 1.0).is_err());
    }

    #[test]
    fn csv_round_trip_shape() {
        let mut m = MarketState::new(2.0, 2).unwrap();
        m.trade_to_belief(0, &[0.7, 0.3]).unwrap();
        let csv = trade_log_csv(m.trade_log());
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "step,agent,outcome,shares,cost,price_after");
        assert_eq!(lines.len(), 1 + m.trade_log().len());
        assert!(lines[1].starts_with("0,0,"));
    }
}
