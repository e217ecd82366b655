//! UAVs joining or leaving the swarm in the middle of training.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::AVERAGE_WINDOW;
use crate::env::SwarmEnv;
use crate::error::{Error, Result};
use crate::ppo::{moving_average, EpisodeRecord, Trainer};
use crate::swarm::UavSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwarmChange {
    Add(UavSpec),
    Remove(usize),
}

/// `change` is applied once `episode` training episodes have finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmEvent {
    pub episode: usize,
    pub change: SwarmChange,
}

/// How accuracy behaved around one event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub event_episode: usize,
    /// Mean accuracy of the window before the event.
    pub pre_average: f64,
    /// Lowest post-event moving average.
    pub post_minimum: f64,
    /// Post-event episodes until the full-window moving average reached
    /// 95% of `pre_average` again.
    pub recovered_after: Option<usize>,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicRun {
    pub records: Vec<EpisodeRecord>,
    pub recoveries: Vec<Recovery>,
}

/// Checks that events are ordered and keep `|hot| <= N <= C` throughout.
pub fn check_events(cfg: &ExperimentConfig, events: &[SwarmEvent], total_episodes: usize) -> Result<()> {
    let hot = cfg.grid.hot_cells.len();
    let cells = cfg.grid.num_cells();
    let mut n = cfg.swarm.count;
    let mut last = 0;
    for ev in events {
        if ev.episode < last || ev.episode > total_episodes {
            return Err(Error::config(format!("event at episode {} is out of order or past the run", ev.episode)));
        }
        last = ev.episode;
        n = match &ev.change {
            SwarmChange::Add(spec) => {
                spec.validate()?;
                n + 1
            }
            SwarmChange::Remove(i) if *i < n => n - 1,
            SwarmChange::Remove(i) => {
                return Err(Error::config(format!("event at episode {} removes missing UAV {i}", ev.episode)))
            }
        };
        if n < hot.max(1) || n > cells {
            return Err(Error::config(format!(
                "event at episode {} leaves {n} UAVs, outside [{}, {cells}]",
                ev.episode,
                hot.max(1)
            )));
        }
    }
    Ok(())
}

/// Measures the dip and recovery around an event at `event` episodes.
pub fn recovery_after(accuracy: &[f64], event: usize, budget: usize) -> Recovery {
    let pre = &accuracy[event.saturating_sub(AVERAGE_WINDOW)..event];
    let pre_average = if pre.is_empty() {
        0.0
    } else {
        pre.iter().sum::<f64>() / pre.len() as f64
    };
    let post_ma = moving_average(&accuracy[event..], AVERAGE_WINDOW);
    let post_minimum = post_ma.iter().copied().fold(f64::INFINITY, f64::min);
    let recovered_after = post_ma
        .iter()
        .enumerate()
        .skip(AVERAGE_WINDOW - 1)
        .find(|(_, &m)| m >= 0.95 * pre_average)
        .map(|(k, _)| k + 1);
    Recovery {
        event_episode: event,
        pre_average,
        post_minimum,
        recovered_after,
        within_budget: recovered_after.is_some_and(|k| k <= budget),
    }
}

/// Trains for `total_episodes` episodes, applying `events` between
/// episodes. The policy keeps its weights across events: the observation
/// does not depend on the swarm size. `budget` is the number of post-event
/// episodes allowed for recovery.
pub fn dynamic_swarm_run(
    cfg: &ExperimentConfig,
    events: &[SwarmEvent],
    total_episodes: usize,
    budget: usize,
) -> Result<DynamicRun> {
    cfg.validate()?;
    check_events(cfg, events, total_episodes)?;
    let env = SwarmEnv::new(cfg.shared_episode_config()?, cfg.seed)?;
    let mut trainer = Trainer::new(env, cfg.train.clone(), cfg.seed)?;
    for ev in events {
        let pending = ev.episode - trainer.records().len();
        trainer.run_episodes(pending)?;
        match &ev.change {
            SwarmChange::Add(spec) => trainer.env_mut().add_uav(spec.clone())?,
            SwarmChange::Remove(i) => trainer.env_mut().remove_uav(*i)?,
        }
    }
    let pending = total_episodes - trainer.records().len();
    trainer.run_episodes(pending)?;
    let records = trainer.records().to_vec();
    let accuracy: Vec<f64> = records.iter().map(|r| r.accuracy).collect();
    let recoveries = events.iter().map(|ev| recovery_after(&accuracy, ev.episode, budget)).collect();
    Ok(DynamicRun { records, recoveries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(count: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.swarm.count = count;
        c
    }

    fn spec() -> UavSpec {
        UavSpec {
            speed: 256e6,
            memory: 1 << 30,
            compute: 1 << 40,
        }
    }

    #[test]
    fn events_below_hot_cells_are_rejected() {
        let c = cfg(3);
        let ok = [SwarmEvent {
            episode: 5,
            change: SwarmChange::Add(spec()),
        }];
        check_events(&c, &ok, 10).unwrap();
        let bad = [SwarmEvent {
            episode: 5,
            change: SwarmChange::Remove(0),
        }];
        assert_eq!(check_events(&c, &bad, 10).unwrap_err().exit_code(), 2);
        let unordered = [ok[0].clone(), SwarmEvent { episode: 2, ..ok[0].clone() }];
        assert!(check_events(&c, &unordered, 10).is_err());
    }

    #[test]
    fn recovery_detects_dip() {
        let mut acc = vec![1.0; 200];
        acc.extend(vec![0.5; 50]);
        acc.extend(vec![1.0; 300]);
        let r = recovery_after(&acc, 200, 400);
        assert_eq!(r.pre_average, 1.0);
        assert_eq!(r.post_minimum, 0.5);
        // The full window reaches 95% once at most 10 of its values are 0.5.
        assert_eq!(r.recovered_after, Some(140));
        assert!(r.within_budget);
        assert!(!recovery_after(&acc, 200, 100).within_budget);
    }
}
