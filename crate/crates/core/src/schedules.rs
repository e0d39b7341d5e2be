//! Synchronization schedules: the sets of iteration indices at which workers
//! aggregate their iterates.
//!
//! A schedule over horizon `T` is a strictly increasing set of steps in
//! `[1, T]` that always contains `T` itself — every run ends synchronized,
//! so the final iterate is common to all workers. The *gap* of a schedule is
//! the largest stretch of consecutive local steps, measured from step 0:
//! for steps `{t_1 < … < t_s = T}` it is `max(t_1 - 0, t_2 - t_1, …)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("horizon {horizon} is not a multiple of period {period}")]
    HorizonNotMultiple { horizon: usize, period: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("cannot parse schedule descriptor {0:?}")]
    UnknownDescriptor(String),
}

/// Strictly increasing synchronization steps over a fixed horizon; the last
/// step always equals the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncSchedule {
    horizon: usize,
    steps: Vec<usize>,
}

impl SyncSchedule {
    /// Fixed period `p`: steps `{p, 2p, …, T}`. The horizon must be a
    /// multiple of the period — the schedule is rejected rather than
    /// silently extended, so the stated period is honored exactly.
    pub fn every_p(horizon: usize, period: usize) -> Result<Self, ScheduleError> {
        if horizon == 0 || period == 0 {
            return Err(ScheduleError::InvalidSchedule(format!(
                "horizon {horizon} and period {period} must be positive"
            )));
        }
        if !horizon.is_multiple_of(period) {
            return Err(ScheduleError::HorizonNotMultiple { horizon, period });
        }
        let steps = (1..=horizon / period).map(|i| i * period).collect();
        Ok(SyncSchedule { horizon, steps })
    }

    /// Every step synchronizes: classical distributed power iteration.
    pub fn full(horizon: usize) -> Result<Self, ScheduleError> {
        Self::every_p(horizon, 1)
    }

    /// Decaying intervals: the l-th step is the partial sum
    /// `sum_{i=0}^{l} max(p - i, 1)`, i.e. gaps `p, p-1, …, 2, 1, 1, …`.
    /// Only sums `<= T` are kept and `T` is appended when the last partial
    /// sum falls short, so the horizon is always a member.
    pub fn decay(horizon: usize, period: usize) -> Result<Self, ScheduleError> {
        if horizon == 0 || period == 0 {
            return Err(ScheduleError::InvalidSchedule(format!(
                "horizon {horizon} and period {period} must be positive"
            )));
        }
        let mut steps = Vec::new();
        let mut sum = 0usize;
        let mut i = 0usize;
        loop {
            sum += period.saturating_sub(i).max(1);
            if sum > horizon {
                break;
            }
            steps.push(sum);
            if sum == horizon {
                break;
            }
            i += 1;
        }
        if steps.last() != Some(&horizon) {
            steps.push(horizon);
        }
        Ok(SyncSchedule { horizon, steps })
    }

    /// Single synchronization at the very end.
    pub fn oneshot(horizon: usize) -> Result<Self, ScheduleError> {
        if horizon == 0 {
            return Err(ScheduleError::InvalidSchedule(
                "horizon must be positive".into(),
            ));
        }
        Ok(SyncSchedule {
            horizon,
            steps: vec![horizon],
        })
    }

    /// Explicit steps. They must be strictly increasing, lie in `[1, T]`,
    /// and include `T` itself (consistent with `every_p`, membership of the
    /// horizon is checked, not patched in).
    pub fn from_steps(horizon: usize, steps: Vec<usize>) -> Result<Self, ScheduleError> {
        if steps.is_empty() {
            return Err(ScheduleError::InvalidSchedule(
                "schedule needs at least one step".into(),
            ));
        }
        for w in steps.windows(2) {
            if w[1] <= w[0] {
                return Err(ScheduleError::InvalidSchedule(format!(
                    "steps must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if steps[0] == 0 {
            return Err(ScheduleError::InvalidSchedule(
                "steps start at 1 (step 0 is the shared initialization)".into(),
            ));
        }
        if *steps.last().unwrap() != horizon {
            return Err(ScheduleError::InvalidSchedule(format!(
                "last step {} must equal the horizon {}",
                steps.last().unwrap(),
                horizon
            )));
        }
        Ok(SyncSchedule { horizon, steps })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Number of synchronizations (= communication rounds) in the schedule.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a valid schedule always contains the horizon
    }

    pub fn contains(&self, t: usize) -> bool {
        self.steps.binary_search(&t).is_ok()
    }

    /// Largest number of consecutive local steps between synchronizations,
    /// with step 0 prepended as the initial synchronization point.
    pub fn gap(&self) -> usize {
        let mut prev = 0usize;
        let mut max_gap = 0usize;
        for &s in &self.steps {
            max_gap = max_gap.max(s - prev);
            prev = s;
        }
        max_gap
    }
}

/// Parsed schedule descriptor, independent of any particular horizon.
///
/// Text forms: `full`, `every:<p>`, `decay:<p>`, `oneshot`,
/// `steps:<t1>,<t2>,…`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleSpec {
    Full,
    Every(usize),
    Decay(usize),
    Oneshot,
    Explicit(Vec<usize>),
}

impl ScheduleSpec {
    /// Instantiate the descriptor over a concrete horizon.
    pub fn build(&self, horizon: usize) -> Result<SyncSchedule, ScheduleError> {
        match self {
            ScheduleSpec::Full => SyncSchedule::full(horizon),
            ScheduleSpec::Every(p) => SyncSchedule::every_p(horizon, *p),
            ScheduleSpec::Decay(p) => SyncSchedule::decay(horizon, *p),
            ScheduleSpec::Oneshot => SyncSchedule::oneshot(horizon),
            ScheduleSpec::Explicit(steps) => SyncSchedule::from_steps(horizon, steps.clone()),
        }
    }
}

impl FromStr for ScheduleSpec {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "full" {
            return Ok(ScheduleSpec::Full);
        }
        if s == "oneshot" {
            return Ok(ScheduleSpec::Oneshot);
        }
        if let Some(rest) = s.strip_prefix("every:") {
            let p = rest
                .parse::<usize>()
                .map_err(|_| ScheduleError::UnknownDescriptor(s.into()))?;
            return Ok(ScheduleSpec::Every(p));
        }
        if let Some(rest) = s.strip_prefix("decay:") {
            let p = rest
                .parse::<usize>()
                .map_err(|_| ScheduleError::UnknownDescriptor(s.into()))?;
            return Ok(ScheduleSpec::Decay(p));
        }
        if let Some(rest) = s.strip_prefix("steps:") {
            let steps = rest
                .split(',')
                .map(|tok| tok.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ScheduleError::UnknownDescriptor(s.into()))?;
            return Ok(ScheduleSpec::Explicit(steps));
        }
        Err(ScheduleError::UnknownDescriptor(s.into()))
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Full => write!(f, "full"),
            ScheduleSpec::Every(p) => write!(f, "every:{p}"),
            ScheduleSpec::Decay(p) => write!(f, "decay:{p}"),
            ScheduleSpec::Oneshot => write!(f, "oneshot"),
            ScheduleSpec::Explicit(steps) => {
                write!(f, "steps:")?;
                for (i, s) in steps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
        }
    }
}
