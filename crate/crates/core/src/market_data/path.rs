use crate::error::{Error, Result};

/// A change of state: the path enters `state` at minute `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub state: usize,
    pub time: usize,
}

/// Per-minute states together with the embedded jump records.
///
/// The first record is always `(z(0), 0)`; every later record marks a minute
/// whose state differs from the previous minute's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    n_states: usize,
    states: Vec<usize>,
    transitions: Vec<Transition>,
}

impl StatePath {
    pub fn from_states(states: Vec<usize>, n_states: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(&bad) = states.iter().find(|&&k| k >= n_states) {
            return Err(Error::InvalidParameter(format!(
                "state {bad} out of range for {n_states} states"
            )));
        }
        let mut transitions = vec![Transition {
            state: states[0],
            time: 0,
        }];
        for (t, w) in states.windows(2).enumerate() {
            if w[1] != w[0] {
                transitions.push(Transition {
                    state: w[1],
                    time: t + 1,
                });
            }
        }
        Ok(Self {
            n_states,
            states,
            transitions,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Number of the last transition at or before `t`.
    pub fn transition_count_at(&self, t: usize) -> usize {
        self.transitions.partition_point(|tr| tr.time <= t) - 1
    }

    /// Minutes elapsed since the last transition at or before `t`.
    pub fn backward_time(&self, t: usize) -> usize {
        t - self.transitions[self.transition_count_at(t)].time
    }

    /// Backward recurrence time for every minute.
    pub fn backward_times(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut u = 0usize;
        for (t, &k) in self.states.iter().enumerate() {
            if t > 0 && k == self.states[t - 1] {
                u += 1;
            } else {
                u = 0;
            }
            out.push(u);
        }
        out
    }

    /// Drops the first `skip` minutes; the remaining first minute opens a new
    /// record at time 0.
    pub fn skip_minutes(&self, skip: usize) -> Result<Self> {
        Self::from_states(self.states[skip.min(self.states.len())..].to_vec(), self.n_states)
    }
}
