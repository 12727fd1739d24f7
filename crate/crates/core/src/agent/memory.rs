use serde::{Deserialize, Serialize};

/// Journal and reflection history carried between days of one episode.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub journal: Vec<(u32, String)>,
    pub reflections: Vec<(u32, String)>,
    /// Most recent journal entries to include in a prompt; `None` keeps all.
    pub window: Option<usize>,
    /// Days on which this agent lived through a blackout.
    pub blackouts_seen: Vec<u32>,
}

impl AgentMemory {
    pub fn with_window(window: Option<usize>) -> Self {
        AgentMemory { window, ..Default::default() }
    }

    pub fn record(&mut self, day: u32, journal: &str, reflection: &str, blackout: bool) {
        debug_assert!(self.journal.last().is_none_or(|(d, _)| *d < day), "memory days must increase");
        self.journal.push((day, journal.to_string()));
        self.reflections.push((day, reflection.to_string()));
        if blackout {
            self.blackouts_seen.push(day);
        }
    }

    pub fn recent_journal(&self) -> &[(u32, String)] {
        let n = self.journal.len();
        let keep = self.window.map_or(n, |w| w.min(n));
        &self.journal[n - keep..]
    }

    pub fn len(&self) -> usize {
        self.journal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journal.is_empty()
    }
}
