use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "tick,picks_completed,orders_completed,robot_downtime_ticks,mean_robot_utilization,min_human_robot_distance_m,encounter_ticks,vest_stop_events,vest_slow_events";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub picks_completed: u64,
    pub orders_completed: u64,
    /// Robot-ticks where a robot wanted to move but did not.
    pub robot_downtime_ticks: u64,
    /// Robot-ticks spent with a job.
    pub busy_robot_ticks: u64,
    pub robot_ticks: u64,
    /// Smallest worker-robot distance seen while a worker was inside.
    pub min_human_robot_distance_m: Option<f64>,
    /// Worker-ticks with some robot inside the slow radius.
    pub encounter_ticks: u64,
    pub vest_stop_events: u64,
    pub vest_slow_events: u64,
    /// Ticks from order creation to pick, one entry per pick.
    pub pick_completion_ticks: Vec<u64>,
}

impl Metrics {
    pub fn mean_robot_utilization(&self) -> f64 {
        if self.robot_ticks == 0 {
            0.0
        } else {
            self.busy_robot_ticks as f64 / self.robot_ticks as f64
        }
    }

    pub fn observe_distance(&mut self, d: f64) {
        self.min_human_robot_distance_m = Some(match self.min_human_robot_distance_m {
            Some(m) => m.min(d),
            None => d,
        });
    }

    /// One CSV row (no newline) stamped with `tick`.
    pub fn csv_row(&self, tick: u64) -> String {
        let min_d = self
            .min_human_robot_distance_m
            .map(|d| format!("{d:.3}"))
            .unwrap_or_default();
        format!(
            "{tick},{},{},{},{:.6},{min_d},{},{},{}",
            self.picks_completed,
            self.orders_completed,
            self.robot_downtime_ticks,
            self.mean_robot_utilization(),
            self.encounter_ticks,
            self.vest_stop_events,
            self.vest_slow_events
        )
    }
}

/// Sampled metric rows plus the final summary row.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsSeries {
    pub rows: Vec<(u64, Metrics)>,
}

impl MetricsSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (tick, m) in &self.rows {
            out.push_str(&m.csv_row(*tick));
            out.push('\n');
        }
        out
    }
}
