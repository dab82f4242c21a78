//! Synthetic event lists drawn from the perturbed fringe density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventList};
use crate::model::{phase_shift, FringeModel, PerturbationComponent};

/// Upper bound on `rate · duration`.
pub const DEFAULT_MAX_EVENTS: f64 = 5e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fringe: FringeModel,
    #[serde(default)]
    pub components: Vec<PerturbationComponent>,
    /// Mean count rate, Hz.
    pub rate: f64,
    /// s
    pub duration: f64,
    /// Detector length across the fringes, mm.
    pub window: f64,
    pub seed: u64,
    /// mm
    #[serde(default = "default_x_extent")]
    pub x_extent: f64,
    #[serde(default = "default_max_events")]
    pub max_events: f64,
}

fn default_x_extent() -> f64 {
    10.0
}

fn default_max_events() -> f64 {
    DEFAULT_MAX_EVENTS
}

impl SimConfig {
    /// Configuration with a window of ten fringe periods.
    pub fn new(fringe: FringeModel, components: Vec<PerturbationComponent>, rate: f64, duration: f64, seed: u64) -> Self {
        SimConfig {
            window: 10.0 * fringe.period,
            fringe,
            components,
            rate,
            duration,
            seed,
            x_extent: default_x_extent(),
            max_events: default_max_events(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fringe.validate()?;
        for c in &self.components {
            c.validate()?;
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::Config(format!("rate must be > 0, got {}", self.rate)));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config(format!("duration must be > 0, got {}", self.duration)));
        }
        if !(self.window >= 2.0 * self.fringe.period) {
            return Err(Error::Config(format!(
                "window {} mm must span at least two periods ({} mm)",
                self.window,
                2.0 * self.fringe.period
            )));
        }
        if !(self.x_extent.is_finite() && self.x_extent > 0.0) {
            return Err(Error::Config(format!("x extent must be > 0, got {}", self.x_extent)));
        }
        let expected = self.rate * self.duration;
        if expected > self.max_events {
            return Err(Error::Config(format!(
                "expected event count {expected:.3e} exceeds the bound {:.3e}",
                self.max_events
            )));
        }
        Ok(())
    }

    /// Whether the window holds an integer number of fringes (to 1e-9).
    pub fn integer_fringes(&self) -> bool {
        let r = self.window / self.fringe.period;
        (r - r.round()).abs() < 1e-9 * r.max(1.0)
    }
}

/// Poisson arrivals on `[0, T]`; each `y` by rejection against the density
/// bound `1 + K₀`; `x` uniform.
pub fn generate_events(config: &SimConfig) -> Result<EventList> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gaps = Exp::new(config.rate).map_err(|e| Error::Config(e.to_string()))?;
    let k = config.fringe.wavenumber();
    let theta = config.fringe.spatial_phase;
    let contrast = config.fringe.contrast;
    let bound = 1.0 + contrast;

    let mut events = Vec::with_capacity((config.rate * config.duration * 1.01) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > config.duration {
            break;
        }
        let phi = phase_shift(&config.components, t);
        let y = loop {
            let y: f64 = rng.random_range(0.0..config.window);
            let u: f64 = rng.random_range(0.0..bound);
            if u < 1.0 + contrast * (k * y + theta + phi).cos() {
                break y;
            }
        };
        let x = rng.random_range(0.0..config.x_extent);
        events.push(Event { x, y, t });
    }
    EventList::new(events, config.duration, config.window)
}
