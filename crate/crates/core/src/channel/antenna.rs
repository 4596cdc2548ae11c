use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};
use crate::model::Direction;

const ANGLE_EPS: f64 = 1e-12;

/// Sector antenna: unit gain inside the main beam, a fixed sidelobe loss up to
/// ±90°, nothing behind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntennaPattern {
    /// Main-beam width in radians.
    pub theta: f64,
    /// Sidelobe loss in dB.
    pub sidelobe_db: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            theta: PI / 3.0,
            sidelobe_db: 6.0,
        }
    }
}

impl AntennaPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= PI) {
            return Err(invalid("theta_rad", "main-beam width must lie in (0, pi]"));
        }
        if !(self.sidelobe_db >= 0.0) {
            return Err(invalid("sidelobe_db", "sidelobe loss must be >= 0 dB"));
        }
        Ok(())
    }

    pub fn sidelobe_gain(&self) -> f64 {
        10f64.powf(-self.sidelobe_db / 10.0)
    }
}

/// Linear gain at `angle` radians off boresight, `angle` in [0, pi].
/// Both boundaries belong to the stronger region.
pub fn antenna_gain(angle: f64, pattern: &AntennaPattern) -> f64 {
    if angle <= pattern.theta / 2.0 + ANGLE_EPS {
        1.0
    } else if angle <= FRAC_PI_2 + ANGLE_EPS {
        pattern.sidelobe_gain()
    } else {
        0.0
    }
}

/// Angle in [0, pi] between an antenna's boresight and the direction from
/// `from` towards `to`. Positions are (along-track, across-track).
pub fn angle_off_boresight(boresight: Direction, from: (f64, f64), to: (f64, f64)) -> f64 {
    let dx = to.0 - from.0;
    let dy = (to.1 - from.1).abs();
    match boresight {
        Direction::Right => dy.atan2(dx),
        Direction::Left => dy.atan2(-dx),
    }
}
