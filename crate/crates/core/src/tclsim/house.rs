use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Cooling,
    Heating,
}

/// One air-conditioned (or heated) house in the first-order equivalent
/// thermal parameter form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TclHouse {
    /// Thermal resistance, °C/kW.
    pub r: f64,
    /// Thermal capacitance, kWh/°C.
    pub c_th: f64,
    /// Rated electrical power, kW.
    pub p_rated: f64,
    /// Coefficient of performance.
    pub eta: f64,
    pub setpoint: f64,
    pub deadband: f64,
    pub mode: Mode,
    pub on: bool,
    /// Indoor temperature, °C.
    pub theta: f64,
}

impl TclHouse {
    /// Time constant R·C_th in hours.
    pub fn time_constant_h(&self) -> f64 {
        self.r * self.c_th
    }

    /// Temperature offset sustained by the running unit, η·P_r·R.
    pub fn capacity_c(&self) -> f64 {
        self.eta * self.p_rated * self.r
    }

    /// Advances by `dt_min` minutes with a precomputed decay factor
    /// `exp(-dt / (R·C_th))`; returns the electrical energy drawn (kWh).
    pub fn advance(&mut self, t_amb: f64, dt_min: f64, decay: f64, powered: bool) -> f64 {
        let m = if powered && self.on { 1.0 } else { 0.0 };
        let drive = match self.mode {
            Mode::Cooling => t_amb - m * self.capacity_c(),
            Mode::Heating => t_amb + m * self.capacity_c(),
        };
        self.theta = drive + (self.theta - drive) * decay;
        let energy = m * self.p_rated * dt_min / 60.0;
        let (upper, lower) = (
            self.setpoint + 0.5 * self.deadband,
            self.setpoint - 0.5 * self.deadband,
        );
        self.on = if !powered {
            false
        } else {
            match self.mode {
                Mode::Cooling if self.theta > upper => true,
                Mode::Cooling if self.theta < lower => false,
                Mode::Heating if self.theta < lower => true,
                Mode::Heating if self.theta > upper => false,
                _ => self.on,
            }
        };
        energy
    }

    pub fn decay(&self, dt_min: f64) -> f64 {
        (-dt_min / 60.0 / self.time_constant_h()).exp()
    }
}

/// One integration step of `dt_min` minutes; returns the updated house and the
/// energy drawn during the step (kWh).
pub fn step_house(house: &TclHouse, t_amb: f64, dt_min: f64, powered: bool) -> (TclHouse, f64) {
    let mut next = house.clone();
    let e = next.advance(t_amb, dt_min, house.decay(dt_min), powered);
    (next, e)
}
